//! Enrolls speakers into a registry and identifies test recordings with
//! z-normalized log-likelihood ratios.

use voxid::eval::experiment::SyntheticWorld;
use voxid::eval::{identify, CohortPolicy, ExperimentConfig, Probe, RegistryEntry, SpeakerRegistry, Trial};
use voxid::{accumulate_stats, map_adapt, DecisionPolicy, ScoringMode, Ubm};

fn main() -> voxid::Result<()> {
    let world = SyntheticWorld::new(&ExperimentConfig::default());
    let ubm = Ubm::new(world.world().clone());
    let mut registry = SpeakerRegistry::new(ubm.clone());
    for s in 0..6 {
        let id = format!("speaker{s}");
        let stats = accumulate_stats(&world.session(&world.speaker_supervector(1, s), s, 3000), &ubm)?;
        registry.insert(RegistryEntry {
            speaker_id: id.clone(),
            cluster_id: (s % 2) as u32,
            model: map_adapt(id, &stats, &ubm, 16.0)?,
            ivector: None,
            language_tag: "English".into(),
            is_impostor: false,
        })?;
    }

    let policy = DecisionPolicy::new(ScoringMode::Llr, 1.5)?;
    for s in [0, 3, 5] {
        let test = world.session(&world.speaker_supervector(1, s), 100 + s, 1000);
        let trial = Trial {
            trial_id: format!("test{s}"),
            probe: Probe::Features(test),
            true_speakers: vec![format!("speaker{s}")],
            description: String::new(),
        };
        let ranked = identify(&trial, &registry, &policy, CohortPolicy::Registry)?;
        let best = &ranked[0];
        println!(
            "{}: best {} (raw {:.1}, z {:.2}, {:?}), runner-up z {:.2}",
            trial.trial_id, best.speaker_id, best.raw_score, best.score, best.decision, ranked[1].score
        );
    }
    Ok(())
}
