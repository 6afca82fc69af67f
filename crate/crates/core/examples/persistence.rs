//! Saves and reloads each kind of artifact and inspects the envelopes.

use voxid::eval::experiment::SyntheticWorld;
use voxid::eval::ExperimentConfig;
use voxid::store::{self, StoredArtifact};
use voxid::{accumulate_stats, map_adapt, FeatureMatrix, IVector, Ubm};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let world = SyntheticWorld::new(&ExperimentConfig::default());
    let ubm = Ubm::new(world.world().clone());
    let features = world.session(&world.speaker_supervector(1, 0), 0, 200);
    // feature files hold f32 samples
    let features =
        FeatureMatrix::from_flat(features.dim(), features.as_flat().iter().map(|&v| v as f32 as f64).collect())?;
    let model = map_adapt("alice", &accumulate_stats(&features, &ubm)?, &ubm, 16.0)?;

    let artifacts = [
        ("features.voxf1", StoredArtifact::Features(features)),
        ("ubm.json", StoredArtifact::Ubm(ubm)),
        ("alice.json", StoredArtifact::SpeakerModel(model)),
        ("w.json", StoredArtifact::IVector(IVector::new(vec![0.1, -0.25, 1.0 / 3.0])?)),
    ];
    for (name, artifact) in &artifacts {
        let path = dir.path().join(name);
        store::save(artifact, &path)?;
        let kind = store::sniff_kind(&path)?;
        let back = store::load(&path, kind)?;
        let size = std::fs::metadata(&path)?.len();
        println!("{name:<15} {:<14} {size:>7} bytes  identical: {}", kind.as_str(), &back == artifact);
    }

    let text = std::fs::read_to_string(dir.path().join("w.json"))?;
    println!("{text}");
    Ok(())
}
