//! Trains a total-variability model and extracts i-vectors for repeated
//! sessions of a few speakers.

use voxid::eval::experiment::SyntheticWorld;
use voxid::eval::ExperimentConfig;
use voxid::scoring::cosine_score;
use voxid::{accumulate_stats, extract_ivector, init_tv, train_tv, Ubm};

fn main() -> voxid::Result<()> {
    let world = SyntheticWorld::new(&ExperimentConfig::default());
    let ubm = Ubm::new(world.world().clone());

    let mut dev = Vec::new();
    for s in 0..40 {
        let sv = world.speaker_supervector(9, s);
        for take in 0..2 {
            dev.push(accumulate_stats(&world.session(&sv, s * 10 + take, 1000), &ubm)?);
        }
    }
    let tv = train_tv(&dev, &init_tv(&ubm, 8, 0)?, 10)?;

    let mut vectors = Vec::new();
    for s in 0..3 {
        let sv = world.speaker_supervector(1, s);
        for take in 0..2 {
            let stats = accumulate_stats(&world.session(&sv, 500 + s * 10 + take, 1000), &ubm)?;
            vectors.push((format!("spk{s}/{take}"), extract_ivector(&stats, &tv)?));
        }
    }
    print!("{:>8}", "");
    for (name, _) in &vectors {
        print!("{name:>8}");
    }
    println!();
    for (a, wa) in &vectors {
        print!("{a:>8}");
        for (_, wb) in &vectors {
            print!("{:>8.3}", cosine_score(wa, wb)?);
        }
        println!();
    }
    Ok(())
}
