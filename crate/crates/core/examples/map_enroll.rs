//! MAP-adapts a speaker model and shows how the relevance factor trades
//! the background prior against the speaker's own data.

use voxid::eval::experiment::SyntheticWorld;
use voxid::eval::ExperimentConfig;
use voxid::{accumulate_stats, map_adapt, Ubm};

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn main() -> voxid::Result<()> {
    let world = SyntheticWorld::new(&ExperimentConfig::default());
    let ubm = Ubm::new(world.world().clone());
    let truth = world.speaker_supervector(1, 0);

    for seconds in [1, 5, 30] {
        let features = world.session(&truth, seconds, seconds as usize * 100);
        let stats = accumulate_stats(&features, &ubm)?;
        print!("{seconds:>2} s:");
        for relevance in [0.0, 4.0, 16.0, 64.0] {
            let model = map_adapt("speaker", &stats, &ubm, relevance)?;
            print!("  r={relevance:<4} err {:.3}", distance(model.gmm.means_flat(), &truth));
        }
        println!();
    }
    println!("background error {:.3}", distance(ubm.gmm.means_flat(), &truth));
    Ok(())
}
