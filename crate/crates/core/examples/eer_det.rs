//! Equal error rate and DET operating points for two overlapping score
//! distributions.

use rand::SeedableRng;
use rand_distr::{Distribution, Normal};
use voxid::eval::{compute_eer, det_curve};

fn main() -> voxid::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let targets: Vec<f64> = Normal::new(2.0, 1.0).unwrap().sample_iter(&mut rng).take(500).collect();
    let nontargets: Vec<f64> = Normal::new(0.0, 1.0).unwrap().sample_iter(&mut rng).take(2000).collect();

    println!("EER {:.4}", compute_eer(&targets, &nontargets)?);
    let curve = det_curve(&targets, &nontargets)?;
    for p in curve.iter().step_by(curve.len() / 10) {
        println!("threshold {:+.3}  FAR {:.4}  FRR {:.4}", p.threshold, p.far, p.frr);
    }
    Ok(())
}
