//! Fits a background mixture to pooled synthetic speakers and prints the
//! EM log-likelihood trace.

use std::collections::BTreeMap;

use voxid::eval::experiment::SyntheticWorld;
use voxid::eval::ExperimentConfig;
use voxid::speaker::train_ubm_with_history;
use voxid::GmmTrainingConfig;

fn main() -> voxid::Result<()> {
    let world = SyntheticWorld::new(&ExperimentConfig::default());
    let pooled: BTreeMap<String, _> = (0..20)
        .map(|s| {
            let sv = world.speaker_supervector(7, s);
            (format!("dev{s:02}"), world.session(&sv, s, 500))
        })
        .collect();

    let config = GmmTrainingConfig { num_components: 16, max_iterations: 30, ..Default::default() };
    let outcome = train_ubm_with_history(&pooled, &config)?;
    for (i, ll) in outcome.log_likelihoods.iter().enumerate() {
        println!("iteration {i:>2}  log-likelihood {ll:.3}");
    }
    println!("converged: {}", outcome.converged);
    let mut weights = outcome.gmm.weights().to_vec();
    weights.sort_by(|a, b| b.total_cmp(a));
    println!("largest weights {:.3?}", &weights[..4]);
    Ok(())
}
