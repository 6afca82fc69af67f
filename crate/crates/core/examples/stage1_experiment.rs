//! Runs the bundled LLR experiment and prints every trial's ranking.
//!
//! `cargo run --release --example stage1_experiment [config.toml]`

use voxid::cli::summarize_report;
use voxid::eval::ExperimentConfig;

fn main() -> voxid::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/stage1.toml").to_string());
    let text = std::fs::read_to_string(&path).map_err(|e| voxid::Error::Usage(format!("{path}: {e}")))?;
    let config = ExperimentConfig::from_toml_str(&text)?;
    let report = voxid::eval::run_experiment(&config)?;

    for trial in &report.trials {
        let top: Vec<String> =
            trial.ranked.iter().take(4).map(|s| format!("{}={:.2}", s.speaker_id, s.score)).collect();
        println!("{:<10} truth {:?}: {}", trial.trial_id, trial.true_speakers, top.join("  "));
    }
    print!("{}", summarize_report(&report));
    Ok(())
}
