//! Cosine and Bhattacharyya similarity on small hand-made inputs.

use voxid::scoring::{bhattacharyya_coefficient, cosine_score, decide};
use voxid::{DecisionPolicy, IVector, ScoringMode};

fn main() -> voxid::Result<()> {
    let target = IVector::new(vec![1.0, 0.5, -0.2])?;
    let policy = DecisionPolicy::new(ScoringMode::Cosine, 0.5)?;
    for test in [vec![2.0, 1.0, -0.4], vec![0.8, 0.9, 0.1], vec![-1.0, 0.2, 0.3]] {
        let score = cosine_score(&target, &IVector::new(test.clone())?)?;
        println!("{test:?}: cosine {score:+.4} -> {:?}", decide(score, &policy));
    }

    let p = [0.25, 0.25, 0.5];
    for q in [[0.25, 0.25, 0.5], [0.2, 0.3, 0.5], [1.0, 0.0, 0.0]] {
        println!("rho({p:?}, {q:?}) = {:.4}", bhattacharyya_coefficient(&p, &q)?);
    }
    Ok(())
}
