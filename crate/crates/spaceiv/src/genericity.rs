//! Monte Carlo check that the algebraic conditions hold for generic coefficients.

use serde::Serialize;
use spaceiv_core::bench::{classify_assumptions, derive_seed, AssumptionGroup};
use spaceiv_core::{CausalGraph, NoiseSpec, Result};

/// Counts of coefficient draws on a fixed graph, by assumption group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Genericity {
    pub draws: usize,
    pub seed: u64,
    pub a1_and_a3: usize,
    pub a1_only: usize,
    pub none: usize,
}

/// Draws `draws` coefficient vectors on the edges of `graph` and classifies each model.
pub fn genericity(graph: &CausalGraph, draws: usize, seed: u64) -> Result<Genericity> {
    let mut out = Genericity { draws, seed, a1_and_a3: 0, a1_only: 0, none: 0 };
    let noise = NoiseSpec::standard(graph.predictor_count());
    for r in 0..draws {
        let scm = graph.random_scm(derive_seed(seed, &[r as u64]), noise.clone())?;
        match classify_assumptions(&scm) {
            AssumptionGroup::A1AndA3 => out.a1_and_a3 += 1,
            AssumptionGroup::A1Only => out.a1_only += 1,
            AssumptionGroup::None => out.none += 1,
        }
    }
    Ok(out)
}
