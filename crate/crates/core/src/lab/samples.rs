//! Raw Monte Carlo draws shared by the experiment runners and the CLI's
//! `simulate` command. Replicate `r` always uses stream `r` of the base
//! seed, so every functional computed from the empirical rows of one seed
//! (argmax, max, ladder, Laplace) sees the same realisations.

use crate::error::Result;
use crate::point_process::{Argmax, Ladder, PlanarConfiguration, PoissonSpec, TestFunction};
use crate::rng::{map_replicates, open_unit};
use crate::tail_models::TailModel;

/// Argmax of a row read as the configuration `{(j/n, heights[j-1])}`.
/// Locations increase with the index, so the first maximal entry wins ties.
pub fn row_argmax(heights: &[f64]) -> Argmax {
    let n = heights.len();
    let mut position = 0;
    let mut ties = 0;
    for (k, &h) in heights.iter().enumerate().skip(1) {
        if h > heights[position] {
            position = k;
            ties = 0;
        } else if h == heights[position] {
            ties += 1;
        }
    }
    Argmax { location: (position + 1) as f64 / n as f64, height: heights[position], position, ties }
}

/// The argmax of `replicates` independent rows of size `n`.
pub fn argmax_draws(model: &TailModel, n: usize, replicates: usize, seed: u64) -> Result<Vec<Argmax>> {
    let row = model.row(n)?;
    if model.perturbation().is_zero() {
        return Ok(map_replicates(seed, replicates, |_, rng| {
            let mut heights = Vec::with_capacity(n);
            row.sample_into(rng, &mut heights);
            row_argmax(&heights)
        }));
    }
    // Same uniforms as a full row, but only plausible maxima are solved for.
    Ok(map_replicates(seed, replicates, |_, rng| {
        let uniforms: Vec<f64> = (0..n).map(|_| open_unit(rng)).collect();
        let mut best = Vec::new();
        row.max_candidates(&uniforms, &mut best);
        let (position, height) = best[0];
        Argmax { location: (position + 1) as f64 / n as f64, height, position, ties: best.len() - 1 }
    }))
}

/// Ladder values of `replicates` empirical processes of size `n` on `grid`.
pub fn ladder_draws(model: &TailModel, n: usize, grid: &[f64], replicates: usize, seed: u64) -> Result<Vec<Ladder>> {
    let row = model.row(n)?;
    // Validate the grid once up front.
    PlanarConfiguration::default().ladder(grid)?;
    Ok(map_replicates(seed, replicates, |_, rng| {
        let config = PlanarConfiguration::from_row(&row.sample(rng)).expect("sampled heights are positive");
        config.ladder(grid).expect("grid validated")
    }))
}

/// `exp(-ζ_n(f))` for each test function, per replicate.
pub fn laplace_draws(
    model: &TailModel,
    n: usize,
    functions: &[TestFunction],
    replicates: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let row = model.row(n)?;
    Ok(map_replicates(seed, replicates, |_, rng| {
        let config = PlanarConfiguration::from_row(&row.sample(rng)).expect("sampled heights are positive");
        functions.iter().map(|f| (-f.integrate(&config)).exp()).collect()
    }))
}

/// Independent truncated Poisson configurations.
pub fn poisson_draws(spec: &PoissonSpec, replicates: usize, seed: u64) -> Vec<PlanarConfiguration> {
    map_replicates(seed, replicates, |_, rng| spec.sample(rng))
}
