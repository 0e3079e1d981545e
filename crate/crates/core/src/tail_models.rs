//! Regularly varying row distributions `F_i(x) = exp(-ν_i(x))` with
//! `ν_i(x) = c_i x^{-α} (1 + δ_i(x))`, exact inversion sampling of the scaled
//! triangular array `X_{n,j} = d_n^{-1/α} X_j`, and the uniform vague
//! convergence defect of the rows.

use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::measures::WeightScheme;
use crate::rng::{open_unit, replicate_stream};

type IndexedDelta = Arc<dyn Fn(usize, f64) -> f64 + Send + Sync>;

/// The relative perturbation `δ_i(x)` of the pure power tail.
#[derive(Clone)]
pub enum Perturbation {
    /// `δ_i ≡ 0`: every row is an exact Fréchet law.
    Zero,
    /// `δ_i(x) = amplitude / (1 + rate·x)`, the same for every index.
    UniformDecay { amplitude: f64, rate: f64 },
    /// An arbitrary `δ(i, x)`; its bounds must be declared and pass the grid
    /// check in [`TailModel::new`].
    PerIndex(IndexedDelta),
}

impl Perturbation {
    pub fn per_index<F>(delta: F) -> Self
    where
        F: Fn(usize, f64) -> f64 + Send + Sync + 'static,
    {
        Perturbation::PerIndex(Arc::new(delta))
    }

    #[inline]
    pub fn eval(&self, i: usize, x: f64) -> f64 {
        match self {
            Perturbation::Zero => 0.0,
            Perturbation::UniformDecay { amplitude, rate } => amplitude / (1.0 + rate * x),
            Perturbation::PerIndex(delta) => delta(i, x),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Perturbation::Zero)
    }
}

impl fmt::Debug for Perturbation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Perturbation::Zero => f.write_str("Zero"),
            Perturbation::UniformDecay { amplitude, rate } => {
                f.debug_struct("UniformDecay").field("amplitude", amplitude).field("rate", rate).finish()
            }
            Perturbation::PerIndex(_) => f.write_str("PerIndex(..)"),
        }
    }
}

/// Declared bounds `-m_lo <= δ_i(x) <= m_hi`, with `m_lo < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaBounds {
    pub m_lo: f64,
    pub m_hi: f64,
}

impl DeltaBounds {
    pub const ZERO: DeltaBounds = DeltaBounds { m_lo: 0.0, m_hi: 0.0 };
}

const GRID_INDICES: usize = 100;
const GRID_POINTS: usize = 100;
const GRID_X_MIN_LOG10: f64 = -3.0;
const GRID_X_MAX_LOG10: f64 = 6.0;
const VANISHING_LEVEL: f64 = 1e6;
const VANISHING_TOL: f64 = 0.01;

/// Relative tolerance of the perturbed quantile solve.
pub const QUANTILE_REL_TOL: f64 = 1e-12;

/// A family of row laws `F_i(x) = exp(-c_i x^{-α}(1 + δ_i(x)))`.
#[derive(Debug, Clone)]
pub struct TailModel {
    alpha: f64,
    weights: WeightScheme,
    perturbation: Perturbation,
    bounds: DeltaBounds,
}

impl TailModel {
    /// Builds a model, checking the declared perturbation bounds, strict
    /// monotonicity of `ν_i` and the vanishing of `δ_i` at large `x` on a
    /// 100 × 100 grid of indices and geometric levels.
    pub fn new(alpha: f64, weights: WeightScheme, perturbation: Perturbation, bounds: DeltaBounds) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::config(format!("alpha must be positive and finite, got {alpha}")));
        }
        weights.validate()?;
        let DeltaBounds { m_lo, m_hi } = bounds;
        if !(0.0..1.0).contains(&m_lo) {
            return Err(Error::config(format!("bound m_lo must lie in [0, 1), got {m_lo}")));
        }
        if !(m_hi.is_finite() && m_hi >= 0.0) {
            return Err(Error::config(format!("bound M_hi must be finite and >= 0, got {m_hi}")));
        }
        if let Perturbation::UniformDecay { amplitude, rate } = perturbation {
            if !(amplitude.abs() < 1.0) {
                return Err(Error::config(format!(
                    "uniform_decay amplitude must satisfy |amplitude| < 1, got {amplitude}"
                )));
            }
            if !(rate.is_finite() && rate > 0.0) {
                return Err(Error::config(format!("uniform_decay rate must be positive, got {rate}")));
            }
        }
        let model = Self { alpha, weights, perturbation, bounds };
        model.check_grid()?;
        Ok(model)
    }

    /// The unperturbed model `F_i(x) = exp(-c_i x^{-α})`.
    pub fn frechet(alpha: f64, weights: WeightScheme) -> Result<Self> {
        Self::new(alpha, weights, Perturbation::Zero, DeltaBounds::ZERO)
    }

    fn check_grid(&self) -> Result<()> {
        if self.perturbation.is_zero() {
            return Ok(());
        }
        let indices = self.weights.max_rows().map_or(GRID_INDICES, |len| len.min(GRID_INDICES));
        let step = (GRID_X_MAX_LOG10 - GRID_X_MIN_LOG10) / (GRID_POINTS - 1) as f64;
        let DeltaBounds { m_lo, m_hi } = self.bounds;
        for i in 1..=indices {
            let mut prev = f64::INFINITY;
            for k in 0..GRID_POINTS {
                let x = 10f64.powf(GRID_X_MIN_LOG10 + step * k as f64);
                let delta = self.perturbation.eval(i, x);
                if !(delta >= -m_lo && delta <= m_hi) {
                    return Err(Error::config(format!(
                        "perturbation δ_{i}({x:.3e}) = {delta} leaves the declared bounds [-{m_lo}, {m_hi}]"
                    )));
                }
                let shape = x.powf(-self.alpha) * (1.0 + delta);
                if !(shape < prev) {
                    return Err(Error::config(format!("ν_{i} is not strictly decreasing near x = {x:.3e}")));
                }
                prev = shape;
            }
            let far = self.perturbation.eval(i, VANISHING_LEVEL);
            if !(far.abs() < VANISHING_TOL) {
                return Err(Error::config(format!(
                    "perturbation δ_{i}({VANISHING_LEVEL:e}) = {far} does not vanish at large x"
                )));
            }
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn weights(&self) -> &WeightScheme {
        &self.weights
    }

    pub fn perturbation(&self) -> &Perturbation {
        &self.perturbation
    }

    pub fn bounds(&self) -> DeltaBounds {
        self.bounds
    }

    /// `ν_i(x) = -ln F_i(x)`.
    pub fn nu(&self, i: usize, x: f64) -> Result<f64> {
        let c = self.weights.weight(i)?;
        check_level(x)?;
        if x == 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(c * x.powf(-self.alpha) * (1.0 + self.perturbation.eval(i, x)))
    }

    /// `F_i(x)`; zero at `x = 0` and one at `x = ∞`.
    pub fn cdf(&self, i: usize, x: f64) -> Result<f64> {
        Ok((-self.nu(i, x)?).exp())
    }

    /// The unique `x > 0` with `F_i(x) = u`.
    pub fn quantile(&self, i: usize, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::domain(format!("quantile level must lie in (0,1), got {u}")));
        }
        let c = self.weights.weight(i)?;
        Ok(self.log_quantile(i, c.ln(), (-u.ln()).ln()).exp())
    }

    /// `ln x` solving `ln ν_i(x) = ln_level`, where `ln_c = ln c_i`.
    ///
    /// With `y = ln x` the equation reads
    /// `h(y) = ln c_i - α y + ln(1 + δ_i(e^y)) - ln_level = 0`, and `h` is
    /// strictly decreasing and close to linear with slope `-α`. The declared
    /// δ-bounds give an initial enclosure which is widened by a factor 2 in
    /// `x` and then grown geometrically until it brackets the root; the
    /// Illinois variant of regula falsi finishes in a handful of steps.
    fn log_quantile(&self, i: usize, ln_c: f64, ln_level: f64) -> f64 {
        let alpha = self.alpha;
        let base = (ln_c - ln_level) / alpha;
        if self.perturbation.is_zero() {
            return base;
        }
        let h = |y: f64| ln_c - alpha * y + self.perturbation.eval(i, y.exp()).ln_1p() - ln_level;

        let widen = std::f64::consts::LN_2 / alpha;
        let mut lo = base + (1.0 - self.bounds.m_lo).ln() / alpha - widen;
        let mut hi = base + self.bounds.m_hi.ln_1p() / alpha + widen;
        let mut f_lo = h(lo);
        let mut step = widen;
        while f_lo < 0.0 {
            lo -= step;
            step *= 2.0;
            f_lo = h(lo);
        }
        let mut f_hi = h(hi);
        step = widen;
        while f_hi > 0.0 {
            hi += step;
            step *= 2.0;
            f_hi = h(hi);
        }
        if f_lo == 0.0 {
            return lo;
        }
        if f_hi == 0.0 {
            return hi;
        }

        let tol = QUANTILE_REL_TOL * 0.1;
        let mut side = 0i8;
        let mut y = base;
        for _ in 0..200 {
            y = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
            let fy = h(y);
            if fy == 0.0 || (fy.abs() < alpha * tol) || hi - lo < tol {
                break;
            }
            if fy > 0.0 {
                lo = y;
                f_lo = fy;
                if side == 1 {
                    f_hi *= 0.5;
                }
                side = 1;
            } else {
                hi = y;
                f_hi = fy;
                if side == -1 {
                    f_lo *= 0.5;
                }
                side = -1;
            }
        }
        y
    }

    /// Precomputes the weights and scaling of row `n`.
    pub fn row(&self, n: usize) -> Result<Row<'_>> {
        let weights = self.weights.weights(n)?;
        let total: f64 = weights.iter().sum();
        let log_weights = weights.iter().map(|c| c.ln()).collect();
        let shares = weights.iter().map(|c| c / total).collect();
        Ok(Row { model: self, weights, log_weights, shares, total, scale: total.powf(-1.0 / self.alpha) })
    }
}

fn check_level(x: f64) -> Result<()> {
    if x.is_nan() || x < 0.0 {
        Err(Error::domain(format!("level must be non-negative, got {x}")))
    } else {
        Ok(())
    }
}

/// Row `n` of the scaled triangular array `X_{n,j} = d_n^{-1/α} X_j`.
#[derive(Debug, Clone)]
pub struct Row<'a> {
    model: &'a TailModel,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    shares: Vec<f64>,
    total: f64,
    scale: f64,
}

impl Row<'_> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `d_n`.
    pub fn total_weight(&self) -> f64 {
        self.total
    }

    /// `d_n^{-1/α}`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// `c_j / d_n`.
    pub fn shares(&self) -> &[f64] {
        &self.shares
    }

    /// Scaled value `d_n^{-1/α} F_j^{-1}(u)` for a 0-based position `k`.
    #[inline]
    fn scaled_value(&self, k: usize, u: f64) -> f64 {
        let level = -u.ln();
        let alpha = self.model.alpha;
        if self.model.perturbation.is_zero() {
            // (c_j / (d_n · level))^{1/α}
            let ratio = self.shares[k] / level;
            if alpha == 1.0 {
                ratio
            } else {
                ratio.powf(1.0 / alpha)
            }
        } else {
            self.model.log_quantile(k + 1, self.log_weights[k], level.ln()).exp() * self.scale
        }
    }

    /// The positions of a row that can hold its maximum, with their exact
    /// scaled values, in index order. The δ-bounds bracket every value, so
    /// only positions whose bracket reaches the largest lower end need a
    /// root solve. Values agree bit for bit with [`Row::from_uniforms`].
    pub fn max_candidates(&self, uniforms: &[f64], out: &mut Vec<(usize, f64)>) {
        out.clear();
        let alpha = self.model.alpha;
        if self.model.perturbation.is_zero() {
            let best = (0..uniforms.len()).map(|k| self.scaled_value(k, uniforms[k])).fold(f64::NEG_INFINITY, f64::max);
            out.extend(
                uniforms.iter().enumerate().map(|(k, &u)| (k, self.scaled_value(k, u))).filter(|&(_, v)| v == best),
            );
            return;
        }
        // log of the unperturbed value; the solve lands within
        // [ln(1 - m_lo)/α, ln(1 + M_hi)/α] of it.
        let lo_shift = (1.0 - self.model.bounds.m_lo).ln() / alpha - 1e-9;
        let hi_shift = self.model.bounds.m_hi.ln_1p() / alpha + 1e-9;
        let base = |k: usize| (self.log_weights[k] - (-uniforms[k].ln()).ln()) / alpha;
        let floor = (0..uniforms.len()).map(|k| base(k) + lo_shift).fold(f64::NEG_INFINITY, f64::max);
        for (k, &u) in uniforms.iter().enumerate() {
            if base(k) + hi_shift >= floor {
                out.push((k, self.scaled_value(k, u)));
            }
        }
        let best = out.iter().map(|&(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
        out.retain(|&(_, v)| v == best);
    }

    /// Fills `out` with one realisation of the row, drawing one open-unit
    /// uniform per index in index order.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..self.len()).map(|k| self.scaled_value(k, open_unit(rng))));
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len());
        self.sample_into(rng, &mut out);
        out
    }

    /// The row obtained from the given uniforms, one per index.
    pub fn from_uniforms(&self, uniforms: &[f64]) -> Result<Vec<f64>> {
        if uniforms.len() != self.len() {
            return Err(Error::domain(format!(
                "row of size {} needs {} uniforms, got {}",
                self.len(),
                self.len(),
                uniforms.len()
            )));
        }
        uniforms
            .iter()
            .enumerate()
            .map(|(k, &u)| {
                if u > 0.0 && u < 1.0 {
                    Ok(self.scaled_value(k, u))
                } else {
                    Err(Error::domain(format!("uniform #{} = {u} is outside (0,1)", k + 1)))
                }
            })
            .collect()
    }
}

/// One scaled row `d_n^{-1/α}(X_1, …, X_n)` drawn from stream 0 of `seed`.
pub fn sample_row(model: &TailModel, n: usize, seed: u64) -> Result<Vec<f64>> {
    let row = model.row(n)?;
    Ok(row.sample(&mut replicate_stream(seed, 0)))
}

/// Tail-set surrogate of the uniform vague defect of row `n` at `t0`:
///
/// `max_{j≤n} sup_x |(d_n/c_j)(1 - F_j(d_n^{1/α} x)) - x^{-α}|`
///
/// with the supremum taken over a geometric grid of `grid_size` levels
/// spanning `[t0, 1000·t0]`.
pub fn uniform_vague_defect(model: &TailModel, n: usize, t0: f64, grid_size: usize) -> Result<f64> {
    if !(t0.is_finite() && t0 > 0.0) {
        return Err(Error::domain(format!("t0 must be positive, got {t0}")));
    }
    if grid_size < 2 {
        return Err(Error::domain("grid_size must be at least 2"));
    }
    let row = model.row(n)?;
    let alpha = model.alpha;
    let unscale = row.total.powf(1.0 / alpha);
    let ratio = 1000f64.powf(1.0 / (grid_size - 1) as f64);
    let levels: Vec<f64> = (0..grid_size).map(|k| t0 * ratio.powi(k as i32)).collect();
    let mut defect: f64 = 0.0;
    for (k, &share) in row.shares.iter().enumerate() {
        for &x in &levels {
            let power = x.powf(-alpha);
            let delta = model.perturbation.eval(k + 1, unscale * x);
            let nu = share * power * (1.0 + delta);
            let rescaled_tail = -(-nu).exp_m1() / share;
            defect = defect.max((rescaled_tail - power).abs());
        }
    }
    Ok(defect)
}
