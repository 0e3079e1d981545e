//! Weight arrays, the location measures `μ_n → μ` on `[0,1]`, and the tail
//! measure `γ` on `(0,∞]`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Generator of the row-independent weights `c_j` of a triangular array.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightScheme {
    /// `c_j = 1`.
    Constant,
    /// `c_j = j^beta`, `beta >= 0`.
    Power { beta: f64 },
    /// `c_j = values[j - 1]`; rows longer than the table are rejected.
    Explicit { values: Vec<f64> },
}

impl WeightScheme {
    pub fn validate(&self) -> Result<()> {
        match self {
            WeightScheme::Constant => Ok(()),
            WeightScheme::Power { beta } => {
                if beta.is_finite() && *beta >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::config(format!("power weights need a finite beta >= 0, got {beta}")))
                }
            }
            WeightScheme::Explicit { values } => {
                if values.is_empty() {
                    return Err(Error::config("explicit weight table is empty"));
                }
                match values.iter().position(|c| !(c.is_finite() && *c > 0.0)) {
                    Some(pos) => Err(Error::config(format!(
                        "explicit weight #{} = {} is not a positive finite number",
                        pos + 1,
                        values[pos]
                    ))),
                    None => Ok(()),
                }
            }
        }
    }

    /// Largest row size the scheme can produce, `None` when unbounded.
    pub fn max_rows(&self) -> Option<usize> {
        match self {
            WeightScheme::Explicit { values } => Some(values.len()),
            _ => None,
        }
    }

    fn check_rows(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::domain("row size n must be at least 1"));
        }
        self.validate()?;
        match self.max_rows() {
            Some(len) if n > len => {
                Err(Error::config(format!("explicit weight table has {len} entries but row size {n} was requested")))
            }
            _ => Ok(()),
        }
    }

    /// Weight `c_j` for a 1-based index `j`. Callers check the table length.
    #[inline]
    pub(crate) fn weight_unchecked(&self, j: usize) -> f64 {
        match self {
            WeightScheme::Constant => 1.0,
            WeightScheme::Power { beta } => {
                if *beta == 0.0 {
                    1.0
                } else if *beta == 1.0 {
                    j as f64
                } else {
                    (j as f64).powf(*beta)
                }
            }
            WeightScheme::Explicit { values } => values[j - 1],
        }
    }

    /// Weight `c_j` for a 1-based index `j`.
    pub fn weight(&self, j: usize) -> Result<f64> {
        if j == 0 {
            return Err(Error::domain("weight indices start at 1"));
        }
        self.check_rows(j)?;
        Ok(self.weight_unchecked(j))
    }

    /// The first `n` weights `c_1, …, c_n`.
    pub fn weights(&self, n: usize) -> Result<Vec<f64>> {
        self.check_rows(n)?;
        Ok((1..=n).map(|j| self.weight_unchecked(j)).collect())
    }

    /// The limit location measure implied by the scheme, when one is known
    /// in closed form. Explicit tables have none.
    pub fn limit_measure(&self) -> Option<LimitMeasure> {
        match self {
            WeightScheme::Constant => Some(LimitMeasure::power(0.0).expect("beta 0 is valid")),
            WeightScheme::Power { beta } => LimitMeasure::power(*beta).ok(),
            WeightScheme::Explicit { .. } => None,
        }
    }
}

/// `d_n = Σ_{j≤n} c_j`, summed in index order.
pub fn total_weight(scheme: &WeightScheme, n: usize) -> Result<f64> {
    Ok(scheme.weights(n)?.iter().sum())
}

/// `M_n = max_{j≤n} c_j`.
pub fn max_weight(scheme: &WeightScheme, n: usize) -> Result<f64> {
    Ok(scheme.weights(n)?.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// `μ_n = Σ_j (c_j / d_n) δ_{j/n}`.
pub fn empirical_measure(scheme: &WeightScheme, n: usize) -> Result<DiscreteMeasure> {
    let weights = scheme.weights(n)?;
    let total: f64 = weights.iter().sum();
    let atoms = weights.iter().enumerate().map(|(k, c)| ((k + 1) as f64 / n as f64, c / total)).collect();
    DiscreteMeasure::new(atoms)
}

/// A probability measure on `[0,1]` with finitely many atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    atoms: Vec<(f64, f64)>,
}

impl DiscreteMeasure {
    /// Atoms are `(location, weight)` pairs with strictly increasing
    /// locations in `[0,1]` and weights summing to one.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::config("a discrete measure needs at least one atom"));
        }
        for w in atoms.windows(2) {
            if !(w[0].0 < w[1].0) {
                return Err(Error::config("atom locations must be strictly increasing"));
            }
        }
        if atoms.iter().any(|&(t, w)| !(0.0..=1.0).contains(&t) || !(0.0..=1.0).contains(&w)) {
            return Err(Error::config("atoms must lie in [0,1] with weights in [0,1]"));
        }
        let mass: f64 = atoms.iter().map(|a| a.1).sum();
        if (mass - 1.0).abs() > 1e-12 {
            return Err(Error::config(format!("atom weights sum to {mass}, not 1")));
        }
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// Right-continuous distribution function.
    pub fn cdf(&self, t: f64) -> f64 {
        self.atoms.iter().take_while(|a| a.0 <= t).map(|a| a.1).sum::<f64>().min(1.0)
    }
}

type UnitMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum LimitKind {
    Power { beta: f64 },
    Custom { cdf: UnitMap },
}

/// A non-atomic probability measure on `[0,1]`, given by its distribution
/// function and a generalized inverse.
#[derive(Clone)]
pub struct LimitMeasure {
    kind: LimitKind,
}

impl fmt::Debug for LimitMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            LimitKind::Power { beta } => f.debug_struct("LimitMeasure").field("beta", beta).finish(),
            LimitKind::Custom { .. } => f.write_str("LimitMeasure(custom)"),
        }
    }
}

const QUANTILE_BISECTION_TOL: f64 = 1e-12;

impl LimitMeasure {
    /// The limit of `μ_n` for weights `c_j = j^β`: `cdf(t) = t^{β+1}`.
    pub fn power(beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta >= 0.0) {
            return Err(Error::config(format!("limit measure needs a finite beta >= 0, got {beta}")));
        }
        Ok(Self { kind: LimitKind::Power { beta } })
    }

    pub fn uniform() -> Self {
        Self { kind: LimitKind::Power { beta: 0.0 } }
    }

    /// A measure given only by its distribution function, which must be
    /// continuous and non-decreasing with `cdf(0) = 0` and `cdf(1) = 1`.
    /// Quantiles are found by bisection.
    pub fn from_cdf<F>(cdf: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if cdf(0.0) != 0.0 || (cdf(1.0) - 1.0).abs() > 1e-12 {
            return Err(Error::config("a limit cdf must satisfy cdf(0) = 0 and cdf(1) = 1"));
        }
        let mut prev = 0.0;
        for k in 1..=1000 {
            let v = cdf(k as f64 / 1000.0);
            if !(v >= prev) || v > 1.0 {
                return Err(Error::config("a limit cdf must be non-decreasing with values in [0,1]"));
            }
            prev = v;
        }
        Ok(Self { kind: LimitKind::Custom { cdf: Arc::new(cdf) } })
    }

    /// The exponent β when this is a power measure.
    pub fn beta(&self) -> Option<f64> {
        match self.kind {
            LimitKind::Power { beta } => Some(beta),
            LimitKind::Custom { .. } => None,
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, 1.0);
        match &self.kind {
            LimitKind::Power { beta } => {
                if *beta == 0.0 {
                    t
                } else {
                    t.powf(beta + 1.0)
                }
            }
            LimitKind::Custom { cdf } => cdf(t),
        }
    }

    /// Generalized inverse `inf { t : cdf(t) >= u }` for `u` in `(0,1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match &self.kind {
            LimitKind::Power { beta } => {
                if *beta == 0.0 {
                    u
                } else {
                    u.powf(1.0 / (beta + 1.0))
                }
            }
            LimitKind::Custom { cdf } => {
                let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
                while hi - lo > QUANTILE_BISECTION_TOL {
                    let mid = 0.5 * (lo + hi);
                    if cdf(mid) >= u {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            }
        }
    }
}

/// `sup_t |F_n(t) - cdf(t)|` between a discrete measure and a continuous
/// limit, evaluated exactly from both sides of every atom.
pub fn cdf_sup_distance(dm: &DiscreteMeasure, lm: &LimitMeasure) -> f64 {
    let mut below = 0.0;
    let mut sup: f64 = 0.0;
    for &(t, w) in dm.atoms() {
        let limit = lm.cdf(t);
        let above = (below + w).min(1.0);
        sup = sup.max((below - limit).abs()).max((above - limit).abs());
        below = above;
    }
    sup
}

type TailMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum TailKind {
    Frechet { alpha: f64 },
    Custom { tail: TailMap, inverse: TailMap },
}

/// The tail measure `γ` on `(0,∞]`, described by `x ↦ γ([x,∞))` and its
/// inverse.
#[derive(Clone)]
pub struct TailMeasure {
    kind: TailKind,
}

impl fmt::Debug for TailMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            TailKind::Frechet { alpha } => f.debug_struct("TailMeasure").field("alpha", alpha).finish(),
            TailKind::Custom { .. } => f.write_str("TailMeasure(custom)"),
        }
    }
}

impl TailMeasure {
    /// `γ([x,∞)) = x^{-α}`.
    pub fn frechet(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::config(format!("tail index alpha must be positive, got {alpha}")));
        }
        Ok(Self { kind: TailKind::Frechet { alpha } })
    }

    /// A general tail given with its inverse. The tail must be strictly
    /// decreasing to zero; this is spot-checked on a geometric grid.
    pub fn custom<T, I>(tail: T, inverse: I) -> Result<Self>
    where
        T: Fn(f64) -> f64 + Send + Sync + 'static,
        I: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let mut prev = f64::INFINITY;
        for k in -60..=60 {
            let x = 10f64.powf(k as f64 / 10.0);
            let v = tail(x);
            if !(v < prev) || v < 0.0 {
                return Err(Error::config("a tail function must be strictly decreasing and non-negative"));
            }
            prev = v;
        }
        Ok(Self { kind: TailKind::Custom { tail: Arc::new(tail), inverse: Arc::new(inverse) } })
    }

    pub fn alpha(&self) -> Option<f64> {
        match self.kind {
            TailKind::Frechet { alpha } => Some(alpha),
            TailKind::Custom { .. } => None,
        }
    }

    /// `γ([x,∞))`; zero at `x = ∞`.
    pub fn tail(&self, x: f64) -> f64 {
        if x == f64::INFINITY {
            return 0.0;
        }
        match &self.kind {
            TailKind::Frechet { alpha } => {
                if *alpha == 1.0 {
                    1.0 / x
                } else {
                    x.powf(-alpha)
                }
            }
            TailKind::Custom { tail, .. } => tail(x),
        }
    }

    /// The level `x` with `γ([x,∞)) = y`.
    pub fn inverse_tail(&self, y: f64) -> f64 {
        match &self.kind {
            TailKind::Frechet { alpha } => {
                if *alpha == 1.0 {
                    1.0 / y
                } else {
                    y.powf(-1.0 / alpha)
                }
            }
            TailKind::Custom { inverse, .. } => inverse(y),
        }
    }
}
