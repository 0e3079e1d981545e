//! Finite configurations in `[0,1] × (0,∞)`: the empirical process
//! `ζ_n = Σ_j δ_{(j/n, X_{n,j})}`, the Poisson process with intensity `μ × γ`
//! restricted to heights above a truncation level, the argmax, max and
//! ladder functionals, and Laplace functionals of rectangle test functions.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{LimitMeasure, TailMeasure};
use crate::rng::{map_replicates, open_unit, replicate_stream};
use crate::stats::mean_and_variance;
use crate::tail_models::TailModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub location: f64,
    pub height: f64,
}

/// A finite point configuration. Storage order carries no meaning.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlanarConfiguration {
    points: Vec<Point>,
}

/// The highest point of a configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Argmax {
    pub location: f64,
    pub height: f64,
    /// Position of the point in storage order.
    pub position: usize,
    /// Number of other points sharing the maximal height.
    pub ties: usize,
}

/// Ladder values on a grid, with the number of grid points whose section
/// `[t,1]` held no point (reported as height 0).
#[derive(Debug, Clone, PartialEq)]
pub struct Ladder {
    pub values: Vec<f64>,
    pub empty_sections: usize,
}

impl PlanarConfiguration {
    pub fn new(points: Vec<Point>) -> Result<Self> {
        for p in &points {
            if !(0.0..=1.0).contains(&p.location) {
                return Err(Error::domain(format!("location {} outside [0,1]", p.location)));
            }
            if !(p.height > 0.0 && p.height.is_finite()) {
                return Err(Error::domain(format!("height {} is not positive and finite", p.height)));
            }
        }
        Ok(Self { points })
    }

    /// The configuration `{(j/n, heights[j-1])}`.
    pub fn from_row(heights: &[f64]) -> Result<Self> {
        let n = heights.len() as f64;
        Self::new(
            heights.iter().enumerate().map(|(k, &height)| Point { location: (k + 1) as f64 / n, height }).collect(),
        )
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The highest point; ties go to the smallest location.
    pub fn argmax(&self) -> Result<Argmax> {
        let first = self.points.first().ok_or(Error::EmptyConfiguration)?;
        let mut best = Argmax { location: first.location, height: first.height, position: 0, ties: 0 };
        for (k, p) in self.points.iter().enumerate().skip(1) {
            if p.height > best.height {
                best = Argmax { location: p.location, height: p.height, position: k, ties: 0 };
            } else if p.height == best.height {
                best.ties += 1;
                if p.location < best.location {
                    best.location = p.location;
                    best.position = k;
                }
            }
        }
        Ok(best)
    }

    pub fn argmax_location(&self) -> Result<f64> {
        self.argmax().map(|a| a.location)
    }

    pub fn max_height(&self) -> Result<f64> {
        self.argmax().map(|a| a.height)
    }

    /// `L(t) = max { x : (s, x) in the configuration, s >= t }` for each `t`
    /// of a non-decreasing grid; 0 where the section is empty.
    pub fn ladder(&self, grid: &[f64]) -> Result<Ladder> {
        if grid.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::domain("ladder grid must be sorted in non-decreasing order"));
        }
        if grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::domain("ladder grid points must lie in [0,1]"));
        }
        let sorted_points;
        let points: &[Point] = if self.points.windows(2).all(|w| w[0].location <= w[1].location) {
            &self.points
        } else {
            let mut v = self.points.clone();
            v.sort_by(|a, b| a.location.total_cmp(&b.location));
            sorted_points = v;
            &sorted_points
        };
        // suffix[k] = max height among points[k..]
        let mut suffix = vec![0.0_f64; points.len() + 1];
        for k in (0..points.len()).rev() {
            suffix[k] = suffix[k + 1].max(points[k].height);
        }
        let mut empty_sections = 0;
        let values = grid
            .iter()
            .map(|&t| {
                let k = points.partition_point(|p| p.location < t);
                if k == points.len() {
                    empty_sections += 1;
                }
                suffix[k]
            })
            .collect();
        Ok(Ladder { values, empty_sections })
    }

    /// Number of points in `[t1, t2] × [a, b)`.
    pub fn count_in(&self, t1: f64, t2: f64, a: f64, b: f64) -> usize {
        self.points.iter().filter(|p| p.location >= t1 && p.location <= t2 && p.height >= a && p.height < b).count()
    }
}

/// `ζ_n` for one scaled row drawn from stream 0 of `seed`.
pub fn empirical_process(model: &TailModel, n: usize, seed: u64) -> Result<PlanarConfiguration> {
    let row = model.row(n)?;
    PlanarConfiguration::from_row(&row.sample(&mut replicate_stream(seed, 0)))
}

/// Truncation level `ε = γ^{-1}(ln 10^9)`: the limit process has no point
/// above it with probability `10^{-9}`. For `γ([x,∞)) = x^{-α}` this is
/// `(ln 10^9)^{-1/α}`.
pub fn default_truncation(gamma: &TailMeasure) -> f64 {
    gamma.inverse_tail(9.0 * std::f64::consts::LN_10)
}

/// The Poisson process with intensity `μ × γ` restricted to `[0,1] × [ε,∞)`.
#[derive(Debug, Clone)]
pub struct PoissonSpec {
    pub mu: LimitMeasure,
    pub gamma: TailMeasure,
    epsilon: f64,
    mass: f64,
}

impl PoissonSpec {
    pub fn new(mu: LimitMeasure, gamma: TailMeasure, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::config(format!("truncation epsilon must be positive, got {epsilon}")));
        }
        let mass = gamma.tail(epsilon);
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::config(format!("γ([{epsilon}, ∞)) = {mass} is not a positive finite mass")));
        }
        Ok(Self { mu, gamma, epsilon, mass })
    }

    pub fn with_default_truncation(mu: LimitMeasure, gamma: TailMeasure) -> Result<Self> {
        let epsilon = default_truncation(&gamma);
        Self::new(mu, gamma, epsilon)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Expected number of points `m = γ([ε,∞))`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Draws `τ ~ Poisson(m)` and then `τ` independent points
    /// `(μ^{-1}(U), γ^{-1}(V·m))`, each using two uniforms in that order.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> PlanarConfiguration {
        let count = Poisson::new(self.mass).expect("mass is positive and finite").sample(rng) as usize;
        let points = (0..count)
            .map(|_| {
                let location = self.mu.quantile(open_unit(rng));
                let height = self.gamma.inverse_tail(open_unit(rng) * self.mass);
                Point { location, height }
            })
            .collect();
        PlanarConfiguration { points }
    }
}

/// One truncated Poisson configuration from stream 0 of `seed`.
pub fn sample_poisson(spec: &PoissonSpec, seed: u64) -> PlanarConfiguration {
    spec.sample(&mut replicate_stream(seed, 0))
}

/// `s · 1_{[t1,t2] × [a,b)}` with `a > 0`; `s` and `b` may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rectangle {
    #[serde(with = "extended")]
    pub s: f64,
    pub t1: f64,
    pub t2: f64,
    pub a: f64,
    #[serde(with = "extended")]
    pub b: f64,
}

impl Rectangle {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::UnsupportedTestFunction(msg));
        if !(self.s >= 0.0) {
            return bad(format!("weight s = {} must be non-negative", self.s));
        }
        if !(0.0 <= self.t1 && self.t1 <= self.t2 && self.t2 <= 1.0) {
            return bad(format!("location range [{}, {}] must satisfy 0 <= t1 <= t2 <= 1", self.t1, self.t2));
        }
        if !(self.a > 0.0 && self.a.is_finite()) {
            return bad(format!("height range must stay away from 0, got a = {}", self.a));
        }
        if !(self.b > self.a) {
            return bad(format!("height range [{}, {}) is empty", self.a, self.b));
        }
        Ok(())
    }

    #[inline]
    fn contains(&self, t: f64, x: f64) -> bool {
        t >= self.t1 && t <= self.t2 && x >= self.a && x < self.b
    }
}

/// A finite non-negative combination of rectangle indicators.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "Vec<Rectangle>", into = "Vec<Rectangle>")]
pub struct TestFunction {
    rectangles: Vec<Rectangle>,
}

impl TryFrom<Vec<Rectangle>> for TestFunction {
    type Error = Error;

    fn try_from(rectangles: Vec<Rectangle>) -> Result<Self> {
        Self::new(rectangles)
    }
}

impl From<TestFunction> for Vec<Rectangle> {
    fn from(f: TestFunction) -> Self {
        f.rectangles
    }
}

impl TestFunction {
    pub fn new(rectangles: Vec<Rectangle>) -> Result<Self> {
        for r in &rectangles {
            r.validate()?;
        }
        Ok(Self { rectangles })
    }

    /// `f ≡ 0`.
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn rectangle(s: f64, t1: f64, t2: f64, a: f64, b: f64) -> Result<Self> {
        Self::new(vec![Rectangle { s, t1, t2, a, b }])
    }

    pub fn rectangles(&self) -> &[Rectangle] {
        &self.rectangles
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        self.rectangles.iter().filter(|r| r.contains(t, x)).map(|r| r.s).sum()
    }

    /// `ζ(f) = Σ_{(t,x) ∈ ζ} f(t, x)`.
    pub fn integrate(&self, config: &PlanarConfiguration) -> f64 {
        config.points().iter().map(|p| self.eval(p.location, p.height)).sum()
    }

    /// `∫∫ (1 - e^{-f}) d(μ × γ)`, computed on the cells cut out by all
    /// rectangle edges so that overlapping rectangles add up correctly.
    pub fn intensity_integral(&self, mu: &LimitMeasure, gamma: &TailMeasure) -> f64 {
        let mut t_cuts: Vec<f64> = self.rectangles.iter().flat_map(|r| [r.t1, r.t2]).collect();
        let mut x_cuts: Vec<f64> = self.rectangles.iter().flat_map(|r| [r.a, r.b]).collect();
        for cuts in [&mut t_cuts, &mut x_cuts] {
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
        }
        let mut total = 0.0;
        for t in t_cuts.windows(2) {
            let location_mass = mu.cdf(t[1]) - mu.cdf(t[0]);
            if location_mass <= 0.0 {
                continue;
            }
            for x in x_cuts.windows(2) {
                let value: f64 = self
                    .rectangles
                    .iter()
                    .filter(|r| r.t1 <= t[0] && t[1] <= r.t2 && r.a <= x[0] && x[1] <= r.b)
                    .map(|r| r.s)
                    .sum();
                if value > 0.0 {
                    let height_mass = gamma.tail(x[0]) - gamma.tail(x[1]);
                    total += -(-value).exp_m1() * location_mass * height_mass;
                }
            }
        }
        total
    }
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

/// `Ψ_n(f) = E exp(-ζ_n(f))` estimated over `replicates` independent rows,
/// replicate `r` drawn from stream `r` of `seed`.
pub fn laplace_empirical(
    model: &TailModel,
    n: usize,
    f: &TestFunction,
    replicates: usize,
    seed: u64,
) -> Result<Estimate> {
    if replicates == 0 {
        return Err(Error::domain("at least one replicate is required"));
    }
    let row = model.row(n)?;
    let values = map_replicates(seed, replicates, |_, rng| {
        let heights = row.sample(rng);
        let config = PlanarConfiguration::from_row(&heights).expect("sampled heights are positive");
        (-f.integrate(&config)).exp()
    });
    let (value, variance) = mean_and_variance(&values);
    Ok(Estimate { value, se: (variance / replicates as f64).sqrt() })
}

/// `Ψ(f) = exp(-∫∫ (1 - e^{-f}) d(μ × γ))` for the untruncated limit process.
pub fn laplace_exact(mu: &LimitMeasure, gamma: &TailMeasure, f: &TestFunction) -> f64 {
    (-f.intensity_integral(mu, gamma)).exp()
}

/// Serde adapter for reals that may be `"inf"`.
mod extended {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(t) if matches!(t.as_str(), "inf" | "+inf" | "infinity") => Ok(f64::INFINITY),
            Repr::Text(t) => Err(serde::de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::WeightScheme;

    fn config(points: &[(f64, f64)]) -> PlanarConfiguration {
        PlanarConfiguration::new(points.iter().map(|&(location, height)| Point { location, height }).collect()).unwrap()
    }

    #[test]
    fn argmax_and_max_examples() {
        let c = config(&[(0.2, 5.0), (0.6, 3.0), (0.9, 1.0)]);
        assert_eq!(c.argmax_location().unwrap(), 0.2);
        assert_eq!(c.max_height().unwrap(), 5.0);
        let single = config(&[(0.7, 2.2)]);
        assert_eq!(single.argmax_location().unwrap(), 0.7);
        assert_eq!(single.max_height().unwrap(), 2.2);
        let tied = config(&[(0.8, 1.0), (0.3, 1.0)]);
        let a = tied.argmax().unwrap();
        assert_eq!(a.location, 0.3);
        assert_eq!(a.ties, 1);
        assert!(matches!(PlanarConfiguration::default().argmax(), Err(Error::EmptyConfiguration)));
        assert!(matches!(PlanarConfiguration::default().max_height(), Err(Error::EmptyConfiguration)));
    }

    #[test]
    fn configuration_validation() {
        assert!(PlanarConfiguration::new(vec![Point { location: 1.5, height: 1.0 }]).is_err());
        assert!(PlanarConfiguration::new(vec![Point { location: 0.5, height: 0.0 }]).is_err());
        assert!(PlanarConfiguration::new(vec![Point { location: 0.5, height: f64::NAN }]).is_err());
    }

    #[test]
    fn ladder_examples() {
        let c = config(&[(0.9, 1.0), (0.2, 5.0), (0.6, 3.0)]);
        assert_eq!(c.ladder(&[0.1, 0.5, 0.7]).unwrap().values, vec![5.0, 3.0, 1.0]);
        let l = c.ladder(&[0.95]).unwrap();
        assert_eq!(l.values, vec![0.0]);
        assert_eq!(l.empty_sections, 1);
        assert!(c.ladder(&[0.5, 0.1]).is_err());
        assert!(c.ladder(&[0.5, 1.5]).is_err());
        assert_eq!(c.ladder(&[0.0]).unwrap().values[0], c.max_height().unwrap());
    }

    #[test]
    fn empirical_process_examples() {
        let model = TailModel::frechet(1.0, WeightScheme::Constant).unwrap();
        let one = empirical_process(&model, 1, 3).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.points()[0].location, 1.0);

        let model = TailModel::frechet(1.0, WeightScheme::Power { beta: 1.0 }).unwrap();
        let heights = model.row(4).unwrap().from_uniforms(&[(-1.0f64).exp(); 4]).unwrap();
        let c = PlanarConfiguration::from_row(&heights).unwrap();
        for (p, (t, x)) in c.points().iter().zip([(0.25, 0.1), (0.5, 0.2), (0.75, 0.3), (1.0, 0.4)]) {
            assert_eq!(p.location, t);
            assert!((p.height - x).abs() < 1e-15);
        }
        for n in [1, 10, 999, 10_000] {
            assert_eq!(empirical_process(&model, n, 1).unwrap().len(), n);
        }
    }

    #[test]
    fn poisson_sampling_is_deterministic_and_truncated() {
        let spec =
            PoissonSpec::with_default_truncation(LimitMeasure::power(1.0).unwrap(), TailMeasure::frechet(1.0).unwrap())
                .unwrap();
        assert!((spec.epsilon() - 1.0 / (1e9f64).ln()).abs() < 1e-15);
        assert!((spec.mass() - (1e9f64).ln()).abs() < 1e-12);
        let a = sample_poisson(&spec, 42);
        assert_eq!(a, sample_poisson(&spec, 42));
        assert!(a.points().iter().all(|p| p.height > spec.epsilon()));
        assert!(PoissonSpec::new(LimitMeasure::uniform(), TailMeasure::frechet(1.0).unwrap(), 0.0).is_err());
    }

    #[test]
    fn laplace_exact_examples() {
        let mu = LimitMeasure::uniform();
        let gamma = TailMeasure::frechet(1.0).unwrap();
        let f = TestFunction::rectangle(2f64.ln(), 0.0, 1.0, 2.0, f64::INFINITY).unwrap();
        assert!((laplace_exact(&mu, &gamma, &f) - (-0.25f64).exp()).abs() < 1e-15);
        assert_eq!(laplace_exact(&mu, &gamma, &TestFunction::zero()), 1.0);
        for a in [0.5, 1.0, 3.0] {
            let void = TestFunction::rectangle(f64::INFINITY, 0.0, 1.0, a, f64::INFINITY).unwrap();
            assert!((laplace_exact(&mu, &gamma, &void) - (-1.0 / a).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn overlapping_rectangles_are_decomposed() {
        let mu = LimitMeasure::power(1.0).unwrap();
        let gamma = TailMeasure::frechet(2.0).unwrap();
        // Two copies of the same rectangle equal one rectangle of twice the weight.
        let doubled = TestFunction::new(vec![
            Rectangle { s: 0.4, t1: 0.1, t2: 0.7, a: 0.5, b: 2.0 },
            Rectangle { s: 0.4, t1: 0.1, t2: 0.7, a: 0.5, b: 2.0 },
        ])
        .unwrap();
        let single = TestFunction::rectangle(0.8, 0.1, 0.7, 0.5, 2.0).unwrap();
        assert!((laplace_exact(&mu, &gamma, &doubled) - laplace_exact(&mu, &gamma, &single)).abs() < 1e-15);

        // Partial overlap: hand-split into three disjoint cells.
        let overlap = TestFunction::new(vec![
            Rectangle { s: 1.0, t1: 0.0, t2: 0.6, a: 1.0, b: f64::INFINITY },
            Rectangle { s: 0.5, t1: 0.4, t2: 1.0, a: 1.0, b: f64::INFINITY },
        ])
        .unwrap();
        let tail = gamma.tail(1.0);
        let by_hand = (1.0 - (-1.0f64).exp()) * (mu.cdf(0.4) - mu.cdf(0.0)) * tail
            + (1.0 - (-1.5f64).exp()) * (mu.cdf(0.6) - mu.cdf(0.4)) * tail
            + (1.0 - (-0.5f64).exp()) * (mu.cdf(1.0) - mu.cdf(0.6)) * tail;
        assert!((overlap.intensity_integral(&mu, &gamma) - by_hand).abs() < 1e-14);
    }

    #[test]
    fn test_function_validation() {
        assert!(matches!(TestFunction::rectangle(1.0, 0.0, 1.0, 0.0, 1.0), Err(Error::UnsupportedTestFunction(_))));
        assert!(TestFunction::rectangle(1.0, 0.5, 0.4, 1.0, 2.0).is_err());
        assert!(TestFunction::rectangle(-1.0, 0.0, 1.0, 1.0, 2.0).is_err());
        assert!(TestFunction::rectangle(1.0, 0.0, 1.0, 2.0, 2.0).is_err());
        let f = TestFunction::rectangle(2.0, 0.2, 0.4, 1.0, 3.0).unwrap();
        assert_eq!(f.eval(0.3, 1.0), 2.0);
        assert_eq!(f.eval(0.3, 3.0), 0.0);
        assert_eq!(f.eval(0.1, 2.0), 0.0);
    }

    #[test]
    fn test_function_config_shape() {
        #[derive(Deserialize)]
        struct Holder {
            f: TestFunction,
        }
        let h: Holder = toml::from_str("f = [{ s = 0.5, t1 = 0.0, t2 = 1.0, a = 2.0, b = \"inf\" }]").unwrap();
        assert_eq!(h.f, TestFunction::rectangle(0.5, 0.0, 1.0, 2.0, f64::INFINITY).unwrap());
        assert!(toml::from_str::<Holder>("f = [{ s = 0.5, t1 = 0.0, t2 = 1.0, a = 0.0, b = 1.0 }]").is_err());
        assert!(toml::from_str::<Holder>("f = [{ s = 0.5, t1 = 0.0, t2 = 1.0, a = 1.0, b = \"big\" }]").is_err());
    }

    #[test]
    fn laplace_of_zero_is_one() {
        let model = TailModel::frechet(1.0, WeightScheme::Constant).unwrap();
        let est = laplace_empirical(&model, 50, &TestFunction::zero(), 1000, 9).unwrap();
        assert_eq!(est.value, 1.0);
        assert_eq!(est.se, 0.0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn points() -> impl Strategy<Value = Vec<(f64, f64)>> {
            proptest::collection::vec((0.0f64..=1.0, 0.001f64..100.0), 1..60)
        }

        proptest! {
            #[test]
            fn functionals_agree(pts in points(), mut grid in proptest::collection::vec(0.0f64..=1.0, 1..20)) {
                grid.sort_by(f64::total_cmp);
                let c = config(&pts);
                let a = c.argmax().unwrap();
                prop_assert_eq!(c.points()[a.position].height, c.max_height().unwrap());
                prop_assert_eq!(c.points()[a.position].location, a.location);

                let ladder = c.ladder(&grid).unwrap().values;
                prop_assert!(ladder.windows(2).all(|w| w[0] >= w[1]));
                prop_assert_eq!(c.ladder(&[0.0]).unwrap().values[0], a.height);
                // The full ladder equals the max exactly up to the argmax location.
                prop_assert_eq!(c.ladder(&[a.location]).unwrap().values[0], a.height);
                for (t, l) in grid.iter().zip(&ladder) {
                    if *l == a.height {
                        prop_assert!(*t <= a.location);
                    }
                }
            }

            #[test]
            fn ladder_ignores_storage_order(pts in points(), seed in any::<u64>()) {
                use rand::seq::SliceRandom;
                let c = config(&pts);
                let mut shuffled = pts.clone();
                shuffled.shuffle(&mut replicate_stream(seed, 0));
                let grid = [0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0];
                prop_assert_eq!(c.ladder(&grid).unwrap(), config(&shuffled).ladder(&grid).unwrap());
                prop_assert_eq!(c.max_height().unwrap(), config(&shuffled).max_height().unwrap());
            }
        }
    }
}
