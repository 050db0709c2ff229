//! One-dimensional optimal transport through quantile functions.
//!
//! In one dimension the monotone (quantile) coupling is optimal for every
//! convex cost, so `W_p(n, m)^p = ∫₀¹ |u(z) − v(z)|^p dz` where `u`, `v` are
//! the generalized inverses of the two cumulative distributions. All
//! integrals over `z` use the midpoint rule on `z_k = (k + ½)/K`.

use crate::atomic::AtomicMeasure;
use crate::density::Density;
use crate::error::{Error, Result};
use crate::kernels::Fitness;
use crate::poly::Polynomial;

pub const DEFAULT_K: usize = 4096;
pub const MIN_K: usize = 64;

/// Quantile function sampled on the midpoint probability lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileFn {
    values: Vec<f64>,
}

impl QuantileFn {
    /// Panics if `values` is shorter than [`MIN_K`] or decreasing.
    pub fn new(values: Vec<f64>) -> Self {
        assert!(values.len() >= MIN_K, "quantile lattice needs K ≥ {MIN_K}");
        debug_assert!(
            values.windows(2).all(|w| w[0] <= w[1]),
            "quantile values must be nondecreasing"
        );
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `z_k = (k + ½)/K`.
    pub fn levels(&self) -> impl Iterator<Item = f64> + '_ {
        let k = self.values.len() as f64;
        (0..self.values.len()).map(move |i| (i as f64 + 0.5) / k)
    }

    /// `∫₀¹ u(z) dz`, the mean of the underlying measure.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    fn check_len(&self, other: &QuantileFn) {
        assert_eq!(
            self.values.len(),
            other.values.len(),
            "quantile functions must share the probability lattice"
        );
    }

    pub fn w2(&self, other: &QuantileFn) -> f64 {
        self.check_len(other);
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(u, v)| (u - v) * (u - v))
            .sum();
        (s / self.values.len() as f64).sqrt()
    }

    pub fn w1(&self, other: &QuantileFn) -> f64 {
        self.check_len(other);
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(u, v)| (u - v).abs())
            .sum();
        s / self.values.len() as f64
    }

    /// `W₂` after recentering both measures at their means.
    pub fn w_recentered(&self, other: &QuantileFn) -> f64 {
        self.check_len(other);
        let shift = self.mean() - other.mean();
        let s: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(u, v)| {
                let d = u - v - shift;
                d * d
            })
            .sum();
        (s / self.values.len() as f64).sqrt()
    }
}

/// Anything with a cumulative distribution that can be inverted.
pub trait HasQuantiles {
    fn quantiles(&self, k: usize) -> QuantileFn;
}

fn lattice(k: usize) -> Vec<f64> {
    assert!(k >= MIN_K, "quantile lattice needs K ≥ {MIN_K}");
    (0..k).map(|i| (i as f64 + 0.5) / k as f64).collect()
}

impl HasQuantiles for Density {
    /// Inverts the cumulative distribution of the piecewise-linear
    /// interpolant of the nodal values. At the nodes this is exactly the
    /// trapezoidal CDF; inside a cell it is the monotone quadratic through
    /// those node values. Flat runs resolve to the leftmost preimage.
    fn quantiles(&self, k: usize) -> QuantileFn {
        let grid = self.grid();
        let h = grid.spacing();
        let v = self.values();
        let n = v.len();
        let mut cum = Vec::with_capacity(n);
        cum.push(0.0);
        for i in 0..n - 1 {
            cum.push(cum[i] + 0.5 * h * (v[i] + v[i + 1]));
        }
        let total = cum[n - 1];
        let mut out = Vec::with_capacity(k);
        let mut i = 0;
        for z in lattice(k) {
            let z = z * total;
            while i < n - 2 && cum[i + 1] < z {
                i += 1;
            }
            let r = (z - cum[i]).max(0.0);
            let a = 0.5 * h * (v[i + 1] - v[i]);
            let b = h * v[i];
            let disc = (b * b + 4.0 * a * r).max(0.0);
            let denom = b + disc.sqrt();
            let t = if denom > 0.0 { (2.0 * r / denom).clamp(0.0, 1.0) } else { 0.0 };
            out.push(grid.x(i) + t * h);
        }
        // enforce monotonicity against round-off at cell joins
        for j in 1..out.len() {
            if out[j] < out[j - 1] {
                out[j] = out[j - 1];
            }
        }
        QuantileFn::new(out)
    }
}

impl HasQuantiles for AtomicMeasure {
    fn quantiles(&self, k: usize) -> QuantileFn {
        QuantileFn::new(self.quantiles_at(&lattice(k)))
    }
}

impl HasQuantiles for QuantileFn {
    fn quantiles(&self, k: usize) -> QuantileFn {
        assert_eq!(k, self.len(), "cannot resample a quantile function");
        self.clone()
    }
}

/// Either a grid density or an exact atomic measure.
#[derive(Debug, Clone, PartialEq)]
pub enum Measure {
    Continuous(Density),
    Atomic(AtomicMeasure),
}

impl Measure {
    pub fn mean(&self) -> f64 {
        match self {
            Measure::Continuous(d) => d.mean(),
            Measure::Atomic(a) => a.mean(),
        }
    }

    pub fn mass(&self) -> f64 {
        match self {
            Measure::Continuous(d) => d.mass(),
            Measure::Atomic(a) => a.total_weight(),
        }
    }

    pub fn as_density(&self) -> Option<&Density> {
        match self {
            Measure::Continuous(d) => Some(d),
            Measure::Atomic(_) => None,
        }
    }

    pub fn as_atomic(&self) -> Option<&AtomicMeasure> {
        match self {
            Measure::Atomic(a) => Some(a),
            Measure::Continuous(_) => None,
        }
    }
}

impl From<Density> for Measure {
    fn from(d: Density) -> Self {
        Measure::Continuous(d)
    }
}

impl From<AtomicMeasure> for Measure {
    fn from(a: AtomicMeasure) -> Self {
        Measure::Atomic(a)
    }
}

impl HasQuantiles for Measure {
    fn quantiles(&self, k: usize) -> QuantileFn {
        match self {
            Measure::Continuous(d) => d.quantiles(k),
            Measure::Atomic(a) => a.quantiles(k),
        }
    }
}

pub fn quantiles<M: HasQuantiles + ?Sized>(n: &M, k: usize) -> QuantileFn {
    n.quantiles(k)
}

pub fn w2<A: HasQuantiles + ?Sized, B: HasQuantiles + ?Sized>(n: &A, m: &B, k: usize) -> f64 {
    n.quantiles(k).w2(&m.quantiles(k))
}

pub fn w1<A: HasQuantiles + ?Sized, B: HasQuantiles + ?Sized>(n: &A, m: &B, k: usize) -> f64 {
    n.quantiles(k).w1(&m.quantiles(k))
}

/// `W₂` between two [`Measure`]s: exact for a pair of atomic measures,
/// the midpoint lattice with `k` levels otherwise.
pub fn w2_measures(n: &Measure, m: &Measure, k: usize) -> f64 {
    match (n, m) {
        (Measure::Atomic(a), Measure::Atomic(b)) => crate::atomic::w2_exact(a, b),
        _ => w2(n, m, k),
    }
}

/// `w(n, m) = W₂(n(· − Z_n), m(· − Z_m))`, the Wasserstein distance with the
/// relative translation optimized out.
pub fn w_recentered<A: HasQuantiles + ?Sized, B: HasQuantiles + ?Sized>(
    n: &A,
    m: &B,
    k: usize,
) -> f64 {
    n.quantiles(k).w_recentered(&m.quantiles(k))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..0.5).contains(&alpha) {
        return Err(Error::InvalidParams(format!("tilt needs α ∈ [0, ½), got {alpha}")));
    }
    Ok(())
}

/// `(1 − α + α·a/∫a n)·n`: interpolation between `n` and its
/// selection-weighted version. The result has unit mass by construction.
pub fn tilt_interp<A: Fitness + ?Sized>(n: &Measure, alpha: f64, a: &A) -> Result<Measure> {
    tilt_with(n, alpha, &|x| a.value(x), a.as_polynomial().cloned())
}

/// As [`tilt_interp`] with the selection translated: `a(· − shift)`.
pub fn tilt_translated<A: Fitness + ?Sized>(
    n: &Measure,
    alpha: f64,
    a: &A,
    shift: f64,
) -> Result<Measure> {
    tilt_with(
        n,
        alpha,
        &|x| a.value(x - shift),
        a.as_polynomial().map(|p| p.translate(shift)),
    )
}

fn tilt_with(
    n: &Measure,
    alpha: f64,
    a: &dyn Fn(f64) -> f64,
    poly: Option<Polynomial>,
) -> Result<Measure> {
    check_alpha(alpha)?;
    match n {
        Measure::Continuous(d) => {
            let selection_mass = d.integrate(a);
            if !(selection_mass > 0.0) {
                return Err(Error::ZeroSelectionMass);
            }
            let c = alpha / selection_mass;
            let values = d
                .grid()
                .nodes()
                .zip(d.values())
                .map(|(x, v)| (1.0 - alpha + c * a(x)) * v)
                .collect();
            Ok(Measure::Continuous(Density::normalize(*d.grid(), values)?))
        }
        Measure::Atomic(m) => {
            let p = poly.ok_or(Error::UnsupportedSelection)?;
            let selection_mass = m.integrate_poly(&p);
            if !(selection_mass > 0.0) {
                return Err(Error::ZeroSelectionMass);
            }
            let factor = p
                .scale(alpha / selection_mass)
                .add(&Polynomial::constant(1.0 - alpha));
            Ok(Measure::Atomic(m.reweight(&factor)?))
        }
    }
}

/// `(1 − α)·n + α·p` for `α ∈ [0, ¼]`.
pub fn tail_mixture(n: &Measure, p: &Measure, alpha: f64) -> Result<Measure> {
    if !(0.0..=0.25).contains(&alpha) {
        return Err(Error::InvalidParams(format!(
            "tail mixture needs α ∈ [0, ¼], got {alpha}"
        )));
    }
    match (n, p) {
        (Measure::Continuous(a), Measure::Continuous(b)) => {
            if a.grid() != b.grid() {
                return Err(Error::GridMismatch);
            }
            let values = a
                .values()
                .iter()
                .zip(b.values())
                .map(|(x, y)| (1.0 - alpha) * x + alpha * y)
                .collect();
            Ok(Measure::Continuous(Density::normalize(*a.grid(), values)?))
        }
        (Measure::Atomic(a), Measure::Atomic(b)) => Ok(Measure::Atomic(a.mix(b, alpha)?)),
        _ => Err(Error::InvalidMeasure(
            "tail mixture needs two measures of the same kind".into(),
        )),
    }
}
