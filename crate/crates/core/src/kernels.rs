//! Gaussian kernels and selection functions.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::poly::Polynomial;

/// `Γ_v(x) = exp(−x²/2v) / √(2πv)`.
pub fn gaussian_pdf(x: f64, variance: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(Error::NonPositiveVariance(variance));
    }
    Ok(gaussian_unchecked(x, variance))
}

#[inline]
pub(crate) fn gaussian_unchecked(x: f64, variance: f64) -> f64 {
    (-x * x / (2.0 * variance)).exp() / (2.0 * PI * variance).sqrt()
}

/// A fitness profile that can reweight measures.
///
/// Atomic measures with continuous segments can only be tilted exactly by
/// polynomial profiles, hence the optional accessor.
pub trait Fitness {
    fn value(&self, x: f64) -> f64;

    fn as_polynomial(&self) -> Option<&Polynomial> {
        None
    }
}

impl Fitness for Polynomial {
    fn value(&self, x: f64) -> f64 {
        self.eval(x)
    }

    fn as_polynomial(&self) -> Option<&Polynomial> {
        Some(self)
    }
}

/// `amplitude · exp(−(x − center)² / width)`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bump {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

impl Bump {
    fn derivatives(&self, x: f64) -> [f64; 3] {
        let d = x - self.center;
        let g = self.amplitude * (-d * d / self.width).exp();
        let g1 = -2.0 * d / self.width * g;
        let g2 = (4.0 * d * d / (self.width * self.width) - 2.0 / self.width) * g;
        [g, g1, g2]
    }
}

/// Piecewise-linear sampled selection, zero outside its abscissa range.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionTable {
    xs: Vec<f64>,
    values: Vec<f64>,
}

impl SelectionTable {
    pub fn new(xs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if xs.len() != values.len() || xs.len() < 2 {
            return Err(Error::InvalidParams(
                "selection table needs at least two (x, a) rows".into(),
            ));
        }
        if xs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParams(
                "selection table abscissae must be strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParams(
                "selection table values must be finite and nonnegative".into(),
            ));
        }
        Ok(Self { xs, values })
    }

    fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x < self.xs[0] || x > self.xs[n - 1] {
            return 0.0;
        }
        let k = self.xs.partition_point(|&p| p <= x).clamp(1, n - 1);
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let t = (x - x0) / (x1 - x0);
        self.values[k - 1] * (1.0 - t) + self.values[k] * t
    }

    fn min_spacing(&self) -> f64 {
        self.xs
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }
}

/// Selection function `a(x) ≥ 0`: a sum of Gaussian bumps plus a constant
/// offset, optionally replaced by a sampled table, optionally multiplied by a
/// C² window that vanishes for `|x| ≥ truncation_radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionFn {
    bumps: Vec<Bump>,
    offset: f64,
    truncation_radius: Option<f64>,
    table: Option<SelectionTable>,
}

impl SelectionFn {
    pub fn new(bumps: Vec<Bump>, truncation_radius: Option<f64>) -> Result<Self> {
        for b in &bumps {
            if !(b.amplitude >= 0.0) || !(b.width > 0.0) || !b.center.is_finite() {
                return Err(Error::InvalidParams(format!(
                    "bump needs amplitude ≥ 0 and width > 0, got {b:?}"
                )));
            }
        }
        if let Some(r) = truncation_radius {
            if !(r > 1.0) || !r.is_finite() {
                return Err(Error::InvalidParams(format!(
                    "truncation radius must exceed 1, got {r}"
                )));
            }
        }
        Ok(Self {
            bumps,
            offset: 0.0,
            truncation_radius,
            table: None,
        })
    }

    pub fn zero() -> Self {
        Self {
            bumps: Vec::new(),
            offset: 0.0,
            truncation_radius: None,
            table: None,
        }
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::zero().with_offset(c)
    }

    pub fn from_table(table: SelectionTable) -> Self {
        Self {
            table: Some(table),
            ..Self::zero()
        }
    }

    pub fn with_offset(mut self, offset: f64) -> Result<Self> {
        if !(offset >= 0.0) || !offset.is_finite() {
            return Err(Error::InvalidParams(format!("offset must be ≥ 0, got {offset}")));
        }
        self.offset = offset;
        Ok(self)
    }

    pub fn with_truncation(mut self, radius: Option<f64>) -> Result<Self> {
        let bumps = std::mem::take(&mut self.bumps);
        let fresh = Self::new(bumps, radius)?;
        self.bumps = fresh.bumps;
        self.truncation_radius = radius;
        Ok(self)
    }

    /// `a(x) = 2e^{−(x−5)²/4} + e^{−(x+5)²/4}`, without truncation.
    pub fn bimodal() -> Self {
        Self::new(
            vec![
                Bump {
                    amplitude: 2.0,
                    center: 5.0,
                    width: 4.0,
                },
                Bump {
                    amplitude: 1.0,
                    center: -5.0,
                    width: 4.0,
                },
            ],
            None,
        )
        .expect("valid bumps")
    }

    /// The bimodal profile cut off smoothly at `|x| = 12`.
    pub fn bimodal_truncated() -> Self {
        Self::bimodal()
            .with_truncation(Some(12.0))
            .expect("valid radius")
    }

    pub fn single_bump(amplitude: f64, center: f64, width: f64) -> Result<Self> {
        Self::new(
            vec![Bump {
                amplitude,
                center,
                width,
            }],
            None,
        )
    }

    pub fn bumps(&self) -> &[Bump] {
        &self.bumps
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn truncation_radius(&self) -> Option<f64> {
        self.truncation_radius
    }

    /// Translate the profile: `x ↦ a(x − shift)`. Truncation is dropped,
    /// since the cutoff window is centred at the origin.
    pub fn shifted(&self, shift: f64) -> Self {
        Self {
            bumps: self
                .bumps
                .iter()
                .map(|b| Bump {
                    center: b.center + shift,
                    ..*b
                })
                .collect(),
            offset: self.offset,
            truncation_radius: None,
            table: self.table.as_ref().map(|t| SelectionTable {
                xs: t.xs.iter().map(|x| x + shift).collect(),
                values: t.values.clone(),
            }),
        }
    }

    /// `λ·a`
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor >= 0.0) {
            return Err(Error::InvalidParams(format!("scale must be ≥ 0, got {factor}")));
        }
        Ok(Self {
            bumps: self
                .bumps
                .iter()
                .map(|b| Bump {
                    amplitude: b.amplitude * factor,
                    ..*b
                })
                .collect(),
            offset: self.offset * factor,
            truncation_radius: self.truncation_radius,
            table: self.table.as_ref().map(|t| SelectionTable {
                xs: t.xs.clone(),
                values: t.values.iter().map(|v| v * factor).collect(),
            }),
        })
    }

    /// Largest `|x|` where `a` may be nonzero, if `a` is compactly supported.
    pub fn support_radius(&self) -> Option<f64> {
        if let Some(r) = self.truncation_radius {
            return Some(r);
        }
        match &self.table {
            Some(t) if self.offset == 0.0 => {
                let first = t.xs[0].abs();
                let last = t.xs.last().unwrap().abs();
                Some(first.max(last))
            }
            _ if self.bumps.is_empty() && self.offset == 0.0 => Some(0.0),
            _ => None,
        }
    }

    fn base(&self, x: f64) -> [f64; 3] {
        if let Some(t) = &self.table {
            let h = 0.25 * t.min_spacing();
            let (m, c, p) = (t.eval(x - h), t.eval(x), t.eval(x + h));
            return [c + self.offset, (p - m) / (2.0 * h), (p - 2.0 * c + m) / (h * h)];
        }
        let mut acc = [self.offset, 0.0, 0.0];
        for b in &self.bumps {
            let d = b.derivatives(x);
            acc[0] += d[0];
            acc[1] += d[1];
            acc[2] += d[2];
        }
        acc
    }

    /// `(a, a', a'')` at `x`.
    pub fn eval_all(&self, x: f64) -> [f64; 3] {
        let g = self.base(x);
        match self.truncation_radius {
            None => g,
            Some(r) => {
                let w = window(x, r);
                [
                    g[0] * w[0],
                    g[1] * w[0] + g[0] * w[1],
                    g[2] * w[0] + 2.0 * g[1] * w[1] + g[0] * w[2],
                ]
            }
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.eval_all(x)[0]
    }

    pub fn eval_d1(&self, x: f64) -> f64 {
        self.eval_all(x)[1]
    }

    pub fn eval_d2(&self, x: f64) -> f64 {
        self.eval_all(x)[2]
    }

    pub fn sample(&self, grid: &Grid) -> Vec<f64> {
        grid.nodes().map(|x| self.eval(x)).collect()
    }

    /// Grid-sampled `(sup|a|, sup|a'|, sup|a''|)`.
    pub fn sup_norms(&self, grid: &Grid) -> (f64, f64, f64) {
        grid.nodes().fold((0.0, 0.0, 0.0), |acc, x| {
            let d = self.eval_all(x);
            (
                acc.0.max(d[0].abs()),
                acc.1.max(d[1].abs()),
                acc.2.max(d[2].abs()),
            )
        })
    }

    /// Sampled supremum of `a` over a window covering every feature of the
    /// profile, independent of any simulation grid.
    pub fn sup_estimate(&self) -> f64 {
        let mut lo: f64 = -1.0;
        let mut hi: f64 = 1.0;
        for b in &self.bumps {
            let reach = 6.0 * b.width.sqrt();
            lo = lo.min(b.center - reach);
            hi = hi.max(b.center + reach);
        }
        if let Some(t) = &self.table {
            lo = lo.min(t.xs[0]);
            hi = hi.max(*t.xs.last().unwrap());
        }
        let steps = 20_000;
        let mut sup = self.offset;
        for k in 0..=steps {
            let x = lo + (hi - lo) * k as f64 / steps as f64;
            sup = sup.max(self.eval(x));
        }
        for b in &self.bumps {
            sup = sup.max(self.eval(b.center));
        }
        sup
    }
}

impl Fitness for SelectionFn {
    fn value(&self, x: f64) -> f64 {
        self.eval(x)
    }
}

/// C² cutoff: 1 on `|x| ≤ r − 1`, 0 on `|x| ≥ r`, quintic smoothstep between.
fn window(x: f64, r: f64) -> [f64; 3] {
    let t = x.abs() - (r - 1.0);
    if t <= 0.0 {
        return [1.0, 0.0, 0.0];
    }
    if t >= 1.0 {
        return [0.0, 0.0, 0.0];
    }
    let s = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
    let ds = 30.0 * t * t * (1.0 - t) * (1.0 - t);
    let d2s = 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t);
    let sign = x.signum();
    [1.0 - s, -sign * ds, -d2s]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_values() {
        assert!((gaussian_pdf(0.0, 1.0).unwrap() - 0.398942280).abs() < 1e-9);
        let expected = (-0.25f64).exp() / (4.0 * PI).sqrt();
        assert!((gaussian_pdf(1.0, 2.0).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.219695645).abs() < 1e-9);
        for x in [0.3, 1.7, 4.0] {
            assert_eq!(gaussian_pdf(x, 0.7).unwrap(), gaussian_pdf(-x, 0.7).unwrap());
        }
        assert!(matches!(gaussian_pdf(0.0, 0.0), Err(Error::NonPositiveVariance(_))));
        assert!(gaussian_pdf(0.0, -1.0).is_err());
    }

    #[test]
    fn gaussian_integrates_to_one() {
        let g = Grid::default();
        for v in [0.25, 0.5, 1.0, 2.0, 4.0, 8.0] {
            let vals: Vec<f64> = g.nodes().map(|x| gaussian_pdf(x, v).unwrap()).collect();
            assert!((g.integrate(&vals) - 1.0).abs() < 1e-10, "v = {v}");
        }
    }

    #[test]
    fn convolution_semigroup() {
        // Γ_{v1} * Γ_{v2} = Γ_{v1+v2}, by direct discrete convolution.
        let g = Grid::new(-15.0, 15.0, 512).unwrap();
        let h = g.spacing();
        let (v1, v2) = (0.7, 1.3);
        let a: Vec<f64> = g.nodes().map(|x| gaussian_pdf(x, v1).unwrap()).collect();
        let mut worst: f64 = 0.0;
        for i in 0..g.n_points() {
            let x = g.x(i);
            let conv: f64 = g
                .nodes()
                .zip(&a)
                .map(|(y, ay)| ay * gaussian_pdf(x - y, v2).unwrap())
                .sum::<f64>()
                * h;
            worst = worst.max((conv - gaussian_pdf(x, v1 + v2).unwrap()).abs());
        }
        assert!(worst < 1e-8, "worst = {worst}");
    }

    #[test]
    fn bimodal_values() {
        let a = SelectionFn::bimodal();
        assert!((a.eval(5.0) - 2.0).abs() < 1e-6);
        assert!((a.eval(-5.0) - 1.0).abs() < 1e-6);
        let t = SelectionFn::bimodal_truncated();
        assert_eq!(t.eval(15.0), 0.0);
        assert_eq!(t.eval(-12.0), 0.0);
        let (s0, _, _) = a.sup_norms(&Grid::default());
        assert!((s0 - 2.0).abs() < 0.01);
        let z = SelectionFn::zero().sup_norms(&Grid::default());
        assert_eq!(z, (0.0, 0.0, 0.0));
        let one = SelectionFn::single_bump(1.0, 0.0, 1.0).unwrap();
        let g = Grid::new(-10.0, 10.0 + 20.0 / 1022.0, 1024).unwrap();
        assert!((one.sup_norms(&g).0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn truncation_is_smooth() {
        let a = SelectionFn::bimodal_truncated();
        // continuity across the cutoff, and a vanishes at the radius
        assert!(a.eval(12.0).abs() < 1e-12);
        assert!(a.eval(-12.0).abs() < 1e-12);
        for r in [11.0, 12.0, -11.0, -12.0] {
            for k in 0..3 {
                let l = a.eval_all(r - 1e-7)[k];
                let rr = a.eval_all(r + 1e-7)[k];
                assert!((l - rr).abs() < 1e-5, "k={k} r={r} {l} {rr}");
            }
        }
        // analytic derivatives agree with finite differences inside the window
        for x in [-11.6, -11.2, 11.3, 11.8, 4.0] {
            let e = 1e-5;
            let fd1 = (a.eval(x + e) - a.eval(x - e)) / (2.0 * e);
            let fd2 = (a.eval_d1(x + e) - a.eval_d1(x - e)) / (2.0 * e);
            assert!((fd1 - a.eval_d1(x)).abs() < 1e-8);
            assert!((fd2 - a.eval_d2(x)).abs() < 1e-7);
        }
        assert!(a.eval_all(0.0).iter().all(|v| v.is_finite()));
    }

    #[test]
    fn table_selection() {
        let t = SelectionTable::new(vec![-1.0, 0.0, 1.0], vec![0.0, 2.0, 0.0]).unwrap();
        let a = SelectionFn::from_table(t);
        assert_eq!(a.eval(0.5), 1.0);
        assert_eq!(a.eval(3.0), 0.0);
        assert_eq!(a.support_radius(), Some(1.0));
        assert!(SelectionTable::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(SelectionTable::new(vec![0.0, 1.0], vec![-1.0, 1.0]).is_err());
    }
}
