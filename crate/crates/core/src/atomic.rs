//! Finite mixtures of point masses and polynomial-density segments.
//!
//! These measures carry exact quantile functions, which is what the
//! lower-bound counterexamples need: flat runs in the quantile function
//! must not be smeared by a grid.

use crate::error::{Error, Result};
use crate::poly::Polynomial;

const WEIGHT_TOL: f64 = 1e-12;

/// Absolutely continuous piece with density `density(x)` on `[left, right]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub left: f64,
    pub right: f64,
    pub density: Polynomial,
}

impl Segment {
    /// Uniform piece of total weight `weight`.
    pub fn uniform(left: f64, right: f64, weight: f64) -> Self {
        Self {
            left,
            right,
            density: Polynomial::constant(weight / (right - left)),
        }
    }

    pub fn weight(&self) -> f64 {
        self.density.integrate(self.left, self.right)
    }

    fn moment(&self, k: i32) -> f64 {
        let mut c = vec![0.0; k as usize];
        c.push(1.0);
        self.density
            .mul(&Polynomial::new(c))
            .integrate(self.left, self.right)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    atoms: Vec<(f64, f64)>,
    segments: Vec<Segment>,
}

/// One monotone piece of the cumulative distribution.
#[derive(Debug, Clone)]
enum CdfPiece {
    Atom {
        x: f64,
        end: f64,
    },
    Continuous {
        lo: f64,
        hi: f64,
        start: f64,
        end: f64,
        antiderivative: Polynomial,
    },
}

impl AtomicMeasure {
    /// Zero-weight atoms and segments are dropped; atoms at equal locations
    /// must be merged by the caller.
    pub fn new(atoms: Vec<(f64, f64)>, segments: Vec<Segment>) -> Result<Self> {
        let mut kept_atoms = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            if !x.is_finite() || !(w >= 0.0) {
                return Err(Error::InvalidMeasure(format!("atom ({x}, {w}) is invalid")));
            }
            if w > 0.0 {
                kept_atoms.push((x, w));
            }
        }
        kept_atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        if kept_atoms.windows(2).any(|p| p[0].0 == p[1].0) {
            return Err(Error::InvalidMeasure("atom locations must be distinct".into()));
        }
        let mut kept_segments = Vec::with_capacity(segments.len());
        for s in segments {
            if !(s.left < s.right) || !s.left.is_finite() || !s.right.is_finite() {
                return Err(Error::InvalidMeasure(format!(
                    "segment [{}, {}] is empty or unbounded",
                    s.left, s.right
                )));
            }
            let negative = (0..=16).any(|k| {
                let x = s.left + (s.right - s.left) * k as f64 / 16.0;
                s.density.eval(x) < -WEIGHT_TOL
            });
            if negative {
                return Err(Error::InvalidMeasure(format!(
                    "segment [{}, {}] has a negative density",
                    s.left, s.right
                )));
            }
            if s.weight() > 0.0 {
                kept_segments.push(s);
            }
        }
        let m = Self {
            atoms: kept_atoms,
            segments: kept_segments,
        };
        let total = m.total_weight();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidMeasure(format!("total weight is {total}, not 1")));
        }
        Ok(m)
    }

    pub fn dirac(x: f64) -> Self {
        Self {
            atoms: vec![(x, 1.0)],
            segments: Vec::new(),
        }
    }

    /// `½δ₋₁ + ½δ₁`
    pub fn dirac_pair() -> Self {
        Self {
            atoms: vec![(-1.0, 0.5), (1.0, 0.5)],
            segments: Vec::new(),
        }
    }

    /// `½δ₋₁ + (ρ/4)δ₀ + ¼·1_{[0,1]} + ((1−ρ)/4)δ₁`, for `ρ ∈ [0, 1]`.
    pub fn n_rho(rho: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::InvalidMeasure(format!("rho = {rho} outside [0, 1]")));
        }
        Self::new(
            vec![(-1.0, 0.5), (0.0, rho / 4.0), (1.0, (1.0 - rho) / 4.0)],
            vec![Segment::uniform(0.0, 1.0, 0.25)],
        )
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum::<f64>()
            + self.segments.iter().map(Segment::weight).sum::<f64>()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().map(|(x, w)| x * w).sum::<f64>()
            + self.segments.iter().map(|s| s.moment(1)).sum::<f64>()
    }

    pub fn second_moment(&self) -> f64 {
        self.atoms.iter().map(|(x, w)| x * x * w).sum::<f64>()
            + self.segments.iter().map(|s| s.moment(2)).sum::<f64>()
    }

    /// `∫ p dμ` for a polynomial `p`.
    pub fn integrate_poly(&self, p: &Polynomial) -> f64 {
        self.atoms.iter().map(|(x, w)| p.eval(*x) * w).sum::<f64>()
            + self
                .segments
                .iter()
                .map(|s| s.density.mul(p).integrate(s.left, s.right))
                .sum::<f64>()
    }

    /// Multiply by a polynomial factor and renormalize to unit mass.
    pub fn reweight(&self, factor: &Polynomial) -> Result<Self> {
        let atoms: Vec<(f64, f64)> = self
            .atoms
            .iter()
            .map(|&(x, w)| (x, w * factor.eval(x)))
            .collect();
        let segments: Vec<Segment> = self
            .segments
            .iter()
            .map(|s| Segment {
                left: s.left,
                right: s.right,
                density: s.density.mul(factor),
            })
            .collect();
        let total: f64 = atoms.iter().map(|a| a.1).sum::<f64>()
            + segments.iter().map(Segment::weight).sum::<f64>();
        if !(total > 0.0) {
            return Err(Error::InvalidMeasure("reweighting removes all mass".into()));
        }
        let inv = 1.0 / total;
        Self::new(
            atoms.into_iter().map(|(x, w)| (x, w * inv)).collect(),
            segments
                .into_iter()
                .map(|s| Segment {
                    density: s.density.scale(inv),
                    ..s
                })
                .collect(),
        )
    }

    /// `(1 − θ)·self + θ·other`
    pub fn mix(&self, other: &AtomicMeasure, theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(Error::InvalidMeasure(format!("mixing weight {theta} outside [0, 1]")));
        }
        let mut atoms: Vec<(f64, f64)> = self
            .atoms
            .iter()
            .map(|&(x, w)| (x, (1.0 - theta) * w))
            .chain(other.atoms.iter().map(|&(x, w)| (x, theta * w)))
            .collect();
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(atoms.len());
        for (x, w) in atoms {
            match merged.last_mut() {
                Some(last) if last.0 == x => last.1 += w,
                _ => merged.push((x, w)),
            }
        }
        let segments = self
            .segments
            .iter()
            .map(|s| Segment {
                density: s.density.scale(1.0 - theta),
                ..s.clone()
            })
            .chain(other.segments.iter().map(|s| Segment {
                density: s.density.scale(theta),
                ..s.clone()
            }))
            .collect();
        Self::new(merged, segments)
    }

    fn cdf_pieces(&self) -> Vec<CdfPiece> {
        let mut breaks: Vec<f64> = self.atoms.iter().map(|a| a.0).collect();
        for s in &self.segments {
            breaks.push(s.left);
            breaks.push(s.right);
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();

        let mut pieces = Vec::new();
        let mut acc = 0.0;
        let mut atom_iter = self.atoms.iter().peekable();
        for (k, &b) in breaks.iter().enumerate() {
            if k > 0 {
                let lo = breaks[k - 1];
                let density = self
                    .segments
                    .iter()
                    .filter(|s| s.left <= lo && s.right >= b)
                    .fold(Polynomial::constant(0.0), |p, s| p.add(&s.density));
                let antiderivative = density.integral();
                let mass = antiderivative.eval(b) - antiderivative.eval(lo);
                if mass > 0.0 {
                    pieces.push(CdfPiece::Continuous {
                        lo,
                        hi: b,
                        start: acc,
                        end: acc + mass,
                        antiderivative,
                    });
                    acc += mass;
                }
            }
            if let Some(&&(x, w)) = atom_iter.peek() {
                if x == b {
                    acc += w;
                    pieces.push(CdfPiece::Atom { x, end: acc });
                    atom_iter.next();
                }
            }
        }
        pieces
    }

    /// Generalized inverse `u(z) = inf{x : F(x) ≥ z}` on the given levels,
    /// which must be nondecreasing.
    pub fn quantiles_at(&self, levels: &[f64]) -> Vec<f64> {
        let pieces = self.cdf_pieces();
        let mut out = Vec::with_capacity(levels.len());
        let mut k = 0;
        for &z in levels {
            while k + 1 < pieces.len() && piece_end(&pieces[k]) < z {
                k += 1;
            }
            out.push(match &pieces[k] {
                CdfPiece::Atom { x, .. } => *x,
                CdfPiece::Continuous {
                    lo,
                    hi,
                    start,
                    antiderivative,
                    ..
                } => {
                    let target = z - start;
                    let base = antiderivative.eval(*lo);
                    let (mut a, mut b) = (*lo, *hi);
                    for _ in 0..200 {
                        let mid = 0.5 * (a + b);
                        if mid <= a || mid >= b {
                            break;
                        }
                        if antiderivative.eval(mid) - base < target {
                            a = mid;
                        } else {
                            b = mid;
                        }
                    }
                    b
                }
            });
        }
        out
    }
}

/// Exact `W₂` between atomic measures: the quantile difference is integrated
/// piece by piece in `z`, with 8-point Gauss–Legendre on each piece where
/// both quantile functions are smooth.
pub fn w2_exact(a: &AtomicMeasure, b: &AtomicMeasure) -> f64 {
    let mut breaks: Vec<f64> = vec![0.0, 1.0];
    breaks.extend(a.cdf_pieces().iter().map(piece_end));
    breaks.extend(b.cdf_pieces().iter().map(piece_end));
    breaks.iter_mut().for_each(|z| *z = z.clamp(0.0, 1.0));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();

    let mut nodes = Vec::with_capacity(8 * breaks.len());
    let mut weights = Vec::with_capacity(8 * breaks.len());
    for w in breaks.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi - lo <= 0.0 {
            continue;
        }
        let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        for (x, wt) in GAUSS_LEGENDRE_8 {
            nodes.push(mid + half * x);
            weights.push(half * wt);
        }
    }
    let u = a.quantiles_at(&nodes);
    let v = b.quantiles_at(&nodes);
    let s: f64 = u
        .iter()
        .zip(&v)
        .zip(&weights)
        .map(|((u, v), w)| w * (u - v) * (u - v))
        .sum();
    s.sqrt()
}

#[allow(clippy::excessive_precision)]
const GAUSS_LEGENDRE_8: [(f64, f64); 8] = [
    (-0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
    (-0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (-0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (-0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.183_434_642_495_649_8, 0.362_683_783_378_362_0),
    (0.525_532_409_916_329_0, 0.313_706_645_877_887_3),
    (0.796_666_477_413_626_7, 0.222_381_034_453_374_47),
    (0.960_289_856_497_536_3, 0.101_228_536_290_376_26),
];

fn piece_end(p: &CdfPiece) -> f64 {
    match p {
        CdfPiece::Atom { end, .. } | CdfPiece::Continuous { end, .. } => *end,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(AtomicMeasure::new(vec![(0.0, 0.5)], vec![]).is_err());
        assert!(AtomicMeasure::new(vec![(0.0, 0.5), (0.0, 0.5)], vec![]).is_err());
        assert!(AtomicMeasure::new(vec![(0.0, -0.5), (1.0, 1.5)], vec![]).is_err());
        assert!(AtomicMeasure::new(vec![], vec![Segment::uniform(1.0, 0.0, 1.0)]).is_err());
        let m = AtomicMeasure::new(vec![(0.0, 0.0), (1.0, 1.0)], vec![]).unwrap();
        assert_eq!(m.atoms().len(), 1);
    }

    #[test]
    fn n_rho_moments() {
        for rho in [0.0, 0.3, 1.0] {
            let m = AtomicMeasure::n_rho(rho).unwrap();
            assert!((m.total_weight() - 1.0).abs() < 1e-15);
            // a(x) = 1 + x/2 integrates to 15/16 − ρ/8
            let i = m.integrate_poly(&Polynomial::affine(1.0, 0.5));
            assert!((i - (15.0 / 16.0 - rho / 8.0)).abs() < 1e-14);
        }
    }

    #[test]
    fn exact_quantiles() {
        let m = AtomicMeasure::n_rho(1.0).unwrap();
        let q = m.quantiles_at(&[0.1, 0.49, 0.51, 0.7, 0.8, 0.9, 0.99]);
        assert_eq!(&q[..5], &[-1.0, -1.0, 0.0, 0.0, 4.0 * (0.8 - 0.75)]);
        assert!((q[4] - 0.2).abs() < 1e-14);
        assert!((q[5] - 0.6).abs() < 1e-14);
        assert!((q[6] - 0.96).abs() < 1e-14);
    }

    #[test]
    fn exact_w2() {
        let a = AtomicMeasure::dirac(0.0);
        let b = AtomicMeasure::dirac(1.5);
        assert!((w2_exact(&a, &b) - 1.5).abs() < 1e-15);
        // uniform[0,1] vs uniform[0,2]: ∫ z² dz = 1/3
        let u1 = AtomicMeasure::new(vec![], vec![Segment::uniform(0.0, 1.0, 1.0)]).unwrap();
        let u2 = AtomicMeasure::new(vec![], vec![Segment::uniform(0.0, 2.0, 1.0)]).unwrap();
        assert!((w2_exact(&u1, &u2) - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
        // a weight ε moved across distance 2
        let p = AtomicMeasure::new(vec![(-1.0, 0.5 - 1e-4), (1.0, 0.5 + 1e-4)], vec![]).unwrap();
        let d = w2_exact(&AtomicMeasure::dirac_pair(), &p);
        assert!((d - 2.0 * 1e-2).abs() < 1e-12);
    }

    #[test]
    fn mixing_merges_atoms() {
        let a = AtomicMeasure::dirac(1.0);
        let b = AtomicMeasure::dirac_pair();
        let m = a.mix(&b, 0.5).unwrap();
        assert_eq!(m.atoms(), &[(-1.0, 0.25), (1.0, 0.75)]);
    }
}
