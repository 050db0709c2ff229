//! Probability densities sampled on a [`Grid`].

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernels::gaussian_pdf;

/// Values at or above this level are treated as floating-point noise and
/// clamped to zero; anything more negative is rejected.
pub const NEGATIVE_CLAMP: f64 = -1e-14;

/// Nonnegative nodal values with trapezoidal mass exactly one.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    grid: Grid,
    values: Vec<f64>,
}

impl Density {
    /// Clamp round-off negatives, then rescale to unit trapezoidal mass.
    pub fn normalize(grid: Grid, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_points() {
            return Err(Error::GridMismatch);
        }
        for (index, v) in values.iter_mut().enumerate() {
            if v.is_nan() || *v < NEGATIVE_CLAMP {
                return Err(Error::NegativeValue { index, value: *v });
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let mass = grid.integrate(&values);
        if !(mass > 0.0) || !mass.is_finite() {
            return Err(Error::AllZero);
        }
        let inv = 1.0 / mass;
        values.iter_mut().for_each(|v| *v *= inv);
        Ok(Self { grid, values })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: Grid, f: F) -> Result<Self> {
        Self::normalize(grid, grid.nodes().map(f).collect())
    }

    /// `Γ_variance(· − mean)` sampled on the grid and renormalized.
    pub fn gaussian(grid: Grid, mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0) {
            return Err(Error::NonPositiveVariance(variance));
        }
        Self::from_fn(grid, |x| gaussian_pdf(x - mean, variance).unwrap_or(0.0))
    }

    /// Weighted Gaussian mixture; weights need not sum to one.
    pub fn gaussian_mixture(grid: Grid, components: &[(f64, f64, f64)]) -> Result<Self> {
        for &(w, _, var) in components {
            if !(var > 0.0) {
                return Err(Error::NonPositiveVariance(var));
            }
            if !(w >= 0.0) {
                return Err(Error::InvalidParams(format!("negative mixture weight {w}")));
            }
        }
        Self::from_fn(grid, |x| {
            components
                .iter()
                .map(|&(w, mu, var)| w * gaussian_pdf(x - mu, var).unwrap_or(0.0))
                .sum()
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub fn mean(&self) -> f64 {
        self.grid.integrate_with(&self.values, |x| x)
    }

    pub fn second_moment(&self) -> f64 {
        self.grid.integrate_with(&self.values, |x| x * x)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.grid.integrate_with(&self.values, |x| (x - m) * (x - m))
    }

    /// `∫ f · n` by the trapezoidal rule.
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.grid.integrate_with(&self.values, f)
    }

    /// Mass held in the outermost cell at each end of the grid.
    pub fn boundary_mass(&self) -> f64 {
        let h = self.grid.spacing();
        let v = &self.values;
        let n = v.len();
        0.5 * h * (v[0] + v[1] + v[n - 2] + v[n - 1])
    }

    pub fn sup_distance(&self, other: &Density) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    /// Two-column CSV with header `x,density`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,density")?;
        for (x, v) in self.grid.nodes().zip(&self.values) {
            writeln!(out, "{x},{v}")?;
        }
        Ok(())
    }

    /// Read a `x,density` table. The abscissae must form a valid uniform grid.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut xs = Vec::new();
        let mut vs = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with('x')) {
                continue;
            }
            let mut cols = line.split(',');
            let (Some(x), Some(v)) = (cols.next(), cols.next()) else {
                return Err(Error::Table(format!("line {}: expected two columns", lineno + 1)));
            };
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Table(format!("line {}: {e}", lineno + 1)))
            };
            xs.push(parse(x)?);
            vs.push(parse(v)?);
        }
        if xs.len() < 2 {
            return Err(Error::Table("fewer than two rows".into()));
        }
        let grid = Grid::new(xs[0], *xs.last().unwrap(), xs.len())?;
        let h = grid.spacing();
        for (i, x) in xs.iter().enumerate() {
            if (x - grid.x(i)).abs() > 1e-6 * h {
                return Err(Error::Table(format!("abscissa {x} at row {i} is not uniform")));
            }
        }
        Self::normalize(grid, vs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fine_grid() -> Grid {
        // h = 1/1024, with 0 and ±1 on nodes.
        Grid::new(-2.0, -2.0 + 4095.0 / 1024.0, 4096).unwrap()
    }

    /// Indicator of [lo, hi] with half values at the jumps.
    fn indicator(grid: Grid, lo: f64, hi: f64) -> Density {
        let h = grid.spacing();
        Density::from_fn(grid, |x| {
            if (x - lo).abs() < 1e-9 * h || (x - hi).abs() < 1e-9 * h {
                0.5
            } else if x > lo && x < hi {
                1.0
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn mass_is_one() {
        let g = Grid::default();
        let n = Density::normalize(g, g.nodes().map(|x| (-x * x / 3.0).exp() * 7.0).collect()).unwrap();
        assert!((n.mass() - 1.0).abs() < 1e-12);
        let u = Density::normalize(g, vec![1.0; g.n_points()]).unwrap();
        assert!((u.mass() - 1.0).abs() < 1e-12);
        let first = u.values()[3];
        assert!(u.values()[1..g.n_points() - 1].iter().all(|v| *v == first));
    }

    #[test]
    fn normalize_clamps_noise_and_rejects_zero() {
        let g = Grid::default();
        let mut v = vec![1.0; g.n_points()];
        v[10] = -1e-15;
        let n = Density::normalize(g, v.clone()).unwrap();
        assert_eq!(n.values()[10], 0.0);
        v[10] = -1e-9;
        assert!(matches!(
            Density::normalize(g, v),
            Err(Error::NegativeValue { index: 10, .. })
        ));
        assert!(matches!(
            Density::normalize(g, vec![0.0; g.n_points()]),
            Err(Error::AllZero)
        ));
    }

    #[test]
    fn gaussian_moments() {
        let g = Grid::new(-18.0, 22.0, 1024).unwrap();
        let n = Density::gaussian(g, 2.0, 1.0).unwrap();
        assert!((n.mean() - 2.0).abs() < 1e-8);

        let g = Grid::default();
        let bi = Density::gaussian_mixture(g, &[(0.5, 3.0, 1.0), (0.5, -3.0, 1.0)]).unwrap();
        assert!(bi.mean().abs() < 1e-8);
        let n = Density::gaussian(g, 0.0, 2.0).unwrap();
        assert!((n.second_moment() - 2.0).abs() < 1e-6);

        let g = Grid::new(-10.0, 10.0, 8192).unwrap();
        let sharp = Density::gaussian(g, 1.0, 0.01).unwrap();
        assert!((sharp.second_moment() - 1.01).abs() < 1e-4);
    }

    #[test]
    fn uniform_moments() {
        let g = fine_grid();
        let u01 = indicator(g, 0.0, 1.0);
        assert!((u01.mean() - 0.5).abs() < 1e-8);
        let u11 = indicator(g, -1.0, 1.0);
        assert!((u11.second_moment() - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn csv_round_trip() {
        let g = Grid::new(-5.0, 5.0, 64).unwrap();
        let n = Density::gaussian(g, 0.3, 1.2).unwrap();
        let mut buf = Vec::new();
        n.write_csv(&mut buf).unwrap();
        assert!(buf.starts_with(b"x,density\n"));
        let back = Density::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.grid().n_points(), 64);
        assert!(back.sup_distance(&n).unwrap() < 1e-15);
    }
}
