//! The mean-trait field
//!
//! ```text
//! F(Y) = ∫ (x − Y) a(x) Γ_{2σ²}(x − Y) dx
//! ```
//!
//! its roots, and the ODE `Y' = F(Y)`.

use crate::dynamics::TrajectoryRecord;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernels::{gaussian_unchecked, SelectionFn};

/// Lattice step of the sign-change scan in [`MacroField::find_roots`].
pub const SCAN_STEP: f64 = 0.01;
pub const ROOT_TOL: f64 = 1e-10;
/// Central-difference step for `F'`.
pub const DERIV_STEP: f64 = 1e-5;
/// Safe-range margin in standard deviations of `Γ_{2σ²}`.
const SAFE_SIGMAS: f64 = 8.0;

#[derive(Debug, Clone)]
pub struct MacroField {
    sigma2: f64,
    selection: SelectionFn,
    quad_grid: Grid,
    weights: Vec<f64>,
    a_values: Vec<f64>,
}

impl MacroField {
    /// Uses a quadrature grid of 4096 nodes on `[−40, 40]`.
    pub fn new(sigma2: f64, selection: SelectionFn) -> Result<Self> {
        Self::with_grid(sigma2, selection, Grid::new(-40.0, 40.0, 4096)?)
    }

    pub fn with_grid(sigma2: f64, selection: SelectionFn, quad_grid: Grid) -> Result<Self> {
        if !(sigma2 > 0.0) {
            return Err(Error::NonPositiveVariance(sigma2));
        }
        let field = Self {
            sigma2,
            a_values: selection.sample(&quad_grid),
            weights: quad_grid.trapezoid_weights(),
            selection,
            quad_grid,
        };
        let (lo, hi) = field.safe_range();
        if !(lo < hi) {
            return Err(Error::InvalidGrid(format!(
                "quadrature grid [{}, {}] too narrow for σ² = {sigma2}",
                quad_grid.x_min(),
                quad_grid.x_max()
            )));
        }
        Ok(field)
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn selection(&self) -> &SelectionFn {
        &self.selection
    }

    pub fn quad_grid(&self) -> &Grid {
        &self.quad_grid
    }

    /// Values of `Y` for which `Γ_{2σ²}(· − Y)` leaves negligible mass
    /// outside the quadrature grid.
    pub fn safe_range(&self) -> (f64, f64) {
        let margin = SAFE_SIGMAS * (2.0 * self.sigma2).sqrt();
        (
            self.quad_grid.x_min() + margin,
            self.quad_grid.x_max() - margin,
        )
    }

    fn check_range(&self, y: f64) -> Result<()> {
        let (lo, hi) = self.safe_range();
        if y >= lo && y <= hi {
            Ok(())
        } else {
            Err(Error::OutOfRange { value: y, lo, hi })
        }
    }

    /// `F(Y)` by the trapezoid rule.
    pub fn f_eval(&self, y: f64) -> Result<f64> {
        self.check_range(y)?;
        Ok(self.f_unchecked(y))
    }

    fn f_unchecked(&self, y: f64) -> f64 {
        let v = 2.0 * self.sigma2;
        self.quad_grid
            .nodes()
            .zip(&self.a_values)
            .zip(&self.weights)
            .filter(|((_, a), _)| **a != 0.0)
            .map(|((x, a), w)| w * (x - y) * a * gaussian_unchecked(x - y, v))
            .sum()
    }

    /// `F'(Y)` by central differences.
    pub fn f_prime(&self, y: f64) -> Result<f64> {
        self.check_range(y - DERIV_STEP)?;
        self.check_range(y + DERIV_STEP)?;
        Ok((self.f_unchecked(y + DERIV_STEP) - self.f_unchecked(y - DERIV_STEP)) / (2.0 * DERIV_STEP))
    }

    /// Scan `[lo, hi]` on a lattice of step [`SCAN_STEP`] for strict sign
    /// changes of `F` and refine each one by bisection to `root_tol`.
    ///
    /// Values below a roundoff threshold count as zero, so `a ≡ const`
    /// yields no spurious roots.
    pub fn find_roots(&self, lo: f64, hi: f64, root_tol: f64) -> Result<RootReport> {
        if !(lo < hi) {
            return Err(Error::InvalidParams(format!("empty search interval [{lo}, {hi}]")));
        }
        self.check_range(lo)?;
        self.check_range(hi)?;
        let scale = self.a_values.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        let noise = 1e-12 * scale * (1.0 + (2.0 * self.sigma2).sqrt()) * (1.0 + lo.abs().max(hi.abs()));
        let sign = |f: f64| if f > noise { 1 } else if f < -noise { -1 } else { 0 };

        let n = ((hi - lo) / SCAN_STEP).ceil() as usize;
        let mut roots = Vec::new();
        let mut last: Option<(f64, f64, i32)> = None;
        for i in 0..=n {
            let y = (lo + i as f64 * SCAN_STEP).min(hi);
            let f = self.f_unchecked(y);
            let s = sign(f);
            if s == 0 {
                continue;
            }
            if let Some((y0, f0, s0)) = last {
                if s != s0 {
                    let z = self.bisect(y0, f0, y, root_tol);
                    let f_prime = self.f_prime(z)?;
                    roots.push(Root {
                        location: z,
                        f_prime,
                        stable: f_prime < 0.0,
                    });
                }
            }
            last = Some((y, f, s));
        }
        Ok(RootReport { roots })
    }

    fn bisect(&self, mut a: f64, fa: f64, mut b: f64, tol: f64) -> f64 {
        let positive_left = fa > 0.0;
        while b - a > tol {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let fm = self.f_unchecked(m);
            if fm == 0.0 {
                return m;
            }
            if (fm > 0.0) == positive_left {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    /// Classical RK4 for `Y' = F(Y)` on `[0, t_final]`.
    pub fn ode_solve(&self, y0: f64, t_final: f64, dt_ode: f64) -> Result<OdeSeries> {
        if !(dt_ode > 0.0) || !(t_final >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "need dt_ode > 0 and t_final ≥ 0, got {dt_ode}, {t_final}"
            )));
        }
        self.check_range(y0)?;
        let steps = (t_final / dt_ode).ceil() as usize;
        let h = if steps == 0 { 0.0 } else { t_final / steps as f64 };
        let (lo, hi) = self.safe_range();
        let mut times = Vec::with_capacity(steps + 1);
        let mut values = Vec::with_capacity(steps + 1);
        let mut y = y0;
        times.push(0.0);
        values.push(y);
        let f = |y: f64| -> Result<f64> {
            if y < lo || y > hi {
                Err(Error::Diverged { t: f64::NAN, y })
            } else {
                Ok(self.f_unchecked(y))
            }
        };
        for i in 1..=steps {
            let stage = || -> Result<f64> {
                let k1 = f(y)?;
                let k2 = f(y + 0.5 * h * k1)?;
                let k3 = f(y + 0.5 * h * k2)?;
                let k4 = f(y + h * k3)?;
                Ok(y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
            };
            let t = i as f64 * h;
            y = stage().map_err(|_| Error::Diverged { t, y })?;
            if y < lo || y > hi {
                return Err(Error::Diverged { t, y });
            }
            times.push(t);
            values.push(y);
        }
        Ok(OdeSeries { times, values })
    }

    /// Compares `Z(t)` from a simulation to `Y(αt)` with `Y(0) = Z(0)`.
    pub fn compare_macro(&self, rec: &TrajectoryRecord, alpha: f64) -> Result<MacroComparison> {
        let t_end = rec.times.last().copied().unwrap_or(0.0);
        let dt_ode = 0.01;
        let ode = self.ode_solve(rec.z[0], alpha * t_end, dt_ode)?;
        let y: Vec<f64> = rec.times.iter().map(|t| ode.at(alpha * t)).collect();
        let sup_error = rec
            .z
            .iter()
            .zip(&y)
            .fold(0.0f64, |m, (z, y)| m.max((z - y).abs()));
        Ok(MacroComparison {
            times: rec.times.clone(),
            z: rec.z.clone(),
            y,
            sup_error,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub location: f64,
    pub f_prime: f64,
    /// `F'(Z̄) < 0`.
    pub stable: bool,
}

/// Roots of `F` in increasing order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RootReport {
    pub roots: Vec<Root>,
}

impl RootReport {
    pub fn stable(&self) -> impl Iterator<Item = &Root> {
        self.roots.iter().filter(|r| r.stable)
    }

    /// Stable root closest to `y`.
    pub fn nearest_stable(&self, y: f64) -> Option<Root> {
        self.stable()
            .min_by(|a, b| (a.location - y).abs().total_cmp(&(b.location - y).abs()))
            .copied()
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "z_bar,f_prime,stable")?;
        for r in &self.roots {
            writeln!(out, "{},{},{}", r.location, r.f_prime, r.stable)?;
        }
        Ok(())
    }
}

/// Solution samples of `Y' = F(Y)`, linearly interpolated between steps.
#[derive(Debug, Clone)]
pub struct OdeSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl OdeSeries {
    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("series holds the initial value")
    }

    /// Clamps to the end values outside the solved interval.
    pub fn at(&self, t: f64) -> f64 {
        let last = self.times.len() - 1;
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[last] {
            return self.values[last];
        }
        let i = self.times.partition_point(|s| *s <= t).min(last);
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let theta = (t - t0) / (t1 - t0);
        self.values[i - 1] + theta * (self.values[i] - self.values[i - 1])
    }

    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,Y")?;
        for (t, y) in self.times.iter().zip(&self.values) {
            writeln!(out, "{t},{y}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MacroComparison {
    pub times: Vec<f64>,
    pub z: Vec<f64>,
    /// `Y(αt)` at the same times.
    pub y: Vec<f64>,
    pub sup_error: f64,
}

impl MacroComparison {
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,Z,Y_alpha_t,abs_error")?;
        for i in 0..self.times.len() {
            writeln!(
                out,
                "{},{},{},{}",
                self.times[i],
                self.z[i],
                self.y[i],
                (self.z[i] - self.y[i]).abs()
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `F` for a single bump `A e^{−(x−c)²/w}`, in closed form.
    fn bump_field(amplitude: f64, center: f64, width: f64, sigma2: f64, y: f64) -> f64 {
        let v = width / 2.0 + 2.0 * sigma2;
        let d = center - y;
        amplitude * (std::f64::consts::PI * width).sqrt() * gaussian_unchecked(d, v) * 2.0 * sigma2 * d / v
    }

    #[test]
    fn matches_closed_form() {
        let field = MacroField::new(1.0, SelectionFn::bimodal()).unwrap();
        for y in [-9.0, -5.0, -0.3, 0.0, 2.5, 7.0] {
            let exact = bump_field(2.0, 5.0, 4.0, 1.0, y) + bump_field(1.0, -5.0, 4.0, 1.0, y);
            let f = field.f_eval(y).unwrap();
            assert!((f - exact).abs() < 1e-12, "{y}: {f} vs {exact}");
        }
    }

    #[test]
    fn bimodal_roots() {
        let field = MacroField::new(1.0, SelectionFn::bimodal()).unwrap();
        let report = field.find_roots(-10.0, 10.0, ROOT_TOL).unwrap();
        let locs: Vec<f64> = report.roots.iter().map(|r| r.location).collect();
        assert_eq!(report.roots.len(), 3, "{locs:?}");
        assert!((locs[0] + 5.0).abs() < 0.5 && report.roots[0].stable);
        assert!(locs[1].abs() < 0.5 && !report.roots[1].stable);
        assert!((locs[2] - 5.0).abs() < 0.5 && report.roots[2].stable);
        for r in &report.roots {
            assert!(field.f_eval(r.location).unwrap().abs() < 1e-9);
        }
        // F'(c) ≈ −A/(2√2) for an isolated bump of width 4 at σ² = 1
        assert!((report.roots[2].f_prime + 2.0 / 8f64.sqrt()).abs() < 0.01);
    }

    #[test]
    fn degenerate_selections() {
        let zero = MacroField::new(1.0, SelectionFn::zero()).unwrap();
        assert!(zero.find_roots(-10.0, 10.0, ROOT_TOL).unwrap().roots.is_empty());
        let c = MacroField::new(1.0, SelectionFn::constant(0.7).unwrap()).unwrap();
        assert!(c.f_eval(3.0).unwrap().abs() < 1e-12);
        assert!(c.find_roots(-10.0, 10.0, ROOT_TOL).unwrap().roots.is_empty());
        let sym = MacroField::new(1.0, SelectionFn::single_bump(1.0, 0.0, 3.0).unwrap()).unwrap();
        assert!(sym.f_eval(0.0).unwrap().abs() < 1e-10);
    }

    #[test]
    fn out_of_range() {
        let field = MacroField::new(1.0, SelectionFn::bimodal()).unwrap();
        assert!(matches!(field.f_eval(35.0), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn ode_equilibrium_and_order() {
        let field = MacroField::new(1.0, SelectionFn::bimodal()).unwrap();
        let report = field.find_roots(-10.0, 10.0, ROOT_TOL).unwrap();
        let z = report.roots[0].location;
        let eq = field.ode_solve(z, 20.0, 0.1).unwrap();
        assert!(eq.values.iter().all(|y| (y - z).abs() < 1e-9));

        let run = field.ode_solve(-10.0, 60.0, 0.05).unwrap();
        assert!((run.terminal() - z).abs() < 1e-3);

        let t = 3.0;
        let fine = field.ode_solve(-10.0, t, 0.0125).unwrap().terminal();
        let e1 = (field.ode_solve(-10.0, t, 0.2).unwrap().terminal() - fine).abs();
        let e2 = (field.ode_solve(-10.0, t, 0.1).unwrap().terminal() - fine).abs();
        let ratio = e1 / e2;
        assert!(ratio > 12.0 && ratio < 20.0, "{ratio}");
    }

    #[test]
    fn series_interpolation() {
        let s = OdeSeries {
            times: vec![0.0, 1.0, 2.0],
            values: vec![0.0, 2.0, 3.0],
        };
        assert_eq!(s.at(0.5), 1.0);
        assert_eq!(s.at(1.5), 2.5);
        assert_eq!(s.at(5.0), 3.0);
        assert_eq!(s.at(-1.0), 0.0);
    }
}
