//! Steady states as fixed points of the one-generation map
//! `𝒯_α(n) = T((1 + αa)n / (1 + αI_n))`.

use crate::density::Density;
use crate::dynamics::tilted;
use crate::error::{Error, Result};
use crate::macroscale::{MacroField, ROOT_TOL};
use crate::params::ModelParams;
use crate::reproduction::ReproPlan;
use crate::transport::{HasQuantiles, DEFAULT_K};

/// `𝒯_α(n)`: tilt, then reproduce.
pub fn t_alpha(n: &Density, params: &ModelParams, plan: &ReproPlan) -> Result<Density> {
    let (tilt, _) = tilted(n, params.alpha, &params.selection)?;
    Ok(plan.apply_self(&tilt)?.density)
}

#[derive(Debug, Clone)]
pub struct SteadyOptions {
    pub fixed_tol: f64,
    pub max_iter: usize,
    /// `n ← (1 − θ)n + θ𝒯_α(n)`; `1` is plain Picard iteration.
    pub damping: f64,
    pub quantile_k: usize,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self {
            fixed_tol: 1e-10,
            max_iter: 10_000,
            damping: 1.0,
            quantile_k: DEFAULT_K,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SteadyResult {
    pub density: Density,
    /// Stable root of `F` nearest to the mean of the steady state, if any.
    pub z_bar_macro: Option<f64>,
    /// `W₂(n̄, Γ_{2σ²}(· − Z̄))`, with `Z̄` the macroscopic root (or the mean
    /// of `n̄` when `F` has no stable root nearby).
    pub w2_to_gaussian: f64,
    pub iterations: usize,
    /// `W₂` between the last two iterates.
    pub residual: f64,
    pub history: Vec<f64>,
    /// `|∫y n̄ − Z̄| + √α·W₂(n̄, Γ_{2σ²}(· − ∫y n̄))`.
    pub l_functional: f64,
}

impl SteadyResult {
    pub fn mean(&self) -> f64 {
        self.density.mean()
    }

    /// Geometric decay ratios of successive residuals.
    pub fn residual_ratios(&self) -> Vec<f64> {
        self.history
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect()
    }
}

/// Iterates `𝒯_α` from `Γ_{2σ²}(· − z_init)` until successive iterates are
/// within `fixed_tol` in `W₂`.
pub fn solve_steady(
    params: &ModelParams,
    plan: &ReproPlan,
    z_init: f64,
    opts: &SteadyOptions,
) -> Result<SteadyResult> {
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(Error::InvalidParams(format!(
            "damping must lie in (0, 1], got {}",
            opts.damping
        )));
    }
    let k = opts.quantile_k;
    let grid = *plan.grid();
    let mut n = Density::gaussian(grid, z_init, params.v_le())?;
    let mut q = n.quantiles(k);
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..opts.max_iter {
        let image = t_alpha(&n, params, plan)?;
        let next = if opts.damping < 1.0 {
            let mixed = n
                .values()
                .iter()
                .zip(image.values())
                .map(|(a, b)| (1.0 - opts.damping) * a + opts.damping * b)
                .collect();
            Density::normalize(grid, mixed)?
        } else {
            image
        };
        let q_next = next.quantiles(k);
        let residual = q_next.w2(&q);
        history.push(residual);
        n = next;
        q = q_next;
        if !residual.is_finite() {
            break;
        }
        if residual < opts.fixed_tol {
            converged = true;
            break;
        }
    }
    let residual = history.last().copied().unwrap_or(f64::INFINITY);
    if !converged {
        return Err(Error::NotConverged {
            iterations: history.len(),
            residual,
            history,
        });
    }

    let mean = n.mean();
    let z_bar_macro = nearest_stable_root(params, mean)?;
    let centre = z_bar_macro.unwrap_or(mean);
    let w2_to_gaussian = q.w2(&Density::gaussian(grid, centre, params.v_le())?.quantiles(k));
    let w2_own = q.w2(&Density::gaussian(grid, mean, params.v_le())?.quantiles(k));
    Ok(SteadyResult {
        density: n,
        z_bar_macro,
        w2_to_gaussian,
        iterations: history.len(),
        residual,
        l_functional: (mean - centre).abs() + params.alpha.sqrt() * w2_own,
        history,
    })
}

fn nearest_stable_root(params: &ModelParams, y: f64) -> Result<Option<f64>> {
    let field = MacroField::new(params.sigma2, params.selection.clone())?;
    let (lo, hi) = field.safe_range();
    let (a, b) = ((y - 10.0).max(lo), (y + 10.0).min(hi));
    if !(a < b) {
        return Ok(None);
    }
    Ok(field
        .find_roots(a, b, ROOT_TOL)?
        .nearest_stable(y)
        .map(|r| r.location))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::kernels::SelectionFn;

    fn setup(alpha: f64) -> (ModelParams, ReproPlan) {
        let params =
            ModelParams::new(alpha, 1.0, SelectionFn::bimodal_truncated(), 0.05, 10.0).unwrap();
        (params, ReproPlan::new(Grid::default(), 1.0).unwrap())
    }

    #[test]
    fn neutral_fixed_point() {
        let (params, plan) = setup(0.0);
        let n = Density::gaussian(*plan.grid(), 1.0, 2.0).unwrap();
        assert!(t_alpha(&n, &params, &plan).unwrap().sup_distance(&n).unwrap() < 1e-4);
        let res = solve_steady(&params, &plan, 1.0, &SteadyOptions::default()).unwrap();
        assert!(res.iterations <= 2, "{}", res.iterations);
        assert!(res.density.sup_distance(&n).unwrap() < 1e-4);
    }

    #[test]
    fn first_order_mean_shift() {
        // Ẑ − Z = α(F(Z) + …)/(1 + αI): the exact identity is
        // Ẑ − Z = α ∫(y − Z) a n / (1 + αI) for the tilted mean.
        let (params, plan) = setup(0.05);
        let field = MacroField::new(1.0, params.selection.clone()).unwrap();
        for z in [-3.0, 0.5, 4.0] {
            let n = Density::gaussian(*plan.grid(), z, 2.0).unwrap();
            let out = t_alpha(&n, &params, &plan).unwrap();
            let a = params.selection.sample(plan.grid());
            let i = plan.grid().integrate(&a.iter().zip(n.values()).map(|(a, v)| a * v).collect::<Vec<_>>());
            let predicted = params.alpha * field.f_eval(z).unwrap() / (1.0 + params.alpha * i);
            let err = (out.mean() - z - predicted).abs();
            assert!(err <= 3.0 * params.alpha.powi(2) * (1.0 + z.abs()), "{z}: {err}");
        }
    }

    #[test]
    fn converges_near_stable_root() {
        let (params, plan) = setup(0.1);
        let res = solve_steady(&params, &plan, 5.0, &SteadyOptions::default()).unwrap();
        assert!(res.residual < 1e-10);
        let z_bar = res.z_bar_macro.unwrap();
        assert!((res.mean() - z_bar).abs() <= 5.0 * params.alpha);
        assert!(res.w2_to_gaussian < 2.0 * params.alpha);
        let again = t_alpha(&res.density, &params, &plan).unwrap();
        let k = DEFAULT_K;
        assert!(again.quantiles(k).w2(&res.density.quantiles(k)) <= 2e-10);
        let ratios = res.residual_ratios();
        let worst = ratios[10..].iter().cloned().fold(0.0, f64::max);
        assert!(worst <= 0.95, "{worst}");
    }

    #[test]
    fn reports_non_convergence() {
        let (params, plan) = setup(0.1);
        let opts = SteadyOptions {
            max_iter: 3,
            ..Default::default()
        };
        match solve_steady(&params, &plan, 5.0, &opts) {
            Err(Error::NotConverged { iterations, history, .. }) => {
                assert_eq!(iterations, 3);
                assert_eq!(history.len(), 3);
            }
            other => panic!("{other:?}"),
        }
    }
}
