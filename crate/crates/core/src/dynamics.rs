//! Explicit Euler integration of the population equation and the
//! per-step diagnostics recorded along a trajectory.

use crate::density::Density;
use crate::error::{Error, Result};
use crate::kernels::{gaussian_unchecked, SelectionFn};
use crate::params::ModelParams;
use crate::reproduction::ReproPlan;
use crate::transport::{HasQuantiles, DEFAULT_K};

/// Largest total mass that clamping may remove in a single Euler step.
pub const MAX_CLAMPED_MASS: f64 = 1e-8;

/// `(1 + αa)n / (1 + αI_n)` together with `I_n = ∫ a n`.
pub fn tilted(n: &Density, alpha: f64, selection: &SelectionFn) -> Result<(Density, f64)> {
    let a = selection.sample(n.grid());
    let selection_integral = n.grid().integrate(
        &a.iter()
            .zip(n.values())
            .map(|(a, v)| a * v)
            .collect::<Vec<_>>(),
    );
    let values = a
        .iter()
        .zip(n.values())
        .map(|(a, v)| (1.0 + alpha * a) * v)
        .collect();
    Ok((Density::normalize(*n.grid(), values)?, selection_integral))
}

/// Right-hand side of the equation at `n`.
#[derive(Debug, Clone)]
pub struct Rhs {
    pub values: Vec<f64>,
    pub selection_integral: f64,
    pub mass_drift: f64,
}

/// `(1 + αI)²·[T(ñ) − n]` with `ñ = (1 + αa)n / (1 + αI)`.
///
/// By bilinearity of `T` this equals the birth term with both parents
/// tilted, computed with a single application of the operator.
pub fn rhs(n: &Density, params: &ModelParams, plan: &ReproPlan) -> Result<Rhs> {
    let (tilt, selection_integral) = tilted(n, params.alpha, &params.selection)?;
    let born = plan.apply_self(&tilt)?;
    let rate = (1.0 + params.alpha * selection_integral).powi(2);
    let values = born
        .density
        .values()
        .iter()
        .zip(n.values())
        .map(|(b, v)| rate * (b - v))
        .collect();
    Ok(Rhs {
        values,
        selection_integral,
        mass_drift: born.mass_drift(),
    })
}

#[derive(Debug, Clone)]
pub struct Step {
    pub density: Density,
    pub selection_integral: f64,
    pub mass_drift: f64,
}

/// `normalize(n + dt·rhs(n))`.
pub fn step_euler(n: &Density, params: &ModelParams, plan: &ReproPlan) -> Result<Step> {
    let r = rhs(n, params, plan)?;
    let mut clamped = 0.0;
    let values: Vec<f64> = n
        .values()
        .iter()
        .zip(&r.values)
        .map(|(v, d)| {
            let x = v + params.dt * d;
            if x < 0.0 {
                clamped -= x;
                0.0
            } else {
                x
            }
        })
        .collect();
    let clamped = clamped * n.grid().spacing();
    if clamped > MAX_CLAMPED_MASS {
        return Err(Error::StepUnstable { clamped });
    }
    Ok(Step {
        density: Density::normalize(*n.grid(), values)?,
        selection_integral: r.selection_integral,
        mass_drift: r.mass_drift,
    })
}

/// When to store full densities along a run.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Snapshots {
    None,
    /// `t = 1, 2, 4, 8, …` up to the horizon.
    #[default]
    Geometric,
    At(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    /// Record diagnostics every this many steps (and at both ends).
    pub record_every: usize,
    /// Stop once `W₂` between successive records falls below this.
    pub stop_tol: Option<f64>,
    pub snapshots: Snapshots,
    /// Keep the density at every recorded time.
    pub keep_states: bool,
    /// Also record `W₂(n(t), reference)`.
    pub reference: Option<Density>,
    pub quantile_k: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            record_every: 20,
            stop_tol: Some(1e-10),
            snapshots: Snapshots::default(),
            keep_states: false,
            reference: None,
            quantile_k: DEFAULT_K,
        }
    }
}

/// Diagnostics along a simulated trajectory. All series share `times`.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub alpha: f64,
    pub sigma2: f64,
    pub times: Vec<f64>,
    /// Mean trait `Z(t)`.
    pub z: Vec<f64>,
    /// `I(t) = ∫ a n(t)`.
    pub selection_integral: Vec<f64>,
    /// `∫ y (1 − α + α a(y)/I) n(t, y) dy`.
    pub tilted_mean: Vec<f64>,
    /// `W₂(n(t), Γ_{2σ²}(· − Z(t)))`.
    pub w2_to_gaussian: Vec<f64>,
    pub second_moment: Vec<f64>,
    /// Largest `|raw mass − 1|` of the operator since the previous record.
    pub mass_drift: Vec<f64>,
    pub w2_to_reference: Option<Vec<f64>>,
    pub snapshots: Vec<(f64, Density)>,
    pub states: Vec<Density>,
    pub final_state: Density,
    pub steps: usize,
    pub stopped_early: bool,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn terminal_z(&self) -> f64 {
        *self.z.last().expect("record has at least the initial row")
    }

    /// CSV with columns `t,Z,I,W2_to_gaussian,second_moment,mass_drift`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,Z,I,W2_to_gaussian,second_moment,mass_drift")?;
        for i in 0..self.times.len() {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                self.times[i],
                self.z[i],
                self.selection_integral[i],
                self.w2_to_gaussian[i],
                self.second_moment[i],
                self.mass_drift[i]
            )?;
        }
        Ok(())
    }
}

struct Row {
    z: f64,
    selection_integral: f64,
    tilted_mean: f64,
    w2_to_gaussian: f64,
    second_moment: f64,
}

fn diagnostics(n: &Density, params: &ModelParams, k: usize) -> Result<Row> {
    let z = n.mean();
    let a = params.selection.sample(n.grid());
    let grid = n.grid();
    let weighted: Vec<f64> = a.iter().zip(n.values()).map(|(a, v)| a * v).collect();
    let selection_integral = grid.integrate(&weighted);
    let tilted_mean = if selection_integral > 0.0 {
        let c = params.alpha / selection_integral;
        let vals: Vec<f64> = a
            .iter()
            .zip(n.values())
            .map(|(a, v)| (1.0 - params.alpha + c * a) * v)
            .collect();
        grid.integrate_with(&vals, |x| x)
    } else {
        z
    };
    let gaussian = Density::gaussian(*grid, z, params.v_le())?;
    Ok(Row {
        z,
        selection_integral,
        tilted_mean,
        w2_to_gaussian: n.quantiles(k).w2(&gaussian.quantiles(k)),
        second_moment: n.second_moment(),
    })
}

/// Run explicit Euler from `n0` up to `params.t_final`.
pub fn simulate(
    n0: &Density,
    params: &ModelParams,
    plan: &ReproPlan,
    opts: &SimOptions,
) -> Result<TrajectoryRecord> {
    if n0.grid() != plan.grid() {
        return Err(Error::GridMismatch);
    }
    if opts.record_every == 0 {
        return Err(Error::InvalidParams("record_every must be ≥ 1".into()));
    }
    let k = opts.quantile_k;
    let n_steps = params.n_steps();
    let snapshot_times: Vec<f64> = match &opts.snapshots {
        Snapshots::None => Vec::new(),
        Snapshots::Geometric => std::iter::successors(Some(1.0), |t| Some(t * 2.0))
            .take_while(|t| *t <= params.t_final + 0.5 * params.dt)
            .collect(),
        Snapshots::At(ts) => {
            let mut ts = ts.clone();
            ts.sort_by(f64::total_cmp);
            ts
        }
    };
    let reference_q = opts.reference.as_ref().map(|r| r.quantiles(k));

    let first = diagnostics(n0, params, k)?;
    let mut rec = TrajectoryRecord {
        alpha: params.alpha,
        sigma2: params.sigma2,
        times: vec![0.0],
        z: vec![first.z],
        selection_integral: vec![first.selection_integral],
        tilted_mean: vec![first.tilted_mean],
        w2_to_gaussian: vec![first.w2_to_gaussian],
        second_moment: vec![first.second_moment],
        mass_drift: vec![0.0],
        w2_to_reference: reference_q
            .as_ref()
            .map(|q| vec![n0.quantiles(k).w2(q)]),
        snapshots: Vec::new(),
        states: if opts.keep_states { vec![n0.clone()] } else { Vec::new() },
        final_state: n0.clone(),
        steps: 0,
        stopped_early: false,
    };
    let mut next_snapshot = snapshot_times.iter().peekable();
    while let Some(&&t) = next_snapshot.peek() {
        if t <= 0.5 * params.dt {
            rec.snapshots.push((0.0, n0.clone()));
            next_snapshot.next();
        } else {
            break;
        }
    }

    let mut n = n0.clone();
    let mut last_recorded_q = n0.quantiles(k);
    let mut drift: f64 = 0.0;
    for step in 1..=n_steps {
        let out = step_euler(&n, params, plan)?;
        n = out.density;
        drift = drift.max(out.mass_drift.abs());
        let t = step as f64 * params.dt;
        while let Some(&&ts) = next_snapshot.peek() {
            if t + 0.5 * params.dt > ts {
                rec.snapshots.push((t, n.clone()));
                next_snapshot.next();
            } else {
                break;
            }
        }
        if step % opts.record_every == 0 || step == n_steps {
            let row = diagnostics(&n, params, k)?;
            let q = n.quantiles(k);
            rec.times.push(t);
            rec.z.push(row.z);
            rec.selection_integral.push(row.selection_integral);
            rec.tilted_mean.push(row.tilted_mean);
            rec.w2_to_gaussian.push(row.w2_to_gaussian);
            rec.second_moment.push(row.second_moment);
            rec.mass_drift.push(drift);
            if let (Some(series), Some(rq)) = (rec.w2_to_reference.as_mut(), reference_q.as_ref()) {
                series.push(q.w2(rq));
            }
            if opts.keep_states {
                rec.states.push(n.clone());
            }
            drift = 0.0;
            rec.steps = step;
            let moved = q.w2(&last_recorded_q);
            last_recorded_q = q;
            if let Some(tol) = opts.stop_tol {
                if moved < tol && step < n_steps {
                    rec.stopped_early = true;
                    break;
                }
            }
        }
    }
    rec.final_state = n;
    Ok(rec)
}

/// `min_x n(x) / Γ_ν(Z̄ − x)` over all nodes where the Gaussian is
/// representable (nonzero in floating point).
pub fn check_lower_bound(n: &Density, nu: f64, z_bar: f64) -> Result<f64> {
    check_lower_bound_within(n, nu, z_bar, f64::INFINITY)
}

/// As [`check_lower_bound`], restricted to `|x − Z̄| ≤ radius`.
pub fn check_lower_bound_within(n: &Density, nu: f64, z_bar: f64, radius: f64) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::NonPositiveVariance(nu));
    }
    let mut worst = f64::INFINITY;
    for (x, v) in n.grid().nodes().zip(n.values()) {
        if (x - z_bar).abs() > radius {
            continue;
        }
        let g = gaussian_unchecked(z_bar - x, nu);
        if g > 0.0 {
            worst = worst.min(v / g);
        }
    }
    Ok(worst)
}

/// Result of the discrete exponential-tail test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailCheck {
    pub holds: bool,
    /// Largest `∂ₓn + n` on the right tail (resp. `n − ∂ₓn` on the left);
    /// negative means the criterion holds with room to spare.
    pub worst_margin: f64,
    /// Largest margin divided by `n` at the same node.
    pub worst_relative: f64,
    pub nodes_checked: usize,
}

/// Checks `∂ₓn(x) < −n(x)` for `x ≥ R₀` and `∂ₓn(x) > n(x)` for `x ≤ −R₀`,
/// with central differences inside the grid and one-sided at its ends.
pub fn check_tail_criterion(n: &Density, r0: f64) -> Result<TailCheck> {
    let grid = n.grid();
    if !(r0 > 0.0) || r0 >= grid.x_max() || -r0 <= grid.x_min() {
        return Err(Error::InvalidParams(format!(
            "R0 = {r0} must lie strictly inside the grid"
        )));
    }
    let v = n.values();
    let h = grid.spacing();
    let last = v.len() - 1;
    let deriv = |i: usize| -> f64 {
        if i == 0 {
            (v[1] - v[0]) / h
        } else if i == last {
            (v[last] - v[last - 1]) / h
        } else {
            (v[i + 1] - v[i - 1]) / (2.0 * h)
        }
    };
    let mut check = TailCheck {
        holds: true,
        worst_margin: f64::NEG_INFINITY,
        worst_relative: f64::NEG_INFINITY,
        nodes_checked: 0,
    };
    for (i, x) in grid.nodes().enumerate() {
        let margin = if x >= r0 {
            deriv(i) + v[i]
        } else if x <= -r0 {
            v[i] - deriv(i)
        } else {
            continue;
        };
        check.nodes_checked += 1;
        check.worst_margin = check.worst_margin.max(margin);
        let rel = if v[i] > 0.0 { margin / v[i] } else { f64::INFINITY };
        check.worst_relative = check.worst_relative.max(rel);
        if !(margin < 0.0) {
            check.holds = false;
        }
    }
    Ok(check)
}

/// Pairwise macroscopic discrepancies between two trajectories.
#[derive(Debug, Clone)]
pub struct MacroDiscrepancies {
    pub times: Vec<f64>,
    /// `|I_n − I_m|`
    pub selection_gap: Vec<f64>,
    /// `|Z_n − Z_m|`
    pub mean_gap: Vec<f64>,
    /// Recentered distance `w(n, m)`.
    pub recentered: Vec<f64>,
    /// `|(Z̃_n − Z̃_m) − (Z_n − Z_m)|`
    pub tilted_gap: Vec<f64>,
    /// `√α·w(n, m) + |Z_n − Z_m|`
    pub composite: Vec<f64>,
}

/// Requires both records to hold their states (`keep_states`) on the same
/// time lattice.
pub fn macro_discrepancies(
    a: &TrajectoryRecord,
    b: &TrajectoryRecord,
    k: usize,
) -> Result<MacroDiscrepancies> {
    if a.times.len() != b.times.len()
        || a.times.iter().zip(&b.times).any(|(s, t)| (s - t).abs() > 1e-9)
    {
        return Err(Error::Misaligned("time lattices differ".into()));
    }
    if a.states.len() != a.times.len() || b.states.len() != b.times.len() {
        return Err(Error::Misaligned(
            "both trajectories must keep their states at every record".into(),
        ));
    }
    if (a.alpha - b.alpha).abs() > 0.0 {
        return Err(Error::Misaligned("trajectories use different α".into()));
    }
    let sqrt_alpha = a.alpha.sqrt();
    let mut out = MacroDiscrepancies {
        times: a.times.clone(),
        selection_gap: Vec::with_capacity(a.len()),
        mean_gap: Vec::with_capacity(a.len()),
        recentered: Vec::with_capacity(a.len()),
        tilted_gap: Vec::with_capacity(a.len()),
        composite: Vec::with_capacity(a.len()),
    };
    for i in 0..a.len() {
        let dz = a.z[i] - b.z[i];
        let w = a.states[i].quantiles(k).w_recentered(&b.states[i].quantiles(k));
        out.selection_gap
            .push((a.selection_integral[i] - b.selection_integral[i]).abs());
        out.mean_gap.push(dz.abs());
        out.recentered.push(w);
        out.tilted_gap
            .push(((a.tilted_mean[i] - b.tilted_mean[i]) - dz).abs());
        out.composite.push(sqrt_alpha * w + dz.abs());
    }
    Ok(out)
}

/// Least-squares slope of `ln(values)` against `times`, over strictly
/// positive values.
pub fn fit_log_slope(times: &[f64], values: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(_, v)| **v > 0.0)
        .map(|(t, v)| (*t, v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let tbar = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let ybar = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|(t, y)| (t - tbar) * (y - ybar)).sum();
    let sxx: f64 = pts.iter().map(|(t, _)| (t - tbar) * (t - tbar)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
