use crate::error::{Error, Result};
use crate::kernels::SelectionFn;

/// Model coefficients and time-stepping controls.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub alpha: f64,
    pub sigma2: f64,
    pub selection: SelectionFn,
    pub dt: f64,
    pub t_final: f64,
}

impl ModelParams {
    pub const DEFAULT_DT: f64 = 0.05;

    /// Validates `α ≥ 0`, `σ² > 0`, `dt > 0`, `t_final ≥ 0` and the explicit
    /// Euler positivity bound `dt·(1 + α·sup a)² < 1`.
    ///
    /// `α = 0` (pure reproduction) is accepted as the degenerate case.
    pub fn new(
        alpha: f64,
        sigma2: f64,
        selection: SelectionFn,
        dt: f64,
        t_final: f64,
    ) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidParams(format!("alpha must be ≥ 0, got {alpha}")));
        }
        if !(sigma2 > 0.0) || !sigma2.is_finite() {
            return Err(Error::InvalidParams(format!("sigma2 must be > 0, got {sigma2}")));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::InvalidParams(format!("dt must be > 0, got {dt}")));
        }
        if !(t_final >= 0.0) || !t_final.is_finite() {
            return Err(Error::InvalidParams(format!("t_final must be ≥ 0, got {t_final}")));
        }
        let growth = 1.0 + alpha * selection.sup_estimate();
        if dt * growth * growth >= 1.0 {
            return Err(Error::InvalidParams(format!(
                "dt = {dt} violates the positivity bound dt·(1 + α sup a)² < 1 \
                 (need dt < {:.6})",
                1.0 / (growth * growth)
            )));
        }
        Ok(Self {
            alpha,
            sigma2,
            selection,
            dt,
            t_final,
        })
    }

    /// Equilibrium variance of the Gaussian profile, `2σ²`.
    pub fn v_le(&self) -> f64 {
        2.0 * self.sigma2
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}
