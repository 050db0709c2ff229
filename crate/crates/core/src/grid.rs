use crate::error::{Error, Result};

/// Uniform trait lattice `x_i = x_min + i·h`, `i = 0..n_points`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n_points: usize,
}

impl Grid {
    pub const MIN_POINTS: usize = 16;

    pub fn new(x_min: f64, x_max: f64, n_points: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_min >= x_max {
            return Err(Error::InvalidGrid(format!(
                "need finite x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if n_points < Self::MIN_POINTS {
            return Err(Error::InvalidGrid(format!(
                "n_points = {n_points} is below the minimum of {}",
                Self::MIN_POINTS
            )));
        }
        if !n_points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_points = {n_points} is not a power of two"
            )));
        }
        Ok(Self {
            x_min,
            x_max,
            n_points,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.n_points - 1) as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.spacing()
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        let h = self.spacing();
        (0..self.n_points).map(move |i| self.x_min + i as f64 * h)
    }

    /// Trapezoidal quadrature weights: `h` in the interior, `h/2` at both ends.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut w = vec![h; self.n_points];
        w[0] = 0.5 * h;
        w[self.n_points - 1] = 0.5 * h;
        w
    }

    /// Trapezoidal integral of nodal values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.n_points);
        let n = values.len();
        let inner: f64 = values[1..n - 1].iter().sum();
        self.spacing() * (inner + 0.5 * (values[0] + values[n - 1]))
    }

    /// Trapezoidal integral of `f(x_i)·values[i]`.
    pub fn integrate_with<F: Fn(f64) -> f64>(&self, values: &[f64], f: F) -> f64 {
        let h = self.spacing();
        let n = values.len();
        let mut acc = 0.0;
        for (i, v) in values.iter().enumerate() {
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            acc += w * f(self.x_min + i as f64 * h) * v;
        }
        h * acc
    }
}

impl Default for Grid {
    /// `[-20, 20]` with 1024 nodes.
    fn default() -> Self {
        Self {
            x_min: -20.0,
            x_max: 20.0,
            n_points: 1024,
        }
    }
}
