//! The infinitesimal-model reproduction operator
//!
//! ```text
//! T(n, m)(x) = ∫∫ Γ_{σ²}(x − (y + y')/2) n(y) m(y') dy dy'
//!            = 2 (Γ_{4σ²} ∗ n ∗ m)(2x).
//! ```
//!
//! All three evaluation routes compute the same discrete double sum with
//! trapezoidal weights,
//!
//! ```text
//! T_l = Σ_{i,j} w_i n_i · w_j m_j · Γ_{σ²}(x_l − (y_i + y_j)/2),
//! ```
//!
//! and differ only in how it is summed:
//!
//! - [`Backend::Spectral`]: one circular convolution of length `4N` via FFT.
//!   Round-off is absolute, about `1e-16` times the peak value.
//! - [`Backend::Direct`]: two sequential direct convolutions, `O(N²)`.
//!   Every term is nonnegative, so tails keep full relative precision.
//! - [`reproduce_oracle`]: the literal `O(N³)` triple loop.
//!
//! Because `2x_l − y_i − y_j = (2l − i − j)h`, the evaluation at `2x` lands
//! exactly on lattice offsets and no interpolation is needed.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::density::Density;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::kernels::gaussian_unchecked;
use crate::transport::{HasQuantiles, DEFAULT_K};

/// How the discrete double convolution is summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    #[default]
    Spectral,
    Direct,
}

/// Output of one application of `T`, before and after renormalization.
#[derive(Debug, Clone)]
pub struct Reproduced {
    pub density: Density,
    /// Trapezoidal mass of the raw double sum (1 up to truncation error).
    pub raw_mass: f64,
}

impl Reproduced {
    pub fn mass_drift(&self) -> f64 {
        self.raw_mass - 1.0
    }
}

/// Precomputed kernel and transforms for a fixed grid and `σ²`.
/// Immutable and shareable across threads.
pub struct ReproPlan {
    grid: Grid,
    sigma2: f64,
    backend: Backend,
    extended_len: usize,
    weights: Vec<f64>,
    /// `2Γ_{4σ²}(k h)` for `k = −(2N−2) ..= 2N−2`, stored at `k + 2N − 2`.
    kernel: Vec<f64>,
    kernel_spectrum: Vec<Complex<f64>>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for ReproPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ReproPlan")
            .field("grid", &self.grid)
            .field("sigma2", &self.sigma2)
            .field("backend", &self.backend)
            .field("extended_len", &self.extended_len)
            .finish()
    }
}

impl ReproPlan {
    pub fn new(grid: Grid, sigma2: f64) -> Result<Self> {
        Self::with_backend(grid, sigma2, Backend::Spectral)
    }

    pub fn with_backend(grid: Grid, sigma2: f64, backend: Backend) -> Result<Self> {
        if !(sigma2 > 0.0) {
            return Err(Error::NonPositiveVariance(sigma2));
        }
        let n = grid.n_points();
        let h = grid.spacing();
        let half = 2 * n - 2;
        let kernel: Vec<f64> = (0..=2 * half)
            .map(|k| 2.0 * gaussian_unchecked((k as f64 - half as f64) * h, 4.0 * sigma2))
            .collect();
        // Linear support of n ∗ m ∗ kernel is 6N − 5 samples; the wanted
        // window [2N − 2, 4N − 4] stays clear of aliasing for any length ≥ 4N − 3.
        let extended_len = (4 * n - 3).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(extended_len);
        let ifft = planner.plan_fft_inverse(extended_len);
        let kernel_spectrum = match backend {
            Backend::Spectral => {
                let mut buf = vec![Complex::new(0.0, 0.0); extended_len];
                for (slot, k) in buf.iter_mut().zip(&kernel) {
                    slot.re = *k;
                }
                fft.process(&mut buf);
                buf
            }
            Backend::Direct => Vec::new(),
        };
        Ok(Self {
            grid,
            sigma2,
            backend,
            extended_len,
            weights: grid.trapezoid_weights(),
            kernel,
            kernel_spectrum,
            fft,
            ifft,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn extended_len(&self) -> usize {
        self.extended_len
    }

    fn check(&self, d: &Density) -> Result<()> {
        if *d.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `T(n, m)`, renormalized, with the raw mass kept for diagnostics.
    pub fn apply(&self, n: &Density, m: &Density) -> Result<Reproduced> {
        self.check(n)?;
        self.check(m)?;
        let raw = match self.backend {
            Backend::Spectral => self.sum_spectral(n, Some(m)),
            Backend::Direct => self.sum_direct(n.values(), m.values()),
        };
        self.finish(raw)
    }

    /// `T(n) = T(n, n)`.
    pub fn apply_self(&self, n: &Density) -> Result<Reproduced> {
        self.check(n)?;
        let raw = match self.backend {
            Backend::Spectral => self.sum_spectral(n, None),
            Backend::Direct => self.sum_direct(n.values(), n.values()),
        };
        self.finish(raw)
    }

    fn finish(&self, raw: Vec<f64>) -> Result<Reproduced> {
        let raw_mass = self.grid.integrate(&raw);
        let density = Density::normalize(self.grid, raw)?;
        Ok(Reproduced { density, raw_mass })
    }

    fn weighted(&self, values: &[f64]) -> Vec<Complex<f64>> {
        let mut buf = vec![Complex::new(0.0, 0.0); self.extended_len];
        for ((slot, v), w) in buf.iter_mut().zip(values).zip(&self.weights) {
            slot.re = v * w;
        }
        self.fft.process(&mut buf);
        buf
    }

    fn sum_spectral(&self, n: &Density, m: Option<&Density>) -> Vec<f64> {
        let mut a = self.weighted(n.values());
        match m {
            Some(m) => {
                let b = self.weighted(m.values());
                for ((x, y), k) in a.iter_mut().zip(&b).zip(&self.kernel_spectrum) {
                    *x = *x * *y * *k;
                }
            }
            None => {
                for (x, k) in a.iter_mut().zip(&self.kernel_spectrum) {
                    *x = *x * *x * *k;
                }
            }
        }
        self.ifft.process(&mut a);
        let npts = self.grid.n_points();
        let scale = 1.0 / self.extended_len as f64;
        (0..npts)
            .map(|l| a[2 * l + 2 * npts - 2].re * scale)
            .collect()
    }

    fn sum_direct(&self, n: &[f64], m: &[f64]) -> Vec<f64> {
        let npts = n.len();
        let a: Vec<f64> = n.iter().zip(&self.weights).map(|(v, w)| v * w).collect();
        let b: Vec<f64> = m.iter().zip(&self.weights).map(|(v, w)| v * w).collect();
        // c_s = Σ_i a_i b_{s−i}
        let mut c = vec![0.0; 2 * npts - 1];
        for (i, ai) in a.iter().enumerate() {
            if *ai == 0.0 {
                continue;
            }
            for (cs, bj) in c[i..i + npts].iter_mut().zip(&b) {
                *cs += ai * bj;
            }
        }
        // T_l = Σ_s c_s K(2l − s)
        let half = 2 * npts - 2;
        (0..npts)
            .map(|l| {
                let base = 2 * l + half;
                c.iter()
                    .enumerate()
                    .map(|(s, cs)| cs * self.kernel[base - s])
                    .sum()
            })
            .collect()
    }
}

/// `T(n, m)` by the spectral plan.
pub fn reproduce_fast(plan: &ReproPlan, n: &Density, m: &Density) -> Result<Reproduced> {
    plan.apply(n, m)
}

/// Largest grid accepted by [`reproduce_oracle`].
pub const ORACLE_LIMIT: usize = 512;

/// Literal trapezoidal double integral of `T(n, m)` at every node, `O(N³)`.
/// Exactly symmetric in `(n, m)`.
pub fn reproduce_oracle(grid: &Grid, sigma2: f64, n: &Density, m: &Density) -> Result<Density> {
    if grid.n_points() > ORACLE_LIMIT {
        return Err(Error::TooLarge {
            n_points: grid.n_points(),
            limit: ORACLE_LIMIT,
        });
    }
    if !(sigma2 > 0.0) {
        return Err(Error::NonPositiveVariance(sigma2));
    }
    if n.grid() != grid || m.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let w = grid.trapezoid_weights();
    let npts = grid.n_points();
    let (nv, mv) = (n.values(), m.values());
    let out: Vec<f64> = (0..npts)
        .map(|l| {
            let x = grid.x(l);
            let mut acc = 0.0;
            for i in 0..npts {
                for j in i..npts {
                    let mid = 0.5 * (grid.x(i) + grid.x(j));
                    let pair = if i == j {
                        nv[i] * mv[i]
                    } else {
                        nv[i] * mv[j] + nv[j] * mv[i]
                    };
                    acc += w[i] * w[j] * pair * gaussian_unchecked(x - mid, sigma2);
                }
            }
            acc
        })
        .collect();
    Density::normalize(*grid, out)
}

/// `W₂(T(n), T(m)) / W₂(n, m)` for a mean-matched pair.
pub fn contraction_check(plan: &ReproPlan, n: &Density, m: &Density) -> Result<f64> {
    contraction_check_k(plan, n, m, DEFAULT_K)
}

pub fn contraction_check_k(plan: &ReproPlan, n: &Density, m: &Density, k: usize) -> Result<f64> {
    let (zn, zm) = (n.mean(), m.mean());
    if (zn - zm).abs() > 1e-8 {
        return Err(Error::MeansDiffer(zn, zm));
    }
    let before = n.quantiles(k).w2(&m.quantiles(k));
    if before < 1e-10 {
        return Err(Error::DegeneratePair(before));
    }
    let tn = plan.apply_self(n)?.density;
    let tm = plan.apply_self(m)?.density;
    Ok(tn.quantiles(k).w2(&tm.quantiles(k)) / before)
}
