//! Dense real polynomials, used for analytic densities and selection on
//! atomic measures.

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    /// Ascending powers: `coeffs[k]` multiplies `x^k`.
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut p = Self { coeffs };
        p.trim();
        p
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    /// `intercept + slope·x`
    pub fn affine(intercept: f64, slope: f64) -> Self {
        Self::new(vec![intercept, slope])
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    fn trim(&mut self) {
        while self.coeffs.len() > 1 && *self.coeffs.last().unwrap() == 0.0 {
            self.coeffs.pop();
        }
        if self.coeffs.is_empty() {
            self.coeffs.push(0.0);
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    /// Antiderivative vanishing at zero.
    pub fn integral(&self) -> Polynomial {
        let mut c = Vec::with_capacity(self.coeffs.len() + 1);
        c.push(0.0);
        c.extend(self.coeffs.iter().enumerate().map(|(k, a)| a / (k + 1) as f64));
        Self::new(c)
    }

    pub fn integrate(&self, lo: f64, hi: f64) -> f64 {
        let p = self.integral();
        p.eval(hi) - p.eval(lo)
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut c = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                c[i + j] += a * b;
            }
        }
        Self::new(c)
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        Self::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let n = self.coeffs.len().max(other.coeffs.len());
        let get = |v: &[f64], k: usize| v.get(k).copied().unwrap_or(0.0);
        Self::new((0..n).map(|k| get(&self.coeffs, k) + get(&other.coeffs, k)).collect())
    }

    /// `x ↦ p(x − shift)`
    pub fn translate(&self, shift: f64) -> Polynomial {
        // Horner in the basis of powers of (x - shift).
        let lin = Polynomial::affine(-shift, 1.0);
        let mut acc = Polynomial::constant(0.0);
        for c in self.coeffs.iter().rev() {
            acc = acc.mul(&lin).add(&Polynomial::constant(*c));
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic() {
        let p = Polynomial::affine(1.0, 0.5);
        assert_eq!(p.eval(-1.0), 0.5);
        let q = p.mul(&p);
        assert_eq!(q.coeffs(), &[1.0, 1.0, 0.25]);
        assert!((p.integrate(-1.0, 1.0) - 2.0).abs() < 1e-15);
        let t = q.translate(0.3);
        for x in [-2.0, 0.0, 0.7, 3.1] {
            assert!((t.eval(x) - q.eval(x - 0.3)).abs() < 1e-12);
        }
        assert_eq!(Polynomial::new(vec![2.0, 0.0, 0.0]).degree(), 0);
    }
}
