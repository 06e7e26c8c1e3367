use nalgebra::{DMatrix, DVector};

use super::NormlikeInstance;
use crate::error::{Error, Result};
use crate::psd_linalg::{simultaneous_reduce, PsdMatrix};

/// The recession function
///
/// ```text
/// f(x) = (Σ x_i A'_i c'_i)^t (Σ x_i A'_i)^{-1} (Σ x_i A'_i c'_i)
/// ```
///
/// in the reduced blocks of the `A_i`, together with the axis slopes
/// `mu_i = c_i^t A_i c_i`.
#[derive(Debug, Clone)]
pub struct RecessionForm {
    r: usize,
    u: DMatrix<f64>,
    a_prime: Vec<DMatrix<f64>>,
    c_prime: Vec<DVector<f64>>,
    /// `A'_i c'_i`, cached.
    b_prime: Vec<DVector<f64>>,
    mu: Vec<f64>,
    source_a: Vec<PsdMatrix>,
    source_c: Vec<DVector<f64>>,
}

impl RecessionForm {
    /// Reduces `(A_i, c_i)` with [`simultaneous_reduce`]. With no matrices the
    /// form is the zero function on `R^0`.
    pub fn from_parts(g: usize, a: &[PsdMatrix], c: &[DVector<f64>]) -> Result<Self> {
        if a.len() != c.len() {
            return Err(Error::LengthMismatch {
                left: a.len(),
                right: c.len(),
            });
        }
        let mu = a
            .iter()
            .zip(c)
            .map(|(ai, ci)| ci.dot(&(ai.matrix() * ci)).max(0.0))
            .collect();
        if a.is_empty() {
            return Ok(Self {
                r: 0,
                u: DMatrix::identity(g, g),
                a_prime: Vec::new(),
                c_prime: Vec::new(),
                b_prime: Vec::new(),
                mu,
                source_a: Vec::new(),
                source_c: Vec::new(),
            });
        }
        let red = simultaneous_reduce(a)?;
        let r = red.r;
        let a_prime: Vec<DMatrix<f64>> = red.blocks.iter().map(|b| b.matrix().clone()).collect();
        let c_prime: Vec<DVector<f64>> = c
            .iter()
            .map(|ci| (red.u.transpose() * ci).rows(0, r).into_owned())
            .collect();
        let b_prime = a_prime.iter().zip(&c_prime).map(|(ap, cp)| ap * cp).collect();
        Ok(Self {
            r,
            u: red.u,
            a_prime,
            c_prime,
            b_prime,
            mu,
            source_a: a.to_vec(),
            source_c: c.to_vec(),
        })
    }

    pub fn rank(&self) -> usize {
        self.r
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn a_prime(&self) -> &[DMatrix<f64>] {
        &self.a_prime
    }

    pub fn c_prime(&self) -> &[DVector<f64>] {
        &self.c_prime
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn k(&self) -> usize {
        self.mu.len()
    }

    fn check_positive(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.k() {
            return Err(Error::DimensionMismatch {
                what: "point x",
                expected: self.k(),
                found: x.len(),
            });
        }
        match x.iter().position(|&v| !(v > 0.0)) {
            Some(index) => Err(Error::NonPositiveCoordinate { index, value: x[index] }),
            None => Ok(()),
        }
    }

    /// `(Σ x_i A'_i, Σ x_i A'_i c'_i)`.
    pub fn reduced_parts(&self, x: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
        let mut s = DMatrix::zeros(self.r, self.r);
        let mut v = DVector::zeros(self.r);
        for ((ap, bp), &xi) in self.a_prime.iter().zip(&self.b_prime).zip(x) {
            s += ap * xi;
            v += bp * xi;
        }
        (s, v)
    }

    /// `(Σ x_i A'_i)^{-1} (Σ x_i A'_i c'_i)`, the reduced centre of `f` at `x`.
    pub fn reduced_center(&self, x: &[f64]) -> Result<DVector<f64>> {
        self.check_positive(x)?;
        let (s, v) = self.reduced_parts(x);
        let chol = s.cholesky().ok_or(Error::NumericallySingular {
            what: "reduced sum of the A_i",
        })?;
        Ok(chol.solve(&v))
    }

    /// The centre lifted back to `R^g`: `u (y, 0)` with `y` the reduced centre.
    /// It solves `(Σ x_i A_i) c = Σ x_i A_i c_i` and depends only on the ray of `x`.
    pub fn center(&self, x: &[f64]) -> Result<DVector<f64>> {
        let y = self.reduced_center(x)?;
        Ok(self.u.columns(0, self.r) * y)
    }

    /// Evaluates `f(x)` for `x` with strictly positive coordinates.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if self.r == 0 {
            self.check_positive(x)?;
            return Ok(0.0);
        }
        let y = self.reduced_center(x)?;
        let (_, v) = self.reduced_parts(x);
        Ok(v.dot(&y).max(0.0))
    }

    /// Evaluates the continuous extension `f̄` at `x ≥ 0` by restricting to
    /// the face spanned by the positive coordinates.
    pub fn eval_extended(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.k() {
            return Err(Error::DimensionMismatch {
                what: "point x",
                expected: self.k(),
                found: x.len(),
            });
        }
        if let Some(index) = x.iter().position(|&v| !(v >= 0.0)) {
            return Err(Error::NegativeCoordinate { index, value: x[index] });
        }
        let support: Vec<usize> = (0..x.len()).filter(|&i| x[i] > 0.0).collect();
        if support.is_empty() {
            return Ok(0.0);
        }
        if support.len() == x.len() {
            return self.eval(x);
        }
        if let [i] = support[..] {
            return Ok(x[i] * self.mu[i]);
        }
        self.face(&support)?
            .eval(&support.iter().map(|&i| x[i]).collect::<Vec<_>>())
    }

    /// Recession form of the sub-collection `(A_i, c_i)` for `i` in `support`.
    pub fn face(&self, support: &[usize]) -> Result<RecessionForm> {
        let g = self.u.nrows();
        let a: Vec<PsdMatrix> = support.iter().map(|&i| self.source_a[i].clone()).collect();
        let c: Vec<DVector<f64>> = support.iter().map(|&i| self.source_c[i].clone()).collect();
        RecessionForm::from_parts(g, &a, &c)
    }
}

/// `f̄(x)` of the instance at `x ≥ 0`; zero at the origin.
pub fn extended_recession(inst: &NormlikeInstance, x: &[f64]) -> Result<f64> {
    inst.recession().eval_extended(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn scalar_example_form() {
        let inst = NormlikeInstance::scalar_example();
        let f = inst.recession();
        assert_eq!(f.rank(), 1);
        assert_eq!(f.mu(), &[1.0, 4.0]);
        assert_relative_eq!(f.a_prime()[0][(0, 0)], 1.0, epsilon = 1e-15);
        assert_relative_eq!(f.c_prime()[1][0].abs(), 2.0, epsilon = 1e-15);
        assert_relative_eq!(f.eval(&[1.0, 1.0]).unwrap(), 4.5, max_relative = 1e-14);
        assert_relative_eq!(f.eval(&[2.0, 2.0]).unwrap(), 9.0, max_relative = 1e-14);
    }

    #[test]
    fn kernel_component_ignored() {
        let a = PsdMatrix::from_diagonal(&[2.0, 0.0]).unwrap();
        let c = DVector::from_vec(vec![3.0, 5.0]);
        let f = RecessionForm::from_parts(2, &[a], &[c]).unwrap();
        assert_relative_eq!(f.mu()[0], 18.0, max_relative = 1e-15);
        assert_relative_eq!(f.eval(&[2.0]).unwrap(), 36.0, max_relative = 1e-14);
    }

    #[test]
    fn linear_in_one_variable() {
        let f = RecessionForm::from_parts(1, &[PsdMatrix::identity(1)], &[DVector::from_element(1, 3.0)]).unwrap();
        assert_relative_eq!(f.eval(&[2.0]).unwrap(), 18.0, max_relative = 1e-14);
    }

    #[test]
    fn zero_vectors_give_zero() {
        let a = vec![PsdMatrix::identity(2), PsdMatrix::from_diagonal(&[1.0, 0.0]).unwrap()];
        let c = vec![DVector::zeros(2), DVector::zeros(2)];
        let f = RecessionForm::from_parts(2, &a, &c).unwrap();
        assert_eq!(f.mu(), &[0.0, 0.0]);
        assert_eq!(f.eval(&[0.3, 7.0]).unwrap(), 0.0);
    }

    #[test]
    fn extended_on_faces() {
        let inst = NormlikeInstance::scalar_example();
        assert_relative_eq!(
            extended_recession(&inst, &[1.0, 0.0]).unwrap(),
            1.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            extended_recession(&inst, &[0.0, 1.0]).unwrap(),
            4.0,
            max_relative = 1e-14
        );
        assert_eq!(extended_recession(&inst, &[0.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(
            extended_recession(&inst, &[-1.0, 1.0]).unwrap_err(),
            Error::NegativeCoordinate { index: 0, .. }
        ));
    }

    #[test]
    fn eval_requires_positive() {
        let inst = NormlikeInstance::scalar_example();
        assert!(matches!(
            inst.recession().eval(&[0.0, 1.0]).unwrap_err(),
            Error::NonPositiveCoordinate { index: 0, .. }
        ));
    }
}
