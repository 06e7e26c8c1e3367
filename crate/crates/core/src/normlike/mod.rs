//! Normlike functions
//!
//! ```text
//! phi(x, lambda) = (Σ x_i A_i c_i + a(lambda))^t (Σ x_i A_i + B(lambda))^{-1} (Σ x_i A_i c_i + a(lambda))
//! ```
//!
//! with `A_i` positive semidefinite of rank at least one, their recession
//! functions, and the asymptotic estimates relating the two.
//!
//! The parameter domain is a finite list of [`ParamSample`]s; every statement
//! about `lambda` is checked sample by sample.

mod asymptotics;
mod estimates;
mod recession;

pub use asymptotics::{AsymptoticsReport, ExponentFit, InverseExpansion, RayTrace};
pub use estimates::{neumann_series, FlagForm, MainEstimate, NeumannQ, ProbeSpec};
pub use recession::{extended_recession, RecessionForm};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::psd_linalg::{symmetrize, PsdMatrix, SYMMETRY_TOL};

/// One point of the parameter domain with its data `a(lambda)`, `B(lambda)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSample {
    pub lambda: Vec<f64>,
    pub a: DVector<f64>,
    pub b: DMatrix<f64>,
}

impl ParamSample {
    pub fn new(lambda: Vec<f64>, a: DVector<f64>, b: DMatrix<f64>) -> Self {
        Self { lambda, a, b }
    }

    pub fn constant(a: DVector<f64>, b: DMatrix<f64>) -> Self {
        Self::new(Vec::new(), a, b)
    }
}

/// The data `((A_i), (c_i), a, B)` of a normlike function together with the
/// threshold `kappa` and the sampled parameter domain.
#[derive(Debug, Clone)]
pub struct NormlikeInstance {
    g: usize,
    kappa: f64,
    a: Vec<PsdMatrix>,
    c: Vec<DVector<f64>>,
    samples: Vec<ParamSample>,
    recession: RecessionForm,
}

/// Outcome of [`NormlikeInstance::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub probes: usize,
    /// Least eigenvalue of `P(x, lambda)` over all probes; `None` when `g = 0`.
    pub least_eigenvalue: Option<f64>,
    pub witness_x: Vec<f64>,
    pub witness_lambda: usize,
}

impl NormlikeInstance {
    pub fn new(
        g: usize,
        kappa: f64,
        a: Vec<PsdMatrix>,
        c: Vec<DVector<f64>>,
        samples: Vec<ParamSample>,
    ) -> Result<Self> {
        if a.len() != c.len() {
            return Err(Error::LengthMismatch {
                left: a.len(),
                right: c.len(),
            });
        }
        if !(kappa >= 0.0) || !kappa.is_finite() {
            return Err(Error::InvalidModel(format!(
                "kappa must be finite and >= 0, got {kappa}"
            )));
        }
        for (i, ai) in a.iter().enumerate() {
            if ai.dim() != g {
                return Err(Error::DimensionMismatch {
                    what: "matrix A_i",
                    expected: g,
                    found: ai.dim(),
                });
            }
            if ai.rank() == 0 {
                return Err(Error::RankDeficient { index: i });
            }
        }
        for ci in &c {
            if ci.len() != g {
                return Err(Error::DimensionMismatch {
                    what: "vector c_i",
                    expected: g,
                    found: ci.len(),
                });
            }
        }
        if samples.is_empty() {
            return Err(Error::InvalidModel("parameter domain is empty".into()));
        }
        let mut clean = Vec::with_capacity(samples.len());
        for s in samples {
            if s.a.len() != g {
                return Err(Error::DimensionMismatch {
                    what: "vector a(lambda)",
                    expected: g,
                    found: s.a.len(),
                });
            }
            if s.b.nrows() != g || s.b.ncols() != g {
                return Err(Error::DimensionMismatch {
                    what: "matrix B(lambda)",
                    expected: g,
                    found: s.b.nrows().max(s.b.ncols()),
                });
            }
            let defect = (&s.b - s.b.transpose()).amax() / s.b.amax().max(1.0);
            if defect > SYMMETRY_TOL {
                return Err(Error::NotSymmetric { defect });
            }
            let b = symmetrize(&s.b);
            clean.push(ParamSample { b, ..s });
        }
        let recession = RecessionForm::from_parts(g, &a, &c)?;
        Ok(Self {
            g,
            kappa,
            a,
            c,
            samples: clean,
            recession,
        })
    }

    /// Instance with constant `a`, `B` (a one-point parameter domain).
    pub fn constant(
        kappa: f64,
        a: Vec<PsdMatrix>,
        c: Vec<DVector<f64>>,
        a_vec: DVector<f64>,
        b: DMatrix<f64>,
    ) -> Result<Self> {
        let g = a_vec.len();
        Self::new(g, kappa, a, c, vec![ParamSample::constant(a_vec, b)])
    }

    /// The data of the two-variable example with `g = 1`, `A_1 = A_2 = 1`,
    /// `c = (1, 2)`, `B = 0`, `a = 1`, `kappa = 1`.
    pub fn scalar_example() -> Self {
        let one = || PsdMatrix::identity(1);
        Self::constant(
            1.0,
            vec![one(), one()],
            vec![DVector::from_element(1, 1.0), DVector::from_element(1, 2.0)],
            DVector::from_element(1, 1.0),
            DMatrix::zeros(1, 1),
        )
        .expect("static data is valid")
    }

    pub fn k(&self) -> usize {
        self.a.len()
    }

    pub fn g(&self) -> usize {
        self.g
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn matrices(&self) -> &[PsdMatrix] {
        &self.a
    }

    pub fn vectors(&self) -> &[DVector<f64>] {
        &self.c
    }

    pub fn samples(&self) -> &[ParamSample] {
        &self.samples
    }

    pub fn sample(&self, lambda: usize) -> Result<&ParamSample> {
        self.samples.get(lambda).ok_or(Error::UnknownSample {
            index: lambda,
            count: self.samples.len(),
        })
    }

    /// The recession function `f`, which does not depend on the parameter.
    pub fn recession(&self) -> &RecessionForm {
        &self.recession
    }

    fn check_x(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.k() {
            return Err(Error::DimensionMismatch {
                what: "point x",
                expected: self.k(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// `Σ x_i A_i`.
    pub fn weighted_sum(&self, x: &[f64]) -> DMatrix<f64> {
        self.a
            .iter()
            .zip(x)
            .fold(DMatrix::zeros(self.g, self.g), |acc, (ai, &xi)| acc + ai.matrix() * xi)
    }

    /// `Σ x_i A_i c_i`.
    pub fn weighted_image(&self, x: &[f64]) -> DVector<f64> {
        self.a
            .iter()
            .zip(&self.c)
            .zip(x)
            .fold(DVector::zeros(self.g), |acc, ((ai, ci), &xi)| {
                acc + ai.matrix() * ci * xi
            })
    }

    /// `P(x, lambda) = Σ x_i A_i + B(lambda)`.
    pub fn p_matrix(&self, x: &[f64], lambda: usize) -> Result<DMatrix<f64>> {
        self.check_x(x)?;
        Ok(self.weighted_sum(x) + &self.sample(lambda)?.b)
    }

    pub(crate) fn positivity_error(&self, x: &[f64], lambda: usize) -> Error {
        let eigenvalue = self
            .p_matrix(x, lambda)
            .map(|p| least_eigenvalue(&p))
            .unwrap_or(f64::NAN);
        Error::PositivityViolation {
            x: x.to_vec(),
            lambda,
            eigenvalue,
        }
    }

    /// Evaluates `phi(x, lambda)`.
    ///
    /// The point only has to make `P(x, lambda)` positive definite; `kappa`
    /// bounds the region where that is guaranteed but is not enforced here.
    pub fn eval_phi(&self, x: &[f64], lambda: usize) -> Result<f64> {
        let p = self.p_matrix(x, lambda)?;
        let v = self.weighted_image(x) + &self.sample(lambda)?.a;
        if self.g == 0 {
            return Ok(0.0);
        }
        let chol = p.cholesky().ok_or_else(|| self.positivity_error(x, lambda))?;
        Ok(v.dot(&chol.solve(&v)))
    }

    /// Checks positivity of `P` on a deterministic probe set: the point just
    /// above `kappa` in every coordinate, the axis corners and simplex centre
    /// at scale `s`, and the diagonal ray at `s`, for `s` in
    /// `{kappa+1, 10(kappa+1), 100(kappa+1)}`.
    pub fn validate(&self) -> Result<Diagnostics> {
        let probes = self.probe_points();
        if self.g == 0 {
            return Ok(Diagnostics {
                probes: probes.len() * self.samples.len(),
                least_eigenvalue: None,
                witness_x: Vec::new(),
                witness_lambda: 0,
            });
        }
        let mut best = (f64::INFINITY, Vec::new(), 0);
        for lambda in 0..self.samples.len() {
            for x in &probes {
                let l = least_eigenvalue(&self.p_matrix(x, lambda)?);
                if l < best.0 {
                    best = (l, x.clone(), lambda);
                }
            }
        }
        let (least, witness_x, witness_lambda) = best;
        if !(least > 0.0) {
            return Err(Error::PositivityViolation {
                x: witness_x,
                lambda: witness_lambda,
                eigenvalue: least,
            });
        }
        Ok(Diagnostics {
            probes: probes.len() * self.samples.len(),
            least_eigenvalue: Some(least),
            witness_x,
            witness_lambda,
        })
    }

    fn probe_points(&self) -> Vec<Vec<f64>> {
        let k = self.k();
        let base = self.kappa + 1.0;
        let floor = self.kappa + 1e-3 * base;
        let mut out = vec![vec![floor; k]];
        for s in [base, 10.0 * base, 100.0 * base] {
            out.push(vec![s; k]);
            if k > 1 {
                out.push(vec![floor + s / k as f64; k]);
            }
            for i in 0..k {
                let mut x = vec![floor; k];
                x[i] = s;
                out.push(x);
            }
        }
        out
    }
}

pub fn least_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    symmetrize(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar_k1(b: f64, a: f64, c: f64) -> NormlikeInstance {
        NormlikeInstance::constant(
            0.0,
            vec![PsdMatrix::identity(1)],
            vec![DVector::from_element(1, c)],
            DVector::from_element(1, a),
            DMatrix::from_element(1, 1, b),
        )
        .unwrap()
    }

    #[test]
    fn scalar_example_validates() {
        let inst = NormlikeInstance::scalar_example();
        let d = inst.validate().unwrap();
        // P = x_1 + x_2 and every probe has both coordinates above kappa = 1.
        assert!(d.least_eigenvalue.unwrap() > 2.0);
    }

    #[test]
    fn empty_instance_is_valid() {
        let inst = NormlikeInstance::constant(0.0, vec![], vec![], DVector::zeros(0), DMatrix::zeros(0, 0)).unwrap();
        assert_eq!(inst.k(), 0);
        assert_eq!(inst.validate().unwrap().least_eigenvalue, None);
        assert_eq!(inst.eval_phi(&[], 0).unwrap(), 0.0);
    }

    #[test]
    fn negative_b_fails_positivity() {
        let inst = scalar_k1(-1.0, 0.0, 1.0);
        match inst.validate().unwrap_err() {
            Error::PositivityViolation { x, eigenvalue, .. } => {
                assert!(x[0] < 1.0);
                assert!(eigenvalue < 0.0);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn eval_examples() {
        let inst = NormlikeInstance::scalar_example();
        assert_relative_eq!(inst.eval_phi(&[1.0, 1.0], 0).unwrap(), 8.0, max_relative = 1e-14);
        assert_relative_eq!(
            scalar_k1(2.0, 0.0, 1.0).eval_phi(&[2.0], 0).unwrap(),
            1.0,
            max_relative = 1e-14
        );
        assert_eq!(scalar_k1(2.0, 0.0, 0.0).eval_phi(&[5.0], 0).unwrap(), 0.0);
    }

    #[test]
    fn eval_outside_positivity_errors() {
        let inst = scalar_k1(-1.0, 0.0, 1.0);
        assert!(matches!(
            inst.eval_phi(&[0.5], 0).unwrap_err(),
            Error::PositivityViolation { .. }
        ));
    }

    #[test]
    fn rejects_rank_zero_matrix() {
        let err = NormlikeInstance::constant(
            0.0,
            vec![PsdMatrix::zeros(1)],
            vec![DVector::zeros(1)],
            DVector::zeros(1),
            DMatrix::identity(1, 1),
        )
        .unwrap_err();
        assert_eq!(err, Error::RankDeficient { index: 0 });
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let inst = NormlikeInstance::scalar_example();
        assert!(matches!(
            inst.eval_phi(&[1.0], 0).unwrap_err(),
            Error::DimensionMismatch { .. }
        ));
        assert!(matches!(
            inst.eval_phi(&[1.0, 1.0], 3).unwrap_err(),
            Error::UnknownSample { .. }
        ));
    }
}
