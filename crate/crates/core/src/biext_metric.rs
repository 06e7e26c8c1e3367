//! Explicit metrics on the Poincaré bundle and on its pullbacks along
//! degenerating period maps.
//!
//! Period matrices are complex `g x g` matrices `Omega` with `Omega^t Delta`
//! symmetric and `Delta Im(Omega)` positive definite. The metric exponents
//! are quadratic forms in imaginary parts; [`PeriodModel`] realizes the
//! nilpotent-orbit shape of a period map near a normal crossings boundary and
//! turns `-log ||s||` into normlike data.

use std::f64::consts::PI;

use nalgebra::{Cholesky, Complex, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::normlike::{NormlikeInstance, ParamSample};
use crate::psd_linalg::{symmetrize, PsdMatrix};

/// Tolerance for the symmetry of `Omega^t Delta` and for integrality checks.
pub const RIEMANN_TOL: f64 = 1e-10;
/// Largest total degree accepted in polynomial models of `psi` and `alpha`.
pub const MAX_DEGREE: u32 = 4;

pub type CMatrix = DMatrix<Complex<f64>>;
pub type CVector = DVector<Complex<f64>>;

fn im_part(v: &CVector) -> DVector<f64> {
    v.map(|c| c.im)
}

fn check_len(found: usize, expected: usize, what: &'static str) -> Result<()> {
    if found != expected {
        return Err(Error::DimensionMismatch { what, expected, found });
    }
    Ok(())
}

/// `2 pi y^t M^{-1} y` for a factored positive definite `M`.
fn exponent(chol: &Cholesky<f64, Dyn>, y: &DVector<f64>) -> f64 {
    2.0 * PI * y.dot(&chol.solve(y))
}

fn least_eigenvalue(m: &DMatrix<f64>) -> f64 {
    symmetrize(m).symmetric_eigenvalues().min()
}

/// Elementary divisors `delta_1, ..., delta_g` of a polarization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolarizationType {
    delta: Vec<u64>,
}

impl PolarizationType {
    pub fn new(delta: Vec<u64>) -> Result<Self> {
        if delta.is_empty() {
            return Err(Error::InvalidPolarization("empty type".into()));
        }
        if let Some(i) = delta.iter().position(|&d| d == 0) {
            return Err(Error::InvalidPolarization(format!("entry {i} is zero")));
        }
        Ok(Self { delta })
    }

    /// The principal polarization of dimension `g`.
    pub fn principal(g: usize) -> Self {
        Self { delta: vec![1; g] }
    }

    pub fn g(&self) -> usize {
        self.delta.len()
    }

    pub fn delta(&self) -> &[u64] {
        &self.delta
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_iterator(self.g(), self.delta.iter().map(|&d| d as f64)))
    }
}

/// A period matrix satisfying the Riemann relations for a polarization.
#[derive(Debug, Clone)]
pub struct PeriodPoint {
    omega: CMatrix,
    delta: DMatrix<f64>,
    im: DMatrix<f64>,
    /// Factor of `Delta Im(Omega)`.
    delta_im: Cholesky<f64, Dyn>,
    im_positive: bool,
}

impl PeriodPoint {
    pub fn omega(&self) -> &CMatrix {
        &self.omega
    }

    pub fn im_omega(&self) -> &DMatrix<f64> {
        &self.im
    }

    pub fn im_positive(&self) -> bool {
        self.im_positive
    }

    pub fn g(&self) -> usize {
        self.omega.nrows()
    }

    /// `Q(v) = 2 pi Im(v)^t Delta Im(Omega)^{-1} Im(v)`; `Delta Im(Omega)^{-1}`
    /// equals `Delta (Delta Im Omega)^{-1} Delta`, which is what is evaluated.
    pub fn quadratic(&self, v: &CVector) -> Result<f64> {
        check_len(v.len(), self.g(), "vector in C^g")?;
        Ok(exponent(&self.delta_im, &(&self.delta * im_part(v))))
    }
}

/// Checks `Omega^t Delta = Delta Omega` and positivity of `Delta Im(Omega)`
/// (equivalently of `Im(Omega)^t Delta`).
pub fn check_riemann(pol: &PolarizationType, omega: &CMatrix) -> Result<PeriodPoint> {
    let g = pol.g();
    check_len(omega.nrows(), g, "period matrix rows")?;
    check_len(omega.ncols(), g, "period matrix columns")?;
    let delta = pol.matrix();
    let dc = delta.map(|d| Complex::new(d, 0.0));
    let lhs = omega.transpose() * &dc;
    let rhs = &dc * omega;
    let scale = omega.iter().map(|c| c.norm()).fold(1.0, f64::max) * delta.amax();
    let defect = (lhs - rhs).iter().map(|c| c.norm()).fold(0.0, f64::max) / scale;
    if defect > RIEMANN_TOL {
        return Err(Error::NotSymmetricUnderDelta { defect });
    }
    let im = omega.map(|c| c.im);
    let delta_im = &delta * &im;
    let transposed = im.transpose() * &delta;
    let min_eigenvalue = least_eigenvalue(&delta_im).min(least_eigenvalue(&transposed));
    let chol = symmetrize(&delta_im).cholesky();
    match chol {
        Some(chol) if min_eigenvalue > 0.0 => Ok(PeriodPoint {
            omega: omega.clone(),
            delta,
            im,
            delta_im: chol,
            im_positive: true,
        }),
        _ => Err(Error::ImaginaryPartNotPositive { min_eigenvalue }),
    }
}

/// `||(z, w, s)|| = |s| exp(2 pi Im(w) Im(Omega)^{-1} Im(z))` on the
/// Poincaré bundle of the torus.
pub fn torus_norm(pp: &PeriodPoint, z: &CVector, w: &CVector, s: Complex<f64>) -> Result<f64> {
    check_len(z.len(), pp.g(), "vector z")?;
    check_len(w.len(), pp.g(), "vector w")?;
    if s.norm() == 0.0 {
        return Ok(0.0);
    }
    let lu = pp.im.clone().lu();
    let y = lu
        .solve(&im_part(z))
        .ok_or(Error::DegenerateImaginaryPart { min_eigenvalue: 0.0 })?;
    Ok(s.norm() * (2.0 * PI * im_part(w).dot(&y)).exp())
}

/// The exponent `Q(z) = 2 pi Im(z)^t Delta Im(Omega)^{-1} Im(z)` of the
/// polarized metric; never negative.
pub fn polarized_exponent(pol: &PolarizationType, pp: &PeriodPoint, z: &CVector) -> Result<f64> {
    check_len(pol.g(), pp.g(), "polarization dimension")?;
    pp.quadratic(z)
}

/// `||(z, s)|| = |s| exp(-Q(z))` for the pullback of the Poincaré bundle
/// along the polarization.
pub fn polarized_norm(pol: &PolarizationType, pp: &PeriodPoint, z: &CVector, s: Complex<f64>) -> Result<f64> {
    let q = polarized_exponent(pol, pp, z)?;
    Ok(s.norm() * (-q).exp())
}

/// Symmetric bilinear form `2 pi Im(d1)^t Delta Im(Omega)^{-1} Im(d2)` whose
/// quadratic form is the polarized exponent.
pub fn biext_pairing(pol: &PolarizationType, pp: &PeriodPoint, d1: &CVector, d2: &CVector) -> Result<f64> {
    check_len(pol.g(), pp.g(), "polarization dimension")?;
    check_len(d1.len(), pp.g(), "vector delta_1")?;
    check_len(d2.len(), pp.g(), "vector delta_2")?;
    let y1 = &pp.delta * im_part(d1);
    let y2 = &pp.delta * im_part(d2);
    Ok(2.0 * PI * y1.dot(&pp.delta_im.solve(&y2)))
}

fn monomial(exponents: &[u32], q: &[Complex<f64>]) -> Complex<f64> {
    exponents
        .iter()
        .zip(q)
        .fold(Complex::new(1.0, 0.0), |acc, (&e, &qi)| acc * qi.powu(e))
}

fn check_exponents(exponents: &[u32], n: usize) -> Result<()> {
    if exponents.len() != n {
        return Err(Error::InvalidModel(format!(
            "monomial has {} exponents, expected {n}",
            exponents.len()
        )));
    }
    let degree: u32 = exponents.iter().sum();
    if degree > MAX_DEGREE {
        return Err(Error::InvalidModel(format!(
            "monomial of degree {degree} exceeds {MAX_DEGREE}"
        )));
    }
    Ok(())
}

/// Polynomial map from `C^n` to complex symmetric `g x g` matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPolynomial {
    g: usize,
    n: usize,
    terms: Vec<(Vec<u32>, CMatrix)>,
}

impl MatrixPolynomial {
    pub fn zero(g: usize, n: usize) -> Self {
        Self {
            g,
            n,
            terms: Vec::new(),
        }
    }

    pub fn constant(n: usize, value: CMatrix) -> Result<Self> {
        let mut p = Self::zero(value.nrows(), n);
        p.push_term(vec![0; n], value)?;
        Ok(p)
    }

    pub fn push_term(&mut self, exponents: Vec<u32>, coeff: CMatrix) -> Result<()> {
        check_exponents(&exponents, self.n)?;
        if coeff.nrows() != self.g || coeff.ncols() != self.g {
            return Err(Error::DimensionMismatch {
                what: "matrix coefficient",
                expected: self.g,
                found: coeff.nrows().max(coeff.ncols()),
            });
        }
        let defect = (&coeff - coeff.transpose())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        if defect > RIEMANN_TOL * coeff.iter().map(|c| c.norm()).fold(1.0, f64::max) {
            return Err(Error::InvalidModel("matrix coefficient is not symmetric".into()));
        }
        self.terms.push((exponents, coeff));
        Ok(())
    }

    pub fn eval(&self, q: &[Complex<f64>]) -> CMatrix {
        self.terms
            .iter()
            .fold(CMatrix::zeros(self.g, self.g), |acc, (e, m)| acc + m * monomial(e, q))
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|(e, _)| e.iter().all(|&x| x == 0))
    }
}

/// Polynomial map from `C^n` to `C^g`.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorPolynomial {
    g: usize,
    n: usize,
    terms: Vec<(Vec<u32>, CVector)>,
}

impl VectorPolynomial {
    pub fn zero(g: usize, n: usize) -> Self {
        Self {
            g,
            n,
            terms: Vec::new(),
        }
    }

    pub fn constant(n: usize, value: CVector) -> Result<Self> {
        let mut p = Self::zero(value.len(), n);
        p.push_term(vec![0; n], value)?;
        Ok(p)
    }

    pub fn push_term(&mut self, exponents: Vec<u32>, coeff: CVector) -> Result<()> {
        check_exponents(&exponents, self.n)?;
        check_len(coeff.len(), self.g, "vector coefficient")?;
        self.terms.push((exponents, coeff));
        Ok(())
    }

    pub fn eval(&self, q: &[Complex<f64>]) -> CVector {
        self.terms
            .iter()
            .fold(CVector::zeros(self.g), |acc, (e, v)| acc + v * monomial(e, q))
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|(e, _)| e.iter().all(|&x| x == 0))
    }
}

/// Local model of a degenerating family: on `(Δ*)^k x Δ^{n-k}`,
///
/// ```text
/// Omega(z, t) = Σ z_j A_j + psi(e(z), t),   delta(z, t) = Σ z_j A_j c_j + alpha(e(z), t)
/// ```
///
/// with `e(z) = exp(2 pi i z)`, and a section whose meromorphic factor is
/// `h = h_unit · Π q_j^{h_orders[j]}`.
#[derive(Debug, Clone)]
pub struct PeriodModel {
    pol: PolarizationType,
    n: usize,
    a: Vec<PsdMatrix>,
    c: Vec<DVector<f64>>,
    psi: MatrixPolynomial,
    alpha: VectorPolynomial,
    h_orders: Vec<i64>,
    h_unit: f64,
    epsilon: f64,
}

fn is_integral(x: f64) -> bool {
    (x - x.round()).abs() <= RIEMANN_TOL * x.abs().max(1.0)
}

impl PeriodModel {
    pub fn new(
        pol: PolarizationType,
        n: usize,
        a: Vec<PsdMatrix>,
        c: Vec<DVector<f64>>,
        psi: MatrixPolynomial,
        alpha: VectorPolynomial,
        h_orders: Vec<i64>,
    ) -> Result<Self> {
        let (g, k) = (pol.g(), a.len());
        if k > n {
            return Err(Error::InvalidModel(format!("k = {k} exceeds n = {n}")));
        }
        check_len(c.len(), k, "vectors c_j")?;
        check_len(h_orders.len(), k, "orders of h")?;
        check_len(psi.g, g, "psi dimension")?;
        check_len(psi.n, n, "psi variables")?;
        check_len(alpha.g, g, "alpha dimension")?;
        check_len(alpha.n, n, "alpha variables")?;
        for (j, (aj, cj)) in a.iter().zip(&c).enumerate() {
            check_len(aj.dim(), g, "matrix A_j")?;
            check_len(cj.len(), g, "vector c_j")?;
            if aj.rank() == 0 {
                return Err(Error::RankDeficient { index: j });
            }
            if !aj.matrix().iter().all(|&x| is_integral(x)) {
                return Err(Error::Integrality(format!("A_{} has non-integral entries", j + 1)));
            }
            let v = aj.matrix() * cj;
            for (i, (&vi, &d)) in v.iter().zip(pol.delta()).enumerate() {
                if !is_integral(vi / d as f64) {
                    return Err(Error::Integrality(format!(
                        "entry {i} of Delta^-1 A_{} c_{} is {}",
                        j + 1,
                        j + 1,
                        vi / d as f64
                    )));
                }
            }
        }
        Ok(Self {
            pol,
            n,
            a,
            c,
            psi,
            alpha,
            h_orders,
            h_unit: 1.0,
            epsilon: (-1.0f64).exp(),
        })
    }

    /// Sets `|h_unit|`, the modulus of the unit factor of `h`.
    pub fn with_h_unit(mut self, u: f64) -> Result<Self> {
        if !(u.abs() > 0.0) || !u.is_finite() {
            return Err(Error::InvalidModel(format!("unit of h must be non-zero, got {u}")));
        }
        self.h_unit = u.abs();
        Ok(self)
    }

    /// Sets the polydisk radius, `0 < epsilon < 1`.
    pub fn with_epsilon(mut self, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidModel(format!(
                "epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        self.epsilon = epsilon;
        Ok(self)
    }

    pub fn g(&self) -> usize {
        self.pol.g()
    }

    pub fn k(&self) -> usize {
        self.a.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn polarization(&self) -> &PolarizationType {
        &self.pol
    }

    pub fn h_orders(&self) -> &[i64] {
        &self.h_orders
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `kappa = -log epsilon`.
    pub fn kappa(&self) -> f64 {
        -self.epsilon.ln()
    }

    pub fn has_constant_maps(&self) -> bool {
        self.psi.is_constant() && self.alpha.is_constant()
    }

    /// `(Omega~, delta~)` at `z` in `H^k` and `t` in `Δ^{n-k}`.
    pub fn period_map_eval(&self, z: &[Complex<f64>], t: &[Complex<f64>]) -> Result<(CMatrix, CVector)> {
        check_len(z.len(), self.k(), "coordinates z")?;
        check_len(t.len(), self.n - self.k(), "coordinates t")?;
        let q: Vec<Complex<f64>> = z
            .iter()
            .map(|&zj| (Complex::new(0.0, 2.0 * PI) * zj).exp())
            .chain(t.iter().copied())
            .collect();
        let mut omega = self.psi.eval(&q);
        let mut delta = self.alpha.eval(&q);
        for ((aj, cj), &zj) in self.a.iter().zip(&self.c).zip(z) {
            omega += aj.matrix().map(|x| Complex::new(x, 0.0)) * zj;
            delta += (aj.matrix() * cj).map(|x| Complex::new(x, 0.0)) * zj;
        }
        let im = omega.map(|c| c.im);
        let min_eigenvalue = least_eigenvalue(&im);
        if !(min_eigenvalue > 0.0) {
            return Err(Error::DegenerateImaginaryPart { min_eigenvalue });
        }
        Ok((omega, delta))
    }

    fn check_point(&self, q: &[Complex<f64>], punctured: bool) -> Result<()> {
        check_len(q.len(), self.n, "point q")?;
        for (j, qj) in q.iter().enumerate() {
            if !(qj.norm() < self.epsilon) {
                return Err(Error::OutsidePolydisk(format!(
                    "|q_{}| = {} is not below epsilon = {}",
                    j + 1,
                    qj.norm(),
                    self.epsilon
                )));
            }
            if punctured && j < self.k() && qj.norm() == 0.0 {
                return Err(Error::OutsidePolydisk(format!(
                    "q_{} lies on the boundary divisor",
                    j + 1
                )));
            }
        }
        Ok(())
    }

    /// `x_j = -log |q_j|` for the first `k` coordinates.
    pub fn x_of(&self, q: &[Complex<f64>]) -> Vec<f64> {
        q.iter().take(self.k()).map(|qj| -qj.norm().ln()).collect()
    }

    /// `-log ||s||` at `q` in `(Δ*)^k x Δ^{n-k}`, through the period map at
    /// `z_j = log(q_j) / (2 pi i)`:
    /// `Σ ord_j(h) x_j - log|h_unit| + 2 pi Im(delta~)^t Im(Omega~)^{-1} Im(delta~)`.
    pub fn log_norm_section(&self, q: &[Complex<f64>]) -> Result<f64> {
        self.check_point(q, true)?;
        let k = self.k();
        let x = self.x_of(q);
        let z: Vec<Complex<f64>> = q[..k].iter().map(|qj| qj.ln() / Complex::new(0.0, 2.0 * PI)).collect();
        let (omega, delta) = self.period_map_eval(&z, &q[k..]).map_err(|e| match e {
            Error::DegenerateImaginaryPart { min_eigenvalue } => Error::PositivityViolation {
                x: x.clone(),
                lambda: 0,
                eigenvalue: min_eigenvalue,
            },
            e => e,
        })?;
        let chol = symmetrize(&omega.map(|c| c.im))
            .cholesky()
            .ok_or_else(|| Error::PositivityViolation {
                x: x.clone(),
                lambda: 0,
                eigenvalue: 0.0,
            })?;
        let linear: f64 = self.h_orders.iter().zip(&x).map(|(&o, &xj)| o as f64 * xj).sum();
        Ok(linear - self.h_unit.ln() + exponent(&chol, &im_part(&delta)))
    }

    /// `(a, B) = (2 pi Im alpha(q), 2 pi Im psi(q))`.
    pub fn normlike_data(&self, q: &[Complex<f64>]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        self.check_point(q, false)?;
        let a = im_part(&self.alpha.eval(q)) * (2.0 * PI);
        let b = symmetrize(&self.psi.eval(q).map(|c| c.im)) * (2.0 * PI);
        Ok((a, b))
    }

    /// Packages `(A_j, c_j, a(q), B(q))` over the grid into a normlike
    /// instance with `kappa = -log epsilon`. Sample `i` corresponds to
    /// `grid[i]`, recorded as `(Re q_1, Im q_1, ...)`.
    pub fn to_normlike(&self, grid: &[Vec<Complex<f64>>]) -> Result<NormlikeInstance> {
        let samples = grid
            .iter()
            .map(|q| {
                let (a, b) = self.normlike_data(q)?;
                let lambda = q.iter().flat_map(|c| [c.re, c.im]).collect();
                Ok(ParamSample::new(lambda, a, b))
            })
            .collect::<Result<Vec<_>>>()?;
        NormlikeInstance::new(self.g(), self.kappa(), self.a.clone(), self.c.clone(), samples)
    }
}
