use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::NormlikeInstance;
use crate::error::{Error, Result};
use crate::psd_linalg::symmetrize;

/// `B(lambda)` split along the reduced basis `u` of the recession form:
/// `B22` factored, `G = B12 B22^{-1}` and `M = B11 - B12 B22^{-1} B21`.
struct SplitB {
    b22: Option<Cholesky<f64, Dyn>>,
    g: DMatrix<f64>,
    m: DMatrix<f64>,
}

/// Values of `phi0` sampled along one ray `t * direction`.
#[derive(Debug, Clone, PartialEq)]
pub struct RayTrace {
    pub direction: Vec<f64>,
    pub lambda: usize,
    pub t: Vec<f64>,
    pub values: Vec<f64>,
}

impl RayTrace {
    /// Largest increase `phi0(t_{j+1}) - phi0(t_j)` over grid points with
    /// `t_j >= t_from`; zero when the tail is non-increasing.
    pub fn tail_increase(&self, t_from: f64) -> f64 {
        self.t
            .windows(2)
            .zip(self.values.windows(2))
            .filter(|(t, _)| t[0] >= t_from)
            .map(|(_, v)| v[1] - v[0])
            .fold(0.0, f64::max)
    }
}

/// Log-log slopes of `|d phi0/dx|` and `|d² phi0/dx²|` for one sample (k = 1).
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentFit {
    pub lambda: usize,
    pub x: Vec<f64>,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub slope_first: f64,
    pub residual_first: f64,
    pub slope_second: f64,
    pub residual_second: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticsReport {
    /// `sup |phi0|` over every ray point that was evaluated.
    pub bounded_sup: f64,
    pub rays: Vec<RayTrace>,
    /// One fit per sample when `k = 1`; samples where `phi0` is constant are skipped.
    pub exponent_fits: Vec<ExponentFit>,
    /// `lim phi0(x)` as `x -> ∞`, one per sample, when `k = 1`.
    pub continuity_limits: Vec<f64>,
    pub warnings: Vec<String>,
}

impl AsymptoticsReport {
    pub fn fitted_exponents(&self) -> Option<(f64, f64)> {
        self.exponent_fits.first().map(|f| (f.slope_first, f.slope_second))
    }

    pub fn continuity_limit(&self) -> Option<f64> {
        self.continuity_limits.first().copied()
    }

    pub fn max_tail_increase(&self, t_from: f64) -> f64 {
        self.rays.iter().map(|r| r.tail_increase(t_from)).fold(0.0, f64::max)
    }
}

/// First-order expansion of `P^{-1}` and `P^{-1} A_1` in `1/x` for `k = 1`:
/// `P^{-1} = leading + first / x + O(x^-2)` and `P^{-1} A_1 = pa_first / x + O(x^-2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseExpansion {
    pub lambda: usize,
    pub leading: DMatrix<f64>,
    pub first: DMatrix<f64>,
    pub pa_first: DMatrix<f64>,
}

impl InverseExpansion {
    /// Max-entry remainders `‖P^{-1} - leading - first/x‖` and
    /// `‖P^{-1}A_1 - pa_first/x‖` at `x`.
    pub fn remainders(&self, inst: &NormlikeInstance, x: f64) -> Result<(f64, f64)> {
        let p = inst.p_matrix(&[x], self.lambda)?;
        let p_inv = p
            .cholesky()
            .ok_or_else(|| inst.positivity_error(&[x], self.lambda))?
            .inverse();
        let r1 = (&p_inv - &self.leading - &self.first / x).amax();
        let r2 = (&p_inv * inst.matrices()[0].matrix() - &self.pa_first / x).amax();
        Ok((r1, r2))
    }
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    (slope, (rss / n).sqrt())
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

impl NormlikeInstance {
    fn split_b(&self, lambda: usize) -> Result<SplitB> {
        let rec = self.recession();
        let (g, r) = (self.g(), rec.rank());
        let u = rec.u();
        let b_hat = symmetrize(&(u.transpose() * &self.sample(lambda)?.b * u));
        let b11 = b_hat.view((0, 0), (r, r)).into_owned();
        if r == g {
            return Ok(SplitB {
                b22: None,
                g: DMatrix::zeros(r, 0),
                m: b11,
            });
        }
        let b12 = b_hat.view((0, r), (r, g - r)).into_owned();
        let b22 = b_hat.view((r, r), (g - r, g - r)).into_owned();
        let chol = b22.cholesky().ok_or(Error::SingularTrailingBlock)?;
        let gm = chol.solve(&b12.transpose()).transpose();
        let m = symmetrize(&(b11 - &gm * b12.transpose()));
        Ok(SplitB {
            b22: Some(chol),
            g: gm,
            m,
        })
    }

    /// `M = B11 - B12 B22^{-1} B21` in the reduced basis of the recession form.
    pub fn schur_perturbation(&self, lambda: usize) -> Result<DMatrix<f64>> {
        Ok(self.split_b(lambda)?.m)
    }

    fn center_or_zero(&self, x: &[f64]) -> Result<DVector<f64>> {
        if self.recession().rank() == 0 {
            if x.len() != self.k() {
                return Err(Error::DimensionMismatch {
                    what: "point x",
                    expected: self.k(),
                    found: x.len(),
                });
            }
            return Ok(DVector::zeros(self.g()));
        }
        self.recession().center(x)
    }

    /// Splits `phi0(x) = base + tail_const + tail(x)` with
    /// `base = 2 ĉ^t a - ĉ^t B ĉ`, `tail_const = w2^t B22^{-1} w2` and
    /// `tail(x) = z^t (Σ x_i A'_i + M)^{-1} z`, where `ĉ` is the centre of the
    /// recession form and `w = a - B ĉ`. Returns `(base + tail_const, z)`.
    fn phi0_parts(&self, x: &[f64], lambda: usize) -> Result<(f64, DVector<f64>, SplitB)> {
        let c_hat = self.center_or_zero(x)?;
        let s = self.sample(lambda)?;
        let w = &s.a - &s.b * &c_hat;
        let base = 2.0 * c_hat.dot(&s.a) - c_hat.dot(&(&s.b * &c_hat));
        let split = self.split_b(lambda).map_err(|_| self.positivity_error(x, lambda))?;
        let r = self.recession().rank();
        let w_hat = self.recession().u().transpose() * w;
        let w1 = w_hat.rows(0, r).into_owned();
        let (tail_const, z) = match &split.b22 {
            Some(chol) => {
                let w2 = w_hat.rows(r, self.g() - r).into_owned();
                (w2.dot(&chol.solve(&w2)), w1 - &split.g * w2)
            }
            None => (0.0, w1),
        };
        Ok((base + tail_const, z, split))
    }

    /// `phi0 = phi - f`, evaluated through the Schur complement of `B22` so
    /// that the cancellation between `phi` and `f` never happens in floating
    /// point. Requires `x > 0` and `P(x, lambda)` positive definite.
    pub fn phi0(&self, x: &[f64], lambda: usize) -> Result<f64> {
        let (constant, z, split) = self.phi0_parts(x, lambda)?;
        if z.is_empty() {
            return Ok(constant);
        }
        let (s, _) = self.recession().reduced_parts(x);
        let chol = (s + &split.m)
            .cholesky()
            .ok_or_else(|| self.positivity_error(x, lambda))?;
        Ok(constant + z.dot(&chol.solve(&z)))
    }

    /// `lim_{t -> ∞} phi0(t * direction)`.
    pub fn phi0_ray_limit(&self, direction: &[f64], lambda: usize) -> Result<f64> {
        Ok(self.phi0_parts(direction, lambda)?.0)
    }

    /// Closed form for `k = 1`: `2 a^t c_1 - c_1^t B c_1 + w0^t P^{-1} w0` with
    /// `w0 = a - B c_1`.
    pub fn phi0_k1_closed(&self, x1: f64, lambda: usize) -> Result<f64> {
        if self.k() != 1 {
            return Err(Error::DimensionMismatch {
                what: "number of variables (closed form needs k = 1)",
                expected: 1,
                found: self.k(),
            });
        }
        let s = self.sample(lambda)?;
        let c1 = &self.vectors()[0];
        let w0 = &s.a - &s.b * c1;
        let p = self.p_matrix(&[x1], lambda)?;
        let chol = p.cholesky().ok_or_else(|| self.positivity_error(&[x1], lambda))?;
        Ok(2.0 * s.a.dot(c1) - c1.dot(&(&s.b * c1)) + w0.dot(&chol.solve(&w0)))
    }

    /// `z^t A'^{-1} z` for `k = 1`: the coefficient of `-1/x^2` in the
    /// derivative of `phi0`. Zero exactly when `phi0` is constant.
    pub fn k1_decay_coefficient(&self, lambda: usize) -> Result<f64> {
        if self.k() != 1 {
            return Err(Error::DimensionMismatch {
                what: "number of variables (decay coefficient needs k = 1)",
                expected: 1,
                found: self.k(),
            });
        }
        let (_, z, _) = self.phi0_parts(&[1.0], lambda)?;
        let ap = &self.recession().a_prime()[0];
        let chol = ap
            .clone()
            .cholesky()
            .ok_or(Error::NumericallySingular { what: "A'_1" })?;
        Ok(z.dot(&chol.solve(&z)))
    }

    /// First-order expansion of `P^{-1}` in `1/x_1` for `k = 1`.
    pub fn k1_inverse_expansion(&self, lambda: usize) -> Result<InverseExpansion> {
        if self.k() != 1 {
            return Err(Error::DimensionMismatch {
                what: "number of variables (expansion needs k = 1)",
                expected: 1,
                found: self.k(),
            });
        }
        let rec = self.recession();
        let (g, r) = (self.g(), rec.rank());
        let u = rec.u();
        let split = self.split_b(lambda)?;
        let ap_inv = rec.a_prime()[0]
            .clone()
            .try_inverse()
            .ok_or(Error::NumericallySingular { what: "A'_1" })?;
        let mut leading = DMatrix::zeros(g, g);
        let mut first = DMatrix::zeros(g, g);
        let mut pa = DMatrix::zeros(g, g);
        first.view_mut((0, 0), (r, r)).copy_from(&ap_inv);
        pa.view_mut((0, 0), (r, r)).fill_with_identity();
        if let Some(chol) = &split.b22 {
            let t = g - r;
            // G = B12 B22^{-1}, so G^t = B22^{-1} B21.
            let gt = split.g.transpose();
            leading.view_mut((r, r), (t, t)).copy_from(&chol.inverse());
            let off = -(&ap_inv * &split.g);
            first.view_mut((0, r), (r, t)).copy_from(&off);
            first.view_mut((r, 0), (t, r)).copy_from(&off.transpose());
            first.view_mut((r, r), (t, t)).copy_from(&(&gt * &ap_inv * &split.g));
            pa.view_mut((r, 0), (t, r)).copy_from(&(-gt));
        }
        let back = |m: DMatrix<f64>| u * m * u.transpose();
        Ok(InverseExpansion {
            lambda,
            leading: back(leading),
            first: back(first),
            pa_first: back(pa),
        })
    }

    /// Samples `phi0` along `t * d` for log-spaced `t` in `[1, t_max]`
    /// (four points per decade) restricted to `t * d > kappa`, and for
    /// `k = 1` fits the decay exponents of the first two derivatives by
    /// central finite differences.
    pub fn asymptotics_report(&self, directions: &[Vec<f64>], t_max: f64) -> AsymptoticsReport {
        let mut warnings = Vec::new();
        let mut rays = Vec::new();
        let mut sup = 0.0_f64;
        let mut grid: Vec<f64> = Vec::new();
        let mut j = 0;
        loop {
            let t = 10f64.powf(j as f64 / 4.0);
            if t >= t_max * (1.0 - 1e-12) {
                break;
            }
            grid.push(t);
            j += 1;
        }
        grid.push(t_max.max(1.0));

        for d in directions {
            if d.len() != self.k() || d.iter().any(|&v| !(v > 0.0)) {
                warnings.push(format!("direction {d:?} skipped: needs {} positive entries", self.k()));
                continue;
            }
            let dmin = d.iter().copied().fold(f64::INFINITY, f64::min);
            for lambda in 0..self.samples().len() {
                let mut trace = RayTrace {
                    direction: d.clone(),
                    lambda,
                    t: Vec::new(),
                    values: Vec::new(),
                };
                for &t in grid.iter().filter(|&&t| t * dmin > self.kappa()) {
                    let x: Vec<f64> = d.iter().map(|v| v * t).collect();
                    match self.phi0(&x, lambda) {
                        Ok(v) => {
                            sup = sup.max(v.abs());
                            trace.t.push(t);
                            trace.values.push(v);
                        }
                        Err(e) => warnings.push(format!("t = {t:e}, sample {lambda}: {e}")),
                    }
                }
                if trace.t.is_empty() {
                    warnings.push(format!("direction {d:?}: no grid point above kappa"));
                }
                rays.push(trace);
            }
        }

        let mut exponent_fits = Vec::new();
        let mut continuity_limits = Vec::new();
        if self.k() == 1 {
            for lambda in 0..self.samples().len() {
                match self.k1_fit(lambda) {
                    Ok((limit, fit)) => {
                        continuity_limits.push(limit);
                        match fit {
                            Some(f) => exponent_fits.push(f),
                            None => warnings.push(format!("sample {lambda}: phi0 is constant, slopes undefined")),
                        }
                    }
                    Err(e) => warnings.push(format!("sample {lambda}: exponent fit failed: {e}")),
                }
            }
        }

        AsymptoticsReport {
            bounded_sup: sup,
            rays,
            exponent_fits,
            continuity_limits,
            warnings,
        }
    }

    /// Scale beyond which `phi0` is in its asymptotic regime for `k = 1`:
    /// `max(1, kappa, ‖M‖ / λ_min(A'_1))`.
    pub fn k1_asymptotic_scale(&self, lambda: usize) -> Result<f64> {
        let m = self.schur_perturbation(lambda)?;
        let ap = &self.recession().a_prime()[0];
        let lmin = ap.symmetric_eigenvalues().min();
        let mnorm = if m.is_empty() { 0.0 } else { m.norm() };
        Ok(1f64.max(self.kappa()).max(mnorm / lmin))
    }

    fn k1_fit(&self, lambda: usize) -> Result<(f64, Option<ExponentFit>)> {
        let limit = self.phi0_ray_limit(&[1.0], lambda)?;
        let coef = self.k1_decay_coefficient(lambda)?;
        if !(coef > 1e-12 * (1.0 + limit.abs())) {
            return Ok((limit, None));
        }
        let s = self.k1_asymptotic_scale(lambda)?;
        let xs = log_grid(100.0 * s, 1e4 * s, 13);
        let f = |x: f64| self.phi0(&[x], lambda);
        let mut first = Vec::with_capacity(xs.len());
        let mut second = Vec::with_capacity(xs.len());
        for &x in &xs {
            let h = x.max(1.0) * 1e-4;
            let (m2, m1, p0, p1, p2) = (f(x - 2.0 * h)?, f(x - h)?, f(x)?, f(x + h)?, f(x + 2.0 * h)?);
            first.push((p1 - m1) / (2.0 * h));
            second.push((-p2 + 16.0 * p1 - 30.0 * p0 + 16.0 * m1 - m2) / (12.0 * h * h));
        }
        let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
        let l1: Vec<f64> = first.iter().map(|v| v.abs().ln()).collect();
        let l2: Vec<f64> = second.iter().map(|v| v.abs().ln()).collect();
        let (slope_first, residual_first) = least_squares_slope(&lx, &l1);
        let (slope_second, residual_second) = least_squares_slope(&lx, &l2);
        Ok((
            limit,
            Some(ExponentFit {
                lambda,
                x: xs,
                first,
                second,
                slope_first,
                residual_first,
                slope_second,
                residual_second,
            }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psd_linalg::PsdMatrix;
    use approx::assert_relative_eq;

    fn k1(b: f64, a: f64, c: f64) -> NormlikeInstance {
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
    fn scalar_example_phi0() {
        let inst = NormlikeInstance::scalar_example();
        assert_relative_eq!(inst.phi0(&[1.0, 1.0], 0).unwrap(), 3.5, max_relative = 1e-14);
        let n = 1e6;
        assert!((inst.phi0(&[n, n], 0).unwrap() - 3.0 - 0.5 / n).abs() < 1e-13);
        assert!((inst.phi0(&[n, 2.0 * n], 0).unwrap() - 10.0 / 3.0).abs() < 4e-7);
        assert_relative_eq!(inst.phi0_ray_limit(&[1.0, 1.0], 0).unwrap(), 3.0, max_relative = 1e-14);
        assert_relative_eq!(
            inst.phi0_ray_limit(&[1.0, 2.0], 0).unwrap(),
            10.0 / 3.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn closed_form_examples() {
        let inst = k1(2.0, 0.0, 1.0);
        assert_relative_eq!(inst.phi0_k1_closed(2.0, 0).unwrap(), -1.0, max_relative = 1e-14);
        assert_relative_eq!(inst.phi0(&[2.0], 0).unwrap(), -1.0, max_relative = 1e-14);
        assert_relative_eq!(inst.phi0_ray_limit(&[1.0], 0).unwrap(), -2.0, max_relative = 1e-14);
        let zero = k1(0.0, 0.0, 1.0);
        assert_eq!(zero.phi0_k1_closed(3.0, 0).unwrap(), 0.0);
    }

    #[test]
    fn expansion_scalar() {
        // P^{-1} = 1/(x+2) = 1/x - 2/x^2 + ...
        let inst = k1(2.0, 0.0, 1.0);
        let e = inst.k1_inverse_expansion(0).unwrap();
        assert_eq!(e.leading[(0, 0)], 0.0);
        assert_relative_eq!(e.first[(0, 0)], 1.0, max_relative = 1e-14);
        let (r1, r2) = e.remainders(&inst, 1e3).unwrap();
        assert!(r1 <= 2.1e-6 && r2 <= 2.1e-6);
    }

    #[test]
    fn expansion_with_kernel() {
        let inst = NormlikeInstance::constant(
            0.0,
            vec![PsdMatrix::from_diagonal(&[1.0, 0.0]).unwrap()],
            vec![DVector::from_vec(vec![1.0, 0.0])],
            DVector::from_vec(vec![1.0, 1.0]),
            DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]),
        )
        .unwrap();
        let e = inst.k1_inverse_expansion(0).unwrap();
        let mut prev = f64::INFINITY;
        for x in [1e2, 1e3, 1e4] {
            let (r1, r2) = e.remainders(&inst, x).unwrap();
            assert!(r1 * x * x < 10.0 && r2 * x * x < 10.0);
            assert!(r1 < prev);
            prev = r1;
        }
    }

    #[test]
    fn report_scalar_example() {
        let inst = NormlikeInstance::scalar_example();
        let rep = inst.asymptotics_report(&[vec![1.0, 1.0]], 1e6);
        assert!(rep.bounded_sup <= 3.5);
        assert_eq!(rep.max_tail_increase(1.0), 0.0);
        let last = *rep.rays[0].values.last().unwrap();
        assert!((last - 3.0).abs() < 1e-6);
        assert!(rep.exponent_fits.is_empty());
    }

    #[test]
    fn report_k1_slopes() {
        let inst = k1(2.0, 0.0, 1.0);
        let rep = inst.asymptotics_report(&[vec![1.0]], 1e6);
        let (s1, s2) = rep.fitted_exponents().unwrap();
        assert!((s1 + 2.0).abs() < 0.1, "{s1}");
        assert!((s2 + 3.0).abs() < 0.15, "{s2}");
        assert_relative_eq!(rep.continuity_limit().unwrap(), -2.0, max_relative = 1e-12);
    }

    #[test]
    fn report_zero_function() {
        let inst = k1(1.0, 0.0, 0.0);
        let rep = inst.asymptotics_report(&[vec![1.0]], 1e6);
        assert_eq!(rep.bounded_sup, 0.0);
        assert!(rep.fitted_exponents().is_none());
        assert!(rep.warnings.iter().any(|w| w.contains("slopes undefined")));
    }
}
