use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::NormlikeInstance;
use crate::error::{Error, Result};
use crate::psd_linalg::{flag_adapted_basis, flag_transform, symmetrize, PsdMatrix};

/// Random probe points `y` with `y_1 > 0` and `y_i ≥ 0`: `y_1` log-uniform
/// on `[1e-3, 1e3]`, every other coordinate zero with probability 1/4 and
/// log-uniform otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProbeSpec {
    pub count: usize,
    pub seed: u64,
}

impl ProbeSpec {
    pub fn new(count: usize, seed: u64) -> Self {
        Self { count, seed }
    }

    pub fn points(&self, k: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let log_uniform = |rng: &mut ChaCha8Rng| 10f64.powf(rng.random_range(-3.0..=3.0));
        (0..self.count)
            .map(|_| {
                (0..k)
                    .map(|i| {
                        if i > 0 && rng.random_bool(0.25) {
                            0.0
                        } else {
                            log_uniform(&mut rng)
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Fitted constants of the inverse-entry estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MainEstimate {
    /// Least `c` with `|S^{-1}_{ab}| ≤ c / Σ_{j: r_j ≥ min(a,b)} y_j`.
    pub c: f64,
    /// Largest `c1` with `det S ≥ c1 Π_{j ≤ r} Σ_{i: r_i ≥ j} y_i`.
    pub det_c1: f64,
    /// Least `c2` with `|cof_{ab} S| ≤ c2 Π_{j ≠ min(a,b)} Σ_{i: r_i ≥ j} y_i`.
    pub cof_c2: f64,
    pub probes: usize,
}

/// Output of [`neumann_series`].
#[derive(Debug, Clone, PartialEq)]
pub struct NeumannQ {
    pub partial_sum: DMatrix<f64>,
    /// `‖A^{-1} M‖_2`.
    pub ratio: f64,
    /// `‖A^{-1}‖_2 ratio^{order+1} / (1 - ratio)`, a bound on the spectral
    /// norm of the truncation error.
    pub tail_bound: f64,
    pub order: usize,
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    // sqrt of the top eigenvalue of m^t m; nalgebra's SVD can lose accuracy
    // on rank-deficient input
    (m.transpose() * m).symmetric_eigenvalues().max().max(0.0).sqrt()
}

/// Partial sum `Σ_{m ≤ order} (-A^{-1} M)^m A^{-1}` of `(A + M)^{-1}`.
pub fn neumann_series(a: &DMatrix<f64>, m: &DMatrix<f64>, order: usize) -> Result<NeumannQ> {
    if a.shape() != m.shape() || a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            what: "Neumann series blocks",
            expected: a.nrows(),
            found: m.nrows(),
        });
    }
    let a_inv = a.clone().try_inverse().ok_or(Error::NumericallySingular {
        what: "A in the Neumann series",
    })?;
    let step = -(&a_inv * m);
    let ratio = spectral_norm(&step);
    if !(ratio < 1.0) {
        return Err(Error::DivergenceRisk { ratio });
    }
    let mut term = a_inv.clone();
    let mut sum = a_inv.clone();
    for _ in 0..order {
        term = &step * term;
        sum += &term;
    }
    let tail_bound = spectral_norm(&a_inv) * ratio.powi(order as i32 + 1) / (1.0 - ratio);
    Ok(NeumannQ {
        partial_sum: sum,
        ratio,
        tail_bound,
        order,
    })
}

/// Matrices satisfying the flag condition `Ker A_i ⊆ Ker A_{i+1}`, written in
/// an adapted basis where `A_i = diag(A''_i, 0)` with `A''_i` of size
/// `r_i = rank A_i`, truncated to the leading `r = r_1` block.
#[derive(Debug, Clone)]
pub struct FlagForm {
    u: DMatrix<f64>,
    ranks: Vec<usize>,
    blocks: Vec<DMatrix<f64>>,
    c: Vec<DVector<f64>>,
    /// `M(lambda) = B11 - B12 B22^{-1} B21` in the adapted basis.
    m: Vec<DMatrix<f64>>,
    kappa: f64,
}

impl FlagForm {
    /// Flag data of matrices that already satisfy the flag condition; no
    /// vectors and no parameter samples attached.
    pub fn from_flag(mats: &[PsdMatrix]) -> Result<Self> {
        let g = mats.first().map(PsdMatrix::dim).unwrap_or(0);
        let zeros = vec![DVector::zeros(g); mats.len()];
        Self::build(mats, &zeros, &[], 0.0)
    }

    /// Passes to the partial sums `Ã_i = Σ_{j≥i} A_j`, which satisfy the
    /// flag condition; the variables become `y_1 = x_1`, `y_i = x_i - x_{i-1}`.
    pub fn from_instance(inst: &NormlikeInstance) -> Result<Self> {
        let ft = flag_transform(inst.matrices(), inst.vectors())?;
        let bs: Vec<DMatrix<f64>> = inst.samples().iter().map(|s| s.b.clone()).collect();
        Self::build(&ft.tilde_a, &ft.tilde_c, &bs, inst.kappa())
    }

    fn build(mats: &[PsdMatrix], c: &[DVector<f64>], bs: &[DMatrix<f64>], kappa: f64) -> Result<Self> {
        if mats.is_empty() {
            return Err(Error::RankZero);
        }
        let basis = flag_adapted_basis(mats)?;
        let r = basis.ranks[0];
        if r == 0 {
            return Err(Error::RankZero);
        }
        let u = basis.u;
        let g = u.nrows();
        let blocks = mats
            .iter()
            .map(|m| {
                symmetrize(&(u.transpose() * m.matrix() * &u))
                    .view((0, 0), (r, r))
                    .into_owned()
            })
            .collect();
        let c = c
            .iter()
            .map(|ci| (u.transpose() * ci).rows(0, r).into_owned())
            .collect();
        let mut ms = Vec::with_capacity(bs.len());
        for b in bs {
            let bh = symmetrize(&(u.transpose() * b * &u));
            let b11 = bh.view((0, 0), (r, r)).into_owned();
            if r == g {
                ms.push(b11);
                continue;
            }
            let b12 = bh.view((0, r), (r, g - r)).into_owned();
            let b22 = bh.view((r, r), (g - r, g - r)).into_owned();
            let chol = b22.cholesky().ok_or(Error::SingularTrailingBlock)?;
            let corr = &b12 * chol.solve(&b12.transpose());
            ms.push(symmetrize(&(b11 - corr)));
        }
        Ok(Self {
            u,
            ranks: basis.ranks,
            blocks,
            c,
            m: ms,
            kappa,
        })
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn rank(&self) -> usize {
        self.ranks[0]
    }

    pub fn k(&self) -> usize {
        self.ranks.len()
    }

    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn schur_perturbation(&self, lambda: usize) -> Result<&DMatrix<f64>> {
        self.m.get(lambda).ok_or(Error::UnknownSample {
            index: lambda,
            count: self.m.len(),
        })
    }

    /// `Σ y_i A'_i` in the adapted basis.
    pub fn weighted_sum(&self, y: &[f64]) -> DMatrix<f64> {
        let r = self.rank();
        self.blocks
            .iter()
            .zip(y)
            .fold(DMatrix::zeros(r, r), |acc, (b, &yi)| acc + b * yi)
    }

    /// `Σ_{j: r_j ≥ level} y_j` for a 1-based block level.
    pub fn level_weight(&self, y: &[f64], level: usize) -> f64 {
        self.ranks
            .iter()
            .zip(y)
            .filter(|(&rj, _)| rj >= level)
            .map(|(_, &yj)| yj)
            .sum()
    }

    fn check_probe(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.k() {
            return Err(Error::DimensionMismatch {
                what: "probe point",
                expected: self.k(),
                found: y.len(),
            });
        }
        if !(y[0] > 0.0) {
            return Err(Error::NonPositiveCoordinate { index: 0, value: y[0] });
        }
        if let Some(index) = y.iter().position(|&v| !(v >= 0.0)) {
            return Err(Error::NegativeCoordinate { index, value: y[index] });
        }
        Ok(())
    }

    /// Fits the inverse-entry, determinant and cofactor constants over the
    /// probe points.
    pub fn inverse_entry_bound_check(&self, probes: &ProbeSpec) -> Result<MainEstimate> {
        self.fit_constants(&probes.points(self.k()))
    }

    pub fn fit_constants(&self, points: &[Vec<f64>]) -> Result<MainEstimate> {
        let r = self.rank();
        let mut c = 0.0_f64;
        let mut det_c1 = f64::INFINITY;
        let mut cof_c2 = 0.0_f64;
        for y in points {
            self.check_probe(y)?;
            let s = self.weighted_sum(y);
            let levels: Vec<f64> = (1..=r).map(|l| self.level_weight(y, l)).collect();
            let lu = s.clone().lu();
            let det = lu.determinant();
            let inv = lu.try_inverse().ok_or(Error::NumericallySingular {
                what: "flag weighted sum",
            })?;
            det_c1 = det_c1.min(det / levels.iter().product::<f64>());
            for a in 0..r {
                for b in 0..r {
                    let lo = a.min(b);
                    c = c.max(inv[(a, b)].abs() * levels[lo]);
                    // cof_ab = det * inv_ba; the product skips level `lo`.
                    let others: f64 = levels
                        .iter()
                        .enumerate()
                        .filter(|&(l, _)| l != lo)
                        .map(|(_, v)| v)
                        .product();
                    cof_c2 = cof_c2.max((det * inv[(b, a)]).abs() / others);
                }
            }
        }
        if !c.is_finite() || !cof_c2.is_finite() {
            return Err(Error::NumericallySingular { what: "main estimate" });
        }
        Ok(MainEstimate {
            c,
            det_c1,
            cof_c2,
            probes: points.len(),
        })
    }

    /// Least `c4` with `|v_a S^{-1}_{ab} v_b| ≤ c4 Σ_{j: r_j ≥ max(a,b)} y_j`
    /// over the probes, where `v = Σ y_i A'_i c'_i`.
    pub fn recession_entry_constant(&self, points: &[Vec<f64>]) -> Result<f64> {
        let r = self.rank();
        let mut c4 = 0.0_f64;
        for y in points {
            self.check_probe(y)?;
            let s = self.weighted_sum(y);
            let v = self
                .blocks
                .iter()
                .zip(&self.c)
                .zip(y)
                .fold(DVector::zeros(r), |acc, ((b, ci), &yi)| acc + b * ci * yi);
            let inv = s.try_inverse().ok_or(Error::NumericallySingular {
                what: "flag weighted sum",
            })?;
            for a in 0..r {
                for b in 0..r {
                    let w = self.level_weight(y, a.max(b) + 1);
                    c4 = c4.max((v[a] * inv[(a, b)] * v[b]).abs() / w);
                }
            }
        }
        Ok(c4)
    }

    /// `kappa' = max(c r^2 max|M_ab|, c, kappa)` with `M` maximised over samples.
    pub fn kappa_prime(&self, c: f64) -> f64 {
        let r = self.rank() as f64;
        let mmax = self.m.iter().map(|m| m.amax()).fold(0.0, f64::max);
        (c * r * r * mmax).max(c).max(self.kappa)
    }

    /// Neumann partial sum for `Q = (Σ y_i A'_i + M(lambda))^{-1}`.
    pub fn neumann_q(&self, y: &[f64], lambda: usize, order: usize) -> Result<NeumannQ> {
        self.check_probe(y)?;
        neumann_series(&self.weighted_sum(y), self.schur_perturbation(lambda)?, order)
    }

    /// `Q` by direct inversion.
    pub fn direct_q(&self, y: &[f64], lambda: usize) -> Result<DMatrix<f64>> {
        self.check_probe(y)?;
        (self.weighted_sum(y) + self.schur_perturbation(lambda)?)
            .try_inverse()
            .ok_or(Error::SingularSchurComplement)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn neumann_scalar() {
        let q = neumann_series(&scalar(4.0), &scalar(1.0), 10).unwrap();
        let expected = 0.2 * (1.0 + 0.25f64.powi(11));
        assert_relative_eq!(q.partial_sum[(0, 0)], expected, max_relative = 1e-14);
        assert_relative_eq!(q.ratio, 0.25, max_relative = 1e-14);
        assert!((q.partial_sum[(0, 0)] - 0.2).abs() <= q.tail_bound);
    }

    #[test]
    fn neumann_zero_perturbation() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let q = neumann_series(&a, &DMatrix::zeros(2, 2), 0).unwrap();
        let inv = a.try_inverse().unwrap();
        assert!((q.partial_sum - inv).amax() < 1e-15);
        assert_eq!(q.tail_bound, 0.0);
    }

    #[test]
    fn neumann_divergence() {
        match neumann_series(&scalar(1.0), &scalar(2.0), 5).unwrap_err() {
            Error::DivergenceRisk { ratio } => assert_relative_eq!(ratio, 2.0, max_relative = 1e-14),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn main_estimate_scalars() {
        let one = PsdMatrix::identity(1);
        let ff = FlagForm::from_flag(&[one.clone(), one]).unwrap();
        let est = ff.inverse_entry_bound_check(&ProbeSpec::new(200, 1)).unwrap();
        assert_relative_eq!(est.c, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn main_estimate_diagonal() {
        let a1 = PsdMatrix::identity(2);
        let a2 = PsdMatrix::from_diagonal(&[1.0, 0.0]).unwrap();
        let ff = FlagForm::from_flag(&[a1, a2]).unwrap();
        assert_eq!(ff.ranks(), &[2, 1]);
        let est = ff.inverse_entry_bound_check(&ProbeSpec::new(200, 2)).unwrap();
        assert_relative_eq!(est.c, 1.0, max_relative = 1e-12);
        assert_relative_eq!(est.det_c1, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn main_estimate_identity() {
        let ff = FlagForm::from_flag(&[PsdMatrix::identity(3)]).unwrap();
        let est = ff.inverse_entry_bound_check(&ProbeSpec::new(50, 3)).unwrap();
        assert_relative_eq!(est.c, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn flag_form_rejects_broken_flag() {
        let a1 = PsdMatrix::from_diagonal(&[1.0, 0.0]).unwrap();
        let a2 = PsdMatrix::from_diagonal(&[0.0, 1.0]).unwrap();
        assert!(matches!(
            FlagForm::from_flag(&[a1, a2]).unwrap_err(),
            Error::FlagConditionViolated { .. }
        ));
    }

    #[test]
    fn neumann_matches_direct_for_instance() {
        let inst = NormlikeInstance::constant(
            0.0,
            vec![PsdMatrix::from_diagonal(&[1.0, 0.0]).unwrap(), PsdMatrix::identity(2)],
            vec![DVector::from_vec(vec![1.0, 0.0]), DVector::from_vec(vec![0.5, 1.0])],
            DVector::from_vec(vec![1.0, -1.0]),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]),
        )
        .unwrap();
        let ff = FlagForm::from_instance(&inst).unwrap();
        let est = ff.inverse_entry_bound_check(&ProbeSpec::new(500, 4)).unwrap();
        let kp = ff.kappa_prime(est.c);
        let y = [2.0 * kp, 1.0];
        let q = ff.neumann_q(&y, 0, 20).unwrap();
        let d = ff.direct_q(&y, 0).unwrap();
        assert!((q.partial_sum - &d).amax() <= 1e-10 * d.amax());
    }
}
