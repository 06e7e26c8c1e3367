//! Dense symmetric linear algebra over the positive semidefinite cone.
//!
//! Ranks are certified numerically: an eigenvalue counts towards the rank when
//! it exceeds `rank_tol * max(lambda_max, 1)`. Every routine here works on small
//! dense matrices and is a pure function of its inputs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative eigenvalue cutoff used for rank decisions.
pub const RANK_TOL: f64 = 1e-9;
/// Relative symmetry defect tolerated before symmetrization.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Relative cutoff below which a block counts as singular.
pub const SINGULAR_TOL: f64 = 1e-12;

pub(crate) fn scale_of(m: &DMatrix<f64>) -> f64 {
    m.amax().max(1.0)
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax() / scale_of(m)
}

/// Eigendecomposition of a symmetric matrix with eigenvalues in descending
/// order. Each eigenvector is flipped so that its first entry of magnitude
/// above 1e-8 is positive.
pub fn sorted_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (DVector::zeros(0), DMatrix::zeros(0, 0));
    }
    let eig = symmetrize(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-8) {
            if first < 0.0 {
                v.neg_mut();
            }
        }
        vectors.set_column(col, &v);
    }
    (values, vectors)
}

/// Symmetric positive semidefinite matrix with a cached spectral decomposition.
#[derive(Debug, Clone)]
pub struct PsdMatrix {
    entries: DMatrix<f64>,
    rank_tol: f64,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl PsdMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        Self::with_tolerance(m, RANK_TOL)
    }

    pub fn with_tolerance(m: DMatrix<f64>, rank_tol: f64) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                what: "square matrix",
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let defect = symmetry_defect(&m);
        if defect > SYMMETRY_TOL {
            return Err(Error::NotSymmetric { defect });
        }
        let entries = symmetrize(&m);
        let (eigenvalues, eigenvectors) = sorted_eigen(&entries);
        let out = Self {
            entries,
            rank_tol,
            eigenvalues,
            eigenvectors,
        };
        let least = out.min_eigenvalue();
        if least < -out.threshold() {
            return Err(Error::NotPsd { min_eigenvalue: least });
        }
        Ok(out)
    }

    pub fn from_row_slice(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                what: "row-major matrix data",
                expected: n * n,
                found: data.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(n, n, data))
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(DMatrix::zeros(n, n)).expect("zero matrix is PSD")
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n)).expect("identity is PSD")
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors as columns, matching [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Absolute eigenvalue threshold separating the image from the kernel.
    pub fn threshold(&self) -> f64 {
        let top = self.eigenvalues.iter().copied().fold(0.0_f64, f64::max);
        self.rank_tol * top.max(1.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn rank(&self) -> usize {
        let thr = self.threshold();
        self.eigenvalues.iter().filter(|&&l| l > thr).count()
    }

    /// Orthonormal basis of the image, as columns.
    pub fn image_basis(&self) -> DMatrix<f64> {
        self.eigenvectors.columns(0, self.rank()).into_owned()
    }

    /// Orthonormal basis of the kernel, as columns.
    pub fn kernel_basis(&self) -> DMatrix<f64> {
        let r = self.rank();
        self.eigenvectors.columns(r, self.dim() - r).into_owned()
    }

    /// `u^t M u` for an orthogonal (or any square) change of basis `u`.
    pub fn congruence(&self, u: &DMatrix<f64>) -> Result<PsdMatrix> {
        PsdMatrix::with_tolerance(u.transpose() * &self.entries * u, self.rank_tol)
    }

    /// Leading `r x r` block.
    pub fn leading_block(&self, r: usize) -> Result<PsdMatrix> {
        PsdMatrix::with_tolerance(self.entries.view((0, 0), (r, r)).into_owned(), self.rank_tol)
    }
}

/// Rank of a PSD matrix under its relative eigenvalue threshold.
pub fn psd_rank(m: &PsdMatrix) -> usize {
    m.rank()
}

/// Split of a `total x total` matrix into a leading `head` block and the rest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockPartition {
    total: usize,
    head: usize,
}

impl BlockPartition {
    pub fn new(total: usize, head: usize) -> Result<Self> {
        if head > total {
            return Err(Error::DimensionMismatch {
                what: "block partition head",
                expected: total,
                found: head,
            });
        }
        Ok(Self { total, head })
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn head(&self) -> usize {
        self.head
    }

    pub fn tail(&self) -> usize {
        self.total - self.head
    }

    fn check(&self, m: &DMatrix<f64>) -> Result<()> {
        if m.nrows() != self.total || m.ncols() != self.total {
            return Err(Error::DimensionMismatch {
                what: "partitioned matrix",
                expected: self.total,
                found: m.nrows().max(m.ncols()),
            });
        }
        Ok(())
    }

    /// The blocks `(A, B, C)` of `M = [[A, B], [B^t, C]]`.
    pub fn blocks(&self, m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
        let (h, t) = (self.head, self.tail());
        (
            m.view((0, 0), (h, h)).into_owned(),
            m.view((0, h), (h, t)).into_owned(),
            m.view((h, h), (t, t)).into_owned(),
        )
    }
}

fn invert_symmetric(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Some(DMatrix::zeros(0, 0));
    }
    let eig = symmetrize(m).symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let least = eig.eigenvalues.iter().fold(f64::INFINITY, |a, l| a.min(l.abs()));
    if least <= SINGULAR_TOL * top.max(1.0) {
        return None;
    }
    m.clone().lu().try_inverse()
}

/// Schur complement `A - B C^{-1} B^t` of the trailing block `C`.
pub fn schur_complement(m: &DMatrix<f64>, split: BlockPartition) -> Result<DMatrix<f64>> {
    split.check(m)?;
    let (a, b, c) = split.blocks(m);
    if split.tail() == 0 {
        return Ok(a);
    }
    let c_inv = invert_symmetric(&c).ok_or(Error::SingularTrailingBlock)?;
    Ok(symmetrize(&(a - &b * c_inv * b.transpose())))
}

/// Inverse of a symmetric block matrix assembled from the four Schur blocks.
pub fn block_inverse(m: &DMatrix<f64>, split: BlockPartition) -> Result<DMatrix<f64>> {
    split.check(m)?;
    let (h, t) = (split.head(), split.tail());
    let (_, b, c) = split.blocks(m);
    let c_inv = invert_symmetric(&c).ok_or(Error::SingularTrailingBlock)?;
    let s = schur_complement(m, split)?;
    let s_inv = invert_symmetric(&s).ok_or(Error::SingularSchurComplement)?;

    let top_right = -(&s_inv * &b * &c_inv);
    let bottom_right = &c_inv + &c_inv * b.transpose() * &s_inv * &b * &c_inv;

    let mut out = DMatrix::zeros(h + t, h + t);
    out.view_mut((0, 0), (h, h)).copy_from(&s_inv);
    out.view_mut((0, h), (h, t)).copy_from(&top_right);
    out.view_mut((h, 0), (t, h)).copy_from(&top_right.transpose());
    out.view_mut((h, h), (t, t)).copy_from(&bottom_right);
    Ok(out)
}

/// Moore-Penrose pseudo-inverse through the cached eigendecomposition.
pub fn pseudo_inverse(m: &PsdMatrix) -> DMatrix<f64> {
    let n = m.dim();
    let thr = m.threshold();
    let mut out = DMatrix::zeros(n, n);
    for (i, &l) in m.eigenvalues().iter().enumerate() {
        if l > thr {
            let v = m.eigenvectors().column(i);
            out += (v * v.transpose()) / l;
        }
    }
    out
}

/// Output of [`simultaneous_reduce`].
#[derive(Debug, Clone)]
pub struct ReductionResult {
    /// Orthogonal change of basis; its first `r` columns span the common image.
    pub u: DMatrix<f64>,
    pub r: usize,
    /// Leading `r x r` blocks of `u^t N_i u`.
    pub blocks: Vec<PsdMatrix>,
}

fn common_dim(ns: &[PsdMatrix]) -> Result<usize> {
    let g = ns.first().map(PsdMatrix::dim).unwrap_or(0);
    for n in ns {
        if n.dim() != g {
            return Err(Error::DimensionMismatch {
                what: "matrix list",
                expected: g,
                found: n.dim(),
            });
        }
    }
    Ok(g)
}

/// Simultaneous block reduction of PSD matrices: one orthogonal `u` such that
/// every `u^t N_i u` vanishes outside its leading `r x r` block, where `r` is
/// the rank of the sum.
pub fn simultaneous_reduce(ns: &[PsdMatrix]) -> Result<ReductionResult> {
    let g = common_dim(ns)?;
    let total = ns.iter().fold(DMatrix::zeros(g, g), |acc, n| acc + n.matrix());
    let sum = PsdMatrix::new(total)?;
    let r = sum.rank();
    if r == 0 {
        return Err(Error::RankZero);
    }
    let u = sum.eigenvectors().clone();
    let blocks = ns
        .iter()
        .map(|n| n.congruence(&u)?.leading_block(r))
        .collect::<Result<Vec<_>>>()?;
    Ok(ReductionResult { u, r, blocks })
}

/// Output of [`flag_transform`]: partial sums `Ã_i = Σ_{j>=i} A_j` and the
/// minimum-norm `c̃_i` with `Ã_i c̃_i = Σ_{j>=i} A_j c_j`.
#[derive(Debug, Clone)]
pub struct FlagTransform {
    pub tilde_a: Vec<PsdMatrix>,
    pub tilde_c: Vec<DVector<f64>>,
    /// Largest relative `‖Ã_{i+1} v‖` over kernel vectors `v` of `Ã_i`.
    pub nesting_defect: f64,
}

const FLAG_TOL: f64 = 1e-8;

pub fn flag_transform(a: &[PsdMatrix], c: &[DVector<f64>]) -> Result<FlagTransform> {
    if a.len() != c.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: c.len(),
        });
    }
    let g = common_dim(a)?;
    for ci in c {
        if ci.len() != g {
            return Err(Error::DimensionMismatch {
                what: "vector c_i",
                expected: g,
                found: ci.len(),
            });
        }
    }
    let k = a.len();
    let mut tilde_a = Vec::with_capacity(k);
    let mut tilde_c = Vec::with_capacity(k);
    let mut acc = DMatrix::zeros(g, g);
    let mut rhs = DVector::zeros(g);
    for i in (0..k).rev() {
        acc += a[i].matrix();
        rhs += a[i].matrix() * &c[i];
        let ta = PsdMatrix::new(acc.clone())?;
        let pinv = pseudo_inverse(&ta);
        let mut tc = &pinv * &rhs;
        // one refinement step; the eigen-based solve loses accuracy when `ta` is ill-conditioned
        tc += &pinv * (&rhs - ta.matrix() * &tc);
        let residual = (ta.matrix() * &tc - &rhs).amax();
        let scale = 1.0_f64.max(rhs.amax()).max(ta.matrix().amax() * tc.amax());
        if residual > FLAG_TOL * scale {
            return Err(Error::InconsistentSystem { residual });
        }
        tilde_a.push(ta);
        tilde_c.push(tc);
    }
    tilde_a.reverse();
    tilde_c.reverse();
    let nesting_defect = kernel_nesting_defect(&tilde_a);
    if nesting_defect > FLAG_TOL {
        let index = (0..k.saturating_sub(1))
            .find(|&i| pair_nesting_defect(&tilde_a[i], &tilde_a[i + 1]) > FLAG_TOL)
            .unwrap_or(0);
        return Err(Error::FlagConditionViolated {
            index,
            defect: nesting_defect,
        });
    }
    Ok(FlagTransform {
        tilde_a,
        tilde_c,
        nesting_defect,
    })
}

fn pair_nesting_defect(outer: &PsdMatrix, inner: &PsdMatrix) -> f64 {
    let ker = outer.kernel_basis();
    if ker.ncols() == 0 {
        return 0.0;
    }
    (inner.matrix() * ker).amax() / scale_of(inner.matrix())
}

/// Largest relative defect of `Ker M_i ⊆ Ker M_{i+1}` over consecutive pairs.
pub fn kernel_nesting_defect(mats: &[PsdMatrix]) -> f64 {
    mats.windows(2)
        .map(|w| pair_nesting_defect(&w[0], &w[1]))
        .fold(0.0, f64::max)
}

/// Orthonormal basis adapted to a flag of PSD matrices.
#[derive(Debug, Clone)]
pub struct FlagBasis {
    /// Columns: first `ranks[k-1]` span `Im M_k`, the first `ranks[i]` span
    /// `Im M_i`, remaining columns span `Ker M_1`.
    pub u: DMatrix<f64>,
    pub ranks: Vec<usize>,
}

/// Basis in which each `u^t M_i u` is `diag(M_i'', 0)` with `M_i''` of size
/// `rank M_i`. Requires the flag condition `Ker M_i ⊆ Ker M_{i+1}`.
pub fn flag_adapted_basis(mats: &[PsdMatrix]) -> Result<FlagBasis> {
    let g = common_dim(mats)?;
    for (i, w) in mats.windows(2).enumerate() {
        let defect = pair_nesting_defect(&w[0], &w[1]);
        if defect > FLAG_TOL {
            return Err(Error::FlagConditionViolated { index: i, defect });
        }
    }
    let ranks: Vec<usize> = mats.iter().map(PsdMatrix::rank).collect();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(g);
    let project_out = |v: &DVector<f64>, basis: &[DVector<f64>]| {
        let mut w = v.clone();
        for b in basis {
            w -= b * b.dot(v);
        }
        w
    };
    for m in mats.iter().rev() {
        let img = m.image_basis();
        let mut proj = DMatrix::zeros(g, g);
        for col in img.column_iter() {
            let w = project_out(&col.into_owned(), &basis);
            proj += &w * w.transpose();
        }
        let (vals, vecs) = sorted_eigen(&proj);
        for (j, &l) in vals.iter().enumerate() {
            if l > 0.5 && basis.len() < g {
                basis.push(vecs.column(j).into_owned());
            }
        }
    }
    let mut rest = DMatrix::identity(g, g);
    for b in &basis {
        rest -= b * b.transpose();
    }
    let (vals, vecs) = sorted_eigen(&rest);
    for (j, &l) in vals.iter().enumerate() {
        if l > 0.5 && basis.len() < g {
            basis.push(vecs.column(j).into_owned());
        }
    }
    if basis.len() != g {
        return Err(Error::FlagConditionViolated {
            index: 0,
            defect: (g - basis.len()) as f64,
        });
    }
    Ok(FlagBasis {
        u: DMatrix::from_columns(&basis),
        ranks,
    })
}
