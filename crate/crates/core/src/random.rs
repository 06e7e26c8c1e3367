//! Seeded random instances with exact rational data.
//!
//! `A_i = G_i^t G_i` with `G_i` an integer `rho x g` matrix (`rho` uniform in
//! `1..=g`, entries in `[-3, 3]`, redrawn until non-zero); `c_i` and `a` have
//! entries `p/q` with `p` in `[-6, 6]` and `q` in `{1, 2, 3}`;
//! `B = B0^t B0 + E` with `B0` integral in `[-2, 2]` and `E` symmetric with
//! entries in `{-0.3, ..., 0.3}`. `kappa` is twice the least `t` for which
//! `P(t, ..., t)` has least eigenvalue above 0.1 on every sample, rounded up
//! to a multiple of 1/1000.

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::biext_metric::{
    CMatrix, CVector, MatrixPolynomial, PeriodModel, PolarizationType, VectorPolynomial, MAX_DEGREE,
};
use crate::io::{Matrix, NormlikeFile, SampleFile, Scalar, Vector, SCHEMA_VERSION};
use crate::normlike::{least_eigenvalue, NormlikeInstance};
use crate::psd_linalg::PsdMatrix;

/// Seed used when neither a flag nor `NORMLIKE_SEED` gives one.
pub const DEFAULT_SEED: u64 = 0xC0FFEE;

/// Parses a hexadecimal seed, with or without a `0x` prefix.
pub fn parse_seed(s: &str) -> Option<u64> {
    let t = s.trim();
    let t = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")).unwrap_or(t);
    u64::from_str_radix(t, 16).ok()
}

/// `NORMLIKE_SEED` if set and valid, else [`DEFAULT_SEED`].
pub fn default_seed() -> u64 {
    std::env::var("NORMLIKE_SEED")
        .ok()
        .and_then(|s| parse_seed(&s))
        .unwrap_or(DEFAULT_SEED)
}

/// Shape constraints for generated instances; `None` draws the value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GenOptions {
    /// Matrix size, drawn from `1..=6`.
    pub g: Option<usize>,
    /// Number of variables, drawn from `1..=4`.
    pub k: Option<usize>,
    /// Number of parameter samples, drawn from `1..=2`.
    pub samples: Option<usize>,
}

const LEAST_EIGENVALUE: f64 = 0.1;
const T_LIMIT: f64 = 1e6;

fn rational(rng: &mut ChaCha8Rng) -> Scalar {
    let p = rng.random_range(-6..=6);
    let q = rng.random_range(1..=3);
    Scalar::ratio(p, q)
}

fn to_f64(m: &Matrix) -> DMatrix<f64> {
    let n = m.len();
    DMatrix::from_fn(n, n, |i, j| m[i][j].value("").expect("generated scalars are finite"))
}

fn gram(rng: &mut ChaCha8Rng, rows: usize, g: usize, bound: i64) -> Vec<Vec<i64>> {
    let gm: Vec<Vec<i64>> = (0..rows)
        .map(|_| (0..g).map(|_| rng.random_range(-bound..=bound)).collect())
        .collect();
    (0..g)
        .map(|i| (0..g).map(|j| gm.iter().map(|row| row[i] * row[j]).sum()).collect())
        .collect()
}

fn draw_a(rng: &mut ChaCha8Rng, g: usize) -> Matrix {
    loop {
        let rho = rng.random_range(1..=g);
        let m = gram(rng, rho, g, 3);
        if m.iter().flatten().any(|&v| v != 0) {
            return m
                .into_iter()
                .map(|r| r.into_iter().map(Scalar::Int).collect())
                .collect();
        }
    }
}

fn draw_b(rng: &mut ChaCha8Rng, g: usize) -> Matrix {
    let base = gram(rng, g, g, 2);
    let mut tenths = vec![vec![0i64; g]; g];
    for i in 0..g {
        for j in i..g {
            let p = rng.random_range(-3..=3);
            tenths[i][j] = p;
            tenths[j][i] = p;
        }
    }
    (0..g)
        .map(|i| {
            (0..g)
                .map(|j| Scalar::ratio(10 * base[i][j] + tenths[i][j], 10))
                .collect()
        })
        .collect()
}

/// Least `t ≥ 0` with `λ_min(t Σ A_i + B) > 0.1` for every `B`, if below the limit.
fn threshold(sum_a: &DMatrix<f64>, bs: &[DMatrix<f64>]) -> Option<f64> {
    let ok = |t: f64| bs.iter().all(|b| least_eigenvalue(&(sum_a * t + b)) > LEAST_EIGENVALUE);
    if ok(0.0) {
        return Some(0.0);
    }
    let mut hi = 1.0;
    while !ok(hi) {
        hi *= 2.0;
        if hi > T_LIMIT {
            return None;
        }
    }
    let mut lo = hi / 2.0;
    if !ok(lo) && lo < 1.0 {
        lo = 0.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-9 * hi {
            break;
        }
    }
    Some(hi)
}

/// The `index`-th instance file of the stream seeded by `seed`.
pub fn random_file(seed: u64, index: u64, opts: &GenOptions) -> NormlikeFile {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let g = opts.g.unwrap_or_else(|| rng.random_range(1..=6));
    let k = opts.k.unwrap_or_else(|| rng.random_range(1..=4));
    let ns = opts.samples.unwrap_or_else(|| rng.random_range(1..=2));
    let a_mats: Vec<Matrix> = (0..k).map(|_| draw_a(&mut rng, g)).collect();
    let c: Vec<Vector> = (0..k).map(|_| (0..g).map(|_| rational(&mut rng)).collect()).collect();
    let sum_a = a_mats.iter().fold(DMatrix::zeros(g, g), |acc, m| acc + to_f64(m));
    loop {
        let samples: Vec<SampleFile> = (0..ns)
            .map(|i| SampleFile {
                lambda: if ns > 1 {
                    vec![Scalar::Int(i as i64)]
                } else {
                    Vec::new()
                },
                a: (0..g).map(|_| rational(&mut rng)).collect(),
                b: draw_b(&mut rng, g),
            })
            .collect();
        let bs: Vec<DMatrix<f64>> = samples.iter().map(|s| to_f64(&s.b)).collect();
        let Some(t) = threshold(&sum_a, &bs) else {
            continue;
        };
        let milli = (2000.0 * t).ceil() as i64;
        let (a, b, samples) = if ns == 1 {
            let s = samples.into_iter().next().expect("one sample");
            (Some(s.a), Some(s.b), None)
        } else {
            (None, None, Some(samples))
        };
        return NormlikeFile {
            schema_version: SCHEMA_VERSION.to_string(),
            kind: "normlike".to_string(),
            seed: Some(format!("{seed:#x}")),
            tolerances: None,
            g,
            k,
            kappa: Scalar::ratio(milli, 1000),
            a_mats,
            c,
            a,
            b,
            samples,
        };
    }
}

/// The instance of [`random_file`].
pub fn random_instance(seed: u64, index: u64, opts: &GenOptions) -> NormlikeInstance {
    random_file(seed, index, opts)
        .to_instance()
        .expect("generated files are valid")
}

/// A random period model with `g = 1..=4`, `k = 1..=3`, `n = k + 0..=1`,
/// principal polarization, `A_j` integral Gram matrices, integral `c_j`,
/// `psi = X + i(I + B0^t B0) + (small polynomial terms)` and a random
/// polynomial `alpha`. `Im psi` stays positive definite on the polydisk of
/// radius `e^{-1}`.
pub fn random_period_model(seed: u64, index: u64) -> PeriodModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5E_ED0F_0DE1);
    rng.set_stream(index);
    let g = rng.random_range(1..=4);
    let k = rng.random_range(1..=3);
    let n = k + rng.random_range(0..=1);
    let a: Vec<PsdMatrix> = (0..k)
        .map(|_| {
            let m = draw_a(&mut rng, g);
            PsdMatrix::new(to_f64(&m)).expect("Gram matrices are PSD")
        })
        .collect();
    let c: Vec<DVector<f64>> = (0..k)
        .map(|_| DVector::from_fn(g, |_, _| rng.random_range(-3..=3) as f64))
        .collect();
    let base = gram(&mut rng, g, g, 1);
    let mut psi = MatrixPolynomial::constant(
        n,
        CMatrix::from_fn(g, g, |i, j| {
            let im = base[i][j] as f64 + if i == j { 1.0 } else { 0.0 };
            Complex::new(0.0, im)
        }),
    )
    .expect("constant term is symmetric");
    let re0 = sym(&mut rng, g, 1.0);
    psi.push_term(vec![0; n], re0.map(|x| Complex::new(x, 0.0)))
        .expect("symmetric");
    let mut alpha = VectorPolynomial::zero(g, n);
    for _ in 0..rng.random_range(0..=3) {
        let e = exponents(&mut rng, n);
        let re = sym(&mut rng, g, 0.1);
        let im = sym(&mut rng, g, 0.1);
        psi.push_term(e, CMatrix::from_fn(g, g, |i, j| Complex::new(re[(i, j)], im[(i, j)])))
            .expect("symmetric coefficient of bounded degree");
    }
    for _ in 0..rng.random_range(1..=3) {
        let e = exponents(&mut rng, n);
        let v = CVector::from_fn(g, |_, _| {
            Complex::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        alpha.push_term(e, v).expect("bounded degree");
    }
    let orders = (0..k).map(|_| rng.random_range(-2..=2)).collect();
    PeriodModel::new(PolarizationType::principal(g), n, a, c, psi, alpha, orders).expect("generated models are valid")
}

fn sym(rng: &mut ChaCha8Rng, g: usize, scale: f64) -> DMatrix<f64> {
    let m = DMatrix::from_fn(g, g, |_, _| rng.random_range(-scale..=scale));
    (&m + m.transpose()) * 0.5
}

fn exponents(rng: &mut ChaCha8Rng, n: usize) -> Vec<u32> {
    let mut e = vec![0u32; n];
    let degree = rng.random_range(1..=MAX_DEGREE);
    for _ in 0..degree {
        e[rng.random_range(0..n)] += 1;
    }
    e
}

/// A random point of the punctured polydisk of radius `radius` with
/// `|q_j| = e^{-x_j}` for the first `k` coordinates.
pub fn random_polydisk_point(rng: &mut ChaCha8Rng, model: &PeriodModel, x_max: f64) -> Vec<Complex<f64>> {
    let kappa = model.kappa();
    (0..model.n())
        .map(|j| {
            let theta = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
            let r = if j < model.k() {
                (-rng.random_range(kappa * 1.001..x_max)).exp()
            } else {
                model.epsilon() * rng.random_range(0.0..0.999)
            };
            Complex::from_polar(r, theta)
        })
        .collect()
}
