//! The invariant suite behind `check-suite`.
//!
//! Every check reduces to a non-negative defect per instance; the reported
//! value is the largest defect and the check passes when it is within the
//! tolerance. Instances are processed in parallel and the per-instance
//! defects are combined in instance order, so reports do not depend on
//! scheduling.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::biext_metric::{
    biext_pairing, check_riemann, polarized_exponent, CMatrix, CVector, MatrixPolynomial, PeriodModel,
    PolarizationType, VectorPolynomial,
};
use crate::error::Result;
use crate::heightjump::{height_jump, pullback_orders, TestCurve};
use crate::normlike::{FlagForm, NormlikeInstance, ProbeSpec};
use crate::psd_linalg::{
    block_inverse, flag_transform, pseudo_inverse, schur_complement, simultaneous_reduce, BlockPartition, PsdMatrix,
};
use crate::random::{random_instance, random_period_model, random_polydisk_point, GenOptions};
use crate::report::Check;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Property tolerance.
    pub tol: f64,
    /// Eigen/inverse and homogeneity tolerance.
    pub fine_tol: f64,
    pub slope_tol: f64,
    /// Largest ray parameter for the boundedness check.
    pub t_max: f64,
    /// Random probes per instance.
    pub probes: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: crate::random::DEFAULT_SEED,
            tol: 1e-9,
            fine_tol: 1e-10,
            slope_tol: 0.2,
            t_max: 1e6,
            probes: 50,
        }
    }
}

pub fn random_instances(seed: u64, count: usize) -> Vec<NormlikeInstance> {
    (0..count as u64)
        .into_par_iter()
        .map(|i| random_instance(seed, i, &GenOptions::default()))
        .collect()
}

pub fn random_models(seed: u64, count: usize) -> Vec<PeriodModel> {
    (0..count as u64).map(|i| random_period_model(seed, i)).collect()
}

fn rng_for(cfg: &SuiteConfig, index: usize, salt: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(cfg.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    r.set_stream(index as u64);
    r
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.random_range(lo.log10()..=hi.log10()))
}

fn point(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    (0..k).map(|_| log_uniform(rng, 1e-2, 1e2)).collect()
}

fn rel(excess: f64, scale: f64) -> f64 {
    excess.max(0.0) / scale.abs().max(1.0)
}

type InstanceCheck = fn(&NormlikeInstance, &mut ChaCha8Rng, &SuiteConfig) -> Result<f64>;

/// Largest defect over the items, `inf` if any evaluation failed.
fn worst<T: Sync>(
    items: &[T],
    salt: u64,
    cfg: &SuiteConfig,
    f: impl Fn(&T, &mut ChaCha8Rng) -> Result<f64> + Sync,
) -> f64 {
    items
        .par_iter()
        .enumerate()
        .map(|(i, item)| {
            let mut rng = rng_for(cfg, i, salt);
            match f(item, &mut rng) {
                Ok(v) if !v.is_nan() => v,
                _ => f64::INFINITY,
            }
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .fold(0.0, f64::max)
}

fn sum_a(inst: &NormlikeInstance) -> DMatrix<f64> {
    inst.weighted_sum(&vec![1.0; inst.k()])
}

fn moore_penrose(inst: &NormlikeInstance, _: &mut ChaCha8Rng, _: &SuiteConfig) -> Result<f64> {
    let s = sum_a(inst);
    let p = pseudo_inverse(&PsdMatrix::new(s.clone())?);
    let (ns, np) = (s.norm().max(1e-300), p.norm().max(1e-300));
    Ok([
        (&s * &p * &s - &s).norm() / ns,
        (&p * &s * &p - &p).norm() / np,
        (&s * &p - (&s * &p).transpose()).norm(),
        (&p * &s - (&p * &s).transpose()).norm(),
    ]
    .into_iter()
    .fold(0.0, f64::max))
}

fn block_inverse_identity(inst: &NormlikeInstance, rng: &mut ChaCha8Rng, _: &SuiteConfig) -> Result<f64> {
    let g = inst.g();
    if g < 2 {
        return Ok(0.0);
    }
    let x = vec![2.0 * inst.kappa().max(1.0); inst.k()];
    let mut worst = 0.0_f64;
    for lambda in 0..inst.samples().len() {
        let p = inst.p_matrix(&x, lambda)?;
        let split = BlockPartition::new(g, rng.random_range(1..g))?;
        let inv = block_inverse(&p, split)?;
        worst = worst.max((inv * &p - DMatrix::identity(g, g)).amax());
    }
    Ok(worst)
}

fn reduce_reconstruction(inst: &NormlikeInstance, _: &mut ChaCha8Rng, _: &SuiteConfig) -> Result<f64> {
    let red = simultaneous_reduce(inst.matrices())?;
    let u1 = red.u.columns(0, red.r);
    Ok(red
        .blocks
        .iter()
        .zip(inst.matrices())
        .map(|(b, a)| (u1 * b.matrix() * u1.transpose() - a.matrix()).norm() / a.matrix().norm().max(1e-300))
        .fold(0.0, f64::max))
}

fn schur_psd(inst: &NormlikeInstance, rng: &mut ChaCha8Rng, _: &SuiteConfig) -> Result<f64> {
    let g = inst.g();
    if g < 2 {
        return Ok(0.0);
    }
    let x = vec![2.0 * inst.kappa().max(1.0); inst.k()];
    let p = inst.p_matrix(&x, 0)?;
    let s = schur_complement(&p, BlockPartition::new(g, rng.random_range(1..g))?)?;
    let least = crate::normlike::least_eigenvalue(&s);
    Ok((-least).max(0.0) / p.amax().max(1.0))
}

fn flag_identity(inst: &NormlikeInstance, rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<f64> {
    let ft = flag_transform(inst.matrices(), inst.vectors())?;
    let mut worst = 0.0_f64;
    for _ in 0..cfg.probes {
        let mut x = point(rng, inst.k());
        x.sort_by(f64::total_cmp);
        let y: Vec<f64> = (0..x.len())
            .map(|i| if i == 0 { x[0] } else { x[i] - x[i - 1] })
            .collect();
        let g = inst.g();
        let (mut s, mut v) = (DMatrix::zeros(g, g), DVector::zeros(g));
        for ((a, c), yi) in ft.tilde_a.iter().zip(&ft.tilde_c).zip(&y) {
            s += a.matrix() * *yi;
            v += a.matrix() * c * *yi;
        }
        let s0 = inst.weighted_sum(&x);
        let v0 = inst.weighted_image(&x);
        worst = worst
            .max((&s - &s0).amax() / s0.amax().max(1.0))
            .max((&v - &v0).amax() / v0.amax().max(1.0));
    }
    Ok(worst)
}

fn positivity(inst: &NormlikeInstance, _: &mut ChaCha8Rng, _: &SuiteConfig) -> Result<f64> {
    let d = inst.validate()?;
    Ok(match d.least_eigenvalue {
        Some(l) if l > 0.0 => 0.0,
        Some(_) => f64::INFINITY,
        None => 0.0,
    })
}

fn recession_oracle(inst: &NormlikeInstance, rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<f64> {
    let mut worst = 0.0_f64;
    for _ in 0..cfg.probes {
        let x = point(rng, inst.k());
        let f = inst.recession().eval(&x)?;
        let v = inst.weighted_image(&x);
        let o = v.dot(&(pseudo_inverse(&PsdMatrix::new(inst.weighted_sum(&x))?) * &v));
        worst = worst.max((f - o).abs() / f.abs().max(o.abs()).max(1e-300));
    }
    Ok(worst)
}

fn homogeneity(inst: &NormlikeInstance, rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<f64> {
    let f = inst.recession();
    let mut worst = 0.0_f64;
    for _ in 0..cfg.probes {
        let x = point(rng, inst.k());
        let fx = f.eval(&x)?;
        for mu in [0.5, 2.0, 10.0] {
            let xs: Vec<f64> = x.iter().map(|v| v * mu).collect();
            let d = (f.eval(&xs)? - mu * fx).abs();
            worst = worst.max(if fx == 0.0 { d } else { d / (mu * fx).abs() });
        }
    }
    Ok(worst)
}

fn convexity(inst: &NormlikeInstance, rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<f64> {
    let f = inst.recession();
    let mut worst = 0.0_f64;
    for _ in 0..cfg.probes {
        let (x, y) = (point(rng, inst.k()), point(rng, inst.k()));
        let (fx, fy) = (f.eval(&x)?, f.eval(&y)?);
        for t in [0.25, 0.5, 0.75] {
            let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| t * a + (1.0 - t) * b).collect();
            let rhs = t * fx + (1.0 - t) * fy;
            worst = worst.max(rel(f.eval(&z)? - rhs, rhs));
        }
    }
    Ok(worst)
}

fn face_point(rng: &mut ChaCha8Rng, k: usize) -> Vec<f64> {
    point(rng, k)
        .into_iter()
        .map(|v| if rng.random_bool(0.3) { 0.0 } else { v })
        .collect()
}

fn subadditivity(inst: &NormlikeInstance, rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<f64> {
    let f = inst.recession();
    let mut worst = 0.0_f64;
    for _ in 0..cfg.probes {
        let (x, y) = (face_point(rng, inst.k()), face_point(rng, inst.k()));
        let s: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let rhs = f.eval_extended(&x)? + f.eval_extended(&y)?;
        worst = worst.max(rel(f.eval_extended(&s)? - rhs, rhs));
        let axes: f64 = x.iter().zip(f.mu()).map(|(a, m)| a * m).sum();
        worst = worst.max(rel(f.eval_extended(&x)? - axes, axes));
    }
    Ok(worst)
}

/// Points with `0 < x_1 ≤ ... ≤ x_k` on the simplex, as flag variables.
fn sorted_simplex(rng: &mut ChaCha8Rng, k: usize, count: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    (0..count)
        .map(|_| {
            let mut x: Vec<f64> = (0..k).map(|_| rng.random_range(1e-3..1.0)).collect();
            let s: f64 = x.iter().sum();
            x.iter_mut().for_each(|v| *v /= s);
            x.sort_by(f64::total_cmp);
            let y = (0..k).map(|i| if i == 0 { x[0] } else { x[i] - x[i - 1] }).collect();
            (x, y)
        })
        .collect()
}

fn simplex_bound(inst: &NormlikeInstance, rng: &mut ChaCha8Rng, _: &SuiteConfig) -> Result<f64> {
    let Ok(ff) = FlagForm::from_instance(inst) else {
        return Ok(0.0);
    };
    let pts = sorted_simplex(rng, inst.k(), 1000);
    let ys: Vec<Vec<f64>> = pts.iter().map(|(_, y)| y.clone()).collect();
    let c4 = ff.recession_entry_constant(&ys)?;
    let r = ff.rank();
    let mut worst = 0.0_f64;
    for (x, y) in &pts {
        let bound: f64 = (0..r)
            .flat_map(|a| (0..r).map(move |b| (a, b)))
            .map(|(a, b)| c4 * ff.level_weight(y, a.max(b) + 1))
            .sum();
        let f = inst.recession().eval(x)?;
        if !f.is_finite() {
            return Ok(f64::INFINITY);
        }
        worst = worst.max(rel(f - bound * (1.0 + 1e-12), bound));
    }
    Ok(worst)
}

fn face_continuity(inst: &NormlikeInstance, rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<f64> {
    let k = inst.k();
    if k < 2 {
        return Ok(0.0);
    }
    let f = inst.recession();
    let mut worst = 0.0_f64;
    for _ in 0..cfg.probes {
        let support: Vec<bool> = loop {
            let s: Vec<bool> = (0..k).map(|_| rng.random_bool(0.5)).collect();
            if s.iter().any(|&b| b) && !s.iter().all(|&b| b) {
                break s;
            }
        };
        let x = point(rng, k);
        let c = point(rng, k);
        let face: Vec<f64> = (0..k).map(|i| if support[i] { x[i] } else { 0.0 }).collect();
        let limit = f.eval_extended(&face)?;
        let d = |lambda: f64| -> Result<f64> {
            let p: Vec<f64> = (0..k).map(|i| if support[i] { x[i] } else { c[i] / lambda }).collect();
            Ok((f.eval(&p)? - limit).abs())
        };
        // d(lambda) ~ C/lambda only past an instance-dependent scale, so walk out
        // until evaluation gives up and judge the last step.
        let mut seen = Vec::new();
        for j in 6..=16 {
            match d(10f64.powi(j)) {
                Ok(v) => seen.push(v),
                Err(_) => break,
            }
        }
        let scale = limit.abs().max(1.0);
        if let [.., near, far] = seen[..] {
            worst = worst.max((far - 0.2 * near).max(0.0) / scale);
            worst = worst.max((far - 1e-6 * scale).max(0.0) / scale);
        }
    }
    Ok(worst)
}

fn start_point(inst: &NormlikeInstance, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let base = inst.kappa().max(1e-2);
    (0..inst.k()).map(|_| base * rng.random_range(1.0..10.0)).collect()
}

fn recession_limit(inst: &NormlikeInstance, rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<f64> {
    let mut worst = 0.0_f64;
    for _ in 0..cfg.probes.min(20) {
        let x = start_point(inst, rng);
        let fx = inst.recession().eval(&x)?;
        for lambda in 0..inst.samples().len() {
            let c = |mu: f64| -> Result<f64> {
                let xs: Vec<f64> = x.iter().map(|v| v * mu).collect();
                Ok((inst.eval_phi(&xs, lambda)? - mu * fx).abs())
            };
            let (c2, c4, c6) = (c(1e2)?, c(1e4)?, c(1e6)?);
            // C(mu) = mu |phi(mu x)/mu - f(x)| must stay bounded; allow rounding of phi(mu x)
            let excess = c6 - 2.0 * c2.max(c4) - cfg.tol * 1e6 * fx.max(1.0);
            worst = worst.max(excess.max(0.0) / c2.max(c4).max(1.0));
        }
    }
    Ok(worst)
}

fn phi0_closed_form(inst: &NormlikeInstance, rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<f64> {
    if inst.k() != 1 {
        return Ok(0.0);
    }
    let mut worst = 0.0_f64;
    for _ in 0..cfg.probes {
        let x = inst.kappa().max(1e-2) * log_uniform(rng, 1.5, 1e3);
        for lambda in 0..inst.samples().len() {
            let a = inst.phi0(&[x], lambda)?;
            let b = inst.phi0_k1_closed(x, lambda)?;
            // the closed form solves with the full P, so it carries eps * cond(P) rounding
            let ev = inst.p_matrix(&[x], lambda)?.symmetric_eigenvalues();
            let allowance = 64.0 * f64::EPSILON * ev.max() / ev.min() * a.abs().max(b.abs());
            worst = worst.max(rel((a - b).abs() - allowance, a.abs().max(b.abs())));
        }
    }
    Ok(worst)
}

fn phi0_bounded(inst: &NormlikeInstance, rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<f64> {
    let dirs: Vec<Vec<f64>> = (0..10)
        .map(|_| (0..inst.k()).map(|_| rng.random_range(0.1..=1.0)).collect())
        .collect();
    let rep = inst.asymptotics_report(&dirs, cfg.t_max);
    if !rep.bounded_sup.is_finite() {
        return Ok(f64::INFINITY);
    }
    Ok(rep.max_tail_increase(1e3))
}

fn decay_exponents(inst: &NormlikeInstance, _: &mut ChaCha8Rng, _: &SuiteConfig) -> Result<f64> {
    if inst.k() != 1 {
        return Ok(0.0);
    }
    let rep = inst.asymptotics_report(&[], 1.0);
    Ok(rep
        .exponent_fits
        .iter()
        .zip(0..)
        .filter(|&(f, _)| {
            let limit = inst.phi0_ray_limit(&[1.0], f.lambda).unwrap_or(0.0);
            inst.k1_decay_coefficient(f.lambda).unwrap_or(0.0) > 1e-6 * (1.0 + limit.abs())
        })
        .map(|(f, _)| (f.slope_first + 2.0).abs().max((f.slope_second + 3.0).abs()))
        .fold(0.0, f64::max))
}

fn block_expansion(inst: &NormlikeInstance, _: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<f64> {
    if inst.k() != 1 {
        return Ok(0.0);
    }
    let mut worst = 0.0_f64;
    for lambda in 0..inst.samples().len() {
        let exp = inst.k1_inverse_expansion(lambda)?;
        let s = inst.k1_asymptotic_scale(lambda)?;
        let c = |x: f64| -> Result<f64> { Ok(exp.remainders(inst, x)?.0 * x * x) };
        let (c1, c3) = (c(10.0 * s)?, c(1000.0 * s)?);
        // entries of P^-1 carry about eps * cond(P) / lambda_min(P) rounding
        let ev = inst.p_matrix(&[1000.0 * s], lambda)?.symmetric_eigenvalues();
        let roundoff = 64.0 * f64::EPSILON * ev.max() / (ev.min() * ev.min());
        let allowance = (cfg.tol + roundoff) * (1000.0 * s).powi(2);
        worst = worst.max((c3 - 2.0 * c1 - allowance).max(0.0) / c1.max(1.0));
    }
    Ok(worst)
}

fn main_estimate_spread(inst: &NormlikeInstance, rng: &mut ChaCha8Rng, _: &SuiteConfig) -> Result<f64> {
    let Ok(ff) = FlagForm::from_instance(inst) else {
        return Ok(0.0);
    };
    let s: u64 = rng.random();
    let a = ff.inverse_entry_bound_check(&ProbeSpec::new(2000, s))?;
    let b = ff.inverse_entry_bound_check(&ProbeSpec::new(2000, s ^ 1))?;
    if !(a.c.is_finite() && b.c.is_finite()) {
        return Ok(f64::INFINITY);
    }
    Ok((a.c - b.c).abs() / a.c.max(b.c).max(1e-300))
}

fn neumann_within_bound(inst: &NormlikeInstance, rng: &mut ChaCha8Rng, _: &SuiteConfig) -> Result<f64> {
    let Ok(ff) = FlagForm::from_instance(inst) else {
        return Ok(0.0);
    };
    let est = ff.inverse_entry_bound_check(&ProbeSpec::new(500, rng.random()))?;
    let kp = ff.kappa_prime(est.c);
    let mut worst = 0.0_f64;
    for lambda in 0..inst.samples().len() {
        let mut y: Vec<f64> = (0..ff.k()).map(|_| log_uniform(rng, 1e-3, 1e3)).collect();
        y[0] = 2.0 * kp * log_uniform(rng, 1.0, 10.0);
        let q = ff.neumann_q(&y, lambda, 20)?;
        let d = ff.direct_q(&y, lambda)?;
        let err = (&q.partial_sum - &d).amax();
        worst = worst.max((err - q.tail_bound * (1.0 + 1e-6) - 1e-12 * d.amax()).max(0.0) / d.amax());
    }
    Ok(worst)
}

fn curve(rng: &mut ChaCha8Rng, k: usize) -> TestCurve {
    loop {
        let m: Vec<u64> = (0..k).map(|_| rng.random_range(0..=10)).collect();
        if let Ok(c) = TestCurve::new(m) {
            return c;
        }
    }
}

fn jump_effective(inst: &NormlikeInstance, rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<f64> {
    let mut worst = 0.0_f64;
    for _ in 0..cfg.probes {
        let c = curve(rng, inst.k());
        let lin = crate::heightjump::linear_part(inst, &c)?;
        worst = worst.max(rel(-height_jump(inst, &c)?, lin));
    }
    Ok(worst)
}

fn jump_scaling(inst: &NormlikeInstance, rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<f64> {
    let mut worst = 0.0_f64;
    for _ in 0..cfg.probes {
        let c = curve(rng, inst.k());
        let t = rng.random_range(2..=7u64);
        let j = height_jump(inst, &c)?;
        let jt = height_jump(inst, &c.scaled(t)?)?;
        let lin = crate::heightjump::linear_part(inst, &c)? * t as f64;
        worst = worst.max(rel((jt - t as f64 * j).abs(), lin));
    }
    Ok(worst)
}

fn nu_invariance(inst: &NormlikeInstance, rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<f64> {
    let mut worst = 0.0_f64;
    for _ in 0..cfg.probes {
        let c = curve(rng, inst.k());
        let nu: Vec<f64> = (0..inst.k()).map(|_| rng.random_range(-5..=5) as f64).collect();
        let shifted: Vec<f64> = nu.iter().map(|v| v + rng.random_range(-3..=3) as f64).collect();
        let a = pullback_orders(inst, &c, &nu)?;
        let b = pullback_orders(inst, &c, &shifted)?;
        worst = worst
            .max((a.jump - b.jump).abs())
            .max((a.jump - height_jump(inst, &c)?).abs());
    }
    Ok(worst)
}

const INSTANCE_CHECKS: &[(&str, InstanceCheck, Tol)] = &[
    ("psd.moore_penrose", moore_penrose, Tol::Property),
    ("psd.block_inverse", block_inverse_identity, Tol::Property),
    ("psd.reduce_reconstruction", reduce_reconstruction, Tol::Property),
    ("psd.schur_psd", schur_psd, Tol::Property),
    ("psd.flag_identity", flag_identity, Tol::Property),
    ("normlike.positivity", positivity, Tol::Zero),
    ("normlike.recession_oracle", recession_oracle, Tol::Property),
    ("normlike.homogeneity", homogeneity, Tol::Fine),
    ("normlike.convexity", convexity, Tol::Property),
    ("normlike.subadditivity", subadditivity, Tol::Property),
    ("normlike.simplex_bound", simplex_bound, Tol::Property),
    ("normlike.face_continuity", face_continuity, Tol::Property),
    ("normlike.recession_limit", recession_limit, Tol::Zero),
    ("normlike.phi0_closed_form", phi0_closed_form, Tol::Property),
    ("normlike.phi0_bounded", phi0_bounded, Tol::Tail),
    ("normlike.decay_exponents", decay_exponents, Tol::Slope),
    ("normlike.block_expansion", block_expansion, Tol::Zero),
    ("normlike.main_estimate_stable", main_estimate_spread, Tol::Stability),
    ("normlike.neumann_tail_bound", neumann_within_bound, Tol::Zero),
    ("heightjump.effective", jump_effective, Tol::Property),
    ("heightjump.scaling", jump_scaling, Tol::Property),
    ("heightjump.nu_invariance", nu_invariance, Tol::Exact),
];

#[derive(Debug, Clone, Copy)]
enum Tol {
    Zero,
    Exact,
    Fine,
    Property,
    Slope,
    Tail,
    Stability,
}

impl Tol {
    fn value(self, cfg: &SuiteConfig) -> f64 {
        match self {
            Tol::Zero => 0.0,
            Tol::Exact => 1e-12,
            Tol::Fine => cfg.fine_tol,
            Tol::Property => cfg.tol,
            Tol::Slope => cfg.slope_tol,
            Tol::Tail => 1e-6,
            Tol::Stability => 0.05,
        }
    }
}

/// Normlike, PSD and height-jump checks over `instances`.
pub fn instance_checks(instances: &[NormlikeInstance], cfg: &SuiteConfig) -> Vec<Check> {
    INSTANCE_CHECKS
        .iter()
        .enumerate()
        .map(|(salt, (name, f, tol))| {
            let observed = worst(instances, salt as u64, cfg, |inst, rng| f(inst, rng, cfg));
            Check::at_most(*name, observed, tol.value(cfg))
        })
        .collect()
}

fn random_period_point(rng: &mut ChaCha8Rng, pol: &PolarizationType) -> Result<(CMatrix, CVector, CVector)> {
    let g = pol.g();
    let h = DMatrix::from_fn(g, g, |_, _| rng.random_range(-1.0..1.0));
    let y = &h * h.transpose() + DMatrix::identity(g, g) * 0.05;
    let x = DMatrix::from_fn(g, g, |_, _| rng.random_range(-1.0..1.0));
    let x = (&x + x.transpose()) * 0.5;
    let omega = CMatrix::from_fn(g, g, |i, j| Complex::new(x[(i, j)], y[(i, j)]) / pol.delta()[i] as f64);
    let v = |rng: &mut ChaCha8Rng| {
        CVector::from_fn(g, |_, _| {
            Complex::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0))
        })
    };
    Ok((omega, v(rng), v(rng)))
}

fn random_polarization(rng: &mut ChaCha8Rng) -> Result<PolarizationType> {
    let g = rng.random_range(1..=4);
    PolarizationType::new((0..g).map(|_| rng.random_range(1..=3)).collect())
}

fn metric_exponent(_: &(), rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<f64> {
    let mut worst = 0.0_f64;
    for _ in 0..cfg.probes * 10 {
        let pol = random_polarization(rng)?;
        let (omega, d, _) = random_period_point(rng, &pol)?;
        let pp = check_riemann(&pol, &omega)?;
        worst = worst.max(-polarized_exponent(&pol, &pp, &d)?);
    }
    Ok(worst.max(0.0))
}

fn polarization_identity(_: &(), rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<f64> {
    let mut worst = 0.0_f64;
    for _ in 0..cfg.probes * 10 {
        let pol = random_polarization(rng)?;
        let (omega, d1, d2) = random_period_point(rng, &pol)?;
        let pp = check_riemann(&pol, &omega)?;
        let q = |d: &CVector| polarized_exponent(&pol, &pp, d);
        let lhs = q(&(&d1 + &d2))?;
        let rhs = q(&d1)? + 2.0 * biext_pairing(&pol, &pp, &d1, &d2)? + q(&d2)?;
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0));
    }
    Ok(worst)
}

fn bridge(model: &PeriodModel, rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<f64> {
    let mut worst = 0.0_f64;
    for _ in 0..cfg.probes {
        let q = random_polydisk_point(rng, model, 40.0);
        let x = model.x_of(&q);
        let linear: f64 = model.h_orders().iter().zip(&x).map(|(&o, xj)| o as f64 * xj).sum();
        let lhs = model.log_norm_section(&q)? - linear;
        let inst = model.to_normlike(std::slice::from_ref(&q))?;
        let rhs = inst.eval_phi(&x, 0)?;
        worst = worst.max((lhs - rhs).abs() / lhs.abs().max(1.0));
    }
    Ok(worst)
}

fn single_valued(model: &PeriodModel, rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> Result<f64> {
    if !model.has_constant_maps() {
        return Ok(0.0);
    }
    let mut worst = 0.0_f64;
    for _ in 0..cfg.probes {
        let q = random_polydisk_point(rng, model, 40.0);
        let turned: Vec<Complex<f64>> = q
            .iter()
            .enumerate()
            .map(|(j, &qj)| {
                if j < model.k() {
                    qj * Complex::from_polar(1.0, rng.random_range(0.0..2.0 * PI))
                } else {
                    qj
                }
            })
            .collect();
        let (a, b) = (model.log_norm_section(&q)?, model.log_norm_section(&turned)?);
        worst = worst.max((a - b).abs() / a.abs().max(1.0));
    }
    Ok(worst)
}

/// The one-variable model with `A = 1`, `c = 1`, `psi = i`, `alpha = 0`, `h = 1`.
pub fn scalar_model(h_order: i64) -> PeriodModel {
    PeriodModel::new(
        PolarizationType::principal(1),
        1,
        vec![PsdMatrix::identity(1)],
        vec![DVector::from_element(1, 1.0)],
        MatrixPolynomial::constant(1, CMatrix::from_element(1, 1, Complex::new(0.0, 1.0))).expect("symmetric"),
        VectorPolynomial::zero(1, 1),
        vec![h_order],
    )
    .expect("valid model")
}

/// `|r(x_4) - r(x_3)|` against `|r(x_2) - r(x_1)|` for the remainder
/// `r(x) = -log||s|| - (h + mu) x` of the scalar model along `x = 10, ..., 10^4`.
fn monotone_degeneration() -> Result<f64> {
    let model = scalar_model(0);
    let r = |x: f64| -> Result<f64> { Ok(model.log_norm_section(&[Complex::new((-x).exp(), 0.0)])? - x) };
    // q = e^-x must stay representable.
    let (r1, r2, r3, r4) = (r(10.0)?, r(40.0)?, r(160.0)?, r(640.0)?);
    Ok(((r4 - r3).abs() - (r2 - r1).abs()).max(0.0))
}

/// Metric checks: random period points, and bridge/single-valuedness over `models`.
pub fn metric_checks(models: &[PeriodModel], cfg: &SuiteConfig) -> Vec<Check> {
    let unit = [()];
    let mut with_scalar = models.to_vec();
    with_scalar.push(scalar_model(1));
    vec![
        Check::at_most(
            "metric.exponent_nonnegative",
            worst(&unit, 100, cfg, |u, r| metric_exponent(u, r, cfg)),
            1e-12,
        ),
        Check::at_most(
            "metric.polarization_identity",
            worst(&unit, 101, cfg, |u, r| polarization_identity(u, r, cfg)),
            1e-12,
        ),
        Check::at_most(
            "metric.bridge",
            worst(models, 102, cfg, |m, r| bridge(m, r, cfg)),
            cfg.fine_tol,
        ),
        Check::at_most(
            "metric.single_valued",
            worst(&with_scalar, 103, cfg, |m, r| single_valued(m, r, cfg)),
            1e-12,
        ),
        Check::at_most(
            "metric.monotone_degeneration",
            monotone_degeneration().unwrap_or(f64::INFINITY),
            cfg.tol,
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_on_random_instances() {
        let cfg = SuiteConfig {
            probes: 10,
            ..SuiteConfig::default()
        };
        let insts = random_instances(cfg.seed, 12);
        for c in instance_checks(&insts, &cfg) {
            assert!(c.passed(), "{c:?}");
        }
        for c in metric_checks(&random_models(cfg.seed, 6), &cfg) {
            assert!(c.passed(), "{c:?}");
        }
    }

    #[test]
    fn suite_is_deterministic() {
        let cfg = SuiteConfig {
            probes: 5,
            ..SuiteConfig::default()
        };
        let insts = random_instances(7, 6);
        assert_eq!(instance_checks(&insts, &cfg), instance_checks(&insts, &cfg));
    }

    #[test]
    fn scalar_model_value() {
        let q = Complex::new((-2.0 * PI).exp(), 0.0);
        assert!((scalar_model(0).log_norm_section(&[q]).unwrap() - PI).abs() < 1e-12);
        assert!((scalar_model(1).log_norm_section(&[q]).unwrap() - 3.0 * PI).abs() < 1e-12);
    }
}
