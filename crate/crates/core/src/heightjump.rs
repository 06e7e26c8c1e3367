//! Height jumps along test curves and Lear divisor coefficients.
//!
//! A test curve through a boundary point meets the `i`-th boundary divisor
//! with multiplicity `m_i`. Its height jump is `-f̄(m) + Σ m_i mu_i`, which is
//! never negative because `f̄` is convex, homogeneous of weight one, and
//! linear with slope `mu_i` along each axis.

use crate::error::{Error, Result};
use crate::normlike::NormlikeInstance;

/// Largest multiplicity accepted on a test curve.
pub const MAX_MULTIPLICITY: u64 = 1_000_000;

/// Multiplicities `(m_1, ..., m_k)` of a test curve, not all zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestCurve {
    m: Vec<u64>,
}

impl TestCurve {
    pub fn new(m: Vec<u64>) -> Result<Self> {
        if m.iter().all(|&v| v == 0) {
            return Err(Error::InvalidCurve("all multiplicities are zero".into()));
        }
        if let Some(i) = m.iter().position(|&v| v > MAX_MULTIPLICITY) {
            return Err(Error::InvalidCurve(format!(
                "multiplicity m_{} = {} exceeds {MAX_MULTIPLICITY}",
                i + 1,
                m[i]
            )));
        }
        Ok(Self { m })
    }

    pub fn multiplicities(&self) -> &[u64] {
        &self.m
    }

    pub fn k(&self) -> usize {
        self.m.len()
    }

    pub fn as_point(&self) -> Vec<f64> {
        self.m.iter().map(|&v| v as f64).collect()
    }

    /// The curve with every multiplicity multiplied by `t`.
    pub fn scaled(&self, t: u64) -> Result<Self> {
        Self::new(self.m.iter().map(|&v| v.saturating_mul(t)).collect())
    }
}

fn check_curve(inst: &NormlikeInstance, curve: &TestCurve) -> Result<()> {
    if curve.k() != inst.k() {
        return Err(Error::DimensionMismatch {
            what: "test curve",
            expected: inst.k(),
            found: curve.k(),
        });
    }
    Ok(())
}

/// `Σ m_i mu_i`.
pub fn linear_part(inst: &NormlikeInstance, curve: &TestCurve) -> Result<f64> {
    check_curve(inst, curve)?;
    Ok(inst
        .recession()
        .mu()
        .iter()
        .zip(curve.multiplicities())
        .map(|(mu, &m)| mu * m as f64)
        .sum())
}

/// `-f̄(m) + Σ m_i mu_i`.
pub fn height_jump(inst: &NormlikeInstance, curve: &TestCurve) -> Result<f64> {
    let lin = linear_part(inst, curve)?;
    Ok(lin - inst.recession().eval_extended(&curve.as_point())?)
}

/// Outcome of [`jump_is_effective`]; the two terms are kept as a witness.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpVerdict {
    pub effective: bool,
    pub jump: f64,
    /// `f̄(m)`.
    pub recession_value: f64,
    /// `Σ m_i mu_i`.
    pub linear_part: f64,
}

pub fn jump_is_effective(inst: &NormlikeInstance, curve: &TestCurve, tol: f64) -> Result<JumpVerdict> {
    let linear_part = linear_part(inst, curve)?;
    let recession_value = inst.recession().eval_extended(&curve.as_point())?;
    let jump = linear_part - recession_value;
    Ok(JumpVerdict {
        effective: jump >= -tol,
        jump,
        recession_value,
        linear_part,
    })
}

/// Orders at the origin of a test curve of the section `s` on the two
/// extensions of the pulled-back bundle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PullbackOrders {
    /// `Σ m_i (mu_i + nu_i)`: pullback of the Lear extension.
    pub pullback_of_lear: f64,
    /// `f̄(m) + Σ m_i nu_i`: Lear extension of the pullback.
    pub lear_of_pullback: f64,
    /// Their difference, the height jump; independent of `nu`.
    pub jump: f64,
}

pub fn pullback_orders(inst: &NormlikeInstance, curve: &TestCurve, nu: &[f64]) -> Result<PullbackOrders> {
    check_curve(inst, curve)?;
    if nu.len() != curve.k() {
        return Err(Error::LengthMismatch {
            left: curve.k(),
            right: nu.len(),
        });
    }
    let fbar = inst.recession().eval_extended(&curve.as_point())?;
    let lin = linear_part(inst, curve)?;
    let shift: f64 = curve.multiplicities().iter().zip(nu).map(|(&m, n)| m as f64 * n).sum();
    Ok(PullbackOrders {
        pullback_of_lear: lin + shift,
        lear_of_pullback: fbar + shift,
        jump: lin - fbar,
    })
}

/// The Q-divisor `Σ a_i D_i + (closure part)` with `a_i = mu_i + nu_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LearDivisor {
    pub components: Vec<(String, f64)>,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub closure_part: Vec<(String, f64)>,
}

impl LearDivisor {
    pub fn coefficients(&self) -> Vec<f64> {
        self.components.iter().map(|(_, a)| *a).collect()
    }
}

/// Builds the divisor from `mu` and `nu`. Empty `labels` default to
/// `D1, D2, ...`.
pub fn lear_divisor(
    mu: &[f64],
    nu: &[f64],
    labels: &[String],
    closure_part: Vec<(String, f64)>,
) -> Result<LearDivisor> {
    if mu.len() != nu.len() {
        return Err(Error::LengthMismatch {
            left: mu.len(),
            right: nu.len(),
        });
    }
    if !labels.is_empty() && labels.len() != mu.len() {
        return Err(Error::LengthMismatch {
            left: mu.len(),
            right: labels.len(),
        });
    }
    if let Some(bad) = mu
        .iter()
        .chain(nu)
        .chain(closure_part.iter().map(|(_, v)| v))
        .find(|v| !v.is_finite())
    {
        return Err(Error::InvalidModel(format!("non-finite divisor coefficient {bad}")));
    }
    let components = mu
        .iter()
        .zip(nu)
        .enumerate()
        .map(|(i, (m, n))| {
            let label = labels.get(i).cloned().unwrap_or_else(|| format!("D{}", i + 1));
            (label, m + n)
        })
        .collect();
    Ok(LearDivisor {
        components,
        mu: mu.to_vec(),
        nu: nu.to_vec(),
        closure_part,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn curve(m: &[u64]) -> TestCurve {
        TestCurve::new(m.to_vec()).unwrap()
    }

    #[test]
    fn scalar_example_jumps() {
        let inst = NormlikeInstance::scalar_example();
        assert_relative_eq!(height_jump(&inst, &curve(&[1, 1])).unwrap(), 0.5, max_relative = 1e-13);
        assert_eq!(height_jump(&inst, &curve(&[3, 0])).unwrap(), 0.0);
        assert_relative_eq!(
            height_jump(&inst, &curve(&[2, 1])).unwrap(),
            2.0 / 3.0,
            max_relative = 1e-13
        );
    }

    #[test]
    fn effectivity_verdicts() {
        let inst = NormlikeInstance::scalar_example();
        let v = jump_is_effective(&inst, &curve(&[1, 1]), 1e-9).unwrap();
        assert!(v.effective);
        assert_relative_eq!(v.recession_value, 4.5, max_relative = 1e-14);
        assert_eq!(v.linear_part, 5.0);
        let axis = jump_is_effective(&inst, &curve(&[0, 4]), 1e-9).unwrap();
        assert!(axis.effective);
        assert_eq!(axis.jump, 0.0);
    }

    #[test]
    fn pullback_examples() {
        let inst = NormlikeInstance::scalar_example();
        let o = pullback_orders(&inst, &curve(&[1, 1]), &[0.0, 0.0]).unwrap();
        assert_eq!(o.pullback_of_lear, 5.0);
        assert_relative_eq!(o.lear_of_pullback, 4.5, max_relative = 1e-14);
        assert_relative_eq!(o.jump, 0.5, max_relative = 1e-13);
        let o = pullback_orders(&inst, &curve(&[1, 0]), &[0.0, 0.0]).unwrap();
        assert_eq!((o.pullback_of_lear, o.lear_of_pullback, o.jump), (1.0, 1.0, 0.0));
        let o = pullback_orders(&inst, &curve(&[1, 1]), &[1.0, 1.0]).unwrap();
        assert_eq!(o.pullback_of_lear, 7.0);
        assert_relative_eq!(o.lear_of_pullback, 6.5, max_relative = 1e-14);
        assert_relative_eq!(o.jump, 0.5, max_relative = 1e-13);
    }

    #[test]
    fn lear_examples() {
        let d = lear_divisor(&[1.0, 4.0], &[0.0, -1.0], &[], vec![]).unwrap();
        assert_eq!(d.coefficients(), vec![1.0, 3.0]);
        assert_eq!(d.components[1].0, "D2");
        let d = lear_divisor(&[2.0, 5.0], &[0.0, 0.0], &[], vec![("Z".into(), 1.0)]).unwrap();
        assert_eq!(d.coefficients(), vec![2.0, 5.0]);
        assert_eq!(d.closure_part, vec![("Z".to_string(), 1.0)]);
        assert!(matches!(
            lear_divisor(&[1.0], &[1.0, 2.0], &[], vec![]).unwrap_err(),
            Error::LengthMismatch { .. }
        ));
    }

    #[test]
    fn curve_validation() {
        assert!(TestCurve::new(vec![0, 0]).is_err());
        assert!(TestCurve::new(vec![MAX_MULTIPLICITY + 1]).is_err());
        assert!(TestCurve::new(vec![MAX_MULTIPLICITY]).is_ok());
    }
}
