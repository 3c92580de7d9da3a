//! Regular `(l, r)` LDPC ensembles and the annealed rate functional.
//!
//! The rate functional is the Bethe-type expression
//!
//! ```text
//! F(m_fv, m_vf) = log Z_v + (l/r) log Z_f - l log Z_e
//! Z_v = sum_x m_fv(x)^l
//! Z_f = sum_{x in {0,1}^r, even parity} prod_i m_vf(x_i)
//! Z_e = sum_x m_fv(x) m_vf(x)
//! ```
//!
//! whose maximum over its saddle points gives the growth rate of the expected
//! number of codewords. For regular ensembles the maximum sits at uniform
//! messages and equals the design rate.

use serde::{Deserialize, Serialize};

use crate::error::{check_probability, Error, Result};

/// A regular LDPC ensemble with variable degree `l` and check degree `r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ensemble {
    l: usize,
    r: usize,
}

impl Ensemble {
    pub fn new(l: usize, r: usize) -> Result<Self> {
        if l < 2 || r <= l {
            return Err(Error::InvalidEnsemble { l, r });
        }
        Ok(Ensemble { l, r })
    }

    /// Variable-node degree.
    pub fn l(&self) -> usize {
        self.l
    }

    /// Check-node degree.
    pub fn r(&self) -> usize {
        self.r
    }

    /// Design rate `1 - l/r`.
    pub fn design_rate(&self) -> f64 {
        1.0 - self.l as f64 / self.r as f64
    }
}

impl std::fmt::Display for Ensemble {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.l, self.r)
    }
}

/// Binary messages `m_fv = (1 - p_fv, p_fv)` and `m_vf = (1 - p_vf, p_vf)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliMessagePair {
    pub p_fv: f64,
    pub p_vf: f64,
}

impl BernoulliMessagePair {
    pub fn new(p_fv: f64, p_vf: f64) -> Result<Self> {
        check_probability("p_fv", p_fv)?;
        check_probability("p_vf", p_vf)?;
        Ok(BernoulliMessagePair { p_fv, p_vf })
    }

    pub fn uniform() -> Self {
        BernoulliMessagePair {
            p_fv: 0.5,
            p_vf: 0.5,
        }
    }
}

/// Even-parity partition function `Z_f = (1 + (1 - 2 p)^r) / 2`.
pub(crate) fn parity_partition(p_vf: f64, r: usize) -> f64 {
    0.5 * (1.0 + (1.0 - 2.0 * p_vf).powi(r as i32))
}

/// Evaluates the rate functional in bits per symbol.
///
/// Returns `f64::NEG_INFINITY` when any of the partition sums vanishes, which
/// happens for deterministic messages that no parity-consistent configuration
/// supports (for instance `p_vf = 1` with odd `r`).
pub fn rate_functional(e: &Ensemble, m: &BernoulliMessagePair) -> Result<f64> {
    check_probability("p_fv", m.p_fv)?;
    check_probability("p_vf", m.p_vf)?;
    let l = e.l as i32;
    let (q_fv, q_vf) = (1.0 - m.p_fv, 1.0 - m.p_vf);
    let z_v = q_fv.powi(l) + m.p_fv.powi(l);
    let z_f = parity_partition(m.p_vf, e.r);
    let z_e = q_fv * q_vf + m.p_fv * m.p_vf;
    if z_v <= 0.0 || z_f <= 0.0 || z_e <= 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let nats = z_v.ln() + (e.l as f64 / e.r as f64) * z_f.ln() - e.l as f64 * z_e.ln();
    Ok(nats / std::f64::consts::LN_2)
}

/// Check-side saddle coupling: the factor-to-variable message implied by
/// a variable-to-factor message, `p_fv = (1 - (1 - 2 p_vf)^(r-1)) / 2`.
pub fn saddle_p_fv(e: &Ensemble, p_vf: f64) -> f64 {
    0.5 * (1.0 - (1.0 - 2.0 * p_vf).powi(e.r as i32 - 1))
}

/// Outcome of [`verify_rate_maximizer`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateMaximizerReport {
    /// Grid location `p_vf` of the maximum.
    pub max_location: f64,
    /// The paired `p_fv` from the saddle coupling.
    pub max_p_fv: f64,
    /// Maximum value in bits.
    pub max_value: f64,
    /// Design rate of the ensemble, for comparison.
    pub design_rate: f64,
}

/// Scans the rate functional along the saddle-consistent curve
/// `p_vf = i / (grid_steps - 1)`, `p_fv = saddle_p_fv(p_vf)`, and reports the
/// maximizing grid point. Ties resolve to the lowest grid index.
pub fn verify_rate_maximizer(e: &Ensemble, grid_steps: usize) -> Result<RateMaximizerReport> {
    if grid_steps < 3 {
        return Err(Error::Config(format!(
            "grid_steps must be at least 3, got {grid_steps}"
        )));
    }
    let mut best: Option<(f64, f64, f64)> = None;
    for i in 0..grid_steps {
        let p_vf = i as f64 / (grid_steps - 1) as f64;
        let p_fv = saddle_p_fv(e, p_vf).clamp(0.0, 1.0);
        let value = rate_functional(e, &BernoulliMessagePair { p_fv, p_vf })?;
        if best.map_or(true, |(_, _, v)| value > v) {
            best = Some((p_vf, p_fv, value));
        }
    }
    let (max_location, max_p_fv, max_value) = best.expect("grid is non-empty");
    Ok(RateMaximizerReport {
        max_location,
        max_p_fv,
        max_value,
        design_rate: e.design_rate(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_rates() {
        assert_eq!(Ensemble::new(3, 6).unwrap().design_rate(), 0.5);
        assert_eq!(Ensemble::new(3, 4).unwrap().design_rate(), 0.25);
        assert_eq!(Ensemble::new(6, 12).unwrap().design_rate(), 0.5);
    }

    #[test]
    fn degenerate_degrees_rejected() {
        assert_eq!(
            Ensemble::new(1, 4),
            Err(Error::InvalidEnsemble { l: 1, r: 4 })
        );
        assert!(Ensemble::new(3, 3).is_err());
        assert!(Ensemble::new(4, 3).is_err());
    }

    #[test]
    fn uniform_messages_give_design_rate() {
        let e = Ensemble::new(3, 6).unwrap();
        let v = rate_functional(&e, &BernoulliMessagePair::uniform()).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        let e = Ensemble::new(2, 4).unwrap();
        let v = rate_functional(&e, &BernoulliMessagePair::uniform()).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn all_ones_messages_give_zero_for_even_r() {
        let e = Ensemble::new(3, 6).unwrap();
        let m = BernoulliMessagePair::new(1.0, 1.0).unwrap();
        assert_eq!(rate_functional(&e, &m).unwrap(), 0.0);
    }

    #[test]
    fn incompatible_deterministic_messages_hit_sentinel() {
        let e = Ensemble::new(2, 5).unwrap();
        let m = BernoulliMessagePair::new(1.0, 1.0).unwrap();
        assert_eq!(rate_functional(&e, &m).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn out_of_range_messages_rejected() {
        let e = Ensemble::new(3, 6).unwrap();
        let m = BernoulliMessagePair {
            p_fv: 1.5,
            p_vf: 0.5,
        };
        assert!(matches!(
            rate_functional(&e, &m),
            Err(Error::Domain { what: "p_fv", .. })
        ));
        assert!(BernoulliMessagePair::new(0.5, -0.1).is_err());
    }

    #[test]
    fn grid_needs_three_points() {
        let e = Ensemble::new(3, 6).unwrap();
        assert!(verify_rate_maximizer(&e, 2).is_err());
    }
}
