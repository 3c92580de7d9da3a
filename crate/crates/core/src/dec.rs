//! Closed-form replica-symmetric analysis on the dicode erasure channel.
//!
//! On the DEC every message family collapses to a single erasure probability:
//!
//! | parameter | message |
//! |-----------|---------|
//! | `e_fv` | check to variable |
//! | `e_vf` | variable to check |
//! | `e_rv` | channel state information arriving from the right |
//! | `e_ls` | channel state information arriving from the left |
//!
//! and the saddle-point equations become
//!
//! ```text
//! e_fv = 1 - (1 - e_vf)^(r-1)
//! e_vf = e_fv^(l-1) e_rv (eps + (1-eps) e_ls / 2)
//! e_rv = eps + (1-eps) e_rv e_fv^l / 2
//! e_ls = e_fv^l (eps + (1-eps) e_ls / 2)
//! ```
//!
//! Iterating them from the all-erased start is density evolution of joint
//! iterative (BP) decoding. The conditional entropy of the codeword given the
//! output, per bit, is
//!
//! ```text
//! h = -l e_fv + eps e_ls + l (r-1)/r (1 - (1 - e_fv)(1 - e_vf))
//! ```
//!
//! which is negative on the nontrivial branch between the BP and MAP
//! thresholds; there the trivial saddle point (entropy zero) is selected.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::ensemble::Ensemble;
use crate::error::{check_probability, Error, Result};
use crate::stats::fmt_sig12;

/// Iteration controls for the fixed-point solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Stop once the largest parameter change in a sweep is at most `tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Weight of the previous value in each update, in `[0, 1)`.
    pub damping: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-12,
            max_iter: 1_000_000,
            damping: 0.0,
        }
    }
}

impl SolverConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::Domain {
                what: "damping",
                value: self.damping,
                domain: "[0, 1)",
            });
        }
        Ok(())
    }
}

/// A solution (or the last iterate) of the DEC saddle-point system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecFixedPoint {
    pub e_fv: f64,
    pub e_vf: f64,
    pub e_rv: f64,
    pub e_ls: f64,
    /// Largest parameter change in the final sweep.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl DecFixedPoint {
    /// A point with the given parameters and no iteration history.
    pub fn at(e_fv: f64, e_vf: f64, e_rv: f64, e_ls: f64) -> Self {
        DecFixedPoint {
            e_fv,
            e_vf,
            e_rv,
            e_ls,
            residual: 0.0,
            iterations: 0,
            converged: true,
        }
    }

    pub fn params(&self) -> [f64; 4] {
        [self.e_fv, self.e_vf, self.e_rv, self.e_ls]
    }
}

/// Applies every saddle-point equation once to the parameters of `fp`
/// (simultaneous update) and returns the image `[e_fv, e_vf, e_rv, e_ls]`.
pub fn dec_saddle_map(e: &Ensemble, eps: f64, fp: &DecFixedPoint) -> [f64; 4] {
    let (l, r) = (e.l() as i32, e.r() as i32);
    let half = 0.5 * (1.0 - eps);
    let fv_l = fp.e_fv.powi(l);
    [
        1.0 - (1.0 - fp.e_vf).powi(r - 1),
        fp.e_fv.powi(l - 1) * fp.e_rv * (eps + half * fp.e_ls),
        eps + half * fp.e_rv * fv_l,
        fv_l * (eps + half * fp.e_ls),
    ]
}

/// Largest violation of the saddle-point equations at `fp`.
pub fn dec_saddle_residual(e: &Ensemble, eps: f64, fp: &DecFixedPoint) -> f64 {
    dec_saddle_map(e, eps, fp)
        .iter()
        .zip(fp.params())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

/// Forward density evolution from the all-erased start.
///
/// Sweeps update `e_rv`, `e_ls`, `e_vf`, `e_fv` in that order, each using the
/// freshest values. Exhausting `max_iter` is reported through
/// `converged = false`, not as an error.
pub fn dec_forward_de(e: &Ensemble, eps: f64, cfg: &SolverConfig) -> Result<DecFixedPoint> {
    dec_forward_de_from(e, eps, DecFixedPoint::at(1.0, 1.0, 1.0, 1.0), cfg)
}

/// Density evolution from an arbitrary starting point.
pub fn dec_forward_de_from(
    e: &Ensemble,
    eps: f64,
    start: DecFixedPoint,
    cfg: &SolverConfig,
) -> Result<DecFixedPoint> {
    check_probability("eps", eps)?;
    cfg.validate()?;
    let (l, r) = (e.l() as i32, e.r() as i32);
    let half = 0.5 * (1.0 - eps);
    let d = cfg.damping;
    let relax = |old: f64, new: f64| {
        if d == 0.0 {
            new
        } else {
            d * old + (1.0 - d) * new
        }
    };
    let [mut fv, mut vf, mut rv, mut ls] = start.params();
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let fv_l = fv.powi(l);
        let rv_new = relax(rv, eps + half * rv * fv_l);
        let ls_new = relax(ls, fv_l * (eps + half * ls));
        let vf_new = relax(vf, fv.powi(l - 1) * rv_new * (eps + half * ls_new));
        let fv_new = relax(fv, 1.0 - (1.0 - vf_new).powi(r - 1));
        residual = (rv_new - rv)
            .abs()
            .max((ls_new - ls).abs())
            .max((vf_new - vf).abs())
            .max((fv_new - fv).abs());
        (fv, vf, rv, ls) = (fv_new, vf_new, rv_new, ls_new);
        if residual <= cfg.tol {
            break;
        }
    }
    Ok(DecFixedPoint {
        e_fv: fv,
        e_vf: vf,
        e_rv: rv,
        e_ls: ls,
        residual,
        iterations,
        converged: residual <= cfg.tol,
    })
}

/// The trivial saddle point `(0, 0, eps, 0)`: every code message is known and
/// only the bare channel erasures remain.
pub fn dec_trivial_fixed_point(eps: f64) -> Result<DecFixedPoint> {
    check_probability("eps", eps)?;
    Ok(DecFixedPoint::at(0.0, 0.0, eps, 0.0))
}

/// Conditional entropy per bit, in bits, at a saddle point.
pub fn dec_conditional_entropy(e: &Ensemble, eps: f64, fp: &DecFixedPoint) -> f64 {
    let (l, r) = (e.l() as f64, e.r() as f64);
    -l * fp.e_fv + eps * fp.e_ls + l * (r - 1.0) / r * (1.0 - (1.0 - fp.e_fv) * (1.0 - fp.e_vf))
}

fn xlnx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// The full replica-symmetric free energy `lim (1/N) E[log Z]` in nats,
/// before extremization.
///
/// At a saddle point, `(free_energy - eps ln eps - (1-eps) ln(1-eps)) / ln 2`
/// equals [`dec_conditional_entropy`]; this gives an independent route to
/// the entropy formula.
pub fn dec_free_energy(e: &Ensemble, eps: f64, fp: &DecFixedPoint) -> f64 {
    let (l, r) = (e.l() as f64, e.r() as f64);
    let li = e.l() as i32;
    let [fv, vf, rv, ls] = fp.params();
    let half = 0.5 * (1.0 - eps);
    let fv_l = fv.powi(li);
    let ln2 = std::f64::consts::LN_2;
    let chan = xlnx(eps) + xlnx(1.0 - eps);
    let coupled = rv + (1.0 - eps) * ls + 2.0 * l * fv
        - eps * rv * fv_l
        - fv_l * (eps + half * rv * fv_l) * (eps + half * ls);
    let site = rv + (1.0 - eps) * ls + l * fv - rv * fv_l * (eps + half * ls);
    2.0 * chan - coupled * ln2 - chan + site * ln2
        - l / r * (1.0 - (1.0 - vf).powi(e.r() as i32)) * ln2
        + l * (1.0 - (1.0 - fv) * (1.0 - vf)) * ln2
}

/// Threshold on `e_fv` separating the nontrivial branch from the trivial one.
pub const NONTRIVIAL_EPS: f64 = 1e-6;

fn nontrivial(e: &Ensemble, eps: f64, cfg: &SolverConfig) -> Result<DecFixedPoint> {
    dec_forward_de(e, eps, cfg)
}

fn check_bisect_tol(bisect_tol: f64) -> Result<()> {
    if bisect_tol > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "bisection tolerance must be positive, got {bisect_tol}"
        )))
    }
}

/// The upper end of the final BP-threshold bracket, where forward DE is on
/// the nontrivial branch.
fn bp_bracket(e: &Ensemble, bisect_tol: f64) -> Result<(f64, f64)> {
    check_bisect_tol(bisect_tol)?;
    let cfg = SolverConfig::default();
    let is_nontrivial =
        |eps: f64| -> Result<bool> { Ok(nontrivial(e, eps, &cfg)?.e_fv > NONTRIVIAL_EPS) };
    let (mut lo, mut hi) = (0.0, 1.0);
    if is_nontrivial(lo)? || !is_nontrivial(hi)? {
        return Err(Error::Bracket(format!(
            "forward DE on {e} does not switch from trivial to nontrivial on [0, 1]"
        )));
    }
    while hi - lo > bisect_tol {
        let mid = 0.5 * (lo + hi);
        if is_nontrivial(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo, hi))
}

/// BP threshold: the channel erasure probability at which forward density
/// evolution stops converging to the trivial fixed point, located by
/// bisection to within `bisect_tol`.
pub fn dec_bp_threshold(e: &Ensemble, bisect_tol: f64) -> Result<f64> {
    let (lo, hi) = bp_bracket(e, bisect_tol)?;
    Ok(0.5 * (lo + hi))
}

/// Entropies within this distance of zero are treated as zero when deciding
/// whether the transition is continuous. Above the BP threshold of a
/// continuous transition the entropy grows like a high power of the distance,
/// so its sign just above threshold is rounding noise.
pub const ENTROPY_ZERO_TOL: f64 = 1e-12;

/// Result of [`dec_map_threshold`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapThreshold {
    pub value: f64,
    /// Set when the nontrivial branch already has nonnegative entropy at the
    /// BP threshold, so the two thresholds coincide.
    pub degenerate: bool,
}

/// MAP threshold: the zero crossing of the conditional entropy along the
/// nontrivial branch above the BP threshold.
pub fn dec_map_threshold(e: &Ensemble, bisect_tol: f64) -> Result<MapThreshold> {
    let (bp_lo, bp_hi) = bp_bracket(e, bisect_tol)?;
    let cfg = SolverConfig::default();
    let h = |eps: f64| -> Result<f64> {
        let fp = nontrivial(e, eps, &cfg)?;
        Ok(dec_conditional_entropy(e, eps, &fp))
    };
    if h(bp_hi)? >= -ENTROPY_ZERO_TOL {
        return Ok(MapThreshold {
            value: 0.5 * (bp_lo + bp_hi),
            degenerate: true,
        });
    }
    let (mut lo, mut hi) = (bp_hi, 1.0);
    if h(hi)? <= 0.0 {
        return Err(Error::Bracket(format!(
            "conditional entropy on {e} does not turn positive below eps = 1"
        )));
    }
    while hi - lo > bisect_tol {
        let mid = 0.5 * (lo + hi);
        if h(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(MapThreshold {
        value: 0.5 * (lo + hi),
        degenerate: false,
    })
}

/// One point of an entropy curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyPoint {
    pub eps: f64,
    /// Entropy of the forward-DE fixed point; may be negative.
    pub h_nontrivial: f64,
    /// `max(0, h_nontrivial)`: the entropy after selecting the saddle point
    /// with nonnegative entropy.
    pub h_reported: f64,
    pub fp: DecFixedPoint,
}

/// Solves forward DE at every grid point. Converged points on the trivial
/// branch (`e_fv <= NONTRIVIAL_EPS`) are reported at the exact trivial fixed
/// point. Points are independent and are evaluated in parallel; the result
/// equals sequential evaluation.
pub fn dec_entropy_curve(e: &Ensemble, eps_grid: &[f64]) -> Result<Vec<EntropyPoint>> {
    for &eps in eps_grid {
        check_probability("eps", eps)?;
    }
    if eps_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("eps grid must be ascending".into()));
    }
    let cfg = SolverConfig::default();
    eps_grid
        .par_iter()
        .map(|&eps| {
            let mut fp = dec_forward_de(e, eps, &cfg)?;
            if fp.converged && fp.e_fv <= NONTRIVIAL_EPS {
                // Below threshold the iterates only approach the trivial
                // point; report the point itself.
                fp = DecFixedPoint {
                    residual: fp.residual,
                    iterations: fp.iterations,
                    ..dec_trivial_fixed_point(eps)?
                };
            }
            let h = dec_conditional_entropy(e, eps, &fp);
            Ok(EntropyPoint {
                eps,
                h_nontrivial: h,
                h_reported: h.max(0.0),
                fp,
            })
        })
        .collect()
}

pub const CURVE_CSV_HEADER: &str =
    "eps,e_fv,e_vf,e_Rv,e_Ls,h_nontrivial,h_reported,converged,iterations";

/// Writes an entropy curve as CSV with 12 significant digits.
pub fn write_curve_csv<W: Write>(points: &[EntropyPoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{CURVE_CSV_HEADER}")?;
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            fmt_sig12(p.eps),
            fmt_sig12(p.fp.e_fv),
            fmt_sig12(p.fp.e_vf),
            fmt_sig12(p.fp.e_rv),
            fmt_sig12(p.fp.e_ls),
            fmt_sig12(p.h_nontrivial),
            fmt_sig12(p.h_reported),
            p.fp.converged,
            p.fp.iterations
        )?;
    }
    Ok(())
}
