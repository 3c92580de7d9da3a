//! Finite-length joint belief propagation over a Tanner graph and the channel
//! state trellis.
//!
//! Schedule (flooding): each iteration forms the code prior of every bit from
//! its incoming check messages, runs one forward and one backward pass over
//! the state trellis, turns the trellis messages into channel-to-variable
//! messages, then updates all variable-to-check and check-to-variable
//! messages once.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::channel::MarkovChannelSpec;
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::graph::{sample_tanner_graph, CodewordSampler, TannerGraph};
use crate::population::{snap_erasure, SNAP_TOL};
use crate::rng::{self, TAG_CHANNEL, TAG_CODEWORD, TAG_TRIAL};
use crate::stats::{fmt_sig12, mean_and_std_err};

/// Messages of the joint decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    /// Variable-to-check message per edge.
    pub v2c: Vec<[f64; 2]>,
    /// Check-to-variable message per edge.
    pub c2v: Vec<[f64; 2]>,
    /// Forward state message entering each position, `n x S` row-major.
    pub alpha: Vec<f64>,
    /// Backward state message entering each position from the right,
    /// `(n + 1) x S` row-major; the last row is all ones.
    pub beta: Vec<f64>,
    pub iterations: usize,
    /// Messages whose normalizer vanished and were reset to uniform.
    pub degenerate_messages: usize,
}

/// Output of [`joint_bp_decode`].
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// Approximate posterior `p(x_i | y)`.
    pub marginals: Vec<[f64; 2]>,
    pub state: DecoderState,
    pub converged: bool,
}

fn normalize2(m: &mut [f64; 2], degenerate: &mut usize) {
    let s = m[0] + m[1];
    if s > 0.0 && s.is_finite() {
        m[0] /= s;
        m[1] /= s;
    } else {
        *m = [0.5, 0.5];
        *degenerate += 1;
    }
}

fn normalize_slice(m: &mut [f64]) -> bool {
    let s: f64 = m.iter().sum();
    if s > 0.0 && s.is_finite() {
        m.iter_mut().for_each(|v| *v /= s);
        true
    } else {
        false
    }
}

/// Runs joint BP until the largest change of any check-to-variable message
/// or marginal is below `tol`, or for `max_iter` iterations.
pub fn joint_bp_decode(
    g: &TannerGraph,
    c: &MarkovChannelSpec,
    y: &[usize],
    max_iter: usize,
    tol: f64,
) -> Result<DecodeResult> {
    let n = g.num_variables();
    if y.len() != n {
        return Err(Error::Config(format!(
            "received word has length {} but the graph has {n} variables",
            y.len()
        )));
    }
    if let Some(&bad) = y.iter().find(|&&v| v >= c.num_outputs()) {
        return Err(Error::Config(format!("output index {bad} out of range")));
    }
    let ns = c.num_states();
    let snap = c.is_erasure_like();
    let ne = g.num_edges();
    let mut st = DecoderState {
        v2c: vec![[0.5; 2]; ne],
        c2v: vec![[0.5; 2]; ne],
        alpha: vec![0.0; n * ns],
        beta: vec![0.0; (n + 1) * ns],
        iterations: 0,
        degenerate_messages: 0,
    };
    let mut marginals = vec![[0.5; 2]; n];
    let mut prior = vec![[0.5; 2]; n];
    let mut lambda = vec![[0.5; 2]; n];
    let mut converged = false;

    for _ in 0..max_iter {
        st.iterations += 1;
        for i in 0..n {
            let mut p = [1.0, 1.0];
            for &e in g.var_edges(i) {
                p[0] *= st.c2v[e][0];
                p[1] *= st.c2v[e][1];
            }
            normalize2(&mut p, &mut st.degenerate_messages);
            prior[i] = p;
        }

        // Forward pass.
        st.alpha[..ns].copy_from_slice(c.v0());
        for i in 0..n.saturating_sub(1) {
            let (cur, next) = st.alpha[i * ns..(i + 2) * ns].split_at_mut(ns);
            next.iter_mut().for_each(|v| *v = 0.0);
            for x in 0..2 {
                for s in 0..ns {
                    let a = cur[s] * prior[i][x] * c.w(y[i], x, s);
                    if a > 0.0 {
                        for (o, v) in next.iter_mut().zip(c.v_row(y[i], x, s)) {
                            *o += a * v;
                        }
                    }
                }
            }
            if !normalize_slice(next) {
                return Err(Error::Config(format!(
                    "received word has zero probability up to position {i}"
                )));
            }
            if snap {
                snap_erasure(next);
            }
        }

        // Backward pass.
        st.beta[n * ns..].iter_mut().for_each(|v| *v = 1.0);
        for i in (0..n).rev() {
            let (cur, next) = st.beta[i * ns..(i + 2) * ns].split_at_mut(ns);
            for s in 0..ns {
                let mut acc = 0.0;
                for x in 0..2 {
                    let w = c.w(y[i], x, s);
                    if w > 0.0 {
                        let fwd: f64 = c
                            .v_row(y[i], x, s)
                            .iter()
                            .zip(next.iter())
                            .map(|(v, b)| v * b)
                            .sum();
                        acc += prior[i][x] * w * fwd;
                    }
                }
                cur[s] = acc;
            }
            if !normalize_slice(cur) {
                return Err(Error::Config(format!(
                    "received word has zero probability from position {i} on"
                )));
            }
            if snap {
                snap_erasure(cur);
            }
        }

        // Channel-to-variable messages.
        for i in 0..n {
            let a = &st.alpha[i * ns..(i + 1) * ns];
            let b = &st.beta[(i + 1) * ns..(i + 2) * ns];
            let mut l = [0.0; 2];
            for (x, lx) in l.iter_mut().enumerate() {
                for s in 0..ns {
                    let w = c.w(y[i], x, s);
                    if w > 0.0 && a[s] > 0.0 {
                        let fwd: f64 = c.v_row(y[i], x, s).iter().zip(b).map(|(v, b)| v * b).sum();
                        *lx += a[s] * w * fwd;
                    }
                }
            }
            normalize2(&mut l, &mut st.degenerate_messages);
            if snap {
                snap_erasure(&mut l);
            }
            lambda[i] = l;
        }

        // Variable-to-check messages.
        for i in 0..n {
            let edges = g.var_edges(i);
            for &e in edges {
                let mut m = lambda[i];
                for &f in edges {
                    if f != e {
                        m[0] *= st.c2v[f][0];
                        m[1] *= st.c2v[f][1];
                    }
                }
                normalize2(&mut m, &mut st.degenerate_messages);
                if snap {
                    snap_erasure(&mut m);
                }
                st.v2c[e] = m;
            }
        }

        // Check-to-variable messages.
        let mut delta: f64 = 0.0;
        for a in 0..g.num_checks() {
            let edges = g.check_edges(a);
            for &e in edges {
                let d: f64 = edges
                    .iter()
                    .filter(|&&f| f != e)
                    .map(|&f| st.v2c[f][0] - st.v2c[f][1])
                    .product();
                let m = [0.5 * (1.0 + d), 0.5 * (1.0 - d)];
                delta = delta.max((m[0] - st.c2v[e][0]).abs());
                st.c2v[e] = m;
            }
        }

        for i in 0..n {
            let mut m = lambda[i];
            for &e in g.var_edges(i) {
                m[0] *= st.c2v[e][0];
                m[1] *= st.c2v[e][1];
            }
            normalize2(&mut m, &mut st.degenerate_messages);
            if snap {
                snap_erasure(&mut m);
            }
            delta = delta.max((m[0] - marginals[i][0]).abs());
            marginals[i] = m;
        }

        if delta < tol {
            converged = true;
            break;
        }
    }
    Ok(DecodeResult {
        marginals,
        state: st,
        converged,
    })
}

/// Residual error of one decoded word. On erasure-type channels a bit counts
/// as wrong unless its marginal puts all mass on the true value. Otherwise a
/// bit counts when the argmax differs from the truth, and a tie counts one
/// half.
pub fn residual_errors(marginals: &[[f64; 2]], x: &[u8], erasure_like: bool) -> f64 {
    marginals
        .iter()
        .zip(x)
        .map(|(m, &b)| {
            let (truth, other) = (m[b as usize], m[1 - b as usize]);
            if erasure_like {
                if truth >= 1.0 - SNAP_TOL {
                    0.0
                } else {
                    1.0
                }
            } else if truth > other {
                0.0
            } else if truth < other {
                1.0
            } else {
                0.5
            }
        })
        .sum()
}

/// Aggregated results of [`simulate_rate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimStats {
    pub trials: usize,
    pub n: usize,
    /// Channel parameter, when the channel came from a family.
    pub param: Option<f64>,
    /// Residual errors per trial (halves come from ties).
    pub errors: Vec<f64>,
    pub iterations: Vec<usize>,
    /// Mean residual error rate per bit.
    pub mean_rate: f64,
    /// Standard error of `mean_rate` across trials.
    pub std_err: f64,
    pub avg_iters: f64,
}

/// Settings shared by the simulation entry points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            max_iter: 1000,
            tol: 1e-10,
        }
    }
}

/// A graph and a transmitted codeword for one trial.
#[derive(Debug, Clone)]
pub struct Trial {
    pub graph: TannerGraph,
    pub codeword: Vec<u8>,
    /// Seed of the channel noise for this trial.
    pub noise_seed: u64,
}

/// Graphs and codewords for `trials` trials. Trial `t` uses streams derived
/// from `(seed, t)` only, so any subset can be reproduced independently.
pub fn prepare_trials(e: &Ensemble, n: usize, trials: usize, seed: u64) -> Result<Vec<Trial>> {
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let ts = rng::derive_seed(seed, &[TAG_TRIAL, t as u64]);
            let graph = sample_tanner_graph(e, n, ts)?;
            let codeword =
                CodewordSampler::new(&graph).sample(&mut rng::stream(ts, &[TAG_CODEWORD]));
            Ok(Trial {
                graph,
                codeword,
                noise_seed: rng::derive_seed(ts, &[TAG_CHANNEL]),
            })
        })
        .collect()
}

/// Transmits and decodes every prepared trial over `c`.
pub fn run_trials(
    trials: &[Trial],
    c: &MarkovChannelSpec,
    cfg: &SimConfig,
    param: Option<f64>,
) -> Result<SimStats> {
    let erasure_like = c.is_erasure_like();
    let results: Vec<(f64, usize)> = trials
        .par_iter()
        .map(|t| {
            let (y, _) = c.transmit(&t.codeword, &mut rng::stream(t.noise_seed, &[]));
            let out = joint_bp_decode(&t.graph, c, &y, cfg.max_iter, cfg.tol)?;
            Ok((
                residual_errors(&out.marginals, &t.codeword, erasure_like),
                out.state.iterations,
            ))
        })
        .collect::<Result<_>>()?;
    let n = trials[0].graph.num_variables();
    let errors: Vec<f64> = results.iter().map(|r| r.0).collect();
    let iterations: Vec<usize> = results.iter().map(|r| r.1).collect();
    let rates: Vec<f64> = errors.iter().map(|e| e / n as f64).collect();
    let est = mean_and_std_err(&rates);
    Ok(SimStats {
        trials: trials.len(),
        n,
        param,
        avg_iters: iterations.iter().sum::<usize>() as f64 / trials.len() as f64,
        errors,
        iterations,
        mean_rate: est.mean,
        std_err: est.std_err,
    })
}

/// Fresh graph, codeword and channel realization per trial; residual error
/// rate of joint BP.
pub fn simulate_rate(
    e: &Ensemble,
    n: usize,
    c: &MarkovChannelSpec,
    trials: usize,
    max_iter: usize,
    seed: u64,
) -> Result<SimStats> {
    let prepared = prepare_trials(e, n, trials, seed)?;
    run_trials(
        &prepared,
        c,
        &SimConfig {
            max_iter,
            ..SimConfig::default()
        },
        None,
    )
}

/// Bisection settings for [`empirical_threshold`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdSearch {
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
    pub sim: SimConfig,
}

impl Default for ThresholdSearch {
    fn default() -> Self {
        ThresholdSearch {
            lo: 0.0,
            hi: 1.0,
            tol: 0.005,
            sim: SimConfig::default(),
        }
    }
}

/// Default residual-rate level that defines the empirical threshold.
pub const DEFAULT_TARGET_RATE: f64 = 1e-2;

/// Channel parameter at which the mean residual error rate crosses
/// `target_rate`, by bisection. The same graphs, codewords and noise seeds
/// are reused at every parameter value.
pub fn empirical_threshold<F>(
    e: &Ensemble,
    family: F,
    n: usize,
    trials: usize,
    target_rate: f64,
    seed: u64,
    search: &ThresholdSearch,
) -> Result<f64>
where
    F: Fn(f64) -> Result<MarkovChannelSpec>,
{
    let prepared = prepare_trials(e, n, trials, seed)?;
    let rate = |p: f64| -> Result<f64> {
        Ok(run_trials(&prepared, &family(p)?, &search.sim, Some(p))?.mean_rate)
    };
    let (mut lo, mut hi) = (search.lo, search.hi);
    let (rlo, rhi) = (rate(lo)?, rate(hi)?);
    if rlo >= target_rate || rhi <= target_rate {
        return Err(Error::Bracket(format!(
            "residual rate {rlo} at {lo} and {rhi} at {hi} do not straddle {target_rate}"
        )));
    }
    while hi - lo > search.tol {
        let mid = 0.5 * (lo + hi);
        if rate(mid)? < target_rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Header of the simulation CSV.
pub const SIM_CSV_HEADER: &str = "param,n,trials,mean_rate,std_err,avg_iters";

/// Writes one row per [`SimStats`].
pub fn write_sim_csv<W: Write>(rows: &[SimStats], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SIM_CSV_HEADER}")?;
    for s in rows {
        let param = s.param.map(fmt_sig12).unwrap_or_default();
        writeln!(
            out,
            "{param},{},{},{},{},{}",
            s.n,
            s.trials,
            fmt_sig12(s.mean_rate),
            fmt_sig12(s.std_err),
            fmt_sig12(s.avg_iters)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{embed_memoryless, MemorylessChannelSpec};
    use crate::graph::encode_random_codeword;

    #[test]
    fn noiseless_bec_resolves_in_one_iteration() {
        let e = Ensemble::new(3, 6).unwrap();
        let g = sample_tanner_graph(&e, 60, 1).unwrap();
        let x = encode_random_codeword(&g, 2);
        let c = embed_memoryless(&MemorylessChannelSpec::bec(0.0).unwrap());
        let y: Vec<usize> = x.iter().map(|&b| b as usize).collect();
        let out = joint_bp_decode(&g, &c, &y, 1, 0.0).unwrap();
        assert_eq!(out.state.iterations, 1);
        for (m, &b) in out.marginals.iter().zip(&x) {
            assert_eq!(m[b as usize], 1.0);
        }
    }

    #[test]
    fn fully_erased_dec_gives_uniform_marginals() {
        let e = Ensemble::new(3, 6).unwrap();
        let g = sample_tanner_graph(&e, 12, 4).unwrap();
        let c = MarkovChannelSpec::dec(1.0).unwrap();
        let out = joint_bp_decode(&g, &c, &[3; 12], 50, 1e-12).unwrap();
        assert!(out.converged);
        assert!(out.marginals.iter().all(|m| *m == [0.5, 0.5]));
    }

    #[test]
    fn tie_counts_half() {
        let m = [[0.5, 0.5], [0.9, 0.1], [0.2, 0.8]];
        assert_eq!(residual_errors(&m, &[0, 0, 0], false), 1.5);
        assert_eq!(residual_errors(&m, &[0, 0, 1], true), 3.0);
    }

    #[test]
    fn wrong_length_rejected() {
        let g = TannerGraph::from_checks(3, &[vec![0, 1, 2]]).unwrap();
        let c = MarkovChannelSpec::dec(0.5).unwrap();
        assert!(joint_bp_decode(&g, &c, &[0, 1], 5, 1e-9).is_err());
    }
}
