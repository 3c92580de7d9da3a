//! Population dynamics for binary-input memoryless channels.
//!
//! Message distributions conditioned on the transmitted bit are represented
//! by pools of samples. Each update builds a fresh pool from the old one, so
//! there is no order dependence within a sweep. Pools are split into chunks
//! of [`CHUNK_SIZE`] messages and every chunk draws from its own stream,
//! `rng::stream(seed, [TAG_POPULATION, kind, chunk])`, which makes the result
//! independent of the number of worker threads.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::MemorylessChannelSpec;
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::rng::{self, StreamRng, TAG_ENTROPY, TAG_POPULATION};
use crate::stats::{batch_means, fmt_sig12, Estimate};

/// Messages per parallel work unit.
pub const CHUNK_SIZE: usize = 1024;
/// Smallest admissible pool size.
pub const MIN_POP_SIZE: usize = 100;
/// Zero-normalizer draws are retried this many times before counting as a failure.
pub const MAX_RESAMPLE: usize = 100;
/// Messages within this distance of an erasure-algebra element are snapped to it.
pub const SNAP_TOL: f64 = 1e-9;
/// Smallest admissible number of Monte-Carlo samples per entropy term.
pub const MIN_MC_SAMPLES: usize = 10_000;

const KIND_CHECK: u64 = 1;
const KIND_VAR: u64 = 2;

/// A normalized distribution over one bit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BitMessage(pub [f64; 2]);

impl BitMessage {
    /// Normalizes `(m0, m1)`; `None` for a zero or non-finite sum.
    pub fn new(m0: f64, m1: f64) -> Option<Self> {
        let s = m0 + m1;
        (s > 0.0 && s.is_finite() && m0 >= 0.0 && m1 >= 0.0).then(|| BitMessage([m0 / s, m1 / s]))
    }

    pub fn uniform() -> Self {
        BitMessage([0.5, 0.5])
    }

    pub fn deterministic(x: usize) -> Self {
        let mut m = [0.0; 2];
        m[x] = 1.0;
        BitMessage(m)
    }

    pub fn mass_on_0(&self) -> f64 {
        self.0[0]
    }

    pub fn flip(&self) -> Self {
        BitMessage([self.0[1], self.0[0]])
    }
}

/// A pool of normalized messages of dimension `dim` for each of `conds`
/// conditioning symbols, `size` samples each.
///
/// For the memoryless solver `dim = conds = 2` (messages over `x`, conditioned
/// on the true bit). The Markov solver also uses it for joint `(x, s)` and
/// state messages.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalPopulation {
    dim: usize,
    conds: usize,
    size: usize,
    data: Vec<f64>,
}

impl ConditionalPopulation {
    /// Every message uniform over its `dim` entries.
    pub fn uniform(dim: usize, conds: usize, size: usize) -> Self {
        ConditionalPopulation {
            dim,
            conds,
            size,
            data: vec![1.0 / dim as f64; dim * conds * size],
        }
    }

    /// Fills sample `i` under condition `c` with `f(c, i, out)`; each message
    /// is normalized afterwards.
    pub fn from_fn(
        dim: usize,
        conds: usize,
        size: usize,
        f: impl Fn(usize, usize, &mut [f64]),
    ) -> Result<Self> {
        let mut data = vec![0.0; dim * conds * size];
        for (k, out) in data.chunks_exact_mut(dim).enumerate() {
            f(k / size, k % size, out);
            if out.iter().any(|&v| v < 0.0) || !normalize(out) {
                return Err(Error::Config(format!(
                    "message {} under condition {} is not a nonnegative nonzero vector",
                    k % size,
                    k / size
                )));
            }
        }
        Ok(ConditionalPopulation {
            dim,
            conds,
            size,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn conds(&self) -> usize {
        self.conds
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Sample `i` conditioned on `c`.
    pub fn message(&self, c: usize, i: usize) -> &[f64] {
        let k = (c * self.size + i) * self.dim;
        &self.data[k..k + self.dim]
    }

    /// All samples conditioned on `c`.
    pub fn messages(&self, c: usize) -> impl Iterator<Item = &[f64]> {
        let k = c * self.size * self.dim;
        self.data[k..k + self.size * self.dim].chunks_exact(self.dim)
    }

    /// A uniformly chosen sample conditioned on `c`.
    pub fn draw<R: Rng>(&self, c: usize, rng: &mut R) -> &[f64] {
        self.message(c, rng.gen_range(0..self.size))
    }

    /// Sample `i` conditioned on bit `x`, for bit-message pools.
    pub fn bit(&self, x: usize, i: usize) -> BitMessage {
        let m = self.message(x, i);
        BitMessage([m[0], m[1]])
    }

    /// Largest deviation of any message's sum from 1.
    pub fn max_normalization_error(&self) -> f64 {
        self.data
            .chunks_exact(self.dim)
            .map(|m| (m.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Fraction of the samples conditioned on `c` that are uniform over all
    /// `dim` entries, to within [`SNAP_TOL`].
    pub fn uniform_fraction(&self, c: usize) -> f64 {
        let u = 1.0 / self.dim as f64;
        let hits = self
            .messages(c)
            .filter(|m| m.iter().all(|&v| (v - u).abs() <= SNAP_TOL))
            .count();
        hits as f64 / self.size as f64
    }

    /// Builds a pool by calling `draw(c, rng, out)` for every slot. `draw`
    /// writes a normalized message and returns `false` on a zero normalizer,
    /// in which case it is retried. Returns the pool and the number of retries.
    pub(crate) fn resample<F>(
        dim: usize,
        conds: usize,
        size: usize,
        seed: u64,
        labels: &[u64],
        draw: F,
    ) -> Result<(Self, usize)>
    where
        F: Fn(usize, &mut StreamRng, &mut [f64]) -> bool + Sync,
    {
        let mut data = vec![0.0; dim * conds * size];
        let counts: Vec<(usize, usize)> = data
            .par_chunks_mut(CHUNK_SIZE * dim)
            .enumerate()
            .map(|(chunk, block)| {
                let mut l = labels.to_vec();
                l.push(chunk as u64);
                let mut rng = rng::stream(seed, &l);
                let (mut retries, mut failures) = (0, 0);
                for (j, out) in block.chunks_exact_mut(dim).enumerate() {
                    let c = (chunk * CHUNK_SIZE + j) / size;
                    let mut ok = false;
                    for _ in 0..=MAX_RESAMPLE {
                        if draw(c, &mut rng, out) {
                            ok = true;
                            break;
                        }
                        retries += 1;
                    }
                    if !ok {
                        failures += 1;
                    }
                }
                (retries, failures)
            })
            .collect();
        let retries = counts.iter().map(|c| c.0).sum();
        let failures = counts.iter().map(|c| c.1).sum();
        if failures > 0 {
            return Err(Error::ResampleExhausted { failures });
        }
        Ok((
            ConditionalPopulation {
                dim,
                conds,
                size,
                data,
            },
            retries,
        ))
    }
}

/// Normalizes `m` in place; `false` if the sum is zero or not finite.
pub(crate) fn normalize(m: &mut [f64]) -> bool {
    let s: f64 = m.iter().sum();
    if !(s > 0.0 && s.is_finite()) {
        return false;
    }
    m.iter_mut().for_each(|v| *v /= s);
    true
}

/// Snaps a message that is within [`SNAP_TOL`] of "uniform over its support"
/// to that exact value. Other messages are left untouched.
pub(crate) fn snap_erasure(m: &mut [f64]) {
    let mut k = 0usize;
    for v in m.iter() {
        if *v > SNAP_TOL {
            k += 1;
        }
    }
    if k == 0 {
        return;
    }
    let u = 1.0 / k as f64;
    if m.iter()
        .all(|&v| v <= SNAP_TOL || (v - u).abs() <= SNAP_TOL)
    {
        m.iter_mut()
            .for_each(|v| *v = if *v > SNAP_TOL { u } else { 0.0 });
    }
}

/// Factor-to-variable output of a parity check from `r - 1` incoming bit
/// messages: mass on the sum of the other bits being 0.
pub(crate) fn parity_combine<'a>(incoming: impl Iterator<Item = &'a [f64]>) -> [f64; 2] {
    let d: f64 = incoming.map(|m| m[0] - m[1]).product();
    [0.5 * (1.0 + d), 0.5 * (1.0 - d)]
}

/// Draws `n` uniform bits whose parity is `x`.
pub(crate) fn parity_bits<R: Rng>(n: usize, x: usize, rng: &mut R, out: &mut Vec<usize>) {
    out.clear();
    let mut acc = 0;
    for _ in 1..n {
        let b = rng.gen_range(0..2);
        acc ^= b;
        out.push(b);
    }
    out.push(acc ^ x);
}

/// The check-node update shared by the memoryless and Markov solvers.
pub(crate) fn resample_check(
    phi: &ConditionalPopulation,
    e: &Ensemble,
    labels: &[u64],
    seed: u64,
    snap: bool,
) -> ConditionalPopulation {
    let r = e.r();
    let (pop, _) =
        ConditionalPopulation::resample(2, 2, phi.size(), seed, labels, |x, rng, out| {
            let mut bits = Vec::with_capacity(r - 1);
            parity_bits(r - 1, x, rng, &mut bits);
            let msgs: Vec<&[f64]> = bits.iter().map(|&b| phi.draw(b, rng)).collect();
            out.copy_from_slice(&parity_combine(msgs.into_iter()));
            if snap {
                snap_erasure(out);
            }
            true
        })
        .expect("check update never has a zero normalizer");
    pop
}

/// Variable-to-factor and factor-to-variable pools for Theorem-1 style
/// density evolution with uniform input weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DePopulations {
    /// Variable-to-factor messages, conditioned on the true bit.
    pub phi: ConditionalPopulation,
    /// Factor-to-variable messages, conditioned on the true bit.
    pub phi_hat: ConditionalPopulation,
    /// Completed sweeps.
    pub generation: u64,
    /// Zero-normalizer draws that were retried so far.
    pub resampled: usize,
}

impl DePopulations {
    pub fn pop_size(&self) -> usize {
        self.phi.size()
    }
}

pub(crate) fn check_pop_size(pop_size: usize) -> Result<()> {
    if pop_size < MIN_POP_SIZE {
        return Err(Error::Config(format!(
            "pop_size = {pop_size} is below the minimum of {MIN_POP_SIZE}"
        )));
    }
    Ok(())
}

/// All messages uniform. The seed is accepted for interface symmetry; the
/// initial state does not depend on it.
pub fn init_populations(pop_size: usize, _seed: u64) -> Result<DePopulations> {
    check_pop_size(pop_size)?;
    Ok(DePopulations {
        phi: ConditionalPopulation::uniform(2, 2, pop_size),
        phi_hat: ConditionalPopulation::uniform(2, 2, pop_size),
        generation: 0,
        resampled: 0,
    })
}

/// Rebuilds `phi_hat`: for each sample conditioned on `x`, draw `r - 1` bits
/// with parity `x`, one `phi` message per bit, and combine them through the
/// parity check.
pub fn update_check_population(pop: &DePopulations, e: &Ensemble, seed: u64) -> DePopulations {
    DePopulations {
        phi_hat: resample_check(&pop.phi, e, &[TAG_POPULATION, KIND_CHECK], seed, false),
        ..pop.clone()
    }
}

/// Rebuilds `phi`: for each sample conditioned on `x`, draw `y ~ W(.|x)` and
/// `l - 1` `phi_hat` messages conditioned on `x`, and emit their normalized
/// product with `W(y|.)`.
pub fn update_var_population(
    pop: &DePopulations,
    e: &Ensemble,
    w: &MemorylessChannelSpec,
    seed: u64,
) -> Result<DePopulations> {
    let snap = w.is_erasure_like();
    let ph = &pop.phi_hat;
    let (phi, retries) = ConditionalPopulation::resample(
        2,
        2,
        ph.size(),
        seed,
        &[TAG_POPULATION, KIND_VAR],
        |x, rng, out| {
            let y = w.sample_output(x, rng);
            out[0] = w.w(y, 0);
            out[1] = w.w(y, 1);
            for _ in 1..e.l() {
                let m = ph.draw(x, rng);
                out[0] *= m[0];
                out[1] *= m[1];
            }
            if !normalize(out) {
                return false;
            }
            if snap {
                snap_erasure(out);
            }
            true
        },
    )?;
    Ok(DePopulations {
        phi,
        resampled: pop.resampled + retries,
        ..pop.clone()
    })
}

/// One check update followed by one variable update. The sweep's stream is
/// derived from `seed` and the current generation, so continuing a run gives
/// the same result as running it in one go.
pub fn sweep_population(
    pop: &DePopulations,
    e: &Ensemble,
    w: &MemorylessChannelSpec,
    seed: u64,
) -> Result<DePopulations> {
    let s = rng::derive_seed(seed, &[TAG_POPULATION, pop.generation]);
    let mut next = update_check_population(pop, e, rng::derive_seed(s, &[KIND_CHECK]));
    next = update_var_population(&next, e, w, rng::derive_seed(s, &[KIND_VAR]))?;
    next.generation += 1;
    Ok(next)
}

/// Runs `sweeps` sweeps from the uniform initial state.
pub fn run_population_dynamics(
    e: &Ensemble,
    w: &MemorylessChannelSpec,
    pop_size: usize,
    sweeps: usize,
    seed: u64,
) -> Result<DePopulations> {
    if sweeps == 0 {
        return Err(Error::Config("sweeps must be at least 1".into()));
    }
    let mut pop = init_populations(pop_size, seed)?;
    for _ in 0..sweeps {
        pop = sweep_population(&pop, e, w, seed)?;
    }
    Ok(pop)
}

/// Fraction of uniform ("erased") messages over both conditioning bits.
pub fn erased_fraction(p: &ConditionalPopulation) -> f64 {
    (0..p.conds()).map(|c| p.uniform_fraction(c)).sum::<f64>() / p.conds() as f64
}

/// Mean probability a message assigns to the wrong bit.
pub fn mean_message_error(p: &ConditionalPopulation) -> f64 {
    let total: f64 = (0..2)
        .map(|x| p.messages(x).map(|m| 1.0 - m[x]).sum::<f64>())
        .sum();
    total / (2 * p.size()) as f64
}

/// Conditional entropy estimate in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RsEntropy {
    /// The replica-symmetric value, which may be negative.
    pub estimate: Estimate,
    /// `max(0, estimate.mean)`.
    pub reported: f64,
}

impl RsEntropy {
    pub(crate) fn from_nats(mean: f64, std_err: f64) -> Self {
        let ln2 = std::f64::consts::LN_2;
        let estimate = Estimate {
            mean: mean / ln2,
            std_err: std_err / ln2,
        };
        RsEntropy {
            estimate,
            reported: estimate.mean.max(0.0),
        }
    }
}

/// Monte-Carlo average of `f` over `n` draws, chunked like the pool updates.
pub(crate) fn mc_term<F>(n: usize, seed: u64, label: u64, f: F) -> Estimate
where
    F: Fn(&mut StreamRng) -> f64 + Sync,
{
    let chunks = n.div_ceil(CHUNK_SIZE);
    let values: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|chunk| {
            let mut rng = rng::stream(seed, &[TAG_ENTROPY, label, chunk as u64]);
            let len = CHUNK_SIZE.min(n - chunk * CHUNK_SIZE);
            (0..len).map(|_| f(&mut rng)).collect::<Vec<_>>()
        })
        .collect();
    batch_means(&values)
}

pub(crate) fn check_mc_samples(mc_samples: usize) -> Result<()> {
    if mc_samples < MIN_MC_SAMPLES {
        return Err(Error::Config(format!(
            "mc_samples = {mc_samples} is below the minimum of {MIN_MC_SAMPLES}"
        )));
    }
    Ok(())
}

/// The factor term `E log((1 + prod_i (M_i(0) - M_i(1))) / 2)` over `r`
/// bits of even parity, in nats.
pub(crate) fn factor_term(
    phi: &ConditionalPopulation,
    e: &Ensemble,
    n: usize,
    seed: u64,
    label: u64,
) -> Estimate {
    mc_term(n, seed, label, |rng| {
        let mut bits = Vec::with_capacity(e.r());
        parity_bits(e.r(), 0, rng, &mut bits);
        let d: f64 = bits
            .iter()
            .map(|&b| {
                let m = phi.draw(b, rng);
                m[0] - m[1]
            })
            .product();
        (0.5 * (1.0 + d)).ln()
    })
}

/// The edge term `E log sum_x M_fv(x) M_vf(x)`, in nats.
pub(crate) fn edge_term(
    phi: &ConditionalPopulation,
    phi_hat: &ConditionalPopulation,
    n: usize,
    seed: u64,
    label: u64,
) -> Estimate {
    mc_term(n, seed, label, |rng| {
        let x = rng.gen_range(0..2);
        let a = phi.draw(x, rng);
        let b = phi_hat.draw(x, rng);
        (a[0] * b[0] + a[1] * b[1]).ln()
    })
}

/// Combines independent term estimates `sum_k c_k T_k`.
pub(crate) fn combine(terms: &[(f64, Estimate)]) -> (f64, f64) {
    let mean = terms.iter().map(|(c, t)| c * t.mean).sum();
    let var: f64 = terms.iter().map(|(c, t)| (c * t.std_err).powi(2)).sum();
    (mean, var.sqrt())
}

/// Replica-symmetric conditional entropy per bit, in bits: the factor term,
/// plus the variable term, minus `l` times the edge term, plus `H(Y|X)`.
pub fn rs_entropy_memoryless(
    pop: &DePopulations,
    e: &Ensemble,
    w: &MemorylessChannelSpec,
    mc_samples: usize,
    seed: u64,
) -> Result<RsEntropy> {
    check_mc_samples(mc_samples)?;
    let l = e.l() as f64;
    let factor = factor_term(&pop.phi, e, mc_samples, seed, 1);
    let var = mc_term(mc_samples, seed, 2, |rng| {
        let x = rng.gen_range(0..2);
        let y = w.sample_output(x, rng);
        let mut acc = [w.w(y, 0), w.w(y, 1)];
        for _ in 0..e.l() {
            let m = pop.phi_hat.draw(x, rng);
            acc[0] *= m[0];
            acc[1] *= m[1];
        }
        (acc[0] + acc[1]).ln()
    });
    let edge = edge_term(&pop.phi, &pop.phi_hat, mc_samples, seed, 3);
    let (mean, se) = combine(&[(l / e.r() as f64, factor), (1.0, var), (-l, edge)]);
    Ok(RsEntropy::from_nats(mean - w.mean_log_likelihood(), se))
}

/// Bisection settings for [`population_bp_threshold`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PopulationThresholdConfig {
    pub pop_size: usize,
    pub sweeps: usize,
    pub seed: u64,
    /// Initial bracket on the channel parameter.
    pub lo: f64,
    pub hi: f64,
    pub tol: f64,
    /// Decoding counts as successful when the mean message error after
    /// `sweeps` sweeps is at most this.
    pub success_error: f64,
}

impl Default for PopulationThresholdConfig {
    fn default() -> Self {
        PopulationThresholdConfig {
            pop_size: 10_000,
            sweeps: 1000,
            seed: 1,
            lo: 0.0,
            hi: 1.0,
            tol: 1e-3,
            success_error: 1e-3,
        }
    }
}

/// BP threshold of a channel family by population dynamics: the parameter
/// where the mean message error stops vanishing. A run stops early once every
/// message is perfect.
pub fn population_bp_threshold<F>(
    e: &Ensemble,
    family: F,
    cfg: &PopulationThresholdConfig,
) -> Result<f64>
where
    F: Fn(f64) -> Result<MemorylessChannelSpec>,
{
    let succeeds = |p: f64| -> Result<bool> {
        let w = family(p)?;
        let mut pop = init_populations(cfg.pop_size, cfg.seed)?;
        for _ in 0..cfg.sweeps {
            pop = sweep_population(&pop, e, &w, cfg.seed)?;
            // A pool of perfect messages maps to itself.
            if mean_message_error(&pop.phi) == 0.0 {
                break;
            }
        }
        Ok(mean_message_error(&pop.phi) <= cfg.success_error)
    };
    let (mut lo, mut hi) = (cfg.lo, cfg.hi);
    if !succeeds(lo)? || succeeds(hi)? {
        return Err(Error::Bracket(format!(
            "decoding must succeed at {lo} and fail at {hi}"
        )));
    }
    while hi - lo > cfg.tol {
        let mid = 0.5 * (lo + hi);
        if succeeds(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Header of the population snapshot CSV.
pub const SNAPSHOT_CSV_HEADER: &str = "x,mass_on_0";

/// Writes one `x,mass_on_0` row per sample of a bit-message pool.
pub fn write_snapshot_csv<W: Write>(p: &ConditionalPopulation, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{SNAPSHOT_CSV_HEADER}")?;
    for x in 0..p.conds() {
        for m in p.messages(x) {
            writeln!(out, "{x},{}", fmt_sig12(m[0]))?;
        }
    }
    Ok(())
}

/// Sidecar metadata for a population snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub pop_size: usize,
    pub sweeps: usize,
    pub seed: u64,
    pub channel_hash: String,
}
