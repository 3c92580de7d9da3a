//! Population dynamics for channels with a hidden Markov state.
//!
//! Besides the variable/check pools of the memoryless solver there are two
//! trellis pools: `psi` holds right messages over `(x, s)`, conditioned on the
//! true `(x, s)` at the receiving position, and `psi_hat` holds left messages
//! over `s`, conditioned on the true state. The left scalar message `m_Ls` is
//! the stationary solution of the state-chain fixed point and stays fixed.
//!
//! Index conventions: a condition or message entry for `(x, s)` sits at
//! `x * S + s`.

use std::io::Write;

use rand::Rng;
use serde::Serialize;

use crate::channel::{
    check_irreducible_q0, output_entropy_rate, sample_index, stationary_left_message,
    MarkovChannelSpec, StateMessage, ENTROPY_RATE_STEPS,
};
use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::population::{
    check_mc_samples, check_pop_size, combine, edge_term, factor_term, mc_term, normalize,
    resample_check, snap_erasure, ConditionalPopulation, RsEntropy, SNAP_TOL,
};
use crate::rng::{self, TAG_CHANNEL, TAG_POPULATION};
use crate::stats::fmt_sig12;

const KIND_PSI: u64 = 11;
const KIND_PSI_HAT: u64 = 12;
const KIND_CHECK: u64 = 13;
const KIND_VAR: u64 = 14;

/// How the left-message update is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum PsiHatNormalization {
    /// Divide by `sum_{x2,s2} M'(s2) prod M(x2) W(y|x2,s2)`, without the
    /// transition factor. Whenever the transition rows are stochastic on the
    /// support of `W` this equals the explicit normalizer.
    #[default]
    Printed,
    /// Divide by the sum of the numerator over the new state.
    Explicit,
}

/// Message pools for the Markov-channel saddle equations.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovPopulations {
    /// Variable-to-factor messages over `x`, conditioned on `x`.
    pub phi: ConditionalPopulation,
    /// Factor-to-variable messages over `x`, conditioned on `x`.
    pub phi_hat: ConditionalPopulation,
    /// Right messages over `(x, s)`, conditioned on `(x, s)`.
    pub psi: ConditionalPopulation,
    /// Left messages over `s`, conditioned on `s`.
    pub psi_hat: ConditionalPopulation,
    /// Stationary left scalar message.
    pub m_ls: StateMessage,
    pub psi_hat_normalization: PsiHatNormalization,
    /// Completed sweeps.
    pub generation: u64,
    /// Zero-normalizer draws that were retried so far.
    pub resampled: usize,
}

impl MarkovPopulations {
    pub fn pop_size(&self) -> usize {
        self.phi.size()
    }
}

/// Uniform pools and the stationary `m_Ls`. Fails when the state chain is
/// not irreducible on its support.
pub fn init_markov_populations(
    c: &MarkovChannelSpec,
    pop_size: usize,
    _seed: u64,
) -> Result<MarkovPopulations> {
    check_pop_size(pop_size)?;
    if !check_irreducible_q0(c)? {
        return Err(Error::Config(
            "the state chain under uniform inputs is not irreducible on its support".into(),
        ));
    }
    let ns = c.num_states();
    Ok(MarkovPopulations {
        phi: ConditionalPopulation::uniform(2, 2, pop_size),
        phi_hat: ConditionalPopulation::uniform(2, 2, pop_size),
        psi: ConditionalPopulation::uniform(2 * ns, 2 * ns, pop_size),
        psi_hat: ConditionalPopulation::uniform(ns, ns, pop_size),
        m_ls: stationary_left_message(c)?,
        psi_hat_normalization: PsiHatNormalization::default(),
        generation: 0,
        resampled: 0,
    })
}

/// `prod_i M_i(x)` over `n` draws from `phi_hat` conditioned on `cond`.
fn code_product<R: Rng>(
    phi_hat: &ConditionalPopulation,
    cond: usize,
    n: usize,
    rng: &mut R,
) -> [f64; 2] {
    let mut p = [1.0, 1.0];
    for _ in 0..n {
        let m = phi_hat.draw(cond, rng);
        p[0] *= m[0];
        p[1] *= m[1];
    }
    p
}

/// Joint table of `(y, s1)` given `(x, s)`: entry `y * S + s1` is `W(y|x,s) V(s1|y,x,s)`.
fn emission_tables(c: &MarkovChannelSpec) -> Vec<Vec<f64>> {
    let (ny, ns) = (c.num_outputs(), c.num_states());
    (0..2 * ns)
        .map(|k| {
            let (x, s) = (k / ns, k % ns);
            (0..ny * ns).map(|j| c.wv(j / ns, j % ns, x, s)).collect()
        })
        .collect()
}

/// Rebuilds `psi`. For a sample conditioned on `(x, s)`: draw `y`, the next
/// state `s1` and an independent uniform next input `x1`; draw `M'` from `psi`
/// at `(x1, s1)` and `l` messages from `phi_hat` at `x1`; emit
/// `M(x', s') ∝ sum_{x1,s1} M'(x1,s1) prod M(x1) W(y|x',s') V(s1|y,x',s')`.
pub fn update_psi(
    pop: &MarkovPopulations,
    c: &MarkovChannelSpec,
    e: &Ensemble,
    seed: u64,
) -> Result<MarkovPopulations> {
    let (ns, l) = (c.num_states(), e.l());
    let tables = emission_tables(c);
    let snap = c.is_erasure_like();
    let (psi, retries) = ConditionalPopulation::resample(
        2 * ns,
        2 * ns,
        pop.pop_size(),
        seed,
        &[TAG_POPULATION, KIND_PSI],
        |k, rng, out| {
            let j = sample_index(&tables[k], rng);
            let (y, s1) = (j / ns, j % ns);
            let x1 = rng.gen_range(0..2);
            let prev = pop.psi.draw(x1 * ns + s1, rng);
            let code = code_product(&pop.phi_hat, x1, l, rng);
            // g(s1') = sum_{x1'} M'(x1', s1') prod M(x1')
            let g: Vec<f64> = (0..ns)
                .map(|t| prev[t] * code[0] + prev[ns + t] * code[1])
                .collect();
            for xp in 0..2 {
                for sp in 0..ns {
                    let w = c.w(y, xp, sp);
                    out[xp * ns + sp] = if w == 0.0 {
                        0.0
                    } else {
                        w * c
                            .v_row(y, xp, sp)
                            .iter()
                            .zip(&g)
                            .map(|(v, g)| v * g)
                            .sum::<f64>()
                    };
                }
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
    Ok(MarkovPopulations {
        psi,
        resampled: pop.resampled + retries,
        ..pop.clone()
    })
}

/// Rebuilds `psi_hat`. For a sample conditioned on `s`: draw the previous
/// position's `(x2, s2, y)` with weight `m_Ls(s2) W(y|x2,s2) V(s|y,x2,s2)`;
/// draw `M'` from `psi_hat` at `s2` and `l` messages from `phi_hat` at `x2`;
/// emit `M(s') ∝ sum_{x2,s2} M'(s2) prod M(x2) W(y|x2,s2) V(s'|y,x2,s2)`.
pub fn update_psi_hat(
    pop: &MarkovPopulations,
    c: &MarkovChannelSpec,
    e: &Ensemble,
    seed: u64,
) -> Result<MarkovPopulations> {
    let (ny, ns, l) = (c.num_outputs(), c.num_states(), e.l());
    // Entry (x2 * S + s2) * Y + y of table s.
    let tables: Vec<Vec<f64>> = (0..ns)
        .map(|s| {
            (0..2 * ns * ny)
                .map(|j| {
                    let (x2, s2, y) = (j / (ns * ny), (j / ny) % ns, j % ny);
                    pop.m_ls[s2] * c.wv(y, s, x2, s2)
                })
                .collect()
        })
        .collect();
    let reachable: Vec<bool> = tables.iter().map(|t| t.iter().sum::<f64>() > 0.0).collect();
    let snap = c.is_erasure_like();
    let norm = pop.psi_hat_normalization;
    let (psi_hat, retries) = ConditionalPopulation::resample(
        ns,
        ns,
        pop.pop_size(),
        seed,
        &[TAG_POPULATION, KIND_PSI_HAT],
        |s, rng, out| {
            if !reachable[s] {
                // Never used: no draw ever conditions on a state outside the
                // support of m_Ls.
                out.iter_mut().for_each(|v| *v = 1.0 / ns as f64);
                return true;
            }
            let j = sample_index(&tables[s], rng);
            let y = j % ny;
            let prev = pop.psi_hat.draw(j / ny % ns, rng);
            let code = code_product(&pop.phi_hat, j / (ns * ny), l, rng);
            out.iter_mut().for_each(|v| *v = 0.0);
            let mut printed = 0.0;
            for x2 in 0..2 {
                for s2 in 0..ns {
                    let a = prev[s2] * code[x2] * c.w(y, x2, s2);
                    if a == 0.0 {
                        continue;
                    }
                    printed += a;
                    for (o, v) in out.iter_mut().zip(c.v_row(y, x2, s2)) {
                        *o += a * v;
                    }
                }
            }
            match norm {
                PsiHatNormalization::Printed => {
                    if !(printed > 0.0) {
                        return false;
                    }
                    out.iter_mut().for_each(|v| *v /= printed);
                }
                PsiHatNormalization::Explicit => {
                    if !normalize(out) {
                        return false;
                    }
                }
            }
            if snap {
                snap_erasure(out);
            }
            true
        },
    )?;
    Ok(MarkovPopulations {
        psi_hat,
        resampled: pop.resampled + retries,
        ..pop.clone()
    })
}

/// Rebuilds `phi_hat` through the parity checks; identical to the memoryless
/// check update.
pub fn update_markov_check(
    pop: &MarkovPopulations,
    e: &Ensemble,
    snap: bool,
    seed: u64,
) -> MarkovPopulations {
    MarkovPopulations {
        phi_hat: resample_check(&pop.phi, e, &[TAG_POPULATION, KIND_CHECK], seed, snap),
        ..pop.clone()
    }
}

/// Rebuilds `phi`. For a sample conditioned on `x`: draw `s ~ m_Ls`, `M_R`
/// from `psi` at `(x, s)`, `M_L` from `psi_hat` at `s` and `l - 1` messages
/// from `phi_hat` at `x`; emit `M(x') ∝ sum_s M_R(x',s) M_L(s) prod M(x')`.
pub fn update_markov_var(
    pop: &MarkovPopulations,
    c: &MarkovChannelSpec,
    e: &Ensemble,
    seed: u64,
) -> Result<MarkovPopulations> {
    let (ns, l) = (c.num_states(), e.l());
    let snap = c.is_erasure_like();
    let (phi, retries) = ConditionalPopulation::resample(
        2,
        2,
        pop.pop_size(),
        seed,
        &[TAG_POPULATION, KIND_VAR],
        |x, rng, out| {
            let s = sample_index(&pop.m_ls, rng);
            let right = pop.psi.draw(x * ns + s, rng);
            let left = pop.psi_hat.draw(s, rng);
            let code = code_product(&pop.phi_hat, x, l - 1, rng);
            for xp in 0..2 {
                let chan: f64 = (0..ns).map(|t| right[xp * ns + t] * left[t]).sum();
                out[xp] = chan * code[xp];
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
    Ok(MarkovPopulations {
        phi,
        resampled: pop.resampled + retries,
        ..pop.clone()
    })
}

/// One sweep in the order psi, psi_hat, check, var. The sweep's streams are
/// derived from `seed` and the current generation.
pub fn sweep_markov(
    pop: &MarkovPopulations,
    c: &MarkovChannelSpec,
    e: &Ensemble,
    seed: u64,
) -> Result<MarkovPopulations> {
    let s = rng::derive_seed(seed, &[TAG_POPULATION, pop.generation]);
    let mut next = update_psi(pop, c, e, rng::derive_seed(s, &[KIND_PSI]))?;
    next = update_psi_hat(&next, c, e, rng::derive_seed(s, &[KIND_PSI_HAT]))?;
    next = update_markov_check(
        &next,
        e,
        c.is_erasure_like(),
        rng::derive_seed(s, &[KIND_CHECK]),
    );
    next = update_markov_var(&next, c, e, rng::derive_seed(s, &[KIND_VAR]))?;
    next.generation += 1;
    Ok(next)
}

/// Runs `sweeps` sweeps from the uniform initial state.
pub fn run_markov_population_dynamics(
    c: &MarkovChannelSpec,
    e: &Ensemble,
    pop_size: usize,
    sweeps: usize,
    seed: u64,
) -> Result<MarkovPopulations> {
    if sweeps == 0 {
        return Err(Error::Config("sweeps must be at least 1".into()));
    }
    let mut pop = init_markov_populations(c, pop_size, seed)?;
    for _ in 0..sweeps {
        pop = sweep_markov(&pop, c, e, seed)?;
    }
    Ok(pop)
}

/// Fractions of erased messages in each pool. On an erasure channel these are
/// the four scalar parameters of the closed-form saddle system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErasedFractions {
    pub e_fv: f64,
    pub e_vf: f64,
    /// A right message counts as erased when the state marginal of
    /// `M_R(x, s) prod_l M(x)` is uniform, i.e. it says nothing about the
    /// previous input.
    pub e_rv: f64,
    pub e_ls: f64,
}

impl ErasedFractions {
    pub fn params(&self) -> [f64; 4] {
        [self.e_fv, self.e_vf, self.e_rv, self.e_ls]
    }
}

fn is_uniform(v: &[f64]) -> bool {
    let s: f64 = v.iter().sum();
    let u = s / v.len() as f64;
    s > 0.0 && v.iter().all(|&x| (x - u).abs() <= SNAP_TOL * s)
}

/// Erased fractions, averaging conditions with weight `1/2` over `x` and
/// `m_Ls` over `s`. The right-message fraction draws fresh `phi_hat` messages
/// from `seed`.
pub fn erased_fractions(pop: &MarkovPopulations, e: &Ensemble, seed: u64) -> ErasedFractions {
    let ns = pop.m_ls.len();
    let bits = |p: &ConditionalPopulation| 0.5 * (p.uniform_fraction(0) + p.uniform_fraction(1));
    let e_ls = (0..ns)
        .map(|s| pop.m_ls[s] * pop.psi_hat.uniform_fraction(s))
        .sum();
    let mut rng = rng::stream(seed, &[TAG_POPULATION, KIND_PSI, u64::MAX]);
    let mut e_rv = 0.0;
    let mut g = vec![0.0; ns];
    for x in 0..2 {
        for s in 0..ns {
            if pop.m_ls[s] == 0.0 {
                continue;
            }
            let hits = pop
                .psi
                .messages(x * ns + s)
                .filter(|m| {
                    let code = code_product(&pop.phi_hat, x, e.l(), &mut rng);
                    for (t, gt) in g.iter_mut().enumerate() {
                        *gt = m[t] * code[0] + m[ns + t] * code[1];
                    }
                    is_uniform(&g)
                })
                .count();
            e_rv += 0.5 * pop.m_ls[s] * hits as f64 / pop.pop_size() as f64;
        }
    }
    ErasedFractions {
        e_fv: bits(&pop.phi_hat),
        e_vf: bits(&pop.phi),
        e_rv,
        e_ls,
    }
}

/// Replica-symmetric conditional entropy per bit, in bits, for a Markov
/// channel: the coupled two-site channel term minus the single-site term,
/// plus the factor term, minus `l` times the edge term, plus the conditional
/// output entropy rate `H(Y|X)`.
///
/// `entropy_rate_steps` sets the length of the simulated channel run used for
/// `H(Y|X)` when the state transitions are random; pass
/// [`ENTROPY_RATE_STEPS`] for the default.
pub fn rs_entropy_markov(
    pop: &MarkovPopulations,
    c: &MarkovChannelSpec,
    e: &Ensemble,
    mc_samples: usize,
    entropy_rate_steps: usize,
    seed: u64,
) -> Result<RsEntropy> {
    check_mc_samples(mc_samples)?;
    let (ns, l) = (c.num_states(), e.l());
    let tables = emission_tables(c);
    let coupled = mc_term(mc_samples, seed, 21, |rng| {
        let x2 = rng.gen_range(0..2);
        let s2 = sample_index(&pop.m_ls, rng);
        let j = sample_index(&tables[x2 * ns + s2], rng);
        let (y, s1) = (j / ns, j % ns);
        let x1 = rng.gen_range(0..2);
        let right = pop.psi.draw(x1 * ns + s1, rng);
        let left = pop.psi_hat.draw(s2, rng);
        let c1 = code_product(&pop.phi_hat, x1, l, rng);
        let c2 = code_product(&pop.phi_hat, x2, l, rng);
        // a(t) = sum_{x1'} M_R(x1', t) prod M1(x1')
        let a: Vec<f64> = (0..ns)
            .map(|t| right[t] * c1[0] + right[ns + t] * c1[1])
            .collect();
        let mut z = 0.0;
        for xp in 0..2 {
            for sp in 0..ns {
                let b = left[sp] * c2[xp] * c.w(y, xp, sp);
                if b > 0.0 {
                    z += b * c
                        .v_row(y, xp, sp)
                        .iter()
                        .zip(&a)
                        .map(|(v, a)| v * a)
                        .sum::<f64>();
                }
            }
        }
        z.ln()
    });
    let single = mc_term(mc_samples, seed, 22, |rng| {
        let x = rng.gen_range(0..2);
        let s = sample_index(&pop.m_ls, rng);
        let right = pop.psi.draw(x * ns + s, rng);
        let left = pop.psi_hat.draw(s, rng);
        let code = code_product(&pop.phi_hat, x, l, rng);
        let z: f64 = (0..2)
            .map(|xp| code[xp] * (0..ns).map(|t| right[xp * ns + t] * left[t]).sum::<f64>())
            .sum();
        z.ln()
    });
    let factor = factor_term(&pop.phi, e, mc_samples, seed, 23);
    let edge = edge_term(&pop.phi, &pop.phi_hat, mc_samples, seed, 24);
    let channel = output_entropy_rate(
        c,
        entropy_rate_steps,
        rng::derive_seed(seed, &[TAG_CHANNEL]),
    )?;
    let lf = l as f64;
    let (mean, se) = combine(&[
        (1.0, coupled),
        (-1.0, single),
        (lf / e.r() as f64, factor),
        (-lf, edge),
        (1.0, channel),
    ]);
    Ok(RsEntropy::from_nats(mean, se))
}

/// [`rs_entropy_markov`] with the default channel-run length.
pub fn rs_entropy_markov_default(
    pop: &MarkovPopulations,
    c: &MarkovChannelSpec,
    e: &Ensemble,
    mc_samples: usize,
    seed: u64,
) -> Result<RsEntropy> {
    rs_entropy_markov(pop, c, e, mc_samples, ENTROPY_RATE_STEPS, seed)
}

/// Writes one `x,s,m_<x'>_<s'>...` row per right message.
pub fn write_psi_csv<W: Write>(pop: &MarkovPopulations, mut out: W) -> std::io::Result<()> {
    let ns = pop.m_ls.len();
    let cols: Vec<String> = (0..2 * ns)
        .map(|k| format!("m_{}_{}", k / ns, k % ns))
        .collect();
    writeln!(out, "x,s,{}", cols.join(","))?;
    for k in 0..2 * ns {
        for m in pop.psi.messages(k) {
            let vals: Vec<String> = m.iter().map(|&v| fmt_sig12(v)).collect();
            writeln!(out, "{},{},{}", k / ns, k % ns, vals.join(","))?;
        }
    }
    Ok(())
}

/// Writes one `s,m_<s'>...` row per left message.
pub fn write_psi_hat_csv<W: Write>(pop: &MarkovPopulations, mut out: W) -> std::io::Result<()> {
    let ns = pop.m_ls.len();
    let cols: Vec<String> = (0..ns).map(|s| format!("m_{s}")).collect();
    writeln!(out, "s,{}", cols.join(","))?;
    for s in 0..ns {
        for m in pop.psi_hat.messages(s) {
            let vals: Vec<String> = m.iter().map(|&v| fmt_sig12(v)).collect();
            writeln!(out, "{s},{}", vals.join(","))?;
        }
    }
    Ok(())
}
