//! Channel specifications.
//!
//! A Markov channel over the binary input alphabet has an output alphabet
//! `Y`, a state alphabet `S`, an emission law `W(y | x, s)`, a state
//! transition law `V(s' | y, x, s)` and an initial state law `V0(s)`.
//! Memoryless channels embed as the single-state case.
//!
//! Besides validation and classification this module provides the
//! channel-only pieces of the replica analysis: the state chain `Q0` and its
//! irreducibility, the stationary left-to-state message, and the
//! hard-constraint test for the existence of the frozen solution.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{check_probability, Error, Result};
use crate::stats::{batch_means, Estimate};

/// Entries below this are treated as exact zeros in support tests.
pub const SUPPORT_EPS: f64 = 1e-15;
/// Tolerance for comparing transition rows during classification.
pub const CLASSIFY_TOL: f64 = 1e-12;
/// Rows whose sum is this close to one are renormalized on ingestion.
pub const INGEST_TOL: f64 = 1e-6;

const X: usize = 2;

fn clamp_support(v: f64) -> f64 {
    if v < SUPPORT_EPS {
        0.0
    } else {
        v
    }
}

/// Validates the entries of a probability row and rescales it to sum to one.
fn normalize_row(row: &mut [f64], name: impl Fn() -> String) -> Result<()> {
    for v in row.iter_mut() {
        if !v.is_finite() || *v < 0.0 || *v > 1.0 + INGEST_TOL {
            return Err(Error::Validation(format!(
                "{} has entry {v} outside [0, 1]",
                name()
            )));
        }
        *v = clamp_support(*v);
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > INGEST_TOL {
        return Err(Error::Validation(format!(
            "{} sums to {sum}, expected 1",
            name()
        )));
    }
    row.iter_mut().for_each(|v| *v /= sum);
    Ok(())
}

/// A binary-input memoryless channel `W(y | x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MemorylessChannelSpec {
    outputs: Vec<String>,
    /// `w[x][y]`
    w: [Vec<f64>; 2],
}

impl MemorylessChannelSpec {
    /// `w[x][y]` must hold one probability row per input.
    pub fn new(outputs: Vec<String>, w: [Vec<f64>; 2]) -> Result<Self> {
        check_labels("outputs", &outputs)?;
        let mut w = w;
        for (x, row) in w.iter_mut().enumerate() {
            if row.len() != outputs.len() {
                return Err(Error::Validation(format!(
                    "W[x={x}] has {} entries for {} outputs",
                    row.len(),
                    outputs.len()
                )));
            }
            normalize_row(row, || format!("W[x={x}]"))?;
        }
        Ok(MemorylessChannelSpec { outputs, w })
    }

    /// Binary erasure channel; outputs `0, 1, *`.
    pub fn bec(eps: f64) -> Result<Self> {
        check_probability("eps", eps)?;
        Self::new(
            labels(&["0", "1", "*"]),
            [vec![1.0 - eps, 0.0, eps], vec![0.0, 1.0 - eps, eps]],
        )
    }

    /// Binary symmetric channel with crossover `p`.
    pub fn bsc(p: f64) -> Result<Self> {
        check_probability("p", p)?;
        Self::new(labels(&["0", "1"]), [vec![1.0 - p, p], vec![p, 1.0 - p]])
    }

    /// Z-channel: a transmitted 1 is received as 0 with probability `p`.
    pub fn z_channel(p: f64) -> Result<Self> {
        check_probability("p", p)?;
        Self::new(labels(&["0", "1"]), [vec![1.0, 0.0], vec![p, 1.0 - p]])
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs.len()
    }

    /// `W(y | x)`.
    pub fn w(&self, y: usize, x: usize) -> f64 {
        self.w[x][y]
    }

    /// Channel-term `sum_x (1/2) sum_y W(y|x) ln W(y|x)` in nats.
    pub fn mean_log_likelihood(&self) -> f64 {
        (0..X)
            .flat_map(|x| self.w[x].iter())
            .filter(|&&p| p > 0.0)
            .map(|&p| 0.5 * p * p.ln())
            .sum()
    }

    /// Whether every output has a single nonzero likelihood value across
    /// inputs, so that all posterior messages are uniform over their support.
    pub fn is_erasure_like(&self) -> bool {
        (0..self.num_outputs()).all(|y| same_nonzero((0..X).map(|x| self.w[x][y])))
    }

    /// An output involution `y -> y'` with `W(y|0) = W(y'|1)`, if one exists.
    pub fn symmetry(&self) -> Option<Vec<usize>> {
        let ny = self.num_outputs();
        let mut map = vec![usize::MAX; ny];
        for y in 0..ny {
            let target = (0..ny).find(|&z| {
                (self.w[0][y] - self.w[1][z]).abs() < CLASSIFY_TOL
                    && (self.w[1][y] - self.w[0][z]).abs() < CLASSIFY_TOL
                    && (map[z] == usize::MAX || map[z] == y)
            })?;
            map[y] = target;
        }
        Some(map)
    }

    pub fn sample_output<R: Rng>(&self, x: usize, rng: &mut R) -> usize {
        sample_index(&self.w[x], rng)
    }
}

fn same_nonzero(values: impl Iterator<Item = f64>) -> bool {
    let mut seen: Option<f64> = None;
    for v in values.filter(|&v| v > 0.0) {
        match seen {
            None => seen = Some(v),
            Some(s) if (s - v).abs() > CLASSIFY_TOL => return false,
            _ => {}
        }
    }
    true
}

pub(crate) fn sample_index<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            if u < w {
                return i;
            }
            u -= w;
            last = i;
        }
    }
    last
}

fn labels(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn check_labels(what: &str, labels: &[String]) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::Validation(format!("`{what}` is empty")));
    }
    for (i, a) in labels.iter().enumerate() {
        if labels[..i].contains(a) {
            return Err(Error::Validation(format!(
                "`{what}` repeats the label {a:?}"
            )));
        }
    }
    Ok(())
}

/// Class of a Markov channel, from most general to most specific.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelClass {
    /// The state transition depends on the output.
    General,
    /// The state transition is independent of the output.
    IntersymbolInterference,
    /// The state transition is independent of both output and input.
    FiniteStateMarkov,
}

impl std::fmt::Display for ChannelClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ChannelClass::General => "general",
            ChannelClass::IntersymbolInterference => "intersymbol_interference",
            ChannelClass::FiniteStateMarkov => "finite_state_markov",
        })
    }
}

/// A binary-input channel with state.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovChannelSpec {
    outputs: Vec<String>,
    states: Vec<String>,
    /// `W(y|x,s)` at `(x * S + s) * Y + y`.
    w: Vec<f64>,
    /// `V(s'|y,x,s)` at `((y * 2 + x) * S + s) * S + s'`.
    v: Vec<f64>,
    v0: Vec<f64>,
}

impl MarkovChannelSpec {
    /// Builds and validates a spec from nested tables `w[x][s][y]`,
    /// `v[y][x][s][s']` and `v0[s]`.
    ///
    /// Rows summing to within `1e-6` of one are renormalized, worse rows are
    /// rejected. Transition rows are only required to be stochastic where the
    /// emission probability is positive.
    pub fn new(
        outputs: Vec<String>,
        states: Vec<String>,
        w: Vec<Vec<Vec<f64>>>,
        v: Vec<Vec<Vec<Vec<f64>>>>,
        v0: Vec<f64>,
    ) -> Result<Self> {
        check_labels("outputs", &outputs)?;
        check_labels("states", &states)?;
        let (ny, ns) = (outputs.len(), states.len());
        let shape_err = |what: &str| Error::Validation(format!("`{what}` has the wrong shape"));
        if w.len() != X
            || w.iter()
                .any(|ws| ws.len() != ns || ws.iter().any(|r| r.len() != ny))
        {
            return Err(shape_err("W (expected [x][s][y])"));
        }
        if v.len() != ny
            || v.iter().any(|vy| {
                vy.len() != X
                    || vy
                        .iter()
                        .any(|vx| vx.len() != ns || vx.iter().any(|r| r.len() != ns))
            })
        {
            return Err(shape_err("V (expected [y][x][s][s'])"));
        }
        if v0.len() != ns {
            return Err(shape_err("V0 (expected [s])"));
        }
        let mut wf = vec![0.0; X * ns * ny];
        for x in 0..X {
            for s in 0..ns {
                let mut row = w[x][s].clone();
                normalize_row(&mut row, || format!("W[x={x}][s={s}]"))?;
                wf[(x * ns + s) * ny..(x * ns + s + 1) * ny].copy_from_slice(&row);
            }
        }
        let mut vf = vec![0.0; ny * X * ns * ns];
        for y in 0..ny {
            for x in 0..X {
                for s in 0..ns {
                    let mut row = v[y][x][s].clone();
                    let name = || format!("V[y={}][x={x}][s={s}]", outputs[y]);
                    if wf[(x * ns + s) * ny + y] > 0.0 {
                        normalize_row(&mut row, name)?;
                    } else {
                        // Unreachable row: only entry ranges matter.
                        for e in row.iter_mut() {
                            if !e.is_finite() || *e < 0.0 {
                                return Err(Error::Validation(format!(
                                    "{} has entry {e} outside [0, 1]",
                                    name()
                                )));
                            }
                            *e = clamp_support(*e);
                        }
                    }
                    let base = ((y * X + x) * ns + s) * ns;
                    vf[base..base + ns].copy_from_slice(&row);
                }
            }
        }
        let mut v0 = v0;
        normalize_row(&mut v0, || "V0".to_string())?;
        Ok(MarkovChannelSpec {
            outputs,
            states,
            w: wf,
            v: vf,
            v0,
        })
    }

    /// The dicode erasure channel: the output is `x - s` or the erasure `*`
    /// with probability `eps`, and the next state is the current input.
    pub fn dec(eps: f64) -> Result<Self> {
        check_probability("eps", eps)?;
        let mut w = vec![vec![vec![0.0; 4]; 2]; 2];
        for (x, wx) in w.iter_mut().enumerate() {
            for (s, row) in wx.iter_mut().enumerate() {
                let y = (x as i32 - s as i32 + 1) as usize;
                row[y] = 1.0 - eps;
                row[3] = eps;
            }
        }
        let v = (0..4)
            .map(|_| {
                (0..2)
                    .map(|x| (0..2).map(|_| unit(2, x)).collect())
                    .collect()
            })
            .collect();
        Self::new(
            labels(&["-1", "0", "1", "*"]),
            labels(&["0", "1"]),
            w,
            v,
            vec![0.5, 0.5],
        )
    }

    /// Gilbert-Elliott channel: a BSC with crossover `p_good` or `p_bad`
    /// depending on a two-state chain that moves good -> bad with probability
    /// `g` and bad -> good with probability `b`.
    pub fn gilbert_elliott(g: f64, b: f64, p_good: f64, p_bad: f64) -> Result<Self> {
        for (name, p) in [("g", g), ("b", b), ("p_good", p_good), ("p_bad", p_bad)] {
            check_probability(name, p)?;
        }
        let p = [p_good, p_bad];
        let w = (0..2)
            .map(|x| {
                (0..2)
                    .map(|s| {
                        if x == 0 {
                            vec![1.0 - p[s], p[s]]
                        } else {
                            vec![p[s], 1.0 - p[s]]
                        }
                    })
                    .collect()
            })
            .collect();
        let trans = [vec![1.0 - g, g], vec![b, 1.0 - b]];
        let v = (0..2)
            .map(|_| (0..2).map(|_| trans.to_vec()).collect())
            .collect();
        let pi = if g + b > 0.0 {
            vec![b / (g + b), g / (g + b)]
        } else {
            vec![0.5, 0.5]
        };
        Self::new(labels(&["0", "1"]), labels(&["good", "bad"]), w, v, pi)
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    /// `W(y | x, s)`.
    #[inline]
    pub fn w(&self, y: usize, x: usize, s: usize) -> f64 {
        self.w[(x * self.num_states() + s) * self.num_outputs() + y]
    }

    /// `V(s1 | y, x, s)`.
    #[inline]
    pub fn v(&self, s1: usize, y: usize, x: usize, s: usize) -> f64 {
        let ns = self.num_states();
        self.v[((y * X + x) * ns + s) * ns + s1]
    }

    /// `W(y|x,s) V(s1|y,x,s)`.
    #[inline]
    pub fn wv(&self, y: usize, s1: usize, x: usize, s: usize) -> f64 {
        self.w(y, x, s) * self.v(s1, y, x, s)
    }

    pub fn v0(&self) -> &[f64] {
        &self.v0
    }

    /// Row `W(. | x, s)`.
    pub fn w_row(&self, x: usize, s: usize) -> &[f64] {
        let ny = self.num_outputs();
        let base = (x * self.num_states() + s) * ny;
        &self.w[base..base + ny]
    }

    /// Row `V(. | y, x, s)`.
    pub fn v_row(&self, y: usize, x: usize, s: usize) -> &[f64] {
        let ns = self.num_states();
        let base = ((y * X + x) * ns + s) * ns;
        &self.v[base..base + ns]
    }

    /// Nested tables `(W[x][s][y], V[y][x][s][s'])`.
    pub fn tables(&self) -> (Vec<Vec<Vec<f64>>>, Vec<Vec<Vec<Vec<f64>>>>) {
        let (ny, ns) = (self.num_outputs(), self.num_states());
        let w = (0..X)
            .map(|x| (0..ns).map(|s| self.w_row(x, s).to_vec()).collect())
            .collect();
        let v = (0..ny)
            .map(|y| {
                (0..X)
                    .map(|x| (0..ns).map(|s| self.v_row(y, x, s).to_vec()).collect())
                    .collect()
            })
            .collect();
        (w, v)
    }

    /// Whether every output takes a single nonzero likelihood value across
    /// all `(x, s)`; BP messages then stay uniform over their supports.
    pub fn is_erasure_like(&self) -> bool {
        let ns = self.num_states();
        (0..self.num_outputs())
            .all(|y| same_nonzero((0..X * ns).map(|k| self.w(y, k / ns, k % ns))))
    }

    /// Whether the next state is a deterministic function of `(y, x, s)`
    /// wherever the emission is possible.
    pub fn has_deterministic_transitions(&self) -> bool {
        let ns = self.num_states();
        (0..self.num_outputs()).all(|y| {
            (0..X * ns).all(|k| {
                let (x, s) = (k / ns, k % ns);
                self.w(y, x, s) == 0.0
                    || self
                        .v_row(y, x, s)
                        .iter()
                        .all(|&p| p == 0.0 || (p - 1.0).abs() < CLASSIFY_TOL)
            })
        })
    }

    /// Draws the output and next state for input `x` in state `s`.
    pub fn step<R: Rng>(&self, x: usize, s: usize, rng: &mut R) -> (usize, usize) {
        let y = sample_index(self.w_row(x, s), rng);
        let s1 = sample_index(self.v_row(y, x, s), rng);
        (y, s1)
    }

    /// Transmits `x` through the channel from a state drawn from `V0`.
    /// Returns the outputs and the visited states `s_1..s_N`.
    pub fn transmit<R: Rng>(&self, x: &[u8], rng: &mut R) -> (Vec<usize>, Vec<usize>) {
        let mut s = sample_index(&self.v0, rng);
        let mut ys = Vec::with_capacity(x.len());
        let mut ss = Vec::with_capacity(x.len());
        for &xi in x {
            ss.push(s);
            let (y, s1) = self.step(xi as usize, s, rng);
            ys.push(y);
            s = s1;
        }
        (ys, ss)
    }
}

fn unit(n: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[k] = 1.0;
    v
}

/// Single-state embedding of a memoryless channel.
pub fn embed_memoryless(w: &MemorylessChannelSpec) -> MarkovChannelSpec {
    let ny = w.num_outputs();
    let wt = (0..X).map(|x| vec![w.w[x].clone()]).collect();
    let vt = (0..ny)
        .map(|_| (0..X).map(|_| vec![vec![1.0]]).collect())
        .collect();
    MarkovChannelSpec::new(w.outputs.clone(), labels(&["0"]), wt, vt, vec![1.0])
        .expect("embedding of a valid memoryless channel is valid")
}

fn rows_close(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(p, q)| (p - q).abs() <= CLASSIFY_TOL)
}

/// The most specific class whose independence condition holds. Transition
/// rows are compared only where the emission is possible.
pub fn classify(c: &MarkovChannelSpec) -> ChannelClass {
    let (ny, ns) = (c.num_outputs(), c.num_states());
    // Representative row per (x, s): the transition under the first possible y.
    let mut rep: Vec<Vec<Option<&[f64]>>> = vec![vec![None; ns]; X];
    let mut isi = true;
    for x in 0..X {
        for s in 0..ns {
            for y in (0..ny).filter(|&y| c.w(y, x, s) > 0.0) {
                let row = c.v_row(y, x, s);
                match rep[x][s] {
                    None => rep[x][s] = Some(row),
                    Some(r) if !rows_close(r, row) => isi = false,
                    _ => {}
                }
            }
        }
    }
    if !isi {
        return ChannelClass::General;
    }
    let fsm = (0..ns).all(|s| match (rep[0][s], rep[1][s]) {
        (Some(a), Some(b)) => rows_close(a, b),
        _ => true,
    });
    if fsm {
        ChannelClass::FiniteStateMarkov
    } else {
        ChannelClass::IntersymbolInterference
    }
}

/// The state chain used by the irreducibility assumption, restricted to its
/// support set.
#[derive(Debug, Clone, PartialEq)]
pub struct StateChain {
    /// States kept in the support set `T0`, ascending.
    pub support: Vec<usize>,
    /// Row-stochastic `q[i][j] = Q0(support[j] | support[i])`.
    pub q: Vec<Vec<f64>>,
}

/// Unnormalized `K(s1 | s2) = sum_y sum_x2 W(y|x2,s2) V(s1|y,x2,s2)`.
fn state_kernel(c: &MarkovChannelSpec) -> Vec<Vec<f64>> {
    let ns = c.num_states();
    let mut k = vec![vec![0.0; ns]; ns];
    for (s2, row) in k.iter_mut().enumerate() {
        for (s1, entry) in row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for y in 0..c.num_outputs() {
                for x2 in 0..X {
                    acc += c.wv(y, s1, x2, s2);
                }
            }
            *entry = clamp_support(acc);
        }
    }
    k
}

/// Builds `Q0` on the largest state set `T0` in which every state has
/// positive mass flowing back into `T0`.
pub fn q0_chain(c: &MarkovChannelSpec) -> Result<StateChain> {
    let k = state_kernel(c);
    let mut support: Vec<usize> = (0..c.num_states()).collect();
    loop {
        let keep: Vec<usize> = support
            .iter()
            .copied()
            .filter(|&s2| support.iter().any(|&s1| k[s2][s1] > 0.0))
            .collect();
        if keep.len() == support.len() {
            break;
        }
        support = keep;
    }
    if support.is_empty() {
        return Err(Error::MalformedChannel(
            "the support set of the state chain Q0 is empty".into(),
        ));
    }
    let q = support
        .iter()
        .map(|&s2| {
            let total: f64 = support.iter().map(|&s1| k[s2][s1]).sum();
            support.iter().map(|&s1| k[s2][s1] / total).collect()
        })
        .collect();
    Ok(StateChain { support, q })
}

fn reachable(adj: &[Vec<bool>], forward: bool) -> Vec<bool> {
    let n = adj.len();
    let mut seen = vec![false; n];
    let mut stack = vec![0usize];
    seen[0] = true;
    while let Some(u) = stack.pop() {
        for v in 0..n {
            let edge = if forward { adj[u][v] } else { adj[v][u] };
            if edge && !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

/// Whether `Q0` is irreducible on its support set.
pub fn check_irreducible_q0(c: &MarkovChannelSpec) -> Result<bool> {
    let chain = q0_chain(c)?;
    let adj: Vec<Vec<bool>> = chain
        .q
        .iter()
        .map(|row| row.iter().map(|&p| p > 0.0).collect())
        .collect();
    Ok(reachable(&adj, true).iter().all(|&b| b) && reachable(&adj, false).iter().all(|&b| b))
}

/// A normalized message over the state alphabet.
pub type StateMessage = Vec<f64>;

/// Residual target of the stationary-message iteration.
pub const STATIONARY_TOL: f64 = 1e-12;
const STATIONARY_MAX_ITER: usize = 1_000_000;

/// One application of the left-message update
/// `m(s) ∝ sum_{x2,s2} (sum_y W(y|x2,s2) V(s|y,x2,s2)) m(s2) w(x2)`.
pub fn left_message_update(c: &MarkovChannelSpec, m: &[f64], input_weights: [f64; 2]) -> Vec<f64> {
    let ns = c.num_states();
    let mut out = vec![0.0; ns];
    for (s2, &ms2) in m.iter().enumerate() {
        if ms2 == 0.0 {
            continue;
        }
        for (x2, &wx) in input_weights.iter().enumerate() {
            for y in 0..c.num_outputs() {
                let w = c.w(y, x2, s2);
                if w == 0.0 {
                    continue;
                }
                for (s, o) in out.iter_mut().enumerate() {
                    *o += w * c.v(s, y, x2, s2) * ms2 * wx;
                }
            }
        }
    }
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|o| *o /= total);
    out
}

/// Stationary left-to-state message under uniform input weights.
pub fn stationary_left_message(c: &MarkovChannelSpec) -> Result<StateMessage> {
    stationary_left_message_weighted(c, [0.5, 0.5])
}

/// Stationary left-to-state message where `input_weights[x]` plays the role
/// of `m_fv(x)^l`.
///
/// Solved by lazy power iteration, `m <- (m + T m) / 2`, which shares the
/// fixed point of `T` and also converges for periodic chains.
pub fn stationary_left_message_weighted(
    c: &MarkovChannelSpec,
    input_weights: [f64; 2],
) -> Result<StateMessage> {
    if !check_irreducible_q0(c)? {
        return Err(Error::Config(
            "the state chain Q0 is reducible; the stationary message is not unique".into(),
        ));
    }
    let total = input_weights[0] + input_weights[1];
    if !(total > 0.0) || input_weights.iter().any(|w| *w < 0.0) {
        return Err(Error::Domain {
            what: "input_weights",
            value: total,
            domain: "nonnegative with positive sum",
        });
    }
    let weights = [input_weights[0] / total, input_weights[1] / total];
    let ns = c.num_states();
    let mut m = vec![1.0 / ns as f64; ns];
    let mut residual = f64::INFINITY;
    for _ in 0..STATIONARY_MAX_ITER {
        let t = left_message_update(c, &m, weights);
        residual = t
            .iter()
            .zip(&m)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if residual <= STATIONARY_TOL {
            return Ok(t);
        }
        m.iter_mut().zip(&t).for_each(|(a, b)| *a = 0.5 * (*a + b));
    }
    Err(Error::Convergence {
        iterations: STATIONARY_MAX_ITER,
        residual,
    })
}

/// A tuple violating the hard-constraint condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FrozenWitness {
    /// For output `y`, the pair `(x2, s2)` leads to two next states.
    SplitSuccessor {
        y: usize,
        x2: usize,
        s2: usize,
        s1: [usize; 2],
    },
    /// For output `y`, next state `s1` is reached from two pairs `(x2, s2)`.
    MergedPredecessor {
        y: usize,
        s1: usize,
        pairs: [(usize, usize); 2],
    },
}

/// Outcome of [`frozen_solution_exists`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FrozenCheck {
    pub exists: bool,
    pub witness: Option<FrozenWitness>,
}

/// Hard-constraint test: for every output `y`, each `(x2, s2)` admits at most
/// one `s1` with `W(y|x2,s2) V(s1|y,x2,s2) > 0`, and each `s1` is reached by
/// at most one `(x2, s2)`. Outputs are scanned in label order; within an
/// output the successor condition is checked before the predecessor one.
pub fn frozen_solution_exists(c: &MarkovChannelSpec) -> FrozenCheck {
    let ns = c.num_states();
    let positive = |y, s1, x2, s2| clamp_support(c.wv(y, s1, x2, s2)) > 0.0;
    for y in 0..c.num_outputs() {
        for x2 in 0..X {
            for s2 in 0..ns {
                let mut hits = (0..ns).filter(|&s1| positive(y, s1, x2, s2));
                if let (Some(a), Some(b)) = (hits.next(), hits.next()) {
                    return FrozenCheck {
                        exists: false,
                        witness: Some(FrozenWitness::SplitSuccessor {
                            y,
                            x2,
                            s2,
                            s1: [a, b],
                        }),
                    };
                }
            }
        }
        for s1 in 0..ns {
            let mut hits = (0..X * ns)
                .map(|k| (k / ns, k % ns))
                .filter(|&(x2, s2)| positive(y, s1, x2, s2));
            if let (Some(a), Some(b)) = (hits.next(), hits.next()) {
                return FrozenCheck {
                    exists: false,
                    witness: Some(FrozenWitness::MergedPredecessor {
                        y,
                        s1,
                        pairs: [a, b],
                    }),
                };
            }
        }
    }
    FrozenCheck {
        exists: true,
        witness: None,
    }
}

/// Length of the simulated trajectory used by [`output_entropy_rate`].
pub const ENTROPY_RATE_STEPS: usize = 1_000_000;

/// Conditional entropy rate `lim (1/N) H(Y | X)` in nats for i.i.d. uniform
/// inputs.
///
/// With deterministic state transitions the state path is a function of the
/// inputs, outputs and initial state, so the rate is the stationary average
/// of the per-symbol emission entropy and is returned exactly. Otherwise
/// `-(1/N) ln p(y|x)` is accumulated by a forward filter along one simulated
/// trajectory of `steps` symbols, with a batch-means standard error.
pub fn output_entropy_rate(c: &MarkovChannelSpec, steps: usize, seed: u64) -> Result<Estimate> {
    let pi = stationary_left_message(c)?;
    if c.has_deterministic_transitions() {
        let mut h = 0.0;
        for (s, &ps) in pi.iter().enumerate() {
            for x in 0..X {
                for &p in c.w_row(x, s) {
                    if p > 0.0 {
                        h -= 0.5 * ps * p * p.ln();
                    }
                }
            }
        }
        return Ok(Estimate::exact(h));
    }
    let mut rng = crate::rng::stream(seed, &[crate::rng::TAG_ENTROPY]);
    let ns = c.num_states();
    let mut s = sample_index(&pi, &mut rng);
    let mut filter = pi.clone();
    let mut next = vec![0.0; ns];
    let mut incs = Vec::with_capacity(steps);
    for _ in 0..steps {
        let x = rng.gen_range(0..X);
        let (y, s1) = c.step(x, s, &mut rng);
        next.iter_mut().for_each(|v| *v = 0.0);
        let mut py = 0.0;
        for (sp, &f) in filter.iter().enumerate() {
            let w = c.w(y, x, sp) * f;
            if w == 0.0 {
                continue;
            }
            py += w;
            for (s1p, n) in next.iter_mut().enumerate() {
                *n += w * c.v(s1p, y, x, sp);
            }
        }
        incs.push(-py.ln());
        let tot: f64 = next.iter().sum();
        filter.iter_mut().zip(&next).for_each(|(f, n)| *f = n / tot);
        s = s1;
    }
    Ok(batch_means(&incs))
}

/// Either kind of channel spec, as read from a spec file.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelSpec {
    Memoryless(MemorylessChannelSpec),
    Markov(MarkovChannelSpec),
}

impl ChannelSpec {
    /// The Markov form (memoryless specs are embedded).
    pub fn to_markov(&self) -> MarkovChannelSpec {
        match self {
            ChannelSpec::Memoryless(w) => embed_memoryless(w),
            ChannelSpec::Markov(c) => c.clone(),
        }
    }

    /// Parses a JSON spec document.
    ///
    /// Keys: `outputs` (labels), `W` (`[x][y]` for memoryless specs,
    /// `[x][s][y]` otherwise), and for Markov specs `states`, `V`
    /// (`[y][x][s][s']`) and `V0`.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: SpecFile = serde_json::from_str(text).map_err(|e| {
            Error::Validation(format!("line {}, column {}: {e}", e.line(), e.column()))
        })?;
        let bad = |what: &str, e: serde_json::Error| {
            Error::Validation(format!("`{what}` has the wrong shape: {e}"))
        };
        match (file.states, file.v, file.v0) {
            (None, None, None) => {
                let w: Vec<Vec<f64>> =
                    serde_json::from_value(file.w).map_err(|e| bad("W (expected [x][y])", e))?;
                let [w0, w1]: [Vec<f64>; 2] = w.try_into().map_err(|_| {
                    Error::Validation("`W` must have exactly two input rows".into())
                })?;
                Ok(ChannelSpec::Memoryless(MemorylessChannelSpec::new(
                    file.outputs,
                    [w0, w1],
                )?))
            }
            (Some(states), Some(v), Some(v0)) => {
                let w: Vec<Vec<Vec<f64>>> =
                    serde_json::from_value(file.w).map_err(|e| bad("W (expected [x][s][y])", e))?;
                Ok(ChannelSpec::Markov(MarkovChannelSpec::new(
                    file.outputs,
                    states,
                    w,
                    v,
                    v0,
                )?))
            }
            _ => Err(Error::Validation(
                "Markov specs need all of `states`, `V` and `V0`; memoryless specs none".into(),
            )),
        }
    }

    pub fn to_json(&self) -> String {
        let file = match self {
            ChannelSpec::Memoryless(m) => SpecFile {
                outputs: m.outputs.clone(),
                states: None,
                w: serde_json::to_value(&m.w).expect("serializable"),
                v: None,
                v0: None,
            },
            ChannelSpec::Markov(c) => {
                let (w, v) = c.tables();
                SpecFile {
                    outputs: c.outputs.clone(),
                    states: Some(c.states.clone()),
                    w: serde_json::to_value(w).expect("serializable"),
                    v: Some(v),
                    v0: Some(c.v0.clone()),
                }
            }
        };
        serde_json::to_string_pretty(&file).expect("serializable")
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_json().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    states: Option<Vec<String>>,
    #[serde(rename = "W")]
    w: serde_json::Value,
    #[serde(rename = "V", default, skip_serializing_if = "Option::is_none")]
    v: Option<Vec<Vec<Vec<Vec<f64>>>>>,
    #[serde(rename = "V0", default, skip_serializing_if = "Option::is_none")]
    v0: Option<Vec<f64>>,
}
