//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

/// Erasure probability of variable-to-check messages at the fixed point of
/// `x = eps (1 - (1 - x)^(r-1))^(l-1)` reached from `x = eps`.
pub fn bec_fixed_point(l: usize, r: usize, eps: f64) -> f64 {
    let mut x = eps;
    for _ in 0..1_000_000 {
        let next = eps * (1.0 - (1.0 - x).powi(r as i32 - 1)).powi(l as i32 - 1);
        if (next - x).abs() < 1e-15 {
            return next;
        }
        x = next;
    }
    x
}

/// Erasure probability of check-to-variable messages given `x`.
pub fn bec_check_erasure(r: usize, x: f64) -> f64 {
    1.0 - (1.0 - x).powi(r as i32 - 1)
}

/// Scalar BEC BP threshold by bisection on whether the recursion dies out.
pub fn bec_bp_threshold(l: usize, r: usize) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > 1e-7 {
        let mid = 0.5 * (lo + hi);
        if bec_fixed_point(l, r, mid) < 1e-9 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Probability that `r` independent Bernoulli(p) bits have even parity, by
/// enumeration of the even-weight tuples.
pub fn even_parity_probability(p: f64, r: usize) -> f64 {
    (0u32..1 << r)
        .filter(|t| t.count_ones() % 2 == 0)
        .map(|t| {
            let w = t.count_ones() as i32;
            p.powi(w) * (1.0 - p).powi(r as i32 - w)
        })
        .sum()
}

use ldpc_replica::channel::MarkovChannelSpec;
use ldpc_replica::graph::TannerGraph;
use rand::Rng;

/// Exact posterior marginals `p(x_i | y)` by summing the joint weight over
/// every input word and every state path.
pub fn brute_force_marginals(g: &TannerGraph, c: &MarkovChannelSpec, y: &[usize]) -> Vec<[f64; 2]> {
    let n = g.num_variables();
    let ns = c.num_states();
    let paths = ns.pow(n as u32);
    let mut acc = vec![[0.0; 2]; n];
    let mut s = vec![0usize; n];
    for word in 0u32..1 << n {
        let x: Vec<u8> = (0..n).map(|i| ((word >> i) & 1) as u8).collect();
        if !g.is_codeword(&x) {
            continue;
        }
        let mut total = 0.0;
        for path in 0..paths {
            let mut p = path;
            for si in s.iter_mut() {
                *si = p % ns;
                p /= ns;
            }
            let mut w = c.v0()[s[0]];
            for i in 0..n {
                w *= c.w(y[i], x[i] as usize, s[i]);
                if i + 1 < n {
                    w *= c.v(s[i + 1], y[i], x[i] as usize, s[i]);
                }
            }
            total += w;
        }
        for i in 0..n {
            acc[i][x[i] as usize] += total;
        }
    }
    acc.iter()
        .map(|a| {
            let z = a[0] + a[1];
            [a[0] / z, a[1] / z]
        })
        .collect()
}

fn random_row<R: Rng>(len: usize, rng: &mut R) -> Vec<f64> {
    let row: Vec<f64> = (0..len).map(|_| 0.05 + rng.gen::<f64>()).collect();
    let s: f64 = row.iter().sum();
    row.iter().map(|v| v / s).collect()
}

/// A random two-state channel with `ny` outputs. With `iid_states` the next
/// state is drawn from a fixed distribution regardless of `(y, x, s)`.
pub fn random_channel<R: Rng>(ny: usize, iid_states: bool, rng: &mut R) -> MarkovChannelSpec {
    let ns = 2;
    let outputs = (0..ny).map(|y| y.to_string()).collect();
    let states = (0..ns).map(|s| format!("s{s}")).collect();
    let w = (0..2)
        .map(|_| (0..ns).map(|_| random_row(ny, rng)).collect())
        .collect();
    let q = random_row(ns, rng);
    let v = (0..ny)
        .map(|_| {
            (0..2)
                .map(|_| {
                    (0..ns)
                        .map(|_| {
                            if iid_states {
                                q.clone()
                            } else {
                                random_row(ns, rng)
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    MarkovChannelSpec::new(outputs, states, w, v, random_row(ns, rng)).unwrap()
}

/// A graph whose checks all have degree one, on `n` variables.
pub fn leaf_check_graph<R: Rng>(n: usize, rng: &mut R) -> TannerGraph {
    let checks: Vec<Vec<usize>> = (0..n)
        .filter(|_| rng.gen_bool(0.4))
        .map(|v| vec![v])
        .collect();
    TannerGraph::from_checks(n, &checks).unwrap()
}

/// A Tanner forest: checks of degree 2 or 3 that never close a cycle.
pub fn tanner_forest<R: Rng>(n: usize, rng: &mut R) -> TannerGraph {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut Vec<usize>, v: usize) -> usize {
        let mut r = v;
        while p[r] != r {
            r = p[r];
        }
        p[v] = r;
        r
    }
    let mut checks = Vec::new();
    for _ in 0..n {
        let deg = rng.gen_range(2..=3);
        let mut vars: Vec<usize> = Vec::new();
        for _ in 0..deg {
            let v = rng.gen_range(0..n);
            let root = find(&mut parent, v);
            if vars.iter().all(|&u| find(&mut parent, u) != root) {
                vars.push(v);
            }
        }
        if vars.len() >= 2 {
            let r0 = find(&mut parent, vars[0]);
            for &v in &vars[1..] {
                let r = find(&mut parent, v);
                parent[r] = r0;
            }
            checks.push(vars);
        }
    }
    TannerGraph::from_checks(n, &checks).unwrap()
}

/// A uniformly random codeword of a small graph, by enumeration.
pub fn random_small_codeword<R: Rng>(g: &TannerGraph, rng: &mut R) -> Vec<u8> {
    let n = g.num_variables();
    let words: Vec<Vec<u8>> = (0u32..1 << n)
        .map(|w| (0..n).map(|i| ((w >> i) & 1) as u8).collect())
        .filter(|x: &Vec<u8>| g.is_codeword(x))
        .collect();
    words[rng.gen_range(0..words.len())].clone()
}

/// Largest absolute difference between two marginal vectors.
pub fn max_marginal_gap(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p[0] - q[0]).abs().max((p[1] - q[1]).abs()))
        .fold(0.0, f64::max)
}

/// One tree instance: kind 0 is a general channel with leaf checks, kind 1
/// an iid-state channel on a Tanner forest. Returns the largest marginal gap
/// between joint BP and enumeration.
pub fn tree_instance_gap(index: u64, kind: usize) -> f64 {
    use ldpc_replica::bp::joint_bp_decode;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1000 + index);
    let n = rng.gen_range(3..=8);
    let ny = rng.gen_range(2..=3);
    let (c, g) = if kind == 0 {
        (
            random_channel(ny, false, &mut rng),
            leaf_check_graph(n, &mut rng),
        )
    } else {
        (
            random_channel(ny, true, &mut rng),
            tanner_forest(n, &mut rng),
        )
    };
    let x = random_small_codeword(&g, &mut rng);
    let (y, _) = c.transmit(&x, &mut rng);
    let bp = joint_bp_decode(&g, &c, &y, 200, 1e-15).unwrap();
    max_marginal_gap(&bp.marginals, &brute_force_marginals(&g, &c, &y))
}
