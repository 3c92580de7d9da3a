//! Finite-length Tanner graphs from the configuration model, and uniform
//! codeword sampling.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::ensemble::Ensemble;
use crate::error::{Error, Result};
use crate::gf2::{BitMatrix, EchelonForm};
use crate::rng::{self, TAG_CODEWORD, TAG_GRAPH};

/// Bipartite variable/check graph. Edges are numbered; each edge joins one
/// variable to one check. Multi-edges are allowed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TannerGraph {
    n: usize,
    m: usize,
    edge_var: Vec<usize>,
    edge_check: Vec<usize>,
    var_offsets: Vec<usize>,
    var_edge_list: Vec<usize>,
    check_offsets: Vec<usize>,
    check_edge_list: Vec<usize>,
}

fn csr(owner: &[usize], count: usize) -> (Vec<usize>, Vec<usize>) {
    let mut offsets = vec![0usize; count + 1];
    for &o in owner {
        offsets[o + 1] += 1;
    }
    for i in 0..count {
        offsets[i + 1] += offsets[i];
    }
    let mut fill = offsets.clone();
    let mut list = vec![0usize; owner.len()];
    for (e, &o) in owner.iter().enumerate() {
        list[fill[o]] = e;
        fill[o] += 1;
    }
    (offsets, list)
}

impl TannerGraph {
    /// Builds a graph from the edge list `(variable, check)`.
    pub fn from_edges(n: usize, m: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if let Some(&(v, c)) = edges.iter().find(|&&(v, c)| v >= n || c >= m) {
            return Err(Error::Config(format!(
                "edge ({v}, {c}) out of range for {n} variables and {m} checks"
            )));
        }
        let edge_var: Vec<usize> = edges.iter().map(|e| e.0).collect();
        let edge_check: Vec<usize> = edges.iter().map(|e| e.1).collect();
        let (var_offsets, var_edge_list) = csr(&edge_var, n);
        let (check_offsets, check_edge_list) = csr(&edge_check, m);
        Ok(TannerGraph {
            n,
            m,
            edge_var,
            edge_check,
            var_offsets,
            var_edge_list,
            check_offsets,
            check_edge_list,
        })
    }

    /// Builds a graph from explicit check neighbourhoods.
    pub fn from_checks(n: usize, checks: &[Vec<usize>]) -> Result<Self> {
        let edges: Vec<(usize, usize)> = checks
            .iter()
            .enumerate()
            .flat_map(|(c, vars)| vars.iter().map(move |&v| (v, c)))
            .collect();
        Self::from_edges(n, checks.len(), &edges)
    }

    pub fn num_variables(&self) -> usize {
        self.n
    }

    pub fn num_checks(&self) -> usize {
        self.m
    }

    pub fn num_edges(&self) -> usize {
        self.edge_var.len()
    }

    pub fn edge_variable(&self, e: usize) -> usize {
        self.edge_var[e]
    }

    pub fn edge_check(&self, e: usize) -> usize {
        self.edge_check[e]
    }

    /// Edges incident to variable `v`.
    pub fn var_edges(&self, v: usize) -> &[usize] {
        &self.var_edge_list[self.var_offsets[v]..self.var_offsets[v + 1]]
    }

    /// Edges incident to check `c`.
    pub fn check_edges(&self, c: usize) -> &[usize] {
        &self.check_edge_list[self.check_offsets[c]..self.check_offsets[c + 1]]
    }

    /// Whether `x` satisfies every parity check (edges counted with multiplicity).
    pub fn is_codeword(&self, x: &[u8]) -> bool {
        x.len() == self.n
            && (0..self.m).all(|c| {
                self.check_edges(c)
                    .iter()
                    .fold(0u8, |acc, &e| acc ^ (x[self.edge_var[e]] & 1))
                    == 0
            })
    }

    /// The parity-check matrix; a double edge cancels.
    pub fn parity_check_matrix(&self) -> BitMatrix {
        let mut h = BitMatrix::zeros(self.m, self.n);
        for e in 0..self.num_edges() {
            h.toggle(self.edge_check[e], self.edge_var[e]);
        }
        h
    }
}

/// Samples a graph from the configuration model: the `n l` variable sockets
/// are matched to the `n l` check sockets by a uniformly random permutation.
pub fn sample_tanner_graph(e: &Ensemble, n: usize, seed: u64) -> Result<TannerGraph> {
    let sockets = n * e.l();
    if n == 0 || sockets % e.r() != 0 {
        return Err(Error::Config(format!(
            "n = {n} gives {sockets} variable sockets, not a positive multiple of r = {}",
            e.r()
        )));
    }
    let m = sockets / e.r();
    let mut perm: Vec<usize> = (0..sockets).collect();
    perm.shuffle(&mut rng::stream(seed, &[TAG_GRAPH]));
    let edges: Vec<(usize, usize)> = perm
        .iter()
        .enumerate()
        .map(|(k, &j)| (k / e.l(), j / e.r()))
        .collect();
    TannerGraph::from_edges(n, m, &edges)
}

/// Uniform sampler over the codewords of a fixed graph.
#[derive(Debug, Clone)]
pub struct CodewordSampler {
    echelon: EchelonForm,
}

impl CodewordSampler {
    pub fn new(g: &TannerGraph) -> Self {
        CodewordSampler {
            echelon: EchelonForm::new(g.parity_check_matrix()),
        }
    }

    /// Number of free variables, `n - rank(H)`.
    pub fn dimension(&self) -> usize {
        self.echelon.free_columns().len()
    }

    /// The codeword whose free variables take `free_values`.
    pub fn complete(&self, free_values: &[u8]) -> Vec<u8> {
        self.echelon.kernel_vector(free_values)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<u8> {
        let free: Vec<u8> = (0..self.dimension()).map(|_| rng.gen::<u8>() & 1).collect();
        self.complete(&free)
    }
}

/// A uniformly random codeword of `g`, with free variables drawn from `seed`.
pub fn encode_random_codeword(g: &TannerGraph, seed: u64) -> Vec<u8> {
    CodewordSampler::new(g).sample(&mut rng::stream(seed, &[TAG_CODEWORD]))
}
