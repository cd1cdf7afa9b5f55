//! Connectivity of observation patterns and coupling of entry dynamics.
//!
//! Two observed entries are *coupled* when the gradients of their end-to-end
//! values with respect to the parameters have a nonzero inner product at some
//! time. Coupling determines whether training on one group of entries can
//! influence another.

use nalgebra::DMatrix;
use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::chain::FactorChain;
use crate::error::{Error, Result};
use crate::observation::ObservationSet;

/// One connected component of the bipartite row/column graph of an
/// observation pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteComponent {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    /// Indices into [`ObservationSet::entries`].
    pub observations: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityReport {
    pub connected: bool,
    /// Ordered by the smallest observation index each component contains.
    pub components: Vec<BipartiteComponent>,
}

impl ConnectivityReport {
    /// The partition of observation indices induced by the components.
    pub fn partition(&self) -> Vec<Vec<usize>> {
        self.components.iter().map(|c| c.observations.clone()).collect()
    }
}

/// Groups observation indices by the representative of `key(index)`, keeping
/// groups in order of their first member.
fn group_by_root(n_obs: usize, mut root_of: impl FnMut(usize) -> usize) -> Vec<Vec<usize>> {
    let mut slot: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for k in 0..n_obs {
        let r = root_of(k);
        let g = *slot.entry(r).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(k);
    }
    groups
}

/// Connected components of the bipartite graph with one vertex per row, one
/// per column, and one edge per observation. Rows and columns that no
/// observation touches are ignored.
pub fn check_connectivity(obs: &ObservationSet) -> Result<ConnectivityReport> {
    obs.require_non_empty()?;
    let d = obs.dim();
    let mut uf = UnionFind::<usize>::new(2 * d);
    for e in obs.iter() {
        uf.union(e.row, d + e.col);
    }
    let entries = obs.entries();
    let groups = group_by_root(entries.len(), |k| uf.find(entries[k].row));
    let components: Vec<BipartiteComponent> = groups
        .into_iter()
        .map(|members| {
            let mut rows: Vec<usize> = members.iter().map(|&k| entries[k].row).collect();
            let mut cols: Vec<usize> = members.iter().map(|&k| entries[k].col).collect();
            rows.sort_unstable();
            rows.dedup();
            cols.sort_unstable();
            cols.dedup();
            BipartiteComponent { rows, cols, observations: members }
        })
        .collect();
    Ok(ConnectivityReport { connected: components.len() == 1, components })
}

/// Per-layer factors of the gradient inner product: `left[l] = suf_l suf_l^T`
/// and `right[l] = pre_l^T pre_l`.
fn layer_grams(chain: &FactorChain) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
    let left = chain.suffix_products().iter().map(|s| s * s.transpose()).collect();
    let right = chain.prefix_products().iter().map(|p| p.tr_mul(p)).collect();
    (left, right)
}

/// Inner product of the parameter gradients of end-to-end entries `a` and
/// `b`, each given as `(row, col)`.
pub fn gradient_inner_product(chain: &FactorChain, a: (usize, usize), b: (usize, usize)) -> Result<f64> {
    let d = chain.dim();
    for &(i, j) in &[a, b] {
        if i >= d || j >= d {
            return Err(Error::IndexOutOfRange { row: i, col: j, dim: d });
        }
    }
    let (left, right) = layer_grams(chain);
    Ok(left.iter().zip(&right).map(|(t, s)| t[(a.0, b.0)] * s[(a.1, b.1)]).sum())
}

/// Gram matrix of gradient inner products over all pairs of observations, in
/// observation-index order.
pub fn gram_matrix(chain: &FactorChain, obs: &ObservationSet) -> Result<DMatrix<f64>> {
    if obs.dim() != chain.dim() {
        return Err(Error::DimensionMismatch(format!(
            "chain is {}x{} but observations index a {}x{} matrix",
            chain.dim(),
            chain.dim(),
            obs.dim(),
            obs.dim()
        )));
    }
    let (left, right) = layer_grams(chain);
    let e = obs.entries();
    let n = e.len();
    let mut g = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v: f64 = left.iter().zip(&right).map(|(t, s)| t[(e[a].row, e[b].row)] * s[(e[a].col, e[b].col)]).sum();
            g[(a, b)] = v;
            g[(b, a)] = v;
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CouplingVerdict {
    /// A partition into at least two parts provably stays decoupled for all time.
    Decoupled,
    /// No partition into two or more parts exists.
    Coupled,
    /// Gram matrices at the sampled states are block diagonal, but no exact
    /// rule guarantees this for all time.
    NumericallyDecoupledAtSampledTimes,
}

/// The exact argument behind a verdict, when one applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StructuralRule {
    /// A depth-one chain has independent entries.
    DepthOne,
    /// Every factor is zero, a stationary point of the flow.
    ZeroState,
    /// Depth two: parts are the components of the bipartite observation graph.
    BipartiteComponents,
    /// Factors and observations share a block-diagonal support, which the
    /// flow preserves.
    BlockDiagonalSupport,
    /// Depth at least three with entrywise positive factors: every pair of
    /// gradients has a positive inner product.
    PositiveFactors,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub verdict: CouplingVerdict,
    /// Observation indices, parts ordered by their smallest member.
    pub partition: Vec<Vec<usize>>,
    /// Gradient Gram matrix at the queried state.
    pub gram: DMatrix<f64>,
    pub rule: Option<StructuralRule>,
}

/// Relative threshold used when a Gram entry must be classified as zero.
pub const GRAM_ZERO_TOLERANCE: f64 = 1e-10;

fn verdict_for(partition: &[Vec<usize>]) -> CouplingVerdict {
    if partition.len() >= 2 {
        CouplingVerdict::Decoupled
    } else {
        CouplingVerdict::Coupled
    }
}

fn singleton_partition(n: usize) -> Vec<Vec<usize>> {
    (0..n).map(|k| vec![k]).collect()
}

/// Partition of the observations by the blocks of the finest index grouping
/// that keeps every factor and the observation pattern block diagonal.
fn shared_block_support(chain: &FactorChain, obs: &ObservationSet) -> Vec<Vec<usize>> {
    let d = chain.dim();
    let mut uf = UnionFind::<usize>::new(d);
    for w in chain.factors() {
        for j in 0..d {
            for i in 0..d {
                if i != j && w[(i, j)] != 0.0 {
                    uf.union(i, j);
                }
            }
        }
    }
    for e in obs.iter() {
        uf.union(e.row, e.col);
    }
    let entries = obs.entries();
    group_by_root(entries.len(), |k| uf.find(entries[k].row))
}

/// Decides whether the observed entries split into groups whose dynamics
/// never interact.
///
/// Exact rules are tried first. When none applies, the Gram matrix is
/// evaluated at `chain` and at every state in `samples`; two observations are
/// linked when their Gram entry exceeds [`GRAM_ZERO_TOLERANCE`] relative to the
/// geometric mean of their diagonal entries at any of those states.
pub fn detect_decoupling(chain: &FactorChain, obs: &ObservationSet, samples: &[FactorChain]) -> Result<CouplingReport> {
    obs.require_non_empty()?;
    let gram = gram_matrix(chain, obs)?;
    let n = obs.len();
    let exact = |partition: Vec<Vec<usize>>, rule| CouplingReport {
        verdict: verdict_for(&partition),
        partition,
        gram: gram.clone(),
        rule: Some(rule),
    };

    if chain.depth() == 1 {
        return Ok(exact(singleton_partition(n), StructuralRule::DepthOne));
    }
    if chain.factors().iter().all(|w| w.iter().all(|&v| v == 0.0)) {
        return Ok(exact(singleton_partition(n), StructuralRule::ZeroState));
    }
    if chain.depth() == 2 {
        let parts = check_connectivity(obs)?.partition();
        if parts.len() >= 2 {
            return Ok(exact(parts, StructuralRule::BipartiteComponents));
        }
    } else {
        let parts = shared_block_support(chain, obs);
        if parts.len() >= 2 {
            return Ok(exact(parts, StructuralRule::BlockDiagonalSupport));
        }
        if chain.factors().iter().all(|w| w.iter().all(|&v| v > 0.0)) {
            return Ok(exact(vec![(0..n).collect()], StructuralRule::PositiveFactors));
        }
    }

    let mut uf = UnionFind::<usize>::new(n);
    let mut link = |g: &DMatrix<f64>| {
        for a in 0..n {
            for b in a + 1..n {
                let scale = (g[(a, a)] * g[(b, b)]).sqrt();
                if g[(a, b)].abs() > GRAM_ZERO_TOLERANCE * scale {
                    uf.union(a, b);
                }
            }
        }
    };
    link(&gram);
    for s in samples {
        link(&gram_matrix(s, obs)?);
    }
    let partition = group_by_root(n, |k| uf.find(k));
    let verdict = if partition.len() >= 2 {
        CouplingVerdict::NumericallyDecoupledAtSampledTimes
    } else {
        CouplingVerdict::Coupled
    };
    Ok(CouplingReport { verdict, partition, gram, rule: None })
}
