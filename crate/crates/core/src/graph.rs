//! Weighted directed multigraphs and the edge ↔ state-vector bijection.
//!
//! Edges are kept in canonical `(tail, head, parallel_index)` order. Component `k`
//! of the density vector is the weight of the `k`-th canonical edge, so the
//! ordering fixes the dimension and layout of the state used by the dynamics.

use std::collections::BTreeMap;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One directed edge. Parallel edges between the same ordered pair are told
/// apart by `parallel_index`, numbered `0, 1, 2, …`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EdgeDescriptor {
    pub tail: usize,
    pub head: usize,
    pub parallel_index: usize,
}

impl EdgeDescriptor {
    pub const fn new(tail: usize, head: usize, parallel_index: usize) -> Self {
        Self {
            tail,
            head,
            parallel_index,
        }
    }
}

/// Nonnegative edge weights (traffic densities, or "prices").
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DensityVector(Vec<f64>);

impl DensityVector {
    /// Rejects negative or non-finite components.
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = components
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::domain(format!(
                "density component {i} = {v} is not a finite nonnegative number"
            )));
        }
        Ok(Self(components))
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![0.0; m])
    }

    /// Uniform vector `λ·𝟏`.
    pub fn uniform(m: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; m])
    }

    /// Membership in the open cone: every component strictly positive.
    pub fn in_open_cone(&self) -> bool {
        !self.0.is_empty() && self.0.iter().all(|&v| v > 0.0)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for DensityVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for DensityVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DensityVector> for Vec<f64> {
    fn from(v: DensityVector) -> Self {
        v.0
    }
}

/// Validates an edge family and returns it sorted in canonical order.
///
/// Every `(tail, head)` pair must carry parallel indices `0..k` exactly once each.
pub fn canonical_edge_order(
    vertex_count: usize,
    edges: &[EdgeDescriptor],
) -> Result<Vec<EdgeDescriptor>> {
    if vertex_count == 0 {
        return Err(Error::structural("graph needs at least one vertex"));
    }
    let mut per_pair: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for e in edges {
        if e.tail >= vertex_count || e.head >= vertex_count {
            return Err(Error::structural(format!(
                "edge ({}, {}, {}) references a vertex outside [0, {vertex_count})",
                e.tail, e.head, e.parallel_index
            )));
        }
        per_pair
            .entry((e.tail, e.head))
            .or_default()
            .push(e.parallel_index);
    }
    for ((tail, head), idx) in per_pair.iter_mut() {
        idx.sort_unstable();
        if idx
            .iter()
            .enumerate()
            .any(|(expected, &got)| expected != got)
        {
            return Err(Error::structural(format!(
                "parallel indices for pair ({tail}, {head}) are not 0..{}: {idx:?}",
                idx.len()
            )));
        }
    }
    let mut sorted = edges.to_vec();
    sorted.sort_unstable();
    Ok(sorted)
}

/// A weighted directed multigraph with edges in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicGraph {
    vertex_count: usize,
    edges: Vec<EdgeDescriptor>,
    weights: DensityVector,
}

impl DynamicGraph {
    /// Builds a graph from edges in any order; `weights[k]` belongs to `edges[k]`.
    /// Edges and weights are co-sorted into canonical order.
    pub fn new(
        vertex_count: usize,
        edges: Vec<EdgeDescriptor>,
        weights: DensityVector,
    ) -> Result<Self> {
        if edges.len() != weights.len() {
            return Err(Error::structural(format!(
                "{} edges but {} weights",
                edges.len(),
                weights.len()
            )));
        }
        canonical_edge_order(vertex_count, &edges)?;
        let mut paired: Vec<(EdgeDescriptor, f64)> =
            edges.into_iter().zip(weights.iter().copied()).collect();
        paired.sort_unstable_by_key(|a| a.0);
        let (edges, w): (Vec<_>, Vec<_>) = paired.into_iter().unzip();
        Ok(Self {
            vertex_count,
            edges,
            weights: DensityVector(w),
        })
    }

    /// Builds a graph from `[tail, head]` pairs; repeated pairs become parallel
    /// edges numbered in input order. `weights` are given in canonical order.
    pub fn from_pairs(
        vertex_count: usize,
        pairs: &[(usize, usize)],
        weights: DensityVector,
    ) -> Result<Self> {
        let mut next: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let edges: Vec<EdgeDescriptor> = pairs
            .iter()
            .map(|&(tail, head)| {
                let slot = next.entry((tail, head)).or_insert(0);
                let e = EdgeDescriptor::new(tail, head, *slot);
                *slot += 1;
                e
            })
            .collect();
        if edges.len() != weights.len() {
            return Err(Error::structural(format!(
                "{} edges but {} weights",
                edges.len(),
                weights.len()
            )));
        }
        let edges = canonical_edge_order(vertex_count, &edges)?;
        Ok(Self {
            vertex_count,
            edges,
            weights,
        })
    }

    /// Two vertices joined by two parallel routes `v1 → v2`.
    pub fn two_route_example(weights: Option<[f64; 2]>) -> Result<Self> {
        let w = weights.unwrap_or([1.0, 1.0]);
        Self::from_pairs(2, &[(0, 1), (0, 1)], DensityVector::new(w.to_vec())?)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn canonical_edges(&self) -> &[EdgeDescriptor] {
        &self.edges
    }

    pub fn densities(&self) -> &DensityVector {
        &self.weights
    }

    /// Same topology with new weights (canonical order).
    pub fn with_densities(&self, weights: DensityVector) -> Result<Self> {
        if weights.len() != self.edges.len() {
            return Err(Error::structural(format!(
                "graph has {} edges, got {} densities",
                self.edges.len(),
                weights.len()
            )));
        }
        Ok(Self {
            vertex_count: self.vertex_count,
            edges: self.edges.clone(),
            weights,
        })
    }

    /// Position of an edge in the density vector.
    pub fn edge_index(&self, edge: &EdgeDescriptor) -> Option<usize> {
        self.edges.binary_search(edge).ok()
    }
}
