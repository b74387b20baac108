use std::ops::Range;

use super::{ClassSet, Domain, RatioConsensusModel, VectorField};
use crate::error::{Error, Result};
use crate::graph::{canonical_edge_order, DynamicGraph, EdgeDescriptor};

/// Vertex and edge dynamics on one graph; the state is `(v, e)`.
///
/// Edge block: ratio consensus over the edge densities, independent of `v`.
/// Vertex block: `v̇_i = −Σ e_k (v_i − v_j)` over edges `k = (j → i)`, using the
/// live edge densities as coupling gains. This is one admissible instance of the
/// structured form `f_i(t, v_i, e_i1 v_1, …, e_in v_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeModel {
    vertex_count: usize,
    edges: Vec<EdgeDescriptor>,
    edge_model: RatioConsensusModel,
}

impl CompositeModel {
    pub fn new(
        vertex_count: usize,
        edges: Vec<EdgeDescriptor>,
        edge_model: RatioConsensusModel,
    ) -> Result<Self> {
        let edges = canonical_edge_order(vertex_count, &edges)?;
        if edge_model.dimension() != edges.len() {
            return Err(Error::structural(format!(
                "edge model has dimension {} but the graph has {} edges",
                edge_model.dimension(),
                edges.len()
            )));
        }
        Ok(Self {
            vertex_count,
            edges,
            edge_model,
        })
    }

    pub fn from_graph(graph: &DynamicGraph, edge_model: RatioConsensusModel) -> Result<Self> {
        Self::new(
            graph.vertex_count(),
            graph.canonical_edges().to_vec(),
            edge_model,
        )
    }

    /// Every ordered pair `i ≠ j` joined by one edge, unit ratio weights.
    pub fn complete(n: usize) -> Result<Self> {
        let edges: Vec<EdgeDescriptor> = (0..n)
            .flat_map(|t| {
                (0..n)
                    .filter(move |&h| h != t)
                    .map(move |h| EdgeDescriptor::new(t, h, 0))
            })
            .collect();
        let m = edges.len();
        if m == 0 {
            return Err(Error::structural(
                "composite demo needs at least two vertices",
            ));
        }
        Self::new(n, edges, RatioConsensusModel::uniform(m))
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[EdgeDescriptor] {
        &self.edges
    }

    pub fn edge_model(&self) -> &RatioConsensusModel {
        &self.edge_model
    }

    pub fn vertex_block(&self) -> Range<usize> {
        0..self.vertex_count
    }

    pub fn edge_block(&self) -> Range<usize> {
        self.vertex_count..self.vertex_count + self.edges.len()
    }
}

impl VectorField for CompositeModel {
    fn dimension(&self) -> usize {
        self.vertex_count + self.edges.len()
    }

    fn domain(&self) -> Domain {
        Domain::OpenCone
    }

    fn claimed_classes(&self) -> ClassSet {
        ClassSet::new()
    }

    fn label(&self) -> String {
        format!("composite(n={}, m={})", self.vertex_count, self.edges.len())
    }

    fn positive_block(&self) -> Range<usize> {
        self.edge_block()
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.edge_model.breakpoints()
    }

    fn eval_unchecked(&self, t: f64, x: &[f64], out: &mut [f64]) {
        let n = self.vertex_count;
        let (v, e) = x.split_at(n);
        let (v_rate, e_rate) = out.split_at_mut(n);
        self.edge_model.eval_unchecked(t, e, e_rate);
        v_rate.iter_mut().for_each(|r| *r = 0.0);
        for (k, edge) in self.edges.iter().enumerate() {
            let (i, j) = (edge.head, edge.tail);
            if i != j {
                v_rate[i] -= e[k] * (v[i] - v[j]);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::LaplacianModel;

    #[test]
    fn two_vertex_hand_values() {
        let m = CompositeModel::complete(2).unwrap();
        assert_eq!(m.dimension(), 4);
        let r = m.eval(0.0, &[1.0, 3.0, 1.0, 1.0]).unwrap();
        assert_eq!(r, vec![2.0, -2.0, 0.0, 0.0]);
    }

    #[test]
    fn vertex_agreement_leaves_only_edge_rates() {
        let m = CompositeModel::complete(3).unwrap();
        let e = [0.5, 1.0, 2.0, 4.0, 0.25, 3.0];
        let mut x = vec![7.0; 3];
        x.extend_from_slice(&e);
        let r = m.eval(0.0, &x).unwrap();
        assert!(r[..3].iter().all(|&q| q == 0.0));
        assert_eq!(
            &r[3..],
            RatioConsensusModel::uniform(6)
                .eval(0.0, &e)
                .unwrap()
                .as_slice()
        );
    }

    #[test]
    fn edge_ray_gives_uniform_laplacian() {
        let m = CompositeModel::complete(3).unwrap();
        let lambda = 0.75;
        let v = [1.0, -2.0, 4.0];
        let mut x = v.to_vec();
        x.extend_from_slice(&[lambda; 6]);
        let r = m.eval(0.0, &x).unwrap();
        assert!(r[3..].iter().all(|&q| q == 0.0));
        let lap = LaplacianModel::uniform(3).eval(0.0, &v).unwrap();
        for i in 0..3 {
            assert!((r[i] - lambda * lap[i]).abs() < 1e-14);
        }
    }

    #[test]
    fn negative_vertex_state_is_allowed() {
        let m = CompositeModel::complete(2).unwrap();
        assert!(m.eval(0.0, &[-1.0, -3.0, 1.0, 2.0]).is_ok());
        assert!(m.eval(0.0, &[1.0, 3.0, 0.0, 2.0]).is_err());
    }

    #[test]
    fn edge_model_dimension_must_match() {
        let edges = vec![EdgeDescriptor::new(0, 1, 0)];
        assert!(CompositeModel::new(2, edges, RatioConsensusModel::uniform(2)).is_err());
    }
}
