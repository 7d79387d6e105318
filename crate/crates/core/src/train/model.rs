//! Linear cost model: `c_V = X_V·W_Vᵀ + b_V`, `c_E = X_E·W_E + b_E`.

use alloc::vec;
use alloc::vec::Vec;

use crate::blackbox::CostGradient;
use crate::error::{Error, Result};
use crate::graph::CostGraph;

use super::task::SyntheticTask;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearCostModel {
    pub num_classes: usize,
    pub node_dim: usize,
    pub edge_dim: usize,
    /// `num_classes × node_dim`, row-major.
    pub node_weights: Vec<f64>,
    pub node_bias: Vec<f64>,
    pub edge_weights: Vec<f64>,
    pub edge_bias: f64,
}

impl LinearCostModel {
    pub fn zeros(num_classes: usize, node_dim: usize, edge_dim: usize) -> Self {
        Self {
            num_classes,
            node_dim,
            edge_dim,
            node_weights: vec![0.0; num_classes * node_dim],
            node_bias: vec![0.0; num_classes],
            edge_weights: vec![0.0; edge_dim],
            edge_bias: 0.0,
        }
    }

    /// `W_V = -node_scale·I`, `W_E = edge_scale·1`, zero biases. Needs
    /// `node_dim == num_classes`.
    pub fn identity(num_classes: usize, edge_dim: usize, node_scale: f64, edge_scale: f64) -> Self {
        let mut m = Self::zeros(num_classes, num_classes, edge_dim);
        for k in 0..num_classes {
            m.node_weights[k * num_classes + k] = -node_scale;
        }
        m.edge_weights.iter_mut().for_each(|w| *w = edge_scale);
        m
    }

    /// Zero model shaped for `task`.
    pub fn for_task(task: &SyntheticTask) -> Self {
        Self::zeros(task.skeleton.num_classes(), task.node_dim, task.edge_dim)
    }

    pub fn num_parameters(&self) -> usize {
        self.node_weights.len() + self.node_bias.len() + self.edge_weights.len() + 1
    }

    /// All parameters in the order node weights, node bias, edge weights,
    /// edge bias.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.num_parameters());
        p.extend_from_slice(&self.node_weights);
        p.extend_from_slice(&self.node_bias);
        p.extend_from_slice(&self.edge_weights);
        p.push(self.edge_bias);
        p
    }

    pub fn set_parameters(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.num_parameters() {
            return Err(Error::Shape("parameter vector length"));
        }
        let (a, rest) = p.split_at(self.node_weights.len());
        let (b, rest) = rest.split_at(self.node_bias.len());
        let (c, d) = rest.split_at(self.edge_weights.len());
        self.node_weights.copy_from_slice(a);
        self.node_bias.copy_from_slice(b);
        self.edge_weights.copy_from_slice(c);
        self.edge_bias = d[0];
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.parameters().iter().all(|v| v.is_finite())
    }

    fn check(&self, task: &SyntheticTask) -> Result<()> {
        if task.node_dim != self.node_dim
            || task.edge_dim != self.edge_dim
            || task.skeleton.num_classes() != self.num_classes
        {
            return Err(Error::Shape("model does not fit task"));
        }
        Ok(())
    }

    pub fn node_costs(&self, task: &SyntheticTask) -> Result<Vec<f64>> {
        self.check(task)?;
        let (k, f) = (self.num_classes, self.node_dim);
        let mut out = vec![0.0; task.num_nodes() * k];
        for (row, x) in out.chunks_mut(k).zip(task.node_features.chunks(f)) {
            for (c, slot) in row.iter_mut().enumerate() {
                let w = &self.node_weights[c * f..(c + 1) * f];
                *slot = self.node_bias[c] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        Ok(out)
    }

    pub fn edge_costs(&self, task: &SyntheticTask) -> Result<Vec<f64>> {
        self.check(task)?;
        Ok(task
            .edge_features
            .chunks(self.edge_dim.max(1))
            .take(task.num_edges())
            .map(|x| self.edge_bias + self.edge_weights.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
            .collect())
    }

    /// Cost graph of `task` under this model.
    pub fn costs(&self, task: &SyntheticTask) -> Result<CostGraph> {
        task.skeleton.with_costs(self.node_costs(task)?, self.edge_costs(task)?)
    }

    /// Chain rule from a cost gradient to a parameter gradient (same layout
    /// as `parameters`).
    pub fn backprop(&self, task: &SyntheticTask, grad: &CostGradient) -> Result<Vec<f64>> {
        self.check(task)?;
        let (k, f, fe) = (self.num_classes, self.node_dim, self.edge_dim);
        if grad.node.len() != task.num_nodes() * k || grad.edge.len() != task.num_edges() {
            return Err(Error::Shape("cost gradient does not fit task"));
        }
        let mut out = vec![0.0; self.num_parameters()];
        let (nw, rest) = out.split_at_mut(k * f);
        let (nb, rest) = rest.split_at_mut(k);
        let (ew, eb) = rest.split_at_mut(fe);
        for (g_row, x) in grad.node.chunks(k).zip(task.node_features.chunks(f)) {
            for (c, &g) in g_row.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                nb[c] += g;
                nw[c * f..(c + 1) * f].iter_mut().zip(x).for_each(|(w, xv)| *w += g * xv);
            }
        }
        for (e, &g) in grad.edge.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            eb[0] += g;
            let x = &task.edge_features[e * fe..(e + 1) * fe];
            ew.iter_mut().zip(x).for_each(|(w, xv)| *w += g * xv);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::task::{gen_task, TaskSpec};

    #[test]
    fn parameters_round_trip() {
        let mut m = LinearCostModel::identity(3, 2, 1.0, 2.0);
        let mut p = m.parameters();
        p.iter_mut().enumerate().for_each(|(i, v)| *v += i as f64);
        m.set_parameters(&p).unwrap();
        assert_eq!(m.parameters(), p);
        assert!(m.set_parameters(&p[1..]).is_err());
    }

    #[test]
    fn backprop_matches_directional_derivative() {
        // costs are linear in parameters, so <∂L/∂c, dc> equals <∂L/∂θ, dθ> exactly
        let task = gen_task(2, &TaskSpec::small(0.5)).unwrap();
        let m = LinearCostModel::identity(4, task.edge_dim, 1.0, 0.5);
        let grad = CostGradient {
            node: (0..task.num_nodes() * 4).map(|i| ((i * 7) % 5) as f64 - 2.0).collect(),
            edge: (0..task.num_edges()).map(|i| ((i * 3) % 4) as f64 - 1.5).collect(),
        };
        let dtheta = m.backprop(&task, &grad).unwrap();
        let direction: Vec<f64> = (0..m.num_parameters()).map(|i| ((i * 11) % 7) as f64 * 0.1).collect();
        let mut shifted = m.clone();
        let base = m.parameters();
        let moved: Vec<f64> = base.iter().zip(&direction).map(|(a, b)| a + b).collect();
        shifted.set_parameters(&moved).unwrap();
        let dc_node: Vec<f64> =
            shifted.node_costs(&task).unwrap().iter().zip(m.node_costs(&task).unwrap()).map(|(a, b)| a - b).collect();
        let dc_edge: Vec<f64> =
            shifted.edge_costs(&task).unwrap().iter().zip(m.edge_costs(&task).unwrap()).map(|(a, b)| a - b).collect();
        let lhs: f64 = grad.node.iter().zip(&dc_node).map(|(a, b)| a * b).sum::<f64>()
            + grad.edge.iter().zip(&dc_edge).map(|(a, b)| a * b).sum::<f64>();
        let rhs: f64 = dtheta.iter().zip(&direction).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-8 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let task = gen_task(2, &TaskSpec::small(0.0)).unwrap();
        let m = LinearCostModel::zeros(3, 3, 2);
        assert!(m.node_costs(&task).is_err());
    }
}
