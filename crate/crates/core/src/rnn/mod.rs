//! Executable form of a genome: flat parameter vector, delay-aware
//! forward evaluation, exact backpropagation through time, and a
//! finite-difference gradient check.

pub mod cells;

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{NodeRole, RnnGenome};
use cells::{cell_backward, cell_forward, CellKind, CellTrace};

/// Fitness assigned when evaluation or training hits a numerical
/// failure; anything this bad loses to any healthy network.
pub const WORST_FITNESS: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitnessReport {
    /// Validation MSE (the colony's fitness, lower is better).
    pub mse: f64,
    pub eval_wall_time: f64,
    pub train_wall_time: f64,
    pub epochs_used: usize,
    pub numerical_failure: bool,
}

impl FitnessReport {
    fn failed() -> Self {
        FitnessReport {
            mse: WORST_FITNESS,
            eval_wall_time: 0.0,
            train_wall_time: 0.0,
            epochs_used: 0,
            numerical_failure: true,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct InstEdge {
    src: usize,
    dst: usize,
    delay: usize,
    /// Index of this edge's weight in the parameter vector.
    param: usize,
}

/// A genome lowered to dense arrays, ready to run. Parameters live in
/// one flat vector: edge weights first, then each node's own block.
#[derive(Debug, Clone)]
pub struct RnnInstance {
    kinds: Vec<CellKind>,
    /// For input nodes: (lag level, input channel).
    input_feed: Vec<Option<(usize, usize)>>,
    /// Dense topological order over the 0-delay subgraph.
    order: Vec<usize>,
    edges: Vec<InstEdge>,
    in_edges: Vec<Vec<usize>>,
    output_node: usize,
    node_offset: Vec<usize>,
    node_ids: Vec<usize>,
    pub params: Vec<f64>,
    lag_levels: usize,
    /// History ring depth; always covers the longest edge delay plus
    /// the previous-output read.
    depth: usize,
}

impl RnnInstance {
    pub fn instantiate(genome: &RnnGenome) -> Result<Self> {
        let n = genome.nodes.len();
        let index_of: std::collections::HashMap<usize, usize> =
            genome.nodes.iter().enumerate().map(|(i, nd)| (nd.id, i)).collect();
        let order: Vec<usize> = genome
            .zero_delay_topo_order()?
            .into_iter()
            .map(|id| index_of[&id])
            .collect();

        let mut kinds = Vec::with_capacity(n);
        let mut input_feed = vec![None; n];
        let mut output_node = None;
        for (i, node) in genome.nodes.iter().enumerate() {
            let kind = match node.role {
                NodeRole::Input { level, index } => {
                    input_feed[i] = Some((level, index));
                    CellKind::Input
                }
                NodeRole::Output { index } => {
                    if index == 0 {
                        output_node = Some(i);
                    }
                    CellKind::Output
                }
                NodeRole::Hidden => CellKind::from_node_type(node.node_type),
            };
            kinds.push(kind);
        }
        let output_node =
            output_node.ok_or_else(|| Error::Structure("genome has no output 0".into()))?;

        let mut max_delay = 0;
        let mut edges = Vec::with_capacity(genome.edges.len());
        let mut in_edges: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (k, e) in genome.edges.iter().enumerate() {
            if e.delay > genome.lag_levels.saturating_sub(1) {
                return Err(Error::Structure(format!(
                    "edge delay {} exceeds lag depth {}",
                    e.delay, genome.lag_levels
                )));
            }
            max_delay = max_delay.max(e.delay);
            let ie = InstEdge { src: index_of[&e.src], dst: index_of[&e.dst], delay: e.delay, param: k };
            in_edges[ie.dst].push(k);
            edges.push(ie);
        }

        // edge weights first, then node blocks
        let mut params: Vec<f64> = genome.edges.iter().map(|e| e.weight).collect();
        let mut node_offset = Vec::with_capacity(n);
        // gate parameters are derived from the genome content so the
        // same genome always instantiates to the same network
        let seed = u64::from_str_radix(&genome.hash()[..16], 16)
            .map_err(|e| Error::Internal(format!("bad genome hash: {e}")))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (i, node) in genome.nodes.iter().enumerate() {
            node_offset.push(params.len());
            let kind = kinds[i];
            let count = kind.param_count();
            let base = params.len();
            for _ in 0..count {
                params.push(rng.gen_range(-0.5..0.5));
            }
            // biases start at zero, except where the genome supplies
            // one and the LSTM forget bias which starts open
            match kind {
                CellKind::Input => {}
                CellKind::Output | CellKind::Simple => params[base] = node.bias,
                CellKind::Delta => {
                    params[base + 3] = node.bias;
                    params[base + 4] = 0.0;
                }
                CellKind::Gru => {
                    params[base + 2] = 0.0;
                    params[base + 5] = 0.0;
                    params[base + 8] = node.bias;
                }
                CellKind::Lstm => {
                    params[base + 2] = 1.0;
                    params[base + 5] = 0.0;
                    params[base + 8] = 0.0;
                    params[base + 11] = node.bias;
                }
                CellKind::Mgu | CellKind::Ugrnn => {
                    params[base + 2] = 0.0;
                    params[base + 5] = node.bias;
                }
            }
        }

        Ok(RnnInstance {
            kinds,
            input_feed,
            order,
            edges,
            in_edges,
            output_node,
            node_offset,
            node_ids: genome.nodes.iter().map(|nd| nd.id).collect(),
            params,
            lag_levels: genome.lag_levels,
            depth: genome.lag_levels.max(max_delay + 1).max(2),
        })
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn node_params(&self, i: usize) -> &[f64] {
        let o = self.node_offset[i];
        &self.params[o..o + self.kinds[i].param_count()]
    }

    fn input_at(&self, ds: &Dataset, i: usize, t: usize) -> Result<f64> {
        let (level, channel) = self.input_feed[i].unwrap();
        if channel >= ds.input_count() {
            return Err(Error::Data(format!(
                "genome reads input channel {channel} but the dataset has {}",
                ds.input_count()
            )));
        }
        Ok(if t >= level { ds.inputs[channel][t - level] } else { 0.0 })
    }

    /// Forward pass over `0..end` with constant-memory history ring
    /// buffers; returns the output-node prediction series.
    pub fn predict(&self, ds: &Dataset, end: usize) -> Result<Vec<f64>> {
        if end > ds.len() {
            return Err(Error::Data(format!("range end {end} exceeds dataset {}", ds.len())));
        }
        let n = self.kinds.len();
        let depth = self.depth;
        let mut hist = vec![vec![0.0f64; depth]; n];
        let mut c_state = vec![0.0f64; n];
        let mut preds = Vec::with_capacity(end);
        for t in 0..end {
            for &i in &self.order {
                let out = if self.kinds[i] == CellKind::Input {
                    self.input_at(ds, i, t)?
                } else {
                    let mut x = 0.0;
                    for &k in &self.in_edges[i] {
                        let e = self.edges[k];
                        if t >= e.delay {
                            x += self.params[e.param] * hist[e.src][(t - e.delay) % depth];
                        }
                    }
                    let h_prev = if t > 0 { hist[i][(t - 1) % depth] } else { 0.0 };
                    let tr = cell_forward(self.kinds[i], self.node_params(i), x, h_prev, c_state[i]);
                    c_state[i] = tr.c;
                    tr.out
                };
                if !out.is_finite() {
                    return Err(Error::Internal(format!("non-finite activation at t={t}")));
                }
                hist[i][t % depth] = out;
            }
            preds.push(hist[self.output_node][t % depth]);
        }
        Ok(preds)
    }

    /// Forward pass that keeps the full per-node output history and
    /// cell traces, as needed by the backward pass.
    fn forward_full(&self, ds: &Dataset, end: usize) -> Result<(Vec<Vec<f64>>, Vec<Vec<CellTrace>>)> {
        if end > ds.len() {
            return Err(Error::Data(format!("range end {end} exceeds dataset {}", ds.len())));
        }
        let n = self.kinds.len();
        let mut out = vec![vec![0.0f64; end]; n];
        let mut traces = vec![vec![CellTrace::default(); end]; n];
        for t in 0..end {
            for &i in &self.order {
                let o = if self.kinds[i] == CellKind::Input {
                    self.input_at(ds, i, t)?
                } else {
                    let mut x = 0.0;
                    for &k in &self.in_edges[i] {
                        let e = self.edges[k];
                        if t >= e.delay {
                            x += self.params[e.param] * out[e.src][t - e.delay];
                        }
                    }
                    let h_prev = if t > 0 { out[i][t - 1] } else { 0.0 };
                    let c_prev = if t > 0 { traces[i][t - 1].c } else { 0.0 };
                    let tr = cell_forward(self.kinds[i], self.node_params(i), x, h_prev, c_prev);
                    traces[i][t] = tr;
                    tr.out
                };
                if !o.is_finite() {
                    return Err(Error::Internal(format!("non-finite activation at t={t}")));
                }
                out[i][t] = o;
            }
        }
        Ok((out, traces))
    }

    fn scored_range(&self, range: &std::ops::Range<usize>) -> Result<std::ops::Range<usize>> {
        let start = range.start.max(self.lag_levels);
        if start >= range.end {
            return Err(Error::Data(format!(
                "range {range:?} leaves nothing to score after a {}-step warm-up",
                self.lag_levels
            )));
        }
        Ok(start..range.end)
    }

    fn mse_over(&self, ds: &Dataset, preds: &[f64], scored: &std::ops::Range<usize>) -> f64 {
        let mut acc = 0.0;
        for t in scored.clone() {
            let d = preds[t] - ds.targets[t];
            acc += d * d;
        }
        acc / scored.len() as f64
    }

    /// Validation fitness: forward from the start of the series (so
    /// recurrent state is warm) scoring only the validation range.
    pub fn evaluate_mse(&self, ds: &Dataset) -> Result<FitnessReport> {
        let scored = self.scored_range(&ds.valid_range)?;
        let start = Instant::now();
        match self.predict(ds, scored.end) {
            Ok(preds) => Ok(FitnessReport {
                mse: self.mse_over(ds, &preds, &scored),
                eval_wall_time: start.elapsed().as_secs_f64(),
                train_wall_time: 0.0,
                epochs_used: 0,
                numerical_failure: false,
            }),
            Err(Error::Internal(_)) => Ok(FitnessReport {
                eval_wall_time: start.elapsed().as_secs_f64(),
                ..FitnessReport::failed()
            }),
            Err(e) => Err(e),
        }
    }

    /// Training loss and its exact gradient over the scored part of
    /// `range`, via backpropagation through time.
    fn loss_and_grad(&self, ds: &Dataset, range: &std::ops::Range<usize>) -> Result<(f64, Vec<f64>)> {
        let scored = self.scored_range(range)?;
        let end = range.end;
        let (out, traces) = self.forward_full(ds, end)?;
        let m = scored.len() as f64;
        let mut loss = 0.0;
        let n = self.kinds.len();
        let mut douts = vec![vec![0.0f64; end]; n];
        let mut dcs = vec![vec![0.0f64; end]; n];
        for t in scored.clone() {
            let d = out[self.output_node][t] - ds.targets[t];
            loss += d * d;
            douts[self.output_node][t] = 2.0 * d / m;
        }
        loss /= m;

        let mut grad = vec![0.0f64; self.params.len()];
        for t in (0..end).rev() {
            for &i in self.order.iter().rev() {
                if self.kinds[i] == CellKind::Input {
                    continue;
                }
                let d_out = douts[i][t];
                let d_c = dcs[i][t];
                if d_out == 0.0 && d_c == 0.0 {
                    continue;
                }
                let o = self.node_offset[i];
                let np = self.kinds[i].param_count();
                let (p, dp) = {
                    // params and grad are disjoint vectors
                    (&self.params[o..o + np], &mut grad[o..o + np])
                };
                let g = cell_backward(self.kinds[i], p, &traces[i][t], d_out, d_c, dp);
                if t > 0 {
                    douts[i][t - 1] += g.dh_prev;
                    dcs[i][t - 1] += g.dc_prev;
                }
                for &k in &self.in_edges[i] {
                    let e = self.edges[k];
                    if t >= e.delay {
                        let sv = out[e.src][t - e.delay];
                        grad[e.param] += g.dx * sv;
                        douts[e.src][t - e.delay] += self.params[e.param] * g.dx;
                    }
                }
            }
        }
        Ok((loss, grad))
    }

    /// Gradient-descent local search over the training range, then a
    /// validation evaluation. A non-finite loss or gradient reverts
    /// every epoch and flags the report.
    pub fn bptt_train(&mut self, ds: &Dataset, epochs: usize, lr: f64) -> Result<FitnessReport> {
        let snapshot = self.params.clone();
        let start = Instant::now();
        let mut failed = false;
        let mut epochs_used = 0;
        for _ in 0..epochs {
            let (loss, mut grad) = match self.loss_and_grad(ds, &ds.train_range) {
                Ok(r) => r,
                Err(Error::Internal(_)) => {
                    failed = true;
                    break;
                }
                Err(e) => return Err(e),
            };
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                failed = true;
                break;
            }
            // global gradient-norm clip at 1.0
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > 1.0 {
                for g in &mut grad {
                    *g /= norm;
                }
            }
            for (p, g) in self.params.iter_mut().zip(grad.iter()) {
                *p -= lr * g;
            }
            epochs_used += 1;
        }
        if failed {
            self.params = snapshot;
        }
        let train_wall_time = start.elapsed().as_secs_f64();
        let mut report = if failed {
            FitnessReport::failed()
        } else {
            self.evaluate_mse(ds)?
        };
        report.train_wall_time = train_wall_time;
        report.epochs_used = epochs_used;
        report.numerical_failure |= failed;
        Ok(report)
    }

    /// Maximum absolute difference between the analytic gradient and a
    /// central finite difference with step `h`, over the training
    /// range. Meant for small instances.
    pub fn gradient_check(&self, ds: &Dataset, h: f64) -> Result<f64> {
        let (_, grad) = self.loss_and_grad(ds, &ds.train_range)?;
        let scored = self.scored_range(&ds.train_range)?;
        let mut probe = self.clone();
        let mut worst = 0.0f64;
        for i in 0..probe.params.len() {
            let orig = probe.params[i];
            probe.params[i] = orig + h;
            let (out_p, _) = probe.forward_full(ds, scored.end)?;
            probe.params[i] = orig - h;
            let (out_m, _) = probe.forward_full(ds, scored.end)?;
            probe.params[i] = orig;
            let lp = probe.mse_from_outputs(ds, &out_p, &scored);
            let lm = probe.mse_from_outputs(ds, &out_m, &scored);
            let numeric = (lp - lm) / (2.0 * h);
            worst = worst.max((grad[i] - numeric).abs());
        }
        Ok(worst)
    }

    fn mse_from_outputs(&self, ds: &Dataset, out: &[Vec<f64>], scored: &std::ops::Range<usize>) -> f64 {
        let mut acc = 0.0;
        for t in scored.clone() {
            let d = out[self.output_node][t] - ds.targets[t];
            acc += d * d;
        }
        acc / scored.len() as f64
    }

    /// Copy trained parameters back into the genome: edge weights
    /// directly, node biases from each cell's candidate bias. The
    /// footprint's node weights follow so communal reward sees them.
    pub fn write_back(&self, genome: &mut RnnGenome) {
        for (k, e) in genome.edges.iter_mut().enumerate() {
            e.weight = self.params[k];
        }
        let mut hidden_seen = 0;
        for (i, &id) in self.node_ids.iter().enumerate() {
            let node = genome.nodes.iter_mut().find(|nd| nd.id == id).unwrap();
            let o = self.node_offset[i];
            let bias = match self.kinds[i] {
                CellKind::Input => continue,
                CellKind::Output | CellKind::Simple => self.params[o],
                CellKind::Delta => self.params[o + 3],
                CellKind::Gru => self.params[o + 8],
                CellKind::Lstm => self.params[o + 11],
                CellKind::Mgu | CellKind::Ugrnn => self.params[o + 5],
            };
            node.bias = bias;
            if node.role == NodeRole::Hidden {
                if let Some(p) = genome.footprint.nodes.get_mut(hidden_seen) {
                    p.node_w = bias;
                }
                hidden_seen += 1;
            }
        }
    }
}
