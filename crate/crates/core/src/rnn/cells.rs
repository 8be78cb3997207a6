//! Scalar recurrent cell implementations with hand-derived backward
//! passes. Each node receives one aggregated pre-activation `x` (the
//! weighted sum over its incoming edges), carries its previous output
//! `h_prev` and, for the LSTM, a separate cell state.
//!
//! Gate activations are sigmoids, candidates are tanh.

use crate::graph::NodeType;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellKind {
    Input,
    Output,
    Simple,
    Delta,
    Gru,
    Lstm,
    Mgu,
    Ugrnn,
}

impl CellKind {
    pub fn from_node_type(t: NodeType) -> Self {
        match t {
            NodeType::SimpleNeuron => CellKind::Simple,
            NodeType::DeltaRnn => CellKind::Delta,
            NodeType::Gru => CellKind::Gru,
            NodeType::Lstm => CellKind::Lstm,
            NodeType::Mgu => CellKind::Mgu,
            NodeType::Ugrnn => CellKind::Ugrnn,
        }
    }

    /// Number of trainable parameters owned by the node itself
    /// (edge weights live elsewhere).
    pub fn param_count(self) -> usize {
        match self {
            CellKind::Input => 0,
            CellKind::Output | CellKind::Simple => 1, // bias
            CellKind::Delta => 5,                     // alpha, beta1, beta2, b, b_r
            CellKind::Gru => 9,                       // (w,u,b) x {z, r, h}
            CellKind::Lstm => 12,                     // (w,u,b) x {f, i, o, g}
            CellKind::Mgu => 6,                       // (w,u,b) x {f, c}
            CellKind::Ugrnn => 6,                     // (w,u,b) x {g, c}
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Intermediate values cached by the forward step, enough to run the
/// exact backward step.
#[derive(Debug, Clone, Copy, Default)]
pub struct CellTrace {
    pub x: f64,
    pub h_prev: f64,
    pub c_prev: f64,
    pub c: f64,
    pub out: f64,
    /// Gate/candidate values, meaning depends on the cell kind.
    pub g: [f64; 4],
}

/// One cell step: returns the node output and fills the trace.
pub fn cell_forward(kind: CellKind, p: &[f64], x: f64, h_prev: f64, c_prev: f64) -> CellTrace {
    let mut t = CellTrace { x, h_prev, c_prev, ..Default::default() };
    match kind {
        CellKind::Input => {
            t.out = x;
        }
        CellKind::Output => {
            t.out = x + p[0];
        }
        CellKind::Simple => {
            t.out = (x + p[0]).tanh();
        }
        CellKind::Delta => {
            let [alpha, beta1, beta2, b, b_r] = [p[0], p[1], p[2], p[3], p[4]];
            let z = (alpha * x * h_prev + beta1 * h_prev + beta2 * x + b).tanh();
            let r = sigmoid(x + b_r);
            t.g = [z, r, 0.0, 0.0];
            t.out = (1.0 - r) * z + r * h_prev;
        }
        CellKind::Gru => {
            let z = sigmoid(p[0] * x + p[1] * h_prev + p[2]);
            let r = sigmoid(p[3] * x + p[4] * h_prev + p[5]);
            let g = (p[6] * x + p[7] * (r * h_prev) + p[8]).tanh();
            t.g = [z, r, g, 0.0];
            t.out = (1.0 - z) * h_prev + z * g;
        }
        CellKind::Lstm => {
            let f = sigmoid(p[0] * x + p[1] * h_prev + p[2]);
            let i = sigmoid(p[3] * x + p[4] * h_prev + p[5]);
            let o = sigmoid(p[6] * x + p[7] * h_prev + p[8]);
            let g = (p[9] * x + p[10] * h_prev + p[11]).tanh();
            t.c = f * c_prev + i * g;
            t.g = [f, i, o, g];
            t.out = o * t.c.tanh();
        }
        CellKind::Mgu => {
            let f = sigmoid(p[0] * x + p[1] * h_prev + p[2]);
            let g = (p[3] * x + p[4] * (f * h_prev) + p[5]).tanh();
            t.g = [f, g, 0.0, 0.0];
            t.out = (1.0 - f) * h_prev + f * g;
        }
        CellKind::Ugrnn => {
            let g = sigmoid(p[0] * x + p[1] * h_prev + p[2]);
            let c = (p[3] * x + p[4] * h_prev + p[5]).tanh();
            t.g = [g, c, 0.0, 0.0];
            t.out = g * h_prev + (1.0 - g) * c;
        }
    }
    t
}

/// Gradients flowing out of one cell step.
#[derive(Debug, Clone, Copy, Default)]
pub struct CellGrad {
    pub dx: f64,
    pub dh_prev: f64,
    pub dc_prev: f64,
}

/// Backward through one cell step. `d_out` is the loss gradient at the
/// node output, `d_c` the gradient arriving at this step's cell state
/// from the future (LSTM only). Parameter gradients accumulate into
/// `dp`.
pub fn cell_backward(
    kind: CellKind,
    p: &[f64],
    t: &CellTrace,
    d_out: f64,
    d_c: f64,
    dp: &mut [f64],
) -> CellGrad {
    let mut g = CellGrad::default();
    match kind {
        CellKind::Input => {
            g.dx = d_out;
        }
        CellKind::Output => {
            g.dx = d_out;
            dp[0] += d_out;
        }
        CellKind::Simple => {
            let d = d_out * (1.0 - t.out * t.out);
            g.dx = d;
            dp[0] += d;
        }
        CellKind::Delta => {
            let [alpha, beta1, beta2, _, _] = [p[0], p[1], p[2], p[3], p[4]];
            let (z, r) = (t.g[0], t.g[1]);
            let dz = d_out * (1.0 - r);
            let dr = d_out * (t.h_prev - z);
            g.dh_prev += d_out * r;
            let dpre = dz * (1.0 - z * z);
            dp[0] += dpre * t.x * t.h_prev;
            dp[1] += dpre * t.h_prev;
            dp[2] += dpre * t.x;
            dp[3] += dpre;
            g.dx += dpre * (alpha * t.h_prev + beta2);
            g.dh_prev += dpre * (alpha * t.x + beta1);
            let dsig = dr * r * (1.0 - r);
            g.dx += dsig;
            dp[4] += dsig;
        }
        CellKind::Gru => {
            let (z, r, gc) = (t.g[0], t.g[1], t.g[2]);
            let dz = d_out * (gc - t.h_prev);
            let dg = d_out * z;
            g.dh_prev += d_out * (1.0 - z);
            let dag = dg * (1.0 - gc * gc);
            dp[6] += dag * t.x;
            dp[7] += dag * r * t.h_prev;
            dp[8] += dag;
            g.dx += dag * p[6];
            let dr = dag * p[7] * t.h_prev;
            g.dh_prev += dag * p[7] * r;
            let dar = dr * r * (1.0 - r);
            dp[3] += dar * t.x;
            dp[4] += dar * t.h_prev;
            dp[5] += dar;
            g.dx += dar * p[3];
            g.dh_prev += dar * p[4];
            let daz = dz * z * (1.0 - z);
            dp[0] += daz * t.x;
            dp[1] += daz * t.h_prev;
            dp[2] += daz;
            g.dx += daz * p[0];
            g.dh_prev += daz * p[1];
        }
        CellKind::Lstm => {
            let (f, i, o, gc) = (t.g[0], t.g[1], t.g[2], t.g[3]);
            let tc = t.c.tanh();
            let do_ = d_out * tc;
            let dc = d_out * o * (1.0 - tc * tc) + d_c;
            let df = dc * t.c_prev;
            let di = dc * gc;
            let dg = dc * i;
            g.dc_prev = dc * f;
            let dag = dg * (1.0 - gc * gc);
            dp[9] += dag * t.x;
            dp[10] += dag * t.h_prev;
            dp[11] += dag;
            g.dx += dag * p[9];
            g.dh_prev += dag * p[10];
            for (da, base) in [
                (df * f * (1.0 - f), 0),
                (di * i * (1.0 - i), 3),
                (do_ * o * (1.0 - o), 6),
            ] {
                dp[base] += da * t.x;
                dp[base + 1] += da * t.h_prev;
                dp[base + 2] += da;
                g.dx += da * p[base];
                g.dh_prev += da * p[base + 1];
            }
        }
        CellKind::Mgu => {
            let (f, gc) = (t.g[0], t.g[1]);
            let mut df = d_out * (gc - t.h_prev);
            let dg = d_out * f;
            g.dh_prev += d_out * (1.0 - f);
            let dag = dg * (1.0 - gc * gc);
            dp[3] += dag * t.x;
            dp[4] += dag * f * t.h_prev;
            dp[5] += dag;
            g.dx += dag * p[3];
            df += dag * p[4] * t.h_prev;
            g.dh_prev += dag * p[4] * f;
            let daf = df * f * (1.0 - f);
            dp[0] += daf * t.x;
            dp[1] += daf * t.h_prev;
            dp[2] += daf;
            g.dx += daf * p[0];
            g.dh_prev += daf * p[1];
        }
        CellKind::Ugrnn => {
            let (gt, ct) = (t.g[0], t.g[1]);
            let dgt = d_out * (t.h_prev - ct);
            let dct = d_out * (1.0 - gt);
            g.dh_prev += d_out * gt;
            let dac = dct * (1.0 - ct * ct);
            dp[3] += dac * t.x;
            dp[4] += dac * t.h_prev;
            dp[5] += dac;
            g.dx += dac * p[3];
            g.dh_prev += dac * p[4];
            let dag = dgt * gt * (1.0 - gt);
            dp[0] += dag * t.x;
            dp[1] += dag * t.h_prev;
            dp[2] += dag;
            g.dx += dag * p[0];
            g.dh_prev += dag * p[1];
        }
    }
    g
}
