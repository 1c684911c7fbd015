//! Time-conditioned residual message passing and the latent roll-out.
//!
//! Each step concatenates a learned time embedding to every node state, runs
//! a small message-passing stack and adds the projected output back onto the
//! states. The graph-level snapshot after every update is the mean of the
//! node rows.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, BoundParams, ParamId, ParamSet, Tape, Tensor, Var};
use crate::graph::Topology;

/// Width of the edge attribute (a centroid offset).
pub const EDGE_ATTR_LEN: usize = 3;

const GAT_SLOPE: f64 = 0.2;
const GAT_MASK: f64 = -1e9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backbone {
    #[serde(rename = "graphsage")]
    GraphSage,
    Gcn,
    Gat,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvolutionError {
    #[error("time step {step} outside the embedding table of {horizon} rows")]
    StepOutOfRange { step: usize, horizon: usize },
    #[error("node state has width {got}, expected {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("node state became non-finite at step {step}")]
    NonFiniteState { step: usize },
    #[error("readout over zero nodes")]
    EmptyGraph,
    #[error("horizon must be at least 1")]
    EmptyHorizon,
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

/// Trainable `T x d_t` table; row `t` conditions step `t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeEmbeddingTable {
    pub id: ParamId,
    pub steps: usize,
    pub width: usize,
}

/// Parameters of one message-passing layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MessageLayer {
    /// Applied to the node's own input (GraphSAGE, GAT).
    pub self_weight: Option<ParamId>,
    /// GraphSAGE: `(in + 3) x out` over `[mean x_j ; mean a_ji]`.
    /// GCN: `in x out` after normalized aggregation. GAT: shared `in x out` projection.
    pub neigh_weight: ParamId,
    pub bias: ParamId,
    /// GAT scoring vectors `(target: out x 1, source: out x 1, edge: 3 x 1)`.
    pub attention: Option<(ParamId, ParamId, ParamId)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionParams {
    pub backbone: Backbone,
    pub latent: usize,
    pub time: TimeEmbeddingTable,
    pub layers: Vec<MessageLayer>,
    pub out_weight: ParamId,
    pub out_bias: ParamId,
}

impl EvolutionParams {
    /// Registers a `depth`-layer stack with hidden width `latent`.
    pub fn init(
        params: &mut ParamSet,
        backbone: Backbone,
        latent: usize,
        time_width: usize,
        steps: usize,
        depth: usize,
        init: &mut impl FnMut(usize, usize, usize) -> Tensor,
    ) -> Self {
        let time_id = params.add("evolve.time_table", init(steps, time_width, time_width));
        let mut layers = Vec::with_capacity(depth);
        for l in 0..depth.max(1) {
            let input = if l == 0 { latent + time_width } else { latent };
            let name = |s: &str| format!("evolve.layer{l}.{s}");
            let layer = match backbone {
                Backbone::GraphSage => MessageLayer {
                    self_weight: Some(params.add(name("self"), init(input, latent, input))),
                    neigh_weight: params.add(
                        name("neigh"),
                        init(input + EDGE_ATTR_LEN, latent, input + EDGE_ATTR_LEN),
                    ),
                    bias: params.add(name("bias"), init(1, latent, input)),
                    attention: None,
                },
                Backbone::Gcn => MessageLayer {
                    self_weight: None,
                    neigh_weight: params.add(name("neigh"), init(input, latent, input)),
                    bias: params.add(name("bias"), init(1, latent, input)),
                    attention: None,
                },
                Backbone::Gat => MessageLayer {
                    self_weight: Some(params.add(name("self"), init(input, latent, input))),
                    neigh_weight: params.add(name("proj"), init(input, latent, input)),
                    bias: params.add(name("bias"), init(1, latent, input)),
                    attention: Some((
                        params.add(name("att_target"), init(latent, 1, latent)),
                        params.add(name("att_source"), init(latent, 1, latent)),
                        params.add(name("att_edge"), init(EDGE_ATTR_LEN, 1, EDGE_ATTR_LEN)),
                    )),
                },
            };
            layers.push(layer);
        }
        Self {
            backbone,
            latent,
            time: TimeEmbeddingTable {
                id: time_id,
                steps,
                width: time_width,
            },
            layers,
            out_weight: params.add("evolve.out.weight", init(latent, latent, latent)),
            out_bias: params.add("evolve.out.bias", init(1, latent, latent)),
        }
    }
}

/// Dense per-graph operators derived once from a [`Topology`].
#[derive(Clone, Debug, PartialEq)]
pub struct MessageContext {
    pub nodes: usize,
    /// `A[i][j] = 1/deg(i)` for each arc `j -> i`.
    pub mean_adjacency: Tensor,
    /// Mean incoming edge attribute per node, `n x 3`.
    pub mean_edge_attr: Tensor,
    /// `D^-1/2 (A + I) D^-1/2`.
    pub gcn_norm: Tensor,
    /// 0/1 arc indicator, `n x n`.
    pub adjacency: Tensor,
    /// Row `i * n + j` holds the attribute of arc `j -> i`.
    pub pair_attr: Tensor,
    /// 0 where an arc exists, a large negative constant elsewhere.
    pub attention_mask: Tensor,
}

impl MessageContext {
    pub fn new(topology: &Topology) -> Self {
        let n = topology.node_count();
        let deg = topology.in_degree();
        let mut mean_adjacency = Tensor::zeros(n, n);
        let mut mean_edge_attr = Tensor::zeros(n, EDGE_ATTR_LEN);
        let mut adjacency = Tensor::zeros(n, n);
        let mut pair_attr = Tensor::zeros(n * n, EDGE_ATTR_LEN);
        let mut attention_mask = Tensor::filled(n, n, GAT_MASK);
        for arc in &topology.arcs {
            let (i, j) = (arc.target, arc.source);
            let w = 1.0 / deg[i] as f64;
            mean_adjacency.set(i, j, mean_adjacency.get(i, j) + w);
            adjacency.set(i, j, 1.0);
            attention_mask.set(i, j, 0.0);
            for c in 0..EDGE_ATTR_LEN {
                mean_edge_attr.set(i, c, mean_edge_attr.get(i, c) + w * arc.attr.offset[c]);
                pair_attr.set(i * n + j, c, arc.attr.offset[c]);
            }
        }
        let mut with_loops = adjacency.clone();
        for i in 0..n {
            with_loops.set(i, i, with_loops.get(i, i) + 1.0);
        }
        let d: Vec<f64> = (0..n).map(|i| with_loops.row(i).iter().sum::<f64>()).collect();
        let mut gcn_norm = with_loops;
        for i in 0..n {
            for j in 0..n {
                gcn_norm.set(i, j, gcn_norm.get(i, j) / (d[i] * d[j]).sqrt());
            }
        }
        Self {
            nodes: n,
            mean_adjacency,
            mean_edge_attr,
            gcn_norm,
            adjacency,
            pair_attr,
            attention_mask,
        }
    }
}

/// Row `step` of the time table as a `1 x d_t` tape value.
pub fn time_embedding(
    tape: &mut Tape,
    table: &TimeEmbeddingTable,
    bound: &BoundParams,
    step: usize,
) -> Result<Var, EvolutionError> {
    if step >= table.steps {
        return Err(EvolutionError::StepOutOfRange {
            step,
            horizon: table.steps,
        });
    }
    Ok(tape.slice_rows(bound[table.id], step, step + 1)?)
}

fn message_layer(
    tape: &mut Tape,
    x: Var,
    ctx: &MessageContext,
    backbone: Backbone,
    layer: &MessageLayer,
    bound: &BoundParams,
) -> Result<Var, EvolutionError> {
    let n = ctx.nodes;
    let pre = match backbone {
        Backbone::GraphSage => {
            let adj = tape.constant(ctx.mean_adjacency.clone());
            let attr = tape.constant(ctx.mean_edge_attr.clone());
            let agg = tape.matmul(adj, x)?;
            let agg = tape.concat_cols(agg, attr)?;
            let neigh = tape.matmul(agg, bound[layer.neigh_weight])?;
            let own = tape.matmul(x, bound[layer.self_weight.expect("sage has a self weight")])?;
            tape.add(own, neigh)?
        }
        Backbone::Gcn => {
            let norm = tape.constant(ctx.gcn_norm.clone());
            let agg = tape.matmul(norm, x)?;
            tape.matmul(agg, bound[layer.neigh_weight])?
        }
        Backbone::Gat => {
            let (a_t, a_s, a_e) = layer.attention.expect("gat has attention vectors");
            let wx = tape.matmul(x, bound[layer.neigh_weight])?;
            // score[i][j] = a_t . Wx_i + a_s . Wx_j + a_e . attr(j -> i)
            let st = tape.matmul(wx, bound[a_t])?;
            let ones = tape.constant(Tensor::filled(1, n, 1.0));
            let st = tape.matmul(st, ones)?;
            let ss = tape.matmul(wx, bound[a_s])?;
            let ss = tape.transpose(ss)?;
            let ss = tape.broadcast_row(ss, n)?;
            let pair = tape.constant(ctx.pair_attr.clone());
            let se = tape.matmul(pair, bound[a_e])?;
            let se = tape.reshape(se, n, n)?;
            let score = tape.add(st, ss)?;
            let score = tape.add(score, se)?;
            let score = tape.leaky_relu(score, GAT_SLOPE)?;
            let mask = tape.constant(ctx.attention_mask.clone());
            let score = tape.add(score, mask)?;
            let alpha = tape.softmax_rows(score)?;
            // Isolated rows softmax to uniform over masked entries; zero them.
            let adj = tape.constant(ctx.adjacency.clone());
            let alpha = tape.mul(alpha, adj)?;
            let neigh = tape.matmul(alpha, wx)?;
            let own = tape.matmul(x, bound[layer.self_weight.expect("gat has a self weight")])?;
            tape.add(own, neigh)?
        }
    };
    let pre = tape.add(pre, bound[layer.bias])?;
    Ok(tape.relu(pre)?)
}

/// `Delta H` for node states `h` (`n x d`) under time embedding `e_t` (`1 x d_t`).
pub fn residual_step(
    tape: &mut Tape,
    h: Var,
    e_t: Var,
    ctx: &MessageContext,
    params: &EvolutionParams,
    bound: &BoundParams,
) -> Result<Var, EvolutionError> {
    let (rows, width) = tape.shape(h);
    if width != params.latent {
        return Err(EvolutionError::WidthMismatch {
            expected: params.latent,
            got: width,
        });
    }
    let (_, tw) = tape.shape(e_t);
    if tw != params.time.width {
        return Err(EvolutionError::WidthMismatch {
            expected: params.time.width,
            got: tw,
        });
    }
    if rows != ctx.nodes {
        return Err(EvolutionError::WidthMismatch {
            expected: ctx.nodes,
            got: rows,
        });
    }
    let e = tape.broadcast_row(e_t, rows)?;
    let mut x = tape.concat_cols(h, e)?;
    for layer in &params.layers {
        x = message_layer(tape, x, ctx, params.backbone, layer, bound)?;
    }
    Ok(tape.affine(x, bound[params.out_weight], bound[params.out_bias])?)
}

/// Column mean over node rows.
pub fn readout(tape: &mut Tape, h: Var) -> Result<Var, EvolutionError> {
    if tape.shape(h).0 == 0 {
        return Err(EvolutionError::EmptyGraph);
    }
    Ok(tape.mean_rows(h)?)
}

/// Node states after each update and the matching graph-level snapshots.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub states: Vec<Var>,
    pub snapshots: Vec<Var>,
}

/// Runs `steps` residual updates from `h0`; snapshot `t` follows update `t + 1`.
pub fn evolve(
    tape: &mut Tape,
    h0: Var,
    topology: &Topology,
    params: &EvolutionParams,
    bound: &BoundParams,
    steps: usize,
) -> Result<Trajectory, EvolutionError> {
    if steps == 0 {
        return Err(EvolutionError::EmptyHorizon);
    }
    if topology.node_count() == 0 {
        return Err(EvolutionError::EmptyGraph);
    }
    let ctx = MessageContext::new(topology);
    let mut h = h0;
    let mut traj = Trajectory {
        states: Vec::with_capacity(steps),
        snapshots: Vec::with_capacity(steps),
    };
    for step in 0..steps {
        let e_t = time_embedding(tape, &params.time, bound, step)?;
        let delta = residual_step(tape, h, e_t, &ctx, params, bound).map_err(|e| match e {
            EvolutionError::Autodiff(AutodiffError::NonFinite { .. }) => EvolutionError::NonFiniteState { step },
            other => other,
        })?;
        h = tape
            .add(h, delta)
            .map_err(|_| EvolutionError::NonFiniteState { step })?;
        traj.states.push(h);
        traj.snapshots.push(readout(tape, h)?);
    }
    Ok(traj)
}
