//! Translate condensed cant paths into a recurrent network genome:
//! typed nodes at centroid positions and weighted edges with integer
//! time delays.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{Path, PointOrigin};
use crate::clustering::Condensed;
use crate::error::{Error, Result};
use crate::search_space::{
    proximity_fraction, NodeProvenance, Position, SearchSpace, SpaceFootprint,
};

pub const GENOME_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeType {
    SimpleNeuron,
    DeltaRnn,
    Gru,
    Lstm,
    Mgu,
    Ugrnn,
}

pub const NODE_TYPE_COUNT: usize = 6;

pub const ALL_NODE_TYPES: [NodeType; NODE_TYPE_COUNT] = [
    NodeType::SimpleNeuron,
    NodeType::DeltaRnn,
    NodeType::Gru,
    NodeType::Lstm,
    NodeType::Mgu,
    NodeType::Ugrnn,
];

impl NodeType {
    pub fn index(self) -> usize {
        ALL_NODE_TYPES.iter().position(|&t| t == self).unwrap()
    }

    pub fn label(self) -> &'static str {
        match self {
            NodeType::SimpleNeuron => "simple",
            NodeType::DeltaRnn => "delta",
            NodeType::Gru => "gru",
            NodeType::Lstm => "lstm",
            NodeType::Mgu => "mgu",
            NodeType::Ugrnn => "ugrnn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeRole {
    /// Feeds the input value at t - level.
    Input { level: usize, index: usize },
    Hidden,
    /// Network output, lives on level 0.
    Output { index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnNode {
    pub id: usize,
    pub pos: Position,
    pub role: NodeRole,
    pub node_type: NodeType,
    pub bias: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnEdge {
    pub src: usize,
    pub dst: usize,
    pub weight: f64,
    /// Time delay in steps; positive when src sits on a higher lag
    /// level than dst.
    pub delay: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnGenome {
    pub version: u32,
    pub lag_levels: usize,
    pub nodes: Vec<RnnNode>,
    pub edges: Vec<RnnEdge>,
    /// Reward targets in the search space, kept with the genome so the
    /// colony can reward the points behind each node on insertion.
    pub footprint: SpaceFootprint,
}

impl RnnGenome {
    pub fn hidden_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.role == NodeRole::Hidden).count()
    }

    pub fn serialize(&self) -> String {
        serde_json::to_string(self).expect("genome serialization cannot fail")
    }

    pub fn deserialize(text: &str) -> Result<Self> {
        // surface the version check before full decoding
        #[derive(Deserialize)]
        struct VersionProbe {
            version: u32,
        }
        let probe: VersionProbe =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if probe.version != GENOME_SCHEMA_VERSION {
            return Err(Error::UnsupportedVersion(probe.version));
        }
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Content hash over the canonical JSON form.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.serialize().as_bytes());
        let digest = hasher.finalize();
        digest.iter().take(16).map(|b| format!("{b:02x}")).collect()
    }

    /// Topological order over the 0-delay subgraph; errors on a cycle.
    pub fn zero_delay_topo_order(&self) -> Result<Vec<usize>> {
        let n = self.nodes.len();
        let index_of: HashMap<usize, usize> =
            self.nodes.iter().enumerate().map(|(i, nd)| (nd.id, i)).collect();
        let mut indeg = vec![0usize; n];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
        for e in self.edges.iter().filter(|e| e.delay == 0) {
            let s = index_of[&e.src];
            let d = index_of[&e.dst];
            out[s].push(d);
            indeg[d] += 1;
        }
        let mut queue: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        queue.sort_unstable();
        let mut order = Vec::with_capacity(n);
        let mut qi = 0;
        while qi < queue.len() {
            let i = queue[qi];
            qi += 1;
            order.push(self.nodes[i].id);
            for &d in &out[i] {
                indeg[d] -= 1;
                if indeg[d] == 0 {
                    queue.push(d);
                }
            }
        }
        if order.len() != n {
            return Err(Error::Structure("0-delay subgraph contains a cycle".into()));
        }
        Ok(order)
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph rnn {\n  rankdir=LR;\n");
        for n in &self.nodes {
            let shape = match n.role {
                NodeRole::Input { .. } => "box",
                NodeRole::Output { .. } => "doublecircle",
                NodeRole::Hidden => "ellipse",
            };
            out.push_str(&format!(
                "  n{} [label=\"{} L{}\" shape={}];\n",
                n.id,
                n.node_type.label(),
                n.pos.level,
                shape
            ));
        }
        let mut edges = self.edges.clone();
        edges.sort_by_key(|e| (e.src, e.dst, e.delay));
        for e in &edges {
            if e.delay > 0 {
                out.push_str(&format!(
                    "  n{} -> n{} [label=\"w={:.3} d={}\" style=dashed];\n",
                    e.src, e.dst, e.weight, e.delay
                ));
            } else {
                out.push_str(&format!("  n{} -> n{} [label=\"w={:.3}\"];\n", e.src, e.dst, e.weight));
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Key a path point resolves to during edge construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum EndPoint {
    Cluster(usize),
    Input(usize, usize),
    Output(usize),
}

/// Build a genome from condensed paths. One hidden node per cluster
/// plus the input/output anchors the paths touched; consecutive path
/// points become edges, duplicates merged with averaged weights.
pub fn build_genome<R: Rng>(
    paths: &[Path],
    condensed: &Condensed,
    space: &SearchSpace,
    cluster_eps: f64,
    rng: &mut R,
) -> Result<RnnGenome> {
    let lag_levels = space.config().lag_levels;

    // interior (path_idx, point_idx) -> cluster
    let mut point_cluster: HashMap<(usize, usize), usize> = HashMap::new();
    for (i, ip) in condensed.interior.iter().enumerate() {
        point_cluster.insert((ip.path_idx, ip.point_idx), condensed.assignment[i]);
    }

    let mut nodes = Vec::new();
    let mut provenance = Vec::new();
    let mut next_id = 0;
    let mut cluster_node = vec![usize::MAX; condensed.clusters.len()];

    for (ci, cluster) in condensed.clusters.iter().enumerate() {
        // node type by roulette over the summed type pheromones of the
        // cluster's live backing points; an equal-pheromone space gives
        // a uniform draw over the six types
        let mut weights = [0.0f64; NODE_TYPE_COUNT];
        let mut any = false;
        for &m in &cluster.members {
            if let Some(id) = condensed.interior[m].point_id {
                if let Some(p) = space.find_point(id) {
                    for (w, tp) in weights.iter_mut().zip(p.type_pheromones.iter()) {
                        *w += tp;
                    }
                    any = true;
                }
            }
        }
        if !any {
            weights = [1.0; NODE_TYPE_COUNT];
        }
        let node_type = ALL_NODE_TYPES[crate::search_space::roulette(&weights, rng)];

        let members: Vec<_> = cluster
            .members
            .iter()
            .filter_map(|&m| {
                let ip = &condensed.interior[m];
                ip.point_id.map(|id| {
                    let d = ip.pos.dist_xy(&cluster.centroid);
                    (id, proximity_fraction(d, cluster_eps))
                })
            })
            .collect();

        cluster_node[ci] = next_id;
        nodes.push(RnnNode {
            id: next_id,
            pos: cluster.centroid,
            role: NodeRole::Hidden,
            node_type,
            bias: cluster.centroid.w,
        });
        provenance.push(NodeProvenance {
            members,
            node_w: cluster.centroid.w,
            node_type: node_type.index(),
        });
        next_id += 1;
    }

    let mut input_nodes: HashMap<(usize, usize), usize> = HashMap::new();
    let mut output_nodes: HashMap<usize, usize> = HashMap::new();
    for path in paths {
        input_nodes.entry(path.input).or_insert_with(|| {
            let id = next_id;
            next_id += 1;
            let (level, index) = path.input;
            nodes.push(RnnNode {
                id,
                pos: Position::new(space.input_x(index), 0.0, level, 0.0),
                role: NodeRole::Input { level, index },
                node_type: NodeType::SimpleNeuron,
                bias: 0.0,
            });
            id
        });
        output_nodes.entry(path.output).or_insert_with(|| {
            let id = next_id;
            next_id += 1;
            nodes.push(RnnNode {
                id,
                pos: Position::new(space.output_x(path.output), 1.0, 0, 0.0),
                role: NodeRole::Output { index: path.output },
                node_type: NodeType::SimpleNeuron,
                bias: 0.0,
            });
            id
        });
    }

    // edges along each path; adjacent-spot weights, merged by averaging
    let mut edge_acc: HashMap<(usize, usize), (f64, usize, usize)> = HashMap::new();
    for (pi, path) in paths.iter().enumerate() {
        let resolve = |qi: usize| -> EndPoint {
            let pt = &path.points[qi];
            match pt.origin {
                PointOrigin::InputAnchor => EndPoint::Input(path.input.0, path.input.1),
                PointOrigin::OutputAnchor => EndPoint::Output(path.output),
                _ => EndPoint::Cluster(point_cluster[&(pi, qi)]),
            }
        };
        for qi in 0..path.points.len() - 1 {
            let a = resolve(qi);
            let b = resolve(qi + 1);
            let (src_id, src_level) = endpoint_node(&a, &cluster_node, &input_nodes, &output_nodes, &nodes);
            let (dst_id, dst_level) = endpoint_node(&b, &cluster_node, &input_nodes, &output_nodes, &nodes);
            if src_id == dst_id {
                // consecutive points condensed into one cluster
                continue;
            }
            let pa = &path.points[qi].pos;
            let pb = &path.points[qi + 1].pos;
            // the walk never descends levels except onto the output
            // anchor; anything else is an upstream invariant break
            if dst_level < src_level && !matches!(b, EndPoint::Output(_)) {
                // cluster centroids share their members' level, so this
                // cannot happen for a valid path
                return Err(Error::Internal(format!(
                    "path segment descends from level {src_level} to {dst_level}"
                )));
            }
            let delay = src_level.saturating_sub(dst_level);
            let weight = 0.5 * (pa.w + pb.w);
            let entry = edge_acc.entry((src_id, dst_id)).or_insert((0.0, 0, delay));
            entry.0 += weight;
            entry.1 += 1;
        }
    }

    let mut edges: Vec<RnnEdge> = edge_acc
        .into_iter()
        .map(|((src, dst), (sum, count, delay))| RnnEdge {
            src,
            dst,
            weight: sum / count as f64,
            delay,
        })
        .collect();
    edges.sort_by_key(|e| (e.src, e.dst));
    // clustering can fold a forward walk into a same-level cycle
    // (A -> B -> A through interleaved clusters); drop the 0-delay
    // back-edges a deterministic DFS finds to restore acyclicity
    let edges = drop_zero_delay_back_edges(&nodes, edges);

    let genome = prune_unreachable(RnnGenome {
        version: GENOME_SCHEMA_VERSION,
        lag_levels,
        nodes,
        edges,
        footprint: SpaceFootprint::default(),
    });

    // footprint only covers surviving hidden nodes
    let surviving: Vec<usize> = genome
        .nodes
        .iter()
        .filter(|n| n.role == NodeRole::Hidden)
        .map(|n| n.id)
        .collect();
    let mut footprint = SpaceFootprint {
        nodes: surviving.into_iter().map(|id| provenance[id].clone()).collect(),
        used_levels: Vec::new(),
        used_inputs: Vec::new(),
        used_outputs: Vec::new(),
    };
    for n in &genome.nodes {
        match n.role {
            NodeRole::Input { level, index } => {
                if !footprint.used_levels.contains(&level) {
                    footprint.used_levels.push(level);
                }
                footprint.used_inputs.push((level, index));
            }
            NodeRole::Output { index } => footprint.used_outputs.push(index),
            NodeRole::Hidden => {
                if !footprint.used_levels.contains(&n.pos.level) {
                    footprint.used_levels.push(n.pos.level);
                }
            }
        }
    }
    footprint.used_levels.sort_unstable();
    footprint.used_inputs.sort_unstable();
    footprint.used_outputs.sort_unstable();

    let mut genome = genome;
    genome.footprint = footprint;
    genome.zero_delay_topo_order()?;
    Ok(genome)
}

fn endpoint_node(
    e: &EndPoint,
    cluster_node: &[usize],
    input_nodes: &HashMap<(usize, usize), usize>,
    output_nodes: &HashMap<usize, usize>,
    nodes: &[RnnNode],
) -> (usize, usize) {
    let id = match e {
        EndPoint::Cluster(c) => cluster_node[*c],
        EndPoint::Input(l, i) => input_nodes[&(*l, *i)],
        EndPoint::Output(o) => output_nodes[o],
    };
    (id, nodes[id].pos.level)
}

/// Remove every 0-delay edge that closes a cycle, found by an
/// iterative DFS rooted at ascending node ids; the scan order makes
/// the surviving edge set deterministic.
fn drop_zero_delay_back_edges(nodes: &[RnnNode], edges: Vec<RnnEdge>) -> Vec<RnnEdge> {
    let n = nodes.len();
    let index_of: HashMap<usize, usize> =
        nodes.iter().enumerate().map(|(i, nd)| (nd.id, i)).collect();
    // adjacency over 0-delay edges, keyed by original edge index
    let mut out: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (k, e) in edges.iter().enumerate() {
        if e.delay == 0 {
            out[index_of[&e.src]].push((index_of[&e.dst], k));
        }
    }
    const WHITE: u8 = 0;
    const GRAY: u8 = 1;
    const BLACK: u8 = 2;
    let mut color = vec![WHITE; n];
    let mut dropped = vec![false; edges.len()];
    for root in 0..n {
        if color[root] != WHITE {
            continue;
        }
        // stack of (node, next child index)
        let mut stack = vec![(root, 0usize)];
        color[root] = GRAY;
        while let Some(&mut (v, ref mut ci)) = stack.last_mut() {
            if *ci < out[v].len() {
                let (w, k) = out[v][*ci];
                *ci += 1;
                match color[w] {
                    GRAY => dropped[k] = true, // back edge
                    WHITE => {
                        color[w] = GRAY;
                        stack.push((w, 0));
                    }
                    _ => {}
                }
            } else {
                color[v] = BLACK;
                stack.pop();
            }
        }
    }
    edges
        .into_iter()
        .enumerate()
        .filter(|(k, _)| !dropped[*k])
        .map(|(_, e)| e)
        .collect()
}

/// Drop nodes that are not both reachable from an input and able to
/// reach an output, along with their edges.
fn prune_unreachable(genome: RnnGenome) -> RnnGenome {
    let n = genome.nodes.len();
    let index_of: HashMap<usize, usize> =
        genome.nodes.iter().enumerate().map(|(i, nd)| (nd.id, i)).collect();
    let mut fwd: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut bwd: Vec<Vec<usize>> = vec![Vec::new(); n];
    for e in &genome.edges {
        fwd[index_of[&e.src]].push(index_of[&e.dst]);
        bwd[index_of[&e.dst]].push(index_of[&e.src]);
    }
    let flood = |starts: Vec<usize>, adj: &Vec<Vec<usize>>| -> Vec<bool> {
        let mut seen = vec![false; n];
        let mut queue = starts;
        for &s in &queue {
            seen[s] = true;
        }
        let mut qi = 0;
        while qi < queue.len() {
            let i = queue[qi];
            qi += 1;
            for &j in &adj[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push(j);
                }
            }
        }
        seen
    };
    let inputs: Vec<usize> = (0..n)
        .filter(|&i| matches!(genome.nodes[i].role, NodeRole::Input { .. }))
        .collect();
    let outputs: Vec<usize> = (0..n)
        .filter(|&i| matches!(genome.nodes[i].role, NodeRole::Output { .. }))
        .collect();
    let from_input = flood(inputs, &fwd);
    let to_output = flood(outputs, &bwd);
    let keep: Vec<bool> = (0..n)
        .map(|i| {
            let anchor = !matches!(genome.nodes[i].role, NodeRole::Hidden);
            anchor || (from_input[i] && to_output[i])
        })
        .collect();
    let kept_ids: std::collections::HashSet<usize> = genome
        .nodes
        .iter()
        .enumerate()
        .filter(|(i, _)| keep[*i])
        .map(|(_, nd)| nd.id)
        .collect();
    RnnGenome {
        nodes: genome.nodes.into_iter().filter(|nd| kept_ids.contains(&nd.id)).collect(),
        edges: genome
            .edges
            .into_iter()
            .filter(|e| kept_ids.contains(&e.src) && kept_ids.contains(&e.dst))
            .collect(),
        ..genome
    }
}
