//! The stacked-plane 4D search space: pheromone point storage, level /
//! input / output selection pheromones, spatial queries, deposit, reward
//! and decay.
//!
//! Each lag level is a 2D unit-square plane; a point also carries an
//! unbounded weight coordinate `w` and a decaying pheromone intensity.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NODE_TYPE_COUNT;

/// A location in the 4D search space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    /// Lag index, 0 = current time step, higher = older.
    pub level: usize,
    /// Weight coordinate; unbounded.
    pub w: f64,
}

impl Position {
    pub fn new(x: f64, y: f64, level: usize, w: f64) -> Self {
        Self { x, y, level, w }
    }

    /// Planar distance, ignoring level and weight.
    pub fn dist_xy(&self, other: &Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }
}

pub type PointId = u64;

#[derive(Debug, Clone)]
pub struct PheromonePoint {
    pub id: PointId,
    pub pos: Position,
    pub pheromone: f64,
    /// One pheromone per candidate node type, driving type selection
    /// for the neuron a cluster containing this point condenses into.
    pub type_pheromones: [f64; NODE_TYPE_COUNT],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpaceConfig {
    /// Number of lag levels L.
    pub lag_levels: usize,
    pub tau_init: f64,
    pub tau_max: f64,
    /// Points at or below this pheromone level are removed.
    pub tau_min: f64,
    /// Reward increment added on genome insertion.
    pub deposit_const: f64,
    /// Per-tick pheromone decay.
    pub decay: f64,
    pub input_count: usize,
    pub output_count: usize,
}

impl Default for SpaceConfig {
    fn default() -> Self {
        Self {
            lag_levels: 5,
            tau_init: 1.0,
            tau_max: 10.0,
            tau_min: 0.1,
            deposit_const: 0.5,
            decay: 0.05,
            input_count: 1,
            output_count: 1,
        }
    }
}

impl SpaceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lag_levels < 1 {
            return Err(Error::Config("lag_levels must be >= 1".into()));
        }
        if !(self.tau_min < self.tau_init && self.tau_init <= self.tau_max) {
            return Err(Error::Config(format!(
                "need tau_min < tau_init <= tau_max, got {} / {} / {}",
                self.tau_min, self.tau_init, self.tau_max
            )));
        }
        if !(self.decay > 0.0 && self.decay < 1.0) {
            return Err(Error::Config(format!("decay must be in (0,1), got {}", self.decay)));
        }
        if self.input_count < 1 || self.output_count < 1 {
            return Err(Error::Config("need at least one input and one output".into()));
        }
        if self.deposit_const <= 0.0 {
            return Err(Error::Config("deposit_const must be positive".into()));
        }
        Ok(())
    }
}

/// Roulette-wheel selection: returns an index with probability
/// `weights[i] / sum(weights)`. Consumes exactly one draw from `rng`.
pub fn roulette<R: Rng>(weights: &[f64], rng: &mut R) -> usize {
    debug_assert!(!weights.is_empty());
    let total: f64 = weights.iter().sum();
    let mut r = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if r < *w {
            return i;
        }
        r -= w;
    }
    weights.len() - 1
}

/// Proximity reward falloff: full at the centroid, zero at the cluster
/// radius `eps`.
pub fn proximity_fraction(dist: f64, eps: f64) -> f64 {
    (1.0 - dist / eps).clamp(0.0, 1.0)
}

/// Reward targets for one genome node, carried as genome provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeProvenance {
    /// (backing space point, proximity fraction in [0,1]).
    pub members: Vec<(PointId, f64)>,
    /// The node weight shared back into the space.
    pub node_w: f64,
    /// Index into the node-type table.
    pub node_type: usize,
}

/// Everything reward_genome needs to know about a genome's footprint.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SpaceFootprint {
    pub nodes: Vec<NodeProvenance>,
    pub used_levels: Vec<usize>,
    /// (level, input index) pairs.
    pub used_inputs: Vec<(usize, usize)>,
    pub used_outputs: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SearchSpace {
    cfg: SpaceConfig,
    next_id: PointId,
    /// Per-level point store, kept sorted by y.
    levels: Vec<Vec<PheromonePoint>>,
    level_pheromones: Vec<f64>,
    /// Per level, one pheromone per input node.
    input_pheromones: Vec<Vec<f64>>,
    output_pheromones: Vec<f64>,
}

impl SearchSpace {
    pub fn new(cfg: SpaceConfig) -> Result<Self> {
        cfg.validate()?;
        let levels = vec![Vec::new(); cfg.lag_levels];
        let level_pheromones = (0..cfg.lag_levels).map(|l| 2.0 * (l as f64 + 1.0)).collect();
        let input_pheromones = vec![vec![cfg.tau_init; cfg.input_count]; cfg.lag_levels];
        let output_pheromones = vec![cfg.tau_init; cfg.output_count];
        Ok(Self {
            cfg,
            next_id: 0,
            levels,
            level_pheromones,
            input_pheromones,
            output_pheromones,
        })
    }

    pub fn config(&self) -> &SpaceConfig {
        &self.cfg
    }

    pub fn level_pheromones(&self) -> &[f64] {
        &self.level_pheromones
    }

    pub fn point_count(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn total_pheromone(&self) -> f64 {
        self.levels.iter().flatten().map(|p| p.pheromone).sum()
    }

    /// x position of input node `idx`: inputs are uniformly spaced on
    /// [0,1] at y = 0 on every level.
    pub fn input_x(&self, idx: usize) -> f64 {
        spread_x(idx, self.cfg.input_count)
    }

    pub fn output_x(&self, idx: usize) -> f64 {
        spread_x(idx, self.cfg.output_count)
    }

    pub fn select_start_level<R: Rng>(&self, rng: &mut R) -> usize {
        roulette(&self.level_pheromones, rng)
    }

    /// Roulette restricted to levels strictly above `current`. Returns
    /// `current` unchanged when already at the top.
    pub fn select_climb_level<R: Rng>(&self, current: usize, rng: &mut R) -> usize {
        if current + 1 >= self.cfg.lag_levels {
            return current;
        }
        let higher = &self.level_pheromones[current + 1..];
        current + 1 + roulette(higher, rng)
    }

    pub fn select_input<R: Rng>(&self, level: usize, rng: &mut R) -> usize {
        roulette(&self.input_pheromones[level], rng)
    }

    pub fn select_output<R: Rng>(&self, rng: &mut R) -> usize {
        roulette(&self.output_pheromones, rng)
    }

    /// All points on `center.level` within (inclusive) planar distance
    /// `radius`. With `forward_only` set, only points with y >= center.y
    /// are sensed (same-level moves ignore pheromone behind the agent);
    /// climb moves query the target level with the flag unset.
    pub fn query_radius(
        &self,
        center: &Position,
        radius: f64,
        forward_only: bool,
    ) -> Vec<&PheromonePoint> {
        debug_assert!(radius > 0.0);
        let pts = &self.levels[center.level];
        // Points are sorted by y: restrict the scan to the y window.
        let lo = pts.partition_point(|p| p.pos.y < center.y - radius);
        let hi = pts.partition_point(|p| p.pos.y <= center.y + radius);
        pts[lo..hi]
            .iter()
            .filter(|p| !forward_only || p.pos.y >= center.y)
            .filter(|p| p.pos.dist_xy(center) <= radius)
            .collect()
    }

    pub fn deposit_point(&mut self, pos: Position, pheromone: f64) -> PointId {
        let id = self.next_id;
        self.next_id += 1;
        let point = PheromonePoint {
            id,
            pos,
            pheromone: pheromone.min(self.cfg.tau_max),
            type_pheromones: [self.cfg.tau_init; NODE_TYPE_COUNT],
        };
        let level = &mut self.levels[pos.level];
        let at = level.partition_point(|p| p.pos.y <= pos.y);
        level.insert(at, point);
        id
    }

    pub fn find_point(&self, id: PointId) -> Option<&PheromonePoint> {
        self.levels.iter().flatten().find(|p| p.id == id)
    }

    /// Reward the space footprint of a genome that entered the population.
    /// Stale point ids (already evaporated) are skipped.
    pub fn reward_genome(&mut self, footprint: &SpaceFootprint, deposit_const: f64) {
        let tau_max = self.cfg.tau_max;
        for node in &footprint.nodes {
            for &(id, frac) in &node.members {
                if let Some(p) = self.levels.iter_mut().flatten().find(|p| p.id == id) {
                    p.pheromone = (p.pheromone + deposit_const * frac).min(tau_max);
                    p.pos.w = 0.5 * (p.pos.w + node.node_w);
                    let tp = &mut p.type_pheromones[node.node_type];
                    *tp = (*tp + deposit_const * frac).min(tau_max);
                }
            }
        }
        for &l in &footprint.used_levels {
            let v = &mut self.level_pheromones[l];
            *v = (*v + deposit_const).min(tau_max);
        }
        for &(l, i) in &footprint.used_inputs {
            let v = &mut self.input_pheromones[l][i];
            *v = (*v + deposit_const).min(tau_max);
        }
        for &o in &footprint.used_outputs {
            let v = &mut self.output_pheromones[o];
            *v = (*v + deposit_const).min(tau_max);
        }
    }

    /// One decay tick: every point loses `decay` pheromone and vanishes
    /// at or below `tau_min`. Level and input/output pheromones decay
    /// too but are floored at `tau_min + decay` so they stay selectable.
    pub fn decay_all(&mut self) {
        let SpaceConfig { tau_min, decay, .. } = self.cfg;
        let floor = tau_min + decay;
        for level in &mut self.levels {
            for p in level.iter_mut() {
                p.pheromone -= decay;
                for tp in &mut p.type_pheromones {
                    *tp = (*tp - decay).max(floor);
                }
            }
            // tolerance keeps the "at tau_min + decay, gone next tick"
            // boundary convention stable under fp rounding
            level.retain(|p| p.pheromone > tau_min + 1e-12);
        }
        for v in self
            .level_pheromones
            .iter_mut()
            .chain(self.input_pheromones.iter_mut().flatten())
            .chain(self.output_pheromones.iter_mut())
        {
            *v = (*v - decay).max(floor);
        }
    }

    /// One CSV row per point: level,x,y,w,pheromone.
    pub fn snapshot_csv(&self) -> String {
        let mut out = String::from("level,x,y,w,pheromone\n");
        for p in self.levels.iter().flatten() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                p.pos.level, p.pos.x, p.pos.y, p.pos.w, p.pheromone
            ));
        }
        out
    }

    pub fn points_on_level(&self, level: usize) -> &[PheromonePoint] {
        &self.levels[level]
    }
}

fn spread_x(idx: usize, count: usize) -> f64 {
    if count == 1 {
        0.5
    } else {
        idx as f64 / (count - 1) as f64
    }
}

/// Pheromone-weighted mean of (x, y, w) over points on one level; the
/// planar coordinates are clamped to the unit square.
pub fn center_of_mass(points: &[&PheromonePoint]) -> Result<Position> {
    if points.is_empty() {
        return Err(Error::Usage("center_of_mass of an empty point set".into()));
    }
    let level = points[0].pos.level;
    debug_assert!(points.iter().all(|p| p.pos.level == level));
    let total: f64 = points.iter().map(|p| p.pheromone).sum();
    let mut x = 0.0;
    let mut y = 0.0;
    let mut w = 0.0;
    for p in points {
        x += p.pheromone * p.pos.x;
        y += p.pheromone * p.pos.y;
        w += p.pheromone * p.pos.w;
    }
    Ok(Position {
        x: (x / total).clamp(0.0, 1.0),
        y: (y / total).clamp(0.0, 1.0),
        level,
        w: w / total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn space(inputs: usize) -> SearchSpace {
        SearchSpace::new(SpaceConfig {
            input_count: inputs,
            ..SpaceConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn level_pheromones_init() {
        let s = space(1);
        assert_eq!(s.level_pheromones(), &[2.0, 4.0, 6.0, 8.0, 10.0]);
        let one = SearchSpace::new(SpaceConfig {
            lag_levels: 1,
            ..SpaceConfig::default()
        })
        .unwrap();
        assert_eq!(one.level_pheromones(), &[2.0]);
        assert_eq!(one.select_start_level(&mut rng(0)), 0);
    }

    #[test]
    fn invalid_config_rejected() {
        let bad = SpaceConfig {
            decay: 1.5,
            ..SpaceConfig::default()
        };
        assert!(matches!(SearchSpace::new(bad), Err(Error::Config(_))));
        let bad = SpaceConfig {
            tau_min: 2.0,
            ..SpaceConfig::default()
        };
        assert!(SearchSpace::new(bad).is_err());
    }

    #[test]
    fn input_positions_uniformly_spaced() {
        let s = space(12);
        for i in 0..12 {
            let expect = i as f64 / 11.0;
            assert!((s.input_x(i) - expect).abs() < 1e-12);
        }
        assert_eq!(space(1).input_x(0), 0.5);
    }

    #[test]
    fn start_level_roulette_frequencies() {
        let s = space(1);
        let mut r = rng(42);
        let mut counts = [0usize; 5];
        let n = 100_000;
        for _ in 0..n {
            counts[s.select_start_level(&mut r)] += 1;
        }
        // chi-squared against p_l / sum, df=4, crit at 0.01 = 13.28
        let total_p: f64 = 30.0;
        let chi2: f64 = counts
            .iter()
            .enumerate()
            .map(|(l, &c)| {
                let e = n as f64 * (2.0 * (l as f64 + 1.0)) / total_p;
                (c as f64 - e).powi(2) / e
            })
            .sum();
        assert!(chi2 < 13.28, "chi2 = {chi2}");
        // P(l=4) = 1/3
        assert!((counts[4] as f64 / n as f64 - 1.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn equal_pheromones_split_evenly() {
        let mut r = rng(7);
        let mut c = [0usize; 2];
        for _ in 0..100_000 {
            c[roulette(&[5.0, 5.0], &mut r)] += 1;
        }
        assert!((c[0] as f64 / 100_000.0 - 0.5).abs() < 0.01);
    }

    #[test]
    fn climb_level_restricted_to_higher() {
        let s = SearchSpace::new(SpaceConfig {
            lag_levels: 3,
            ..SpaceConfig::default()
        })
        .unwrap();
        let mut r = rng(3);
        // at top: stays
        assert_eq!(s.select_climb_level(2, &mut r), 2);
        // single option
        for _ in 0..100 {
            assert_eq!(s.select_climb_level(1, &mut r), 2);
        }
        // p=[2,4,6], current=0 -> P(1)=0.4, P(2)=0.6
        let mut c = [0usize; 3];
        let n = 100_000;
        for _ in 0..n {
            c[s.select_climb_level(0, &mut r)] += 1;
        }
        assert!((c[1] as f64 / n as f64 - 0.4).abs() < 0.01);
        assert!((c[2] as f64 / n as f64 - 0.6).abs() < 0.01);
    }

    #[test]
    fn input_output_selection() {
        let s = space(12);
        let mut r = rng(5);
        // single output
        for _ in 0..50 {
            assert_eq!(s.select_output(&mut r), 0);
        }
        // uniform over 12 equal-pheromone inputs
        let n = 100_000;
        let mut c = [0usize; 12];
        for _ in 0..n {
            c[s.select_input(0, &mut r)] += 1;
        }
        for &ci in &c {
            assert!((ci as f64 / n as f64 - 1.0 / 12.0).abs() < 0.01);
        }
        // pheromones [1,1,2] -> P(2) = 0.5
        let mut c = [0usize; 3];
        for _ in 0..n {
            c[roulette(&[1.0, 1.0, 2.0], &mut r)] += 1;
        }
        assert!((c[2] as f64 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn query_radius_basics() {
        let mut s = space(1);
        let center = Position::new(0.5, 0.5, 0, 0.0);
        assert!(s.query_radius(&center, 0.2, false).is_empty());
        // boundary: distance exactly radius is included
        s.deposit_point(Position::new(0.7, 0.5, 0, 0.0), 1.0);
        assert_eq!(s.query_radius(&center, 0.2, false).len(), 1);
        // behind the agent, forward_only drops it
        s.deposit_point(Position::new(0.5, 0.4, 0, 0.0), 1.0);
        assert_eq!(s.query_radius(&center, 0.2, false).len(), 2);
        assert_eq!(s.query_radius(&center, 0.2, true).len(), 1);
    }

    #[test]
    fn query_radius_matches_linear_scan_oracle() {
        use rand::Rng;
        let mut r = rng(11);
        for _ in 0..1000 {
            let mut s = space(1);
            let n = r.gen_range(0..500);
            let mut all = Vec::new();
            for _ in 0..n {
                let pos = Position::new(r.gen(), r.gen(), r.gen_range(0..5), r.gen::<f64>() - 0.5);
                let id = s.deposit_point(pos, r.gen::<f64>() * 5.0 + 0.2);
                all.push((id, pos));
            }
            let center = Position::new(r.gen(), r.gen(), r.gen_range(0..5), 0.0);
            let radius = r.gen::<f64>() * 0.5 + 0.01;
            let forward = r.gen::<bool>();
            let mut got: Vec<PointId> =
                s.query_radius(&center, radius, forward).iter().map(|p| p.id).collect();
            let mut want: Vec<PointId> = all
                .iter()
                .filter(|(_, p)| p.level == center.level)
                .filter(|(_, p)| !forward || p.y >= center.y)
                .filter(|(_, p)| p.dist_xy(&center) <= radius)
                .map(|(id, _)| *id)
                .collect();
            got.sort_unstable();
            want.sort_unstable();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn center_of_mass_cases() {
        let p1 = PheromonePoint {
            id: 0,
            pos: Position::new(0.2, 0.4, 0, 1.0),
            pheromone: 3.0,
            type_pheromones: [1.0; NODE_TYPE_COUNT],
        };
        let single = center_of_mass(&[&p1]).unwrap();
        assert!((single.x - 0.2).abs() < 1e-12);
        assert!((single.y - 0.4).abs() < 1e-12);
        assert!((single.w - 1.0).abs() < 1e-12);

        let p2 = PheromonePoint {
            id: 1,
            pos: Position::new(0.4, 0.6, 0, 3.0),
            pheromone: 3.0,
            type_pheromones: [1.0; NODE_TYPE_COUNT],
        };
        let mid = center_of_mass(&[&p1, &p2]).unwrap();
        assert!((mid.x - 0.3).abs() < 1e-12);
        assert!((mid.y - 0.5).abs() < 1e-12);
        assert!((mid.w - 2.0).abs() < 1e-12);

        assert!(center_of_mass(&[]).is_err());
    }

    #[test]
    fn center_of_mass_matches_formula_oracle() {
        use rand::Rng;
        let mut r = rng(13);
        for _ in 0..100 {
            let pts: Vec<PheromonePoint> = (0..10)
                .map(|i| PheromonePoint {
                    id: i,
                    pos: Position::new(r.gen(), r.gen(), 2, r.gen::<f64>() * 4.0 - 2.0),
                    pheromone: r.gen::<f64>() * 9.0 + 0.5,
                    type_pheromones: [1.0; NODE_TYPE_COUNT],
                })
                .collect();
            let refs: Vec<&PheromonePoint> = pts.iter().collect();
            let com = center_of_mass(&refs).unwrap();
            let tau: f64 = pts.iter().map(|p| p.pheromone).sum();
            let ex: f64 = pts.iter().map(|p| p.pheromone * p.pos.x).sum::<f64>() / tau;
            let ey: f64 = pts.iter().map(|p| p.pheromone * p.pos.y).sum::<f64>() / tau;
            let ew: f64 = pts.iter().map(|p| p.pheromone * p.pos.w).sum::<f64>() / tau;
            assert!((com.x - ex).abs() < 1e-12);
            assert!((com.y - ey).abs() < 1e-12);
            assert!((com.w - ew).abs() < 1e-12);
            assert_eq!(com.level, 2);

            // permutation invariance
            let mut rev: Vec<&PheromonePoint> = pts.iter().collect();
            rev.reverse();
            let com2 = center_of_mass(&rev).unwrap();
            assert!((com.x - com2.x).abs() < 1e-12);

            // uniform pheromone scaling invariance
            let scaled: Vec<PheromonePoint> = pts
                .iter()
                .map(|p| PheromonePoint {
                    pheromone: p.pheromone * 7.5,
                    ..p.clone()
                })
                .collect();
            let srefs: Vec<&PheromonePoint> = scaled.iter().collect();
            let com3 = center_of_mass(&srefs).unwrap();
            assert!((com.x - com3.x).abs() < 1e-9);
            assert!((com.y - com3.y).abs() < 1e-9);
            assert!((com.w - com3.w).abs() < 1e-9);
        }
    }

    #[test]
    fn deposit_caps_and_counts() {
        let mut s = space(1);
        let id = s.deposit_point(Position::new(0.5, 0.5, 0, 0.0), 50.0);
        assert_eq!(s.find_point(id).unwrap().pheromone, 10.0);
        for i in 0..20 {
            s.deposit_point(Position::new(0.1, i as f64 / 20.0, 1, 0.0), 1.0);
        }
        assert_eq!(s.point_count(), 21);
        // deposited point readable via query
        let got = s.query_radius(&Position::new(0.5, 0.5, 0, 0.0), 0.05, false);
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].id, id);
    }

    #[test]
    fn reward_genome_cases() {
        let mut s = space(1);
        let id = s.deposit_point(Position::new(0.5, 0.5, 0, 0.4), 1.0);
        let capped = s.deposit_point(Position::new(0.2, 0.2, 0, 0.0), 10.0);
        let fp = SpaceFootprint {
            nodes: vec![
                NodeProvenance {
                    members: vec![(id, 1.0), (999, 0.5)], // 999 is stale, skipped
                    node_w: 0.8,
                    node_type: 0,
                },
                NodeProvenance {
                    members: vec![(capped, 1.0)],
                    node_w: 0.0,
                    node_type: 1,
                },
            ],
            used_levels: vec![0],
            used_inputs: vec![(0, 0)],
            used_outputs: vec![0],
        };
        s.reward_genome(&fp, 0.5);
        let p = s.find_point(id).unwrap();
        assert!((p.pheromone - 1.5).abs() < 1e-12); // full deposit at d=0
        assert!((p.pos.w - 0.6).abs() < 1e-12); // mean(0.4, 0.8)
        assert_eq!(s.find_point(capped).unwrap().pheromone, 10.0); // stays capped
        assert!((s.level_pheromones()[0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn proximity_kernel() {
        assert_eq!(proximity_fraction(0.0, 0.05), 1.0);
        assert!((proximity_fraction(0.025, 0.05) - 0.5).abs() < 1e-12);
        assert_eq!(proximity_fraction(0.1, 0.05), 0.0);
    }

    #[test]
    fn decay_removes_threshold_crossers() {
        let mut s = space(1);
        let cfg = s.config().clone();
        // point sitting exactly at tau_min + decay vanishes after one tick
        s.deposit_point(Position::new(0.5, 0.5, 0, 0.0), cfg.tau_min + cfg.decay);
        s.decay_all();
        assert_eq!(s.point_count(), 0);
    }

    #[test]
    fn decay_monotone_without_deposits() {
        let mut s = space(1);
        let mut r = rng(17);
        for _ in 0..100 {
            s.deposit_point(
                Position::new(r.gen(), r.gen(), r.gen_range(0..5), 0.0),
                r.gen::<f64>() * 9.0 + 0.5,
            );
        }
        let before = s.total_pheromone();
        s.decay_all();
        assert!(s.total_pheromone() < before);
    }

    #[test]
    fn full_evaporation_arithmetic() {
        let mut s = space(1);
        let mut r = rng(19);
        for _ in 0..1000 {
            s.deposit_point(Position::new(r.gen(), r.gen(), r.gen_range(0..5), 0.0), 1.0);
        }
        // ceil((tau_init - tau_min)/decay) = 18 ticks suffice; run 1000
        for _ in 0..1000 {
            s.decay_all();
        }
        assert_eq!(s.point_count(), 0);
        // level pheromones stay selectable
        assert!(s.level_pheromones().iter().all(|&p| p > s.config().tau_min));
    }

    #[test]
    fn snapshot_csv_has_one_row_per_point() {
        let mut s = space(1);
        s.deposit_point(Position::new(0.25, 0.5, 2, -1.5), 1.0);
        let csv = s.snapshot_csv();
        let lines: Vec<&str> = csv.trim().lines().collect();
        assert_eq!(lines[0], "level,x,y,w,pheromone");
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("2,0.25,0.5,-1.5,"));
    }
}
