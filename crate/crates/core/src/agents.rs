//! Cant agents: behavior tuples, movement (explore / exploit stepping),
//! full path generation through the search space, and the genetic
//! evolution of the behaviors themselves.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::search_space::{center_of_mass, roulette, Position, PointId, SearchSpace};

pub const RATE_MIN: f64 = 0.01;
pub const RATE_MAX: f64 = 0.98;
pub const R_MIN: f64 = -1.0;
pub const R_MAX: f64 = 1.0;

/// Minimum perceived sensing range; keeps an agent from stalling.
pub const MIN_SENSE_RANGE: f64 = 0.1;

/// Minimum forward progress per same-level move. With the unit square
/// this bounds a cant to at most 10 points per level.
pub const MIN_FORWARD_STEP: f64 = 0.1;

/// Behavior archive capacity per cant.
pub const ARCHIVE_CAPACITY: usize = 10;

/// The evolvable 4-tuple governing one agent's movement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CantBehavior {
    pub explore_rate: f64,
    pub sense_radius: f64,
    pub r1: f64,
    pub r2: f64,
}

impl CantBehavior {
    pub fn spawn<R: Rng>(rng: &mut R) -> Self {
        Self {
            explore_rate: rng.gen_range(RATE_MIN..=RATE_MAX),
            sense_radius: rng.gen_range(RATE_MIN..=RATE_MAX),
            r1: rng.gen_range(R_MIN..=R_MAX),
            r2: rng.gen_range(R_MIN..=R_MAX),
        }
    }

    pub fn in_bounds(&self) -> bool {
        (RATE_MIN..=RATE_MAX).contains(&self.explore_rate)
            && (RATE_MIN..=RATE_MAX).contains(&self.sense_radius)
            && (R_MIN..=R_MAX).contains(&self.r1)
            && (R_MIN..=R_MAX).contains(&self.r2)
    }

    fn clamp(self) -> Self {
        Self {
            explore_rate: self.explore_rate.clamp(RATE_MIN, RATE_MAX),
            sense_radius: self.sense_radius.clamp(RATE_MIN, RATE_MAX),
            r1: self.r1.clamp(R_MIN, R_MAX),
            r2: self.r2.clamp(R_MIN, R_MAX),
        }
    }
}

/// How far the agent senses at height y:
/// max(sense_radius - (y^2 * r1 + y * r2), 0.1).
pub fn perceived_sense_range(b: &CantBehavior, y: f64) -> f64 {
    (b.sense_radius - (y * y * b.r1 + y * b.r2)).max(MIN_SENSE_RANGE)
}

/// Full redraw of all four fields from their spawn distributions.
pub fn mutate<R: Rng>(rng: &mut R) -> CantBehavior {
    CantBehavior::spawn(rng)
}

/// Arithmetic line crossover: b1 + u * (b2 - b1) with one shared
/// u ~ U(0,1), clamped back into field bounds.
pub fn crossover<R: Rng>(b1: &CantBehavior, b2: &CantBehavior, rng: &mut R) -> CantBehavior {
    let u: f64 = rng.gen();
    CantBehavior {
        explore_rate: b1.explore_rate + u * (b2.explore_rate - b1.explore_rate),
        sense_radius: b1.sense_radius + u * (b2.sense_radius - b1.sense_radius),
        r1: b1.r1 + u * (b2.r1 - b1.r1),
        r2: b1.r2 + u * (b2.r2 - b1.r2),
    }
    .clamp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvolveEvent {
    Mutate,
    Crossover,
}

#[derive(Debug, Clone)]
pub struct Cant {
    pub behavior: CantBehavior,
    /// (behavior, fitness) pairs, best (lowest MSE) first.
    archive: Vec<(CantBehavior, f64)>,
}

impl Cant {
    pub fn spawn<R: Rng>(rng: &mut R) -> Self {
        Self {
            behavior: CantBehavior::spawn(rng),
            archive: Vec::new(),
        }
    }

    pub fn archive(&self) -> &[(CantBehavior, f64)] {
        &self.archive
    }

    /// Archive the latest behavior when it improves on the worst entry
    /// (or the archive is not yet full), then pick the next behavior by
    /// mutation or by crossover of the two archive leaders.
    pub fn evolve<R: Rng>(&mut self, fitness: f64, sigma_mutation: f64, rng: &mut R) -> EvolveEvent {
        debug_assert!(fitness.is_finite());
        let worst = self.archive.last().map(|(_, f)| *f);
        if self.archive.len() < ARCHIVE_CAPACITY || worst.is_some_and(|w| fitness < w) {
            let at = self.archive.partition_point(|(_, f)| *f <= fitness);
            self.archive.insert(at, (self.behavior, fitness));
            self.archive.truncate(ARCHIVE_CAPACITY);
        }
        if self.archive.len() < ARCHIVE_CAPACITY || rng.gen::<f64>() < sigma_mutation {
            self.behavior = mutate(rng);
            EvolveEvent::Mutate
        } else {
            self.behavior = crossover(&self.archive[0].0, &self.archive[1].0, rng);
            EvolveEvent::Crossover
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PointOrigin {
    Exploration,
    Exploitation,
    InputAnchor,
    OutputAnchor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPoint {
    pub pos: Position,
    pub origin: PointOrigin,
    /// Backing space point for exploration deposits; exploitation
    /// points ride on mass that already exists.
    pub point_id: Option<PointId>,
}

/// One cant's traversal from an input anchor to an output anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    /// (level, input index) the path started from.
    pub input: (usize, usize),
    pub output: usize,
    pub points: Vec<PathPoint>,
}

impl Path {
    pub fn interior(&self) -> impl Iterator<Item = &PathPoint> {
        self.points.iter().filter(|p| {
            matches!(p.origin, PointOrigin::Exploration | PointOrigin::Exploitation)
        })
    }
}

/// One exploration move. The angle bisector is drawn from U(0,1) on
/// same-level moves (forward half-plane) and U(-1,1) when climbing;
/// theta = bisect * pi. A fresh weight coordinate is drawn ~ U(-1,1).
pub fn explore_step<R: Rng>(
    b: &CantBehavior,
    pos: &Position,
    climbing: bool,
    rng: &mut R,
) -> Position {
    let range = perceived_sense_range(b, pos.y);
    let bisect: f64 = if climbing {
        rng.gen_range(-1.0..1.0)
    } else {
        rng.gen()
    };
    let theta = bisect * std::f64::consts::PI;
    Position {
        x: (pos.x + range * theta.cos()).clamp(0.0, 1.0),
        y: (pos.y + range * theta.sin()).clamp(0.0, 1.0),
        level: pos.level,
        w: rng.gen_range(-1.0..1.0),
    }
}

/// Generate one full path for `cant` through `space`, depositing a
/// pheromone point for every exploration move.
pub fn take_path<R: Rng>(cant: &Cant, space: &mut SearchSpace, rng: &mut R) -> Path {
    let lag_levels = space.config().lag_levels;
    let tau_init = space.config().tau_init;
    let step_budget = 10 * lag_levels;
    let b = cant.behavior;

    let start_level = space.select_start_level(rng);
    let input_idx = space.select_input(start_level, rng);
    let mut cur = Position::new(space.input_x(input_idx), 0.0, start_level, 0.0);
    let mut points = vec![PathPoint {
        pos: cur,
        origin: PointOrigin::InputAnchor,
        point_id: None,
    }];

    let mut steps = 0;
    while cur.y < 0.99 && steps < step_budget {
        steps += 1;
        // Climb decision reuses the level pheromones: roulette over
        // {stay, climb} weighted by {p[current], sum of higher levels}.
        let climbing = if cur.level + 1 < lag_levels {
            let lp = space.level_pheromones();
            let stay = lp[cur.level];
            let up: f64 = lp[cur.level + 1..].iter().sum();
            roulette(&[stay, up], rng) == 1
        } else {
            false
        };
        let target_level = if climbing {
            space.select_climb_level(cur.level, rng)
        } else {
            cur.level
        };
        let probe = Position { level: target_level, ..cur };
        let range = perceived_sense_range(&b, cur.y);
        let u: f64 = rng.gen();
        let sensed = space.query_radius(&probe, range, !climbing);
        let (mut next, origin) = if u >= b.explore_rate && !sensed.is_empty() {
            (center_of_mass(&sensed).expect("sensed is nonempty"), PointOrigin::Exploitation)
        } else {
            drop(sensed);
            (explore_step(&b, &probe, climbing, rng), PointOrigin::Exploration)
        };
        next.level = target_level;
        // Forward-progress floor. Same-level moves must advance y by at
        // least MIN_FORWARD_STEP; a climb arrival may fall back in x and
        // y but still lands at y >= MIN_FORWARD_STEP so a level never
        // accumulates more than 10 path points.
        let y_floor = if climbing {
            MIN_FORWARD_STEP
        } else {
            cur.y + MIN_FORWARD_STEP
        };
        next.y = next.y.max(y_floor).min(1.0);
        let point_id = match origin {
            PointOrigin::Exploration => Some(space.deposit_point(next, tau_init)),
            _ => None,
        };
        points.push(PathPoint { pos: next, origin, point_id });
        cur = next;
    }

    // Budget exhaustion force-completes the path at the output anchor.
    let output_idx = space.select_output(rng);
    points.push(PathPoint {
        pos: Position::new(space.output_x(output_idx), 1.0, 0, 0.0),
        origin: PointOrigin::OutputAnchor,
        point_id: None,
    });

    Path {
        input: (start_level, input_idx),
        output: output_idx,
        points,
    }
}
