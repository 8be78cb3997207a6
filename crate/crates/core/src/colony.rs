//! The manager's optimization loop: candidate generation from the cant
//! swarm, a fixed-size steady-state population, pheromone reward/decay
//! scheduling, and per-iteration bookkeeping.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{take_path, Cant};
use crate::clustering::{condense_paths, ClusterConfig};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::graph::{build_genome, RnnGenome};
use crate::rnn::{FitnessReport, RnnInstance, WORST_FITNESS};
use crate::search_space::{SearchSpace, SpaceConfig};

pub const POPULATION_CAPACITY: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Weights come straight from the search space; evaluation is a
    /// single forward pass.
    BpFree,
    /// Memetic baseline: each candidate gets a fixed budget of
    /// gradient-descent epochs before evaluation.
    Bp,
}

impl std::str::FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bp-free" | "bp_free" | "bpfree" => Ok(Mode::BpFree),
            "bp" => Ok(Mode::Bp),
            other => Err(Error::Config(format!("unknown mode '{other}'"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::BpFree => "bp-free",
            Mode::Bp => "bp",
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub iterations: usize,
    pub num_cants: usize,
    /// Probability that an evolving cant redraws its behavior instead
    /// of crossing over two archived ones.
    pub sigma_mutation: f64,
    /// Gradient-descent budget per candidate (bp mode only).
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
    pub space: SpaceConfig,
    pub cluster: ClusterConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::BpFree,
            iterations: 100,
            num_cants: 10,
            sigma_mutation: 0.2,
            epochs: 30,
            lr: 0.001,
            seed: 0,
            space: SpaceConfig::default(),
            cluster: ClusterConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::Config("iterations must be >= 1".into()));
        }
        if self.num_cants < 1 {
            return Err(Error::Config("num_cants must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.sigma_mutation) {
            return Err(Error::Config("sigma_mutation must lie in [0,1]".into()));
        }
        if self.lr <= 0.0 {
            return Err(Error::Config("lr must be positive".into()));
        }
        self.space.validate()?;
        if self.cluster.eps <= 0.0 {
            return Err(Error::Config("cluster eps must be positive".into()));
        }
        Ok(())
    }
}

/// Fixed-capacity steady-state archive, ascending by fitness.
#[derive(Debug, Clone, Default)]
pub struct Population {
    entries: Vec<(RnnGenome, f64)>,
}

impl Population {
    pub fn entries(&self) -> &[(RnnGenome, f64)] {
        &self.entries
    }

    pub fn best(&self) -> Option<&(RnnGenome, f64)> {
        self.entries.first()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Steady-state insert: always while below capacity, otherwise only
    /// by strictly beating the worst member (ties keep the incumbent).
    pub fn insert(&mut self, genome: RnnGenome, fitness: f64) -> bool {
        if self.entries.len() >= POPULATION_CAPACITY {
            let worst = self.entries.last().map(|e| e.1).unwrap();
            if fitness >= worst {
                return false;
            }
            self.entries.pop();
        }
        let at = self.entries.partition_point(|e| e.1 <= fitness);
        self.entries.insert(at, (genome, fitness));
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub candidate_hash: String,
    pub fitness: f64,
    pub gen_time: f64,
    pub eval_time: f64,
    pub train_time: f64,
    pub epochs_used: usize,
    pub inserted: bool,
    pub population_best: f64,
    pub space_points: usize,
}

/// One cant's post-evolution behavior, logged every iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorAuditRow {
    pub iteration: usize,
    pub cant_id: usize,
    pub explore_rate: f64,
    pub sense_radius: f64,
    pub r1: f64,
    pub r2: f64,
    /// "mutate" or "crossover".
    pub event: String,
}

pub fn behavior_audit_to_csv(rows: &[BehaviorAuditRow]) -> String {
    let mut out = String::from("iteration,cant_id,explore_rate,sense_radius,r1,r2,event\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.iteration, r.cant_id, r.explore_rate, r.sense_radius, r.r1, r.r2, r.event
        ));
    }
    out
}

pub fn records_to_csv(records: &[IterationRecord]) -> String {
    let mut out = String::from(
        "iteration,candidate_hash,fitness,gen_time,eval_time,train_time,epochs_used,inserted,population_best,space_points\n",
    );
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.iteration,
            r.candidate_hash,
            r.fitness,
            r.gen_time,
            r.eval_time,
            r.train_time,
            r.epochs_used,
            r.inserted,
            r.population_best,
            r.space_points
        ));
    }
    out
}

/// Single-actor owner of the search space, the cant swarm and the
/// population. Results may arrive in any order; each one triggers the
/// same reward/decay/evolution schedule.
#[derive(Clone)]
pub struct Colony {
    cfg: RunConfig,
    space: SearchSpace,
    cants: Vec<Cant>,
    population: Population,
    records: Vec<IterationRecord>,
    audit: Vec<BehaviorAuditRow>,
    rng: ChaCha8Rng,
}

impl Colony {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let space = SearchSpace::new(cfg.space.clone())?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let cants = (0..cfg.num_cants).map(|_| Cant::spawn(&mut rng)).collect();
        Ok(Colony {
            cfg,
            space,
            cants,
            population: Population::default(),
            records: Vec::new(),
            audit: Vec::new(),
            rng,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn space(&self) -> &SearchSpace {
        &self.space
    }

    pub fn population(&self) -> &Population {
        &self.population
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub fn behavior_audit(&self) -> &[BehaviorAuditRow] {
        &self.audit
    }

    /// One swarm pass: every cant takes a path, the paths condense into
    /// a genome. Returns the genome and the generation wall time.
    pub fn generate_candidate(&mut self) -> Result<(RnnGenome, f64)> {
        let start = Instant::now();
        let paths: Vec<_> = (0..self.cants.len())
            .map(|i| take_path(&self.cants[i], &mut self.space, &mut self.rng))
            .collect();
        let condensed = condense_paths(&paths, &self.cfg.cluster);
        let genome = build_genome(&paths, &condensed, &self.space, self.cfg.cluster.eps, &mut self.rng)?;
        Ok((genome, start.elapsed().as_secs_f64()))
    }

    /// Apply one evaluated result: population update, reward on
    /// insertion, then the unconditional decay tick and cant evolution.
    pub fn on_result(
        &mut self,
        genome: RnnGenome,
        report: &FitnessReport,
        gen_time: f64,
    ) -> &IterationRecord {
        let fitness = report.mse;
        let healthy = fitness.is_finite() && !report.numerical_failure;
        let hash = genome.hash();
        let footprint = genome.footprint.clone();
        let inserted = healthy && self.population.insert(genome, fitness);
        if inserted {
            self.space.reward_genome(&footprint, self.cfg.space.deposit_const);
        }
        self.space.decay_all();
        let iteration = self.records.len() + 1;
        for (cant_id, cant) in self.cants.iter_mut().enumerate() {
            let event = cant.evolve(fitness, self.cfg.sigma_mutation, &mut self.rng);
            let b = cant.behavior;
            self.audit.push(BehaviorAuditRow {
                iteration,
                cant_id,
                explore_rate: b.explore_rate,
                sense_radius: b.sense_radius,
                r1: b.r1,
                r2: b.r2,
                event: match event {
                    crate::agents::EvolveEvent::Mutate => "mutate".to_string(),
                    crate::agents::EvolveEvent::Crossover => "crossover".to_string(),
                },
            });
        }
        self.records.push(IterationRecord {
            iteration: self.records.len() + 1,
            candidate_hash: hash,
            fitness,
            gen_time,
            eval_time: report.eval_wall_time,
            train_time: report.train_wall_time,
            epochs_used: report.epochs_used,
            inserted,
            population_best: self.population.best().map_or(f64::INFINITY, |b| b.1),
            space_points: self.space.point_count(),
        });
        self.records.last().unwrap()
    }
}

/// Evaluate one candidate against a dataset in the given mode. Any
/// structural or numerical failure maps to the sentinel fitness; only
/// dataset-shape problems surface as errors.
pub fn evaluate_candidate(
    genome: &RnnGenome,
    ds: &Dataset,
    mode: Mode,
    epochs: usize,
    lr: f64,
) -> Result<FitnessReport> {
    let mut inst = match RnnInstance::instantiate(genome) {
        Ok(inst) => inst,
        Err(_) => {
            return Ok(FitnessReport {
                mse: WORST_FITNESS,
                eval_wall_time: 0.0,
                train_wall_time: 0.0,
                epochs_used: 0,
                numerical_failure: true,
            })
        }
    };
    match mode {
        Mode::BpFree => inst.evaluate_mse(ds),
        Mode::Bp => inst.bptt_train(ds, epochs, lr),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{normalize, synth_series, SplitSpec, SynthKind};

    fn dataset() -> Dataset {
        let series = synth_series(SynthKind::SineMix, 300, 0.0, 7).unwrap();
        let (norm, _, _) = normalize(&series).unwrap();
        Dataset::prepare(&norm, &SplitSpec { train_len: 200, test_len: 80, horizon: 1 }).unwrap()
    }

    fn cfg(seed: u64, mode: Mode, iterations: usize) -> RunConfig {
        RunConfig {
            mode,
            iterations,
            num_cants: 5,
            seed,
            space: SpaceConfig { input_count: 3, ..SpaceConfig::default() },
            epochs: 3,
            ..RunConfig::default()
        }
    }

    fn dummy_genome(seed: u64) -> RnnGenome {
        let mut colony = Colony::new(cfg(seed, Mode::BpFree, 1)).unwrap();
        colony.generate_candidate().unwrap().0
    }

    #[test]
    fn population_basic_rules() {
        let mut pop = Population::default();
        assert!(pop.insert(dummy_genome(1), 0.5));
        // fill up
        for i in 0..POPULATION_CAPACITY - 1 {
            assert!(pop.insert(dummy_genome(2 + i as u64), 0.1 * i as f64));
        }
        assert_eq!(pop.len(), POPULATION_CAPACITY);
        let worst = pop.entries().last().unwrap().1;
        // strictly worse than all -> rejected
        assert!(!pop.insert(dummy_genome(90), worst + 1.0));
        // tie with worst -> incumbent wins
        assert!(!pop.insert(dummy_genome(91), worst));
        // strictly better -> in, worst evicted
        assert!(pop.insert(dummy_genome(92), worst - 1e-9));
        assert_eq!(pop.len(), POPULATION_CAPACITY);
    }

    #[test]
    fn population_matches_k_smallest_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let g = dummy_genome(3);
        let mut pop = Population::default();
        let mut seen: Vec<f64> = Vec::new();
        for _ in 0..100 {
            let f: f64 = rng.gen();
            pop.insert(g.clone(), f);
            seen.push(f);
        }
        seen.sort_by(f64::total_cmp);
        let kept: Vec<f64> = pop.entries().iter().map(|e| e.1).collect();
        assert_eq!(kept, &seen[..POPULATION_CAPACITY]);
    }

    #[test]
    fn run_loop_invariants_and_monotonic_best() {
        let ds = dataset();
        let mut colony = Colony::new(cfg(5, Mode::BpFree, 40)).unwrap();
        let mut last_best = f64::INFINITY;
        for _ in 0..40 {
            let (genome, gen_time) = colony.generate_candidate().unwrap();
            let report = evaluate_candidate(&genome, &ds, Mode::BpFree, 0, 0.001).unwrap();
            let rec = colony.on_result(genome, &report, gen_time);
            assert!(rec.population_best <= last_best);
            last_best = rec.population_best;
        }
        assert_eq!(colony.records().len(), 40);
        for (i, r) in colony.records().iter().enumerate() {
            assert_eq!(r.iteration, i + 1);
            assert!(r.gen_time >= 0.0 && r.eval_time >= 0.0);
        }
        // population equals the k-best of all healthy candidates seen
        let mut fits: Vec<f64> = colony
            .records()
            .iter()
            .map(|r| r.fitness)
            .filter(|f| f.is_finite())
            .collect();
        fits.sort_by(f64::total_cmp);
        let kept: Vec<f64> = colony.population().entries().iter().map(|e| e.1).collect();
        let k = kept.len().min(POPULATION_CAPACITY);
        assert_eq!(kept, &fits[..k]);
    }

    #[test]
    fn rejected_candidate_only_decays() {
        let ds = dataset();
        let mut colony = Colony::new(cfg(9, Mode::BpFree, 40)).unwrap();
        // fill the population with healthy results first
        for _ in 0..15 {
            let (genome, gen_time) = colony.generate_candidate().unwrap();
            let report = evaluate_candidate(&genome, &ds, Mode::BpFree, 0, 0.001).unwrap();
            colony.on_result(genome, &report, gen_time);
        }
        // now force a rejection with a sentinel-grade fitness
        let (genome, gen_time) = colony.generate_candidate().unwrap();
        let before = colony.space().total_pheromone();
        let report = FitnessReport {
            mse: 1e5,
            eval_wall_time: 0.0,
            train_wall_time: 0.0,
            epochs_used: 0,
            numerical_failure: false,
        };
        let rec = colony.on_result(genome, &report, gen_time);
        assert!(!rec.inserted);
        assert!(colony.space().total_pheromone() < before);
    }

    #[test]
    fn inserted_candidate_rewards_its_points() {
        let ds = dataset();
        let mut colony = Colony::new(cfg(11, Mode::BpFree, 5)).unwrap();
        let (genome, gen_time) = colony.generate_candidate().unwrap();
        let member = genome.footprint.nodes.iter().flat_map(|n| n.members.iter()).next();
        let (id, _) = *member.expect("genome has at least one backed hidden node");
        let before = colony.space().find_point(id).unwrap().pheromone;
        let report = evaluate_candidate(&genome, &ds, Mode::BpFree, 0, 0.001).unwrap();
        let rec = colony.on_result(genome, &report, gen_time);
        assert!(rec.inserted);
        // deposit then one decay tick: net gain because the deposit
        // outweighs the 5% decay at these constants
        if let Some(p) = colony.space().find_point(id) {
            assert!(p.pheromone > before);
        } else {
            panic!("rewarded point vanished");
        }
    }

    #[test]
    fn fixed_seed_replays_identically() {
        let ds = dataset();
        let run = |seed: u64| -> Vec<IterationRecord> {
            let mut colony = Colony::new(cfg(seed, Mode::BpFree, 30)).unwrap();
            for _ in 0..30 {
                let (genome, _) = colony.generate_candidate().unwrap();
                let report = evaluate_candidate(&genome, &ds, Mode::BpFree, 0, 0.001).unwrap();
                // zero the wall times so records compare exactly
                colony.on_result(
                    genome,
                    &FitnessReport { eval_wall_time: 0.0, ..report },
                    0.0,
                );
            }
            colony.records().to_vec()
        };
        let a = run(21);
        let b = run(21);
        assert_eq!(a, b);
        let c = run(22);
        assert_ne!(a, c);
    }

    #[test]
    fn config_validation_rejects_nonsense() {
        let mut c = cfg(1, Mode::BpFree, 1);
        c.iterations = 0;
        assert!(c.validate().is_err());
        let mut c = cfg(1, Mode::BpFree, 1);
        c.num_cants = 0;
        assert!(c.validate().is_err());
        let mut c = cfg(1, Mode::Bp, 1);
        c.lr = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn bp_mode_spends_training_time() {
        let ds = dataset();
        let mut colony = Colony::new(cfg(31, Mode::Bp, 2)).unwrap();
        let (genome, gen_time) = colony.generate_candidate().unwrap();
        let report = evaluate_candidate(&genome, &ds, Mode::Bp, 3, 0.001).unwrap();
        assert!(report.train_wall_time > 0.0);
        assert_eq!(report.epochs_used, 3);
        let rec = colony.on_result(genome, &report, gen_time);
        assert!(rec.train_time > 0.0);
    }

    #[test]
    fn csv_log_has_header_and_rows() {
        let ds = dataset();
        let mut colony = Colony::new(cfg(41, Mode::BpFree, 3)).unwrap();
        for _ in 0..3 {
            let (genome, gen_time) = colony.generate_candidate().unwrap();
            let report = evaluate_candidate(&genome, &ds, Mode::BpFree, 0, 0.001).unwrap();
            colony.on_result(genome, &report, gen_time);
        }
        let csv = records_to_csv(colony.records());
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("iteration,candidate_hash,fitness"));
    }
}
