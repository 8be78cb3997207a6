//! Operator entry point: run optimizations, benchmark the two modes
//! head-to-head, export plot-ready metrics, and host workers for the
//! TCP transport.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use colony_nas::clustering::ClusterConfig;
use colony_nas::colony::{
    behavior_audit_to_csv, records_to_csv, Colony, IterationRecord, Mode, RunConfig,
};
use colony_nas::data::{load_csv, normalize, synth_series, Dataset, SplitSpec, SynthKind};
use colony_nas::distributed::{
    in_process, manager_loop, worker_loop, Manager, TcpManager, TcpWorker,
};
use colony_nas::search_space::SpaceConfig;

#[derive(Parser)]
#[command(name = "colony-nas", version, about = "Ant-colony architecture search for recurrent networks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute one optimization run and write its artifacts.
    Run(CommonArgs),
    /// Sweep both modes over an agent grid and tabulate fitness/time.
    Bench(BenchArgs),
    /// Convert a finished run directory into plot-ready CSVs.
    Export(ExportArgs),
    /// Headless invariant suite; nonzero exit on any failure.
    Selftest,
    /// Evaluation worker that connects to a TCP manager.
    Worker(WorkerArgs),
}

/// Flags shared by run/bench; every one mirrors a config-file key of
/// the same name (kebab-case), and flags win on conflict.
#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    agents: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
    /// in-process | tcp
    #[arg(long)]
    transport: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    sigma_mutation: Option<f64>,
    #[arg(long)]
    lag_levels: Option<usize>,
    #[arg(long)]
    cluster_eps: Option<f64>,
    /// CSV dataset; mutually exclusive with --synth.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Comma-separated input column names (CSV mode).
    #[arg(long)]
    input_cols: Option<String>,
    #[arg(long)]
    target_col: Option<String>,
    /// Synthetic series kind: sine-mix | ramp.
    #[arg(long)]
    synth: Option<String>,
    #[arg(long)]
    synth_length: Option<usize>,
    #[arg(long)]
    noise_sd: Option<f64>,
    #[arg(long)]
    data_seed: Option<u64>,
    #[arg(long)]
    train_len: Option<usize>,
    #[arg(long)]
    test_len: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Listen address for --transport tcp.
    #[arg(long)]
    bind: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated agent counts to sweep.
    #[arg(long, default_value = "5,15,35")]
    agents_list: String,
    /// Seed repeats per cell.
    #[arg(long, default_value_t = 1)]
    bench_seeds: u64,
}

#[derive(Args)]
struct ExportArgs {
    /// A finished run directory (contains run_log.csv).
    #[arg(long)]
    run: PathBuf,
    /// Output directory; defaults to the run directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WorkerArgs {
    /// Manager address, e.g. 127.0.0.1:7654.
    #[arg(long)]
    connect: String,
    #[arg(long, default_value_t = 0)]
    worker_id: u64,
    #[command(flatten)]
    common: CommonArgs,
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Run(args) => cmd_run(&args),
        Cmd::Bench(args) => cmd_bench(&args),
        Cmd::Export(args) => cmd_export(&args),
        Cmd::Selftest => cmd_selftest(),
        Cmd::Worker(args) => cmd_worker(&args),
    }
}

fn verbose() -> bool {
    matches!(
        std::env::var("COLONY_NAS_LOG").as_deref(),
        Ok("info") | Ok("debug")
    )
}

// ---------- settings resolution ----------

struct Settings {
    run: RunConfig,
    workers: usize,
    tcp: bool,
    bind: String,
    out: PathBuf,
    data: Option<PathBuf>,
    input_cols: Vec<String>,
    target_col: String,
    synth: SynthKind,
    synth_length: usize,
    noise_sd: f64,
    data_seed: u64,
    split: SplitSpec,
    /// Every key=value after defaults, file and flags were merged.
    resolved: BTreeMap<String, String>,
}

fn default_map() -> BTreeMap<String, String> {
    let pairs = [
        ("mode", "bp-free"),
        ("agents", "10"),
        ("iterations", "100"),
        ("workers", "1"),
        ("transport", "in-process"),
        ("seed", "0"),
        ("epochs", "30"),
        ("lr", "0.001"),
        ("sigma-mutation", "0.2"),
        ("lag-levels", "5"),
        ("cluster-eps", "0.05"),
        ("data", ""),
        ("input-cols", ""),
        ("target-col", "target"),
        ("synth", "sine-mix"),
        ("synth-length", "400"),
        ("noise-sd", "0"),
        ("data-seed", "0"),
        ("train-len", "250"),
        ("test-len", "100"),
        ("horizon", "1"),
        ("bind", "127.0.0.1:0"),
        ("out", "out"),
    ];
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

fn parse_config_file(path: &Path, map: &mut BTreeMap<String, String>) -> Result<()> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected key=value, got '{line}'", path.display(), lineno + 1);
        };
        let key = key.trim().to_string();
        if !map.contains_key(&key) {
            bail!("{}:{}: unknown config key '{key}'", path.display(), lineno + 1);
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(())
}

fn resolve(args: &CommonArgs) -> Result<Settings> {
    let mut map = default_map();
    if let Some(path) = &args.config {
        parse_config_file(path, &mut map)?;
    }
    let mut set = |key: &str, value: Option<String>| {
        if let Some(v) = value {
            map.insert(key.to_string(), v);
        }
    };
    set("mode", args.mode.clone());
    set("agents", args.agents.map(|v| v.to_string()));
    set("iterations", args.iterations.map(|v| v.to_string()));
    set("workers", args.workers.map(|v| v.to_string()));
    set("transport", args.transport.clone());
    set("seed", args.seed.map(|v| v.to_string()));
    set("epochs", args.epochs.map(|v| v.to_string()));
    set("lr", args.lr.map(|v| v.to_string()));
    set("sigma-mutation", args.sigma_mutation.map(|v| v.to_string()));
    set("lag-levels", args.lag_levels.map(|v| v.to_string()));
    set("cluster-eps", args.cluster_eps.map(|v| v.to_string()));
    set("data", args.data.as_ref().map(|v| v.display().to_string()));
    set("input-cols", args.input_cols.clone());
    set("target-col", args.target_col.clone());
    set("synth", args.synth.clone());
    set("synth-length", args.synth_length.map(|v| v.to_string()));
    set("noise-sd", args.noise_sd.map(|v| v.to_string()));
    set("data-seed", args.data_seed.map(|v| v.to_string()));
    set("train-len", args.train_len.map(|v| v.to_string()));
    set("test-len", args.test_len.map(|v| v.to_string()));
    set("horizon", args.horizon.map(|v| v.to_string()));
    set("bind", args.bind.clone());
    set("out", args.out.as_ref().map(|v| v.display().to_string()));

    fn get<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        map[key]
            .parse()
            .map_err(|e| anyhow::anyhow!("bad value '{}' for {key}: {e}", map[key]))
    }

    let mode: Mode = get(&map, "mode")?;
    let transport = map["transport"].clone();
    let tcp = match transport.as_str() {
        "tcp" => true,
        "in-process" | "in_process" => false,
        other => bail!("unknown transport '{other}'"),
    };
    let synth = match map["synth"].as_str() {
        "sine-mix" | "sine_mix" => SynthKind::SineMix,
        "ramp" => SynthKind::Ramp,
        other => bail!("unknown synthetic kind '{other}'"),
    };
    let run = RunConfig {
        mode,
        iterations: get(&map, "iterations")?,
        num_cants: get(&map, "agents")?,
        sigma_mutation: get(&map, "sigma-mutation")?,
        epochs: get(&map, "epochs")?,
        lr: get(&map, "lr")?,
        seed: get(&map, "seed")?,
        space: SpaceConfig {
            lag_levels: get(&map, "lag-levels")?,
            // input_count is set from the dataset after loading
            ..SpaceConfig::default()
        },
        cluster: ClusterConfig { eps: get(&map, "cluster-eps")?, ..ClusterConfig::default() },
    };
    let data = if map["data"].is_empty() { None } else { Some(PathBuf::from(&map["data"])) };
    let input_cols: Vec<String> = if map["input-cols"].is_empty() {
        Vec::new()
    } else {
        map["input-cols"].split(',').map(|s| s.trim().to_string()).collect()
    };
    Ok(Settings {
        run,
        workers: get(&map, "workers")?,
        tcp,
        bind: map["bind"].clone(),
        out: PathBuf::from(&map["out"]),
        data,
        input_cols,
        target_col: map["target-col"].clone(),
        synth,
        synth_length: get(&map, "synth-length")?,
        noise_sd: get(&map, "noise-sd")?,
        data_seed: get(&map, "data-seed")?,
        split: SplitSpec {
            train_len: get(&map, "train-len")?,
            test_len: get(&map, "test-len")?,
            horizon: get(&map, "horizon")?,
        },
        resolved: map,
    })
}

fn load_dataset(s: &Settings) -> Result<Dataset> {
    let series = match &s.data {
        Some(path) => {
            if s.input_cols.is_empty() {
                bail!("--data requires --input-cols");
            }
            load_csv(path, &s.input_cols, &s.target_col)?
        }
        None => synth_series(s.synth, s.synth_length, s.noise_sd, s.data_seed)?,
    };
    let (norm, _, warnings) = normalize(&series)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Ok(Dataset::prepare(&norm, &s.split)?)
}

// ---------- artifacts ----------

fn write_resolved_config(out: &Path, resolved: &BTreeMap<String, String>) -> Result<()> {
    let mut text = String::new();
    for (k, v) in resolved {
        text.push_str(&format!("{k}={v}\n"));
    }
    fs::write(out.join("resolved_config.txt"), text)?;
    Ok(())
}

/// Deterministic per-iteration log; wall-clock columns live in
/// run_times.csv so reruns with the same seed are bit-identical.
fn deterministic_log(records: &[IterationRecord]) -> String {
    let mut out = String::from(
        "iteration,candidate_hash,fitness,epochs_used,inserted,population_best,space_points\n",
    );
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.iteration, r.candidate_hash, r.fitness, r.epochs_used, r.inserted,
            r.population_best, r.space_points
        ));
    }
    out
}

fn timing_log(records: &[IterationRecord]) -> String {
    let mut out = String::from("iteration,gen_time,eval_time,train_time\n");
    for r in records {
        out.push_str(&format!("{},{},{},{}\n", r.iteration, r.gen_time, r.eval_time, r.train_time));
    }
    out
}

fn write_best(out: &Path, colony: &Colony) -> Result<()> {
    if let Some((genome, _)) = colony.population().best() {
        fs::write(out.join("best_genome.json"), genome.serialize())?;
        fs::write(out.join("best_genome.dot"), genome.to_dot())?;
    }
    Ok(())
}

fn write_run_artifacts(out: &Path, colony: &Colony) -> Result<()> {
    let records = colony.records();
    fs::write(out.join("run_log.csv"), deterministic_log(records))?;
    fs::write(out.join("run_times.csv"), timing_log(records))?;
    // full record dump for debugging; not part of the stable interface
    fs::write(out.join("run_log_full.csv"), records_to_csv(records))?;
    fs::write(out.join("behavior_log.csv"), behavior_audit_to_csv(colony.behavior_audit()))?;
    write_best(out, colony)?;
    let best_mse = colony.population().best().map(|b| b.1);
    let summary = serde_json::json!({
        "best_mse": best_mse,
        "total_gen_time": records.iter().map(|r| r.gen_time).sum::<f64>(),
        "total_eval_time": records.iter().map(|r| r.eval_time + r.train_time).sum::<f64>(),
        "iterations": records.len(),
    });
    fs::write(out.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    Ok(())
}

// ---------- run ----------

/// Drive one full optimization in-process and return the colony.
fn execute_in_process(run: RunConfig, ds: &Dataset, workers: usize, on_progress: Option<&mut dyn FnMut(&Colony)>) -> Result<Colony> {
    let colony = Colony::new(run)?;
    let mut manager = Manager::new(colony);
    let (mut mt, wt) = in_process(Duration::from_secs(600));
    let handles: Vec<_> = (0..workers.max(1))
        .map(|i| {
            let mut wt = wt.clone();
            let ds = ds.clone();
            std::thread::spawn(move || worker_loop(&mut wt, i as u64, &ds))
        })
        .collect();
    drop(wt);
    manager_loop(&mut manager, &mut mt, Duration::from_secs(600), on_progress)?;
    for h in handles {
        h.join().expect("worker thread panicked")?;
    }
    Ok(manager.into_colony())
}

fn cmd_run(args: &CommonArgs) -> Result<()> {
    let s = resolve(args)?;
    s.run.validate()?;
    fs::create_dir_all(&s.out)?;
    write_resolved_config(&s.out, &s.resolved)?;
    let ds = load_dataset(&s)?;
    let mut run = s.run.clone();
    run.space.input_count = ds.input_count();

    let mut best_seen = f64::INFINITY;
    let out_dir = s.out.clone();
    let mut on_progress = move |colony: &Colony| {
        let best = colony.population().best().map_or(f64::INFINITY, |b| b.1);
        if best < best_seen {
            best_seen = best;
            let _ = write_best(&out_dir, colony);
        }
        if verbose() {
            let r = colony.records().last().unwrap();
            eprintln!(
                "iter {} fitness {:.6} best {:.6} points {}",
                r.iteration, r.fitness, r.population_best, r.space_points
            );
        }
    };

    let colony = if s.tcp {
        let colony = Colony::new(run)?;
        let mut manager = Manager::new(colony);
        let mut mt = TcpManager::bind(s.bind.as_str())?;
        eprintln!("manager listening on {}", mt.local_addr());
        manager_loop(&mut manager, &mut mt, Duration::from_secs(600), Some(&mut on_progress))?;
        manager.into_colony()
    } else {
        execute_in_process(run, &ds, s.workers, Some(&mut on_progress))?
    };

    write_run_artifacts(&s.out, &colony)?;
    let best = colony.population().best().map_or(f64::INFINITY, |b| b.1);
    println!("best_mse={best} iterations={}", colony.records().len());
    Ok(())
}

// ---------- bench ----------

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let s = resolve(&args.common)?;
    fs::create_dir_all(&s.out)?;
    write_resolved_config(&s.out, &s.resolved)?;
    let ds = load_dataset(&s)?;
    let agents: Vec<usize> = args
        .agents_list
        .split(',')
        .map(|a| a.trim().parse().context("bad agent count"))
        .collect::<Result<_>>()?;
    if agents.is_empty() {
        bail!("empty agent list");
    }

    // cell -> (best mses, total times)
    let mut cells: BTreeMap<(usize, String), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for &a in &agents {
        for mode in [Mode::BpFree, Mode::Bp] {
            for seed in 0..args.bench_seeds.max(1) {
                let mut run = s.run.clone();
                run.mode = mode;
                run.num_cants = a;
                run.seed = s.run.seed.wrapping_add(seed);
                run.space.input_count = ds.input_count();
                let start = std::time::Instant::now();
                let colony = execute_in_process(run, &ds, 1, None)?;
                let total = start.elapsed().as_secs_f64();
                let best = colony.population().best().map_or(f64::NAN, |b| b.1);
                let cell = cells.entry((a, mode.to_string())).or_default();
                cell.0.push(best);
                cell.1.push(total);
                if verbose() {
                    eprintln!("bench agents={a} mode={mode} seed={seed}: best {best:.6} in {total:.2}s");
                }
            }
        }
    }

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mut fit = String::from("agents,mode,runs,avg_best_mse,min_best_mse,max_best_mse\n");
    let mut time = String::from("agents,mode,avg_total_time_s,reduction_pct\n");
    for &a in &agents {
        for mode in ["bp-free", "bp"] {
            let (mses, times) = &cells[&(a, mode.to_string())];
            let lo = mses.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = mses.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            fit.push_str(&format!("{a},{mode},{},{},{lo},{hi}\n", mses.len(), mean(mses)));
            // time saved by skipping backpropagation, relative to the
            // bp run with the same agent count
            let reduction = if mode == "bp-free" {
                let t_bp = mean(&cells[&(a, "bp".to_string())].1);
                format!("{}", 100.0 * (1.0 - mean(times) / t_bp))
            } else {
                String::new()
            };
            time.push_str(&format!("{a},{mode},{},{reduction}\n", mean(times)));
        }
    }
    fs::write(s.out.join("bench_fitness.csv"), fit)?;
    fs::write(s.out.join("bench_time.csv"), time)?;
    println!("bench tables written to {}", s.out.display());
    Ok(())
}

// ---------- export ----------

fn read_csv_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("missing run artifact {}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .context("empty CSV")?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    Ok((header, rows))
}

fn cmd_export(args: &ExportArgs) -> Result<()> {
    let out = args.out.clone().unwrap_or_else(|| args.run.clone());
    fs::create_dir_all(&out)?;

    let (theader, times) = read_csv_rows(&args.run.join("run_times.csv"))?;
    anyhow::ensure!(theader == ["iteration", "gen_time", "eval_time", "train_time"], "unexpected run_times.csv schema");
    let mut cum = String::from("iteration,cum_gen_time,cum_eval_time\n");
    let (mut g, mut e) = (0.0f64, 0.0f64);
    for row in &times {
        g += row[1].parse::<f64>()?;
        // evaluation cost includes any training the mode performed
        e += row[2].parse::<f64>()? + row[3].parse::<f64>()?;
        cum.push_str(&format!("{},{g},{e}\n", row[0]));
    }
    fs::write(out.join("cumulative_time.csv"), cum)?;

    let (lheader, log) = read_csv_rows(&args.run.join("run_log.csv"))?;
    let fi = lheader.iter().position(|h| h == "fitness").context("no fitness column")?;
    let bi = lheader.iter().position(|h| h == "population_best").context("no population_best column")?;
    let mut fit = String::from("iteration,fitness,population_best\n");
    for row in &log {
        fit.push_str(&format!("{},{},{}\n", row[0], row[fi], row[bi]));
    }
    fs::write(out.join("fitness_curve.csv"), fit)?;
    println!("export written to {}", out.display());
    Ok(())
}

// ---------- selftest ----------

fn cmd_selftest() -> Result<()> {
    use colony_nas::agents::{take_path, Cant};
    use colony_nas::distributed::{decode, encode, Message};
    use colony_nas::graph::RnnGenome;
    use colony_nas::rnn::RnnInstance;
    use colony_nas::search_space::SearchSpace;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    let mut failures = 0usize;
    let mut check = |name: &str, ok: bool| {
        println!("{} {name}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };

    // path structure invariants
    {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut space = SearchSpace::new(SpaceConfig { input_count: 3, ..SpaceConfig::default() }).unwrap();
        let l = space.config().lag_levels;
        let mut ok = true;
        for _ in 0..500 {
            let cant = Cant::spawn(&mut rng);
            let path = take_path(&cant, &mut space, &mut rng);
            let mut per_level = vec![0usize; l];
            let mut prev: Option<(usize, f64)> = None;
            for p in path.interior() {
                per_level[p.pos.level] += 1;
                if let Some((lv, y)) = prev {
                    ok &= p.pos.level >= lv;
                    if p.pos.level == lv {
                        ok &= p.pos.y > y;
                    }
                }
                prev = Some((p.pos.level, p.pos.y));
            }
            ok &= per_level.iter().all(|&c| c <= 10);
            ok &= path.points.len() <= 10 * l + 2;
        }
        check("path-structure", ok);
    }

    // wire round trip
    {
        let mut ok = true;
        for i in 0..1000u64 {
            let msg = Message::WorkRequest { worker_id: i, prev_result: None };
            ok &= decode(&encode(&msg)).map(|m| m == msg).unwrap_or(false);
        }
        ok &= matches!(decode(&[]), Err(colony_nas::Error::Framing(_)));
        check("wire-round-trip", ok);
    }

    // genome pipeline: build, serialize, gradient-check
    {
        let series = synth_series(SynthKind::SineMix, 120, 0.0, 3).unwrap();
        let (norm, _, _) = normalize(&series).unwrap();
        let ds = Dataset::prepare(&norm, &SplitSpec { train_len: 60, test_len: 40, horizon: 1 }).unwrap();
        let mut ok = true;
        let mut checked = 0;
        for seed in 0..20u64 {
            let mut colony = Colony::new(RunConfig {
                num_cants: 3,
                seed,
                space: SpaceConfig { input_count: 3, ..SpaceConfig::default() },
                ..RunConfig::default()
            })
            .unwrap();
            let (genome, _) = colony.generate_candidate().unwrap();
            ok &= RnnGenome::deserialize(&genome.serialize()).map(|g| g == genome).unwrap_or(false);
            let inst = RnnInstance::instantiate(&genome).unwrap();
            if inst.param_count() <= 120 {
                ok &= inst.gradient_check(&ds, 1e-5).map(|w| w < 1e-4).unwrap_or(false);
                checked += 1;
            }
        }
        ok &= checked >= 5;
        check("genome-pipeline", ok);
    }

    // roulette frequencies for p = 2(l+1)
    {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let weights = [2.0, 4.0, 6.0, 8.0, 10.0];
        let n = 100_000;
        let mut counts = [0usize; 5];
        for _ in 0..n {
            counts[colony_nas::search_space::roulette(&weights, &mut rng)] += 1;
        }
        let total: f64 = weights.iter().sum();
        let chi2: f64 = counts
            .iter()
            .zip(weights.iter())
            .map(|(&c, &w)| {
                let expect = n as f64 * w / total;
                (c as f64 - expect).powi(2) / expect
            })
            .sum();
        // chi-square critical value, 4 degrees of freedom, p = 0.01
        check("roulette-frequencies", chi2 < 13.28);
    }

    // pheromone bounds after a randomized workload
    {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut space = SearchSpace::new(SpaceConfig { input_count: 2, ..SpaceConfig::default() }).unwrap();
        let cfg = space.config().clone();
        for _ in 0..2000 {
            match rng.gen_range(0..3) {
                0 => {
                    let pos = colony_nas::Position::new(
                        rng.gen(),
                        rng.gen(),
                        rng.gen_range(0..cfg.lag_levels),
                        rng.gen_range(-1.0..1.0),
                    );
                    space.deposit_point(pos, cfg.tau_init);
                }
                1 => space.decay_all(),
                _ => {
                    let mut cant = Cant::spawn(&mut rng);
                    cant.evolve(rng.gen(), 0.25, &mut rng);
                    let _ = take_path(&cant, &mut space, &mut rng);
                }
            }
        }
        let ok = (0..cfg.lag_levels).all(|l| {
            space
                .points_on_level(l)
                .iter()
                .all(|p| p.pheromone > cfg.tau_min && p.pheromone <= cfg.tau_max)
        });
        check("pheromone-bounds", ok);
    }

    if failures > 0 {
        bail!("{failures} selftest check(s) failed");
    }
    Ok(())
}

// ---------- worker ----------

fn cmd_worker(args: &WorkerArgs) -> Result<()> {
    let s = resolve(&args.common)?;
    let ds = load_dataset(&s)?;
    let mut wt = TcpWorker::connect(args.connect.as_str(), Duration::from_secs(30))?;
    let evaluated = worker_loop(&mut wt, args.worker_id, &ds)?;
    println!("worker {} evaluated {evaluated} candidates", args.worker_id);
    Ok(())
}
