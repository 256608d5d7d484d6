//! The exploration loop and its artifacts.
//!
//! scan -> integrate -> log -> select plan -> execute path (scanning at
//! every pose) -> repeat, until no frontier is left or the iteration budget
//! is spent.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use semap_core::gridmap::format_sig9;
use semap_core::octree::{write_octree, SemanticOctree};
use semap_core::planner::{most_likely_labels, PlannerConfig};
use semap_core::{
    select_plan, BeliefMap, LogOdds, MultiClassGrid, Pose2, SensorParams, StrategyRegistry,
};

use crate::config::{ConfigError, ExperimentConfig};
use crate::env::Environment;
use crate::metrics::class_precision;
use crate::simulate::{simulate_scan, ClassNoise, NoiseModel, RngStreams};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Runtime(String),
}

fn runtime(e: impl std::fmt::Display) -> RunError {
    RunError::Runtime(e.to_string())
}

/// One row of the entropy-vs-distance trace, written after every scan.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub distance: f64,
    pub entropy: f64,
    pub precision: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateLog {
    pub frontier: usize,
    pub goal_cell: usize,
    pub mi: f64,
    pub cost: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanLogEntry {
    pub iteration: usize,
    pub strategy: String,
    pub candidates: Vec<CandidateLog>,
    pub chosen: usize,
}

/// Everything a run produces, before it is written to disk.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: ExperimentConfig,
    pub env: Environment,
    pub rows: Vec<TraceRow>,
    pub plans: Vec<PlanLogEntry>,
    pub grid: MultiClassGrid,
    pub octree: Option<SemanticOctree>,
    /// True when the run ended because no frontier was left.
    pub exhausted: bool,
}

impl RunResult {
    pub fn final_entropy(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.entropy)
    }

    pub fn distance(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.distance)
    }
}

fn noise_model(config: &ExperimentConfig) -> NoiseModel {
    NoiseModel {
        range_sigma: config.sensor.range_sigma,
        class: match &config.sensor.confusion {
            Some(rows) => ClassNoise::Confusion(rows.clone()),
            None => ClassNoise::Uniform(config.sensor.misclass_prob),
        },
    }
}

fn start_pose(
    config: &ExperimentConfig,
    env: &Environment,
    rng: &mut RngStreams,
) -> Result<Pose2, RunError> {
    if let Some(s) = config.start {
        return match env.class_at([s.x, s.y, env.geometry.planar_height()]) {
            Some(0) => Ok(Pose2::new(s.x, s.y, s.theta)),
            _ => Err(ConfigError::invalid("start", "must lie in a free cell").into()),
        };
    }
    let free = env.free_cells();
    if free.is_empty() {
        return Err(runtime("environment has no free cell"));
    }
    let cell = free[rng.init_pose.random_range(0..free.len())];
    let theta = rng
        .init_pose
        .random_range(-std::f64::consts::PI..std::f64::consts::PI);
    let c = env.geometry.cell_center(cell);
    Ok(Pose2::new(c[0], c[1], theta))
}

struct Mapper<'a> {
    env: &'a Environment,
    sensor: SensorParams,
    noise: NoiseModel,
    rng: RngStreams,
    grid: MultiClassGrid,
    octree: Option<SemanticOctree>,
    rows: Vec<TraceRow>,
    distance: f64,
}

impl Mapper<'_> {
    fn scan(&mut self, pose: Pose2, iteration: usize) -> Result<(), RunError> {
        let sp = pose.sensor_pose(self.env.geometry.planar_height());
        let scan = simulate_scan(self.env, sp, &self.sensor, &self.noise, &mut self.rng)
            .map_err(runtime)?;
        self.grid
            .integrate_scan(&scan, &self.sensor)
            .map_err(runtime)?;
        if let Some(tree) = &mut self.octree {
            tree.integrate_scan(&scan, &self.sensor).map_err(runtime)?;
        }
        self.rows.push(TraceRow {
            iteration,
            distance: self.distance,
            entropy: self.grid.map_entropy(),
            precision: class_precision(&self.grid.most_likely_map(), self.env),
        });
        Ok(())
    }
}

/// Runs an experiment in memory.
pub fn run(config: &ExperimentConfig) -> Result<RunResult, RunError> {
    let env = Environment::from_config(&config.environment)?;
    config.validate(env.num_classes)?;
    if !env.geometry.is_planar() {
        return Err(ConfigError::invalid(
            "environment",
            "exploration runs need a planar environment",
        )
        .into());
    }
    let sensor = config.sensor_params(env.num_classes)?;
    let registry = StrategyRegistry::default();
    let strategy = registry
        .get(config.strategy.as_str())
        .ok_or_else(|| ConfigError::invalid("strategy", "unknown strategy"))?;
    let octree = match &config.octree {
        Some(o) if o.enabled => {
            let params = ExperimentConfig::octree_params(o, env.geometry.resolution());
            let side = 1usize << params.max_depth;
            if env.geometry.shape().iter().any(|&n| n > side) {
                return Err(ConfigError::invalid(
                    "octree.max_depth",
                    format!("{side} leaves per axis do not cover the map"),
                )
                .into());
            }
            let mut tree = SemanticOctree::new(params, env.num_classes)
                .map_err(|e| ConfigError::invalid("octree", e.to_string()))?;
            tree.set_pruning(o.pruning);
            Some(tree)
        }
        _ => None,
    };

    let mut rng = RngStreams::new(config.seed);
    let mut pose = start_pose(config, &env, &mut rng)?;
    let mut mapper = Mapper {
        env: &env,
        sensor: sensor.clone(),
        noise: noise_model(config),
        rng,
        grid: MultiClassGrid::new(env.geometry, LogOdds::zeros(env.num_classes)),
        octree,
        rows: Vec::new(),
        distance: 0.0,
    };
    mapper.scan(pose, 0)?;

    let mut planner = PlannerConfig {
        min_frontier_size: config.planner.min_frontier_size,
        ..PlannerConfig::default()
    };
    let mut plans = Vec::new();
    let mut exhausted = false;
    for iteration in 1..=config.max_iterations {
        let selection = match select_plan(&mapper.grid, pose, &sensor, strategy, &planner) {
            Ok(s) => s,
            Err(semap_core::Error::Exhausted) => {
                exhausted = true;
                break;
            }
            Err(e) => return Err(runtime(e)),
        };
        plans.push(PlanLogEntry {
            iteration,
            strategy: strategy.name().to_string(),
            candidates: selection
                .candidates
                .iter()
                .map(|c| CandidateLog {
                    frontier: c.frontier,
                    goal_cell: c.goal_cell,
                    mi: c.mi,
                    cost: c.cost,
                    score: c.score,
                })
                .collect(),
            chosen: selection.chosen,
        });
        let plan = selection.best();
        let mut moved = false;
        for next in &plan.poses[1..] {
            // the map can believe a wall cell free after grazing returns;
            // the robot stops short of it and replans
            if env.class_at([next.x, next.y, env.geometry.planar_height()]) != Some(0) {
                break;
            }
            mapper.distance += pose.distance(next);
            pose = *next;
            mapper.scan(pose, iteration)?;
            moved = true;
        }
        if !moved {
            mapper.scan(pose, iteration)?;
        }
        planner.visited_goals.insert(plan.goal_cell);
    }
    Ok(RunResult {
        config: config.clone(),
        env: env.clone(),
        rows: mapper.rows,
        plans,
        grid: mapper.grid,
        octree: mapper.octree,
        exhausted,
    })
}

pub fn trace_csv(result: &RunResult) -> String {
    let mut out = String::from("iteration,distance,entropy");
    for k in 1..=result.env.num_classes {
        write!(out, ",precision_{k}").unwrap();
    }
    out.push('\n');
    for r in &result.rows {
        write!(
            out,
            "{},{},{}",
            r.iteration,
            format_sig9(r.distance),
            format_sig9(r.entropy)
        )
        .unwrap();
        for p in &r.precision {
            out.push(',');
            if let Some(p) = p {
                out.push_str(&format_sig9(*p));
            }
        }
        out.push('\n');
    }
    out
}

pub fn plan_log(result: &RunResult) -> String {
    result
        .plans
        .iter()
        .map(|p| serde_json::to_string(p).expect("plan log serializes") + "\n")
        .collect()
}

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    /// Artifact file name -> SHA-256, hex encoded.
    pub files: BTreeMap<String, String>,
}

/// The artifact set of a run, as (file name, bytes), excluding the manifest.
pub fn artifacts(result: &RunResult) -> Result<Vec<(String, Vec<u8>)>, RunError> {
    let mut files = vec![
        (
            "entropy_vs_distance.csv".to_string(),
            trace_csv(result).into_bytes(),
        ),
        ("plan_log.jsonl".to_string(), plan_log(result).into_bytes()),
    ];
    let mut pgm = Vec::new();
    result.grid.write_pgm(&mut pgm).map_err(runtime)?;
    files.push(("final_map.pgm".into(), pgm));
    let mut csv = Vec::new();
    result.grid.write_csv(&mut csv).map_err(runtime)?;
    files.push(("final_map.csv".into(), csv));
    if let Some(tree) = &result.octree {
        let mut bin = Vec::new();
        write_octree(tree, &mut bin).map_err(runtime)?;
        files.push(("octree.bin".into(), bin));
        let stats = serde_json::to_vec_pretty(&tree.stats()).map_err(runtime)?;
        files.push(("octree_stats.json".into(), stats));
    }
    Ok(files)
}

pub fn config_hash(config: &ExperimentConfig) -> String {
    let mut c = config.clone();
    c.output_dir = None;
    c.hash()
}

pub fn manifest(result: &RunResult, files: &[(String, Vec<u8>)]) -> Manifest {
    let mut config = result.config.clone();
    config.output_dir = None;
    Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: config_hash(&config),
        config,
        files: files
            .iter()
            .map(|(name, bytes)| (name.clone(), hex::encode(Sha256::digest(bytes))))
            .collect(),
    }
}

/// Runs an experiment and writes its artifacts and manifest to `out`.
pub fn run_to_dir(
    config: &ExperimentConfig,
    out: &Path,
) -> Result<(RunResult, Manifest), RunError> {
    let result = run(config)?;
    let files = artifacts(&result)?;
    let manifest = manifest(&result, &files);
    fs::create_dir_all(out).map_err(runtime)?;
    for (name, bytes) in &files {
        fs::write(out.join(name), bytes).map_err(runtime)?;
    }
    let text = serde_json::to_string_pretty(&manifest).map_err(runtime)? + "\n";
    fs::write(out.join(MANIFEST), text).map_err(runtime)?;
    Ok((result, manifest))
}

/// Reruns the experiment recorded in a manifest and lists every artifact
/// whose hash differs. Also checks the artifacts stored next to the
/// manifest, when present.
pub fn verify(manifest_path: &Path) -> Result<Vec<String>, RunError> {
    let text = fs::read_to_string(manifest_path).map_err(runtime)?;
    let recorded: Manifest =
        serde_json::from_str(&text).map_err(|e| ConfigError::invalid("manifest", e.to_string()))?;
    let mut problems = Vec::new();
    if recorded.version != env!("CARGO_PKG_VERSION") {
        problems.push(format!(
            "version: manifest {} vs library {}",
            recorded.version,
            env!("CARGO_PKG_VERSION")
        ));
    }
    if config_hash(&recorded.config) != recorded.config_hash {
        problems.push("config_hash does not match the embedded config".into());
    }
    let result = run(&recorded.config)?;
    let files = artifacts(&result)?;
    let fresh = manifest(&result, &files);
    let dir = manifest_path.parent().unwrap_or(Path::new("."));
    for (name, hash) in &recorded.files {
        match fresh.files.get(name) {
            Some(h) if h == hash => {}
            Some(_) => problems.push(format!("{name}: rerun differs")),
            None => problems.push(format!("{name}: not produced by rerun")),
        }
        if let Ok(bytes) = fs::read(dir.join(name)) {
            if hex::encode(Sha256::digest(&bytes)) != *hash {
                problems.push(format!("{name}: file on disk differs"));
            }
        }
    }
    for name in fresh
        .files
        .keys()
        .filter(|n| !recorded.files.contains_key(*n))
    {
        problems.push(format!("{name}: missing from manifest"));
    }
    Ok(problems)
}

/// Most likely labels of an octree run, for inspection.
pub fn octree_labels(tree: &SemanticOctree) -> semap_core::LabelMap {
    most_likely_labels(tree as &dyn BeliefMap)
}
