//! Parallel, deterministic sweeps over `(η, L, h)`.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{DeltaPolicy, ExperimentConfig, Filling, OutputFormat};
use super::records;
use crate::criticality::{self, log_grid, sort_records, SweepRecord};
use crate::error::{Error, Result};
use crate::hamiltonian::{Eta, ProbeParams, SectorOperator};
use crate::metrology::{self, FisherOptions};

/// Settings a stored sweep must share with the current run to be reused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMeta {
    pub seed: u64,
    pub tol: f64,
    pub filling: Filling,
    pub delta_h: DeltaPolicy,
    pub cfi: bool,
}

impl SweepMeta {
    pub fn of(cfg: &ExperimentConfig) -> Self {
        Self {
            seed: cfg.seed,
            tol: cfg.tol,
            filling: cfg.filling,
            delta_h: cfg.delta_h,
            cfi: cfg.cfi,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub records: Vec<SweepRecord>,
    /// Rows taken over from a previous run.
    pub reused: usize,
    pub failed: usize,
}

impl SweepOutcome {
    pub fn total(&self) -> usize {
        self.records.len()
    }
}

type Key = (u64, usize, usize, u64);

fn key(eta: Eta, sites: usize, excitations: usize, h: f64) -> Key {
    (eta.sort_key().to_bits(), sites, excitations, h.to_bits())
}

fn record_key(r: &SweepRecord) -> Key {
    key(r.eta, r.sites, r.excitations, r.h)
}

/// Map `f` over `items` on `workers` threads, keeping input order.
pub fn par_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        if workers > 1 {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
                return pool.install(|| items.par_iter().map(&f).collect());
            }
        }
    }
    let _ = workers;
    items.iter().map(f).collect()
}

/// Evaluate one grid point; failures become invalid rows.
pub fn evaluate_point(
    op: &SectorOperator,
    h: f64,
    fisher: &FisherOptions,
    timed: bool,
) -> SweepRecord {
    #[cfg(not(target_arch = "wasm32"))]
    let start = timed.then(std::time::Instant::now);
    let result = metrology::qfi_with_operator(op, h, fisher);
    #[cfg(not(target_arch = "wasm32"))]
    let wall = start.map_or(0.0, |t| t.elapsed().as_secs_f64());
    #[cfg(target_arch = "wasm32")]
    let wall = if timed { f64::NAN } else { 0.0 };
    match result {
        Ok(p) => SweepRecord::from_point(&p, wall),
        Err(_) => SweepRecord::failed(&op.params().with_field(h), wall),
    }
}

/// Field around which to densify: the scan peak, or the global maximum.
fn densify_center(curve: &[(f64, f64)]) -> Option<f64> {
    if curve.len() < 3 {
        return curve.iter().max_by(|a, b| a.1.total_cmp(&b.1)).map(|p| p.0);
    }
    let hs: Vec<f64> = curve.iter().map(|p| p.0).collect();
    let vs: Vec<f64> = curve.iter().map(|p| p.1).collect();
    match criticality::scan_peak(&hs, &vs, &criticality::PeakOptions::default()) {
        Ok(p) => Some(p.h_max),
        Err(Error::PeakAtBoundary { h, .. }) => Some(h),
        Err(_) => None,
    }
}

/// Run the configured sweep. Rows present in `previous` are reused.
pub fn run_sweep(cfg: &ExperimentConfig, previous: &[SweepRecord]) -> Result<SweepOutcome> {
    cfg.validate()?;
    let fisher = cfg.fisher_options();
    let workers = cfg.worker_count();
    let mut ops: Vec<SectorOperator> = Vec::new();
    for eta in cfg.etas_sorted() {
        for (l, n) in cfg.sectors()? {
            ops.push(SectorOperator::build(ProbeParams::unit(
                l,
                n,
                eta,
                cfg.h_grid.start,
            )?)?);
        }
    }

    let mut done: BTreeMap<Key, SweepRecord> = BTreeMap::new();
    let wanted_blocks: HashSet<(u64, usize, usize)> = ops
        .iter()
        .map(|o| {
            let p = o.params();
            (p.eta.sort_key().to_bits(), p.sites, p.excitations)
        })
        .collect();
    for r in previous {
        if wanted_blocks.contains(&(r.eta.sort_key().to_bits(), r.sites, r.excitations)) {
            done.insert(record_key(r), r.clone());
        }
    }
    let mut used: HashSet<Key> = HashSet::new();

    let coarse = cfg.h_grid.points()?;
    let compute = |tasks: Vec<(usize, f64)>,
                   done: &mut BTreeMap<Key, SweepRecord>,
                   used: &mut HashSet<Key>| {
        let mut fresh = Vec::new();
        for (i, h) in tasks {
            let p = ops[i].params();
            let k = key(p.eta, p.sites, p.excitations, h);
            if used.insert(k) && !done.contains_key(&k) {
                fresh.push((i, h));
            }
        }
        let rows = par_map(&fresh, workers, |&(i, h)| {
            evaluate_point(&ops[i], h, &fisher, cfg.timings)
        });
        for r in rows {
            done.insert(record_key(&r), r);
        }
    };

    let tasks: Vec<(usize, f64)> = (0..ops.len())
        .flat_map(|i| coarse.iter().map(move |&h| (i, h)))
        .collect();
    compute(tasks, &mut done, &mut used);

    if cfg.densify > 1 {
        let fine = log_grid(
            cfg.h_grid.start,
            cfg.h_grid.stop,
            cfg.h_grid.per_decade * cfg.densify,
        )?;
        let mut tasks = Vec::new();
        for (i, op) in ops.iter().enumerate() {
            let p = op.params();
            let curve: Vec<(f64, f64)> = coarse
                .iter()
                .filter_map(|&h| done.get(&key(p.eta, p.sites, p.excitations, h)))
                .filter(|r| r.valid && r.qfi.is_finite())
                .map(|r| (r.h, r.qfi))
                .collect();
            let Some(center) = densify_center(&curve) else {
                continue;
            };
            for &h in &fine {
                let near_coarse = coarse.iter().any(|&c| (c / h - 1.0).abs() < 1e-9);
                if (h / center).log10().abs() <= 0.5 && !near_coarse {
                    tasks.push((i, h));
                }
            }
        }
        compute(tasks, &mut done, &mut used);
    }

    let before: HashSet<Key> = previous.iter().map(record_key).collect();
    let reused = used.iter().filter(|k| before.contains(k)).count();
    let mut records: Vec<SweepRecord> = done
        .into_iter()
        .filter(|(k, _)| used.contains(k))
        .map(|(_, r)| r)
        .collect();
    sort_records(&mut records);
    let failed = records.iter().filter(|r| !r.valid).count();
    Ok(SweepOutcome {
        records,
        reused,
        failed,
    })
}

pub fn sweep_path(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out.join(match cfg.format {
        OutputFormat::Csv => "sweep.csv",
        OutputFormat::Json => "sweep.json",
    })
}

fn meta_path(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out.join("sweep.meta.json")
}

pub fn read_records(path: &Path) -> Result<Vec<SweepRecord>> {
    let file = std::fs::File::open(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        records::read_json(file)
    } else {
        records::read_csv(file)
    }
}

/// Previously written rows that are compatible with `cfg`, if any.
pub fn load_previous(cfg: &ExperimentConfig) -> Result<Vec<SweepRecord>> {
    let (data, meta) = (sweep_path(cfg), meta_path(cfg));
    if !data.exists() || !meta.exists() {
        return Ok(Vec::new());
    }
    let stored: SweepMeta = serde_json::from_reader(std::fs::File::open(&meta)?)?;
    if stored != SweepMeta::of(cfg) {
        return Ok(Vec::new());
    }
    read_records(&data)
}

/// Write records plus the resume sidecar into `cfg.out`.
pub fn write_sweep(cfg: &ExperimentConfig, records: &[SweepRecord]) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.out)?;
    let path = sweep_path(cfg);
    let file = std::io::BufWriter::new(std::fs::File::create(&path)?);
    match cfg.format {
        OutputFormat::Csv => records::write_csv(file, records)?,
        OutputFormat::Json => records::write_json(file, records)?,
    }
    let mut meta = serde_json::to_string_pretty(&SweepMeta::of(cfg))?;
    meta.push('\n');
    std::fs::write(meta_path(cfg), meta)?;
    Ok(path)
}

/// Sweep with resume from, and write to, `cfg.out`.
pub fn run_sweep_to_disk(cfg: &ExperimentConfig) -> Result<(SweepOutcome, PathBuf)> {
    let previous = load_previous(cfg)?;
    let outcome = run_sweep(cfg, &previous)?;
    let path = write_sweep(cfg, &outcome.records)?;
    Ok((outcome, path))
}
