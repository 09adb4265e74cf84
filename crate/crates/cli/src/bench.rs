//! Seeded scaling benchmark over the R_xx22 family.
//!
//! For each requested `x` and run index, generates the functional with seed
//! `base_seed + run`, solves it (single shot plus any configured refinement)
//! and optionally computes a deep-refined reference bound for the relative
//! gap column. Runs execute on parallel workers with isolated state; rows
//! come out in deterministic (x, run) order regardless of completion order,
//! and per-x mean/stddev aggregate rows are appended after each x group.

use std::io::Write;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use bellbound::bell::random_rxx22;
use bellbound::npa::{assemble_primal, build_basis_capped, build_moment_matrix};
use bellbound::sdp::dualize;
use bellbound::solver::{refine, solve, SolverConfig};

#[derive(Debug, Clone)]
pub struct BenchConfig {
    /// Settings-per-side values to sweep.
    pub xs: Vec<usize>,
    /// Runs per x; run `r` uses seed `base_seed + r`.
    pub runs: usize,
    pub level: u32,
    pub base_seed: u64,
    /// Compute a deep-refined reference bound and the relative gap.
    pub reference: bool,
    /// Refinement budget of the reference solve.
    pub ref_steps: usize,
    pub basis_cap: usize,
    pub solver: SolverConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            xs: vec![10, 20, 40, 80, 130],
            runs: 10,
            level: 1,
            base_seed: 1,
            reference: false,
            ref_steps: 300,
            basis_cap: bellbound::npa::DEFAULT_BASIS_CAP,
            solver: SolverConfig::default(),
        }
    }
}

/// One benchmark row.
#[derive(Debug, Clone)]
pub struct BenchRecord {
    pub id: String,
    pub x: usize,
    pub seed: u64,
    pub level: u32,
    /// Moment-matrix side.
    pub n: Option<usize>,
    /// Constraint count.
    pub m: Option<usize>,
    pub bound: Option<f64>,
    pub reference: Option<f64>,
    pub rel_gap_pct: Option<f64>,
    pub wall_ms: Option<f64>,
    pub inner_iterations: Option<usize>,
    pub refine_steps: Option<usize>,
    pub peak_mem_bytes: Option<u64>,
    pub status: String,
}

fn run_instance(cfg: &BenchConfig, x: usize, run: usize) -> BenchRecord {
    let seed = cfg.base_seed + run as u64;
    let id = format!("x{x}_r{run}");
    let mut record = BenchRecord {
        id,
        x,
        seed,
        level: cfg.level,
        n: None,
        m: None,
        bound: None,
        reference: None,
        rel_gap_pct: None,
        wall_ms: None,
        inner_iterations: None,
        refine_steps: None,
        peak_mem_bytes: None,
        status: "ok".into(),
    };
    let outcome = (|| -> bellbound::Result<()> {
        let f = random_rxx22(x, seed)?;
        let basis = build_basis_capped(f.scenario(), cfg.level, cfg.basis_cap)?;
        let mm = build_moment_matrix(&basis);
        let dual = dualize(assemble_primal(&f, &mm)?);
        record.n = Some(dual.n());
        record.m = Some(dual.m());
        let report = solve(&dual, &cfg.solver)?;
        record.bound = Some(report.certificate.certified_bound);
        record.wall_ms = Some(report.wall_time.as_secs_f64() * 1e3);
        record.inner_iterations = Some(report.inner_iterations.iter().sum());
        record.refine_steps = Some(report.refine_steps_taken);
        record.peak_mem_bytes = Some(report.peak_memory_estimate);
        if cfg.reference {
            let deep_cfg = SolverConfig {
                refine_iters: cfg.ref_steps,
                ..cfg.solver
            };
            let deep = refine(&dual, report, &deep_cfg)?;
            let reference = deep.certificate.certified_bound;
            record.reference = Some(reference);
            if reference != 0.0 {
                let bound = record.bound.expect("set above");
                record.rel_gap_pct = Some(1e2 * (bound - reference) / reference.abs());
            }
        }
        Ok(())
    })();
    if let Err(e) = outcome {
        record.status = format!("error: {e}");
    }
    record
}

/// Runs the sweep. Instances execute in parallel; the returned rows are in
/// (x, run) order.
pub fn run_bench(cfg: &BenchConfig) -> Vec<BenchRecord> {
    let jobs: Vec<(usize, usize)> = cfg
        .xs
        .iter()
        .flat_map(|&x| (0..cfg.runs).map(move |r| (x, r)))
        .collect();
    jobs.par_iter()
        .map(|&(x, run)| run_instance(cfg, x, run))
        .collect()
}

/// CSV row shape: fixed column order, one row per run, aggregate rows
/// flagged through the `agg` column ("" for runs, "mean"/"stddev" per x).
#[derive(Debug, Serialize)]
struct CsvRow<'a> {
    id: &'a str,
    x: usize,
    seed: Option<u64>,
    level: u32,
    n: Option<usize>,
    m: Option<usize>,
    bound: Option<f64>,
    reference: Option<f64>,
    rel_gap_pct: Option<f64>,
    wall_ms: Option<f64>,
    inner_iters: Option<usize>,
    refine_steps: Option<usize>,
    peak_mem_bytes: Option<u64>,
    agg: &'a str,
    status: &'a str,
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Sample standard deviation; `None` below two samples.
fn stddev(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (values.len() - 1) as f64;
    Some(var.sqrt())
}

/// Writes run rows plus per-x mean/stddev aggregates (computed over the
/// successful rows of each x group).
pub fn write_csv<W: Write>(records: &[BenchRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut xs_in_order: Vec<usize> = Vec::new();
    for r in records {
        if !xs_in_order.contains(&r.x) {
            xs_in_order.push(r.x);
        }
    }
    for &x in &xs_in_order {
        let group: Vec<&BenchRecord> = records.iter().filter(|r| r.x == x).collect();
        for r in &group {
            w.serialize(CsvRow {
                id: &r.id,
                x: r.x,
                seed: Some(r.seed),
                level: r.level,
                n: r.n,
                m: r.m,
                bound: r.bound,
                reference: r.reference,
                rel_gap_pct: r.rel_gap_pct,
                wall_ms: r.wall_ms,
                inner_iters: r.inner_iterations,
                refine_steps: r.refine_steps,
                peak_mem_bytes: r.peak_mem_bytes,
                agg: "",
                status: &r.status,
            })?;
        }
        let ok: Vec<&&BenchRecord> = group.iter().filter(|r| r.status == "ok").collect();
        if ok.is_empty() {
            continue;
        }
        let level = ok[0].level;
        let collect = |f: &dyn Fn(&BenchRecord) -> Option<f64>| -> Vec<f64> {
            ok.iter().filter_map(|r| f(r)).collect()
        };
        let bounds = collect(&|r| r.bound);
        let refs = collect(&|r| r.reference);
        let gaps = collect(&|r| r.rel_gap_pct);
        let walls = collect(&|r| r.wall_ms);
        let mems = collect(&|r| r.peak_mem_bytes.map(|v| v as f64));
        for (tag, stat) in [("mean", &mean as &dyn Fn(&[f64]) -> Option<f64>), ("stddev", &stddev)]
        {
            w.serialize(CsvRow {
                id: "agg",
                x,
                seed: None,
                level,
                n: ok[0].n,
                m: ok[0].m,
                bound: stat(&bounds),
                reference: stat(&refs),
                rel_gap_pct: stat(&gaps),
                wall_ms: stat(&walls),
                inner_iters: None,
                refine_steps: None,
                peak_mem_bytes: stat(&mems).map(|v| v as u64),
                agg: tag,
                status: "",
            })?;
        }
    }
    w.flush().context("flushing CSV")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> BenchConfig {
        BenchConfig {
            xs: vec![2, 3],
            runs: 3,
            reference: true,
            ref_steps: 10,
            ..Default::default()
        }
    }

    #[test]
    fn bench_rows_are_ordered_and_complete() {
        let cfg = tiny_config();
        let records = run_bench(&cfg);
        assert_eq!(records.len(), 6);
        let ids: Vec<&str> = records.iter().map(|r| r.id.as_str()).collect();
        assert_eq!(ids, ["x2_r0", "x2_r1", "x2_r2", "x3_r0", "x3_r1", "x3_r2"]);
        for r in &records {
            assert_eq!(r.status, "ok");
            assert_eq!(r.n, Some(2 * r.x + 1));
            assert!(r.bound.is_some());
            assert!(r.reference.unwrap() <= r.bound.unwrap() + 1e-12);
        }
    }

    #[test]
    fn bench_is_deterministic() {
        let cfg = tiny_config();
        let a = run_bench(&cfg);
        let b = run_bench(&cfg);
        let bounds = |v: &[BenchRecord]| -> Vec<f64> { v.iter().map(|r| r.bound.unwrap()).collect() };
        assert_eq!(bounds(&a), bounds(&b));
    }

    #[test]
    fn csv_schema_is_stable() {
        let cfg = BenchConfig {
            xs: vec![2],
            runs: 2,
            ..Default::default()
        };
        let records = run_bench(&cfg);
        let mut buf = Vec::new();
        write_csv(&records, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "id,x,seed,level,n,m,bound,reference,rel_gap_pct,wall_ms,inner_iters,refine_steps,peak_mem_bytes,agg,status"
        );
        // 2 run rows + mean + stddev.
        assert_eq!(lines.count(), 4);
        assert_eq!(text.matches(",mean,").count(), 1);
        assert_eq!(text.matches(",stddev,").count(), 1);
    }

    #[test]
    fn failed_rows_are_recorded_not_fatal() {
        let cfg = BenchConfig {
            xs: vec![200],
            runs: 1,
            basis_cap: 10, // force a basis-too-large failure
            ..Default::default()
        };
        let records = run_bench(&cfg);
        assert_eq!(records.len(), 1);
        assert!(records[0].status.starts_with("error:"));
        assert!(records[0].bound.is_none());
        let mut buf = Vec::new();
        write_csv(&records, &mut buf).unwrap();
    }
}
