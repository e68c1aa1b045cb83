use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use stiefelmix::diagnostics::{acf, cumulative_mean, trace_series};
use stiefelmix::ingest::{self, fmt17, row_major, scenarios};
use stiefelmix::metrics::{evaluate, MetricsRow};
use stiefelmix::mixture::{em_start, fit_mixture, posterior_summary, ChainTrace};
use stiefelmix::model_select::{select_k, SelectConfig};
use stiefelmix::stiefel::StiefelPoint;

use crate::config::RunConfig;
use crate::output;

/// Largest data set whose co-occurrence matrix is written as CSV.
const CO_OCCURRENCE_CSV_MAX: usize = 2000;

fn out(cfg: &RunConfig, name: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("cannot create output directory {}", cfg.output_dir.display()))?;
    Ok(cfg.output_dir.join(name))
}

fn load_points(path: &Path) -> Result<(Vec<StiefelPoint>, Option<Vec<usize>>)> {
    let (x, z) = ingest::read_points_jsonl(path).with_context(|| format!("cannot load points from {}", path.display()))?;
    if x.is_empty() {
        bail!("{} holds no points", path.display());
    }
    Ok((x, z))
}

fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    output::csv_rows(path, &["label"], labels.iter().map(|l| vec![l.to_string()]))
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
    let mut labels = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: bad CSV record", path.display()))?;
        let l = rec.get(0).unwrap_or("").trim();
        labels.push(l.parse().with_context(|| format!("{} line {}: bad label '{l}'", path.display(), i + 2))?);
    }
    Ok(labels)
}

/// Both columns of each point as coordinates on the sphere, with its label.
fn write_embedding(path: &Path, x: &[StiefelPoint], labels: &[usize]) -> Result<()> {
    let p = x[0].p();
    let n = x[0].n();
    let mut header: Vec<String> = (1..=p).flat_map(|j| (1..=n).map(move |i| format!("x{j}_{i}"))).collect();
    header.push("label".into());
    let rows = x.iter().zip(labels).map(|(pt, l)| {
        let m = pt.matrix();
        let mut row: Vec<String> = (0..p).flat_map(|j| (0..n).map(move |i| (i, j))).map(|(i, j)| fmt17(m[(i, j)])).collect();
        row.push(l.to_string());
        row
    });
    output::csv_rows(path, &header, rows)
}

pub fn simulate(cfg: &RunConfig, scenario: &str, n: usize) -> Result<()> {
    let (params, pi) = match scenario {
        "three" => scenarios::three_clusters(),
        "four" => scenarios::four_clusters(),
        other => bail!("unknown scenario '{other}' (expected three or four)"),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (x, z) = ingest::simulate_mixture(&params, &pi, n, &mut rng)?;
    let path = out(cfg, "points.jsonl")?;
    output::commit(&path, |tmp| Ok(ingest::write_points_jsonl(tmp, &x, Some(&z))?))?;
    println!("wrote {} points from the {scenario}-cluster scenario to {}", x.len(), path.display());
    Ok(())
}

#[derive(Serialize)]
struct GibbsSummary<'a> {
    clusters: usize,
    seed: u64,
    iters: usize,
    burnin: usize,
    prior: stiefelmix::mixture::PriorRecipe,
    pi_hat: &'a [f64],
    /// Posterior mean of each `F_c`, row-major.
    f_hat: Vec<Vec<f64>>,
    modal_labels: Option<&'a [usize]>,
}

pub fn fit_gibbs(cfg: &RunConfig) -> Result<()> {
    let (x, _) = load_points(cfg.input()?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let fit = fit_mixture(&x, cfg.clusters, cfg.recipe(), &cfg.gibbs(), &mut rng)?;
    let s = posterior_summary(&fit.trace);

    let trace_path = out(cfg, "trace.jsonl")?;
    output::commit(&trace_path, |tmp| Ok(fit.trace.write_jsonl(tmp)?))?;
    let summary = GibbsSummary {
        clusters: cfg.clusters,
        seed: cfg.seed,
        iters: cfg.iters,
        burnin: cfg.burnin,
        prior: cfg.recipe(),
        pi_hat: &s.pi_hat,
        f_hat: s.f_hat.iter().map(row_major).collect(),
        modal_labels: s.modal_labels.as_deref(),
    };
    output::json(&out(cfg, "summary.json")?, &summary)?;
    if let Some(labels) = &s.modal_labels {
        write_labels(&out(cfg, "labels.csv")?, labels)?;
        write_embedding(&out(cfg, "embedding.csv")?, &x, labels)?;
    }
    if let Some(co) = s.co_occurrence.as_ref().filter(|_| x.len() <= CO_OCCURRENCE_CSV_MAX) {
        let header: Vec<String> = (0..x.len()).map(|j| format!("p{j}")).collect();
        let rows = co.row_iter().map(|r| r.iter().map(|v| fmt17(*v)).collect());
        output::csv_rows(&out(cfg, "co_occurrence.csv")?, &header, rows)?;
    }
    println!(
        "C = {}: {} kept sweeps, pi = [{}]; outputs in {}",
        cfg.clusters,
        fit.trace.records.len(),
        s.pi_hat.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>().join(", "),
        cfg.output_dir.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct EmReport {
    clusters: usize,
    seed: u64,
    pi: Vec<f64>,
    f: Vec<Vec<f64>>,
    objective: f64,
    iterations: usize,
    converged: bool,
}

pub fn fit_em(cfg: &RunConfig) -> Result<()> {
    let (x, _) = load_points(cfg.input()?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let em = em_start(&x, cfg.clusters, &mut rng)?;
    let report = EmReport {
        clusters: cfg.clusters,
        seed: cfg.seed,
        pi: em.pi.clone(),
        f: em.theta.iter().map(|t| row_major(&t.natural())).collect(),
        objective: em.objective,
        iterations: em.iterations,
        converged: em.converged,
    };
    output::json(&out(cfg, "em.json")?, &report)?;
    write_labels(&out(cfg, "labels.csv")?, &em.hard_labels())?;
    println!(
        "EM with C = {}: objective {:.4} after {} iterations{}",
        cfg.clusters,
        em.objective,
        em.iterations,
        if em.converged { "" } else { " (not converged)" }
    );
    Ok(())
}

pub fn select(cfg: &RunConfig) -> Result<()> {
    let (x, _) = load_points(cfg.input()?)?;
    if cfg.iters < 2 {
        bail!("select-k needs --iters of at least 2 for the deviance variance");
    }
    let sel = SelectConfig {
        candidates: cfg.candidates.clone(),
        recipe: cfg.recipe(),
        gibbs: cfg.gibbs(),
        criterion: cfg.criterion,
        penalty: cfg.penalty,
        seed: cfg.seed,
        threads: cfg.threads,
    };
    let (report, _) = select_k(&x, &sel)?;
    output::json(&out(cfg, "dic_report.json")?, &report)?;
    let table = report.table();
    output::text(&out(cfg, "dic_table.txt")?, &table)?;
    print!("{table}");
    println!("chosen C = {}", report.chosen_c);
    Ok(())
}

pub fn metrics(cfg: &RunConfig, labels: &Path) -> Result<()> {
    let (_, truth) = load_points(cfg.input()?)?;
    let truth = truth.context("the input points carry no true labels")?;
    let pred = read_labels(labels)?;
    let row = evaluate(&truth, &pred)?;
    output::csv_rows(&out(cfg, "metrics.csv")?, &MetricsRow::HEADER, [row.values().iter().map(|v| fmt17(*v)).collect()])?;
    for (h, v) in MetricsRow::HEADER.iter().zip(row.values()) {
        println!("{h:>4} {v:.4}");
    }
    Ok(())
}

pub fn convert_neo(cfg: &RunConfig) -> Result<()> {
    let input = cfg.input()?;
    let els = ingest::load_neo_csv(input)?;
    let x = els
        .iter()
        .enumerate()
        .map(|(i, e)| ingest::neo_to_stiefel(e).with_context(|| format!("{} line {}", input.display(), i + 2)))
        .collect::<Result<Vec<_>>>()?;
    let path = out(cfg, "points.jsonl")?;
    output::commit(&path, |tmp| Ok(ingest::write_points_jsonl(tmp, &x, None)?))?;
    println!("converted {} orbits to {}", x.len(), path.display());
    Ok(())
}

pub fn diagnose(cfg: &RunConfig, max_lag: usize) -> Result<()> {
    let input = cfg.input()?;
    let trace = ChainTrace::read_jsonl(input).with_context(|| format!("cannot load trace {}", input.display()))?;
    if trace.records.is_empty() {
        bail!("{} holds no trace records", input.display());
    }
    let series = trace_series(&trace);
    let names: Vec<&str> = series.iter().map(|(n, _)| n.as_str()).collect();
    let lags = max_lag.min(trace.records.len() - 1);
    let acfs: Vec<Vec<f64>> = series.iter().map(|(_, v)| acf(v, lags)).collect();
    let means: Vec<Vec<f64>> = series.iter().map(|(_, v)| cumulative_mean(v)).collect();

    let header = |first: &str| std::iter::once(first).chain(names.iter().copied()).map(String::from).collect::<Vec<_>>();
    let acf_rows = (0..=lags).map(|k| std::iter::once(k.to_string()).chain(acfs.iter().map(|a| fmt17(a[k]))).collect());
    output::csv_rows(&out(cfg, "acf.csv")?, &header("lag"), acf_rows)?;
    let mean_rows = trace
        .records
        .iter()
        .enumerate()
        .map(|(s, rec)| std::iter::once(rec.iter.to_string()).chain(means.iter().map(|m| fmt17(m[s]))).collect());
    output::csv_rows(&out(cfg, "cumulative_mean.csv")?, &header("iter"), mean_rows)?;
    let band = 2.0 / (trace.records.len() as f64).sqrt();
    let outside = acfs.iter().map(|a| a.iter().skip(1).filter(|v| v.abs() > band).count()).sum::<usize>();
    println!(
        "{} series, {} records; {outside} of {} autocorrelations at lag >= 1 exceed ±{band:.3}",
        names.len(),
        trace.records.len(),
        names.len() * lags
    );
    Ok(())
}
