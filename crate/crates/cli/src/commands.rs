use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use qdgen::engine::{
    generate, metrics_seeded, qubit_scaling_experiment, rng_for, write_epoch_csv, write_scaling_csv, Checkpoint,
    MetricsReport, Purpose, Trainer,
};
use qdgen::molgraph::{
    canonical_key, dataset_lines, parse_dataset, parse_smiles, read_dataset, read_text, write_smiles, AtomOrder,
    MolecularGraph,
};
use qdgen::reward::{local_filter, reward, NoveltyCache};
use qdgen::selfies::{encode, stoned_expand, Alphabet};
use rayon::prelude::*;
use serde::Serialize;

use crate::exit::{Failure, CHECKPOINT, CONFIG, PARSE};
use crate::runconfig::load_run_config;
use crate::svg;

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Failure::io(path, e))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

pub struct AugmentArgs<'a> {
    pub input: &'a Path,
    pub output: &'a Path,
    pub per_seed: usize,
    pub max_attempts: usize,
    pub seed: u64,
    pub filter: bool,
}

pub fn augment(a: &AugmentArgs) -> Result<(), Failure> {
    let text = read_text(a.input)?;
    let seeds = parse_dataset(&text)?;
    let encoded: Vec<_> = seeds.iter().map(encode).collect();
    for (i, e) in encoded.iter().enumerate() {
        if let Err(e) = e {
            warn!("seed {} cannot be encoded: {e}", i + 1);
        }
    }
    let alphabet = Alphabet::new(encoded.iter().flatten().flatten());
    let outcomes: Vec<_> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, g)| {
            let mut rng = rng_for(a.seed, Purpose::Augment, 0, i as u64);
            let keep = |m: &MolecularGraph| !a.filter || local_filter(m).passed;
            stoned_expand(g, a.per_seed, a.max_attempts, &alphabet, keep, &mut rng)
        })
        .collect();

    let mut seen: HashSet<String> = seeds.iter().map(canonical_key).collect();
    let mut lines = Vec::new();
    let mut attempts = 0;
    for o in &outcomes {
        attempts += o.attempts;
        for m in &o.molecules {
            if seen.insert(canonical_key(m)) {
                if let Ok(s) = write_smiles(m, AtomOrder::Canonical) {
                    lines.push(s);
                }
            }
        }
    }
    let mut out = format!(
        "# qdgen augment\n# source: {}\n# per_seed: {} max_attempts: {} seed: {} filter: {}\n# seeds: {} attempts: {} accepted: {}\n",
        a.input.display(),
        a.per_seed,
        a.max_attempts,
        a.seed,
        if a.filter { "local" } else { "none" },
        seeds.len(),
        attempts,
        lines.len()
    );
    for l in &lines {
        out.push_str(l);
        out.push('\n');
    }
    write(a.output, &out)?;
    println!("seeds {} attempts {} accepted {}", seeds.len(), attempts, lines.len());
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    epochs: usize,
    final_mean_reward: f64,
    best_mean_reward: f64,
    final_sr: f64,
    final_uf: f64,
    final_df: f64,
    checkpoint: &'a str,
}

pub fn train(config: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<(), Failure> {
    let run = load_run_config(config)?;
    let mut cfg = run.training;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    let out: PathBuf = match (out, run.output_dir) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(o)) => o,
        (None, None) => return Err(Failure::config("output_dir", "no --out given and none in the config")),
    };
    let dataset = read_dataset(&cfg.dataset)?;
    let mut trainer = Trainer::new(cfg, &dataset)?;
    let mut reports = Vec::new();
    let csv_path = out.join("epochs.csv");
    while !trainer.is_done() {
        let r = trainer.run_epoch()?;
        eprintln!(
            "epoch {:>3}  reward {:.4}  nll {:.4}  loss {:.4}  sr {:.1}  uf {:.1}  df {:.1}",
            r.epoch, r.mean_reward, r.qcbm_nll, r.lstm_loss, r.sr, r.uf, r.df
        );
        reports.push(r);
        write(&csv_path, &write_epoch_csv(&reports))?;
        write(
            &out.join("checkpoints").join(format!("epoch_{:03}.json", trainer.epoch())),
            &trainer.checkpoint().to_json(),
        )?;
    }
    let ck = trainer.checkpoint();
    write(&out.join("checkpoint.json"), &ck.to_json())?;
    let last = reports.last().expect("at least one epoch");
    let summary = TrainSummary {
        epochs: reports.len(),
        final_mean_reward: last.mean_reward,
        best_mean_reward: reports.iter().map(|r| r.mean_reward).fold(f64::NEG_INFINITY, f64::max),
        final_sr: last.sr,
        final_uf: last.uf,
        final_df: last.df,
        checkpoint: "checkpoint.json",
    };
    write(&out.join("summary.json"), &to_json(&summary))?;
    info!("wrote {}", out.display());
    Ok(())
}

pub fn failures_sidecar(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".failures.tsv");
    out.with_file_name(name)
}

pub fn sample(checkpoint: &Path, count: usize, temperature: f64, out: &Path, seed: u64) -> Result<(), Failure> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Failure::config("temperature", "must be positive"));
    }
    let ck = Checkpoint::load(checkpoint).map_err(|e| Failure::new(CHECKPOINT, e.to_string()))?;
    let generated = generate(&ck, count, temperature, seed)?;
    let mut smiles = String::new();
    let mut failures = String::from("index\tprior\tselfies\treason\n");
    let mut n_fail = 0;
    for (i, g) in generated.iter().enumerate() {
        match (&g.smiles, &g.failure) {
            (Some(s), _) => {
                smiles.push_str(s);
                smiles.push('\n');
            }
            (None, reason) => {
                n_fail += 1;
                failures.push_str(&format!(
                    "{i}\t{}\t{}\t{}\n",
                    g.prior,
                    g.selfies,
                    reason.as_deref().unwrap_or("unknown")
                ));
            }
        }
    }
    write(out, &smiles)?;
    write(&failures_sidecar(out), &failures)?;
    println!("sampled {} decoded {} failed {}", generated.len(), generated.len() - n_fail, n_fail);
    Ok(())
}

#[derive(Serialize)]
pub struct EvalReport {
    #[serde(flatten)]
    pub metrics: MetricsReport,
    pub invalid_lines: Vec<usize>,
    /// Percent of parsed molecules whose canonical key is not in the training set.
    pub novel: f64,
    pub mean_reward: f64,
}

pub fn eval(
    input: &Path,
    train_set: &Path,
    report: &Path,
    svg_path: Option<&Path>,
    lenient: bool,
    seed: u64,
) -> Result<(), Failure> {
    let text = read_text(input)?;
    let lines = dataset_lines(&text);
    if lines.is_empty() {
        return Err(Failure::new(PARSE, format!("{}: no molecules", input.display())));
    }
    let parsed: Vec<Option<MolecularGraph>> = lines.iter().map(|l| parse_smiles(&l.smiles).ok()).collect();
    let invalid: Vec<usize> = lines.iter().zip(&parsed).filter(|(_, p)| p.is_none()).map(|(l, _)| l.line).collect();
    if !invalid.is_empty() {
        let list: Vec<String> = invalid.iter().map(|l| l.to_string()).collect();
        if !lenient {
            return Err(Failure::new(
                PARSE,
                format!("{}: unparsable lines {}", input.display(), list.join(", ")),
            ));
        }
        warn!("skipping unparsable lines {}", list.join(", "));
    }
    let training = read_dataset(train_set)?;
    let train_keys: HashSet<String> = training.par_iter().map(canonical_key).collect();
    let cache = NoveltyCache::new(&training);
    let m = metrics_seeded(&parsed, |g| local_filter(g).passed, seed)?;
    let decoded: Vec<&MolecularGraph> = parsed.iter().flatten().collect();
    let novel = decoded.par_iter().filter(|g| !train_keys.contains(&canonical_key(g))).count();
    let rewards: Vec<f64> = parsed.par_iter().map(|g| reward(g.as_ref(), &cache).value()).collect();
    let r = EvalReport {
        novel: if decoded.is_empty() { 0.0 } else { 100.0 * novel as f64 / decoded.len() as f64 },
        mean_reward: rewards.iter().sum::<f64>() / rewards.len() as f64,
        invalid_lines: invalid,
        metrics: m,
    };
    write(report, &to_json(&r))?;
    if let Some(p) = svg_path {
        let bars = [("SR", r.metrics.sr), ("UF", r.metrics.uf), ("DF", r.metrics.df), ("novel", r.novel)];
        write(p, &svg::bar_chart("Generated molecules (%)", &bars))?;
    }
    println!(
        "n {} sr {:.1} uf {:.1} df {:.1} novel {:.1}",
        r.metrics.n_total, r.metrics.sr, r.metrics.uf, r.metrics.df, r.novel
    );
    Ok(())
}

pub fn scaling(
    config: &Path,
    qubits: &[usize],
    out: &Path,
    svg_path: Option<&Path>,
    seed: Option<u64>,
) -> Result<(), Failure> {
    if qubits.is_empty() {
        return Err(Failure::new(CONFIG, "config key `qubits`: no qubit counts given"));
    }
    let run = load_run_config(config)?;
    let mut base = run.training;
    if let Some(s) = seed {
        base.master_seed = s;
    }
    let dataset = read_dataset(&base.dataset)?;
    let rows = qubit_scaling_experiment(&base, &dataset, qubits)?;
    write(out, &write_scaling_csv(&rows))?;
    let default_svg = out.with_extension("svg");
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.n_qubits as f64, r.sr)).collect();
    write(
        svg_path.unwrap_or(&default_svg),
        &svg::line_chart("Success rate (%) by qubit count", "qubits", &points),
    )?;
    for r in &rows {
        println!("{} qubits: sr {:.1} uf {:.1} df {:.1} ({:.1}s)", r.n_qubits, r.sr, r.uf, r.df, r.seconds);
    }
    Ok(())
}
