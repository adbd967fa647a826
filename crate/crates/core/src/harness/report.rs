//! Analysis tables over a finished sweep.
//!
//! Tables written to `<out>/report/` (schema version 1; the column sets
//! below are fixed):
//!
//! ```text
//! verdicts.csv     layer,neuron,epoch,selective,class,stability,confidence,activation
//! selectivity.csv  layer,epoch,neurons,selective,fraction
//! entropy.csv      layer,epoch,neurons,mean_entropy,bin_0,...,bin_9
//! distances.csv    layer,epoch,neurons,pairs,mean_euclid,mean_cosine
//! complexity.csv   layer,epoch,neurons,mean_ratio,mean_ratio_fast
//! convergence.csv  method,evaluations,runs,median_best
//! labile.csv       layer,neuron,classes
//! ```
//!
//! Entropy, distance and complexity rows use one MEI per neuron: its best
//! record over all methods. Entropy bins split `[0, 1]` into ten equal
//! parts, the last one closed. Empty fields mean "not defined" (for example
//! a cosine mean with fewer than two nonzero latent vectors). `classes` in
//! `labile.csv` is `class@first_epoch` joined by `;`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::manifest::{write_timings, RunManifest};
use super::sweep::{load_cells, CellResult};
use super::write_atomic;
use crate::analysis::{
    all_verdicts, best_per_neuron, compression_ratio, labile_neurons, normalized_entropy, quantize_pixels,
    record_distances, MeiRecord, COMPRESSION_LEVEL, FAST_COMPRESSION_LEVEL,
};
use crate::error::{Error, Result};
use crate::optimizer::read_history_csv;
use crate::stimulus::read_raw;

pub const REPORT_TABLES: [&str; 7] = [
    "verdicts.csv",
    "selectivity.csv",
    "entropy.csv",
    "distances.csv",
    "complexity.csv",
    "convergence.csv",
    "labile.csv",
];

const ENTROPY_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub records: usize,
    /// Inputs that were missing or unreadable; the affected rows are left
    /// out.
    pub warnings: Vec<String>,
}

impl ReportSummary {
    pub fn complete(&self) -> bool {
        self.warnings.is_empty()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn median(v: &mut [f64]) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { (v[n / 2 - 1] + v[n / 2]) / 2.0 })
}

/// 1, 2, 5, 10, 20, 50, ... up to and including `max`.
fn evaluation_marks(max: usize) -> Vec<usize> {
    let mut marks = Vec::new();
    let mut decade = 1usize;
    'outer: loop {
        for m in [1, 2, 5] {
            let v = m * decade;
            if v >= max {
                break 'outer;
            }
            marks.push(v);
        }
        decade *= 10;
    }
    marks.push(max);
    marks
}

type Group = (usize, usize);

fn by_layer_epoch<'a>(records: impl IntoIterator<Item = &'a MeiRecord>) -> BTreeMap<Group, Vec<&'a MeiRecord>> {
    let mut g: BTreeMap<Group, Vec<&MeiRecord>> = BTreeMap::new();
    for r in records {
        g.entry((r.layer, r.epoch)).or_default().push(r);
    }
    g
}

/// Builds every report table from the cells under `out` and writes the
/// report manifest.
pub fn run_report(out: &Path) -> Result<ReportSummary> {
    let started = Instant::now();
    let cells = load_cells(out)?;
    if cells.is_empty() {
        return Err(Error::input(format!("no finished sweep cells under {}", out.display())));
    }
    let dir = out.join("report");
    std::fs::create_dir_all(&dir)?;
    let mut manifest = RunManifest::begin(out, "report", json!({"cells": cells.len()}))?;
    let mut warnings = Vec::new();
    let mut records: Vec<MeiRecord> = cells.iter().map(|(_, c)| c.record.clone()).collect();
    records.sort_by(|a, b| {
        (a.epoch, a.layer, a.neuron, &a.method).cmp(&(b.epoch, b.layer, b.neuron, &b.method))
    });
    let cell_of = |r: &MeiRecord| -> Option<&(std::path::PathBuf, CellResult)> {
        cells.iter().find(|(_, c)| {
            (c.record.epoch, c.record.layer, c.record.neuron, &c.record.method) == (r.epoch, r.layer, r.neuron, &r.method)
        })
    };

    // Verdicts and selective fractions.
    let verdicts = all_verdicts(&records)?;
    let mut t = String::from("layer,neuron,epoch,selective,class,stability,confidence,activation\n");
    for v in &verdicts {
        let class = v.class.map(|c| c.to_string()).unwrap_or_default();
        writeln!(t, "{},{},{},{},{class},{},{},{}", v.layer, v.neuron, v.epoch, v.selective, v.stability, v.confidence, v.activation)
            .unwrap();
    }
    write_atomic(&dir.join("verdicts.csv"), t.as_bytes())?;

    let mut fractions: BTreeMap<Group, (usize, usize)> = BTreeMap::new();
    for v in &verdicts {
        let e = fractions.entry((v.layer, v.epoch)).or_default();
        e.0 += 1;
        e.1 += v.selective as usize;
    }
    let mut t = String::from("layer,epoch,neurons,selective,fraction\n");
    for ((layer, epoch), (n, s)) in &fractions {
        writeln!(t, "{layer},{epoch},{n},{s},{}", *s as f64 / *n as f64).unwrap();
    }
    write_atomic(&dir.join("selectivity.csv"), t.as_bytes())?;

    let best = best_per_neuron(&records);
    let groups = by_layer_epoch(best.iter().copied());

    let mut t = String::from("layer,epoch,neurons,mean_entropy");
    for b in 0..ENTROPY_BINS {
        write!(t, ",bin_{b}").unwrap();
    }
    t.push('\n');
    for ((layer, epoch), rs) in &groups {
        let hs: Vec<f64> = rs.iter().map(|r| normalized_entropy(&r.class_probs)).collect::<Result<_>>()?;
        let mut bins = [0usize; ENTROPY_BINS];
        for h in &hs {
            bins[((h * ENTROPY_BINS as f64) as usize).min(ENTROPY_BINS - 1)] += 1;
        }
        write!(t, "{layer},{epoch},{},{}", rs.len(), opt(mean(&hs))).unwrap();
        for b in bins {
            write!(t, ",{b}").unwrap();
        }
        t.push('\n');
    }
    write_atomic(&dir.join("entropy.csv"), t.as_bytes())?;

    let mut t = String::from("layer,epoch,neurons,pairs,mean_euclid,mean_cosine\n");
    for ((layer, epoch), rs) in &groups {
        let owned: Vec<MeiRecord> = rs.iter().map(|r| (*r).clone()).collect();
        match record_distances(&owned) {
            Ok(d) => writeln!(t, "{layer},{epoch},{},{},{},{}", rs.len(), d.pairs, d.mean_euclidean, opt(d.mean_cosine)),
            Err(_) => writeln!(t, "{layer},{epoch},{},0,,", rs.len()),
        }
        .unwrap();
    }
    write_atomic(&dir.join("distances.csv"), t.as_bytes())?;

    let mut t = String::from("layer,epoch,neurons,mean_ratio,mean_ratio_fast\n");
    for ((layer, epoch), rs) in &groups {
        let (mut slow, mut fast) = (Vec::new(), Vec::new());
        for r in rs {
            let Some((path, _)) = cell_of(r) else { continue };
            let raw = path.join("mei.f32");
            match std::fs::File::open(&raw).map_err(Error::from).and_then(read_raw) {
                Ok((_, pixels)) => {
                    let bytes = quantize_pixels(&pixels);
                    slow.push(compression_ratio(&bytes, COMPRESSION_LEVEL)?);
                    fast.push(compression_ratio(&bytes, FAST_COMPRESSION_LEVEL)?);
                }
                Err(e) => warnings.push(format!("{}: {e}", raw.display())),
            }
        }
        writeln!(t, "{layer},{epoch},{},{},{}", slow.len(), opt(mean(&slow)), opt(mean(&fast))).unwrap();
    }
    write_atomic(&dir.join("complexity.csv"), t.as_bytes())?;

    // Median best-so-far against evaluation count, per method.
    let mut histories: BTreeMap<&str, Vec<Vec<(usize, f64)>>> = BTreeMap::new();
    for (path, cell) in &cells {
        let file = path.join("history.csv");
        match std::fs::read_to_string(&file).map_err(Error::from).and_then(|s| read_history_csv(&s)) {
            Ok(h) => histories
                .entry(cell.record.method.as_str())
                .or_default()
                .push(h.iter().map(|e| (e.evaluation, e.best_so_far)).collect()),
            Err(e) => warnings.push(format!("{}: {e}", file.display())),
        }
    }
    let mut t = String::from("method,evaluations,runs,median_best\n");
    for (method, runs) in &histories {
        let max = runs.iter().filter_map(|h| h.last().map(|e| e.0)).max().unwrap_or(0);
        if max == 0 {
            continue;
        }
        for mark in evaluation_marks(max) {
            let mut at: Vec<f64> =
                runs.iter().filter_map(|h| h.iter().take_while(|e| e.0 <= mark).last().map(|e| e.1)).collect();
            let n = at.len();
            writeln!(t, "{method},{mark},{n},{}", opt(median(&mut at))).unwrap();
        }
    }
    write_atomic(&dir.join("convergence.csv"), t.as_bytes())?;

    let mut t = String::from("layer,neuron,classes\n");
    for l in labile_neurons(&verdicts) {
        let classes: Vec<String> = l.classes.iter().map(|(c, e)| format!("{c}@{e}")).collect();
        writeln!(t, "{},{},{}", l.layer, l.neuron, classes.join(";")).unwrap();
    }
    write_atomic(&dir.join("labile.csv"), t.as_bytes())?;

    for w in &warnings {
        log::warn!("report input missing: {w}");
    }
    let summary = ReportSummary { records: records.len(), warnings };
    manifest.finish(out, &["report"], summary.complete(), json!({"records": summary.records, "warnings": summary.warnings}))?;
    write_timings(out, "report", &json!({"total_seconds": started.elapsed().as_secs_f64()}))?;
    Ok(summary)
}
