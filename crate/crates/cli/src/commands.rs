use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use parkseg::augment::{apply_sampled, sample_augmentation, AugmentSpec, SampledOp};
use parkseg::errmask::{error_mask, ErrorMode};
use parkseg::maskcore::{decode_rgb_image, encode_mask, encode_rgb, parse_manifest, validate_manifest, Palette};
use parkseg::metrics::{confusion, ConfusionMatrix, EvalReport};
use parkseg::parkdetect::{detect_parked, verdicts_to_csv, DetectParams};
use parkseg::synthscene::{generate_random, render, score_csv_row, score_heuristic, GenParams, SCORE_CSV_HEADER};
use rayon::prelude::*;
use serde::Serialize;

use crate::io::{by_stem, collect_pngs, read_mask, stem, write_atomic};

/// Outcome of a subcommand that ran to completion but may have failed on
/// some inputs.
pub enum Outcome {
    Ok,
    Failed,
}

/// Prints per-item diagnostics in input order and reports whether all succeeded.
fn report_failures<T>(results: &[(String, Result<T>)]) -> Outcome {
    let mut failed = false;
    for (name, r) in results {
        if let Err(e) = r {
            eprintln!("error: {name}: {e:#}");
            failed = true;
        }
    }
    if failed {
        Outcome::Failed
    } else {
        Outcome::Ok
    }
}

pub fn detect_parked_cmd(
    inputs: &[PathBuf],
    out: &Path,
    palette: &Palette,
    kernel: u32,
    tolerance: u32,
) -> Result<Outcome> {
    let files = collect_pngs(inputs)?;
    by_stem(&files)?;
    let params = DetectParams::with_kernel(kernel);
    let results: Vec<(String, Result<()>)> = files
        .par_iter()
        .map(|path| {
            let run = || -> Result<()> {
                let mask = read_mask(path, palette, tolerance)?;
                let det = detect_parked(&mask, palette, &params)?;
                let s = stem(path);
                write_atomic(&out.join(format!("{s}.png")), &encode_mask(&det.mask, palette)?)?;
                write_atomic(&out.join(format!("{s}.verdicts.csv")), verdicts_to_csv(&det.verdicts).as_bytes())?;
                Ok(())
            };
            (path.display().to_string(), run())
        })
        .collect();
    Ok(report_failures(&results))
}

/// Resolves gt/pred pairs by stem; orphans on either side are reported together.
fn pair_up(gt: &Path, pred: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>> {
    let g = by_stem(&collect_pngs(&[gt.to_path_buf()])?)?;
    let p = by_stem(&collect_pngs(&[pred.to_path_buf()])?)?;
    let mut orphans = Vec::new();
    for (s, path) in &g {
        if !p.contains_key(s) {
            orphans.push(format!("{} (no prediction)", path.display()));
        }
    }
    for (s, path) in &p {
        if !g.contains_key(s) {
            orphans.push(format!("{} (no ground truth)", path.display()));
        }
    }
    if !orphans.is_empty() {
        bail!("unpaired files: {}", orphans.join(", "));
    }
    Ok(g.into_iter()
        .map(|(s, gp)| {
            let pp = p[&s].clone();
            (s, gp, pp)
        })
        .collect())
}

#[derive(Serialize)]
struct EvalDocument<'a> {
    images: BTreeMap<&'a str, &'a EvalReport>,
    aggregate: &'a EvalReport,
}

pub fn eval_cmd(gt: &Path, pred: &Path, out: &Path, palette: &Palette, tolerance: u32) -> Result<Outcome> {
    let pairs = pair_up(gt, pred)?;
    let results: Vec<(String, Result<ConfusionMatrix>)> = pairs
        .par_iter()
        .map(|(s, g, p)| {
            let run = || -> Result<ConfusionMatrix> {
                let gm = read_mask(g, palette, tolerance).with_context(|| g.display().to_string())?;
                let pm = read_mask(p, palette, tolerance).with_context(|| p.display().to_string())?;
                Ok(confusion(&gm, &pm, palette)?)
            };
            (s.clone(), run())
        })
        .collect();
    if let Outcome::Failed = report_failures(&results) {
        return Ok(Outcome::Failed);
    }
    let classes: Vec<_> = palette.entries().iter().map(|e| e.id).collect();
    let mut total = ConfusionMatrix::zeros(classes);
    let mut reports = Vec::new();
    for (s, cm) in &results {
        let cm = cm.as_ref().expect("failures handled above");
        total.merge(cm);
        reports.push((s.as_str(), EvalReport::from_confusion(cm, palette)));
    }
    let aggregate = EvalReport::from_confusion(&total, palette);

    let mut csv = String::from(EvalReport::CSV_HEADER);
    for (s, r) in &reports {
        csv.push_str(&r.to_csv(s));
    }
    csv.push_str(&aggregate.to_csv("ALL"));
    write_atomic(&out.join("eval.csv"), csv.as_bytes())?;
    let doc = EvalDocument { images: reports.iter().map(|(s, r)| (*s, r)).collect(), aggregate: &aggregate };
    write_atomic(&out.join("eval.json"), serde_json::to_string_pretty(&doc)?.as_bytes())?;

    let fmt = |v: Option<f64>| v.map_or_else(|| "NA".into(), |v| format!("{v:.4}"));
    println!(
        "images={} foreground_accuracy={} dice={} jaccard={}",
        reports.len(),
        fmt(aggregate.foreground_accuracy),
        fmt(aggregate.macro_dice),
        fmt(aggregate.macro_jaccard)
    );
    Ok(Outcome::Ok)
}

pub fn errmask_cmd(
    gt: &Path,
    pred: &Path,
    out: &Path,
    palette: &Palette,
    tolerance: u32,
    mode: ErrorMode,
) -> Result<Outcome> {
    let pairs = pair_up(gt, pred)?;
    let results: Vec<(String, Result<()>)> = pairs
        .par_iter()
        .map(|(s, g, p)| {
            let run = || -> Result<()> {
                let gm = read_mask(g, palette, tolerance).with_context(|| g.display().to_string())?;
                let pm = read_mask(p, palette, tolerance).with_context(|| p.display().to_string())?;
                let e = error_mask(&gm, &pm, palette, mode)?;
                write_atomic(&out.join(format!("{s}.png")), &encode_rgb(&e.to_rgb()))
            };
            (s.clone(), run())
        })
        .collect();
    Ok(report_failures(&results))
}

#[derive(Serialize)]
struct Provenance<'a> {
    source_image: String,
    source_mask: String,
    output_image: String,
    output_mask: String,
    seed: u64,
    index: u64,
    ops: &'a [SampledOp],
}

pub struct AugmentArgs<'a> {
    pub images: &'a Path,
    pub masks: &'a Path,
    pub out: &'a Path,
    pub spec: AugmentSpec,
    pub count: u32,
}

/// Sample `i` of the pair at sorted position `n` uses stream index `n * count + i`.
pub fn augment_cmd(a: AugmentArgs<'_>, palette: &Palette, tolerance: u32) -> Result<Outcome> {
    let pairs = pair_up(a.images, a.masks)?;
    let count = a.count as u64;
    let results: Vec<(String, Result<Vec<String>>)> = pairs
        .par_iter()
        .enumerate()
        .map(|(n, (s, ip, mp))| {
            let run = || -> Result<Vec<String>> {
                let img = decode_rgb_image(&fs::read(ip)?).with_context(|| ip.display().to_string())?;
                let mask = read_mask(mp, palette, tolerance).with_context(|| mp.display().to_string())?;
                let mut lines = Vec::new();
                for i in 0..count {
                    let index = n as u64 * count + i;
                    let ops = sample_augmentation(&a.spec, index);
                    let (oi, om) = apply_sampled(&img, &mask, &ops)?;
                    let name = format!("{s}_aug{i}.png");
                    let (out_img, out_mask) = (a.out.join("images").join(&name), a.out.join("masks").join(&name));
                    write_atomic(&out_img, &encode_rgb(&oi))?;
                    write_atomic(&out_mask, &encode_mask(&om, palette)?)?;
                    let rec = Provenance {
                        source_image: ip.display().to_string(),
                        source_mask: mp.display().to_string(),
                        output_image: format!("images/{name}"),
                        output_mask: format!("masks/{name}"),
                        seed: a.spec.seed,
                        index,
                        ops: &ops,
                    };
                    lines.push(serde_json::to_string(&rec)?);
                }
                Ok(lines)
            };
            (s.clone(), run())
        })
        .collect();
    let outcome = report_failures(&results);
    let mut jsonl = String::new();
    for line in results.iter().filter_map(|(_, r)| r.as_ref().ok()).flatten() {
        jsonl.push_str(line);
        jsonl.push('\n');
    }
    write_atomic(&a.out.join("provenance.jsonl"), jsonl.as_bytes())?;
    Ok(outcome)
}

pub fn synth_cmd(params: GenParams, count: u64, kernel: u32, out: &Path, palette: &Palette) -> Result<Outcome> {
    let seeds: Vec<u64> = (0..count).map(|i| params.seed.wrapping_add(i)).collect();
    let results: Vec<(String, Result<String>)> = seeds
        .par_iter()
        .map(|&seed| {
            let run = || -> Result<String> {
                let spec = generate_random(&GenParams { seed, ..params })?;
                let scene = render(&spec, palette)?;
                let score = score_heuristic(&spec, palette, kernel)?;
                write_atomic(
                    &out.join("masks").join(format!("scene_{seed}.png")),
                    &encode_mask(&scene.mask, palette)?,
                )?;
                write_atomic(
                    &out.join("scenes").join(format!("scene_{seed}.json")),
                    serde_json::to_string_pretty(&spec)?.as_bytes(),
                )?;
                Ok(score_csv_row(seed, &score))
            };
            (format!("seed {seed}"), run())
        })
        .collect();
    let outcome = report_failures(&results);
    let mut csv = String::from(SCORE_CSV_HEADER);
    let (mut cars, mut correct) = (0usize, 0usize);
    for row in results.iter().filter_map(|(_, r)| r.as_ref().ok()) {
        csv.push_str(row);
        let f: Vec<&str> = row.trim_end().split(',').collect();
        cars += f[1].parse::<usize>().map_err(|e| anyhow!("bad score row {row:?}: {e}"))?;
        correct += f[2].parse::<usize>().map_err(|e| anyhow!("bad score row {row:?}: {e}"))?;
    }
    write_atomic(&out.join("scores.csv"), csv.as_bytes())?;
    let acc = if cars == 0 { "NA".to_string() } else { format!("{:.6}", correct as f64 / cars as f64) };
    println!("scenes={count} cars={cars} correct={correct} accuracy={acc}");
    Ok(outcome)
}

pub fn validate_cmd(
    manifest: &Path,
    base: Option<&Path>,
    delimiter: u8,
    out: Option<&Path>,
    palette: &Palette,
    tolerance: u32,
) -> Result<Outcome> {
    let text = fs::read_to_string(manifest).with_context(|| format!("reading {}", manifest.display()))?;
    let entries = parse_manifest(&text, delimiter).with_context(|| manifest.display().to_string())?;
    let base = base.map(Path::to_path_buf).unwrap_or_else(|| manifest.parent().unwrap_or(Path::new(".")).to_path_buf());
    let violations = validate_manifest(&entries, &base, palette, tolerance);
    for v in &violations {
        eprintln!("error: {v}");
    }
    if let Some(out) = out {
        write_atomic(&out.join("violations.json"), serde_json::to_string_pretty(&violations)?.as_bytes())?;
    }
    let mut summary = String::new();
    let _ = write!(summary, "entries={} violations={}", entries.len(), violations.len());
    println!("{summary}");
    Ok(if violations.is_empty() { Outcome::Ok } else { Outcome::Failed })
}
