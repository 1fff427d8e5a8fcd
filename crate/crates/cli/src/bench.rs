use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use abcs_core::{
    load_image, reconstruct, sense, Algorithm, CompressionRatio, PixelImage, QualityReport,
    ReconConfig, SensingConfig,
};
use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use crate::BenchArgs;

/// Low and high C_R bands averaged separately.
const BANDS: [(&str, f64, f64); 2] = [("0.01-0.04", 0.01, 0.04), ("0.10-0.50", 0.10, 0.50)];

#[derive(Debug, Clone, Serialize)]
struct BenchRow {
    image: String,
    algorithm: String,
    cr: String,
    method: String,
    block: usize,
    denoiser: String,
    df: f64,
    iterations: usize,
    seed: u64,
    m_target: usize,
    m_actual: usize,
    psnr_db: f64,
    ssim: f64,
    sense_ms: Option<f64>,
    decode_ms: Option<f64>,
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "pgm" | "png"))
        })
        .collect();
    paths.sort();
    Ok(paths)
}

fn median(mut v: Vec<Duration>) -> f64 {
    v.sort();
    let d = v[v.len() / 2];
    d.as_micros() as f64 / 1e3
}

struct Cell<'a> {
    name: &'a str,
    image: &'a PixelImage,
    algorithm: Algorithm,
    ratio: CompressionRatio,
}

fn run_cell(cell: &Cell, args: &BenchArgs) -> Result<Vec<BenchRow>> {
    let cfg = SensingConfig::new(cell.algorithm, cell.ratio).with_block(args.block);
    let start = Instant::now();
    let ms = sense(cell.image, &cfg)?;
    let sense_ms = start.elapsed().as_micros() as f64 / 1e3;
    let g = ms.grid();
    let reference = cell.image.crop(g.height(), g.width())?;
    let mut rows = Vec::new();
    for &method in &args.methods {
        let rcfg = ReconConfig {
            method,
            iterations: args.iters,
            damping: args.df,
            denoiser: args.denoiser.clone(),
            seed: args.seed,
            ..ReconConfig::new(method)
        };
        let mut times = Vec::with_capacity(args.repeats);
        let mut result = None;
        for _ in 0..args.repeats.max(1) {
            let start = Instant::now();
            let rec = reconstruct(&ms, &rcfg, None);
            times.push(start.elapsed());
            result = Some(rec);
        }
        let (psnr_db, ssim) = match result.expect("at least one run") {
            Ok(rec) => {
                let q = QualityReport::compute(&reference, &rec.image)?;
                (q.psnr_db, q.ssim)
            }
            Err(e) => {
                eprintln!(
                    "warning: {} {} {} {method}: {e}",
                    cell.name, cell.algorithm, cell.ratio
                );
                (f64::NAN, f64::NAN)
            }
        };
        rows.push(BenchRow {
            image: cell.name.to_owned(),
            algorithm: cell.algorithm.to_string(),
            cr: cell.ratio.to_string(),
            method: method.to_string(),
            block: args.block,
            denoiser: if method.is_iterative() {
                args.denoiser.to_string()
            } else {
                String::new()
            },
            df: args.df,
            iterations: if method.is_iterative() { args.iters } else { 0 },
            seed: args.seed,
            m_target: ms.target(),
            m_actual: ms.actual(),
            psnr_db,
            ssim,
            sense_ms: (!args.no_timing).then_some(sense_ms),
            decode_ms: (!args.no_timing).then(|| median(times)),
        });
    }
    Ok(rows)
}

fn mean(rows: &[&BenchRow], f: impl Fn(&BenchRow) -> Option<f64>) -> Option<f64> {
    let v: Vec<f64> = rows.iter().filter_map(|r| f(r)).collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn average(label: &str, cr: String, rows: &[&BenchRow]) -> BenchRow {
    let first = rows[0];
    BenchRow {
        image: label.to_owned(),
        cr,
        m_target: 0,
        m_actual: 0,
        psnr_db: mean(rows, |r| Some(r.psnr_db)).unwrap_or(f64::NAN),
        ssim: mean(rows, |r| Some(r.ssim)).unwrap_or(f64::NAN),
        sense_ms: mean(rows, |r| r.sense_ms),
        decode_ms: mean(rows, |r| r.decode_ms),
        ..first.clone()
    }
}

fn summaries(rows: &[BenchRow], args: &BenchArgs) -> Vec<BenchRow> {
    let mut out = Vec::new();
    for algo in &args.algos {
        for method in &args.methods {
            let of = |cr: Option<&CompressionRatio>, band: Option<(f64, f64)>| -> Vec<&BenchRow> {
                rows.iter()
                    .filter(|r| r.algorithm == algo.to_string() && r.method == method.to_string())
                    .filter(|r| cr.is_none_or(|c| r.cr == c.to_string()))
                    .filter(|r| {
                        band.is_none_or(|(lo, hi)| {
                            let v: f64 = r.cr.parse().unwrap_or(f64::NAN);
                            v >= lo - 1e-12 && v <= hi + 1e-12
                        })
                    })
                    .collect()
            };
            for cr in &args.crs {
                let sel = of(Some(cr), None);
                if !sel.is_empty() {
                    out.push(average("mean", cr.to_string(), &sel));
                }
            }
            for (label, lo, hi) in BANDS {
                let sel = of(None, Some((lo, hi)));
                if !sel.is_empty() {
                    out.push(average("band-mean", label.to_owned(), &sel));
                }
            }
        }
    }
    out
}

pub fn run(args: BenchArgs) -> Result<()> {
    if args.repeats == 0 {
        bail!("--repeats must be at least 1");
    }
    let paths = list_images(&args.dir)?;
    if paths.is_empty() {
        bail!("no PGM or PNG images in {}", args.dir.display());
    }
    let mut images = Vec::new();
    for p in &paths {
        match load_image(p) {
            Ok(img) => {
                let name = p
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .unwrap_or("?")
                    .to_owned();
                images.push((name, img));
            }
            Err(e) => eprintln!("warning: skipping {}: {e}", p.display()),
        }
    }
    if images.is_empty() {
        bail!("no readable images in {}", args.dir.display());
    }

    let mut cells = Vec::new();
    for (name, image) in &images {
        for &algorithm in &args.algos {
            for &ratio in &args.crs {
                cells.push(Cell {
                    name,
                    image,
                    algorithm,
                    ratio,
                });
            }
        }
    }
    let results: Vec<Result<Vec<BenchRow>>> = if args.parallel {
        cells.par_iter().map(|c| run_cell(c, &args)).collect()
    } else {
        cells.iter().map(|c| run_cell(c, &args)).collect()
    };
    let mut rows = Vec::new();
    for (cell, r) in cells.iter().zip(results) {
        match r {
            Ok(mut v) => rows.append(&mut v),
            Err(e) => eprintln!(
                "warning: skipping {} {} {}: {e:#}",
                cell.name, cell.algorithm, cell.ratio
            ),
        }
    }
    if rows.is_empty() {
        bail!("every benchmark cell failed");
    }
    let averages = summaries(&rows, &args);

    let sink: Box<dyn Write> = match &args.out {
        Some(p) => {
            Box::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?)
        }
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    for row in rows.iter().chain(&averages) {
        w.serialize(row)?;
    }
    w.flush()?;

    if args.out.is_some() {
        println!(
            "seed {}; {} images, {} rows",
            args.seed,
            images.len(),
            rows.len()
        );
        println!(
            "{:<6} {:<7} {:>10} {:>9} {:>7}",
            "algo", "method", "C_R", "PSNR", "SSIM"
        );
        for r in &averages {
            println!(
                "{:<6} {:<7} {:>10} {:>9.2} {:>7.4}",
                r.algorithm, r.method, r.cr, r.psnr_db, r.ssim
            );
        }
    }
    Ok(())
}
