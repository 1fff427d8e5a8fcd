use std::fs::File;

use abcs_core::metrics::format_psnr;
use abcs_core::{
    load_image, read_container, reconstruct as run_reconstruct, save_image, sense as run_sense,
    write_container, Algorithm, MeasurementSet, PixelImage, QualityReport, ReconConfig,
    SensingConfig,
};
use anyhow::{Context, Result};

use crate::{ReconArgs, SenseArgs};

const HISTOGRAM_BINS: usize = 8;

fn histogram(ms: &MeasurementSet) -> Vec<(usize, usize, usize)> {
    let max = ms.block() * ms.block();
    let width = max.div_ceil(HISTOGRAM_BINS).max(1);
    let mut bins: Vec<(usize, usize, usize)> = (0..HISTOGRAM_BINS)
        .map(|i| (i * width, ((i + 1) * width - 1).min(max), 0))
        .filter(|b| b.0 <= max)
        .collect();
    for &c in ms.counts() {
        let i = (c / width).min(bins.len() - 1);
        bins[i].2 += 1;
    }
    bins
}

pub fn sense(args: SenseArgs) -> Result<()> {
    let img = load_image(&args.input)?;
    let mut cfg = SensingConfig::new(args.algo, args.cr).with_block(args.block);
    if let Some(t) = args.threshold {
        cfg = cfg.with_threshold(t);
    }
    let ms = run_sense(&img, &cfg)?;
    if args.algo == Algorithm::Bbv && ms.algorithm() == Algorithm::Zz {
        eprintln!(
            "warning: floor(C_F) = {} exceeds block size {}, bbv reverts to zz",
            args.cr.factor_floor(),
            args.block
        );
    }
    let output = args
        .output
        .unwrap_or_else(|| args.input.with_extension("abcs"));
    write_container(&ms, &output)?;

    let g = ms.grid();
    println!(
        "{}x{} -> {}x{}, {} blocks of {}x{}, algorithm {}, C_R {}",
        ms.height(),
        ms.width(),
        g.height(),
        g.width(),
        g.n_blocks(),
        g.block(),
        g.block(),
        ms.algorithm(),
        ms.ratio()
    );
    if ms.algorithm() == Algorithm::Dd {
        println!("threshold {}", ms.threshold());
    }
    println!("M_target {}", ms.target());
    println!(
        "M_actual {} ({} coefficients + {} side)",
        ms.actual(),
        ms.coefficients().len(),
        ms.side_charge()
    );
    println!("coefficients per block:");
    let total = g.n_blocks().max(1);
    for (lo, hi, n) in histogram(&ms) {
        let bar = "#".repeat((n * 40).div_ceil(total));
        println!("  {lo:>5}-{hi:<5} {n:>6} {bar}");
    }
    println!("wrote {}", output.display());
    Ok(())
}

pub fn reconstruct(args: ReconArgs) -> Result<()> {
    let ms = read_container(&args.input)?;
    let reference = args
        .reference
        .as_ref()
        .map(load_image)
        .transpose()
        .context("loading reference")?;
    let cfg = ReconConfig {
        method: args.method,
        iterations: args.iters,
        damping: args.df,
        denoiser: args.denoiser,
        lambda: args.lambda,
        init: args.init,
        seed: args.seed,
    };
    let rec = run_reconstruct(&ms, &cfg, reference.as_ref())?;
    save_image(&rec.image, &args.output)?;
    if args.method.is_iterative() {
        println!(
            "{} iterations of {}, D_F {}, denoiser {}, seed {}",
            cfg.iterations, cfg.method, cfg.damping, cfg.denoiser, cfg.seed
        );
    }
    if let Some(r) = &reference {
        let g = ms.grid();
        let r = r.crop(g.height(), g.width())?;
        // score the 8-bit image that was written
        let written = PixelImage::from_bytes(g.height(), g.width(), &rec.image.to_bytes())?;
        println!("{}", QualityReport::compute(&r, &written)?);
    }
    if let Some(path) = &args.trace {
        let mut w = csv::Writer::from_writer(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        );
        w.write_record(["iteration", "residual", "sigma", "psnr_db"])?;
        for row in &rec.trace {
            w.write_record([
                row.iteration.to_string(),
                format!("{:.6e}", row.residual),
                format!("{:.6}", row.sigma),
                row.psnr.map(format_psnr).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
    }
    println!("wrote {}", args.output.display());
    Ok(())
}
