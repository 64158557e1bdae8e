//! Quality metrics, BD-rate and directory evaluation.

mod bdrate;
mod metrics;

pub use bdrate::{bd_rate, BdInterp};
pub use metrics::{bpp, ms_ssim, mse, psnr, psnr_from_mse, to_8bit, MS_SSIM_MIN_SIDE, MS_SSIM_WEIGHTS, PSNR_CAP};

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::codec::{decode_image, encode_image};
use crate::error::{Error, Result};
use crate::image_io::load_image;
use crate::model::Model;

/// One coded image at one rate point.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RdPoint {
    pub image: String,
    pub lambda: f64,
    pub config_id: u8,
    pub bpp: f64,
    pub psnr: f64,
    /// `None` for images below the MS-SSIM minimum size.
    pub msssim: Option<f64>,
}

/// Mean point of one model over the dataset.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeanPoint {
    pub lambda: f64,
    pub config_id: u8,
    pub images: usize,
    pub bpp: f64,
    pub psnr: f64,
    pub msssim: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BdEntry {
    pub anchor: u8,
    pub test: u8,
    pub bd_rate_percent: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct EvalReport {
    pub points: Vec<RdPoint>,
    pub means: Vec<MeanPoint>,
    /// Between every pair of model families (same config-id) with at least four λ points.
    pub bd_rates: Vec<BdEntry>,
    pub skipped: Vec<String>,
}

/// Code `img` with `model` and measure the decoded result.
pub fn evaluate_image(model: &Model, name: &str, img: &crate::tensor::Tensor<f32>) -> Result<RdPoint> {
    let (_, _, h, w) = img.dims4();
    let bytes = encode_image(model, img, false)?.to_bytes();
    let rec = to_8bit(&decode_image(model, &bytes)?);
    let reference = to_8bit(img);
    let msssim = if h.min(w) >= MS_SSIM_MIN_SIDE {
        Some(ms_ssim(&reference, &rec)?)
    } else {
        None
    };
    Ok(RdPoint {
        image: name.to_string(),
        lambda: model.lambda,
        config_id: model.config_id(),
        bpp: bpp(bytes.len(), w, h),
        psnr: psnr(&reference, &rec)?,
        msssim,
    })
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "ppm" | "pnm"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Eval(format!("no PNG/PPM images in {}", dir.display())));
    }
    Ok(files)
}

/// Evaluate every PNG/PPM image in `dir` with every model. Unreadable files
/// are skipped and listed in the report.
pub fn eval_dataset(dir: &Path, models: &[Model]) -> Result<EvalReport> {
    if models.is_empty() {
        return Err(Error::Eval("no models given".into()));
    }
    let mut report = EvalReport::default();
    let mut images = Vec::new();
    for path in list_images(dir)? {
        let name = path.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned());
        match load_image(&path) {
            Ok(img) => images.push((name, img)),
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                report.skipped.push(format!("{name}: {e}"));
            }
        }
    }
    if images.is_empty() {
        return Err(Error::Eval(format!("no decodable images in {}", dir.display())));
    }
    for model in models {
        let mut sum = (0.0, 0.0, 0.0);
        let mut all_ssim = true;
        for (name, img) in &images {
            let p = evaluate_image(model, name, img)?;
            sum.0 += p.bpp;
            sum.1 += p.psnr;
            match p.msssim {
                Some(v) => sum.2 += v,
                None => all_ssim = false,
            }
            report.points.push(p);
        }
        let n = images.len() as f64;
        report.means.push(MeanPoint {
            lambda: model.lambda,
            config_id: model.config_id(),
            images: images.len(),
            bpp: sum.0 / n,
            psnr: sum.1 / n,
            msssim: all_ssim.then_some(sum.2 / n),
        });
    }
    report.bd_rates = family_bd_rates(&report.means);
    Ok(report)
}

/// Pairwise BD-rates between model families (grouped by config-id).
pub fn family_bd_rates(means: &[MeanPoint]) -> Vec<BdEntry> {
    let mut families: BTreeMap<u8, Vec<(f64, f64)>> = BTreeMap::new();
    for m in means {
        families.entry(m.config_id).or_default().push((m.bpp, m.psnr));
    }
    let curves: Vec<_> = families.into_iter().filter(|(_, c)| c.len() >= 4).collect();
    let mut out = Vec::new();
    for (i, (ida, a)) in curves.iter().enumerate() {
        for (idb, b) in curves.iter().skip(i + 1) {
            if let Ok(v) = bd_rate(a, b, BdInterp::Cubic) {
                out.push(BdEntry {
                    anchor: *ida,
                    test: *idb,
                    bd_rate_percent: v,
                });
            }
        }
    }
    out
}

pub const RD_CSV_HEADER: &str = "image,lambda,bpp,psnr,msssim";

/// Per-image CSV (`image,lambda,bpp,psnr,msssim`).
pub fn write_rd_csv(points: &[RdPoint], w: &mut dyn Write) -> Result<()> {
    writeln!(w, "{RD_CSV_HEADER}")?;
    for p in points {
        let ms = p.msssim.map_or_else(String::new, |v| format!("{v:.6}"));
        writeln!(w, "{},{},{:.6},{:.4},{}", p.image, p.lambda, p.bpp, p.psnr, ms)?;
    }
    Ok(())
}

/// Read `(bpp, psnr)` from an RD CSV. Rows sharing a λ are averaged, so a
/// per-image file yields one point per λ; a file without a `lambda` column
/// is taken row by row.
pub fn read_rd_curve(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::Eval("empty RD curve file".into()))?
        .split(',')
        .map(str::trim)
        .collect();
    let col = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
    let (Some(ib), Some(ip)) = (col("bpp"), col("psnr")) else {
        return Err(Error::Eval("RD curve needs bpp and psnr columns".into()));
    };
    let il = col("lambda");
    let mut groups: Vec<(String, f64, f64, usize)> = Vec::new();
    for (n, line) in lines.enumerate() {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let num = |i: usize| -> Result<f64> {
            f.get(i)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Eval(format!("row {}: bad number in column {}", n + 2, i + 1)))
        };
        let (b, p) = (num(ib)?, num(ip)?);
        let key = il.map_or_else(|| n.to_string(), |i| f.get(i).unwrap_or(&"").to_string());
        match groups.iter_mut().find(|g| g.0 == key) {
            Some(g) => {
                g.1 += b;
                g.2 += p;
                g.3 += 1;
            }
            None => groups.push((key, b, p, 1)),
        }
    }
    Ok(groups.into_iter().map(|(_, b, p, n)| (b / n as f64, p / n as f64)).collect())
}
