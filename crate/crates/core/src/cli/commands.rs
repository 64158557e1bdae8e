use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use fdsc::codec::{bits_per_pixel, decode_image, encode_image, Container, Header, FLAG_CRC, HEADER_LEN, NUM_STREAMS, STREAM_NAMES};
use fdsc::eval::{bd_rate, eval_dataset, ms_ssim, psnr, read_rd_curve, to_8bit, write_rd_csv, BdInterp, MS_SSIM_MIN_SIDE};
use fdsc::image_io::{load_image, save_image};
use fdsc::model::{load_checkpoint, save_checkpoint, Model};
use fdsc::training::{synth_dataset, train_loop};

use super::plan::TrainPlan;
use super::{BdrateArgs, Cli, CliError, Command, DecodeArgs, EncodeArgs, EvalArgs, InspectArgs, Interp, SynthArgs, TrainArgs};

type Res = Result<(), CliError>;

pub fn run(cli: Cli) -> Res {
    if cli.device != "cpu" {
        return Err(CliError::Usage(format!("device {:?} is not available; only cpu is supported", cli.device)));
    }
    match cli.cmd {
        Command::Train(a) => train(a),
        Command::Encode(a) => encode(a),
        Command::Decode(a) => decode(a),
        Command::Eval(a) => eval(a),
        Command::Bdrate(a) => bdrate(a),
        Command::Inspect(a) => inspect(a),
        Command::Synth(a) => synth(a),
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

fn train(a: TrainArgs) -> Res {
    let file = a.config.as_deref().map(read_text).transpose()?;
    let plan = TrainPlan::build(&a, file.as_deref())?;
    log::info!("training run:\n{}", plan.to_kv().trim_end());

    let dataset = match &plan.data {
        Some(dir) => load_dir(dir)?,
        None => synth_dataset(plan.synth_seed.unwrap_or(plan.train.seed), plan.synth_images, plan.synth_size),
    };
    let log_path = a.log.clone().unwrap_or_else(|| a.out.with_extension("csv"));
    let mut log = BufWriter::new(fs::File::create(&log_path)?);
    let mut model = Model::new(&plan.model, plan.train.seed, plan.train.lambda)?;
    let report = train_loop(&mut model, &dataset, &plan.train, Some(&mut log))?;
    log.flush()?;
    save_checkpoint(&model, &a.out)?;

    let last = report.epochs.last().expect("at least one epoch");
    let mut out = io::stdout().lock();
    writeln!(out, "checkpoint={}", a.out.display())?;
    writeln!(out, "log={}", log_path.display())?;
    writeln!(out, "config_id={}", model.config_id())?;
    writeln!(out, "epochs={}", report.epochs.len())?;
    writeln!(out, "steps={}", report.step_losses.len())?;
    writeln!(out, "skipped_steps={}", report.skipped_steps)?;
    writeln!(out, "final_loss={:.6}", last.loss)?;
    writeln!(out, "final_bpp={:.6}", last.bpp)?;
    Ok(())
}

fn load_dir(dir: &Path) -> Result<Vec<fdsc::tensor::Tensor<f32>>, CliError> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| CliError::Usage(format!("cannot read data directory {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "ppm" | "pnm"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Usage(format!("no PNG/PPM images in {}", dir.display())));
    }
    Ok(paths.iter().map(|p| load_image(p)).collect::<Result<_, _>>()?)
}

fn encode(a: EncodeArgs) -> Res {
    let model = load_checkpoint(&a.model)?;
    let img = load_image(&a.image)?;
    let (_, _, h, w) = img.dims4();
    let bytes = encode_image(&model, &img, a.checksum)?.to_bytes();
    fs::write(&a.out, &bytes)?;
    let mut out = io::stdout().lock();
    writeln!(out, "bytes={}", bytes.len())?;
    writeln!(out, "bpp={:.6}", bits_per_pixel(bytes.len(), w, h))?;
    Ok(())
}

fn decode(a: DecodeArgs) -> Res {
    let bytes = fs::read(&a.stream)?;
    let model = load_checkpoint(&a.model)?;
    let rec = decode_image(&model, &bytes)?;
    save_image(&rec, &a.out)?;
    let (_, _, h, w) = rec.dims4();
    let mut out = io::stdout().lock();
    writeln!(out, "width={w}")?;
    writeln!(out, "height={h}")?;
    writeln!(out, "bpp={:.6}", bits_per_pixel(bytes.len(), w, h))?;
    if let Some(r) = &a.reference {
        let reference = load_image(r)?;
        if reference.shape() != rec.shape() {
            return Err(fdsc::Error::Image(format!(
                "reference is {:?}, decoded image is {:?}",
                reference.shape(),
                rec.shape()
            ))
            .into());
        }
        let (x, y) = (to_8bit(&reference), to_8bit(&rec));
        writeln!(out, "psnr={:.4}", psnr(&x, &y)?)?;
        if h.min(w) >= MS_SSIM_MIN_SIDE {
            writeln!(out, "msssim={:.6}", ms_ssim(&x, &y)?)?;
        }
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Res {
    let models = a.models.iter().map(|p| load_checkpoint(p)).collect::<Result<Vec<_>, _>>()?;
    let report = eval_dataset(&a.dir, &models)?;
    for s in &report.skipped {
        log::warn!("skipped {s}");
    }
    match &a.csv {
        Some(p) => {
            let mut f = BufWriter::new(fs::File::create(p)?);
            write_rd_csv(&report.points, &mut f)?;
            f.flush()?;
        }
        None => write_rd_csv(&report.points, &mut io::stdout().lock())?,
    }
    if let Some(p) = &a.json {
        let json = serde_json::to_string_pretty(&report).expect("report serializes");
        fs::write(p, json + "\n")?;
    }
    for m in &report.means {
        log::info!("lambda {}: {:.4} bpp, {:.3} dB over {} images", m.lambda, m.bpp, m.psnr, m.images);
    }
    Ok(())
}

fn bdrate(a: BdrateArgs) -> Res {
    let anchor = read_rd_curve(&read_text(&a.anchor)?)?;
    let test = read_rd_curve(&read_text(&a.test)?)?;
    let interp = match a.interp {
        Interp::Cubic => BdInterp::Cubic,
        Interp::Pchip => BdInterp::Pchip,
    };
    let v = bd_rate(&anchor, &test, interp)?;
    println!("{v:.4}");
    Ok(())
}

fn inspect(a: InspectArgs) -> Res {
    let bytes = fs::read(&a.stream)?;
    let header = Header::parse(&bytes).map_err(fdsc::Error::from)?;
    let ct = Container::from_bytes(&bytes).map_err(fdsc::Error::from)?;
    let crc = if header.flags & FLAG_CRC != 0 { 4 } else { 0 };
    let mut out = io::stdout().lock();
    writeln!(out, "file_bytes={}", bytes.len())?;
    writeln!(out, "header_bytes={HEADER_LEN}")?;
    writeln!(out, "version={}", header.version)?;
    writeln!(out, "config_id={}", header.config_id)?;
    writeln!(out, "lambda_index={}", header.lambda_index)?;
    writeln!(out, "flags={}", header.flags)?;
    writeln!(out, "width={}", header.orig_w)?;
    writeln!(out, "height={}", header.orig_h)?;
    writeln!(out, "padded_width={}", header.padded_w)?;
    writeln!(out, "padded_height={}", header.padded_h)?;
    for (name, s) in STREAM_NAMES.iter().zip(&ct.streams) {
        writeln!(out, "stream_{name}={}", s.len())?;
    }
    writeln!(out, "framing_bytes={}", 4 * NUM_STREAMS + crc)?;
    Ok(())
}

fn synth(a: SynthArgs) -> Res {
    if a.n == 0 || a.size == 0 {
        return Err(CliError::Usage("--n and --size must be positive".into()));
    }
    fs::create_dir_all(&a.out)?;
    let mut paths = Vec::with_capacity(a.n);
    for (i, img) in synth_dataset(a.seed, a.n, a.size).iter().enumerate() {
        let path = a.out.join(format!("synth_{i:04}.png"));
        save_image(img, &path)?;
        paths.push(path);
    }
    let mut out = io::stdout().lock();
    for p in paths {
        writeln!(out, "{}", p.display())?;
    }
    Ok(())
}
