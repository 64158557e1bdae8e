use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use fdsc::codec::encode_image;
use fdsc::image_io::{load_image, to_rgb8};
use fdsc::model::load_checkpoint;
use tempfile::TempDir;

fn fdsc(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdsc"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn field(out: &str, key: &str) -> Option<String> {
    out.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")).map(str::to_string))
}

const TINY: &[&str] = &["--desk", "--epochs", "1", "--set", "crop=64", "--set", "synth_images=2", "--set", "synth_size=64"];

/// A trained desk checkpoint and a few 64² test images, built once.
struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let dir = TempDir::new().unwrap();
        let o = fdsc(&["synth", "--n", "3", "--size", "64", "--seed", "11", "--out", "imgs"], dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
        let mut args = TINY.to_vec();
        args.extend(["--seed", "5", "--out", "m.ckpt"]);
        let o = fdsc(&[&["train"], &args[..]].concat(), dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
        Fixture { dir }
    })
}

#[test]
fn train_without_configuration_is_a_usage_error() {
    let d = TempDir::new().unwrap();
    let o = fdsc(&["train", "--out", "x.ckpt"], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--config"));
    assert!(!d.path().join("x.ckpt").exists());
}

#[test]
fn conflicting_and_invalid_settings_are_rejected_up_front() {
    let d = TempDir::new().unwrap();
    let o = fdsc(&["train", "--desk", "--full", "--out", "x.ckpt"], d.path());
    assert_eq!(o.status.code(), Some(2));

    fs::write(d.path().join("c.txt"), "preset=full\n").unwrap();
    let o = fdsc(&["train", "--desk", "--config", "c.txt", "--out", "x.ckpt"], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("conflicts"));

    let o = fdsc(&["train", "--full", "--lambda", "0.02", "--out", "x.ckpt"], d.path());
    assert_eq!(o.status.code(), Some(2));
    for l in ["0.0018", "0.0035", "0.0067", "0.013", "0.025", "0.0483"] {
        assert!(stderr(&o).contains(l), "{}", stderr(&o));
    }

    let o = fdsc(&["train", "--desk", "--set", "colour=blue", "--out", "x.ckpt"], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("colour"));

    let o = fdsc(&["train", "--desk", "--set", "crop=100", "--out", "x.ckpt"], d.path());
    assert_eq!(o.status.code(), Some(2));

    let o = fdsc(&["--device", "cuda", "synth", "--out", "s"], d.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!d.path().join("s").exists());
    assert!(!d.path().join("x.ckpt").exists());
}

#[test]
fn repeated_training_with_one_seed_gives_identical_artifacts() {
    let d = TempDir::new().unwrap();
    let run = |name: &str| {
        let mut args = vec!["train"];
        args.extend(TINY);
        let out = format!("{name}.ckpt");
        args.extend(["--seed", "9", "--out", &out]);
        let o = fdsc(&args, d.path());
        assert!(o.status.success(), "{}", stderr(&o));
        assert_eq!(field(&stdout(&o), "epochs").as_deref(), Some("1"));
        (
            fs::read(d.path().join(format!("{name}.csv"))).unwrap(),
            fs::read(d.path().join(out)).unwrap(),
        )
    };
    let (log_a, ck_a) = run("a");
    let (log_b, ck_b) = run("b");
    assert_eq!(log_a, log_b);
    assert_eq!(ck_a, ck_b);
    let log = String::from_utf8(log_a).unwrap();
    assert!(log.starts_with("epoch,L,D_mse,R_bpp"));
    assert_eq!(log.lines().count(), 2);
}

#[test]
fn config_file_keys_and_overrides_apply() {
    let d = TempDir::new().unwrap();
    fs::write(
        d.path().join("run.cfg"),
        "# tiny run\npreset=desk\nepochs=1\ncrop=64\nsynth_images=2\nsynth_size=64\nlambda=0.0018\ncross_contexts=1\n",
    )
    .unwrap();
    let o = fdsc(&["train", "--config", "run.cfg", "--set", "adaptive_quant=false", "--out", "c.ckpt", "--log", "c.log"], d.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let m = load_checkpoint(&d.path().join("c.ckpt")).unwrap();
    assert_eq!(m.lambda, 0.0018);
    assert!(!m.config().adaptive_quant);
    assert_eq!(m.config().cross_contexts.id(), 1);
    assert_eq!(m.config().n, 64);
    assert!(d.path().join("c.log").exists());
}

#[test]
fn encode_decode_round_trip_matches_the_library() {
    let f = fixture();
    let dir = f.dir.path();
    let o = fdsc(&["encode", "imgs/synth_0001.png", "--model", "m.ckpt", "--out", "a.fdsc"], dir);
    assert!(o.status.success(), "{}", stderr(&o));
    let bytes = fs::read(f.path("a.fdsc")).unwrap();
    assert_eq!(field(&stdout(&o), "bytes"), Some(bytes.len().to_string()));

    let o = fdsc(&["decode", "a.fdsc", "--model", "m.ckpt", "--out", "r.png", "--ref", "imgs/synth_0001.png"], dir);
    assert!(o.status.success(), "{}", stderr(&o));
    let psnr: f64 = field(&stdout(&o), "psnr").unwrap().parse().unwrap();
    assert!(psnr.is_finite() && psnr > 0.0);

    let model = load_checkpoint(&f.path("m.ckpt")).unwrap();
    let img = load_image(&f.path("imgs/synth_0001.png")).unwrap();
    let enc = encode_image(&model, &img, false).unwrap();
    assert_eq!(enc.to_bytes(), bytes);
    let decoded = image::open(f.path("r.png")).unwrap().to_rgb8();
    assert_eq!(decoded, to_rgb8(&enc.x_hat));
}

#[test]
fn truncated_and_mismatched_streams_fail_with_clear_messages() {
    let f = fixture();
    let dir = f.dir.path();
    let o = fdsc(&["encode", "imgs/synth_0002.png", "--model", "m.ckpt", "--out", "b.fdsc"], dir);
    assert!(o.status.success());
    let bytes = fs::read(f.path("b.fdsc")).unwrap();
    fs::write(f.path("b_cut.fdsc"), &bytes[..bytes.len() / 2]).unwrap();
    let o = fdsc(&["decode", "b_cut.fdsc", "--model", "m.ckpt", "--out", "cut.png"], dir);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("truncated stream"), "{}", stderr(&o));

    let mut args = vec!["train"];
    args.extend(TINY);
    args.extend(["--set", "cross_contexts=2", "--out", "other.ckpt"]);
    assert!(fdsc(&args, dir).status.success());
    let other = load_checkpoint(&f.path("other.ckpt")).unwrap().config_id();
    let o = fdsc(&["decode", "b.fdsc", "--model", "other.ckpt", "--out", "x.png"], dir);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("config-id 1") && err.contains(&format!("config-id {other}")), "{err}");
}

#[test]
fn inspect_accounts_for_every_byte_without_a_model() {
    let f = fixture();
    let dir = f.dir.path();
    for (name, extra) in [("plain.fdsc", None), ("crc.fdsc", Some("--checksum"))] {
        let mut args = vec!["encode", "imgs/synth_0000.png", "--model", "m.ckpt", "--out", name];
        args.extend(extra);
        assert!(fdsc(&args, dir).status.success());
        let o = fdsc(&["inspect", name], dir);
        assert!(o.status.success(), "{}", stderr(&o));
        let out = stdout(&o);
        let num = |k: &str| field(&out, k).unwrap().parse::<usize>().unwrap();
        let streams: usize = ["zH", "zM", "zL", "yH", "yM", "yL"].iter().map(|s| num(&format!("stream_{s}"))).sum();
        assert_eq!(num("file_bytes"), fs::metadata(f.path(name)).unwrap().len() as usize);
        assert_eq!(streams + num("framing_bytes"), num("file_bytes") - num("header_bytes"));
        assert_eq!(num("config_id"), 1);
        assert_eq!(num("width"), 64);
        assert_eq!(num("flags"), usize::from(extra.is_some()));
    }
    let o = fdsc(&["inspect", "imgs/synth_0000.png"], dir);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("magic"));
}

#[test]
fn bdrate_of_identical_curves_is_zero() {
    let d = TempDir::new().unwrap();
    let csv = "image,lambda,bpp,psnr,msssim\n\
               a,0.0018,0.10,28.0,\nb,0.0018,0.14,29.0,\n\
               a,0.0067,0.30,32.0,\nb,0.0067,0.34,33.0,\n\
               a,0.025,0.70,36.0,\nb,0.025,0.78,37.0,\n\
               a,0.0483,1.10,38.5,\nb,0.0483,1.20,39.5,\n";
    fs::write(d.path().join("a.csv"), csv).unwrap();
    fs::write(d.path().join("b.csv"), csv).unwrap();
    for interp in ["cubic", "pchip"] {
        let o = fdsc(&["bdrate", "a.csv", "b.csv", "--interp", interp], d.path());
        assert!(o.status.success(), "{}", stderr(&o));
        let v: f64 = stdout(&o).trim().parse().unwrap();
        assert_eq!(v, 0.0);
    }
    fs::write(d.path().join("short.csv"), "bpp,psnr\n0.1,30\n0.2,31\n").unwrap();
    let o = fdsc(&["bdrate", "a.csv", "short.csv"], d.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn synth_is_deterministic_under_a_seed() {
    let d = TempDir::new().unwrap();
    for (out, seed) in [("a", "4"), ("b", "4"), ("c", "5")] {
        let o = fdsc(&["synth", "--n", "3", "--size", "48", "--seed", seed, "--out", out], d.path());
        assert!(o.status.success());
        assert_eq!(stdout(&o).lines().count(), 3);
    }
    let read = |dir: &str, i: usize| fs::read(d.path().join(dir).join(format!("synth_{i:04}.png"))).unwrap();
    for i in 0..3 {
        assert_eq!(read("a", i), read("b", i));
        assert_ne!(read("a", i), read("c", i));
    }
}

#[test]
fn eval_writes_rd_csv_and_summary() {
    let f = fixture();
    let dir = f.dir.path();
    let o = fdsc(&["eval", "imgs", "--model", "m.ckpt", "--json", "summary.json"], dir);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("image,lambda,bpp,psnr,msssim"));
    assert_eq!(lines.count(), 3);
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(f.path("summary.json")).unwrap()).unwrap();
    assert_eq!(json["means"][0]["images"], 3);
    assert!(json["means"][0]["bpp"].as_f64().unwrap() > 0.0);
}
