//! Image ⇄ container: padding, hyper-latent coding with the factorized
//! tables, and staged checkerboard coding of the main latents (high, mid,
//! low; anchors then non-anchors inside each band).

use super::{BitstreamError, Container, Header, RangeDecoder, RangeEncoder, FLAG_CRC, VERSION};
use crate::adaptive_quant::{dequantize, quantize_test, round_symbol};
use crate::context::{checkerboard, is_anchor};
use crate::entropy::{CdfRow, ScaleTable};
use crate::error::{Error, Result};
use crate::freq::{Band, Triple};
use crate::image_io::{crop, pad_replicate, round_up};
use crate::model::Model;
use crate::tensor::{Tape, Tensor, Var};

/// Latent shapes `[1, c, h, w]` of every band for a padded image.
pub fn latent_shapes(model: &Model, padded_h: usize, padded_w: usize) -> (Triple<Vec<usize>>, Triple<Vec<usize>>) {
    let cfg = model.config();
    let counts = cfg.m_counts();
    let mk = |b: Band, extra: usize| {
        let f = 1usize << (cfg.main_stages + b.level() as usize + extra);
        vec![1, counts[b.index()], padded_h / f, padded_w / f]
    };
    let y = Triple::new(Some(mk(Band::High, 0)), Some(mk(Band::Mid, 0)), Some(mk(Band::Low, 0)));
    let hs = cfg.hyper_stages;
    let z = Triple::new(Some(mk(Band::High, hs)), Some(mk(Band::Mid, hs)), Some(mk(Band::Low, hs)));
    (y, z)
}

fn check_size(model: &Model, w: usize, h: usize) -> Result<()> {
    let max = model.config().max_side as usize;
    if w == 0 || h == 0 {
        return Err(Error::Shape(format!("empty image {w}x{h}")));
    }
    if w > max || h > max {
        return Err(Error::ImageTooLarge {
            width: w as u32,
            height: h as u32,
            max: max as u32,
        });
    }
    Ok(())
}

/// Coding row of the unit-grid symbol `k = y/Δ` under `N(μ, σ²)`.
#[inline]
fn latent_row(mu: f32, sigma: f32, delta: f32) -> CdfRow {
    let d = delta as f64;
    ScaleTable::row(mu as f64 / d, ScaleTable::index(sigma as f64 / d))
}

/// Runs the staged parameter computation shared by encoder and decoder.
/// `code` is called once per latent element, in bitstream order, with the
/// band, flat index, coding row and the symbol slot (filled on encode,
/// written on decode). Returns the dequantized latents.
fn code_latents<'t>(
    model: &Model,
    tape: &'t Tape<f32>,
    psi: &Triple<Var<'t, f32>>,
    delta: &Triple<Tensor<f32>>,
    symbols: &mut [Vec<i32>; 3],
    mut code: impl FnMut(Band, usize, &CdfRow, &mut i32) -> Result<()>,
) -> Result<Triple<Tensor<f32>>> {
    let ctx = &model.net.context;
    let store = &model.store;
    let mut decoded: Triple<Var<'t, f32>> = Triple::default();
    for band in Band::ALL {
        let bi = band.index();
        let d = delta.band(band);
        let shape = d.shape().to_vec();
        let (c, h, w) = (shape[1], shape[2], shape[3]);
        let cross = ctx.cross(tape, store, band, &decoded, &shape)?;
        let intra_net = &ctx.intra[bi];
        for anchors in [true, false] {
            let intra = if anchors {
                intra_net.anchor_stage(tape, &shape)
            } else {
                let mask = checkerboard::<f32>(h, w, true);
                let known = dequantize(&symbols[bi], d);
                let known = Tensor::from_fn(&shape, |i| known.data()[i] * mask.data()[i % (h * w)]);
                intra_net.forward(tape, store, tape.constant(known))
            };
            let p = ctx.params(tape, store, band, intra, &cross, *psi.band(band))?;
            let (mu, sigma) = (p.mu.value(), p.sigma.value());
            for ch in 0..c {
                for i in 0..h {
                    for j in 0..w {
                        if is_anchor(i, j) != anchors {
                            continue;
                        }
                        let idx = (ch * h + i) * w + j;
                        let row = latent_row(mu.data()[idx], sigma.data()[idx], d.data()[idx]);
                        code(band, idx, &row, &mut symbols[bi][idx])?;
                    }
                }
            }
        }
        decoded.set(band, Some(tape.constant(dequantize(&symbols[bi], d))));
    }
    Ok(decoded.values())
}

/// Encoded image plus what the encoder knows about it.
#[derive(Clone, Debug)]
pub struct Encoded {
    pub container: Container,
    /// Reconstruction the decoder will produce (cropped).
    pub x_hat: Tensor<f32>,
}

impl Encoded {
    pub fn to_bytes(&self) -> Vec<u8> {
        self.container.to_bytes()
    }
}

/// Encode a `[1, 3, h, w]` image in `[0, 1]`.
pub fn encode_image(model: &Model, img: &Tensor<f32>, checksum: bool) -> Result<Encoded> {
    if img.rank() != 4 || img.shape()[0] != 1 || img.shape()[1] != 3 {
        return Err(Error::Shape(format!("expected a [1, 3, h, w] image, got {:?}", img.shape())));
    }
    let (_, _, h, w) = img.dims4();
    check_size(model, w, h)?;
    if !model.is_finalized() {
        return Err(Error::NotFinalized);
    }
    let p = model.config().pad_multiple();
    let (ph, pw) = (round_up(h, p), round_up(w, p));
    let x = pad_replicate(img, ph, pw);

    let tape = Tape::inference();
    let net = &model.net;
    let store = &model.store;
    let y = net.analysis(&tape, store, tape.constant(x))?;
    let z = net.hyper_analysis(&tape, store, &y)?;
    let z_hat = z.map(|_, v| tape.constant(v.value().map(|e| e.round())));

    let mut streams: [Vec<u8>; 6] = Default::default();
    for band in Band::ALL {
        let rows = model.z_rows(band)?;
        let zv = z_hat.band(band).value();
        let (_, c, zh, zw) = zv.dims4();
        let mut enc = RangeEncoder::new();
        for ch in 0..c {
            for &v in &zv.data()[ch * zh * zw..(ch + 1) * zh * zw] {
                enc.encode_symbol(&rows[ch], round_symbol(v));
            }
        }
        streams[band.index()] = enc.finish();
    }

    let psi = net.hyper_synthesis(&tape, store, &z_hat);
    let delta = net.deltas(&tape, store, &psi).values();
    let mut symbols = Band::ALL.map(|b| quantize_test(&y.band(b).value(), delta.band(b)).0);
    let mut encoders = Band::ALL.map(|_| RangeEncoder::new());
    let y_hat = code_latents(model, &tape, &psi, &delta, &mut symbols, |band, _, row, k| {
        encoders[band.index()].encode_symbol(row, *k);
        Ok(())
    })?;
    for (i, enc) in encoders.into_iter().enumerate() {
        streams[3 + i] = enc.finish();
    }

    let x_hat = reconstruct(model, &tape, &y_hat, h, w)?;
    let header = Header {
        version: VERSION,
        config_id: model.config_id(),
        lambda_index: model.lambda_index(),
        flags: if checksum { FLAG_CRC } else { 0 },
        orig_w: w as u32,
        orig_h: h as u32,
        padded_w: pw as u32,
        padded_h: ph as u32,
    };
    Ok(Encoded {
        container: Container { header, streams },
        x_hat,
    })
}

fn reconstruct(model: &Model, tape: &Tape<f32>, y_hat: &Triple<Tensor<f32>>, h: usize, w: usize) -> Result<Tensor<f32>> {
    let y = y_hat.map(|_, t| tape.constant(t.clone()));
    let raw = model.net.synthesis(tape, &model.store, &y)?;
    Ok(crop(&raw.value().map(|v| v.clamp(0.0, 1.0)), h, w))
}

/// Check that a header can be decoded by `model`.
pub fn check_header(model: &Model, hd: &Header) -> Result<()> {
    if hd.config_id != model.config_id() || hd.lambda_index != model.lambda_index() {
        return Err(BitstreamError::HeaderMismatch(format!(
            "stream has config-id {} / lambda-index {}, model has config-id {} / lambda-index {}",
            hd.config_id,
            hd.lambda_index,
            model.config_id(),
            model.lambda_index()
        ))
        .into());
    }
    let p = model.config().pad_multiple() as u32;
    let dims_ok = hd.orig_w > 0
        && hd.orig_h > 0
        && hd.padded_w == round_up(hd.orig_w as usize, p as usize) as u32
        && hd.padded_h == round_up(hd.orig_h as usize, p as usize) as u32;
    if !dims_ok {
        return Err(BitstreamError::Corrupt(format!(
            "inconsistent dimensions {}x{} padded to {}x{} (multiple {p})",
            hd.orig_w, hd.orig_h, hd.padded_w, hd.padded_h
        ))
        .into());
    }
    check_size(model, hd.orig_w as usize, hd.orig_h as usize)
}

/// Entropy-decoded content of a container, before synthesis.
#[derive(Clone, Debug)]
pub struct DecodedLatents {
    /// Hyper-latent symbols per band, channel-major.
    pub z_symbols: [Vec<i32>; 3],
    /// Main-latent symbols per band, `[c, h, w]` order.
    pub y_symbols: [Vec<i32>; 3],
    pub y_hat: Triple<Tensor<f32>>,
}

/// Decode a parsed container to a `[1, 3, h, w]` image.
pub fn decode_container(model: &Model, ct: &Container) -> Result<Tensor<f32>> {
    let lat = decode_latents(model, ct)?;
    let tape = Tape::inference();
    let hd = &ct.header;
    reconstruct(model, &tape, &lat.y_hat, hd.orig_h as usize, hd.orig_w as usize)
}

/// Run the entropy decoder over every substream.
pub fn decode_latents(model: &Model, ct: &Container) -> Result<DecodedLatents> {
    let hd = &ct.header;
    check_header(model, hd)?;
    if !model.is_finalized() {
        return Err(Error::NotFinalized);
    }
    let (ph, pw) = (hd.padded_h as usize, hd.padded_w as usize);
    let (y_shapes, z_shapes) = latent_shapes(model, ph, pw);

    let tape = Tape::inference();
    let mut z_hat: Triple<Var<'_, f32>> = Triple::default();
    let mut z_symbols: [Vec<i32>; 3] = Default::default();
    for band in Band::ALL {
        let rows = model.z_rows(band)?;
        let shape = z_shapes.band(band);
        let n: usize = shape.iter().product();
        let per = n / shape[1];
        let mut dec = RangeDecoder::new(&ct.streams[band.index()])?;
        let mut data = Vec::with_capacity(n);
        for i in 0..n {
            let k = dec.decode_symbol(&rows[i / per])?;
            z_symbols[band.index()].push(k);
            data.push(k as f32);
        }
        z_hat.set(band, Some(tape.constant(Tensor::new(shape, data))));
    }

    let net = &model.net;
    let psi = net.hyper_synthesis(&tape, &model.store, &z_hat);
    let delta = net.deltas(&tape, &model.store, &psi).values();
    for band in Band::ALL {
        if delta.band(band).shape() != y_shapes.band(band).as_slice() {
            return Err(Error::Shape(format!("{} step map has an unexpected shape", band.name())));
        }
    }
    let mut symbols = Band::ALL.map(|b| vec![0i32; delta.band(b).numel()]);
    let mut decoders = [
        RangeDecoder::new(&ct.streams[3])?,
        RangeDecoder::new(&ct.streams[4])?,
        RangeDecoder::new(&ct.streams[5])?,
    ];
    let y_hat = code_latents(model, &tape, &psi, &delta, &mut symbols, |band, _, row, k| {
        *k = decoders[band.index()].decode_symbol(row)?;
        Ok(())
    })?;
    Ok(DecodedLatents {
        z_symbols,
        y_symbols: symbols,
        y_hat,
    })
}

/// Parse and decode container bytes.
pub fn decode_image(model: &Model, bytes: &[u8]) -> Result<Tensor<f32>> {
    decode_container(model, &Container::from_bytes(bytes)?)
}

/// Rate of an encoded image in bits per original pixel.
pub fn bits_per_pixel(bytes: usize, w: usize, h: usize) -> f64 {
    8.0 * bytes as f64 / (w * h) as f64
}
