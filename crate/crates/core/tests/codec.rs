use fdsc::codec::{decode_image, encode_image, latent_shapes, BitstreamError, Container, HEADER_LEN};
use fdsc::context::CrossContexts;
use fdsc::freq::{Band, ChannelSplit};
use fdsc::image_io::{crop, pad_replicate, round_up};
use fdsc::model::{Model, ModelConfig, LAMBDAS};
use fdsc::tensor::{Tape, Tensor};
use fdsc::Error;

fn small_config() -> ModelConfig {
    ModelConfig {
        n: 12,
        m: 12,
        split: ChannelSplit::new(1.0 / 3.0, 1.0 / 3.0).unwrap(),
        main_stages: 2,
        hyper_stages: 1,
        window: 4,
        cascaded_fusion: false,
        cross_contexts: CrossContexts::Full,
        adaptive_quant: true,
        max_side: 128,
    }
}

fn model(seed: u64, lambda: f64) -> Model {
    let mut m = Model::new(&small_config(), seed, lambda).unwrap();
    m.finalize();
    m
}

/// Smooth gradient with a sharp-edged box, values in [0, 1].
fn test_image(h: usize, w: usize) -> Tensor<f32> {
    Tensor::from_fn(&[1, 3, h, w], |i| {
        let (c, p) = (i / (h * w), i % (h * w));
        let (r, col) = (p / w, p % w);
        let inside = r > h / 4 && r < h / 2 && col > w / 3 && col < 2 * w / 3;
        if inside {
            0.9 - 0.3 * c as f32
        } else {
            (r as f32 / h as f32) * 0.5 + 0.1 * c as f32
        }
    })
}

#[test]
fn latent_shapes_match_the_transforms() {
    let m = model(1, LAMBDAS[3]);
    let (h, w) = (64, 96);
    let tape = Tape::inference();
    let y = m.net.analysis(&tape, &m.store, tape.constant(test_image(h, w))).unwrap();
    let z = m.net.hyper_analysis(&tape, &m.store, &y).unwrap();
    let (ys, zs) = latent_shapes(&m, h, w);
    for b in Band::ALL {
        assert_eq!(y.band(b).shape(), *ys.band(b), "{b:?} y");
        assert_eq!(z.band(b).shape(), *zs.band(b), "{b:?} z");
    }
}

#[test]
fn round_trip_is_bit_exact_and_matches_the_quantized_pass() {
    let m = model(2, LAMBDAS[2]);
    let (h, w) = (40, 70);
    let img = test_image(h, w);
    let enc = encode_image(&m, &img, false).unwrap();
    let bytes = enc.to_bytes();
    let dec = decode_image(&m, &bytes).unwrap();
    assert_eq!(dec.shape(), &[1, 3, h, w]);
    assert_eq!(dec.data(), enc.x_hat.data(), "decoder differs from encoder reconstruction");

    let p = m.config().pad_multiple();
    let padded = pad_replicate(&img, round_up(h, p), round_up(w, p));
    let pass = m.forward_quantized(&padded).unwrap();
    assert_eq!(crop(&pass.x_hat, h, w).data(), dec.data(), "bitstream differs from the quantized pass");

    // Estimated and actual sizes agree up to per-stream coder overhead.
    let payload_bits: f64 = Container::from_bytes(&bytes).unwrap().streams.iter().map(|s| 8.0 * s.len() as f64).sum();
    let est = pass.estimated_bits();
    assert!(
        (payload_bits - est).abs() <= 0.02 * est + 6.0 * 40.0,
        "actual {payload_bits} bits vs estimate {est}"
    );
}

#[test]
fn encoding_is_deterministic() {
    let m = model(3, LAMBDAS[0]);
    let img = test_image(32, 32);
    let a = encode_image(&m, &img, true).unwrap().to_bytes();
    let b = encode_image(&m, &img, true).unwrap().to_bytes();
    assert_eq!(a, b);
    let m2 = model(3, LAMBDAS[0]);
    assert_eq!(encode_image(&m2, &img, true).unwrap().to_bytes(), a);
}

#[test]
fn header_records_geometry_and_identity() {
    let m = model(4, LAMBDAS[5]);
    let bytes = encode_image(&m, &test_image(33, 65), true).unwrap().to_bytes();
    let c = Container::from_bytes(&bytes).unwrap();
    assert_eq!(&bytes[..4], b"FDSC");
    assert_eq!((c.header.orig_w, c.header.orig_h), (65, 33));
    assert_eq!((c.header.padded_w, c.header.padded_h), (96, 64));
    assert_eq!(c.header.lambda_index, 5);
    assert_eq!(c.header.config_id, m.config_id());
    assert!(bytes.len() > HEADER_LEN);
}

#[test]
fn unfinalized_model_refuses_to_code() {
    let m = Model::new(&small_config(), 5, LAMBDAS[1]).unwrap();
    let err = encode_image(&m, &test_image(32, 32), false).unwrap_err();
    assert!(matches!(err, Error::NotFinalized), "{err}");
    let fin = model(5, LAMBDAS[1]);
    let bytes = encode_image(&fin, &test_image(32, 32), false).unwrap().to_bytes();
    assert!(matches!(decode_image(&m, &bytes), Err(Error::NotFinalized)));
}

#[test]
fn oversized_image_is_rejected() {
    let m = model(6, LAMBDAS[1]);
    let err = encode_image(&m, &test_image(8, 129), false).unwrap_err();
    assert!(matches!(err, Error::ImageTooLarge { width: 129, .. }), "{err}");
}

#[test]
fn mismatched_model_is_reported_with_both_ids() {
    let m = model(7, LAMBDAS[2]);
    let bytes = encode_image(&m, &test_image(32, 32), false).unwrap().to_bytes();

    let mut other_cfg = small_config();
    other_cfg.cross_contexts = CrossContexts::HighToLow;
    let mut other = Model::new(&other_cfg, 7, LAMBDAS[2]).unwrap();
    other.finalize();
    assert_ne!(other.config_id(), m.config_id());
    match decode_image(&other, &bytes) {
        Err(Error::Bitstream(BitstreamError::HeaderMismatch(msg))) => {
            assert!(msg.contains(&format!("config-id {}", m.config_id())), "{msg}");
            assert!(msg.contains(&format!("config-id {}", other.config_id())), "{msg}");
        }
        r => panic!("expected header mismatch, got {:?}", r.map(|_| ())),
    }

    let wrong_lambda = model(7, LAMBDAS[4]);
    assert!(matches!(
        decode_image(&wrong_lambda, &bytes),
        Err(Error::Bitstream(BitstreamError::HeaderMismatch(_)))
    ));
}

#[test]
fn damaged_streams_give_errors_not_panics() {
    let m = model(8, LAMBDAS[3]);
    let bytes = encode_image(&m, &test_image(32, 48), true).unwrap().to_bytes();
    for cut in [3, 10, HEADER_LEN + 2, bytes.len() / 2, bytes.len() - 1] {
        let err = decode_image(&m, &bytes[..cut]).unwrap_err();
        assert!(matches!(err, Error::Bitstream(BitstreamError::Truncated(_))), "cut {cut}: {err}");
    }
    let mut flipped = bytes.clone();
    let mid = bytes.len() - 20;
    flipped[mid] ^= 0x10;
    assert!(matches!(
        decode_image(&m, &flipped),
        Err(Error::Bitstream(BitstreamError::Checksum { .. }))
    ));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(decode_image(&m, &bad), Err(Error::Bitstream(BitstreamError::BadMagic))));
}

#[test]
fn payload_damage_without_checksum_never_panics() {
    let m = model(9, LAMBDAS[3]);
    let bytes = encode_image(&m, &test_image(32, 32), false).unwrap().to_bytes();
    for pos in (HEADER_LEN + 4..bytes.len()).step_by(7) {
        let mut b = bytes.clone();
        b[pos] ^= 0xA5;
        let _ = decode_image(&m, &b);
    }
}
