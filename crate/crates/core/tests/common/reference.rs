//! Fixed reference data: MS-SSIM pairs and values, BD-rate oracle.

// Deterministic pairs shared with tests/data/msssim_reference.py.
pub fn ref_image(h: usize, w: usize, seed: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(3 * h * w);
    for c in 0..3 {
        for i in 0..h {
            for j in 0..w {
                let v = ((i * 7 + seed) / 9) as f64 * 0.13
                    + ((j * 3 + c * 5) / 11) as f64 * 0.07
                    + 0.05 * (i as f64 * 0.3 + j as f64 * 0.11 * (c + 1) as f64 + seed as f64).sin();
                out.push(v.rem_euclid(1.0));
            }
        }
    }
    out
}

pub fn ref_noise(n: usize, seed: u64, amp: f64) -> Vec<f64> {
    let mut s = (seed * 2_654_435_761) % (1 << 32);
    (0..n)
        .map(|_| {
            s = (s * 1_664_525 + 1_013_904_223) % (1 << 32);
            (s as f64 / 4_294_967_296.0 - 0.5) * 2.0 * amp
        })
        .collect()
}

pub const MS_SSIM_REFERENCE: [(usize, usize, u64, f64, f64); 5] = [
    (176, 192, 1, 0.05, 0.9983807578759057),
    (161, 200, 2, 0.1, 0.9935166750059089),
    (256, 256, 3, 0.02, 0.9997332226745964),
    (199, 171, 4, 0.2, 0.9764124683858558),
    (161, 333, 5, 0.3, 0.948546240004009),
];

pub const ANCHOR: [(f64, f64); 4] = [(0.2, 30.0), (0.4, 33.0), (0.8, 36.0), (1.6, 39.0)];

pub fn scaled(c: &[(f64, f64)], f: f64) -> Vec<(f64, f64)> {
    c.iter().map(|&(r, q)| (r * f, q)).collect()
}

/// Independent route: Lagrange form of the interpolating cubic through the
/// four (psnr, log10 rate) points, integrated by composite Simpson.
pub fn oracle_bd(anchor: &[(f64, f64)], test: &[(f64, f64)]) -> f64 {
    let li = |pts: &[(f64, f64)], x: f64| -> f64 {
        let mut s = 0.0;
        for i in 0..pts.len() {
            let mut l = 1.0;
            for j in 0..pts.len() {
                if i != j {
                    l *= (x - pts[j].1) / (pts[i].1 - pts[j].1);
                }
            }
            s += l * pts[i].0.log10();
        }
        s
    };
    let lo = anchor[0].1.max(test[0].1);
    let hi = anchor[anchor.len() - 1].1.min(test[test.len() - 1].1);
    let n = 2000;
    let hstep = (hi - lo) / n as f64;
    let mut acc = 0.0;
    for k in 0..=n {
        let x = lo + k as f64 * hstep;
        let wgt = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += wgt * (li(test, x) - li(anchor, x));
    }
    let mean = acc * hstep / 3.0 / (hi - lo);
    (10f64.powf(mean) - 1.0) * 100.0
}
