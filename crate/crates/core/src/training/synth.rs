//! Synthetic screen-content patches: flat fields, window frames, 1-px grids,
//! bar charts and bitmap glyph text.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::tensor::Tensor;

const GLYPH_W: usize = 5;
const GLYPH_H: usize = 7;
const GLYPHS: usize = 48;

type Rgb = [f32; 3];

/// Fixed pseudo-font: the same bitmaps for every call, so text repeats.
fn font() -> Vec<[u8; GLYPH_H]> {
    let mut r = ChaCha8Rng::seed_from_u64(0x5C_F0_47);
    (0..GLYPHS)
        .map(|_| {
            let mut g = [0u8; GLYPH_H];
            // a vertical stem or a bowl plus random strokes
            let stem = r.gen_range(0..GLYPH_W);
            for row in g.iter_mut() {
                *row |= 1 << stem;
            }
            for _ in 0..3 {
                let y = r.gen_range(0..GLYPH_H);
                g[y] |= ((1u8 << GLYPH_W) - 1) & r.gen::<u8>();
            }
            g
        })
        .collect()
}

struct Canvas {
    w: usize,
    h: usize,
    px: Vec<Rgb>,
}

impl Canvas {
    fn fill(&mut self, x0: usize, y0: usize, x1: usize, y1: usize, c: Rgb) {
        for y in y0.min(self.h)..y1.min(self.h) {
            for x in x0.min(self.w)..x1.min(self.w) {
                self.px[y * self.w + x] = c;
            }
        }
    }

    fn frame(&mut self, x0: usize, y0: usize, x1: usize, y1: usize, c: Rgb) {
        self.fill(x0, y0, x1, y0 + 1, c);
        self.fill(x0, y1.saturating_sub(1), x1, y1, c);
        self.fill(x0, y0, x0 + 1, y1, c);
        self.fill(x1.saturating_sub(1), y0, x1, y1, c);
    }

    fn glyph(&mut self, g: &[u8; GLYPH_H], x0: usize, y0: usize, scale: usize, c: Rgb) {
        for (gy, bits) in g.iter().enumerate() {
            for gx in 0..GLYPH_W {
                if bits >> gx & 1 == 1 {
                    let (x, y) = (x0 + gx * scale, y0 + gy * scale);
                    self.fill(x, y, x + scale, y + scale, c);
                }
            }
        }
    }
}

fn color<R: Rng>(rng: &mut R) -> Rgb {
    const UI: [Rgb; 8] = [
        [1.0, 1.0, 1.0],
        [0.94, 0.94, 0.94],
        [0.12, 0.12, 0.14],
        [0.0, 0.47, 0.84],
        [0.85, 0.2, 0.2],
        [0.2, 0.65, 0.3],
        [0.98, 0.75, 0.2],
        [0.5, 0.5, 0.52],
    ];
    if rng.gen_bool(0.7) {
        UI[rng.gen_range(0..UI.len())]
    } else {
        [rng.gen(), rng.gen(), rng.gen()]
    }
}

fn contrast(c: Rgb) -> Rgb {
    let luma = 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2];
    if luma > 0.5 {
        [0.05, 0.05, 0.08]
    } else {
        [0.97, 0.97, 0.97]
    }
}

fn text_block<R: Rng>(cv: &mut Canvas, rng: &mut R, font: &[[u8; GLYPH_H]], area: (usize, usize, usize, usize), bg: Rgb) {
    let (x0, y0, x1, y1) = area;
    let scale = if rng.gen_bool(0.75) { 1 } else { 2 };
    let (cw, lh) = ((GLYPH_W + 1) * scale, (GLYPH_H + 3) * scale);
    let fg = if rng.gen_bool(0.8) { contrast(bg) } else { color(rng) };
    let mut y = y0 + 2;
    while y + lh <= y1 {
        let mut x = x0 + 2 + rng.gen_range(0..3) * cw;
        let line_end = x1.saturating_sub(rng.gen_range(0..(x1 - x0) / 3 + 1));
        while x + cw <= line_end {
            let word = rng.gen_range(2..9);
            for _ in 0..word {
                if x + cw > line_end {
                    break;
                }
                cv.glyph(&font[rng.gen_range(0..font.len())], x, y, scale, fg);
                x += cw;
            }
            x += cw;
        }
        y += lh;
        if rng.gen_bool(0.15) {
            y += lh;
        }
    }
}

/// A `[1, 3, size, size]` screen-content patch with values in `[0, 1]`.
pub fn synth_sc_patch<R: Rng>(rng: &mut R, size: usize) -> Tensor<f32> {
    let font = font();
    let bg = color(rng);
    let mut cv = Canvas {
        w: size,
        h: size,
        px: vec![bg; size * size],
    };
    let windows = rng.gen_range(1..=3);
    for _ in 0..windows {
        let ww = rng.gen_range(size / 3..=size.max(4) - 2);
        let wh = rng.gen_range(size / 3..=size.max(4) - 2);
        let x0 = rng.gen_range(0..=size - ww);
        let y0 = rng.gen_range(0..=size - wh);
        let (x1, y1) = (x0 + ww, y0 + wh);
        let body = color(rng);
        let title = color(rng);
        let bar = (size / 16).max(4);
        cv.fill(x0, y0, x1, y1, body);
        cv.fill(x0, y0, x1, y0 + bar, title);
        cv.frame(x0, y0, x1, y1, contrast(body));
        let inner = (x0 + 2, y0 + bar + 2, x1.saturating_sub(2), y1.saturating_sub(2));
        if inner.2 <= inner.0 + 16 || inner.3 <= inner.1 + 16 {
            continue;
        }
        match rng.gen_range(0..4) {
            0 | 1 => text_block(&mut cv, rng, &font, inner, body),
            2 => {
                // table: 1-px grid with some text in cells
                let line = contrast(body);
                let step = rng.gen_range(8..=24);
                let (cx0, cy0, cx1, cy1) = inner;
                let mut y = cy0;
                while y < cy1 {
                    cv.fill(cx0, y, cx1, y + 1, line);
                    y += step;
                }
                let mut x = cx0;
                while x < cx1 {
                    cv.fill(x, cy0, x + 1, cy1, line);
                    x += step * 3;
                }
                if step >= GLYPH_H + 3 {
                    let mut y = cy0 + 2;
                    while y + GLYPH_H < cy1 {
                        let mut x = cx0 + 2;
                        while x + GLYPH_W < cx1 {
                            if rng.gen_bool(0.5) {
                                cv.glyph(&font[rng.gen_range(0..font.len())], x, y, 1, line);
                            }
                            x += GLYPH_W + 1;
                        }
                        y += step;
                    }
                }
            }
            _ => {
                // bar chart on a baseline
                let (cx0, cy0, cx1, cy1) = inner;
                let bars = rng.gen_range(3..=8);
                let slot = (cx1 - cx0) / bars;
                let fill = color(rng);
                for b in 0..bars {
                    let top = rng.gen_range(cy0..cy1);
                    let x = cx0 + b * slot + slot / 4;
                    cv.fill(x, top, x + (slot / 2).max(1), cy1, fill);
                }
                cv.fill(cx0, cy1 - 1, cx1, cy1, contrast(body));
            }
        }
    }
    if rng.gen_bool(0.5) {
        // a smooth icon-like gradient tile
        let s = rng.gen_range(8..=(size / 4).max(9));
        let (x0, y0) = (rng.gen_range(0..=size - s.min(size)), rng.gen_range(0..=size - s.min(size)));
        let (a, b) = (color(rng), color(rng));
        for y in y0..(y0 + s).min(size) {
            let t = (y - y0) as f32 / s as f32;
            for x in x0..(x0 + s).min(size) {
                cv.px[y * size + x] = [0, 1, 2].map(|c| a[c] * (1.0 - t) + b[c] * t);
            }
        }
    }
    Tensor::from_fn(&[1, 3, size, size], |i| {
        let (c, p) = (i / (size * size), i % (size * size));
        cv.px[p][c].clamp(0.0, 1.0)
    })
}

/// `n` patches drawn in order from one ChaCha8 stream seeded with `seed`.
pub fn synth_dataset(seed: u64, n: usize, size: usize) -> Vec<Tensor<f32>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| synth_sc_patch(&mut rng, size)).collect()
}
