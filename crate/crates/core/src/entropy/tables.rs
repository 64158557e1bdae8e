use super::gaussian::gaussian_mass;

/// Frequencies are integers summing to `1 << FREQ_BITS`.
pub const FREQ_BITS: u32 = 16;
pub const FREQ_TOTAL: u32 = 1 << FREQ_BITS;

/// Probability mass left outside a row's support (split over both tails).
pub const TAIL_MASS: f64 = 1e-9;

/// Upper bound on the number of in-support symbols of one row.
pub const MAX_ROW_SYMBOLS: usize = 8192;

/// `Φ⁻¹(1 − TAIL_MASS/2)`: support half-width in units of the scale.
const TAIL_Z: f64 = 6.109;

/// One coding table: symbols `offset .. offset + n` followed by an escape
/// symbol at index `n`. `cum` holds `n + 2` cumulative frequencies from 0 to
/// [`FREQ_TOTAL`]; every symbol has frequency ≥ 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CdfRow {
    pub offset: i32,
    pub cum: Vec<u32>,
}

impl CdfRow {
    /// Quantize `probs` (masses of `offset ..`) to integer frequencies; the
    /// mass missing from `probs` goes to the escape symbol.
    pub fn from_probs(offset: i32, probs: &[f64]) -> CdfRow {
        let n = probs.len();
        assert!(n >= 1 && n <= MAX_ROW_SYMBOLS, "row support of {n} symbols");
        let inside: f64 = probs.iter().sum();
        let escape = (1.0 - inside).max(0.0);
        let total = inside + escape;
        let budget = (FREQ_TOTAL as usize - (n + 1)) as f64;
        let mut freq: Vec<u32> = probs
            .iter()
            .chain(std::iter::once(&escape))
            .map(|&p| 1 + (p.max(0.0) / total * budget).floor() as u32)
            .collect();
        let used: u32 = freq.iter().sum();
        let (imax, _) = freq
            .iter()
            .enumerate()
            .max_by_key(|&(i, &f)| (f, std::cmp::Reverse(i)))
            .expect("non-empty row");
        freq[imax] += FREQ_TOTAL - used;
        let mut cum = Vec::with_capacity(n + 2);
        cum.push(0);
        let mut acc = 0;
        for f in freq {
            acc += f;
            cum.push(acc);
        }
        CdfRow { offset, cum }
    }

    /// Number of in-support symbols (the escape index).
    pub fn support(&self) -> usize {
        self.cum.len() - 2
    }

    pub fn freq(&self, idx: usize) -> u32 {
        self.cum[idx + 1] - self.cum[idx]
    }

    /// Quantized probability of table index `idx`.
    pub fn prob(&self, idx: usize) -> f64 {
        self.freq(idx) as f64 / FREQ_TOTAL as f64
    }

    /// Table index of symbol `k`, or `None` when `k` needs the escape.
    pub fn index_of(&self, k: i32) -> Option<usize> {
        let i = k as i64 - self.offset as i64;
        (i >= 0 && (i as usize) < self.support()).then_some(i as usize)
    }

    /// Index whose cumulative interval contains `target` (< FREQ_TOTAL).
    pub fn find(&self, target: u32) -> usize {
        self.cum.partition_point(|&c| c <= target) - 1
    }
}

/// 64 log-spaced scales from 0.02 to 256; coding scales snap to the nearest
/// entry in the log domain.
pub struct ScaleTable;

impl ScaleTable {
    pub const LEN: usize = 64;
    pub const MIN: f64 = 0.02;
    pub const MAX: f64 = 256.0;

    fn step() -> f64 {
        (Self::MAX / Self::MIN).ln() / (Self::LEN - 1) as f64
    }

    pub fn scale(i: usize) -> f64 {
        (Self::MIN.ln() + i as f64 * Self::step()).exp()
    }

    /// Nearest table index; out-of-range and non-finite scales clamp.
    pub fn index(s: f64) -> usize {
        if !(s > Self::MIN) {
            return 0;
        }
        let i = ((s.ln() - Self::MIN.ln()) / Self::step()).round();
        (i as usize).min(Self::LEN - 1)
    }

    /// Row for unit-grid coding of `k` under `N(mean, scale²) * U(−½, ½)`,
    /// with `scale` taken from entry `idx`.
    pub fn row(mean: f64, idx: usize) -> CdfRow {
        let s = Self::scale(idx);
        let center = if mean.is_finite() { mean.round().clamp(-1e9, 1e9) } else { 0.0 };
        let half = ((TAIL_Z * s + 1.0).ceil() as i64).min(MAX_ROW_SYMBOLS as i64 / 2 - 1);
        let lo = center as i64 - half;
        let probs: Vec<f64> = (lo..=center as i64 + half)
            .map(|k| gaussian_mass(k as f64, mean, s, 1.0))
            .collect();
        CdfRow::from_probs(lo as i32, &probs)
    }
}
