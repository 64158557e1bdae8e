//! Frequency bands, channel splits and three-band containers.

use crate::error::{shape_err, Error, Result};
use crate::tensor::{Float, Tensor, Var};

/// A frequency band. Band `b` is stored at `1 / 2^b` of the high band's
/// spatial resolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Band {
    High,
    Mid,
    Low,
}

impl Band {
    pub const ALL: [Band; 3] = [Band::High, Band::Mid, Band::Low];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    /// log2 of the downsampling factor relative to the high band.
    #[inline]
    pub fn level(self) -> u32 {
        self as u32
    }

    pub fn name(self) -> &'static str {
        match self {
            Band::High => "high",
            Band::Mid => "mid",
            Band::Low => "low",
        }
    }

    pub fn short(self) -> char {
        match self {
            Band::High => 'H',
            Band::Mid => 'M',
            Band::Low => 'L',
        }
    }
}

/// Fractions of channels given to the low (`alpha`) and mid (`beta`) bands;
/// the high band receives the rest.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelSplit {
    pub alpha: f64,
    pub beta: f64,
}

impl ChannelSplit {
    /// Everything in the high band (image input / output).
    pub const HIGH_ONLY: ChannelSplit = ChannelSplit {
        alpha: 0.0,
        beta: 0.0,
    };

    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha >= 0.0 && beta >= 0.0 && alpha + beta <= 1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "channel split needs 0 <= alpha, 0 <= beta, alpha + beta <= 1 (got {alpha}, {beta})"
            )));
        }
        Ok(ChannelSplit { alpha, beta })
    }

    /// Two-band split used by the octave baselines (no mid band).
    pub fn two_band(alpha: f64) -> Result<Self> {
        Self::new(alpha, 0.0)
    }

    /// Channel counts `[high, mid, low]` for `c` channels. Low and mid take
    /// `floor(alpha c)` and `floor(beta c)`; high absorbs the remainder.
    pub fn counts(self, c: usize) -> [usize; 3] {
        // the epsilon keeps exact products such as (1/3)·192 from flooring to 63
        let low = ((self.alpha * c as f64) + 1e-9).floor() as usize;
        let mid = ((self.beta * c as f64) + 1e-9).floor() as usize;
        let low = low.min(c);
        let mid = mid.min(c - low);
        [c - low - mid, mid, low]
    }
}

/// Up to three co-registered band values. A band is absent when its channel
/// count is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct Triple<V> {
    bands: [Option<V>; 3],
}

impl<V> Default for Triple<V> {
    fn default() -> Self {
        Triple {
            bands: [None, None, None],
        }
    }
}

impl<V> Triple<V> {
    pub fn new(high: Option<V>, mid: Option<V>, low: Option<V>) -> Self {
        Triple {
            bands: [high, mid, low],
        }
    }

    pub fn high_only(v: V) -> Self {
        Triple::new(Some(v), None, None)
    }

    pub fn get(&self, b: Band) -> Option<&V> {
        self.bands[b.index()].as_ref()
    }

    pub fn get_mut(&mut self, b: Band) -> Option<&mut V> {
        self.bands[b.index()].as_mut()
    }

    pub fn set(&mut self, b: Band, v: Option<V>) {
        self.bands[b.index()] = v;
    }

    pub fn take(&mut self, b: Band) -> Option<V> {
        self.bands[b.index()].take()
    }

    /// The value of band `b`, which must be present.
    pub fn band(&self, b: Band) -> &V {
        self.get(b)
            .unwrap_or_else(|| panic!("{} band is absent", b.name()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (Band, &V)> {
        Band::ALL
            .into_iter()
            .filter_map(move |b| self.get(b).map(|v| (b, v)))
    }

    pub fn present(&self) -> impl Iterator<Item = Band> + '_ {
        Band::ALL.into_iter().filter(move |&b| self.get(b).is_some())
    }

    pub fn map<U>(&self, mut f: impl FnMut(Band, &V) -> U) -> Triple<U> {
        Triple {
            bands: [
                self.bands[0].as_ref().map(|v| f(Band::High, v)),
                self.bands[1].as_ref().map(|v| f(Band::Mid, v)),
                self.bands[2].as_ref().map(|v| f(Band::Low, v)),
            ],
        }
    }

    pub fn try_map<U, E>(
        &self,
        mut f: impl FnMut(Band, &V) -> std::result::Result<U, E>,
    ) -> std::result::Result<Triple<U>, E> {
        let mut out = Triple::default();
        for b in Band::ALL {
            if let Some(v) = self.get(b) {
                out.set(b, Some(f(b, v)?));
            }
        }
        Ok(out)
    }

    pub fn into_array(self) -> [Option<V>; 3] {
        self.bands
    }
}

/// Band shapes of a triple: `(channels, height, width)` per present band.
pub type BandShapes = Triple<(usize, usize, usize)>;

impl<'t, T: Float> Triple<Var<'t, T>> {
    pub fn shapes(&self) -> BandShapes {
        self.map(|_, v| {
            let s = v.shape();
            (s[1], s[2], s[3])
        })
    }

    pub fn values(&self) -> Triple<Tensor<T>> {
        self.map(|_, v| (*v.value()).clone())
    }
}

impl<T: Float> Triple<Tensor<T>> {
    pub fn shapes(&self) -> BandShapes {
        self.map(|_, v| {
            let (_, c, h, w) = v.dims4();
            (c, h, w)
        })
    }
}

/// Validate the 1 : 1/2 : 1/4 resolution law and the channel counts of a
/// triple. Returns the batch size and the implied high-band `(h, w)`.
pub fn check_triple<T: Float>(
    x: &Triple<Var<'_, T>>,
    counts: [usize; 3],
) -> Result<(usize, usize, usize)> {
    let mut reference: Option<(usize, usize, usize)> = None;
    for b in Band::ALL {
        let want = counts[b.index()];
        match (x.get(b), want) {
            (None, 0) => {}
            (None, _) => return shape_err(format!("{} band missing ({want} channels expected)", b.name())),
            (Some(_), 0) => return shape_err(format!("{} band present but split assigns it no channels", b.name())),
            (Some(v), _) => {
                let s = v.shape();
                if s.len() != 4 {
                    return shape_err(format!("{} band is not NCHW: {s:?}", b.name()));
                }
                if s[1] != want {
                    return shape_err(format!("{} band has {} channels, expected {want}", b.name(), s[1]));
                }
                let f = 1usize << b.level();
                let implied = (s[0], s[2] * f, s[3] * f);
                match reference {
                    None => reference = Some(implied),
                    Some(r) if r != implied => {
                        return shape_err(format!(
                            "{} band at {}x{} breaks the 1:1/2:1/4 resolution law (high band {}x{})",
                            b.name(), s[2], s[3], r.1, r.2
                        ))
                    }
                    Some(_) => {}
                }
            }
        }
    }
    reference.ok_or_else(|| Error::Shape("triple has no bands".into()))
}
