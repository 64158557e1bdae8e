use thiserror::Error;

/// Failures while parsing or validating a `.fdsc` container.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BitstreamError {
    #[error("bad magic (not an FDSC container)")]
    BadMagic,
    #[error("unsupported container version {0}")]
    Version(u8),
    #[error("header mismatch: {0}")]
    HeaderMismatch(String),
    #[error("truncated stream: {0}")]
    Truncated(String),
    #[error("checksum mismatch (stored {stored:08x}, computed {computed:08x})")]
    Checksum { stored: u32, computed: u32 },
    #[error("corrupt stream: {0}")]
    Corrupt(String),
}

pub const MAGIC: [u8; 4] = *b"FDSC";
pub const VERSION: u8 = 1;
/// Magic, four one-byte fields and four big-endian u32 dimensions.
pub const HEADER_LEN: usize = 24;
pub const NUM_STREAMS: usize = 6;
/// Flags bit 0: a CRC-32 of all preceding bytes trails the container.
pub const FLAG_CRC: u8 = 1;

/// Substream order inside the container.
pub const STREAM_NAMES: [&str; NUM_STREAMS] = ["zH", "zM", "zL", "yH", "yM", "yL"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Header {
    pub version: u8,
    pub config_id: u8,
    pub lambda_index: u8,
    pub flags: u8,
    pub orig_w: u32,
    pub orig_h: u32,
    pub padded_w: u32,
    pub padded_h: u32,
}

impl Header {
    pub fn write(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&[self.version, self.config_id, self.lambda_index, self.flags]);
        for v in [self.orig_w, self.orig_h, self.padded_w, self.padded_h] {
            out.extend_from_slice(&v.to_be_bytes());
        }
    }

    pub fn parse(b: &[u8]) -> Result<Header, BitstreamError> {
        if b.len() < 4 || b[..4] != MAGIC {
            return Err(if b.len() < 4 && MAGIC.starts_with(b) {
                BitstreamError::Truncated(format!("{} bytes, header needs {HEADER_LEN}", b.len()))
            } else {
                BitstreamError::BadMagic
            });
        }
        if b.len() < HEADER_LEN {
            return Err(BitstreamError::Truncated(format!("{} bytes, header needs {HEADER_LEN}", b.len())));
        }
        if b[4] != VERSION {
            return Err(BitstreamError::Version(b[4]));
        }
        let u = |i: usize| u32::from_be_bytes(b[i..i + 4].try_into().unwrap());
        Ok(Header {
            version: b[4],
            config_id: b[5],
            lambda_index: b[6],
            flags: b[7],
            orig_w: u(8),
            orig_h: u(12),
            padded_w: u(16),
            padded_h: u(20),
        })
    }
}

/// Header plus the six substreams (zH, zM, zL, yH, yM, yL).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Container {
    pub header: Header,
    pub streams: [Vec<u8>; NUM_STREAMS],
}

impl Container {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.byte_len());
        self.header.write(&mut out);
        for s in &self.streams {
            out.extend_from_slice(&(s.len() as u32).to_be_bytes());
            out.extend_from_slice(s);
        }
        if self.header.flags & FLAG_CRC != 0 {
            let crc = crc32fast::hash(&out);
            out.extend_from_slice(&crc.to_be_bytes());
        }
        out
    }

    /// Serialized size in bytes.
    pub fn byte_len(&self) -> usize {
        let crc = if self.header.flags & FLAG_CRC != 0 { 4 } else { 0 };
        HEADER_LEN + self.streams.iter().map(|s| 4 + s.len()).sum::<usize>() + crc
    }

    pub fn from_bytes(b: &[u8]) -> Result<Container, BitstreamError> {
        let header = Header::parse(b)?;
        let mut pos = HEADER_LEN;
        let mut streams: [Vec<u8>; NUM_STREAMS] = Default::default();
        for (i, s) in streams.iter_mut().enumerate() {
            let name = STREAM_NAMES[i];
            let len_bytes = b
                .get(pos..pos + 4)
                .ok_or_else(|| BitstreamError::Truncated(format!("missing length of substream {name}")))?;
            let len = u32::from_be_bytes(len_bytes.try_into().unwrap()) as usize;
            pos += 4;
            let body = b.get(pos..pos.saturating_add(len)).ok_or_else(|| {
                BitstreamError::Truncated(format!(
                    "substream {name} declares {len} bytes, {} available",
                    b.len() - pos
                ))
            })?;
            *s = body.to_vec();
            pos += len;
        }
        if header.flags & FLAG_CRC != 0 {
            let stored = b
                .get(pos..pos + 4)
                .ok_or_else(|| BitstreamError::Truncated("missing checksum trailer".into()))?;
            let stored = u32::from_be_bytes(stored.try_into().unwrap());
            let computed = crc32fast::hash(&b[..pos]);
            if stored != computed {
                return Err(BitstreamError::Checksum { stored, computed });
            }
            pos += 4;
        }
        if pos != b.len() {
            return Err(BitstreamError::Corrupt(format!(
                "{} trailing bytes after the last substream",
                b.len() - pos
            )));
        }
        Ok(Container { header, streams })
    }
}
