use alloc::string::String;
use alloc::vec::Vec;

use super::BinaryMask;
use crate::error::{Error, Result};

/// COCO run-length mask: column-major runs, the first run counts zeros.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RleMask {
    pub height: usize,
    pub width: usize,
    pub counts: Vec<u32>,
}

impl RleMask {
    /// Validating constructor.
    pub fn new(height: usize, width: usize, counts: Vec<u32>) -> Result<Self> {
        let rle = Self {
            height,
            width,
            counts,
        };
        rle.validate()?;
        Ok(rle)
    }

    /// Checks the run invariants. Values built through deserialization are
    /// not validated until this is called.
    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::MalformedRle(alloc::format!(
                "size must be positive, got {}x{}",
                self.height,
                self.width
            )));
        }
        let total: u64 = self.counts.iter().map(|&c| u64::from(c)).sum();
        let expect = (self.height * self.width) as u64;
        if total != expect {
            return Err(Error::MalformedRle(alloc::format!(
                "counts sum to {total}, expected {expect}"
            )));
        }
        if let Some(i) = self.counts.iter().skip(1).position(|&c| c == 0) {
            return Err(Error::MalformedRle(alloc::format!(
                "zero-length run at position {}",
                i + 1
            )));
        }
        Ok(())
    }

    pub fn encode(mask: &BinaryMask) -> Self {
        let (h, w) = (mask.height(), mask.width());
        let mut counts = Vec::new();
        let mut current = false;
        let mut run = 0u32;
        for c in 0..w {
            for r in 0..h {
                let v = mask.get(r, c);
                if v != current {
                    counts.push(run);
                    run = 0;
                    current = v;
                }
                run += 1;
            }
        }
        counts.push(run);
        Self {
            height: h,
            width: w,
            counts,
        }
    }

    pub fn decode(&self) -> Result<BinaryMask> {
        self.validate()?;
        let (h, w) = (self.height, self.width);
        let mut bits = alloc::vec![false; h * w];
        let mut idx = 0usize;
        let mut value = false;
        for &run in &self.counts {
            if value {
                for k in idx..idx + run as usize {
                    bits[(k % h) * w + k / h] = true;
                }
            }
            idx += run as usize;
            value = !value;
        }
        BinaryMask::new(h, w, bits)
    }

    pub fn area(&self) -> u64 {
        self.counts.iter().skip(1).step_by(2).map(|&c| u64::from(c)).sum()
    }

    pub fn to_compact_string(&self) -> String {
        rle_to_string(&self.counts)
    }

    pub fn from_compact_string(s: &str, height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, rle_from_string(s)?)
    }
}

/// COCO compressed counts: each run (from the third on, as a delta to the run
/// two places back) in sign-extended 5-bit groups, `+48`, bit 5 = more.
pub fn rle_to_string(counts: &[u32]) -> String {
    let mut s = String::new();
    for (i, &c) in counts.iter().enumerate() {
        let mut x = i64::from(c);
        if i > 2 {
            x -= i64::from(counts[i - 2]);
        }
        loop {
            let mut group = (x & 0x1f) as u8;
            x >>= 5;
            let more = if group & 0x10 != 0 { x != -1 } else { x != 0 };
            if more {
                group |= 0x20;
            }
            s.push(char::from(group + 48));
            if !more {
                break;
            }
        }
    }
    s
}

/// Inverse of [`rle_to_string`]. Rejects bytes outside `48..=111`, dangling
/// continuations and runs that decode negative.
pub fn rle_from_string(s: &str) -> Result<Vec<u32>> {
    let bytes = s.as_bytes();
    let mut counts: Vec<u32> = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let mut x: i64 = 0;
        let mut shift = 0u32;
        loop {
            let Some(&b) = bytes.get(i) else {
                return Err(Error::MalformedRleString(String::from(
                    "string ends inside a continued value",
                )));
            };
            if !(48..=111).contains(&b) {
                return Err(Error::MalformedRleString(alloc::format!(
                    "byte {b:#04x} at offset {i} outside 48..=111"
                )));
            }
            if shift > 55 {
                return Err(Error::MalformedRleString(String::from("value too long")));
            }
            let group = i64::from(b - 48);
            i += 1;
            x |= (group & 0x1f) << shift;
            shift += 5;
            if group & 0x20 == 0 {
                if group & 0x10 != 0 {
                    x |= -1i64 << shift;
                }
                break;
            }
        }
        let k = counts.len();
        if k > 2 {
            x += i64::from(counts[k - 2]);
        }
        let run = u32::try_from(x).map_err(|_| {
            Error::MalformedRleString(alloc::format!("run {k} decodes to {x}"))
        })?;
        counts.push(run);
    }
    Ok(counts)
}

#[cfg(feature = "serde")]
mod serde_impl {
    use super::*;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize)]
    struct RleOut<'a> {
        size: [usize; 2],
        counts: &'a str,
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum CountsIn {
        Compact(String),
        Raw(Vec<u32>),
    }

    #[derive(Deserialize)]
    struct RleIn {
        size: [usize; 2],
        counts: CountsIn,
    }

    /// Serialized as the COCO object `{"size": [h, w], "counts": "<compact>"}`.
    impl Serialize for RleMask {
        fn serialize<S: Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
            let counts = self.to_compact_string();
            RleOut {
                size: [self.height, self.width],
                counts: &counts,
            }
            .serialize(serializer)
        }
    }

    /// Accepts both compact-string and raw-list counts. Run invariants are
    /// not checked here; see [`RleMask::validate`].
    impl<'de> Deserialize<'de> for RleMask {
        fn deserialize<D: Deserializer<'de>>(deserializer: D) -> core::result::Result<Self, D::Error> {
            let raw = RleIn::deserialize(deserializer)?;
            let counts = match raw.counts {
                CountsIn::Raw(c) => c,
                CountsIn::Compact(s) => rle_from_string(&s).map_err(D::Error::custom)?,
            };
            Ok(RleMask {
                height: raw.size[0],
                width: raw.size[1],
                counts,
            })
        }
    }
}
