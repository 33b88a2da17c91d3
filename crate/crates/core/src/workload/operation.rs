use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// The four transcoding operation types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    Bitrate,
    Framerate,
    Resolution,
    Codec,
}

impl OpKind {
    pub const ALL: [OpKind; 4] = [
        OpKind::Bitrate,
        OpKind::Framerate,
        OpKind::Resolution,
        OpKind::Codec,
    ];
    pub const VIC: [OpKind; 3] = [OpKind::Bitrate, OpKind::Framerate, OpKind::Resolution];

    /// Video information conversion (bit-rate, frame-rate, resolution).
    pub fn is_vic(self) -> bool {
        !matches!(self, OpKind::Codec)
    }

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Bitrate => "bitrate",
            OpKind::Framerate => "framerate",
            OpKind::Resolution => "resolution",
            OpKind::Codec => "codec",
        }
    }

    fn parameter_count(self) -> usize {
        match self {
            OpKind::Codec => Codec::ALL.len(),
            _ => 5,
        }
    }

    fn tag(self) -> u8 {
        match self {
            OpKind::Bitrate => b'B',
            OpKind::Framerate => b'S',
            OpKind::Resolution => b'R',
            OpKind::Codec => b'C',
        }
    }
}

impl fmt::Display for OpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OpKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bitrate" => Ok(OpKind::Bitrate),
            "framerate" => Ok(OpKind::Framerate),
            "resolution" => Ok(OpKind::Resolution),
            "codec" => Ok(OpKind::Codec),
            other => Err(Error::InvalidOperation(format!(
                "unknown operation kind `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Codec {
    Mpeg4,
    Hevc,
    Vp9,
}

impl Codec {
    pub const ALL: [Codec; 3] = [Codec::Mpeg4, Codec::Hevc, Codec::Vp9];

    pub fn name(self) -> &'static str {
        match self {
            Codec::Mpeg4 => "mpeg4",
            Codec::Hevc => "hevc",
            Codec::Vp9 => "vp9",
        }
    }
}

pub const BITRATES_KBPS: [u32; 5] = [384, 512, 768, 1024, 1536];
pub const FRAMERATES_FPS: [u32; 5] = [10, 15, 20, 30, 40];
pub const RESOLUTIONS: [(u32, u32); 5] = [
    (352, 288),
    (680, 320),
    (720, 480),
    (1280, 800),
    (1920, 1080),
];

/// One transcoding operation: a kind together with one of its allowed
/// parameter values. Only the 18 valid combinations can be constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Operation {
    kind: OpKind,
    index: u8,
}

impl Operation {
    pub fn bitrate(kbps: u32) -> Result<Self> {
        Self::lookup(
            OpKind::Bitrate,
            BITRATES_KBPS.iter().position(|&b| b == kbps),
        )
        .ok_or_else(|| Error::InvalidOperation(format!("unsupported bit-rate {kbps}K")))
    }

    pub fn framerate(fps: u32) -> Result<Self> {
        Self::lookup(
            OpKind::Framerate,
            FRAMERATES_FPS.iter().position(|&r| r == fps),
        )
        .ok_or_else(|| Error::InvalidOperation(format!("unsupported frame-rate {fps}")))
    }

    pub fn resolution(width: u32, height: u32) -> Result<Self> {
        Self::lookup(
            OpKind::Resolution,
            RESOLUTIONS.iter().position(|&r| r == (width, height)),
        )
        .ok_or_else(|| Error::InvalidOperation(format!("unsupported resolution {width}x{height}")))
    }

    pub fn codec(codec: Codec) -> Self {
        let index = Codec::ALL.iter().position(|&c| c == codec).unwrap() as u8;
        Operation {
            kind: OpKind::Codec,
            index,
        }
    }

    fn lookup(kind: OpKind, index: Option<usize>) -> Option<Self> {
        index.map(|i| Operation {
            kind,
            index: i as u8,
        })
    }

    /// The `i`-th parameter of `kind` in table order.
    pub fn nth(kind: OpKind, i: usize) -> Option<Self> {
        (i < kind.parameter_count()).then_some(Operation {
            kind,
            index: i as u8,
        })
    }

    /// All operations of one kind, in table order.
    pub fn of_kind(kind: OpKind) -> impl Iterator<Item = Operation> {
        (0..kind.parameter_count()).map(move |i| Operation {
            kind,
            index: i as u8,
        })
    }

    /// All 18 operations.
    pub fn all() -> impl Iterator<Item = Operation> {
        OpKind::ALL.into_iter().flat_map(Operation::of_kind)
    }

    pub fn kind(&self) -> OpKind {
        self.kind
    }

    pub fn codec_param(&self) -> Option<Codec> {
        match self.kind {
            OpKind::Codec => Some(Codec::ALL[self.index as usize]),
            _ => None,
        }
    }

    /// Parameter literal as written in workload files (`512K`, `30`, `1280x800`, `hevc`).
    pub fn parameter_literal(&self) -> String {
        let i = self.index as usize;
        match self.kind {
            OpKind::Bitrate => format!("{}K", BITRATES_KBPS[i]),
            OpKind::Framerate => FRAMERATES_FPS[i].to_string(),
            OpKind::Resolution => format!("{}x{}", RESOLUTIONS[i].0, RESOLUTIONS[i].1),
            OpKind::Codec => Codec::ALL[i].name().to_string(),
        }
    }

    pub fn parse(kind: &str, parameter: &str) -> Result<Self> {
        let kind: OpKind = kind.parse()?;
        let p = parameter.trim().to_ascii_lowercase();
        let bad = || Error::InvalidOperation(format!("bad {kind} parameter `{parameter}`"));
        match kind {
            OpKind::Bitrate => {
                let digits = p.strip_suffix('k').unwrap_or(&p);
                Operation::bitrate(digits.parse().map_err(|_| bad())?)
            }
            OpKind::Framerate => {
                let digits = p.strip_suffix("fps").unwrap_or(&p).trim();
                Operation::framerate(digits.parse().map_err(|_| bad())?)
            }
            OpKind::Resolution => {
                let (w, h) = p
                    .split_once('x')
                    .or_else(|| p.split_once('×'))
                    .ok_or_else(bad)?;
                Operation::resolution(
                    w.trim().parse().map_err(|_| bad())?,
                    h.trim().parse().map_err(|_| bad())?,
                )
            }
            OpKind::Codec => match p.replace(['-', '.'], "").as_str() {
                "mpeg4" => Ok(Operation::codec(Codec::Mpeg4)),
                "hevc" | "h265" | "h265hevc" => Ok(Operation::codec(Codec::Hevc)),
                "vp9" => Ok(Operation::codec(Codec::Vp9)),
                _ => Err(bad()),
            },
        }
    }

    /// Canonical byte encoding of (kind, parameter) used by the signature hash.
    pub(crate) fn canonical_bytes(&self) -> [u8; 2] {
        [self.kind.tag(), self.index]
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.parameter_literal())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eighteen_distinct_operations() {
        let all: Vec<_> = Operation::all().collect();
        assert_eq!(all.len(), 18);
        let mut dedup = all.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 18);
        for kind in OpKind::VIC {
            assert_eq!(Operation::of_kind(kind).count(), 5);
        }
        assert_eq!(Operation::of_kind(OpKind::Codec).count(), 3);
    }

    #[test]
    fn literals_round_trip() {
        for op in Operation::all() {
            let parsed = Operation::parse(op.kind().name(), &op.parameter_literal()).unwrap();
            assert_eq!(parsed, op);
        }
    }

    #[test]
    fn parse_accepts_common_spellings() {
        assert_eq!(
            Operation::parse("bitrate", "512k").unwrap(),
            Operation::bitrate(512).unwrap()
        );
        assert_eq!(
            Operation::parse("Framerate", "30fps").unwrap(),
            Operation::framerate(30).unwrap()
        );
        assert_eq!(
            Operation::parse("resolution", "1920×1080").unwrap(),
            Operation::resolution(1920, 1080).unwrap()
        );
        assert_eq!(
            Operation::parse("codec", "H.265").unwrap(),
            Operation::codec(Codec::Hevc)
        );
    }

    #[test]
    fn rejects_values_outside_parameter_table() {
        assert!(Operation::bitrate(600).is_err());
        assert!(Operation::framerate(60).is_err());
        assert!(Operation::resolution(1280, 720).is_err());
        assert!(Operation::parse("codec", "av1").is_err());
        assert!(Operation::parse("scale", "2").is_err());
    }
}
