//! Feature rows for merge cases and the on-disk dataset format.
//!
//! A merge case is described by the static properties of its segment plus
//! how many bit-rate (B), frame-rate (S) and resolution (R) sub-tasks it
//! contains, and which codec conversions it includes. VIC parameter values
//! are dropped on purpose so that the model generalizes to unseen values.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::workload::{Codec, OpKind, Operation, VideoMeta, MAX_MERGE_DEGREE};

pub const FEATURE_COUNT: usize = 11;

pub const CSV_HEADER: [&str; FEATURE_COUNT + 1] = [
    "duration_s",
    "size_kb",
    "framerate",
    "width",
    "height",
    "b_count",
    "s_count",
    "r_count",
    "mpeg4",
    "vp9",
    "hevc",
    "saving",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureVector {
    pub duration_s: f64,
    pub size_kb: f64,
    pub framerate: f64,
    pub width: f64,
    pub height: f64,
    pub b_count: u32,
    pub s_count: u32,
    pub r_count: u32,
    pub mpeg4: bool,
    pub vp9: bool,
    pub hevc: bool,
}

/// Operation composition of a merge case, ignoring the segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CompositionKey {
    pub b_count: u32,
    pub s_count: u32,
    pub r_count: u32,
    pub mpeg4: bool,
    pub vp9: bool,
    pub hevc: bool,
}

impl CompositionKey {
    pub fn degree(&self) -> u32 {
        self.b_count
            + self.s_count
            + self.r_count
            + self.mpeg4 as u32
            + self.vp9 as u32
            + self.hevc as u32
    }
}

impl FeatureVector {
    pub fn key(&self) -> CompositionKey {
        CompositionKey {
            b_count: self.b_count,
            s_count: self.s_count,
            r_count: self.r_count,
            mpeg4: self.mpeg4,
            vp9: self.vp9,
            hevc: self.hevc,
        }
    }

    /// Number of sub-tasks in the merge case.
    pub fn degree(&self) -> u32 {
        self.key().degree()
    }

    /// Column order matches [`CSV_HEADER`].
    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.duration_s,
            self.size_kb,
            self.framerate,
            self.width,
            self.height,
            self.b_count as f64,
            self.s_count as f64,
            self.r_count as f64,
            self.mpeg4 as u8 as f64,
            self.vp9 as u8 as f64,
            self.hevc as u8 as f64,
        ]
    }
}

/// Encode a merge case. Counts are order-free and VIC parameters are
/// discarded.
pub fn encode(video: &VideoMeta, ops: &[Operation]) -> Result<FeatureVector> {
    if ops.is_empty() || ops.len() > MAX_MERGE_DEGREE {
        return Err(Error::InvalidGroup(format!(
            "cannot encode a group of {} operations",
            ops.len()
        )));
    }
    let mut fv = FeatureVector {
        duration_s: video.duration_s(),
        size_kb: video.size_kb(),
        framerate: video.framerate(),
        width: video.width() as f64,
        height: video.height() as f64,
        b_count: 0,
        s_count: 0,
        r_count: 0,
        mpeg4: false,
        vp9: false,
        hevc: false,
    };
    for op in ops {
        match op.kind() {
            OpKind::Bitrate => fv.b_count += 1,
            OpKind::Framerate => fv.s_count += 1,
            OpKind::Resolution => fv.r_count += 1,
            OpKind::Codec => match op.codec_param() {
                Some(Codec::Mpeg4) => fv.mpeg4 = true,
                Some(Codec::Vp9) => fv.vp9 = true,
                Some(Codec::Hevc) => fv.hevc = true,
                None => unreachable!("codec operation without codec parameter"),
            },
        }
    }
    Ok(fv)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: FeatureVector,
    /// Fraction of execution time saved by merging.
    pub target: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Self {
        Dataset { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.target).collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.samples
            .iter()
            .map(|s| s.features.to_array().to_vec())
            .collect()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv_to(file).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })
    }

    pub fn write_csv_to(&self, out: impl Write) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(CSV_HEADER)?;
        for s in &self.samples {
            let f = &s.features;
            // `{}` on f64 prints the shortest string that parses back to the same value.
            wtr.write_record([
                f.duration_s.to_string(),
                f.size_kb.to_string(),
                f.framerate.to_string(),
                f.width.to_string(),
                f.height.to_string(),
                f.b_count.to_string(),
                f.s_count.to_string(),
                f.r_count.to_string(),
                (f.mpeg4 as u8).to_string(),
                (f.vp9 as u8).to_string(),
                (f.hevc as u8).to_string(),
                s.target.to_string(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::io("<dataset>", e))?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv_from(file).map_err(|e| e.at_path(path))
    }

    pub fn read_csv_from(input: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(input);
        let mut records = rdr.records();
        let header = records
            .next()
            .ok_or_else(|| Error::parse(1, "missing header row"))??;
        if header.iter().ne(CSV_HEADER.iter().copied()) {
            return Err(Error::parse(
                1,
                format!(
                    "header must be `{}`, found `{}`",
                    CSV_HEADER.join(","),
                    header.iter().collect::<Vec<_>>().join(",")
                ),
            ));
        }
        let mut samples = Vec::new();
        for record in records {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            samples.push(parse_row(&record, line)?);
        }
        Ok(Dataset { samples })
    }
}

impl std::str::FromStr for FeatureVector {
    type Err = Error;

    /// Parse the eleven feature columns, comma separated, in CSV order.
    fn from_str(s: &str) -> Result<Self> {
        let record: csv::StringRecord = s.split(',').map(str::trim).collect();
        if record.len() != FEATURE_COUNT {
            return Err(Error::InvalidArgument(format!(
                "expected {FEATURE_COUNT} comma-separated features ({}), found {}",
                CSV_HEADER[..FEATURE_COUNT].join(","),
                record.len()
            )));
        }
        parse_features(&record, 1).map_err(|e| match e {
            Error::Parse { message, .. } => Error::InvalidArgument(message),
            other => other,
        })
    }
}

fn parse_row(record: &csv::StringRecord, line: u64) -> Result<Sample> {
    if record.len() != CSV_HEADER.len() {
        return Err(Error::parse(
            line,
            format!(
                "expected {} columns, found {}",
                CSV_HEADER.len(),
                record.len()
            ),
        ));
    }
    let features = parse_features(record, line)?;
    let target: f64 = record[FEATURE_COUNT].parse().map_err(|_| {
        Error::parse(
            line,
            format!("saving: not a number: `{}`", &record[FEATURE_COUNT]),
        )
    })?;
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::TargetRange {
            path: None,
            line,
            value: target,
        });
    }
    Ok(Sample { features, target })
}

fn parse_features(record: &csv::StringRecord, line: u64) -> Result<FeatureVector> {
    let real = |i: usize| -> Result<f64> {
        let v: f64 = record[i].parse().map_err(|_| {
            Error::parse(
                line,
                format!("{}: not a number: `{}`", CSV_HEADER[i], &record[i]),
            )
        })?;
        if !v.is_finite() {
            return Err(Error::parse(line, format!("{}: not finite", CSV_HEADER[i])));
        }
        Ok(v)
    };
    let positive = |i: usize| -> Result<f64> {
        let v = real(i)?;
        if v <= 0.0 {
            return Err(Error::parse(
                line,
                format!("{} must be positive, got {v}", CSV_HEADER[i]),
            ));
        }
        Ok(v)
    };
    let count = |i: usize| -> Result<u32> {
        record[i].parse::<u32>().map_err(|_| {
            Error::parse(
                line,
                format!(
                    "{} must be a non-negative integer, got `{}`",
                    CSV_HEADER[i], &record[i]
                ),
            )
        })
    };
    let flag = |i: usize| -> Result<bool> {
        match &record[i] {
            "0" => Ok(false),
            "1" => Ok(true),
            other => Err(Error::parse(
                line,
                format!("{} must be 0 or 1, got `{other}`", CSV_HEADER[i]),
            )),
        }
    };
    let features = FeatureVector {
        duration_s: positive(0)?,
        size_kb: positive(1)?,
        framerate: positive(2)?,
        width: positive(3)?,
        height: positive(4)?,
        b_count: count(5)?,
        s_count: count(6)?,
        r_count: count(7)?,
        mpeg4: flag(8)?,
        vp9: flag(9)?,
        hevc: flag(10)?,
    };
    let degree = features.degree() as usize;
    if degree == 0 || degree > MAX_MERGE_DEGREE {
        return Err(Error::parse(
            line,
            format!("merge degree {degree} outside 1..={MAX_MERGE_DEGREE}"),
        ));
    }
    Ok(features)
}

/// Shuffle with `seed` and cut into a training part of
/// `round(train_fraction * n)` samples and a test part with the rest. Both
/// parts keep the original relative order.
pub fn split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = dataset.len();
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "cannot split a dataset of {n} samples"
        )));
    }
    let n_train = (train_fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut in_train = vec![false; n];
    for &i in &order[..n_train] {
        in_train[i] = true;
    }
    let (train, test): (Vec<_>, Vec<_>) = dataset
        .samples
        .iter()
        .cloned()
        .zip(in_train)
        .partition(|(_, t)| *t);
    Ok((
        Dataset::new(train.into_iter().map(|(s, _)| s).collect()),
        Dataset::new(test.into_iter().map(|(s, _)| s).collect()),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table_video() -> VideoMeta {
        VideoMeta::new("t3", 2.0, 876.0, 30.0, 1280, 720).unwrap()
    }

    #[test]
    fn encodes_table_row() {
        let fv = encode(
            &table_video(),
            &[
                Operation::bitrate(512).unwrap(),
                Operation::codec(Codec::Mpeg4),
            ],
        )
        .unwrap();
        assert_eq!(
            fv.to_array(),
            [2.0, 876.0, 30.0, 1280.0, 720.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0]
        );
    }

    #[test]
    fn counts_vic_kinds() {
        let fv = encode(
            &table_video(),
            &[
                Operation::bitrate(384).unwrap(),
                Operation::bitrate(1536).unwrap(),
                Operation::framerate(20).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!((fv.b_count, fv.s_count, fv.r_count), (2, 1, 0));
        assert!(!fv.mpeg4 && !fv.vp9 && !fv.hevc);
        assert_eq!(fv.degree(), 3);
    }

    #[test]
    fn encode_rejects_bad_degree() {
        assert!(encode(&table_video(), &[]).is_err());
        let six: Vec<_> = Operation::all().take(6).collect();
        assert!(encode(&table_video(), &six).is_err());
    }

    #[test]
    fn parses_table_sample_row() {
        let text = format!(
            "{}\n2.0,876,30,1280,720,1,0,0,1,0,0,0.3360\n",
            CSV_HEADER.join(",")
        );
        let ds = Dataset::read_csv_from(text.as_bytes()).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.samples[0].target, 0.336);
        assert!(ds.samples[0].features.mpeg4);
    }

    fn read(body: &str) -> Result<Dataset> {
        let text = format!("{}\n{body}", CSV_HEADER.join(","));
        Dataset::read_csv_from(text.as_bytes())
    }

    #[test]
    fn rejects_malformed_rows() {
        assert!(matches!(
            read("2.0,876,30,1280,720,-1,0,0,1,0,0,0.3\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            read("2.0,876,30,1280,720,1,0,0,1,0,0,1.3\n"),
            Err(Error::TargetRange { line: 2, .. })
        ));
        assert!(matches!(
            read("2.0,876,30,1280,720,1,0,0,1,0,0,0.3,extra\n"),
            Err(Error::Parse { .. })
        ));
        assert!(read("2.0,876,30,1280,720,1,0,0,2,0,0,0.3\n").is_err());
        assert!(read("2.0,876,30,1280,720,0,0,0,0,0,0,0.3\n").is_err());
        assert!(read("x,876,30,1280,720,1,0,0,0,0,0,0.3\n").is_err());
        assert!(Dataset::read_csv_from("a,b\n".as_bytes()).is_err());
        assert!(Dataset::read_csv_from("".as_bytes()).is_err());
    }

    #[test]
    fn error_message_names_line() {
        let err =
            read("2.0,876,30,1280,720,1,0,0,1,0,0,0.3\n2.0,876,30,1280,720,x,0,0,1,0,0,0.3\n")
                .unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn parses_feature_list() {
        let fv: FeatureVector = "2.0, 876, 30, 1280, 720, 2, 0, 1, 0, 1, 0".parse().unwrap();
        assert_eq!(fv.degree(), 4);
        assert!(fv.vp9);
        assert_eq!(fv.to_array()[1], 876.0);
        assert!("2.0,876,30".parse::<FeatureVector>().is_err());
        assert!("2.0,876,30,1280,720,9,0,0,0,0,0"
            .parse::<FeatureVector>()
            .is_err());
    }

    #[test]
    fn split_sizes() {
        let ds = Dataset::new(
            (0..10)
                .map(|i| Sample {
                    features: encode(&table_video(), &[Operation::bitrate(512).unwrap()]).unwrap(),
                    target: i as f64 / 10.0,
                })
                .collect(),
        );
        let (train, test) = split(&ds, 0.8, 1).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        let (train2, _) = split(&ds, 0.8, 1).unwrap();
        assert_eq!(train, train2);
        assert!(split(&ds, 1.0, 1).is_err());
        assert!(split(&Dataset::new(ds.samples[..1].to_vec()), 0.5, 1).is_err());
        assert_eq!((0.8f64 * 81_327.0).round() as usize, 65_062);
    }

    fn arb_sample() -> impl Strategy<Value = Sample> {
        (
            (
                0.01f64..=2.0,
                1.0f64..5000.0,
                1.0f64..120.0,
                1u32..4000,
                1u32..3000,
            ),
            (0u32..=2, 0u32..=1, 0u32..=1, any::<bool>()),
            0.0f64..1.0,
        )
            .prop_map(|((d, s, fr, w, h), (b, sc, r, hevc), target)| Sample {
                features: FeatureVector {
                    duration_s: d,
                    size_kb: s,
                    framerate: fr,
                    width: w as f64,
                    height: h as f64,
                    b_count: b,
                    s_count: sc,
                    r_count: r,
                    mpeg4: false,
                    vp9: false,
                    hevc: hevc || b + sc + r == 0,
                },
                target,
            })
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(samples in prop::collection::vec(arb_sample(), 0..40)) {
            let ds = Dataset::new(samples);
            let mut buf = Vec::new();
            ds.write_csv_to(&mut buf).unwrap();
            prop_assert_eq!(Dataset::read_csv_from(buf.as_slice()).unwrap(), ds);
        }

        #[test]
        fn split_partitions(n in 2usize..200, frac in 0.01f64..0.99, seed in any::<u64>()) {
            let ds = Dataset::new((0..n).map(|i| Sample {
                features: encode(&table_video(), &[Operation::bitrate(512).unwrap()]).unwrap(),
                target: i as f64 / n as f64,
            }).collect());
            let (train, test) = split(&ds, frac, seed).unwrap();
            prop_assert_eq!(train.len(), (frac * n as f64).round() as usize);
            let mut all: Vec<f64> = train.targets().into_iter().chain(test.targets()).collect();
            all.sort_by(f64::total_cmp);
            prop_assert_eq!(all, ds.targets());
        }

        #[test]
        fn encode_ignores_order(ops in prop::collection::vec(0usize..18, 1..=5), seed in any::<u64>()) {
            let ops: Vec<_> = ops.into_iter().map(|i| Operation::all().nth(i).unwrap()).collect();
            let mut shuffled = ops.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(encode(&table_video(), &ops).unwrap(), encode(&table_video(), &shuffled).unwrap());
        }
    }
}
