use std::sync::Arc;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{merge_saving, OracleConfig};
use crate::error::{Error, Result};
use crate::features::{encode, Dataset, Sample};
use crate::workload::{Codec, OpKind, Operation, VideoMeta, MAX_MERGE_DEGREE};

/// Family a generated merge case is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MergeStratum {
    /// One VIC kind, distinct parameters.
    SameKindVic,
    /// Two or more VIC kinds.
    MixedVic,
    /// One codec conversion plus one or more VIC operations.
    VicCodec,
}

impl MergeStratum {
    pub const ALL: [MergeStratum; 3] = [
        MergeStratum::SameKindVic,
        MergeStratum::MixedVic,
        MergeStratum::VicCodec,
    ];
}

#[derive(Debug, Clone)]
pub struct GeneratedCase {
    pub video: Arc<VideoMeta>,
    pub ops: Vec<Operation>,
    pub stratum: MergeStratum,
    pub sample: Sample,
}

/// Synthesize `corpus_size` segments with `cases_per_video` labelled merge
/// cases each. Output depends only on the arguments.
pub fn generate_dataset(
    corpus_size: usize,
    cases_per_video: usize,
    cfg: &OracleConfig,
) -> Result<Dataset> {
    let cases = generate_cases(corpus_size, cases_per_video, cfg)?;
    Ok(Dataset::new(cases.into_iter().map(|c| c.sample).collect()))
}

pub fn generate_cases(
    corpus_size: usize,
    cases_per_video: usize,
    cfg: &OracleConfig,
) -> Result<Vec<GeneratedCase>> {
    if corpus_size == 0 || cases_per_video == 0 {
        return Err(Error::InvalidArgument(
            "corpus size and cases per video must be at least 1".into(),
        ));
    }
    cfg.validate()?;
    let per_video: Result<Vec<Vec<GeneratedCase>>> = (0..corpus_size)
        .into_par_iter()
        .map(|index| {
            // One stream per segment keeps the output independent of scheduling.
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
            rng.set_stream(index as u64 + 1);
            let video = Arc::new(synthesize_video(index, &mut rng));
            (0..cases_per_video)
                .map(|_| {
                    let stratum = *MergeStratum::ALL.choose(&mut rng).unwrap();
                    let degree = rng.random_range(2..=MAX_MERGE_DEGREE);
                    let ops = sample_ops(stratum, degree, &mut rng);
                    let sample = Sample {
                        features: encode(&video, &ops)?,
                        target: merge_saving(&video, &ops, cfg)?,
                    };
                    Ok(GeneratedCase {
                        video: video.clone(),
                        ops,
                        stratum,
                        sample,
                    })
                })
                .collect()
        })
        .collect();
    Ok(per_video?.into_iter().flatten().collect())
}

/// Segment statics. Most segments are full two-second chunks; the rest are
/// trailing chunks. Sizes are log-uniform over 80 KB to 2.5 MB.
fn synthesize_video(index: usize, rng: &mut impl Rng) -> VideoMeta {
    let duration = if rng.random_bool(0.75) {
        2.0
    } else {
        (rng.random_range(3..20) as f64) / 10.0
    };
    let size = (rng.random_range(80f64.ln()..2500f64.ln())).exp().round();
    let framerate = *[24.0, 25.0, 30.0, 30.0, 30.0, 50.0, 60.0]
        .choose(rng)
        .unwrap();
    let (width, height) = *[
        (1280, 720),
        (1280, 720),
        (1280, 720),
        (1280, 720),
        (1920, 1080),
        (854, 480),
    ]
    .choose(rng)
    .unwrap();
    VideoMeta::new(
        format!("v{index:05}"),
        duration,
        size,
        framerate,
        width,
        height,
    )
    .expect("generated statics are valid")
}

fn sample_ops(stratum: MergeStratum, degree: usize, rng: &mut impl Rng) -> Vec<Operation> {
    let vic: Vec<Operation> = OpKind::VIC
        .into_iter()
        .flat_map(Operation::of_kind)
        .collect();
    match stratum {
        MergeStratum::SameKindVic => {
            let kind = *OpKind::VIC.choose(rng).unwrap();
            let ops: Vec<_> = Operation::of_kind(kind).collect();
            ops.choose_multiple(rng, degree).copied().collect()
        }
        MergeStratum::MixedVic => loop {
            let ops: Vec<_> = vic.choose_multiple(rng, degree).copied().collect();
            if ops.iter().any(|o| o.kind() != ops[0].kind()) {
                let mut ops = ops;
                ops.shuffle(rng);
                break ops;
            }
        },
        MergeStratum::VicCodec => {
            let codec = *Codec::ALL.choose(rng).unwrap();
            let mut ops: Vec<_> = vic.choose_multiple(rng, degree - 1).copied().collect();
            ops.push(Operation::codec(codec));
            ops.shuffle(rng);
            ops
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible() {
        let cfg = OracleConfig::default().with_seed(11);
        let a = generate_dataset(1, 1, &cfg).unwrap();
        let b = generate_dataset(1, 1, &cfg).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        a.write_csv_to(&mut x).unwrap();
        b.write_csv_to(&mut y).unwrap();
        assert_eq!(x, y);
        assert_ne!(
            generate_dataset(20, 5, &cfg).unwrap(),
            generate_dataset(20, 5, &cfg.clone().with_seed(12)).unwrap()
        );
    }

    #[test]
    fn cardinality_and_range() {
        let ds = generate_dataset(100, 50, &OracleConfig::default()).unwrap();
        assert_eq!(ds.len(), 5000);
        for s in &ds.samples {
            assert!((0.0..1.0).contains(&s.target), "{}", s.target);
            assert!(s.features.duration_s <= 2.0);
            let d = s.features.degree();
            assert!((2..=5).contains(&d));
            let codecs = s.features.mpeg4 as u32 + s.features.vp9 as u32 + s.features.hevc as u32;
            assert!(codecs <= 1);
        }
    }

    #[test]
    fn strata_have_expected_shape() {
        let cases = generate_cases(50, 20, &OracleConfig::default()).unwrap();
        for c in &cases {
            let kinds: std::collections::HashSet<_> = c.ops.iter().map(|o| o.kind()).collect();
            let mut distinct = c.ops.clone();
            distinct.sort();
            distinct.dedup();
            assert_eq!(distinct.len(), c.ops.len());
            match c.stratum {
                MergeStratum::SameKindVic => {
                    assert!(kinds.len() == 1 && !kinds.contains(&OpKind::Codec))
                }
                MergeStratum::MixedVic => {
                    assert!(kinds.len() >= 2 && !kinds.contains(&OpKind::Codec))
                }
                MergeStratum::VicCodec => {
                    assert_eq!(
                        c.ops.iter().filter(|o| o.kind() == OpKind::Codec).count(),
                        1
                    )
                }
            }
        }
        for stratum in MergeStratum::ALL {
            assert!(cases.iter().any(|c| c.stratum == stratum));
        }
    }

    #[test]
    fn degree_two_same_kind_mean_near_calibration() {
        let cases = generate_cases(400, 50, &OracleConfig::default()).unwrap();
        let savings: Vec<f64> = cases
            .iter()
            .filter(|c| c.stratum == MergeStratum::SameKindVic && c.ops.len() == 2)
            .map(|c| c.sample.target)
            .collect();
        assert!(savings.len() > 500);
        let mean = savings.iter().sum::<f64>() / savings.len() as f64;
        assert!((mean - 0.26).abs() <= 0.02, "mean {mean}");
    }

    #[test]
    fn rejects_empty_request() {
        assert!(generate_dataset(0, 5, &OracleConfig::default()).is_err());
        assert!(generate_dataset(5, 0, &OracleConfig::default()).is_err());
    }
}
