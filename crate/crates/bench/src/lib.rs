//! Fixtures shared by the benchmarks in `benches/`.

use taskmerge_core::oracle::generate_cases;
use taskmerge_core::{OracleConfig, TranscodeTask};

/// Tasks drawn from oracle merge cases: `segments` segments with
/// `cases_per_segment` groups each, flattened in generation order.
pub fn synthetic_workload(segments: usize, cases_per_segment: usize) -> Vec<TranscodeTask> {
    let cases = generate_cases(segments, cases_per_segment, &OracleConfig::default())
        .expect("valid generator arguments");
    cases
        .iter()
        .enumerate()
        .flat_map(|(ci, case)| {
            case.ops.iter().enumerate().map(move |(oi, op)| {
                TranscodeTask::new(format!("c{ci}-{oi}"), case.video.clone(), *op)
            })
        })
        .collect()
}
