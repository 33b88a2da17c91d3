//! Workload files: one task per line,
//! `task_id,segment_id,duration_s,size_kb,framerate,width,height,kind,parameter`.
//! A leading header row, blank lines and `#` comments are ignored.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use super::{Operation, TranscodeTask, VideoMeta};
use crate::error::{Error, Result};

const HEADER: [&str; 9] = [
    "task_id",
    "segment_id",
    "duration_s",
    "size_kb",
    "framerate",
    "width",
    "height",
    "kind",
    "parameter",
];

pub fn read_workload(path: impl AsRef<Path>) -> Result<Vec<TranscodeTask>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_workload(file).map_err(|e| e.at_path(path))
}

pub fn parse_workload(reader: impl Read) -> Result<Vec<TranscodeTask>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);

    let mut videos: HashMap<String, Arc<VideoMeta>> = HashMap::new();
    let mut ids = HashSet::new();
    let mut tasks = Vec::new();
    for (n, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(n as u64 + 1, |p| p.line());
        if n == 0 && record.get(0) == Some(HEADER[0]) {
            continue;
        }
        if record.len() != HEADER.len() {
            return Err(Error::parse(
                line,
                format!("expected {} fields, found {}", HEADER.len(), record.len()),
            ));
        }
        let field = |i: usize| &record[i];
        let num = |i: usize| -> Result<f64> {
            field(i).parse::<f64>().map_err(|_| {
                Error::parse(line, format!("{}: not a number: `{}`", HEADER[i], field(i)))
            })
        };
        let int = |i: usize| -> Result<u32> {
            field(i).parse::<u32>().map_err(|_| {
                Error::parse(
                    line,
                    format!("{}: not a positive integer: `{}`", HEADER[i], field(i)),
                )
            })
        };
        let video = VideoMeta::new(field(1), num(2)?, num(3)?, num(4)?, int(5)?, int(6)?)
            .map_err(|e| Error::parse(line, e.to_string()))?;
        let operation =
            Operation::parse(field(7), field(8)).map_err(|e| Error::parse(line, e.to_string()))?;

        let video = match videos.get(video.segment_id()) {
            Some(known) if **known != video => {
                return Err(Error::parse(
                    line,
                    format!(
                        "segment `{}` redefined with different metadata",
                        video.segment_id()
                    ),
                ))
            }
            Some(known) => known.clone(),
            None => {
                let v = Arc::new(video);
                videos.insert(v.segment_id().to_string(), v.clone());
                v
            }
        };
        let task_id = field(0).to_string();
        if !ids.insert(task_id.clone()) {
            return Err(Error::parse(line, format!("duplicate task id `{task_id}`")));
        }
        tasks.push(TranscodeTask::new(task_id, video, operation));
    }
    Ok(tasks)
}

pub fn write_workload(tasks: &[TranscodeTask], mut out: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(&mut out);
    wtr.write_record(HEADER)?;
    for t in tasks {
        let v = &t.video;
        wtr.write_record([
            t.task_id.clone(),
            v.segment_id().to_string(),
            v.duration_s().to_string(),
            v.size_kb().to_string(),
            v.framerate().to_string(),
            v.width().to_string(),
            v.height().to_string(),
            t.operation.kind().name().to_string(),
            t.operation.parameter_literal(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<workload>", e))?;
    Ok(())
}
