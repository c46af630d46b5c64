//! File formats.
//!
//! * `csv-v1` recordings: UTF-8 text, line 1 `#mi-rec v1 rate=<Hz> unit=uV`,
//!   line 2 the comma-separated channel names, then one row per sample
//!   (time-major). Samples are stored at single precision using the shortest
//!   representation that round-trips, which never exceeds 9 significant digits.
//! * `tsv-v1` markers: header `sample\tlabel\ttrial`, label `L` or `R`.
//! * `epk-v1` epochs: little-endian binary, magic `EPK1`, `u32` trials,
//!   channels and samples, `f64` sample rate, window start and end, `i8`
//!   labels, then `f32` data in trial, channel, sample order.
//!
//! Text formats accept leading `#` comment lines (used for the producing
//! config hash).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::{ClassLabel, ContinuousRecording, EpochSet, EventMarker, Montage};
use crate::error::{Error, Result};

pub const RECORDING_FORMAT: &str = "csv-v1";
pub const MARKER_FORMAT: &str = "tsv-v1";
pub const EPOCH_FORMAT: &str = "epk-v1";
pub const PLAN_FORMAT: &str = "plan-v1";

/// Every on-disk format this build reads and writes.
pub const FORMAT_VERSIONS: [&str; 4] = [RECORDING_FORMAT, MARKER_FORMAT, EPOCH_FORMAT, PLAN_FORMAT];

const EPK_MAGIC: &[u8; 4] = b"EPK1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecordingFormat {
    #[default]
    CsvV1,
}

impl std::str::FromStr for RecordingFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv-v1" | "csv" => Ok(RecordingFormat::CsvV1),
            other => Err(Error::Validation(format!("unknown recording format {other:?}"))),
        }
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

/// Loads a recording, resolving channel names against the default montage.
pub fn load_recording(path: impl AsRef<Path>, format: RecordingFormat) -> Result<ContinuousRecording> {
    let path = path.as_ref();
    match format {
        RecordingFormat::CsvV1 => read_recording_csv(open(path)?, None),
    }
}

/// Reads `csv-v1`. When `declared` is given the header must list exactly
/// that montage's channel count.
pub fn read_recording_csv<R: BufRead>(reader: R, declared: Option<&Montage>) -> Result<ContinuousRecording> {
    let mut lines = reader.lines().enumerate();
    let mut next_line = |what: &str| -> Result<(usize, String)> {
        match lines.next() {
            Some((i, Ok(l))) => Ok((i + 1, l)),
            Some((i, Err(e))) => Err(Error::parse(format!("line {}", i + 1), e.to_string())),
            None => Err(Error::parse("end of file", format!("missing {what}"))),
        }
    };

    let (lineno, header) = next_line("header")?;
    let rate = parse_recording_header(&header).map_err(|m| Error::parse(format!("line {lineno}"), m))?;

    let (lineno, names_line) = next_line("channel names")?;
    let names: Vec<String> = names_line.split(',').map(|s| s.trim().to_string()).collect();
    if names.iter().any(String::is_empty) {
        return Err(Error::parse(format!("line {lineno}"), "empty channel name"));
    }
    if let Some(m) = declared {
        if m.len() != names.len() {
            return Err(Error::ChannelCount {
                expected: m.len(),
                found: names.len(),
                location: format!("line {lineno}"),
            });
        }
    }
    let montage = match declared {
        Some(m) => m.resolve(&names)?,
        None => Montage::default_30().resolve(&names)?,
    };

    let n_ch = names.len();
    let mut values: Vec<f64> = Vec::new();
    let mut n_samples = 0usize;
    loop {
        let (lineno, line) = match next_line("") {
            Ok(x) => x,
            Err(Error::Parse { location, .. }) if location == "end of file" => break,
            Err(e) => return Err(e),
        };
        if line.trim().is_empty() {
            continue;
        }
        let mut count = 0usize;
        for (col, field) in line.split(',').enumerate() {
            count += 1;
            if col >= n_ch {
                continue;
            }
            let v: f32 = field.trim().parse().map_err(|_| {
                Error::parse(
                    format!("line {lineno}, column {}", col + 1),
                    format!("not a number: {field:?}"),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::parse(
                    format!("line {lineno}, column {}", col + 1),
                    format!("non-finite sample {field:?}"),
                ));
            }
            values.push(f64::from(v));
        }
        if count != n_ch {
            return Err(Error::ChannelCount {
                expected: n_ch,
                found: count,
                location: format!("line {lineno}"),
            });
        }
        n_samples += 1;
    }
    // values are time-major: column-major storage of a channels x samples matrix
    let data = DMatrix::from_vec(n_ch, n_samples, values);
    ContinuousRecording::new(rate, data, montage)
}

fn parse_recording_header(line: &str) -> std::result::Result<f64, String> {
    let mut tokens = line.split_whitespace();
    if tokens.next() != Some("#mi-rec") || tokens.next() != Some("v1") {
        return Err(format!("expected `#mi-rec v1 ...` header, found {line:?}"));
    }
    let mut rate = None;
    let mut unit = None;
    for tok in tokens {
        match tok.split_once('=') {
            Some(("rate", v)) => rate = v.parse::<f64>().ok(),
            Some(("unit", v)) => unit = Some(v.to_string()),
            _ => {}
        }
    }
    let rate = rate
        .filter(|r| r.is_finite() && *r > 0.0)
        .ok_or_else(|| "missing or invalid rate=<Hz>".to_string())?;
    match unit.as_deref() {
        Some("uV") => Ok(rate),
        Some(other) => Err(format!("unsupported unit {other:?}, expected uV")),
        None => Err("missing unit=uV".to_string()),
    }
}

pub fn write_recording(
    path: impl AsRef<Path>,
    rec: &ContinuousRecording,
    config_hash: Option<&str>,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    write_recording_csv(&mut w, rec, config_hash).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_recording_csv<W: Write>(
    w: &mut W,
    rec: &ContinuousRecording,
    config_hash: Option<&str>,
) -> std::io::Result<()> {
    write!(w, "#mi-rec v1 rate={} unit=uV", rec.sample_rate())?;
    if let Some(h) = config_hash {
        write!(w, " config={h}")?;
    }
    writeln!(w)?;
    writeln!(w, "{}", rec.montage().channels().join(","))?;
    let data = rec.data();
    let mut line = String::new();
    for s in 0..data.ncols() {
        line.clear();
        for (c, v) in data.column(s).iter().enumerate() {
            if c > 0 {
                line.push(',');
            }
            line.push_str(&(*v as f32).to_string());
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    Ok(())
}

pub fn read_markers(path: impl AsRef<Path>) -> Result<Vec<EventMarker>> {
    read_markers_tsv(open(path.as_ref())?)
}

pub fn read_markers_tsv<R: BufRead>(reader: R) -> Result<Vec<EventMarker>> {
    let mut markers = Vec::new();
    let mut header_seen = false;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::parse(format!("line {lineno}"), e.to_string()))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if !header_seen {
            if fields != ["sample", "label", "trial"] {
                return Err(Error::parse(
                    format!("line {lineno}"),
                    "expected header `sample\\tlabel\\ttrial`",
                ));
            }
            header_seen = true;
            continue;
        }
        if fields.len() != 3 {
            return Err(Error::parse(
                format!("line {lineno}"),
                "expected 3 tab-separated fields",
            ));
        }
        let loc = || format!("line {lineno}");
        let sample_index = fields[0]
            .parse()
            .map_err(|_| Error::parse(loc(), format!("bad sample index {:?}", fields[0])))?;
        let label = match fields[1] {
            "L" => ClassLabel::LeftHand,
            "R" => ClassLabel::RightHand,
            other => {
                return Err(Error::parse(
                    loc(),
                    format!("label must be L or R, got {other:?}"),
                ))
            }
        };
        let trial_index = fields[2]
            .parse()
            .map_err(|_| Error::parse(loc(), format!("bad trial index {:?}", fields[2])))?;
        markers.push(EventMarker {
            sample_index,
            label,
            trial_index,
        });
    }
    if !header_seen {
        return Err(Error::parse("end of file", "missing marker header"));
    }
    super::validate_markers(&markers)?;
    Ok(markers)
}

pub fn write_markers(
    path: impl AsRef<Path>,
    markers: &[EventMarker],
    config_hash: Option<&str>,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    write_markers_tsv(&mut w, markers, config_hash).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_markers_tsv<W: Write>(
    w: &mut W,
    markers: &[EventMarker],
    config_hash: Option<&str>,
) -> std::io::Result<()> {
    if let Some(h) = config_hash {
        writeln!(w, "# config={h}")?;
    }
    writeln!(w, "sample\tlabel\ttrial")?;
    for m in markers {
        writeln!(w, "{}\t{}\t{}", m.sample_index, m.label, m.trial_index)?;
    }
    Ok(())
}

pub fn read_epochs(path: impl AsRef<Path>) -> Result<EpochSet> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    open(path)?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    decode_epochs(&bytes)
}

pub fn write_epochs(path: impl AsRef<Path>, epochs: &EpochSet) -> Result<()> {
    let path = path.as_ref();
    let mut w = create(path)?;
    w.write_all(&encode_epochs(epochs)?)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn encode_epochs(epochs: &EpochSet) -> Result<Vec<u8>> {
    let dim = |n: usize, what: &str| {
        u32::try_from(n).map_err(|_| Error::Validation(format!("too many {what} for epk-v1: {n}")))
    };
    let (t, c, s) = (epochs.len(), epochs.n_channels(), epochs.n_samples());
    let mut out = Vec::with_capacity(40 + t + 4 * t * c * s);
    out.extend_from_slice(EPK_MAGIC);
    out.extend_from_slice(&dim(t, "trials")?.to_le_bytes());
    out.extend_from_slice(&dim(c, "channels")?.to_le_bytes());
    out.extend_from_slice(&dim(s, "samples")?.to_le_bytes());
    out.extend_from_slice(&epochs.sample_rate().to_le_bytes());
    out.extend_from_slice(&epochs.window().0.to_le_bytes());
    out.extend_from_slice(&epochs.window().1.to_le_bytes());
    out.extend(epochs.labels().iter().map(|l| l.encode() as u8));
    for x in epochs.trials() {
        for ch in 0..c {
            for v in x.row(ch).iter() {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn decode_epochs(bytes: &[u8]) -> Result<EpochSet> {
    struct Cursor<'a> {
        bytes: &'a [u8],
        pos: usize,
    }
    impl<'a> Cursor<'a> {
        fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
            let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
            match end {
                Some(end) => {
                    let s = &self.bytes[self.pos..end];
                    self.pos = end;
                    Ok(s)
                }
                None => Err(Error::parse(
                    format!("byte {}", self.pos),
                    format!("truncated file while reading {what}"),
                )),
            }
        }
        fn u32(&mut self, what: &str) -> Result<usize> {
            Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()) as usize)
        }
        fn f64(&mut self, what: &str) -> Result<f64> {
            Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
        }
    }

    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != EPK_MAGIC {
        return Err(Error::parse("byte 0", "bad magic, expected EPK1"));
    }
    let t = cur.u32("trial count")?;
    let c = cur.u32("channel count")?;
    let s = cur.u32("sample count")?;
    let rate = cur.f64("sample rate")?;
    let ws = cur.f64("window start")?;
    let we = cur.f64("window end")?;
    let label_pos = cur.pos;
    let labels = cur
        .take(t, "labels")?
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            ClassLabel::decode(b as i8).ok_or_else(|| {
                Error::parse(
                    format!("byte {}", label_pos + i),
                    format!("invalid label code {}", b as i8),
                )
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut trials = Vec::with_capacity(t);
    for _ in 0..t {
        let mut x = DMatrix::zeros(c, s);
        for ch in 0..c {
            let start = cur.pos;
            let raw = cur.take(4 * s, "samples")?;
            for (k, chunk) in raw.chunks_exact(4).enumerate() {
                let v = f32::from_le_bytes(chunk.try_into().unwrap());
                if !v.is_finite() {
                    return Err(Error::parse(
                        format!("byte {}", start + 4 * k),
                        "non-finite sample",
                    ));
                }
                x[(ch, k)] = f64::from(v);
            }
        }
        trials.push(x);
    }
    if cur.pos != bytes.len() {
        return Err(Error::parse(
            format!("byte {}", cur.pos),
            format!("{} trailing bytes", bytes.len() - cur.pos),
        ));
    }
    EpochSet::new(trials, labels, rate, (ws, we))
}
