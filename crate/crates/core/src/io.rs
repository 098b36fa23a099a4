//! On-disk formats.
//!
//! * Volumes: a `key = value` text header plus a raw little-endian sample
//!   file named by the header's `data_file` key (resolved relative to the
//!   header).
//! * Images: 16-bit binary PGM (`P5`, maxval 65535, big-endian samples) with
//!   a `key = value` sidecar holding the normalization bounds.
//! * Tables: comma-separated with a header row.
//!
//! Every writer goes through [`write_atomic`].

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::model::{validate_volume, EnvelopeImage, QSelectionReport, RawVolume, Volume};

pub const VOLUME_MAGIC: &str = "PAVOL1";
pub const VOLUME_LAYOUT: &str = "x-major, y, t-fastest";
pub const BYTE_ORDER: &str = "little-endian";

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::format(path, "not a file path"))?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(".{file_name}.tmp-{}", std::process::id()));
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Ordered `key = value` document. Blank lines and `#` comments are skipped;
/// duplicate keys are rejected.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: Vec<(String, String)>,
}

impl KeyValues {
    pub fn new() -> Self {
        KeyValues::default()
    }

    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut kv = KeyValues::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::format(origin, format!("line {}: expected key = value", i + 1))
            })?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::format(origin, format!("line {}: empty key", i + 1)));
            }
            if kv.get(k).is_some() {
                return Err(Error::format(
                    origin,
                    format!("line {}: duplicate key '{k}'", i + 1),
                ));
            }
            kv.entries.push((k.to_string(), v.trim().to_string()));
        }
        Ok(kv)
    }

    pub fn read(path: &Path) -> Result<Self> {
        KeyValues::parse(&read_text(path)?, path)
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _)| k.as_str())
    }

    pub fn require(&self, key: &str, origin: &Path) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::format(origin, format!("missing key '{key}'")))
    }

    pub fn parse_value<T: std::str::FromStr>(&self, key: &str, origin: &Path) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        self.require(key, origin)?
            .parse()
            .map_err(|e| Error::format(origin, format!("key '{key}': {e}")))
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

/// Sample encoding of a volume data file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dtype {
    F32Le,
    #[default]
    F64Le,
}

impl Dtype {
    pub fn width(self) -> usize {
        match self {
            Dtype::F32Le => 4,
            Dtype::F64Le => 8,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Dtype::F32Le => "f32le",
            Dtype::F64Le => "f64le",
        }
    }
}

impl std::str::FromStr for Dtype {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "f32le" => Ok(Dtype::F32Le),
            "f64le" => Ok(Dtype::F64Le),
            other => Err(format!("unknown dtype '{other}' (expected f32le or f64le)")),
        }
    }
}

/// Parsed volume header.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeHeader {
    pub nx: usize,
    pub ny: usize,
    pub nt: usize,
    pub dt: f64,
    pub dtype: Dtype,
    pub data_file: String,
    pub provenance: Option<String>,
}

impl VolumeHeader {
    pub fn read(path: &Path) -> Result<Self> {
        let kv = KeyValues::read(path)?;
        let magic = kv.require("magic", path)?;
        if magic != VOLUME_MAGIC {
            return Err(Error::format(
                path,
                format!("bad magic '{magic}', expected {VOLUME_MAGIC}"),
            ));
        }
        let order = kv.require("byte_order", path)?;
        if order != BYTE_ORDER {
            return Err(Error::format(
                path,
                format!("unsupported byte order '{order}'"),
            ));
        }
        let layout = kv.require("layout", path)?;
        if layout != VOLUME_LAYOUT {
            return Err(Error::format(
                path,
                format!("unsupported layout '{layout}'"),
            ));
        }
        Ok(VolumeHeader {
            nx: kv.parse_value("nx", path)?,
            ny: kv.parse_value("ny", path)?,
            nt: kv.parse_value("nt", path)?,
            dt: kv.parse_value("dt", path)?,
            dtype: kv.parse_value("dtype", path)?,
            data_file: kv.require("data_file", path)?.to_string(),
            provenance: kv.get("provenance").map(str::to_string),
        })
    }

    pub fn render(&self) -> String {
        let mut kv = KeyValues::new();
        kv.push("magic", VOLUME_MAGIC);
        kv.push("nx", self.nx);
        kv.push("ny", self.ny);
        kv.push("nt", self.nt);
        kv.push("dt", self.dt);
        kv.push("dtype", self.dtype.as_str());
        kv.push("byte_order", BYTE_ORDER);
        kv.push("layout", VOLUME_LAYOUT);
        kv.push("data_file", &self.data_file);
        if let Some(p) = &self.provenance {
            kv.push("provenance", p);
        }
        kv.render()
    }
}

/// Data file paired with a header path: same stem, `.raw` extension.
pub fn data_path_for(header: &Path) -> PathBuf {
    header.with_extension("raw")
}

/// Header and data file in one go. Samples are written in `dtype`; the f64
/// path round-trips bit for bit.
pub fn write_volume(
    volume: &Volume,
    header_path: &Path,
    dtype: Dtype,
    provenance: Option<&str>,
) -> Result<()> {
    let data_path = data_path_for(header_path);
    let data_file = data_path
        .file_name()
        .expect("header path has a file name")
        .to_string_lossy()
        .into_owned();
    let mut bytes = Vec::with_capacity(volume.data().len() * dtype.width());
    match dtype {
        Dtype::F64Le => volume
            .data()
            .iter()
            .for_each(|v| bytes.extend_from_slice(&v.to_le_bytes())),
        Dtype::F32Le => volume
            .data()
            .iter()
            .for_each(|v| bytes.extend_from_slice(&(*v as f32).to_le_bytes())),
    }
    let header = VolumeHeader {
        nx: volume.nx(),
        ny: volume.ny(),
        nt: volume.nt(),
        dt: volume.dt(),
        dtype,
        data_file,
        provenance: provenance.map(|p| p.replace('\n', " ")),
    };
    write_atomic(&data_path, &bytes)?;
    write_atomic(header_path, header.render().as_bytes())
}

/// Reads a header and its data file; samples are promoted to f64.
pub fn read_volume_with_header(header_path: &Path) -> Result<(Volume, VolumeHeader)> {
    let header = VolumeHeader::read(header_path)?;
    let data_path = header_path
        .parent()
        .unwrap_or_else(|| Path::new(""))
        .join(&header.data_file);
    let bytes = fs::read(&data_path).map_err(|e| Error::io(&data_path, e))?;
    let count = header
        .nx
        .checked_mul(header.ny)
        .and_then(|v| v.checked_mul(header.nt))
        .ok_or_else(|| Error::format(header_path, "dimensions overflow"))?;
    let expected = count * header.dtype.width();
    if bytes.len() != expected {
        return Err(Error::format(
            &data_path,
            format!(
                "data has {} bytes, header {}x{}x{} {} requires {expected}",
                bytes.len(),
                header.nx,
                header.ny,
                header.nt,
                header.dtype.as_str()
            ),
        ));
    }
    let data: Vec<f64> = match header.dtype {
        Dtype::F64Le => bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect(),
        Dtype::F32Le => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")) as f64)
            .collect(),
    };
    let volume = validate_volume(RawVolume {
        nx: header.nx,
        ny: header.ny,
        nt: header.nt,
        dt: header.dt,
        data,
    })
    .map_err(|e| Error::format(header_path, e.to_string()))?;
    Ok((volume, header))
}

pub fn read_volume(header_path: &Path) -> Result<Volume> {
    read_volume_with_header(header_path).map(|(v, _)| v)
}

/// Normalization record written next to every image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageMeta {
    pub min: f64,
    pub max: f64,
    pub degenerate: bool,
}

pub const MID_GRAY: u16 = 32768;

/// Min-max maps pixels onto `0..=65535`; an all-equal image maps to
/// [`MID_GRAY`] and is flagged degenerate.
pub fn normalize_image(image: &EnvelopeImage) -> (Vec<u16>, ImageMeta) {
    let px = image.pixels();
    let min = px.iter().copied().fold(f64::INFINITY, f64::min);
    let max = px.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max <= min {
        return (
            vec![MID_GRAY; px.len()],
            ImageMeta {
                min,
                max,
                degenerate: true,
            },
        );
    }
    let scale = 65535.0 / (max - min);
    let levels = px
        .iter()
        .map(|v| ((v - min) * scale).round().clamp(0.0, 65535.0) as u16)
        .collect();
    (
        levels,
        ImageMeta {
            min,
            max,
            degenerate: false,
        },
    )
}

/// Sidecar path for an image: the image path with `.meta` appended.
pub fn image_meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

/// Writes a 16-bit PGM with one row per x (width `ny`, height `nx`) and its
/// sidecar.
pub fn write_image(image: &EnvelopeImage, path: &Path) -> Result<ImageMeta> {
    let (levels, meta) = normalize_image(image);
    let mut bytes = format!("P5\n{} {}\n65535\n", image.ny(), image.nx()).into_bytes();
    for l in levels {
        bytes.extend_from_slice(&l.to_be_bytes());
    }
    let mut kv = KeyValues::new();
    kv.push("width", image.ny());
    kv.push("height", image.nx());
    kv.push("rows", "x");
    kv.push("min", meta.min);
    kv.push("max", meta.max);
    kv.push("degenerate", meta.degenerate);
    write_atomic(path, &bytes)?;
    write_atomic(&image_meta_path(path), kv.render().as_bytes())?;
    Ok(meta)
}

/// Reads back the 16-bit levels of a PGM written by [`write_image`], as
/// `(width, height, levels)`.
pub fn read_pgm16(path: &Path) -> Result<(usize, usize, Vec<u16>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::format(path, "truncated PGM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "65535" {
        return Err(Error::format(path, "not a 16-bit P5 graymap"));
    }
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|e| Error::format(path, e.to_string()))
    };
    let (w, h) = (parse(&fields[1])?, parse(&fields[2])?);
    let body = bytes.get(pos..).unwrap_or(&[]);
    if body.len() != 2 * w * h {
        return Err(Error::format(path, "PGM body length mismatch"));
    }
    Ok((
        w,
        h,
        body.chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect(),
    ))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "inf".to_string(), |v| v.to_string())
}

/// Q-selection report as one CSV table.
///
/// Columns `section,x,y,r,q,psnr_db`; `grid` rows list the candidates,
/// `trace` rows the per-trace winners, and a single `final` row the mean.
pub fn render_q_report(report: &QSelectionReport) -> String {
    let mut s = String::from("section,x,y,r,q,psnr_db\n");
    for q in &report.grid {
        let _ = writeln!(s, "grid,,,,{q},");
    }
    for (i, &(x, y)) in report.sampled_trace_ids.iter().enumerate() {
        let _ = writeln!(
            s,
            "trace,{x},{y},{},{},{}",
            report.r_per_trace[i],
            report.best_q_per_trace[i],
            fmt_opt(report.best_psnr_db[i])
        );
    }
    let _ = writeln!(s, "final,,,,{},", report.q_final);
    s
}

pub fn parse_q_report(text: &str, origin: &Path) -> Result<QSelectionReport> {
    let err = |line: usize, m: &str| Error::format(origin, format!("line {line}: {m}"));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "section,x,y,r,q,psnr_db")) => {}
        _ => return Err(err(1, "missing header row")),
    }
    let mut report = QSelectionReport {
        grid: Vec::new(),
        sampled_trace_ids: Vec::new(),
        r_per_trace: Vec::new(),
        best_q_per_trace: Vec::new(),
        best_psnr_db: Vec::new(),
        q_final: f64::NAN,
    };
    let num = |s: &str, line: usize| s.parse::<f64>().map_err(|e| err(line, &e.to_string()));
    let idx = |s: &str, line: usize| s.parse::<usize>().map_err(|e| err(line, &e.to_string()));
    for (i, line) in lines {
        let n = i + 1;
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(err(n, "expected 6 columns"));
        }
        match cols[0] {
            "grid" => report.grid.push(num(cols[4], n)?),
            "trace" => {
                report
                    .sampled_trace_ids
                    .push((idx(cols[1], n)?, idx(cols[2], n)?));
                report.r_per_trace.push(num(cols[3], n)?);
                report.best_q_per_trace.push(num(cols[4], n)?);
                report.best_psnr_db.push(if cols[5] == "inf" {
                    None
                } else {
                    Some(num(cols[5], n)?)
                });
            }
            "final" => report.q_final = num(cols[4], n)?,
            other => return Err(err(n, &format!("unknown section '{other}'"))),
        }
    }
    if report.q_final.is_nan() {
        return Err(Error::format(origin, "missing final row"));
    }
    Ok(report)
}

/// Mask files: CSV `x,y`, one row per coordinate.
pub fn render_mask(mask: &BTreeSet<(usize, usize)>) -> String {
    let mut s = String::from("x,y\n");
    for (x, y) in mask {
        let _ = writeln!(s, "{x},{y}");
    }
    s
}

pub fn read_mask(path: &Path) -> Result<BTreeSet<(usize, usize)>> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("x,y") {
        return Err(Error::format(path, "missing 'x,y' header row"));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (x, y) = l
                .split_once(',')
                .ok_or_else(|| Error::format(path, format!("bad mask row '{l}'")))?;
            let p = |s: &str| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::format(path, format!("bad mask row '{l}': {e}")))
            };
            Ok((p(x)?, p(y)?))
        })
        .collect()
}
