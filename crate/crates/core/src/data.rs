//! Shared data model and the on-disk formats for marker sequences,
//! ground-truth sidecars, intensity frames and point clouds.
//!
//! Conventions used throughout the crate:
//!
//! - image coordinates have their origin at the top-left, `x` to the right
//!   and `y` down; a positive signed angle is a clockwise rotation on screen
//! - tactile quantities are in pixels, scene geometry in meters, reported
//!   angles in degrees (radians internally)
//! - a marker that drops out keeps its slot with `visible = false`, so
//!   correspondence between frames is positional by id

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Vector2, Vector3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("line {line}: frame index {index} does not increase (previous {previous})")]
    NonMonotoneFrame {
        line: usize,
        index: u64,
        previous: u64,
    },
    #[error("line {line}: time {time} decreases (previous {previous})")]
    NonMonotoneTime { line: usize, time: f64, previous: f64 },
    #[error("line {line}: duplicate marker id {id}")]
    DuplicateMarker { line: usize, id: u32 },
    #[error("line {line}: marker id set differs from the first frame")]
    InconsistentMarkers { line: usize },
    #[error("ground truth does not match the sequence: {0}")]
    GroundTruthMismatch(String),
    #[error("point cloud has {0} points, need at least 3")]
    TooFewPoints(usize),
    #[error("bad image: {0}")]
    BadImage(String),
}

impl DataError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DataError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Marker {
    pub id: u32,
    pub x: f64,
    pub y: f64,
    pub visible: bool,
}

impl Marker {
    pub fn new(id: u32, x: f64, y: f64) -> Self {
        Marker {
            id,
            x,
            y,
            visible: true,
        }
    }

    pub fn pos(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }
}

/// Tracked marker positions extracted from one tactile image.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerFrame {
    pub frame_index: u64,
    pub time_s: f64,
    pub markers: Vec<Marker>,
}

impl MarkerFrame {
    pub fn marker(&self, id: u32) -> Option<&Marker> {
        // Frames written by this crate are id-sorted; fall back to a scan.
        match self.markers.binary_search_by_key(&id, |m| m.id) {
            Ok(i) => Some(&self.markers[i]),
            Err(_) => self.markers.iter().find(|m| m.id == id),
        }
    }

    pub fn visible(&self) -> impl Iterator<Item = &Marker> {
        self.markers.iter().filter(|m| m.visible)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundTruthFrame {
    pub frame_index: u64,
    /// Clockwise-positive, degrees.
    pub angle_deg: f64,
    pub rotating: bool,
}

/// Three 8-bit planes (R, G, B), each row-major with `width * height`
/// samples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntensityFrame {
    width: usize,
    height: usize,
    planes: [Vec<u8>; 3],
}

impl IntensityFrame {
    pub fn new(width: usize, height: usize, planes: [Vec<u8>; 3]) -> Result<Self, DataError> {
        let n = width * height;
        if planes.iter().any(|p| p.len() != n) {
            return Err(DataError::BadImage(format!(
                "planes must hold {width}x{height} samples"
            )));
        }
        Ok(IntensityFrame {
            width,
            height,
            planes,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        IntensityFrame {
            width,
            height,
            planes: rgb.map(|v| vec![v; width * height]),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn plane(&self, channel: usize) -> &[u8] {
        &self.planes[channel]
    }

    pub fn plane_mut(&mut self, channel: usize) -> &mut [u8] {
        &mut self.planes[channel]
    }

    pub fn get(&self, channel: usize, x: usize, y: usize) -> u8 {
        self.planes[channel][y * self.width + x]
    }

    /// HSV value channel, `max(R, G, B)` per pixel.
    pub fn value_channel(&self) -> Vec<u8> {
        let [r, g, b] = &self.planes;
        r.iter()
            .zip(g)
            .zip(b)
            .map(|((&r, &g), &b)| r.max(g).max(b))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vector3<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Self {
        PointCloud { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

// ---------------------------------------------------------------------------
// Marker sequences

fn malformed(line: usize, msg: impl Into<String>) -> DataError {
    DataError::Malformed {
        line,
        msg: msg.into(),
    }
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, DataError> {
    let tok = tok.ok_or_else(|| malformed(line, format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| malformed(line, format!("invalid {what} `{tok}`")))
}

fn parse_finite(tok: Option<&str>, line: usize, what: &str) -> Result<f64, DataError> {
    let v: f64 = parse_num(tok, line, what)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(malformed(line, format!("non-finite {what}")))
    }
}

fn parse_flag(tok: Option<&str>, line: usize, what: &str) -> Result<bool, DataError> {
    match tok {
        Some("1") => Ok(true),
        Some("0") => Ok(false),
        Some(t) => Err(malformed(line, format!("invalid {what} `{t}`, expected 0 or 1"))),
        None => Err(malformed(line, format!("missing {what}"))),
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Parses the line-delimited marker format and checks every sequence
/// invariant.
pub fn parse_sequence(text: &str) -> Result<Vec<MarkerFrame>, DataError> {
    let mut frames: Vec<MarkerFrame> = Vec::new();
    let mut id_set: Option<BTreeSet<u32>> = None;
    for (line, content) in content_lines(text) {
        let mut tok = content.split_whitespace();
        let frame_index: u64 = parse_num(tok.next(), line, "frame index")?;
        let time_s = parse_finite(tok.next(), line, "time")?;
        let count: usize = parse_num(tok.next(), line, "marker count")?;
        let mut markers = Vec::with_capacity(count);
        let mut ids = BTreeSet::new();
        for _ in 0..count {
            let id: u32 = parse_num(tok.next(), line, "marker id")?;
            let x = parse_finite(tok.next(), line, "x")?;
            let y = parse_finite(tok.next(), line, "y")?;
            let visible = parse_flag(tok.next(), line, "visibility")?;
            if !ids.insert(id) {
                return Err(DataError::DuplicateMarker { line, id });
            }
            markers.push(Marker { id, x, y, visible });
        }
        if tok.next().is_some() {
            return Err(malformed(line, "trailing fields after the declared markers"));
        }
        if let Some(prev) = frames.last() {
            if frame_index <= prev.frame_index {
                return Err(DataError::NonMonotoneFrame {
                    line,
                    index: frame_index,
                    previous: prev.frame_index,
                });
            }
            if time_s < prev.time_s {
                return Err(DataError::NonMonotoneTime {
                    line,
                    time: time_s,
                    previous: prev.time_s,
                });
            }
        }
        match &id_set {
            None => id_set = Some(ids),
            Some(first) if *first != ids => {
                return Err(DataError::InconsistentMarkers { line });
            }
            Some(_) => {}
        }
        frames.push(MarkerFrame {
            frame_index,
            time_s,
            markers,
        });
    }
    Ok(frames)
}

pub fn format_sequence(frames: &[MarkerFrame]) -> String {
    let mut out = String::new();
    for f in frames {
        write!(out, "{} {} {}", f.frame_index, f.time_s, f.markers.len()).unwrap();
        for m in &f.markers {
            write!(out, " {} {} {} {}", m.id, m.x, m.y, u8::from(m.visible)).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn parse_ground_truth(text: &str) -> Result<Vec<GroundTruthFrame>, DataError> {
    let mut out: Vec<GroundTruthFrame> = Vec::new();
    for (line, content) in content_lines(text) {
        let mut tok = content.split_whitespace();
        let frame_index: u64 = parse_num(tok.next(), line, "frame index")?;
        let angle_deg = parse_finite(tok.next(), line, "angle")?;
        let rotating = parse_flag(tok.next(), line, "rotating flag")?;
        if tok.next().is_some() {
            return Err(malformed(line, "trailing fields"));
        }
        if let Some(prev) = out.last() {
            if frame_index <= prev.frame_index {
                return Err(DataError::NonMonotoneFrame {
                    line,
                    index: frame_index,
                    previous: prev.frame_index,
                });
            }
        }
        out.push(GroundTruthFrame {
            frame_index,
            angle_deg,
            rotating,
        });
    }
    Ok(out)
}

pub fn format_ground_truth(gt: &[GroundTruthFrame]) -> String {
    let mut out = String::new();
    for g in gt {
        writeln!(out, "{} {} {}", g.frame_index, g.angle_deg, u8::from(g.rotating)).unwrap();
    }
    out
}

/// Path of the ground-truth sidecar belonging to a sequence file.
pub fn ground_truth_path(seq_path: &Path) -> PathBuf {
    seq_path.with_extension("gt")
}

/// Directory holding the per-frame PPM images of a sequence file.
pub fn frames_dir(seq_path: &Path) -> PathBuf {
    let stem = seq_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    seq_path.with_file_name(format!("{stem}_frames"))
}

fn check_ground_truth(frames: &[MarkerFrame], gt: &[GroundTruthFrame]) -> Result<(), DataError> {
    if frames.len() != gt.len() {
        return Err(DataError::GroundTruthMismatch(format!(
            "{} frames but {} ground-truth rows",
            frames.len(),
            gt.len()
        )));
    }
    for (f, g) in frames.iter().zip(gt) {
        if f.frame_index != g.frame_index {
            return Err(DataError::GroundTruthMismatch(format!(
                "frame {} paired with ground-truth frame {}",
                f.frame_index, g.frame_index
            )));
        }
    }
    Ok(())
}

/// Reads a marker sequence and, when a `.gt` sidecar exists next to it, the
/// paired ground truth.
pub fn read_sequence(
    path: &Path,
) -> Result<(Vec<MarkerFrame>, Option<Vec<GroundTruthFrame>>), DataError> {
    let text = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    let frames = parse_sequence(&text)?;
    let gt_path = ground_truth_path(path);
    let gt = if gt_path.exists() {
        let text = fs::read_to_string(&gt_path).map_err(|e| DataError::io(&gt_path, e))?;
        let gt = parse_ground_truth(&text)?;
        check_ground_truth(&frames, &gt)?;
        Some(gt)
    } else {
        None
    };
    Ok((frames, gt))
}

pub fn write_sequence(
    path: &Path,
    frames: &[MarkerFrame],
    ground_truth: Option<&[GroundTruthFrame]>,
) -> Result<(), DataError> {
    fs::write(path, format_sequence(frames)).map_err(|e| DataError::io(path, e))?;
    if let Some(gt) = ground_truth {
        check_ground_truth(frames, gt)?;
        let gt_path = ground_truth_path(path);
        fs::write(&gt_path, format_ground_truth(gt)).map_err(|e| DataError::io(&gt_path, e))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Point clouds

pub fn parse_point_cloud(text: &str) -> Result<PointCloud, DataError> {
    let mut points = Vec::new();
    for (line, content) in content_lines(text) {
        let mut fields = content.split(',').map(str::trim);
        let x = parse_finite(fields.next(), line, "x")?;
        let y = parse_finite(fields.next(), line, "y")?;
        let z = parse_finite(fields.next(), line, "z")?;
        if fields.next().is_some() {
            return Err(malformed(line, "expected exactly three fields"));
        }
        points.push(Vector3::new(x, y, z));
    }
    if points.len() < 3 {
        return Err(DataError::TooFewPoints(points.len()));
    }
    Ok(PointCloud { points })
}

pub fn format_point_cloud(cloud: &PointCloud) -> String {
    let mut out = String::new();
    for p in &cloud.points {
        writeln!(out, "{},{},{}", p.x, p.y, p.z).unwrap();
    }
    out
}

pub fn read_point_cloud(path: &Path) -> Result<PointCloud, DataError> {
    let text = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    parse_point_cloud(&text)
}

pub fn write_point_cloud(path: &Path, cloud: &PointCloud) -> Result<(), DataError> {
    fs::write(path, format_point_cloud(cloud)).map_err(|e| DataError::io(path, e))
}

// ---------------------------------------------------------------------------
// Binary PPM (P6)

pub fn encode_ppm(frame: &IntensityFrame) -> Vec<u8> {
    let mut out = format!("P6\n{} {}\n255\n", frame.width, frame.height).into_bytes();
    out.reserve(frame.width * frame.height * 3);
    let [r, g, b] = &frame.planes;
    for i in 0..frame.width * frame.height {
        out.extend_from_slice(&[r[i], g[i], b[i]]);
    }
    out
}

pub fn decode_ppm(bytes: &[u8]) -> Result<IntensityFrame, DataError> {
    let bad = |m: &str| DataError::BadImage(m.to_string());
    let mut pos = 0;
    let mut header = Vec::with_capacity(4);
    while header.len() < 4 {
        // skip whitespace and comments
        while pos < bytes.len() {
            if bytes[pos].is_ascii_whitespace() {
                pos += 1;
            } else if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(bad("truncated header"));
        }
        header.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ascii header"))?);
    }
    if header[0] != "P6" {
        return Err(bad("not a binary PPM (P6)"));
    }
    let width: usize = header[1].parse().map_err(|_| bad("bad width"))?;
    let height: usize = header[2].parse().map_err(|_| bad("bad height"))?;
    if header[3] != "255" {
        return Err(bad("only 8-bit PPM (maxval 255) is supported"));
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let n = width * height;
    let raster = bytes.get(pos..).ok_or_else(|| bad("missing raster"))?;
    if raster.len() != n * 3 {
        return Err(bad(&format!(
            "raster holds {} bytes, expected {}",
            raster.len(),
            n * 3
        )));
    }
    let mut planes = [vec![0u8; n], vec![0u8; n], vec![0u8; n]];
    for (i, px) in raster.chunks_exact(3).enumerate() {
        planes[0][i] = px[0];
        planes[1][i] = px[1];
        planes[2][i] = px[2];
    }
    IntensityFrame::new(width, height, planes)
}

pub fn ppm_file_name(frame_index: u64) -> String {
    format!("frame_{frame_index:06}.ppm")
}

pub fn read_ppm(path: &Path) -> Result<IntensityFrame, DataError> {
    let bytes = fs::read(path).map_err(|e| DataError::io(path, e))?;
    decode_ppm(&bytes)
}

pub fn write_ppm(path: &Path, frame: &IntensityFrame) -> Result<(), DataError> {
    fs::write(path, encode_ppm(frame)).map_err(|e| DataError::io(path, e))
}
