//! Raster I/O, tiling, and dataset assembly.
//!
//! Rasters are [0,1]-normalized, band-major images. On disk they are
//! either 8-bit PNG (gray or RGB, values divided by 255) or the raw
//! "URTN1" tensor format (magic, u32 rank, u32 dims, little-endian f32
//! payload), which carries arbitrary floats bit-exactly.

use crate::maskops::BinaryMask;
use crate::tensor::Tensor;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("unreadable image {path}: {reason}")]
    BadImage { path: String, reason: String },
    #[error("unsupported bit depth or color type in {path} (need 8-bit gray or RGB)")]
    UnsupportedFormat { path: String },
    #[error("pixel value {value} outside [0,1] at index {index}")]
    OutOfRange { value: f32, index: usize },
    #[error("raster data length {got} does not match {width}x{height}x{bands}")]
    DataLength {
        width: usize,
        height: usize,
        bands: usize,
        got: usize,
    },
    #[error("bands must be 1 or 3, got {0}")]
    BadBandCount(usize),
    #[error("tile size {0} below the minimum of 8")]
    TileTooSmall(usize),
    #[error("tile index {index} missing from grid of {expected} tiles")]
    MissingTile { index: usize, expected: usize },
    #[error("tile {index} has wrong geometry")]
    BadTileGeometry { index: usize },
    #[error("date {index}: grid geometry differs from date 0")]
    GridMismatch { index: usize },
    #[error("date index {index} outside 1..={count}")]
    DateOutOfRange { index: usize, count: usize },
    #[error("malformed {what} manifest at line {line}: {reason}")]
    BadManifest {
        what: &'static str,
        line: usize,
        reason: String,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> PipelineError {
    PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Where the pixel values came from; PNG sources sit on the 1/255 grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SourceDepth {
    Eight,
    Float,
}

/// Georeference-free multi-band image, band-major, values in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    bands: usize,
    data: Vec<f32>,
    source_depth: SourceDepth,
}

impl Raster {
    pub fn new(
        width: usize,
        height: usize,
        bands: usize,
        data: Vec<f32>,
        source_depth: SourceDepth,
    ) -> Result<Self, PipelineError> {
        if bands != 1 && bands != 3 {
            return Err(PipelineError::BadBandCount(bands));
        }
        if data.len() != width * height * bands {
            return Err(PipelineError::DataLength {
                width,
                height,
                bands,
                got: data.len(),
            });
        }
        if let Some((index, &value)) =
            data.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(PipelineError::OutOfRange { value, index });
        }
        Ok(Raster {
            width,
            height,
            bands,
            data,
            source_depth,
        })
    }

    pub fn zeros(width: usize, height: usize, bands: usize) -> Self {
        Raster {
            width,
            height,
            bands,
            data: vec![0.0; width * height * bands],
            source_depth: SourceDepth::Float,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn source_depth(&self) -> SourceDepth {
        self.source_depth
    }

    #[inline]
    pub fn get(&self, band: usize, x: usize, y: usize) -> f32 {
        self.data[(band * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, band: usize, x: usize, y: usize, v: f32) {
        self.data[(band * self.height + y) * self.width + x] = v;
    }

    /// View as a [bands,H,W] tensor.
    pub fn to_tensor(&self) -> Tensor<f32> {
        Tensor::from_vec(&[self.bands, self.height, self.width], self.data.clone())
            .expect("raster data length is validated at construction")
    }

    /// Build from a [bands,H,W] (or [H,W]) tensor; values must be in [0,1].
    pub fn from_tensor(t: &Tensor<f32>) -> Result<Self, PipelineError> {
        let (bands, h, w) = match t.shape() {
            [h, w] => (1, *h, *w),
            [c, h, w] => (*c, *h, *w),
            other => {
                return Err(PipelineError::DataLength {
                    width: 0,
                    height: 0,
                    bands: other.len(),
                    got: t.len(),
                })
            }
        };
        Raster::new(w, h, bands, t.data().to_vec(), SourceDepth::Float)
    }

    pub fn from_mask(mask: &BinaryMask) -> Self {
        Raster {
            width: mask.width(),
            height: mask.height(),
            bands: 1,
            data: mask.bits().iter().map(|&b| b as f32).collect(),
            source_depth: SourceDepth::Eight,
        }
    }

    /// Binarize band 0 at `threshold` (strictly greater).
    pub fn to_mask(&self, threshold: f32) -> BinaryMask {
        let plane = &self.data[..self.width * self.height];
        BinaryMask::from_bits(
            self.width,
            self.height,
            plane.iter().map(|&v| u8::from(v > threshold)).collect(),
        )
    }
}

// ---------------------------------------------------------------------------
// File I/O
// ---------------------------------------------------------------------------

const URTN_MAGIC: &[u8; 5] = b"URTN1";

/// Write a tensor in the raw URTN1 format (bit-exact for arbitrary f32).
pub fn write_tensor(t: &Tensor<f32>, path: &Path) -> Result<(), PipelineError> {
    let mut buf = Vec::with_capacity(16 + t.len() * 4);
    buf.extend_from_slice(URTN_MAGIC);
    buf.extend_from_slice(&(t.rank() as u32).to_le_bytes());
    for &d in t.shape() {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in t.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| io_err(path, e))
}

/// Read a URTN1 tensor file.
pub fn read_tensor(path: &Path) -> Result<Tensor<f32>, PipelineError> {
    let mut f = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes).map_err(|e| io_err(path, e))?;
    parse_urtn(&bytes).ok_or_else(|| PipelineError::BadImage {
        path: path.display().to_string(),
        reason: "not a valid URTN1 file".into(),
    })
}

fn parse_urtn(bytes: &[u8]) -> Option<Tensor<f32>> {
    if bytes.len() < 9 || &bytes[..5] != URTN_MAGIC {
        return None;
    }
    let rank = u32::from_le_bytes(bytes[5..9].try_into().ok()?) as usize;
    let mut off = 9;
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        if off + 4 > bytes.len() {
            return None;
        }
        shape.push(u32::from_le_bytes(bytes[off..off + 4].try_into().ok()?) as usize);
        off += 4;
    }
    let count: usize = shape.iter().product();
    if bytes.len() != off + count * 4 {
        return None;
    }
    let mut data = Vec::with_capacity(count);
    for i in 0..count {
        let b = off + i * 4;
        data.push(f32::from_le_bytes(bytes[b..b + 4].try_into().ok()?));
    }
    Tensor::from_vec(&shape, data).ok()
}

/// Load a raster from PNG or URTN1, sniffing the magic bytes.
pub fn load_raster(path: &Path) -> Result<Raster, PipelineError> {
    let mut header = [0u8; 5];
    {
        let mut f = fs::File::open(path).map_err(|e| io_err(path, e))?;
        f.read_exact(&mut header).map_err(|e| io_err(path, e))?;
    }
    if &header == URTN_MAGIC {
        let t = read_tensor(path)?;
        return Raster::from_tensor(&t);
    }
    let img = image::open(path).map_err(|e| PipelineError::BadImage {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let (raw, bands, w, h): (Vec<u8>, usize, u32, u32) = match img {
        image::DynamicImage::ImageLuma8(im) => {
            let (w, h) = im.dimensions();
            (im.into_raw(), 1, w, h)
        }
        image::DynamicImage::ImageRgb8(im) => {
            let (w, h) = im.dimensions();
            (im.into_raw(), 3, w, h)
        }
        _ => {
            return Err(PipelineError::UnsupportedFormat {
                path: path.display().to_string(),
            })
        }
    };
    // Interleaved u8 -> band-major f32 in [0,1].
    let (w, h) = (w as usize, h as usize);
    let mut data = vec![0.0f32; w * h * bands];
    for y in 0..h {
        for x in 0..w {
            for b in 0..bands {
                data[(b * h + y) * w + x] = raw[(y * w + x) * bands + b] as f32 / 255.0;
            }
        }
    }
    Raster::new(w, h, bands, data, SourceDepth::Eight)
}

/// Save a raster: `.png` quantizes to the 1/255 grid (exact for values
/// already on it); any other extension writes URTN1. Out-of-range
/// values are an error, never clamped.
pub fn save_raster(r: &Raster, path: &Path) -> Result<(), PipelineError> {
    if let Some((index, &value)) = r
        .data
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
    {
        return Err(PipelineError::OutOfRange { value, index });
    }
    let is_png = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("png"))
        .unwrap_or(false);
    if !is_png {
        return write_tensor(&r.to_tensor(), path);
    }
    let (w, h) = (r.width as u32, r.height as u32);
    let quant = |v: f32| (v * 255.0).round() as u8;
    match r.bands {
        1 => {
            let buf: Vec<u8> = r.data.iter().map(|&v| quant(v)).collect();
            let im = image::GrayImage::from_raw(w, h, buf).expect("sized buffer");
            im.save(path).map_err(|e| PipelineError::BadImage {
                path: path.display().to_string(),
                reason: e.to_string(),
            })
        }
        3 => {
            let mut buf = vec![0u8; r.width * r.height * 3];
            for y in 0..r.height {
                for x in 0..r.width {
                    for b in 0..3 {
                        buf[(y * r.width + x) * 3 + b] = quant(r.get(b, x, y));
                    }
                }
            }
            let im = image::RgbImage::from_raw(w, h, buf).expect("sized buffer");
            im.save(path).map_err(|e| PipelineError::BadImage {
                path: path.display().to_string(),
                reason: e.to_string(),
            })
        }
        n => Err(PipelineError::BadBandCount(n)),
    }
}

// ---------------------------------------------------------------------------
// Tiling
// ---------------------------------------------------------------------------

/// Non-overlapping fixed-size blocks in row-major grid order, with the
/// original extent retained so stitching is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct TileSet {
    tile_size: usize,
    grid_cols: usize,
    grid_rows: usize,
    orig_width: usize,
    orig_height: usize,
    bands: usize,
    tiles: Vec<Raster>,
}

impl TileSet {
    pub fn tile_size(&self) -> usize {
        self.tile_size
    }

    pub fn grid_cols(&self) -> usize {
        self.grid_cols
    }

    pub fn grid_rows(&self) -> usize {
        self.grid_rows
    }

    pub fn orig_width(&self) -> usize {
        self.orig_width
    }

    pub fn orig_height(&self) -> usize {
        self.orig_height
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    /// Zero padding added on the right / bottom edges.
    pub fn pad(&self) -> (usize, usize) {
        (
            self.grid_cols * self.tile_size - self.orig_width,
            self.grid_rows * self.tile_size - self.orig_height,
        )
    }

    pub fn tiles(&self) -> &[Raster] {
        &self.tiles
    }

    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    /// True when two sets cut the same grid over the same extent.
    pub fn same_geometry(&self, other: &TileSet) -> bool {
        self.tile_size == other.tile_size
            && self.grid_cols == other.grid_cols
            && self.grid_rows == other.grid_rows
            && self.orig_width == other.orig_width
            && self.orig_height == other.orig_height
            && self.bands == other.bands
    }

    /// Reassemble from externally produced tiles (e.g. predictions),
    /// validating the grid is complete and homogeneous.
    pub fn from_parts(
        tile_size: usize,
        grid_cols: usize,
        grid_rows: usize,
        orig_width: usize,
        orig_height: usize,
        bands: usize,
        tiles: Vec<Raster>,
    ) -> Result<Self, PipelineError> {
        let expected = grid_cols * grid_rows;
        if tiles.len() != expected {
            return Err(PipelineError::MissingTile {
                index: tiles.len().min(expected),
                expected,
            });
        }
        for (i, t) in tiles.iter().enumerate() {
            if t.width() != tile_size || t.height() != tile_size || t.bands() != bands {
                return Err(PipelineError::BadTileGeometry { index: i });
            }
        }
        Ok(TileSet {
            tile_size,
            grid_cols,
            grid_rows,
            orig_width,
            orig_height,
            bands,
            tiles,
        })
    }

    /// Same grid, different tile contents.
    pub fn with_tiles(&self, tiles: Vec<Raster>) -> Result<Self, PipelineError> {
        TileSet::from_parts(
            self.tile_size,
            self.grid_cols,
            self.grid_rows,
            self.orig_width,
            self.orig_height,
            self.bands,
            tiles,
        )
    }
}

/// Cut `r` into tile_size x tile_size blocks, zero-padding the right and
/// bottom edges up to the next multiple.
pub fn tile(r: &Raster, tile_size: usize) -> Result<TileSet, PipelineError> {
    if tile_size < 8 {
        return Err(PipelineError::TileTooSmall(tile_size));
    }
    let grid_cols = r.width.div_ceil(tile_size);
    let grid_rows = r.height.div_ceil(tile_size);
    let mut tiles = Vec::with_capacity(grid_cols * grid_rows);
    for gy in 0..grid_rows {
        for gx in 0..grid_cols {
            let mut t = Raster::zeros(tile_size, tile_size, r.bands);
            t.source_depth = r.source_depth;
            for b in 0..r.bands {
                for y in 0..tile_size {
                    let sy = gy * tile_size + y;
                    if sy >= r.height {
                        break;
                    }
                    for x in 0..tile_size {
                        let sx = gx * tile_size + x;
                        if sx >= r.width {
                            break;
                        }
                        t.set(b, x, y, r.get(b, sx, sy));
                    }
                }
            }
            tiles.push(t);
        }
    }
    Ok(TileSet {
        tile_size,
        grid_cols,
        grid_rows,
        orig_width: r.width,
        orig_height: r.height,
        bands: r.bands,
        tiles,
    })
}

/// Exact inverse of [`tile`]: reassemble and crop the padding.
pub fn stitch(ts: &TileSet) -> Result<Raster, PipelineError> {
    let expected = ts.grid_cols * ts.grid_rows;
    if ts.tiles.len() != expected {
        return Err(PipelineError::MissingTile {
            index: ts.tiles.len(),
            expected,
        });
    }
    let mut out = Raster::zeros(ts.orig_width, ts.orig_height, ts.bands);
    out.source_depth = ts
        .tiles
        .first()
        .map(|t| t.source_depth)
        .unwrap_or(SourceDepth::Float);
    for gy in 0..ts.grid_rows {
        for gx in 0..ts.grid_cols {
            let t = &ts.tiles[gy * ts.grid_cols + gx];
            for b in 0..ts.bands {
                for y in 0..ts.tile_size {
                    let dy = gy * ts.tile_size + y;
                    if dy >= ts.orig_height {
                        break;
                    }
                    for x in 0..ts.tile_size {
                        let dx = gx * ts.tile_size + x;
                        if dx >= ts.orig_width {
                            break;
                        }
                        out.set(b, dx, dy, t.get(b, x, y));
                    }
                }
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Dataset assembly
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetRole {
    Train,
    Validate,
}

impl DatasetRole {
    pub fn as_str(&self) -> &'static str {
        match self {
            DatasetRole::Train => "train",
            DatasetRole::Validate => "validate",
        }
    }
}

/// Paired input/target tiles; pairing is by identical grid index, and
/// (k, m) record which dates the pairs were drawn from (1-based).
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Vec<Raster>,
    pub y: Vec<Raster>,
    pub role: DatasetRole,
    pub k: usize,
    pub m: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// X_j = date-k tile j, Y_j = date-m tile j. Dates are 1-based.
pub fn make_dataset(
    tilesets: &[TileSet],
    k: usize,
    m: usize,
    role: DatasetRole,
) -> Result<Dataset, PipelineError> {
    let count = tilesets.len();
    for idx in [k, m] {
        if idx == 0 || idx > count {
            return Err(PipelineError::DateOutOfRange { index: idx, count });
        }
    }
    for (i, ts) in tilesets.iter().enumerate().skip(1) {
        if !ts.same_geometry(&tilesets[0]) {
            return Err(PipelineError::GridMismatch { index: i });
        }
    }
    Ok(Dataset {
        x: tilesets[k - 1].tiles().to_vec(),
        y: tilesets[m - 1].tiles().to_vec(),
        role,
        k,
        m,
    })
}

/// The minimal competitor: prediction equals the input, unchanged.
pub fn persistence_baseline(input: &[Raster]) -> Vec<Raster> {
    input.to_vec()
}

// ---------------------------------------------------------------------------
// Manifests (line-oriented text)
// ---------------------------------------------------------------------------

/// Write a dataset manifest: header key=value lines, then one
/// tab-separated x/y path pair per line.
pub fn write_dataset_manifest(
    path: &Path,
    pairs: &[(String, String)],
    role: DatasetRole,
    k: usize,
    m: usize,
) -> Result<(), PipelineError> {
    let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut s = String::from("# growthcast dataset\n");
    s.push_str(&format!("role={}\nk={k}\nm={m}\n", role.as_str()));
    for (x, y) in pairs {
        s.push_str(&format!("{x}\t{y}\n"));
    }
    f.write_all(s.as_bytes()).map_err(|e| io_err(path, e))
}

/// Parsed dataset manifest.
pub struct DatasetManifest {
    pub role: DatasetRole,
    pub k: usize,
    pub m: usize,
    pub pairs: Vec<(String, String)>,
}

pub fn read_dataset_manifest(path: &Path) -> Result<DatasetManifest, PipelineError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let bad = |line: usize, reason: &str| PipelineError::BadManifest {
        what: "dataset",
        line,
        reason: reason.to_string(),
    };
    let mut role = None;
    let mut k = None;
    let mut m = None;
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some((key, value)) = line.split_once('=') {
            match key.trim() {
                "role" => {
                    role = Some(match value.trim() {
                        "train" => DatasetRole::Train,
                        "validate" => DatasetRole::Validate,
                        other => return Err(bad(i + 1, &format!("unknown role {other}"))),
                    })
                }
                "k" => k = value.trim().parse().ok(),
                "m" => m = value.trim().parse().ok(),
                other => return Err(bad(i + 1, &format!("unknown key {other}"))),
            }
            continue;
        }
        match line.split_once('\t') {
            Some((x, y)) => pairs.push((x.to_string(), y.to_string())),
            None => return Err(bad(i + 1, "expected x<TAB>y pair")),
        }
    }
    Ok(DatasetManifest {
        role: role.ok_or_else(|| bad(0, "missing role"))?,
        k: k.ok_or_else(|| bad(0, "missing k"))?,
        m: m.ok_or_else(|| bad(0, "missing m"))?,
        pairs,
    })
}
