//! Test problems on equidistant grids and loaders for user data.
//!
//! Grids live in `[0,1]^d` with `points_per_axis` points per axis, spaced
//! `1/(k-1)` apart. 2-D grids and images are flattened row-major.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::transport::{CostMatrix, Histogram};

/// Histograms read from CSV are renormalized (and flagged) past this mass defect.
pub const CSV_MASS_TOLERANCE: f64 = 1e-9;
/// Side length of the synthetic blob images.
pub const BLOB_SIZE: usize = 28;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridSpec {
    dimension: usize,
    points_per_axis: usize,
}

impl GridSpec {
    pub fn new(dimension: usize, points_per_axis: usize) -> Result<Self> {
        if !(1..=2).contains(&dimension) {
            return Err(Error::InvalidInput(format!(
                "grid dimension must be 1 or 2, got {dimension}"
            )));
        }
        if points_per_axis < 2 {
            return Err(Error::InvalidInput(format!(
                "a grid needs at least 2 points per axis, got {points_per_axis}"
            )));
        }
        Ok(GridSpec {
            dimension,
            points_per_axis,
        })
    }

    pub fn line(n: usize) -> Result<Self> {
        Self::new(1, n)
    }

    pub fn square(k: usize) -> Result<Self> {
        Self::new(2, k)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dimension as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinates of point `index`; unused trailing coordinates are zero.
    pub fn point(&self, index: usize) -> [f64; 2] {
        let k = self.points_per_axis;
        let h = 1.0 / (k - 1) as f64;
        match self.dimension {
            1 => [index as f64 * h, 0.0],
            _ => [(index / k) as f64 * h, (index % k) as f64 * h],
        }
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }
}

/// `C_ij = ||x_i - y_j||^2`.
pub fn squared_euclidean_cost(grid_a: &GridSpec, grid_b: &GridSpec) -> Result<CostMatrix> {
    if grid_a.dimension != grid_b.dimension {
        return Err(Error::InvalidInput(format!(
            "grid dimensions differ: {} vs {}",
            grid_a.dimension, grid_b.dimension
        )));
    }
    let xs = grid_a.points();
    let ys = grid_b.points();
    let cost = Array2::from_shape_fn((xs.len(), ys.len()), |(i, j)| {
        let d0 = xs[i][0] - ys[j][0];
        let d1 = xs[i][1] - ys[j][1];
        d0 * d0 + d1 * d1
    });
    CostMatrix::new(cost)
}

/// Two Gaussian bumps plus a constant 0.1 on a `k x k` grid: width factor 36
/// centred at `(1/3, 1/3)` for `a`, factor 9 centred at `(2/3, 2/3)` for `b`.
pub fn gaussian_pair_2d(points_per_axis: usize) -> Result<(Histogram, Histogram, GridSpec)> {
    let grid = GridSpec::square(points_per_axis)?;
    let bump = |centre: f64, width: f64| -> Array1<f64> {
        grid.points()
            .iter()
            .map(|x| (-width * ((x[0] - centre).powi(2) + (x[1] - centre).powi(2))).exp() + 0.1)
            .collect()
    };
    let a = Histogram::normalized(bump(1.0 / 3.0, 36.0))?;
    let b = Histogram::normalized(bump(2.0 / 3.0, 9.0))?;
    Ok((a, b, grid))
}

/// 1-D pair on `n` points:
/// `a ~ exp(-100 (x - 0.2)^2) + exp(-20 |x - 0.4|) + 0.01`,
/// `b ~ exp(-100 (x - 0.6)^2) + 0.01`.
pub fn bump_pair_1d(n: usize) -> Result<(Histogram, Histogram, GridSpec)> {
    let grid = GridSpec::line(n)?;
    let xs: Vec<f64> = grid.points().iter().map(|p| p[0]).collect();
    let a = xs
        .iter()
        .map(|&x| (-100.0 * (x - 0.2).powi(2)).exp() + (-20.0 * (x - 0.4).abs()).exp() + 1e-2)
        .collect();
    let b = xs.iter().map(|&x| (-100.0 * (x - 0.6).powi(2)).exp() + 1e-2).collect();
    Ok((Histogram::normalized(a)?, Histogram::normalized(b)?, grid))
}

/// Flattens `pixels` row-major, adds `gamma` everywhere and normalizes.
pub fn image_histogram(pixels: &Array2<f64>, gamma: f64) -> Result<Histogram> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidInput(format!("offset must be nonnegative, got {gamma}")));
    }
    if pixels.is_empty() {
        return Err(Error::DegenerateHistogram("image has no pixels".into()));
    }
    if let Some(p) = pixels.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "pixel values must be nonnegative, found {p}"
        )));
    }
    let values: Array1<f64> = pixels.iter().map(|p| p + gamma).collect();
    if values.sum() <= 0.0 {
        return Err(Error::DegenerateHistogram(
            "image is all zero and the offset is 0".into(),
        ));
    }
    Histogram::normalized(values)
}

/// Median of all entries, taking the midpoint of the central pair when the
/// count is even.
pub fn median_cost_scale(cost: &CostMatrix) -> Result<f64> {
    let mut values: Vec<f64> = cost.entries().iter().copied().collect();
    if values.is_empty() {
        return Err(Error::InvalidInput("cost matrix is empty".into()));
    }
    values.sort_unstable_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        Ok(values[mid])
    } else {
        Ok(0.5 * (values[mid - 1] + values[mid]))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadedHistogram {
    pub histogram: Histogram,
    /// The file's mass was off by more than [`CSV_MASS_TOLERANCE`] and was rescaled.
    pub renormalized: bool,
}

/// One nonnegative decimal per line. Blank lines are skipped.
pub fn load_histogram_csv(path: impl AsRef<Path>) -> Result<LoadedHistogram> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_histogram_csv(&text, path)
}

fn parse_histogram_csv(text: &str, path: &Path) -> Result<LoadedHistogram> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut values = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let field = raw.trim();
        if field.is_empty() {
            continue;
        }
        let value: f64 = field
            .parse()
            .map_err(|_| parse_err(idx + 1, format!("not a number: {field:?}")))?;
        if !value.is_finite() {
            return Err(parse_err(idx + 1, format!("value is not finite: {field}")));
        }
        if value < 0.0 {
            return Err(parse_err(idx + 1, format!("negative value {value}")));
        }
        values.push(value);
    }
    if values.is_empty() {
        return Err(parse_err(1, "no values".into()));
    }
    let mass: f64 = values.iter().sum();
    let renormalized = (mass - 1.0).abs() > CSV_MASS_TOLERANCE;
    let histogram = Histogram::normalized(Array1::from(values))?;
    Ok(LoadedHistogram {
        histogram,
        renormalized,
    })
}

/// Reads a P2 or P5 graymap. Values are divided by `maxval`, so the result
/// lies in `[0,1]`; rows of the matrix are image rows.
pub fn load_image_pgm(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_pgm(&bytes, path)
}

struct HeaderReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    line: usize,
}

impl HeaderReader<'_> {
    fn skip_space(&mut self) {
        while let Some(&c) = self.bytes.get(self.pos) {
            if c == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                if c == b'\n' {
                    self.line += 1;
                }
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    /// Next whitespace-delimited token and the line it starts on.
    fn token(&mut self) -> Option<(&str, usize)> {
        self.skip_space();
        let start = self.pos;
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|c| !c.is_ascii_whitespace() && *c != b'#')
        {
            self.pos += 1;
        }
        if start == self.pos {
            return None;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .map(|t| (t, self.line))
    }
}

fn parse_pgm(bytes: &[u8], path: &Path) -> Result<Array2<f64>> {
    let text_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut reader = HeaderReader { bytes, pos: 0, line: 1 };
    let binary = match reader.token() {
        Some(("P2", _)) => false,
        Some(("P5", _)) => true,
        _ => return Err(text_err(1, "expected magic number P2 or P5".into())),
    };
    let mut header = [0usize; 3];
    for (slot, name) in header.iter_mut().zip(["width", "height", "maxval"]) {
        let line = reader.line;
        let (token, line) = reader
            .token()
            .ok_or_else(|| text_err(line, format!("missing {name}")))?;
        *slot = token
            .parse()
            .map_err(|_| text_err(line, format!("{name} is not an integer: {token:?}")))?;
    }
    let [width, height, maxval] = header;
    if width == 0 || height == 0 {
        return Err(text_err(reader.line, "image has zero size".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(text_err(
            reader.line,
            format!("maxval must be in 1..=65535, got {maxval}"),
        ));
    }
    let count = width * height;
    let mut values = Vec::with_capacity(count);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        let start = reader.pos + 1;
        let depth = if maxval < 256 { 1 } else { 2 };
        let needed = start + count * depth;
        if bytes.len() < needed {
            return Err(Error::ParseBinary {
                path: path.to_path_buf(),
                offset: bytes.len(),
                message: format!("raster truncated, expected {} bytes", count * depth),
            });
        }
        for idx in 0..count {
            let offset = start + idx * depth;
            let raw = if depth == 1 {
                bytes[offset] as usize
            } else {
                ((bytes[offset] as usize) << 8) | bytes[offset + 1] as usize
            };
            if raw > maxval {
                return Err(Error::ParseBinary {
                    path: path.to_path_buf(),
                    offset,
                    message: format!("sample {raw} exceeds maxval {maxval}"),
                });
            }
            values.push(raw as f64 / maxval as f64);
        }
    } else {
        for _ in 0..count {
            let line = reader.line;
            let (token, line) = reader
                .token()
                .ok_or_else(|| text_err(line, format!("expected {count} samples, found {}", values.len())))?;
            let raw: usize = token
                .parse()
                .map_err(|_| text_err(line, format!("sample is not an integer: {token:?}")))?;
            if raw > maxval {
                return Err(text_err(line, format!("sample {raw} exceeds maxval {maxval}")));
            }
            values.push(raw as f64 / maxval as f64);
        }
    }
    Ok(Array2::from_shape_vec((height, width), values).expect("sample count matches the header"))
}

/// A 28x28 image made of two elongated Gaussian strokes, scaled to peak 1.
/// The same `seed` always gives the same image.
pub fn digit_like_blob(seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let strokes: Vec<[f64; 5]> = (0..2)
        .map(|_| {
            [
                rng.random_range(0.3..0.7),
                rng.random_range(0.3..0.7),
                rng.random_range(0.10..0.18),
                rng.random_range(0.025..0.045),
                rng.random_range(0.0..PI),
            ]
        })
        .collect();
    let h = 1.0 / (BLOB_SIZE - 1) as f64;
    let mut image = Array2::from_shape_fn((BLOB_SIZE, BLOB_SIZE), |(r, c)| {
        let (y, x) = (r as f64 * h, c as f64 * h);
        strokes
            .iter()
            .map(|&[cx, cy, major, minor, angle]| {
                let (s, co) = angle.sin_cos();
                let u = co * (x - cx) + s * (y - cy);
                let v = -s * (x - cx) + co * (y - cy);
                (-0.5 * ((u / major).powi(2) + (v / minor).powi(2))).exp()
            })
            .sum::<f64>()
    });
    let peak = image.fold(0.0_f64, |m, &p| m.max(p));
    image.mapv_inplace(|p| p / peak);
    image
}

/// Histograms of the blob images for `seed` and `seed + 1` with offset `gamma`.
pub fn blob_pair(seed: u64, gamma: f64) -> Result<(Histogram, Histogram, GridSpec)> {
    let grid = GridSpec::square(BLOB_SIZE)?;
    let a = image_histogram(&digit_like_blob(seed), gamma)?;
    let b = image_histogram(&digit_like_blob(seed.wrapping_add(1)), gamma)?;
    Ok((a, b, grid))
}
