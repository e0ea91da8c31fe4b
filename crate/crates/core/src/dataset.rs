//! Image datasets: CSV files, PGM directories and a seeded generator.
//!
//! CSV rows are `label,v1,...,vq` with no header. For image datasets the
//! values are one image flattened row-major.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::classify::LabeledFeatures;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::tensor::{flatten_slabs, PersonPartition, Tensor3};

/// Images stacked along mode 3 with one label per image.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub tensor: Tensor3,
    pub labels: Vec<usize>,
    pub partition: PersonPartition,
}

impl Dataset {
    /// Derives the partition from the label blocks. Labels must be non-decreasing.
    pub fn new(tensor: Tensor3, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != tensor.n3() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} images",
                labels.len(),
                tensor.n3()
            )));
        }
        let partition = partition_from_labels(&labels)?;
        Ok(Self {
            tensor,
            labels,
            partition,
        })
    }

    pub fn image_dims(&self) -> (usize, usize) {
        let (h, w, _) = self.tensor.dims();
        (h, w)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `max label + 1`.
    pub fn n_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// One flattened image per row.
    pub fn features(&self) -> Matrix {
        flatten_slabs(&self.tensor)
    }

    pub fn labeled_features(&self) -> Result<LabeledFeatures> {
        LabeledFeatures::with_inferred_classes(self.features(), self.labels.clone())
    }
}

/// Block sizes of a non-decreasing label sequence.
pub fn partition_from_labels(labels: &[usize]) -> Result<PersonPartition> {
    let mut counts: Vec<usize> = Vec::new();
    for (i, w) in labels.iter().enumerate() {
        if i > 0 && *w < labels[i - 1] {
            return Err(Error::NonContiguousLabels { line: i as u64 + 1 });
        }
        if i == 0 || *w != labels[i - 1] {
            counts.push(1);
        } else {
            *counts.last_mut().expect("block started") += 1;
        }
    }
    PersonPartition::new(counts)
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Reads `label,v1,...,vq` rows. Every row must have the same `q`.
pub fn read_labeled_csv(path: impl AsRef<Path>) -> Result<LabeledFeatures> {
    let path = path.as_ref();
    let (labels, values, q) = read_rows(path, None)?;
    let features = Matrix::new(labels.len(), q, values)
        .map_err(|e| parse_error(path, 0, e.to_string()))?;
    LabeledFeatures::with_inferred_classes(features, labels)
}

fn read_rows(path: &Path, expected: Option<usize>) -> Result<(Vec<usize>, Vec<f64>, usize)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut labels = Vec::new();
    let mut values = Vec::new();
    let mut width = expected;
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let label: usize = record[0]
            .parse()
            .map_err(|_| parse_error(path, line, format!("bad label {:?}", &record[0])))?;
        let found = record.len() - 1;
        match width {
            Some(w) if w != found => {
                return Err(match expected {
                    Some(_) => Error::BadPixelCount {
                        line,
                        expected: w,
                        found,
                    },
                    None => parse_error(path, line, format!("expected {w} values, found {found}")),
                })
            }
            None if found == 0 => return Err(parse_error(path, line, "row has no values")),
            _ => width = Some(found),
        }
        for field in record.iter().skip(1) {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_error(path, line, format!("bad value {field:?}")))?;
            if !v.is_finite() {
                return Err(parse_error(path, line, format!("non-finite value {field:?}")));
            }
            values.push(v);
        }
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(parse_error(path, 0, "no data rows"));
    }
    Ok((labels, values, width.expect("at least one row")))
}

/// Writes `label,v1,...,vq` rows with shortest round-trip decimals.
pub fn write_labeled_csv(path: impl AsRef<Path>, features: &Matrix, labels: &[usize]) -> Result<()> {
    if labels.len() != features.rows() {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {} rows",
            labels.len(),
            features.rows()
        )));
    }
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    let mut line = String::new();
    for (i, label) in labels.iter().enumerate() {
        line.clear();
        line.push_str(&label.to_string());
        for v in features.row(i) {
            line.push(',');
            line.push_str(&v.to_string());
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_csv_dataset(path: impl AsRef<Path>, height: usize, width: usize) -> Result<Dataset> {
    let path = path.as_ref();
    if height == 0 || width == 0 {
        return Err(Error::InvalidParameter(format!("image size {height}x{width}")));
    }
    let (labels, values, _) = read_rows(path, Some(height * width))?;
    let tensor = Tensor3::new(height, width, labels.len(), values)?;
    Dataset::new(tensor, labels)
}

pub fn save_csv_dataset(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    write_labeled_csv(path, &ds.features(), &ds.labels)
}

/// A binary greyscale PGM image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    /// Row-major, one byte per pixel.
    pub pixels: Vec<u8>,
}

impl PgmImage {
    /// Pixels divided by `maxval`, as a `height × width` matrix.
    pub fn to_matrix(&self) -> Matrix {
        let max = f64::from(self.maxval);
        let data = self.pixels.iter().map(|&b| f64::from(b) / max).collect();
        Matrix::from_vec_unchecked(self.height, self.width, data)
    }
}

/// Parses a "P5" image with `maxval ≤ 255`; `#` comments are allowed in the header.
pub fn parse_pgm(path: &Path, bytes: &[u8]) -> Result<PgmImage> {
    let err = |m: &str| Error::PgmFormat {
        path: path.to_path_buf(),
        message: m.to_string(),
    };
    if bytes.len() < 2 || &bytes[..2] != b"P5" {
        return Err(err("missing P5 magic"));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for f in &mut fields {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(err("truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
            pos += 1;
        }
        *f = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| err("bad header number"))?;
    }
    if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
        return Err(err("header must end with a whitespace byte"));
    }
    pos += 1;
    let [width, height, maxval] = fields;
    if width == 0 || height == 0 {
        return Err(err("zero image dimension"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(err("maxval must be in 1..=255"));
    }
    let raster = &bytes[pos..];
    if raster.len() != width * height {
        return Err(err(&format!(
            "expected {} pixel bytes, found {}",
            width * height,
            raster.len()
        )));
    }
    if raster.iter().any(|&b| usize::from(b) > maxval) {
        return Err(err("pixel exceeds maxval"));
    }
    Ok(PgmImage {
        width,
        height,
        maxval: maxval as u16,
        pixels: raster.to_vec(),
    })
}

pub fn read_pgm(path: impl AsRef<Path>) -> Result<PgmImage> {
    let path = path.as_ref();
    parse_pgm(path, &fs::read(path)?)
}

pub fn encode_pgm(img: &PgmImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n{}\n", img.width, img.height, img.maxval).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

pub fn write_pgm(path: impl AsRef<Path>, img: &PgmImage) -> Result<()> {
    fs::write(path, encode_pgm(img))?;
    Ok(())
}

/// Reads `filename label` pairs, separated by whitespace or a comma.
/// Blank lines and lines starting with `#` are skipped.
pub fn read_labels_file(path: impl AsRef<Path>) -> Result<HashMap<String, usize>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut map = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty());
        let (Some(name), Some(label), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(parse_error(path, i as u64 + 1, "expected `filename label`"));
        };
        let label = label
            .parse()
            .map_err(|_| parse_error(path, i as u64 + 1, format!("bad label {label:?}")))?;
        map.insert(name.to_string(), label);
    }
    Ok(map)
}

/// Loads every `*.pgm` file in `dir`, ordered by (label, filename).
pub fn load_pgm_dir(dir: impl AsRef<Path>, labels_file: impl AsRef<Path>) -> Result<Dataset> {
    let labels = read_labels_file(labels_file)?;
    let mut entries: Vec<(usize, String, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir.as_ref())? {
        let path = entry?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("pgm") {
            continue;
        }
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::MissingLabel(path.display().to_string()))?
            .to_string();
        let label = *labels
            .get(&name)
            .ok_or_else(|| Error::MissingLabel(name.clone()))?;
        entries.push((label, name, path));
    }
    if entries.is_empty() {
        return Err(Error::PgmFormat {
            path: dir.as_ref().to_path_buf(),
            message: "no .pgm files".into(),
        });
    }
    if entries.len() < labels.len() {
        warn!(
            "labels file lists {} images, directory has {}",
            labels.len(),
            entries.len()
        );
    }
    entries.sort();
    let mut slabs = Vec::with_capacity(entries.len());
    let mut dims = None;
    for (_, _, path) in &entries {
        let img = read_pgm(path)?;
        let found = (img.height, img.width);
        match dims {
            None => dims = Some(found),
            Some(expected) if expected != found => {
                return Err(Error::InconsistentDimensions {
                    path: path.clone(),
                    expected,
                    found,
                })
            }
            _ => {}
        }
        slabs.push(img.to_matrix());
    }
    let tensor = Tensor3::from_slabs(&slabs)?;
    Dataset::new(tensor, entries.into_iter().map(|(l, _, _)| l).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SynthSpec {
    pub n_classes: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub height: usize,
    pub width: usize,
    pub separation: f64,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_classes: 15,
            train_per_class: 8,
            test_per_class: 3,
            height: 32,
            width: 32,
            separation: 1.0,
            noise: 0.5,
            seed: 0,
        }
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Class means with i.i.d. `separation · N(0,1)` pixels; samples add `noise · N(0,1)`.
/// Means, training noise and test noise come from separate generator streams.
pub fn synth_blobs(spec: &SynthSpec) -> Result<(Dataset, Dataset)> {
    let s = spec;
    if s.n_classes == 0 || s.train_per_class == 0 || s.test_per_class == 0 {
        return Err(Error::InvalidParameter("synthetic counts must be at least 1".into()));
    }
    if s.height == 0 || s.width == 0 {
        return Err(Error::InvalidParameter("image dimensions must be at least 1".into()));
    }
    if !(s.separation > 0.0) || !(s.noise >= 0.0) || !s.noise.is_finite() || !s.separation.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "need separation > 0 and noise >= 0, got {} and {}",
            s.separation, s.noise
        )));
    }
    let pixels = s.height * s.width;
    let stream = |k: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
        rng.set_stream(k);
        rng
    };
    let mut mean_rng = stream(0);
    let means: Vec<Vec<f64>> = (0..s.n_classes)
        .map(|_| gaussian_vec(&mut mean_rng, pixels, s.separation))
        .collect();
    let sample = |per_class: usize, k: u64| -> Result<Dataset> {
        let mut rng = stream(k);
        let mut data = Vec::with_capacity(s.n_classes * per_class * pixels);
        let mut labels = Vec::with_capacity(s.n_classes * per_class);
        for (c, mean) in means.iter().enumerate() {
            for _ in 0..per_class {
                let noise = gaussian_vec(&mut rng, pixels, s.noise);
                data.extend(mean.iter().zip(noise).map(|(m, e)| m + e));
                labels.push(c);
            }
        }
        let tensor = Tensor3::new(s.height, s.width, labels.len(), data)?;
        Dataset::new(tensor, labels)
    };
    Ok((sample(s.train_per_class, 1)?, sample(s.test_per_class, 2)?))
}
