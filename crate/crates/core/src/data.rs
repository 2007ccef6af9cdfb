//! Datasets: IDX (MNIST-family) ingestion, the synthetic blob/ring benchmark,
//! Gaussian feature noise and stratified splitting.

use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::seed;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// N samples of d features, optionally labelled with classes in [0, K).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    features: Vec<f64>,
    dim: usize,
    labels: Option<Vec<usize>>,
    classes: usize,
}

impl Dataset {
    pub fn labeled(name: impl Into<String>, features: Vec<f64>, dim: usize, labels: Vec<usize>, classes: usize) -> Result<Self> {
        let ds = Self::build(name.into(), features, dim, Some(labels), classes)?;
        Ok(ds)
    }

    /// A dataset without class labels, e.g. an OOD set.
    pub fn unlabeled(name: impl Into<String>, features: Vec<f64>, dim: usize) -> Result<Self> {
        Self::build(name.into(), features, dim, None, 0)
    }

    fn build(name: String, features: Vec<f64>, dim: usize, labels: Option<Vec<usize>>, classes: usize) -> Result<Self> {
        if dim == 0 || features.is_empty() {
            return Err(Error::Empty("dataset"));
        }
        if features.len() % dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} feature values do not divide into rows of width {dim}",
                features.len()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { term: format!("features of {name}") });
        }
        let n = features.len() / dim;
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(Error::Dimension {
                    context: "label count vs rows",
                    expected: n,
                    found: labels.len(),
                });
            }
            if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
                return Err(Error::LabelRange { label: bad, classes });
            }
        }
        Ok(Self {
            name,
            features,
            dim,
            labels,
            classes,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.features.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn require_labels(&self) -> Result<&[usize]> {
        self.labels
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument(format!("dataset {} has no labels", self.name)))
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        let labels = self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect());
        Self::build(self.name.clone(), features, self.dim, labels, self.classes)
    }

    /// Per-class index lists, in index order.
    fn by_class(&self) -> Result<Vec<Vec<usize>>> {
        let labels = self.require_labels()?;
        let mut groups = vec![Vec::new(); self.classes];
        for (i, &l) in labels.iter().enumerate() {
            groups[l].push(i);
        }
        Ok(groups)
    }

    /// A stratified random subset of about `n` rows.
    pub fn subsample(&self, n: usize, seed: u64) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::Empty("subsample"));
        }
        if n >= self.len() {
            return Ok(self.clone());
        }
        let mut rng = seed::rng(seed);
        let mut picked = Vec::with_capacity(n);
        match self.labels {
            Some(_) => {
                let frac = n as f64 / self.len() as f64;
                for mut group in self.by_class()? {
                    group.shuffle(&mut rng);
                    let take = (group.len() as f64 * frac).round() as usize;
                    picked.extend_from_slice(&group[..take.min(group.len())]);
                }
            }
            None => {
                let mut all: Vec<usize> = (0..self.len()).collect();
                all.shuffle(&mut rng);
                picked.extend_from_slice(&all[..n]);
            }
        }
        picked.sort_unstable();
        self.subset(&picked)
    }
}

/// Decoded IDX image tensor, pixels scaled to [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<f64>,
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(Error::Truncated {
            expected: offset + 4,
            found: bytes.len(),
        })
}

fn check_magic(bytes: &[u8], want: u32) -> Result<()> {
    let found = read_u32(bytes, 0)?;
    if found != want {
        return Err(Error::Format {
            expected: format!("IDX magic 0x{want:08x}"),
            found: format!("0x{found:08x}"),
        });
    }
    Ok(())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    check_magic(bytes, IDX_IMAGES_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    if count == 0 || rows == 0 || cols == 0 {
        return Err(Error::Empty("IDX image file"));
    }
    let payload = &bytes[16..];
    let expected = count * rows * cols;
    if payload.len() < expected {
        return Err(Error::Truncated {
            expected: 16 + expected,
            found: bytes.len(),
        });
    }
    let pixels = payload[..expected].iter().map(|&b| b as f64 / 255.0).collect();
    Ok(IdxImages { count, rows, cols, pixels })
}

/// Raw label bytes. `classes`, when given, bounds every label.
pub fn parse_idx_labels(bytes: &[u8], classes: Option<usize>) -> Result<Vec<usize>> {
    check_magic(bytes, IDX_LABELS_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    if count == 0 {
        return Err(Error::Empty("IDX label file"));
    }
    let payload = &bytes[8..];
    if payload.len() < count {
        return Err(Error::Truncated {
            expected: 8 + count,
            found: bytes.len(),
        });
    }
    let labels: Vec<usize> = payload[..count].iter().map(|&b| b as usize).collect();
    if let Some(k) = classes {
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::LabelRange { label: bad, classes: k });
        }
    }
    Ok(labels)
}

pub fn encode_idx_images(rows: usize, cols: usize, pixels: &[u8]) -> Vec<u8> {
    assert!(rows > 0 && cols > 0 && pixels.len() % (rows * cols) == 0);
    let count = pixels.len() / (rows * cols);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IDX_IMAGES_MAGIC, count as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Reads a file, transparently inflating gzip content.
pub fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path)?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice()).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

/// Loads an IDX image file and optional label file as flat pixel rows.
pub fn load_idx(images: &Path, labels: Option<&Path>, classes: usize, name: &str) -> Result<Dataset> {
    let img = parse_idx_images(&read_maybe_gz(images)?)?;
    let dim = img.rows * img.cols;
    match labels {
        Some(path) => {
            let l = parse_idx_labels(&read_maybe_gz(path)?, Some(classes))?;
            if l.len() != img.count {
                return Err(Error::Dimension {
                    context: "IDX label count vs image count",
                    expected: img.count,
                    found: l.len(),
                });
            }
            Dataset::labeled(name, img.pixels, dim, l, classes)
        }
        None => Dataset::unlabeled(name, img.pixels, dim),
    }
}

/// Isotropic Gaussian clusters, `n_per_class` points around each center.
pub fn make_blobs(n_per_class: usize, centers: &[[f64; 2]], sigma: f64, seed: u64) -> Result<Dataset> {
    if centers.len() < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 centers, got {}", centers.len())));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("blob sigma must be > 0, got {sigma}")));
    }
    if n_per_class == 0 {
        return Err(Error::Empty("blobs"));
    }
    let mut rng = seed::rng(seed);
    let noise = Normal::new(0.0, sigma).expect("checked sigma");
    let mut features = Vec::with_capacity(2 * n_per_class * centers.len());
    let mut labels = Vec::with_capacity(n_per_class * centers.len());
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..n_per_class {
            features.push(center[0] + noise.sample(&mut rng));
            features.push(center[1] + noise.sample(&mut rng));
            labels.push(c);
        }
    }
    Dataset::labeled("blobs", features, 2, labels, centers.len())
}

/// Points at uniformly random angles on a circle of `radius` around the
/// origin, with Gaussian radial jitter. Unlabeled.
pub fn make_ood_ring(n: usize, radius: f64, sigma: f64, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Empty("ring"));
    }
    if !(radius > 0.0) || !(sigma >= 0.0) {
        return Err(Error::InvalidArgument(format!("ring needs radius > 0 and sigma >= 0, got {radius}, {sigma}")));
    }
    let mut rng = seed::rng(seed);
    let mut features = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let theta = rng.gen_range(0.0..std::f64::consts::TAU);
        let z: f64 = StandardNormal.sample(&mut rng);
        let r = radius + sigma * z;
        features.push(r * theta.cos());
        features.push(r * theta.sin());
    }
    Dataset::unlabeled("ring", features, 2)
}

/// Adds N(0, σ²) to every feature. Labels are untouched and nothing is
/// clamped.
pub fn add_noise(ds: &Dataset, sigma: f64, seed: u64) -> Result<Dataset> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::InvalidArgument(format!("noise sigma must be >= 0, got {sigma}")));
    }
    let mut out = ds.clone().with_name(format!("{}+noise", ds.name()));
    if sigma == 0.0 {
        return Ok(out);
    }
    let mut rng = seed::rng(seed);
    for v in &mut out.features {
        let z: f64 = StandardNormal.sample(&mut rng);
        *v += sigma * z;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
    pub seed: u64,
}

impl SplitSpec {
    fn validate(&self) -> Result<()> {
        let ok = |f: f64| f > 0.0 && f < 1.0;
        if !ok(self.train) || !ok(self.validation) || self.train + self.validation > 1.0 + 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "split fractions must lie in (0, 1) and sum to at most 1, got {} + {}",
                self.train, self.validation
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub validation: Dataset,
    /// Whatever the two fractions leave over, if anything.
    pub test: Option<Dataset>,
}

/// Stratified, seeded partition of a labelled dataset.
pub fn split(ds: &Dataset, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let (train, validation, test) = split_indices(ds, spec)?;
    if train.is_empty() || validation.is_empty() {
        return Err(Error::Empty("split part"));
    }
    Ok(Split {
        train: ds.subset(&train)?.with_name(format!("{}/train", ds.name())),
        validation: ds.subset(&validation)?.with_name(format!("{}/validation", ds.name())),
        test: if test.is_empty() {
            None
        } else {
            Some(ds.subset(&test)?.with_name(format!("{}/test", ds.name())))
        },
    })
}

/// Index form of [`split`]: disjoint train/validation/rest index lists.
pub fn split_indices(ds: &Dataset, spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    spec.validate()?;
    let mut rng = seed::rng(spec.seed);
    let (mut train, mut val, mut rest) = (Vec::new(), Vec::new(), Vec::new());
    let whole = spec.train + spec.validation >= 1.0 - 1e-12;
    for mut group in ds.by_class()? {
        group.shuffle(&mut rng);
        let n = group.len();
        let n_train = ((n as f64 * spec.train).round() as usize).min(n);
        let n_val = if whole {
            n - n_train
        } else {
            ((n as f64 * spec.validation).round() as usize).min(n - n_train)
        };
        train.extend_from_slice(&group[..n_train]);
        val.extend_from_slice(&group[n_train..n_train + n_val]);
        rest.extend_from_slice(&group[n_train + n_val..]);
    }
    for part in [&mut train, &mut val, &mut rest] {
        part.shuffle(&mut rng);
    }
    Ok((train, val, rest))
}

/// Equilateral triangle with unit side, centered on the origin.
pub fn unit_triangle() -> [[f64; 2]; 3] {
    let r = 1.0 / 3f64.sqrt();
    [0.0f64, 120.0, 240.0].map(|deg| {
        let t = (90.0 + deg).to_radians();
        [r * t.cos(), r * t.sin()]
    })
}
