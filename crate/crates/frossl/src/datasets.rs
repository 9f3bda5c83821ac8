//! Seeded Gaussian-mixture synthesis and an IDX binary parser.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::Matrix;
use crate::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Where a dataset came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Synthetic,
    Idx,
}

/// An in-memory labeled dataset.
#[derive(Debug, Clone)]
pub struct DatasetHandle {
    pub features: Matrix,
    pub labels: Vec<usize>,
    pub class_count: usize,
    pub provenance: Provenance,
}

impl DatasetHandle {
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        class_count: usize,
        provenance: Provenance,
    ) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::Inconsistent(format!(
                "{} feature rows but {} labels",
                features.rows(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_count) {
            return Err(Error::Inconsistent(format!(
                "label {bad} out of range for {class_count} classes"
            )));
        }
        Ok(Self { features, labels, class_count, provenance })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }
}

/// Class means on a seeded sphere of radius `spread`, unit isotropic noise
/// within each class.
pub fn synth_gaussian_mixture(
    classes: usize,
    dim: usize,
    per_class: usize,
    spread: f64,
    seed: u64,
) -> Result<DatasetHandle> {
    if classes == 0 || dim == 0 || per_class == 0 {
        return Err(Error::Param(
            "gaussian mixture needs positive class, dimension, and per-class counts".into(),
        ));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let means: Vec<Vec<f64>> = (0..classes)
        .map(|_| {
            let raw: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
            raw.into_iter().map(|v| v * spread / norm).collect()
        })
        .collect();
    let n = classes * per_class;
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for (c, mean) in means.iter().enumerate() {
        for _ in 0..per_class {
            for &m in mean {
                let noise: f64 = StandardNormal.sample(&mut rng);
                data.push(m + noise);
            }
            labels.push(c);
        }
    }
    DatasetHandle::new(Matrix::new(n, dim, data)?, labels, classes, Provenance::Synthetic)
}

fn read_u32_be(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::UnexpectedEof,
            format!("{what}: expected at least {end} bytes, got {}", bytes.len()),
        )));
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

/// Parse an MNIST-style IDX image/label pair.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<DatasetHandle> {
    let img = fs::read(images_path)?;
    let lbl = fs::read(labels_path)?;

    let magic = read_u32_be(&img, 0, "image header")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "image file magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"
        )));
    }
    let count = read_u32_be(&img, 4, "image count")? as usize;
    let h = read_u32_be(&img, 8, "image height")? as usize;
    let w = read_u32_be(&img, 12, "image width")? as usize;
    let expected = 16 + count * h * w;
    if img.len() != expected {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::UnexpectedEof,
            format!("image payload: expected {expected} bytes, got {}", img.len()),
        )));
    }

    let lmagic = read_u32_be(&lbl, 0, "label header")?;
    if lmagic != IDX_LABELS_MAGIC {
        return Err(Error::Format(format!(
            "label file magic {lmagic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"
        )));
    }
    let lcount = read_u32_be(&lbl, 4, "label count")? as usize;
    let lexpected = 8 + lcount;
    if lbl.len() != lexpected {
        return Err(Error::Io(std::io::Error::new(
            std::io::ErrorKind::UnexpectedEof,
            format!("label payload: expected {lexpected} bytes, got {}", lbl.len()),
        )));
    }
    if count != lcount {
        return Err(Error::Inconsistent(format!(
            "{count} images but {lcount} labels"
        )));
    }

    let data: Vec<f64> = img[16..].iter().map(|&b| b as f64 / 255.0).collect();
    let labels: Vec<usize> = lbl[8..].iter().map(|&b| b as usize).collect();
    let class_count = labels.iter().copied().max().map_or(1, |m| m + 1);
    DatasetHandle::new(Matrix::new(count, h * w, data)?, labels, class_count, Provenance::Idx)
}

/// Write an IDX image/label pair; the inverse of [`load_idx`] for values that
/// are exact multiples of 1/255.
pub fn save_idx(ds: &DatasetHandle, images_path: &Path, labels_path: &Path) -> Result<()> {
    let n = ds.len();
    let d = ds.dim();
    let mut img = Vec::with_capacity(16 + n * d);
    img.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    img.extend_from_slice(&(n as u32).to_be_bytes());
    img.extend_from_slice(&1u32.to_be_bytes());
    img.extend_from_slice(&(d as u32).to_be_bytes());
    for &v in ds.features.as_slice() {
        img.push((v.clamp(0.0, 1.0) * 255.0).round() as u8);
    }
    let mut lbl = Vec::with_capacity(8 + n);
    lbl.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    lbl.extend_from_slice(&(n as u32).to_be_bytes());
    for &l in &ds.labels {
        lbl.push(l as u8);
    }
    atomic_write(images_path, &img)?;
    atomic_write(labels_path, &lbl)?;
    Ok(())
}

/// Write via a temp file in the same directory, then rename into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp{}",
        path.file_name().map(|s| s.to_string_lossy()).unwrap_or_default(),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Seeded shuffling batch iterator; drops the last partial batch so every
/// batch has exactly `batch_size` rows.
pub struct BatchIter<'a> {
    ds: &'a DatasetHandle,
    batch_size: usize,
    rng: ChaCha12Rng,
    order: Vec<usize>,
    cursor: usize,
}

impl<'a> BatchIter<'a> {
    fn reshuffle(&mut self) {
        self.order.shuffle(&mut self.rng);
        self.cursor = 0;
    }

    /// Next batch, reshuffling at each epoch boundary. Never exhausts.
    pub fn next_batch(&mut self) -> (Matrix, Vec<usize>) {
        if self.cursor + self.batch_size > self.order.len() {
            self.reshuffle();
        }
        let idx = &self.order[self.cursor..self.cursor + self.batch_size];
        self.cursor += self.batch_size;
        let d = self.ds.dim();
        let mut data = Vec::with_capacity(self.batch_size * d);
        let mut labels = Vec::with_capacity(self.batch_size);
        for &i in idx {
            data.extend_from_slice(self.ds.features.row(i));
            labels.push(self.ds.labels[i]);
        }
        (Matrix::new(self.batch_size, d, data).expect("finite dataset"), labels)
    }

    /// Batches remaining in the current epoch.
    pub fn batches_per_epoch(&self) -> usize {
        self.order.len() / self.batch_size
    }
}

pub fn batch_iter(ds: &DatasetHandle, batch_size: usize, seed: u64) -> Result<BatchIter<'_>> {
    if batch_size == 0 || batch_size > ds.len() {
        return Err(Error::Param(format!(
            "batch size {batch_size} must be in 1..={}",
            ds.len()
        )));
    }
    let mut it = BatchIter {
        ds,
        batch_size,
        rng: ChaCha12Rng::seed_from_u64(seed),
        order: (0..ds.len()).collect(),
        cursor: 0,
    };
    it.reshuffle();
    Ok(it)
}

/// Seeded subsample of `count` rows without replacement.
pub fn subsample(ds: &DatasetHandle, count: usize, seed: u64) -> Result<DatasetHandle> {
    if count == 0 || count > ds.len() {
        return Err(Error::Param(format!("subsample count {count} must be in 1..={}", ds.len())));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut rng);
    order.truncate(count);
    let d = ds.dim();
    let mut data = Vec::with_capacity(count * d);
    let mut labels = Vec::with_capacity(count);
    for &i in &order {
        data.extend_from_slice(ds.features.row(i));
        labels.push(ds.labels[i]);
    }
    DatasetHandle::new(Matrix::new(count, d, data)?, labels, ds.class_count, ds.provenance)
}

#[allow(unused)]
fn _rng_bound_check<R: Rng>(_r: &mut R) {}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_pair(dir: &Path, pixels: &[u8], n: u32, h: u32, w: u32, labels: &[u8]) -> (std::path::PathBuf, std::path::PathBuf) {
        let img_path = dir.join("img.idx");
        let lbl_path = dir.join("lbl.idx");
        let mut img = Vec::new();
        img.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        img.extend_from_slice(&n.to_be_bytes());
        img.extend_from_slice(&h.to_be_bytes());
        img.extend_from_slice(&w.to_be_bytes());
        img.extend_from_slice(pixels);
        fs::write(&img_path, img).unwrap();
        let mut lbl = Vec::new();
        lbl.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        lbl.extend_from_slice(&(labels.len() as u32).to_be_bytes());
        lbl.extend_from_slice(labels);
        fs::write(&lbl_path, lbl).unwrap();
        (img_path, lbl_path)
    }

    #[test]
    fn mixture_examples() {
        let one = synth_gaussian_mixture(1, 4, 8, 3.0, 1).unwrap();
        assert!(one.labels.iter().all(|&l| l == 0));
        assert_eq!(one.len(), 8);

        let a = synth_gaussian_mixture(3, 5, 10, 2.0, 42).unwrap();
        let b = synth_gaussian_mixture(3, 5, 10, 2.0, 42).unwrap();
        assert_eq!(a.features.as_slice(), b.features.as_slice());
        assert_eq!(a.labels, b.labels);

        let c = synth_gaussian_mixture(3, 5, 10, 2.0, 43).unwrap();
        assert_ne!(a.features.as_slice(), c.features.as_slice());

        assert!(synth_gaussian_mixture(0, 4, 8, 1.0, 1).is_err());
    }

    #[test]
    fn mixture_class_means_sit_on_sphere() {
        let spread = 7.5;
        let ds = synth_gaussian_mixture(4, 16, 500, spread, 9).unwrap();
        // per-class sample mean approximates a radius-`spread` point
        for c in 0..4 {
            let rows: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == c).collect();
            let mut mean = [0.0; 16];
            for &i in &rows {
                for (m, &v) in mean.iter_mut().zip(ds.features.row(i)) {
                    *m += v;
                }
            }
            let norm = mean
                .iter()
                .map(|m| (m / rows.len() as f64).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!((norm - spread).abs() < 0.5, "class {c}: radius {norm}");
        }
    }

    #[test]
    fn idx_round_trip_and_values() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lbl) = fixture_pair(dir.path(), &[0, 51, 102, 255, 10, 20, 30, 40], 2, 2, 2, &[3, 7]);
        let ds = load_idx(&img, &lbl).unwrap();
        assert_eq!(ds.features.shape(), (2, 4));
        assert!((ds.features.get(0, 1) - 51.0 / 255.0).abs() < 1e-12);
        assert!((ds.features.get(1, 3) - 40.0 / 255.0).abs() < 1e-12);
        assert_eq!(ds.labels, vec![3, 7]);
        assert_eq!(ds.class_count, 8);
        assert!(ds.features.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));

        // writer round trip is byte-exact
        let img2 = dir.path().join("img2.idx");
        let lbl2 = dir.path().join("lbl2.idx");
        save_idx(&ds, &img2, &lbl2).unwrap();
        let reloaded = load_idx(&img2, &lbl2).unwrap();
        assert_eq!(reloaded.features.as_slice(), ds.features.as_slice());
        assert_eq!(reloaded.labels, ds.labels);
    }

    #[test]
    fn idx_malformed_inputs_yield_typed_errors() {
        let dir = tempfile::tempdir().unwrap();
        let (img, lbl) = fixture_pair(dir.path(), &[1, 2, 3, 4], 1, 2, 2, &[0]);

        // wrong image magic
        let bad = dir.path().join("badmagic.idx");
        let mut bytes = fs::read(&img).unwrap();
        bytes[3] = 0x02;
        fs::write(&bad, &bytes).unwrap();
        assert!(matches!(load_idx(&bad, &lbl), Err(Error::Format(_))));

        // truncated payload
        let trunc = dir.path().join("trunc.idx");
        let bytes = fs::read(&img).unwrap();
        fs::write(&trunc, &bytes[..bytes.len() - 2]).unwrap();
        assert!(matches!(load_idx(&trunc, &lbl), Err(Error::Io(_))));

        // count mismatch
        let (img2, _) = fixture_pair(dir.path(), &[1, 2, 3, 4, 5, 6, 7, 8], 2, 2, 2, &[0]);
        let lbl_one = dir.path().join("lbl.idx");
        assert!(matches!(load_idx(&img2, &lbl_one), Err(Error::Inconsistent(_))));

        // empty file
        let empty = dir.path().join("empty.idx");
        fs::write(&empty, []).unwrap();
        assert!(load_idx(&empty, &lbl).is_err());
    }

    #[test]
    fn batch_iter_examples() {
        let ds = synth_gaussian_mixture(2, 3, 10, 1.0, 5).unwrap();

        // full-dataset batch is a permutation
        let mut it = batch_iter(&ds, 20, 7).unwrap();
        let (_, labels) = it.next_batch();
        let mut sorted = labels.clone();
        sorted.sort_unstable();
        let mut expected = ds.labels.clone();
        expected.sort_unstable();
        assert_eq!(sorted, expected);

        // same seed reproduces the sequence
        let mut a = batch_iter(&ds, 8, 11).unwrap();
        let mut b = batch_iter(&ds, 8, 11).unwrap();
        for _ in 0..5 {
            let (ma, la) = a.next_batch();
            let (mb, lb) = b.next_batch();
            assert_eq!(ma.as_slice(), mb.as_slice());
            assert_eq!(la, lb);
        }

        // epochs cover identical multisets in (usually) different order
        let mut it = batch_iter(&ds, 10, 13).unwrap();
        assert_eq!(it.batches_per_epoch(), 2);
        let mut epoch1 = Vec::new();
        let mut epoch2 = Vec::new();
        for _ in 0..2 {
            epoch1.extend(it.next_batch().1);
        }
        for _ in 0..2 {
            epoch2.extend(it.next_batch().1);
        }
        let mut s1 = epoch1.clone();
        let mut s2 = epoch2.clone();
        s1.sort_unstable();
        s2.sort_unstable();
        assert_eq!(s1, s2);

        assert!(batch_iter(&ds, 21, 1).is_err());
        assert!(batch_iter(&ds, 0, 1).is_err());
    }

    #[test]
    fn subsample_is_deterministic_and_bounded() {
        let ds = synth_gaussian_mixture(3, 4, 20, 2.0, 17).unwrap();
        let a = subsample(&ds, 15, 3).unwrap();
        let b = subsample(&ds, 15, 3).unwrap();
        assert_eq!(a.features.as_slice(), b.features.as_slice());
        assert_eq!(a.len(), 15);
        assert!(subsample(&ds, 0, 1).is_err());
        assert!(subsample(&ds, 61, 1).is_err());
    }
}
