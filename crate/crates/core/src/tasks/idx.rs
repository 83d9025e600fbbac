//! IDX image/label files and classification-as-regression helpers.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kernel::PointSet;

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

/// Raw IDX image tensor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

pub fn read_idx_images(path: &Path) -> Result<IdxImages> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 {
        return Err(Error::format(path, "truncated IDX header"));
    }
    let magic = be_u32(&bytes, 0);
    if magic != IMAGES_MAGIC {
        return Err(Error::format(path, format!("bad image magic {magic:#010x}")));
    }
    let count = be_u32(&bytes, 4) as usize;
    let rows = be_u32(&bytes, 8) as usize;
    let cols = be_u32(&bytes, 12) as usize;
    let need = count * rows * cols;
    if bytes.len() - 16 != need {
        return Err(Error::format(
            path,
            format!("expected {need} pixel bytes for {count}×{rows}×{cols}, found {}", bytes.len() - 16),
        ));
    }
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: bytes[16..].to_vec(),
    })
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 8 {
        return Err(Error::format(path, "truncated IDX header"));
    }
    let magic = be_u32(&bytes, 0);
    if magic != LABELS_MAGIC {
        return Err(Error::format(path, format!("bad label magic {magic:#010x}")));
    }
    let count = be_u32(&bytes, 4) as usize;
    if bytes.len() - 8 != count {
        return Err(Error::format(path, format!("expected {count} labels, found {}", bytes.len() - 8)));
    }
    Ok(bytes[8..].to_vec())
}

pub fn write_idx_images(path: &Path, images: &IdxImages) -> Result<()> {
    if images.pixels.len() != images.count * images.rows * images.cols {
        return Err(Error::DimensionMismatch {
            context: "IDX pixel buffer",
            expected: images.count * images.rows * images.cols,
            got: images.pixels.len(),
        });
    }
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [IMAGES_MAGIC, images.count as u32, images.rows as u32, images.cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Images flattened row-major with pixels mapped to `v / 255`, plus labels.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<(PointSet, Vec<usize>)> {
    let images = read_idx_images(images_path)?;
    let labels = read_idx_labels(labels_path)?;
    if images.count != labels.len() {
        return Err(Error::format(
            labels_path,
            format!("{} labels for {} images", labels.len(), images.count),
        ));
    }
    let dim = images.rows * images.cols;
    let data = images.pixels.iter().map(|&p| p as f64 / 255.0).collect();
    let points = PointSet::new(images.count, dim, data)?;
    Ok((points, labels.into_iter().map(usize::from).collect()))
}

pub fn one_hot(labels: &[usize], num_classes: usize) -> Result<DMatrix<f64>> {
    if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
        return Err(Error::invalid("labels", format!("label {bad} outside 0..{num_classes}")));
    }
    let mut m = DMatrix::zeros(labels.len(), num_classes);
    for (i, &l) in labels.iter().enumerate() {
        m[(i, l)] = 1.0;
    }
    Ok(m)
}

/// Class index of each row when every row is a one-hot vector.
pub fn one_hot_labels(targets: &DMatrix<f64>) -> Option<Vec<usize>> {
    (0..targets.nrows())
        .map(|i| {
            let row = targets.row(i);
            let ones = row.iter().filter(|&&v| v == 1.0).count();
            let zeros = row.iter().filter(|&&v| v == 0.0).count();
            (ones == 1 && ones + zeros == row.len()).then(|| row.iter().position(|&v| v == 1.0).unwrap())
        })
        .collect()
}

/// Seeded choice of `n` of `0..total` without replacement, balanced across
/// `groups` when given (largest-remainder quotas). Returned sorted.
fn choose(total: usize, n: usize, groups: Option<&[usize]>, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut picked = match groups {
        None => {
            let mut idx: Vec<usize> = (0..total).collect();
            idx.shuffle(rng);
            idx.truncate(n);
            idx
        }
        Some(labels) => {
            let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); classes];
            for (i, &l) in labels.iter().enumerate() {
                members[l].push(i);
            }
            let exact: Vec<f64> = members.iter().map(|m| n as f64 * m.len() as f64 / total as f64).collect();
            let mut quota: Vec<usize> = exact.iter().map(|q| q.floor() as usize).collect();
            let mut order: Vec<usize> = (0..classes).collect();
            order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
            let mut left = n - quota.iter().sum::<usize>();
            for &c in order.iter().cycle() {
                if left == 0 {
                    break;
                }
                if quota[c] < members[c].len() {
                    quota[c] += 1;
                    left -= 1;
                }
            }
            let mut out = Vec::with_capacity(n);
            for (c, m) in members.iter_mut().enumerate() {
                m.shuffle(rng);
                out.extend_from_slice(&m[..quota[c]]);
            }
            out
        }
    };
    picked.sort_unstable();
    picked
}

fn take_rows(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), m.ncols(), |i, c| m[(idx[i], c)])
}

/// Uniform subsample without replacement of each split, stratified by class
/// when the targets are one-hot.
pub fn subsample(data: &Dataset, n_train: usize, n_test: usize, seed: u64) -> Result<Dataset> {
    if n_train == 0 || n_test == 0 {
        return Err(Error::invalid("sizes", "subsample sizes must be at least 1"));
    }
    if n_train > data.n_train() || n_test > data.n_test() {
        return Err(Error::invalid(
            "sizes",
            format!(
                "requested {n_train}/{n_test} but only {}/{} available",
                data.n_train(),
                data.n_test()
            ),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train_labels = one_hot_labels(&data.train_y);
    let test_labels = one_hot_labels(&data.test_y);
    let tr = choose(data.n_train(), n_train, train_labels.as_deref(), &mut rng);
    let te = choose(data.n_test(), n_test, test_labels.as_deref(), &mut rng);
    Dataset::new(
        data.name.clone(),
        data.train_x.select(&tr)?,
        take_rows(&data.train_y, &tr),
        data.test_x.select(&te)?,
        take_rows(&data.test_y, &te),
    )
}

/// Center and scale every input column by the training-split statistics;
/// constant columns are only centered.
pub fn standardize(data: &Dataset) -> Result<Dataset> {
    let dim = data.input_dim();
    let n = data.n_train() as f64;
    let mut mean = vec![0.0; dim];
    for row in data.train_x.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v / n;
        }
    }
    let mut sd = vec![0.0; dim];
    for row in data.train_x.rows() {
        for c in 0..dim {
            sd[c] += (row[c] - mean[c]).powi(2) / n;
        }
    }
    let sd: Vec<f64> = sd.into_iter().map(|v| if v > 0.0 { v.sqrt() } else { 1.0 }).collect();
    let f = |c: usize, v: f64| (v - mean[c]) / sd[c];
    Dataset::new(
        data.name.clone(),
        data.train_x.map_values(f),
        data.train_y.clone(),
        data.test_x.map_values(f),
        data.test_y.clone(),
    )
}

/// Paths of an MNIST-style IDX quadruple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxPaths {
    pub train_images: std::path::PathBuf,
    pub train_labels: std::path::PathBuf,
    pub test_images: std::path::PathBuf,
    pub test_labels: std::path::PathBuf,
}

impl IdxPaths {
    /// Standard MNIST file names inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        IdxPaths {
            train_images: dir.join("train-images-idx3-ubyte"),
            train_labels: dir.join("train-labels-idx1-ubyte"),
            test_images: dir.join("t10k-images-idx3-ubyte"),
            test_labels: dir.join("t10k-labels-idx1-ubyte"),
        }
    }
}

pub const MNIST_CLASSES: usize = 10;

/// Stratified desk-scale subset of an IDX classification task as one-hot regression.
pub fn mnist_subset(paths: &IdxPaths, n_train: usize, n_test: usize, seed: u64, standardize_inputs: bool) -> Result<Dataset> {
    let (train_x, train_l) = load_idx(&paths.train_images, &paths.train_labels)?;
    let (test_x, test_l) = load_idx(&paths.test_images, &paths.test_labels)?;
    let full = Dataset::new(
        "mnist-subset",
        train_x,
        one_hot(&train_l, MNIST_CLASSES)?,
        test_x,
        one_hot(&test_l, MNIST_CLASSES)?,
    )?;
    let sub = subsample(&full, n_train, n_test, seed)?;
    if standardize_inputs {
        standardize(&sub)
    } else {
        Ok(sub)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture_dir() -> std::path::PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mnist")
    }

    #[test]
    fn hand_built_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let images = IdxImages {
            count: 2,
            rows: 2,
            cols: 2,
            pixels: vec![0, 255, 128, 1, 7, 0, 255, 64],
        };
        let (ip, lp) = (dir.path().join("i"), dir.path().join("l"));
        write_idx_images(&ip, &images).unwrap();
        write_idx_labels(&lp, &[3, 9]).unwrap();
        let raw = fs::read(&ip).unwrap();
        assert_eq!(&raw[..4], &[0, 0, 8, 3]);
        assert_eq!(read_idx_images(&ip).unwrap(), images);
        let (x, l) = load_idx(&ip, &lp).unwrap();
        assert_eq!(l, vec![3, 9]);
        assert_eq!(x.row(0), &[0.0, 1.0, 128.0 / 255.0, 1.0 / 255.0]);
        assert_eq!(x.row(1)[2], 1.0);
    }

    #[test]
    fn malformed_files_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, lp) = (dir.path().join("i"), dir.path().join("l"));
        write_idx_images(&ip, &IdxImages { count: 2, rows: 1, cols: 1, pixels: vec![1, 2] }).unwrap();
        write_idx_labels(&lp, &[1]).unwrap();
        assert!(matches!(load_idx(&ip, &lp), Err(Error::Format { .. })));
        // swapped magic
        assert!(read_idx_images(&lp).is_err());
        assert!(read_idx_labels(&ip).is_err());
        let mut raw = fs::read(&ip).unwrap();
        raw.pop();
        fs::write(&ip, raw).unwrap();
        assert!(read_idx_images(&ip).is_err());
    }

    #[test]
    fn fixture_round_trips_bit_exact() {
        let paths = IdxPaths::in_dir(&fixture_dir());
        let images = read_idx_images(&paths.train_images).unwrap();
        let labels = read_idx_labels(&paths.train_labels).unwrap();
        assert_eq!((images.count, images.rows, images.cols), (1000, 28, 28));
        let dir = tempfile::tempdir().unwrap();
        write_idx_images(&dir.path().join("i"), &images).unwrap();
        write_idx_labels(&dir.path().join("l"), &labels).unwrap();
        assert_eq!(fs::read(dir.path().join("i")).unwrap(), fs::read(&paths.train_images).unwrap());
        assert_eq!(fs::read(dir.path().join("l")).unwrap(), fs::read(&paths.train_labels).unwrap());
    }

    #[test]
    fn one_hot_examples() {
        let m = one_hot(&[3], 10).unwrap();
        assert_eq!(m.row(0).iter().position(|&v| v == 1.0), Some(3));
        assert_eq!(m.row(0).sum(), 1.0);
        let z = one_hot(&[0, 0, 0], 4).unwrap();
        assert!(z.column(0).iter().all(|&v| v == 1.0));
        let labels = vec![2, 0, 1, 1, 4];
        assert_eq!(one_hot_labels(&one_hot(&labels, 5).unwrap()).unwrap(), labels);
        assert!(one_hot(&[5], 5).is_err());
        assert!(one_hot_labels(&DMatrix::from_element(1, 2, 0.5)).is_none());
    }

    #[test]
    fn stratified_subset() {
        let paths = IdxPaths::in_dir(&fixture_dir());
        let d = mnist_subset(&paths, 100, 50, 3, false).unwrap();
        let counts = |y: &DMatrix<f64>| -> Vec<usize> {
            let labels = one_hot_labels(y).unwrap();
            (0..10).map(|c| labels.iter().filter(|&&l| l == c).count()).collect()
        };
        assert_eq!(counts(&d.train_y), vec![10; 10]);
        assert_eq!(counts(&d.test_y), vec![5; 10]);
        assert_eq!(d, mnist_subset(&paths, 100, 50, 3, false).unwrap());
        assert_ne!(d, mnist_subset(&paths, 100, 50, 4, false).unwrap());
        assert!(mnist_subset(&paths, 1001, 50, 3, false).is_err());
    }

    #[test]
    fn full_subsample_is_identity() {
        let x = PointSet::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let y = DMatrix::from_row_slice(3, 1, &[0.5, 1.5, 2.5]);
        let d = Dataset::new("t", x.clone(), y.clone(), x, y).unwrap();
        assert_eq!(subsample(&d, 3, 3, 11).unwrap(), d);
    }

    #[test]
    fn standardized_columns() {
        let x = PointSet::from_rows(&[vec![1.0, 5.0], vec![3.0, 5.0]]).unwrap();
        let y = DMatrix::zeros(2, 1);
        let d = Dataset::new("t", x.clone(), y.clone(), x, y).unwrap();
        let s = standardize(&d).unwrap();
        assert_eq!(s.train_x.row(0), &[-1.0, 0.0]);
        assert_eq!(s.train_x.row(1), &[1.0, 0.0]);
    }
}
