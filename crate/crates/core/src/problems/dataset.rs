use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Row-major features with one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub n: usize,
    pub d: usize,
    pub x: Vec<T>,
    pub y: Vec<T>,
}

/// First line of a snapshot file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub n: usize,
    pub d: usize,
    pub family: String,
    pub seed: u64,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(n: usize, d: usize, x: Vec<T>, y: Vec<T>) -> Result<Self> {
        if n == 0 || d == 0 || x.len() != n * d || y.len() != n {
            return Err(Error::contract(format!(
                "dataset shape mismatch: n={n}, d={d}, {} features, {} labels",
                x.len(),
                y.len()
            )));
        }
        Ok(Self { n, d, x, y })
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    /// i.i.d. standard normal features from a seeded stream.
    pub(crate) fn gaussian_features(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
        (0..n * d)
            .map(|_| T::of(StandardNormal.sample(rng)))
            .collect()
    }

    /// Largest eigenvalue of XᵀX/n.
    pub fn second_moment_lambda_max(&self) -> f64 {
        let m = self.gram();
        m.symmetric_eigen().eigenvalues.max()
    }

    pub(crate) fn design(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_iterator(
            self.n,
            self.d,
            self.x.iter().map(|v| v.to_f64_lossy()),
        )
    }

    pub(crate) fn gram(&self) -> nalgebra::DMatrix<f64> {
        let x = self.design();
        (x.transpose() * &x) / self.n as f64
    }

    /// Writes the JSON header line followed by little-endian f64 features and labels.
    pub fn write_snapshot(&self, path: &Path, family: &str, seed: u64) -> Result<()> {
        let header = SnapshotHeader {
            n: self.n,
            d: self.d,
            family: family.to_string(),
            seed,
        };
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n")?;
        for v in self.x.iter().chain(&self.y) {
            w.write_all(&v.to_f64_lossy().to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_snapshot(path: &Path) -> Result<(SnapshotHeader, Self)> {
        let mut r = BufReader::new(File::open(path)?);
        let mut line = String::new();
        r.read_line(&mut line)?;
        let header: SnapshotHeader = serde_json::from_str(line.trim_end())?;
        let count = header.n * header.d + header.n;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != 8 * count {
            return Err(Error::contract(format!(
                "snapshot body has {} bytes, expected {}",
                bytes.len(),
                8 * count
            )));
        }
        let values: Vec<T> = bytes
            .chunks_exact(8)
            .map(|c| T::of(f64::from_le_bytes(c.try_into().expect("8-byte chunk"))))
            .collect();
        let (x, y) = values.split_at(header.n * header.d);
        let data = Self::new(header.n, header.d, x.to_vec(), y.to_vec())?;
        Ok((header, data))
    }
}

pub(crate) fn seeded(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
