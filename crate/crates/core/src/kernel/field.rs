use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The periodic box `[-L, L)^n` with `N` points per dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(rename = "L")]
    pub half_width: f64,
    #[serde(rename = "N")]
    pub points: usize,
}

impl GridSpec {
    pub fn new(half_width: f64, points: usize) -> Result<Self> {
        let g = GridSpec { half_width, points };
        g.validate()?;
        Ok(g)
    }

    /// `L = 40, N = 2048` in one dimension, `L = 20, N = 512` in two.
    pub fn default_for(dim: u32) -> Self {
        if dim == 1 {
            GridSpec {
                half_width: 40.0,
                points: 2048,
            }
        } else {
            GridSpec {
                half_width: 20.0,
                points: 512,
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.half_width > 0.0 && self.half_width.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "L = {} must be positive",
                self.half_width
            )));
        }
        if self.points < 64 || !self.points.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "N = {} must be a power of two >= 64",
                self.points
            )));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn coordinate(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing()
    }

    /// Same spacing on twice the box.
    pub fn doubled(&self) -> Self {
        GridSpec {
            half_width: 2.0 * self.half_width,
            points: 2 * self.points,
        }
    }

    /// Same box with half the spacing.
    pub fn refined(&self) -> Self {
        GridSpec {
            half_width: self.half_width,
            points: 2 * self.points,
        }
    }
}

/// Samples of a function on the grid, row-major for `n = 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: GridSpec,
    pub dim: u32,
    pub values: Vec<f64>,
    pub time: f64,
    /// Order of the semigroup that produced the field, if any.
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Sidecar {
    alpha: Option<f64>,
    n: u32,
    #[serde(rename = "L")]
    half_width: f64,
    #[serde(rename = "N")]
    points: usize,
    t: f64,
}

fn check_dim(dim: u32) -> Result<()> {
    if dim == 1 || dim == 2 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "gridded fields need n in {{1, 2}}, got {dim}"
        )))
    }
}

impl Field {
    pub fn zeros(grid: GridSpec, dim: u32) -> Result<Self> {
        grid.validate()?;
        check_dim(dim)?;
        Ok(Field {
            grid,
            dim,
            values: vec![0.0; grid.points.pow(dim)],
            time: 0.0,
            alpha: None,
        })
    }

    pub fn constant(grid: GridSpec, dim: u32, c: f64) -> Result<Self> {
        let mut f = Field::zeros(grid, dim)?;
        f.values.iter_mut().for_each(|v| *v = c);
        Ok(f)
    }

    /// Samples `g` at the grid points; `g` receives the point as a slice of
    /// length `dim`.
    pub fn from_fn<G: Fn(&[f64]) -> f64>(grid: GridSpec, dim: u32, g: G) -> Result<Self> {
        let mut f = Field::zeros(grid, dim)?;
        let n = grid.points;
        if dim == 1 {
            for (j, v) in f.values.iter_mut().enumerate() {
                *v = g(&[grid.coordinate(j)]);
            }
        } else {
            for (k, v) in f.values.iter_mut().enumerate() {
                *v = g(&[grid.coordinate(k / n), grid.coordinate(k % n)]);
            }
        }
        if let Some(bad) = f.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite field value {bad}")));
        }
        Ok(f)
    }

    /// Coordinates of the flat index `k`.
    pub fn point(&self, k: usize) -> Vec<f64> {
        let n = self.grid.points;
        if self.dim == 1 {
            vec![self.grid.coordinate(k)]
        } else {
            vec![self.grid.coordinate(k / n), self.grid.coordinate(k % n)]
        }
    }

    /// Euclidean norm of the point at flat index `k`.
    pub fn radius(&self, k: usize) -> f64 {
        self.point(k).iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn cell_volume(&self) -> f64 {
        self.grid.spacing().powi(self.dim as i32)
    }

    /// Rectangle-rule integral.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.cell_volume()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest `|a - b|` over grid points.
    pub fn sup_distance(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Discrete `∫ self · other`.
    pub fn pairing(&self, other: &Field) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>() * self.cell_volume()
    }

    pub fn scaled(&self, c: f64) -> Field {
        let mut f = self.clone();
        f.values.iter_mut().for_each(|v| *v *= c);
        f
    }

    pub fn map<G: Fn(f64) -> f64>(&self, g: G) -> Field {
        let mut f = self.clone();
        f.values.iter_mut().for_each(|v| *v = g(*v));
        f
    }

    /// Writes `<stem>.bin` (little-endian `f64`, row-major) and the JSON
    /// sidecar `<stem>.json`.
    pub fn save(&self, stem: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(8 * self.values.len());
        for v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        fs::File::create(with_ext(stem, "bin"))?.write_all(&bytes)?;
        let side = Sidecar {
            alpha: self.alpha,
            n: self.dim,
            half_width: self.grid.half_width,
            points: self.grid.points,
            t: self.time,
        };
        fs::write(with_ext(stem, "json"), serde_json::to_string_pretty(&side)?)?;
        Ok(())
    }

    pub fn load(stem: &Path) -> Result<Field> {
        let side: Sidecar = serde_json::from_str(&fs::read_to_string(with_ext(stem, "json"))?)?;
        let grid = GridSpec::new(side.half_width, side.points)?;
        check_dim(side.n)?;
        let mut bytes = Vec::new();
        fs::File::open(with_ext(stem, "bin"))?.read_to_end(&mut bytes)?;
        let expected = 8 * grid.points.pow(side.n);
        if bytes.len() != expected {
            return Err(Error::InvalidParameter(format!(
                "field file holds {} bytes, sidecar implies {expected}",
                bytes.len()
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();
        Ok(Field {
            grid,
            dim: side.n,
            values,
            time: side.t,
            alpha: side.alpha,
        })
    }
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Outcome of [`clamp_nonnegative`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClampReport {
    pub clamped: usize,
    pub most_negative: f64,
}

/// Threshold below which negative values are reported when clamped.
pub const CLAMP_TOLERANCE: f64 = 1e-12;

/// Sets negative values to zero. Values below `-CLAMP_TOLERANCE` are logged.
pub fn clamp_nonnegative(field: &mut Field) -> ClampReport {
    let mut report = ClampReport {
        clamped: 0,
        most_negative: 0.0,
    };
    for v in field.values.iter_mut().filter(|v| **v < 0.0) {
        report.clamped += 1;
        report.most_negative = report.most_negative.min(*v);
        *v = 0.0;
    }
    if report.most_negative < -CLAMP_TOLERANCE {
        log::warn!(
            "clamped {} negative values at t = {} (most negative {:.3e})",
            report.clamped,
            field.time,
            report.most_negative
        );
    }
    report
}
