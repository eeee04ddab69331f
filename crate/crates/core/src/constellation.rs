//! Signal sets with priors, bit labels and the Gaussian-signalling marker.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PRIOR_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Bpsk,
    Qpsk,
    #[serde(rename = "8psk")]
    Psk8,
    #[serde(rename = "16qam")]
    Qam16,
    Gaussian,
    Custom(String),
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Bpsk => f.write_str("bpsk"),
            Label::Qpsk => f.write_str("qpsk"),
            Label::Psk8 => f.write_str("8psk"),
            Label::Qam16 => f.write_str("16qam"),
            Label::Gaussian => f.write_str("gaussian"),
            Label::Custom(name) => f.write_str(name),
        }
    }
}

/// A one-dimensional factor of a separable constellation.
#[derive(Clone, Debug, PartialEq)]
pub struct Pam {
    pub points: Vec<f64>,
    pub priors: Vec<f64>,
}

impl Pam {
    pub fn energy(&self) -> f64 {
        self.points
            .iter()
            .zip(&self.priors)
            .map(|(a, p)| p * a * a)
            .sum()
    }

    /// Smallest gap between adjacent points (sorted), or `None` for a single point.
    pub fn min_distance(&self) -> Option<f64> {
        let mut sorted = self.points.clone();
        sorted.sort_by(f64::total_cmp);
        sorted.windows(2).map(|w| w[1] - w[0]).reduce(f64::min)
    }
}

/// A discrete complex signal set with prior probabilities, or the Gaussian marker.
///
/// Every constellation is normalised to unit average energy so that `snr = 1/sigma2`
/// is the per-symbol SNR.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constellation {
    label: Label,
    points: Vec<Complex64>,
    priors: Vec<f64>,
    /// Bit label of each point, most significant bit first.
    bit_labels: Option<Vec<u32>>,
}

impl Constellation {
    pub fn gaussian() -> Self {
        Constellation {
            label: Label::Gaussian,
            points: Vec::new(),
            priors: Vec::new(),
            bit_labels: None,
        }
    }

    pub fn bpsk() -> Self {
        Self::uniform(
            Label::Bpsk,
            vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)],
            vec![0, 1],
        )
    }

    /// Gray-labelled QPSK: the first bit rides on the in-phase rail, the second on quadrature.
    pub fn qpsk() -> Self {
        let mut points = Vec::with_capacity(4);
        let mut labels = Vec::with_capacity(4);
        for label in 0..4u32 {
            let b0 = (label >> 1) & 1;
            let b1 = label & 1;
            points.push(Complex64::new(
                (1.0 - 2.0 * b0 as f64) * FRAC_1_SQRT_2,
                (1.0 - 2.0 * b1 as f64) * FRAC_1_SQRT_2,
            ));
            labels.push(label);
        }
        Self::uniform(Label::Qpsk, points, labels)
    }

    pub fn psk8() -> Self {
        const GRAY: [u32; 8] = [0, 1, 3, 2, 6, 7, 5, 4];
        let points = (0..8)
            .map(|k| Complex64::from_polar(1.0, 2.0 * PI * k as f64 / 8.0))
            .collect();
        Self::uniform(Label::Psk8, points, GRAY.to_vec())
    }

    /// Square 16QAM built from two Gray-labelled 4-PAM rails.
    pub fn qam16() -> Self {
        // 2-bit Gray code -> amplitude level
        const LEVEL: [f64; 4] = [-3.0, -1.0, 3.0, 1.0];
        let scale = 10f64.sqrt().recip();
        let mut points = Vec::with_capacity(16);
        let mut labels = Vec::with_capacity(16);
        for label in 0..16u32 {
            let i_bits = (label >> 2) as usize;
            let q_bits = (label & 3) as usize;
            points.push(Complex64::new(LEVEL[i_bits] * scale, LEVEL[q_bits] * scale));
            labels.push(label);
        }
        Self::uniform(Label::Qam16, points, labels)
    }

    fn uniform(label: Label, points: Vec<Complex64>, bit_labels: Vec<u32>) -> Self {
        let p = 1.0 / points.len() as f64;
        let priors = vec![p; points.len()];
        Constellation {
            label,
            points,
            priors,
            bit_labels: Some(bit_labels),
        }
    }

    /// Builds a custom constellation. Points are checked for unit energy and priors
    /// for normalisation; natural binary labels are attached when the size is a
    /// power of two.
    pub fn custom(name: &str, points: Vec<Complex64>, priors: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("constellation", "no points"));
        }
        if points.len() != priors.len() {
            return Err(Error::Dimension(format!(
                "{} points but {} priors",
                points.len(),
                priors.len()
            )));
        }
        if priors.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::invalid("constellation", "priors must be positive"));
        }
        let total: f64 = priors.iter().sum();
        if (total - 1.0).abs() > PRIOR_TOL {
            return Err(Error::invalid(
                "constellation",
                format!("priors sum to {total}, expected 1"),
            ));
        }
        let energy: f64 = points.iter().zip(&priors).map(|(s, p)| p * s.norm_sqr()).sum();
        if (energy - 1.0).abs() > PRIOR_TOL {
            return Err(Error::invalid(
                "constellation",
                format!("average energy {energy}, expected 1"),
            ));
        }
        let bit_labels = points
            .len()
            .is_power_of_two()
            .then(|| (0..points.len() as u32).collect());
        Ok(Constellation {
            label: Label::Custom(name.to_string()),
            points,
            priors,
            bit_labels,
        })
    }

    /// Reads a `re,im,prior` CSV file.
    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "custom".to_string());
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(&name, file)
    }

    pub fn from_csv_reader<R: Read>(name: &str, reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            re: f64,
            im: f64,
            prior: f64,
        }
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut points = Vec::new();
        let mut priors = Vec::new();
        for row in rdr.deserialize::<Row>() {
            let row = row.map_err(|e| Error::Parse(e.to_string()))?;
            points.push(Complex64::new(row.re, row.im));
            priors.push(row.prior);
        }
        Self::custom(name, points, priors)
    }

    pub fn label(&self) -> &Label {
        &self.label
    }

    pub fn is_gaussian(&self) -> bool {
        self.label == Label::Gaussian
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// All points on the real axis (e.g. BPSK).
    pub fn is_real(&self) -> bool {
        !self.is_gaussian() && self.points.iter().all(|s| s.im == 0.0)
    }

    pub fn bit_labels(&self) -> Option<&[u32]> {
        self.bit_labels.as_deref()
    }

    pub fn bits_per_symbol(&self) -> Option<usize> {
        self.bit_labels
            .as_ref()
            .map(|_| self.points.len().trailing_zeros() as usize)
    }

    /// Entropy of the prior in nats; `ln |S|` for uniform sets, infinite for Gaussian input.
    pub fn entropy_nats(&self) -> f64 {
        if self.is_gaussian() {
            return f64::INFINITY;
        }
        -self.priors.iter().map(|p| p * p.ln()).sum::<f64>()
    }

    pub fn mean(&self) -> Complex64 {
        self.points.iter().zip(&self.priors).map(|(s, p)| s * p).sum()
    }

    /// Splits a product constellation into independent in-phase and quadrature rails.
    ///
    /// Returns `None` unless the points form a Cartesian grid with product priors.
    pub fn separable(&self) -> Option<(Pam, Pam)> {
        if self.is_gaussian() {
            return None;
        }
        let re = distinct(self.points.iter().map(|s| s.re));
        let im = distinct(self.points.iter().map(|s| s.im));
        if re.len() * im.len() != self.points.len() {
            return None;
        }
        let find = |set: &[f64], v: f64| set.iter().position(|&a| (a - v).abs() < 1e-12);
        let mut grid = vec![None; re.len() * im.len()];
        for (k, s) in self.points.iter().enumerate() {
            let (i, j) = (find(&re, s.re)?, find(&im, s.im)?);
            if grid[i * im.len() + j].replace(k).is_some() {
                return None;
            }
        }
        let mut re_p = vec![0.0; re.len()];
        let mut im_p = vec![0.0; im.len()];
        for (i, rp) in re_p.iter_mut().enumerate() {
            for (j, ip) in im_p.iter_mut().enumerate() {
                let p = self.priors[grid[i * im.len() + j]?];
                *rp += p;
                *ip += p;
            }
        }
        for i in 0..re.len() {
            for j in 0..im.len() {
                let p = self.priors[grid[i * im.len() + j]?];
                if (p - re_p[i] * im_p[j]).abs() > 1e-12 {
                    return None;
                }
            }
        }
        Some((
            Pam {
                points: re,
                priors: re_p,
            },
            Pam {
                points: im,
                priors: im_p,
            },
        ))
    }
}

fn distinct(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for v in values {
        if !out.iter().any(|&a| (a - v).abs() < 1e-12) {
            out.push(v);
        }
    }
    out
}

impl FromStr for Constellation {
    type Err = Error;

    /// Parses a preset name; anything else is treated as a path to a CSV file.
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bpsk" => Ok(Self::bpsk()),
            "qpsk" => Ok(Self::qpsk()),
            "8psk" => Ok(Self::psk8()),
            "16qam" => Ok(Self::qam16()),
            "gaussian" | "gauss" => Ok(Self::gaussian()),
            _ => {
                let path = Path::new(s);
                if path.exists() {
                    Self::from_csv_path(path)
                } else {
                    Err(Error::invalid(
                        "constellation",
                        format!("unknown preset or missing file `{s}`"),
                    ))
                }
            }
        }
    }
}
