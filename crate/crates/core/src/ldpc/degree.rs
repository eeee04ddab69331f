use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::LdpcCode;
use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-9;

/// Edge-perspective degree distributions `(degree, fraction)` for variables and checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeDistribution {
    pub lambda: Vec<(usize, f64)>,
    pub rho: Vec<(usize, f64)>,
}

fn validate(name: &str, poly: &[(usize, f64)]) -> Result<()> {
    if poly.is_empty() {
        return Err(Error::invalid(name, "empty distribution"));
    }
    if poly.iter().any(|&(d, f)| d == 0 || !(f >= 0.0) || !f.is_finite()) {
        return Err(Error::invalid(name, "degrees must be positive and fractions non-negative"));
    }
    let total: f64 = poly.iter().map(|p| p.1).sum();
    if (total - 1.0).abs() > SUM_TOL {
        return Err(Error::invalid(name, format!("fractions sum to {total}")));
    }
    Ok(())
}

fn inv_mean(poly: &[(usize, f64)]) -> f64 {
    poly.iter().map(|&(d, f)| f / d as f64).sum()
}

impl DegreeDistribution {
    pub fn new(lambda: Vec<(usize, f64)>, rho: Vec<(usize, f64)>) -> Result<Self> {
        validate("lambda", &lambda)?;
        validate("rho", &rho)?;
        let dd = DegreeDistribution { lambda, rho };
        let r = dd.design_rate();
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::invalid("degree distribution", format!("design rate {r} outside (0, 1)")));
        }
        Ok(dd)
    }

    pub fn regular(dv: usize, dc: usize) -> Result<Self> {
        Self::new(vec![(dv, 1.0)], vec![(dc, 1.0)])
    }

    pub fn design_rate(&self) -> f64 {
        1.0 - inv_mean(&self.rho) / inv_mean(&self.lambda)
    }

    /// Node-perspective fractions of variable degrees.
    pub fn variable_node_fractions(&self) -> Vec<(usize, f64)> {
        node_fractions(&self.lambda)
    }

    pub fn check_node_fractions(&self) -> Vec<(usize, f64)> {
        node_fractions(&self.rho)
    }

    pub fn max_variable_degree(&self) -> usize {
        self.lambda.iter().filter(|p| p.1 > 0.0).map(|p| p.0).max().unwrap_or(0)
    }

    pub(crate) fn from_code(code: &LdpcCode) -> Self {
        let hist = |lists: &[Vec<u32>]| {
            let total: usize = lists.iter().map(Vec::len).sum();
            let mut counts = std::collections::BTreeMap::new();
            for l in lists {
                *counts.entry(l.len()).or_insert(0usize) += l.len();
            }
            counts
                .into_iter()
                .map(|(d, e)| (d, e as f64 / total.max(1) as f64))
                .collect::<Vec<_>>()
        };
        DegreeDistribution {
            lambda: hist(code.vars()),
            rho: hist(code.checks()),
        }
    }

    /// Writes the two polynomials as `degree,fraction` CSV.
    pub fn write_csv<W1: Write, W2: Write>(&self, lambda: W1, rho: W2) -> Result<()> {
        write_poly(lambda, &self.lambda)?;
        write_poly(rho, &self.rho)
    }

    pub fn read_csv<R1: Read, R2: Read>(lambda: R1, rho: R2) -> Result<Self> {
        Self::new(read_poly(lambda)?, read_poly(rho)?)
    }
}

fn node_fractions(poly: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let total = inv_mean(poly);
    poly.iter().map(|&(d, f)| (d, f / d as f64 / total)).collect()
}

fn write_poly<W: Write>(mut w: W, poly: &[(usize, f64)]) -> Result<()> {
    writeln!(w, "degree,fraction")?;
    for &(d, f) in poly {
        writeln!(w, "{d},{f:.17e}")?;
    }
    Ok(())
}

fn read_poly<R: Read>(r: R) -> Result<Vec<(usize, f64)>> {
    #[derive(Deserialize)]
    struct Row {
        degree: usize,
        fraction: f64,
    }
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    rdr.deserialize::<Row>()
        .map(|row| {
            let row = row.map_err(|e| Error::Parse(e.to_string()))?;
            Ok((row.degree, row.fraction))
        })
        .collect()
}
