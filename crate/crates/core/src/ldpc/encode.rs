//! Systematic encoding by dense GF(2) elimination of the parity-check matrix.

use super::LdpcCode;
use crate::error::{Error, Result};

/// Row-echelon form of `H` with pivot and information columns.
#[derive(Clone, Debug)]
pub struct Encoder {
    n: usize,
    words: usize,
    /// Echelon rows, one per pivot, packed 64 columns per word.
    rows: Vec<Vec<u64>>,
    pivots: Vec<usize>,
    info_cols: Vec<usize>,
}

fn bit(row: &[u64], col: usize) -> bool {
    row[col / 64] >> (col % 64) & 1 == 1
}

impl Encoder {
    pub fn new(code: &LdpcCode) -> Self {
        let n = code.n();
        let words = n.div_ceil(64);
        let mut mat: Vec<Vec<u64>> = code
            .checks()
            .iter()
            .map(|row| {
                let mut r = vec![0u64; words];
                for &v in row {
                    r[v as usize / 64] ^= 1 << (v % 64);
                }
                r
            })
            .collect();
        let mut pivots = Vec::new();
        let mut info_cols = Vec::new();
        let mut top = 0;
        for col in 0..n {
            let Some(p) = (top..mat.len()).find(|&i| bit(&mat[i], col)) else {
                info_cols.push(col);
                continue;
            };
            mat.swap(top, p);
            let w0 = col / 64;
            let (head, tail) = mat.split_at_mut(top + 1);
            let pivot = &head[top];
            for row in tail.iter_mut() {
                if bit(row, col) {
                    for w in w0..words {
                        row[w] ^= pivot[w];
                    }
                }
            }
            pivots.push(col);
            top += 1;
        }
        mat.truncate(top);
        Encoder {
            n,
            words,
            rows: mat,
            pivots,
            info_cols,
        }
    }

    pub fn k(&self) -> usize {
        self.info_cols.len()
    }

    pub fn info_columns(&self) -> &[usize] {
        &self.info_cols
    }

    /// Places `info` on the information columns and solves for the pivots by back-substitution.
    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>> {
        if info.len() != self.k() {
            return Err(Error::Dimension(format!("expected {} information bits, got {}", self.k(), info.len())));
        }
        let mut packed = vec![0u64; self.words];
        for (&col, &b) in self.info_cols.iter().zip(info) {
            if b & 1 == 1 {
                packed[col / 64] |= 1 << (col % 64);
            }
        }
        for (row, &p) in self.rows.iter().zip(&self.pivots).rev() {
            // columns left of the pivot are zero in an echelon row
            let mut acc = 0u32;
            for w in p / 64..self.words {
                acc ^= (row[w] & packed[w]).count_ones() & 1;
            }
            // the pivot bit itself is still zero in `packed`
            if acc == 1 {
                packed[p / 64] |= 1 << (p % 64);
            }
        }
        Ok((0..self.n).map(|i| bit(&packed, i) as u8).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::super::build_regular;
    use crate::rng::trial_rng;
    use rand::Rng;

    #[test]
    fn codewords_satisfy_checks() {
        let code = build_regular(600, 3, 6, 11).unwrap();
        let k = code.k();
        assert!(k >= 300);
        assert!(code.encode(&vec![0; k]).unwrap().iter().all(|&b| b == 0));
        let mut rng = trial_rng(5, 0);
        let a: Vec<u8> = (0..k).map(|_| rng.random_range(0..2)).collect();
        let mut b = a.clone();
        b[k / 2] ^= 1;
        let ca = code.encode(&a).unwrap();
        let cb = code.encode(&b).unwrap();
        assert!(code.syndrome_ok(&ca) && code.syndrome_ok(&cb));
        assert_ne!(ca, cb);
        assert!(code.encode(&a[1..]).is_err());
    }
}
