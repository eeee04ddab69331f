//! MacKay's alist text format for sparse parity-check matrices.

use std::io::{Read, Write};

use super::LdpcCode;
use crate::error::{Error, Result};

pub fn write_alist<W: Write>(code: &LdpcCode, mut w: W) -> Result<()> {
    let max_col = code.vars().iter().map(Vec::len).max().unwrap_or(0);
    let max_row = code.checks().iter().map(Vec::len).max().unwrap_or(0);
    writeln!(w, "{} {}", code.n(), code.m())?;
    writeln!(w, "{max_col} {max_row}")?;
    let join = |it: &mut dyn Iterator<Item = String>| it.collect::<Vec<_>>().join(" ");
    writeln!(w, "{}", join(&mut code.vars().iter().map(|v| v.len().to_string())))?;
    writeln!(w, "{}", join(&mut code.checks().iter().map(|c| c.len().to_string())))?;
    for list in code.vars() {
        writeln!(w, "{}", join(&mut list.iter().map(|c| (c + 1).to_string())))?;
    }
    for list in code.checks() {
        writeln!(w, "{}", join(&mut list.iter().map(|v| (v + 1).to_string())))?;
    }
    Ok(())
}

/// Reads an alist file; zero padding in the adjacency lists is ignored.
pub fn read_alist<R: Read>(mut r: R) -> Result<LdpcCode> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let mut next_nums = |what: &str| -> Result<Vec<usize>> {
        let line = lines.next().ok_or_else(|| Error::Parse(format!("alist ended before {what}")))?;
        line.split_whitespace()
            .map(|t| t.parse::<usize>().map_err(|e| Error::Parse(format!("{what}: {e}"))))
            .collect()
    };
    let head = next_nums("dimensions")?;
    let [n, m] = head[..] else {
        return Err(Error::Parse("first line must hold `n m`".into()));
    };
    next_nums("maximum degrees")?;
    let col_deg = next_nums("column degrees")?;
    let row_deg = next_nums("row degrees")?;
    if col_deg.len() != n || row_deg.len() != m {
        return Err(Error::Parse("degree lists do not match the dimensions".into()));
    }
    for j in 0..n {
        let list = next_nums("column list")?;
        let nz = list.iter().filter(|&&x| x != 0).count();
        if nz != col_deg[j] {
            return Err(Error::Parse(format!("column {j} lists {nz} entries, expected {}", col_deg[j])));
        }
    }
    let mut checks = Vec::with_capacity(m);
    for i in 0..m {
        let list: Vec<u32> = next_nums("row list")?
            .into_iter()
            .filter(|&x| x != 0)
            .map(|x| (x - 1) as u32)
            .collect();
        if list.len() != row_deg[i] {
            return Err(Error::Parse(format!("row {i} lists {} entries, expected {}", list.len(), row_deg[i])));
        }
        checks.push(list);
    }
    LdpcCode::from_checks(n, checks)
}

#[cfg(test)]
mod tests {
    use super::super::build_regular;
    use super::*;

    #[test]
    fn roundtrip() {
        let code = build_regular(96, 3, 6, 1).unwrap();
        let mut buf = Vec::new();
        write_alist(&code, &mut buf).unwrap();
        let back = read_alist(buf.as_slice()).unwrap();
        assert_eq!(back, code);
        assert!(read_alist("3 1\n".as_bytes()).is_err());
    }
}
