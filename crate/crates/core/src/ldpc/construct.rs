//! Randomised progressive edge growth, restricted to the 4-cycle neighbourhood.
//!
//! Each new edge of a variable goes to a check of largest remaining capacity that
//! does not close a 4-cycle. When no such check remains the constraint is dropped,
//! and as a last resort an existing edge is swapped to make room.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{DegreeDistribution, LdpcCode};
use crate::error::{Error, Result};
use crate::rng::trial_rng;

/// Regular `(dv, dc)` code of length `n`.
pub fn build_regular(n: usize, dv: usize, dc: usize, seed: u64) -> Result<LdpcCode> {
    if dv < 2 {
        return Err(Error::invalid("dv", "variable degree must be at least 2"));
    }
    if dc <= dv {
        return Err(Error::invalid("dc", "check degree must exceed variable degree"));
    }
    if n == 0 || (n * dv) % dc != 0 {
        return Err(Error::Infeasible(format!("n * dv = {} is not divisible by dc = {dc}", n * dv)));
    }
    let m = n * dv / dc;
    build_from_degrees(&vec![dv; n], &vec![dc; m], seed)
}

/// Largest-remainder rounding of `total * fractions`.
fn apportion(total: usize, fractions: &[f64]) -> Vec<usize> {
    let raw: Vec<f64> = fractions.iter().map(|f| f * total as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let short = total.saturating_sub(counts.iter().sum());
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())));
    for i in 0..short {
        counts[order[i % order.len()]] += 1;
    }
    counts
}

/// Code of length `n` with node degrees sampled from an edge-perspective distribution.
pub fn build_irregular(n: usize, dd: &DegreeDistribution, seed: u64) -> Result<LdpcCode> {
    if dd.lambda.iter().any(|&(d, f)| d < 2 && f > 0.0) {
        return Err(Error::invalid("lambda", "variable nodes of degree 1 are not allowed"));
    }
    if n == 0 {
        return Err(Error::invalid("n", "must be positive"));
    }
    let vf = dd.variable_node_fractions();
    let vcounts = apportion(n, &vf.iter().map(|p| p.1).collect::<Vec<_>>());
    let mut var_deg = Vec::with_capacity(n);
    let mut by_degree: Vec<(usize, usize)> = vf.iter().map(|p| p.0).zip(vcounts).collect();
    by_degree.sort_by_key(|p| p.0);
    for (d, c) in by_degree {
        var_deg.extend(std::iter::repeat_n(d, c));
    }
    let edges: usize = var_deg.iter().sum();
    let cf = dd.check_node_fractions();
    let inv_mean: f64 = dd.rho.iter().map(|&(d, f)| f / d as f64).sum();
    let m = ((edges as f64) * inv_mean).round().max(1.0) as usize;
    let ccounts = apportion(m, &cf.iter().map(|p| p.1).collect::<Vec<_>>());
    let mut check_deg = Vec::with_capacity(m);
    for (&(d, _), &c) in cf.iter().zip(&ccounts) {
        check_deg.extend(std::iter::repeat_n(d, c));
    }
    check_deg.sort_unstable();
    let mut sum: usize = check_deg.iter().sum();
    // nudge check degrees until the edge counts agree
    let mut i = 0;
    while sum < edges {
        check_deg[i % m] += 1;
        sum += 1;
        i += 1;
    }
    let mut i = m;
    while sum > edges {
        i = if i == 0 { m - 1 } else { i - 1 };
        if check_deg[i] > 2 {
            check_deg[i] -= 1;
            sum -= 1;
        }
    }
    check_deg.sort_unstable();
    build_from_degrees(&var_deg, &check_deg, seed)
}

struct Buckets {
    cap: Vec<usize>,
    pos: Vec<usize>,
    lists: Vec<Vec<u32>>,
}

impl Buckets {
    fn new(caps: &[usize]) -> Self {
        let top = caps.iter().copied().max().unwrap_or(0);
        let mut lists = vec![Vec::new(); top + 1];
        let mut pos = vec![0; caps.len()];
        for (c, &k) in caps.iter().enumerate() {
            pos[c] = lists[k].len();
            lists[k].push(c as u32);
        }
        Buckets {
            cap: caps.to_vec(),
            pos,
            lists,
        }
    }

    fn decrement(&mut self, c: usize) {
        let k = self.cap[c];
        let p = self.pos[c];
        let last = *self.lists[k].last().expect("bucket non-empty");
        self.lists[k].swap_remove(p);
        if last as usize != c {
            self.pos[last as usize] = p;
        }
        self.cap[c] = k - 1;
        self.pos[c] = self.lists[k - 1].len();
        self.lists[k - 1].push(c as u32);
    }

    /// A check of largest capacity accepted by `ok`, chosen at random within its bucket.
    fn pick<F: Fn(usize) -> bool>(&self, rng: &mut ChaCha8Rng, ok: F) -> Option<usize> {
        for k in (1..self.lists.len()).rev() {
            let list = &self.lists[k];
            if list.is_empty() {
                continue;
            }
            for _ in 0..6 {
                let c = list[rng.random_range(0..list.len())] as usize;
                if ok(c) {
                    return Some(c);
                }
            }
            let start = rng.random_range(0..list.len());
            for i in 0..list.len() {
                let c = list[(start + i) % list.len()] as usize;
                if ok(c) {
                    return Some(c);
                }
            }
        }
        None
    }
}

/// Connects variables and checks with the given degree sequences.
pub fn build_from_degrees(var_deg: &[usize], check_deg: &[usize], seed: u64) -> Result<LdpcCode> {
    let n = var_deg.len();
    let m = check_deg.len();
    let e_var: usize = var_deg.iter().sum();
    let e_chk: usize = check_deg.iter().sum();
    if e_var != e_chk {
        return Err(Error::Infeasible(format!("{e_var} variable edges but {e_chk} check edges")));
    }
    if let Some(&d) = var_deg.iter().find(|&&d| d > m) {
        return Err(Error::Infeasible(format!("variable degree {d} exceeds {m} checks")));
    }
    let mut rng = trial_rng(seed, 0);
    let mut vars: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut checks: Vec<Vec<u32>> = vec![Vec::new(); m];
    let mut buckets = Buckets::new(check_deg);
    let mut stamp = vec![0u32; m];
    let mut round = 0u32;
    for j in 0..n {
        for _ in 0..var_deg[j] {
            round += 1;
            // checks within distance two of j, plus j's own checks
            for &c in &vars[j] {
                stamp[c as usize] = round;
                for &u in &checks[c as usize] {
                    for &c2 in &vars[u as usize] {
                        stamp[c2 as usize] = round;
                    }
                }
            }
            let chosen = buckets
                .pick(&mut rng, |c| stamp[c] != round)
                .or_else(|| buckets.pick(&mut rng, |c| !vars[j].contains(&(c as u32))));
            match chosen {
                Some(c) => {
                    buckets.decrement(c);
                    vars[j].push(c as u32);
                    checks[c].push(j as u32);
                }
                None => swap_in(j, &mut vars, &mut checks, &mut buckets, &mut rng)?,
            }
        }
    }
    for row in &mut checks {
        row.sort_unstable();
    }
    LdpcCode::from_checks(n, checks)
}

/// Every check with spare capacity already touches `j`: move an existing edge `(u, c2)`
/// to `(u, c)` and give `c2` to `j`.
fn swap_in(
    j: usize,
    vars: &mut [Vec<u32>],
    checks: &mut [Vec<u32>],
    buckets: &mut Buckets,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    let c = buckets
        .pick(rng, |_| true)
        .ok_or_else(|| Error::Infeasible("no check has spare capacity".into()))?;
    for _ in 0..100_000 {
        let u = rng.random_range(0..j.max(1));
        if u == j || vars[u].is_empty() || vars[u].contains(&(c as u32)) {
            continue;
        }
        let slot = rng.random_range(0..vars[u].len());
        let c2 = vars[u][slot] as usize;
        if vars[j].contains(&(c2 as u32)) {
            continue;
        }
        vars[u][slot] = c as u32;
        let p = checks[c2].iter().position(|&v| v as usize == u).expect("edge present");
        checks[c2][p] = j as u32;
        checks[c].push(u as u32);
        vars[j].push(c2 as u32);
        buckets.decrement(c);
        return Ok(());
    }
    Err(Error::Infeasible(format!("could not place an edge for variable {j}")))
}
