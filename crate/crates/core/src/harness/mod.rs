//! Experiment orchestration: specs, validation, runs and result files.
//!
//! A run writes `<out>/<kind>.csv` plus `<out>/<kind>.json`; the JSON carries the
//! full spec so a result directory can be replayed with [`read_spec`].

mod ber;

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

pub use ber::{ber_campaign, BerPoint};

use crate::constellation::Constellation;
use crate::curve::{log_grid, TransferCurve};
use crate::error::{Error, Result};
use crate::ldpc::{
    build_irregular, build_regular, decoder_transfer_curve, read_alist, DegreeDistribution, LdpcCode,
    TransferOptions,
};
use crate::matching::{check_matching, design_for_rate, optimize_degrees, LpOptions, MatchOptions};
use crate::mmse::{omega_s, MmseTable};
use crate::par::available_workers;
use crate::rates::{
    area_capacity_prop1_nats, capacity_theorem2_nats, omega_star_on, rate_sweep, write_rates_csv, RateKind,
};
use crate::se::{phi_inv_raw, se_fixed_point, SystemConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    MmseCurve,
    SeTrace,
    Capacity,
    Rates,
    TransferChart,
    Ber,
    Match,
    Optimize,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::MmseCurve,
        ExperimentKind::SeTrace,
        ExperimentKind::Capacity,
        ExperimentKind::Rates,
        ExperimentKind::TransferChart,
        ExperimentKind::Ber,
        ExperimentKind::Match,
        ExperimentKind::Optimize,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::MmseCurve => "mmse-curve",
            ExperimentKind::SeTrace => "se-trace",
            ExperimentKind::Capacity => "capacity",
            ExperimentKind::Rates => "rates",
            ExperimentKind::TransferChart => "transfer-chart",
            ExperimentKind::Ber => "ber",
            ExperimentKind::Match => "match",
            ExperimentKind::Optimize => "optimize",
        }
    }

    fn needs_code(&self) -> bool {
        matches!(self, ExperimentKind::Ber | ExperimentKind::Match)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid("kind", format!("unknown experiment kind `{s}`")))
    }
}

/// Where the code for a coded experiment comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum CodeSpec {
    /// Random regular code without 4-cycles.
    Regular {
        n: usize,
        dv: usize,
        dc: usize,
        #[serde(default)]
        seed: u64,
    },
    /// Parity-check matrix in alist format.
    Alist { path: PathBuf },
    /// Random code following degree-distribution CSVs (`degree,fraction`, edge perspective).
    Degrees {
        n: usize,
        lambda: PathBuf,
        rho: PathBuf,
        #[serde(default)]
        seed: u64,
    },
}

impl CodeSpec {
    fn paths(&self) -> Vec<(&'static str, &Path)> {
        match self {
            CodeSpec::Regular { .. } => Vec::new(),
            CodeSpec::Alist { path } => vec![("code.path", path)],
            CodeSpec::Degrees { lambda, rho, .. } => vec![("code.lambda", lambda), ("code.rho", rho)],
        }
    }

    pub fn build(&self) -> Result<LdpcCode> {
        match self {
            CodeSpec::Regular { n, dv, dc, seed } => build_regular(*n, *dv, *dc, *seed),
            CodeSpec::Alist { path } => read_alist(File::open(path)?),
            CodeSpec::Degrees { n, lambda, rho, seed } => {
                let dd = DegreeDistribution::read_csv(File::open(lambda)?, File::open(rho)?)?;
                build_irregular(*n, &dd, *seed)
            }
        }
    }
}

/// `regular:n:dv:dc[:seed]`, `degrees:n:lambda.csv:rho.csv[:seed]`, `alist:path` or a bare path.
impl FromStr for CodeSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = |what: &str| Error::invalid("code", format!("`{s}`: {what}"));
        let num = |t: &str| t.parse::<usize>().map_err(|_| bad("expected an integer"));
        let parts: Vec<&str> = s.split(':').collect();
        match parts[0] {
            "regular" => {
                let (n, dv, dc) = match parts[1..] {
                    [n, dv, dc] | [n, dv, dc, _] => (num(n)?, num(dv)?, num(dc)?),
                    _ => return Err(bad("expected regular:n:dv:dc[:seed]")),
                };
                let seed = parts.get(4).map(|t| num(t)).transpose()?.unwrap_or(0) as u64;
                Ok(CodeSpec::Regular { n, dv, dc, seed })
            }
            "degrees" => match parts[1..] {
                [n, l, r] | [n, l, r, _] => Ok(CodeSpec::Degrees {
                    n: num(n)?,
                    lambda: l.into(),
                    rho: r.into(),
                    seed: parts.get(4).map(|t| num(t)).transpose()?.unwrap_or(0) as u64,
                }),
                _ => Err(bad("expected degrees:n:lambda.csv:rho.csv[:seed]")),
            },
            "alist" if parts.len() > 1 => Ok(CodeSpec::Alist {
                path: s["alist:".len()..].into(),
            }),
            _ => Ok(CodeSpec::Alist { path: s.into() }),
        }
    }
}

fn default_constellation() -> String {
    "qpsk".into()
}

/// Everything needed to reproduce one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub beta: f64,
    /// Operating points in dB.
    pub snr_db: Vec<f64>,
    /// Preset name or path to a constellation CSV.
    #[serde(default = "default_constellation")]
    pub constellation: String,
    pub code: Option<CodeSpec>,
    /// Master seed; every frame and trial derives its own stream from it.
    pub seed: u64,
    /// Monte Carlo trials per grid point, or the frame cap per SNR point for BER.
    pub trials: usize,
    /// BER: an SNR point stops after this many frame errors.
    pub target_frame_errors: usize,
    /// Outer AMP iterations for coded runs.
    pub outer_iters: usize,
    /// BP iterations per decoder call.
    pub inner_iters: usize,
    /// SINR grid for curves, log-spaced.
    pub rho_min: f64,
    pub rho_max: f64,
    pub points: usize,
    /// Optimize: design for this rate instead of at each SNR point.
    pub rate: Option<f64>,
    pub dv_max: usize,
    /// Check degrees tried by the optimizer.
    pub dc: Vec<usize>,
    /// 0 means one per available core.
    pub workers: usize,
    /// Forces sequential execution.
    pub deterministic: bool,
    pub out: PathBuf,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            kind: ExperimentKind::Rates,
            beta: 1.0,
            snr_db: Vec::new(),
            constellation: default_constellation(),
            code: None,
            seed: 1,
            trials: 100,
            target_frame_errors: 100,
            outer_iters: 60,
            inner_iters: 50,
            rho_min: 1e-3,
            rho_max: 1e3,
            points: 200,
            rate: None,
            dv_max: 12,
            dc: vec![6],
            workers: 1,
            deterministic: false,
            out: PathBuf::from("out"),
        }
    }
}

impl ExperimentSpec {
    /// Checks every field; the error names the first offending one.
    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, reason: &str| Err(Error::invalid(field, reason));
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return fail("beta", "must be positive and finite");
        }
        if self.kind != ExperimentKind::MmseCurve && !(self.kind == ExperimentKind::Optimize && self.rate.is_some()) {
            if self.snr_db.is_empty() {
                return fail("snr_db", "at least one SNR point is required");
            }
        }
        if self.snr_db.iter().any(|x| !x.is_finite()) {
            return fail("snr_db", "values must be finite");
        }
        let c = self.constellation()?;
        if self.trials == 0 {
            return fail("trials", "must be positive");
        }
        if self.target_frame_errors == 0 {
            return fail("target_frame_errors", "must be positive");
        }
        if self.outer_iters == 0 {
            return fail("outer_iters", "must be positive");
        }
        if self.inner_iters == 0 {
            return fail("inner_iters", "must be positive");
        }
        if !(self.rho_min > 0.0 && self.rho_max > self.rho_min && self.rho_max.is_finite()) {
            return fail("rho_min", "need 0 < rho_min < rho_max < inf");
        }
        if self.points < 2 {
            return fail("points", "need at least two grid points");
        }
        if self.rate.is_some_and(|r| !(r > 0.0 && r < 1.0)) {
            return fail("rate", "must lie in (0, 1)");
        }
        if self.dv_max < 2 {
            return fail("dv_max", "must be at least 2");
        }
        if self.dc.is_empty() || self.dc.iter().any(|&d| d < 2) {
            return fail("dc", "need check degrees of at least 2");
        }
        match &self.code {
            Some(code) => {
                for (field, path) in code.paths() {
                    if !path.exists() {
                        return fail(field, &format!("{} does not exist", path.display()));
                    }
                }
            }
            None if self.kind.needs_code() => return fail("code", "this experiment needs a code"),
            None => {}
        }
        let coded = self.kind.needs_code() || self.code.is_some() || self.kind == ExperimentKind::Optimize;
        if coded && c.bits_per_symbol().is_none_or(|b| b > 2) {
            return fail("constellation", "coded experiments support bpsk and qpsk");
        }
        Ok(())
    }

    pub fn constellation(&self) -> Result<Constellation> {
        self.constellation.parse().map_err(|e: Error| match e {
            Error::InvalidSpec { .. } => e,
            other => Error::invalid("constellation", other.to_string()),
        })
    }

    /// Worker threads actually used.
    pub fn effective_workers(&self) -> usize {
        match (self.deterministic, self.workers) {
            (true, _) => 1,
            (false, 0) => available_workers(),
            (false, w) => w,
        }
    }

    pub fn rho_grid(&self) -> Vec<f64> {
        log_grid(self.rho_min, self.rho_max, self.points)
    }

    pub fn csv_path(&self) -> PathBuf {
        self.out.join(format!("{}.csv", self.kind))
    }

    pub fn metadata_path(&self) -> PathBuf {
        self.out.join(format!("{}.json", self.kind))
    }
}

/// Files written by [`run`].
#[derive(Clone, Debug, PartialEq)]
pub struct RunOutput {
    pub csv: PathBuf,
    pub metadata: PathBuf,
    pub extra: Vec<PathBuf>,
    /// Kind-specific summary, also stored in the metadata.
    pub summary: serde_json::Value,
}

/// Version string: the crate version plus `git describe` when the source tree is a checkout.
pub fn version() -> String {
    let pkg = env!("CARGO_PKG_VERSION");
    let git = std::process::Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty());
    match git {
        Some(g) => format!("{pkg}+{g}"),
        None => pkg.to_string(),
    }
}

/// Reads the spec echoed in a metadata file.
pub fn read_spec(metadata: &Path) -> Result<ExperimentSpec> {
    let v: serde_json::Value = serde_json::from_reader(File::open(metadata)?)?;
    let spec = v
        .get("spec")
        .ok_or_else(|| Error::Parse(format!("{} has no spec", metadata.display())))?;
    Ok(serde_json::from_value(spec.clone())?)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn opt(x: Option<f64>) -> String {
    x.filter(|v| v.is_finite()).map(|v| format!("{v:.12e}")).unwrap_or_default()
}

/// Validates `spec`, runs it and writes the result files.
pub fn run(spec: &ExperimentSpec) -> Result<RunOutput> {
    spec.validate()?;
    fs::create_dir_all(&spec.out)?;
    let start = Instant::now();
    let csv = spec.csv_path();
    let mut extra = Vec::new();
    let summary = match spec.kind {
        ExperimentKind::MmseCurve => run_mmse_curve(spec, &csv)?,
        ExperimentKind::SeTrace => run_se_trace(spec, &csv)?,
        ExperimentKind::Capacity => run_capacity(spec, &csv)?,
        ExperimentKind::Rates => run_rates(spec, &csv)?,
        ExperimentKind::TransferChart => run_transfer_chart(spec, &csv)?,
        ExperimentKind::Ber => run_ber(spec, &csv)?,
        ExperimentKind::Match => run_match(spec, &csv)?,
        ExperimentKind::Optimize => run_optimize(spec, &csv, &mut extra)?,
    };
    let meta = json!({
        "version": version(),
        "spec": spec,
        "wall_time_s": start.elapsed().as_secs_f64(),
        "workers": spec.effective_workers(),
        "summary": summary,
    });
    let metadata = spec.metadata_path();
    let mut w = create(&metadata)?;
    serde_json::to_writer_pretty(&mut w, &meta)?;
    writeln!(w)?;
    w.flush()?;
    Ok(RunOutput {
        csv,
        metadata,
        extra,
        summary,
    })
}

fn run_mmse_curve(spec: &ExperimentSpec, path: &Path) -> Result<serde_json::Value> {
    let c = spec.constellation()?;
    let mut w = create(path)?;
    writeln!(w, "rho,mmse")?;
    for rho in spec.rho_grid() {
        writeln!(w, "{rho:.12e},{:.12e}", omega_s(&c, rho)?)?;
    }
    w.flush()?;
    Ok(json!({ "entropy_bits": c.entropy_nats() / std::f64::consts::LN_2 }))
}

fn run_se_trace(spec: &ExperimentSpec, path: &Path) -> Result<serde_json::Value> {
    let table = MmseTable::shared(&spec.constellation()?)?;
    let mut w = create(path)?;
    writeln!(w, "snr_db,iter,rho,v")?;
    let mut fixed = Vec::new();
    for &db in &spec.snr_db {
        let cfg = SystemConfig::from_snr_db(spec.beta, db)?;
        let res = se_fixed_point(&cfg, &*table)?;
        for (t, p) in res.trace.iter().enumerate() {
            writeln!(w, "{db},{t},{:.15e},{:.15e}", p.rho, p.v)?;
        }
        fixed.push(json!({
            "snr_db": db,
            "rho_star": res.rho_star,
            "v_star": res.v_star,
            "single_crossing": res.single_crossing,
        }));
    }
    w.flush()?;
    Ok(json!({ "fixed_points": fixed }))
}

fn run_capacity(spec: &ExperimentSpec, path: &Path) -> Result<serde_json::Value> {
    let table = MmseTable::shared(&spec.constellation()?)?;
    let bits = |r: Result<f64>| r.ok().map(|x| x / std::f64::consts::LN_2);
    let mut w = create(path)?;
    writeln!(w, "snr_db,capacity_bits,area_bits")?;
    let mut failures = 0;
    for &db in &spec.snr_db {
        let cfg = SystemConfig::from_snr_db(spec.beta, db)?;
        let cap = bits(capacity_theorem2_nats(&cfg, &table));
        let area = bits(area_capacity_prop1_nats(&cfg, &table));
        failures += cap.is_none() as usize + area.is_none() as usize;
        writeln!(w, "{db},{},{}", opt(cap), opt(area))?;
    }
    w.flush()?;
    Ok(json!({ "failed_cells": failures }))
}

fn run_rates(spec: &ExperimentSpec, path: &Path) -> Result<serde_json::Value> {
    let cfg = SystemConfig::new(spec.beta, 1.0)?;
    let points = rate_sweep(&cfg, &spec.constellation()?, &spec.snr_db, &RateKind::ALL)?;
    let mut w = create(path)?;
    write_rates_csv(&mut w, &points)?;
    w.flush()?;
    let errors: Vec<_> = points
        .iter()
        .filter_map(|p| p.error.as_ref().map(|e| json!({ "snr_db": p.snr_db, "kind": p.kind, "error": e })))
        .collect();
    Ok(json!({ "errors": errors }))
}

fn measured_curve(spec: &ExperimentSpec, code: &LdpcCode, c: &Constellation) -> Result<TransferCurve> {
    let opts = TransferOptions {
        max_bp_iters: spec.inner_iters,
        seed: spec.seed,
        workers: spec.effective_workers(),
        ..TransferOptions::default()
    };
    decoder_transfer_curve(code, c, &spec.rho_grid(), spec.trials, &opts)
}

fn run_transfer_chart(spec: &ExperimentSpec, path: &Path) -> Result<serde_json::Value> {
    let c = spec.constellation()?;
    let table = MmseTable::shared(&c)?;
    let grid = spec.rho_grid();
    let measured = match &spec.code {
        Some(code) => Some(measured_curve(spec, &code.build()?, &c)?),
        None => None,
    };
    let mut w = create(path)?;
    writeln!(w, "snr_db,rho,omega_s,phi_inv,omega_star,omega_c,omega_c_stderr")?;
    for &db in &spec.snr_db {
        let cfg = SystemConfig::from_snr_db(spec.beta, db)?;
        let star = omega_star_on(&cfg, &table, &grid)?;
        for (i, &rho) in grid.iter().enumerate() {
            let (wc, se) = match &measured {
                Some(m) => (Some(m.values()[i]), m.stderr().map(|s| s[i])),
                None => (None, None),
            };
            writeln!(
                w,
                "{db},{rho:.12e},{:.12e},{:.12e},{:.12e},{},{}",
                table.eval(rho),
                phi_inv_raw(&cfg, rho).max(0.0),
                star.values()[i],
                opt(wc),
                opt(se)
            )?;
        }
    }
    w.flush()?;
    Ok(json!({ "measured": measured.is_some() }))
}

fn run_ber(spec: &ExperimentSpec, path: &Path) -> Result<serde_json::Value> {
    let points = ber_campaign(spec)?;
    let mut w = create(path)?;
    ber::write_ber_csv(&mut w, &points)?;
    w.flush()?;
    Ok(json!({ "points": points.len() }))
}

fn run_match(spec: &ExperimentSpec, path: &Path) -> Result<serde_json::Value> {
    let c = spec.constellation()?;
    let table = MmseTable::shared(&c)?;
    let code = spec.code.as_ref().expect("validated").build()?;
    let curve = measured_curve(spec, &code, &c)?;
    let mut w = create(path)?;
    writeln!(w, "snr_db,tunnel_open,min_gap,predicted_threshold_db,rate_gap_bits")?;
    let mut reports = Vec::new();
    for &db in &spec.snr_db {
        let cfg = SystemConfig::from_snr_db(spec.beta, db)?;
        let star = omega_star_on(&cfg, &table, curve.rho())?;
        let rep = check_matching(&cfg, &curve, &star, &MatchOptions::default())?;
        writeln!(
            w,
            "{db},{},{},{},{:.12e}",
            rep.tunnel_open,
            opt(rep.min_gap),
            opt(rep.predicted_threshold_db),
            rep.rate_gap_to_capacity
        )?;
        reports.push(rep);
    }
    w.flush()?;
    Ok(json!({ "code_rate": code.rate(), "reports": reports }))
}

fn run_optimize(spec: &ExperimentSpec, path: &Path, extra: &mut Vec<PathBuf>) -> Result<serde_json::Value> {
    let c = spec.constellation()?;
    let base = LpOptions {
        dv_max: spec.dv_max,
        dc: spec.dc[0],
        ..LpOptions::default()
    };
    let mut designs = Vec::new();
    let mut notes = Vec::new();
    if let Some(rate) = spec.rate {
        let d = design_for_rate(spec.beta, &c, rate, &spec.dc, &base, &MatchOptions::default())?;
        notes.push(json!({ "design_point_db": d.design_point_db, "threshold_db": d.threshold_db }));
        designs.push((d.design_point_db, d.design));
    } else {
        for &db in &spec.snr_db {
            let cfg = SystemConfig::from_snr_db(spec.beta, db)?;
            for &dc in &spec.dc {
                match optimize_degrees(&cfg, &c, &LpOptions { dc, ..base.clone() }) {
                    Ok(d) => designs.push((db, d)),
                    Err(Error::Infeasible(msg)) => notes.push(json!({ "snr_db": db, "dc": dc, "infeasible": msg })),
                    Err(e) => return Err(e),
                }
            }
        }
    }
    let mut w = create(path)?;
    writeln!(w, "snr_db,design_rate,node,degree,fraction")?;
    for (db, d) in &designs {
        for (node, list) in [("variable", &d.dd.lambda), ("check", &d.dd.rho)] {
            for (deg, frac) in list {
                writeln!(w, "{db},{:.12},{node},{deg},{frac:.12e}", d.design_rate)?;
            }
        }
    }
    w.flush()?;
    if let Some((_, best)) = designs.iter().max_by(|a, b| a.1.design_rate.total_cmp(&b.1.design_rate)) {
        let p = spec.out.join("optimize_constraints.csv");
        let mut cw = create(&p)?;
        best.write_constraints_csv(&mut cw)?;
        cw.flush()?;
        extra.push(p);
    }
    Ok(json!({ "designs": designs.len(), "notes": notes }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_roundtrip() {
        for k in ExperimentKind::ALL {
            assert_eq!(k.as_str().parse::<ExperimentKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{k}\""));
        }
    }

    #[test]
    fn code_spec_parses() {
        assert_eq!(
            "regular:96:3:6:4".parse::<CodeSpec>().unwrap(),
            CodeSpec::Regular { n: 96, dv: 3, dc: 6, seed: 4 }
        );
        assert_eq!(
            "alist:a/b.alist".parse::<CodeSpec>().unwrap(),
            CodeSpec::Alist { path: "a/b.alist".into() }
        );
        assert!("regular:96:3".parse::<CodeSpec>().is_err());
    }

    #[test]
    fn validation_names_fields() {
        let field = |s: ExperimentSpec| match s.validate() {
            Err(Error::InvalidSpec { field, .. }) => field,
            other => panic!("expected a spec error, got {other:?}"),
        };
        let base = ExperimentSpec {
            snr_db: vec![0.0],
            ..ExperimentSpec::default()
        };
        assert!(base.validate().is_ok());
        assert_eq!(field(ExperimentSpec { beta: -1.0, ..base.clone() }), "beta");
        assert_eq!(field(ExperimentSpec { snr_db: vec![], ..base.clone() }), "snr_db");
        assert_eq!(field(ExperimentSpec { trials: 0, ..base.clone() }), "trials");
        assert_eq!(field(ExperimentSpec { constellation: "nope".into(), ..base.clone() }), "constellation");
        assert_eq!(field(ExperimentSpec { kind: ExperimentKind::Ber, ..base.clone() }), "code");
        let missing = CodeSpec::Alist {
            path: "/definitely/not/here.alist".into(),
        };
        assert_eq!(field(ExperimentSpec { code: Some(missing), ..base.clone() }), "code.path");
    }
}
