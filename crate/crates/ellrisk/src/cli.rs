//! Command-line surface: fit a normal model from return data, compute risk
//! measures into JSON reports, and sweep univariate DTE/DTV curves to CSV.

use crate::error::{EllError, Result};
use crate::generator::GeneratorFamily;
use crate::model::{EllipticalDist, TruncationBand};
use crate::risk::{self, BandInfo, ComputeOpts, FamilyInfo, MeasureEntry, RiskReport};
use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(
    name = "ellrisk",
    about = "Doubly truncated expectation and covariance risk measures for elliptical distributions",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Fit a normal model to a CSV of returns by maximum likelihood.
    Fit(FitArgs),
    /// Compute risk measures for a model and a truncation band.
    Measure(MeasureArgs),
    /// Sweep univariate DTE/DTV of one component over a band-parameter grid.
    Curve(CurveArgs),
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Distribution family; only `normal` supports fitting.
    #[arg(long, default_value = "normal")]
    pub family: String,
    /// Input CSV: header row of asset names, one return vector per row.
    #[arg(long)]
    pub input: PathBuf,
    /// Output model JSON path (stdout when omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MeasureArgs {
    /// Model JSON produced by `fit` (or written by hand).
    #[arg(long, conflicts_with_all = ["mu", "sigma"])]
    pub model: Option<PathBuf>,
    /// Inline location vector, comma separated.
    #[arg(long, requires = "sigma")]
    pub mu: Option<String>,
    /// Inline scale matrix, rows separated by ';', entries by ','.
    #[arg(long, requires = "mu")]
    pub sigma: Option<String>,
    /// Family for inline parameters.
    #[arg(long, default_value = "normal")]
    pub family: String,
    /// Shape parameter (Student-t degrees of freedom or Pearson VII exponent).
    #[arg(long)]
    pub shape: Option<f64>,
    /// Lower band levels: scalar broadcast or comma list.
    #[arg(long)]
    pub p: String,
    /// Upper band levels: scalar broadcast or comma list.
    #[arg(long)]
    pub q: String,
    /// Comma list among dte,dtv,mdte,mdtcov,mdtcorr,mdtccov,mtce,mtcov.
    #[arg(long, default_value = "mdte,mdtcov")]
    pub measures: String,
    /// Target accuracy per integral.
    #[arg(long, default_value_t = 1e-6)]
    pub accuracy: f64,
    /// Seed for randomized integration.
    #[arg(long, default_value_t = crate::DEFAULT_SEED)]
    pub seed: u64,
    /// Output report JSON path (stdout when omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CurveArgs {
    /// Model JSON path.
    #[arg(long)]
    pub model: PathBuf,
    /// 1-based component index of the marginal to sweep.
    #[arg(long, default_value_t = 1)]
    pub component: usize,
    /// Fixed parameter: `p=0.05`, `q=0.95`, or `sum=1.0` (p+q held constant
    /// while the sweep variable moves).
    #[arg(long)]
    pub fix: String,
    /// Sweep grid: `q=0.1:0.95:0.05` or `p=0.05:0.45:0.05`.
    #[arg(long)]
    pub sweep: String,
    #[arg(long, default_value_t = 1e-6)]
    pub accuracy: f64,
    #[arg(long, default_value_t = crate::DEFAULT_SEED)]
    pub seed: u64,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Model interchange file.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub family: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub shape: Option<f64>,
    pub mu: Vec<f64>,
    pub sigma: Vec<Vec<f64>>,
}

pub fn parse_family(name: &str, shape: Option<f64>) -> Result<GeneratorFamily> {
    match name {
        "normal" => Ok(GeneratorFamily::normal()),
        "student_t" => GeneratorFamily::student_t(shape.ok_or_else(|| {
            EllError::Domain("student_t needs --shape (degrees of freedom)".into())
        })?),
        "logistic" => Ok(GeneratorFamily::logistic()),
        "laplace" => Ok(GeneratorFamily::laplace()),
        "pearson_vii" => {
            GeneratorFamily::pearson_vii(shape.ok_or_else(|| {
                EllError::Domain("pearson_vii needs --shape (tail exponent)".into())
            })?)
        }
        other => Err(EllError::Domain(format!(
            "unknown family '{other}' (expected normal, student_t, logistic, laplace, pearson_vii)"
        ))),
    }
}

impl ModelFile {
    pub fn from_dist(dist: &EllipticalDist) -> Self {
        let n = dist.dim();
        Self {
            family: dist.family().name().to_string(),
            shape: dist.family().shape,
            mu: dist.mu().iter().copied().collect(),
            sigma: (0..n)
                .map(|i| (0..n).map(|j| dist.sigma()[(i, j)]).collect())
                .collect(),
        }
    }

    pub fn to_dist(&self) -> Result<EllipticalDist> {
        let family = parse_family(&self.family, self.shape)?;
        let n = self.mu.len();
        if self.sigma.len() != n || self.sigma.iter().any(|row| row.len() != n) {
            return Err(EllError::DimensionMismatch(
                "sigma must be n x n matching mu".into(),
            ));
        }
        let sigma = DMatrix::from_fn(n, n, |i, j| self.sigma[i][j]);
        EllipticalDist::new(DVector::from_vec(self.mu.clone()), sigma, family)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EllError::Parse(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| EllError::Parse(format!("model JSON: {e}")))
    }
}

/// Reads a returns table: header row of asset names, numeric rows after.
pub fn read_returns_csv(path: &Path) -> Result<(Vec<String>, DMatrix<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(path)
        .map_err(|e| EllError::Parse(format!("cannot open {}: {e}", path.display())))?;
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| EllError::Parse(format!("header: {e}")))?
        .iter()
        .map(String::from)
        .collect();
    let n = names.len();
    if n == 0 {
        return Err(EllError::Parse("empty header row".into()));
    }
    let mut rows: Vec<f64> = Vec::new();
    let mut count = 0usize;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| EllError::Parse(format!("row {}: {e}", idx + 2)))?;
        if record.len() != n {
            return Err(EllError::Parse(format!(
                "row {}: expected {n} fields, found {}",
                idx + 2,
                record.len()
            )));
        }
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                EllError::Parse(format!(
                    "row {}, column '{}': not a number: '{field}'",
                    idx + 2,
                    names[col]
                ))
            })?;
            rows.push(v);
        }
        count += 1;
    }
    if count == 0 {
        return Err(EllError::Parse("no data rows".into()));
    }
    Ok((names, DMatrix::from_row_slice(count, n, &rows)))
}

fn parse_levels(text: &str, n: usize, name: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| EllError::Parse(format!("--{name}: bad number '{s}'")))
        })
        .collect::<Result<_>>()?;
    match parts.len() {
        1 => Ok(vec![parts[0]; n]),
        len if len == n => Ok(parts),
        len => Err(EllError::InvalidBand(format!(
            "--{name}: expected 1 or {n} values, got {len}"
        ))),
    }
}

fn write_text(path: &Option<PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)
            .map_err(|e| EllError::Parse(format!("cannot write {}: {e}", p.display()))),
        None => {
            println!("{}", text.trim_end_matches('\n'));
            Ok(())
        }
    }
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    if args.family != "normal" {
        return Err(EllError::Domain(format!(
            "fitting is supported for the normal family only, got '{}'",
            args.family
        )));
    }
    let (_names, data) = read_returns_csv(&args.input)?;
    let dist = EllipticalDist::fit_normal_mle(&data)?;
    let model = ModelFile::from_dist(&dist);
    let text = serde_json::to_string_pretty(&model).expect("model serializes");
    write_text(&args.output, &text)
}

fn json_vec(v: &DVector<f64>) -> serde_json::Value {
    serde_json::json!(v.iter().copied().collect::<Vec<f64>>())
}

fn json_mat(m: &DMatrix<f64>) -> serde_json::Value {
    let rows: Vec<Vec<f64>> = (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect();
    serde_json::json!(rows)
}

fn scalar_component(dist: &EllipticalDist, k: usize) -> Result<EllipticalDist> {
    EllipticalDist::new(
        DVector::from_element(1, dist.mu()[k]),
        DMatrix::from_element(1, 1, dist.sigma()[(k, k)]),
        *dist.family(),
    )
}

pub fn load_measure_model(args: &MeasureArgs) -> Result<EllipticalDist> {
    if let Some(path) = &args.model {
        return ModelFile::load(path)?.to_dist();
    }
    let (Some(mu_text), Some(sigma_text)) = (&args.mu, &args.sigma) else {
        return Err(EllError::Domain(
            "need either --model or both --mu and --sigma".into(),
        ));
    };
    let mu: Vec<f64> = mu_text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| EllError::Parse(format!("--mu: bad number '{s}'")))
        })
        .collect::<Result<_>>()?;
    let rows: Vec<Vec<f64>> = sigma_text
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|_| EllError::Parse(format!("--sigma: bad number '{s}'")))
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let model = ModelFile {
        family: args.family.clone(),
        shape: args.shape,
        mu,
        sigma: rows,
    };
    model.to_dist()
}

pub fn cmd_measure(args: &MeasureArgs) -> Result<()> {
    let dist = load_measure_model(args)?;
    let n = dist.dim();
    let p = parse_levels(&args.p, n, "p")?;
    let q = parse_levels(&args.q, n, "q")?;
    let band = TruncationBand::new(p.clone(), q.clone())?;
    let opts = ComputeOpts {
        accuracy: args.accuracy,
        seed: args.seed,
        ..Default::default()
    };

    let requested: Vec<&str> = args
        .measures
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if requested.is_empty() {
        return Err(EllError::Domain("no measures requested".into()));
    }

    let mut entries = Vec::new();
    for name in &requested {
        let entry = match *name {
            "dte" | "dtv" => {
                // per-component univariate measures of the marginals
                let mut vals = Vec::with_capacity(n);
                let mut errs = Vec::with_capacity(n);
                for k in 0..n {
                    let scalar = scalar_component(&dist, k)?;
                    let e = if *name == "dte" {
                        risk::dte(&scalar, p[k], q[k], &opts)?
                    } else {
                        risk::dtv(&scalar, p[k], q[k], &opts)?
                    };
                    vals.push(e.value);
                    errs.push(e.std_error);
                }
                MeasureEntry {
                    measure: name.to_string(),
                    value: serde_json::json!(vals),
                    error_estimate: serde_json::json!(errs),
                }
            }
            "mdte" => {
                let e = risk::mdte(&dist, &band, &opts)?;
                MeasureEntry {
                    measure: name.to_string(),
                    value: json_vec(&e.value),
                    error_estimate: json_vec(&e.std_error),
                }
            }
            "mtce" => {
                let e = risk::mtce(&dist, band.p(), &opts)?;
                MeasureEntry {
                    measure: name.to_string(),
                    value: json_vec(&e.value),
                    error_estimate: json_vec(&e.std_error),
                }
            }
            "mdtcov" | "mdtcorr" | "mdtccov" => {
                let e = match *name {
                    "mdtcov" => risk::mdtcov(&dist, &band, &opts)?,
                    "mdtcorr" => risk::mdtcorr(&dist, &band, &opts)?,
                    _ => risk::mdtccov(&dist, &band, &opts)?,
                };
                MeasureEntry {
                    measure: name.to_string(),
                    value: json_mat(&e.value),
                    error_estimate: json_mat(&e.std_error),
                }
            }
            "mtcov" => {
                let e = risk::mtcov(&dist, band.p(), &opts)?;
                MeasureEntry {
                    measure: name.to_string(),
                    value: json_mat(&e.value),
                    error_estimate: json_mat(&e.std_error),
                }
            }
            other => {
                return Err(EllError::Domain(format!(
                    "unknown measure '{other}' (expected dte,dtv,mdte,mdtcov,mdtcorr,mdtccov,mtce,mtcov)"
                )))
            }
        };
        entries.push(entry);
    }

    let bp = risk::band_prob(&dist, &band, &opts)?;
    let report = RiskReport {
        family: FamilyInfo {
            name: dist.family().name().to_string(),
            shape: dist.family().shape,
        },
        seed: args.seed,
        band: BandInfo { p, q },
        band_prob: bp.value,
        measures: entries,
    };
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    write_text(&args.output, &text)
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum SweepVar {
    P,
    Q,
}

struct SweepSpec {
    var: SweepVar,
    grid: Vec<f64>,
    fixed: FixedSpec,
}

#[derive(Clone, Copy, Debug)]
enum FixedSpec {
    P(f64),
    Q(f64),
    Sum(f64),
}

fn parse_sweep(args: &CurveArgs) -> Result<SweepSpec> {
    let (var_name, grid_text) = args
        .sweep
        .split_once('=')
        .ok_or_else(|| EllError::Parse("--sweep must look like q=0.1:0.95:0.05".into()))?;
    let var = match var_name.trim() {
        "p" => SweepVar::P,
        "q" => SweepVar::Q,
        other => {
            return Err(EllError::Parse(format!(
                "--sweep variable must be p or q, got '{other}'"
            )))
        }
    };
    let parts: Vec<f64> = grid_text
        .split(':')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| EllError::Parse(format!("--sweep: bad number '{s}'")))
        })
        .collect::<Result<_>>()?;
    let [start, stop, step] = parts[..] else {
        return Err(EllError::Parse(
            "--sweep grid must be start:stop:step".into(),
        ));
    };
    if !(step > 0.0) || stop < start {
        return Err(EllError::Parse(
            "--sweep grid must be increasing with positive step".into(),
        ));
    }
    let mut grid = Vec::new();
    let mut v = start;
    while v <= stop + 1e-12 {
        grid.push(v.min(stop));
        v += step;
    }
    let (fix_name, fix_val) = args
        .fix
        .split_once('=')
        .ok_or_else(|| EllError::Parse("--fix must look like p=0.05 or sum=1.0".into()))?;
    let fv: f64 = fix_val
        .trim()
        .parse()
        .map_err(|_| EllError::Parse(format!("--fix: bad number '{fix_val}'")))?;
    let fixed = match fix_name.trim() {
        "p" => FixedSpec::P(fv),
        "q" => FixedSpec::Q(fv),
        "sum" => FixedSpec::Sum(fv),
        other => {
            return Err(EllError::Parse(format!(
                "--fix must set p, q or sum, got '{other}'"
            )))
        }
    };
    match (var, fixed) {
        (SweepVar::P, FixedSpec::P(_)) | (SweepVar::Q, FixedSpec::Q(_)) => Err(EllError::Parse(
            "--fix and --sweep must name different parameters".into(),
        )),
        _ => Ok(SweepSpec { var, grid, fixed }),
    }
}

pub fn cmd_curve(args: &CurveArgs) -> Result<()> {
    let dist = ModelFile::load(&args.model)?.to_dist()?;
    if args.component == 0 || args.component > dist.dim() {
        return Err(EllError::DimensionMismatch(format!(
            "--component must be in 1..={}, got {}",
            dist.dim(),
            args.component
        )));
    }
    let scalar = scalar_component(&dist, args.component - 1)?;
    let sweep = parse_sweep(args)?;
    let opts = ComputeOpts {
        accuracy: args.accuracy,
        seed: args.seed,
        ..Default::default()
    };

    let mut out = String::from("p,q,dte,dtv\n");
    for &g in &sweep.grid {
        let (p, q) = match (sweep.var, sweep.fixed) {
            (SweepVar::Q, FixedSpec::P(p)) => (p, g),
            (SweepVar::Q, FixedSpec::Sum(s)) => (s - g, g),
            (SweepVar::P, FixedSpec::Q(q)) => (g, q),
            (SweepVar::P, FixedSpec::Sum(s)) => (g, s - g),
            _ => unreachable!("rejected in parse_sweep"),
        };
        let e = risk::dte(&scalar, p, q, &opts)?;
        let v = risk::dtv(&scalar, p, q, &opts)?;
        out.push_str(&format!("{p},{q},{:.12},{:.12}\n", e.value, v.value));
    }
    write_text(&args.output, &out)
}

/// Runs one parsed command; errors map to exit code 2 with JSON on stderr.
pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Measure(args) => cmd_measure(args),
        Command::Curve(args) => cmd_curve(args),
    }
}
