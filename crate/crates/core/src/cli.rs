//! Command-line front end. Exit codes: 0 ok, 1 domain error, 2 input,
//! syntax or usage error.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::economics::{crop_balance, marginal_share_sweep};
use crate::factors::{load_factor_db, FactorDb, LookupMode};
use crate::farm::{load_farm, FarmError, FarmModel, LoadedFarm, ValidationReport};
use crate::impact::{characterize, phase_shares};
use crate::inventory::{build_lci, BuildOptions, SeedMode, FUNCTIONAL_UNIT};
use crate::report::{self, AssessReport, CropReport, InputFile, RunManifest, StampedManifest};

#[derive(Debug, Parser)]
#[command(name = "cropgate", version, about = "Economic, GWP and primary-energy assessment of crop alternatives")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a farm description.
    Validate {
        #[arg(long)]
        farm: PathBuf,
    },
    /// Balance, GWP and energy of one crop.
    Assess {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        crop: String,
    },
    /// Side-by-side assessment of two crops; defaults to the farm's pair.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Give twice: `--crop a --crop b`.
        #[arg(long, num_args = 1)]
        crop: Vec<String>,
    },
    /// Relative income difference of the farm's pair over marginal shares.
    Sweep {
        #[arg(long)]
        farm: PathBuf,
        /// Comma-separated shares of the total area in (0, 1).
        #[arg(long, value_delimiter = ',', conflicts_with_all = ["from", "to", "step"])]
        shares: Vec<f64>,
        #[arg(long, requires_all = ["to", "step"])]
        from: Option<f64>,
        #[arg(long, requires_all = ["from", "step"])]
        to: Option<f64>,
        #[arg(long, requires_all = ["from", "to"])]
        step: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub farm: PathBuf,
    /// Factor file; defaults to the farm's `factors` entry, relative to it.
    #[arg(long)]
    pub factors: Option<PathBuf>,
    /// Missing factors contribute zero instead of failing.
    #[arg(long)]
    pub cutoff_missing: bool,
    /// Amortization horizon in years; overrides the farm file.
    #[arg(long)]
    pub horizon: Option<u32>,
    /// Truncate the seed-for-seed recursion after one level.
    #[arg(long)]
    pub seed_one_level: bool,
    /// Directory for report files; without it reports go to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

#[derive(Debug)]
pub enum CliError {
    /// Bad input files, syntax or usage; exit 2.
    Input(String),
    /// Well-formed input that fails a domain rule; exit 1.
    Domain(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Domain(_) => 1,
            CliError::Input(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) | CliError::Domain(m) => f.write_str(m),
        }
    }
}

fn domain(e: impl fmt::Display) -> CliError {
    CliError::Domain(e.to_string())
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn diagnostics(report: &ValidationReport) -> String {
    report.to_string()
}

fn load(path: &Path) -> Result<(LoadedFarm, String), CliError> {
    let text = read(path)?;
    match load_farm(&text) {
        Ok(l) => Ok((l, text)),
        Err(FarmError::Syntax(e)) => Err(CliError::Input(format!("{}: {e}", path.display()))),
        Err(FarmError::Invalid(r)) => Err(CliError::Domain(format!("{}:\n{}", path.display(), diagnostics(&r)))),
    }
}

fn factors_path(common: &Common, model: &FarmModel) -> Result<PathBuf, CliError> {
    if let Some(p) = &common.factors {
        return Ok(p.clone());
    }
    let rel = model
        .factors_file
        .as_ref()
        .ok_or_else(|| CliError::Input("no --factors given and the farm names no factor file".into()))?;
    Ok(common.farm.parent().unwrap_or(Path::new("")).join(rel))
}

struct Session {
    model: FarmModel,
    db: FactorDb,
    manifest: RunManifest,
    opts: BuildOptions,
    mode: LookupMode,
}

fn open(command: &str, common: &Common) -> Result<Session, CliError> {
    let (loaded, farm_text) = load(&common.farm)?;
    for w in loaded.report.warnings() {
        eprintln!("{w}");
    }
    let fpath = factors_path(common, &loaded.model)?;
    let factors_text = read(&fpath)?;
    let db = load_factor_db(&factors_text).map_err(|e| CliError::Input(format!("{}: {e}", fpath.display())))?;
    let opts = BuildOptions {
        horizon_years: common.horizon,
        seed_mode: if common.seed_one_level {
            SeedMode::OneLevel
        } else {
            SeedMode::FixedPoint
        },
        ..BuildOptions::default()
    };
    if common.horizon == Some(0) {
        return Err(CliError::Input("--horizon must be at least 1".into()));
    }
    let mode = if common.cutoff_missing {
        LookupMode::Cutoff
    } else {
        LookupMode::Strict
    };
    let mut manifest = RunManifest::new(command)
        .flag("horizon", opts.horizon(&loaded.model))
        .flag("cutoff_missing", common.cutoff_missing)
        .flag("seed_one_level", common.seed_one_level)
        .flag("format", common.format);
    manifest.inputs = vec![
        InputFile::new("farm", &common.farm.display().to_string(), farm_text.as_bytes()),
        InputFile::new("factors", &fpath.display().to_string(), factors_text.as_bytes()),
    ];
    Ok(Session {
        model: loaded.model,
        db,
        manifest,
        opts,
        mode,
    })
}

fn assess_crop(s: &Session, name: &str) -> Result<CropReport, CliError> {
    let crop = s
        .model
        .crop(name)
        .ok_or_else(|| CliError::Domain(format!("unknown crop `{name}`")))?;
    let horizon = s.opts.horizon(&s.model);
    let balance = crop_balance(crop, s.model.cap_aid, horizon).map_err(domain)?;
    let inventory = build_lci(crop, &s.model, &s.db, &s.opts).map_err(domain)?;
    let impact = characterize(&inventory, &s.db, s.mode).map_err(domain)?;
    for w in &impact.warnings {
        eprintln!("warning: {w}");
    }
    let shares = phase_shares(&impact).map_err(domain)?;
    Ok(CropReport {
        crop: name.to_string(),
        functional_unit: FUNCTIONAL_UNIT,
        balance,
        impact,
        shares,
        inventory,
    })
}

fn stamp(manifest: &RunManifest) -> String {
    let unix_time = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or_default();
    report::to_json(&StampedManifest {
        manifest,
        digest: manifest.digest(),
        unix_time,
    })
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Input(format!("stdout: {e}")))
}

fn cmd_validate(farm: &Path, out: &mut dyn Write) -> Result<(), CliError> {
    let (loaded, _) = load(farm)?;
    let m = &loaded.model;
    let mut text = diagnostics(&loaded.report);
    text.push_str(&format!(
        "ok: {} crops, {} ha total, {} warning(s)\n",
        m.crops.len(),
        report::fixed(m.total_area_ha, 2),
        loaded.report.warnings().count()
    ));
    emit(out, &text)
}

fn cmd_assess(common: &Common, crop: &str, out: &mut dyn Write) -> Result<(), CliError> {
    let s = open("assess", common)?;
    let manifest = s.manifest.clone().flag("crop", crop);
    let r = assess_crop(&s, crop)?;
    let result = report::to_json(&AssessReport {
        manifest: &manifest,
        manifest_digest: manifest.digest(),
        result: &r,
    });
    let csvs = [
        ("balance.csv", report::balance_csv(&r.balance)),
        ("gwp_phases.csv", report::gwp_csv(&r.impact, &r.shares)),
        ("energy_phases.csv", report::energy_csv(&r.impact, &r.shares)),
    ];
    match &common.out {
        Some(dir) => {
            ensure_dir(dir)?;
            if common.format == Format::Csv {
                for (name, body) in &csvs {
                    write(dir, name, body)?;
                }
            }
            write(dir, "result.json", &result)?;
            write(dir, "manifest.json", &stamp(&manifest))
        }
        None if common.format == Format::Json => emit(out, &result),
        None => {
            let text: Vec<String> = csvs.iter().map(|(name, body)| format!("# {name}\n{body}")).collect();
            emit(out, &text.join("\n"))
        }
    }
}

fn cmd_compare(common: &Common, crops: &[String], out: &mut dyn Write) -> Result<(), CliError> {
    let s = open("compare", common)?;
    let (a, b) = match crops {
        [] => s.model.comparison.clone(),
        [a, b] => (a.clone(), b.clone()),
        _ => return Err(CliError::Input("give --crop exactly twice, or not at all".into())),
    };
    let manifest = s.manifest.clone().flag("crop_a", &a).flag("crop_b", &b);
    let ra = assess_crop(&s, &a)?;
    let rb = assess_crop(&s, &b)?;
    let cmp = report::compare(&ra, &rb);
    #[derive(serde::Serialize)]
    struct Body<'a> {
        manifest: &'a RunManifest,
        manifest_digest: String,
        comparison: &'a report::Comparison,
        results: [&'a CropReport; 2],
    }
    let json = report::to_json(&Body {
        manifest: &manifest,
        manifest_digest: manifest.digest(),
        comparison: &cmp,
        results: [&ra, &rb],
    });
    let table = report::comparison_csv(&cmp);
    match &common.out {
        Some(dir) => {
            ensure_dir(dir)?;
            if common.format == Format::Csv {
                write(dir, "comparison.csv", &table)?;
            }
            write(dir, "comparison.json", &json)?;
            write(dir, "manifest.json", &stamp(&manifest))
        }
        None if common.format == Format::Json => emit(out, &json),
        None => emit(out, &table),
    }
}

/// Inclusive range `from, from + step, ..., to`.
fn share_range(from: f64, to: f64, step: f64) -> Result<Vec<f64>, CliError> {
    let ordered = step > 0.0 && to >= from && from.is_finite() && to.is_finite();
    if !ordered {
        return Err(CliError::Input(format!("empty share range {from}..{to} step {step}")));
    }
    let n = ((to - from) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| from + i as f64 * step).collect())
}

fn cmd_sweep(
    farm: &Path,
    shares: &[f64],
    range: Option<(f64, f64, f64)>,
    out_dir: Option<&Path>,
    format: Format,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let shares = match range {
        Some((from, to, step)) => share_range(from, to, step)?,
        None if shares.is_empty() => return Err(CliError::Input("give --shares or --from/--to/--step".into())),
        None => shares.to_vec(),
    };
    if let Some(bad) = shares.iter().find(|s| !(**s > 0.0 && **s < 1.0)) {
        return Err(CliError::Input(format!("share {bad} is outside (0, 1)")));
    }
    let (loaded, text) = load(farm)?;
    let model = &loaded.model;
    let points = marginal_share_sweep(model, &shares).map_err(domain)?;
    let mut manifest = RunManifest::new("sweep")
        .flag("shares", shares.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(","))
        .flag("format", format);
    manifest.inputs = vec![InputFile::new("farm", &farm.display().to_string(), text.as_bytes())];
    let (cand, base) = &model.comparison;
    let table = report::sweep_csv(&points, cand, base);
    #[derive(serde::Serialize)]
    struct Body<'a> {
        manifest: &'a RunManifest,
        manifest_digest: String,
        candidate: &'a str,
        baseline: &'a str,
        points: &'a [crate::economics::SweepPoint],
    }
    let json = report::to_json(&Body {
        manifest: &manifest,
        manifest_digest: manifest.digest(),
        candidate: cand,
        baseline: base,
        points: &points,
    });
    match out_dir {
        Some(dir) => {
            ensure_dir(dir)?;
            if format == Format::Csv {
                write(dir, "sweep.csv", &table)?;
            }
            write(dir, "sweep.json", &json)?;
            write(dir, "manifest.json", &stamp(&manifest))
        }
        None if format == Format::Json => emit(out, &json),
        None => emit(out, &table),
    }
}

pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Validate { farm } => cmd_validate(farm, out),
        Command::Assess { common, crop } => cmd_assess(common, crop, out),
        Command::Compare { common, crop } => cmd_compare(common, crop, out),
        Command::Sweep {
            farm,
            shares,
            from,
            to,
            step,
            out: out_dir,
            format,
        } => {
            let range = match (from, to, step) {
                (Some(f), Some(t), Some(s)) => Some((*f, *t, *s)),
                _ => None,
            };
            cmd_sweep(farm, shares, range, out_dir.as_deref(), *format, out)
        }
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match execute(&cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        let r = share_range(0.1, 0.5, 0.1).unwrap();
        assert_eq!(r.len(), 5);
        assert!((r[4] - 0.5).abs() < 1e-12);
        assert!(share_range(0.5, 0.1, 0.1).is_err());
        assert!(share_range(0.1, 0.5, 0.0).is_err());
    }

    #[test]
    fn clap_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
