//! Command implementations behind the `anchor-crc` binary.
//!
//! Reports are plain serde types; JSON is canonical and CSV is a projection
//! of the same fields. Field names are stable and covered by golden tests.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anchor_crc::analysis::{
    analyze_mle, analyze_plugin, chapman_from_counts, AnalysisOptions, DEFAULT_SEED,
};
use anchor_crc::credible::{CredibleInterval, CredibleKind};
use anchor_crc::domain::{
    collapse_streams, derive_crc_table, tabulate_records, CellCounts, CrcTable,
};
use anchor_crc::estimators::{
    estimate_anchor_exact, estimate_rs_from_counts, mle_parameters, overall_sampling_rate,
    Estimate, EstimatorKind, IntervalKind, MleParameters,
};
use anchor_crc::io::{is_multistream_header, read_multistream_records, read_records};
use anchor_crc::rng::derive_seed;
use anchor_crc::sim::{
    run_study, summarize_study, write_summary_csv, SimDocument, SimStudy, StudySummary,
};
use anchor_crc::variance::MiVarianceResult;
use anchor_crc::CrcError;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const SOFTWARE: &str = concat!("anchor-crc ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Identifiability(CrcError),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    /// 2 for bad input, 3 for non-identifiable data, 4 for internal faults.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Identifiability(_) => 3,
            CliError::Internal(_) => 4,
        }
    }
}

impl From<CrcError> for CliError {
    fn from(e: CrcError) -> Self {
        match e {
            e if e.is_identifiability() => CliError::Identifiability(e),
            CrcError::NoUsableReplicates(_) => CliError::Identifiability(e),
            CrcError::Internal(msg) => CliError::Internal(msg),
            other => CliError::Input(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(
    name = "anchor-crc",
    version,
    about = "Anchor-stream capture-recapture estimation of registry case counts"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the case count from a record file or cell counts.
    Estimate(EstimateArgs),
    /// Run a simulation study and write its summaries.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    /// CSV of subject records (two-stream or stream_1..stream_K layout).
    #[arg(
        long,
        conflicts_with = "counts",
        required_unless_present = "counts",
        requires = "n_tot"
    )]
    pub records: Option<PathBuf>,
    /// Registry size; required with --records.
    #[arg(long)]
    pub n_tot: Option<u64>,
    /// JSON object with n1..n5, optional n6, and n_tot.
    #[arg(long)]
    pub counts: Option<PathBuf>,
    /// Comma-separated subset of rs, chapman, plugin, mle, anchor_exact.
    #[arg(long, value_delimiter = ',', default_value = "mle,rs,chapman")]
    pub methods: Vec<String>,
    /// Known PPV of stream 1; required for the plug-in estimator.
    #[arg(long)]
    pub ppv: Option<f64>,
    /// Anchor sampling rate for plugin (default n/N_tot) and anchor_exact (default psi*).
    #[arg(long)]
    pub psi: Option<f64>,
    #[arg(long, default_value_t = 200)]
    pub imputations: usize,
    /// Posterior draws as SxT (outer PPV draws x inner cell draws).
    #[arg(long, default_value = "100x100", value_parser = parse_draws)]
    pub draws: (usize, usize),
    /// Master seed; 0 draws one from the OS.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,
    /// Include wall time in the report (makes output non-reproducible).
    #[arg(long)]
    pub timing: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// JSON simulation config: a single scenario or a study with labelled settings.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "sim-out")]
    pub out: PathBuf,
    /// Replicates per setting, overriding the config.
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Master seed overriding the config; setting i uses a seed derived from it.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

pub fn parse_draws(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected SxT, got `{s}`"))?;
    let parse = |v: &str| v.trim().parse::<usize>().map_err(|e| format!("`{v}`: {e}"));
    let (s_outer, t_inner) = (parse(a)?, parse(b)?);
    if s_outer == 0 || t_inner == 0 {
        return Err("S and T must be positive".into());
    }
    Ok((s_outer, t_inner))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputEcho {
    /// `counts` or `records`.
    pub source: String,
    pub path: String,
    pub counts: CellCounts,
    pub crc_table: CrcTable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionsEcho {
    pub methods: Vec<EstimatorKind>,
    pub imputations: usize,
    pub s_outer: usize,
    pub t_inner: usize,
    pub ppv: Option<f64>,
    pub psi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredibleReport {
    /// Kind picked by estimated prevalence.
    pub recommended: CredibleKind,
    /// Kind actually reported in `lower`/`upper`.
    pub kind: CredibleKind,
    pub lower: f64,
    pub upper: f64,
    /// The adjusted interval was recommended but could not be formed.
    pub fell_back: bool,
    pub unadjusted: CredibleInterval,
    pub adjusted: Option<CredibleInterval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: EstimatorKind,
    pub n_hat: f64,
    pub se: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
    pub interval: Option<IntervalKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub parameters: Option<MleParameters>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mi: Option<MiVarianceResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub credible: Option<CredibleReport>,
}

impl MethodReport {
    fn from_estimate(e: Estimate) -> Self {
        Self {
            method: e.method,
            n_hat: e.n_hat,
            se: e.se,
            ci_lower: e.ci_lower,
            ci_upper: e.ci_upper,
            interval: e.interval,
            psi: None,
            parameters: None,
            mi: None,
            credible: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub software: String,
    pub seed: u64,
    pub input: InputEcho,
    pub options: OptionsEcho,
    pub estimates: Vec<MethodReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_secs: Option<f64>,
}

fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn load_counts(args: &EstimateArgs) -> CliResult<InputEcho> {
    let (source, path, counts) = match (&args.counts, &args.records) {
        (Some(path), None) => {
            let text = read_text(path)?;
            let counts: CellCounts = serde_json::from_str(&text)
                .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
            ("counts", path, counts)
        }
        (None, Some(path)) => {
            let n_tot = args
                .n_tot
                .ok_or_else(|| CliError::Input("--records requires --n-tot".into()))?;
            let text = read_text(path)?;
            let first = text.lines().next().unwrap_or("");
            let records = if is_multistream_header(first) {
                collapse_streams(&read_multistream_records(text.as_bytes())?)?
            } else {
                read_records(text.as_bytes())?
            };
            ("records", path, tabulate_records(&records, n_tot)?)
        }
        _ => {
            return Err(CliError::Input(
                "supply exactly one of --records or --counts".into(),
            ))
        }
    };
    Ok(InputEcho {
        source: source.into(),
        path: path.display().to_string(),
        counts,
        crc_table: derive_crc_table(&counts),
    })
}

fn parse_methods(raw: &[String]) -> CliResult<Vec<EstimatorKind>> {
    let mut out = Vec::new();
    for m in raw {
        let kind = EstimatorKind::parse(m.trim())
            .ok_or_else(|| CliError::Input(format!("unknown method `{m}`")))?;
        if !out.contains(&kind) {
            out.push(kind);
        }
    }
    if out.is_empty() {
        return Err(CliError::Input("no methods selected".into()));
    }
    Ok(out)
}

fn resolve_seed(seed: u64) -> u64 {
    if seed != 0 {
        return seed;
    }
    loop {
        let s: u64 = rand::random();
        if s != 0 {
            return s;
        }
    }
}

fn credible_report(set: &anchor_crc::CredibleSet) -> CredibleReport {
    let selected = set.selected();
    CredibleReport {
        recommended: set.recommended,
        kind: selected.kind,
        lower: selected.lower,
        upper: selected.upper,
        fell_back: set.fell_back(),
        unadjusted: set.unadjusted,
        adjusted: set.adjusted,
    }
}

pub fn run_estimate(args: &EstimateArgs) -> CliResult<EstimateReport> {
    let start = Instant::now();
    let methods = parse_methods(&args.methods)?;
    if methods.contains(&EstimatorKind::Plugin) && args.ppv.is_none() {
        return Err(CliError::Input("the plugin method requires --ppv".into()));
    }
    if args.imputations < 2 {
        return Err(CliError::Input("--imputations must be at least 2".into()));
    }
    let input = load_counts(args)?;
    let counts = input.counts;
    let seed = resolve_seed(args.seed);
    let opts = AnalysisOptions {
        imputations: args.imputations,
        s_outer: args.draws.0,
        t_inner: args.draws.1,
        seed,
    };

    let mut estimates = Vec::new();
    for &kind in &methods {
        let report = match kind {
            EstimatorKind::Rs => MethodReport::from_estimate(estimate_rs_from_counts(&counts)?),
            EstimatorKind::Chapman => MethodReport::from_estimate(chapman_from_counts(&counts)?),
            EstimatorKind::AnchorExact => {
                let psi = match args.psi {
                    Some(p) => p,
                    None => mle_parameters(&counts)?.psi_star_hat,
                };
                let mut r =
                    MethodReport::from_estimate(estimate_anchor_exact(&input.crc_table, psi)?);
                r.psi = Some(psi);
                r
            }
            EstimatorKind::Plugin => {
                let ppv = args.ppv.expect("checked above");
                let psi = args.psi.unwrap_or_else(|| overall_sampling_rate(&counts));
                let (est, mi) = analyze_plugin(&input.crc_table, ppv, psi, &opts)?;
                let mut r = MethodReport::from_estimate(est);
                r.psi = Some(psi);
                r.mi = Some(mi);
                r
            }
            EstimatorKind::Mle => {
                let a = analyze_mle(&counts, &opts)?;
                let mut r = MethodReport::from_estimate(a.estimate);
                r.psi = Some(a.params.psi_star_hat);
                r.parameters = Some(a.params);
                r.mi = Some(a.mi);
                r.credible = Some(credible_report(&a.credible));
                r
            }
        };
        estimates.push(report);
    }
    Ok(EstimateReport {
        software: SOFTWARE.into(),
        seed,
        input,
        options: OptionsEcho {
            methods,
            imputations: args.imputations,
            s_outer: args.draws.0,
            t_inner: args.draws.1,
            ppv: args.ppv,
            psi: args.psi,
        },
        estimates,
        wall_time_secs: args.timing.then(|| start.elapsed().as_secs_f64()),
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per method; the input counts and seed are repeated on every row.
pub fn estimate_report_csv(report: &EstimateReport) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = [
        "method",
        "n_hat",
        "se",
        "ci_lower",
        "ci_upper",
        "interval",
        "credible_kind",
        "credible_lower",
        "credible_upper",
        "seed",
        "n1",
        "n2",
        "n3",
        "n4",
        "n5",
        "n6",
        "n_tot",
    ];
    let csv_err = |e: csv::Error| CliError::Internal(e.to_string());
    w.write_record(header).map_err(csv_err)?;
    let c = report.input.counts;
    for e in &report.estimates {
        let interval = match e.interval {
            Some(IntervalKind::Wald) => "wald",
            Some(IntervalKind::LogTransformFallback) => "log_transform_fallback",
            None => "",
        };
        let (kind, lo, hi) = match &e.credible {
            Some(cr) => (
                match cr.kind {
                    CredibleKind::Unadjusted => "unadjusted",
                    CredibleKind::Adjusted => "adjusted",
                },
                Some(cr.lower),
                Some(cr.upper),
            ),
            None => ("", None, None),
        };
        let mut row = vec![
            e.method.label().to_string(),
            e.n_hat.to_string(),
            opt(e.se),
            opt(e.ci_lower),
            opt(e.ci_upper),
            interval.to_string(),
            kind.to_string(),
            opt(lo),
            opt(hi),
            report.seed.to_string(),
        ];
        row.extend(c.cells().iter().map(|x| x.to_string()));
        row.push(c.n_tot.to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Internal(e.to_string()))
}

pub fn render_estimate(report: &EstimateReport, format: OutputFormat) -> CliResult<String> {
    match format {
        OutputFormat::Json => serde_json::to_string_pretty(report)
            .map(|s| s + "\n")
            .map_err(|e| CliError::Internal(e.to_string())),
        OutputFormat::Csv => estimate_report_csv(report),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingManifest {
    pub label: String,
    pub seed: u64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub software: String,
    pub config_path: String,
    /// SHA-256 of the config file bytes.
    pub config_sha256: String,
    pub seed_override: Option<u64>,
    pub replicates_override: Option<usize>,
    pub settings: Vec<SettingManifest>,
}

/// Output of a simulation run; also written to `summary.json`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOutcome {
    pub summary: StudySummary,
    pub manifest: Manifest,
    pub files: Vec<PathBuf>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn load_study(path: &Path) -> CliResult<(SimStudy, Vec<u8>)> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let doc: SimDocument = serde_json::from_slice(&bytes).map_err(|e| {
        CliError::Input(format!("{}: not a simulation config: {e}", path.display()))
    })?;
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("simulation");
    Ok((doc.into_study(name), bytes))
}

/// Applies command-line overrides; with `--seed`, setting `i` gets a seed
/// derived from the override and `i`.
pub fn apply_overrides(study: &mut SimStudy, replicates: Option<usize>, seed: Option<u64>) {
    for (i, s) in study.settings.iter_mut().enumerate() {
        if let Some(r) = replicates {
            s.config.replicates = r;
        }
        if let Some(seed) = seed {
            s.config.seed = derive_seed(seed, &[i as u64]);
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> CliResult<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    v.push(b'\n');
    Ok(v)
}

fn write_file(path: &Path, contents: &[u8]) -> CliResult<()> {
    fs::write(path, contents)
        .map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

pub fn run_simulate(args: &SimulateArgs) -> CliResult<SimulateOutcome> {
    let (mut study, bytes) = load_study(&args.config)?;
    apply_overrides(&mut study, args.replicates, args.seed);
    study.validate()?;

    let run = || -> CliResult<StudySummary> {
        let outcomes = run_study(&study)?;
        Ok(summarize_study(&study.name, &outcomes)?)
    };
    let summary = match args.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Internal(e.to_string()))?
            .install(run)?,
        None => run()?,
    };

    let manifest = Manifest {
        software: SOFTWARE.into(),
        config_path: args.config.display().to_string(),
        config_sha256: sha256_hex(&bytes),
        seed_override: args.seed,
        replicates_override: args.replicates,
        settings: study
            .settings
            .iter()
            .map(|s| SettingManifest {
                label: s.label.clone(),
                seed: s.config.seed,
                replicates: s.config.replicates,
            })
            .collect(),
    };

    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Input(format!("cannot create {}: {e}", args.out.display())))?;
    let mut csv = Vec::new();
    write_summary_csv(&mut csv, &summary)?;
    let files = vec![
        (args.out.join("summary.csv"), csv),
        (args.out.join("summary.json"), to_json(&summary)?),
        (args.out.join("manifest.json"), to_json(&manifest)?),
    ];
    for (path, contents) in &files {
        write_file(path, contents)?;
    }
    Ok(SimulateOutcome {
        summary,
        manifest,
        files: files.into_iter().map(|(p, _)| p).collect(),
    })
}
