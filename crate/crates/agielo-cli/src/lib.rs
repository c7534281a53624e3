//! Command-line front end for the rating engine.
//!
//! Four subcommands cover the workflow: `rate` ingests a score matrix CSV
//! and writes the run JSON, `analyze` turns a run into gap/reliability
//! reports plus plot-ready CSVs, `simulate` generates synthetic populations
//! (optionally recovering them through the engine), and `predict` evaluates
//! one agent-vs-case expectation.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric
//! error. Failures print a single machine-parsable JSON line to stderr.
//! `AGIELO_LOG` controls diagnostic verbosity.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::sync::Once;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use agielo::analysis::{
    consistency_report_with_checkpoints, gap_report_for_players, percentile_curve, predict_metric,
    rating_histogram, write_histogram_csv, AnalysisReport, DEFAULT_BIN_WIDTH,
};
use agielo::engine::{
    default_checkpoints, run_ratings, Category, RunConfig, RunDocument, ScoreMatrix,
};
use agielo::rating::{elo_expected_score, RatingConstants, Variant};
use agielo::scoring::ScoringFunction;
use agielo::synthetic::{
    generate_matrix, recovery_report, sample_population, OutcomeMode, PopulationSpec,
};
use agielo::{Error, Result};

#[derive(Parser)]
#[command(
    name = "agielo",
    version,
    about = "Joint difficulty/competency ratings for benchmark result matrices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rate a score matrix CSV and write the run JSON
    Rate(RateArgs),
    /// Produce gap and reliability reports from a finished run
    Analyze(AnalyzeArgs),
    /// Generate a synthetic population, optionally recovering it
    Simulate(SimulateArgs),
    /// Predict an agent's expected metric on a case
    Predict(PredictArgs),
}

#[derive(Args)]
struct RateArgs {
    /// Score matrix CSV (`case_id,<agent>,...` header)
    input: PathBuf,
    /// Key-value config file: seed, passes, variant, scoring, checkpoints
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output run JSON path
    #[arg(long, default_value = "run.json")]
    out: PathBuf,
    /// Shuffle seed (overrides the config file)
    #[arg(long)]
    seed: Option<u64>,
    /// Times each present cell is scheduled
    #[arg(long)]
    passes: Option<u32>,
    /// Update variant: standard | paper-literal
    #[arg(long)]
    variant: Option<String>,
    /// Scoring function registry id
    #[arg(long)]
    scoring: Option<String>,
    /// Comma-separated snapshot percentages in (0, 100]
    #[arg(long)]
    checkpoints: Option<String>,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Run JSON produced by `rate` or `simulate --recover`
    run: PathBuf,
    /// Confidence thresholds for the oracle gaps
    #[arg(long, default_value = "0.5,0.9,0.99")]
    thresholds: String,
    /// Source matrix CSV for the reliability report
    /// (defaults to the path recorded in the run metadata)
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Rating-bin width for binned prediction errors
    #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
    bin_width: f64,
    /// Directory receiving report.json, percentile.csv and histogram.csv
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Number of synthetic agents
    #[arg(long)]
    agents: usize,
    /// Number of synthetic test cases
    #[arg(long)]
    cases: usize,
    /// Outcome mode: binary | continuous
    #[arg(long, default_value = "binary")]
    mode: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Mean of the generating rating prior
    #[arg(long)]
    prior_mu: Option<f64>,
    /// Deviation of the generating rating prior
    #[arg(long)]
    prior_sigma: Option<f64>,
    /// Directory receiving matrix.csv and truth.json
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Also run the engine and write run.json plus recovery.json
    #[arg(long)]
    recover: bool,
    /// Update variant for the recovery run
    #[arg(long)]
    variant: Option<String>,
    /// Passes for the recovery run
    #[arg(long)]
    passes: Option<u32>,
    /// Checkpoints for the recovery run
    #[arg(long)]
    checkpoints: Option<String>,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("case_ref").required(true).multiple(false)))]
struct PredictArgs {
    /// Run JSON holding the ratings
    run: PathBuf,
    /// Agent id from the run
    #[arg(long)]
    agent: String,
    /// Case id from the run
    #[arg(long, group = "case_ref")]
    case: Option<String>,
    /// Literal case rating instead of an id
    #[arg(long, group = "case_ref")]
    case_rating: Option<f64>,
}

/// Parses and executes one invocation, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            report_error("usage", &e.render().to_string());
            return 1;
        }
    };
    let result = match cli.command {
        Command::Rate(args) => cmd_rate(args),
        Command::Analyze(args) => cmd_analyze(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Predict(args) => cmd_predict(args),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let (kind, code) = classify(&e);
            report_error(kind, &e.to_string());
            code
        }
    }
}

fn init_logging() {
    static INIT: Once = Once::new();
    INIT.call_once(|| {
        let _ =
            env_logger::Builder::from_env(env_logger::Env::new().filter_or("AGIELO_LOG", "warn"))
                .try_init();
    });
}

fn classify(e: &Error) -> (&'static str, i32) {
    match e {
        Error::Argument(_) => ("usage", 1),
        Error::Format(_) | Error::Io(_) => ("data", 2),
        Error::Domain(_) => ("domain", 3),
    }
}

fn report_error(kind: &str, message: &str) {
    let line = serde_json::json!({"error": {"kind": kind, "message": message}});
    eprintln!("{line}");
}

/// Run settings assembled from the config file and flag overrides.
struct RunSettings {
    seed: u64,
    passes: u32,
    variant: Variant,
    scoring: String,
    checkpoints: Vec<f64>,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            seed: 0,
            passes: 1,
            variant: Variant::Standard,
            scoring: "identity".to_string(),
            checkpoints: default_checkpoints(),
        }
    }
}

impl RunSettings {
    fn load(config: Option<&Path>) -> Result<Self> {
        let mut settings = RunSettings::default();
        if let Some(path) = config {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::format(format!("cannot read config '{}': {e}", path.display()))
            })?;
            for (line_no, raw_line) in text.lines().enumerate() {
                let line = raw_line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    Error::argument(format!(
                        "config line {} is not 'key = value': '{line}'",
                        line_no + 1
                    ))
                })?;
                settings.set(key.trim(), value.trim())?;
            }
        }
        Ok(settings)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse_flag(value, "seed")?,
            "passes" => self.passes = parse_flag(value, "passes")?,
            "variant" => self.variant = value.parse()?,
            "scoring" => self.scoring = value.to_string(),
            "checkpoints" => self.checkpoints = parse_checkpoints(value)?,
            other => return Err(Error::argument(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    fn run_config(&self) -> RunConfig {
        RunConfig {
            seed: self.seed,
            passes: self.passes,
            checkpoints: self.checkpoints.clone(),
            constants: RatingConstants::with_variant(self.variant),
        }
    }
}

fn parse_flag<T: std::str::FromStr>(value: &str, what: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::argument(format!("bad {what} value '{value}'")))
}

fn parse_checkpoints(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|part| parse_flag(part.trim(), "checkpoint"))
        .collect()
}

fn parse_thresholds(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|part| parse_flag(part.trim(), "threshold"))
        .collect()
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)
        .map_err(|e| Error::format(format!("cannot write '{}': {e}", path.display())))
}

fn cmd_rate(args: RateArgs) -> Result<()> {
    let mut settings = RunSettings::load(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        settings.seed = seed;
    }
    if let Some(passes) = args.passes {
        settings.passes = passes;
    }
    if let Some(variant) = &args.variant {
        settings.variant = variant.parse()?;
    }
    if let Some(scoring) = &args.scoring {
        settings.scoring = scoring.clone();
    }
    if let Some(checkpoints) = &args.checkpoints {
        settings.checkpoints = parse_checkpoints(checkpoints)?;
    }
    // fail fast on an unknown scoring id
    ScoringFunction::from_id(&settings.scoring)?;

    let matrix = ScoreMatrix::from_csv_path(&args.input)?.with_scoring_fn(settings.scoring.clone());
    let config = settings.run_config();
    let outcome = run_ratings(&matrix, &config)?;
    let document = RunDocument::new(
        &matrix,
        &config,
        &outcome,
        Some(args.input.display().to_string()),
    );
    write_file(&args.out, &document.to_json_string()?)?;

    println!(
        "agents={} cases={} matches={} seed={}",
        matrix.n_agents(),
        matrix.n_cases(),
        matrix.n_matches() * config.passes as usize,
        config.seed
    );
    Ok(())
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<()> {
    let document = RunDocument::from_json_path(&args.run)?;
    let players = document.players();
    let scoring = ScoringFunction::from_id(&document.metadata.scoring_fn)?;
    let thresholds = parse_thresholds(&args.thresholds)?;

    let gap = gap_report_for_players(&players, &thresholds, &scoring)?;

    let reliability = match resolve_matrix(&args, &document)? {
        Some(matrix) => {
            let config = RunConfig {
                seed: document.metadata.seed,
                passes: document.metadata.passes,
                checkpoints: document.metadata.checkpoints.clone(),
                constants: RatingConstants::with_variant(document.metadata.variant),
            };
            let outcome = document.outcome();
            Some(consistency_report_with_checkpoints(
                &matrix,
                &config,
                &outcome,
                &scoring,
                args.bin_width,
            )?)
        }
        None => {
            log::warn!("no source matrix available; skipping the reliability report");
            None
        }
    };

    std::fs::create_dir_all(&args.out_dir)?;
    let report = AnalysisReport { gap, reliability };
    write_file(&args.out_dir.join("report.json"), &report.to_json_string()?)?;

    let case_ratings: Vec<f64> = players
        .iter()
        .filter(|p| p.category == Category::TestCase)
        .map(|p| p.rating.mu)
        .collect();
    let curve = percentile_curve(&case_ratings)?;
    let mut percentile_csv = Vec::new();
    curve.write_csv(&mut percentile_csv)?;
    write_file(
        &args.out_dir.join("percentile.csv"),
        std::str::from_utf8(&percentile_csv).expect("csv output is utf-8"),
    )?;

    let bins = rating_histogram(&players, args.bin_width)?;
    let mut histogram_csv = Vec::new();
    write_histogram_csv(&bins, &mut histogram_csv)?;
    write_file(
        &args.out_dir.join("histogram.csv"),
        std::str::from_utf8(&histogram_csv).expect("csv output is utf-8"),
    )?;

    println!(
        "players={} thresholds={} reliability={}",
        players.len(),
        thresholds.len(),
        if report.reliability.is_some() {
            "yes"
        } else {
            "no"
        }
    );
    Ok(())
}

fn resolve_matrix(args: &AnalyzeArgs, document: &RunDocument) -> Result<Option<ScoreMatrix>> {
    let path = match (&args.matrix, &document.metadata.input) {
        (Some(explicit), _) => explicit.clone(),
        (None, Some(recorded)) => {
            let recorded = PathBuf::from(recorded);
            if !recorded.exists() {
                log::warn!(
                    "matrix recorded in the run metadata is gone: {}",
                    recorded.display()
                );
                return Ok(None);
            }
            recorded
        }
        (None, None) => return Ok(None),
    };
    let matrix =
        ScoreMatrix::from_csv_path(&path)?.with_scoring_fn(document.metadata.scoring_fn.clone());
    Ok(Some(matrix))
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let mode: OutcomeMode = args.mode.parse()?;
    let mut spec = PopulationSpec::new(args.agents, args.cases, mode, args.seed);
    if let Some(mu) = args.prior_mu {
        spec.prior_mu = mu;
    }
    if let Some(sigma) = args.prior_sigma {
        spec.prior_sigma = sigma;
    }
    let population = sample_population(&spec)?;
    let matrix = generate_matrix(&population, mode, args.seed)?;

    std::fs::create_dir_all(&args.out_dir)?;
    let matrix_path = args.out_dir.join("matrix.csv");
    matrix.to_csv_path(&matrix_path)?;
    write_file(
        &args.out_dir.join("truth.json"),
        &population.to_json_string()?,
    )?;
    println!(
        "agents={} cases={} matches={} seed={} mode={}",
        matrix.n_agents(),
        matrix.n_cases(),
        matrix.n_matches(),
        args.seed,
        mode
    );

    if args.recover {
        let mut settings = RunSettings {
            seed: args.seed,
            ..RunSettings::default()
        };
        if let Some(variant) = &args.variant {
            settings.variant = variant.parse()?;
        }
        if let Some(passes) = args.passes {
            settings.passes = passes;
        }
        if let Some(checkpoints) = &args.checkpoints {
            settings.checkpoints = parse_checkpoints(checkpoints)?;
        }
        let config = settings.run_config();
        // reload through the CSV so recovery exercises the ingestion path
        let loaded = ScoreMatrix::from_csv_path(&matrix_path)?;
        let outcome = run_ratings(&loaded, &config)?;
        let document = RunDocument::new(
            &loaded,
            &config,
            &outcome,
            Some(matrix_path.display().to_string()),
        );
        write_file(&args.out_dir.join("run.json"), &document.to_json_string()?)?;

        let recovery = recovery_report(&population, &outcome.players)?;
        let mut recovery_json = serde_json::to_string_pretty(&recovery)
            .map_err(|e| Error::format(format!("serializing recovery report: {e}")))?;
        recovery_json.push('\n');
        write_file(&args.out_dir.join("recovery.json"), &recovery_json)?;
        println!(
            "rho_agents={:.6} rho_cases={:.6} mean_abs_mu_error={:.6}",
            recovery.rho_agents, recovery.rho_cases, recovery.mean_abs_mu_error
        );
    }
    Ok(())
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let document = RunDocument::from_json_path(&args.run)?;
    let players = document.players();
    let scoring = ScoringFunction::from_id(&document.metadata.scoring_fn)?;

    let find = |id: &str, category: Category| -> Result<f64> {
        players
            .iter()
            .find(|p| p.id == id && p.category == category)
            .map(|p| p.rating.mu)
            .ok_or_else(|| Error::format(format!("unknown {category} id '{id}' in run")))
    };
    let r_a = find(&args.agent, Category::Agent)?;
    let r_t = match (&args.case, args.case_rating) {
        (Some(case_id), None) => find(case_id, Category::TestCase)?,
        (None, Some(rating)) => rating,
        // clap's group guarantees exactly one is present
        _ => unreachable!("case reference group"),
    };

    let expected = elo_expected_score(r_a, r_t)?;
    let metric = predict_metric(r_a, r_t, &scoring)?;
    println!("predicted_metric={metric:.6} expected_score={expected:.6}");
    Ok(())
}
