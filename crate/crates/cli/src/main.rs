//! `bamcbr`: run scenarios, compare reports, inspect case bases.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use bamcbr_core::sim::{empty_bases, Mode, SimOutcome, Simulation};
use bamcbr_core::{
    BamModel, Case, CaseBase, CaseBaseKind, CaseStatus, ComparisonReport, Error, ScenarioConfig, SimulationReport,
};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

const POSITIVE_FILE: &str = "positive.jsonl";
const NEGATIVE_FILE: &str = "negative.jsonl";

#[derive(Parser)]
#[command(name = "bamcbr", version, about = "Bandwidth allocation model simulation with case-based reconfiguration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Human,
    Machine,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario, or every scenario in a batch manifest.
    Run {
        #[arg(long, required_unless_present = "batch")]
        config: Option<PathBuf>,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// `mam`, `rdm`, `atcs` for a static run, `cognitive` for the reasoning loop.
        #[arg(long)]
        mode: Option<String>,
        /// Report file. Machine format goes to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "human")]
        format: Format,
        /// Load case bases from here before a cognitive run and save them after.
        #[arg(long)]
        cases_dir: Option<PathBuf>,
        /// TOML manifest with one `[[run]]` table per scenario.
        #[arg(long, conflicts_with_all = ["config", "out", "cases_dir"])]
        batch: Option<PathBuf>,
    },
    /// Tabulate preemption, devolution, blocking and unbroken LSPs.
    Compare {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
        /// One row per repetition of each report instead of one per report.
        #[arg(long)]
        split_repetitions: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "human")]
        format: Format,
    },
    /// List the cases in a case-base file.
    Cases {
        base: PathBuf,
        #[arg(long)]
        status: Option<String>,
        #[arg(long)]
        model: Option<String>,
        #[arg(long, value_enum, default_value = "human")]
        format: Format,
    },
    /// Check a config file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

/// An error plus the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        let code = match error.downcast_ref::<Error>() {
            Some(Error::Validation(_) | Error::Toml(_) | Error::UnknownModel(_)) => 2,
            Some(Error::Comparability(_)) => 3,
            _ => 1,
        };
        Self { code, error }
    }
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        anyhow::Error::from(error).into()
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, mode, out, format, cases_dir, batch } => match batch {
            Some(manifest) => cmd_batch(&manifest, format),
            None => {
                let config = config.expect("clap requires --config without --batch");
                cmd_run(&config, seed, mode.as_deref(), out.as_deref(), format, cases_dir.as_deref())
            }
        },
        Command::Compare { reports, split_repetitions, out, format } => {
            cmd_compare(&reports, split_repetitions, out.as_deref(), format)
        }
        Command::Cases { base, status, model, format } => cmd_cases(&base, status.as_deref(), model.as_deref(), format),
        Command::Validate { config } => cmd_validate(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            match error.downcast_ref::<Error>() {
                Some(Error::Validation(problems)) => {
                    eprintln!("error: invalid configuration");
                    for p in problems {
                        eprintln!("  - {p}");
                    }
                }
                _ => eprintln!("error: {error:#}"),
            }
            ExitCode::from(code)
        }
    }
}

fn parse_mode(text: &str) -> CliResult<Mode> {
    if text.eq_ignore_ascii_case("cognitive") || text.eq_ignore_ascii_case("bamcbr") {
        return Ok(Mode::Cognitive { initial_model: BamModel::Mam });
    }
    let model: BamModel = text.parse()?;
    Ok(Mode::Static { model })
}

fn load_config(path: &Path, seed: Option<u64>, mode: Option<&str>) -> CliResult<ScenarioConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg: ScenarioConfig = toml::from_str(&text).map_err(Error::from)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(mode) = mode {
        let initial = match cfg.mode {
            Mode::Cognitive { initial_model } => initial_model,
            Mode::Static { .. } => BamModel::Mam,
        };
        cfg.mode = match parse_mode(mode)? {
            Mode::Cognitive { .. } => Mode::Cognitive { initial_model: initial },
            m => m,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_bases(dir: &Path) -> CliResult<(CaseBase, CaseBase)> {
    let load = |name: &str, kind| -> CliResult<CaseBase> {
        let path = dir.join(name);
        if path.exists() {
            Ok(CaseBase::load(&path, kind).with_context(|| format!("loading {}", path.display()))?)
        } else {
            Ok(CaseBase::new(kind))
        }
    };
    Ok((load(POSITIVE_FILE, CaseBaseKind::Positive)?, load(NEGATIVE_FILE, CaseBaseKind::Negative)?))
}

fn execute(cfg: ScenarioConfig, cases_dir: Option<&Path>) -> CliResult<SimulationReport> {
    let bases = match cases_dir {
        Some(dir) if cfg.mode.is_cognitive() => Some(load_bases(dir)?),
        _ => None,
    };
    let (positive, negative) = bases.unwrap_or_else(empty_bases);
    let SimOutcome { report, bases } = Simulation::new(cfg)?.with_case_bases(positive, negative).run()?;
    if let (Some(dir), Some((positive, negative))) = (cases_dir, bases) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        positive.save(dir.join(POSITIVE_FILE))?;
        negative.save(dir.join(NEGATIVE_FILE))?;
    }
    Ok(report)
}

fn write_output(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

fn summarize(report: &SimulationReport) -> String {
    let t = report.totals();
    let mut s = format!(
        "{} seed {}: arrivals {} established {} preemption {} devolution {} blocking {} unbroken {} active at end {}\n",
        report.label,
        report.seed,
        t.arrivals,
        t.established,
        t.preemption,
        t.devolution,
        t.blocking,
        t.unbroken,
        report.active_at_end
    );
    if report.mode.is_cognitive() {
        s += &format!(
            "  model changes {}  cases +{} -{}  triggers reactive {} proactive {} (suppressed {})\n",
            report.timeline.len().saturating_sub(1),
            report.cases.positive,
            report.cases.negative,
            report.triggers.reactive_fired,
            report.triggers.proactive_fired,
            report.triggers.reactive_suppressed + report.triggers.proactive_suppressed
        );
        for r in &report.repetitions {
            let plan: Vec<String> = r.timeline.iter().map(|e| format!("{}@{}s", e.model.as_str(), e.offset)).collect();
            s += &format!("  repetition {}: retained {}  {}\n", r.index + 1, r.retained, plan.join(" "));
        }
    }
    s
}

fn cmd_run(
    config: &Path,
    seed: Option<u64>,
    mode: Option<&str>,
    out: Option<&Path>,
    format: Format,
    cases_dir: Option<&Path>,
) -> CliResult {
    let cfg = load_config(config, seed, mode)?;
    let report = execute(cfg, cases_dir)?;
    let json = report.to_json() + "\n";
    match (out, format) {
        (Some(path), Format::Human) => {
            write_output(Some(path), &json)?;
            print!("{}", summarize(&report));
        }
        (out, Format::Machine) => write_output(out, &json)?,
        (None, Format::Human) => print!("{}", summarize(&report)),
    }
    Ok(())
}

#[derive(Deserialize)]
struct Manifest {
    run: Vec<BatchEntry>,
}

#[derive(Deserialize)]
struct BatchEntry {
    config: PathBuf,
    out: PathBuf,
    seed: Option<u64>,
    mode: Option<String>,
}

/// Runs every manifest entry on its own thread. Paths are relative to the
/// manifest.
fn cmd_batch(manifest: &Path, format: Format) -> CliResult {
    let text = fs::read_to_string(manifest).with_context(|| format!("reading {}", manifest.display()))?;
    let manifest_dir = manifest.parent().unwrap_or(Path::new("."));
    let entries: Manifest = toml::from_str(&text).map_err(Error::from)?;
    let configs = entries
        .run
        .iter()
        .map(|e| load_config(&manifest_dir.join(&e.config), e.seed, e.mode.as_deref()))
        .collect::<CliResult<Vec<_>>>()?;
    let results: Vec<CliResult<SimulationReport>> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs.into_iter().map(|cfg| scope.spawn(move || execute(cfg, None))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(anyhow!("scenario thread panicked").into())))
            .collect()
    });
    for (entry, result) in entries.run.iter().zip(results) {
        let report = result?;
        write_output(Some(&manifest_dir.join(&entry.out)), &(report.to_json() + "\n"))?;
        if format == Format::Human {
            print!("{}", summarize(&report));
        }
    }
    Ok(())
}

fn cmd_compare(paths: &[PathBuf], split: bool, out: Option<&Path>, format: Format) -> CliResult {
    let reports = paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            SimulationReport::from_json(&text).with_context(|| format!("parsing {}", p.display()))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let comparison = if split {
        let mut parts = reports.iter().map(ComparisonReport::split_repetitions);
        let mut merged = parts.next().ok_or_else(|| Error::Comparability("no reports given".into()))??;
        for part in parts {
            let part = part?;
            if part.schedule_hash != merged.schedule_hash {
                return Err(Error::Comparability("reports ran different schedules".into()).into());
            }
            merged.config_hashes.extend(part.config_hashes);
            merged.rows.extend(part.rows);
        }
        merged
    } else {
        ComparisonReport::compare(&reports)?
    };
    let text = match format {
        Format::Human => comparison.render_human(),
        Format::Machine => comparison.to_json() + "\n",
    };
    write_output(out, &text)
}

fn parse_status(text: &str) -> CliResult<CaseStatus> {
    match text.to_ascii_lowercase().as_str() {
        "positive" => Ok(CaseStatus::Positive),
        "negative" => Ok(CaseStatus::Negative),
        "pending" => Ok(CaseStatus::Pending),
        other => Err(anyhow!("unknown status `{other}` (expected positive, negative or pending)").into()),
    }
}

fn render_case(case: &Case) -> String {
    let attrs = case
        .problem
        .contextual
        .iter()
        .chain(&case.problem.measurements)
        .map(|(k, v)| match (v.as_f64(), v.as_str()) {
            (Some(x), _) => format!("{k}={x}"),
            (_, Some(s)) => format!("{k}={s}"),
            _ => format!("{k}=?"),
        })
        .collect::<Vec<_>>()
        .join(" ");
    format!(
        "{:?} t={} resolved={} solution={} symptom={} {}",
        case.status,
        case.created_at,
        case.resolved_at.map(|t| t.to_string()).unwrap_or_else(|| "-".into()),
        case.solution.target_model,
        case.problem.symptom.as_deref().unwrap_or("-"),
        attrs
    )
}

fn cmd_cases(base: &Path, status: Option<&str>, model: Option<&str>, format: Format) -> CliResult {
    let status = status.map(parse_status).transpose()?;
    let model = model.map(str::parse::<BamModel>).transpose()?;
    // Records keep their own status; the kind is only a label here.
    let (cases, skipped) = CaseBase::load_lenient(base, CaseBaseKind::Positive)?;
    for e in &skipped {
        eprintln!("warning: skipped {e}");
    }
    for case in cases
        .cases()
        .iter()
        .filter(|c| status.is_none_or(|s| c.status == s))
        .filter(|c| model.is_none_or(|m| c.solution.target_model == m))
    {
        match format {
            Format::Human => println!("{}", render_case(case)),
            Format::Machine => println!("{}", serde_json::to_string(case).map_err(Error::from)?),
        }
    }
    if skipped.is_empty() {
        Ok(())
    } else {
        Err(anyhow!("{} corrupt record(s) skipped", skipped.len()).into())
    }
}

fn cmd_validate(config: &Path) -> CliResult {
    let cfg = load_config(config, None, None)?;
    println!(
        "{}: ok ({}, {} classes, {} patterns x {} repetitions)",
        config.display(),
        cfg.mode.label(),
        cfg.classes.len(),
        cfg.schedule.patterns.len(),
        cfg.schedule.repetitions
    );
    Ok(())
}
