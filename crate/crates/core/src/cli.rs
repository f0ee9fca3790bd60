//! Command-line front end.
//!
//! Exit codes: 0 success, 1 failed verification, 2 usage or input errors.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::booster::{train, Algorithm, BoostConfig, RestartOption, TrainResult, TrainTrace, DEFAULT_GAMMA};
use crate::dataset::{parse_csv, parse_libsvm, train_test_split, Dataset, LabelColumn, SplitSpec};
use crate::diagnostics::detect_divergence;
use crate::error::{BoostError, Result};
use crate::learners::TreeConfig;
use crate::loss::{Loss, LossKind};
use crate::par::{init_threads, Exec};
use crate::verify::{run_suite, Suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

pub const THREADS_ENV: &str = "AGBOOST_THREADS";

const HOUSING: &str = include_str!("../../../data/housing");

#[derive(Debug, Parser)]
#[command(name = "agboost", version, about = "Accelerated gradient boosting experiments")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one model and write model.json, trace.csv and manifest.json.
    Train(TrainArgs),
    /// Run several algorithm settings on the same split; long-form CSV.
    Compare(CompareArgs),
    /// Vanilla momentum boosting against AGBM at several gamma values.
    DivergeDemo(DivergeArgs),
    /// Run a fixed-seed verification suite.
    Verify {
        /// bound, restart, slope or invariants
        suite: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum LossArg {
    Ls,
    Logistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum RestartArg {
    Fixed,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum FormatArg {
    Libsvm,
    Csv,
}

#[derive(Debug, Clone, Args, Serialize)]
struct DataArgs {
    /// Training data; `-` reads standard input.
    #[arg(long = "train")]
    train: PathBuf,
    #[arg(long = "test")]
    test: Option<PathBuf>,
    /// Hold out part of --train as the test set, e.g. 0.8.
    #[arg(long = "split", conflicts_with = "test")]
    split: Option<f64>,
    /// Input format; inferred from the extension when absent.
    #[arg(long = "format", value_enum)]
    format: Option<FormatArg>,
    /// CSV label column, by name or zero-based index.
    #[arg(long = "label-column", default_value = "y")]
    label_column: String,
    #[arg(long = "seed", default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Clone, Args, Serialize)]
struct ModelArgs {
    #[arg(long = "loss", value_enum)]
    loss: LossArg,
    #[arg(long = "eta")]
    eta: f64,
    /// Total trees; accelerated runs use two per iteration.
    #[arg(long = "trees")]
    trees: usize,
    #[arg(long = "depth", default_value_t = 3)]
    depth: usize,
    #[arg(long = "min-split-gain", default_value_t = 0.0)]
    min_split_gain: f64,
    #[arg(long = "l2", default_value_t = 0.0)]
    l2: f64,
    #[arg(long = "quantiles", default_value_t = 100)]
    quantiles: usize,
    #[arg(long = "early-stop-rounds")]
    early_stop_rounds: Option<usize>,
    /// Fill wall_time_ms in traces (makes them run-dependent).
    #[arg(long = "record-time")]
    record_time: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
struct TrainArgs {
    #[arg(long = "algorithm")]
    algorithm: Algorithm,
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long = "gamma")]
    gamma: Option<f64>,
    #[arg(long = "line-search")]
    line_search: bool,
    #[arg(long = "restart", value_enum)]
    restart: Option<RestartArg>,
    #[arg(long = "mu")]
    mu: Option<f64>,
    #[arg(long = "out")]
    out: PathBuf,
}

#[derive(Debug, Clone, Args)]
struct CompareArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// `algorithm[:gamma][@path]`, repeatable.
    #[arg(long = "setting", required = true)]
    settings: Vec<String>,
    #[arg(long = "line-search")]
    line_search: bool,
    /// CSV destination; standard output when absent.
    #[arg(long = "out")]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct DivergeArgs {
    /// LIBSVM file; the bundled housing data when absent.
    #[arg(long = "data")]
    data: Option<PathBuf>,
    #[arg(long = "eta", default_value_t = 1.0)]
    eta: f64,
    #[arg(long = "trees", default_value_t = 100)]
    trees: usize,
    #[arg(long = "depth", default_value_t = 3)]
    depth: usize,
    #[arg(long = "gammas", value_delimiter = ',', default_values_t = [0.05, 0.1, 0.3])]
    gammas: Vec<f64>,
    #[arg(long = "out")]
    out: Option<PathBuf>,
}

/// Parses `args` (program name first) and runs the command, writing
/// human-readable output to `out` and diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    configure_threads(err);
    let command_line: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let result = match cli.command {
        Command::Train(a) => cmd_train(&a, &command_line, out),
        Command::Compare(a) => cmd_compare(&a, out),
        Command::DivergeDemo(a) => cmd_diverge_demo(&a, out),
        Command::Verify { suite } => cmd_verify(&suite, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

fn configure_threads(err: &mut dyn Write) {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return;
    };
    match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            init_threads(n);
        }
        _ => {
            let _ = writeln!(err, "warning: ignoring {THREADS_ENV}={v}");
        }
    }
}

fn infer_format(path: &Path, format: Option<FormatArg>) -> FormatArg {
    format.unwrap_or_else(|| match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("csv") => FormatArg::Csv,
        _ => FormatArg::Libsvm,
    })
}

fn open(path: &Path) -> Result<Box<dyn Read>> {
    if path == Path::new("-") {
        return Ok(Box::new(io::stdin()));
    }
    File::open(path)
        .map(|f| Box::new(f) as Box<dyn Read>)
        .map_err(|e| BoostError::input(format!("{}: {e}", path.display())))
}

fn load(path: &Path, data: &DataArgs, loss: LossKind) -> Result<Dataset> {
    let reader = open(path)?;
    let ds = match infer_format(path, data.format) {
        FormatArg::Libsvm => parse_libsvm(BufReader::new(reader)),
        FormatArg::Csv => {
            let col = match data.label_column.parse::<usize>() {
                Ok(i) => LabelColumn::Index(i),
                Err(_) => LabelColumn::Name(data.label_column.clone()),
            };
            parse_csv(reader, &col)
        }
    }
    .map_err(|e| BoostError::input(format!("{}: {e}", path.display())))?;
    match loss {
        LossKind::Logistic => ds.to_signed_labels(),
        LossKind::LeastSquares => Ok(ds),
    }
}

struct Split {
    train: Dataset,
    test: Option<Dataset>,
}

fn load_split(data: &DataArgs, loss: LossKind) -> Result<Split> {
    let full = load(&data.train, data, loss)?;
    if let Some(p) = &data.test {
        return Ok(Split {
            train: full,
            test: Some(load(p, data, loss)?),
        });
    }
    match data.split {
        Some(train_fraction) => {
            let (train, test) = train_test_split(
                &full,
                SplitSpec {
                    train_fraction,
                    seed: data.seed,
                },
            )?;
            Ok(Split {
                train,
                test: Some(test),
            })
        }
        None => Ok(Split {
            train: full,
            test: None,
        }),
    }
}

fn loss_of(arg: LossArg) -> Loss {
    match arg {
        LossArg::Ls => Loss::least_squares(),
        LossArg::Logistic => Loss::logistic(),
    }
}

fn base_config(algorithm: Algorithm, model: &ModelArgs) -> Result<BoostConfig> {
    if model.trees == 0 {
        return Err(BoostError::config("--trees must be at least 1"));
    }
    let per = algorithm.trees_per_iteration();
    let iterations = model.trees / per;
    if iterations == 0 {
        return Err(BoostError::config(format!(
            "{} adds {per} trees per iteration; --trees {} is too few",
            algorithm.name(),
            model.trees
        )));
    }
    let mut config = BoostConfig::new(algorithm, model.eta, iterations).with_tree(TreeConfig {
        depth_limit: model.depth,
        min_split_gain: model.min_split_gain,
        l2_leaf: model.l2,
        quantiles: model.quantiles,
    });
    config.early_stop_rounds = model.early_stop_rounds;
    config.record_time = model.record_time;
    config.exec = Exec::Parallel;
    Ok(config)
}

#[derive(Debug, Serialize)]
struct DatasetFingerprint {
    path: String,
    rows: usize,
    cols: usize,
    sha256: String,
}

impl DatasetFingerprint {
    fn of(path: &str, data: &Dataset) -> Self {
        DatasetFingerprint {
            path: path.to_string(),
            rows: data.n_rows(),
            cols: data.n_features(),
            sha256: data.fingerprint(),
        }
    }
}

#[derive(Debug, Serialize)]
struct Outputs {
    model: String,
    trace: String,
    manifest: String,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    command_line: &'a [String],
    config: &'a BoostConfig,
    loss: Loss,
    train: DatasetFingerprint,
    test: Option<DatasetFingerprint>,
    seed: u64,
    outputs: Outputs,
    version: &'static str,
    iterations_run: usize,
    diverged: bool,
    early_stopped: bool,
}

fn cmd_train(a: &TrainArgs, command_line: &[String], out: &mut dyn Write) -> Result<i32> {
    let loss = loss_of(a.model.loss);
    let mut config = base_config(a.algorithm, &a.model)?;
    if let Some(g) = a.gamma {
        config.gamma = g;
    }
    config.line_search = a.line_search;
    if let Some(r) = a.restart {
        let option = match r {
            RestartArg::Fixed => RestartOption::FixedPeriod,
            RestartArg::Adaptive => RestartOption::Adaptive,
        };
        config = config.with_restart(option, a.mu);
    } else if a.mu.is_some() {
        config.mu = a.mu;
    }
    config.validate()?;

    let split = load_split(&a.data, loss.kind())?;
    let result = train(&split.train, &loss, &config, split.test.as_ref())?;

    fs::create_dir_all(&a.out)?;
    let model_path = a.out.join("model.json");
    let trace_path = a.out.join("trace.csv");
    let manifest_path = a.out.join("manifest.json");
    result.model.save(&model_path)?;
    result.trace.write_csv(io::BufWriter::new(File::create(&trace_path)?))?;

    let train_label = a.data.train.display().to_string();
    let test_fp = split.test.as_ref().map(|t| {
        let label = match &a.data.test {
            Some(p) => p.display().to_string(),
            None => format!("{train_label} (held out)"),
        };
        DatasetFingerprint::of(&label, t)
    });
    let manifest = RunManifest {
        command_line,
        config: &config,
        loss,
        train: DatasetFingerprint::of(&train_label, &split.train),
        test: test_fp,
        seed: a.data.seed,
        outputs: Outputs {
            model: model_path.display().to_string(),
            trace: trace_path.display().to_string(),
            manifest: manifest_path.display().to_string(),
        },
        version: env!("CARGO_PKG_VERSION"),
        iterations_run: result.trace.len(),
        diverged: result.trace.diverged,
        early_stopped: result.trace.early_stopped,
    };
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)?;

    writeln!(
        out,
        "{}: {} iterations, train loss {:.6}{}{}",
        config.algorithm.name(),
        result.trace.len(),
        result.trace.final_train_loss(),
        result
            .trace
            .records
            .last()
            .and_then(|r| r.test_loss)
            .map(|t| format!(", test loss {t:.6}"))
            .unwrap_or_default(),
        if result.trace.diverged { " (diverged)" } else { "" }
    )?;
    writeln!(out, "wrote {}", a.out.display())?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, PartialEq)]
struct Setting {
    algorithm: Algorithm,
    gamma: Option<f64>,
    path: Option<PathBuf>,
}

fn parse_setting(s: &str) -> Result<Setting> {
    let (head, path) = match s.split_once('@') {
        Some((h, p)) => (h, Some(PathBuf::from(p))),
        None => (s, None),
    };
    let (alg, gamma) = match head.split_once(':') {
        Some((a, g)) => (
            a,
            Some(g.parse::<f64>().map_err(|_| BoostError::config(format!("bad gamma in setting '{s}'")))?),
        ),
        None => (head, None),
    };
    Ok(Setting {
        algorithm: alg.parse()?,
        gamma,
        path,
    })
}

fn setting_label(s: &Setting) -> String {
    match s.gamma {
        Some(g) => format!("{}:{g}", s.algorithm.name()),
        None => s.algorithm.name().to_string(),
    }
}

const COMPARE_HEADER: &str = "setting,algorithm,gamma,iteration,trees,train_loss,test_loss";

fn write_long_form(out: &mut dyn Write, label: &str, gamma: Option<f64>, trace: &TrainTrace) -> io::Result<()> {
    let gamma = gamma.map(|g| g.to_string()).unwrap_or_default();
    let alg = trace.algorithm.name();
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    writeln!(
        out,
        "{label},{alg},{gamma},,0,{},{}",
        trace.initial_train_loss,
        opt(trace.initial_test_loss)
    )?;
    for r in &trace.records {
        writeln!(
            out,
            "{label},{alg},{gamma},{},{},{},{}",
            r.iteration,
            r.trees,
            r.train_loss,
            opt(r.test_loss)
        )?;
    }
    Ok(())
}

fn run_settings(
    settings: &[Setting],
    split: &Split,
    loss: &Loss,
    model: &ModelArgs,
    line_search: bool,
) -> Result<Vec<TrainResult>> {
    let configs = settings
        .iter()
        .map(|s| {
            let mut c = base_config(s.algorithm, model)?;
            if let Some(g) = s.gamma {
                c.gamma = g;
            }
            c.line_search = line_search && s.algorithm == Algorithm::Gbm;
            // Settings already run side by side.
            c.exec = Exec::Sequential;
            c.validate()?;
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    Exec::Parallel
        .map(configs.len(), |i| train(&split.train, loss, &configs[i], split.test.as_ref()))
        .into_iter()
        .collect()
}

fn write_to(path: Option<&Path>, out: &mut dyn Write, body: &[u8]) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, body)?;
        }
        None => out.write_all(body)?,
    }
    Ok(())
}

fn cmd_compare(a: &CompareArgs, out: &mut dyn Write) -> Result<i32> {
    let settings = a
        .settings
        .iter()
        .map(|s| parse_setting(s))
        .collect::<Result<Vec<_>>>()?;
    for s in &settings {
        if let Some(p) = &s.path {
            if p != &a.data.train {
                return Err(BoostError::config(format!(
                    "setting {} names {} but --train is {}",
                    setting_label(s),
                    p.display(),
                    a.data.train.display()
                )));
            }
        }
    }
    let loss = loss_of(a.model.loss);
    let split = load_split(&a.data, loss.kind())?;
    let results = run_settings(&settings, &split, &loss, &a.model, a.line_search)?;

    let mut csv = Vec::new();
    writeln!(csv, "{COMPARE_HEADER}")?;
    for (s, r) in settings.iter().zip(&results) {
        write_long_form(&mut csv, &setting_label(s), effective_gamma(s), &r.trace)?;
    }
    write_to(a.out.as_deref(), out, &csv)?;
    if a.out.is_some() {
        for (s, r) in settings.iter().zip(&results) {
            writeln!(
                out,
                "{:<14} trees {:>5}  train {:.6}",
                setting_label(s),
                r.trace.records.last().map_or(0, |x| x.trees),
                r.trace.final_train_loss()
            )?;
        }
    }
    Ok(EXIT_OK)
}

/// Gamma used by the run; none for algorithms that ignore it.
fn effective_gamma(s: &Setting) -> Option<f64> {
    match s.algorithm {
        Algorithm::Gbm | Algorithm::Vagbm => None,
        Algorithm::Agbm | Algorithm::Agbmr => Some(s.gamma.unwrap_or(DEFAULT_GAMMA)),
    }
}

fn cmd_diverge_demo(a: &DivergeArgs, out: &mut dyn Write) -> Result<i32> {
    let data = match &a.data {
        Some(p) => {
            let reader = File::open(p).map_err(|e| BoostError::input(format!("{}: {e}", p.display())))?;
            parse_libsvm(BufReader::new(reader))?
        }
        None => parse_libsvm(HOUSING.as_bytes())?,
    };
    let loss = Loss::least_squares();
    let model = ModelArgs {
        loss: LossArg::Ls,
        eta: a.eta,
        trees: a.trees,
        depth: a.depth,
        min_split_gain: 0.0,
        l2: 0.0,
        quantiles: 100,
        early_stop_rounds: None,
        record_time: false,
    };
    let mut settings = vec![Setting {
        algorithm: Algorithm::Vagbm,
        gamma: None,
        path: None,
    }];
    settings.extend(a.gammas.iter().map(|&g| Setting {
        algorithm: Algorithm::Agbm,
        gamma: Some(g),
        path: None,
    }));
    let split = Split { train: data, test: None };
    let results = run_settings(&settings, &split, &loss, &model, false)?;

    let mut csv = Vec::new();
    writeln!(csv, "{COMPARE_HEADER}")?;
    for (s, r) in settings.iter().zip(&results) {
        write_long_form(&mut csv, &setting_label(s), effective_gamma(s), &r.trace)?;
    }
    if let Some(p) = &a.out {
        write_to(Some(p), out, &csv)?;
    }
    writeln!(out, "setting,diverged,first_divergent_iteration,min_loss,final_loss")?;
    for (s, r) in settings.iter().zip(&results) {
        let d = detect_divergence(&r.trace);
        writeln!(
            out,
            "{},{},{},{},{}",
            setting_label(s),
            d.diverged,
            d.first_iteration.map(|m| m.to_string()).unwrap_or_default(),
            d.min_loss,
            d.final_loss
        )?;
    }
    Ok(EXIT_OK)
}

fn cmd_verify(suite: &str, out: &mut dyn Write) -> Result<i32> {
    let suite: Suite = suite.parse()?;
    let report = run_suite(suite)?;
    writeln!(out, "{report}")?;
    Ok(if report.passed() { EXIT_OK } else { EXIT_FAILED })
}
