use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use gaborboost::dataio::{load_dataset, read_feature_table, reduce_classes, write_feature_table, ClassReduction};
use gaborboost::ebm::{explain_global, load_ensemble, save_ensemble, save_json, write_svgs, EbmConfig};
use gaborboost::features::{tabularize, ParamGrid, SearchMode, TabularizeConfig};
use gaborboost::gabor::{Backend, GaborOptions};
use gaborboost::harness::{fit_full, load_config, metrics, run_cv, select, Confusion, CvConfig, FeatureSet};
use gaborboost::par::init_threads_from_env;
use gaborboost::physfit::{fit_image, Background};
use gaborboost::synthgen::{generate, write_output, SynthSpec};
use gaborboost::{Error, Execution, Result};

/// Gabor quad-transform features and explainable boosting for grayscale images.
///
/// Worker threads are capped by GABORBOOST_THREADS (0 or unset: automatic).
#[derive(Parser, Debug)]
#[command(name = "gaborboost", version)]
struct Cli {
    /// key=value file supplying defaults for the subcommand's long flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Run every stage on one thread.
    #[arg(long, global = true)]
    sequential: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a labeled synthetic dataset (PGM images, labels.csv, ground_truth.csv).
    Generate(GenerateArgs),
    /// Turn a labeled image directory into the feature-table CSV.
    Tabularize(TabularizeArgs),
    /// Fit the skewed inverted Mexican-hat profile to every image.
    FitPhysics(FitPhysicsArgs),
    /// Train one-vs-rest additive models on a feature table.
    Train(TrainArgs),
    /// Export importances, shape tables, and pair grids of a model.
    Explain(ExplainArgs),
    /// Score a trained model on a feature table.
    Evaluate(EvaluateArgs),
    /// Repeated stratified k-fold cross-validation.
    Cv(CvArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long, default_value_t = 128)]
    width: usize,
    #[arg(long, default_value_t = 64)]
    height: usize,
    /// Images per class: longitudinal,partial,vortex.
    #[arg(long, default_value = "400,150,50")]
    counts: String,
    #[arg(long, default_value_t = 0.02)]
    noise: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    TwoStep,
    FullGrid,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BackendArg {
    Fft,
    Direct,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BackgroundArg {
    MedianColumns,
    None,
}

impl From<BackgroundArg> for Background {
    fn from(b: BackgroundArg) -> Self {
        match b {
            BackgroundArg::MedianColumns => Background::MedianColumns,
            BackgroundArg::None => Background::None,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReduceArg {
    /// Keep labels as they are.
    None,
    /// top/bottom to partial, clockwise/counterclockwise to vortex, mirroring bottom and counterclockwise.
    Soliton,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Directory holding the images and labels.csv.
    #[arg(long, value_name = "DIR")]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "none")]
    reduce: ReduceArg,
    /// Custom label merge, `from=to,from=to`; overrides --reduce.
    #[arg(long)]
    merge: Option<String>,
    /// Labels whose images are mirrored before merging, comma separated.
    #[arg(long, default_value = "")]
    flip: String,
}

#[derive(Args, Debug)]
struct TabularizeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_name = "CSV")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "two-step")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "fft")]
    backend: BackendArg,
    /// Skip subtracting the kernel's real-part mean.
    #[arg(long)]
    no_dc_correct: bool,
    /// Comma list of vertical scales in pixels.
    #[arg(long)]
    sigma_x: Option<String>,
    /// Comma list of horizontal scales in pixels.
    #[arg(long)]
    sigma_y: Option<String>,
    /// Comma list of carrier wavelengths in pixels.
    #[arg(long)]
    wavelengths: Option<String>,
    #[arg(long, default_value_t = gaborboost::features::DEFAULT_EPSILON)]
    epsilon: f64,
    /// Append the physics-fit columns.
    #[arg(long)]
    with_pf: bool,
    #[arg(long, value_enum, default_value = "median-columns")]
    background: BackgroundArg,
}

#[derive(Args, Debug)]
struct FitPhysicsArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_name = "CSV")]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "median-columns")]
    background: BackgroundArg,
}

#[derive(Args, Debug)]
struct EbmArgs {
    #[arg(long, default_value = "GF+EGF")]
    feature_set: String,
    #[arg(long, default_value_t = 0.05)]
    learning_rate: f64,
    #[arg(long, default_value_t = 1000)]
    max_rounds: usize,
    #[arg(long, default_value_t = 50)]
    patience: usize,
    #[arg(long, default_value_t = 0.15)]
    val_fraction: f64,
    #[arg(long, default_value_t = 10)]
    max_pairs: usize,
    #[arg(long, default_value_t = 64)]
    max_bins: usize,
    #[arg(long, default_value_t = 16)]
    pair_max_bins: usize,
    /// Leaves per univariate update; 0 updates each bin separately.
    #[arg(long, default_value_t = 3)]
    max_leaves: usize,
    /// Seed of the validation split inside each model.
    #[arg(long, default_value_t = 0)]
    ebm_seed: u64,
    /// Balance classes in the loss.
    #[arg(long)]
    class_weights: bool,
}

impl EbmArgs {
    fn feature_set(&self) -> Result<FeatureSet> {
        self.feature_set.parse()
    }

    fn config(&self) -> Result<EbmConfig> {
        let cfg = EbmConfig {
            learning_rate: self.learning_rate,
            max_rounds: self.max_rounds,
            patience: self.patience,
            val_fraction: self.val_fraction,
            max_pairs: self.max_pairs,
            max_bins: self.max_bins,
            pair_max_bins: self.pair_max_bins,
            max_leaves: self.max_leaves,
            seed: self.ebm_seed,
            class_weights: self.class_weights,
            allow_single_class: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long, value_name = "CSV")]
    table: PathBuf,
    #[arg(long, value_name = "JSON")]
    out: PathBuf,
    #[command(flatten)]
    ebm: EbmArgs,
}

#[derive(Args, Debug)]
struct ExplainArgs {
    #[arg(long, value_name = "JSON")]
    model: PathBuf,
    #[arg(long, value_name = "JSON")]
    out: PathBuf,
    /// Also render importance bars and pair heatmaps here.
    #[arg(long, value_name = "DIR")]
    svg_dir: Option<PathBuf>,
    /// Terms listed per class on stdout.
    #[arg(long, default_value_t = 7)]
    top: usize,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long, value_name = "JSON")]
    model: PathBuf,
    #[arg(long, value_name = "CSV")]
    table: PathBuf,
    /// Write metrics and the confusion matrix as JSON.
    #[arg(long, value_name = "JSON")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CvArgs {
    #[arg(long, value_name = "CSV")]
    table: PathBuf,
    /// Full-precision JSON report.
    #[arg(long, value_name = "JSON")]
    out: PathBuf,
    /// Also write the text table here.
    #[arg(long, value_name = "TXT")]
    text: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long, default_value_t = 6)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    ebm: EbmArgs,
}

fn exec(cli: &Cli) -> Execution {
    if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    }
}

fn parse_list<T: std::str::FromStr>(flag: &str, s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| Error::Config(format!("--{flag}: cannot parse {t:?}"))))
        .collect()
}

fn reduction(d: &DataArgs, classes: &[String]) -> Result<ClassReduction> {
    if let Some(m) = &d.merge {
        return ClassReduction::parse(m, &d.flip);
    }
    Ok(match d.reduce {
        ReduceArg::None => ClassReduction::identity(classes),
        ReduceArg::Soliton => ClassReduction::soliton(),
    })
}

fn load_data(d: &DataArgs, exec: Execution) -> Result<gaborboost::dataio::LabeledDataset> {
    let ds = load_dataset(&d.data, exec)?;
    if ds.is_empty() {
        return Err(Error::Config(format!("{}: labels.csv lists no images", d.data.display())));
    }
    let red = reduction(d, ds.classes())?;
    reduce_classes(&ds, &red)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

fn cmd_generate(a: &GenerateArgs, exec: Execution) -> Result<()> {
    let counts: Vec<usize> = parse_list("counts", &a.counts)?;
    let counts: [usize; 3] =
        counts.try_into().map_err(|_| Error::Config("--counts needs three numbers".into()))?;
    let spec =
        SynthSpec { width: a.width, height: a.height, counts, noise_sigma: a.noise, seed: a.seed, ..SynthSpec::default() };
    spec.validate()?;
    let out = generate(&spec, exec)?;
    write_output(&out, &a.out)?;
    println!("wrote {} images to {}", out.dataset.len(), a.out.display());
    Ok(())
}

fn cmd_tabularize(a: &TabularizeArgs, exec: Execution) -> Result<()> {
    let ds = load_data(&a.data, exec)?;
    let grid = if a.sigma_x.is_some() || a.sigma_y.is_some() || a.wavelengths.is_some() {
        let img = &ds.images()[0];
        let base = ParamGrid::default_for(img.width(), img.height());
        let sx = a.sigma_x.as_deref().map(|s| parse_list("sigma-x", s)).transpose()?;
        let sy = a.sigma_y.as_deref().map(|s| parse_list("sigma-y", s)).transpose()?;
        let sx = sx.unwrap_or_else(|| base.sigma_x().to_vec());
        let sy = sy.unwrap_or_else(|| base.sigma_y().to_vec());
        match &a.wavelengths {
            Some(w) => Some(ParamGrid::from_wavelengths(sx, sy, &parse_list::<f64>("wavelengths", w)?)?),
            None => Some(ParamGrid::new(sx, sy, base.lambda().to_vec())?),
        }
    } else {
        None
    };
    let cfg = TabularizeConfig {
        grid,
        mode: match a.mode {
            ModeArg::TwoStep => SearchMode::TwoStep,
            ModeArg::FullGrid => SearchMode::FullGrid,
        },
        gabor: GaborOptions {
            dc_correct: !a.no_dc_correct,
            backend: match a.backend {
                BackendArg::Fft => Backend::Fft,
                BackendArg::Direct => Backend::Direct,
            },
        },
        epsilon: a.epsilon,
        with_pf: a.with_pf,
        background: a.background.into(),
    };
    let tab = tabularize(&ds, &cfg, exec)?;
    write_feature_table(&tab.rows, &a.out)?;
    let degenerate = tab.degenerate.iter().filter(|d| d.iter().any(|x| *x)).count();
    println!(
        "wrote {} rows to {} ({} convolutions, {degenerate} clamped ROIs, {} rejected fits)",
        tab.rows.len(),
        a.out.display(),
        tab.convolutions,
        tab.pf_failures.len()
    );
    for (id, why) in &tab.pf_failures {
        eprintln!("warning: {id}: physics fit rejected ({why})");
    }
    Ok(())
}

fn cmd_fit_physics(a: &FitPhysicsArgs, exec: Execution) -> Result<()> {
    let ds = load_data(&a.data, exec)?;
    let fits = gaborboost::par::try_map_range(exec, ds.len(), |i| fit_image(&ds.images()[i], a.background.into()))?;
    let mut s = String::from("id,label,pf_amp,pf_center,pf_width,pf_skew,pf_offset,residual_norm,iterations,status\n");
    let mut failed = 0;
    for ((id, label), f) in ds.names().iter().zip(ds.labels()).zip(&fits) {
        let p = f.params.as_array();
        let status = f.failure.map_or("ok".to_string(), |e| e.to_string().replace(',', ";"));
        failed += usize::from(f.failure.is_some());
        let _ = writeln!(
            s,
            "{id},{label},{},{},{},{},{},{},{},{status}",
            p[0], p[1], p[2], p[3], p[4], f.residual_norm, f.iterations
        );
    }
    write_text(&a.out, &s)?;
    println!("wrote {} fits to {} ({failed} rejected)", fits.len(), a.out.display());
    Ok(())
}

fn cmd_train(a: &TrainArgs, exec: Execution) -> Result<()> {
    let table = read_feature_table(&a.table)?;
    let ens = fit_full(&table, a.ebm.feature_set()?, &a.ebm.config()?, exec)?;
    save_ensemble(&ens, &a.out)?;
    println!("trained {} class models on {} features, wrote {}", ens.classes.len(), ens.feature_names().len(), a.out.display());
    Ok(())
}

fn cmd_explain(a: &ExplainArgs) -> Result<()> {
    let ens = load_ensemble(&a.model)?;
    let bundle = explain_global(&ens);
    save_json(&bundle, &a.out)?;
    for e in &bundle.explanations {
        let top: Vec<String> =
            e.ranking.iter().take(a.top).map(|t| format!("{} ({:.4})", t.term, t.importance)).collect();
        println!("{}: {}", e.class, top.join(", "));
    }
    if let Some(dir) = &a.svg_dir {
        let files = write_svgs(&bundle, dir)?;
        println!("wrote {} SVG files to {}", files.len(), dir.display());
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct Evaluation {
    classes: Vec<String>,
    n_rows: usize,
    skipped_rows: Vec<String>,
    accuracy: f64,
    precision: Vec<f64>,
    recall: Vec<f64>,
    confusion: Vec<Vec<u64>>,
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<()> {
    let ens = load_ensemble(&a.model)?;
    let table = read_feature_table(&a.table)?;
    let mut c = Confusion::new(ens.classes.len());
    let mut skipped = Vec::new();
    for row in &table {
        let Some(truth) = ens.classes.iter().position(|k| *k == row.label) else {
            skipped.push(row.id.clone());
            continue;
        };
        let x = ens
            .feature_names()
            .iter()
            .map(|n| row.value(n).ok_or_else(|| Error::Schema(format!("table has no column {n:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        c.add(truth, ens.predict(&x).0);
    }
    let m = metrics(&c);
    println!("rows {}  accuracy {:.2}%", c.total(), m.accuracy);
    for (k, class) in ens.classes.iter().enumerate() {
        println!("{class:<16} precision {:6.2}%  recall {:6.2}%", m.precision[k], m.recall[k]);
    }
    if !skipped.is_empty() {
        eprintln!("warning: {} rows have labels the model does not know", skipped.len());
    }
    if let Some(out) = &a.out {
        let ev = Evaluation {
            classes: ens.classes.clone(),
            n_rows: c.total() as usize,
            skipped_rows: skipped,
            accuracy: m.accuracy,
            precision: m.precision,
            recall: m.recall,
            confusion: c.counts.clone(),
        };
        save_json(&ev, out)?;
    }
    Ok(())
}

fn cmd_cv(a: &CvArgs, exec: Execution) -> Result<()> {
    let table = read_feature_table(&a.table)?;
    let cfg = CvConfig { feature_set: a.ebm.feature_set()?, repeats: a.repeats, k: a.k, seed: a.seed, ebm: a.ebm.config()? };
    // Surface column problems before any training starts.
    select(&table, cfg.feature_set)?;
    let report = run_cv(&table, &cfg, exec)?;
    save_json(&report, &a.out)?;
    let text = report.text_table();
    print!("{text}");
    if let Some(p) = &a.text {
        write_text(p, &text)?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    init_threads_from_env()?;
    let exec = exec(cli);
    match &cli.command {
        Command::Generate(a) => cmd_generate(a, exec),
        Command::Tabularize(a) => cmd_tabularize(a, exec),
        Command::FitPhysics(a) => cmd_fit_physics(a, exec),
        Command::Train(a) => cmd_train(a, exec),
        Command::Explain(a) => cmd_explain(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Cv(a) => cmd_cv(a, exec),
    }
}

/// Config entries turned into flags for `sub`, skipping flags already on the
/// command line. Keys no subcommand knows are an error.
fn config_args(argv: &[OsString], sub: &str, cfg: &BTreeMap<String, String>) -> Result<Vec<OsString>> {
    let cmd = Cli::command();
    let known = |c: &clap::Command, key: &str| c.get_arguments().find(|a| a.get_long() == Some(key)).cloned();
    let sub_cmd = cmd.find_subcommand(sub).expect("parsed subcommand exists");
    let given: Vec<String> = argv
        .iter()
        .filter_map(|a| a.to_str())
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a).to_string())
        .collect();
    let mut extra = Vec::new();
    for (key, value) in cfg {
        if key == "config" {
            continue;
        }
        let arg = match known(sub_cmd, key).or_else(|| known(&cmd, key)) {
            Some(a) => a,
            None if cmd.get_subcommands().any(|s| known(s, key).is_some()) => continue,
            None => return Err(Error::Config(format!("unknown config key {key:?}"))),
        };
        if given.iter().any(|g| g == key) {
            continue;
        }
        if arg.get_action().takes_values() {
            extra.push(OsString::from(format!("--{key}={value}")));
        } else {
            match value.to_ascii_lowercase().as_str() {
                "true" | "yes" | "1" => extra.push(OsString::from(format!("--{key}"))),
                "false" | "no" | "0" => {}
                _ => return Err(Error::Config(format!("config key {key:?} expects true or false, got {value:?}"))),
            }
        }
    }
    Ok(extra)
}

fn parse(argv: Vec<OsString>) -> std::result::Result<Cli, clap::Error> {
    let m = Cli::command().try_get_matches_from(&argv)?;
    Cli::from_arg_matches(&m)
}

fn fail(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {}", e.to_string().replace('\n', " "));
    ExitCode::from(1)
}

fn main() -> ExitCode {
    let argv: Vec<OsString> = std::env::args_os().collect();
    let cli = match parse(argv.clone()) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let cli = match &cli.config {
        None => cli,
        Some(path) => {
            let cfg = match load_config(path) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            let sub = Cli::command().try_get_matches_from(&argv).ok().and_then(|m| m.subcommand_name().map(String::from));
            let extra = match config_args(&argv, sub.as_deref().unwrap_or_default(), &cfg) {
                Ok(x) => x,
                Err(e) => return fail(e),
            };
            match parse(argv.into_iter().chain(extra).collect()) {
                Ok(c) => c,
                Err(e) if e.use_stderr() => return fail(format!("config {}: {}", path.display(), e.kind())),
                Err(e) => e.exit(),
            }
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}
