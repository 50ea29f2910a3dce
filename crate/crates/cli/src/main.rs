use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use skmm::bench::{run_bench, BenchPlan};
use skmm::evaluator::{evaluate_selection, tradeoff_diagnostics, AlphaGrid, EvalConfig};
use skmm::selectors::{run_selector, sketch_seed, Selection, SelectionData, SelectorConfig};
use skmm::sketch::{apply_sketch, build_sketch, SketchKind, DEFAULT_SPARSITY};
use skmm::synth::{gmm_generate, GmmSpec};
use skmm::{io, Error};

#[derive(Parser)]
#[command(name = "skmm", version, about = "Coreset selection by sketchy moment matching")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a Gaussian-mixture regression dataset.
    Synth(SynthArgs),
    /// Select a coreset from a feature matrix.
    Select(SelectArgs),
    /// Fit ridge on a selection and report the full-data risk.
    Eval(EvalArgs),
    /// Run a benchmark plan and write a CSV of mean and std risk.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 2400)]
    r: usize,
    #[arg(long, default_value_t = 8)]
    clusters: usize,
    #[arg(long, default_value_t = 0.04)]
    sigma_max: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory; receives features.skmm, labels.skmm and meta.json.
    #[arg(long)]
    out: PathBuf,
    /// Also write features.csv and labels.csv.
    #[arg(long)]
    csv: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Uniform,
    Herding,
    Kcenter,
    Adaptive,
    TLeverage,
    RLeverage,
    Skmm,
}

impl Method {
    fn tag(self) -> &'static str {
        match self {
            Method::Uniform => "uniform",
            Method::Herding => "herding",
            Method::Kcenter => "kcenter",
            Method::Adaptive => "adaptive",
            Method::TLeverage => "t-leverage",
            Method::RLeverage => "r-leverage",
            Method::Skmm => "skmm",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Sketch {
    Gaussian,
    SparseSign,
}

#[derive(Clone, Copy, ValueEnum)]
enum Optimizer {
    Adam,
    PlainPgd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Sampling {
    Weighted,
    TopN,
}

#[derive(Args)]
struct SelectArgs {
    /// Feature (gradient) matrix, binary or CSV.
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON selector config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sketch dimension.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    sketch: Option<Sketch>,
    /// Nonzeros per row of a sparse-sign sketch.
    #[arg(long)]
    sparsity: Option<usize>,
    /// The input is already sketched.
    #[arg(long)]
    presketched: bool,
    #[arg(long)]
    c_s: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    optimizer: Option<Optimizer>,
    #[arg(long)]
    sampling: Option<Sampling>,
    #[arg(long)]
    trace_every: Option<usize>,
    /// Truncation rank for t-leverage.
    #[arg(long)]
    rank: Option<usize>,
    /// Ridge parameter for r-leverage.
    #[arg(long)]
    rho: Option<f64>,
    /// Output JSON; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    selection: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Comma-separated α values, or `start:stop:count` for a linear grid.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    cv_seed: Option<u64>,
    /// Add variance/bias diagnostics computed on sketched features.
    #[arg(long)]
    diagnostics: bool,
    /// Sketch dimension for diagnostics when the selection carries none.
    #[arg(long)]
    m: Option<usize>,
    /// Truncation rank `k` for diagnostics; defaults to min(m, n).
    #[arg(long)]
    truncation: Option<usize>,
    #[arg(long)]
    c_s_probe: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Plan file (JSON). Relative paths inside it resolve against its directory.
    plan: PathBuf,
    #[arg(long)]
    jobs: Option<usize>,
    /// CSV output; overrides the plan, stdout when neither is set.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Add a row for ridge on the full dataset.
    #[arg(long)]
    include_full: bool,
    /// Also write every cell result as JSON.
    #[arg(long)]
    cells: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Select(a) => cmd_select(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::NumericDomain(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> skmm::Result<()> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> skmm::Result<()> {
    let spec = GmmSpec {
        n: a.n,
        r: a.r,
        clusters: a.clusters,
        sigma_max: a.sigma_max,
        seed: a.seed,
    };
    let d = gmm_generate(&spec)?;
    std::fs::create_dir_all(&a.out)?;
    io::write_matrix(&a.out.join("features.skmm"), &d.features)?;
    io::write_labels(&a.out.join("labels.skmm"), &d.labels)?;
    if a.csv {
        io::write_csv(&a.out.join("features.csv"), &d.features)?;
        io::write_csv(&a.out.join("labels.csv"), &io::labels_to_matrix(&d.labels))?;
    }
    let meta = json!({
        "spec": d.spec,
        "partition_law": d.partition_law,
        "cluster_sizes": d.cluster_sizes(),
        "assignment": d.assignment,
        "scales": (0..spec.clusters).map(|j| d.means.get(j, j)).collect::<Vec<_>>(),
        "stds": d.stds,
        "theta": d.theta,
    });
    io::write_json(&a.out.join("meta.json"), &meta)
}

/// Flags override the config file, which overrides built-in defaults.
fn selector_config(a: &SelectArgs) -> skmm::Result<SelectorConfig> {
    let mut obj = match &a.config {
        Some(p) => match io::read_json::<Value>(p)? {
            Value::Object(m) => m,
            _ => return Err(Error::Format("selector config must be a JSON object".into())),
        },
        None => Map::new(),
    };
    if let Some(m) = a.method {
        obj.insert("method".into(), json!(m.tag()));
    }
    if !obj.contains_key("method") {
        return Err(Error::InvalidArgument(
            "no method given by --method or the config file".into(),
        ));
    }
    let mut set = |key: &str, v: Option<Value>| {
        if let Some(v) = v {
            obj.insert(key.into(), v);
        }
    };
    set("m", a.m.map(|v| json!(v)));
    set("c_s", a.c_s.map(|v| json!(v)));
    set("iterations", a.iters.map(|v| json!(v)));
    set("learning_rate", a.lr.map(|v| json!(v)));
    set("trace_every", a.trace_every.map(|v| json!(v)));
    set("rank", a.rank.map(|v| json!(v)));
    set("rho", a.rho.map(|v| json!(v)));
    set("presketched", a.presketched.then_some(json!(true)));
    set(
        "optimizer",
        a.optimizer.map(|o| match o {
            Optimizer::Adam => json!("adam"),
            Optimizer::PlainPgd => json!("plain-pgd"),
        }),
    );
    set(
        "sampling_mode",
        a.sampling.map(|s| match s {
            Sampling::Weighted => json!("weighted-without-replacement"),
            Sampling::TopN => json!("top-n"),
        }),
    );
    let sketch = match (a.sketch, a.sparsity) {
        (Some(Sketch::Gaussian), _) => Some(SketchKind::Gaussian),
        (Some(Sketch::SparseSign), s) | (None, s @ Some(_)) => Some(SketchKind::SparseSign {
            sparsity: s.unwrap_or(DEFAULT_SPARSITY),
        }),
        (None, None) => None,
    };
    set("sketch", sketch.map(|k| serde_json::to_value(k).expect("sketch kind")));
    serde_json::from_value(Value::Object(obj))
        .map_err(|e| Error::Format(format!("selector config: {e}")))
}

fn cmd_select(a: SelectArgs) -> skmm::Result<()> {
    let cfg = selector_config(&a)?;
    let x = io::read_matrix(&a.input)?;
    let sel = run_selector(&cfg, &SelectionData::new(&x), a.n, a.seed)?;
    emit(a.out.as_deref(), &io::to_json_pretty(&sel)?)
}

fn parse_grid(text: &str) -> skmm::Result<AlphaGrid> {
    let bad = |e: std::num::ParseFloatError| Error::InvalidArgument(format!("grid: {e}"));
    let text = text.trim();
    if text.is_empty() {
        return Ok(AlphaGrid::List(Vec::new()));
    }
    let parts: Vec<&str> = text.split(':').collect();
    if let [start, stop, count] = parts[..] {
        return Ok(AlphaGrid::Linear {
            start: start.trim().parse().map_err(bad)?,
            stop: stop.trim().parse().map_err(bad)?,
            count: count
                .trim()
                .parse()
                .map_err(|e| Error::InvalidArgument(format!("grid count: {e}")))?,
        });
    }
    let values = text
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(bad))
        .collect::<skmm::Result<Vec<_>>>()?;
    Ok(AlphaGrid::List(values))
}

fn cmd_eval(a: EvalArgs) -> skmm::Result<()> {
    let sel: Selection = io::read_json(&a.selection)?;
    let x = io::read_matrix(&a.data)?;
    let y = io::read_labels(&a.labels)?;
    if x.rows() != y.len() {
        return Err(Error::InvalidArgument("features and labels disagree on N".into()));
    }
    sel.validate(x.rows())?;

    let mut cfg = EvalConfig::default();
    if let Some(g) = &a.grid {
        cfg.grid = parse_grid(g)?;
    }
    if let Some(f) = a.folds {
        cfg.folds = f;
    }
    if let Some(s) = a.cv_seed {
        cfg.cv_seed = s;
    }
    let mut report = evaluate_selection(&x, &y, &sel.indices, &cfg)?;

    if a.diagnostics {
        let recorded: Option<SelectorConfig> = serde_json::from_value(sel.config.clone()).ok();
        let skmm_cfg = match recorded {
            Some(SelectorConfig::Skmm(c)) => Some(c),
            _ => None,
        };
        let sketched = match &skmm_cfg {
            Some(c) if c.presketched => x.clone(),
            Some(c) if a.m.is_none() => {
                let op = build_sketch(c.sketch, x.cols(), c.m, sketch_seed(sel.seed))?;
                apply_sketch(&x, &op)?
            }
            _ => {
                let m = a.m.unwrap_or(32).min(x.cols());
                let op = build_sketch(SketchKind::Gaussian, x.cols(), m, sketch_seed(sel.seed))?;
                apply_sketch(&x, &op)?
            }
        };
        let k = a
            .truncation
            .unwrap_or_else(|| sketched.cols().min(sel.indices.len()));
        let probe = a
            .c_s_probe
            .or(skmm_cfg.map(|c| c.optimizer.c_s))
            .unwrap_or(0.999);
        report.diagnostics = Some(tradeoff_diagnostics(&sketched, &sel.indices, k, probe)?);
    }

    let out = json!({
        "selection": {
            "method": sel.method,
            "n": sel.n,
            "seed": sel.seed,
        },
        "config": cfg,
        "report": report,
    });
    emit(a.out.as_deref(), &io::to_json_pretty(&out)?)
}

fn cmd_bench(a: BenchArgs) -> skmm::Result<()> {
    let mut plan: BenchPlan = io::read_json(&a.plan)?;
    let base = a.plan.parent().unwrap_or(Path::new("."));
    plan.resolve_paths(base);
    if let Some(j) = a.jobs {
        plan.jobs = j;
    }
    if let Some(o) = a.out {
        plan.output = Some(o);
    }
    if a.include_full {
        plan.include_full = true;
    }
    let result = run_bench(&plan)?;
    if let Some(p) = &a.cells {
        io::write_json(p, &result.cells)?;
    }
    emit(plan.output.as_deref(), &result.to_csv())
}
