//! Subcommand handlers. Every run echoes its fully resolved configuration
//! so the output alone reproduces it.

use std::io::Write;
use std::path::Path;

use ctar::{
    ar, rolling_forecast, select_hyper_over, threshold_grid, threshold_grid_exhaustive,
    tuning::{MuPrior, SigmaPrior, TuneConfig},
    ArHyper, HyperSpec, InferenceState, ModelConfig, Quantiser, TreeReport, TuneEntry,
};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::Value;

use crate::ingest::{self, Column, TransformKind};
use crate::model_file;
use crate::{AnalyseArgs, CliError, Command, DataOpts, ForecastArgs, ModelOpts, SimulateArgs, TopkArgs};

/// Fully resolved run configuration, echoed in every output.
#[derive(Serialize, Clone)]
struct ConfigEcho {
    command: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    column: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    transform: Option<&'static str>,
    depth: usize,
    m: usize,
    beta: f64,
    thresholds: Vec<f64>,
    order: usize,
    intercept: bool,
    tau: f64,
    lambda: f64,
    mu0: Value,
    sigma0: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    split: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    refit: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    invert_transform: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

struct Resolved {
    config: ModelConfig,
    echo: ConfigEcho,
    table: Vec<TuneEntry>,
}

fn read_vector_file(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        out.push(line.parse::<f64>().map_err(|_| {
            CliError::parse(format!("{} line {}: {line:?} is not numeric", path.display(), i + 1))
        })?);
    }
    if out.is_empty() {
        return Err(CliError::parse(format!("{} is empty", path.display())));
    }
    Ok(out)
}

fn read_matrix_file(path: &Path) -> Result<DMatrix<f64>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("cannot read {}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, CliError> = line
            .split(',')
            .map(|cell| {
                cell.trim().parse::<f64>().map_err(|_| {
                    CliError::parse(format!(
                        "{} line {}: {cell:?} is not numeric",
                        path.display(),
                        i + 1
                    ))
                })
            })
            .collect();
        rows.push(row?);
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::parse(format!(
            "{} must hold a square numeric matrix",
            path.display()
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn parse_threshold_list(spec: &str) -> Result<Vec<f64>, CliError> {
    spec.split(',')
        .map(|cell| {
            cell.trim()
                .parse::<f64>()
                .map_err(|_| CliError::usage(format!("bad threshold {cell:?}")))
        })
        .collect()
}

fn prior_spec(opts: &ModelOpts) -> Result<(HyperSpec, Value, Value), CliError> {
    let (mu, mu_echo) = match &opts.mu0_file {
        Some(path) => {
            let v = read_vector_file(path)?;
            let echo = serde_json::to_value(&v).expect("vector");
            (MuPrior::Vector(v), echo)
        }
        None => (MuPrior::Constant(opts.mu0), Value::from(opts.mu0)),
    };
    let (sigma, sigma_echo) = match &opts.sigma0_file {
        Some(path) => {
            let m = read_matrix_file(path)?;
            let rows: Vec<Vec<f64>> = (0..m.nrows())
                .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
                .collect();
            let echo = serde_json::to_value(&rows).expect("matrix");
            (SigmaPrior::Full(m), echo)
        }
        None => (
            SigmaPrior::ScaledIdentity(opts.sigma0),
            Value::from(opts.sigma0),
        ),
    };
    Ok((
        HyperSpec {
            intercept: opts.intercept,
            tau: opts.tau,
            lambda: opts.lambda,
            mu,
            sigma,
        },
        mu_echo,
        sigma_echo,
    ))
}

/// Resolve thresholds and order (tuning them on `tuning_series` where
/// requested) and build the model configuration.
fn resolve_model(
    command: &'static str,
    data: Option<&DataOpts>,
    opts: &ModelOpts,
    tuning_series: &[f64],
) -> Result<Resolved, CliError> {
    if opts.alphabet < 2 {
        return Err(CliError::usage("alphabet size must be >= 2".into()));
    }
    let beta = opts.beta.unwrap_or_else(|| ctar::default_beta(opts.alphabet));
    let (prior, mu_echo, sigma_echo) = prior_spec(opts)?;

    let threshold_candidates: Vec<Vec<f64>> = if opts.thresholds == "tune" {
        if opts.exhaustive_grid {
            threshold_grid_exhaustive(tuning_series, opts.alphabet, opts.grid_points)?
        } else {
            threshold_grid(tuning_series, opts.alphabet, opts.grid_points)?
        }
    } else {
        let set = parse_threshold_list(&opts.thresholds)?;
        if set.len() + 1 != opts.alphabet {
            return Err(CliError::usage(format!(
                "{} thresholds given but alphabet size {} needs {}",
                set.len(),
                opts.alphabet,
                opts.alphabet - 1
            )));
        }
        vec![set]
    };
    let orders: Vec<usize> = if opts.order == "tune" {
        if opts.p_max < 1 {
            return Err(CliError::usage("p-max must be >= 1".into()));
        }
        (1..=opts.p_max).collect()
    } else {
        let p: usize = opts
            .order
            .parse()
            .map_err(|_| CliError::usage(format!("bad order {:?}", opts.order)))?;
        vec![p]
    };

    let needs_tuning =
        command == "tune" || threshold_candidates.len() > 1 || orders.len() > 1;
    let (thresholds, order, table) = if needs_tuning {
        let tune_cfg = TuneConfig {
            depth: opts.depth,
            beta: Some(beta),
            prior: prior.clone(),
        };
        let result = select_hyper_over(tuning_series, &threshold_candidates, &orders, &tune_cfg)?;
        (result.thresholds, result.order, result.table)
    } else {
        (threshold_candidates[0].clone(), orders[0], Vec::new())
    };

    let hyper: ArHyper = prior.build(order)?;
    let quantiser = Quantiser::new(thresholds.clone())?;
    let config = ModelConfig::new(quantiser, opts.depth, beta, hyper)?;
    let echo = ConfigEcho {
        command,
        input: data.map(|d| d.input.display().to_string()),
        column: data.map(|d| d.column.clone()),
        transform: data.map(|d| d.transform.name()),
        depth: opts.depth,
        m: opts.alphabet,
        beta,
        thresholds,
        order,
        intercept: opts.intercept,
        tau: opts.tau,
        lambda: opts.lambda,
        mu0: mu_echo,
        sigma0: sigma_echo,
        split: None,
        refit: None,
        invert_transform: None,
        k: None,
        seed: None,
    };
    Ok(Resolved {
        config,
        echo,
        table,
    })
}

fn load_series(data: &DataOpts) -> Result<(Vec<f64>, usize), CliError> {
    let ingested = ingest::read_series(&data.input, &Column::parse(&data.column))?;
    let series = ingest::transform(&ingested.series, data.transform, ingested.first_row)?;
    Ok((series, ingested.first_row))
}

#[derive(Serialize)]
struct EvidenceOut {
    config: ConfigEcho,
    n: usize,
    log_evidence: f64,
}

#[derive(Serialize)]
struct MapOut {
    config: ConfigEcho,
    n: usize,
    log_evidence: f64,
    log_prior: f64,
    log_marginal: f64,
    tree: TreeReport,
}

#[derive(Serialize)]
struct TopkOut {
    config: ConfigEcho,
    n: usize,
    log_evidence: f64,
    trees: Vec<TreeReport>,
}

#[derive(Serialize)]
struct LeafFit {
    path: String,
    count: usize,
    posterior: PosteriorOut,
    map: MapParamsOut,
}

#[derive(Serialize)]
struct PosteriorOut {
    shape: f64,
    scale: f64,
    nu: f64,
    mean: Vec<f64>,
    scale_matrix: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct MapParamsOut {
    phi: Vec<f64>,
    sigma2: f64,
}

#[derive(Serialize)]
struct FitOut {
    config: ConfigEcho,
    n: usize,
    log_evidence: f64,
    tree: TreeReport,
    leaves: Vec<LeafFit>,
}

#[derive(Serialize)]
struct ChosenOut {
    thresholds: Vec<f64>,
    order: usize,
}

#[derive(Serialize)]
struct TuneOut {
    config: ConfigEcho,
    chosen: ChosenOut,
    table: Vec<TuneEntry>,
}

#[derive(Serialize)]
struct StepOut {
    index: usize,
    forecast: f64,
    actual: f64,
    squared_error: f64,
    map_leaves: Vec<String>,
    elapsed_ms: f64,
}

#[derive(Serialize)]
struct ForecastOut {
    config: ConfigEcho,
    n_train: usize,
    n_test: usize,
    refit: bool,
    mse: f64,
    steps: Vec<StepOut>,
}

#[derive(Serialize)]
struct SimulateConfigEcho {
    command: &'static str,
    model: String,
    m: usize,
    depth: usize,
    thresholds: Vec<f64>,
    order: usize,
    intercept: bool,
    n: usize,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    init: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct SimulateOut {
    config: SimulateConfigEcho,
    n: usize,
    out: String,
}

pub fn run(command: Command) -> Result<Value, CliError> {
    match command {
        Command::Evidence(args) => evidence(args),
        Command::Map(args) => map(args),
        Command::Topk(args) => topk(args),
        Command::Fit(args) => fit(args),
        Command::Tune(args) => tune(args),
        Command::Forecast(args) => forecast(args),
        Command::Simulate(args) => simulate(args),
    }
}

fn to_value<T: Serialize>(v: T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::parse(format!("serialisation failed: {e}")))
}

fn evidence(args: AnalyseArgs) -> Result<Value, CliError> {
    let (series, _) = load_series(&args.data)?;
    let resolved = resolve_model("evidence", Some(&args.data), &args.model, &series)?;
    let state = InferenceState::from_series(resolved.config, &series)?;
    to_value(EvidenceOut {
        config: resolved.echo,
        n: state.len(),
        log_evidence: state.log_evidence()?,
    })
}

fn map(args: AnalyseArgs) -> Result<Value, CliError> {
    let (series, _) = load_series(&args.data)?;
    let resolved = resolve_model("map", Some(&args.data), &args.model, &series)?;
    let state = InferenceState::from_series(resolved.config, &series)?;
    let result = state.map_tree()?;
    to_value(MapOut {
        config: resolved.echo,
        n: state.len(),
        log_evidence: state.log_evidence()?,
        log_prior: result.log_prior,
        log_marginal: result.log_marginal,
        tree: TreeReport::new(&result, &state),
    })
}

fn topk(args: TopkArgs) -> Result<Value, CliError> {
    let (series, _) = load_series(&args.data)?;
    let mut resolved = resolve_model("topk", Some(&args.data), &args.model, &series)?;
    resolved.echo.k = Some(args.k);
    let state = InferenceState::from_series(resolved.config, &series)?;
    let trees = state
        .top_k(args.k)?
        .iter()
        .map(|r| TreeReport::new(r, &state))
        .collect();
    to_value(TopkOut {
        config: resolved.echo,
        n: state.len(),
        log_evidence: state.log_evidence()?,
        trees,
    })
}

fn fit(args: AnalyseArgs) -> Result<Value, CliError> {
    let (series, _) = load_series(&args.data)?;
    let resolved = resolve_model("fit", Some(&args.data), &args.model, &series)?;
    let hyper = resolved.config.hyper().clone();
    let state = InferenceState::from_series(resolved.config, &series)?;
    let result = state.map_tree()?;
    let mut leaves = Vec::new();
    for leaf in result.tree.leaves() {
        let stats = state.leaf_stats(&leaf);
        let posterior = ar::posterior(&stats, &hyper)?;
        let (phi, sigma2) = ar::map_params(&stats, &hyper)?;
        leaves.push(LeafFit {
            path: ctar::path_label(&leaf),
            count: stats.count(),
            posterior: PosteriorOut {
                shape: posterior.shape,
                scale: posterior.scale,
                nu: posterior.nu,
                mean: posterior.mean.iter().copied().collect(),
                scale_matrix: (0..posterior.scale_matrix.nrows())
                    .map(|i| {
                        (0..posterior.scale_matrix.ncols())
                            .map(|j| posterior.scale_matrix[(i, j)])
                            .collect()
                    })
                    .collect(),
            },
            map: MapParamsOut {
                phi: phi.iter().copied().collect(),
                sigma2,
            },
        });
    }
    to_value(FitOut {
        config: resolved.echo,
        n: state.len(),
        log_evidence: state.log_evidence()?,
        tree: TreeReport::new(&result, &state),
        leaves,
    })
}

fn tune(args: AnalyseArgs) -> Result<Value, CliError> {
    let (series, _) = load_series(&args.data)?;
    let resolved = resolve_model("tune", Some(&args.data), &args.model, &series)?;
    to_value(TuneOut {
        chosen: ChosenOut {
            thresholds: resolved.echo.thresholds.clone(),
            order: resolved.echo.order,
        },
        config: resolved.echo,
        table: resolved.table,
    })
}

fn forecast(args: ForecastArgs) -> Result<Value, CliError> {
    let (levels_or_series, first_row) = {
        let ingested = ingest::read_series(&args.data.input, &Column::parse(&args.data.column))?;
        (ingested.series, ingested.first_row)
    };
    let series = ingest::transform(&levels_or_series, args.data.transform, first_row)?;
    let refit = !args.no_refit;

    // tune on the training split only; thresholds stay fixed afterwards
    let n_train = (args.split * series.len() as f64).floor() as usize;
    if n_train == 0 || n_train >= series.len() {
        return Err(CliError::usage(format!(
            "split {} leaves no usable train/test partition",
            args.split
        )));
    }
    let mut resolved = resolve_model(
        "forecast",
        Some(&args.data),
        &args.model,
        &series[..n_train],
    )?;
    resolved.echo.split = Some(args.split);
    resolved.echo.refit = Some(refit);
    resolved.echo.invert_transform = Some(args.invert_transform);

    let report = rolling_forecast(&series, args.split, &resolved.config, refit)?;
    let invert = args.invert_transform && args.data.transform != TransformKind::None;
    let steps: Vec<StepOut> = report
        .steps
        .iter()
        .map(|s| {
            if invert {
                // transformed index t targets level t+1; the level at t is
                // the last observed one
                let last_level = levels_or_series[s.index];
                let forecast = ingest::invert_step(args.data.transform, last_level, s.forecast);
                let actual = levels_or_series[s.index + 1];
                StepOut {
                    index: s.index + 1,
                    forecast,
                    actual,
                    squared_error: (forecast - actual) * (forecast - actual),
                    map_leaves: s.map_leaves.clone(),
                    elapsed_ms: s.elapsed_ms,
                }
            } else {
                StepOut {
                    index: s.index,
                    forecast: s.forecast,
                    actual: s.actual,
                    squared_error: s.squared_error,
                    map_leaves: s.map_leaves.clone(),
                    elapsed_ms: s.elapsed_ms,
                }
            }
        })
        .collect();
    let mse = steps.iter().map(|s| s.squared_error).sum::<f64>() / steps.len() as f64;
    to_value(ForecastOut {
        config: resolved.echo,
        n_train: report.n_train,
        n_test: report.n_test,
        refit,
        mse,
        steps,
    })
}

fn simulate(args: SimulateArgs) -> Result<Value, CliError> {
    let model = model_file::load_model(&args.model)?;
    let init: Option<Vec<f64>> = match &args.init {
        Some(spec) => Some(
            spec.split(',')
                .map(|cell| {
                    cell.trim()
                        .parse::<f64>()
                        .map_err(|_| CliError::usage(format!("bad init value {cell:?}")))
                })
                .collect::<Result<Vec<f64>, CliError>>()?,
        ),
        None => None,
    };
    let series = model.simulate(args.n, args.seed, init.as_deref())?;

    let mut file = std::fs::File::create(&args.out)
        .map_err(|e| CliError::io(format!("cannot create {}: {e}", args.out.display())))?;
    for x in &series {
        // 17 significant digits: parses back to the identical f64
        writeln!(file, "{x:.16e}")
            .map_err(|e| CliError::io(format!("write to {}: {e}", args.out.display())))?;
    }

    let echo = SimulateConfigEcho {
        command: "simulate",
        model: args.model.display().to_string(),
        m: model.tree().m(),
        depth: model.tree().depth(),
        thresholds: model.quantiser().thresholds().to_vec(),
        order: model.order(),
        intercept: model.intercept(),
        n: args.n,
        seed: args.seed,
        init,
    };
    to_value(SimulateOut {
        config: echo,
        n: args.n,
        out: args.out.display().to_string(),
    })
}
