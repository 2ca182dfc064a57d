use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use newsamp_core::data::{load_libsvm, parse_csv, standardize, write_csv};
use newsamp_core::linalg::sym_eigen;
use newsamp_core::newsamp::{self, adaptive_step};
use newsamp_core::theory::{self, C_ABS_S1, C_ABS_S2};
use newsamp_core::{
    generate_spiked, reference_solution, run_baseline, BaselineConfig, CoefficientReport, Dataset,
    DMatrix, DVector, NewSampConfig, Objective, SampleScheme, SchemeFamily, StepMode, SymMatrix, Termination,
    Trace,
};

use crate::config::{DataFormat, Method, MethodSpec, RunConfig};

/// Gradient-norm tolerance of the reference solve.
const REFERENCE_TOL: f64 = 1e-12;
const REFERENCE_MAX_ITERS: usize = 200;

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
        }
        _ => Ok(()),
    }
}

// ---------------------------------------------------------------- data

pub fn load_dataset(cfg: &RunConfig) -> Result<Dataset> {
    let prob = &cfg.problem;
    let ds = match (&prob.dataset, &prob.spiked) {
        (Some(path), _) => {
            let format = prob.format.unwrap_or_else(|| {
                match path.extension().and_then(|e| e.to_str()) {
                    Some("svm" | "libsvm") => DataFormat::Libsvm,
                    _ => DataFormat::Csv,
                }
            });
            match format {
                DataFormat::Csv => {
                    let text =
                        fs::read_to_string(path).with_context(|| format!("reading dataset {}", path.display()))?;
                    let width = text
                        .lines()
                        .find(|l| !l.trim().is_empty())
                        .map_or(0, |l| l.split(',').count());
                    let col = prob.label_column.unwrap_or(width.saturating_sub(1));
                    parse_csv(&text, col).with_context(|| format!("loading {}", path.display()))?
                }
                DataFormat::Libsvm => {
                    load_libsvm(path, prob.features).with_context(|| format!("loading {}", path.display()))?
                }
            }
        }
        (None, Some(spec)) => generate_spiked(spec)?,
        (None, None) => bail!("no data: set problem.dataset or a [problem.spiked] table"),
    };
    Ok(if prob.standardize { standardize(&ds) } else { ds })
}

pub fn objective(cfg: &RunConfig, ds: Dataset) -> Result<Objective> {
    Ok(Objective::new(ds, cfg.problem.kind, cfg.problem.svm_penalty)?)
}

/// SHA-256 over the objective kind, penalty and the exact bits of X and y.
pub fn dataset_hash(obj: &Objective) -> String {
    let ds = obj.dataset();
    let mut h = Sha256::new();
    h.update(b"newsamp-reference-v1\0");
    h.update(obj.kind().as_str().as_bytes());
    h.update(obj.svm_penalty().unwrap_or(0.0).to_le_bytes());
    h.update((ds.n() as u64).to_le_bytes());
    h.update((ds.p() as u64).to_le_bytes());
    for v in ds.design().iter().chain(ds.labels()) {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

#[derive(Serialize, serde::Deserialize)]
struct ReferenceFile {
    hash: String,
    grad_tol: f64,
    theta: Vec<f64>,
}

/// Reads θ* from a JSON array or an object with a `theta` array.
pub fn read_theta(path: &Path, p: usize) -> Result<DVector<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading reference {}", path.display()))?;
    let value: serde_json::Value = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let arr = match &value {
        serde_json::Value::Array(_) => &value,
        serde_json::Value::Object(m) => m
            .get("theta")
            .with_context(|| format!("{} has no `theta` field", path.display()))?,
        _ => bail!("{} holds neither an array nor an object", path.display()),
    };
    let theta: Vec<f64> = serde_json::from_value(arr.clone()).with_context(|| format!("reading theta from {}", path.display()))?;
    if theta.len() != p {
        bail!("reference in {} has length {}, expected {p}", path.display(), theta.len());
    }
    Ok(DVector::from_vec(theta))
}

/// θ* from `problem.reference` when given, else the cached full-Newton
/// solution for this dataset (computed on first use).
pub fn reference(cfg: &RunConfig, obj: &Objective) -> Result<DVector<f64>> {
    let p = obj.dim();
    if let Some(path) = &cfg.problem.reference {
        return read_theta(path, p);
    }
    let hash = dataset_hash(obj);
    let path = cfg.output.cache_dir().join(format!("reference-{}.json", &hash[..16]));
    if path.exists() {
        let text = fs::read_to_string(&path)?;
        if let Ok(file) = serde_json::from_str::<ReferenceFile>(&text) {
            if file.hash == hash && file.theta.len() == p {
                log::info!("reference solution from {}", path.display());
                return Ok(DVector::from_vec(file.theta));
            }
        }
        log::warn!("ignoring stale reference cache {}", path.display());
    }
    log::info!("solving for the reference solution");
    let theta = reference_solution(obj, &DVector::zeros(p), REFERENCE_TOL, REFERENCE_MAX_ITERS)
        .context("reference solve failed")?;
    ensure_parent(&path)?;
    write_json(
        &path,
        &ReferenceFile {
            hash,
            grad_tol: REFERENCE_TOL,
            theta: theta.iter().copied().collect(),
        },
    )?;
    Ok(theta)
}

// ------------------------------------------------------------ running

fn run_method(
    cfg: &RunConfig,
    obj: &Objective,
    method: &Method,
    reference: Option<&DVector<f64>>,
    target: Option<f64>,
) -> Result<Trace> {
    let theta0 = DVector::zeros(obj.dim());
    let set = &cfg.set;
    let ns = |rank, scheme: &SampleScheme, step| {
        let c = NewSampConfig::new(rank, scheme.clone(), theta0.clone())
            .with_step(step)
            .with_eps(cfg.eps)
            .with_max_iters(cfg.max_iters);
        match target {
            Some(t) => c.with_target_dist(t),
            None => c,
        }
    };
    Ok(match method {
        Method::NewSamp { rank, scheme, step } => newsamp::run(obj, &ns(*rank, scheme, *step), set, reference)?,
        Method::PlainSubsampled { scheme, eta } => {
            let step = eta.map_or(StepMode::default(), |eta| StepMode::Fixed { eta });
            newsamp::plain_subsampled_newton_run(obj, &ns(1, scheme, step), set, reference)?
        }
        Method::Baseline { method, eta } => {
            let mut c = BaselineConfig::new(*method, theta0.clone())
                .with_step(*eta)
                .with_eps(cfg.eps)
                .with_max_iters(cfg.max_iters)
                .with_seed(cfg.seed);
            if let Some(t) = target {
                c = c.with_target_dist(t);
            }
            run_baseline(obj, &c, set, reference)?
        }
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GridEntry {
    pub eta: f64,
    pub converged: bool,
    pub iterations: usize,
    pub final_f: Option<f64>,
}

/// Iterations to convergence: to `tol` in distance when given, else to the
/// ε stopping rule.
fn convergence(trace: &Trace, tol: Option<f64>) -> Option<usize> {
    match tol {
        Some(tol) => trace.iterations_to(tol),
        None => matches!(trace.termination, Termination::EpsReached | Termination::TargetReached)
            .then(|| trace.iterations()),
    }
}

pub struct Outcome {
    pub trace: Trace,
    pub eta: Option<f64>,
    pub grid: Vec<GridEntry>,
}

/// Runs one method, sweeping `step_grid` when configured and keeping the
/// fastest converging step (lowest final objective when none converges).
fn run_spec(
    cfg: &RunConfig,
    obj: &Objective,
    spec: &MethodSpec,
    reference: Option<&DVector<f64>>,
    tol: Option<f64>,
) -> Result<Outcome> {
    let method = spec.resolve(cfg.seed)?;
    let Some(grid) = &spec.step_grid else {
        let trace = run_method(cfg, obj, &method, reference, tol)?;
        return Ok(Outcome { trace, eta: None, grid: Vec::new() });
    };
    if !spec.grid_applies(&method) {
        bail!("method '{}': step_grid applies only to batch baselines with a constant step", spec.name);
    }
    if grid.is_empty() {
        bail!("method '{}': step_grid is empty", spec.name);
    }
    let mut entries = Vec::new();
    let mut best: Option<(Trace, f64, (bool, usize, f64))> = None;
    for &eta in grid {
        let trace = run_method(cfg, obj, &spec.resolve_with(cfg.seed, Some(eta))?, reference, tol)?;
        let conv = convergence(&trace, tol);
        let final_f = trace.last().map(|r| r.f).filter(|f| f.is_finite() && trace.failed().is_none());
        entries.push(GridEntry {
            eta,
            converged: conv.is_some(),
            iterations: conv.unwrap_or(trace.iterations()),
            final_f,
        });
        let key = (conv.is_none(), conv.unwrap_or(0), final_f.unwrap_or(f64::INFINITY));
        let better = best.as_ref().is_none_or(|(_, _, b)| {
            (key.0, key.1).cmp(&(b.0, b.1)).then(key.2.total_cmp(&b.2)).is_lt()
        });
        if better {
            best = Some((trace, eta, key));
        }
    }
    let (trace, eta, _) = best.expect("grid is non-empty");
    log::info!("{}: step {eta} selected from the grid", spec.label());
    Ok(Outcome { trace, eta: Some(eta), grid: entries })
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub method: String,
    pub label: String,
    pub termination: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub iterations: usize,
    pub final_f: Option<f64>,
    pub final_grad_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_dist: Option<f64>,
    /// First t with ‖θ^t − θ*‖₂ ≤ tolerance (needs a reference).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations_to_tolerance: Option<usize>,
    pub elapsed_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub step: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub grid: Vec<GridEntry>,
    pub final_theta: Vec<f64>,
}

fn summarize(spec: &MethodSpec, out: &Outcome, tol: f64) -> Summary {
    let last = out.trace.last();
    Summary {
        method: out.trace.method.clone(),
        label: spec.label().to_string(),
        termination: out.trace.termination.as_str().to_string(),
        reason: out.trace.failed().map(|e| e.to_string()),
        iterations: out.trace.iterations(),
        final_f: last.map(|r| r.f),
        final_grad_norm: last.map(|r| r.grad_norm),
        final_dist: last.and_then(|r| r.dist),
        iterations_to_tolerance: out.trace.iterations_to(tol),
        elapsed_s: last.map_or(0.0, |r| r.elapsed_s),
        step: out.eta,
        grid: out.grid.clone(),
        final_theta: last.map_or(Vec::new(), |r| r.theta.iter().copied().collect()),
    }
}

fn write_trace(trace: &Trace, path: &Path) -> Result<()> {
    ensure_parent(path)?;
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    trace.write_jsonl(&mut w)?;
    w.flush()?;
    Ok(())
}

// ------------------------------------------------------------ commands

#[derive(Debug, Serialize)]
struct GenerateReport {
    path: PathBuf,
    n: usize,
    p: usize,
    /// Leading r+1 eigenvalues of the sample covariance.
    top_eigenvalues: Vec<f64>,
}

/// Sample covariance with the n − 1 denominator.
fn sample_covariance(ds: &Dataset) -> Result<SymMatrix> {
    let x = ds.design_matrix();
    let n = ds.n();
    let mean = x.row_mean();
    let centered = DMatrix::from_fn(n, ds.p(), |i, j| x[(i, j)] - mean[j]);
    let cov = centered.transpose() * &centered / (n.max(2) - 1) as f64;
    Ok(SymMatrix::new((&cov + cov.transpose()) * 0.5)?)
}

pub fn generate(cfg: &RunConfig, out: Option<PathBuf>) -> Result<()> {
    let spec = cfg
        .problem
        .spiked
        .as_ref()
        .context("generate needs a [problem.spiked] table")?;
    let ds = generate_spiked(spec)?;
    let path = out.unwrap_or_else(|| cfg.output.or_default(&cfg.output.dataset, "dataset.csv"));
    ensure_parent(&path)?;
    write_csv(&ds, &path)?;
    let eig = sym_eigen(&sample_covariance(&ds)?);
    let k = (spec.rank() + 1).min(ds.p());
    let report = GenerateReport {
        path,
        n: ds.n(),
        p: ds.p(),
        top_eigenvalues: eig.values.iter().take(k).copied().collect(),
    };
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

pub fn optimize(cfg: &RunConfig) -> Result<()> {
    let spec = cfg.method.as_ref().context("optimize needs a [method] table")?;
    let obj = objective(cfg, load_dataset(cfg)?)?;
    let reference = match &cfg.problem.reference {
        Some(path) => Some(read_theta(path, obj.dim())?),
        None => None,
    };
    // With a reference the run also stops once within `tolerance` of it.
    let target = reference.as_ref().map(|_| cfg.tolerance);
    let out = run_spec(cfg, &obj, spec, reference.as_ref(), target)?;
    let trace_path = cfg.output.or_default(&cfg.output.trace, "trace.jsonl");
    let summary_path = cfg.output.or_default(&cfg.output.summary, "summary.json");
    write_trace(&out.trace, &trace_path)?;
    let summary = summarize(spec, &out, cfg.tolerance);
    ensure_parent(&summary_path)?;
    write_json(&summary_path, &summary)?;
    println!("{}", serde_json::to_string(&summary)?);
    match out.trace.failed() {
        Some(e) => Err(anyhow::Error::new(e.clone()).context(format!("{} failed", spec.label()))),
        None => Ok(()),
    }
}

pub fn benchmark(cfg: &RunConfig) -> Result<()> {
    if cfg.methods.len() < 2 {
        bail!(
            "benchmark needs at least two [[methods]] entries, got {}",
            cfg.methods.len()
        );
    }
    let mut labels: Vec<&str> = cfg.methods.iter().map(MethodSpec::label).collect();
    labels.sort_unstable();
    if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
        bail!("duplicate method label '{}'; set `label` to tell them apart", w[0]);
    }
    for spec in &cfg.methods {
        spec.resolve(cfg.seed)?;
    }
    let obj = objective(cfg, load_dataset(cfg)?)?;
    let theta_star = reference(cfg, &obj)?;

    let threads = match cfg.threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        t => t,
    }
    .min(cfg.methods.len());
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<Outcome>>>> =
        Mutex::new((0..cfg.methods.len()).map(|_| None).collect());
    let obj = Arc::new(obj);
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(spec) = cfg.methods.get(i) else { break };
                let r = run_spec(cfg, &obj, spec, Some(&theta_star), Some(cfg.tolerance));
                results.lock().expect("no worker panics while holding the lock")[i] = Some(r);
            });
        }
    });

    let dir = cfg.output.dir();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut table = String::from("method,iterations,elapsed_s,final_dist,final_f,termination,step\n");
    let results = results.into_inner().expect("workers finished");
    for (spec, r) in cfg.methods.iter().zip(results) {
        let out = r.expect("every method ran")?;
        write_trace(&out.trace, &dir.join(format!("trace-{}.jsonl", spec.label())))?;
        let reached = out.trace.iterations_to(cfg.tolerance);
        let elapsed = reached
            .and_then(|t| out.trace.records.iter().find(|r| r.t == t))
            .or(out.trace.last())
            .map_or(0.0, |r| r.elapsed_s);
        let last = out.trace.last();
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:e}"));
        table.push_str(&format!(
            "{},{},{:.6},{},{},{},{}\n",
            spec.label(),
            reached.map_or(String::new(), |t| t.to_string()),
            elapsed,
            opt(last.and_then(|r| r.dist)),
            opt(last.map(|r| r.f)),
            out.trace.termination.as_str(),
            out.eta.map_or(String::new(), |e| e.to_string()),
        ));
    }
    let path = cfg.output.or_default(&cfg.output.table, "benchmark.csv");
    ensure_parent(&path)?;
    fs::write(&path, &table).with_context(|| format!("writing {}", path.display()))?;
    print!("{table}");
    Ok(())
}

#[derive(Debug, Serialize)]
struct CoeffsOutput {
    #[serde(flatten)]
    report: CoefficientReport,
    rank: usize,
    sample_size: usize,
    /// Adaptive step at θ (or the configured constant step).
    eta_suggested: f64,
    /// (K/λ_p)² log p.
    suggested_sample_size: f64,
    /// tr(H)/λ_1 of the full Hessian.
    effective_rank: f64,
    start_radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    start_radius_error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta_error: Option<String>,
}

pub fn coeffs(cfg: &RunConfig, out: Option<PathBuf>) -> Result<()> {
    let spec = cfg
        .method
        .as_ref()
        .context("coeffs needs a [method] table naming newsamp with rank and sample")?;
    let Method::NewSamp { rank, scheme, step } = spec.resolve(cfg.seed)? else {
        bail!("coeffs needs method.name = \"newsamp\", got '{}'", spec.name);
    };
    let obj = objective(cfg, load_dataset(cfg)?)?;
    let (n, p) = (obj.n(), obj.dim());
    if rank == 0 || rank >= p {
        return Err(newsamp_core::Error::InvalidRank { k: rank + 1, p }.into());
    }
    let theta = reference(cfg, &obj)?;
    let eig = sym_eigen(&obj.hessian(&theta)?);
    let values: Vec<f64> = eig.values.iter().copied().collect();
    let (lambda_p, lambda_r1) = (eig.smallest(), values[rank]);
    let size = scheme.size_at(0, n);
    let eta = match step {
        StepMode::Fixed { eta } => eta,
        StepMode::Adaptive { c_step } => adaptive_step(lambda_p.clamp(0.0, lambda_r1), lambda_r1, p, size, c_step)?,
    };
    let consts = obj.problem_constants(std::slice::from_ref(&theta));
    let (k, m) = (consts.hessian_bound, consts.hessian_lipschitz);
    let mut report = match scheme.family() {
        SchemeFamily::S1 => theory::coefficients_s1(lambda_p, lambda_r1, eta, k, m, p, size, C_ABS_S1)?,
        SchemeFamily::S2 => {
            theory::coefficients_s2(lambda_p, lambda_r1, eta, k, m, m, p, size, cfg.set.diameter(), C_ABS_S2)?
        }
    };
    report.covered &= consts.covered;

    // The drift bound is stated for quadratic objectives under S1.
    let mut delta_error = None;
    if obj.kind().is_quadratic() && scheme.family() == SchemeFamily::S1 {
        match theory::coefficient_drift_bound(lambda_p, k, p, size, 1.0, 1.0) {
            Ok(d) => report.delta = Some(d),
            Err(e) => delta_error = Some(e.to_string()),
        }
    }
    let (start_radius, start_radius_error) =
        match theory::sufficient_start_radius(report.xi1, report.xi2, report.delta.unwrap_or(0.0)) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
    let result = CoeffsOutput {
        rank,
        sample_size: size,
        eta_suggested: eta,
        suggested_sample_size: theory::suggested_sample_size(k, lambda_p, p),
        effective_rank: theory::effective_rank(&values),
        start_radius: start_radius.filter(|r| r.is_finite()),
        start_radius_error,
        delta_error,
        report,
    };
    let path = out.unwrap_or_else(|| cfg.output.or_default(&cfg.output.report, "coeffs.json"));
    ensure_parent(&path)?;
    write_json(&path, &result)?;
    println!("{}", serde_json::to_string(&result)?);
    Ok(())
}
