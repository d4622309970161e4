//! Subcommand definitions and runners.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mjp_core::bridge::{
    run_bridge_pf, run_conditioned_is, run_myopic_is, BridgeConfig, Problem, Resampling, SamplerOptions, WeightFn,
};
use mjp_core::inference::{
    empirical_covariance, loglik_replicates, pmmh, run_filter, sample_variance, CoordinateSummary, InitialState,
    Method, ObservationSeries, PmmhConfig, Prior,
};
use mjp_core::linalg::cholesky_in_place;
use mjp_core::models::{quantile, transition_distribution, DEFAULT_CAP};
use mjp_core::{simulate, ObservationModel, RateConstants, RngStream, State};
use serde::Serialize;
use serde_json::json;

use crate::data::{read_series, write_series};
use crate::error::CliError;
use crate::model_file::ModelFile;
use crate::output::{ensure_dir, num, write_json, write_manifest, write_timing, InputRecord};

#[derive(Debug, Parser)]
#[command(name = "mjp", version, about = "Simulation and inference for stochastic kinetic models")]
pub struct Cli {
    /// Worker threads for particle propagation (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate paths with Gillespie's direct method.
    Simulate(SimulateArgs),
    /// Estimate a transition probability over repeated sampler runs.
    Transition(TransitionArgs),
    /// Estimate the marginal likelihood of a data set.
    Filter(FilterArgs),
    /// Particle marginal Metropolis-Hastings for the rate constants.
    Pmmh(PmmhArgs),
    /// Birth-death transition-probability benchmark over methods, N and t.
    BenchBd(BenchArgs),
    /// Log-likelihood estimator variance against the particle count.
    Tune(TuneArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    Mis,
    Ch,
    BpfCle,
    BpfLna,
}

impl MethodArg {
    fn label(self) -> &'static str {
        match self {
            MethodArg::Mis => "mis",
            MethodArg::Ch => "ch",
            MethodArg::BpfCle => "bpf-cle",
            MethodArg::BpfLna => "bpf-lna",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SamplerArgs {
    #[arg(long, value_enum, default_value = "ch")]
    pub method: MethodArg,
    /// Resample when ESS < beta * N (bridge filter).
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    /// Tempering exponent of the look-ahead densities (bridge filter).
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Spacing of resampling times (bridge filter); defaults depend on the model.
    #[arg(long)]
    pub dt_resample: Option<f64>,
    /// Number of sub-intervals per observation interval; overrides --dt-resample.
    #[arg(long)]
    pub n_intermediate: Option<usize>,
    /// Use systematic instead of multinomial resampling.
    #[arg(long)]
    pub systematic: bool,
    /// Lower bound of the conditioned hazard as a fraction of the hazard.
    #[arg(long, default_value_t = 0.0)]
    pub ch_floor: f64,
}

impl SamplerArgs {
    fn options(&self, keep_paths: bool) -> SamplerOptions {
        SamplerOptions {
            keep_paths,
            resampling: if self.systematic { Resampling::Systematic } else { Resampling::Multinomial },
            parallel: true,
            ch_floor: self.ch_floor,
        }
    }

    /// Sampler for intervals of length `interval`. Resampling steps default
    /// to 0.02 for intervals up to 0.1 and 0.05 above for single-species
    /// models, and 0.2 otherwise.
    fn method(&self, interval: f64, n_species: usize) -> Result<Method, CliError> {
        let weight_fn = match self.method {
            MethodArg::Mis => return Ok(Method::Mis),
            MethodArg::Ch => return Ok(Method::Ch),
            MethodArg::BpfCle => WeightFn::Cle,
            MethodArg::BpfLna => WeightFn::Lna,
        };
        let n_intermediate = match (self.n_intermediate, self.dt_resample) {
            (Some(n), _) => n,
            (None, Some(dt)) if dt > 0.0 => BridgeConfig::partition_for(interval, dt),
            (None, Some(dt)) => return Err(CliError::Usage(format!("--dt-resample must be positive, got {dt}"))),
            (None, None) => {
                let dt = match (n_species, interval <= 0.1 + 1e-12) {
                    (1, true) => 0.02,
                    (1, false) => 0.05,
                    _ => 0.2,
                };
                BridgeConfig::partition_for(interval, dt)
            }
        };
        let cfg = BridgeConfig { n_intermediate, beta: self.beta, gamma: self.gamma, weight_fn, resample_initial: false };
        cfg.validate()?;
        Ok(Method::Bpf(cfg))
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// Built-in model name or TOML model file.
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub t_end: f64,
    #[arg(long, default_value_t = 1)]
    pub paths: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Initial counts, comma separated; defaults to the model's initial state.
    #[arg(long, value_delimiter = ',')]
    pub x0: Option<Vec<i64>>,
    /// Also write noisy observations every this many time units.
    #[arg(long)]
    pub observe_every: Option<f64>,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TransitionArgs {
    #[arg(long)]
    pub model: String,
    /// Time horizon.
    #[arg(long)]
    pub t: f64,
    #[arg(long, value_delimiter = ',')]
    pub x0: Option<Vec<i64>>,
    /// End state (comma separated counts) or, for one species, `upper99`,
    /// `lower1` or `q<level>` such as `q0.95`.
    #[arg(long)]
    pub target: String,
    #[arg(long, default_value_t = 500)]
    pub particles: usize,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct FilterArgs {
    #[arg(long)]
    pub model: String,
    /// CSV with header `time,y1,...,yp`.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub x0: Option<Vec<i64>>,
    #[arg(long, default_value_t = 100)]
    pub particles: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PmmhArgs {
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub x0: Option<Vec<i64>>,
    #[arg(long, default_value_t = 100)]
    pub particles: usize,
    #[arg(long, default_value_t = 10_000)]
    pub iters: usize,
    /// Scale of the random-walk covariance.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Reactions with unknown rates (names or 1-based indices); default all.
    #[arg(long, value_delimiter = ',')]
    pub free: Option<Vec<String>>,
    /// Lower prior bound on each free log rate.
    #[arg(long, default_value_t = -8.0, allow_hyphen_values = true)]
    pub prior_lower: f64,
    #[arg(long, default_value_t = 8.0, allow_hyphen_values = true)]
    pub prior_upper: f64,
    /// Initial log rates of the free reactions; drawn from the prior when absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub init: Option<Vec<f64>>,
    /// JSON file holding the proposal covariance as a list of rows.
    #[arg(long)]
    pub proposal_cov: Option<PathBuf>,
    /// Length of a pilot run used to estimate the proposal covariance.
    #[arg(long, default_value_t = 0)]
    pub pilot_iters: usize,
    /// Discarded iterations for the summary; defaults to a tenth of the chain.
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 100)]
    pub x0: i64,
    /// `upper` for the upper 99% quantile target, `lower` for the lower 1%.
    #[arg(long, default_value = "upper")]
    pub tail: String,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1")]
    pub times: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "10,50,100,500")]
    pub particles: Vec<usize>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "mis,ch,bpf-cle,bpf-lna")]
    pub methods: Vec<MethodArg>,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.5)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long)]
    pub dt_resample: Option<f64>,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct TuneArgs {
    #[arg(long)]
    pub model: String,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub x0: Option<Vec<i64>>,
    #[arg(long, value_delimiter = ',', default_value = "10,50,100")]
    pub particles: Vec<usize>,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    /// Log rate constants to evaluate at; defaults to the model's rates.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub theta: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[command(flatten)]
    pub sampler: SamplerArgs,
    /// Output directory.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // ignore the error if a pool already exists (library callers)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Transition(a) => cmd_transition(&a),
        Command::Filter(a) => cmd_filter(&a),
        Command::Pmmh(a) => cmd_pmmh(&a),
        Command::BenchBd(a) => cmd_bench_bd(&a),
        Command::Tune(a) => cmd_tune(&a),
    }
}

fn initial_state(model: &ModelFile, x0: &Option<Vec<i64>>) -> Result<State, CliError> {
    let s = match x0 {
        Some(v) => State::from(v.clone()),
        None => model
            .initial_state()
            .ok_or_else(|| CliError::Usage("model has no initial state; pass --x0".into()))?,
    };
    if s.len() != model.species.len() {
        return Err(CliError::Usage(format!("--x0 has {} entries, model has {} species", s.len(), model.species.len())));
    }
    Ok(State::new(s.counts)?)
}

fn model_input(spec: &str, text: &str) -> InputRecord {
    InputRecord::new("model", spec, text.as_bytes())
}

fn data_input(path: &Path) -> Result<InputRecord, CliError> {
    let bytes = std::fs::read(path)?;
    Ok(InputRecord::new("data", &path.display().to_string(), &bytes))
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let started = Instant::now();
    if !(a.t_end > 0.0) {
        return Err(CliError::Usage("--t-end must be positive".into()));
    }
    let (model, text) = ModelFile::load(&a.model)?;
    let net = model.network()?;
    let c = model.rates()?;
    let x0 = initial_state(&model, &a.x0)?;
    let dir = ensure_dir(&a.out)?;
    let master = RngStream::new(a.seed);
    let obs = match a.observe_every {
        Some(dt) if dt > 0.0 => Some((dt, model.observation_model()?)),
        Some(dt) => return Err(CliError::Usage(format!("--observe-every must be positive, got {dt}"))),
        None => None,
    };
    for k in 0..a.paths {
        let traj = simulate(&net, &c, &x0, 0.0, a.t_end, &mut master.substream_path(&[0, k as u64]))?;
        let mut events = Vec::new();
        traj.write_csv(&mut events)?;
        std::fs::write(dir.join(format!("path_{}_events.csv", k + 1)), events)?;
        let mut states = Vec::new();
        traj.write_states_csv(&net, &mut states)?;
        std::fs::write(dir.join(format!("path_{}_states.csv", k + 1)), states)?;
        if let Some((dt, obs)) = &obs {
            let series = observe(&traj, &net, obs, *dt, &mut master.substream_path(&[1, k as u64]))?;
            write_series(&dir.join(format!("path_{}_data.csv", k + 1)), &series)?;
        }
    }
    write_manifest(&dir, "simulate", a.seed, a, vec![model_input(&a.model, &text)])?;
    write_timing(&dir, started.elapsed().as_secs_f64(), json!({}))
}

/// Noisy observations of `traj` at `0, dt, 2dt, ...` up to its end.
fn observe(
    traj: &mjp_core::Trajectory,
    net: &mjp_core::ReactionNetwork,
    obs: &ObservationModel,
    dt: f64,
    rng: &mut RngStream,
) -> Result<ObservationSeries, CliError> {
    let p = obs.dim();
    let mut l = obs.sigma().to_vec();
    let noisy = !obs.is_error_free() && cholesky_in_place(&mut l, p);
    let mut times = Vec::new();
    let mut ys = Vec::new();
    let mut k = 0usize;
    loop {
        let t = k as f64 * dt;
        if t > traj.t_end + 1e-9 {
            break;
        }
        let t = t.min(traj.t_end);
        let x = traj.state_at(net, t)?;
        let mut y = vec![0.0; p];
        obs.project_counts(&x.counts, &mut y);
        if noisy {
            let z: Vec<f64> = (0..p).map(|_| rng.standard_normal()).collect();
            for a in 0..p {
                y[a] += (0..=a).map(|b| l[a * p + b] * z[b]).sum::<f64>();
            }
        }
        times.push(t);
        ys.push(y);
        k += 1;
    }
    Ok(ObservationSeries::new(times, ys, obs.clone())?)
}

/// Summary of replicate transition-probability estimates.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateStats {
    pub nonzero: usize,
    pub ess: f64,
    pub mean: f64,
    pub se: f64,
    pub mse: Option<f64>,
}

pub fn estimate_stats(estimates: &[f64], oracle: Option<f64>) -> EstimateStats {
    let m = estimates.len() as f64;
    let mean = estimates.iter().sum::<f64>() / m;
    let se = (sample_variance(estimates) / m).sqrt();
    EstimateStats {
        nonzero: estimates.iter().filter(|&&e| e > 0.0).count(),
        ess: mjp_core::bridge::ess(estimates),
        mean,
        se,
        mse: oracle.map(|pi| estimates.iter().map(|e| (e - pi).powi(2)).sum::<f64>() / m),
    }
}

/// `m` independent estimates of `p(y_t | x_0)`; replicate `r` uses substream `r`.
pub fn transition_estimates(
    method: &Method,
    problem: &Problem<'_>,
    x0: &State,
    n: usize,
    reps: usize,
    options: &SamplerOptions,
    rng: &RngStream,
) -> Result<Vec<f64>, CliError> {
    let starts = std::slice::from_ref(x0);
    (0..reps)
        .map(|r| {
            let stream = rng.substream(r as u64);
            let out = match method {
                Method::Mis => run_myopic_is(problem, starts, n, options, &stream)?,
                Method::Ch => run_conditioned_is(problem, starts, n, options, &stream)?,
                Method::Bpf(cfg) => run_bridge_pf(problem, starts, n, cfg, options, &stream)?,
            };
            Ok(out.z_hat())
        })
        .collect()
}

fn parse_target(spec: &str, x0: &State, dist: Option<&[f64]>) -> Result<State, CliError> {
    let level = match spec {
        "upper99" => Some(0.99),
        "lower1" => Some(0.01),
        s if s.starts_with('q') => {
            Some(s[1..].parse::<f64>().map_err(|_| CliError::Usage(format!("bad quantile target '{s}'")))?)
        }
        _ => None,
    };
    match (level, dist) {
        (Some(q), Some(d)) => Ok(State::from(vec![quantile(d, q) as i64])),
        (Some(_), None) => Err(CliError::Usage("quantile targets need a single-species model".into())),
        (None, _) => {
            let v = spec
                .split(',')
                .map(|s| s.trim().parse::<i64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| CliError::Usage(format!("bad target '{spec}'")))?;
            if v.len() != x0.len() {
                return Err(CliError::Usage(format!("target has {} entries, model has {} species", v.len(), x0.len())));
            }
            Ok(State::from(v))
        }
    }
}

fn cmd_transition(a: &TransitionArgs) -> Result<(), CliError> {
    let started = Instant::now();
    if !(a.t > 0.0) || a.reps == 0 || a.particles == 0 {
        return Err(CliError::Usage("--t, --reps and --particles must be positive".into()));
    }
    let (model, text) = ModelFile::load(&a.model)?;
    let net = model.network()?;
    let c = model.rates()?;
    let x0 = initial_state(&model, &a.x0)?;
    let dist = if net.n_species() == 1 {
        Some(transition_distribution(&net, &c, x0.counts[0], a.t, DEFAULT_CAP)?)
    } else {
        None
    };
    let target = parse_target(&a.target, &x0, dist.as_deref())?;
    let oracle = dist.as_ref().map(|d| d.get(target.counts[0] as usize).copied().unwrap_or(0.0));
    let obs = ObservationModel::identity(net.n_species(), 0.0)?;
    let y: Vec<f64> = target.counts.iter().map(|&v| v as f64).collect();
    let problem = Problem { net: &net, c: &c, obs: &obs, y: &y, start: 0.0, end: a.t };
    let method = a.sampler.method(a.t, net.n_species())?;
    let est = transition_estimates(&method, &problem, &x0, a.particles, a.reps, &a.sampler.options(false), &RngStream::new(a.seed))?;
    let st = estimate_stats(&est, oracle);
    let dir = ensure_dir(&a.out)?;
    let target_str = target.counts.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
    let mut csv = String::from("method,particles,t,target,reps,nonzero,ess,mean,se");
    if oracle.is_some() {
        csv.push_str(",mse,oracle");
    }
    csv.push('\n');
    csv.push_str(&format!(
        "{},{},{},{},{},{},{},{},{}",
        a.sampler.method.label(),
        a.particles,
        num(a.t),
        target_str,
        a.reps,
        st.nonzero,
        num(st.ess),
        num(st.mean),
        num(st.se)
    ));
    if let (Some(mse), Some(pi)) = (st.mse, oracle) {
        csv.push_str(&format!(",{},{}", num(mse), num(pi)));
    }
    csv.push('\n');
    std::fs::write(dir.join("stats.csv"), csv)?;
    let mut rows = String::from("rep,estimate\n");
    for (r, e) in est.iter().enumerate() {
        rows.push_str(&format!("{},{}\n", r + 1, num(*e)));
    }
    std::fs::write(dir.join("estimates.csv"), rows)?;
    write_manifest(&dir, "transition", a.seed, a, vec![model_input(&a.model, &text)])?;
    write_timing(&dir, started.elapsed().as_secs_f64(), json!({}))
}

fn max_interval(series: &ObservationSeries) -> f64 {
    series.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max).max(1e-12)
}

fn cmd_filter(a: &FilterArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let (model, text) = ModelFile::load(&a.model)?;
    let net = model.network()?;
    let c = model.rates()?;
    let x0 = initial_state(&model, &a.x0)?;
    let series = read_series(&a.data, &model.observation_model()?)?;
    let method = a.sampler.method(max_interval(&series), net.n_species())?;
    let out = run_filter(
        &method,
        &net,
        &c,
        &series,
        &InitialState::Fixed(x0),
        a.particles,
        &a.sampler.options(false),
        &RngStream::new(a.seed),
    )?;
    let dir = ensure_dir(&a.out)?;
    write_json(
        &dir.join("summary.json"),
        &json!({
            "method": a.sampler.method.label(),
            "particles": a.particles,
            "log_likelihood": out.log_lik,
            "increments": out.increments,
        }),
    )?;
    let mut csv = model.species.join(",");
    csv.push('\n');
    for p in &out.particles {
        csv.push_str(&p.counts.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
        csv.push('\n');
    }
    std::fs::write(dir.join("particles.csv"), csv)?;
    write_manifest(&dir, "filter", a.seed, a, vec![model_input(&a.model, &text), data_input(&a.data)?])?;
    write_timing(&dir, started.elapsed().as_secs_f64(), json!({}))
}

fn free_indices(model: &ModelFile, free: &Option<Vec<String>>) -> Result<Vec<usize>, CliError> {
    let v = model.reactions.len();
    let Some(list) = free else {
        return Ok((0..v).collect());
    };
    list.iter()
        .map(|s| {
            if let Some(i) = model.reactions.iter().position(|r| &r.name == s) {
                return Ok(i);
            }
            match s.parse::<usize>() {
                Ok(i) if (1..=v).contains(&i) => Ok(i - 1),
                _ => Err(CliError::Usage(format!("--free: unknown reaction '{s}'"))),
            }
        })
        .collect()
}

fn read_matrix(path: &Path, d: usize) -> Result<Vec<f64>, CliError> {
    let rows: Vec<Vec<f64>> = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(CliError::Usage(format!("{}: expected a {d}x{d} matrix", path.display())));
    }
    Ok(rows.into_iter().flatten().collect())
}

fn rows(flat: &[f64], d: usize) -> Vec<Vec<f64>> {
    flat.chunks(d).map(|r| r.to_vec()).collect()
}

fn cmd_pmmh(a: &PmmhArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let (model, text) = ModelFile::load(&a.model)?;
    let net = model.network()?;
    let c = model.rates()?;
    let x0 = initial_state(&model, &a.x0)?;
    let series = read_series(&a.data, &model.observation_model()?)?;
    let free = free_indices(&model, &a.free)?;
    let d = free.len();
    let prior = Prior::partial(free.clone(), vec![a.prior_lower; d], vec![a.prior_upper; d])?;
    let method = a.sampler.method(max_interval(&series), net.n_species())?;
    let base = if d < net.n_reactions() { Some(RateConstants::new(c.as_slice().to_vec())?) } else { None };
    let init = match &a.init {
        Some(v) if v.len() != d => return Err(CliError::Usage(format!("--init needs {d} values"))),
        other => other.clone(),
    };
    let x0 = InitialState::Fixed(x0);
    let master = RngStream::new(a.seed);
    let dir = ensure_dir(&a.out)?;
    let mut inputs = vec![model_input(&a.model, &text), data_input(&a.data)?];

    let mut cfg = PmmhConfig {
        method,
        n_particles: a.particles,
        iterations: a.iters,
        lambda: a.lambda,
        proposal_cov: (0..d * d).map(|k| if k % (d + 1) == 0 { 0.01 } else { 0.0 }).collect(),
        options: a.sampler.options(false),
        base,
    };
    if let Some(path) = &a.proposal_cov {
        cfg.proposal_cov = read_matrix(path, d)?;
        inputs.push(InputRecord::new("proposal_cov", &path.display().to_string(), &std::fs::read(path)?));
    }
    let mut init = init;
    if a.pilot_iters > 0 {
        let pilot_cfg = PmmhConfig { iterations: a.pilot_iters, lambda: 1.0, ..cfg.clone() };
        let pilot = pmmh(&pilot_cfg, &net, &series, &x0, &prior, init.clone(), &master.substream(1))?;
        let kept = &pilot.thetas[pilot.len() / 5..];
        let cov = empirical_covariance(kept)?;
        let mut check = cov.clone();
        if cholesky_in_place(&mut check, d) {
            cfg.proposal_cov = cov;
        }
        init = pilot.thetas.last().cloned();
        write_json(&dir.join("pilot_cov.json"), &rows(&cfg.proposal_cov, d))?;
    }
    let chain = pmmh(&cfg, &net, &series, &x0, &prior, init, &master.substream(0))?;

    let mut csv = String::from("iter,accepted,loglik_hat");
    for k in 1..=d {
        csv.push_str(&format!(",theta_{k}"));
    }
    csv.push('\n');
    for m in 0..chain.len() {
        csv.push_str(&format!("{},{},{}", m + 1, u8::from(chain.accepted[m]), num(chain.loglik_hats[m])));
        for t in &chain.thetas[m] {
            csv.push(',');
            csv.push_str(&num(*t));
        }
        csv.push('\n');
    }
    std::fs::write(dir.join("chain.csv"), csv)?;

    let burn_in = a.burn_in.unwrap_or(a.iters / 10).min(chain.len());
    let coords: Vec<serde_json::Value> = (0..d)
        .map(|j| {
            let s = CoordinateSummary::of(&chain.coordinate(j, burn_in, a.thin));
            json!({
                "reaction": model.reactions[free[j]].name,
                "mean": s.mean, "sd": s.sd,
                "q2.5": s.q025, "q50": s.q50, "q97.5": s.q975,
                "ess": s.ess,
            })
        })
        .collect();
    let ess_min = coords.iter().filter_map(|v| v["ess"].as_f64()).fold(f64::INFINITY, f64::min);
    write_json(
        &dir.join("summary.json"),
        &json!({
            "method": a.sampler.method.label(),
            "particles": a.particles,
            "iterations": a.iters,
            "burn_in": burn_in,
            "thin": a.thin,
            "acceptance_rate": chain.acceptance_rate(),
            "filter_calls": chain.filter_calls,
            "coordinates": coords,
            "ess_min": ess_min,
        }),
    )?;
    write_manifest(&dir, "pmmh", a.seed, a, inputs)?;
    let secs = started.elapsed().as_secs_f64();
    write_timing(&dir, secs, json!({ "ess_min_per_second": ess_min / secs }))
}

fn cmd_bench_bd(a: &BenchArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let level = match a.tail.as_str() {
        "upper" => 0.99,
        "lower" => 0.01,
        other => return Err(CliError::Usage(format!("--tail must be 'upper' or 'lower', got '{other}'"))),
    };
    if a.reps == 0 || a.x0 < 0 {
        return Err(CliError::Usage("--reps must be positive and --x0 non-negative".into()));
    }
    let (net, c, _) = mjp_core::models::birth_death();
    let x0 = State::from(vec![a.x0]);
    let obs = ObservationModel::identity(1, 0.0)?;
    let master = RngStream::new(a.seed);
    let mut csv = String::from("method,particles,t,target,oracle,nonzero,ess,mean,se,mse\n");
    for (ti, &t) in a.times.iter().enumerate() {
        if !(t > 0.0) {
            return Err(CliError::Usage("--times must be positive".into()));
        }
        let dist = transition_distribution(&net, &c, a.x0, t, DEFAULT_CAP)?;
        let target = quantile(&dist, level);
        let pi = dist[target];
        let y = [target as f64];
        let problem = Problem { net: &net, c: &c, obs: &obs, y: &y, start: 0.0, end: t };
        for (mi, &m) in a.methods.iter().enumerate() {
            let sampler = SamplerArgs {
                method: m,
                beta: a.beta,
                gamma: a.gamma,
                dt_resample: a.dt_resample,
                n_intermediate: None,
                systematic: false,
                ch_floor: 0.0,
            };
            let method = sampler.method(t, 1)?;
            for (ni, &n) in a.particles.iter().enumerate() {
                let stream = master.substream_path(&[ti as u64, mi as u64, ni as u64]);
                let est = transition_estimates(&method, &problem, &x0, n, a.reps, &SamplerOptions::lean(), &stream)?;
                let st = estimate_stats(&est, Some(pi));
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    m.label(),
                    n,
                    num(t),
                    target,
                    num(pi),
                    st.nonzero,
                    num(st.ess),
                    num(st.mean),
                    num(st.se),
                    num(st.mse.unwrap_or(f64::NAN))
                ));
            }
        }
    }
    let dir = ensure_dir(&a.out)?;
    std::fs::write(dir.join("table.csv"), csv)?;
    write_manifest(&dir, "bench-bd", a.seed, a, Vec::new())?;
    write_timing(&dir, started.elapsed().as_secs_f64(), json!({}))
}

fn cmd_tune(a: &TuneArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let (model, text) = ModelFile::load(&a.model)?;
    let net = model.network()?;
    let x0 = InitialState::Fixed(initial_state(&model, &a.x0)?);
    let series = read_series(&a.data, &model.observation_model()?)?;
    let c = match &a.theta {
        Some(t) if t.len() != net.n_reactions() => {
            return Err(CliError::Usage(format!("--theta needs {} values", net.n_reactions())))
        }
        Some(t) => RateConstants::from_log(t)?,
        None => model.rates()?,
    };
    if a.reps < 20 {
        return Err(CliError::Usage("--reps must be at least 20".into()));
    }
    let method = a.sampler.method(max_interval(&series), net.n_species())?;
    let master = RngStream::new(a.seed);
    let mut csv = String::from("particles,tau2,mean_loglik,finite\n");
    for (k, &n) in a.particles.iter().enumerate() {
        let lls = loglik_replicates(&method, &net, &c, &series, &x0, n, a.reps, &a.sampler.options(false), &master.substream(k as u64))?;
        let finite: Vec<f64> = lls.iter().copied().filter(|l| l.is_finite()).collect();
        let tau2 = if finite.len() == lls.len() { sample_variance(&lls) } else { f64::INFINITY };
        let mean = finite.iter().sum::<f64>() / finite.len().max(1) as f64;
        csv.push_str(&format!("{},{},{},{}\n", n, num(tau2), num(mean), finite.len()));
    }
    let dir = ensure_dir(&a.out)?;
    std::fs::write(dir.join("tau2.csv"), csv)?;
    write_manifest(&dir, "tune", a.seed, a, vec![model_input(&a.model, &text), data_input(&a.data)?])?;
    write_timing(&dir, started.elapsed().as_secs_f64(), json!({}))
}
