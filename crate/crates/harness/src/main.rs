use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use spikelearn::gen::{noisy_instance, poisson_pattern};
use spikelearn::pattern::{read_spike_csv, write_spike_csv};
use spikelearn::rules::{train_to_count, LearnerConfig, Rule};
use spikelearn::sts::{cosine_similarity, StsSolver};
use spikelearn::{calibrate_tau, simulate, simulate_clock, NeuronConfig, SpikePattern, WeightVector};
use spikelearn_harness::common::{init_weights, stream_rng};
use spikelearn_harness::{emit_results, run_experiment, ConfigOverrides, Experiment, ExperimentConfig, HarnessError, Result};

#[derive(Parser)]
#[command(name = "spikelearn", version, about = "Event-driven spiking neuron simulation and multi-spike learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate Poisson spike patterns, optionally with jitter and deletion noise.
    Gen(GenArgs),
    /// Simulate a neuron on a pattern.
    Sim(SimArgs),
    /// Critical thresholds of a pattern and their gradient check.
    Sts(StsArgs),
    /// Train a neuron to fire target spike counts on a set of patterns.
    Train(TrainArgs),
    /// Run one of the experiment families.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 500)]
    n_synapses: usize,
    #[arg(long, default_value_t = 500.0)]
    duration_ms: f64,
    #[arg(long, default_value_t = 4.0)]
    rate_hz: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0.0)]
    jitter_ms: f64,
    #[arg(long, default_value_t = 0.0)]
    p_del: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct NeuronArgs {
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    /// Decay constant; calibrated from --tau-m/--tau-s when absent.
    #[arg(long)]
    tau_ms: Option<f64>,
    #[arg(long, default_value_t = 20.0)]
    tau_m: f64,
    #[arg(long, default_value_t = 5.0)]
    tau_s: f64,
}

impl NeuronArgs {
    fn config(&self) -> Result<NeuronConfig> {
        let tau = match self.tau_ms {
            Some(t) => t,
            None => calibrate_tau(self.tau_m, self.tau_s)?,
        };
        Ok(NeuronConfig::new(self.theta, tau)?)
    }
}

#[derive(Args)]
struct WeightArgs {
    /// CSV (one weight per line) or JSON array; random when absent.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long, default_value_t = 0.01)]
    w_mean: f64,
    #[arg(long, default_value_t = 0.01)]
    w_std: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

impl WeightArgs {
    fn load(&self, n: usize) -> Result<WeightVector> {
        let w = match &self.weights {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
                if is_json(path) {
                    serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?
                } else {
                    WeightVector::from_csv(&text)?
                }
            }
            None => init_weights(n, self.w_mean, self.w_std, &mut stream_rng(self.seed, 1))?,
        };
        w.check_len(n)?;
        Ok(w)
    }
}

#[derive(Args)]
struct SimArgs {
    /// Pattern file (spike CSV or JSON); the first pattern is used.
    #[arg(long)]
    pattern: PathBuf,
    #[command(flatten)]
    weights: WeightArgs,
    #[command(flatten)]
    neuron: NeuronArgs,
    /// Use the fixed-step simulator with this step instead.
    #[arg(long)]
    clock_dt: Option<f64>,
}

#[derive(Args)]
struct StsArgs {
    #[arg(long)]
    pattern: PathBuf,
    #[command(flatten)]
    weights: WeightArgs,
    #[command(flatten)]
    neuron: NeuronArgs,
    #[arg(long, default_value_t = 20)]
    k_max: usize,
    #[arg(long, default_value_t = 1e-6)]
    xi: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Pattern file; every pattern in it is trained.
    #[arg(long)]
    pattern: PathBuf,
    /// Desired count per pattern; a single value applies to all.
    #[arg(long, value_delimiter = ',', num_args = 1.., default_value = "10")]
    targets: Vec<usize>,
    #[arg(long, default_value = "EML")]
    rule: Rule,
    #[arg(long, default_value_t = 1e-4)]
    lambda: f64,
    #[arg(long, default_value_t = 0.0)]
    mu: f64,
    #[arg(long, default_value_t = 10_000)]
    max_epochs: usize,
    #[arg(long)]
    shuffle: bool,
    #[command(flatten)]
    weights: WeightArgs,
    #[command(flatten)]
    neuron: NeuronArgs,
    /// Directory for the report and the trained weights.
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    name: Option<Experiment>,
    /// TOML file with any configuration fields; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    print_config: bool,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn load_patterns(path: &Path) -> Result<Vec<SpikePattern>> {
    if is_json(path) {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        return Ok(vec![SpikePattern::from_json(&text)?]);
    }
    let f = File::open(path).map_err(|e| HarnessError::io(path, e))?;
    let ps: Vec<SpikePattern> = read_spike_csv(BufReader::new(f))?.into_iter().map(|(_, p)| p).collect();
    if ps.is_empty() {
        return Err(HarnessError::Config(format!("{}: no patterns", path.display())));
    }
    Ok(ps)
}

fn write_out(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| HarnessError::io(path, e)),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| HarnessError::io(Path::new("<stdout>"), e)),
    }
}

fn gen(a: &GenArgs) -> Result<()> {
    let mut rng = stream_rng(a.seed, 0);
    let mut patterns = Vec::with_capacity(a.count);
    for _ in 0..a.count {
        let p = poisson_pattern(a.n_synapses, a.duration_ms, a.rate_hz, &mut rng)?;
        patterns.push(noisy_instance(&p, a.jitter_ms, a.p_del, &mut rng)?);
    }
    let text = match a.format {
        Format::Json if patterns.len() == 1 => patterns[0].to_json() + "\n",
        Format::Json => {
            let docs: Vec<serde_json::Value> = patterns
                .iter()
                .map(|p| serde_json::to_value(p).expect("pattern serializes"))
                .collect();
            serde_json::to_string(&docs).expect("patterns serialize") + "\n"
        }
        Format::Csv => {
            let mut buf = Vec::new();
            let refs: Vec<(u64, &SpikePattern)> = patterns.iter().enumerate().map(|(i, p)| (i as u64, p)).collect();
            write_spike_csv(&mut buf, &refs).expect("writing to memory");
            String::from_utf8(buf).expect("ascii")
        }
    };
    write_out(&a.out, &text)
}

fn sim(a: &SimArgs) -> Result<()> {
    let pattern = load_patterns(&a.pattern)?.swap_remove(0);
    let w = a.weights.load(pattern.n_synapses())?;
    let neuron = a.neuron.config()?;
    let doc = match a.clock_dt {
        Some(dt) => {
            let r = simulate_clock(&pattern, &w, &neuron, dt)?;
            json!({ "n_out": r.n_out, "output_times": r.output_times })
        }
        None => {
            let r = simulate(&pattern, &w, &neuron)?;
            json!({
                "n_out": r.n_out,
                "output_times": r.output_times,
                "t_ltp": r.t_ltp,
                "v_max_sub": r.v_max_sub,
                "t_ltd": r.t_ltd,
                "v_min_reset": r.v_min_reset,
            })
        }
    };
    println!("{doc}");
    Ok(())
}

fn sts(a: &StsArgs) -> Result<()> {
    let pattern = load_patterns(&a.pattern)?.swap_remove(0);
    let w = a.weights.load(pattern.n_synapses())?;
    let neuron = a.neuron.config()?;
    let solver = StsSolver::new(&pattern, neuron.tau)?;
    let mut text = String::from("k,theta_star,t_star,cosine_vs_fd\n");
    for k in 1..=a.k_max {
        let Some(p) = solver.point(w.as_slice(), k)? else {
            break;
        };
        let cos = solver
            .numerical_gradient(w.as_slice(), k, a.xi)?
            .and_then(|fd| cosine_similarity(&p.grad, &fd).ok())
            .map_or_else(|| "NA".to_string(), |c| c.to_string());
        text.push_str(&format!("{k},{},{},{cos}\n", p.theta_star, p.t_star));
    }
    write_out(&a.out, &text)
}

fn train(a: &TrainArgs) -> Result<()> {
    let patterns = load_patterns(&a.pattern)?;
    let targets = match a.targets.as_slice() {
        [t] => vec![*t; patterns.len()],
        ts if ts.len() == patterns.len() => ts.to_vec(),
        ts => {
            return Err(HarnessError::Config(format!(
                "{} targets for {} patterns",
                ts.len(),
                patterns.len()
            )))
        }
    };
    let initial = a.weights.load(patterns[0].n_synapses())?;
    let learner = LearnerConfig {
        rule: a.rule,
        lambda: a.lambda,
        mu: a.mu,
        max_epochs: a.max_epochs,
        rng_seed: a.weights.seed,
        shuffle: a.shuffle,
    };
    let report = train_to_count(&patterns, &targets, initial, &learner, &a.neuron.config()?)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| HarnessError::io(&a.out_dir, e))?;
    let report_path = a.out_dir.join("train-report.json");
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    fs::write(&report_path, text).map_err(|e| HarnessError::io(&report_path, e))?;
    let w_path = a.out_dir.join("train-weights.csv");
    fs::write(&w_path, report.final_weights.to_csv()).map_err(|e| HarnessError::io(&w_path, e))?;
    println!(
        "converged={} epochs={} report={} weights={}",
        report.converged,
        report.epochs,
        report_path.display(),
        w_path.display()
    );
    if report.converged {
        Ok(())
    } else {
        Err(HarnessError::Failed(format!("not converged after {} epochs", report.epochs)))
    }
}

fn experiment(a: &ExperimentArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => ExperimentConfig::from_toml_file(path, a.name)?,
        None => ExperimentConfig::preset(
            a.name
                .ok_or_else(|| HarnessError::Config("name an experiment or give --config".into()))?,
        ),
    };
    if let Some(name) = a.name {
        if name != cfg.experiment {
            return Err(HarnessError::Config(format!(
                "config file is for {}, not {name}",
                cfg.experiment
            )));
        }
    }
    a.overrides.apply(&mut cfg);
    cfg.validate()?;
    if a.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let output = run_experiment(&cfg)?;
    for path in emit_results(&cfg, &output, &cfg.out_dir)? {
        println!("{}", path.display());
    }
    match output.failure {
        Some(msg) => Err(HarnessError::Failed(msg)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let res = match &cli.command {
        Command::Gen(a) => gen(a),
        Command::Sim(a) => sim(a),
        Command::Sts(a) => sts(a),
        Command::Train(a) => train(a),
        Command::Experiment(a) => experiment(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
