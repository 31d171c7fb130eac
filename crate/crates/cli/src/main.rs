use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use attack_synth::constraint::{parse_constraint, Domain, LengthMode, Signature};
use attack_synth::count::{model_count, DfaCache};
use attack_synth::engine::{run_attack, Budgets, KnowledgeState, Strategy};
use attack_synth::info::log2_count;
use attack_synth::targets::{builtin, Target, BUILTIN_NAMES};
use attack_synth::SaParams;
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Keeps the secret draw independent of the strategy's random choices.
const SECRET_STREAM: u64 = 0x5ec2_e75e_ed00_0001;

#[derive(Parser)]
#[command(name = "attack-synth", version, about = "Synthesize adaptive side-channel attacks on string programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run attack synthesis against one secret.
    Synthesize(SynthesizeArgs),
    /// Count the models of a formula.
    Count(CountArgs),
    /// Audit a target's path constraints.
    Validate(ValidateArgs),
    /// Write the built-in targets as DSL files.
    ExportTargets {
        #[arg(long, default_value = "targets")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct TargetArgs {
    /// Built-in name or path to a DSL file.
    #[arg(long)]
    target: String,
    /// Secret length for built-in targets.
    #[arg(long)]
    length: Option<usize>,
    /// Cost-clustering threshold.
    #[arg(long)]
    delta: Option<u64>,
}

#[derive(Args)]
struct SynthesizeArgs {
    #[command(flatten)]
    target: TargetArgs,
    /// Secret value; drawn uniformly from the seed when absent.
    #[arg(long)]
    secret: Option<String>,
    #[arg(long, default_value = "sa-inc")]
    strategy: Strategy,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    max_steps: usize,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    time_budget: Option<f64>,
    #[arg(long, default_value_t = 10.0)]
    t0: f64,
    #[arg(long, default_value_t = 0.001)]
    tmin: f64,
    #[arg(long, default_value_t = 0.1)]
    cooling: f64,
    #[arg(long)]
    trace_out: Option<PathBuf>,
    #[arg(long)]
    report_out: Option<PathBuf>,
    /// Directory for DOT dumps of the class and final knowledge automata.
    #[arg(long)]
    emit_dot: Option<PathBuf>,
    /// Recount every incremental query from scratch and fail on disagreement.
    #[arg(long)]
    verify_incremental: bool,
    /// Empty the automaton cache before every step.
    #[arg(long)]
    reset_cache: bool,
}

#[derive(Args)]
struct CountArgs {
    /// File holding one formula over `h` and `l`.
    file: PathBuf,
    /// `digits`, `upper`, or the literal symbols.
    #[arg(long, default_value = "digits")]
    alphabet: String,
    #[arg(long, default_value_t = 4)]
    length: usize,
    /// Admit every length up to the bound.
    #[arg(long)]
    up_to: bool,
    /// Tracks to count over; defaults to the free variables, or `h`.
    #[arg(long, value_delimiter = ',')]
    vars: Vec<String>,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    target: TargetArgs,
    #[arg(long, default_value_t = 300)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn load_target(args: &TargetArgs) -> Result<Target> {
    let target = if BUILTIN_NAMES.contains(&args.target.as_str()) {
        builtin(&args.target, args.length)?
    } else {
        let path = Path::new(&args.target);
        let text = fs::read_to_string(path).with_context(|| format!("reading target {}", path.display()))?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("target");
        Target::from_dsl(name, &text, None).with_context(|| format!("loading {}", path.display()))?
    };
    Ok(match args.delta {
        Some(d) => target.with_delta(d),
        None => target,
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn synthesize(args: SynthesizeArgs) -> Result<u8> {
    let target = load_target(&args.target)?;
    let attack = target.attack()?;
    let params = SaParams::new(args.t0, args.tmin, args.cooling)?;
    if args.max_steps == 0 {
        bail!("--max-steps must be positive");
    }
    let time_budget = match args.time_budget {
        Some(s) if !(s > 0.0 && s.is_finite()) => bail!("--time-budget must be a positive number of seconds"),
        other => other.map(Duration::from_secs_f64),
    };
    let budgets = Budgets {
        max_steps: args.max_steps,
        time_budget,
        reset_cache_each_step: args.reset_cache,
        verify_incremental: args.verify_incremental,
        ..Budgets::default()
    };
    let cache = DfaCache::new();
    let secret = match args.secret {
        Some(s) => s,
        None => {
            let k: KnowledgeState = KnowledgeState::initial(&attack, &cache)?;
            let mut rng = ChaCha8Rng::seed_from_u64(args.seed ^ SECRET_STREAM);
            let mut asg = k.dfa.sample_model(&mut rng)?;
            asg.remove(attack.high()).context("sampled assignment lacks the secret")?
        }
    };
    attack
        .domain()
        .validate(attack.high(), &secret)
        .with_context(|| format!("secret {secret:?} is outside the target domain"))?;

    let trace = run_attack(&attack, &secret, args.strategy, &params, &budgets, args.seed, &cache)?;

    let csv = trace.to_csv();
    match &args.trace_out {
        Some(p) => write(p, &csv)?,
        None => print!("{csv}"),
    }
    if let Some(p) = &args.report_out {
        let mut report = serde_json::to_value(&trace)?;
        report["target"] = target.name.clone().into();
        report["queries"] = trace.cache.queries.into();
        report["exit_code"] = trace.outcome.exit_code().into();
        write(p, &serde_json::to_string_pretty(&report)?)?;
    }
    if let Some(dir) = &args.emit_dot {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for class in attack.classes() {
            write(&dir.join(format!("psi_{}.dot", class.id)), &attack.psi_dfa(class.id).to_dot())?;
        }
        let mut k: KnowledgeState = KnowledgeState::initial(&attack, &cache)?;
        for row in &trace.rows {
            k = k.update(&attack, row.observation_id, &row.input, &cache)?;
        }
        write(&dir.join("knowledge.dot"), &k.dfa.to_dot())?;
    }
    eprintln!(
        "{}: {} steps, H {:.6} -> {:.6} bits, {:?}, {:.3}s",
        trace.strategy, trace.steps, trace.h_init, trace.h_final, trace.outcome, trace.wall_time_secs
    );
    Ok(trace.outcome.exit_code() as u8)
}

fn count(args: CountArgs) -> Result<u8> {
    let alphabet = match args.alphabet.as_str() {
        "digits" => "0123456789".to_string(),
        "upper" => ('A'..='Z').collect(),
        other => other.to_string(),
    };
    let mode = if args.up_to { LengthMode::UpTo } else { LengthMode::Exact };
    let domain = Domain::new(&alphabet, args.length, mode)?;
    let text = fs::read_to_string(&args.file).with_context(|| format!("reading {}", args.file.display()))?;
    let c = parse_constraint(text.trim(), &Signature::high_low(), &domain)
        .with_context(|| format!("parsing {}", args.file.display()))?;
    let vars: Vec<String> = if !args.vars.is_empty() {
        args.vars
    } else {
        let free: Vec<String> = c.free_variables().into_iter().map(String::from).collect();
        if free.is_empty() {
            vec!["h".into()]
        } else {
            free
        }
    };
    let tracks: Vec<&str> = vars.iter().map(String::as_str).collect();
    let n = model_count(&c, &domain, &tracks, &DfaCache::new())?.count;
    println!("count {n}");
    println!("log2 {:.6}", log2_count::<f64>(&n));
    Ok(0)
}

fn validate(args: ValidateArgs) -> Result<u8> {
    let target = load_target(&args.target)?;
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let report = target.audit(args.samples, &mut rng)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    if report.passed() {
        eprintln!("{}: ok", target.name);
        Ok(0)
    } else {
        eprintln!(
            "{}: total {}, disjoint {}, {} partition failures, {} cost mismatches",
            target.name,
            report.is_total(),
            report.is_disjoint(),
            report.partition_failures,
            report.cost_mismatches
        );
        Ok(1)
    }
}

fn export_targets(out: &Path) -> Result<u8> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    for name in BUILTIN_NAMES {
        let path = out.join(format!("{name}.dsl"));
        write(&path, &builtin(name, None)?.to_dsl())?;
        println!("{}", path.display());
    }
    Ok(0)
}

fn main() -> Result<ExitCode> {
    let code = match Cli::parse().command {
        Command::Synthesize(a) => synthesize(a)?,
        Command::Count(a) => count(a)?,
        Command::Validate(a) => validate(a)?,
        Command::ExportTargets { out } => export_targets(&out)?,
    };
    Ok(ExitCode::from(code))
}
