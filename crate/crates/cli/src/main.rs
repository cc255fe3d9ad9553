use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ssat::attack::AttackType;
use ssat::evaluation::{evaluate_set, summarize};
use ssat::harness::run::{METRICS_FILE, FINAL_CKPT};
use ssat::harness::{
    attack_metrics_csv, evaluate_run, exit_code, overlay_svg, parse_pairs, run_training, ExperimentSpec, Method,
    ResultsMatrix, RunDir, EXIT_ARTIFACT, EXIT_USAGE,
};
use ssat::predictor::load_checkpoint;
use ssat::scenario::generate::template_counts;
use ssat::scenario::io::write_text;
use ssat::scenario::{export_scenes, generate_dataset, ingest_scenes, TemplateMix};
use ssat::{Error, PredictorModel, Scene};

#[derive(Parser)]
#[command(name = "ssat", version, about = "Semantics-guided adversarial training for trajectory prediction")]
struct Cli {
    /// Base seed; seeds data, model init, training and attacks unless the
    /// config sets them explicitly.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic scenes (scene file plus map file).
    Generate(GenerateArgs),
    /// Attack a checkpoint on a scene file and write per-scene metrics.
    Attack(AttackArgs),
    /// Train one method and write a run directory.
    Train(TrainArgs),
    /// Evaluate run directories into a before/after results matrix.
    Matrix(MatrixArgs),
    /// Render a results matrix as markdown tables.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    count: usize,
    /// Template weights, e.g. `straight-follow=2,turn=1`.
    #[arg(long)]
    mix: Option<String>,
    /// Scene file name inside the output directory.
    #[arg(long, default_value = "scenes.csv")]
    file: String,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    scenes: PathBuf,
    /// ade, lat-right, lat-left, lon-forward or lon-backward.
    #[arg(long, default_value = "ade")]
    attack: AttackType,
    /// Write one SVG overlay per scene under `plots/`.
    #[arg(long)]
    plots: bool,
    /// Overrides `attack.iterations`.
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    /// Training scenes; generated from the `data.*` keys when omitted.
    #[arg(long)]
    scenes: Option<PathBuf>,
    /// Start from this checkpoint instead of a fresh model.
    #[arg(long)]
    init: Option<PathBuf>,
    /// Overrides `experiment.method`.
    #[arg(long)]
    method: Option<Method>,
    /// Overrides `experiment.train_attack`.
    #[arg(long)]
    attack: Option<AttackType>,
}

#[derive(Args)]
struct MatrixArgs {
    /// Run directories written by `train`.
    #[arg(long, num_args = 1.., required = true)]
    runs: Vec<PathBuf>,
    /// Test scenes; the `data.*` test split when omitted.
    #[arg(long)]
    scenes: Option<PathBuf>,
    /// Extra `method:attack` rows that must appear.
    #[arg(long, num_args = 1..)]
    expect: Vec<String>,
    /// Overrides `experiment.eval_attacks`.
    #[arg(long, value_delimiter = ',')]
    eval_attacks: Vec<AttackType>,
}

#[derive(Args)]
struct ReportArgs {
    /// Matrix file; defaults to `matrix.csv` in the output directory.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Run directories whose final epoch metrics are appended.
    #[arg(long, num_args = 1..)]
    runs: Vec<PathBuf>,
}

struct Failure {
    code: i32,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Self {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: EXIT_USAGE,
        message: message.into(),
    }
}

type CmdResult = Result<(), Failure>;

fn load_spec(cli: &Cli) -> Result<ExperimentSpec, Failure> {
    let mut pairs = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            parse_pairs(&text)?
        }
        None => Vec::new(),
    };
    if let Some(seed) = cli.seed {
        pairs.retain(|(k, _)| k != "seed");
        pairs.push(("seed".into(), seed.to_string()));
    }
    Ok(ExperimentSpec::from_pairs(&pairs)?)
}

fn read_scenes(path: &Path) -> Result<Vec<Scene>, Failure> {
    if !path.exists() {
        return Err(usage(format!("{}: no such file", path.display())));
    }
    Ok(ingest_scenes(path)?)
}

fn write(path: &Path, text: &str) -> CmdResult {
    write_text(path, text).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))
}

fn generate(cli: &Cli, args: &GenerateArgs) -> CmdResult {
    if args.count == 0 {
        return Err(usage("--count must be > 0"));
    }
    let spec = load_spec(cli)?;
    let mix = match &args.mix {
        Some(m) => m.parse::<TemplateMix>()?,
        None => spec.data.mix.clone(),
    };
    let data = generate_dataset::<f64>(args.count, &mix, spec.data.seed);
    let path = cli.out.join(&args.file);
    let scenes: Vec<Scene> = data.iter().map(|(_, s)| s.clone()).collect();
    export_scenes(&path, &scenes).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?;
    println!("wrote {} scenes to {}", scenes.len(), path.display());
    for (t, n) in template_counts(&data) {
        println!("{t}: {n}");
    }
    Ok(())
}

fn attack(cli: &Cli, args: &AttackArgs) -> CmdResult {
    let mut spec = load_spec(cli)?;
    if let Some(n) = args.iterations {
        spec.attack.iterations = n;
    }
    let model: PredictorModel = load_checkpoint(&args.model)?;
    let scenes = read_scenes(&args.scenes)?;
    let evals = evaluate_set(&model, &scenes, Some((args.attack, &spec.attack)))?;
    let path = cli.out.join("attack_metrics.csv");
    write(&path, &attack_metrics_csv(&evals))?;
    if args.plots {
        for (scene, e) in scenes.iter().zip(&evals) {
            let a = e.attacked.as_ref().expect("attack requested");
            let svg = overlay_svg(scene, &a.adv_history, &e.prediction, &a.prediction);
            write(&cli.out.join("plots").join(format!("scene_{}.svg", scene.scene_id)), &svg)?;
        }
    }
    let s = summarize(&evals);
    println!(
        "{} scenes, attack {}: benign ADE {:.3}, attacked ADE {:.3}, lateral {:.3}, longitudinal {:.3}",
        s.scenes,
        args.attack,
        s.benign_ade,
        s.attacked_ade.unwrap_or(f64::NAN),
        s.attacked_lat.unwrap_or(f64::NAN),
        s.attacked_lon.unwrap_or(f64::NAN)
    );
    println!("wrote {}", path.display());
    Ok(())
}

fn train(cli: &Cli, args: &TrainArgs) -> CmdResult {
    let mut spec = load_spec(cli)?;
    if let Some(m) = args.method {
        spec.method = m;
    }
    if let Some(a) = args.attack {
        spec.train_attack = a;
    }
    spec.validate()?;
    let scenes = match &args.scenes {
        Some(p) => read_scenes(p)?,
        None => spec.data.split::<f64>().0,
    };
    let init: Option<PredictorModel> = args.init.as_deref().map(load_checkpoint).transpose()?;
    // the snapshot records the architecture actually trained
    if let Some(m) = &init {
        spec.model = m.config.clone();
    }
    let run = run_training(&spec, &scenes, init)?;
    std::fs::create_dir_all(&cli.out).map_err(|e| usage(format!("cannot create {}: {e}", cli.out.display())))?;
    run.write(&cli.out)?;
    if let Some(last) = run.report.epochs.last() {
        println!(
            "{} {} epoch {}: benign ADE {:.3}, attacked ADE {:.3}",
            spec.method, last.phase, last.epoch, last.benign_ade, last.attacked_ade[0]
        );
    }
    if !run.report.flagged.is_empty() {
        println!("{} steps aborted on non-finite losses", run.report.flagged.len());
    }
    println!("wrote run directory {}", cli.out.display());
    Ok(())
}

fn parse_expect(s: &str) -> Result<(Method, AttackType), Failure> {
    let (m, a) = s.split_once(':').unwrap_or((s, "ade"));
    Ok((m.parse()?, a.parse()?))
}

fn matrix(cli: &Cli, args: &MatrixArgs) -> CmdResult {
    let spec = load_spec(cli)?;
    let evals = if args.eval_attacks.is_empty() {
        spec.eval_attacks.clone()
    } else {
        args.eval_attacks.clone()
    };
    let scenes = match &args.scenes {
        Some(p) => read_scenes(p)?,
        None => spec.data.split::<f64>().1,
    };
    let mut requested = args.expect.iter().map(|s| parse_expect(s)).collect::<Result<Vec<_>, _>>()?;
    let mut results = Vec::new();
    let mut missing = 0usize;
    for dir in &args.runs {
        if let Ok(s) = ExperimentSpec::load(&dir.join("config.txt")) {
            requested.push((s.method, s.train_attack));
        }
        match RunDir::<f64>::load(dir) {
            Ok(run) => results.push(evaluate_run(&run, &scenes, &evals, &spec.attack)?),
            Err(e) => {
                missing += 1;
                eprintln!("{}: {e}", dir.display());
            }
        }
    }
    let m = ResultsMatrix::build(&requested, &evals, &results);
    let path = cli.out.join("matrix.csv");
    write(&path, &m.to_csv())?;
    print!("{}", m.render_markdown());
    println!("\nwrote {}", path.display());
    if missing > 0 || !m.is_complete() {
        return Err(Failure {
            code: EXIT_ARTIFACT,
            message: format!("{missing} run(s) missing; absent cells are marked in the matrix"),
        });
    }
    Ok(())
}

fn report(cli: &Cli, args: &ReportArgs) -> CmdResult {
    let path = args.matrix.clone().unwrap_or_else(|| cli.out.join("matrix.csv"));
    let text = std::fs::read_to_string(&path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let m = ResultsMatrix::from_csv(&text)?;
    let mut md = String::from("# Results\n\n");
    md.push_str(&m.render_markdown());
    if !args.runs.is_empty() {
        md.push_str("\n## Runs\n\n| run | method | final epoch metrics |\n|---|---|---|\n");
        for dir in &args.runs {
            let spec = ExperimentSpec::load(&dir.join("config.txt"))?;
            let metrics = std::fs::read_to_string(dir.join(METRICS_FILE))
                .map_err(|e| usage(format!("{}: {e}", dir.display())))?;
            let last = metrics.lines().last().unwrap_or("");
            if !dir.join(FINAL_CKPT).exists() {
                eprintln!("{}: no final checkpoint", dir.display());
            }
            md.push_str(&format!("| {} | {} | `{}` |\n", dir.display(), spec.method, last));
        }
    }
    let out = cli.out.join("report.md");
    write(&out, &md)?;
    print!("{md}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => generate(&cli, a),
        Command::Attack(a) => attack(&cli, a),
        Command::Train(a) => train(&cli, a),
        Command::Matrix(a) => matrix(&cli, a),
        Command::Report(a) => report(&cli, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
