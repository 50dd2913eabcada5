use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fingering_core::experiment::{
    build_experiment, export_fingering, export_history, parse_fingering, run_score, EncodingChoice,
    ExperimentId, RunConfig, RunReport,
};
use fingering_core::oracle::{count_position_changes, dp_optimal};
use fingering_core::{is_feasible, Error, Finger, Score};

const EXIT_USAGE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_TRAINING: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "fingering",
    version,
    about = "Learn right-hand piano fingerings with deep Q-learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Exact optimal fingering by dynamic programming.
    Solve {
        #[command(flatten)]
        source: Source,
        /// key=value config file (reward constants are used)
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the fingering to this file instead of only printing it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a Q-network and compare its greedy fingering with the optimum.
    Train {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// 88 or range
        #[arg(long)]
        encoding: Option<String>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Number of independent runs with seeds seed, seed+1, ...
        #[arg(long, default_value_t = 1)]
        seeds: u64,
    },
    /// Score a fingering file against a score.
    Eval {
        score: PathBuf,
        fingering: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Reflect a score about a pitch for left-hand use.
    Mirror {
        score: PathBuf,
        #[arg(long)]
        axis: String,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// Score file
    score: Option<PathBuf>,
    /// Bundled experiment number (1-5)
    #[arg(long = "ex")]
    ex: Option<u8>,
}

struct Problem {
    score: Score,
    base: RunConfig,
    episodes: usize,
    encoding: EncodingChoice,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn read_score(path: &Path) -> CliResult<Score> {
    let text = fs::read_to_string(path).map_err(Error::from)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "score".into());
    Ok(Score::parse_named(&text, name)?)
}

/// Layers a config file over `base`.
fn load_config(base: RunConfig, path: Option<&Path>) -> CliResult<RunConfig> {
    let mut cfg = base;
    if let Some(p) = path {
        let text = fs::read_to_string(p).map_err(Error::from)?;
        cfg.apply_text(&text)?;
    }
    Ok(cfg)
}

fn resolve(source: &Source) -> CliResult<Problem> {
    match (&source.score, source.ex) {
        (_, Some(n)) => {
            let id = ExperimentId::from_number(n).map_err(|e| CliError::Usage(e.to_string()))?;
            let spec = build_experiment(id);
            Ok(Problem {
                base: spec.default_config(),
                score: spec.score,
                episodes: spec.episodes,
                encoding: spec.encoding,
            })
        }
        (Some(path), None) => Ok(Problem {
            score: read_score(path)?,
            base: RunConfig::default(),
            episodes: RunConfig::default().train.episodes,
            encoding: EncodingChoice::MelodicRange,
        }),
        (None, None) => Err(CliError::Usage("give a score file or --ex N".into())),
    }
}

fn fingers(f: &[Finger]) -> String {
    f.iter()
        .map(|f| f.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn solve(source: &Source, config: Option<&Path>, out: Option<&Path>) -> CliResult<()> {
    let problem = resolve(source)?;
    let cfg = load_config(problem.base.clone(), config)?;
    let sol = dp_optimal(&problem.score, &cfg.reward);
    let changes = count_position_changes(&problem.score, &sol.fingering, &cfg.reward)?;
    println!(
        "score: {} ({} notes)",
        problem.score.name(),
        problem.score.len()
    );
    println!("fingering: {}", fingers(&sol.fingering));
    println!("total_reward: {}", sol.total_reward);
    println!("position_changes: {changes}");
    if let Some(path) = out {
        export_fingering(&problem.score, &sol.fingering, path)?;
    }
    Ok(())
}

fn write_outputs(dir: &Path, score: &Score, report: &RunReport, suffix: &str) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(Error::from)?;
    export_history(&report.history, dir.join(format!("history{suffix}.csv")))?;
    export_fingering(
        score,
        &report.rollout.fingering,
        dir.join(format!("fingering{suffix}.txt")),
    )?;
    export_fingering(
        score,
        &report.oracle.fingering,
        dir.join("oracle_fingering.txt"),
    )?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn train(
    source: &Source,
    config: Option<&Path>,
    episodes: Option<usize>,
    seed: Option<u64>,
    encoding: Option<&str>,
    out_dir: Option<&Path>,
    seeds: u64,
) -> CliResult<()> {
    if seeds == 0 {
        return Err(CliError::Usage("--seeds must be at least 1".into()));
    }
    let problem = resolve(source)?;
    let mut cfg = load_config(problem.base.clone(), config)?;
    if let Some(e) = episodes {
        cfg.episodes = Some(e);
    }
    if let Some(s) = seed {
        cfg.train.seed = s;
    }
    if let Some(e) = encoding {
        cfg.encoding = Some(
            e.parse()
                .map_err(|e: Error| CliError::Usage(e.to_string()))?,
        );
    }
    let encoding = cfg.encoding.unwrap_or(problem.encoding);
    let base_seed = cfg.train.seed;

    println!("seed,rollout_reward,oracle_reward,gap,position_changes,fingering");
    for k in 0..seeds {
        let mut run_cfg = cfg.clone();
        run_cfg.train.seed = base_seed + k;
        let report = run_score(&problem.score, encoding, &run_cfg, problem.episodes)?;
        let changes = report
            .position_changes
            .map_or_else(|| "infeasible".to_string(), |c| c.to_string());
        println!(
            "{},{},{},{},{},{}",
            report.seed,
            report.rollout.total_reward,
            report.oracle.total_reward,
            report.gap,
            changes,
            fingers(&report.rollout.fingering)
        );
        if let Some(dir) = out_dir {
            let suffix = if seeds > 1 {
                format!("_seed{}", report.seed)
            } else {
                String::new()
            };
            write_outputs(dir, &problem.score, &report, &suffix)?;
        }
    }
    Ok(())
}

fn eval(score_path: &Path, fingering_path: &Path, config: Option<&Path>) -> CliResult<()> {
    let score = read_score(score_path)?;
    let cfg = load_config(RunConfig::default(), config)?;
    let text = fs::read_to_string(fingering_path).map_err(Error::from)?;
    let pairs = parse_fingering(&text)?;
    if pairs.len() != score.len() {
        return Err(Error::Contract(format!(
            "fingering file has {} notes, score has {}",
            pairs.len(),
            score.len()
        ))
        .into());
    }
    for (i, ((p, _), note)) in pairs.iter().zip(score.notes()).enumerate() {
        if *p != note.pitch() {
            return Err(Error::Parse {
                line: i + 1,
                message: format!(
                    "fingering pitch {p} does not match score pitch {}",
                    note.pitch()
                ),
            }
            .into());
        }
    }
    let fingering: Vec<Finger> = pairs.iter().map(|&(_, f)| f).collect();
    if fingering[0] != score.first_finger() {
        println!(
            "warning: first finger {} differs from the score header ({})",
            fingering[0],
            score.first_finger()
        );
    }

    let mut total = 0.0;
    let mut changes = 0;
    let mut infeasible = Vec::new();
    for (i, w) in fingering.windows(2).enumerate() {
        let (cn, nn) = (score.pitch(i), score.pitch(i + 1));
        total += cfg.reward.transition_reward(w[0], cn, w[1], nn);
        if !is_feasible(w[0], cn, w[1], nn) {
            infeasible.push(i);
        } else if cfg.reward.is_position_change(w[0], cn, w[1], nn) {
            changes += 1;
        }
    }
    let oracle = dp_optimal(&score, &cfg.reward);
    println!("total_reward: {total}");
    println!("oracle_reward: {}", oracle.total_reward);
    if infeasible.is_empty() {
        println!("feasible: yes");
    } else {
        let idx: Vec<String> = infeasible.iter().map(|i| i.to_string()).collect();
        println!("feasible: no (transitions after notes {})", idx.join(", "));
    }
    println!("position_changes: {changes}");
    Ok(())
}

fn mirror(score_path: &Path, axis: &str) -> CliResult<()> {
    let axis = fingering_core::score::parse_pitch(axis).map_err(CliError::Usage)?;
    let score = read_score(score_path)?;
    print!("{}", score.mirror_for_left_hand(axis)?.serialize());
    Ok(())
}

fn exit_code(err: &CliError) -> u8 {
    match err {
        CliError::Usage(_) | CliError::Core(Error::UnknownExperiment(_)) => EXIT_USAGE,
        CliError::Core(Error::Training { .. }) => EXIT_TRAINING,
        CliError::Core(_) => EXIT_INPUT,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let result = match &cli.command {
        Command::Solve {
            source,
            config,
            out,
        } => solve(source, config.as_deref(), out.as_deref()),
        Command::Train {
            source,
            config,
            episodes,
            seed,
            encoding,
            out_dir,
            seeds,
        } => train(
            source,
            config.as_deref(),
            *episodes,
            *seed,
            encoding.as_deref(),
            out_dir.as_deref(),
            *seeds,
        ),
        Command::Eval {
            score,
            fingering,
            config,
        } => eval(score, fingering, config.as_deref()),
        Command::Mirror { score, axis } => mirror(score, axis),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            match &err {
                CliError::Usage(msg) => eprintln!("error: {msg}"),
                CliError::Core(e) => eprintln!("error: {e}"),
            }
            ExitCode::from(exit_code(&err))
        }
    }
}
