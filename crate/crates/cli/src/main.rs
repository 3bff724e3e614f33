mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::Config;
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "tonekit",
    version,
    about = "Mandarin tone stimuli, sandhi and acoustic tone analysis"
)]
struct Cli {
    /// Config file with `key = value` lines, optionally in `[subcommand]` tables
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Parallel workers for per-file work (default: all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// error, warn, info, debug or trace
    #[arg(long, global = true)]
    log_level: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the coarticulation stimulus manifest (JSON lines)
    GenStimuli(GenStimuliArgs),
    /// Apply Tone-3 sandhi to pinyin or bracketed input
    Sandhi(SandhiArgs),
    /// Write oracle surface-form sets for sandhi items or a manifest
    SandhiOracle(SandhiOracleArgs),
    /// Segment attention matrices into symbol TextGrids
    Align(AlignArgs),
    /// Track f0 in WAV files
    Pitch(PitchArgs),
    /// Render stimuli to audio, f0, TextGrid and attention files
    Simsynth(SimsynthArgs),
    /// Tone recovery and coarticulation report
    AnalyzeCoart(AnalyzeCoartArgs),
    /// Tone-3 sandhi accuracy and errors per phrase
    ScoreSandhi(ScoreSandhiArgs),
    /// Mean opinion scores and pairwise tests
    MosReport(MosReportArgs),
}

#[derive(Debug, Args)]
pub struct GenStimuliArgs {
    /// Use the built-in syllables, tones and carriers (same as giving no options)
    #[arg(long)]
    pub defaults: bool,
    /// Comma-separated target syllables without tones
    #[arg(long, value_delimiter = ',')]
    pub syllables: Option<Vec<String>>,
    /// Comma-separated tones
    #[arg(long, value_delimiter = ',')]
    pub tones: Option<Vec<u8>>,
    /// JSON list of {id, prefix, suffix} carrier phrases
    #[arg(long)]
    pub carriers: Option<PathBuf>,
    /// Also pair a syllable with itself
    #[arg(long)]
    pub allow_same_syllable: bool,
    /// Output file (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SandhiArgs {
    /// Pinyin with tone digits, optionally bracketed, e.g. "[mi3 [lao3 shu3]]"
    #[arg(required = true)]
    pub input: Vec<String>,
    /// Print every surface form licensed by some bracketing, one per line
    #[arg(long)]
    pub enumerate: bool,
    /// Longest input accepted by --enumerate
    #[arg(long)]
    pub cap: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SandhiOracleArgs {
    /// Stimulus manifest; only Tone-3 + Tone-3 stimuli unless --all
    #[arg(long, conflicts_with = "items")]
    pub manifest: Option<PathBuf>,
    /// Sandhi item list (JSON lines); the built-in list when neither input is given
    #[arg(long)]
    pub items: Option<PathBuf>,
    /// Include every manifest stimulus
    #[arg(long)]
    pub all: bool,
    #[arg(long)]
    pub cap: Option<usize>,
    /// Output file (default: stdout)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AlignArgs {
    /// Attention matrix TSV
    #[arg(long, conflicts_with_all = ["manifest", "att_dir"])]
    pub att: Option<PathBuf>,
    /// Symbol labels, space separated, one per attention column
    #[arg(long, requires = "att")]
    pub symbols: Option<String>,
    /// Output TextGrid for --att (default: stdout)
    #[arg(long, requires = "att")]
    pub out: Option<PathBuf>,
    /// Batch mode: manifest whose surface syllables label the columns
    #[arg(long, requires_all = ["att_dir", "out_dir"])]
    pub manifest: Option<PathBuf>,
    /// Directory of <id>.att.tsv files
    #[arg(long)]
    pub att_dir: Option<PathBuf>,
    /// Directory for <id>.TextGrid files
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PitchArgs {
    /// Input WAV
    #[arg(long = "in", conflicts_with = "in_dir", requires = "out")]
    pub input: Option<PathBuf>,
    /// Output f0 TSV
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Batch mode: every *.wav in this directory
    #[arg(long, requires = "out_dir")]
    pub in_dir: Option<PathBuf>,
    /// Batch output directory for <stem>.f0.tsv
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub floor: Option<f64>,
    #[arg(long)]
    pub ceiling: Option<f64>,
    /// Time step in seconds
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub silence_threshold: Option<f64>,
    #[arg(long)]
    pub voicing_threshold: Option<f64>,
    #[arg(long)]
    pub octave_cost: Option<f64>,
    #[arg(long)]
    pub octave_jump_cost: Option<f64>,
    #[arg(long)]
    pub voiced_unvoiced_cost: Option<f64>,
    #[arg(long)]
    pub max_candidates: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimsynthArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Carry-over gain in [0, 1]
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Anticipatory raise in semitones
    #[arg(long)]
    pub delta: Option<f64>,
    /// Fraction of the syllable over which the carry-over shift decays
    #[arg(long)]
    pub decay: Option<f64>,
    /// uniform or ramp
    #[arg(long)]
    pub anticipatory: Option<String>,
    /// Per-syllable level jitter in semitones (needs --seed)
    #[arg(long)]
    pub jitter: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub sample_rate: Option<u32>,
    /// Attention hop in seconds
    #[arg(long)]
    pub hop: Option<f64>,
    #[arg(long)]
    pub syllable_dur: Option<f64>,
    /// Speaker base frequency in Hz
    #[arg(long)]
    pub base: Option<f64>,
}

#[derive(Debug, Args)]
pub struct AnalyzeCoartArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory of <id>.f0.tsv files
    #[arg(long)]
    pub f0_dir: PathBuf,
    /// Directory of <id>.TextGrid files
    #[arg(long)]
    pub grids: PathBuf,
    /// Report directory
    #[arg(long)]
    pub out: PathBuf,
    /// Normalized points per syllable
    #[arg(long)]
    pub points: Option<usize>,
    #[arg(long)]
    pub span: Option<f64>,
    #[arg(long)]
    pub degree: Option<usize>,
    /// High/Low threshold in semitones re the utterance median
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Reference for the coarticulation summary: corpus or utterance median
    #[arg(long)]
    pub reference: Option<String>,
}

#[derive(Debug, Args)]
pub struct ScoreSandhiArgs {
    /// Listener judgments CSV
    #[arg(long, conflicts_with_all = ["oracle", "realized"])]
    pub judgments: Option<PathBuf>,
    /// Oracle JSON lines from sandhi-oracle
    #[arg(long, requires = "realized")]
    pub oracle: Option<PathBuf>,
    /// Realized surface tones (JSON lines of {id, form})
    #[arg(long, requires = "oracle")]
    pub realized: Option<PathBuf>,
    /// System label for automatic judgments
    #[arg(long)]
    pub system: Option<String>,
    /// Report directory (default: text on stdout only)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MosReportArgs {
    #[arg(long)]
    pub ratings: PathBuf,
    /// auto, signed-rank or mann-whitney
    #[arg(long)]
    pub test: Option<String>,
    /// Report directory (default: text on stdout only)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn init_logging(level: &str) -> Result<(), CliError> {
    let filter: log::LevelFilter = level
        .parse()
        .map_err(|_| CliError::usage(format!("unknown log level {level:?}")))?;
    env_logger::Builder::new()
        .filter_level(filter)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .try_init()
        .ok();
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    let section = match &cli.command {
        Command::GenStimuli(_) => "gen_stimuli",
        Command::Sandhi(_) => "sandhi",
        Command::SandhiOracle(_) => "sandhi_oracle",
        Command::Align(_) => "align",
        Command::Pitch(_) => "pitch",
        Command::Simsynth(_) => "simsynth",
        Command::AnalyzeCoart(_) => "analyze_coart",
        Command::ScoreSandhi(_) => "score_sandhi",
        Command::MosReport(_) => "mos_report",
    };
    init_logging(&config.pick(cli.log_level, section, "log_level", "warn".to_string())?)?;
    if let Some(jobs) = config.pick_opt(cli.jobs, section, "jobs")? {
        if jobs == 0 {
            return Err(CliError::usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| CliError::usage(e.to_string()))?;
    }

    let ctx = commands::Ctx { config, section };
    match cli.command {
        Command::GenStimuli(a) => commands::gen_stimuli(&ctx, a),
        Command::Sandhi(a) => commands::sandhi(&ctx, a),
        Command::SandhiOracle(a) => commands::sandhi_oracle(&ctx, a),
        Command::Align(a) => commands::align(&ctx, a),
        Command::Pitch(a) => commands::pitch(&ctx, a),
        Command::Simsynth(a) => commands::simsynth(&ctx, a),
        Command::AnalyzeCoart(a) => commands::analyze_coart(&ctx, a),
        Command::ScoreSandhi(a) => commands::score_sandhi(&ctx, a),
        Command::MosReport(a) => commands::mos_report(&ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let informational = matches!(
                e.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            );
            let _ = e.print();
            return ExitCode::from(if informational { 0 } else { 1 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code() as u8)
        }
    }
}
