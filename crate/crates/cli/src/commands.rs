use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use tonekit::align::{greedy_alignment, validate_alignment};
use tonekit::contour::{
    self, classify_tone, coarticulation_summary, normalize_contour, utterance_median,
    ContourFeatures, SummaryConfig,
};
use tonekit::pinyin::{SyllableSequence, Tone};
use tonekit::pipeline::{coart_records, render_stimulus, surface_sequence, DEFAULT_SAMPLE_RATE};
use tonekit::pitch::{f0_for_interval, track_f0, PitchConfig};
use tonekit::sandhi::{
    apply_sandhi, enumerate_surface_forms, parse_bracketed, read_oracle_jsonl, surface_syllables,
    write_oracle_jsonl, OracleEntry, SurfaceForm, SurfaceFormSet, DEFAULT_ENUMERATION_CAP,
};
use tonekit::simsynth::{AnticipatoryShape, CoartConfig, SynthConfig, ToneTemplate};
use tonekit::speech_io::{
    read_attention, read_f0, read_textgrid, read_wav, write_attention, write_f0, write_textgrid,
    write_wav, F0Track, TextGrid, DEFAULT_HOP_S,
};
use tonekit::stats::{
    bonferroni, mann_whitney_u, read_judgments, read_ratings, sandhi_scoreboard,
    wilcoxon_signed_rank, write_judgments, Category, Measure, RatingRecord, SandhiJudgment,
    StatsError,
};
use tonekit::stimuli::{
    default_sandhi_items, generate_coarticulation_stimuli, load_stimulus_manifest, parse_carriers,
    read_sandhi_items, write_stimulus_manifest, Stimulus, StimulusConfig,
};

use crate::config::Config;
use crate::error::CliError;
use crate::{
    AlignArgs, AnalyzeCoartArgs, GenStimuliArgs, MosReportArgs, PitchArgs, SandhiArgs,
    SandhiOracleArgs, ScoreSandhiArgs, SimsynthArgs,
};

pub struct Ctx {
    pub config: Config,
    pub section: &'static str,
}

impl Ctx {
    fn pick<T: std::str::FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.config.pick(flag, self.section, key, default)
    }

    fn pick_opt<T: std::str::FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
    ) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        self.config.pick_opt(flag, self.section, key)
    }
}

fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::usage(format!("no such file: {}", path.display())))
    }
}

fn require_dir(path: &Path) -> Result<(), CliError> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(CliError::usage(format!(
            "no such directory: {}",
            path.display()
        )))
    }
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Opens `path` for writing, or stdout.
fn output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn load_manifest(path: &Path) -> Result<Vec<Stimulus>, CliError> {
    require_file(path)?;
    load_stimulus_manifest(path).map_err(|e| CliError::from(e).context(path.display()))
}

fn split_list(text: &str) -> Vec<String> {
    text.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

pub fn gen_stimuli(ctx: &Ctx, a: GenStimuliArgs) -> Result<(), CliError> {
    let mut cfg = StimulusConfig::default();
    let syllables = match a.syllables {
        Some(v) => Some(v),
        None => ctx
            .config
            .get::<String>(ctx.section, "syllables")?
            .map(|s| split_list(&s)),
    };
    if let Some(s) = syllables {
        cfg.syllables = s;
    }
    let tones = match a.tones {
        Some(v) => Some(v),
        None => ctx
            .config
            .get::<String>(ctx.section, "tones")?
            .map(|s| {
                split_list(&s)
                    .iter()
                    .map(|t| t.parse::<u8>())
                    .collect::<Result<Vec<_>, _>>()
            })
            .transpose()
            .map_err(|e| CliError::usage(format!("config key tones: {e}")))?,
    };
    if let Some(t) = tones {
        cfg.tones = t;
    }
    if let Some(path) = ctx.pick_opt(a.carriers, "carriers")? {
        require_file(&path)?;
        let text = std::fs::read_to_string(&path)?;
        cfg.carriers =
            parse_carriers(&text).map_err(|e| CliError::from(e).context(path.display()))?;
    }
    cfg.allow_same_syllable = a.allow_same_syllable
        || ctx
            .config
            .get(ctx.section, "allow_same_syllable")?
            .unwrap_or(false);

    let stimuli = generate_coarticulation_stimuli(&cfg)?;
    info!("generated {} stimuli", stimuli.len());
    let mut out = output(a.out.as_deref())?;
    write_stimulus_manifest(&stimuli, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn sandhi(ctx: &Ctx, a: SandhiArgs) -> Result<(), CliError> {
    let text = a.input.join(" ");
    let tree = parse_bracketed(&text)?;
    let mut out = output(None)?;
    if a.enumerate {
        let cap = ctx.pick(a.cap, "cap", DEFAULT_ENUMERATION_CAP)?;
        let leaves = tree.leaves();
        let structure = text.contains('[').then_some(&tree);
        let forms = enumerate_surface_forms(&leaves, structure, cap)?;
        for form in forms.iter() {
            writeln!(out, "{}", leaves.with_tones(&form.0))?;
        }
    } else {
        writeln!(out, "{}", surface_syllables(&tree))?;
    }
    out.flush()?;
    Ok(())
}

pub fn sandhi_oracle(ctx: &Ctx, a: SandhiOracleArgs) -> Result<(), CliError> {
    let cap = ctx.pick(a.cap, "cap", DEFAULT_ENUMERATION_CAP)?;
    let entries: Vec<OracleEntry> = if let Some(path) = &a.manifest {
        load_manifest(path)?
            .into_iter()
            .filter(|s| a.all || s.sandhi_pair)
            .map(|s| OracleEntry {
                id: s.id.clone(),
                category: Some(Category::Phrase.to_string()),
                forms: SurfaceFormSet::singleton(apply_sandhi(&s.tree())),
            })
            .collect()
    } else {
        let items = match &a.items {
            Some(path) => {
                require_file(path)?;
                read_sandhi_items(BufReader::new(File::open(path)?))
                    .map_err(|e| CliError::from(e).context(path.display()))?
            }
            None => default_sandhi_items(),
        };
        items
            .into_iter()
            .map(|item| {
                let forms = enumerate_surface_forms(&item.text, item.structure.as_ref(), cap)
                    .map_err(|e| CliError::from(e).context(&item.id))?;
                Ok(OracleEntry {
                    id: item.id,
                    category: Some(item.category),
                    forms,
                })
            })
            .collect::<Result<_, CliError>>()?
    };
    info!("{} oracle entries", entries.len());
    let mut out = output(a.out.as_deref())?;
    write_oracle_jsonl(&entries, &mut out)?;
    out.flush()?;
    Ok(())
}

fn align_one(att_path: &Path, labels: &[String], out: &Path, name: &str) -> Result<(), CliError> {
    let att =
        read_attention(att_path).map_err(|e| CliError::from(e).context(att_path.display()))?;
    let alignment = greedy_alignment(&att, labels).map_err(|e| CliError::from(e).context(name))?;
    let report = validate_alignment(&alignment.grid, labels);
    if !report.ok {
        warn!("{name}: alignment issues {}", report.issues.join(" "));
    }
    write_textgrid(&alignment.grid, out).map_err(|e| CliError::from(e).context(out.display()))?;
    Ok(())
}

pub fn align(_ctx: &Ctx, a: AlignArgs) -> Result<(), CliError> {
    if let Some(att) = &a.att {
        require_file(att)?;
        let symbols = a
            .symbols
            .as_deref()
            .ok_or_else(|| CliError::usage("--att needs --symbols"))?;
        let out = a
            .out
            .as_deref()
            .ok_or_else(|| CliError::usage("--att needs --out"))?;
        let labels: Vec<String> = symbols.split_whitespace().map(str::to_string).collect();
        return align_one(att, &labels, out, &att.display().to_string());
    }
    let (Some(manifest), Some(att_dir), Some(out_dir)) = (&a.manifest, &a.att_dir, &a.out_dir)
    else {
        return Err(CliError::usage(
            "give --att/--symbols/--out or --manifest/--att-dir/--out-dir",
        ));
    };
    let stimuli = load_manifest(manifest)?;
    require_dir(att_dir)?;
    create_dir(out_dir)?;
    stimuli.par_iter().try_for_each(|s| {
        let att = att_dir.join(format!("{}.att.tsv", s.id));
        require_file(&att)?;
        align_one(
            &att,
            &surface_sequence(s).labels(),
            &out_dir.join(format!("{}.TextGrid", s.id)),
            &s.id,
        )
    })?;
    info!("aligned {} stimuli", stimuli.len());
    Ok(())
}

fn pitch_config(ctx: &Ctx, a: &PitchArgs) -> Result<PitchConfig, CliError> {
    let d = PitchConfig::default();
    Ok(PitchConfig {
        time_step: ctx.pick(a.step, "step", d.time_step)?,
        floor: ctx.pick(a.floor, "floor", d.floor)?,
        ceiling: ctx.pick(a.ceiling, "ceiling", d.ceiling)?,
        silence_threshold: ctx.pick(
            a.silence_threshold,
            "silence_threshold",
            d.silence_threshold,
        )?,
        voicing_threshold: ctx.pick(
            a.voicing_threshold,
            "voicing_threshold",
            d.voicing_threshold,
        )?,
        octave_cost: ctx.pick(a.octave_cost, "octave_cost", d.octave_cost)?,
        octave_jump_cost: ctx.pick(a.octave_jump_cost, "octave_jump_cost", d.octave_jump_cost)?,
        voiced_unvoiced_cost: ctx.pick(
            a.voiced_unvoiced_cost,
            "voiced_unvoiced_cost",
            d.voiced_unvoiced_cost,
        )?,
        max_candidates: ctx.pick(a.max_candidates, "max_candidates", d.max_candidates)?,
        ..d
    })
}

fn pitch_one(input: &Path, out: &Path, cfg: &PitchConfig) -> Result<(), CliError> {
    let audio = read_wav(input).map_err(|e| CliError::from(e).context(input.display()))?;
    cfg.validate(audio.sample_rate)?;
    let track = track_f0(&audio, cfg).map_err(|e| CliError::from(e).context(input.display()))?;
    let mut comments = vec![format!(
        "source={}",
        input
            .file_name()
            .map_or_else(String::new, |n| n.to_string_lossy().into_owned())
    )];
    comments.extend(cfg.describe());
    write_f0(&track, out, &comments).map_err(|e| CliError::from(e).context(out.display()))?;
    Ok(())
}

pub fn pitch(ctx: &Ctx, a: PitchArgs) -> Result<(), CliError> {
    let cfg = pitch_config(ctx, &a)?;
    info!("pitch settings: {}", cfg.describe().join("; "));
    if let Some(input) = &a.input {
        require_file(input)?;
        let out = a
            .out
            .as_deref()
            .ok_or_else(|| CliError::usage("--in needs --out"))?;
        return pitch_one(input, out, &cfg);
    }
    let (Some(in_dir), Some(out_dir)) = (&a.in_dir, &a.out_dir) else {
        return Err(CliError::usage("give --in/--out or --in-dir/--out-dir"));
    };
    require_dir(in_dir)?;
    let mut inputs: Vec<PathBuf> = std::fs::read_dir(in_dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
        .collect();
    inputs.sort();
    if inputs.is_empty() {
        return Err(CliError::usage(format!(
            "no .wav files in {}",
            in_dir.display()
        )));
    }
    create_dir(out_dir)?;
    inputs.par_iter().try_for_each(|input| {
        let stem = input
            .file_stem()
            .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        pitch_one(input, &out_dir.join(format!("{stem}.f0.tsv")), &cfg)
    })?;
    info!("tracked {} files", inputs.len());
    Ok(())
}

pub fn simsynth(ctx: &Ctx, a: SimsynthArgs) -> Result<(), CliError> {
    let stimuli = load_manifest(&a.manifest)?;
    let d = CoartConfig::default();
    let anticipatory = match ctx
        .pick(a.anticipatory, "anticipatory", "uniform".to_string())?
        .as_str()
    {
        "uniform" => AnticipatoryShape::Uniform,
        "ramp" => AnticipatoryShape::Ramp,
        other => {
            return Err(CliError::usage(format!(
                "--anticipatory must be uniform or ramp, got {other:?}"
            )))
        }
    };
    let coart = CoartConfig {
        kappa: ctx.pick(a.kappa, "kappa", d.kappa)?,
        carry_decay_frac: ctx.pick(a.decay, "decay", d.carry_decay_frac)?,
        delta_st: ctx.pick(a.delta, "delta", d.delta_st)?,
        anticipatory,
    };
    coart.validate()?;
    let sd = SynthConfig::default();
    let jitter = ctx.pick(a.jitter, "jitter", 0.0)?;
    let seed = ctx.pick_opt(a.seed, "seed")?;
    if jitter > 0.0 && seed.is_none() {
        return Err(CliError::usage("--jitter needs --seed"));
    }
    let cfg = SynthConfig {
        syllable_dur: ctx.pick(a.syllable_dur, "syllable_dur", sd.syllable_dur)?,
        base_hz: ctx.pick(a.base, "base", sd.base_hz)?,
        frame_step: sd.frame_step,
        jitter_st: jitter,
        seed: seed.unwrap_or(0),
    };
    cfg.validate()?;
    let sample_rate = ctx.pick(a.sample_rate, "sample_rate", DEFAULT_SAMPLE_RATE)?;
    if sample_rate < 8000 {
        return Err(CliError::usage(format!(
            "sample rate {sample_rate} is below 8000 Hz"
        )));
    }
    let hop = ctx.pick(a.hop, "hop", DEFAULT_HOP_S)?;
    if !(hop > 0.0) {
        return Err(CliError::usage("--hop must be positive"));
    }
    create_dir(&a.out_dir)?;
    let templates = ToneTemplate::default();
    let header = vec![format!(
        "simulated f0 kappa={} delta_st={} carry_decay_frac={} anticipatory={:?} base_hz={} syllable_dur={} jitter_st={} seed={}",
        coart.kappa, coart.delta_st, coart.carry_decay_frac, coart.anticipatory, cfg.base_hz, cfg.syllable_dur, cfg.jitter_st, cfg.seed
    )];
    stimuli
        .par_iter()
        .try_for_each(|s| -> Result<(), CliError> {
            // Jitter draws are keyed to the stimulus so output does not depend on scheduling.
            let cfg = SynthConfig {
                seed: cfg.seed ^ fnv1a(&s.id),
                ..cfg.clone()
            };
            let r = render_stimulus(s, &templates, &coart, &cfg, sample_rate, hop)
                .map_err(|e| CliError::from(e).context(&s.id))?;
            let base = a.out_dir.join(&s.id);
            let with = |ext: &str| PathBuf::from(format!("{}.{ext}", base.display()));
            write_wav(&r.audio, &with("wav"))?;
            write_f0(&r.synth.track, &with("f0.tsv"), &header)?;
            write_textgrid(&r.synth.grid, &with("TextGrid"))?;
            write_attention(&r.attention, &with("att.tsv"))?;
            Ok(())
        })?;
    info!(
        "rendered {} stimuli into {}",
        stimuli.len(),
        a.out_dir.display()
    );
    Ok(())
}

fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf29ce484222325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x100000001b3)
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct RealizedEntry {
    id: String,
    form: SurfaceForm,
}

struct Analyzed {
    stimulus: Stimulus,
    surface_tones: Vec<Tone>,
    labels: Vec<String>,
    samples: Vec<Vec<f64>>,
    median: Option<f64>,
}

fn analyze_one(s: &Stimulus, f0_dir: &Path, grid_dir: &Path) -> Result<Analyzed, CliError> {
    let f0_path = f0_dir.join(format!("{}.f0.tsv", s.id));
    let grid_path = grid_dir.join(format!("{}.TextGrid", s.id));
    require_file(&f0_path)?;
    require_file(&grid_path)?;
    let track: F0Track =
        read_f0(&f0_path).map_err(|e| CliError::from(e).context(f0_path.display()))?;
    let grid: TextGrid =
        read_textgrid(&grid_path).map_err(|e| CliError::from(e).context(grid_path.display()))?;
    let surface = surface_sequence(s);
    let tier = grid
        .tier(tonekit::align::SYMBOL_TIER)
        .ok_or_else(|| CliError::usage(format!("{}: no symbols tier", grid_path.display())))?;
    if tier.intervals.len() != surface.len() {
        return Err(CliError::usage(format!(
            "{}: {} intervals for {} syllables",
            grid_path.display(),
            tier.intervals.len(),
            surface.len()
        )));
    }
    let samples = tier
        .intervals
        .iter()
        .map(|iv| f0_for_interval(&track, iv.xmin, iv.xmax))
        .collect();
    Ok(Analyzed {
        stimulus: s.clone(),
        surface_tones: surface.tones(),
        labels: surface.labels(),
        samples,
        median: utterance_median(&track),
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

pub fn analyze_coart(ctx: &Ctx, a: AnalyzeCoartArgs) -> Result<(), CliError> {
    let stimuli = load_manifest(&a.manifest)?;
    require_dir(&a.f0_dir)?;
    require_dir(&a.grids)?;
    let n_points = ctx.pick(a.points, "points", contour::DEFAULT_POINTS)?;
    let threshold = ctx.pick(a.threshold, "threshold", 0.0)?;
    let summary_cfg = SummaryConfig {
        span: ctx.pick(a.span, "span", contour::DEFAULT_SPAN)?,
        degree: ctx.pick(a.degree, "degree", contour::DEFAULT_DEGREE)?,
        grid_points: n_points,
    };
    if n_points < 5 {
        return Err(CliError::usage("--points must be at least 5"));
    }
    if !(summary_cfg.degree == 1 || summary_cfg.degree == 2) || !(summary_cfg.span > 0.0) {
        return Err(CliError::usage(
            "--degree must be 1 or 2 and --span positive",
        ));
    }
    let reference = ctx.pick(a.reference, "reference", "corpus".to_string())?;
    if reference != "corpus" && reference != "utterance" {
        return Err(CliError::usage(format!(
            "--reference must be corpus or utterance, got {reference:?}"
        )));
    }

    let analyzed: Vec<Analyzed> = stimuli
        .par_iter()
        .map(|s| analyze_one(s, &a.f0_dir, &a.grids))
        .collect::<Result<_, _>>()?;
    let corpus_median = contour::median(
        analyzed
            .iter()
            .flat_map(|x| x.samples.iter().flatten().copied())
            .collect(),
    )
    .ok_or_else(|| CliError::usage("no voiced frames in any f0 file"))?;
    info!("f0 measured in semitones; classification re utterance median, summary re {reference} median");

    create_dir(&a.out)?;
    let mut tones_csv =
        String::from("id,position,label,expected,recovered,onset_st,offset_st,max_st,min_st\n");
    let mut realized = Vec::new();
    let mut records = Vec::new();
    let (mut correct, mut total, mut unmeasurable) = (0usize, 0usize, 0usize);
    for x in &analyzed {
        let utt: Vec<Option<ContourFeatures>> = x
            .samples
            .iter()
            .map(|smp| {
                x.median
                    .and_then(|m| normalize_contour(smp, m, n_points).ok())
            })
            .collect();
        let mut form = Vec::new();
        for (i, feat) in utt.iter().enumerate() {
            let recovered = feat.as_ref().map(|f| classify_tone(f, threshold));
            total += 1;
            correct += usize::from(recovered == Some(x.surface_tones[i]));
            unmeasurable += usize::from(feat.is_none());
            form.push(recovered.unwrap_or(Tone::NEUTRAL));
            tones_csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                x.stimulus.id,
                i,
                x.labels[i],
                x.surface_tones[i],
                recovered.map_or_else(String::new, |t| t.to_string()),
                fmt_opt(feat.as_ref().map(|f| f.onset_st)),
                fmt_opt(feat.as_ref().map(|f| f.offset_st)),
                fmt_opt(feat.as_ref().map(|f| f.max_st)),
                fmt_opt(feat.as_ref().map(|f| f.min_st)),
            ));
        }
        realized.push(RealizedEntry {
            id: x.stimulus.id.clone(),
            form: SurfaceForm(form),
        });

        let reference_hz = if reference == "corpus" {
            Some(corpus_median)
        } else {
            x.median
        };
        let features: Vec<_> = x
            .samples
            .iter()
            .map(|smp| match reference_hz {
                Some(r) => normalize_contour(smp, r, n_points),
                None => Err(contour::ContourError::Unmeasurable { found: 0 }),
            })
            .collect();
        let surface = SyllableSequence(
            x.stimulus
                .text
                .iter()
                .zip(&x.surface_tones)
                .map(|(s, t)| s.with_tone(*t))
                .collect(),
        );
        records.extend(coart_records(&x.stimulus, &surface, &features));
    }
    if unmeasurable > 0 {
        warn!("{unmeasurable} of {total} syllables were unmeasurable");
    }

    let report = coarticulation_summary(&records, &summary_cfg);
    for w in &report.warnings {
        warn!("{w}");
    }
    let csv_err = |e: csv::Error| CliError::Io(e.to_string());
    contour::write_carryover_csv(&report, output(Some(&a.out.join("carryover.csv")))?)
        .map_err(csv_err)?;
    contour::write_anticipatory_csv(&report, output(Some(&a.out.join("anticipatory.csv")))?)
        .map_err(csv_err)?;
    contour::write_loess_csv(&report, output(Some(&a.out.join("loess_curves.csv")))?)
        .map_err(csv_err)?;
    write_text(&a.out.join("tones.csv"), &tones_csv)?;
    let mut lines = String::new();
    for r in &realized {
        lines.push_str(&serde_json::to_string(r)?);
        lines.push('\n');
    }
    write_text(&a.out.join("realized.jsonl"), &lines)?;

    let mut out = output(None)?;
    writeln!(
        out,
        "tone recovery: {correct}/{total} = {:.4}",
        correct as f64 / total.max(1) as f64
    )?;
    writeln!(
        out,
        "summary reference: {reference} median ({corpus_median:.2} Hz corpus)"
    )?;
    writeln!(out, "tone  carry-over_st  anticipatory_st")?;
    for t in [Tone::T1, Tone::T2, Tone::T3, Tone::T4] {
        let show = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:+.3}"));
        writeln!(
            out,
            "{t:>4}  {:>13}  {:>15}",
            show(report.carryover_effect(t)),
            show(report.anticipatory_effect(t))
        )?;
    }
    out.flush()?;
    Ok(())
}

fn read_realized(path: &Path) -> Result<HashMap<String, SurfaceForm>, CliError> {
    require_file(path)?;
    let mut map = HashMap::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: RealizedEntry = serde_json::from_str(&line)
            .map_err(|e| CliError::usage(format!("{} line {}: {e}", path.display(), i + 1)))?;
        map.insert(entry.id, entry.form);
    }
    Ok(map)
}

fn category_for(entry: &OracleEntry) -> Result<Category, CliError> {
    match entry.category.as_deref() {
        Some("bisyllabic") => Ok(Category::Bisyllabic),
        Some("trisyllabic") => Ok(Category::Trisyllabic),
        Some("phrase") => Ok(Category::Phrase),
        Some(other) => Err(CliError::usage(format!(
            "{}: unknown category {other:?}",
            entry.id
        ))),
        None => Ok(match entry.forms.form_len() {
            2 => Category::Bisyllabic,
            3 => Category::Trisyllabic,
            _ => Category::Phrase,
        }),
    }
}

pub fn score_sandhi(ctx: &Ctx, a: ScoreSandhiArgs) -> Result<(), CliError> {
    let judgments: Vec<SandhiJudgment> = if let Some(path) = &a.judgments {
        require_file(path)?;
        read_judgments(File::open(path)?).map_err(|e| CliError::from(e).context(path.display()))?
    } else {
        let (Some(oracle_path), Some(realized_path)) = (&a.oracle, &a.realized) else {
            return Err(CliError::usage(
                "give --judgments or --oracle with --realized",
            ));
        };
        require_file(oracle_path)?;
        let oracle = read_oracle_jsonl(BufReader::new(File::open(oracle_path)?))
            .map_err(|e| CliError::from(e).context(oracle_path.display()))?;
        let realized = read_realized(realized_path)?;
        let system = ctx.pick(a.system, "system", "simsynth".to_string())?;
        let mut out = Vec::new();
        for entry in &oracle {
            let Some(form) = realized.get(&entry.id) else {
                warn!("{}: no realized form, skipped", entry.id);
                continue;
            };
            let n_errors = tonekit::sandhi::count_sandhi_errors(form, &entry.forms)
                .map_err(|e| CliError::from(e).context(&entry.id))?;
            out.push(SandhiJudgment {
                sample_id: entry.id.clone(),
                system: system.clone(),
                rater: "automatic".into(),
                category: category_for(entry)?,
                n_errors: n_errors as u32,
                n_target_syllables: entry.forms.form_len() as u32,
            });
        }
        out
    };
    if judgments.is_empty() {
        return Err(CliError::usage("no judgments to score"));
    }

    let mut by_category: BTreeMap<Category, Vec<SandhiJudgment>> = BTreeMap::new();
    for j in &judgments {
        by_category.entry(j.category).or_default().push(j.clone());
    }
    let boards = by_category
        .values()
        .map(|js| sandhi_scoreboard(js))
        .collect::<Result<Vec<_>, StatsError>>()?;

    let mut out = output(None)?;
    for b in &boards {
        write!(out, "{}", b.to_text())?;
    }
    out.flush()?;
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        let mut scores = String::new();
        let mut pairs = String::new();
        for (i, b) in boards.iter().enumerate() {
            let skip = usize::from(i > 0);
            scores.extend(b.to_csv().lines().skip(skip).map(|l| format!("{l}\n")));
            pairs.extend(
                b.pairwise_csv()
                    .lines()
                    .skip(skip)
                    .map(|l| format!("{l}\n")),
            );
        }
        write_text(&dir.join("scoreboard.csv"), &scores)?;
        write_text(&dir.join("pairwise.csv"), &pairs)?;
        if a.judgments.is_none() {
            write_judgments(&judgments, output(Some(&dir.join("judgments.csv")))?)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TestChoice {
    Auto,
    SignedRank,
    MannWhitney,
}

struct Comparison {
    measure: Measure,
    a: String,
    b: String,
    test: &'static str,
    statistic: f64,
    p: f64,
}

/// Per-rater mean ratings for one system and measure.
fn rater_means(records: &[RatingRecord], system: &str, measure: Measure) -> BTreeMap<String, f64> {
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for r in records
        .iter()
        .filter(|r| r.system == system && r.measure == measure)
    {
        let e = sums.entry(r.rater.clone()).or_default();
        e.0 += r.value as f64;
        e.1 += 1;
    }
    sums.into_iter()
        .map(|(k, (s, n))| (k, s / n as f64))
        .collect()
}

fn compare(
    records: &[RatingRecord],
    measure: Measure,
    a: &str,
    b: &str,
    choice: TestChoice,
) -> Result<Comparison, CliError> {
    let ma = rater_means(records, a, measure);
    let mb = rater_means(records, b, measure);
    let same_raters = ma.keys().eq(mb.keys());
    let paired = match choice {
        TestChoice::SignedRank => {
            if !same_raters {
                return Err(CliError::usage(format!(
                    "{a} and {b} were not rated by the same raters"
                )));
            }
            true
        }
        TestChoice::MannWhitney => false,
        TestChoice::Auto => same_raters,
    };
    if paired {
        let diffs: Vec<f64> = ma.values().zip(mb.values()).map(|(x, y)| x - y).collect();
        let (statistic, p) = match wilcoxon_signed_rank(&diffs) {
            Ok(w) => (w.w_plus, w.p_two_sided),
            Err(StatsError::AllZero) => (0.0, 1.0),
            Err(e) => return Err(e.into()),
        };
        info!(
            "{measure} {a} vs {b}: Wilcoxon signed-rank over {} raters",
            diffs.len()
        );
        return Ok(Comparison {
            measure,
            a: a.into(),
            b: b.into(),
            test: "wilcoxon_signed_rank",
            statistic,
            p,
        });
    }
    let values = |s: &str| -> Vec<f64> {
        records
            .iter()
            .filter(|r| r.system == s && r.measure == measure)
            .map(|r| r.value as f64)
            .collect()
    };
    let r = mann_whitney_u(&values(a), &values(b))?;
    info!("{measure} {a} vs {b}: Mann-Whitney U ({})", r.method);
    Ok(Comparison {
        measure,
        a: a.into(),
        b: b.into(),
        test: "mann_whitney_u",
        statistic: r.u_a,
        p: r.p_two_sided,
    })
}

pub fn mos_report(ctx: &Ctx, a: MosReportArgs) -> Result<(), CliError> {
    require_file(&a.ratings)?;
    let records = read_ratings(File::open(&a.ratings)?)
        .map_err(|e| CliError::from(e).context(a.ratings.display()))?;
    let table = tonekit::stats::mos_report(&records)?;
    let choice = match ctx.pick(a.test, "test", "auto".to_string())?.as_str() {
        "auto" => TestChoice::Auto,
        "signed-rank" => TestChoice::SignedRank,
        "mann-whitney" => TestChoice::MannWhitney,
        other => {
            return Err(CliError::usage(format!(
                "--test must be auto, signed-rank or mann-whitney, got {other:?}"
            )))
        }
    };

    let mut comparisons = Vec::new();
    for measure in [Measure::Naturalness, Measure::Prosody] {
        let systems: Vec<&str> = table
            .rows
            .iter()
            .filter(|r| r.measure == measure)
            .map(|r| r.system.as_str())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        for i in 0..systems.len() {
            for k in i + 1..systems.len() {
                comparisons.push(compare(&records, measure, systems[i], systems[k], choice)?);
            }
        }
    }
    let adjusted = bonferroni(&comparisons.iter().map(|c| c.p).collect::<Vec<_>>(), None);

    let mut tests_csv = String::from("measure,system_a,system_b,test,statistic,p,p_bonferroni\n");
    for (c, adj) in comparisons.iter().zip(&adjusted) {
        tests_csv.push_str(&format!(
            "{},{},{},{},{:.4},{:.4},{:.4}\n",
            c.measure, c.a, c.b, c.test, c.statistic, c.p, adj
        ));
    }
    let mut out = output(None)?;
    write!(out, "{}", table.to_text())?;
    for (c, adj) in comparisons.iter().zip(&adjusted) {
        writeln!(
            out,
            "{} {} vs {}: {} p = {:.4} (Bonferroni {:.4})",
            c.measure, c.a, c.b, c.test, c.p, adj
        )?;
    }
    out.flush()?;
    if let Some(dir) = &a.out {
        create_dir(dir)?;
        write_text(&dir.join("mos.csv"), &table.to_csv())?;
        write_text(&dir.join("tests.csv"), &tests_csv)?;
    }
    Ok(())
}
