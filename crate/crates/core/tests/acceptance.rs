//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use tonekit::contour::{self, coarticulation_summary, loess_fit, CoartRecord, SummaryConfig};
use tonekit::pinyin::{parse_pinyin, Tone};
use tonekit::pipeline::{
    align_rendered, coart_records, interval_features, recover_tones, render_stimulus,
    DEFAULT_SAMPLE_RATE,
};
use tonekit::pitch::{track_f0, PitchConfig};
use tonekit::sandhi::{
    apply_sandhi, enumerate_surface_forms, parse_bracketed, DEFAULT_ENUMERATION_CAP,
};
use tonekit::simsynth::{CoartConfig, SynthConfig, ToneTemplate};
use tonekit::speech_io::{
    read_attention, read_f0, read_textgrid, read_wav, write_attention, write_f0, write_textgrid,
    write_wav, AudioBuffer, FormatError, DEFAULT_HOP_S,
};
use tonekit::stats::{
    bonferroni, mann_whitney_exact_p, mann_whitney_normal_p, mann_whitney_u, mos_report,
    read_judgments, read_ratings, sandhi_scoreboard, wilcoxon_signed_rank,
};
use tonekit::stimuli::{
    default_carriers, generate_coarticulation_stimuli, Stimulus, StimulusConfig,
};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn criterion_1() -> Outcome {
    let mut slowest = Duration::ZERO;
    let mut timed = |text: &str| {
        let tree = parse_bracketed(text).unwrap();
        let t0 = Instant::now();
        let form = apply_sandhi(&tree);
        slowest = slowest.max(t0.elapsed());
        form.digits()
    };
    check(
        timed("[mi3 [lao3 shu3]]") == [3, 2, 3],
        "[mi3 [lao3 shu3]] is not 3-2-3",
    )?;
    check(
        timed("[[meng3 gu3] yu3]") == [2, 2, 3],
        "[[meng3 gu3] yu3] is not 2-2-3",
    )?;
    let syllables = [
        "ma", "mo", "mi", "ba", "pa", "da", "ta", "na", "la", "ga", "ka", "ha", "ji", "qi", "xi",
        "zhi", "chi", "shi", "ri", "zi", "ci", "si", "yu", "wo", "lao", "shu", "gu", "meng",
        "xiang", "zhuang", "lüe", "er",
    ];
    let mut pairs = 0;
    for a in syllables {
        for b in syllables {
            let got = timed(&format!("[{a}3 {b}3]"));
            check(got == [2, 3], format!("[{a}3 {b}3] gave {got:?}"))?;
            pairs += 1;
        }
    }
    check(
        slowest < Duration::from_millis(1),
        format!("slowest call took {slowest:?}"),
    )?;
    Ok(format!(
        "{pairs} bisyllabic pairs, slowest call {slowest:?}"
    ))
}

fn criterion_2() -> Outcome {
    let seq = parse_pinyin("ma3 ma3 ma3").unwrap();
    let forms: BTreeSet<Vec<u8>> = enumerate_surface_forms(&seq, None, DEFAULT_ENUMERATION_CAP)
        .unwrap()
        .iter()
        .map(|f| f.digits())
        .collect();
    check(
        forms == BTreeSet::from([vec![2, 2, 3], vec![3, 2, 3]]),
        format!("3-syllable set {forms:?}"),
    )?;
    for n in 1..=6 {
        let seq = parse_pinyin(&vec!["ma3"; n].join(" ")).unwrap();
        let got: BTreeSet<Vec<u8>> = enumerate_surface_forms(&seq, None, DEFAULT_ENUMERATION_CAP)
            .unwrap()
            .iter()
            .map(|f| f.digits())
            .collect();
        check(
            got == common::oracle(&vec![3; n]),
            format!("length {n} disagrees with bracketing oracle"),
        )?;
    }
    Ok("{2-2-3, 3-2-3}; lengths 1..6 match brute force".into())
}

fn criterion_3() -> Outcome {
    let n = generate_coarticulation_stimuli(&StimulusConfig::default())
        .unwrap()
        .len();
    check(n == 576, format!("default count {n}"))?;
    let pool = ["ma", "mo", "mi", "ba", "da", "li", "ni", "gu"];
    let carriers = default_carriers();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let k = rng.random_range(2..=pool.len());
        let mut syl = pool.to_vec();
        syl.shuffle(&mut rng);
        let mut tones = vec![1u8, 2, 3, 4];
        tones.shuffle(&mut rng);
        tones.truncate(rng.random_range(1..=4));
        let mut car = carriers.clone();
        car.shuffle(&mut rng);
        car.truncate(rng.random_range(1..=car.len()));
        let same = rng.random_bool(0.5);
        let cfg = StimulusConfig {
            syllables: syl[..k].iter().map(|s| s.to_string()).collect(),
            tones: tones.clone(),
            carriers: car.clone(),
            allow_same_syllable: same,
        };
        let got = generate_coarticulation_stimuli(&cfg).unwrap().len();
        let pairs = if same { k * k } else { k * (k - 1) };
        let want = pairs * tones.len() * tones.len() * car.len();
        check(
            got == want,
            format!(
                "{k} syllables, {} tones, {} carriers, same={same}: {got} vs {want}",
                tones.len(),
                car.len()
            ),
        )?;
    }
    Ok("576 by default; count law holds for 20 random configs".into())
}

fn sine(freq: f64) -> AudioBuffer {
    let sr = DEFAULT_SAMPLE_RATE;
    let samples = (0..sr as usize / 2)
        .map(|i| 0.5 * (2.0 * std::f64::consts::PI * freq * i as f64 / sr as f64).sin())
        .collect();
    AudioBuffer::new(samples, sr).unwrap()
}

struct Rendered {
    stimulus: Stimulus,
    rendered: tonekit::pipeline::RenderedStimulus,
}

fn render_all(stimuli: &[Stimulus], coart: &CoartConfig) -> Vec<Rendered> {
    stimuli
        .par_iter()
        .map(|s| Rendered {
            stimulus: s.clone(),
            rendered: render_stimulus(
                s,
                &ToneTemplate::default(),
                coart,
                &SynthConfig::default(),
                DEFAULT_SAMPLE_RATE,
                DEFAULT_HOP_S,
            )
            .unwrap(),
        })
        .collect()
}

fn criterion_4(defaults: &[Rendered]) -> (Outcome, Vec<tonekit::speech_io::F0Track>) {
    let cfg = PitchConfig::default();
    let sines = || -> Result<String, String> {
        let mut worst: f64 = 0.0;
        for freq in [100.0, 150.0, 220.0, 300.0, 400.0] {
            let track = track_f0(&sine(freq), &cfg).unwrap();
            for fr in track.frames() {
                let f = fr
                    .f0
                    .ok_or(format!("{freq} Hz unvoiced at {:.3}", fr.time))?;
                worst = worst.max((f / freq - 1.0).abs());
            }
        }
        check(worst < 0.01, format!("sine error {:.3}%", 100.0 * worst))?;

        let silence = AudioBuffer::new(vec![0.0; 11025], DEFAULT_SAMPLE_RATE).unwrap();
        check(
            track_f0(&silence, &cfg)
                .unwrap()
                .frames()
                .iter()
                .all(|f| f.f0.is_none()),
            "silence voiced",
        )?;

        let sr = DEFAULT_SAMPLE_RATE as f64;
        let chirp: Vec<f64> = (0..sr as usize)
            .map(|i| {
                let t = i as f64 / sr;
                0.5 * (2.0 * std::f64::consts::PI * (150.0 * t + 75.0 * t * t)).sin()
            })
            .collect();
        let track = track_f0(&AudioBuffer::new(chirp, DEFAULT_SAMPLE_RATE).unwrap(), &cfg).unwrap();
        let mut chirp_worst: f64 = 0.0;
        for fr in track.frames() {
            let f = fr.f0.ok_or(format!("chirp unvoiced at {:.3}", fr.time))?;
            chirp_worst = chirp_worst.max((f / (150.0 + 150.0 * fr.time) - 1.0).abs());
        }
        check(
            chirp_worst < 0.03,
            format!("chirp error {:.2}%", 100.0 * chirp_worst),
        )?;
        Ok(format!(
            "sines {:.3}%, chirp {:.2}%",
            100.0 * worst,
            100.0 * chirp_worst
        ))
    };
    let detail = sines();

    let t0 = Instant::now();
    let tracks: Vec<_> = defaults
        .par_iter()
        .map(|r| track_f0(&r.rendered.audio, &cfg).unwrap())
        .collect();
    let elapsed = t0.elapsed();
    let outcome = detail.and_then(|d| {
        check(
            elapsed < Duration::from_secs(120),
            format!("576 tracks took {elapsed:?}"),
        )?;
        Ok(format!(
            "{d}, {} tracks in {:.1} s",
            tracks.len(),
            elapsed.as_secs_f64()
        ))
    });
    (outcome, tracks)
}

fn recovery(rendered: &[Rendered], tracks: &[tonekit::speech_io::F0Track]) -> (usize, usize) {
    rendered
        .par_iter()
        .zip(tracks)
        .map(|(r, track)| {
            let grid = align_rendered(&r.rendered).unwrap().grid;
            let got = recover_tones(track, &grid, contour::DEFAULT_POINTS, 0.0);
            let truth = r.rendered.surface.tones();
            (
                got.iter()
                    .zip(&truth)
                    .filter(|(a, b)| **a == Some(**b))
                    .count(),
                truth.len(),
            )
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1))
}

fn criterion_5(
    defaults: &[Rendered],
    tracks: &[tonekit::speech_io::F0Track],
    stimuli: &[Stimulus],
) -> Outcome {
    let (ok, n) = recovery(defaults, tracks);
    let rate = ok as f64 / n as f64;

    let plain = render_all(stimuli, &CoartConfig::none());
    let plain_tracks: Vec<_> = plain
        .par_iter()
        .map(|r| track_f0(&r.rendered.audio, &PitchConfig::default()).unwrap())
        .collect();
    let (ok0, n0) = recovery(&plain, &plain_tracks);
    let detail = format!(
        "{ok}/{n} = {:.2}% at defaults (without coarticulation {ok0}/{n0} = {:.2}%)",
        100.0 * rate,
        100.0 * ok0 as f64 / n0 as f64
    );
    check(rate >= 0.99, detail.clone())?;
    Ok(detail)
}

fn summary(stimuli: &[Stimulus], coart: &CoartConfig) -> contour::CoartReport {
    let rendered = render_all(stimuli, coart);
    let reference = contour::median(
        rendered
            .iter()
            .flat_map(|r| r.rendered.synth.track.voiced_values())
            .collect(),
    )
    .unwrap();
    let records: Vec<CoartRecord> = rendered
        .iter()
        .flat_map(|r| {
            let features = interval_features(
                &r.rendered.synth.track,
                &r.rendered.synth.grid,
                reference,
                contour::DEFAULT_POINTS,
            );
            coart_records(&r.stimulus, &r.rendered.surface, &features)
        })
        .collect();
    coarticulation_summary(&records, &SummaryConfig::default())
}

const TONES: [Tone; 4] = [Tone::T1, Tone::T2, Tone::T3, Tone::T4];

fn criterion_6(stimuli: &[Stimulus]) -> Outcome {
    let carry = summary(
        stimuli,
        &CoartConfig {
            delta_st: 0.0,
            ..CoartConfig::default()
        },
    );
    let antic = summary(
        stimuli,
        &CoartConfig {
            kappa: 0.0,
            ..CoartConfig::default()
        },
    );
    let none = summary(stimuli, &CoartConfig::none());
    let fmt = |v: Vec<f64>| {
        v.iter()
            .map(|x| format!("{x:+.2}"))
            .collect::<Vec<_>>()
            .join("/")
    };
    let c: Vec<f64> = TONES
        .iter()
        .map(|t| carry.carryover_effect(*t).unwrap_or(f64::NAN))
        .collect();
    let a: Vec<f64> = TONES
        .iter()
        .map(|t| antic.anticipatory_effect(*t).unwrap_or(f64::NAN))
        .collect();
    let z: Vec<f64> = TONES
        .iter()
        .flat_map(|t| [none.carryover_effect(*t), none.anticipatory_effect(*t)])
        .map(|v| v.unwrap_or(f64::NAN))
        .collect();
    let detail = format!(
        "carry-over {} st, anticipatory {} st, null max |{:.3}| st",
        fmt(c.clone()),
        fmt(a.clone()),
        z.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    );
    check(
        c.iter().all(|v| *v > 0.0),
        format!("carry-over not positive: {detail}"),
    )?;
    check(
        a.iter().all(|v| (v - 1.0).abs() <= 0.2),
        format!("anticipatory outside 1 +/- 20%: {detail}"),
    )?;
    check(
        z.iter().all(|v| v.abs() <= 0.1),
        format!("null effects too large: {detail}"),
    )?;
    Ok(detail)
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let n = rng.random_range(12..60);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| (5.0 * v).cos() + rng.random_range(-0.5..0.5))
            .collect();
        let span = rng.random_range(0.4..1.0);
        let degree = 1 + case % 2;
        let grid: Vec<f64> = (0..20).map(|i| 0.05 + 0.9 * i as f64 / 19.0).collect();
        let fit = loess_fit(&x, &y, span, degree, &grid).map_err(|e| e.to_string())?;
        for (g, f) in grid.iter().zip(&fit.fitted) {
            worst = worst.max((f - common::reference_fit(&x, &y, *g, span, degree)).abs());
        }
    }
    check(worst < 1e-9, format!("max deviation {worst:e}"))?;
    let x: Vec<f64> = (0..30).map(|i| i as f64 * 0.3).collect();
    let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
    let grid = [0.0, 2.2, 4.5, 8.7];
    let fit = loess_fit(&x, &y, 0.5, 1, &grid).map_err(|e| e.to_string())?;
    let affine = grid
        .iter()
        .zip(&fit.fitted)
        .fold(0.0f64, |m, (g, f)| m.max((f - (2.0 * g + 1.0)).abs()));
    check(affine < 1e-9, format!("affine error {affine:e}"))?;
    Ok(format!(
        "max deviation {worst:.1e} over 100 datasets, affine error {affine:.1e}"
    ))
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..1000 {
        let a: Vec<f64> = (0..rng.random_range(1..20))
            .map(|_| rng.random_range(1..=5) as f64)
            .collect();
        let b: Vec<f64> = (0..rng.random_range(1..20))
            .map(|_| rng.random_range(1..=5) as f64)
            .collect();
        let r = mann_whitney_u(&a, &b).map_err(|e| e.to_string())?;
        check(
            r.u_a + r.u_b == (a.len() * b.len()) as f64,
            "U_a + U_b != n_a n_b",
        )?;
    }

    // Every tie-free arrangement of ranks with 8 <= n_a + n_b <= 12.
    let mut worst = (0.0f64, 0, 0);
    for n in 8..=12usize {
        for mask in 1u32..(1 << n) - 1 {
            let (a, b): (Vec<usize>, Vec<usize>) = (0..n).partition(|i| mask >> i & 1 == 1);
            let a: Vec<f64> = a.into_iter().map(|v| v as f64).collect();
            let b: Vec<f64> = b.into_iter().map(|v| v as f64).collect();
            let exact = mann_whitney_exact_p(&a, &b).map_err(|e| e.to_string())?;
            let normal = mann_whitney_normal_p(&a, &b).map_err(|e| e.to_string())?;
            if (exact - normal).abs() > worst.0 {
                worst = ((exact - normal).abs(), a.len(), b.len());
            }
        }
    }

    let w = wilcoxon_signed_rank(&[0.5, 1.0, 1.5, 2.0, 2.5]).map_err(|e| e.to_string())?;
    check(
        w.w_minus == 0.0 && (w.p_two_sided - 0.0625).abs() < 1e-12,
        format!("Wilcoxon p {}", w.p_two_sided),
    )?;
    check(
        bonferroni(&[0.01, 0.02], Some(2)) == [0.02, 0.04],
        "Bonferroni [0.01, 0.02]",
    )?;
    check(
        bonferroni(&[0.3, 0.6], None) == [0.6, 1.0],
        "Bonferroni clipping",
    )?;
    let detail = format!(
        "max |exact - normal| = {:.4} at n_a={}, n_b={}",
        worst.0, worst.1, worst.2
    );
    check(worst.0 <= 0.02, detail.clone())?;
    Ok(detail)
}

/// `n` integers differing by at most one that add up to `total`.
fn ratings_with_sum(total: u32, n: u32) -> Vec<u32> {
    let base = total / n;
    let extra = total % n;
    (0..n).map(|i| base + u32::from(i < extra)).collect()
}

fn criterion_9() -> Outcome {
    let targets = [
        ("baseline", 365, 386),
        ("bert", 404, 421),
        ("ground_truth", 439, 453),
    ];
    let mut csv = String::from("sample_id,system,rater,measure,value\n");
    for (system, nat, pro) in targets {
        for (measure, total) in [("naturalness", nat), ("prosody", pro)] {
            for (i, v) in ratings_with_sum(total, 100).into_iter().enumerate() {
                csv.push_str(&format!("s{},{system},r{},{measure},{v}\n", i % 10, i / 10));
            }
        }
    }
    let table = mos_report(&read_ratings(csv.as_bytes()).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let rendered = table.to_csv();
    for (system, nat, pro) in targets {
        for (measure, total) in [("naturalness", nat), ("prosody", pro)] {
            let line = format!("{system},{measure},100,{}.{:02}", total / 100, total % 100);
            check(
                rendered.lines().any(|l| l == line),
                format!("missing {line:?} in mos table"),
            )?;
        }
    }

    let mut jcsv = String::from("sample_id,system,rater,category,n_errors,n_target_syllables\n");
    for (system, total) in [("baseline", 131), ("bert", 92)] {
        for (i, e) in ratings_with_sum(total, 100).into_iter().enumerate() {
            jcsv.push_str(&format!("p{i},{system},r1,phrase,{e},4\n"));
        }
    }
    let board = sandhi_scoreboard(&read_judgments(jcsv.as_bytes()).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let rendered_board = board.to_csv();
    let per_phrase: Vec<&str> = rendered_board
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap())
        .collect();
    check(
        per_phrase == ["1.31", "0.92"],
        format!("errors per phrase {per_phrase:?}"),
    )?;
    Ok("3.65/3.86, 4.04/4.21, 4.39/4.53; 1.31 vs 0.92 errors per phrase".into())
}

fn criterion_10(defaults: &[Rendered]) -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = 0;
    for r in defaults.iter().step_by(12) {
        let (id, x) = (&r.stimulus.id, &r.rendered);
        let p = |ext: &str| dir.path().join(format!("{id}.{ext}"));
        let e = |err: FormatError| err.to_string();

        write_wav(&x.audio, &p("wav")).map_err(e)?;
        let audio = read_wav(&p("wav")).map_err(e)?;
        write_wav(&audio, &p("2.wav")).map_err(e)?;
        check(
            read_wav(&p("2.wav")).map_err(e)? == audio,
            format!("{id}: wav"),
        )?;
        check(
            audio
                .samples
                .iter()
                .zip(&x.audio.samples)
                .all(|(a, b)| (a - b).abs() <= 1.0 / 32768.0),
            format!("{id}: wav quantization"),
        )?;

        write_textgrid(&x.synth.grid, &p("TextGrid")).map_err(e)?;
        check(
            read_textgrid(&p("TextGrid")).map_err(e)? == x.synth.grid,
            format!("{id}: TextGrid"),
        )?;

        write_attention(&x.attention, &p("att.tsv")).map_err(e)?;
        check(
            read_attention(&p("att.tsv")).map_err(e)? == x.attention,
            format!("{id}: attention"),
        )?;

        write_f0(&x.synth.track, &p("f0.tsv"), &[]).map_err(e)?;
        let track = read_f0(&p("f0.tsv")).map_err(e)?;
        write_f0(&track, &p("2.f0.tsv"), &[]).map_err(e)?;
        check(
            read_f0(&p("2.f0.tsv")).map_err(e)? == track,
            format!("{id}: f0"),
        )?;
        files += 4;
    }

    let write = |name: &str, text: String| {
        let path = dir.path().join(name);
        std::fs::write(&path, text).unwrap();
        read_textgrid(&path)
    };
    let overlap = write(
        "overlap.TextGrid",
        common::grid_text(&[(0.0, 0.4, "a"), (0.3, 1.0, "b")]),
    );
    let gap = write(
        "gap.TextGrid",
        common::grid_text(&[(0.0, 0.3, "a"), (0.4, 1.0, "b")]),
    );
    check(
        matches!(overlap, Err(FormatError::Invalid(_))),
        "overlap accepted",
    )?;
    check(matches!(gap, Err(FormatError::Invalid(_))), "gap accepted")?;
    Ok(format!(
        "{files} files round-tripped; overlap and gap rejected"
    ))
}

fn main() {
    let stimuli = generate_coarticulation_stimuli(&StimulusConfig::default()).unwrap();
    let defaults = render_all(&stimuli, &CoartConfig::default());
    let (c4, tracks) = criterion_4(&defaults);

    let results: Vec<(&str, Outcome)> = vec![
        ("sandhi rule fidelity", criterion_1()),
        ("speaker-choice enumeration", criterion_2()),
        ("stimulus count", criterion_3()),
        ("pitch accuracy", c4),
        (
            "end-to-end tone recovery",
            criterion_5(&defaults, &tracks, &stimuli),
        ),
        ("coarticulation direction", criterion_6(&stimuli)),
        ("LOESS correctness", criterion_7()),
        ("statistics", criterion_8()),
        ("report exactness", criterion_9()),
        ("format round-trips", criterion_10(&defaults)),
    ];
    let mut failed = 0;
    for (i, (name, outcome)) in results.iter().enumerate() {
        match outcome {
            Ok(detail) => println!("criterion {:>2} {name}: PASS ({detail})", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({detail})", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
