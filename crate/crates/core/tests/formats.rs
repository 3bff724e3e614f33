mod common;

use std::path::Path;

use common::grid_text;

use tonekit::pipeline::{render_stimulus, DEFAULT_SAMPLE_RATE};
use tonekit::simsynth::{CoartConfig, SynthConfig, ToneTemplate};
use tonekit::speech_io::{
    read_attention, read_f0, read_textgrid, read_wav, write_attention, write_f0, write_textgrid,
    write_wav, FormatError, DEFAULT_HOP_S,
};
use tonekit::stimuli::{generate_coarticulation_stimuli, StimulusConfig};

#[test]
fn generated_corpus_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let stimuli = generate_coarticulation_stimuli(&StimulusConfig::default()).unwrap();
    let cfg = SynthConfig {
        jitter_st: 0.5,
        seed: 11,
        ..SynthConfig::default()
    };
    for s in stimuli.iter().step_by(37) {
        let r = render_stimulus(
            s,
            &ToneTemplate::default(),
            &CoartConfig::default(),
            &cfg,
            DEFAULT_SAMPLE_RATE,
            DEFAULT_HOP_S,
        )
        .unwrap();
        let p = |ext: &str| dir.path().join(format!("{}.{ext}", s.id));

        write_wav(&r.audio, &p("wav")).unwrap();
        let audio = read_wav(&p("wav")).unwrap();
        assert_eq!(audio.sample_rate, r.audio.sample_rate);
        assert_eq!(audio.samples.len(), r.audio.samples.len());
        for (a, b) in audio.samples.iter().zip(&r.audio.samples) {
            assert!((a - b).abs() <= 1.0 / 32768.0);
        }
        write_wav(&audio, &p("2.wav")).unwrap();
        assert_eq!(read_wav(&p("2.wav")).unwrap(), audio);
        assert_eq!(
            std::fs::read(p("wav")).unwrap(),
            std::fs::read(p("2.wav")).unwrap()
        );

        write_textgrid(&r.synth.grid, &p("TextGrid")).unwrap();
        assert_eq!(read_textgrid(&p("TextGrid")).unwrap(), r.synth.grid);

        write_attention(&r.attention, &p("att.tsv")).unwrap();
        assert_eq!(read_attention(&p("att.tsv")).unwrap(), r.attention);

        write_f0(&r.synth.track, &p("f0.tsv"), &["generated".to_string()]).unwrap();
        let track = read_f0(&p("f0.tsv")).unwrap();
        assert_eq!(track.len(), r.synth.track.len());
        for (a, b) in track.frames().iter().zip(r.synth.track.frames()) {
            assert!((a.time - b.time).abs() < 1e-6);
            assert_eq!(a.f0.is_some(), b.f0.is_some());
            if let (Some(x), Some(y)) = (a.f0, b.f0) {
                assert!((x - y).abs() < 1e-6);
            }
        }
        write_f0(&track, &p("2.f0.tsv"), &[]).unwrap();
        assert_eq!(read_f0(&p("2.f0.tsv")).unwrap(), track);
    }
}

fn read_text(
    dir: &Path,
    name: &str,
    text: &str,
) -> Result<tonekit::speech_io::TextGrid, FormatError> {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    read_textgrid(&path)
}

#[test]
fn validator_rejects_overlaps_and_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let ok = read_text(
        dir.path(),
        "ok.TextGrid",
        &grid_text(&[(0.0, 0.3, "a"), (0.3, 0.5, "b"), (0.5, 1.0, "c")]),
    )
    .unwrap();
    assert_eq!(ok.tier("symbols").unwrap().intervals.len(), 3);
    let overlap = read_text(
        dir.path(),
        "overlap.TextGrid",
        &grid_text(&[(0.0, 0.35, "a"), (0.3, 0.5, "b"), (0.5, 1.0, "c")]),
    );
    assert!(
        matches!(overlap, Err(FormatError::Invalid(_))),
        "{overlap:?}"
    );
    let gap = read_text(
        dir.path(),
        "gap.TextGrid",
        &grid_text(&[(0.0, 0.3, "a"), (0.32, 0.5, "b"), (0.5, 1.0, "c")]),
    );
    assert!(matches!(gap, Err(FormatError::Invalid(_))), "{gap:?}");
    let short = read_text(
        dir.path(),
        "short.TextGrid",
        &grid_text(&[(0.0, 0.3, "a"), (0.3, 0.5, "b")])
            .replace("xmax = 0.5\ntiers", "xmax = 1\ntiers"),
    );
    assert!(short.is_err());
}
