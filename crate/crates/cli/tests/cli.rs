use std::path::Path;
use std::process::{Command, Output};

fn tonekit(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tonekit"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn sandhi_examples() {
    let dir = tempfile::tempdir().unwrap();
    let out = tonekit(&["sandhi", "[mi3 [lao3 shu3]]"], dir.path());
    assert!(out.status.success());
    assert_eq!(stdout(&out), "mi3 lao2 shu3\n");
    let out = tonekit(&["sandhi", "[[meng3 gu3] yu3]"], dir.path());
    assert_eq!(stdout(&out), "meng2 gu2 yu3\n");
    let out = tonekit(&["sandhi", "--enumerate", "ma3", "ma3", "ma3"], dir.path());
    assert_eq!(stdout(&out), "ma2 ma2 ma3\nma3 ma2 ma3\n");
}

#[test]
fn default_stimuli_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = tonekit(&["gen-stimuli", "--defaults"], dir.path());
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().count(), 576);
    let out = tonekit(&["gen-stimuli", "--allow-same-syllable"], dir.path());
    assert_eq!(stdout(&out).lines().count(), 864);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(tonekit(&["--help"], dir.path()).status.code(), Some(0));
    assert_eq!(
        tonekit(&["no-such-command"], dir.path()).status.code(),
        Some(1)
    );
    assert_eq!(
        tonekit(
            &["pitch", "--in", "missing.wav", "--out", "x.tsv"],
            dir.path()
        )
        .status
        .code(),
        Some(1)
    );
    assert_eq!(
        tonekit(&["sandhi", "ma7"], dir.path()).status.code(),
        Some(1)
    );
    assert_eq!(
        tonekit(&["--config", "missing.toml", "sandhi", "ma3"], dir.path())
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        tonekit(&["gen-stimuli", "--jobs", "0"], dir.path())
            .status
            .code(),
        Some(1)
    );

    std::fs::write(dir.path().join("m.jsonl"), "").unwrap();
    let out = tonekit(
        &[
            "simsynth",
            "--manifest",
            "m.jsonl",
            "--out-dir",
            "o",
            "--jitter",
            "0.5",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));

    // Output into a path under a regular file cannot be created.
    std::fs::write(dir.path().join("blocker"), "").unwrap();
    let out = tonekit(&["gen-stimuli", "--out", "blocker/m.jsonl"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_sections_apply() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("c.toml"),
        "[gen_stimuli]\nsyllables = \"ma,mi\"\ntones = \"1,3\"\n",
    )
    .unwrap();
    let out = tonekit(&["--config", "c.toml", "gen-stimuli"], dir.path());
    assert!(out.status.success());
    assert_eq!(stdout(&out).lines().count(), 2 * 4 * 6);
    let out = tonekit(
        &["--config", "c.toml", "gen-stimuli", "--tones", "1,2,3"],
        dir.path(),
    );
    assert_eq!(stdout(&out).lines().count(), 2 * 9 * 6);
}

#[test]
fn pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let run = |args: &[&str]| {
        let out = tonekit(args, d);
        assert!(
            out.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        out
    };
    run(&["gen-stimuli", "--syllables", "ma,mi", "--out", "m.jsonl"]);
    run(&[
        "--jobs",
        "2",
        "simsynth",
        "--manifest",
        "m.jsonl",
        "--out-dir",
        "syn",
        "--kappa",
        "0",
        "--delta",
        "0",
    ]);
    run(&["pitch", "--in-dir", "syn", "--out-dir", "f0"]);
    run(&[
        "align",
        "--manifest",
        "m.jsonl",
        "--att-dir",
        "syn",
        "--out-dir",
        "grids",
    ]);
    let report = run(&[
        "analyze-coart",
        "--manifest",
        "m.jsonl",
        "--f0-dir",
        "f0",
        "--grids",
        "grids",
        "--out",
        "rep",
    ]);
    assert!(stdout(&report).starts_with("tone recovery: "));
    for f in [
        "tones.csv",
        "realized.jsonl",
        "carryover.csv",
        "anticipatory.csv",
        "loess_curves.csv",
    ] {
        assert!(d.join("rep").join(f).is_file(), "{f}");
    }
    // 32 stimuli per carrier; carriers hold 8, 7, 7, 7, 7 and 11 syllables.
    assert_eq!(
        std::fs::read_to_string(d.join("rep/tones.csv"))
            .unwrap()
            .lines()
            .count(),
        1 + 32 * 47
    );

    run(&[
        "sandhi-oracle",
        "--manifest",
        "m.jsonl",
        "--out",
        "oracle.jsonl",
    ]);
    assert_eq!(
        std::fs::read_to_string(d.join("oracle.jsonl"))
            .unwrap()
            .lines()
            .count(),
        12
    );
    let score = run(&[
        "score-sandhi",
        "--oracle",
        "oracle.jsonl",
        "--realized",
        "rep/realized.jsonl",
        "--out",
        "score",
    ]);
    assert!(stdout(&score).contains("simsynth"));
    assert!(d.join("score/scoreboard.csv").is_file());

    run(&["sandhi-oracle", "--out", "items.jsonl"]);
    let single = run(&[
        "align",
        "--att",
        "syn/c1_ma1_mi1.att.tsv",
        "--symbols",
        "wo3 shuo1 ma1 mi1 zhe4 ge4 zi4 yan3",
        "--out",
        "one.TextGrid",
    ]);
    assert!(single.status.success());
    run(&[
        "pitch",
        "--in",
        "syn/c1_ma1_mi1.wav",
        "--out",
        "one.f0.tsv",
        "--floor",
        "100",
    ]);
    assert!(std::fs::read_to_string(d.join("one.f0.tsv"))
        .unwrap()
        .contains("floor=100"));
}

#[test]
fn mos_report_tables() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("sample_id,system,rater,measure,value\n");
    for (system, base) in [("baseline", 3), ("bert", 4)] {
        for rater in 0..6 {
            for sample in 0..4 {
                for measure in ["naturalness", "prosody"] {
                    let v = base + u32::from((rater + sample) % 3 == 0);
                    csv.push_str(&format!("s{sample},{system},r{rater},{measure},{v}\n"));
                }
            }
        }
    }
    std::fs::write(dir.path().join("r.csv"), csv).unwrap();
    let out = tonekit(
        &["mos-report", "--ratings", "r.csv", "--out", "mos"],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert!(text.contains("wilcoxon_signed_rank"), "{text}");
    let mos = std::fs::read_to_string(dir.path().join("mos/mos.csv")).unwrap();
    assert!(mos.contains("baseline,naturalness,24,3.33"), "{mos}");
    let out = tonekit(
        &["mos-report", "--ratings", "r.csv", "--test", "mann-whitney"],
        dir.path(),
    );
    assert!(stdout(&out).contains("mann_whitney_u"));
}
