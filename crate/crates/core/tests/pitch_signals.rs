use tonekit::pitch::{track_f0, PitchConfig};
use tonekit::speech_io::AudioBuffer;

const SR: u32 = 22050;

fn sine(freq: f64, seconds: f64) -> AudioBuffer {
    let n = (seconds * SR as f64) as usize;
    let samples = (0..n)
        .map(|i| 0.5 * (2.0 * std::f64::consts::PI * freq * i as f64 / SR as f64).sin())
        .collect();
    AudioBuffer::new(samples, SR).unwrap()
}

#[test]
fn sines_within_one_percent() {
    for freq in [100.0, 150.0, 220.0, 300.0, 400.0] {
        let track = track_f0(&sine(freq, 0.6), &PitchConfig::default()).unwrap();
        assert!(track.len() > 40);
        for fr in track.frames() {
            let f = fr
                .f0
                .unwrap_or_else(|| panic!("{freq} Hz unvoiced at {}", fr.time));
            assert!(
                (f / freq - 1.0).abs() < 0.01,
                "{freq} Hz tracked as {f} at {}",
                fr.time
            );
        }
    }
}

#[test]
fn silence_is_unvoiced() {
    let audio = AudioBuffer::new(vec![0.0; SR as usize / 2], SR).unwrap();
    let track = track_f0(&audio, &PitchConfig::default()).unwrap();
    assert!(!track.is_empty());
    assert!(track.frames().iter().all(|f| f.f0.is_none()));
}

#[test]
fn linear_chirp_within_three_percent() {
    let (f0, f1, dur) = (150.0, 300.0, 1.0);
    let rate = (f1 - f0) / dur;
    let n = (dur * SR as f64) as usize;
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 / SR as f64;
            0.5 * (2.0 * std::f64::consts::PI * (f0 * t + 0.5 * rate * t * t)).sin()
        })
        .collect();
    let track = track_f0(
        &AudioBuffer::new(samples, SR).unwrap(),
        &PitchConfig::default(),
    )
    .unwrap();
    assert!(track.len() > 80);
    for fr in track.frames() {
        let want = f0 + rate * fr.time;
        let got = fr.f0.expect("chirp frames voiced");
        assert!(
            (got / want - 1.0).abs() < 0.03,
            "{got} vs {want} at {}",
            fr.time
        );
    }
}
