//! Synthetic phone-on-desk sensor traces.
//!
//! Four regimes are modelled, each from a seeded generator:
//!
//! | scenario                      | accelerometer                          | microphone                               |
//! |-------------------------------|----------------------------------------|------------------------------------------|
//! | `OccupiedTyping`              | bursts of keystroke transients         | key clicks and movement sounds           |
//! | `OccupiedQuiet`               | small bumps from movement while seated | rustling / chair / speech-like sounds    |
//! | `UnoccupiedIdle`              | sensor noise, faint device hum         | near-silent mains hum, rare hallway noise |
//! | `UnoccupiedDeviceVibration`   | stronger periodic device vibration     | same as idle                             |
//!
//! Accelerometer channels are gravity-compensated (m/s²). Audio is in
//! arbitrary full-scale units.

use std::f64::consts::TAU;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MIN_DURATION_S: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    OccupiedTyping,
    OccupiedQuiet,
    UnoccupiedIdle,
    UnoccupiedDeviceVibration,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::OccupiedTyping,
        Scenario::OccupiedQuiet,
        Scenario::UnoccupiedIdle,
        Scenario::UnoccupiedDeviceVibration,
    ];

    pub fn occupied(self) -> bool {
        matches!(self, Scenario::OccupiedTyping | Scenario::OccupiedQuiet)
    }

    fn stream_id(self) -> u64 {
        match self {
            Scenario::OccupiedTyping => 1,
            Scenario::OccupiedQuiet => 2,
            Scenario::UnoccupiedIdle => 3,
            Scenario::UnoccupiedDeviceVibration => 4,
        }
    }
}

/// Generator knobs. Amplitudes are peak values; rates are events per second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OccupancyParams {
    pub accel_rate: u32,
    pub audio_rate: u32,

    pub accel_noise_sd: f64,
    /// Device vibration amplitude when someone is at the desk (laptop running).
    pub hum_occupied: f64,
    pub hum_idle: f64,
    pub hum_vibration: f64,
    pub hum_freq_hz: f64,

    /// Keystrokes per second while a typing burst is on.
    pub keystroke_rate: f64,
    pub keystroke_amp: (f64, f64),
    pub typing_burst_s: (f64, f64),
    pub typing_pause_s: (f64, f64),
    /// Seated-movement bumps per second (present in both occupied scenarios).
    pub bump_rate: f64,
    pub bump_amp: (f64, f64),

    pub audio_noise_sd: f64,
    pub mains_amp: f64,
    pub mains_hz: f64,
    /// Broadband sound events per second when occupied.
    pub occupied_sound_rate: f64,
    /// Hallway / ambient sound events per second when unoccupied.
    pub ambient_sound_rate: f64,
    pub sound_amp: (f64, f64),
    pub sound_len_s: (f64, f64),
    pub click_amp: (f64, f64),
}

impl Default for OccupancyParams {
    fn default() -> Self {
        Self {
            accel_rate: 50,
            audio_rate: 48_000,
            accel_noise_sd: 0.003,
            hum_occupied: 0.006,
            hum_idle: 0.002,
            hum_vibration: 0.01,
            hum_freq_hz: 12.0,
            keystroke_rate: 5.0,
            keystroke_amp: (0.08, 0.2),
            typing_burst_s: (2.0, 6.0),
            typing_pause_s: (0.3, 1.5),
            bump_rate: 1.5,
            bump_amp: (0.03, 0.08),
            audio_noise_sd: 3e-4,
            mains_amp: 4e-3,
            mains_hz: 50.0,
            occupied_sound_rate: 0.8,
            ambient_sound_rate: 0.04,
            sound_amp: (0.01, 0.08),
            sound_len_s: (0.05, 0.6),
            click_amp: (0.01, 0.04),
        }
    }
}

/// Multi-channel desk trace with per-second occupancy labels.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyTrace {
    pub accel_x: Vec<f64>,
    pub accel_y: Vec<f64>,
    pub accel_z: Vec<f64>,
    pub audio: Vec<f64>,
    /// One entry per second; 1 = occupied.
    pub labels: Vec<u8>,
    pub accel_rate: f64,
    pub audio_rate: f64,
}

impl OccupancyTrace {
    pub fn duration_s(&self) -> usize {
        self.labels.len()
    }

    /// Concatenates traces recorded at identical rates.
    pub fn concat(parts: Vec<OccupancyTrace>) -> Result<Self> {
        let mut iter = parts.into_iter();
        let mut out = iter.next().ok_or_else(|| Error::param("nothing to concatenate"))?;
        for p in iter {
            if p.accel_rate != out.accel_rate || p.audio_rate != out.audio_rate {
                return Err(Error::param("cannot concatenate traces with different sample rates"));
            }
            out.accel_x.extend(p.accel_x);
            out.accel_y.extend(p.accel_y);
            out.accel_z.extend(p.accel_z);
            out.audio.extend(p.audio);
            out.labels.extend(p.labels);
        }
        Ok(out)
    }

    /// `t_s,accel_x,accel_y,accel_z`
    pub fn write_accel_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "t_s,accel_x,accel_y,accel_z")?;
        for i in 0..self.accel_z.len() {
            writeln!(
                w,
                "{},{},{},{}",
                i as f64 / self.accel_rate,
                self.accel_x[i],
                self.accel_y[i],
                self.accel_z[i]
            )?;
        }
        w.flush()?;
        Ok(())
    }

    /// `t_s,audio`
    pub fn write_audio_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "t_s,audio")?;
        for (i, v) in self.audio.iter().enumerate() {
            writeln!(w, "{},{}", i as f64 / self.audio_rate, v)?;
        }
        w.flush()?;
        Ok(())
    }

    /// `t_s,label`
    pub fn write_labels_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        writeln!(w, "t_s,label")?;
        for (i, l) in self.labels.iter().enumerate() {
            writeln!(w, "{i},{l}")?;
        }
        w.flush()?;
        Ok(())
    }
}

/// [`synth_occupancy_with`] using [`OccupancyParams::default`].
pub fn synth_occupancy(scenario: Scenario, duration_s: u32, seed: u64) -> Result<OccupancyTrace> {
    synth_occupancy_with(&OccupancyParams::default(), scenario, duration_s, seed)
}

/// One trace of a single scenario. Pure in `(params, scenario, duration_s, seed)`.
pub fn synth_occupancy_with(
    params: &OccupancyParams,
    scenario: Scenario,
    duration_s: u32,
    seed: u64,
) -> Result<OccupancyTrace> {
    if duration_s < MIN_DURATION_S {
        return Err(Error::param(format!(
            "duration must be at least {MIN_DURATION_S} s, got {duration_s}"
        )));
    }
    if params.accel_rate == 0 || params.audio_rate == 0 {
        return Err(Error::param("sample rates must be positive"));
    }
    let base = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ scenario.stream_id();
    let accel = synth_accel(params, scenario, duration_s, ChaCha8Rng::seed_from_u64(base));
    let audio = synth_audio(params, scenario, duration_s, ChaCha8Rng::seed_from_u64(base ^ 0xA0D1_0000));
    let label = u8::from(scenario.occupied());
    Ok(OccupancyTrace {
        accel_x: accel[0].clone(),
        accel_y: accel[1].clone(),
        accel_z: accel[2].clone(),
        audio,
        labels: vec![label; duration_s as usize],
        accel_rate: params.accel_rate as f64,
        audio_rate: params.audio_rate as f64,
    })
}

/// Back-to-back scenario blocks; block `i` is generated with a seed derived
/// from `(seed, i)`.
pub fn synth_session(params: &OccupancyParams, schedule: &[(Scenario, u32)], seed: u64) -> Result<OccupancyTrace> {
    let parts = schedule
        .iter()
        .enumerate()
        .map(|(i, &(scenario, secs))| {
            synth_occupancy_with(params, scenario, secs, seed.wrapping_mul(1_000_003).wrapping_add(i as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    OccupancyTrace::concat(parts)
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.gen_range(lo..hi)
    } else {
        lo
    }
}

/// Event times of a homogeneous Poisson process on `[start, end)`.
fn poisson_times(rng: &mut ChaCha8Rng, rate: f64, start: f64, end: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if rate <= 0.0 {
        return out;
    }
    let gap = Exp::new(rate).expect("positive rate");
    let mut t = start + gap.sample(rng);
    while t < end {
        out.push(t);
        t += gap.sample(rng);
    }
    out
}

/// Adds a decaying oscillation starting at `t0` to `signal`.
fn add_transient(signal: &mut [f64], rate: f64, t0: f64, amp: f64, freq: f64, decay_s: f64) {
    let start = (t0 * rate).ceil() as usize;
    let len = (6.0 * decay_s * rate).ceil() as usize;
    for i in start..(start + len).min(signal.len()) {
        let t = i as f64 / rate - t0;
        signal[i] += amp * (-t / decay_s).exp() * (TAU * freq * t).cos();
    }
}

fn synth_accel(p: &OccupancyParams, scenario: Scenario, duration_s: u32, mut rng: ChaCha8Rng) -> [Vec<f64>; 3] {
    let rate = p.accel_rate as f64;
    let n = p.accel_rate as usize * duration_s as usize;
    let end = duration_s as f64;
    let noise = Normal::new(0.0, p.accel_noise_sd).expect("finite sd");
    let mut ch: [Vec<f64>; 3] = std::array::from_fn(|_| (0..n).map(|_| noise.sample(&mut rng)).collect());

    let hum = match scenario {
        Scenario::OccupiedTyping | Scenario::OccupiedQuiet => p.hum_occupied,
        Scenario::UnoccupiedIdle => p.hum_idle,
        Scenario::UnoccupiedDeviceVibration => p.hum_vibration,
    };
    let phase = rng.gen_range(0.0..TAU);
    for (i, z) in ch[2].iter_mut().enumerate() {
        let t = i as f64 / rate;
        *z += hum * ((TAU * p.hum_freq_hz * t + phase).sin() + 0.3 * (2.0 * TAU * p.hum_freq_hz * t).sin()) / 1.3;
    }

    if scenario.occupied() {
        for t0 in poisson_times(&mut rng, p.bump_rate, 0.0, end) {
            let amp = uniform(&mut rng, p.bump_amp) * if rng.gen::<bool>() { 1.0 } else { -1.0 };
            add_transient(&mut ch[2], rate, t0, amp, 4.0, 0.08);
            add_transient(&mut ch[0], rate, t0, 0.2 * amp, 4.0, 0.08);
            add_transient(&mut ch[1], rate, t0, 0.2 * amp, 4.0, 0.08);
        }
    }
    if scenario == Scenario::OccupiedTyping {
        let mut t = 0.0;
        while t < end {
            let burst_end = (t + uniform(&mut rng, p.typing_burst_s)).min(end);
            for t0 in poisson_times(&mut rng, p.keystroke_rate, t, burst_end) {
                let amp = uniform(&mut rng, p.keystroke_amp);
                add_transient(&mut ch[2], rate, t0, amp, 15.0, 0.04);
                add_transient(&mut ch[0], rate, t0, 0.3 * amp * rng.gen_range(-1.0..1.0), 15.0, 0.04);
                add_transient(&mut ch[1], rate, t0, 0.3 * amp * rng.gen_range(-1.0..1.0), 15.0, 0.04);
            }
            t = burst_end + uniform(&mut rng, p.typing_pause_s);
        }
    }
    ch
}

fn synth_audio(p: &OccupancyParams, scenario: Scenario, duration_s: u32, mut rng: ChaCha8Rng) -> Vec<f64> {
    let rate = p.audio_rate as f64;
    let n = p.audio_rate as usize * duration_s as usize;
    let end = duration_s as f64;
    let noise = Normal::new(0.0, p.audio_noise_sd).expect("finite sd");
    let phase = rng.gen_range(0.0..TAU);
    let mut audio: Vec<f64> = (0..n)
        .map(|i| {
            let t = i as f64 / rate;
            let w = TAU * p.mains_hz * t + phase;
            p.mains_amp * (w.sin() + 0.25 * (2.0 * w).sin()) + noise.sample(&mut rng)
        })
        .collect();

    let event_rate = if scenario.occupied() {
        p.occupied_sound_rate
    } else {
        p.ambient_sound_rate
    };
    for t0 in poisson_times(&mut rng, event_rate, 0.0, end) {
        let amp = uniform(&mut rng, p.sound_amp);
        let len = uniform(&mut rng, p.sound_len_s);
        // One-pole low-pass with a random corner gives each event its own colour.
        let smooth = rng.gen_range(0.0..0.9);
        add_noise_burst(&mut audio, rate, t0, len, amp, smooth, &mut rng);
    }
    if scenario == Scenario::OccupiedTyping {
        for t0 in poisson_times(&mut rng, p.keystroke_rate * 0.7, 0.0, end) {
            let amp = uniform(&mut rng, p.click_amp);
            add_noise_burst(&mut audio, rate, t0, 0.012, amp, 0.2, &mut rng);
        }
    }
    audio
}

fn add_noise_burst(audio: &mut [f64], rate: f64, t0: f64, len_s: f64, amp: f64, smooth: f64, rng: &mut ChaCha8Rng) {
    let start = (t0 * rate) as usize;
    let len = (len_s * rate).ceil() as usize;
    let stop = (start + len).min(audio.len());
    let mut state = 0.0;
    for (k, s) in audio[start..stop].iter_mut().enumerate() {
        let white: f64 = rng.gen_range(-1.0..1.0);
        state = smooth * state + (1.0 - smooth) * white;
        // Hann envelope.
        let env = 0.5 - 0.5 * (TAU * k as f64 / len as f64).cos();
        *s += amp * env * state / (1.0 - smooth).sqrt().max(0.3);
    }
}
