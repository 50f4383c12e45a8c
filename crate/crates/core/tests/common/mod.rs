//! Synthetic corpora shared by the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use textlstm::drum::{DrumComponent, DrumWord, BAR_FLAG, SLOTS_PER_BAR};

/// Eight distinct chords; each determines its successor.
pub const CYCLE: [&str; 8] = [
    "C:maj", "A:min7", "D:min7", "G:7", "E:min7", "A:7", "F:maj7", "G:sus4",
];

/// The chord cycle repeated until `len` tokens.
pub fn cyclic_chords(len: usize) -> Vec<&'static str> {
    CYCLE.iter().copied().cycle().take(len).collect()
}

/// A few C-major progressions, expanded one token per quarter note.
pub fn small_chord_corpus() -> String {
    let songs = [
        ["C:maj", "A:min", "F:maj", "G:7"],
        ["C:maj", "F:maj", "G:7", "C:maj"],
        ["D:min7", "G:7", "C:maj7", "C:maj7"],
        ["A:min", "F:maj", "C:maj", "G:maj"],
    ];
    let mut parts = Vec::new();
    for song in songs.iter().cycle().take(12) {
        parts.push("_START_".to_string());
        for chord in song {
            for _ in 0..4 {
                parts.push(chord.to_string());
            }
        }
        parts.push("_END_".to_string());
    }
    parts.join(" ")
}

fn word(components: &[DrumComponent]) -> DrumWord {
    components.iter().fold(DrumWord::SILENT, |w, &c| w.with(c))
}

/// Rock-beat bars in which `fill_share` of the sounding slots, chosen at
/// random, are replaced by tom or crash hits.
pub fn drum_corpus(bars: usize, fill_share: f64, seed: u64) -> Vec<String> {
    use DrumComponent::*;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fills = [word(&[TomHigh]), word(&[TomMid]), word(&[TomLow]), word(&[Crash, Kick])];
    let mut words = Vec::with_capacity(bars * SLOTS_PER_BAR);
    for _ in 0..bars {
        for slot in 0..SLOTS_PER_BAR {
            words.push(match slot {
                0 | 8 => word(&[Kick, ClosedHiHat]),
                4 | 12 => word(&[Snare, ClosedHiHat]),
                s if s % 2 == 0 => word(&[ClosedHiHat]),
                _ => DrumWord::SILENT,
            });
        }
    }
    let sounding: Vec<usize> = (0..words.len()).filter(|&i| !words[i].is_silent()).collect();
    let n_fills = (fill_share * sounding.len() as f64).round() as usize;
    for k in rand::seq::index::sample(&mut rng, sounding.len(), n_fills) {
        words[sounding[k]] = fills[rng.random_range(0..fills.len())];
    }
    let mut tokens = Vec::with_capacity(bars * (SLOTS_PER_BAR + 1));
    for bar in words.chunks(SLOTS_PER_BAR) {
        tokens.push(BAR_FLAG.to_string());
        tokens.extend(bar.iter().map(DrumWord::to_string));
    }
    tokens
}
