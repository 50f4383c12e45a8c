//! Drum tracks as binary words.
//!
//! Each 16th-note slot becomes one 9-character word, one digit per drum
//! component in the order kick, snare, open hi-hat, closed hi-hat, high tom,
//! mid tom, low tom, crash, ride. `100000000` is a kick alone, `110000000` a
//! kick and snare together. Every bar is introduced by a `_BAR_` flag, so a
//! bar is always 17 tokens.

mod smf;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use smf::{read_smf, read_vlq, write_smf, write_vlq, SmfError, DEFAULT_PPQN, DRUM_CHANNEL};

pub const BAR_FLAG: &str = "_BAR_";
pub const SLOTS_PER_BAR: usize = 16;
pub const NUM_COMPONENTS: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DrumComponent {
    Kick,
    Snare,
    OpenHiHat,
    ClosedHiHat,
    TomHigh,
    TomMid,
    TomLow,
    Crash,
    Ride,
}

impl DrumComponent {
    pub const ALL: [DrumComponent; NUM_COMPONENTS] = [
        DrumComponent::Kick,
        DrumComponent::Snare,
        DrumComponent::OpenHiHat,
        DrumComponent::ClosedHiHat,
        DrumComponent::TomHigh,
        DrumComponent::TomMid,
        DrumComponent::TomLow,
        DrumComponent::Crash,
        DrumComponent::Ride,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// General MIDI note written when rendering this component.
    pub fn canonical_note(self) -> u8 {
        match self {
            DrumComponent::Kick => 36,
            DrumComponent::Snare => 38,
            DrumComponent::OpenHiHat => 46,
            DrumComponent::ClosedHiHat => 42,
            DrumComponent::TomHigh => 48,
            DrumComponent::TomMid => 45,
            DrumComponent::TomLow => 41,
            DrumComponent::Crash => 49,
            DrumComponent::Ride => 51,
        }
    }

    /// Toms and crash, the components that make up a fill-in.
    pub fn is_fill(self) -> bool {
        matches!(
            self,
            DrumComponent::TomHigh | DrumComponent::TomMid | DrumComponent::TomLow | DrumComponent::Crash
        )
    }
}

/// Maps a General MIDI percussion note onto one of the nine components.
/// Pedal hi-hat counts as closed hi-hat; unlisted notes are dropped.
pub fn map_gm(note: u8) -> Option<DrumComponent> {
    use DrumComponent::*;
    Some(match note {
        35 | 36 => Kick,
        38 | 40 => Snare,
        46 => OpenHiHat,
        42 | 44 => ClosedHiHat,
        48 | 50 => TomHigh,
        45 | 47 => TomMid,
        41 | 43 => TomLow,
        49 | 57 => Crash,
        51 | 59 => Ride,
        _ => return None,
    })
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DrumError {
    #[error("invalid drum word {0:?}: expected 9 characters of 0/1")]
    InvalidWord(String),
    #[error("tempo must be positive and finite, got {0}")]
    InvalidTempo(f64),
    #[error(transparent)]
    Smf(#[from] SmfError),
}

/// Which components sound at one 16th-note slot. Bit `k` is component `k`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DrumWord(u16);

impl DrumWord {
    pub const SILENT: DrumWord = DrumWord(0);
    /// Number of distinct words, 2⁹.
    pub const CARDINALITY: usize = 1 << NUM_COMPONENTS;

    pub fn from_bits(bits: u16) -> Option<Self> {
        (bits < Self::CARDINALITY as u16).then_some(Self(bits))
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    pub fn has(self, c: DrumComponent) -> bool {
        self.0 & (1 << c.index()) != 0
    }

    pub fn with(self, c: DrumComponent) -> Self {
        Self(self.0 | (1 << c.index()))
    }

    pub fn union(self, other: Self) -> Self {
        Self(self.0 | other.0)
    }

    pub fn components(self) -> impl Iterator<Item = DrumComponent> {
        DrumComponent::ALL.into_iter().filter(move |&c| self.has(c))
    }

    pub fn is_silent(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for DrumWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in DrumComponent::ALL {
            f.write_str(if self.has(c) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for DrumWord {
    type Err = DrumError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.len() != NUM_COMPONENTS {
            return Err(DrumError::InvalidWord(s.to_string()));
        }
        let mut w = DrumWord::SILENT;
        for (k, b) in s.bytes().enumerate() {
            match b {
                b'1' => w = w.with(DrumComponent::ALL[k]),
                b'0' => {}
                _ => return Err(DrumError::InvalidWord(s.to_string())),
            }
        }
        Ok(w)
    }
}

pub type Bar = [DrumWord; SLOTS_PER_BAR];

/// Bars of sixteen 16th-note slots.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DrumGrid {
    pub bars: Vec<Bar>,
}

impl DrumGrid {
    pub fn slots(&self) -> impl Iterator<Item = DrumWord> + '_ {
        self.bars.iter().flat_map(|b| b.iter().copied())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DrumEvent {
    pub tick: u64,
    pub note: u8,
}

/// Drum note-ons on a tick timeline, assumed 4/4.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DrumEventList {
    pub ppqn: u16,
    pub events: Vec<DrumEvent>,
}

impl DrumEventList {
    pub fn new(ppqn: u16) -> Self {
        Self {
            ppqn,
            events: Vec::new(),
        }
    }
}

/// Snaps events to the nearest 16th note (exact midpoints go to the later
/// slot) and OR-merges everything landing in the same slot. Unmapped notes are
/// dropped; the grid ends with the last bar that contains a hit.
pub fn quantize(list: &DrumEventList) -> DrumGrid {
    let ppqn = list.ppqn.max(1) as u64;
    let mut grid = DrumGrid::default();
    for e in &list.events {
        let Some(c) = map_gm(e.note) else { continue };
        // round(4·tick/ppqn) with half-up ties, in integers
        let slot = ((8 * e.tick + ppqn) / (2 * ppqn)) as usize;
        let bar = slot / SLOTS_PER_BAR;
        if grid.bars.len() <= bar {
            grid.bars.resize(bar + 1, [DrumWord::SILENT; SLOTS_PER_BAR]);
        }
        let w = &mut grid.bars[bar][slot % SLOTS_PER_BAR];
        *w = w.with(c);
    }
    grid
}

/// `_BAR_` followed by the bar's sixteen words, for every bar.
pub fn encode_words(grid: &DrumGrid) -> String {
    let mut toks: Vec<String> = Vec::with_capacity(grid.bars.len() * (SLOTS_PER_BAR + 1));
    for bar in &grid.bars {
        toks.push(BAR_FLAG.to_string());
        toks.extend(bar.iter().map(DrumWord::to_string));
    }
    toks.join(" ")
}

/// Result of reading generated drum tokens.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParsedWords {
    pub grid: DrumGrid,
    /// Tokens that were neither a flag nor a valid word.
    pub skipped: usize,
}

/// Rebuilds a grid from tokens. Each `_BAR_` opens a new bar; words fill
/// slots in order and spill into a fresh bar after the sixteenth; short bars
/// are padded with silence.
pub fn parse_words<S: AsRef<str>>(tokens: &[S]) -> ParsedWords {
    let mut bars: Vec<Bar> = Vec::new();
    let mut slot = SLOTS_PER_BAR;
    let mut skipped = 0;
    for tok in tokens.iter().map(AsRef::as_ref) {
        if tok == BAR_FLAG {
            bars.push([DrumWord::SILENT; SLOTS_PER_BAR]);
            slot = 0;
            continue;
        }
        let Ok(word) = tok.parse::<DrumWord>() else {
            skipped += 1;
            continue;
        };
        if slot == SLOTS_PER_BAR {
            bars.push([DrumWord::SILENT; SLOTS_PER_BAR]);
            slot = 0;
        }
        bars.last_mut().expect("bar opened above")[slot] = word;
        slot += 1;
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} malformed drum tokens");
    }
    ParsedWords {
        grid: DrumGrid { bars },
        skipped,
    }
}

/// Events rendered from a grid at [`DEFAULT_PPQN`]: slot `s` of bar `b`
/// sounds at tick `(16b + s)·ppqn/4`, one canonical note per set bit.
pub fn grid_to_events(grid: &DrumGrid) -> DrumEventList {
    let step = DEFAULT_PPQN as u64 / 4;
    let mut list = DrumEventList::new(DEFAULT_PPQN);
    for (i, w) in grid.slots().enumerate() {
        for c in w.components() {
            list.events.push(DrumEvent {
                tick: i as u64 * step,
                note: c.canonical_note(),
            });
        }
    }
    list
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecodedWords {
    pub events: DrumEventList,
    pub skipped: usize,
}

pub fn decode_words<S: AsRef<str>>(tokens: &[S], tempo_bpm: f64) -> Result<DecodedWords, DrumError> {
    if !(tempo_bpm > 0.0 && tempo_bpm.is_finite()) {
        return Err(DrumError::InvalidTempo(tempo_bpm));
    }
    let parsed = parse_words(tokens);
    Ok(DecodedWords {
        events: grid_to_events(&parsed.grid),
        skipped: parsed.skipped,
    })
}

/// One line per bar of the parsed grid, sixteen words each.
pub fn render_rows<S: AsRef<str>>(tokens: &[S]) -> String {
    parse_words(tokens)
        .grid
        .bars
        .iter()
        .map(|bar| bar.iter().map(DrumWord::to_string).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Share of non-silent drum words that contain a tom or crash hit.
pub fn fill_fraction<S: AsRef<str>>(tokens: &[S]) -> f64 {
    let words: Vec<DrumWord> = tokens
        .iter()
        .filter_map(|t| t.as_ref().parse::<DrumWord>().ok())
        .filter(|w| !w.is_silent())
        .collect();
    if words.is_empty() {
        return 0.0;
    }
    let fills = words.iter().filter(|w| w.components().any(DrumComponent::is_fill)).count();
    fills as f64 / words.len() as f64
}
