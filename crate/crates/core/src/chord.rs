//! Chord scores as text.
//!
//! A score is a sequence of timed chord changes in some key. For training it
//! is transposed to C and expanded to one chord token per quarter note,
//! wrapped in `_START_`/`_END_` flags:
//!
//! ```text
//! _START_ F:9 F:9 F:9 F:9 D:min7 D:min7 G:9 G:9 ... _END_
//! ```
//!
//! Generated token streams go the other way through [`decode_progression`],
//! which regroups them into 4-beat bars and drops repeats within a bar.
//!
//! # Lab files
//!
//! Scores are read from a small line-oriented format:
//!
//! ```text
//! # key: G
//! 0 4 D:min7
//! 4 6 G:7
//! 6 8 C:maj
//! ```
//!
//! Each event line is `<start_quarter> <end_quarter> <chord>`. Events must
//! start at quarter 0 and may not overlap; gaps are filled by the preceding
//! chord. The last end time is the score length and must be a whole number of
//! 4/4 bars. Other `#` lines are comments.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::tokenizer::{build_vocab, Mode};

pub const START_FLAG: &str = "_START_";
pub const END_FLAG: &str = "_END_";
pub const QUARTERS_PER_BAR: u32 = 4;

/// Flags are tokens wrapped in underscores (`_START_`, `_END_`, `_BAR_`).
pub fn is_flag(token: &str) -> bool {
    token.len() >= 3 && token.starts_with('_') && token.ends_with('_')
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChordError {
    #[error("cannot parse chord {token:?} at position {position}: {reason}")]
    Parse {
        token: String,
        position: usize,
        reason: &'static str,
    },
    #[error("invalid pitch name {0:?}")]
    InvalidPitch(String),
    #[error("invalid score: {0}")]
    InvalidScore(String),
    #[error("event at quarter {start} lies beyond the score length of {length} quarters")]
    EventOutOfRange { start: u32, length: u32 },
    #[error("line {line}: {message}")]
    Lab { line: usize, message: String },
    #[error("lab file has no `# key: <root>` header")]
    MissingKey,
    #[error("unbalanced flags at token {position}: {message}")]
    UnbalancedFlags { position: usize, message: &'static str },
    #[error("corpus is empty")]
    EmptyCorpus,
}

const SHARP_NAMES: [&str; 12] = [
    "C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PitchClass(u8);

impl PitchClass {
    pub const C: PitchClass = PitchClass(0);

    pub fn new(value: u8) -> Option<Self> {
        (value < 12).then_some(Self(value))
    }

    pub fn value(self) -> u8 {
        self.0
    }

    pub fn transpose(self, semitones: i32) -> Self {
        Self((self.0 as i32 + semitones).rem_euclid(12) as u8)
    }

    /// Sharp spelling.
    pub fn name(self) -> &'static str {
        SHARP_NAMES[self.0 as usize]
    }

    /// Parses a letter with an optional `#` or `b` from the start of `s`,
    /// returning the pitch class and the number of bytes consumed.
    fn parse_prefix(s: &str) -> Option<(Self, usize)> {
        let mut chars = s.chars();
        let base: i32 = match chars.next()? {
            'C' => 0,
            'D' => 2,
            'E' => 4,
            'F' => 5,
            'G' => 7,
            'A' => 9,
            'B' => 11,
            _ => return None,
        };
        match chars.next() {
            Some('#') => Some((Self(0).transpose(base + 1), 2)),
            Some('b') => Some((Self(0).transpose(base - 1), 2)),
            _ => Some((Self(base as u8), 1)),
        }
    }
}

impl fmt::Display for PitchClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PitchClass {
    type Err = ChordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match Self::parse_prefix(s) {
            Some((pc, used)) if used == s.len() => Ok(pc),
            _ => Err(ChordError::InvalidPitch(s.to_string())),
        }
    }
}

/// `<root>:<quality>`. The quality is kept verbatim, including any `/3`-style
/// bass degree, which is relative to the root and never transposed.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ChordSymbol {
    pub root: PitchClass,
    pub quality: String,
}

impl ChordSymbol {
    pub fn new(root: PitchClass, quality: impl Into<String>) -> Self {
        Self {
            root,
            quality: quality.into(),
        }
    }

    pub fn transpose(&self, semitones: i32) -> Self {
        Self {
            root: self.root.transpose(semitones),
            quality: self.quality.clone(),
        }
    }
}

impl fmt::Display for ChordSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.root, self.quality)
    }
}

impl FromStr for ChordSymbol {
    type Err = ChordError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_chord(s)
    }
}

pub fn parse_chord(text: &str) -> Result<ChordSymbol, ChordError> {
    let fail = |position, reason| ChordError::Parse {
        token: text.to_string(),
        position,
        reason,
    };
    if text.is_empty() {
        return Err(fail(0, "empty token"));
    }
    if let Some(pos) = text.find(char::is_whitespace) {
        return Err(fail(pos, "whitespace inside chord token"));
    }
    let (root, used) = PitchClass::parse_prefix(text).ok_or_else(|| fail(0, "invalid root"))?;
    let rest = &text[used..];
    match rest.strip_prefix(':') {
        None if rest.contains(':') => Err(fail(used, "invalid root")),
        None => Err(fail(used, "missing ':' after root")),
        Some("") => Err(fail(used + 1, "empty quality")),
        Some(quality) => Ok(ChordSymbol::new(root, quality)),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChordEvent {
    pub start: u32,
    pub chord: ChordSymbol,
}

/// Chord changes on a quarter-note timeline, 4/4 throughout.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Score {
    pub key: PitchClass,
    pub events: Vec<ChordEvent>,
    pub length_quarters: u32,
}

impl Score {
    pub fn new(
        key: PitchClass,
        events: Vec<ChordEvent>,
        length_quarters: u32,
    ) -> Result<Self, ChordError> {
        let s = Self {
            key,
            events,
            length_quarters,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ChordError> {
        let bad = |m: String| Err(ChordError::InvalidScore(m));
        if self.length_quarters == 0 || !self.length_quarters.is_multiple_of(QUARTERS_PER_BAR) {
            return bad(format!(
                "length {} is not a positive multiple of {QUARTERS_PER_BAR} quarters",
                self.length_quarters
            ));
        }
        match self.events.first() {
            None => return bad("score has no chords".into()),
            Some(e) if e.start != 0 => return bad(format!("first chord starts at quarter {}, not 0", e.start)),
            _ => {}
        }
        if let Some(w) = self.events.windows(2).find(|w| w[1].start <= w[0].start) {
            return bad(format!(
                "chord changes not strictly increasing ({} then {})",
                w[0].start, w[1].start
            ));
        }
        if let Some(e) = self.events.iter().find(|e| e.start >= self.length_quarters) {
            return Err(ChordError::EventOutOfRange {
                start: e.start,
                length: self.length_quarters,
            });
        }
        Ok(())
    }

    pub fn transposed_by(&self, semitones: i32) -> Score {
        Score {
            key: self.key.transpose(semitones),
            events: self
                .events
                .iter()
                .map(|e| ChordEvent {
                    start: e.start,
                    chord: e.chord.transpose(semitones),
                })
                .collect(),
            length_quarters: self.length_quarters,
        }
    }
}

/// Shifts every root so the score is in C.
pub fn transpose_score(score: &Score) -> Score {
    score.transposed_by(-(score.key.value() as i32))
}

/// One chord token per quarter note between `_START_` and `_END_`.
pub fn expand_to_text(score: &Score) -> Result<String, ChordError> {
    score.validate()?;
    let mut out = Vec::with_capacity(score.length_quarters as usize + 2);
    out.push(START_FLAG.to_string());
    let mut next = 0;
    let mut current = String::new();
    for q in 0..score.length_quarters {
        while next < score.events.len() && score.events[next].start == q {
            current = score.events[next].chord.to_string();
            next += 1;
        }
        out.push(current.clone());
    }
    out.push(END_FLAG.to_string());
    Ok(out.join(" "))
}

/// Renders a generated token sequence as a lead sheet: chords grouped into
/// bars of four beats separated by `|`, consecutive repeats within a bar
/// collapsed. Flags are printed verbatim and restart bar alignment, so
/// grouping after `_START_` begins with its first chord. A trailing partial
/// bar is printed as is.
pub fn decode_progression<S: AsRef<str>>(tokens: &[S]) -> String {
    enum Segment {
        Flag(String),
        Bars(Vec<Vec<String>>),
    }

    fn close(bars: &mut Vec<Vec<String>>, segments: &mut Vec<Segment>) {
        if !bars.is_empty() {
            segments.push(Segment::Bars(std::mem::take(bars)));
        }
    }

    let mut segments = Vec::new();
    let mut bars: Vec<Vec<String>> = Vec::new();
    let mut beat = 0u32;
    for tok in tokens.iter().map(AsRef::as_ref) {
        if is_flag(tok) {
            close(&mut bars, &mut segments);
            segments.push(Segment::Flag(tok.to_string()));
            beat = 0;
            continue;
        }
        if beat == 0 {
            bars.push(Vec::new());
        }
        let bar = bars.last_mut().expect("bar opened above");
        if bar.last().map(String::as_str) != Some(tok) {
            bar.push(tok.to_string());
        }
        beat = (beat + 1) % QUARTERS_PER_BAR;
    }
    close(&mut bars, &mut segments);

    segments
        .into_iter()
        .map(|s| match s {
            Segment::Flag(f) => f,
            Segment::Bars(bars) => {
                let inner: Vec<String> = bars.iter().map(|b| b.join(" ")).collect();
                format!("| {} |", inner.join(" | "))
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn read_lab(text: &str) -> Result<Score, ChordError> {
    let mut key: Option<PitchClass> = None;
    let mut events: Vec<ChordEvent> = Vec::new();
    let mut prev_end: Option<u32> = None;
    let mut last_line = 0;

    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let lab = |message: String| ChordError::Lab {
            line: line_no,
            message,
        };
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(k) = comment.trim().strip_prefix("key:") {
                if key.is_some() {
                    return Err(lab("duplicate key header".into()));
                }
                key = Some(k.trim().parse().map_err(|e: ChordError| lab(e.to_string()))?);
            }
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let [start, end, chord] = fields[..] else {
            return Err(lab(format!(
                "expected `<start> <end> <chord>`, found {} fields",
                fields.len()
            )));
        };
        let start: u32 = start
            .parse()
            .map_err(|_| lab(format!("invalid start time {start:?}")))?;
        let end: u32 = end
            .parse()
            .map_err(|_| lab(format!("invalid end time {end:?}")))?;
        let chord = parse_chord(chord).map_err(|e| lab(e.to_string()))?;
        if end <= start {
            return Err(lab(format!("end {end} is not after start {start}")));
        }
        match prev_end {
            None if start != 0 => {
                return Err(lab(format!("first chord must start at 0, found {start}")))
            }
            Some(p) if start < p => {
                return Err(lab(format!(
                    "event starts at {start}, before the previous event ends at {p}"
                )))
            }
            _ => {}
        }
        if key.is_none() {
            return Err(ChordError::MissingKey);
        }
        prev_end = Some(end);
        last_line = line_no;
        events.push(ChordEvent { start, chord });
    }

    let key = key.ok_or(ChordError::MissingKey)?;
    let length = prev_end.ok_or_else(|| ChordError::InvalidScore("lab file has no events".into()))?;
    if length % QUARTERS_PER_BAR != 0 {
        return Err(ChordError::Lab {
            line: last_line,
            message: format!("score length {length} is not a whole number of 4/4 bars"),
        });
    }
    Score::new(key, events, length)
}

/// Writes a score in lab format. Each event ends where the next begins.
pub fn write_lab(score: &Score) -> String {
    let mut out = format!("# key: {}\n", score.key);
    for (i, e) in score.events.iter().enumerate() {
        let end = score
            .events
            .get(i + 1)
            .map_or(score.length_quarters, |n| n.start);
        out.push_str(&format!("{} {} {}\n", e.start, end, e.chord));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusStats {
    pub v_word: usize,
    pub v_char: usize,
    pub total_words: usize,
    pub total_chars: usize,
    pub scores: usize,
    /// Last chord before each `_END_`.
    pub endings: BTreeMap<String, usize>,
}

impl CorpusStats {
    pub fn ending_share(&self, chord: &str) -> f64 {
        if self.scores == 0 {
            return 0.0;
        }
        *self.endings.get(chord).unwrap_or(&0) as f64 / self.scores as f64
    }

    pub fn report(&self) -> String {
        let mut out = format!(
            "scores: {}\nword vocabulary: {}\nchar vocabulary: {}\ntotal words: {}\ntotal chars: {}\nending chords:\n",
            self.scores, self.v_word, self.v_char, self.total_words, self.total_chars
        );
        let mut by_count: Vec<(&String, &usize)> = self.endings.iter().collect();
        by_count.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
        for (chord, n) in by_count {
            out.push_str(&format!(
                "  {chord:<16} {n:>6} ({:.1}%)\n",
                100.0 * self.ending_share(chord)
            ));
        }
        out
    }
}

pub fn corpus_stats(text: &str) -> Result<CorpusStats, ChordError> {
    let words = build_vocab(text, Mode::Word).map_err(|_| ChordError::EmptyCorpus)?;
    let chars = build_vocab(text, Mode::Char).map_err(|_| ChordError::EmptyCorpus)?;

    let mut endings = BTreeMap::new();
    let mut scores = 0;
    let mut open = false;
    let mut last_chord: Option<&str> = None;
    let mut total_words = 0;
    for (position, tok) in text.split_whitespace().enumerate() {
        total_words += 1;
        match tok {
            START_FLAG => {
                if open {
                    return Err(ChordError::UnbalancedFlags {
                        position,
                        message: "_START_ inside an open score",
                    });
                }
                open = true;
                last_chord = None;
            }
            END_FLAG => {
                if !open {
                    return Err(ChordError::UnbalancedFlags {
                        position,
                        message: "_END_ without a matching _START_",
                    });
                }
                open = false;
                scores += 1;
                if let Some(c) = last_chord {
                    *endings.entry(c.to_string()).or_insert(0) += 1;
                }
            }
            t if is_flag(t) => {}
            t => last_chord = Some(t),
        }
    }
    if open {
        return Err(ChordError::UnbalancedFlags {
            position: total_words,
            message: "score not closed by _END_",
        });
    }
    Ok(CorpusStats {
        v_word: words.len(),
        v_char: chars.len(),
        total_words,
        total_chars: text.chars().count(),
        scores,
        endings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chord(s: &str) -> ChordSymbol {
        parse_chord(s).unwrap()
    }

    fn ev(start: u32, c: &str) -> ChordEvent {
        ChordEvent { start, chord: chord(c) }
    }

    #[test]
    fn parses_chord_tokens() {
        let c = chord("F:9");
        assert_eq!((c.root.name(), c.quality.as_str()), ("F", "9"));
        let c = chord("A#:min(6,9)");
        assert_eq!((c.root.name(), c.quality.as_str()), ("A#", "min(6,9)"));
        assert_eq!(chord("Bb:maj").to_string(), "A#:maj");
        assert_eq!(chord("Cb:7").root.value(), 11);
        assert_eq!(chord("F#:(1,3,b5,b7,9,13)").quality, "(1,3,b5,b7,9,13)");
    }

    #[test]
    fn rejects_malformed_chords() {
        let pos = |s: &str| match parse_chord(s) {
            Err(ChordError::Parse { position, .. }) => position,
            other => panic!("{s}: {other:?}"),
        };
        assert_eq!(pos("H:maj"), 0);
        assert_eq!(pos("Cmaj"), 1);
        assert_eq!(pos("C:"), 2);
        assert_eq!(pos(""), 0);
        assert_eq!(pos("Cm:aj"), 1);
        assert_eq!(pos("C: maj"), 2);
    }

    #[test]
    fn transposes_to_c() {
        let g = Score::new("G".parse().unwrap(), vec![ev(0, "D:min7")], 4).unwrap();
        assert_eq!(transpose_score(&g).events[0].chord.to_string(), "G:min7");
        assert_eq!(transpose_score(&g).key, PitchClass::C);
        let f = Score::new("F".parse().unwrap(), vec![ev(0, "F:9")], 4).unwrap();
        assert_eq!(transpose_score(&f).events[0].chord.to_string(), "C:9");
        let c = Score::new(PitchClass::C, vec![ev(0, "A#:maj/3")], 4).unwrap();
        assert_eq!(transpose_score(&c), c);
        let d = Score::new("D".parse().unwrap(), vec![ev(0, "E:maj/3")], 4).unwrap();
        assert_eq!(transpose_score(&d).events[0].chord.to_string(), "D:maj/3");
    }

    #[test]
    fn expands_reference_score() {
        let s = Score::new(
            PitchClass::C,
            vec![ev(0, "F:9"), ev(4, "D:min7"), ev(6, "G:9"), ev(8, "C:maj"), ev(10, "F:9"), ev(12, "C:maj")],
            16,
        )
        .unwrap();
        assert_eq!(
            expand_to_text(&s).unwrap(),
            "_START_ F:9 F:9 F:9 F:9 D:min7 D:min7 G:9 G:9 C:maj C:maj F:9 F:9 C:maj C:maj C:maj C:maj _END_"
        );
        let one = Score::new(PitchClass::C, vec![ev(0, "C:maj")], 4).unwrap();
        assert_eq!(expand_to_text(&one).unwrap(), "_START_ C:maj C:maj C:maj C:maj _END_");
    }

    #[test]
    fn expand_rejects_events_past_the_end() {
        let mut s = Score::new(PitchClass::C, vec![ev(0, "C:maj")], 4).unwrap();
        s.events.push(ev(5, "G:7"));
        assert_eq!(
            expand_to_text(&s),
            Err(ChordError::EventOutOfRange { start: 5, length: 4 })
        );
    }

    #[test]
    fn decodes_lead_sheets() {
        assert_eq!(decode_progression(&["C:7", "C:7", "C:7", "C:7"]), "| C:7 |");
        assert_eq!(decode_progression(&["C:7", "C:7", "E:min", "E:min"]), "| C:7 E:min |");
        assert_eq!(
            decode_progression(&["C:7", "E:min", "C:7", "E:min"]),
            "| C:7 E:min C:7 E:min |"
        );
        assert_eq!(decode_progression::<&str>(&[]), "");
        assert_eq!(
            decode_progression(&["G:7", "G:7", "_END_", "_START_", "C:maj", "C:maj", "C:maj", "C:maj", "F:maj"]),
            "| G:7 | _END_ _START_ | C:maj | F:maj |"
        );
        assert_eq!(
            decode_progression(&["C:7", "C:7", "C:7", "C:7", "C:7", "D:7"]),
            "| C:7 | C:7 D:7 |"
        );
    }

    #[test]
    fn reads_lab_files() {
        let s = read_lab("# key: G\n0 4 D:min7\n").unwrap();
        assert_eq!(s.key.name(), "G");
        assert_eq!(s.events, vec![ev(0, "D:min7")]);
        assert_eq!(s.length_quarters, 4);

        let err = read_lab("# key: C\n0 4 C:maj\n2 8 G:7\n").unwrap_err();
        assert!(matches!(err, ChordError::Lab { line: 3, .. }), "{err:?}");
        assert_eq!(read_lab("0 4 C:maj\n"), Err(ChordError::MissingKey));
        assert!(matches!(read_lab("# key: C\n0 4 H:maj\n"), Err(ChordError::Lab { line: 2, .. })));
        assert!(matches!(read_lab("# key: C\n0 3 C:maj\n"), Err(ChordError::Lab { line: 2, .. })));
        assert!(matches!(read_lab("# key: C\n1 4 C:maj\n"), Err(ChordError::Lab { line: 2, .. })));
    }

    #[test]
    fn lab_pipeline_matches_hand_expansion() {
        // in Bb: Cm7 | F7 | Bbmaj7 (with a gap filled by the previous chord)
        let text = "# key: Bb\n# a ii-V-I\n0 4 C:min7\n4 6 F:7\n7 8 F:9\n8 12 A#:maj7\n";
        let s = transpose_score(&read_lab(text).unwrap());
        assert_eq!(
            expand_to_text(&s).unwrap(),
            "_START_ D:min7 D:min7 D:min7 D:min7 G:7 G:7 G:7 G:9 C:maj7 C:maj7 C:maj7 C:maj7 _END_"
        );
    }

    #[test]
    fn stats_count_endings() {
        let one = corpus_stats("_START_ C:maj G:7 _END_").unwrap();
        assert_eq!(one.endings, BTreeMap::from([("G:7".to_string(), 1)]));

        let mut text = Vec::new();
        for i in 0..10 {
            text.push(format!("_START_ D:min7 {} _END_", if i < 3 { "C:maj" } else { "G:7" }));
        }
        let s = corpus_stats(&text.join(" ")).unwrap();
        assert_eq!(s.scores, 10);
        assert!((s.ending_share("C:maj") - 0.3).abs() < 1e-12);
        assert!(s.report().contains("30.0%"));
    }

    #[test]
    fn stats_reject_unbalanced_flags() {
        assert!(matches!(corpus_stats("_END_"), Err(ChordError::UnbalancedFlags { position: 0, .. })));
        assert!(matches!(corpus_stats("_START_ C:maj"), Err(ChordError::UnbalancedFlags { .. })));
        assert!(matches!(
            corpus_stats("_START_ C:maj _START_"),
            Err(ChordError::UnbalancedFlags { position: 2, .. })
        ));
    }

    fn arb_chord() -> impl Strategy<Value = ChordSymbol> {
        (0u8..12, "[a-z0-9#(),/]{1,10}")
            .prop_map(|(pc, q)| ChordSymbol::new(PitchClass::new(pc).unwrap(), q))
    }

    fn arb_score() -> impl Strategy<Value = Score> {
        (0u8..12, 1u32..6, prop::collection::vec((1u32..6, arb_chord()), 1..8), arb_chord()).prop_map(
            |(key, bars, gaps, first)| {
                let length = bars * 4;
                let mut events = vec![ChordEvent { start: 0, chord: first }];
                let mut t = 0;
                for (gap, c) in gaps {
                    t += gap;
                    if t >= length {
                        break;
                    }
                    events.push(ChordEvent { start: t, chord: c });
                }
                Score::new(PitchClass::new(key).unwrap(), events, length).unwrap()
            },
        )
    }

    proptest! {
        #[test]
        fn chord_text_round_trips(c in arb_chord()) {
            prop_assert_eq!(parse_chord(&c.to_string()).unwrap(), c);
        }

        #[test]
        fn transposition_round_trips_and_keeps_intervals(s in arb_score(), k in -24i32..24) {
            let there = s.transposed_by(k);
            prop_assert_eq!(there.transposed_by(-k), s.clone());
            let roots = |x: &Score| x.events.iter().map(|e| e.chord.root.value() as i32).collect::<Vec<_>>();
            let (a, b) = (roots(&s), roots(&there));
            for i in 0..a.len() {
                for j in 0..a.len() {
                    prop_assert_eq!((a[i] - a[j]).rem_euclid(12), (b[i] - b[j]).rem_euclid(12));
                }
            }
        }

        #[test]
        fn expansion_length_and_lab_round_trip(s in arb_score()) {
            let text = expand_to_text(&s).unwrap();
            let toks: Vec<&str> = text.split(' ').collect();
            prop_assert_eq!(toks.len() as u32, s.length_quarters + 2);
            prop_assert_eq!(read_lab(&write_lab(&s)).unwrap(), s);
        }
    }
}
