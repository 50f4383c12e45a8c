//! Minimal Standard MIDI File reader/writer for drum tracks.
//!
//! Only what the drum pipeline needs: note-ons on channel 10 are extracted on
//! read, and writing produces a single-track format-0 file.

use thiserror::Error;

use super::{DrumEvent, DrumEventList};

pub const DRUM_CHANNEL: u8 = 9;
pub const DEFAULT_PPQN: u16 = 480;
const RENDER_VELOCITY: u8 = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SmfError {
    #[error("not a MIDI file: expected `MThd`, found {0:?}")]
    BadMagic([u8; 4]),
    #[error("truncated {what} at byte {offset}")]
    Truncated { what: &'static str, offset: usize },
    #[error("unsupported SMF format {0} (only 0 and 1 are read)")]
    UnsupportedFormat(u16),
    #[error("SMPTE time division 0x{0:04x} is not supported")]
    SmpteDivision(u16),
    #[error("ticks per quarter note must be positive")]
    ZeroPpqn,
    #[error("invalid variable-length quantity at byte {0}")]
    BadVlq(usize),
    #[error("data byte 0x{byte:02x} without running status at byte {offset}")]
    MissingStatus { byte: u8, offset: usize },
    #[error("tempo must be positive and finite, got {0}")]
    InvalidTempo(f64),
    #[error("event ticks must be non-decreasing")]
    UnorderedEvents,
    #[error("note number {0} out of MIDI range")]
    InvalidNote(u8),
}

/// Appends `value` (at most 0x0FFF_FFFF) as a variable-length quantity.
pub fn write_vlq(mut value: u32, out: &mut Vec<u8>) {
    debug_assert!(value <= 0x0FFF_FFFF);
    let mut buf = [0u8; 4];
    let mut n = 0;
    loop {
        buf[n] = (value & 0x7F) as u8;
        n += 1;
        value >>= 7;
        if value == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        out.push(if i > 0 { buf[i] | 0x80 } else { buf[i] });
    }
}

/// Reads a VLQ at `*pos`, advancing it.
pub fn read_vlq(data: &[u8], pos: &mut usize) -> Result<u32, SmfError> {
    let start = *pos;
    let mut value = 0u32;
    for _ in 0..4 {
        let b = *data.get(*pos).ok_or(SmfError::Truncated {
            what: "variable-length quantity",
            offset: *pos,
        })?;
        *pos += 1;
        value = (value << 7) | (b & 0x7F) as u32;
        if b & 0x80 == 0 {
            return Ok(value);
        }
    }
    Err(SmfError::BadVlq(start))
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], SmfError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len());
        let end = end.ok_or(SmfError::Truncated {
            what,
            offset: self.pos,
        })?;
        let s = &self.data[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &'static str) -> Result<u32, SmfError> {
        let b = self.take(4, what)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Extracts channel-10 note-ons (velocity > 0) from every track, merged by
/// absolute tick. Files without a 4/4 time signature are read as 4/4 with a
/// logged warning.
pub fn read_smf(bytes: &[u8]) -> Result<DrumEventList, SmfError> {
    let mut r = Reader { data: bytes, pos: 0 };
    let magic = r.take(4, "header chunk")?;
    if magic != b"MThd" {
        let mut m = [0u8; 4];
        m.copy_from_slice(magic);
        return Err(SmfError::BadMagic(m));
    }
    let header_len = r.u32("header length")? as usize;
    let header = r.take(header_len, "header chunk")?;
    if header.len() < 6 {
        return Err(SmfError::Truncated {
            what: "header chunk",
            offset: 8,
        });
    }
    let format = u16::from_be_bytes([header[0], header[1]]);
    let division = u16::from_be_bytes([header[4], header[5]]);
    if format > 1 {
        return Err(SmfError::UnsupportedFormat(format));
    }
    if division & 0x8000 != 0 {
        return Err(SmfError::SmpteDivision(division));
    }
    if division == 0 {
        return Err(SmfError::ZeroPpqn);
    }

    // (tick, track, order within track) keeps the merge stable
    let mut events: Vec<(u64, usize, usize, u8)> = Vec::new();
    let mut time_sigs: Vec<(u8, u8)> = Vec::new();
    let mut track = 0;
    while r.pos < bytes.len() {
        let kind = r.take(4, "chunk type")?;
        let len = r.u32("chunk length")? as usize;
        let body_start = r.pos;
        let body = r.take(len, "track chunk")?;
        if kind == b"MTrk" {
            read_track(body, body_start, track, &mut events, &mut time_sigs)?;
            track += 1;
        }
    }

    if time_sigs.is_empty() {
        log::warn!("no time signature found; assuming 4/4");
    } else if time_sigs.iter().any(|&ts| ts != (4, 2)) {
        log::warn!("non-4/4 time signature found; quantizing as 4/4");
    }

    events.sort_by_key(|&(tick, tr, i, _)| (tick, tr, i));
    Ok(DrumEventList {
        ppqn: division,
        events: events
            .into_iter()
            .map(|(tick, _, _, note)| DrumEvent { tick, note })
            .collect(),
    })
}

fn read_track(
    body: &[u8],
    base: usize,
    track: usize,
    events: &mut Vec<(u64, usize, usize, u8)>,
    time_sigs: &mut Vec<(u8, u8)>,
) -> Result<(), SmfError> {
    let mut r = Reader { data: body, pos: 0 };
    let mut tick = 0u64;
    let mut running: Option<u8> = None;
    let mut order = 0;
    while r.pos < body.len() {
        let mut pos = r.pos;
        tick += read_vlq(body, &mut pos).map_err(|e| offset_error(e, base))? as u64;
        r.pos = pos;
        let first = r.take(1, "event").map_err(|e| offset_error(e, base))?[0];
        match first {
            0xFF => {
                let meta = r.take(1, "meta event").map_err(|e| offset_error(e, base))?[0];
                let mut pos = r.pos;
                let len = read_vlq(body, &mut pos).map_err(|e| offset_error(e, base))? as usize;
                r.pos = pos;
                let data = r.take(len, "meta event").map_err(|e| offset_error(e, base))?;
                if meta == 0x58 && data.len() >= 2 {
                    time_sigs.push((data[0], data[1]));
                }
                if meta == 0x2F {
                    break;
                }
            }
            0xF0 | 0xF7 => {
                let mut pos = r.pos;
                let len = read_vlq(body, &mut pos).map_err(|e| offset_error(e, base))? as usize;
                r.pos = pos;
                r.take(len, "sysex event").map_err(|e| offset_error(e, base))?;
            }
            _ => {
                let (status, data0) = if first & 0x80 != 0 {
                    running = Some(first);
                    (first, None)
                } else {
                    let status = running.ok_or(SmfError::MissingStatus {
                        byte: first,
                        offset: base + r.pos - 1,
                    })?;
                    (status, Some(first))
                };
                let needed = match status & 0xF0 {
                    0xC0 | 0xD0 => 1,
                    _ => 2,
                };
                let mut data = [0u8; 2];
                let mut have = 0;
                if let Some(d) = data0 {
                    data[0] = d;
                    have = 1;
                }
                if needed > have {
                    let rest = r
                        .take(needed - have, "channel message")
                        .map_err(|e| offset_error(e, base))?;
                    data[have..needed].copy_from_slice(rest);
                }
                let channel = status & 0x0F;
                if status & 0xF0 == 0x90 && channel == DRUM_CHANNEL && data[1] > 0 {
                    events.push((tick, track, order, data[0] & 0x7F));
                    order += 1;
                }
            }
        }
    }
    Ok(())
}

fn offset_error(e: SmfError, base: usize) -> SmfError {
    match e {
        SmfError::Truncated { what, offset } => SmfError::Truncated {
            what,
            offset: offset + base,
        },
        SmfError::BadVlq(o) => SmfError::BadVlq(o + base),
        other => other,
    }
}

/// Format-0 file: tempo meta event, then each note-on (velocity 100) paired
/// with a note-off one sixteenth later, all on channel 10.
pub fn write_smf(list: &DrumEventList, tempo_bpm: f64) -> Result<Vec<u8>, SmfError> {
    if !(tempo_bpm > 0.0 && tempo_bpm.is_finite()) {
        return Err(SmfError::InvalidTempo(tempo_bpm));
    }
    if list.ppqn == 0 || list.ppqn & 0x8000 != 0 {
        return Err(SmfError::ZeroPpqn);
    }
    if list.events.windows(2).any(|w| w[1].tick < w[0].tick) {
        return Err(SmfError::UnorderedEvents);
    }
    if let Some(e) = list.events.iter().find(|e| e.note > 127) {
        return Err(SmfError::InvalidNote(e.note));
    }
    let sixteenth = (list.ppqn / 4).max(1) as u64;

    // (tick, note-off first, sequence) orders releases before new hits
    let mut messages: Vec<(u64, u8, usize, [u8; 3])> = Vec::with_capacity(2 * list.events.len());
    for (i, e) in list.events.iter().enumerate() {
        messages.push((e.tick, 1, i, [0x90 | DRUM_CHANNEL, e.note, RENDER_VELOCITY]));
        messages.push((e.tick + sixteenth, 0, i, [0x80 | DRUM_CHANNEL, e.note, 0]));
    }
    messages.sort_by_key(|&(t, kind, i, _)| (t, kind, i));

    let mut track = Vec::new();
    let micros = (60_000_000.0 / tempo_bpm).round().clamp(1.0, 0xFF_FFFF as f64) as u32;
    track.push(0x00);
    track.extend_from_slice(&[0xFF, 0x51, 0x03]);
    track.extend_from_slice(&micros.to_be_bytes()[1..]);
    let mut now = 0u64;
    for (t, _, _, msg) in messages {
        let mut delta = t - now;
        // deltas beyond the VLQ range are split with no-op text events
        while delta > 0x0FFF_FFFF {
            write_vlq(0x0FFF_FFFF, &mut track);
            track.extend_from_slice(&[0xFF, 0x01, 0x00]);
            delta -= 0x0FFF_FFFF;
        }
        write_vlq(delta as u32, &mut track);
        track.extend_from_slice(&msg);
        now = t;
    }
    track.extend_from_slice(&[0x00, 0xFF, 0x2F, 0x00]);

    let mut out = Vec::with_capacity(22 + track.len());
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&0u16.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&list.ppqn.to_be_bytes());
    out.extend_from_slice(b"MTrk");
    out.extend_from_slice(&(track.len() as u32).to_be_bytes());
    out.extend_from_slice(&track);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vlq(v: u32) -> Vec<u8> {
        let mut out = Vec::new();
        write_vlq(v, &mut out);
        out
    }

    #[test]
    fn vlq_reference_values() {
        assert_eq!(vlq(0), [0x00]);
        assert_eq!(vlq(0x7F), [0x7F]);
        assert_eq!(vlq(128), [0x81, 0x00]);
        assert_eq!(vlq(0x2000), [0xC0, 0x00]);
        assert_eq!(vlq(0x3FFF), [0xFF, 0x7F]);
        assert_eq!(vlq(0x0FFF_FFFF), [0xFF, 0xFF, 0xFF, 0x7F]);
        for v in [0, 1, 127, 128, 480, 16_383, 16_384, 2_097_151, 0x0FFF_FFFF] {
            let bytes = vlq(v);
            let mut pos = 0;
            assert_eq!(read_vlq(&bytes, &mut pos).unwrap(), v);
            assert_eq!(pos, bytes.len());
        }
        let mut pos = 0;
        assert_eq!(read_vlq(&[0x81, 0x80, 0x80, 0x80, 0x00], &mut pos), Err(SmfError::BadVlq(0)));
    }

    fn file(format: u16, division: u16, tracks: &[Vec<u8>]) -> Vec<u8> {
        let mut out = b"MThd".to_vec();
        out.extend_from_slice(&6u32.to_be_bytes());
        out.extend_from_slice(&format.to_be_bytes());
        out.extend_from_slice(&(tracks.len() as u16).to_be_bytes());
        out.extend_from_slice(&division.to_be_bytes());
        for t in tracks {
            out.extend_from_slice(b"MTrk");
            out.extend_from_slice(&(t.len() as u32).to_be_bytes());
            out.extend_from_slice(t);
        }
        out
    }

    #[test]
    fn reads_single_kick() {
        let track = vec![0x00, 0x99, 36, 100, 0x60, 0x89, 36, 0, 0x00, 0xFF, 0x2F, 0x00];
        let list = read_smf(&file(0, 96, &[track])).unwrap();
        assert_eq!(list.ppqn, 96);
        assert_eq!(list.events, vec![DrumEvent { tick: 0, note: 36 }]);
    }

    #[test]
    fn filters_channels_and_zero_velocity() {
        // channel 1 note, then drum note-on with velocity 0, then running status hit
        let track = vec![
            0x00, 0x90, 60, 100, 0x00, 0x99, 38, 0, 0x10, 42, 90, 0x00, 0xFF, 0x2F, 0x00,
        ];
        let list = read_smf(&file(0, 480, &[track])).unwrap();
        assert_eq!(list.events, vec![DrumEvent { tick: 16, note: 42 }]);
        let only_ch1 = vec![0x00, 0x90, 36, 100, 0x00, 0xFF, 0x2F, 0x00];
        assert!(read_smf(&file(0, 480, &[only_ch1])).unwrap().events.is_empty());
    }

    #[test]
    fn merges_tracks_by_tick() {
        let t1 = vec![0x00, 0xFF, 0x58, 0x04, 4, 2, 24, 8, 0x0A, 0x99, 36, 100, 0x00, 0xFF, 0x2F, 0x00];
        let t2 = vec![0x05, 0x99, 38, 100, 0x0A, 0x99, 42, 100, 0x00, 0xFF, 0x2F, 0x00];
        let list = read_smf(&file(1, 480, &[t1, t2])).unwrap();
        let ticks: Vec<(u64, u8)> = list.events.iter().map(|e| (e.tick, e.note)).collect();
        assert_eq!(ticks, vec![(5, 38), (10, 36), (15, 42)]);
    }

    #[test]
    fn header_errors() {
        assert_eq!(read_smf(b"RIFF\0\0\0\x06"), Err(SmfError::BadMagic(*b"RIFF")));
        assert!(matches!(read_smf(b"MThd\0\0"), Err(SmfError::Truncated { .. })));
        assert_eq!(read_smf(&file(0, 0xE728, &[])), Err(SmfError::SmpteDivision(0xE728)));
        assert_eq!(read_smf(&file(2, 480, &[])), Err(SmfError::UnsupportedFormat(2)));
        let mut truncated = file(0, 480, &[vec![0x00, 0x99, 36, 100]]);
        truncated.truncate(truncated.len() - 2);
        assert!(matches!(read_smf(&truncated), Err(SmfError::Truncated { .. })));
    }

    #[test]
    fn writes_empty_file() {
        let bytes = write_smf(&DrumEventList::new(480), 120.0).unwrap();
        let expected_track = [0x00, 0xFF, 0x51, 0x03, 0x07, 0xA1, 0x20, 0x00, 0xFF, 0x2F, 0x00];
        assert_eq!(bytes, file(0, 480, &[expected_track.to_vec()]));
        assert!(read_smf(&bytes).unwrap().events.is_empty());
        assert!(write_smf(&DrumEventList::new(480), 0.0).is_err());
    }

    #[test]
    fn long_gap_uses_two_byte_delta() {
        let list = DrumEventList {
            ppqn: 480,
            events: vec![DrumEvent { tick: 128, note: 36 }],
        };
        let bytes = write_smf(&list, 120.0).unwrap();
        // after the tempo event: delta 128 then the note-on
        let track = &bytes[22..];
        assert_eq!(&track[7..12], &[0x81, 0x00, 0x99, 36, 100]);
    }
}
