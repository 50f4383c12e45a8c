//! Cross-checks the SMF reader and writer against the `midly` parser.

use midly::num::{u15, u28, u4, u7};
use midly::{Format, Header, MetaMessage, MidiMessage, Smf, Timing, TrackEvent, TrackEventKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use textlstm::drum::{read_smf, write_smf, DrumEvent, DrumEventList, DRUM_CHANNEL};

fn random_list(rng: &mut ChaCha8Rng, ppqn: u16) -> DrumEventList {
    let mut list = DrumEventList::new(ppqn);
    let mut tick = 0u64;
    for _ in 0..rng.random_range(0..150) {
        tick += rng.random_range(0..600);
        list.events.push(DrumEvent {
            tick,
            note: rng.random_range(35..82),
        });
    }
    list
}

#[test]
fn midly_reads_what_we_write() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..50 {
        let list = random_list(&mut rng, 480);
        let bytes = write_smf(&list, 100.0).unwrap();
        let smf = Smf::parse(&bytes).unwrap();
        assert_eq!(smf.header.format, Format::SingleTrack);
        assert_eq!(smf.header.timing, Timing::Metrical(u15::new(480)));
        assert_eq!(smf.tracks.len(), 1);

        let mut tick = 0u64;
        let mut ons = Vec::new();
        let mut offs = 0;
        let mut tempo = None;
        for ev in &smf.tracks[0] {
            tick += u64::from(ev.delta.as_int());
            match ev.kind {
                TrackEventKind::Midi { channel, message } => {
                    assert_eq!(channel.as_int(), DRUM_CHANNEL);
                    match message {
                        MidiMessage::NoteOn { key, vel } if vel > 0 => ons.push(DrumEvent {
                            tick,
                            note: key.as_int(),
                        }),
                        MidiMessage::NoteOff { .. } => offs += 1,
                        other => panic!("unexpected message {other:?}"),
                    }
                }
                TrackEventKind::Meta(MetaMessage::Tempo(t)) => tempo = Some(t.as_int()),
                _ => {}
            }
        }
        assert_eq!(ons, list.events);
        assert_eq!(offs, list.events.len());
        assert_eq!(tempo, Some(600_000));
    }
}

fn on(delta: u32, channel: u8, key: u8, vel: u8) -> TrackEvent<'static> {
    TrackEvent {
        delta: u28::new(delta),
        kind: TrackEventKind::Midi {
            channel: u4::new(channel),
            message: MidiMessage::NoteOn {
                key: u7::new(key),
                vel: u7::new(vel),
            },
        },
    }
}

fn end() -> TrackEvent<'static> {
    TrackEvent {
        delta: u28::new(0),
        kind: TrackEventKind::Meta(MetaMessage::EndOfTrack),
    }
}

#[test]
fn we_read_what_midly_writes() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..50 {
        let ppqn = [96u16, 480, 960][case % 3];
        let mut smf = Smf::new(Header::new(Format::Parallel, Timing::Metrical(u15::new(ppqn))));
        let mut expected = Vec::new();
        for _track in 0..rng.random_range(1..4) {
            let mut events = Vec::new();
            let mut tick = 0u64;
            for _ in 0..rng.random_range(0..60) {
                let delta = rng.random_range(0..400);
                tick += u64::from(delta);
                let channel = if rng.random::<f64>() < 0.8 { DRUM_CHANNEL } else { 0 };
                let key = rng.random_range(30..90);
                // velocity 0 is a note-off and must be ignored
                let vel = if rng.random::<f64>() < 0.1 { 0 } else { rng.random_range(1..128) };
                events.push(on(delta, channel, key, vel));
                if channel == DRUM_CHANNEL && vel > 0 {
                    expected.push(DrumEvent { tick, note: key });
                }
            }
            events.push(end());
            smf.tracks.push(events);
        }
        let mut bytes = Vec::new();
        smf.write_std(&mut bytes).unwrap();
        let list = read_smf(&bytes).unwrap();
        assert_eq!(list.ppqn, ppqn);
        // stable merge: tick order, earlier tracks first on ties
        expected.sort_by_key(|e| e.tick);
        let mut got = list.events.clone();
        got.sort_by_key(|e| e.tick);
        assert_eq!(list.events, got, "reader output must be tick ordered");
        let key = |v: &[DrumEvent]| {
            let mut v = v.to_vec();
            v.sort_by_key(|e| (e.tick, e.note));
            v
        };
        assert_eq!(key(&list.events), key(&expected));
    }
}
