//! Monophonic scores: parsing, serialization, melodic range and the
//! left-hand mirror.
//!
//! The text format is line oriented. The first meaningful line is the header
//! `first_finger=<1-5>`; every following line holds one note, either a MIDI
//! number or a scientific pitch name (`C4` = 60), optionally followed by a
//! comma and a duration which is accepted and discarded. `#` at the start of a
//! line or after whitespace begins a comment.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const LOWEST_PITCH: i32 = 21;
pub const HIGHEST_PITCH: i32 = 108;
pub const PIANO_KEYS: usize = 88;
pub const MIN_SCORE_LEN: usize = 2;

/// A piano finger, 1 (thumb) through 5 (little finger).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Finger(u8);

impl Finger {
    pub const ALL: [Finger; 5] = [Finger(1), Finger(2), Finger(3), Finger(4), Finger(5)];
    pub const THUMB: Finger = Finger(1);

    pub fn new(n: i32) -> Result<Self> {
        if (1..=5).contains(&n) {
            Ok(Finger(n as u8))
        } else {
            Err(Error::FingerRange(n))
        }
    }

    /// Finger from a zero-based action index (0 -> thumb).
    pub fn from_index(index: usize) -> Self {
        assert!(index < 5, "finger index {index} out of range");
        Finger(index as u8 + 1)
    }

    pub fn number(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize - 1
    }

    pub fn is_thumb(self) -> bool {
        self.0 == 1
    }
}

impl fmt::Display for Finger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A single piano key as a MIDI note number in [21, 108].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Note(i32);

impl Note {
    pub fn new(pitch: i32) -> Result<Self> {
        if (LOWEST_PITCH..=HIGHEST_PITCH).contains(&pitch) {
            Ok(Note(pitch))
        } else {
            Err(Error::PitchRange { pitch })
        }
    }

    pub fn pitch(self) -> i32 {
        self.0
    }
}

impl FromStr for Note {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let pitch = parse_pitch(s)?;
        Note::new(pitch).map_err(|e| e.to_string())
    }
}

/// Resolves a MIDI integer or a scientific pitch name (C4 = 60) to a MIDI
/// number. No range check is applied here.
pub fn parse_pitch(token: &str) -> std::result::Result<i32, String> {
    let token = token.trim();
    if token.is_empty() {
        return Err("empty pitch token".into());
    }
    if let Ok(n) = token.parse::<i32>() {
        return Ok(n);
    }

    let mut chars = token.chars();
    let letter = chars.next().unwrap().to_ascii_uppercase();
    let pitch_class = match letter {
        'C' => 0,
        'D' => 2,
        'E' => 4,
        'F' => 5,
        'G' => 7,
        'A' => 9,
        'B' => 11,
        _ => return Err(format!("unrecognized pitch {token:?}")),
    };
    let rest = chars.as_str();
    let octave_start = rest
        .find(|c: char| c == '-' || c.is_ascii_digit())
        .ok_or_else(|| format!("pitch {token:?} has no octave"))?;
    let (accidentals, octave) = rest.split_at(octave_start);
    let mut alter = 0;
    for c in accidentals.chars() {
        match c {
            '#' | '♯' => alter += 1,
            'b' | '♭' => alter -= 1,
            _ => return Err(format!("unrecognized accidental {c:?} in {token:?}")),
        }
    }
    let octave: i32 = octave
        .parse()
        .map_err(|_| format!("invalid octave in {token:?}"))?;
    Ok(12 * (octave + 1) + pitch_class + alter)
}

/// Drops a `#` comment. The marker only counts at the start of a line or
/// after whitespace so that sharps such as `C#4` survive.
fn strip_comment(line: &str) -> &str {
    let mut prev_is_space = true;
    for (i, c) in line.char_indices() {
        if c == '#' && prev_is_space {
            return &line[..i];
        }
        prev_is_space = c.is_whitespace();
    }
    line
}

/// An ordered monophonic note sequence together with the finger that plays
/// its first note.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Score {
    name: String,
    notes: Vec<Note>,
    first_finger: Finger,
}

impl Score {
    pub fn new(name: impl Into<String>, notes: Vec<Note>, first_finger: Finger) -> Result<Self> {
        if notes.len() < MIN_SCORE_LEN {
            return Err(Error::ScoreTooShort {
                len: notes.len(),
                min: MIN_SCORE_LEN,
            });
        }
        Ok(Score {
            name: name.into(),
            notes,
            first_finger,
        })
    }

    /// Builds a score from raw MIDI numbers, validating each one.
    pub fn from_pitches(
        name: impl Into<String>,
        pitches: &[i32],
        first_finger: i32,
    ) -> Result<Self> {
        let notes = pitches
            .iter()
            .map(|&p| Note::new(p))
            .collect::<Result<Vec<_>>>()?;
        Score::new(name, notes, Finger::new(first_finger)?)
    }

    /// Parses the score text format. The score is named `"score"`; use
    /// [`Score::parse_named`] to attach a name.
    pub fn parse(text: &str) -> Result<Self> {
        Self::parse_named(text, "score")
    }

    pub fn parse_named(text: &str, name: impl Into<String>) -> Result<Self> {
        let mut first_finger = None;
        let mut notes = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = strip_comment(raw).trim();
            if line.is_empty() {
                continue;
            }

            if first_finger.is_none() {
                let value = line
                    .strip_prefix("first_finger")
                    .and_then(|rest| rest.trim_start().strip_prefix('='))
                    .ok_or_else(|| Error::Header {
                        line: line_no,
                        message: format!("expected `first_finger=<1-5>`, found {line:?}"),
                    })?
                    .trim();
                let finger = value
                    .parse::<i32>()
                    .ok()
                    .and_then(|n| Finger::new(n).ok())
                    .ok_or_else(|| Error::Header {
                        line: line_no,
                        message: format!("first finger {value:?} is not in 1..=5"),
                    })?;
                first_finger = Some(finger);
                continue;
            }

            // An optional duration after a comma is tolerated and ignored.
            let token = line.split(',').next().unwrap_or("").trim();
            let pitch = parse_pitch(token).map_err(|message| Error::Parse {
                line: line_no,
                message,
            })?;
            notes.push(Note::new(pitch)?);
        }

        let first_finger = first_finger.ok_or(Error::Header {
            line: 1,
            message: "missing `first_finger=<1-5>` header".into(),
        })?;
        Score::new(name, notes, first_finger)
    }

    /// Text form accepted by [`Score::parse`]; pitches are written as MIDI numbers.
    pub fn serialize(&self) -> String {
        let mut out = format!("first_finger={}\n", self.first_finger);
        for note in &self.notes {
            out.push_str(&note.pitch().to_string());
            out.push('\n');
        }
        out
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn notes(&self) -> &[Note] {
        &self.notes
    }

    pub fn pitches(&self) -> Vec<i32> {
        self.notes.iter().map(|n| n.pitch()).collect()
    }

    pub fn pitch(&self, index: usize) -> i32 {
        self.notes[index].pitch()
    }

    pub fn len(&self) -> usize {
        self.notes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.notes.is_empty()
    }

    pub fn first_finger(&self) -> Finger {
        self.first_finger
    }

    /// Number of fingering decisions in one traversal.
    pub fn decisions(&self) -> usize {
        self.notes.len() - 1
    }

    pub fn melodic_range(&self) -> MelodicRange {
        let min = self.notes.iter().map(|n| n.pitch()).min().unwrap();
        let max = self.notes.iter().map(|n| n.pitch()).max().unwrap();
        MelodicRange { min, max }
    }

    /// Reflects every pitch about `axis_pitch` (p -> 2*axis - p) so a
    /// right-hand fingering of the result applies to the left hand.
    pub fn mirror_for_left_hand(&self, axis_pitch: i32) -> Result<Score> {
        let notes = self
            .notes
            .iter()
            .map(|n| Note::new(2 * axis_pitch - n.pitch()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Score {
            name: self.name.clone(),
            notes,
            first_finger: self.first_finger,
        })
    }

    /// Shifts every pitch by `semitones`.
    pub fn transpose(&self, semitones: i32) -> Result<Score> {
        let notes = self
            .notes
            .iter()
            .map(|n| Note::new(n.pitch() + semitones))
            .collect::<Result<Vec<_>>>()?;
        Ok(Score {
            name: self.name.clone(),
            notes,
            first_finger: self.first_finger,
        })
    }
}

/// Closed pitch interval spanned by a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MelodicRange {
    min: i32,
    max: i32,
}

impl MelodicRange {
    pub fn new(min: i32, max: i32) -> Result<Self> {
        if min > max {
            return Err(Error::Contract(format!(
                "melodic range min {min} > max {max}"
            )));
        }
        Ok(MelodicRange { min, max })
    }

    pub fn full_piano() -> Self {
        MelodicRange {
            min: LOWEST_PITCH,
            max: HIGHEST_PITCH,
        }
    }

    pub fn min_pitch(&self) -> i32 {
        self.min
    }

    pub fn max_pitch(&self) -> i32 {
        self.max
    }

    pub fn size(&self) -> usize {
        (self.max - self.min + 1) as usize
    }

    pub fn contains(&self, pitch: i32) -> bool {
        (self.min..=self.max).contains(&pitch)
    }
}
