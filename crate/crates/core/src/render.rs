//! Presentation helpers shared by generators and formatters.
//!
//! Coordinates are shown normalized by image size and rounded to two decimals,
//! printed without trailing zeros but with at least one fractional digit:
//! `0.0`, `0.9`, `0.13`, `1.0`. Internally a normalized coordinate is held as
//! an integer number of hundredths so that equality under rendering is exact.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::graph::{nearest_pixel, BBox};

/// Normalizes `v` (pixels) against `extent` to hundredths in `0..=100`.
pub fn hundredths(v: f64, extent: u32) -> u16 {
    let h = (100.0 * v / f64::from(extent)).round();
    h.clamp(0.0, 100.0) as u16
}

pub fn fmt_hundredths(h: u16) -> String {
    let (int, frac) = (h / 100, h % 100);
    if frac == 0 {
        format!("{int}.0")
    } else if frac % 10 == 0 {
        format!("{int}.{}", frac / 10)
    } else {
        format!("{int}.{frac:02}")
    }
}

/// A point in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NormPoint {
    pub x: u16,
    pub y: u16,
}

impl NormPoint {
    pub fn from_pixel(x: f64, y: f64, width: u32, height: u32) -> Self {
        NormPoint {
            x: hundredths(x, width),
            y: hundredths(y, height),
        }
    }

    /// The pixel this rendered point refers to.
    pub fn to_pixel(self, width: u32, height: u32) -> (u32, u32) {
        (
            nearest_pixel(f64::from(self.x) * f64::from(width) / 100.0, width),
            nearest_pixel(f64::from(self.y) * f64::from(height) / 100.0, height),
        )
    }
}

impl fmt::Display for NormPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", fmt_hundredths(self.x), fmt_hundredths(self.y))
    }
}

/// A box in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NormBox(pub [u16; 4]);

impl NormBox {
    pub fn from_bbox(b: &BBox, width: u32, height: u32) -> Self {
        NormBox([
            hundredths(b.x_min, width),
            hundredths(b.y_min, height),
            hundredths(b.x_max, width),
            hundredths(b.y_max, height),
        ])
    }
}

impl fmt::Display for NormBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.0;
        write!(
            f,
            "({}, {}, {}, {})",
            fmt_hundredths(a),
            fmt_hundredths(b),
            fmt_hundredths(c),
            fmt_hundredths(d)
        )
    }
}

/// English list: `a`, `a and b`, `a, b, and c`.
pub fn join_list<S: AsRef<str>>(items: &[S]) -> String {
    match items {
        [] => String::new(),
        [a] => a.as_ref().to_string(),
        [a, b] => format!("{} and {}", a.as_ref(), b.as_ref()),
        [init @ .., last] => {
            let head: Vec<&str> = init.iter().map(AsRef::as_ref).collect();
            format!("{}, and {}", head.join(", "), last.as_ref())
        }
    }
}

const NUMBER_WORDS: [&str; 21] = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen", "eighteen",
    "nineteen", "twenty",
];

/// English word for 0..=20, `None` beyond.
pub fn number_word(n: u64) -> Option<&'static str> {
    NUMBER_WORDS.get(n as usize).copied()
}

/// Naive English plural of a noun phrase's last word: `stop sign` -> `stop signs`,
/// `bus` -> `buses`, `berry` -> `berries`.
pub fn plural(noun: &str) -> String {
    let vowel = |c: char| "aeiou".contains(c);
    if ["s", "x", "z", "ch", "sh"].iter().any(|e| noun.ends_with(e)) {
        format!("{noun}es")
    } else if noun.ends_with('y') && noun.chars().rev().nth(1).is_some_and(|c| !vowel(c)) {
        format!("{}ies", &noun[..noun.len() - 1])
    } else {
        format!("{noun}s")
    }
}
