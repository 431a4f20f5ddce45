//! Piecewise-linear color gradients over 8-bit sRGB control colors.
//!
//! Control `i` is the exact color at value `i`; fractional values blend the two
//! neighbouring controls channel-wise with round-half-up.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GradientError {
    #[error("need at least 2 controls, got {0}")]
    TooFewControls(usize),
    #[error("control {index}: channel {channel} value {value} outside 0-255")]
    ChannelOutOfRange { index: usize, channel: usize, value: i64 },
    #[error("non-finite gradient value {0}")]
    NonFinite(f64),
    #[error("invalid color '{0}' (expected #RRGGBB or a named color)")]
    BadColor(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rgb(pub [u8; 3]);

impl Rgb {
    pub const WHITE: Rgb = Rgb([255, 255, 255]);
    pub const BLACK: Rgb = Rgb([0, 0, 0]);
    pub const YELLOW: Rgb = Rgb([255, 255, 0]);
    pub const ORANGE: Rgb = Rgb([255, 165, 0]);
    pub const RED: Rgb = Rgb([255, 0, 0]);

    pub fn to_hex(self) -> String {
        let [r, g, b] = self.0;
        format!("#{r:02X}{g:02X}{b:02X}")
    }
}

/// The 16 names accepted in configs, alongside `#RRGGBB`.
pub const NAMED_COLORS: [(&str, Rgb); 16] = [
    ("white", Rgb([255, 255, 255])),
    ("black", Rgb([0, 0, 0])),
    ("red", Rgb([255, 0, 0])),
    ("green", Rgb([0, 128, 0])),
    ("blue", Rgb([0, 0, 255])),
    ("yellow", Rgb([255, 255, 0])),
    ("orange", Rgb([255, 165, 0])),
    ("purple", Rgb([128, 0, 128])),
    ("cyan", Rgb([0, 255, 255])),
    ("magenta", Rgb([255, 0, 255])),
    ("gray", Rgb([128, 128, 128])),
    ("brown", Rgb([165, 42, 42])),
    ("pink", Rgb([255, 192, 203])),
    ("lime", Rgb([0, 255, 0])),
    ("navy", Rgb([0, 0, 128])),
    ("teal", Rgb([0, 128, 128])),
];

impl FromStr for Rgb {
    type Err = GradientError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        if let Some(hex) = t.strip_prefix('#') {
            if hex.len() == 6 && hex.bytes().all(|b| b.is_ascii_hexdigit()) {
                let ch = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).unwrap();
                return Ok(Rgb([ch(0), ch(2), ch(4)]));
            }
            return Err(GradientError::BadColor(s.to_string()));
        }
        let lower = t.to_ascii_lowercase();
        NAMED_COLORS
            .iter()
            .find(|(n, _)| *n == lower)
            .map(|&(_, c)| c)
            .ok_or_else(|| GradientError::BadColor(s.to_string()))
    }
}

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Rgb {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Rgb {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct Gradient {
    controls: Vec<Rgb>,
}

/// Checks raw integer controls: at least two, every channel in 0-255.
pub fn validate(controls: &[[i64; 3]]) -> Result<(), GradientError> {
    if controls.len() < 2 {
        return Err(GradientError::TooFewControls(controls.len()));
    }
    for (index, c) in controls.iter().enumerate() {
        for (channel, &value) in c.iter().enumerate() {
            if !(0..=255).contains(&value) {
                return Err(GradientError::ChannelOutOfRange { index, channel, value });
            }
        }
    }
    Ok(())
}

impl Gradient {
    pub fn new(controls: Vec<Rgb>) -> Result<Self, GradientError> {
        if controls.len() < 2 {
            return Err(GradientError::TooFewControls(controls.len()));
        }
        Ok(Gradient { controls })
    }

    pub fn from_channels(controls: &[[i64; 3]]) -> Result<Self, GradientError> {
        validate(controls)?;
        Ok(Gradient {
            controls: controls
                .iter()
                .map(|c| Rgb([c[0] as u8, c[1] as u8, c[2] as u8]))
                .collect(),
        })
    }

    /// white → yellow → orange → red, values 0..=3.
    pub fn default_gradient() -> Self {
        Gradient {
            controls: vec![Rgb::WHITE, Rgb::YELLOW, Rgb::ORANGE, Rgb::RED],
        }
    }

    pub fn controls(&self) -> &[Rgb] {
        &self.controls
    }

    /// Highest control index `K`; the valid value range is `[0, K]`.
    pub fn max_value(&self) -> usize {
        self.controls.len() - 1
    }

    pub fn color_at(&self, v: f64) -> Result<Rgb, GradientError> {
        if !v.is_finite() {
            return Err(GradientError::NonFinite(v));
        }
        let k = self.max_value();
        let v = v.clamp(0.0, k as f64);
        let i = v.floor() as usize;
        if i >= k {
            return Ok(self.controls[k]);
        }
        let t = v - i as f64;
        let (a, b) = (self.controls[i].0, self.controls[i + 1].0);
        let mut out = [0u8; 3];
        for c in 0..3 {
            let (lo, hi) = (f64::from(a[c]), f64::from(b[c]));
            // lo + t*(hi-lo) is monotone in t, unlike (1-t)*lo + t*hi
            let x = lo + t * (hi - lo);
            out[c] = (x + 0.5).floor().clamp(0.0, 255.0) as u8;
        }
        Ok(Rgb(out))
    }
}

/// A control color as written in config: a hex or named color, or raw
/// `[r, g, b]` channels.
#[derive(Deserialize)]
#[serde(untagged)]
enum ControlEntry {
    Text(String),
    Channels([i64; 3]),
}

impl<'de> Deserialize<'de> for Gradient {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let entries = Vec::<ControlEntry>::deserialize(d)?;
        let mut channels = Vec::with_capacity(entries.len());
        for (i, e) in entries.into_iter().enumerate() {
            channels.push(match e {
                ControlEntry::Channels(c) => c,
                ControlEntry::Text(t) => {
                    let rgb: Rgb = t
                        .parse()
                        .map_err(|e| serde::de::Error::custom(format!("control {i}: {e}")))?;
                    rgb.0.map(i64::from)
                }
            });
        }
        Gradient::from_channels(&channels).map_err(serde::de::Error::custom)
    }
}
