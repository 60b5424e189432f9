use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! named_enum {
    ($(#[$m:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::Config(format!(
                        "unknown {} `{other}`", stringify!($name)
                    ))),
                }
            }
        }
    };
}

named_enum!(Style { Amplitude => "amplitude", Mel => "mel", Mfcc => "mfcc" });
named_enum!(AmpScale { LogDb => "log_db", Linear => "linear" });
named_enum!(FreqAxis { Log => "log", Linear => "linear" });
named_enum!(ColormapName { Viridis => "viridis", Magma => "magma" });
named_enum!(Detail { Standard => "standard", Low => "low" });
named_enum!(Window { Hann => "hann", Hamming => "hamming", Rectangular => "rectangular" });

impl Window {
    /// Periodic window coefficients of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        use std::f64::consts::PI;
        match self {
            Window::Rectangular => vec![1.0; n],
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
            Window::Hamming => (0..n)
                .map(|i| 0.54 - 0.46 * (2.0 * PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpectrogramConfig {
    pub style: Style,
    pub amp_scale: AmpScale,
    pub freq_axis: FreqAxis,
    pub colormap: ColormapName,
    pub show_labels: bool,
    pub show_colorbar: bool,
    pub n_fft: usize,
    pub hop: usize,
    pub window: Window,
    pub n_mels: usize,
    pub n_mfcc: usize,
    pub image_width_px: u32,
    pub image_height_px: u32,
    pub detail: Detail,
}

impl Default for SpectrogramConfig {
    fn default() -> Self {
        SpectrogramConfig {
            style: Style::Amplitude,
            amp_scale: AmpScale::LogDb,
            freq_axis: FreqAxis::Log,
            colormap: ColormapName::Viridis,
            show_labels: true,
            show_colorbar: false,
            n_fft: 2048,
            hop: 512,
            window: Window::Hann,
            n_mels: 128,
            n_mfcc: 20,
            image_width_px: 640,
            image_height_px: 480,
            detail: Detail::Standard,
        }
    }
}

impl SpectrogramConfig {
    pub fn n_freq_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_fft < 2 {
            return Err(Error::Config(format!("n_fft {} too small", self.n_fft)));
        }
        if self.hop == 0 || self.hop > self.n_fft {
            return Err(Error::Config(format!("hop {} must be in 1..={}", self.hop, self.n_fft)));
        }
        if self.n_mels == 0 || self.n_mels > self.n_freq_bins() {
            return Err(Error::Config(format!(
                "n_mels {} must be in 1..={}",
                self.n_mels,
                self.n_freq_bins()
            )));
        }
        if self.n_mfcc == 0 || self.n_mfcc > self.n_mels {
            return Err(Error::Config(format!("n_mfcc {} must be in 1..={}", self.n_mfcc, self.n_mels)));
        }
        if self.image_width_px < 64 || self.image_height_px < 64 {
            return Err(Error::Config("image dimensions must be at least 64 px".into()));
        }
        Ok(())
    }
}
