//! 256-entry colormap lookup tables.

use super::colormap_data::{MAGMA, VIRIDIS};
use crate::dsp::ColormapName;
use crate::error::{Error, Result};

pub fn table(name: ColormapName) -> &'static [[u8; 3]; 256] {
    match name {
        ColormapName::Viridis => &VIRIDIS,
        ColormapName::Magma => &MAGMA,
    }
}

/// Maps `v` in [0, 1] to a colour by linear interpolation between adjacent
/// table entries. Out-of-range inputs are clamped.
pub fn lookup(v: f64, name: ColormapName) -> [u8; 3] {
    let t = table(name);
    let pos = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) * 255.0 };
    let i = pos.floor() as usize;
    if i >= 255 {
        return t[255];
    }
    let frac = pos - i as f64;
    if frac == 0.0 {
        return t[i];
    }
    let (a, b) = (t[i], t[i + 1]);
    std::array::from_fn(|c| (a[c] as f64 + (b[c] as f64 - a[c] as f64) * frac).round() as u8)
}

/// Name-checked variant of [`lookup`] for callers holding a string.
pub fn colormap_lookup(v: f64, name: &str) -> Result<[u8; 3]> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Config(format!("colormap input {v} outside [0, 1]")));
    }
    Ok(lookup(v, name.parse()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn to_u8(x: f64) -> u8 {
        (x * 255.0).round() as u8
    }

    #[test]
    fn endpoints_are_table_entries() {
        assert_eq!(lookup(0.0, ColormapName::Viridis), VIRIDIS[0]);
        assert_eq!(lookup(1.0, ColormapName::Viridis), VIRIDIS[255]);
        assert_eq!(lookup(0.0, ColormapName::Magma), MAGMA[0]);
    }

    #[test]
    fn tables_match_published_reference_values() {
        // matplotlib _viridis_data / _magma_data entries 0, 127, 128, 255
        let viridis = [
            (0, [0.267004, 0.004874, 0.329415]),
            (127, [0.128729, 0.563265, 0.551229]),
            (128, [0.127568, 0.566949, 0.550556]),
            (255, [0.993248, 0.906157, 0.143936]),
        ];
        let magma = [
            (0, [0.001462, 0.000466, 0.013866]),
            (127, [0.709962, 0.212797, 0.477201]),
            (128, [0.716387, 0.214982, 0.475290]),
            (255, [0.987053, 0.991438, 0.749504]),
        ];
        for (i, rgb) in viridis {
            assert_eq!(VIRIDIS[i], rgb.map(to_u8), "viridis[{i}]");
        }
        for (i, rgb) in magma {
            assert_eq!(MAGMA[i], rgb.map(to_u8), "magma[{i}]");
        }
    }

    #[test]
    fn magma_midpoint_interpolates_entries_127_and_128() {
        // magma[127] = (181, 54, 122), magma[128] = (183, 55, 121)
        assert_eq!(MAGMA[127], [181, 54, 122]);
        assert_eq!(MAGMA[128], [183, 55, 121]);
        let expect = [182, 55, 122]; // (181+183)/2, round(54.5), round(121.5)
        assert_eq!(lookup(0.5, ColormapName::Magma), expect);
    }

    #[test]
    fn unknown_name_and_range_errors() {
        assert!(colormap_lookup(0.5, "jet").is_err());
        assert!(colormap_lookup(1.5, "viridis").is_err());
        assert_eq!(colormap_lookup(1.0, "magma").unwrap(), MAGMA[255]);
    }
}
