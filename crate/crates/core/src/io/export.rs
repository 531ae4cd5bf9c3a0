//! Robustness maps as coloured ASCII PLY point clouds.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::robustness::SrMap;

use super::{io_err, IoError};

/// Percentile of the finite values mapped to the hottest colour.
pub const COLOR_PERCENTILE: f64 = 0.99;

/// Colour of infinite robustness.
pub const INFINITE_COLOR: [u8; 3] = [0, 0, 0];

/// Nearest-rank percentile of the finite values; `None` when there are none.
pub fn finite_percentile(values: &[f64], p: f64) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let rank = ((p * v.len() as f64).ceil() as usize).clamp(1, v.len());
    Some(v[rank - 1])
}

/// Jet ramp, blue at 0 to dark red at 1.
pub fn jet(t: f64) -> [u8; 3] {
    let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
    let ch = |c: f64| ((1.5 - (4.0 * t - c).abs()).clamp(0.0, 1.0) * 255.0).round() as u8;
    [ch(3.0), ch(2.0), ch(1.0)]
}

/// Colour of a robustness value on the scale `[0, upper]`.
pub fn sr_color(r: f64, upper: f64) -> [u8; 3] {
    if r.is_infinite() {
        return INFINITE_COLOR;
    }
    jet(if upper > 0.0 { r / upper } else { 1.0 })
}

/// PLY text of a robustness map.
pub fn sr_map_ply(map: &SrMap) -> String {
    let values: Vec<f64> = map.samples.iter().map(|s| s.robustness.value()).collect();
    let upper = finite_percentile(&values, COLOR_PERCENTILE).unwrap_or(0.0);
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "comment robustness colormap jet over [0, {upper}] N (99th percentile of finite values)");
    out.push_str("comment infinite robustness is black\n");
    let _ = writeln!(out, "element vertex {}", map.samples.len());
    for p in ["x", "y", "z", "nx", "ny", "nz"] {
        let _ = writeln!(out, "property float {p}");
    }
    for p in ["red", "green", "blue"] {
        let _ = writeln!(out, "property uchar {p}");
    }
    out.push_str("end_header\n");
    for s in &map.samples {
        let [r, g, b] = sr_color(s.robustness.value(), upper);
        let (p, n) = (s.position, s.normal);
        let _ = writeln!(out, "{} {} {} {} {} {} {r} {g} {b}", p.x, p.y, p.z, n.x, n.y, n.z);
    }
    out
}

pub fn export_sr_map(map: &SrMap, path: &Path) -> Result<(), IoError> {
    fs::write(path, sr_map_ply(map)).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_nearest_rank() {
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(finite_percentile(&v, 0.99), Some(99.0));
        assert_eq!(finite_percentile(&[f64::INFINITY, 2.0], 0.99), Some(2.0));
        assert_eq!(finite_percentile(&[f64::INFINITY], 0.99), None);
    }

    #[test]
    fn ramp_ends() {
        assert_eq!(jet(0.0), [0, 0, 128]);
        assert_eq!(jet(1.0), [128, 0, 0]);
        assert_ne!(sr_color(5.0, 5.0), INFINITE_COLOR);
    }
}
