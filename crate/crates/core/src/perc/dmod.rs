use crate::error::{LdpError, Result};
use crate::lattice::{Lattice, Orientation, Rect, RectQuad};

use super::crossing::QuadSites;
use super::Configuration;

/// Quad-count budget for [`d_mod`].
pub const MAX_DMOD_QUADS: u64 = 10_000_000;

fn grid_lines(lo: f64, len: f64, k: u32) -> Vec<f64> {
    let step = (-(k as f64)).exp2();
    let n = (len / step + 1e-9).floor() as u64;
    (0..=n).map(|a| lo + a as f64 * step).collect()
}

fn level_count(dom: &Rect, k: u32) -> u64 {
    let nx = grid_lines(dom.x0, dom.width(), k).len() as u64;
    let ny = grid_lines(dom.y0, dom.height(), k).len() as u64;
    2 * (nx * nx.saturating_sub(1) / 2) * (ny * ny.saturating_sub(1) / 2)
}

/// Largest `2^-k`, `1 <= k <= k_max`, such that some rectangle with corners
/// on the `2^-k` grid (anchored at the domain corner) is crossed by exactly
/// one of the two configurations, in either orientation; 0 if none is.
pub fn d_mod(lat: &Lattice, a: &Configuration, b: &Configuration, k_max: u32) -> Result<f64> {
    if a.len() != lat.len() || b.len() != lat.len() {
        return Err(LdpError::Mismatch("configurations must live on the lattice".into()));
    }
    let dom = *lat.domain();
    let total: u64 = (1..=k_max).map(|k| level_count(&dom, k)).sum();
    if total > MAX_DMOD_QUADS {
        return Err(LdpError::Budget(format!("{total} quads exceed the limit of {MAX_DMOD_QUADS}")));
    }
    let differs: Vec<u32> = (0..lat.len() as u32).filter(|&s| a.colors[s as usize] != b.colors[s as usize]).collect();
    if differs.is_empty() {
        return Ok(0.0);
    }
    for k in 1..=k_max {
        let xs = grid_lines(dom.x0, dom.width(), k);
        let ys = grid_lines(dom.y0, dom.height(), k);
        for (ia, &x0) in xs.iter().enumerate() {
            for &x1 in &xs[ia + 1..] {
                for (ja, &y0) in ys.iter().enumerate() {
                    for &y1 in &ys[ja + 1..] {
                        let rect = Rect { x0, x1, y0, y1 };
                        for orientation in [Orientation::LeftRight, Orientation::BottomTop] {
                            let q = RectQuad { rect, orientation };
                            let qs = QuadSites::new(lat, &q);
                            if !differs.iter().any(|&s| qs.contains(s)) {
                                continue;
                            }
                            if qs.crossed(lat, |s| a.is_open(s)) != qs.crossed(lat, |s| b.is_open(s)) {
                                return Ok((-(k as f64)).exp2());
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(0.0)
}
