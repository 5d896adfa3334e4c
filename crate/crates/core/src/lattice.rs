//! Triangular lattice restricted to an axis-aligned rectangle.
//!
//! Site `(i, j)` sits at `eta * (i + j/2, j * sqrt(3)/2)`; the lattice is
//! anchored at the origin, so translating the domain by a lattice vector
//! translates the site set. Hexagonal cells are implicit: every site owns a
//! cell of area `sqrt(3)/2 * eta^2`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, LdpError, Result};

pub const SQRT3_2: f64 = 0.866_025_403_784_438_6;

/// Neighbor offsets in counter-clockwise order starting from +x.
pub const DIRS: [(i32, i32); 6] = [(1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1)];

/// Sentinel for a missing neighbor.
pub const NONE: u32 = u32::MAX;

const MAX_SITES: u64 = 1 << 31;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        let r = Rect { x0, x1, y0, y1 };
        if !(x0.is_finite() && x1.is_finite() && y0.is_finite() && y1.is_finite()) {
            return Err(invalid("rectangle has non-finite corners"));
        }
        if !(x1 > x0 && y1 > y0) {
            return Err(invalid(format!("degenerate rectangle {r:?}")));
        }
        Ok(r)
    }

    pub fn unit() -> Self {
        Rect { x0: 0.0, x1: 1.0, y0: 0.0, y1: 1.0 }
    }

    /// Square of half-side `r` centered at `c`.
    pub fn centered(c: [f64; 2], r: f64) -> Self {
        Rect { x0: c[0] - r, x1: c[0] + r, y0: c[1] - r, y1: c[1] + r }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn center(&self) -> [f64; 2] {
        [(self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0]
    }

    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        p[0] >= self.x0 - tol && p[0] <= self.x1 + tol && p[1] >= self.y0 - tol && p[1] <= self.y1 + tol
    }

    pub fn contains_rect(&self, other: &Rect, tol: f64) -> bool {
        other.x0 >= self.x0 - tol
            && other.x1 <= self.x1 + tol
            && other.y0 >= self.y0 - tol
            && other.y1 <= self.y1 + tol
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x0 <= other.x1 && other.x0 <= self.x1 && self.y0 <= other.y1 && other.y0 <= self.y1
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        Rect { x0: self.x0 + dx, x1: self.x1 + dx, y0: self.y0 + dy, y1: self.y1 + dy }
    }
}

/// Which pair of opposite sides a crossing must connect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    LeftRight,
    BottomTop,
}

/// Rectangular quad: a rectangle with a designated pair of sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectQuad {
    pub rect: Rect,
    pub orientation: Orientation,
}

impl RectQuad {
    /// Checks containment in `domain` (closed) and positive size.
    pub fn new(rect: Rect, orientation: Orientation, domain: &Rect) -> Result<Self> {
        let rect = Rect::new(rect.x0, rect.x1, rect.y0, rect.y1)?;
        let tol = 1e-12 * domain.diameter();
        if !domain.contains_rect(&rect, tol) {
            return Err(invalid(format!("quad {rect:?} is not inside domain {domain:?}")));
        }
        Ok(RectQuad { rect, orientation })
    }

    /// The same rectangle with the other pair of sides.
    pub fn rotated(&self) -> Self {
        let orientation = match self.orientation {
            Orientation::LeftRight => Orientation::BottomTop,
            Orientation::BottomTop => Orientation::LeftRight,
        };
        RectQuad { rect: self.rect, orientation }
    }
}

#[derive(Debug, Clone)]
struct Row {
    j: i32,
    i_min: i32,
    len: u32,
    start: u32,
}

#[derive(Debug, Clone)]
pub struct Lattice {
    eta: f64,
    domain: Rect,
    positions: Vec<[f64; 2]>,
    coords: Vec<(i32, i32)>,
    rows: Vec<Row>,
    neighbors: Vec<[u32; 6]>,
}

/// Position of lattice point `(i, j)` at mesh `eta`.
#[inline]
pub fn lattice_position(eta: f64, i: i32, j: i32) -> [f64; 2] {
    [eta * (i as f64 + 0.5 * j as f64), eta * SQRT3_2 * j as f64]
}

impl Lattice {
    /// Builds the lattice of mesh `eta` inside `domain`. Sites are numbered
    /// row by row (increasing `j`), then by increasing `i`.
    pub fn new(eta: f64, domain: Rect) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(invalid(format!("eta must be positive, got {eta}")));
        }
        let domain = Rect::new(domain.x0, domain.x1, domain.y0, domain.y1)?;
        let tol = 1e-9 * eta;
        let dy = eta * SQRT3_2;
        let j_lo = ((domain.y0 - tol) / dy).ceil() as i64 - 1;
        let j_hi = ((domain.y1 + tol) / dy).floor() as i64 + 1;
        let approx = (j_hi - j_lo + 1) as f64 * (domain.width() / eta + 2.0);
        if approx > MAX_SITES as f64 {
            return Err(LdpError::LatticeTooLarge(approx as u64));
        }

        let mut rows = Vec::new();
        let mut positions = Vec::new();
        let mut coords = Vec::new();
        for j in j_lo..=j_hi {
            let j = j as i32;
            let y = lattice_position(eta, 0, j)[1];
            if y < domain.y0 - tol || y > domain.y1 + tol {
                continue;
            }
            let lo = ((domain.x0 - tol) / eta - 0.5 * j as f64).ceil() as i32 - 1;
            let hi = ((domain.x1 + tol) / eta - 0.5 * j as f64).floor() as i32 + 1;
            let mut i_min = None;
            let mut len = 0u32;
            for i in lo..=hi {
                let p = lattice_position(eta, i, j);
                if domain.contains(p, tol) {
                    i_min.get_or_insert(i);
                    positions.push(p);
                    coords.push((i, j));
                    len += 1;
                }
            }
            // empty rows are kept so that rows stay contiguous in j
            let start = (positions.len() as u32) - len;
            rows.push(Row { j, i_min: i_min.unwrap_or(0), len, start });
        }
        while rows.last().is_some_and(|r| r.len == 0) {
            rows.pop();
        }
        let lead = rows.iter().take_while(|r| r.len == 0).count();
        rows.drain(..lead);
        if positions.len() as u64 >= MAX_SITES {
            return Err(LdpError::LatticeTooLarge(positions.len() as u64));
        }

        let mut lat = Lattice { eta, domain, positions, coords, rows, neighbors: Vec::new() };
        lat.neighbors = (0..lat.len())
            .map(|s| {
                let (i, j) = lat.coords[s];
                let mut out = [NONE; 6];
                for (k, (di, dj)) in DIRS.iter().enumerate() {
                    if let Some(t) = lat.index_of(i + di, j + dj) {
                        out[k] = t;
                    }
                }
                out
            })
            .collect();
        Ok(lat)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn domain(&self) -> &Rect {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn cell_area(&self) -> f64 {
        SQRT3_2 * self.eta * self.eta
    }

    /// Tolerance used for all geometric membership tests.
    pub fn tol(&self) -> f64 {
        1e-9 * self.eta
    }

    pub fn positions(&self) -> &[[f64; 2]] {
        &self.positions
    }

    #[inline]
    pub fn position(&self, s: u32) -> [f64; 2] {
        self.positions[s as usize]
    }

    #[inline]
    pub fn coords(&self, s: u32) -> (i32, i32) {
        self.coords[s as usize]
    }

    /// Neighbor in direction `k` (index into [`DIRS`]).
    #[inline]
    pub fn neighbor(&self, s: u32, k: usize) -> Option<u32> {
        let t = self.neighbors[s as usize][k];
        (t != NONE).then_some(t)
    }

    pub fn neighbors(&self, s: u32) -> impl Iterator<Item = u32> + '_ {
        self.neighbors[s as usize].iter().copied().filter(|&t| t != NONE)
    }

    pub fn degree(&self, s: u32) -> usize {
        self.neighbors(s).count()
    }

    /// Index of lattice point `(i, j)` if it lies in the domain.
    #[inline]
    pub fn index_of(&self, i: i32, j: i32) -> Option<u32> {
        let first = self.rows.first()?.j;
        let r = j.checked_sub(first)?;
        if r < 0 {
            return None;
        }
        let row = self.rows.get(r as usize)?;
        debug_assert_eq!(row.j, j);
        let k = i.checked_sub(row.i_min)?;
        (k >= 0 && (k as u32) < row.len).then(|| row.start + k as u32)
    }

    /// Number of rows and, per row, `(j, first site, length)`.
    pub fn rows(&self) -> impl Iterator<Item = (i32, u32, u32)> + '_ {
        self.rows.iter().map(|r| (r.j, r.start, r.len))
    }

    pub(crate) fn row_i_min(&self, row: usize) -> i32 {
        self.rows[row].i_min
    }

    /// Sites whose center lies in `region`, in index order.
    pub fn sites_in_region(&self, region: &Rect) -> Vec<u32> {
        let tol = self.tol();
        let mut out = Vec::new();
        for row in &self.rows {
            let y = lattice_position(self.eta, 0, row.j)[1];
            if y < region.y0 - tol || y > region.y1 + tol {
                continue;
            }
            for k in 0..row.len {
                let s = row.start + k;
                let p = self.positions[s as usize];
                if p[0] >= region.x0 - tol && p[0] <= region.x1 + tol {
                    out.push(s);
                }
            }
        }
        out
    }

    /// Site closest to `p`, if any.
    pub fn nearest_site(&self, p: [f64; 2]) -> Option<u32> {
        let jf = p[1] / (self.eta * SQRT3_2);
        let mut best: Option<(f64, u32)> = None;
        for j in [jf.floor() as i32 - 1, jf.floor() as i32, jf.floor() as i32 + 1, jf.floor() as i32 + 2] {
            let ifl = p[0] / self.eta - 0.5 * j as f64;
            for i in [ifl.floor() as i32 - 1, ifl.floor() as i32, ifl.floor() as i32 + 1, ifl.floor() as i32 + 2] {
                if let Some(s) = self.index_of(i, j) {
                    let q = self.positions[s as usize];
                    let d = (q[0] - p[0]).hypot(q[1] - p[1]);
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, s));
                    }
                }
            }
        }
        best.map(|(_, s)| s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force_sites(eta: f64, d: &Rect) -> Vec<[f64; 2]> {
        let tol = 1e-9 * eta;
        let jmax = (d.y1.abs().max(d.y0.abs()) / (eta * SQRT3_2)).ceil() as i32 + 2;
        let imax = (d.x1.abs().max(d.x0.abs()) / eta).ceil() as i32 + jmax + 2;
        let mut out = Vec::new();
        for j in -jmax..=jmax {
            for i in -imax..=imax {
                let p = lattice_position(eta, i, j);
                if d.contains(p, tol) {
                    out.push(p);
                }
            }
        }
        out.sort_by(|a, b| a[1].total_cmp(&b[1]).then(a[0].total_cmp(&b[0])));
        out
    }

    #[test]
    fn unit_mesh_on_unit_square_matches_enumeration() {
        let d = Rect::unit();
        let lat = Lattice::new(1.0, d).unwrap();
        assert_eq!(lat.positions(), brute_force_sites(1.0, &d).as_slice());
        // (0,0), (1,0), (0.5, sqrt3/2)
        assert_eq!(lat.len(), 3);
        assert!((lat.position(2)[0] - 0.5).abs() < 1e-15);
        assert!((lat.position(2)[1] - SQRT3_2).abs() < 1e-15);
    }

    #[test]
    fn cell_area_formula() {
        for eta in [1.0, 0.5, 0.1] {
            let lat = Lattice::new(eta, Rect::unit()).unwrap();
            assert_eq!(lat.cell_area(), SQRT3_2 * eta * eta);
        }
    }

    #[test]
    fn interior_sites_have_six_neighbors() {
        // interior: all six neighbor positions fall inside the domain
        for eta in [0.5, 0.05] {
            let d = Rect::unit();
            let lat = Lattice::new(eta, d).unwrap();
            for s in 0..lat.len() as u32 {
                let (i, j) = lat.coords(s);
                let interior = DIRS
                    .iter()
                    .all(|(di, dj)| d.contains(lattice_position(eta, i + di, j + dj), lat.tol()));
                assert!(lat.degree(s) <= 6);
                if interior {
                    assert_eq!(lat.degree(s), 6);
                }
            }
        }
    }

    #[test]
    fn neighbor_symmetry_and_distance_on_large_lattice() {
        let lat = Lattice::new(1.0 / 256.0, Rect::new(0.0, 1.3, 0.0, 1.0).unwrap()).unwrap();
        assert!(lat.len() > 90_000 && lat.len() < 100_001);
        let eta = lat.eta();
        for s in 0..lat.len() as u32 {
            for t in lat.neighbors(s) {
                assert!(lat.neighbors(t).any(|u| u == s));
                let (a, b) = (lat.position(s), lat.position(t));
                let d = (a[0] - b[0]).hypot(a[1] - b[1]);
                assert!((d - eta).abs() < 1e-12 * eta.max(d) * 1e3, "{d}");
            }
        }
    }

    #[test]
    fn cells_fit_inside_domain() {
        let d = Rect::new(0.0, 1.0, 0.0, 0.7).unwrap();
        let lat = Lattice::new(0.03, d).unwrap();
        // hexagon circumradius is eta/sqrt(3)
        let rc = lat.eta() / 3f64.sqrt();
        let inside = lat
            .positions()
            .iter()
            .filter(|p| p[0] - rc >= d.x0 && p[0] + rc <= d.x1 && p[1] - rc >= d.y0 && p[1] + rc <= d.y1)
            .count();
        assert!(inside as f64 * lat.cell_area() <= d.area());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Lattice::new(0.0, Rect::unit()).is_err());
        assert!(Lattice::new(-1.0, Rect::unit()).is_err());
        assert!(Lattice::new(0.1, Rect { x0: 0.0, x1: 0.0, y0: 0.0, y1: 1.0 }).is_err());
        assert!(matches!(
            Lattice::new(1e-6, Rect::new(0.0, 100.0, 0.0, 100.0).unwrap()),
            Err(LdpError::LatticeTooLarge(_))
        ));
    }

    #[test]
    fn region_queries() {
        let d = Rect::unit();
        let lat = Lattice::new(0.1, d).unwrap();
        let all: Vec<u32> = (0..lat.len() as u32).collect();
        assert_eq!(lat.sites_in_region(&d), all);
        // a sliver between two columns of centers
        let sliver = Rect::new(0.01, 0.03, 0.0, 0.05).unwrap();
        assert!(lat.sites_in_region(&sliver).is_empty());
    }

    #[test]
    fn halves_partition_sites() {
        let d = Rect::unit();
        let lat = Lattice::new(0.07, d).unwrap();
        // split strictly between site columns so no center is on the line
        let left = lat.sites_in_region(&Rect::new(0.0, 0.5001, 0.0, 1.0).unwrap());
        let right = lat.sites_in_region(&Rect::new(0.5002, 1.0, 0.0, 1.0).unwrap());
        let mut both: Vec<u32> = left.iter().chain(&right).copied().collect();
        both.sort_unstable();
        let before = both.len();
        both.dedup();
        assert_eq!(before, both.len());
        assert_eq!(both.len(), lat.len());
    }

    #[test]
    fn translation_by_lattice_vector() {
        let eta = 0.0625;
        let d = Rect::new(0.1, 0.9, 0.05, 0.8).unwrap();
        let a = Lattice::new(eta, d).unwrap();
        let b = Lattice::new(eta, d.translate(eta, 0.0)).unwrap();
        assert_eq!(a.len(), b.len());
        for (p, q) in a.positions().iter().zip(b.positions()) {
            assert!((q[0] - p[0] - eta).abs() < 1e-12);
            assert!((q[1] - p[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn quad_must_lie_in_domain() {
        let d = Rect::unit();
        assert!(RectQuad::new(Rect::new(0.1, 0.5, 0.1, 0.5).unwrap(), Orientation::LeftRight, &d).is_ok());
        assert!(RectQuad::new(Rect::new(0.1, 1.5, 0.1, 0.5).unwrap(), Orientation::LeftRight, &d).is_err());
    }

    proptest! {
        #[test]
        fn lattice_matches_brute_force(eta in 0.05f64..0.5, x0 in -1.0f64..1.0, y0 in -1.0f64..1.0, w in 0.5f64..2.0, h in 0.5f64..2.0) {
            let d = Rect::new(x0, x0 + w, y0, y0 + h).unwrap();
            let lat = Lattice::new(eta, d).unwrap();
            let mut ours = lat.positions().to_vec();
            ours.sort_by(|a, b| a[1].total_cmp(&b[1]).then(a[0].total_cmp(&b[0])));
            prop_assert_eq!(ours, brute_force_sites(eta, &d));
        }

        #[test]
        fn disjoint_tiles_union(eta in 0.04f64..0.2, cut in 0.2f64..0.8) {
            let d = Rect::unit();
            let lat = Lattice::new(eta, d).unwrap();
            let tol = lat.tol();
            // nudge the cut off any row of centers
            let cut = cut + 3.3 * tol;
            let a = lat.sites_in_region(&Rect::new(0.0, 1.0, 0.0, cut).unwrap());
            let b = lat.sites_in_region(&Rect::new(0.0, 1.0, cut + 2.0 * tol, 1.0).unwrap());
            let mut u: Vec<u32> = a.iter().chain(&b).copied().collect();
            u.sort_unstable();
            prop_assert_eq!(u, lat.sites_in_region(&d));
        }
    }
}
