use std::collections::VecDeque;

use crate::error::{invalid, Result};
use crate::lattice::{lattice_position, Lattice, Rect, DIRS, SQRT3_2};

use super::Configuration;

/// Axis-aligned box expressed in lattice coordinates: a point `(i, j)` is
/// inside when `2i + j` lies in `x2` and `j` lies in `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeBox {
    pub x2: (i64, i64),
    pub y: (i64, i64),
}

impl LatticeBox {
    /// Lattice points of mesh `eta` inside `rect` (closed, with tolerance).
    pub fn from_rect(eta: f64, rect: &Rect) -> Self {
        let tol = 1e-9;
        let sx = 2.0 / eta;
        let sy = 1.0 / (eta * SQRT3_2);
        LatticeBox {
            x2: ((rect.x0 * sx - tol).ceil() as i64, (rect.x1 * sx + tol).floor() as i64),
            y: ((rect.y0 * sy - tol).ceil() as i64, (rect.y1 * sy + tol).floor() as i64),
        }
    }

    pub fn point(i: i32, j: i32) -> Self {
        let x2 = 2 * i as i64 + j as i64;
        LatticeBox { x2: (x2, x2), y: (j as i64, j as i64) }
    }

    #[inline]
    pub fn contains(&self, i: i32, j: i32) -> bool {
        let x2 = 2 * i as i64 + j as i64;
        let j = j as i64;
        x2 >= self.x2.0 && x2 <= self.x2.1 && j >= self.y.0 && j <= self.y.1
    }

    /// Points of the box, row by row.
    pub fn points(&self) -> impl Iterator<Item = (i32, i32)> + '_ {
        (self.y.0..=self.y.1).flat_map(move |j| {
            let lo = (self.x2.0 - j).div_euclid(2) + i64::from((self.x2.0 - j).rem_euclid(2) != 0);
            let hi = (self.x2.1 - j).div_euclid(2);
            (lo..=hi).map(move |i| (i as i32, j as i32))
        })
    }
}

/// Interface starting edges around an inner box, for a fixed outer box.
///
/// Every triangle with exactly one inner vertex and two vertices in the
/// annulus contributes the oriented edge `(a, b)` opposite the inner
/// vertex, with `b = a + DIRS[k]` and the inner vertex at `a + DIRS[k-1]`.
type Edge = ((i32, i32), (i32, i32), u8);

#[derive(Debug, Clone)]
pub struct ArmStarts {
    pub inner: LatticeBox,
    pub outer: LatticeBox,
    edges: Vec<Edge>,
}

impl ArmStarts {
    pub fn new(inner: LatticeBox, outer: LatticeBox) -> Self {
        let mut edges = Vec::new();
        let annulus = |i: i32, j: i32| !inner.contains(i, j) && outer.contains(i, j);
        for (vi, vj) in inner.points() {
            let on_boundary = DIRS.iter().any(|(di, dj)| !inner.contains(vi + di, vj + dj));
            if !on_boundary {
                continue;
            }
            for m in 0..6 {
                let p = (vi + DIRS[m].0, vj + DIRS[m].1);
                let q = (vi + DIRS[(m + 1) % 6].0, vj + DIRS[(m + 1) % 6].1);
                if annulus(p.0, p.1) && annulus(q.0, q.1) {
                    edges.push((q, p, ((m + 5) % 6) as u8));
                }
            }
        }
        ArmStarts { inner, outer, edges }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

/// Neighbor offsets of [`DIRS`] in `(2i + j, j)` coordinates.
const DIRS_X2: [(i64, i64); 6] = [(2, 0), (1, 1), (-1, 1), (-2, 0), (-1, -1), (1, -1)];
/// Direction update when the forward vertex replaces `a` (index 1) or `b` (index 0).
const TURN: [[usize; 6]; 2] = [[1, 2, 3, 4, 5, 0], [5, 0, 1, 2, 3, 4]];

/// Counts color interfaces that run from the inner box to outside the
/// outer box, stopping once `stop_at` are found. Colors are queried lazily
/// and only along the explored interfaces.
///
/// Four alternating arms exist exactly when at least four interfaces cross.
pub fn trace_arm_interfaces(starts: &ArmStarts, open: impl Fn(i32, i32) -> bool, stop_at: usize) -> usize {
    let (inner, outer) = (starts.inner, starts.outer);
    let inside = |b: &LatticeBox, x2: i64, j: i64| x2 >= b.x2.0 && x2 <= b.x2.1 && j >= b.y.0 && j <= b.y.1;
    let mut count = 0;
    for &(a0, b0, k0) in &starts.edges {
        let left = open(a0.0, a0.1);
        if left == open(b0.0, b0.1) {
            continue;
        }
        let (mut x2, mut j, mut k) = (2 * a0.0 as i64 + a0.1 as i64, a0.1 as i64, k0 as usize);
        loop {
            let d = DIRS_X2[(k + 1) % 6];
            let (cx2, cj) = (x2 + d.0, j + d.1);
            if inside(&inner, cx2, cj) {
                break;
            }
            if !inside(&outer, cx2, cj) {
                count += 1;
                if count >= stop_at {
                    return count;
                }
                break;
            }
            let same = open(((cx2 - cj) >> 1) as i32, cj as i32) == left;
            if same {
                x2 = cx2;
                j = cj;
            }
            k = TURN[same as usize][k];
        }
    }
    count
}

/// Four alternating arms from the inner site set to the boundary of
/// `outer`, by cluster search in the annulus: there must be at least two
/// open and two closed clusters joining the inner set to the outer
/// boundary.
pub fn four_arm_bfs(lat: &Lattice, cfg: &Configuration, inner: &[u32], outer: &Rect) -> bool {
    let tol = lat.tol();
    let eta = lat.eta();
    let region = lat.sites_in_region(outer);
    let mut is_inner = vec![false; lat.len()];
    for &s in inner {
        is_inner[s as usize] = true;
    }
    let mut local = vec![u32::MAX; lat.len()];
    let annulus: Vec<u32> = region.into_iter().filter(|&s| !is_inner[s as usize]).collect();
    for (k, &s) in annulus.iter().enumerate() {
        local[s as usize] = k as u32;
    }
    let touches_inner: Vec<bool> = annulus.iter().map(|&s| lat.neighbors(s).any(|t| is_inner[t as usize])).collect();
    let touches_outer: Vec<bool> = annulus
        .iter()
        .map(|&s| {
            let (i, j) = lat.coords(s);
            DIRS.iter().any(|(di, dj)| !outer.contains(lattice_position(eta, i + di, j + dj), tol))
        })
        .collect();

    let mut seen = vec![false; annulus.len()];
    let (mut open_arms, mut closed_arms) = (0, 0);
    let mut queue = VecDeque::new();
    for start in 0..annulus.len() {
        if seen[start] || !touches_inner[start] {
            continue;
        }
        let color = cfg.is_open(annulus[start]);
        seen[start] = true;
        queue.push_back(start);
        let mut reaches = false;
        while let Some(k) = queue.pop_front() {
            reaches |= touches_outer[k];
            for t in lat.neighbors(annulus[k]) {
                let l = local[t as usize];
                if l != u32::MAX && !seen[l as usize] && cfg.is_open(t) == color {
                    seen[l as usize] = true;
                    queue.push_back(l as usize);
                }
            }
        }
        if reaches {
            if color {
                open_arms += 1;
            } else {
                closed_arms += 1;
            }
        }
    }
    open_arms >= 2 && closed_arms >= 2
}

/// Four alternating arms from the `l_inf` box of half-side `r_in` around
/// `site` to the boundary of the box of half-side `r_out`. With
/// `r_in < eta` the inner set is the site alone.
pub fn four_arm(lat: &Lattice, cfg: &Configuration, site: u32, r_in: f64, r_out: f64) -> Result<bool> {
    if !(r_in >= 0.0 && r_in < r_out) {
        return Err(invalid(format!("need 0 <= r_in < r_out, got {r_in}, {r_out}")));
    }
    let p = lat.position(site);
    let outer = Rect::centered(p, r_out);
    if !lat.domain().contains_rect(&outer, lat.tol()) {
        return Err(invalid(format!("annulus of radius {r_out} around {p:?} is clipped by the domain")));
    }
    let inner = lat.sites_in_region(&Rect::centered(p, r_in));
    Ok(four_arm_bfs(lat, cfg, &inner, &outer))
}
