use std::collections::VecDeque;

use crate::error::{LdpError, Result};
use crate::lattice::{lattice_position, Lattice, Orientation, RectQuad, DIRS};

use super::Configuration;

/// Largest site count for exhaustive enumeration over all colorings.
const MAX_TABLE_SITES: usize = 25;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrossingResult {
    pub crossed: bool,
    /// The quad contains no sites; `crossed` is then false.
    pub empty: bool,
}

/// Sites of a rectangular quad together with the two designated sides.
///
/// A site inside the quad touches the left side when its lattice neighbor
/// `(i-1, j)` lies left of the rectangle; the other sides are analogous.
#[derive(Debug, Clone)]
pub struct QuadSites {
    pub sites: Vec<u32>,
    local: Vec<u32>,
    source: Vec<bool>,
    target: Vec<bool>,
}

impl QuadSites {
    pub fn new(lat: &Lattice, q: &RectQuad) -> Self {
        let sites = lat.sites_in_region(&q.rect);
        let mut local = vec![u32::MAX; lat.len()];
        for (k, &s) in sites.iter().enumerate() {
            local[s as usize] = k as u32;
        }
        let eta = lat.eta();
        let tol = lat.tol();
        let r = q.rect;
        let (mut source, mut target) = (vec![false; sites.len()], vec![false; sites.len()]);
        for (k, &s) in sites.iter().enumerate() {
            let (i, j) = lat.coords(s);
            match q.orientation {
                Orientation::LeftRight => {
                    source[k] = lattice_position(eta, i - 1, j)[0] < r.x0 - tol;
                    target[k] = lattice_position(eta, i + 1, j)[0] > r.x1 + tol;
                }
                Orientation::BottomTop => {
                    source[k] = lattice_position(eta, i, j - 1)[1] < r.y0 - tol;
                    target[k] = lattice_position(eta, i, j + 1)[1] > r.y1 + tol;
                }
            }
        }
        QuadSites { sites, local, source, target }
    }

    pub fn contains(&self, s: u32) -> bool {
        self.local[s as usize] != u32::MAX
    }

    /// Whether open sites connect the two sides inside the quad.
    pub fn crossed(&self, lat: &Lattice, open: impl Fn(u32) -> bool) -> bool {
        let mut seen = vec![false; self.sites.len()];
        let mut queue = VecDeque::new();
        for (k, &s) in self.sites.iter().enumerate() {
            if self.source[k] && open(s) {
                seen[k] = true;
                queue.push_back(k);
            }
        }
        while let Some(k) = queue.pop_front() {
            if self.target[k] {
                return true;
            }
            for t in lat.neighbors(self.sites[k]) {
                let l = self.local[t as usize];
                if l != u32::MAX && !seen[l as usize] && open(t) {
                    seen[l as usize] = true;
                    queue.push_back(l as usize);
                }
            }
        }
        false
    }
}

pub fn crossing(lat: &Lattice, cfg: &Configuration, q: &RectQuad) -> CrossingResult {
    let qs = QuadSites::new(lat, q);
    if qs.sites.is_empty() {
        log::warn!("quad {:?} contains no sites", q.rect);
        return CrossingResult { crossed: false, empty: true };
    }
    CrossingResult { crossed: qs.crossed(lat, |s| cfg.is_open(s)), empty: false }
}

pub fn crosses(lat: &Lattice, cfg: &Configuration, q: &RectQuad) -> bool {
    crossing(lat, cfg, q).crossed
}

/// Whether flipping `site` changes "every quad is crossed".
pub fn pivotal_for(lat: &Lattice, cfg: &Configuration, site: u32, quads: &[RectQuad]) -> bool {
    let qs: Vec<QuadSites> = quads.iter().map(|q| QuadSites::new(lat, q)).collect();
    if !qs.iter().any(|q| q.contains(site)) {
        return false;
    }
    let f = |flip: bool| {
        qs.iter().all(|q| {
            q.crossed(lat, |s| if s == site && flip { !cfg.is_open(s) } else { cfg.is_open(s) })
        })
    };
    f(false) != f(true)
}

/// Truth table of "every quad is crossed" over all colorings of the
/// lattice; bit `s` of the index is the color of site `s` (1 = open).
pub fn crossing_table(lat: &Lattice, quads: &[RectQuad]) -> Result<Vec<bool>> {
    let n = lat.len();
    if n > MAX_TABLE_SITES {
        return Err(LdpError::Budget(format!("{n} sites exceed the enumeration limit of {MAX_TABLE_SITES}")));
    }
    let qs: Vec<QuadSites> = quads.iter().map(|q| QuadSites::new(lat, q)).collect();
    Ok(crate::par::map_indexed(1usize << n, |mask| {
        qs.iter().all(|q| q.crossed(lat, |s| mask >> s & 1 == 1))
    }))
}

/// Exact probability that each site is pivotal for the function tabulated
/// by [`crossing_table`].
pub fn pivotal_probabilities(table: &[bool]) -> Vec<f64> {
    let n = table.len().trailing_zeros() as usize;
    (0..n)
        .map(|x| {
            let hits = (0..table.len()).filter(|&m| table[m] != table[m ^ (1 << x)]).count();
            hits as f64 / table.len() as f64
        })
        .collect()
}

/// Crossing of an `a x b` parallelogram board `{(i, j): 0 <= i < a, 0 <= j < b}`
/// with triangular adjacency. With `along_i` the path joins column `i = 0`
/// to column `i = a - 1`, otherwise row `j = 0` to row `j = b - 1`, through
/// sites whose color equals `color`.
pub fn hex_board_crossing(a: usize, b: usize, open: impl Fn(usize, usize) -> bool, color: bool, along_i: bool) -> bool {
    let idx = |i: usize, j: usize| j * a + i;
    let mut seen = vec![false; a * b];
    let mut queue = VecDeque::new();
    let starts: Vec<(usize, usize)> = if along_i { (0..b).map(|j| (0, j)).collect() } else { (0..a).map(|i| (i, 0)).collect() };
    for (i, j) in starts {
        if open(i, j) == color {
            seen[idx(i, j)] = true;
            queue.push_back((i, j));
        }
    }
    while let Some((i, j)) = queue.pop_front() {
        if (along_i && i + 1 == a) || (!along_i && j + 1 == b) {
            return true;
        }
        for (di, dj) in DIRS {
            let (ni, nj) = (i as i64 + di as i64, j as i64 + dj as i64);
            if ni < 0 || nj < 0 || ni >= a as i64 || nj >= b as i64 {
                continue;
            }
            let (ni, nj) = (ni as usize, nj as usize);
            if !seen[idx(ni, nj)] && open(ni, nj) == color {
                seen[idx(ni, nj)] = true;
                queue.push_back((ni, nj));
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Rect;
    use crate::perc::sample_configuration;
    use proptest::prelude::*;

    fn six_site() -> (Lattice, RectQuad) {
        let d = Rect::new(0.0, 2.5, 0.0, 0.9).unwrap();
        let lat = Lattice::new(1.0, d).unwrap();
        assert_eq!(lat.len(), 6);
        (lat, RectQuad::new(d, Orientation::LeftRight, &d).unwrap())
    }

    #[test]
    fn constant_configurations() {
        let d = Rect::unit();
        let lat = Lattice::new(0.05, d).unwrap();
        let q = RectQuad::new(Rect::new(0.2, 0.7, 0.1, 0.4).unwrap(), Orientation::BottomTop, &d).unwrap();
        assert!(crosses(&lat, &Configuration::constant(lat.len(), true), &q));
        assert!(!crosses(&lat, &Configuration::constant(lat.len(), false), &q));
    }

    #[test]
    fn empty_quad_is_flagged() {
        let d = Rect::unit();
        let lat = Lattice::new(0.5, d).unwrap();
        let q = RectQuad::new(Rect::new(0.6, 0.7, 0.1, 0.2).unwrap(), Orientation::LeftRight, &d).unwrap();
        let r = crossing(&lat, &Configuration::constant(lat.len(), true), &q);
        assert!(r.empty && !r.crossed);
    }

    #[test]
    fn single_path_toy_instance() {
        let (lat, q) = six_site();
        // bottom row open, top row closed
        let cfg = Configuration::from_open((0..6).map(|s| lat.coords(s).1 == 0), 0);
        assert!(crosses(&lat, &cfg, &q));
        for s in 0..3u32 {
            let mut c = cfg.clone();
            c.flip(s);
            assert!(!crosses(&lat, &c, &q));
            assert!(pivotal_for(&lat, &cfg, s, &[q]));
        }
        for s in 3..6u32 {
            assert!(!pivotal_for(&lat, &cfg, s, &[q]));
        }
    }

    #[test]
    fn sites_outside_quads_are_not_pivotal() {
        let d = Rect::unit();
        let lat = Lattice::new(0.1, d).unwrap();
        let q = RectQuad::new(Rect::new(0.0, 0.45, 0.0, 0.45).unwrap(), Orientation::LeftRight, &d).unwrap();
        let cfg = sample_configuration(&lat, 1);
        let far = lat.nearest_site([0.9, 0.9]).unwrap();
        assert!(!pivotal_for(&lat, &cfg, far, &[q]));
    }

    #[test]
    fn flip_locality_exhaustive() {
        let d = Rect::new(0.0, 3.2, 0.0, 2.7).unwrap();
        let lat = Lattice::new(1.0, d).unwrap();
        let n = lat.len();
        assert!(n <= 16, "{n}");
        let q = RectQuad::new(d, Orientation::LeftRight, &d).unwrap();
        let table = crossing_table(&lat, &[q]).unwrap();
        for mask in 0..(1usize << n) {
            let cfg = Configuration::from_open((0..n).map(|s| mask >> s & 1 == 1), 0);
            assert_eq!(crosses(&lat, &cfg, &q), table[mask]);
            for s in 0..n {
                let changed = table[mask] != table[mask ^ (1 << s)];
                if changed {
                    assert!(pivotal_for(&lat, &cfg, s as u32, &[q]));
                }
            }
        }
    }

    #[test]
    fn pivotal_probabilities_single_site() {
        let d = Rect::new(0.0, 0.5, 0.0, 0.5).unwrap();
        let lat = Lattice::new(1.0, d).unwrap();
        assert_eq!(lat.len(), 1);
        let q = RectQuad::new(d, Orientation::LeftRight, &d).unwrap();
        let t = crossing_table(&lat, &[q]).unwrap();
        assert_eq!(t, vec![false, true]);
        assert_eq!(pivotal_probabilities(&t), vec![1.0]);
    }

    #[test]
    fn hex_board_duality_exhaustive() {
        for (a, b) in [(1, 1), (2, 3), (3, 3), (4, 4), (5, 4), (4, 5)] {
            for mask in 0..(1usize << (a * b)) {
                let open = |i: usize, j: usize| mask >> (j * a + i) & 1 == 1;
                let open_i = hex_board_crossing(a, b, open, true, true);
                let closed_j = hex_board_crossing(a, b, open, false, false);
                assert!(open_i != closed_j, "a {a} b {b} mask {mask:b}");
            }
        }
    }

    #[test]
    fn rhombus_crossing_is_one_half() {
        for a in 1..=4usize {
            let total = 1usize << (a * a);
            let crossed = (0..total)
                .filter(|&m| hex_board_crossing(a, a, |i, j| m >> (j * a + i) & 1 == 1, true, true))
                .count();
            assert_eq!(2 * crossed, total);
        }
        // Monte Carlo at a larger board
        let a = 40;
        let n = 4000u64;
        let hits = (0..n)
            .filter(|&r| {
                let key = crate::perc::color_key(r);
                hex_board_crossing(a, a, |i, j| crate::perc::color_at(key, i as i32, j as i32), true, true)
            })
            .count() as f64;
        let se = (0.25 / n as f64).sqrt();
        assert!((hits / n as f64 - 0.5).abs() < 3.0 * se);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn adding_open_sites_preserves_crossings(seed in 0u64..1_000_000, extra in 0u64..1_000_000, density in 0.0f64..0.3) {
            let d = Rect::unit();
            let lat = Lattice::new(0.08, d).unwrap();
            let q = RectQuad::new(Rect::new(0.1, 0.9, 0.2, 0.7).unwrap(), Orientation::LeftRight, &d).unwrap();
            let a = sample_configuration(&lat, seed);
            let mut b = a.clone();
            for s in 0..lat.len() as u32 {
                if crate::rng::unit_open(crate::rng::hash4(extra, s as u64, 0, 0, 0)) < density {
                    b.set(s, true);
                }
            }
            prop_assert!(!crosses(&lat, &a, &q) || crosses(&lat, &b, &q));
        }
    }
}
