use std::io::Write;

use crate::error::{invalid, Result};
use crate::gmc::SiteMeasure;
use crate::lattice::{Lattice, Rect};
use crate::par;

use super::arms::{trace_arm_interfaces, ArmStarts, LatticeBox};
use super::{Alpha4Calibration, Configuration};

/// Index of the `eps`-grid cell containing coordinate `x`, measured from
/// `origin`; points on a grid line go to the cell with the smaller index.
fn grid_index(x: f64, origin: f64, eps: f64) -> i64 {
    (((x - origin) / eps - 1e-9).ceil() as i64 - 1).max(0)
}

/// The `3 eps` square concentric with the `eps`-grid square holding `p`.
fn outer_square(domain: &Rect, p: [f64; 2], eps: f64) -> Rect {
    let ix = grid_index(p[0], domain.x0, eps) as f64;
    let iy = grid_index(p[1], domain.y0, eps) as f64;
    let x0 = domain.x0 + ix * eps;
    let y0 = domain.y0 + iy * eps;
    Rect { x0: x0 - eps, x1: x0 + 2.0 * eps, y0: y0 - eps, y1: y0 + 2.0 * eps }
}

/// Sites with four alternating arms from the site itself to the boundary
/// of the `3 eps` square around their `eps`-grid square. Sites whose outer
/// square leaves the domain are never important.
pub fn epsilon_important(lat: &Lattice, cfg: &Configuration, eps: f64) -> Result<Vec<u32>> {
    if !(eps >= 4.0 * lat.eta() * (1.0 - 1e-12)) {
        return Err(invalid(format!("eps {eps} is below 4 eta")));
    }
    let dom = *lat.domain();
    let tol = lat.tol();
    let eta = lat.eta();
    let flags = par::map_indexed(lat.len(), |s| {
        let s = s as u32;
        let a2 = outer_square(&dom, lat.position(s), eps);
        if !dom.contains_rect(&a2, tol) {
            return false;
        }
        let (i, j) = lat.coords(s);
        let starts = ArmStarts::new(LatticeBox::point(i, j), LatticeBox::from_rect(eta, &a2));
        let open = |i: i32, j: i32| cfg.is_open(lat.index_of(i, j).expect("outer square inside domain"));
        trace_arm_interfaces(&starts, open, 4) >= 4
    });
    Ok((0..lat.len() as u32).filter(|&s| flags[s as usize]).collect())
}

/// `cell_area / alpha4(eta, 1)` on every `eps`-important site.
pub fn pivotal_measure(lat: &Lattice, cfg: &Configuration, eps: f64, cal: &Alpha4Calibration) -> Result<SiteMeasure> {
    let norm = cal.alpha4_eta()?;
    let mut masses = vec![0.0; lat.len()];
    for s in epsilon_important(lat, cfg, eps)? {
        masses[s as usize] = lat.cell_area() / norm;
    }
    SiteMeasure::new(masses, format!("pivotal eps={eps}"))
}

/// CSV with columns `site_index,x,y`.
pub fn write_sites_csv<W: Write>(lat: &Lattice, sites: &[u32], mut w: W) -> Result<()> {
    writeln!(w, "site_index,x,y")?;
    for &s in sites {
        let p = lat.position(s);
        writeln!(w, "{s},{},{}", p[0], p[1])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Orientation, RectQuad};
    use crate::perc::{four_arm_bfs, pivotal_for, sample_configuration};

    #[test]
    fn grid_ties_go_to_smaller_index() {
        assert_eq!(grid_index(0.5, 0.0, 0.25), 1);
        assert_eq!(grid_index(0.51, 0.0, 0.25), 2);
        assert_eq!(grid_index(0.0, 0.0, 0.25), 0);
        let a2 = outer_square(&Rect::unit(), [0.5, 0.3], 0.25);
        assert_eq!(a2, Rect { x0: 0.0, x1: 0.75, y0: 0.0, y1: 0.75 });
    }

    #[test]
    fn monochromatic_has_no_important_sites() {
        let lat = Lattice::new(1.0 / 48.0, Rect::unit()).unwrap();
        for open in [true, false] {
            let cfg = Configuration::constant(lat.len(), open);
            assert!(epsilon_important(&lat, &cfg, 0.125).unwrap().is_empty());
        }
        assert!(epsilon_important(&lat, &Configuration::constant(lat.len(), true), 0.05).is_err());
    }

    #[test]
    fn quadrant_center_is_important() {
        let lat = Lattice::new(1.0 / 64.0, Rect::unit()).unwrap();
        let c = lat.nearest_site([0.5, 0.5]).unwrap();
        let pc = lat.position(c);
        let cfg = Configuration::from_open(
            lat.positions().iter().map(|p| (p[0] - pc[0]) * (p[1] - pc[1]) > 0.0 || *p == pc),
            0,
        );
        for eps in [1.0 / 16.0, 0.1, 0.125, 0.25, 1.0 / 3.0] {
            let imp = epsilon_important(&lat, &cfg, eps).unwrap();
            assert!(imp.contains(&c), "eps {eps}");
        }
    }

    #[test]
    fn tracer_matches_cluster_search_for_importance() {
        let lat = Lattice::new(1.0 / 40.0, Rect::unit()).unwrap();
        let eps = 0.125;
        for seed in 0..4 {
            let cfg = sample_configuration(&lat, seed);
            let imp = epsilon_important(&lat, &cfg, eps).unwrap();
            for s in (0..lat.len() as u32).step_by(7) {
                let a2 = outer_square(lat.domain(), lat.position(s), eps);
                let bfs = lat.domain().contains_rect(&a2, lat.tol()) && four_arm_bfs(&lat, &cfg, &[s], &a2);
                assert_eq!(bfs, imp.contains(&s), "seed {seed} site {s}");
            }
        }
    }

    #[test]
    fn pivotal_far_from_boundary_is_important() {
        // eps = 4 eta; a site more than 3 eps from the quad boundary
        let eta = 1.0;
        let eps = 4.0;
        let d = Rect::new(0.0, 25.0, 0.0, 25.0).unwrap();
        let lat = Lattice::new(eta, d).unwrap();
        let q = RectQuad::new(d, Orientation::LeftRight, &d).unwrap();
        let s = lat.nearest_site([12.6, 12.6]).unwrap();
        let mut found = 0;
        for seed in 0..3000 {
            let cfg = sample_configuration(&lat, seed);
            if pivotal_for(&lat, &cfg, s, &[q]) {
                found += 1;
                assert!(epsilon_important(&lat, &cfg, eps).unwrap().contains(&s), "seed {seed}");
            }
        }
        assert!(found > 0);
    }

    #[test]
    fn pivotal_measure_mass() {
        let lat = Lattice::new(1.0 / 40.0, Rect::unit()).unwrap();
        let cal = Alpha4Calibration::power_law(lat.eta(), 1.25);
        let cfg = sample_configuration(&lat, 2);
        let imp = epsilon_important(&lat, &cfg, 0.125).unwrap();
        let m = pivotal_measure(&lat, &cfg, 0.125, &cal).unwrap();
        let want = imp.len() as f64 * lat.cell_area() / cal.alpha4_eta().unwrap();
        assert!((m.total() - want).abs() < 1e-9 * want.max(1.0));
        let none = pivotal_measure(&lat, &Configuration::constant(lat.len(), true), 0.125, &cal).unwrap();
        assert_eq!(none.total(), 0.0);
        assert!(pivotal_measure(&lat, &cfg, 0.125, &Alpha4Calibration::empty(lat.eta())).is_err());
    }
}
