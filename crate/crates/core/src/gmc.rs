//! Site measures: Lebesgue cell masses, Wick-normalized GMC masses,
//! d-energies, moderate-point sets and truncations.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, LdpError, Result};
use crate::field::Field;
use crate::lattice::{lattice_position, Lattice, SQRT3_2};
use crate::par;
use crate::perc::Alpha4Calibration;

/// Largest site count for which [`d_energy`] sums all pairs exactly.
pub const EXACT_ENERGY_SITES: usize = 20_000;

/// Nonnegative mass per hexagonal cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteMeasure {
    pub masses: Vec<f64>,
    pub label: String,
}

impl SiteMeasure {
    pub fn new(masses: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if let Some(m) = masses.iter().find(|m| !(**m >= 0.0 && m.is_finite())) {
            return Err(invalid(format!("site mass {m} is not a finite nonnegative number")));
        }
        Ok(SiteMeasure { masses, label: label.into() })
    }

    pub fn zero(n: usize, label: impl Into<String>) -> Self {
        SiteMeasure { masses: vec![0.0; n], label: label.into() }
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Mass of the sites in `sites`.
    pub fn mass_of(&self, sites: &[u32]) -> f64 {
        sites.iter().map(|&s| self.masses[s as usize]).sum()
    }
}

pub fn lebesgue_measure(lat: &Lattice) -> SiteMeasure {
    SiteMeasure { masses: vec![lat.cell_area(); lat.len()], label: "lebesgue".into() }
}

/// `base * exp(gamma * h - gamma^2 / 2 * Var h)`, so that the expected mass
/// equals the base mass at every site.
pub fn gmc_measure(field: &Field, gamma: f64, base: &SiteMeasure) -> Result<SiteMeasure> {
    if !(0.0..2.0).contains(&gamma) {
        return Err(invalid(format!("gamma {gamma} out of [0,2)")));
    }
    if field.len() != base.len() {
        return Err(LdpError::Mismatch(format!(
            "field has {} sites, base measure {}",
            field.len(),
            base.len()
        )));
    }
    let half = gamma * gamma / 2.0;
    let masses = if gamma == 0.0 {
        base.masses.clone()
    } else {
        base.masses
            .iter()
            .zip(field.values.iter().zip(&field.variance))
            .map(|(&b, (&h, &v))| b * (gamma * h - half * v).exp())
            .collect()
    };
    Ok(SiteMeasure { masses, label: format!("gmc gamma={gamma} of {}", base.label) })
}

/// `sum_{i != j} m_i m_j / |x_i - x_j|^d + sum_i m_i^2 / (eta/2)^d`.
///
/// Exact up to [`EXACT_ENERGY_SITES`] sites, cell-binned beyond.
pub fn d_energy(lat: &Lattice, m: &SiteMeasure, d: f64) -> Result<f64> {
    check_energy_args(lat, m, d)?;
    if lat.len() <= EXACT_ENERGY_SITES {
        Ok(d_energy_exact(lat, m, d))
    } else {
        Ok(d_energy_binned(lat, m, d))
    }
}

fn check_energy_args(lat: &Lattice, m: &SiteMeasure, d: f64) -> Result<()> {
    if !(d > 0.0) {
        return Err(invalid(format!("energy exponent must be positive, got {d}")));
    }
    if lat.len() != m.len() {
        return Err(LdpError::Mismatch(format!("lattice has {} sites, measure {}", lat.len(), m.len())));
    }
    Ok(())
}

fn self_energy(lat: &Lattice, m: &SiteMeasure, d: f64) -> f64 {
    let cut = (lat.eta() / 2.0).powf(-d);
    m.masses.iter().map(|x| x * x * cut).sum()
}

/// All-pairs evaluation.
pub fn d_energy_exact(lat: &Lattice, m: &SiteMeasure, d: f64) -> f64 {
    let pos = lat.positions();
    let mass = &m.masses;
    let n = pos.len();
    let half_d = d / 2.0;
    let rows = par::map_indexed(n, |a| {
        if mass[a] == 0.0 {
            return 0.0;
        }
        let p = pos[a];
        let mut acc = 0.0;
        for b in (a + 1)..n {
            let dx = p[0] - pos[b][0];
            let dy = p[1] - pos[b][1];
            acc += mass[b] * (dx * dx + dy * dy).powf(-half_d);
        }
        2.0 * mass[a] * acc
    });
    rows.iter().sum::<f64>() + self_energy(lat, m, d)
}

const BIN_SITES: f64 = 2.0;
const NEAR_BINS: i64 = 8;

/// Pairs within `NEAR_BINS` bins are summed exactly; farther bin pairs
/// interact through their mass centroids.
pub fn d_energy_binned(lat: &Lattice, m: &SiteMeasure, d: f64) -> f64 {
    let dom = lat.domain();
    let h = BIN_SITES * lat.eta();
    let nx = ((dom.width() / h).ceil() as i64).max(1);
    let ny = ((dom.height() / h).ceil() as i64).max(1);
    let bin_of = |p: [f64; 2]| {
        let bx = (((p[0] - dom.x0) / h).floor() as i64).clamp(0, nx - 1);
        let by = (((p[1] - dom.y0) / h).floor() as i64).clamp(0, ny - 1);
        (bx, by)
    };
    let nb = (nx * ny) as usize;
    let mut members: Vec<Vec<u32>> = vec![Vec::new(); nb];
    let mut bin_mass = vec![0.0; nb];
    let mut centroid = vec![[0.0f64; 2]; nb];
    for (s, &p) in lat.positions().iter().enumerate() {
        let (bx, by) = bin_of(p);
        let b = (by * nx + bx) as usize;
        members[b].push(s as u32);
        let w = m.masses[s];
        bin_mass[b] += w;
        centroid[b][0] += w * p[0];
        centroid[b][1] += w * p[1];
    }
    for b in 0..nb {
        if bin_mass[b] > 0.0 {
            centroid[b][0] /= bin_mass[b];
            centroid[b][1] /= bin_mass[b];
        }
    }
    let pos = lat.positions();
    let half_d = d / 2.0;
    let dist = |p: [f64; 2], q: [f64; 2]| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).powf(-half_d);
    let per_bin = par::map_indexed(nb, |b| {
        if bin_mass[b] == 0.0 {
            return 0.0;
        }
        let (bx, by) = ((b as i64) % nx, (b as i64) / nx);
        let mut acc = 0.0;
        for cy in 0..ny {
            for cx in 0..nx {
                let c = (cy * nx + cx) as usize;
                if bin_mass[c] == 0.0 {
                    continue;
                }
                if (cx - bx).abs() <= NEAR_BINS && (cy - by).abs() <= NEAR_BINS {
                    for &s in &members[b] {
                        let ms = m.masses[s as usize];
                        if ms == 0.0 {
                            continue;
                        }
                        for &t in &members[c] {
                            if s != t {
                                acc += ms * m.masses[t as usize] * dist(pos[s as usize], pos[t as usize]);
                            }
                        }
                    }
                } else {
                    acc += bin_mass[b] * bin_mass[c] * dist(centroid[b], centroid[c]);
                }
            }
        }
        acc
    });
    per_bin.iter().sum::<f64>() + self_energy(lat, m, d)
}

/// Row prefix sums of a site measure, for Euclidean ball masses around
/// sites.
#[derive(Debug, Clone)]
pub struct BallSums<'a> {
    lat: &'a Lattice,
    prefix: Vec<f64>,
    rows: Vec<(i32, u32, u32, i32)>,
}

impl<'a> BallSums<'a> {
    pub fn new(lat: &'a Lattice, m: &SiteMeasure) -> Self {
        let mut prefix = Vec::with_capacity(lat.len() + lat.rows().count());
        let mut rows = Vec::new();
        for (r, (j, start, len)) in lat.rows().enumerate() {
            rows.push((j, start, len, lat.row_i_min(r)));
            prefix.push(0.0);
            let mut acc = 0.0;
            for k in 0..len {
                acc += m.masses[(start + k) as usize];
                prefix.push(acc);
            }
        }
        BallSums { lat, prefix, rows }
    }

    /// Mass of the sites within Euclidean distance `r` (inclusive) of `p`.
    pub fn ball_mass(&self, p: [f64; 2], r: f64) -> f64 {
        let Some(&(j0, ..)) = self.rows.first() else {
            return 0.0;
        };
        let eta = self.lat.eta();
        let tol = self.lat.tol();
        let dy = eta * SQRT3_2;
        let lo = ((p[1] - r - tol) / dy).ceil() as i64;
        let hi = ((p[1] + r + tol) / dy).floor() as i64;
        let mut total = 0.0;
        for j in lo..=hi {
            let row = j - j0 as i64;
            if row < 0 || row as usize >= self.rows.len() {
                continue;
            }
            let (jj, start, len, i_min) = self.rows[row as usize];
            let y = lattice_position(eta, 0, jj)[1];
            let w2 = r * r - (y - p[1]).powi(2);
            if w2 < -tol * r {
                continue;
            }
            let w = w2.max(0.0).sqrt();
            let a = ((p[0] - w - tol) / eta - 0.5 * jj as f64).ceil() as i64;
            let b = ((p[0] + w + tol) / eta - 0.5 * jj as f64).floor() as i64;
            let a = a.max(i_min as i64);
            let b = b.min(i_min as i64 + len as i64 - 1);
            if a > b {
                continue;
            }
            let base = (start as usize) + row as usize;
            let ka = (a - i_min as i64) as usize;
            let kb = (b - i_min as i64) as usize + 1;
            total += self.prefix[base + kb] - self.prefix[base + ka];
        }
        total
    }

    pub fn site_ball_mass(&self, s: u32, r: f64) -> f64 {
        self.ball_mass(self.lat.position(s), r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModerateSet {
    pub c: f64,
    pub rho: f64,
    pub member: Vec<bool>,
}

impl ModerateSet {
    pub fn count(&self) -> usize {
        self.member.iter().filter(|&&b| b).count()
    }
}

/// `rho = (3/8 - gamma^2/4) / 2`, clipped to `[0.01, 0.2]`.
pub fn default_rho(gamma: f64) -> f64 {
    ((3.0 / 8.0 - gamma * gamma / 4.0) / 2.0).clamp(0.01, 0.2)
}

/// Dyadic scales `n >= 1` with `2^-n >= eta`.
pub fn moderate_scales(eta: f64) -> Vec<u32> {
    let top = (1.0 / eta).log2();
    (1..=((top + 1e-9).floor().max(0.0) as u32)).collect()
}

/// Sites whose ball masses stay below `C * alpha4(2^-n, 1) * 2^(-n rho)` at
/// every dyadic scale `2^-n >= eta`.
pub fn moderate_set(lat: &Lattice, gmc: &SiteMeasure, c: f64, rho: f64, cal: &Alpha4Calibration) -> Result<ModerateSet> {
    if !(c >= 0.0) {
        return Err(invalid(format!("moderate constant must be nonnegative, got {c}")));
    }
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(invalid(format!("rho must be positive, got {rho}")));
    }
    if gmc.len() != lat.len() {
        return Err(LdpError::Mismatch(format!("lattice has {} sites, measure {}", lat.len(), gmc.len())));
    }
    let scales = moderate_scales(lat.eta());
    let thresholds = scales
        .iter()
        .map(|&n| {
            let r = (-(n as f64)).exp2();
            Ok((r, c * cal.at(r)? * (-(n as f64) * rho).exp2()))
        })
        .collect::<Result<Vec<_>>>()?;
    let sums = BallSums::new(lat, gmc);
    let member = par::map_indexed(lat.len(), |s| {
        thresholds
            .iter()
            .all(|&(r, th)| sums.site_ball_mass(s as u32, r) < th)
    });
    Ok(ModerateSet { c, rho, member })
}

pub fn truncate_measure(m: &SiteMeasure, ms: &ModerateSet) -> Result<SiteMeasure> {
    if m.len() != ms.member.len() {
        return Err(LdpError::Mismatch(format!("measure has {} sites, moderate set {}", m.len(), ms.member.len())));
    }
    let masses = m
        .masses
        .iter()
        .zip(&ms.member)
        .map(|(&x, &keep)| if keep { x } else { 0.0 })
        .collect();
    Ok(SiteMeasure { masses, label: format!("{} truncated C={}", m.label, ms.c) })
}

/// CSV with columns `site_index,x,y,mass`.
pub fn write_measure_csv<W: Write>(lat: &Lattice, m: &SiteMeasure, mut w: W) -> Result<()> {
    writeln!(w, "site_index,x,y,mass")?;
    for (s, (p, mass)) in lat.positions().iter().zip(&m.masses).enumerate() {
        writeln!(w, "{s},{},{},{}", p[0], p[1], mass)?;
    }
    Ok(())
}
