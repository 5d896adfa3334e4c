use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, LdpError, Result};
use crate::lattice::Rect;
use crate::stats::{linear_fit, LinearFit};
use crate::{par, rng};

use super::arms::{trace_arm_interfaces, ArmStarts, LatticeBox};
use super::{color_at, color_key};

/// Environment variable naming the calibration cache directory.
pub const CACHE_ENV: &str = "LDP_CACHE_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alpha4Entry {
    pub r: f64,
    pub alpha4: f64,
    pub se: f64,
    pub n: u64,
    /// No success was observed; `alpha4` holds the rule-of-three upper bound.
    #[serde(default)]
    pub upper_bound: bool,
}

/// Monte Carlo estimates of the four-arm probability `alpha4(r, 1)` at a
/// fixed mesh.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alpha4Calibration {
    pub eta: f64,
    pub entries: Vec<Alpha4Entry>,
    pub seed: u64,
    #[serde(default)]
    pub n_samples: u64,
    #[serde(default)]
    pub created_at: String,
}

impl Alpha4Calibration {
    pub fn empty(eta: f64) -> Self {
        Alpha4Calibration { eta, entries: Vec::new(), seed: 0, n_samples: 0, created_at: String::new() }
    }

    /// Synthetic table `alpha4(r, 1) = r^exponent` on dyadic radii down to
    /// `8 eta`; for tests and quick runs that do not need lattice values.
    pub fn power_law(eta: f64, exponent: f64) -> Self {
        let mut entries = Vec::new();
        let mut r = 0.25;
        while r >= 8.0 * eta - 1e-15 || entries.len() < 2 {
            entries.push(Alpha4Entry { r, alpha4: r.powf(exponent), se: 0.0, n: 0, upper_bound: false });
            r /= 2.0;
        }
        entries.sort_by(|a, b| a.r.total_cmp(&b.r));
        Alpha4Calibration { eta, entries, seed: 0, n_samples: 0, created_at: String::new() }
    }

    /// The same table read at mesh `eta`: `alpha4(r, 1)` for `r` well above
    /// the mesh is nearly mesh independent, so a fine-mesh table serves
    /// coarser meshes whose own radii `>= 8 eta` are too few to fit.
    pub fn with_eta(&self, eta: f64) -> Self {
        Alpha4Calibration { eta, ..self.clone() }
    }

    fn usable(&self) -> Vec<&Alpha4Entry> {
        self.entries.iter().filter(|e| e.alpha4 > 0.0 && e.r < 1.0 && !e.upper_bound).collect()
    }

    /// Least-squares fit of `log alpha4` against `log r`; the slope is the
    /// four-arm exponent.
    pub fn fit(&self) -> Result<LinearFit> {
        let pts = self.usable();
        if pts.len() < 2 {
            return Err(LdpError::MissingCalibration(format!(
                "need two measured radii at eta {}, have {}",
                self.eta,
                pts.len()
            )));
        }
        let xs: Vec<f64> = pts.iter().map(|e| e.r.ln()).collect();
        let ys: Vec<f64> = pts.iter().map(|e| e.alpha4.ln()).collect();
        linear_fit(&xs, &ys)
    }

    pub fn exponent(&self) -> Result<f64> {
        Ok(self.fit()?.slope)
    }

    /// `alpha4(r, 1)`: table value, log-log interpolation between measured
    /// radii (and `alpha4(1, 1) = 1`), or extrapolation below the smallest
    /// radius with the fitted exponent.
    pub fn at(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(invalid(format!("radius must be positive, got {r}")));
        }
        if r >= 1.0 - 1e-12 {
            return Ok(1.0);
        }
        let mut pts: Vec<(f64, f64)> = self.usable().iter().map(|e| (e.r, e.alpha4)).collect();
        if pts.is_empty() {
            return Err(LdpError::MissingCalibration(format!("no four-arm estimates at eta {}", self.eta)));
        }
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.push((1.0, 1.0));
        if let Some(&(_, a)) = pts.iter().find(|(x, _)| (x / r - 1.0).abs() < 1e-9) {
            return Ok(a);
        }
        let (r0, a0) = pts[0];
        if r < r0 {
            let slope = self.exponent()?;
            return Ok(a0 * (r / r0).powf(slope));
        }
        let k = pts.iter().position(|&(x, _)| x > r).expect("r < 1 is bracketed");
        let (rl, al) = pts[k - 1];
        let (rh, ah) = pts[k];
        let w = (r / rl).ln() / (rh / rl).ln();
        Ok((al.ln() + w * (ah / al).ln()).exp())
    }

    /// `alpha4(eta, 1)`, the clock-rate normalizer.
    pub fn alpha4_eta(&self) -> Result<f64> {
        self.at(self.eta)
    }
}

/// Cache directory from the environment, if set.
pub fn default_cache_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_ENV).map(PathBuf::from)
}

fn cache_file(dir: &Path, eta: f64, n: u64, seed: u64) -> PathBuf {
    dir.join(format!("alpha4_eta{:016x}_n{n}_seed{seed}.json", eta.to_bits()))
}

fn load_cache(path: &Path) -> Option<Alpha4Calibration> {
    let text = fs::read_to_string(path).ok()?;
    match serde_json::from_str(&text) {
        Ok(c) => Some(c),
        Err(e) => {
            log::warn!("ignoring unreadable calibration cache {}: {e}", path.display());
            None
        }
    }
}

fn store_cache(path: &Path, cal: &Alpha4Calibration) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    fs::write(&tmp, serde_json::to_vec_pretty(cal)?)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Four-arm probabilities from the center to distance 1, estimated on
/// `n_samples` configurations of the whole plane with lazily hashed colors.
///
/// All radii share each sample; since arms from a smaller box contain arms
/// from any larger one, radii are checked from largest to smallest and the
/// first failure ends the sample. Results are cached per `(eta, n, seed)`
/// when `cache_dir` is given; cached radii are reused and new radii merged.
pub fn calibrate_alpha4(eta: f64, radii: &[f64], n_samples: u64, seed: u64, cache_dir: Option<&Path>) -> Result<Alpha4Calibration> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(invalid(format!("eta must lie in (0,1), got {eta}")));
    }
    if n_samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    for &r in radii {
        if !(r <= 1.0 && r >= 8.0 * eta * (1.0 - 1e-12)) {
            return Err(invalid(format!("radius {r} outside [8 eta, 1]")));
        }
    }
    let path = cache_dir.map(|d| cache_file(d, eta, n_samples, seed));
    let mut cal = path
        .as_deref()
        .and_then(load_cache)
        .filter(|c| c.eta == eta && c.seed == seed && c.n_samples == n_samples)
        .unwrap_or(Alpha4Calibration {
            eta,
            entries: Vec::new(),
            seed,
            n_samples,
            created_at: String::new(),
        });
    let have = |r: f64| cal.entries.iter().any(|e| e.r == r);
    let mut todo: Vec<f64> = radii.iter().copied().filter(|&r| !have(r)).collect();
    todo.sort_by(|a, b| b.total_cmp(a));
    todo.dedup();
    if todo.is_empty() {
        return Ok(cal);
    }

    let outer = LatticeBox::from_rect(eta, &Rect::centered([0.0, 0.0], 1.0));
    let starts: Vec<Option<ArmStarts>> = todo
        .iter()
        .map(|&r| (r < 1.0).then(|| ArmStarts::new(LatticeBox::from_rect(eta, &Rect::centered([0.0, 0.0], r)), outer)))
        .collect();
    let depth = par::map_indexed(n_samples as usize, |k| {
        let key = color_key(rng::derive_seed(seed, k as u64));
        let open = |i: i32, j: i32| color_at(key, i, j);
        let mut passed = 0u32;
        for st in &starts {
            let ok = match st {
                None => true,
                Some(st) => trace_arm_interfaces(st, open, 4) >= 4,
            };
            if !ok {
                break;
            }
            passed += 1;
        }
        passed
    });
    for (idx, &r) in todo.iter().enumerate() {
        let hits = depth.iter().filter(|&&d| d as usize > idx).count() as u64;
        let nf = n_samples as f64;
        let entry = if hits == 0 {
            log::warn!("no four-arm event at r = {r}; recording the upper bound 3/n");
            Alpha4Entry { r, alpha4: 3.0 / nf, se: 0.0, n: n_samples, upper_bound: true }
        } else {
            let p = hits as f64 / nf;
            Alpha4Entry { r, alpha4: p, se: (p * (1.0 - p) / nf).sqrt(), n: n_samples, upper_bound: false }
        };
        cal.entries.push(entry);
    }
    cal.entries.sort_by(|a, b| a.r.total_cmp(&b.r));
    cal.created_at = chrono::Utc::now().to_rfc3339();
    if let Some(path) = &path {
        store_cache(path, &cal)?;
    }
    Ok(cal)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_interpolates_and_extrapolates() {
        let cal = Alpha4Calibration::power_law(1.0 / 256.0, 1.25);
        for r in [0.25f64, 0.125, 0.1, 0.03125, 1.0 / 256.0, 0.6] {
            let want = r.powf(1.25);
            assert!((cal.at(r).unwrap() / want - 1.0).abs() < 1e-9, "r {r}");
        }
        assert_eq!(cal.at(1.0).unwrap(), 1.0);
        assert!((cal.exponent().unwrap() - 1.25).abs() < 1e-12);
        assert!(matches!(Alpha4Calibration::empty(0.1).at(0.5), Err(LdpError::MissingCalibration(_))));
    }

    #[test]
    fn degenerate_radius_is_certain() {
        let cal = calibrate_alpha4(1.0 / 16.0, &[1.0], 10, 0, None).unwrap();
        assert_eq!(cal.entries[0].alpha4, 1.0);
        assert!(calibrate_alpha4(1.0 / 16.0, &[0.25], 0, 0, None).is_err());
        assert!(calibrate_alpha4(1.0 / 16.0, &[0.25], 10, 0, None).is_err());
    }

    #[test]
    fn early_stop_matches_full_evaluation() {
        let eta = 1.0 / 64.0;
        let radii = [0.5, 0.25, 0.125];
        let outer = LatticeBox::from_rect(eta, &Rect::centered([0.0, 0.0], 1.0));
        let starts: Vec<ArmStarts> = radii
            .iter()
            .map(|&r| ArmStarts::new(LatticeBox::from_rect(eta, &Rect::centered([0.0, 0.0], r)), outer))
            .collect();
        let mut seen = [0u32; 3];
        for k in 0..3000u64 {
            let key = color_key(k);
            let open = |i: i32, j: i32| color_at(key, i, j);
            let arms: Vec<bool> = starts.iter().map(|s| trace_arm_interfaces(s, open, 4) >= 4).collect();
            // larger inner boxes are implied by smaller ones
            for w in arms.windows(2) {
                assert!(w[0] || !w[1]);
            }
            for (c, a) in seen.iter_mut().zip(&arms) {
                *c += *a as u32;
            }
        }
        let cal = calibrate_alpha4(eta, &radii, 3000, 0, None).unwrap();
        assert!(seen[2] > 0);
        let est: Vec<f64> = cal.entries.iter().rev().map(|e| e.alpha4).collect();
        // different seeds, so compare loosely
        for (e, c) in est.iter().zip(seen) {
            let p = c as f64 / 3000.0;
            assert!((e - p).abs() < 5.0 * (p * (1.0 - p) / 1500.0).sqrt() + 1e-3, "{e} vs {p}");
        }
    }

    #[test]
    fn estimates_decrease_with_radius() {
        let eta = 1.0 / 128.0;
        let cal = calibrate_alpha4(eta, &[0.0625, 0.125, 0.25, 0.5], 4000, 7, None).unwrap();
        for w in cal.entries.windows(2) {
            assert!(w[0].alpha4 <= w[1].alpha4 + 2.0 * (w[0].se + w[1].se));
            assert!(w[0].alpha4 > 0.0 && w[1].alpha4 <= 1.0);
        }
    }

    #[test]
    fn cache_round_trip_and_merge() {
        let dir = tempfile::tempdir().unwrap();
        let eta = 1.0 / 64.0;
        let a = calibrate_alpha4(eta, &[0.25], 500, 3, Some(dir.path())).unwrap();
        let b = calibrate_alpha4(eta, &[0.25, 0.125], 500, 3, Some(dir.path())).unwrap();
        assert_eq!(b.entries.len(), 2);
        assert_eq!(b.entries.iter().find(|e| e.r == 0.25).unwrap(), &a.entries[0]);
        let c = calibrate_alpha4(eta, &[0.125, 0.25], 500, 3, Some(dir.path())).unwrap();
        assert_eq!(b, c);
        let files: Vec<_> = fs::read_dir(dir.path()).unwrap().collect();
        assert_eq!(files.len(), 1);
        let text = fs::read_to_string(files[0].as_ref().unwrap().path()).unwrap();
        let json: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in ["eta", "entries", "seed", "created_at"] {
            assert!(json.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn zero_successes_give_flagged_upper_bound() {
        let cal = calibrate_alpha4(1.0 / 256.0, &[0.03125], 3, 1, None).unwrap();
        let e = cal.entries[0];
        if e.upper_bound {
            assert_eq!(e.alpha4, 1.0);
        } else {
            assert!(e.alpha4 > 0.0);
        }
    }
}
