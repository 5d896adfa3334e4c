//! Statistical studies built on the dynamics: mixing curves and their
//! decay exponents, the frozen regime, regime classification and the
//! Laplace transform of the total GMC mass.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dynamics::{ldp_initial, ldp_rates, run_dp_with, DpOptions};
use crate::error::{invalid, LdpError, Result};
use crate::field::{FieldSampler, Kernel};
use crate::gmc::{gmc_measure, SiteMeasure};
use crate::lattice::{Lattice, Rect, RectQuad};
use crate::par;
use crate::perc::Alpha4Calibration;
use crate::rng::{derive_seed, hash4, unit_open};
use crate::stats::{bootstrap_se, covariance, linear_fit, mean_se};

/// Pivotal dimension used by default.
pub const D_PIVOTAL: f64 = 0.75;
/// Resamples for bootstrap standard errors.
pub const BOOTSTRAP_RESAMPLES: usize = 200;
/// `R^2` below which a power-law fit is flagged as poor.
pub const POOR_FIT_R2: f64 = 0.98;

const TAG_FIELD: u64 = 0xF1E1D;

/// `(d - gamma^2) / (d + gamma^2)`.
pub fn theta(d: f64, gamma: f64) -> f64 {
    let g2 = gamma * gamma;
    (d - g2) / (d + g2)
}

/// `Q = d / gamma + gamma / 2`.
pub fn q_param(d: f64, gamma: f64) -> f64 {
    d / gamma + gamma / 2.0
}

/// `c = 25 - 6 Q^2`.
pub fn central_charge(d: f64, gamma: f64) -> f64 {
    25.0 - 6.0 * q_param(d, gamma).powi(2)
}

/// Benchmark decay exponent `2 theta / 5` for the annealed covariance.
pub fn decay_benchmark(d: f64, gamma: f64) -> f64 {
    2.0 * theta(d, gamma) / 5.0
}

pub fn stable_threshold() -> f64 {
    2.0 - 2.5f64.sqrt()
}

pub fn supercritical_threshold() -> f64 {
    1.5f64.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Regime {
    Stable,
    Intermediate,
    /// Exactly at the supercritical threshold, which no statement covers.
    Unresolved,
    Supercritical,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::Stable => "STABLE",
            Regime::Intermediate => "INTERMEDIATE",
            Regime::Unresolved => "UNRESOLVED",
            Regime::Supercritical => "SUPERCRITICAL",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub gamma: f64,
    pub regime: Regime,
    pub stable_below: f64,
    pub supercritical_above: f64,
    pub d: f64,
    pub q: f64,
    pub c: f64,
}

pub fn regime_classify(gamma: f64, d: f64) -> Result<RegimeReport> {
    if !(gamma > 0.0 && gamma < 2.0) {
        return Err(invalid(format!("gamma {gamma} out of (0,2)")));
    }
    if !(d > 0.0 && d.is_finite()) {
        return Err(invalid(format!("d must be positive, got {d}")));
    }
    let (lo, hi) = (stable_threshold(), supercritical_threshold());
    let regime = if gamma < lo {
        Regime::Stable
    } else if (gamma - hi).abs() <= 1e-12 {
        Regime::Unresolved
    } else if gamma < hi {
        Regime::Intermediate
    } else {
        Regime::Supercritical
    };
    Ok(RegimeReport {
        gamma,
        regime,
        stable_below: lo,
        supercritical_above: hi,
        d,
        q: q_param(d, gamma),
        c: central_charge(d, gamma),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MixingMode {
    /// Fresh field for every replica.
    Annealed,
    /// One field for all replicas; only the percolation is resampled.
    Quenched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingParams {
    pub gamma: f64,
    pub eta: f64,
    pub domain: Rect,
    pub quad: RectQuad,
    pub t_grid: Vec<f64>,
    pub n_replicas: usize,
    pub mode: MixingMode,
    pub seed: u64,
    /// Moderate-point cutoff; infinite for the plain Liouville dynamics.
    pub cutoff: f64,
    /// Field kernel; by default chosen from the lattice size.
    pub kernel: Option<Kernel>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingCurve {
    pub gamma: f64,
    pub eta: f64,
    pub quad: RectQuad,
    pub t_grid: Vec<f64>,
    pub est_cov: Vec<f64>,
    pub se: Vec<f64>,
    pub n_replicas: usize,
    pub mode: MixingMode,
    pub seed: u64,
    /// Fraction of replicas crossed at time 0.
    pub crossing_rate: f64,
}

impl MixingCurve {
    /// First index `k` where `est_cov[k+1]` exceeds `est_cov[k]` by more than
    /// `z` combined standard errors.
    pub fn monotonicity_violation(&self, z: f64) -> Option<usize> {
        (0..self.est_cov.len().saturating_sub(1)).find(|&k| {
            self.est_cov[k + 1] > self.est_cov[k] + z * self.se[k].hypot(self.se[k + 1])
        })
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(invalid("time grid is empty"));
    }
    if t_grid.iter().any(|t| !(*t >= 0.0 && t.is_finite())) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("time grid must be finite, nonnegative and strictly increasing"));
    }
    Ok(())
}

/// Covariance between the quad's crossing indicator at time 0 and at each
/// grid time, with bootstrap standard errors over replicas.
pub fn mixing_curve(p: &MixingParams, cal: &Alpha4Calibration) -> Result<MixingCurve> {
    if !(0.0..2.0).contains(&p.gamma) {
        return Err(invalid(format!("gamma {} out of [0,2)", p.gamma)));
    }
    check_grid(&p.t_grid)?;
    if p.n_replicas < 2 {
        return Err(invalid("need at least 2 replicas"));
    }
    let lat = Lattice::new(p.eta, p.domain)?;
    let kernel = p.kernel.unwrap_or_else(|| Kernel::for_lattice(&lat));
    let sampler = FieldSampler::new(&lat, &kernel)?;
    let quads = [p.quad];
    let mut times = vec![0.0];
    times.extend(p.t_grid.iter().copied().filter(|&t| t > 0.0));
    let horizon = times.last().copied().filter(|&t| t > 0.0).unwrap_or(1.0);
    let quenched = match p.mode {
        MixingMode::Quenched => Some(ldp_rates(&lat, &sampler.sample(&lat, derive_seed(p.seed, TAG_FIELD))?, p.gamma, p.cutoff, cal)?),
        MixingMode::Annealed => None,
    };
    let rows = par::map_indexed(p.n_replicas, |k| -> Result<Vec<bool>> {
        let seed = derive_seed(p.seed, k as u64);
        let rates = match &quenched {
            Some(r) => r.clone(),
            None => ldp_rates(&lat, &sampler.sample(&lat, derive_seed(seed, TAG_FIELD))?, p.gamma, p.cutoff, cal)?,
        };
        let traj = run_dp_with(&lat, &ldp_initial(&lat, seed), &rates, horizon, &quads, &times, seed, &DpOptions::default())?;
        Ok(traj.samples.iter().map(|row| row[0]).collect())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let column = |k: usize| -> Vec<f64> { rows.iter().map(|r| r[k] as u8 as f64).collect() };
    let x0 = column(0);
    let mut est_cov = Vec::with_capacity(p.t_grid.len());
    let mut se = Vec::with_capacity(p.t_grid.len());
    for (g, &t) in p.t_grid.iter().enumerate() {
        let k = if t == 0.0 { 0 } else { times.iter().position(|&s| s == t).expect("grid time sampled") };
        let xt = column(k);
        est_cov.push(covariance(&x0, &xt));
        se.push(bootstrap_se(rows.len(), BOOTSTRAP_RESAMPLES, derive_seed(p.seed, 0xB0 + g as u64), |idx| {
            let a: Vec<f64> = idx.iter().map(|&i| x0[i]).collect();
            let b: Vec<f64> = idx.iter().map(|&i| xt[i]).collect();
            covariance(&a, &b)
        }));
    }
    Ok(MixingCurve {
        gamma: p.gamma,
        eta: p.eta,
        quad: p.quad,
        t_grid: p.t_grid.clone(),
        est_cov,
        se,
        n_replicas: p.n_replicas,
        mode: p.mode,
        seed: p.seed,
        crossing_rate: x0.iter().sum::<f64>() / x0.len() as f64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub xi_hat: f64,
    pub stderr: f64,
    pub r2: f64,
    pub poor: bool,
    pub used: Vec<f64>,
    /// Grid times left out because the estimate or its 2 SE band reaches 0.
    pub excluded: Vec<f64>,
}

/// Least squares of `log est_cov` on `log t` over `t >= t_min`; the decay
/// exponent is minus the slope.
pub fn fit_power_law(curve: &MixingCurve, t_min: f64) -> Result<PowerFit> {
    let mut used = Vec::new();
    let mut excluded = Vec::new();
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for ((&t, &c), &s) in curve.t_grid.iter().zip(&curve.est_cov).zip(&curve.se) {
        if t < t_min || t <= 0.0 {
            continue;
        }
        if c > 0.0 && c - 2.0 * s > 0.0 {
            used.push(t);
            xs.push(t.ln());
            ys.push(c.ln());
        } else {
            excluded.push(t);
        }
    }
    if used.len() < 4 {
        return Err(LdpError::Fit(format!(
            "{} usable grid points at t >= {t_min} (need 4); excluded {:?}",
            used.len(),
            excluded
        )));
    }
    let fit = linear_fit(&xs, &ys)?;
    Ok(PowerFit {
        xi_hat: -fit.slope,
        stderr: fit.slope_se,
        r2: fit.r2,
        poor: fit.r2 < POOR_FIT_R2,
        used,
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrozenParams {
    pub gamma: f64,
    pub etas: Vec<f64>,
    pub domain: Rect,
    pub quad: RectQuad,
    pub t: f64,
    pub n_replicas: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrozenRow {
    pub eta: f64,
    pub p_flip: f64,
    pub se: f64,
    pub n: usize,
    /// Replica mean of the total clock rate.
    pub mean_total_rate: f64,
}

/// Probability that the quad's crossing differs between times 0 and `t`,
/// per mesh. Fields are BRW at the minimal depth for every mesh so that
/// all meshes share one field construction. `cals[k]` is the calibration
/// at `etas[k]`.
pub fn frozen_check(p: &FrozenParams, cals: &[Alpha4Calibration]) -> Result<Vec<FrozenRow>> {
    if !(0.0..2.0).contains(&p.gamma) {
        return Err(invalid(format!("gamma {} out of [0,2)", p.gamma)));
    }
    if cals.len() != p.etas.len() {
        return Err(LdpError::Mismatch(format!("{} calibrations for {} meshes", cals.len(), p.etas.len())));
    }
    if !(p.t > 0.0 && p.t.is_finite()) || p.n_replicas < 2 {
        return Err(invalid("need t > 0 and at least 2 replicas"));
    }
    p.etas
        .iter()
        .zip(cals)
        .map(|(&eta, cal)| {
            let lat = Lattice::new(eta, p.domain)?;
            let sampler = FieldSampler::new(&lat, &Kernel::brw(Kernel::min_brw_depth(eta)))?;
            let quads = [p.quad];
            let base = derive_seed(p.seed, eta.to_bits());
            let rows = par::map_indexed(p.n_replicas, |k| -> Result<(f64, f64)> {
                let seed = derive_seed(base, k as u64);
                let field = sampler.sample(&lat, derive_seed(seed, TAG_FIELD))?;
                let rates = ldp_rates(&lat, &field, p.gamma, f64::INFINITY, cal)?;
                let traj = run_dp_with(&lat, &ldp_initial(&lat, seed), &rates, p.t, &quads, &[0.0, p.t], seed, &DpOptions::default())?;
                Ok(((traj.samples[0][0] != traj.samples[1][0]) as u8 as f64, rates.total_rate))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let flips: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let (p_flip, se) = mean_se(&flips);
            let mean_total_rate = rows.iter().map(|r| r.1).sum::<f64>() / rows.len() as f64;
            Ok(FrozenRow { eta, p_flip, se, n: rows.len(), mean_total_rate })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceRow {
    pub t: f64,
    pub estimate: f64,
    pub se: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaplaceReport {
    pub rows: Vec<LaplaceRow>,
    pub base_mass: f64,
    /// Log-log slope over the upper half of the grid.
    pub slope: f64,
    pub slope_se: f64,
    pub theta: f64,
    /// Smallest `K` with `E <= K / (sigma(D) t^theta)` on the fitted points.
    pub k_fit: f64,
    /// Whether the fitted slope is at least as steep as `-theta`.
    pub slope_within_bound: bool,
}

/// Monte Carlo `E[exp(-t mu(D))]` over field replicas, where `mu` is the
/// GMC measure over `base`.
pub fn laplace_decay_check(
    lat: &Lattice,
    gamma: f64,
    d: f64,
    base: &SiteMeasure,
    kernel: &Kernel,
    t_grid: &[f64],
    n_replicas: usize,
    seed: u64,
) -> Result<LaplaceReport> {
    check_grid(t_grid)?;
    let base_mass = base.total();
    if !(base_mass > 0.0) {
        return Err(invalid("base measure has no mass"));
    }
    if n_replicas < 2 {
        return Err(invalid("need at least 2 replicas"));
    }
    let sampler = FieldSampler::new(lat, kernel)?;
    let totals = par::map_indexed(n_replicas, |k| -> Result<f64> {
        let field = sampler.sample(lat, derive_seed(seed, k as u64))?;
        Ok(gmc_measure(&field, gamma, base)?.total())
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let rows: Vec<LaplaceRow> = t_grid
        .iter()
        .map(|&t| {
            let xs: Vec<f64> = totals.iter().map(|m| (-t * m).exp()).collect();
            let (estimate, se) = mean_se(&xs);
            LaplaceRow { t, estimate, se, n: xs.len() }
        })
        .collect();
    let th = theta(d, gamma);
    let upper: Vec<&LaplaceRow> = rows[rows.len() / 2..].iter().filter(|r| r.t > 0.0 && r.estimate > 0.0).collect();
    let (slope, slope_se) = if upper.len() >= 2 {
        let xs: Vec<f64> = upper.iter().map(|r| r.t.ln()).collect();
        let ys: Vec<f64> = upper.iter().map(|r| r.estimate.ln()).collect();
        let f = linear_fit(&xs, &ys)?;
        (f.slope, f.slope_se)
    } else {
        (f64::NEG_INFINITY, 0.0)
    };
    let k_fit = upper.iter().map(|r| r.estimate * base_mass * r.t.powf(th)).fold(0.0, f64::max);
    Ok(LaplaceReport {
        rows,
        base_mass,
        slope,
        slope_se,
        theta: th,
        k_fit,
        slope_within_bound: slope <= -th + 2.0 * slope_se,
    })
}

/// `(2 + gamma^2 / 2) q - gamma^2 q^2 / 2`, the scaling exponent of
/// `E[mu(B_r)^q]` in two dimensions.
pub fn moment_exponent(gamma: f64, q: f64) -> f64 {
    let g2 = gamma * gamma;
    (2.0 + g2 / 2.0) * q - g2 * q * q / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub q: f64,
    pub exponent: f64,
    /// Bootstrap standard error over field replicas.
    pub se: f64,
    pub predicted: f64,
}

/// Fits `log E[mu(B_r(x))^q]` against `log r` for GMC over Lebesgue cell
/// masses on the unit square. Each replica uses nine uniform centers in
/// `[1/4, 3/4]^2`; the BRW is not translation invariant and fixed dyadic
/// centers would see only its weakest correlations.
pub fn moment_scaling(
    gamma: f64,
    qs: &[f64],
    eta: f64,
    radii: &[f64],
    kernel: &Kernel,
    n_replicas: usize,
    seed: u64,
) -> Result<Vec<MomentRow>> {
    if radii.len() < 2 || radii.iter().any(|&r| !(r > 0.0 && r <= 0.25)) {
        return Err(invalid("need at least two radii in (0, 1/4]"));
    }
    if n_replicas < 2 {
        return Err(invalid("need at least 2 replicas"));
    }
    let lat = Lattice::new(eta, Rect::unit())?;
    let sampler = FieldSampler::new(&lat, kernel)?;
    let base = crate::gmc::lebesgue_measure(&lat);
    const CENTERS: usize = 9;
    // masses[k][r][c]: replica k, radius r, center c
    let masses = par::map_indexed(n_replicas, |k| -> Result<Vec<Vec<f64>>> {
        let rs = derive_seed(seed, k as u64);
        let m = gmc_measure(&sampler.sample(&lat, rs)?, gamma, &base)?;
        let sums = crate::gmc::BallSums::new(&lat, &m);
        let centers: Vec<[f64; 2]> = (0..CENTERS as u64)
            .map(|c| {
                let u = |a| 0.25 + 0.5 * unit_open(hash4(rs, 0xCE, c, a, 0));
                [u(0), u(1)]
            })
            .collect();
        Ok(radii.iter().map(|&r| centers.iter().map(|&c| sums.ball_mass(c, r)).collect()).collect())
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let exponent = |q: f64, idx: &[usize]| -> f64 {
        let ys: Vec<f64> = (0..radii.len())
            .map(|ri| {
                let sum: f64 = idx.iter().flat_map(|&k| masses[k][ri].iter()).map(|m| m.powf(q)).sum();
                (sum / (idx.len() * CENTERS) as f64).ln()
            })
            .collect();
        linear_fit(&xs, &ys).map(|f| f.slope).unwrap_or(f64::NAN)
    };
    let all: Vec<usize> = (0..n_replicas).collect();
    Ok(qs
        .iter()
        .enumerate()
        .map(|(i, &q)| MomentRow {
            q,
            exponent: exponent(q, &all),
            se: bootstrap_se(n_replicas, BOOTSTRAP_RESAMPLES, derive_seed(seed, 0x3E + i as u64), |idx| exponent(q, idx)),
            predicted: moment_exponent(gamma, q),
        })
        .collect())
}

/// Replay record written next to every result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub wall_time_s: f64,
    pub version: String,
    pub created_at: String,
}

impl Manifest {
    pub fn new(command: &str, config: serde_json::Value, seed: u64, started: Instant, version: &str) -> Self {
        Manifest {
            command: command.into(),
            config,
            seed,
            wall_time_s: started.elapsed().as_secs_f64(),
            version: version.into(),
            created_at: chrono::Utc::now().to_rfc3339(),
        }
    }
}

pub fn write_mixing_csv<W: Write>(curve: &MixingCurve, mut w: W) -> Result<()> {
    writeln!(w, "gamma,eta,mode,t,est_cov,se,n")?;
    let mode = match curve.mode {
        MixingMode::Annealed => "ANNEALED",
        MixingMode::Quenched => "QUENCHED",
    };
    for ((t, c), s) in curve.t_grid.iter().zip(&curve.est_cov).zip(&curve.se) {
        writeln!(w, "{},{},{mode},{t},{c},{s},{}", curve.gamma, curve.eta, curve.n_replicas)?;
    }
    Ok(())
}

pub fn write_frozen_csv<W: Write>(p: &FrozenParams, rows: &[FrozenRow], mut w: W) -> Result<()> {
    writeln!(w, "gamma,eta,t,p_flip,se,n,mean_total_rate")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{},{}", p.gamma, r.eta, p.t, r.p_flip, r.se, r.n, r.mean_total_rate)?;
    }
    Ok(())
}

pub fn write_laplace_csv<W: Write>(rep: &LaplaceReport, mut w: W) -> Result<()> {
    writeln!(w, "t,estimate,se,n")?;
    for r in &rep.rows {
        writeln!(w, "{},{},{},{}", r.t, r.estimate, r.se, r.n)?;
    }
    Ok(())
}

pub fn write_regime_csv<W: Write>(r: &RegimeReport, mut w: W) -> Result<()> {
    writeln!(w, "gamma,d,regime,q,c")?;
    writeln!(w, "{},{},{},{},{}", r.gamma, r.d, r.regime, r.q, r.c)?;
    Ok(())
}
