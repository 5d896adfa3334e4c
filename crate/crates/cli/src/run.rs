use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ldp_core::dynamics::{ldp_initial, ldp_rates, run_dp_with, switch_count_check, write_events_csv, write_samples_csv, DpOptions, PivotalEstimate};
use ldp_core::experiments::{
    fit_power_law, frozen_check, mixing_curve, regime_classify, write_frozen_csv, write_mixing_csv, write_regime_csv,
    FrozenParams, Manifest, MixingMode, MixingParams,
};
use ldp_core::field::{sample_field, Kernel};
use ldp_core::gmc::{default_rho, gmc_measure, lebesgue_measure, moderate_set, truncate_measure, write_measure_csv};
use ldp_core::lattice::{Lattice, Orientation, Rect, RectQuad};
use ldp_core::perc::{calibrate_alpha4, default_cache_dir, Alpha4Calibration};
use ldp_core::spectral::{crossing_truth_table, spectral_distribution, walsh_transform, write_spectrum_csv, TruthTable};
use serde::Serialize;

use crate::params::*;
use crate::CliError;

pub const VERSION: &str = env!("LDP_BUILD_VERSION");

const DEFAULT_SEED: u64 = 1;
const DEFAULT_ETA: f64 = 1.0 / 64.0;
const DEFAULT_CAL_ETA: f64 = 1.0 / 512.0;
const DEFAULT_CAL_SAMPLES: u64 = 20_000;
const DEFAULT_CAL_SEED: u64 = 20;
/// Band for the fitted four-arm exponent; outside it `calibrate` exits 2.
const ALPHA4_BAND: (f64, f64) = (1.10, 1.40);
/// Switch-count z-scores at or above this exit 2.
const SWITCH_Z: f64 = 4.0;

/// Result of a command that ran to completion.
pub enum Status {
    Ok,
    /// Finished, but a statistical check came out of band.
    Soft(String),
}

type Res = Result<Status, CliError>;

fn invalid(msg: impl Into<String>, hint: &str) -> CliError {
    CliError::invalid(msg, hint)
}

fn gamma_in_range(gamma: Option<f64>) -> Result<f64, CliError> {
    let g = gamma.ok_or_else(|| invalid("missing parameter gamma", "pass --gamma in [0,2)"))?;
    if !(0.0..2.0).contains(&g) {
        return Err(invalid(format!("gamma out of [0,2) (got {g})"), "the Liouville measure needs 0 <= gamma < 2"));
    }
    Ok(g)
}

fn positive(name: &str, v: f64) -> Result<f64, CliError> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(invalid(format!("{name} must be positive and finite (got {v})"), "use a positive number"));
    }
    Ok(v)
}

fn mesh(eta: f64) -> Result<f64, CliError> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(invalid(format!("eta out of (0,1) (got {eta})"), "use a dyadic mesh such as 0.015625"));
    }
    Ok(eta)
}

fn replicas(n: usize) -> Result<usize, CliError> {
    if n < 2 {
        return Err(invalid(format!("replicas must be at least 2 (got {n})"), "standard errors need two replicas"));
    }
    Ok(n)
}

fn rect(name: &str, v: &[f64]) -> Result<Rect, CliError> {
    if v.len() != 4 {
        return Err(invalid(format!("{name} needs 4 numbers x0,x1,y0,y1 (got {})", v.len()), "example: 0,1,0,1"));
    }
    Rect::new(v[0], v[1], v[2], v[3]).map_err(|e| invalid(format!("{name}: {e}"), "need x0 < x1 and y0 < y1"))
}

fn orientation(o: &str) -> Result<Orientation, CliError> {
    match o {
        "lr" => Ok(Orientation::LeftRight),
        "bt" => Ok(Orientation::BottomTop),
        _ => Err(invalid(format!("unknown orientation {o:?}"), "use lr (left-right) or bt (bottom-top)")),
    }
}

fn quad(domain: &Rect, q: &Option<Vec<f64>>, o: &Option<String>) -> Result<RectQuad, CliError> {
    let r = match q {
        Some(v) => rect("quad", v)?,
        None => *domain,
    };
    let o = orientation(o.as_deref().unwrap_or("lr"))?;
    RectQuad::new(r, o, domain).map_err(|e| invalid(e.to_string(), "the quad must lie inside the domain"))
}

fn kernel(lat: &Lattice, kind: &str, depth: Option<u32>, length_scale: Option<f64>) -> Result<Kernel, CliError> {
    match kind {
        "auto" => Ok(Kernel::for_lattice(lat)),
        "exact_log" => Ok(Kernel::exact_log(length_scale.unwrap_or(lat.domain().diameter()))),
        "brw" => Ok(Kernel::brw(depth.unwrap_or_else(|| Kernel::min_brw_depth(lat.eta())))),
        _ => Err(invalid(format!("unknown kernel {kind:?}"), "use auto, exact_log or brw")),
    }
}

fn dyadic_radii(eta: f64) -> Vec<f64> {
    let mut r = 0.25;
    let mut out = Vec::new();
    while r >= 8.0 * eta * (1.0 - 1e-12) {
        out.push(r);
        r /= 2.0;
    }
    out
}

fn cache_dir(cache: &Option<PathBuf>) -> Option<PathBuf> {
    cache.clone().or_else(default_cache_dir)
}

/// Calibration parameters shared by every command with clock rates.
struct CalSpec {
    eta: f64,
    samples: u64,
    seed: u64,
    exponent: Option<f64>,
    cache: Option<PathBuf>,
}

impl CalSpec {
    fn check(&self) -> Result<(), CliError> {
        mesh(self.eta)?;
        if let Some(x) = self.exponent {
            positive("alpha4_exponent", x)?;
        } else if dyadic_radii(self.eta).len() < 2 {
            return Err(invalid(format!("cal_eta {} leaves fewer than two radii", self.eta), "use cal_eta <= 1/64"));
        }
        if self.samples == 0 {
            return Err(invalid("cal_samples must be positive", "the default is 20000"));
        }
        Ok(())
    }

    /// Table read at mesh `eta`.
    fn load(&self, eta: f64) -> Result<Alpha4Calibration, CliError> {
        if let Some(x) = self.exponent {
            return Ok(Alpha4Calibration::power_law(eta, x));
        }
        let cal = calibrate_alpha4(self.eta, &dyadic_radii(self.eta), self.samples, self.seed, self.cache.as_deref())?;
        Ok(cal.with_eta(eta))
    }
}

macro_rules! cal_spec {
    ($p:expr) => {
        CalSpec {
            eta: *$p.cal_eta.get_or_insert(DEFAULT_CAL_ETA),
            samples: *$p.cal_samples.get_or_insert(DEFAULT_CAL_SAMPLES),
            seed: *$p.cal_seed.get_or_insert(DEFAULT_CAL_SEED),
            exponent: $p.alpha4_exponent,
            cache: cache_dir(&$p.cache),
        }
    };
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let name = path.file_name().ok_or_else(|| invalid(format!("{} is not a file path", path.display()), "name an output file"))?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let res = fs::write(&tmp, bytes).and_then(|_| fs::rename(&tmp, path));
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    res.map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Writes the CSV to `out` with a manifest beside it, or to stdout.
fn emit<P: Serialize>(command: &str, p: &P, out: &Option<PathBuf>, seed: u64, started: Instant, csv: Vec<u8>) -> Result<(), CliError> {
    match out {
        Some(path) => {
            write_atomic(path, &csv)?;
            let config = serde_json::to_value(p).expect("params serialize");
            let manifest = Manifest::new(command, config, seed, started, VERSION);
            let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
            write_atomic(&manifest_path(path), &json)
        }
        None => std::io::stdout()
            .write_all(&csv)
            .map_err(|e| CliError::io(format!("cannot write to standard output: {e}"))),
    }
}

fn lattice(eta: f64, domain: Rect) -> Result<Lattice, CliError> {
    Lattice::new(eta, domain).map_err(|e| invalid(e.to_string(), "choose a coarser mesh or a smaller domain"))
}

pub fn calibrate(mut p: Calibrate) -> Res {
    let started = Instant::now();
    let eta = mesh(*p.eta.get_or_insert(DEFAULT_CAL_ETA))?;
    let radii = p.radii.get_or_insert_with(|| dyadic_radii(eta)).clone();
    let samples = *p.samples.get_or_insert(DEFAULT_CAL_SAMPLES);
    let seed = *p.seed.get_or_insert(DEFAULT_CAL_SEED);
    if samples == 0 {
        return Err(invalid("samples must be positive", "try 20000"));
    }
    for &r in &radii {
        if !(r >= 8.0 * eta * (1.0 - 1e-12) && r <= 1.0) {
            return Err(invalid(format!("radius {r} outside [8 eta, 1]"), "drop radii below 8 eta"));
        }
    }
    let cal = calibrate_alpha4(eta, &radii, samples, seed, cache_dir(&p.cache).as_deref())?;
    let mut csv = b"r,alpha4,se,n,upper_bound\n".to_vec();
    let mut entries = cal.entries.clone();
    entries.sort_by(|a, b| b.r.total_cmp(&a.r));
    for e in entries.iter().filter(|e| radii.contains(&e.r)) {
        writeln!(csv, "{},{},{},{},{}", e.r, e.alpha4, e.se, e.n, e.upper_bound).expect("vec write");
    }
    emit("calibrate", &p, &p.out, seed, started, csv)?;
    match cal.fit() {
        Ok(fit) => {
            eprintln!("four-arm exponent {:.4} +- {:.4}", fit.slope, fit.slope_se);
            if fit.slope < ALPHA4_BAND.0 || fit.slope > ALPHA4_BAND.1 {
                return Ok(Status::Soft(format!("exponent {:.4} outside [{}, {}]", fit.slope, ALPHA4_BAND.0, ALPHA4_BAND.1)));
            }
            Ok(Status::Ok)
        }
        Err(e) => Ok(Status::Soft(format!("no exponent fit: {e}"))),
    }
}

pub fn field(mut p: FieldCmd) -> Res {
    let started = Instant::now();
    let eta = mesh(*p.eta.get_or_insert(DEFAULT_ETA))?;
    let domain = rect("domain", p.domain.get_or_insert_with(|| vec![0.0, 1.0, 0.0, 1.0]))?;
    let seed = *p.seed.get_or_insert(DEFAULT_SEED);
    let lat = lattice(eta, domain)?;
    let k = kernel(&lat, p.kernel.get_or_insert_with(|| "auto".into()), p.depth, p.length_scale)?;
    let f = sample_field(&lat, &k, seed)?;
    let mut csv = b"site_index,x,y,h,variance\n".to_vec();
    for (s, pos) in lat.positions().iter().enumerate() {
        writeln!(csv, "{s},{},{},{},{}", pos[0], pos[1], f.values[s], f.variance[s]).expect("vec write");
    }
    emit("field", &p, &p.out, seed, started, csv)?;
    Ok(Status::Ok)
}

pub fn gmc(mut p: Gmc) -> Res {
    let started = Instant::now();
    let gamma = gamma_in_range(p.gamma)?;
    let eta = mesh(*p.eta.get_or_insert(DEFAULT_ETA))?;
    let domain = rect("domain", p.domain.get_or_insert_with(|| vec![0.0, 1.0, 0.0, 1.0]))?;
    let seed = *p.seed.get_or_insert(DEFAULT_SEED);
    if let Some(c) = p.cutoff {
        positive("cutoff", c)?;
    }
    let spec = cal_spec!(p);
    if p.cutoff.is_some() {
        spec.check()?;
    }
    let lat = lattice(eta, domain)?;
    let k = kernel(&lat, p.kernel.get_or_insert_with(|| "auto".into()), p.depth, p.length_scale)?;
    let f = sample_field(&lat, &k, seed)?;
    let mut m = gmc_measure(&f, gamma, &lebesgue_measure(&lat))?;
    if let Some(c) = p.cutoff {
        let cal = spec.load(eta)?;
        m = truncate_measure(&m, &moderate_set(&lat, &m, c, default_rho(gamma), &cal)?)?;
    }
    let mut csv = Vec::new();
    write_measure_csv(&lat, &m, &mut csv)?;
    emit("gmc", &p, &p.out, seed, started, csv)?;
    Ok(Status::Ok)
}

fn time_grid(name: &str, grid: &[f64]) -> Result<(), CliError> {
    if grid.is_empty() || grid.iter().any(|t| !(*t >= 0.0 && t.is_finite())) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid(format!("{name} must be nonnegative, finite and strictly increasing"), "example: 0,1,2,5"));
    }
    Ok(())
}

pub fn simulate(mut p: Simulate) -> Res {
    let started = Instant::now();
    let gamma = gamma_in_range(p.gamma)?;
    let eta = mesh(*p.eta.get_or_insert(DEFAULT_ETA))?;
    let domain = rect("domain", p.domain.get_or_insert_with(|| vec![0.0, 1.0, 0.0, 1.0]))?;
    let q = quad(&domain, &p.quad, &p.orientation)?;
    let seed = *p.seed.get_or_insert(DEFAULT_SEED);
    let tmax = positive("tmax", *p.tmax.get_or_insert(1.0))?;
    let grid = p.t_grid.get_or_insert_with(|| (0..=10).map(|k| tmax * k as f64 / 10.0).collect()).clone();
    time_grid("t_grid", &grid)?;
    if grid.last().is_some_and(|&t| t > tmax) {
        return Err(invalid("t_grid extends past tmax", "raise tmax or trim the grid"));
    }
    let cutoff = match p.cutoff {
        Some(c) => positive("cutoff", c)?,
        None => f64::INFINITY,
    };
    let spec = cal_spec!(p);
    spec.check()?;
    let lat = lattice(eta, domain)?;
    let k = kernel(&lat, p.kernel.get_or_insert_with(|| "auto".into()), p.depth, p.length_scale)?;
    let cal = spec.load(eta)?;
    let f = sample_field(&lat, &k, ldp_core::rng::derive_seed(seed, 0xF1E1D))?;
    let rates = ldp_rates(&lat, &f, gamma, cutoff, &cal)?;
    let opts = DpOptions { record_events: p.events.is_some(), ..Default::default() };
    let traj = run_dp_with(&lat, &ldp_initial(&lat, seed), &rates, tmax, &[q], &grid, seed, &opts)?;
    if let Some(path) = &p.events {
        let mut ev = Vec::new();
        write_events_csv(&traj, &mut ev)?;
        write_atomic(path, &ev)?;
    }
    let mut csv = Vec::new();
    write_samples_csv(&traj, &mut csv)?;
    emit("simulate", &p, &p.out, seed, started, csv)?;
    Ok(Status::Ok)
}

pub fn spectrum(mut p: Spectrum) -> Res {
    let started = Instant::now();
    let seed = *p.seed.get_or_insert(DEFAULT_SEED);
    let function = p.function.get_or_insert_with(|| "maj3".into()).clone();
    let bits = |p: &mut Spectrum| -> Result<usize, CliError> {
        let n = *p.bits.get_or_insert(3);
        if n == 0 || n > 20 {
            return Err(invalid(format!("bits must lie in 1..=20 (got {n})"), "the table has 2^bits entries"));
        }
        Ok(n)
    };
    let tt = match function.as_str() {
        "maj3" => TruthTable::majority3(),
        "dictator" => {
            let n = bits(&mut p)?;
            let k = *p.index.get_or_insert(0);
            if k >= n {
                return Err(invalid(format!("index {k} out of 0..{n}"), "pick a bit below --bits"));
            }
            TruthTable::dictator(n, k)?
        }
        "random" => TruthTable::random(bits(&mut p)?, seed)?,
        "crossing" => {
            let eta = positive("eta", *p.eta.get_or_insert(1.0))?;
            let domain = rect("domain", p.domain.get_or_insert_with(|| vec![-0.6, 2.1, -0.1, 1.8]))?;
            let q = quad(&domain, &None, &p.orientation)?;
            let lat = lattice(eta, domain)?;
            if lat.len() > 20 {
                return Err(invalid(format!("crossing on {} sites; at most 20 are tabulated", lat.len()), "shrink the domain or coarsen eta"));
            }
            crossing_truth_table(&lat, &[q])?
        }
        other => return Err(invalid(format!("unknown function {other:?}"), "use maj3, dictator, random or crossing")),
    };
    let dist = spectral_distribution(&walsh_transform(&tt)?)?;
    let mut csv = Vec::new();
    write_spectrum_csv(&dist, &mut csv)?;
    emit("spectrum", &p, &p.out, seed, started, csv)?;
    Ok(Status::Ok)
}

pub fn mixing(mut p: Mixing) -> Res {
    let started = Instant::now();
    let gamma = gamma_in_range(p.gamma)?;
    let eta = mesh(*p.eta.get_or_insert(1.0 / 128.0))?;
    let domain = rect("domain", p.domain.get_or_insert_with(|| vec![0.0, 1.0, 0.0, 1.0]))?;
    let q = quad(&domain, &p.quad, &p.orientation)?;
    let seed = *p.seed.get_or_insert(DEFAULT_SEED);
    let tmax = *p.tmax.get_or_insert(100.0);
    if !(tmax > 0.1 && tmax.is_finite()) {
        return Err(invalid(format!("tmax must exceed 0.1 (got {tmax})"), "the default grid starts at 0.1"));
    }
    let grid = p
        .t_grid
        .get_or_insert_with(|| (0..=12).map(|k| 0.1 * (tmax / 0.1).powf(k as f64 / 12.0)).collect())
        .clone();
    time_grid("t_grid", &grid)?;
    let n = replicas(*p.replicas.get_or_insert(400))?;
    let mode = match p.mode.get_or_insert_with(|| "annealed".into()).as_str() {
        "annealed" => MixingMode::Annealed,
        "quenched" => MixingMode::Quenched,
        m => return Err(invalid(format!("unknown mode {m:?}"), "use annealed or quenched")),
    };
    let cutoff = match p.cutoff {
        Some(c) => positive("cutoff", c)?,
        None => f64::INFINITY,
    };
    let fit_tmin = *p.fit_tmin.get_or_insert(1.0);
    let spec = cal_spec!(p);
    spec.check()?;
    let lat = lattice(eta, domain)?;
    let k = kernel(&lat, p.kernel.get_or_insert_with(|| "auto".into()), p.depth, p.length_scale)?;
    let cal = spec.load(eta)?;
    let params = MixingParams { gamma, eta, domain, quad: q, t_grid: grid, n_replicas: n, mode, seed, cutoff, kernel: Some(k) };
    let curve = mixing_curve(&params, &cal)?;
    let mut csv = Vec::new();
    write_mixing_csv(&curve, &mut csv)?;
    emit("mixing", &p, &p.out, seed, started, csv)?;
    match fit_power_law(&curve, fit_tmin) {
        Ok(f) => eprintln!(
            "decay exponent {:.4} +- {:.4} (r2 {:.3}{}); benchmark {:.4}",
            f.xi_hat,
            f.stderr,
            f.r2,
            if f.poor { ", poor fit" } else { "" },
            ldp_core::experiments::decay_benchmark(0.75, gamma)
        ),
        Err(e) => eprintln!("no decay fit: {e}"),
    }
    match curve.monotonicity_violation(2.0) {
        Some(k) => Ok(Status::Soft(format!("covariance rises by more than 2 SE after t = {}", curve.t_grid[k]))),
        None => Ok(Status::Ok),
    }
}

pub fn frozen(mut p: Frozen) -> Res {
    let started = Instant::now();
    let gamma = gamma_in_range(p.gamma)?;
    let etas = p.etas.get_or_insert_with(|| vec![1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0]).clone();
    if etas.is_empty() {
        return Err(invalid("etas is empty", "example: 0.03125,0.015625"));
    }
    for &e in &etas {
        mesh(e)?;
    }
    let domain = rect("domain", p.domain.get_or_insert_with(|| vec![0.0, 1.0, 0.0, 1.0]))?;
    let q = quad(&domain, &p.quad, &p.orientation)?;
    let seed = *p.seed.get_or_insert(DEFAULT_SEED);
    let t = positive("t", *p.t.get_or_insert(10.0))?;
    let n = replicas(*p.replicas.get_or_insert(1000))?;
    let spec = cal_spec!(p);
    spec.check()?;
    for &e in &etas {
        lattice(e, domain)?;
    }
    let cals = etas.iter().map(|&e| spec.load(e)).collect::<Result<Vec<_>, _>>()?;
    let params = FrozenParams { gamma, etas, domain, quad: q, t, n_replicas: n, seed };
    let rows = frozen_check(&params, &cals)?;
    let mut csv = Vec::new();
    write_frozen_csv(&params, &rows, &mut csv)?;
    emit("frozen", &p, &p.out, seed, started, csv)?;
    let rising = rows.windows(2).find(|w| w[1].p_flip > w[0].p_flip + 2.0 * w[0].se.hypot(w[1].se));
    match rising {
        Some(w) => Ok(Status::Soft(format!("flip probability rises by more than 2 SE from eta {} to {}", w[0].eta, w[1].eta))),
        None => Ok(Status::Ok),
    }
}

pub fn switchcheck(mut p: Switchcheck) -> Res {
    let started = Instant::now();
    let gamma = gamma_in_range(p.gamma)?;
    let eta = positive("eta", *p.eta.get_or_insert(1.0))?;
    let domain = rect("domain", p.domain.get_or_insert_with(|| vec![-0.6, 3.1, -0.1, 1.8]))?;
    let q = quad(&domain, &p.quad, &p.orientation)?;
    let seed = *p.seed.get_or_insert(DEFAULT_SEED);
    let t1 = *p.t1.get_or_insert(1.0);
    let t2 = *p.t2.get_or_insert(3.0);
    if !(t1 >= 0.0 && t2 > t1 && t2.is_finite()) {
        return Err(invalid(format!("need 0 <= t1 < t2 (got {t1}, {t2})"), "example: --t1 1 --t2 3"));
    }
    let n = replicas(*p.replicas.get_or_insert(10_000))?;
    let pivotal = match p.pivotal.get_or_insert_with(|| "exact".into()).as_str() {
        "exact" => PivotalEstimate::Exact,
        "mc" => PivotalEstimate::MonteCarlo(replicas(*p.static_samples.get_or_insert(10_000))?),
        other => return Err(invalid(format!("unknown pivotal estimate {other:?}"), "use exact or mc")),
    };
    // Rates on a tiny lattice with mesh 1 are read from the synthetic table.
    if p.alpha4_exponent.is_none() && eta >= 1.0 / 64.0 {
        p.alpha4_exponent = Some(1.25);
    }
    let spec = cal_spec!(p);
    spec.check()?;
    let lat = lattice(eta, domain)?;
    if pivotal == PivotalEstimate::Exact && lat.len() > 25 {
        return Err(invalid(format!("exact pivotals on {} sites; at most 25", lat.len()), "use --pivotal mc"));
    }
    let k = kernel(&lat, p.kernel.get_or_insert_with(|| "auto".into()), p.depth, p.length_scale)?;
    let cal = spec.load(eta)?;
    let f = sample_field(&lat, &k, ldp_core::rng::derive_seed(seed, 0xF1E1D))?;
    let rates = ldp_rates(&lat, &f, gamma, f64::INFINITY, &cal)?;
    let rep = switch_count_check(&lat, &rates, &q, t1, t2, n, pivotal, seed)?;
    let mut csv = b"observed_mean,observed_se,predicted,predicted_se,z_score\n".to_vec();
    writeln!(csv, "{},{},{},{},{}", rep.observed_mean, rep.observed_se, rep.predicted, rep.predicted_se, rep.z_score).expect("vec write");
    emit("switchcheck", &p, &p.out, seed, started, csv)?;
    if rep.z_score.abs() >= SWITCH_Z {
        return Ok(Status::Soft(format!("switch-count z-score {:.2}", rep.z_score)));
    }
    Ok(Status::Ok)
}

pub fn regime(mut p: Regime) -> Res {
    let started = Instant::now();
    let gamma = p.gamma.ok_or_else(|| invalid("missing parameter gamma", "pass --gamma in (0,2)"))?;
    if !(gamma > 0.0 && gamma < 2.0) {
        return Err(invalid(format!("gamma out of (0,2) (got {gamma})"), "Q = d/gamma + gamma/2 needs gamma > 0"));
    }
    let d = positive("d", *p.d.get_or_insert(0.75))?;
    let seed = *p.seed.get_or_insert(DEFAULT_SEED);
    let r = regime_classify(gamma, d)?;
    let mut csv = Vec::new();
    write_regime_csv(&r, &mut csv)?;
    emit("regime", &p, &p.out, seed, started, csv)?;
    Ok(Status::Ok)
}
