//! Event-driven dynamical percolation: per-site Poisson clocks, re-coloring
//! at each ring, crossing observables, and the couplings built on top.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, LdpError, Result};
use crate::field::Field;
use crate::gmc::{default_rho, gmc_measure, lebesgue_measure, moderate_set, truncate_measure, SiteMeasure};
use crate::lattice::{Lattice, RectQuad};
use crate::par;
use crate::perc::{crossing_table, pivotal_probabilities, sample_configuration, Alpha4Calibration, Configuration, QuadSites};
use crate::rng::{coin, derive_seed, exp1, hash4, unit_open};
use crate::stats::mean_se;

/// Refuse runs whose expected number of clock rings exceeds this.
pub const MAX_EVENTS: f64 = 1e9;

const TAG_INIT: u64 = 0x1417;
const TAG_DYN: u64 = 0xD7A;
const TAG_CORR: u64 = 0xC0AA;
const TAG_NEAR: u64 = 0x7EA4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClockRates {
    pub rates: Vec<f64>,
    pub total_rate: f64,
    /// `alpha4(eta, 1)` used to normalize the masses (1 for raw rates).
    pub alpha4_ref: f64,
}

impl ClockRates {
    pub fn from_rates(rates: Vec<f64>, alpha4_ref: f64) -> Result<Self> {
        if let Some(r) = rates.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
            return Err(invalid(format!("clock rate {r} is not a finite nonnegative number")));
        }
        let total_rate = rates.iter().sum();
        Ok(ClockRates { rates, total_rate, alpha4_ref })
    }

    pub fn zero(n: usize) -> Self {
        ClockRates { rates: vec![0.0; n], total_rate: 0.0, alpha4_ref: 1.0 }
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }
}

/// Rates `m(x) / alpha4(eta, 1)`.
pub fn make_rates(m: &SiteMeasure, cal: &Alpha4Calibration) -> Result<ClockRates> {
    let a = cal.alpha4_eta()?;
    if !(a > 0.0) {
        return Err(LdpError::MissingCalibration(format!("alpha4(eta, 1) = {a} at eta {}", cal.eta)));
    }
    ClockRates::from_rates(m.masses.iter().map(|&x| x / a).collect(), a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub site: u32,
    pub open: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub initial: Configuration,
    pub final_config: Configuration,
    /// Every ring in time order, including re-colorings to the same color.
    /// Empty unless events were recorded.
    pub events: Vec<Event>,
    pub horizon: f64,
    pub seed: u64,
    pub sample_times: Vec<f64>,
    /// `samples[k][q]`: whether quad `q` is crossed at `sample_times[k]`.
    pub samples: Vec<Vec<bool>>,
    /// Times at which each quad's crossing changed; only in exact mode.
    pub switch_times: Vec<Vec<f64>>,
}

impl Trajectory {
    /// Number of crossing switches of quad `q` inside `[t1, t2]`.
    pub fn switches_in(&self, q: usize, t1: f64, t2: f64) -> usize {
        self.switch_times[q].iter().filter(|&&t| t >= t1 && t <= t2).count()
    }
}

#[derive(Debug, Clone, Default)]
pub struct DpOptions<'a> {
    pub record_events: bool,
    /// Track every change of every quad's crossing, re-evaluating the quads
    /// that contain a site whenever it changes color.
    pub exact_switches: bool,
    /// Common candidate rates for thinning. Two runs sharing a seed and
    /// these rates have nested event sets whenever their rates are ordered.
    pub dominating: Option<&'a [f64]>,
}

/// Per-site clocks. Candidate ring `k` of site `x` uses counters `(x, k)`
/// only, so runs with equal rates or equal dominating rates share rings.
struct Clocks<'a> {
    key: u64,
    rates: &'a [f64],
    cand: &'a [f64],
    next_k: Vec<u64>,
    heap: BinaryHeap<Reverse<(u64, u32)>>,
}

impl<'a> Clocks<'a> {
    fn new(key: u64, rates: &'a [f64], cand: &'a [f64]) -> Self {
        let mut c = Clocks { key, rates, cand, next_k: vec![0; rates.len()], heap: BinaryHeap::new() };
        for s in 0..rates.len() {
            c.push(s as u32, 0.0);
        }
        c
    }

    fn push(&mut self, s: u32, from: f64) {
        let r = self.cand[s as usize];
        if r > 0.0 {
            let k = self.next_k[s as usize];
            let t = from + exp1(hash4(self.key, s as u64, k, 0, 0)) / r;
            self.heap.push(Reverse((t.to_bits(), s)));
        }
    }

    /// Next accepted ring before `horizon`: `(time, site, new color)`.
    fn next(&mut self, horizon: f64) -> Option<(f64, u32, bool)> {
        while let Some(&Reverse((bits, s))) = self.heap.peek() {
            let t = f64::from_bits(bits);
            if t > horizon {
                return None;
            }
            self.heap.pop();
            let k = self.next_k[s as usize];
            self.next_k[s as usize] += 1;
            self.push(s, t);
            let (r, c) = (self.rates[s as usize], self.cand[s as usize]);
            if r >= c || unit_open(hash4(self.key, s as u64, k, 2, 0)) < r / c {
                return Some((t, s, coin(hash4(self.key, s as u64, k, 1, 0))));
            }
        }
        None
    }
}

fn check_budget(cand: &[f64], horizon: f64) -> Result<()> {
    let expected: f64 = cand.iter().sum::<f64>() * horizon;
    if expected > MAX_EVENTS {
        return Err(LdpError::Budget(format!("expected {expected:.3e} clock rings exceed {MAX_EVENTS:e}")));
    }
    Ok(())
}

fn quad_index(lat: &Lattice, quads: &[RectQuad]) -> (Vec<QuadSites>, Vec<Vec<u32>>) {
    let qs: Vec<QuadSites> = quads.iter().map(|q| QuadSites::new(lat, q)).collect();
    let mut by_site = vec![Vec::new(); lat.len()];
    for (k, q) in qs.iter().enumerate() {
        for &s in &q.sites {
            by_site[s as usize].push(k as u32);
        }
    }
    (qs, by_site)
}

/// Dynamical percolation on `[0, horizon]` from `init`.
pub fn run_dp(
    lat: &Lattice,
    init: &Configuration,
    rates: &ClockRates,
    horizon: f64,
    quads: &[RectQuad],
    sample_times: &[f64],
    seed: u64,
) -> Result<Trajectory> {
    run_dp_with(lat, init, rates, horizon, quads, sample_times, seed, &DpOptions { record_events: true, ..Default::default() })
}

#[allow(clippy::too_many_arguments)]
pub fn run_dp_with(
    lat: &Lattice,
    init: &Configuration,
    rates: &ClockRates,
    horizon: f64,
    quads: &[RectQuad],
    sample_times: &[f64],
    seed: u64,
    opts: &DpOptions,
) -> Result<Trajectory> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid(format!("horizon must be positive and finite, got {horizon}")));
    }
    if init.len() != lat.len() || rates.len() != lat.len() {
        return Err(LdpError::Mismatch(format!(
            "lattice has {} sites, configuration {}, rates {}",
            lat.len(),
            init.len(),
            rates.len()
        )));
    }
    if sample_times.windows(2).any(|w| w[1] < w[0]) || sample_times.iter().any(|&t| !(0.0..=horizon).contains(&t)) {
        return Err(invalid("sample times must be sorted and inside [0, horizon]"));
    }
    let cand = match opts.dominating {
        Some(d) => {
            if d.len() != rates.len() || d.iter().zip(&rates.rates).any(|(a, b)| a < b) {
                return Err(invalid("dominating rates must cover and bound the clock rates"));
            }
            d
        }
        None => &rates.rates[..],
    };
    check_budget(cand, horizon)?;

    run_core(lat, init, &rates.rates, cand, horizon, quads, sample_times, derive_seed(seed, TAG_DYN), opts, seed)
}

#[allow(clippy::too_many_arguments)]
fn run_core(
    lat: &Lattice,
    init: &Configuration,
    rates: &[f64],
    cand: &[f64],
    horizon: f64,
    quads: &[RectQuad],
    sample_times: &[f64],
    key: u64,
    opts: &DpOptions,
    seed: u64,
) -> Result<Trajectory> {
    let (qs, by_site) = quad_index(lat, quads);
    let mut cfg = init.clone();
    let mut crossed: Vec<bool> = qs.iter().map(|q| q.crossed(lat, |s| cfg.is_open(s))).collect();
    let mut switch_times = vec![Vec::new(); quads.len()];
    let mut samples = Vec::with_capacity(sample_times.len());
    let mut events = Vec::new();
    let mut next_sample = 0;
    let mut sample_until = |t: f64, cfg: &Configuration, crossed: &[bool], samples: &mut Vec<Vec<bool>>| {
        while next_sample < sample_times.len() && sample_times[next_sample] < t {
            samples.push(if opts.exact_switches {
                crossed.to_vec()
            } else {
                qs.iter().map(|q| q.crossed(lat, |s| cfg.is_open(s))).collect()
            });
            next_sample += 1;
        }
    };

    let mut clocks = Clocks::new(key, rates, cand);
    while let Some((t, s, open)) = clocks.next(horizon) {
        sample_until(t, &cfg, &crossed, &mut samples);
        if opts.record_events {
            events.push(Event { time: t, site: s, open });
        }
        if cfg.is_open(s) == open {
            continue;
        }
        cfg.set(s, open);
        if opts.exact_switches {
            for &k in &by_site[s as usize] {
                let now = qs[k as usize].crossed(lat, |x| cfg.is_open(x));
                if now != crossed[k as usize] {
                    crossed[k as usize] = now;
                    switch_times[k as usize].push(t);
                }
            }
        }
    }
    sample_until(f64::INFINITY, &cfg, &crossed, &mut samples);

    Ok(Trajectory {
        initial: init.clone(),
        final_config: cfg,
        events,
        horizon,
        seed,
        sample_times: sample_times.to_vec(),
        samples,
        switch_times,
    })
}

/// Clock rates of the Liouville dynamics: Wick-normalized GMC over the
/// Lebesgue cell masses, restricted to the moderate set when `cutoff` is
/// finite, divided by `alpha4(eta, 1)`.
pub fn ldp_rates(lat: &Lattice, field: &Field, gamma: f64, cutoff: f64, cal: &Alpha4Calibration) -> Result<ClockRates> {
    let m = gmc_measure(field, gamma, &lebesgue_measure(lat))?;
    let m = if cutoff.is_finite() {
        truncate_measure(&m, &moderate_set(lat, &m, cutoff, default_rho(gamma), cal)?)?
    } else {
        m
    };
    make_rates(&m, cal)
}

/// Initial configuration used by [`run_ldp`] for a given seed.
pub fn ldp_initial(lat: &Lattice, seed: u64) -> Configuration {
    sample_configuration(lat, derive_seed(seed, TAG_INIT))
}

/// Liouville dynamical percolation; `cutoff = f64::INFINITY` disables the
/// moderate-point truncation. The initial configuration and the clocks use
/// seed streams independent of the field.
#[allow(clippy::too_many_arguments)]
pub fn run_ldp(
    lat: &Lattice,
    field: &Field,
    gamma: f64,
    cutoff: f64,
    cal: &Alpha4Calibration,
    horizon: f64,
    quads: &[RectQuad],
    sample_times: &[f64],
    seed: u64,
) -> Result<Trajectory> {
    let rates = ldp_rates(lat, field, gamma, cutoff, cal)?;
    run_dp(lat, &ldp_initial(lat, seed), &rates, horizon, quads, sample_times, seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledOutcome {
    /// Configuration at time `t` under cutoff `C`.
    pub low: Configuration,
    /// Configuration at time `t` under cutoff `C'`.
    pub high: Configuration,
    /// Registered quads crossed in exactly one of the two.
    pub discrepancy: usize,
    /// Per quad: crossing switches of the unrestricted correction process
    /// started from `low`, which bounds the discrepancy in expectation.
    pub unrestricted_switches: Vec<usize>,
}

/// Two-level coupling of the cutoff dynamics at a single time `t`.
///
/// The `C` system is run to time `t`. Its endpoint is then updated along
/// `[0, t]` by clocks driven by the mass in `M_C' \ M_C`; a ring of site `x`
/// at time `s` takes effect only if the `C` system did not update `x` in
/// `[s, t]`. The same correction clocks, applied without that restriction,
/// give the bounding process.
#[allow(clippy::too_many_arguments)]
pub fn coupled_cutoff_run(
    lat: &Lattice,
    field: &Field,
    gamma: f64,
    c: f64,
    c_prime: f64,
    cal: &Alpha4Calibration,
    t: f64,
    quads: &[RectQuad],
    seed: u64,
) -> Result<CoupledOutcome> {
    if !(c < c_prime) {
        return Err(invalid(format!("need C < C', got {c} and {c_prime}")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(format!("time must be finite and nonnegative, got {t}")));
    }
    let low_rates = ldp_rates(lat, field, gamma, c, cal)?;
    let high_rates = ldp_rates(lat, field, gamma, c_prime, cal)?;
    let diff: Vec<f64> = high_rates.rates.iter().zip(&low_rates.rates).map(|(h, l)| (h - l).max(0.0)).collect();
    let diff = ClockRates::from_rates(diff, low_rates.alpha4_ref)?;
    let init = ldp_initial(lat, seed);
    let (qs, _) = quad_index(lat, quads);
    let crossed = |cfg: &Configuration| -> Vec<bool> { qs.iter().map(|q| q.crossed(lat, |s| cfg.is_open(s))).collect() };
    if t == 0.0 {
        return Ok(CoupledOutcome {
            low: init.clone(),
            high: init,
            discrepancy: 0,
            unrestricted_switches: vec![0; quads.len()],
        });
    }

    let low_run = run_dp(lat, &init, &low_rates, t, &[], &[], seed)?;
    let mut last_update = vec![f64::NEG_INFINITY; lat.len()];
    for e in &low_run.events {
        last_update[e.site as usize] = e.time;
    }
    let low = low_run.final_config;

    check_budget(&diff.rates, t)?;
    let mut high = low.clone();
    let mut clocks = Clocks::new(derive_seed(seed, TAG_CORR), &diff.rates, &diff.rates);
    while let Some((s_time, s, open)) = clocks.next(t) {
        if last_update[s as usize] < s_time {
            high.set(s, open);
        }
    }
    let discrepancy = crossed(&low).iter().zip(crossed(&high)).filter(|(a, b)| **a != *b).count();

    // Same correction clocks without the restriction.
    let opts = DpOptions { exact_switches: true, ..Default::default() };
    let bound = run_core(lat, &low, &diff.rates, &diff.rates, t, quads, &[], derive_seed(seed, TAG_CORR), &opts, seed)?;
    let unrestricted_switches = bound.switch_times.iter().map(Vec::len).collect();
    Ok(CoupledOutcome { low, high, discrepancy, unrestricted_switches })
}

/// Monotone near-critical coupling. Each site gets one `Exp(rate)` time
/// `tau`; at `lambda >= 0` closed sites with `tau <= lambda` are set open,
/// at `lambda < 0` open sites with `tau <= -lambda` are set closed.
pub fn near_critical(init: &Configuration, rates: &ClockRates, lambdas: &[f64], seed: u64) -> Result<Vec<Configuration>> {
    if init.len() != rates.len() {
        return Err(LdpError::Mismatch(format!("configuration has {} sites, rates {}", init.len(), rates.len())));
    }
    if lambdas.iter().any(|l| l.is_nan()) {
        return Err(invalid("lambda must not be NaN"));
    }
    let key = derive_seed(seed, TAG_NEAR);
    let tau: Vec<f64> = rates
        .rates
        .iter()
        .enumerate()
        .map(|(s, &r)| if r > 0.0 { exp1(hash4(key, s as u64, 0, 0, 0)) / r } else { f64::INFINITY })
        .collect();
    Ok(lambdas
        .iter()
        .map(|&l| {
            let mut cfg = init.clone();
            for (s, &ts) in tau.iter().enumerate() {
                let open = init.is_open(s as u32);
                if l >= 0.0 && !open && ts <= l {
                    cfg.set(s as u32, true);
                } else if l < 0.0 && open && ts <= -l {
                    cfg.set(s as u32, false);
                }
            }
            cfg
        })
        .collect())
}

/// How pivotal probabilities enter the predicted switch count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PivotalEstimate {
    /// Enumerate all colorings (at most 25 sites).
    Exact,
    /// Independent static Monte Carlo with this many configurations.
    MonteCarlo(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchReport {
    pub observed_mean: f64,
    pub observed_se: f64,
    pub predicted: f64,
    pub predicted_se: f64,
    pub z_score: f64,
}

/// Mean number of crossing switches of `q` in `[t1, t2]` against
/// `(t2 - t1) * sum_x rate(x) * P(x pivotal) / 2`. A ring changes the
/// color with probability 1/2, and the crossing switches exactly when the
/// color changes at a pivotal site.
#[allow(clippy::too_many_arguments)]
pub fn switch_count_check(
    lat: &Lattice,
    rates: &ClockRates,
    q: &RectQuad,
    t1: f64,
    t2: f64,
    n_replicas: usize,
    pivotal: PivotalEstimate,
    seed: u64,
) -> Result<SwitchReport> {
    if !(t2 > t1 && t1 >= 0.0) {
        return Err(invalid(format!("need 0 <= T1 < T2, got {t1}, {t2}")));
    }
    if n_replicas < 2 {
        return Err(invalid("need at least 2 replicas"));
    }
    let quads = [*q];
    let opts = DpOptions { exact_switches: true, ..Default::default() };
    let counts = par::map_indexed(n_replicas, |k| -> Result<f64> {
        let s = derive_seed(seed, k as u64);
        let init = sample_configuration(lat, derive_seed(s, TAG_INIT));
        let traj = run_dp_with(lat, &init, rates, t2, &quads, &[], s, &opts)?;
        Ok(traj.switches_in(0, t1, t2) as f64)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let (observed_mean, observed_se) = mean_se(&counts);

    let scale = (t2 - t1) / 2.0;
    let (predicted, predicted_se) = match pivotal {
        PivotalEstimate::Exact => {
            let probs = pivotal_probabilities(&crossing_table(lat, &quads)?);
            (scale * probs.iter().zip(&rates.rates).map(|(p, r)| p * r).sum::<f64>(), 0.0)
        }
        PivotalEstimate::MonteCarlo(n) => {
            if n < 2 {
                return Err(invalid("need at least 2 static samples"));
            }
            let qs = QuadSites::new(lat, q);
            let static_seed = derive_seed(seed, 0x57A7);
            let xs = par::map_indexed(n, |k| {
                let mut cfg = sample_configuration(lat, derive_seed(static_seed, k as u64));
                let base = qs.crossed(lat, |s| cfg.is_open(s));
                let mut sum = 0.0;
                for &s in &qs.sites {
                    let r = rates.rates[s as usize];
                    if r == 0.0 {
                        continue;
                    }
                    cfg.flip(s);
                    if qs.crossed(lat, |x| cfg.is_open(x)) != base {
                        sum += r;
                    }
                    cfg.flip(s);
                }
                sum
            });
            let (m, se) = mean_se(&xs);
            (scale * m, scale * se)
        }
    };
    let se = observed_se.hypot(predicted_se);
    let z_score = if se > 0.0 {
        (observed_mean - predicted) / se
    } else if observed_mean == predicted {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(SwitchReport { observed_mean, observed_se, predicted, predicted_se, z_score })
}

/// CSV `sample_time,quad_id,crossed`.
pub fn write_samples_csv<W: Write>(traj: &Trajectory, mut w: W) -> Result<()> {
    writeln!(w, "sample_time,quad_id,crossed")?;
    for (t, row) in traj.sample_times.iter().zip(&traj.samples) {
        for (q, &c) in row.iter().enumerate() {
            writeln!(w, "{t},{q},{}", c as u8)?;
        }
    }
    Ok(())
}

/// CSV `time,site,new_color` with colors as +1 (open) / -1 (closed).
pub fn write_events_csv<W: Write>(traj: &Trajectory, mut w: W) -> Result<()> {
    writeln!(w, "time,site,new_color")?;
    for e in &traj.events {
        writeln!(w, "{},{},{}", e.time, e.site, if e.open { 1 } else { -1 })?;
    }
    Ok(())
}
