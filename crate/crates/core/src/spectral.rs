//! Fourier-Walsh analysis of Boolean functions on a few sites, the
//! spectral sample, and two independent oracles for the covariance of a
//! function under dynamical percolation.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dynamics::ClockRates;
use crate::error::{invalid, LdpError, Result};
use crate::gmc::SiteMeasure;
use crate::lattice::{Lattice, RectQuad};
use crate::perc::{crossing_table, Alpha4Calibration};
use crate::rng::{coin, hash4};

/// Largest number of bits for the transform.
pub const MAX_TRANSFORM_BITS: usize = 25;
/// Largest number of bits for the `4^n` brute-force oracles.
pub const MAX_BRUTE_BITS: usize = 14;
/// Weights at or below this are dropped from a distribution.
const WEIGHT_FLOOR: f64 = 1e-18;
const PARSEVAL_TOL: f64 = 1e-10;

/// A function `{-1, 1}^n -> {-1, 1}`. Bit `k` of an index is the color of
/// `site_ids[k]`, set for open (+1).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthTable {
    pub n: usize,
    pub site_ids: Vec<u32>,
    pub values: Vec<i8>,
}

impl TruthTable {
    pub fn new(site_ids: Vec<u32>, values: Vec<i8>) -> Result<Self> {
        let n = site_ids.len();
        if n > MAX_TRANSFORM_BITS {
            return Err(LdpError::Budget(format!("{n} bits exceed the limit of {MAX_TRANSFORM_BITS}")));
        }
        if values.len() != 1 << n {
            return Err(LdpError::Mismatch(format!("{} values for {n} bits", values.len())));
        }
        if values.iter().any(|&v| v != 1 && v != -1) {
            return Err(invalid("truth table values must be -1 or +1"));
        }
        Ok(TruthTable { n, site_ids, values })
    }

    /// Tabulates `f` on bits `0..n`, with sites numbered `0..n`.
    pub fn from_fn(n: usize, f: impl Fn(u32) -> bool) -> Result<Self> {
        if n > MAX_TRANSFORM_BITS {
            return Err(LdpError::Budget(format!("{n} bits exceed the limit of {MAX_TRANSFORM_BITS}")));
        }
        let values = (0..1u32 << n).map(|m| if f(m) { 1 } else { -1 }).collect();
        TruthTable::new((0..n as u32).collect(), values)
    }

    pub fn dictator(n: usize, k: usize) -> Result<Self> {
        TruthTable::from_fn(n, |m| m >> k & 1 == 1)
    }

    pub fn constant(n: usize, value: bool) -> Result<Self> {
        TruthTable::from_fn(n, |_| value)
    }

    pub fn majority3() -> Self {
        TruthTable::from_fn(3, |m| m.count_ones() >= 2).expect("3 bits")
    }

    /// Uniformly random function.
    pub fn random(n: usize, seed: u64) -> Result<Self> {
        TruthTable::from_fn(n, |m| coin(hash4(seed, 0x7AB, m as u64, 0, 0)))
    }

    pub fn eval(&self, mask: u32) -> f64 {
        self.values[mask as usize] as f64
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().map(|&v| v as f64).sum::<f64>() / self.values.len() as f64
    }

    /// Clock rate of each bit, read from per-site rates.
    pub fn bit_rates(&self, rates: &ClockRates) -> Result<Vec<f64>> {
        self.site_ids
            .iter()
            .map(|&s| {
                rates
                    .rates
                    .get(s as usize)
                    .copied()
                    .ok_or_else(|| LdpError::Mismatch(format!("no rate for site {s}")))
            })
            .collect()
    }
}

/// The function "every quad is crossed" over all sites of `lat`.
pub fn crossing_truth_table(lat: &Lattice, quads: &[RectQuad]) -> Result<TruthTable> {
    let table = crossing_table(lat, quads)?;
    TruthTable::new((0..lat.len() as u32).collect(), table.iter().map(|&c| if c { 1 } else { -1 }).collect())
}

/// Coefficients `f_hat(S) = E[f chi_S]`, indexed by subset mask, via the
/// fast Walsh-Hadamard transform.
pub fn walsh_transform(tt: &TruthTable) -> Result<Vec<f64>> {
    if tt.n > MAX_TRANSFORM_BITS {
        return Err(LdpError::Budget(format!("{} bits exceed the limit of {MAX_TRANSFORM_BITS}", tt.n)));
    }
    let mut a: Vec<f64> = tt.values.iter().map(|&v| v as f64).collect();
    let mut h = 1;
    while h < a.len() {
        for block in a.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (x, y) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*x, *y);
                *x = u + v;
                *y = u - v;
            }
        }
        h *= 2;
    }
    // The transform weights a set bit by -1; chi_S weights it by +1.
    let scale = 1.0 / a.len() as f64;
    for (s, c) in a.iter_mut().enumerate() {
        *c *= if s.count_ones() % 2 == 1 { -scale } else { scale };
    }
    Ok(a)
}

/// Law of the spectral sample: `P(S) = f_hat(S)^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDistribution {
    pub n: usize,
    /// `(mask, weight)` in increasing mask order, the empty set included.
    pub weights: Vec<(u32, f64)>,
    pub f_hat_empty: f64,
}

impl SpectralDistribution {
    pub fn weight(&self, mask: u32) -> f64 {
        self.weights
            .binary_search_by_key(&mask, |w| w.0)
            .map(|k| self.weights[k].1)
            .unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().map(|w| w.1).sum()
    }

    /// `E|S|`.
    pub fn expected_size(&self) -> f64 {
        self.weights.iter().map(|&(m, w)| m.count_ones() as f64 * w).sum()
    }

    /// `P(x in S)` for every bit.
    pub fn one_point(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.n];
        for &(m, w) in &self.weights {
            for (x, px) in p.iter_mut().enumerate() {
                if m >> x & 1 == 1 {
                    *px += w;
                }
            }
        }
        p
    }

    /// `P(x, y in S)` as a row-major `n x n` matrix.
    pub fn two_point(&self) -> Vec<f64> {
        let n = self.n;
        let mut p = vec![0.0; n * n];
        for &(m, w) in &self.weights {
            for x in 0..n {
                if m >> x & 1 == 0 {
                    continue;
                }
                for y in 0..n {
                    if m >> y & 1 == 1 {
                        p[x * n + y] += w;
                    }
                }
            }
        }
        p
    }
}

pub fn spectral_distribution(coeffs: &[f64]) -> Result<SpectralDistribution> {
    if !coeffs.len().is_power_of_two() {
        return Err(LdpError::Mismatch(format!("{} coefficients is not a power of two", coeffs.len())));
    }
    let total: f64 = coeffs.iter().map(|c| c * c).sum();
    if (total - 1.0).abs() > PARSEVAL_TOL {
        return Err(LdpError::Parseval(total));
    }
    let weights = coeffs
        .iter()
        .enumerate()
        .map(|(m, c)| (m as u32, c * c))
        .filter(|w| w.1 > WEIGHT_FLOOR)
        .collect();
    Ok(SpectralDistribution { n: coeffs.len().trailing_zeros() as usize, weights, f_hat_empty: coeffs[0] })
}

/// Counting measure of a sampled set, rescaled by `cell_area / alpha4(eta, 1)`.
pub fn spectral_measure(sample: u32, site_ids: &[u32], lat: &Lattice, cal: &Alpha4Calibration) -> Result<SiteMeasure> {
    let a = cal.alpha4_eta()?;
    let mut m = SiteMeasure::zero(lat.len(), "spectral");
    for (k, &s) in site_ids.iter().enumerate() {
        if sample >> k & 1 == 1 {
            let slot = m
                .masses
                .get_mut(s as usize)
                .ok_or_else(|| LdpError::Mismatch(format!("site {s} is not on the lattice")))?;
            *slot = lat.cell_area() / a;
        }
    }
    Ok(m)
}

fn check_rates(n: usize, bit_rates: &[f64], t: f64) -> Result<()> {
    if bit_rates.len() != n {
        return Err(LdpError::Mismatch(format!("{} rates for {n} bits", bit_rates.len())));
    }
    if bit_rates.iter().any(|r| !(*r >= 0.0)) || !(t >= 0.0) {
        return Err(invalid("rates and time must be nonnegative"));
    }
    Ok(())
}

/// `sum_{S nonempty} f_hat(S)^2 exp(-t sum_{x in S} rate(x))`.
pub fn covariance_spectral(dist: &SpectralDistribution, bit_rates: &[f64], t: f64) -> Result<f64> {
    check_rates(dist.n, bit_rates, t)?;
    Ok(dist
        .weights
        .iter()
        .filter(|w| w.0 != 0)
        .map(|&(m, w)| {
            let mass: f64 = (0..dist.n).filter(|x| m >> x & 1 == 1).map(|x| bit_rates[x]).sum();
            w * (-t * mass).exp()
        })
        .sum())
}

/// `P[d]`: probability that the two-time pair differs exactly on the bits
/// of `d`, each bit differing with probability `(1 - exp(-t r)) / 2`.
fn flip_law(bit_rates: &[f64], t: f64) -> Vec<f64> {
    let mut p = vec![1.0];
    for &r in bit_rates {
        let q = (1.0 - (-t * r).exp()) / 2.0;
        let mut next = vec![0.0; 2 * p.len()];
        let h = p.len();
        for (d, &v) in p.iter().enumerate() {
            next[d] = v * (1.0 - q);
            next[d + h] = v * q;
        }
        p = next;
    }
    p
}

/// `E[f(w_0) g(w_t)] - E f E g` by summing over all pairs of configurations.
pub fn cross_covariance_bruteforce(f: &TruthTable, g: &TruthTable, bit_rates: &[f64], t: f64) -> Result<f64> {
    if f.n > MAX_BRUTE_BITS {
        return Err(LdpError::Budget(format!("{} bits exceed the brute-force limit of {MAX_BRUTE_BITS}", f.n)));
    }
    if f.n != g.n {
        return Err(LdpError::Mismatch(format!("functions on {} and {} bits", f.n, g.n)));
    }
    check_rates(f.n, bit_rates, t)?;
    let law = flip_law(bit_rates, t);
    let size = 1usize << f.n;
    let mut joint = 0.0;
    for w0 in 0..size {
        let inner: f64 = law.iter().enumerate().map(|(d, p)| p * g.values[w0 ^ d] as f64).sum();
        joint += f.values[w0] as f64 * inner;
    }
    Ok(joint / size as f64 - f.mean() * g.mean())
}

pub fn covariance_bruteforce(tt: &TruthTable, bit_rates: &[f64], t: f64) -> Result<f64> {
    cross_covariance_bruteforce(tt, tt, bit_rates, t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityReport {
    pub spectral_one: Vec<f64>,
    pub pivotal_one: Vec<f64>,
    /// Row-major `n x n`.
    pub spectral_two: Vec<f64>,
    pub pivotal_two: Vec<f64>,
    pub max_one_point: f64,
    pub max_two_point: f64,
}

impl IntensityReport {
    pub fn max_discrepancy(&self) -> f64 {
        self.max_one_point.max(self.max_two_point)
    }
}

/// One- and two-point intensities of the spectral sample against those of
/// the pivotal set, both computed exactly.
pub fn intensity_check(tt: &TruthTable) -> Result<IntensityReport> {
    if tt.n > MAX_BRUTE_BITS {
        return Err(LdpError::Budget(format!("{} bits exceed the limit of {MAX_BRUTE_BITS}", tt.n)));
    }
    let n = tt.n;
    let dist = spectral_distribution(&walsh_transform(tt)?)?;
    let spectral_one = dist.one_point();
    let spectral_two = dist.two_point();
    let size = 1usize << n;
    let mut pivotal_one = vec![0.0; n];
    let mut pivotal_two = vec![0.0; n * n];
    let mut piv = vec![false; n];
    for w in 0..size {
        for (x, p) in piv.iter_mut().enumerate() {
            *p = tt.values[w] != tt.values[w ^ (1 << x)];
        }
        for x in (0..n).filter(|&x| piv[x]) {
            pivotal_one[x] += 1.0;
            for y in (0..n).filter(|&y| piv[y]) {
                pivotal_two[x * n + y] += 1.0;
            }
        }
    }
    for v in pivotal_one.iter_mut().chain(pivotal_two.iter_mut()) {
        *v /= size as f64;
    }
    let max_diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    Ok(IntensityReport {
        max_one_point: max_diff(&spectral_one, &pivotal_one),
        max_two_point: max_diff(&spectral_two, &pivotal_two),
        spectral_one,
        pivotal_one,
        spectral_two,
        pivotal_two,
    })
}

/// CSV `mask,weight`.
pub fn write_spectrum_csv<W: Write>(dist: &SpectralDistribution, mut w: W) -> Result<()> {
    writeln!(w, "mask,weight")?;
    for &(m, x) in &dist.weights {
        writeln!(w, "{m},{x}")?;
    }
    Ok(())
}
