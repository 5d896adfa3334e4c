//! Centered log-correlated Gaussian fields sampled at lattice sites.
//!
//! Two backends: an exact dense Cholesky factorization of the kernel
//! `log(L / max(|x - y|, eta/2))` for small lattices, and a dyadic
//! branching random walk whose covariance is `log 2` times the number of
//! shared dyadic ancestors, which scales to millions of sites.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, LdpError, Result};
use crate::lattice::{Lattice, Rect};
use crate::rng;

pub const MAX_CHOLESKY_SITES: usize = 8192;
const RIDGE_DOUBLINGS: u32 = 8;
const TAG_CHOLESKY: u64 = 0xC401;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    ExactLog,
    DyadicBrw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub kind: KernelKind,
    /// `L` in `log(L / |x - y|)`; ignored by the BRW backend.
    pub length_scale: f64,
    /// Finest dyadic level; ignored by the Cholesky backend.
    pub brw_depth: u32,
    /// Added to the diagonal before factorization.
    pub ridge: f64,
}

impl Kernel {
    pub fn exact_log(length_scale: f64) -> Self {
        Kernel { kind: KernelKind::ExactLog, length_scale, brw_depth: 0, ridge: 0.0 }
    }

    pub fn brw(depth: u32) -> Self {
        Kernel { kind: KernelKind::DyadicBrw, length_scale: 1.0, brw_depth: depth, ridge: 0.0 }
    }

    /// Smallest admissible BRW depth for mesh `eta`.
    pub fn min_brw_depth(eta: f64) -> u32 {
        (1.0 / eta).log2().ceil().max(1.0) as u32
    }

    /// Exact log kernel with `L` = domain diameter when the lattice fits the
    /// dense factorization budget, otherwise the BRW at the minimal depth.
    pub fn for_lattice(lat: &Lattice) -> Self {
        if lat.len() <= MAX_CHOLESKY_SITES {
            Kernel::exact_log(lat.domain().diameter())
        } else {
            Kernel::brw(Kernel::min_brw_depth(lat.eta()))
        }
    }

    pub fn with_ridge(mut self, ridge: f64) -> Self {
        self.ridge = ridge;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub values: Vec<f64>,
    pub variance: Vec<f64>,
    pub kernel: Kernel,
    pub seed: u64,
}

impl Field {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The zero field with unit variance records; useful as a `gamma = 0` stand-in.
    pub fn zero(n: usize) -> Self {
        Field { values: vec![0.0; n], variance: vec![1.0; n], kernel: Kernel::brw(1), seed: 0 }
    }
}

/// Samples with whichever backend `kernel.kind` names.
pub fn sample_field(lat: &Lattice, kernel: &Kernel, seed: u64) -> Result<Field> {
    match kernel.kind {
        KernelKind::ExactLog => sample_field_cholesky(lat, kernel, seed),
        KernelKind::DyadicBrw => sample_field_brw(lat, kernel, seed),
    }
}

/// Exact covariance entry of the log kernel (without ridge).
pub fn log_kernel(kernel: &Kernel, eta: f64, p: [f64; 2], q: [f64; 2]) -> f64 {
    let d = (p[0] - q[0]).hypot(p[1] - q[1]).max(eta / 2.0);
    (kernel.length_scale / d).ln()
}

fn log_kernel_matrix(lat: &Lattice, kernel: &Kernel, ridge: f64) -> DMatrix<f64> {
    let pos = lat.positions();
    let eta = lat.eta();
    DMatrix::from_fn(pos.len(), pos.len(), |a, b| {
        let k = log_kernel(kernel, eta, pos[a], pos[b]);
        if a == b {
            k + ridge
        } else {
            k
        }
    })
}

/// Dense Cholesky factor of the log kernel, reusable across replicas.
#[derive(Debug, Clone)]
pub struct CholeskySampler {
    factor: DMatrix<f64>,
    variance: Vec<f64>,
    kernel: Kernel,
}

impl CholeskySampler {
    pub fn new(lat: &Lattice, kernel: &Kernel) -> Result<Self> {
        if kernel.kind != KernelKind::ExactLog {
            return Err(invalid("cholesky sampler needs an EXACT_LOG kernel"));
        }
        let n = lat.len();
        if n > MAX_CHOLESKY_SITES {
            return Err(LdpError::Budget(format!(
                "{n} sites exceed the dense factorization budget of {MAX_CHOLESKY_SITES}"
            )));
        }
        if n == 0 {
            return Err(invalid("lattice has no sites"));
        }
        if !(kernel.ridge >= 0.0) {
            return Err(invalid("ridge must be nonnegative"));
        }
        let diam = lat.domain().diameter();
        if kernel.length_scale < diam * (1.0 - 1e-12) {
            return Err(invalid(format!(
                "length scale {} is below the domain diameter {diam}",
                kernel.length_scale
            )));
        }

        let mut ridge = kernel.ridge;
        for attempt in 0..=RIDGE_DOUBLINGS {
            let k = log_kernel_matrix(lat, kernel, ridge);
            if let Some(c) = k.clone().cholesky() {
                let eta = lat.eta();
                let variance = lat
                    .positions()
                    .iter()
                    .map(|&p| log_kernel(kernel, eta, p, p) + ridge)
                    .collect();
                if ridge != kernel.ridge {
                    log::warn!("kernel factorized after raising the ridge to {ridge:e}");
                }
                return Ok(CholeskySampler {
                    factor: c.unpack_dirty(),
                    variance,
                    kernel: Kernel { ridge, ..*kernel },
                });
            }
            if attempt == RIDGE_DOUBLINGS {
                return Err(LdpError::Factorization { ridge, smallest_eigenvalue: smallest_eigenvalue(&k) });
            }
            ridge = if ridge > 0.0 { 2.0 * ridge } else { 1e-10 * k[(0, 0)].abs().max(1.0) };
        }
        unreachable!("loop either factors or returns")
    }

    pub fn len(&self) -> usize {
        self.variance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variance.is_empty()
    }

    /// Kernel actually factorized (ridge possibly raised).
    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn sample(&self, seed: u64) -> Field {
        let n = self.len();
        let z: Vec<f64> = (0..n)
            .map(|a| rng::std_normal(rng::hash4(seed, TAG_CHOLESKY, a as u64, 0, 0)))
            .collect();
        // the strict upper triangle of `factor` is garbage
        let values = (0..n)
            .map(|a| (0..=a).map(|b| self.factor[(a, b)] * z[b]).sum())
            .collect();
        Field { values, variance: self.variance.clone(), kernel: self.kernel, seed }
    }
}

/// Exact multivariate Gaussian sample via dense Cholesky.
pub fn sample_field_cholesky(lat: &Lattice, kernel: &Kernel, seed: u64) -> Result<Field> {
    Ok(CholeskySampler::new(lat, kernel)?.sample(seed))
}

// Only runs on the error path. Dense eigenvalues for moderate sizes,
// shifted power iteration beyond.
fn smallest_eigenvalue(k: &DMatrix<f64>) -> f64 {
    let n = k.nrows();
    if n <= 2048 {
        return k.clone().symmetric_eigenvalues().min();
    }
    let power = |m: &dyn Fn(&DVector<f64>) -> DVector<f64>| {
        let mut v = DVector::from_fn(n, |a, _| 1.0 + (a % 7) as f64 * 0.1);
        let mut lambda = 0.0;
        for _ in 0..500 {
            let w = m(&v);
            let norm = w.norm();
            if norm == 0.0 {
                return 0.0;
            }
            lambda = v.dot(&w) / v.dot(&v);
            v = w / norm;
        }
        lambda
    };
    let top = power(&|v| k * v).abs();
    let shifted = power(&|v| v * top - k * v);
    top - shifted
}

/// Root square of the dyadic decomposition: lower-left corner of the
/// domain, side equal to the larger domain dimension.
pub fn brw_root(domain: &Rect) -> (f64, f64, f64) {
    (domain.x0, domain.y0, domain.width().max(domain.height()))
}

#[inline]
fn dyadic_cell(root: (f64, f64, f64), level: u32, p: [f64; 2]) -> (u64, u64) {
    let cells = (1u64 << level) as f64;
    let fx = ((p[0] - root.0) / root.2 * cells).floor().clamp(0.0, cells - 1.0);
    let fy = ((p[1] - root.1) / root.2 * cells).floor().clamp(0.0, cells - 1.0);
    (fx as u64, fy as u64)
}

/// Number of dyadic squares at levels `0..=depth` containing both points.
pub fn brw_common_ancestors(domain: &Rect, depth: u32, p: [f64; 2], q: [f64; 2]) -> u32 {
    let root = brw_root(domain);
    (0..=depth)
        .take_while(|&k| dyadic_cell(root, k, p) == dyadic_cell(root, k, q))
        .count() as u32
}

/// Sampler for repeated draws on one lattice; the Cholesky factor is
/// computed once.
#[derive(Debug, Clone)]
pub enum FieldSampler {
    Cholesky(CholeskySampler),
    Brw(Kernel),
}

impl FieldSampler {
    pub fn new(lat: &Lattice, kernel: &Kernel) -> Result<Self> {
        match kernel.kind {
            KernelKind::ExactLog => Ok(FieldSampler::Cholesky(CholeskySampler::new(lat, kernel)?)),
            KernelKind::DyadicBrw => {
                check_brw(lat, kernel)?;
                Ok(FieldSampler::Brw(*kernel))
            }
        }
    }

    pub fn sample(&self, lat: &Lattice, seed: u64) -> Result<Field> {
        match self {
            FieldSampler::Cholesky(c) => Ok(c.sample(seed)),
            FieldSampler::Brw(k) => sample_field_brw(lat, k, seed),
        }
    }
}

/// Exact BRW covariance between two points.
pub fn brw_covariance(domain: &Rect, depth: u32, p: [f64; 2], q: [f64; 2]) -> f64 {
    std::f64::consts::LN_2 * brw_common_ancestors(domain, depth, p, q) as f64
}

fn check_brw(lat: &Lattice, kernel: &Kernel) -> Result<()> {
    if kernel.kind != KernelKind::DyadicBrw {
        return Err(invalid("BRW sampler needs a DYADIC_BRW kernel"));
    }
    let depth = kernel.brw_depth;
    if depth == 0 {
        return Err(invalid("BRW depth must be positive"));
    }
    if depth > 60 {
        return Err(invalid("BRW depth above 60 is not supported"));
    }
    let need = Kernel::min_brw_depth(lat.eta());
    if depth < need {
        return Err(invalid(format!("BRW depth {depth} is below ceil(log2(1/eta)) = {need}")));
    }
    Ok(())
}

/// Dyadic branching random walk: `h(x) = sum_k N_k(square_k(x))` with
/// independent `N(0, log 2)` weights per dyadic square.
pub fn sample_field_brw(lat: &Lattice, kernel: &Kernel, seed: u64) -> Result<Field> {
    check_brw(lat, kernel)?;
    let depth = kernel.brw_depth;
    let root = brw_root(lat.domain());
    let sd = std::f64::consts::LN_2.sqrt();
    let values = lat
        .positions()
        .iter()
        .map(|&p| {
            (0..=depth)
                .map(|k| {
                    let (cx, cy) = dyadic_cell(root, k, p);
                    sd * rng::std_normal(rng::hash4(seed, k as u64, cx, cy, 0))
                })
                .sum()
        })
        .collect();
    let var = (depth + 1) as f64 * std::f64::consts::LN_2;
    Ok(Field { values, variance: vec![var; lat.len()], kernel: *kernel, seed })
}

const SNAPSHOT_MAGIC: &[u8; 4] = b"LDPF";
const SNAPSHOT_VERSION: u32 = 1;

/// Little-endian replay snapshot: magic, version, site count, seed, kernel
/// parameters, then values and variances as `f64`.
pub fn encode_snapshot(field: &Field) -> Vec<u8> {
    let n = field.values.len();
    let mut out = Vec::with_capacity(41 + 16 * n);
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&field.seed.to_le_bytes());
    out.push(match field.kernel.kind {
        KernelKind::ExactLog => 0,
        KernelKind::DyadicBrw => 1,
    });
    out.extend_from_slice(&field.kernel.length_scale.to_le_bytes());
    out.extend_from_slice(&field.kernel.brw_depth.to_le_bytes());
    out.extend_from_slice(&field.kernel.ridge.to_le_bytes());
    for v in field.values.iter().chain(&field.variance) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<Field> {
    let bad = |m: &str| LdpError::Snapshot(m.to_string());
    let mut cur = bytes;
    let mut take = |k: usize| -> Result<&[u8]> {
        if cur.len() < k {
            return Err(bad("truncated"));
        }
        let (a, b) = cur.split_at(k);
        cur = b;
        Ok(a)
    };
    if take(4)? != SNAPSHOT_MAGIC {
        return Err(bad("bad magic"));
    }
    let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
    if version != SNAPSHOT_VERSION {
        return Err(bad("unsupported version"));
    }
    let n = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    let seed = u64::from_le_bytes(take(8)?.try_into().unwrap());
    let kind = match take(1)?[0] {
        0 => KernelKind::ExactLog,
        1 => KernelKind::DyadicBrw,
        _ => return Err(bad("unknown kernel kind")),
    };
    let length_scale = f64::from_le_bytes(take(8)?.try_into().unwrap());
    let brw_depth = u32::from_le_bytes(take(4)?.try_into().unwrap());
    let ridge = f64::from_le_bytes(take(8)?.try_into().unwrap());
    let mut floats = |k: usize| -> Result<Vec<f64>> {
        (0..k).map(|_| Ok(f64::from_le_bytes(take(8)?.try_into().unwrap()))).collect()
    };
    let values = floats(n)?;
    let variance = floats(n)?;
    if !cur.is_empty() {
        return Err(bad("trailing bytes"));
    }
    Ok(Field { values, variance, kernel: Kernel { kind, length_scale, brw_depth, ridge }, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    #[test]
    fn single_site_variance() {
        let lat = Lattice::new(0.1, Rect::new(0.0, 0.05, 0.0, 0.05).unwrap()).unwrap();
        assert_eq!(lat.len(), 1);
        let k = Kernel::exact_log(1.0).with_ridge(0.01);
        let f = sample_field_cholesky(&lat, &k, 3).unwrap();
        assert!((f.variance[0] - ((1.0f64 / 0.05).ln() + 0.01)).abs() < 1e-12);
        // empirical variance over seeds
        let xs: Vec<f64> = (0..20_000).map(|s| sample_field_cholesky(&lat, &k, s).unwrap().values[0]).collect();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
        let se = f.variance[0] * (2.0 / xs.len() as f64).sqrt();
        assert!((var - f.variance[0]).abs() < 4.0 * se);
    }

    #[test]
    fn two_sites_at_one_mesh_apart() {
        let eta = 0.25;
        let lat = Lattice::new(eta, Rect::new(0.0, 0.3, 0.0, 0.1).unwrap()).unwrap();
        assert_eq!(lat.len(), 2);
        let k = Kernel::exact_log(1.0);
        let n = 1_000_000u64;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        let mut prods = Vec::with_capacity(n as usize);
        for s in 0..n {
            let f = sample_field_cholesky(&lat, &k, s).unwrap();
            let (x, y) = (f.values[0], f.values[1]);
            sxy += x * y;
            sxx += x * x;
            syy += y * y;
            prods.push(x * y);
        }
        let cov = sxy / n as f64;
        let (_, se) = crate::stats::mean_se(&prods);
        let target = (1.0 / eta).ln();
        assert!((cov - target).abs() < 3.0 * se, "cov {cov} target {target} se {se}");
        assert!(sxx > 0.0 && syy > 0.0);
    }

    #[test]
    fn empirical_covariance_matches_kernel() {
        let lat = Lattice::new(0.1, Rect::new(0.0, 0.9, 0.0, 0.85).unwrap()).unwrap();
        let n = lat.len();
        assert!((90..=110).contains(&n), "{n}");
        let k = Kernel::exact_log(2.0);
        let sampler = CholeskySampler::new(&lat, &k).unwrap();
        let reps = 10_000;
        let mut s1 = vec![0.0; n];
        let mut s2 = vec![0.0; n];
        let mut p1 = vec![0.0; n * n];
        let mut p2 = vec![0.0; n * n];
        for r in 0..reps {
            let h = sampler.sample(rng::derive_seed(9, r)).values;
            for a in 0..n {
                s1[a] += h[a];
                s2[a] += h[a] * h[a];
                for b in a..n {
                    let x = h[a] * h[b];
                    p1[a * n + b] += x;
                    p2[a * n + b] += x * x;
                }
            }
        }
        let rf = reps as f64;
        let pos = lat.positions();
        let (mut ok, mut total) = (0, 0);
        for a in 0..n {
            let mean = s1[a] / rf;
            let se = ((s2[a] / rf - mean * mean) / rf).sqrt();
            assert!(mean.abs() < 4.0 * se, "site {a} mean {mean} se {se}");
            for b in a..n {
                let m = p1[a * n + b] / rf;
                let se = ((p2[a * n + b] / rf - m * m) / rf).sqrt();
                let target = log_kernel(&k, lat.eta(), pos[a], pos[b]);
                total += 1;
                if (m - target).abs() < 4.0 * se {
                    ok += 1;
                }
            }
        }
        assert!(ok as f64 >= 0.99 * total as f64, "{ok}/{total}");
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let lat = Lattice::new(0.2, Rect::unit()).unwrap();
        let k = Kernel::exact_log(2.0);
        let a = sample_field_cholesky(&lat, &k, 11).unwrap();
        let b = sample_field_cholesky(&lat, &k, 11).unwrap();
        assert_eq!(encode_snapshot(&a), encode_snapshot(&b));
        let c = sample_field_brw(&lat, &Kernel::brw(4), 11).unwrap();
        let d = sample_field_brw(&lat, &Kernel::brw(4), 11).unwrap();
        assert_eq!(c, d);
    }

    #[test]
    fn cholesky_preconditions() {
        let lat = Lattice::new(0.2, Rect::unit()).unwrap();
        assert!(sample_field_cholesky(&lat, &Kernel::exact_log(0.5), 0).is_err());
        assert!(sample_field_cholesky(&lat, &Kernel::brw(3), 0).is_err());
        let big = Lattice::new(0.01, Rect::unit()).unwrap();
        assert!(matches!(sample_field_cholesky(&big, &Kernel::exact_log(2.0), 0), Err(LdpError::Budget(_))));
    }

    #[test]
    fn indefinite_kernel_reports_eigenvalue() {
        // L far below the pair distances makes the kernel strongly indefinite
        let lat = Lattice::new(0.2, Rect::unit()).unwrap();
        let k = Kernel { kind: KernelKind::ExactLog, length_scale: 1.5, brw_depth: 0, ridge: 0.0 };
        let m = log_kernel_matrix(&lat, &Kernel { length_scale: 0.05, ..k }, 0.0);
        assert!(m.clone().cholesky().is_none());
        let ev = smallest_eigenvalue(&m);
        let exact = m.symmetric_eigenvalues().min();
        assert!(ev < 0.0);
        assert_eq!(ev, exact);
    }

    #[test]
    fn brw_same_point_and_root_split() {
        let d = Rect::unit();
        let depth = 8;
        let p = [0.3, 0.3];
        assert_eq!(brw_covariance(&d, depth, p, p), (depth + 1) as f64 * LN_2);
        assert_eq!(brw_covariance(&d, depth, [0.2, 0.2], [0.8, 0.3]), LN_2);
    }

    #[test]
    fn brw_ancestors_at_distance_two_to_minus_five() {
        let d = Rect::unit();
        // both points inside the level-4 square [0.5, 0.5625]^2
        let p = [0.5 + 0.004, 0.5 + 0.01];
        for (dx, dy) in [(1.0 / 32.0, 0.0), (0.0, 1.0 / 32.0), (0.02, 0.024)] {
            let q = [p[0] + dx, p[1] + dy];
            let direct = (0..=10u32)
                .filter(|&k| {
                    let c = (1u64 << k) as f64;
                    (p[0] * c).floor() == (q[0] * c).floor() && (p[1] * c).floor() == (q[1] * c).floor()
                })
                .count() as u32;
            let a = brw_common_ancestors(&d, 10, p, q);
            assert_eq!(a, direct);
            assert!(a == 5 || a == 6, "{a}");
        }
    }

    #[test]
    fn brw_variance_record() {
        let lat = Lattice::new(1.0 / 16.0, Rect::unit()).unwrap();
        let f = sample_field_brw(&lat, &Kernel::brw(5), 1).unwrap();
        assert!(f.variance.iter().all(|&v| (v - 6.0 * LN_2).abs() < 1e-12));
        assert!(sample_field_brw(&lat, &Kernel::brw(0), 1).is_err());
        assert!(sample_field_brw(&lat, &Kernel::brw(3), 1).is_err());
    }

    #[test]
    fn brw_empirical_covariance_matches_ancestor_count() {
        let lat = Lattice::new(1.0 / 8.0, Rect::unit()).unwrap();
        let depth = 3;
        let n = 40_000;
        let (a, b) = (0u32, 1u32);
        let mut prods = Vec::new();
        for s in 0..n {
            let f = sample_field_brw(&lat, &Kernel::brw(depth), s).unwrap();
            prods.push(f.values[a as usize] * f.values[b as usize]);
        }
        let (m, se) = crate::stats::mean_se(&prods);
        let exact = brw_covariance(lat.domain(), depth, lat.position(a), lat.position(b));
        assert!((m - exact).abs() < 4.0 * se, "{m} vs {exact}");
    }

    #[test]
    fn brw_log_correlation_bounds() {
        // Upper bound holds for every pair; the two-sided bound holds for
        // pairs not separated by a dyadic line coarser than 8x their distance.
        let lat = Lattice::new(1.0 / 32.0, Rect::unit()).unwrap();
        let d = lat.domain();
        let depth = Kernel::min_brw_depth(lat.eta());
        let root = brw_root(d);
        let mut dev_max = f64::MIN;
        let mut aligned = (f64::MAX, f64::MIN);
        for s in 0..lat.len() as u32 {
            for t in (s + 1)..lat.len() as u32 {
                let (p, q) = (lat.position(s), lat.position(t));
                let dist = (p[0] - q[0]).hypot(p[1] - q[1]);
                let dev = brw_covariance(d, depth, p, q) - (1.0 / dist).ln();
                dev_max = dev_max.max(dev);
                let scale = ((1.0 / (8.0 * dist)).log2().floor().max(0.0) as u32).min(depth);
                if dyadic_cell(root, scale, p) == dyadic_cell(root, scale, q) {
                    aligned.0 = aligned.0.min(dev);
                    aligned.1 = aligned.1.max(dev);
                }
            }
        }
        assert!(dev_max <= 2.0 * LN_2, "{dev_max}");
        let c0 = (aligned.1 - aligned.0) / 2.0;
        assert!(c0 < 3.0 * LN_2, "fitted C0 {c0}");
    }

    #[test]
    fn snapshot_round_trip_and_corruption() {
        let lat = Lattice::new(0.25, Rect::unit()).unwrap();
        let f = sample_field_cholesky(&lat, &Kernel::exact_log(2.0), 5).unwrap();
        let bytes = encode_snapshot(&f);
        assert_eq!(decode_snapshot(&bytes).unwrap(), f);
        assert!(decode_snapshot(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode_snapshot(&bad).is_err());
    }
}
