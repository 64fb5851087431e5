//! Synthetic data generators.
//!
//! Three designs: the surrogate-index simulation (beta-distributed treatment
//! whose shape parameters follow a reflected random walk across experiments,
//! with a discretized Gaussian confounder entering both treatment and
//! outcome), a weak linear-IV design with standardized cell scores, and i.i.d.
//! draws from a discrete oracle table. Every generator is a pure function of
//! its seeds.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grouped::GroupedSample;
use crate::oracle::OracleModel;
use crate::rng::{normal_inv_cdf, SplitMix64};

const TAG_WALK: u64 = 0x57A1C;
const TAG_UNITS: u64 = 0x0117;
const TAG_TARGET: u64 = 0x7A26;
const TAG_DISCRETE: u64 = 0xD15C;

/// Structural function used by the surrogate design.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HStar {
    Identity,
    Zero,
    Constant { value: f64 },
    Linear { slope: f64, intercept: f64 },
}

impl HStar {
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            HStar::Identity => x,
            HStar::Zero => 0.0,
            HStar::Constant { value } => value,
            HStar::Linear { slope, intercept } => slope * x + intercept,
        }
    }
}

impl Default for HStar {
    fn default() -> Self {
        HStar::Identity
    }
}

fn default_sigma_u() -> f64 {
    0.2
}
fn default_m_levels() -> usize {
    10
}
fn default_walk_sd() -> f64 {
    0.5
}
fn default_bounds() -> [f64; 2] {
    [1.0, 8.0]
}
fn default_sigma_eps() -> f64 {
    0.3
}
fn default_conf_coef() -> f64 {
    3.0
}
fn default_n_new() -> usize {
    50_000
}

/// Configuration of the surrogate-index simulation. Defaults follow the
/// reference experimental design.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SurrogateDgpConfig {
    /// Number of experiments (instrument levels).
    pub k: usize,
    /// Units per experiment.
    pub n: usize,
    #[serde(default = "default_sigma_u")]
    pub sigma_u: f64,
    /// Confounder levels.
    #[serde(default = "default_m_levels")]
    pub m_levels: usize,
    #[serde(default = "default_walk_sd")]
    pub walk_sd: f64,
    #[serde(default = "default_bounds")]
    pub bounds: [f64; 2],
    #[serde(default = "default_sigma_eps")]
    pub sigma_eps: f64,
    #[serde(default = "default_conf_coef")]
    pub conf_coef: f64,
    pub a_new: f64,
    pub b_new: f64,
    #[serde(default = "default_n_new")]
    pub n_new: usize,
    #[serde(default)]
    pub h_star: HStar,
    pub seed: u64,
    /// Optional separate seed for unit-level draws; the walk stays keyed by
    /// `seed`, so two configs sharing `seed` share the same experiments.
    #[serde(default)]
    pub unit_seed: Option<u64>,
}

impl SurrogateDgpConfig {
    /// Reference experimental defaults with the given size and target shape.
    pub fn with_size(k: usize, n: usize, a_new: f64, b_new: f64, seed: u64) -> Self {
        SurrogateDgpConfig {
            k,
            n,
            sigma_u: default_sigma_u(),
            m_levels: default_m_levels(),
            walk_sd: default_walk_sd(),
            bounds: default_bounds(),
            sigma_eps: default_sigma_eps(),
            conf_coef: default_conf_coef(),
            a_new,
            b_new,
            n_new: default_n_new(),
            h_star: HStar::Identity,
            seed,
            unit_seed: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n == 0 || self.n_new == 0 {
            return Err(Error::InvalidConfig("k, n, n_new must be positive".into()));
        }
        if self.sigma_u <= 0.0 || self.sigma_eps < 0.0 || self.walk_sd <= 0.0 {
            return Err(Error::InvalidConfig("scale parameters must be positive".into()));
        }
        if self.bounds[0] >= self.bounds[1] {
            return Err(Error::InvalidConfig("bounds must satisfy lo < hi".into()));
        }
        if self.m_levels == 0 {
            return Err(Error::InvalidConfig("confounder needs at least one level".into()));
        }
        if self.a_new <= 0.0 || self.b_new <= 0.0 {
            return Err(Error::InvalidConfig("target beta shapes must be positive".into()));
        }
        Ok(())
    }
}

/// A generated dataset: the grouped sample, the target treatment sample, the
/// realized value of the functional and generator metadata.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub sample: GroupedSample,
    /// Target treatment points, row-major with stride `d`.
    pub target_x: Vec<f64>,
    pub d: usize,
    pub psi_true: f64,
    pub meta: BTreeMap<String, f64>,
}

/// Fold a value back into [lo, hi] by repeated boundary reflection
/// (triangle wave in closed form).
pub fn reflect_into(v: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    let t = (v - lo).rem_euclid(2.0 * span);
    lo + span - (t - span).abs()
}

/// Equiprobable quantile-midpoint discretization of N(0, sd^2): level m of M
/// carries the value sd * Phi^-1((m - 0.5) / M). Symmetric, hence mean zero.
pub fn discretized_gaussian_levels(m_levels: usize, sd: f64) -> Vec<f64> {
    (1..=m_levels)
        .map(|m| sd * normal_inv_cdf((m as f64 - 0.5) / m_levels as f64))
        .collect()
}

/// Generate the surrogate-index design.
pub fn simulate_surrogate(config: &SurrogateDgpConfig) -> Result<SimulatedData> {
    config.validate()?;
    let unit_seed = config.unit_seed.unwrap_or(config.seed);
    let [lo, hi] = config.bounds;
    let levels = discretized_gaussian_levels(config.m_levels, config.sigma_u);

    // Reflected random walk of the per-experiment beta shapes.
    let mut walk = SplitMix64::stream(config.seed, &[TAG_WALK]);
    let mut shapes = Vec::with_capacity(config.k);
    let mut a = lo + (hi - lo) * walk.uniform();
    let mut b = lo + (hi - lo) * walk.uniform();
    shapes.push((a, b));
    for _ in 1..config.k {
        a = reflect_into(a + walk.normal(0.0, config.walk_sd), lo, hi);
        b = reflect_into(b + walk.normal(0.0, config.walk_sd), lo, hi);
        shapes.push((a, b));
    }

    let mut cells = Vec::with_capacity(config.k);
    for (k, &(a_k, b_k)) in shapes.iter().enumerate() {
        let mut rng = SplitMix64::stream(unit_seed, &[TAG_UNITS, k as u64 + 1]);
        let mut x = Vec::with_capacity(config.n);
        let mut y = Vec::with_capacity(config.n);
        for _ in 0..config.n {
            let u = levels[rng.below(config.m_levels)];
            let xi = rng.beta(a_k, b_k) + u;
            let eps = if config.sigma_eps > 0.0 { rng.normal(0.0, config.sigma_eps) } else { 0.0 };
            x.push(xi);
            y.push(config.h_star.apply(xi) + config.conf_coef * u + eps);
        }
        cells.push((x, y));
    }
    let sample = GroupedSample::from_cells(cells, 1)?;

    let mut rng = SplitMix64::stream(unit_seed, &[TAG_TARGET]);
    let mut target_x = Vec::with_capacity(config.n_new);
    let mut psi_true = 0.0;
    for _ in 0..config.n_new {
        let u = levels[rng.below(config.m_levels)];
        let xi = rng.beta(config.a_new, config.b_new) + u;
        target_x.push(xi);
        psi_true += config.h_star.apply(xi);
    }
    psi_true /= config.n_new as f64;

    let mut meta = BTreeMap::new();
    meta.insert("k".into(), config.k as f64);
    meta.insert("n".into(), config.n as f64);
    meta.insert("n_new".into(), config.n_new as f64);
    let realized_u_sd =
        (levels.iter().map(|v| v * v).sum::<f64>() / config.m_levels as f64).sqrt();
    meta.insert("realized_confounder_sd".into(), realized_u_sd);
    Ok(SimulatedData { sample, target_x, d: 1, psi_true, meta })
}

/// Weak linear-IV design with standardized cell scores.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WeakIvConfig {
    pub k: usize,
    pub n: usize,
    /// First-stage coefficient; the dual-solution norm is 1/|pi|.
    pub pi: f64,
    pub sigma_v: f64,
    /// Structural slope: Y = b X + V.
    pub b: f64,
    #[serde(default = "default_weak_n_new")]
    pub n_new: usize,
    pub seed: u64,
}

fn default_weak_n_new() -> usize {
    10_000
}

/// Correlation between the first-stage noise and the outcome noise; fixed by
/// design and reported in metadata.
pub const WEAK_IV_CONFOUNDING: f64 = 0.5;

pub fn simulate_weak_linear_iv(config: &WeakIvConfig) -> Result<SimulatedData> {
    if config.k < 2 || config.n == 0 || config.n_new == 0 {
        return Err(Error::InvalidConfig("need k >= 2 and positive sample sizes".into()));
    }
    if !config.pi.is_finite() || config.sigma_v <= 0.0 {
        return Err(Error::InvalidConfig("pi must be finite and sigma_v positive".into()));
    }
    // Standardized cell scores: mean 0, variance 1 across cells.
    let kf = config.k as f64;
    let raw: Vec<f64> = (1..=config.k).map(|k| k as f64 - (kf + 1.0) / 2.0).collect();
    let sd = (raw.iter().map(|z| z * z).sum::<f64>() / kf).sqrt();
    let z: Vec<f64> = raw.iter().map(|v| v / sd).collect();

    let rho = WEAK_IV_CONFOUNDING;
    let mut cells = Vec::with_capacity(config.k);
    for k in 0..config.k {
        let mut rng = SplitMix64::stream(config.seed, &[TAG_UNITS, k as u64 + 1]);
        let mut x = Vec::with_capacity(config.n);
        let mut y = Vec::with_capacity(config.n);
        for _ in 0..config.n {
            let e1 = rng.normal(0.0, 1.0);
            let e2 = rng.normal(0.0, 1.0);
            let u = config.sigma_v * e1;
            let v = rho * e1 + (1.0 - rho * rho).sqrt() * e2;
            let xi = config.pi * z[k] + u;
            x.push(xi);
            y.push(config.b * xi + v);
        }
        cells.push((x, y));
    }
    let sample = GroupedSample::from_cells(cells, 1)?;

    // Target: treatment distribution with the instrument resampled uniformly.
    let mut rng = SplitMix64::stream(config.seed, &[TAG_TARGET]);
    let mut target_x = Vec::with_capacity(config.n_new);
    for _ in 0..config.n_new {
        let zj = z[rng.below(config.k)];
        target_x.push(config.pi * zj + config.sigma_v * rng.normal(0.0, 1.0));
    }
    let target_mean: f64 = target_x.iter().sum::<f64>() / config.n_new as f64;
    let psi_true = config.b * target_mean;

    let mut meta = BTreeMap::new();
    meta.insert("u_v_correlation".into(), rho);
    meta.insert("dual_norm_label".into(), crate::oracle::weak_iv_oracle(config.pi).map_or(f64::INFINITY, |v| v));
    meta.insert("k".into(), config.k as f64);
    meta.insert("n".into(), config.n as f64);
    Ok(SimulatedData { sample, target_x, d: 1, psi_true, meta })
}

/// Draw (X, Y) i.i.d. from the model's per-cell joint tables.
pub fn simulate_discrete(
    model: &OracleModel,
    n_per_cell: &[usize],
    seed: u64,
) -> Result<GroupedSample> {
    model.validate()?;
    if n_per_cell.len() != model.k() || n_per_cell.iter().any(|&n| n == 0) {
        return Err(Error::InvalidConfig("n_per_cell must match the cell count".into()));
    }
    let (m, l) = (model.m(), model.l());
    let mut cells = Vec::with_capacity(model.k());
    for (k, &n) in n_per_cell.iter().enumerate() {
        // Cumulative distribution over the flattened (x, y) table.
        let mut cdf = Vec::with_capacity(m * l);
        let mut acc = 0.0;
        for j in 0..m {
            for li in 0..l {
                acc += model.pxy[k][j][li];
                cdf.push(acc);
            }
        }
        let total = acc;
        let mut rng = SplitMix64::stream(seed, &[TAG_DISCRETE, k as u64 + 1]);
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let u = rng.uniform() * total;
            let idx = cdf.partition_point(|&c| c <= u).min(m * l - 1);
            x.push(model.xs[idx / l]);
            y.push(model.ys[idx % l]);
        }
        cells.push((x, y));
    }
    GroupedSample::from_cells(cells, 1)
}
