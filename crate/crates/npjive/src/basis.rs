//! Finite-dimensional function classes as feature maps.
//!
//! A [`FeatureBasis`] maps a treatment point to a length-`p` feature vector;
//! every nuisance function in the crate is a linear combination of these
//! features. Multivariate treatments use an additive layout: per-dimension
//! feature blocks plus a single shared intercept (histogram bins already sum
//! to one per dimension, so the histogram basis carries no extra intercept).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grouped::GroupedSample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    /// Indicator bins partitioning each dimension's range.
    Histogram,
    /// Intercept, identity and hinge features max(0, x - t).
    LinearSpline,
    /// Intercept and monomials up to a configured degree.
    Polynomial,
}

/// Feature map from treatment points to R^p.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureBasis {
    pub kind: BasisKind,
    /// Per-dimension knots: bin edges (histogram), interior knots (spline),
    /// or empty (polynomial).
    pub knots: Vec<Vec<f64>>,
    /// Per-dimension [lo, hi]; evaluation clamps into this box.
    pub bounds: Vec<[f64; 2]>,
    /// Polynomial degree (unused by the other kinds).
    pub degree: usize,
    /// Total feature count.
    pub p: usize,
    /// Dimensions that collapsed to a constant during construction.
    pub degenerate_dims: Vec<usize>,
    /// Human-readable construction warnings.
    pub warnings: Vec<String>,
}

/// Empirical second-moment matrix of the features; `theta' G theta` is the
/// squared empirical norm (1/N) sum_{k,i} {f_theta(X_ki)}^2.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    pub matrix: DMatrix<f64>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let frac = h - lo as f64;
    sorted[lo] * (1.0 - frac) + sorted[hi] * frac
}

/// Build a basis with knots at empirical quantiles of the pooled treatment
/// values. `count` means: number of bins (histogram), number of interior
/// knots (linear spline), or polynomial degree.
pub fn make_basis(kind: BasisKind, count: usize, sample: &GroupedSample) -> Result<FeatureBasis> {
    if count == 0 {
        return Err(Error::InvalidConfig("basis count must be at least 1".into()));
    }
    if sample.n() == 0 {
        return Err(Error::EmptyFile);
    }
    let d = sample.d;
    let mut knots = Vec::with_capacity(d);
    let mut bounds = Vec::with_capacity(d);
    let mut degenerate_dims = Vec::new();
    let mut warnings = Vec::new();
    for dim in 0..d {
        let mut pooled: Vec<f64> = sample
            .cells
            .iter()
            .flat_map(|c| (0..c.len()).map(move |i| c.x_row(i, d)[dim]))
            .collect();
        pooled.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let lo = pooled[0];
        let hi = pooled[pooled.len() - 1];
        bounds.push([lo, hi]);
        let span = hi - lo;
        if span <= 1e-12 * (1.0 + lo.abs().max(hi.abs())) {
            degenerate_dims.push(dim);
            warnings.push(format!(
                "dimension {dim}: constant treatment coordinate; falling back to intercept-only"
            ));
            knots.push(Vec::new());
            continue;
        }
        let dim_knots = match kind {
            BasisKind::Histogram => {
                let mut distinct = pooled.clone();
                distinct.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * span);
                if distinct.len() <= count {
                    // Few distinct treatment values: separate them exactly
                    // with midpoint edges (saturated histogram).
                    let mut edges = vec![lo];
                    for pair in distinct.windows(2) {
                        edges.push(0.5 * (pair[0] + pair[1]));
                    }
                    edges.push(hi);
                    edges
                } else {
                    let mut edges = vec![lo];
                    for b in 1..count {
                        edges.push(quantile(&pooled, b as f64 / count as f64));
                    }
                    edges.push(hi);
                    edges.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * span);
                    if edges.len() < count + 1 {
                        warnings.push(format!(
                            "dimension {dim}: duplicate quantile edges reduced bin count to {}",
                            edges.len() - 1
                        ));
                    }
                    edges
                }
            }
            BasisKind::LinearSpline => {
                let mut interior = Vec::with_capacity(count);
                for t in 1..=count {
                    interior.push(quantile(&pooled, t as f64 / (count + 1) as f64));
                }
                interior.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * span);
                interior.retain(|&t| t > lo && t < hi);
                interior
            }
            BasisKind::Polynomial => Vec::new(),
        };
        knots.push(dim_knots);
    }
    let mut basis = FeatureBasis {
        kind,
        knots,
        bounds,
        degree: if kind == BasisKind::Polynomial { count } else { 0 },
        p: 0,
        degenerate_dims,
        warnings,
    };
    basis.p = basis.compute_p();
    Ok(basis)
}

impl FeatureBasis {
    /// Histogram basis with explicit bin edges per dimension (edges sorted,
    /// at least two per dimension). Used when the bins must match a known
    /// discrete support exactly.
    pub fn histogram_from_edges(edges: Vec<Vec<f64>>) -> Result<Self> {
        if edges.is_empty() {
            return Err(Error::InvalidConfig("need at least one dimension".into()));
        }
        let mut bounds = Vec::with_capacity(edges.len());
        for (dim, e) in edges.iter().enumerate() {
            if e.len() < 2 || e.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidConfig(format!(
                    "dimension {dim}: edges must be strictly increasing with at least one bin"
                )));
            }
            bounds.push([e[0], e[e.len() - 1]]);
        }
        let mut basis = FeatureBasis {
            kind: BasisKind::Histogram,
            knots: edges,
            bounds,
            degree: 0,
            p: 0,
            degenerate_dims: Vec::new(),
            warnings: Vec::new(),
        };
        basis.p = basis.compute_p();
        Ok(basis)
    }

    pub fn d(&self) -> usize {
        self.bounds.len()
    }

    fn has_intercept(&self) -> bool {
        !matches!(self.kind, BasisKind::Histogram) || !self.degenerate_dims.is_empty()
    }

    fn dim_feature_count(&self, dim: usize) -> usize {
        if self.degenerate_dims.contains(&dim) {
            return 0;
        }
        match self.kind {
            BasisKind::Histogram => self.knots[dim].len() - 1,
            BasisKind::LinearSpline => 1 + self.knots[dim].len(),
            BasisKind::Polynomial => self.degree,
        }
    }

    fn compute_p(&self) -> usize {
        let dims: usize = (0..self.d()).map(|dim| self.dim_feature_count(dim)).sum();
        dims + usize::from(self.has_intercept())
    }

    /// Evaluate the feature map at `x`, clamping coordinates into bounds.
    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.p];
        self.evaluate_into(x, &mut out)?;
        Ok(out)
    }

    /// Evaluate into a preallocated buffer of length `p`.
    pub fn evaluate_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.d() {
            return Err(Error::DimensionMismatch(format!(
                "expected treatment of dimension {}, got {}",
                self.d(),
                x.len()
            )));
        }
        debug_assert_eq!(out.len(), self.p);
        out.fill(0.0);
        let mut offset = 0;
        if self.has_intercept() {
            out[0] = 1.0;
            offset = 1;
        }
        for dim in 0..self.d() {
            let count = self.dim_feature_count(dim);
            if count == 0 {
                continue;
            }
            let [lo, hi] = self.bounds[dim];
            let t = x[dim].clamp(lo, hi);
            match self.kind {
                BasisKind::Histogram => {
                    let edges = &self.knots[dim];
                    let interior = &edges[1..edges.len() - 1];
                    let bin = interior.partition_point(|&e| e <= t);
                    out[offset + bin] = 1.0;
                }
                BasisKind::LinearSpline => {
                    out[offset] = t;
                    for (j, &knot) in self.knots[dim].iter().enumerate() {
                        out[offset + 1 + j] = (t - knot).max(0.0);
                    }
                }
                BasisKind::Polynomial => {
                    let mut pow = 1.0;
                    for j in 0..self.degree {
                        pow *= t;
                        out[offset + j] = pow;
                    }
                }
            }
            offset += count;
        }
        Ok(())
    }
}

/// Empirical Gram matrix G = (1/N) sum_{k,i} phi(X_ki) phi(X_ki)'.
pub fn gram_matrix(basis: &FeatureBasis, sample: &GroupedSample) -> Result<GramMatrix> {
    let p = basis.p;
    let mut g = DMatrix::<f64>::zeros(p, p);
    let mut feat = vec![0.0; p];
    for cell in &sample.cells {
        for i in 0..cell.len() {
            basis.evaluate_into(cell.x_row(i, sample.d), &mut feat)?;
            for a in 0..p {
                if feat[a] == 0.0 {
                    continue;
                }
                for b in a..p {
                    g[(a, b)] += feat[a] * feat[b];
                }
            }
        }
    }
    let n = sample.n() as f64;
    for a in 0..p {
        for b in a..p {
            let v = g[(a, b)] / n;
            g[(a, b)] = v;
            g[(b, a)] = v;
        }
    }
    Ok(GramMatrix { matrix: g })
}
