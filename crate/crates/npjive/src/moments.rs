//! Fold-wise cell means and the cross-fold quadratic forms.
//!
//! The empirical conditional-mean operators evaluate a function's within-cell
//! mean separately on each fold. Products of opposite-fold means are unbiased
//! for the squared population means, which is what removes the
//! many-instrument bias from the jackknife risk
//! `R(theta) = sum_k w_k (b0 - A0 theta)_k (b1 - A1 theta)_k`.

use nalgebra::{DMatrix, DVector};

use crate::basis::FeatureBasis;
use crate::error::{Error, Result};
use crate::grouped::{FoldScheme, GroupedSample};

/// Per-cell, per-fold means of features and outcomes plus cell weights.
#[derive(Debug, Clone)]
pub struct CellMoments {
    /// K x p fold-0 within-cell feature means.
    pub a0: DMatrix<f64>,
    /// K x p fold-1 within-cell feature means.
    pub a1: DMatrix<f64>,
    /// K x p full-cell feature means.
    pub afull: DMatrix<f64>,
    pub b0: DVector<f64>,
    pub b1: DVector<f64>,
    pub bfull: DVector<f64>,
    /// Masked weights, renormalized over estimable cells; zero elsewhere.
    pub w: DVector<f64>,
    /// Raw weights n_k / N.
    pub raw_w: DVector<f64>,
    pub estimable: Vec<bool>,
    /// Factor applied to raw weights of estimable cells (1 when none masked).
    pub renorm_factor: f64,
    pub n_total: usize,
    pub fold_counts: Vec<(usize, usize)>,
}

/// Symmetrized cross-fold second-moment forms: the jackknife risk is
/// `r0 - 2 c' theta + theta' M theta`.
#[derive(Debug, Clone)]
pub struct CrossForms {
    pub m: DMatrix<f64>,
    pub c: DVector<f64>,
    pub r0: f64,
}

/// Compute fold-wise cell moments. Requires assigned two-fold labels.
pub fn compute_moments(basis: &FeatureBasis, sample: &GroupedSample) -> Result<CellMoments> {
    if sample.scheme() != Some(FoldScheme::TwoFold) {
        return Err(Error::FoldsUnassigned);
    }
    let k = sample.k();
    let p = basis.p;
    let mut a0 = DMatrix::<f64>::zeros(k, p);
    let mut a1 = DMatrix::<f64>::zeros(k, p);
    let mut afull = DMatrix::<f64>::zeros(k, p);
    let mut b0 = DVector::<f64>::zeros(k);
    let mut b1 = DVector::<f64>::zeros(k);
    let mut bfull = DVector::<f64>::zeros(k);
    let mut estimable = vec![false; k];
    let mut fold_counts = Vec::with_capacity(k);
    let mut feat = vec![0.0; p];
    for (ki, cell) in sample.cells.iter().enumerate() {
        let (n0, n1) = cell.fold_counts();
        fold_counts.push((n0, n1));
        estimable[ki] = n0 > 0 && n1 > 0;
        for i in 0..cell.len() {
            basis.evaluate_into(cell.x_row(i, sample.d), &mut feat)?;
            let y = cell.y[i];
            for (j, &f) in feat.iter().enumerate() {
                afull[(ki, j)] += f;
                if cell.fold[i] == 0 {
                    a0[(ki, j)] += f;
                } else {
                    a1[(ki, j)] += f;
                }
            }
            bfull[ki] += y;
            if cell.fold[i] == 0 {
                b0[ki] += y;
            } else {
                b1[ki] += y;
            }
        }
        let n = cell.len() as f64;
        for j in 0..p {
            afull[(ki, j)] /= n;
            if n0 > 0 {
                a0[(ki, j)] /= n0 as f64;
            }
            if n1 > 0 {
                a1[(ki, j)] /= n1 as f64;
            }
        }
        bfull[ki] /= n;
        if n0 > 0 {
            b0[ki] /= n0 as f64;
        }
        if n1 > 0 {
            b1[ki] /= n1 as f64;
        }
    }
    let raw_w = DVector::from_iterator(k, (0..k).map(|ki| sample.weight(ki)));
    let est_mass: f64 = (0..k).filter(|&ki| estimable[ki]).map(|ki| raw_w[ki]).sum();
    if est_mass <= 0.0 {
        return Err(Error::NoEstimableCells);
    }
    let renorm_factor = 1.0 / est_mass;
    let w = DVector::from_iterator(
        k,
        (0..k).map(|ki| if estimable[ki] { raw_w[ki] * renorm_factor } else { 0.0 }),
    );
    Ok(CellMoments {
        a0,
        a1,
        afull,
        b0,
        b1,
        bfull,
        w,
        raw_w,
        estimable,
        renorm_factor,
        n_total: sample.n(),
        fold_counts,
    })
}

impl CellMoments {
    pub fn k(&self) -> usize {
        self.b0.len()
    }

    pub fn p(&self) -> usize {
        self.a0.ncols()
    }

    /// Cross-fold forms: M = (A0' W A1 + A1' W A0)/2, c = (A0' W b1 + A1' W b0)/2,
    /// r0 = sum_k w_k b0_k b1_k.
    pub fn cross_forms(&self) -> CrossForms {
        let w = &self.w;
        let a1w = scale_rows(&self.a1, w);
        let m_raw = self.a0.transpose() * &a1w;
        let m = (&m_raw + m_raw.transpose()) * 0.5;
        let c = (self.a0.transpose() * wmul(w, &self.b1) + self.a1.transpose() * wmul(w, &self.b0)) * 0.5;
        let r0 = (0..self.k()).map(|k| w[k] * self.b0[k] * self.b1[k]).sum();
        CrossForms { m, c, r0 }
    }

    /// Plug-in (full-cell) forms: M = Afull' W Afull, c = Afull' W bfull.
    pub fn plugin_forms(&self) -> CrossForms {
        let w = &self.w;
        let afw = scale_rows(&self.afull, w);
        let m = self.afull.transpose() * &afw;
        let m = (&m + m.transpose()) * 0.5;
        let c = self.afull.transpose() * wmul(w, &self.bfull);
        let r0 = (0..self.k()).map(|k| w[k] * self.bfull[k] * self.bfull[k]).sum();
        CrossForms { m, c, r0 }
    }

    /// Dump the per-cell means to CSV for debugging.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        write!(out, "cell,estimable,w,raw_w,n0,n1,b0,b1,bfull")?;
        for j in 0..self.p() {
            write!(out, ",a0_{j},a1_{j},afull_{j}")?;
        }
        writeln!(out)?;
        for k in 0..self.k() {
            write!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                k + 1,
                self.estimable[k],
                self.w[k],
                self.raw_w[k],
                self.fold_counts[k].0,
                self.fold_counts[k].1,
                self.b0[k],
                self.b1[k],
                self.bfull[k]
            )?;
            for j in 0..self.p() {
                write!(out, ",{},{},{}", self.a0[(k, j)], self.a1[(k, j)], self.afull[(k, j)])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

fn scale_rows(a: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut out = a.clone();
    for k in 0..a.nrows() {
        for j in 0..a.ncols() {
            out[(k, j)] *= w[k];
        }
    }
    out
}

fn wmul(w: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(w.len(), (0..w.len()).map(|k| w[k] * b[k]))
}

/// Cross-fold jackknife risk of the coefficient vector `theta`; masked cells
/// contribute zero. May be negative (it is a product of noisy fold means).
pub fn npjive_risk(moments: &CellMoments, theta: &DVector<f64>) -> Result<f64> {
    if theta.len() != moments.p() {
        return Err(Error::DimensionMismatch(format!(
            "theta has length {}, basis has {} features",
            theta.len(),
            moments.p()
        )));
    }
    let r0 = &moments.b0 - &moments.a0 * theta;
    let r1 = &moments.b1 - &moments.a1 * theta;
    Ok((0..moments.k()).map(|k| moments.w[k] * r0[k] * r1[k]).sum())
}

/// Leave-one-out risk: sum_k w_k (1/n_k) sum_i r_i * mean_{j != i} r_j, with
/// weights renormalized over cells having n_k >= 2. Uses the O(n_k) identity
/// mean_{j != i} r_j = (n_k rbar - r_i) / (n_k - 1).
pub fn loo_risk(basis: &FeatureBasis, sample: &GroupedSample, theta: &DVector<f64>) -> Result<f64> {
    if theta.len() != basis.p {
        return Err(Error::DimensionMismatch(format!(
            "theta has length {}, basis has {} features",
            theta.len(),
            basis.p
        )));
    }
    let mut mass = 0.0;
    for k in 0..sample.k() {
        if sample.cells[k].len() >= 2 {
            mass += sample.weight(k);
        }
    }
    if mass <= 0.0 {
        return Err(Error::NoEstimableCells);
    }
    let mut feat = vec![0.0; basis.p];
    let mut total = 0.0;
    for (k, cell) in sample.cells.iter().enumerate() {
        let n = cell.len();
        if n < 2 {
            continue;
        }
        let mut resid = Vec::with_capacity(n);
        for i in 0..n {
            basis.evaluate_into(cell.x_row(i, sample.d), &mut feat)?;
            let pred: f64 = feat.iter().zip(theta.iter()).map(|(a, b)| a * b).sum();
            resid.push(cell.y[i] - pred);
        }
        let rbar: f64 = resid.iter().sum::<f64>() / n as f64;
        let mut acc = 0.0;
        for &r in &resid {
            acc += r * (n as f64 * rbar - r) / (n as f64 - 1.0);
        }
        total += (sample.weight(k) / mass) * acc / n as f64;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{make_basis, BasisKind, FeatureBasis};
    use crate::grouped::GroupedSample;
    use crate::rng::SplitMix64;

    fn two_cell_sample() -> GroupedSample {
        // Cell 1: fold0 y = {1,3}, fold1 y = {2,4}; cell 2 similar.
        GroupedSample::from_cells_with_folds(
            vec![
                (vec![0.1, 0.2, 0.3, 0.4], vec![1.0, 3.0, 2.0, 4.0], vec![0, 0, 1, 1]),
                (vec![0.5, 0.6, 0.7, 0.8], vec![5.0, 7.0, 6.0, 8.0], vec![0, 0, 1, 1]),
            ],
            1,
        )
        .unwrap()
    }

    #[test]
    fn fold_means_are_means() {
        let sample = two_cell_sample();
        let basis = make_basis(BasisKind::Polynomial, 1, &sample).unwrap();
        let m = compute_moments(&basis, &sample).unwrap();
        assert!((m.b0[0] - 2.0).abs() < 1e-15);
        assert!((m.b1[0] - 3.0).abs() < 1e-15);
        assert!((m.bfull[0] - 2.5).abs() < 1e-15);
        // Intercept column of A0/A1 is all ones.
        for k in 0..2 {
            assert!((m.a0[(k, 0)] - 1.0).abs() < 1e-15);
            assert!((m.a1[(k, 0)] - 1.0).abs() < 1e-15);
        }
        // Full-cell row equals the fold-count weighted average of fold rows.
        for k in 0..2 {
            for j in 0..basis.p {
                let (n0, n1) = m.fold_counts[k];
                let blend = (n0 as f64 * m.a0[(k, j)] + n1 as f64 * m.a1[(k, j)])
                    / (n0 + n1) as f64;
                assert!((m.afull[(k, j)] - blend).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn estimability_masks_and_renormalizes() {
        let sample = GroupedSample::from_cells_with_folds(
            vec![
                (vec![0.1, 0.2, 0.3], vec![1.0, 2.0, 3.0], vec![0, 1, 0]),
                (vec![0.4], vec![4.0], vec![0]),
            ],
            1,
        )
        .unwrap();
        let basis = make_basis(BasisKind::Polynomial, 1, &sample).unwrap();
        let m = compute_moments(&basis, &sample).unwrap();
        assert_eq!(m.estimable, vec![true, false]);
        assert!((m.w[0] - 1.0).abs() < 1e-15);
        assert_eq!(m.w[1], 0.0);
        assert!((m.renorm_factor - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn risk_examples() {
        // Single cell, b0 = 1, b1 = -1, w = 1, theta = 0 -> risk = -1.
        let sample = GroupedSample::from_cells_with_folds(
            vec![(vec![0.0, 1.0], vec![1.0, -1.0], vec![0, 1])],
            1,
        )
        .unwrap();
        let basis = make_basis(BasisKind::Polynomial, 1, &sample).unwrap();
        let m = compute_moments(&basis, &sample).unwrap();
        let theta = DVector::zeros(basis.p);
        assert!((npjive_risk(&m, &theta).unwrap() + 1.0).abs() < 1e-15);

        // Constant outcome reproduced by the intercept -> risk 0.
        let sample = GroupedSample::from_cells_with_folds(
            vec![(vec![0.0, 1.0, 0.5, 0.2], vec![5.0; 4], vec![0, 0, 1, 1])],
            1,
        )
        .unwrap();
        let m = compute_moments(&basis, &sample).unwrap();
        let theta = DVector::from_column_slice(&[5.0, 0.0]);
        assert!(npjive_risk(&m, &theta).unwrap().abs() < 1e-15);

        // theta = 0 -> risk = r0.
        let forms = m.cross_forms();
        assert!((npjive_risk(&m, &DVector::zeros(2)).unwrap() - forms.r0).abs() < 1e-15);
    }

    #[test]
    fn cross_forms_quadratic_identity() {
        let mut rng = SplitMix64::new(33);
        let cells: Vec<(Vec<f64>, Vec<f64>)> = (0..6)
            .map(|_| {
                let n = 3 + rng.below(5);
                let x: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
                let y: Vec<f64> = (0..n).map(|_| rng.normal(0.0, 1.0)).collect();
                (x, y)
            })
            .collect();
        let sample = GroupedSample::from_cells(cells, 1)
            .unwrap()
            .assign_folds(5, crate::grouped::FoldScheme::TwoFold);
        let basis = make_basis(BasisKind::LinearSpline, 2, &sample).unwrap();
        let m = compute_moments(&basis, &sample).unwrap();
        let forms = m.cross_forms();
        for _ in 0..100 {
            let theta = DVector::from_iterator(basis.p, (0..basis.p).map(|_| rng.normal(0.0, 1.0)));
            let risk = npjive_risk(&m, &theta).unwrap();
            let quad = forms.r0 - 2.0 * forms.c.dot(&theta)
                + (theta.transpose() * &forms.m * &theta)[(0, 0)];
            assert!((risk - quad).abs() < 1e-10 * (1.0 + risk.abs()));
        }
        // Fold-swap symmetry: exchanging the fold labels leaves the risk unchanged.
        let mut swapped = sample.clone();
        for cell in &mut swapped.cells {
            for f in &mut cell.fold {
                *f = 1 - *f;
            }
        }
        let m2 = compute_moments(&basis, &swapped).unwrap();
        for _ in 0..10 {
            let theta = DVector::from_iterator(basis.p, (0..basis.p).map(|_| rng.normal(0.0, 1.0)));
            let r1 = npjive_risk(&m, &theta).unwrap();
            let r2 = npjive_risk(&m2, &theta).unwrap();
            assert!((r1 - r2).abs() < 1e-12 * (1.0 + r1.abs()));
        }
    }

    #[test]
    fn loo_risk_examples() {
        let basis = FeatureBasis::histogram_from_edges(vec![vec![0.0, 1.0]]).unwrap();
        // All residuals equal r in one cell -> contribution w * r^2.
        let sample = GroupedSample::from_cells(vec![(vec![0.5; 3], vec![2.0; 3])], 1).unwrap();
        let theta = DVector::from_column_slice(&[0.0]);
        let risk = loo_risk(&basis, &sample, &theta).unwrap();
        assert!((risk - 4.0).abs() < 1e-12);

        // Residuals {+1, -1} -> contribution -w.
        let sample = GroupedSample::from_cells(vec![(vec![0.5, 0.5], vec![1.0, -1.0])], 1).unwrap();
        let risk = loo_risk(&basis, &sample, &theta).unwrap();
        assert!((risk + 1.0).abs() < 1e-12);

        // Interpolating fit -> 0.
        let sample = GroupedSample::from_cells(vec![(vec![0.5, 0.6], vec![3.0, 3.0])], 1).unwrap();
        let theta = DVector::from_column_slice(&[3.0]);
        assert!(loo_risk(&basis, &sample, &theta).unwrap().abs() < 1e-12);
    }

    #[test]
    fn moments_require_two_fold_labels() {
        let sample = GroupedSample::from_cells(vec![(vec![0.1, 0.2], vec![1.0, 2.0])], 1).unwrap();
        let basis = make_basis(BasisKind::Polynomial, 1, &sample).unwrap();
        assert!(matches!(compute_moments(&basis, &sample), Err(Error::FoldsUnassigned)));
    }
}
