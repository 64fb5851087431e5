//! Instrument-grouped observations and deterministic cross-fold assignment.
//!
//! A [`GroupedSample`] holds one [`Cell`] per instrument level: the treatment
//! vectors, outcomes and fold labels of the units observed at that level.
//! Cells are immutable after construction and safe to share across workers.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Splitting scheme for the jackknife risk and debiasing corrections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldScheme {
    /// Balanced two-fold split within each cell.
    TwoFold,
    /// Per-unit exclusion; the fold labels are unused.
    LeaveOneOut,
}

/// Observations for one instrument level.
#[derive(Debug, Clone)]
pub struct Cell {
    /// Internal 1-based cell label.
    pub index: usize,
    /// Treatment vectors, row-major with stride `d`.
    pub x: Vec<f64>,
    /// Outcomes, one per unit.
    pub y: Vec<f64>,
    /// Fold labels in {0, 1}, one per unit.
    pub fold: Vec<u8>,
}

impl Cell {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn x_row(&self, i: usize, d: usize) -> &[f64] {
        &self.x[i * d..(i + 1) * d]
    }

    /// Unit counts per fold label.
    pub fn fold_counts(&self) -> (usize, usize) {
        let ones = self.fold.iter().filter(|&&v| v == 1).count();
        (self.len() - ones, ones)
    }
}

/// Instrument-grouped sample with fold labels and the original-label map.
#[derive(Debug, Clone)]
pub struct GroupedSample {
    pub cells: Vec<Cell>,
    /// Treatment dimension.
    pub d: usize,
    n_total: usize,
    /// Original z label for each internal cell, in encounter order.
    label_map: Vec<i64>,
    scheme: Option<FoldScheme>,
    seed: u64,
}

/// Column names expected in a grouped-data CSV file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CsvOptions {
    pub z_col: String,
    pub y_col: String,
    /// Treatment columns are `<x_prefix>1 .. <x_prefix>d`.
    pub x_prefix: String,
}

impl Default for CsvOptions {
    fn default() -> Self {
        CsvOptions { z_col: "z".into(), y_col: "y".into(), x_prefix: "x".into() }
    }
}

impl GroupedSample {
    /// Build a sample from per-cell `(x, y)` data. Fold labels start at 0 and
    /// the label map is the identity `k -> k`.
    pub fn from_cells(cells_xy: Vec<(Vec<f64>, Vec<f64>)>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidConfig("treatment dimension must be positive".into()));
        }
        let mut cells = Vec::with_capacity(cells_xy.len());
        let mut n_total = 0;
        for (k, (x, y)) in cells_xy.into_iter().enumerate() {
            if y.is_empty() {
                return Err(Error::InvalidConfig(format!("cell {} is empty", k + 1)));
            }
            if x.len() != y.len() * d {
                return Err(Error::DimensionMismatch(format!(
                    "cell {}: {} treatment values for {} units of dimension {}",
                    k + 1,
                    x.len(),
                    y.len(),
                    d
                )));
            }
            if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!("cell {}: non-finite value", k + 1)));
            }
            n_total += y.len();
            let fold = vec![0u8; y.len()];
            cells.push(Cell { index: k + 1, x, y, fold });
        }
        if cells.is_empty() {
            return Err(Error::EmptyFile);
        }
        let label_map = (1..=cells.len() as i64).collect();
        Ok(GroupedSample { cells, d, n_total, label_map, scheme: None, seed: 0 })
    }

    /// Same as [`GroupedSample::from_cells`] but with explicit fold labels;
    /// marks the sample as two-fold split.
    pub fn from_cells_with_folds(
        cells_xyf: Vec<(Vec<f64>, Vec<f64>, Vec<u8>)>,
        d: usize,
    ) -> Result<Self> {
        let folds: Vec<Vec<u8>> = cells_xyf.iter().map(|c| c.2.clone()).collect();
        let xy = cells_xyf.into_iter().map(|(x, y, _)| (x, y)).collect();
        let mut sample = GroupedSample::from_cells(xy, d)?;
        for (cell, fold) in sample.cells.iter_mut().zip(folds) {
            if fold.len() != cell.len() {
                return Err(Error::DimensionMismatch("fold labels vs cell size".into()));
            }
            if fold.iter().any(|&f| f > 1) {
                return Err(Error::InvalidConfig("fold labels must be 0 or 1".into()));
            }
            cell.fold = fold;
        }
        sample.scheme = Some(FoldScheme::TwoFold);
        Ok(sample)
    }

    /// Load a grouped CSV file with header `z,x1..xd,y` (names configurable).
    pub fn load_csv<P: AsRef<Path>>(path: P, options: &CsvOptions) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path.as_ref())?;
        let headers = reader.headers()?.clone();
        let find = |name: &str| headers.iter().position(|h| h == name);
        let z_idx = find(&options.z_col)
            .ok_or_else(|| Error::MissingColumn(options.z_col.clone()))?;
        let y_idx = find(&options.y_col)
            .ok_or_else(|| Error::MissingColumn(options.y_col.clone()))?;
        let mut x_idx = Vec::new();
        loop {
            let name = format!("{}{}", options.x_prefix, x_idx.len() + 1);
            match find(&name) {
                Some(i) => x_idx.push(i),
                None => break,
            }
        }
        if x_idx.is_empty() {
            return Err(Error::MissingColumn(format!("{}1", options.x_prefix)));
        }
        let d = x_idx.len();

        let mut label_map: Vec<i64> = Vec::new();
        let mut by_cell: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
        let mut row_no = 0usize;
        for record in reader.records() {
            let record = record?;
            row_no += 1;
            let parse_f = |idx: usize, col: &str| -> Result<f64> {
                let raw = record.get(idx).unwrap_or("").trim();
                raw.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::NonNumericValue { row: row_no, column: col.into() })
            };
            let z_raw = record.get(z_idx).unwrap_or("").trim();
            let z: i64 = z_raw.parse().map_err(|_| Error::NonNumericValue {
                row: row_no,
                column: options.z_col.clone(),
            })?;
            let y = parse_f(y_idx, &options.y_col)?;
            let cell = match label_map.iter().position(|&l| l == z) {
                Some(pos) => pos,
                None => {
                    label_map.push(z);
                    by_cell.push((Vec::new(), Vec::new()));
                    label_map.len() - 1
                }
            };
            for (j, &idx) in x_idx.iter().enumerate() {
                let name = format!("{}{}", options.x_prefix, j + 1);
                by_cell[cell].0.push(parse_f(idx, &name)?);
            }
            by_cell[cell].1.push(y);
        }
        if row_no == 0 {
            return Err(Error::EmptyFile);
        }
        let mut sample = GroupedSample::from_cells(by_cell, d)?;
        sample.label_map = label_map;
        Ok(sample)
    }

    /// Write the sample in the grouped CSV format (original z labels).
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        write!(out, "z")?;
        for j in 1..=self.d {
            write!(out, ",x{j}")?;
        }
        writeln!(out, ",y")?;
        for (k, cell) in self.cells.iter().enumerate() {
            let label = self.label_map[k];
            for i in 0..cell.len() {
                write!(out, "{label}")?;
                for v in cell.x_row(i, self.d) {
                    write!(out, ",{v}")?;
                }
                writeln!(out, ",{}", cell.y[i])?;
            }
        }
        Ok(())
    }

    /// Assign fold labels. For `TwoFold`, each cell gets a seeded permutation
    /// of the alternating pattern `0,1,0,1,...`, so fold sizes differ by at
    /// most one and the labels are a pure function of `(seed, k, n_k)`.
    pub fn assign_folds(mut self, seed: u64, scheme: FoldScheme) -> Self {
        self.seed = seed;
        self.scheme = Some(scheme);
        for cell in &mut self.cells {
            match scheme {
                FoldScheme::TwoFold => {
                    let n = cell.len();
                    let mut labels: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
                    let mut rng = SplitMix64::stream(seed, &[cell.index as u64]);
                    rng.shuffle(&mut labels);
                    cell.fold = labels;
                }
                FoldScheme::LeaveOneOut => {
                    cell.fold = vec![0; cell.len()];
                }
            }
        }
        self
    }

    pub fn n(&self) -> usize {
        self.n_total
    }

    pub fn k(&self) -> usize {
        self.cells.len()
    }

    pub fn scheme(&self) -> Option<FoldScheme> {
        self.scheme
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Raw cell weight n_k / N.
    pub fn weight(&self, k: usize) -> f64 {
        self.cells[k].len() as f64 / self.n_total as f64
    }

    /// A cell is estimable when both folds are nonempty (two-fold) or when it
    /// has at least two units (leave-one-out).
    pub fn estimable(&self, k: usize) -> bool {
        match self.scheme {
            Some(FoldScheme::TwoFold) => {
                let (n0, n1) = self.cells[k].fold_counts();
                n0 > 0 && n1 > 0
            }
            _ => self.cells[k].len() >= 2,
        }
    }

    /// Internal labels (1-based) of cells excluded from cross-fold terms.
    pub fn non_estimable_cells(&self) -> Vec<usize> {
        (0..self.k()).filter(|&k| !self.estimable(k)).map(|k| k + 1).collect()
    }

    /// Map from original z labels to internal 1-based labels, in encounter order.
    pub fn label_map(&self) -> Vec<(i64, usize)> {
        self.label_map.iter().enumerate().map(|(k, &z)| (z, k + 1)).collect()
    }

    pub fn label_map_json(&self) -> String {
        let entries: Vec<serde_json::Value> = self
            .label_map()
            .into_iter()
            .map(|(z, k)| serde_json::json!({"original": z, "internal": k}))
            .collect();
        serde_json::Value::Array(entries).to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_temp(content: &str) -> std::path::PathBuf {
        let mut path = std::env::temp_dir();
        path.push(format!("npjive_grouped_{}.csv", crate::rng::mix_seed(&[content.len() as u64, content.as_bytes()[0] as u64])));
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    #[test]
    fn load_csv_counts_cells() {
        let path = write_temp("z,x1,y\n1,0.1,1\n1,0.2,2\n1,0.3,3\n2,0.4,4\n2,0.5,5\n2,0.6,6\n");
        let s = GroupedSample::load_csv(&path, &CsvOptions::default()).unwrap();
        assert_eq!(s.k(), 2);
        assert_eq!(s.cells[0].len(), 3);
        assert_eq!(s.cells[1].len(), 3);
        assert_eq!(s.n(), 6);
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn load_csv_relabels_in_encounter_order() {
        let path = write_temp("z,x1,y\n10,0.1,1\n20,0.2,2\n30,0.3,3\n10,0.4,4\n");
        let s = GroupedSample::load_csv(&path, &CsvOptions::default()).unwrap();
        assert_eq!(s.label_map(), vec![(10, 1), (20, 2), (30, 3)]);
        // Round-trip: applying the map to internal labels reproduces input z.
        let map = s.label_map();
        for (z, k) in &map {
            assert_eq!(map[*k - 1].0, *z);
        }
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn load_csv_reports_non_numeric_row() {
        let path = write_temp("z,x1,y\n1,0.1,1\n1,0.2,2\n1,0.3,3\n1,0.4,oops\n");
        let err = GroupedSample::load_csv(&path, &CsvOptions::default()).unwrap_err();
        match err {
            Error::NonNumericValue { row, column } => {
                assert_eq!(row, 4);
                assert_eq!(column, "y");
            }
            other => panic!("unexpected error {other:?}"),
        }
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn load_csv_missing_column() {
        let path = write_temp("z,w1,y\n1,0.1,1\n");
        let err = GroupedSample::load_csv(&path, &CsvOptions::default()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(c) if c == "x1"));
        std::fs::remove_file(path).ok();
    }

    #[test]
    fn fold_balance_and_determinism() {
        let cells = vec![
            (vec![0.0; 4], vec![0.0; 4]),
            (vec![0.0; 5], vec![0.0; 5]),
            (vec![0.0; 1], vec![0.0; 1]),
        ];
        let s1 = GroupedSample::from_cells(cells.clone(), 1).unwrap().assign_folds(11, FoldScheme::TwoFold);
        let s2 = GroupedSample::from_cells(cells, 1).unwrap().assign_folds(11, FoldScheme::TwoFold);
        assert_eq!(s1.cells[0].fold_counts(), (2, 2));
        let (a, b) = s1.cells[1].fold_counts();
        assert_eq!(a.min(b), 2);
        assert_eq!(a.max(b), 3);
        for k in 0..3 {
            assert_eq!(s1.cells[k].fold, s2.cells[k].fold);
        }
        assert!(!s1.estimable(2));
        assert_eq!(s1.non_estimable_cells(), vec![3]);
    }

    #[test]
    fn weights_sum_to_one() {
        let cells = vec![(vec![0.0; 3], vec![0.0; 3]), (vec![0.0; 7], vec![0.0; 7])];
        let s = GroupedSample::from_cells(cells, 1).unwrap();
        let total: f64 = (0..s.k()).map(|k| s.weight(k)).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
