//! Dataset loading, validation, and canonical row ordering.
//!
//! The on-disk format is a plain CSV with header `label,qid,f1,...,fd` where
//! the `qid` column is optional. An empty label cell marks an unlabeled row;
//! labels may be written as `0`/`1` or `-1`/`+1` (the latter pair is remapped
//! to `0`/`1` on load). Feature costs live in a separate file that is either a
//! single row of `d` decimals or `name,cost` lines keyed by header feature
//! names; when no cost file is given every feature costs 1.0.
//!
//! Internally rows are stored labeled-first: the first `labeled_count()` rows
//! carry labels and the rest do not. The reorder is stable, and
//! [`Dataset::file_order`] maps each internal row back to its 0-based data row
//! in the source file so index-based split files keep meaning.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Default per-feature extraction cost when no cost file is supplied.
pub const DEFAULT_FEATURE_COST: f64 = 1.0;

/// A fully validated in-memory dataset.
///
/// Rows are stored labeled-first; see the module docs. Feature values are
/// dense row-major `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    num_features: usize,
    /// Labels for the first `labels.len()` rows, each 0 or 1.
    labels: Vec<u8>,
    feature_costs: Vec<f64>,
    feature_names: Vec<String>,
    query_ids: Option<Vec<u64>>,
    /// Internal row index -> 0-based data row in the originating file.
    file_order: Vec<usize>,
}

impl Dataset {
    /// Builds a dataset from per-row features and optional labels, applying
    /// the stable labeled-first reorder.
    ///
    /// `feature_costs` and `feature_names` default to all-ones and
    /// `f1..fd` when `None`. Errors on ragged rows, non-finite values,
    /// negative costs, length mismatches, or zero rows/columns.
    pub fn new(
        rows: Vec<Vec<f64>>,
        labels: Vec<Option<u8>>,
        feature_costs: Option<Vec<f64>>,
        feature_names: Option<Vec<String>>,
        query_ids: Option<Vec<u64>>,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Invalid("dataset has no rows".into()));
        }
        if rows.len() != labels.len() {
            return Err(Error::Dimension(format!(
                "{} feature rows but {} label entries",
                rows.len(),
                labels.len()
            )));
        }
        let num_features = rows[0].len();
        if num_features == 0 {
            return Err(Error::Invalid("dataset has no feature columns".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != num_features {
                return Err(Error::Dimension(format!(
                    "row {} has {} features, expected {}",
                    i,
                    row.len(),
                    num_features
                )));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::Invalid(format!(
                    "row {} contains non-finite feature value {}",
                    i, v
                )));
            }
        }
        for label in labels.iter().flatten() {
            if *label > 1 {
                return Err(Error::Invalid(format!("label {} is not binary", label)));
            }
        }
        if let Some(ids) = &query_ids {
            if ids.len() != rows.len() {
                return Err(Error::Dimension(format!(
                    "{} rows but {} query ids",
                    rows.len(),
                    ids.len()
                )));
            }
        }
        let costs = match feature_costs {
            Some(c) => {
                if c.len() != num_features {
                    return Err(Error::Dimension(format!(
                        "{} feature costs for {} features",
                        c.len(),
                        num_features
                    )));
                }
                if let Some(v) = c.iter().find(|v| !v.is_finite() || **v < 0.0) {
                    return Err(Error::Invalid(format!(
                        "feature costs must be finite and non-negative, got {}",
                        v
                    )));
                }
                c
            }
            None => vec![DEFAULT_FEATURE_COST; num_features],
        };
        let names = match feature_names {
            Some(n) => {
                if n.len() != num_features {
                    return Err(Error::Dimension(format!(
                        "{} feature names for {} features",
                        n.len(),
                        num_features
                    )));
                }
                n
            }
            None => (1..=num_features).map(|i| format!("f{}", i)).collect(),
        };

        // Stable labeled-first permutation: labeled rows keep their relative
        // order, then unlabeled rows keep theirs.
        let mut order: Vec<usize> = (0..rows.len()).filter(|&i| labels[i].is_some()).collect();
        order.extend((0..rows.len()).filter(|&i| labels[i].is_none()));

        let mut features = Vec::with_capacity(rows.len() * num_features);
        let mut packed_labels = Vec::new();
        let mut ordered_ids = query_ids.as_ref().map(|_| Vec::with_capacity(rows.len()));
        for &src in &order {
            features.extend_from_slice(&rows[src]);
            if let Some(l) = labels[src] {
                packed_labels.push(l);
            }
            if let (Some(out), Some(ids)) = (&mut ordered_ids, &query_ids) {
                out.push(ids[src]);
            }
        }

        Ok(Dataset {
            features,
            num_features,
            labels: packed_labels,
            feature_costs: costs,
            feature_names: names,
            query_ids: ordered_ids,
            file_order: order,
        })
    }

    /// Total number of rows (labeled + unlabeled).
    pub fn rows(&self) -> usize {
        self.file_order.len()
    }

    /// Number of labeled rows; these are rows `0..labeled_count()`.
    pub fn labeled_count(&self) -> usize {
        self.labels.len()
    }

    /// Number of unlabeled rows; these are rows `labeled_count()..rows()`.
    pub fn unlabeled_count(&self) -> usize {
        self.rows() - self.labeled_count()
    }

    /// Feature dimensionality `d`.
    pub fn num_features(&self) -> usize {
        self.num_features
    }

    /// Feature vector of internal row `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.num_features..(i + 1) * self.num_features]
    }

    /// All feature values, row-major, labeled rows first.
    pub fn features(&self) -> &[f64] {
        &self.features
    }

    /// Labels of the labeled block, one per row in `0..labeled_count()`.
    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Label of internal row `i`, `None` for unlabeled rows.
    pub fn label(&self, i: usize) -> Option<u8> {
        self.labels.get(i).copied()
    }

    /// Per-feature extraction costs, length `num_features()`.
    pub fn feature_costs(&self) -> &[f64] {
        &self.feature_costs
    }

    /// Column names from the header (or generated `f1..fd`).
    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Query ids aligned with internal rows, if the file had a `qid` column.
    pub fn query_ids(&self) -> Option<&[u64]> {
        self.query_ids.as_deref()
    }

    /// Maps internal row `i` to its 0-based data row in the source file.
    pub fn file_order(&self) -> &[usize] {
        &self.file_order
    }

    /// Replaces the cost vector (used when costs arrive after the features).
    pub fn set_feature_costs(&mut self, costs: Vec<f64>) -> Result<()> {
        if costs.len() != self.num_features {
            return Err(Error::Dimension(format!(
                "{} feature costs for {} features",
                costs.len(),
                self.num_features
            )));
        }
        if let Some(v) = costs.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(Error::Invalid(format!(
                "feature costs must be finite and non-negative, got {}",
                v
            )));
        }
        self.feature_costs = costs;
        Ok(())
    }

    /// SHA-256 over a canonical byte encoding of shapes, features, labels,
    /// query ids, and costs. Stored in model files so evaluation can tell
    /// whether it is looking at the data the model was trained on.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(b"grbb-dataset-v1");
        hasher.update((self.rows() as u64).to_le_bytes());
        hasher.update((self.num_features as u64).to_le_bytes());
        hasher.update((self.labels.len() as u64).to_le_bytes());
        for v in &self.features {
            hasher.update(v.to_bits().to_le_bytes());
        }
        hasher.update(&self.labels);
        match &self.query_ids {
            Some(ids) => {
                hasher.update([1u8]);
                for id in ids {
                    hasher.update(id.to_le_bytes());
                }
            }
            None => hasher.update([0u8]),
        }
        for c in &self.feature_costs {
            hasher.update(c.to_bits().to_le_bytes());
        }
        let digest = hasher.finalize();
        let mut out = String::with_capacity(64);
        for byte in digest {
            let _ = write!(out, "{:02x}", byte);
        }
        out
    }

    /// Returns a copy in which only `count` of the labeled rows keep their
    /// labels; the rest become unlabeled. Selection is uniform without
    /// replacement, driven entirely by `seed` (ChaCha8), so a given
    /// `(dataset, count, seed)` always picks the same rows.
    ///
    /// With `by_query` the unit of selection is a distinct query id among
    /// labeled rows: every labeled row of a chosen query stays labeled.
    pub fn subsample_labeled(&self, count: usize, seed: u64, by_query: bool) -> Result<Dataset> {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let keep: BTreeSet<usize> = if by_query {
            let ids = self.query_ids.as_deref().ok_or_else(|| {
                Error::Invalid("per-query subsampling requires a qid column".into())
            })?;
            let mut distinct: Vec<u64> = Vec::new();
            for &id in &ids[..self.labeled_count()] {
                if !distinct.contains(&id) {
                    distinct.push(id);
                }
            }
            if count > distinct.len() {
                return Err(Error::Invalid(format!(
                    "cannot keep {} labeled queries, only {} present",
                    count,
                    distinct.len()
                )));
            }
            distinct.shuffle(&mut rng);
            let chosen: BTreeSet<u64> = distinct[..count].iter().copied().collect();
            (0..self.labeled_count())
                .filter(|&i| chosen.contains(&ids[i]))
                .collect()
        } else {
            if count > self.labeled_count() {
                return Err(Error::Invalid(format!(
                    "cannot keep {} labeled rows, only {} present",
                    count,
                    self.labeled_count()
                )));
            }
            let mut idx: Vec<usize> = (0..self.labeled_count()).collect();
            idx.shuffle(&mut rng);
            idx[..count].iter().copied().collect()
        };

        let mut rows = Vec::with_capacity(self.rows());
        let mut labels = Vec::with_capacity(self.rows());
        for i in 0..self.rows() {
            rows.push(self.row(i).to_vec());
            labels.push(match self.label(i) {
                Some(l) if keep.contains(&i) => Some(l),
                _ => None,
            });
        }
        let mut out = Dataset::new(
            rows,
            labels,
            Some(self.feature_costs.clone()),
            Some(self.feature_names.clone()),
            self.query_ids.clone(),
        )?;
        // Compose permutations so file_order still points at source-file rows.
        for slot in &mut out.file_order {
            *slot = self.file_order[*slot];
        }
        Ok(out)
    }
}

/// Train/test partition of one dataset. `test` contains only labeled rows.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub train: Dataset,
    pub test: Dataset,
    /// Seed recorded for provenance when the split was sampled; 0 for
    /// index-file splits.
    pub seed: u64,
}

/// Parses one label cell. Empty means unlabeled; `-1/+1` map to `0/1`.
fn parse_label(cell: &str) -> std::result::Result<Option<u8>, String> {
    match cell {
        "" => Ok(None),
        "0" => Ok(Some(0)),
        "1" | "+1" => Ok(Some(1)),
        "-1" => Ok(Some(0)),
        other => Err(format!(
            "label '{}' is not one of '', 0, 1, +1, -1",
            other
        )),
    }
}

fn parse_feature(cell: &str, name: &str) -> std::result::Result<f64, String> {
    if cell.is_empty() {
        return Err(format!("feature '{}' is empty; missing values are not supported", name));
    }
    let v: f64 = cell
        .parse()
        .map_err(|_| format!("feature '{}' value '{}' is not a number", name, cell))?;
    if !v.is_finite() {
        return Err(format!("feature '{}' value '{}' is not finite", name, cell));
    }
    Ok(v)
}

/// Loads a feature CSV plus optional cost file. See the module docs for both
/// formats. Labeled and unlabeled rows may be interleaved in the file; the
/// returned dataset is reordered labeled-first.
pub fn load_dataset(features_path: &Path, costs_path: Option<&Path>) -> Result<Dataset> {
    let text = std::fs::read_to_string(features_path)
        .map_err(|e| Error::io(features_path, e))?;
    let mut lines = text.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(features_path, 1, "file is empty"))?;
    let header_cells: Vec<&str> = header.trim_end_matches('\r').split(',').map(str::trim).collect();
    if header_cells.first() != Some(&"label") {
        return Err(Error::parse(
            features_path,
            1,
            format!("header must start with 'label', got '{}'", header_cells.first().unwrap_or(&"")),
        ));
    }
    let has_qid = header_cells.get(1) == Some(&"qid");
    let feature_start = if has_qid { 2 } else { 1 };
    let feature_names: Vec<String> = header_cells[feature_start..]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if feature_names.is_empty() {
        return Err(Error::parse(features_path, 1, "header declares no feature columns"));
    }
    if feature_names.iter().any(|n| n.is_empty()) {
        return Err(Error::parse(features_path, 1, "header contains an empty feature name"));
    }
    let expected_cells = feature_start + feature_names.len();

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut query_ids = if has_qid { Some(Vec::new()) } else { None };
    for (idx, raw) in lines {
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1; // enumerate is 0-based over all lines
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        if cells.len() != expected_cells {
            return Err(Error::parse(
                features_path,
                lineno,
                format!("expected {} cells, got {}", expected_cells, cells.len()),
            ));
        }
        let label = parse_label(cells[0]).map_err(|m| Error::parse(features_path, lineno, m))?;
        if let Some(ids) = &mut query_ids {
            let qid: u64 = cells[1]
                .parse()
                .map_err(|_| {
                    Error::parse(
                        features_path,
                        lineno,
                        format!("qid '{}' is not a non-negative integer", cells[1]),
                    )
                })?;
            ids.push(qid);
        }
        let mut row = Vec::with_capacity(feature_names.len());
        for (cell, name) in cells[feature_start..].iter().zip(&feature_names) {
            row.push(parse_feature(cell, name).map_err(|m| Error::parse(features_path, lineno, m))?);
        }
        rows.push(row);
        labels.push(label);
    }

    let costs = match costs_path {
        Some(p) => Some(load_costs(p, &feature_names)?),
        None => None,
    };
    Dataset::new(rows, labels, costs, Some(feature_names), query_ids)
}

/// Loads a feature-cost file in either supported shape:
///
/// * a single CSV row of `d` decimals, ordered like the feature columns, or
/// * one `name,cost` pair per line, where every name must match a feature
///   column and every feature must be covered exactly once.
pub fn load_costs(path: &Path, feature_names: &[String]) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();
    if lines.is_empty() {
        return Err(Error::parse(path, 1, "cost file is empty"));
    }

    let parse_cost = |lineno: usize, cell: &str| -> Result<f64> {
        let v: f64 = cell
            .trim()
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("cost '{}' is not a number", cell)))?;
        if !v.is_finite() || v < 0.0 {
            return Err(Error::parse(
                path,
                lineno,
                format!("cost '{}' must be finite and non-negative", cell),
            ));
        }
        Ok(v)
    };

    // Detect the name,cost shape by trying to parse the first cell of the
    // first line as a number: feature names are not numeric.
    let first_cell = lines[0].1.split(',').next().unwrap_or("").trim();
    let is_named = first_cell.parse::<f64>().is_err();

    if is_named {
        let mut costs: Vec<Option<f64>> = vec![None; feature_names.len()];
        for (lineno, line) in &lines {
            let mut parts = line.split(',');
            let name = parts.next().unwrap_or("").trim();
            let cell = parts.next().ok_or_else(|| {
                Error::parse(path, *lineno, "expected 'name,cost'".to_string())
            })?;
            if parts.next().is_some() {
                return Err(Error::parse(path, *lineno, "expected exactly two cells"));
            }
            let pos = feature_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| {
                    Error::parse(path, *lineno, format!("unknown feature '{}'", name))
                })?;
            if costs[pos].is_some() {
                return Err(Error::parse(path, *lineno, format!("duplicate cost for '{}'", name)));
            }
            costs[pos] = Some(parse_cost(*lineno, cell)?);
        }
        costs
            .into_iter()
            .enumerate()
            .map(|(i, c)| {
                c.ok_or_else(|| {
                    Error::Invalid(format!("cost file misses feature '{}'", feature_names[i]))
                })
            })
            .collect()
    } else {
        if lines.len() != 1 {
            return Err(Error::parse(
                path,
                lines[1].0,
                "numeric cost files must be a single row",
            ));
        }
        let (lineno, line) = lines[0];
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != feature_names.len() {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected {} costs, got {}", feature_names.len(), cells.len()),
            ));
        }
        cells.iter().map(|c| parse_cost(lineno, c)).collect()
    }
}

/// Serializes `ds` back to the feature CSV format, in internal (labeled-first)
/// row order. Float formatting uses the shortest representation that parses
/// back to the same bits, so load → save → load is exact.
pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("label");
    if ds.query_ids().is_some() {
        out.push_str(",qid");
    }
    for name in ds.feature_names() {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for i in 0..ds.rows() {
        if let Some(l) = ds.label(i) {
            let _ = write!(out, "{}", l);
        }
        if let Some(ids) = ds.query_ids() {
            let _ = write!(out, ",{}", ids[i]);
        }
        for v in ds.row(i) {
            let _ = write!(out, ",{}", v);
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a plain-text split file: one 0-based source-file row index per line
/// (blank lines ignored) naming the test rows. Every listed row must be
/// labeled; remaining rows form the training set with labels intact.
pub fn load_split(ds: &Dataset, path: &Path) -> Result<DatasetSplit> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut test_file_rows = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let row: usize = line.parse().map_err(|_| {
            Error::parse(path, idx + 1, format!("'{}' is not a row index", line))
        })?;
        if row >= ds.rows() {
            return Err(Error::parse(
                path,
                idx + 1,
                format!("row index {} out of range (dataset has {} rows)", row, ds.rows()),
            ));
        }
        if !test_file_rows.insert(row) {
            return Err(Error::parse(path, idx + 1, format!("duplicate row index {}", row)));
        }
    }
    split_by_file_rows(ds, &test_file_rows, 0)
}

/// Splits `ds` into train/test by 0-based source-file row indices.
pub fn split_by_file_rows(
    ds: &Dataset,
    test_file_rows: &BTreeSet<usize>,
    seed: u64,
) -> Result<DatasetSplit> {
    if test_file_rows.is_empty() {
        return Err(Error::Invalid("split selects no test rows".into()));
    }
    if test_file_rows.len() == ds.rows() {
        return Err(Error::Invalid("split leaves no training rows".into()));
    }

    let mut train_rows = Vec::new();
    let mut train_labels = Vec::new();
    let mut train_ids = ds.query_ids().map(|_| Vec::new());
    let mut test_rows = Vec::new();
    let mut test_labels = Vec::new();
    let mut test_ids = ds.query_ids().map(|_| Vec::new());

    // Walk in source-file order so both halves keep the file's row order.
    let mut by_file: Vec<(usize, usize)> = ds
        .file_order()
        .iter()
        .enumerate()
        .map(|(internal, &file)| (file, internal))
        .collect();
    by_file.sort_unstable();

    for (file_row, internal) in by_file {
        let is_test = test_file_rows.contains(&file_row);
        if is_test && ds.label(internal).is_none() {
            return Err(Error::Invalid(format!(
                "test row {} is unlabeled; test sets must be fully labeled",
                file_row
            )));
        }
        let (rows, labels, ids) = if is_test {
            (&mut test_rows, &mut test_labels, &mut test_ids)
        } else {
            (&mut train_rows, &mut train_labels, &mut train_ids)
        };
        rows.push(ds.row(internal).to_vec());
        labels.push(ds.label(internal));
        if let (Some(out), Some(all)) = (ids.as_mut(), ds.query_ids()) {
            out.push(all[internal]);
        }
    }

    let costs = Some(ds.feature_costs().to_vec());
    let names = Some(ds.feature_names().to_vec());
    let train = Dataset::new(train_rows, train_labels, costs.clone(), names.clone(), train_ids)?;
    let test = Dataset::new(test_rows, test_labels, costs, names, test_ids)?;
    Ok(DatasetSplit { train, test, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_and_reorders_labeled_first() {
        let f = write_temp("label,f1,f2\n,0.5,1.0\n1,2.0,3.0\n-1,4.0,5.0\n,6.0,7.0\n");
        let ds = load_dataset(f.path(), None).unwrap();
        assert_eq!(ds.rows(), 4);
        assert_eq!(ds.labeled_count(), 2);
        assert_eq!(ds.unlabeled_count(), 2);
        // Labeled rows come first, in file order; -1 remapped to 0.
        assert_eq!(ds.labels(), &[1, 0]);
        assert_eq!(ds.row(0), &[2.0, 3.0]);
        assert_eq!(ds.row(1), &[4.0, 5.0]);
        assert_eq!(ds.row(2), &[0.5, 1.0]);
        assert_eq!(ds.row(3), &[6.0, 7.0]);
        assert_eq!(ds.file_order(), &[1, 2, 0, 3]);
        // Default costs are all ones.
        assert_eq!(ds.feature_costs(), &[1.0, 1.0]);
    }

    #[test]
    fn accepts_qid_column_and_plus_one_labels() {
        let f = write_temp("label,qid,f1\n+1,7,0.0\n0,7,1.0\n,9,2.0\n");
        let ds = load_dataset(f.path(), None).unwrap();
        assert_eq!(ds.labels(), &[1, 0]);
        assert_eq!(ds.query_ids().unwrap(), &[7, 7, 9]);
    }

    #[test]
    fn rejects_bad_label_with_line_number() {
        let f = write_temp("label,f1\n1,0.0\n2,1.0\n");
        let err = load_dataset(f.path(), None).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("expected parse error, got {:?}", other),
        }
    }

    #[test]
    fn rejects_ragged_row() {
        let f = write_temp("label,f1,f2\n1,0.0\n");
        assert!(matches!(load_dataset(f.path(), None), Err(Error::Parse { .. })));
    }

    #[test]
    fn rejects_missing_feature_value() {
        let f = write_temp("label,f1,f2\n1,,2.0\n");
        let err = load_dataset(f.path(), None).unwrap_err();
        assert!(err.to_string().contains("missing values"));
    }

    #[test]
    fn cost_file_numeric_row() {
        let data = write_temp("label,f1,f2\n1,0.0,1.0\n");
        let costs = write_temp("0.25,4.0\n");
        let ds = load_dataset(data.path(), Some(costs.path())).unwrap();
        assert_eq!(ds.feature_costs(), &[0.25, 4.0]);
    }

    #[test]
    fn cost_file_named_pairs_any_order() {
        let data = write_temp("label,f1,f2\n1,0.0,1.0\n");
        let costs = write_temp("f2,4.0\nf1,0.25\n");
        let ds = load_dataset(data.path(), Some(costs.path())).unwrap();
        assert_eq!(ds.feature_costs(), &[0.25, 4.0]);
    }

    #[test]
    fn cost_file_missing_feature_is_an_error() {
        let data = write_temp("label,f1,f2\n1,0.0,1.0\n");
        let costs = write_temp("f1,0.25\n");
        assert!(load_dataset(data.path(), Some(costs.path())).is_err());
    }

    #[test]
    fn cost_file_rejects_negative() {
        let data = write_temp("label,f1\n1,0.0\n");
        let costs = write_temp("-1.0\n");
        assert!(load_dataset(data.path(), Some(costs.path())).is_err());
    }

    #[test]
    fn save_load_round_trips_exactly() {
        let f = write_temp("label,qid,f1,f2\n1,3,0.1,0.2\n,4,0.30000000000000004,1e-300\n-1,5,-0.0,2.5\n");
        let ds = load_dataset(f.path(), None).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        save_dataset(&ds, out.path()).unwrap();
        let back = load_dataset(out.path(), None).unwrap();
        // The saved file is labeled-first, so only the original-file order
        // bookkeeping may differ; every value must survive bit-for-bit.
        assert_eq!(ds.features(), back.features());
        assert_eq!(ds.labels(), back.labels());
        assert_eq!(ds.query_ids(), back.query_ids());
        assert_eq!(ds.feature_names(), back.feature_names());
        assert_eq!(ds.fingerprint(), back.fingerprint());
        // Saving the reloaded dataset reproduces the bytes.
        let out2 = tempfile::NamedTempFile::new().unwrap();
        save_dataset(&back, out2.path()).unwrap();
        assert_eq!(
            std::fs::read(out.path()).unwrap(),
            std::fs::read(out2.path()).unwrap()
        );
    }

    #[test]
    fn split_file_selects_test_rows_by_file_index() {
        let f = write_temp("label,f1\n1,0.0\n,1.0\n0,2.0\n1,3.0\n");
        let ds = load_dataset(f.path(), None).unwrap();
        let split = write_temp("3\n0\n");
        let split = load_split(&ds, split.path()).unwrap();
        assert_eq!(split.test.rows(), 2);
        assert_eq!(split.test.labeled_count(), 2);
        assert_eq!(split.test.row(0), &[0.0]);
        assert_eq!(split.test.row(1), &[3.0]);
        assert_eq!(split.train.rows(), 2);
        assert_eq!(split.train.labeled_count(), 1);
    }

    #[test]
    fn split_rejects_unlabeled_test_row() {
        let f = write_temp("label,f1\n1,0.0\n,1.0\n");
        let ds = load_dataset(f.path(), None).unwrap();
        let split = write_temp("1\n");
        assert!(load_split(&ds, split.path()).is_err());
    }

    #[test]
    fn split_rejects_duplicate_and_out_of_range() {
        let f = write_temp("label,f1\n1,0.0\n0,1.0\n");
        let ds = load_dataset(f.path(), None).unwrap();
        for content in ["0\n0\n", "5\n"] {
            let split = write_temp(content);
            assert!(load_split(&ds, split.path()).is_err());
        }
    }

    #[test]
    fn subsample_is_deterministic_and_stable() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let labels: Vec<Option<u8>> = (0..10).map(|i| Some((i % 2) as u8)).collect();
        let ds = Dataset::new(rows, labels, None, None, None).unwrap();
        let a = ds.subsample_labeled(3, 42, false).unwrap();
        let b = ds.subsample_labeled(3, 42, false).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.labeled_count(), 3);
        assert_eq!(a.rows(), 10);
        // Kept labels still match the source rows they came from.
        for i in 0..a.labeled_count() {
            let src = a.row(i)[0] as usize;
            assert_eq!(a.label(i).unwrap(), (src % 2) as u8);
        }
        // Relative order within the labeled block follows source order.
        let kept: Vec<f64> = (0..a.labeled_count()).map(|i| a.row(i)[0]).collect();
        let mut sorted = kept.clone();
        sorted.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(kept, sorted);
        let different = ds.subsample_labeled(3, 43, false).unwrap();
        assert!(a != different || a.labels() == different.labels());
    }

    #[test]
    fn subsample_by_query_keeps_whole_queries() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let labels = vec![Some(1), Some(0), Some(1), Some(0), Some(1), Some(0)];
        let qids = vec![1, 1, 2, 2, 3, 3];
        let ds = Dataset::new(rows, labels, None, None, Some(qids)).unwrap();
        let sub = ds.subsample_labeled(2, 0, true).unwrap();
        assert_eq!(sub.labeled_count(), 4);
        let ids = sub.query_ids().unwrap();
        let kept: BTreeSet<u64> = ids[..4].iter().copied().collect();
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn fingerprint_tracks_content() {
        let f = write_temp("label,f1\n1,0.0\n0,1.0\n");
        let ds = load_dataset(f.path(), None).unwrap();
        let same = load_dataset(f.path(), None).unwrap();
        assert_eq!(ds.fingerprint(), same.fingerprint());
        let g = write_temp("label,f1\n1,0.0\n0,1.5\n");
        let other = load_dataset(g.path(), None).unwrap();
        assert_ne!(ds.fingerprint(), other.fingerprint());
        assert_eq!(ds.fingerprint().len(), 64);
    }
}
