//! Embedding-space diagnostics: per-group mean/std summaries of the token
//! embedding distribution and exact PCA for 2-D atlases.
//!
//! Standard deviations are population (divide by n) and per-dimension, so a
//! group summary doubles as a diagonal Gaussian to sample from. PCA runs an
//! exact eigendecomposition of the d x d covariance; a fixed sign convention
//! (largest-magnitude component entry positive) keeps projections
//! bit-reproducible across runs.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lexicon::{PositionClass, ScriptClass, TokenMetadata};

/// Dense row-per-token embedding matrix (row i = embedding of token id i).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    data: Vec<f32>,
    n: usize,
    d: usize,
}

impl EmbeddingMatrix {
    pub fn zeros(n: usize, d: usize) -> Self {
        EmbeddingMatrix {
            data: vec![0.0; n * d],
            n,
            d,
        }
    }

    pub fn from_flat(data: Vec<f32>, n: usize, d: usize) -> Result<Self> {
        if data.len() != n * d {
            return Err(Error::DimMismatch(format!(
                "flat data has {} entries, expected {n} x {d}",
                data.len()
            )));
        }
        Ok(EmbeddingMatrix { data, n, d })
    }

    pub fn from_rows(rows: Vec<Vec<f32>>) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(n * d);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::DimMismatch(format!(
                    "row {i} has {} entries, expected {d}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(EmbeddingMatrix { data, n, d })
    }

    /// Number of rows (vocabulary size).
    pub fn rows(&self) -> usize {
        self.n
    }

    /// Embedding dimension.
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn set_row(&mut self, i: usize, values: &[f32]) {
        self.row_mut(i).copy_from_slice(values);
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Index of the first non-finite entry, if any.
    pub fn find_non_finite(&self) -> Option<(usize, usize)> {
        self.data
            .iter()
            .position(|v| !v.is_finite())
            .map(|flat| (flat / self.d, flat % self.d))
    }
}

/// How tokens are grouped for sub-distribution statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    Script,
    ScriptPosition,
}

/// Identity of one statistics group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroupKey {
    pub script: ScriptClass,
    pub position: Option<PositionClass>,
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.position {
            Some(p) => write!(f, "{}/{}", self.script, p),
            None => write!(f, "{}", self.script),
        }
    }
}

/// Per-dimension mean and population standard deviation of one group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupStats {
    pub key: GroupKey,
    pub count: usize,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

fn mean_std_of_rows(matrix: &EmbeddingMatrix, ids: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let d = matrix.dim();
    let n = ids.len() as f64;
    let mut mean = vec![0.0f64; d];
    for &i in ids {
        for (m, &v) in mean.iter_mut().zip(matrix.row(i)) {
            *m += f64::from(v);
        }
    }
    for m in &mut mean {
        *m /= n;
    }
    let mut var = vec![0.0f64; d];
    for &i in ids {
        for ((s, &v), m) in var.iter_mut().zip(matrix.row(i)).zip(&mean) {
            let dv = f64::from(v) - m;
            *s += dv * dv;
        }
    }
    let std = var.into_iter().map(|s| (s / n).sqrt()).collect();
    (mean, std)
}

/// Group the classified tokens and summarize each group's rows.
///
/// Groups are formed from tokens actually present, so every group has
/// `count >= 1`; the output is sorted by group name for stable iteration.
pub fn group_stats(
    matrix: &EmbeddingMatrix,
    meta: &[TokenMetadata],
    grouping: Grouping,
) -> Result<Vec<GroupStats>> {
    if matrix.rows() != meta.len() {
        return Err(Error::DimMismatch(format!(
            "matrix has {} rows but metadata covers {} tokens",
            matrix.rows(),
            meta.len()
        )));
    }
    let mut members: HashMap<GroupKey, Vec<usize>> = HashMap::new();
    for m in meta {
        let key = GroupKey {
            script: m.script,
            position: match grouping {
                Grouping::Script => None,
                Grouping::ScriptPosition => Some(m.position),
            },
        };
        members.entry(key).or_default().push(m.id as usize);
    }
    let mut stats: Vec<GroupStats> = members
        .into_iter()
        .map(|(key, ids)| {
            let (mean, std) = mean_std_of_rows(matrix, &ids);
            GroupStats {
                key,
                count: ids.len(),
                mean,
                std,
            }
        })
        .collect();
    stats.sort_by(|a, b| a.key.to_string().cmp(&b.key.to_string()));
    Ok(stats)
}

/// Mean/std over all rows, for fallbacks and scale matching.
pub fn global_stats(matrix: &EmbeddingMatrix) -> (Vec<f64>, Vec<f64>) {
    let ids: Vec<usize> = (0..matrix.rows()).collect();
    mean_std_of_rows(matrix, &ids)
}

#[derive(Serialize)]
struct GroupStatsRecord<'a> {
    group: String,
    count: usize,
    mean: &'a [f64],
    std: &'a [f64],
}

/// Export group summaries as a JSON array of `{group, count, mean, std}`.
pub fn write_group_stats_json(stats: &[GroupStats], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let records: Vec<GroupStatsRecord> = stats
        .iter()
        .map(|s| GroupStatsRecord {
            group: s.key.to_string(),
            count: s.count,
            mean: &s.mean,
            std: &s.std,
        })
        .collect();
    let json = serde_json::to_string_pretty(&records)
        .map_err(|e| Error::format(path, e.to_string()))?;
    std::fs::write(path, json).map_err(|e| Error::io(path, e))
}

/// Fitted PCA basis: orthonormal components, eigenvalues, and the centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    components: Vec<f64>,
    pub explained_variance: Vec<f64>,
    pub center: Vec<f64>,
    k: usize,
    d: usize,
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn component(&self, j: usize) -> &[f64] {
        &self.components[j * self.d..(j + 1) * self.d]
    }
}

/// Exact PCA via eigendecomposition of the centered covariance.
///
/// Eigenvalues (population convention) come out in non-increasing order;
/// tiny negative values from rank deficiency are clamped to zero rather
/// than reported as errors. Requires `n >= 2` and `1 <= k <= min(n, d)`.
pub fn fit_pca(matrix: &EmbeddingMatrix, k: usize) -> Result<PcaModel> {
    let (n, d) = (matrix.rows(), matrix.dim());
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "PCA needs at least 2 rows, got {n}"
        )));
    }
    if k == 0 || k > n.min(d) {
        return Err(Error::InvalidArgument(format!(
            "k = {k} outside [1, min(n, d)] = [1, {}]",
            n.min(d)
        )));
    }

    let mut center = vec![0.0f64; d];
    for i in 0..n {
        for (c, &v) in center.iter_mut().zip(matrix.row(i)) {
            *c += f64::from(v);
        }
    }
    for c in &mut center {
        *c /= n as f64;
    }

    // upper-triangle accumulation of the covariance, mirrored afterwards
    let mut cov = DMatrix::<f64>::zeros(d, d);
    let mut centered = vec![0.0f64; d];
    for i in 0..n {
        for ((c, &v), mu) in centered.iter_mut().zip(matrix.row(i)).zip(&center) {
            *c = f64::from(v) - mu;
        }
        for a in 0..d {
            let ca = centered[a];
            for b in a..d {
                cov[(a, b)] += ca * centered[b];
            }
        }
    }
    let n_f = n as f64;
    for a in 0..d {
        for b in a..d {
            let v = cov[(a, b)] / n_f;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }

    let eigen = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[b]
            .partial_cmp(&eigen.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut components = Vec::with_capacity(k * d);
    let mut explained = Vec::with_capacity(k);
    for &idx in order.iter().take(k) {
        explained.push(eigen.eigenvalues[idx].max(0.0));
        let col = eigen.eigenvectors.column(idx);
        let mut vec_d: Vec<f64> = col.iter().copied().collect();
        let mut max_pos = 0;
        for (j, v) in vec_d.iter().enumerate() {
            if v.abs() > vec_d[max_pos].abs() {
                max_pos = j;
            }
        }
        if vec_d[max_pos] < 0.0 {
            for v in &mut vec_d {
                *v = -*v;
            }
        }
        components.extend_from_slice(&vec_d);
    }

    Ok(PcaModel {
        components,
        explained_variance: explained,
        center,
        k,
        d,
    })
}

/// Project rows onto the fitted basis: `(rows - center) . components^T`.
pub fn project(matrix: &EmbeddingMatrix, pca: &PcaModel) -> Result<Vec<Vec<f64>>> {
    if matrix.dim() != pca.dim() {
        return Err(Error::DimMismatch(format!(
            "matrix dim {} does not match PCA dim {}",
            matrix.dim(),
            pca.dim()
        )));
    }
    let mut out = Vec::with_capacity(matrix.rows());
    for i in 0..matrix.rows() {
        let row = matrix.row(i);
        let mut coords = Vec::with_capacity(pca.k());
        for j in 0..pca.k() {
            let comp = pca.component(j);
            let mut acc = 0.0f64;
            for ((&v, mu), c) in row.iter().zip(&pca.center).zip(comp) {
                acc += (f64::from(v) - mu) * c;
            }
            coords.push(acc);
        }
        out.push(coords);
    }
    Ok(out)
}

/// Write atlas rows as CSV: `id,token,script,position,pc1..pck`.
///
/// `k` fixes the header width so an empty selection still yields a valid
/// header-only file.
pub fn write_atlas_csv(
    coords: &[Vec<f64>],
    meta: &[TokenMetadata],
    k: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    if coords.len() != meta.len() {
        return Err(Error::DimMismatch(format!(
            "{} coordinate rows vs {} metadata rows",
            coords.len(),
            meta.len()
        )));
    }
    let mut writer =
        csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let mut header = vec![
        "id".to_string(),
        "token".to_string(),
        "script".to_string(),
        "position".to_string(),
    ];
    for j in 1..=k {
        header.push(format!("pc{j}"));
    }
    writer
        .write_record(&header)
        .map_err(|e| Error::format(path, e.to_string()))?;
    for (m, row) in meta.iter().zip(coords) {
        if row.len() != k {
            return Err(Error::DimMismatch(format!(
                "coordinate row for token {} has {} entries, expected {k}",
                m.id,
                row.len()
            )));
        }
        let mut record = vec![
            m.id.to_string(),
            m.token.clone(),
            m.script.to_string(),
            m.position.to_string(),
        ];
        for v in row {
            record.push(format!("{v}"));
        }
        writer
            .write_record(&record)
            .map_err(|e| Error::format(path, e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

const SVG_PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7",
    "#9c755f", "#bab0ac",
];

/// Minimal SVG scatter of the first two coordinates, one mark per row,
/// colored by script.
pub fn write_atlas_svg(
    coords: &[Vec<f64>],
    meta: &[TokenMetadata],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    if coords.len() != meta.len() {
        return Err(Error::DimMismatch(format!(
            "{} coordinate rows vs {} metadata rows",
            coords.len(),
            meta.len()
        )));
    }
    let (width, height, margin) = (720.0, 720.0, 24.0);
    let (mut min_x, mut max_x, mut min_y, mut max_y) = (0.0f64, 1.0f64, 0.0f64, 1.0f64);
    for row in coords {
        let x = row.first().copied().unwrap_or(0.0);
        let y = row.get(1).copied().unwrap_or(0.0);
        min_x = min_x.min(x);
        max_x = max_x.max(x);
        min_y = min_y.min(y);
        max_y = max_y.max(y);
    }
    let scale_x = (width - 2.0 * margin) / (max_x - min_x).max(f64::EPSILON);
    let scale_y = (height - 2.0 * margin) / (max_y - min_y).max(f64::EPSILON);

    let mut scripts: Vec<String> = meta.iter().map(|m| m.script.to_string()).collect();
    scripts.sort();
    scripts.dedup();
    let color_of: HashMap<&str, &str> = scripts
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_str(), SVG_PALETTE[i % SVG_PALETTE.len()]))
        .collect();

    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    )
    .map_err(|e| Error::io(path, e))?;
    for (m, row) in meta.iter().zip(coords) {
        let x = row.first().copied().unwrap_or(0.0);
        let y = row.get(1).copied().unwrap_or(0.0);
        let cx = margin + (x - min_x) * scale_x;
        // SVG y axis grows downward
        let cy = height - margin - (y - min_y) * scale_y;
        let color = color_of
            .get(m.script.to_string().as_str())
            .copied()
            .unwrap_or("#888888");
        writeln!(
            w,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="1.8" fill="{color}" fill-opacity="0.6"/>"#
        )
        .map_err(|e| Error::io(path, e))?;
    }
    writeln!(w, "</svg>").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
