//! Brute-force reference implementations, kept independent of the library
//! code paths they check.

use std::collections::{BTreeSet, HashMap, HashSet};

/// Euclidean projection onto the probability simplex by exhaustive support
/// enumeration; exact for small dimensions.
pub fn simplex_projection(z: &[f64]) -> Vec<f64> {
    let n = z.len();
    assert!(n >= 1 && n <= 20, "oracle is exponential in dimension");
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let sum: f64 = support.iter().map(|&i| z[i]).sum();
        let tau = (sum - 1.0) / support.len() as f64;
        let mut p = vec![0.0f64; n];
        let mut feasible = true;
        for &i in &support {
            let v = z[i] - tau;
            if v < -1e-12 {
                feasible = false;
                break;
            }
            p[i] = v.max(0.0);
        }
        if !feasible {
            continue;
        }
        let objective: f64 = p.iter().zip(z).map(|(pi, zi)| (pi - zi) * (pi - zi)).sum();
        if best.as_ref().map_or(true, |(obj, _)| objective < *obj) {
            best = Some((objective, p));
        }
    }
    best.expect("full support is always feasible").1
}

/// Population covariance of the rows followed by a cyclic Jacobi
/// eigendecomposition. Returns eigenvalues in non-increasing order and the
/// matching eigenvectors under the positive-largest-entry sign convention.
pub fn pca_eigen(rows: &[Vec<f32>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = rows.len();
    let d = rows[0].len();
    let mut mean = vec![0.0f64; d];
    for row in rows {
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += f64::from(v);
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut a = vec![vec![0.0f64; d]; d];
    for row in rows {
        let centered: Vec<f64> = row
            .iter()
            .zip(&mean)
            .map(|(&v, m)| f64::from(v) - m)
            .collect();
        for i in 0..d {
            for j in 0..d {
                a[i][j] += centered[i] * centered[j];
            }
        }
    }
    for r in &mut a {
        for v in r.iter_mut() {
            *v /= n as f64;
        }
    }

    // cyclic Jacobi sweeps
    let mut v = vec![vec![0.0f64; d]; d];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for i in 0..d {
            for j in (i + 1)..d {
                off += a[i][j] * a[i][j];
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..d - 1 {
            for q in (p + 1)..d {
                if a[p][q].abs() < 1e-18 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&x, &y| a[y][y].partial_cmp(&a[x][x]).unwrap());
    let mut values = Vec::with_capacity(d);
    let mut vectors = Vec::with_capacity(d);
    for &idx in &order {
        values.push(a[idx][idx].max(0.0));
        let mut vec_d: Vec<f64> = (0..d).map(|k| v[k][idx]).collect();
        let mut max_pos = 0;
        for (j, val) in vec_d.iter().enumerate() {
            if val.abs() > vec_d[max_pos].abs() {
                max_pos = j;
            }
        }
        if vec_d[max_pos] < 0.0 {
            for x in &mut vec_d {
                *x = -*x;
            }
        }
        vectors.push(vec_d);
    }
    (values, vectors)
}

/// Greedy BPE merges by full recount each iteration: highest pair count
/// wins, ties break to the lexicographically smallest pair, candidates
/// colliding with an existing token string are skipped. Pair counts
/// include overlapping occurrences; rewriting is left-to-right without
/// overlap. Returns each merge with its selection-time frequency.
pub fn bpe_merges<S: AsRef<str>>(
    lines: &[S],
    marker: char,
    specials: &[String],
    n_merges: usize,
) -> Vec<((String, String), u64)> {
    let mut word_index: HashMap<String, usize> = HashMap::new();
    let mut words: Vec<(Vec<String>, u64)> = Vec::new();
    for line in lines {
        for word in line.as_ref().split_whitespace() {
            if let Some(&i) = word_index.get(word) {
                words[i].1 += 1;
            } else {
                let mut syms = vec![marker.to_string()];
                syms.extend(word.chars().map(|c| c.to_string()));
                word_index.insert(word.to_string(), words.len());
                words.push((syms, 1));
            }
        }
    }

    let alphabet: BTreeSet<String> = words
        .iter()
        .flat_map(|(syms, _)| syms.iter().cloned())
        .collect();
    let mut existing: HashSet<String> = specials.iter().cloned().collect();
    existing.extend(alphabet);

    let mut merges = Vec::new();
    for _ in 0..n_merges {
        let mut counts: HashMap<(String, String), u64> = HashMap::new();
        for (syms, count) in &words {
            for w in syms.windows(2) {
                *counts
                    .entry((w[0].clone(), w[1].clone()))
                    .or_insert(0) += count;
            }
        }
        let mut best: Option<((String, String), u64)> = None;
        for (pair, &count) in &counts {
            if existing.contains(&format!("{}{}", pair.0, pair.1)) {
                continue;
            }
            let better = match &best {
                None => true,
                Some((_, best_count)) if count != *best_count => count > *best_count,
                Some((best_pair, _)) => pair < best_pair,
            };
            if better {
                best = Some((pair.clone(), count));
            }
        }
        let Some((pair, count)) = best else { break };
        existing.insert(format!("{}{}", pair.0, pair.1));
        let merged = format!("{}{}", pair.0, pair.1);
        for (syms, _) in &mut words {
            let mut out = Vec::with_capacity(syms.len());
            let mut i = 0;
            while i < syms.len() {
                if i + 1 < syms.len() && syms[i] == pair.0 && syms[i + 1] == pair.1 {
                    out.push(merged.clone());
                    i += 2;
                } else {
                    out.push(syms[i].clone());
                    i += 1;
                }
            }
            *syms = out;
        }
        merges.push((pair, count));
    }
    merges
}
