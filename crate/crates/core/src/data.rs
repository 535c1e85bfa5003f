//! Problem construction: the synthetic grid-classification generator,
//! LIBSVM-format ingestion, edge-list files and a thresholded-correlation
//! edge builder for graph-guided problems.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{DenseVector, SparseColumnMatrix};

/// A labeled binary-classification dataset; samples are columns of the
/// design matrix and labels live in {-1, +1}.
#[derive(Clone, Debug)]
pub struct Dataset {
    z: SparseColumnMatrix,
    labels: Vec<f64>,
}

impl Dataset {
    pub fn new(z: SparseColumnMatrix, labels: Vec<f64>) -> Self {
        assert_eq!(z.cols(), labels.len(), "one label per column");
        assert!(
            labels.iter().all(|&y| y == 1.0 || y == -1.0),
            "labels must be in {{-1, +1}}"
        );
        Dataset { z, labels }
    }

    pub fn design(&self) -> &SparseColumnMatrix {
        &self.z
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn num_samples(&self) -> usize {
        self.z.cols()
    }

    pub fn feature_dim(&self) -> usize {
        self.z.rows()
    }
}

/// Generates the grid classification problem: p = grid_rows·grid_cols
/// standard-normal features per sample, a ground-truth weight grid whose
/// first column is standard normal and the rest zero (column-major
/// vectorization), and labels y = sign(zᵀw₀ + ε) with ε ~ N(0, noise_sd²).
/// sign(0) counts as +1.
pub fn gen_synthetic_grid<R: Rng>(
    grid_rows: usize,
    grid_cols: usize,
    n: usize,
    noise_sd: f64,
    rng: &mut R,
) -> (Dataset, DenseVector) {
    assert!(grid_rows > 0 && grid_cols > 0 && n > 0);
    let p = grid_rows * grid_cols;
    let mut w0 = vec![0.0; p];
    for v in w0.iter_mut().take(grid_rows) {
        *v = rng.sample(StandardNormal);
    }
    let data = gen_labeled_samples(&w0, n, noise_sd, rng);
    (data, w0)
}

/// Draws n standard-normal samples labeled y = sign(zᵀw₀ + ε) by the given
/// weight vector; used for test sets that must share the generator of their
/// training set.
pub fn gen_labeled_samples<R: Rng>(w0: &[f64], n: usize, noise_sd: f64, rng: &mut R) -> Dataset {
    assert!(!w0.is_empty() && n > 0);
    let p = w0.len();
    let mut columns = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let mut margin = 0.0;
        let col: Vec<(usize, f64)> = (0..p)
            .filter_map(|j| {
                let v: f64 = rng.sample(StandardNormal);
                margin += v * w0[j];
                (v != 0.0).then_some((j, v))
            })
            .collect();
        let noise: f64 = rng.sample::<f64, _>(StandardNormal) * noise_sd;
        labels.push(if margin + noise >= 0.0 { 1.0 } else { -1.0 });
        columns.push(col);
    }
    Dataset::new(SparseColumnMatrix::from_columns(p, columns), labels)
}

/// Reads a LIBSVM-format file ("label idx:val ...", 1-based indices). The
/// feature dimension is the largest index seen.
///
/// Label encodings {-1,+1}, {0,1} and {1,2} are accepted; {0,1} maps 0→-1,
/// and {1,2} maps 1→+1, 2→-1.
pub fn read_libsvm<P: AsRef<Path>>(path: P) -> Result<Dataset> {
    read_libsvm_with_dim(path, None)
}

/// Like [`read_libsvm`] but with an explicit feature dimension, which must
/// be at least the largest index in the file.
pub fn read_libsvm_with_dim<P: AsRef<Path>>(path: P, dim: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut raw_labels: Vec<f64> = Vec::new();
    let mut samples: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_index = 0usize;

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let mut tokens = line.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue; // blank line
        };
        let label: f64 = label_tok
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad label '{}'", label_tok)))?;
        let mut entries: Vec<(usize, f64)> = Vec::new();
        for tok in tokens {
            let (idx_s, val_s) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, format!("expected idx:val, got '{}'", tok)))?;
            let idx: usize = idx_s
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad feature index '{}'", idx_s)))?;
            if idx == 0 {
                return Err(parse_err(lineno, "feature indices are 1-based".into()));
            }
            let val: f64 = val_s
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad feature value '{}'", val_s)))?;
            if !val.is_finite() {
                return Err(parse_err(lineno, format!("non-finite value '{}'", val_s)));
            }
            max_index = max_index.max(idx);
            if val != 0.0 {
                entries.push((idx - 1, val));
            }
        }
        entries.sort_by_key(|&(i, _)| i);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(parse_err(lineno, "duplicate feature index".into()));
        }
        raw_labels.push(label);
        samples.push(entries);
    }

    if samples.is_empty() {
        return Err(parse_err(0, "empty dataset".into()));
    }
    let p = match dim {
        Some(d) => {
            if d < max_index {
                return Err(Error::InvalidConfig(format!(
                    "requested dimension {} is below the largest index {}",
                    d, max_index
                )));
            }
            d
        }
        None => max_index,
    };

    let labels = map_labels(&raw_labels).ok_or_else(|| {
        parse_err(
            0,
            "unsupported label encoding (want {-1,+1}, {0,1} or {1,2})".into(),
        )
    })?;
    Ok(Dataset::new(
        SparseColumnMatrix::from_columns(p, samples),
        labels,
    ))
}

fn map_labels(raw: &[f64]) -> Option<Vec<f64>> {
    if raw.iter().all(|&y| y == 1.0 || y == -1.0) {
        Some(raw.to_vec())
    } else if raw.iter().all(|&y| y == 0.0 || y == 1.0) {
        Some(
            raw.iter()
                .map(|&y| if y == 0.0 { -1.0 } else { 1.0 })
                .collect(),
        )
    } else if raw.iter().all(|&y| y == 1.0 || y == 2.0) {
        Some(
            raw.iter()
                .map(|&y| if y == 1.0 { 1.0 } else { -1.0 })
                .collect(),
        )
    } else {
        None
    }
}

/// Writes a dataset in LIBSVM format (round-trip counterpart of
/// [`read_libsvm`]).
pub fn write_libsvm<P: AsRef<Path>>(data: &Dataset, path: P) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = String::new();
    for i in 0..data.num_samples() {
        out.push_str(&format!("{}", data.labels()[i]));
        for &(r, v) in data.design().column(i) {
            out.push_str(&format!(" {}:{}", r + 1, v));
        }
        out.push('\n');
    }
    let mut file = fs::File::create(path).map_err(io_err)?;
    file.write_all(out.as_bytes()).map_err(io_err)
}

/// Reads an edge-list file: one "i j" pair per line, zero-based, with '#'
/// comments and blank lines allowed.
pub fn read_edge_list<P: AsRef<Path>>(path: P) -> Result<Vec<(usize, usize)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut it = body.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<usize> {
            tok.and_then(|t| t.parse().ok())
                .ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    message: format!("expected 'i j', got '{}'", body),
                })
        };
        let i = parse(it.next())?;
        let j = parse(it.next())?;
        if it.next().is_some() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: format!("trailing tokens after 'i j' in '{}'", body),
            });
        }
        edges.push((i, j));
    }
    Ok(edges)
}

/// Builds an edge list from pairwise feature correlations: all pairs i < j
/// with |Pearson correlation| >= threshold, strongest first, truncated to
/// `max_edges` (ties broken lexicographically). Zero-variance features are
/// excluded with a warning on stderr.
pub fn build_edges_by_correlation(
    data: &Dataset,
    threshold: f64,
    max_edges: usize,
) -> Vec<(usize, usize)> {
    assert!(
        threshold > 0.0 && threshold < 1.0,
        "threshold must lie in (0, 1)"
    );
    let p = data.feature_dim();
    let n = data.num_samples() as f64;

    // gather rows (feature-major view) once
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p];
    for i in 0..data.num_samples() {
        for &(r, v) in data.design().column(i) {
            rows[r].push((i, v));
        }
    }
    let sums: Vec<f64> = rows
        .iter()
        .map(|row| row.iter().map(|&(_, v)| v).sum())
        .collect();
    let sq_sums: Vec<f64> = rows
        .iter()
        .map(|row| row.iter().map(|&(_, v)| v * v).sum())
        .collect();
    let variances: Vec<f64> = (0..p).map(|i| sq_sums[i] - sums[i] * sums[i] / n).collect();
    let usable: Vec<bool> = (0..p)
        .map(|i| {
            let ok = variances[i] > 1e-12 * (1.0 + sq_sums[i]);
            if !ok {
                eprintln!(
                    "warning: feature {} has zero variance; excluded from edges",
                    i
                );
            }
            ok
        })
        .collect();

    let mut scored: Vec<(f64, usize, usize)> = Vec::new();
    for i in 0..p {
        if !usable[i] {
            continue;
        }
        for j in (i + 1)..p {
            if !usable[j] {
                continue;
            }
            // Σ x_i x_j over the intersection of the two sparse rows
            let (mut a, mut b, mut cross) = (0, 0, 0.0);
            while a < rows[i].len() && b < rows[j].len() {
                match rows[i][a].0.cmp(&rows[j][b].0) {
                    std::cmp::Ordering::Less => a += 1,
                    std::cmp::Ordering::Greater => b += 1,
                    std::cmp::Ordering::Equal => {
                        cross += rows[i][a].1 * rows[j][b].1;
                        a += 1;
                        b += 1;
                    }
                }
            }
            let cov = cross - sums[i] * sums[j] / n;
            let corr = cov / (variances[i] * variances[j]).sqrt();
            if corr.abs() >= threshold {
                scored.push((corr.abs(), i, j));
            }
        }
    }
    scored.sort_by(|x, y| {
        y.0.partial_cmp(&x.0)
            .unwrap()
            .then(x.1.cmp(&y.1))
            .then(x.2.cmp(&y.2))
    });
    scored.truncate(max_edges);
    scored.into_iter().map(|(_, i, j)| (i, j)).collect()
}
