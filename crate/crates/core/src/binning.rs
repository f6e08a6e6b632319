//! Bin construction: equal-probability and equal-size edges, the
//! kappa-interpolated family between them, bin probabilities and counts,
//! the expected-count admissibility rule, histogram-style merging, and
//! snapping of ideal edges onto pre-binned data.

use serde::{Deserialize, Serialize};

use crate::distributions::Distribution;
use crate::error::{Error, Result};

/// Smallest expected count a bin may have.
pub const MIN_EXPECTED: f64 = 5.0;

/// Options for [`equal_size_edges`] on unbounded supports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EqualSizeOptions {
    /// Tail probability cut from each unbounded side to form the working range.
    pub tail_prob: f64,
}

impl Default for EqualSizeOptions {
    fn default() -> Self {
        Self { tail_prob: 0.005 }
    }
}

/// A concrete binning: `k` bins with their edges and null probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinningScheme {
    pub k: usize,
    pub kappa: f64,
    pub edges: Vec<f64>,
    pub null_probs: Vec<f64>,
}

impl BinningScheme {
    pub fn new(kappa: f64, edges: Vec<f64>, null_probs: Vec<f64>) -> Result<Self> {
        check_edges(&edges)?;
        let k = edges.len() - 1;
        if k < 2 {
            return Err(Error::Edges(format!("need at least 2 bins, got {k}")));
        }
        if null_probs.len() != k {
            return Err(Error::Edges("probability vector length differs from bin count".into()));
        }
        let sum: f64 = null_probs.iter().sum();
        if null_probs.iter().any(|p| !(*p > 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Edges(format!(
                "null probabilities must be positive and sum to 1 (sum = {sum})"
            )));
        }
        Ok(Self {
            k,
            kappa,
            edges,
            null_probs,
        })
    }

    /// The kappa-interpolated scheme with `k` bins under `null`.
    pub fn interpolated(null: &Distribution, k: usize, kappa: f64, opts: EqualSizeOptions) -> Result<Self> {
        let e0 = equal_prob_edges(null, k)?;
        let e1 = equal_size_edges(null, k, opts)?;
        let edges = interpolate_edges(&e0, &e1, kappa)?;
        let probs = bin_probabilities(null, &edges);
        Self::new(kappa, edges, probs)
    }

    pub fn expected(&self, n: f64) -> Vec<f64> {
        self.null_probs.iter().map(|p| n * p).collect()
    }
}

/// Pre-binned observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedData {
    edges: Vec<f64>,
    counts: Vec<u64>,
}

impl BinnedData {
    pub fn new(edges: Vec<f64>, counts: Vec<u64>) -> Result<Self> {
        check_edges(&edges)?;
        if counts.len() + 1 != edges.len() {
            return Err(Error::Edges(format!(
                "{} counts for {} edges",
                counts.len(),
                edges.len()
            )));
        }
        Ok(Self { edges, counts })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Sums the data bins lying between consecutive `working` edges, each of
    /// which must be one of the data edges.
    pub fn aggregate(&self, working: &[f64]) -> Result<Vec<u64>> {
        check_edges(working)?;
        let mut idx = Vec::with_capacity(working.len());
        for w in working {
            let i = self
                .edges
                .iter()
                .position(|e| e == w)
                .ok_or_else(|| Error::Edges(format!("{w} is not a data bin edge")))?;
            idx.push(i);
        }
        Ok(idx
            .windows(2)
            .map(|w| self.counts[w[0]..w[1]].iter().sum())
            .collect())
    }
}

fn check_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 2 {
        return Err(Error::Edges("need at least two edges".into()));
    }
    if edges.iter().any(|e| e.is_nan()) {
        return Err(Error::Edges("NaN edge".into()));
    }
    if edges.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Edges(format!("edges not strictly increasing: {edges:?}")));
    }
    if edges[1..edges.len() - 1].iter().any(|e| e.is_infinite()) {
        return Err(Error::Edges("only the outer edges may be infinite".into()));
    }
    Ok(())
}

/// Edges giving `k` bins of probability `1/k` under `null`.
pub fn equal_prob_edges(null: &Distribution, k: usize) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("k must be at least 2, got {k}")));
    }
    let s = null.support();
    let mut edges = Vec::with_capacity(k + 1);
    edges.push(s.lower);
    for i in 1..k {
        edges.push(null.quantile(i as f64 / k as f64)?);
    }
    edges.push(s.upper);
    Ok(edges)
}

/// Edges giving `k` bins of equal width over the support, or over a
/// quantile-trimmed working range on unbounded sides. Outer edges are the
/// support ends.
pub fn equal_size_edges(null: &Distribution, k: usize, opts: EqualSizeOptions) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(Error::InvalidInput(format!("k must be at least 2, got {k}")));
    }
    let s = null.support();
    let a = if s.lower.is_finite() {
        s.lower
    } else {
        null.quantile(opts.tail_prob)?
    };
    let b = if s.upper.is_finite() {
        s.upper
    } else {
        null.quantile(1.0 - opts.tail_prob)?
    };
    let width = (b - a) / k as f64;
    let mut edges: Vec<f64> = (0..=k).map(|i| a + width * i as f64).collect();
    edges[0] = s.lower;
    edges[k] = s.upper;
    Ok(edges)
}

/// Elementwise `(1 - kappa) e0 + kappa e1`; infinite ends stay infinite.
pub fn interpolate_edges(e0: &[f64], e1: &[f64], kappa: f64) -> Result<Vec<f64>> {
    if e0.len() != e1.len() {
        return Err(Error::Edges(format!(
            "edge lists differ in length ({} vs {})",
            e0.len(),
            e1.len()
        )));
    }
    if !(0.0..=1.0).contains(&kappa) {
        return Err(Error::InvalidInput(format!("kappa {kappa} outside [0, 1]")));
    }
    e0.iter()
        .zip(e1)
        .map(|(&a, &b)| {
            if a.is_infinite() || b.is_infinite() {
                if a == b {
                    Ok(a)
                } else {
                    Err(Error::Edges("infinite edges do not line up".into()))
                }
            } else if kappa == 0.0 || a == b {
                Ok(a)
            } else if kappa == 1.0 {
                Ok(b)
            } else {
                Ok((1.0 - kappa) * a + kappa * b)
            }
        })
        .collect()
}

/// `F(B[i+1]) - F(B[i])` for each bin.
pub fn bin_probabilities(dist: &Distribution, edges: &[f64]) -> Vec<f64> {
    let cdf: Vec<f64> = edges.iter().map(|&e| dist.cdf(e)).collect();
    cdf.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect()
}

/// Observed counts per bin together with the number of values outside the
/// edge range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinCounts {
    pub counts: Vec<u64>,
    pub out_of_range: usize,
}

/// Counts values in half-open bins `[B[i], B[i+1])`; the last bin is closed.
pub fn bin_counts(values: &[f64], edges: &[f64]) -> BinCounts {
    let k = edges.len().saturating_sub(1);
    let mut counts = vec![0u64; k];
    let mut out_of_range = 0;
    if k == 0 {
        return BinCounts {
            counts,
            out_of_range: values.len(),
        };
    }
    let (first, last) = (edges[0], edges[k]);
    for &x in values {
        if !(x >= first && x <= last) {
            out_of_range += 1;
            continue;
        }
        let i = edges.partition_point(|&e| e <= x);
        counts[(i - 1).min(k - 1)] += 1;
    }
    BinCounts {
        counts,
        out_of_range,
    }
}

/// True iff every expected count `n * p` reaches `threshold`.
pub fn admissible(n: f64, null_probs: &[f64], threshold: f64) -> bool {
    // Relative slack absorbs rounding in quantile-derived probabilities, so
    // that e.g. 20 * 0.25 counts as exactly 5.
    null_probs
        .iter()
        .all(|p| n * p >= threshold * (1.0 - 1e-9))
}

/// Merges adjacent bins left to right until each expected count reaches
/// `threshold`. A deficient final group is folded into its left neighbour.
/// Returns `None` when fewer than two bins survive.
pub fn merge_to_admissible(edges: &[f64], probs: &[f64], n: f64, threshold: f64) -> Option<(Vec<f64>, Vec<f64>)> {
    let mut out_edges = vec![edges[0]];
    let mut out_probs = Vec::new();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if n * acc >= threshold * (1.0 - 1e-9) {
            out_edges.push(edges[i + 1]);
            out_probs.push(acc);
            acc = 0.0;
        }
    }
    if acc > 0.0 || out_edges.last() != edges.last() {
        *out_probs.last_mut()? += acc;
        *out_edges.last_mut()? = *edges.last()?;
    }
    (out_probs.len() >= 2).then_some((out_edges, out_probs))
}

/// The practitioner's histogram binning: `nbins` equal-size bins merged until
/// every expected count is at least 5.
pub fn histogram_scheme(null: &Distribution, n: usize, nbins: usize, opts: EqualSizeOptions) -> Result<BinningScheme> {
    if nbins < 2 {
        return Err(Error::InvalidInput(format!("nbins must be at least 2, got {nbins}")));
    }
    if n < 10 {
        return Err(Error::NoAdmissibleScheme(format!(
            "sample size {n} cannot fill two bins with expected count {MIN_EXPECTED}"
        )));
    }
    let edges = equal_size_edges(null, nbins, opts)?;
    let probs = bin_probabilities(null, &edges);
    let (edges, probs) = merge_to_admissible(&edges, &probs, n as f64, MIN_EXPECTED)
        .ok_or_else(|| Error::NoAdmissibleScheme("merging left fewer than two bins".into()))?;
    BinningScheme::new(1.0, edges, probs)
}

/// Maps each interior ideal edge to the nearest available edge, keeping the
/// result strictly increasing by moving collisions rightward. Outer ideal
/// edges map to the outer available edges.
pub fn snap_to_data_edges(ideal: &[f64], available: &[f64]) -> Result<Vec<f64>> {
    check_edges(available)?;
    if ideal.len() < 2 {
        return Err(Error::Edges("ideal edge list needs at least two entries".into()));
    }
    let m = available.len();
    let k = ideal.len() - 1;
    if m < ideal.len() {
        return Err(Error::Edges(format!(
            "{} ideal edges cannot be matched by {m} available edges",
            ideal.len()
        )));
    }
    let mut chosen = vec![0usize];
    for (j, &x) in ideal[1..k].iter().enumerate() {
        // interior candidates are 1..=m-2; later interior edges need room
        let remaining = k - 1 - (j + 1);
        let max_idx = m - 2 - remaining;
        let min_idx = chosen.last().copied().unwrap_or(0) + 1;
        if min_idx > max_idx {
            return Err(Error::Edges("not enough distinct available edges".into()));
        }
        let nearest = (1..m - 1)
            .min_by(|&a, &b| {
                (available[a] - x)
                    .abs()
                    .partial_cmp(&(available[b] - x).abs())
                    .expect("finite distances")
            })
            .unwrap_or(1);
        chosen.push(nearest.clamp(min_idx, max_idx));
    }
    chosen.push(m - 1);
    Ok(chosen.into_iter().map(|i| available[i]).collect())
}
