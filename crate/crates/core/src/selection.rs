//! Choosing the number of bins, the bin type and the statistic.
//!
//! Every grid entry is scored on the perfect data set, the `n` quantiles of
//! the alternative at `(i - 0.5)/n`, by the statistic divided by the 95%
//! chi-square critical value. The choice depends only on the null, the
//! alternative and `n`, never on observed data.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binning::{self, BinningScheme, EqualSizeOptions, MIN_EXPECTED};
use crate::distributions::{Distribution, DistributionSpec};
use crate::error::{Error, Result};
use crate::estimation::{self, StartData};
use crate::statistic::{chisq_quantile, chisq_stat, StatisticKind};

/// Merits at or below this value are treated as zero: the alternative is
/// indistinguishable from the null at this sample size, and the tie-break
/// picks the simplest scheme.
pub const NULL_MERIT: f64 = 0.02;

const DEFAULT_KAPPAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionGrid {
    pub k_values: Vec<usize>,
    pub kappa_values: Vec<f64>,
    pub kinds: Vec<StatisticKind>,
}

impl SelectionGrid {
    /// `k` from `p + 2` (or `p + 1` when the sample size is Poisson) up to
    /// `floor(2 (1 + log2 n))`, five kappa values, all six statistics.
    pub fn default_for(n: usize, p: usize, poisson: bool) -> Self {
        let lo = if poisson { p + 1 } else { p + 2 }.max(2);
        let hi = (2.0 * (1.0 + (n.max(1) as f64).log2())).floor() as usize;
        Self {
            k_values: (lo..=hi.max(lo)).collect(),
            kappa_values: DEFAULT_KAPPAS.to_vec(),
            kinds: if poisson {
                StatisticKind::POISSON.to_vec()
            } else {
                StatisticKind::ALL.to_vec()
            },
        }
    }

    pub fn size(&self) -> usize {
        self.k_values.len() * self.kappa_values.len() * self.kinds.len()
    }

    fn validate(&self) -> Result<()> {
        if self.k_values.is_empty() || self.kappa_values.is_empty() || self.kinds.is_empty() {
            return Err(Error::InvalidInput("selection grid has an empty axis".into()));
        }
        if let Some(k) = self.k_values.iter().find(|&&k| k < 2) {
            return Err(Error::InvalidInput(format!("grid bin count {k} is below 2")));
        }
        if let Some(x) = self.kappa_values.iter().find(|x| !(0.0..=1.0).contains(*x)) {
            return Err(Error::InvalidInput(format!("grid kappa {x} outside [0, 1]")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SelectionOptions {
    /// Score with expected alternative counts `n p1` instead of binned
    /// perfect-sample counts.
    pub continuous_counts: bool,
    /// Poisson sample size: degrees of freedom `k - p` instead of `k - 1 - p`.
    pub poisson: bool,
    pub equal_size: EqualSizeOptions,
}

/// One scored grid entry. Inadmissible entries have no merit and carry a note.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub k: usize,
    pub kappa: f64,
    pub kind: StatisticKind,
    pub merit: Option<f64>,
    pub admissible: bool,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeChoice {
    /// The chosen bins. For composite nulls the edges are those under the
    /// reference fit and the probabilities those under `theta`.
    pub scheme: BinningScheme,
    pub kind: StatisticKind,
    pub merit: f64,
    /// Minimum chi-square fit on the perfect counts; empty for simple nulls.
    pub theta: Vec<f64>,
    /// Unbinned fit to the perfect sample that positions composite bins.
    pub theta_ref: Vec<f64>,
    pub df: usize,
    pub grid_report: Vec<GridEntry>,
}

/// The `n` alternative quantiles at `(i - 0.5)/n`, increasing.
pub fn perfect_sample(f1: &Distribution, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidInput("perfect sample needs n >= 1".into()));
    }
    (1..=n)
        .map(|i| f1.quantile((i as f64 - 0.5) / n as f64))
        .collect()
}

/// Degrees of freedom for `k` bins and `p` fitted parameters.
pub fn degrees_of_freedom(k: usize, p: usize, poisson: bool) -> Option<usize> {
    let lost = if poisson { p } else { p + 1 };
    k.checked_sub(lost).filter(|&d| d >= 1)
}

/// Result of scoring one scheme and statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct Merit {
    pub merit: f64,
    pub statistic: f64,
    pub df: usize,
    pub observed: Vec<f64>,
    pub expected: Vec<f64>,
    pub theta: Vec<f64>,
}

/// Everything about the null/alternative pair that does not depend on the
/// grid entry.
struct Context<'a> {
    null: &'a DistributionSpec,
    f1: &'a Distribution,
    n: usize,
    p: usize,
    opts: SelectionOptions,
    sample: Vec<f64>,
    theta_ref: Vec<f64>,
    reference: Distribution,
}

impl<'a> Context<'a> {
    fn new(null: &'a DistributionSpec, f1: &'a Distribution, n: usize, opts: SelectionOptions) -> Result<Self> {
        let sample = perfect_sample(f1, n)?;
        let p = null.free_count();
        let theta_ref = if p == 0 {
            Vec::new()
        } else {
            let start = estimation::default_start(null, StartData::Values(&sample));
            let fit = estimation::unbinned_mle(null, &sample, &start)?;
            estimation::canonicalize_mixture(null, &fit.theta)
        };
        let reference = null.bind(&theta_ref)?;
        Ok(Self {
            null,
            f1,
            n,
            p,
            opts,
            sample,
            theta_ref,
            reference,
        })
    }

    fn edges(&self, k: usize, kappa: f64) -> Result<Vec<f64>> {
        scheme_edges(&self.reference, k, kappa, &self.opts)
    }

    fn observed(&self, edges: &[f64]) -> Vec<f64> {
        if self.opts.continuous_counts {
            binning::bin_probabilities(self.f1, edges)
                .into_iter()
                .map(|p| self.n as f64 * p)
                .collect()
        } else {
            binning::bin_counts(&self.sample, edges)
                .counts
                .into_iter()
                .map(|c| c as f64)
                .collect()
        }
    }

    /// Scores `kind` on `edges`. Errors mark the entry inadmissible.
    fn score(&self, edges: &[f64], observed: &[f64], kind: StatisticKind) -> Result<Merit> {
        let k = edges.len() - 1;
        let df = degrees_of_freedom(k, self.p, self.opts.poisson).ok_or_else(|| {
            Error::NoAdmissibleScheme(format!("{k} bins leave no degrees of freedom"))
        })?;
        let n = self.n as f64;
        let theta = if self.p == 0 {
            Vec::new()
        } else {
            let fit = estimation::minimum_chisq_with(
                self.null,
                observed,
                edges,
                kind,
                &self.theta_ref,
                n,
                &estimation::FitOptions::default(),
            )?;
            fit.theta
        };
        let null = if self.p == 0 {
            self.reference.clone()
        } else {
            self.null.bind(&theta)?
        };
        let probs = binning::bin_probabilities(&null, edges);
        if !binning::admissible(n, &probs, MIN_EXPECTED) {
            let min = probs.iter().cloned().fold(f64::INFINITY, f64::min) * n;
            return Err(Error::NoAdmissibleScheme(format!("smallest expected count {min:.3} below {MIN_EXPECTED}")));
        }
        let expected: Vec<f64> = probs.iter().map(|p| n * p).collect();
        let statistic = chisq_stat(kind, observed, &expected)?;
        let merit = statistic / chisq_quantile(0.95, df as f64)?;
        Ok(Merit {
            merit,
            statistic,
            df,
            observed: observed.to_vec(),
            expected,
            theta,
        })
    }
}

/// Merit of `kind` on the bins `edges` (positioned under the null, or under
/// the reference fit for composite nulls).
pub fn merit(
    null: &DistributionSpec,
    f1: &Distribution,
    n: usize,
    edges: &[f64],
    kind: StatisticKind,
    opts: SelectionOptions,
) -> Result<Merit> {
    let ctx = Context::new(null, f1, n, opts)?;
    let observed = ctx.observed(edges);
    ctx.score(edges, &observed, kind)
}

type Scored = (GridEntry, Option<(Vec<f64>, Merit)>);

fn effective(m: f64) -> f64 {
    if m <= NULL_MERIT {
        0.0
    } else {
        m
    }
}

/// Grid search for the scheme with the largest merit. Ties (within a relative
/// 1e-9) go to smaller `k`, then smaller kappa, then the statistic listed
/// first.
pub fn select_scheme(
    null: &DistributionSpec,
    f1: &Distribution,
    n: usize,
    grid: &SelectionGrid,
    opts: SelectionOptions,
) -> Result<SchemeChoice> {
    grid.validate()?;
    let ctx = Context::new(null, f1, n, opts)?;

    let mut ks = grid.k_values.clone();
    ks.sort_unstable();
    ks.dedup();
    let mut kappas = grid.kappa_values.clone();
    kappas.sort_by(f64::total_cmp);
    kappas.dedup();
    let mut kinds = grid.kinds.clone();
    kinds.sort();
    kinds.dedup();

    let cells: Vec<(usize, f64)> = ks
        .iter()
        .flat_map(|&k| kappas.iter().map(move |&kappa| (k, kappa)))
        .collect();
    // Each cell yields its entries in kind order; collecting preserves the
    // grid order, so the scan below is independent of scheduling.
    let scored: Vec<Vec<Scored>> = cells
        .par_iter()
        .map(|&(k, kappa)| {
            let edges = ctx.edges(k, kappa);
            kinds
                .iter()
                .map(|&kind| {
                    let result = edges.as_ref().map_err(Clone::clone).and_then(|e| {
                        let observed = ctx.observed(e);
                        ctx.score(e, &observed, kind)
                    });
                    match result {
                        Ok(m) => (
                            GridEntry {
                                k,
                                kappa,
                                kind,
                                merit: Some(m.merit),
                                admissible: true,
                                note: None,
                            },
                            Some((edges.as_ref().expect("scored").clone(), m)),
                        ),
                        Err(e) => (
                            GridEntry {
                                k,
                                kappa,
                                kind,
                                merit: None,
                                admissible: false,
                                note: Some(e.to_string()),
                            },
                            None,
                        ),
                    }
                })
                .collect()
        })
        .collect();

    let mut best: Option<(usize, usize)> = None;
    let mut best_merit = f64::NEG_INFINITY;
    for (ci, cell) in scored.iter().enumerate() {
        for (ki, (entry, _)) in cell.iter().enumerate() {
            let Some(m) = entry.merit.map(effective) else {
                continue;
            };
            if best.is_none() || m > best_merit + 1e-9 * best_merit.abs() {
                best = Some((ci, ki));
                best_merit = m;
            }
        }
    }
    let grid_report: Vec<GridEntry> = scored.iter().flatten().map(|(e, _)| e.clone()).collect();
    let (ci, ki) = best.ok_or_else(|| {
        Error::NoAdmissibleScheme(format!(
            "none of the {} grid entries is admissible at n = {n}",
            grid_report.len()
        ))
    })?;
    let (entry, scored_entry) = &scored[ci][ki];
    let (edges, m) = scored_entry.as_ref().expect("admissible entries are scored");
    let probs: Vec<f64> = m.expected.iter().map(|e| e / n as f64).collect();
    let sum: f64 = probs.iter().sum();
    let probs = probs.into_iter().map(|p| p / sum).collect();
    Ok(SchemeChoice {
        scheme: BinningScheme::new(entry.kappa, edges.clone(), probs)?,
        kind: entry.kind,
        merit: m.merit,
        theta: m.theta.clone(),
        theta_ref: ctx.theta_ref.clone(),
        df: m.df,
        grid_report,
    })
}

/// Admissible entries from best to worst under the same order that
/// [`select_scheme`] uses, so the first entry is the selected one.
pub fn ranked_entries(entries: &[GridEntry]) -> Vec<&GridEntry> {
    let mut left: Vec<&GridEntry> = entries.iter().filter(|e| e.merit.is_some()).collect();
    let mut out = Vec::with_capacity(left.len());
    while !left.is_empty() {
        let mut best = 0;
        let mut best_merit = f64::NEG_INFINITY;
        for (i, e) in left.iter().enumerate() {
            let m = effective(e.merit.expect("filtered"));
            if i == 0 || m > best_merit + 1e-9 * best_merit.abs() {
                best = i;
                best_merit = m;
            }
        }
        out.push(left.remove(best));
    }
    out
}

/// Edges of the kappa-interpolated scheme with `k` bins under `null`.
pub fn scheme_edges(null: &Distribution, k: usize, kappa: f64, opts: &SelectionOptions) -> Result<Vec<f64>> {
    let e0 = binning::equal_prob_edges(null, k)?;
    let e1 = binning::equal_size_edges(null, k, opts.equal_size)?;
    binning::interpolate_edges(&e0, &e1, kappa)
}

/// The grid report as CSV with header `k,kappa,kind,merit,admissible`.
/// Inadmissible entries leave the merit empty.
pub fn grid_report_csv(entries: &[GridEntry]) -> String {
    let mut out = String::from("k,kappa,kind,merit,admissible\n");
    for e in entries {
        let merit = e.merit.map(|m| m.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{},{}\n", e.k, e.kappa, e.kind, merit, e.admissible));
    }
    out
}
