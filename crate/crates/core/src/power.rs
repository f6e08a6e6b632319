//! Monte Carlo power and size estimation for the RG test and its competitors,
//! and the study definitions used to reproduce the published comparisons.
//!
//! Every replicate of a study cell draws one data set from stream
//! `(seed, cell, replicate)` and applies all methods to it, so methods are
//! compared on common random numbers.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binning::{self, BinningScheme, EqualSizeOptions, MIN_EXPECTED};
use crate::distributions::{Distribution, DistributionSpec};
use crate::edf::{self, EdfKind, EdfReference};
use crate::error::{Error, Result};
use crate::estimation::{self, FitOptions};
use crate::mc::{self, SampleSize};
use crate::rgtest::{self, RgConfig};
use crate::selection::{self, SchemeChoice, SelectionGrid};
use crate::statistic::{chisq_pvalue, chisq_quantile, chisq_stat, StatisticKind};

pub const MIN_STUDY_REPLICATES: usize = 100;
pub const DEFAULT_INNER_REPLICATES: usize = 500;
pub const HISTOGRAM_BINS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    RG,
    EqualSize,
    EqualProb,
    Histogram,
    KS,
    AD,
    ZK,
    ZA,
    ZC,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::RG,
        Method::EqualSize,
        Method::EqualProb,
        Method::Histogram,
        Method::KS,
        Method::AD,
        Method::ZK,
        Method::ZA,
        Method::ZC,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::RG => "RG",
            Method::EqualSize => "Equal Size",
            Method::EqualProb => "Equal Prob",
            Method::Histogram => "Histogram",
            Method::KS => "KS",
            Method::AD => "AD",
            Method::ZK => "ZK",
            Method::ZA => "ZA",
            Method::ZC => "ZC",
        }
    }

    pub fn edf_kind(self) -> Option<EdfKind> {
        match self {
            Method::KS => Some(EdfKind::KS),
            Method::AD => Some(EdfKind::AD),
            Method::ZK => Some(EdfKind::ZK),
            Method::ZA => Some(EdfKind::ZA),
            Method::ZC => Some(EdfKind::ZC),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        Method::ALL
            .into_iter()
            .find(|m| {
                let name: String = m.name().chars().filter(|c| *c != ' ').collect();
                name.to_ascii_lowercase() == key
            })
            .ok_or_else(|| Error::InvalidInput(format!("unknown method '{s}'")))
    }
}

/// Sturges-type bin count `ceil(1 + log2 n)` used by the equal-size and
/// equal-probability comparison tests.
pub fn sturges_bins(n: usize) -> usize {
    (1.0 + (n.max(1) as f64).log2()).ceil() as usize
}

/// One point on a power curve.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyCell {
    pub param: f64,
    /// Printed in the `param` column.
    pub label: String,
    pub null: DistributionSpec,
    /// Alternative handed to RG scheme selection.
    pub alternative: Distribution,
    /// Distribution the data are drawn from; usually the alternative.
    pub truth: Distribution,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudySpec {
    pub name: String,
    pub cells: Vec<StudyCell>,
    pub methods: Vec<Method>,
    pub n: usize,
    pub sample_size: SampleSize,
    pub alphas: Vec<f64>,
    pub replicates: usize,
    /// Simulated references for the EDF tests.
    pub inner_replicates: usize,
    pub seed: u64,
    pub rg: RgConfig,
}

impl StudySpec {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < MIN_STUDY_REPLICATES {
            return Err(Error::InvalidInput(format!(
                "a study needs at least {MIN_STUDY_REPLICATES} replicates, got {}",
                self.replicates
            )));
        }
        if self.alphas.is_empty() || self.alphas.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
            return Err(Error::InvalidInput("every alpha must lie in (0, 1)".into()));
        }
        if self.cells.is_empty() || self.methods.is_empty() {
            return Err(Error::InvalidInput("a study needs at least one cell and one method".into()));
        }
        if self.n == 0 {
            return Err(Error::InvalidInput("sample size must be positive".into()));
        }
        if let SampleSize::Poisson { lambda } = self.sample_size {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(Error::InvalidInput(format!("Poisson rate {lambda} must be positive")));
            }
        }
        Ok(())
    }

    fn n_column(&self) -> f64 {
        match self.sample_size {
            SampleSize::Multinomial => self.n as f64,
            SampleSize::Poisson { lambda } => lambda,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerRow {
    pub study: String,
    pub param: f64,
    pub label: String,
    pub method: String,
    pub power: f64,
    pub se: f64,
    pub replicates: usize,
    /// Replicates on which the method could not be applied; excluded from
    /// the rejection proportion.
    pub failures: usize,
    pub n: f64,
    pub alpha: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PowerTable {
    pub rows: Vec<PowerRow>,
}

pub const POWER_CSV_HEADER: &str = "study,param,method,power,se,B,n,alpha,seed";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl PowerTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(POWER_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{:.6},{:.6},{},{},{},{}\n",
                csv_field(&r.study),
                csv_field(&r.label),
                csv_field(&r.method),
                r.power,
                r.se,
                r.replicates,
                r.n,
                r.alpha,
                r.seed
            ));
        }
        out
    }

    /// Method names in order of first appearance.
    pub fn methods(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.method) {
                out.push(r.method.clone());
            }
        }
        out
    }

    pub fn rows_for(&self, method: &str, alpha: f64) -> Vec<&PowerRow> {
        self.rows.iter().filter(|r| r.method == method && r.alpha == alpha).collect()
    }

    /// Mean power per method at level `alpha`, highest first (ties by name).
    pub fn mean_power(&self, alpha: f64) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = self
            .methods()
            .into_iter()
            .filter_map(|m| {
                let rows = self.rows_for(&m, alpha);
                (!rows.is_empty()).then(|| {
                    let mean = rows.iter().map(|r| r.power).sum::<f64>() / rows.len() as f64;
                    (m, mean)
                })
            })
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        out
    }
}

fn proportion(rejections: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (f64::NAN, f64::NAN);
    }
    let p = rejections as f64 / trials as f64;
    (p, (p * (1.0 - p) / trials as f64).sqrt())
}

/// Runs `f` on a dedicated pool of `threads` workers. Results do not depend on
/// the thread count.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start {threads} worker threads: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BaselineRule {
    EqualProb(usize),
    EqualSize(usize),
}

fn baseline_rule(method: Method, n: usize) -> Option<BaselineRule> {
    match method {
        Method::EqualProb => Some(BaselineRule::EqualProb(sturges_bins(n))),
        Method::EqualSize => Some(BaselineRule::EqualSize(sturges_bins(n))),
        Method::Histogram => Some(BaselineRule::EqualSize(HISTOGRAM_BINS)),
        _ => None,
    }
}

/// Bins of a comparison test under `dist`, merged left to right until every
/// expected count is at least 5.
fn baseline_bins(rule: BaselineRule, dist: &Distribution, total: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let edges = match rule {
        BaselineRule::EqualProb(k) => binning::equal_prob_edges(dist, k)?,
        BaselineRule::EqualSize(k) => binning::equal_size_edges(dist, k, EqualSizeOptions::default())?,
    };
    let probs = binning::bin_probabilities(dist, &edges);
    binning::merge_to_admissible(&edges, &probs, total, MIN_EXPECTED)
        .ok_or_else(|| Error::NoAdmissibleScheme("merging left fewer than two bins".into()))
}

/// Pearson test with the bins of a comparison rule. Composite nulls place the
/// bins under the unbinned fit and re-estimate by minimum chi-square on them.
fn baseline_pvalue(
    rule: BaselineRule,
    fixed: Option<&(Vec<f64>, Vec<f64>)>,
    data: &[f64],
    null: &DistributionSpec,
    fitted: Option<&(Distribution, Vec<f64>)>,
    sample_size: SampleSize,
) -> Result<f64> {
    let p = null.free_count();
    let poisson = matches!(sample_size, SampleSize::Poisson { .. });
    let size = match sample_size {
        SampleSize::Multinomial => data.len() as f64,
        SampleSize::Poisson { lambda } => lambda,
    };
    let owned;
    let (edges, probs) = match fixed {
        Some(b) => b,
        None => {
            let (dist, _) = fitted.ok_or_else(|| Error::InvalidInput("composite null without a fit".into()))?;
            owned = baseline_bins(rule, dist, size)?;
            &owned
        }
    };
    let k = probs.len();
    let df = selection::degrees_of_freedom(k, p, poisson)
        .ok_or_else(|| Error::NoAdmissibleScheme(format!("{k} bins leave no degrees of freedom")))?;
    let observed: Vec<f64> = binning::bin_counts(data, edges).counts.iter().map(|&c| c as f64).collect();
    let total = if poisson { size } else { observed.iter().sum() };
    let expected: Vec<f64> = if p == 0 {
        probs.iter().map(|q| total * q).collect()
    } else {
        let start = &fitted.ok_or_else(|| Error::InvalidInput("composite null without a fit".into()))?.1;
        let fit = estimation::minimum_chisq_with(
            null,
            &observed,
            edges,
            StatisticKind::Pearson,
            start,
            total,
            &FitOptions::default(),
        )?;
        let d = null.bind(&fit.theta)?;
        binning::bin_probabilities(&d, edges).into_iter().map(|q| total * q).collect()
    };
    Ok(chisq_pvalue(chisq_stat(StatisticKind::Pearson, &observed, &expected)?, df as f64))
}

/// Edges and null probabilities.
type FixedBins = (Vec<f64>, Vec<f64>);

/// Everything about a cell that does not depend on the replicate.
struct CellPlan {
    choice: Option<SchemeChoice>,
    /// Fixed bins of the comparison tests (simple nulls only).
    baselines: Vec<(Method, BaselineRule, Option<FixedBins>)>,
    edf_kinds: Vec<EdfKind>,
    /// Shared EDF reference, or `None` when it depends on the data.
    reference: Option<Arc<EdfReference>>,
}

fn edf_reference_key(null: &DistributionSpec, n: usize, sample_size: SampleSize) -> String {
    format!("edf-reference/{null}/{n}/{sample_size:?}")
}

impl CellPlan {
    fn new(study: &StudySpec, cell: &StudyCell, cache: &mut HashMap<String, Arc<EdfReference>>) -> Result<Self> {
        let poisson = matches!(study.sample_size, SampleSize::Poisson { .. });
        let choice = if study.methods.contains(&Method::RG) {
            Some(rgtest::select_for(&cell.null, &cell.alternative, study.n, &study.rg, poisson)?)
        } else {
            None
        };
        let size = study.n_column();
        let mut baselines = Vec::new();
        for &m in &study.methods {
            if let Some(rule) = baseline_rule(m, study.n) {
                let fixed = if cell.null.is_simple() {
                    Some(baseline_bins(rule, &cell.null.bind(&[])?, size)?)
                } else {
                    None
                };
                baselines.push((m, rule, fixed));
            }
        }
        let edf_kinds: Vec<EdfKind> = study.methods.iter().filter_map(|m| m.edf_kind()).collect();
        let reference = if !edf_kinds.is_empty() && edf::is_pivotal(&cell.null) {
            let key = edf_reference_key(&cell.null, study.n, study.sample_size);
            if let Some(r) = cache.get(&key).filter(|r| r.kinds() == edf_kinds.as_slice()) {
                Some(r.clone())
            } else {
                let start = estimation::default_start(&cell.null, estimation::StartData::Nothing);
                let generator = cell.null.bind(&start)?;
                let r = Arc::new(EdfReference::simulate(
                    &edf_kinds,
                    &cell.null,
                    &generator,
                    study.n,
                    study.sample_size,
                    study.inner_replicates,
                    study.seed,
                    mc::cell_key(&key),
                )?);
                cache.insert(key, r.clone());
                Some(r)
            }
        } else {
            None
        };
        Ok(Self {
            choice,
            baselines,
            edf_kinds,
            reference,
        })
    }

    /// p-values in the order of `study.methods`; `None` marks a failure.
    fn replicate(&self, study: &StudySpec, cell: &StudyCell, cell_id: u64, r: u64) -> Vec<Option<f64>> {
        let mut rng = mc::stream(study.seed, cell_id, r);
        let m = study.sample_size.draw(study.n, &mut rng);
        let data = cell.truth.sample(m, &mut rng);
        let fitted = if cell.null.is_simple() || data.is_empty() {
            None
        } else {
            edf::fit_null(&cell.null, &data).ok()
        };
        let edf_p: Option<Vec<f64>> = (!self.edf_kinds.is_empty())
            .then(|| self.edf_pvalues(study, cell, &data, cell_id, r))
            .flatten();
        study
            .methods
            .iter()
            .map(|&method| match method {
                Method::RG => {
                    let choice = self.choice.as_ref()?;
                    rgtest::apply_choice(&data, &cell.null, choice, study.sample_size, 0.5, study.rg.selection)
                        .ok()
                        .map(|rep| rep.pvalue)
                }
                Method::EqualSize | Method::EqualProb | Method::Histogram => {
                    let (_, rule, fixed) = self.baselines.iter().find(|b| b.0 == method)?;
                    baseline_pvalue(
                        *rule,
                        fixed.as_ref(),
                        &data,
                        &cell.null,
                        fitted.as_ref(),
                        study.sample_size,
                    )
                    .ok()
                }
                _ => {
                    let kind = method.edf_kind()?;
                    let i = self.edf_kinds.iter().position(|&k| k == kind)?;
                    edf_p.as_ref().map(|p| p[i])
                }
            })
            .collect()
    }

    fn edf_pvalues(&self, study: &StudySpec, cell: &StudyCell, data: &[f64], cell_id: u64, r: u64) -> Option<Vec<f64>> {
        if data.is_empty() {
            return None;
        }
        let (fitted, _) = edf::fit_null(&cell.null, data).ok()?;
        let stats = edf::edf_statistics(&self.edf_kinds, data, &fitted).ok()?;
        let owned;
        let reference = match &self.reference {
            Some(r) => r.as_ref(),
            None => {
                owned = EdfReference::simulate(
                    &self.edf_kinds,
                    &cell.null,
                    &fitted,
                    data.len(),
                    study.sample_size,
                    study.inner_replicates,
                    study.seed ^ mc::cell_key("edf-inner"),
                    cell_id.wrapping_add(r.wrapping_mul(0x9e37_79b9_7f4a_7c15)),
                )
                .ok()?;
                &owned
            }
        };
        self.edf_kinds
            .iter()
            .zip(&stats)
            .map(|(&k, &s)| reference.pvalue(k, s).ok())
            .collect()
    }
}

/// Runs every method on every cell of `study` and tabulates rejection
/// proportions at each level.
pub fn run_study(study: &StudySpec) -> Result<PowerTable> {
    study.validate()?;
    let mut cache = HashMap::new();
    let mut table = PowerTable::default();
    for cell in &study.cells {
        let plan = CellPlan::new(study, cell, &mut cache)?;
        let cell_id = mc::cell_key(&format!("{}/{}", study.name, cell.label));
        let results: Vec<Vec<Option<f64>>> = (0..study.replicates as u64)
            .into_par_iter()
            .map(|r| plan.replicate(study, cell, cell_id, r))
            .collect();
        for (j, method) in study.methods.iter().enumerate() {
            let pvalues: Vec<f64> = results.iter().filter_map(|row| row[j]).collect();
            let failures = study.replicates - pvalues.len();
            if failures * 100 > study.replicates {
                return Err(Error::Optimization(format!(
                    "{method} failed on {failures} of {} replicates in cell {} of study {}",
                    study.replicates, cell.label, study.name
                )));
            }
            for &alpha in &study.alphas {
                let rejections = pvalues.iter().filter(|&&p| p < alpha).count();
                let (power, se) = proportion(rejections, pvalues.len());
                table.rows.push(PowerRow {
                    study: study.name.clone(),
                    param: cell.param,
                    label: cell.label.clone(),
                    method: method.name().to_string(),
                    power,
                    se,
                    replicates: study.replicates,
                    failures,
                    n: study.n_column(),
                    alpha,
                    seed: study.seed,
                });
            }
        }
    }
    Ok(table)
}

/// Power of one fixed simple-null scheme by drawing the bin counts directly
/// from the multinomial with the alternative's bin probabilities. With the
/// Neyman statistic a replicate with an empty bin is scored with Pearson's
/// statistic instead.
#[allow(clippy::too_many_arguments)]
pub fn power_fast(
    null: &Distribution,
    f1: &Distribution,
    scheme: &BinningScheme,
    kind: StatisticKind,
    n: usize,
    alpha: f64,
    replicates: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside (0, 1)")));
    }
    let p0 = binning::bin_probabilities(null, &scheme.edges);
    if !binning::admissible(n as f64, &p0, MIN_EXPECTED) {
        return Err(Error::NoAdmissibleScheme(format!(
            "{} bins are inadmissible at n = {n}",
            scheme.k
        )));
    }
    let expected: Vec<f64> = p0.iter().map(|q| n as f64 * q).collect();
    let p1 = binning::bin_probabilities(f1, &scheme.edges);
    let crit = chisq_quantile(1.0 - alpha, (p0.len() - 1) as f64)?;
    let cell = mc::cell_key(&format!("fast/{}/{kind}/{n}", scheme.k));
    let rejections: usize = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let counts: Vec<f64> = mc::multinomial(n as u64, &p1, &mut mc::stream(seed, cell, r))
                .into_iter()
                .map(|c| c as f64)
                .collect();
            let stat = chisq_stat(kind, &counts, &expected)
                .or_else(|_| chisq_stat(StatisticKind::Pearson, &counts, &expected))
                .unwrap_or(f64::INFINITY);
            usize::from(stat > crit)
        })
        .sum();
    Ok(proportion(rejections, replicates))
}

/// Power of one method through the full pipeline: sample raw data, estimate
/// where the null is composite, test.
#[allow(clippy::too_many_arguments)]
pub fn power_full(
    method: Method,
    null: &DistributionSpec,
    f1: &Distribution,
    n: usize,
    sample_size: SampleSize,
    alpha: f64,
    replicates: usize,
    inner_replicates: usize,
    seed: u64,
    rg: &RgConfig,
) -> Result<(f64, f64)> {
    let study = StudySpec {
        name: format!("power/{method}"),
        cells: vec![StudyCell {
            param: 0.0,
            label: "0".into(),
            null: null.clone(),
            alternative: f1.clone(),
            truth: f1.clone(),
        }],
        methods: vec![method],
        n,
        sample_size,
        alphas: vec![alpha],
        replicates,
        inner_replicates,
        seed,
        rg: rg.clone(),
    };
    let table = run_study(&study)?;
    Ok((table.rows[0].power, table.rows[0].se))
}

/// Rejection rates of the RG test when each null is also the truth.
pub fn type1_table(
    nulls: &[(String, DistributionSpec, Distribution)],
    alphas: &[f64],
    n: usize,
    replicates: usize,
    seed: u64,
) -> Result<PowerTable> {
    let mut table = PowerTable::default();
    for (i, (label, null, truth)) in nulls.iter().enumerate() {
        let study = StudySpec {
            name: "table1".into(),
            cells: vec![StudyCell {
                param: i as f64,
                label: label.clone(),
                null: null.clone(),
                alternative: truth.clone(),
                truth: truth.clone(),
            }],
            methods: vec![Method::RG],
            n,
            sample_size: SampleSize::Multinomial,
            alphas: alphas.to_vec(),
            replicates,
            inner_replicates: DEFAULT_INNER_REPLICATES,
            seed,
            rg: RgConfig::default(),
        };
        table.rows.extend(run_study(&study)?.rows);
    }
    Ok(table)
}

/// Mean power of each method at one level, highest first.
pub type MeanPowers = (f64, Vec<(String, f64)>);

/// Power curve over the cells of `study` together with the mean power of
/// each method at every level, highest first.
pub fn power_curve(study: &StudySpec) -> Result<(PowerTable, Vec<MeanPowers>)> {
    let table = run_study(study)?;
    let means = study.alphas.iter().map(|&a| (a, table.mean_power(a))).collect();
    Ok((table, means))
}

/// Two-component normal mixture with the component labels ordered by mean.
pub const MIXTURE_FAMILY: &str = "?*normal(?,?) + normal(?,?)";
pub const MIXTURE_TRUTH: &str = "0.3333333333333333*normal(0,1) + normal(5,2)";
pub const MIXTURE_BINS: usize = 10;

/// Size of the chi-square test for the two-component normal mixture with ten
/// equal-probability bins placed under the unbinned maximum likelihood fit.
/// Expected counts use either that fit (`"Unbinned MLE"`) or a minimum
/// chi-square refit on the same bins (`"Minimum chi-square"`). Both use the
/// same data sets.
pub fn mixture_demo(n: usize, alpha: f64, replicates: usize, seed: u64) -> Result<PowerTable> {
    let family = DistributionSpec::parse(MIXTURE_FAMILY)?;
    let truth = DistributionSpec::parse(MIXTURE_TRUTH)?.bind(&[])?;
    let df = (MIXTURE_BINS - 1 - family.free_count()) as f64;
    let cell = mc::cell_key("mixture-demo");
    let results: Vec<(Option<f64>, Option<f64>)> = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let data = truth.sample(n, &mut mc::stream(seed, cell, r));
            let Ok((fitted, theta)) = edf::fit_null(&family, &data) else {
                return (None, None);
            };
            let Ok(edges) = binning::equal_prob_edges(&fitted, MIXTURE_BINS) else {
                return (None, None);
            };
            let observed: Vec<f64> = binning::bin_counts(&data, &edges).counts.iter().map(|&c| c as f64).collect();
            let expected: Vec<f64> = binning::bin_probabilities(&fitted, &edges)
                .into_iter()
                .map(|q| n as f64 * q)
                .collect();
            let mle = chisq_stat(StatisticKind::Pearson, &observed, &expected)
                .ok()
                .map(|s| chisq_pvalue(s, df));
            let minchisq = estimation::minimum_chisq_with(
                &family,
                &observed,
                &edges,
                StatisticKind::Pearson,
                &theta,
                n as f64,
                &FitOptions::default(),
            )
            .ok()
            .map(|fit| chisq_pvalue(fit.objective, df));
            (mle, minchisq)
        })
        .collect();
    let mut table = PowerTable::default();
    for (name, pvalues) in [
        ("Unbinned MLE", results.iter().filter_map(|r| r.0).collect::<Vec<_>>()),
        ("Minimum chi-square", results.iter().filter_map(|r| r.1).collect::<Vec<_>>()),
    ] {
        let failures = replicates - pvalues.len();
        if failures * 100 > replicates {
            return Err(Error::Optimization(format!(
                "{name} failed on {failures} of {replicates} replicates"
            )));
        }
        let (power, se) = proportion(pvalues.iter().filter(|&&p| p < alpha).count(), pvalues.len());
        table.rows.push(PowerRow {
            study: "mixture-demo".into(),
            param: 0.0,
            label: format!("{MIXTURE_BINS} bins"),
            method: name.into(),
            power,
            se,
            replicates,
            failures,
            n: n as f64,
            alpha,
            seed,
        });
    }
    Ok(table)
}

/// Scale of a reproduction run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scale {
    pub replicates: usize,
    pub inner_replicates: usize,
    pub seed: u64,
    /// Sample size where the study allows a choice.
    pub n: usize,
}

impl Default for Scale {
    fn default() -> Self {
        Self {
            replicates: 2000,
            inner_replicates: DEFAULT_INNER_REPLICATES,
            seed: 20240101,
            n: 1000,
        }
    }
}

/// Reproduction targets.
pub const TARGETS: [&str; 11] = [
    "table1", "fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartStyle {
    Line,
    Bar,
}

/// Describes a study for the record kept next to its output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub study: String,
    pub null: String,
    pub alternative: String,
    pub params: Vec<String>,
    pub methods: Vec<String>,
    pub n: usize,
    pub replicates: usize,
    pub inner_replicates: usize,
    pub alphas: Vec<f64>,
    pub seed: u64,
    pub assumptions: Vec<String>,
}

/// A finished reproduction: table, how to draw it and what was run.
#[derive(Debug, Clone, PartialEq)]
pub struct Reproduction {
    pub table: PowerTable,
    /// CSV for the table; the selection target writes the grid report.
    pub csv: String,
    pub style: ChartStyle,
    pub x_label: String,
    pub y_label: String,
    pub manifest: Manifest,
}

fn spec(s: &str) -> Result<DistributionSpec> {
    DistributionSpec::parse(s)
}

fn dist(s: &str) -> Result<Distribution> {
    DistributionSpec::parse(s)?.bind(&[])
}

/// `start, start + step, ...` up to `end` inclusive (within rounding).
pub fn grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    let m = ((end - start) / step + 1e-9).floor() as usize;
    (0..=m).map(|i| start + step * i as f64).collect()
}

fn fmt_param(x: f64) -> String {
    let s = format!("{x:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

/// Null, alternative template and parameter grid of each power-curve figure.
fn curve_cells(target: &str) -> Result<(String, String, Vec<StudyCell>, Vec<String>)> {
    let mut cells = Vec::new();
    let mut push = |param: f64, null: &str, alt: Distribution| -> Result<()> {
        cells.push(StudyCell {
            param,
            label: fmt_param(param),
            null: spec(null)?,
            alternative: alt.clone(),
            truth: alt,
        });
        Ok(())
    };
    let (null, alt, assumption) = match target {
        "fig4" | "fig5" => {
            let null = if target == "fig4" { "normal(0,1)" } else { "normal(?,?)" };
            for df in 1..=20 {
                push(df as f64, null, dist(&format!("t({df})"))?)?;
            }
            (null, "t(df)", "df = 1, 2, ..., 20")
        }
        "fig6" => {
            for s in grid(0.0, 0.3, 0.02) {
                push(s, "uniform(0,1)", dist(&format!("linear({s})"))?)?;
            }
            ("uniform(0,1)", "linear(slope)", "slope = 0, 0.02, ..., 0.3")
        }
        "fig7" => {
            for sigma in grid(0.25, 1.5, 0.0625) {
                let bump = Distribution::truncated(dist(&format!("normal(1.5,{sigma})"))?, 0.0, f64::INFINITY)?;
                let alt = Distribution::mixture(vec![0.9, 0.1], vec![dist("exp(1)")?, bump])?;
                push(sigma, "exp(?)", alt)?;
            }
            (
                "exp(?)",
                "0.9*exp(1) + 0.1*(normal(1.5,sigma) | [0,inf))",
                "sigma = 0.25, 0.3125, ..., 1.5",
            )
        }
        "fig8" => {
            for q in grid(1.0, 2.0, 0.05) {
                push(q, "uniform(0,1)", dist(&format!("beta(1,{q})"))?)?;
            }
            ("uniform(0,1)", "beta(1,q)", "q = 1, 1.05, ..., 2")
        }
        "fig9" => {
            for q in grid(0.7, 1.3, 0.03) {
                push(q, "uniform(0,1)", dist(&format!("beta({q},{q})"))?)?;
            }
            ("uniform(0,1)", "beta(q,q)", "q = 0.7, 0.73, ..., 1.3")
        }
        "fig10" => {
            for r in grid(10.0, 100.0, 4.5) {
                let null = format!("normal({r},{})", r.sqrt());
                push(r, &null, dist(&format!("gamma({r},1)"))?)?;
            }
            ("normal(r,sqrt(r))", "gamma(r,1)", "r = 10, 14.5, ..., 100")
        }
        other => return Err(Error::InvalidInput(format!("'{other}' is not a power-curve study"))),
    };
    Ok((
        null.to_string(),
        alt.to_string(),
        cells,
        vec![format!("parameter grid {assumption}")],
    ))
}

/// The study behind a power-curve figure (`fig4` to `fig10`).
pub fn curve_study(target: &str, scale: &Scale) -> Result<(StudySpec, Manifest)> {
    let (null, alt, cells, mut assumptions) = curve_cells(target)?;
    assumptions.push(format!(
        "EDF reference distributions simulated with {} replicates",
        scale.inner_replicates
    ));
    let study = StudySpec {
        name: target.to_string(),
        cells,
        methods: Method::ALL.to_vec(),
        n: scale.n,
        sample_size: SampleSize::Multinomial,
        alphas: vec![0.05],
        replicates: scale.replicates,
        inner_replicates: scale.inner_replicates,
        seed: scale.seed,
        rg: RgConfig::default(),
    };
    let manifest = Manifest {
        study: target.into(),
        null,
        alternative: alt,
        params: study.cells.iter().map(|c| c.label.clone()).collect(),
        methods: study.methods.iter().map(|m| m.name().to_string()).collect(),
        n: study.n,
        replicates: study.replicates,
        inner_replicates: study.inner_replicates,
        alphas: study.alphas.clone(),
        seed: study.seed,
        assumptions,
    };
    Ok((study, manifest))
}

/// Nulls of the size table with the distributions the data come from.
pub fn table1_nulls() -> Result<Vec<(String, DistributionSpec, Distribution)>> {
    [
        ("U[0,1]", "uniform(0,1)", "uniform(0,1)"),
        ("Beta(2,4)", "beta(2,4)", "beta(2,4)"),
        ("Gamma(3,0.5)", "gamma(3,0.5)", "gamma(3,0.5)"),
        ("N(0,1)", "normal(0,1)", "normal(0,1)"),
        ("Normal", "normal(?,?)", "normal(0,1)"),
        ("Exp(1)", "exp(1)", "exp(1)"),
        ("Exponential", "exp(?)", "exp(1)"),
    ]
    .into_iter()
    .map(|(label, null, truth)| Ok((label.to_string(), spec(null)?, dist(truth)?)))
    .collect()
}

pub const TABLE1_ALPHAS: [f64; 3] = [0.01, 0.05, 0.10];

/// Linear null against an exponential truncated to the unit interval.
pub const FIG2_NULL: &str = "linear(-0.5)";
pub const FIG2_ALT: &str = "exp(1) | [0,1]";
pub const FIG2_N: usize = 10000;
pub const FIG1_ALT: &str = "linear(0.2)";
pub const FIG1_NS: [usize; 3] = [100, 500, 2000];

/// Pearson-only grid over `k = 2..=21` and the default kappas.
pub fn pearson_grid() -> SelectionGrid {
    SelectionGrid {
        k_values: (2..=21).collect(),
        kappa_values: vec![0.0, 0.25, 0.5, 0.75, 1.0],
        kinds: vec![StatisticKind::Pearson],
    }
}

/// Power of `k` equal bins against `linear(0.2)` for several sample sizes;
/// the `method` column names the sample size. Inadmissible `(k, n)` pairs
/// are left out.
pub fn fig1_table(ns: &[usize], ks: &[usize], replicates: usize, seed: u64) -> Result<PowerTable> {
    let null = dist("uniform(0,1)")?;
    let alt = dist(FIG1_ALT)?;
    let mut table = PowerTable::default();
    for &n in ns {
        for &k in ks {
            let edges = binning::equal_prob_edges(&null, k)?;
            let probs = binning::bin_probabilities(&null, &edges);
            if !binning::admissible(n as f64, &probs, MIN_EXPECTED) {
                continue;
            }
            let scheme = BinningScheme::new(0.0, edges, probs)?;
            let (power, se) = power_fast(&null, &alt, &scheme, StatisticKind::Pearson, n, 0.05, replicates, seed)?;
            table.rows.push(PowerRow {
                study: "fig1".into(),
                param: k as f64,
                label: k.to_string(),
                method: format!("n={n}"),
                power,
                se,
                replicates,
                failures: 0,
                n: n as f64,
                alpha: 0.05,
                seed,
            });
        }
    }
    Ok(table)
}

/// Merit of every Pearson grid entry for the linear-versus-truncated
/// exponential case, as a table with one line per kappa.
pub fn fig2_selection() -> Result<SchemeChoice> {
    let null = spec(FIG2_NULL)?;
    let alt = dist(FIG2_ALT)?;
    selection::select_scheme(&null, &alt, FIG2_N, &pearson_grid(), Default::default())
}

fn kappa_label(kappa: f64) -> String {
    format!("kappa={}", fmt_param(kappa))
}

/// Power over the Pearson grid for the linear-versus-truncated exponential
/// case; inadmissible entries are left out.
pub fn fig3_table(n: usize, replicates: usize, seed: u64) -> Result<PowerTable> {
    let null = dist(FIG2_NULL)?;
    let alt = dist(FIG2_ALT)?;
    let grid = pearson_grid();
    let mut table = PowerTable::default();
    for &kappa in &grid.kappa_values {
        for &k in &grid.k_values {
            let scheme = BinningScheme::interpolated(&null, k, kappa, EqualSizeOptions::default())?;
            if !binning::admissible(n as f64, &scheme.null_probs, MIN_EXPECTED) {
                continue;
            }
            let (power, se) = power_fast(&null, &alt, &scheme, StatisticKind::Pearson, n, 0.05, replicates, seed)?;
            table.rows.push(PowerRow {
                study: "fig3".into(),
                param: k as f64,
                label: k.to_string(),
                method: kappa_label(kappa),
                power,
                se,
                replicates,
                failures: 0,
                n: n as f64,
                alpha: 0.05,
                seed,
            });
        }
    }
    Ok(table)
}

#[allow(clippy::too_many_arguments)]
fn simple_manifest(study: &str, null: &str, alt: &str, params: Vec<String>, methods: Vec<String>, n: usize, scale: &Scale, alphas: Vec<f64>, assumptions: Vec<String>) -> Manifest {
    Manifest {
        study: study.into(),
        null: null.into(),
        alternative: alt.into(),
        params,
        methods,
        n,
        replicates: scale.replicates,
        inner_replicates: scale.inner_replicates,
        alphas,
        seed: scale.seed,
        assumptions,
    }
}

/// Runs one reproduction target.
pub fn reproduce(target: &str, scale: &Scale) -> Result<Reproduction> {
    let target = target.to_ascii_lowercase();
    match target.as_str() {
        "table1" => {
            let nulls = table1_nulls()?;
            let table = type1_table(&nulls, &TABLE1_ALPHAS, scale.n, scale.replicates, scale.seed)?;
            let manifest = simple_manifest(
                "table1",
                "each listed null",
                "the null itself; composite rows draw from normal(0,1) and exp(1)",
                nulls.iter().map(|n| n.0.clone()).collect(),
                vec!["RG".into()],
                scale.n,
                scale,
                TABLE1_ALPHAS.to_vec(),
                vec![
                    format!("sample size {}", scale.n),
                    "gamma(3,0.5) has shape 3 and rate 0.5".into(),
                ],
            );
            Ok(Reproduction {
                csv: table.to_csv(),
                table,
                style: ChartStyle::Bar,
                x_label: "null distribution".into(),
                y_label: "rejection rate".into(),
                manifest,
            })
        }
        "fig1" => {
            let ks: Vec<usize> = (2..=21).collect();
            let table = fig1_table(&FIG1_NS, &ks, scale.replicates, scale.seed)?;
            let manifest = simple_manifest(
                "fig1",
                "uniform(0,1)",
                FIG1_ALT,
                ks.iter().map(|k| k.to_string()).collect(),
                FIG1_NS.iter().map(|n| format!("n={n}")).collect(),
                0,
                scale,
                vec![0.05],
                vec![
                    "equal bins with Pearson's statistic".into(),
                    "bin counts at which some expected count is below 5 are omitted".into(),
                ],
            );
            Ok(Reproduction {
                csv: table.to_csv(),
                table,
                style: ChartStyle::Line,
                x_label: "number of bins".into(),
                y_label: "power".into(),
                manifest,
            })
        }
        "fig2" => {
            let choice = fig2_selection()?;
            let mut table = PowerTable::default();
            let grid = pearson_grid();
            for &kappa in &grid.kappa_values {
                for e in choice.grid_report.iter().filter(|e| e.kappa == kappa) {
                    if let Some(m) = e.merit {
                        table.rows.push(PowerRow {
                            study: "fig2".into(),
                            param: e.k as f64,
                            label: e.k.to_string(),
                            method: kappa_label(kappa),
                            power: m,
                            se: 0.0,
                            replicates: 0,
                            failures: 0,
                            n: FIG2_N as f64,
                            alpha: 0.05,
                            seed: scale.seed,
                        });
                    }
                }
            }
            let manifest = simple_manifest(
                "fig2",
                FIG2_NULL,
                FIG2_ALT,
                grid.k_values.iter().map(|k| k.to_string()).collect(),
                grid.kappa_values.iter().map(|&k| kappa_label(k)).collect(),
                FIG2_N,
                scale,
                vec![0.05],
                vec![format!(
                    "selected k = {}, kappa = {}",
                    choice.scheme.k,
                    fmt_param(choice.scheme.kappa)
                )],
            );
            Ok(Reproduction {
                csv: selection::grid_report_csv(&choice.grid_report),
                table,
                style: ChartStyle::Line,
                x_label: "number of bins".into(),
                y_label: "merit".into(),
                manifest,
            })
        }
        "fig3" => {
            let table = fig3_table(FIG2_N, scale.replicates, scale.seed)?;
            let grid = pearson_grid();
            let manifest = simple_manifest(
                "fig3",
                FIG2_NULL,
                FIG2_ALT,
                grid.k_values.iter().map(|k| k.to_string()).collect(),
                grid.kappa_values.iter().map(|&k| kappa_label(k)).collect(),
                FIG2_N,
                scale,
                vec![0.05],
                vec!["multinomial counts drawn from the alternative's bin probabilities".into()],
            );
            Ok(Reproduction {
                csv: table.to_csv(),
                table,
                style: ChartStyle::Line,
                x_label: "number of bins".into(),
                y_label: "power".into(),
                manifest,
            })
        }
        t if t.starts_with("fig") => {
            let (study, manifest) = curve_study(t, scale)?;
            let table = run_study(&study)?;
            let x_label = match t {
                "fig4" | "fig5" => "df",
                "fig6" => "slope",
                "fig7" => "sigma",
                "fig8" | "fig9" => "q",
                _ => "r",
            };
            Ok(Reproduction {
                csv: table.to_csv(),
                table,
                style: ChartStyle::Line,
                x_label: x_label.into(),
                y_label: "power".into(),
                manifest,
            })
        }
        other => Err(Error::InvalidInput(format!(
            "unknown reproduction target '{other}'; expected one of {}",
            TARGETS.join(", ")
        ))),
    }
}
