//! The RG chi-square test on raw data, on pre-binned data, and with a
//! Poisson-distributed sample size.
//!
//! Selection fixes `(k, kappa, statistic)` before any data are looked at.
//! For composite nulls the bins are then placed under the unbinned maximum
//! likelihood fit to the data, and the parameters entering the expected
//! counts are re-estimated by minimum chi-square on those bins.

use serde::{Deserialize, Serialize};

use crate::binning::{self, BinnedData};
use crate::distributions::{Distribution, DistributionSpec};
use crate::error::{Error, Result};
use crate::estimation::{self, FitOptions, StartData};
pub use crate::mc::SampleSize;
use crate::selection::{self, SchemeChoice, SelectionGrid, SelectionOptions};
use crate::statistic::{chisq_pvalue, chisq_stat, StatisticKind};

/// Version of the serialized report layout.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct RgConfig {
    pub alpha: f64,
    /// `None` uses [`SelectionGrid::default_for`].
    pub grid: Option<SelectionGrid>,
    pub selection: SelectionOptions,
}

impl Default for RgConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            grid: None,
            selection: SelectionOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub schema_version: u32,
    pub sample_size: SampleSize,
    pub n: usize,
    pub observed: Vec<f64>,
    pub expected: Vec<f64>,
    /// Merit of the selected grid entry.
    pub merit: f64,
    pub selected_k: usize,
    pub selected_kappa: f64,
    pub selected_kind: StatisticKind,
    pub grid_entries: usize,
    pub admissible_entries: usize,
    /// Set when the selected entry could not be applied to these data.
    pub fallback: Option<String>,
    pub out_of_range: usize,
    pub warnings: Vec<String>,
}

/// Outcome of one test. The decision is data in the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub k: usize,
    pub kappa: f64,
    pub kind: StatisticKind,
    pub edges: Vec<f64>,
    pub theta: Vec<f64>,
    pub statistic: f64,
    pub df: usize,
    pub pvalue: f64,
    pub alpha: f64,
    pub reject: bool,
    pub diagnostics: Diagnostics,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("alpha {alpha} outside (0, 1)")))
    }
}

/// Runs scheme selection with the configured or default grid. In Poisson
/// mode the statistics are restricted to those that do not assume fixed
/// totals.
pub fn select_for(
    null: &DistributionSpec,
    f1: &Distribution,
    n: usize,
    cfg: &RgConfig,
    poisson: bool,
) -> Result<SchemeChoice> {
    let p = null.free_count();
    let mut grid = cfg
        .grid
        .clone()
        .unwrap_or_else(|| SelectionGrid::default_for(n, p, poisson));
    if poisson {
        grid.kinds.retain(|k| StatisticKind::POISSON.contains(k));
        if grid.kinds.is_empty() {
            return Err(Error::InvalidInput(
                "Poisson sample size supports only the Pearson and LambdaP statistics".into(),
            ));
        }
    }
    let opts = SelectionOptions { poisson, ..cfg.selection };
    selection::select_scheme(null, f1, n, &grid, opts)
}

struct Evaluated {
    edges: Vec<f64>,
    observed: Vec<f64>,
    expected: Vec<f64>,
    theta: Vec<f64>,
    statistic: f64,
    df: usize,
    out_of_range: usize,
}

/// Data-side work shared by every grid entry tried on one data set.
struct Prepared<'a> {
    data: &'a [f64],
    null: &'a DistributionSpec,
    choice: &'a SchemeChoice,
    sample_size: SampleSize,
    opts: SelectionOptions,
    /// Distribution the bins are placed under.
    placement: Distribution,
    theta_start: Vec<f64>,
    warnings: Vec<String>,
}

impl<'a> Prepared<'a> {
    fn new(
        data: &'a [f64],
        null: &'a DistributionSpec,
        choice: &'a SchemeChoice,
        sample_size: SampleSize,
        opts: SelectionOptions,
    ) -> Result<Self> {
        let mut warnings = Vec::new();
        let theta_start = if null.is_simple() {
            Vec::new()
        } else {
            let start = estimation::default_start(null, StartData::Values(data));
            match estimation::unbinned_mle(null, data, &start) {
                Ok(fit) => estimation::canonicalize_mixture(null, &fit.theta),
                Err(e) => {
                    warnings.push(format!("unbinned fit for bin placement failed ({e}); using the selection reference"));
                    choice.theta_ref.clone()
                }
            }
        };
        let placement = null.bind(&theta_start)?;
        Ok(Self {
            data,
            null,
            choice,
            sample_size,
            opts,
            placement,
            theta_start,
            warnings,
        })
    }

    fn evaluate(&self, k: usize, kappa: f64, kind: StatisticKind) -> Result<Evaluated> {
        let p = self.null.free_count();
        let poisson = matches!(self.sample_size, SampleSize::Poisson { .. });
        let df = selection::degrees_of_freedom(k, p, poisson)
            .ok_or_else(|| Error::NoAdmissibleScheme(format!("{k} bins leave no degrees of freedom")))?;
        let same_as_choice = k == self.choice.scheme.k && kappa == self.choice.scheme.kappa;
        let edges = if p == 0 && same_as_choice {
            self.choice.scheme.edges.clone()
        } else {
            selection::scheme_edges(&self.placement, k, kappa, &self.opts)?
        };
        let counts = binning::bin_counts(self.data, &edges);
        let observed: Vec<f64> = counts.counts.iter().map(|&c| c as f64).collect();
        let total = match self.sample_size {
            SampleSize::Multinomial => observed.iter().sum::<f64>(),
            SampleSize::Poisson { lambda } => lambda,
        };
        if !(total > 0.0) {
            return Err(Error::InvalidInput("no observations inside the bin range".into()));
        }
        let (theta, null) = if p == 0 {
            (Vec::new(), self.placement.clone())
        } else {
            let fit = estimation::minimum_chisq_with(
                self.null,
                &observed,
                &edges,
                kind,
                &self.theta_start,
                total,
                &FitOptions::default(),
            )?;
            let null = self.null.bind(&fit.theta)?;
            (fit.theta, null)
        };
        let expected: Vec<f64> = binning::bin_probabilities(&null, &edges)
            .into_iter()
            .map(|q| total * q)
            .collect();
        let statistic = chisq_stat(kind, &observed, &expected)?;
        Ok(Evaluated {
            edges,
            observed,
            expected,
            theta,
            statistic,
            df,
            out_of_range: counts.out_of_range,
        })
    }
}

#[allow(clippy::too_many_arguments)]
fn build_report(
    ev: Evaluated,
    entry: (usize, f64, StatisticKind),
    choice: &SchemeChoice,
    sample_size: SampleSize,
    n: usize,
    alpha: f64,
    fallback: Option<String>,
    mut warnings: Vec<String>,
) -> TestReport {
    let pvalue = chisq_pvalue(ev.statistic, ev.df as f64);
    let min_e = ev.expected.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_e < binning::MIN_EXPECTED * (1.0 - 1e-9) {
        warnings.push(format!("smallest expected count {min_e:.3} is below {}", binning::MIN_EXPECTED));
    }
    if ev.out_of_range > 0 {
        warnings.push(format!("{} value(s) fall outside the bin range and were ignored", ev.out_of_range));
    }
    let merit = choice
        .grid_report
        .iter()
        .find(|e| (e.k, e.kappa, e.kind) == entry)
        .and_then(|e| e.merit)
        .unwrap_or(f64::NAN);
    TestReport {
        k: entry.0,
        kappa: entry.1,
        kind: entry.2,
        edges: ev.edges,
        theta: ev.theta,
        statistic: ev.statistic,
        df: ev.df,
        pvalue,
        alpha,
        reject: pvalue < alpha,
        diagnostics: Diagnostics {
            schema_version: REPORT_SCHEMA_VERSION,
            sample_size,
            n,
            observed: ev.observed,
            expected: ev.expected,
            merit,
            selected_k: choice.scheme.k,
            selected_kappa: choice.scheme.kappa,
            selected_kind: choice.kind,
            grid_entries: choice.grid_report.len(),
            admissible_entries: choice.grid_report.iter().filter(|e| e.admissible).count(),
            fallback,
            out_of_range: ev.out_of_range,
            warnings,
        },
    }
}

/// Applies an already selected scheme to `data`. If the selection is the
/// Neyman form and a bin is empty, the best admissible entry with another
/// statistic is used instead and the fallback is recorded.
pub fn apply_choice(
    data: &[f64],
    null: &DistributionSpec,
    choice: &SchemeChoice,
    sample_size: SampleSize,
    alpha: f64,
    opts: SelectionOptions,
) -> Result<TestReport> {
    check_alpha(alpha)?;
    if data.is_empty() && matches!(sample_size, SampleSize::Multinomial) {
        return Err(Error::InvalidInput("no data".into()));
    }
    let prep = Prepared::new(data, null, choice, sample_size, opts)?;
    let selected = (choice.scheme.k, choice.scheme.kappa, choice.kind);
    let (ev, entry, fallback) = match prep.evaluate(selected.0, selected.1, selected.2) {
        Ok(ev) => (ev, selected, None),
        Err(Error::ZeroObservedCount { bin }) => {
            let mut found = None;
            for e in selection::ranked_entries(&choice.grid_report) {
                if e.kind == StatisticKind::NeymanModified {
                    continue;
                }
                if let Ok(ev) = prep.evaluate(e.k, e.kappa, e.kind) {
                    found = Some((ev, (e.k, e.kappa, e.kind)));
                    break;
                }
            }
            let (ev, entry) = found.ok_or_else(|| {
                Error::NoAdmissibleScheme("no non-Neyman grid entry could be applied to the data".into())
            })?;
            let note = format!(
                "selected NeymanModified (k = {}, kappa = {}) but bin {bin} is empty; used {} (k = {}, kappa = {})",
                selected.0, selected.1, entry.2, entry.0, entry.1
            );
            (ev, entry, Some(note))
        }
        Err(e) => return Err(e),
    };
    let warnings = prep.warnings.clone();
    Ok(build_report(ev, entry, choice, sample_size, data.len(), alpha, fallback, warnings))
}

/// The RG test on raw data with a fixed sample size `n = data.len()`.
pub fn rg_test(data: &[f64], null: &DistributionSpec, f1: &Distribution, cfg: &RgConfig) -> Result<TestReport> {
    check_alpha(cfg.alpha)?;
    if data.is_empty() {
        return Err(Error::InvalidInput("no data".into()));
    }
    let choice = select_for(null, f1, data.len(), cfg, false)?;
    apply_choice(data, null, &choice, SampleSize::Multinomial, cfg.alpha, cfg.selection)
}

/// The RG test when the sample size is Poisson with rate `lambda`. Selection
/// uses `n = round(lambda)`, expected counts are `lambda p`, and the degrees
/// of freedom are `k - p`.
pub fn rg_test_poisson(
    data: &[f64],
    lambda: f64,
    null: &DistributionSpec,
    f1: &Distribution,
    cfg: &RgConfig,
) -> Result<TestReport> {
    check_alpha(cfg.alpha)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidInput(format!("Poisson rate {lambda} must be positive")));
    }
    let n = lambda.round().max(1.0) as usize;
    let choice = select_for(null, f1, n, cfg, true)?;
    apply_choice(data, null, &choice, SampleSize::Poisson { lambda }, cfg.alpha, cfg.selection)
}

/// The RG test on pre-binned data: the ideal edges are snapped onto the data
/// bin edges, counts are aggregated, and grid entries are tried from best to
/// worst until one stays admissible after snapping.
pub fn rg_test_prebinned(
    binned: &BinnedData,
    null: &DistributionSpec,
    f1: &Distribution,
    cfg: &RgConfig,
) -> Result<TestReport> {
    check_alpha(cfg.alpha)?;
    let available = binned.edges();
    if available.len() < 3 {
        return Err(Error::InvalidInput("pre-binned data need at least two bins".into()));
    }
    let n = binned.total() as usize;
    if n == 0 {
        return Err(Error::InvalidInput("pre-binned data have no observations".into()));
    }
    let choice = select_for(null, f1, n, cfg, false)?;
    let p = null.free_count();
    let all_counts: Vec<f64> = binned.counts().iter().map(|&c| c as f64).collect();

    // Placement distribution: the null itself, or the binned likelihood fit.
    let (placement, theta_start) = if p == 0 {
        (null.bind(&[])?, Vec::new())
    } else {
        let start = estimation::default_start(
            null,
            StartData::Binned {
                counts: &all_counts,
                edges: available,
            },
        );
        let theta = match estimation::binned_mle(null, &all_counts, available, &start) {
            Ok(fit) => estimation::canonicalize_mixture(null, &fit.theta),
            Err(_) => choice.theta_ref.clone(),
        };
        (null.bind(&theta)?, theta)
    };
    let support = placement.support();
    let total = n as f64;
    let selected = (choice.scheme.k, choice.scheme.kappa, choice.kind);
    let mut skipped = Vec::new();
    for entry in selection::ranked_entries(&choice.grid_report) {
        let key = (entry.k, entry.kappa, entry.kind);
        let ideal = selection::scheme_edges(&placement, entry.k, entry.kappa, &cfg.selection)?;
        let Ok(snapped) = binning::snap_to_data_edges(&ideal, available) else {
            skipped.push(format!("k = {}: snapping failed", entry.k));
            continue;
        };
        let observed: Vec<f64> = binned.aggregate(&snapped)?.into_iter().map(|c| c as f64).collect();
        // All observations lie inside the outer data bins, so for the
        // probabilities the outer bins extend to the support ends.
        let mut prob_edges = snapped.clone();
        let last = prob_edges.len() - 1;
        prob_edges[0] = prob_edges[0].min(support.lower);
        prob_edges[last] = prob_edges[last].max(support.upper);
        let (theta, null_d) = if p == 0 {
            (Vec::new(), placement.clone())
        } else {
            match estimation::minimum_chisq_with(
                null,
                &observed,
                &prob_edges,
                entry.kind,
                &theta_start,
                total,
                &FitOptions::default(),
            ) {
                Ok(fit) => {
                    let d = null.bind(&fit.theta)?;
                    (fit.theta, d)
                }
                Err(e) => {
                    skipped.push(format!("{} k = {} kappa = {}: {e}", entry.kind, entry.k, entry.kappa));
                    continue;
                }
            }
        };
        let probs = binning::bin_probabilities(&null_d, &prob_edges);
        if !binning::admissible(total, &probs, binning::MIN_EXPECTED) {
            skipped.push(format!("{} k = {} kappa = {}: inadmissible after snapping", entry.kind, entry.k, entry.kappa));
            continue;
        }
        let expected: Vec<f64> = probs.iter().map(|q| total * q).collect();
        let statistic = match chisq_stat(entry.kind, &observed, &expected) {
            Ok(s) => s,
            Err(e) => {
                skipped.push(format!("{} k = {} kappa = {}: {e}", entry.kind, entry.k, entry.kappa));
                continue;
            }
        };
        let df = selection::degrees_of_freedom(entry.k, p, false).expect("grid entries have positive df");
        let ev = Evaluated {
            edges: snapped,
            observed,
            expected,
            theta,
            statistic,
            df,
            out_of_range: 0,
        };
        let fallback = (key != selected).then(|| {
            format!(
                "selected {} (k = {}, kappa = {}) could not be used on the data bins; used the next best entry",
                selected.2, selected.0, selected.1
            )
        });
        let mut warnings = Vec::new();
        if !skipped.is_empty() {
            warnings.push(format!("skipped {} grid entries: {}", skipped.len(), skipped.join("; ")));
        }
        return Ok(build_report(ev, key, &choice, SampleSize::Multinomial, n, cfg.alpha, fallback, warnings));
    }
    Err(Error::NoAdmissibleScheme(
        "no grid entry stays admissible on the data bins".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::stream;
    use crate::selection::perfect_sample;

    fn spec(s: &str) -> DistributionSpec {
        DistributionSpec::parse(s).unwrap()
    }

    fn dist(s: &str) -> Distribution {
        spec(s).bind(&[]).unwrap()
    }

    #[test]
    fn perfect_null_data_do_not_reject() {
        let null = spec("exp(1)");
        let data = perfect_sample(&dist("exp(1)"), 1000).unwrap();
        let r = rg_test(&data, &null, &dist("gamma(1.3, 1.3)"), &RgConfig::default()).unwrap();
        assert!(r.statistic < 0.05, "{}", r.statistic);
        assert!(r.pvalue >= 0.99 || r.df > 1 && r.pvalue > 0.95, "{}", r.pvalue);
        assert!(!r.reject);
        assert_eq!(r.df, r.k - 1);
    }

    #[test]
    fn perfect_alternative_data_reproduce_the_merit_numerator() {
        let null = spec("uniform(0,1)");
        let f1 = dist("linear(0.3)");
        let data = perfect_sample(&f1, 1000).unwrap();
        let cfg = RgConfig::default();
        let choice = select_for(&null, &f1, 1000, &cfg, false).unwrap();
        let r = apply_choice(&data, &null, &choice, SampleSize::Multinomial, 0.05, cfg.selection).unwrap();
        let crit = crate::statistic::chisq_quantile(0.95, r.df as f64).unwrap();
        assert!(r.statistic >= choice.merit * crit - 1e-9);
        assert!((r.statistic - choice.merit * crit).abs() < 1e-9);
    }

    #[test]
    fn scheme_does_not_depend_on_data() {
        let null = spec("normal(?,?)");
        let f1 = dist("t(4)");
        let cfg = RgConfig::default();
        let a = dist("normal(0,1)").sample(400, &mut stream(1, 0, 0));
        let b = dist("t(4)").sample(400, &mut stream(1, 0, 1));
        let ra = rg_test(&a, &null, &f1, &cfg).unwrap();
        let rb = rg_test(&b, &null, &f1, &cfg).unwrap();
        let sel = |r: &TestReport| (r.diagnostics.selected_k, r.diagnostics.selected_kappa, r.diagnostics.selected_kind);
        assert_eq!(sel(&ra), sel(&rb));
        assert_eq!(ra.df, ra.k - 3);
        assert_eq!(ra.theta.len(), 2);
    }

    #[test]
    fn decision_is_monotone_in_alpha() {
        let null = spec("uniform(0,1)");
        let f1 = dist("linear(0.2)");
        let data = f1.sample(300, &mut stream(2, 0, 0));
        let mut last = false;
        for alpha in [0.001, 0.01, 0.05, 0.1, 0.3, 0.6] {
            let cfg = RgConfig {
                alpha,
                ..RgConfig::default()
            };
            let r = rg_test(&data, &null, &f1, &cfg).unwrap();
            assert!(!last || r.reject);
            last = r.reject;
        }
    }

    #[test]
    fn neyman_zero_bin_falls_back() {
        // Uniform against linear selects the Neyman form; data piled into the
        // upper half leave the first bin empty.
        let null = spec("uniform(0,1)");
        let f1 = dist("linear(0.2)");
        let cfg = RgConfig::default();
        let choice = select_for(&null, &f1, 100, &cfg, false).unwrap();
        assert_eq!(choice.kind, StatisticKind::NeymanModified);
        let data: Vec<f64> = (0..100).map(|i| 0.7 + 0.003 * i as f64).collect();
        let r = apply_choice(&data, &null, &choice, SampleSize::Multinomial, 0.05, cfg.selection).unwrap();
        assert_ne!(r.kind, StatisticKind::NeymanModified);
        assert!(r.diagnostics.fallback.is_some());
        assert!(r.reject);
    }

    #[test]
    fn poisson_degrees_of_freedom() {
        let f1 = dist("gamma(1.3, 1.3)");
        let cfg = RgConfig::default();
        let data = dist("exp(1)").sample(1000, &mut stream(3, 0, 0));
        let r = rg_test_poisson(&data, 1000.0, &spec("exp(1)"), &f1, &cfg).unwrap();
        assert_eq!(r.df, r.k);
        assert!(StatisticKind::POISSON.contains(&r.kind));
        let r = rg_test_poisson(&data, 1000.0, &spec("exp(?)"), &f1, &cfg).unwrap();
        assert_eq!(r.df, r.k - 1);
        assert_eq!(r.diagnostics.sample_size, SampleSize::Poisson { lambda: 1000.0 });
    }

    #[test]
    fn poisson_exact_counts() {
        // Data placed so that each bin holds exactly lambda * p.
        let null = spec("uniform(0,1)");
        let f1 = dist("linear(0.2)");
        let cfg = RgConfig {
            grid: Some(SelectionGrid {
                k_values: vec![4],
                kappa_values: vec![0.0],
                kinds: vec![StatisticKind::Pearson],
            }),
            ..RgConfig::default()
        };
        let data: Vec<f64> = (0..200).map(|i| (i as f64 + 0.5) / 200.0).collect();
        let r = rg_test_poisson(&data, 200.0, &null, &f1, &cfg).unwrap();
        assert!(r.statistic.abs() < 1e-12);
        assert!(r.pvalue > 0.999);
        assert_eq!(r.df, 4);
    }

    #[test]
    fn prebinned_matches_raw_on_aligned_bins() {
        let null = spec("uniform(0,1)");
        let f1 = dist("linear(0.25)");
        let cfg = RgConfig::default();
        let data = f1.sample(1000, &mut stream(4, 0, 0));
        let raw = rg_test(&data, &null, &f1, &cfg).unwrap();
        // Data bins at the selected edges reproduce the raw-data test.
        let counts = binning::bin_counts(&data, &raw.edges).counts;
        let binned = BinnedData::new(raw.edges.clone(), counts).unwrap();
        let r = rg_test_prebinned(&binned, &null, &f1, &cfg).unwrap();
        assert_eq!((r.k, r.kappa, r.kind), (raw.k, raw.kappa, raw.kind));
        assert!((r.statistic - raw.statistic).abs() < 1e-9);
        assert_eq!(r.df, raw.df);
    }

    #[test]
    fn prebinned_snaps_to_data_edges() {
        let null = spec("uniform(0,1)");
        let f1 = dist("linear(0.3)");
        let cfg = RgConfig::default();
        let data = f1.sample(1000, &mut stream(5, 0, 0));
        let edges: Vec<f64> = (0..=50).map(|i| i as f64 / 50.0).collect();
        let counts = binning::bin_counts(&data, &edges).counts;
        let binned = BinnedData::new(edges.clone(), counts).unwrap();
        let r = rg_test_prebinned(&binned, &null, &f1, &cfg).unwrap();
        assert!(r.edges.iter().all(|e| edges.contains(e)));
        assert_eq!(r.diagnostics.observed.iter().sum::<f64>(), 1000.0);
        let single = BinnedData::new(vec![0.0, 1.0], vec![10]).unwrap();
        assert!(rg_test_prebinned(&single, &null, &f1, &cfg).is_err());
    }

    #[test]
    fn report_serializes_with_stable_fields() {
        let null = spec("uniform(0,1)");
        let f1 = dist("linear(0.2)");
        let data = f1.sample(200, &mut stream(6, 0, 0));
        let r = rg_test(&data, &null, &f1, &RgConfig::default()).unwrap();
        let v = serde_json::to_value(&r).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(|s| s.as_str()).collect();
        for key in ["k", "kappa", "kind", "edges", "theta", "statistic", "df", "pvalue", "alpha", "reject", "diagnostics"] {
            assert!(keys.contains(&key), "{key}");
        }
        assert_eq!(keys.len(), 11);
        assert_eq!(v["diagnostics"]["schema_version"], 1);
    }

    #[test]
    fn bad_inputs() {
        let null = spec("uniform(0,1)");
        let f1 = dist("linear(0.2)");
        assert!(rg_test(&[], &null, &f1, &RgConfig::default()).is_err());
        let cfg = RgConfig {
            alpha: 1.5,
            ..RgConfig::default()
        };
        assert!(rg_test(&[0.5; 20], &null, &f1, &cfg).is_err());
        assert!(rg_test_poisson(&[0.5; 20], 0.0, &null, &f1, &RgConfig::default()).is_err());
    }
}
