//! EDF goodness-of-fit statistics (Kolmogorov-Smirnov, Anderson-Darling and
//! Zhang's ZK, ZA, ZC) with simulated null distributions.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{Arg, Distribution, DistributionSpec, FamilyName, SpecNode};
use crate::error::{Error, Result};
use crate::estimation::{self, StartData};
use crate::mc::{self, SampleSize};

/// Probabilities are kept this far away from 0 and 1 before taking logs.
pub const U_CLAMP: f64 = 1e-12;

/// Smallest accepted number of simulated replicates.
pub const MIN_REPLICATES: usize = 99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdfKind {
    KS,
    AD,
    ZK,
    ZA,
    ZC,
}

impl EdfKind {
    pub const ALL: [EdfKind; 5] = [EdfKind::KS, EdfKind::AD, EdfKind::ZK, EdfKind::ZA, EdfKind::ZC];

    pub fn name(self) -> &'static str {
        match self {
            EdfKind::KS => "KS",
            EdfKind::AD => "AD",
            EdfKind::ZK => "ZK",
            EdfKind::ZA => "ZA",
            EdfKind::ZC => "ZC",
        }
    }
}

impl fmt::Display for EdfKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EdfKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EdfKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidInput(format!("unknown EDF statistic '{s}'")))
    }
}

/// Sorted, clamped probability transforms `F(x_(i))`.
fn transformed(data: &[f64], f: &Distribution) -> Vec<f64> {
    let mut u: Vec<f64> = data.iter().map(|&x| f.cdf(x).clamp(U_CLAMP, 1.0 - U_CLAMP)).collect();
    u.sort_by(f64::total_cmp);
    u
}

/// Statistic from sorted probabilities in `(0, 1)`.
fn statistic_sorted(kind: EdfKind, u: &[f64]) -> f64 {
    let n = u.len() as f64;
    let it = u.iter().enumerate().map(|(j, &ui)| ((j + 1) as f64, ui));
    match kind {
        EdfKind::KS => it
            .map(|(i, ui)| (i / n - ui).max(ui - (i - 1.0) / n))
            .fold(0.0, f64::max),
        EdfKind::AD => {
            let m = u.len();
            let s: f64 = (0..m)
                .map(|j| (2.0 * j as f64 + 1.0) * (u[j].ln() + (1.0 - u[m - 1 - j]).ln()))
                .sum();
            -n - s / n
        }
        EdfKind::ZK => it
            .map(|(i, ui)| {
                (i - 0.5) * ((i - 0.5) / (n * ui)).ln() + (n - i + 0.5) * ((n - i + 0.5) / (n * (1.0 - ui))).ln()
            })
            .fold(f64::NEG_INFINITY, f64::max),
        EdfKind::ZA => -it
            .map(|(i, ui)| ui.ln() / (n - i + 0.5) + (1.0 - ui).ln() / (i - 0.5))
            .sum::<f64>(),
        EdfKind::ZC => it
            .map(|(i, ui)| {
                let r = ((1.0 / ui - 1.0) / ((n - 0.5) / (i - 0.75) - 1.0)).ln();
                r * r
            })
            .sum(),
    }
}

/// EDF statistic of `data` against the fully specified `f`.
pub fn edf_statistic(kind: EdfKind, data: &[f64], f: &Distribution) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidInput("EDF statistic of an empty sample".into()));
    }
    Ok(statistic_sorted(kind, &transformed(data, f)))
}

/// All statistics in `kinds` from one transform of the data.
pub fn edf_statistics(kinds: &[EdfKind], data: &[f64], f: &Distribution) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::InvalidInput("EDF statistic of an empty sample".into()));
    }
    let u = transformed(data, f);
    Ok(kinds.iter().map(|&k| statistic_sorted(k, &u)).collect())
}

/// `(1 + b) / (B + 1)` where `b` counts replicate statistics at least as
/// large as the observed one.
pub fn pvalue_from_count(exceed: usize, replicates: usize) -> f64 {
    (1 + exceed) as f64 / (replicates + 1) as f64
}

/// Families whose EDF statistics have a parameter-free null distribution
/// once the free parameters are replaced by their maximum likelihood
/// estimates (location and scale families).
pub fn is_pivotal(null: &DistributionSpec) -> bool {
    if null.is_simple() {
        return true;
    }
    match null.root() {
        SpecNode::Atom { family, args } => matches!(
            (family, args.as_slice()),
            (FamilyName::Normal, [Arg::Free, _])
                | (FamilyName::Exponential, [Arg::Free])
                | (FamilyName::Uniform, [Arg::Free, Arg::Free])
                | (FamilyName::Gamma, [Arg::Fixed(_), Arg::Free])
        ),
        _ => false,
    }
}

/// Maximum likelihood fit of a composite null; the null itself if simple.
pub fn fit_null(null: &DistributionSpec, data: &[f64]) -> Result<(Distribution, Vec<f64>)> {
    if null.is_simple() {
        return Ok((null.bind(&[])?, Vec::new()));
    }
    let start = estimation::default_start(null, StartData::Values(data));
    let fit = estimation::unbinned_mle(null, data, &start)?;
    let theta = estimation::canonicalize_mixture(null, &fit.theta);
    Ok((null.bind(&theta)?, theta))
}

/// Simulated null distributions of several EDF statistics, one sorted vector
/// per kind, all computed from the same replicate data sets.
#[derive(Debug, Clone, PartialEq)]
pub struct EdfReference {
    kinds: Vec<EdfKind>,
    sorted: Vec<Vec<f64>>,
    replicates: usize,
    failures: usize,
}

impl EdfReference {
    /// Draws `replicates` data sets of size `n` (or Poisson sizes) from
    /// `generator`; for a composite null every replicate is refitted before
    /// its statistics are computed. Replicate `r` uses stream
    /// `(seed, cell, r)`.
    #[allow(clippy::too_many_arguments)]
    pub fn simulate(
        kinds: &[EdfKind],
        null: &DistributionSpec,
        generator: &Distribution,
        n: usize,
        sample_size: SampleSize,
        replicates: usize,
        seed: u64,
        cell: u64,
    ) -> Result<Self> {
        if replicates < MIN_REPLICATES {
            return Err(Error::InvalidInput(format!(
                "at least {MIN_REPLICATES} simulated replicates are needed, got {replicates}"
            )));
        }
        if kinds.is_empty() {
            return Err(Error::InvalidInput("no EDF statistics requested".into()));
        }
        let rows: Vec<Option<Vec<f64>>> = (0..replicates as u64)
            .into_par_iter()
            .map(|r| {
                let mut rng = mc::stream(seed, cell, r);
                let m = sample_size.draw(n, &mut rng);
                if m == 0 {
                    return Some(vec![0.0; kinds.len()]);
                }
                let x = generator.sample(m, &mut rng);
                let (fitted, _) = fit_null(null, &x).ok()?;
                edf_statistics(kinds, &x, &fitted).ok()
            })
            .collect();
        let failures = rows.iter().filter(|r| r.is_none()).count();
        if failures * 100 > replicates {
            return Err(Error::Optimization(format!(
                "maximum likelihood fit failed on {failures} of {replicates} simulated data sets"
            )));
        }
        let mut sorted = vec![Vec::with_capacity(replicates); kinds.len()];
        for row in rows.iter().flatten() {
            for (s, &v) in sorted.iter_mut().zip(row) {
                s.push(v);
            }
        }
        for s in &mut sorted {
            s.sort_by(f64::total_cmp);
        }
        Ok(Self {
            kinds: kinds.to_vec(),
            sorted,
            replicates,
            failures,
        })
    }

    pub fn kinds(&self) -> &[EdfKind] {
        &self.kinds
    }

    pub fn replicates(&self) -> usize {
        self.replicates
    }

    /// Replicates dropped because the refit failed.
    pub fn failures(&self) -> usize {
        self.failures
    }

    /// Simulated p-value of an observed statistic. Failed replicates count
    /// neither as exceedances nor in `B`.
    pub fn pvalue(&self, kind: EdfKind, observed: f64) -> Result<f64> {
        let i = self
            .kinds
            .iter()
            .position(|&k| k == kind)
            .ok_or_else(|| Error::InvalidInput(format!("{kind} is not in this reference")))?;
        let s = &self.sorted[i];
        let below = s.partition_point(|&v| v < observed);
        Ok(pvalue_from_count(s.len() - below, s.len()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdfOutcome {
    pub kind: EdfKind,
    pub statistic: f64,
    pub pvalue: f64,
    pub theta: Vec<f64>,
}

/// EDF test with a simulated p-value. Composite nulls are fitted by unbinned
/// maximum likelihood on the data and on every replicate, and replicates are
/// drawn from the fitted null.
pub fn simulated_pvalue(
    kind: EdfKind,
    data: &[f64],
    null: &DistributionSpec,
    replicates: usize,
    seed: u64,
    sample_size: SampleSize,
) -> Result<EdfOutcome> {
    if data.is_empty() && sample_size == SampleSize::Multinomial {
        return Err(Error::InvalidInput("no data".into()));
    }
    let (fitted, theta) = fit_null(null, data)?;
    let statistic = if data.is_empty() { 0.0 } else { edf_statistic(kind, data, &fitted)? };
    let reference = EdfReference::simulate(
        &[kind],
        null,
        &fitted,
        data.len(),
        sample_size,
        replicates,
        seed,
        mc::cell_key(kind.name()),
    )?;
    Ok(EdfOutcome {
        kind,
        statistic,
        pvalue: reference.pvalue(kind, statistic)?,
        theta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mc::stream;
    use proptest::prelude::*;

    fn dist(s: &str) -> Distribution {
        DistributionSpec::parse(s).unwrap().bind(&[]).unwrap()
    }

    #[test]
    fn hand_values() {
        let u = dist("uniform(0,1)");
        assert!((edf_statistic(EdfKind::KS, &[0.25, 0.75], &u).unwrap() - 0.25).abs() < 1e-15);
        let ad = -1.0 - 2.0 * 0.5f64.ln();
        assert!((edf_statistic(EdfKind::AD, &[0.5], &u).unwrap() - ad).abs() < 1e-12);
        assert!((ad - 0.386294).abs() < 1e-6);
        assert!(edf_statistic(EdfKind::ZK, &[0.5], &u).unwrap().abs() < 1e-12);
        assert!(edf_statistic(EdfKind::ZC, &[0.5], &u).unwrap().abs() < 1e-12);
        let za = edf_statistic(EdfKind::ZA, &[0.5], &u).unwrap();
        assert!((za - 4.0 * 2f64.ln()).abs() < 1e-12);
        assert!((za - 2.772589).abs() < 1e-6);
        assert!(edf_statistic(EdfKind::KS, &[], &u).is_err());
    }

    #[test]
    fn ks_against_direct_edf_scan() {
        // Oracle: evaluate |F_n(x) - F(x)| on both sides of every jump.
        let f = dist("normal(0,1)");
        let x = dist("t(3)").sample(200, &mut stream(1, 0, 0));
        let mut sorted = x.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len() as f64;
        let mut d: f64 = 0.0;
        for (j, &xi) in sorted.iter().enumerate() {
            let fx = f.cdf(xi);
            d = d.max((fx - j as f64 / n).abs()).max(((j + 1) as f64 / n - fx).abs());
        }
        assert!((edf_statistic(EdfKind::KS, &x, &f).unwrap() - d).abs() < 1e-14);
    }

    #[test]
    fn clamping_keeps_statistics_finite() {
        let u = dist("uniform(0,1)");
        for kind in EdfKind::ALL {
            let s = edf_statistic(kind, &[0.0, 0.5, 1.0, 2.0], &u).unwrap();
            assert!(s.is_finite(), "{kind}");
        }
    }

    #[test]
    fn pvalue_counting() {
        assert_eq!(pvalue_from_count(0, 999), 0.001);
        assert_eq!(pvalue_from_count(4, 9), 0.5);
    }

    #[test]
    fn pivotal_families() {
        let p = |s: &str| is_pivotal(&DistributionSpec::parse(s).unwrap());
        assert!(p("normal(0,1)"));
        assert!(p("normal(?,?)"));
        assert!(p("exp(?)"));
        assert!(!p("beta(?,?)"));
        assert!(!p("?*normal(?,?) + normal(?,?)"));
    }

    #[test]
    fn extreme_statistic_gets_smallest_pvalue() {
        let null = DistributionSpec::parse("uniform(0,1)").unwrap();
        let data = vec![0.99; 50];
        for kind in EdfKind::ALL {
            let out = simulated_pvalue(kind, &data, &null, 199, 3, SampleSize::Multinomial).unwrap();
            assert_eq!(out.pvalue, 1.0 / 200.0, "{kind}");
        }
        assert!(simulated_pvalue(EdfKind::KS, &data, &null, 50, 3, SampleSize::Multinomial).is_err());
    }

    #[test]
    fn simulated_pvalues_are_deterministic() {
        let null = DistributionSpec::parse("normal(?,?)").unwrap();
        let data = dist("normal(2,3)").sample(100, &mut stream(4, 0, 0));
        let a = simulated_pvalue(EdfKind::AD, &data, &null, 199, 9, SampleSize::Multinomial).unwrap();
        let b = simulated_pvalue(EdfKind::AD, &data, &null, 199, 9, SampleSize::Multinomial).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.theta.len(), 2);
        assert!(a.pvalue >= 1.0 / 200.0 && a.pvalue <= 1.0);
    }

    #[test]
    fn null_rejection_rate_is_calibrated() {
        // Simple null, data from the null: one shared reference, 2000 trials.
        let null = DistributionSpec::parse("beta(2,4)").unwrap();
        let f0 = null.bind(&[]).unwrap();
        let reference =
            EdfReference::simulate(&EdfKind::ALL, &null, &f0, 50, SampleSize::Multinomial, 999, 5, 1).unwrap();
        let trials = 2000;
        for kind in EdfKind::ALL {
            let rejections = (0..trials)
                .filter(|&t| {
                    let x = f0.sample(50, &mut stream(6, 0, t));
                    let s = edf_statistic(kind, &x, &f0).unwrap();
                    reference.pvalue(kind, s).unwrap() < 0.05
                })
                .count();
            let rate = rejections as f64 / trials as f64;
            let se = (0.05f64 * 0.95 / trials as f64).sqrt();
            // The reference itself carries Monte Carlo error as well.
            let se_ref = (0.05f64 * 0.95 / 999.0).sqrt();
            assert!((rate - 0.05).abs() < 3.0 * (se * se + se_ref * se_ref).sqrt(), "{kind}: {rate}");
        }
    }

    #[test]
    fn poisson_mode_references() {
        let null = DistributionSpec::parse("exp(?)").unwrap();
        let data = dist("exp(1)").sample(300, &mut stream(7, 0, 0));
        let out = simulated_pvalue(EdfKind::ZA, &data, &null, 199, 2, SampleSize::Poisson { lambda: 300.0 }).unwrap();
        assert!(out.pvalue > 0.0 && out.pvalue <= 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn probability_integral_transform_invariance(seed in 0u64..1000, n in 1usize..60, mu in -3.0f64..3.0, sigma in 0.2f64..4.0) {
            let f = DistributionSpec::parse(&format!("normal({mu},{sigma})")).unwrap().bind(&[]).unwrap();
            let x = f.sample(n, &mut stream(seed, 0, 0));
            let u: Vec<f64> = x.iter().map(|&v| f.cdf(v)).collect();
            let unif = dist("uniform(0,1)");
            for kind in EdfKind::ALL {
                let a = edf_statistic(kind, &x, &f).unwrap();
                let b = edf_statistic(kind, &u, &unif).unwrap();
                prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()), "{} {} {}", kind, a, b);
            }
        }

        #[test]
        fn statistic_ranges(seed in 0u64..1000, n in 1usize..80) {
            let unif = dist("uniform(0,1)");
            let x = dist("beta(2,3)").sample(n, &mut stream(seed, 1, 0));
            let ks = edf_statistic(EdfKind::KS, &x, &unif).unwrap();
            prop_assert!((0.0..=1.0).contains(&ks));
            for kind in [EdfKind::AD, EdfKind::ZA, EdfKind::ZC, EdfKind::ZK] {
                prop_assert!(edf_statistic(kind, &x, &unif).unwrap() >= -1e-12, "{}", kind);
            }
        }
    }
}
