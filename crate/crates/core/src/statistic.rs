//! Chi-square type statistics, the Cressie-Read power divergence, and the
//! chi-square distribution functions used for p-values and critical values.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distributions::special;
use crate::error::{Error, Result};

/// The six statistic formulas, in their conventional listing order. The
/// order matters: it is the last tie-breaker during scheme selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StatisticKind {
    Pearson,
    FreemanTukey,
    LambdaP,
    G2,
    NeymanModified,
    CR23,
}

impl StatisticKind {
    pub const ALL: [StatisticKind; 6] = [
        StatisticKind::Pearson,
        StatisticKind::FreemanTukey,
        StatisticKind::LambdaP,
        StatisticKind::G2,
        StatisticKind::NeymanModified,
        StatisticKind::CR23,
    ];

    /// Kinds that remain meaningful when observed and expected totals differ.
    pub const POISSON: [StatisticKind; 2] = [StatisticKind::Pearson, StatisticKind::LambdaP];

    pub fn name(self) -> &'static str {
        match self {
            StatisticKind::Pearson => "Pearson",
            StatisticKind::FreemanTukey => "FreemanTukey",
            StatisticKind::LambdaP => "LambdaP",
            StatisticKind::G2 => "G2",
            StatisticKind::NeymanModified => "NeymanModified",
            StatisticKind::CR23 => "CR23",
        }
    }
}

impl fmt::Display for StatisticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StatisticKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        Ok(match key.as_str() {
            "pearson" => StatisticKind::Pearson,
            "freemantukey" | "ft" => StatisticKind::FreemanTukey,
            "lambdap" | "poisson" => StatisticKind::LambdaP,
            "g2" | "g" | "lr" => StatisticKind::G2,
            "neymanmodified" | "neyman" | "nm" => StatisticKind::NeymanModified,
            "cr23" | "lambda23" | "cressieread" => StatisticKind::CR23,
            _ => return Err(Error::InvalidInput(format!("unknown statistic kind '{s}'"))),
        })
    }
}

fn check_lengths(observed: &[f64], expected: &[f64]) -> Result<()> {
    if observed.len() != expected.len() || observed.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "need matching observed/expected vectors with at least 2 bins (got {} and {})",
            observed.len(),
            expected.len()
        )));
    }
    if let Some(e) = expected.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
        return Err(Error::InvalidInput(format!("expected count {e} is not positive")));
    }
    if let Some(o) = observed.iter().find(|o| !(**o >= 0.0) || !o.is_finite()) {
        return Err(Error::InvalidInput(format!("observed count {o} is negative")));
    }
    Ok(())
}

/// `o * ln(o / e)` with the `0 ln 0 = 0` convention.
fn xlogy(o: f64, e: f64) -> f64 {
    if o == 0.0 {
        0.0
    } else {
        o * (o / e).ln()
    }
}

/// Evaluates statistic `kind` on observed counts `observed` against expected
/// counts `expected`. Small negative rounding results are clamped to zero.
pub fn chisq_stat(kind: StatisticKind, observed: &[f64], expected: &[f64]) -> Result<f64> {
    check_lengths(observed, expected)?;
    let pairs = observed.iter().zip(expected);
    let value: f64 = match kind {
        StatisticKind::Pearson => pairs.map(|(o, e)| (o - e).powi(2) / e).sum(),
        StatisticKind::FreemanTukey => 4.0 * pairs.map(|(o, e)| (o.sqrt() - e.sqrt()).powi(2)).sum::<f64>(),
        StatisticKind::LambdaP => 2.0 * pairs.map(|(&o, &e)| e - o + xlogy(o, e)).sum::<f64>(),
        StatisticKind::G2 => 2.0 * pairs.map(|(&o, &e)| xlogy(o, e)).sum::<f64>(),
        StatisticKind::NeymanModified => {
            if let Some(bin) = observed.iter().position(|&o| o == 0.0) {
                return Err(Error::ZeroObservedCount { bin });
            }
            pairs.map(|(o, e)| e * e / o - o).sum()
        }
        StatisticKind::CR23 => {
            1.8 * pairs
                .map(|(&o, &e)| if o == 0.0 { 0.0 } else { o * ((o / e).powf(2.0 / 3.0) - 1.0) })
                .sum::<f64>()
        }
    };
    Ok(value.max(0.0))
}

/// Cressie-Read power divergence `2/(l(l+1)) sum O((O/E)^l - 1)`.
pub fn cressie_read(lambda: f64, observed: &[f64], expected: &[f64]) -> Result<f64> {
    if lambda == 0.0 || lambda == -1.0 || !lambda.is_finite() {
        return Err(Error::InvalidInput(format!(
            "Cressie-Read lambda {lambda} is a limiting case; use G2 or the modified likelihood kind"
        )));
    }
    check_lengths(observed, expected)?;
    let mut sum = 0.0;
    for (bin, (&o, &e)) in observed.iter().zip(expected).enumerate() {
        if o == 0.0 {
            if lambda < -1.0 {
                return Err(Error::ZeroObservedCount { bin });
            }
            continue;
        }
        sum += o * ((o / e).powf(lambda) - 1.0);
    }
    Ok(2.0 / (lambda * (lambda + 1.0)) * sum)
}

/// Chi-square distribution function with `df` degrees of freedom.
pub fn chisq_cdf(x: f64, df: f64) -> f64 {
    if !(x > 0.0) {
        return 0.0;
    }
    special::gamma_p(0.5 * df, 0.5 * x)
}

/// Upper tail probability `1 - chisq_cdf(x, df)`, computed directly so that
/// small p-values keep their precision.
pub fn chisq_pvalue(x: f64, df: f64) -> f64 {
    if !(x > 0.0) {
        return 1.0;
    }
    special::gamma_q(0.5 * df, 0.5 * x)
}

/// Chi-square quantile by bracketing inversion of [`chisq_cdf`].
pub fn chisq_quantile(q: f64, df: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Probability(q));
    }
    if !(df > 0.0) {
        return Err(Error::InvalidInput(format!("degrees of freedom {df} must be positive")));
    }
    // Wilson-Hilferty gives a starting point close enough for a short bracket.
    let z = special::norm_quantile(q);
    let h = 2.0 / (9.0 * df);
    let guess = (df * (1.0 - h + z * h.sqrt()).powi(3)).max(1e-8);
    if q > 0.5 {
        // Invert the upper tail so that q close to 1 stays well conditioned.
        Ok(special::invert_cdf(|x| -chisq_pvalue(x, df), -(1.0 - q), 0.0, f64::INFINITY, guess))
    } else {
        Ok(special::invert_cdf(|x| chisq_cdf(x, df), q, 0.0, f64::INFINITY, guess))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const O: [f64; 2] = [30.0, 70.0];
    const E: [f64; 2] = [50.0, 50.0];

    // Hand evaluation: 2 (30 ln 0.6 + 70 ln 1.4).
    fn g2_oracle() -> f64 {
        2.0 * (30.0 * 0.6f64.ln() + 70.0 * 1.4f64.ln())
    }

    #[test]
    fn hand_evaluated_values() {
        assert_eq!(chisq_stat(StatisticKind::Pearson, &O, &E).unwrap(), 16.0);
        let g2 = chisq_stat(StatisticKind::G2, &O, &E).unwrap();
        assert!((g2 - g2_oracle()).abs() < 1e-12);
        assert!((g2 - 16.4566).abs() < 1e-4);
        // 2500/30 - 30 + 2500/70 - 70
        let nm = chisq_stat(StatisticKind::NeymanModified, &O, &E).unwrap();
        assert!((nm - (2500.0 / 30.0 + 2500.0 / 70.0 - 100.0)).abs() < 1e-12);
        assert!((nm - 19.0476).abs() < 1e-4);
        // (9/5)(30 (0.6^(2/3) - 1) + 70 (1.4^(2/3) - 1))
        let cr = chisq_stat(StatisticKind::CR23, &O, &E).unwrap();
        let oracle = 1.8 * (30.0 * (0.6f64.cbrt().powi(2) - 1.0) + 70.0 * (1.4f64.cbrt().powi(2) - 1.0));
        assert!((cr - oracle).abs() < 1e-12);
        assert!((cr - 16.0990).abs() < 1e-4);
        // 4((sqrt30 - sqrt50)^2 + (sqrt70 - sqrt50)^2)
        let ft = chisq_stat(StatisticKind::FreemanTukey, &O, &E).unwrap();
        let oracle = 4.0 * ((30f64.sqrt() - 50f64.sqrt()).powi(2) + (70f64.sqrt() - 50f64.sqrt()).powi(2));
        assert!((ft - oracle).abs() < 1e-12);
    }

    #[test]
    fn cressie_read_members() {
        let cr = cressie_read(2.0 / 3.0, &O, &E).unwrap();
        let direct = chisq_stat(StatisticKind::CR23, &O, &E).unwrap();
        assert!((cr - direct).abs() < 1e-10);
        assert!((cr - 16.0990).abs() < 1e-4);
        assert!((cressie_read(1.0, &O, &E).unwrap() - 16.0).abs() < 1e-10);
        assert!(cressie_read(0.0, &O, &E).is_err());
        assert!(cressie_read(-1.0, &O, &E).is_err());
        assert_eq!(cressie_read(0.5, &E, &E).unwrap(), 0.0);
    }

    #[test]
    fn zero_counts() {
        let o = [0.0, 10.0];
        let e = [5.0, 5.0];
        assert!(matches!(
            chisq_stat(StatisticKind::NeymanModified, &o, &e),
            Err(Error::ZeroObservedCount { bin: 0 })
        ));
        // 0 ln 0 = 0: G2 = 2 * 10 ln 2, LambdaP adds 2 (E - O) = 0.
        let g2 = chisq_stat(StatisticKind::G2, &o, &e).unwrap();
        assert!((g2 - 20.0 * 2f64.ln()).abs() < 1e-12);
        let lp = chisq_stat(StatisticKind::LambdaP, &o, &e).unwrap();
        assert!((lp - g2).abs() < 1e-12);
        // (9/5) * 10 (2^(2/3) - 1)
        let cr = chisq_stat(StatisticKind::CR23, &o, &e).unwrap();
        assert!((cr - 18.0 * (2f64.powf(2.0 / 3.0) - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(chisq_stat(StatisticKind::Pearson, &[1.0], &[1.0]).is_err());
        assert!(chisq_stat(StatisticKind::Pearson, &[1.0, 2.0], &[1.0, 0.0]).is_err());
        assert!(chisq_stat(StatisticKind::Pearson, &[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for k in StatisticKind::ALL {
            assert_eq!(k.name().parse::<StatisticKind>().unwrap(), k);
        }
        assert_eq!("g^2".parse::<StatisticKind>().unwrap(), StatisticKind::G2);
        assert!("foo".parse::<StatisticKind>().is_err());
    }

    #[test]
    fn chisq_table_values() {
        assert_eq!(chisq_cdf(0.0, 3.0), 0.0);
        assert_eq!(chisq_cdf(-1.0, 3.0), 0.0);
        assert!((chisq_cdf(3.8415, 1.0) - 0.95).abs() < 1e-4);
        assert!((chisq_cdf(16.9190, 9.0) - 0.95).abs() < 1e-4);
        assert!((chisq_quantile(0.95, 1.0).unwrap() - 3.8415).abs() < 1e-3);
        assert!((chisq_quantile(0.95, 3.0).unwrap() - 7.8147).abs() < 1e-3);
        assert!((chisq_quantile(0.95, 9.0).unwrap() - 16.9190).abs() < 1e-3);
        // df = 2 is exponential with mean 2: q = -2 ln(1 - p)
        for p in [0.01f64, 0.5, 0.95, 0.999999] {
            let exact = -2.0 * (1.0 - p).ln();
            assert!((chisq_quantile(p, 2.0).unwrap() - exact).abs() < 1e-9 * exact.max(1.0));
            assert!((chisq_cdf(exact, 2.0) - p).abs() < 1e-13);
        }
        assert!(chisq_quantile(1.0, 3.0).is_err());
        assert!(chisq_quantile(0.0, 3.0).is_err());
    }

    #[test]
    fn pvalue_complements_cdf() {
        for df in [1.0, 2.0, 5.0, 40.0] {
            for x in [0.5, 3.0, 10.0, 60.0] {
                assert!((chisq_pvalue(x, df) + chisq_cdf(x, df) - 1.0).abs() < 1e-13);
            }
        }
        assert_eq!(chisq_pvalue(0.0, 4.0), 1.0);
    }

    fn counts_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..12).prop_flat_map(|k| {
            (
                proptest::collection::vec(0u32..200, k),
                proptest::collection::vec(0.05f64..1.0, k),
            )
                .prop_map(|(o, w)| {
                    let n: f64 = o.iter().map(|&x| x as f64).sum::<f64>().max(1.0);
                    let s: f64 = w.iter().sum();
                    let e = w.iter().map(|x| n * x / s).collect();
                    (o.into_iter().map(f64::from).collect(), e)
                })
        })
    }

    proptest! {
        #[test]
        fn identities((o, e) in counts_strategy()) {
            let pearson = chisq_stat(StatisticKind::Pearson, &o, &e).unwrap();
            prop_assert!((pearson - cressie_read(1.0, &o, &e).unwrap()).abs() <= 1e-10 * (1.0 + pearson));
            let cr = chisq_stat(StatisticKind::CR23, &o, &e).unwrap();
            let cr_family = cressie_read(2.0 / 3.0, &o, &e).unwrap().max(0.0);
            prop_assert!((cr - cr_family).abs() <= 1e-10 * (1.0 + cr));
            let g2 = chisq_stat(StatisticKind::G2, &o, &e).unwrap();
            let lp = chisq_stat(StatisticKind::LambdaP, &o, &e).unwrap();
            prop_assert!((g2 - lp).abs() <= 1e-10 * (1.0 + g2));
            for kind in StatisticKind::ALL {
                match chisq_stat(kind, &o, &e) {
                    Ok(v) => prop_assert!(v >= -1e-9),
                    Err(_) => prop_assert!(kind == StatisticKind::NeymanModified),
                }
                prop_assert!(chisq_stat(kind, &e, &e).unwrap().abs() < 1e-9);
            }
        }

        #[test]
        fn quantile_round_trip(q in 0.001f64..0.999, df in 1u32..200) {
            let x = chisq_quantile(q, df as f64).unwrap();
            prop_assert!((chisq_cdf(x, df as f64) - q).abs() < 1e-8);
        }
    }
}
