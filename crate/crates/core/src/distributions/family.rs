//! Catalog of atomic families.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution as _, Open01};

use super::special::{beta_reg, gamma_p, invert_cdf, ln_beta, ln_gamma, norm_cdf, norm_quantile};
use super::Support;
use crate::error::{Error, Result};

/// Names of the catalog families, as they appear in spec strings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FamilyName {
    Uniform,
    Normal,
    StudentT,
    Beta,
    Gamma,
    Exponential,
    Linear,
}

/// How a free parameter is mapped to an unconstrained optimizer coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamTransform {
    Identity,
    /// Strictly positive values, optimized on the log scale.
    Log,
    /// Values in (0, 1), optimized on the logit scale.
    Logit,
    /// Values in [-1, 1], optimized through `tanh`.
    Tanh,
}

impl ParamTransform {
    pub fn to_unconstrained(self, value: f64) -> f64 {
        match self {
            ParamTransform::Identity => value,
            ParamTransform::Log => value.max(f64::MIN_POSITIVE).ln(),
            ParamTransform::Logit => {
                let v = value.clamp(1e-12, 1.0 - 1e-12);
                (v / (1.0 - v)).ln()
            }
            ParamTransform::Tanh => value.clamp(-1.0 + 1e-12, 1.0 - 1e-12).atanh(),
        }
    }

    pub fn from_unconstrained(self, u: f64) -> f64 {
        match self {
            ParamTransform::Identity => u,
            ParamTransform::Log => u.exp(),
            ParamTransform::Logit => 1.0 / (1.0 + (-u).exp()),
            ParamTransform::Tanh => u.tanh(),
        }
    }
}

impl FamilyName {
    pub fn arity(self) -> usize {
        match self {
            FamilyName::StudentT | FamilyName::Exponential | FamilyName::Linear => 1,
            _ => 2,
        }
    }

    pub fn canonical(self) -> &'static str {
        match self {
            FamilyName::Uniform => "uniform",
            FamilyName::Normal => "normal",
            FamilyName::StudentT => "t",
            FamilyName::Beta => "beta",
            FamilyName::Gamma => "gamma",
            FamilyName::Exponential => "exp",
            FamilyName::Linear => "linear",
        }
    }

    /// Optimizer transform for the parameter in position `index`.
    pub fn transform(self, index: usize) -> ParamTransform {
        match (self, index) {
            (FamilyName::Uniform, _) => ParamTransform::Identity,
            (FamilyName::Normal, 0) => ParamTransform::Identity,
            (FamilyName::Linear, _) => ParamTransform::Tanh,
            _ => ParamTransform::Log,
        }
    }

    /// Parameter values used when nothing is known about the data.
    pub fn default_params(self) -> [f64; 2] {
        match self {
            FamilyName::Uniform => [0.0, 1.0],
            FamilyName::Normal => [0.0, 1.0],
            FamilyName::StudentT => [5.0, 0.0],
            FamilyName::Beta => [1.0, 1.0],
            FamilyName::Gamma => [1.0, 1.0],
            FamilyName::Exponential => [1.0, 0.0],
            FamilyName::Linear => [0.0, 0.0],
        }
    }

    pub fn build(self, args: &[f64]) -> Result<Family> {
        if args.len() != self.arity() {
            return Err(Error::FamilyArity {
                family: self.canonical().to_string(),
                expected: self.arity(),
                got: args.len(),
            });
        }
        let domain = |ok: bool, message: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::ParameterDomain {
                    family: self.canonical().to_string(),
                    message: message.to_string(),
                })
            }
        };
        domain(args.iter().all(|a| a.is_finite()), "parameters must be finite")?;
        Ok(match self {
            FamilyName::Uniform => {
                domain(args[0] < args[1], "requires lower < upper")?;
                Family::Uniform {
                    lower: args[0],
                    upper: args[1],
                }
            }
            FamilyName::Normal => {
                domain(args[1] > 0.0, "standard deviation must be positive")?;
                Family::Normal {
                    mean: args[0],
                    sd: args[1],
                }
            }
            FamilyName::StudentT => {
                domain(args[0] > 0.0, "degrees of freedom must be positive")?;
                Family::StudentT { df: args[0] }
            }
            FamilyName::Beta => {
                domain(args[0] > 0.0 && args[1] > 0.0, "shapes must be positive")?;
                Family::Beta {
                    a: args[0],
                    b: args[1],
                }
            }
            FamilyName::Gamma => {
                domain(args[0] > 0.0 && args[1] > 0.0, "shape and rate must be positive")?;
                Family::Gamma {
                    shape: args[0],
                    rate: args[1],
                }
            }
            FamilyName::Exponential => {
                domain(args[0] > 0.0, "rate must be positive")?;
                Family::Exponential { rate: args[0] }
            }
            FamilyName::Linear => {
                domain(args[0].abs() <= 1.0, "slope must satisfy |s| <= 1")?;
                Family::Linear { slope: args[0] }
            }
        })
    }
}

impl FromStr for FamilyName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "uniform" | "unif" => FamilyName::Uniform,
            "normal" | "norm" => FamilyName::Normal,
            "t" => FamilyName::StudentT,
            "beta" => FamilyName::Beta,
            "gamma" => FamilyName::Gamma,
            "exp" | "exponential" => FamilyName::Exponential,
            "linear" => FamilyName::Linear,
            _ => return Err(Error::UnknownFamily(s.to_string())),
        })
    }
}

impl fmt::Display for FamilyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.canonical())
    }
}

/// A fully parameterized catalog family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Uniform { lower: f64, upper: f64 },
    Normal { mean: f64, sd: f64 },
    StudentT { df: f64 },
    Beta { a: f64, b: f64 },
    Gamma { shape: f64, rate: f64 },
    Exponential { rate: f64 },
    /// On [0, 1] with `F(x) = s x^2 + (1 - s) x`; the density is `2 s x + 1 - s`.
    Linear { slope: f64 },
}

impl Family {
    pub fn support(&self) -> Support {
        match *self {
            Family::Uniform { lower, upper } => Support::new(lower, upper),
            Family::Normal { .. } | Family::StudentT { .. } => Support::real_line(),
            Family::Beta { .. } | Family::Linear { .. } => Support::new(0.0, 1.0),
            Family::Gamma { .. } | Family::Exponential { .. } => Support::new(0.0, f64::INFINITY),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        let s = self.support();
        if x <= s.lower {
            return 0.0;
        }
        if x >= s.upper {
            return 1.0;
        }
        match *self {
            Family::Uniform { lower, upper } => (x - lower) / (upper - lower),
            Family::Normal { mean, sd } => norm_cdf((x - mean) / sd),
            Family::StudentT { df } => t_cdf(x, df),
            Family::Beta { a, b } => beta_reg(a, b, x),
            Family::Gamma { shape, rate } => gamma_p(shape, rate * x),
            Family::Exponential { rate } => -(-rate * x).exp_m1(),
            Family::Linear { slope } => (slope * x * x + (1.0 - slope) * x).clamp(0.0, 1.0),
        }
    }

    /// Quantile for `q` strictly inside (0, 1); the caller validates `q`.
    pub fn quantile_unchecked(&self, q: f64) -> f64 {
        match *self {
            Family::Uniform { lower, upper } => lower + q * (upper - lower),
            Family::Normal { mean, sd } => mean + sd * norm_quantile(q),
            Family::StudentT { df } => t_quantile(q, df),
            Family::Exponential { rate } => -(-q).ln_1p() / rate,
            Family::Linear { slope } => {
                let b = 1.0 - slope;
                // Root of s x^2 + b x - q = 0 in the cancellation-free form.
                let x = 2.0 * q / (b + (b * b + 4.0 * slope * q).sqrt());
                x.clamp(0.0, 1.0)
            }
            Family::Beta { a, b } => {
                let guess = a / (a + b);
                invert_cdf(|x| beta_reg(a, b, x), q, 0.0, 1.0, guess)
            }
            Family::Gamma { shape, rate } => {
                let guess = shape / rate;
                invert_cdf(|x| gamma_p(shape, rate * x), q, 0.0, f64::INFINITY, guess)
            }
        }
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        let s = self.support();
        if x < s.lower || x > s.upper || x.is_nan() {
            return f64::NEG_INFINITY;
        }
        match *self {
            Family::Uniform { lower, upper } => -(upper - lower).ln(),
            Family::Normal { mean, sd } => {
                let z = (x - mean) / sd;
                -0.5 * z * z - sd.ln() - 0.5 * (2.0 * PI).ln()
            }
            Family::StudentT { df } => {
                ln_gamma(0.5 * (df + 1.0))
                    - ln_gamma(0.5 * df)
                    - 0.5 * (df * PI).ln()
                    - 0.5 * (df + 1.0) * (x * x / df).ln_1p()
            }
            Family::Beta { a, b } => (a - 1.0) * x.ln() + (b - 1.0) * (-x).ln_1p() - ln_beta(a, b),
            Family::Gamma { shape, rate } => {
                shape * rate.ln() + (shape - 1.0) * x.ln() - rate * x - ln_gamma(shape)
            }
            Family::Exponential { rate } => rate.ln() - rate * x,
            Family::Linear { slope } => (2.0 * slope * x + 1.0 - slope).ln(),
        }
    }

    pub fn mean(&self) -> Option<f64> {
        match *self {
            Family::Uniform { lower, upper } => Some(0.5 * (lower + upper)),
            Family::Normal { mean, .. } => Some(mean),
            Family::StudentT { df } => (df > 1.0).then_some(0.0),
            Family::Beta { a, b } => Some(a / (a + b)),
            Family::Gamma { shape, rate } => Some(shape / rate),
            Family::Exponential { rate } => Some(1.0 / rate),
            Family::Linear { slope } => Some(0.5 + slope / 6.0),
        }
    }

    /// One draw. Uses an exact family-specific sampler where one exists,
    /// otherwise inverse-cdf sampling.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Family::Normal { mean, sd } => {
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                mean + sd * z
            }
            Family::Exponential { rate } => {
                let e: f64 = rng.sample(rand_distr::Exp1);
                e / rate
            }
            Family::Gamma { shape, rate } => rand_distr::Gamma::new(shape, 1.0 / rate)
                .expect("validated gamma parameters")
                .sample(rng),
            Family::Beta { a, b } => rand_distr::Beta::new(a, b)
                .expect("validated beta parameters")
                .sample(rng),
            Family::StudentT { df } => rand_distr::StudentT::new(df)
                .expect("validated t parameters")
                .sample(rng),
            Family::Uniform { .. } | Family::Linear { .. } => {
                let u: f64 = Open01.sample(rng);
                self.quantile_unchecked(u)
            }
        }
    }
}

fn t_cdf(x: f64, df: f64) -> f64 {
    if df == 1.0 {
        return 0.5 + x.atan() / PI;
    }
    if df == 2.0 {
        return 0.5 + x / (2.0 * (2.0 + x * x).sqrt());
    }
    let tail = 0.5 * beta_reg(0.5 * df, 0.5, df / (df + x * x));
    if x < 0.0 {
        tail
    } else {
        1.0 - tail
    }
}

fn t_quantile(q: f64, df: f64) -> f64 {
    if df == 1.0 {
        return (PI * (q - 0.5)).tan();
    }
    if df == 2.0 {
        return (2.0 * q - 1.0) / (2.0 * q * (1.0 - q)).sqrt();
    }
    if q == 0.5 {
        return 0.0;
    }
    // Invert the lower half for accuracy, then reflect.
    let lower = q.min(1.0 - q);
    let guess = norm_quantile(lower);
    let x = invert_cdf(|x| t_cdf(x, df), lower, f64::NEG_INFINITY, 0.0, guess.min(-1e-3));
    if q < 0.5 {
        x
    } else {
        -x
    }
}
