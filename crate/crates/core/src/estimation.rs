//! Parameter estimation for composite nulls: minimum chi-square on binned
//! counts, binned and unbinned maximum likelihood, and start heuristics.
//!
//! All fits run a Nelder-Mead simplex in the unconstrained coordinates given
//! by [`DistributionSpec::transforms`], from the supplied start followed by a
//! fixed sequence of perturbed restarts around the best point so far.

use serde::{Deserialize, Serialize};

use crate::binning::bin_probabilities;
use crate::distributions::{Arg, DistributionSpec, FamilyName, ParamTransform, SpecNode, Weight};
use crate::error::{Error, Result};
use crate::statistic::{chisq_stat, StatisticKind};

/// Bin probabilities are floored here while fitting.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta: Vec<f64>,
    /// Statistic value (minimum chi-square) or negative log-likelihood.
    pub objective: f64,
    pub converged: bool,
    pub evaluations: usize,
    /// Some bin probability sat on [`PROB_FLOOR`] at the optimum.
    pub floored: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Convergence tolerance on the spread of objective values in the simplex.
    pub tol: f64,
    /// Restarts after the first run.
    pub restarts: usize,
    /// Evaluation budget per run and per free parameter.
    pub evals_per_param: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            restarts: 4,
            evals_per_param: 1000,
        }
    }
}

struct Run {
    x: Vec<f64>,
    f: f64,
    converged: bool,
    evals: usize,
}

fn finite_or_inf(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn nelder_mead<F: FnMut(&[f64]) -> f64>(f: &mut F, x0: &[f64], tol: f64, max_evals: usize) -> Run {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += 0.1 * x0[i].abs().max(1.0);
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| finite_or_inf(f(p))).collect();
    let mut evals = n + 1;
    let mut eval = |p: &[f64], evals: &mut usize| {
        *evals += 1;
        finite_or_inf(f(p))
    };
    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let spread = vals[n] - vals[0];
        let flat = vals[0].is_finite() && spread <= tol * (1.0 + vals[0].abs());
        let size = pts[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (flat && size <= 1e-7) || evals >= max_evals {
            return Run {
                x: pts.swap_remove(0),
                f: vals[0],
                converged: flat,
                evals,
            };
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&pts[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = eval(&xr, &mut evals);
        if fr < vals[0] {
            let xe = along(2.0);
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc, accept) = if fr < vals[n] {
            let xc = along(0.5);
            let fc = eval(&xc, &mut evals);
            (xc, fc, fc <= fr)
        } else {
            let xc = along(-0.5);
            let fc = eval(&xc, &mut evals);
            (xc, fc, fc < vals[n])
        };
        if accept {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        let best = pts[0].clone();
        for i in 1..=n {
            pts[i] = best.iter().zip(&pts[i]).map(|(b, p)| b + 0.5 * (p - b)).collect();
            vals[i] = eval(&pts[i], &mut evals);
        }
    }
}

/// Minimizes `f` from `u0`, then restarts from perturbations of the best
/// point found so far. Selection is by objective, earlier runs winning ties.
fn minimize<F: FnMut(&[f64]) -> f64>(mut f: F, u0: &[f64], opts: &FitOptions) -> Result<Run> {
    let max_evals = opts.evals_per_param * u0.len().max(1);
    if !finite_or_inf(f(u0)).is_finite() {
        return Err(Error::Optimization("objective is not finite at the starting point".into()));
    }
    let mut best = nelder_mead(&mut f, u0, opts.tol, max_evals);
    let mut total = best.evals;
    let mut any_converged = best.converged;
    const SCALES: [f64; 4] = [0.0, 0.3, 0.6, 1.0];
    for r in 1..=opts.restarts {
        let scale = SCALES[(r - 1) % SCALES.len()];
        let start: Vec<f64> = best
            .x
            .iter()
            .enumerate()
            .map(|(j, x)| {
                let sign = if (j + r) % 2 == 0 { 1.0 } else { -1.0 };
                x + sign * scale * x.abs().max(1.0) * 0.5
            })
            .collect();
        if !finite_or_inf(f(&start)).is_finite() {
            total += 1;
            continue;
        }
        let run = nelder_mead(&mut f, &start, opts.tol, max_evals);
        total += run.evals + 1;
        any_converged |= run.converged;
        if run.f < best.f {
            best = run;
        }
    }
    if !any_converged || !best.f.is_finite() {
        return Err(Error::Optimization(format!(
            "no run converged within {max_evals} evaluations (best objective {})",
            best.f
        )));
    }
    best.evals = total;
    Ok(best)
}

fn to_unconstrained(transforms: &[ParamTransform], theta: &[f64]) -> Vec<f64> {
    transforms
        .iter()
        .zip(theta)
        .map(|(t, v)| t.to_unconstrained(*v))
        .collect()
}

fn from_unconstrained(transforms: &[ParamTransform], u: &[f64]) -> Vec<f64> {
    transforms
        .iter()
        .zip(u)
        .map(|(t, v)| t.from_unconstrained(*v))
        .collect()
}

fn check_family(spec: &DistributionSpec, start: &[f64]) -> Result<Vec<ParamTransform>> {
    let transforms = spec.transforms();
    if transforms.is_empty() {
        return Err(Error::InvalidInput("the family has no free parameters to fit".into()));
    }
    if start.len() != transforms.len() {
        return Err(Error::ParameterArity {
            expected: transforms.len(),
            got: start.len(),
        });
    }
    spec.bind(start)?;
    Ok(transforms)
}

fn check_binned(p: usize, counts: &[f64], edges: &[f64]) -> Result<()> {
    if counts.len() + 1 != edges.len() {
        return Err(Error::Edges(format!(
            "{} counts for {} edges",
            counts.len(),
            edges.len()
        )));
    }
    if counts.len() < p + 1 {
        return Err(Error::InvalidInput(format!(
            "{} bins cannot identify {p} parameters",
            counts.len()
        )));
    }
    Ok(())
}

fn floored_probs(spec: &DistributionSpec, theta: &[f64], edges: &[f64]) -> Option<(Vec<f64>, bool)> {
    let d = spec.bind(theta).ok()?;
    let mut floored = false;
    let probs = bin_probabilities(&d, edges)
        .into_iter()
        .map(|p| {
            if p < PROB_FLOOR {
                floored = true;
                PROB_FLOOR
            } else {
                p
            }
        })
        .collect();
    Some((probs, floored))
}

/// Minimum chi-square fit with expected counts `n * p(theta)`, `n` the sum of
/// `counts`.
pub fn minimum_chisq(
    spec: &DistributionSpec,
    counts: &[f64],
    edges: &[f64],
    kind: StatisticKind,
    start: &[f64],
) -> Result<FitResult> {
    let total = counts.iter().sum();
    minimum_chisq_with(spec, counts, edges, kind, start, total, &FitOptions::default())
}

/// Minimum chi-square fit with expected counts `total * p(theta)`. The
/// Poisson sample-size mode passes the rate here.
pub fn minimum_chisq_with(
    spec: &DistributionSpec,
    counts: &[f64],
    edges: &[f64],
    kind: StatisticKind,
    start: &[f64],
    total: f64,
    opts: &FitOptions,
) -> Result<FitResult> {
    let transforms = check_family(spec, start)?;
    check_binned(transforms.len(), counts, edges)?;
    if kind == StatisticKind::NeymanModified {
        if let Some(bin) = counts.iter().position(|&c| c == 0.0) {
            return Err(Error::ZeroObservedCount { bin });
        }
    }
    if !(total > 0.0) {
        return Err(Error::InvalidInput("no observations to fit".into()));
    }
    let objective = |u: &[f64]| -> f64 {
        let theta = from_unconstrained(&transforms, u);
        let Some((probs, _)) = floored_probs(spec, &theta, edges) else {
            return f64::INFINITY;
        };
        let expected: Vec<f64> = probs.iter().map(|p| total * p).collect();
        chisq_stat(kind, counts, &expected).unwrap_or(f64::INFINITY)
    };
    let run = minimize(objective, &to_unconstrained(&transforms, start), opts)?;
    let theta = from_unconstrained(&transforms, &run.x);
    let floored = floored_probs(spec, &theta, edges).is_some_and(|(_, f)| f);
    Ok(FitResult {
        theta,
        objective: run.f,
        converged: run.converged,
        evaluations: run.evals,
        floored,
    })
}

/// Maximizes the binned log-likelihood `sum O ln p(theta)`. The objective
/// reported is the negative log-likelihood.
pub fn binned_mle(spec: &DistributionSpec, counts: &[f64], edges: &[f64], start: &[f64]) -> Result<FitResult> {
    let transforms = check_family(spec, start)?;
    check_binned(transforms.len(), counts, edges)?;
    if counts.iter().filter(|&&c| c > 0.0).count() < 2 {
        return Err(Error::InvalidInput(
            "binned likelihood needs at least two nonempty bins".into(),
        ));
    }
    let objective = |u: &[f64]| -> f64 {
        let theta = from_unconstrained(&transforms, u);
        match floored_probs(spec, &theta, edges) {
            Some((probs, _)) => -counts
                .iter()
                .zip(&probs)
                .map(|(o, p)| if *o == 0.0 { 0.0 } else { o * p.ln() })
                .sum::<f64>(),
            None => f64::INFINITY,
        }
    };
    let run = minimize(objective, &to_unconstrained(&transforms, start), &FitOptions::default())?;
    let theta = from_unconstrained(&transforms, &run.x);
    let floored = floored_probs(spec, &theta, edges).is_some_and(|(_, f)| f);
    Ok(FitResult {
        theta,
        objective: run.f,
        converged: run.converged,
        evaluations: run.evals,
        floored,
    })
}

fn closed_form_mle(spec: &DistributionSpec, data: &[f64]) -> Option<Result<Vec<f64>>> {
    let SpecNode::Atom { family, args } = spec.root() else {
        return None;
    };
    if !args.iter().all(|a| matches!(a, Arg::Free)) {
        return None;
    }
    let n = data.len() as f64;
    let mean = data.iter().sum::<f64>() / n;
    Some(match family {
        FamilyName::Normal => {
            let sd = (data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            if sd > 0.0 {
                Ok(vec![mean, sd])
            } else {
                Err(Error::Optimization("normal fit to constant data".into()))
            }
        }
        FamilyName::Exponential => {
            if data.iter().any(|&x| x < 0.0) {
                Err(Error::InvalidInput("negative value under an exponential family".into()))
            } else if mean > 0.0 {
                Ok(vec![1.0 / mean])
            } else {
                Err(Error::Optimization("exponential fit to all-zero data".into()))
            }
        }
        FamilyName::Uniform => {
            let lo = data.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if lo < hi {
                Ok(vec![lo, hi])
            } else {
                Err(Error::Optimization("uniform fit to constant data".into()))
            }
        }
        _ => return None,
    })
}

/// Maximizes `sum ln f(x; theta)` over the raw data. Closed forms are used for
/// fully free normal, exponential and uniform families.
pub fn unbinned_mle(spec: &DistributionSpec, data: &[f64], start: &[f64]) -> Result<FitResult> {
    let transforms = check_family(spec, start)?;
    if data.is_empty() {
        return Err(Error::InvalidInput("no data to fit".into()));
    }
    let nll = |theta: &[f64]| -> f64 {
        match spec.bind(theta) {
            Ok(d) => -data.iter().map(|&x| d.ln_pdf(x)).sum::<f64>(),
            Err(_) => f64::INFINITY,
        }
    };
    if let Some(theta) = closed_form_mle(spec, data) {
        let theta = theta?;
        return Ok(FitResult {
            objective: nll(&theta),
            theta,
            converged: true,
            evaluations: 0,
            floored: false,
        });
    }
    if !nll(start).is_finite() {
        return Err(Error::InvalidInput(
            "data lie outside the family's support at the starting parameters".into(),
        ));
    }
    let objective = |u: &[f64]| nll(&from_unconstrained(&transforms, u));
    let run = minimize(objective, &to_unconstrained(&transforms, start), &FitOptions::default())?;
    Ok(FitResult {
        theta: from_unconstrained(&transforms, &run.x),
        objective: run.f,
        converged: run.converged,
        evaluations: run.evals,
        floored: false,
    })
}

/// What is known when choosing starting values.
#[derive(Debug, Clone, Copy)]
pub enum StartData<'a> {
    Nothing,
    Values(&'a [f64]),
    Binned { counts: &'a [f64], edges: &'a [f64] },
}

/// Weighted points standing in for the data, sorted by value. Binned data
/// are represented by bin midpoints; an infinite outer bin borrows half the
/// width of its neighbour.
fn weighted_points(data: StartData<'_>) -> Vec<(f64, f64)> {
    let mut pts: Vec<(f64, f64)> = match data {
        StartData::Nothing => Vec::new(),
        StartData::Values(v) => v.iter().filter(|x| x.is_finite()).map(|&x| (x, 1.0)).collect(),
        StartData::Binned { counts, edges } => {
            let k = counts.len();
            if edges.len() != k + 1 {
                return Vec::new();
            }
            let width = |i: usize| -> f64 {
                let w = edges[i + 1] - edges[i];
                if w.is_finite() {
                    w
                } else {
                    1.0
                }
            };
            (0..k)
                .filter(|&i| counts[i] > 0.0)
                .map(|i| {
                    let (a, b) = (edges[i], edges[i + 1]);
                    let x = match (a.is_finite(), b.is_finite()) {
                        (true, true) => 0.5 * (a + b),
                        (false, true) => b - 0.5 * if i + 1 < k { width(i + 1) } else { 1.0 },
                        (true, false) => a + 0.5 * if i > 0 { width(i - 1) } else { 1.0 },
                        (false, false) => 0.0,
                    };
                    (x, counts[i])
                })
                .collect()
        }
    };
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    pts
}

fn moments(pts: &[(f64, f64)]) -> Option<(f64, f64, f64, f64)> {
    let w: f64 = pts.iter().map(|p| p.1).sum();
    if pts.is_empty() || !(w > 0.0) {
        return None;
    }
    let mean = pts.iter().map(|(x, c)| x * c).sum::<f64>() / w;
    let var = pts.iter().map(|(x, c)| c * (x - mean).powi(2)).sum::<f64>() / w;
    Some((mean, var, pts[0].0, pts[pts.len() - 1].0))
}

fn moment_estimates(family: FamilyName, pts: &[(f64, f64)]) -> [f64; 2] {
    let default = family.default_params();
    let Some((m, v, lo, hi)) = moments(pts) else {
        return default;
    };
    let guess = match family {
        FamilyName::Uniform => {
            let pad = 0.01 * (hi - lo);
            [lo - pad, hi + pad]
        }
        FamilyName::Normal => [m, v.sqrt()],
        FamilyName::StudentT => [if v > 1.0 { (2.0 * v / (v - 1.0)).clamp(1.0, 100.0) } else { 30.0 }, 0.0],
        FamilyName::Beta => {
            let common = m * (1.0 - m) / v - 1.0;
            [m * common, (1.0 - m) * common]
        }
        FamilyName::Gamma => [m * m / v, m / v],
        FamilyName::Exponential => [1.0 / m, 0.0],
        FamilyName::Linear => [(6.0 * (m - 0.5)).clamp(-0.95, 0.95), 0.0],
    };
    if family.build(&guess[..family.arity()]).is_ok() {
        guess
    } else {
        default
    }
}

fn start_node(node: &SpecNode, pts: &[(f64, f64)], out: &mut Vec<f64>) {
    match node {
        SpecNode::Atom { family, args } => {
            let est = moment_estimates(*family, pts);
            for (i, a) in args.iter().enumerate() {
                if matches!(a, Arg::Free) {
                    out.push(est[i]);
                }
            }
        }
        SpecNode::Mixture {
            weights,
            components,
        } => {
            // Contiguous groups of equal total weight, one per component.
            let m = components.len();
            let total: f64 = pts.iter().map(|p| p.1).sum();
            let mut groups: Vec<Vec<(f64, f64)>> = vec![Vec::new(); m];
            let mut acc = 0.0;
            for &(x, c) in pts {
                let g = ((acc + 0.5 * c) / total * m as f64).floor() as usize;
                groups[g.min(m - 1)].push((x, c));
                acc += c;
            }
            for ((w, c), g) in weights.iter().zip(components).zip(&groups) {
                if matches!(w, Weight::Free) {
                    out.push(1.0 / m as f64);
                }
                start_node(c, g, out);
            }
        }
        SpecNode::Truncate { inner, .. } => start_node(inner, pts, out),
    }
}

/// Moment-matching starting values for the free parameters of `spec`.
/// Always returns a point inside the parameter domain when one of the
/// heuristics or the family defaults is valid.
pub fn default_start(spec: &DistributionSpec, data: StartData<'_>) -> Vec<f64> {
    let pts = weighted_points(data);
    let mut out = Vec::with_capacity(spec.free_count());
    start_node(spec.root(), &pts, &mut out);
    if spec.bind(&out).is_ok() {
        return out;
    }
    let mut fallback = Vec::with_capacity(out.len());
    start_node(spec.root(), &[], &mut fallback);
    fallback
}

/// For a two-component mixture `?*f(?,..) + f(?,..)` with every component
/// argument free, relabels the components so that the first argument of the
/// first component is the smaller one. Other specs are returned unchanged.
pub fn canonicalize_mixture(spec: &DistributionSpec, theta: &[f64]) -> Vec<f64> {
    let node = match spec.root() {
        SpecNode::Truncate { inner, .. } => inner.as_ref(),
        other => other,
    };
    let SpecNode::Mixture {
        weights,
        components,
    } = node
    else {
        return theta.to_vec();
    };
    let atom = |c: &SpecNode| match c {
        SpecNode::Atom { family, args } if args.iter().all(|a| matches!(a, Arg::Free)) => Some(*family),
        _ => None,
    };
    let shape_ok = weights.as_slice() == [Weight::Free, Weight::Remainder]
        && components.len() == 2
        && atom(&components[0]).is_some()
        && atom(&components[0]) == atom(&components[1])
        && theta.len() == spec.free_count();
    if !shape_ok {
        return theta.to_vec();
    }
    let a = atom(&components[0]).map(FamilyName::arity).unwrap_or(0);
    let (first, second) = (&theta[1..1 + a], &theta[1 + a..1 + 2 * a]);
    if first[0] <= second[0] {
        return theta.to_vec();
    }
    let mut out = Vec::with_capacity(theta.len());
    out.push(1.0 - theta[0]);
    out.extend_from_slice(second);
    out.extend_from_slice(first);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::binning::bin_counts;
    use crate::mc::stream;

    fn spec(s: &str) -> DistributionSpec {
        DistributionSpec::parse(s).unwrap()
    }

    #[test]
    fn exponential_exact_fit() {
        // 1 - exp(-0.7 r) = 0.6
        let exact = -(0.4f64).ln() / 0.7;
        let fit = minimum_chisq(
            &spec("exp(?)"),
            &[60.0, 40.0],
            &[0.0, 0.7, f64::INFINITY],
            StatisticKind::Pearson,
            &[1.0],
        )
        .unwrap();
        assert!((fit.theta[0] - exact).abs() < 1e-5, "{:?}", fit);
        assert!((fit.theta[0] - 1.30899).abs() < 1e-5);
        assert!(fit.objective < 1e-10);
        assert!(fit.converged);
    }

    #[test]
    fn exact_counts_recover_parameters() {
        let family = spec("normal(?,?)");
        let truth = [1.5, 0.7];
        let edges = [f64::NEG_INFINITY, 0.5, 1.0, 1.5, 2.0, 2.5, f64::INFINITY];
        let probs = bin_probabilities(&family.bind(&truth).unwrap(), &edges);
        let counts: Vec<f64> = probs.iter().map(|p| 1000.0 * p).collect();
        for kind in StatisticKind::ALL {
            let fit = minimum_chisq(&family, &counts, &edges, kind, &[0.0, 1.0]).unwrap();
            assert!((fit.theta[0] - truth[0]).abs() < 1e-5, "{kind}: {:?}", fit.theta);
            assert!((fit.theta[1] - truth[1]).abs() < 1e-5, "{kind}: {:?}", fit.theta);
            assert!(fit.objective <= 1e-10, "{kind}: {}", fit.objective);
        }
        let fit = binned_mle(&family, &counts, &edges, &[0.0, 1.0]).unwrap();
        assert!((fit.theta[0] - truth[0]).abs() < 1e-5);
        assert!((fit.theta[1] - truth[1]).abs() < 1e-5);
    }

    #[test]
    fn binned_mle_matches_min_chisq_on_two_bins() {
        let family = spec("exp(?)");
        let edges = [0.0, 0.7, f64::INFINITY];
        let counts = [60.0, 40.0];
        let a = binned_mle(&family, &counts, &edges, &[1.0]).unwrap();
        let b = minimum_chisq(&family, &counts, &edges, StatisticKind::Pearson, &[1.0]).unwrap();
        assert!((a.theta[0] - b.theta[0]).abs() < 1e-4);
        assert!(binned_mle(&family, &[100.0, 0.0], &edges, &[1.0]).is_err());
    }

    #[test]
    fn min_chisq_beats_binned_mle_on_its_own_objective() {
        let family = spec("normal(?,?)");
        let edges = [f64::NEG_INFINITY, -1.0, -0.3, 0.2, 0.9, f64::INFINITY];
        let counts = [30.0, 18.0, 25.0, 12.0, 15.0];
        let mle = binned_mle(&family, &counts, &edges, &[0.0, 1.0]).unwrap();
        for kind in StatisticKind::ALL {
            let mc = minimum_chisq(&family, &counts, &edges, kind, &[0.0, 1.0]).unwrap();
            let probs = bin_probabilities(&family.bind(&mle.theta).unwrap(), &edges);
            let e: Vec<f64> = probs.iter().map(|p| 100.0 * p).collect();
            let at_mle = chisq_stat(kind, &counts, &e).unwrap();
            assert!(mc.objective <= at_mle + 1e-8, "{kind}: {} > {at_mle}", mc.objective);
        }
    }

    #[test]
    fn neyman_needs_nonzero_counts() {
        let r = minimum_chisq(
            &spec("exp(?)"),
            &[0.0, 5.0, 5.0],
            &[0.0, 1.0, 2.0, f64::INFINITY],
            StatisticKind::NeymanModified,
            &[1.0],
        );
        assert!(matches!(r, Err(Error::ZeroObservedCount { bin: 0 })));
    }

    #[test]
    fn rejects_simple_family_and_arity() {
        assert!(minimum_chisq(&spec("exp(1)"), &[1.0, 1.0], &[0.0, 1.0, f64::INFINITY], StatisticKind::Pearson, &[]).is_err());
        assert!(minimum_chisq(&spec("exp(?)"), &[1.0, 1.0], &[0.0, 1.0, f64::INFINITY], StatisticKind::Pearson, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn closed_form_mles() {
        let fit = unbinned_mle(&spec("normal(?,?)"), &[0.0, 2.0], &[0.0, 1.0]).unwrap();
        assert_eq!(fit.theta, vec![1.0, 1.0]);
        let fit = unbinned_mle(&spec("exp(?)"), &[1.0, 3.0, 2.0], &[1.0]).unwrap();
        assert!((fit.theta[0] - 0.5).abs() < 1e-15);
        assert!(unbinned_mle(&spec("exp(?)"), &[-1.0, 3.0], &[1.0]).is_err());
    }

    #[test]
    fn optimizer_mle_agrees_with_closed_form() {
        // Fixing the mean forces the optimizer path; the sd MLE about a
        // known mean is sqrt(mean square deviation).
        let data: Vec<f64> = spec("normal(1, 2)").bind(&[]).unwrap().sample(500, &mut stream(3, 0, 0));
        let fit = unbinned_mle(&spec("normal(1, ?)"), &data, &[1.0]).unwrap();
        let oracle = (data.iter().map(|x| (x - 1.0).powi(2)).sum::<f64>() / 500.0).sqrt();
        assert!((fit.theta[0] - oracle).abs() < 1e-5);
        // Gamma shape/rate: score equations ln(shape) - digamma(shape) = ln(mean) - mean(ln x).
        let g = spec("gamma(?,?)");
        let data = spec("gamma(3, 0.5)").bind(&[]).unwrap().sample(2000, &mut stream(3, 1, 0));
        let start = default_start(&g, StartData::Values(&data));
        let fit = unbinned_mle(&g, &data, &start).unwrap();
        let mean = data.iter().sum::<f64>() / 2000.0;
        assert!((fit.theta[0] / fit.theta[1] - mean).abs() < 1e-4 * mean);
        assert!((fit.theta[0] - 3.0).abs() < 0.4);
    }

    #[test]
    fn mixture_mle_recovers_weight() {
        let family = spec("?*normal(?,?) + normal(?,?)");
        let truth = spec("0.3333333333333333*normal(0,1) + normal(5,2)").bind(&[]).unwrap();
        let data = truth.sample(1000, &mut stream(5, 0, 0));
        let start = default_start(&family, StartData::Values(&data));
        let fit = unbinned_mle(&family, &data, &start).unwrap();
        let theta = canonicalize_mixture(&family, &fit.theta);
        assert!((theta[0] - 1.0 / 3.0).abs() < 0.1, "{theta:?}");
        assert!(theta[1] < theta[3]);
    }

    #[test]
    fn consistency_at_large_n() {
        for (family, truth, kind) in [
            ("exp(?)", vec![2.0], StatisticKind::Pearson),
            ("normal(?,?)", vec![-1.0, 3.0], StatisticKind::G2),
        ] {
            let fam = spec(family);
            let d = fam.bind(&truth).unwrap();
            let n = 100_000;
            let reps = 20;
            let mut ests = vec![Vec::new(); truth.len()];
            for r in 0..reps {
                let data = d.sample(n, &mut stream(9, 0, r));
                let edges = crate::binning::equal_prob_edges(&d, 10).unwrap();
                let counts: Vec<f64> = bin_counts(&data, &edges).counts.into_iter().map(|c| c as f64).collect();
                let start = default_start(&fam, StartData::Binned { counts: &counts, edges: &edges });
                let fit = minimum_chisq(&fam, &counts, &edges, kind, &start).unwrap();
                for (e, t) in ests.iter_mut().zip(fit.theta) {
                    e.push(t);
                }
            }
            for (e, t) in ests.iter().zip(&truth) {
                let m = e.iter().sum::<f64>() / reps as f64;
                let sd = (e.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
                let se = sd / (reps as f64).sqrt();
                assert!((m - t).abs() <= 5.0 * se.max(1e-12), "{family}: {m} vs {t} (se {se})");
            }
        }
    }

    #[test]
    fn reparameterization_invariance() {
        // Scaling the unconstrained coordinate is another strictly increasing
        // reparameterization; the optimum must not move.
        let family = spec("exp(?)");
        let edges = [0.0, 0.3, 0.8, 1.5, f64::INFINITY];
        let counts = [31.0, 27.0, 22.0, 20.0];
        let direct = minimum_chisq(&family, &counts, &edges, StatisticKind::Pearson, &[1.0]).unwrap();
        let total: f64 = counts.iter().sum();
        let objective = |u: &[f64]| {
            let rate = (3.0 * u[0]).exp();
            let probs = bin_probabilities(&family.bind(&[rate]).unwrap(), &edges);
            let e: Vec<f64> = probs.iter().map(|p| total * p).collect();
            chisq_stat(StatisticKind::Pearson, &counts, &e).unwrap()
        };
        let run = minimize(objective, &[0.0], &FitOptions::default()).unwrap();
        assert!(((3.0 * run.x[0]).exp() - direct.theta[0]).abs() < 2e-5);
    }

    #[test]
    fn starting_values() {
        assert_eq!(default_start(&spec("normal(?,?)"), StartData::Nothing), vec![0.0, 1.0]);
        // mean 3, population sd 2
        let s = default_start(&spec("normal(?,?)"), StartData::Values(&[1.0, 5.0, 1.0, 5.0]));
        assert_eq!(s, vec![3.0, 2.0]);
        // midpoints 0.5, 1.5, 2.5 with counts 2, 1, 1: mean 1.25
        let s = default_start(
            &spec("exp(?)"),
            StartData::Binned {
                counts: &[2.0, 1.0, 1.0],
                edges: &[0.0, 1.0, 2.0, 3.0],
            },
        );
        assert!((s[0] - 1.0 / 1.25).abs() < 1e-12);
        let s = default_start(&spec("beta(?,?)"), StartData::Values(&[-5.0, 9.0]));
        assert_eq!(s, vec![1.0, 1.0]);
        let mix = spec("?*normal(?,?) + normal(?,?)");
        let s = default_start(&mix, StartData::Values(&[0.0, 1.0, 10.0, 11.0]));
        assert_eq!(s, vec![0.5, 0.5, 0.5, 10.5, 0.5]);
    }

    #[test]
    fn canonical_labels() {
        let mix = spec("?*normal(?,?) + normal(?,?)");
        assert_eq!(
            canonicalize_mixture(&mix, &[0.3, 5.0, 2.0, 0.0, 1.0]),
            vec![0.7, 0.0, 1.0, 5.0, 2.0]
        );
        assert_eq!(canonicalize_mixture(&mix, &[0.3, 0.0, 1.0, 5.0, 2.0]), vec![0.3, 0.0, 1.0, 5.0, 2.0]);
        assert_eq!(canonicalize_mixture(&spec("normal(?,?)"), &[1.0, 2.0]), vec![1.0, 2.0]);
    }
}
