//! Textual distribution specs.
//!
//! ```text
//! spec     := mix ("|" interval)? ;
//! mix      := term ("+" term)* ;
//! term     := ((number | "?") "*")? atom ;
//! atom     := name "(" arg ("," arg)* ")" ;
//! arg      := number | "?" ;
//! interval := ("[" | "(") bound "," bound ("]" | ")") ;
//! bound    := number | "-inf" | "inf" ;
//! ```
//!
//! `?` marks a free parameter; free parameters are numbered left to right.
//! A mixture term without a weight receives the remaining probability mass.
//! At most one term may omit its weight, and free weights require such a term.

use std::fmt;
use std::str::FromStr;

use super::family::{FamilyName, ParamTransform};
use super::Distribution;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Arg {
    Fixed(f64),
    Free,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    Fixed(f64),
    Free,
    /// One minus the sum of the other weights.
    Remainder,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bound {
    pub value: f64,
    pub closed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpecNode {
    Atom {
        family: FamilyName,
        args: Vec<Arg>,
    },
    Mixture {
        weights: Vec<Weight>,
        components: Vec<SpecNode>,
    },
    Truncate {
        inner: Box<SpecNode>,
        lower: Bound,
        upper: Bound,
    },
}

/// A parsed distribution or parametric family.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionSpec {
    root: SpecNode,
}

impl DistributionSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let tokens = lex(text)?;
        let mut p = Parser {
            tokens,
            pos: 0,
            end: text.len(),
        };
        let root = p.spec()?;
        let spec = DistributionSpec { root };
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_node(root: SpecNode) -> Result<Self> {
        let spec = DistributionSpec { root };
        spec.validate()?;
        Ok(spec)
    }

    pub fn root(&self) -> &SpecNode {
        &self.root
    }

    /// Number of free parameters.
    pub fn free_count(&self) -> usize {
        self.transforms().len()
    }

    pub fn is_simple(&self) -> bool {
        self.free_count() == 0
    }

    /// Optimizer transform for each free parameter, in positional order.
    pub fn transforms(&self) -> Vec<ParamTransform> {
        fn walk(node: &SpecNode, out: &mut Vec<ParamTransform>) {
            match node {
                SpecNode::Atom { family, args } => {
                    for (i, a) in args.iter().enumerate() {
                        if matches!(a, Arg::Free) {
                            out.push(family.transform(i));
                        }
                    }
                }
                SpecNode::Mixture {
                    weights,
                    components,
                } => {
                    for (w, c) in weights.iter().zip(components) {
                        if matches!(w, Weight::Free) {
                            out.push(ParamTransform::Logit);
                        }
                        walk(c, out);
                    }
                }
                SpecNode::Truncate { inner, .. } => walk(inner, out),
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }

    /// Substitutes `theta` for the free parameters.
    pub fn bind(&self, theta: &[f64]) -> Result<Distribution> {
        let expected = self.free_count();
        if theta.len() != expected {
            return Err(Error::ParameterArity {
                expected,
                got: theta.len(),
            });
        }
        let mut it = theta.iter().copied();
        bind_node(&self.root, &mut it)
    }

    /// A spec with the free parameters replaced by `theta`.
    pub fn substitute(&self, theta: &[f64]) -> Result<DistributionSpec> {
        fn sub(node: &SpecNode, it: &mut impl Iterator<Item = f64>) -> SpecNode {
            match node {
                SpecNode::Atom { family, args } => SpecNode::Atom {
                    family: *family,
                    args: args
                        .iter()
                        .map(|a| match a {
                            Arg::Free => Arg::Fixed(it.next().unwrap_or(f64::NAN)),
                            fixed => *fixed,
                        })
                        .collect(),
                },
                SpecNode::Mixture {
                    weights,
                    components,
                } => {
                    let mut ws = Vec::new();
                    let mut cs = Vec::new();
                    for (w, c) in weights.iter().zip(components) {
                        ws.push(match w {
                            Weight::Free => Weight::Fixed(it.next().unwrap_or(f64::NAN)),
                            other => *other,
                        });
                        cs.push(sub(c, it));
                    }
                    SpecNode::Mixture {
                        weights: ws,
                        components: cs,
                    }
                }
                SpecNode::Truncate {
                    inner,
                    lower,
                    upper,
                } => SpecNode::Truncate {
                    inner: Box::new(sub(inner, it)),
                    lower: *lower,
                    upper: *upper,
                },
            }
        }
        self.bind(theta)?;
        let mut it = theta.iter().copied();
        Ok(DistributionSpec {
            root: sub(&self.root, &mut it),
        })
    }

    fn validate(&self) -> Result<()> {
        fn check(node: &SpecNode) -> Result<()> {
            match node {
                SpecNode::Atom { family, args } => {
                    if args.len() != family.arity() {
                        return Err(Error::FamilyArity {
                            family: family.canonical().to_string(),
                            expected: family.arity(),
                            got: args.len(),
                        });
                    }
                    if args.iter().all(|a| matches!(a, Arg::Fixed(_))) {
                        let fixed: Vec<f64> = args
                            .iter()
                            .map(|a| match a {
                                Arg::Fixed(v) => *v,
                                Arg::Free => unreachable!(),
                            })
                            .collect();
                        family.build(&fixed)?;
                    }
                    Ok(())
                }
                SpecNode::Mixture {
                    weights,
                    components,
                } => {
                    if weights.len() != components.len() || components.is_empty() {
                        return Err(Error::MixtureWeights(f64::NAN));
                    }
                    let fixed_sum: f64 = weights
                        .iter()
                        .filter_map(|w| match w {
                            Weight::Fixed(v) => Some(*v),
                            _ => None,
                        })
                        .sum();
                    let fixed_ok = weights
                        .iter()
                        .all(|w| !matches!(w, Weight::Fixed(v) if !(*v > 0.0)));
                    let remainders = weights
                        .iter()
                        .filter(|w| matches!(w, Weight::Remainder))
                        .count();
                    let frees = weights.iter().filter(|w| matches!(w, Weight::Free)).count();
                    let ok = fixed_ok
                        && match (remainders, frees) {
                            (0, 0) => (fixed_sum - 1.0).abs() <= 1e-9,
                            (1, _) => fixed_sum < 1.0,
                            _ => false,
                        };
                    if !ok {
                        return Err(Error::MixtureWeights(fixed_sum));
                    }
                    components.iter().try_for_each(check)
                }
                SpecNode::Truncate {
                    inner,
                    lower,
                    upper,
                } => {
                    if lower.value.is_nan() || upper.value.is_nan() || lower.value >= upper.value {
                        return Err(Error::Truncation {
                            lower: lower.value,
                            upper: upper.value,
                            reason: "requires lower < upper".into(),
                        });
                    }
                    check(inner)
                }
            }
        }
        check(&self.root)?;
        if self.is_simple() {
            self.bind(&[])?;
        }
        Ok(())
    }
}

fn bind_node(node: &SpecNode, it: &mut impl Iterator<Item = f64>) -> Result<Distribution> {
    match node {
        SpecNode::Atom { family, args } => {
            let values: Vec<f64> = args
                .iter()
                .map(|a| match a {
                    Arg::Fixed(v) => *v,
                    Arg::Free => it.next().unwrap_or(f64::NAN),
                })
                .collect();
            Ok(Distribution::Atom(family.build(&values)?))
        }
        SpecNode::Mixture {
            weights,
            components,
        } => {
            let mut ws = Vec::with_capacity(weights.len());
            let mut comps = Vec::with_capacity(components.len());
            for (w, c) in weights.iter().zip(components) {
                ws.push(match w {
                    Weight::Fixed(v) => Some(*v),
                    Weight::Free => {
                        let v = it.next().unwrap_or(f64::NAN);
                        if !(v > 0.0 && v < 1.0) {
                            return Err(Error::ParameterDomain {
                                family: "mixture".into(),
                                message: format!("weight {v} outside (0, 1)"),
                            });
                        }
                        Some(v)
                    }
                    Weight::Remainder => None,
                });
                comps.push(bind_node(c, it)?);
            }
            let known: f64 = ws.iter().flatten().sum();
            let rest = 1.0 - known;
            let weights: Vec<f64> = ws.into_iter().map(|w| w.unwrap_or(rest)).collect();
            if weights.iter().any(|w| !(*w > 0.0)) {
                return Err(Error::ParameterDomain {
                    family: "mixture".into(),
                    message: format!("weights {weights:?} leave no mass for the remainder"),
                });
            }
            Distribution::mixture(weights, comps)
        }
        SpecNode::Truncate {
            inner,
            lower,
            upper,
        } => Distribution::truncated(bind_node(inner, it)?, lower.value, upper.value),
    }
}

impl FromStr for DistributionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DistributionSpec::parse(s)
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.root)
    }
}

impl fmt::Display for SpecNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecNode::Atom { family, args } => {
                write!(f, "{family}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    match a {
                        Arg::Fixed(v) => write!(f, "{v}")?,
                        Arg::Free => f.write_str("?")?,
                    }
                }
                f.write_str(")")
            }
            SpecNode::Mixture {
                weights,
                components,
            } => {
                for (i, (w, c)) in weights.iter().zip(components).enumerate() {
                    if i > 0 {
                        f.write_str(" + ")?;
                    }
                    match w {
                        Weight::Fixed(v) => write!(f, "{v}*")?,
                        Weight::Free => f.write_str("?*")?,
                        Weight::Remainder => {}
                    }
                    write!(f, "{c}")?;
                }
                Ok(())
            }
            SpecNode::Truncate {
                inner,
                lower,
                upper,
            } => write!(
                f,
                "{inner} | {}{}, {}{}",
                if lower.closed { '[' } else { '(' },
                lower.value,
                upper.value,
                if upper.closed { ']' } else { ')' },
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number(f64),
    Ident(String),
    Question,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Plus,
    Minus,
    Star,
    Pipe,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let start = i;
        let single = match c {
            '?' => Some(Tok::Question),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ',' => Some(Tok::Comma),
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '|' => Some(Tok::Pipe),
            _ => None,
        };
        if let Some(t) = single {
            out.push((start, t));
            i += 1;
        } else if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s = &text[start..i];
            let v: f64 = s.parse().map_err(|_| Error::Syntax {
                position: start,
                message: format!("malformed number `{s}`"),
            })?;
            out.push((start, Tok::Number(v)));
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(text[start..i].to_string())));
        } else {
            return Err(Error::Syntax {
                position: start,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map(|(o, _)| *o).unwrap_or(self.end)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            position: self.offset(),
            message: message.into(),
        })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.error(format!("expected {what}"))
        }
    }

    fn spec(&mut self) -> Result<SpecNode> {
        let mix = self.mix()?;
        let node = if self.peek() == Some(&Tok::Pipe) {
            self.pos += 1;
            let (lower, upper) = self.interval()?;
            SpecNode::Truncate {
                inner: Box::new(mix),
                lower,
                upper,
            }
        } else {
            mix
        };
        if self.pos != self.tokens.len() {
            return self.error("unexpected trailing input");
        }
        Ok(node)
    }

    fn mix(&mut self) -> Result<SpecNode> {
        let mut weights = Vec::new();
        let mut components = Vec::new();
        loop {
            let (w, atom) = self.term()?;
            weights.push(w);
            components.push(atom);
            if self.peek() == Some(&Tok::Plus) {
                self.pos += 1;
            } else {
                break;
            }
        }
        if components.len() == 1 {
            match weights[0] {
                Weight::Remainder => return Ok(components.pop().expect("one component")),
                Weight::Fixed(v) if (v - 1.0).abs() <= 1e-9 => {
                    return Ok(components.pop().expect("one component"))
                }
                Weight::Fixed(v) => return Err(Error::MixtureWeights(v)),
                Weight::Free => return Err(Error::MixtureWeights(f64::NAN)),
            }
        }
        Ok(SpecNode::Mixture {
            weights,
            components,
        })
    }

    fn term(&mut self) -> Result<(Weight, SpecNode)> {
        let weight = match self.peek() {
            Some(Tok::Question) => {
                self.pos += 1;
                self.expect(Tok::Star, "`*` after weight")?;
                Weight::Free
            }
            Some(Tok::Number(_)) | Some(Tok::Minus) => {
                let v = self.number()?;
                self.expect(Tok::Star, "`*` after weight")?;
                Weight::Fixed(v)
            }
            _ => Weight::Remainder,
        };
        Ok((weight, self.atom()?))
    }

    fn atom(&mut self) -> Result<SpecNode> {
        let name = match self.peek() {
            Some(Tok::Ident(s)) => s.clone(),
            _ => return self.error("expected a distribution name"),
        };
        let family: FamilyName = name.parse()?;
        self.pos += 1;
        self.expect(Tok::LParen, "`(`")?;
        let mut args = vec![self.arg()?];
        while self.peek() == Some(&Tok::Comma) {
            self.pos += 1;
            args.push(self.arg()?);
        }
        self.expect(Tok::RParen, "`)`")?;
        if args.len() != family.arity() {
            return Err(Error::FamilyArity {
                family: family.canonical().to_string(),
                expected: family.arity(),
                got: args.len(),
            });
        }
        Ok(SpecNode::Atom { family, args })
    }

    fn arg(&mut self) -> Result<Arg> {
        if self.peek() == Some(&Tok::Question) {
            self.pos += 1;
            Ok(Arg::Free)
        } else {
            Ok(Arg::Fixed(self.number()?))
        }
    }

    fn number(&mut self) -> Result<f64> {
        let sign = match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                -1.0
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                1.0
            }
            _ => 1.0,
        };
        match self.peek() {
            Some(Tok::Number(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(sign * v)
            }
            _ => self.error("expected a number"),
        }
    }

    fn bound(&mut self) -> Result<f64> {
        let sign = match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                -1.0
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                1.0
            }
            _ => 1.0,
        };
        match self.peek() {
            Some(Tok::Number(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(sign * v)
            }
            Some(Tok::Ident(s)) if s.eq_ignore_ascii_case("inf") || s.eq_ignore_ascii_case("infinity") => {
                self.pos += 1;
                Ok(sign * f64::INFINITY)
            }
            _ => self.error("expected a bound"),
        }
    }

    fn interval(&mut self) -> Result<(Bound, Bound)> {
        let lower_closed = match self.peek() {
            Some(Tok::LBracket) => true,
            Some(Tok::LParen) => false,
            _ => return self.error("expected `[` or `(`"),
        };
        self.pos += 1;
        let lo = self.bound()?;
        self.expect(Tok::Comma, "`,`")?;
        let hi = self.bound()?;
        let upper_closed = match self.peek() {
            Some(Tok::RBracket) => true,
            Some(Tok::RParen) => false,
            _ => return self.error("expected `]` or `)`"),
        };
        self.pos += 1;
        Ok((
            Bound {
                value: lo,
                closed: lower_closed,
            },
            Bound {
                value: hi,
                closed: upper_closed,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn atoms() {
        let s = DistributionSpec::parse("normal(0,1)").unwrap();
        assert_eq!(
            s.root(),
            &SpecNode::Atom {
                family: FamilyName::Normal,
                args: vec![Arg::Fixed(0.0), Arg::Fixed(1.0)]
            }
        );
        assert_eq!(s.free_count(), 0);

        let s = DistributionSpec::parse("NORMAL( ?, ? )").unwrap();
        assert_eq!(
            s.root(),
            &SpecNode::Atom {
                family: FamilyName::Normal,
                args: vec![Arg::Free, Arg::Free]
            }
        );
        assert_eq!(s.free_count(), 2);
    }

    #[test]
    fn truncated_mixture() {
        let s = DistributionSpec::parse("0.9*exp(1) + 0.1*normal(1.5, 0.5) | [0, inf)").unwrap();
        assert_eq!(s.free_count(), 0);
        match s.root() {
            SpecNode::Truncate {
                inner,
                lower,
                upper,
            } => {
                assert_eq!(lower.value, 0.0);
                assert!(lower.closed);
                assert_eq!(upper.value, f64::INFINITY);
                assert!(!upper.closed);
                match inner.as_ref() {
                    SpecNode::Mixture { weights, .. } => {
                        assert_eq!(weights, &vec![Weight::Fixed(0.9), Weight::Fixed(0.1)])
                    }
                    other => panic!("expected mixture, got {other:?}"),
                }
            }
            other => panic!("expected truncation, got {other:?}"),
        }
    }

    #[test]
    fn free_mixture_weight() {
        let s = DistributionSpec::parse("?*normal(?,?) + normal(?,?)").unwrap();
        assert_eq!(s.free_count(), 5);
        let d = s.bind(&[1.0 / 3.0, 0.0, 1.0, 5.0, 2.0]).unwrap();
        match d {
            Distribution::Mixture { weights, .. } => {
                assert!((weights[1] - 2.0 / 3.0).abs() < 1e-15)
            }
            _ => panic!(),
        }
    }

    #[test]
    fn syntax_errors_carry_positions() {
        match DistributionSpec::parse("normal(0,1") {
            Err(Error::Syntax { position, .. }) => assert_eq!(position, 10),
            other => panic!("{other:?}"),
        }
        match DistributionSpec::parse("normal(0 1)") {
            Err(Error::Syntax { position, .. }) => assert_eq!(position, 9),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            DistributionSpec::parse("lognormal(0,1)"),
            Err(Error::UnknownFamily(_))
        ));
        assert!(matches!(
            DistributionSpec::parse("0.5*normal(0,1) + 0.4*exp(1)"),
            Err(Error::MixtureWeights(_))
        ));
        assert!(matches!(
            DistributionSpec::parse("normal(0,1) | [1, 0]"),
            Err(Error::Truncation { .. })
        ));
        assert!(matches!(
            DistributionSpec::parse("exp(1) | [-3, -1]"),
            Err(Error::Truncation { .. })
        ));
        assert!(matches!(
            DistributionSpec::parse("normal(0)"),
            Err(Error::FamilyArity { .. })
        ));
        assert!(matches!(
            DistributionSpec::parse("normal(0, -1)"),
            Err(Error::ParameterDomain { .. })
        ));
    }

    #[test]
    fn bind_substitutes_positionally() {
        let free = DistributionSpec::parse("normal(?,?)").unwrap();
        let fixed = DistributionSpec::parse("normal(0,1)").unwrap();
        assert_eq!(free.bind(&[0.0, 1.0]).unwrap(), fixed.bind(&[]).unwrap());
        assert!(matches!(
            free.bind(&[0.0]),
            Err(Error::ParameterArity {
                expected: 2,
                got: 1
            })
        ));
        assert!(matches!(
            free.bind(&[0.0, 0.0]),
            Err(Error::ParameterDomain { .. })
        ));
        let e = DistributionSpec::parse("exp(?)").unwrap().bind(&[1.0]).unwrap();
        assert!((e.cdf(1.0) - 0.632121).abs() < 1e-6);
        let u = DistributionSpec::parse("uniform(0,1)").unwrap();
        assert_eq!(
            u.bind(&[]).unwrap(),
            Distribution::Atom(super::super::Family::Uniform {
                lower: 0.0,
                upper: 1.0
            })
        );
    }

    #[test]
    fn negative_arguments_and_scientific_notation() {
        let s = DistributionSpec::parse("linear(-0.5)").unwrap();
        assert_eq!(
            s.root(),
            &SpecNode::Atom {
                family: FamilyName::Linear,
                args: vec![Arg::Fixed(-0.5)]
            }
        );
        let s = DistributionSpec::parse("normal(1e-3, 2.5E+1) | (-inf, 3]").unwrap();
        assert_eq!(s.to_string(), "normal(0.001, 25) | (-inf, 3]");
    }

    fn arb_number() -> impl Strategy<Value = f64> {
        prop_oneof![(1u32..1000).prop_map(|v| v as f64 / 10.0), (0.01f64..50.0)]
    }

    fn arb_atom() -> impl Strategy<Value = String> {
        let arg = prop_oneof![Just("?".to_string()), arb_number().prop_map(|v| v.to_string())];
        prop_oneof![
            (arg.clone(), arb_number()).prop_map(|(m, s)| format!("normal({m}, {s})")),
            arg.clone().prop_map(|r| format!("exp({r})")),
            (arg.clone(), arg.clone()).prop_map(|(a, b)| format!("beta({a},{b})")),
            (arg.clone(), arg).prop_map(|(a, b)| format!("gamma({a},{b})")),
            Just("linear(?)".to_string()),
        ]
    }

    proptest! {
        #[test]
        fn unparse_round_trip(atoms in prop::collection::vec(arb_atom(), 1..4), trunc in any::<bool>()) {
            let text = if atoms.len() == 1 {
                atoms[0].clone()
            } else {
                let w = 1.0 / atoms.len() as f64;
                let mut parts: Vec<String> =
                    atoms[..atoms.len() - 1].iter().map(|a| format!("{w}*{a}")).collect();
                parts.push(atoms[atoms.len() - 1].clone());
                parts.join(" + ")
            };
            let text = if trunc { format!("{text} | [0, inf)") } else { text };
            let parsed = DistributionSpec::parse(&text).unwrap();
            let again = DistributionSpec::parse(&parsed.to_string()).unwrap();
            prop_assert_eq!(&parsed, &again);
            prop_assert_eq!(parsed.free_count(), text.matches('?').count());
        }
    }
}
