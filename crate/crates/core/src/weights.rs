//! Node-weight functions and the context-tree functions they induce.
//!
//! A context-tree function is `F(τ) = ∏_{s∈τ} f(s)` for a non-negative
//! node weight `f`. All weights are carried as [`LogWeight`], a natural-log
//! value with an explicit zero.
//!
//! The textual form accepted by [`NodeWeightFunction::parse`] is
//!
//! ```text
//! unity | depth:L | renewal:SYM | exp:ALPHA | lenexp | ctw | gctw:BETA | target:C,L
//! ```
//!
//! with products written by joining terms with `*`, e.g. `target:8,3*depth:5`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul};
use std::sync::Arc;

use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::symbols::Alphabet;
use crate::trees::{Context, ContextTree, TreeSpace};

#[derive(Debug, Error)]
pub enum WeightError {
    #[error("invalid parameter for {function}: {message}")]
    BadParameter {
        function: &'static str,
        message: String,
    },

    #[error("unknown weight function {0:?}")]
    UnknownFunction(String),

    #[error("malformed prior term {term:?}: {message}")]
    Parse { term: String, message: String },

    #[error("weight functions live in different tree spaces")]
    SpaceMismatch,

    #[error("context {0} is deeper than the maximal depth")]
    DepthOverflow(String),
}

/// A non-negative weight stored as its natural logarithm, with a tagged zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogWeight {
    Zero,
    Ln(f64),
}

impl LogWeight {
    pub const ONE: LogWeight = LogWeight::Ln(0.0);

    /// Panics on negative or NaN input.
    pub fn from_value(x: f64) -> Self {
        assert!(x >= 0.0, "weights are non-negative, got {x}");
        if x == 0.0 {
            Self::Zero
        } else {
            Self::from_ln(x.ln())
        }
    }

    /// `-∞` maps to [`LogWeight::Zero`]; panics on NaN or `+∞`.
    pub fn from_ln(ln: f64) -> Self {
        assert!(!ln.is_nan() && ln != f64::INFINITY, "invalid log weight {ln}");
        if ln == f64::NEG_INFINITY {
            Self::Zero
        } else {
            Self::Ln(ln)
        }
    }

    pub fn is_zero(self) -> bool {
        matches!(self, Self::Zero)
    }

    pub fn ln(self) -> Option<f64> {
        match self {
            Self::Zero => None,
            Self::Ln(x) => Some(x),
        }
    }

    pub fn log10(self) -> Option<f64> {
        self.ln().map(|x| x / std::f64::consts::LN_10)
    }

    /// The weight itself; underflows to 0 for very negative logs.
    pub fn value(self) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Ln(x) => x.exp(),
        }
    }

    /// `self / other`, or `None` when `other` is zero.
    pub fn checked_div(self, other: Self) -> Option<Self> {
        match (self, other) {
            (_, Self::Zero) => None,
            (Self::Zero, _) => Some(Self::Zero),
            (Self::Ln(a), Self::Ln(b)) => Some(Self::Ln(a - b)),
        }
    }

    pub fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    pub fn product<I: IntoIterator<Item = LogWeight>>(items: I) -> Self {
        items.into_iter().fold(Self::ONE, |acc, w| acc * w)
    }
}

// Multiplication in linear scale is addition of logarithms.
#[allow(clippy::suspicious_arithmetic_impl)]
impl Mul for LogWeight {
    type Output = LogWeight;

    fn mul(self, rhs: Self) -> Self {
        match (self, rhs) {
            (Self::Ln(a), Self::Ln(b)) => Self::Ln(a + b),
            _ => Self::Zero,
        }
    }
}

/// Log-sum-exp of the two weights.
impl Add for LogWeight {
    type Output = LogWeight;

    fn add(self, rhs: Self) -> Self {
        match (self, rhs) {
            (Self::Zero, w) | (w, Self::Zero) => w,
            (Self::Ln(a), Self::Ln(b)) => {
                let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
                Self::Ln(hi + (lo - hi).exp().ln_1p())
            }
        }
    }
}

impl PartialOrd for LogWeight {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Self::Zero, Self::Zero) => Some(Ordering::Equal),
            (Self::Zero, Self::Ln(_)) => Some(Ordering::Less),
            (Self::Ln(_), Self::Zero) => Some(Ordering::Greater),
            (Self::Ln(a), Self::Ln(b)) => a.partial_cmp(b),
        }
    }
}

impl Serialize for LogWeight {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self.ln() {
            Some(x) => serializer.serialize_f64(x),
            None => serializer.serialize_none(),
        }
    }
}

/// In-library extension point for node weights outside the built-in catalog.
pub trait NodeWeight: Send + Sync + fmt::Debug {
    /// Name used when the function is printed.
    fn name(&self) -> String;

    fn log_weight(&self, s: &Context, space: &TreeSpace) -> LogWeight;
}

#[derive(Debug, Clone)]
pub enum WeightKind {
    Unity,
    DepthIndicator(usize),
    RenewalIndicator { code: u8, label: char },
    Exponential(f64),
    LengthExponential,
    Ctw,
    GeneralCtw(f64),
    TargetDepth { c: f64, depth: usize },
    Product(Vec<WeightKind>),
    Custom(Arc<dyn NodeWeight>),
}

impl WeightKind {
    fn log_weight(&self, s: &Context, space: &TreeSpace) -> LogWeight {
        let len = s.len();
        let below_max = len < space.depth();
        match self {
            Self::Unity => LogWeight::ONE,
            Self::DepthIndicator(l) => indicator(len <= *l),
            Self::RenewalIndicator { code, .. } => {
                // The symbol may only appear as the oldest (last stored) symbol.
                let later = &s.recent_first()[..len.saturating_sub(1)];
                indicator(!later.contains(code))
            }
            Self::Exponential(alpha) => LogWeight::Ln(-alpha),
            Self::LengthExponential => LogWeight::Ln(-(len as f64)),
            Self::Ctw => LogWeight::Ln(if below_max { 0.25f64.ln() } else { 0.5f64.ln() }),
            Self::GeneralCtw(beta) => {
                let base = (1.0 - beta).ln() / (space.m() - 1) as f64;
                LogWeight::Ln(if below_max { base + beta.ln() } else { base })
            }
            Self::TargetDepth { c, depth } => {
                LogWeight::Ln(-(len.abs_diff(*depth) as f64) * c.ln())
            }
            Self::Product(parts) => {
                LogWeight::product(parts.iter().map(|p| p.log_weight(s, space)))
            }
            Self::Custom(w) => w.log_weight(s, space),
        }
    }

    fn flatten_into(self, out: &mut Vec<WeightKind>) {
        match self {
            Self::Product(parts) => {
                for p in parts {
                    p.flatten_into(out);
                }
            }
            other => out.push(other),
        }
    }
}

fn indicator(keep: bool) -> LogWeight {
    if keep {
        LogWeight::ONE
    } else {
        LogWeight::Zero
    }
}

impl fmt::Display for WeightKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Unity => f.write_str("unity"),
            Self::DepthIndicator(l) => write!(f, "depth:{l}"),
            Self::RenewalIndicator { label, .. } => write!(f, "renewal:{label}"),
            Self::Exponential(a) => write!(f, "exp:{a}"),
            Self::LengthExponential => f.write_str("lenexp"),
            Self::Ctw => f.write_str("ctw"),
            Self::GeneralCtw(b) => write!(f, "gctw:{b}"),
            Self::TargetDepth { c, depth } => write!(f, "target:{c},{depth}"),
            Self::Product(parts) => {
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        f.write_str("*")?;
                    }
                    write!(f, "{p}")?;
                }
                Ok(())
            }
            Self::Custom(w) => f.write_str(&w.name()),
        }
    }
}

/// A node-weight function `f` bound to a tree space.
#[derive(Debug, Clone)]
pub struct NodeWeightFunction {
    kind: WeightKind,
    space: TreeSpace,
}

impl NodeWeightFunction {
    pub fn unity(space: &TreeSpace) -> Self {
        Self::from_kind(WeightKind::Unity, space)
    }

    /// `1{ℓ(s) ≤ l}`: restricts the prior to `T_l`.
    pub fn depth_indicator(space: &TreeSpace, l: usize) -> Result<Self, WeightError> {
        check_depth("depth", l, space)?;
        Ok(Self::from_kind(WeightKind::DepthIndicator(l), space))
    }

    /// Uniform weight on `a`-renewing trees: `a` may occur only as the oldest symbol of a leaf.
    pub fn renewal_indicator(space: &TreeSpace, code: u8) -> Result<Self, WeightError> {
        let label = char::from_digit(code as u32, 36).unwrap_or('?');
        Self::renewal_with_label(space, code, label)
    }

    fn renewal_with_label(space: &TreeSpace, code: u8, label: char) -> Result<Self, WeightError> {
        if code as usize >= space.m() {
            return Err(WeightError::BadParameter {
                function: "renewal",
                message: format!("symbol code {code} outside 0..{}", space.m()),
            });
        }
        Ok(Self::from_kind(
            WeightKind::RenewalIndicator { code, label },
            space,
        ))
    }

    /// `e^{-α}` per leaf.
    pub fn exponential(space: &TreeSpace, alpha: f64) -> Result<Self, WeightError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(WeightError::BadParameter {
                function: "exp",
                message: format!("alpha must be positive, got {alpha}"),
            });
        }
        Ok(Self::from_kind(WeightKind::Exponential(alpha), space))
    }

    /// `e^{-ℓ(s)}` per leaf.
    pub fn length_exponential(space: &TreeSpace) -> Self {
        Self::from_kind(WeightKind::LengthExponential, space)
    }

    pub fn ctw(space: &TreeSpace) -> Self {
        Self::from_kind(WeightKind::Ctw, space)
    }

    pub fn general_ctw(space: &TreeSpace, beta: f64) -> Result<Self, WeightError> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(WeightError::BadParameter {
                function: "gctw",
                message: format!("beta must lie in (0, 1), got {beta}"),
            });
        }
        Ok(Self::from_kind(WeightKind::GeneralCtw(beta), space))
    }

    /// `c^{-|ℓ(s) - l|}` per leaf.
    pub fn target_depth(space: &TreeSpace, c: f64, l: usize) -> Result<Self, WeightError> {
        if !(c > 1.0 && c.is_finite()) {
            return Err(WeightError::BadParameter {
                function: "target",
                message: format!("c must exceed 1, got {c}"),
            });
        }
        check_depth("target", l, space)?;
        Ok(Self::from_kind(WeightKind::TargetDepth { c, depth: l }, space))
    }

    pub fn custom(space: &TreeSpace, weight: Arc<dyn NodeWeight>) -> Self {
        Self::from_kind(WeightKind::Custom(weight), space)
    }

    fn from_kind(kind: WeightKind, space: &TreeSpace) -> Self {
        Self {
            kind,
            space: *space,
        }
    }

    /// Pointwise product `f·g`, itself a context-tree function.
    pub fn product(&self, other: &Self) -> Result<Self, WeightError> {
        if self.space != other.space {
            return Err(WeightError::SpaceMismatch);
        }
        let mut parts = Vec::new();
        self.kind.clone().flatten_into(&mut parts);
        other.kind.clone().flatten_into(&mut parts);
        Ok(Self::from_kind(WeightKind::Product(parts), &self.space))
    }

    /// Parses the prior mini-language; see the module docs.
    pub fn parse(spec: &str, alphabet: &Alphabet, space: &TreeSpace) -> Result<Self, WeightError> {
        let mut acc: Option<Self> = None;
        for term in spec.split('*').map(str::trim) {
            let f = parse_term(term, alphabet, space)?;
            acc = Some(match acc {
                None => f,
                Some(prev) => prev.product(&f)?,
            });
        }
        acc.ok_or_else(|| WeightError::Parse {
            term: spec.to_string(),
            message: "empty prior".into(),
        })
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    pub fn space(&self) -> &TreeSpace {
        &self.space
    }

    pub fn eval_node(&self, s: &Context) -> Result<LogWeight, WeightError> {
        if s.len() > self.space.depth() {
            return Err(WeightError::DepthOverflow(s.to_string()));
        }
        Ok(self.kind.log_weight(s, &self.space))
    }

    /// `log F(τ) = Σ_{s∈τ} log f(s)`.
    pub fn eval_tree(&self, tree: &ContextTree) -> Result<LogWeight, WeightError> {
        let mut acc = LogWeight::ONE;
        for leaf in tree.leaves() {
            acc = acc * self.eval_node(leaf)?;
        }
        Ok(acc)
    }

    /// `log f` at every node of the maximal tree, in trie-index order.
    pub fn node_log_weights(&self) -> Vec<LogWeight> {
        (0..self.space.node_count())
            .map(|i| self.kind.log_weight(&self.space.context_at(i), &self.space))
            .collect()
    }
}

impl fmt::Display for NodeWeightFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.kind.fmt(f)
    }
}

fn check_depth(function: &'static str, l: usize, space: &TreeSpace) -> Result<(), WeightError> {
    if l > space.depth() {
        return Err(WeightError::BadParameter {
            function,
            message: format!("depth {l} exceeds maximal depth {}", space.depth()),
        });
    }
    Ok(())
}

fn parse_term(
    term: &str,
    alphabet: &Alphabet,
    space: &TreeSpace,
) -> Result<NodeWeightFunction, WeightError> {
    let (name, args) = match term.split_once(':') {
        Some((name, args)) => (name.trim(), Some(args.trim())),
        None => (term, None),
    };
    let bad = |message: &str| WeightError::Parse {
        term: term.to_string(),
        message: message.to_string(),
    };
    let no_args = |f: NodeWeightFunction| match args {
        None => Ok(f),
        Some(_) => Err(bad("takes no arguments")),
    };
    let real = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("expected a number"));
    let int = |s: &str| s.trim().parse::<usize>().map_err(|_| bad("expected a depth"));
    let arg = || args.ok_or_else(|| bad("missing argument"));

    match name {
        "unity" => no_args(NodeWeightFunction::unity(space)),
        "lenexp" => no_args(NodeWeightFunction::length_exponential(space)),
        "ctw" => no_args(NodeWeightFunction::ctw(space)),
        "depth" => NodeWeightFunction::depth_indicator(space, int(arg()?)?),
        "exp" => NodeWeightFunction::exponential(space, real(arg()?)?),
        "gctw" => NodeWeightFunction::general_ctw(space, real(arg()?)?),
        "renewal" => {
            let sym = arg()?;
            let mut chars = sym.chars();
            let (Some(c), None) = (chars.next(), chars.next()) else {
                return Err(bad("expected a single alphabet symbol"));
            };
            let code = alphabet
                .code_of(c)
                .ok_or_else(|| bad("symbol is not in the alphabet"))?;
            NodeWeightFunction::renewal_with_label(space, code, c)
        }
        "target" => {
            let (c, l) = arg()?
                .split_once(',')
                .ok_or_else(|| bad("expected target:C,L"))?;
            NodeWeightFunction::target_depth(space, real(c)?, int(l)?)
        }
        other => Err(WeightError::UnknownFunction(other.to_string())),
    }
}
