//! Sampling sequences from a context tree with one transition vector per leaf.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::symbols::{Alphabet, Sequence, SymbolError};
use crate::trees::{parse_tree_str, validate_tree, Context, ContextTree, TreeError, TreeSpace};

/// Identity of the random source, recorded in reports.
pub const GENERATOR: &str = "rand_chacha::ChaCha8Rng 0.3 (seed_from_u64)";

const SIMPLEX_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("unknown built-in model `{0}` (expected scenario-a or scenario-b)")]
    UnknownModel(String),

    #[error("leaf {leaf}: {message}")]
    BadVector { leaf: String, message: String },

    #[error("leaf {0} has no probability vector")]
    MissingVector(String),

    #[error("probability vector given for {0}, which is not a leaf")]
    UnknownLeaf(String),

    #[error("model depth {model} exceeds L={depth}")]
    DepthTooLarge { model: usize, depth: usize },

    #[error("model has {model} symbols, tree space has {space}")]
    AlphabetMismatch { model: usize, space: usize },

    #[error("sequence length {n} must exceed L={depth}")]
    TooShort { n: usize, depth: usize },

    #[error("initial symbols: {0}")]
    BadInitial(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Tree(#[from] TreeError),

    #[error(transparent)]
    Symbol(#[from] SymbolError),

    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// How the first `L` symbols are chosen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InitialPolicy {
    /// Exactly `L` codes, oldest first.
    Given(Vec<u8>),
    Repeat(u8),
    UniformRandom,
}

impl Default for InitialPolicy {
    fn default() -> Self {
        Self::Repeat(0)
    }
}

impl InitialPolicy {
    /// `repeat:SYM`, `given:SYMBOLS` or `uniform`.
    pub fn parse(text: &str, alphabet: &Alphabet) -> Result<Self, SimError> {
        let bad = || SimError::BadInitial(format!("`{text}` (expected repeat:SYM, given:SYMBOLS or uniform)"));
        match text.split_once(':') {
            None if text == "uniform" => Ok(Self::UniformRandom),
            Some(("repeat", sym)) => {
                let mut chars = sym.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) => alphabet.code_of(c).map(Self::Repeat).ok_or_else(bad),
                    _ => Err(bad()),
                }
            }
            Some(("given", symbols)) => Ok(Self::Given(alphabet.encode(symbols)?)),
            _ => Err(bad()),
        }
    }

    pub fn render(&self, alphabet: &Alphabet) -> String {
        match self {
            Self::Given(codes) => format!("given:{}", alphabet.decode(codes)),
            Self::Repeat(code) => format!("repeat:{}", alphabet.symbol(*code)),
            Self::UniformRandom => "uniform".into(),
        }
    }
}

/// A context tree `(τ, p)` over an alphabet, plus the initial-symbol policy.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionModel {
    alphabet: Alphabet,
    tree: ContextTree,
    /// Aligned with `tree.leaves()`.
    probs: Vec<Vec<f64>>,
    initial: InitialPolicy,
}

impl TransitionModel {
    pub fn new(
        alphabet: Alphabet,
        tree: ContextTree,
        mut probs: BTreeMap<Context, Vec<f64>>,
    ) -> Result<Self, SimError> {
        let m = alphabet.len();
        let mut aligned = Vec::with_capacity(tree.leaf_count());
        for leaf in tree.leaves() {
            let label = leaf.render(&alphabet);
            let p = probs
                .remove(leaf)
                .ok_or_else(|| SimError::MissingVector(label.clone()))?;
            check_simplex(&p, m).map_err(|message| SimError::BadVector {
                leaf: label,
                message,
            })?;
            aligned.push(p);
        }
        if let Some(extra) = probs.keys().next() {
            return Err(SimError::UnknownLeaf(extra.render(&alphabet)));
        }
        Ok(Self {
            alphabet,
            tree,
            probs: aligned,
            initial: InitialPolicy::default(),
        })
    }

    pub fn with_initial(mut self, initial: InitialPolicy) -> Self {
        self.initial = initial;
        self
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn tree(&self) -> &ContextTree {
        &self.tree
    }

    pub fn initial(&self) -> &InitialPolicy {
        &self.initial
    }

    pub fn probabilities(&self, leaf: &Context) -> Option<&[f64]> {
        self.tree
            .leaves()
            .binary_search(leaf)
            .ok()
            .map(|i| self.probs[i].as_slice())
    }

    /// Header line with the given depth, then `<leaf> : p0,p1,...` per leaf.
    pub fn to_model_file(&self, depth: usize) -> String {
        let mut out = format!("alphabet={} L={depth}\n", self.alphabet);
        for (leaf, p) in self.tree.leaves().iter().zip(&self.probs) {
            let row: Vec<String> = p.iter().map(f64::to_string).collect();
            let _ = writeln!(out, "{} : {}", leaf.render(&self.alphabet), row.join(","));
        }
        out
    }
}

fn check_simplex(p: &[f64], m: usize) -> Result<(), String> {
    if p.len() != m {
        return Err(format!("expected {m} probabilities, got {}", p.len()));
    }
    if let Some(x) = p.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(format!("probability {x} is not a finite non-negative number"));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(format!("probabilities sum to {sum}, not 1"));
    }
    Ok(())
}

/// The two binary generator models used in the simulation study.
pub fn builtin_model(name: &str) -> Result<TransitionModel, SimError> {
    let rows: &[(&str, [f64; 2])] = match name {
        "scenario-a" => &[
            ("11", [0.4, 0.6]),
            ("101", [0.4, 0.6]),
            ("001", [0.8, 0.2]),
            ("110", [0.3, 0.7]),
            ("010", [0.7, 0.3]),
            ("100", [0.6, 0.4]),
            ("000", [0.9, 0.1]),
        ],
        "scenario-b" => &[
            ("0", [0.1, 0.9]),
            ("01", [0.5, 0.5]),
            ("011", [0.5, 0.5]),
            ("0111", [0.5, 0.5]),
            ("1111", [0.9, 0.1]),
        ],
        other => return Err(SimError::UnknownModel(other.to_string())),
    };
    let alphabet = Alphabet::binary();
    let space = TreeSpace::new(2, 4)?;
    let mut probs = BTreeMap::new();
    for (label, p) in rows {
        let ctx = Context::parse(label, &alphabet).expect("built-in labels are binary");
        probs.insert(ctx, p.to_vec());
    }
    let tree = validate_tree(probs.keys().cloned(), &space)?;
    TransitionModel::new(alphabet, tree, probs)
}

/// Parses a model file; returns the model and the depth from its header.
pub fn parse_model_str(text: &str) -> Result<(TransitionModel, usize), SimError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (header_line, header) = lines.next().ok_or(SimError::Parse {
        line: 1,
        message: "missing header `alphabet=<chars> L=<int>`".into(),
    })?;
    let header_err = |message: String| SimError::Parse {
        line: header_line,
        message,
    };
    let mut alphabet = None;
    let mut depth = None;
    for field in header.split_whitespace() {
        match field.split_once('=') {
            Some(("alphabet", v)) => alphabet = Some(v.parse::<Alphabet>()?),
            Some(("L", v)) => {
                depth = Some(
                    v.parse::<usize>()
                        .map_err(|_| header_err(format!("bad depth `{v}`")))?,
                )
            }
            _ => return Err(header_err(format!("unexpected header field `{field}`"))),
        }
    }
    let alphabet = alphabet.ok_or_else(|| header_err("header lacks alphabet=".into()))?;
    let depth = depth.ok_or_else(|| header_err("header lacks L=".into()))?;
    let space = TreeSpace::new(alphabet.len(), depth)?;

    let mut probs = BTreeMap::new();
    let mut leaf_text = String::new();
    for (line, row) in lines {
        let err = |message: String| SimError::Parse { line, message };
        let (leaf, values) = row
            .split_once(':')
            .ok_or_else(|| err("expected `<leaf> : p0,p1,...`".into()))?;
        let ctx = Context::parse(leaf.trim(), &alphabet).map_err(err)?;
        let p = values
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| err(format!("bad probability: {e}")))?;
        check_simplex(&p, alphabet.len()).map_err(err)?;
        if probs.insert(ctx, p).is_some() {
            return Err(err(format!("duplicate leaf {}", leaf.trim())));
        }
        leaf_text.push_str(leaf.trim());
        leaf_text.push('\n');
    }
    let tree = parse_tree_str(&leaf_text, &alphabet, &space)?;
    Ok((TransitionModel::new(alphabet, tree, probs)?, depth))
}

pub fn parse_model_file(path: &Path) -> Result<(TransitionModel, usize), SimError> {
    let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_model_str(&text)
}

/// Draws `n` symbols: the first `L` from the initial policy, then each next
/// symbol from the vector of the leaf matching the past.
pub fn sample_sequence(
    model: &TransitionModel,
    n: usize,
    seed: u64,
    space: &TreeSpace,
) -> Result<Sequence, SimError> {
    let m = model.alphabet.len();
    let depth = space.depth();
    if m != space.m() {
        return Err(SimError::AlphabetMismatch {
            model: m,
            space: space.m(),
        });
    }
    if model.tree.depth() > depth {
        return Err(SimError::DepthTooLarge {
            model: model.tree.depth(),
            depth,
        });
    }
    if n <= depth {
        return Err(SimError::TooShort { n, depth });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut codes = Vec::with_capacity(n);
    match &model.initial {
        InitialPolicy::Given(given) => {
            if given.len() != depth {
                return Err(SimError::BadInitial(format!(
                    "{} symbols given, L={depth} needed",
                    given.len()
                )));
            }
            if let Some(c) = given.iter().find(|&&c| c as usize >= m) {
                return Err(SimError::BadInitial(format!("code {c} outside the alphabet")));
            }
            codes.extend_from_slice(given);
        }
        InitialPolicy::Repeat(code) => {
            if *code as usize >= m {
                return Err(SimError::BadInitial(format!("code {code} outside the alphabet")));
            }
            codes.resize(depth, *code);
        }
        InitialPolicy::UniformRandom => {
            codes.extend((0..depth).map(|_| rng.gen_range(0..m) as u8));
        }
    }

    while codes.len() < n {
        let leaf = model.tree.suffix_index(&codes)?;
        codes.push(draw(&model.probs[leaf], rng.gen::<f64>()));
    }
    Ok(Sequence::new(codes, model.alphabet.clone())?)
}

/// Inverse-CDF draw for `u ∈ [0, 1)`.
fn draw(p: &[f64], u: f64) -> u8 {
    let mut acc = 0.0;
    for (k, &pk) in p.iter().enumerate() {
        acc += pk;
        if u < acc {
            return k as u8;
        }
    }
    // Rounding left `u` above the cumulative sum: take the last positive entry.
    p.iter().rposition(|&pk| pk > 0.0).unwrap_or(0) as u8
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counts::CountTable;
    use crate::trees::{maximal_tree, structural_distance};
    use crate::weights::NodeWeightFunction;

    fn space(l: usize) -> TreeSpace {
        TreeSpace::new(2, l).unwrap()
    }

    #[test]
    fn scenario_a_shape() {
        let model = builtin_model("scenario-a").unwrap();
        assert_eq!(model.tree().leaf_count(), 7);
        assert_eq!(structural_distance(model.tree(), &maximal_tree(&space(3))), 1);
        let a = Alphabet::binary();
        let p = model.probabilities(&Context::parse("000", &a).unwrap()).unwrap();
        assert_eq!(p, [0.9, 0.1]);
    }

    #[test]
    fn scenario_b_is_zero_renewing() {
        let model = builtin_model("scenario-b").unwrap();
        let sp = space(4);
        let f = NodeWeightFunction::renewal_indicator(&sp, 0).unwrap();
        for leaf in model.tree().leaves() {
            assert!(!f.eval_node(leaf).unwrap().is_zero(), "{leaf}");
        }
        let a = Alphabet::binary();
        let p = model.probabilities(&Context::parse("0", &a).unwrap()).unwrap();
        assert_eq!(p, [0.1, 0.9]);
    }

    #[test]
    fn unknown_builtin() {
        assert!(matches!(builtin_model("scenario-c"), Err(SimError::UnknownModel(_))));
    }

    /// Empirical conditional frequencies at each leaf, from the count table.
    fn check_frequencies(model: &TransitionModel, depth: usize, seed: u64) {
        let sp = space(depth);
        let z = sample_sequence(model, 100_000, seed, &sp).unwrap();
        let table = CountTable::build(&z, &sp).unwrap();
        for leaf in model.tree().leaves() {
            let c = table.node_counts(leaf).unwrap();
            let total: u64 = c.iter().sum();
            assert!(total > 1000, "leaf {leaf} seen {total} times");
            let p = model.probabilities(leaf).unwrap();
            for k in 0..2 {
                let freq = c[k] as f64 / total as f64;
                assert!((freq - p[k]).abs() < 0.02, "seed {seed} leaf {leaf}: {freq} vs {}", p[k]);
            }
        }
    }

    #[test]
    fn empirical_frequencies_match() {
        for seed in [1, 2, 3] {
            check_frequencies(&builtin_model("scenario-a").unwrap(), 3, seed);
            check_frequencies(&builtin_model("scenario-b").unwrap(), 4, seed);
        }
    }

    #[test]
    fn symbol_one_after_three_zeros() {
        let sp = space(3);
        let z = sample_sequence(&builtin_model("scenario-a").unwrap(), 100_000, 7, &sp).unwrap();
        let codes = z.codes();
        let (mut ones, mut total) = (0u64, 0u64);
        for t in 3..codes.len() {
            if codes[t - 3..t] == [0, 0, 0] {
                total += 1;
                ones += codes[t] as u64;
            }
        }
        let freq = ones as f64 / total as f64;
        assert!((freq - 0.10).abs() < 0.01, "{freq}");
    }

    #[test]
    fn deterministic_given_seed() {
        let model = builtin_model("scenario-b").unwrap();
        let sp = space(10);
        let a = sample_sequence(&model, 5000, 42, &sp).unwrap();
        let b = sample_sequence(&model, 5000, 42, &sp).unwrap();
        let c = sample_sequence(&model, 5000, 43, &sp).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.codes()[..10].iter().all(|&x| x == 0));
    }

    #[test]
    fn point_mass_model() {
        let a = Alphabet::binary();
        let tree = ContextTree::root();
        let probs = BTreeMap::from([(Context::root(), vec![0.0, 1.0])]);
        let model = TransitionModel::new(a, tree, probs)
            .unwrap()
            .with_initial(InitialPolicy::UniformRandom);
        let z = sample_sequence(&model, 200, 9, &space(5)).unwrap();
        assert!(z.codes()[5..].iter().all(|&x| x == 1));
    }

    #[test]
    fn initial_policies() {
        let a = Alphabet::binary();
        let model = builtin_model("scenario-a").unwrap();
        let sp = space(3);
        let given = model
            .clone()
            .with_initial(InitialPolicy::parse("given:101", &a).unwrap());
        assert_eq!(&sample_sequence(&given, 10, 1, &sp).unwrap().codes()[..3], &[1, 0, 1]);
        let wrong = model.clone().with_initial(InitialPolicy::Given(vec![1]));
        assert!(matches!(sample_sequence(&wrong, 10, 1, &sp), Err(SimError::BadInitial(_))));
        let ones = model.with_initial(InitialPolicy::parse("repeat:1", &a).unwrap());
        assert_eq!(&sample_sequence(&ones, 10, 1, &sp).unwrap().codes()[..3], &[1, 1, 1]);
        assert!(InitialPolicy::parse("repeat:2", &a).is_err());
        assert!(InitialPolicy::parse("sometimes", &a).is_err());
        assert_eq!(InitialPolicy::parse("uniform", &a).unwrap(), InitialPolicy::UniformRandom);
        assert_eq!(InitialPolicy::Given(vec![0, 1]).render(&a), "given:01");
    }

    #[test]
    fn preconditions() {
        let model = builtin_model("scenario-b").unwrap();
        assert!(matches!(
            sample_sequence(&model, 100, 1, &space(3)),
            Err(SimError::DepthTooLarge { model: 4, depth: 3 })
        ));
        assert!(matches!(
            sample_sequence(&model, 4, 1, &space(4)),
            Err(SimError::TooShort { .. })
        ));
    }

    #[test]
    fn simplex_validation() {
        let a = Alphabet::binary();
        let tree = ContextTree::root();
        for bad in [vec![0.5, 0.6], vec![-0.1, 1.1], vec![1.0], vec![f64::NAN, 1.0]] {
            let probs = BTreeMap::from([(Context::root(), bad)]);
            assert!(matches!(
                TransitionModel::new(a.clone(), tree.clone(), probs),
                Err(SimError::BadVector { .. })
            ));
        }
        assert!(matches!(
            TransitionModel::new(a.clone(), tree.clone(), BTreeMap::new()),
            Err(SimError::MissingVector(_))
        ));
        let extra = BTreeMap::from([
            (Context::root(), vec![0.5, 0.5]),
            (Context::from_oldest_first(&[1]), vec![0.5, 0.5]),
        ]);
        assert!(matches!(
            TransitionModel::new(a, tree, extra),
            Err(SimError::UnknownLeaf(_))
        ));
    }

    #[test]
    fn model_file_round_trip() {
        let model = builtin_model("scenario-a").unwrap();
        let text = model.to_model_file(10);
        let (parsed, depth) = parse_model_str(&text).unwrap();
        assert_eq!(depth, 10);
        assert_eq!(parsed, model);

        let custom = "# three symbols\nalphabet=abc L=1\nλ : 0.2,0.3,0.5\n";
        let (m, depth) = parse_model_str(custom).unwrap();
        assert_eq!((m.alphabet().len(), depth), (3, 1));
        assert_eq!(m.tree(), &ContextTree::root());
    }

    #[test]
    fn model_file_errors() {
        for (text, line) in [
            ("", 1),
            ("alphabet=01\n", 1),
            ("alphabet=01 L=x\n", 1),
            ("alphabet=01 L=2\n0 0.5,0.5\n", 2),
            ("alphabet=01 L=2\n0 : 0.5,0.6\n", 2),
            ("alphabet=01 L=2\n0 : 0.5,0.5\n0 : 0.5,0.5\n", 3),
            ("alphabet=01 L=2\n2 : 0.5,0.5\n", 2),
        ] {
            match parse_model_str(text) {
                Err(SimError::Parse { line: got, .. }) => assert_eq!(got, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
        // Incomplete leaf set is rejected by tree validation.
        assert!(matches!(
            parse_model_str("alphabet=01 L=2\n0 : 0.5,0.5\n"),
            Err(SimError::Tree(_))
        ));
    }
}
