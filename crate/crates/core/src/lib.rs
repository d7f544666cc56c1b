//! Exact Bayesian inference for variable-length Markov chains under
//! context-tree priors.
//!
//! A prior over the trees of depth at most `L` is specified by a node
//! weight `f` (see [`weights`]); the prior of a tree is proportional to the
//! product of `f` over its leaves. Because the Dirichlet-marginalized
//! likelihood has the same product form, sums and maxima over the whole
//! (doubly exponential) tree space reduce to one bottom-up pass over the
//! maximal tree ([`engine`]). On top of that, [`inference`] provides Bayes
//! factors and sequential depth/model selection, and [`simulate`] draws
//! sequences from a given context tree.
//!
//! ```
//! use bct_core::{Alphabet, Analysis, NodeWeightFunction, Sequence, TreeSpace};
//!
//! let space = TreeSpace::new(2, 1).unwrap();
//! let z = Sequence::from_text("01011", Alphabet::binary()).unwrap();
//! let analysis = Analysis::new(&z, &space, 0.5).unwrap();
//! let fit = analysis.fit(&NodeWeightFunction::unity(&space)).unwrap();
//! assert!((fit.log_evidence().exp() - 0.04296875).abs() < 1e-12);
//! ```

pub mod counts;
pub mod engine;
pub mod inference;
pub mod simulate;
pub mod symbols;
pub mod trees;
pub mod weights;

use thiserror::Error;

pub use counts::{CountError, CountTable};
pub use engine::{Analysis, Fit, MapTree, PosteriorSummary, RecursionTable};
pub use inference::{BayesFactorReport, Interpretation, ModelSelection, SelectionTrace};
pub use simulate::{InitialPolicy, SimError, TransitionModel};
pub use symbols::{Alphabet, Sequence, SequenceFormat, SymbolError};
pub use trees::{Context, ContextTree, TreeError, TreeSpace};
pub use weights::{LogWeight, NodeWeightFunction, WeightError};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Symbol(#[from] SymbolError),

    #[error(transparent)]
    Tree(#[from] TreeError),

    #[error(transparent)]
    Count(#[from] CountError),

    #[error(transparent)]
    Weight(#[from] WeightError),

    #[error(transparent)]
    Simulation(#[from] SimError),

    #[error("Dirichlet hyper-parameter must be positive and finite, got {0}")]
    InvalidAlpha(f64),

    #[error("prior {0} is not normalizable: every tree has weight 0")]
    NonNormalizable(String),

    #[error("no tree has positive weight")]
    NoPositiveTree,

    #[error("tree {0} does not belong to the tree space")]
    TreeOutsideSpace(String),

    #[error("node term vector has {got} entries, tree space has {expected} nodes")]
    NodeTermLength { expected: usize, got: usize },

    #[error("candidate list is empty")]
    NoCandidates,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
