//! Bayes factors and sequential depth and model selection.

use std::fmt;

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::Analysis;
use crate::symbols::Sequence;
use crate::trees::TreeSpace;
use crate::weights::NodeWeightFunction;
use crate::{Error, Result};

/// Strength of evidence graded by `|log10 BF|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpretation {
    Negligible,
    Substantial,
    Strong,
    Decisive,
}

impl Interpretation {
    pub fn from_log10(log10_bf: f64) -> Self {
        match log10_bf.abs() {
            x if x >= 2.0 => Self::Decisive,
            x if x >= 1.0 => Self::Strong,
            x if x >= 0.5 => Self::Substantial,
            _ => Self::Negligible,
        }
    }
}

impl fmt::Display for Interpretation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Negligible => "negligible",
            Self::Substantial => "substantial",
            Self::Strong => "strong",
            Self::Decisive => "decisive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BayesFactorReport {
    pub log10_bf: f64,
    pub numerator_model: String,
    pub denominator_model: String,
    pub alpha: f64,
    pub interpretation: Interpretation,
}

/// What one step of a selection compared.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
pub enum Comparison {
    /// Depth search for candidate `candidate`: incumbent depth against `tested`.
    Depth {
        candidate: usize,
        incumbent: usize,
        tested: usize,
    },
    /// Candidate scan: incumbent candidate index against `tested`.
    Model { incumbent: usize, tested: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionStep {
    #[serde(flatten)]
    pub comparison: Comparison,
    /// `log10 BF(incumbent, tested)`.
    pub log10_bf: f64,
    /// Whether the tested model replaced the incumbent.
    pub switched: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SelectionTrace {
    pub steps: Vec<SelectionStep>,
}

impl SelectionTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Part-1 outcome for one candidate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateDepth {
    pub candidate: String,
    pub depth: usize,
    /// `log10 E(z; F·D_depth, α)`.
    pub log10_evidence: f64,
}

#[derive(Debug, Clone)]
pub struct ModelSelection {
    /// Index into the candidate list.
    pub best: usize,
    pub depth: usize,
    /// `F*·D_depth`.
    pub function: NodeWeightFunction,
    pub log10_evidence: f64,
    pub candidates: Vec<CandidateDepth>,
    pub trace: SelectionTrace,
}

impl Analysis {
    pub fn log10_evidence(&self, f: &NodeWeightFunction) -> Result<f64> {
        Ok(self.fit(f)?.log10_evidence())
    }

    pub fn bayes_factor(
        &self,
        numerator: &NodeWeightFunction,
        denominator: &NodeWeightFunction,
    ) -> Result<BayesFactorReport> {
        let log10_bf = self.log10_evidence(numerator)? - self.log10_evidence(denominator)?;
        Ok(BayesFactorReport {
            log10_bf,
            numerator_model: numerator.to_string(),
            denominator_model: denominator.to_string(),
            alpha: self.alpha(),
            interpretation: Interpretation::from_log10(log10_bf),
        })
    }

    /// `log10 E(z; F·D_k, α)` for `k = 0..=L`.
    pub fn depth_profile(&self, f: &NodeWeightFunction) -> Result<Vec<f64>> {
        let space = self.space();
        (0..=space.depth())
            .map(|k| {
                let restricted = f.product(&NodeWeightFunction::depth_indicator(space, k)?)?;
                self.log10_evidence(&restricted)
            })
            .collect()
    }

    /// Sequential depth search on `F·D_k`, appending its comparisons to `trace`.
    fn select_depth_into(
        &self,
        candidate: usize,
        f: &NodeWeightFunction,
        c: f64,
        trace: &mut SelectionTrace,
    ) -> Result<(usize, f64)> {
        let profile = self.depth_profile(f)?;
        let mut incumbent = self.space().depth();
        for tested in (0..incumbent).rev() {
            let log10_bf = profile[incumbent] - profile[tested];
            let switched = log10_bf < c;
            trace.steps.push(SelectionStep {
                comparison: Comparison::Depth {
                    candidate,
                    incumbent,
                    tested,
                },
                log10_bf,
                switched,
            });
            if switched {
                incumbent = tested;
            }
        }
        Ok((incumbent, profile[incumbent]))
    }

    /// Depth selection under the uniform prior restricted to each depth.
    pub fn select_depth(&self, c: f64) -> Result<(usize, SelectionTrace)> {
        let mut trace = SelectionTrace::default();
        let unity = NodeWeightFunction::unity(self.space());
        let (depth, _) = self.select_depth_into(0, &unity, c, &mut trace)?;
        Ok((depth, trace))
    }

    /// Per-candidate depth search with threshold `c1`, then a scan over the
    /// candidates in the given order with threshold `c2`.
    pub fn select_model(
        &self,
        candidates: &[NodeWeightFunction],
        c1: f64,
        c2: f64,
    ) -> Result<ModelSelection> {
        if candidates.is_empty() {
            return Err(Error::NoCandidates);
        }
        let part1: Vec<(usize, f64, SelectionTrace)> = candidates
            .par_iter()
            .enumerate()
            .map(|(i, f)| {
                let mut trace = SelectionTrace::default();
                let (depth, log10_e) = self.select_depth_into(i, f, c1, &mut trace)?;
                Ok((depth, log10_e, trace))
            })
            .collect::<Result<_>>()?;

        let mut trace = SelectionTrace::default();
        for (_, _, t) in &part1 {
            trace.steps.extend(t.steps.iter().cloned());
        }
        let mut best = 0;
        for tested in 1..candidates.len() {
            let log10_bf = part1[best].1 - part1[tested].1;
            let switched = log10_bf < c2;
            trace.steps.push(SelectionStep {
                comparison: Comparison::Model {
                    incumbent: best,
                    tested,
                },
                log10_bf,
                switched,
            });
            if switched {
                best = tested;
            }
        }

        let depth = part1[best].0;
        let function = candidates[best]
            .product(&NodeWeightFunction::depth_indicator(self.space(), depth)?)?;
        Ok(ModelSelection {
            best,
            depth,
            function,
            log10_evidence: part1[best].1,
            candidates: candidates
                .iter()
                .zip(&part1)
                .map(|(f, (depth, log10_evidence, _))| CandidateDepth {
                    candidate: f.to_string(),
                    depth: *depth,
                    log10_evidence: *log10_evidence,
                })
                .collect(),
            trace,
        })
    }
}

pub fn bayes_factor(
    z: &Sequence,
    numerator: &NodeWeightFunction,
    denominator: &NodeWeightFunction,
    alpha: f64,
) -> Result<BayesFactorReport> {
    if numerator.space() != denominator.space() {
        return Err(crate::WeightError::SpaceMismatch.into());
    }
    Analysis::new(z, numerator.space(), alpha)?.bayes_factor(numerator, denominator)
}

pub fn select_depth(
    z: &Sequence,
    space: &TreeSpace,
    alpha: f64,
    c: f64,
) -> Result<(usize, SelectionTrace)> {
    Analysis::new(z, space, alpha)?.select_depth(c)
}

pub fn select_model(
    z: &Sequence,
    space: &TreeSpace,
    alpha: f64,
    candidates: &[NodeWeightFunction],
    c1: f64,
    c2: f64,
) -> Result<ModelSelection> {
    Analysis::new(z, space, alpha)?.select_model(candidates, c1, c2)
}
