//! Backbone contract plus the self-contained reference encoder-decoder.
//!
//! Anything that can encode a source into a memory bank and score the next
//! token given a prefix implements [`Backbone`]. Training additionally needs
//! [`TrainableBackbone`]. [`ReferenceModel`] is the in-tree implementation;
//! a pretrained checkpoint can be wired in by implementing the same traits.

pub mod checkpoint;
pub mod graph;
pub mod optim;
pub mod params;
pub mod tensor;
mod transformer;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use optim::{apply_gradient, AdamW, AdamWConfig, Sgd, StepRule};
pub use params::{Gradients, NamedTensor, ParamStore};
pub use tensor::Matrix;
pub use checkpoint::Checkpoint;
pub use transformer::ReferenceModel;

pub const PAD_ID: u32 = 0;
/// Decoder start token.
pub const BOS_ID: u32 = 1;
pub const EOS_ID: u32 = 2;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("sequence of length {len} exceeds the {max}-position limit")]
    SequenceTooLong { len: usize, max: usize },
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("token id {id} outside vocabulary of size {vocab}")]
    TokenOutOfRange { id: u32, vocab: usize },
    #[error("empty {0} sequence")]
    EmptySequence(&'static str),
    #[error("target does not end with the end-of-sequence token")]
    MissingEndToken,
    #[error("invalid backbone config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Vocabulary ids for one sequence.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSequence(pub Vec<u32>);

impl TokenSequence {
    pub fn new(ids: Vec<u32>) -> Self {
        Self(ids)
    }

    pub fn ids(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Appends the end-of-sequence token.
    pub fn with_eos(mut self) -> Self {
        self.0.push(EOS_ID);
        self
    }
}

impl From<Vec<u32>> for TokenSequence {
    fn from(ids: Vec<u32>) -> Self {
        Self(ids)
    }
}

/// Encoder hidden states, one row per source position.
#[derive(Clone, Debug, PartialEq)]
pub struct MemoryBank {
    pub states: Matrix,
}

impl MemoryBank {
    pub fn rows(&self) -> usize {
        self.states.rows
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackboneConfig {
    pub vocab_size: usize,
    pub hidden_dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    pub max_positions: usize,
    pub init_seed: u64,
}

impl BackboneConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("vocab_size", self.vocab_size),
            ("hidden_dim", self.hidden_dim),
            ("layers", self.layers),
            ("heads", self.heads),
            ("ffn_dim", self.ffn_dim),
            ("max_positions", self.max_positions),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(ModelError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.hidden_dim % self.heads != 0 {
            return Err(ModelError::InvalidConfig(format!(
                "hidden_dim {} not divisible by heads {}",
                self.hidden_dim, self.heads
            )));
        }
        if self.vocab_size <= EOS_ID as usize {
            return Err(ModelError::InvalidConfig(
                "vocab_size must include the reserved start and end tokens".into(),
            ));
        }
        Ok(())
    }

    /// Tiny configuration used by gradient checks.
    pub fn tiny(vocab_size: usize, init_seed: u64) -> Self {
        Self {
            vocab_size,
            hidden_dim: 8,
            layers: 1,
            heads: 2,
            ffn_dim: 12,
            max_positions: 32,
            init_seed,
        }
    }
}

/// Inference contract shared by the reference model and external adapters.
pub trait Backbone: Send + Sync {
    fn vocab_size(&self) -> usize;

    fn max_positions(&self) -> usize;

    fn encode(&self, source: &TokenSequence) -> Result<MemoryBank, ModelError>;

    /// `Pr(· | prefix, memory)` for the position after `prefix`, which starts with [`BOS_ID`].
    fn next_token_distribution(
        &self,
        prefix: &TokenSequence,
        memory: &MemoryBank,
    ) -> Result<Vec<f64>, ModelError>;

    /// `Σ_j log Pr(tokens_j | BOS, tokens_<j, memory)` with no end-token requirement.
    fn prefix_log_prob(&self, memory: &MemoryBank, tokens: &[u32]) -> Result<f64, ModelError> {
        let mut prefix = vec![BOS_ID];
        let mut total = 0.0;
        for &t in tokens {
            let dist = self.next_token_distribution(&TokenSequence(prefix.clone()), memory)?;
            total += dist[t as usize].ln();
            prefix.push(t);
        }
        Ok(total)
    }

    /// `log Pr(target | source)`; `target` must end with [`EOS_ID`].
    fn sequence_log_prob(
        &self,
        source: &TokenSequence,
        target: &TokenSequence,
    ) -> Result<f64, ModelError> {
        if target.0.last() != Some(&EOS_ID) {
            return Err(ModelError::MissingEndToken);
        }
        let memory = self.encode(source)?;
        self.prefix_log_prob(&memory, &target.0)
    }
}

/// One term of a weighted likelihood objective.
#[derive(Clone, Copy, Debug)]
pub struct WeightedExample<'a> {
    pub source: &'a TokenSequence,
    pub target: &'a TokenSequence,
    pub weight: f64,
}

pub trait TrainableBackbone: Backbone + Clone {
    fn parameters(&self) -> &ParamStore;

    fn parameters_mut(&mut self) -> &mut ParamStore;

    /// Returns each example's summed target NLL and the gradient of
    /// `Σ weight_i · NLL_i` with respect to every parameter.
    fn weighted_nll_grad(
        &self,
        examples: &[WeightedExample<'_>],
    ) -> Result<(Vec<f64>, Gradients), ModelError>;

    fn apply_gradient(
        &mut self,
        grads: &Gradients,
        rule: &mut dyn StepRule,
        lr: f64,
    ) -> Result<(), ModelError> {
        apply_gradient(self.parameters_mut(), grads, rule, lr)
    }
}
