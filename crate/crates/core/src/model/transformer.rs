//! Pre-norm transformer encoder-decoder with learned absolute positions.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::graph::{Graph, NodeId};
use super::params::{Gradients, ParamStore};
use super::tensor::{softmax_into, Matrix};
use super::{
    Backbone, BackboneConfig, MemoryBank, ModelError, TokenSequence, TrainableBackbone,
    WeightedExample, BOS_ID, EOS_ID,
};

const LN_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug)]
struct Linear {
    w: usize,
    b: usize,
}

#[derive(Clone, Copy, Debug)]
struct Norm {
    g: usize,
    b: usize,
}

#[derive(Clone, Copy, Debug)]
struct Attention {
    q: Linear,
    k: Linear,
    v: Linear,
    o: Linear,
}

#[derive(Clone, Copy, Debug)]
struct FeedForward {
    up: Linear,
    down: Linear,
}

#[derive(Clone, Debug)]
struct EncoderLayer {
    attn_norm: Norm,
    attn: Attention,
    ffn_norm: Norm,
    ffn: FeedForward,
}

#[derive(Clone, Debug)]
struct DecoderLayer {
    self_norm: Norm,
    self_attn: Attention,
    cross_norm: Norm,
    cross_attn: Attention,
    ffn_norm: Norm,
    ffn: FeedForward,
}

#[derive(Clone, Debug)]
struct Layout {
    tok_emb: usize,
    enc_pos: usize,
    dec_pos: usize,
    encoder: Vec<EncoderLayer>,
    enc_norm: Norm,
    decoder: Vec<DecoderLayer>,
    dec_norm: Norm,
    lm_head: Linear,
}

/// Desk-scale encoder-decoder used for training, inference, and numerical checks.
#[derive(Clone, Debug)]
pub struct ReferenceModel {
    config: BackboneConfig,
    params: ParamStore,
    layout: Layout,
}

struct Init {
    rng: ChaCha8Rng,
}

impl Init {
    fn normal(&mut self, rows: usize, cols: usize, std: f64) -> Matrix {
        let dist = Normal::new(0.0, std).expect("finite std");
        Matrix::from_vec(
            rows,
            cols,
            (0..rows * cols).map(|_| dist.sample(&mut self.rng)).collect(),
        )
    }
}

fn linear(store: &mut ParamStore, init: &mut Init, name: &str, fan_in: usize, fan_out: usize, std: f64) -> Linear {
    Linear {
        w: store.push(format!("{name}.w"), init.normal(fan_in, fan_out, std)),
        b: store.push(format!("{name}.b"), Matrix::zeros(1, fan_out)),
    }
}

fn norm(store: &mut ParamStore, name: &str, dim: usize) -> Norm {
    Norm {
        g: store.push(format!("{name}.g"), Matrix::filled(1, dim, 1.0)),
        b: store.push(format!("{name}.b"), Matrix::zeros(1, dim)),
    }
}

fn attention(store: &mut ParamStore, init: &mut Init, name: &str, d: usize, out_std: f64) -> Attention {
    let std = 1.0 / (d as f64).sqrt();
    Attention {
        q: linear(store, init, &format!("{name}.q"), d, d, std),
        k: linear(store, init, &format!("{name}.k"), d, d, std),
        v: linear(store, init, &format!("{name}.v"), d, d, std),
        o: linear(store, init, &format!("{name}.o"), d, d, out_std),
    }
}

fn feed_forward(store: &mut ParamStore, init: &mut Init, name: &str, d: usize, f: usize, out_std: f64) -> FeedForward {
    FeedForward {
        up: linear(store, init, &format!("{name}.up"), d, f, 1.0 / (d as f64).sqrt()),
        down: linear(store, init, &format!("{name}.down"), f, d, out_std * (d as f64 / f as f64).sqrt()),
    }
}

impl ReferenceModel {
    /// Builds a model with scaled-normal weights drawn from `config.init_seed`.
    pub fn new(config: BackboneConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let d = config.hidden_dim;
        let mut init = Init {
            rng: ChaCha8Rng::seed_from_u64(config.init_seed),
        };
        let mut store = ParamStore::default();
        let emb_std = 1.0 / (d as f64).sqrt();
        let out_std = 1.0 / ((d * 2 * config.layers) as f64).sqrt();

        let tok_emb = store.push("tok_emb", init.normal(config.vocab_size, d, 1.0));
        let enc_pos = store.push("enc_pos", init.normal(config.max_positions, d, emb_std));
        let dec_pos = store.push("dec_pos", init.normal(config.max_positions, d, emb_std));

        let mut encoder = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let p = format!("enc.{l}");
            encoder.push(EncoderLayer {
                attn_norm: norm(&mut store, &format!("{p}.attn_norm"), d),
                attn: attention(&mut store, &mut init, &format!("{p}.attn"), d, out_std),
                ffn_norm: norm(&mut store, &format!("{p}.ffn_norm"), d),
                ffn: feed_forward(&mut store, &mut init, &format!("{p}.ffn"), d, config.ffn_dim, out_std),
            });
        }
        let enc_norm = norm(&mut store, "enc.norm", d);

        let mut decoder = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let p = format!("dec.{l}");
            decoder.push(DecoderLayer {
                self_norm: norm(&mut store, &format!("{p}.self_norm"), d),
                self_attn: attention(&mut store, &mut init, &format!("{p}.self_attn"), d, out_std),
                cross_norm: norm(&mut store, &format!("{p}.cross_norm"), d),
                cross_attn: attention(&mut store, &mut init, &format!("{p}.cross_attn"), d, out_std),
                ffn_norm: norm(&mut store, &format!("{p}.ffn_norm"), d),
                ffn: feed_forward(&mut store, &mut init, &format!("{p}.ffn"), d, config.ffn_dim, out_std),
            });
        }
        let dec_norm = norm(&mut store, "dec.norm", d);
        let lm_head = linear(&mut store, &mut init, "lm_head", d, config.vocab_size, emb_std);

        Ok(Self {
            config,
            params: store,
            layout: Layout {
                tok_emb,
                enc_pos,
                dec_pos,
                encoder,
                enc_norm,
                decoder,
                dec_norm,
                lm_head,
            },
        })
    }

    /// Rebuilds a model around previously saved tensors; names and shapes must match.
    pub fn from_parameters(config: BackboneConfig, params: ParamStore) -> Result<Self, ModelError> {
        let mut model = Self::new(config)?;
        if model.params.len() != params.len() {
            return Err(ModelError::ShapeMismatch {
                expected: model.params.len(),
                found: params.len(),
            });
        }
        for (expected, found) in model.params.named().iter().zip(params.named()) {
            if expected.name != found.name || expected.value.shape() != found.value.shape() {
                return Err(ModelError::Checkpoint(format!(
                    "tensor {} does not match {} {:?}",
                    found.name, expected.name, expected.value.shape()
                )));
            }
        }
        model.params = params;
        Ok(model)
    }

    pub fn config(&self) -> &BackboneConfig {
        &self.config
    }

    fn check_ids(&self, ids: &[u32], what: &'static str) -> Result<Vec<usize>, ModelError> {
        if ids.is_empty() {
            return Err(ModelError::EmptySequence(what));
        }
        if ids.len() > self.config.max_positions {
            return Err(ModelError::SequenceTooLong {
                len: ids.len(),
                max: self.config.max_positions,
            });
        }
        ids.iter()
            .map(|&id| {
                if (id as usize) < self.config.vocab_size {
                    Ok(id as usize)
                } else {
                    Err(ModelError::TokenOutOfRange {
                        id,
                        vocab: self.config.vocab_size,
                    })
                }
            })
            .collect()
    }

    fn linear(g: &mut Graph<'_>, x: NodeId, lin: Linear) -> NodeId {
        let w = g.param(lin.w);
        let b = g.param(lin.b);
        let h = g.matmul(x, w);
        g.add_row(h, b)
    }

    fn norm(g: &mut Graph<'_>, x: NodeId, n: Norm) -> NodeId {
        let gain = g.param(n.g);
        let bias = g.param(n.b);
        g.layer_norm(x, gain, bias, LN_EPS)
    }

    fn attention(&self, g: &mut Graph<'_>, query: NodeId, kv: NodeId, attn: Attention, causal: bool) -> NodeId {
        let q = Self::linear(g, query, attn.q);
        let k = Self::linear(g, kv, attn.k);
        let v = Self::linear(g, kv, attn.v);
        let heads = self.config.heads;
        let dh = self.config.hidden_dim / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut outs = Vec::with_capacity(heads);
        for h in 0..heads {
            let qh = g.slice_cols(q, h * dh, dh);
            let kh = g.slice_cols(k, h * dh, dh);
            let vh = g.slice_cols(v, h * dh, dh);
            let s = g.matmul_t(qh, kh);
            let mut s = g.scale(s, scale);
            if causal {
                s = g.causal_mask(s);
            }
            let p = g.softmax(s);
            outs.push(g.matmul(p, vh));
        }
        let cat = if outs.len() == 1 { outs[0] } else { g.concat_cols(&outs) };
        Self::linear(g, cat, attn.o)
    }

    fn feed_forward(g: &mut Graph<'_>, x: NodeId, ffn: FeedForward) -> NodeId {
        let h = Self::linear(g, x, ffn.up);
        let h = g.gelu(h);
        Self::linear(g, h, ffn.down)
    }

    fn embed(&self, g: &mut Graph<'_>, ids: &[usize], pos_table: usize) -> NodeId {
        let tok = g.param(self.layout.tok_emb);
        let pos = g.param(pos_table);
        let positions: Vec<usize> = (0..ids.len()).collect();
        let e = g.gather_rows(tok, ids);
        let p = g.gather_rows(pos, &positions);
        g.add(e, p)
    }

    fn encoder_graph(&self, g: &mut Graph<'_>, ids: &[usize]) -> NodeId {
        let mut x = self.embed(g, ids, self.layout.enc_pos);
        for layer in &self.layout.encoder {
            let h = Self::norm(g, x, layer.attn_norm);
            let a = self.attention(g, h, h, layer.attn, false);
            x = g.add(x, a);
            let h = Self::norm(g, x, layer.ffn_norm);
            let f = Self::feed_forward(g, h, layer.ffn);
            x = g.add(x, f);
        }
        Self::norm(g, x, self.layout.enc_norm)
    }

    fn decoder_graph(&self, g: &mut Graph<'_>, memory: NodeId, ids: &[usize]) -> NodeId {
        let mut y = self.embed(g, ids, self.layout.dec_pos);
        for layer in &self.layout.decoder {
            let h = Self::norm(g, y, layer.self_norm);
            let a = self.attention(g, h, h, layer.self_attn, true);
            y = g.add(y, a);
            let h = Self::norm(g, y, layer.cross_norm);
            let c = self.attention(g, h, memory, layer.cross_attn, false);
            y = g.add(y, c);
            let h = Self::norm(g, y, layer.ffn_norm);
            let f = Self::feed_forward(g, h, layer.ffn);
            y = g.add(y, f);
        }
        let out = Self::norm(g, y, self.layout.dec_norm);
        Self::linear(g, out, self.layout.lm_head)
    }

    /// Decoder logits for every prefix position, given a precomputed memory bank.
    pub fn decoder_logits(&self, memory: &MemoryBank, prefix: &TokenSequence) -> Result<Matrix, ModelError> {
        let ids = self.check_ids(prefix.ids(), "decoder")?;
        if memory.states.cols != self.config.hidden_dim || memory.rows() == 0 {
            return Err(ModelError::ShapeMismatch {
                expected: self.config.hidden_dim,
                found: memory.states.cols,
            });
        }
        let mut g = Graph::new(&self.params);
        let m = g.constant(memory.states.clone());
        let logits = self.decoder_graph(&mut g, m, &ids);
        Ok(g.value(logits).clone())
    }

    /// Row `j` is `Pr(· | prefix_≤j, memory)`: the teacher-forced distributions.
    pub fn teacher_forced_distributions(
        &self,
        memory: &MemoryBank,
        prefix: &TokenSequence,
    ) -> Result<Matrix, ModelError> {
        let logits = self.decoder_logits(memory, prefix)?;
        let mut out = Matrix::zeros(logits.rows, logits.cols);
        for r in 0..logits.rows {
            softmax_into(logits.row(r), out.row_mut(r));
        }
        Ok(out)
    }

    fn example_nll(&self, source: &TokenSequence, target: &TokenSequence, weight: f64) -> Result<(f64, Vec<Option<Matrix>>), ModelError> {
        let src = self.check_ids(source.ids(), "source")?;
        let tgt = self.check_ids(target.ids(), "target")?;
        let mut dec_in = Vec::with_capacity(tgt.len());
        dec_in.push(BOS_ID as usize);
        dec_in.extend_from_slice(&tgt[..tgt.len() - 1]);
        let mut g = Graph::new(&self.params);
        let memory = self.encoder_graph(&mut g, &src);
        let logits = self.decoder_graph(&mut g, memory, &dec_in);
        let nll = g.nll_sum(logits, &tgt);
        let value = g.value(nll).data[0];
        Ok((value, g.backward(nll, weight)))
    }
}

impl Backbone for ReferenceModel {
    fn vocab_size(&self) -> usize {
        self.config.vocab_size
    }

    fn max_positions(&self) -> usize {
        self.config.max_positions
    }

    fn encode(&self, source: &TokenSequence) -> Result<MemoryBank, ModelError> {
        let ids = self.check_ids(source.ids(), "source")?;
        let mut g = Graph::new(&self.params);
        let m = self.encoder_graph(&mut g, &ids);
        Ok(MemoryBank {
            states: g.value(m).clone(),
        })
    }

    fn next_token_distribution(&self, prefix: &TokenSequence, memory: &MemoryBank) -> Result<Vec<f64>, ModelError> {
        let logits = self.decoder_logits(memory, prefix)?;
        let mut out = vec![0.0; logits.cols];
        softmax_into(logits.row(logits.rows - 1), &mut out);
        Ok(out)
    }

    fn prefix_log_prob(&self, memory: &MemoryBank, tokens: &[u32]) -> Result<f64, ModelError> {
        if tokens.is_empty() {
            return Ok(0.0);
        }
        let mut dec_in = Vec::with_capacity(tokens.len());
        dec_in.push(BOS_ID);
        dec_in.extend_from_slice(&tokens[..tokens.len() - 1]);
        let logits = self.decoder_logits(memory, &TokenSequence(dec_in))?;
        let mut total = 0.0;
        for (r, &t) in tokens.iter().enumerate() {
            let row = logits.row(r);
            total += row[t as usize] - super::tensor::log_sum_exp(row);
        }
        Ok(total)
    }

    fn sequence_log_prob(&self, source: &TokenSequence, target: &TokenSequence) -> Result<f64, ModelError> {
        if target.0.last() != Some(&EOS_ID) {
            return Err(ModelError::MissingEndToken);
        }
        let memory = self.encode(source)?;
        self.prefix_log_prob(&memory, target.ids())
    }
}

impl TrainableBackbone for ReferenceModel {
    fn parameters(&self) -> &ParamStore {
        &self.params
    }

    fn parameters_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn weighted_nll_grad(&self, examples: &[WeightedExample<'_>]) -> Result<(Vec<f64>, Gradients), ModelError> {
        let parts: Vec<Result<(f64, Vec<Option<Matrix>>), ModelError>> = examples
            .par_iter()
            .map(|ex| self.example_nll(ex.source, ex.target, ex.weight))
            .collect();
        // Summed in input order so results do not depend on the thread count.
        let mut grads = self.params.zeros_like();
        let mut nlls = Vec::with_capacity(examples.len());
        for part in parts {
            let (nll, g) = part?;
            nlls.push(nll);
            grads.accumulate(g);
        }
        Ok((nlls, grads))
    }
}
