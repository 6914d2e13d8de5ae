//! Attention encoder-decoder policy over factored actions.

mod config;
mod encoders;

use std::path::Path;

use autodiff::nn::{bidirectional_encode, dropout, glorot_init, lstm_step, Attention, LstmParams, LstmState};
use autodiff::{Graph, ParamId, ParamSet, Tensor, Var};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use config::ModelConfig;
pub use encoders::{AlchemyEncoder, SceneEncoder, StateEncoding, TangramsEncoder};

use crate::env::{Action, Domain, Execution};
use crate::error::PolicyError;
use crate::vocab::{Vocabulary, DELIM1, DELIM2};

/// Picks the action index at a step from the step number and distribution.
pub type ChooseFn<'a> = dyn FnMut(usize, &[f64], &mut dyn RngCore) -> usize + 'a;

/// Value of the `format` key in saved model manifests.
pub const MANIFEST_FORMAT: &str = "sestra-policy";

#[derive(Clone, Debug)]
struct Ids {
    word: ParamId,
    /// One extra row at the end embeds `BEG`.
    action_type: ParamId,
    action_arg1: ParamId,
    action_arg2: ParamId,
    encoder_fwd: LstmParams,
    encoder_bwd: LstmParams,
    decoder: LstmParams,
    w_current: ParamId,
    w_previous: ParamId,
    w_initial: [ParamId; 2],
    w_state: [ParamId; 2],
    w_d: ParamId,
    b_d: ParamId,
    w_a: ParamId,
    out_type: ParamId,
    out_arg1: ParamId,
    out_arg2: ParamId,
}

/// The policy: domain, sizes, vocabulary, and every learned tensor.
#[derive(Clone, Debug)]
pub struct Policy<D: StateEncoding> {
    domain: D,
    config: ModelConfig,
    vocab: Vocabulary,
    params: ParamSet,
    ids: Ids,
    encoder: D::Encoder,
    factors: [Vec<usize>; 3],
}

/// Per-instruction decoding state held between steps.
#[derive(Clone, Debug)]
pub struct Episode<S> {
    training: bool,
    current_keys: Vec<Var>,
    previous_keys: Vec<Var>,
    initial_keys: Vec<Var>,
    state: S,
    state_keys: Vec<Var>,
    decoder: LstmState,
    prev: Option<Action>,
}

impl<S> Episode<S> {
    pub fn state(&self) -> &S {
        &self.state
    }

    pub fn state_keys(&self) -> &[Var] {
        &self.state_keys
    }

    pub fn has_previous(&self) -> bool {
        !self.previous_keys.is_empty()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AttentionVars {
    pub current: Var,
    pub previous: Option<Var>,
    pub initial: [Var; 2],
    pub state: [Var; 2],
}

/// Output of one decoder step.
#[derive(Clone, Copy, Debug)]
pub struct StepOutput {
    /// Distribution over the canonical action list.
    pub probs: Var,
    pub log_probs: Var,
    pub attention: AttentionVars,
}

/// Attention weights of one step, copied out of the graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepAttention {
    pub current: Vec<f64>,
    pub previous: Option<Vec<f64>>,
    pub initial: [Vec<f64>; 2],
    pub state: [Vec<f64>; 2],
}

impl StepAttention {
    pub fn from_graph(g: &Graph, vars: &AttentionVars) -> Self {
        let v = |x: Var| g.value(x).to_vec();
        Self {
            current: v(vars.current),
            previous: vars.previous.map(v),
            initial: [v(vars.initial[0]), v(vars.initial[1])],
            state: [v(vars.state[0]), v(vars.state[1])],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decoding {
    /// Argmax with lowest-index tie-break.
    Greedy,
    Sample,
}

/// One decoded step kept on the graph for gradient computation.
#[derive(Clone, Debug)]
pub struct TraceStep<S> {
    pub state: S,
    pub action: Action,
    pub index: usize,
    pub output: StepOutput,
}

#[derive(Clone, Debug)]
pub struct Trace<S> {
    pub steps: Vec<TraceStep<S>>,
    pub final_state: S,
    /// The horizon ran out before `STOP`.
    pub hit_horizon: bool,
}

impl<S: Clone + Eq> Trace<S> {
    pub fn execution<D: Domain<State = S>>(&self, domain: &D, start: &S) -> Execution<S> {
        let mut e = Execution::new(start.clone());
        for s in &self.steps {
            e.push(domain, s.action);
        }
        e
    }
}

/// A finished rollout without graph references.
#[derive(Clone, Debug)]
pub struct Rollout<S> {
    pub execution: Execution<S>,
    pub hit_horizon: bool,
    pub attention: Vec<StepAttention>,
    pub distributions: Vec<Vec<f64>>,
}

/// Index drawn from `probs` by inverse-CDF sampling.
pub fn sample_index(probs: &[f64], rng: &mut dyn RngCore) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Argmax with lowest-index tie-break.
pub fn greedy_index(probs: &[f64]) -> usize {
    let mut best = 0;
    for (i, p) in probs.iter().enumerate() {
        if *p > probs[best] {
            best = i;
        }
    }
    best
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    format: String,
    domain: String,
    model: ModelConfig,
    vocabulary: Vocabulary,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    run: Option<serde_json::Value>,
}

impl<D: StateEncoding> Policy<D> {
    pub fn new(domain: D, config: ModelConfig, vocab: Vocabulary, rng: &mut dyn RngCore) -> Result<Self, PolicyError> {
        config.validate(domain.kind()).map_err(PolicyError::Config)?;
        let space = domain.action_space().clone();
        let mut params = ParamSet::new();
        let he2 = 2 * config.encoder_hidden;
        let hd = config.decoder_hidden;
        let kd = domain.key_dim(&config);
        let query = hd + he2;
        let input = he2 + he2 + 4 * kd + config.action_dim();
        let word = params.add("word", glorot_init(vocab.len(), config.word_dim, rng)?)?;
        let action_type = params.add("action.type", glorot_init(space.num_types() + 1, config.action_part_dim, rng)?)?;
        let action_arg1 = params.add("action.arg1", glorot_init(space.num_arg1(), config.action_part_dim, rng)?)?;
        let action_arg2 = params.add("action.arg2", glorot_init(space.num_arg2(), config.action_part_dim, rng)?)?;
        let encoder_fwd = LstmParams::register(&mut params, "encoder.forward", config.word_dim, config.encoder_hidden, rng)?;
        let encoder_bwd = LstmParams::register(&mut params, "encoder.backward", config.word_dim, config.encoder_hidden, rng)?;
        let decoder = LstmParams::register(&mut params, "decoder", input, hd, rng)?;
        let w_current = params.add("attend.current", glorot_init(he2, hd, rng)?)?;
        let w_previous = params.add("attend.previous", glorot_init(he2, query, rng)?)?;
        let w_initial = [
            params.add("attend.initial.1", glorot_init(kd, query, rng)?)?,
            params.add("attend.initial.2", glorot_init(kd, query, rng)?)?,
        ];
        let w_state = [
            params.add("attend.state.1", glorot_init(kd, query, rng)?)?,
            params.add("attend.state.2", glorot_init(kd, query, rng)?)?,
        ];
        let w_d = params.add("decoder.input", glorot_init(input, input, rng)?)?;
        let b_d = params.add("decoder.input_bias", Tensor::zeros(vec![input]))?;
        let w_a = params.add("output.projection", glorot_init(hd, hd, rng)?)?;
        let out_type = params.add("output.type", glorot_init(space.num_types(), hd, rng)?)?;
        let out_arg1 = params.add("output.arg1", glorot_init(space.num_arg1(), hd, rng)?)?;
        let out_arg2 = params.add("output.arg2", glorot_init(space.num_arg2(), hd, rng)?)?;
        let encoder = domain.register_encoder(&mut params, &config, rng)?;
        let mut factors = [Vec::new(), Vec::new(), Vec::new()];
        for a in space.actions() {
            let (t, x, y) = a.factors();
            factors[0].push(t);
            factors[1].push(x);
            factors[2].push(y);
        }
        Ok(Self {
            domain,
            config,
            vocab,
            params,
            ids: Ids {
                word,
                action_type,
                action_arg1,
                action_arg2,
                encoder_fwd,
                encoder_bwd,
                decoder,
                w_current,
                w_previous,
                w_initial,
                w_state,
                w_d,
                b_d,
                w_a,
                out_type,
                out_arg1,
                out_arg2,
            },
            encoder,
            factors,
        })
    }

    pub fn domain(&self) -> &D {
        &self.domain
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn num_actions(&self) -> usize {
        self.factors[0].len()
    }

    /// Token sequence fed to the encoder and the index where the current
    /// instruction starts.
    pub fn joined_tokens(history: &[Vec<String>], current: &[String]) -> (Vec<String>, usize) {
        let mut out = Vec::new();
        for (i, h) in history.iter().enumerate() {
            if i > 0 {
                out.push(DELIM1.to_string());
            }
            out.extend(h.iter().cloned());
        }
        if !history.is_empty() {
            out.push(DELIM2.to_string());
        }
        let start = out.len();
        out.extend(current.iter().cloned());
        (out, start)
    }

    /// `(X^c, X^p)`: encoder outputs for the current instruction and for
    /// everything before it, delimiters included.
    pub fn encode_instructions(
        &self,
        g: &mut Graph,
        history: &[Vec<String>],
        current: &[String],
    ) -> Result<(Vec<Var>, Vec<Var>), PolicyError> {
        if current.is_empty() {
            return Err(PolicyError::EmptyInstruction);
        }
        let (tokens, start) = Self::joined_tokens(history, current);
        let embedded: Vec<Var> = tokens.iter().map(|t| g.row(self.ids.word, self.vocab.id(t))).collect();
        let mut all = bidirectional_encode(g, &self.ids.encoder_fwd, &self.ids.encoder_bwd, &embedded)?;
        let current = all.split_off(start);
        Ok((current, all))
    }

    pub fn encode_state(&self, g: &mut Graph, state: &D::State) -> Result<Vec<Var>, PolicyError> {
        self.domain.encode_state(g, &self.encoder, state)
    }

    fn key_dropout(&self, g: &mut Graph, keys: Vec<Var>, training: bool, rng: &mut dyn RngCore) -> Result<Vec<Var>, PolicyError> {
        keys.into_iter()
            .map(|k| Ok(dropout(g, k, self.config.dropout, training, rng)?))
            .collect()
    }

    /// Encodes the inputs and runs the decoder's zero-input warm-up step.
    pub fn begin(
        &self,
        g: &mut Graph,
        instruction: &[String],
        history: &[Vec<String>],
        start: &D::State,
        training: bool,
        rng: &mut dyn RngCore,
    ) -> Result<Episode<D::State>, PolicyError> {
        let (current_keys, previous) = self.encode_instructions(g, history, instruction)?;
        let previous_keys = self.key_dropout(g, previous, training, rng)?;
        let initial = self.encode_state(g, start)?;
        let initial_keys = self.key_dropout(g, initial.clone(), training, rng)?;
        let state_keys = self.key_dropout(g, initial, training, rng)?;
        let hd = self.config.decoder_hidden;
        let zero_input = g.zeros(self.ids.decoder.input);
        let zero_state = LstmState::zeros(g, hd);
        let decoder = lstm_step(g, &self.ids.decoder, zero_input, zero_state)?;
        Ok(Episode {
            training,
            current_keys,
            previous_keys,
            initial_keys,
            state: start.clone(),
            state_keys,
            decoder,
            prev: None,
        })
    }

    fn attention(
        &self,
        g: &mut Graph,
        keys: &[Var],
        query: Var,
        w: ParamId,
        training: bool,
        rng: &mut dyn RngCore,
    ) -> Result<Attention, PolicyError> {
        autodiff::nn::check_attention_shapes(g, keys, query, w)?;
        let projected = g.matvec(w, query);
        let projected = dropout(g, projected, self.config.dropout, training, rng)?;
        Ok(autodiff::nn::attend_projected(g, keys, projected)?)
    }

    fn embed_action(&self, g: &mut Graph, action: Option<Action>) -> Var {
        match action {
            None => {
                let beg = self.domain.action_space().num_types();
                let t = g.row(self.ids.action_type, beg);
                let x = g.row(self.ids.action_arg1, 0);
                let y = g.row(self.ids.action_arg2, 0);
                g.concat(&[t, x, y])
            }
            Some(a) => {
                let (ti, xi, yi) = a.factors();
                let t = g.row(self.ids.action_type, ti);
                let x = g.row(self.ids.action_arg1, xi);
                let y = g.row(self.ids.action_arg2, yi);
                g.concat(&[t, x, y])
            }
        }
    }

    /// Distribution over the next action given the episode so far.
    pub fn decode_step(&self, g: &mut Graph, ep: &mut Episode<D::State>, rng: &mut dyn RngCore) -> Result<StepOutput, PolicyError> {
        let training = ep.training;
        let h_prev = ep.decoder.h;
        let zc = self.attention(g, &ep.current_keys, h_prev, self.ids.w_current, training, rng)?;
        let query = g.concat(&[h_prev, zc.context]);
        let (zp, previous) = if ep.previous_keys.is_empty() {
            (g.zeros(2 * self.config.encoder_hidden), None)
        } else {
            let a = self.attention(g, &ep.previous_keys, query, self.ids.w_previous, training, rng)?;
            (a.context, Some(a.weights))
        };
        let mut heads = Vec::with_capacity(4);
        for w in self.ids.w_initial {
            heads.push(self.attention(g, &ep.initial_keys, query, w, training, rng)?);
        }
        for w in self.ids.w_state {
            heads.push(self.attention(g, &ep.state_keys, query, w, training, rng)?);
        }
        let prev = self.embed_action(g, ep.prev);
        let mut parts = vec![zc.context, zp];
        parts.extend(heads.iter().map(|h| h.context));
        parts.push(prev);
        let input = g.concat(&parts);
        let projected = g.matvec(self.ids.w_d, input);
        let bias = g.param(self.ids.b_d);
        let pre = g.add(projected, bias);
        let h_k = g.tanh(pre);
        let h_k = dropout(g, h_k, self.config.dropout, training, rng)?;
        ep.decoder = lstm_step(g, &self.ids.decoder, h_k, ep.decoder)?;
        let ha = g.matvec(self.ids.w_a, ep.decoder.h);
        let ha = g.tanh(ha);
        let s_type = g.matvec(self.ids.out_type, ha);
        let s_arg1 = g.matvec(self.ids.out_arg1, ha);
        let s_arg2 = g.matvec(self.ids.out_arg2, ha);
        let t = g.gather(s_type, self.factors[0].clone());
        let x = g.gather(s_arg1, self.factors[1].clone());
        let y = g.gather(s_arg2, self.factors[2].clone());
        let scores = g.add(t, x);
        let scores = g.add(scores, y);
        let probs = g.softmax(scores);
        let log_probs = g.log_softmax(scores);
        Ok(StepOutput {
            probs,
            log_probs,
            attention: AttentionVars {
                current: zc.weights,
                previous,
                initial: [heads[0].weights, heads[1].weights],
                state: [heads[2].weights, heads[3].weights],
            },
        })
    }

    /// Executes `action`, re-encoding the current state only if it changed.
    pub fn advance(&self, g: &mut Graph, ep: &mut Episode<D::State>, action: Action, rng: &mut dyn RngCore) -> Result<(), PolicyError> {
        let next = self.domain.transition(&ep.state, action);
        if next != ep.state {
            let keys = self.encode_state(g, &next)?;
            ep.state_keys = self.key_dropout(g, keys, ep.training, rng)?;
            ep.state = next;
        }
        ep.prev = Some(action);
        Ok(())
    }

    /// Decodes up to `horizon` actions, letting `choose` pick each action
    /// index from the step distribution.
    #[allow(clippy::too_many_arguments)]
    pub fn trace(
        &self,
        g: &mut Graph,
        instruction: &[String],
        history: &[Vec<String>],
        start: &D::State,
        horizon: usize,
        training: bool,
        rng: &mut dyn RngCore,
        choose: &mut ChooseFn,
    ) -> Result<Trace<D::State>, PolicyError> {
        let mut ep = self.begin(g, instruction, history, start, training, rng)?;
        let mut steps = Vec::new();
        let mut stopped = false;
        while !stopped && steps.len() < horizon {
            let output = self.decode_step(g, &mut ep, rng)?;
            let index = choose(steps.len(), g.value(output.probs), rng);
            let action = self.domain.action_space().get(index);
            let state = ep.state.clone();
            self.advance(g, &mut ep, action, rng)?;
            stopped = action.is_stop();
            steps.push(TraceStep {
                state,
                action,
                index,
                output,
            });
        }
        Ok(Trace {
            steps,
            final_state: ep.state,
            hit_horizon: !stopped,
        })
    }

    /// Evaluation-mode rollout.
    pub fn rollout(
        &self,
        instruction: &[String],
        history: &[Vec<String>],
        start: &D::State,
        horizon: usize,
        decoding: Decoding,
        rng: &mut dyn RngCore,
    ) -> Result<Rollout<D::State>, PolicyError> {
        let mut g = Graph::new(&self.params);
        let mut choose = |_: usize, p: &[f64], r: &mut dyn RngCore| match decoding {
            Decoding::Greedy => greedy_index(p),
            Decoding::Sample => sample_index(p, r),
        };
        let trace = self.trace(&mut g, instruction, history, start, horizon, false, rng, &mut choose)?;
        Ok(Rollout {
            execution: trace.execution(&self.domain, start),
            hit_horizon: trace.hit_horizon,
            attention: trace
                .steps
                .iter()
                .map(|s| StepAttention::from_graph(&g, &s.output.attention))
                .collect(),
            distributions: trace.steps.iter().map(|s| g.value(s.output.probs).to_vec()).collect(),
        })
    }

    /// Greedy rollout without any randomness.
    pub fn greedy(
        &self,
        instruction: &[String],
        history: &[Vec<String>],
        start: &D::State,
        horizon: usize,
    ) -> Result<Rollout<D::State>, PolicyError> {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        self.rollout(instruction, history, start, horizon, Decoding::Greedy, &mut rng)
    }

    fn manifest(&self, run: Option<&serde_json::Value>) -> serde_json::Value {
        serde_json::to_value(Manifest {
            format: MANIFEST_FORMAT.into(),
            domain: self.domain.fingerprint(),
            model: self.config.clone(),
            vocabulary: self.vocab.clone(),
            run: run.cloned(),
        })
        .expect("manifest serializes")
    }

    pub fn to_bytes(&self, run: Option<&serde_json::Value>) -> Result<Vec<u8>, PolicyError> {
        let mut out = Vec::new();
        autodiff::write_params(&mut out, &self.params, &self.manifest(run))?;
        Ok(out)
    }

    pub fn save(&self, path: impl AsRef<Path>, run: Option<&serde_json::Value>) -> Result<(), PolicyError> {
        Ok(autodiff::save_params(path, &self.params, &self.manifest(run))?)
    }

    pub fn from_saved(domain: D, params: ParamSet, manifest: &serde_json::Value) -> Result<Self, PolicyError> {
        let m: Manifest = serde_json::from_value(manifest.clone()).map_err(|e| PolicyError::Manifest(e.to_string()))?;
        if m.format != MANIFEST_FORMAT {
            return Err(PolicyError::Manifest(format!("unexpected format {:?}", m.format)));
        }
        if m.domain != domain.fingerprint() {
            return Err(PolicyError::DomainMismatch {
                expected: m.domain,
                actual: domain.fingerprint(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut policy = Self::new(domain, m.model, m.vocabulary, &mut rng)?;
        policy.params.copy_from(&params)?;
        Ok(policy)
    }

    pub fn load(domain: D, path: impl AsRef<Path>) -> Result<Self, PolicyError> {
        let (params, manifest) = autodiff::load_params(path)?;
        Self::from_saved(domain, params, &manifest)
    }
}

/// Domain fingerprint and run record stored in a saved model.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<(String, Option<serde_json::Value>), PolicyError> {
    let (_, manifest) = autodiff::load_params(path)?;
    let m: Manifest = serde_json::from_value(manifest).map_err(|e| PolicyError::Manifest(e.to_string()))?;
    Ok((m.domain, m.run))
}
