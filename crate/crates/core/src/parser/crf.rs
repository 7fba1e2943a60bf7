//! Linear-chain conditional random field over the five concept labels.
//!
//! Observation weights are indexed by (feature key, label) and transition
//! weights by (previous label, label). Training maximizes the L2-regularized
//! conditional log-likelihood with shuffled mini-batch gradient ascent.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::featurize;
use super::pos::tokenize_and_pos;
use super::{ConceptLabel, ParseError, TaggedCommand, NUM_LABELS};

pub const MODEL_VERSION: u32 = 1;

/// Feature ids for each token of one sequence.
type Observations = Vec<Vec<usize>>;

#[derive(Debug, Clone, PartialEq)]
pub struct CrfModel {
    feature_names: Vec<String>,
    feature_index: HashMap<String, usize>,
    /// `feature_names.len() * NUM_LABELS`, row-major by feature.
    state: Vec<f64>,
    /// `NUM_LABELS * NUM_LABELS`, row = previous label.
    transitions: Vec<f64>,
    l2_lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub l2_lambda: f64,
    pub seed: u64,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 50, l2_lambda: 0.01, seed: 0, batch_size: 5, learning_rate: 0.5 }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: CrfModel,
    /// Regularized negative log-likelihood before training and after each epoch.
    pub nll_trajectory: Vec<f64>,
    pub warnings: Vec<String>,
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

struct Lattice {
    emit: Vec<[f64; NUM_LABELS]>,
    alpha: Vec<[f64; NUM_LABELS]>,
    beta: Vec<[f64; NUM_LABELS]>,
    log_z: f64,
}

impl CrfModel {
    /// A zero-weight model whose feature vocabulary is taken from `corpus`.
    pub fn untrained(corpus: &[TaggedCommand], l2_lambda: f64) -> Self {
        let mut names = BTreeSet::new();
        for cmd in corpus {
            for f in command_features(&cmd.tokens) {
                names.extend(f);
            }
        }
        let feature_names: Vec<String> = names.into_iter().collect();
        let feature_index =
            feature_names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        Self {
            state: vec![0.0; feature_names.len() * NUM_LABELS],
            transitions: vec![0.0; NUM_LABELS * NUM_LABELS],
            feature_names,
            feature_index,
            l2_lambda,
        }
    }

    pub fn l2_lambda(&self) -> f64 {
        self.l2_lambda
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn num_parameters(&self) -> usize {
        self.state.len() + self.transitions.len()
    }

    /// All weights, observation block first then transitions.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = self.state.clone();
        p.extend_from_slice(&self.transitions);
        p
    }

    pub fn set_parameters(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.num_parameters(), "parameter vector length");
        let (s, t) = params.split_at(self.state.len());
        self.state.copy_from_slice(s);
        self.transitions.copy_from_slice(t);
    }

    pub fn transition(&self, prev: ConceptLabel, next: ConceptLabel) -> f64 {
        self.transitions[prev.index() * NUM_LABELS + next.index()]
    }

    pub fn state_weight(&self, feature: &str, label: ConceptLabel) -> Option<f64> {
        self.feature_index
            .get(feature)
            .map(|&f| self.state[f * NUM_LABELS + label.index()])
    }

    fn observe(&self, tokens: &[String]) -> Observations {
        command_features(tokens)
            .into_iter()
            .map(|keys| keys.iter().filter_map(|k| self.feature_index.get(k).copied()).collect())
            .collect()
    }

    fn emissions(&self, obs: &Observations) -> Vec<[f64; NUM_LABELS]> {
        obs.iter()
            .map(|feats| {
                let mut row = [0.0; NUM_LABELS];
                for &f in feats {
                    let w = &self.state[f * NUM_LABELS..(f + 1) * NUM_LABELS];
                    for (r, x) in row.iter_mut().zip(w) {
                        *r += x;
                    }
                }
                row
            })
            .collect()
    }

    /// Per-token label scores for an already tokenized command.
    pub fn emission_scores(&self, tokens: &[String]) -> Vec<[f64; NUM_LABELS]> {
        self.emissions(&self.observe(tokens))
    }

    /// Unnormalized log score of one label path.
    pub fn path_score(&self, tokens: &[String], labels: &[ConceptLabel]) -> f64 {
        let emit = self.emission_scores(tokens);
        self.score_with(&emit, labels)
    }

    fn score_with(&self, emit: &[[f64; NUM_LABELS]], labels: &[ConceptLabel]) -> f64 {
        let mut s = 0.0;
        for (t, y) in labels.iter().enumerate() {
            s += emit[t][y.index()];
            if t > 0 {
                s += self.transition(labels[t - 1], *y);
            }
        }
        s
    }

    fn lattice(&self, obs: &Observations) -> Lattice {
        let emit = self.emissions(obs);
        let n = emit.len();
        let mut alpha = vec![[0.0; NUM_LABELS]; n];
        let mut beta = vec![[0.0; NUM_LABELS]; n];
        alpha[0] = emit[0];
        let mut buf = [0.0; NUM_LABELS];
        for t in 1..n {
            for y in 0..NUM_LABELS {
                for (p, b) in buf.iter_mut().enumerate() {
                    *b = alpha[t - 1][p] + self.transitions[p * NUM_LABELS + y];
                }
                alpha[t][y] = log_sum_exp(&buf) + emit[t][y];
            }
        }
        for t in (0..n.saturating_sub(1)).rev() {
            for y in 0..NUM_LABELS {
                for (nx, b) in buf.iter_mut().enumerate() {
                    *b = self.transitions[y * NUM_LABELS + nx] + emit[t + 1][nx] + beta[t + 1][nx];
                }
                beta[t][y] = log_sum_exp(&buf);
            }
        }
        let log_z = log_sum_exp(&alpha[n - 1]);
        Lattice { emit, alpha, beta, log_z }
    }

    /// log p(labels | tokens).
    pub fn log_likelihood(&self, cmd: &TaggedCommand) -> f64 {
        let obs = self.observe(&cmd.tokens);
        let lat = self.lattice(&obs);
        self.score_with(&lat.emit, &cmd.labels) - lat.log_z
    }

    /// Σ log p(y|x) − λ/2 ‖w‖².
    pub fn objective(&self, corpus: &[TaggedCommand]) -> f64 {
        let ll: f64 = corpus.iter().map(|c| self.log_likelihood(c)).sum();
        ll - 0.5 * self.l2_lambda * self.squared_norm()
    }

    fn squared_norm(&self) -> f64 {
        self.state.iter().chain(&self.transitions).map(|w| w * w).sum()
    }

    /// Analytic gradient of [`CrfModel::objective`], laid out like [`CrfModel::parameters`].
    pub fn gradient(&self, corpus: &[TaggedCommand]) -> Vec<f64> {
        let prepared: Vec<(Observations, Vec<usize>)> = corpus
            .iter()
            .map(|c| (self.observe(&c.tokens), c.labels.iter().map(|l| l.index()).collect()))
            .collect();
        let mut grad = vec![0.0; self.num_parameters()];
        for (obs, gold) in &prepared {
            self.accumulate_gradient(obs, gold, &mut grad);
        }
        for (g, w) in grad.iter_mut().zip(self.state.iter().chain(&self.transitions)) {
            *g -= self.l2_lambda * w;
        }
        grad
    }

    fn accumulate_gradient(&self, obs: &Observations, gold: &[usize], grad: &mut [f64]) {
        let lat = self.lattice(obs);
        let n = obs.len();
        let offset = self.state.len();
        for t in 0..n {
            for &f in &obs[t] {
                grad[f * NUM_LABELS + gold[t]] += 1.0;
            }
            let marg: Vec<f64> = (0..NUM_LABELS)
                .map(|y| (lat.alpha[t][y] + lat.beta[t][y] - lat.log_z).exp())
                .collect();
            for &f in &obs[t] {
                for (y, m) in marg.iter().enumerate() {
                    grad[f * NUM_LABELS + y] -= m;
                }
            }
            if t > 0 {
                grad[offset + gold[t - 1] * NUM_LABELS + gold[t]] += 1.0;
                for a in 0..NUM_LABELS {
                    for b in 0..NUM_LABELS {
                        let p = (lat.alpha[t - 1][a]
                            + self.transitions[a * NUM_LABELS + b]
                            + lat.emit[t][b]
                            + lat.beta[t][b]
                            - lat.log_z)
                            .exp();
                        grad[offset + a * NUM_LABELS + b] -= p;
                    }
                }
            }
        }
    }

    /// Highest-scoring label path. Ties resolve to the lower label index.
    pub fn viterbi(&self, tokens: &[String]) -> Vec<ConceptLabel> {
        if tokens.is_empty() {
            return Vec::new();
        }
        let emit = self.emission_scores(tokens);
        let n = emit.len();
        let mut score = vec![[0.0; NUM_LABELS]; n];
        let mut back = vec![[0usize; NUM_LABELS]; n];
        score[0] = emit[0];
        for t in 1..n {
            for y in 0..NUM_LABELS {
                let mut best = f64::NEG_INFINITY;
                let mut arg = 0;
                for p in 0..NUM_LABELS {
                    let s = score[t - 1][p] + self.transitions[p * NUM_LABELS + y];
                    if s > best {
                        best = s;
                        arg = p;
                    }
                }
                score[t][y] = best + emit[t][y];
                back[t][y] = arg;
            }
        }
        let mut y = (0..NUM_LABELS)
            .fold(0, |best, k| if score[n - 1][k] > score[n - 1][best] { k } else { best });
        let mut path = vec![y; n];
        for t in (1..n).rev() {
            y = back[t][y];
            path[t - 1] = y;
        }
        path.into_iter().map(ConceptLabel::from_index).collect()
    }

    pub fn to_json(&self) -> String {
        let state_weights: BTreeMap<&str, [f64; NUM_LABELS]> = self
            .feature_names
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let mut row = [0.0; NUM_LABELS];
                row.copy_from_slice(&self.state[i * NUM_LABELS..(i + 1) * NUM_LABELS]);
                (n.as_str(), row)
            })
            .collect();
        let file = ModelFileRef {
            version: MODEL_VERSION,
            labels: ConceptLabel::ALL.iter().map(|l| l.as_str()).collect(),
            l2_lambda: self.l2_lambda,
            state_weights,
            transition_weights: self
                .transitions
                .chunks(NUM_LABELS)
                .map(|r| r.to_vec())
                .collect(),
        };
        serde_json::to_string(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ParseError> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| ParseError::Model(e.to_string()))?;
        if file.version != MODEL_VERSION {
            return Err(ParseError::Model(format!(
                "unsupported model version {} (expected {MODEL_VERSION})",
                file.version
            )));
        }
        let expected: Vec<&str> = ConceptLabel::ALL.iter().map(|l| l.as_str()).collect();
        if file.labels != expected {
            return Err(ParseError::Model("label set mismatch".into()));
        }
        if file.transition_weights.len() != NUM_LABELS
            || file.transition_weights.iter().any(|r| r.len() != NUM_LABELS)
        {
            return Err(ParseError::Model("transition table must be 5x5".into()));
        }
        let mut feature_names = Vec::with_capacity(file.state_weights.len());
        let mut state = Vec::with_capacity(file.state_weights.len() * NUM_LABELS);
        for (name, row) in file.state_weights {
            feature_names.push(name);
            state.extend_from_slice(&row);
        }
        let transitions: Vec<f64> = file.transition_weights.into_iter().flatten().collect();
        if state.iter().chain(&transitions).any(|w| !w.is_finite()) {
            return Err(ParseError::Model("weights must be finite".into()));
        }
        let feature_index =
            feature_names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        Ok(Self { feature_names, feature_index, state, transitions, l2_lambda: file.l2_lambda })
    }
}

#[derive(Serialize)]
struct ModelFileRef<'a> {
    version: u32,
    labels: Vec<&'a str>,
    l2_lambda: f64,
    state_weights: BTreeMap<&'a str, [f64; NUM_LABELS]>,
    transition_weights: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct ModelFile {
    version: u32,
    labels: Vec<String>,
    l2_lambda: f64,
    state_weights: BTreeMap<String, [f64; NUM_LABELS]>,
    transition_weights: Vec<Vec<f64>>,
}

fn command_features(tokens: &[String]) -> Vec<Vec<String>> {
    let with_pos: Vec<_> = tokens
        .iter()
        .map(|t| (t.clone(), super::pos::tag_token(t)))
        .collect();
    featurize(&with_pos).iter().map(|f| f.feature_keys()).collect()
}

pub fn train_tagger(
    corpus: &[TaggedCommand],
    epochs: usize,
    l2_lambda: f64,
    seed: u64,
) -> Result<CrfModel, ParseError> {
    let cfg = TrainConfig { epochs, l2_lambda, seed, ..TrainConfig::default() };
    Ok(train_with_report(corpus, &cfg)?.model)
}

pub fn train_with_report(corpus: &[TaggedCommand], cfg: &TrainConfig) -> Result<TrainReport, ParseError> {
    if corpus.is_empty() {
        return Err(ParseError::EmptyCorpus);
    }
    for (i, c) in corpus.iter().enumerate() {
        if c.tokens.is_empty() || c.tokens.len() != c.labels.len() {
            return Err(ParseError::Corpus { line: i + 1, message: "token/label count mismatch".into() });
        }
    }
    let mut warnings = Vec::new();
    let concept_tokens = corpus
        .iter()
        .flat_map(|c| &c.labels)
        .filter(|l| **l != ConceptLabel::Outside)
        .count();
    if concept_tokens == 0 {
        let w = "degenerate corpus: no concept-labelled tokens".to_string();
        log::warn!("{w}");
        warnings.push(w);
    }

    let mut model = CrfModel::untrained(corpus, cfg.l2_lambda);
    let prepared: Vec<(Observations, Vec<usize>)> = corpus
        .iter()
        .map(|c| (model.observe(&c.tokens), c.labels.iter().map(|l| l.index()).collect()))
        .collect();
    let n = prepared.len() as f64;
    let batch_size = cfg.batch_size.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut trajectory = vec![-model.objective(corpus)];
    let mut step = 0usize;

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(batch_size) {
            let mut grad = vec![0.0; model.num_parameters()];
            for &i in batch {
                model.accumulate_gradient(&prepared[i].0, &prepared[i].1, &mut grad);
            }
            // the batch carries its share of the regularizer
            let share = batch.len() as f64 / n;
            let lr = cfg.learning_rate / (1.0 + 0.01 * step as f64) / batch.len() as f64;
            let params = model.parameters();
            let updated: Vec<f64> = params
                .iter()
                .zip(&grad)
                .map(|(w, g)| w + lr * (g - share * model.l2_lambda * w))
                .collect();
            model.set_parameters(&updated);
            step += 1;
        }
        trajectory.push(-model.objective(corpus));
    }
    Ok(TrainReport { model, nll_trajectory: trajectory, warnings })
}

pub fn tag_command(model: &CrfModel, command: &str) -> Result<TaggedCommand, ParseError> {
    let tokens: Vec<String> = tokenize_and_pos(command)?.into_iter().map(|(t, _)| t).collect();
    let labels = model.viterbi(&tokens);
    Ok(TaggedCommand { tokens, labels })
}
