//! Simulated-user experiments comparing the naive and the belief-scored KB.
//!
//! Each simulated slide is one object query. A user picks a gold
//! sub-concept, says a word for it and claims the gold sub-concept when asked.
//! Collaborative users draw the word from the gold sub-concept's neighbor
//! list; non-collaborative users draw it from another sub-concept's list, so
//! their clarifications teach wrong links. Both KB variants see identical
//! user streams.

mod lexicon;
mod stats;

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lexicon::{NeighborLexicon, PdfShape, VocabularyPdf, MAX_VOCAB};
pub use stats::{one_sided_paired_t, rolling_mean_trailing, time_to_fraction_of_plateau, TTest};

use crate::kb::{KbError, KnowledgeBase, Learned, Ontology, Variant, OBJECT};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("lexicon error: {0}")]
    Lexicon(String),
    #[error("dimension error: {predicted} predictions vs {gold} gold labels")]
    Dimension { predicted: usize, gold: usize },
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    Kb(#[from] KbError),
}

/// One simulated user: a word stream fully determined by the seed.
#[derive(Debug, Clone)]
pub struct SimulatedUser {
    pub collaborative: bool,
    pub pdf: VocabularyPdf,
    rng: ChaCha8Rng,
}

impl SimulatedUser {
    pub fn new(collaborative: bool, shape: PdfShape, vocab_size: usize, rng_seed: u64) -> Result<Self, SimError> {
        Ok(Self { collaborative, pdf: VocabularyPdf::new(shape, vocab_size)?, rng: ChaCha8Rng::seed_from_u64(rng_seed) })
    }

    pub fn sample_word(&mut self, gold: &str, lexicon: &NeighborLexicon) -> Result<(String, String), SimError> {
        sample_word(&mut self.rng, self.collaborative, &self.pdf, gold, lexicon)
    }
}

/// Returns `(word, claimed sub-concept)`; the claim is always the gold sub-concept.
pub fn sample_word<R: Rng + ?Sized>(
    rng: &mut R,
    collaborative: bool,
    pdf: &VocabularyPdf,
    gold: &str,
    lexicon: &NeighborLexicon,
) -> Result<(String, String), SimError> {
    let source = if collaborative {
        gold.to_string()
    } else {
        let others: Vec<&str> = lexicon.sub_concepts().filter(|s| *s != gold).collect();
        others
            .choose(rng)
            .ok_or_else(|| SimError::Config("non-collaborative users need at least two sub-concepts".into()))?
            .to_string()
    };
    let words = lexicon
        .words(&source)
        .ok_or_else(|| SimError::Lexicon(format!("no neighbor list for '{source}'")))?;
    if words.len() < pdf.len() {
        return Err(SimError::Lexicon(format!("'{source}' has {} words, pdf needs {}", words.len(), pdf.len())));
    }
    Ok((words[pdf.sample_rank(rng)].clone(), gold.to_string()))
}

/// Number of positions where prediction and gold agree. `None` never matches.
pub fn matching_score(predicted: &[Option<String>], gold: &[String]) -> Result<usize, SimError> {
    if predicted.len() != gold.len() {
        return Err(SimError::Dimension { predicted: predicted.len(), gold: gold.len() });
    }
    Ok(predicted.iter().zip(gold).filter(|(p, g)| p.as_deref() == Some(g.as_str())).count())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Learning,
    Evaluation,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Learning => "learning",
            Phase::Evaluation => "evaluation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub gold: String,
    pub word: String,
    pub claimed: String,
    pub collaborative: bool,
}

/// A user stream where each slide's user is collaborative with probability `alpha`.
pub fn user_stream(
    lexicon: &NeighborLexicon,
    pdf: &VocabularyPdf,
    alpha: f64,
    slides: usize,
    seed: u64,
) -> Result<Vec<Query>, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let subs: Vec<String> = lexicon.sub_concepts().map(str::to_string).collect();
    (0..slides)
        .map(|_| {
            let gold = subs.choose(&mut rng).expect("non-empty lexicon").clone();
            let collaborative = rng.gen_bool(alpha.clamp(0.0, 1.0));
            let (word, claimed) = sample_word(&mut rng, collaborative, pdf, &gold, lexicon)?;
            Ok(Query { gold, word, claimed, collaborative })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlideRecord {
    pub word: String,
    pub gold: String,
    pub predicted: Option<String>,
    pub clarified: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub slides: Vec<SlideRecord>,
    pub episode_scores: Vec<usize>,
}

/// A KB over the lexicon's sub-concepts with no vocabulary yet.
pub fn empty_kb(variant: Variant, lexicon: &NeighborLexicon) -> Result<KnowledgeBase, SimError> {
    let subs: Vec<&str> = lexicon.sub_concepts().collect();
    Ok(KnowledgeBase::new(variant, Ontology::from_pairs(&[(OBJECT, &subs)])?))
}

/// Plays a stream against a KB. In the learning phase a NOT_FOUND or a
/// prediction different from the claim triggers a clarification that teaches
/// the claim; a matching prediction is confirmed, which the belief KB records
/// as one more observation. The evaluation phase only infers.
pub fn run_phase(kb: &mut KnowledgeBase, stream: &[Query], phase: Phase, episode_size: usize) -> Result<EpisodeLog, SimError> {
    if episode_size == 0 {
        return Err(SimError::Config("episode_size must be positive".into()));
    }
    let mut log = EpisodeLog::default();
    let mut hits = 0;
    for (i, q) in stream.iter().enumerate() {
        let predicted = kb.infer(OBJECT, &q.word)?.map(str::to_string);
        let mut clarified = false;
        if phase == Phase::Learning {
            let matches = predicted.as_deref() == Some(q.claimed.as_str());
            if !matches {
                clarified = true;
            }
            if !matches || kb.variant() == Variant::Rkb {
                let _: Learned = kb.learn(OBJECT, &q.word, &q.claimed)?;
            }
        }
        if predicted.as_deref() == Some(q.gold.as_str()) {
            hits += 1;
        }
        log.slides.push(SlideRecord { word: q.word.clone(), gold: q.gold.clone(), predicted, clarified });
        if (i + 1) % episode_size == 0 {
            log.episode_scores.push(hits);
            hits = 0;
        }
    }
    Ok(log)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub alphas: Vec<f64>,
    pub vocab_sizes: Vec<usize>,
    pub pdfs: Vec<PdfShape>,
    /// Repetitions E with fresh KBs.
    pub repetitions: usize,
    /// Slides S in the learning phase.
    pub slides: usize,
    /// Slides in the evaluation phase; defaults to `slides`.
    #[serde(default)]
    pub eval_slides: Option<usize>,
    pub episode_size: usize,
    pub smoothing_window: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            alphas: vec![0.4, 0.6, 0.8, 1.0],
            vocab_sizes: vec![5, 50, 200, 1000],
            pdfs: PdfShape::ALL.to_vec(),
            repetitions: 10,
            slides: 3000,
            eval_slides: None,
            episode_size: 10,
            smoothing_window: 20,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.alphas.is_empty() || self.vocab_sizes.is_empty() || self.pdfs.is_empty() {
            return bad("alphas, vocab_sizes and pdfs must be non-empty".into());
        }
        if let Some(a) = self.alphas.iter().find(|a| !(0.4..=1.0).contains(*a)) {
            return bad(format!("alpha {a} outside [0.4, 1]"));
        }
        if let Some(n) = self.vocab_sizes.iter().find(|n| **n == 0 || **n > MAX_VOCAB) {
            return bad(format!("vocabulary size {n} outside [1, {MAX_VOCAB}]"));
        }
        if self.repetitions == 0 || self.slides == 0 || self.eval_slides == Some(0) {
            return bad("repetitions and slide counts must be at least 1".into());
        }
        if self.episode_size == 0 || self.smoothing_window == 0 {
            return bad("episode_size and smoothing_window must be positive".into());
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn eval_slides(&self) -> usize {
        self.eval_slides.unwrap_or(self.slides)
    }
}

/// splitmix64 finalizer, used to derive independent per-run seeds.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeds depend on the cell's alpha, N and repetition but not on the pdf,
/// so pdf shapes are compared on the same random draws.
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix(base), |acc, p| mix(acc ^ p))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub learning: [Vec<usize>; 2],
    pub evaluation: [Vec<usize>; 2],
}

impl RunResult {
    pub fn eval_mean(&self, kb: usize) -> f64 {
        let v = &self.evaluation[kb];
        v.iter().sum::<usize>() as f64 / v.len().max(1) as f64
    }
}

pub const VARIANTS: [Variant; 2] = [Variant::Nkb, Variant::Rkb];

/// One repetition: a learning stream with user mix `alpha`, then a collaborative evaluation stream.
pub fn run_once(
    lexicon: &NeighborLexicon,
    pdf: &VocabularyPdf,
    alpha: f64,
    slides: usize,
    eval_slides: usize,
    episode_size: usize,
    seed: u64,
) -> Result<RunResult, SimError> {
    let learn_stream = user_stream(lexicon, pdf, alpha, slides, seed)?;
    let eval_stream = user_stream(lexicon, pdf, 1.0, eval_slides, mix(seed ^ 0xE7A1))?;
    let mut learning: [Vec<usize>; 2] = Default::default();
    let mut evaluation: [Vec<usize>; 2] = Default::default();
    for (k, variant) in VARIANTS.into_iter().enumerate() {
        let mut kb = empty_kb(variant, lexicon)?;
        learning[k] = run_phase(&mut kb, &learn_stream, Phase::Learning, episode_size)?.episode_scores;
        evaluation[k] = run_phase(&mut kb, &eval_stream, Phase::Evaluation, episode_size)?.episode_scores;
    }
    Ok(RunResult { learning, evaluation })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub alpha: f64,
    pub vocab_size: usize,
    pub pdf: PdfShape,
    pub runs: Vec<RunResult>,
    /// Per-episode mean over runs, `[nkb, rkb]`.
    pub learning_curves: [Vec<f64>; 2],
    pub evaluation_curves: [Vec<f64>; 2],
    pub mean_diff: f64,
    pub stddev: f64,
    pub p_value: f64,
}

impl CellResult {
    fn from_runs(alpha: f64, vocab_size: usize, pdf: PdfShape, runs: Vec<RunResult>) -> Self {
        let mean_curve = |pick: &dyn Fn(&RunResult) -> &Vec<usize>| -> Vec<f64> {
            let len = runs.first().map_or(0, |r| pick(r).len());
            (0..len)
                .map(|i| runs.iter().map(|r| pick(r)[i] as f64).sum::<f64>() / runs.len() as f64)
                .collect()
        };
        let learning_curves = [mean_curve(&|r| &r.learning[0]), mean_curve(&|r| &r.learning[1])];
        let evaluation_curves = [mean_curve(&|r| &r.evaluation[0]), mean_curve(&|r| &r.evaluation[1])];
        let diffs: Vec<f64> = runs.iter().map(|r| r.eval_mean(1) - r.eval_mean(0)).collect();
        let t = one_sided_paired_t(&diffs);
        Self { alpha, vocab_size, pdf, runs, learning_curves, evaluation_curves, mean_diff: t.mean, stddev: t.stddev, p_value: t.p_value }
    }

    /// Learning curves smoothed with a trailing window, `[nkb, rkb]`.
    pub fn smoothed_learning(&self, window: usize) -> [Vec<f64>; 2] {
        [rolling_mean_trailing(&self.learning_curves[0], window), rolling_mean_trailing(&self.learning_curves[1], window)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub cells: Vec<CellResult>,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, SimError> {
    config.validate()?;
    let max_n = *config.vocab_sizes.iter().max().expect("validated non-empty");
    let full = NeighborLexicon::synthetic(max_n)?;
    run_experiment_with(config, &full)
}

/// Runs the grid with a caller-supplied lexicon, truncated to each N.
pub fn run_experiment_with(config: &ExperimentConfig, lexicon: &NeighborLexicon) -> Result<ExperimentResult, SimError> {
    config.validate()?;
    let mut cells = Vec::new();
    for (ai, &alpha) in config.alphas.iter().enumerate() {
        for &n in &config.vocab_sizes {
            let lex = lexicon.truncated(n)?;
            for &shape in &config.pdfs {
                let pdf = VocabularyPdf::new(shape, n)?;
                let runs = (0..config.repetitions)
                    .into_par_iter()
                    .map(|rep| {
                        let seed = derive_seed(config.seed, &[ai as u64, n as u64, rep as u64]);
                        run_once(&lex, &pdf, alpha, config.slides, config.eval_slides(), config.episode_size, seed)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                cells.push(CellResult::from_runs(alpha, n, shape, runs));
            }
        }
    }
    Ok(ExperimentResult { config: config.clone(), cells })
}

impl ExperimentResult {
    pub fn cell(&self, alpha: f64, vocab_size: usize, pdf: PdfShape) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| (c.alpha - alpha).abs() < 1e-12 && c.vocab_size == vocab_size && c.pdf == pdf)
    }

    /// `alpha,N,pdf,phase,kb_variant,slide_index,score`, learning curves smoothed.
    pub fn curves_csv(&self) -> String {
        let mut out = String::from("alpha,N,pdf,phase,kb_variant,slide_index,score\n");
        let ep = self.config.episode_size;
        for c in &self.cells {
            let learning = c.smoothed_learning(self.config.smoothing_window);
            for (phase, curves) in [(Phase::Learning, &learning), (Phase::Evaluation, &c.evaluation_curves)] {
                for (k, variant) in VARIANTS.iter().enumerate() {
                    for (i, s) in curves[k].iter().enumerate() {
                        let _ = writeln!(
                            out,
                            "{},{},{},{},{},{},{:.6}",
                            c.alpha,
                            c.vocab_size,
                            c.pdf.as_str(),
                            phase.as_str(),
                            variant.as_str(),
                            (i + 1) * ep,
                            s
                        );
                    }
                }
            }
        }
        out
    }

    /// `alpha,N,pdf,mean_diff,stddev,p_value` with diff = RKB - NKB evaluation score.
    pub fn grid_csv(&self) -> String {
        let mut out = String::from("alpha,N,pdf,mean_diff,stddev,p_value\n");
        for c in &self.cells {
            let _ = writeln!(out, "{},{},{},{:.6},{:.6},{:.6e}", c.alpha, c.vocab_size, c.pdf.as_str(), c.mean_diff, c.stddev, c.p_value);
        }
        out
    }

    pub fn write_outputs(&self, dir: &Path) -> Result<(), SimError> {
        let io = |e: std::io::Error| SimError::Io(e.to_string());
        std::fs::create_dir_all(dir).map_err(io)?;
        std::fs::write(dir.join("curves.csv"), self.curves_csv()).map_err(io)?;
        std::fs::write(dir.join("grid.csv"), self.grid_csv()).map_err(io)?;
        std::fs::write(dir.join("config.json"), self.config.to_json()).map_err(io)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub users: usize,
    pub slides_per_user: usize,
    pub vocab_size: usize,
    pub pdf: PdfShape,
    pub seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self { users: 18, slides_per_user: 5, vocab_size: 20, pdf: PdfShape::InvN, seed: 0 }
    }
}

/// Sequential collaborative users sharing one naive KB; returns clarifications per user.
pub fn shared_kb_study(cfg: &StudyConfig) -> Result<Vec<usize>, SimError> {
    let lexicon = NeighborLexicon::synthetic(cfg.vocab_size)?;
    let subs: Vec<String> = lexicon.sub_concepts().map(str::to_string).collect();
    let mut kb = empty_kb(Variant::Nkb, &lexicon)?;
    let mut out = Vec::with_capacity(cfg.users);
    for u in 0..cfg.users {
        let seed = derive_seed(cfg.seed, &[u as u64]);
        let mut user = SimulatedUser::new(true, cfg.pdf, cfg.vocab_size, seed)?;
        let mut gold_rng = ChaCha8Rng::seed_from_u64(mix(seed));
        let stream: Vec<Query> = (0..cfg.slides_per_user)
            .map(|_| {
                let gold = subs.choose(&mut gold_rng).expect("non-empty").clone();
                let (word, claimed) = user.sample_word(&gold, &lexicon)?;
                Ok(Query { gold, word, claimed, collaborative: true })
            })
            .collect::<Result<_, SimError>>()?;
        let log = run_phase(&mut kb, &stream, Phase::Learning, cfg.slides_per_user.max(1))?;
        out.push(log.slides.iter().filter(|s| s.clarified).count());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching_score_examples() {
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        let p = |v: &[&str]| v.iter().map(|x| Some(x.to_string())).collect::<Vec<_>>();
        assert_eq!(matching_score(&p(&["a", "a", "a", "c"]), &s(&["a", "b", "a", "c"])).unwrap(), 3);
        assert_eq!(matching_score(&[None, None], &s(&["a", "b"])).unwrap(), 0);
        assert!(matches!(matching_score(&p(&["a"]), &s(&["a", "b"])), Err(SimError::Dimension { .. })));
    }

    #[test]
    fn collaborative_singleton_vocabulary() {
        let lex = NeighborLexicon::synthetic(1).unwrap();
        let mut u = SimulatedUser::new(true, PdfShape::InvN, 1, 3).unwrap();
        for _ in 0..20 {
            let (w, c) = u.sample_word("piechart", &lex).unwrap();
            assert_eq!(w, lex.words("piechart").unwrap()[0]);
            assert_eq!(c, "piechart");
        }
    }

    #[test]
    fn non_collaborative_words_come_from_elsewhere() {
        let lex = NeighborLexicon::synthetic(50).unwrap();
        let mut u = SimulatedUser::new(false, PdfShape::InvLog, 50, 9).unwrap();
        for _ in 0..500 {
            let (w, c) = u.sample_word("table", &lex).unwrap();
            assert_ne!(lex.gold_of(&w), Some("table"));
            assert_eq!(c, "table");
        }
        let single = NeighborLexicon::new([("table".to_string(), vec!["grid".to_string()])].into()).unwrap();
        assert!(matches!(u.sample_word("table", &single), Err(SimError::Config(_))));
    }

    #[test]
    fn episode_arithmetic_and_reproducibility() {
        let cfg = ExperimentConfig {
            alphas: vec![0.6],
            vocab_sizes: vec![5],
            pdfs: vec![PdfShape::InvN],
            repetitions: 1,
            slides: 20,
            ..Default::default()
        };
        let a = run_experiment(&cfg).unwrap();
        let r = &a.cells[0].runs[0];
        for k in 0..2 {
            assert_eq!(r.learning[k].len(), 2);
            assert_eq!(r.evaluation[k].len(), 2);
            assert!(r.learning[k].iter().chain(&r.evaluation[k]).all(|s| *s <= 10));
        }
        assert_eq!(run_experiment(&cfg).unwrap(), a);
        assert!(a.grid_csv().starts_with("alpha,N,pdf,mean_diff"));
        assert_eq!(a.curves_csv().lines().count(), 1 + 2 * 2 * 2);
    }

    #[test]
    fn perfect_users_perfect_scores() {
        let lex = NeighborLexicon::synthetic(1).unwrap();
        let pdf = VocabularyPdf::new(PdfShape::InvN, 1).unwrap();
        let r = run_once(&lex, &pdf, 1.0, 100, 100, 10, 1).unwrap();
        assert!(r.evaluation[1].iter().all(|s| *s == 10));
        assert!(r.evaluation[0].iter().all(|s| *s == 10));
    }

    #[test]
    fn config_validation() {
        let mut c = ExperimentConfig::default();
        assert!(c.validate().is_ok());
        c.alphas = vec![0.2];
        assert!(c.validate().is_err());
        let c = ExperimentConfig { vocab_sizes: vec![1001], ..Default::default() };
        assert!(ExperimentConfig::from_json(&c.to_json()).is_err());
    }
}
