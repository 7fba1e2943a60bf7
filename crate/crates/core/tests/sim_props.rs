use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use deckforge::kb::Variant;
use deckforge::sim::{
    empty_kb, run_experiment, run_phase, shared_kb_study, user_stream, ExperimentConfig, NeighborLexicon, PdfShape, Phase,
    StudyConfig, VocabularyPdf,
};

fn small_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        alphas: vec![0.6, 1.0],
        vocab_sizes: vec![5, 20],
        pdfs: vec![PdfShape::InvN],
        repetitions: 3,
        slides: 200,
        eval_slides: Some(100),
        seed,
        ..ExperimentConfig::default()
    }
}

/// One-sample KS statistic of integer draws against a discrete CDF, taken at the support points.
fn ks_statistic(draws: &[usize], probs: &[f64]) -> f64 {
    let mut counts = vec![0usize; probs.len()];
    for d in draws {
        counts[*d] += 1;
    }
    let n = draws.len() as f64;
    let (mut emp, mut cdf, mut d) = (0.0, 0.0, 0.0f64);
    for (c, p) in counts.iter().zip(probs) {
        emp += *c as f64 / n;
        cdf += p;
        d = d.max((emp - cdf).abs());
    }
    d
}

#[test]
fn sampled_ranks_follow_the_pdf() {
    let n_draws = 100_000;
    // 1% critical value of the KS statistic for large samples
    let critical = 1.63 / (n_draws as f64).sqrt();
    for shape in PdfShape::ALL {
        for n in [5, 50, 1000] {
            let pdf = VocabularyPdf::new(shape, n).unwrap();
            let weights: Vec<f64> = (0..n).map(|i| shape.weight(i)).collect();
            let total: f64 = weights.iter().sum();
            let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
            let draws: Vec<usize> = (0..n_draws).map(|_| pdf.sample_rank(&mut rng)).collect();
            let d = ks_statistic(&draws, &probs);
            assert!(d < critical, "{} N={n}: D={d:.5} >= {critical:.5}", shape.as_str());
        }
    }
}

#[test]
fn identical_config_gives_identical_tables() {
    let a = run_experiment(&small_config(9)).unwrap();
    let b = run_experiment(&small_config(9)).unwrap();
    assert_eq!(a.curves_csv(), b.curves_csv());
    assert_eq!(a.grid_csv(), b.grid_csv());
    let c = run_experiment(&small_config(10)).unwrap();
    assert_ne!(a.curves_csv(), c.curves_csv());
}

#[test]
fn outputs_written_with_headers() {
    let dir = tempfile::tempdir().unwrap();
    let r = run_experiment(&small_config(1)).unwrap();
    r.write_outputs(dir.path()).unwrap();
    let curves = std::fs::read_to_string(dir.path().join("curves.csv")).unwrap();
    assert!(curves.starts_with("alpha,N,pdf,phase,kb_variant,slide_index,score"));
    let grid = std::fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    assert!(grid.starts_with("alpha,N,pdf,mean_diff,stddev,p_value"));
    assert_eq!(grid.lines().count(), 1 + 4);
    let cfg = ExperimentConfig::from_json(&std::fs::read_to_string(dir.path().join("config.json")).unwrap()).unwrap();
    assert_eq!(cfg, r.config);
}

#[test]
fn noise_free_singleton_vocabulary_saturates() {
    let lex = NeighborLexicon::synthetic(1).unwrap();
    let pdf = VocabularyPdf::new(PdfShape::InvN, 1).unwrap();
    let stream = user_stream(&lex, &pdf, 1.0, 100, 3).unwrap();
    let mut kb = empty_kb(Variant::Rkb, &lex).unwrap();
    run_phase(&mut kb, &stream, Phase::Learning, 10).unwrap();
    let eval = run_phase(&mut kb, &stream, Phase::Evaluation, 10).unwrap();
    assert!(eval.episode_scores.iter().all(|s| *s == 10));
}

#[test]
fn shared_nkb_study_is_deterministic() {
    let a = shared_kb_study(&StudyConfig::default()).unwrap();
    assert_eq!(a.len(), 18);
    assert_eq!(a, shared_kb_study(&StudyConfig::default()).unwrap());
    assert!(a.iter().all(|c| *c <= 5));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn episode_scores_bounded(alpha in 0.4..=1.0f64, n in 1usize..60, episode in 1usize..20, seed in any::<u64>(), rkb in any::<bool>()) {
        let lex = NeighborLexicon::synthetic(n).unwrap();
        let pdf = VocabularyPdf::new(PdfShape::InvLog, n).unwrap();
        let stream = user_stream(&lex, &pdf, alpha, 200, seed).unwrap();
        let mut kb = empty_kb(if rkb { Variant::Rkb } else { Variant::Nkb }, &lex).unwrap();
        for phase in [Phase::Learning, Phase::Evaluation] {
            let log = run_phase(&mut kb, &stream, phase, episode).unwrap();
            prop_assert_eq!(log.episode_scores.len(), 200 / episode);
            prop_assert!(log.episode_scores.iter().all(|s| *s <= episode));
            if phase == Phase::Evaluation {
                prop_assert!(log.slides.iter().all(|s| !s.clarified));
            }
        }
    }

    #[test]
    fn user_streams_respect_roles(alpha in 0.0..=1.0f64, n in 1usize..40, seed in any::<u64>()) {
        let lex = NeighborLexicon::synthetic(n).unwrap();
        let pdf = VocabularyPdf::new(PdfShape::InvN2, n).unwrap();
        let stream = user_stream(&lex, &pdf, alpha, 300, seed).unwrap();
        prop_assert_eq!(&stream, &user_stream(&lex, &pdf, alpha, 300, seed).unwrap());
        for q in &stream {
            prop_assert_eq!(&q.claimed, &q.gold);
            let source = lex.gold_of(&q.word).unwrap();
            prop_assert_eq!(source == q.gold, q.collaborative);
        }
    }
}
