//! Acceptance suite. Each test prints one PASS line; run with
//! `cargo test -p vocab-forge --test acceptance -- --nocapture` to see them.

use std::collections::{HashMap, HashSet};
use std::time::{Duration, Instant};

use rand::Rng;
use vocab_forge::corpus::{
    compute_sampling_weights, filter_corpus, filter_line, FilterDecision, FilterRules,
    LanguageStream, RejectReason, SamplingPolicy,
};
use vocab_forge::corpus::{dedupe, sample_multilingual};
use vocab_forge::embstats::{fit_pca, EmbeddingMatrix};
use vocab_forge::error::Error;
use vocab_forge::focus::{cosine, sparsemax, train_aux, AuxConfig, AuxEmbeddings};
use vocab_forge::lexicon::{analyze_vocab, compute_overlap, PositionClass, ScriptClass};
use vocab_forge::modelio::{param_savings, read_emb, write_emb};
use vocab_forge::reinit::{
    init_random, sample_from_groups, specialize, MeanStd, Provenance, StatsChain, Strategy,
    StrategyKind,
};
use vocab_forge::rng::stream_rng;
use vocab_forge::synth::{gen_synthetic, SynthLanguage, SynthScript, SynthSpec};
use vocab_forge::vocab::{default_specials, train_bpe, Vocabulary, DEFAULT_MARKER};

mod oracles;

const M: char = DEFAULT_MARKER;

fn pass(criterion: u32, what: &str) {
    println!("ACCEPTANCE PASS: criterion {criterion:2} - {what}");
}

/// Synthetic vocabulary of `n` tokens mixing scripts and positions.
fn synthetic_vocab(n: usize, tag: &str) -> Vocabulary {
    let specials = default_specials();
    let mut tokens = specials.clone();
    let mut i = 0usize;
    while tokens.len() < n {
        let body = format!("{tag}{i:x}");
        let token = match i % 4 {
            0 => format!("{M}{body}"),
            1 => body,
            2 => format!("{M}пр{i:x}"),
            _ => format!("кс{i:x}"),
        };
        tokens.push(token);
        i += 1;
    }
    Vocabulary::from_parts(M, specials, tokens, vec![]).unwrap()
}

/// Target vocabulary sharing roughly `shared` tokens with `src`.
fn overlapping_vocab(src: &Vocabulary, total: usize, shared: usize) -> Vocabulary {
    let specials = default_specials();
    let mut tokens = specials.clone();
    // specials themselves overlap; count them toward the shared budget
    let mut from_src = specials.len();
    for t in src.tokens().iter().skip(specials.len()) {
        if tokens.len() >= total || from_src >= shared {
            break;
        }
        tokens.push(t.clone());
        from_src += 1;
    }
    let mut i = 0usize;
    while tokens.len() < total {
        tokens.push(format!("{M}нов{i:x}"));
        i += 1;
    }
    Vocabulary::from_parts(M, specials, tokens, vec![]).unwrap()
}

fn full_coverage_aux(vocab: &Vocabulary, dim: usize, seed: u64) -> AuxEmbeddings {
    let mut aux = AuxEmbeddings::new(dim);
    let mut rng = stream_rng(seed);
    for id in 0..vocab.len() as u32 {
        let v: Vec<f32> = (0..dim).map(|_| rng.gen::<f32>() - 0.5).collect();
        aux.insert(id, v).unwrap();
    }
    aux
}

#[test]
fn criterion_01_identity_round_trip() {
    let vocab = synthetic_vocab(32_770, "tok");
    let src = init_random(vocab.len(), 128, 2024, 0.02);
    let aux = full_coverage_aux(&vocab, 8, 7);
    for kind in [
        StrategyKind::Ident,
        StrategyKind::ScriptIdent,
        StrategyKind::ScriptPosnIdent,
        StrategyKind::FocusIdent,
    ] {
        let strategy = Strategy::new(kind, 99);
        let aux_opt = kind.needs_aux().then_some(&aux);
        let start = Instant::now();
        let (out, report) = specialize(&vocab, &src, &vocab, &strategy, aux_opt).unwrap();
        let elapsed = start.elapsed();
        assert_eq!(out.data(), src.data(), "{kind} not bit-exact");
        assert_eq!(report.counts.copied as usize, vocab.len(), "{kind}");
        assert!(
            elapsed < Duration::from_secs(1),
            "{kind} took {elapsed:?} on the 32k x 128 fixture"
        );
    }
    pass(1, "identity round-trip is bit-exact and under 1s per strategy");
}

#[test]
fn criterion_02_identity_precedence_at_partial_overlap() {
    let src_vocab = synthetic_vocab(1000, "src");
    let tgt_vocab = overlapping_vocab(&src_vocab, 500, 200);
    let overlap = compute_overlap(&src_vocab, &tgt_vocab);
    let frac = overlap.len() as f64 / tgt_vocab.len() as f64;
    assert!((0.35..=0.45).contains(&frac), "overlap fraction {frac}");

    let src = init_random(src_vocab.len(), 24, 5, 0.05);
    let aux = full_coverage_aux(&tgt_vocab, 8, 3);
    for kind in [
        StrategyKind::Ident,
        StrategyKind::ScriptIdent,
        StrategyKind::ScriptPosnIdent,
        StrategyKind::FocusIdent,
    ] {
        let aux_opt = kind.needs_aux().then_some(&aux);
        let (out, report) =
            specialize(&src_vocab, &src, &tgt_vocab, &Strategy::new(kind, 1), aux_opt).unwrap();
        for &(t, s) in overlap.pairs() {
            assert_eq!(
                out.row(t as usize),
                src.row(s as usize),
                "{kind}: overlapping token {t} differs from source row {s}"
            );
            assert_eq!(report.tokens[t as usize], Provenance::Copied, "{kind}");
        }
        assert_eq!(report.counts.copied as usize, overlap.len(), "{kind}");
    }
    pass(2, "all overlapping rows equal their source rows under every *ident strategy");
}

#[test]
fn criterion_03_script_distribution_fidelity() {
    use unicode_script::Script;
    let d = 16;
    let n_per_group = 6000u32;
    let groups = [
        (
            ScriptClass::Named(Script::Latin),
            PositionClass::Initial,
            1.5f64,
            0.40f64,
        ),
        (
            ScriptClass::Named(Script::Latin),
            PositionClass::Medial,
            -2.0,
            0.25,
        ),
        (
            ScriptClass::Named(Script::Cyrillic),
            PositionClass::Initial,
            4.0,
            0.60,
        ),
    ];

    let start = Instant::now();
    let mut chain = StatsChain::empty(d);
    let mut meta = Vec::new();
    for (g, (script, position, mean_base, std_base)) in groups.iter().enumerate() {
        let mean: Vec<f64> = (0..d).map(|j| mean_base + 0.1 * j as f64).collect();
        let std: Vec<f64> = (0..d).map(|j| std_base + 0.01 * j as f64).collect();
        chain.set_script_posn(*script, *position, MeanStd { mean, std });
        for k in 0..n_per_group {
            meta.push(vocab_forge::lexicon::TokenMetadata {
                id: g as u32 * n_per_group + k,
                token: format!("g{g}k{k}"),
                script: *script,
                position: *position,
            });
        }
    }
    let (matrix, prov) = sample_from_groups(&meta, &chain, 314, &[1.0; 16], true);
    assert!(prov
        .iter()
        .all(|p| matches!(p, Provenance::SampledScriptPosn { .. })));

    for (g, (_, _, mean_base, std_base)) in groups.iter().enumerate() {
        let lo = g * n_per_group as usize;
        let hi = lo + n_per_group as usize;
        for j in 0..d {
            let mu = mean_base + 0.1 * j as f64;
            let sigma = std_base + 0.01 * j as f64;
            let vals: Vec<f64> = (lo..hi).map(|i| f64::from(matrix.row(i)[j])).collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            assert!(
                (m - mu).abs() < 4.0 * sigma / (n_per_group as f64).sqrt(),
                "group {g} dim {j}: mean {m} vs {mu}"
            );
            let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / vals.len() as f64;
            let s = var.sqrt();
            assert!(
                (s - sigma).abs() / sigma < 0.05,
                "group {g} dim {j}: std {s} vs {sigma}"
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    pass(3, "group samples match source means within 4 sigma/sqrt(n) and stds within 5%");
}

#[test]
fn criterion_04_cluster_separability() {
    use unicode_script::Script;
    let d = 8;
    let sigma = 0.3f64;
    let n_per_group = 5000u32;
    // means 10.5 sigma apart per dimension
    let mean_a = vec![0.0f64; d];
    let mean_b = vec![10.5 * sigma; d];

    let mut chain = StatsChain::empty(d);
    chain.set_script(
        ScriptClass::Named(Script::Latin),
        MeanStd {
            mean: mean_a.clone(),
            std: vec![sigma; d],
        },
    );
    chain.set_script(
        ScriptClass::Named(Script::Cyrillic),
        MeanStd {
            mean: mean_b.clone(),
            std: vec![sigma; d],
        },
    );
    let mut meta = Vec::new();
    for k in 0..2 * n_per_group {
        let script = if k < n_per_group {
            ScriptClass::Named(Script::Latin)
        } else {
            ScriptClass::Named(Script::Cyrillic)
        };
        meta.push(vocab_forge::lexicon::TokenMetadata {
            id: k,
            token: format!("t{k}"),
            script,
            position: PositionClass::Medial,
        });
    }
    let (matrix, _) = sample_from_groups(&meta, &chain, 2718, &[1.0; 8], false);

    let dist2 = |row: &[f32], mean: &[f64]| -> f64 {
        row.iter()
            .zip(mean)
            .map(|(&v, m)| (f64::from(v) - m) * (f64::from(v) - m))
            .sum()
    };
    let mut correct = 0usize;
    for i in 0..matrix.rows() {
        let row = matrix.row(i);
        let to_a = dist2(row, &mean_a);
        let to_b = dist2(row, &mean_b);
        let predicted_b = to_b < to_a;
        if predicted_b == (i as u32 >= n_per_group) {
            correct += 1;
        }
    }
    let accuracy = correct as f64 / matrix.rows() as f64;
    assert!(accuracy >= 0.999, "nearest-mean recovery {accuracy}");
    pass(4, "nearest-group-mean recovers >= 99.9% of rows for well-separated groups");
}

#[test]
fn criterion_05_focus_validity() {
    let src_vocab = synthetic_vocab(60, "s");
    let tgt_vocab = overlapping_vocab(&src_vocab, 50, 20);
    let overlap = compute_overlap(&src_vocab, &tgt_vocab);
    let src = init_random(src_vocab.len(), 12, 8, 0.2);
    let aux = full_coverage_aux(&tgt_vocab, 6, 17);
    let mut strategy = Strategy::new(StrategyKind::FocusIdent, 4);
    strategy.random_std = 1.0;
    let (out, report) = specialize(&src_vocab, &src, &tgt_vocab, &strategy, Some(&aux)).unwrap();

    // recompute weights through the public ops and check validity + identity
    let anchors: Vec<(u32, u32)> = overlap.pairs().to_vec();
    let mut focus_rows = 0usize;
    for meta in analyze_vocab(&tgt_vocab) {
        let t = meta.id;
        if overlap.source_of(t).is_some() {
            continue;
        }
        let Provenance::FocusWeighted { support } = report.tokens[t as usize] else {
            continue;
        };
        focus_rows += 1;
        let av = aux.get(t).unwrap();
        let sims: Vec<f64> = anchors
            .iter()
            .map(|&(at, _)| cosine(av, aux.get(at).unwrap()).unwrap())
            .collect();
        let weights = sparsemax(&sims);
        let sum: f64 = weights.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9, "token {t}: weight sum {sum}");
        assert!(weights.iter().all(|&w| w >= 0.0), "token {t}");
        assert_eq!(
            weights.iter().filter(|&&w| w > 0.0).count(),
            support,
            "token {t} support size"
        );

        // reconstruct the row and compare
        let mut expected = vec![0.0f64; src.dim()];
        for (w, &(_, s)) in weights.iter().zip(&anchors) {
            if *w == 0.0 {
                continue;
            }
            for (acc, &v) in expected.iter_mut().zip(src.row(s as usize)) {
                *acc += w * f64::from(v);
            }
        }
        for (a, &b) in expected.iter().zip(out.row(t as usize)) {
            assert!((a - f64::from(b)).abs() < 1e-6, "token {t} row mismatch");
        }

        // convex hull containment over the support, per dimension
        for j in 0..src.dim() {
            let mut lo = f32::MAX;
            let mut hi = f32::MIN;
            for (w, &(_, s)) in weights.iter().zip(&anchors) {
                if *w > 0.0 {
                    lo = lo.min(src.row(s as usize)[j]);
                    hi = hi.max(src.row(s as usize)[j]);
                }
            }
            let v = out.row(t as usize)[j];
            assert!(
                v >= lo - 1e-6 && v <= hi + 1e-6,
                "token {t} dim {j}: {v} outside [{lo}, {hi}]"
            );
        }
    }
    assert!(focus_rows >= 20, "only {focus_rows} focus-weighted rows");

    // single-match synthetic case: aux vector identical to one anchor,
    // orthogonal to the rest
    let mut aux2 = AuxEmbeddings::new(4);
    let anchor_t = overlap.pairs()[6].0;
    let anchor_s = overlap.pairs()[6].1;
    for (i, &(t, _)) in overlap.pairs().iter().enumerate() {
        let mut v = vec![0.0f32; 4];
        if t == anchor_t {
            v[0] = 1.0;
        } else {
            v[1 + (i % 3)] = 1.0;
        }
        aux2.insert(t, v).unwrap();
    }
    let new_token = analyze_vocab(&tgt_vocab)
        .into_iter()
        .find(|m| overlap.source_of(m.id).is_none())
        .unwrap()
        .id;
    aux2.insert(new_token, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
    let (out2, report2) =
        specialize(&src_vocab, &src, &tgt_vocab, &strategy, Some(&aux2)).unwrap();
    assert_eq!(
        out2.row(new_token as usize),
        src.row(anchor_s as usize),
        "single-match row must copy the matched source row exactly"
    );
    assert_eq!(
        report2.tokens[new_token as usize],
        Provenance::FocusWeighted { support: 1 }
    );
    pass(5, "focus weights are a valid sparse convex combination; single-match copies exactly");
}

#[test]
fn criterion_06_sparsemax_matches_projection_oracle() {
    let mut rng = stream_rng(606);
    for case in 0..1000 {
        let dim = 1 + case % 4;
        let z: Vec<f64> = (0..dim).map(|_| rng.gen::<f64>() * 6.0 - 3.0).collect();
        let ours = sparsemax(&z);
        let oracle = oracles::simplex_projection(&z);
        for (a, b) in ours.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-9, "case {case}: {ours:?} vs {oracle:?}");
        }
        // shift invariance
        let shifted: Vec<f64> = z.iter().map(|v| v + 41.5).collect();
        for (a, b) in sparsemax(&shifted).iter().zip(&ours) {
            assert!((a - b).abs() < 1e-9, "case {case} shift");
        }
        // argmax preservation
        let argmax = z
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        let max_w = ours.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(ours[argmax], max_w, "case {case} argmax");
    }
    pass(6, "sparsemax equals brute-force simplex projection on 1000 random vectors");
}

#[test]
fn criterion_07_pca_matches_eigendecomposition_oracle() {
    for seed in 0..10u64 {
        let mut rng = stream_rng(700 + seed);
        let rows: Vec<Vec<f32>> = (0..50)
            .map(|_| (0..10).map(|_| rng.gen::<f32>() * 4.0 - 2.0).collect())
            .collect();
        let matrix = EmbeddingMatrix::from_rows(rows.clone()).unwrap();
        let pca = fit_pca(&matrix, 10).unwrap();

        let (oracle_vals, oracle_vecs) = oracles::pca_eigen(&rows);
        for j in 0..10 {
            assert!(
                (pca.explained_variance[j] - oracle_vals[j]).abs() < 1e-8,
                "seed {seed} eigenvalue {j}"
            );
            for (a, b) in pca.component(j).iter().zip(&oracle_vecs[j]) {
                assert!(
                    (a - b).abs() < 1e-6,
                    "seed {seed} component {j}: {a} vs {b}"
                );
            }
        }
        // trace identity
        let total: f64 = pca.explained_variance.iter().sum();
        let oracle_total: f64 = oracle_vals.iter().sum();
        assert!((total - oracle_total).abs() < 1e-8);
    }

    // collinear data concentrates everything in the first component
    let rows: Vec<Vec<f32>> = (0..40).map(|i| vec![i as f32 * 0.5, i as f32 * 0.5]).collect();
    let line = EmbeddingMatrix::from_rows(rows).unwrap();
    let pca = fit_pca(&line, 2).unwrap();
    assert!(pca.explained_variance[1] < 1e-10);
    pass(7, "PCA matches the Jacobi eigendecomposition oracle on 50x10 matrices");
}

#[test]
fn criterion_08_alpha_sampling() {
    // frozen point from direct evaluation of the normalized power formula
    let p = compute_sampling_weights(&[0.9, 0.1], 0.2).unwrap();
    assert!((p[0] - 0.60812).abs() < 1e-4);
    assert!((p[1] - 0.39188).abs() < 1e-4);

    // exact limits
    let sizes = [900.0, 100.0];
    let total: f64 = sizes.iter().sum();
    let q: Vec<f64> = sizes.iter().map(|s| s / total).collect();
    let p1 = compute_sampling_weights(&sizes, 1.0).unwrap();
    let qsum: f64 = q.iter().sum();
    for (a, b) in p1.iter().zip(q.iter().map(|x| x / qsum)) {
        assert_eq!(*a, b, "alpha = 1 must reproduce raw shares exactly");
    }
    for w in compute_sampling_weights(&sizes, 0.0).unwrap() {
        assert_eq!(w, 0.5, "alpha = 0 must be uniform exactly");
    }

    // empirical draw frequencies at n = 1e5: byte sizes in a 9:1 ratio
    let big = LanguageStream::new("big", vec!["aaaaaaaa".to_string(); 900]);
    let small = LanguageStream::new("small", vec!["bbbbbbbb".to_string(); 100]);
    assert_eq!(big.byte_count() * 1, small.byte_count() * 9);
    let n = 100_000usize;
    let mixed =
        sample_multilingual(&[big, small], &SamplingPolicy::new(0.2, 1234), n).unwrap();
    assert_eq!(mixed.line_count(), n);
    let from_big = mixed.lines().iter().filter(|l| l.starts_with('a')).count();
    let expected = p[0] * n as f64;
    let sigma = (n as f64 * p[0] * (1.0 - p[0])).sqrt();
    assert!(
        (from_big as f64 - expected).abs() < 3.0 * sigma,
        "{from_big} draws vs expected {expected:.0} (sigma {sigma:.1})"
    );
    pass(8, "alpha-sampling weights and empirical frequencies match the oracle");
}

#[test]
fn criterion_09_cleaning_filter_fixture() {
    let rules = FilterRules {
        langid_predicate: Some(std::sync::Arc::new(|line: &str| line.contains("reject-me"))),
        ..FilterRules::default()
    };
    use FilterDecision::{Keep, Reject};
    use RejectReason::*;
    let fixture: [(&str, FilterDecision); 12] = [
        // one token: below the 2-token minimum
        ("a", Reject(TooFewTokens)),
        ("", Reject(TooFewTokens)),
        // two 17-char tokens: average 17 > 16
        (
            "aaaaaaaaaaaaaaaaa bbbbbbbbbbbbbbbbb",
            Reject(AvgTokenTooLong),
        ),
        // 33-char token padded with short ones to keep the average legal
        (
            "a b c xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx",
            Reject(TokenTooLong),
        ),
        // 6 alphabetic of 15 non-space chars = 40% < 50%
        ("abcd!!!!!! xy!!!", Reject(AlphaRatioTooLow)),
        ("!!! ??? ...", Reject(AlphaRatioTooLow)),
        ("hello world", Keep),
        // exactly 32-char token passes the length cap (average stays low)
        ("a b c d xxxxxxxxxxxxxxxxxxxxxxxxxxxxxxxx", Keep),
        // average exactly 16 passes the average cap
        ("aaaaaaaaaaaaaaaa bbbbbbbbbbbbbbbb", Keep),
        ("привет мир-хорошо", Keep),
        ("this line is reject-me English", Reject(LangIdReject)),
        ("final good line", Keep),
    ];
    let mut expected_kept = Vec::new();
    for (line, expected) in &fixture {
        assert_eq!(filter_line(line, &rules), *expected, "line {line:?}");
        if *expected == Keep {
            expected_kept.push(line.to_string());
        }
    }
    let stream = LanguageStream::new(
        "fx",
        fixture.iter().map(|(l, _)| l.to_string()).collect(),
    );
    let (kept, counts) = filter_corpus(&stream, &rules);
    assert_eq!(kept.lines(), expected_kept.as_slice());
    assert_eq!(counts.total(), 12);
    assert_eq!(counts.kept, 5);
    assert_eq!(counts.too_few_tokens, 2);
    assert_eq!(counts.avg_token_too_long, 1);
    assert_eq!(counts.token_too_long, 1);
    assert_eq!(counts.alpha_ratio_too_low, 2);
    assert_eq!(counts.langid_reject, 1);
    pass(9, "the 12-line fixture produces exactly the expected reason codes");
}

#[test]
fn criterion_10_parameter_accounting() {
    let s = param_savings(250_002, 32_770, 768, 278_000_000).unwrap();
    assert_eq!(s.src_emb, 192_001_536);
    assert!((s.src_fraction - 0.6906).abs() < 0.0005);
    assert_eq!(s.tgt_emb, 25_167_360);
    assert_eq!(s.saved, 166_834_176);
    pass(10, "embedding parameter accounting reproduces the 192M / 278M = 69% figure");
}

#[test]
fn criterion_11_bpe_matches_brute_force_oracle() {
    // synthetic corpus under 10 kB
    let stream = gen_synthetic(&SynthSpec {
        languages: vec![SynthLanguage {
            code: "lat".into(),
            lines: 160,
            script_weights: vec![(SynthScript::Latin, 1.0)],
        }],
        seed: 2211,
    })
    .unwrap()
    .remove(0);
    assert!(stream.byte_count() <= 10_240, "{} bytes", stream.byte_count());

    let specials = default_specials();
    let n_merges = 64usize;
    let alphabet: HashSet<char> = stream
        .lines()
        .iter()
        .flat_map(|l| l.chars())
        .filter(|c| !c.is_whitespace())
        .collect();
    let target = specials.len() + alphabet.len() + 1 + n_merges; // +1 for the marker
    let vocab = train_bpe(stream.lines(), target, &specials, M).unwrap();
    assert_eq!(vocab.len(), target);

    let oracle = oracles::bpe_merges(stream.lines(), M, &specials, n_merges);
    assert_eq!(oracle.len(), n_merges);
    for (i, ((pair, count), actual)) in oracle.iter().zip(vocab.merges()).enumerate() {
        assert_eq!(pair, actual, "merge {i} differs from oracle");
        if i > 0 {
            assert!(
                oracle[i - 1].1 >= *count,
                "merge frequency increased at step {i}"
            );
        }
    }

    // the tokenizer round-trips its own training corpus
    for line in stream.lines() {
        let seq = vocab.encode(line).unwrap();
        assert_eq!(&vocab.decode(&seq).unwrap(), line);
    }
    pass(11, "greedy merge sequence equals the brute-force pair-counting oracle");
}

#[test]
fn criterion_12_determinism_and_serialization() {
    let dir = tempfile::tempdir().unwrap();

    let run = |tag: &str| -> (std::path::PathBuf, std::path::PathBuf, std::path::PathBuf) {
        let base = dir.path().join(tag);
        std::fs::create_dir_all(&base).unwrap();
        let raw = gen_synthetic(&SynthSpec {
            languages: vec![
                SynthLanguage {
                    code: "lat".into(),
                    lines: 1500,
                    script_weights: vec![(SynthScript::Latin, 1.0)],
                },
                SynthLanguage {
                    code: "cyr".into(),
                    lines: 700,
                    script_weights: vec![(SynthScript::Cyrillic, 1.0)],
                },
            ],
            seed: 11,
        })
        .unwrap();
        let rules = FilterRules::default();
        let cleaned: Vec<LanguageStream> = raw
            .iter()
            .map(|s| filter_corpus(&dedupe(s), &rules).0)
            .collect();
        let mixed = sample_multilingual(&cleaned, &SamplingPolicy::new(0.2, 21), 3000).unwrap();
        let tgt_vocab = train_bpe(mixed.lines(), 400, &default_specials(), M).unwrap();
        let src_vocab = train_bpe(cleaned[0].lines(), 320, &default_specials(), M).unwrap();
        let src_emb = init_random(src_vocab.len(), 32, 77, 0.02);

        let encoded: Vec<Vec<u32>> = mixed
            .lines()
            .iter()
            .map(|l| tgt_vocab.encode(l).unwrap().ids)
            .collect();
        let aux = train_aux(
            &encoded,
            &AuxConfig {
                dim: 16,
                epochs: 1,
                seed: 5,
                ..AuxConfig::default()
            },
        )
        .unwrap();

        let (out, report) = specialize(
            &src_vocab,
            &src_emb,
            &tgt_vocab,
            &Strategy::new(StrategyKind::FocusIdent, 13),
            Some(&aux),
        )
        .unwrap();

        let vocab_path = base.join("tgt.json");
        let emb_path = base.join("tgt.vfe");
        let report_path = base.join("report.json");
        tgt_vocab.save(&vocab_path).unwrap();
        write_emb(&out, &emb_path).unwrap();
        report.write_json(&report_path, true).unwrap();
        (vocab_path, emb_path, report_path)
    };

    let (v1, e1, r1) = run("a");
    let (v2, e2, r2) = run("b");
    for (p1, p2) in [(v1, v2), (e1.clone(), e2), (r1, r2)] {
        assert_eq!(
            std::fs::read(&p1).unwrap(),
            std::fs::read(&p2).unwrap(),
            "artifacts differ: {p1:?}"
        );
    }

    // container round-trip is bit-exact; a corrupted payload is detected
    let matrix = read_emb(&e1).unwrap();
    let rt = dir.path().join("rt.vfe");
    write_emb(&matrix, &rt).unwrap();
    assert_eq!(std::fs::read(&e1).unwrap(), std::fs::read(&rt).unwrap());
    let mut bytes = std::fs::read(&rt).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x08;
    std::fs::write(&rt, &bytes).unwrap();
    assert!(matches!(
        read_emb(&rt),
        Err(Error::CorruptPayload { .. }) | Err(Error::BadMagic(_))
    ));
    pass(12, "identical seeds give byte-identical artifacts; corruption is detected");
}

/// Sanity cross-check used by several criteria: the whole provenance
/// report always partitions the target vocabulary.
#[test]
fn report_counts_partition_target_vocab() {
    let src_vocab = synthetic_vocab(300, "s");
    let tgt_vocab = overlapping_vocab(&src_vocab, 200, 80);
    let src = init_random(src_vocab.len(), 10, 3, 0.1);
    let aux = full_coverage_aux(&tgt_vocab, 6, 2);
    for name in StrategyKind::ALL_NAMES {
        let kind: StrategyKind = name.parse().unwrap();
        let aux_opt = kind.needs_aux().then_some(&aux);
        let (_, report) =
            specialize(&src_vocab, &src, &tgt_vocab, &Strategy::new(kind, 6), aux_opt).unwrap();
        assert_eq!(report.counts.total() as usize, tgt_vocab.len(), "{name}");
        assert_eq!(report.tokens.len(), tgt_vocab.len(), "{name}");
    }
}
