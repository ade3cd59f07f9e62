//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any gating criterion fails.

use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use sadcluster::augment::shuffle_divide;
use sadcluster::cluster::{spherical_kmeans, KMeansConfig};
use sadcluster::contrastive::{
    nt_xent, nt_xent_loss, supervised_finetune, train, FinetuneConfig, Method, TrainConfig,
};
use sadcluster::corpus::{Corpus, Document};
use sadcluster::encoder::{tokenize, EncoderConfig, EncoderGrads, EncoderParams, TokenSequence, Vocabulary};
use sadcluster::eval::{
    adjusted_mutual_information, clustering_accuracy, contingency, expected_mutual_information, hungarian,
};
use sadcluster::rng::StreamRng;
use sadcluster::synth::{generate_synthetic, SynthConfig};
use sadcluster::tfidf::{blended_similarity, fit_tfidf, similarity_matrix};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rng(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}

// 1. Finite-difference gradient oracle ---------------------------------------

fn total_loss(params: &EncoderParams, views: &[TokenSequence], tau: f64) -> f64 {
    let rows: Vec<f64> = views
        .iter()
        .flat_map(|v| params.forward(v).unwrap().output.to_vec())
        .collect();
    let m = Array2::from_shape_vec((views.len(), params.output_dim()), rows).unwrap();
    nt_xent_loss(&m, tau).unwrap()
}

fn analytic_grads(params: &EncoderParams, views: &[TokenSequence], tau: f64) -> Vec<f64> {
    let caches: Vec<_> = views.iter().map(|v| params.forward(v).unwrap()).collect();
    let mut m = Array2::zeros((views.len(), params.output_dim()));
    for (i, c) in caches.iter().enumerate() {
        m.row_mut(i).assign(&c.output);
    }
    let (_, g) = nt_xent(&m, tau).unwrap();
    let mut grads = EncoderGrads::zeros_like(params);
    for (i, (v, c)) in views.iter().zip(&caches).enumerate() {
        params.backward(v, c, g.row(i), &mut grads).unwrap();
    }
    grads.tensors().concat()
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    diff / na.max(nb).max(1e-12)
}

fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1);
    let mut worst_chain = 0.0f64;
    let mut worst_loss = 0.0f64;
    let h = 1e-5;
    let vocab = Vocabulary::from_tokens((0..10).map(|i| format!("w{i}"))).unwrap();
    for instance in 0..50 {
        let b = [2, 3, 4][r.random_range(0..3)];
        let d_out = [3, 8][r.random_range(0..2)];
        let tau = [0.1, 0.5, 1.0][r.random_range(0..3)];
        let d = 4;

        // NT-Xent alone, with respect to the embeddings.
        let x = Array2::from_shape_fn((2 * b, d_out), |_| r.random_range(-1.0..1.0));
        let (_, g) = nt_xent(&x, tau).unwrap();
        let mut numeric = Vec::with_capacity(x.len());
        for idx in 0..x.len() {
            let mut plus = x.clone();
            let mut minus = x.clone();
            plus.as_slice_mut().unwrap()[idx] += h;
            minus.as_slice_mut().unwrap()[idx] -= h;
            numeric.push((nt_xent_loss(&plus, tau).unwrap() - nt_xent_loss(&minus, tau).unwrap()) / (2.0 * h));
        }
        worst_loss = worst_loss.max(relative_error(g.as_slice().unwrap(), &numeric));

        // Full chain through the encoder to its parameters.
        let mut params = EncoderParams::init(
            vocab.len(),
            EncoderConfig {
                embed_dim: d,
                output_dim: Some(d_out),
            },
            instance,
        )
        .unwrap();
        params.embedding.mapv_inplace(|_| r.random_range(-1.0..1.0));
        if let Some(p) = &mut params.projection {
            p.weight.mapv_inplace(|_| r.random_range(-0.8..0.8));
            p.bias.mapv_inplace(|_| r.random_range(-0.3..0.3));
        }
        let views: Vec<TokenSequence> = (0..2 * b)
            .map(|_| {
                let len = r.random_range(1..=6);
                let text: Vec<String> = (0..len).map(|_| format!("w{}", r.random_range(0..12))).collect();
                tokenize(&text.join(" "), &vocab, 8).unwrap()
            })
            .collect();
        let analytic = analytic_grads(&params, &views, tau);
        let mut numeric = Vec::with_capacity(analytic.len());
        let n_tensors = params.tensors().len();
        for t in 0..n_tensors {
            let len = params.tensors()[t].len();
            for i in 0..len {
                let orig = params.tensors()[t][i];
                params.tensors_mut()[t][i] = orig + h;
                let lp = total_loss(&params, &views, tau);
                params.tensors_mut()[t][i] = orig - h;
                let lm = total_loss(&params, &views, tau);
                params.tensors_mut()[t][i] = orig;
                numeric.push((lp - lm) / (2.0 * h));
            }
        }
        worst_chain = worst_chain.max(relative_error(&analytic, &numeric));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst_loss < 1e-4 && worst_chain < 1e-4, || {
        format!("max relative error: loss {worst_loss:.2e}, encoder chain {worst_chain:.2e}")
    })?;
    ensure(secs < 10.0, || format!("took {secs:.1}s"))?;
    Ok(format!(
        "50 instances, max rel err {worst_loss:.1e} (loss) / {worst_chain:.1e} (encoder chain), {secs:.2}s"
    ))
}

// 2. NT-Xent closed forms ------------------------------------------------------

fn closed_forms() -> Outcome {
    let mut worst = 0.0f64;
    let mut r = rng(2);
    for b in 2..=8 {
        let row: Vec<f64> = (0..5).map(|_| r.random_range(-1.0..1.0)).collect();
        let x = Array2::from_shape_fn((2 * b, 5), |(_, j)| row[j]);
        let l = nt_xent_loss(&x, 0.5).unwrap();
        let err = (l - ((2 * b - 1) as f64).ln()).abs();
        worst = worst.max(err);
        ensure(err <= 1e-9, || format!("collapse B={b}: {l} vs ln({})", 2 * b - 1))?;
    }
    let x = ndarray::array![[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]];
    let l = nt_xent_loss(&x, 1.0).unwrap();
    let e = std::f64::consts::E;
    let expected = -(e / (e + 2.0)).ln();
    ensure((l - expected).abs() <= 1e-6, || format!("orthogonal case {l} vs {expected}"))?;
    Ok(format!("collapse max err {worst:.1e} for B=2..8; orthogonal case {l:.6}"))
}

// 3. Hungarian and accuracy oracle ---------------------------------------------

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn assignment_oracle() -> Outcome {
    let mut r = rng(3);
    let perms: Vec<Vec<Vec<usize>>> = (0..=6).map(permutations).collect();
    for case in 0..1000 {
        let rows = r.random_range(1..=6);
        let cols = if case % 3 == 0 { r.random_range(1..=6) } else { rows };
        let cost = Array2::from_shape_fn((rows, cols), |_| r.random_range(-20..=20) as f64);
        let n = rows.max(cols);
        let at = |i: usize, j: usize| if i < rows && j < cols { cost[[i, j]] } else { 0.0 };
        let brute = perms[n]
            .iter()
            .map(|p| (0..n).map(|i| at(i, p[i])).sum::<f64>())
            .fold(f64::INFINITY, f64::min);
        let got = hungarian(&cost).map_err(|e| e.to_string())?;
        let recomputed: f64 = got.row_to_col.iter().enumerate().map(|(i, &j)| at(i, j)).sum();
        ensure(got.cost == brute && recomputed == brute, || {
            format!("case {case}: hungarian {} vs exhaustive {brute}", got.cost)
        })?;
    }
    for case in 0..1000 {
        let n = r.random_range(1..=60);
        let kl = r.random_range(1..=6);
        let kc = r.random_range(1..=6);
        let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..kl)).collect();
        let clusters: Vec<usize> = (0..n).map(|_| r.random_range(0..kc)).collect();
        let base = clustering_accuracy(&labels, &clusters).map_err(|e| e.to_string())?.acc;
        let mut pl: Vec<usize> = (0..kl).collect();
        let mut pc: Vec<usize> = (0..kc).collect();
        pl.shuffle(&mut r);
        pc.shuffle(&mut r);
        let l2: Vec<usize> = labels.iter().map(|&l| pl[l]).collect();
        let c2: Vec<usize> = clusters.iter().map(|&c| pc[c]).collect();
        let permuted = clustering_accuracy(&l2, &c2).map_err(|e| e.to_string())?.acc;
        // Exhaustive best mapping over the padded label set.
        let k = kl.max(kc);
        let mut counts = vec![vec![0usize; k]; k];
        for (&l, &c) in labels.iter().zip(&clusters) {
            counts[c][l] += 1;
        }
        let best = perms[k]
            .iter()
            .map(|p| (0..k).map(|c| counts[c][p[c]]).sum::<usize>())
            .max()
            .unwrap();
        let exhaustive = best as f64 / n as f64;
        ensure(base == permuted && base == exhaustive, || {
            format!("case {case}: acc {base}, permuted {permuted}, exhaustive {exhaustive}")
        })?;
    }
    Ok("1000 assignment instances match exhaustive search; ACC invariant over 1000 relabelings".into())
}

// 4. AMI oracle ------------------------------------------------------------------

fn binom(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn brute_emi(a: &[usize], b: &[usize], n: usize) -> f64 {
    let mut emi = 0.0;
    for &ai in a {
        for &bj in b {
            let total = binom(n as u64, bj as u64) as f64;
            for nij in 1..=ai.min(bj) {
                if bj < nij || n - ai < bj - nij {
                    continue;
                }
                let ways = binom(ai as u64, nij as u64) * binom((n - ai) as u64, (bj - nij) as u64);
                if ways == 0 {
                    continue;
                }
                let p = ways as f64 / total;
                let x = nij as f64;
                emi += p * x / n as f64 * (n as f64 * x / (ai as f64 * bj as f64)).ln();
            }
        }
    }
    emi
}

fn ami_oracle() -> Outcome {
    let mut r = rng(4);
    for _ in 0..50 {
        let n = r.random_range(2..=200);
        let k = r.random_range(1..=8);
        let l: Vec<usize> = (0..n).map(|_| r.random_range(0..k)).collect();
        let ami = adjusted_mutual_information(&l, &l).map_err(|e| e.to_string())?;
        let distinct = l.iter().collect::<std::collections::HashSet<_>>().len();
        if distinct > 1 {
            ensure((ami - 1.0).abs() <= 1e-9, || format!("identical partitions gave {ami}"))?;
        }
    }
    let mut worst_random = 0.0f64;
    for seed in 0..20 {
        let mut r = rng(1000 + seed);
        let a: Vec<usize> = (0..1000).map(|_| r.random_range(0..4)).collect();
        let b: Vec<usize> = (0..1000).map(|_| r.random_range(0..4)).collect();
        let ami = adjusted_mutual_information(&a, &b).map_err(|e| e.to_string())?;
        worst_random = worst_random.max(ami.abs());
    }
    ensure(worst_random < 0.05, || format!("independent partitions |AMI| up to {worst_random}"))?;
    let mut worst_emi = 0.0f64;
    for _ in 0..50 {
        let n = r.random_range(2..=30);
        let ka = r.random_range(1..=5);
        let kb = r.random_range(1..=5);
        let a: Vec<usize> = (0..n).map(|_| r.random_range(0..ka)).collect();
        let b: Vec<usize> = (0..n).map(|_| r.random_range(0..kb)).collect();
        let table = contingency(&a, &b).map_err(|e| e.to_string())?;
        let rows: Vec<usize> = table.iter().map(|r| r.iter().sum()).collect();
        let cols: Vec<usize> = (0..table[0].len()).map(|j| table.iter().map(|r| r[j]).sum()).collect();
        let got = expected_mutual_information(&table);
        let want = brute_emi(&rows, &cols, n);
        worst_emi = worst_emi.max((got - want).abs());
    }
    ensure(worst_emi <= 1e-10, || format!("EMI deviates by {worst_emi:.2e}"))?;
    Ok(format!(
        "identical = 1; random |AMI| max {worst_random:.4} over 20 seeds; EMI max abs err {worst_emi:.1e}"
    ))
}

// 5. Shuffle & Divide invariants ----------------------------------------------

fn shuffle_divide_invariants() -> Outcome {
    let mut r = rng(5);
    let words = ["Alpha", "Beta", "Gamma", "Delta", "Epsilon", "Zeta"];
    let docs: Vec<Document> = (0..1000)
        .map(|i| {
            let m = r.random_range(2..=30);
            // Small word pool so that repeated sentences occur.
            let text: Vec<String> = (0..m)
                .map(|_| format!("{} {}.", words[r.random_range(0..6)], words[r.random_range(0..3)]))
                .collect();
            Document::new(format!("d{i}"), text.join(" "), None)
        })
        .collect();
    let mut violations = 0usize;
    let mut checked = 0usize;
    for doc in &docs {
        let m = doc.sentences.len();
        for _ in 0..100 {
            let seed: u64 = r.random();
            let pair = shuffle_divide(doc, &mut rng(seed)).map_err(|e| e.to_string())?;
            checked += 1;
            let mut ids: Vec<usize> = pair.sentence_ids_a.iter().chain(&pair.sentence_ids_b).copied().collect();
            ids.sort_unstable();
            let mut ok = ids == (0..m).collect::<Vec<_>>();
            ok &= pair.sentence_ids_a.len().abs_diff(pair.sentence_ids_b.len()) <= 1;
            ok &= pair.sentence_ids_a.len() == m.div_ceil(2);
            let mut from_views: Vec<&str> = pair
                .sentence_ids_a
                .iter()
                .chain(&pair.sentence_ids_b)
                .map(|&i| doc.sentences[i].as_str())
                .collect();
            let mut original: Vec<&str> = doc.sentences.iter().map(String::as_str).collect();
            from_views.sort_unstable();
            original.sort_unstable();
            ok &= from_views == original;
            let join = |ids: &[usize]| ids.iter().map(|&i| doc.sentences[i].as_str()).collect::<Vec<_>>().join(" ");
            ok &= pair.view_a == join(&pair.sentence_ids_a) && pair.view_b == join(&pair.sentence_ids_b);
            ok &= pair.source_id == doc.id;
            if !ok {
                violations += 1;
            }
        }
    }
    ensure(violations == 0, || format!("{violations} violations"))?;
    Ok(format!("{checked} (document, seed) pairs, 0 violations"))
}

// 6. Blend identity at epoch 1 ------------------------------------------------

fn blend_identity() -> Outcome {
    let mut r = rng(6);
    for trial in 0..200 {
        let n = r.random_range(2..=25);
        let docs: Vec<Document> = (0..n)
            .map(|i| {
                let text: Vec<String> = (0..r.random_range(1..=15)).map(|_| format!("t{}", r.random_range(0..30))).collect();
                Document::new(format!("d{i}"), text.join(" "), None)
            })
            .collect();
        let corpus = Corpus::new(docs, None, None).unwrap();
        let model = fit_tfidf(&corpus).map_err(|e| e.to_string())?;
        let sim_tfidf = similarity_matrix(&model.transform_corpus(&corpus));
        let sim_model = Array2::from_shape_fn((n, n), |_| r.random_range(-1.0..1.0));
        let alpha = match trial % 4 {
            0 => 0.0,
            1 => 1.0,
            _ => r.random::<f64>(),
        };
        let blended = blended_similarity(&sim_tfidf, &sim_model, alpha, 1).map_err(|e| e.to_string())?;
        let same = blended.iter().zip(sim_tfidf.iter()).all(|(a, b)| a.to_bits() == b.to_bits());
        ensure(same, || format!("trial {trial}, alpha {alpha}: epoch-1 blend differs"))?;
    }
    Ok("200 random matrices, alpha in {0, 1, random}: bit-identical".into())
}

// 7. Spherical k-means ---------------------------------------------------------

fn unit_cloud(r: &mut StreamRng, centers: &[Vec<f64>], per: usize, noise: f64) -> Array2<f64> {
    let d = centers[0].len();
    let mut rows = Vec::new();
    for c in centers {
        for _ in 0..per {
            rows.extend(c.iter().map(|v| v + r.random_range(-noise..noise)));
        }
    }
    Array2::from_shape_vec((centers.len() * per, d), rows).unwrap()
}

fn kmeans_properties() -> Outcome {
    let mut r = rng(7);
    let mut min_step = f64::INFINITY;
    for run in 0..100u64 {
        let k = r.random_range(2..=6);
        let d = r.random_range(2..=10);
        let n = r.random_range(k..=120);
        let x = Array2::from_shape_fn((n, d), |_| r.random_range(-1.0..1.0));
        let cfg = KMeansConfig {
            restarts: 1,
            ..KMeansConfig::new(k, run)
        };
        let m = spherical_kmeans(&x, &cfg).map_err(|e| e.to_string())?;
        for w in m.objective_trace.windows(2) {
            min_step = min_step.min(w[1] - w[0]);
            ensure(w[1] >= w[0] - 1e-12 * n as f64, || {
                format!("run {run}: objective fell from {} to {}", w[0], w[1])
            })?;
        }
        ensure((m.objective_for(&x).map_err(|e| e.to_string())? - m.objective).abs() < 1e-9, || {
            format!("run {run}: stored objective differs from recomputed")
        })?;
    }
    let mut worst = 0.0f64;
    for inst in 0..30 {
        let n_each = r.random_range(2..=6);
        let d = r.random_range(2..=5);
        let c1: Vec<f64> = (0..d).map(|_| r.random_range(-1.0..1.0)).collect();
        let c2: Vec<f64> = c1.iter().map(|v| -v).collect();
        let x = unit_cloud(&mut r, &[c1, c2], n_each, 0.15);
        let n = x.nrows();
        let unit = sadcluster::cluster::normalize_rows(&x).map_err(|e| e.to_string())?;
        let mut best = f64::NEG_INFINITY;
        for mask in 1u32..(1 << (n - 1)) {
            let mut s = [Array1::<f64>::zeros(d), Array1::<f64>::zeros(d)];
            for i in 0..n {
                let side = usize::from(mask >> i & 1 == 1);
                s[side] += &unit.row(i);
            }
            best = best.max(s[0].dot(&s[0]).sqrt() + s[1].dot(&s[1]).sqrt());
        }
        let m = spherical_kmeans(&x, &KMeansConfig::new(2, inst)).map_err(|e| e.to_string())?;
        worst = worst.max((m.objective - best).abs());
        ensure((m.objective - best).abs() < 1e-9, || {
            format!("instance {inst}: k-means {} vs exhaustive {best}", m.objective)
        })?;
    }
    Ok(format!(
        "100 runs monotone (smallest step {min_step:.1e}); 30 exhaustive 2-partition checks, max gap {worst:.1e}"
    ))
}

// 8. TF-IDF counting oracle ----------------------------------------------------

fn oracle_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn tfidf_oracle() -> Outcome {
    let texts = [
        "The cat sat on the mat.",
        "The dog sat on the log!",
        "Cats and dogs: friends or foes?",
        "A quick brown fox jumps over the lazy dog.",
        "Mat, log, and rug were all sat upon.",
        "Foxes are quick; dogs are loyal; cats are aloof.",
        "the THE The tHe",
        "Numbers like 42 and 7 count as tokens, 42 twice.",
        "Rugs, mats and logs.",
        "An aloof cat, a loyal dog, a quick fox.",
    ];
    let docs = texts
        .iter()
        .enumerate()
        .map(|(i, t)| Document::new(format!("d{i}"), *t, None))
        .collect();
    let corpus = Corpus::new(docs, None, None).unwrap();
    let model = fit_tfidf(&corpus).map_err(|e| e.to_string())?;

    let tokenized: Vec<Vec<String>> = texts.iter().map(|t| oracle_tokens(t)).collect();
    let mut vocab: Vec<String> = tokenized.iter().flatten().cloned().collect();
    vocab.sort();
    vocab.dedup();
    let n = texts.len() as f64;
    let idf: Vec<f64> = vocab
        .iter()
        .map(|w| {
            let df = tokenized.iter().filter(|d| d.contains(w)).count() as f64;
            ((1.0 + n) / (1.0 + df)).ln() + 1.0
        })
        .collect();
    ensure(model.index_to_token() == vocab.iter().map(String::as_str).collect::<Vec<_>>(), || {
        "vocabulary order differs".into()
    })?;
    let mut worst = 0.0f64;
    for (i, doc) in tokenized.iter().enumerate() {
        let mut counts: HashMap<&str, f64> = HashMap::new();
        for w in doc {
            *counts.entry(w).or_default() += 1.0;
        }
        let mut dense: Vec<f64> = vocab
            .iter()
            .enumerate()
            .map(|(j, w)| counts.get(w.as_str()).copied().unwrap_or(0.0) * idf[j])
            .collect();
        let norm = dense.iter().map(|v| v * v).sum::<f64>().sqrt();
        dense.iter_mut().for_each(|v| *v /= norm);
        let got = model.transform(texts[i]).to_dense();
        for (a, b) in got.iter().zip(&dense) {
            worst = worst.max((a - b).abs());
        }
        for (j, w) in vocab.iter().enumerate() {
            worst = worst.max((model.idf[model.vocabulary[w]] - idf[j]).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("max deviation {worst:.2e}"))?;
    Ok(format!("{} terms, max deviation {worst:.1e}", vocab.len()))
}

// 9. End-to-end synthetic run ------------------------------------------------

fn end_to_end_synthetic() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("synth.jsonl");
    sadcluster::cli::cmd_synth(&sadcluster::cli::SynthArgs {
        topics: 4,
        docs_per_topic: 50,
        vocab_per_topic: 500,
        sentences: 8,
        min_words: 6,
        max_words: 12,
        overlap: 0.2,
        shared_vocab: 20,
        topic_zipf: 0.0,
        shared_zipf: 1.0,
        seed: 0,
        out: path.clone(),
    })
    .map_err(|e| e.to_string())?;
    let corpus = sadcluster::corpus::load_corpus(&path, sadcluster::corpus::CorpusFormat::Jsonl)
        .map_err(|e| e.to_string())?;
    ensure(corpus.documents.iter().all(|d| d.sentences.len() >= 8), || "documents under 8 sentences".into())?;

    let sad = TrainConfig {
        epochs: Some(30),
        ..TrainConfig::desk(Method::Sad, 4)
    };
    ensure(sad.batch_size == 32 && sad.encoder.output_dim == Some(64), || "unexpected preset".into())?;
    let out = train(&corpus, &sad).map_err(|e| e.to_string())?;
    let best = out.best_record().eval.acc.unwrap();
    let untrained = out.initial.acc.unwrap();

    let tps = TrainConfig {
        epochs: Some(1),
        ..TrainConfig::desk(Method::Tps, 4)
    };
    let tps_out = train(&corpus, &tps).map_err(|e| e.to_string())?;
    let match_rate = tps_out.history[0].label_match_rate.unwrap();
    let secs = start.elapsed().as_secs_f64();

    let summary = format!(
        "selected epoch {} ACC {best:.3} (untrained {untrained:.3}); TPS epoch-1 match {match_rate:.3}; {secs:.1}s",
        out.best_epoch
    );
    ensure(best >= 0.9, || format!("ACC below 0.9: {summary}"))?;
    ensure(best >= untrained + 0.2, || format!("gap below 0.2: {summary}"))?;
    ensure(match_rate >= 0.95, || format!("match rate below 0.95: {summary}"))?;
    ensure(secs < 120.0, || format!("too slow: {summary}"))?;
    Ok(summary)
}

// 10. Fine-tuning ordering -----------------------------------------------------

struct Split {
    corpus: Corpus,
    train: Corpus,
    test: Corpus,
}

fn split(seed: u64, train_per_topic: usize) -> Split {
    let corpus = generate_synthetic(&SynthConfig {
        seed,
        ..Default::default()
    })
    .unwrap();
    let index = |d: &Document| d.id.rsplit('-').next().unwrap().parse::<usize>().unwrap();
    let (tr, te): (Vec<Document>, Vec<Document>) =
        corpus.documents.iter().cloned().partition(|d| index(d) < train_per_topic);
    Split {
        train: Corpus::new(tr, None, Some(4)).unwrap(),
        test: Corpus::new(te, None, Some(4)).unwrap(),
        corpus,
    }
}

/// Mean held-out accuracy of (fresh, fresh + SaD, SaD-pretrained + SaD).
fn finetune_means(train_per_topic: usize, finetune: &FinetuneConfig) -> Result<[f64; 3], String> {
    let mut sums = [0.0; 3];
    let seeds = 5u64;
    for seed in 0..seeds {
        let s = split(seed, train_per_topic);
        let cfg = TrainConfig {
            seed,
            epochs: Some(30),
            ..TrainConfig::desk(Method::Sad, 4)
        };
        let pre = train(&s.corpus, &cfg).map_err(|e| e.to_string())?;
        let fresh = EncoderParams::init(pre.vocab.len(), cfg.encoder, seed).map_err(|e| e.to_string())?;
        let plain = FinetuneConfig {
            seed,
            use_sad: false,
            ..finetune.clone()
        };
        let aug = FinetuneConfig {
            use_sad: true,
            ..plain.clone()
        };
        let run = |p: &EncoderParams, c: &FinetuneConfig| {
            supervised_finetune(p, &pre.vocab, &s.train, &s.test, 4, c)
                .map(|o| o.test_accuracy)
                .map_err(|e| e.to_string())
        };
        sums[0] += run(&fresh, &plain)?;
        sums[1] += run(&fresh, &aug)?;
        sums[2] += run(&pre.best_params, &aug)?;
    }
    Ok(sums.map(|s| s / seeds as f64))
}

fn finetune_ordering() -> Outcome {
    let [fresh, fresh_sad, pre_sad] = finetune_means(25, &FinetuneConfig::default())?;
    let summary = format!(
        "25 train docs/topic, 5 seeds: fresh {fresh:.3}, fresh+SaD {fresh_sad:.3}, SaD-pretrained+SaD {pre_sad:.3}"
    );
    ensure(pre_sad >= fresh_sad && fresh_sad >= fresh - 0.02, || format!("ordering violated: {summary}"))?;
    Ok(summary)
}

fn low_label_diagnostic() -> Outcome {
    let cfg = FinetuneConfig {
        epochs: 3,
        ..FinetuneConfig::default()
    };
    let [fresh, fresh_sad, pre_sad] = finetune_means(2, &cfg)?;
    Ok(format!(
        "2 train docs/topic, 3 epochs: fresh {fresh:.3}, fresh+SaD {fresh_sad:.3}, SaD-pretrained+SaD {pre_sad:.3}"
    ))
}

// 11. Optional external-embedding path ---------------------------------------

fn external_embeddings() -> Option<Outcome> {
    let corpus = std::env::var_os("SADCLUSTER_20NG_CORPUS")?;
    let embeddings = std::env::var_os("SADCLUSTER_20NG_EMBEDDINGS")?;
    Some((|| {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let assign = dir.path().join("assign.json");
        let metrics = dir.path().join("metrics.json");
        sadcluster::cli::cmd_cluster(&sadcluster::cli::ClusterArgs {
            embeddings: embeddings.clone().into(),
            k: 20,
            seed: 0,
            restarts: 10,
            max_iter: 100,
            tol: 1e-6,
            out: assign.clone(),
        })
        .map_err(|e| e.to_string())?;
        sadcluster::cli::cmd_eval(&sadcluster::cli::EvalArgs {
            assignments: assign,
            corpus: Some(corpus.clone().into()),
            embeddings: Some(embeddings.clone().into()),
            silhouette_cap: 2000,
            seed: 0,
            tfidf_match: true,
            out: metrics.clone(),
        })
        .map_err(|e| e.to_string())?;
        let m: sadcluster::cli::EvalMetrics =
            serde_json::from_slice(&std::fs::read(&metrics).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let rate = m.tfidf_label_match_rate.unwrap_or(f64::NAN);
        Ok(format!(
            "ACC {:.4} AMI {:.4} SS {:.4}; TF-IDF top-1 match {rate:.3} (reference 0.85, band 0.80..0.90: {})",
            m.acc.unwrap_or(f64::NAN),
            m.ami.unwrap_or(f64::NAN),
            m.silhouette.unwrap_or(f64::NAN),
            if (0.80..=0.90).contains(&rate) { "inside" } else { "outside" }
        ))
    })())
}

fn run(f: fn() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into()))
    })
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("gradient oracle", gradient_oracle),
        ("NT-Xent closed forms", closed_forms),
        ("Hungarian / ACC oracle", assignment_oracle),
        ("AMI oracle", ami_oracle),
        ("Shuffle & Divide invariants", shuffle_divide_invariants),
        ("epoch-1 blend identity", blend_identity),
        ("spherical k-means", kmeans_properties),
        ("TF-IDF oracle", tfidf_oracle),
        ("end-to-end synthetic", end_to_end_synthetic),
        ("fine-tuning ordering", finetune_ordering),
    ];
    let filter = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if filter.as_ref().is_some_and(|f| *f != id) {
            continue;
        }
        match run(*f) {
            Ok(detail) => println!("PASS {id:>2} {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {id:>2} {name}: {detail}");
            }
        }
    }
    if filter.is_none() || filter.as_deref() == Some("10") {
        match run(low_label_diagnostic) {
            Ok(d) => println!("INFO 10 low-label regime (not gating): {d}"),
            Err(d) => println!("INFO 10 low-label regime (not gating) errored: {d}"),
        }
    }
    if filter.is_none() || filter.as_deref() == Some("11") {
        match external_embeddings() {
            None => println!("SKIP 11 external 20NG embeddings (optional): set SADCLUSTER_20NG_CORPUS and SADCLUSTER_20NG_EMBEDDINGS"),
            Some(Ok(d)) => println!("INFO 11 external 20NG embeddings (optional): {d}"),
            Some(Err(d)) => println!("INFO 11 external 20NG embeddings (optional) errored: {d}"),
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
