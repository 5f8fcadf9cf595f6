//! Acceptance suite: one PASS/FAIL line per criterion.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2, Axis};
use rand::Rng;

use spheretopic::corpus::{encode_embeddings, load_corpus, write_embeddings, write_vocabulary};
use spheretopic::metrics::{nmi, topic_diversity, uci, umass, CoocCounts, UCI_EPSILON};
use spheretopic::rng::substream;
use spheretopic::synthetic::{circle_subspace, planted_topics, PlantedSpec};
use spheretopic::theorem::verify_equivalence;
use spheretopic::train::{e_step, encode_tokens, gradient_check, pretrain, train, Objective, Terms, TrainConfig};
use spheretopic::{
    target_distribution, topic_posterior, AttentionParams, Checkpoint, Corpus, LatentModel, Mlp, PosClass,
    TokenRecord, Vocabulary,
};

const THEOREM_TOLERANCE: f64 = 1e-9;
const THEOREM_BUDGET: Duration = Duration::from_secs(5);
const GRADIENT_TOLERANCE: f64 = 1e-4;
const GRADIENT_BUDGET: Duration = Duration::from_secs(30);
const TARGET_TOLERANCE: f64 = 1e-12;
const HAND_TOLERANCE: f64 = 1e-3;
const ENTROPY_SLACK: f64 = 1e-12;
const RECOVERY_NMI: f64 = 0.8;
const RECOVERY_SEEDS_NEEDED: usize = 4;
const RECOVERY_BUDGET: Duration = Duration::from_secs(300);
const PRETRAIN_RATIO: f64 = 0.01;
const PRETRAIN_BUDGET: Duration = Duration::from_secs(60);
const METRIC_TOLERANCE: f64 = 1e-12;
const ROW_SUM_TOLERANCE: f64 = 1e-9;
const RESCALE_TOLERANCE: f64 = 1e-12;
const UNIFORM_TOLERANCE: f64 = 1e-12;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn theorem_identity() -> Outcome {
    let start = Instant::now();
    let v = verify_equivalence(0, 8, 32, 100, THEOREM_TOLERANCE).map_err(|e| e.to_string())?;
    let t = start.elapsed();
    check(
        v.max_deviation < THEOREM_TOLERANCE && t < THEOREM_BUDGET,
        format!("max deviation {:.3e} over 100 trials in {:.2?}", v.max_deviation, t),
    )
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = substream(0, "toy-model");
    let vocab = Vocabulary::from_surfaces(["a", "b", "c", "d"]).unwrap();
    let pos = [PosClass::Noun, PosClass::Verb, PosClass::Other];
    let docs = (0..2u64)
        .map(|d| {
            let tokens = (0..3)
                .map(|t| TokenRecord {
                    word_id: rng.random_range(0..4),
                    pos: pos[(d as usize + t) % 3],
                    embedding: (0..8).map(|_| rng.random_range(-1.0..1.0)).collect(),
                })
                .collect();
            (d, tokens)
        })
        .collect();
    let corpus = Corpus::from_documents(8, docs, vocab).unwrap();
    let encoder = Mlp::init(&[8, 7, 6, 4], &mut rng);
    let decoder = Mlp::init(&[4, 6, 7, 8], &mut rng);
    let topics = Array2::from_shape_simple_fn((3, 4), || rng.random_range(-1.0..1.0));
    let model = LatentModel::new(encoder, decoder, topics, 10.0).unwrap();
    let attention = AttentionParams::init(8, 5, &mut rng);
    let mut generic = Array2::zeros((2, 8));
    for d in 0..2 {
        generic.row_mut(d).assign(&corpus.generic_document_embedding(d).unwrap());
    }
    let targets = e_step(&model, &corpus).map_err(|e| e.to_string())?;
    let objective = Objective {
        corpus: &corpus,
        generic: generic.view(),
        targets: targets.view(),
        lambda: 0.1,
        content_only_attention: false,
        terms: Terms::ALL,
    };
    let report = gradient_check(&objective, &model, &attention, &[0, 1], GRADIENT_TOLERANCE).map_err(|e| e.to_string())?;
    let t = start.elapsed();
    check(
        t < GRADIENT_BUDGET,
        format!(
            "max relative error {:.3e} at {}[{}] over {} entries ({} excluded at rectifier kinks) in {:.2?}",
            report.max_relative_error,
            report.worst_parameter,
            report.worst_index,
            report.entries_checked,
            report.kink_crossings,
            t
        ),
    )
}

fn random_distributions(rng: &mut impl Rng, n: usize, k: usize) -> Array2<f64> {
    let mut p = Array2::from_shape_simple_fn((n, k), || rng.random_range(1e-3..1.0));
    for mut row in p.rows_mut() {
        let s = row.sum();
        row /= s;
    }
    p
}

/// The contract's `Q[i,k] ∝ P[i,k]² / (s_k + ε)` written as plain loops.
fn naive_target(p: &Array2<f64>) -> Array2<f64> {
    const EPS: f64 = 1e-12;
    let (n, k) = p.dim();
    let mut s = vec![0.0; k];
    for j in 0..k {
        for i in 0..n {
            s[j] += p[[i, j]];
        }
        s[j] += EPS;
    }
    let mut q = Array2::zeros((n, k));
    for i in 0..n {
        let mut z = 0.0;
        for j in 0..k {
            z += p[[i, j]] * p[[i, j]] / s[j];
        }
        for j in 0..k {
            q[[i, j]] = p[[i, j]] * p[[i, j]] / s[j] / z;
        }
    }
    q
}

fn target_oracle() -> Outcome {
    let mut rng = substream(0, "acceptance-target");
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let n = rng.random_range(1..30);
        let k = rng.random_range(2..8);
        let p = random_distributions(&mut rng, n, k);
        let d = (&target_distribution(p.view()) - &naive_target(&p)).fold(0.0f64, |m, x| m.max(x.abs()));
        worst = worst.max(d);
    }
    let hand = target_distribution(ndarray::array![[0.9, 0.1], [0.5, 0.5]].view());
    let expected = ndarray::array![[0.972, 0.028], [0.300, 0.700]];
    let hand_dev = (&hand - &expected).fold(0.0f64, |m, x| m.max(x.abs()));
    check(
        worst <= TARGET_TOLERANCE && hand_dev <= HAND_TOLERANCE,
        format!(
            "max deviation from double loop {worst:.3e} over 200 inputs; hand case {:.4?} off by {hand_dev:.2e}",
            hand.as_slice().unwrap()
        ),
    )
}

fn entropy(row: ndarray::ArrayView1<'_, f64>) -> f64 {
    -row.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// Alternately normalizes rows to 1 and columns to `n/k` until both hold.
fn balanced(rng: &mut impl Rng, n: usize, k: usize) -> Array2<f64> {
    let mut p = random_distributions(rng, n, k);
    let col = n as f64 / k as f64;
    for _ in 0..10_000 {
        for mut c in p.columns_mut() {
            let s = c.sum();
            c *= col / s;
        }
        for mut r in p.rows_mut() {
            let s = r.sum();
            r /= s;
        }
        let spread = p.sum_axis(Axis(0)).fold(0.0f64, |m, s| m.max((s - col).abs()));
        if spread < 1e-13 * col {
            break;
        }
    }
    p
}

fn sharpening() -> Outcome {
    let mut rng = substream(0, "acceptance-sharpening");
    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0;
    for _ in 0..1000 {
        let k = rng.random_range(2..6);
        let n = k * rng.random_range(1..6);
        let p = balanced(&mut rng, n, k);
        let q = target_distribution(p.view());
        for (qr, pr) in q.rows().into_iter().zip(p.rows()) {
            let gap = entropy(qr) - entropy(pr);
            worst = worst.max(gap);
            if gap > ENTROPY_SLACK {
                violations += 1;
            }
        }
    }
    check(
        violations == 0,
        format!("largest H(Q row) - H(P row) {worst:.3e} over 1000 matrices, {violations} violations"),
    )
}

fn argmax(row: ndarray::ArrayView1<'_, f64>) -> usize {
    row.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, &x)| if x > b.1 { (i, x) } else { b })
        .0
}

fn recovery_run(seed: u64) -> Result<f64, String> {
    let planted = planted_topics(&PlantedSpec {
        seed,
        ..PlantedSpec::default()
    });
    let config = TrainConfig {
        num_topics: 5,
        latent_dim: 8,
        epochs: 20,
        batch_size: 16,
        seed,
        ..TrainConfig::default()
    };
    let out = train(&planted.corpus, &config).map_err(|e| e.to_string())?;
    let z = encode_tokens(&out.model, &planted.corpus).map_err(|e| e.to_string())?;
    let p = out.model.posterior(z.view()).map_err(|e| e.to_string())?;
    let predicted: Vec<usize> = p.rows().into_iter().map(argmax).collect();
    nmi(&predicted, &planted.token_labels).map_err(|e| e.to_string())
}

fn synthetic_recovery() -> Outcome {
    let start = Instant::now();
    let results: Vec<Result<f64, String>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..5).map(|seed| s.spawn(move || recovery_run(seed))).collect();
        handles.into_iter().map(|h| h.join().expect("worker")).collect()
    });
    let t = start.elapsed();
    let scores = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let passing = scores.iter().filter(|&&x| x >= RECOVERY_NMI).count();
    check(
        passing >= RECOVERY_SEEDS_NEEDED && t < RECOVERY_BUDGET,
        format!("token NMI per seed {scores:.3?}, {passing}/5 at least {RECOVERY_NMI}, in {t:.1?}"),
    )
}

fn pretraining_efficacy() -> Outcome {
    let start = Instant::now();
    let corpus = circle_subspace(8, 1000, 10, 1);
    let config = TrainConfig {
        num_topics: 2,
        latent_dim: 2,
        pretrain_epochs: 30,
        epochs: 0,
        learning_rate: 1e-3,
        batch_size: 16,
        encoder_hidden: vec![64, 64],
        decoder_hidden: vec![64, 64],
        ..TrainConfig::default()
    };
    let p = pretrain(&corpus, &config).map_err(|e| e.to_string())?;
    let t = start.elapsed();
    let ratio = p.losses[p.losses.len() - 1] / p.losses[0];
    check(
        ratio < PRETRAIN_RATIO && t < PRETRAIN_BUDGET,
        format!(
            "mean L_pre {:.4e} -> {:.4e} (ratio {ratio:.2e}) in {t:.2?}",
            p.losses[0],
            p.losses[p.losses.len() - 1]
        ),
    )
}

fn metric_documents() -> Vec<Vec<u32>> {
    vec![
        vec![0, 1, 2, 3, 0, 4],
        vec![1, 2, 5],
        vec![0, 2, 6, 7, 8, 9, 1, 0, 3, 4, 5, 6, 2],
        vec![3, 3, 3],
        vec![4, 5, 6, 7],
        vec![0, 9],
        vec![8, 1, 8, 2, 8, 3, 8, 4, 8, 5, 8, 6, 8, 7],
        vec![2],
        vec![0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 0, 1],
        vec![7, 5, 3, 1],
    ]
}

/// Scores of every pair `(i, j)`, `j` ranked above `i`, averaged per topic then over topics.
fn brute_average(topics: &[Vec<u32>], pair: impl Fn(u32, u32) -> f64) -> f64 {
    let per_topic: Vec<f64> = topics
        .iter()
        .map(|t| {
            let mut sum = 0.0;
            let mut n = 0;
            for i in 0..t.len() {
                for j in 0..i {
                    sum += pair(t[i], t[j]);
                    n += 1;
                }
            }
            sum / n as f64
        })
        .collect();
    per_topic.iter().sum::<f64>() / per_topic.len() as f64
}

fn metric_oracles() -> Outcome {
    let docs = metric_documents();
    let topics = vec![vec![0, 1, 2, 3, 4], vec![8, 6, 7, 9, 5]];
    let window = 3;
    let counts = CoocCounts::build(docs.iter().map(|d| d.as_slice()), topics.iter().flatten().copied(), window)
        .map_err(|e| e.to_string())?;
    let got_umass = umass(&topics, &counts, 5).map_err(|e| e.to_string())?.score;
    let got_uci = uci(&topics, &counts, 5).map_err(|e| e.to_string())?.score;

    let d = |ws: &[u32]| docs.iter().filter(|doc| ws.iter().all(|w| doc.contains(w))).count() as f64;
    let want_umass = brute_average(&topics, |wi, wj| ((d(&[wi, wj]) + 1.0) / d(&[wj])).ln());
    let wins: Vec<&[u32]> = docs
        .iter()
        .flat_map(|doc| {
            if doc.len() <= window {
                vec![doc.as_slice()]
            } else {
                doc.windows(window).collect()
            }
        })
        .collect();
    let total = wins.len() as f64;
    let pw = |ws: &[u32]| wins.iter().filter(|w| ws.iter().all(|x| w.contains(x))).count() as f64 / total;
    // PMI is symmetric, so the pair orientation does not matter.
    let want_uci = brute_average(&topics, |wi, wj| ((pw(&[wi, wj]) + UCI_EPSILON) / (pw(&[wi]) * pw(&[wj]))).ln());

    let diversity = topic_diversity(&[vec![1, 2, 3], vec![3, 4, 5]], 3).map_err(|e| e.to_string())?;
    let same = nmi(&[0, 0, 1, 1, 2, 2], &[0, 0, 1, 1, 2, 2]).map_err(|e| e.to_string())?;
    let trivial = nmi(&[0, 0, 0, 0, 0, 0], &[0, 1, 2, 0, 1, 2]).map_err(|e| e.to_string())?;
    let du = (got_umass - want_umass).abs();
    let dc = (got_uci - want_uci).abs();
    check(
        du <= METRIC_TOLERANCE
            && dc <= METRIC_TOLERANCE
            && (diversity - 5.0 / 6.0).abs() <= METRIC_TOLERANCE
            && same == 1.0
            && trivial == 0.0,
        format!(
            "umass {got_umass:.6} (off {du:.1e}), uci {got_uci:.6} (off {dc:.1e}), diversity {diversity:.6}, nmi identical {same}, trivial {trivial}"
        ),
    )
}

fn posterior_invariants() -> Outcome {
    let mut rng = substream(0, "acceptance-posterior");
    let (mut row_dev, mut scale_dev, mut uniform_dev) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..1000 {
        let n = rng.random_range(1..6);
        let k = rng.random_range(2..8);
        let r = rng.random_range(2..10);
        let z = Array2::from_shape_simple_fn((n, r), || rng.random_range(-1.0..1.0));
        let t = Array2::from_shape_simple_fn((k, r), || rng.random_range(-1.0..1.0));
        let kappa = rng.random_range(0.0..100.0);
        let scales = Array1::from_shape_simple_fn(n, || 10f64.powf(rng.random_range(-3.0..3.0)));
        let p = topic_posterior(z.view(), t.view(), kappa).map_err(|e| e.to_string())?;
        for row in p.rows() {
            row_dev = row_dev.max((row.sum() - 1.0).abs());
        }
        let scaled = &z * &scales.insert_axis(Axis(1));
        let ps = topic_posterior(scaled.view(), t.view(), kappa).map_err(|e| e.to_string())?;
        scale_dev = scale_dev.max((&p - &ps).fold(0.0f64, |m, x| m.max(x.abs())));
        let p0 = topic_posterior(z.view(), t.view(), 0.0).map_err(|e| e.to_string())?;
        uniform_dev = uniform_dev.max(p0.fold(0.0f64, |m, &x| m.max((x - 1.0 / k as f64).abs())));
    }
    check(
        row_dev <= ROW_SUM_TOLERANCE && scale_dev <= RESCALE_TOLERANCE && uniform_dev <= UNIFORM_TOLERANCE,
        format!(
            "row-sum deviation {row_dev:.1e}, rescaling deviation {scale_dev:.1e}, kappa=0 deviation {uniform_dev:.1e} over 1000 inputs"
        ),
    )
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spheretopic"))
}

fn run_ok(args: &[&str]) -> Result<(), String> {
    let o = bin().args(args).output().map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&o.stderr).trim()))
    }
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

const PIPELINE_CONFIG: &str = "\
num_topics = 5
latent_dim = 8
epochs = 3
pretrain_epochs = 3
batch_size = 16
encoder_hidden = 64,64
decoder_hidden = 64,64
";

fn pipeline(root: &Path, emb: &Path, vocab: &Path, labels: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    fs::create_dir_all(root).map_err(|e| e.to_string())?;
    let conf = root.join("run.conf");
    fs::write(&conf, PIPELINE_CONFIG).map_err(|e| e.to_string())?;
    let ingested = root.join("ingested");
    run_ok(&["ingest", "--embeddings", path(emb), "--vocab", path(vocab), "--out", path(&ingested)])?;
    let (e, v) = (ingested.join("embeddings.bin"), ingested.join("vocab.tsv"));
    let corpus = ["--config", path(&conf), "--embeddings", path(&e), "--vocab", path(&v)];
    let train_dir = root.join("train");
    run_ok(&[&["train"], &corpus[..], &["--seed", "7", "--out", path(&train_dir)]].concat())?;
    let ck = train_dir.join("checkpoint.bin");
    let topics_dir = root.join("topics");
    run_ok(&[&["topics"], &corpus[..], &["--checkpoint", path(&ck), "--out", path(&topics_dir)]].concat())?;
    let eval_dir = root.join("eval");
    run_ok(
        &[
            &["eval"],
            &corpus[..],
            &["--checkpoint", path(&ck), "--out", path(&eval_dir), "--labels", path(labels), "--nmi"],
        ]
        .concat(),
    )?;
    let mut files = Vec::new();
    for (dir, names) in [
        (&train_dir, &["checkpoint.bin", "epoch_log.tsv", "topics.json", "doc_topics.tsv", "latent_words.tsv"][..]),
        (&topics_dir, &["topics.json", "doc_topics.tsv", "latent_words.tsv"][..]),
        (&eval_dir, &["metrics.json"][..]),
    ] {
        for name in names {
            let p = dir.join(name);
            files.push((format!("{}/{name}", dir.file_name().unwrap().to_string_lossy()), fs::read(&p).map_err(|e| e.to_string())?));
        }
    }
    Ok(files)
}

fn write_planted(dir: &Path, seed: u64) -> Result<(Corpus, std::path::PathBuf, std::path::PathBuf, std::path::PathBuf), String> {
    let planted = planted_topics(&PlantedSpec {
        seed,
        ..PlantedSpec::default()
    });
    let (emb, vocab, labels) = (dir.join("emb.bin"), dir.join("vocab.tsv"), dir.join("labels.tsv"));
    write_embeddings(&emb, &planted.corpus).map_err(|e| e.to_string())?;
    write_vocabulary(&vocab, planted.corpus.vocabulary()).map_err(|e| e.to_string())?;
    let text: String = planted
        .corpus
        .documents()
        .iter()
        .zip(&planted.doc_labels)
        .map(|(d, l)| format!("{}\t{l}\n", d.doc_id))
        .collect();
    fs::write(&labels, text).map_err(|e| e.to_string())?;
    Ok((planted.corpus, emb, vocab, labels))
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (_, emb, vocab, labels) = write_planted(tmp.path(), 11)?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let first = pipeline(&a, &emb, &vocab, &labels)?;
    let second = pipeline(&b, &emb, &vocab, &labels)?;
    let differing: Vec<&str> = first
        .iter()
        .zip(&second)
        .filter(|(x, y)| x.1 != y.1)
        .map(|(x, _)| x.0.as_str())
        .collect();
    check(
        differing.is_empty(),
        format!("{} output files compared, differing: {differing:?}", first.len()),
    )
}

fn exit_code(args: &[&str]) -> Option<i32> {
    bin().args(args).output().ok().and_then(|o| o.status.code())
}

fn format_round_trip() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    let (corpus, emb, vocab, _) = write_planted(dir, 2)?;
    let original = fs::read(&emb).map_err(|e| e.to_string())?;
    let loaded = load_corpus(&emb, &vocab).map_err(|e| e.to_string())?;
    let embeddings_identical = encode_embeddings(&loaded) == original;

    let config = TrainConfig {
        num_topics: 5,
        latent_dim: 4,
        epochs: 1,
        pretrain_epochs: 1,
        encoder_hidden: vec![16],
        decoder_hidden: vec![16],
        attention_dim: 8,
        ..TrainConfig::default()
    };
    let out = train(&corpus, &config).map_err(|e| e.to_string())?;
    let ck = Checkpoint {
        seed: 0,
        model: out.model,
        attention: out.attention,
    };
    let ck_path = dir.join("model.bin");
    ck.write(&ck_path).map_err(|e| e.to_string())?;
    let ck_bytes = fs::read(&ck_path).map_err(|e| e.to_string())?;
    let reloaded = Checkpoint::read(&ck_path).map_err(|e| e.to_string())?;
    let checkpoint_identical = reloaded.to_bytes() == ck_bytes && reloaded == ck;

    let mut fixtures = Vec::new();
    let mut add = |name: &str, bytes: Vec<u8>| {
        let p = dir.join(name);
        fs::write(&p, bytes).map(|_| fixtures.push(p))
    };
    let mut magic = original.clone();
    magic[..4].copy_from_slice(b"XXXX");
    let mut version = original.clone();
    version[4] = 9;
    let mut trailing = original.clone();
    trailing.push(0);
    let mut bad_ck = ck_bytes.clone();
    bad_ck[0] ^= 0xff;
    let results = [
        add("magic.bin", magic),
        add("version.bin", version),
        add("truncated.bin", original[..original.len() - 5].to_vec()),
        add("trailing.bin", trailing),
        add("ck_magic.bin", bad_ck),
        add("ck_short.bin", ck_bytes[..ck_bytes.len() / 2].to_vec()),
    ];
    if let Some(Err(e)) = results.into_iter().find(|r| r.is_err()) {
        return Err(e.to_string());
    }
    let out_dir = dir.join("out");
    let mut codes = Vec::new();
    for f in &fixtures[..4] {
        codes.push(exit_code(&["ingest", "--embeddings", path(f), "--vocab", path(&vocab)]));
    }
    for f in &fixtures[4..] {
        codes.push(exit_code(&[
            "topics",
            "--embeddings",
            path(&emb),
            "--vocab",
            path(&vocab),
            "--checkpoint",
            path(f),
            "--out",
            path(&out_dir),
        ]));
    }
    check(
        embeddings_identical && checkpoint_identical && codes.iter().all(|&c| c == Some(2)),
        format!(
            "embedding file identical: {embeddings_identical}, checkpoint identical: {checkpoint_identical}, exit codes on {} corrupted fixtures: {codes:?}",
            codes.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("mixture posterior identity", theorem_identity),
        ("gradient correctness", gradient_correctness),
        ("target distribution oracle", target_oracle),
        ("sharpening", sharpening),
        ("synthetic recovery", synthetic_recovery),
        ("pretraining efficacy", pretraining_efficacy),
        ("metric oracles", metric_oracles),
        ("posterior invariants", posterior_invariants),
        ("determinism", determinism),
        ("format round-trip", format_round_trip),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
