//! One test per acceptance criterion. Each prints a single
//! `criterion N: PASS|FAIL|NOT RUN ...` line straight to stdout (so it shows
//! without `--nocapture`) and then asserts.
//!
//! The tests take a shared lock: two of them have wall-clock budgets and
//! should not compete with the others for cores.

mod common;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use seethrough::hub::Hub;
use seethrough_core::image_metrics::{histogram_intersection, perceptual_score, sift_similarity, FilterBankPerceptual, PerceptualBackend, SiftParams};
use seethrough_core::pipeline::augment::apply;
use seethrough_core::pipeline::caption::{enforce_bounds, word_count};
use seethrough_core::pipeline::{
    adapt_text_to_image, AugmentContext, AugmenterKind, BackendError, Generator, PipelineConfig, ProceduralGenerator, Region, RunMode,
    SteppedClock, TemporalHint,
};
use seethrough_core::stats::{cohens_d, paired_t_test};
use seethrough_core::study::{ingest_dataset, run_study, write_outputs, Backends, BackendsConfig, StudySettings};
use seethrough_core::text_metrics::{
    collapse_repeats, embedding_similarity_as, preprocess, wmd_distance, wmd_similarity, TfidfModel,
    TokenizedSentence, WordVectors,
};
use seethrough_core::MetricId;

static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|p| p.into_inner())
}

fn report(n: u32, ok: bool, detail: &str) {
    let verdict = if ok { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "criterion {n}: {verdict} ({detail})");
    let _ = out.flush();
}

fn report_blocked(n: u32, detail: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "criterion {n}: NOT RUN / BLOCKED ({detail})");
    let _ = out.flush();
}

/// Every file under `dir`, keyed by relative path.
fn snapshot_dir(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_1_stub_end_to_end_determinism() {
    let _g = serial();
    let started = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let images = tmp.path().join("images");
    common::write_images(&images, 20);

    let live_run = |name: &str| {
        let out = tmp.path().join(name);
        let summary = common::start(
            common::dir_source(&images, common::stepped_clock()),
            common::stub_backends(),
            PipelineConfig::live(),
            Some(&out),
            Hub::new(4),
        )
        .join();
        assert_eq!(summary.transforms, 20);
        snapshot_dir(&out)
    };
    let (log_a, log_b) = (live_run("live_a"), live_run("live_b"));

    let dataset = ingest_dataset(&images, 256).unwrap();
    let settings = StudySettings { seed: 7, ..StudySettings::default() };
    let study_run = |name: &str| {
        let out = tmp.path().join(name);
        let outcome = run_study(&dataset, &settings, &Backends::stub()).unwrap();
        assert_eq!(outcome.report.snapshot.items_scored, 20);
        write_outputs(&outcome, &out).unwrap();
        snapshot_dir(&out)
    };
    let (study_a, study_b) = (study_run("study_a"), study_run("study_b"));
    let elapsed = started.elapsed();

    let logs_equal = log_a == log_b && log_a.len() == 2 + 40;
    let reports_equal = study_a == study_b && study_a.contains_key(Path::new("report.json"));
    let fast = elapsed < Duration::from_secs(30);
    report(
        1,
        logs_equal && reports_equal && fast,
        &format!(
            "session logs identical: {logs_equal} ({} files), study outputs identical: {reports_equal} ({} files), {:.1}s of 30s",
            log_a.len(),
            study_a.len(),
            elapsed.as_secs_f64()
        ),
    );
    assert!(logs_equal && reports_equal && fast);
}

// ---------------------------------------------------------------------------

fn sentences() -> Vec<String> {
    let subjects = ["a dog", "two children", "an old man", "a red car", "a small boat", "a woman", "three birds", "a cat", "a horse", "a cyclist"];
    let actions = ["runs across", "waits beside", "rests near", "moves along", "stands in front of"];
    let places = ["a quiet street", "the sandy beach", "a green park", "the busy market", "a wooden bridge"];
    let mut out = Vec::new();
    for (k, s) in subjects.iter().enumerate() {
        for j in 0..5 {
            out.push(format!("{s} {} {} in the morning light.", actions[(k + j) % 5], places[(2 * k + j) % 5]));
        }
    }
    out
}

#[test]
fn criterion_2_metric_identity_and_symmetry() {
    let _g = serial();
    const TOL: f64 = 1e-6;
    let mut failures: Vec<String> = Vec::new();
    let mut check = |ok: bool, what: String| {
        if !ok {
            failures.push(what);
        }
    };

    let images: Vec<_> = (0..50)
        .map(|i| ProceduralGenerator.render(&format!("test scene {i} with a house and trees"), 4, i, 96).unwrap())
        .collect();
    let lpips = [FilterBankPerceptual::conv(), FilterBankPerceptual::transformer()];
    let sift = SiftParams::default();
    for (i, a) in images.iter().enumerate() {
        let b = &images[(i + 1) % images.len()];
        let hi = histogram_intersection(a, a, 8).value;
        check((hi - 1.0).abs() <= TOL, format!("HI(a,a) = {hi} for image {i}"));
        let (ab, ba) = (histogram_intersection(a, b, 8).value, histogram_intersection(b, a, 8).value);
        check((ab - ba).abs() <= TOL, format!("HI asymmetric on image {i}: {ab} vs {ba}"));
        for net in &lpips {
            let d = perceptual_score(net, a, a).unwrap().value;
            check(d.abs() <= TOL, format!("{}(a,a) = {d} for image {i}", net.metric_id().as_str()));
            let (ab, ba) = (perceptual_score(net, a, b).unwrap().value, perceptual_score(net, b, a).unwrap().value);
            check((ab - ba).abs() <= TOL, format!("{} asymmetric on image {i}", net.metric_id().as_str()));
        }
        let (ab, ba) = (sift_similarity(a, b, &sift).value, sift_similarity(b, a, &sift).value);
        check((ab - ba).abs() <= TOL, format!("SIFT asymmetric on image {i}: {ab} vs {ba}"));
    }

    let stub = Backends::stub();
    let text = sentences();
    let docs: Vec<TokenizedSentence> = text
        .iter()
        .map(|s| preprocess(&collapse_repeats(s), &stub.stop_words).unwrap())
        .collect();
    let tfidf = TfidfModel::fit(&docs);
    let embedders = [
        (MetricId::Use, stub.embedding_use.clone().unwrap()),
        (MetricId::Sbert, stub.embedding_sbert.clone().unwrap()),
    ];
    for (i, s) in docs.iter().enumerate() {
        let t = &docs[(i + 1) % docs.len()];
        let v = tfidf.similarity(s, s).value;
        check((v - 1.0).abs() <= TOL, format!("tfidf(s,s) = {v} for sentence {i}"));
        let (st, ts) = (tfidf.similarity(s, t).value, tfidf.similarity(t, s).value);
        check((st - ts).abs() <= TOL, format!("tfidf asymmetric on sentence {i}"));
        match wmd_similarity(s, s, &stub.word_vectors) {
            Ok(v) => check(v.value == 1.0, format!("wmd(s,s) = {} for sentence {i}", v.value)),
            Err(e) => check(false, format!("wmd undefined for sentence {i}: {e}")),
        }
        if let (Ok(st), Ok(ts)) = (wmd_similarity(s, t, &stub.word_vectors), wmd_similarity(t, s, &stub.word_vectors)) {
            check((st.value - ts.value).abs() <= TOL, format!("wmd asymmetric on sentence {i}"));
        }
        let (raw_s, raw_t) = (&text[i], &text[(i + 1) % text.len()]);
        for (metric, e) in &embedders {
            let v = embedding_similarity_as(*metric, raw_s, raw_s, e.as_ref()).unwrap().value;
            check((v - 1.0).abs() <= TOL, format!("{metric:?}(s,s) = {v} for sentence {i}"));
            let st = embedding_similarity_as(*metric, raw_s, raw_t, e.as_ref()).unwrap().value;
            let ts = embedding_similarity_as(*metric, raw_t, raw_s, e.as_ref()).unwrap().value;
            check((st - ts).abs() <= TOL, format!("{metric:?} asymmetric on sentence {i}"));
        }
    }

    let ok = failures.is_empty();
    let detail = if ok {
        "50 images: HI, SIFT, 2 perceptual backends; 50 sentences: tfidf, wmd, 2 embedding backends".to_string()
    } else {
        format!("{} violations, first: {}", failures.len(), failures[0])
    };
    report(2, ok, &detail);
    assert!(ok, "{failures:#?}");
}

// ---------------------------------------------------------------------------
// Reference implementation, straight from the textbook definitions:
//   d_i = x_i − y_i,  d̄ = Σd_i / n,  s² = (Σd_i² − n·d̄²) / (n − 1)
//   t = d̄ / (s / √n),  d_z = d̄ / s
//   p = 2·∫_|t|^∞ f_ν(x) dx with the Student density f_ν, integrated by
//   composite Simpson over [0, |t|] and the Gamma ratio built from
//   Γ(1/2) = √π, Γ(1) = 1, Γ(x + 1) = x·Γ(x).

struct Reference {
    t: f64,
    d: f64,
    p: f64,
}

fn gamma_half_integer_ratio(nu: usize) -> f64 {
    // Γ((ν+1)/2) / Γ(ν/2) by walking both arguments down to 1/2 or 1
    let mut num = (nu as f64 + 1.0) / 2.0;
    let mut den = nu as f64 / 2.0;
    let mut log_ratio = 0.0;
    while num > 1.0 {
        num -= 1.0;
        log_ratio += num.ln();
    }
    while den > 1.0 {
        den -= 1.0;
        log_ratio -= den.ln();
    }
    let base = |x: f64| if (x - 0.5).abs() < 1e-12 { std::f64::consts::PI.sqrt() } else { 1.0 };
    log_ratio.exp() * base(num) / base(den)
}

fn reference(x: &[f64], y: &[f64]) -> Reference {
    let n = x.len();
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for v in &d {
        sum += v;
        sum_sq += v * v;
    }
    let mean = sum / n as f64;
    let s = ((sum_sq - n as f64 * mean * mean) / (n as f64 - 1.0)).sqrt();
    let t = mean / (s / (n as f64).sqrt());
    let nu = n - 1;
    let c = gamma_half_integer_ratio(nu) / (nu as f64 * std::f64::consts::PI).sqrt();
    let f = |x: f64| c * (1.0 + x * x / nu as f64).powf(-(nu as f64 + 1.0) / 2.0);
    let steps = 200_000;
    let h = t.abs() / steps as f64;
    let mut acc = f(0.0) + f(t.abs());
    for k in 1..steps {
        acc += f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    let central = acc * h / 3.0;
    Reference { t, d: mean / s, p: (1.0 - 2.0 * central).max(0.0) }
}

fn fixtures() -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_250);
    (0..25)
        .map(|k| {
            let n = [3, 4, 5, 8, 12, 20, 30, 50, 100, 250][k % 10] + k;
            let shift = [-0.3, -0.05, 0.0, 0.02, 0.1, 0.4][k % 6];
            let spread = 0.05 + 0.05 * (k % 4) as f64;
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let x: Vec<f64> = y
                .iter()
                .map(|v| v + shift + spread * Normal::new(0.0, 1.0).unwrap().sample(&mut rng))
                .collect();
            (x, y)
        })
        .collect()
}

/// (metric, t, d) as published, all with n = 2,500 pairs.
const PUBLISHED_ROWS: [(&str, f64, f64); 8] = [
    ("TF-IDF", 51.75, 1.01),
    ("WMD", 55.44, 1.09),
    ("USE", 81.21, 1.59),
    ("SBERT", 98.65, 1.93),
    ("HI", 19.40, 0.39),
    ("SIFT", 9.65, 0.19),
    ("LPIPS AlexNet", -39.43, -0.79),
    ("LPIPS Transformer", -37.56, -0.75),
];

#[test]
fn criterion_3_statistics_oracle() {
    use statrs::distribution::{ContinuousCDF, StudentsT};
    let _g = serial();
    const TOL: f64 = 1e-9;
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for (k, (x, y)) in fixtures().iter().enumerate() {
        let ours = paired_t_test(x, y).unwrap();
        let d = cohens_d(x, y).unwrap().d;
        let r = reference(x, y);
        let dof = (x.len() - 1) as f64;
        let statrs_p = 2.0 * StudentsT::new(0.0, 1.0, dof).unwrap().cdf(-ours.t_value.abs());
        let errs = [
            (ours.t_value - r.t).abs() / r.t.abs().max(1.0),
            (d - r.d).abs(),
            (ours.p_value - r.p).abs(),
            (ours.p_value - statrs_p).abs(),
        ];
        let e = errs.iter().cloned().fold(0.0, f64::max);
        worst = worst.max(e);
        if e > TOL || ours.dof != x.len() - 1 {
            failures.push(format!("fixture {k} (n={}): errors {errs:?}", x.len()));
        }
    }

    let mut table_worst: f64 = 0.0;
    for (name, t, d) in PUBLISHED_ROWS {
        let gap = (d - t / 2500f64.sqrt()).abs();
        table_worst = table_worst.max(gap);
        if gap > 0.05 {
            failures.push(format!("{name}: |d - t/50| = {gap:.4}"));
        }
    }
    let ok = failures.is_empty();
    report(
        3,
        ok,
        &format!("25 fixtures, worst error {worst:.1e} (tol 1e-9); 8 published rows, worst |d - t/sqrt(n)| {table_worst:.3} (tol 0.05)"),
    );
    assert!(ok, "{failures:#?}");
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_4_synthetic_recovery() {
    let _g = serial();
    let started = Instant::now();
    let n = 2500;
    let diff = Normal::new(0.19, 0.1836).unwrap();
    let base = Normal::new(0.19, 0.10).unwrap();
    let mut hits = 0;
    let mut ts = Vec::new();
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let random: Vec<f64> = (0..n).map(|_| base.sample(&mut rng)).collect();
        let paired: Vec<f64> = random.iter().map(|r| r + diff.sample(&mut rng)).collect();
        let res = paired_t_test(&paired, &random).unwrap();
        if (49.0..=55.0).contains(&res.t_value) && res.p_value < 0.001 {
            hits += 1;
        }
        ts.push(res.t_value);
    }
    let elapsed = started.elapsed();
    let mean_t = ts.iter().sum::<f64>() / ts.len() as f64;
    let ok = hits > 95 && elapsed < Duration::from_secs(10);
    report(
        4,
        ok,
        &format!(
            "{hits}/100 seeds with t in [49, 55] and p < 0.001, mean t {mean_t:.2} (published 51.75), {:.2}s of 10s",
            elapsed.as_secs_f64()
        ),
    );
    assert!(ok);
}

// ---------------------------------------------------------------------------
// Transport LP by exhaustive vertex enumeration: every vertex of the
// transportation polytope has a basis of m + n − 1 cells. Try every such
// subset, solve the equality system on it, keep the feasible solutions and
// take the cheapest.

fn solve_on_cells(cells: &[(usize, usize)], a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let (m, n) = (a.len(), b.len());
    let rows = m + n;
    let cols = cells.len();
    let mut mat: Vec<Vec<f64>> = vec![vec![0.0; cols + 1]; rows];
    for (c, &(i, j)) in cells.iter().enumerate() {
        mat[i][c] = 1.0;
        mat[m + j][c] = 1.0;
    }
    for i in 0..m {
        mat[i][cols] = a[i];
    }
    for j in 0..n {
        mat[m + j][cols] = b[j];
    }
    let mut pivot_row = 0;
    let mut pivots = Vec::new();
    for c in 0..cols {
        let p = (pivot_row..rows).max_by(|&r, &s| mat[r][c].abs().total_cmp(&mat[s][c].abs()))?;
        if mat[p][c].abs() < 1e-12 {
            return None; // singular: not a basis
        }
        mat.swap(pivot_row, p);
        let div = mat[pivot_row][c];
        for v in mat[pivot_row].iter_mut() {
            *v /= div;
        }
        for r in 0..rows {
            if r != pivot_row && mat[r][c] != 0.0 {
                let f = mat[r][c];
                let pivot = mat[pivot_row].clone();
                for (v, q) in mat[r].iter_mut().zip(&pivot) {
                    *v -= f * q;
                }
            }
        }
        pivots.push(pivot_row);
        pivot_row += 1;
    }
    // leftover equations must be consistent
    if mat[pivot_row..].iter().any(|row| row[cols].abs() > 1e-9) {
        return None;
    }
    Some((0..cols).map(|c| mat[pivots[c]][cols]).collect())
}

fn brute_force_transport(a: &[f64], b: &[f64], cost: &[Vec<f64>]) -> f64 {
    let (m, n) = (a.len(), b.len());
    let all: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let k = m + n - 1;
    let mut best = f64::INFINITY;
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let cells: Vec<_> = idx.iter().map(|&c| all[c]).collect();
        if let Some(x) = solve_on_cells(&cells, a, b) {
            if x.iter().all(|&v| v >= -1e-12) {
                let c: f64 = cells.iter().zip(&x).map(|(&(i, j), v)| cost[i][j] * v).sum();
                best = best.min(c);
            }
        }
        // next k-subset of all.len() in lexicographic order
        let mut i = k;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < all.len() - k + i {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[test]
fn criterion_5_wmd_matches_vertex_enumeration() {
    let _g = serial();
    let table: [(&str, [f64; 2]); 8] = [
        ("sun", [0.0, 0.0]),
        ("moon", [1.0, 0.2]),
        ("star", [0.4, 1.5]),
        ("sea", [2.5, -0.5]),
        ("hill", [-1.2, 0.8]),
        ("tree", [0.9, -1.1]),
        ("road", [3.0, 2.0]),
        ("bird", [-0.7, -0.3]),
    ];
    let vectors = WordVectors::from_pairs(2, table.iter().map(|(w, v)| (*w, v.to_vec())));
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for case in 0..50 {
        let mut sentence = || {
            let len = rng.gen_range(1..=4);
            let tokens: Vec<String> = (0..len).map(|_| table[rng.gen_range(0..table.len())].0.to_string()).collect();
            TokenizedSentence { original: tokens.join(" "), tokens }
        };
        let (s, t) = (sentence(), sentence());
        fn bag(doc: &TokenizedSentence) -> Vec<(&str, f64)> {
            let mut counts: BTreeMap<&str, f64> = BTreeMap::new();
            for w in &doc.tokens {
                *counts.entry(w.as_str()).or_default() += 1.0;
            }
            let total = doc.tokens.len() as f64;
            counts.into_iter().map(|(w, c)| (w, c / total)).collect()
        }
        let (bs, bt) = (bag(&s), bag(&t));
        let at = |w: &str| table.iter().find(|(k, _)| *k == w).unwrap().1;
        let cost: Vec<Vec<f64>> = bs
            .iter()
            .map(|(u, _)| {
                bt.iter()
                    .map(|(v, _)| {
                        let (p, q) = (at(u), at(v));
                        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
                    })
                    .collect()
            })
            .collect();
        let a: Vec<f64> = bs.iter().map(|(_, w)| *w).collect();
        let b: Vec<f64> = bt.iter().map(|(_, w)| *w).collect();
        let expected = brute_force_transport(&a, &b, &cost);
        let got = wmd_distance(&s, &t, &vectors).unwrap();
        let err = (got - expected).abs();
        worst = worst.max(err);
        if err > 1e-6 {
            failures.push(format!("case {case}: {:?} vs {:?}: {got} != {expected}", s.tokens, t.tokens));
        }
    }
    let ok = failures.is_empty();
    report(5, ok, &format!("50 cases, worst |wmd - LP optimum| {worst:.1e} (tol 1e-6)"));
    assert!(ok, "{failures:#?}");
}

// ---------------------------------------------------------------------------

const BACKENDS_ENV: &str = "SST_BACKENDS";
const BACKEND_URL_ENV: &str = "SST_BACKEND_URL";
const DATASET_ENV: &str = "SST_DATASET";

fn real_backends_config() -> Option<(BackendsConfig, PathBuf)> {
    if let Ok(path) = std::env::var(BACKENDS_ENV) {
        return Some(BackendsConfig::load(Path::new(&path)).expect("readable backends config"));
    }
    let url = std::env::var(BACKEND_URL_ENV).ok()?;
    let text = format!(
        "captioner = \"remote:blip-large\"\ngenerator = \"remote:lcm-sd15\"\nremote_url = \"{url}\"\n\
         embedding_use = \"remote:use\"\nembedding_sbert = \"remote:all-mpnet-base-v2\"\n\
         lpips_conv = \"remote:alex\"\nlpips_transformer = \"remote:vit\"\n"
    );
    let mut cfg: BackendsConfig = toml::from_str(&text).unwrap();
    if let Ok(v) = std::env::var("SST_WORD_VECTORS") {
        cfg.word_vectors = v;
    }
    Some((cfg, PathBuf::from(".")))
}

#[test]
fn criterion_6_notice() {
    if real_backends_config().is_some() && std::env::var(DATASET_ENV).is_ok() {
        // the ignored test below does the work when run with --ignored
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "criterion 6: NOT RUN here (backends configured; run `cargo test --test acceptance -- --ignored`)");
        return;
    }
    report_blocked(
        6,
        &format!(
            "needs downloaded captioning, diffusion, embedding and LPIPS models plus a 100-image dataset; \
             set {BACKEND_URL_ENV} or {BACKENDS_ENV}, and {DATASET_ENV}, then run with --ignored"
        ),
    );
}

#[test]
#[ignore = "needs real model backends and a dataset"]
fn criterion_6_real_backend_directions() {
    let _g = serial();
    let (cfg, base) = real_backends_config().expect("set SST_BACKEND_URL or SST_BACKENDS");
    let dataset = PathBuf::from(std::env::var(DATASET_ENV).expect("set SST_DATASET"));
    let started = Instant::now();
    let backends = cfg.build(&base).unwrap();
    let ds = ingest_dataset(&dataset, 256).unwrap();
    let outcome = run_study(&ds, &StudySettings::default(), &backends).unwrap();
    let report_rows = &outcome.report;
    let mut failures = Vec::new();
    let mut ds_by_metric = BTreeMap::new();
    for metric in [MetricId::Tfidf, MetricId::Wmd, MetricId::Use, MetricId::Sbert] {
        let row = report_rows.row(metric).expect("text row");
        let (p, r, pv) = (row.ave_p.unwrap_or(f64::NAN), row.ave_r.unwrap_or(f64::NAN), row.p.unwrap_or(1.0));
        if !(p > r && pv < 0.001) {
            failures.push(format!("{}: paired {p:.3} vs random {r:.3}, p {pv:.2e}", metric.as_str()));
        }
        ds_by_metric.insert(metric.as_str(), row.d.unwrap_or(f64::NAN));
    }
    let order = ["tfidf", "wmd", "use", "sbert"];
    if !order.windows(2).all(|w| ds_by_metric[w[0]] < ds_by_metric[w[1]]) {
        failures.push(format!("effect sizes not increasing: {ds_by_metric:?}"));
    }
    for metric in [MetricId::LpipsConv, MetricId::LpipsTransformer] {
        let row = report_rows.row(metric).expect("visual row");
        let (p, r) = (row.ave_p.unwrap_or(f64::NAN), row.ave_r.unwrap_or(f64::NAN));
        if p.is_nan() || r.is_nan() || p >= r {
            failures.push(format!("{}: paired {p:.3} not below random {r:.3}", metric.as_str()));
        }
    }
    let ok = failures.is_empty();
    report(
        6,
        ok,
        &format!("{} items, d {ds_by_metric:?}, {:.0}s; {}", report_rows.snapshot.items_scored, started.elapsed().as_secs_f64(), failures.join("; ")),
    );
    assert!(ok, "{failures:#?}");
}

// ---------------------------------------------------------------------------

const CASES: u32 = 1000;

fn word_list() -> impl Strategy<Value = Vec<String>> {
    let words = prop::sample::select(vec![
        "a", "the", "dog", "person", "runs,", "and", "while", "sits;", "table", "with", "near", "red", "apple", "which", "but",
        "light:", "a person", "over", "the dog", "is",
    ]);
    prop::collection::vec(words.prop_map(str::to_string), 0..80)
}

fn run_property<S: Strategy>(name: &str, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    let mut runner = TestRunner::new(PropConfig { cases: CASES, failure_persistence: None, ..PropConfig::default() });
    runner.run(&strategy, test).map_err(|e| format!("{name}: {e}"))
}

struct WrongSizeGenerator;

impl Generator for WrongSizeGenerator {
    fn id(&self) -> String {
        "wrong-size".into()
    }

    fn render(&self, _: &str, _: u32, _: u64, resolution: u32) -> Result<image::RgbImage, BackendError> {
        Ok(image::RgbImage::new(resolution, resolution + 1))
    }
}

#[test]
fn criterion_7_pipeline_contracts() {
    let _g = serial();
    let mut results = Vec::new();

    results.push(run_property("word bounds", (word_list(), 1usize..30, 0usize..30), |(words, min, extra)| {
        let text = words.join(" ");
        let config = PipelineConfig { min_words: min, max_words: min + extra, ..PipelineConfig::live() };
        let input_words = word_count(&text);
        match enforce_bounds(&text, &config) {
            Ok((out, truncated)) => {
                let n = word_count(&out);
                prop_assert!(n >= config.min_words && n <= config.max_words, "{n} words outside bounds");
                prop_assert_eq!(truncated, input_words > config.max_words);
                // a prefix of the input words, never cut inside a word
                let src: Vec<&str> = text.split_whitespace().collect();
                for (k, w) in out.split_whitespace().enumerate() {
                    prop_assert!(src[k] == w || (k + 1 == n && src[k].starts_with(w)), "word {k} changed");
                }
            }
            Err(_) => prop_assert!(input_words < config.min_words, "rejected an input that fits"),
        }
        Ok(())
    }));

    let clock = SteppedClock::new(0.01);
    results.push(run_property(
        "resolution",
        (8u32..72, 8u32..72, any::<bool>(), "[a-z]{1,8}( [a-z]{1,8}){0,6}", any::<u64>(), 1u32..9),
        |(live, study, is_live, prompt, seed, steps)| {
            let config = PipelineConfig {
                live_resolution: live,
                study_resolution: study,
                mode: if is_live { RunMode::Live } else { RunMode::Study },
                inference_steps: steps,
                ..PipelineConfig::live()
            };
            let want = if is_live { live } else { study };
            let view = adapt_text_to_image(&prompt, seed, &config, &ProceduralGenerator, &clock).unwrap();
            prop_assert_eq!(view.image.dimensions(), (want, want));
            prop_assert!(adapt_text_to_image(&prompt, seed, &config, &WrongSizeGenerator, &clock).is_err());
            Ok(())
        },
    ));

    let regions = prop::sample::select(vec![Region::Left, Region::Center, Region::Right]);
    let clauses = prop::sample::select(vec!["a girl tossed to me", "I saw yesterday", "my friend brought"]);
    let objects = prop::option::of(prop::sample::select(vec!["dog", "apple", "table"]));
    results.push(run_property(
        "augmenter idempotence",
        (word_list(), prop::option::of(regions), clauses, objects, word_list()),
        |(words, region, clause, object, previous)| {
            let text = words.join(" ");
            let ctx = AugmentContext {
                region,
                temporal: Some(TemporalHint { object: object.map(str::to_string), clause: clause.to_string() }),
                previous_captions: vec![previous.join(" ")],
            };
            for kind in [AugmenterKind::Personhood, AugmenterKind::Spatial, AugmenterKind::Temporal] {
                let once = apply(kind, &text, &ctx);
                prop_assert_eq!(apply(kind, &once, &ctx), once.clone(), "{:?} on {:?}", kind, text);
            }
            Ok(())
        },
    ));

    results.push(run_property(
        "collapse_repeats idempotence",
        prop::collection::vec(prop::sample::select(vec!["a", "A", "cat", "cat,", "on", "mat", "the", "The", "!", "dog."]), 0..40),
        |words| {
            let once = collapse_repeats(&words.join(" "));
            prop_assert_eq!(collapse_repeats(&once), once);
            Ok(())
        },
    ));

    let failures: Vec<String> = results.into_iter().filter_map(Result::err).collect();
    let ok = failures.is_empty();
    report(
        7,
        ok,
        &if ok {
            format!("{CASES} cases each: word bounds, resolution, augmenter idempotence, collapse_repeats idempotence")
        } else {
            failures.join("; ")
        },
    );
    assert!(ok, "{failures:#?}");
}
