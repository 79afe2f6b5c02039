//! Paired t-test, paired effect size, condition construction and plot
//! trimming.
//!
//! Student p-values come from a continued-fraction regularized incomplete
//! beta; no statistics package is involved at runtime.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    /// Every difference is identical, so the standard deviation is zero.
    /// By convention `p_value` is 0 when the common difference is nonzero
    /// and 1 when it is zero.
    #[error("all differences equal {mean_diff}; p = {p_value} by convention")]
    ZeroVariance { mean_diff: f64, p_value: f64 },
    #[error("cannot build a derangement of {0} items")]
    DegenerateCondition(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_value: f64,
    /// Two-sided.
    pub p_value: f64,
    pub dof: usize,
    pub mean_paired: f64,
    pub std_paired: f64,
    pub mean_random: f64,
    pub std_random: f64,
}

/// Paired-design effect size d_z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectSize {
    pub d: f64,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n − 1 denominator), two-pass.
pub fn sample_std(values: &[f64]) -> f64 {
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() as f64 - 1.0)).sqrt()
}

fn differences(paired: &[f64], random: &[f64]) -> Result<Vec<f64>, StatsError> {
    if paired.len() != random.len() {
        return Err(StatsError::LengthMismatch { left: paired.len(), right: random.len() });
    }
    if paired.len() < 2 {
        return Err(StatsError::TooFewSamples(paired.len()));
    }
    let diffs: Vec<f64> = paired.iter().zip(random).map(|(p, r)| p - r).collect();
    if diffs.iter().all(|d| *d == diffs[0]) {
        let mean_diff = diffs[0];
        let p_value = if mean_diff == 0.0 { 1.0 } else { 0.0 };
        return Err(StatsError::ZeroVariance { mean_diff, p_value });
    }
    Ok(diffs)
}

/// `t = mean(diff) / (sd(diff) / √n)` with `diff_i = paired_i − random_i`
/// and a two-sided p-value on n − 1 degrees of freedom.
pub fn paired_t_test(paired: &[f64], random: &[f64]) -> Result<TTestResult, StatsError> {
    let diffs = differences(paired, random)?;
    let n = diffs.len();
    let t = mean(&diffs) / (sample_std(&diffs) / (n as f64).sqrt());
    Ok(TTestResult {
        t_value: t,
        p_value: student_t_two_sided_p(t, (n - 1) as f64),
        dof: n - 1,
        mean_paired: mean(paired),
        std_paired: sample_std(paired),
        mean_random: mean(random),
        std_random: sample_std(random),
    })
}

/// `d_z = mean(diff) / sd(diff)`; equals `t / √n` on the same inputs.
pub fn cohens_d(paired: &[f64], random: &[f64]) -> Result<EffectSize, StatsError> {
    let diffs = differences(paired, random)?;
    Ok(EffectSize { d: mean(&diffs) / sample_std(&diffs) })
}

/// Two-sided tail probability of Student's t: `I_{ν/(ν+t²)}(ν/2, 1/2)`.
pub fn student_t_two_sided_p(t: f64, dof: f64) -> f64 {
    if t.is_nan() {
        return f64::NAN;
    }
    if t.is_infinite() {
        return 0.0;
    }
    let x = dof / (dof + t * t);
    regularized_incomplete_beta(dof / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// Lanczos approximation (g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + 7.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `I_x(a, b)` via the modified Lentz continued fraction, using the
/// symmetry `I_x(a, b) = 1 − I_{1−x}(b, a)` where it converges faster.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 10_000;
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Linear-interpolation percentile (`q` in [0, 100]) of unsorted values.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
}

/// Drops values strictly above the 99th percentile, keeping input order.
/// For plot arrays only; statistics always use the untrimmed scores.
pub fn trim_p99(values: &[f64]) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let cut = percentile(values, 99.0);
    values.iter().copied().filter(|v| *v <= cut).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Paired,
    Random,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Paired => "paired",
            Condition::Random => "random",
        }
    }
}

/// Index pairs `(pre, post)` for one condition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionSet {
    pub condition: Condition,
    pub pairs: Vec<(usize, usize)>,
    pub n: usize,
    pub seed: Option<u64>,
}

/// Uniform random permutation of `0..n` without fixed points (rejection
/// sampling over Fisher–Yates shuffles; about e tries on average).
pub fn derangement(n: usize, seed: u64) -> Result<Vec<usize>, StatsError> {
    if n < 2 {
        return Err(StatsError::DegenerateCondition(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        perm.shuffle(&mut rng);
        if perm.iter().enumerate().all(|(i, p)| i != *p) {
            return Ok(perm);
        }
    }
}

/// Paired is the identity alignment; random maps pre item `i` to post item
/// `σ(i)` for a seeded derangement σ.
pub fn build_conditions<A, B>(pre: &[A], post: &[B], seed: u64) -> Result<(ConditionSet, ConditionSet), StatsError> {
    if pre.len() != post.len() {
        return Err(StatsError::LengthMismatch { left: pre.len(), right: post.len() });
    }
    let n = pre.len();
    let sigma = derangement(n, seed)?;
    let paired = ConditionSet {
        condition: Condition::Paired,
        pairs: (0..n).map(|i| (i, i)).collect(),
        n,
        seed: None,
    };
    let random = ConditionSet {
        condition: Condition::Random,
        pairs: sigma.into_iter().enumerate().collect(),
        n,
        seed: Some(seed),
    };
    Ok((paired, random))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn symmetric_zero_mean_diffs() {
        let r = paired_t_test(&[0.6, 0.4], &[0.5, 0.5]).unwrap();
        assert!(r.t_value.abs() < 1e-12);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        assert_eq!(r.dof, 1);
    }

    #[test]
    fn zero_variance_conventions() {
        assert_eq!(
            paired_t_test(&[1.0, 2.0, 3.0], &[0.5, 1.5, 2.5]),
            Err(StatsError::ZeroVariance { mean_diff: 0.5, p_value: 0.0 })
        );
        assert_eq!(
            cohens_d(&[1.0, 1.0], &[1.0, 1.0]),
            Err(StatsError::ZeroVariance { mean_diff: 0.0, p_value: 1.0 })
        );
    }

    #[test]
    fn errors() {
        assert!(matches!(paired_t_test(&[1.0], &[0.0]), Err(StatsError::TooFewSamples(1))));
        assert!(matches!(paired_t_test(&[1.0, 2.0], &[0.0]), Err(StatsError::LengthMismatch { .. })));
    }

    #[test]
    fn jittered_constant_diff_has_large_d() {
        let paired: Vec<f64> = (0..50).map(|i| 1.0 + if i % 2 == 0 { 1e-3 } else { -1e-3 }).collect();
        let random = vec![0.0; 50];
        assert!(cohens_d(&paired, &random).unwrap().d > 10.0);
    }

    // t-table critical values (two-sided)
    #[test]
    fn p_values_match_t_table() {
        for (t, dof, p) in [
            (12.706, 1.0, 0.05),
            (4.303, 2.0, 0.05),
            (2.228, 10.0, 0.05),
            (3.169, 10.0, 0.01),
            (2.042, 30.0, 0.05),
            (3.646, 30.0, 0.001),
            (1.984, 100.0, 0.05),
        ] {
            let got = student_t_two_sided_p(t, dof);
            assert!((got - p).abs() / p < 2e-3, "t={t} dof={dof}: {got}");
        }
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-13);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
    }

    #[test]
    fn trim_examples() {
        assert_eq!(trim_p99(&[0.3; 100]), vec![0.3; 100]);
        let v: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(trim_p99(&v), (1..=99).map(f64::from).collect::<Vec<_>>());
    }

    #[test]
    fn small_derangements() {
        assert!(matches!(derangement(1, 0), Err(StatsError::DegenerateCondition(1))));
        assert!(matches!(derangement(0, 0), Err(StatsError::DegenerateCondition(0))));
        assert_eq!(derangement(2, 9).unwrap(), vec![1, 0]);
        for seed in 0..50 {
            let d = derangement(3, seed).unwrap();
            assert!(d == vec![1, 2, 0] || d == vec![2, 0, 1]);
        }
    }

    #[test]
    fn derangement_is_roughly_uniform_for_n3() {
        let hits = (0..2000).filter(|s| derangement(3, *s).unwrap() == vec![1, 2, 0]).count();
        assert!((850..1150).contains(&hits), "{hits}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn derangements_have_no_fixed_points(n in 2usize..200, seed in any::<u64>()) {
            let d = derangement(n, seed).unwrap();
            prop_assert!(d.iter().enumerate().all(|(i, p)| i != *p));
            let mut sorted = d.clone();
            sorted.sort_unstable();
            prop_assert_eq!(sorted, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(derangement(n, seed).unwrap(), d);
        }

        #[test]
        fn d_is_t_over_root_n(
            paired in prop::collection::vec(0.0f64..1.0, 2..300),
            noise in prop::collection::vec(0.0f64..1.0, 300),
        ) {
            let random: Vec<f64> = noise[..paired.len()].to_vec();
            if let (Ok(t), Ok(d)) = (paired_t_test(&paired, &random), cohens_d(&paired, &random)) {
                let n = paired.len() as f64;
                prop_assert!((d.d - t.t_value / n.sqrt()).abs() <= 1e-12 * (1.0 + d.d.abs()));
                prop_assert!((0.0..=1.0).contains(&t.p_value));
            }
        }

        #[test]
        fn trimming_never_grows(values in prop::collection::vec(-1e3f64..1e3, 1..400)) {
            let cut = percentile(&values, 99.0);
            let trimmed = trim_p99(&values);
            prop_assert!(trimmed.len() <= values.len());
            prop_assert!(trimmed.iter().all(|v| *v <= cut));
            prop_assert!(!trimmed.is_empty());
        }
    }
}
