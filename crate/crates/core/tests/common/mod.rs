//! Independent oracles and generators shared by the integration suites.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use repscope::corpus::{Corpus, RawRecord, TokenizerConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn raw(id: String, summary: String, arch: &str, train: Option<&str>, test: &str) -> RawRecord {
    RawRecord {
        id,
        summary,
        input: None,
        architecture: arch.to_string(),
        train_dataset: train.map(str::to_string),
        test_dataset: test.to_string(),
    }
}

/// Random corpus over a small vocabulary, with some summaries copying a
/// chunk of an earlier one so long repeats occur.
pub fn random_corpus(seed: u64) -> Corpus {
    let mut r = rng(seed);
    let size = r.random_range(2..=200);
    let vocab = r.random_range(10..=50);
    let mut texts: Vec<Vec<String>> = Vec::with_capacity(size);
    for _ in 0..size {
        let len = r.random_range(0..=30);
        let mut words: Vec<String> = (0..len).map(|_| format!("w{}", r.random_range(0..vocab))).collect();
        if !texts.is_empty() && r.random_bool(0.3) {
            let src = &texts[r.random_range(0..texts.len())];
            if !src.is_empty() && !words.is_empty() {
                let a = r.random_range(0..src.len());
                let b = r.random_range(a..src.len()) + 1;
                let at = r.random_range(0..words.len());
                let chunk: Vec<String> = src[a..b].to_vec();
                words.splice(at..at, chunk);
                words.truncate(30);
            }
        }
        texts.push(words);
    }
    let raws = texts
        .into_iter()
        .enumerate()
        .map(|(i, w)| raw(format!("s{i:03}"), w.join(" "), "BART", Some("XSum"), "XSum"))
        .collect();
    Corpus::from_raw(format!("rand{seed}"), raws, TokenizerConfig::default()).unwrap()
}

/// O(S^2 L^2) pairwise brute force: every common substring of length
/// >= min_n between two distinct summaries.
pub fn brute_force_index(corpus: &Corpus, min_n: usize) -> BTreeMap<Vec<String>, BTreeSet<String>> {
    let seqs: Vec<&[String]> = corpus.records().iter().map(|r| r.summary.tokens()).collect();
    let ids: Vec<&str> = corpus.records().iter().map(|r| r.id.as_str()).collect();
    let mut out: BTreeMap<Vec<String>, BTreeSet<String>> = BTreeMap::new();
    for s in 0..seqs.len() {
        for t in s + 1..seqs.len() {
            let (a, b) = (seqs[s], seqs[t]);
            for i in 0..a.len() {
                for j in 0..b.len() {
                    let mut k = 0;
                    while i + k < a.len() && j + k < b.len() && a[i + k] == b[j + k] {
                        k += 1;
                    }
                    for len in min_n..=k {
                        let e = out.entry(a[i..i + len].to_vec()).or_default();
                        e.insert(ids[s].to_string());
                        e.insert(ids[t].to_string());
                    }
                }
            }
        }
    }
    out
}

/// Direct per-summary score: log of one plus the summed containing-summary
/// counts of every distinct repeating n-gram in the summary.
pub fn brute_force_scores(
    corpus: &Corpus,
    oracle: &BTreeMap<Vec<String>, BTreeSet<String>>,
    min_n: usize,
) -> Vec<(usize, usize, f64)> {
    corpus
        .records()
        .iter()
        .map(|r| {
            let toks = r.summary.tokens();
            let mut types: BTreeSet<&[String]> = BTreeSet::new();
            for n in min_n..=toks.len() {
                for w in toks.windows(n) {
                    if oracle.contains_key(w) {
                        types.insert(w);
                    }
                }
            }
            let raw_sum: usize = types.iter().map(|g| oracle[*g].len()).sum();
            (types.len(), raw_sum, ((raw_sum + 1) as f64).ln())
        })
        .collect()
}

fn gauss_kronrod(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    const XGK: [f64; 8] = [
        0.991_455_371_120_812_6,
        0.949_107_912_342_758_5,
        0.864_864_423_359_769_1,
        0.741_531_185_599_394_4,
        0.586_087_235_467_691_1,
        0.405_845_151_377_397_2,
        0.207_784_955_007_898_5,
        0.0,
    ];
    const WGK: [f64; 8] = [
        0.022_935_322_010_529_22,
        0.063_092_092_629_978_55,
        0.104_790_010_322_250_2,
        0.140_653_259_715_525_9,
        0.169_004_726_639_267_9,
        0.190_350_578_064_785_4,
        0.204_432_940_075_298_9,
        0.209_482_141_084_728,
    ];
    const WG: [f64; 4] = [
        0.129_484_966_168_869_7,
        0.279_705_391_489_276_7,
        0.381_830_050_505_118_9,
        0.417_959_183_673_469_4,
    ];
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for k in 0..7 {
        let dx = h * XGK[k];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[k] * s;
        if k % 2 == 1 {
            gauss += WG[k / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (v, err) = gauss_kronrod(f, a, b);
    // below ~1e-14 relative the Kronrod-Gauss gap is roundoff, not error
    if err <= tol.max(1e-14 * v.abs()) || depth == 0 {
        return v;
    }
    let m = 0.5 * (a + b);
    adaptive(f, a, m, tol / 2.0, depth - 1) + adaptive(f, m, b, tol / 2.0, depth - 1)
}

/// Adaptive Gauss-Kronrod quadrature over `pieces` equal sub-intervals.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, pieces: usize, tol: f64) -> f64 {
    let w = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| adaptive(f, a + i as f64 * w, a + (i + 1) as f64 * w, tol / pieces as f64, 24))
        .sum()
}

/// Two-sided Student-t p-value as a ratio of unnormalized density integrals
/// in the variable x = tan(theta), which maps the real half-line onto
/// [0, pi/2).
pub fn t_p_oracle(t: f64, df: f64) -> f64 {
    let g = |theta: f64| {
        let x = theta.tan();
        let sec2 = 1.0 + x * x;
        (-(df + 1.0) / 2.0 * (x * x / df).ln_1p() + sec2.ln()).exp()
    };
    let half_pi = std::f64::consts::FRAC_PI_2;
    let total = integrate(&g, 0.0, half_pi, 256, 1e-15);
    let tail = integrate(&g, t.abs().atan(), half_pi, 256, 1e-15 * total);
    tail / total
}

/// `ln(1 + r) - r` without cancellation for small `r`.
fn ln1p_minus(r: f64) -> f64 {
    if r.abs() >= 0.1 {
        return r.ln_1p() - r;
    }
    let mut sum = 0.0;
    let mut pow = r;
    for k in 2..60 {
        pow *= -r;
        let term = pow / k as f64;
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Chi-square upper tail from unnormalized density integrals in u = sqrt(x).
/// The log-density is taken relative to its peak p = sqrt(df - 1), written as
/// p^2 (ln(1 + d/p) - d/p) - d^2/2 with d = u - p so large df keeps full
/// precision.
pub fn chi_square_oracle(x: f64, df: f64) -> f64 {
    let peak = (df - 1.0).max(0.0).sqrt();
    let h = |u: f64| {
        if peak == 0.0 {
            return (-u * u / 2.0).exp();
        }
        if u <= 0.0 {
            return 0.0;
        }
        let d = u - peak;
        (peak * peak * ln1p_minus(d / peak) - d * d / 2.0).exp()
    };
    let upper = peak + 40.0;
    let total = integrate(&h, 0.0, upper, 512, 1e-15);
    let lo = x.max(0.0).sqrt();
    if lo >= upper {
        return 0.0;
    }
    integrate(&h, lo, upper, 512, 1e-15 * total) / total
}

/// Least squares through X^T X b = X^T y and Gaussian elimination with
/// partial pivoting.
pub fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let p = x[0].len();
    let mut a = vec![vec![0.0; p + 1]; p];
    for (row, &yi) in x.iter().zip(y) {
        for i in 0..p {
            for j in 0..p {
                a[i][j] += row[i] * row[j];
            }
            a[i][p] += row[i] * yi;
        }
    }
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        let (upper, lower) = a.split_at_mut(col + 1);
        let pivot_row = &upper[col];
        for row in lower {
            let f = row[col] / pivot_row[col];
            for (v, pv) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *v -= f * pv;
            }
        }
    }
    let mut b = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|j| a[i][j] * b[j]).sum();
        b[i] = (a[i][p] - s) / a[i][i];
    }
    b
}

pub fn standard_normal(r: &mut ChaCha8Rng) -> f64 {
    use rand_distr::{Distribution, StandardNormal};
    StandardNormal.sample(r)
}
