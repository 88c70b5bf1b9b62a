//! Independent reference implementations. Nothing here calls into the
//! library code it checks; inputs are plain vectors.

use std::collections::{BTreeMap, BTreeSet};

pub fn tokenize(text: &str) -> Vec<String> {
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

/// Document frequency of every token.
pub fn document_frequency(texts: &[String]) -> BTreeMap<String, usize> {
    let mut df = BTreeMap::new();
    for t in texts {
        let distinct: BTreeSet<String> = tokenize(t).into_iter().collect();
        for tok in distinct {
            *df.entry(tok).or_insert(0) += 1;
        }
    }
    df
}

/// Unnormalized tf·idf rows over `terms`, dense.
pub fn raw_tfidf(texts: &[String], terms: &[String]) -> Vec<Vec<f64>> {
    let n = texts.len() as f64;
    let df = document_frequency(texts);
    texts
        .iter()
        .map(|t| {
            let toks = tokenize(t);
            terms
                .iter()
                .map(|term| {
                    let tf = toks.iter().filter(|x| *x == term).count() as f64;
                    let d = *df.get(term).unwrap_or(&0) as f64;
                    tf * (((1.0 + n) / (1.0 + d)).ln() + 1.0)
                })
                .collect()
        })
        .collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Full sort by score descending, index ascending; first `k` ids.
pub fn rank(ids: &[usize], scores: &[f64], k: usize) -> Vec<usize> {
    let mut pairs: Vec<(f64, usize)> = scores.iter().copied().zip(ids.iter().copied()).collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    pairs.into_iter().take(k).map(|(_, i)| i).collect()
}

pub fn least_confidence(p: &[f64]) -> f64 {
    1.0 - p.iter().cloned().fold(f64::MIN, f64::max)
}

pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

pub fn margin(p: &[f64]) -> f64 {
    let mut s = p.to_vec();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    1.0 - (s[0] - s[1])
}

/// KL(p ‖ q) with both floored at 1e-8 and renormalized.
pub fn kl(p: &[f64], q: &[f64]) -> f64 {
    let fix = |v: &[f64]| {
        let c: Vec<f64> = v.iter().map(|x| x.max(1e-8)).collect();
        let s: f64 = c.iter().sum();
        c.into_iter().map(|x| x / s).collect::<Vec<_>>()
    };
    let (p, q) = (fix(p), fix(q));
    p.iter().zip(&q).map(|(a, b)| a * (a / b).ln()).sum()
}

/// Contrastive score for every candidate: mean KL from its `kn` nearest
/// labeled neighbours (exhaustive distance sort, ties to lower id).
pub fn cal_scores(
    cand: &[(usize, Vec<f64>, Vec<f64>)],
    lab: &[(usize, Vec<f64>, Vec<f64>)],
    kn: usize,
) -> Vec<f64> {
    let kn = kn.min(lab.len());
    cand.iter()
        .map(|(_, e, p)| {
            let mut by_dist: Vec<(f64, usize, &Vec<f64>)> =
                lab.iter().map(|(id, le, lp)| (euclidean(e, le), *id, lp)).collect();
            by_dist.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            by_dist[..kn].iter().map(|(_, _, lp)| kl(lp, p)).sum::<f64>() / kn as f64
        })
        .collect()
}

/// Union of each labeled point's `ks` nearest unlabeled ids, padded by
/// distance to the labeled centroid.
pub fn seals(lab: &[Vec<f64>], unl: &[(usize, Vec<f64>)], ks: usize, k: usize) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for l in lab {
        let mut d: Vec<(f64, usize)> = unl.iter().map(|(id, u)| (euclidean(l, u), *id)).collect();
        d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        out.extend(d.iter().take(ks).map(|x| x.1));
    }
    if out.len() < k {
        let dim = lab[0].len();
        let centroid: Vec<f64> = (0..dim)
            .map(|j| lab.iter().map(|l| l[j]).sum::<f64>() / lab.len() as f64)
            .collect();
        let mut d: Vec<(f64, usize)> = unl
            .iter()
            .filter(|(id, _)| !out.contains(id))
            .map(|(id, u)| (euclidean(&centroid, u), *id))
            .collect();
        d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let missing = k - out.len();
        out.extend(d.into_iter().take(missing).map(|x| x.1));
    }
    out
}

/// Greedy max-min selection recomputing every distance from scratch at each
/// step. Returns positions into `unl`.
pub fn greedy(lab: &[Vec<f64>], unl: &[Vec<f64>], k: usize) -> Vec<usize> {
    let mut centers: Vec<Vec<f64>> = lab.to_vec();
    let mut picked: Vec<usize> = Vec::new();
    for _ in 0..k {
        let mut best: Option<(f64, usize)> = None;
        for (i, u) in unl.iter().enumerate() {
            if picked.contains(&i) {
                continue;
            }
            let d = centers.iter().map(|c| euclidean(c, u)).fold(f64::INFINITY, f64::min);
            match best {
                Some((bd, _)) if d <= bd => {}
                _ => best = Some((d, i)),
            }
        }
        let (_, i) = best.unwrap();
        picked.push(i);
        centers.push(unl[i].clone());
    }
    picked
}

/// `q(x) = 1/(2n) + d(x,μ)²/(2 Σ d²)`, uniform when every point is the mean.
pub fn lightweight_q(x: &[Vec<f64>]) -> Vec<f64> {
    let n = x.len();
    let dim = x[0].len();
    let mu: Vec<f64> = (0..dim).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let d2: Vec<f64> = x.iter().map(|r| euclidean(r, &mu).powi(2)).collect();
    let total: f64 = d2.iter().sum();
    if total == 0.0 {
        return vec![1.0 / n as f64; n];
    }
    d2.iter().map(|d| 0.5 / n as f64 + 0.5 * d / total).collect()
}

/// Cohen's kappa from the contingency table.
pub fn kappa(a: &[usize], b: &[usize]) -> f64 {
    let n = a.len() as f64;
    let classes = a.iter().chain(b).max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0.0; classes]; classes];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1.0;
    }
    let po = (0..classes).map(|c| table[c][c]).sum::<f64>() / n;
    let pe = (0..classes)
        .map(|c| {
            let row: f64 = table[c].iter().sum();
            let col: f64 = table.iter().map(|r| r[c]).sum();
            row * col / (n * n)
        })
        .sum::<f64>();
    if pe == 1.0 {
        1.0
    } else {
        (po - pe) / (1.0 - pe)
    }
}

/// Accuracy, micro-F1 and macro-F1 of single-label vectors via the confusion
/// matrix.
pub fn single_label_metrics(truth: &[usize], pred: &[usize], classes: usize) -> (f64, f64, f64) {
    let mut m = vec![vec![0.0; classes]; classes];
    for (&t, &p) in truth.iter().zip(pred) {
        m[t][p] += 1.0;
    }
    let n = truth.len() as f64;
    let correct: f64 = (0..classes).map(|c| m[c][c]).sum();
    let mut f1s = Vec::new();
    let (mut tp_all, mut fp_all, mut fn_all) = (0.0, 0.0, 0.0);
    for c in 0..classes {
        let tp = m[c][c];
        let fp: f64 = (0..classes).filter(|&r| r != c).map(|r| m[r][c]).sum();
        let fn_: f64 = (0..classes).filter(|&p| p != c).map(|p| m[c][p]).sum();
        tp_all += tp;
        fp_all += fp;
        fn_all += fn_;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        f1s.push(if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        });
    }
    let micro_p = tp_all / (tp_all + fp_all);
    let micro_r = tp_all / (tp_all + fn_all);
    let micro = if micro_p + micro_r > 0.0 {
        2.0 * micro_p * micro_r / (micro_p + micro_r)
    } else {
        0.0
    };
    (correct / n, micro, f1s.iter().sum::<f64>() / classes as f64)
}

/// Checks every cell count against `n·q` within five standard deviations.
pub fn within_five_sigma(counts: &[usize], q: &[f64], n: usize) -> Result<f64, String> {
    let n = n as f64;
    let mut worst: f64 = 0.0;
    for (i, (&c, &p)) in counts.iter().zip(q).enumerate() {
        let expected = n * p;
        let sigma = (n * p * (1.0 - p)).sqrt();
        let z = if sigma > 0.0 {
            (c as f64 - expected).abs() / sigma
        } else if (c as f64 - expected).abs() < 0.5 {
            0.0
        } else {
            f64::INFINITY
        };
        worst = worst.max(z);
        if z > 5.0 {
            return Err(format!("cell {i}: count {c}, expected {expected:.1} (z = {z:.2})"));
        }
    }
    Ok(worst)
}

/// Softmax cross-entropy of an averaged-embedding linear model for tokens
/// `toks` and target `c`, with every parameter passed explicitly.
pub fn embed_avg_loss(e: &[Vec<f64>], w: &[Vec<f64>], b: &[f64], toks: &[usize], c: usize) -> f64 {
    let d = w[0].len();
    let mut h = vec![0.0; d];
    if !toks.is_empty() {
        for &t in toks {
            for j in 0..d {
                h[j] += e[t][j];
            }
        }
        for v in &mut h {
            *v /= toks.len() as f64;
        }
    }
    let z: Vec<f64> = w
        .iter()
        .zip(b)
        .map(|(row, bias)| row.iter().zip(&h).map(|(a, x)| a * x).sum::<f64>() + bias)
        .collect();
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    lse - z[c]
}

/// Gradient norms of the averaged-embedding loss for target `c`, all by
/// central differences: (head weights and bias, largest embedding-row norm
/// over the document's tokens, all touched embedding rows together).
pub fn fd_group_norms(
    e: &[Vec<f64>],
    w: &[Vec<f64>],
    b: &[f64],
    toks: &[usize],
    c: usize,
    step: f64,
) -> (f64, f64, f64) {
    let mut e = e.to_vec();
    let mut w = w.to_vec();
    let mut b = b.to_vec();
    let mut head_sq = 0.0;
    for i in 0..w.len() {
        for j in 0..w[i].len() {
            let orig = w[i][j];
            w[i][j] = orig + step;
            let plus = embed_avg_loss(&e, &w, &b, toks, c);
            w[i][j] = orig - step;
            let minus = embed_avg_loss(&e, &w, &b, toks, c);
            w[i][j] = orig;
            head_sq += ((plus - minus) / (2.0 * step)).powi(2);
        }
    }
    for i in 0..b.len() {
        let orig = b[i];
        b[i] = orig + step;
        let plus = embed_avg_loss(&e, &w, &b, toks, c);
        b[i] = orig - step;
        let minus = embed_avg_loss(&e, &w, &b, toks, c);
        b[i] = orig;
        head_sq += ((plus - minus) / (2.0 * step)).powi(2);
    }
    let distinct: BTreeSet<usize> = toks.iter().copied().collect();
    let mut word_max: f64 = 0.0;
    let mut word_sq = 0.0;
    for t in distinct {
        let mut row_sq = 0.0;
        for j in 0..e[t].len() {
            let orig = e[t][j];
            e[t][j] = orig + step;
            let plus = embed_avg_loss(&e, &w, &b, toks, c);
            e[t][j] = orig - step;
            let minus = embed_avg_loss(&e, &w, &b, toks, c);
            e[t][j] = orig;
            row_sq += ((plus - minus) / (2.0 * step)).powi(2);
        }
        word_max = word_max.max(row_sq.sqrt());
        word_sq += row_sq;
    }
    (head_sq.sqrt(), word_max, (head_sq + word_sq).sqrt())
}

/// Relative error with a floor on the denominator so exact zeros compare
/// absolutely.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}
