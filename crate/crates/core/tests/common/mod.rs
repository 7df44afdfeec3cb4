//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::BTreeSet;

/// Every permutation of `0..n`, by recursive insertion.
pub fn all_permutations(n: u32) -> Vec<Vec<u32>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for smaller in all_permutations(n - 1) {
        for pos in 0..=smaller.len() {
            let mut p = smaller.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out
}

/// Whether following `sigma` from seat 0 visits every seat before returning.
pub fn is_single_cycle(sigma: &[u32]) -> bool {
    let n = sigma.len();
    let mut at = 0usize;
    for step in 1..=n {
        at = sigma[at] as usize;
        if at == 0 {
            return step == n;
        }
    }
    false
}

pub fn seat_rules_hold(sigma: &[u32]) -> bool {
    let n = sigma.len() as u32;
    sigma.iter().enumerate().all(|(i, &t)| {
        let i = i as u32;
        let left = (i + n - 1) % n;
        let right = (i + 1) % n;
        let opposite = n.is_multiple_of(2).then_some((i + n / 2) % n);
        t != i && t != left && t != right && Some(t) != opposite
    })
}

/// All admissible evaluator cycles for `n` seats, by exhaustive search.
pub fn admissible_cycles(n: u32) -> BTreeSet<Vec<u32>> {
    all_permutations(n).into_iter().filter(|p| is_single_cycle(p) && seat_rules_hold(p)).collect()
}

/// Hamilton apportionment with an explicit (remainder desc, index asc) order.
pub fn hamilton(weights: &[f64], units: u32) -> Vec<u32> {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return vec![0; weights.len()];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| w * f64::from(units) / total).collect();
    let mut out: Vec<u32> = quotas.iter().map(|q| q.floor() as u32).collect();
    let mut left = units - out.iter().sum::<u32>();
    let mut ranked: Vec<(f64, usize)> = quotas.iter().enumerate().map(|(i, q)| (q - q.floor(), i)).collect();
    ranked.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for (_, i) in ranked {
        if left == 0 {
            break;
        }
        out[i] += 1;
        left -= 1;
    }
    out
}

/// Gini by mean absolute difference over all ordered pairs.
pub fn gini_pairwise(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sum: f64 = x.iter().sum();
    if sum == 0.0 {
        return 0.0;
    }
    let mut acc = 0.0;
    for a in x {
        for b in x {
            acc += (a - b).abs();
        }
    }
    acc / (2.0 * n * sum)
}

/// Pairs `(i, j)`, `i < j`, found by checking every pair of seats.
pub fn mutual_pairs_brute(listen: &[u32]) -> BTreeSet<(u32, u32)> {
    let n = listen.len() as u32;
    let mut out = BTreeSet::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if listen[i as usize] == j && listen[j as usize] == i {
                out.insert((i, j));
            }
        }
    }
    out
}

pub fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = xs.len() / 2;
    if xs.len().is_multiple_of(2) {
        (xs[m - 1] + xs[m]) / 2.0
    } else {
        xs[m]
    }
}
