//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's numerics; each value is recomputed from definitions.

#![allow(dead_code)]

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub fn laplace_pdf(s: f64, mean: f64, b: f64) -> f64 {
    (-(s - mean).abs() / b).exp() / (2.0 * b)
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    assert!(n % 2 == 0);
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Integral over the real line, split at 0 and 1 where the Laplace
/// densities used here have kinks, truncated `60 b` out.
pub fn integrate_line<F: Fn(f64) -> f64 + Copy>(f: F, b: f64) -> f64 {
    let reach = 60.0 * b;
    let n = 40_000;
    simpson(f, -reach, 0.0, n) + simpson(f, 0.0, 1.0, n) + simpson(f, 1.0, 1.0 + reach, n)
}

/// `E_{s ~ mu}[(mu0(s) / mu(s))^k]` with `mu0 = Lap(0, b)` and
/// `mu = (1 - q) Lap(0, b) + q Lap(1, b)`, by direct quadrature.
pub fn direct_rtilde(q: f64, b: f64, order: f64) -> f64 {
    integrate_line(
        |s| {
            let mu0 = laplace_pdf(s, 0.0, b);
            let mu = (1.0 - q) * mu0 + q * laplace_pdf(s, 1.0, b);
            mu * (mu0 / mu).powf(order)
        },
        b,
    )
}

/// `E_{s ~ mu0}[(mu(s) / mu0(s))^k]` by direct quadrature.
pub fn direct_r(q: f64, b: f64, order: f64) -> f64 {
    integrate_line(
        |s| {
            let mu0 = laplace_pdf(s, 0.0, b);
            let mu = (1.0 - q) * mu0 + q * laplace_pdf(s, 1.0, b);
            mu0 * (mu / mu0).powf(order)
        },
        b,
    )
}

/// Rényi divergence of order `alpha` between `Lap(0, b)` and `Lap(1, b)`.
pub fn laplace_renyi_by_quadrature(b: f64, alpha: f64) -> f64 {
    let moment = integrate_line(
        |s| laplace_pdf(s, 0.0, b).powf(alpha) * laplace_pdf(s, 1.0, b).powf(1.0 - alpha),
        b,
    );
    moment.ln() / (alpha - 1.0)
}

/// Inverse-CDF Laplace draw.
pub fn draw_laplace<R: Rng>(b: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.random::<f64>() - 0.5;
    -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Monte-Carlo `E_{s ~ Lap(0, b)}[r(s)^k]` with `n` samples; returns the
/// mean and its standard error.
pub fn mc_mixture_moment(q: f64, b: f64, order: f64, n: usize, seed: u64) -> (f64, f64) {
    const CHUNKS: usize = 64;
    let per = n / CHUNKS;
    let parts: Vec<(f64, f64)> = (0..CHUNKS)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(c as u64));
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..per {
                let s = draw_laplace(b, &mut rng);
                let mu0 = laplace_pdf(s, 0.0, b);
                let mu = (1.0 - q) * mu0 + q * laplace_pdf(s, 1.0, b);
                let v = (mu / mu0).powf(order);
                s1 += v;
                s2 += v * v;
            }
            (s1, s2)
        })
        .collect();
    let total = (per * CHUNKS) as f64;
    let (s1, s2) = parts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let mean = s1 / total;
    let var = (s2 / total - mean * mean).max(0.0);
    (mean, (var / total).sqrt())
}

/// Brute-force trimmed sum on one-dimensional multisets over the grid
/// `{0, 0.1, ..., 1.0}`, held as counts per grid point.
pub const GRID: usize = 11;
pub type Counts = [u8; GRID];

pub fn grid_value(i: usize) -> f64 {
    i as f64 / 10.0
}

pub fn counts_of(values: &[usize]) -> Counts {
    let mut c = [0u8; GRID];
    for &v in values {
        c[v] += 1;
    }
    c
}

pub fn size(c: &Counts) -> usize {
    c.iter().map(|&k| k as usize).sum()
}

/// Sum of all but the `trim` largest values; zero when `size <= trim`.
pub fn brute_tsum(c: &Counts, trim: usize) -> f64 {
    let m = size(c);
    if m <= trim {
        return 0.0;
    }
    let mut keep = m - trim;
    let mut total = 0.0;
    for (i, &k) in c.iter().enumerate() {
        let take = keep.min(k as usize);
        total += take as f64 * grid_value(i);
        keep -= take;
        if keep == 0 {
            break;
        }
    }
    total
}

/// Every multiset one addition (of any grid value) or one removal away.
pub fn neighbours(c: &Counts) -> Vec<Counts> {
    let mut out = Vec::with_capacity(2 * GRID);
    for i in 0..GRID {
        let mut added = *c;
        added[i] += 1;
        out.push(added);
        if c[i] > 0 {
            let mut removed = *c;
            removed[i] -= 1;
            out.push(removed);
        }
    }
    out
}

/// Largest change of the trimmed sum under a single edit.
pub fn brute_ls(c: &Counts, trim: usize) -> f64 {
    let here = brute_tsum(c, trim);
    neighbours(c)
        .iter()
        .map(|n| (brute_tsum(n, trim) - here).abs())
        .fold(0.0, f64::max)
}

/// `LS^(r)` for `r = 0..=max_r`: the largest single-edit sensitivity over
/// all multisets reachable in at most `r` edits.
pub fn brute_ls_profile(c: &Counts, trim: usize, max_r: usize) -> Vec<f64> {
    let mut seen: HashSet<Counts> = HashSet::from([*c]);
    let mut frontier = vec![*c];
    let mut best = brute_ls(c, trim);
    let mut profile = vec![best];
    for _ in 0..max_r {
        let mut next = Vec::new();
        for state in &frontier {
            for n in neighbours(state) {
                if seen.insert(n) {
                    best = best.max(brute_ls(&n, trim));
                    next.push(n);
                }
            }
        }
        profile.push(best);
        frontier = next;
    }
    profile
}

/// `min { r : LS^(r) > tau }`, or `None` when no `r <= max_r` qualifies.
pub fn brute_margin(profile: &[f64], tau: f64) -> Option<usize> {
    profile.iter().position(|&ls| ls > tau)
}
