//! Independent reference implementations shared by the integration tests.
//!
//! Each `check_*` function compares a library routine against a reference
//! computed here from first principles and returns a description of the
//! first disagreement.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use watch_core::displays::{local_regression, SplineBasis, SplineFit};
use watch_core::hettest::{global_test, linear_statistic};
use watch_core::ida::{associate_columns, cluster_distances};
use watch_core::importance::nogueira_stability;
use watch_core::importance::pdp::partial_dependence;
use watch_core::learners::lasso::fit_lasso_fixed;
use watch_core::learners::stacking::simplex_least_squares;
use watch_core::learners::tree::{fit_cart, CartParams, Node, Split, Tree};
use watch_core::tabular::{Column, DesignMatrix, Feature, FeatureMatrix};

pub type Check = Result<(), String>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normals(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.sample(StandardNormal)).collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

// ---------------------------------------------------------------- CART

fn sse(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|a| (a - m).powi(2)).sum()
}

/// Every admissible single split by exhaustive enumeration of each feature
/// and each threshold between consecutive distinct values, as `(feature,
/// threshold, SSE reduction)`.
pub fn cart_split_candidates(cols: &[Vec<f64>], y: &[f64], min_leaf: usize) -> Vec<(usize, f64, f64)> {
    let total = sse(y);
    let mut out = Vec::new();
    for (j, col) in cols.iter().enumerate() {
        let mut vals = col.clone();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = 0.5 * (w[0] + w[1]);
            let left: Vec<f64> = (0..y.len()).filter(|&i| col[i] <= t).map(|i| y[i]).collect();
            let right: Vec<f64> = (0..y.len()).filter(|&i| col[i] > t).map(|i| y[i]).collect();
            if left.len() >= min_leaf && right.len() >= min_leaf {
                out.push((j, t, total - sse(&left) - sse(&right)));
            }
        }
    }
    out
}

/// Root split of `fit_cart` against exhaustive enumeration on random 8-row
/// instances, some with tied covariate values. The tree must achieve the
/// optimal reduction at one of the optimal locations (several features can
/// induce the same row partition).
pub fn check_cart_root_splits(instances: usize, seed: u64) -> Check {
    let mut r = rng(seed);
    let tol = 1e-10;
    for inst in 0..instances {
        let p = 1 + inst % 3;
        let coarse = inst % 2 == 1;
        let cols: Vec<Vec<f64>> = (0..p)
            .map(|_| {
                normals(&mut r, 8)
                    .into_iter()
                    .map(|v| if coarse { (v * 2.0).round() / 2.0 } else { v })
                    .collect()
            })
            .collect();
        let y = normals(&mut r, 8);
        let min_leaf = 1 + inst % 3;
        let params = CartParams {
            max_depth: 1,
            min_leaf,
            mtry: None,
        };
        let tree = fit_cart(&FeatureMatrix::from_columns(cols.clone()), &y, &params, inst as u64);
        let cands = cart_split_candidates(&cols, &y, min_leaf);
        let best = cands.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);
        let should_split = best > 1e-12 * sse(&y);
        match &tree.nodes[0] {
            Node::Leaf { .. } if !should_split => {}
            Node::Internal {
                feature,
                split: Split::Threshold(t),
                ..
            } if should_split => {
                let optimal: Vec<&(usize, f64, f64)> = cands.iter().filter(|c| c.2 >= best - tol).collect();
                if !optimal.iter().any(|c| c.0 == *feature && close(c.1, *t, 1e-12)) {
                    return Err(format!("instance {inst}: split ({feature}, {t}) not among optimal {optimal:?}"));
                }
            }
            node => return Err(format!("instance {inst}: tree root {node:?}, best reduction {best}")),
        }
    }
    Ok(())
}

// ------------------------------------------------------------ stacking

fn stack_loss(z: &[Vec<f64>], y: &[f64], w: &[f64]) -> f64 {
    (0..y.len())
        .map(|i| {
            let f: f64 = z.iter().zip(w).map(|(c, wk)| wk * c[i]).sum();
            (y[i] - f).powi(2)
        })
        .sum()
}

/// Minimizer of the squared error over a grid of step `step` on the
/// three-weight simplex.
pub fn simplex_grid_oracle(z: &[Vec<f64>], y: &[f64], step: f64) -> Vec<f64> {
    assert_eq!(z.len(), 3);
    let k = (1.0 / step).round() as usize;
    let mut best = (f64::INFINITY, vec![0.0; 3]);
    for a in 0..=k {
        for b in 0..=k - a {
            let w = [a as f64 / k as f64, b as f64 / k as f64, (k - a - b) as f64 / k as f64];
            let l = stack_loss(z, y, &w);
            if l < best.0 {
                best = (l, w.to_vec());
            }
        }
    }
    best.1
}

/// Simplex least squares against the grid oracle for interior and
/// boundary optima.
pub fn check_stacking_weights(seed: u64) -> Check {
    let mut r = rng(seed);
    let targets = [[0.6, 0.3, 0.1], [0.7, 0.3, -0.2], [0.2, 0.2, 0.6], [1.2, -0.1, -0.1]];
    for (case, truth) in targets.iter().enumerate() {
        let n = 60;
        let z: Vec<Vec<f64>> = (0..3).map(|_| normals(&mut r, n)).collect();
        let noise = normals(&mut r, n);
        let y: Vec<f64> = (0..n)
            .map(|i| truth.iter().zip(&z).map(|(t, c)| t * c[i]).sum::<f64>() + 0.1 * noise[i])
            .collect();
        let got = simplex_least_squares(&z, &y);
        let want = simplex_grid_oracle(&z, &y, 0.01);
        let sum: f64 = got.iter().sum();
        if got.iter().any(|&w| w < 0.0) || !close(sum, 1.0, 1e-9) {
            return Err(format!("case {case}: weights {got:?} are not on the simplex"));
        }
        for (g, w) in got.iter().zip(&want) {
            if !close(*g, *w, 0.02) {
                return Err(format!("case {case}: weights {got:?} vs grid oracle {want:?}"));
            }
        }
        if stack_loss(&z, &y, &got) > stack_loss(&z, &y, &want) + 1e-9 {
            return Err(format!("case {case}: solver loss exceeds the grid optimum"));
        }
    }
    Ok(())
}

// --------------------------------------------------------------- lasso

/// Lasso on the original scale: minimize
/// `(1/2n) ||y - a - X b||^2 + lambda * sum_j sd_j |b_j|`
/// (population standard deviations) by proximal gradient. Returns
/// `(intercept, slopes)`.
pub fn lasso_ista_oracle(cols: &[Vec<f64>], y: &[f64], lambda: f64) -> (f64, Vec<f64>) {
    let n = y.len();
    let nf = n as f64;
    let p = cols.len();
    let means: Vec<f64> = cols.iter().map(|c| c.iter().sum::<f64>() / nf).collect();
    let ym = y.iter().sum::<f64>() / nf;
    let xc: Vec<Vec<f64>> = cols.iter().zip(&means).map(|(c, m)| c.iter().map(|v| v - m).collect()).collect();
    let yc: Vec<f64> = y.iter().map(|v| v - ym).collect();
    let sds: Vec<f64> = xc.iter().map(|c| (c.iter().map(|v| v * v).sum::<f64>() / nf).sqrt()).collect();
    // Step from the trace of X^T X / n, an upper bound on its top eigenvalue.
    let lip: f64 = xc.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>() / nf).sum();
    let step = 1.0 / lip;
    let mut b = vec![0.0; p];
    for _ in 0..2_000_000 {
        let resid: Vec<f64> = (0..n).map(|i| yc[i] - (0..p).map(|j| xc[j][i] * b[j]).sum::<f64>()).collect();
        let mut change = 0.0f64;
        for j in 0..p {
            let grad = -xc[j].iter().zip(&resid).map(|(a, r)| a * r).sum::<f64>() / nf;
            let v = b[j] - step * grad;
            let thr = step * lambda * sds[j];
            let next = v.signum() * (v.abs() - thr).max(0.0);
            change = change.max((next - b[j]).abs());
            b[j] = next;
        }
        if change < 1e-14 {
            break;
        }
    }
    let a = ym - b.iter().zip(&means).map(|(bj, m)| bj * m).sum::<f64>();
    (a, b)
}

/// A 5 x 2 design at a fixed penalty.
pub fn check_lasso_fixed() -> Check {
    let cols = vec![vec![1.0, 2.0, 3.0, 4.0, 5.0], vec![2.0, -1.0, 0.5, 3.0, 1.0]];
    let y = vec![1.1, 1.9, 3.2, 4.8, 5.1];
    for lambda in [0.1, 0.5] {
        let design = DesignMatrix {
            columns: cols.clone(),
            labels: vec!["a".into(), "b".into()],
            n_rows: 5,
        };
        let m = fit_lasso_fixed(&design, &y, lambda).map_err(|e| e.to_string())?;
        let (a, b) = lasso_ista_oracle(&cols, &y, lambda);
        if !close(m.intercept, a, 1e-4) || m.coefficients.iter().zip(&b).any(|(u, v)| !close(*u, *v, 1e-4)) {
            return Err(format!(
                "lambda {lambda}: ({}, {:?}) vs oracle ({a}, {b:?})",
                m.intercept, m.coefficients
            ));
        }
    }
    Ok(())
}

// -------------------------------------------------------------- spline

/// Linear-interpolation sample quantile (`(n - 1) p` positions).
pub fn quantile(x: &[f64], prob: f64) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let h = (s.len() - 1) as f64 * prob;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(s.len() - 1);
    s[lo] + (h - lo as f64) * (s[hi] - s[lo])
}

/// Natural cubic spline basis `1, t, d_k(t) - d_{K-1}(t)` with
/// `d_k(t) = ((t - xi_k)_+^3 - (t - xi_K)_+^3) / (xi_K - xi_k)`, on `t`
/// rescaled to `[0, 1]` by the boundary knots.
pub fn natural_spline_row(knots: &[f64], v: f64) -> Vec<f64> {
    let k = knots.len();
    let (lo, hi) = (knots[0], knots[k - 1]);
    let t = (v - lo) / (hi - lo);
    let xi: Vec<f64> = knots.iter().map(|kn| (kn - lo) / (hi - lo)).collect();
    let pos3 = |u: f64| if u > 0.0 { u * u * u } else { 0.0 };
    let d = |j: usize| (pos3(t - xi[j]) - pos3(t - xi[k - 1])) / (xi[k - 1] - xi[j]);
    let mut row = vec![1.0, t];
    for j in 0..k - 2 {
        row.push(d(j) - d(k - 2));
    }
    row
}

/// Solve `A x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Least-squares spline coefficients from the normal equations.
pub fn spline_oracle(x: &[f64], y: &[f64], knots: &[f64]) -> Vec<f64> {
    let rows: Vec<Vec<f64>> = x.iter().map(|&v| natural_spline_row(knots, v)).collect();
    let q = rows[0].len();
    let mut xtx = vec![vec![0.0; q]; q];
    let mut xty = vec![0.0; q];
    for (r, yi) in rows.iter().zip(y) {
        for a in 0..q {
            xty[a] += r[a] * yi;
            for b in 0..q {
                xtx[a][b] += r[a] * r[b];
            }
        }
    }
    gauss_solve(xtx, xty)
}

pub fn check_spline_coefficients(seed: u64) -> Check {
    let mut r = rng(seed);
    for df in [1, 3, 4, 6] {
        let n = 150;
        let x: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..3.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| (1.3 * v).sin() + 0.2 * r.sample::<f64, _>(StandardNormal)).collect();
        let basis = SplineBasis::from_data(&x, df);
        let knots: Vec<f64> = (0..=df).map(|i| quantile(&x, i as f64 / df as f64)).collect();
        if basis.knots.len() != knots.len() || basis.knots.iter().zip(&knots).any(|(a, b)| !close(*a, *b, 1e-12)) {
            return Err(format!("df {df}: knots {:?} vs {knots:?}", basis.knots));
        }
        let fit = SplineFit::fit(basis, &x, &y).map_err(|e| e.to_string())?;
        let want = spline_oracle(&x, &y, &knots);
        for (k, (g, w)) in fit.coefficients.iter().zip(&want).enumerate() {
            if !close(*g, *w, 1e-8 * (1.0 + w.abs())) {
                return Err(format!("df {df}: coefficient {k} is {g}, oracle {w}"));
            }
        }
    }
    Ok(())
}

// ----------------------------------------------------- local regression

/// Tricube-weighted linear fit over the `k` nearest neighbours of `g`
/// (ties by index), solved through the 2 x 2 normal equations centred at
/// `g`.
pub fn local_linear_oracle(x: &[f64], y: &[f64], span: f64, g: f64) -> f64 {
    let n = x.len();
    let k = ((span * n as f64).ceil() as usize).clamp(2, n);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| (x[a] - g).abs().total_cmp(&(x[b] - g).abs()).then(a.cmp(&b)));
    idx.truncate(k);
    let h = idx.iter().map(|&i| (x[i] - g).abs()).fold(0.0, f64::max);
    let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &i in &idx {
        let u = (x[i] - g).abs() / h;
        let w = if u < 1.0 { (1.0 - u * u * u).powi(3) } else { 0.0 };
        let d = x[i] - g;
        s0 += w;
        s1 += w * d;
        s2 += w * d * d;
        t0 += w * y[i];
        t1 += w * d * y[i];
    }
    (s2 * t0 - s1 * t1) / (s0 * s2 - s1 * s1)
}

pub fn check_local_regression(seed: u64) -> Check {
    let mut r = rng(seed);
    for span in [0.3, 0.75, 1.0] {
        let n = 80;
        let x: Vec<f64> = (0..n).map(|_| r.random_range(0.0..10.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| v.cos() + 0.3 * r.sample::<f64, _>(StandardNormal)).collect();
        let grid: Vec<f64> = (0..25).map(|i| 0.5 + 9.0 * i as f64 / 24.0).collect();
        let got = local_regression(&x, &y, span, &grid).map_err(|e| e.to_string())?;
        for (g, v) in grid.iter().zip(&got) {
            let want = local_linear_oracle(&x, &y, span, *g);
            if !close(*v, want, 1e-10) {
                return Err(format!("span {span}, x = {g}: {v} vs oracle {want}"));
            }
        }
    }
    Ok(())
}

// ----------------------------------------------------- linear statistic

/// Every permutation of `0..n` (Heap's algorithm).
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if k <= 1 {
            out.push(a.clone());
            return;
        }
        for i in 0..k {
            heap(k - 1, a, out);
            let j = if k.is_multiple_of(2) { i } else { 0 };
            a.swap(j, k - 1);
        }
    }
    let mut a: Vec<usize> = (0..n).collect();
    let mut out = Vec::new();
    heap(n, &mut a, &mut out);
    out
}

/// `|T - E T| / sd T` for `T = sum x_i phi_i`, with the mean and variance
/// taken over all `n!` permutations of `phi`.
pub fn brute_force_standardized(x: &[f64], phi: &[f64], perms: &[Vec<usize>]) -> f64 {
    let t = |perm: &[usize]| -> f64 { x.iter().zip(perm).map(|(a, &k)| a * phi[k]).sum() };
    let values: Vec<f64> = perms.iter().map(|p| t(p)).collect();
    let m = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64;
    let obs: f64 = x.iter().zip(phi).map(|(a, b)| a * b).sum();
    if var <= 1e-300 {
        0.0
    } else {
        (obs - m).abs() / var.sqrt()
    }
}

/// Brute-force statistic of a covariate: continuous as is, categorical as
/// the maximum over level indicators.
pub fn brute_force_feature(f: &Feature, phi: &[f64], perms: &[Vec<usize>]) -> f64 {
    match f {
        Feature::Continuous(v) => brute_force_standardized(v, phi, perms),
        Feature::Categorical { codes, levels } => (0..levels.len())
            .map(|l| {
                let ind: Vec<f64> = codes.iter().map(|&c| f64::from(c as usize == l)).collect();
                brute_force_standardized(&ind, phi, perms)
            })
            .fold(0.0, f64::max),
    }
}

fn small_features(r: &mut ChaCha8Rng, n: usize) -> FeatureMatrix {
    let cont = normals(r, n);
    let codes: Vec<u32> = (0..n).map(|i| (i % 3) as u32).collect();
    let bin: Vec<u32> = (0..n).map(|i| u32::from(i % 2 == 0)).collect();
    FeatureMatrix::new(
        vec!["c".into(), "k".into(), "b".into()],
        vec![
            Feature::Continuous(cont),
            Feature::Categorical {
                codes,
                levels: vec!["u".into(), "v".into(), "w".into()],
            },
            Feature::Categorical {
                codes: bin,
                levels: vec!["no".into(), "yes".into()],
            },
        ],
    )
    .expect("valid features")
}

pub fn check_linear_statistic(seed: u64) -> Check {
    let mut r = rng(seed);
    for n in 3..=7 {
        let perms = permutations(n);
        let x = small_features(&mut r, n);
        let phi = normals(&mut r, n);
        for (name, f) in x.names.iter().zip(&x.features) {
            let got = linear_statistic(f, &phi);
            let want = brute_force_feature(f, &phi, &perms);
            if !close(got, want, 1e-10) {
                return Err(format!("n = {n}, covariate {name}: {got} vs brute force {want}"));
            }
        }
    }
    Ok(())
}

/// Exact permutation p-value of the max statistic over all `n!`
/// permutations of `phi`.
pub fn exact_permutation_p(x: &FeatureMatrix, phi: &[f64]) -> f64 {
    let perms = permutations(phi.len());
    let stat = |p: &[f64]| x.features.iter().map(|f| linear_statistic(f, p)).fold(0.0, f64::max);
    let obs = stat(phi);
    let hits = perms
        .iter()
        .filter(|perm| {
            let p: Vec<f64> = perm.iter().map(|&k| phi[k]).collect();
            stat(&p) >= obs - 1e-9 * (1.0 + obs)
        })
        .count();
    hits as f64 / perms.len() as f64
}

/// Monte Carlo p-value of `global_test` within four binomial standard
/// errors of the exact permutation p-value.
pub fn check_exact_p_value(seed: u64) -> Check {
    let mut r = rng(seed);
    let b = 9999;
    for rep in 0..3 {
        let n = 7;
        let x = small_features(&mut r, n);
        let mut phi = normals(&mut r, n);
        if rep == 1 {
            // Strong dependence on the continuous covariate.
            let c = match &x.features[0] {
                Feature::Continuous(v) => v.clone(),
                _ => unreachable!(),
            };
            phi = c.iter().zip(&phi).map(|(a, e)| 2.0 * a + 0.2 * e).collect();
        }
        let exact = exact_permutation_p(&x, &phi);
        let got = global_test(&x, &phi, b, seed + rep).map_err(|e| e.to_string())?.p_value;
        let se = (exact * (1.0 - exact) / b as f64).sqrt();
        if (got - exact).abs() > 4.0 * se + 2.0 / b as f64 {
            return Err(format!("replicate {rep}: Monte Carlo p {got} vs exact {exact}"));
        }
    }
    Ok(())
}

// ---------------------------------------------------- partial dependence

/// Average prediction with the listed features overwritten in a copy of
/// the data.
pub fn pd_oracle(trees: &[Tree], x: &FeatureMatrix, features: &[usize], point: &[f64]) -> f64 {
    let mut forced = x.clone();
    for (&f, &v) in features.iter().zip(point) {
        forced.features[f] = match &x.features[f] {
            Feature::Continuous(c) => Feature::Continuous(vec![v; c.len()]),
            Feature::Categorical { codes, levels } => Feature::Categorical {
                codes: vec![v as u32; codes.len()],
                levels: levels.clone(),
            },
        };
    }
    let n = x.n_rows();
    (0..n)
        .map(|i| trees.iter().map(|t| t.predict_row(&forced, i)).sum::<f64>() / trees.len() as f64)
        .sum::<f64>()
        / n as f64
}

pub fn check_partial_dependence(seed: u64) -> Check {
    let mut r = rng(seed);
    let n = 60;
    let a = normals(&mut r, n);
    let b = normals(&mut r, n);
    let codes: Vec<u32> = (0..n).map(|i| (i % 3) as u32).collect();
    let y: Vec<f64> = (0..n).map(|i| a[i] * f64::from(codes[i]) + b[i].abs()).collect();
    let x = FeatureMatrix::new(
        vec!["a".into(), "b".into(), "k".into()],
        vec![
            Feature::Continuous(a),
            Feature::Continuous(b),
            Feature::Categorical {
                codes,
                levels: vec!["p".into(), "q".into(), "s".into()],
            },
        ],
    )
    .map_err(|e| e.to_string())?;
    let params = CartParams {
        max_depth: 4,
        min_leaf: 3,
        mtry: None,
    };
    let trees: Vec<Tree> = (0..3)
        .map(|s| {
            let rows: Vec<usize> = (0..n).filter(|i| (i + s) % 4 != 0).collect();
            let sub = x.select_rows(&rows);
            let ys: Vec<f64> = rows.iter().map(|&i| y[i]).collect();
            fit_cart(&sub, &ys, &params, s as u64)
        })
        .collect();
    let grids = vec![vec![-1.0, 0.0, 0.7], vec![0.0, 1.0, 2.0]];
    let features = [0, 2];
    let pd = partial_dependence(&trees, &x, &features, &grids);
    for i in 0..3 {
        for j in 0..3 {
            let want = pd_oracle(&trees, &x, &features, &[grids[0][i], grids[1][j]]);
            if !close(pd.at(&[i, j]), want, 1e-12) {
                return Err(format!("cell ({i}, {j}): {} vs oracle {want}", pd.at(&[i, j])));
            }
        }
    }
    Ok(())
}

// ------------------------------------------------------ hand-worked values

pub fn check_nogueira_hand_values() -> Check {
    let opposite = nogueira_stability(&[vec![true, false], vec![false, true]]);
    let identical = nogueira_stability(&vec![vec![true, false, true]; 4]);
    if opposite != Some(-1.0) || identical != Some(1.0) {
        return Err(format!("opposite {opposite:?} (want -1), identical {identical:?} (want 1)"));
    }
    Ok(())
}

fn labels(name: &str, v: &[&str]) -> Column {
    let l: Vec<Option<&str>> = v.iter().map(|s| Some(*s)).collect();
    Column::from_labels(name, &l)
}

/// Cramér's V on tables worked by hand: perfect association 1, none 0, and
/// the 2 x 2 table `[[20, 10], [5, 15]]` with
/// `|ad - bc| / sqrt(r1 r2 c1 c2) = 250 / sqrt(375000)`.
pub fn check_cramers_v() -> Check {
    let table = |cells: [[usize; 2]; 2]| {
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for (i, row) in cells.iter().enumerate() {
            for (j, &c) in row.iter().enumerate() {
                for _ in 0..c {
                    a.push(if i == 0 { "r0" } else { "r1" });
                    b.push(if j == 0 { "c0" } else { "c1" });
                }
            }
        }
        (labels("a", &a), labels("b", &b))
    };
    let cases = [
        ([[10, 0], [0, 10]], 1.0),
        ([[5, 5], [5, 5]], 0.0),
        ([[20, 10], [5, 15]], 250.0 / 375_000f64.sqrt()),
    ];
    for (cells, want) in cases {
        let (a, b) = table(cells);
        let got = associate_columns(&a, &b).map_err(|e| e.to_string())?.value;
        if !close(got, want, 1e-12) {
            return Err(format!("table {cells:?}: {got} vs {want}"));
        }
    }
    Ok(())
}

/// Average linkage on `d(a,b) = 1, d(a,c) = 4, d(b,c) = 3, d(*,e) = 10`:
/// `{a,b}` at 1, `{a,b,c}` at (4 + 3) / 2, everything at 10.
pub fn check_average_linkage() -> Check {
    let names: Vec<String> = ["a", "b", "c", "e"].iter().map(|s| s.to_string()).collect();
    let d = vec![
        vec![0.0, 1.0, 4.0, 10.0],
        vec![1.0, 0.0, 3.0, 10.0],
        vec![4.0, 3.0, 0.0, 10.0],
        vec![10.0, 10.0, 10.0, 0.0],
    ];
    let dn = cluster_distances(&names, &d).map_err(|e| e.to_string())?;
    let heights: Vec<f64> = dn.merges.iter().map(|m| m.height).collect();
    if heights != [1.0, 3.5, 10.0] {
        return Err(format!("merge heights {heights:?}"));
    }
    let first: Vec<&str> = dn.merges[0].members.iter().map(String::as_str).collect();
    if first != ["a", "b"] {
        return Err(format!("first merge {first:?}"));
    }
    Ok(())
}

/// Every oracle comparison, labelled.
pub fn oracle_suite() -> Vec<(&'static str, Check)> {
    vec![
        ("CART root split vs exhaustive enumeration (8 rows)", check_cart_root_splits(300, 7)),
        ("stacking weights vs simplex grid (0.02)", check_stacking_weights(11)),
        ("lasso vs proximal-gradient oracle (1e-4)", check_lasso_fixed()),
        ("spline coefficients vs normal equations (1e-8)", check_spline_coefficients(13)),
        ("local regression vs direct weighted LS (1e-10)", check_local_regression(17)),
        ("linear statistic vs brute-force permutation variance (1e-10)", check_linear_statistic(19)),
        ("Monte Carlo p vs exact permutation p", check_exact_p_value(23)),
        ("partial dependence vs brute force (1e-12)", check_partial_dependence(29)),
        ("Nogueira index hand values", check_nogueira_hand_values()),
        ("Cramer's V hand values", check_cramers_v()),
        ("average linkage hand example", check_average_linkage()),
    ]
}

// ---------------------------------------------------------------------------
// Structural invariants of the workflow.

use std::path::Path;

use watch_core::benchgen::{self, Effect, GeneratedTrial, ScenarioSpec};
use watch_core::cate::{
    self, assign_folds, InjectedNuisances, LearnerNuisances, NuisanceConfig, RecordingNuisances, DEFAULT_CLIP,
};
use watch_core::importance::{importance_core, ImportanceConfig, ImportanceReport};
use watch_core::learners::lasso::LassoParams;
use watch_core::learners::LearnerSpec;
use watch_core::pipeline::{self, RunConfig};
use watch_core::tabular::{AnalysisPlan, ColumnData, Dataset, Propensity};

pub fn small_trial(n: usize, seed: u64, effect: Effect) -> GeneratedTrial {
    benchgen::generate(&ScenarioSpec {
        n,
        seed,
        effect,
        ..ScenarioSpec::default()
    })
    .expect("scenario generates")
}

pub fn lasso_nuisances() -> NuisanceConfig {
    NuisanceConfig {
        outcome: LearnerSpec::Lasso(LassoParams::default()),
        ..NuisanceConfig::default()
    }
}

/// Cross-fitting never lets a row's nuisance predictions depend on that
/// row. The recorded train and test sets are checked directly, then every
/// outcome in one fold is shifted by a large constant: predictions for that
/// fold must not move while predictions elsewhere must.
pub fn check_crossfit_leakage(trial: &GeneratedTrial, k: usize, seed: u64) -> Check {
    let ds = &trial.dataset;
    let n = ds.n_rows();
    let plan = assign_folds(ds, k, seed).map_err(|e| e.to_string())?;
    let rec = RecordingNuisances::new(InjectedNuisances {
        mu0: trial.mu0.clone(),
        mu1: trial.mu1(),
        pi: vec![0.5; n],
    });
    cate::pseudo_outcomes(ds, &plan, &rec, DEFAULT_CLIP).map_err(|e| e.to_string())?;
    let calls = rec.calls();
    if calls.len() != k {
        return Err(format!("{} folds fitted, expected {k}", calls.len()));
    }
    let mut predicted = vec![0usize; n];
    for (fold, train, test) in &calls {
        let expected: Vec<usize> = (0..n).filter(|&i| plan.fold_of[i] == *fold).collect();
        let mut t = test.clone();
        t.sort_unstable();
        if t != expected {
            return Err(format!("fold {fold}: test rows differ from the fold assignment"));
        }
        let in_test: Vec<bool> = (0..n).map(|i| plan.fold_of[i] == *fold).collect();
        if let Some(&i) = train.iter().find(|&&i| in_test[i]) {
            return Err(format!("fold {fold}: row {i} is in both train and test"));
        }
        if train.len() + test.len() != n {
            return Err(format!("fold {fold}: train and test do not cover the rows"));
        }
        for &i in test {
            predicted[i] += 1;
        }
    }
    if let Some(i) = predicted.iter().position(|&c| c != 1) {
        return Err(format!("row {i} predicted {} times", predicted[i]));
    }

    let est = LearnerNuisances {
        config: lasso_nuisances(),
        propensity: Propensity::Known(0.5),
        seed,
    };
    let base = cate::pseudo_outcomes(ds, &plan, &est, DEFAULT_CLIP).map_err(|e| e.to_string())?;
    let y = ds.outcome();
    let shifted: Vec<f64> = (0..n).map(|i| if plan.fold_of[i] == 0 { y[i] + 100.0 } else { y[i] }).collect();
    let ds2 = ds
        .with_column(Column::from_f64(ds.roles.outcome.as_str(), &shifted))
        .map_err(|e| e.to_string())?;
    let moved = cate::pseudo_outcomes(&ds2, &plan, &est, DEFAULT_CLIP).map_err(|e| e.to_string())?;
    let mut changed_elsewhere = false;
    for i in 0..n {
        let same = base.mu0_hat[i] == moved.mu0_hat[i] && base.mu1_hat[i] == moved.mu1_hat[i];
        if plan.fold_of[i] == 0 && !same {
            return Err(format!("row {i}: own outcome changed its nuisance prediction"));
        }
        changed_elsewhere |= plan.fold_of[i] != 0 && !same;
    }
    if !changed_elsewhere {
        return Err("shifting fold 0 outcomes changed no other fold's predictions".into());
    }
    Ok(())
}

/// The interaction matrix is symmetric with the permutation importances on
/// its diagonal.
pub fn check_vint_structure(report: &ImportanceReport) -> Check {
    let v = &report.vint;
    let k = v.names.len();
    for i in 0..k {
        for j in 0..k {
            if v.values[i][j] != v.values[j][i] {
                return Err(format!("vint[{i}][{j}] != vint[{j}][{i}]"));
            }
        }
        let c = report
            .covariates
            .iter()
            .position(|n| *n == v.names[i])
            .ok_or_else(|| format!("{} missing from covariates", v.names[i]))?;
        if v.values[i][i] != report.vimp[c] {
            return Err(format!("diagonal of {} is {} but vimp is {}", v.names[i], v.values[i][i], report.vimp[c]));
        }
    }
    Ok(())
}

fn rescaled(ds: &Dataset) -> Dataset {
    let mut out = ds.clone();
    for name in ds.roles.covariates.clone() {
        let col = ds.column(&name).expect("covariate column");
        if let ColumnData::Continuous(v) = &col.data {
            let t: Vec<Option<f64>> = v.iter().map(|x| x.map(|x| 3.0 * x - 7.0)).collect();
            out = out.with_column(Column::continuous(name.as_str(), t)).expect("same shape");
        }
    }
    out
}

/// Global p-value and importance ranking are unchanged when every
/// continuous covariate is mapped through `x -> 3x - 7`.
pub fn check_affine_invariance(ds: &Dataset, phi: &[f64], cfg: &ImportanceConfig, seed: u64) -> Check {
    let x = ds.features().map_err(|e| e.to_string())?;
    let xt = rescaled(ds).features().map_err(|e| e.to_string())?;
    let a = global_test(&x, phi, 999, seed).map_err(|e| e.to_string())?;
    let b = global_test(&xt, phi, 999, seed).map_err(|e| e.to_string())?;
    if a.p_value != b.p_value {
        return Err(format!("global p {} vs {} after rescaling", a.p_value, b.p_value));
    }
    let (_, ra) = importance_core(&x, phi, cfg, seed).map_err(|e| e.to_string())?;
    let (_, rb) = importance_core(&xt, phi, cfg, seed).map_err(|e| e.to_string())?;
    if ra.ranking != rb.ranking {
        return Err(format!(
            "ranking changed: {:?} vs {:?}",
            &ra.ranking[..5.min(ra.ranking.len())],
            &rb.ranking[..5.min(rb.ranking.len())]
        ));
    }
    Ok(())
}

/// Simulate a scenario into `dir` and return its analysis config.
pub fn simulated_config(spec: &ScenarioSpec, dir: &Path) -> RunConfig {
    pipeline::run_simulate(spec, dir).expect("simulate");
    RunConfig::from_file(&dir.join(pipeline::ANALYSIS_CONFIG)).expect("generated config parses")
}

/// `findings.json` and the pseudo-outcome table are byte-identical whatever
/// the size of the worker pool.
pub fn check_thread_determinism(cfg: &RunConfig, threads: &[usize]) -> Check {
    let mut outputs: Vec<(usize, Vec<u8>, Vec<u8>)> = Vec::new();
    for &t in threads {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| e.to_string())?;
        pool.install(|| pipeline::run_analyze(cfg, dir.path()))
            .map_err(|e| e.to_string())?;
        let read = |f: &str| std::fs::read(dir.path().join(f)).map_err(|e| e.to_string());
        outputs.push((t, read(pipeline::FINDINGS_JSON)?, read(pipeline::PSEUDO_OUTCOMES)?));
    }
    let (t0, f0, p0) = &outputs[0];
    for (t, f, p) in &outputs[1..] {
        if f != f0 {
            return Err(format!("findings.json differs between {t0} and {t} threads"));
        }
        if p != p0 {
            return Err(format!("pseudo-outcomes differ between {t0} and {t} threads"));
        }
    }
    Ok(())
}

/// An analysis plan naming every generated covariate.
pub fn full_plan(p: usize) -> AnalysisPlan {
    let names: Vec<String> = (0..p).map(benchgen::covariate_name).collect();
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    AnalysisPlan::new(benchgen::OUTCOME, benchgen::TREATMENT, &refs)
}
