/// Selection-stability index over `B` runs of a `p`-feature selector.
///
/// `z[b][f]` marks whether feature `f` was selected in run `b`. Returns
/// `None` when fewer than two runs are given or when the mean selection
/// size is 0 or `p`, where the index is undefined.
pub fn nogueira_stability(z: &[Vec<bool>]) -> Option<f64> {
    let b = z.len();
    if b < 2 {
        return None;
    }
    let p = z[0].len();
    if p == 0 || z.iter().any(|r| r.len() != p) {
        return None;
    }
    let bf = b as f64;
    let pf = p as f64;
    let k_bar = z.iter().map(|r| r.iter().filter(|&&s| s).count() as f64).sum::<f64>() / bf;
    let denom = (k_bar / pf) * (1.0 - k_bar / pf);
    if denom <= 0.0 {
        return None;
    }
    let mean_var = (0..p)
        .map(|f| {
            let hat = z.iter().filter(|r| r[f]).count() as f64 / bf;
            bf / (bf - 1.0) * hat * (1.0 - hat)
        })
        .sum::<f64>()
        / pf;
    Some(1.0 - mean_var / denom)
}
