//! Per-arm natural-spline fits and local linear smoothing of pseudo-outcomes.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, WatchError};
use crate::stats::{quantile_sorted, sorted_copy};

pub const Z95: f64 = 1.96;

/// Natural cubic spline basis (intercept, linear term and `K - 2`
/// truncated-power terms that are linear beyond the boundary knots).
///
/// `x` is mapped to `[0, 1]` through the boundary knots before the basis is
/// evaluated, which keeps the cubic terms well scaled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineBasis {
    /// Distinct knots on the original scale, ascending; the first and last
    /// are the boundary knots.
    pub knots: Vec<f64>,
}

impl SplineBasis {
    /// `df - 1` interior knots at equispaced quantiles of `x` plus the range
    /// as boundary knots; coincident knots are merged.
    pub fn from_data(x: &[f64], df: usize) -> SplineBasis {
        let s = sorted_copy(x);
        let k = df.max(1) + 1;
        let mut knots: Vec<f64> = (0..k).map(|i| quantile_sorted(&s, i as f64 / (k - 1) as f64)).collect();
        knots.dedup();
        SplineBasis { knots }
    }

    pub fn dim(&self) -> usize {
        match self.knots.len() {
            0 | 1 => 1,
            k => k,
        }
    }

    fn scaled(&self, v: f64) -> f64 {
        let (lo, hi) = (self.knots[0], self.knots[self.knots.len() - 1]);
        (v - lo) / (hi - lo)
    }

    pub fn row(&self, v: f64) -> Vec<f64> {
        let k = self.knots.len();
        if k < 2 {
            return vec![1.0];
        }
        let t = self.scaled(v);
        let mut out = vec![1.0, t];
        if k >= 3 {
            let xi: Vec<f64> = self.knots.iter().map(|&kn| self.scaled(kn)).collect();
            let cube = |u: f64| u.max(0.0).powi(3);
            let d = |j: usize| (cube(t - xi[j]) - cube(t - xi[k - 1])) / (xi[k - 1] - xi[j]);
            let last = d(k - 2);
            for j in 0..k - 2 {
                out.push(d(j) - last);
            }
        }
        out
    }

    pub fn design(&self, x: &[f64]) -> DMatrix<f64> {
        let q = self.dim();
        let rows: Vec<Vec<f64>> = x.iter().map(|&v| self.row(v)).collect();
        DMatrix::from_fn(x.len(), q, |i, j| rows[i][j])
    }
}

/// Least-squares spline fit with homoscedastic pointwise variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineFit {
    pub basis: SplineBasis,
    pub coefficients: Vec<f64>,
    /// Residual variance `RSS / (n - q)`.
    pub sigma2: f64,
    /// `(B^T B)^{-1}`, row-major.
    pub xtx_inv: Vec<f64>,
    pub n: usize,
}

impl SplineFit {
    pub fn fit(basis: SplineBasis, x: &[f64], y: &[f64]) -> Result<SplineFit> {
        let q = basis.dim();
        let n = x.len();
        if n < q + 1 {
            return Err(WatchError::Data(format!("spline with {q} coefficients needs more than {q} points, got {n}")));
        }
        let b = basis.design(x);
        let xtx = b.transpose() * &b;
        let inv = xtx
            .clone()
            .cholesky()
            .ok_or_else(|| WatchError::Numerical("spline design is rank deficient".into()))?
            .inverse();
        let yv = DVector::from_column_slice(y);
        let coef = &inv * (b.transpose() * &yv);
        let resid = &yv - &b * &coef;
        let sigma2 = resid.norm_squared() / (n - q) as f64;
        Ok(SplineFit {
            basis,
            coefficients: coef.iter().copied().collect(),
            sigma2,
            xtx_inv: (0..q * q).map(|k| inv[(k / q, k % q)]).collect(),
            n,
        })
    }

    /// Fitted value and its standard error at `v`.
    pub fn predict(&self, v: f64) -> (f64, f64) {
        let r = self.basis.row(v);
        let q = r.len();
        let fit = r.iter().zip(&self.coefficients).map(|(a, b)| a * b).sum();
        let mut quad = 0.0;
        for i in 0..q {
            for j in 0..q {
                quad += r[i] * self.xtx_inv[i * q + j] * r[j];
            }
        }
        (fit, (self.sigma2 * quad.max(0.0)).sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSplines {
    pub control: SplineFit,
    pub treated: SplineFit,
}

/// Separate spline fits per arm on a shared knot set from the pooled `x`.
pub fn spline_fit(x: &[f64], y: &[f64], arm: &[u8], df: usize) -> Result<ArmSplines> {
    if x.len() != y.len() || x.len() != arm.len() {
        return Err(WatchError::Data("spline inputs differ in length".into()));
    }
    let basis = SplineBasis::from_data(x, df);
    let fit_arm = |a: u8| -> Result<SplineFit> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = x.iter().zip(y).zip(arm).filter(|(_, &g)| g == a).map(|((u, v), _)| (*u, *v)).unzip();
        if xs.len() < df + 2 {
            return Err(WatchError::Data(format!(
                "arm {a} has {} points; spline with df {df} needs at least {}",
                xs.len(),
                df + 2
            )));
        }
        SplineFit::fit(basis.clone(), &xs, &ys)
    };
    Ok(ArmSplines {
        control: fit_arm(0)?,
        treated: fit_arm(1)?,
    })
}

/// Local linear regression at each grid point: tricube weights over the
/// `ceil(span * n)` nearest neighbours.
pub fn local_regression(x: &[f64], y: &[f64], span: f64, grid: &[f64]) -> Result<Vec<f64>> {
    let n = x.len();
    if n < 10 {
        return Err(WatchError::Data(format!("local regression needs at least 10 points, got {n}")));
    }
    if y.len() != n {
        return Err(WatchError::Data("local regression inputs differ in length".into()));
    }
    if !(span > 0.0 && span <= 1.0) {
        return Err(WatchError::Config(format!("span {span} outside (0, 1]")));
    }
    let k = ((span * n as f64).ceil() as usize).clamp(2, n);
    Ok(grid.iter().map(|&g| local_linear_at(x, y, k, g)).collect())
}

pub(crate) fn local_linear_at(x: &[f64], y: &[f64], k: usize, g: f64) -> f64 {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| (x[a] - g).abs().total_cmp(&(x[b] - g).abs()).then(a.cmp(&b)));
    idx.truncate(k);
    let h = idx.iter().map(|&i| (x[i] - g).abs()).fold(0.0, f64::max);
    let w: Vec<f64> = idx
        .iter()
        .map(|&i| if h == 0.0 { 1.0 } else { (1.0 - ((x[i] - g).abs() / h).powi(3)).max(0.0).powi(3) })
        .collect();
    let sw: f64 = w.iter().sum();
    if sw <= 0.0 {
        return idx.iter().map(|&i| y[i]).sum::<f64>() / k as f64;
    }
    let xm = idx.iter().zip(&w).map(|(&i, wi)| wi * x[i]).sum::<f64>() / sw;
    let ym = idx.iter().zip(&w).map(|(&i, wi)| wi * y[i]).sum::<f64>() / sw;
    let sxx: f64 = idx.iter().zip(&w).map(|(&i, wi)| wi * (x[i] - xm).powi(2)).sum();
    if sxx <= 1e-12 * sw * (1.0 + xm * xm) {
        return ym;
    }
    let sxy: f64 = idx.iter().zip(&w).map(|(&i, wi)| wi * (x[i] - xm) * (y[i] - ym)).sum();
    ym + sxy / sxx * (g - xm)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub fit: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Per-arm spline curves, their difference, and a smooth of the
/// pseudo-outcomes over a common grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectCurve {
    pub covariate: String,
    pub control: Vec<CurvePoint>,
    pub treated: Vec<CurvePoint>,
    pub effect: Vec<CurvePoint>,
    pub pseudo_smooth: Vec<[f64; 2]>,
}

pub fn equispaced_grid(x: &[f64], size: usize) -> Vec<f64> {
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo < hi) || size < 2 {
        return vec![lo];
    }
    (0..size).map(|i| lo + (hi - lo) * i as f64 / (size - 1) as f64).collect()
}

pub fn effect_curve(
    covariate: &str,
    x: &[f64],
    y: &[f64],
    arm: &[u8],
    phi: &[f64],
    df: usize,
    span: f64,
    grid_size: usize,
) -> Result<EffectCurve> {
    let fits = spline_fit(x, y, arm, df)?;
    let grid = equispaced_grid(x, grid_size);
    let band = |f: &SplineFit| -> Vec<CurvePoint> {
        grid.iter()
            .map(|&g| {
                let (m, se) = f.predict(g);
                CurvePoint {
                    x: g,
                    fit: m,
                    lower: m - Z95 * se,
                    upper: m + Z95 * se,
                }
            })
            .collect()
    };
    let effect = grid
        .iter()
        .map(|&g| {
            let (m1, s1) = fits.treated.predict(g);
            let (m0, s0) = fits.control.predict(g);
            let se = (s1 * s1 + s0 * s0).sqrt();
            CurvePoint {
                x: g,
                fit: m1 - m0,
                lower: m1 - m0 - Z95 * se,
                upper: m1 - m0 + Z95 * se,
            }
        })
        .collect();
    let smooth = local_regression(x, phi, span, &grid)?;
    Ok(EffectCurve {
        covariate: covariate.to_string(),
        control: band(&fits.control),
        treated: band(&fits.treated),
        effect,
        pseudo_smooth: grid.iter().zip(smooth).map(|(&g, s)| [g, s]).collect(),
    })
}
