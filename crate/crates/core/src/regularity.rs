//! Blow-up diagnostics: approximating quadratic polynomials, the scaled
//! Hessian fluctuation
//!
//! ```text
//! S(r) = r² · max_i r^{-1} ‖D²u^i - (D²u^i)_r‖_{L²(B_r)}
//! ```
//!
//! (Frobenius norm of the 2×2 Hessian), log-log exponent fits and a
//! per-point classification. `S(r) ~ r^{2+α}` indicates C^{2,α}; bounded
//! `|A_r|` with `S(r) ~ r²` indicates C^{1,1}; `|A_r| ~ |ln r|` is the
//! logarithmic blow-up of the Hessian mean.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ball_l2, gradient, hessian, laplacian, GridSpec, Hessian, ScalarField};
use crate::switching::{ProblemSpec, SolutionPair};

/// `p(x) = (x - x₀)·A·(x - x₀) + b·(x - x₀) + c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticPolynomial {
    pub a: [[f64; 2]; 2],
    pub b: [f64; 2],
    pub c: f64,
    pub center: (f64, f64),
}

impl QuadraticPolynomial {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        let a = &self.a;
        dx * (a[0][0] * dx + a[0][1] * dy)
            + dy * (a[1][0] * dx + a[1][1] * dy)
            + self.b[0] * dx
            + self.b[1] * dy
            + self.c
    }

    /// Frobenius norm of `A`.
    pub fn a_norm(&self) -> f64 {
        let a = &self.a;
        (a[0][0].powi(2) + a[0][1].powi(2) + a[1][0].powi(2) + a[1][1].powi(2)).sqrt()
    }
}

/// Minimum number of unmasked Hessian nodes in a ball.
const MIN_BALL_NODES: usize = 6;

/// Discrete derivatives of one field, computed once and reused across radii.
struct Derivatives<'a> {
    u: &'a ScalarField,
    hess: Hessian,
    ux: ScalarField,
    uy: ScalarField,
}

impl<'a> Derivatives<'a> {
    fn new(u: &'a ScalarField) -> Self {
        let (ux, uy) = gradient(u);
        Self {
            u,
            hess: hessian(u),
            ux,
            uy,
        }
    }

    fn grid(&self) -> &GridSpec {
        self.u.grid()
    }

    /// Nodes of `B_r(center)` where the Hessian is defined.
    fn ball_nodes(&self, center: (f64, f64), r: f64) -> Vec<usize> {
        let g = *self.grid();
        let mut nodes = Vec::new();
        g.for_each_in_ball(center.0, center.1, r, |i, j| {
            let k = g.index(i, j);
            if self.hess.uxx.is_active(k) && self.u.is_active(k) {
                nodes.push(k);
            }
        });
        nodes
    }

    fn polynomial(&self, center: (f64, f64), r: f64) -> Result<QuadraticPolynomial> {
        let nodes = self.ball_nodes(center, r);
        if nodes.len() < MIN_BALL_NODES {
            return Err(Error::InsufficientNodes {
                needed: MIN_BALL_NODES,
                found: nodes.len(),
            });
        }
        let n = nodes.len() as f64;
        let mean = |f: &ScalarField| nodes.iter().map(|&k| f.values()[k]).sum::<f64>() / n;
        let (axx, axy, ayy) = (
            0.5 * mean(&self.hess.uxx),
            0.5 * mean(&self.hess.uxy),
            0.5 * mean(&self.hess.uyy),
        );
        Ok(QuadraticPolynomial {
            a: [[axx, axy], [axy, ayy]],
            b: [mean(&self.ux), mean(&self.uy)],
            c: mean(self.u),
            center,
        })
    }

    /// `r^{-1} ‖D²u - (D²u)_r‖_{L²(B_r)}` and the polynomial `p_r`.
    fn fluctuation(&self, center: (f64, f64), r: f64) -> Result<(f64, QuadraticPolynomial)> {
        let p = self.polynomial(center, r)?;
        let g = self.grid();
        let (mxx, mxy, myy) = (2.0 * p.a[0][0], 2.0 * p.a[0][1], 2.0 * p.a[1][1]);
        let mut sq = 0.0;
        for k in self.ball_nodes(center, r) {
            let dxx = self.hess.uxx.values()[k] - mxx;
            let dxy = self.hess.uxy.values()[k] - mxy;
            let dyy = self.hess.uyy.values()[k] - myy;
            sq += dxx * dxx + 2.0 * dxy * dxy + dyy * dyy;
        }
        Ok(((sq * g.hx() * g.hy()).sqrt() / r, p))
    }

    /// `max_{B_r} |u - p|`.
    fn sup_deviation(&self, p: &QuadraticPolynomial, r: f64) -> f64 {
        let g = *self.grid();
        let mut m: f64 = 0.0;
        g.for_each_in_ball(p.center.0, p.center.1, r, |i, j| {
            let v = self.u.at(i, j);
            if v.is_finite() {
                m = m.max((v - p.eval(g.x(i), g.y(j))).abs());
            }
        });
        m
    }

    /// Rounding level of the second differences: values of the fluctuation
    /// below it are indistinguishable from zero.
    fn noise_floor(&self, center: (f64, f64), r: f64) -> f64 {
        let g = *self.grid();
        let mut umax: f64 = 0.0;
        g.for_each_in_ball(center.0, center.1, r + 2.0 * g.h(), |i, j| {
            let v = self.u.at(i, j);
            if v.is_finite() {
                umax = umax.max(v.abs());
            }
        });
        let h2 = g.hx().min(g.hy()).powi(2);
        64.0 * f64::EPSILON * umax.max(f64::MIN_POSITIVE) / h2 * (std::f64::consts::PI).sqrt() * r
    }
}

/// Approximating polynomial: `A` is half the ball mean of the discrete
/// Hessian, `b` the mean gradient and `c` the mean value.
pub fn fit_polynomial(u: &ScalarField, center: (f64, f64), r: f64) -> Result<QuadraticPolynomial> {
    Derivatives::new(u).polynomial(center, r)
}

fn check_ball_inside(grid: &GridSpec, center: (f64, f64), r: f64) -> Result<()> {
    // the Hessian is masked on the outermost ring of nodes
    let inside = center.0 - r >= grid.xmin + grid.hx()
        && center.0 + r <= grid.xmax - grid.hx()
        && center.1 - r >= grid.ymin + grid.hy()
        && center.1 + r <= grid.ymax - grid.hy();
    if inside && r > 0.0 {
        Ok(())
    } else {
        Err(Error::BallOutOfDomain {
            cx: center.0,
            cy: center.1,
            radius: r,
        })
    }
}

/// Per-radius quantities of one pair at one center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleSamples {
    pub radii: Vec<f64>,
    pub s: Vec<f64>,
    /// Frobenius norm of `A_r`, max over the two modes.
    pub a_norm: Vec<f64>,
    /// `max_i sup_{B_r} |u^i - p^i_r|`
    pub sup_dev: Vec<f64>,
}

fn samples(pair: &SolutionPair, center: (f64, f64), radii: &[f64]) -> Result<ScaleSamples> {
    pair.u1.same_grid(&pair.u2)?;
    let grid = *pair.u1.grid();
    for &r in radii {
        check_ball_inside(&grid, center, r)?;
    }
    let d = [Derivatives::new(&pair.u1), Derivatives::new(&pair.u2)];
    let mut out = ScaleSamples {
        radii: radii.to_vec(),
        s: Vec::with_capacity(radii.len()),
        a_norm: Vec::with_capacity(radii.len()),
        sup_dev: Vec::with_capacity(radii.len()),
    };
    for &r in radii {
        let (mut s, mut a, mut dev) = (0.0f64, 0.0f64, 0.0f64);
        for di in &d {
            let (fl, p) = di.fluctuation(center, r)?;
            let fl = if fl <= di.noise_floor(center, r) { 0.0 } else { fl };
            s = s.max(r * r * fl);
            a = a.max(p.a_norm());
            dev = dev.max(di.sup_deviation(&p, r));
        }
        out.s.push(s);
        out.a_norm.push(a);
        out.sup_dev.push(dev);
    }
    Ok(out)
}

/// `S(r)` for each radius. Fluctuations at the rounding level of the
/// difference quotients are reported as exactly zero.
pub fn compute_s(pair: &SolutionPair, center: (f64, f64), radii: &[f64]) -> Result<Vec<f64>> {
    Ok(samples(pair, center, radii)?.s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    /// Least-squares slope of `ln value` against `ln r`; `+∞` when some
    /// value is zero.
    pub exponent: f64,
    pub r_squared: f64,
    pub infinite: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares of `y` on `x`. `R² = 1` when `y` is constant.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::DegenerateFit("need at least two samples".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateFit("all abscissae equal".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let r_squared = if ss_tot > 0.0 {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(LineFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Log-log slope of `values` against `radii` (at least four samples).
pub fn fit_exponent(radii: &[f64], values: &[f64]) -> Result<ExponentFit> {
    if radii.len() < 4 || radii.len() != values.len() {
        return Err(Error::DegenerateFit(format!(
            "need at least 4 matching samples, got {} radii and {} values",
            radii.len(),
            values.len()
        )));
    }
    if radii.iter().any(|&r| !(r > 0.0)) || values.iter().any(|&v| !(v >= 0.0)) {
        return Err(Error::DegenerateFit("radii must be positive, values nonnegative".into()));
    }
    if radii.windows(2).all(|w| w[0] == w[1]) {
        return Err(Error::DegenerateFit("all radii equal".into()));
    }
    if values.contains(&0.0) {
        return Ok(ExponentFit {
            exponent: f64::INFINITY,
            r_squared: 1.0,
            infinite: true,
        });
    }
    let lx: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let ly: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let f = fit_line(&lx, &ly)?;
    Ok(ExponentFit {
        exponent: f.slope,
        r_squared: f.r_squared,
        infinite: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HessianGrowth {
    pub radii: Vec<f64>,
    pub a_norm: Vec<f64>,
    /// Fit of `|A_r| = a·|ln r| + b`.
    pub fit: LineFit,
}

pub fn hessian_growth(pair: &SolutionPair, center: (f64, f64), radii: &[f64]) -> Result<HessianGrowth> {
    let s = samples(pair, center, radii)?;
    growth_fit(&s)
}

fn growth_fit(s: &ScaleSamples) -> Result<HessianGrowth> {
    let lx: Vec<f64> = s.radii.iter().map(|r| r.ln().abs()).collect();
    Ok(HessianGrowth {
        radii: s.radii.clone(),
        a_norm: s.a_norm.clone(),
        fit: fit_line(&lx, &s.a_norm)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    C2alpha,
    C11,
    LogSingular,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityConfig {
    /// Strictly decreasing radii; defaults to `2^-1 … 2^-6` times half of
    /// the smaller domain half-width.
    pub radii: Option<Vec<f64>>,
    /// Radii below `min_radius_factor · h` are dropped.
    pub min_radius_factor: f64,
    pub exponent_margin: f64,
    pub s_r_squared: f64,
    pub log_r_squared: f64,
    /// Threshold on the `|ln r|` coefficient of `|A_r|`; defaults to
    /// `0.02 · scale`.
    pub a_tol: Option<f64>,
    /// Constant of the bound `S(r)/r² <= C (max‖Δφ^i‖∞ + max‖u^i‖_{L²(B₁)})`.
    pub bmo_constant: f64,
}

impl Default for RegularityConfig {
    fn default() -> Self {
        Self {
            radii: None,
            min_radius_factor: 8.0,
            exponent_margin: 0.1,
            s_r_squared: 0.95,
            log_r_squared: 0.9,
            a_tol: None,
            bmo_constant: 1.0,
        }
    }
}

impl RegularityConfig {
    pub fn default_radii(grid: &GridSpec) -> Vec<f64> {
        let half = (0.5 * (grid.xmax - grid.xmin)).min(0.5 * (grid.ymax - grid.ymin));
        let r0 = 0.5 * half;
        (1..=6).map(|k| r0 * 0.5f64.powi(k)).collect()
    }

    /// The configured radii with those below `min_radius_factor · h`
    /// removed: `(kept, dropped)`.
    pub fn effective_radii(&self, grid: &GridSpec) -> Result<(Vec<f64>, Vec<f64>)> {
        let radii = self.radii.clone().unwrap_or_else(|| Self::default_radii(grid));
        if radii.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Precondition("radii must be strictly decreasing".into()));
        }
        let min = self.min_radius_factor * grid.h();
        Ok(radii.into_iter().partition(|&r| r >= min))
    }
}

/// The bound `S(r)/r² <= C₀` with `C₀ = C (max_i ‖Δ_h φ^i‖∞ + max_i
/// ‖u^i‖_{L²(B₁)})`, where `Δφ¹ = f¹ - f² + Δψ¹` and `Δφ² = f² - f¹ + Δψ²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BmoCheck {
    pub constant: f64,
    pub lap_phi_max: f64,
    pub u_l2_max: f64,
    pub c0: f64,
    pub s_over_r2: Vec<f64>,
    pub holds: bool,
}

pub fn bmo_check(
    spec: &ProblemSpec,
    pair: &SolutionPair,
    center: (f64, f64),
    radii: &[f64],
    s: &[f64],
    constant: f64,
) -> Result<BmoCheck> {
    let diff = spec.f1().sub(spec.f2())?;
    let lp1 = laplacian(spec.psi1()).add(&diff)?;
    let lp2 = laplacian(spec.psi2()).sub(&diff)?;
    let lap_phi_max = lp1.max_abs().max(lp2.max_abs());
    let u_l2_max = ball_l2(&pair.u1, center, 1.0)?.max(ball_l2(&pair.u2, center, 1.0)?);
    let c0 = constant * (lap_phi_max + u_l2_max);
    let s_over_r2: Vec<f64> = radii.iter().zip(s).map(|(r, v)| v / (r * r)).collect();
    let holds = s_over_r2.iter().all(|&q| q <= c0);
    Ok(BmoCheck {
        constant,
        lap_phi_max,
        u_l2_max,
        c0,
        s_over_r2,
        holds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub center: (f64, f64),
    pub radii: Vec<f64>,
    pub dropped_radii: Vec<f64>,
    pub s: Vec<f64>,
    pub s_fit: ExponentFit,
    pub a_norm: Vec<f64>,
    pub log_fit: LineFit,
    /// `max_i sup_{B_r} |u^i - p^i_r|` and its exponent fit.
    pub sup_dev: Vec<f64>,
    pub sup_dev_fit: ExponentFit,
    pub classification: Classification,
    /// `exponent - 2` for C2alpha; `None` when the exponent is infinite.
    pub alpha: Option<f64>,
    pub alpha_infinite: bool,
    pub a_tol: f64,
    pub exponent_margin: f64,
    pub s_r_squared: f64,
    pub log_r_squared: f64,
    pub bmo: BmoCheck,
}

/// Applies the decision rule to fitted statistics.
pub fn classify(
    s_fit: &ExponentFit,
    log_fit: &LineFit,
    a_tol: f64,
    cfg: &RegularityConfig,
) -> Classification {
    let bounded = log_fit.slope <= a_tol;
    let m = cfg.exponent_margin;
    if bounded && s_fit.exponent >= 2.0 + m && s_fit.r_squared >= cfg.s_r_squared {
        Classification::C2alpha
    } else if bounded && (2.0 - m..=2.0 + m).contains(&s_fit.exponent) {
        Classification::C11
    } else if !bounded && log_fit.r_squared >= cfg.log_r_squared {
        Classification::LogSingular
    } else {
        Classification::Inconclusive
    }
}

pub fn classify_point(
    spec: &ProblemSpec,
    pair: &SolutionPair,
    center: (f64, f64),
    cfg: &RegularityConfig,
) -> Result<RegularityReport> {
    let grid = *spec.grid();
    let (radii, dropped) = cfg.effective_radii(&grid)?;
    let smp = samples(pair, center, &radii)?;
    let s_fit = fit_exponent(&radii, &smp.s)?;
    let sup_dev_fit = fit_exponent(&radii, &smp.sup_dev)?;
    let growth = growth_fit(&smp)?;
    let a_tol = cfg.a_tol.unwrap_or(0.02 * spec.scale());
    let classification = classify(&s_fit, &growth.fit, a_tol, cfg);
    let bmo = bmo_check(spec, pair, center, &radii, &smp.s, cfg.bmo_constant)?;
    let alpha = (classification == Classification::C2alpha && !s_fit.infinite)
        .then_some(s_fit.exponent - 2.0);
    Ok(RegularityReport {
        center,
        radii,
        dropped_radii: dropped,
        s: smp.s,
        s_fit,
        a_norm: smp.a_norm,
        log_fit: growth.fit,
        sup_dev: smp.sup_dev,
        sup_dev_fit,
        classification,
        alpha,
        alpha_infinite: classification == Classification::C2alpha && s_fit.infinite,
        a_tol,
        exponent_margin: cfg.exponent_margin,
        s_r_squared: cfg.s_r_squared,
        log_r_squared: cfg.log_r_squared,
        bmo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::switching::Method;
    use proptest::prelude::*;

    fn pair_from(grid: GridSpec, f1: impl Fn(f64, f64) -> f64, f2: impl Fn(f64, f64) -> f64) -> SolutionPair {
        SolutionPair {
            u1: ScalarField::from_fn(grid, f1),
            u2: ScalarField::from_fn(grid, f2),
            method: Method::ClosedForm,
            eps_schedule: Vec::new(),
            iterations: Vec::new(),
            residual: 0.0,
        }
    }

    #[test]
    fn fit_of_x_squared() {
        let grid = GridSpec::square(1.2, 241).unwrap();
        let u = ScalarField::from_fn(grid, |x, _| x * x);
        let p = fit_polynomial(&u, (0.0, 0.0), 1.0).unwrap();
        assert!((p.a[0][0] - 1.0).abs() < 1e-9);
        assert!(p.a[0][1].abs() < 1e-9 && p.a[1][1].abs() < 1e-9);
        assert!(p.b[0].abs() < 1e-12 && p.b[1].abs() < 1e-12);
        assert!((p.c - 0.25).abs() < 5e-3);
    }

    #[test]
    fn fit_of_linear() {
        let grid = GridSpec::square(1.0, 101).unwrap();
        let u = ScalarField::from_fn(grid, |x, y| 2.0 * x - y + 0.5);
        let p = fit_polynomial(&u, (0.1, 0.2), 0.3).unwrap();
        assert!(p.a_norm() < 1e-9);
        assert!((p.b[0] - 2.0).abs() < 1e-9 && (p.b[1] + 1.0).abs() < 1e-9);
        assert!((p.c - (0.2 - 0.2 + 0.5)).abs() < grid.h());
    }

    #[test]
    fn too_few_nodes() {
        let grid = GridSpec::square(1.0, 11).unwrap();
        let u = ScalarField::zeros(grid);
        assert!(matches!(
            fit_polynomial(&u, (0.0, 0.0), 0.15),
            Err(Error::InsufficientNodes { .. })
        ));
    }

    #[test]
    fn ball_out_of_domain() {
        let grid = GridSpec::square(1.0, 33).unwrap();
        let p = pair_from(grid, |x, _| x, |_, y| y);
        assert!(matches!(
            compute_s(&p, (0.9, 0.0), &[0.5]),
            Err(Error::BallOutOfDomain { .. })
        ));
    }

    #[test]
    fn quadratic_pair_has_zero_s() {
        let grid = GridSpec::square(1.0, 257).unwrap();
        let q = |x: f64, y: f64| 0.7 * x * x - 0.3 * x * y + 1.1 * y * y + 0.2 * x - 0.4;
        let pair = pair_from(grid, q, q);
        let radii = [0.5, 0.25, 0.125, 0.0625];
        let s = compute_s(&pair, (0.1, -0.05), &radii).unwrap();
        assert!(s.iter().all(|&v| v == 0.0), "{s:?}");
        let fit = fit_exponent(&radii, &s).unwrap();
        assert!(fit.infinite && fit.exponent == f64::INFINITY);
        let g = hessian_growth(&pair, (0.1, -0.05), &radii).unwrap();
        assert!(g.fit.slope.abs() < 1e-9);
    }

    #[test]
    fn cubic_pair_matches_closed_form() {
        let grid = GridSpec::square(1.0, 513).unwrap();
        let pair = pair_from(grid, |x, _| x * x * x, |_, _| 0.0);
        let radii = [0.5, 0.25, 0.125, 0.0625];
        let s = compute_s(&pair, (0.0, 0.0), &radii).unwrap();
        for (r, v) in radii.iter().zip(&s) {
            let exact = 3.0 * std::f64::consts::PI.sqrt() * r.powi(3);
            assert!((v / exact - 1.0).abs() < 0.03, "r={r}: {v} vs {exact}");
        }
        let fit = fit_exponent(&radii, &s).unwrap();
        assert!((fit.exponent - 3.0).abs() < 0.05);
        let g = hessian_growth(&pair, (0.0, 0.0), &radii).unwrap();
        assert!(g.fit.slope.abs() < 1e-9);
    }

    #[test]
    fn exponent_of_exact_powers() {
        let radii = [0.5, 0.25, 0.125, 0.0625, 0.03125];
        let sq: Vec<f64> = radii.iter().map(|r| r * r).collect();
        let f = fit_exponent(&radii, &sq).unwrap();
        assert!((f.exponent - 2.0).abs() < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12);
        let cu: Vec<f64> = radii.iter().map(|r| 0.3 * r * r * r).collect();
        assert!((fit_exponent(&radii, &cu).unwrap().exponent - 3.0).abs() < 1e-12);
        assert!(fit_exponent(&[0.1; 4], &[1.0; 4]).is_err());
        assert!(fit_exponent(&radii[..3], &sq[..3]).is_err());
    }

    #[test]
    fn decision_rule() {
        let cfg = RegularityConfig::default();
        let flat = LineFit {
            slope: 0.0,
            intercept: 1.0,
            r_squared: 1.0,
        };
        let steep = LineFit {
            slope: 0.1,
            intercept: 0.0,
            r_squared: 0.99,
        };
        let fit = |e: f64| ExponentFit {
            exponent: e,
            r_squared: 0.99,
            infinite: false,
        };
        assert_eq!(classify(&fit(2.8), &flat, 0.02, &cfg), Classification::C2alpha);
        assert_eq!(classify(&fit(2.0), &flat, 0.02, &cfg), Classification::C11);
        assert_eq!(classify(&fit(2.0), &steep, 0.02, &cfg), Classification::LogSingular);
        assert_eq!(classify(&fit(1.5), &flat, 0.02, &cfg), Classification::Inconclusive);
    }

    #[test]
    fn radii_below_resolution_are_dropped() {
        let grid = GridSpec::square(1.0, 129).unwrap();
        let cfg = RegularityConfig::default();
        let (kept, dropped) = cfg.effective_radii(&grid).unwrap();
        assert_eq!(kept.len() + dropped.len(), 6);
        assert!(kept.iter().all(|&r| r >= 8.0 * grid.h()));
        assert!(dropped.iter().all(|&r| r < 8.0 * grid.h()));
        let bad = RegularityConfig {
            radii: Some(vec![0.1, 0.2, 0.05, 0.01]),
            ..cfg
        };
        assert!(bad.effective_radii(&grid).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn reproduces_quadratics(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0,
                                 cx in -0.3f64..0.3, cy in -0.3f64..0.3) {
            let grid = GridSpec::square(1.0, 65).unwrap();
            let u = ScalarField::from_fn(grid, |x, y| a * x * x + 2.0 * b * x * y + c * y * y);
            let p = fit_polynomial(&u, (cx, cy), 0.4).unwrap();
            prop_assert!((p.a[0][0] - a).abs() < 1e-10);
            prop_assert!((p.a[0][1] - b).abs() < 1e-10);
            prop_assert!((p.a[1][1] - c).abs() < 1e-10);
            prop_assert_eq!(p.a[0][1], p.a[1][0]);
        }

        #[test]
        fn translation_consistency(tx in -5i32..5, ty in -5i32..5) {
            let grid = GridSpec::square(1.0, 129).unwrap();
            let (sx, sy) = (tx as f64 * grid.hx(), ty as f64 * grid.hy());
            let v = |x: f64, y: f64| (2.0 * x).sin() * y.exp() + x * x * y;
            let u = ScalarField::from_fn(grid, v);
            let shifted = ScalarField::from_fn(grid, |x, y| v(x - sx, y - sy));
            let p = fit_polynomial(&u, (0.1, 0.0), 0.3).unwrap();
            let q = fit_polynomial(&shifted, (0.1 + sx, sy), 0.3).unwrap();
            let tol = 10.0 * grid.h();
            for i in 0..2 {
                for j in 0..2 {
                    prop_assert!((p.a[i][j] - q.a[i][j]).abs() < tol);
                }
                prop_assert!((p.b[i] - q.b[i]).abs() < tol);
            }
            prop_assert!((p.c - q.c).abs() < tol);
        }

        #[test]
        fn exponent_invariant_under_rescaling(lambda in 0.5f64..2.0) {
            // u(x) = v(λx) with v = x³: S_u(r) = λ³ S_v(r), so the fitted
            // exponent is unchanged
            let grid = GridSpec::square(1.0, 257).unwrap();
            let radii = [0.4, 0.2, 0.1, 0.05];
            let base = pair_from(grid, |x, _| x.powi(3), |_, _| 0.0);
            let scaled = pair_from(grid, |x, _| (lambda * x).powi(3), |_, _| 0.0);
            let s0 = compute_s(&base, (0.0, 0.0), &radii).unwrap();
            let s1 = compute_s(&scaled, (0.0, 0.0), &radii).unwrap();
            let e0 = fit_exponent(&radii, &s0).unwrap().exponent;
            let e1 = fit_exponent(&radii, &s1).unwrap().exponent;
            prop_assert!((e0 - e1).abs() < 1e-9);
            for (a, b) in s0.iter().zip(&s1) {
                prop_assert!((b / a - lambda.powi(3)).abs() < 1e-9 * lambda.powi(3));
            }
        }
    }
}
