//! Extrapolation of an entropy curve with `f(x) = a·e^{−b·x} + c`.
//!
//! The fit minimizes the unweighted sum of squared residuals with damped
//! Gauss-Newton (Levenberg-Marquardt) over `(a, β = ln b, c)`, which keeps
//! `b > 0`. `a` and `c` are unconstrained; `c` is the entropy-rate estimate
//! and is never clamped, so an undersampled curve can yield `c < 0`.
//!
//! Initial guess, with points sorted by `x`:
//!
//! ```text
//! c₀ = y_last − max(y_{last−1} − y_last, 0)
//! b₀ = clamp(ln((y₁ − c₀)/(y₂ − c₀)) / (x₂ − x₁), 1e−3, 10)   if the ratio is positive, else 1
//! a₀ = (y₁ − c₀) · e^{b₀·x₁}       (|y₁ − c₀| floored at 1e−6 first)
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::diagnose::{undersampled, CoverageReport, Thresholds};
use crate::entropy::EntropyCurve;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FitFlag {
    /// `c < 0`.
    NegativeRate,
    /// All `y` equal; `b` is unidentifiable and fixed to 1.
    FlatCurve,
    /// At least one fitted order failed the coverage thresholds.
    Undersampled,
    /// Iteration stopped before the gradient tolerance was met.
    NotConverged,
    /// The curve came from a pruned table, so the entropies are lower bounds.
    LowerBoundBiased,
}

impl fmt::Display for FitFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitFlag::NegativeRate => "NEGATIVE_RATE",
            FitFlag::FlatCurve => "FLAT_CURVE",
            FitFlag::Undersampled => "UNDERSAMPLED",
            FitFlag::NotConverged => "NOT_CONVERGED",
            FitFlag::LowerBoundBiased => "LOWER_BOUND_BIASED",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions<T> {
    pub max_iterations: usize,
    /// Stop once a step lowers the SSE by less than this fraction of its
    /// previous value while the gradient is within `gradient_tolerance`.
    pub sse_tolerance: T,
    /// A settled run counts as converged only when `‖∇SSE‖₂` w.r.t.
    /// `(a, ln b, c)` is at most this.
    pub gradient_tolerance: T,
    /// Curves with `max(y) − min(y)` below this are treated as flat.
    pub flat_tolerance: T,
    pub initial_damping: T,
}

impl<T: Scalar> Default for FitOptions<T> {
    fn default() -> Self {
        FitOptions {
            max_iterations: 200,
            sse_tolerance: T::from_f64_lossy(1e-12),
            gradient_tolerance: T::from_f64_lossy(1e-8),
            flat_tolerance: T::from_f64_lossy(1e-9),
            initial_damping: T::from_f64_lossy(1e-3),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitPoint<T> {
    pub x: T,
    pub y: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpFit<T> {
    pub a: T,
    pub b: T,
    pub c: T,
    pub sse: T,
    pub converged: bool,
    pub iterations: usize,
    pub flags: Vec<FitFlag>,
    pub points: Vec<FitPoint<T>>,
}

impl<T: Scalar> ExpFit<T> {
    pub fn eval(&self, x: T) -> T {
        model(self.a, self.b, self.c, x)
    }

    pub fn has_flag(&self, flag: FitFlag) -> bool {
        self.flags.contains(&flag)
    }

    fn add_flag(&mut self, flag: FitFlag) {
        if !self.has_flag(flag) {
            self.flags.push(flag);
            self.flags.sort();
        }
    }
}

#[inline]
fn model<T: Scalar>(a: T, b: T, c: T, x: T) -> T {
    a * (-b * x).exp() + c
}

/// SSE of `amp·e^{−b(x − x0)} + c`.
fn sse<T: Scalar>(points: &[FitPoint<T>], x0: T, amp: T, b: T, c: T) -> T {
    points.iter().fold(T::zero(), |acc, p| {
        let r = p.y - model(amp, b, c, p.x - x0);
        acc + r * r
    })
}

/// `JᵀJ` and `Jᵀr` for `amp·e^{−b(x − x0)} + c` in `(amp, β = ln b, c)`.
/// With `x0 = 0` these are the derivatives w.r.t. `(a, ln b, c)`.
fn normal_equations<T: Scalar>(points: &[FitPoint<T>], x0: T, amp: T, beta: T, c: T) -> ([[T; 3]; 3], [T; 3]) {
    let b = beta.exp();
    let mut jtj = [[T::zero(); 3]; 3];
    let mut jtr = [T::zero(); 3];
    for p in points {
        let x = p.x - x0;
        let e = (-b * x).exp();
        let row = [e, -amp * x * b * e, T::one()];
        let r = p.y - (amp * e + c);
        for i in 0..3 {
            jtr[i] = jtr[i] + row[i] * r;
            for j in 0..3 {
                jtj[i][j] = jtj[i][j] + row[i] * row[j];
            }
        }
    }
    (jtj, jtr)
}

fn gradient_norm<T: Scalar>(jtr: &[T; 3]) -> T {
    // ∇SSE = −2 Jᵀr
    let two = T::from_f64_lossy(2.0);
    jtr.iter().fold(T::zero(), |acc, &g| acc + (two * g) * (two * g)).sqrt()
}

/// Solves a 3×3 system by Gaussian elimination with partial pivoting.
fn solve3<T: Scalar>(mut m: [[T; 3]; 3], mut v: [T; 3]) -> Option<[T; 3]> {
    for col in 0..3 {
        let pivot = (col..3).max_by(|&i, &j| {
            m[i][col]
                .abs()
                .partial_cmp(&m[j][col].abs())
                .unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if !(m[pivot][col].abs() > T::zero()) {
            return None;
        }
        m.swap(col, pivot);
        v.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            for k in col..3 {
                m[row][k] = m[row][k] - f * m[col][k];
            }
            v[row] = v[row] - f * v[col];
        }
    }
    let mut out = [T::zero(); 3];
    for row in (0..3).rev() {
        let mut s = v[row];
        for k in row + 1..3 {
            s = s - m[row][k] * out[k];
        }
        out[row] = s / m[row][row];
    }
    out.iter().all(|x| x.is_finite()).then_some(out)
}

fn sorted_points<T: Scalar>(points: &[(T, T)]) -> Result<Vec<FitPoint<T>>> {
    let mut pts: Vec<FitPoint<T>> = points.iter().map(|&(x, y)| FitPoint { x, y }).collect();
    if pts.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return Err(Error::TooFewPoints(0));
    }
    pts.sort_by(|p, q| p.x.partial_cmp(&q.x).expect("finite"));
    let distinct = pts.windows(2).filter(|w| w[0].x != w[1].x).count() + usize::from(!pts.is_empty());
    if distinct < 3 {
        return Err(Error::TooFewPoints(distinct));
    }
    Ok(pts)
}

/// The documented starting point `(a₀, b₀, c₀)` for `points`.
pub fn initial_guess<T: Scalar>(points: &[(T, T)]) -> Result<(T, T, T)> {
    let pts = sorted_points(points)?;
    Ok(initial_from_sorted(&pts))
}

fn initial_from_sorted<T: Scalar>(pts: &[FitPoint<T>]) -> (T, T, T) {
    let last = pts[pts.len() - 1];
    let prev = pts[pts.len() - 2];
    let c0 = last.y - (prev.y - last.y).max(T::zero());
    let floor = T::from_f64_lossy(1e-6);
    let raw_a = pts[0].y - c0;
    let amplitude = if raw_a.abs() >= floor {
        raw_a
    } else if raw_a < T::zero() {
        -floor
    } else {
        floor
    };
    let ratio = (pts[0].y - c0) / (pts[1].y - c0);
    let b0 = if ratio > T::zero() && ratio.is_finite() {
        (ratio.ln() / (pts[1].x - pts[0].x))
            .max(T::from_f64_lossy(1e-3))
            .min(T::from_f64_lossy(10.0))
    } else {
        T::one()
    };
    // amplitude is observed at x₁; the model's a is the value at x = 0
    let a0 = amplitude * (b0 * pts[0].x).exp();
    (a0, b0, c0)
}

/// Least-squares fit of `a·e^{−b·x} + c` to `(x, y)` points.
///
/// Needs at least three distinct `x`. A run that exhausts the iteration
/// budget returns its best parameters with `converged = false` and the
/// `NOT_CONVERGED` flag.
pub fn fit_exponential<T: Scalar>(points: &[(T, T)], options: &FitOptions<T>) -> Result<ExpFit<T>> {
    let pts = sorted_points(points)?;
    let (lo, hi) = pts.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), p| {
        (lo.min(p.y), hi.max(p.y))
    });
    if hi - lo < options.flat_tolerance {
        let n = T::from_usize(pts.len()).expect("point count fits");
        let mean = pts.iter().fold(T::zero(), |s, p| s + p.y) / n;
        let mut fit = ExpFit {
            a: T::zero(),
            b: T::one(),
            c: mean,
            sse: sse(&pts, T::zero(), T::zero(), T::one(), mean),
            converged: true,
            iterations: 0,
            flags: vec![FitFlag::FlatCurve],
            points: pts,
        };
        if mean < T::zero() {
            fit.add_flag(FitFlag::NegativeRate);
        }
        return Ok(fit);
    }

    // Iterate on the amplitude at the first abscissa, amp = a·e^{−b·x₁}. It
    // stays finite when b grows without bound on step-shaped curves, where a
    // itself would have to grow like e^{b·x₁}.
    let x0 = pts[0].x;
    let (a0, b0, mut c) = initial_from_sorted(&pts);
    let mut amp = a0 * (-b0 * x0).exp();
    let mut beta = b0.ln();
    let mut current = sse(&pts, x0, amp, b0, c);
    let mut lambda = options.initial_damping;
    let ten = T::from_f64_lossy(10.0);
    let lambda_max = T::from_f64_lossy(1e16);
    let lambda_min = T::from_f64_lossy(1e-15);
    let diag_floor = T::from_f64_lossy(1e-12);
    // relative SSE changes below this are rounding
    let noise = T::epsilon() * T::from_f64_lossy(16.0);

    let mut iterations = 0;
    let mut settled = false;
    let (mut jtj, mut jtr) = normal_equations(&pts, x0, amp, beta, c);
    while iterations < options.max_iterations {
        if current <= T::min_positive_value() {
            settled = true;
            break;
        }
        iterations += 1;
        let mut damped = jtj;
        for (i, row) in damped.iter_mut().enumerate() {
            row[i] = row[i] + lambda * jtj[i][i].max(diag_floor);
        }
        let Some(d) = solve3(damped, jtr) else {
            lambda = lambda * ten;
            if lambda > lambda_max {
                settled = true;
                break;
            }
            continue;
        };
        // reduction predicted by the linearized model: 2·dᵀJᵀr − dᵀJᵀJd
        let two = T::from_f64_lossy(2.0);
        let mut predicted = T::zero();
        for i in 0..3 {
            predicted = predicted + two * d[i] * jtr[i];
            for j in 0..3 {
                predicted = predicted - d[i] * jtj[i][j] * d[j];
            }
        }
        let (na, nbeta, nc) = (amp + d[0], beta + d[1], c + d[2]);
        let nb = nbeta.exp();
        let trial = sse(&pts, x0, na, nb, nc);
        // b must stay a positive normal number; steps that underflow it are
        // treated like steps that increase the SSE
        if nb.is_normal() && trial.is_finite() && trial < current {
            let improvement = current - trial;
            amp = na;
            beta = nbeta;
            c = nc;
            let previous = current;
            current = trial;
            lambda = (lambda / ten).max(lambda_min);
            (jtj, jtr) = normal_equations(&pts, x0, amp, beta, c);
            let small = improvement <= options.sse_tolerance * previous;
            if (small && gradient_norm(&jtr) <= options.gradient_tolerance) || improvement <= noise * previous {
                settled = true;
                break;
            }
        } else {
            if !(predicted > noise * current) {
                settled = true;
                break;
            }
            lambda = lambda * ten;
            if lambda > lambda_max {
                settled = true;
                break;
            }
        }
    }

    let b = beta.exp();
    let a = amp * (b * x0).exp();
    let (_, jtr_a) = normal_equations(&pts, T::zero(), a, beta, c);
    let converged = settled && gradient_norm(&jtr_a) <= options.gradient_tolerance;
    let mut fit = ExpFit {
        a,
        b,
        c,
        sse: current,
        converged,
        iterations,
        flags: Vec::new(),
        points: pts,
    };
    if !converged {
        fit.add_flag(FitFlag::NotConverged);
    }
    if c < T::zero() {
        fit.add_flag(FitFlag::NegativeRate);
    }
    Ok(fit)
}

/// Fits `curve` and attaches coverage flags. `c` is returned unclamped.
pub fn estimate_rate<T: Scalar>(
    curve: &EntropyCurve<T>,
    diagnostics: &CoverageReport<T>,
    thresholds: &Thresholds<T>,
    options: &FitOptions<T>,
) -> Result<ExpFit<T>> {
    let mut fit = fit_exponential(&curve.xy(), options)?;
    for p in &curve.points {
        if undersampled(diagnostics, p.n, thresholds)? {
            fit.add_flag(FitFlag::Undersampled);
            break;
        }
    }
    if curve.lower_bound_biased {
        fit.add_flag(FitFlag::LowerBoundBiased);
    }
    Ok(fit)
}
