//! Cubic smoothing splines and the iterative pseudo-truth fit.
//!
//! [`fit_smoothing_spline`] solves the constrained roughness problem
//!
//! ```text
//! minimize  ∫ g''(t)² dt   subject to   Σ (y_i − g(t_i))² ≤ s
//! ```
//!
//! over natural cubic splines with knots at the sample abscissae. The
//! solution is the penalized least-squares spline for the penalty weight at
//! which the residual budget binds (Reinsch). Writing the spline through its
//! knot values `g` and interior second derivatives `γ`, the penalized problem
//! reduces to the banded system
//!
//! ```text
//! (R + α QᵀQ) γ = Qᵀ y,     g = y − α Q γ,
//! ```
//!
//! where `Q` is the n×(n−2) second-difference matrix and `R` the (n−2)×(n−2)
//! tridiagonal Gram matrix. The residual sum `α²‖Qγ‖²` grows monotonically
//! with `α`, so the weight is found by a bracketed root search in `ln α`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{AdsbReport, EpuTable, Icao, Track};
use crate::scalar::{Scalar, Vec2};

/// Minimum number of samples for a cubic fit (degree + 1).
pub const MIN_SAMPLES: usize = 4;

/// Piecewise cubic with C² continuity, stored per piece in local
/// coordinates: `g(t) = a + b·u + c·u² + d·u³`, `u = t − knots[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spline1D<T> {
    knots: Vec<T>,
    coeffs: Vec<[T; 4]>,
    /// Value at the final knot, kept so evaluation there is exact.
    end_value: T,
}

impl<T: Scalar> Spline1D<T> {
    /// Natural cubic spline through `values` at `knots` with the given
    /// second derivatives at each knot.
    fn from_values_and_curvature(knots: Vec<T>, values: &[T], second: &[T]) -> Self {
        let two = T::lit(2.0);
        let six = T::lit(6.0);
        let coeffs = (0..knots.len() - 1)
            .map(|i| {
                let h = knots[i + 1] - knots[i];
                let (m0, m1) = (second[i], second[i + 1]);
                let b = (values[i + 1] - values[i]) / h - h * (two * m0 + m1) / six;
                [values[i], b, m0 / two, (m1 - m0) / (six * h)]
            })
            .collect();
        Self { knots, coeffs, end_value: values[values.len() - 1] }
    }

    pub const DEGREE: usize = 3;

    pub fn knots(&self) -> &[T] {
        &self.knots
    }

    pub fn domain(&self) -> (T, T) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    pub fn contains(&self, t: T) -> bool {
        let (a, b) = self.domain();
        t >= a && t <= b
    }

    fn piece_index(&self, t: T) -> usize {
        let idx = self.knots.partition_point(|k| *k <= t);
        idx.saturating_sub(1).min(self.coeffs.len() - 1)
    }

    fn eval_piece(&self, i: usize, t: T, order: u8) -> T {
        let [a, b, c, d] = self.coeffs[i];
        let u = t - self.knots[i];
        let (two, three, six) = (T::lit(2.0), T::lit(3.0), T::lit(6.0));
        match order {
            0 => a + u * (b + u * (c + u * d)),
            1 => b + u * (two * c + three * d * u),
            2 => two * c + six * d * u,
            3 => six * d,
            _ => T::zero(),
        }
    }

    /// Value (`order` 0), first (1) or second (2) derivative at `t`.
    /// Order 3 returns the piecewise-constant third derivative.
    pub fn evaluate(&self, t: T, order: u8) -> Result<T> {
        if !self.contains(t) {
            let (a, b) = self.domain();
            return Err(Error::OutOfDomain {
                t: t.to_f64().unwrap_or(f64::NAN),
                start: a.to_f64().unwrap_or(f64::NAN),
                end: b.to_f64().unwrap_or(f64::NAN),
            });
        }
        if order > 3 {
            return Err(Error::InvalidInput(format!("derivative order {order} not supported")));
        }
        if order == 0 && t == self.knots[self.knots.len() - 1] {
            return Ok(self.end_value);
        }
        Ok(self.eval_piece(self.piece_index(t), t, order))
    }

    /// Left and right limits of (value, slope, curvature) at interior knot `k`,
    /// taken from the two adjacent polynomial pieces.
    pub fn knot_limits(&self, k: usize) -> Option<([T; 3], [T; 3])> {
        if k == 0 || k + 1 >= self.knots.len() {
            return None;
        }
        let t = self.knots[k];
        let left = [0, 1, 2].map(|o| self.eval_piece(k - 1, t, o));
        let right = [0, 1, 2].map(|o| self.eval_piece(k, t, o));
        Some((left, right))
    }

    /// Σ (y_i − g(t_i))² over the given samples.
    pub fn residual_sum(&self, t: &[T], y: &[T]) -> Result<T> {
        let mut sum = T::zero();
        for (ti, yi) in t.iter().zip(y) {
            let r = *yi - self.evaluate(*ti, 0)?;
            sum += r * r;
        }
        Ok(sum)
    }
}

fn check_samples<T: Scalar>(t: &[T], y: &[T]) -> Result<()> {
    if t.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "{} abscissae but {} values",
            t.len(),
            y.len()
        )));
    }
    if t.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData { required: MIN_SAMPLES, available: t.len() });
    }
    for (i, w) in t.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidAbscissa { index: i + 1 });
        }
    }
    if t.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite sample".into()));
    }
    Ok(())
}

/// Banded pieces of the penalized system for one data set.
struct ReinschSystem<'a, T> {
    y: &'a [T],
    h: Vec<T>,
    /// Interior rows of Qᵀ (three nonzeros per interior knot).
    q: Vec<[T; 3]>,
    qty: Vec<T>,
    r_diag: Vec<T>,
    r_off: Vec<T>,
}

impl<'a, T: Scalar> ReinschSystem<'a, T> {
    fn new(t: &[T], y: &'a [T]) -> Self {
        let n = t.len();
        let h: Vec<T> = t.windows(2).map(|w| w[1] - w[0]).collect();
        let three = T::lit(3.0);
        let six = T::lit(6.0);
        let mut q = Vec::with_capacity(n - 2);
        let mut qty = Vec::with_capacity(n - 2);
        let mut r_diag = Vec::with_capacity(n - 2);
        let mut r_off = Vec::with_capacity(n - 3);
        for j in 1..n - 1 {
            let a = h[j - 1].recip();
            let c = h[j].recip();
            q.push([a, -a - c, c]);
            qty.push((y[j + 1] - y[j]) * c - (y[j] - y[j - 1]) * a);
            r_diag.push((h[j - 1] + h[j]) / three);
            if j < n - 2 {
                r_off.push(h[j] / six);
            }
        }
        Self { y, h, q, qty, r_diag, r_off }
    }

    fn interior(&self) -> usize {
        self.q.len()
    }

    /// Solves (R + α QᵀQ) γ = Qᵀy for the interior second derivatives.
    fn solve_gamma(&self, alpha: T) -> Result<Vec<T>> {
        let m = self.interior();
        let q = &self.q;
        let mut d0 = vec![T::zero(); m];
        let mut d1 = vec![T::zero(); m.saturating_sub(1)];
        let mut d2 = vec![T::zero(); m.saturating_sub(2)];
        for k in 0..m {
            let [a, b, c] = q[k];
            d0[k] = self.r_diag[k] + alpha * (a * a + b * b + c * c);
            if k + 1 < m {
                let [a1, b1, _] = q[k + 1];
                d1[k] = self.r_off[k] + alpha * (b * a1 + c * b1);
            }
            if k + 2 < m {
                d2[k] = alpha * c * q[k + 2][0];
            }
        }
        solve_pentadiagonal(&d0, &d1, &d2, &self.qty)
    }

    /// Q γ with zero second derivative at both ends (length n).
    fn q_times(&self, gamma: &[T]) -> Vec<T> {
        let n = self.y.len();
        let mut out = vec![T::zero(); n];
        for (k, g) in gamma.iter().enumerate() {
            let [a, b, c] = self.q[k];
            out[k] += a * *g;
            out[k + 1] += b * *g;
            out[k + 2] += c * *g;
        }
        out
    }

    /// Residual sum of squares at penalty weight `alpha`, with the solution.
    fn evaluate(&self, alpha: T) -> Result<(T, Vec<T>, Vec<T>)> {
        let gamma = self.solve_gamma(alpha)?;
        let qg = self.q_times(&gamma);
        let mut rss = T::zero();
        let values: Vec<T> = self
            .y
            .iter()
            .zip(&qg)
            .map(|(y, r)| {
                let res = alpha * *r;
                rss += res * res;
                *y - res
            })
            .collect();
        Ok((rss, values, gamma))
    }

    fn mean_spacing(&self) -> T {
        let sum = self.h.iter().fold(T::zero(), |acc, h| acc + *h);
        sum / T::from_usize_lossy(self.h.len())
    }
}

/// LDLᵀ solve of a symmetric positive definite pentadiagonal system given
/// its diagonal and first/second superdiagonals.
fn solve_pentadiagonal<T: Scalar>(d0: &[T], d1: &[T], d2: &[T], rhs: &[T]) -> Result<Vec<T>> {
    let m = d0.len();
    let mut diag = vec![T::zero(); m];
    let mut l1 = vec![T::zero(); m];
    let mut l2 = vec![T::zero(); m];
    for i in 0..m {
        let mut di = d0[i];
        if i >= 1 {
            di -= l1[i - 1] * l1[i - 1] * diag[i - 1];
        }
        if i >= 2 {
            di -= l2[i - 2] * l2[i - 2] * diag[i - 2];
        }
        if !(di > T::zero()) {
            return Err(Error::InvalidInput("spline system is not positive definite".into()));
        }
        diag[i] = di;
        if i + 1 < m {
            let mut v = d1[i];
            if i >= 1 {
                v -= l1[i - 1] * l2[i - 1] * diag[i - 1];
            }
            l1[i] = v / di;
        }
        if i + 2 < m {
            l2[i] = d2[i] / di;
        }
    }
    let mut x = rhs.to_vec();
    for i in 0..m {
        if i >= 1 {
            let v = l1[i - 1] * x[i - 1];
            x[i] -= v;
        }
        if i >= 2 {
            let v = l2[i - 2] * x[i - 2];
            x[i] -= v;
        }
    }
    for i in 0..m {
        x[i] /= diag[i];
    }
    for i in (0..m).rev() {
        if i + 1 < m {
            let v = l1[i] * x[i + 1];
            x[i] -= v;
        }
        if i + 2 < m {
            let v = l2[i] * x[i + 2];
            x[i] -= v;
        }
    }
    Ok(x)
}

fn linear_least_squares<T: Scalar>(t: &[T], y: &[T]) -> (Vec<T>, T) {
    let n = T::from_usize_lossy(t.len());
    let tm = t.iter().fold(T::zero(), |a, v| a + *v) / n;
    let ym = y.iter().fold(T::zero(), |a, v| a + *v) / n;
    let (mut sty, mut stt) = (T::zero(), T::zero());
    for (ti, yi) in t.iter().zip(y) {
        let dt = *ti - tm;
        sty += dt * (*yi - ym);
        stt += dt * dt;
    }
    let slope = sty / stt;
    let mut rss = T::zero();
    let values = t
        .iter()
        .zip(y)
        .map(|(ti, yi)| {
            let g = ym + slope * (*ti - tm);
            rss += (*yi - g) * (*yi - g);
            g
        })
        .collect();
    (values, rss)
}

/// Fits the cubic smoothing spline with residual budget `s`.
///
/// `s = 0` gives the natural interpolating spline. When `s` is at least the
/// residual of the least-squares line, the line itself is returned: it is
/// feasible and has zero roughness.
pub fn fit_smoothing_spline<T: Scalar>(t: &[T], y: &[T], s: T) -> Result<Spline1D<T>> {
    check_samples(t, y)?;
    if !(s >= T::zero()) || !s.is_finite() {
        return Err(Error::InvalidInput(format!("smoothing budget {s} must be finite and >= 0")));
    }
    let n = t.len();
    let sys = ReinschSystem::new(t, y);
    let with_ends = |gamma: &[T]| {
        let mut m = Vec::with_capacity(n);
        m.push(T::zero());
        m.extend_from_slice(gamma);
        m.push(T::zero());
        m
    };

    if s == T::zero() {
        let gamma = sys.solve_gamma(T::zero())?;
        return Ok(Spline1D::from_values_and_curvature(t.to_vec(), y, &with_ends(&gamma)));
    }

    let (line, line_rss) = linear_least_squares(t, y);
    if line_rss <= s {
        return Ok(Spline1D::from_values_and_curvature(t.to_vec(), &line, &vec![T::zero(); n]));
    }

    // Bracket the weight in ln α. RSS(α) rises from 0 towards line_rss.
    let ten = T::lit(10.0);
    let h = sys.mean_spacing();
    let mut hi = h * h * h;
    let mut hi_eval = sys.evaluate(hi)?;
    let mut lo;
    let mut lo_eval;
    if hi_eval.0 <= s {
        lo = hi;
        lo_eval = hi_eval;
        loop {
            hi = lo * ten;
            if !hi.is_finite() {
                // Budget numerically indistinguishable from the line's residual.
                let (_, v, g) = lo_eval;
                return Ok(Spline1D::from_values_and_curvature(t.to_vec(), &v, &with_ends(&g)));
            }
            hi_eval = sys.evaluate(hi)?;
            if hi_eval.0 > s {
                break;
            }
            lo = hi;
            lo_eval = hi_eval;
        }
    } else {
        lo = hi;
        loop {
            lo /= ten;
            lo_eval = sys.evaluate(lo)?;
            if lo_eval.0 <= s {
                break;
            }
            if lo == T::zero() {
                let gamma = sys.solve_gamma(T::zero())?;
                return Ok(Spline1D::from_values_and_curvature(
                    t.to_vec(),
                    y,
                    &with_ends(&gamma),
                ));
            }
        }
    }

    // Illinois regula falsi on φ(u) = ln RSS(e^u) − ln s.
    let ln_s = s.ln();
    let phi = |rss: T| if rss > T::zero() { rss.ln() - ln_s } else { T::neg_infinity() };
    let (mut u_lo, mut u_hi) = (lo.ln(), hi.ln());
    let (mut f_lo, mut f_hi) = (phi(lo_eval.0), phi(hi_eval.0));
    let rel_tol = T::epsilon() * T::lit(1e4);
    let half = T::lit(0.5);
    let mut side = 0i8;
    for _ in 0..200 {
        if (s - lo_eval.0) <= rel_tol * s || (u_hi - u_lo).abs() <= rel_tol {
            break;
        }
        let u = if f_lo.is_finite() && f_hi.is_finite() && f_hi != f_lo {
            let cand = u_hi - f_hi * (u_hi - u_lo) / (f_hi - f_lo);
            if cand > u_lo && cand < u_hi {
                cand
            } else {
                half * (u_lo + u_hi)
            }
        } else {
            half * (u_lo + u_hi)
        };
        let eval = sys.evaluate(u.exp())?;
        let f = phi(eval.0);
        if eval.0 <= s {
            u_lo = u;
            f_lo = f;
            lo_eval = eval;
            if side == -1 {
                f_hi *= half;
            }
            side = -1;
        } else {
            u_hi = u;
            f_hi = f;
            if side == 1 {
                f_lo *= half;
            }
            side = 1;
        }
    }
    let (_, values, gamma) = lo_eval;
    Ok(Spline1D::from_values_and_curvature(t.to_vec(), &values, &with_ends(&gamma)))
}

/// Per-axis acceleration limits, m/s².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccelBounds {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl AccelBounds {
    pub fn contains(&self, a: Vec2<f64>) -> bool {
        a.x >= self.x.0 && a.x <= self.x.1 && a.y >= self.y.0 && a.y <= self.y.1
    }
}

/// Acceleration limits from finite differences of the reported velocity,
/// widened by `margin` on both sides.
pub fn reported_accel_bounds(reports: &[AdsbReport], margin: f64) -> Result<AccelBounds> {
    let mut sorted: Vec<&AdsbReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.toa.total_cmp(&b.toa));
    let mut x = (f64::INFINITY, f64::NEG_INFINITY);
    let mut y = (f64::INFINITY, f64::NEG_INFINITY);
    let mut pairs = 0usize;
    for w in sorted.windows(2) {
        let dt = w[1].toa - w[0].toa;
        if dt <= 0.0 {
            continue;
        }
        let ax = (w[1].vel.x - w[0].vel.x) / dt;
        let ay = (w[1].vel.y - w[0].vel.y) / dt;
        x = (x.0.min(ax), x.1.max(ax));
        y = (y.0.min(ay), y.1.max(ay));
        pairs += 1;
    }
    if pairs == 0 {
        return Err(Error::InsufficientData { required: 2, available: 1.min(reports.len()) });
    }
    Ok(AccelBounds { x: (x.0 - margin, x.1 + margin), y: (y.0 - margin, y.1 + margin) })
}

/// Geometric schedule of smoothing budgets tried after the initial `s = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingSchedule {
    pub initial: f64,
    pub growth: f64,
    pub max_steps: u32,
}

impl SmoothingSchedule {
    /// `s₁ = n·σ₀²`, doubling, capped at `2¹⁶·s₁`.
    pub fn for_samples(n: usize, sigma: f64) -> Self {
        Self { initial: n as f64 * sigma * sigma, growth: 2.0, max_steps: 16 }
    }

    /// Budget sequence: 0, s₁, s₁·g, …, s₁·g^max_steps.
    pub fn budgets(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(0.0).chain((0..=self.max_steps).map(|k| self.initial * self.growth.powi(k as i32)))
    }
}

/// Default widening of the reported acceleration envelope, m/s².
pub const DEFAULT_ACCEL_MARGIN: f64 = 0.5;

/// Sampling rate of the acceleration check grid, Hz.
pub const ACCEL_GRID_HZ: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub s_final: f64,
    pub residual_sum_x: f64,
    pub residual_sum_y: f64,
    pub iterations: usize,
    pub accel_bounds: AccelBounds,
}

/// Smoothed reference trajectory P(t) = [x(t), y(t)] for one track.
#[derive(Debug, Clone)]
pub struct PseudoTruthTrack {
    pub icao: Icao,
    pub track_index: usize,
    pub x: Spline1D<f64>,
    pub y: Spline1D<f64>,
    pub diagnostics: FitDiagnostics,
}

impl PseudoTruthTrack {
    /// Wraps two splines with identical domains, without any fit diagnostics.
    pub fn from_splines(icao: Icao, track_index: usize, x: Spline1D<f64>, y: Spline1D<f64>) -> Result<Self> {
        if x.domain() != y.domain() {
            return Err(Error::InvalidInput("x and y splines cover different domains".into()));
        }
        let unbounded = (f64::NEG_INFINITY, f64::INFINITY);
        Ok(Self {
            icao,
            track_index,
            x,
            y,
            diagnostics: FitDiagnostics {
                s_final: 0.0,
                residual_sum_x: 0.0,
                residual_sum_y: 0.0,
                iterations: 0,
                accel_bounds: AccelBounds { x: unbounded, y: unbounded },
            },
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        self.x.domain()
    }

    pub fn contains(&self, t: f64) -> bool {
        self.x.contains(t)
    }

    fn eval(&self, t: f64, order: u8) -> Result<Vec2<f64>> {
        Ok(Vec2::new(self.x.evaluate(t, order)?, self.y.evaluate(t, order)?))
    }

    pub fn position(&self, t: f64) -> Result<Vec2<f64>> {
        self.eval(t, 0)
    }

    pub fn velocity(&self, t: f64) -> Result<Vec2<f64>> {
        self.eval(t, 1)
    }

    pub fn acceleration(&self, t: f64) -> Result<Vec2<f64>> {
        self.eval(t, 2)
    }

    /// Check grid: uniform at [`ACCEL_GRID_HZ`] over the domain plus every knot.
    pub fn check_grid(&self) -> Vec<f64> {
        accel_check_grid(self.x.knots())
    }
}

fn accel_check_grid(knots: &[f64]) -> Vec<f64> {
    let (a, b) = (knots[0], knots[knots.len() - 1]);
    let steps = ((b - a) * ACCEL_GRID_HZ).floor() as usize;
    let mut grid: Vec<f64> = (0..=steps).map(|k| a + k as f64 / ACCEL_GRID_HZ).filter(|t| *t <= b).collect();
    grid.extend_from_slice(knots);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Most frequent NACp among the reports; ties go to the lower accuracy.
pub fn modal_nacp(reports: &[AdsbReport]) -> Option<u8> {
    let mut counts = [0usize; 12];
    for r in reports {
        if let Some(c) = counts.get_mut(r.nacp as usize) {
            *c += 1;
        }
    }
    let (nacp, count) = counts.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))?;
    (*count > 0).then_some(nacp as u8)
}

/// Smoothing schedule derived from the track's modal NACp.
pub fn schedule_for_track(track: &Track, reports: &[AdsbReport], table: &EpuTable) -> Result<SmoothingSchedule> {
    let nacp = modal_nacp(reports).ok_or(Error::EmptyTrack)?;
    let sigma = table
        .sigma(nacp as i64)?
        .ok_or_else(|| Error::InvalidInput(format!("NACp {nacp} has no EPU bound to scale smoothing")))?;
    Ok(SmoothingSchedule::for_samples(track.points.len(), sigma))
}

/// Fits the pseudo-truth for a track, raising the shared smoothing budget
/// until the spline acceleration stays within the reported envelope on
/// both axes.
pub fn fit_pseudo_truth(
    track: &Track,
    reports: &[AdsbReport],
    schedule: &SmoothingSchedule,
    margin: f64,
) -> Result<PseudoTruthTrack> {
    if track.points.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData { required: MIN_SAMPLES, available: track.points.len() });
    }
    let bounds = reported_accel_bounds(reports, margin)?;
    let t: Vec<f64> = track.points.iter().map(|p| p.t).collect();
    let xs: Vec<f64> = track.points.iter().map(|p| p.pos.x).collect();
    let ys: Vec<f64> = track.points.iter().map(|p| p.pos.y).collect();
    let grid = accel_check_grid(&t);

    let mut last = (0.0, 0.0, 0.0);
    let mut iterations = 0;
    for s in schedule.budgets() {
        iterations += 1;
        let x = fit_smoothing_spline(&t, &xs, s)?;
        let y = fit_smoothing_spline(&t, &ys, s)?;
        let rx = x.residual_sum(&t, &xs)?;
        let ry = y.residual_sum(&t, &ys)?;
        last = (s, rx, ry);
        let ok = grid.iter().all(|&tg| {
            let a = Vec2::new(x.evaluate(tg, 2).unwrap_or(f64::NAN), y.evaluate(tg, 2).unwrap_or(f64::NAN));
            bounds.contains(a)
        });
        if ok {
            return Ok(PseudoTruthTrack {
                icao: track.icao,
                track_index: track.track_index,
                x,
                y,
                diagnostics: FitDiagnostics {
                    s_final: s,
                    residual_sum_x: rx,
                    residual_sum_y: ry,
                    iterations,
                    accel_bounds: bounds,
                },
            });
        }
    }
    Err(Error::SmoothingFailed {
        iterations,
        last_s: last.0,
        residual_sum_x: last.1,
        residual_sum_y: last.2,
    })
}
