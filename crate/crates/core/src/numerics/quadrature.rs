//! Globally adaptive Simpson quadrature with a Richardson error estimate.
//!
//! Each segment carries five samples so a split costs two new evaluations
//! per child. The segment with the largest error estimate is refined first,
//! which keeps the result deterministic for a fixed integrand and spec.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::summation::NeumaierSum;
use super::NumericsError;

/// Hard cap on integrand evaluations for a single call.
const MAX_EVALUATIONS: usize = 4_000_000;

/// Number of upper-limit doublings before the semi-infinite driver gives up.
const MAX_DOUBLINGS: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Maximum bisection depth of any one segment.
    pub max_subdivisions: u32,
    /// Relative contribution below which a tail panel ends semi-infinite
    /// integration.
    pub tail_mass_tol: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_subdivisions: 60,
            tail_mass_tol: 1e-9,
        }
    }
}

impl QuadratureSpec {
    /// Relative-only tolerance, for integrands whose scale is not known in
    /// advance (densities that may be 1e-20 or 1e+3).
    pub fn relative(rel_tol: f64) -> Self {
        Self {
            abs_tol: f64::MIN_POSITIVE,
            rel_tol,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), NumericsError> {
        if !(self.abs_tol > 0.0) {
            return Err(NumericsError::InvalidSpec("abs_tol must be > 0"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(NumericsError::InvalidSpec("rel_tol must be > 0"));
        }
        if !(self.tail_mass_tol > 0.0) {
            return Err(NumericsError::InvalidSpec("tail_mass_tol must be > 0"));
        }
        if self.max_subdivisions < 1 {
            return Err(NumericsError::InvalidSpec("max_subdivisions must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    /// f at a, a+h/4, a+h/2, a+3h/4, b
    fx: [f64; 5],
    value: f64,
    err: f64,
    depth: u32,
}

impl Segment {
    fn new(a: f64, b: f64, fx: [f64; 5], depth: u32) -> Self {
        let h = b - a;
        let coarse = h / 6.0 * (fx[0] + 4.0 * fx[2] + fx[4]);
        let fine = h / 12.0 * (fx[0] + 4.0 * fx[1] + 2.0 * fx[2] + 4.0 * fx[3] + fx[4]);
        let diff = fine - coarse;
        Self {
            a,
            b,
            fx,
            value: fine + diff / 15.0,
            err: diff.abs() / 15.0,
            depth,
        }
    }

    fn magnitude(&self) -> f64 {
        let h = self.b - self.a;
        h / 12.0
            * (self.fx[0].abs()
                + 4.0 * self.fx[1].abs()
                + 2.0 * self.fx[2].abs()
                + 4.0 * self.fx[3].abs()
                + self.fx[4].abs())
    }
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err).then_with(|| other.a.total_cmp(&self.a))
    }
}

struct Evaluator<'a, F> {
    f: &'a F,
    count: usize,
}

impl<F: Fn(f64) -> f64> Evaluator<'_, F> {
    fn eval(&mut self, x: f64) -> Result<f64, NumericsError> {
        self.count += 1;
        let y = (self.f)(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(NumericsError::NonFiniteIntegrand { x })
        }
    }

    fn segment(&mut self, a: f64, b: f64, depth: u32) -> Result<Segment, NumericsError> {
        let h = b - a;
        let fx = [
            // one-sided limits at panel ends, so a jump on a break is harmless
            self.eval(a.next_up())?,
            self.eval(a + 0.25 * h)?,
            self.eval(a + 0.5 * h)?,
            self.eval(a + 0.75 * h)?,
            self.eval(b.next_down())?,
        ];
        Ok(Segment::new(a, b, fx, depth))
    }

    fn split(&mut self, s: &Segment) -> Result<(Segment, Segment), NumericsError> {
        let h = s.b - s.a;
        let m = s.a + 0.5 * h;
        let l1 = self.eval(s.a + 0.125 * h)?;
        let l3 = self.eval(s.a + 0.375 * h)?;
        let r1 = self.eval(s.a + 0.625 * h)?;
        let r3 = self.eval(s.a + 0.875 * h)?;
        let left = Segment::new(s.a, m, [s.fx[0], l1, s.fx[1], l3, s.fx[2]], s.depth + 1);
        let right = Segment::new(m, s.b, [s.fx[2], r1, s.fx[3], r3, s.fx[4]], s.depth + 1);
        Ok((left, right))
    }
}

/// Integrates `f` over `[lo, hi]`.
///
/// On success the Richardson error estimate is within
/// `max(abs_tol, rel_tol |I|)`, floored at rounding level. When the refinement budget
/// runs out the best estimate is carried inside
/// [`NumericsError::QuadratureFailure`].
pub fn integrate_adaptive<F>(f: F, lo: f64, hi: f64, spec: &QuadratureSpec) -> Result<f64, NumericsError>
where
    F: Fn(f64) -> f64,
{
    integrate_piecewise(f, &[lo, hi], spec)
}

/// Integrates over consecutive panels `breaks[0]..breaks[1]..breaks[n]`.
///
/// Integrand discontinuities placed on panel boundaries never land inside a
/// Simpson segment, so piecewise-smooth integrands converge at the smooth rate.
pub fn integrate_piecewise<F>(f: F, breaks: &[f64], spec: &QuadratureSpec) -> Result<f64, NumericsError>
where
    F: Fn(f64) -> f64,
{
    spec.validate()?;
    if breaks.len() < 2 {
        return Err(NumericsError::InvalidInterval {
            lo: breaks.first().copied().unwrap_or(f64::NAN),
            hi: f64::NAN,
        });
    }
    for w in breaks.windows(2) {
        if !(w[0].is_finite() && w[1].is_finite() && w[0] < w[1]) {
            return Err(NumericsError::InvalidInterval { lo: w[0], hi: w[1] });
        }
    }

    let mut ev = Evaluator { f: &f, count: 0 };
    let mut heap = BinaryHeap::new();
    let mut frozen: Vec<Segment> = Vec::new();
    let mut total_value = 0.0;
    let mut total_err = 0.0;
    let mut total_mag = 0.0;
    for w in breaks.windows(2) {
        let s = ev.segment(w[0], w[1], 0)?;
        total_value += s.value;
        total_err += s.err;
        total_mag += s.magnitude();
        heap.push(s);
    }

    loop {
        let tol = spec
            .abs_tol
            .max(spec.rel_tol * total_value.abs())
            .max(32.0 * f64::EPSILON * total_mag);
        if total_err <= tol {
            break;
        }
        let Some(worst) = heap.pop() else {
            return Err(failure(&frozen, &heap, total_err));
        };
        let h = worst.b - worst.a;
        let m = worst.a + 0.5 * h;
        if worst.depth >= spec.max_subdivisions || !(worst.a < m && m < worst.b) {
            frozen.push(worst);
            continue;
        }
        if ev.count + 4 > MAX_EVALUATIONS {
            heap.push(worst);
            return Err(failure(&frozen, &heap, total_err));
        }
        let (left, right) = ev.split(&worst)?;
        total_value += left.value + right.value - worst.value;
        total_err += left.err + right.err - worst.err;
        total_mag += left.magnitude() + right.magnitude() - worst.magnitude();
        heap.push(left);
        heap.push(right);
    }

    let mut sum = NeumaierSum::new();
    for s in heap.iter().chain(frozen.iter()) {
        sum.add(s.value);
    }
    Ok(sum.total())
}

fn failure(frozen: &[Segment], heap: &BinaryHeap<Segment>, total_err: f64) -> NumericsError {
    let mut sum = NeumaierSum::new();
    for s in heap.iter().chain(frozen.iter()) {
        sum.add(s.value);
    }
    NumericsError::QuadratureFailure {
        estimate: sum.total(),
        error: total_err,
    }
}

/// Integrates `f` over `[lo, inf)` by doubling the upper limit.
///
/// The first panel is `[lo, lo + 10 * scale]`; every further panel doubles
/// the covered length. Integration stops once a panel contributes less than
/// `spec.tail_mass_tol` of the running total.
pub fn integrate_semi_infinite<F>(f: F, lo: f64, scale: f64, spec: &QuadratureSpec) -> Result<f64, NumericsError>
where
    F: Fn(f64) -> f64,
{
    spec.validate()?;
    if !(lo.is_finite() && scale.is_finite() && scale > 0.0) {
        return Err(NumericsError::InvalidInterval { lo, hi: f64::INFINITY });
    }
    let base = 10.0 * scale;
    let mut total = NeumaierSum::new();
    total.add(integrate_adaptive(&f, lo, lo + base, spec)?);
    let mut covered = base;
    for _ in 0..MAX_DOUBLINGS {
        let panel = integrate_adaptive(&f, lo + covered, lo + 2.0 * covered, spec)?;
        total.add(panel);
        covered *= 2.0;
        let running = total.total();
        if panel.abs() <= spec.tail_mass_tol * running.abs() || (panel == 0.0 && running == 0.0) {
            return Ok(running);
        }
    }
    Err(NumericsError::QuadratureFailure {
        estimate: total.total(),
        error: f64::INFINITY,
    })
}
