//! Adaptive Simpson quadrature with caller-supplied breakpoints.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureOptions {
    pub abs_tol: f64,
    pub max_depth: u32,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            abs_tol: 1e-8,
            max_depth: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

struct Simpson<'a, F> {
    f: &'a F,
    evals: usize,
    err: f64,
}

impl<F: Fn(f64) -> f64> Simpson<'_, F> {
    #[allow(clippy::too_many_arguments)]
    fn recurse(&mut self, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = ((self.f)(lm), (self.f)(rm));
        self.evals += 2;
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        let floor = 64.0 * f64::EPSILON * (left.abs() + right.abs());
        if depth == 0 || delta.abs() <= 15.0 * tol.max(floor) {
            self.err += delta.abs() / 15.0;
            return left + right + delta / 15.0;
        }
        self.recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + self.recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Integrates `f` over `[a, b]` to absolute tolerance `opts.abs_tol`.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, opts: &QuadratureOptions) -> Quadrature {
    integrate_piecewise(f, a, b, &[], opts)
}

/// Integrates over `[a, b]` after splitting at every breakpoint strictly
/// inside the interval; the tolerance is shared in proportion to width.
pub fn integrate_piecewise(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: &QuadratureOptions,
) -> Quadrature {
    let mut knots: Vec<f64> = std::iter::once(a)
        .chain(breakpoints.iter().copied().filter(|&x| x > a && x < b))
        .chain(std::iter::once(b))
        .collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();

    let width = b - a;
    let mut s = Simpson {
        f: &f,
        evals: 0,
        err: 0.0,
    };
    let mut total = 0.0;
    for w in knots.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if hi <= lo {
            continue;
        }
        let share = if width > 0.0 { opts.abs_tol * (hi - lo) / width } else { opts.abs_tol };
        let (flo, fhi) = (f(lo), f(hi));
        let mid = 0.5 * (lo + hi);
        let fmid = f(mid);
        s.evals += 3;
        let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        total += s.recurse(lo, hi, flo, fmid, fhi, whole, share, opts.max_depth);
    }
    Quadrature {
        value: total,
        error_estimate: s.err,
        evaluations: s.evals,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_is_exact() {
        let q = adaptive_simpson(|x| x * x * x - 2.0 * x, 0.0, 2.0, &Default::default());
        assert!((q.value - 0.0).abs() < 1e-14);
    }

    #[test]
    fn smooth_integrand_meets_tolerance() {
        let q = adaptive_simpson(f64::sin, 0.0, std::f64::consts::PI, &Default::default());
        assert!((q.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn kink_at_breakpoint_is_exact() {
        let f = |x: f64| (x - 0.3).abs();
        let q = integrate_piecewise(f, 0.0, 1.0, &[0.3], &Default::default());
        assert!((q.value - (0.045 + 0.245)).abs() < 1e-15);
        // Without the breakpoint the adaptive scheme still converges.
        let q = adaptive_simpson(f, 0.0, 1.0, &Default::default());
        assert!((q.value - 0.29).abs() < 1e-8);
    }

    #[test]
    fn empty_interval() {
        assert_eq!(adaptive_simpson(|x| x, 1.0, 1.0, &Default::default()).value, 0.0);
    }
}
