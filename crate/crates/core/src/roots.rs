//! Scalar root isolation on an interval.

/// Bisection on a bracket with `f(lo)` and `f(hi)` of opposite signs.
///
/// Runs until the bracket is no wider than `abs_tol` or cannot be split
/// further in floating point.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, abs_tol: f64) -> f64 {
    let mut flo = f(lo);
    if flo == 0.0 {
        return lo;
    }
    if f(hi) == 0.0 {
        return hi;
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= abs_tol {
            return mid;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
}

/// Roots of `f` on `[lo, hi]` located by a uniform scan of `points` samples,
/// each sign change refined by [`bisect`].
///
/// Roots where `f` touches zero without changing sign are only found if a
/// sample lands on them exactly.
pub fn scan_roots(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    points: usize,
    abs_tol: f64,
) -> Vec<f64> {
    assert!(points >= 2 && hi > lo);
    let h = (hi - lo) / (points - 1) as f64;
    let at = |k: usize| {
        if k + 1 == points {
            hi
        } else {
            lo + h * k as f64
        }
    };
    let mut roots: Vec<f64> = Vec::new();
    let mut push = |r: f64| {
        if roots
            .last()
            .is_none_or(|&p| (r - p).abs() > 4.0 * abs_tol.max(f64::EPSILON))
        {
            roots.push(r);
        }
    };
    let mut a = at(0);
    let mut fa = f(a);
    if fa == 0.0 {
        push(a);
    }
    for k in 1..points {
        let b = at(k);
        let fb = f(b);
        if fb == 0.0 {
            push(b);
        } else if fa != 0.0 && (fa < 0.0) != (fb < 0.0) {
            push(bisect(&f, a, b, abs_tol));
        }
        a = b;
        fa = fb;
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_reaches_float_precision() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 0.0);
        assert!((r - 2f64.sqrt()).abs() <= 2.0 * f64::EPSILON);
    }

    #[test]
    fn scan_finds_all_simple_roots() {
        let r = scan_roots(
            |x| (x - 0.1) * (x - 0.5) * (x - 0.77),
            0.0,
            1.0,
            1000,
            1e-14,
        );
        assert_eq!(r.len(), 3);
        for (got, want) in r.iter().zip([0.1, 0.5, 0.77]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn scan_keeps_grid_hits_once() {
        let r = scan_roots(|x| x - 0.5, 0.0, 1.0, 11, 1e-14);
        assert_eq!(r, vec![0.5]);
    }
}
