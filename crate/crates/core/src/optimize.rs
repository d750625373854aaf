//! One-dimensional search used for the ν optimisations.
//!
//! A coarse grid brackets the optimum, then golden-section search refines it.
//! Both objective shapes that occur here (the min of two quasi-concave terms,
//! the max of two quasi-convex ones) are unimodal on the search interval, so
//! the bracket always contains the global optimum.

/// Lower end of the ν search interval.
pub const NU_MIN: f64 = 1e-3;
/// Upper end of the ν search interval.
pub const NU_MAX: f64 = 10.0;

const BRACKET_POINTS: usize = 200;
const TOLERANCE: f64 = 1e-9;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Maximises `f` over `[lo, hi]`, returning `(argmax, max)`.
pub fn maximize(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let step = (hi - lo) / (BRACKET_POINTS - 1) as f64;
    let node = |i: usize| if i == BRACKET_POINTS - 1 { hi } else { lo + step * i as f64 };

    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for i in 0..BRACKET_POINTS {
        let v = f(node(i));
        if v > best_val {
            best = i;
            best_val = v;
        }
    }

    let a = node(best.saturating_sub(1));
    let b = node((best + 1).min(BRACKET_POINTS - 1));
    let (x, v) = golden_max(&f, a, b);
    if v >= best_val {
        (x, v)
    } else {
        (node(best), best_val)
    }
}

/// Minimises `f` over `[lo, hi]`, returning `(argmin, min)`.
pub fn minimize(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let (x, v) = maximize(|x| -f(x), lo, hi);
    (x, -v)
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);

    while b - a > TOLERANCE {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        }
    }

    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Root of `g` in `[a, b]` by bisection to the last representable midpoint.
/// `g(a)` and `g(b)` must differ in sign.
pub fn bisect(g: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let ga = g(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if (gm < 0.0) == (ga < 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Moves `x` onto the nearby crossing of `f1` and `f2`, if there is one
/// within `radius`. Golden-section search only locates a kink to its
/// tolerance, which is too coarse when the objective is steep there.
pub fn polish_crossing(f1: impl Fn(f64) -> f64, f2: impl Fn(f64) -> f64, x: f64, radius: f64) -> Option<f64> {
    let g = |v: f64| f1(v) - f2(v);
    let (a, b) = (x - radius, x + radius);
    if (g(a) < 0.0) != (g(b) < 0.0) {
        Some(bisect(g, a, b))
    } else {
        None
    }
}
