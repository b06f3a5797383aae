//! Independent oracles used by the acceptance suite. Nothing here calls the
//! collision or statistics code it is used to check.

use pinned_billiards::Vec2;

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

/// Double-double accumulation of (hi, lo) terms.
fn dd_sum(terms: &[(f64, f64)]) -> (f64, f64) {
    let mut hi = 0.0;
    let mut lo = 0.0;
    for &(h, l) in terms {
        let (s, e) = two_sum(hi, h);
        hi = s;
        lo += e + l;
    }
    two_sum(hi, lo)
}

fn dd_square(a: (f64, f64)) -> (f64, f64) {
    dd_sum(&[two_prod(a.0, a.0), two_prod(2.0 * a.0, a.1)])
}

/// Post-collision velocities from momentum and energy conservation along
/// `d` alone: solves u1' + u2' = P and u1'^2 + u2'^2 = Q for the root that
/// differs from the incoming u1, in compensated arithmetic. Components
/// perpendicular to `d` are carried over unchanged.
pub fn conservation_solve(v1: Vec2, v2: Vec2, d: Vec2) -> (Vec2, Vec2) {
    let u1 = dd_sum(&[two_prod(v1.x, d.x), two_prod(v1.y, d.y)]);
    let u2 = dd_sum(&[two_prod(v2.x, d.x), two_prod(v2.y, d.y)]);
    let p = dd_sum(&[u1, u2]);
    let q = dd_sum(&[dd_square(u1), dd_square(u2)]);
    let pp = dd_square(p);
    // 2x^2 - 2Px + (P^2 - Q) = 0 has discriminant 4(2Q - P^2)
    let disc = dd_sum(&[(2.0 * q.0, 2.0 * q.1), (-pp.0, -pp.1)]);
    let disc = disc.0 + disc.1;
    let s = if disc > 0.0 {
        let r = disc.sqrt();
        r + (disc - r * r) / (2.0 * r)
    } else {
        0.0
    };
    let p = p.0 + p.1;
    let (plus, minus) = ((p + s) / 2.0, (p - s) / 2.0);
    let u1v = u1.0 + u1.1;
    let r1 = if (plus - u1v).abs() >= (minus - u1v).abs() {
        plus
    } else {
        minus
    };
    let r2 = p - r1;
    let u2v = u2.0 + u2.1;
    (v1 + d * (r1 - u1v), v2 + d * (r2 - u2v))
}

/// Counts rise to a single peak and then fall; ties are allowed anywhere.
pub fn is_unimodal(counts: &[u64]) -> bool {
    let mut falling = false;
    for w in counts.windows(2) {
        if w[1] < w[0] {
            falling = true;
        } else if w[1] > w[0] && falling {
            return false;
        }
    }
    true
}

/// Unbiased sample variance about the sample mean.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn near(a: Vec2, b: Vec2) -> bool {
        (a - b).norm() < 1e-15
    }

    #[test]
    fn head_on_exchange() {
        let (a, b) = conservation_solve(Vec2::new(1.0, 0.0), Vec2::ZERO, Vec2::new(1.0, 0.0));
        assert!(near(a, Vec2::ZERO) && near(b, Vec2::new(1.0, 0.0)));
    }

    #[test]
    fn glancing_keeps_tangential_part() {
        let (a, b) = conservation_solve(
            Vec2::new(1.0, 2.0),
            Vec2::new(-1.0, 3.0),
            Vec2::new(1.0, 0.0),
        );
        assert!(near(a, Vec2::new(-1.0, 2.0)) && near(b, Vec2::new(1.0, 3.0)));
    }

    #[test]
    fn equal_normal_speeds_are_a_double_root() {
        let v = Vec2::new(0.3, -0.4);
        let (a, b) = conservation_solve(v, v, Vec2::new(0.6, 0.8));
        assert!(near(a, v) && near(b, v));
    }

    #[test]
    fn unimodality() {
        assert!(is_unimodal(&[0, 1, 3, 3, 2, 0]));
        assert!(is_unimodal(&[5, 4, 0]));
        assert!(is_unimodal(&[]));
        assert!(!is_unimodal(&[1, 3, 1, 2, 0]));
    }

    #[test]
    fn variance_of_small_sample() {
        assert!((sample_variance(&[1.0, 2.0, 3.0, 4.0]) - 5.0 / 3.0).abs() < 1e-15);
    }
}
