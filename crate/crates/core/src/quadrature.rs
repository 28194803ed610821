//! Gauss-Legendre rules on a reference interval mapped to `[a, b]`.

/// A fixed Gauss-Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone, Copy)]
pub struct GaussRule {
    pub points: &'static [f64],
    pub weights: &'static [f64],
}

const G3_X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const G3_W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

const G5_X: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const G5_W: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Exact for polynomials up to degree 5. Every integrand built from P1
/// functions in this crate (at most degree 4) is integrated exactly.
pub const GAUSS3: GaussRule = GaussRule { points: &G3_X, weights: &G3_W };

/// Exact up to degree 9, used for smooth non-polynomial integrands.
pub const GAUSS5: GaussRule = GaussRule { points: &G5_X, weights: &G5_W };

impl GaussRule {
    /// Physical points and weights on `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.points
            .iter()
            .zip(self.weights)
            .map(move |(&p, &w)| (mid + half * p, half * w))
    }

    pub fn integrate(&self, a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }
}

/// Composite rule with `pieces` equal sub-intervals of `[a, b]`.
pub fn composite(rule: &GaussRule, a: f64, b: f64, pieces: usize, f: impl Fn(f64) -> f64) -> f64 {
    let width = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let lo = a + i as f64 * width;
            let hi = if i + 1 == pieces { b } else { lo + width };
            rule.integrate(lo, hi, &f)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exact_degrees() {
        for deg in 0..=5 {
            let exact = (2f64.powi(deg + 1) - 1.0) / (deg + 1) as f64;
            assert_relative_eq!(GAUSS3.integrate(1.0, 2.0, |x| x.powi(deg)), exact, epsilon = 1e-13);
        }
        for deg in 0..=9 {
            let exact = 1.0 / (deg + 1) as f64;
            assert_relative_eq!(GAUSS5.integrate(0.0, 1.0, |x| x.powi(deg)), exact, epsilon = 1e-14);
        }
    }

    #[test]
    fn composite_smooth() {
        let v = composite(&GAUSS5, 0.0, std::f64::consts::PI, 16, f64::sin);
        assert_relative_eq!(v, 2.0, epsilon = 1e-14);
    }
}
