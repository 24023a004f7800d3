//! Quadrature rules and the scalar divided-difference kernels of |x|.
//!
//! Three families of rules are built here: Gauss-Legendre on a segment
//! (via the Golub-Welsch eigenproblem), a tan-mapped half-line rule used by
//! the resolvent representations of operator functions, and product rules
//! on the unit sphere. The divided-difference kernels of the absolute value
//! live here too because both the derivative formulas and their quadrature
//! oracles need them.

use crate::linalg::tridiag_eigh;

/// Gauss-Legendre nodes and weights on [-1, 1].
/// Golub-Welsch: the Jacobi matrix for Legendre polynomials has zero
/// diagonal and subdiagonal k/sqrt(4k^2-1); its eigenvalues are the nodes
/// and the squared first eigenvector components give the weights.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let diag = vec![0.0f64; n];
    let off: Vec<f64> = (1..n)
        .map(|k| {
            let k = k as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        })
        .collect();
    let (nodes, z) = tridiag_eigh(&diag, &off).expect("Jacobi matrix diagonalization");
    let weights: Vec<f64> = (0..n).map(|i| 2.0 * z[i * n] * z[i * n]).collect();
    (nodes, weights)
}

/// Gauss-Legendre mapped to [a, b].
pub fn segment_rule(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    (
        x.iter().map(|xi| mid + half * xi).collect(),
        w.iter().map(|wi| wi * half).collect(),
    )
}

/// Quadrature for integrals over (0, inf) of functions analytic on the
/// half-line and decaying at least like y^{-2}: Gauss-Legendre composed
/// with y = scale * tan(pi (x+1)/4). The map compresses both endpoints
/// smoothly, so rational kernels with poles at distance >= min(|pole|/scale,
/// scale/|pole|) from the real axis converge geometrically.
#[derive(Clone, Debug)]
pub struct HalfLineRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

pub fn half_line_rule(n: usize, scale: f64) -> HalfLineRule {
    assert!(scale > 0.0);
    let (x, w) = gauss_legendre(n);
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let quarter_pi = std::f64::consts::FRAC_PI_4;
    for (xi, wi) in x.iter().zip(&w) {
        let theta = quarter_pi * (xi + 1.0);
        let t = theta.tan();
        let sec2 = 1.0 + t * t;
        nodes.push(scale * t);
        weights.push(wi * scale * quarter_pi * sec2);
    }
    HalfLineRule { nodes, weights }
}

impl HalfLineRule {
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(y, w)| w * f(*y))
            .sum()
    }

    /// |lambda| through the resolvent representation
    /// |x| = (2/pi) * int_0^inf x^2/(x^2+y^2) dy, on this rule.
    pub fn abs_value(&self, lambda: f64) -> f64 {
        let s = self.integrate(|y| lambda * lambda / (lambda * lambda + y * y));
        s * std::f64::consts::FRAC_2_PI
    }
}

/// Product rule on the unit sphere: Gauss-Legendre in cos(theta) times a
/// uniform periodic rule in phi (spectrally accurate for smooth integrands).
/// Weights sum to 4 pi. Points come in exact antipodal pairs when n_phi is
/// even, which the parity checks rely on.
pub fn sphere_product_rule(n_theta: usize, n_phi: usize) -> Vec<([f64; 3], f64)> {
    let (t, wt) = gauss_legendre(n_theta);
    let mut out = Vec::with_capacity(n_theta * n_phi);
    let wphi = 2.0 * std::f64::consts::PI / n_phi as f64;
    for (ti, wi) in t.iter().zip(&wt) {
        let st = (1.0 - ti * ti).max(0.0).sqrt();
        for p in 0..n_phi {
            let phi = wphi * (p as f64 + 0.5);
            out.push(([st * phi.cos(), st * phi.sin(), *ti], wi * wphi));
        }
    }
    out
}

/// First divided difference of |x|: (|a|-|b|)/(a-b), continued by sgn(a) on
/// the diagonal. The algebraic form (a+b)/(|a|+|b|) realizes both branches
/// at once and stays stable whenever the spectrum is bounded away from 0.
pub fn abs_divided_diff1(a: f64, b: f64) -> f64 {
    (a + b) / (a.abs() + b.abs())
}

/// Second divided difference of |x| over a triple, symmetric in its
/// arguments. Zero when all three share a sign (|x| is linear there).
/// For mixed signs the triple is sorted so the outer pair straddles zero,
/// keeping the outer denominator at least twice the spectral gap.
pub fn abs_divided_diff2(a: f64, b: f64, c: f64) -> f64 {
    let (pos, neg) = (
        (a >= 0.0) as u8 + (b >= 0.0) as u8 + (c >= 0.0) as u8,
        (a < 0.0) as u8 + (b < 0.0) as u8 + (c < 0.0) as u8,
    );
    if pos == 3 || neg == 3 {
        return 0.0;
    }
    let mut t = [a, b, c];
    t.sort_by(f64::total_cmp);
    // t[0] < 0 < t[2] now.
    (abs_divided_diff1(t[0], t[1]) - abs_divided_diff1(t[1], t[2])) / (t[0] - t[2])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(5);
        assert_eq!(x.len(), 5);
        // Degree 9 is exact for n = 5.
        for k in 0..=9usize {
            let got: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(k as i32)).sum();
            let want = if k % 2 == 0 { 2.0 / (k as f64 + 1.0) } else { 0.0 };
            assert!((got - want).abs() < 1e-13, "degree {k}: {got} vs {want}");
        }
        // Symmetry of the rule.
        for i in 0..5 {
            assert!((x[i] + x[4 - i]).abs() < 1e-14);
            assert!((w[i] - w[4 - i]).abs() < 1e-14);
        }
    }

    #[test]
    fn half_line_rule_reproduces_abs() {
        // Uniform accuracy over two decades with one shared rule.
        let rule = half_line_rule(96, (1.0f64 * 40.0).sqrt());
        for lam in [1.0, -1.0, 2.7, -3.3, 10.0, -25.0, 40.0] {
            let err = (rule.abs_value(lam) - lam.abs()).abs();
            assert!(err < 1e-12, "lambda {lam}: err {err}");
        }
    }

    #[test]
    fn half_line_rule_two_pole_identity() {
        // int_0^inf y^2 / ((a^2+y^2)(b^2+y^2)) dy = pi / (2 (a+b)).
        let rule = half_line_rule(96, 3.0);
        for (a, b) in [(1.0, 1.0), (1.0, 4.0), (2.5, 9.0)] {
            let got = rule.integrate(|y| y * y / ((a * a + y * y) * (b * b + y * y)));
            let want = std::f64::consts::PI / (2.0 * (a + b));
            assert!((got - want).abs() < 1e-12 * want, "a={a} b={b}");
        }
    }

    #[test]
    fn sphere_rule_weights_and_moments() {
        let pts = sphere_product_rule(16, 16);
        let total: f64 = pts.iter().map(|(_, w)| w).sum();
        assert!((total - 4.0 * std::f64::consts::PI).abs() < 1e-11);
        // int n_i n_j dOmega = (4 pi / 3) delta_ij.
        for i in 0..3 {
            for j in 0..3 {
                let got: f64 = pts.iter().map(|(n, w)| w * n[i] * n[j]).sum();
                let want = if i == j {
                    4.0 * std::f64::consts::PI / 3.0
                } else {
                    0.0
                };
                assert!((got - want).abs() < 1e-11, "moment {i}{j}");
            }
        }
    }

    #[test]
    fn divided_differences_match_definitions() {
        // First kernel against the textbook quotient.
        for (a, b) in [(1.5, 2.5), (-3.0, 2.0), (1.2, -1.0), (-2.0, -5.0)] {
            let direct = (f64::abs(a) - f64::abs(b)) / (a - b);
            assert!((abs_divided_diff1(a, b) - direct).abs() < 1e-14);
        }
        assert_eq!(abs_divided_diff1(2.0, 2.0), 1.0);
        assert_eq!(abs_divided_diff1(-3.0, -3.0), -1.0);

        // Second kernel against the recursive definition on distinct triples.
        let direct2 = |a: f64, b: f64, c: f64| {
            let d1 = (a.abs() - b.abs()) / (a - b);
            let d2 = (b.abs() - c.abs()) / (b - c);
            (d1 - d2) / (a - c)
        };
        for (a, b, c) in [
            (1.5, 2.5, 4.0),
            (-1.5, 2.5, 4.0),
            (-4.0, -1.2, 3.3),
            (-5.0, -2.0, -1.1),
            (2.0, -1.5, 3.0),
        ] {
            let want = direct2(a, b, c);
            let got = abs_divided_diff2(a, b, c);
            assert!((got - want).abs() < 1e-12, "triple ({a},{b},{c})");
        }
        // Permutation symmetry.
        assert_eq!(
            abs_divided_diff2(-1.5, 2.5, 4.0),
            abs_divided_diff2(4.0, -1.5, 2.5)
        );
        // Same-sign triples vanish identically, including with repeats.
        assert_eq!(abs_divided_diff2(1.0, 1.0, 2.0), 0.0);
    }

    #[test]
    fn dd2_separable_resolvent_representation() {
        // The production Hessian path relies on
        //   dd2(a,b,c) = -(2/pi) int_0^inf y Im[ 1/((a-iy)(b-iy)(c-iy)) ] dy
        // which factorizes over matrix indices. Verify against the direct
        // kernel on spectra bounded away from zero.
        let rule = half_line_rule(160, 2.0);
        let via_quad = |a: f64, b: f64, c: f64| {
            let s = rule.integrate(|y| {
                let za = num_complex::Complex64::new(a, -y);
                let zb = num_complex::Complex64::new(b, -y);
                let zc = num_complex::Complex64::new(c, -y);
                let prod = za * zb * zc;
                y * (prod.inv()).im
            });
            -s * std::f64::consts::FRAC_2_PI
        };
        for (a, b, c) in [
            (1.0, 2.0, 3.0),
            (-1.0, 2.0, 3.0),
            (-2.5, -1.0, 1.5),
            (-4.0, -2.0, -1.0),
            (1.0, 1.0, -1.0),
            (2.2, -1.7, 2.2),
        ] {
            let want = abs_divided_diff2(a, b, c);
            let got = via_quad(a, b, c);
            assert!(
                (got - want).abs() < 1e-9,
                "triple ({a},{b},{c}): {got} vs {want}"
            );
        }
    }
}
