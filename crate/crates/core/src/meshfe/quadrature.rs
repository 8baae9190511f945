//! Quadrature rules: a degree-4 symmetric rule on triangles and 3-point
//! Gauss-Legendre (degree 5) on edges.

/// Barycentric points and weights (weights sum to 1, multiply by the area).
pub struct TriangleRule {
    pub points: &'static [[f64; 3]],
    pub weights: &'static [f64],
}

const A1: f64 = 0.445_948_490_915_964_886_32;
const B1: f64 = 0.108_103_018_168_070_227_36;
const A2: f64 = 0.091_576_213_509_770_743_46;
const B2: f64 = 0.816_847_572_980_458_513_08;
const W1: f64 = 0.223_381_589_678_011_465_70;
const W2: f64 = 0.109_951_743_655_321_867_64;

static TRI4_POINTS: [[f64; 3]; 6] = [
    [B1, A1, A1],
    [A1, B1, A1],
    [A1, A1, B1],
    [B2, A2, A2],
    [A2, B2, A2],
    [A2, A2, B2],
];
static TRI4_WEIGHTS: [f64; 6] = [W1, W1, W1, W2, W2, W2];

/// Six-point rule exact for polynomials of degree 4.
pub const TRIANGLE_DEG4: TriangleRule = TriangleRule {
    points: &TRI4_POINTS,
    weights: &TRI4_WEIGHTS,
};

/// Points on `[0, 1]` and weights (summing to 1, multiply by the length).
pub struct EdgeRule {
    pub points: &'static [f64],
    pub weights: &'static [f64],
}

// 0.5 -+ sqrt(3/5) / 2
const G: f64 = 0.387_298_334_620_741_688_52;
static GAUSS3_POINTS: [f64; 3] = [0.5 - G, 0.5, 0.5 + G];
static GAUSS3_WEIGHTS: [f64; 3] = [5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0];

pub const EDGE_GAUSS3: EdgeRule = EdgeRule {
    points: &GAUSS3_POINTS,
    weights: &GAUSS3_WEIGHTS,
};

#[cfg(test)]
mod tests {
    use super::*;

    /// Integral of x^a y^b over the reference triangle: a! b! / (a + b + 2)!
    fn exact_monomial(a: u32, b: u32) -> f64 {
        let f = |n: u32| (1..=n).map(f64::from).product::<f64>();
        f(a) * f(b) / f(a + b + 2)
    }

    fn quad_monomial(a: i32, b: i32) -> f64 {
        TRIANGLE_DEG4
            .points
            .iter()
            .zip(TRIANGLE_DEG4.weights)
            .map(|(p, w)| 0.5 * w * p[1].powi(a) * p[2].powi(b))
            .sum()
    }

    #[test]
    fn triangle_rule_exact_to_degree_four() {
        assert!((quad_monomial(2, 2) - 1.0 / 180.0).abs() < 1e-14);
        for a in 0..=4u32 {
            for b in 0..=(4 - a) {
                let err = (quad_monomial(a as i32, b as i32) - exact_monomial(a, b)).abs();
                assert!(err < 1e-15, "x^{a} y^{b}: {err}");
            }
        }
        let s: f64 = TRIANGLE_DEG4.weights.iter().sum();
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn edge_rule_exact_to_degree_five() {
        for k in 0..=5 {
            let q: f64 = EDGE_GAUSS3
                .points
                .iter()
                .zip(EDGE_GAUSS3.weights)
                .map(|(s, w)| w * s.powi(k))
                .sum();
            assert!((q - 1.0 / (k + 1) as f64).abs() < 1e-15);
        }
    }
}
