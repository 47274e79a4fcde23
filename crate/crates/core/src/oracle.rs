//! Exact reference values for 2-neighbour bootstrap percolation.
//!
//! For u = (1,0) the event "every line l_u(j), j < n, is occupied" is exactly
//! "no two adjacent all-healthy columns" among the n+1 columns of the m×(n+1)
//! window, because the helping-set classes are a single site on the line or
//! on the next one. Its probability follows from a two-state transfer matrix
//! with empty-column probability q = (1−p)^m.

/// ℙ_p(A^u(m,n)) for 2-neighbour, u = (1,0): transfer matrix over columns
/// 0..=n with states (previous column empty / occupied).
pub fn prob_a_exact(m: u32, n: u32, p: f64) -> f64 {
    let q = (1.0 - p).powi(m as i32);
    // column 0
    let (mut fe, mut fo) = (q, 1.0 - q);
    for _ in 0..n {
        let ne = q * fo; // empty allowed only after an occupied column
        let no = (1.0 - q) * (fe + fo);
        fe = ne;
        fo = no;
    }
    fe + fo
}

/// Largest eigenvalue of the no-adjacent-empty-columns transfer matrix.
pub fn lambda_max(q: f64) -> f64 {
    ((1.0 - q) + ((1.0 - q) * (1.0 + 3.0 * q)).sqrt()) / 2.0
}

/// Per-line decay rate −log λ_max at width m: the n → ∞ limit of
/// −log ℙ(A(m,n))/n.
pub fn h_rate(m: u32, p: f64) -> f64 {
    -lambda_max((1.0 - p).powi(m as i32)).ln()
}

/// β(w) = (w + √(w(4−3w)))/2, the p → 0 limit of λ_max at w = 1−q.
pub fn beta(w: f64) -> f64 {
    (w + (w * (4.0 - 3.0 * w)).sqrt()) / 2.0
}

/// The limiting traversability function h(x) = −log β(1−e^{−x}).
pub fn h_two_neighbour(x: f64) -> f64 {
    if x <= 0.0 {
        return f64::INFINITY;
    }
    -beta(1.0 - (-x).exp()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Independent check: enumerate the 2^(n+1) column-emptiness patterns.
    fn prob_a_enum(m: u32, n: u32, p: f64) -> f64 {
        let q = (1.0 - p).powi(m as i32);
        let cols = n + 1;
        let mut total = 0.0;
        for mask in 0u32..(1 << cols) {
            // bit set = column empty; reject adjacent empty pairs
            if mask & (mask >> 1) != 0 {
                continue;
            }
            let empties = mask.count_ones();
            total += q.powi(empties as i32) * (1.0 - q).powi((cols - empties) as i32);
        }
        total
    }

    #[test]
    fn small_case_value() {
        assert_relative_eq!(prob_a_exact(2, 1, 0.5), 0.9375, epsilon = 1e-12);
    }

    #[test]
    fn transfer_matrix_matches_enumeration() {
        for m in 1..=4 {
            for n in 0..=4 {
                for &p in &[0.1, 0.3, 0.5, 0.9] {
                    assert_relative_eq!(
                        prob_a_exact(m, n, p),
                        prob_a_enum(m, n, p),
                        epsilon = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn rate_matches_asymptotics() {
        // −log P(A(m,n))/n → −log λ_max as n grows
        let (m, p) = (10, 0.1);
        let rate = h_rate(m, p);
        let n = 4000;
        let empirical = -prob_a_exact(m, n, p).ln() / n as f64;
        assert_relative_eq!(empirical, rate, epsilon = 1e-3);
        // spec anchor: p = 0.1, x = 1 → ĥ ≈ 0.102
        assert!((rate - 0.102).abs() < 5e-3);
    }

    #[test]
    fn beta_is_small_p_limit() {
        // q → e^{−x} as p → 0 with x = p·m fixed
        let x = 1.2_f64;
        let p = 1e-5;
        let m = (x / p).round() as u32;
        let q = (1.0 - p).powi(m as i32);
        assert_relative_eq!(lambda_max(q), beta(1.0 - (-x).exp()), epsilon = 1e-4);
        assert!(h_two_neighbour(0.0).is_infinite());
    }
}
