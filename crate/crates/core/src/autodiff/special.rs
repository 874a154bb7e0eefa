//! Log-gamma and digamma for the `lgamma` tape op.

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln |Γ(x)|`. Lanczos approximation below 15, Stirling series above,
/// reflection for `x < 0.5`. Poles return `+∞`.
pub fn ln_gamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        return f64::INFINITY;
    }
    if x < 0.5 {
        return (PI / (PI * x).sin().abs()).ln() - ln_gamma(1.0 - x);
    }
    if x >= 15.0 {
        let r = 1.0 / x;
        let r2 = r * r;
        let series = r * (1.0 / 12.0 - r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0 - r2 / 1680.0)));
        return (x - 0.5) * x.ln() - x + HALF_LN_2PI + series;
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    HALF_LN_2PI + (x + 0.5) * t.ln() - t + acc.ln()
}

/// `ψ(x) = d/dx ln Γ(x)`: upward recurrence to `x ≥ 10`, then the
/// asymptotic expansion; reflection for non-positive arguments.
pub fn digamma(x: f64) -> f64 {
    if x <= 0.0 {
        if x == x.floor() {
            return f64::NAN;
        }
        return digamma(1.0 - x) - PI / (PI * x).tan();
    }
    let mut x = x;
    let mut acc = 0.0;
    while x < 10.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let r = 1.0 / x;
    let r2 = r * r;
    let tail = r2
        * (1.0 / 12.0
            - r2 * (1.0 / 120.0 - r2 * (1.0 / 252.0 - r2 * (1.0 / 240.0 - r2 * (1.0 / 132.0)))));
    acc + x.ln() - 0.5 * r - tail
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_matches_factorials() {
        let mut fact = 1.0f64;
        for n in 1..30 {
            // Γ(n) = (n-1)!
            let got = ln_gamma(n as f64);
            assert!(
                (got - fact.ln()).abs() < 1e-12 * (1.0 + fact.ln().abs()),
                "n={n}"
            );
            fact *= n as f64;
        }
        assert!((ln_gamma(0.5) - PI.sqrt().ln()).abs() < 1e-14);
    }

    #[test]
    fn ln_gamma_matches_statrs() {
        for &x in &[1e-3, 0.1, 0.7, 1.5, 3.3, 9.9, 14.99, 15.0, 27.5, 1e3, 1e6] {
            let want = statrs::function::gamma::ln_gamma(x);
            assert!(
                (ln_gamma(x) - want).abs() < 1e-10 * (1.0 + want.abs()),
                "x={x}"
            );
        }
        // negative non-integer via reflection: Γ(-0.5) = -2√π
        assert!((ln_gamma(-0.5) - (2.0 * PI.sqrt()).ln()).abs() < 1e-13);
    }

    #[test]
    fn digamma_matches_statrs_and_identities() {
        for &x in &[1e-3, 0.25, 1.0, 2.5, 7.0, 12.0, 300.0, 1e6] {
            let want = statrs::function::gamma::digamma(x);
            assert!(
                (digamma(x) - want).abs() < 1e-10 * (1.0 + want.abs()),
                "x={x}"
            );
        }
        // ψ(1) = -γ
        assert!((digamma(1.0) + 0.577_215_664_901_532_9).abs() < 1e-13);
        // ψ(1-x) - ψ(x) = π cot(πx)
        let x = -1.3;
        assert!((digamma(1.0 - x) - digamma(x) - PI / (PI * x).tan()).abs() < 1e-10);
    }

    #[test]
    fn digamma_is_derivative_of_ln_gamma() {
        for &x in &[0.3, 1.7, 5.0, 14.9, 15.1, 40.0] {
            let h = 1e-5 * (1.0 + x);
            let fd = (ln_gamma(x + h) - ln_gamma(x - h)) / (2.0 * h);
            assert!((fd - digamma(x)).abs() < 1e-8, "x={x}");
        }
    }
}
