//! Exponential integral `E1`.

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const EPS: f64 = 1e-16;
const MAX_TERMS: usize = 500;

/// `E1(x) = ∫_x^∞ e^{-t}/t dt` for `x > 0`; NaN otherwise.
pub fn e1(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    if x <= 1.0 {
        e1_series(x)
    } else {
        (-x).exp() * continued_fraction(x)
    }
}

/// `e^x E1(x)`, finite for every `x > 0` (no overflow for large `x`).
pub fn scaled_e1(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    if x <= 1.0 {
        x.exp() * e1_series(x)
    } else {
        continued_fraction(x)
    }
}

fn e1_series(x: f64) -> f64 {
    // -γ - ln x - Σ_{k≥1} (-x)^k / (k k!)
    let mut sum = 0.0;
    let mut term = 1.0; // (-x)^k / k!
    for k in 1..MAX_TERMS {
        term *= -x / k as f64;
        let add = term / k as f64;
        sum += add;
        if add.abs() < EPS * sum.abs() {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

/// Modified Lentz evaluation of the continued fraction for `e^x E1(x)`,
/// convergent for `x > 1`.
fn continued_fraction(x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_TERMS {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        // Abramowitz & Stegun table 5.1
        let cases = [
            (0.1, 1.822_923_958_419_390_7),
            (0.5, 0.559_773_594_776_160_8),
            (1.0, 0.219_383_934_395_520_27),
            (2.0, 0.048_900_510_708_061_12),
            (5.0, 0.001_148_295_591_275_325_7),
            (10.0, 4.156_968_929_685_324e-6),
        ];
        for (x, want) in cases {
            let got = e1(x);
            assert!(
                ((got - want) / want).abs() < 1e-12,
                "E1({x}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn branches_meet_at_one() {
        let below = 1.0 - 1e-12;
        let above = 1.0 + 1e-12;
        let gap = (e1(below) - e1(above)).abs() / e1(1.0);
        assert!(gap < 1e-10);
        assert!(
            ((e1_series(1.0) - (-1.0f64).exp() * continued_fraction(1.0)) / e1(1.0)).abs() < 1e-12
        );
    }

    #[test]
    fn scaled_form_for_large_arguments() {
        // e^x E1(x) ~ 1/x (1 - 1/x + 2/x^2 - ...)
        let x = 1e6;
        let asym = (1.0 - 1.0 / x + 2.0 / (x * x)) / x;
        assert!(((scaled_e1(x) - asym) / asym).abs() < 1e-12);
        assert!(e1(0.0).is_nan());
        assert!(scaled_e1(-1.0).is_nan());
    }
}
