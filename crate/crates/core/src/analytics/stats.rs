//! Log-space combinatorics and the small statistical toolbox the
//! analytics and test suites share: log-gamma, binomial coefficients,
//! regularized incomplete gamma, and chi-square helpers.

/// Lanczos approximation (g = 7, 9 coefficients), accurate to ~1e-13 in
/// relative terms for positive arguments.
pub fn ln_gamma(z: f64) -> f64 {
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.5203681218851,
        -1259.1392167224028,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507343278686905,
        -0.13857109526572012,
        9.984_369_578_019_572e-6,
        1.5056327351493116e-7,
    ];
    if z < 0.5 {
        // Reflection for the left half plane.
        return std::f64::consts::PI.ln() - (std::f64::consts::PI * z).sin().abs().ln()
            - ln_gamma(1.0 - z);
    }
    let z = z - 1.0;
    let mut x = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        x += c / (z + i as f64);
    }
    let t = z + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + x.ln()
}

/// log of n! via log-gamma.
pub fn ln_factorial(n: u64) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

/// log of C(n, k); negative infinity outside 0 <= k <= n (the C(a,b) = 0
/// convention).
pub fn ln_choose(n: u64, k: i64) -> f64 {
    if k < 0 || k as u64 > n {
        return f64::NEG_INFINITY;
    }
    let k = k as u64;
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// Hypergeometric pmf: probability of `hits` marked draws when sampling
/// `draws` without replacement from a population of `total` containing
/// `marked` marked items.
pub fn hypergeometric_pmf(total: u64, marked: u64, draws: u64, hits: u64) -> f64 {
    if hits > draws || hits > marked || draws - hits > total - marked {
        return 0.0;
    }
    (ln_choose(marked, hits as i64) + ln_choose(total - marked, (draws - hits) as i64)
        - ln_choose(total, draws as i64))
        .exp()
}

/// Upper binomial tail P(X >= r_min) for X ~ Binomial(n, p), summed in
/// log space with compensated accumulation.
pub fn binomial_tail(n: u64, p: f64, r_min: i64) -> f64 {
    if r_min <= 0 {
        return 1.0;
    }
    let r_min = r_min as u64;
    if r_min > n {
        return 0.0;
    }
    if p <= 0.0 {
        return 0.0; // all mass at 0 < r_min
    }
    if p >= 1.0 {
        return 1.0; // all mass at n >= r_min
    }
    let ln_p = p.ln();
    let ln_q = (-p).ln_1p();
    let ln_n_fact = ln_factorial(n);
    let mut sum = 0.0f64;
    let mut comp = 0.0f64; // Kahan compensation
    for r in r_min..=n {
        let ln_term =
            ln_n_fact - ln_factorial(r) - ln_factorial(n - r) + r as f64 * ln_p + (n - r) as f64 * ln_q;
        let term = ln_term.exp();
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum.clamp(0.0, 1.0)
}

/// Regularized lower incomplete gamma P(a, x).
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x < 0.0 || a <= 0.0 {
        return f64::NAN;
    }
    if x == 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - gamma_q_cf(a, x)
    }
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x < 0.0 || a <= 0.0 {
        return f64::NAN;
    }
    if x == 0.0 {
        return 1.0;
    }
    if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_cf(a, x)
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..500 {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * 1e-15 {
            break;
        }
    }
    (sum * (-x + a * x.ln() - ln_gamma(a)).exp()).clamp(0.0, 1.0)
}

fn gamma_q_cf(a: f64, x: f64) -> f64 {
    const FPMIN: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = b + an / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-15 {
            break;
        }
    }
    (h * (-x + a * x.ln() - ln_gamma(a)).exp()).clamp(0.0, 1.0)
}

/// Survival probability of a chi-square statistic with `df` degrees of
/// freedom (the p-value of a goodness-of-fit test).
pub fn chi_square_pvalue(stat: f64, df: f64) -> f64 {
    if stat <= 0.0 {
        return 1.0;
    }
    gamma_q(df / 2.0, stat / 2.0)
}

/// Two-sample chi-square test over two histograms of the same discrete
/// variable. Sparse cells are pooled (left to right) until each pooled
/// cell holds at least `min_cell` observations combined. Returns
/// (statistic, degrees of freedom, p-value).
pub fn two_sample_chi_square(x: &[u64], y: &[u64], min_cell: u64) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len(), "histograms must share binning");
    let n_x: u64 = x.iter().sum();
    let n_y: u64 = y.iter().sum();
    assert!(n_x > 0 && n_y > 0, "both samples must be non-empty");

    // Pool adjacent bins until each cell is big enough.
    let mut cells: Vec<(u64, u64)> = Vec::new();
    let mut acc = (0u64, 0u64);
    for i in 0..x.len() {
        acc.0 += x[i];
        acc.1 += y[i];
        if acc.0 + acc.1 >= min_cell {
            cells.push(acc);
            acc = (0, 0);
        }
    }
    if acc.0 + acc.1 > 0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => cells.push(acc),
        }
    }

    if cells.len() < 2 {
        return (0.0, 0.0, 1.0);
    }
    let total = (n_x + n_y) as f64;
    let mut stat = 0.0;
    for &(cx, cy) in &cells {
        let col = (cx + cy) as f64;
        let e_x = n_x as f64 * col / total;
        let e_y = n_y as f64 * col / total;
        stat += (cx as f64 - e_x).powi(2) / e_x + (cy as f64 - e_y).powi(2) / e_y;
    }
    let df = (cells.len() - 1) as f64;
    (stat, df, chi_square_pvalue(stat, df))
}
