//! Special functions and classical tests.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const EPS: f64 = 1e-15;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 10_000;

/// Natural log of the gamma function (Lanczos, g = 7, n = 9), x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
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
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEF[0];
    let t = x + G + 0.5;
    for (i, c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta I_x(a, b).
pub fn regularized_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!("regularized_beta({x}, {a}, {b})")));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(x);
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    Ok(if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    })
}

fn gamma_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut sum = 1.0 / a;
    let mut del = sum;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_cf(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Regularized lower incomplete gamma P(a, x).
pub fn regularized_gamma_p(a: f64, x: f64) -> Result<f64> {
    Ok(1.0 - regularized_gamma_q(a, x)?)
}

/// Regularized upper incomplete gamma Q(a, x).
pub fn regularized_gamma_q(a: f64, x: f64) -> Result<f64> {
    if !(a > 0.0) || !(x >= 0.0) {
        return Err(Error::Domain(format!("regularized_gamma_q({a}, {x})")));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(if x < a + 1.0 {
        1.0 - gamma_series(a, x)
    } else {
        gamma_cf(a, x)
    })
}

/// Two-sided p value of Student's t.
pub fn t_two_sided_p(t: f64, df: f64) -> Result<f64> {
    if !(df > 0.0) || t.is_nan() {
        return Err(Error::Domain(format!("t p-value with t = {t}, df = {df}")));
    }
    if t.is_infinite() {
        return Ok(0.0);
    }
    regularized_beta(df / (df + t * t), df / 2.0, 0.5)
}

/// Upper-tail probability of a chi-square variate.
pub fn chi_square_sf(x: f64, df: f64) -> Result<f64> {
    if !(df > 0.0) || !(x >= 0.0) {
        return Err(Error::Domain(format!(
            "chi-square p-value with x = {x}, df = {df}"
        )));
    }
    regularized_gamma_q(df / 2.0, x / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TTestKind {
    #[default]
    Pooled,
    Welch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: f64,
    pub p: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v)
}

pub fn t_test_two_sided(a: &[f64], b: &[f64], kind: TTestKind) -> Result<TTestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::InvalidInput(
            "each t-test sample needs at least two values".into(),
        ));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("t-test samples must be finite".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (se2, df) = match kind {
        TTestKind::Pooled => {
            let df = na + nb - 2.0;
            let sp = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
            (sp * (1.0 / na + 1.0 / nb), df)
        }
        TTestKind::Welch => {
            let (qa, qb) = (va / na, vb / nb);
            let se2 = qa + qb;
            let denom = qa * qa / (na - 1.0) + qb * qb / (nb - 1.0);
            let df = if denom > 0.0 {
                se2 * se2 / denom
            } else {
                na + nb - 2.0
            };
            (se2, df)
        }
    };
    let diff = ma - mb;
    if se2 == 0.0 {
        return Ok(if diff == 0.0 {
            TTestResult { t: 0.0, df, p: 1.0 }
        } else {
            TTestResult {
                t: f64::INFINITY.copysign(diff),
                df,
                p: 0.0,
            }
        });
    }
    let t = diff / se2.sqrt();
    Ok(TTestResult {
        t,
        df,
        p: t_two_sided_p(t, df)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareResult {
    pub chi2: f64,
    pub df: usize,
    pub p: f64,
}

/// Pearson test of independence on an r × c contingency table.
pub fn chi_square_independence(table: &[Vec<u64>]) -> Result<ChiSquareResult> {
    let rows = table.len();
    let cols = table.first().map_or(0, Vec::len);
    if rows < 2 || cols < 2 {
        return Err(Error::InvalidInput(
            "contingency table must be at least 2 x 2".into(),
        ));
    }
    if table.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidInput(
            "contingency table rows differ in length".into(),
        ));
    }
    let row_tot: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let col_tot: Vec<f64> = (0..cols)
        .map(|j| table.iter().map(|r| r[j]).sum::<u64>() as f64)
        .collect();
    if let Some(i) = row_tot.iter().position(|&t| t == 0.0) {
        return Err(Error::InvalidInput(format!("row {i} has a zero marginal")));
    }
    if let Some(j) = col_tot.iter().position(|&t| t == 0.0) {
        return Err(Error::InvalidInput(format!(
            "column {j} has a zero marginal"
        )));
    }
    let n: f64 = row_tot.iter().sum();
    let mut chi2 = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &obs) in row.iter().enumerate() {
            let e = row_tot[i] * col_tot[j] / n;
            chi2 += (obs as f64 - e).powi(2) / e;
        }
    }
    let df = (rows - 1) * (cols - 1);
    Ok(ChiSquareResult {
        chi2,
        df,
        p: chi_square_sf(chi2, df as f64)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};
    use statrs::function::{beta, gamma};

    #[test]
    fn ln_gamma_against_factorials() {
        let mut fact = 1.0f64;
        for n in 1..30 {
            assert_relative_eq!(
                ln_gamma(n as f64),
                fact.ln(),
                epsilon = 1e-10,
                max_relative = 1e-12
            );
            fact *= n as f64;
        }
        assert_relative_eq!(
            ln_gamma(0.5),
            std::f64::consts::PI.sqrt().ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn special_functions_match_statrs() {
        for &(x, a, b) in &[
            (0.3, 2.0, 3.0),
            (0.9, 0.5, 5.0),
            (0.01, 4.0, 0.5),
            (0.5, 50.0, 60.0),
        ] {
            assert_relative_eq!(
                regularized_beta(x, a, b).unwrap(),
                beta::beta_reg(a, b, x),
                epsilon = 1e-10
            );
        }
        for &(a, x) in &[
            (0.5, 0.1),
            (1.5, 2.825),
            (3.0, 10.0),
            (10.0, 3.0),
            (25.0, 30.0),
        ] {
            assert_relative_eq!(
                regularized_gamma_p(a, x).unwrap(),
                gamma::gamma_lr(a, x),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn table_critical_points() {
        assert!((t_two_sided_p(2.228, 10.0).unwrap() - 0.05).abs() < 1e-3);
        assert!((t_two_sided_p(1.96, 1e6).unwrap() - 0.05).abs() < 1e-3);
        assert!((chi_square_sf(5.65, 3.0).unwrap() - 0.13).abs() < 0.005);
        assert!((chi_square_sf(3.841, 1.0).unwrap() - 0.05).abs() < 1e-3);
        assert_eq!(t_two_sided_p(0.0, 5.0).unwrap(), 1.0);
    }

    #[test]
    fn distribution_tails_match_statrs() {
        for df in [1.0, 3.0, 10.0, 47.5] {
            let d = StudentsT::new(0.0, 1.0, df).unwrap();
            for t in [0.1, 1.0, 2.5, 6.0] {
                assert_relative_eq!(
                    t_two_sided_p(t, df).unwrap(),
                    2.0 * (1.0 - d.cdf(t)),
                    epsilon = 1e-9
                );
            }
            let c = ChiSquared::new(df).unwrap();
            for x in [0.2, 2.0, 9.0, 40.0] {
                assert_relative_eq!(
                    chi_square_sf(x, df).unwrap(),
                    1.0 - c.cdf(x),
                    epsilon = 1e-9
                );
            }
        }
    }

    #[test]
    fn t_test_examples() {
        let r = t_test_two_sided(
            &[1., 2., 3., 4., 5.],
            &[2., 3., 4., 5., 6.],
            TTestKind::Pooled,
        )
        .unwrap();
        assert_relative_eq!(r.t, -1.0, epsilon = 1e-12);
        assert_eq!(r.df, 8.0);
        let same = t_test_two_sided(&[1., 2., 3.], &[1., 2., 3.], TTestKind::Pooled).unwrap();
        assert_eq!((same.t, same.p), (0.0, 1.0));
        let flat = t_test_two_sided(&[4., 4.], &[4., 4., 4.], TTestKind::Welch).unwrap();
        assert_eq!((flat.t, flat.p), (0.0, 1.0));
        let apart = t_test_two_sided(&[4., 4.], &[5., 5.], TTestKind::Pooled).unwrap();
        assert_eq!(apart.p, 0.0);
        assert!(t_test_two_sided(&[1.0], &[1.0, 2.0], TTestKind::Pooled).is_err());
    }

    #[test]
    fn welch_degrees_of_freedom() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [2.0, 4.0, 6.0, 8.0, 10.0, 12.0];
        let r = t_test_two_sided(&a, &b, TTestKind::Welch).unwrap();
        let (va, vb) = (mean_var(&a).1 / 4.0, mean_var(&b).1 / 6.0);
        let df = (va + vb).powi(2) / (va * va / 3.0 + vb * vb / 5.0);
        assert_relative_eq!(r.df, df, epsilon = 1e-12);
        assert_relative_eq!(r.t, (2.5 - 7.0) / (va + vb).sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn chi_square_examples() {
        let r = chi_square_independence(&[vec![10, 20], vec![20, 10]]).unwrap();
        assert_relative_eq!(r.chi2, 20.0 / 3.0, epsilon = 1e-12);
        assert_eq!(r.df, 1);
        let prop = chi_square_independence(&[vec![1, 2, 3], vec![2, 4, 6]]).unwrap();
        assert_relative_eq!(prop.chi2, 0.0, epsilon = 1e-12);
        assert_relative_eq!(prop.p, 1.0, epsilon = 1e-12);
        assert!(chi_square_independence(&[vec![0, 0], vec![1, 2]]).is_err());
        assert!(chi_square_independence(&[vec![0, 3], vec![0, 2]]).is_err());
        assert!(chi_square_independence(&[vec![1, 3], vec![2]]).is_err());
    }
}
