//! Contrast coding and ordinary least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::stats::t_two_sided_p;
use crate::error::{Error, Result};

/// A two-level factor observed once per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factor {
    pub name: String,
    pub levels: Vec<String>,
    /// Level coded +0.5; the other level is coded -0.5.
    pub positive: String,
}

impl Factor {
    pub fn new(name: impl Into<String>, levels: Vec<String>, positive: impl Into<String>) -> Self {
        Factor {
            name: name.into(),
            levels,
            positive: positive.into(),
        }
    }

    fn coded(&self) -> Result<Vec<f64>> {
        let mut distinct: Vec<&str> = self.levels.iter().map(String::as_str).collect();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() != 2 {
            return Err(Error::InvalidInput(format!(
                "factor `{}` must have exactly two levels, found {}",
                self.name,
                distinct.len()
            )));
        }
        if !distinct.contains(&self.positive.as_str()) {
            return Err(Error::InvalidInput(format!(
                "factor `{}` has no level `{}`",
                self.name, self.positive
            )));
        }
        Ok(self
            .levels
            .iter()
            .map(|l| if *l == self.positive { 0.5 } else { -0.5 })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
}

impl Design {
    pub fn new(names: Vec<String>, x: DMatrix<f64>) -> Result<Self> {
        if names.len() != x.ncols() {
            return Err(Error::InvalidInput(format!(
                "{} names for {} design columns",
                names.len(),
                x.ncols()
            )));
        }
        Ok(Design { names, x })
    }
}

/// Intercept, A, B and A×B columns with ±0.5 coding.
pub fn contrast_code(a: &Factor, b: &Factor) -> Result<Design> {
    if a.levels.len() != b.levels.len() {
        return Err(Error::InvalidInput("factors have different lengths".into()));
    }
    let ca = a.coded()?;
    let cb = b.coded()?;
    let n = ca.len();
    let x = DMatrix::from_fn(n, 4, |i, j| match j {
        0 => 1.0,
        1 => ca[i],
        2 => cb[i],
        _ => ca[i] * cb[i],
    });
    Design::new(
        vec![
            "intercept".into(),
            a.name.clone(),
            b.name.clone(),
            format!("{}:{}", a.name, b.name),
        ],
        x,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTerm {
    pub term: String,
    pub beta: f64,
    pub se: f64,
    pub t: f64,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionResult {
    pub terms: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub t_statistics: Vec<f64>,
    pub p_values: Vec<f64>,
    pub residual_df: usize,
    pub residuals: Vec<f64>,
}

impl RegressionResult {
    pub fn rows(&self) -> Vec<RegressionTerm> {
        (0..self.terms.len())
            .map(|i| RegressionTerm {
                term: self.terms[i].clone(),
                beta: self.coefficients[i],
                se: self.standard_errors[i],
                t: self.t_statistics[i],
                p: self.p_values[i],
            })
            .collect()
    }

    pub fn coefficient(&self, term: &str) -> Option<f64> {
        self.terms
            .iter()
            .position(|t| t == term)
            .map(|i| self.coefficients[i])
    }
}

const RANK_TOL: f64 = 1e-10;

pub fn ols_fit(design: &Design, y: &[f64]) -> Result<RegressionResult> {
    let (n, k) = design.x.shape();
    if y.len() != n {
        return Err(Error::InvalidInput(format!(
            "{} outcomes for {n} design rows",
            y.len()
        )));
    }
    if n <= k {
        return Err(Error::InvalidInput(format!(
            "need more rows than columns, got {n} x {k}"
        )));
    }
    if design.x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "regression inputs must be finite".into(),
        ));
    }
    let qr = design.x.clone().qr();
    let r = qr.r();
    let scale = (0..k)
        .map(|j| design.x.column(j).norm())
        .fold(0.0, f64::max)
        .max(1.0);
    for j in 0..k {
        if r[(j, j)].abs() <= RANK_TOL * scale {
            return Err(Error::RankDeficient {
                column: design.names[j].clone(),
            });
        }
    }
    let yv = DVector::from_column_slice(y);
    let qty = qr.q().transpose() * &yv;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::RankDeficient {
            column: design.names[k - 1].clone(),
        })?;
    let fitted = &design.x * &beta;
    let resid = &yv - fitted;
    let df = n - k;
    let sigma2 = resid.norm_squared() / df as f64;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::RankDeficient {
            column: design.names[k - 1].clone(),
        })?;
    let cov_unscaled = &r_inv * r_inv.transpose();

    let mut se = Vec::with_capacity(k);
    let mut ts = Vec::with_capacity(k);
    let mut ps = Vec::with_capacity(k);
    for j in 0..k {
        let s = (sigma2 * cov_unscaled[(j, j)]).sqrt();
        let b = beta[j];
        let (t, p) = if s == 0.0 {
            if b == 0.0 {
                (0.0, 1.0)
            } else {
                (f64::INFINITY.copysign(b), 0.0)
            }
        } else {
            let t = b / s;
            (t, t_two_sided_p(t, df as f64)?)
        };
        se.push(s);
        ts.push(t);
        ps.push(p);
    }
    Ok(RegressionResult {
        terms: design.names.clone(),
        coefficients: beta.iter().copied().collect(),
        standard_errors: se,
        t_statistics: ts,
        p_values: ps,
        residual_df: df,
        residuals: resid.iter().copied().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cells() -> (Factor, Factor) {
        let vis = ["full", "partial", "full", "partial"]
            .map(String::from)
            .to_vec();
        let com = ["chat", "chat", "demo", "demo"].map(String::from).to_vec();
        (
            Factor::new("visibility", vis, "full"),
            Factor::new("communication", com, "chat"),
        )
    }

    #[test]
    fn coding_convention() {
        let (a, b) = cells();
        let d = contrast_code(&a, &b).unwrap();
        assert_eq!(
            d.x.row(0).iter().copied().collect::<Vec<_>>(),
            vec![1.0, 0.5, 0.5, 0.25]
        );
        let gram = d.x.transpose() * &d.x;
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_eq!(gram[(i, j)], 0.0);
                }
            }
        }
        let bad = Factor::new(
            "x",
            vec!["a".into(), "b".into(), "c".into(), "a".into()],
            "a",
        );
        assert!(contrast_code(&bad, &b).is_err());
        let missing = Factor::new("x", a.levels.clone(), "none");
        assert!(contrast_code(&missing, &b).is_err());
    }

    #[test]
    fn interaction_is_difference_of_differences() {
        let (a, b) = cells();
        let mut rows_a = Vec::new();
        let mut rows_b = Vec::new();
        let mut y = Vec::new();
        let means = [130.0, 60.0, 120.0, 100.0];
        for _ in 0..3 {
            rows_a.extend(a.levels.clone());
            rows_b.extend(b.levels.clone());
            y.extend(means);
        }
        let d = contrast_code(
            &Factor::new("visibility", rows_a, "full"),
            &Factor::new("communication", rows_b, "chat"),
        )
        .unwrap();
        let fit = ols_fit(&d, &y).unwrap();
        let [ma, mb, mc, md] = means;
        assert_relative_eq!(fit.coefficients[3], (ma - mb) - (mc - md), epsilon = 1e-9);
        assert_relative_eq!(
            fit.coefficients[0],
            means.iter().sum::<f64>() / 4.0,
            epsilon = 1e-9
        );
        assert!(fit.standard_errors.iter().all(|s| s.abs() < 1e-9));
    }

    #[test]
    fn exact_fit_and_intercept_only() {
        let x = DMatrix::from_row_slice(5, 2, &[1., 0., 1., 1., 1., 2., 1., 3., 1., 4.]);
        let y: Vec<f64> = (0..5).map(|i| 2.0 + 3.0 * i as f64).collect();
        let fit = ols_fit(&Design::new(vec!["c".into(), "x".into()], x).unwrap(), &y).unwrap();
        assert_relative_eq!(fit.coefficients[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(fit.coefficients[1], 3.0, epsilon = 1e-12);
        assert!(fit.residuals.iter().all(|r| r.abs() < 1e-12));

        let ones = DMatrix::from_element(4, 1, 1.0);
        let fit = ols_fit(
            &Design::new(vec!["c".into()], ones).unwrap(),
            &[1.0, 2.0, 3.0, 10.0],
        )
        .unwrap();
        assert_relative_eq!(fit.coefficients[0], 4.0, epsilon = 1e-12);
        assert_eq!(fit.residual_df, 3);
    }

    #[test]
    fn rank_deficiency_names_column() {
        let x = DMatrix::from_row_slice(4, 3, &[1., 1., 2., 1., 2., 4., 1., 3., 6., 1., 4., 8.]);
        let d = Design::new(vec!["c".into(), "x".into(), "twice_x".into()], x).unwrap();
        match ols_fit(&d, &[1., 2., 3., 5.]) {
            Err(Error::RankDeficient { column }) => assert_eq!(column, "twice_x"),
            other => panic!("expected rank deficiency, got {other:?}"),
        }
        let x = DMatrix::from_element(2, 2, 1.0);
        assert!(ols_fit(
            &Design::new(vec!["a".into(), "b".into()], x).unwrap(),
            &[1., 2.]
        )
        .is_err());
    }
}
