//! Exact paths for polynomial `f`: the Khovanskii-Pukhlikov identity and
//! Ehrhart interpolation.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integration::exact_ptilde;
use crate::poly::{rat, MultiPoly, Rational};
use crate::polytope::Polytope;
use crate::summation::{combine_exact, exact_sums_by_tight};
use crate::todd::{operator_product, OperatorKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpRow {
    pub n: i64,
    pub lattice_sum: String,
    pub operator_value: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpReport {
    pub polytope: String,
    pub symbol: String,
    pub kind: OperatorKind,
    /// Truncation order of the operator (the full `h`-degree of `p̃`).
    pub k: usize,
    pub n_max: i64,
    /// `Todd^{[k]}(∂/∂h) p̃(t, h, f)|_{h=0}` as a polynomial in `t`.
    pub operator_polynomial: String,
    pub rows: Vec<KpRow>,
    pub pass: bool,
}

/// Exact `Todd(∂/∂h) p̃(t, h, f)|_{h=0}` for a regular polytope.
///
/// The truncation order is the total degree of `p̃` in `(t, h)`, i.e.
/// `n + deg f`; every higher `h`-derivative vanishes identically.
pub fn operator_polynomial(p: &Polytope, f: &MultiPoly, kind: OperatorKind) -> Result<(MultiPoly, usize)> {
    if !p.is_regular() {
        return Err(Error::NotRegular);
    }
    let ptilde = exact_ptilde(p, f)?;
    let k = ptilde.total_degree().unwrap_or(0) as usize;
    let op = operator_product(p.num_facets(), k, kind);
    Ok((op.apply_to_poly(&ptilde)?, k))
}

pub fn kp_verify(p: &Polytope, f: &MultiPoly, n_max: i64, kind: OperatorKind) -> Result<KpReport> {
    if n_max < 1 {
        return Err(Error::InvalidArgument(format!("Nmax must be >= 1, got {n_max}")));
    }
    let (poly, k) = operator_polynomial(p, f, kind)?;
    let mut rows = Vec::new();
    for n in 1..=n_max {
        let lattice = combine_exact(&exact_sums_by_tight(p, n, f)?, kind);
        let value = poly.evaluate_rational(&[rat(n)])?;
        rows.push(KpRow {
            n,
            pass: lattice == value,
            lattice_sum: lattice.to_string(),
            operator_value: value.to_string(),
        });
    }
    Ok(KpReport {
        polytope: p.describe(),
        symbol: f.to_string(),
        kind,
        k,
        n_max,
        operator_polynomial: poly.to_string(),
        pass: rows.iter().all(|r| r.pass),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EhrhartFit {
    pub polytope: String,
    pub symbol: String,
    pub kind: OperatorKind,
    pub degree: usize,
    /// Polynomial in `N`, e.g. `4N^2 + 4N + 1`.
    pub polynomial: String,
    /// Ascending coefficients as exact rationals.
    pub coefficients: Vec<String>,
    pub interpolation_points: Vec<i64>,
    pub verification_points: Vec<i64>,
    #[serde(skip)]
    pub exact: Option<MultiPoly>,
}

/// Lagrange interpolation through `(x_i, y_i)`, ascending coefficients.
fn interpolate(xs: &[Rational], ys: &[Rational]) -> Vec<Rational> {
    let n = xs.len();
    let mut out = vec![Rational::zero(); n];
    for i in 0..n {
        // basis polynomial ∏_{j≠i} (x - x_j) / (x_i - x_j)
        let mut basis = vec![rat(1)];
        let mut denom = rat(1);
        for j in 0..n {
            if j == i {
                continue;
            }
            let mut next = vec![Rational::zero(); basis.len() + 1];
            for (d, c) in basis.iter().enumerate() {
                next[d + 1] += c;
                next[d] -= c * &xs[j];
            }
            basis = next;
            denom *= &xs[i] - &xs[j];
        }
        let scale = &ys[i] / denom;
        for (o, b) in out.iter_mut().zip(&basis) {
            *o += b * &scale;
        }
    }
    out
}

pub fn ehrhart_fit(p: &Polytope, f: &MultiPoly, kind: OperatorKind) -> Result<EhrhartFit> {
    let deg = f.total_degree().unwrap_or(0) as usize;
    let degree = p.dim() + deg;
    let interp: Vec<i64> = (1..=degree as i64 + 1).collect();
    let verify: Vec<i64> = (degree as i64 + 2..=degree as i64 + 6).collect();
    let value = |n: i64| -> Result<Rational> { Ok(combine_exact(&exact_sums_by_tight(p, n, f)?, kind)) };
    let xs: Vec<Rational> = interp.iter().map(|&n| rat(n)).collect();
    let ys: Vec<Rational> = interp.iter().map(|&n| value(n)).collect::<Result<_>>()?;
    let coeffs = interpolate(&xs, &ys);
    let poly = MultiPoly::from_univariate("N", &coeffs);
    for &n in &verify {
        if poly.evaluate_rational(&[rat(n)])? != value(n)? {
            return Err(Error::FitMismatch { n: n as u64 });
        }
    }
    Ok(EhrhartFit {
        polytope: p.describe(),
        symbol: f.to_string(),
        kind,
        degree,
        polynomial: poly.to_string(),
        coefficients: coeffs.iter().map(|c| c.to_string()).collect(),
        interpolation_points: interp,
        verification_points: verify,
        exact: Some(poly),
    })
}

/// `R^k(N)` exactly for polynomial `f`: `p_w(N) − Σ_{|γ|<=k} b_γ ∂^γ p̃(N, 0)`.
pub fn remainder_exact(p: &Polytope, f: &MultiPoly, scale: i64, k: usize, kind: OperatorKind) -> Result<Rational> {
    if !p.is_regular() {
        return Err(Error::NotRegular);
    }
    let ptilde = exact_ptilde(p, f)?;
    let op = operator_product(p.num_facets(), k, kind);
    let poly = op.apply_to_poly(&ptilde)?;
    let lattice = combine_exact(&exact_sums_by_tight(p, scale, f)?, kind);
    Ok(lattice - poly.evaluate_rational(&[rat(scale)])?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::catalog;
    use crate::symbols::parse_polynomial;

    #[test]
    fn kp_examples() {
        let iv = catalog::interval();
        let x2 = parse_polynomial("x1^2", Some(1)).unwrap();
        let r = kp_verify(&iv, &x2, 5, OperatorKind::Unweighted).unwrap();
        assert!(r.pass);
        assert_eq!(r.rows[4].lattice_sum, "110");
        let h = kp_verify(&iv, &x2, 5, OperatorKind::Half).unwrap();
        assert!(h.pass);
        assert_eq!(h.rows[4].lattice_sum, "85");
        let sq = catalog::square();
        let one = parse_polynomial("1", Some(2)).unwrap();
        let r = kp_verify(&sq, &one, 3, OperatorKind::Unweighted).unwrap();
        assert!(r.pass);
        assert_eq!(r.rows[2].lattice_sum, "49");
        assert_eq!(
            kp_verify(&catalog::skew_triangle(), &one, 3, OperatorKind::Unweighted).unwrap_err(),
            Error::NotRegular
        );
    }

    #[test]
    fn kp_needs_mixed_terms_on_square() {
        // truncating at deg f + 1 = 1 drops b_(1,0,1,0) ∂h1∂h3 p̃, which is nonzero
        let sq = catalog::square();
        let one = parse_polynomial("1", Some(2)).unwrap();
        let short = remainder_exact(&sq, &one, 3, 1, OperatorKind::Unweighted).unwrap();
        assert_ne!(short, rat(0));
        assert_eq!(remainder_exact(&sq, &one, 3, 2, OperatorKind::Unweighted).unwrap(), rat(0));
    }

    #[test]
    fn fit_examples() {
        let sq = catalog::square();
        let one = parse_polynomial("1", Some(2)).unwrap();
        assert_eq!(ehrhart_fit(&sq, &one, OperatorKind::Unweighted).unwrap().polynomial, "4N^2 + 4N + 1");
        assert_eq!(ehrhart_fit(&sq, &one, OperatorKind::Half).unwrap().polynomial, "4N^2");
        let x2 = parse_polynomial("x1^2", Some(1)).unwrap();
        let fit = ehrhart_fit(&catalog::interval(), &x2, OperatorKind::Unweighted).unwrap();
        assert_eq!(fit.polynomial, "(2/3)N^3 + N^2 + (1/3)N");
        assert_eq!(fit.verification_points, vec![5, 6, 7, 8, 9]);
    }

    #[test]
    fn leading_coefficient_is_integral_of_top_part() {
        let tri = catalog::triangle();
        let f = parse_polynomial("x1^2*x2 + 5*x1", Some(2)).unwrap();
        let fit = ehrhart_fit(&tri, &f, OperatorKind::Unweighted).unwrap();
        let top = f.homogeneous_part(3);
        let integral = exact_ptilde(&tri, &top).unwrap();
        let lead = integral.evaluate_rational(&[rat(1), rat(0), rat(0), rat(0)]).unwrap();
        assert_eq!(fit.coefficients.last().unwrap(), &lead.to_string());
    }
}
