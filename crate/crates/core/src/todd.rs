//! Truncated Todd-type series and the constant-coefficient differential
//! operators they define in the facet-shift variables `h`.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{factorial, ratio, MultiPoly, Rational};

/// Which lattice-point weighting the operator reproduces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    /// Every lattice point has weight 1; series `x / (1 - e^{-x})`.
    Unweighted,
    /// Codimension-k boundary points weigh `2^{-k}`; series `(x/2) coth(x/2)`.
    Half,
}

impl OperatorKind {
    pub fn name(self) -> &'static str {
        match self {
            OperatorKind::Unweighted => "unweighted",
            OperatorKind::Half => "half",
        }
    }

    pub fn both() -> [OperatorKind; 2] {
        [OperatorKind::Unweighted, OperatorKind::Half]
    }
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for OperatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unweighted" => Ok(OperatorKind::Unweighted),
            "half" => Ok(OperatorKind::Half),
            other => Err(Error::InvalidArgument(format!(
                "unknown kind `{other}` (expected unweighted or half)"
            ))),
        }
    }
}

/// Taylor coefficients of `(1 - e^{-x}) / x` through order `k`.
fn expm1_quotient(k: usize) -> Vec<Rational> {
    (0..=k)
        .map(|j| {
            let sign = if j % 2 == 0 { 1 } else { -1 };
            BigRational::new(sign.into(), factorial(j as u32 + 1))
        })
        .collect()
}

/// Inverts a power series with unit constant term, truncated at its length.
fn invert_unit_series(a: &[Rational]) -> Vec<Rational> {
    debug_assert!(a[0].is_one());
    let mut c: Vec<Rational> = Vec::with_capacity(a.len());
    c.push(Rational::one());
    for n in 1..a.len() {
        let mut acc = Rational::zero();
        for j in 1..=n {
            acc += &a[j] * &c[n - j];
        }
        c.push(-acc);
    }
    c
}

/// One-variable series coefficients `td_0 .. td_k`.
pub fn todd1d(k: usize, kind: OperatorKind) -> Vec<Rational> {
    let mut td = invert_unit_series(&expm1_quotient(k));
    if kind == OperatorKind::Half && k >= 1 {
        // (x/2) coth(x/2) = x / (1 - e^{-x}) - x/2
        td[1] -= ratio(1, 2);
    }
    td
}

/// Coefficients `b_γ` of the truncated product operator `∏_i td(∂/∂h_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorCoeffs {
    m: usize,
    k: usize,
    kind: OperatorKind,
    coeffs: BTreeMap<Vec<u32>, Rational>,
}

/// All multi-indices of length `m` with total degree at most `k`, in
/// graded-lexicographic order.
pub fn multi_indices(m: usize, k: usize) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    for total in 0..=k as u32 {
        let mut cur = vec![0u32; m];
        fill_indices(&mut cur, 0, total, &mut out);
    }
    out
}

fn fill_indices(cur: &mut Vec<u32>, pos: usize, remaining: u32, out: &mut Vec<Vec<u32>>) {
    if pos + 1 == cur.len() {
        cur[pos] = remaining;
        out.push(cur.clone());
        return;
    }
    if cur.is_empty() {
        if remaining == 0 {
            out.push(Vec::new());
        }
        return;
    }
    for v in (0..=remaining).rev() {
        cur[pos] = v;
        fill_indices(cur, pos + 1, remaining - v, out);
    }
    cur[pos] = 0;
}

pub fn operator_product(m: usize, k: usize, kind: OperatorKind) -> OperatorCoeffs {
    let td = todd1d(k, kind);
    let mut coeffs = BTreeMap::new();
    for gamma in multi_indices(m, k) {
        let b = gamma
            .iter()
            .fold(Rational::one(), |acc, &g| acc * &td[g as usize]);
        if !b.is_zero() {
            coeffs.insert(gamma, b);
        }
    }
    OperatorCoeffs { m, k, kind, coeffs }
}

impl OperatorCoeffs {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn coeff(&self, gamma: &[u32]) -> Rational {
        self.coeffs.get(gamma).cloned().unwrap_or_else(Rational::zero)
    }

    /// Nonzero coefficients in key order.
    pub fn iter(&self) -> impl Iterator<Item = (&Vec<u32>, &Rational)> {
        self.coeffs.iter()
    }

    /// Applies the operator to a polynomial in `(t, h_1..h_m)` and sets `h = 0`,
    /// returning a polynomial in `t`.
    pub fn apply_to_poly(&self, p: &MultiPoly) -> Result<MultiPoly> {
        if p.nvars() != self.m + 1 {
            return Err(Error::VariableMismatch(format!(
                "operator has {} h-variables but polynomial has {} variables",
                self.m,
                p.nvars()
            )));
        }
        let tvar = vec![p.vars()[0].clone()];
        let mut out = MultiPoly::zero(&tvar);
        for (e, c) in p.terms() {
            let gamma = &e[1..];
            let b = match self.coeffs.get(gamma) {
                Some(b) => b,
                None => continue,
            };
            let gfact = gamma
                .iter()
                .fold(num_bigint::BigInt::one(), |acc, &g| acc * factorial(g));
            out.add_term(vec![e[0]], c * b * Rational::from_integer(gfact));
        }
        Ok(out)
    }

    /// `γ → b_γ` table, one line per nonzero coefficient.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        for (g, b) in &self.coeffs {
            let idx: Vec<String> = g.iter().map(|v| v.to_string()).collect();
            s.push_str(&format!("({}) -> {}\n", idx.join(","), b));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::rat;

    fn series_mul(a: &[Rational], b: &[Rational]) -> Vec<Rational> {
        let n = a.len().min(b.len());
        (0..n)
            .map(|i| (0..=i).fold(Rational::zero(), |acc, j| acc + &a[j] * &b[i - j]))
            .collect()
    }

    #[test]
    fn unweighted_coefficients() {
        let td = todd1d(4, OperatorKind::Unweighted);
        assert_eq!(td, vec![rat(1), ratio(1, 2), ratio(1, 12), rat(0), ratio(-1, 720)]);
    }

    #[test]
    fn half_coefficients() {
        let td = todd1d(4, OperatorKind::Half);
        assert_eq!(td, vec![rat(1), rat(0), ratio(1, 12), rat(0), ratio(-1, 720)]);
        assert_eq!(todd1d(0, OperatorKind::Half), vec![rat(1)]);
    }

    #[test]
    fn series_identities_hold_through_order() {
        let k = 14;
        let q = expm1_quotient(k);
        let prod = series_mul(&todd1d(k, OperatorKind::Unweighted), &q);
        assert!(prod[0].is_one());
        assert!(prod[1..].iter().all(|c| c.is_zero()));

        // tanh(x/2)/(x/2) built independently from sinh and cosh series
        let sinh_half: Vec<Rational> = (0..=k + 1)
            .map(|j| {
                if j % 2 == 1 {
                    BigRational::new(1.into(), factorial(j as u32) * num_bigint::BigInt::from(2).pow(j as u32))
                } else {
                    Rational::zero()
                }
            })
            .collect();
        let cosh_half: Vec<Rational> = (0..=k)
            .map(|j| {
                if j % 2 == 0 {
                    BigRational::new(1.into(), factorial(j as u32) * num_bigint::BigInt::from(2).pow(j as u32))
                } else {
                    Rational::zero()
                }
            })
            .collect();
        // sinh(x/2) / (x/2) then divide by cosh
        let shifted: Vec<Rational> = (0..=k).map(|j| &sinh_half[j + 1] * rat(2)).collect();
        let tanh_q = series_mul(&shifted, &invert_unit_series(&cosh_half));
        let prod = series_mul(&todd1d(k, OperatorKind::Half), &tanh_q);
        assert!(prod[0].is_one());
        assert!(prod[1..].iter().all(|c| c.is_zero()));
    }

    #[test]
    fn kinds_differ_only_at_order_one() {
        let u = todd1d(12, OperatorKind::Unweighted);
        let h = todd1d(12, OperatorKind::Half);
        for i in 0..=12 {
            let diff = &u[i] - &h[i];
            if i == 1 {
                assert_eq!(diff, ratio(1, 2));
            } else {
                assert!(diff.is_zero(), "order {i}");
            }
        }
    }

    #[test]
    fn product_coefficients() {
        let op = operator_product(2, 2, OperatorKind::Unweighted);
        assert_eq!(op.coeff(&[0, 0]), rat(1));
        assert_eq!(op.coeff(&[1, 0]), ratio(1, 2));
        assert_eq!(op.coeff(&[0, 1]), ratio(1, 2));
        assert_eq!(op.coeff(&[1, 1]), ratio(1, 4));
        assert_eq!(op.coeff(&[2, 0]), ratio(1, 12));
        for m in 1..5 {
            assert_eq!(operator_product(m, 3, OperatorKind::Half).coeff(&vec![0; m]), rat(1));
        }
    }

    #[test]
    fn multi_index_enumeration() {
        let idx = multi_indices(3, 2);
        assert_eq!(idx.len(), 10);
        assert_eq!(idx[0], vec![0, 0, 0]);
        assert!(idx.windows(2).all(|w| w[0].iter().sum::<u32>() <= w[1].iter().sum::<u32>()));
    }

    fn interval_poly(kind: &str) -> MultiPoly {
        let v = vec!["t".to_string(), "h1".into(), "h2".into()];
        let t = MultiPoly::var(&v, 0);
        let h1 = MultiPoly::var(&v, 1);
        let h2 = MultiPoly::var(&v, 2);
        match kind {
            "count" => t.scale(&rat(2)).add(&h1).unwrap().add(&h2).unwrap(),
            _ => t
                .add(&h1)
                .unwrap()
                .pow(3)
                .add(&t.add(&h2).unwrap().pow(3))
                .unwrap()
                .scale(&ratio(1, 3)),
        }
    }

    #[test]
    fn apply_counts_interval() {
        let op = operator_product(2, 3, OperatorKind::Unweighted);
        let out = op.apply_to_poly(&interval_poly("count")).unwrap();
        assert_eq!(out.to_string(), "2t + 1");
    }

    #[test]
    fn apply_sum_of_squares() {
        let p = interval_poly("squares");
        let op = operator_product(2, 3, OperatorKind::Unweighted);
        let out = op.apply_to_poly(&p).unwrap();
        let expect = MultiPoly::from_univariate("t", &[rat(0), ratio(1, 3), rat(1), ratio(2, 3)]);
        assert_eq!(out, expect);
        let half = operator_product(2, 3, OperatorKind::Half).apply_to_poly(&p).unwrap();
        let expect = MultiPoly::from_univariate("t", &[rat(0), ratio(1, 3), rat(0), ratio(2, 3)]);
        assert_eq!(half, expect);
    }

    #[test]
    fn apply_rejects_wrong_arity() {
        let op = operator_product(3, 2, OperatorKind::Half);
        assert!(op.apply_to_poly(&interval_poly("count")).is_err());
    }

    #[test]
    fn table_lists_nonzero_entries() {
        let t = operator_product(1, 3, OperatorKind::Half).to_table();
        assert_eq!(t, "(0) -> 1\n(2) -> 1/12\n");
    }
}
