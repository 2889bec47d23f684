//! Exact multivariate polynomials over the rationals.
//!
//! Terms are kept in a `BTreeMap` keyed by dense exponent vectors, so
//! iteration order (and therefore every printed or serialized form) is
//! deterministic. Zero coefficients are never stored.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Exact rational from a machine integer.
pub fn rat(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// Exact rational `p / q`.
pub fn ratio(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

pub fn rat_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // numerator or denominator beyond f64 range; scale down both
        let n = r.numer().to_f64().unwrap_or(f64::NAN);
        let d = r.denom().to_f64().unwrap_or(f64::NAN);
        n / d
    })
}

pub fn factorial(n: u32) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
}

#[derive(Clone, PartialEq, Eq)]
pub struct MultiPoly {
    vars: Vec<String>,
    terms: BTreeMap<Vec<u32>, Rational>,
}

impl MultiPoly {
    pub fn zero(vars: &[String]) -> Self {
        MultiPoly {
            vars: vars.to_vec(),
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(vars: &[String], c: Rational) -> Self {
        let mut p = Self::zero(vars);
        p.add_term(vec![0; vars.len()], c);
        p
    }

    pub fn one(vars: &[String]) -> Self {
        Self::constant(vars, Rational::one())
    }

    /// The polynomial consisting of the single variable `index`.
    pub fn var(vars: &[String], index: usize) -> Self {
        let mut exps = vec![0; vars.len()];
        exps[index] = 1;
        let mut p = Self::zero(vars);
        p.add_term(exps, Rational::one());
        p
    }

    pub fn from_terms<I>(vars: &[String], terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Vec<u32>, Rational)>,
    {
        let mut p = Self::zero(vars);
        for (exps, c) in terms {
            if exps.len() != vars.len() {
                return Err(Error::VariableMismatch(format!(
                    "exponent vector of length {} for {} variables",
                    exps.len(),
                    vars.len()
                )));
            }
            p.add_term(exps, c);
        }
        Ok(p)
    }

    /// Labels `prefix1 .. prefixN`.
    pub fn labels(prefix: &str, count: usize) -> Vec<String> {
        (1..=count).map(|i| format!("{prefix}{i}")).collect()
    }

    pub fn vars(&self) -> &[String] {
        &self.vars
    }

    pub fn nvars(&self) -> usize {
        self.vars.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &Rational)> {
        self.terms.iter()
    }

    pub fn coeff(&self, exps: &[u32]) -> Rational {
        self.terms.get(exps).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn add_term(&mut self, exps: Vec<u32>, c: Rational) {
        debug_assert_eq!(exps.len(), self.vars.len());
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(exps) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn total_degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }

    /// Degree in the given subset of variables.
    pub fn degree_in(&self, indices: &[usize]) -> Option<u32> {
        self.terms
            .keys()
            .map(|e| indices.iter().map(|&i| e[i]).sum())
            .max()
    }

    /// The homogeneous component of total degree `d`.
    pub fn homogeneous_part(&self, d: u32) -> Self {
        let mut p = Self::zero(&self.vars);
        for (e, c) in &self.terms {
            if e.iter().sum::<u32>() == d {
                p.terms.insert(e.clone(), c.clone());
            }
        }
        p
    }

    fn check_vars(&self, other: &Self) -> Result<()> {
        if self.vars != other.vars {
            return Err(Error::VariableMismatch(format!(
                "{:?} vs {:?}",
                self.vars, other.vars
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_vars(other)?;
        let mut out = self.clone();
        for (e, c) in &other.terms {
            out.add_term(e.clone(), c.clone());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        self.scale(&-Rational::one())
    }

    pub fn scale(&self, c: &Rational) -> Self {
        let mut out = Self::zero(&self.vars);
        if c.is_zero() {
            return out;
        }
        for (e, v) in &self.terms {
            out.terms.insert(e.clone(), v * c);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_vars(other)?;
        let mut out = Self::zero(&self.vars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        Ok(out)
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::one(&self.vars);
        for _ in 0..k {
            out = out.mul(self).expect("same variables");
        }
        out
    }

    pub fn partial_derivative(&self, var: usize) -> Result<Self> {
        if var >= self.vars.len() {
            return Err(Error::VariableMismatch(format!(
                "variable index {var} out of range for {} variables",
                self.vars.len()
            )));
        }
        let mut out = Self::zero(&self.vars);
        for (e, c) in &self.terms {
            if e[var] == 0 {
                continue;
            }
            let mut d = e.clone();
            d[var] -= 1;
            out.add_term(d, c * Rational::from_integer(BigInt::from(e[var])));
        }
        Ok(out)
    }

    pub fn evaluate_rational(&self, point: &[Rational]) -> Result<Rational> {
        if point.len() != self.vars.len() {
            return Err(Error::VariableMismatch(format!(
                "point of length {} for {} variables",
                point.len(),
                self.vars.len()
            )));
        }
        let mut total = Rational::zero();
        for (e, c) in &self.terms {
            let mut term = c.clone();
            for (x, &k) in point.iter().zip(e) {
                if k > 0 {
                    term *= num_traits::pow(x.clone(), k as usize);
                }
            }
            total += term;
        }
        Ok(total)
    }

    pub fn evaluate_float(&self, point: &[f64]) -> Result<f64> {
        if point.len() != self.vars.len() {
            return Err(Error::VariableMismatch(format!(
                "point of length {} for {} variables",
                point.len(),
                self.vars.len()
            )));
        }
        Ok(self
            .terms
            .iter()
            .map(|(e, c)| {
                rat_to_f64(c)
                    * point
                        .iter()
                        .zip(e)
                        .map(|(x, &k)| x.powi(k as i32))
                        .product::<f64>()
            })
            .sum())
    }

    /// Substitutes variable `i` by `subs[i]`; all substitutions must share a
    /// variable list, which becomes the variable list of the result.
    pub fn compose(&self, subs: &[MultiPoly]) -> Result<Self> {
        if subs.len() != self.vars.len() {
            return Err(Error::VariableMismatch(format!(
                "{} substitutions for {} variables",
                subs.len(),
                self.vars.len()
            )));
        }
        let new_vars = match subs.first() {
            Some(s) => s.vars.clone(),
            None => return Ok(Self::constant(&[], self.coeff(&[]))),
        };
        for s in subs {
            if s.vars != new_vars {
                return Err(Error::VariableMismatch(
                    "substitutions use different variable lists".into(),
                ));
            }
        }
        // cache powers per variable
        let mut powers: Vec<Vec<MultiPoly>> = subs
            .iter()
            .map(|s| vec![Self::one(&s.vars), s.clone()])
            .collect();
        let mut out = Self::zero(&new_vars);
        for (e, c) in &self.terms {
            let mut term = Self::constant(&new_vars, c.clone());
            for (i, &k) in e.iter().enumerate() {
                let k = k as usize;
                while powers[i].len() <= k {
                    let next = powers[i].last().unwrap().mul(&subs[i])?;
                    powers[i].push(next);
                }
                if k > 0 {
                    term = term.mul(&powers[i][k])?;
                }
            }
            out = out.add(&term)?;
        }
        Ok(out)
    }

    /// `compose` restricted to substitutions of total degree at most one.
    pub fn compose_affine(&self, subs: &[MultiPoly]) -> Result<Self> {
        if let Some(bad) = subs.iter().position(|s| s.total_degree().unwrap_or(0) > 1) {
            return Err(Error::VariableMismatch(format!(
                "substitution {bad} is not affine"
            )));
        }
        self.compose(subs)
    }

    /// Re-expresses the polynomial over a larger variable list that contains
    /// every current label.
    pub fn embed(&self, vars: &[String]) -> Result<Self> {
        let map: Vec<usize> = self
            .vars
            .iter()
            .map(|v| {
                vars.iter()
                    .position(|w| w == v)
                    .ok_or_else(|| Error::VariableMismatch(format!("label {v} missing")))
            })
            .collect::<Result<_>>()?;
        let mut out = Self::zero(vars);
        for (e, c) in &self.terms {
            let mut ne = vec![0; vars.len()];
            for (i, &k) in e.iter().enumerate() {
                ne[map[i]] = k;
            }
            out.add_term(ne, c.clone());
        }
        Ok(out)
    }

    /// Univariate coefficient list (ascending powers) of a one-variable polynomial.
    pub fn univariate_coeffs(&self) -> Result<Vec<Rational>> {
        if self.vars.len() != 1 {
            return Err(Error::VariableMismatch(format!(
                "expected one variable, found {}",
                self.vars.len()
            )));
        }
        let deg = self.total_degree().unwrap_or(0) as usize;
        let mut out = vec![Rational::zero(); deg + 1];
        for (e, c) in &self.terms {
            out[e[0] as usize] = c.clone();
        }
        Ok(out)
    }

    pub fn from_univariate(var: &str, coeffs: &[Rational]) -> Self {
        let vars = vec![var.to_string()];
        let mut p = Self::zero(&vars);
        for (i, c) in coeffs.iter().enumerate() {
            p.add_term(vec![i as u32], c.clone());
        }
        p
    }
}

fn fmt_rational(c: &Rational) -> String {
    if c.is_integer() {
        c.numer().to_string()
    } else {
        format!("({}/{})", c.numer(), c.denom())
    }
}

impl fmt::Display for MultiPoly {
    /// Highest total degree first, e.g. `4N^2 + 4N + 1` or `(1/3)t^3 + t*h1`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut terms: Vec<(&Vec<u32>, &Rational)> = self.terms.iter().collect();
        terms.sort_by(|(a, _), (b, _)| {
            let da: u32 = a.iter().sum();
            let db: u32 = b.iter().sum();
            db.cmp(&da).then_with(|| b.cmp(a))
        });
        for (idx, (e, c)) in terms.into_iter().enumerate() {
            let negative = c.is_negative();
            let mag = c.abs();
            if idx == 0 {
                if negative {
                    write!(f, "-")?;
                }
            } else if negative {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let monomial: Vec<String> = e
                .iter()
                .zip(&self.vars)
                .filter(|(k, _)| **k > 0)
                .map(|(k, v)| {
                    if *k == 1 {
                        v.clone()
                    } else {
                        format!("{v}^{k}")
                    }
                })
                .collect();
            if monomial.is_empty() {
                write!(f, "{}", fmt_rational(&mag))?;
            } else {
                if !mag.is_one() {
                    write!(f, "{}", fmt_rational(&mag))?;
                }
                write!(f, "{}", monomial.join("*"))?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for MultiPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MultiPoly[{}]({})", self.vars.join(","), self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn th() -> Vec<String> {
        vec!["t".into(), "h1".into(), "h2".into()]
    }

    #[test]
    fn derivative_of_cube() {
        let v = th();
        let s = MultiPoly::var(&v, 0).add(&MultiPoly::var(&v, 1)).unwrap();
        let d = s.pow(3).partial_derivative(1).unwrap();
        let expected = s.pow(2).scale(&rat(3));
        assert_eq!(d, expected);
    }

    #[test]
    fn compose_into_square() {
        let x = vec!["x".to_string()];
        let sq = MultiPoly::var(&x, 0).pow(2);
        let new = vec!["t".to_string(), "h2".to_string(), "y".to_string()];
        let t = MultiPoly::var(&new, 0);
        let h2 = MultiPoly::var(&new, 1);
        let y = MultiPoly::var(&new, 2);
        // x -> (t + h2) y is not affine, so use the general compose
        let sub = t.add(&h2).unwrap().mul(&y).unwrap();
        let out = sq.compose(&[sub.clone()]).unwrap();
        assert_eq!(out, t.add(&h2).unwrap().pow(2).mul(&y.pow(2)).unwrap());
        assert!(sq.compose_affine(&[sub]).is_err());
    }

    #[test]
    fn evaluate_sum_of_squares_polynomial() {
        let n = vec!["t".to_string()];
        let p = MultiPoly::from_univariate("t", &[rat(0), ratio(1, 3), rat(1), ratio(2, 3)]);
        assert_eq!(p.vars(), &n[..]);
        assert_eq!(p.evaluate_rational(&[rat(5)]).unwrap(), rat(110));
        let brute: i64 = (-5..=5).map(|l: i64| l * l).sum();
        assert_eq!(brute, 110);
        assert!((p.evaluate_float(&[5.0]).unwrap() - 110.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_variables_rejected() {
        let a = MultiPoly::one(&th());
        let b = MultiPoly::one(&["x".to_string()]);
        assert!(matches!(a.add(&b), Err(Error::VariableMismatch(_))));
        assert!(a.evaluate_float(&[1.0]).is_err());
    }

    #[test]
    fn display_is_descending() {
        let p = MultiPoly::from_univariate("N", &[rat(1), rat(4), rat(4)]);
        assert_eq!(p.to_string(), "4N^2 + 4N + 1");
        let q = MultiPoly::from_univariate("t", &[rat(0), ratio(1, 3), rat(0), ratio(-2, 3)]);
        assert_eq!(q.to_string(), "-(2/3)t^3 + (1/3)t");
    }
}
