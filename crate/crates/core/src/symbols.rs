//! Polyhomogeneous symbols of the form `Σ c · x^γ · ⟨x⟩^s`, `⟨x⟩² = 1 + ‖x‖²`.
//!
//! The algebra is closed under differentiation and under gauging by
//! `⟨x⟩^s`. Expanding `⟨x⟩^s = ‖x‖^s (1 + ‖x‖^{-2})^{s/2}` binomially gives
//! the homogeneous pieces on the ladder `|γ| + s - 2k`, and the binomial
//! remainder gives certified decay bounds for the tail.
//!
//! Grammar accepted by [`SymbolExpr::parse`] (whitespace insignificant):
//!
//! ```text
//! expr   := ['-'] term (('+' | '-') term)*
//! term   := item ('*' item)*
//! item   := coeff | 'x'INT ('^'INT)? | '<x>^' RAT
//! coeff  := decimal | INT '/' INT
//! ```

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::jet::{binomial, binomial_series, cutoff, cutoff_series, JetSpace};
use crate::poly::{rat_to_f64, MultiPoly};

#[derive(Debug, Clone, PartialEq)]
pub struct GaugedTerm {
    pub coeff: f64,
    pub exps: Vec<u32>,
    /// exponent `s` on `⟨x⟩`
    pub power: Rational64,
}

impl GaugedTerm {
    pub fn order(&self) -> Rational64 {
        Rational64::from_integer(self.exps.iter().sum::<u32>() as i64) + self.power
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolExpr {
    dim: usize,
    terms: Vec<GaugedTerm>,
}

#[derive(Debug, Clone, PartialEq)]
struct ParsedTerm {
    coeff: BigRational,
    exps: Vec<u32>,
    power: BigRational,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Syntax {
            position: self.pos,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn digits(&mut self) -> Option<&'a str> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if self.pos == start {
            None
        } else {
            Some(std::str::from_utf8(&self.src[start..self.pos]).expect("ascii"))
        }
    }

    fn integer(&mut self) -> Result<u64> {
        self.skip_ws();
        match self.digits() {
            Some(d) => d.parse().or_else(|_| self.err("integer too large")),
            None => self.err("expected an integer"),
        }
    }

    /// `decimal | INT '/' INT`, unsigned.
    fn number(&mut self) -> Result<BigRational> {
        self.skip_ws();
        let start = self.pos;
        let int_part = self.digits().unwrap_or("");
        let mut value;
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            let frac = self.digits().unwrap_or("");
            if int_part.is_empty() && frac.is_empty() {
                self.pos = start;
                return self.err("expected a number");
            }
            let digits = format!("{int_part}{frac}");
            let num: BigInt = digits.parse().expect("digits");
            value = BigRational::new(num, BigInt::from(10).pow(frac.len() as u32));
        } else if int_part.is_empty() {
            return self.err("expected a number");
        } else {
            value = BigRational::from_integer(int_part.parse::<BigInt>().expect("digits"));
        }
        if self.peek() == Some(b'/') {
            self.pos += 1;
            self.skip_ws();
            let den = match self.digits() {
                Some(d) => d.parse::<BigInt>().expect("digits"),
                None => return self.err("expected a denominator"),
            };
            if den.is_zero() {
                return self.err("zero denominator");
            }
            value /= BigRational::from_integer(den);
        }
        Ok(value)
    }

    fn signed_number(&mut self) -> Result<BigRational> {
        let paren = self.eat(b'(');
        let neg = if self.eat(b'-') {
            true
        } else {
            self.eat(b'+');
            false
        };
        let v = self.number()?;
        if paren && !self.eat(b')') {
            return self.err("expected `)`");
        }
        Ok(if neg { -v } else { v })
    }

    fn item(&mut self, term: &mut ParsedTerm, dim_hint: &mut usize) -> Result<()> {
        match self.peek() {
            Some(b'x') => {
                self.pos += 1;
                let idx = self.integer()? as usize;
                if idx == 0 {
                    return self.err("variables are numbered from x1");
                }
                let e = if self.eat(b'^') { self.integer()? as u32 } else { 1 };
                if term.exps.len() < idx {
                    term.exps.resize(idx, 0);
                }
                term.exps[idx - 1] += e;
                *dim_hint = (*dim_hint).max(idx);
                Ok(())
            }
            Some(b'<') => {
                let rest = &self.src[self.pos..];
                if !rest.starts_with(b"<x>") {
                    return self.err("expected `<x>`");
                }
                self.pos += 3;
                if !self.eat(b'^') {
                    return self.err("expected `^` after `<x>`");
                }
                term.power += self.signed_number()?;
                Ok(())
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                term.coeff *= self.number()?;
                Ok(())
            }
            Some(_) => self.err("unexpected character"),
            None => self.err("unexpected end of input"),
        }
    }

    fn term(&mut self, dim_hint: &mut usize) -> Result<ParsedTerm> {
        let mut t = ParsedTerm {
            coeff: BigRational::one(),
            exps: Vec::new(),
            power: BigRational::zero(),
        };
        self.item(&mut t, dim_hint)?;
        while self.eat(b'*') {
            self.item(&mut t, dim_hint)?;
        }
        Ok(t)
    }

    fn expr(&mut self) -> Result<(Vec<ParsedTerm>, usize)> {
        let mut terms = Vec::new();
        let mut dim_hint = 0;
        let mut negate = self.eat(b'-');
        if !negate {
            self.eat(b'+');
        }
        loop {
            let mut t = self.term(&mut dim_hint)?;
            if negate {
                t.coeff = -t.coeff;
            }
            terms.push(t);
            match self.peek() {
                None => break,
                Some(b'+') => {
                    self.pos += 1;
                    negate = false;
                }
                Some(b'-') => {
                    self.pos += 1;
                    negate = true;
                }
                Some(_) => return self.err("expected `+`, `-` or end of input"),
            }
        }
        Ok((terms, dim_hint))
    }
}

fn parse_terms(text: &str, dim: Option<usize>) -> Result<(usize, Vec<ParsedTerm>)> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    let (mut terms, hint) = p.expr()?;
    let dim = match dim {
        Some(d) if hint > d => {
            return Err(Error::Syntax {
                position: 0,
                message: format!("variable x{hint} exceeds dimension {d}"),
            })
        }
        Some(d) => d,
        None => hint.max(1),
    };
    for t in &mut terms {
        t.exps.resize(dim, 0);
    }
    Ok((dim, terms))
}

fn to_rational64(r: &BigRational) -> Result<Rational64> {
    match (r.numer().to_i64(), r.denom().to_i64()) {
        (Some(n), Some(d)) => Ok(Rational64::new(n, d)),
        _ => Err(Error::Syntax {
            position: 0,
            message: format!("exponent {r} out of range"),
        }),
    }
}

pub fn r64_to_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Parses a polynomial (no `<x>` factors) with exact rational coefficients
/// over variables `x1..xn`.
pub fn parse_polynomial(text: &str, dim: Option<usize>) -> Result<MultiPoly> {
    let (dim, terms) = parse_terms(text, dim)?;
    let vars = MultiPoly::labels("x", dim);
    let mut p = MultiPoly::zero(&vars);
    for t in terms {
        if !t.power.is_zero() {
            return Err(Error::Syntax {
                position: 0,
                message: "polynomial input may not contain <x> factors".into(),
            });
        }
        p.add_term(t.exps, t.coeff);
    }
    Ok(p)
}

impl SymbolExpr {
    pub fn parse(text: &str, dim: Option<usize>) -> Result<Self> {
        let (dim, parsed) = parse_terms(text, dim)?;
        let terms = parsed
            .into_iter()
            .map(|t| {
                Ok(GaugedTerm {
                    coeff: rat_to_f64(&t.coeff),
                    exps: t.exps,
                    power: to_rational64(&t.power)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_terms(dim, terms))
    }

    /// Merges like terms and drops zeros.
    pub fn from_terms(dim: usize, terms: Vec<GaugedTerm>) -> Self {
        let mut map: BTreeMap<(Rational64, Vec<u32>), f64> = BTreeMap::new();
        for t in terms {
            debug_assert_eq!(t.exps.len(), dim);
            *map.entry((t.power, t.exps)).or_insert(0.0) += t.coeff;
        }
        let terms = map
            .into_iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|((power, exps), coeff)| GaugedTerm { coeff, exps, power })
            .collect();
        SymbolExpr { dim, terms }
    }

    pub fn from_polynomial(p: &MultiPoly) -> Self {
        let terms = p
            .terms()
            .map(|(e, c)| GaugedTerm {
                coeff: rat_to_f64(c),
                exps: e.clone(),
                power: Rational64::zero(),
            })
            .collect();
        Self::from_terms(p.nvars(), terms)
    }

    /// `c · ⟨x⟩^s` in dimension `dim`.
    pub fn bracket_power(dim: usize, c: f64, s: Rational64) -> Self {
        Self::from_terms(
            dim,
            vec![GaugedTerm {
                coeff: c,
                exps: vec![0; dim],
                power: s,
            }],
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[GaugedTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `max (|γ| + s)`; `None` for the zero symbol.
    pub fn order(&self) -> Option<Rational64> {
        self.terms.iter().map(|t| t.order()).max()
    }

    pub fn order_f64(&self) -> f64 {
        self.order().map(r64_to_f64).unwrap_or(f64::NEG_INFINITY)
    }

    /// `f(x) ⟨x⟩^s`.
    pub fn with_gauge(&self, s: Rational64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| GaugedTerm {
                power: t.power + s,
                ..t.clone()
            })
            .collect();
        Self::from_terms(self.dim, terms)
    }

    /// `∂(x^γ⟨x⟩^s)/∂x_i = γ_i x^{γ-e_i}⟨x⟩^s + s x^{γ+e_i}⟨x⟩^{s-2}`.
    pub fn differentiate(&self, axis: usize) -> Self {
        assert!(axis < self.dim, "axis {axis} out of range");
        let mut out = Vec::new();
        for t in &self.terms {
            if t.exps[axis] > 0 {
                let mut e = t.exps.clone();
                e[axis] -= 1;
                out.push(GaugedTerm {
                    coeff: t.coeff * t.exps[axis] as f64,
                    exps: e,
                    power: t.power,
                });
            }
            if !t.power.is_zero() {
                let mut e = t.exps.clone();
                e[axis] += 1;
                out.push(GaugedTerm {
                    coeff: t.coeff * r64_to_f64(t.power),
                    exps: e,
                    power: t.power - 2,
                });
            }
        }
        Self::from_terms(self.dim, out)
    }

    /// `Σ c x^γ ⟨x⟩^{s + shift}`.
    pub fn evaluate(&self, x: &[f64], gauge: Option<f64>) -> f64 {
        let bracket_sq = 1.0 + x.iter().map(|v| v * v).sum::<f64>();
        let shift = gauge.unwrap_or(0.0);
        self.terms
            .iter()
            .map(|t| {
                let mono: f64 = x.iter().zip(&t.exps).map(|(v, &e)| v.powi(e as i32)).product();
                let p = r64_to_f64(t.power) + shift;
                let radial = if p == 0.0 { 1.0 } else { bracket_sq.powf(p / 2.0) };
                t.coeff * mono * radial
            })
            .sum()
    }

    /// Exact polynomial form when every term has `s = 0`.
    pub fn to_polynomial(&self) -> Option<MultiPoly> {
        if self.terms.iter().any(|t| !t.power.is_zero()) {
            return None;
        }
        let vars = MultiPoly::labels("x", self.dim);
        let mut p = MultiPoly::zero(&vars);
        for t in &self.terms {
            p.add_term(t.exps.clone(), BigRational::from_float(t.coeff)?);
        }
        Some(p)
    }

    /// Homogeneous pieces of degree `>= lowest`, highest degree first.
    pub fn hom_expansion(&self, lowest: Rational64) -> Vec<HomPiece> {
        let mut pieces: BTreeMap<Rational64, BTreeMap<(Rational64, Vec<u32>), f64>> = BTreeMap::new();
        for t in &self.terms {
            let a = r64_to_f64(t.power) / 2.0;
            let mut k = 0i64;
            loop {
                let degree = t.order() - 2 * k;
                if degree < lowest {
                    break;
                }
                let b = binomial(a, k as usize);
                if b != 0.0 {
                    let rho = t.power - 2 * k;
                    *pieces
                        .entry(degree)
                        .or_default()
                        .entry((rho, t.exps.clone()))
                        .or_insert(0.0) += t.coeff * b;
                }
                k += 1;
            }
        }
        pieces
            .into_iter()
            .rev()
            .map(|(degree, parts)| HomPiece {
                dim: self.dim,
                degree,
                parts: parts
                    .into_iter()
                    .filter(|(_, c)| *c != 0.0)
                    .map(|((rho, exps), coeff)| NormPart { coeff, exps, rho })
                    .collect(),
            })
            .filter(|p| !p.parts.is_empty())
            .collect()
    }

    /// `g_j = f - Σ_{ℓ >= j} χ f_ℓ` with certified bounds.
    pub fn tail(&self, lowest: Rational64) -> Tail {
        let pieces = self.hom_expansion(lowest);
        // per term: first omitted ladder degree and its remainder constant at ‖x‖ >= 2
        let mut contributions: Vec<(f64, f64)> = Vec::new();
        for t in &self.terms {
            let a = r64_to_f64(t.power) / 2.0;
            let order = t.order();
            // number of included ladder steps
            let included = if order < lowest {
                0
            } else {
                ((order - lowest) / 2).floor().to_integer() + 1
            };
            let kk = included as usize; // index of first omitted binomial term
            if a >= 0.0 && a.fract() == 0.0 && kk as f64 > a {
                continue; // series terminated
            }
            let b = binomial(a, kk).abs();
            if b == 0.0 {
                continue;
            }
            // Lagrange remainder (1 + θu)^{a-kk}, u <= 1/4
            let growth = if a - kk as f64 > 0.0 {
                1.25f64.powf(a - kk as f64)
            } else {
                1.0
            };
            let degree = r64_to_f64(order) - 2.0 * kk as f64;
            contributions.push((degree, t.coeff.abs() * b * growth));
        }
        let decay_exponent = contributions
            .iter()
            .map(|c| c.0)
            .fold(f64::NEG_INFINITY, f64::max);
        let outer_constant = contributions
            .iter()
            .map(|&(d, k)| k * 2f64.powf(d - decay_exponent))
            .sum();

        let mut inner_bound = 0.0;
        for t in &self.terms {
            let p = r64_to_f64(t.power) / 2.0;
            let deg = t.exps.iter().sum::<u32>() as f64;
            inner_bound += t.coeff.abs() * 2f64.powf(deg) * 1f64.max(5f64.powf(p));
        }
        for piece in &pieces {
            for part in &piece.parts {
                let deg = part.exps.iter().sum::<u32>() as f64;
                inner_bound +=
                    part.coeff.abs() * 2f64.powf(deg) * 1f64.max(2f64.powf(r64_to_f64(part.rho)));
            }
        }
        Tail {
            symbol: self.clone(),
            lowest,
            pieces,
            decay_exponent,
            outer_constant,
            inner_bound,
        }
    }

    /// The integrand form used by quadrature and lattice sums.
    pub fn density(&self, gauge: Option<f64>) -> Density {
        let shift = gauge.unwrap_or(0.0);
        Density {
            dim: self.dim,
            monomials: self
                .terms
                .iter()
                .map(|t| RadialMonomial {
                    coeff: t.coeff,
                    exps: t.exps.clone(),
                    power: r64_to_f64(t.power) + shift,
                    shift: 1.0,
                })
                .collect(),
            cutoff: false,
        }
    }
}

impl fmt::Display for SymbolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            let mut factors = Vec::new();
            for (v, &e) in t.exps.iter().enumerate() {
                match e {
                    0 => {}
                    1 => factors.push(format!("x{}", v + 1)),
                    _ => factors.push(format!("x{}^{}", v + 1, e)),
                }
            }
            if !t.power.is_zero() {
                factors.push(format!("<x>^{}", t.power));
            }
            let mag = t.coeff.abs();
            let sign = if t.coeff < 0.0 { "-" } else { "+" };
            if i == 0 {
                if t.coeff < 0.0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            if factors.is_empty() {
                write!(f, "{mag}")?;
            } else if mag == 1.0 {
                write!(f, "{}", factors.join("*"))?;
            } else {
                write!(f, "{mag}*{}", factors.join("*"))?;
            }
        }
        Ok(())
    }
}

/// `coeff · x^γ · ‖x‖^ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormPart {
    pub coeff: f64,
    pub exps: Vec<u32>,
    pub rho: Rational64,
}

/// One homogeneous piece `f_ℓ`, evaluated with the radial cutoff applied.
#[derive(Debug, Clone, PartialEq)]
pub struct HomPiece {
    pub dim: usize,
    pub degree: Rational64,
    pub parts: Vec<NormPart>,
}

impl HomPiece {
    /// `f_ℓ(x)` without the cutoff (singular at 0 when the degree is negative).
    pub fn evaluate_uncut(&self, x: &[f64]) -> f64 {
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.parts
            .iter()
            .map(|p| {
                let mono: f64 = x.iter().zip(&p.exps).map(|(v, &e)| v.powi(e as i32)).product();
                let rho = r64_to_f64(p.rho);
                p.coeff * mono * if rho == 0.0 { 1.0 } else { norm.powf(rho) }
            })
            .sum()
    }

    /// `χ(‖x‖) f_ℓ(x)`.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let chi = cutoff(x.iter().map(|v| v * v).sum::<f64>().sqrt());
        if chi == 0.0 {
            0.0
        } else {
            chi * self.evaluate_uncut(x)
        }
    }

    pub fn density(&self) -> Density {
        Density {
            dim: self.dim,
            monomials: self
                .parts
                .iter()
                .map(|p| RadialMonomial {
                    coeff: p.coeff,
                    exps: p.exps.clone(),
                    power: r64_to_f64(p.rho),
                    shift: 0.0,
                })
                .collect(),
            cutoff: true,
        }
    }
}

/// `g_j = f - Σ χ f_ℓ` with `|g_j(x)| <= outer_constant · ‖x‖^decay_exponent`
/// for `‖x‖ >= 2` and `|g_j| <= inner_bound` on `‖x‖ <= 2`.
#[derive(Debug, Clone)]
pub struct Tail {
    pub symbol: SymbolExpr,
    pub lowest: Rational64,
    pub pieces: Vec<HomPiece>,
    /// `-inf` when the expansion is exact outside the cutoff zone
    pub decay_exponent: f64,
    pub outer_constant: f64,
    pub inner_bound: f64,
}

impl Tail {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.symbol.evaluate(x, None) - self.pieces.iter().map(|p| p.evaluate(x)).sum::<f64>()
    }

    pub fn bound_at(&self, x: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r <= 2.0 {
            self.inner_bound
        } else if self.decay_exponent == f64::NEG_INFINITY {
            0.0
        } else {
            self.outer_constant * r.powf(self.decay_exponent)
        }
    }
}

/// `coeff · x^γ · (shift + ‖x‖²)^{power/2}` with `shift` either 1 (`⟨x⟩`) or 0 (`‖x‖`).
#[derive(Debug, Clone, PartialEq)]
pub struct RadialMonomial {
    pub coeff: f64,
    pub exps: Vec<u32>,
    pub power: f64,
    pub shift: f64,
}

/// A finite sum of radial monomials, optionally multiplied by the cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct Density {
    pub dim: usize,
    pub monomials: Vec<RadialMonomial>,
    pub cutoff: bool,
}

impl Density {
    /// `max (|γ| + power)`.
    pub fn order(&self) -> f64 {
        self.monomials
            .iter()
            .map(|m| m.exps.iter().sum::<u32>() as f64 + m.power)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn is_polynomial(&self) -> bool {
        !self.cutoff && self.monomials.iter().all(|m| m.power == 0.0)
    }

    /// The exact polynomial with the same (binary) coefficients, if any.
    pub fn to_polynomial(&self) -> Option<MultiPoly> {
        if !self.is_polynomial() {
            return None;
        }
        let mut p = MultiPoly::zero(&MultiPoly::labels("x", self.dim));
        for m in &self.monomials {
            p.add_term(m.exps.clone(), BigRational::from_float(m.coeff)?);
        }
        Some(p)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let norm_sq: f64 = x.iter().map(|v| v * v).sum();
        let chi = if self.cutoff { cutoff(norm_sq.sqrt()) } else { 1.0 };
        if chi == 0.0 {
            return 0.0;
        }
        let s: f64 = self
            .monomials
            .iter()
            .map(|m| {
                let mono: f64 = x.iter().zip(&m.exps).map(|(v, &e)| v.powi(e as i32)).product();
                let radial = if m.power == 0.0 {
                    1.0
                } else {
                    (m.shift + norm_sq).powf(m.power / 2.0)
                };
                m.coeff * mono * radial
            })
            .sum();
        chi * s
    }

    /// Taylor jet in `h` of `F(x(h))` where each coordinate `x[a]` is itself a jet.
    pub fn jet(&self, space: &JetSpace, x: &[Vec<f64>]) -> Vec<f64> {
        let k = space.order();
        let norm_sq_jet = x
            .iter()
            .map(|xa| space.mul(xa, xa))
            .fold(space.zero(), |acc, v| acc.iter().zip(&v).map(|(a, b)| a + b).collect());
        let u0 = norm_sq_jet[0];
        if self.cutoff && u0 <= 1.0 {
            return space.zero();
        }
        let max_exp: Vec<u32> = (0..self.dim)
            .map(|a| self.monomials.iter().map(|m| m.exps[a]).max().unwrap_or(0))
            .collect();
        let powers: Vec<Vec<Vec<f64>>> = (0..self.dim)
            .map(|a| {
                let mut p = vec![space.constant(1.0)];
                for _ in 0..max_exp[a] {
                    let next = space.mul(p.last().unwrap(), &x[a]);
                    p.push(next);
                }
                p
            })
            .collect();
        let mut radial_cache: Vec<((u64, u64), Vec<f64>)> = Vec::new();
        let mut out = space.zero();
        for m in &self.monomials {
            let mut term = space.constant(m.coeff);
            for (a, &e) in m.exps.iter().enumerate() {
                if e > 0 {
                    term = space.mul(&term, &powers[a][e as usize]);
                }
            }
            if m.power != 0.0 {
                let key = (m.power.to_bits(), m.shift.to_bits());
                let radial = match radial_cache.iter().find(|(kk, _)| *kk == key) {
                    Some((_, r)) => r.clone(),
                    None => {
                        let b0 = m.shift + u0;
                        let w: Vec<f64> = norm_sq_jet.iter().map(|v| v / b0).collect();
                        let r: Vec<f64> = space
                            .compose(&binomial_series(m.power / 2.0, k), &w)
                            .iter()
                            .map(|v| v * b0.powf(m.power / 2.0))
                            .collect();
                        radial_cache.push((key, r.clone()));
                        r
                    }
                };
                term = if m.exps.iter().all(|&e| e == 0) {
                    radial.iter().map(|r| m.coeff * r).collect()
                } else {
                    space.mul(&term, &radial)
                };
            }
            for (o, t) in out.iter_mut().zip(&term) {
                *o += t;
            }
        }
        if self.cutoff && u0 < 4.0 {
            let chi = space.compose(&cutoff_series(u0, k), &norm_sq_jet);
            out = space.mul(&out, &chi);
        }
        out
    }

    /// Derivative along `axis`, valid wherever the cutoff is identically 1.
    pub fn outer_derivative(&self, axis: usize) -> Density {
        let mut monomials = Vec::new();
        for m in &self.monomials {
            if m.exps[axis] > 0 {
                let mut e = m.exps.clone();
                e[axis] -= 1;
                monomials.push(RadialMonomial {
                    coeff: m.coeff * m.exps[axis] as f64,
                    exps: e,
                    ..m.clone()
                });
            }
            if m.power != 0.0 {
                let mut e = m.exps.clone();
                e[axis] += 1;
                monomials.push(RadialMonomial {
                    coeff: m.coeff * m.power,
                    exps: e,
                    power: m.power - 2.0,
                    shift: m.shift,
                });
            }
        }
        Density {
            dim: self.dim,
            monomials,
            cutoff: self.cutoff,
        }
    }

    /// `K` with `|F(x)| <= K ‖x‖^order` for `‖x‖ >= radius >= 1` (and beyond
    /// the cutoff zone when the cutoff is on).
    pub fn outer_bound(&self, radius: f64) -> f64 {
        self.outer_bound_for(radius, self.order())
    }

    /// `K` with `|F(x)| <= K ‖x‖^exponent` for `‖x‖ >= radius`; requires
    /// `exponent >= order`.
    pub fn outer_bound_for(&self, radius: f64, exponent: f64) -> f64 {
        self.monomials
            .iter()
            .map(|m| {
                let deg = m.exps.iter().sum::<u32>() as f64;
                let growth = if m.power > 0.0 {
                    (1.0 + m.shift / (radius * radius)).powf(m.power / 2.0)
                } else {
                    1.0
                };
                m.coeff.abs() * growth * radius.powf(deg + m.power - exponent)
            })
            .sum()
    }

    /// `K2` with `Σ_{i,j} |∂_i ∂_j F(x)| <= K2 ‖x‖^{order - 2}` for `‖x‖ >= radius`.
    pub fn hessian_bound(&self, radius: f64) -> f64 {
        let target = self.order() - 2.0;
        let mut total = 0.0;
        for i in 0..self.dim {
            let di = self.outer_derivative(i);
            for j in 0..self.dim {
                total += di.outer_derivative(j).outer_bound_for(radius, target);
            }
        }
        total
    }
}
