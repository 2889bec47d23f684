//! The Euler-Maclaurin remainder
//! `R^k(N) = p_w(N, f) − p̃(N, 0, f) − Σ_{0<|γ|<=k} b_γ ∂^γ_h p̃(N, 0, f)`
//! assembled from a lattice sum and one jet of `h`-derivatives.

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integration::{exact_h_derivs, exact_ptilde, quad_h_jet, HJet};
use crate::jet::JetSpace;
use crate::poly::{factorial, rat_to_f64, MultiPoly, Rational};
use crate::polytope::Polytope;
use crate::quadrature::QuadratureSpec;
use crate::summation::{combine_exact, combine_float, exact_sums_by_tight, sums_by_tight};
use crate::symbols::{Density, SymbolExpr};
use crate::todd::{operator_product, OperatorKind};

/// Everything needed to evaluate `R^k(N)` for every `k <= k_max` and both kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderParts {
    pub scale: i64,
    pub sums_by_tight: Vec<f64>,
    pub jet: HJet,
    /// Exact counterparts for polynomial integrands, where the float
    /// cancellation would otherwise dominate the remainder.
    #[serde(skip)]
    exact: Option<ExactParts>,
}

#[derive(Debug, Clone, PartialEq)]
struct ExactParts {
    sums_by_tight: Vec<Rational>,
    derivs: Vec<Rational>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemainderValue {
    pub value: f64,
    /// Quadrature error propagated through the operator plus a rounding floor.
    pub error: f64,
}

impl RemainderParts {
    pub fn compute(p: &Polytope, density: &Density, scale: i64, k_max: usize, spec: &QuadratureSpec) -> Result<Self> {
        if !p.is_regular() {
            return Err(Error::NotRegular);
        }
        if let Some(f) = density.to_polynomial() {
            return Self::compute_exact(p, &f, scale, k_max);
        }
        let sums = sums_by_tight(p, scale, density)?;
        let jet = quad_h_jet(p, density, scale, k_max, spec)?;
        Ok(RemainderParts {
            scale,
            sums_by_tight: sums,
            jet,
            exact: None,
        })
    }

    fn compute_exact(p: &Polytope, f: &MultiPoly, scale: i64, k_max: usize) -> Result<Self> {
        let sums = exact_sums_by_tight(p, scale, f)?;
        let derivs = exact_h_derivs(&exact_ptilde(p, f)?, scale, k_max);
        let space = JetSpace::new(p.num_facets(), k_max);
        let coeffs = space
            .monomials()
            .iter()
            .zip(&derivs)
            .map(|(gamma, d)| rat_to_f64(&(d / gamma_factorial(gamma))))
            .collect();
        Ok(RemainderParts {
            scale,
            sums_by_tight: sums.iter().map(rat_to_f64).collect(),
            jet: HJet {
                m: p.num_facets(),
                k: k_max,
                coeffs,
                error: 0.0,
                regions: 0,
            },
            exact: Some(ExactParts {
                sums_by_tight: sums,
                derivs,
            }),
        })
    }

    pub fn k_max(&self) -> usize {
        self.jet.k
    }

    pub fn lattice_sum(&self, kind: OperatorKind) -> f64 {
        combine_float(&self.sums_by_tight, kind)
    }

    pub fn ptilde(&self) -> f64 {
        self.jet.value()
    }

    /// The operator terms grouped by order: entry `g` is
    /// `Σ_{|γ|=g} b_γ ∂^γ p̃(N, 0)`, for `g = 0..=k`.
    pub fn graded_terms(&self, k: usize, kind: OperatorKind) -> Result<Vec<f64>> {
        graded_terms(&self.jet, k, kind)
    }

    pub fn remainder(&self, k: usize, kind: OperatorKind) -> Result<RemainderValue> {
        if let Some(ex) = &self.exact {
            if k > self.k_max() {
                return Err(Error::InvalidArgument(format!(
                    "k = {k} exceeds the precomputed order {}",
                    self.k_max()
                )));
            }
            let op = operator_product(self.jet.m, k, kind);
            let space = self.jet.space();
            let mut value = combine_exact(&ex.sums_by_tight, kind);
            for (gamma, d) in space.monomials().iter().zip(&ex.derivs) {
                if gamma.iter().sum::<u32>() as usize <= k {
                    value -= op.coeff(gamma) * d;
                }
            }
            return Ok(RemainderValue {
                value: rat_to_f64(&value),
                error: 0.0,
            });
        }
        let terms = self.graded_terms(k, kind)?;
        let lattice = self.lattice_sum(kind);
        let mut value = lattice;
        for t in &terms {
            value -= t;
        }
        let magnitude = lattice.abs() + terms.iter().map(|t| t.abs()).sum::<f64>();
        let error = self.jet.error * operator_norm(self.jet.m, k, kind) + 8.0 * f64::EPSILON * magnitude;
        Ok(RemainderValue { value, error })
    }
}

/// Entry `g` is `Σ_{|γ|=g} b_γ γ! c_γ` for the Taylor coefficients `c_γ` of `jet`.
pub fn graded_terms(jet: &HJet, k: usize, kind: OperatorKind) -> Result<Vec<f64>> {
    if k > jet.k {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the precomputed order {}",
            jet.k
        )));
    }
    let op = operator_product(jet.m, k, kind);
    let mut out = vec![0.0; k + 1];
    for (i, gamma) in jet.space().monomials().iter().enumerate() {
        let g = gamma.iter().sum::<u32>() as usize;
        if g > k {
            continue;
        }
        let b = op.coeff(gamma);
        if b.is_zero() {
            continue;
        }
        out[g] += rat_to_f64(&b) * float_factorial(gamma) * jet.coeffs[i];
    }
    Ok(out)
}

/// `Σ_{|γ|<=k} |b_γ| γ!`, the factor by which a jet error propagates.
pub fn operator_norm(m: usize, k: usize, kind: OperatorKind) -> f64 {
    operator_product(m, k, kind)
        .iter()
        .map(|(g, b)| rat_to_f64(b).abs() * float_factorial(g))
        .sum()
}

fn float_factorial(gamma: &[u32]) -> f64 {
    gamma.iter().map(|&v| (1..=v).map(|x| x as f64).product::<f64>()).product()
}

fn gamma_factorial(gamma: &[u32]) -> Rational {
    Rational::from_integer(gamma.iter().map(|&g| factorial(g)).product())
}

/// `n + r + s` must stay below `k` (the paper's `k > n + r`).
pub fn check_order(dim: usize, order: f64, k: usize) -> Result<()> {
    if (k as f64) <= dim as f64 + order {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must exceed n + r = {}",
            dim as f64 + order
        )));
    }
    Ok(())
}

/// `R^k(f, N)` for a symbol with optional gauge shift.
pub fn remainder(
    p: &Polytope,
    f: &SymbolExpr,
    scale: i64,
    k: usize,
    kind: OperatorKind,
    gauge: Option<f64>,
    spec: &QuadratureSpec,
) -> Result<RemainderValue> {
    let density = f.density(gauge);
    check_order(p.dim(), density.order(), k)?;
    RemainderParts::compute(p, &density, scale, k, spec)?.remainder(k, kind)
}
