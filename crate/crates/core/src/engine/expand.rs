//! Asymptotic expansion of `p_w(N, f) − p̃(N, 0, f)` in powers of `N`.
//!
//! Each homogeneous piece `f_ℓ` (cut off near the origin) contributes
//! `Σ_{|γ|=g} b_γ ∂^γ p̃(N, 0, χ f_ℓ)`, which is exactly homogeneous of degree
//! `ℓ + n − g` in `N` once the facets lie outside the cutoff ball.

use std::collections::BTreeMap;

use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use crate::engine::constant::{extrapolate, minimum_limit_order, LimitOptions, RemainderTable, Sample};
use crate::engine::exact::ehrhart_fit;
use crate::engine::remainder::{check_order, graded_terms, operator_norm};
use crate::error::{Error, Result};
use crate::integration::{exact_ptilde, quad_h_jet};
use crate::poly::{rat_to_f64, MultiPoly};
use crate::polytope::Polytope;
use crate::symbols::{r64_to_f64, SymbolExpr};
use crate::todd::OperatorKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderTerm {
    /// Exponent `d` of `N^d`, as an exact rational.
    pub exponent: String,
    pub exponent_value: f64,
    pub coefficient: f64,
    pub error: f64,
    /// Exact coefficient when the expansion came from the exact path.
    pub exact: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub samples: Vec<Sample>,
    /// Log-log slope over the samples that stand clear of their error bars.
    pub observed_slope: Option<f64>,
    /// Exponent of the largest omitted contribution.
    pub predicted_slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticExpansion {
    pub polytope: String,
    pub symbol: String,
    pub kind: OperatorKind,
    pub k: usize,
    pub j: Option<i64>,
    /// Strictly decreasing exponents.
    pub ladder: Vec<LadderTerm>,
    /// Exponents whose coefficients did not clear their error bars.
    pub insignificant: Vec<f64>,
    pub constant: f64,
    pub constant_error: f64,
    pub schedule: Vec<i64>,
    pub residual: Option<Residual>,
    /// Set after `truncate`.
    pub truncated_at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpandOptions {
    pub limit: LimitOptions,
    /// Abort when two distinct exponents give a fit condition number above this.
    pub max_condition: f64,
}

impl Default for ExpandOptions {
    fn default() -> Self {
        ExpandOptions {
            limit: LimitOptions::default(),
            max_condition: 1e8,
        }
    }
}

/// Default `j`: deep enough that omitted pieces decay at least as fast as the
/// operator truncation.
pub fn default_j(f: &SymbolExpr, k: usize) -> i64 {
    f.order_f64().floor() as i64 - k as i64
}

/// Least-squares condition number of `[N^{d1}, N^{d2}]` with unit columns.
fn pair_condition(schedule: &[i64], d1: f64, d2: f64) -> f64 {
    let a: Vec<f64> = schedule.iter().map(|&n| (n as f64).powf(d1)).collect();
    let b: Vec<f64> = schedule.iter().map(|&n| (n as f64).powf(d2)).collect();
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    // eigenvalues of the normalized Gram matrix are ‖â ± b̂‖² / 2
    let diff = a.iter().zip(&b).map(|(x, y)| (x / na - y / nb).powi(2)).sum::<f64>().sqrt();
    let sum = a.iter().zip(&b).map(|(x, y)| (x / na + y / nb).powi(2)).sum::<f64>().sqrt();
    let (big, small) = if diff > sum { (diff, sum) } else { (sum, diff) };
    big / small.max(f64::MIN_POSITIVE)
}

fn check_collisions(schedule: &[i64], exps: &[f64], max_condition: f64) -> Result<()> {
    for (i, &a) in exps.iter().enumerate() {
        for &b in &exps[i + 1..] {
            let cond = pair_condition(schedule, a, b);
            if cond > max_condition {
                return Err(Error::IllConditionedFit {
                    first: a,
                    second: b,
                    condition: cond,
                });
            }
        }
    }
    Ok(())
}

fn slope(samples: &[Sample]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.value.abs() > 4.0 * s.error && s.value != 0.0)
        .map(|s| ((s.n as f64).ln(), s.value.abs().ln()))
        .collect();
    log_log_fit(&pts)
}

/// Least-squares slope of `(ln N, ln |y|)` pairs.
pub fn log_log_fit(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

fn format_exponent(d: Rational64) -> String {
    if *d.denom() == 1 {
        d.numer().to_string()
    } else {
        format!("{}/{}", d.numer(), d.denom())
    }
}

pub fn expand(
    p: &Polytope,
    f: &SymbolExpr,
    k: usize,
    j: Option<i64>,
    kind: OperatorKind,
    opts: &ExpandOptions,
) -> Result<AsymptoticExpansion> {
    if !p.is_regular() {
        return Err(Error::NotRegular);
    }
    let n = p.dim();
    check_order(n, f.order_f64(), k)?;
    if f.to_polynomial().is_some() {
        return expand_exact(p, f, k, kind);
    }
    let j = j.unwrap_or_else(|| default_j(f, k));
    let schedule = &opts.limit.schedule;
    let tail = f.tail(Rational64::from_integer(j));

    // (exponent -> per-N sums and errors)
    let mut by_exponent: BTreeMap<Rational64, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let norm = operator_norm(p.num_facets(), k, kind);
    for piece in &tail.pieces {
        let density = piece.density();
        for (si, &scale) in schedule.iter().enumerate() {
            let jet = quad_h_jet(p, &density, scale, k, &opts.limit.quad)?;
            let terms = graded_terms(&jet, k, kind)?;
            for (g, t) in terms.iter().enumerate().skip(1) {
                let d = piece.degree + Rational64::from_integer(n as i64 - g as i64);
                let entry = by_exponent
                    .entry(d)
                    .or_insert_with(|| (vec![0.0; schedule.len()], vec![0.0; schedule.len()]));
                entry.0[si] += t;
                entry.1[si] += jet.error * norm + 8.0 * f64::EPSILON * t.abs();
            }
        }
    }
    let exps: Vec<f64> = by_exponent.keys().map(|d| r64_to_f64(*d)).collect();
    check_collisions(schedule, &exps, opts.max_condition)?;

    let mut ladder = Vec::new();
    let mut insignificant = Vec::new();
    for (d, (vals, errs)) in by_exponent.iter().rev() {
        let dv = r64_to_f64(*d);
        let scaled: Vec<f64> = schedule
            .iter()
            .zip(vals)
            .map(|(&s, v)| v / (s as f64).powf(dv))
            .collect();
        let scaled_errs: Vec<f64> = schedule
            .iter()
            .zip(errs)
            .map(|(&s, e)| e / (s as f64).powf(dv))
            .collect();
        // the terms are exactly homogeneous, so read the coefficient where it
        // is most precise and keep the other N as a consistency check
        let best = (0..scaled.len())
            .min_by(|&a, &b| scaled_errs[a].total_cmp(&scaled_errs[b]))
            .unwrap();
        let coefficient = scaled[best];
        let excess = (0..scaled.len())
            .map(|i| ((scaled[i] - coefficient).abs() - scaled_errs[i] - scaled_errs[best]).max(0.0))
            .fold(0.0, f64::max);
        let error = scaled_errs[best] + excess;
        if coefficient.abs() <= error {
            // below the noise at every N: leave it to the residual
            insignificant.push(dv);
            continue;
        }
        ladder.push(LadderTerm {
            exponent: format_exponent(*d),
            exponent_value: dv,
            coefficient,
            error,
            exact: None,
        });
    }

    let k_const = k.max(minimum_limit_order(n, f.order_f64()));
    let density = f.density(None);
    let table = RemainderTable::compute(p, &density, schedule, k_const, &opts.limit.quad)?;
    let (constant, constant_error, _) = table.estimate(k_const, kind, opts.limit.richardson)?;

    let mut samples = Vec::new();
    for part in &table.parts {
        let terms = part.graded_terms(0, kind)?;
        let diff = part.lattice_sum(kind) - terms[0];
        let x = part.scale as f64;
        let mut value = diff - constant;
        let mut error = constant_error + part.jet.error + 8.0 * f64::EPSILON * part.lattice_sum(kind).abs();
        for t in &ladder {
            value -= t.coefficient * x.powf(t.exponent_value);
            error += t.error * x.powf(t.exponent_value);
        }
        samples.push(Sample {
            n: part.scale,
            value,
            error,
        });
    }
    let r = f.order_f64();
    let predicted = insignificant
        .iter()
        .fold((tail.decay_exponent + n as f64 - 1.0).max(r + n as f64 - k as f64), |a, &b| a.max(b));
    Ok(AsymptoticExpansion {
        polytope: p.describe(),
        symbol: f.to_string(),
        kind,
        k,
        j: Some(j),
        ladder,
        insignificant,
        constant,
        constant_error,
        schedule: schedule.clone(),
        residual: Some(Residual {
            observed_slope: slope(&samples),
            samples,
            predicted_slope: predicted,
        }),
        truncated_at: None,
    })
}

/// Polynomial `f`: `p_w(N) − p̃(N, 0)` is itself a polynomial, taken exactly.
fn expand_exact(p: &Polytope, f: &SymbolExpr, k: usize, kind: OperatorKind) -> Result<AsymptoticExpansion> {
    let poly = f.to_polynomial().expect("polynomial symbol");
    let fit = ehrhart_fit(p, &poly, kind)?;
    let ptilde = exact_ptilde(p, &poly)?;
    let nvar = vec!["N".to_string()];
    let mut subs = vec![MultiPoly::zero(&nvar); p.num_facets() + 1];
    subs[0] = MultiPoly::var(&nvar, 0);
    let volume = ptilde.compose(&subs)?;
    let diff = fit.exact.expect("fit keeps the exact polynomial").sub(&volume)?;
    let coeffs = diff.univariate_coeffs()?;
    let mut ladder = Vec::new();
    for (d, c) in coeffs.iter().enumerate().rev() {
        if num_traits::Zero::is_zero(c) {
            continue;
        }
        ladder.push(LadderTerm {
            exponent: d.to_string(),
            exponent_value: d as f64,
            coefficient: rat_to_f64(c),
            error: 0.0,
            exact: Some(c.to_string()),
        });
    }
    Ok(AsymptoticExpansion {
        polytope: p.describe(),
        symbol: f.to_string(),
        kind,
        k,
        j: None,
        ladder,
        insignificant: Vec::new(),
        constant: 0.0,
        constant_error: 0.0,
        schedule: Vec::new(),
        residual: None,
        truncated_at: None,
    })
}

impl AsymptoticExpansion {
    /// Drops every ladder term below `N^d`; the residual then carries the
    /// largest dropped exponent.
    pub fn truncate(&self, d: f64) -> AsymptoticExpansion {
        let mut out = self.clone();
        let (kept, dropped): (Vec<LadderTerm>, Vec<LadderTerm>) =
            self.ladder.iter().cloned().partition(|t| t.exponent_value >= d);
        out.ladder = kept;
        out.truncated_at = Some(d);
        let drop_constant = d > 0.0;
        if drop_constant {
            out.constant = 0.0;
            out.constant_error = 0.0;
        }
        if let Some(res) = &self.residual {
            let mut samples = res.samples.clone();
            for s in &mut samples {
                let x = s.n as f64;
                for t in &dropped {
                    s.value += t.coefficient * x.powf(t.exponent_value);
                    s.error += t.error * x.powf(t.exponent_value);
                }
                if drop_constant {
                    s.value += self.constant;
                    s.error += self.constant_error;
                }
            }
            let mut predicted = res.predicted_slope;
            for t in &dropped {
                predicted = predicted.max(t.exponent_value);
            }
            if drop_constant {
                predicted = predicted.max(0.0);
            }
            out.residual = Some(Residual {
                observed_slope: slope(&samples),
                samples,
                predicted_slope: predicted,
            });
        }
        out
    }

    /// `Σ a_d N^d + C`.
    pub fn evaluate(&self, n: f64) -> f64 {
        self.ladder.iter().map(|t| t.coefficient * n.powf(t.exponent_value)).sum::<f64>() + self.constant
    }
}

/// Geometric limit of the residual samples, for diagnostics.
pub fn residual_limit(res: &Residual) -> Result<(f64, f64)> {
    extrapolate(&res.samples, res.predicted_slope, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polytope::catalog;

    #[test]
    fn polynomial_expansion_is_fit_minus_volume() {
        let f = SymbolExpr::parse("1", Some(2)).unwrap();
        let e = expand(&catalog::square(), &f, 3, None, OperatorKind::Unweighted, &ExpandOptions::default()).unwrap();
        let exps: Vec<&str> = e.ladder.iter().map(|t| t.exponent.as_str()).collect();
        assert_eq!(exps, vec!["1", "0"]);
        assert_eq!(e.ladder[0].exact.as_deref(), Some("4"));
        assert_eq!(e.ladder[1].exact.as_deref(), Some("1"));
        assert_eq!(e.constant, 0.0);
    }

    #[test]
    fn bracket_expansion_residual() {
        let f = SymbolExpr::parse("<x>^-2", Some(1)).unwrap();
        let e = expand(&catalog::interval(), &f, 4, None, OperatorKind::Unweighted, &ExpandOptions::default()).unwrap();
        // interval: the two boundary terms cancel pairwise in odd orders, the
        // leading correction is b_1 (f(N) + f(-N)) ~ N^-2
        assert_eq!(e.ladder[0].exponent, "-2");
        assert!((e.ladder[0].coefficient - 1.0).abs() < 1e-8, "{:?}", e.ladder[0]);
        let pi = std::f64::consts::PI;
        assert!((e.constant - (pi / pi.tanh() - pi)).abs() < 1e-9);
        let res = e.residual.as_ref().unwrap();
        // the residual is O(N^predicted) up to the sample errors
        for w in res.samples.windows(2) {
            let shrink = 2f64.powf(res.predicted_slope);
            assert!(w[1].value.abs() <= w[0].value.abs() * shrink + w[1].error, "{w:?}");
        }
        for w in e.ladder.windows(2) {
            assert!(w[0].exponent_value > w[1].exponent_value);
        }
    }

    #[test]
    fn truncation_moves_residual_slope() {
        let f = SymbolExpr::parse("<x>^-2", Some(1)).unwrap();
        let e = expand(&catalog::interval(), &f, 4, None, OperatorKind::Unweighted, &ExpandOptions::default()).unwrap();
        let t = e.truncate(-3.0);
        let res = t.residual.unwrap();
        let slope = res.observed_slope.unwrap();
        assert!((slope - res.predicted_slope).abs() < 0.2, "{slope} vs {}", res.predicted_slope);
    }

    #[test]
    fn collisions_are_rejected() {
        assert!(check_collisions(&[8, 16, 32, 64], &[-1.0, -1.0 - 1e-12], 1e8).is_err());
        assert!(check_collisions(&[8, 16, 32, 64], &[-1.0, -2.0], 1e8).is_ok());
    }
}
