//! Lattice points of `N·Δ` and the weighted sums `p_w(N, f)`.
//!
//! Points are found by scanning the integer bounding box of `N·Δ`, one slab
//! of the first coordinate per task. Sums are split by the number of tight
//! facets so that both weightings come out of a single pass.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{MultiPoly, Rational};
use crate::polytope::Polytope;
use crate::symbols::Density;
use crate::todd::OperatorKind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticePointRecord {
    pub point: Vec<i64>,
    pub tight_count: usize,
}

impl LatticePointRecord {
    pub fn weight(&self, kind: OperatorKind) -> f64 {
        match kind {
            OperatorKind::Unweighted => 1.0,
            OperatorKind::Half => 0.5f64.powi(self.tight_count as i32),
        }
    }
}

/// `2^{-k}` for the half kind, 1 otherwise.
pub fn exact_weight(kind: OperatorKind, tight: usize) -> Rational {
    match kind {
        OperatorKind::Unweighted => Rational::from_integer(1.into()),
        OperatorKind::Half => Rational::new(1.into(), BigInt::from(1) << tight),
    }
}

/// Calls `visit(point, tight_count)` for every lattice point of the slab
/// `x_1 = first` of `N·Δ`, in lexicographic order.
fn scan_slab<F: FnMut(&[i64], usize)>(p: &Polytope, scale: i64, lo: &[i64], hi: &[i64], first: i64, mut visit: F) {
    let n = p.dim();
    let facets = p.facets();
    let mut x = lo.to_vec();
    x[0] = first;
    loop {
        let mut inside = true;
        let mut tight = 0;
        for f in facets {
            let v: i64 = f.u.iter().zip(&x).map(|(a, b)| a * b).sum::<i64>() + scale * f.a;
            if v < 0 {
                inside = false;
                break;
            }
            if v == 0 {
                tight += 1;
            }
        }
        if inside {
            visit(&x, tight);
        }
        // odometer over coordinates 1..n, last fastest
        let mut d = n;
        loop {
            if d == 1 {
                return;
            }
            d -= 1;
            if x[d] < hi[d] {
                x[d] += 1;
                for e in d + 1..n {
                    x[e] = lo[e];
                }
                break;
            }
        }
    }
}

fn check_scale(scale: i64) -> Result<()> {
    if scale < 1 {
        return Err(Error::InvalidArgument(format!("N must be >= 1, got {scale}")));
    }
    Ok(())
}

/// All lattice points of `N·Δ` in lexicographic order.
pub fn enumerate(p: &Polytope, scale: i64) -> Result<Vec<LatticePointRecord>> {
    check_scale(scale)?;
    let (lo, hi) = p.bounding_box(scale);
    let slabs: Vec<Vec<LatticePointRecord>> = (lo[0]..=hi[0])
        .into_par_iter()
        .map(|first| {
            let mut out = Vec::new();
            scan_slab(p, scale, &lo, &hi, first, |x, t| {
                out.push(LatticePointRecord {
                    point: x.to_vec(),
                    tight_count: t,
                })
            });
            out
        })
        .collect();
    Ok(slabs.into_iter().flatten().collect())
}

/// Exact sums `Σ f(ℓ)` grouped by tight count `0..=n`.
pub fn exact_sums_by_tight(p: &Polytope, scale: i64, f: &MultiPoly) -> Result<Vec<Rational>> {
    check_scale(scale)?;
    let n = p.dim();
    if f.nvars() != n {
        return Err(Error::VariableMismatch(format!(
            "polynomial has {} variables, polytope dimension is {n}",
            f.nvars()
        )));
    }
    // clear denominators so that every point is evaluated in integers
    let denom = f.terms().fold(BigInt::from(1), |acc, (_, c)| acc.lcm(c.denom()));
    let int_terms: Vec<(Vec<u32>, BigInt)> = f
        .terms()
        .map(|(e, c)| (e.clone(), (c * Rational::from_integer(denom.clone())).to_integer()))
        .collect();
    let small: Option<Vec<(Vec<u32>, i128)>> = int_terms
        .iter()
        .map(|(e, c)| c.to_i128().map(|v| (e.clone(), v)))
        .collect();
    let (lo, hi) = p.bounding_box(scale);
    let slabs: Vec<Vec<BigInt>> = (lo[0]..=hi[0])
        .into_par_iter()
        .map(|first| {
            let mut acc = vec![BigInt::zero(); n + 1];
            scan_slab(p, scale, &lo, &hi, first, |x, t| {
                let v: BigInt = match &small {
                    Some(terms) => {
                        let s: i128 = terms
                            .iter()
                            .map(|(e, c)| {
                                e.iter()
                                    .zip(x)
                                    .fold(*c, |a, (&k, &xi)| a * (xi as i128).pow(k))
                            })
                            .sum();
                        BigInt::from(s)
                    }
                    None => int_terms
                        .iter()
                        .map(|(e, c)| {
                            e.iter()
                                .zip(x)
                                .fold(c.clone(), |a, (&k, &xi)| a * BigInt::from(xi).pow(k))
                        })
                        .sum(),
                };
                acc[t] += v;
            });
            acc
        })
        .collect();
    let mut totals = vec![BigInt::zero(); n + 1];
    for s in slabs {
        for (t, v) in totals.iter_mut().zip(s) {
            *t += v;
        }
    }
    Ok(totals
        .into_iter()
        .map(|v| Rational::new(v, denom.clone()))
        .collect())
}

/// `p_w(N, f)` exactly, for polynomial `f`.
pub fn weighted_sum_exact(p: &Polytope, scale: i64, f: &MultiPoly, kind: OperatorKind) -> Result<Rational> {
    let by_tight = exact_sums_by_tight(p, scale, f)?;
    Ok(combine_exact(&by_tight, kind))
}

pub fn combine_exact(by_tight: &[Rational], kind: OperatorKind) -> Rational {
    by_tight
        .iter()
        .enumerate()
        .fold(Rational::zero(), |acc, (t, v)| acc + v * exact_weight(kind, t))
}

#[derive(Debug, Clone, Copy, Default)]
struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    fn add(&mut self, v: f64) {
        let y = v - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
    }
}

/// Float sums `Σ F(ℓ)` grouped by tight count, reduced slab by slab in
/// lexicographic order.
pub fn sums_by_tight(p: &Polytope, scale: i64, density: &Density) -> Result<Vec<f64>> {
    check_scale(scale)?;
    let n = p.dim();
    if density.dim != n {
        return Err(Error::VariableMismatch(format!(
            "symbol has {} variables, polytope dimension is {n}",
            density.dim
        )));
    }
    let (lo, hi) = p.bounding_box(scale);
    let slabs: Vec<Vec<Kahan>> = (lo[0]..=hi[0])
        .into_par_iter()
        .map(|first| {
            let mut acc = vec![Kahan::default(); n + 1];
            let mut xf = vec![0.0; n];
            scan_slab(p, scale, &lo, &hi, first, |x, t| {
                for (a, b) in xf.iter_mut().zip(x) {
                    *a = *b as f64;
                }
                acc[t].add(density.value(&xf));
            });
            acc
        })
        .collect();
    let mut totals = vec![Kahan::default(); n + 1];
    for s in slabs {
        for (t, v) in totals.iter_mut().zip(s) {
            t.add(v.sum);
            t.add(-v.comp);
        }
    }
    Ok(totals.iter().map(|k| k.sum).collect())
}

pub fn combine_float(by_tight: &[f64], kind: OperatorKind) -> f64 {
    let mut k = Kahan::default();
    for (t, v) in by_tight.iter().enumerate() {
        k.add(match kind {
            OperatorKind::Unweighted => *v,
            OperatorKind::Half => v * 0.5f64.powi(t as i32),
        });
    }
    k.sum
}

/// `p_w(N, F)` in floating point.
pub fn weighted_sum(p: &Polytope, scale: i64, density: &Density, kind: OperatorKind) -> Result<f64> {
    Ok(combine_float(&sums_by_tight(p, scale, density)?, kind))
}

/// `Σ_{‖ℓ‖∞ <= R} F(ℓ)` over the full lattice cube in dimension `n`.
pub fn cube_sum<F>(n: usize, radius: i64, f: &F) -> f64
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let slabs: Vec<Kahan> = (-radius..=radius)
        .into_par_iter()
        .map(|first| {
            let mut acc = Kahan::default();
            let mut x = vec![-radius as f64; n];
            x[0] = first as f64;
            loop {
                acc.add(f(&x));
                let mut d = n;
                loop {
                    if d == 1 {
                        return acc;
                    }
                    d -= 1;
                    if x[d] < radius as f64 {
                        x[d] += 1.0;
                        for e in x.iter_mut().skip(d + 1) {
                            *e = -radius as f64;
                        }
                        break;
                    }
                }
            }
        })
        .collect();
    let mut total = Kahan::default();
    for s in slabs {
        total.add(s.sum);
        total.add(-s.comp);
    }
    total.sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::rat;
    use crate::polytope::catalog;
    use crate::symbols::{parse_polynomial, SymbolExpr};

    #[test]
    fn enumerate_examples() {
        assert_eq!(enumerate(&catalog::square(), 2).unwrap().len(), 25);
        let iv = enumerate(&catalog::interval(), 5).unwrap();
        assert_eq!(iv.len(), 11);
        assert_eq!(iv.iter().filter(|r| r.tight_count == 1).count(), 2);
        assert_eq!(enumerate(&catalog::triangle(), 1).unwrap().len(), 10);
        let pts = enumerate(&catalog::cube(), 1).unwrap();
        assert_eq!(pts.len(), 27);
        assert!(pts.windows(2).all(|w| w[0].point < w[1].point));
        assert!(enumerate(&catalog::square(), 0).is_err());
    }

    #[test]
    fn weighted_sum_examples() {
        let sq = catalog::square();
        let one = parse_polynomial("1", Some(2)).unwrap();
        assert_eq!(weighted_sum_exact(&sq, 2, &one, OperatorKind::Unweighted).unwrap(), rat(25));
        assert_eq!(weighted_sum_exact(&sq, 2, &one, OperatorKind::Half).unwrap(), rat(16));
        let x2 = parse_polynomial("x1^2", Some(1)).unwrap();
        assert_eq!(
            weighted_sum_exact(&catalog::interval(), 5, &x2, OperatorKind::Unweighted).unwrap(),
            rat(110)
        );
        let d = SymbolExpr::parse("1", Some(2)).unwrap().density(None);
        assert_eq!(weighted_sum(&sq, 2, &d, OperatorKind::Half).unwrap(), 16.0);
    }

    #[test]
    fn square_counts_closed_forms() {
        let sq = catalog::square();
        let one = parse_polynomial("1", Some(2)).unwrap();
        for n in 1..=32i64 {
            let by = exact_sums_by_tight(&sq, n, &one).unwrap();
            assert_eq!(combine_exact(&by, OperatorKind::Unweighted), rat((2 * n + 1).pow(2)));
            assert_eq!(combine_exact(&by, OperatorKind::Half), rat(4 * n * n));
        }
    }

    #[test]
    fn exact_and_float_paths_agree() {
        let tri = catalog::triangle();
        let text = "1/3*x1^2*x2 - x2 + 7/2";
        let exact = parse_polynomial(text, Some(2)).unwrap();
        let d = SymbolExpr::parse(text, Some(2)).unwrap().density(None);
        for kind in OperatorKind::both() {
            let e = crate::poly::rat_to_f64(&weighted_sum_exact(&tri, 6, &exact, kind).unwrap());
            let f = weighted_sum(&tri, 6, &d, kind).unwrap();
            assert!((e - f).abs() <= 1e-12 * e.abs());
        }
    }

    #[test]
    fn cube_sum_small() {
        let d = SymbolExpr::parse("x1^2 + 1", Some(2)).unwrap().density(None);
        // Σ_{|a|,|b|<=2} (a^2 + 1) = 5 * (10 + 5)
        assert_eq!(cube_sum(2, 2, &|x: &[f64]| d.value(x)), 75.0);
    }
}
