//! The parametrized integral `p̃(t, h, f) = ∫_{Δ_{t,h}} f`.
//!
//! Polynomials are integrated exactly over the parametric fan. For symbols,
//! `h`-derivatives at `h = 0` are obtained by differentiating under the
//! integral sign: each simplex is pulled back to its position at `h = 0`,
//! the integrand `det E(h)/det E(0) · f(x(λ; h))` is expanded as a Taylor jet
//! in `h` at every quadrature node, and the jets are integrated.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::JetSpace;
use crate::linalg;
use crate::poly::{factorial, rat, rat_to_f64, MultiPoly, Rational};
use crate::polytope::{ParametricSimplex, Polytope};
use crate::quadrature::{box_simplices, centered_cube_simplices, refine_annulus, integrate_simplices, QuadResult, QuadratureSpec};
use crate::symbols::{Density, SymbolExpr};

/// `∫_{std simplex} y^β dy = ∏ β_i! / (|β| + n)!`.
pub fn simplex_monomial(beta: &[u32]) -> Rational {
    let num = beta.iter().fold(num_bigint::BigInt::one(), |acc, &b| acc * factorial(b));
    let deg: u32 = beta.iter().sum::<u32>() + beta.len() as u32;
    Rational::new(num, factorial(deg))
}

/// `p̃(t, h, f)` exactly, as a polynomial over `(t, h_1..h_m)`.
pub fn exact_ptilde(p: &Polytope, f: &MultiPoly) -> Result<MultiPoly> {
    let n = p.dim();
    if f.nvars() != n {
        return Err(Error::VariableMismatch(format!(
            "symbol has {} variables, polytope dimension is {n}",
            f.nvars()
        )));
    }
    let th = p.th_labels();
    let mut all = th.clone();
    all.extend(MultiPoly::labels("y", n));
    let width = th.len();
    let mut total = MultiPoly::zero(&th);
    for simplex in p.triangulate()? {
        let verts: Vec<Vec<MultiPoly>> = simplex
            .vertices
            .iter()
            .map(|v| {
                v.to_polys(&th)
                    .iter()
                    .map(|q| q.embed(&all))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        let mut x = verts[0].clone();
        for (i, v) in verts[1..].iter().enumerate() {
            let y = MultiPoly::var(&all, width + i);
            for d in 0..n {
                let edge = v[d].sub(&verts[0][d])?;
                x[d] = x[d].add(&edge.mul(&y)?)?;
            }
        }
        let composed = f.compose(&x)?;
        let mut integrated = MultiPoly::zero(&th);
        for (e, c) in composed.terms() {
            let w = simplex_monomial(&e[width..]);
            integrated.add_term(e[..width].to_vec(), c * w);
        }
        let det = simplex.signed_det_poly(&th);
        total = total.add(&integrated.mul(&det)?)?;
    }
    Ok(total)
}

/// Exact `∂^γ_h p̃(N, 0)` for `|γ| <= k`, in the jet order of `JetSpace::new(m, k)`.
pub fn exact_h_derivs(ptilde: &MultiPoly, n_scale: i64, k: usize) -> Vec<Rational> {
    let m = ptilde.nvars() - 1;
    let space = JetSpace::new(m, k);
    let mut out = vec![Rational::zero(); space.len()];
    let nr = rat(n_scale);
    for (e, c) in ptilde.terms() {
        if let Some(i) = space.index_of(&e[1..]) {
            let gf = e[1..].iter().fold(num_bigint::BigInt::one(), |acc, &g| acc * factorial(g));
            out[i] += c * num_traits::pow(nr.clone(), e[0] as usize) * Rational::from_integer(gf);
        }
    }
    out
}

/// Taylor coefficients `∂^γ p̃(N, 0) / γ!` with an error estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HJet {
    pub m: usize,
    pub k: usize,
    pub coeffs: Vec<f64>,
    pub error: f64,
    pub regions: usize,
}

impl HJet {
    pub fn space(&self) -> JetSpace {
        JetSpace::new(self.m, self.k)
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// `∂^γ p̃(N, 0)`.
    pub fn derivative(&self, gamma: &[u32]) -> Option<f64> {
        let i = self.space().index_of(gamma)?;
        let gf: f64 = gamma
            .iter()
            .map(|&g| (1..=g).map(|v| v as f64).product::<f64>())
            .product();
        Some(self.coeffs[i] * gf)
    }
}

/// Geometry of one fan simplex at `(t, h) = (N, 0)` together with the
/// `h`-velocity of each vertex.
struct SimplexFrame {
    vertices: Vec<Vec<f64>>,
    /// inverse of the edge matrix `[v_1 - v_0, ..., v_n - v_0]`
    inverse: Vec<Vec<f64>>,
    /// `velocity[i][d][j] = ∂ v_i,d / ∂ h_j`
    velocity: Vec<Vec<Vec<f64>>>,
    det_ratio: Vec<f64>,
}

fn jet_det(space: &JetSpace, m: &[Vec<Vec<f64>>]) -> Vec<f64> {
    let n = m.len();
    if n == 1 {
        return m[0][0].clone();
    }
    let mut acc = space.zero();
    for c in 0..n {
        let minor: Vec<Vec<Vec<f64>>> = m[1..]
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(j, _)| *j != c)
                    .map(|(_, v)| v.clone())
                    .collect()
            })
            .collect();
        let term = space.mul(&m[0][c], &jet_det(space, &minor));
        let sign = if c % 2 == 0 { 1.0 } else { -1.0 };
        for (a, t) in acc.iter_mut().zip(&term) {
            *a += sign * t;
        }
    }
    acc
}

impl SimplexFrame {
    fn new(simplex: &ParametricSimplex, scale: i64, space: &JetSpace) -> Result<Self> {
        let n = simplex.vertices[0].t.len();
        let scale_r = rat(scale);
        let vertices: Vec<Vec<f64>> = simplex
            .vertices
            .iter()
            .map(|v| v.t.iter().map(|c| rat_to_f64(&(c * &scale_r))).collect())
            .collect();
        let velocity: Vec<Vec<Vec<f64>>> = simplex
            .vertices
            .iter()
            .map(|v| v.h.iter().map(|row| row.iter().map(rat_to_f64).collect()).collect())
            .collect();
        let edges: linalg::Matrix = (0..n)
            .map(|d| {
                simplex.vertices[1..]
                    .iter()
                    .map(|v| (&v.t[d] - &simplex.vertices[0].t[d]) * &scale_r)
                    .collect()
            })
            .collect();
        let inv = linalg::inverse(&edges).ok_or_else(|| Error::SingularVertexSystem {
            facets: simplex.vertex_indices.clone(),
        })?;
        let det0 = rat_to_f64(&linalg::determinant(&edges));
        let m = space.vars();
        let entries: Vec<Vec<Vec<f64>>> = (0..n)
            .map(|d| {
                (1..=n)
                    .map(|i| {
                        let mut jet = space.constant(vertices[i][d] - vertices[0][d]);
                        for j in 0..m {
                            if let Some(idx) = space.linear_index(j) {
                                jet[idx] = velocity[i][d][j] - velocity[0][d][j];
                            }
                        }
                        jet
                    })
                    .collect()
            })
            .collect();
        let det_ratio = jet_det(space, &entries).iter().map(|v| v / det0).collect();
        Ok(SimplexFrame {
            vertices,
            inverse: inv
                .iter()
                .map(|row| row.iter().map(rat_to_f64).collect())
                .collect(),
            velocity,
            det_ratio,
        })
    }

    fn integrand(&self, space: &JetSpace, density: &Density, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let rel: Vec<f64> = x.iter().zip(&self.vertices[0]).map(|(a, b)| a - b).collect();
        let mut lambda = vec![0.0; n + 1];
        for i in 0..n {
            lambda[i + 1] = self.inverse[i].iter().zip(&rel).map(|(a, b)| a * b).sum();
        }
        lambda[0] = 1.0 - lambda[1..].iter().sum::<f64>();
        let m = space.vars();
        let xj: Vec<Vec<f64>> = (0..n)
            .map(|d| {
                let mut jet = space.constant(x[d]);
                for j in 0..m {
                    if let Some(idx) = space.linear_index(j) {
                        jet[idx] = lambda
                            .iter()
                            .zip(&self.velocity)
                            .map(|(l, v)| l * v[d][j])
                            .sum();
                    }
                }
                jet
            })
            .collect();
        let f = density.jet(space, &xj);
        if space.order() == 0 {
            f
        } else {
            space.mul(&f, &self.det_ratio)
        }
    }
}

/// `∂^γ_h p̃(N, 0, F) / γ!` for `|γ| <= k` by differentiating under the integral.
pub fn quad_h_jet(
    p: &Polytope,
    density: &Density,
    scale: i64,
    k: usize,
    spec: &QuadratureSpec,
) -> Result<HJet> {
    if density.dim != p.dim() {
        return Err(Error::VariableMismatch(format!(
            "symbol has {} variables, polytope dimension is {}",
            density.dim,
            p.dim()
        )));
    }
    let space = JetSpace::new(p.num_facets(), k);
    let frames: Vec<SimplexFrame> = p
        .triangulate()?
        .iter()
        .map(|s| SimplexFrame::new(s, scale, &space))
        .collect::<Result<_>>()?;
    let parts: Vec<QuadResult> = frames
        .iter()
        .map(|fr| {
            // resolve the cutoff transition up front; adaptivity alone is slow
            // to find it and its error estimate misjudges it. The density
            // vanishes identically inside the unit ball.
            let pieces = if density.cutoff {
                refine_annulus(&fr.vertices, 1.0, 2.0, 0.25)
            } else {
                vec![fr.vertices.clone()]
            };
            integrate_simplices(
                &pieces,
                space.len(),
                &|x: &[f64]| fr.integrand(&space, density, x),
                spec,
            )
        })
        .collect();
    let r = crate::quadrature::combine(space.len(), &parts);
    if !r.converged {
        return Err(Error::ToleranceNotMet {
            value: r.values[0],
            estimate: r.error,
        });
    }
    Ok(HJet {
        m: space.vars(),
        k,
        coeffs: r.values,
        error: r.error,
        regions: r.regions,
    })
}

/// Jet of `h`-derivatives for a symbol with an optional gauge shift.
pub fn quad_h_derivs(
    p: &Polytope,
    f: &SymbolExpr,
    scale: i64,
    k: usize,
    gauge: Option<f64>,
    spec: &QuadratureSpec,
) -> Result<HJet> {
    quad_h_jet(p, &f.density(gauge), scale, k, spec)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadValue {
    pub value: f64,
    pub error: f64,
}

/// `p̃(N, 0, f) = ∫_{NΔ} f`.
pub fn quad_ptilde(
    p: &Polytope,
    f: &SymbolExpr,
    scale: i64,
    gauge: Option<f64>,
    spec: &QuadratureSpec,
) -> Result<QuadValue> {
    let j = quad_h_derivs(p, f, scale, 0, gauge, spec)?;
    Ok(QuadValue {
        value: j.coeffs[0],
        error: j.error,
    })
}

/// `∫_{[lo, hi]} F`, split at the origin so that singular or peaked
/// behaviour there sits on simplex corners.
pub fn box_integral<F>(f: &F, lo: &[f64], hi: &[f64], spec: &QuadratureSpec) -> Result<QuadValue>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    // the cutoff switches on over 1 <= |x| <= 2 and fools the error estimate
    // unless the mesh resolves it
    let edge = hi.first().copied().unwrap_or(0.0);
    let centered = lo.iter().zip(hi).all(|(a, b)| *a == -edge && *b == edge);
    let simplices = if centered && edge > 0.0 {
        centered_cube_simplices(lo.len(), edge)
    } else {
        let center: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0f64.clamp(*a, *b)).collect();
        box_simplices(lo, hi, &center)
    };
    let r = integrate_simplices(&simplices, 1, &|x: &[f64]| vec![f(x)], spec);
    if !r.converged {
        return Err(Error::ToleranceNotMet {
            value: r.values[0],
            estimate: r.error,
        });
    }
    Ok(QuadValue {
        value: r.values[0],
        error: r.error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::ratio;
    use crate::polytope::catalog;
    use crate::symbols::parse_polynomial;

    #[test]
    fn simplex_monomials() {
        assert_eq!(simplex_monomial(&[0]), rat(1));
        assert_eq!(simplex_monomial(&[1]), ratio(1, 2));
        assert_eq!(simplex_monomial(&[1, 1]), ratio(1, 24));
        assert_eq!(simplex_monomial(&[0, 0, 0]), ratio(1, 6));
    }

    #[test]
    fn exact_ptilde_examples() {
        let iv = catalog::interval();
        let one = parse_polynomial("1", Some(1)).unwrap();
        assert_eq!(exact_ptilde(&iv, &one).unwrap().to_string(), "2t + h1 + h2");
        let sq = parse_polynomial("x1^2", Some(1)).unwrap();
        let got = exact_ptilde(&iv, &sq).unwrap();
        let th = iv.th_labels();
        let t = MultiPoly::var(&th, 0);
        let expect = t
            .add(&MultiPoly::var(&th, 1))
            .unwrap()
            .pow(3)
            .add(&t.add(&MultiPoly::var(&th, 2)).unwrap().pow(3))
            .unwrap()
            .scale(&ratio(1, 3));
        assert_eq!(got, expect);
        let square = catalog::square();
        let area = exact_ptilde(&square, &parse_polynomial("1", Some(2)).unwrap()).unwrap();
        let at = area
            .evaluate_rational(&[rat(1), rat(0), rat(0), rat(0), rat(0)])
            .unwrap();
        assert_eq!(at, rat(4));
    }

    #[test]
    fn quad_ptilde_examples() {
        let spec = QuadratureSpec::default();
        let iv = catalog::interval();
        let f = SymbolExpr::parse("<x>^-2", Some(1)).unwrap();
        let v = quad_ptilde(&iv, &f, 10, None, &spec).unwrap().value;
        assert!((v - 2.0 * 10f64.atan()).abs() < 1e-10);
        let one = SymbolExpr::parse("1", Some(2)).unwrap();
        let v = quad_ptilde(&catalog::square(), &one, 3, None, &spec).unwrap().value;
        assert!((v - 36.0).abs() < 1e-10);
        let sq = SymbolExpr::parse("x1^2", Some(1)).unwrap();
        let v = quad_ptilde(&iv, &sq, 5, None, &spec).unwrap().value;
        assert!((v - 250.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn quad_h_derivs_examples() {
        let spec = QuadratureSpec::default();
        let iv = catalog::interval();
        let one = SymbolExpr::parse("1", Some(1)).unwrap();
        let j = quad_h_derivs(&iv, &one, 4, 3, None, &spec).unwrap();
        assert!((j.derivative(&[1, 0]).unwrap() - 1.0).abs() < 1e-12);
        assert!((j.derivative(&[0, 1]).unwrap() - 1.0).abs() < 1e-12);
        for g in [[2, 0], [1, 1], [0, 2], [3, 0]] {
            assert!(j.derivative(&g).unwrap().abs() < 1e-12);
        }
        let sq = SymbolExpr::parse("x1^2", Some(1)).unwrap();
        let n = 7.0;
        let j = quad_h_derivs(&iv, &sq, 7, 3, None, &spec).unwrap();
        assert!((j.derivative(&[1, 0]).unwrap() - n * n).abs() < 1e-9);
        assert!((j.derivative(&[2, 0]).unwrap() - 2.0 * n).abs() < 1e-9);
        assert!(j.derivative(&[1, 1]).unwrap().abs() < 1e-9);
    }

    #[test]
    fn quad_matches_exact_on_triangle() {
        let spec = QuadratureSpec::default();
        let tri = catalog::triangle();
        let text = "x1^2*x2 - 3*x2 + 1";
        let exact = exact_ptilde(&tri, &parse_polynomial(text, Some(2)).unwrap()).unwrap();
        let f = SymbolExpr::parse(text, Some(2)).unwrap();
        let k = 5;
        let want = exact_h_derivs(&exact, 2, k);
        let got = quad_h_derivs(&tri, &f, 2, k, None, &spec).unwrap();
        let space = got.space();
        let scale = want.iter().map(|w| rat_to_f64(w).abs()).fold(0.0, f64::max);
        for (i, g) in space.monomials().iter().enumerate() {
            let d = got.derivative(g).unwrap();
            assert!((d - rat_to_f64(&want[i])).abs() <= 1e-10 * scale, "{g:?}");
        }
    }

    #[test]
    fn box_integral_of_decaying_density() {
        let spec = QuadratureSpec::default();
        let f = SymbolExpr::parse("<x>^-4", Some(2)).unwrap();
        let d = f.density(None);
        let v = box_integral(&|x: &[f64]| d.value(x), &[-20.0, -20.0], &[20.0, 20.0], &spec).unwrap();
        // ∫_{R^2} ⟨x⟩^-4 = π; the corners outside the box carry less than 1e-2
        assert!((v.value - std::f64::consts::PI).abs() < 1e-2);
        assert!(v.value < std::f64::consts::PI);
    }
}
