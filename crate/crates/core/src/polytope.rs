//! Integral simple polytopes in H-representation `x·u_i + a_i >= 0`.
//!
//! Validation derives the vertices by exact rational solves over all
//! `n`-subsets of facets, then the primitive edge generators at each vertex.
//! The facet order given by the caller fixes the order of the shift
//! variables `h_1..h_m` everywhere downstream.

use std::collections::BTreeSet;

use itertools::Itertools;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::poly::{factorial, rat, rat_to_f64, MultiPoly, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HalfSpace {
    pub u: Vec<i64>,
    pub a: i64,
}

impl HalfSpace {
    pub fn new(u: Vec<i64>, a: i64) -> Self {
        HalfSpace { u, a }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexData {
    pub point: Vec<i64>,
    /// Sorted indices of the `n` facets tight at this vertex.
    pub tight_facets: Vec<usize>,
    /// `edge_generators[i]` leaves facet `tight_facets[i]` and stays on the others.
    pub edge_generators: Vec<Vec<i64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    dim: usize,
    facets: Vec<HalfSpace>,
    vertices: Vec<VertexData>,
}

/// On-disk form: `{"dim": n, "facets": [{"u": [..], "a": k}, ...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolytopeFile {
    pub dim: usize,
    pub facets: Vec<HalfSpace>,
}

fn rat_point(p: &[Rational]) -> Vec<String> {
    p.iter().map(|x| x.to_string()).collect()
}

impl Polytope {
    /// Validates an H-representation and derives vertex data.
    pub fn new(dim: usize, facets: Vec<HalfSpace>) -> Result<Self> {
        let m = facets.len();
        if dim == 0 || m < dim + 1 {
            return Err(Error::TooFewFacets { dim, facets: m });
        }
        for (i, f) in facets.iter().enumerate() {
            if f.u.len() != dim {
                return Err(Error::DimensionMismatch {
                    facet: i,
                    expected: dim,
                    got: f.u.len(),
                });
            }
            if linalg::gcd_slice(&f.u) != 1 {
                return Err(Error::NonPrimitiveNormal {
                    facet: i,
                    normal: f.u.clone(),
                });
            }
            if f.a < 1 {
                return Err(Error::NonPositiveOffset {
                    facet: i,
                    offset: f.a,
                });
            }
        }

        let mut seen: BTreeSet<Vec<Rational>> = BTreeSet::new();
        let mut vertices = Vec::new();
        for subset in (0..m).combinations(dim) {
            let rows: Vec<Vec<i64>> = subset.iter().map(|&i| facets[i].u.clone()).collect();
            let rhs: Vec<Rational> = subset.iter().map(|&i| rat(-facets[i].a)).collect();
            let x = match linalg::solve(&linalg::from_int_rows(&rows), &rhs) {
                Some(x) => x,
                None => continue,
            };
            let slacks: Vec<Rational> = facets.iter().map(|f| slack(f, &x)).collect();
            if slacks.iter().any(|s| s.is_negative()) || !seen.insert(x.clone()) {
                continue;
            }
            let tight: Vec<usize> = (0..m).filter(|&i| slacks[i].is_zero()).collect();
            if tight.len() != dim {
                return Err(Error::NonSimpleVertex {
                    point: rat_point(&x),
                    tight: tight.len(),
                    dim,
                });
            }
            if x.iter().any(|c| !c.is_integer()) {
                return Err(Error::NonIntegralVertex { point: rat_point(&x) });
            }
            let point: Vec<i64> = x
                .iter()
                .map(|c| i64::try_from(c.to_integer()).expect("vertex coordinate fits in i64"))
                .collect();
            let rows: Vec<Vec<i64>> = tight.iter().map(|&i| facets[i].u.clone()).collect();
            let inv = linalg::inverse(&linalg::from_int_rows(&rows))
                .ok_or_else(|| Error::SingularVertexSystem { facets: tight.clone() })?;
            let edge_generators = (0..dim)
                .map(|col| {
                    let c: Vec<Rational> = inv.iter().map(|row| row[col].clone()).collect();
                    linalg::primitive_direction(&c)
                })
                .collect();
            vertices.push(VertexData {
                point,
                tight_facets: tight,
                edge_generators,
            });
        }
        if vertices.is_empty() {
            return Err(Error::Unbounded);
        }
        vertices.sort_by(|a, b| a.tight_facets.cmp(&b.tight_facets));

        // every edge ray must leave through some facet
        for v in &vertices {
            for g in &v.edge_generators {
                if facets.iter().all(|f| linalg::dot_int(&f.u, g) >= 0) {
                    return Err(Error::Unbounded);
                }
            }
        }
        for i in 0..m {
            let count = vertices.iter().filter(|v| v.tight_facets.contains(&i)).count();
            if count < dim {
                return Err(Error::RedundantFacet { facet: i });
            }
        }
        Ok(Polytope {
            dim,
            facets,
            vertices,
        })
    }

    /// Parses and validates the JSON polytope format. Floats are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: PolytopeFile = serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::new(file.dim, file.facets)
    }

    pub fn to_file(&self) -> PolytopeFile {
        PolytopeFile {
            dim: self.dim,
            facets: self.facets.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn facets(&self) -> &[HalfSpace] {
        &self.facets
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn vertices(&self) -> &[VertexData] {
        &self.vertices
    }

    /// Variable labels `t, h1..hm` for polynomials in the deformation parameters.
    pub fn th_labels(&self) -> Vec<String> {
        let mut v = vec!["t".to_string()];
        v.extend(MultiPoly::labels("h", self.facets.len()));
        v
    }

    /// True iff every vertex cone is unimodular.
    pub fn is_regular(&self) -> bool {
        self.vertices.iter().all(|v| {
            let d = linalg::int_determinant(&v.edge_generators);
            d.abs().is_one()
        })
    }

    /// Facets tight at `point` in `N·P`.
    pub fn tight_facets(&self, point: &[i64], scale: i64) -> Result<Vec<usize>> {
        let mut out = Vec::new();
        for (i, f) in self.facets.iter().enumerate() {
            let s = linalg::dot_int(&f.u, point) + scale * f.a;
            if s < 0 {
                return Err(Error::PointOutside {
                    point: point.to_vec(),
                    scale,
                    facet: i,
                });
            }
            if s == 0 {
                out.push(i);
            }
        }
        Ok(out)
    }

    /// Integer bounding box of `N·P`.
    pub fn bounding_box(&self, scale: i64) -> (Vec<i64>, Vec<i64>) {
        let mut lo = vec![i64::MAX; self.dim];
        let mut hi = vec![i64::MIN; self.dim];
        for v in &self.vertices {
            for d in 0..self.dim {
                lo[d] = lo[d].min(scale * v.point[d]);
                hi[d] = hi[d].max(scale * v.point[d]);
            }
        }
        (lo, hi)
    }

    pub fn polarize(&self, xi: &[i64]) -> Result<Polarization> {
        if xi.len() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "polarizing vector has length {}, expected {}",
                xi.len(),
                self.dim
            )));
        }
        let mut per_vertex = Vec::with_capacity(self.vertices.len());
        for v in &self.vertices {
            let dots: Vec<i64> = v
                .edge_generators
                .iter()
                .map(|g| linalg::dot_int(g, xi))
                .collect();
            if dots.contains(&0) {
                return Err(Error::DegeneratePolarization { xi: xi.to_vec() });
            }
            let flips: Vec<bool> = dots.iter().map(|&d| d < 0).collect();
            let flipped: Vec<Vec<i64>> = v
                .edge_generators
                .iter()
                .zip(&flips)
                .map(|(g, &f)| if f { g.iter().map(|x| -x).collect() } else { g.clone() })
                .collect();
            let ratio = flipped
                .iter()
                .zip(&dots)
                .fold(Rational::one(), |acc, (g, &d)| {
                    acc * Rational::new(linalg::dot_int(g, xi).into(), d.into())
                });
            let sign: i8 = if ratio.is_positive() { 1 } else { -1 };
            // columns are the flipped generators
            let basis: Matrix = (0..self.dim)
                .map(|r| flipped.iter().map(|g| rat(g[r])).collect())
                .collect();
            let target: Vec<Rational> = v.point.iter().map(|&c| rat(c)).collect();
            let coefficients = linalg::solve(&basis, &target)
                .ok_or_else(|| Error::SingularVertexSystem { facets: v.tight_facets.clone() })?;
            per_vertex.push(VertexPolarization {
                flips,
                flipped,
                sign,
                coefficients,
            });
        }
        let unflipped: Vec<usize> = per_vertex
            .iter()
            .enumerate()
            .filter(|(_, p)| p.flips.iter().all(|f| !f))
            .map(|(i, _)| i)
            .collect();
        let minimizer = match unflipped.as_slice() {
            [q] => *q,
            // an admissible xi always singles out one vertex
            _ => return Err(Error::DegeneratePolarization { xi: xi.to_vec() }),
        };
        Ok(Polarization {
            xi: xi.to_vec(),
            per_vertex,
            minimizer,
        })
    }

    /// Polarizes with `start`, nudging one random coordinate by +1 (up to 50
    /// times) whenever the vector is orthogonal to an edge generator.
    pub fn polarize_perturbed(&self, start: &[i64], seed: u64) -> Result<Polarization> {
        let mut xi = start.to_vec();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..=50 {
            match self.polarize(&xi) {
                Err(Error::DegeneratePolarization { .. }) => {
                    let i = rng.gen_range(0..self.dim);
                    xi[i] += 1;
                }
                other => return other,
            }
        }
        Err(Error::DegeneratePolarization { xi })
    }

    /// Vertex maps `(t, h) -> p(t, h)` solving `u_i·x = -(t a_i + h_i)` on the tight facets.
    pub fn parametric_vertices(&self) -> Result<Vec<ParametricPoint>> {
        let m = self.facets.len();
        self.vertices
            .iter()
            .map(|v| {
                let rows: Vec<Vec<i64>> = v
                    .tight_facets
                    .iter()
                    .map(|&i| self.facets[i].u.clone())
                    .collect();
                let inv = linalg::inverse(&linalg::from_int_rows(&rows))
                    .ok_or_else(|| Error::SingularVertexSystem { facets: v.tight_facets.clone() })?;
                let mut t = vec![Rational::zero(); self.dim];
                let mut h = vec![vec![Rational::zero(); m]; self.dim];
                for (d, row) in inv.iter().enumerate() {
                    for (c, &fi) in v.tight_facets.iter().enumerate() {
                        t[d] -= &row[c] * rat(self.facets[fi].a);
                        h[d][fi] -= row[c].clone();
                    }
                }
                Ok(ParametricPoint { t, h })
            })
            .collect()
    }

    /// Deterministic fan triangulation from the lexicographically smallest
    /// vertex, recursing into every facet that avoids it.
    pub fn triangulate(&self) -> Result<Vec<ParametricSimplex>> {
        let maps = self.parametric_vertices()?;
        let all: Vec<usize> = (0..self.vertices.len()).collect();
        let mut cells = Vec::new();
        self.fan(&BTreeSet::new(), &all, self.dim, &mut cells);
        let fact = Rational::from_integer(factorial(self.dim as u32));
        let simplices = cells
            .into_iter()
            .map(|idx| {
                let vertices: Vec<ParametricPoint> = idx.iter().map(|&i| maps[i].clone()).collect();
                let pts: Vec<Vec<Rational>> = idx
                    .iter()
                    .map(|&i| self.vertices[i].point.iter().map(|&c| rat(c)).collect())
                    .collect();
                let det = edge_determinant(&pts);
                let orientation: i8 = if det.is_positive() { 1 } else { -1 };
                ParametricSimplex {
                    vertex_indices: idx,
                    vertices,
                    orientation,
                    unit_volume: det.abs() / &fact,
                }
            })
            .collect();
        Ok(simplices)
    }

    fn fan(
        &self,
        face_facets: &BTreeSet<usize>,
        face_vertices: &[usize],
        face_dim: usize,
        out: &mut Vec<Vec<usize>>,
    ) {
        let apex = *face_vertices
            .iter()
            .min_by(|&&a, &&b| self.vertices[a].point.cmp(&self.vertices[b].point))
            .expect("faces are nonempty");
        if face_dim == 0 {
            out.push(vec![apex]);
            return;
        }
        for j in 0..self.facets.len() {
            if face_facets.contains(&j) {
                continue;
            }
            let sub: Vec<usize> = face_vertices
                .iter()
                .copied()
                .filter(|&v| self.vertices[v].tight_facets.contains(&j))
                .collect();
            if sub.is_empty() || sub.contains(&apex) {
                continue;
            }
            let mut sub_facets = face_facets.clone();
            sub_facets.insert(j);
            let mut cells = Vec::new();
            self.fan(&sub_facets, &sub, face_dim - 1, &mut cells);
            for mut c in cells {
                c.insert(0, apex);
                out.push(c);
            }
        }
    }

    /// Exact volume from the triangulation.
    pub fn volume(&self) -> Result<Rational> {
        Ok(self
            .triangulate()?
            .iter()
            .fold(Rational::zero(), |acc, s| acc + &s.unit_volume))
    }

    /// Short human-readable identifier: facet count and vertex list.
    pub fn describe(&self) -> String {
        let verts: Vec<String> = self
            .vertices
            .iter()
            .map(|v| {
                let c: Vec<String> = v.point.iter().map(|x| x.to_string()).collect();
                format!("({})", c.join(","))
            })
            .collect();
        format!("dim={} facets={} vertices={}", self.dim, self.facets.len(), verts.join(" "))
    }
}

fn slack(f: &HalfSpace, x: &[Rational]) -> Rational {
    f.u.iter()
        .zip(x)
        .fold(rat(f.a), |acc, (&u, xi)| acc + rat(u) * xi)
}

fn edge_determinant(points: &[Vec<Rational>]) -> Rational {
    let base = &points[0];
    let n = base.len();
    // columns are the edge vectors p_i - p_0
    let m: Matrix = (0..n)
        .map(|r| points[1..].iter().map(|p| &p[r] - &base[r]).collect())
        .collect();
    linalg::determinant(&m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VertexPolarization {
    pub flips: Vec<bool>,
    pub flipped: Vec<Vec<i64>>,
    /// `(-1)^p` from the product of dot-product ratios.
    pub sign: i8,
    /// Coordinates of the vertex in the flipped generator basis.
    pub coefficients: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polarization {
    pub xi: Vec<i64>,
    pub per_vertex: Vec<VertexPolarization>,
    /// Index of the unique vertex with no flipped edge.
    pub minimizer: usize,
}

/// A vertex as a linear function of `(t, h_1..h_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricPoint {
    /// coefficient of `t` per coordinate
    pub t: Vec<Rational>,
    /// `h[d][j]`: coefficient of `h_j` in coordinate `d`
    pub h: Vec<Vec<Rational>>,
}

impl ParametricPoint {
    pub fn evaluate(&self, t: &Rational, h: &[Rational]) -> Vec<Rational> {
        self.t
            .iter()
            .zip(&self.h)
            .map(|(ct, row)| {
                row.iter()
                    .zip(h)
                    .fold(ct * t, |acc, (c, hv)| acc + c * hv)
            })
            .collect()
    }

    pub fn evaluate_f64(&self, t: f64) -> Vec<f64> {
        self.t.iter().map(|c| rat_to_f64(c) * t).collect()
    }

    /// Coordinates as polynomials over `vars`, where `vars[0] = t` and
    /// `vars[1..=m]` are the `h` variables.
    pub fn to_polys(&self, vars: &[String]) -> Vec<MultiPoly> {
        self.t
            .iter()
            .zip(&self.h)
            .map(|(ct, row)| {
                let mut p = MultiPoly::var(vars, 0).scale(ct);
                for (j, c) in row.iter().enumerate() {
                    if !c.is_zero() {
                        p = p.add(&MultiPoly::var(vars, j + 1).scale(c)).expect("same vars");
                    }
                }
                p
            })
            .collect()
    }
}

/// One simplex of the fan; its vertices move with `(t, h)` while the
/// combinatorics stay frozen at `(1, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricSimplex {
    pub vertex_indices: Vec<usize>,
    pub vertices: Vec<ParametricPoint>,
    /// Sign of the edge determinant at `(t, h) = (1, 0)`.
    pub orientation: i8,
    /// Volume at `(1, 0)`.
    pub unit_volume: Rational,
}

impl ParametricSimplex {
    /// `orientation · det[p_1 - p_0, ..., p_n - p_0]` as a polynomial in `(t, h)`.
    pub fn signed_det_poly(&self, vars: &[String]) -> MultiPoly {
        let polys: Vec<Vec<MultiPoly>> = self.vertices.iter().map(|v| v.to_polys(vars)).collect();
        let n = polys[0].len();
        let m: Vec<Vec<MultiPoly>> = (0..n)
            .map(|r| {
                polys[1..]
                    .iter()
                    .map(|p| p[r].sub(&polys[0][r]).expect("same vars"))
                    .collect()
            })
            .collect();
        poly_det(&m, vars).scale(&rat(self.orientation as i64))
    }
}

/// Laplace expansion; `n <= 3` in practice.
fn poly_det(m: &[Vec<MultiPoly>], vars: &[String]) -> MultiPoly {
    let n = m.len();
    if n == 1 {
        return m[0][0].clone();
    }
    let mut acc = MultiPoly::zero(vars);
    for c in 0..n {
        let minor: Vec<Vec<MultiPoly>> = m[1..]
            .iter()
            .map(|row| row.iter().enumerate().filter(|(j, _)| *j != c).map(|(_, p)| p.clone()).collect())
            .collect();
        let term = m[0][c].mul(&poly_det(&minor, vars)).expect("same vars");
        acc = if c % 2 == 0 { acc.add(&term) } else { acc.sub(&term) }.expect("same vars");
    }
    acc
}

/// Test and example polytopes used throughout the crate.
pub mod catalog {
    use super::{HalfSpace, Polytope};

    pub fn interval() -> Polytope {
        interval_with(1, 1)
    }

    /// `[-left, right]`.
    pub fn interval_with(left: i64, right: i64) -> Polytope {
        Polytope::new(1, vec![HalfSpace::new(vec![1], left), HalfSpace::new(vec![-1], right)])
            .expect("valid interval")
    }

    pub fn square() -> Polytope {
        Polytope::new(
            2,
            vec![
                HalfSpace::new(vec![1, 0], 1),
                HalfSpace::new(vec![-1, 0], 1),
                HalfSpace::new(vec![0, 1], 1),
                HalfSpace::new(vec![0, -1], 1),
            ],
        )
        .expect("valid square")
    }

    /// Vertices `(-1,-1), (2,-1), (-1,2)`.
    pub fn triangle() -> Polytope {
        Polytope::new(
            2,
            vec![
                HalfSpace::new(vec![1, 0], 1),
                HalfSpace::new(vec![0, 1], 1),
                HalfSpace::new(vec![-1, -1], 1),
            ],
        )
        .expect("valid triangle")
    }

    /// Vertices `(-1,-1), (1,0), (0,1)`; simple but not regular.
    pub fn skew_triangle() -> Polytope {
        Polytope::new(
            2,
            vec![
                HalfSpace::new(vec![-1, 2], 1),
                HalfSpace::new(vec![2, -1], 1),
                HalfSpace::new(vec![-1, -1], 1),
            ],
        )
        .expect("valid triangle")
    }

    pub fn cube() -> Polytope {
        let mut facets = Vec::new();
        for d in 0..3 {
            for s in [1, -1] {
                let mut u = vec![0; 3];
                u[d] = s;
                facets.push(HalfSpace::new(u, 1));
            }
        }
        Polytope::new(3, facets).expect("valid cube")
    }
}

#[cfg(test)]
mod tests {
    use super::catalog::*;
    use super::*;
    use crate::poly::ratio;

    fn points(p: &Polytope) -> BTreeSet<Vec<i64>> {
        p.vertices().iter().map(|v| v.point.clone()).collect()
    }

    #[test]
    fn square_vertices() {
        let expected: BTreeSet<Vec<i64>> =
            [vec![-1, -1], vec![-1, 1], vec![1, -1], vec![1, 1]].into_iter().collect();
        assert_eq!(points(&square()), expected);
    }

    #[test]
    fn triangle_vertices() {
        let expected: BTreeSet<Vec<i64>> =
            [vec![-1, -1], vec![2, -1], vec![-1, 2]].into_iter().collect();
        assert_eq!(points(&triangle()), expected);
    }

    #[test]
    fn validation_errors() {
        let bad = Polytope::new(
            2,
            vec![
                HalfSpace::new(vec![2, 0], 1),
                HalfSpace::new(vec![-1, 0], 1),
                HalfSpace::new(vec![0, 1], 1),
                HalfSpace::new(vec![0, -1], 1),
            ],
        );
        assert!(matches!(bad, Err(Error::NonPrimitiveNormal { facet: 0, .. })));
        let zero_offset = Polytope::new(1, vec![HalfSpace::new(vec![1], 0), HalfSpace::new(vec![-1], 1)]);
        assert!(matches!(zero_offset, Err(Error::NonPositiveOffset { .. })));
        let strip = Polytope::new(
            2,
            vec![
                HalfSpace::new(vec![1, 0], 1),
                HalfSpace::new(vec![-1, 0], 1),
                HalfSpace::new(vec![1, 1], 3),
            ],
        );
        assert!(matches!(strip, Err(Error::Unbounded)));
        // rational vertex (1/2, ...) from x + 2y >= -1 style facets
        let rational = Polytope::new(
            2,
            vec![
                HalfSpace::new(vec![1, 0], 1),
                HalfSpace::new(vec![0, 1], 1),
                HalfSpace::new(vec![-2, -1], 2),
            ],
        );
        assert!(matches!(rational, Err(Error::NonIntegralVertex { .. })));
        // square pyramid apex is tight on four facets
        let pyramid = Polytope::new(
            3,
            vec![
                HalfSpace::new(vec![0, 0, 1], 1),
                HalfSpace::new(vec![-1, 0, -1], 1),
                HalfSpace::new(vec![1, 0, -1], 1),
                HalfSpace::new(vec![0, -1, -1], 1),
                HalfSpace::new(vec![0, 1, -1], 1),
            ],
        );
        assert!(matches!(pyramid, Err(Error::NonSimpleVertex { tight: 4, .. })));
        assert!(matches!(
            Polytope::new(2, vec![HalfSpace::new(vec![1, 0], 1)]),
            Err(Error::TooFewFacets { .. })
        ));
    }

    #[test]
    fn json_parsing() {
        let p = Polytope::from_json(r#"{"dim": 1, "facets": [{"u": [1], "a": 1}, {"u": [-1], "a": 2}]}"#).unwrap();
        assert_eq!(points(&p), [vec![-1], vec![2]].into_iter().collect());
        let err = Polytope::from_json("{\"dim\": 1,\n \"facets\": [{\"u\": [1.5], \"a\": 1}]}").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn regularity() {
        assert!(square().is_regular());
        assert!(triangle().is_regular());
        assert!(cube().is_regular());
        let skew = skew_triangle();
        assert_eq!(
            points(&skew),
            [vec![-1, -1], vec![1, 0], vec![0, 1]].into_iter().collect()
        );
        assert!(!skew.is_regular());
        let v = skew.vertices().iter().find(|v| v.point == vec![1, 0]).unwrap();
        assert_ne!(linalg::int_determinant(&v.edge_generators).abs(), 1.into());
    }

    #[test]
    fn edge_generators_point_inward_along_edges() {
        for p in [square(), triangle(), cube(), skew_triangle()] {
            for v in p.vertices() {
                assert!(!linalg::int_determinant(&v.edge_generators).is_zero());
                for (i, g) in v.edge_generators.iter().enumerate() {
                    for (c, &fi) in v.tight_facets.iter().enumerate() {
                        let d = linalg::dot_int(&p.facets()[fi].u, g);
                        if c == i {
                            assert!(d > 0);
                        } else {
                            assert_eq!(d, 0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn square_polarization() {
        let sq = square();
        let pol = sq.polarize(&[1, 2]).unwrap();
        let idx = |pt: &[i64]| sq.vertices().iter().position(|v| v.point == pt).unwrap();
        assert_eq!(pol.minimizer, idx(&[-1, -1]));
        assert_eq!(pol.per_vertex[idx(&[-1, -1])].sign, 1);
        let top = &pol.per_vertex[idx(&[1, 1])];
        assert_eq!(top.flips, vec![true, true]);
        assert_eq!(top.sign, 1);
        assert_eq!(pol.per_vertex[idx(&[1, -1])].sign, -1);
        assert_eq!(pol.per_vertex[idx(&[-1, 1])].sign, -1);
        assert!(pol.per_vertex[pol.minimizer]
            .coefficients
            .iter()
            .all(|c| c.is_negative()));
        assert!(matches!(sq.polarize(&[1, 0]), Err(Error::DegeneratePolarization { .. })));
        let fixed = sq.polarize_perturbed(&[1, 0], 7).unwrap();
        assert!(fixed.xi.iter().all(|&x| x != 0));
    }

    #[test]
    fn interval_parametric_vertices() {
        let p = interval();
        let maps = p.parametric_vertices().unwrap();
        let t = rat(3);
        let h = [rat(5), rat(7)];
        let vals: BTreeSet<Vec<Rational>> = maps.iter().map(|m| m.evaluate(&t, &h)).collect();
        let expected: BTreeSet<Vec<Rational>> = [vec![rat(-3 - 5)], vec![rat(3 + 7)]].into_iter().collect();
        assert_eq!(vals, expected);
    }

    #[test]
    fn square_corner_parametric_vertex() {
        let sq = square();
        let maps = sq.parametric_vertices().unwrap();
        let i = sq.vertices().iter().position(|v| v.point == vec![1, 1]).unwrap();
        // facets 1 (-x >= -1) and 3 (-y >= -1) are tight at (1,1)
        let h = [rat(0), ratio(1, 2), rat(0), ratio(1, 3)];
        assert_eq!(maps[i].evaluate(&rat(2), &h), vec![ratio(5, 2), ratio(7, 3)]);
        for (m, v) in maps.iter().zip(sq.vertices()) {
            let at = m.evaluate(&rat(4), &vec![rat(0); 4]);
            let scaled: Vec<Rational> = v.point.iter().map(|&c| rat(4 * c)).collect();
            assert_eq!(at, scaled);
        }
    }

    #[test]
    fn triangulations_partition_volume() {
        assert_eq!(interval().triangulate().unwrap().len(), 1);
        let sq = square().triangulate().unwrap();
        assert_eq!(sq.len(), 2);
        assert_eq!(square().volume().unwrap(), rat(4));
        let cube = cube().triangulate().unwrap();
        assert_eq!(cube.len(), 6);
        assert_eq!(super::catalog::cube().volume().unwrap(), rat(8));
        assert_eq!(triangle().volume().unwrap(), ratio(9, 2));
        assert_eq!(skew_triangle().volume().unwrap(), ratio(3, 2));
    }

    #[test]
    fn tight_facet_counts() {
        let sq = square();
        assert!(sq.tight_facets(&[0, 0], 1).unwrap().is_empty());
        assert_eq!(sq.tight_facets(&[1, 1], 1).unwrap().len(), 2);
        assert_eq!(sq.tight_facets(&[2, 0], 2).unwrap(), vec![1]);
        assert!(matches!(sq.tight_facets(&[3, 0], 2), Err(Error::PointOutside { .. })));
    }

    #[test]
    fn every_facet_supports_enough_vertices() {
        for p in [interval(), square(), triangle(), cube(), skew_triangle()] {
            for i in 0..p.num_facets() {
                let n = p.vertices().iter().filter(|v| v.tight_facets.contains(&i)).count();
                assert!(n >= p.dim());
            }
        }
    }
}
