//! Collapsed (Duffy) tensor Gauss-Legendre rules on simplices and a globally
//! adaptive, vector-valued simplex integrator driven by longest-edge bisection.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Gauss points per axis of the collapsed rule.
    pub order: usize,
    /// Relative tolerance on the ∞-norm of the result vector.
    pub tol: f64,
    /// Absolute floor below which the error is accepted regardless of `tol`.
    pub abs_tol: f64,
    /// Maximum number of regions per starting simplex.
    pub max_regions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            order: 12,
            tol: 1e-10,
            abs_tol: 0.0,
            max_regions: 40_000,
        }
    }
}

/// Nodes and weights of the `order`-point Gauss-Legendre rule on `[0, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order >= 1);
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let n = order as f64;
    for i in 0..order.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=order {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            if order == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        if order == 1 {
            z = 0.0;
            dp = 1.0;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        // map [-1, 1] -> [0, 1]
        nodes[i] = 0.5 * (1.0 - z);
        nodes[order - 1 - i] = 0.5 * (1.0 + z);
        weights[i] = 0.5 * w;
        weights[order - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

/// A rule on the standard simplex `{y >= 0, Σ y <= 1}`.
#[derive(Debug, Clone)]
pub struct SimplexRule {
    dim: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

impl SimplexRule {
    /// Tensor Gauss rule pulled back through the Duffy collapse
    /// `y_k = u_k ∏_{i<k} (1 - u_i)`.
    pub fn duffy(dim: usize, order: usize) -> Self {
        let (nodes, w) = gauss_legendre(order);
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for idx in (0..dim).map(|_| 0..order).multi_cartesian_product() {
            let mut y = vec![0.0; dim];
            let mut rest = 1.0;
            let mut weight = 1.0;
            for (k, &i) in idx.iter().enumerate() {
                y[k] = nodes[i] * rest;
                weight *= w[i] * rest;
                rest *= 1.0 - nodes[i];
            }
            points.push(y);
            weights.push(weight);
        }
        if dim == 0 {
            points.push(Vec::new());
            weights.push(1.0);
        }
        SimplexRule {
            dim,
            points,
            weights,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `∫_S F` for the simplex with the given vertices; `F` writes into its
    /// output slice, which has length `width`.
    pub fn apply<F>(&self, vertices: &[Vec<f64>], width: usize, f: &F) -> Vec<f64>
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let n = self.dim;
        let base = &vertices[0];
        let edges: Vec<Vec<f64>> = vertices[1..]
            .iter()
            .map(|v| v.iter().zip(base).map(|(a, b)| a - b).collect())
            .collect();
        let jac = det_f64(&edges).abs();
        let mut out = vec![0.0; width];
        let mut x = vec![0.0; n];
        for (y, w) in self.points.iter().zip(&self.weights) {
            x.copy_from_slice(base);
            for (yk, e) in y.iter().zip(&edges) {
                for (xi, ei) in x.iter_mut().zip(e) {
                    *xi += yk * ei;
                }
            }
            let v = f(&x);
            for (o, vi) in out.iter_mut().zip(&v) {
                *o += w * vi;
            }
        }
        for o in &mut out {
            *o *= jac;
        }
        out
    }
}

/// Determinant of a small dense matrix given by rows.
pub fn det_f64(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    let mut a = rows.to_vec();
    let mut det = 1.0;
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
            .expect("nonempty");
        if a[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        det *= a[c][c];
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    det
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadResult {
    pub values: Vec<f64>,
    /// Estimated absolute error (∞-norm over components).
    pub error: f64,
    pub regions: usize,
    pub converged: bool,
}

impl QuadResult {
    pub fn zero(width: usize) -> Self {
        QuadResult {
            values: vec![0.0; width],
            error: 0.0,
            regions: 0,
            converged: true,
        }
    }
}

struct Region {
    id: usize,
    children: [(Vec<Vec<f64>>, Vec<f64>); 2],
    estimate: Vec<f64>,
    error: f64,
}

impl PartialEq for Region {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Region {}
impl PartialOrd for Region {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Region {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.id.cmp(&self.id))
    }
}

fn bisect(vertices: &[Vec<f64>]) -> [Vec<Vec<f64>>; 2] {
    let mut best = (0, 1, -1.0);
    for i in 0..vertices.len() {
        for j in i + 1..vertices.len() {
            let d: f64 = vertices[i]
                .iter()
                .zip(&vertices[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d > best.2 {
                best = (i, j, d);
            }
        }
    }
    let (i, j, _) = best;
    let mid: Vec<f64> = vertices[i]
        .iter()
        .zip(&vertices[j])
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    let mut a = vertices.to_vec();
    a[j] = mid.clone();
    let mut b = vertices.to_vec();
    b[i] = mid;
    [a, b]
}

fn make_region<F>(
    id: usize,
    own: &[f64],
    vertices: &[Vec<f64>],
    width: usize,
    f: &F,
    rule: &SimplexRule,
) -> Region
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let [a, b] = bisect(vertices);
    let qa = rule.apply(&a, width, f);
    let qb = rule.apply(&b, width, f);
    let estimate: Vec<f64> = qa.iter().zip(&qb).map(|(x, y)| x + y).collect();
    let error = estimate
        .iter()
        .zip(own)
        .map(|(e, o)| (e - o).abs())
        .fold(0.0, f64::max);
    Region {
        id,
        children: [(a, qa), (b, qb)],
        estimate,
        error,
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Compensated sum of vectors in the given order.
pub fn kahan_sum_vectors<'a, I>(width: usize, items: I) -> Vec<f64>
where
    I: IntoIterator<Item = &'a Vec<f64>>,
{
    let mut sum = vec![0.0; width];
    let mut comp = vec![0.0; width];
    for v in items {
        for c in 0..width {
            let y = v[c] - comp[c];
            let t = sum[c] + y;
            comp[c] = (t - sum[c]) - y;
            sum[c] = t;
        }
    }
    sum
}

/// Adaptive integration of a vector integrand over one simplex.
pub fn integrate_simplex<F>(
    vertices: &[Vec<f64>],
    width: usize,
    f: &F,
    spec: &QuadratureSpec,
    rule: &SimplexRule,
) -> QuadResult
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    integrate_simplex_from(vertices, rule.apply(vertices, width, f), width, f, spec, rule)
}

/// As [`integrate_simplex`], starting from a rule value already in hand.
fn integrate_simplex_from<F>(
    vertices: &[Vec<f64>],
    own: Vec<f64>,
    width: usize,
    f: &F,
    spec: &QuadratureSpec,
    rule: &SimplexRule,
) -> QuadResult
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut next_id = 0;
    let mut heap = BinaryHeap::new();
    heap.push(make_region(next_id, &own, vertices, width, f, rule));
    next_id += 1;
    let mut total_error = heap.peek().map(|r| r.error).unwrap_or(0.0);
    let mut total = heap.peek().map(|r| r.estimate.clone()).unwrap_or(own);
    let mut converged = true;
    loop {
        let target = (spec.tol * inf_norm(&total)).max(spec.abs_tol);
        if total_error <= target {
            break;
        }
        if heap.len() >= spec.max_regions {
            converged = false;
            break;
        }
        let worst = heap.pop().expect("nonempty heap");
        total_error -= worst.error;
        for (c, (verts, q)) in worst.children.iter().enumerate() {
            let r = make_region(next_id + c, q, verts, width, f, rule);
            total_error += r.error;
            for k in 0..width {
                total[k] += r.estimate[k] - q[k];
            }
            heap.push(r);
        }
        next_id += 2;
        // running sums drift; resynchronise now and then
        if next_id % 512 == 0 {
            total_error = heap.iter().map(|r| r.error).sum();
        }
    }
    let mut regions = heap.into_vec();
    regions.sort_by_key(|r| r.id);
    let values = kahan_sum_vectors(width, regions.iter().map(|r| &r.estimate));
    let error = regions.iter().map(|r| r.error).sum();
    QuadResult {
        values,
        error,
        regions: regions.len(),
        converged,
    }
}

/// Integrates over a list of simplices in parallel; the reduction is in list
/// order, so the result does not depend on the thread count.
pub fn integrate_simplices<F>(
    simplices: &[Vec<Vec<f64>>],
    width: usize,
    f: &F,
    spec: &QuadratureSpec,
) -> QuadResult
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    let Some(first) = simplices.first() else {
        return QuadResult::zero(width);
    };
    let rule = SimplexRule::duffy(first.len() - 1, spec.order);
    // each piece gets the relative target on its own size, with a floor from
    // the overall scale so that pieces integrating to ~0 can still finish
    let first: Vec<Vec<f64>> = simplices.par_iter().map(|s| rule.apply(s, width, f)).collect();
    let scale: f64 = first.iter().map(|v| inf_norm(v)).sum();
    let spec = QuadratureSpec {
        abs_tol: spec.abs_tol.max(spec.tol * scale / simplices.len() as f64),
        ..*spec
    };
    let parts: Vec<QuadResult> = simplices
        .par_iter()
        .zip(first)
        .map(|(s, own)| integrate_simplex_from(s, own, width, f, &spec, &rule))
        .collect();
    combine(width, &parts)
}

pub fn combine(width: usize, parts: &[QuadResult]) -> QuadResult {
    QuadResult {
        values: kahan_sum_vectors(width, parts.iter().map(|p| &p.values)),
        error: parts.iter().map(|p| p.error).sum(),
        regions: parts.iter().map(|p| p.regions).sum(),
        converged: parts.iter().all(|p| p.converged),
    }
}

/// The box `[lo, hi]` split at `center` into orthant boxes, each cut into
/// `n!` Kuhn simplices.
pub fn box_simplices(lo: &[f64], hi: &[f64], center: &[f64]) -> Vec<Vec<Vec<f64>>> {
    let n = lo.len();
    let mut out = Vec::new();
    for corner in (0..n).map(|_| 0..2).multi_cartesian_product() {
        let (blo, bhi): (Vec<f64>, Vec<f64>) = (0..n)
            .map(|i| {
                if corner[i] == 0 {
                    (lo[i], center[i])
                } else {
                    (center[i], hi[i])
                }
            })
            .unzip();
        if (0..n).any(|i| bhi[i] <= blo[i]) {
            continue;
        }
        for perm in (0..n).permutations(n) {
            let mut v = blo.clone();
            let mut simplex = vec![v.clone()];
            for &axis in &perm {
                v[axis] = bhi[axis];
                simplex.push(v.clone());
            }
            out.push(simplex);
        }
    }
    out
}

/// Splits a simplex by longest-edge bisection until every piece that may
/// meet the annulus `inner <= |x| <= outer` has diameter at most `size`.
/// Pieces inside the ball `|x| < inner` are dropped.
pub fn refine_annulus(simplex: &[Vec<f64>], inner: f64, outer: f64, size: f64) -> Vec<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    let mut work = vec![simplex.to_vec()];
    while let Some(s) = work.pop() {
        let mut diam2: f64 = 0.0;
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                diam2 = diam2.max(s[i].iter().zip(&s[j]).map(|(a, b)| (a - b) * (a - b)).sum());
            }
        }
        let diam = diam2.sqrt();
        let norms: Vec<f64> = s.iter().map(|v| v.iter().map(|c| c * c).sum::<f64>().sqrt()).collect();
        let farthest = norms.iter().copied().fold(0.0, f64::max);
        // every point lies within `diam` of each vertex
        let nearest = norms.iter().copied().fold(f64::INFINITY, f64::min) - diam;
        if farthest < inner {
            continue;
        }
        if diam > size && nearest < outer {
            work.extend(bisect(&s));
        } else {
            out.push(s);
        }
    }
    out
}

/// The cube `[-edge, edge]^n` as dyadic shells `[-w, w]^n \\ [-w/2, w/2]^n` of
/// fat cells around an inner cube of half-width at most 4. Inner cells that
/// meet the annulus `1 <= |x| <= 2` are refined to side at most 1/4. Every
/// cell is split into `n!` simplices.
pub fn centered_cube_simplices(n: usize, edge: f64) -> Vec<Vec<Vec<f64>>> {
    let mut out = Vec::new();
    let mut w = edge;
    while w > 4.0 {
        let breaks = [-w, -w / 2.0, 0.0, w / 2.0, w];
        for cell in (0..n).map(|_| 0..4usize).multi_cartesian_product() {
            if cell.iter().all(|&i| i == 1 || i == 2) {
                continue;
            }
            let lo: Vec<f64> = cell.iter().map(|&i| breaks[i]).collect();
            let hi: Vec<f64> = cell.iter().map(|&i| breaks[i + 1]).collect();
            out.extend(box_simplices(&lo, &hi, &lo));
        }
        w /= 2.0;
    }
    let step = w / 4.0;
    for cell in (0..n).map(|_| 0..8usize).multi_cartesian_product() {
        let lo: Vec<f64> = cell.iter().map(|&i| -w + i as f64 * step).collect();
        let near = lo.iter().map(|a| (0f64.clamp(*a, a + step)).powi(2)).sum::<f64>();
        let far = lo.iter().map(|a| a.abs().max((a + step).abs()).powi(2)).sum::<f64>();
        let split = if near < 4.0 && far > 1.0 { 4 } else { 1 };
        let sub = step / split as f64;
        for inner in (0..n).map(|_| 0..split).multi_cartesian_product() {
            let clo: Vec<f64> = lo.iter().zip(&inner).map(|(a, &i)| a + i as f64 * sub).collect();
            let chi: Vec<f64> = clo.iter().map(|a| a + sub).collect();
            out.extend(box_simplices(&clo, &chi, &clo));
        }
    }
    out
}
