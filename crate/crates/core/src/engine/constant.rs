//! The regularized constant `C(f)` by three independent routes:
//!
//! * `limit`: `R^k(N)` along a doubling schedule, with a geometric tail bound;
//! * `direct`: `Σ_{ℤⁿ} f − ∫_{ℝⁿ} f` when both converge absolutely;
//! * `tail`: split `f = Σ χ f_ℓ + g_j` and treat each part by whichever of
//!   the above applies.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::remainder::{check_order, RemainderParts, RemainderValue};
use crate::error::{Error, Result};
use crate::integration::box_integral;
use crate::polytope::Polytope;
use crate::quadrature::QuadratureSpec;
use crate::summation::cube_sum;
use crate::symbols::{r64_to_f64, Density, SymbolExpr};
use crate::todd::OperatorKind;

pub const CUTOFF_ID: &str = "chi(rho)=sigma(rho-1)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Limit,
    Tail,
    Direct,
    Exact,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Limit => "limit",
            Method::Tail => "tail",
            Method::Direct => "direct",
            Method::Exact => "exact",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub n: i64,
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantEstimate {
    pub value: f64,
    pub error: f64,
    pub method: Method,
    pub symbol: String,
    pub k: Option<usize>,
    pub j: Option<i64>,
    pub kind: Option<OperatorKind>,
    pub gauge: Option<f64>,
    pub polytope: Option<String>,
    pub xi: Option<Vec<i64>>,
    pub cutoff: String,
    pub schedule: Vec<i64>,
    pub samples: Vec<Sample>,
    /// Truncation radius of the direct lattice cube.
    pub radius: Option<i64>,
    pub tol: f64,
    pub richardson: bool,
}

impl ConstantEstimate {
    fn new(method: Method, symbol: String, value: f64, error: f64, tol: f64) -> Self {
        ConstantEstimate {
            value,
            error,
            method,
            symbol,
            k: None,
            j: None,
            kind: None,
            gauge: None,
            polytope: None,
            xi: None,
            cutoff: CUTOFF_ID.to_string(),
            schedule: Vec::new(),
            samples: Vec::new(),
            radius: None,
            tol,
            richardson: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitOptions {
    pub schedule: Vec<i64>,
    pub richardson: bool,
    pub quad: QuadratureSpec,
    /// Polarizing vector recorded with the estimate; `(1, 2, .., n)` if unset.
    pub xi: Option<Vec<i64>>,
    pub seed: u64,
}

impl Default for LimitOptions {
    fn default() -> Self {
        LimitOptions {
            schedule: vec![8, 16, 32, 64],
            richardson: false,
            quad: QuadratureSpec::default(),
            xi: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectOptions {
    /// Target for the truncation bound relative to `max(|value|, 1)`.
    pub tol: f64,
    /// Absolute floor for the truncation target.
    pub abs_tol: f64,
    pub start_radius: i64,
    /// Give up once the lattice cube would exceed this many points.
    pub max_points: f64,
    pub quad: QuadratureSpec,
}

impl Default for DirectOptions {
    fn default() -> Self {
        DirectOptions {
            tol: 1e-10,
            abs_tol: 0.0,
            start_radius: 16,
            max_points: 6e7,
            quad: QuadratureSpec {
                tol: 1e-13,
                ..QuadratureSpec::default()
            },
        }
    }
}

/// Records the polarization used for a polytope-based estimate.
pub fn polarizing_vector(p: &Polytope, xi: Option<&[i64]>, seed: u64) -> Result<Vec<i64>> {
    let start: Vec<i64> = match xi {
        Some(v) => v.to_vec(),
        None => (1..=p.dim() as i64).collect(),
    };
    Ok(p.polarize_perturbed(&start, seed)?.xi)
}

/// `R^k(N)` data for a fixed polytope and integrand across a schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderTable {
    pub dim: usize,
    pub order: f64,
    pub parts: Vec<RemainderParts>,
}

impl RemainderTable {
    pub fn compute(p: &Polytope, density: &Density, schedule: &[i64], k_max: usize, quad: &QuadratureSpec) -> Result<Self> {
        if schedule.len() < 2 {
            return Err(Error::InvalidArgument("the N schedule needs at least two entries".into()));
        }
        if schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("the N schedule must be increasing".into()));
        }
        let parts = schedule
            .iter()
            .map(|&n| RemainderParts::compute(p, density, n, k_max, quad))
            .collect::<Result<_>>()?;
        Ok(RemainderTable {
            dim: p.dim(),
            order: density.order(),
            parts,
        })
    }

    pub fn samples(&self, k: usize, kind: OperatorKind) -> Result<Vec<Sample>> {
        self.parts
            .iter()
            .map(|part| {
                let RemainderValue { value, error } = part.remainder(k, kind)?;
                Ok(Sample {
                    n: part.scale,
                    value,
                    error,
                })
            })
            .collect()
    }

    /// Limit of `R^k(N)` with a geometric bound on the unseen tail.
    pub fn estimate(&self, k: usize, kind: OperatorKind, richardson: bool) -> Result<(f64, f64, Vec<Sample>)> {
        let samples = self.samples(k, kind)?;
        let decay = self.dim as f64 + self.order - k as f64;
        let (value, error) = extrapolate(&samples, decay, richardson)?;
        Ok((value, error, samples))
    }
}

/// Geometric-tail limit of a sequence sampled on a doubling-type schedule
/// whose differences decay at least like `N^decay`.
pub fn extrapolate(samples: &[Sample], decay: f64, richardson: bool) -> Result<(f64, f64)> {
    let m = samples.len();
    let diffs: Vec<f64> = samples.windows(2).map(|w| (w[1].value - w[0].value).abs()).collect();
    let noise: Vec<f64> = samples.windows(2).map(|w| w[0].error + w[1].error).collect();
    let significant = |i: usize| diffs[i] > 4.0 * noise[i];
    for i in 1..diffs.len() {
        if significant(i) && diffs[i] > diffs[i - 1] / 1.5 {
            return Err(Error::SlowConvergence { differences: diffs });
        }
    }
    let last = &samples[m - 1];
    let prev = &samples[m - 2];
    let step = last.n as f64 / prev.n as f64;
    let model = step.powf(decay);
    let d = diffs.len();
    let observed = if d >= 2 && significant(d - 1) && significant(d - 2) {
        diffs[d - 1] / diffs[d - 2]
    } else {
        0.0
    };
    let rho = model.max(observed).min(1.0 / 1.5);
    let tail = diffs[d - 1] * rho / (1.0 - rho);
    let value = if richardson {
        last.value + (last.value - prev.value) * model / (1.0 - model)
    } else {
        last.value
    };
    Ok((value, tail + last.error))
}

/// `k >= n + ⌈r + s⌉ + 2`, so that `R^k(N) − C = O(N^{-2})`.
pub fn minimum_limit_order(dim: usize, order: f64) -> usize {
    (dim as f64 + order.ceil() + 2.0).max(1.0) as usize
}

fn limit_on_density(
    p: &Polytope,
    density: &Density,
    k: usize,
    kind: OperatorKind,
    opts: &LimitOptions,
) -> Result<(f64, f64, Vec<Sample>)> {
    let need = minimum_limit_order(p.dim(), density.order());
    if k < need {
        return Err(Error::InvalidArgument(format!(
            "limit method needs k >= n + ceil(r + s) + 2 = {need}, got {k}"
        )));
    }
    check_order(p.dim(), density.order(), k)?;
    let table = RemainderTable::compute(p, density, &opts.schedule, k, &opts.quad)?;
    table.estimate(k, kind, opts.richardson)
}

/// `C` as the limit of `R^k(N)`.
pub fn constant_limit(
    p: &Polytope,
    f: &SymbolExpr,
    k: usize,
    kind: OperatorKind,
    gauge: Option<f64>,
    opts: &LimitOptions,
) -> Result<ConstantEstimate> {
    let density = f.density(gauge);
    let (value, error, samples) = limit_on_density(p, &density, k, kind, opts)?;
    let mut est = ConstantEstimate::new(Method::Limit, f.to_string(), value, error, opts.quad.tol);
    est.k = Some(k);
    est.kind = Some(kind);
    est.gauge = gauge;
    est.polytope = Some(p.describe());
    est.xi = Some(polarizing_vector(p, opts.xi.as_deref(), opts.seed)?);
    est.schedule = opts.schedule.clone();
    est.samples = samples;
    est.richardson = opts.richardson;
    Ok(est)
}

/// Bound on `Σ_{‖ℓ‖∞ > R} |F(ℓ) − ∫_{cell ℓ} F|` from the Hessian decay.
fn cell_truncation_bound(dim: usize, order: f64, hessian: f64, radius: i64) -> f64 {
    let n = dim as f64;
    let r = radius as f64;
    let q = order - 2.0;
    let a = q + n;
    debug_assert!(a < 0.0);
    (hessian / 8.0) * 2.0 * n * (2.0 * (1.0 + 1.0 / (r + 0.5))).powf(n - 1.0) * (r - 0.5).powf(a) / (-a)
}

struct DirectResult {
    value: f64,
    error: f64,
    radius: i64,
}

fn direct_on_density(density: &Density, opts: &DirectOptions) -> Result<DirectResult> {
    let n = density.dim;
    let order = density.order();
    if order >= -(n as f64) {
        return Err(Error::InvalidArgument(format!(
            "direct method needs order + gauge < -n (order {order}, n = {n})"
        )));
    }
    let eval = |radius: i64, abs_tol: f64| -> Result<(f64, f64)> {
        let sum = cube_sum(n, radius, &|x: &[f64]| density.value(x));
        let edge = radius as f64 + 0.5;
        let lo = vec![-edge; n];
        let hi = vec![edge; n];
        let quad = QuadratureSpec {
            abs_tol,
            ..opts.quad
        };
        let integral = box_integral(&|x: &[f64]| density.value(x), &lo, &hi, &quad)?;
        let rounding = 16.0 * f64::EPSILON * (sum.abs() + integral.value.abs());
        Ok((sum - integral.value, integral.error + rounding))
    };
    let bound = |radius: i64| {
        let h = density.hessian_bound(radius as f64 + 0.5);
        cell_truncation_bound(n, order, h, radius)
    };
    let mut radius = opts.start_radius.max(4);
    let (mut value, mut err) = eval(radius, 0.0)?;
    loop {
        let target = (opts.tol * value.abs().max(1.0)).max(opts.abs_tol);
        let trunc = bound(radius);
        if trunc <= target {
            return Ok(DirectResult {
                value,
                error: trunc + err,
                radius,
            });
        }
        // jump straight to the smallest radius the analytic bound accepts
        let widest = ((opts.max_points.powf(1.0 / n as f64) - 1.0) / 2.0).floor() as i64;
        if widest <= radius || bound(widest) > target {
            return Err(Error::ToleranceNotMet {
                value,
                estimate: trunc + err,
            });
        }
        let (mut lo, mut hi) = (radius, widest);
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if bound(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        radius = hi;
        (value, err) = eval(radius, 0.05 * target)?;
    }
}

/// `Σ_{ℤⁿ} f(ℓ, s) − ∫_{ℝⁿ} f(x, s) dx`, absolutely convergent when `r + s < -n`.
pub fn constant_direct(f: &SymbolExpr, gauge: Option<f64>, opts: &DirectOptions) -> Result<ConstantEstimate> {
    let density = f.density(gauge);
    let r = direct_on_density(&density, opts)?;
    let mut est = ConstantEstimate::new(Method::Direct, f.to_string(), r.value, r.error, opts.tol);
    est.gauge = gauge;
    est.radius = Some(r.radius);
    Ok(est)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailOptions {
    pub limit: LimitOptions,
    pub direct: DirectOptions,
    /// Absolute target for the `g_j` truncation.
    pub tail_tol: f64,
}

impl Default for TailOptions {
    fn default() -> Self {
        TailOptions {
            limit: LimitOptions::default(),
            direct: DirectOptions {
                abs_tol: 1e-10,
                ..DirectOptions::default()
            },
            tail_tol: 1e-10,
        }
    }
}

/// Per-part breakdown of a tail-split estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailPart {
    /// Homogeneity degree, or `None` for the remainder `g_j`.
    pub degree: Option<f64>,
    pub method: Method,
    pub value: f64,
    pub error: f64,
}

/// Bound on `|Σ_{‖ℓ‖∞>R} g| + |∫_{‖x‖∞>R} g|` given `|g| <= K ‖x‖^d` for `‖x‖ >= 2`.
fn decay_truncation_bound(dim: usize, constant: f64, decay: f64, radius: i64) -> f64 {
    if decay == f64::NEG_INFINITY {
        return 0.0;
    }
    let n = dim as f64;
    let r = radius as f64;
    let a = decay + n;
    debug_assert!(a < 0.0);
    let sum = 2.0 * n * (2.0 + 1.0 / r).powf(n - 1.0) * r.powf(a) / (-a);
    let integral = 2.0 * n * 2f64.powf(n - 1.0) * r.powf(a) / (-a);
    constant * (sum + integral)
}

/// `C(f) = Σ_ℓ C(χ f_ℓ) + [Σ g_j − ∫ g_j]`.
pub fn constant_tail(
    p: &Polytope,
    f: &SymbolExpr,
    j: i64,
    kind: OperatorKind,
    opts: &TailOptions,
) -> Result<(ConstantEstimate, Vec<TailPart>)> {
    let n = p.dim();
    if j >= -(n as i64) {
        return Err(Error::InvalidArgument(format!("tail method needs j < -n (j = {j}, n = {n})")));
    }
    let tail = f.tail(num_rational::Rational64::from_integer(j));
    let mut parts = Vec::new();
    let mut max_k = None;
    for piece in &tail.pieces {
        let degree = r64_to_f64(piece.degree);
        let density = piece.density();
        // slowly decaying pieces can need more points than the direct budget
        let direct = if degree < -(n as f64) {
            match direct_on_density(&density, &opts.direct) {
                Ok(r) => Some(r),
                Err(Error::ToleranceNotMet { .. }) => None,
                Err(e) => return Err(e),
            }
        } else {
            None
        };
        if let Some(r) = direct {
            parts.push(TailPart {
                degree: Some(degree),
                method: Method::Direct,
                value: r.value,
                error: r.error,
            });
        } else {
            let k = minimum_limit_order(n, degree).max(check_order_min(n, degree));
            max_k = Some(max_k.unwrap_or(0).max(k));
            let (value, error, _) = limit_on_density(p, &density, k, kind, &opts.limit)?;
            parts.push(TailPart {
                degree: Some(degree),
                method: Method::Limit,
                value,
                error,
            });
        }
    }

    let mut radius = 16;
    while decay_truncation_bound(n, tail.outer_constant, tail.decay_exponent, radius) > opts.tail_tol {
        radius *= 2;
        if ((2 * radius + 1) as f64).powi(n as i32) > opts.direct.max_points {
            return Err(Error::ToleranceNotMet {
                value: f64::NAN,
                estimate: decay_truncation_bound(n, tail.outer_constant, tail.decay_exponent, radius),
            });
        }
    }
    let g = |x: &[f64]| tail.evaluate(x);
    let sum = cube_sum(n, radius, &g);
    let edge = radius as f64;
    let quad = QuadratureSpec {
        abs_tol: 0.1 * opts.tail_tol,
        ..opts.direct.quad
    };
    let integral = box_integral(&g, &vec![-edge; n], &vec![edge; n], &quad)?;
    let trunc = decay_truncation_bound(n, tail.outer_constant, tail.decay_exponent, radius);
    parts.push(TailPart {
        degree: None,
        method: Method::Direct,
        value: sum - integral.value,
        error: trunc + integral.error + 16.0 * f64::EPSILON * (sum.abs() + integral.value.abs()),
    });

    let value = parts.iter().map(|p| p.value).sum();
    let error = parts.iter().map(|p| p.error).sum();
    let mut est = ConstantEstimate::new(Method::Tail, f.to_string(), value, error, opts.tail_tol);
    est.j = Some(j);
    est.kind = Some(kind);
    est.k = max_k;
    est.polytope = Some(p.describe());
    est.radius = Some(radius);
    if max_k.is_some() {
        est.xi = Some(polarizing_vector(p, opts.limit.xi.as_deref(), opts.limit.seed)?);
        est.schedule = opts.limit.schedule.clone();
    }
    Ok((est, parts))
}

fn check_order_min(dim: usize, order: f64) -> usize {
    (dim as f64 + order).floor() as usize + 1
}

/// `C(s)` for each gauge value: direct where absolutely convergent, the
/// limit method (with `k` raised as needed) elsewhere.
pub fn gauged_scan(
    p: &Polytope,
    f: &SymbolExpr,
    gauges: &[f64],
    k: Option<usize>,
    kind: OperatorKind,
    limit: &LimitOptions,
    direct: &DirectOptions,
) -> Result<Vec<ConstantEstimate>> {
    let n = p.dim() as f64;
    let r = f.order_f64();
    gauges
        .iter()
        .map(|&s| {
            if r + s < -n {
                constant_direct(f, Some(s), direct)
            } else {
                let need = minimum_limit_order(p.dim(), r + s).max(check_order_min(p.dim(), r + s));
                let kk = k.unwrap_or(0).max(need);
                constant_limit(p, f, kk, kind, Some(s), limit)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    pub polytope: String,
    pub xi: Vec<i64>,
    pub k: usize,
    pub kind: OperatorKind,
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndependenceReport {
    pub symbol: String,
    pub entries: Vec<SuiteEntry>,
    pub max_discrepancy: f64,
    /// Largest combined error bar over all pairs.
    pub budget: f64,
}

/// Limit-method constants across polytopes, polarizing vectors, orders and
/// weightings, and their largest pairwise discrepancy.
pub fn independence_suite(
    f: &SymbolExpr,
    polytopes: &[(String, Polytope)],
    xis: &[Vec<i64>],
    ks: &[usize],
    kinds: &[OperatorKind],
    opts: &LimitOptions,
) -> Result<IndependenceReport> {
    let k_max = *ks.iter().max().ok_or_else(|| Error::InvalidArgument("no k values".into()))?;
    let density = f.density(None);
    let mut entries = Vec::new();
    for (label, p) in polytopes {
        for &k in ks {
            let need = minimum_limit_order(p.dim(), density.order());
            if k < need {
                return Err(Error::InvalidArgument(format!("k = {k} below the limit-method minimum {need}")));
            }
        }
        let table = RemainderTable::compute(p, &density, &opts.schedule, k_max, &opts.quad)?;
        let used: Vec<Vec<i64>> = if xis.is_empty() {
            vec![polarizing_vector(p, None, opts.seed)?]
        } else {
            xis.iter()
                .map(|xi| polarizing_vector(p, Some(xi), opts.seed))
                .collect::<Result<_>>()?
        };
        for xi in &used {
            for &k in ks {
                for &kind in kinds {
                    let (value, error, _) = table.estimate(k, kind, opts.richardson)?;
                    entries.push(SuiteEntry {
                        polytope: label.clone(),
                        xi: xi.clone(),
                        k,
                        kind,
                        value,
                        error,
                    });
                }
            }
        }
    }
    let mut max_discrepancy: f64 = 0.0;
    let mut budget: f64 = 0.0;
    for (i, a) in entries.iter().enumerate() {
        for b in &entries[i + 1..] {
            max_discrepancy = max_discrepancy.max((a.value - b.value).abs());
            budget = budget.max(a.error + b.error);
        }
    }
    Ok(IndependenceReport {
        symbol: f.to_string(),
        entries,
        max_discrepancy,
        budget,
    })
}
