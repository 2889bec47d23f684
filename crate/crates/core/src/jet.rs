//! Truncated multivariate Taylor series ("jets") in the shift variables,
//! plus the few univariate series needed to push a jet through `⟨x⟩^s`,
//! `‖x‖^ρ` and the radial cutoff.
//!
//! A jet over `m` variables truncated at total order `k` is a dense `Vec<f64>`
//! indexed by the graded monomial order of [`crate::todd::multi_indices`].

use std::collections::HashMap;

use crate::todd::multi_indices;

#[derive(Debug, Clone)]
pub struct JetSpace {
    m: usize,
    k: usize,
    monomials: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
    /// (a, b, a*b) for every product that survives truncation
    table: Vec<(u32, u32, u32)>,
}

impl JetSpace {
    pub fn new(m: usize, k: usize) -> Self {
        let monomials = multi_indices(m, k);
        let index: HashMap<Vec<u32>, usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, e)| (e.clone(), i))
            .collect();
        let degrees: Vec<usize> = monomials.iter().map(|e| e.iter().sum::<u32>() as usize).collect();
        let mut table = Vec::new();
        for (i, a) in monomials.iter().enumerate() {
            for (j, b) in monomials.iter().enumerate() {
                if degrees[i] + degrees[j] > k {
                    continue;
                }
                let prod: Vec<u32> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                table.push((i as u32, j as u32, index[&prod] as u32));
            }
        }
        JetSpace {
            m,
            k,
            monomials,
            index,
            table,
        }
    }

    pub fn vars(&self) -> usize {
        self.m
    }

    pub fn order(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[Vec<u32>] {
        &self.monomials
    }

    pub fn index_of(&self, exps: &[u32]) -> Option<usize> {
        self.index.get(exps).copied()
    }

    /// Index of the linear monomial `h_j`, if the order is at least one.
    pub fn linear_index(&self, j: usize) -> Option<usize> {
        let mut e = vec![0u32; self.m];
        e[j] = 1;
        self.index_of(&e)
    }

    pub fn zero(&self) -> Vec<f64> {
        vec![0.0; self.len()]
    }

    pub fn constant(&self, c: f64) -> Vec<f64> {
        let mut v = self.zero();
        v[0] = c;
        v
    }

    pub fn mul(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = self.zero();
        for &(i, j, t) in &self.table {
            out[t as usize] += a[i as usize] * b[j as usize];
        }
        out
    }

    /// `Σ_i series[i] w^i` for a jet `w` whose constant term is ignored.
    pub fn compose(&self, series: &[f64], w: &[f64]) -> Vec<f64> {
        let mut w0 = w.to_vec();
        w0[0] = 0.0;
        let top = series.len().min(self.k + 1);
        let mut acc = self.constant(series[top - 1]);
        for i in (0..top - 1).rev() {
            acc = self.mul(&acc, &w0);
            acc[0] += series[i];
        }
        acc
    }
}

/// Binomial coefficient `a choose k` for real `a`.
pub fn binomial(a: f64, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (a - i as f64) / (i as f64 + 1.0))
}

/// Coefficients of `(1 + w)^a` through order `k`.
pub fn binomial_series(a: f64, k: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(k + 1);
    let mut c = 1.0;
    for i in 0..=k {
        out.push(c);
        c *= (a - i as f64) / (i as f64 + 1.0);
    }
    out
}

fn series_recip(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut c = vec![0.0; n];
    c[0] = 1.0 / a[0];
    for i in 1..n {
        let s: f64 = (1..=i).map(|j| a[j] * c[i - j]).sum();
        c[i] = -s / a[0];
    }
    c
}

fn series_exp(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    let mut e = vec![0.0; n];
    e[0] = a[0].exp();
    for i in 1..n {
        let s: f64 = (1..=i).map(|j| j as f64 * a[j] * e[i - j]).sum();
        e[i] = s / i as f64;
    }
    e
}

/// Smooth step on `[0, 1]`: `e^{-1/t} / (e^{-1/t} + e^{-1/(1-t)})`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = 1.0 / t - 1.0 / (1.0 - t);
        if a > 700.0 {
            0.0
        } else {
            1.0 / (1.0 + a.exp())
        }
    }
}

/// Radial cutoff: 0 for `ρ <= 1`, 1 for `ρ >= 2`, smooth in between.
pub fn cutoff(rho: f64) -> f64 {
    smooth_step(rho - 1.0)
}

/// Taylor coefficients in `w` of `cutoff(sqrt(u0 + w))` through order `k`.
pub fn cutoff_series(u0: f64, k: usize) -> Vec<f64> {
    let mut out = vec![0.0; k + 1];
    let rho0 = u0.sqrt();
    if rho0 <= 1.0 {
        return out;
    }
    if rho0 >= 2.0 {
        out[0] = 1.0;
        return out;
    }
    // rho(w) = sqrt(u0) (1 + w/u0)^{1/2}
    let mut t: Vec<f64> = binomial_series(0.5, k)
        .iter()
        .enumerate()
        .map(|(i, b)| rho0 * b / u0.powi(i as i32))
        .collect();
    t[0] -= 1.0;
    let one_minus: Vec<f64> = t
        .iter()
        .enumerate()
        .map(|(i, c)| if i == 0 { 1.0 - c } else { -c })
        .collect();
    let inv_t = series_recip(&t);
    let inv_1mt = series_recip(&one_minus);
    let a: Vec<f64> = inv_t.iter().zip(&inv_1mt).map(|(x, y)| x - y).collect();
    // beyond this the step is flat to double precision
    if a[0] > 40.0 {
        return out;
    }
    if a[0] < -40.0 {
        out[0] = 1.0;
        return out;
    }
    let mut denom = series_exp(&a);
    denom[0] += 1.0;
    series_recip(&denom)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jet_product_truncates() {
        let s = JetSpace::new(2, 2);
        assert_eq!(s.len(), 6);
        // (1 + h1)(1 + h2) = 1 + h1 + h2 + h1 h2
        let mut a = s.constant(1.0);
        a[s.linear_index(0).unwrap()] = 1.0;
        let mut b = s.constant(1.0);
        b[s.linear_index(1).unwrap()] = 1.0;
        let p = s.mul(&a, &b);
        assert_eq!(p[s.index_of(&[1, 1]).unwrap()], 1.0);
        // (1 + h1)^3 truncated at order 2: 1 + 3h1 + 3h1^2
        let c = s.mul(&s.mul(&a, &a), &a);
        assert_eq!(c[s.index_of(&[2, 0]).unwrap()], 3.0);
        assert_eq!(c[s.index_of(&[1, 0]).unwrap()], 3.0);
    }

    #[test]
    fn compose_matches_power() {
        let s = JetSpace::new(1, 5);
        let mut w = s.zero();
        w[1] = 0.3;
        let out = s.compose(&binomial_series(-1.5, 5), &w);
        for (i, v) in out.iter().enumerate() {
            let expect = binomial(-1.5, i) * 0.3f64.powi(i as i32);
            assert!((v - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn cutoff_shape() {
        assert_eq!(cutoff(0.5), 0.0);
        assert_eq!(cutoff(1.0), 0.0);
        assert_eq!(cutoff(2.0), 1.0);
        assert_eq!(cutoff(7.0), 1.0);
        assert!((cutoff(1.5) - 0.5).abs() < 1e-15);
        let mut prev = 0.0;
        for i in 0..=100 {
            let v = cutoff(1.0 + i as f64 / 100.0);
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn cutoff_series_matches_finite_differences() {
        for &rho in &[1.2, 1.5, 1.8] {
            let u0: f64 = rho * rho;
            let c = cutoff_series(u0, 3);
            let g = |u: f64| cutoff(u.sqrt());
            let h = 1e-4;
            assert!((c[0] - g(u0)).abs() < 1e-14);
            let d1 = (g(u0 + h) - g(u0 - h)) / (2.0 * h);
            assert!((c[1] - d1).abs() < 1e-6 * (1.0 + d1.abs()), "{rho}: {} vs {d1}", c[1]);
            let d2 = (g(u0 + h) - 2.0 * g(u0) + g(u0 - h)) / (h * h) / 2.0;
            assert!((c[2] - d2).abs() < 1e-4 * (1.0 + d2.abs()), "{rho}: {} vs {d2}", c[2]);
        }
    }
}
