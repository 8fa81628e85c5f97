//! Spheroidal eigenvalues of the angular operator
//! `a^2 tau^2 sin^2(theta) + m^2 / sin^2(theta) - (1/sin(theta)) d_theta (sin(theta) d_theta)`
//! in a fixed azimuthal sector `e^{i m phi}`.
//!
//! Eigenfunctions are expanded in orthonormal associated Legendre functions
//! `P_l^m` with `2 pi \int |P_l^m|^2 sin(theta) dtheta = 1` and no Condon-Shortley phase,
//! so the `l = 0` function is the constant `1/sqrt(4 pi)`.

use std::io::{self, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngularMode {
    pub m: i64,
    /// Branch label; equals `l` in the limit `c2 -> 0`.
    pub k: u64,
    pub c2: f64,
    pub lambda2: f64,
    /// Coefficients on `P_l^m`, `l = |m|, |m|+1, ...`.
    pub coefficients: Vec<f64>,
}

impl AngularMode {
    pub fn lambda(&self) -> f64 {
        self.lambda2.max(0.0).sqrt()
    }

    /// `\int |grad_{S^2} S|^2 dOmega` including the `m^2/sin^2` term, read off the expansion.
    pub fn gradient_energy(&self) -> f64 {
        let m = self.m.unsigned_abs() as f64;
        self.coefficients
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let l = m + i as f64;
                c * c * l * (l + 1.0)
            })
            .sum()
    }
}

/// Off-diagonal of the `cos(theta)` matrix: `cos P_l = a_l P_{l+1} + a_{l-1} P_{l-1}`.
pub fn cos_coupling(l: u64, m: i64) -> f64 {
    let l = l as f64;
    let m = m as f64;
    (((l + 1.0) * (l + 1.0) - m * m) / ((2.0 * l + 1.0) * (2.0 * l + 3.0))).sqrt()
}

pub const DEFAULT_EXTRA_BASIS: usize = 30;

fn galerkin(m: i64, c2: f64, basis_size: usize) -> DMatrix<f64> {
    let am = m.unsigned_abs();
    let n = basis_size;
    // cos(theta) on n + 1 functions, squared, truncated: exact on the first n.
    let mut c = DMatrix::<f64>::zeros(n + 1, n + 1);
    for i in 0..n {
        let a = cos_coupling(am + i as u64, m);
        c[(i, i + 1)] = a;
        c[(i + 1, i)] = a;
    }
    let c2m = &c * &c;
    DMatrix::from_fn(n, n, |i, j| {
        let l = (am + i as u64) as f64;
        let diag = if i == j { l * (l + 1.0) + c2 } else { 0.0 };
        diag - c2 * c2m[(i, j)]
    })
}

fn solve_sector(m: i64, c2: f64, basis_size: usize) -> Vec<AngularMode> {
    let full = galerkin(m, c2, basis_size);
    let am = m.unsigned_abs();
    let mut modes = Vec::with_capacity(basis_size);
    for parity in 0..2usize {
        let idx: Vec<usize> = (parity..basis_size).step_by(2).collect();
        if idx.is_empty() {
            continue;
        }
        let block = DMatrix::from_fn(idx.len(), idx.len(), |i, j| full[(idx[i], idx[j])]);
        let eig = SymmetricEigen::new(block);
        let mut order: Vec<usize> = (0..idx.len()).collect();
        order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
        for (rank, &col) in order.iter().enumerate() {
            let mut coefficients = vec![0.0; basis_size];
            for (i, &row) in idx.iter().enumerate() {
                coefficients[row] = eig.eigenvectors[(i, col)];
            }
            let lead = parity + 2 * rank;
            if coefficients[lead] < 0.0 {
                coefficients.iter_mut().for_each(|x| *x = -*x);
            }
            modes.push(AngularMode {
                m,
                k: am + lead as u64,
                c2,
                lambda2: eig.eigenvalues[col],
                coefficients,
            });
        }
    }
    modes.sort_by(|x, y| x.lambda2.total_cmp(&y.lambda2).then(x.k.cmp(&y.k)));
    modes
}

/// The lowest `count` eigenvalues in the sector `m`, ascending.
///
/// Within a parity class the Galerkin matrix is an irreducible Jacobi matrix,
/// so its eigenvalues never cross and branch labels follow the ordering.
pub fn spheroidal_eigenvalues(m: i64, c2: f64, count: usize, basis_size: usize) -> Result<Vec<AngularMode>> {
    if count == 0 {
        return Err(Error::InvalidInput("count must be at least 1".into()));
    }
    if basis_size < count + 10 {
        return Err(Error::InvalidInput(format!("basis_size {basis_size} < count + 10")));
    }
    if !(c2.is_finite() && c2 >= 0.0) {
        return Err(Error::InvalidInput(format!("c2 must be finite and non-negative, got {c2}")));
    }
    let mut modes = solve_sector(m, c2, basis_size);
    let check = solve_sector(m, c2, basis_size + 10);
    for (a, b) in modes.iter().zip(&check).take(count) {
        let shift = (a.lambda2 - b.lambda2).abs();
        if shift > 1e-10 * a.lambda2.abs().max(1.0) || a.k != b.k {
            return Err(Error::Resolution(format!(
                "branch k = {} moved by {shift:e} when the basis grew from {basis_size}",
                a.k
            )));
        }
    }
    modes.truncate(count);
    Ok(modes)
}

/// The mode with branch label `k` in sector `m`.
pub fn spheroidal_mode(m: i64, k: u64, c2: f64) -> Result<AngularMode> {
    let am = m.unsigned_abs();
    if k < am {
        return Err(Error::InvalidInput(format!("branch k = {k} below |m| = {am}")));
    }
    let count = (k - am) as usize + 1;
    let basis = count + DEFAULT_EXTRA_BASIS + (c2.sqrt() as usize);
    let modes = spheroidal_eigenvalues(m, c2, count.max(1) + 4, basis + 4)?;
    modes
        .into_iter()
        .find(|md| md.k == k)
        .ok_or_else(|| Error::Resolution(format!("branch k = {k} not among the computed modes")))
}

/// Orthonormal `P_l^m(cos theta)` for `l = |m| .. |m| + len - 1`.
pub fn legendre_basis(m: i64, len: usize, theta: f64) -> Vec<f64> {
    let am = m.unsigned_abs();
    let (s, x) = theta.sin_cos();
    let mut out = Vec::with_capacity(len);
    let mut pmm = (0.25 / std::f64::consts::PI).sqrt();
    for i in 1..=am {
        let i = i as f64;
        pmm *= ((2.0 * i + 1.0) / (2.0 * i)).sqrt() * s;
    }
    if len == 0 {
        return out;
    }
    out.push(pmm);
    if len == 1 {
        return out;
    }
    out.push(x * pmm / cos_coupling(am, m));
    for i in 2..len {
        let l = am + i as u64 - 1;
        let next = (x * out[i - 1] - cos_coupling(l - 1, m) * out[i - 2]) / cos_coupling(l, m);
        out.push(next);
    }
    out
}

/// Samples of the mode's theta profile.
pub fn eigenfunction_samples(mode: &AngularMode, thetas: &[f64]) -> Vec<f64> {
    thetas
        .iter()
        .map(|&th| {
            legendre_basis(mode.m, mode.coefficients.len(), th)
                .iter()
                .zip(&mode.coefficients)
                .map(|(p, c)| p * c)
                .sum()
        })
        .collect()
}

/// CSV with columns `m,k,c2,lambda2`.
pub fn write_eigenvalue_csv<W: Write>(modes: &[AngularMode], out: &mut W) -> io::Result<()> {
    writeln!(out, "m,k,c2,lambda2")?;
    for md in modes {
        writeln!(out, "{},{},{:.10e},{:.16e}", md.m, md.k, md.c2, md.lambda2)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate;
    use std::f64::consts::PI;

    #[test]
    fn spherical_limit() {
        let modes = spheroidal_eigenvalues(0, 0.0, 5, 40).unwrap();
        let l: Vec<f64> = modes.iter().map(|m| m.lambda2).collect();
        for (i, v) in l.iter().enumerate() {
            let k = i as f64;
            assert!((v - k * (k + 1.0)).abs() < 1e-10);
            assert_eq!(modes[i].k, i as u64);
        }
    }

    #[test]
    fn reflection_symmetry() {
        let a = spheroidal_eigenvalues(1, 0.7, 6, 40).unwrap();
        let b = spheroidal_eigenvalues(-1, 0.7, 6, 40).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.lambda2, y.lambda2);
        }
    }

    #[test]
    fn rejects_small_basis() {
        assert!(spheroidal_eigenvalues(0, 0.1, 5, 12).is_err());
        assert!(spheroidal_eigenvalues(0, 0.1, 0, 40).is_err());
    }

    #[test]
    fn low_modes_samples() {
        let m0 = spheroidal_mode(0, 0, 0.0).unwrap();
        let s = eigenfunction_samples(&m0, &[0.3, 1.7]);
        for v in s {
            assert!((v - 1.0 / (4.0 * PI).sqrt()).abs() < 1e-14);
        }
        let m1 = spheroidal_mode(0, 1, 0.0).unwrap();
        let norm = 2.0 * PI * integrate(|t| eigenfunction_samples(&m1, &[t])[0].powi(2) * t.sin(), 0.0, PI, 32, 10);
        assert!((norm - 1.0).abs() < 1e-10);
        let ratio = eigenfunction_samples(&m1, &[0.4])[0] / 0.4f64.cos();
        let ratio2 = eigenfunction_samples(&m1, &[1.2])[0] / 1.2f64.cos();
        assert!((ratio - ratio2).abs() < 1e-12);
    }

    #[test]
    fn orthonormal_branches() {
        let modes = spheroidal_eigenvalues(2, 0.5, 4, 40).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let ip = 2.0
                    * PI
                    * integrate(
                        |t| {
                            eigenfunction_samples(&modes[i], &[t])[0] * eigenfunction_samples(&modes[j], &[t])[0] * t.sin()
                        },
                        0.0,
                        PI,
                        32,
                        10,
                    );
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-8, "({i},{j}) {ip}");
            }
        }
    }

    #[test]
    fn operator_residual() {
        let c2 = 0.05;
        for m in [0i64, 1, 3] {
            let mode = spheroidal_mode(m, m.unsigned_abs() + 1, c2).unwrap();
            let h = 4e-3;
            let f = |t: f64| eigenfunction_samples(&mode, &[t])[0];
            let mut worst: f64 = 0.0;
            for i in 1..20 {
                let t = 0.15 * i as f64;
                let (s, c) = t.sin_cos();
                let (fp2, fp1, f0, fm1, fm2) = (f(t + 2.0 * h), f(t + h), f(t), f(t - h), f(t - 2.0 * h));
                let d2 = (-fp2 + 16.0 * fp1 - 30.0 * f0 + 16.0 * fm1 - fm2) / (12.0 * h * h);
                let d1 = (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * h);
                let op = c2 * s * s * f(t) + (m * m) as f64 / (s * s) * f(t) - (d2 + c / s * d1);
                worst = worst.max((op - mode.lambda2 * f(t)).abs());
            }
            assert!(worst < 1e-8, "m = {m}: {worst}");
        }
    }

    #[test]
    fn gradient_energy_spherical() {
        let md = spheroidal_mode(2, 4, 0.0).unwrap();
        assert!((md.gradient_energy() - 20.0).abs() < 1e-12);
    }
}
