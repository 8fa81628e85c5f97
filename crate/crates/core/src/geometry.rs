//! Kerr metric in Boyer-Lindquist and horizon-regular coordinates.
//!
//! Coordinates are ordered `(t, r, phi, theta)` throughout, matching the
//! covector ordering `(tau, xi, Phi, Theta)` used by the geodesic flow.
//!
//! [`MetricValue`] stores *matrix* entries `g_{ij}`. The line element is
//! `ds^2 = sum_{ij} g_{ij} dx^i dx^j`, so the coefficient of the cross term
//! `dt dphi` in `ds^2` is `2 g_{t phi}`; see
//! [`MetricValue::line_element_coefficient`]. With this convention the
//! covariant and contravariant tables are exact matrix inverses.

use nalgebra::{Matrix4, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;
use crate::smooth::{smooth_step, smooth_step_deriv};

pub const T: usize = 0;
pub const R: usize = 1;
pub const PHI: usize = 2;
pub const THETA: usize = 3;

const SINGULAR_EPS: f64 = 1e-14;

/// Mass `M` and rotation parameter `a` of the black hole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlackHoleParams {
    mass: f64,
    spin: f64,
    ratio_cap: f64,
}

impl BlackHoleParams {
    pub const DEFAULT_RATIO_CAP: f64 = 0.3;

    pub fn new(mass: f64, spin: f64) -> Result<Self> {
        Self::with_ratio_cap(mass, spin, Self::DEFAULT_RATIO_CAP)
    }

    pub fn schwarzschild(mass: f64) -> Result<Self> {
        Self::new(mass, 0.0)
    }

    pub fn with_ratio_cap(mass: f64, spin: f64, ratio_cap: f64) -> Result<Self> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::InvalidParams(format!("mass must be positive, got {mass}")));
        }
        if !spin.is_finite() {
            return Err(Error::InvalidParams(format!("spin must be finite, got {spin}")));
        }
        if !(ratio_cap.is_finite() && ratio_cap >= 0.0) {
            return Err(Error::InvalidParams(format!("ratio cap must be >= 0, got {ratio_cap}")));
        }
        if spin.abs() > ratio_cap * mass {
            return Err(Error::InvalidParams(format!(
                "|a|/M = {} exceeds the cap {ratio_cap}",
                spin.abs() / mass
            )));
        }
        Ok(Self { mass, spin, ratio_cap })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn spin(&self) -> f64 {
        self.spin
    }

    pub fn ratio_cap(&self) -> f64 {
        self.ratio_cap
    }

    /// Outer horizon radius `r+`.
    pub fn r_plus(&self) -> Result<f64> {
        horizon_radii(self).map(|(_, rp)| rp)
    }
}

/// `Delta = r^2 - 2 M r + a^2`.
pub fn delta(r: f64, params: &BlackHoleParams) -> f64 {
    let (m, a) = (params.mass, params.spin);
    r * r - 2.0 * m * r + a * a
}

/// `rho^2 = r^2 + a^2 cos^2(theta)`.
pub fn rho2(r: f64, theta: f64, params: &BlackHoleParams) -> f64 {
    let c = theta.cos();
    r * r + params.spin * params.spin * c * c
}

/// Roots `(r-, r+)` of `Delta`.
pub fn horizon_radii(params: &BlackHoleParams) -> Result<(f64, f64)> {
    let (m, a) = (params.mass, params.spin);
    if a.abs() > m {
        return Err(Error::Extremal { mass: m, spin: a });
    }
    let s = ((m - a) * (m + a)).sqrt();
    // r- computed as a^2 / r+ avoids cancellation for small a.
    let r_plus = m + s;
    let r_minus = if r_plus > 0.0 { a * a / r_plus } else { m - s };
    Ok((r_minus, r_plus))
}

/// Which table a [`MetricValue`] represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Chart {
    BoyerLindquistCovariant,
    BoyerLindquistContravariant,
    KerrStarCovariant,
}

/// A symmetric 4x4 metric table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricValue {
    components: [[f64; 4]; 4],
    chart: Chart,
}

impl MetricValue {
    fn from_entries(entries: &[(usize, usize, f64)], chart: Chart) -> Self {
        let mut components = [[0.0; 4]; 4];
        for &(i, j, v) in entries {
            components[i][j] = v;
            components[j][i] = v;
        }
        Self { components, chart }
    }

    pub fn chart(&self) -> Chart {
        self.chart
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.components[i][j]
    }

    pub fn components(&self) -> &[[f64; 4]; 4] {
        &self.components
    }

    /// Coefficient of `dx^i dx^j` in the line element (twice the matrix entry off the diagonal).
    pub fn line_element_coefficient(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.components[i][i]
        } else {
            2.0 * self.components[i][j]
        }
    }

    pub fn matrix(&self) -> Matrix4<f64> {
        Matrix4::from_fn(|i, j| self.components[i][j])
    }

    pub fn determinant(&self) -> f64 {
        self.matrix().determinant()
    }

    /// Number of negative eigenvalues; 1 for a Lorentzian metric.
    pub fn negative_eigenvalues(&self) -> usize {
        SymmetricEigen::new(self.matrix())
            .eigenvalues
            .iter()
            .filter(|&&v| v < 0.0)
            .count()
    }

    /// Numerical inverse (for charts without a closed-form inverse).
    pub fn inverse(&self) -> Option<Matrix4<f64>> {
        self.matrix().try_inverse()
    }
}

/// `max_{ij} |(g h)_{ij} - delta_{ij}|`.
pub fn identity_defect(g: &MetricValue, h: &MetricValue) -> f64 {
    let p = g.matrix() * h.matrix();
    (p - Matrix4::identity()).abs().max()
}

/// A point of the Boyer-Lindquist chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoyerLindquistPoint {
    pub t: f64,
    pub r: f64,
    pub phi: f64,
    pub theta: f64,
}

impl BoyerLindquistPoint {
    pub fn new(t: f64, r: f64, phi: f64, theta: f64) -> Self {
        Self { t, r, phi, theta }
    }

    pub fn at(r: f64, theta: f64) -> Self {
        Self::new(0.0, r, 0.0, theta)
    }
}

fn check_bl_chart(point: &BoyerLindquistPoint, params: &BlackHoleParams) -> Result<(f64, f64, f64)> {
    let (r, theta) = (point.r, point.theta);
    if !(r > 0.0) {
        return Err(Error::Domain(format!("r must be positive, got {r}")));
    }
    let d = delta(r, params);
    let m2 = params.mass * params.mass;
    if d.abs() <= SINGULAR_EPS * m2 {
        return Err(Error::ChartSingularity { r, theta, reason: "Delta vanishes" });
    }
    let s = theta.sin();
    if s.abs() <= SINGULAR_EPS {
        return Err(Error::ChartSingularity { r, theta, reason: "polar axis" });
    }
    Ok((d, rho2(r, theta, params), s * s))
}

/// Covariant Kerr metric in Boyer-Lindquist coordinates.
pub fn bl_metric(point: &BoyerLindquistPoint, params: &BlackHoleParams) -> Result<MetricValue> {
    let (d, rho2, sin2) = check_bl_chart(point, params)?;
    let (m, a, r) = (params.mass, params.spin, point.r);
    let sigma = (r * r + a * a).powi(2) - a * a * d * sin2;
    Ok(MetricValue::from_entries(
        &[
            (T, T, -(d - a * a * sin2) / rho2),
            (T, PHI, -2.0 * a * m * r * sin2 / rho2),
            (R, R, rho2 / d),
            (PHI, PHI, sigma * sin2 / rho2),
            (THETA, THETA, rho2),
        ],
        Chart::BoyerLindquistCovariant,
    ))
}

/// Contravariant Kerr metric in Boyer-Lindquist coordinates.
pub fn bl_inverse_metric(point: &BoyerLindquistPoint, params: &BlackHoleParams) -> Result<MetricValue> {
    let (d, rho2, sin2) = check_bl_chart(point, params)?;
    let (m, a, r) = (params.mass, params.spin, point.r);
    let sigma = (r * r + a * a).powi(2) - a * a * d * sin2;
    Ok(MetricValue::from_entries(
        &[
            (T, T, -sigma / (rho2 * d)),
            (T, PHI, -2.0 * a * m * r / (rho2 * d)),
            (R, R, d / rho2),
            (PHI, PHI, (d - a * a * sin2) / (rho2 * d * sin2)),
            (THETA, THETA, 1.0 / rho2),
        ],
        Chart::BoyerLindquistContravariant,
    ))
}

/// `dr*/dr = (r^2 + a^2) / Delta`.
pub fn tortoise_derivative(r: f64, params: &BlackHoleParams) -> f64 {
    let a = params.spin;
    (r * r + a * a) / delta(r, params)
}

fn tortoise_raw(r: f64, r_minus: f64, r_plus: f64, params: &BlackHoleParams) -> f64 {
    let m = params.mass;
    let width = r_plus - r_minus;
    let outer = 2.0 * m * r_plus / width * (r - r_plus).ln();
    let inner = if r_minus == 0.0 {
        0.0
    } else {
        2.0 * m * r_minus / width * (r - r_minus).ln()
    };
    r + outer - inner
}

/// Tortoise coordinate `r*(r)`, normalised so that `r*(3M) = 0`.
pub fn tortoise_coordinate(r: f64, params: &BlackHoleParams) -> Result<f64> {
    let (r_minus, r_plus) = horizon_radii(params)?;
    if !(r > r_plus) {
        return Err(Error::Domain(format!("tortoise coordinate needs r > r+ = {r_plus}, got {r}")));
    }
    if r_plus - r_minus <= 1e-12 * params.mass {
        return Err(Error::Domain("tortoise coordinate undefined for extremal spin".into()));
    }
    let origin = 3.0 * params.mass;
    Ok(tortoise_raw(r, r_minus, r_plus, params) - tortoise_raw(origin, r_minus, r_plus, params))
}

/// Result of [`MuProfile::check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MuReport {
    /// `min mu'` over the scanned grid.
    pub min_mu_prime: f64,
    /// `min 2 - (1 - 2Mr/rho^2) mu'` over the grid and the scanned polar angles.
    pub min_spacelike_margin: f64,
    /// `min (mu - r*)` over grid points with `r > 2M` (and `r > r+`).
    pub min_excess_over_tortoise: f64,
}

/// The radial profile `mu` defining the horizon-regular time `v~ = v+ - mu(r)`.
///
/// `mu` equals `r*` for `r >= 5M/2` and is continued inward by integrating
/// `mu' = w r*' + (1 - w) kappa`, where `w` steps smoothly from 0 at
/// `r = 11M/5` to 1 at `r = 5M/2`. Below `11M/5` the slope is the constant
/// `kappa = 1`, so `mu` is smooth and finite across `r = r+`. Since
/// `mu' <= r*'` on the blend region, `mu >= r*` there.
#[derive(Debug, Clone)]
pub struct MuProfile {
    params: BlackHoleParams,
    blend_start: f64,
    blend_end: f64,
    inner_slope: f64,
    mu_at_blend_start: f64,
    mu_at_blend_end: f64,
}

impl MuProfile {
    const PANELS: usize = 24;
    const ORDER: usize = 16;

    pub fn new(params: &BlackHoleParams) -> Result<Self> {
        let m = params.mass;
        let (_, r_plus) = horizon_radii(params)?;
        let blend_start = 2.2 * m;
        let blend_end = 2.5 * m;
        if r_plus >= blend_start {
            return Err(Error::Admissibility(format!(
                "horizon r+ = {r_plus} overlaps the mu blend region starting at {blend_start}"
            )));
        }
        let mut profile = Self {
            params: *params,
            blend_start,
            blend_end,
            inner_slope: 1.0,
            mu_at_blend_start: 0.0,
            mu_at_blend_end: tortoise_coordinate(blend_end, params)?,
        };
        let drop = quad::integrate(|s| profile.derivative(s), blend_start, blend_end, Self::PANELS, Self::ORDER);
        profile.mu_at_blend_start = profile.mu_at_blend_end - drop;
        Ok(profile)
    }

    pub fn params(&self) -> &BlackHoleParams {
        &self.params
    }

    fn weight(&self, r: f64) -> (f64, f64) {
        let width = self.blend_end - self.blend_start;
        let t = (r - self.blend_start) / width;
        (smooth_step(t), smooth_step_deriv(t) / width)
    }

    /// `mu'(r)`.
    pub fn derivative(&self, r: f64) -> f64 {
        if r >= self.blend_end {
            return tortoise_derivative(r, &self.params);
        }
        if r <= self.blend_start {
            return self.inner_slope;
        }
        let (w, _) = self.weight(r);
        w * tortoise_derivative(r, &self.params) + (1.0 - w) * self.inner_slope
    }

    /// `mu(r)` for `r > 0`.
    pub fn value(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::Domain(format!("mu profile needs r > 0, got {r}")));
        }
        if r >= self.blend_end {
            return tortoise_coordinate(r, &self.params);
        }
        if r <= self.blend_start {
            return Ok(self.mu_at_blend_start - self.inner_slope * (self.blend_start - r));
        }
        let drop = quad::integrate(|s| self.derivative(s), r, self.blend_end, Self::PANELS, Self::ORDER);
        Ok(self.mu_at_blend_end - drop)
    }

    /// `(mu, mu')` at `r`.
    pub fn evaluate(&self, r: f64) -> Result<(f64, f64)> {
        Ok((self.value(r)?, self.derivative(r)))
    }

    /// Scans conditions (i)-(ii) on the radial grid and on a fan of polar angles.
    ///
    /// Fails with [`Error::Admissibility`] if `mu' <= 0`, if the `v~ = const`
    /// slices fail to be spacelike, or if `mu < r*` somewhere on `r > 2M`.
    pub fn check(&self, r_grid: &[f64]) -> Result<MuReport> {
        let m = self.params.mass;
        let r_plus = self.params.r_plus()?;
        let thetas: Vec<f64> = (1..16).map(|k| std::f64::consts::PI * k as f64 / 16.0).collect();
        let mut report = MuReport {
            min_mu_prime: f64::INFINITY,
            min_spacelike_margin: f64::INFINITY,
            min_excess_over_tortoise: f64::INFINITY,
        };
        for &r in r_grid {
            let (mu, dmu) = self.evaluate(r)?;
            report.min_mu_prime = report.min_mu_prime.min(dmu);
            for &theta in &thetas {
                let f = 1.0 - 2.0 * m * r / rho2(r, theta, &self.params);
                report.min_spacelike_margin = report.min_spacelike_margin.min(2.0 - f * dmu);
            }
            if r > 2.0 * m && r > r_plus {
                let excess = mu - tortoise_coordinate(r, &self.params)?;
                report.min_excess_over_tortoise = report.min_excess_over_tortoise.min(excess);
            }
        }
        if report.min_mu_prime <= 0.0 {
            return Err(Error::Admissibility(format!("mu' reaches {}", report.min_mu_prime)));
        }
        if report.min_spacelike_margin <= 0.0 {
            return Err(Error::Admissibility(format!(
                "v~ slices fail to be spacelike (margin {})",
                report.min_spacelike_margin
            )));
        }
        if report.min_excess_over_tortoise < -1e-10 * m {
            return Err(Error::Admissibility(format!(
                "mu < r* by {}",
                -report.min_excess_over_tortoise
            )));
        }
        Ok(report)
    }
}

/// A point of the horizon-regular chart `(v~, r, phi+, theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KerrStarPoint {
    pub v: f64,
    pub r: f64,
    pub phi: f64,
    pub theta: f64,
}

/// Covariant metric in `(v~, r, phi+, theta)` coordinates, regular across `r = r+`.
pub fn kerr_star_metric(point: &KerrStarPoint, profile: &MuProfile) -> Result<MetricValue> {
    let params = profile.params();
    let (r, theta) = (point.r, point.theta);
    if !(r > 0.0) {
        return Err(Error::Domain(format!("kerr-star chart needs r > 0, got {r}")));
    }
    let s = theta.sin();
    if s.abs() <= SINGULAR_EPS {
        return Err(Error::ChartSingularity { r, theta, reason: "polar axis" });
    }
    let (m, a) = (params.mass, params.spin);
    let sin2 = s * s;
    let rho2 = rho2(r, theta, params);
    let d = delta(r, params);
    let f = 1.0 - 2.0 * m * r / rho2;
    let dmu = profile.derivative(r);
    let sigma = (r * r + a * a).powi(2) - d * a * a * sin2;
    Ok(MetricValue::from_entries(
        &[
            (T, T, -f),
            (T, R, 1.0 - f * dmu),
            (T, PHI, -2.0 * a * m * r * sin2 / rho2),
            (R, R, 2.0 * dmu - f * dmu * dmu),
            (R, PHI, -a * sin2 * (1.0 + 2.0 * m * r * dmu / rho2)),
            (PHI, PHI, sigma * sin2 / rho2),
            (THETA, THETA, rho2),
        ],
        Chart::KerrStarCovariant,
    ))
}

/// Jacobian `d(t, r, phi, theta) / d(v~, r, phi+, theta)` of the chart change on `r > r+`.
pub fn kerr_star_jacobian(r: f64, profile: &MuProfile) -> Matrix4<f64> {
    let params = profile.params();
    let d = delta(r, params);
    let mut j = Matrix4::identity();
    j[(T, R)] = profile.derivative(r) - tortoise_derivative(r, params);
    j[(PHI, R)] = -params.spin / d;
    j
}
