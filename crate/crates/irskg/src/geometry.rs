//! Rectangular IRS grid geometry and its spatial correlation matrix.
//!
//! The surface is a two-dimensional grid of `n_h * n_v` elements in the
//! y-z plane.  Element `alpha` (0-based, row-major) sits at
//! `[0, (alpha mod n_h) d_h, floor(alpha / n_h) d_v]`, and the unscaled
//! spatial correlation between two elements is
//! `sinc(2 ||u_i - u_j|| / lambda)`.

use nalgebra::DMatrix;

use crate::special::sinc;

/// Eigenvalues of the sinc kernel in `[-PSD_EPS, 0)` are treated as rounding
/// noise and clipped to zero; anything below `-PSD_EPS` is an error.
pub const PSD_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct IrsGeometry {
    /// Elements per row.
    pub n_h: usize,
    /// Elements per column.
    pub n_v: usize,
    /// Element width in meters.
    pub d_h: f64,
    /// Element height in meters.
    pub d_v: f64,
    /// Carrier wavelength in meters.
    pub wavelength: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeometryError {
    InvalidDimensions(String),
    /// The kernel matrix had an eigenvalue below `-PSD_EPS`.
    NotPositiveSemidefinite(f64),
}

impl std::fmt::Display for GeometryError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GeometryError::InvalidDimensions(msg) => write!(f, "invalid geometry: {msg}"),
            GeometryError::NotPositiveSemidefinite(ev) => {
                write!(f, "correlation matrix indefinite: eigenvalue {ev}")
            }
        }
    }
}

impl std::error::Error for GeometryError {}

impl IrsGeometry {
    pub fn new(
        n_h: usize,
        n_v: usize,
        d_h: f64,
        d_v: f64,
        wavelength: f64,
    ) -> Result<Self, GeometryError> {
        if n_h < 1 || n_v < 1 {
            return Err(GeometryError::InvalidDimensions(format!(
                "need at least one element per axis, got {n_h}x{n_v}"
            )));
        }
        if !(d_h > 0.0) || !(d_v > 0.0) || !(wavelength > 0.0) {
            return Err(GeometryError::InvalidDimensions(format!(
                "element sizes and wavelength must be positive (d_h={d_h}, d_v={d_v}, lambda={wavelength})"
            )));
        }
        Ok(Self { n_h, n_v, d_h, d_v, wavelength })
    }

    /// Square geometry with both element sizes equal to `spacing * wavelength`.
    pub fn square(n: usize, spacing_wavelengths: f64, wavelength: f64) -> Result<Self, GeometryError> {
        let d = spacing_wavelengths * wavelength;
        Self::new(n, n, d, d, wavelength)
    }

    /// Total element count `N = n_h * n_v`.
    pub fn element_count(&self) -> usize {
        self.n_h * self.n_v
    }

    /// Physical element area `d_h * d_v`, the factor that scales path gain
    /// into the correlation matrix scale `kappa`.
    pub fn element_area(&self) -> f64 {
        self.d_h * self.d_v
    }
}

/// Element positions in meters, row-major element order.
pub fn element_positions(geom: &IrsGeometry) -> Vec<[f64; 3]> {
    (0..geom.element_count())
        .map(|alpha| {
            [
                0.0,
                (alpha % geom.n_h) as f64 * geom.d_h,
                (alpha / geom.n_h) as f64 * geom.d_v,
            ]
        })
        .collect()
}

/// Spatial correlation matrix of the grid together with its scale factor.
///
/// `entries` is the unit-diagonal sinc kernel; the physical covariance of an
/// IRS channel vector is `kappa * entries`.  The scale is carried separately
/// so traces of products can be evaluated as `kappa_i * kappa_j *` (a trace
/// of unit-diagonal kernels) without forming scaled copies.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    pub entries: DMatrix<f64>,
    pub kappa: f64,
}

impl CorrelationMatrix {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}

/// Unscaled (`kappa = 1`) spatial correlation matrix:
/// entry `(i, j) = sinc(2 ||u_i - u_j|| / lambda)`.
pub fn spatial_correlation(geom: &IrsGeometry) -> CorrelationMatrix {
    let pos = element_positions(geom);
    let n = pos.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = 1.0;
        for j in 0..i {
            let dy = pos[i][1] - pos[j][1];
            let dz = pos[i][2] - pos[j][2];
            let dist = (dy * dy + dz * dz).sqrt();
            let v = sinc(2.0 * dist / geom.wavelength);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    CorrelationMatrix { entries: m, kappa: 1.0 }
}

/// Attach the physical scale `kappa = beta * d_h * d_v` to a correlation
/// matrix.  Entries are left untouched.
pub fn scale_correlation(r: &CorrelationMatrix, beta: f64, geom: &IrsGeometry) -> CorrelationMatrix {
    assert!(beta > 0.0, "path gain must be positive");
    CorrelationMatrix { entries: r.entries.clone(), kappa: r.kappa * beta * geom.element_area() }
}

/// Eigenvalues of the kernel, with rounding-level negatives clipped to zero.
///
/// Returns an error if any eigenvalue is below `-PSD_EPS`: the sinc kernel is
/// positive semidefinite in exact arithmetic, so anything larger than
/// rounding noise indicates a broken input.
pub fn clipped_eigen(r: &CorrelationMatrix) -> Result<(DMatrix<f64>, Vec<f64>), GeometryError> {
    let eig = r.entries.clone().symmetric_eigen();
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    for v in &mut vals {
        if *v < 0.0 {
            if *v < -PSD_EPS {
                return Err(GeometryError::NotPositiveSemidefinite(*v));
            }
            *v = 0.0;
        }
    }
    Ok((eig.eigenvectors, vals))
}
