//! Domains, cell-valued vorticity fields and their Fourier representations.
//!
//! All quadrature in the crate is exact cell quadrature: a field is the list
//! of its cell values and integrals are plain weighted sums. Cells have equal
//! area on every supported domain; the disk uses equal-area annuli, which are
//! uniform in the variable s = r^2.

pub mod io;

pub(crate) mod fft;

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{CoreError, Result};

/// Flow domain. The channel has height fixed to [0,1] with walls at the top
/// and bottom; the torus is fully periodic; the disk carries radial profiles
/// only, stored on equal-area annular cells.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Channel {
        lx: f64,
        nx: usize,
        ny: usize,
    },
    Torus {
        lx: f64,
        ly: f64,
        nx: usize,
        ny: usize,
    },
    DiskRadial {
        radius: f64,
        ncells: usize,
    },
}

impl Domain {
    pub fn channel(lx: f64, nx: usize, ny: usize) -> Result<Self> {
        check_extent("lx", lx)?;
        check_res(nx, ny)?;
        Ok(Domain::Channel { lx, nx, ny })
    }

    /// Channel of circumference 2*pi, the default geometry.
    pub fn channel_default(nx: usize, ny: usize) -> Result<Self> {
        Domain::channel(std::f64::consts::TAU, nx, ny)
    }

    pub fn torus(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Self> {
        check_extent("lx", lx)?;
        check_extent("ly", ly)?;
        check_res(nx, ny)?;
        Ok(Domain::Torus { lx, ly, nx, ny })
    }

    pub fn torus_default(nx: usize, ny: usize) -> Result<Self> {
        let tau = std::f64::consts::TAU;
        Domain::torus(tau, tau, nx, ny)
    }

    pub fn disk_radial(radius: f64, ncells: usize) -> Result<Self> {
        check_extent("radius", radius)?;
        if ncells < 4 {
            return Err(CoreError::InvalidResolution(format!(
                "disk needs at least 4 radial cells, got {ncells}"
            )));
        }
        Ok(Domain::DiskRadial { radius, ncells })
    }

    pub fn disk_default(ncells: usize) -> Result<Self> {
        Domain::disk_radial(1.0, ncells)
    }

    /// Grid shape as (rows, cols) = (ny, nx); disks are a single column.
    pub fn shape(&self) -> (usize, usize) {
        match *self {
            Domain::Channel { nx, ny, .. } => (ny, nx),
            Domain::Torus { nx, ny, .. } => (ny, nx),
            Domain::DiskRadial { ncells, .. } => (ncells, 1),
        }
    }

    pub fn num_cells(&self) -> usize {
        let (r, c) = self.shape();
        r * c
    }

    pub fn area(&self) -> f64 {
        match *self {
            Domain::Channel { lx, .. } => lx,
            Domain::Torus { lx, ly, .. } => lx * ly,
            Domain::DiskRadial { radius, .. } => std::f64::consts::PI * radius * radius,
        }
    }

    /// Every cell has the same area on all three domain kinds.
    pub fn cell_area(&self) -> f64 {
        self.area() / self.num_cells() as f64
    }

    /// Center of cell (row, col). Channel and torus cells return (x1, x2);
    /// disk cells return (r, 0) with r at the equal-area midpoint of the
    /// annulus, i.e. the midpoint in s = r^2.
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        match *self {
            Domain::Channel { lx, nx, ny } => {
                let x1 = (col as f64 + 0.5) * lx / nx as f64;
                let x2 = (row as f64 + 0.5) / ny as f64;
                (x1, x2)
            }
            Domain::Torus { lx, ly, nx, ny } => {
                let x1 = (col as f64 + 0.5) * lx / nx as f64;
                let x2 = (row as f64 + 0.5) * ly / ny as f64;
                (x1, x2)
            }
            Domain::DiskRadial { radius, ncells } => {
                let s = (row as f64 + 0.5) * radius * radius / ncells as f64;
                (s.sqrt(), 0.0)
            }
        }
    }

    pub fn is_disk(&self) -> bool {
        matches!(self, Domain::DiskRadial { .. })
    }

    pub(crate) fn kind_name(&self) -> &'static str {
        match self {
            Domain::Channel { .. } => "channel",
            Domain::Torus { .. } => "torus",
            Domain::DiskRadial { .. } => "disk",
        }
    }
}

fn check_extent(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v <= 0.0 {
        return Err(CoreError::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )));
    }
    Ok(())
}

fn check_res(nx: usize, ny: usize) -> Result<()> {
    if nx < 4 || ny < 4 {
        return Err(CoreError::InvalidResolution(format!(
            "resolution must be at least 4x4, got {nx}x{ny}"
        )));
    }
    if nx % 2 != 0 || ny % 2 != 0 {
        return Err(CoreError::InvalidResolution(format!(
            "resolution must be even for spectral transforms, got {nx}x{ny}"
        )));
    }
    Ok(())
}

/// Scalar vorticity given by its cell values, together with a sup-norm
/// certificate: |values| <= bound everywhere.
#[derive(Debug, Clone)]
pub struct VorticityField {
    domain: Domain,
    values: Array2<f64>,
    bound: f64,
}

impl VorticityField {
    /// Wraps cell values; the bound certificate is the measured sup norm.
    pub fn new(domain: Domain, values: Array2<f64>) -> Result<Self> {
        if values.dim() != domain.shape() {
            return Err(CoreError::InvalidResolution(format!(
                "value shape {:?} does not match domain shape {:?}",
                values.dim(),
                domain.shape()
            )));
        }
        let mut bound: f64 = 0.0;
        for &v in values.iter() {
            if !v.is_finite() {
                return Err(CoreError::NonFinite("field value".into()));
            }
            bound = bound.max(v.abs());
        }
        Ok(VorticityField {
            domain,
            values,
            bound,
        })
    }

    pub fn zeros(domain: Domain) -> Self {
        let shape = domain.shape();
        VorticityField {
            domain,
            values: Array2::zeros(shape),
            bound: 0.0,
        }
    }

    pub fn from_fn(domain: Domain, mut f: impl FnMut(f64, f64) -> f64) -> Result<Self> {
        let (rows, cols) = domain.shape();
        let mut values = Array2::zeros((rows, cols));
        for r in 0..rows {
            for c in 0..cols {
                let (x1, x2) = domain.cell_center(r, c);
                values[[r, c]] = f(x1, x2);
            }
        }
        VorticityField::new(domain, values)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Mutable access; the caller is responsible for finiteness, the bound is
    /// re-measured afterwards.
    pub fn map_values(&mut self, f: impl Fn(f64) -> f64) {
        self.values.mapv_inplace(f);
        self.refresh_bound();
    }

    pub fn set_values(&mut self, values: Array2<f64>) -> Result<()> {
        let replaced = VorticityField::new(self.domain.clone(), values)?;
        *self = replaced;
        Ok(())
    }

    fn refresh_bound(&mut self) {
        self.bound = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn mean(&self) -> f64 {
        self.values.sum() / self.values.len() as f64
    }

    pub fn integral(&self) -> f64 {
        self.values.sum() * self.domain.cell_area()
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum::<f64>() * self.domain.cell_area()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() * self.domain.cell_area()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    pub fn same_domain(&self, other: &VorticityField) -> Result<()> {
        if self.domain != other.domain {
            return Err(CoreError::DomainMismatch(format!(
                "{:?} vs {:?}",
                self.domain, other.domain
            )));
        }
        Ok(())
    }

    /// Cell values flattened row-major, the canonical cell order.
    pub fn flat(&self) -> Vec<f64> {
        self.values.iter().copied().collect()
    }

    pub fn from_flat(domain: Domain, flat: &[f64]) -> Result<Self> {
        let (rows, cols) = domain.shape();
        if flat.len() != rows * cols {
            return Err(CoreError::InvalidResolution(format!(
                "expected {} cells, got {}",
                rows * cols,
                flat.len()
            )));
        }
        let values =
            Array2::from_shape_vec((rows, cols), flat.to_vec()).expect("shape checked above");
        VorticityField::new(domain, values)
    }
}

/// Fourier coefficients of a field. On the torus both directions are
/// transformed; on the channel only x1 is, so each column holds one mode's
/// wall-to-wall profile. Coefficients follow the convention f = sum_k
/// fhat_k exp(i 2 pi k . x / L): a constant field has its value at k = 0.
#[derive(Debug, Clone)]
pub struct SpectralField {
    domain: Domain,
    coeffs: Array2<Complex64>,
}

impl SpectralField {
    pub(crate) fn from_parts(domain: Domain, coeffs: Array2<Complex64>) -> Self {
        SpectralField { domain, coeffs }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn coeffs(&self) -> &Array2<Complex64> {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.coeffs
    }

    /// Signed integer mode index for FFT slot j of an n-point transform.
    pub fn mode_index(j: usize, n: usize) -> i64 {
        if j <= n / 2 - 1 {
            j as i64
        } else {
            j as i64 - n as i64
        }
    }
}

/// Forward transform. Coefficients come out as true mode amplitudes: the raw
/// DFT of cell-center samples is composed with the half-cell phase, so they
/// do not depend on the grid except through aliasing. Disk profiles have no
/// Fourier side and are rejected.
pub fn to_spectral(field: &VorticityField) -> Result<SpectralField> {
    let domain = field.domain().clone();
    match domain {
        Domain::Torus { nx, ny, .. } => {
            let mut data = complex_from_real(field.values());
            fft::fft2(&mut data, fft::Dir::Forward);
            let scale = 1.0 / (nx * ny) as f64;
            data.mapv_inplace(|z| z * scale);
            fft::scale_cols(&mut data, &fft::center_phase(nx));
            fft::scale_rows(&mut data, &fft::center_phase(ny));
            Ok(SpectralField {
                domain,
                coeffs: data,
            })
        }
        Domain::Channel { nx, .. } => {
            let mut data = complex_from_real(field.values());
            fft::fft_rows(&mut data, fft::Dir::Forward);
            let scale = 1.0 / nx as f64;
            data.mapv_inplace(|z| z * scale);
            fft::scale_cols(&mut data, &fft::center_phase(nx));
            Ok(SpectralField {
                domain,
                coeffs: data,
            })
        }
        Domain::DiskRadial { .. } => Err(CoreError::UnsupportedDomain(
            "disk profiles have no x1 Fourier transform".into(),
        )),
    }
}

/// Inverse transform back to cell values. The imaginary residue of a
/// conjugate-symmetric spectrum is discarded; it sits at rounding level.
pub fn from_spectral(spec: &SpectralField) -> Result<VorticityField> {
    let domain = spec.domain.clone();
    match domain {
        Domain::Torus { nx, ny, .. } => {
            let mut data = spec.coeffs.clone();
            fft::scale_cols(&mut data, &conj_phase(nx));
            fft::scale_rows(&mut data, &conj_phase(ny));
            fft::fft2(&mut data, fft::Dir::Inverse);
            VorticityField::new(domain, real_from_complex(&data))
        }
        Domain::Channel { nx, .. } => {
            let mut data = spec.coeffs.clone();
            fft::scale_cols(&mut data, &conj_phase(nx));
            fft::fft_rows(&mut data, fft::Dir::Inverse);
            VorticityField::new(domain, real_from_complex(&data))
        }
        Domain::DiskRadial { .. } => Err(CoreError::UnsupportedDomain(
            "disk profiles have no x1 Fourier transform".into(),
        )),
    }
}

fn conj_phase(n: usize) -> Vec<Complex64> {
    fft::center_phase(n).into_iter().map(|z| z.conj()).collect()
}

pub(crate) fn complex_from_real(values: &Array2<f64>) -> Array2<Complex64> {
    values.mapv(|v| Complex64::new(v, 0.0))
}

pub(crate) fn real_from_complex(values: &Array2<Complex64>) -> Array2<f64> {
    values.mapv(|z| z.re)
}
