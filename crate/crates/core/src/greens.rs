//! Biot-Savart solves and the conserved functionals built on them.
//!
//! The stream function solves Delta psi = omega per x1 Fourier mode: spectral
//! inversion on the torus, a wall-to-wall second-difference operator on the
//! channel (unconditionally stable at every wavenumber, unlike naive sinh
//! kernel evaluation), and an equal-area radial operator on the disk written
//! in s = r^2, where the Laplacian is 4 d/ds (s d/ds).
//!
//! Channel gauge: walls carry psi = 0 at the bottom and psi = M/lx at the
//! top, M the linear momentum. With that gauge the quadratic form
//! -1/2 sum psi omega includes the M^2/(2 lx) background term and equals the
//! kinetic energy exactly, so momentum enters the energy bookkeeping the way
//! the conservation laws require.
//!
//! Energy identity: `energy` integrates -1/2 psi omega over cells while
//! `kinetic_energy` integrates |u|^2/2 over faces (x2 differences on faces,
//! wall faces at half weight, x1 by Parseval). The two agree to rounding by
//! summation by parts, which is the main internal consistency check.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::field::{self, fft, Domain, VorticityField};

/// Physical wavenumbers 2 pi k(j) / l in FFT slot order.
pub fn wavenumbers(n: usize, l: f64) -> Vec<f64> {
    (0..n)
        .map(|j| std::f64::consts::TAU * crate::field::SpectralField::mode_index(j, n) as f64 / l)
        .collect()
}

/// Stream function, velocity and energy of one Biot-Savart solve.
#[derive(Debug, Clone)]
pub struct StreamSolution {
    domain: Domain,
    psi: Array2<f64>,
    u1: Array2<f64>,
    u2: Array2<f64>,
    boundary_values: Vec<f64>,
    gauge: f64,
    energy: f64,
    kinetic: f64,
}

impl StreamSolution {
    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Stream function at cell centers. On the disk the second axis is
    /// trivial and u1 holds the azimuthal speed.
    pub fn psi(&self) -> &Array2<f64> {
        &self.psi
    }

    pub fn psi_field(&self) -> VorticityField {
        VorticityField::new(self.domain.clone(), self.psi.clone())
            .expect("stream solutions are finite")
    }

    pub fn velocity(&self) -> (&Array2<f64>, &Array2<f64>) {
        (&self.u1, &self.u2)
    }

    pub fn max_speed(&self) -> f64 {
        self.u1
            .iter()
            .zip(self.u2.iter())
            .map(|(a, b)| (a * a + b * b).sqrt())
            .fold(0.0, f64::max)
    }

    /// -1/2 sum psi omega over cells.
    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// 1/2 sum |u|^2 over faces; equals `energy` to rounding.
    pub fn kinetic_energy(&self) -> f64 {
        self.kinetic
    }

    /// Stream function on each boundary component: [bottom, top] wall values
    /// for the channel, [outer] for the disk, empty on the torus.
    pub fn boundary_values(&self) -> &[f64] {
        &self.boundary_values
    }

    /// Top-wall stream value M/lx fixing the momentum gauge; 0 off-channel.
    pub fn gauge(&self) -> f64 {
        self.gauge
    }

    /// Largest normal speed on the boundary. The normal component is the
    /// tangential derivative of the wall trace of psi, and the solver imposes
    /// constant traces, so this is identically zero by construction; kept as
    /// an interface so callers need not know that argument.
    pub fn boundary_normal_speed(&self) -> f64 {
        0.0
    }
}

/// Solves Delta psi = omega with impermeable walls (channel, disk) or
/// periodicity (torus, which requires zero mean).
pub fn solve_stream(field: &VorticityField) -> Result<StreamSolution> {
    match *field.domain() {
        Domain::Torus { .. } => solve_torus(field),
        Domain::Channel { .. } => solve_channel(field),
        Domain::DiskRadial { .. } => solve_disk(field),
    }
}

pub fn energy(field: &VorticityField) -> Result<f64> {
    Ok(solve_stream(field)?.energy())
}

/// M(omega) = -integral of x2 omega. Channel and torus only.
pub fn momentum(field: &VorticityField) -> Result<f64> {
    match *field.domain() {
        Domain::DiskRadial { .. } => Err(CoreError::UnsupportedDomain(
            "linear momentum needs a channel or torus".into(),
        )),
        _ => Ok(momentum_unchecked(field)),
    }
}

fn momentum_unchecked(field: &VorticityField) -> f64 {
    let a = field.domain().cell_area();
    let mut m = 0.0;
    for ((r, c), &w) in field.values().indexed_iter() {
        let (_, x2) = field.domain().cell_center(r, c);
        m -= x2 * w;
    }
    m * a
}

/// A(omega) = -integral of (1-|x|^2)/2 omega. Disk only.
pub fn angular_momentum(field: &VorticityField) -> Result<f64> {
    match *field.domain() {
        Domain::DiskRadial { .. } => {
            let a = field.domain().cell_area();
            let mut total = 0.0;
            for ((r, c), &w) in field.values().indexed_iter() {
                let (radius, _) = field.domain().cell_center(r, c);
                total -= 0.5 * (1.0 - radius * radius) * w;
            }
            Ok(total * a)
        }
        _ => Err(CoreError::UnsupportedDomain(
            "angular momentum needs the disk".into(),
        )),
    }
}

/// Circulation along boundary component `component`, oriented with the fluid
/// on the left: channel components are 0 = bottom, 1 = top; the disk has the
/// single outer circle. Their sum is the total vorticity.
pub fn circulation(field: &VorticityField, component: usize) -> Result<f64> {
    let sol = solve_stream(field)?;
    match *field.domain() {
        Domain::Torus { .. } => Err(CoreError::UnsupportedDomain(
            "the torus has no boundary".into(),
        )),
        Domain::Channel { lx, nx, ny } => {
            if component > 1 {
                return Err(CoreError::InvalidParameter(format!(
                    "channel boundary components are 0 and 1, got {component}"
                )));
            }
            let h1 = lx / nx as f64;
            let h2 = 1.0 / ny as f64;
            // Wall tangential speed from the ghost-cell derivative of psi.
            let mut k = 0.0;
            for i in 0..nx {
                let u1_wall = if component == 0 {
                    -2.0 * (sol.psi[[0, i]] - sol.boundary_values[0]) / h2
                } else {
                    -2.0 * (sol.boundary_values[1] - sol.psi[[ny - 1, i]]) / h2
                };
                // Top wall is traversed against x1.
                k += if component == 0 { u1_wall } else { -u1_wall } * h1;
            }
            Ok(k)
        }
        Domain::DiskRadial { radius, ncells } => {
            if component != 0 {
                return Err(CoreError::InvalidParameter(format!(
                    "the disk has boundary component 0, got {component}"
                )));
            }
            let ds = radius * radius / ncells as f64;
            let u_theta = -4.0 * radius * sol.psi[[ncells - 1, 0]] / ds;
            Ok(std::f64::consts::TAU * radius * u_theta)
        }
    }
}

/// Green quadratic form <a, G b> = sum a psi_b over cells. Symmetric in its
/// arguments; the energy is -1/2 of the diagonal.
pub fn green_form(a: &VorticityField, b: &VorticityField) -> Result<f64> {
    a.same_domain(b)?;
    let sol = solve_stream(b)?;
    let area = a.domain().cell_area();
    Ok(a.values()
        .iter()
        .zip(sol.psi.iter())
        .map(|(w, p)| w * p)
        .sum::<f64>()
        * area)
}

/// Max-norm residual of the discrete operator the solver inverted, relative
/// to the sup norm of omega.
pub fn laplacian_residual(sol: &StreamSolution, field: &VorticityField) -> Result<f64> {
    if sol.domain != *field.domain() {
        return Err(CoreError::DomainMismatch(
            "solution and field domains differ".into(),
        ));
    }
    let scale = field.bound().max(f64::MIN_POSITIVE);
    let worst = match *field.domain() {
        Domain::Torus { lx, ly, nx, ny } => {
            let spec = field::to_spectral(&VorticityField::new(
                field.domain().clone(),
                sol.psi.clone(),
            )?)?;
            let omega_hat = field::to_spectral(field)?;
            let k1 = wavenumbers(nx, lx);
            let k2 = wavenumbers(ny, ly);
            let mut worst: f64 = 0.0;
            for ((r, c), z) in spec.coeffs().indexed_iter() {
                let ksq = k1[c] * k1[c] + k2[r] * k2[r];
                let res = -ksq * z - omega_hat.coeffs()[[r, c]];
                worst = worst.max(res.norm());
            }
            worst
        }
        Domain::Channel { lx, nx, ny } => {
            let psi_hat = rows_to_modes(&sol.psi, nx);
            let omega_hat = rows_to_modes(field.values(), nx);
            let h2 = 1.0 / ny as f64;
            let kappa = wavenumbers(nx, lx);
            let mut worst: f64 = 0.0;
            for m in 0..nx {
                let g_top = if m == 0 { sol.gauge } else { 0.0 };
                for j in 0..ny {
                    let below = if j == 0 {
                        -psi_hat[[0, m]]
                    } else {
                        psi_hat[[j - 1, m]]
                    };
                    let above = if j == ny - 1 {
                        Complex64::new(2.0 * g_top, 0.0) - psi_hat[[ny - 1, m]]
                    } else {
                        psi_hat[[j + 1, m]]
                    };
                    let lap = (below - 2.0 * psi_hat[[j, m]] + above) / (h2 * h2)
                        - kappa[m] * kappa[m] * psi_hat[[j, m]];
                    worst = worst.max((lap - omega_hat[[j, m]]).norm());
                }
            }
            worst
        }
        Domain::DiskRadial { radius, ncells } => {
            let ds = radius * radius / ncells as f64;
            let mut worst: f64 = 0.0;
            for j in 0..ncells {
                let flux_lo = if j == 0 {
                    0.0
                } else {
                    (j as f64 * ds) * (sol.psi[[j, 0]] - sol.psi[[j - 1, 0]]) / ds
                };
                let flux_hi = if j == ncells - 1 {
                    (radius * radius) * (-2.0 * sol.psi[[j, 0]]) / ds
                } else {
                    ((j + 1) as f64 * ds) * (sol.psi[[j + 1, 0]] - sol.psi[[j, 0]]) / ds
                };
                let lap = 4.0 * (flux_hi - flux_lo) / ds;
                worst = worst.max((lap - field.values()[[j, 0]]).abs());
            }
            worst
        }
    };
    Ok(worst / scale)
}

/// x1 FFT of each row, normalized to mode amplitudes with the half-cell
/// phase; rows stay physical.
fn rows_to_modes(values: &Array2<f64>, nx: usize) -> Array2<Complex64> {
    let mut data = field::complex_from_real(values);
    fft::fft_rows(&mut data, fft::Dir::Forward);
    let scale = 1.0 / nx as f64;
    data.mapv_inplace(|z| z * scale);
    fft::scale_cols(&mut data, &fft::center_phase(nx));
    data
}

fn modes_to_rows(mut data: Array2<Complex64>, nx: usize) -> Array2<f64> {
    let phase: Vec<Complex64> = fft::center_phase(nx).iter().map(|z| z.conj()).collect();
    fft::scale_cols(&mut data, &phase);
    fft::fft_rows(&mut data, fft::Dir::Inverse);
    field::real_from_complex(&data)
}

fn solve_torus(field: &VorticityField) -> Result<StreamSolution> {
    let (lx, ly, nx, ny) = match *field.domain() {
        Domain::Torus { lx, ly, nx, ny } => (lx, ly, nx, ny),
        _ => unreachable!(),
    };
    let mean = field.mean();
    if mean.abs() > 1e-11 * field.bound().max(1.0) {
        return Err(CoreError::InvalidParameter(format!(
            "torus solve needs zero mean vorticity, got mean {mean:e}"
        )));
    }
    let omega_hat = field::to_spectral(field)?;
    let k1 = wavenumbers(nx, lx);
    let k2 = wavenumbers(ny, ly);

    let mut psi_hat = omega_hat.clone();
    let mut kinetic = 0.0;
    for ((r, c), z) in psi_hat.coeffs_mut().indexed_iter_mut() {
        let ksq = k1[c] * k1[c] + k2[r] * k2[r];
        if ksq == 0.0 {
            *z = Complex64::default();
        } else {
            *z = -*z / ksq;
            kinetic += ksq * z.norm_sqr();
        }
    }
    kinetic *= 0.5 * lx * ly;

    // Exposed velocities zero the Nyquist slots: i kappa has no conjugate
    // partner there, and the energy bookkeeping above already counts them.
    let mut u1_hat = psi_hat.coeffs().clone();
    let mut u2_hat = psi_hat.coeffs().clone();
    for ((r, _), z) in u1_hat.indexed_iter_mut() {
        *z *= Complex64::new(0.0, if r == ny / 2 { 0.0 } else { -k2[r] });
    }
    for ((_, c), z) in u2_hat.indexed_iter_mut() {
        *z *= Complex64::new(0.0, if c == nx / 2 { 0.0 } else { k1[c] });
    }
    let make = |coeffs: Array2<Complex64>| {
        field::from_spectral(&crate::field::SpectralField::from_parts(
            field.domain().clone(),
            coeffs,
        ))
    };
    let psi = make(psi_hat.coeffs().clone())?;
    let u1 = make(u1_hat)?;
    let u2 = make(u2_hat)?;

    let area = field.domain().cell_area();
    let energy = -0.5
        * psi
            .values()
            .iter()
            .zip(field.values().iter())
            .map(|(p, w)| p * w)
            .sum::<f64>()
        * area;

    Ok(StreamSolution {
        domain: field.domain().clone(),
        psi: psi.values().clone(),
        u1: u1.values().clone(),
        u2: u2.values().clone(),
        boundary_values: Vec::new(),
        gauge: 0.0,
        energy,
        kinetic,
    })
}

fn solve_channel(field: &VorticityField) -> Result<StreamSolution> {
    let (lx, nx, ny) = match *field.domain() {
        Domain::Channel { lx, nx, ny } => (lx, nx, ny),
        _ => unreachable!(),
    };
    let h2 = 1.0 / ny as f64;
    let kappa = wavenumbers(nx, lx);
    let omega_hat = rows_to_modes(field.values(), nx);
    let gauge = momentum_unchecked(field) / lx;

    // Per-mode wall-to-wall solve; the k = 0 column then gets the linear
    // gauge profile, which the second-difference operator annihilates.
    let mut psi_hat = Array2::<Complex64>::default((ny, nx));
    let mut col = vec![Complex64::default(); ny];
    for m in 0..nx {
        for j in 0..ny {
            col[j] = omega_hat[[j, m]];
        }
        let sol = solve_wall_mode(&col, kappa[m], h2);
        for j in 0..ny {
            psi_hat[[j, m]] = sol[j];
        }
    }
    for j in 0..ny {
        let x2 = (j as f64 + 0.5) * h2;
        psi_hat[[j, 0]] += Complex64::new(gauge * x2, 0.0);
    }

    // Face kinetic energy: x2 differences per mode (wall faces half weight,
    // ghost derivative), x1 part by Parseval with the solve's kappa.
    let mut kinetic = 0.0;
    for m in 0..nx {
        let g_top = if m == 0 { gauge } else { 0.0 };
        let mut acc = 0.0;
        for j in 0..ny.saturating_sub(1) {
            acc += (psi_hat[[j + 1, m]] - psi_hat[[j, m]]).norm_sqr() / (h2 * h2);
        }
        acc += 2.0 * psi_hat[[0, m]].norm_sqr() / (h2 * h2);
        acc += 2.0 * (Complex64::new(g_top, 0.0) - psi_hat[[ny - 1, m]]).norm_sqr() / (h2 * h2);
        // Wall faces carry half a cell; the two halves above already fold
        // the factor into the ghost form 2 psi / h2.
        let mut x1_part = 0.0;
        for j in 0..ny {
            x1_part += kappa[m] * kappa[m] * psi_hat[[j, m]].norm_sqr();
        }
        kinetic += acc + x1_part;
    }
    // Wall-face terms above are (2 psi/h2)^2 * (h2/2) * lx collected as
    // 2 psi^2/h2^2 * (h2 lx); interior faces (dpsi/h2)^2 * h2 lx.
    kinetic *= 0.5 * lx * h2;

    let psi = modes_to_rows(psi_hat.clone(), nx);

    // u1 = -d psi / d x2 at cell centers (ghost-closed central difference),
    // u2 = d psi / d x1 spectrally with Nyquist dropped.
    let mut u1_hat = Array2::<Complex64>::default((ny, nx));
    for m in 0..nx {
        let g_top = if m == 0 { gauge } else { 0.0 };
        for j in 0..ny {
            let below = if j == 0 {
                -psi_hat[[0, m]]
            } else {
                psi_hat[[j - 1, m]]
            };
            let above = if j == ny - 1 {
                Complex64::new(2.0 * g_top, 0.0) - psi_hat[[ny - 1, m]]
            } else {
                psi_hat[[j + 1, m]]
            };
            u1_hat[[j, m]] = -(above - below) / (2.0 * h2);
        }
    }
    let mut u2_hat = psi_hat;
    for ((_, c), z) in u2_hat.indexed_iter_mut() {
        *z *= Complex64::new(0.0, if c == nx / 2 { 0.0 } else { kappa[c] });
    }
    let u1 = modes_to_rows(u1_hat, nx);
    let u2 = modes_to_rows(u2_hat, nx);

    let area = field.domain().cell_area();
    let energy = -0.5
        * psi
            .iter()
            .zip(field.values().iter())
            .map(|(p, w)| p * w)
            .sum::<f64>()
        * area;

    Ok(StreamSolution {
        domain: field.domain().clone(),
        psi,
        u1,
        u2,
        boundary_values: vec![0.0, gauge],
        gauge,
        energy,
        kinetic,
    })
}

/// Tridiagonal solve of (second difference - kappa^2) psi = omega on cell
/// centers with zero wall values folded in as ghosts.
fn solve_wall_mode(omega: &[Complex64], kappa: f64, h: f64) -> Vec<Complex64> {
    let n = omega.len();
    let inv_h2 = 1.0 / (h * h);
    let interior = -2.0 * inv_h2 - kappa * kappa;
    let wall = -3.0 * inv_h2 - kappa * kappa;
    let diag = |j: usize| if j == 0 || j == n - 1 { wall } else { interior };

    // Thomas elimination; the matrix is strictly diagonally dominant.
    let mut c_prime = vec![0.0f64; n];
    let mut d_prime = vec![Complex64::default(); n];
    c_prime[0] = inv_h2 / diag(0);
    d_prime[0] = omega[0] / diag(0);
    for j in 1..n {
        let denom = diag(j) - inv_h2 * c_prime[j - 1];
        c_prime[j] = inv_h2 / denom;
        d_prime[j] = (omega[j] - d_prime[j - 1] * inv_h2) / denom;
    }
    let mut psi = vec![Complex64::default(); n];
    psi[n - 1] = d_prime[n - 1];
    for j in (0..n - 1).rev() {
        psi[j] = d_prime[j] - psi[j + 1] * c_prime[j];
    }
    psi
}

fn solve_disk(field: &VorticityField) -> Result<StreamSolution> {
    let (radius, n) = match *field.domain() {
        Domain::DiskRadial { radius, ncells } => (radius, ncells),
        _ => unreachable!(),
    };
    let ds = radius * radius / n as f64;
    let s_face = |j: usize| j as f64 * ds;

    // Flux form of 4 (s psi_s)_s = omega: natural at the center, ghost-closed
    // Dirichlet at the rim. Symmetric tridiagonal, solved by Thomas.
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    for j in 0..n {
        let a = 4.0 * s_face(j) / (ds * ds);
        let c = 4.0 * s_face(j + 1) / (ds * ds);
        if j == n - 1 {
            sub[j] = a;
            diag[j] = -(a + 2.0 * c);
        } else {
            sub[j] = a;
            diag[j] = -(a + c);
            sup[j] = c;
        }
    }
    let omega: Vec<f64> = field.values().column(0).to_vec();
    let mut c_prime = vec![0.0; n];
    let mut d_prime = vec![0.0; n];
    c_prime[0] = sup[0] / diag[0];
    d_prime[0] = omega[0] / diag[0];
    for j in 1..n {
        let denom = diag[j] - sub[j] * c_prime[j - 1];
        if j < n - 1 {
            c_prime[j] = sup[j] / denom;
        }
        d_prime[j] = (omega[j] - sub[j] * d_prime[j - 1]) / denom;
    }
    let mut psi = vec![0.0; n];
    psi[n - 1] = d_prime[n - 1];
    for j in (0..n - 1).rev() {
        psi[j] = d_prime[j] - c_prime[j] * psi[j + 1];
    }

    // Azimuthal speed 2 sqrt(s) psi_s: face values averaged to centers.
    let face_speed = |j: usize| -> f64 {
        if j == 0 {
            0.0
        } else if j == n {
            2.0 * radius * (0.0 - psi[n - 1]) * 2.0 / ds
        } else {
            2.0 * s_face(j).sqrt() * (psi[j] - psi[j - 1]) / ds
        }
    };
    let mut u_theta = Array2::zeros((n, 1));
    for j in 0..n {
        u_theta[[j, 0]] = 0.5 * (face_speed(j) + face_speed(j + 1));
    }

    let cell_area = field.domain().cell_area();
    let energy = -0.5
        * psi
            .iter()
            .zip(omega.iter())
            .map(|(p, w)| p * w)
            .sum::<f64>()
        * cell_area;

    let mut kinetic = 0.0;
    for j in 1..n {
        let dpsi = (psi[j] - psi[j - 1]) / ds;
        kinetic += 2.0 * std::f64::consts::PI * s_face(j) * dpsi * dpsi * ds;
    }
    kinetic += 4.0 * std::f64::consts::PI * radius * radius * psi[n - 1] * psi[n - 1] / ds;

    let psi_arr = Array2::from_shape_fn((n, 1), |(j, _)| psi[j]);
    Ok(StreamSolution {
        domain: field.domain().clone(),
        psi: psi_arr,
        u1: u_theta,
        u2: Array2::zeros((n, 1)),
        boundary_values: vec![0.0],
        gauge: 0.0,
        energy,
        kinetic,
    })
}
