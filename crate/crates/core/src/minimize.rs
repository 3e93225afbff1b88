//! Constrained Casimir minimization over rearrangement orbit closures.
//!
//! The problem: minimize `I_f(ω) = ∫f(ω)` over the orbit closure of a
//! datum `ω₀` (every field majorized by `ω₀` with the same mean) subject
//! to `E(ω) = E(ω₀)`, optionally also `M(ω) = M(ω₀)`. The energy shell is
//! handled by scalarization: the inner problem `min I_f + β(E − E₀)` is
//! solved by Frank-Wolfe over the polytope, whose linear minimization
//! oracle is the anti-monotone pairing of the sorted datum values against
//! the sorted gradient, and β is driven by bisection using the fact that
//! the energy of the inner solution is non-increasing in β.
//!
//! Two endgames need care. When the bisection bracket collapses onto a β
//! where the inner solution set is degenerate (on the torus this is the
//! quadratic-Casimir case with β at a negative eigenvalue of the inverse
//! Laplacian), the solution on the critical spectral shell is recovered
//! by projection and rescaling. When no finite β reaches the shell (the
//! datum is energy-deficient and minimizes E over its own closure), the
//! exact-shell blend falls back to the datum itself. In every case the
//! returned field lies in the polytope with `E = E₀` up to roundoff,
//! because contenders are blended onto the shell along segments where the
//! energy is an exactly known quadratic.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{CoreError, Result};
use crate::field::{from_spectral, to_spectral, Domain, SpectralField, VorticityField};
use crate::greens::{self, StreamSolution};
use crate::rearrange::{self, ConvexFunctionSpec};
use crate::sampling;

#[derive(Debug, Clone)]
pub struct MinimizeOptions {
    /// Relative Frank-Wolfe duality gap that counts as converged.
    pub gap_tol: f64,
    /// Iteration cap for inner solves during bracketing and bisection.
    pub bracket_fw_iters: usize,
    /// Iteration cap for the final polishing solve.
    pub max_fw_iters: usize,
    /// |E - E0| <= tol_energy_rel * E0 accepts a multiplier.
    pub tol_energy_rel: f64,
    /// Starts per inner solve when the scalarized problem is nonconvex.
    pub multi_starts: usize,
    pub seed: u64,
    /// The sweep gives up bracketing past this multiplier magnitude.
    pub beta_cap: f64,
    /// Samples per line search when the objective is not convex along
    /// the segment.
    pub line_samples: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-8,
            bracket_fw_iters: 400,
            max_fw_iters: 100_000,
            tol_energy_rel: 1e-8,
            multi_starts: 5,
            seed: 7,
            beta_cap: 1e12,
            line_samples: 32,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MinimizeResiduals {
    /// |E(ω*) - E(ω₀)|, absolute.
    pub energy_gap: f64,
    /// |mean(ω*) - mean(ω₀)|.
    pub mean_gap: f64,
    /// |M(ω*) - M(ω₀)|; zero on the disk where M is undefined.
    pub momentum_gap: f64,
    /// Final Frank-Wolfe gap over (1 + |f_value|).
    pub stationarity: f64,
    /// L² distance from ω* to the best monotone function of ψ*.
    pub isotonic: f64,
}

#[derive(Debug, Clone)]
pub struct MinimalFlowResult {
    pub omega_star: VorticityField,
    pub psi_star: StreamSolution,
    /// The integrand that was minimized; multiplier reconstruction
    /// needs its derivative.
    pub integrand: ConvexFunctionSpec,
    /// Multiplier of the energy constraint.
    pub beta: f64,
    /// Multiplier of the mean constraint.
    pub gamma: f64,
    /// Multiplier of the momentum constraint; zero unless momentum was
    /// fixed.
    pub momentum_multiplier: f64,
    /// One (level, λ) pair per distinct datum level, λ >= 0.
    pub lambda: Vec<(f64, f64)>,
    pub f_value: f64,
    pub residuals: MinimizeResiduals,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonotoneDirection {
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone)]
pub struct MonotoneFitReport {
    pub direction: MonotoneDirection,
    /// L² residual of the best monotone fit of ω against ψ.
    pub isotonic_residual: f64,
    /// Fitted levels that hold on at least 1% of the cells (and at
    /// least two), after merging levels closer than 1e-6 of the fitted
    /// range.
    pub plateau_levels: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct KktReport {
    pub gamma: f64,
    /// One (level, λ) pair per distinct datum level, λ >= 0 by
    /// construction.
    pub lambda: Vec<(f64, f64)>,
    /// L² norm of the stationarity defect after the nonnegative fit.
    pub stationarity_l2: f64,
    /// max over levels of λ·(constraint slack).
    pub complementary_slackness: f64,
    /// Range of the residual multiplier field the level terms must
    /// cover; a clean interior optimum gives a bracket hugging zero.
    pub bracket: (f64, f64),
    /// True when the active-level columns were linearly dependent; the
    /// multipliers are then one valid choice among many.
    pub rank_deficient: bool,
}

struct FwRun {
    omega: Vec<f64>,
    e: f64,
    ifv: f64,
    m: f64,
    j: f64,
}

#[derive(Clone)]
struct Cand {
    omega: Vec<f64>,
    e: f64,
    ifv: f64,
    m: f64,
    /// Multiplier at which the candidate is exactly critical, when that
    /// is known in closed form (spectral shell candidates).
    beta: Option<f64>,
}

struct Solver<'a> {
    domain: Domain,
    area: f64,
    n: usize,
    f: &'a ConvexFunctionSpec,
    is_quadratic: bool,
    /// Datum values sorted in decreasing order; every LMO answer is a
    /// rearrangement of these.
    sorted_desc: Vec<f64>,
    datum: Vec<f64>,
    mean0v: f64,
    e0: f64,
    ifv0: f64,
    m0: f64,
    x2: Vec<f64>,
    fix_momentum: bool,
    nu: f64,
    opts: &'a MinimizeOptions,
    candidates: Vec<Cand>,
}

impl<'a> Solver<'a> {
    fn casimir_flat(&self, v: &[f64]) -> f64 {
        v.iter().map(|&x| self.f.eval(x)).sum::<f64>() * self.area
    }

    fn momentum_flat(&self, v: &[f64]) -> f64 {
        -self
            .x2
            .iter()
            .zip(v.iter())
            .map(|(h, w)| h * w)
            .sum::<f64>()
            * self.area
    }

    /// Uniform shift restoring the datum mean exactly; keeps torus
    /// solves inside their zero-mean guard across many updates.
    fn recenter(&self, v: &mut [f64]) {
        let m = v.iter().sum::<f64>() / self.n as f64;
        let shift = self.mean0v - m;
        if shift != 0.0 {
            for x in v.iter_mut() {
                *x += shift;
            }
        }
    }

    fn solve_flat(&self, v: &[f64]) -> Result<(Vec<f64>, f64)> {
        let field = VorticityField::from_flat(self.domain.clone(), v)?;
        let sol = greens::solve_stream(&field)?;
        Ok((sol.psi_field().flat(), sol.energy()))
    }

    /// min <g, s> over the polytope; largest datum value goes where the
    /// gradient is smallest. Ties break by cell index.
    fn lmo(&self, g: &[f64], out: &mut [f64]) {
        let mut idx: Vec<usize> = (0..self.n).collect();
        idx.sort_by(|&a, &b| g[a].partial_cmp(&g[b]).unwrap().then(a.cmp(&b)));
        for (rank, &cell) in idx.iter().enumerate() {
            out[cell] = self.sorted_desc[rank];
        }
    }

    fn scalarized(&self, ifv: f64, e: f64, m: f64, beta: f64) -> f64 {
        let mut j = ifv + beta * (e - self.e0);
        if self.fix_momentum {
            j += self.nu * (m - self.m0);
        }
        j
    }

    /// Roundoff floor of a scalarized objective evaluation.
    fn j_noise(&self, j: f64, beta: f64) -> f64 {
        1e-10 * (1.0 + j.abs()) + 1e-13 * beta.abs() * (1.0 + self.e0.abs())
    }

    fn fw(&self, beta: f64, start: Vec<f64>, max_iters: usize) -> Result<FwRun> {
        let mut omega = start;
        self.recenter(&mut omega);
        let mut s = vec![0.0; self.n];
        let mut g = vec![0.0; self.n];
        let mut d = vec![0.0; self.n];
        let mut stall = 0usize;
        let mut j_prev = f64::INFINITY;

        for _ in 0..max_iters {
            let (psi, e) = self.solve_flat(&omega)?;
            let ifv = self.casimir_flat(&omega);
            let m = self.momentum_flat(&omega);
            let j = self.scalarized(ifv, e, m, beta);
            // Evaluation noise in beta * E swamps tiny true decreases at
            // large multipliers; the slack tracks that floor.
            debug_assert!(
                j <= j_prev + self.j_noise(j_prev, beta),
                "frank-wolfe objective increased: {j_prev} -> {j}"
            );

            for i in 0..self.n {
                let mut gi = self.f.derivative(omega[i]) - beta * psi[i];
                if self.fix_momentum {
                    gi -= self.nu * self.x2[i];
                }
                g[i] = gi * self.area;
            }
            self.lmo(&g, &mut s);
            let gap: f64 = (0..self.n).map(|i| g[i] * (omega[i] - s[i])).sum();
            if gap <= self.opts.gap_tol * (1.0 + j.abs()) {
                break;
            }
            if j_prev - j <= 1e-15 * (1.0 + j.abs()) {
                stall += 1;
                if stall > 40 {
                    break;
                }
            } else {
                stall = 0;
            }
            j_prev = j;

            for i in 0..self.n {
                d[i] = s[i] - omega[i];
            }
            let mut dc = d.clone();
            {
                let m = dc.iter().sum::<f64>() / self.n as f64;
                for x in dc.iter_mut() {
                    *x -= m;
                }
            }
            let (_, e_d) = self.solve_flat(&dc)?;
            // E along the segment is e + c1 t + c2 t^2 / 2 exactly.
            let c1 = -self.area * psi.iter().zip(d.iter()).map(|(p, di)| p * di).sum::<f64>();
            let c2 = 2.0 * e_d;
            let m1 = -self.area
                * self
                    .x2
                    .iter()
                    .zip(d.iter())
                    .map(|(h, di)| h * di)
                    .sum::<f64>();
            let nu_m1 = if self.fix_momentum { self.nu * m1 } else { 0.0 };

            let t = if self.is_quadratic {
                // S'(t) is affine, so the whole derivative is.
                let dw: f64 = d.iter().zip(omega.iter()).map(|(a, b)| a * b).sum();
                let dd: f64 = d.iter().map(|a| a * a).sum();
                let phi0 = self.area * dw + beta * c1 + nu_m1;
                let slope = self.area * dd + beta * c2;
                if slope > 0.0 {
                    (-phi0 / slope).clamp(0.0, 1.0)
                } else {
                    1.0
                }
            } else if self.f.strictly_convex() && beta >= 0.0 {
                let phi = |t: f64| -> f64 {
                    let s_term: f64 = d
                        .iter()
                        .zip(omega.iter())
                        .map(|(di, wi)| di * self.f.derivative(wi + t * di))
                        .sum();
                    self.area * s_term + beta * (c1 + c2 * t) + nu_m1
                };
                if phi(1.0) <= 0.0 {
                    1.0
                } else {
                    let (mut lo, mut hi) = (0.0f64, 1.0f64);
                    for _ in 0..80 {
                        let mid = 0.5 * (lo + hi);
                        if phi(mid) <= 0.0 {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    0.5 * (lo + hi)
                }
            } else {
                let j_at = |t: f64| -> f64 {
                    let i_t: f64 = omega
                        .iter()
                        .zip(d.iter())
                        .map(|(wi, di)| self.f.eval(wi + t * di))
                        .sum::<f64>()
                        * self.area;
                    let e_t = e + c1 * t + 0.5 * c2 * t * t;
                    let m_t = m + m1 * t;
                    self.scalarized(i_t, e_t, m_t, beta)
                };
                let mut best = (0.0, j);
                for k in 1..=self.opts.line_samples {
                    let t = k as f64 / self.opts.line_samples as f64;
                    let jt = j_at(t);
                    if jt < best.1 {
                        best = (t, jt);
                    }
                }
                for &t in &[1e-6, 1e-3] {
                    let jt = j_at(t);
                    if jt < best.1 {
                        best = (t, jt);
                    }
                }
                best.0
            };

            if t <= 0.0 {
                break;
            }
            for i in 0..self.n {
                omega[i] += t * d[i];
            }
            self.recenter(&mut omega);
        }

        let (_, e) = self.solve_flat(&omega)?;
        let ifv = self.casimir_flat(&omega);
        let m = self.momentum_flat(&omega);
        let j = self.scalarized(ifv, e, m, beta);
        Ok(FwRun {
            omega,
            e,
            ifv,
            m,
            j,
        })
    }

    /// Inner solve at fixed multipliers. Convex scalarizations run once
    /// from the better of warm start and datum; nonconvex ones restart
    /// from random rearrangements and keep the best. Random restarts
    /// only happen on wide solves; bracket refinement reuses warmth.
    fn fw_multi(
        &mut self,
        beta: f64,
        warm: Option<&[f64]>,
        max_iters: usize,
        wide: bool,
    ) -> Result<FwRun> {
        let convex = self.f.convex() && beta >= 0.0;
        let mut starts: Vec<Vec<f64>> = Vec::new();
        if let Some(w) = warm {
            starts.push(w.to_vec());
        }
        starts.push(self.datum.clone());
        if !convex && wide {
            let mut rng = sampling::rng_stream(self.opts.seed, 0x6d69_6e00 + starts.len() as u64);
            while starts.len() < self.opts.multi_starts.max(1) {
                let mut perm = self.sorted_desc.clone();
                perm.shuffle(&mut rng);
                starts.push(perm);
            }
        }

        let mut best: Option<FwRun> = None;
        for start in starts {
            let run = self.fw(beta, start, max_iters)?;
            self.candidates.push(Cand {
                omega: run.omega.clone(),
                e: run.e,
                ifv: run.ifv,
                m: run.m,
                beta: None,
            });
            // Within evaluation noise of a tie, prefer the run nearer
            // the energy shell so exact-shell solutions are not lost to
            // float dust.
            let takes = match &best {
                None => true,
                Some(b) => {
                    let noise = self.j_noise(b.j, beta);
                    run.j < b.j - noise
                        || (run.j <= b.j + noise && (run.e - self.e0).abs() < (b.e - self.e0).abs())
                }
            };
            if takes {
                best = Some(run);
            }
        }
        Ok(best.unwrap())
    }

    /// Resolves the momentum multiplier at fixed β so the inner solution
    /// matches M₀; M at the solution is non-increasing in ν.
    fn solve_at_beta(
        &mut self,
        beta: f64,
        warm: Option<&[f64]>,
        iters: usize,
        wide: bool,
    ) -> Result<FwRun> {
        if !self.fix_momentum {
            return self.fw_multi(beta, warm, iters, wide);
        }
        let tol_m = 1e-10 * (1.0 + self.m0.abs());
        let mut nu = self.nu;
        let mut run = self.fw_multi(beta, warm, iters, wide)?;
        if (run.m - self.m0).abs() <= tol_m {
            return Ok(run);
        }
        // Refinements of nu reuse the incumbent; multi-start already had
        // its chance on the first solve.
        let refine = |solver: &mut Self, nu: f64, warm: &[f64]| -> Result<FwRun> {
            solver.nu = nu;
            let run = solver.fw(beta, warm.to_vec(), iters)?;
            solver.candidates.push(Cand {
                omega: run.omega.clone(),
                e: run.e,
                ifv: run.ifv,
                m: run.m,
                beta: None,
            });
            Ok(run)
        };
        // Expand a bracket in the direction that moves M toward M0.
        let mut step = 1.0f64.max(nu.abs());
        let (mut lo, mut hi); // M(lo) >= M0 >= M(hi)
        if run.m > self.m0 {
            lo = (nu, run.m);
            loop {
                nu += step;
                step *= 2.0;
                let warm = run.omega.clone();
                run = refine(self, nu, &warm)?;
                if (run.m - self.m0).abs() <= tol_m {
                    return Ok(run);
                }
                if run.m < self.m0 {
                    hi = (nu, run.m);
                    break;
                }
                lo = (nu, run.m);
                if nu.abs() > 1e12 {
                    return Ok(run);
                }
            }
        } else {
            hi = (nu, run.m);
            loop {
                nu -= step;
                step *= 2.0;
                let warm = run.omega.clone();
                run = refine(self, nu, &warm)?;
                if (run.m - self.m0).abs() <= tol_m {
                    return Ok(run);
                }
                if run.m > self.m0 {
                    lo = (nu, run.m);
                    break;
                }
                hi = (nu, run.m);
                if nu.abs() > 1e12 {
                    return Ok(run);
                }
            }
        }
        for k in 0..60 {
            // Regula falsi with bisection fallback every third step.
            let span = hi.0 - lo.0;
            let mut next = if (hi.1 - lo.1).abs() > 0.0 && k % 3 != 2 {
                lo.0 + (self.m0 - lo.1) * span / (hi.1 - lo.1)
            } else {
                lo.0 + 0.5 * span
            };
            if !(next.is_finite() && (next - lo.0) / span > 1e-3 && (hi.0 - next) / span > 1e-3) {
                next = lo.0 + 0.5 * span;
            }
            let warm = run.omega.clone();
            run = refine(self, next, &warm)?;
            if (run.m - self.m0).abs() <= tol_m {
                return Ok(run);
            }
            if run.m > self.m0 {
                lo = (next, run.m);
            } else {
                hi = (next, run.m);
            }
            if (hi.0 - lo.0).abs() <= 1e-13 * (1.0 + next.abs()) {
                break;
            }
        }
        Ok(run)
    }

    /// Spectral shell candidates: project the best iterates onto the
    /// modes nearest |κ|² = -β for the bracket multiplier and for each
    /// of the lowest Laplacian shells, rescale to the target energy, and
    /// keep everything that stays in the polytope. On a degenerate
    /// bracket the optimum lives on such a shell; away from degeneracy
    /// the extra candidates are verified feasible points like any other.
    fn shell_polish(&mut self, beta_hint: f64, omega0: &VorticityField) -> Result<()> {
        if !matches!(self.domain, Domain::Torus { .. }) {
            return Ok(());
        }
        if self.mean0v.abs() > 1e-12 * (1.0 + self.sorted_desc[0].abs()) {
            return Ok(());
        }
        // Near-zero iterates project to nothing; rank the rest by value
        // and keep a few of the most energetic as well.
        let mut ranked: Vec<&Cand> = self
            .candidates
            .iter()
            .filter(|c| c.e > 1e-6 * self.e0)
            .collect();
        ranked.sort_by(|a, b| a.ifv.partial_cmp(&b.ifv).unwrap());
        let mut sources: Vec<Vec<f64>> = ranked.iter().take(6).map(|c| c.omega.clone()).collect();
        ranked.sort_by(|a, b| b.e.partial_cmp(&a.e).unwrap());
        sources.extend(ranked.iter().take(3).map(|c| c.omega.clone()));
        sources.push(self.datum.clone());

        let mut betas = torus_shell_betas(&self.domain, 12);
        if beta_hint.is_finite() {
            betas.push(beta_hint);
        }

        // Source-free shell probes: every mode pair of every candidate
        // shell, phase aligned with the grid. Membership decides.
        let mut ones = to_spectral(omega0)?;
        for coef in ones.coeffs_mut().iter_mut() {
            *coef = num_complex::Complex64::new(1.0, 0.0);
        }
        for &beta_star in &betas {
            if let Some(projected) = project_critical_shell(&ones, beta_star) {
                self.push_shell_variants(&projected, beta_star, omega0)?;
            }
        }

        for omega in sources {
            let field = VorticityField::from_flat(self.domain.clone(), &omega)?;
            let spec = to_spectral(&field)?;
            for &beta_star in &betas {
                let projected = match project_critical_shell(&spec, beta_star) {
                    Some(p) => p,
                    None => continue,
                };
                self.push_shell_variants(&projected, beta_star, omega0)?;
            }
        }
        Ok(())
    }

    fn push_shell_variants(
        &mut self,
        projected: &SpectralField,
        beta_star: f64,
        omega0: &VorticityField,
    ) -> Result<()> {
        for variant in single_mode_variants(projected, 8) {
            let shell = from_spectral(&variant)?;
            let e_shell = greens::energy(&shell)?;
            if e_shell <= 1e-300 {
                continue;
            }
            let scale = (self.e0 / e_shell).sqrt();
            let mut scaled = shell;
            scaled.map_values(|v| v * scale);
            self.push_if_member(&scaled, omega0, Some(beta_star))?;
        }
        Ok(())
    }

    /// Verifies membership (and the momentum pin when active) before
    /// admitting a constructed candidate.
    fn push_if_member(
        &mut self,
        field: &VorticityField,
        omega0: &VorticityField,
        beta: Option<f64>,
    ) -> Result<bool> {
        if !rearrange::in_orbit_closure(field, omega0, None)?.member {
            return Ok(false);
        }
        let flat = field.flat();
        let m = self.momentum_flat(&flat);
        if self.fix_momentum && (m - self.m0).abs() > 1e-8 * (1.0 + self.m0.abs()) {
            return Ok(false);
        }
        let e = greens::energy(field)?;
        let ifv = self.casimir_flat(&flat);
        self.candidates.push(Cand {
            omega: flat,
            e,
            ifv,
            m,
            beta,
        });
        Ok(true)
    }

    /// Green-matrix analogue of the spectral shell polish for small
    /// non-periodic domains: eigenvectors of the energy form play the
    /// role of Fourier modes.
    fn dense_polish(&mut self, omega0: &VorticityField) -> Result<()> {
        if matches!(self.domain, Domain::Torus { .. }) || self.n > 256 {
            return Ok(());
        }
        let n = self.n;
        let mut k_mat = vec![vec![0.0; n]; n];
        for j in 0..n {
            let mut unit = vec![0.0; n];
            unit[j] = 1.0;
            let (psi, _) = self.solve_flat(&unit)?;
            for i in 0..n {
                k_mat[i][j] = -self.area * psi[i];
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let s = 0.5 * (k_mat[i][j] + k_mat[j][i]);
                k_mat[i][j] = s;
                k_mat[j][i] = s;
            }
        }
        let (eigvals, eigvecs) = jacobi_eigen(&mut k_mat);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eigvals[b].partial_cmp(&eigvals[a]).unwrap());

        // Top eigen-groups, grouped by eigenvalue degeneracy.
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for &idx in order.iter().take(n.min(24)) {
            if eigvals[idx] <= 1e-12 * eigvals[order[0]].abs() {
                break;
            }
            match groups.last_mut() {
                Some(g)
                    if (eigvals[g[0]] - eigvals[idx]).abs()
                        <= 1e-9 * (1.0 + eigvals[g[0]].abs()) =>
                {
                    g.push(idx)
                }
                _ => groups.push(vec![idx]),
            }
            if groups.len() > 6 {
                groups.pop();
                break;
            }
        }

        let (psi_mean, e_mean) = if self.mean0v.abs() > 0.0 {
            let (psi_m, e_m) = self.solve_flat(&vec![self.mean0v; n])?;
            (Some(psi_m), e_m)
        } else {
            (None, 0.0)
        };

        let datum_centered: Vec<f64> = self.datum.iter().map(|v| v - self.mean0v).collect();
        for group in &groups {
            let beta_crit = -self.area / eigvals[group[0]];
            // Probe directions: each basis vector of the group plus the
            // datum's projection onto the group.
            let mut probes: Vec<Vec<f64>> = group
                .iter()
                .map(|&gi| (0..n).map(|i| eigvecs[i][gi]).collect())
                .collect();
            if group.len() > 1 {
                let mut proj = vec![0.0; n];
                for &gi in group {
                    let dot: f64 = (0..n).map(|i| eigvecs[i][gi] * datum_centered[i]).sum();
                    for i in 0..n {
                        proj[i] += dot * eigvecs[i][gi];
                    }
                }
                probes.push(proj);
            }
            for mut q in probes {
                let pm = q.iter().sum::<f64>() / n as f64;
                for x in q.iter_mut() {
                    *x -= pm;
                }
                let norm2: f64 = q.iter().map(|x| x * x).sum();
                if norm2 <= 1e-24 {
                    continue;
                }
                let (_, e_q) = self.solve_flat(&q)?;
                if e_q <= 1e-300 {
                    continue;
                }
                // E(mean + a q) = E_mean + a c + a^2 E_q.
                let c = match &psi_mean {
                    Some(psi_m) => {
                        -self.area
                            * psi_m
                                .iter()
                                .zip(q.iter())
                                .map(|(p, qi)| p * qi)
                                .sum::<f64>()
                    }
                    None => 0.0,
                };
                let disc = c * c - 4.0 * e_q * (e_mean - self.e0);
                if disc < 0.0 {
                    continue;
                }
                let sq = disc.sqrt();
                for a in [(-c - sq) / (2.0 * e_q), (-c + sq) / (2.0 * e_q)] {
                    if !a.is_finite() || a == 0.0 {
                        continue;
                    }
                    let vals: Vec<f64> = q.iter().map(|&qi| self.mean0v + a * qi).collect();
                    let field = VorticityField::from_flat(self.domain.clone(), &vals)?;
                    self.push_if_member(&field, omega0, Some(beta_crit))?;
                }
            }
        }
        Ok(())
    }

    /// Exact-shell points on the segment between two candidates; the
    /// energy along it is a known quadratic, so the crossing parameters
    /// are closed-form.
    fn blend_pair(&self, a: &Cand, b: &Cand) -> Result<Vec<Cand>> {
        let (psi_a, _) = self.solve_flat(&a.omega)?;
        let d: Vec<f64> = b
            .omega
            .iter()
            .zip(a.omega.iter())
            .map(|(x, y)| x - y)
            .collect();
        let mut dc = d.clone();
        let dm = dc.iter().sum::<f64>() / self.n as f64;
        for x in dc.iter_mut() {
            *x -= dm;
        }
        let (_, e_d) = self.solve_flat(&dc)?;
        let c1 = -self.area
            * psi_a
                .iter()
                .zip(d.iter())
                .map(|(p, di)| p * di)
                .sum::<f64>();
        let c2 = 2.0 * e_d;
        // Solve e_a + c1 t + c2 t^2 / 2 = e0 for t in (0, 1].
        let rhs = a.e - self.e0;
        let mut roots: Vec<f64> = Vec::new();
        if c2.abs() <= 1e-14 * (1.0 + c1.abs()) {
            if c1.abs() > 0.0 {
                roots.push(-rhs / c1);
            }
        } else {
            let half = 0.5 * c2;
            let disc = c1 * c1 - 4.0 * half * rhs;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                // Citardauq form keeps the small root accurate.
                let q = -0.5 * (c1 + c1.signum() * sq);
                if q != 0.0 {
                    roots.push(rhs / q);
                }
                if half != 0.0 && q != 0.0 {
                    roots.push(q / half);
                }
            }
        }
        let mut out = Vec::new();
        for t in roots {
            if !(t > 0.0 && t <= 1.0 + 1e-12) {
                continue;
            }
            let t = t.min(1.0);
            let mut omega: Vec<f64> = a
                .omega
                .iter()
                .zip(d.iter())
                .map(|(y, di)| y + t * di)
                .collect();
            self.recenter(&mut omega);
            let (_, e) = self.solve_flat(&omega)?;
            let ifv = self.casimir_flat(&omega);
            let m = self.momentum_flat(&omega);
            out.push(Cand {
                omega,
                e,
                ifv,
                m,
                beta: None,
            });
        }
        Ok(out)
    }

    fn datum_cand(&self) -> Cand {
        Cand {
            omega: self.datum.clone(),
            e: self.e0,
            ifv: self.ifv0,
            m: self.m0,
            beta: None,
        }
    }

    /// Best feasible point sitting on the shell to near machine
    /// precision (and matching M₀ when pinned). Exactness matters: a
    /// loose energy band admits points whose value undershoots the true
    /// constrained optimum by O(√band), so only closed-form crossings,
    /// polished shell candidates, and the datum itself may compete.
    fn select_contender(&mut self) -> Result<Cand> {
        let tol_exact = 1e-12 * (1.0 + self.e0.abs());
        let tol_m = 1e-8 * (1.0 + self.m0.abs());
        let feasible_m = |c: &Cand| !self.fix_momentum || (c.m - self.m0).abs() <= tol_m;
        let mut contenders: Vec<Cand> = vec![self.datum_cand()];
        for c in &self.candidates {
            if (c.e - self.e0).abs() <= tol_exact && feasible_m(c) {
                contenders.push(c.clone());
            }
        }
        let mut above: Vec<Cand> = self
            .candidates
            .iter()
            .filter(|c| c.e > self.e0 + tol_exact && feasible_m(c))
            .cloned()
            .collect();
        let mut below: Vec<Cand> = self
            .candidates
            .iter()
            .filter(|c| c.e < self.e0 - tol_exact && feasible_m(c))
            .cloned()
            .collect();
        above.sort_by(|a, b| a.ifv.partial_cmp(&b.ifv).unwrap());
        below.sort_by(|a, b| a.ifv.partial_cmp(&b.ifv).unwrap());
        above.truncate(3);
        below.truncate(3);
        // Segments between opposite sides cross the shell; segments
        // rooted at the datum catch near-shell iterates whose parabola
        // re-crosses close by.
        for a in &above {
            for b in &below {
                contenders.extend(self.blend_pair(a, b)?);
            }
            contenders.extend(self.blend_pair(a, &self.datum_cand())?);
            contenders.extend(self.blend_pair(&self.datum_cand(), a)?);
        }
        for b in &below {
            contenders.extend(self.blend_pair(&self.datum_cand(), b)?);
        }
        contenders.retain(|c| (c.e - self.e0).abs() <= tol_exact && feasible_m(c));
        Ok(contenders
            .into_iter()
            .min_by(|a, b| a.ifv.partial_cmp(&b.ifv).unwrap())
            .expect("datum is always a contender"))
    }
}

fn project_critical_shell(spec: &SpectralField, beta: f64) -> Option<SpectralField> {
    let (lx, ly, nx, ny) = match *spec.domain() {
        Domain::Torus { lx, ly, nx, ny } => (lx, ly, nx, ny),
        _ => return None,
    };
    let kappa_sq = |r: usize, c: usize| -> f64 {
        let k1 = SpectralField::mode_index(c, nx) as f64 * std::f64::consts::TAU / lx;
        let k2 = SpectralField::mode_index(r, ny) as f64 * std::f64::consts::TAU / ly;
        k1 * k1 + k2 * k2
    };
    let mut d_min = f64::INFINITY;
    for r in 0..ny {
        for c in 0..nx {
            if r == 0 && c == 0 {
                continue;
            }
            d_min = d_min.min((kappa_sq(r, c) + beta).abs());
        }
    }
    if !d_min.is_finite() {
        return None;
    }
    let band = d_min + 1e-6 * (1.0 + d_min);
    let mut out = spec.clone();
    for r in 0..ny {
        for c in 0..nx {
            let keep = !(r == 0 && c == 0) && (kappa_sq(r, c) + beta).abs() <= band;
            if !keep {
                out.coeffs_mut()[(r, c)] = num_complex::Complex64::new(0.0, 0.0);
            }
        }
    }
    Some(out)
}

/// Negated distinct Laplacian eigenvalues, smallest first.
fn torus_shell_betas(domain: &Domain, count: usize) -> Vec<f64> {
    let (lx, ly, nx, ny) = match *domain {
        Domain::Torus { lx, ly, nx, ny } => (lx, ly, nx, ny),
        _ => return Vec::new(),
    };
    let mut vals: Vec<f64> = Vec::new();
    for r in 0..ny {
        for c in 0..nx {
            if r == 0 && c == 0 {
                continue;
            }
            let k1 = SpectralField::mode_index(c, nx) as f64 * std::f64::consts::TAU / lx;
            let k2 = SpectralField::mode_index(r, ny) as f64 * std::f64::consts::TAU / ly;
            vals.push(k1 * k1 + k2 * k2);
        }
    }
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    vals.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * (1.0 + b.abs()));
    vals.truncate(count);
    vals.iter().map(|&v| -v).collect()
}

/// The field itself plus its restrictions to single conjugate mode
/// pairs, strongest pairs first. Restricting keeps the pointwise range
/// tight, which is what polytope membership cares about.
fn single_mode_variants(spec: &SpectralField, max_pairs: usize) -> Vec<SpectralField> {
    let (ny, nx) = {
        let c = spec.coeffs();
        (c.nrows(), c.ncols())
    };
    let mut pairs: Vec<((usize, usize), f64)> = Vec::new();
    for r in 0..ny {
        for c in 0..nx {
            let p = spec.coeffs()[(r, c)].norm_sqr();
            if p <= 1e-300 {
                continue;
            }
            let conj = ((ny - r) % ny, (nx - c) % nx);
            let key = (r, c).min(conj);
            if !pairs.iter().any(|(k, _)| *k == key) {
                pairs.push((key, p));
            }
        }
    }
    let mut out = vec![spec.clone()];
    if pairs.len() <= 1 {
        return out;
    }
    pairs.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    pairs.truncate(max_pairs);
    for (key, _) in pairs {
        let conj = ((ny - key.0) % ny, (nx - key.1) % nx);
        let mut v = spec.clone();
        for r in 0..ny {
            for c in 0..nx {
                if (r, c) != key && (r, c) != conj {
                    v.coeffs_mut()[(r, c)] = num_complex::Complex64::new(0.0, 0.0);
                }
            }
        }
        out.push(v);
    }
    out
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix, returning
/// (eigenvalues, eigenvector columns). Destroys the input.
fn jacobi_eigen(a: &mut [Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..64 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off.sqrt() <= 1e-14 * (1.0 + frobenius(a)) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() <= 1e-300 {
                    continue;
                }
                let theta = 0.5 * (a[q][q] - a[p][p]) / a[p][q];
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let vals: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    (vals, v)
}

fn frobenius(a: &[Vec<f64>]) -> f64 {
    a.iter()
        .flat_map(|r| r.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
}

/// Minimizes `∫f(ω)` over the orbit closure of `omega0` at fixed energy,
/// optionally also at fixed linear momentum. `f` must be strictly convex.
pub fn minimize_casimir(
    omega0: &VorticityField,
    f: &ConvexFunctionSpec,
    fix_momentum: bool,
    opts: &MinimizeOptions,
) -> Result<MinimalFlowResult> {
    if !f.strictly_convex() {
        return Err(CoreError::InvalidParameter(
            "casimir minimization needs a strictly convex integrand".into(),
        ));
    }
    let values = omega0.flat();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    f.validate_range(lo, hi)?;
    if fix_momentum {
        greens::momentum(omega0)?;
    }

    let domain = omega0.domain().clone();
    let n = domain.num_cells();
    let area = domain.cell_area();
    let sol0 = greens::solve_stream(omega0)?;
    let e0 = sol0.energy();
    let ifv0 = rearrange::casimir(omega0, f)?;
    let m0 = if matches!(domain, Domain::DiskRadial { .. }) {
        0.0
    } else {
        greens::momentum(omega0)?
    };

    let (ny_shape, nx_shape) = domain.shape();
    let mut x2 = vec![0.0; n];
    if !matches!(domain, Domain::DiskRadial { .. }) {
        for r in 0..ny_shape {
            for c in 0..nx_shape {
                let (_, h) = domain.cell_center(r, c);
                x2[r * nx_shape + c] = h;
            }
        }
    }

    // A constant datum has a one-point orbit closure.
    if hi - lo <= 1e-14 * hi.abs().max(lo.abs()).max(1.0) {
        let gamma = f.derivative(values[0]);
        return Ok(MinimalFlowResult {
            omega_star: omega0.clone(),
            psi_star: sol0,
            integrand: f.clone(),
            beta: 0.0,
            gamma,
            momentum_multiplier: 0.0,
            lambda: Vec::new(),
            f_value: ifv0,
            residuals: MinimizeResiduals {
                energy_gap: 0.0,
                mean_gap: 0.0,
                momentum_gap: 0.0,
                stationarity: 0.0,
                isotonic: 0.0,
            },
        });
    }

    let mut sorted_desc = values.clone();
    sorted_desc.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mean0v = values.iter().sum::<f64>() / n as f64;

    let mut solver = Solver {
        domain: domain.clone(),
        area,
        n,
        f,
        is_quadratic: matches!(f, ConvexFunctionSpec::Quadratic),
        sorted_desc,
        datum: values.clone(),
        mean0v,
        e0,
        ifv0,
        m0,
        x2,
        fix_momentum,
        nu: 0.0,
        opts,
        candidates: Vec::new(),
    };

    let tol_e = opts.tol_energy_rel * e0.max(1e-300);
    let iters = opts.bracket_fw_iters;
    let mut beta_final = 0.0f64;
    let mut degenerate_bracket: Option<f64> = None;

    let r0 = solver.solve_at_beta(0.0, None, iters, true)?;
    let mut accepted = (r0.e - e0).abs() <= tol_e;
    if !accepted {
        // E at the inner solution is non-increasing in beta; hunt a
        // bracket with E >= E0 on the low side.
        let positive = r0.e > e0;
        let mut lo = (0.0f64, r0.e);
        let mut hi: Option<(f64, f64)> = None;
        let mut warm = r0.omega.clone();
        let mut beta = if positive { 1.0 } else { -1.0 };
        loop {
            let r = solver.solve_at_beta(beta, Some(&warm), iters, true)?;
            warm = r.omega.clone();
            if (r.e - e0).abs() <= tol_e {
                beta_final = beta;
                accepted = true;
                break;
            }
            if positive {
                if r.e < e0 {
                    hi = Some((beta, r.e));
                    break;
                }
                lo = (beta, r.e);
            } else {
                if r.e >= e0 {
                    // The negative side carries the larger energies, so
                    // it plays the role of lo.
                    hi = Some(lo);
                    lo = (beta, r.e);
                    break;
                }
                lo = (beta, r.e);
            }
            beta *= 4.0;
            if beta.abs() > opts.beta_cap {
                beta_final = lo.0;
                break;
            }
        }
        if !accepted {
            if let Some(mut hi) = hi {
                let mut lo = lo;
                for _ in 0..100 {
                    let mid = 0.5 * (lo.0 + hi.0);
                    let r = solver.solve_at_beta(mid, Some(&warm), iters, false)?;
                    warm = r.omega.clone();
                    if (r.e - e0).abs() <= tol_e {
                        beta_final = mid;
                        accepted = true;
                        break;
                    }
                    if r.e > e0 {
                        lo = (mid, r.e);
                    } else {
                        hi = (mid, r.e);
                    }
                    if (hi.0 - lo.0).abs() <= 1e-11 * (1.0 + mid.abs()) {
                        beta_final = mid;
                        degenerate_bracket = Some(mid);
                        break;
                    }
                }
                if !accepted && degenerate_bracket.is_none() {
                    beta_final = 0.5 * (lo.0 + hi.0);
                    degenerate_bracket = Some(beta_final);
                }
            }
        }
    }

    solver.shell_polish(degenerate_bracket.unwrap_or(beta_final), omega0)?;
    solver.dense_polish(omega0)?;

    let contender = solver.select_contender()?;
    if let Some(b) = contender.beta {
        beta_final = b;
    }
    // One long solve from the incumbent tightens stationarity; the final
    // selection below keeps whatever is best on the shell.
    let polish = solver.fw(beta_final, contender.omega.clone(), opts.max_fw_iters)?;
    solver.candidates.push(Cand {
        omega: polish.omega,
        e: polish.e,
        ifv: polish.ifv,
        m: polish.m,
        beta: None,
    });
    let best = solver.select_contender()?;
    if let Some(b) = best.beta {
        beta_final = b;
    }

    let mut omega_flat = best.omega;
    solver.recenter(&mut omega_flat);
    let omega_star = VorticityField::from_flat(domain.clone(), &omega_flat)?;
    let psi_star = greens::solve_stream(&omega_star)?;
    let e_star = psi_star.energy();
    let f_value = rearrange::casimir(&omega_star, f)?;
    let psi_flat = psi_star.psi_field().flat();
    let m_star = if matches!(domain, Domain::DiskRadial { .. }) {
        0.0
    } else {
        greens::momentum(&omega_star)?
    };

    let nu = solver.nu;
    let mut g = vec![0.0; n];
    for i in 0..n {
        let mut gi = f.derivative(omega_flat[i]) - beta_final * psi_flat[i];
        if fix_momentum {
            gi -= nu * solver.x2[i];
        }
        g[i] = gi * area;
    }
    let mut s = vec![0.0; n];
    solver.lmo(&g, &mut s);
    let gap: f64 = (0..n).map(|i| g[i] * (omega_flat[i] - s[i])).sum();
    let stationarity = gap / (1.0 + f_value.abs());

    let levels = rearrange::profile(omega0).levels;
    let (gamma, lambda, _, _) = if levels.len() <= 64 {
        kkt_fit(
            &omega_flat,
            &psi_flat,
            &solver.x2,
            f,
            beta_final,
            nu,
            &levels,
            area,
        )
    } else {
        let gbar = (0..n)
            .map(|i| f.derivative(omega_flat[i]) - beta_final * psi_flat[i] - nu * solver.x2[i])
            .sum::<f64>()
            / n as f64;
        (-gbar, Vec::new(), 0.0, true)
    };

    let isotonic = match monotone_fit(&omega_star, &psi_star.psi_field()) {
        Ok(report) => report.isotonic_residual,
        Err(e) => return Err(e),
    };

    let residuals = MinimizeResiduals {
        energy_gap: (e_star - e0).abs(),
        mean_gap: (omega_star.mean() - omega0.mean()).abs(),
        momentum_gap: (m_star - m0).abs(),
        stationarity,
        isotonic,
    };

    Ok(MinimalFlowResult {
        omega_star,
        psi_star,
        integrand: f.clone(),
        beta: beta_final,
        gamma,
        momentum_multiplier: nu,
        lambda,
        f_value,
        residuals,
    })
}

/// Pool-adjacent-violators blocks for the best nondecreasing fit, as
/// (value, count) in order.
fn pava_blocks(y: &[f64]) -> Vec<(f64, usize)> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        blocks.push((v, 1));
        while blocks.len() >= 2 {
            let (vb, nb) = blocks[blocks.len() - 1];
            let (va, na) = blocks[blocks.len() - 2];
            if vb >= va {
                break;
            }
            let n = na + nb;
            let v = (va * na as f64 + vb * nb as f64) / n as f64;
            blocks.pop();
            blocks.pop();
            blocks.push((v, n));
        }
    }
    blocks
}

fn pava_fit(y: &[f64]) -> (Vec<f64>, f64) {
    let blocks = pava_blocks(y);
    let mut fit = Vec::with_capacity(y.len());
    for &(v, cnt) in &blocks {
        fit.extend(std::iter::repeat_n(v, cnt));
    }
    let ss: f64 = y
        .iter()
        .zip(fit.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    (fit, ss)
}

/// Best monotone relation ω = F(ψ) in either direction, with the levels
/// of any detected plateaus.
pub fn monotone_fit(omega: &VorticityField, psi: &VorticityField) -> Result<MonotoneFitReport> {
    omega.same_domain(psi)?;
    let w = omega.flat();
    let p = psi.flat();
    let n = w.len();
    let p_lo = p.iter().copied().fold(f64::INFINITY, f64::min);
    let p_hi = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if p_hi - p_lo <= 1e-12 * p_hi.abs().max(p_lo.abs()).max(1.0) {
        return Err(CoreError::InvalidParameter(
            "stream function is numerically constant, no monotone relation is identifiable".into(),
        ));
    }

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| p[a].partial_cmp(&p[b]).unwrap().then(a.cmp(&b)));
    let y_inc: Vec<f64> = idx.iter().map(|&i| w[i]).collect();
    let (fit_inc, ss_inc) = pava_fit(&y_inc);
    let y_dec: Vec<f64> = idx.iter().rev().map(|&i| w[i]).collect();
    let (fit_dec, ss_dec) = pava_fit(&y_dec);

    let area = omega.domain().cell_area();
    let (direction, fit, ss) = if ss_inc <= ss_dec {
        (MonotoneDirection::Increasing, fit_inc, ss_inc)
    } else {
        (MonotoneDirection::Decreasing, fit_dec, ss_dec)
    };
    let isotonic_residual = (ss * area).sqrt();

    // Fitted values arrive monotone, so plateau clusters are consecutive.
    let f_lo = fit.iter().copied().fold(f64::INFINITY, f64::min);
    let f_hi = fit.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let merge_tol = 1e-6 * (f_hi - f_lo).max(1e-300);
    let mut clusters: Vec<(f64, usize)> = Vec::new();
    for &v in &fit {
        match clusters.last_mut() {
            Some((cv, cn)) if (v - *cv).abs() <= merge_tol => {
                *cv = (*cv * *cn as f64 + v) / (*cn as f64 + 1.0);
                *cn += 1;
            }
            _ => clusters.push((v, 1)),
        }
    }
    let min_cells = 2.max(n / 100);
    let plateau_levels: Vec<f64> = clusters
        .into_iter()
        .filter(|&(_, cnt)| cnt >= min_cells)
        .map(|(v, _)| v)
        .collect();

    Ok(MonotoneFitReport {
        direction,
        isotonic_residual,
        plateau_levels,
    })
}

/// Nonnegative least squares, Lawson-Hanson active set on normal
/// equations. Columns are small (levels plus the two signed mean
/// columns), rows are cells.
fn nnls(cols: &[Vec<f64>], b: &[f64], max_outer: usize) -> (Vec<f64>, bool) {
    let ncols = cols.len();
    let m = b.len();
    let mut x = vec![0.0f64; ncols];
    let mut passive = vec![false; ncols];
    let mut rank_deficient = false;
    let mut resid = b.to_vec();
    let w_scale = cols
        .iter()
        .map(|c| {
            c.iter()
                .zip(b.iter())
                .map(|(a, v)| a * v)
                .sum::<f64>()
                .abs()
        })
        .fold(1e-300, f64::max);

    for _ in 0..max_outer {
        let mut best = (usize::MAX, 0.0f64);
        for j in 0..ncols {
            if passive[j] {
                continue;
            }
            let wj: f64 = cols[j].iter().zip(resid.iter()).map(|(a, r)| a * r).sum();
            if wj > best.1 {
                best = (j, wj);
            }
        }
        if best.0 == usize::MAX || best.1 <= 1e-12 * w_scale {
            break;
        }
        passive[best.0] = true;

        loop {
            let active: Vec<usize> = (0..ncols).filter(|&j| passive[j]).collect();
            let k = active.len();
            let mut gram = vec![vec![0.0f64; k + 1]; k];
            for (ai, &ja) in active.iter().enumerate() {
                for (bi, &jb) in active.iter().enumerate() {
                    gram[ai][bi] = cols[ja]
                        .iter()
                        .zip(cols[jb].iter())
                        .map(|(u, v)| u * v)
                        .sum();
                }
                gram[ai][k] = cols[ja].iter().zip(b.iter()).map(|(u, v)| u * v).sum();
            }
            let diag_scale = (0..k).map(|i| gram[i][i]).fold(1e-300, f64::max);
            let z = match gauss_solve(&mut gram, k, 1e-12 * diag_scale) {
                Some(z) => z,
                None => {
                    // Dependent columns: retry with a tiny ridge and
                    // report the ambiguity.
                    rank_deficient = true;
                    let mut gram2 = vec![vec![0.0f64; k + 1]; k];
                    for (ai, &ja) in active.iter().enumerate() {
                        for (bi, &jb) in active.iter().enumerate() {
                            gram2[ai][bi] = cols[ja]
                                .iter()
                                .zip(cols[jb].iter())
                                .map(|(u, v)| u * v)
                                .sum();
                        }
                        gram2[ai][ai] += 1e-10 * diag_scale;
                        gram2[ai][k] = cols[ja].iter().zip(b.iter()).map(|(u, v)| u * v).sum();
                    }
                    gauss_solve(&mut gram2, k, 0.0).unwrap_or_else(|| vec![0.0; k])
                }
            };
            if z.iter().all(|&v| v > 0.0) {
                for (ai, &j) in active.iter().enumerate() {
                    x[j] = z[ai];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (ai, &j) in active.iter().enumerate() {
                if z[ai] <= 0.0 {
                    let denom = x[j] - z[ai];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                rank_deficient = true;
                break;
            }
            for (ai, &j) in active.iter().enumerate() {
                x[j] += alpha * (z[ai] - x[j]);
                if x[j] <= 1e-14 * diag_scale.max(1.0) {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
        }

        for i in 0..m {
            let mut ax = 0.0;
            for (j, col) in cols.iter().enumerate() {
                if x[j] != 0.0 {
                    ax += col[i] * x[j];
                }
            }
            resid[i] = b[i] - ax;
        }
    }
    (x, rank_deficient)
}

/// Solves the k x k system stored as [A | rhs] rows in place. Returns
/// None when a pivot falls below `tol`.
fn gauss_solve(aug: &mut [Vec<f64>], k: usize, tol: f64) -> Option<Vec<f64>> {
    for col in 0..k {
        let mut piv = col;
        for r in col + 1..k {
            if aug[r][col].abs() > aug[piv][col].abs() {
                piv = r;
            }
        }
        if aug[piv][col].abs() <= tol {
            return None;
        }
        aug.swap(col, piv);
        let p = aug[col][col];
        for r in 0..k {
            if r == col {
                continue;
            }
            let factor = aug[r][col] / p;
            if factor != 0.0 {
                for c in col..=k {
                    aug[r][c] -= factor * aug[col][c];
                }
            }
        }
    }
    Some((0..k).map(|i| aug[i][k] / aug[i][i]).collect())
}

#[allow(clippy::too_many_arguments)]
fn kkt_fit(
    omega: &[f64],
    psi: &[f64],
    x2: &[f64],
    f: &ConvexFunctionSpec,
    beta: f64,
    nu: f64,
    levels: &[f64],
    area: f64,
) -> (f64, Vec<(f64, f64)>, f64, bool) {
    let n = omega.len();
    let b: Vec<f64> = (0..n)
        .map(|i| -(f.derivative(omega[i]) - beta * psi[i] - nu * x2[i]))
        .collect();
    let lvl_scale = levels.iter().fold(1.0f64, |m, l| m.max(l.abs()));
    let lvl_tol = 1e-9 * lvl_scale;
    let mut cols: Vec<Vec<f64>> = levels
        .iter()
        .map(|&c| {
            omega
                .iter()
                .map(|&w| if w > c + lvl_tol { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    cols.push(vec![1.0; n]);
    cols.push(vec![-1.0; n]);
    let (x, rank_deficient) = nnls(&cols, &b, 4 * cols.len().max(8));
    let gamma = x[levels.len()] - x[levels.len() + 1];
    let lambda: Vec<(f64, f64)> = levels.iter().copied().zip(x.iter().copied()).collect();
    let mut ss = 0.0;
    for i in 0..n {
        let mut ax = 0.0;
        for (j, col) in cols.iter().enumerate() {
            ax += col[i] * x[j];
        }
        let r = b[i] - ax;
        ss += r * r;
    }
    (gamma, lambda, (ss * area).sqrt(), rank_deficient)
}

/// Multiplier reconstruction at a candidate optimum: nonnegative level
/// multipliers, complementary slackness, and the residual bracket the
/// level terms must cover.
pub fn kkt_report(result: &MinimalFlowResult, omega0: &VorticityField) -> Result<KktReport> {
    result.omega_star.same_domain(omega0)?;
    let levels = rearrange::profile(omega0).levels;
    if levels.len() > 64 {
        return Err(CoreError::InvalidParameter(format!(
            "kkt reconstruction handles at most 64 datum levels, got {}",
            levels.len()
        )));
    }
    let domain = omega0.domain();
    let n = domain.num_cells();
    let area = domain.cell_area();
    let omega = result.omega_star.flat();
    let psi = result.psi_star.psi_field().flat();
    let (rows, colsn) = domain.shape();
    let mut x2 = vec![0.0; n];
    if !matches!(domain, Domain::DiskRadial { .. }) {
        for r in 0..rows {
            for c in 0..colsn {
                let (_, h) = domain.cell_center(r, c);
                x2[r * colsn + c] = h;
            }
        }
    }
    let (gamma, lambda, stationarity_l2, rank_deficient) = kkt_fit(
        &omega,
        &psi,
        &x2,
        &result.integrand,
        result.beta,
        result.momentum_multiplier,
        &levels,
        area,
    );

    // Slack of each truncation constraint, nonnegative for members.
    let trunc =
        |v: &[f64], c: f64| -> f64 { v.iter().map(|&w| (w - c).max(0.0)).sum::<f64>() * area };
    let datum = omega0.flat();
    let mut complementary_slackness = 0.0f64;
    for &(c, l) in &lambda {
        let slack = trunc(&datum, c) - trunc(&omega, c);
        complementary_slackness = complementary_slackness.max((l * slack).abs());
    }

    let mut t_lo = f64::INFINITY;
    let mut t_hi = f64::NEG_INFINITY;
    for i in 0..n {
        let base = result.integrand.derivative(omega[i]);
        let t = -(base - result.beta * psi[i] - result.momentum_multiplier * x2[i] + gamma);
        t_lo = t_lo.min(t);
        t_hi = t_hi.max(t);
    }

    Ok(KktReport {
        gamma,
        lambda,
        stationarity_l2,
        complementary_slackness,
        bracket: (t_lo, t_hi),
        rank_deficient,
    })
}

/// First variations along one sampled block swap: `energy` is
/// d/dε E((1−ε)ω + ε ω∘φ) at ε = 0 with φ the block exchange, `casimir`
/// the same derivative for I_f.
#[derive(Debug, Clone, Copy)]
pub struct SwapVariation {
    pub energy: f64,
    pub casimir: f64,
}

/// Swap-direction minimality evidence. Convexity makes every `casimir`
/// variation nonpositive, so the Casimir can only be lowered along a
/// mixing that keeps the energy; when all sampled energy variations share
/// one strict sign no such first-order direction exists and the state is
/// minimal in its orbit closure as far as the sample can see.
#[derive(Debug, Clone)]
pub struct MinimalityProbe {
    pub variations: Vec<SwapVariation>,
    pub min_energy_variation: f64,
    pub max_energy_variation: f64,
    pub energy_sign_coherent: bool,
}

/// Samples `trials` random proper swaps of two disjoint congruent cell
/// blocks (squares up to `block_max` per side on the grid domains, radial
/// runs on the disk) and reports both first variations for each. Cell
/// pairs whose values agree to within 1e-9 of the field bound exchange
/// nothing but solver dirt; they are dropped from the quadrature, and a
/// candidate made only of such pairs is discarded outright, so a constant
/// field yields an empty, vacuously coherent probe.
pub fn minimality_probe(
    omega: &VorticityField,
    f: &ConvexFunctionSpec,
    trials: usize,
    block_max: usize,
    seed: u64,
) -> Result<MinimalityProbe> {
    if trials == 0 || block_max == 0 {
        return Err(CoreError::InvalidParameter(
            "minimality probe needs at least one trial and a positive block size".into(),
        ));
    }
    let v = omega.flat();
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    f.validate_range(lo, hi)?;
    let sol = greens::solve_stream(omega)?;
    let psi = sol.psi_field().flat();
    let area = omega.domain().cell_area();
    let proper_tol = 1e-9 * omega.bound().max(f64::MIN_POSITIVE);

    let domain = omega.domain().clone();
    let (ny, nx) = domain.shape();
    let disk = domain.is_disk();
    let k_cap = if disk {
        block_max.min(ny / 4).max(1)
    } else {
        block_max.min(ny / 2).min(nx / 2).max(1)
    };
    let row_wrap = matches!(domain, Domain::Torus { .. });

    let mut rng = sampling::rng(seed);
    let mut variations = Vec::with_capacity(trials);
    let mut attempts = 0usize;
    while variations.len() < trials && attempts < 400 * trials {
        attempts += 1;
        let k = rng.gen_range(1..=k_cap);
        let (q1, q2) = if disk {
            let a = rng.gen_range(0..=ny - k);
            let b = rng.gen_range(0..=ny - k);
            if a.abs_diff(b) < k {
                continue;
            }
            ((a..a + k).collect::<Vec<_>>(), (b..b + k).collect())
        } else {
            let rows = if row_wrap { ny } else { ny - k + 1 };
            let block = |r0: usize, c0: usize| -> Vec<usize> {
                let mut idx = Vec::with_capacity(k * k);
                for i in 0..k {
                    for j in 0..k {
                        idx.push(((r0 + i) % ny) * nx + (c0 + j) % nx);
                    }
                }
                idx
            };
            let q1 = block(rng.gen_range(0..rows), rng.gen_range(0..nx));
            let q2 = block(rng.gen_range(0..rows), rng.gen_range(0..nx));
            if q1.iter().any(|i| q2.contains(i)) {
                continue;
            }
            (q1, q2)
        };
        if q1
            .iter()
            .zip(&q2)
            .all(|(&a, &b)| (v[a] - v[b]).abs() <= proper_tol)
        {
            continue;
        }
        let mut de = 0.0;
        let mut di = 0.0;
        for (&a, &b) in q1.iter().zip(&q2) {
            if (v[a] - v[b]).abs() <= proper_tol {
                continue;
            }
            de += (v[a] - v[b]) * (psi[a] - psi[b]);
            di -= (f.derivative(v[a]) - f.derivative(v[b])) * (v[a] - v[b]);
        }
        variations.push(SwapVariation {
            energy: de * area,
            casimir: di * area,
        });
    }

    let min_e = variations
        .iter()
        .map(|s| s.energy)
        .fold(f64::INFINITY, f64::min);
    let max_e = variations
        .iter()
        .map(|s| s.energy)
        .fold(f64::NEG_INFINITY, f64::max);
    let coherent = variations.is_empty() || min_e > 0.0 || max_e < 0.0;
    Ok(MinimalityProbe {
        min_energy_variation: if variations.is_empty() { 0.0 } else { min_e },
        max_energy_variation: if variations.is_empty() { 0.0 } else { max_e },
        energy_sign_coherent: coherent,
        variations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rearrange::{casimir, equimeasurable, in_orbit_closure};
    use approx::assert_abs_diff_eq;
    use ndarray::Array2;
    use rand::Rng;

    fn quadratic() -> ConvexFunctionSpec {
        ConvexFunctionSpec::Quadratic
    }

    /// +1/-1 split along the diagonal of the default torus; mean is
    /// exactly zero for even n.
    fn diagonal_patch(n: usize) -> VorticityField {
        let domain = Domain::torus_default(n, n).unwrap();
        let mut values = Array2::zeros((n, n));
        for r in 0..n {
            for c in 0..n {
                values[(r, c)] = if (r + c + 1) % n < n / 2 { 1.0 } else { -1.0 };
            }
        }
        VorticityField::new(domain, values).unwrap()
    }

    #[test]
    fn rejects_non_strictly_convex_integrands() {
        let domain = Domain::channel_default(8, 8).unwrap();
        let field = VorticityField::from_fn(domain, |x1, _| x1.sin()).unwrap();
        let table = ConvexFunctionSpec::Tabulated(
            crate::rearrange::TabulatedConvex::new(vec![-10.0, 10.0], vec![10.0, 10.0]).unwrap(),
        );
        assert!(matches!(
            minimize_casimir(&field, &table, false, &MinimizeOptions::default()),
            Err(CoreError::InvalidParameter(_))
        ));
        assert!(matches!(
            minimize_casimir(
                &field,
                &ConvexFunctionSpec::NegEntropyBoltzmann,
                false,
                &MinimizeOptions::default()
            ),
            Err(CoreError::InvalidParameter(_))
        ));
    }

    #[test]
    fn constant_datum_is_returned_unchanged() {
        let domain = Domain::channel_default(8, 8).unwrap();
        let field = VorticityField::from_fn(domain, |_, _| 0.7).unwrap();
        let result =
            minimize_casimir(&field, &quadratic(), false, &MinimizeOptions::default()).unwrap();
        assert_eq!(result.omega_star.flat(), field.flat());
        assert_eq!(result.residuals.energy_gap, 0.0);
        assert_eq!(result.residuals.stationarity, 0.0);
        assert!(result.lambda.is_empty());
        assert_abs_diff_eq!(result.gamma, 0.7, epsilon = 1e-15);
    }

    /// The diagonal split has all its spectral mass at |κ|² = 2, so its
    /// energy sits strictly below the gravest-mode cap and the enstrophy
    /// minimizer at fixed energy is a pure |κ| = 1 field with
    /// I* = E0 exactly.
    #[test]
    fn diagonal_patch_minimizer_is_a_gravest_mode() {
        let omega0 = diagonal_patch(32);
        let e0 = greens::energy(&omega0).unwrap();
        let result =
            minimize_casimir(&omega0, &quadratic(), false, &MinimizeOptions::default()).unwrap();

        assert!(result.residuals.energy_gap <= 1e-8 * e0);
        assert!((result.f_value - e0).abs() <= 1e-8 * e0);
        assert!((result.beta + 1.0).abs() <= 1e-3);
        assert!(
            in_orbit_closure(&result.omega_star, &omega0, None)
                .unwrap()
                .member
        );

        // Clamp relation with no active clamps: omega is an affine
        // function of psi, recovered by least squares.
        let w = result.omega_star.flat();
        let p = result.psi_star.psi_field().flat();
        let n = w.len() as f64;
        let wm = w.iter().sum::<f64>() / n;
        let pm = p.iter().sum::<f64>() / n;
        let cov: f64 = w
            .iter()
            .zip(p.iter())
            .map(|(a, b)| (a - wm) * (b - pm))
            .sum();
        let var: f64 = p.iter().map(|b| (b - pm) * (b - pm)).sum();
        let alpha = cov / var;
        let intercept = wm - alpha * pm;
        let area = result.omega_star.domain().cell_area();
        let res: f64 = w
            .iter()
            .zip(p.iter())
            .map(|(a, b)| {
                let fit = (alpha * b + intercept).clamp(-1.0, 1.0);
                (a - fit) * (a - fit)
            })
            .sum::<f64>()
            * area;
        let l2 = result.omega_star.l2_norm();
        assert!(res.sqrt() <= 1e-6 * l2, "clamp residual {}", res.sqrt());
        assert!(result.residuals.isotonic <= 1e-4 * l2);
    }

    /// A uniform band hugging the bottom wall minimizes energy over its
    /// own orbit closure, so the minimizer at fixed energy is the datum
    /// itself (up to rearrangement dust).
    #[test]
    fn flat_shear_datum_is_already_minimal() {
        let domain = Domain::channel_default(32, 32).unwrap();
        let omega0 =
            VorticityField::from_fn(domain, |_, x2| if x2 < 0.5 { -1.0 } else { 0.0 }).unwrap();
        let i0 = casimir(&omega0, &quadratic()).unwrap();
        let result =
            minimize_casimir(&omega0, &quadratic(), false, &MinimizeOptions::default()).unwrap();

        assert!((result.f_value - i0).abs() <= 1e-8 * (1.0 + i0.abs()));
        assert!(equimeasurable(&result.omega_star, &omega0, 1e-9).unwrap());
        assert!(result.residuals.energy_gap <= 1e-10);
    }

    #[test]
    fn eight_cell_solution_beats_dense_shell_sampling() {
        let domain = Domain::disk_default(8).unwrap();
        let vals = [0.9, 0.4, -0.2, 0.1, -0.6, 0.3, -0.8, -0.1];
        let omega0 = VorticityField::from_flat(domain.clone(), &vals).unwrap();
        let e0 = greens::energy(&omega0).unwrap();
        let result =
            minimize_casimir(&omega0, &quadratic(), false, &MinimizeOptions::default()).unwrap();
        assert!(result.residuals.energy_gap <= 1e-8 * e0);
        assert!(
            in_orbit_closure(&result.omega_star, &omega0, None)
                .unwrap()
                .member
        );

        // Dense shell sampling: take segments between random feasible
        // points whose energies straddle E0; the energy along a segment
        // is a known quadratic, so the crossings are exact.
        let mut rng = sampling::rng(914);
        let mut best = f64::INFINITY;
        let mut hits = 0usize;
        for _ in 0..4000 {
            let mut p1 = vals.to_vec();
            let mut p2 = vals.to_vec();
            let mut p3 = vals.to_vec();
            p1.shuffle(&mut rng);
            p2.shuffle(&mut rng);
            p3.shuffle(&mut rng);
            let lam: f64 = rng.gen();
            let y1: Vec<f64> = p1
                .iter()
                .zip(p2.iter())
                .map(|(a, b)| lam * a + (1.0 - lam) * b)
                .collect();
            let y2 = p3;
            let f1 = VorticityField::from_flat(domain.clone(), &y1).unwrap();
            let e1 = greens::energy(&f1).unwrap();
            let d_vals: Vec<f64> = y2.iter().zip(y1.iter()).map(|(a, b)| a - b).collect();
            let d_field = VorticityField::from_flat(domain.clone(), &d_vals).unwrap();
            let c1 = -greens::green_form(&f1, &d_field).unwrap();
            let q = greens::energy(&d_field).unwrap();
            // E(t) = e1 + c1 t + q t^2 on the segment y1 -> y2.
            let disc = c1 * c1 - 4.0 * q * (e1 - e0);
            if disc < 0.0 || q.abs() < 1e-300 {
                continue;
            }
            let sq = disc.sqrt();
            for t in [(-c1 - sq) / (2.0 * q), (-c1 + sq) / (2.0 * q)] {
                if !(0.0..=1.0).contains(&t) {
                    continue;
                }
                let shell: Vec<f64> = y1
                    .iter()
                    .zip(d_vals.iter())
                    .map(|(a, d)| a + t * d)
                    .collect();
                let shell_field = VorticityField::from_flat(domain.clone(), &shell).unwrap();
                let e = greens::energy(&shell_field).unwrap();
                assert!((e - e0).abs() <= 1e-9 * e0.max(1e-300));
                best = best.min(casimir(&shell_field, &quadratic()).unwrap());
                hits += 1;
            }
        }
        assert!(hits > 50, "sampler found only {hits} shell points");
        assert!(
            result.f_value <= best + 1e-9,
            "solver {} vs sampled {}",
            result.f_value,
            best
        );
    }

    #[test]
    fn random_datum_solution_is_member_and_never_worse() {
        let domain = Domain::torus_default(16, 16).unwrap();
        let mut rng = sampling::rng(77);
        let mut values = Array2::zeros((16, 16));
        for v in values.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let mean = values.sum() / 256.0;
        values.mapv_inplace(|v| v - mean);
        let omega0 = VorticityField::new(domain, values).unwrap();
        let e0 = greens::energy(&omega0).unwrap();
        let i0 = casimir(&omega0, &quadratic()).unwrap();

        let result =
            minimize_casimir(&omega0, &quadratic(), false, &MinimizeOptions::default()).unwrap();
        assert!(result.residuals.energy_gap <= 1e-8 * e0);
        assert!(result.f_value <= i0 + 1e-10);
        assert!(
            in_orbit_closure(&result.omega_star, &omega0, None)
                .unwrap()
                .member
        );
        assert!(result.residuals.mean_gap <= 1e-12);
    }

    #[test]
    fn momentum_constraint_is_respected_when_fixed() {
        let domain = Domain::channel_default(16, 16).unwrap();
        let mut rng = sampling::rng(31);
        let mut values = Array2::zeros((16, 16));
        for v in values.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let omega0 = VorticityField::new(domain, values).unwrap();
        let e0 = greens::energy(&omega0).unwrap();
        let m0 = greens::momentum(&omega0).unwrap();

        let result =
            minimize_casimir(&omega0, &quadratic(), true, &MinimizeOptions::default()).unwrap();
        assert!(result.residuals.energy_gap <= 1e-8 * e0);
        assert!(result.residuals.momentum_gap <= 1e-6 * (1.0 + m0.abs()));
        assert!(
            in_orbit_closure(&result.omega_star, &omega0, None)
                .unwrap()
                .member
        );
    }

    #[test]
    fn monotone_fit_recovers_exact_monotone_relations() {
        let domain = Domain::channel_default(16, 16).unwrap();
        let psi = VorticityField::from_fn(domain.clone(), |x1, x2| x1.sin() + 0.3 * x2).unwrap();
        let mut omega = psi.clone();
        omega.map_values(|p| p.tanh());
        let report = monotone_fit(&omega, &psi).unwrap();
        assert_eq!(report.direction, MonotoneDirection::Increasing);
        assert!(report.isotonic_residual <= 1e-12);

        let mut omega_dec = psi.clone();
        omega_dec.map_values(|p| -p * p * p);
        let report = monotone_fit(&omega_dec, &psi).unwrap();
        assert_eq!(report.direction, MonotoneDirection::Decreasing);
        assert!(report.isotonic_residual <= 1e-12);
    }

    #[test]
    fn monotone_fit_flags_nonmonotone_data_and_finds_plateaus() {
        let domain = Domain::channel_default(16, 16).unwrap();
        let psi = VorticityField::from_fn(domain.clone(), |x1, _| x1.sin()).unwrap();
        let mut omega = psi.clone();
        omega.map_values(|p| p * p);
        let report = monotone_fit(&omega, &psi).unwrap();
        assert!(report.isotonic_residual > 0.05 * omega.l2_norm());

        let mut clamped = psi.clone();
        clamped.map_values(|p| (2.0 * p).clamp(-1.0, 1.0));
        let report = monotone_fit(&clamped, &psi).unwrap();
        assert!(report.isotonic_residual <= 1e-12);
        assert!(report
            .plateau_levels
            .iter()
            .any(|&v| (v - 1.0).abs() < 1e-9));
        assert!(report
            .plateau_levels
            .iter()
            .any(|&v| (v + 1.0).abs() < 1e-9));
    }

    #[test]
    fn monotone_fit_rejects_constant_stream_function() {
        let domain = Domain::channel_default(8, 8).unwrap();
        let omega = VorticityField::from_fn(domain.clone(), |x1, _| x1.cos()).unwrap();
        let psi = VorticityField::from_fn(domain, |_, _| 3.0).unwrap();
        assert!(matches!(
            monotone_fit(&omega, &psi),
            Err(CoreError::InvalidParameter(_))
        ));
    }

    #[test]
    fn kkt_report_is_clean_at_the_gravest_mode_optimum() {
        let omega0 = diagonal_patch(16);
        let result =
            minimize_casimir(&omega0, &quadratic(), false, &MinimizeOptions::default()).unwrap();
        let report = kkt_report(&result, &omega0).unwrap();
        assert!(report.lambda.iter().all(|&(_, l)| l >= 0.0));
        assert!(report.complementary_slackness <= 1e-6);
        let scale = result.omega_star.l2_norm();
        assert!(report.stationarity_l2 <= 1e-5 * scale.max(1.0));
        assert!(report.bracket.0 <= 1e-5 && report.bracket.1 >= -1e-5);
    }

    #[test]
    fn minimality_probe_is_sign_coherent_for_functional_states() {
        // omega = cos x1 gives psi = -cos x1, so omega is a strictly
        // decreasing function of psi and every proper swap must lower the
        // energy while lowering the Casimir.
        let domain = Domain::torus_default(32, 32).unwrap();
        let omega = VorticityField::from_fn(domain, |x1, _| x1.cos()).unwrap();
        let probe = minimality_probe(&omega, &quadratic(), 100, 3, 11).unwrap();
        assert_eq!(probe.variations.len(), 100);
        assert!(probe.energy_sign_coherent);
        assert!(probe.max_energy_variation < 0.0);
        assert!(probe.variations.iter().all(|s| s.casimir <= 1e-15));

        // Single-cell oracle straight from the swap quadrature.
        let v = omega.flat();
        let area = omega.domain().cell_area();
        let de = crate::bistoch::swap_energy_first_variation(&[0], &[5], &omega).unwrap();
        assert_abs_diff_eq!(de, -(v[0] - v[5]).powi(2) * area, epsilon = 1e-12);
    }

    #[test]
    fn minimality_probe_sees_both_signs_on_a_random_cloud() {
        let domain = Domain::torus_default(16, 16).unwrap();
        let mut rng = sampling::rng(5);
        let mut values = Array2::zeros((16, 16));
        for v in values.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let mean = values.sum() / 256.0;
        values.mapv_inplace(|v| v - mean);
        let omega = VorticityField::new(domain, values).unwrap();
        let probe = minimality_probe(&omega, &quadratic(), 200, 2, 7).unwrap();
        assert!(!probe.energy_sign_coherent);
        assert!(probe.min_energy_variation < 0.0 && probe.max_energy_variation > 0.0);
        assert!(probe.variations.iter().all(|s| s.casimir <= 1e-15));
    }

    #[test]
    fn minimality_probe_is_vacuous_on_constants_and_deterministic() {
        let domain = Domain::channel_default(16, 16).unwrap();
        let constant = VorticityField::from_fn(domain.clone(), |_, _| 0.75).unwrap();
        let probe = minimality_probe(&constant, &quadratic(), 50, 2, 3).unwrap();
        assert!(probe.variations.is_empty());
        assert!(probe.energy_sign_coherent);
        assert_eq!(probe.min_energy_variation, 0.0);

        assert!(minimality_probe(&constant, &quadratic(), 0, 2, 3).is_err());

        let shear = VorticityField::from_fn(domain, |_, x2| (2.0 * x2 - 1.0).tanh()).unwrap();
        let a = minimality_probe(&shear, &quadratic(), 40, 3, 9).unwrap();
        let b = minimality_probe(&shear, &quadratic(), 40, 3, 9).unwrap();
        assert_eq!(a.variations.len(), b.variations.len());
        for (x, y) in a.variations.iter().zip(&b.variations) {
            assert_eq!(x.energy.to_bits(), y.energy.to_bits());
            assert_eq!(x.casimir.to_bits(), y.casimir.to_bits());
        }
    }

    #[test]
    fn minimality_probe_runs_on_the_disk() {
        let domain = Domain::disk_default(64).unwrap();
        let omega = VorticityField::from_fn(domain, |r, _| 1.0 - r * r).unwrap();
        let probe = minimality_probe(&omega, &quadratic(), 60, 4, 13).unwrap();
        assert_eq!(probe.variations.len(), 60);
        // One-signed profile decreasing in r while psi increases in r.
        assert!(probe.energy_sign_coherent);
        assert!(probe.variations.iter().all(|s| s.casimir < 0.0));
    }
}
