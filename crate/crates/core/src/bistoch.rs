//! Doubly stochastic mixing operators on cell values.
//!
//! A bistochastic matrix averages cell values without moving mass or
//! mean; its orbit on a field is exactly the rearrangement orbit
//! closure. Dense matrices here are a verification tool for small
//! instances; production mixing paths (Fejér truncation, pair swaps)
//! act directly on fields.

use crate::error::{CoreError, Result};
use crate::field::{from_spectral, to_spectral, VorticityField};
use crate::greens;
use ndarray::Array2;
use rand::Rng;

/// Dense matrices are for small-instance verification only.
const MAX_DENSE_CELLS: usize = 4096;
/// Entries below this are treated as zero when hunting permutation
/// support in the Birkhoff extraction.
const SUPPORT_THRESHOLD: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct BistochasticMatrix {
    n: usize,
    entries: Array2<f64>,
}

impl BistochasticMatrix {
    /// Validates nonnegativity and unit row/column sums (1e-12).
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        let (r, c) = entries.dim();
        if r != c || r == 0 {
            return Err(CoreError::InvalidParameter(format!(
                "bistochastic matrix must be square and nonempty, got {r}x{c}"
            )));
        }
        if r > MAX_DENSE_CELLS {
            return Err(CoreError::InvalidParameter(format!(
                "dense bistochastic matrices are capped at {MAX_DENSE_CELLS} cells, got {r}"
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite("bistochastic entries".into()));
        }
        if entries.iter().any(|&v| v < 0.0) {
            return Err(CoreError::NotBistochastic("negative entry".into()));
        }
        for i in 0..r {
            let row: f64 = entries.row(i).iter().sum();
            let col: f64 = entries.column(i).iter().sum();
            if (row - 1.0).abs() > 1e-12 || (col - 1.0).abs() > 1e-12 {
                return Err(CoreError::NotBistochastic(format!(
                    "row {i} sums to {row}, column to {col}"
                )));
            }
        }
        Ok(Self { n: r, entries })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            entries: Array2::eye(n),
        }
    }

    /// All entries 1/n: maps every field to the constant at its mean.
    pub fn complete_mixing(n: usize) -> Self {
        Self {
            n,
            entries: Array2::from_elem((n, n), 1.0 / n as f64),
        }
    }

    pub fn from_permutation(perm: &[usize]) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || seen[p] {
                return Err(CoreError::InvalidParameter(
                    "not a permutation: repeated or out-of-range image".into(),
                ));
            }
            seen[p] = true;
        }
        let mut entries = Array2::zeros((n, n));
        for (i, &p) in perm.iter().enumerate() {
            entries[[i, p]] = 1.0;
        }
        Ok(Self { n, entries })
    }

    /// Sinkhorn-scaled random positive matrix. Entries start in
    /// [0.5, 1.5] so the scaling converges fast and the support is full.
    pub fn random(rng: &mut impl Rng, n: usize) -> Result<Self> {
        if n == 0 || n > MAX_DENSE_CELLS {
            return Err(CoreError::InvalidParameter(format!(
                "random bistochastic size {n} out of range"
            )));
        }
        let mut m = Array2::from_shape_fn((n, n), |_| rng.gen_range(0.5..1.5));
        for _ in 0..10_000 {
            for mut row in m.rows_mut() {
                let s = row.sum();
                row.mapv_inplace(|v| v / s);
            }
            let mut worst = 0.0f64;
            for j in 0..n {
                let s: f64 = m.column(j).iter().sum();
                worst = worst.max((s - 1.0).abs());
                let mut col = m.column_mut(j);
                col.mapv_inplace(|v| v / s);
            }
            if worst < 1e-14 {
                return Self::new(m);
            }
        }
        Err(CoreError::NoConvergence(
            "Sinkhorn scaling did not reach unit marginals".into(),
        ))
    }

    /// Matrix product; the class is closed under composition.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(CoreError::InvalidParameter(format!(
                "composition size mismatch: {} vs {}",
                self.n, other.n
            )));
        }
        Self::new(self.entries.dot(&other.entries))
    }

    /// Mixes cell values: (Kω)ᵢ = Σⱼ Kᵢⱼ ωⱼ. Unit column sums preserve
    /// the mean exactly; the output lies in the orbit closure of the
    /// input.
    pub fn apply(&self, field: &VorticityField) -> Result<VorticityField> {
        if field.domain().num_cells() != self.n {
            return Err(CoreError::InvalidParameter(format!(
                "matrix on {} cells applied to field with {}",
                self.n,
                field.domain().num_cells()
            )));
        }
        let v = field.flat();
        let mut out = vec![0.0; self.n];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.entries.row(i).iter().zip(&v).map(|(k, x)| k * x).sum();
        }
        VorticityField::from_flat(field.domain().clone(), &out)
    }

    /// Greedy Birkhoff extraction: repeatedly finds a permutation inside
    /// the positive support and strips the largest multiple of it. Each
    /// pass zeroes at least one entry, so at most (n−1)²+1 permutations
    /// are needed.
    pub fn birkhoff(&self) -> Result<BirkhoffDecomposition> {
        let n = self.n;
        let mut residual = self.entries.clone();
        let mut weights = Vec::new();
        let mut permutations = Vec::new();
        let cap = (n - 1) * (n - 1) + 1;

        let mut remaining = 1.0;
        while remaining > 1e-12 {
            if weights.len() >= cap {
                return Err(CoreError::NotBistochastic(format!(
                    "Birkhoff extraction exceeded {cap} permutations; residual mass {remaining}"
                )));
            }
            let perm = match matching_on_support(&residual, SUPPORT_THRESHOLD) {
                Some(p) => p,
                None => {
                    return Err(CoreError::NotBistochastic(format!(
                        "no permutation in the positive support with {remaining} mass left"
                    )))
                }
            };
            let w = perm
                .iter()
                .enumerate()
                .map(|(i, &j)| residual[[i, j]])
                .fold(f64::INFINITY, f64::min);
            for (i, &j) in perm.iter().enumerate() {
                residual[[i, j]] -= w;
            }
            weights.push(w);
            permutations.push(perm);
            remaining -= w;
        }

        Ok(BirkhoffDecomposition {
            n,
            weights,
            permutations,
        })
    }
}

/// Perfect matching of rows to columns using only entries above the
/// threshold; Kuhn's augmenting-path search.
fn matching_on_support(m: &Array2<f64>, threshold: f64) -> Option<Vec<usize>> {
    let n = m.dim().0;
    // col_of[j] = row currently matched to column j.
    let mut col_of = vec![usize::MAX; n];

    fn augment(
        m: &Array2<f64>,
        threshold: f64,
        row: usize,
        visited: &mut [bool],
        col_of: &mut [usize],
    ) -> bool {
        let n = visited.len();
        for j in 0..n {
            if m[[row, j]] > threshold && !visited[j] {
                visited[j] = true;
                if col_of[j] == usize::MAX || augment(m, threshold, col_of[j], visited, col_of) {
                    col_of[j] = row;
                    return true;
                }
            }
        }
        false
    }

    for row in 0..n {
        let mut visited = vec![false; n];
        if !augment(m, threshold, row, &mut visited, &mut col_of) {
            return None;
        }
    }
    let mut perm = vec![0; n];
    for (j, &i) in col_of.iter().enumerate() {
        perm[i] = j;
    }
    Some(perm)
}

#[derive(Debug, Clone)]
pub struct BirkhoffDecomposition {
    n: usize,
    pub weights: Vec<f64>,
    pub permutations: Vec<Vec<usize>>,
}

impl BirkhoffDecomposition {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn reconstruct(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.n, self.n));
        for (w, perm) in self.weights.iter().zip(&self.permutations) {
            for (i, &j) in perm.iter().enumerate() {
                m[[i, j]] += w;
            }
        }
        m
    }

    /// Cycle notation of one permutation, e.g. "(0 2 1)(3)(4 5)".
    pub fn cycle_notation(&self, index: usize) -> String {
        let perm = &self.permutations[index];
        let mut seen = vec![false; perm.len()];
        let mut out = String::new();
        for start in 0..perm.len() {
            if seen[start] {
                continue;
            }
            let mut cycle = vec![start];
            seen[start] = true;
            let mut next = perm[start];
            while next != start {
                seen[next] = true;
                cycle.push(next);
                next = perm[next];
            }
            out.push('(');
            out.push_str(
                &cycle
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .join(" "),
            );
            out.push(')');
        }
        out
    }
}

/// Fejér low-pass: spectral multiplier (1−|k₁|/N)(1−|k₂|/N) on
/// |kᵢ| < N, zero beyond. The equivalent cell kernel is a product of
/// squared Dirichlet-sum ratios, hence nonnegative: the operator is
/// bistochastic and preserves nonnegativity.
pub fn fejer(cutoff: usize, field: &VorticityField) -> Result<VorticityField> {
    let (ny, nx) = field.domain().shape();
    if !matches!(field.domain(), crate::field::Domain::Torus { .. }) {
        return Err(CoreError::UnsupportedDomain(
            "Fejér truncation needs a torus".into(),
        ));
    }
    if cutoff == 0 || 2 * cutoff >= nx || 2 * cutoff >= ny {
        return Err(CoreError::InvalidParameter(format!(
            "Fejér cutoff {cutoff} must satisfy 0 < N < min(nx, ny)/2 = {}",
            nx.min(ny) / 2
        )));
    }
    let n = cutoff as f64;
    let mut spec = to_spectral(field)?;
    let (rows, cols) = spec.coeffs().dim();
    {
        let coeffs = spec.coeffs_mut();
        for r in 0..rows {
            let k2 = crate::field::SpectralField::mode_index(r, rows).unsigned_abs() as f64;
            for c in 0..cols {
                let k1 = crate::field::SpectralField::mode_index(c, cols).unsigned_abs() as f64;
                let w = (1.0 - k1 / n).max(0.0) * (1.0 - k2 / n).max(0.0);
                coeffs[[r, c]] *= w;
            }
        }
    }
    from_spectral(&spec)
}

/// Partial swap of two pairwise-matched disjoint cell sets:
/// (1−ε)·ω + ε·(ω∘φ) with φ exchanging q1[k] ↔ q2[k].
pub fn swap_mix(
    q1: &[usize],
    q2: &[usize],
    eps: f64,
    field: &VorticityField,
) -> Result<VorticityField> {
    validate_swap(q1, q2, field)?;
    if !(0.0..=1.0).contains(&eps) {
        return Err(CoreError::InvalidParameter(format!(
            "swap weight {eps} outside [0, 1]"
        )));
    }
    let mut v = field.flat();
    for (&a, &b) in q1.iter().zip(q2) {
        let (va, vb) = (v[a], v[b]);
        v[a] = (1.0 - eps) * va + eps * vb;
        v[b] = (1.0 - eps) * vb + eps * va;
    }
    VorticityField::from_flat(field.domain().clone(), &v)
}

/// First variation of the energy along the swap mix at ε = 0:
/// dE/dε = Σₖ (ω_a − ω_b)(ψ_a − ψ_b)·cell_area, with the gauged
/// streamfunction so momentum changes are priced in.
pub fn swap_energy_first_variation(
    q1: &[usize],
    q2: &[usize],
    field: &VorticityField,
) -> Result<f64> {
    validate_swap(q1, q2, field)?;
    let sol = greens::solve_stream(field)?;
    let psi_flat = sol.psi_field().flat();
    let v = field.flat();
    let area = field.domain().cell_area();
    Ok(q1
        .iter()
        .zip(q2)
        .map(|(&a, &b)| (v[a] - v[b]) * (psi_flat[a] - psi_flat[b]))
        .sum::<f64>()
        * area)
}

fn validate_swap(q1: &[usize], q2: &[usize], field: &VorticityField) -> Result<()> {
    if q1.len() != q2.len() || q1.is_empty() {
        return Err(CoreError::InvalidParameter(format!(
            "swap sets must be nonempty and equal-sized, got {} and {}",
            q1.len(),
            q2.len()
        )));
    }
    let n = field.domain().num_cells();
    let mut seen = std::collections::HashSet::new();
    for &i in q1.iter().chain(q2) {
        if i >= n {
            return Err(CoreError::InvalidParameter(format!(
                "swap index {i} out of range for {n} cells"
            )));
        }
        if !seen.insert(i) {
            return Err(CoreError::InvalidParameter(format!(
                "swap sets overlap or repeat cell {i}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Domain;
    use crate::rearrange::{self, ConvexFunctionSpec};
    use crate::sampling;

    fn random_field(rng: &mut impl Rng, domain: Domain, amp: f64) -> VorticityField {
        let (ny, nx) = domain.shape();
        let values = Array2::from_shape_fn((ny, nx), |_| rng.gen_range(-amp..amp));
        VorticityField::new(domain, values).unwrap()
    }

    #[test]
    fn identity_leaves_fields_alone() {
        let mut rng = sampling::rng(30);
        let f = random_field(&mut rng, Domain::torus_default(4, 4).unwrap(), 2.0);
        let k = BistochasticMatrix::identity(16);
        let g = k.apply(&f).unwrap();
        assert_eq!(f.flat(), g.flat());
    }

    #[test]
    fn complete_mixing_flattens_to_the_mean() {
        let mut rng = sampling::rng(31);
        let f = random_field(&mut rng, Domain::torus_default(4, 4).unwrap(), 2.0);
        let k = BistochasticMatrix::complete_mixing(16);
        let g = k.apply(&f).unwrap();
        for v in g.flat() {
            assert!((v - f.mean()).abs() <= 1e-13);
        }
    }

    #[test]
    fn random_matrix_mixes_into_the_orbit_closure() {
        let mut rng = sampling::rng(32);
        let domain = Domain::disk_radial(1.0, 8).unwrap();
        let f = random_field(&mut rng, domain, 2.0);
        let k = BistochasticMatrix::random(&mut rng, 8).unwrap();
        let g = k.apply(&f).unwrap();
        assert!((g.mean() - f.mean()).abs() <= 1e-12);
        let m = rearrange::in_orbit_closure(&g, &f, None).unwrap();
        assert!(m.member, "worst constraint {:?}", m.worst_constraint);
    }

    #[test]
    fn rejects_non_bistochastic_input() {
        let mut m = Array2::eye(4);
        m[[0, 0]] = -0.1;
        m[[0, 1]] = 1.1;
        assert!(matches!(
            BistochasticMatrix::new(m),
            Err(CoreError::NotBistochastic(_))
        ));
        let mut m = Array2::eye(4);
        m[[2, 2]] = 0.9;
        assert!(matches!(
            BistochasticMatrix::new(m),
            Err(CoreError::NotBistochastic(_))
        ));
        assert!(BistochasticMatrix::new(Array2::eye(5000)).is_err());
    }

    #[test]
    fn composition_stays_bistochastic() {
        let mut rng = sampling::rng(33);
        let a = BistochasticMatrix::random(&mut rng, 12).unwrap();
        let b = BistochasticMatrix::random(&mut rng, 12).unwrap();
        let c = a.compose(&b).unwrap();
        for i in 0..12 {
            assert!((c.entries().row(i).sum() - 1.0).abs() <= 1e-11);
            assert!((c.entries().column(i).sum() - 1.0).abs() <= 1e-11);
        }
    }

    #[test]
    fn birkhoff_of_identity_is_one_permutation() {
        let d = BistochasticMatrix::identity(6).birkhoff().unwrap();
        assert_eq!(d.len(), 1);
        assert!((d.weights[0] - 1.0).abs() <= 1e-12);
        assert_eq!(d.permutations[0], vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(d.cycle_notation(0), "(0)(1)(2)(3)(4)(5)");
    }

    #[test]
    fn birkhoff_of_uniform_three_by_three() {
        let k = BistochasticMatrix::complete_mixing(3);
        let d = k.birkhoff().unwrap();
        assert!(d.len() <= 5);
        let rec = d.reconstruct();
        for v in rec.iter() {
            assert!((v - 1.0 / 3.0).abs() <= 1e-10);
        }
        assert!((d.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn birkhoff_reconstructs_random_matrices() {
        let mut rng = sampling::rng(34);
        for _ in 0..5 {
            let k = BistochasticMatrix::random(&mut rng, 6).unwrap();
            let d = k.birkhoff().unwrap();
            assert!(d.len() <= 26, "used {} permutations", d.len());
            let rec = d.reconstruct();
            let err = (&rec - k.entries())
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(err <= 1e-10, "reconstruction error {err}");
        }
    }

    #[test]
    fn fejer_keeps_constants_and_scales_single_modes() {
        let domain = Domain::torus_default(16, 16).unwrap();
        let constant = VorticityField::from_fn(domain.clone(), |_, _| 2.5).unwrap();
        let out = fejer(4, &constant).unwrap();
        for v in out.flat() {
            assert!((v - 2.5).abs() <= 1e-12);
        }

        let mode = VorticityField::from_fn(domain, |x1, _| x1.cos()).unwrap();
        let out = fejer(4, &mode).unwrap();
        let expected = mode.values() * 0.75;
        let err = (out.values() - &expected)
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err <= 1e-12, "k=(1,0) should scale by 3/4, error {err}");
    }

    #[test]
    fn fejer_preserves_mean_and_nonnegativity() {
        let mut rng = sampling::rng(35);
        let domain = Domain::torus_default(32, 32).unwrap();
        let values = Array2::from_shape_fn((32, 32), |_| rng.gen_range(0.0..3.0));
        let f = VorticityField::new(domain, values).unwrap();
        let g = fejer(7, &f).unwrap();
        assert!((g.mean() - f.mean()).abs() <= 1e-13);
        assert!(g.flat().iter().all(|&v| v >= -1e-12));
    }

    #[test]
    fn fejer_rejects_bad_cutoffs_and_domains() {
        let torus = VorticityField::zeros(Domain::torus_default(16, 16).unwrap());
        assert!(fejer(8, &torus).is_err());
        assert!(fejer(0, &torus).is_err());
        let channel = VorticityField::zeros(Domain::channel_default(16, 16).unwrap());
        assert!(matches!(
            fejer(4, &channel),
            Err(CoreError::UnsupportedDomain(_))
        ));
    }

    #[test]
    fn swap_mix_endpoints() {
        let mut rng = sampling::rng(36);
        let f = random_field(&mut rng, Domain::torus_default(4, 4).unwrap(), 1.0);
        let q1 = [0usize, 5];
        let q2 = [10usize, 3];
        let same = swap_mix(&q1, &q2, 0.0, &f).unwrap();
        assert_eq!(same.flat(), f.flat());
        let swapped = swap_mix(&q1, &q2, 1.0, &f).unwrap();
        assert!(rearrange::equimeasurable(&f, &swapped, 1e-12).unwrap());
        assert_eq!(swapped.flat()[0], f.flat()[10]);
    }

    #[test]
    fn swap_mix_validates_sets() {
        let f = VorticityField::zeros(Domain::torus_default(4, 4).unwrap());
        assert!(swap_mix(&[0, 1], &[1, 2], 0.5, &f).is_err());
        assert!(swap_mix(&[0], &[1, 2], 0.5, &f).is_err());
        assert!(swap_mix(&[0], &[99], 0.5, &f).is_err());
        assert!(swap_mix(&[0], &[1], 1.5, &f).is_err());
    }

    /// Flat-profile shear with the vorticity band on the bottom wall:
    /// the gauged streamfunction is exactly constant on the flat piece
    /// and strictly smaller inside the band, so every proper swap of a
    /// flat square against a band square raises the energy.
    #[test]
    fn flat_profile_shear_swaps_raise_energy() {
        let n = 64;
        let domain = Domain::channel_default(n, n).unwrap();
        let shear =
            VorticityField::from_fn(domain, |_, x2| if x2 < 0.5 { -1.0 } else { 0.0 }).unwrap();

        let mut rng = sampling::rng(37);
        for _ in 0..20 {
            let side = rng.gen_range(2..=4usize);
            // Rows strictly inside each region, one cell of margin from
            // the interface and walls.
            let band_row = rng.gen_range(1..n / 2 - side);
            let flat_row = rng.gen_range(n / 2 + 1..n - side);
            let band_col = rng.gen_range(0..n - side);
            let flat_col = rng.gen_range(0..n - side);
            let mut q_band = Vec::new();
            let mut q_flat = Vec::new();
            for dr in 0..side {
                for dc in 0..side {
                    q_band.push((band_row + dr) * n + band_col + dc);
                    q_flat.push((flat_row + dr) * n + flat_col + dc);
                }
            }
            let d = swap_energy_first_variation(&q_flat, &q_band, &shear).unwrap();
            assert!(d > 0.0, "swap lowered energy: dE/deps = {d}");

            // The quadrature is the true derivative: compare against a
            // finite difference of the full energy.
            let eps = 1e-4;
            let mixed = swap_mix(&q_flat, &q_band, eps, &shear).unwrap();
            let e0 = greens::solve_stream(&shear).unwrap().energy();
            let e1 = greens::solve_stream(&mixed).unwrap().energy();
            let fd = (e1 - e0) / eps;
            assert!(
                (fd - d).abs() <= 0.05 * d.abs().max(1e-12),
                "finite difference {fd} vs first variation {d}"
            );
        }
    }

    #[test]
    fn jensen_monotonicity_over_random_triples() {
        let mut rng = sampling::rng(38);
        let families = [
            ConvexFunctionSpec::Quadratic,
            ConvexFunctionSpec::PowerP(4.0),
            ConvexFunctionSpec::PowerP(1.5),
            ConvexFunctionSpec::Exp,
        ];
        let domain = Domain::disk_radial(1.0, 12).unwrap();
        for trial in 0..200 {
            let f = random_field(&mut rng, domain.clone(), 2.0);
            let k = BistochasticMatrix::random(&mut rng, 12).unwrap();
            let g = k.apply(&f).unwrap();
            let spec = &families[trial % families.len()];
            let before = rearrange::casimir(&f, spec).unwrap();
            let after = rearrange::casimir(&g, spec).unwrap();
            assert!(
                after <= before + 1e-12,
                "Jensen violated: {after} > {before}"
            );
        }
    }

    #[test]
    fn casimir_equality_tracks_equimeasurability() {
        let mut rng = sampling::rng(39);
        let domain = Domain::torus_default(4, 4).unwrap();
        let f = random_field(&mut rng, domain, 1.5);

        let perm: Vec<usize> = {
            let mut p: Vec<usize> = (0..16).collect();
            for i in (1..16).rev() {
                let j = rng.gen_range(0..=i);
                p.swap(i, j);
            }
            p
        };
        let kp = BistochasticMatrix::from_permutation(&perm).unwrap();
        let g = kp.apply(&f).unwrap();
        assert!(rearrange::equimeasurable(&f, &g, 1e-12).unwrap());
        for spec in [ConvexFunctionSpec::Quadratic, ConvexFunctionSpec::Exp] {
            let a = rearrange::casimir(&f, &spec).unwrap();
            let b = rearrange::casimir(&g, &spec).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
        }

        let km = BistochasticMatrix::random(&mut rng, 16).unwrap();
        let h = km.apply(&f).unwrap();
        assert!(!rearrange::equimeasurable(&f, &h, 1e-9).unwrap());
        for spec in [ConvexFunctionSpec::Quadratic, ConvexFunctionSpec::Exp] {
            let a = rearrange::casimir(&f, &spec).unwrap();
            let b = rearrange::casimir(&h, &spec).unwrap();
            assert!(
                b < a - 1e-9 * a.abs().max(1.0),
                "strictly convex Casimir should drop under proper mixing"
            );
        }
    }
}
