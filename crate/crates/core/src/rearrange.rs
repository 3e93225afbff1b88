//! Decreasing rearrangements and orbit-closure membership.
//!
//! The weak-* closure of the area-preserving rearrangements of a
//! piecewise-constant field is cut out by finitely many constraints: the
//! mean is fixed and every truncated integral `∫(ω−c)₊` is dominated by
//! the source field's. On equal-area cells this is exactly majorization
//! of the sorted cell values.

use crate::error::{CoreError, Result};
use crate::field::VorticityField;

/// Level structure of a field: distinct values in decreasing order and
/// the cumulative area at or above each level.
#[derive(Debug, Clone)]
pub struct RearrangementProfile {
    pub levels: Vec<f64>,
    pub cum_area: Vec<f64>,
    pub total_area: f64,
}

impl RearrangementProfile {
    /// Decreasing rearrangement evaluated at area coordinate `s`:
    /// the value on the s-th unit of area when cells are laid out in
    /// decreasing order. Clamps outside [0, total_area].
    pub fn value_at_area(&self, s: f64) -> f64 {
        match self.cum_area.iter().position(|&a| s < a) {
            Some(i) => self.levels[i],
            None => *self.levels.last().expect("profile is never empty"),
        }
    }
}

/// Outcome of an orbit-closure membership test. `worst_constraint` is the
/// level with the smallest margin in `∫(ω₀−c)₊ − ∫(ω−c)₊ ≥ 0`.
#[derive(Debug, Clone)]
pub struct ClosureMembership {
    pub member: bool,
    pub worst_constraint: (f64, f64),
    pub mean_gap: f64,
}

pub fn profile(field: &VorticityField) -> RearrangementProfile {
    let area = field.domain().cell_area();
    let mut sorted = field.flat();
    // Descending; ties keep cell order (stable sort) for determinism.
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("field values are finite"));

    let mut levels = Vec::new();
    let mut cum_area = Vec::new();
    let mut acc = 0.0;
    for v in sorted {
        acc += area;
        if levels.last() == Some(&v) {
            *cum_area.last_mut().unwrap() = acc;
        } else {
            levels.push(v);
            cum_area.push(acc);
        }
    }
    RearrangementProfile {
        levels,
        cum_area,
        total_area: acc,
    }
}

/// Scale-aware default tolerance for membership margins.
pub fn default_membership_tol(omega0: &VorticityField) -> f64 {
    1e-9 * omega0.bound().max(1.0) * omega0.domain().area()
}

/// Tests whether `omega` lies in the weak-* orbit closure of `omega0`:
/// equal means and `∫(omega−c)₊ ≤ ∫(omega0−c)₊` at every level of either
/// field. Checking the union of both fields' levels is sufficient because
/// both truncated integrals are piecewise-linear convex in c with kinks
/// only at field values.
pub fn in_orbit_closure(
    omega: &VorticityField,
    omega0: &VorticityField,
    tol: Option<f64>,
) -> Result<ClosureMembership> {
    omega.same_domain(omega0)?;
    let tol = tol.unwrap_or_else(|| default_membership_tol(omega0));
    let area = omega.domain().cell_area();

    let mean_gap = (omega.integral() - omega0.integral()).abs();

    let sorted_desc = |f: &VorticityField| {
        let mut v = f.flat();
        v.sort_by(|a, b| b.partial_cmp(a).expect("field values are finite"));
        v
    };
    let a = sorted_desc(omega);
    let b = sorted_desc(omega0);

    // prefix[k] = sum of the k largest values.
    let prefix = |v: &[f64]| {
        let mut p = Vec::with_capacity(v.len() + 1);
        let mut acc = 0.0;
        p.push(0.0);
        for &x in v {
            acc += x;
            p.push(acc);
        }
        p
    };
    let pa = prefix(&a);
    let pb = prefix(&b);

    // ∫(v−c)₊ = area·(prefix[k] − k·c) with k = #{values > c}.
    let truncated = |sorted: &[f64], pre: &[f64], c: f64| {
        let k = sorted.partition_point(|&x| x > c);
        area * (pre[k] - k as f64 * c)
    };

    let mut levels: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    levels.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    levels.dedup();

    let mut worst = (f64::NAN, f64::INFINITY);
    for &c in &levels {
        let margin = truncated(&b, &pb, c) - truncated(&a, &pa, c);
        if margin < worst.1 {
            worst = (c, margin);
        }
    }

    Ok(ClosureMembership {
        member: mean_gap <= tol && worst.1 >= -tol,
        worst_constraint: worst,
        mean_gap,
    })
}

/// True iff the two fields have the same distribution of values: sorted
/// cell values agree pairwise within `tol`.
pub fn equimeasurable(omega1: &VorticityField, omega2: &VorticityField, tol: f64) -> Result<bool> {
    omega1.same_domain(omega2)?;
    let mut a = omega1.flat();
    let mut b = omega2.flat();
    a.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    b.sort_by(|x, y| x.partial_cmp(y).expect("finite"));
    Ok(a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= tol))
}

/// Integrand families for Casimir functionals. Every variant except
/// `NegEntropyBoltzmann` is convex on its domain; that one is the concave
/// mirror of `Entropy`, kept because mean-field theories maximize it.
#[derive(Debug, Clone)]
pub enum ConvexFunctionSpec {
    /// x²/2 (enstrophy).
    Quadratic,
    /// |x|^p with p > 1.
    PowerP(f64),
    /// x log x on x ≥ 0, with 0 log 0 = 0.
    Entropy,
    /// −x log x on x ≥ 0.
    NegEntropyBoltzmann,
    /// e^x.
    Exp,
    /// Piecewise-linear interpolation of verified-convex samples.
    Tabulated(TabulatedConvex),
}

impl ConvexFunctionSpec {
    pub fn convex(&self) -> bool {
        !matches!(self, ConvexFunctionSpec::NegEntropyBoltzmann)
    }

    /// Strict convexity is what makes constrained minimizers unique up to
    /// the stream-function level sets; piecewise-linear tables never
    /// qualify.
    pub fn strictly_convex(&self) -> bool {
        matches!(
            self,
            ConvexFunctionSpec::Quadratic
                | ConvexFunctionSpec::PowerP(_)
                | ConvexFunctionSpec::Entropy
                | ConvexFunctionSpec::Exp
        )
    }

    /// One-sided derivative, finite everywhere the function is; the
    /// entropy slope at 0 is clamped to the slope at the smallest
    /// positive double instead of −∞.
    pub(crate) fn derivative(&self, x: f64) -> f64 {
        match self {
            ConvexFunctionSpec::Quadratic => x,
            ConvexFunctionSpec::PowerP(p) => p * x.abs().powf(p - 1.0) * x.signum(),
            ConvexFunctionSpec::Entropy => x.max(f64::MIN_POSITIVE).ln() + 1.0,
            ConvexFunctionSpec::NegEntropyBoltzmann => -(x.max(f64::MIN_POSITIVE).ln() + 1.0),
            ConvexFunctionSpec::Exp => x.exp(),
            ConvexFunctionSpec::Tabulated(t) => t.slope_at(x),
        }
    }

    /// Checks the whole range [lo, hi] up front so the per-cell
    /// evaluation afterwards cannot fail.
    pub(crate) fn validate_range(&self, lo: f64, hi: f64) -> Result<()> {
        match self {
            ConvexFunctionSpec::PowerP(p) => {
                if !(p.is_finite() && *p > 1.0) {
                    return Err(CoreError::InvalidParameter(format!(
                        "PowerP exponent must exceed 1, got {p}"
                    )));
                }
            }
            ConvexFunctionSpec::Entropy | ConvexFunctionSpec::NegEntropyBoltzmann => {
                if lo < 0.0 {
                    return Err(CoreError::FunctionDomain(format!(
                        "entropy integrand needs nonnegative values, field minimum is {lo}"
                    )));
                }
            }
            ConvexFunctionSpec::Tabulated(t) => {
                if lo < t.xs[0] || hi > *t.xs.last().unwrap() {
                    return Err(CoreError::FunctionDomain(format!(
                        "field range [{lo}, {hi}] outside table [{}, {}]",
                        t.xs[0],
                        t.xs.last().unwrap()
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub(crate) fn eval(&self, x: f64) -> f64 {
        match self {
            ConvexFunctionSpec::Quadratic => 0.5 * x * x,
            ConvexFunctionSpec::PowerP(p) => x.abs().powf(*p),
            ConvexFunctionSpec::Entropy => {
                if x == 0.0 {
                    0.0
                } else {
                    x * x.ln()
                }
            }
            ConvexFunctionSpec::NegEntropyBoltzmann => {
                if x == 0.0 {
                    0.0
                } else {
                    -x * x.ln()
                }
            }
            ConvexFunctionSpec::Exp => x.exp(),
            ConvexFunctionSpec::Tabulated(t) => t.eval(x),
        }
    }
}

/// Sample table (xs strictly increasing) whose linear interpolant is
/// convex: successive slopes are nondecreasing.
#[derive(Debug, Clone)]
pub struct TabulatedConvex {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl TabulatedConvex {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(CoreError::InvalidParameter(
                "table needs at least two matching samples".into(),
            ));
        }
        if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite("table entries".into()));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CoreError::InvalidParameter(
                "table abscissae must be strictly increasing".into(),
            ));
        }
        let slopes: Vec<f64> = xs
            .windows(2)
            .zip(ys.windows(2))
            .map(|(xw, yw)| (yw[1] - yw[0]) / (xw[1] - xw[0]))
            .collect();
        let scale = slopes.iter().fold(1.0f64, |m, s| m.max(s.abs()));
        if slopes.windows(2).any(|w| w[1] < w[0] - 1e-12 * scale) {
            return Err(CoreError::InvalidParameter(
                "table is not convex: slopes decrease".into(),
            ));
        }
        Ok(Self { xs, ys })
    }

    fn eval(&self, x: f64) -> f64 {
        let i = self
            .xs
            .partition_point(|&v| v <= x)
            .clamp(1, self.xs.len() - 1);
        let t = (x - self.xs[i - 1]) / (self.xs[i] - self.xs[i - 1]);
        self.ys[i - 1] + t * (self.ys[i] - self.ys[i - 1])
    }

    fn slope_at(&self, x: f64) -> f64 {
        let i = self
            .xs
            .partition_point(|&v| v <= x)
            .clamp(1, self.xs.len() - 1);
        (self.ys[i] - self.ys[i - 1]) / (self.xs[i] - self.xs[i - 1])
    }
}

/// Casimir functional `I_f(ω) = ∫ f(ω) dx` by exact cell quadrature.
pub fn casimir(field: &VorticityField, f: &ConvexFunctionSpec) -> Result<f64> {
    let values = field.values();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    f.validate_range(lo, hi)?;
    let area = field.domain().cell_area();
    Ok(values.iter().map(|&v| f.eval(v)).sum::<f64>() * area)
}
