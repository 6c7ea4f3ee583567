//! Semisprays and sprays on an anchored bundle.
//!
//! A semispray is stored through its per-chart coefficients G_φ(x, u); the
//! associated second-order field on the total space is
//! (x, u) ↦ (ρ_U(x) u, −2 G_φ(x, u)), so the defining condition — the base
//! velocity equals the anchor image of the fibre coordinate — holds by
//! construction. What remains to verify numerically: admissibility of integral
//! curves, the overlap transformation law of the coefficients, homogeneity
//! (spray-ness) and its Euler-identity equivalent, and recovery of an anchor
//! from a homogeneous field.

use std::collections::BTreeMap;
use std::io::Write;

use ndarray::{concatenate, Array1, Array2, Axis};
use thiserror::Error;

use crate::bundle::{AnchoredBundle, BundleError, ChartId, MatrixMap, TransitionMap};
use crate::defect::Defect;
use crate::linalg::{basis_vector, inf_norm, two_norm};
use crate::numerics::{directional_derivative, rk4_integrate, NumericsError, SmoothMap, Trajectory};
use crate::scalar::{real, Scalar};

/// Fibre radius below which homogeneity sampling is not meaningful: the zero
/// section is deleted, and differentiability is only assumed away from it.
pub fn zero_section_radius<T: Scalar>() -> T {
    real(0.1)
}

/// Default homothety factors: one contraction, two dilations.
pub fn default_lambdas<T: Scalar>() -> Vec<T> {
    vec![real(0.5), real(2.0), real(3.0)]
}

/// A semispray in local representation: the bundle plus per-chart coefficient
/// maps G_φ : (x, u) ↦ G_φ(x, u) with x of length m and u of length k.
#[derive(Debug, Clone)]
pub struct Semispray<T: Scalar> {
    bundle: AnchoredBundle<T>,
    coefficients: BTreeMap<ChartId, SmoothMap<T>>,
}

/// A curve on the total space sampled on a time grid: states are (x(t), w(t))
/// of length m + k.
#[derive(Debug, Clone)]
pub struct BundleCurve<T: Scalar> {
    pub base_dim: usize,
    pub fibre_dim: usize,
    pub trajectory: Trajectory<T>,
}

impl<T: Scalar> BundleCurve<T> {
    pub fn base_part(&self, i: usize) -> Array1<T> {
        self.trajectory.states[i].slice(ndarray::s![..self.base_dim]).to_owned()
    }

    pub fn fibre_part(&self, i: usize) -> Array1<T> {
        self.trajectory.states[i].slice(ndarray::s![self.base_dim..]).to_owned()
    }

    /// CSV export: header `t,x1..xm,u1..uk`, one row per grid point, every
    /// value with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header = String::from("t");
        for i in 1..=self.base_dim {
            header.push_str(&format!(",x{i}"));
        }
        for i in 1..=self.fibre_dim {
            header.push_str(&format!(",u{i}"));
        }
        writeln!(out, "{header}")?;
        for (t, state) in self.trajectory.times.iter().zip(&self.trajectory.states) {
            let mut row = format!("{t:.16e}");
            for v in state.iter() {
                row.push_str(&format!(",{v:.16e}"));
            }
            writeln!(out, "{row}")?;
        }
        Ok(())
    }
}

impl<T: Scalar> Semispray<T> {
    /// Builds a semispray from per-chart coefficients. Each coefficient map
    /// must take m + k inputs to k outputs.
    pub fn new(
        bundle: AnchoredBundle<T>,
        coefficients: BTreeMap<ChartId, SmoothMap<T>>,
    ) -> Result<Self, SemisprayError> {
        let (m, k) = (bundle.base_dim(), bundle.fibre_dim());
        for (chart, g) in &coefficients {
            if !bundle.charts().contains(chart) {
                return Err(SemisprayError::Bundle(BundleError::UnknownChart(chart.to_string())));
            }
            if g.dom_dim() != m + k || g.cod_dim() != k {
                return Err(SemisprayError::CoefficientShape {
                    chart: chart.to_string(),
                    expected: (m + k, k),
                    found: (g.dom_dim(), g.cod_dim()),
                });
            }
        }
        Ok(Semispray { bundle, coefficients })
    }

    pub fn bundle(&self) -> &AnchoredBundle<T> {
        &self.bundle
    }

    pub fn charts(&self) -> impl Iterator<Item = &ChartId> {
        self.coefficients.keys()
    }

    pub fn coefficient(&self, chart: &ChartId) -> Result<&SmoothMap<T>, SemisprayError> {
        self.coefficients.get(chart).ok_or_else(|| SemisprayError::MissingCoefficient {
            chart: chart.to_string(),
        })
    }

    /// The induced base velocity as a function of (x, u): exactly ρ_U(x) u.
    pub fn base_velocity(
        &self,
        chart: &ChartId,
        x: &Array1<T>,
        u: &Array1<T>,
    ) -> Result<Array1<T>, SemisprayError> {
        Ok(self.bundle.anchor_at(chart, x)?.dot(u))
    }

    /// The full second-order field on chart coordinates:
    /// (x, u) ↦ (ρ_U(x) u, −2 G_φ(x, u)).
    pub fn field(&self, chart: &ChartId) -> Result<SmoothMap<T>, SemisprayError> {
        let (m, k) = (self.bundle.base_dim(), self.bundle.fibre_dim());
        let anchor = self.bundle.anchor(chart)?.clone();
        let g = self.coefficient(chart)?.clone();
        let neg_two = -real::<T>(2.0);
        Ok(SmoothMap::new(m + k, m + k, move |z: &Array1<T>| {
            let x = z.slice(ndarray::s![..m]).to_owned();
            let u = z.slice(ndarray::s![m..]).to_owned();
            let xdot = anchor.eval(&x).expect("anchor shape validated at construction").dot(&u);
            let udot = g.eval(z).mapv(|v| v * neg_two);
            concatenate![Axis(0), xdot, udot]
        }))
    }

    /// Integrates the semispray field from z0 = (x0, u0) with fixed-step RK4.
    pub fn integrate(
        &self,
        chart: &ChartId,
        z0: &Array1<T>,
        t_span: (T, T),
        steps: usize,
    ) -> Result<BundleCurve<T>, SemisprayError> {
        let (m, k) = (self.bundle.base_dim(), self.bundle.fibre_dim());
        if z0.len() != m + k {
            return Err(SemisprayError::StateLength { expected: m + k, found: z0.len() });
        }
        let field = self.field(chart)?;
        let trajectory = rk4_integrate(&field, z0, t_span, steps)?;
        Ok(BundleCurve { base_dim: m, fibre_dim: k, trajectory })
    }

    /// Homogeneity defect of the coefficients (the local form of the spray
    /// condition): max over samples (x, u) and factors λ of
    /// ‖G_φ(x, λu) − λ² G_φ(x, u)‖∞. Factors must be positive.
    pub fn spray_defect(
        &self,
        chart: &ChartId,
        lambdas: &[T],
        samples: &[(Array1<T>, Array1<T>)],
    ) -> Result<Defect<T>, SemisprayError> {
        let g = self.coefficient(chart)?;
        coefficient_homogeneity_defect(g, self.bundle.base_dim(), lambdas, samples)
    }

    /// Both sides of the field-level homothety law S∘h_λ = λ(h_λ)_*∘S,
    /// compared componentwise on the velocity slots.
    pub fn field_homothety_defect(
        &self,
        chart: &ChartId,
        lambdas: &[T],
        samples: &[(Array1<T>, Array1<T>)],
    ) -> Result<Defect<T>, SemisprayError> {
        let m = self.bundle.base_dim();
        let field = self.field(chart)?;
        let mut defect = Defect::zero();
        for lambda in lambdas {
            if *lambda <= T::zero() {
                return Err(SemisprayError::NonPositiveLambda);
            }
            let lambda_sq = *lambda * *lambda;
            for (x, u) in samples {
                let z = concatenate![Axis(0), x.clone(), u.clone()];
                let scaled = concatenate![Axis(0), x.clone(), u.mapv(|v| v * *lambda)];
                let lhs = field.eval(&scaled);
                let base = field.eval(&z);
                let mut worst = T::zero();
                for i in 0..lhs.len() {
                    let rhs = if i < m { base[i] * *lambda } else { base[i] * lambda_sq };
                    worst = worst.max((lhs[i] - rhs).abs());
                }
                defect.observe(worst, &z);
            }
        }
        Ok(defect)
    }

    /// Coefficient transformation defect across one transition:
    /// max over overlap samples x and fibre samples u of
    /// ‖G_ψ(h(x), M(x)u) − M(x) G_φ(x, u) + ½ dM(x)[ρ_U(x)u] u‖∞.
    ///
    /// The anchor part of the same overlap law is `anchor_compat_defect`.
    pub fn transformation_defect(
        &self,
        t: &TransitionMap<T>,
        fibre_samples: Option<&[Array1<T>]>,
    ) -> Result<Defect<T>, SemisprayError> {
        if t.overlap_samples.is_empty() {
            return Err(SemisprayError::Bundle(BundleError::NoOverlapSamples {
                transition: format!("{}->{}", t.from, t.to),
            }));
        }
        let g_from = self.coefficient(&t.from)?;
        let g_to = self.coefficient(&t.to)?;
        let k = self.bundle.fibre_dim();
        let default = default_fibre_stencil(k);
        let fibre_samples = fibre_samples.unwrap_or(&default);
        let half = real::<T>(0.5);
        let mut defect = Defect::zero();
        for x in &t.overlap_samples {
            let y = t.base_map.eval(x);
            let mat = t.fibre_map.eval(x)?;
            let rho = self.bundle.anchor_at(&t.from, x)?;
            for u in fibre_samples {
                let lhs = g_to.eval(&concatenate![Axis(0), y.clone(), mat.dot(u)]);
                let transported = mat.dot(&g_from.eval(&concatenate![Axis(0), x.clone(), u.clone()]));
                let dm = t.fibre_map.directional_derivative(x, &rho.dot(u))?;
                let correction = dm.dot(u).mapv(|v| v * half);
                let residual = &lhs - &transported + &correction;
                defect.observe(
                    inf_norm(residual.view()),
                    &concatenate![Axis(0), x.clone(), u.clone()],
                );
            }
        }
        Ok(defect)
    }
}

/// Homogeneity defect for a raw coefficient map (dom m + k, cod k).
fn coefficient_homogeneity_defect<T: Scalar>(
    g: &SmoothMap<T>,
    base_dim: usize,
    lambdas: &[T],
    samples: &[(Array1<T>, Array1<T>)],
) -> Result<Defect<T>, SemisprayError> {
    let _ = base_dim;
    let mut defect = Defect::zero();
    for lambda in lambdas {
        if *lambda <= T::zero() {
            return Err(SemisprayError::NonPositiveLambda);
        }
        let lambda_sq = *lambda * *lambda;
        for (x, u) in samples {
            let scaled = g.eval(&concatenate![Axis(0), x.clone(), u.mapv(|v| v * *lambda)]);
            let plain = g.eval(&concatenate![Axis(0), x.clone(), u.clone()]);
            let residual = &scaled - &plain.mapv(|v| v * lambda_sq);
            defect.observe(
                inf_norm(residual.view()),
                &concatenate![Axis(0), x.clone(), u.clone()],
            );
        }
    }
    Ok(defect)
}

/// Admissibility defect of a sampled curve: max over interior grid times of
/// ‖ẋ(t) − ρ_U(x(t)) w(t)‖∞, with ẋ by central differences on the curve's own
/// grid. Needs at least 3 samples.
pub fn admissibility_defect<T: Scalar>(
    bundle: &AnchoredBundle<T>,
    chart: &ChartId,
    curve: &BundleCurve<T>,
) -> Result<Defect<T>, SemisprayError> {
    let n = curve.trajectory.len();
    if n < 3 {
        return Err(SemisprayError::CurveTooShort { found: n });
    }
    let mut defect = Defect::zero();
    for i in 1..n - 1 {
        let dt = curve.trajectory.times[i + 1] - curve.trajectory.times[i - 1];
        let xdot = (&curve.base_part(i + 1) - &curve.base_part(i - 1)).mapv(|v| v / dt);
        let x = curve.base_part(i);
        let w = curve.fibre_part(i);
        let rhs = bundle.anchor_at(chart, &x)?.dot(&w);
        defect.observe(inf_norm((&xdot - &rhs).view()), &curve.trajectory.states[i]);
    }
    Ok(defect)
}

/// Result of the Euler homogeneity check on a fibre-frozen coefficient map.
#[derive(Debug, Clone)]
pub struct EulerReport<T: Scalar> {
    /// max over samples of ‖dG_v(v) − r·G(v)‖∞.
    pub residual: Defect<T>,
    /// Median of log(‖G(λv)‖/‖G(v)‖)/log λ over samples and λ ∈ {2, 4},
    /// restricted to samples with ‖G(v)‖ > 1e-9. None when every sample is
    /// degenerate, in which case the degree is undefined.
    pub estimated_degree: Option<T>,
}

/// Euler check for positive homogeneity of degree r: dG_v(v) = r·G(v) away
/// from the origin, plus a direct scaling-based degree estimate.
pub fn euler_check<T: Scalar>(
    g: &SmoothMap<T>,
    degree: T,
    samples: &[Array1<T>],
) -> Result<EulerReport<T>, SemisprayError> {
    let mut residual = Defect::zero();
    let mut log_ratios: Vec<T> = Vec::new();
    let floor = real::<T>(1e-9);
    for v in samples {
        let gv = g.eval(v);
        let dgv = directional_derivative(g, v, v)?;
        residual.observe(inf_norm((&dgv - &gv.mapv(|c| c * degree)).view()), v);
        let norm_gv = two_norm(gv.view());
        if norm_gv > floor {
            for lambda in [real::<T>(2.0), real::<T>(4.0)] {
                let scaled = g.eval(&v.mapv(|c| c * lambda));
                let ratio = two_norm(scaled.view()) / norm_gv;
                log_ratios.push(ratio.ln() / lambda.ln());
            }
        }
    }
    if log_ratios.is_empty() {
        return Ok(EulerReport { residual, estimated_degree: None });
    }
    log_ratios.sort_by(|a, b| a.partial_cmp(b).expect("finite log ratios"));
    let n = log_ratios.len();
    let median = if n % 2 == 1 {
        log_ratios[n / 2]
    } else {
        (log_ratios[n / 2 - 1] + log_ratios[n / 2]) / real::<T>(2.0)
    };
    Ok(EulerReport { residual, estimated_degree: Some(median) })
}

/// Outcome of reading an anchor off a homothety-invariant field.
#[derive(Debug, Clone)]
pub struct AnchorRecovery<T: Scalar> {
    /// Single-chart bundle whose anchor columns are S01(x, e_j).
    pub bundle: AnchoredBundle<T>,
    /// max over probes v of ‖S01(x, v) − ρ_U(x) v‖∞: how linear the base slot
    /// really is. Degree-1 homogeneity alone does not force linearity.
    pub linearity_defect: Defect<T>,
    /// Homogeneity defect of the recovered coefficients G = −S02/2.
    pub spray_defect: Defect<T>,
}

/// Reads an anchored-bundle structure off a field (x, v) ↦ (S01, S02) that
/// commutes with homotheties.
///
/// The homothety relation is checked first (S01 degree 1, S02 degree 2); if it
/// fails beyond `tol` no anchor is claimed and the defect is returned in the
/// error. Otherwise the anchor is assembled column-by-column as S01(x, e_j)
/// and its linearity scored against the probe directions.
#[allow(clippy::too_many_arguments)]
pub fn recover_anchor<T: Scalar>(
    s01: &SmoothMap<T>,
    s02: &SmoothMap<T>,
    base_dim: usize,
    domain: Vec<(T, T)>,
    lambdas: &[T],
    base_samples: &[Array1<T>],
    fibre_samples: &[Array1<T>],
    tol: T,
) -> Result<AnchorRecovery<T>, SemisprayError> {
    let fibre_dim = s02.cod_dim();
    if s01.dom_dim() != base_dim + fibre_dim
        || s01.cod_dim() != base_dim
        || s02.dom_dim() != base_dim + fibre_dim
    {
        return Err(SemisprayError::CoefficientShape {
            chart: "U".into(),
            expected: (base_dim + fibre_dim, base_dim),
            found: (s01.dom_dim(), s01.cod_dim()),
        });
    }

    // Homothety precheck: S01(x, λv) = λ S01(x, v), S02(x, λv) = λ² S02(x, v).
    let mut homothety = Defect::zero();
    for lambda in lambdas {
        if *lambda <= T::zero() {
            return Err(SemisprayError::NonPositiveLambda);
        }
        let lambda_sq = *lambda * *lambda;
        for x in base_samples {
            for v in fibre_samples {
                let z = concatenate![Axis(0), x.clone(), v.clone()];
                let scaled = concatenate![Axis(0), x.clone(), v.mapv(|c| c * *lambda)];
                let d1 = &s01.eval(&scaled) - &s01.eval(&z).mapv(|c| c * *lambda);
                let d2 = &s02.eval(&scaled) - &s02.eval(&z).mapv(|c| c * lambda_sq);
                homothety.observe(inf_norm(d1.view()).max(inf_norm(d2.view())), &z);
            }
        }
    }
    if homothety.value > tol {
        return Err(SemisprayError::HomothetyPrecheckFailed {
            defect: format!("{:e}", homothety.value),
        });
    }

    let s01_anchor = s01.clone();
    let anchor = MatrixMap::new(base_dim, fibre_dim, move |x: &Array1<T>| {
        let mut m = Array2::zeros((base_dim, fibre_dim));
        for j in 0..fibre_dim {
            let e = basis_vector(fibre_dim, j);
            let col = s01_anchor.eval(&concatenate![Axis(0), x.clone(), e]);
            for i in 0..base_dim {
                m[[i, j]] = col[i];
            }
        }
        m
    });

    let mut linearity = Defect::zero();
    for x in base_samples {
        let rho = anchor.eval(x)?;
        for v in fibre_samples {
            let z = concatenate![Axis(0), x.clone(), v.clone()];
            let residual = &s01.eval(&z) - &rho.dot(v);
            linearity.observe(inf_norm(residual.view()), &z);
        }
    }

    let bundle = AnchoredBundle::new(base_dim, fibre_dim).add_chart("U", domain, anchor)?;

    // G = −S02/2; its homogeneity defect is the spray report for the field.
    let s02_g = s02.clone();
    let g = SmoothMap::new(base_dim + fibre_dim, fibre_dim, move |z: &Array1<T>| {
        s02_g.eval(z).mapv(|c| c * -real::<T>(0.5))
    });
    let paired: Vec<(Array1<T>, Array1<T>)> = base_samples
        .iter()
        .flat_map(|x| fibre_samples.iter().map(move |v| (x.clone(), v.clone())))
        .collect();
    let spray = coefficient_homogeneity_defect(&g, base_dim, lambdas, &paired)?;

    Ok(AnchorRecovery { bundle, linearity_defect: linearity, spray_defect: spray })
}

/// Fixed fibre stencil used when no fibre samples are supplied: each basis
/// vector, its negative, and two diagonal vectors.
pub fn default_fibre_stencil<T: Scalar>(fibre_dim: usize) -> Vec<Array1<T>> {
    let mut out = Vec::new();
    for j in 0..fibre_dim {
        let e: Array1<T> = basis_vector(fibre_dim, j);
        out.push(e.clone());
        out.push(e.mapv(|v| -v));
    }
    out.push(Array1::from_elem(fibre_dim, T::one()));
    out.push(Array1::from_elem(fibre_dim, real::<T>(0.5)));
    out
}

#[derive(Debug, Clone, Error)]
pub enum SemisprayError {
    #[error("chart `{chart}`: coefficient map has shape {found:?}, expected {expected:?} (dom, cod)")]
    CoefficientShape { chart: String, expected: (usize, usize), found: (usize, usize) },
    #[error("no semispray coefficients on chart `{chart}`")]
    MissingCoefficient { chart: String },
    #[error("state vector has length {found}, expected {expected}")]
    StateLength { expected: usize, found: usize },
    #[error("curve has {found} samples; interior differencing needs at least 3")]
    CurveTooShort { found: usize },
    #[error("homothety factors must be positive")]
    NonPositiveLambda,
    #[error("homothety precheck failed with defect {defect}; no anchor claimed")]
    HomothetyPrecheckFailed { defect: String },
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}
