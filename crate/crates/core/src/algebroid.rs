//! Lie algebroid structures in a local frame.
//!
//! The bracket is represented by the anchor together with antisymmetric
//! structure functions C^γ_{αβ}(x): on sections it expands to the structure
//! term plus anchor-directional derivatives,
//!
//! [s₁, s₂]^γ = C^γ_{αβ} s₁^α s₂^β + (ρ s₁)^i ∂_i s₂^γ − (ρ s₂)^i ∂_i s₁^γ.
//!
//! None of the Lie-algebroid axioms are assumed; each one (antisymmetry,
//! Leibniz, Jacobi, anchor homomorphism) is scored as a sampled defect, and
//! the exterior differential provides the integrated d² = 0 test.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array3};
use thiserror::Error;

use crate::bundle::{anchor_apply, AnchoredBundle, BundleError, ChartId, Section};
use crate::defect::Defect;
use crate::forms::{increasing_indices, Form, FormError};
use crate::linalg::inf_norm;
use crate::numerics::{directional_derivative, NumericsError, SmoothMap};
use crate::scalar::{real, Scalar};

type StructureFn<T> = dyn Fn(&Array1<T>) -> Array3<T> + Send + Sync;

/// Point-dependent structure functions C^γ_{αβ}(x), stored as a k×k×k array
/// indexed [γ, α, β]. Antisymmetry in (α, β) is enforced at construction by
/// antisymmetrizing whatever the raw closure returns.
#[derive(Clone)]
pub struct StructureMap<T: Scalar> {
    fibre_dim: usize,
    f: Arc<StructureFn<T>>,
}

impl<T: Scalar> fmt::Debug for StructureMap<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StructureMap(k={})", self.fibre_dim)
    }
}

impl<T: Scalar> StructureMap<T> {
    pub fn new<F>(fibre_dim: usize, raw: F) -> Self
    where
        F: Fn(&Array1<T>) -> Array3<T> + Send + Sync + 'static,
    {
        let half = real::<T>(0.5);
        let f = move |x: &Array1<T>| {
            let c = raw(x);
            assert_eq!(
                c.shape(),
                [fibre_dim, fibre_dim, fibre_dim],
                "structure functions must be k x k x k"
            );
            Array3::from_shape_fn([fibre_dim, fibre_dim, fibre_dim], |(g, a, b)| {
                (c[[g, a, b]] - c[[g, b, a]]) * half
            })
        };
        StructureMap { fibre_dim, f: Arc::new(f) }
    }

    /// Constant structure functions from a fixed table.
    pub fn from_table(table: Array3<T>) -> Self {
        let k = table.shape()[0];
        StructureMap::new(k, move |_| table.clone())
    }

    pub fn zero(fibre_dim: usize) -> Self {
        StructureMap::new(fibre_dim, move |_| Array3::zeros([fibre_dim, fibre_dim, fibre_dim]))
    }

    pub fn fibre_dim(&self) -> usize {
        self.fibre_dim
    }

    pub fn eval(&self, x: &Array1<T>) -> Array3<T> {
        (self.f)(x)
    }
}

/// A candidate Lie algebroid: an anchored bundle plus per-chart structure
/// functions. Charts without explicit structure carry C ≡ 0.
#[derive(Debug, Clone)]
pub struct Algebroid<T: Scalar> {
    bundle: AnchoredBundle<T>,
    structure: BTreeMap<ChartId, StructureMap<T>>,
}

impl<T: Scalar> Algebroid<T> {
    pub fn new(bundle: AnchoredBundle<T>) -> Self {
        Algebroid { bundle, structure: BTreeMap::new() }
    }

    pub fn with_structure(
        mut self,
        chart: impl Into<ChartId>,
        map: StructureMap<T>,
    ) -> Result<Self, AlgebroidError> {
        let chart = chart.into();
        if !self.bundle.charts().contains(&chart) {
            return Err(AlgebroidError::Bundle(BundleError::UnknownChart(chart.to_string())));
        }
        if map.fibre_dim() != self.bundle.fibre_dim() {
            return Err(AlgebroidError::StructureShape {
                expected: self.bundle.fibre_dim(),
                found: map.fibre_dim(),
            });
        }
        self.structure.insert(chart, map);
        Ok(self)
    }

    pub fn bundle(&self) -> &AnchoredBundle<T> {
        &self.bundle
    }

    pub fn structure(&self, chart: &ChartId) -> StructureMap<T> {
        self.structure
            .get(chart)
            .cloned()
            .unwrap_or_else(|| StructureMap::zero(self.bundle.fibre_dim()))
    }

    /// Frame section e_alpha on every chart of the bundle.
    pub fn frame_section(&self, alpha: usize) -> Section<T> {
        Section::frame(
            self.bundle.base_dim(),
            self.bundle.fibre_dim(),
            alpha,
            self.bundle.charts(),
        )
    }

    /// Dual-frame covector θ^alpha on every chart of the bundle.
    pub fn dual_frame_form(&self, alpha: usize) -> Form<T> {
        let charts: Vec<ChartId> = self.bundle.charts().to_vec();
        Form::dual_frame(self.bundle.base_dim(), self.bundle.fibre_dim(), alpha, &charts)
    }
}

/// The algebroid bracket of two sections, as a new section on every chart
/// where both arguments (and the bundle) are defined.
pub fn bracket<T: Scalar>(
    a: &Algebroid<T>,
    s1: &Section<T>,
    s2: &Section<T>,
) -> Result<Section<T>, AlgebroidError> {
    let m = a.bundle.base_dim();
    let k = a.bundle.fibre_dim();
    let mut out = Section::new(m, k);
    let mut any = false;
    for chart in a.bundle.charts() {
        let (Ok(r1), Ok(r2)) = (s1.rep(chart), s2.rep(chart)) else { continue };
        let r1 = r1.clone();
        let r2 = r2.clone();
        let anchor = a.bundle.anchor(chart)?.clone();
        let structure = a.structure(chart);
        let map = SmoothMap::new(m, k, move |x: &Array1<T>| {
            let v1 = r1.eval(x);
            let v2 = r2.eval(x);
            let rho = anchor.eval(x).expect("anchor shape validated at construction");
            let c = structure.eval(x);
            let mut result: Array1<T> = Array1::zeros(k);
            for g in 0..k {
                let mut acc = T::zero();
                for al in 0..k {
                    for be in 0..k {
                        acc = acc + c[[g, al, be]] * v1[al] * v2[be];
                    }
                }
                result[g] = acc;
            }
            // derivative terms: J_{s2}(x)·(ρ s1)(x) − J_{s1}(x)·(ρ s2)(x)
            let dir1 = rho.dot(&v1);
            let dir2 = rho.dot(&v2);
            let d2 = directional_derivative(&r2, x, &dir1)
                .expect("section evaluation failed inside bracket");
            let d1 = directional_derivative(&r1, x, &dir2)
                .expect("section evaluation failed inside bracket");
            result + d2 - d1
        });
        out = out.with_rep(chart.clone(), map)?;
        any = true;
    }
    if !any {
        return Err(AlgebroidError::ChartMismatch {
            detail: "sections share no chart of the algebroid".into(),
        });
    }
    Ok(out)
}

/// Leibniz defect at the given samples:
/// ‖[s₁, f·s₂] − f·[s₁, s₂] − (ρ(s₁)f)·s₂‖∞.
pub fn leibniz_defect<T: Scalar>(
    a: &Algebroid<T>,
    chart: &ChartId,
    s1: &Section<T>,
    s2: &Section<T>,
    f: &SmoothMap<T>,
    samples: &[Array1<T>],
) -> Result<Defect<T>, AlgebroidError> {
    let lhs = bracket(a, s1, &s2.scaled_by(f)?)?;
    let plain = bracket(a, s1, s2)?;
    let mut defect = Defect::zero();
    for x in samples {
        let rho_s1 = a.bundle.anchor_at(chart, x)?.dot(&s1.eval(chart, x)?);
        let df = directional_derivative(f, x, &rho_s1)?[0];
        let fx = f.eval(x)[0];
        let expected =
            plain.eval(chart, x)?.mapv(|v| v * fx) + s2.eval(chart, x)?.mapv(|v| v * df);
        let residual = &lhs.eval(chart, x)? - &expected;
        defect.observe(inf_norm(residual.view()), x);
    }
    Ok(defect)
}

/// Jacobi defect at the given samples:
/// ‖[[s₁,s₂],s₃] + [[s₂,s₃],s₁] + [[s₃,s₁],s₂]‖∞.
pub fn jacobi_defect<T: Scalar>(
    a: &Algebroid<T>,
    chart: &ChartId,
    s1: &Section<T>,
    s2: &Section<T>,
    s3: &Section<T>,
    samples: &[Array1<T>],
) -> Result<Defect<T>, AlgebroidError> {
    let t1 = bracket(a, &bracket(a, s1, s2)?, s3)?;
    let t2 = bracket(a, &bracket(a, s2, s3)?, s1)?;
    let t3 = bracket(a, &bracket(a, s3, s1)?, s2)?;
    let mut defect = Defect::zero();
    for x in samples {
        let total = &(&t1.eval(chart, x)? + &t2.eval(chart, x)?) + &t3.eval(chart, x)?;
        defect.observe(inf_norm(total.view()), x);
    }
    Ok(defect)
}

/// Anchor homomorphism defect at the given samples:
/// ‖ρ([s₁,s₂]) − [ρ(s₁), ρ(s₂)]‖∞, the right bracket being the Jacobi–Lie
/// bracket of vector fields. Requires a positive-dimensional base.
pub fn anchor_hom_defect<T: Scalar>(
    a: &Algebroid<T>,
    chart: &ChartId,
    s1: &Section<T>,
    s2: &Section<T>,
    samples: &[Array1<T>],
) -> Result<Defect<T>, AlgebroidError> {
    if a.bundle.base_dim() == 0 {
        return Err(AlgebroidError::PointBase);
    }
    let br = bracket(a, s1, s2)?;
    let lhs_field = anchor_apply(&a.bundle, &br)?;
    let x_field = anchor_apply(&a.bundle, s1)?;
    let y_field = anchor_apply(&a.bundle, s2)?;
    let xf = x_field.rep(chart)?;
    let yf = y_field.rep(chart)?;
    let mut defect = Defect::zero();
    for x in samples {
        let lhs = lhs_field.eval(chart, x)?;
        let jl = directional_derivative(yf, x, &xf.eval(x))?
            - directional_derivative(xf, x, &yf.eval(x))?;
        defect.observe(inf_norm((&lhs - &jl).view()), x);
    }
    Ok(defect)
}

/// (d_E ω)(s₀, …, s_q) at x: the Cartan formula with anchor-directional
/// derivatives in the first sum and the algebroid bracket (in first position)
/// in the second,
///
///   Σ_i (−1)^i ρ(s_i)(ω(…ŝ_i…)) + Σ_{i<j} (−1)^{i+j} ω([s_i,s_j], …ŝ_i…ŝ_j…).
pub fn exterior_derivative_eval<T: Scalar>(
    a: &Algebroid<T>,
    omega: &Form<T>,
    chart: &ChartId,
    sections: &[Section<T>],
    x: &Array1<T>,
) -> Result<T, AlgebroidError> {
    let q = omega.degree();
    if sections.len() != q + 1 {
        return Err(AlgebroidError::Arity { expected: q + 1, found: sections.len() });
    }
    if !omega.defined_on(chart) {
        return Err(AlgebroidError::Form(FormError::MissingChart { chart: chart.to_string() }));
    }
    let m = a.bundle.base_dim();
    let mut total = T::zero();

    for i in 0..=q {
        let sign = if i % 2 == 0 { T::one() } else { -T::one() };
        let others: Vec<SmoothMap<T>> = sections
            .iter()
            .enumerate()
            .filter(|(l, _)| *l != i)
            .map(|(_, s)| s.rep(chart).cloned().map_err(AlgebroidError::from))
            .collect::<Result<_, _>>()?;
        let omega_local = omega.clone();
        let chart_local = chart.clone();
        let g = SmoothMap::new(m, 1, move |y: &Array1<T>| {
            let vectors: Vec<Array1<T>> = others.iter().map(|s| s.eval(y)).collect();
            let value = omega_local
                .eval_on_vectors(&chart_local, y, &vectors)
                .expect("form evaluation failed inside Cartan formula");
            Array1::from(vec![value])
        });
        let dir = a.bundle.anchor_at(chart, x)?.dot(&sections[i].eval(chart, x)?);
        total = total + sign * directional_derivative(&g, x, &dir)?[0];
    }

    for i in 0..=q {
        for j in i + 1..=q {
            let sign = if (i + j) % 2 == 0 { T::one() } else { -T::one() };
            let br = bracket(a, &sections[i], &sections[j])?;
            let mut vectors = vec![br.eval(chart, x)?];
            for (l, s) in sections.iter().enumerate() {
                if l != i && l != j {
                    vectors.push(s.eval(chart, x)?);
                }
            }
            total = total + sign * omega.eval_on_vectors(chart, x, &vectors)?;
        }
    }
    Ok(total)
}

/// d_E ω as a form of degree q+1: components are the Cartan formula evaluated
/// on frame sections at each strictly increasing multi-index.
///
/// At top degree (q = k) the result has no multi-indices and is the zero form
/// of degree k+1: there are no antisymmetric (k+1)-forms to overflow into.
pub fn exterior_derivative_components<T: Scalar>(
    a: &Algebroid<T>,
    omega: &Form<T>,
) -> Result<Form<T>, AlgebroidError> {
    let m = a.bundle.base_dim();
    let k = a.bundle.fibre_dim();
    let q = omega.degree();
    let charts: Vec<ChartId> = a
        .bundle
        .charts()
        .iter()
        .filter(|c| omega.defined_on(c))
        .cloned()
        .collect();
    if charts.is_empty() {
        return Err(AlgebroidError::ChartMismatch {
            detail: "form is not defined on any chart of the algebroid".into(),
        });
    }
    let mut out = Form::new(q + 1, m, k);
    for chart in charts {
        let indices = increasing_indices(k, q + 1);
        let frames: Vec<Vec<Section<T>>> = indices
            .iter()
            .map(|idx| {
                idx.iter()
                    .map(|&alpha| Section::frame(m, k, alpha, std::slice::from_ref(&chart)))
                    .collect()
            })
            .collect();
        let a_local = a.clone();
        let omega_local = omega.clone();
        let chart_local = chart.clone();
        out = out.with_components(chart.clone(), move |x: &Array1<T>| {
            frames
                .iter()
                .map(|sections| {
                    exterior_derivative_eval(&a_local, &omega_local, &chart_local, sections, x)
                        .expect("frame-section Cartan evaluation failed")
                })
                .collect()
        });
    }
    Ok(out)
}

/// Max over samples and stored multi-indices of |components of d(dω)|.
/// Requires q + 2 ≤ k so the double differential has somewhere to live.
pub fn d_squared_defect<T: Scalar>(
    a: &Algebroid<T>,
    chart: &ChartId,
    omega: &Form<T>,
    samples: &[Array1<T>],
) -> Result<Defect<T>, AlgebroidError> {
    let ddomega = exterior_derivative_components(a, &exterior_derivative_components(a, omega)?)?;
    let mut defect = Defect::zero();
    for x in samples {
        let comps = ddomega.components(chart, x)?;
        let worst = comps.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
        defect.observe(worst, x);
    }
    Ok(defect)
}

#[derive(Debug, Clone, Error)]
pub enum AlgebroidError {
    #[error("structure functions are {found}-dimensional, bundle fibre is {expected}")]
    StructureShape { expected: usize, found: usize },
    #[error("chart mismatch: {detail}")]
    ChartMismatch { detail: String },
    #[error("expected {expected} sections, found {found}")]
    Arity { expected: usize, found: usize },
    #[error("check requires a positive-dimensional base")]
    PointBase,
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}
