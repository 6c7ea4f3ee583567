//! Morphisms of Lie algebroids as vector bundle maps whose pullback on forms
//! intertwines the two differentials: d_source ∘ f* = f* ∘ d_target.
//!
//! The condition is multilinear and local, so it is verified on a finite probe
//! set (dual-frame forms of degree 0 and 1 plus any user-supplied forms) at
//! sampled points. Sources and targets are single-chart; there is no
//! multi-chart compatibility data for morphisms.

use ndarray::Array1;
use thiserror::Error;

use crate::algebroid::{exterior_derivative_components, Algebroid, AlgebroidError};
use crate::bundle::{BundleError, ChartId, MatrixMap};
use crate::defect::Defect;
use crate::forms::{increasing_indices, Form, FormError};
use crate::numerics::SmoothMap;
use crate::scalar::Scalar;

/// A vector bundle map between two algebroids over a base map f0, with an
/// x-dependent linear fibre map F(x) of shape k_target × k_source.
#[derive(Debug, Clone)]
pub struct Morphism<T: Scalar> {
    pub source: Algebroid<T>,
    pub target: Algebroid<T>,
    pub source_chart: ChartId,
    pub target_chart: ChartId,
    pub base_map: SmoothMap<T>,
    pub fibre_map: MatrixMap<T>,
}

impl<T: Scalar> Morphism<T> {
    pub fn new(
        source: Algebroid<T>,
        target: Algebroid<T>,
        source_chart: impl Into<ChartId>,
        target_chart: impl Into<ChartId>,
        base_map: SmoothMap<T>,
        fibre_map: MatrixMap<T>,
    ) -> Result<Self, MorphismError> {
        let source_chart = source_chart.into();
        let target_chart = target_chart.into();
        let (m, k) = (source.bundle().base_dim(), source.bundle().fibre_dim());
        let (mp, kp) = (target.bundle().base_dim(), target.bundle().fibre_dim());
        if base_map.dom_dim() != m || base_map.cod_dim() != mp {
            return Err(MorphismError::BaseMapShape {
                expected: (m, mp),
                found: (base_map.dom_dim(), base_map.cod_dim()),
            });
        }
        if fibre_map.rows() != kp || fibre_map.cols() != k {
            return Err(MorphismError::FibreMapShape {
                expected: (kp, k),
                found: (fibre_map.rows(), fibre_map.cols()),
            });
        }
        if !source.bundle().charts().contains(&source_chart) {
            return Err(MorphismError::Bundle(BundleError::UnknownChart(
                source_chart.to_string(),
            )));
        }
        if !target.bundle().charts().contains(&target_chart) {
            return Err(MorphismError::Bundle(BundleError::UnknownChart(
                target_chart.to_string(),
            )));
        }
        Ok(Morphism { source, target, source_chart, target_chart, base_map, fibre_map })
    }

    /// Identity morphism of an algebroid on one chart.
    pub fn identity(a: &Algebroid<T>, chart: impl Into<ChartId>) -> Result<Self, MorphismError> {
        let chart = chart.into();
        let m = a.bundle().base_dim();
        let k = a.bundle().fibre_dim();
        Morphism::new(
            a.clone(),
            a.clone(),
            chart.clone(),
            chart,
            SmoothMap::identity(m),
            MatrixMap::identity(k),
        )
    }
}

/// Pullback of a form on the target: (f*ω′)_x(v₁, …, v_q) =
/// ω′_{f0(x)}(F(x)v₁, …, F(x)v_q). Components contract ω′ with the columns of
/// F(x) picked by each source multi-index.
pub fn pullback_form<T: Scalar>(
    phi: &Morphism<T>,
    omega: &Form<T>,
) -> Result<Form<T>, MorphismError> {
    if omega.fibre_dim() != phi.target.bundle().fibre_dim() {
        return Err(MorphismError::FormDimension {
            expected: phi.target.bundle().fibre_dim(),
            found: omega.fibre_dim(),
        });
    }
    if !omega.defined_on(&phi.target_chart) {
        return Err(MorphismError::Form(FormError::MissingChart {
            chart: phi.target_chart.to_string(),
        }));
    }
    let q = omega.degree();
    let k_src = phi.source.bundle().fibre_dim();
    let m_src = phi.source.bundle().base_dim();
    let indices = increasing_indices(k_src, q);
    let base_map = phi.base_map.clone();
    let fibre_map = phi.fibre_map.clone();
    let omega = omega.clone();
    let target_chart = phi.target_chart.clone();
    Ok(Form::new(q, m_src, k_src).with_components(phi.source_chart.clone(), move |x| {
        let y = base_map.eval(x);
        let f = fibre_map.eval(x).expect("fibre map shape validated at construction");
        indices
            .iter()
            .map(|idx| {
                let cols: Vec<Array1<T>> =
                    idx.iter().map(|&alpha| f.column(alpha).to_owned()).collect();
                omega
                    .eval_on_vectors(&target_chart, &y, &cols)
                    .expect("target form evaluation failed inside pullback")
            })
            .collect()
    }))
}

/// Intertwining defect d_source(f*ω′) − f*(d_target ω′), componentwise on the
/// source, maximized over the probe forms and samples. At least one probe form
/// is required; degree-0 and degree-1 dual-frame probes are the expected
/// minimum (see [`default_probe_forms`]).
pub fn morphism_defect<T: Scalar>(
    phi: &Morphism<T>,
    test_forms: &[Form<T>],
    samples: &[Array1<T>],
) -> Result<Defect<T>, MorphismError> {
    if test_forms.is_empty() {
        return Err(MorphismError::NoProbeForms);
    }
    let mut defect = Defect::zero();
    for omega in test_forms {
        let lhs = exterior_derivative_components(&phi.source, &pullback_form(phi, omega)?)?;
        let rhs = pullback_form(phi, &exterior_derivative_components(&phi.target, omega)?)?;
        for x in samples {
            let a = lhs.components(&phi.source_chart, x)?;
            let b = rhs.components(&phi.source_chart, x)?;
            let worst = a
                .iter()
                .zip(&b)
                .fold(T::zero(), |acc, (l, r)| acc.max((*l - *r).abs()));
            defect.observe(worst, x);
        }
    }
    Ok(defect)
}

/// Composition outer ∘ inner: base maps compose, fibre maps multiply along the
/// inner base map. Requires the inner target and outer source to agree in
/// dimensions and chart.
pub fn compose<T: Scalar>(
    outer: &Morphism<T>,
    inner: &Morphism<T>,
) -> Result<Morphism<T>, MorphismError> {
    let mid_m = inner.target.bundle().base_dim();
    let mid_k = inner.target.bundle().fibre_dim();
    if outer.source.bundle().base_dim() != mid_m
        || outer.source.bundle().fibre_dim() != mid_k
        || outer.source_chart != inner.target_chart
    {
        return Err(MorphismError::ComposeMismatch {
            inner_target: format!("({mid_m}, {mid_k}) on `{}`", inner.target_chart),
            outer_source: format!(
                "({}, {}) on `{}`",
                outer.source.bundle().base_dim(),
                outer.source.bundle().fibre_dim(),
                outer.source_chart
            ),
        });
    }
    let base_map = inner.base_map.then(&outer.base_map);
    let inner_base = inner.base_map.clone();
    let (f_outer, f_inner) = (outer.fibre_map.clone(), inner.fibre_map.clone());
    let rows = outer.fibre_map.rows();
    let cols = inner.fibre_map.cols();
    let fibre_map = MatrixMap::new(rows, cols, move |x: &Array1<T>| {
        let mid = inner_base.eval(x);
        f_outer
            .eval(&mid)
            .expect("fibre map shape validated at construction")
            .dot(&f_inner.eval(x).expect("fibre map shape validated at construction"))
    });
    Morphism::new(
        inner.source.clone(),
        outer.target.clone(),
        inner.source_chart.clone(),
        outer.target_chart.clone(),
        base_map,
        fibre_map,
    )
}

/// The standard probe set for the intertwining check: one degree-0 form per
/// target base coordinate (the constant 1 over a point base) and the full
/// degree-1 dual frame. Names are stable for reporting.
pub fn default_probe_forms<T: Scalar>(target: &Algebroid<T>) -> Vec<(String, Form<T>)> {
    let mp = target.bundle().base_dim();
    let kp = target.bundle().fibre_dim();
    let charts: Vec<ChartId> = target.bundle().charts().to_vec();
    let mut probes = Vec::new();
    if mp == 0 {
        probes.push((
            "deg0:const".to_string(),
            Form::constant(0, 0, kp, vec![T::one()], &charts),
        ));
    } else {
        for i in 0..mp {
            let coord = SmoothMap::new(mp, 1, move |y: &Array1<T>| Array1::from(vec![y[i]]));
            probes.push((format!("deg0:y{}", i + 1), Form::scalar(kp, &coord, &charts)));
        }
    }
    for alpha in 0..kp {
        probes.push((format!("theta{}", alpha + 1), target.dual_frame_form(alpha)));
    }
    probes
}

#[derive(Debug, Clone, Error)]
pub enum MorphismError {
    #[error("base map has shape {found:?}, expected {expected:?} (dom, cod)")]
    BaseMapShape { expected: (usize, usize), found: (usize, usize) },
    #[error("fibre map has shape {found:?}, expected {expected:?} (rows, cols)")]
    FibreMapShape { expected: (usize, usize), found: (usize, usize) },
    #[error("form lives on a fibre of dimension {found}, expected {expected}")]
    FormDimension { expected: usize, found: usize },
    #[error("cannot compose: inner target is {inner_target}, outer source is {outer_source}")]
    ComposeMismatch { inner_target: String, outer_source: String },
    #[error("no probe forms supplied; provide at least degree-0 and degree-1 probes")]
    NoProbeForms,
    #[error(transparent)]
    Algebroid(#[from] AlgebroidError),
    #[error(transparent)]
    Form(#[from] FormError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
}
