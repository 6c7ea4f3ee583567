//! Anchored vector bundles in local representation: charts, transition data,
//! sections, vector fields, and the compatibility laws that tie their local
//! representatives together on overlaps.
//!
//! Everything is chart-local and sampling-based. Overlaps are described by
//! explicit sample lists rather than predicates, and every law is scored as a
//! max-norm defect over those samples.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::defect::Defect;
use crate::linalg::{inf_norm, is_invertible, max_abs};
use crate::numerics::{NumericsError, SmoothMap};
use crate::scalar::{real, Scalar};

/// Chart label, unique within a bundle.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ChartId(pub String);

impl ChartId {
    pub fn new(name: impl Into<String>) -> Self {
        ChartId(name.into())
    }
}

impl fmt::Display for ChartId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ChartId {
    fn from(s: &str) -> Self {
        ChartId(s.to_string())
    }
}

type MatrixFn<T> = dyn Fn(&Array1<T>) -> Array2<T> + Send + Sync;

/// A point-dependent matrix with a fixed shape, e.g. an anchor ρ_U(x) or a
/// fibre transition M(x).
#[derive(Clone)]
pub struct MatrixMap<T: Scalar> {
    rows: usize,
    cols: usize,
    f: Arc<MatrixFn<T>>,
}

impl<T: Scalar> fmt::Debug for MatrixMap<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MatrixMap({}x{})", self.rows, self.cols)
    }
}

impl<T: Scalar> MatrixMap<T> {
    pub fn new<F>(rows: usize, cols: usize, f: F) -> Self
    where
        F: Fn(&Array1<T>) -> Array2<T> + Send + Sync + 'static,
    {
        MatrixMap { rows, cols, f: Arc::new(f) }
    }

    pub fn constant(m: Array2<T>) -> Self {
        let (rows, cols) = (m.nrows(), m.ncols());
        MatrixMap::new(rows, cols, move |_| m.clone())
    }

    pub fn identity(dim: usize) -> Self {
        MatrixMap::constant(Array2::eye(dim))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn eval(&self, x: &Array1<T>) -> Result<Array2<T>, BundleError> {
        let m = (self.f)(x);
        if m.nrows() != self.rows || m.ncols() != self.cols {
            return Err(BundleError::MatrixShape {
                expected: (self.rows, self.cols),
                found: (m.nrows(), m.ncols()),
            });
        }
        Ok(m)
    }

    /// Directional derivative dM(x)[y], entrywise central differences with the
    /// step scaled by 1/max(1, ‖y‖).
    pub fn directional_derivative(
        &self,
        x: &Array1<T>,
        y: &Array1<T>,
    ) -> Result<Array2<T>, BundleError> {
        let h = crate::numerics::default_step(x) / T::one().max(inf_norm(y.view()));
        let plus = self.eval(&(x + &y.mapv(|c| c * h)))?;
        let minus = self.eval(&(x - &y.mapv(|c| c * h)))?;
        Ok((plus - minus).mapv(|d| d / (h + h)))
    }
}

/// Transition data between two charts: the base change h = ψ∘φ⁻¹ and the
/// point-dependent fibre change M(x), sampled on an explicit overlap list.
#[derive(Debug, Clone)]
pub struct TransitionMap<T: Scalar> {
    pub from: ChartId,
    pub to: ChartId,
    /// Base coordinate change, m → m. May carry an analytic Jacobian.
    pub base_map: SmoothMap<T>,
    /// Fibre change M(x), k×k and invertible on the overlap.
    pub fibre_map: MatrixMap<T>,
    /// Points (in the `from` chart's coordinates) lying in the overlap image.
    pub overlap_samples: Vec<Array1<T>>,
}

impl<T: Scalar> TransitionMap<T> {
    /// Invertibility of the fibre map at every overlap sample.
    pub fn validate(&self) -> Result<(), BundleError> {
        for x in &self.overlap_samples {
            let m = self.fibre_map.eval(x)?;
            if !is_invertible(&m) {
                return Err(BundleError::SingularFibreMap {
                    transition: format!("{}->{}", self.from, self.to),
                    at: format_point(x),
                });
            }
        }
        Ok(())
    }
}

/// An anchored vector bundle over a finite-dimensional model space, presented
/// by charts, transitions, and a per-chart anchor matrix ρ_U(x) (m×k).
///
/// A zero-dimensional base (m = 0) is admitted: the anchor is an empty matrix,
/// sections are constants, and base derivatives vanish identically.
#[derive(Debug, Clone)]
pub struct AnchoredBundle<T: Scalar> {
    base_dim: usize,
    fibre_dim: usize,
    charts: Vec<ChartId>,
    transitions: Vec<TransitionMap<T>>,
    anchors: BTreeMap<ChartId, MatrixMap<T>>,
    domains: BTreeMap<ChartId, Vec<(T, T)>>,
}

impl<T: Scalar> AnchoredBundle<T> {
    pub fn new(base_dim: usize, fibre_dim: usize) -> Self {
        AnchoredBundle {
            base_dim,
            fibre_dim,
            charts: Vec::new(),
            transitions: Vec::new(),
            anchors: BTreeMap::new(),
            domains: BTreeMap::new(),
        }
    }

    /// Registers a chart with its sampling box (one interval per base
    /// coordinate) and anchor matrix function.
    pub fn add_chart(
        mut self,
        id: impl Into<ChartId>,
        domain: Vec<(T, T)>,
        anchor: MatrixMap<T>,
    ) -> Result<Self, BundleError> {
        let id = id.into();
        if self.charts.contains(&id) {
            return Err(BundleError::DuplicateChart(id.to_string()));
        }
        if domain.len() != self.base_dim {
            return Err(BundleError::DomainShape {
                chart: id.to_string(),
                expected: self.base_dim,
                found: domain.len(),
            });
        }
        if anchor.rows() != self.base_dim || anchor.cols() != self.fibre_dim {
            return Err(BundleError::AnchorShape {
                chart: id.to_string(),
                expected: (self.base_dim, self.fibre_dim),
                found: (anchor.rows(), anchor.cols()),
            });
        }
        self.domains.insert(id.clone(), domain);
        self.anchors.insert(id.clone(), anchor);
        self.charts.push(id);
        Ok(self)
    }

    pub fn add_transition(mut self, t: TransitionMap<T>) -> Result<Self, BundleError> {
        for id in [&t.from, &t.to] {
            if !self.charts.contains(id) {
                return Err(BundleError::UnknownChart(id.to_string()));
            }
        }
        t.validate()?;
        self.transitions.push(t);
        Ok(self)
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn fibre_dim(&self) -> usize {
        self.fibre_dim
    }

    pub fn charts(&self) -> &[ChartId] {
        &self.charts
    }

    pub fn transitions(&self) -> &[TransitionMap<T>] {
        &self.transitions
    }

    pub fn domain(&self, chart: &ChartId) -> Option<&Vec<(T, T)>> {
        self.domains.get(chart)
    }

    pub fn anchor(&self, chart: &ChartId) -> Result<&MatrixMap<T>, BundleError> {
        self.anchors.get(chart).ok_or_else(|| BundleError::UnknownChart(chart.to_string()))
    }

    /// ρ_U(x) as a dense matrix, shape-checked.
    pub fn anchor_at(&self, chart: &ChartId, x: &Array1<T>) -> Result<Array2<T>, BundleError> {
        self.anchor(chart)?.eval(x)
    }

    /// Checks that registered inverse transitions actually invert each other
    /// on the stored samples: h_vu(h_uv(x)) = x within tolerance.
    pub fn validate_inverse_transitions(&self, tol: T) -> Result<(), BundleError> {
        for t in &self.transitions {
            for back in &self.transitions {
                if back.from == t.to && back.to == t.from {
                    for x in &t.overlap_samples {
                        let round_trip = back.base_map.eval(&t.base_map.eval(x));
                        let defect = inf_norm((&round_trip - x).view());
                        if defect > tol {
                            return Err(BundleError::InverseMismatch {
                                transition: format!("{}->{}", t.from, t.to),
                                defect: format!("{defect:e}"),
                            });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// A section in local representation: one map s_φ : m → k per chart.
#[derive(Debug, Clone)]
pub struct Section<T: Scalar> {
    base_dim: usize,
    fibre_dim: usize,
    reps: BTreeMap<ChartId, SmoothMap<T>>,
}

impl<T: Scalar> Section<T> {
    pub fn new(base_dim: usize, fibre_dim: usize) -> Self {
        Section { base_dim, fibre_dim, reps: BTreeMap::new() }
    }

    pub fn with_rep(
        mut self,
        chart: impl Into<ChartId>,
        rep: SmoothMap<T>,
    ) -> Result<Self, BundleError> {
        if rep.dom_dim() != self.base_dim || rep.cod_dim() != self.fibre_dim {
            return Err(BundleError::SectionShape {
                expected: (self.base_dim, self.fibre_dim),
                found: (rep.dom_dim(), rep.cod_dim()),
            });
        }
        self.reps.insert(chart.into(), rep);
        Ok(self)
    }

    /// Constant section with value v on every listed chart.
    pub fn constant(base_dim: usize, value: Array1<T>, charts: &[ChartId]) -> Self {
        let fibre_dim = value.len();
        let mut s = Section::new(base_dim, fibre_dim);
        for c in charts {
            s = s
                .with_rep(c.clone(), SmoothMap::constant(base_dim, value.clone()))
                .expect("constant rep has the right shape");
        }
        s
    }

    /// Frame section e_alpha (0-based) on every listed chart.
    pub fn frame(base_dim: usize, fibre_dim: usize, alpha: usize, charts: &[ChartId]) -> Self {
        let value = crate::linalg::basis_vector(fibre_dim, alpha);
        Section::constant(base_dim, value, charts)
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn fibre_dim(&self) -> usize {
        self.fibre_dim
    }

    pub fn charts(&self) -> impl Iterator<Item = &ChartId> {
        self.reps.keys()
    }

    pub fn rep(&self, chart: &ChartId) -> Result<&SmoothMap<T>, BundleError> {
        self.reps.get(chart).ok_or_else(|| BundleError::MissingRep {
            kind: "section",
            chart: chart.to_string(),
        })
    }

    pub fn eval(&self, chart: &ChartId, x: &Array1<T>) -> Result<Array1<T>, BundleError> {
        Ok(self.rep(chart)?.eval(x))
    }

    /// Pointwise scaling by a scalar function: (f·s)_φ(x) = f(x) s_φ(x).
    pub fn scaled_by(&self, f: &SmoothMap<T>) -> Result<Section<T>, BundleError> {
        if f.dom_dim() != self.base_dim || f.cod_dim() != 1 {
            return Err(BundleError::SectionShape {
                expected: (self.base_dim, 1),
                found: (f.dom_dim(), f.cod_dim()),
            });
        }
        let mut out = Section::new(self.base_dim, self.fibre_dim);
        for (chart, rep) in &self.reps {
            let rep = rep.clone();
            let f = f.clone();
            let map = SmoothMap::new(self.base_dim, self.fibre_dim, move |x| {
                let c = f.eval(x)[0];
                rep.eval(x).mapv(|v| v * c)
            });
            out = out.with_rep(chart.clone(), map)?;
        }
        Ok(out)
    }
}

/// A vector field in local representation: one map X_φ : m → m per chart.
#[derive(Debug, Clone)]
pub struct VectorField<T: Scalar> {
    base_dim: usize,
    reps: BTreeMap<ChartId, SmoothMap<T>>,
}

impl<T: Scalar> VectorField<T> {
    pub fn new(base_dim: usize) -> Self {
        VectorField { base_dim, reps: BTreeMap::new() }
    }

    pub fn with_rep(
        mut self,
        chart: impl Into<ChartId>,
        rep: SmoothMap<T>,
    ) -> Result<Self, BundleError> {
        if rep.dom_dim() != self.base_dim || rep.cod_dim() != self.base_dim {
            return Err(BundleError::SectionShape {
                expected: (self.base_dim, self.base_dim),
                found: (rep.dom_dim(), rep.cod_dim()),
            });
        }
        self.reps.insert(chart.into(), rep);
        Ok(self)
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn charts(&self) -> impl Iterator<Item = &ChartId> {
        self.reps.keys()
    }

    pub fn rep(&self, chart: &ChartId) -> Result<&SmoothMap<T>, BundleError> {
        self.reps.get(chart).ok_or_else(|| BundleError::MissingRep {
            kind: "vector field",
            chart: chart.to_string(),
        })
    }

    pub fn eval(&self, chart: &ChartId, x: &Array1<T>) -> Result<Array1<T>, BundleError> {
        Ok(self.rep(chart)?.eval(x))
    }
}

/// Pushes a section through the anchor: X_φ(x) = ρ_U(x) s_φ(x) on every chart
/// where both the section and the anchor are defined.
pub fn anchor_apply<T: Scalar>(
    bundle: &AnchoredBundle<T>,
    section: &Section<T>,
) -> Result<VectorField<T>, BundleError> {
    let mut field = VectorField::new(bundle.base_dim());
    let mut any = false;
    for chart in bundle.charts() {
        let Ok(rep) = section.rep(chart) else { continue };
        let anchor = bundle.anchor(chart)?.clone();
        let rep = rep.clone();
        let map = SmoothMap::new(bundle.base_dim(), bundle.base_dim(), move |x| {
            let m = (anchor.f)(x);
            m.dot(&rep.eval(x))
        });
        field = field.with_rep(chart.clone(), map)?;
        any = true;
    }
    if !any {
        return Err(BundleError::ChartMismatch {
            detail: "section is not defined on any chart of the bundle".into(),
        });
    }
    Ok(field)
}

/// Section cocycle defect on one transition:
/// max over overlap samples of ‖s_ψ(h(x)) − M(x) s_φ(x)‖∞.
pub fn section_cocycle_defect<T: Scalar>(
    section: &Section<T>,
    t: &TransitionMap<T>,
) -> Result<Defect<T>, BundleError> {
    require_samples(t)?;
    let from_rep = section.rep(&t.from)?;
    let to_rep = section.rep(&t.to)?;
    let mut defect = Defect::zero();
    for x in &t.overlap_samples {
        let lhs = to_rep.eval(&t.base_map.eval(x));
        let rhs = t.fibre_map.eval(x)?.dot(&from_rep.eval(x));
        defect.observe(inf_norm((&lhs - &rhs).view()), x);
    }
    Ok(defect)
}

/// Vector-field cocycle defect on one transition:
/// max over overlap samples of ‖X_ψ(h(x)) − dh(x) X_φ(x)‖∞.
pub fn field_cocycle_defect<T: Scalar>(
    field: &VectorField<T>,
    t: &TransitionMap<T>,
) -> Result<Defect<T>, BundleError> {
    require_samples(t)?;
    let from_rep = field.rep(&t.from)?;
    let to_rep = field.rep(&t.to)?;
    let mut defect = Defect::zero();
    for x in &t.overlap_samples {
        let lhs = to_rep.eval(&t.base_map.eval(x));
        let dh = t.base_map.jacobian(x)?;
        let rhs = dh.dot(&from_rep.eval(x));
        defect.observe(inf_norm((&lhs - &rhs).view()), x);
    }
    Ok(defect)
}

/// Anchor compatibility defect on one transition:
/// max over overlap samples of the largest entry of
/// ρ_to(h(x)) M(x) − dh(x) ρ_from(x).
pub fn anchor_compat_defect<T: Scalar>(
    bundle: &AnchoredBundle<T>,
    t: &TransitionMap<T>,
) -> Result<Defect<T>, BundleError> {
    require_samples(t)?;
    let mut defect = Defect::zero();
    for x in &t.overlap_samples {
        let y = t.base_map.eval(x);
        let lhs = bundle.anchor_at(&t.to, &y)?.dot(&t.fibre_map.eval(x)?);
        let dh = t.base_map.jacobian(x)?;
        let rhs = dh.dot(&bundle.anchor_at(&t.from, x)?);
        defect.observe(max_abs(&(lhs - rhs)), x);
    }
    Ok(defect)
}

/// Max of the section cocycle defect over all transitions of the bundle.
/// Vacuously zero for a single-chart bundle.
pub fn max_section_cocycle_defect<T: Scalar>(
    bundle: &AnchoredBundle<T>,
    section: &Section<T>,
) -> Result<Defect<T>, BundleError> {
    let mut defect = Defect::zero();
    for t in bundle.transitions() {
        defect = defect.merge(section_cocycle_defect(section, t)?);
    }
    Ok(defect)
}

/// A single-chart bundle over the given box with k = m and anchor A, the
/// presentation of a (1,1) tensor field acting as an anchor.
pub fn tensor_anchor<T: Scalar>(
    base_dim: usize,
    domain: Vec<(T, T)>,
    anchor: MatrixMap<T>,
) -> Result<AnchoredBundle<T>, BundleError> {
    AnchoredBundle::new(base_dim, base_dim).add_chart("U", domain, anchor)
}

/// Tolerance tier for transition-derivative checks: 1e-9 when the base map
/// carries an analytic Jacobian, 1e-5 when dh comes from finite differences.
pub fn transition_tolerance<T: Scalar>(t: &TransitionMap<T>) -> T {
    if t.base_map.has_analytic_jacobian() {
        real(1e-9)
    } else {
        real(1e-5)
    }
}

fn require_samples<T: Scalar>(t: &TransitionMap<T>) -> Result<(), BundleError> {
    if t.overlap_samples.is_empty() {
        Err(BundleError::NoOverlapSamples {
            transition: format!("{}->{}", t.from, t.to),
        })
    } else {
        Ok(())
    }
}

fn format_point<T: Scalar>(x: &Array1<T>) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v}")).collect();
    format!("({})", parts.join(","))
}

#[derive(Debug, Clone, Error)]
pub enum BundleError {
    #[error("duplicate chart `{0}`")]
    DuplicateChart(String),
    #[error("unknown chart `{0}`")]
    UnknownChart(String),
    #[error("chart `{chart}`: domain box has {found} intervals, expected {expected}")]
    DomainShape { chart: String, expected: usize, found: usize },
    #[error("chart `{chart}`: anchor is {found:?}, expected {expected:?} (rows x cols)")]
    AnchorShape { chart: String, expected: (usize, usize), found: (usize, usize) },
    #[error("matrix map returned shape {found:?}, expected {expected:?}")]
    MatrixShape { expected: (usize, usize), found: (usize, usize) },
    #[error("local representative has shape {found:?}, expected {expected:?} (dom, cod)")]
    SectionShape { expected: (usize, usize), found: (usize, usize) },
    #[error("{kind} has no representative on chart `{chart}`")]
    MissingRep { kind: &'static str, chart: String },
    #[error("chart mismatch: {detail}")]
    ChartMismatch { detail: String },
    #[error("transition {transition}: fibre map singular at {at}")]
    SingularFibreMap { transition: String, at: String },
    #[error("transition {transition} and its inverse do not compose to identity (defect {defect})")]
    InverseMismatch { transition: String, defect: String },
    #[error("transition {transition} has no overlap samples; sampling-based checks need at least one")]
    NoOverlapSamples { transition: String },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};

    fn line_bundle() -> AnchoredBundle<f64> {
        // Two 1-d charts with h(x) = 2x, M(x) = [[3]].
        AnchoredBundle::new(1, 1)
            .add_chart("U", vec![(0.0, 1.0)], MatrixMap::identity(1))
            .unwrap()
            .add_chart("V", vec![(0.0, 2.0)], MatrixMap::identity(1))
            .unwrap()
            .add_transition(TransitionMap {
                from: "U".into(),
                to: "V".into(),
                base_map: SmoothMap::new(1, 1, |x: &Array1<f64>| array![2.0 * x[0]]),
                fibre_map: MatrixMap::constant(array![[3.0]]),
                overlap_samples: vec![array![0.25], array![0.5], array![0.75]],
            })
            .unwrap()
    }

    #[test]
    fn anchor_apply_identity_anchor_is_identity() {
        let b = AnchoredBundle::<f64>::new(2, 2)
            .add_chart("U", vec![(-1.0, 1.0), (-1.0, 1.0)], MatrixMap::identity(2))
            .unwrap();
        let s = Section::new(2, 2)
            .with_rep("U", SmoothMap::new(2, 2, |x: &Array1<f64>| array![x[0], x[0] + x[1]]))
            .unwrap();
        let field = anchor_apply(&b, &s).unwrap();
        let x = array![0.3, -0.7];
        assert_eq!(field.eval(&"U".into(), &x).unwrap(), s.eval(&"U".into(), &x).unwrap());
    }

    #[test]
    fn anchor_apply_zero_anchor_kills_section() {
        let b = AnchoredBundle::<f64>::new(2, 2)
            .add_chart(
                "U",
                vec![(-1.0, 1.0), (-1.0, 1.0)],
                MatrixMap::constant(Array2::zeros((2, 2))),
            )
            .unwrap();
        let s = Section::constant(2, array![1.0, 1.0], &["U".into()]);
        let field = anchor_apply(&b, &s).unwrap();
        assert_eq!(field.eval(&"U".into(), &array![0.5, 0.5]).unwrap(), array![0.0, 0.0]);
    }

    #[test]
    fn anchor_apply_matrix_vector_case() {
        // ρ_U(x) = [[1,0],[0,x₁]], s = (1,1): X(x) = (1, x₁); at (2,3) gives (1,2).
        let b = AnchoredBundle::<f64>::new(2, 2)
            .add_chart(
                "U",
                vec![(0.0, 4.0), (0.0, 4.0)],
                MatrixMap::new(2, 2, |x: &Array1<f64>| array![[1.0, 0.0], [0.0, x[0]]]),
            )
            .unwrap();
        let s = Section::constant(2, array![1.0, 1.0], &["U".into()]);
        let field = anchor_apply(&b, &s).unwrap();
        assert_eq!(field.eval(&"U".into(), &array![2.0, 3.0]).unwrap(), array![1.0, 2.0]);
    }

    #[test]
    fn anchor_apply_chart_mismatch_is_an_error() {
        let b = AnchoredBundle::<f64>::new(1, 1)
            .add_chart("U", vec![(0.0, 1.0)], MatrixMap::identity(1))
            .unwrap();
        let s = Section::constant(1, array![1.0], &["W".into()]);
        assert!(matches!(anchor_apply(&b, &s), Err(BundleError::ChartMismatch { .. })));
    }

    #[test]
    fn cocycle_defect_identity_transition_vanishes() {
        let b = AnchoredBundle::<f64>::new(1, 1)
            .add_chart("U", vec![(0.0, 1.0)], MatrixMap::identity(1))
            .unwrap()
            .add_chart("V", vec![(0.0, 1.0)], MatrixMap::identity(1))
            .unwrap()
            .add_transition(TransitionMap {
                from: "U".into(),
                to: "V".into(),
                base_map: SmoothMap::identity(1),
                fibre_map: MatrixMap::identity(1),
                overlap_samples: vec![array![0.3], array![0.6]],
            })
            .unwrap();
        let s = Section::new(1, 1)
            .with_rep("U", SmoothMap::new(1, 1, |x: &Array1<f64>| array![x[0].sin()]))
            .unwrap()
            .with_rep("V", SmoothMap::new(1, 1, |x: &Array1<f64>| array![x[0].sin()]))
            .unwrap();
        let d = section_cocycle_defect(&s, &b.transitions()[0]).unwrap();
        assert!(d.value < 1e-12);
    }

    #[test]
    fn cocycle_defect_hand_fixture() {
        // s_φ(x) = x, s_ψ(y) = 3y/2: s_ψ(2x) = 3x = M s_φ(x).
        let b = line_bundle();
        let s = Section::new(1, 1)
            .with_rep("U", SmoothMap::new(1, 1, |x: &Array1<f64>| array![x[0]]))
            .unwrap()
            .with_rep("V", SmoothMap::new(1, 1, |y: &Array1<f64>| array![1.5 * y[0]]))
            .unwrap();
        let d = section_cocycle_defect(&s, &b.transitions()[0]).unwrap();
        assert!(d.value < 1e-9, "defect {}", d.value);
    }

    #[test]
    fn single_chart_bundle_has_vacuous_cocycle_defect() {
        let b = AnchoredBundle::<f64>::new(1, 1)
            .add_chart("U", vec![(0.0, 1.0)], MatrixMap::identity(1))
            .unwrap();
        let s = Section::constant(1, array![1.0], &["U".into()]);
        let d = max_section_cocycle_defect(&b, &s).unwrap();
        assert_eq!(d.value, 0.0);
        assert!(d.witness.is_none());
    }

    #[test]
    fn empty_overlap_samples_rejected() {
        let t = TransitionMap::<f64> {
            from: "U".into(),
            to: "V".into(),
            base_map: SmoothMap::identity(1),
            fibre_map: MatrixMap::identity(1),
            overlap_samples: vec![],
        };
        let s = Section::constant(1, array![1.0], &["U".into(), "V".into()]);
        assert!(matches!(
            section_cocycle_defect(&s, &t),
            Err(BundleError::NoOverlapSamples { .. })
        ));
    }

    #[test]
    fn field_cocycle_defect_on_pushforward() {
        // X_φ(x) = 1, h(x) = 2x ⇒ X_ψ(y) = dh·X_φ = 2.
        let b = line_bundle();
        let f = VectorField::new(1)
            .with_rep("U", SmoothMap::new(1, 1, |_x: &Array1<f64>| array![1.0]))
            .unwrap()
            .with_rep("V", SmoothMap::new(1, 1, |_y: &Array1<f64>| array![2.0]))
            .unwrap();
        let d = field_cocycle_defect(&f, &b.transitions()[0]).unwrap();
        assert!(d.value < 1e-9, "defect {}", d.value);
    }

    #[test]
    fn anchor_compat_identity_transition() {
        let b = AnchoredBundle::<f64>::new(1, 1)
            .add_chart("U", vec![(0.0, 1.0)], MatrixMap::identity(1))
            .unwrap()
            .add_chart("V", vec![(0.0, 1.0)], MatrixMap::identity(1))
            .unwrap()
            .add_transition(TransitionMap {
                from: "U".into(),
                to: "V".into(),
                base_map: SmoothMap::identity(1),
                fibre_map: MatrixMap::identity(1),
                overlap_samples: vec![array![0.5]],
            })
            .unwrap();
        let d = anchor_compat_defect(&b, &b.transitions()[0]).unwrap();
        assert!(d.value < 1e-12);
    }

    #[test]
    fn tangent_presentation_anchor_compat_below_fd_tier() {
        // k = m, ρ = I on both charts, M(x) = dh(x) for a nonlinear h.
        let h = SmoothMap::new(2, 2, |x: &Array1<f64>| {
            array![x[0] + 0.1 * x[1] * x[1], x[1] + 0.05 * x[0].sin()]
        });
        let dh = MatrixMap::new(2, 2, |x: &Array1<f64>| {
            array![[1.0, 0.2 * x[1]], [0.05 * x[0].cos(), 1.0]]
        });
        let b = AnchoredBundle::<f64>::new(2, 2)
            .add_chart("U", vec![(-1.0, 1.0), (-1.0, 1.0)], MatrixMap::identity(2))
            .unwrap()
            .add_chart("V", vec![(-2.0, 2.0), (-2.0, 2.0)], MatrixMap::identity(2))
            .unwrap()
            .add_transition(TransitionMap {
                from: "U".into(),
                to: "V".into(),
                base_map: h,
                fibre_map: dh,
                overlap_samples: vec![array![0.2, -0.4], array![-0.6, 0.9], array![0.0, 0.0]],
            })
            .unwrap();
        let d = anchor_compat_defect(&b, &b.transitions()[0]).unwrap();
        assert!(d.value < 1e-6, "defect {}", d.value);
    }

    #[test]
    fn corrupted_anchor_flagged() {
        // Same tangent presentation but ρ_V = 2I: defect must be bounded away from 0.
        let h = SmoothMap::new(1, 1, |x: &Array1<f64>| array![x[0] + 0.1 * x[0] * x[0]]);
        let dh = MatrixMap::new(1, 1, |x: &Array1<f64>| array![[1.0 + 0.2 * x[0]]]);
        let b = AnchoredBundle::<f64>::new(1, 1)
            .add_chart("U", vec![(0.0, 1.0)], MatrixMap::identity(1))
            .unwrap()
            .add_chart("V", vec![(0.0, 2.0)], MatrixMap::constant(array![[2.0]]))
            .unwrap()
            .add_transition(TransitionMap {
                from: "U".into(),
                to: "V".into(),
                base_map: h,
                fibre_map: dh,
                overlap_samples: vec![array![0.5]],
            })
            .unwrap();
        let d = anchor_compat_defect(&b, &b.transitions()[0]).unwrap();
        assert!(d.value >= 0.1, "defect {}", d.value);
    }

    #[test]
    fn tensor_anchor_rotation() {
        let a = MatrixMap::constant(array![[0.0, -1.0], [1.0, 0.0]]);
        let b = tensor_anchor(2, vec![(-1.0, 1.0), (-1.0, 1.0)], a).unwrap();
        let s = Section::constant(2, array![1.0, 0.0], &["U".into()]);
        let field = anchor_apply(&b, &s).unwrap();
        assert_eq!(field.eval(&"U".into(), &array![0.0, 0.0]).unwrap(), array![0.0, 1.0]);
    }

    #[test]
    fn singular_fibre_map_rejected() {
        let t = TransitionMap::<f64> {
            from: "U".into(),
            to: "V".into(),
            base_map: SmoothMap::identity(1),
            fibre_map: MatrixMap::constant(array![[0.0]]),
            overlap_samples: vec![array![0.5]],
        };
        assert!(matches!(t.validate(), Err(BundleError::SingularFibreMap { .. })));
    }

    #[test]
    fn scaled_section_matches_pointwise_product() {
        let s = Section::new(1, 2)
            .with_rep("U", SmoothMap::new(1, 2, |x: &Array1<f64>| array![x[0], 1.0]))
            .unwrap();
        let f = SmoothMap::new(1, 1, |x: &Array1<f64>| array![x[0] * x[0]]);
        let fs = s.scaled_by(&f).unwrap();
        let x = array![3.0];
        assert_eq!(fs.eval(&"U".into(), &x).unwrap(), array![27.0, 9.0]);
    }
}
