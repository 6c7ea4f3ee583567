//! Differential forms on an anchored bundle, stored in a local frame.
//!
//! A degree-q form keeps one component function per strictly increasing
//! multi-index (α₁ < … < α_q), so antisymmetry is exact by storage convention;
//! evaluation on arbitrary index tuples resolves the sign from permutation
//! parity. Degree 0 is a scalar function (one component, empty multi-index).

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::bundle::ChartId;
use crate::linalg::determinant;
use crate::numerics::SmoothMap;
use crate::scalar::Scalar;

/// All strictly increasing `degree`-tuples from {0, …, fibre_dim−1} in
/// lexicographic order. Empty when degree > fibre_dim; the single empty tuple
/// when degree = 0.
pub fn increasing_indices(fibre_dim: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if degree > fibre_dim {
        return out;
    }
    let mut current: Vec<usize> = (0..degree).collect();
    loop {
        out.push(current.clone());
        // advance to the next combination
        let mut i = degree;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if current[i] != i + fibre_dim - degree {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        current[i] += 1;
        for j in i + 1..degree {
            current[j] = current[j - 1] + 1;
        }
    }
}

/// Sorts an index tuple and reports the permutation sign; None when an index
/// repeats.
pub fn sort_with_parity(indices: &[usize]) -> Option<(Vec<usize>, i32)> {
    let mut v = indices.to_vec();
    let mut sign = 1;
    // insertion sort, counting swaps
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    for w in v.windows(2) {
        if w[0] == w[1] {
            return None;
        }
    }
    Some((v, sign))
}

type ComponentsFn<T> = dyn Fn(&Array1<T>) -> Vec<T> + Send + Sync;

/// A degree-q differential form in local representation: per chart, a function
/// from base points to the component vector ordered like
/// [`increasing_indices`].
#[derive(Clone)]
pub struct Form<T: Scalar> {
    degree: usize,
    base_dim: usize,
    fibre_dim: usize,
    comps: BTreeMap<ChartId, Arc<ComponentsFn<T>>>,
}

impl<T: Scalar> fmt::Debug for Form<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Form")
            .field("degree", &self.degree)
            .field("fibre_dim", &self.fibre_dim)
            .field("charts", &self.comps.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl<T: Scalar> Form<T> {
    pub fn new(degree: usize, base_dim: usize, fibre_dim: usize) -> Self {
        Form { degree, base_dim, fibre_dim, comps: BTreeMap::new() }
    }

    pub fn with_components<F>(mut self, chart: impl Into<ChartId>, f: F) -> Self
    where
        F: Fn(&Array1<T>) -> Vec<T> + Send + Sync + 'static,
    {
        self.comps.insert(chart.into(), Arc::new(f));
        self
    }

    /// Constant-component form on the listed charts.
    pub fn constant(
        degree: usize,
        base_dim: usize,
        fibre_dim: usize,
        values: Vec<T>,
        charts: &[ChartId],
    ) -> Self {
        assert_eq!(values.len(), increasing_indices(fibre_dim, degree).len());
        let mut form = Form::new(degree, base_dim, fibre_dim);
        for c in charts {
            let values = values.clone();
            form = form.with_components(c.clone(), move |_| values.clone());
        }
        form
    }

    /// The zero form of the given degree.
    pub fn zero(degree: usize, base_dim: usize, fibre_dim: usize, charts: &[ChartId]) -> Self {
        let n = increasing_indices(fibre_dim, degree).len();
        Form::constant(degree, base_dim, fibre_dim, vec![T::zero(); n], charts)
    }

    /// Dual-frame covector θ^alpha (0-based): the degree-1 form with value 1
    /// on e_alpha and 0 on the other frame vectors.
    pub fn dual_frame(base_dim: usize, fibre_dim: usize, alpha: usize, charts: &[ChartId]) -> Self {
        let mut values = vec![T::zero(); fibre_dim];
        values[alpha] = T::one();
        Form::constant(1, base_dim, fibre_dim, values, charts)
    }

    /// Degree-0 form wrapping a scalar function.
    pub fn scalar(fibre_dim: usize, f: &SmoothMap<T>, charts: &[ChartId]) -> Self {
        assert_eq!(f.cod_dim(), 1, "scalar form needs a 1-dimensional codomain");
        let mut form = Form::new(0, f.dom_dim(), fibre_dim);
        for c in charts {
            let f = f.clone();
            form = form.with_components(c.clone(), move |x| vec![f.eval(x)[0]]);
        }
        form
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn fibre_dim(&self) -> usize {
        self.fibre_dim
    }

    pub fn charts(&self) -> impl Iterator<Item = &ChartId> {
        self.comps.keys()
    }

    pub fn defined_on(&self, chart: &ChartId) -> bool {
        self.comps.contains_key(chart)
    }

    /// Component vector at x, ordered like [`increasing_indices`].
    pub fn components(&self, chart: &ChartId, x: &Array1<T>) -> Result<Vec<T>, FormError> {
        let f = self.comps.get(chart).ok_or_else(|| FormError::MissingChart {
            chart: chart.to_string(),
        })?;
        let values = f(x);
        let expected = increasing_indices(self.fibre_dim, self.degree).len();
        if values.len() != expected {
            return Err(FormError::ComponentCount { expected, found: values.len() });
        }
        Ok(values)
    }

    /// Component at an arbitrary index tuple, resolving the permutation sign;
    /// 0 when an index repeats.
    pub fn component_at(
        &self,
        chart: &ChartId,
        x: &Array1<T>,
        indices: &[usize],
    ) -> Result<T, FormError> {
        if indices.len() != self.degree {
            return Err(FormError::Arity { expected: self.degree, found: indices.len() });
        }
        let Some((sorted, parity)) = sort_with_parity(indices) else {
            return Ok(T::zero());
        };
        let all = increasing_indices(self.fibre_dim, self.degree);
        let pos = all.iter().position(|idx| idx == &sorted).ok_or(FormError::IndexRange {
            fibre_dim: self.fibre_dim,
        })?;
        let values = self.components(chart, x)?;
        let sign = if parity > 0 { T::one() } else { -T::one() };
        Ok(sign * values[pos])
    }

    /// ω_x(v₁, …, v_q) for raw fibre vectors: each wedge monomial contributes
    /// its component times the determinant of the corresponding q×q minor.
    pub fn eval_on_vectors(
        &self,
        chart: &ChartId,
        x: &Array1<T>,
        vectors: &[Array1<T>],
    ) -> Result<T, FormError> {
        if vectors.len() != self.degree {
            return Err(FormError::Arity { expected: self.degree, found: vectors.len() });
        }
        let values = self.components(chart, x)?;
        if self.degree == 0 {
            return Ok(values[0]);
        }
        let q = self.degree;
        let mut total = T::zero();
        for (pos, idx) in increasing_indices(self.fibre_dim, q).iter().enumerate() {
            if values[pos] == T::zero() {
                continue;
            }
            let minor = Array2::from_shape_fn((q, q), |(i, j)| vectors[j][idx[i]]);
            total = total + values[pos] * determinant(&minor);
        }
        Ok(total)
    }
}

#[derive(Debug, Clone, Error)]
pub enum FormError {
    #[error("form has no components on chart `{chart}`")]
    MissingChart { chart: String },
    #[error("component function returned {found} values, expected {expected}")]
    ComponentCount { expected: usize, found: usize },
    #[error("expected {expected} arguments, found {found}")]
    Arity { expected: usize, found: usize },
    #[error("multi-index out of range for fibre dimension {fibre_dim}")]
    IndexRange { fibre_dim: usize },
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn increasing_indices_enumeration() {
        assert_eq!(increasing_indices(3, 0), vec![Vec::<usize>::new()]);
        assert_eq!(increasing_indices(3, 1), vec![vec![0], vec![1], vec![2]]);
        assert_eq!(increasing_indices(3, 2), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert_eq!(increasing_indices(3, 3), vec![vec![0, 1, 2]]);
        assert!(increasing_indices(3, 4).is_empty());
        assert_eq!(increasing_indices(4, 2).len(), 6);
    }

    #[test]
    fn parity_bookkeeping() {
        assert_eq!(sort_with_parity(&[0, 1, 2]), Some((vec![0, 1, 2], 1)));
        assert_eq!(sort_with_parity(&[1, 0, 2]), Some((vec![0, 1, 2], -1)));
        assert_eq!(sort_with_parity(&[2, 0, 1]), Some((vec![0, 1, 2], 1)));
        assert_eq!(sort_with_parity(&[1, 1]), None);
    }

    #[test]
    fn dual_frame_pairs_with_basis() {
        let charts = vec![ChartId::new("U")];
        let theta1 = Form::<f64>::dual_frame(0, 3, 0, &charts);
        let x = Array1::zeros(0);
        let e1 = array![1.0, 0.0, 0.0];
        let e2 = array![0.0, 1.0, 0.0];
        assert_eq!(theta1.eval_on_vectors(&"U".into(), &x, &[e1]).unwrap(), 1.0);
        assert_eq!(theta1.eval_on_vectors(&"U".into(), &x, &[e2]).unwrap(), 0.0);
    }

    #[test]
    fn wedge_evaluates_as_determinant() {
        // θ²∧θ³ on (e2, e3) is 1, on (e3, e2) is −1.
        let charts = vec![ChartId::new("U")];
        let w = Form::<f64>::constant(2, 0, 3, vec![0.0, 0.0, 1.0], &charts);
        let x = Array1::zeros(0);
        let e2 = array![0.0, 1.0, 0.0];
        let e3 = array![0.0, 0.0, 1.0];
        assert_eq!(w.eval_on_vectors(&"U".into(), &x, &[e2.clone(), e3.clone()]).unwrap(), 1.0);
        assert_eq!(w.eval_on_vectors(&"U".into(), &x, &[e3, e2]).unwrap(), -1.0);
    }

    #[test]
    fn component_at_resolves_parity() {
        let charts = vec![ChartId::new("U")];
        let w = Form::<f64>::constant(2, 0, 3, vec![5.0, 0.0, -1.0], &charts);
        let x = Array1::zeros(0);
        assert_eq!(w.component_at(&"U".into(), &x, &[0, 1]).unwrap(), 5.0);
        assert_eq!(w.component_at(&"U".into(), &x, &[1, 0]).unwrap(), -5.0);
        assert_eq!(w.component_at(&"U".into(), &x, &[2, 2]).unwrap(), 0.0);
        assert_eq!(w.component_at(&"U".into(), &x, &[2, 1]).unwrap(), 1.0);
    }

    #[test]
    fn degree_zero_is_scalar_function() {
        let f = SmoothMap::new(2, 1, |x: &Array1<f64>| array![x[0] + 2.0 * x[1]]);
        let form = Form::scalar(2, &f, &[ChartId::new("U")]);
        let x = array![1.0, 3.0];
        assert_eq!(form.eval_on_vectors(&"U".into(), &x, &[]).unwrap(), 7.0);
    }

    #[test]
    fn top_degree_overflow_has_no_components() {
        let charts = vec![ChartId::new("U")];
        let w = Form::<f64>::zero(4, 0, 3, &charts);
        let x = Array1::zeros(0);
        assert_eq!(w.components(&"U".into(), &x).unwrap().len(), 0);
    }
}
