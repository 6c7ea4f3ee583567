//! Dimension-generic numerical kernel: evaluable smooth maps, central-difference
//! Fréchet derivatives, directional derivatives, and a fixed-step RK4 integrator.
//!
//! Dimensions are runtime values throughout; vectors and matrices are dense.
//! All types are immutable after construction and all operations are pure, so
//! everything here can be used concurrently without coordination.

use std::fmt;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use thiserror::Error;

use crate::linalg::inf_norm;
use crate::scalar::{real, Scalar};

type EvalFn<T> = dyn Fn(&Array1<T>) -> Array1<T> + Send + Sync;
type JacobianFn<T> = dyn Fn(&Array1<T>) -> Array2<T> + Send + Sync;

/// A smooth map between finite-dimensional model spaces, given by an
/// evaluation closure and, optionally, an analytic Jacobian.
///
/// Evaluation must be deterministic: the same point always yields the same
/// output bits. When an analytic Jacobian is supplied it takes precedence
/// over finite differences everywhere downstream.
#[derive(Clone)]
pub struct SmoothMap<T: Scalar> {
    dom_dim: usize,
    cod_dim: usize,
    eval: Arc<EvalFn<T>>,
    analytic_jacobian: Option<Arc<JacobianFn<T>>>,
}

impl<T: Scalar> fmt::Debug for SmoothMap<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothMap")
            .field("dom_dim", &self.dom_dim)
            .field("cod_dim", &self.cod_dim)
            .field("analytic_jacobian", &self.analytic_jacobian.is_some())
            .finish()
    }
}

impl<T: Scalar> SmoothMap<T> {
    pub fn new<F>(dom_dim: usize, cod_dim: usize, eval: F) -> Self
    where
        F: Fn(&Array1<T>) -> Array1<T> + Send + Sync + 'static,
    {
        SmoothMap { dom_dim, cod_dim, eval: Arc::new(eval), analytic_jacobian: None }
    }

    pub fn with_jacobian<J>(mut self, jac: J) -> Self
    where
        J: Fn(&Array1<T>) -> Array2<T> + Send + Sync + 'static,
    {
        self.analytic_jacobian = Some(Arc::new(jac));
        self
    }

    /// The linear map v ↦ A·v.
    pub fn linear(matrix: Array2<T>) -> Self {
        let (rows, cols) = (matrix.nrows(), matrix.ncols());
        let m = matrix.clone();
        SmoothMap::new(cols, rows, move |x| m.dot(x)).with_jacobian(move |_| matrix.clone())
    }

    pub fn identity(dim: usize) -> Self {
        SmoothMap::linear(Array2::eye(dim))
    }

    /// The constant map x ↦ value.
    pub fn constant(dom_dim: usize, value: Array1<T>) -> Self {
        let cod = value.len();
        let v = value.clone();
        SmoothMap::new(dom_dim, cod, move |_| v.clone())
            .with_jacobian(move |_| Array2::zeros((value.len(), dom_dim)))
    }

    pub fn dom_dim(&self) -> usize {
        self.dom_dim
    }

    pub fn cod_dim(&self) -> usize {
        self.cod_dim
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.analytic_jacobian.is_some()
    }

    pub fn eval(&self, x: &Array1<T>) -> Array1<T> {
        debug_assert_eq!(x.len(), self.dom_dim, "point has wrong dimension");
        (self.eval)(x)
    }

    /// Evaluates and rejects non-finite results, reporting the probe point.
    pub fn eval_checked(&self, x: &Array1<T>) -> Result<Array1<T>, NumericsError> {
        let y = self.eval(x);
        if y.iter().all(|v| v.is_finite()) {
            Ok(y)
        } else {
            Err(NumericsError::NonFiniteEval { probe: format_point(x) })
        }
    }

    /// Jacobian at x: analytic when available, central differences otherwise.
    pub fn jacobian(&self, x: &Array1<T>) -> Result<Array2<T>, NumericsError> {
        match &self.analytic_jacobian {
            Some(jac) => Ok(jac(x)),
            None => fd_jacobian(self, x, default_step(x)),
        }
    }

    /// Composition g ∘ self. Analytic Jacobians chain when both sides have one.
    pub fn then(&self, g: &SmoothMap<T>) -> SmoothMap<T> {
        assert_eq!(
            self.cod_dim,
            g.dom_dim,
            "composition dimension mismatch: {} -> {}",
            self.cod_dim,
            g.dom_dim
        );
        let f_eval = self.eval.clone();
        let g_eval = g.eval.clone();
        let mut composed = SmoothMap::new(self.dom_dim, g.cod_dim, move |x| g_eval(&f_eval(x)));
        if let (Some(jf), Some(jg)) = (&self.analytic_jacobian, &g.analytic_jacobian) {
            let f_eval = self.eval.clone();
            let (jf, jg) = (jf.clone(), jg.clone());
            composed = composed.with_jacobian(move |x| jg(&f_eval(x)).dot(&jf(x)));
        }
        composed
    }
}

/// Default central-difference step at x: 1e-5 · max(1, ‖x‖∞).
pub fn default_step<T: Scalar>(x: &Array1<T>) -> T {
    real::<T>(1e-5) * T::one().max(inf_norm(x.view()))
}

/// Central-difference Jacobian: entry (i, j) = (F_i(x + h e_j) − F_i(x − h e_j)) / 2h.
///
/// O(h²) accurate for C³ maps. A non-finite evaluation at any probe point is
/// reported with the offending probe.
pub fn fd_jacobian<T: Scalar>(
    f: &SmoothMap<T>,
    x: &Array1<T>,
    h: T,
) -> Result<Array2<T>, NumericsError> {
    assert!(h > T::zero(), "finite-difference step must be positive");
    let mut jac = Array2::zeros((f.cod_dim(), f.dom_dim()));
    let two_h = h + h;
    let mut probe = x.clone();
    for j in 0..f.dom_dim() {
        let xj = probe[j];
        probe[j] = xj + h;
        let plus = f.eval_checked(&probe)?;
        probe[j] = xj - h;
        let minus = f.eval_checked(&probe)?;
        probe[j] = xj;
        for i in 0..f.cod_dim() {
            jac[[i, j]] = (plus[i] - minus[i]) / two_h;
        }
    }
    Ok(jac)
}

/// Directional derivative dF_x(v) by central differences along v, with the
/// step scaled by 1/max(1, ‖v‖). Uses the analytic Jacobian when present.
pub fn directional_derivative<T: Scalar>(
    f: &SmoothMap<T>,
    x: &Array1<T>,
    v: &Array1<T>,
) -> Result<Array1<T>, NumericsError> {
    debug_assert_eq!(v.len(), f.dom_dim());
    if let Some(jac) = &f.analytic_jacobian {
        return Ok(jac(x).dot(v));
    }
    let h = default_step(x) / T::one().max(inf_norm(v.view()));
    let plus = f.eval_checked(&(x + &v.mapv(|c| c * h)))?;
    let minus = f.eval_checked(&(x - &v.mapv(|c| c * h)))?;
    Ok((plus - minus).mapv(|d| d / (h + h)))
}

/// A sampled integral curve: strictly increasing times and one state per time.
#[derive(Debug, Clone)]
pub struct Trajectory<T: Scalar> {
    pub times: Vec<T>,
    pub states: Vec<Array1<T>>,
}

impl<T: Scalar> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &Array1<T> {
        self.states.last().expect("trajectory has at least the initial state")
    }
}

/// Classical fixed-step fourth-order Runge–Kutta integration of the autonomous
/// field x' = vf(x) from x0 over t_span.
///
/// If the state goes non-finite mid-flight the partial trajectory computed so
/// far is returned inside the error.
pub fn rk4_integrate<T: Scalar>(
    vf: &SmoothMap<T>,
    x0: &Array1<T>,
    t_span: (T, T),
    steps: usize,
) -> Result<Trajectory<T>, NumericsError> {
    assert_eq!(vf.dom_dim(), vf.cod_dim(), "vector field must be square");
    assert!(steps >= 1, "at least one step required");
    let (t0, t1) = t_span;
    assert!(t1 > t0, "t_span must be increasing");

    let h = (t1 - t0) / real::<T>(steps as f64);
    let half = h / real::<T>(2.0);
    let sixth = h / real::<T>(6.0);
    let two = real::<T>(2.0);

    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    times.push(t0);
    states.push(x0.clone());

    let mut x = x0.clone();
    for i in 0..steps {
        let k1 = vf.eval(&x);
        let k2 = vf.eval(&(&x + &k1.mapv(|v| v * half)));
        let k3 = vf.eval(&(&x + &k2.mapv(|v| v * half)));
        let k4 = vf.eval(&(&x + &k3.mapv(|v| v * h)));
        x = &x + &(&(&k1 + &k2.mapv(|v| v * two)) + &(&k3.mapv(|v| v * two) + &k4))
            .mapv(|v| v * sixth);
        let t = t0 + h * real::<T>((i + 1) as f64);
        if !x.iter().all(|v| v.is_finite()) {
            return Err(NumericsError::NonFiniteState {
                time: format!("{t}"),
                partial: format!("{} finite states retained", states.len()),
            });
        }
        times.push(t);
        states.push(x.clone());
    }
    Ok(Trajectory { times, states })
}

/// Agreement between the analytic Jacobian (when present) and central
/// differences; 0 when no analytic Jacobian is stored. Used to validate
/// hand-written derivatives.
pub fn jacobian_consistency<T: Scalar>(
    f: &SmoothMap<T>,
    x: &Array1<T>,
) -> Result<T, NumericsError> {
    match &f.analytic_jacobian {
        None => Ok(T::zero()),
        Some(jac) => {
            let analytic = jac(x);
            let numeric = fd_jacobian(f, x, default_step(x))?;
            let mut worst = T::zero();
            for (a, n) in analytic.iter().zip(numeric.iter()) {
                let scale = T::one().max(a.abs());
                worst = worst.max((*a - *n).abs() / scale);
            }
            Ok(worst)
        }
    }
}

fn format_point<T: Scalar>(x: &Array1<T>) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v}")).collect();
    format!("({})", parts.join(","))
}

#[derive(Debug, Clone, Error)]
pub enum NumericsError {
    #[error("non-finite evaluation at probe {probe}")]
    NonFiniteEval { probe: String },
    #[error("state became non-finite at t={time} ({partial})")]
    NonFiniteState { time: String, partial: String },
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array1};

    fn map_2d_product_sum() -> SmoothMap<f64> {
        // F(x, y) = (x·y, x + y); hand Jacobian at (2,1) is [[1,2],[1,1]].
        SmoothMap::new(2, 2, |x: &Array1<f64>| array![x[0] * x[1], x[0] + x[1]])
    }

    #[test]
    fn fd_jacobian_linear_map_is_exact() {
        let a = array![[2.0, -1.0, 0.5], [0.0, 3.0, 1.0]];
        let f = SmoothMap::new(3, 2, {
            let a = a.clone();
            move |x: &Array1<f64>| a.dot(x)
        });
        let j = fd_jacobian(&f, &array![0.3, -1.2, 2.0], 1e-4).unwrap();
        for (lhs, rhs) in j.iter().zip(a.iter()) {
            assert!((lhs - rhs).abs() < 1e-9);
        }
    }

    #[test]
    fn fd_jacobian_square_function() {
        let f = SmoothMap::new(1, 1, |x: &Array1<f64>| array![x[0] * x[0]]);
        let j = fd_jacobian(&f, &array![3.0], 1e-5).unwrap();
        assert!((j[[0, 0]] - 6.0).abs() < 1e-8);
    }

    #[test]
    fn fd_jacobian_product_sum_matches_hand_derivative() {
        let f = map_2d_product_sum();
        let j = fd_jacobian(&f, &array![2.0, 1.0], 1e-5).unwrap();
        let expected = array![[1.0, 2.0], [1.0, 1.0]];
        for (lhs, rhs) in j.iter().zip(expected.iter()) {
            assert!((lhs - rhs).abs() < 1e-8);
        }
    }

    #[test]
    fn fd_jacobian_reports_bad_probe() {
        let f = SmoothMap::new(1, 1, |x: &Array1<f64>| array![x[0].ln()]);
        let err = fd_jacobian(&f, &array![0.0], 1e-3).unwrap_err();
        assert!(matches!(err, NumericsError::NonFiniteEval { .. }));
    }

    #[test]
    fn directional_derivative_linear() {
        let a = array![[1.0, 2.0], [0.0, -1.0]];
        let f = SmoothMap::new(2, 2, {
            let a = a.clone();
            move |x: &Array1<f64>| a.dot(x)
        });
        let d = directional_derivative(&f, &array![5.0, -3.0], &array![1.0, 1.0]).unwrap();
        assert!((d[0] - 3.0).abs() < 1e-9);
        assert!((d[1] + 1.0).abs() < 1e-9);
    }

    #[test]
    fn directional_derivative_quadratic_euler_identity() {
        // F(v) = ⟨v,v⟩: dF_v(v) = 2⟨v,v⟩ = 10 at v = (1,2).
        let f = SmoothMap::new(2, 1, |v: &Array1<f64>| array![v.dot(v)]);
        let v = array![1.0, 2.0];
        let d = directional_derivative(&f, &v, &v).unwrap();
        assert!((d[0] - 10.0).abs() < 1e-7);
    }

    #[test]
    fn analytic_jacobian_takes_precedence() {
        // Deliberately wrong analytic Jacobian shows up in directional output.
        let f = SmoothMap::new(1, 1, |x: &Array1<f64>| array![x[0]])
            .with_jacobian(|_| array![[42.0]]);
        let d = directional_derivative(&f, &array![1.0], &array![1.0]).unwrap();
        assert_eq!(d[0], 42.0);
    }

    #[test]
    fn rk4_constant_field_stays_put() {
        let f = SmoothMap::new(2, 2, |_x: &Array1<f64>| array![0.0, 0.0]);
        let traj = rk4_integrate(&f, &array![1.5, -2.0], (0.0, 1.0), 10).unwrap();
        assert_eq!(traj.len(), 11);
        for s in &traj.states {
            assert_eq!(s, &array![1.5, -2.0]);
        }
    }

    #[test]
    fn rk4_exponential_growth() {
        let f = SmoothMap::new(1, 1, |x: &Array1<f64>| x.clone());
        let traj = rk4_integrate(&f, &array![1.0], (0.0, 1.0), 100).unwrap();
        assert!((traj.final_state()[0] - std::f64::consts::E).abs() < 1e-8);
    }

    #[test]
    fn rk4_circular_rotation() {
        let f = SmoothMap::new(2, 2, |x: &Array1<f64>| array![-x[1], x[0]]);
        let traj =
            rk4_integrate(&f, &array![1.0, 0.0], (0.0, std::f64::consts::FRAC_PI_2), 200).unwrap();
        let end = traj.final_state();
        assert!(end[0].abs() < 1e-7);
        assert!((end[1] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn rk4_reports_blowup() {
        // x' = x² from 1 blows up at t = 1.
        let f = SmoothMap::new(1, 1, |x: &Array1<f64>| array![x[0] * x[0]]);
        let err = rk4_integrate(&f, &array![1.0], (0.0, 2.0), 50).unwrap_err();
        assert!(matches!(err, NumericsError::NonFiniteState { .. }));
    }

    #[test]
    fn composition_chains_analytic_jacobians() {
        let f = SmoothMap::linear(array![[2.0, 0.0], [0.0, 3.0]]);
        let g = SmoothMap::linear(array![[1.0, 1.0]]);
        let fg = f.then(&g);
        assert!(fg.has_analytic_jacobian());
        let j = fg.jacobian(&array![0.0, 0.0]).unwrap();
        assert_eq!(j, array![[2.0, 3.0]]);
    }

    #[test]
    fn jacobian_consistency_flags_wrong_analytic() {
        let good = SmoothMap::new(1, 1, |x: &Array1<f64>| array![x[0] * x[0]])
            .with_jacobian(|x: &Array1<f64>| array![[2.0 * x[0]]]);
        assert!(jacobian_consistency(&good, &array![1.3]).unwrap() < 1e-9);
        let bad = SmoothMap::new(1, 1, |x: &Array1<f64>| array![x[0] * x[0]])
            .with_jacobian(|_| array![[0.0]]);
        assert!(jacobian_consistency(&bad, &array![1.3]).unwrap() > 1.0);
    }

    #[test]
    fn works_in_f32_too() {
        let f = SmoothMap::<f32>::new(1, 1, |x: &Array1<f32>| array![x[0] * x[0]]);
        let j = fd_jacobian(&f, &array![3.0f32], 1e-2).unwrap();
        assert!((j[[0, 0]] - 6.0).abs() < 1e-2);
    }
}
