//! Defect values: the max-norm residual of an identity over a finite sample
//! set, together with the sample that attained the max.

use ndarray::Array1;

use crate::scalar::Scalar;

/// Residual of one identity: the worst value seen and where it was seen.
#[derive(Debug, Clone)]
pub struct Defect<T: Scalar> {
    pub value: T,
    /// Sample point attaining the max, if any sample was examined.
    pub witness: Option<Array1<T>>,
}

impl<T: Scalar> Defect<T> {
    /// The vacuous defect: nothing was checked, residual 0 by convention.
    pub fn zero() -> Self {
        Defect { value: T::zero(), witness: None }
    }

    pub fn new(value: T, witness: Array1<T>) -> Self {
        Defect { value, witness: Some(witness) }
    }

    /// Folds another observation in, keeping the larger residual.
    pub fn observe(&mut self, value: T, witness: &Array1<T>) {
        if self.witness.is_none() || value > self.value {
            self.value = value;
            self.witness = Some(witness.clone());
        }
    }

    /// Merges two defects, keeping the larger one.
    pub fn merge(mut self, other: Defect<T>) -> Defect<T> {
        if let Some(w) = &other.witness {
            self.observe(other.value, w);
        }
        self
    }
}

impl<T: Scalar> Default for Defect<T> {
    fn default() -> Self {
        Self::zero()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn observe_keeps_argmax() {
        let mut d = Defect::<f64>::zero();
        d.observe(0.5, &array![1.0]);
        d.observe(0.2, &array![2.0]);
        assert_eq!(d.value, 0.5);
        assert_eq!(d.witness.as_ref().unwrap()[0], 1.0);
    }

    #[test]
    fn first_observation_wins_even_if_zero() {
        let mut d = Defect::<f64>::zero();
        d.observe(0.0, &array![3.0]);
        assert!(d.witness.is_some());
    }
}
