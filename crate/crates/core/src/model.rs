use std::fmt::Debug;
use std::sync::Arc;

/// Opaque binary classifier. Implementations must be deterministic and
/// return a probability vector `[p0, p1]` summing to one.
pub trait BlackBoxModel: Send + Sync + Debug {
    fn predict_proba(&self, row: &[f64]) -> [f64; 2];

    /// Argmax class; an exact 0.5/0.5 tie goes to class 0.
    fn predict(&self, row: &[f64]) -> u8 {
        let [p0, p1] = self.predict_proba(row);
        (p1 > p0) as u8
    }

    fn positive_proba(&self, row: &[f64]) -> f64 {
        self.predict_proba(row)[1]
    }
}

impl<T: BlackBoxModel + ?Sized> BlackBoxModel for Arc<T> {
    fn predict_proba(&self, row: &[f64]) -> [f64; 2] {
        (**self).predict_proba(row)
    }

    fn predict(&self, row: &[f64]) -> u8 {
        (**self).predict(row)
    }
}

impl<T: BlackBoxModel + ?Sized> BlackBoxModel for &T {
    fn predict_proba(&self, row: &[f64]) -> [f64; 2] {
        (**self).predict_proba(row)
    }

    fn predict(&self, row: &[f64]) -> u8 {
        (**self).predict(row)
    }
}

pub type SharedModel = Arc<dyn BlackBoxModel>;

/// Adapts a closure `row -> p1` into a model. Mostly useful in tests and
/// for hand-built reference functions.
pub struct FnModel<F>(pub F);

impl<F> Debug for FnModel<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("FnModel")
    }
}

impl<F> BlackBoxModel for FnModel<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn predict_proba(&self, row: &[f64]) -> [f64; 2] {
        let p = (self.0)(row).clamp(0.0, 1.0);
        [1.0 - p, p]
    }
}
