//! Dissimilarity functions between genome-shaped vectors.

use crate::regress::Predictor;

/// A symmetric dissimilarity with `d(x, x) = 0`. The triangle inequality is
/// not required.
pub trait Metric: Sync {
    fn distance(&self, a: &[f64], b: &[f64]) -> f64;

    /// For metrics of the form `|f(a) − f(b)|`, returns `f(x)`. Callers may
    /// cache projections instead of calling [`Metric::distance`] repeatedly.
    fn projection(&self, _x: &[f64]) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Euclidean;

impl Metric for Euclidean {
    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        squared_euclidean(a, b).sqrt()
    }
}

#[inline]
pub fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `d(x, y) = |ĝ(x) − ĝ(y)|` for a regressor `ĝ`.
#[derive(Debug, Clone, Copy)]
pub struct PredictedMetric<'a, P: ?Sized> {
    predictor: &'a P,
}

impl<'a, P: Predictor + ?Sized> PredictedMetric<'a, P> {
    pub fn new(predictor: &'a P) -> Self {
        PredictedMetric { predictor }
    }
}

impl<P: Predictor + ?Sized> Metric for PredictedMetric<'_, P> {
    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        (self.predictor.predict_row(a) - self.predictor.predict_row(b)).abs()
    }

    fn projection(&self, x: &[f64]) -> Option<f64> {
        Some(self.predictor.predict_row(x))
    }
}

/// Wraps any closure as a metric.
pub struct FnMetric<F>(pub F);

impl<F> Metric for FnMetric<F>
where
    F: Fn(&[f64], &[f64]) -> f64 + Sync,
{
    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        (self.0)(a, b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct FirstComponent;

    impl Predictor for FirstComponent {
        fn n_features(&self) -> usize {
            2
        }
        fn predict_row(&self, x: &[f64]) -> f64 {
            x[0]
        }
    }

    #[test]
    fn euclidean_basics() {
        assert_eq!(Euclidean.distance(&[0.0, 0.0], &[3.0, 4.0]), 5.0);
        assert_eq!(Euclidean.distance(&[1.5, -2.0], &[1.5, -2.0]), 0.0);
        assert!(Euclidean.projection(&[1.0]).is_none());
    }

    #[test]
    fn predicted_metric_ignores_other_components() {
        let m = PredictedMetric::new(&FirstComponent);
        assert_eq!(m.distance(&[1.0, 100.0], &[4.0, -100.0]), 3.0);
        assert_eq!(m.distance(&[4.0, 0.0], &[1.0, 7.0]), 3.0);
        assert_eq!(m.projection(&[2.5, 0.0]), Some(2.5));
    }
}
