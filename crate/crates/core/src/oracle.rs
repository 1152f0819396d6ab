//! The blackbox query contract and its in-process implementations.

use std::sync::Mutex;

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::label::{Label, Labels};
use crate::space::{check_dim, Task};
use crate::tree::DecisionTree;

/// Anything that maps a batch of feature vectors to labels.
///
/// Implementations must be deterministic within a session and answer every
/// finite in-domain point.
pub trait Oracle: Sync {
    fn dimension(&self) -> usize;

    fn task(&self) -> Task;

    /// Labels for every row of `x`, in row order.
    fn predict_batch(&self, x: ArrayView2<'_, f64>) -> Result<Labels>;

    /// Whether concurrent `predict_batch` calls are allowed.
    fn concurrent(&self) -> bool {
        true
    }
}

impl<T: Oracle + ?Sized> Oracle for &T {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn task(&self) -> Task {
        (**self).task()
    }
    fn predict_batch(&self, x: ArrayView2<'_, f64>) -> Result<Labels> {
        (**self).predict_batch(x)
    }
    fn concurrent(&self) -> bool {
        (**self).concurrent()
    }
}

impl<T: Oracle + ?Sized + Send> Oracle for Box<T> {
    fn dimension(&self) -> usize {
        (**self).dimension()
    }
    fn task(&self) -> Task {
        (**self).task()
    }
    fn predict_batch(&self, x: ArrayView2<'_, f64>) -> Result<Labels> {
        (**self).predict_batch(x)
    }
    fn concurrent(&self) -> bool {
        (**self).concurrent()
    }
}

impl Oracle for DecisionTree {
    fn dimension(&self) -> usize {
        self.dim()
    }
    fn task(&self) -> Task {
        DecisionTree::task(self)
    }
    fn predict_batch(&self, x: ArrayView2<'_, f64>) -> Result<Labels> {
        DecisionTree::predict_batch(self, x)
    }
}

/// Wraps a per-row closure as an oracle.
pub struct FnOracle<F> {
    dim: usize,
    task: Task,
    f: F,
}

impl<F> FnOracle<F>
where
    F: Fn(&[f64]) -> Label + Sync,
{
    pub fn new(dim: usize, task: Task, f: F) -> Self {
        FnOracle { dim, task, f }
    }
}

impl<F> Oracle for FnOracle<F>
where
    F: Fn(&[f64]) -> Label + Sync,
{
    fn dimension(&self) -> usize {
        self.dim
    }

    fn task(&self) -> Task {
        self.task
    }

    fn predict_batch(&self, x: ArrayView2<'_, f64>) -> Result<Labels> {
        check_dim(self.dim, x.ncols())?;
        let mut row = vec![0.0; self.dim];
        let labels = x.rows().into_iter().map(|r| {
            row.iter_mut().zip(r.iter()).for_each(|(d, s)| *d = *s);
            (self.f)(&row)
        });
        Labels::from_labels(self.task, labels.collect::<Vec<_>>())
            .ok_or_else(|| Error::Oracle("closure returned a label of the wrong task".into()))
    }
}

/// Validated batch query: checks dimensions and finiteness on the way in and
/// length and task on the way out.
pub fn query_batch(oracle: &dyn Oracle, x: ArrayView2<'_, f64>) -> Result<Labels> {
    check_dim(oracle.dimension(), x.ncols())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("oracle queries must be finite"));
    }
    let labels = oracle.predict_batch(x)?;
    if labels.len() != x.nrows() {
        return Err(Error::Oracle(format!(
            "oracle returned {} labels for {} points",
            labels.len(),
            x.nrows()
        )));
    }
    if labels.task() != oracle.task() {
        return Err(Error::Oracle(format!(
            "oracle declared {} but returned {} labels",
            oracle.task(),
            labels.task()
        )));
    }
    Ok(labels)
}

/// Funnels calls to an oracle that is not safe for concurrent use through a lock.
pub struct Serialized<'a> {
    inner: &'a dyn Oracle,
    lock: Option<Mutex<()>>,
}

impl<'a> Serialized<'a> {
    pub fn new(inner: &'a dyn Oracle) -> Self {
        let lock = (!inner.concurrent()).then(|| Mutex::new(()));
        Serialized { inner, lock }
    }

    pub fn query(&self, x: ArrayView2<'_, f64>) -> Result<Labels> {
        match &self.lock {
            Some(m) => {
                let _guard = m.lock().unwrap_or_else(|e| e.into_inner());
                query_batch(self.inner, x)
            }
            None => query_batch(self.inner, x),
        }
    }

    pub fn inner(&self) -> &'a dyn Oracle {
        self.inner
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn closure_oracle_and_validation() {
        let o = FnOracle::new(2, Task::Classification, |x| Label::Class(usize::from(x[0] > 0.0)));
        let x = array![[1.0, 0.0], [-1.0, 0.0]];
        assert_eq!(query_batch(&o, x.view()).unwrap(), Labels::Classes(vec![1, 0]));
        let bad = array![[f64::NAN, 0.0]];
        assert!(query_batch(&o, bad.view()).is_err());
        let wrong = array![[1.0]];
        assert!(matches!(query_batch(&o, wrong.view()), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn wrong_task_is_reported() {
        let o = FnOracle::new(1, Task::Classification, |_| Label::Value(1.0));
        assert!(query_batch(&o, array![[0.0]].view()).is_err());
    }
}
