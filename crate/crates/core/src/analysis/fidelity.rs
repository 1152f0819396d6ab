use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Labels;
use crate::oracle::{query_batch, Oracle};
use crate::space::Task;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Fraction of points with equal labels; higher is better.
    Agreement,
    /// Macro-averaged F1; higher is better.
    MacroF1,
    /// Mean squared error; lower is better.
    Mse,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Agreement => "agreement",
            Metric::MacroF1 => "macro-f1",
            Metric::Mse => "mse",
        }
    }

    pub fn higher_is_better(self) -> bool {
        !matches!(self, Metric::Mse)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub task: Task,
    pub test_size: usize,
    /// Agreement with the oracle, or MSE against it for regression.
    pub relative: f64,
    pub relative_metric: Metric,
    /// Surrogate against ground truth, when labels were supplied.
    pub absolute: Option<f64>,
    /// Oracle against ground truth, for reference.
    pub oracle_absolute: Option<f64>,
    pub absolute_metric: Metric,
}

/// Scores `surrogate` against `oracle` on `x`, and against `truth` if given.
pub fn fidelity(surrogate: &dyn Oracle, oracle: &dyn Oracle, x: ArrayView2<'_, f64>, truth: Option<&Labels>) -> Result<FidelityReport> {
    if x.nrows() == 0 {
        return Err(Error::domain("fidelity needs a non-empty test set"));
    }
    if surrogate.task() != oracle.task() {
        return Err(Error::domain(format!(
            "surrogate is a {} model but the oracle is {}",
            surrogate.task(),
            oracle.task()
        )));
    }
    if let Some(t) = truth {
        if t.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                got: t.len(),
            });
        }
        if t.task() != oracle.task() {
            return Err(Error::domain("ground-truth labels do not match the task"));
        }
    }
    let ours = query_batch(surrogate, x)?;
    let theirs = query_batch(oracle, x)?;
    let task = oracle.task();
    let (relative, relative_metric, absolute_metric) = match task {
        Task::Classification => (agreement(&ours, &theirs), Metric::Agreement, Metric::MacroF1),
        Task::Regression => (mean_squared_error(&ours, &theirs), Metric::Mse, Metric::Mse),
    };
    let score = |pred: &Labels, t: &Labels| match task {
        Task::Classification => macro_f1(t, pred),
        Task::Regression => mean_squared_error(pred, t),
    };
    Ok(FidelityReport {
        task,
        test_size: x.nrows(),
        relative,
        relative_metric,
        absolute: truth.map(|t| score(&ours, t)),
        oracle_absolute: truth.map(|t| score(&theirs, t)),
        absolute_metric,
    })
}

fn agreement(a: &Labels, b: &Labels) -> f64 {
    let (Some(x), Some(y)) = (a.classes(), b.classes()) else {
        return f64::NAN;
    };
    x.iter().zip(y).filter(|(p, q)| p == q).count() as f64 / x.len() as f64
}

pub fn mean_squared_error(a: &Labels, b: &Labels) -> f64 {
    let n = a.len();
    (0..n)
        .map(|i| {
            let d = a.get(i).as_f64() - b.get(i).as_f64();
            d * d
        })
        .sum::<f64>()
        / n as f64
}

/// Unweighted mean of per-class F1 over classes appearing in either argument.
/// A class with no true and no predicted positives cannot occur, so every
/// term is well defined.
pub fn macro_f1(truth: &Labels, predicted: &Labels) -> f64 {
    let (Some(t), Some(p)) = (truth.classes(), predicted.classes()) else {
        return f64::NAN;
    };
    let m = truth.class_count().max(predicted.class_count());
    let mut tp = vec![0usize; m];
    let mut fp = vec![0usize; m];
    let mut fn_ = vec![0usize; m];
    for (&a, &b) in t.iter().zip(p) {
        if a == b {
            tp[a] += 1;
        } else {
            fp[b] += 1;
            fn_[a] += 1;
        }
    }
    let mut sum = 0.0;
    let mut present = 0usize;
    for c in 0..m {
        if tp[c] + fp[c] + fn_[c] == 0 {
            continue;
        }
        present += 1;
        sum += 2.0 * tp[c] as f64 / (2 * tp[c] + fp[c] + fn_[c]) as f64;
    }
    sum / present.max(1) as f64
}

impl FidelityReport {
    pub fn render(&self) -> String {
        let mut s = format!("test points          {}\n", self.test_size);
        s += &format!("{:<20} {:.4}\n", format!("relative {}", self.relative_metric.name()), self.relative);
        if let Some(a) = self.absolute {
            s += &format!("{:<20} {a:.4}\n", format!("absolute {}", self.absolute_metric.name()));
        }
        if let Some(a) = self.oracle_absolute {
            s += &format!("{:<20} {a:.4}\n", format!("oracle {}", self.absolute_metric.name()));
        }
        s
    }
}
