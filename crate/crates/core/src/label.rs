use serde::{Deserialize, Serialize};

use crate::space::Task;

/// A single oracle output: a class index or a real value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Class(usize),
    Value(f64),
}

impl Label {
    pub fn task(&self) -> Task {
        match self {
            Label::Class(_) => Task::Classification,
            Label::Value(_) => Task::Regression,
        }
    }

    pub fn as_f64(&self) -> f64 {
        match *self {
            Label::Class(c) => c as f64,
            Label::Value(v) => v,
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Label::Class(c) => write!(f, "{c}"),
            Label::Value(v) => write!(f, "{v}"),
        }
    }
}

/// A batch of labels of one task kind.
#[derive(Clone, Debug, PartialEq)]
pub enum Labels {
    Classes(Vec<usize>),
    Values(Vec<f64>),
}

impl Labels {
    pub fn empty(task: Task) -> Self {
        match task {
            Task::Classification => Labels::Classes(Vec::new()),
            Task::Regression => Labels::Values(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Labels::Classes(c) => c.len(),
            Labels::Values(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn task(&self) -> Task {
        match self {
            Labels::Classes(_) => Task::Classification,
            Labels::Values(_) => Task::Regression,
        }
    }

    pub fn get(&self, i: usize) -> Label {
        match self {
            Labels::Classes(c) => Label::Class(c[i]),
            Labels::Values(v) => Label::Value(v[i]),
        }
    }

    pub fn classes(&self) -> Option<&[usize]> {
        match self {
            Labels::Classes(c) => Some(c),
            Labels::Values(_) => None,
        }
    }

    pub fn values(&self) -> Option<&[f64]> {
        match self {
            Labels::Values(v) => Some(v),
            Labels::Classes(_) => None,
        }
    }

    /// Number of class slots (max label + 1); zero for regression.
    pub fn class_count(&self) -> usize {
        match self {
            Labels::Classes(c) => c.iter().max().map_or(0, |m| m + 1),
            Labels::Values(_) => 0,
        }
    }

    pub fn select(&self, rows: &[usize]) -> Labels {
        match self {
            Labels::Classes(c) => Labels::Classes(rows.iter().map(|&r| c[r]).collect()),
            Labels::Values(v) => Labels::Values(rows.iter().map(|&r| v[r]).collect()),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = Label> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    /// Collects single labels; `None` if any label belongs to the other task.
    pub fn from_labels(task: Task, labels: impl IntoIterator<Item = Label>) -> Option<Labels> {
        let mut out = Labels::empty(task);
        for l in labels {
            match (&mut out, l) {
                (Labels::Classes(c), Label::Class(x)) => c.push(x),
                (Labels::Values(v), Label::Value(x)) => v.push(x),
                _ => return None,
            }
        }
        Some(out)
    }
}
