//! Samples, datasets, bounded losses and convex surrogates.

use std::cmp::Ordering;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};

/// A response: a class label in `1..=M` or a real value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Class(u32),
    Value(f64),
}

impl Label {
    pub fn class(self) -> Option<u32> {
        match self {
            Label::Class(c) => Some(c),
            Label::Value(_) => None,
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Label::Value(v) => Some(v),
            Label::Class(_) => None,
        }
    }

    /// Total order: classes before values, each in natural order.
    pub fn total_cmp(&self, other: &Label) -> Ordering {
        match (self, other) {
            (Label::Class(a), Label::Class(b)) => a.cmp(b),
            (Label::Value(a), Label::Value(b)) => a.total_cmp(b),
            (Label::Class(_), Label::Value(_)) => Ordering::Less,
            (Label::Value(_), Label::Class(_)) => Ordering::Greater,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Class(c) => write!(f, "{c}"),
            Label::Value(v) => write!(f, "{v}"),
        }
    }
}

/// Margin sign of a binary class label: class 1 is -1, class 2 is +1.
pub fn binary_sign(y: Label) -> Result<f64> {
    match y {
        Label::Class(1) => Ok(-1.0),
        Label::Class(2) => Ok(1.0),
        other => domain(format!("label {other} is not a binary class in {{1, 2}}")),
    }
}

/// Class label of a real score: positive scores map to class 2.
pub fn class_of_score(score: f64) -> Label {
    if score > 0.0 {
        Label::Class(2)
    } else {
        Label::Class(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: Label,
}

impl Sample {
    pub fn new(x: Vec<f64>, y: Label) -> Self {
        Sample { x, y }
    }

    /// Canonical total order used to make learners independent of sample order.
    pub fn canonical_cmp(&self, other: &Sample) -> Ordering {
        for (a, b) in self.x.iter().zip(&other.x) {
            match a.total_cmp(b) {
                Ordering::Equal => continue,
                ord => return ord,
            }
        }
        self.x.len().cmp(&other.x.len()).then_with(|| self.y.total_cmp(&other.y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Labels in `1..=classes`.
    Classification {
        classes: u32,
    },
    Regression,
}

impl Task {
    pub fn is_classification(self) -> bool {
        matches!(self, Task::Classification { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    Classification,
    Regression,
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classification" => Ok(TaskKind::Classification),
            "regression" => Ok(TaskKind::Regression),
            _ => config(format!("unknown task `{s}`")),
        }
    }
}

/// An immutable learning set.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    dim: usize,
    task: Task,
}

impl Dataset {
    /// Validates dimensions, finiteness and label kinds.
    pub fn new(samples: Vec<Sample>, task: Task) -> Result<Self> {
        let Some(first) = samples.first() else {
            return domain("dataset must contain at least one sample");
        };
        let dim = first.x.len();
        for (i, s) in samples.iter().enumerate() {
            if s.x.len() != dim {
                return domain(format!("sample {i} has dimension {} but {dim} was expected", s.x.len()));
            }
            if s.x.iter().any(|v| !v.is_finite()) {
                return domain(format!("sample {i} has a non-finite feature"));
            }
            match (task, s.y) {
                (Task::Classification { classes }, Label::Class(c)) => {
                    if c == 0 || c > classes {
                        return domain(format!("sample {i} has label {c} outside 1..={classes}"));
                    }
                }
                (Task::Regression, Label::Value(v)) => {
                    if !v.is_finite() {
                        return domain(format!("sample {i} has a non-finite target"));
                    }
                }
                _ => return domain(format!("sample {i} has a label of the wrong kind")),
            }
        }
        Ok(Dataset { samples, dim, task })
    }

    /// Classification dataset with the label set inferred as `1..=max label`.
    pub fn classification(samples: Vec<Sample>) -> Result<Self> {
        let classes = samples.iter().filter_map(|s| s.y.class()).max().unwrap_or(1).max(2);
        Self::new(samples, Task::Classification { classes })
    }

    pub fn regression(samples: Vec<Sample>) -> Result<Self> {
        Self::new(samples, Task::Regression)
    }

    /// One-dimensional classification data from paired slices.
    pub fn from_1d_classes(x: &[f64], y: &[u32]) -> Result<Self> {
        if x.len() != y.len() {
            return domain("feature and label lengths differ");
        }
        Self::classification(x.iter().zip(y).map(|(&x, &y)| Sample::new(vec![x], Label::Class(y))).collect())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    /// Samples whose mask bit is set.
    pub fn select<'a>(&'a self, mask: &[bool]) -> Vec<&'a Sample> {
        self.samples.iter().zip(mask).filter(|(_, &m)| m).map(|(s, _)| s).collect()
    }

    pub fn read_csv<R: Read>(reader: R, kind: TaskKind) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let d = headers.len().checked_sub(1).filter(|&d| d > 0);
        let Some(d) = d else {
            return config("csv needs at least one feature column and a `y` column");
        };
        let mut feature_col = vec![usize::MAX; d];
        let mut label_col = None;
        for (i, name) in headers.iter().enumerate() {
            if name == "y" {
                if label_col.replace(i).is_some() {
                    return config("duplicate `y` column");
                }
                continue;
            }
            let j = name
                .strip_prefix('x')
                .and_then(|s| s.parse::<usize>().ok())
                .filter(|&j| j < d && name == format!("x{j}"));
            match j {
                Some(j) if feature_col[j] == usize::MAX => feature_col[j] = i,
                _ => return config(format!("unexpected csv column `{name}`")),
            }
        }
        let Some(label_col) = label_col else {
            return config("csv is missing the `y` column");
        };
        let mut samples = Vec::new();
        for (row, record) in rdr.records().enumerate() {
            let record = record?;
            let mut x = Vec::with_capacity(d);
            for &c in &feature_col {
                x.push(parse_finite(&record[c], row)?);
            }
            let raw = &record[label_col];
            let y = match kind {
                TaskKind::Classification => match raw.parse::<u32>() {
                    Ok(c) if c >= 1 => Label::Class(c),
                    _ => return config(format!("row {row}: invalid class label `{raw}`")),
                },
                TaskKind::Regression => Label::Value(parse_finite(raw, row)?),
            };
            samples.push(Sample::new(x, y));
        }
        match kind {
            TaskKind::Classification => Self::classification(samples),
            TaskKind::Regression => Self::regression(samples),
        }
    }

    pub fn read_csv_path(path: impl AsRef<Path>, kind: TaskKind) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, kind)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.dim).map(|j| format!("x{j}")).collect();
        header.push("y".into());
        wtr.write_record(&header)?;
        for s in &self.samples {
            let mut rec: Vec<String> = s.x.iter().map(|v| format!("{v:?}")).collect();
            rec.push(match s.y {
                Label::Class(c) => c.to_string(),
                Label::Value(v) => format!("{v:?}"),
            });
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn parse_finite(raw: &str, row: usize) -> Result<f64> {
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => config(format!("row {row}: invalid or non-finite number `{raw}`")),
    }
}

/// Losses bounded in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossFunction {
    ZeroOne,
    ClippedAbsolute,
    ClippedSquared,
}

impl LossFunction {
    pub fn evaluate(self, y_true: Label, y_pred: Label) -> Result<f64> {
        match (self, y_true, y_pred) {
            (LossFunction::ZeroOne, Label::Class(a), Label::Class(b)) => {
                if a == 0 || b == 0 {
                    return domain("class labels start at 1");
                }
                Ok(if a == b { 0.0 } else { 1.0 })
            }
            (LossFunction::ClippedAbsolute, Label::Value(a), Label::Value(b)) => {
                finite_pair(a, b)?;
                Ok((a - b).abs().min(1.0))
            }
            (LossFunction::ClippedSquared, Label::Value(a), Label::Value(b)) => {
                finite_pair(a, b)?;
                Ok(((a - b) * (a - b)).min(1.0))
            }
            (loss, a, b) => domain(format!("{loss} loss is undefined for labels ({a}, {b})")),
        }
    }

    pub fn is_classification(self) -> bool {
        self == LossFunction::ZeroOne
    }
}

fn finite_pair(a: f64, b: f64) -> Result<()> {
    if a.is_finite() && b.is_finite() {
        Ok(())
    } else {
        domain("non-finite regression value")
    }
}

impl fmt::Display for LossFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossFunction::ZeroOne => "zero-one",
            LossFunction::ClippedAbsolute => "clipped-absolute",
            LossFunction::ClippedSquared => "clipped-squared",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurrogateKind {
    Hinge,
    Exponential,
    Logit,
}

impl SurrogateKind {
    /// The convex function C.
    pub fn convex(self, h: f64) -> f64 {
        match self {
            SurrogateKind::Hinge => (1.0 + h).max(0.0),
            SurrogateKind::Exponential => h.exp(),
            SurrogateKind::Logit => {
                let softplus = if h > 0.0 { h + (-h).exp().ln_1p() } else { h.exp().ln_1p() };
                softplus / std::f64::consts::LN_2
            }
        }
    }
}

/// `C(h(y, s))` with the margin map `h(y, s) = -y s` on binary labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConvexSurrogate {
    pub kind: SurrogateKind,
    pub clamp: bool,
}

impl ConvexSurrogate {
    pub fn new(kind: SurrogateKind) -> Self {
        ConvexSurrogate { kind, clamp: true }
    }

    pub fn margin(y: Label, score: f64) -> Result<f64> {
        Ok(-binary_sign(y)? * score)
    }

    pub fn evaluate(&self, y: Label, score: f64) -> Result<f64> {
        if !score.is_finite() {
            return domain("surrogate score must be finite");
        }
        let c = self.kind.convex(Self::margin(y, score)?);
        Ok(if self.clamp { c.min(1.0) } else { c })
    }
}

/// Either a bounded loss or a convex surrogate; what ERM minimizes and estimators average.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Criterion {
    Loss(LossFunction),
    Surrogate(ConvexSurrogate),
}

impl Criterion {
    pub const ZERO_ONE: Criterion = Criterion::Loss(LossFunction::ZeroOne);

    /// Cost of predicting `y_pred` when the truth is `y_true`.
    pub fn evaluate(&self, y_true: Label, y_pred: Label) -> Result<f64> {
        match self {
            Criterion::Loss(l) => l.evaluate(y_true, y_pred),
            Criterion::Surrogate(s) => s.evaluate(y_true, binary_sign(y_pred)?),
        }
    }

    /// Cost of a real-valued aggregate output.
    pub fn evaluate_real(&self, y_true: Label, output: f64) -> Result<f64> {
        match self {
            Criterion::Loss(LossFunction::ZeroOne) => {
                if !output.is_finite() {
                    return domain("non-finite score");
                }
                LossFunction::ZeroOne.evaluate(y_true, class_of_score(output))
            }
            Criterion::Loss(l) => l.evaluate(y_true, Label::Value(output)),
            Criterion::Surrogate(s) => s.evaluate(y_true, output),
        }
    }

    pub fn is_classification(&self) -> bool {
        match self {
            Criterion::Loss(l) => l.is_classification(),
            Criterion::Surrogate(_) => true,
        }
    }

    /// Whether every value lies in `[0, 1]`.
    pub fn is_bounded(&self) -> bool {
        match self {
            Criterion::Loss(_) => true,
            Criterion::Surrogate(s) => s.clamp,
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Criterion::Loss(l) => write!(f, "{l}"),
            Criterion::Surrogate(s) => {
                let name = match s.kind {
                    SurrogateKind::Hinge => "hinge",
                    SurrogateKind::Exponential => "exponential",
                    SurrogateKind::Logit => "logit",
                };
                if s.clamp {
                    f.write_str(name)
                } else {
                    write!(f, "{name}-unclamped")
                }
            }
        }
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (base, clamp) = match s.strip_suffix("-unclamped") {
            Some(base) => (base, false),
            None => (s, true),
        };
        let surrogate = |kind| Criterion::Surrogate(ConvexSurrogate { kind, clamp });
        let loss_only = |c: Criterion| {
            if clamp {
                Ok(c)
            } else {
                config(format!("`{s}`: only surrogates can be unclamped"))
            }
        };
        match base {
            "zero-one" => loss_only(Criterion::Loss(LossFunction::ZeroOne)),
            "clipped-absolute" => loss_only(Criterion::Loss(LossFunction::ClippedAbsolute)),
            "clipped-squared" => loss_only(Criterion::Loss(LossFunction::ClippedSquared)),
            "hinge" => Ok(surrogate(SurrogateKind::Hinge)),
            "exponential" => Ok(surrogate(SurrogateKind::Exponential)),
            "logit" => Ok(surrogate(SurrogateKind::Logit)),
            _ => config(format!("unknown objective `{s}`")),
        }
    }
}

impl Serialize for Criterion {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Criterion {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
