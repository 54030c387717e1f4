//! Run reports: one JSON object per invocation with fixed float formatting.

use std::collections::BTreeMap;

use serde::ser::Error as _;
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

use smp_perturb::verify::Check;

/// A float written with 17 significant digits, or `null` if not finite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Num {
    pub fn text(self) -> String {
        if self.0.is_finite() {
            // -0.0 would otherwise print with a sign that depends on the route taken.
            let v = if self.0 == 0.0 { 0.0 } else { self.0 };
            format!("{v:.16e}")
        } else {
            "null".to_owned()
        }
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        RawValue::from_string(self.text())
            .map_err(S::Error::custom)?
            .serialize(serializer)
    }
}

/// Echoed input parameter.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Input {
    Int(u64),
    Num(Num),
    Text(String),
    Nums(Vec<Num>),
}

impl From<f64> for Input {
    fn from(v: f64) -> Self {
        Input::Num(Num(v))
    }
}

impl From<usize> for Input {
    fn from(v: usize) -> Self {
        Input::Int(v as u64)
    }
}

impl From<u64> for Input {
    fn from(v: u64) -> Self {
        Input::Int(v)
    }
}

impl From<&str> for Input {
    fn from(v: &str) -> Self {
        Input::Text(v.to_owned())
    }
}

impl From<&[f64]> for Input {
    fn from(v: &[f64]) -> Self {
        Input::Nums(v.iter().copied().map(Num).collect())
    }
}

/// One emitted number with its full index.
#[derive(Debug, Clone, Serialize)]
pub struct Record {
    pub quantity: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<Num>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<Num>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub i: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    pub value: Num,
}

impl Record {
    pub fn new(quantity: &str, value: f64) -> Self {
        Self {
            quantity: quantity.to_owned(),
            model: None,
            eps: None,
            rho: None,
            r: None,
            n: None,
            i: None,
            j: None,
            s: None,
            value: Num(value),
        }
    }

    pub fn model(mut self, label: &str) -> Self {
        self.model = Some(label.to_owned());
        self
    }

    pub fn eps(mut self, eps: f64) -> Self {
        self.eps = Some(Num(eps));
        self
    }

    pub fn rho(mut self, rho: f64) -> Self {
        self.rho = Some(Num(rho));
        self
    }

    pub fn r(mut self, r: usize) -> Self {
        self.r = Some(r);
        self
    }

    pub fn n(mut self, n: usize) -> Self {
        self.n = Some(n);
        self
    }

    pub fn i(mut self, i: usize) -> Self {
        self.i = Some(i);
        self
    }

    pub fn j(mut self, j: usize) -> Self {
        self.j = Some(j);
        self
    }

    pub fn s(mut self, s: usize) -> Self {
        self.s = Some(s);
        self
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub pass: bool,
    pub residual: Num,
    pub tolerance: Num,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl CheckRow {
    pub fn new(name: impl Into<String>, residual: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            pass: residual <= tolerance,
            residual: Num(residual),
            tolerance: Num(tolerance),
            detail: None,
        }
    }

    pub fn from_check(prefix: Option<&str>, check: Check) -> Self {
        let name = match prefix {
            Some(p) => format!("{p}/{}", check.name),
            None => check.name,
        };
        Self {
            name,
            pass: check.pass,
            residual: Num(check.residual),
            tolerance: Num(check.tolerance),
            detail: check.detail,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub inputs: BTreeMap<String, Input>,
    pub outputs: Vec<Record>,
    pub checks: Vec<CheckRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunReport {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_owned(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            checks: Vec::new(),
            error: None,
        }
    }

    pub fn input(&mut self, key: &str, value: impl Into<Input>) {
        self.inputs.insert(key.to_owned(), value.into());
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
