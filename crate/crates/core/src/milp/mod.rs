//! Mixed-integer linear model IR shared by every builder.
//!
//! Models are minimizations over continuous and binary columns. Variable
//! names carry semantic identity (`x[f,t]`, `y[xi,t]`, `beta[s]`, ...) so
//! consumers look variables up by name instead of by position.

mod mps;

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mps::export_mps;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("variable {name}: lower bound {lower} exceeds upper bound {upper}")]
    InvalidBounds { name: String, lower: f64, upper: f64 },
    #[error("binary variable {0} must have bounds within [0, 1]")]
    BinaryBounds(String),
    #[error("duplicate variable name {0}")]
    DuplicateName(String),
    #[error("{context}: reference to variable #{index} but model has {count} variables")]
    DanglingRef {
        context: String,
        index: usize,
        count: usize,
    },
    #[error("{context}: variable #{index} appears more than once")]
    DuplicateTerm { context: String, index: usize },
    #[error("{context}: non-finite coefficient or right-hand side")]
    NonFinite { context: String },
}

/// Dense handle to a model column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarRef(pub usize);

impl VarRef {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConstraintId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableDef {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

impl VariableDef {
    pub fn binary(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            lower: 0.0,
            upper: 1.0,
            kind: VarKind::Binary,
        }
    }

    pub fn continuous(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            lower,
            upper,
            kind: VarKind::Continuous,
        }
    }

    pub fn nonnegative(name: impl Into<String>) -> Self {
        Self::continuous(name, 0.0, f64::INFINITY)
    }

    pub fn free(name: impl Into<String>) -> Self {
        Self::continuous(name, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn is_binary(&self) -> bool {
        self.kind == VarKind::Binary
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
}

impl fmt::Display for Sense {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub name: String,
    pub terms: Vec<(VarRef, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn new(name: impl Into<String>, terms: Vec<(VarRef, f64)>, sense: Sense, rhs: f64) -> Self {
        Self {
            name: name.into(),
            terms,
            sense,
            rhs,
        }
    }

    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|(v, a)| a * values[v.0]).sum()
    }

    /// Amount by which `values` violates the row (0 when satisfied).
    pub fn violation(&self, values: &[f64]) -> f64 {
        let lhs = self.activity(values);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MilpModel {
    pub name: String,
    variables: Vec<VariableDef>,
    constraints: Vec<LinearConstraint>,
    objective: Vec<(VarRef, f64)>,
    objective_constant: f64,
    by_name: HashMap<String, VarRef>,
}

fn check_terms(context: &str, terms: &[(VarRef, f64)], count: usize) -> Result<(), ModelError> {
    let mut seen = HashSet::with_capacity(terms.len());
    for (v, a) in terms {
        if v.0 >= count {
            return Err(ModelError::DanglingRef {
                context: context.to_string(),
                index: v.0,
                count,
            });
        }
        if !seen.insert(v.0) {
            return Err(ModelError::DuplicateTerm {
                context: context.to_string(),
                index: v.0,
            });
        }
        if !a.is_finite() {
            return Err(ModelError::NonFinite {
                context: context.to_string(),
            });
        }
    }
    Ok(())
}

impl MilpModel {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Default::default()
        }
    }

    pub fn add_variable(&mut self, def: VariableDef) -> Result<VarRef, ModelError> {
        if def.lower.is_nan()
            || def.upper.is_nan()
            || def.lower > def.upper
            || def.lower == f64::INFINITY
            || def.upper == f64::NEG_INFINITY
        {
            return Err(ModelError::InvalidBounds {
                name: def.name,
                lower: def.lower,
                upper: def.upper,
            });
        }
        if def.is_binary() && (def.lower < 0.0 || def.upper > 1.0) {
            return Err(ModelError::BinaryBounds(def.name));
        }
        if self.by_name.contains_key(&def.name) {
            return Err(ModelError::DuplicateName(def.name));
        }
        let r = VarRef(self.variables.len());
        self.by_name.insert(def.name.clone(), r);
        self.variables.push(def);
        Ok(r)
    }

    pub fn add_constraint(&mut self, c: LinearConstraint) -> Result<ConstraintId, ModelError> {
        check_terms(&c.name, &c.terms, self.variables.len())?;
        if !c.rhs.is_finite() {
            return Err(ModelError::NonFinite { context: c.name });
        }
        self.constraints.push(c);
        Ok(ConstraintId(self.constraints.len() - 1))
    }

    /// Replaces the objective `sum coef * var + constant` (minimized).
    pub fn set_objective(&mut self, terms: Vec<(VarRef, f64)>, constant: f64) -> Result<(), ModelError> {
        check_terms("objective", &terms, self.variables.len())?;
        if !constant.is_finite() {
            return Err(ModelError::NonFinite {
                context: "objective".into(),
            });
        }
        self.objective = terms;
        self.objective_constant = constant;
        Ok(())
    }

    pub fn variables(&self) -> &[VariableDef] {
        &self.variables
    }

    pub fn variable(&self, v: VarRef) -> &VariableDef {
        &self.variables[v.0]
    }

    pub fn constraints(&self) -> &[LinearConstraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[(VarRef, f64)] {
        &self.objective
    }

    pub fn objective_constant(&self) -> f64 {
        self.objective_constant
    }

    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.variables.iter().filter(|v| v.is_binary()).count()
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarRef> {
        self.by_name.get(name).copied()
    }

    /// Dense objective coefficients.
    pub fn cost_vector(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.variables.len()];
        for (v, a) in &self.objective {
            c[v.0] += a;
        }
        c
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective_constant + self.objective.iter().map(|(v, a)| a * values[v.0]).sum::<f64>()
    }

    /// Every row or bound violated by more than `tol`, as `(label, amount)`.
    pub fn violations(&self, values: &[f64], tol: f64) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for (def, x) in self.variables.iter().zip(values) {
            let amount = (def.lower - x).max(x - def.upper).max(0.0);
            if amount > tol {
                out.push((format!("bound {}", def.name), amount));
            }
        }
        for c in &self.constraints {
            let amount = c.violation(values);
            if amount > tol {
                out.push((c.name.clone(), amount));
            }
        }
        out
    }
}
