use serde::Serialize;

use super::SolverError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct VarId(pub(crate) usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ConstraintId(pub(crate) usize);

impl ConstraintId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
    pub integer: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

/// A linear (or mixed-integer linear) program over bounded variables.
#[derive(Debug, Clone, Serialize)]
pub struct LinearProgram {
    pub sense: Sense,
    pub variables: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    /// Constant added to the objective; makes it easy to report model objectives exactly.
    pub objective_offset: f64,
}

impl LinearProgram {
    pub fn new(sense: Sense) -> Self {
        Self {
            sense,
            variables: Vec::new(),
            constraints: Vec::new(),
            objective_offset: 0.0,
        }
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
            cost,
            integer: false,
        });
        VarId(self.variables.len() - 1)
    }

    pub fn add_binary(&mut self, name: impl Into<String>, cost: f64) -> VarId {
        let id = self.add_var(name, 0.0, 1.0, cost);
        self.variables[id.0].integer = true;
        id
    }

    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: Vec<(VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> ConstraintId {
        self.constraints.push(Constraint {
            name: name.into(),
            terms,
            relation,
            rhs,
        });
        ConstraintId(self.constraints.len() - 1)
    }

    pub fn set_cost(&mut self, var: VarId, cost: f64) {
        self.variables[var.0].cost = cost;
    }

    pub fn set_bounds(&mut self, var: VarId, lower: f64, upper: f64) {
        self.variables[var.0].lower = lower;
        self.variables[var.0].upper = upper;
    }

    pub fn var(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn has_integers(&self) -> bool {
        self.variables.iter().any(|v| v.integer)
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective_offset
            + self
                .variables
                .iter()
                .zip(values)
                .map(|(v, x)| v.cost * x)
                .sum::<f64>()
    }

    /// Row activity `a·x` of each constraint.
    pub fn activities(&self, values: &[f64]) -> Vec<f64> {
        self.constraints
            .iter()
            .map(|c| c.terms.iter().map(|(v, a)| a * values[v.0]).sum())
            .collect()
    }

    /// Largest bound or constraint violation of `values`.
    pub fn primal_residual(&self, values: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &x) in self.variables.iter().zip(values) {
            worst = worst.max(v.lower - x).max(x - v.upper);
        }
        for (c, act) in self.constraints.iter().zip(self.activities(values)) {
            let viol = match c.relation {
                Relation::Le => act - c.rhs,
                Relation::Ge => c.rhs - act,
                Relation::Eq => (act - c.rhs).abs(),
            };
            worst = worst.max(viol);
        }
        worst
    }

    pub(crate) fn validate(&self) -> Result<(), SolverError> {
        for v in &self.variables {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                return Err(SolverError::InvalidProgram(format!(
                    "variable `{}` has bounds [{}, {}]",
                    v.name, v.lower, v.upper
                )));
            }
            if !v.cost.is_finite() {
                return Err(SolverError::InvalidProgram(format!(
                    "variable `{}` has non-finite cost",
                    v.name
                )));
            }
        }
        for c in &self.constraints {
            if !c.rhs.is_finite() {
                return Err(SolverError::InvalidProgram(format!(
                    "constraint `{}` has non-finite rhs",
                    c.name
                )));
            }
            for (v, a) in &c.terms {
                if v.0 >= self.variables.len() {
                    return Err(SolverError::InvalidProgram(format!(
                        "constraint `{}` references undeclared variable {}",
                        c.name, v.0
                    )));
                }
                if !a.is_finite() {
                    return Err(SolverError::InvalidProgram(format!(
                        "constraint `{}` has a non-finite coefficient",
                        c.name
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, Serialize)]
pub struct Solution {
    pub status: Status,
    pub values: Vec<f64>,
    pub objective: f64,
    /// Sensitivity of the optimal objective to each constraint's right-hand side.
    /// `None` for mixed-integer solves.
    pub duals: Option<Vec<f64>>,
    pub iterations: usize,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn value(&self, var: VarId) -> f64 {
        self.values[var.0]
    }

    pub fn dual(&self, c: ConstraintId) -> Option<f64> {
        self.duals.as_ref().map(|d| d[c.0])
    }
}
