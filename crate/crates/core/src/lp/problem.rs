use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `min cᵀx` subject to row constraints and `x ≥ 0`. Free variables are
/// expressed by the caller as a difference of two non-negative columns.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    objective: Vec<f64>,
    constraints: Vec<Constraint>,
}

impl LpProblem {
    pub fn new(objective: Vec<f64>) -> Self {
        Self {
            objective,
            constraints: Vec::new(),
        }
    }

    /// Builds and validates a problem from a dense matrix.
    pub fn from_dense(
        objective: Vec<f64>,
        a: Vec<Vec<f64>>,
        relations: Vec<Relation>,
        rhs: Vec<f64>,
    ) -> Result<Self> {
        if a.len() != relations.len() || a.len() != rhs.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows, {} relations, {} right-hand sides",
                a.len(),
                relations.len(),
                rhs.len()
            )));
        }
        let constraints = a
            .into_iter()
            .zip(relations)
            .zip(rhs)
            .map(|((coeffs, relation), rhs)| Constraint {
                coeffs,
                relation,
                rhs,
            })
            .collect();
        let p = Self {
            objective,
            constraints,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) {
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.objective.len();
        if n == 0 {
            return Err(Error::DimensionMismatch(
                "objective has no variables".into(),
            ));
        }
        if let Some(j) = self.objective.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFiniteCoefficient(format!("objective[{j}]")));
        }
        for (i, row) in self.constraints.iter().enumerate() {
            if row.coeffs.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} coefficients, objective has {n}",
                    row.coeffs.len()
                )));
            }
            if let Some(j) = row.coeffs.iter().position(|c| !c.is_finite()) {
                return Err(Error::NonFiniteCoefficient(format!("row {i}, column {j}")));
            }
            if !row.rhs.is_finite() {
                return Err(Error::NonFiniteCoefficient(format!("rhs[{i}]")));
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of any row or non-negativity bound at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = x.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max);
        for row in &self.constraints {
            let lhs: f64 = row.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            let v = match row.relation {
                Relation::Le => lhs - row.rhs,
                Relation::Ge => row.rhs - lhs,
                Relation::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }

    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.num_vars() && self.max_violation(x) <= tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Unbounded,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Pivots performed over both phases.
    pub iterations: usize,
    /// Reduced costs of the structural columns at termination.
    pub reduced_costs: Vec<f64>,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}
