use std::fmt::Write as _;

use crate::LpError;

/// Relation between a constraint row's activity and its right-hand side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RowSense {
    Eq,
    Le,
    Ge,
}

impl RowSense {
    fn symbol(self) -> &'static str {
        match self {
            RowSense::Eq => "=",
            RowSense::Le => "<=",
            RowSense::Ge => ">=",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    /// Sparse coefficients as `(variable, value)`. Repeated variables are summed.
    pub coeffs: Vec<(usize, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

/// `min c'x` subject to sparse rows and variable bounds.
///
/// Infinite bounds are expressed with `f64::INFINITY` / `f64::NEG_INFINITY`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<Row>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_var(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.objective.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, sense: RowSense, rhs: f64) -> usize {
        self.rows.push(Row { coeffs, sense, rhs });
        self.rows.len() - 1
    }

    /// Checks dimensions, bound ordering and finiteness of all data.
    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.objective.len();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Dimension(format!(
                "{} objective coefficients but {} lower and {} upper bounds",
                n,
                self.lower.len(),
                self.upper.len()
            )));
        }
        for (j, &c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(LpError::NonFinite(format!("objective coefficient of x{j}")));
            }
        }
        for j in 0..n {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() || l == f64::INFINITY || u == f64::NEG_INFINITY {
                return Err(LpError::NonFinite(format!("bounds of x{j}")));
            }
            if l > u {
                return Err(LpError::Bounds { var: j, lower: l, upper: u });
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(LpError::NonFinite(format!("rhs of row {i}")));
            }
            for &(j, a) in &row.coeffs {
                if j >= n {
                    return Err(LpError::Dimension(format!(
                        "row {i} references x{j} but the program has {n} variables"
                    )));
                }
                if !a.is_finite() {
                    return Err(LpError::NonFinite(format!("coefficient of x{j} in row {i}")));
                }
            }
        }
        Ok(())
    }

    /// Line-oriented dump: one objective line, one line per row, one line per
    /// variable bound. Numbers use the shortest round-trip representation.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("min:");
        for (j, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                let _ = write!(out, " {c:+} x{j}");
            }
        }
        out.push('\n');
        for (i, row) in self.rows.iter().enumerate() {
            let _ = write!(out, "r{i}:");
            for &(j, a) in &row.coeffs {
                let _ = write!(out, " {a:+} x{j}");
            }
            let _ = writeln!(out, " {} {}", row.sense.symbol(), row.rhs);
        }
        for j in 0..self.objective.len() {
            let _ = writeln!(out, "bound x{j}: {} {}", self.lower[j], self.upper[j]);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_dump_lists_every_row_and_bound() {
        let mut lp = LinearProgram::new();
        let a = lp.add_var(20.0, 0.0, 60.0);
        let b = lp.add_var(50.0, 0.0, f64::INFINITY);
        lp.add_row(vec![(a, 1.0), (b, 1.0)], RowSense::Eq, 100.0);
        let text = lp.to_text();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "min: +20 x0 +50 x1");
        assert_eq!(lines[1], "r0: +1 x0 +1 x1 = 100");
        assert_eq!(lines[2], "bound x0: 0 60");
        assert_eq!(lines[3], "bound x1: 0 inf");
    }

    #[test]
    fn validate_rejects_bad_dimensions() {
        let mut lp = LinearProgram::new();
        lp.add_var(1.0, 0.0, 1.0);
        lp.add_row(vec![(3, 1.0)], RowSense::Le, 1.0);
        assert!(matches!(lp.validate(), Err(LpError::Dimension(_))));

        let mut lp = LinearProgram::new();
        lp.add_var(1.0, 2.0, 1.0);
        assert!(matches!(lp.validate(), Err(LpError::Bounds { var: 0, .. })));
    }
}
