use crate::error::{Error, Result};

/// Pearson correlation matrix plus the columns that had zero variance.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    pub names: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// Constant columns; their off-diagonal correlations are reported as 0.
    pub degenerate: Vec<usize>,
}

impl CorrelationMatrix {
    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        let i = self.names.iter().position(|n| n == a)?;
        let j = self.names.iter().position(|n| n == b)?;
        Some(self.values[i][j])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (n, row) in self.names.iter().zip(&self.values) {
            out.push_str(n);
            for v in row {
                out.push_str(&format!(",{v:.6}"));
            }
            out.push('\n');
        }
        out
    }
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Correlation between every pair of named columns.
pub fn correlation_matrix(columns: &[(String, Vec<f64>)]) -> Result<CorrelationMatrix> {
    let n = columns.first().map(|(_, c)| c.len()).unwrap_or(0);
    if n < 2 {
        return Err(Error::precondition("correlation_matrix", "need at least 2 samples"));
    }
    if columns
        .iter()
        .any(|(_, c)| c.len() != n || c.iter().any(|v| !v.is_finite()))
    {
        return Err(Error::precondition(
            "correlation_matrix",
            "columns must have equal length and no missing values",
        ));
    }
    let k = columns.len();
    let degenerate: Vec<usize> = (0..k)
        .filter(|&i| {
            let c = &columns[i].1;
            c.iter().all(|&v| v == c[0])
        })
        .collect();
    for &i in &degenerate {
        log::warn!("correlation_matrix: column '{}' is constant", columns[i].0);
    }
    let mut values = vec![vec![0.0; k]; k];
    for i in 0..k {
        values[i][i] = 1.0;
        for j in i + 1..k {
            let r = pearson(&columns[i].1, &columns[j].1).unwrap_or(0.0);
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix {
        names: columns.iter().map(|(n, _)| n.clone()).collect(),
        values,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn col(name: &str, v: Vec<f64>) -> (String, Vec<f64>) {
        (name.to_string(), v)
    }

    #[test]
    fn self_and_negation() {
        let x = vec![1.0, 4.0, 2.0, 8.0];
        let m = correlation_matrix(&[col("x", x.clone()), col("neg", x.iter().map(|v| -v).collect())]).unwrap();
        assert_eq!(m.get("x", "x"), Some(1.0));
        assert!((m.get("x", "neg").unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_column_reported() {
        let m = correlation_matrix(&[col("a", vec![1.0, 2.0, 3.0]), col("c", vec![5.0; 3])]).unwrap();
        assert_eq!(m.degenerate, vec![1]);
        assert_eq!(m.get("a", "c"), Some(0.0));
        assert_eq!(m.get("c", "c"), Some(1.0));
    }

    proptest! {
        #[test]
        fn symmetric_unit_diagonal_bounded(data in prop::collection::vec(prop::collection::vec(-100.0f64..100.0, 8), 2..5)) {
            let cols: Vec<_> = data.into_iter().enumerate().map(|(i, v)| (format!("c{i}"), v)).collect();
            let m = correlation_matrix(&cols).unwrap();
            for i in 0..cols.len() {
                prop_assert_eq!(m.values[i][i], 1.0);
                for j in 0..cols.len() {
                    prop_assert_eq!(m.values[i][j], m.values[j][i]);
                    prop_assert!((-1.0..=1.0).contains(&m.values[i][j]));
                }
            }
        }
    }
}
