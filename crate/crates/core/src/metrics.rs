use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Confusion matrix, `counts[truth][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub counts: Vec<Vec<usize>>,
}

impl Confusion {
    pub fn new(class_count: usize) -> Self {
        Self {
            counts: vec![vec![0; class_count]; class_count],
        }
    }

    pub fn from_pairs(class_count: usize, truth: &[usize], predicted: &[usize]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::param("truth and prediction lengths differ"));
        }
        let mut m = Self::new(class_count);
        for (&t, &p) in truth.iter().zip(predicted) {
            m.record(t, p)?;
        }
        Ok(m)
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<()> {
        let k = self.class_count();
        if truth >= k || predicted >= k {
            return Err(Error::param(format!("class index out of range for {k} classes")));
        }
        self.counts[truth][predicted] += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &Confusion) -> Result<()> {
        if other.class_count() != self.class_count() {
            return Err(Error::param("confusion matrices differ in class count"));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn class_count(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> usize {
        (0..self.class_count()).map(|i| self.counts[i][i]).sum()
    }

    /// `correct / total`; 0 when empty.
    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            0.0
        } else {
            self.correct() as f64 / total as f64
        }
    }

    /// Recall per true class; `NaN` for classes with no samples.
    pub fn per_class_accuracy(&self) -> Vec<f64> {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let n: usize = row.iter().sum();
                if n == 0 {
                    f64::NAN
                } else {
                    row[i] as f64 / n as f64
                }
            })
            .collect()
    }
}

/// Mean and standard error of the mean (sample standard deviation over √n).
pub fn mean_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_rates() {
        let m = Confusion::from_pairs(3, &[0, 0, 1, 1, 2, 2], &[0, 1, 1, 1, 0, 2]).unwrap();
        assert_eq!(m.total(), 6);
        assert_eq!(m.correct(), 4);
        assert!((m.accuracy() - 4.0 / 6.0).abs() < 1e-15);
        assert_eq!(m.per_class_accuracy(), vec![0.5, 1.0, 0.5]);
        assert!(Confusion::from_pairs(2, &[0], &[2]).is_err());
    }

    #[test]
    fn merge_adds() {
        let mut a = Confusion::from_pairs(2, &[0, 1], &[0, 0]).unwrap();
        a.merge(&Confusion::from_pairs(2, &[1], &[1]).unwrap()).unwrap();
        assert_eq!(a.counts, vec![vec![1, 0], vec![1, 1]]);
    }

    #[test]
    fn sem_of_known_values() {
        let (m, s) = mean_sem(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        // sd = sqrt(5/3), sem = sd / 2
        assert!((s - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-15);
        assert_eq!(mean_sem(&[7.0]), (7.0, 0.0));
    }
}
