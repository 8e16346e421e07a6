use super::{ExtendedGraph, NetworkError};

/// Per-link queue vector **Q** aligned to the extended index order.
///
/// Entries are nonnegative and the supersink entry is always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueSnapshot {
    values: Vec<f64>,
}

impl QueueSnapshot {
    /// Builds a snapshot from queues of the real links; Ω's zero is appended.
    pub fn from_real(graph: &ExtendedGraph, real: &[f64]) -> Result<Self, NetworkError> {
        if real.len() != graph.real_len() {
            return Err(NetworkError::InvalidQueue(format!(
                "expected {} real-link entries, got {}",
                graph.real_len(),
                real.len()
            )));
        }
        let mut values = real.to_vec();
        values.push(0.0);
        Self::from_extended(values)
    }

    /// Accepts a full-length vector whose last entry is the supersink.
    pub fn from_extended(values: Vec<f64>) -> Result<Self, NetworkError> {
        match values.last() {
            None => return Err(NetworkError::InvalidQueue("empty vector".into())),
            Some(&last) if last != 0.0 => {
                return Err(NetworkError::InvalidQueue("supersink queue must be zero".into()))
            }
            _ => {}
        }
        if let Some(i) = values.iter().position(|&q| !(q >= 0.0) || !q.is_finite()) {
            return Err(NetworkError::InvalidQueue(format!("entry {i} is negative or not finite")));
        }
        Ok(Self { values })
    }

    pub fn zeros(len: usize) -> Self {
        Self { values: vec![0.0; len] }
    }

    /// Divides every real-link queue by its length in km (veh/km).
    pub fn density_normalized(&self, graph: &ExtendedGraph) -> Self {
        let mut values = self.values.clone();
        for (i, link) in graph.base().links().iter().enumerate() {
            values[i] /= link.length_m / 1000.0;
        }
        Self { values }
    }

    /// Multiplies every entry by `c >= 0`.
    pub fn scaled(&self, c: f64) -> Self {
        assert!(c >= 0.0, "queue scale must be nonnegative");
        Self { values: self.values.iter().map(|q| q * c).collect() }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::toy;
    use super::*;

    #[test]
    fn appends_supersink_zero() {
        let g = toy();
        let q = QueueSnapshot::from_real(&g, &[1., 1., 1., 1., 1., 0., 1., 0.]).unwrap();
        assert_eq!(q.len(), g.len());
        assert_eq!(q.values()[8], 0.0);
        assert_eq!(q.total(), 6.0);
    }

    #[test]
    fn rejects_bad_vectors() {
        let g = toy();
        assert!(QueueSnapshot::from_real(&g, &[1.0; 3]).is_err());
        assert!(QueueSnapshot::from_extended(vec![1.0, 1.0]).is_err());
        assert!(QueueSnapshot::from_extended(vec![-1.0, 0.0]).is_err());
        assert!(QueueSnapshot::from_extended(vec![]).is_err());
    }

    #[test]
    fn density_divides_by_km() {
        let g = toy();
        let q = QueueSnapshot::from_real(&g, &[3.0; 8]).unwrap().density_normalized(&g);
        assert!((q.get(0) - 10.0).abs() < 1e-12);
        assert_eq!(q.get(8), 0.0);
    }
}
