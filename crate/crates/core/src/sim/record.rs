use crate::matkit::norm2;

/// One logged instant of a closed-loop run.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub xhat: Vec<f64>,
    /// `H(x, z)`.
    pub xi: Vec<f64>,
    /// `H(x̂, z)`.
    pub xi_hat: Vec<f64>,
    pub v: f64,
    pub proj_active: bool,
    /// A post-step clamp happened since the previous logged sample.
    pub clamped: bool,
    /// Registered Lyapunov function `V(χ)`, if any.
    pub lyapunov: Option<f64>,
}

impl Sample {
    /// Extended state `χ = [x; z]`.
    pub fn chi(&self) -> Vec<f64> {
        let mut c = self.x.clone();
        c.extend_from_slice(&self.z);
        c
    }

    pub fn estimation_error(&self) -> f64 {
        norm2(&diff(&self.xhat, &self.x))
    }
}

pub(crate) fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Time-indexed log of a run, sampled every `log_stride` integration steps.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub state_dim: usize,
    pub chain_len: usize,
    pub samples: Vec<Sample>,
}

impl TrajectoryRecord {
    pub fn new(state_dim: usize, chain_len: usize) -> Self {
        Self { state_dim, chain_len, samples: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    /// Column names in file order.
    pub fn header(&self) -> Vec<String> {
        let (n, m) = (self.state_dim, self.chain_len);
        let mut h = vec!["t".to_string()];
        h.extend((1..=n).map(|i| format!("x{i}")));
        h.extend((1..=m).map(|i| format!("z{i}")));
        h.extend((1..=n).map(|i| format!("xhat{i}")));
        h.extend((1..=n).map(|i| format!("xi{i}")));
        h.extend((1..=n).map(|i| format!("xihat{i}")));
        h.extend(["v", "proj_active", "clamped", "V"].map(String::from));
        h
    }
}
