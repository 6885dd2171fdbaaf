//! Linear observability certificates, Gramian reconstruction and the
//! nonlinear log-determinant diagnostic.

mod gramian;
mod hautus;
mod kalman;
mod lie;
mod witness;

pub use gramian::{expm, linear_reconstruct_initial_state, observability_gramian, GRAMIAN_CONDITION_LIMIT};
pub use hautus::{hautus_test, EigenCheck, HautusOutcome, DENSE_LIMIT};
pub use kalman::{kalman_observability_matrix, krylov_observable_rank, rank_test, RankOutcome, DEFAULT_RANK_TOL};
pub use lie::{empirical_lie_logdet, forward_difference_weights, lie_logdet_from_jacobians, LieLogDet};
pub use witness::{annihilation_witness, wave_witness, witness_eigenvalue, WaveWitness};

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// One eigenspace whose image under the output map is (numerically) zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailingMode {
    pub eigenvalue_re: f64,
    pub eigenvalue_im: f64,
    pub multiplicity: usize,
    /// `min ‖h v‖` over unit vectors `v` of the eigenspace.
    pub min_output_norm: f64,
}

/// Combined verdict of the rank and eigenvector tests.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityReport {
    pub state_dim: usize,
    pub rank: Option<usize>,
    pub observable: Option<bool>,
    /// Nonincreasing.
    pub singular_values: Vec<f64>,
    pub failing_eigenvectors: Vec<FailingMode>,
    /// Smallest `min ‖h v‖` over all checked eigenspaces.
    pub min_output_norm: Option<f64>,
    pub eigenspaces_checked: Option<usize>,
    pub eigenspaces_total: Option<usize>,
}

impl ObservabilityReport {
    pub fn with_rank(mut self, r: &RankOutcome) -> Self {
        self.state_dim = r.state_dim;
        self.rank = Some(r.rank);
        self.singular_values = r.singular_values.clone();
        self.observable = Some(r.observable && self.observable.unwrap_or(true));
        self
    }

    pub fn with_hautus(mut self, h: &HautusOutcome) -> Self {
        self.state_dim = h.state_dim;
        self.failing_eigenvectors = h.failing.clone();
        self.min_output_norm = Some(h.min_output_norm);
        self.eigenspaces_checked = Some(h.checked);
        self.eigenspaces_total = Some(h.total);
        self.observable = Some(h.observable() && self.observable.unwrap_or(true));
        self
    }

    /// Line-oriented `key = value` text; arrays are comma separated and
    /// failing modes appear as `failing = re, im, multiplicity, norm`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "state_dim = {}", self.state_dim);
        if let Some(r) = self.rank {
            let _ = writeln!(s, "rank = {r}");
        }
        if let Some(o) = self.observable {
            let _ = writeln!(s, "observable = {o}");
        }
        if let Some(m) = self.min_output_norm {
            let _ = writeln!(s, "min_output_norm = {m:e}");
        }
        if let (Some(c), Some(t)) = (self.eigenspaces_checked, self.eigenspaces_total) {
            let _ = writeln!(s, "eigenspaces_checked = {c}");
            let _ = writeln!(s, "eigenspaces_total = {t}");
        }
        let _ = writeln!(s, "failing_count = {}", self.failing_eigenvectors.len());
        if !self.singular_values.is_empty() {
            let joined: Vec<String> = self.singular_values.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(s, "singular_values = {}", joined.join(", "));
        }
        for f in &self.failing_eigenvectors {
            let _ = writeln!(
                s,
                "failing = {:e}, {:e}, {}, {:e}",
                f.eigenvalue_re, f.eigenvalue_im, f.multiplicity, f.min_output_norm
            );
        }
        s
    }

    /// Inverse of [`to_text`](Self::to_text); unknown keys are ignored.
    pub fn from_text(text: &str) -> Option<Self> {
        let mut r = ObservabilityReport::default();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (key, value) = line.split_once('=')?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "state_dim" => r.state_dim = value.parse().ok()?,
                "rank" => r.rank = Some(value.parse().ok()?),
                "observable" => r.observable = Some(value.parse().ok()?),
                "min_output_norm" => r.min_output_norm = Some(value.parse().ok()?),
                "eigenspaces_checked" => r.eigenspaces_checked = Some(value.parse().ok()?),
                "eigenspaces_total" => r.eigenspaces_total = Some(value.parse().ok()?),
                "singular_values" => {
                    r.singular_values = value
                        .split(',')
                        .map(|v| v.trim().parse())
                        .collect::<std::result::Result<_, _>>()
                        .ok()?
                }
                "failing" => {
                    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                    if parts.len() != 4 {
                        return None;
                    }
                    r.failing_eigenvectors.push(FailingMode {
                        eigenvalue_re: parts[0].parse().ok()?,
                        eigenvalue_im: parts[1].parse().ok()?,
                        multiplicity: parts[2].parse().ok()?,
                        min_output_norm: parts[3].parse().ok()?,
                    });
                }
                _ => {}
            }
        }
        Some(r)
    }
}
