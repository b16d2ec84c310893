//! Tabular models: an explicit joint probability table over two discrete
//! spaces. They can represent any distribution on their spaces exactly,
//! which is what the optimal-layer constructions and fuzz harnesses need.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{Error, Result};
use crate::metamodel::LogLikEstimate;
use crate::rng::Prng;
use crate::space::Space;

#[derive(Clone, Debug)]
pub struct TabularModel {
    /// joint[v_state, h_state]; entries sum to 1.
    pub joint: Array2<f64>,
    visible: Space,
    hidden: Space,
    visible_marginal: Array1<f64>,
    hidden_marginal: Array1<f64>,
}

impl TabularModel {
    pub fn new(visible: Space, hidden: Space, joint: Array2<f64>) -> Result<Self> {
        let sv = visible
            .state_count()
            .ok_or_else(|| Error::Unsupported("tabular visible space must be discrete".into()))?;
        let sh = hidden
            .state_count()
            .ok_or_else(|| Error::Unsupported("tabular hidden space must be discrete".into()))?;
        if joint.nrows() as u128 != sv || joint.ncols() as u128 != sh {
            return Err(Error::BadParams("joint table shape mismatch".into()));
        }
        if joint.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::BadParams("joint table entries must be >= 0".into()));
        }
        let total = joint.sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::BadParams(format!("joint table sums to {total}, not 1")));
        }
        let visible_marginal = joint.sum_axis(ndarray::Axis(1));
        let hidden_marginal = joint.sum_axis(ndarray::Axis(0));
        Ok(TabularModel {
            joint,
            visible,
            hidden,
            visible_marginal,
            hidden_marginal,
        })
    }

    /// Random strictly-positive table, for fuzzing.
    pub fn random(visible: Space, hidden: Space, rng: &mut Prng) -> Result<Self> {
        use rand::Rng;
        let sv = visible.state_count().unwrap() as usize;
        let sh = hidden.state_count().unwrap() as usize;
        let mut joint = Array2::from_shape_fn((sv, sh), |_| rng.random::<f64>() + 0.05);
        let total = joint.sum();
        joint.mapv_inplace(|p| p / total);
        TabularModel::new(visible, hidden, joint)
    }

    pub fn visible_space(&self) -> Space {
        self.visible
    }

    pub fn hidden_space(&self) -> Space {
        self.hidden
    }

    pub fn visible_states(&self) -> usize {
        self.joint.nrows()
    }

    pub fn hidden_states(&self) -> usize {
        self.joint.ncols()
    }

    pub fn visible_marginal(&self) -> &Array1<f64> {
        &self.visible_marginal
    }

    pub fn hidden_marginal(&self) -> &Array1<f64> {
        &self.hidden_marginal
    }

    /// p(h | v) as a dense row.
    pub fn posterior_row(&self, v_state: usize) -> Array1<f64> {
        let denom = self.visible_marginal[v_state];
        self.joint.row(v_state).mapv(|p| p / denom)
    }

    /// p(v | h) as a dense column.
    pub fn conditional_column(&self, h_state: usize) -> Array1<f64> {
        let denom = self.hidden_marginal[h_state];
        self.joint.column(h_state).mapv(|p| p / denom)
    }

    pub fn log_marginal_visible(&self, v: ArrayView1<f64>) -> Result<LogLikEstimate> {
        let idx = self.visible.state_index(v)?;
        Ok(LogLikEstimate::exact(self.visible_marginal[idx].ln()))
    }

    pub fn log_marginal_hidden(&self, h: ArrayView1<f64>) -> Result<LogLikEstimate> {
        let idx = self.hidden.state_index(h)?;
        Ok(LogLikEstimate::exact(self.hidden_marginal[idx].ln()))
    }

    pub fn sample_posterior(&self, v: ArrayView1<f64>, rng: &mut Prng) -> Result<Array1<f64>> {
        let idx = self.visible.state_index(v)?;
        let probs = self.joint.row(idx);
        let h = super::gmm::sample_categorical(probs, rng);
        Ok(self.hidden.state_point(h))
    }

    pub fn sample_conditional_visible(
        &self,
        h: ArrayView1<f64>,
        rng: &mut Prng,
    ) -> Result<Array1<f64>> {
        let idx = self.hidden.state_index(h)?;
        let probs = self.joint.column(idx).to_owned();
        let v = super::gmm::sample_categorical(probs.view(), rng);
        Ok(self.visible.state_point(v))
    }

    pub fn sample_prior_hidden(&self, rng: &mut Prng) -> Array1<f64> {
        let h = super::gmm::sample_categorical(self.hidden_marginal.view(), rng);
        self.hidden.state_point(h)
    }

    pub fn sample_prior_visible(&self, rng: &mut Prng) -> Array1<f64> {
        let v = super::gmm::sample_categorical(self.visible_marginal.view(), rng);
        self.visible.state_point(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use ndarray::array;

    #[test]
    fn marginals_and_conditionals_are_consistent() {
        let joint = array![[0.1, 0.2], [0.3, 0.05], [0.15, 0.2]];
        let m = TabularModel::new(Space::categorical(3), Space::categorical(2), joint).unwrap();
        assert!((m.visible_marginal().sum() - 1.0).abs() < 1e-12);
        assert!((m.hidden_marginal().sum() - 1.0).abs() < 1e-12);
        for v in 0..3 {
            assert!((m.posterior_row(v).sum() - 1.0).abs() < 1e-12);
        }
        for h in 0..2 {
            assert!((m.conditional_column(h).sum() - 1.0).abs() < 1e-12);
        }
        let est = m.log_marginal_visible(array![1.0].view()).unwrap();
        assert!((est.value - 0.35f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn binary_spaces_enumerate_correctly() {
        let mut rng = seeded(3);
        let m = TabularModel::random(Space::binary(2), Space::binary(1), &mut rng).unwrap();
        assert_eq!(m.visible_states(), 4);
        assert_eq!(m.hidden_states(), 2);
        let total: f64 = (0..4)
            .map(|i| {
                m.log_marginal_visible(Space::binary(2).state_point(i).view())
                    .unwrap()
                    .value
                    .exp()
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn unnormalized_table_is_rejected() {
        let joint = array![[0.5, 0.2], [0.2, 0.2]];
        assert!(TabularModel::new(Space::categorical(2), Space::categorical(2), joint).is_err());
    }
}
