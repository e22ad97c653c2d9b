//! A small fully connected regressor: sigmoid hidden layers, linear output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::featurize;
use crate::belief::{FactoredBelief, Fluent};
use crate::error::{Error, Result};
use crate::scoring::{ScoreFunctionSpec, ScoreSource};

pub const DEFAULT_HIDDEN: [usize; 2] = [100, 50];

/// How initial weights are drawn. Biases start at zero under `Glorot`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Every weight and bias uniform in `[-scale, scale]`.
    Uniform { scale: f64 },
    /// Weights uniform in `[-r, r]` with `r = sqrt(6 / (fan_in + fan_out))`.
    #[default]
    Glorot,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn forward(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.bias.iter().enumerate().map(|(o, b)| {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
        }));
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreModel {
    layers: Vec<Dense>,
    /// Inputs carry a "something was transmitted" bit after the belief change.
    transmit_feature: bool,
    /// Inputs carry a trailing "transmitted last step" bit.
    history_feature: bool,
}

/// One training example: features and target.
pub type Sample = (Vec<f64>, f64);

impl ScoreModel {
    pub fn new(input_dim: usize, hidden: &[usize], init: Init, seed: u64) -> Result<Self> {
        if input_dim == 0 || hidden.contains(&0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let mut l = Dense::zeros(w[0], w[1]);
                match init {
                    Init::Uniform { scale } if scale > 0.0 => {
                        for p in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                            *p = rng.random_range(-scale..=scale);
                        }
                    }
                    Init::Uniform { .. } => {}
                    Init::Glorot => {
                        let r = (6.0 / (w[0] + w[1]) as f64).sqrt();
                        for p in l.weights.iter_mut() {
                            *p = rng.random_range(-r..=r);
                        }
                    }
                }
                l
            })
            .collect();
        Ok(Self {
            layers,
            transmit_feature: false,
            history_feature: false,
        })
    }

    pub fn with_transmit_feature(mut self, on: bool) -> Self {
        self.transmit_feature = on;
        self
    }

    pub fn with_history_feature(mut self, on: bool) -> Self {
        self.history_feature = on;
        self
    }

    pub fn transmit_feature(&self) -> bool {
        self.transmit_feature
    }

    pub fn history_feature(&self) -> bool {
        self.history_feature
    }

    /// Zeroes the output layer, so every prediction starts at 0.
    pub fn zero_output(mut self) -> Self {
        let last = self.layers.last_mut().expect("at least one layer");
        last.weights.iter_mut().for_each(|w| *w = 0.0);
        last.bias.iter_mut().for_each(|b| *b = 0.0);
        self
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                actual: params.len(),
            });
        }
        let mut i = 0;
        for l in &mut self.layers {
            for p in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *p = params[i];
                i += 1;
            }
        }
        Ok(())
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        Ok(())
    }

    /// Activations of every layer, input first.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![x.to_vec()];
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(l.outputs);
            l.forward(acts.last().expect("input"), &mut out);
            if i < last {
                out.iter_mut().for_each(|z| *z = sigmoid(*z));
            }
            acts.push(out);
        }
        acts
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        Ok(self.activations(x).last().expect("output")[0])
    }

    fn l2_norm_sq(&self) -> f64 {
        self.params().iter().map(|p| p * p).sum()
    }

    /// Mean squared error plus `l2 * |params|^2`.
    pub fn loss(&self, batch: &[Sample], l2: f64) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::Config("empty batch".into()));
        }
        let mut mse = 0.0;
        for (x, y) in batch {
            let e = self.predict(x)? - y;
            mse += e * e;
        }
        Ok(mse / batch.len() as f64 + l2 * self.l2_norm_sq())
    }

    /// Loss and its gradient, flattened like [`ScoreModel::params`].
    pub fn loss_and_gradient(&self, batch: &[Sample], l2: f64) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::Config("empty batch".into()));
        }
        let n = batch.len() as f64;
        let mut grads: Vec<Dense> = self.layers.iter().map(|l| Dense::zeros(l.inputs, l.outputs)).collect();
        let mut mse = 0.0;
        for (x, y) in batch {
            self.check(x)?;
            let acts = self.activations(x);
            let e = acts.last().expect("output")[0] - y;
            mse += e * e;
            // delta holds dLoss/dz for the current layer's pre-activations.
            let mut delta = vec![2.0 * e / n];
            for li in (0..self.layers.len()).rev() {
                let layer = &self.layers[li];
                let input = &acts[li];
                let g = &mut grads[li];
                for o in 0..layer.outputs {
                    g.bias[o] += delta[o];
                    let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    for (gw, a) in row.iter_mut().zip(input) {
                        *gw += delta[o] * a;
                    }
                }
                if li > 0 {
                    delta = (0..layer.inputs)
                        .map(|i| {
                            let back: f64 = (0..layer.outputs)
                                .map(|o| layer.weights[o * layer.inputs + i] * delta[o])
                                .sum();
                            let a = input[i];
                            back * a * (1.0 - a)
                        })
                        .collect();
                }
            }
        }
        let mut flat = Vec::with_capacity(self.num_params());
        for (g, l) in grads.iter().zip(&self.layers) {
            flat.extend(g.weights.iter().zip(&l.weights).map(|(g, w)| g + 2.0 * l2 * w));
            flat.extend(g.bias.iter().zip(&l.bias).map(|(g, b)| g + 2.0 * l2 * b));
        }
        Ok((mse / n + l2 * self.l2_norm_sq(), flat))
    }

    /// `params -= lr * gradient`.
    pub fn descend(&mut self, gradient: &[f64], lr: f64) -> Result<()> {
        let next: Vec<f64> = self.params().iter().zip(gradient).map(|(p, g)| p - lr * g).collect();
        self.set_params(&next)
    }

    /// Model inputs for one transmission.
    pub fn features(
        &self,
        before: &FactoredBelief,
        after: &FactoredBelief,
        transmitted: bool,
        prev_transmitted: bool,
    ) -> Result<Vec<f64>> {
        let mut x = featurize(before, after)?;
        if self.transmit_feature {
            x.push(if transmitted { 1.0 } else { 0.0 });
        }
        if self.history_feature {
            x.push(if prev_transmitted { 1.0 } else { 0.0 });
        }
        Ok(x)
    }

    /// Extra inputs appended after the belief-change features.
    pub fn extra_inputs(&self) -> usize {
        usize::from(self.transmit_feature) + usize::from(self.history_feature)
    }
}

impl ScoreSource for ScoreModel {
    fn edge_score(
        &self,
        before: &FactoredBelief,
        after: &FactoredBelief,
        fluent: &Fluent,
        prev_transmitted: bool,
    ) -> Result<f64> {
        self.predict(&self.features(before, after, !fluent.is_null(), prev_transmitted)?)
    }

    fn as_spec(&self) -> Option<&ScoreFunctionSpec> {
        None
    }

    fn uses_history(&self) -> bool {
        self.history_feature
    }
}

/// Least-squares affine fit, used to read off the effective per-entry weights
/// a score is linear in.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearProbe {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearProbe {
    /// Solves the ridge-regularized normal equations.
    pub fn fit(batch: &[Sample], ridge: f64) -> Result<Self> {
        let Some((x0, _)) = batch.first() else {
            return Err(Error::Config("empty batch".into()));
        };
        let d = x0.len() + 1;
        let mut a = vec![vec![0.0; d + 1]; d];
        for (x, y) in batch {
            if x.len() + 1 != d {
                return Err(Error::DimensionMismatch {
                    expected: d - 1,
                    actual: x.len(),
                });
            }
            let row: Vec<f64> = x.iter().copied().chain(std::iter::once(1.0)).collect();
            for i in 0..d {
                for j in 0..d {
                    a[i][j] += row[i] * row[j];
                }
                a[i][d] += row[i] * y;
            }
        }
        for (i, r) in a.iter_mut().enumerate().take(d - 1) {
            r[i] += ridge;
        }
        // Gaussian elimination with partial pivoting.
        for c in 0..d {
            let pivot = (c..d)
                .max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))
                .expect("non-empty");
            if a[pivot][c].abs() < 1e-300 {
                return Err(Error::Config("singular design matrix".into()));
            }
            a.swap(c, pivot);
            for r in 0..d {
                if r != c {
                    let k = a[r][c] / a[c][c];
                    if k != 0.0 {
                        for j in c..=d {
                            a[r][j] -= k * a[c][j];
                        }
                    }
                }
            }
        }
        let sol: Vec<f64> = (0..d).map(|i| a[i][d] / a[i][i]).collect();
        Ok(Self {
            weights: sol[..d - 1].to_vec(),
            bias: sol[d - 1],
        })
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.bias + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}
