use rand::Rng;
use serde::{Deserialize, Serialize};

use super::linear::sigmoid;
use super::Differentiable;
use crate::error::{Error, Result};
use crate::losses::LossValue;
use crate::types::{FeatureVector, RngSeed, Scorer};

/// Fully connected ReLU network with one sigmoid output.
///
/// `weights[l]` is row-major `layer_dims[l + 1] x layer_dims[l]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layer_dims: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

fn check_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(Error::arg("an mlp needs at least input and output layers"));
    }
    if layer_dims.contains(&0) {
        return Err(Error::arg("layer widths must be positive"));
    }
    if *layer_dims.last().unwrap() != 1 {
        return Err(Error::arg("the output layer must have width 1"));
    }
    Ok(())
}

impl MlpModel {
    /// Weights and biases uniform in `+-1/sqrt(fan_in)`.
    pub fn new_random(layer_dims: &[usize], seed: RngSeed) -> Result<Self> {
        check_dims(layer_dims)?;
        let mut rng = seed.rng();
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layer_dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            weights.push((0..fan_in * fan_out).map(|_| rng.random_range(-bound..bound)).collect());
            biases.push((0..fan_out).map(|_| rng.random_range(-bound..bound)).collect());
        }
        Ok(MlpModel {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
        })
    }

    pub fn zeros(layer_dims: &[usize]) -> Result<Self> {
        check_dims(layer_dims)?;
        Ok(MlpModel {
            layer_dims: layer_dims.to_vec(),
            weights: layer_dims.windows(2).map(|w| vec![0.0; w[0] * w[1]]).collect(),
            biases: layer_dims[1..].iter().map(|&d| vec![0.0; d]).collect(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        check_dims(&self.layer_dims)?;
        let layers = self.layer_dims.len() - 1;
        if self.weights.len() != layers || self.biases.len() != layers {
            return Err(Error::arg("layer count does not match layer_dims"));
        }
        for (l, w) in self.layer_dims.windows(2).enumerate() {
            if self.weights[l].len() != w[0] * w[1] || self.biases[l].len() != w[1] {
                return Err(Error::arg(format!("layer {l} has the wrong shape")));
            }
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    /// Pre-activations of every layer, input first.
    fn activations(&self, x: &FeatureVector) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
        if x.dim() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.dim(),
            });
        }
        let last = self.weights.len() - 1;
        let mut acts = vec![x.as_slice().to_vec()];
        let mut pre = Vec::with_capacity(self.weights.len());
        for l in 0..self.weights.len() {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let a = &acts[l];
            let z: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &self.weights[l][o * n_in..(o + 1) * n_in];
                    row.iter().zip(a).map(|(w, v)| w * v).sum::<f64>() + self.biases[l][o]
                })
                .collect();
            let out = if l == last {
                z.iter().map(|&v| sigmoid(v)).collect()
            } else {
                z.iter().map(|&v| v.max(0.0)).collect()
            };
            pre.push(z);
            acts.push(out);
        }
        Ok((acts, pre))
    }

    /// Adds `dscore * d score(x) / d params` into `grad`.
    fn accumulate(&self, x: &FeatureVector, dscore: f64, grad: &mut [f64]) -> Result<()> {
        let (acts, pre) = self.activations(x)?;
        let layers = self.weights.len();
        let s = acts[layers][0];
        let mut delta = vec![dscore * s * (1.0 - s)];
        let offsets = self.offsets();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let (w_off, b_off) = offsets[l];
            for o in 0..n_out {
                let d = delta[o];
                if d == 0.0 {
                    continue;
                }
                for i in 0..n_in {
                    grad[w_off + o * n_in + i] += d * acts[l][i];
                }
                grad[b_off + o] += d;
            }
            if l > 0 {
                let mut next = vec![0.0; n_in];
                for (i, nx) in next.iter_mut().enumerate() {
                    if pre[l - 1][i] <= 0.0 {
                        continue;
                    }
                    *nx = (0..n_out).map(|o| self.weights[l][o * n_in + i] * delta[o]).sum();
                }
                delta = next;
            }
        }
        Ok(())
    }

    /// `(weight_offset, bias_offset)` of each layer in the flat parameter vector.
    fn offsets(&self) -> Vec<(usize, usize)> {
        let mut off = 0;
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| {
                let o = (off, off + w.len());
                off += w.len() + b.len();
                o
            })
            .collect()
    }
}

impl Scorer for MlpModel {
    fn score(&self, x: &FeatureVector) -> f64 {
        mlp_forward(self, x).unwrap_or(f64::NAN)
    }
}

impl Differentiable for MlpModel {
    fn num_params(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            p.extend_from_slice(w);
            p.extend_from_slice(b);
        }
        p
    }

    fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.num_params() {
            return Err(Error::DimensionMismatch {
                expected: self.num_params(),
                got: p.len(),
            });
        }
        let mut off = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let (nw, nb) = (w.len(), b.len());
            w.copy_from_slice(&p[off..off + nw]);
            off += nw;
            b.copy_from_slice(&p[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    fn scores(&self, xs: &[&FeatureVector]) -> Result<Vec<f64>> {
        xs.iter().map(|x| mlp_forward(self, x)).collect()
    }

    fn backward(&self, xs: &[&FeatureVector], dscore: &[f64]) -> Result<Vec<f64>> {
        if xs.len() != dscore.len() {
            return Err(Error::DimensionMismatch {
                expected: xs.len(),
                got: dscore.len(),
            });
        }
        let mut grad = vec![0.0; self.num_params()];
        for (x, &ds) in xs.iter().zip(dscore) {
            self.accumulate(x, ds, &mut grad)?;
        }
        Ok(grad)
    }
}

pub fn mlp_forward(model: &MlpModel, x: &FeatureVector) -> Result<f64> {
    let (acts, _) = model.activations(x)?;
    Ok(acts[acts.len() - 1][0])
}

/// Loss on the batch scores and its exact gradient with respect to the flat
/// parameter vector (layer by layer, weights then biases).
pub fn mlp_backward<F>(model: &MlpModel, batch: &[&FeatureVector], loss_fn: F) -> Result<(LossValue, Vec<f64>)>
where
    F: FnOnce(&[f64]) -> Result<LossValue>,
{
    let scores = model.scores(batch)?;
    let loss = loss_fn(&scores)?;
    let dscore = loss
        .gradient
        .as_ref()
        .ok_or_else(|| Error::arg("loss did not provide a gradient"))?;
    let grad = model.backward(batch, dscore)?;
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::selector_ce_loss;
    use crate::models::linear::{Link, LinearModel};
    use rand::Rng;

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = RngSeed(77).rng();
        for net in 0..20 {
            let m = MlpModel::new_random(&[4, 8, 1], RngSeed(net)).unwrap();
            let xs: Vec<FeatureVector> = (0..6)
                .map(|_| FeatureVector::new((0..4).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap())
                .collect();
            let refs: Vec<_> = xs.iter().collect();
            let z: Vec<f64> = (0..6).map(|_| rng.random::<f64>()).collect();
            let (_, g) = mlp_backward(&m, &refs, |s| selector_ce_loss(s, &z, 3.0)).unwrap();
            let p = m.params();
            let h = 1e-6;
            for k in 0..p.len() {
                let eval = |delta: f64| {
                    let mut q = m.clone();
                    let mut pp = p.clone();
                    pp[k] += delta;
                    q.set_params(&pp).unwrap();
                    selector_ce_loss(&q.scores(&refs).unwrap(), &z, 3.0).unwrap().value
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                let denom = fd.abs().max(g[k].abs()).max(1e-6);
                assert!((fd - g[k]).abs() / denom <= 1e-4, "net {net} param {k}: fd {fd} vs {}", g[k]);
            }
        }
    }

    #[test]
    fn single_layer_is_logistic_regression() {
        let m = MlpModel::new_random(&[3, 1], RngSeed(5)).unwrap();
        let lin = LinearModel {
            weights: m.weights[0].clone(),
            bias: m.biases[0][0],
            link: Link::Sigmoid,
            final_loss: None,
        };
        let mut rng = RngSeed(6).rng();
        for _ in 0..100 {
            let x = FeatureVector::new((0..3).map(|_| rng.random_range(-5.0..5.0)).collect()).unwrap();
            assert!((mlp_forward(&m, &x).unwrap() - lin.score(&x)).abs() <= 1e-12);
        }
    }

    #[test]
    fn duplicated_batch_leaves_mean_gradient_unchanged() {
        let m = MlpModel::new_random(&[2, 5, 3, 1], RngSeed(2)).unwrap();
        let xs = [FeatureVector::new(vec![0.3, -0.7]).unwrap(), FeatureVector::new(vec![1.1, 0.2]).unwrap()];
        let once: Vec<_> = xs.iter().collect();
        let twice: Vec<_> = xs.iter().chain(xs.iter()).collect();
        let z = [1.0, 0.0];
        let zz = [1.0, 0.0, 1.0, 0.0];
        let (l1, g1) = mlp_backward(&m, &once, |s| selector_ce_loss(s, &z, 2.0)).unwrap();
        let (l2, g2) = mlp_backward(&m, &twice, |s| selector_ce_loss(s, &zz, 2.0)).unwrap();
        assert!((l1.value - l2.value).abs() < 1e-12);
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn wrong_input_width_is_an_error() {
        let m = MlpModel::new_random(&[3, 4, 1], RngSeed(0)).unwrap();
        assert!(matches!(
            mlp_forward(&m, &FeatureVector::scalar(1.0)),
            Err(Error::DimensionMismatch { expected: 3, got: 1 })
        ));
    }

    #[test]
    fn shape_checks() {
        assert!(MlpModel::new_random(&[3], RngSeed(0)).is_err());
        assert!(MlpModel::new_random(&[3, 2], RngSeed(0)).is_err());
        let m = MlpModel::zeros(&[2, 3, 1]).unwrap();
        assert_eq!(m.num_params(), 2 * 3 + 3 + 3 + 1);
        m.validate().unwrap();
    }
}
