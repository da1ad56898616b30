//! The projection network, its distance metric, and the triplet objective
//! with analytic gradients.
//!
//! The network is a plain MLP (rectified hidden layers, linear output) over
//! flat `f64` parameter storage, so the optimizer and the finite-difference
//! checks can treat the whole model as one parameter vector.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::selection::{Branch, Triplet};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    /// Hidden layer widths; empty means a single linear map.
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
}

impl ModelConfig {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, output_dim: usize) -> Self {
        ModelConfig {
            input_dim,
            hidden_dims,
            output_dim,
        }
    }

    /// The default projection head: one rectified hidden layer of 256 units
    /// into a 128-dimensional latent space.
    pub fn default_for(input_dim: usize) -> Self {
        ModelConfig::new(input_dim, vec![256], 128)
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::Config("zero model dimension".into()));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::Config("zero hidden width".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LayerSpec {
    in_dim: usize,
    out_dim: usize,
    w_offset: usize,
    b_offset: usize,
    relu: bool,
}

/// MLP projection head with flat parameter storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionModel {
    config: ModelConfig,
    init_seed: u64,
    layers: Vec<LayerSpec>,
    params: Vec<f64>,
}

struct ForwardCache {
    /// Post-activation of every layer; the last entry is the output.
    post: Vec<Vec<f64>>,
    /// Rectifier masks per layer (empty for linear layers).
    active: Vec<Vec<bool>>,
}

impl ProjectionModel {
    fn layout(config: &ModelConfig) -> (Vec<LayerSpec>, usize) {
        let mut layers = Vec::new();
        let mut offset = 0usize;
        let mut in_dim = config.input_dim;
        let widths: Vec<(usize, bool)> = config
            .hidden_dims
            .iter()
            .map(|&h| (h, true))
            .chain(std::iter::once((config.output_dim, false)))
            .collect();
        for (out_dim, relu) in widths {
            layers.push(LayerSpec {
                in_dim,
                out_dim,
                w_offset: offset,
                b_offset: offset + in_dim * out_dim,
                relu,
            });
            offset += in_dim * out_dim + out_dim;
            in_dim = out_dim;
        }
        (layers, offset)
    }

    /// Symmetric uniform initialization scaled by fan-in, seeded.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let (layers, count) = Self::layout(&config);
        let mut params = vec![0.0; count];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for layer in &layers {
            let bound = 1.0 / (layer.in_dim as f64).sqrt();
            for i in 0..layer.in_dim * layer.out_dim {
                params[layer.w_offset + i] = rng.gen_range(-bound..bound);
            }
            for i in 0..layer.out_dim {
                params[layer.b_offset + i] = rng.gen_range(-bound..bound);
            }
        }
        Ok(ProjectionModel {
            config,
            init_seed: seed,
            layers,
            params,
        })
    }

    /// All-zero parameters; output is zero for every input.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let (layers, count) = Self::layout(&config);
        Ok(ProjectionModel {
            config,
            init_seed: 0,
            layers,
            params: vec![0.0; count],
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn output_dim(&self) -> usize {
        self.config.output_dim
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.config.input_dim {
            return Err(Error::Shape(format!(
                "input length {} does not match model input dim {}",
                x.len(),
                self.config.input_dim
            )));
        }
        Ok(())
    }

    /// Project one input vector into the latent space.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut current = x.to_vec();
        for layer in &self.layers {
            current = self.apply_layer(layer, &current).0;
        }
        Ok(current)
    }

    fn layer_preactivations(&self, layer: &LayerSpec, input: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(layer.out_dim);
        for o in 0..layer.out_dim {
            let row = &self.params[layer.w_offset + o * layer.in_dim..][..layer.in_dim];
            let mut sum = self.params[layer.b_offset + o];
            for (w, x) in row.iter().zip(input) {
                sum += w * x;
            }
            out.push(sum);
        }
        out
    }

    fn apply_layer(&self, layer: &LayerSpec, input: &[f64]) -> (Vec<f64>, Vec<bool>) {
        let mut out = self.layer_preactivations(layer, input);
        let mut active = Vec::new();
        if layer.relu {
            active = out.iter().map(|&z| z > 0.0).collect();
            for z in &mut out {
                if *z < 0.0 {
                    *z = 0.0;
                }
            }
        }
        (out, active)
    }

    /// Smallest `|pre-activation|` over all rectified units for this input;
    /// infinite when the model has no hidden layers. Finite-difference
    /// checks use it to keep their probes away from the rectifier kink.
    pub fn hidden_activation_margin(&self, x: &[f64]) -> Result<f64> {
        self.check_input(x)?;
        let mut margin = f64::INFINITY;
        let mut current = x.to_vec();
        for layer in &self.layers {
            let mut out = self.layer_preactivations(layer, &current);
            if layer.relu {
                for z in &mut out {
                    margin = margin.min(z.abs());
                    if *z < 0.0 {
                        *z = 0.0;
                    }
                }
            }
            current = out;
        }
        Ok(margin)
    }

    fn forward_cached(&self, x: &[f64]) -> ForwardCache {
        let mut post = Vec::with_capacity(self.layers.len());
        let mut active = Vec::with_capacity(self.layers.len());
        let mut current = x.to_vec();
        for layer in &self.layers {
            let (out, mask) = self.apply_layer(layer, &current);
            current = out.clone();
            post.push(out);
            active.push(mask);
        }
        ForwardCache { post, active }
    }

    /// Accumulate parameter gradients for one input given the gradient of
    /// the loss with respect to the model output.
    #[allow(clippy::needless_range_loop)]
    fn backprop(&self, x: &[f64], cache: &ForwardCache, out_grad: &[f64], grads: &mut [f64]) {
        let mut delta = out_grad.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let input: &[f64] = if l == 0 { x } else { &cache.post[l - 1] };
            if layer.relu {
                for (d, &on) in delta.iter_mut().zip(&cache.active[l]) {
                    if !on {
                        *d = 0.0;
                    }
                }
            }
            for o in 0..layer.out_dim {
                let d = delta[o];
                if d != 0.0 {
                    let grad_row = &mut grads[layer.w_offset + o * layer.in_dim..][..layer.in_dim];
                    for (g, xv) in grad_row.iter_mut().zip(input) {
                        *g += d * xv;
                    }
                }
                grads[layer.b_offset + o] += d;
            }
            if l > 0 {
                let mut prev = vec![0.0; layer.in_dim];
                for o in 0..layer.out_dim {
                    let d = delta[o];
                    if d != 0.0 {
                        let row = &self.params[layer.w_offset + o * layer.in_dim..][..layer.in_dim];
                        for (p, w) in prev.iter_mut().zip(row) {
                            *p += w * d;
                        }
                    }
                }
                delta = prev;
            }
        }
    }

    /// Write the model as a JSON header plus a flat little-endian `f64`
    /// parameter dump next to it.
    pub fn save(&self, header_path: impl AsRef<Path>) -> Result<()> {
        let header_path = header_path.as_ref();
        let data_name = format!(
            "{}.bin",
            header_path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("model")
        );
        let header = CheckpointHeader {
            format: CHECKPOINT_FORMAT.into(),
            input_dim: self.config.input_dim,
            hidden_dims: self.config.hidden_dims.clone(),
            output_dim: self.config.output_dim,
            init_seed: self.init_seed,
            param_count: self.params.len(),
            data_file: data_name.clone(),
        };
        let json = serde_json::to_string_pretty(&header)
            .map_err(|e| Error::Validation(format!("checkpoint header: {e}")))?;
        std::fs::write(header_path, json).map_err(|e| Error::io(header_path, e))?;

        let data_path = header_path.with_file_name(data_name);
        let file = File::create(&data_path).map_err(|e| Error::io(&data_path, e))?;
        let mut w = BufWriter::new(file);
        for &p in &self.params {
            w.write_all(&p.to_le_bytes())
                .map_err(|e| Error::io(&data_path, e))?;
        }
        w.flush().map_err(|e| Error::io(&data_path, e))?;
        Ok(())
    }

    pub fn load(header_path: impl AsRef<Path>) -> Result<Self> {
        let header_path = header_path.as_ref();
        let json =
            std::fs::read_to_string(header_path).map_err(|e| Error::io(header_path, e))?;
        let header: CheckpointHeader = serde_json::from_str(&json)
            .map_err(|e| Error::Validation(format!("checkpoint header: {e}")))?;
        if header.format != CHECKPOINT_FORMAT {
            return Err(Error::Validation(format!(
                "unsupported checkpoint format '{}'",
                header.format
            )));
        }
        let config = ModelConfig::new(header.input_dim, header.hidden_dims, header.output_dim);
        let (layers, count) = Self::layout(&config);
        if count != header.param_count {
            return Err(Error::Shape(format!(
                "checkpoint declares {} parameters, layout needs {count}",
                header.param_count
            )));
        }
        let data_path = header_path.with_file_name(&header.data_file);
        let mut bytes = Vec::new();
        File::open(&data_path)
            .map_err(|e| Error::io(&data_path, e))?
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io(&data_path, e))?;
        if bytes.len() != count * 8 {
            return Err(Error::Shape(format!(
                "checkpoint data holds {} bytes, expected {}",
                bytes.len(),
                count * 8
            )));
        }
        let params = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(ProjectionModel {
            config,
            init_seed: header.init_seed,
            layers,
            params,
        })
    }
}

const CHECKPOINT_FORMAT: &str = "trimine-model-v1";

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    format: String,
    input_dim: usize,
    hidden_dims: Vec<usize>,
    output_dim: usize,
    init_seed: u64,
    param_count: usize,
    data_file: String,
}

/// Squared Euclidean distance.
pub fn distance(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Shape(format!(
            "distance over lengths {} and {}",
            u.len(),
            v.len()
        )));
    }
    Ok(u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum())
}

/// Branch-weighted triplet hinge loss and its analytic parameter gradients.
///
/// Each branch contributes the mean hinge over its triplets; the total is
/// `weights.0 * class_mean + weights.1 * box_mean`, with an empty branch
/// counting as zero. Triplets whose hinge is inactive contribute neither
/// loss nor gradient, and a branch with weight exactly zero is skipped
/// entirely so the other branch's result is reproduced bit-for-bit.
pub fn loss_and_gradients(
    model: &ProjectionModel,
    triplets: &[Triplet],
    inputs: &[&[f64]],
    margin: f64,
    branch_weights: (f64, f64),
) -> Result<(f64, Vec<f64>)> {
    if margin <= 0.0 || !margin.is_finite() {
        return Err(Error::Config(format!("margin must be positive, got {margin}")));
    }
    let mut grads = vec![0.0; model.param_count()];
    if triplets.is_empty() {
        log::warn!("empty triplet list; loss and gradients are zero");
        return Ok((0.0, grads));
    }

    let class_count = triplets.iter().filter(|t| t.branch == Branch::Class).count();
    let box_count = triplets.len() - class_count;
    let mut class_sum = 0.0;
    let mut box_sum = 0.0;

    for t in triplets {
        let (weight, count) = match t.branch {
            Branch::Class => (branch_weights.0, class_count),
            Branch::Box => (branch_weights.1, box_count),
        };
        let xa = inputs[t.anchor];
        let xp = inputs[t.positive];
        let xn = inputs[t.negative];
        let ca = model.forward_cached(xa);
        let cp = model.forward_cached(xp);
        let cn = model.forward_cached(xn);
        let fa = ca.post.last().unwrap();
        let fp = cp.post.last().unwrap();
        let fnn = cn.post.last().unwrap();
        let d_ap = distance(fa, fp)?;
        let d_an = distance(fa, fnn)?;
        let violation = d_ap - d_an + margin;
        if violation <= 0.0 {
            continue;
        }
        match t.branch {
            Branch::Class => class_sum += violation,
            Branch::Box => box_sum += violation,
        }
        if weight == 0.0 {
            continue;
        }
        let coeff = weight / count as f64;
        let k = fa.len();
        let mut g_a = Vec::with_capacity(k);
        let mut g_p = Vec::with_capacity(k);
        let mut g_n = Vec::with_capacity(k);
        for j in 0..k {
            g_a.push(coeff * 2.0 * (fnn[j] - fp[j]));
            g_p.push(coeff * -2.0 * (fa[j] - fp[j]));
            g_n.push(coeff * 2.0 * (fa[j] - fnn[j]));
        }
        model.backprop(xa, &ca, &g_a, &mut grads);
        model.backprop(xp, &cp, &g_p, &mut grads);
        model.backprop(xn, &cn, &g_n, &mut grads);
    }

    let class_mean = if class_count > 0 {
        class_sum / class_count as f64
    } else {
        0.0
    };
    let box_mean = if box_count > 0 {
        box_sum / box_count as f64
    } else {
        0.0
    };
    let loss = branch_weights.0 * class_mean + branch_weights.1 * box_mean;
    Ok((loss, grads))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triplet(a: usize, p: usize, n: usize) -> Triplet {
        Triplet {
            anchor: a,
            positive: p,
            negative: n,
            branch: Branch::Class,
        }
    }

    #[test]
    fn zero_model_maps_to_zero() {
        let model = ProjectionModel::zeros(ModelConfig::new(3, vec![4], 2)).unwrap();
        assert_eq!(model.forward(&[1.0, -2.0, 0.5]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_weights_without_hidden_layer_pass_input_through() {
        let mut model = ProjectionModel::zeros(ModelConfig::new(3, vec![], 3)).unwrap();
        for i in 0..3 {
            model.params_mut()[i * 3 + i] = 1.0;
        }
        let x = vec![0.25, -1.5, 3.0];
        assert_eq!(model.forward(&x).unwrap(), x);
    }

    #[test]
    fn forward_matches_hand_matrix_arithmetic() {
        // 3 -> 2 linear model checked against an explicit matrix product.
        let mut model = ProjectionModel::zeros(ModelConfig::new(3, vec![], 2)).unwrap();
        let w = [[0.5, -1.0, 2.0], [1.5, 0.25, -0.5]];
        let b = [0.1, -0.2];
        for (o, row) in w.iter().enumerate() {
            for (i, &v) in row.iter().enumerate() {
                model.params_mut()[o * 3 + i] = v;
            }
        }
        for (o, &v) in b.iter().enumerate() {
            model.params_mut()[6 + o] = v;
        }
        let x = [2.0, -1.0, 0.5];
        let expected: Vec<f64> = (0..2)
            .map(|o| b[o] + (0..3).map(|i| w[o][i] * x[i]).sum::<f64>())
            .collect();
        assert_eq!(model.forward(&x).unwrap(), expected);
    }

    #[test]
    fn forward_rejects_wrong_input_length() {
        let model = ProjectionModel::zeros(ModelConfig::new(3, vec![], 2)).unwrap();
        assert!(model.forward(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn distance_basics() {
        assert_eq!(distance(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(distance(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 25.0);
        let u = [0.3, -1.2, 0.8];
        let v = [2.0, 0.5, -0.25];
        assert_eq!(distance(&u, &v).unwrap(), distance(&v, &u).unwrap());
        assert!(distance(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn inactive_hinge_gives_zero_loss_and_gradient() {
        // Identity projection on 1-D points: d(a,p) = 1, d(a,n) = 4, margin 0.5.
        let mut model = ProjectionModel::zeros(ModelConfig::new(1, vec![], 1)).unwrap();
        model.params_mut()[0] = 1.0;
        let inputs: Vec<Vec<f64>> = vec![vec![0.0], vec![1.0], vec![2.0]];
        let refs: Vec<&[f64]> = inputs.iter().map(|v| v.as_slice()).collect();
        let (loss, grads) =
            loss_and_gradients(&model, &[triplet(0, 1, 2)], &refs, 0.5, (1.0, 0.0)).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn active_hinge_value_matches_hand_evaluation() {
        // d(a,p) = 2 (sqrt 2 apart), d(a,n) = 1, margin 0.5 -> loss 1.5.
        let mut model = ProjectionModel::zeros(ModelConfig::new(2, vec![], 2)).unwrap();
        model.params_mut()[0] = 1.0;
        model.params_mut()[3] = 1.0;
        let inputs: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![1.0, 0.0]];
        let refs: Vec<&[f64]> = inputs.iter().map(|v| v.as_slice()).collect();
        let (loss, _) =
            loss_and_gradients(&model, &[triplet(0, 1, 2)], &refs, 0.5, (1.0, 0.0)).unwrap();
        assert!((loss - 1.5).abs() < 1e-12);
    }

    #[test]
    fn empty_triplet_list_is_zero() {
        let model = ProjectionModel::new(ModelConfig::new(2, vec![3], 2), 0).unwrap();
        let (loss, grads) = loss_and_gradients(&model, &[], &[], 1.0, (1.0, 0.0)).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.iter().all(|&g| g == 0.0));
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn gradients_match_central_finite_differences() {
        let mut model = ProjectionModel::new(ModelConfig::new(4, vec![5], 3), 21).unwrap();
        let mut rng_state = 123u64;
        let mut next = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((rng_state >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        let inputs: Vec<Vec<f64>> = (0..6).map(|_| (0..4).map(|_| next() * 2.0).collect()).collect();
        let refs: Vec<&[f64]> = inputs.iter().map(|v| v.as_slice()).collect();
        let triplets = vec![
            triplet(0, 1, 2),
            triplet(3, 4, 5),
            triplet(1, 0, 4),
            Triplet { anchor: 2, positive: 5, negative: 0, branch: Branch::Box },
            Triplet { anchor: 4, positive: 3, negative: 1, branch: Branch::Box },
        ];
        let weights = (0.6, 0.4);
        let margin = 1.0;
        let (_, analytic) =
            loss_and_gradients(&model, &triplets, &refs, margin, weights).unwrap();
        let h = 1e-5;
        for idx in 0..model.param_count() {
            let orig = model.params()[idx];
            model.params_mut()[idx] = orig + h;
            let (plus, _) = loss_and_gradients(&model, &triplets, &refs, margin, weights).unwrap();
            model.params_mut()[idx] = orig - h;
            let (minus, _) = loss_and_gradients(&model, &triplets, &refs, margin, weights).unwrap();
            model.params_mut()[idx] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let tol = 1e-4 * numeric.abs().max(analytic[idx].abs()).max(1e-3);
            assert!(
                (numeric - analytic[idx]).abs() <= tol,
                "param {idx}: numeric {numeric} vs analytic {}",
                analytic[idx]
            );
        }
    }

    #[test]
    fn checkpoint_round_trips_bit_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let model = ProjectionModel::new(ModelConfig::new(5, vec![7, 3], 2), 99).unwrap();
        let path = dir.path().join("model.json");
        model.save(&path).unwrap();
        let loaded = ProjectionModel::load(&path).unwrap();
        assert_eq!(model, loaded);
    }

    #[test]
    fn init_is_deterministic_per_seed() {
        let cfg = ModelConfig::new(4, vec![8], 3);
        let a = ProjectionModel::new(cfg.clone(), 5).unwrap();
        let b = ProjectionModel::new(cfg.clone(), 5).unwrap();
        let c = ProjectionModel::new(cfg, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
