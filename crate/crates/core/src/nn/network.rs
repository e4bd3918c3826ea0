use std::borrow::Borrow;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{binary_cross_entropy, squared_error};
use super::spec::{Activation, HeadKind, ModelSpec};
use super::tensor::{affine, affine_backward, Tensor};
use crate::error::{contract, domain, Error, Result};
use crate::features::{FeatureVector, ModelInput};
use crate::survival::{
    loss_weight, negative_log_likelihood, nll_logit_grad, EventLabels, HazardVector, LossWeighting,
    WeightMode, EPS,
};

/// Learnable parameters plus Adam moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub names: Vec<String>,
    pub params: Vec<Tensor>,
    pub first_moment: Vec<Tensor>,
    pub second_moment: Vec<Tensor>,
    pub step: u64,
}

impl ModelState {
    pub fn param(&self, name: &str) -> Option<&Tensor> {
        self.names.iter().position(|n| n == name).map(|i| &self.params[i])
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.names.iter().position(|n| n == name).map(move |i| &mut self.params[i])
    }

    pub fn zero_like(&self) -> Gradients {
        Gradients(self.params.iter().map(|p| Tensor::zeros(&p.shape)).collect())
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }
}

/// One gradient tensor per parameter, in parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Tensor>);

impl Gradients {
    pub fn scale(&mut self, k: f64) {
        for t in &mut self.0 {
            t.data.iter_mut().for_each(|g| *g *= k);
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().flat_map(|t| t.data.iter()).fold(0.0f64, |m, g| m.max(g.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(Tensor::is_finite)
    }
}

/// Supervision for one head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum HeadTarget {
    Hazard(EventLabels),
    Binary(f64),
    Regression(f64),
}

/// A training record: inputs, one target per head, and the weighting ratios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub id: String,
    pub input: ModelInput,
    pub targets: Vec<HeadTarget>,
    pub ctr: f64,
    pub impression_ratio: f64,
}

impl Example {
    pub fn weight(&self, mode: WeightMode) -> Result<f64> {
        let ratio = match mode {
            WeightMode::None => 0.0,
            WeightMode::Ctr => self.ctr,
            WeightMode::Impression => self.impression_ratio,
        };
        loss_weight(ratio, mode)
    }
}

#[derive(Debug, Clone)]
struct Layout {
    genre: usize,
    rnn: Option<(usize, usize, usize)>,
    trunk: Vec<(usize, usize)>,
    heads: Vec<(usize, usize)>,
    // Offsets of the five blocks inside the trunk input.
    offsets: [usize; 6],
}

#[derive(Debug, Default)]
struct Cache {
    x0: Vec<f64>,
    rnn_h: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    head_z: Vec<Vec<f64>>,
    head_out: Vec<Vec<f64>>,
}

/// Dense trunk with categorical embedding and recurrent series encoder.
#[derive(Debug, Clone)]
pub struct Network {
    spec: ModelSpec,
    layout: Layout,
    shapes: Vec<(String, Vec<usize>)>,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Network {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let inp = &spec.input;
        let mut shapes: Vec<(String, Vec<usize>)> = Vec::new();
        let mut push = |name: String, shape: Vec<usize>| {
            shapes.push((name, shape));
            shapes.len() - 1
        };
        let genre = push("genre.embedding".into(), vec![inp.genre_cardinality, inp.genre_dim]);
        let rnn = if inp.mask.series {
            let wx = push("rnn.w_input".into(), vec![inp.series_hidden, inp.series_input]);
            let wh = push("rnn.w_hidden".into(), vec![inp.series_hidden, inp.series_hidden]);
            let b = push("rnn.bias".into(), vec![inp.series_hidden]);
            Some((wx, wh, b))
        } else {
            None
        };
        let mut fan_in = inp.width();
        let mut trunk = Vec::new();
        for (i, layer) in spec.trunk.iter().enumerate() {
            let w = push(format!("trunk.{i}.weight"), vec![layer.width, fan_in]);
            let b = push(format!("trunk.{i}.bias"), vec![layer.width]);
            trunk.push((w, b));
            fan_in = layer.width;
        }
        let mut heads = Vec::new();
        for head in &spec.heads {
            let w = push(format!("head.{}.weight", head.name), vec![head.width(), fan_in]);
            let b = push(format!("head.{}.bias", head.name), vec![head.width()]);
            heads.push((w, b));
        }
        let widths = inp.block_widths();
        let mut offsets = [0usize; 6];
        for i in 0..5 {
            offsets[i + 1] = offsets[i] + widths[i];
        }
        Ok(Self { spec, layout: Layout { genre, rnn, trunk, heads, offsets }, shapes })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn input_width(&self) -> usize {
        self.layout.offsets[5]
    }

    /// Glorot-uniform weights from the seeded generator, zero biases, zero moments.
    pub fn init_state(&self, seed: u64) -> ModelState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::with_capacity(self.shapes.len());
        for (name, shape) in &self.shapes {
            let mut t = Tensor::zeros(shape);
            if shape.len() == 2 {
                let limit = (6.0 / (shape[0] + shape[1]) as f64).sqrt();
                for v in &mut t.data {
                    *v = rng.random_range(-limit..=limit);
                }
            } else {
                debug_assert!(name.ends_with("bias"));
            }
            params.push(t);
        }
        let zeros: Vec<Tensor> = params.iter().map(|p| Tensor::zeros(&p.shape)).collect();
        ModelState {
            names: self.shapes.iter().map(|(n, _)| n.clone()).collect(),
            params,
            first_moment: zeros.clone(),
            second_moment: zeros,
            step: 0,
        }
    }

    /// Checks that a state was built for this architecture.
    pub fn check_state(&self, state: &ModelState) -> Result<()> {
        if state.params.len() != self.shapes.len() {
            return contract(format!(
                "state has {} tensors, architecture expects {}",
                state.params.len(),
                self.shapes.len()
            ));
        }
        for ((name, shape), (sn, p)) in self.shapes.iter().zip(state.names.iter().zip(&state.params)) {
            if name != sn || shape != &p.shape {
                return contract(format!("tensor {sn} {:?} does not match {name} {shape:?}", p.shape));
            }
        }
        Ok(())
    }

    /// Final hidden state of the tanh Elman cell over `series`.
    pub fn recurrent_encode(&self, state: &ModelState, series: &[[f64; 2]]) -> Result<Vec<f64>> {
        if series.is_empty() {
            return domain("recurrent encoder needs a non-empty series");
        }
        let mut hs = Vec::new();
        self.run_rnn(state, series, &mut hs)?;
        Ok(hs.pop().unwrap_or_default())
    }

    fn run_rnn(&self, state: &ModelState, series: &[[f64; 2]], hs: &mut Vec<Vec<f64>>) -> Result<()> {
        let Some((wx, wh, b)) = self.layout.rnn else {
            return contract("model has no recurrent encoder");
        };
        let (wx, wh, b) = (&state.params[wx], &state.params[wh], &state.params[b]);
        if wx.shape[1] != 2 {
            return contract("recurrent input width must be 2");
        }
        let hidden = wh.shape[0];
        let mut prev = vec![0.0; hidden];
        let mut zx = Vec::with_capacity(hidden);
        for step in series {
            affine(wx, b, step, &mut zx);
            let h: Vec<f64> = (0..hidden)
                .map(|r| {
                    let rec: f64 = wh.row(r).iter().zip(&prev).map(|(w, p)| w * p).sum();
                    (zx[r] + rec).tanh()
                })
                .collect();
            prev.clone_from(&h);
            hs.push(h);
        }
        Ok(())
    }

    fn build_input(&self, state: &ModelState, input: &ModelInput, cache: &mut Cache) -> Result<()> {
        let spec = &self.spec.input;
        let m = spec.mask;
        let x = &mut cache.x0;
        x.clear();
        if m.text {
            if input.text.len() != spec.text_dim {
                return contract(format!("text block width {} != {}", input.text.len(), spec.text_dim));
            }
            x.extend_from_slice(&input.text);
        }
        x.extend_from_slice(&input.gender.one_hot());
        if input.genre >= spec.genre_cardinality {
            return contract(format!("genre index {} outside table of {}", input.genre, spec.genre_cardinality));
        }
        x.extend_from_slice(state.params[self.layout.genre].row(input.genre));
        if m.image {
            if input.image.len() != spec.image_dim {
                return contract(format!("image block width {} != {}", input.image.len(), spec.image_dim));
            }
            x.extend_from_slice(&input.image);
        }
        if m.stats {
            x.extend_from_slice(&input.stats);
        }
        cache.rnn_h.clear();
        if m.series {
            if input.series.is_empty() {
                x.extend(std::iter::repeat_n(0.0, spec.series_hidden));
            } else {
                let mut hs = std::mem::take(&mut cache.rnn_h);
                self.run_rnn(state, &input.series, &mut hs)?;
                x.extend_from_slice(hs.last().expect("non-empty series"));
                cache.rnn_h = hs;
            }
        }
        if x.len() != self.input_width() {
            return contract(format!("assembled width {} != trunk input {}", x.len(), self.input_width()));
        }
        Ok(())
    }

    fn forward_cached(&self, state: &ModelState, input: &ModelInput, cache: &mut Cache) -> Result<()> {
        self.build_input(state, input, cache)?;
        cache.pre.resize(self.spec.trunk.len(), Vec::new());
        cache.post.resize(self.spec.trunk.len(), Vec::new());
        for (i, (layer, &(w, b))) in self.spec.trunk.iter().zip(&self.layout.trunk).enumerate() {
            let (before, after) = cache.post.split_at_mut(i);
            let x = if i == 0 { &cache.x0 } else { &before[i - 1] };
            affine(&state.params[w], &state.params[b], x, &mut cache.pre[i]);
            let out = &mut after[0];
            out.clear();
            out.extend(cache.pre[i].iter().map(|&z| layer.activation.apply(z)));
        }
        let last = cache.post.last().unwrap_or(&cache.x0);
        cache.head_z.resize(self.spec.heads.len(), Vec::new());
        cache.head_out.resize(self.spec.heads.len(), Vec::new());
        for (j, (head, &(w, b))) in self.spec.heads.iter().zip(&self.layout.heads).enumerate() {
            affine(&state.params[w], &state.params[b], last, &mut cache.head_z[j]);
            let out = &mut cache.head_out[j];
            out.clear();
            match head.kind {
                HeadKind::Hazard { .. } | HeadKind::Binary => {
                    out.extend(cache.head_z[j].iter().map(|&z| sigmoid(z)))
                }
                HeadKind::Regression => out.extend_from_slice(&cache.head_z[j]),
            }
            if !out.iter().all(|v| v.is_finite()) {
                return Err(Error::Divergence { epoch: 0, detail: "non-finite head output".into() });
            }
        }
        Ok(())
    }

    /// Raw head outputs (sigmoid for hazard/binary heads, linear for regression).
    pub fn forward(&self, state: &ModelState, input: &ModelInput) -> Result<Vec<Vec<f64>>> {
        let mut cache = Cache::default();
        self.forward_cached(state, input, &mut cache)?;
        Ok(cache.head_out)
    }

    /// Hazard vectors of every hazard head, in head order.
    pub fn hazards(&self, state: &ModelState, input: &ModelInput) -> Result<Vec<HazardVector>> {
        let outs = self.forward(state, input)?;
        self.spec
            .heads
            .iter()
            .zip(outs)
            .filter_map(|(head, out)| match &head.kind {
                HeadKind::Hazard { grid } => Some(HazardVector::new(grid.clone(), out)),
                _ => None,
            })
            .collect()
    }

    /// The assembled trunk input split into its blocks.
    pub fn encode(&self, state: &ModelState, input: &ModelInput) -> Result<FeatureVector> {
        let mut cache = Cache::default();
        self.build_input(state, input, &mut cache)?;
        let o = self.layout.offsets;
        let x = &cache.x0;
        Ok(FeatureVector {
            text: x[o[0]..o[1]].to_vec(),
            categorical: x[o[1]..o[2]].to_vec(),
            image: x[o[2]..o[3]].to_vec(),
            stats: x[o[3]..o[4]].to_vec(),
            series: x[o[4]..o[5]].to_vec(),
        })
    }

    fn head_weights(&self, weighting: &LossWeighting) -> Vec<f64> {
        if self.spec.is_multi_task() {
            vec![weighting.lambda, 1.0 - weighting.lambda]
        } else {
            vec![1.0]
        }
    }

    fn head_loss_and_grad(&self, j: usize, out: &[f64], target: &HeadTarget) -> Result<(f64, Vec<f64>)> {
        match (&self.spec.heads[j].kind, target) {
            (HeadKind::Hazard { grid }, HeadTarget::Hazard(y)) => {
                if y.grid() != grid {
                    return contract(format!("labels for head {} use another grid", self.spec.heads[j].name));
                }
                let h = HazardVector::new(grid.clone(), out.to_vec())?;
                Ok((negative_log_likelihood(&h, y), nll_logit_grad(out, y)))
            }
            (HeadKind::Binary, HeadTarget::Binary(y)) => {
                let p = out[0];
                let loss = binary_cross_entropy(p, *y, 1.0)?;
                let g = if p > EPS && p < 1.0 - EPS { p - y } else { 0.0 };
                Ok((loss, vec![g]))
            }
            (HeadKind::Regression, HeadTarget::Regression(y)) => {
                Ok((squared_error(out[0], *y, 1.0), vec![2.0 * (out[0] - y)]))
            }
            _ => contract(format!("target kind does not match head {}", self.spec.heads[j].name)),
        }
    }

    /// Weighted, head-combined loss of one example.
    pub fn example_loss(&self, state: &ModelState, ex: &Example, weighting: &LossWeighting) -> Result<f64> {
        let mut cache = Cache::default();
        self.forward_cached(state, &ex.input, &mut cache)?;
        self.check_targets(ex)?;
        let w = ex.weight(weighting.mode)?;
        let hw = self.head_weights(weighting);
        let mut total = 0.0;
        for j in 0..self.spec.heads.len() {
            total += hw[j] * self.head_loss_and_grad(j, &cache.head_out[j], &ex.targets[j])?.0;
        }
        Ok(w * total)
    }

    fn check_targets(&self, ex: &Example) -> Result<()> {
        if ex.targets.len() != self.spec.heads.len() {
            return contract(format!(
                "example {} has {} targets for {} heads",
                ex.id,
                ex.targets.len(),
                self.spec.heads.len()
            ));
        }
        Ok(())
    }

    /// Mean loss over `batch` of the weighted objective.
    pub fn loss<B: Borrow<Example>>(&self, state: &ModelState, batch: &[B], weighting: &LossWeighting) -> Result<f64> {
        let mut total = 0.0;
        for ex in batch {
            total += self.example_loss(state, ex.borrow(), weighting)?;
        }
        Ok(total / batch.len().max(1) as f64)
    }

    /// Mean loss and its exact gradient over `batch`.
    pub fn backward<B: Borrow<Example>>(
        &self,
        state: &ModelState,
        batch: &[B],
        weighting: &LossWeighting,
    ) -> Result<(f64, Gradients)> {
        self.check_state(state)?;
        let mut grads = state.zero_like();
        let mut cache = Cache::default();
        let hw = self.head_weights(weighting);
        let mut total = 0.0;
        let mut d_last: Vec<f64> = Vec::new();
        let mut scratch: Vec<f64> = Vec::new();
        for ex in batch {
            let ex: &Example = ex.borrow();
            self.check_targets(ex)?;
            self.forward_cached(state, &ex.input, &mut cache)?;
            let w = ex.weight(weighting.mode)?;
            let last_width = self.spec.trunk.last().map_or(self.input_width(), |l| l.width);
            d_last.clear();
            d_last.resize(last_width, 0.0);
            for j in 0..self.spec.heads.len() {
                let (loss, mut dz) = self.head_loss_and_grad(j, &cache.head_out[j], &ex.targets[j])?;
                total += w * hw[j] * loss;
                let k = w * hw[j];
                dz.iter_mut().for_each(|g| *g *= k);
                let (hw_idx, hb_idx) = self.layout.heads[j];
                let last = cache.post.last().unwrap_or(&cache.x0);
                let (gw, gb) = two_mut(&mut grads.0, hw_idx, hb_idx);
                affine_backward(&state.params[hw_idx], last, &dz, gw, gb, Some(&mut scratch));
                d_last.iter_mut().zip(&scratch).for_each(|(a, b)| *a += b);
            }
            // Trunk, last layer first.
            let mut upstream = std::mem::take(&mut d_last);
            for i in (0..self.spec.trunk.len()).rev() {
                let act: Activation = self.spec.trunk[i].activation;
                let dz: Vec<f64> = upstream
                    .iter()
                    .zip(cache.pre[i].iter().zip(&cache.post[i]))
                    .map(|(g, (&z, &a))| g * act.derivative(z, a))
                    .collect();
                let x = if i == 0 { &cache.x0 } else { &cache.post[i - 1] };
                let (w_idx, b_idx) = self.layout.trunk[i];
                let (gw, gb) = two_mut(&mut grads.0, w_idx, b_idx);
                affine_backward(&state.params[w_idx], x, &dz, gw, gb, Some(&mut scratch));
                std::mem::swap(&mut upstream, &mut scratch);
            }
            self.backward_inputs(state, ex, &cache, &upstream, &mut grads);
            d_last = upstream;
        }
        let n = batch.len().max(1) as f64;
        grads.scale(1.0 / n);
        Ok((total / n, grads))
    }

    fn backward_inputs(&self, state: &ModelState, ex: &Example, cache: &Cache, dx: &[f64], grads: &mut Gradients) {
        let o = self.layout.offsets;
        let gender_dim = self.spec.input.gender_dim;
        let genre_grad = &dx[o[1] + gender_dim..o[2]];
        grads.0[self.layout.genre]
            .row_mut(ex.input.genre)
            .iter_mut()
            .zip(genre_grad)
            .for_each(|(g, d)| *g += d);

        let Some((wx_i, wh_i, b_i)) = self.layout.rnn else { return };
        if cache.rnn_h.is_empty() {
            return;
        }
        let wh = &state.params[wh_i];
        let hidden = wh.shape[0];
        let mut dh: Vec<f64> = dx[o[4]..o[5]].to_vec();
        let zero = vec![0.0; hidden];
        for t in (0..cache.rnn_h.len()).rev() {
            let h = &cache.rnn_h[t];
            let prev = if t == 0 { &zero } else { &cache.rnn_h[t - 1] };
            let dz: Vec<f64> = dh.iter().zip(h).map(|(g, hv)| g * (1.0 - hv * hv)).collect();
            let x = &ex.input.series[t];
            {
                let gwx = &mut grads.0[wx_i];
                for (r, &d) in dz.iter().enumerate() {
                    let row = gwx.row_mut(r);
                    row[0] += d * x[0];
                    row[1] += d * x[1];
                }
            }
            {
                let gwh = &mut grads.0[wh_i];
                for (r, &d) in dz.iter().enumerate() {
                    gwh.row_mut(r).iter_mut().zip(prev).for_each(|(g, p)| *g += d * p);
                }
            }
            grads.0[b_i].data.iter_mut().zip(&dz).for_each(|(g, d)| *g += d);
            let mut next = vec![0.0; hidden];
            for (r, &d) in dz.iter().enumerate() {
                next.iter_mut().zip(wh.row(r)).for_each(|(n, w)| *n += d * w);
            }
            dh = next;
        }
    }
}

fn two_mut(v: &mut [Tensor], a: usize, b: usize) -> (&mut Tensor, &mut Tensor) {
    assert!(a < b);
    let (lo, hi) = v.split_at_mut(b);
    (&mut lo[a], &mut hi[0])
}
