//! Linear and rectifier-MLP function approximators with hand-written
//! backpropagation.
//!
//! Parameters live in one flat vector with a canonical ordering shared by
//! federation and checkpoints:
//! - linear: the `input x output` weight matrix, row-major;
//! - MLP: layer by layer, each layer's `output x input` weights row-major
//!   followed by its biases.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::LearnError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[derive(Default)]
pub enum ApproxSpec {
    #[default]
    Linear,
    Mlp { hidden: Vec<usize> },
}


#[derive(Debug, Clone, PartialEq)]
pub enum Kind {
    Linear,
    /// Layer widths from input to output.
    Mlp(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionApproximator {
    kind: Kind,
    input_dim: usize,
    output_dim: usize,
    params: Vec<f64>,
}

impl FunctionApproximator {
    pub fn zeros(spec: &ApproxSpec, input_dim: usize, output_dim: usize) -> Self {
        let kind = match spec {
            ApproxSpec::Linear => Kind::Linear,
            ApproxSpec::Mlp { hidden } => {
                let mut sizes = vec![input_dim];
                sizes.extend(hidden.iter().copied());
                sizes.push(output_dim);
                Kind::Mlp(sizes)
            }
        };
        let n = match &kind {
            Kind::Linear => input_dim * output_dim,
            Kind::Mlp(sizes) => sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum(),
        };
        Self { kind, input_dim, output_dim, params: vec![0.0; n] }
    }

    /// Linear weights start at zero; MLP weights are drawn uniformly with
    /// He scaling `sqrt(6 / fan_in)` and biases start at zero.
    pub fn init<R: Rng + ?Sized>(spec: &ApproxSpec, input_dim: usize, output_dim: usize, rng: &mut R) -> Self {
        let mut f = Self::zeros(spec, input_dim, output_dim);
        if let Kind::Mlp(sizes) = &f.kind {
            let mut off = 0;
            for w in sizes.windows(2) {
                let (n_in, n_out) = (w[0], w[1]);
                let bound = (6.0 / n_in.max(1) as f64).sqrt();
                for p in &mut f.params[off..off + n_in * n_out] {
                    *p = rng.gen_range(-bound..bound);
                }
                off += n_in * n_out + n_out;
            }
        }
        f
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<(), LearnError> {
        if p.len() != self.params.len() {
            return Err(LearnError::Dimension { expected: self.params.len(), got: p.len() });
        }
        self.params.copy_from_slice(p);
        Ok(())
    }

    /// `params += scale * dir`
    pub fn add_scaled(&mut self, dir: &[f64], scale: f64) {
        debug_assert_eq!(dir.len(), self.params.len());
        for (p, d) in self.params.iter_mut().zip(dir) {
            *p += scale * d;
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<(), LearnError> {
        if x.len() != self.input_dim {
            return Err(LearnError::Dimension { expected: self.input_dim, got: x.len() });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, LearnError> {
        self.check_input(x)?;
        Ok(match &self.kind {
            Kind::Linear => {
                let mut y = vec![0.0; self.output_dim];
                for (k, &xk) in x.iter().enumerate() {
                    if xk == 0.0 {
                        continue;
                    }
                    let row = &self.params[k * self.output_dim..(k + 1) * self.output_dim];
                    for (yo, w) in y.iter_mut().zip(row) {
                        *yo += xk * w;
                    }
                }
                y
            }
            Kind::Mlp(sizes) => {
                let (acts, _) = self.mlp_forward(sizes, x);
                acts.into_iter().last().unwrap()
            }
        })
    }

    /// Single output `y[o]`; cheaper than a full forward for the linear kind.
    pub fn forward_one(&self, x: &[f64], o: usize) -> Result<f64, LearnError> {
        self.check_input(x)?;
        match &self.kind {
            Kind::Linear => Ok(x.iter().enumerate().map(|(k, xk)| xk * self.params[k * self.output_dim + o]).sum()),
            Kind::Mlp(_) => Ok(self.forward(x)?[o]),
        }
    }

    /// Layer activations (input first, output last) and pre-activations of
    /// every layer.
    fn mlp_forward(&self, sizes: &[usize], x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let n_layers = sizes.len() - 1;
        let mut acts = vec![x.to_vec()];
        let mut pre = Vec::with_capacity(n_layers);
        let mut off = 0;
        for l in 0..n_layers {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let w = &self.params[off..off + n_in * n_out];
            let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let h = &acts[l];
            let z: Vec<f64> = (0..n_out)
                .map(|o| b[o] + w[o * n_in..(o + 1) * n_in].iter().zip(h).map(|(a, c)| a * c).sum::<f64>())
                .collect();
            let a = if l + 1 < n_layers { z.iter().map(|&v| v.max(0.0)).collect() } else { z.clone() };
            pre.push(z);
            acts.push(a);
            off += n_in * n_out + n_out;
        }
        (acts, pre)
    }

    /// Gradient of `<grad_out, f(x)>` with respect to the flat parameters.
    pub fn vjp(&self, x: &[f64], grad_out: &[f64]) -> Result<Vec<f64>, LearnError> {
        self.check_input(x)?;
        if grad_out.len() != self.output_dim {
            return Err(LearnError::Dimension { expected: self.output_dim, got: grad_out.len() });
        }
        let mut grad = vec![0.0; self.params.len()];
        match &self.kind {
            Kind::Linear => {
                for (k, &xk) in x.iter().enumerate() {
                    if xk == 0.0 {
                        continue;
                    }
                    let row = &mut grad[k * self.output_dim..(k + 1) * self.output_dim];
                    for (g, go) in row.iter_mut().zip(grad_out) {
                        *g = xk * go;
                    }
                }
            }
            Kind::Mlp(sizes) => {
                let (acts, pre) = self.mlp_forward(sizes, x);
                let n_layers = sizes.len() - 1;
                let mut offsets = Vec::with_capacity(n_layers);
                let mut off = 0;
                for w in sizes.windows(2) {
                    offsets.push(off);
                    off += w[0] * w[1] + w[1];
                }
                let mut delta = grad_out.to_vec();
                for l in (0..n_layers).rev() {
                    let (n_in, n_out) = (sizes[l], sizes[l + 1]);
                    let off = offsets[l];
                    let h = &acts[l];
                    for o in 0..n_out {
                        let d = delta[o];
                        if d != 0.0 {
                            for (g, hi) in grad[off + o * n_in..off + (o + 1) * n_in].iter_mut().zip(h) {
                                *g = d * hi;
                            }
                        }
                        grad[off + n_in * n_out + o] = d;
                    }
                    if l > 0 {
                        let w = &self.params[off..off + n_in * n_out];
                        let mut next = vec![0.0; n_in];
                        for o in 0..n_out {
                            let d = delta[o];
                            if d == 0.0 {
                                continue;
                            }
                            for (nx, wv) in next.iter_mut().zip(&w[o * n_in..(o + 1) * n_in]) {
                                *nx += d * wv;
                            }
                        }
                        for (nx, z) in next.iter_mut().zip(&pre[l - 1]) {
                            if *z <= 0.0 {
                                *nx = 0.0;
                            }
                        }
                        delta = next;
                    }
                }
            }
        }
        Ok(grad)
    }

    /// Smallest `|pre-activation|` over hidden units at `x`; finite
    /// differences are unreliable when this is within the step size.
    pub fn min_abs_preactivation(&self, x: &[f64]) -> Option<f64> {
        match &self.kind {
            Kind::Linear => None,
            Kind::Mlp(sizes) => {
                let (_, pre) = self.mlp_forward(sizes, x);
                let hidden = &pre[..pre.len() - 1];
                hidden.iter().flatten().map(|v| v.abs()).reduce(f64::min)
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}

/// Central-difference step used by [`grad_check`].
pub const GRAD_CHECK_STEP: f64 = 1e-5;

/// Largest discrepancy between analytic and central-difference gradients of
/// every output with respect to every parameter, measured as
/// `|a - n| / max(|a|, |n|, 1)`.
pub fn grad_check(approx: &FunctionApproximator, x: &[f64]) -> Result<f64, LearnError> {
    let h = GRAD_CHECK_STEP;
    let n_out = approx.output_dim();
    // analytic[o][p]: one vector-Jacobian product per output
    let analytic: Vec<Vec<f64>> = (0..n_out)
        .map(|o| {
            let mut onehot = vec![0.0; n_out];
            onehot[o] = 1.0;
            approx.vjp(x, &onehot)
        })
        .collect::<Result<_, _>>()?;
    let mut probe = approx.clone();
    let mut worst: f64 = 0.0;
    for p in 0..approx.n_params() {
        let orig = probe.params[p];
        probe.params[p] = orig + h;
        let up = probe.forward(x)?;
        probe.params[p] = orig - h;
        let down = probe.forward(x)?;
        probe.params[p] = orig;
        for o in 0..n_out {
            let numeric = (up[o] - down[o]) / (2.0 * h);
            let a = analytic[o][p];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1.0);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
