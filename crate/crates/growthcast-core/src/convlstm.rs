//! Stacked ConvLSTM predictor.
//!
//! The cell follows the peephole formulation exactly as printed in its
//! source: input/forget/output gates are sigmoids of conv terms plus
//! per-channel Hadamard peephole terms, the candidate state is a tanh,
//! and the new hidden state is the output gate times tanh of the cell
//! state. The output gate's peephole reads C_{t-1} by default (the
//! printed form); [`OutputGatePeephole::UpdatedCell`] switches to the
//! C_t variant. All backward passes are hand-derived and
//! finite-difference checked.

use crate::exec;
use crate::pipeline::{Dataset, PipelineError, Raster};
use crate::tensor::{
    activate, batch_norm, batch_norm_backward, conv2d, conv2d_backward, cross_entropy,
    cross_entropy_backward, xavier_init, Activation, BatchNormCache, Element, Parameter,
    RngStream, Tensor, TensorError,
};
use std::fs;
use std::path::Path;
use thiserror::Error;

const BN_EPS: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("empty input sequence")]
    EmptySequence,
    #[error("sequence length {got} does not match the model's configured {expected}")]
    SequenceLen { expected: usize, got: usize },
    #[error("batch size {batch} exceeds dataset size {dataset}")]
    BatchTooLarge { batch: usize, dataset: usize },
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("training requires sequence length 1, model is configured for {0}")]
    TrainingNeedsSingleFrame(usize),
    #[error("invalid train config: {0}")]
    BadConfig(&'static str),
    #[error("corrupt checkpoint: {0}")]
    BadCheckpoint(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Which cell state the output gate's peephole reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputGatePeephole {
    /// C_{t-1}, as printed in the source equations.
    #[default]
    PreviousCell,
    /// C_t, the original ConvLSTM formulation.
    UpdatedCell,
}

/// One ConvLSTM cell: 8 conv kernel sets, 3 per-channel peephole
/// vectors, 4 biases.
#[derive(Debug, Clone)]
pub struct ConvLstmCell<E: Element = f32> {
    pub w_xi: Parameter<E>,
    pub w_hi: Parameter<E>,
    pub w_xf: Parameter<E>,
    pub w_hf: Parameter<E>,
    pub w_xo: Parameter<E>,
    pub w_ho: Parameter<E>,
    pub w_xc: Parameter<E>,
    pub w_hc: Parameter<E>,
    pub w_ci: Parameter<E>,
    pub w_cf: Parameter<E>,
    pub w_co: Parameter<E>,
    pub b_i: Parameter<E>,
    pub b_f: Parameter<E>,
    pub b_c: Parameter<E>,
    pub b_o: Parameter<E>,
    in_channels: usize,
    filters: usize,
    peephole: OutputGatePeephole,
}

impl<E: Element> ConvLstmCell<E> {
    /// All-zero cell (useful for the closed-form oracles).
    pub fn zeros(in_channels: usize, filters: usize, kernel: usize) -> Self {
        let conv_x = || Parameter::new(Tensor::zeros(&[filters, in_channels, kernel, kernel]));
        let conv_h = || Parameter::new(Tensor::zeros(&[filters, filters, kernel, kernel]));
        let vec = || Parameter::new(Tensor::zeros(&[filters]));
        ConvLstmCell {
            w_xi: conv_x(),
            w_hi: conv_h(),
            w_xf: conv_x(),
            w_hf: conv_h(),
            w_xo: conv_x(),
            w_ho: conv_h(),
            w_xc: conv_x(),
            w_hc: conv_h(),
            w_ci: vec(),
            w_cf: vec(),
            w_co: vec(),
            b_i: vec(),
            b_f: vec(),
            b_c: vec(),
            b_o: vec(),
            in_channels,
            filters,
            peephole: OutputGatePeephole::PreviousCell,
        }
    }

    /// Xavier-initialized conv kernels; peepholes and biases start at zero.
    pub fn init(
        in_channels: usize,
        filters: usize,
        kernel: usize,
        peephole: OutputGatePeephole,
        rng: &mut RngStream,
    ) -> Result<Self, TensorError> {
        let mut cell = Self::zeros(in_channels, filters, kernel);
        cell.peephole = peephole;
        let k2 = kernel * kernel;
        for w in [&mut cell.w_xi, &mut cell.w_xf, &mut cell.w_xo, &mut cell.w_xc] {
            w.value = xavier_init(
                &[filters, in_channels, kernel, kernel],
                in_channels * k2,
                filters * k2,
                rng,
            )?;
        }
        for w in [&mut cell.w_hi, &mut cell.w_hf, &mut cell.w_ho, &mut cell.w_hc] {
            w.value = xavier_init(
                &[filters, filters, kernel, kernel],
                filters * k2,
                filters * k2,
                rng,
            )?;
        }
        Ok(cell)
    }

    pub fn filters(&self) -> usize {
        self.filters
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn peephole(&self) -> OutputGatePeephole {
        self.peephole
    }

    pub fn set_peephole(&mut self, p: OutputGatePeephole) {
        self.peephole = p;
    }

    /// The cell's 15 parameters in canonical order.
    pub fn named_params_mut(&mut self) -> [(&'static str, &mut Parameter<E>); 15] {
        [
            ("w_xi", &mut self.w_xi),
            ("w_hi", &mut self.w_hi),
            ("w_xf", &mut self.w_xf),
            ("w_hf", &mut self.w_hf),
            ("w_xo", &mut self.w_xo),
            ("w_ho", &mut self.w_ho),
            ("w_xc", &mut self.w_xc),
            ("w_hc", &mut self.w_hc),
            ("w_ci", &mut self.w_ci),
            ("w_cf", &mut self.w_cf),
            ("w_co", &mut self.w_co),
            ("b_i", &mut self.b_i),
            ("b_f", &mut self.b_f),
            ("b_c", &mut self.b_c),
            ("b_o", &mut self.b_o),
        ]
    }
}

/// Hidden and cell state; zero at sequence start.
#[derive(Debug, Clone)]
pub struct CellState<E: Element = f32> {
    pub h: Tensor<E>,
    pub c: Tensor<E>,
}

impl<E: Element> CellState<E> {
    pub fn zeros(filters: usize, height: usize, width: usize) -> Self {
        CellState {
            h: Tensor::zeros(&[filters, height, width]),
            c: Tensor::zeros(&[filters, height, width]),
        }
    }
}

/// Saved activations from one cell step, as needed by the backward pass.
#[derive(Debug, Clone)]
pub struct CellCache<E: Element = f32> {
    pub x: Tensor<E>,
    pub h_prev: Tensor<E>,
    pub c_prev: Tensor<E>,
    pub input_gate: Tensor<E>,
    pub forget_gate: Tensor<E>,
    pub output_gate: Tensor<E>,
    pub candidate: Tensor<E>,
    pub c_new: Tensor<E>,
}

/// out[c, ...] = w[c] * x[c, ...].
fn per_channel_mul<E: Element>(w: &Tensor<E>, x: &Tensor<E>) -> Tensor<E> {
    let channels = x.shape()[0];
    let plane = x.len() / channels;
    let mut out = x.clone();
    for c in 0..channels {
        let s = w.data()[c];
        for v in &mut out.data_mut()[c * plane..(c + 1) * plane] {
            *v *= s;
        }
    }
    out
}

/// Per-channel spatial sum of a*b -> [channels].
fn channel_dot<E: Element>(a: &Tensor<E>, b: &Tensor<E>) -> Tensor<E> {
    let channels = a.shape()[0];
    let plane = a.len() / channels;
    Tensor::from_fn(&[channels], |c| {
        a.data()[c * plane..(c + 1) * plane]
            .iter()
            .zip(&b.data()[c * plane..(c + 1) * plane])
            .map(|(&x, &y)| x * y)
            .sum()
    })
}

fn add3<E: Element>(a: Tensor<E>, b: &Tensor<E>, c: &Tensor<E>) -> Tensor<E> {
    let mut out = a;
    for i in 0..out.len() {
        out.data_mut()[i] += b.data()[i] + c.data()[i];
    }
    out
}

/// One time step: gates, candidate, new cell and hidden state.
pub fn cell_forward<E: Element>(
    cell: &ConvLstmCell<E>,
    x: &Tensor<E>,
    state: &CellState<E>,
) -> Result<(CellState<E>, CellCache<E>), TrainError> {
    if x.shape()[1..] != state.h.shape()[1..] {
        return Err(TensorError::ShapeMismatch {
            expected: state.h.shape().to_vec(),
            got: x.shape().to_vec(),
        }
        .into());
    }
    let zero_bias = Tensor::zeros(&[cell.filters]);

    let a_i = add3(
        conv2d(x, &cell.w_xi.value, &cell.b_i.value)?,
        &conv2d(&state.h, &cell.w_hi.value, &zero_bias)?,
        &per_channel_mul(&cell.w_ci.value, &state.c),
    );
    let input_gate = activate(&a_i, Activation::Sigmoid);

    let a_f = add3(
        conv2d(x, &cell.w_xf.value, &cell.b_f.value)?,
        &conv2d(&state.h, &cell.w_hf.value, &zero_bias)?,
        &per_channel_mul(&cell.w_cf.value, &state.c),
    );
    let forget_gate = activate(&a_f, Activation::Sigmoid);

    let mut a_c = conv2d(x, &cell.w_xc.value, &cell.b_c.value)?;
    a_c.add_assign(&conv2d(&state.h, &cell.w_hc.value, &zero_bias)?)?;
    let candidate = activate(&a_c, Activation::Tanh);

    // C_t = f o C_{t-1} + i o C~_t
    let mut c_new = forget_gate.zip_map(&state.c, |f, c| f * c)?;
    c_new.add_assign(&input_gate.zip_map(&candidate, |i, g| i * g)?)?;

    let o_peep = match cell.peephole {
        OutputGatePeephole::PreviousCell => &state.c,
        OutputGatePeephole::UpdatedCell => &c_new,
    };
    let a_o = add3(
        conv2d(x, &cell.w_xo.value, &cell.b_o.value)?,
        &conv2d(&state.h, &cell.w_ho.value, &zero_bias)?,
        &per_channel_mul(&cell.w_co.value, o_peep),
    );
    let output_gate = activate(&a_o, Activation::Sigmoid);

    // H_t = o o tanh(C_t) (Hadamard; a convolution is dimensionally
    // incoherent for this kernel set).
    let h_new = output_gate.zip_map(&c_new, |o, c| o * c.tanh())?;

    let cache = CellCache {
        x: x.clone(),
        h_prev: state.h.clone(),
        c_prev: state.c.clone(),
        input_gate,
        forget_gate,
        output_gate,
        candidate,
        c_new: c_new.clone(),
    };
    Ok((CellState { h: h_new, c: c_new }, cache))
}

/// Gradients for every cell parameter.
#[derive(Debug, Clone)]
pub struct CellGrads<E: Element = f32> {
    pub w_xi: Tensor<E>,
    pub w_hi: Tensor<E>,
    pub w_xf: Tensor<E>,
    pub w_hf: Tensor<E>,
    pub w_xo: Tensor<E>,
    pub w_ho: Tensor<E>,
    pub w_xc: Tensor<E>,
    pub w_hc: Tensor<E>,
    pub w_ci: Tensor<E>,
    pub w_cf: Tensor<E>,
    pub w_co: Tensor<E>,
    pub b_i: Tensor<E>,
    pub b_f: Tensor<E>,
    pub b_c: Tensor<E>,
    pub b_o: Tensor<E>,
}

impl<E: Element> CellGrads<E> {
    fn zeros_like(cell: &ConvLstmCell<E>) -> Self {
        CellGrads {
            w_xi: Tensor::zeros(cell.w_xi.value.shape()),
            w_hi: Tensor::zeros(cell.w_hi.value.shape()),
            w_xf: Tensor::zeros(cell.w_xf.value.shape()),
            w_hf: Tensor::zeros(cell.w_hf.value.shape()),
            w_xo: Tensor::zeros(cell.w_xo.value.shape()),
            w_ho: Tensor::zeros(cell.w_ho.value.shape()),
            w_xc: Tensor::zeros(cell.w_xc.value.shape()),
            w_hc: Tensor::zeros(cell.w_hc.value.shape()),
            w_ci: Tensor::zeros(cell.w_ci.value.shape()),
            w_cf: Tensor::zeros(cell.w_cf.value.shape()),
            w_co: Tensor::zeros(cell.w_co.value.shape()),
            b_i: Tensor::zeros(cell.b_i.value.shape()),
            b_f: Tensor::zeros(cell.b_f.value.shape()),
            b_c: Tensor::zeros(cell.b_c.value.shape()),
            b_o: Tensor::zeros(cell.b_o.value.shape()),
        }
    }

    fn add_assign(&mut self, other: &CellGrads<E>) -> Result<(), TensorError> {
        for (a, b) in self.slots_mut_with(other) {
            a.add_assign(b)?;
        }
        Ok(())
    }

    fn slots_mut_with<'a>(
        &'a mut self,
        other: &'a CellGrads<E>,
    ) -> [(&'a mut Tensor<E>, &'a Tensor<E>); 15] {
        [
            (&mut self.w_xi, &other.w_xi),
            (&mut self.w_hi, &other.w_hi),
            (&mut self.w_xf, &other.w_xf),
            (&mut self.w_hf, &other.w_hf),
            (&mut self.w_xo, &other.w_xo),
            (&mut self.w_ho, &other.w_ho),
            (&mut self.w_xc, &other.w_xc),
            (&mut self.w_hc, &other.w_hc),
            (&mut self.w_ci, &other.w_ci),
            (&mut self.w_cf, &other.w_cf),
            (&mut self.w_co, &other.w_co),
            (&mut self.b_i, &other.b_i),
            (&mut self.b_f, &other.b_f),
            (&mut self.b_c, &other.b_c),
            (&mut self.b_o, &other.b_o),
        ]
    }
}

/// Gradients flowing out of a cell step into its inputs.
#[derive(Debug, Clone)]
pub struct CellInputGrads<E: Element = f32> {
    pub x: Tensor<E>,
    pub h_prev: Tensor<E>,
    pub c_prev: Tensor<E>,
}

/// Backward through one cell step given upstream gradients on H_t and
/// C_t. The forget-gate path and all three peephole paths contribute to
/// d C_{t-1}.
pub fn cell_backward<E: Element>(
    cell: &ConvLstmCell<E>,
    cache: &CellCache<E>,
    d_h: &Tensor<E>,
    d_c: &Tensor<E>,
) -> Result<(CellGrads<E>, CellInputGrads<E>), TrainError> {
    d_h.check_same_shape(&cache.c_new)?;
    d_c.check_same_shape(&cache.c_new)?;
    let one = E::one();

    let tanh_c = cache.c_new.map(|v| v.tanh());
    // d a_o = dH o tanh(C_t) o o(1-o)
    let d_a_o = {
        let mut t = d_h.zip_map(&tanh_c, |u, tc| u * tc)?;
        for (v, &o) in t.data_mut().iter_mut().zip(cache.output_gate.data()) {
            *v *= o * (one - o);
        }
        t
    };

    // d C_t accumulates the direct upstream, the H_t path, and (for the
    // updated-cell variant) the output-gate peephole.
    let mut d_c_total = d_c.clone();
    {
        let dh = d_h.data();
        let o = cache.output_gate.data();
        let tc = tanh_c.data();
        let out = d_c_total.data_mut();
        for i in 0..out.len() {
            out[i] += dh[i] * o[i] * (one - tc[i] * tc[i]);
        }
    }
    if cell.peephole == OutputGatePeephole::UpdatedCell {
        d_c_total.add_assign(&per_channel_mul(&cell.w_co.value, &d_a_o))?;
    }

    let d_a_i = {
        let mut t = d_c_total.zip_map(&cache.candidate, |dc, g| dc * g)?;
        for (v, &i) in t.data_mut().iter_mut().zip(cache.input_gate.data()) {
            *v *= i * (one - i);
        }
        t
    };
    let d_a_f = {
        let mut t = d_c_total.zip_map(&cache.c_prev, |dc, cp| dc * cp)?;
        for (v, &f) in t.data_mut().iter_mut().zip(cache.forget_gate.data()) {
            *v *= f * (one - f);
        }
        t
    };
    let d_a_c = {
        let mut t = d_c_total.zip_map(&cache.input_gate, |dc, i| dc * i)?;
        for (v, &g) in t.data_mut().iter_mut().zip(cache.candidate.data()) {
            *v *= one - g * g;
        }
        t
    };

    // d C_{t-1}: forget path plus the peephole paths that read C_{t-1}.
    let mut d_c_prev = d_c_total.zip_map(&cache.forget_gate, |dc, f| dc * f)?;
    d_c_prev.add_assign(&per_channel_mul(&cell.w_ci.value, &d_a_i))?;
    d_c_prev.add_assign(&per_channel_mul(&cell.w_cf.value, &d_a_f))?;
    if cell.peephole == OutputGatePeephole::PreviousCell {
        d_c_prev.add_assign(&per_channel_mul(&cell.w_co.value, &d_a_o))?;
    }

    let mut grads = CellGrads::zeros_like(cell);
    grads.w_ci = channel_dot(&d_a_i, &cache.c_prev);
    grads.w_cf = channel_dot(&d_a_f, &cache.c_prev);
    grads.w_co = match cell.peephole {
        OutputGatePeephole::PreviousCell => channel_dot(&d_a_o, &cache.c_prev),
        OutputGatePeephole::UpdatedCell => channel_dot(&d_a_o, &cache.c_new),
    };

    let mut d_x = Tensor::zeros(cache.x.shape());
    let mut d_h_prev = Tensor::zeros(cache.h_prev.shape());
    // Bias gradients come from the x-side conv only (the bias is applied
    // once per gate).
    for (d_a, w_x, w_h, gk_x, gk_h, gb) in [
        (&d_a_i, &cell.w_xi, &cell.w_hi, &mut grads.w_xi, &mut grads.w_hi, &mut grads.b_i),
        (&d_a_f, &cell.w_xf, &cell.w_hf, &mut grads.w_xf, &mut grads.w_hf, &mut grads.b_f),
        (&d_a_o, &cell.w_xo, &cell.w_ho, &mut grads.w_xo, &mut grads.w_ho, &mut grads.b_o),
        (&d_a_c, &cell.w_xc, &cell.w_hc, &mut grads.w_xc, &mut grads.w_hc, &mut grads.b_c),
    ] {
        let gx = conv2d_backward(d_a, &cache.x, &w_x.value)?;
        *gk_x = gx.kernels;
        *gb = gx.bias;
        d_x.add_assign(&gx.input)?;
        let gh = conv2d_backward(d_a, &cache.h_prev, &w_h.value)?;
        *gk_h = gh.kernels;
        d_h_prev.add_assign(&gh.input)?;
    }

    Ok((
        grads,
        CellInputGrads {
            x: d_x,
            h_prev: d_h_prev,
            c_prev: d_c_prev,
        },
    ))
}

// ---------------------------------------------------------------------------
// Stacked model
// ---------------------------------------------------------------------------

/// Architecture of the stacked predictor.
#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub layers: usize,
    pub filters: usize,
    pub kernel: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    /// Input sequence length T; the output convolution folds the T
    /// stacked hidden states (kernel depth T), so T is fixed per model.
    pub seq_len: usize,
    pub peephole: OutputGatePeephole,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            layers: 4,
            filters: 40,
            kernel: 3,
            in_channels: 1,
            out_channels: 1,
            seq_len: 1,
            peephole: OutputGatePeephole::PreviousCell,
        }
    }
}

impl ModelConfig {
    fn validate(&self) -> Result<(), TrainError> {
        if self.layers == 0
            || self.filters == 0
            || self.kernel % 2 == 0
            || self.in_channels == 0
            || self.out_channels == 0
            || self.seq_len == 0
        {
            return Err(TrainError::BadConfig(
                "layers, filters, channels, seq_len must be positive; kernel odd",
            ));
        }
        Ok(())
    }
}

/// Stacked ConvLSTM layers with batch norm after all but the last,
/// finished by a sigmoid output convolution over the stacked hidden
/// states of the last layer.
#[derive(Debug, Clone)]
pub struct ConvLstmModel<E: Element = f32> {
    cells: Vec<ConvLstmCell<E>>,
    norm_gamma: Vec<Parameter<E>>,
    norm_beta: Vec<Parameter<E>>,
    output_kernels: Parameter<E>,
    output_bias: Parameter<E>,
    config: ModelConfig,
}

impl<E: Element> ConvLstmModel<E> {
    /// All-parameters-zero model (output is exactly 0.5 everywhere).
    pub fn zeros(config: ModelConfig) -> Result<Self, TrainError> {
        config.validate()?;
        let mut cells = Vec::with_capacity(config.layers);
        let mut cin = config.in_channels;
        for _ in 0..config.layers {
            cells.push(ConvLstmCell::zeros(cin, config.filters, config.kernel));
            cin = config.filters;
        }
        let bn_count = config.layers - 1;
        let norm_gamma = (0..bn_count)
            .map(|_| Parameter::new(Tensor::full(&[config.filters], E::one())))
            .collect();
        let norm_beta = (0..bn_count)
            .map(|_| Parameter::new(Tensor::zeros(&[config.filters])))
            .collect();
        let stacked = config.filters * config.seq_len;
        let output_kernels = Parameter::new(Tensor::zeros(&[
            config.out_channels,
            stacked,
            config.kernel,
            config.kernel,
        ]));
        let output_bias = Parameter::new(Tensor::zeros(&[config.out_channels]));
        let mut model = ConvLstmModel {
            cells,
            norm_gamma,
            norm_beta,
            output_kernels,
            output_bias,
            config,
        };
        for c in &mut model.cells {
            c.peephole = model.config.peephole;
        }
        Ok(model)
    }

    /// Randomly initialized model, deterministic per seed.
    pub fn init(config: ModelConfig, rng: &mut RngStream) -> Result<Self, TrainError> {
        let mut model = Self::zeros(config)?;
        let k = model.config.kernel;
        let mut cin = model.config.in_channels;
        for cell in &mut model.cells {
            *cell = ConvLstmCell::init(
                cin,
                model.config.filters,
                k,
                model.config.peephole,
                rng,
            )?;
            cin = model.config.filters;
        }
        let stacked = model.config.filters * model.config.seq_len;
        model.output_kernels.value = xavier_init(
            &[model.config.out_channels, stacked, k, k],
            stacked * k * k,
            model.config.out_channels * k * k,
            rng,
        )?;
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn cells(&self) -> &[ConvLstmCell<E>] {
        &self.cells
    }

    /// Canonical (name, parameter) listing; checkpoint blob order.
    pub fn named_parameters_mut(&mut self) -> Vec<(String, &mut Parameter<E>)> {
        let mut out = Vec::new();
        for (l, cell) in self.cells.iter_mut().enumerate() {
            for (name, p) in cell.named_params_mut() {
                out.push((format!("cell{l}.{name}"), p));
            }
        }
        for (l, g) in self.norm_gamma.iter_mut().enumerate() {
            out.push((format!("norm{l}.gamma"), g));
        }
        for (l, b) in self.norm_beta.iter_mut().enumerate() {
            out.push((format!("norm{l}.beta"), b));
        }
        out.push(("output.kernels".to_string(), &mut self.output_kernels));
        out.push(("output.bias".to_string(), &mut self.output_bias));
        out
    }

    pub fn cast<F: Element>(&self) -> ConvLstmModel<F> {
        ConvLstmModel {
            cells: self
                .cells
                .iter()
                .map(|c| ConvLstmCell {
                    w_xi: c.w_xi.cast(),
                    w_hi: c.w_hi.cast(),
                    w_xf: c.w_xf.cast(),
                    w_hf: c.w_hf.cast(),
                    w_xo: c.w_xo.cast(),
                    w_ho: c.w_ho.cast(),
                    w_xc: c.w_xc.cast(),
                    w_hc: c.w_hc.cast(),
                    w_ci: c.w_ci.cast(),
                    w_cf: c.w_cf.cast(),
                    w_co: c.w_co.cast(),
                    b_i: c.b_i.cast(),
                    b_f: c.b_f.cast(),
                    b_c: c.b_c.cast(),
                    b_o: c.b_o.cast(),
                    in_channels: c.in_channels,
                    filters: c.filters,
                    peephole: c.peephole,
                })
                .collect(),
            norm_gamma: self.norm_gamma.iter().map(|p| p.cast()).collect(),
            norm_beta: self.norm_beta.iter().map(|p| p.cast()).collect(),
            output_kernels: self.output_kernels.cast(),
            output_bias: self.output_bias.cast(),
            config: self.config.clone(),
        }
    }
}

/// Saved forward state of the whole stack for one input sequence.
pub struct ModelCache<E: Element = f32> {
    cell_caches: Vec<Vec<CellCache<E>>>,
    bn_caches: Vec<Vec<BatchNormCache<E>>>,
    hidden_stack: Tensor<E>,
    output: Tensor<E>,
}

impl<E: Element> ModelCache<E> {
    pub fn output(&self) -> &Tensor<E> {
        &self.output
    }
}

/// Run a sequence of [Cin,H,W] frames through the stack; returns the
/// sigmoid output map [Cout,H,W] and the cache for backward.
pub fn model_forward_cached<E: Element>(
    model: &ConvLstmModel<E>,
    frames: &[Tensor<E>],
) -> Result<ModelCache<E>, TrainError> {
    if frames.is_empty() {
        return Err(TrainError::EmptySequence);
    }
    if frames.len() != model.config.seq_len {
        return Err(TrainError::SequenceLen {
            expected: model.config.seq_len,
            got: frames.len(),
        });
    }
    for f in frames {
        if f.rank() != 3 || f.shape()[0] != model.config.in_channels {
            return Err(TensorError::ShapeMismatch {
                expected: vec![model.config.in_channels, 0, 0],
                got: f.shape().to_vec(),
            }
            .into());
        }
    }
    let (h, w) = (frames[0].shape()[1], frames[0].shape()[2]);
    let eps = E::from_f64(BN_EPS);

    let mut current: Vec<Tensor<E>> = frames.to_vec();
    let mut cell_caches = Vec::with_capacity(model.cells.len());
    let mut bn_caches = Vec::new();
    for (l, cell) in model.cells.iter().enumerate() {
        let mut state = CellState::zeros(model.config.filters, h, w);
        let mut caches_t = Vec::with_capacity(current.len());
        let mut hidden = Vec::with_capacity(current.len());
        for x in &current {
            let (next, cache) = cell_forward(cell, x, &state)?;
            caches_t.push(cache);
            hidden.push(next.h.clone());
            state = next;
        }
        cell_caches.push(caches_t);
        if l + 1 < model.cells.len() {
            let mut bn_t = Vec::with_capacity(hidden.len());
            let mut normed = Vec::with_capacity(hidden.len());
            for ht in &hidden {
                let (y, c) = batch_norm(
                    ht,
                    &model.norm_gamma[l].value,
                    &model.norm_beta[l].value,
                    eps,
                )?;
                bn_t.push(c);
                normed.push(y);
            }
            bn_caches.push(bn_t);
            current = normed;
        } else {
            current = hidden;
        }
    }

    // Stack the last layer's hidden states along channels: [T*F, H, W].
    let t_len = current.len();
    let f = model.config.filters;
    let mut stack = Tensor::zeros(&[t_len * f, h, w]);
    for (t, ht) in current.iter().enumerate() {
        stack.data_mut()[t * f * h * w..(t + 1) * f * h * w].copy_from_slice(ht.data());
    }
    let z = conv2d(&stack, &model.output_kernels.value, &model.output_bias.value)?;
    let output = activate(&z, Activation::Sigmoid);
    Ok(ModelCache {
        cell_caches,
        bn_caches,
        hidden_stack: stack,
        output,
    })
}

/// Forward only: the predicted map in (0,1).
pub fn model_forward<E: Element>(
    model: &ConvLstmModel<E>,
    frames: &[Tensor<E>],
) -> Result<Tensor<E>, TrainError> {
    Ok(model_forward_cached(model, frames)?.output)
}

/// Gradients for every model parameter, in the same structure as the
/// model itself.
pub struct ModelGrads<E: Element = f32> {
    pub cells: Vec<CellGrads<E>>,
    pub norm_gamma: Vec<Tensor<E>>,
    pub norm_beta: Vec<Tensor<E>>,
    pub output_kernels: Tensor<E>,
    pub output_bias: Tensor<E>,
}

impl<E: Element> ModelGrads<E> {
    pub fn zeros_like(model: &ConvLstmModel<E>) -> Self {
        ModelGrads {
            cells: model.cells.iter().map(CellGrads::zeros_like).collect(),
            norm_gamma: model
                .norm_gamma
                .iter()
                .map(|p| Tensor::zeros(p.value.shape()))
                .collect(),
            norm_beta: model
                .norm_beta
                .iter()
                .map(|p| Tensor::zeros(p.value.shape()))
                .collect(),
            output_kernels: Tensor::zeros(model.output_kernels.value.shape()),
            output_bias: Tensor::zeros(model.output_bias.value.shape()),
        }
    }

    pub fn add_assign(&mut self, other: &ModelGrads<E>) -> Result<(), TensorError> {
        for (a, b) in self.cells.iter_mut().zip(&other.cells) {
            a.add_assign(b)?;
        }
        for (a, b) in self.norm_gamma.iter_mut().zip(&other.norm_gamma) {
            a.add_assign(b)?;
        }
        for (a, b) in self.norm_beta.iter_mut().zip(&other.norm_beta) {
            a.add_assign(b)?;
        }
        self.output_kernels.add_assign(&other.output_kernels)?;
        self.output_bias.add_assign(&other.output_bias)
    }

    pub fn scale(&mut self, s: E) {
        for c in &mut self.cells {
            for slot in c.slots_mut() {
                slot.scale_assign(s);
            }
        }
        for g in &mut self.norm_gamma {
            g.scale_assign(s);
        }
        for b in &mut self.norm_beta {
            b.scale_assign(s);
        }
        self.output_kernels.scale_assign(s);
        self.output_bias.scale_assign(s);
    }

    /// Copy into the model's gradient slots (overwrites).
    pub fn store_into(&self, model: &mut ConvLstmModel<E>) {
        for (cell, grads) in model.cells.iter_mut().zip(&self.cells) {
            let gs = [
                (&mut cell.w_xi, &grads.w_xi),
                (&mut cell.w_hi, &grads.w_hi),
                (&mut cell.w_xf, &grads.w_xf),
                (&mut cell.w_hf, &grads.w_hf),
                (&mut cell.w_xo, &grads.w_xo),
                (&mut cell.w_ho, &grads.w_ho),
                (&mut cell.w_xc, &grads.w_xc),
                (&mut cell.w_hc, &grads.w_hc),
                (&mut cell.w_ci, &grads.w_ci),
                (&mut cell.w_cf, &grads.w_cf),
                (&mut cell.w_co, &grads.w_co),
                (&mut cell.b_i, &grads.b_i),
                (&mut cell.b_f, &grads.b_f),
                (&mut cell.b_c, &grads.b_c),
                (&mut cell.b_o, &grads.b_o),
            ];
            for (p, g) in gs {
                p.grad = g.clone();
            }
        }
        for (p, g) in model.norm_gamma.iter_mut().zip(&self.norm_gamma) {
            p.grad = g.clone();
        }
        for (p, g) in model.norm_beta.iter_mut().zip(&self.norm_beta) {
            p.grad = g.clone();
        }
        model.output_kernels.grad = self.output_kernels.clone();
        model.output_bias.grad = self.output_bias.clone();
    }
}

impl<E: Element> CellGrads<E> {
    fn slots_mut(&mut self) -> [&mut Tensor<E>; 15] {
        [
            &mut self.w_xi,
            &mut self.w_hi,
            &mut self.w_xf,
            &mut self.w_hf,
            &mut self.w_xo,
            &mut self.w_ho,
            &mut self.w_xc,
            &mut self.w_hc,
            &mut self.w_ci,
            &mut self.w_cf,
            &mut self.w_co,
            &mut self.b_i,
            &mut self.b_f,
            &mut self.b_c,
            &mut self.b_o,
        ]
    }
}

/// Full backpropagation through time: layers in reverse, time in
/// reverse within each layer.
pub fn model_backward<E: Element>(
    model: &ConvLstmModel<E>,
    cache: &ModelCache<E>,
    upstream: &Tensor<E>,
) -> Result<ModelGrads<E>, TrainError> {
    upstream.check_same_shape(&cache.output)?;
    let mut grads = ModelGrads::zeros_like(model);
    let one = E::one();

    // Through the sigmoid: sigma' from the saved output.
    let d_z = upstream.zip_map(&cache.output, |u, s| u * s * (one - s))?;
    let og = conv2d_backward(&d_z, &cache.hidden_stack, &model.output_kernels.value)?;
    grads.output_kernels = og.kernels;
    grads.output_bias = og.bias;

    // Split the stacked-hidden gradient back into per-timestep chunks.
    let t_len = model.config.seq_len;
    let f = model.config.filters;
    let (h, w) = (cache.hidden_stack.shape()[1], cache.hidden_stack.shape()[2]);
    let plane = f * h * w;
    let mut d_layer_out: Vec<Tensor<E>> = (0..t_len)
        .map(|t| {
            Tensor::from_vec(
                &[f, h, w],
                og.input.data()[t * plane..(t + 1) * plane].to_vec(),
            )
            .expect("chunk sizes match")
        })
        .collect();

    for l in (0..model.cells.len()).rev() {
        // For all but the last layer the stored gradient refers to the
        // post-BN output; undo the BN first.
        let mut d_hidden = Vec::with_capacity(t_len);
        if l + 1 < model.cells.len() {
            for (t, d) in d_layer_out.iter().enumerate() {
                let (dx, dgamma, dbeta) =
                    batch_norm_backward(d, &cache.bn_caches[l][t], &model.norm_gamma[l].value)?;
                grads.norm_gamma[l].add_assign(&dgamma)?;
                grads.norm_beta[l].add_assign(&dbeta)?;
                d_hidden.push(dx);
            }
        } else {
            d_hidden = d_layer_out;
        }

        let mut d_h_next = Tensor::zeros(&[f, h, w]);
        let mut d_c_next = Tensor::zeros(&[f, h, w]);
        let mut d_inputs = vec![Tensor::zeros(&[1]); t_len];
        for t in (0..t_len).rev() {
            let mut d_h_total = d_hidden[t].clone();
            d_h_total.add_assign(&d_h_next)?;
            let (cg, ig) = cell_backward(&model.cells[l], &cache.cell_caches[l][t], &d_h_total, &d_c_next)?;
            grads.cells[l].add_assign(&cg)?;
            d_h_next = ig.h_prev;
            d_c_next = ig.c_prev;
            d_inputs[t] = ig.x;
        }
        d_layer_out = d_inputs;
    }
    Ok(grads)
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

/// Optimizer and schedule settings; defaults follow the published
/// hyperparameters (Adam 0.001/0.9/0.999, batch 10, up to 32 epochs).
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub epochs_max: usize,
    /// Stop when validation loss fails to improve this many epochs in a
    /// row; `None` disables early stopping.
    pub patience: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 10,
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            epochs_max: 32,
            patience: Some(5),
            seed: 0,
        }
    }
}

/// One epoch's record in the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_pixel_accuracy: Option<f64>,
}

/// What training produced, epoch by epoch.
#[derive(Debug, Clone, Default)]
pub struct TrainingLog {
    pub epochs: Vec<EpochStats>,
    /// 1-based epoch whose validation loss was best (0 if no validation).
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_loss,val_pixel_accuracy\n");
        for e in &self.epochs {
            s.push_str(&format!(
                "{},{:.9},{},{}\n",
                e.epoch,
                e.train_loss,
                e.val_loss.map_or(String::new(), |v| format!("{v:.9}")),
                e.val_pixel_accuracy
                    .map_or(String::new(), |v| format!("{v:.9}")),
            ));
        }
        s
    }
}

fn frames_of<E: Element>(tile: &Raster) -> Vec<Tensor<E>> {
    vec![tile.to_tensor().cast::<E>()]
}

/// Mean cross-entropy loss and mean gradients over (input, target)
/// pairs. Per-sample work runs in parallel when enabled; the reduction
/// is in batch order, so results are independent of thread count.
pub fn batch_gradients<E: Element>(
    model: &ConvLstmModel<E>,
    batch: &[(Tensor<E>, Tensor<E>)],
) -> Result<(f64, ModelGrads<E>), TrainError> {
    if batch.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let per_sample = exec::map_slice(batch, |(x, y)| -> Result<(f64, ModelGrads<E>), TrainError> {
        let cache = model_forward_cached(model, std::slice::from_ref(x))?;
        let loss = cross_entropy(&cache.output, y)?.to_f64();
        let d_out = cross_entropy_backward(&cache.output, y)?;
        let grads = model_backward(model, &cache, &d_out)?;
        Ok((loss, grads))
    });
    let mut total = ModelGrads::zeros_like(model);
    let mut loss_sum = 0.0;
    for r in per_sample {
        let (l, g) = r?;
        loss_sum += l;
        total.add_assign(&g)?;
    }
    total.scale(E::from_f64(1.0 / batch.len() as f64));
    Ok((loss_sum / batch.len() as f64, total))
}

fn eval_loss_accuracy<E: Element>(
    model: &ConvLstmModel<E>,
    data: &Dataset,
) -> Result<(f64, f64), TrainError> {
    let pairs: Vec<(&Raster, &Raster)> = data.x.iter().zip(data.y.iter()).collect();
    let results = exec::map_slice(&pairs, |(x, y)| -> Result<(f64, usize, usize), TrainError> {
        let out = model_forward(model, &frames_of::<E>(x))?;
        let target = y.to_tensor().cast::<E>();
        let loss = cross_entropy(&out, &target)?.to_f64();
        let correct = out
            .data()
            .iter()
            .zip(target.data())
            .filter(|(&p, &t)| (p.to_f64() > 0.5) == (t.to_f64() > 0.5))
            .count();
        Ok((loss, correct, out.len()))
    });
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    let mut total = 0usize;
    for r in results {
        let (l, c, n) = r?;
        loss_sum += l;
        correct += c;
        total += n;
    }
    Ok((loss_sum / pairs.len() as f64, correct as f64 / total as f64))
}

/// Mini-batch Adam training on (X, Y) tile pairs with per-epoch seeded
/// shuffling. Logs train loss and, when a validation set is given,
/// validation loss and pixel accuracy; early-stops on stalled
/// validation loss and restores the best-epoch weights.
pub fn train_model<E: Element>(
    model: &mut ConvLstmModel<E>,
    train: &Dataset,
    validation: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<TrainingLog, TrainError> {
    if train.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if cfg.batch_size == 0 || cfg.epochs_max == 0 || cfg.lr <= 0.0 {
        return Err(TrainError::BadConfig("batch, epochs, lr must be positive"));
    }
    if cfg.batch_size > train.len() {
        return Err(TrainError::BatchTooLarge {
            batch: cfg.batch_size,
            dataset: train.len(),
        });
    }
    if model.config.seq_len != 1 {
        return Err(TrainError::TrainingNeedsSingleFrame(model.config.seq_len));
    }

    let lr = E::from_f64(cfg.lr);
    let beta1 = E::from_f64(cfg.beta1);
    let beta2 = E::from_f64(cfg.beta2);
    let adam_eps = E::from_f64(cfg.adam_eps);
    let mut rng = RngStream::new(cfg.seed);
    let mut log = TrainingLog::default();
    let mut step: u64 = 0;
    let mut best: Option<(f64, usize, Vec<Tensor<E>>)> = None;
    let mut stall = 0usize;

    for epoch in 1..=cfg.epochs_max {
        let mut order: Vec<usize> = (0..train.len()).collect();
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            let pairs: Vec<(Tensor<E>, Tensor<E>)> = batch
                .iter()
                .map(|&i| {
                    (
                        train.x[i].to_tensor().cast::<E>(),
                        train.y[i].to_tensor().cast::<E>(),
                    )
                })
                .collect();
            let (batch_loss, batch_grads) = batch_gradients(model, &pairs)?;
            if !batch_loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            batch_grads.store_into(model);
            step += 1;
            for (_, p) in model.named_parameters_mut() {
                crate::tensor::adam_step(p, lr, beta1, beta2, adam_eps, step);
            }
            epoch_loss += batch_loss;
            batches += 1;
        }
        let train_loss = epoch_loss / batches as f64;

        let (val_loss, val_acc) = match validation {
            Some(v) => {
                let (l, a) = eval_loss_accuracy(model, v)?;
                (Some(l), Some(a))
            }
            None => (None, None),
        };
        log.epochs.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            val_pixel_accuracy: val_acc,
        });
        log::info!(
            "epoch {epoch}: train {train_loss:.6}{}",
            val_loss.map_or(String::new(), |v| format!(", val {v:.6}"))
        );

        if let Some(vl) = val_loss {
            let improved = best.as_ref().map_or(true, |(b, _, _)| vl < *b);
            if improved {
                let snapshot = model
                    .named_parameters_mut()
                    .into_iter()
                    .map(|(_, p)| p.value.clone())
                    .collect();
                best = Some((vl, epoch, snapshot));
                stall = 0;
            } else {
                stall += 1;
                if let Some(patience) = cfg.patience {
                    if stall >= patience {
                        log.stopped_early = true;
                        break;
                    }
                }
            }
        }
    }

    if let Some((_, epoch, snapshot)) = best {
        log.best_epoch = epoch;
        for ((_, p), value) in model.named_parameters_mut().into_iter().zip(snapshot) {
            p.value = value;
        }
    }
    Ok(log)
}

/// Per-tile forward pass over a trained model; `threshold` binarizes
/// the probability maps for classification metrics.
pub fn predict<E: Element>(
    model: &ConvLstmModel<E>,
    tiles: &[Raster],
    threshold: Option<f64>,
) -> Result<Vec<Raster>, TrainError> {
    let outputs = exec::map_slice(tiles, |tile| -> Result<Raster, TrainError> {
        let out = model_forward(model, &frames_of::<E>(tile))?;
        let mut probs: Tensor<f32> = out.cast();
        if let Some(th) = threshold {
            let th = th as f32;
            probs = probs.map(|v| if v > th { 1.0 } else { 0.0 });
        }
        Ok(Raster::from_tensor(&probs)?)
    });
    outputs.into_iter().collect()
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

const CHECKPOINT_MAGIC: &[u8; 5] = b"GCKP1";
const CHECKPOINT_VERSION: u32 = 1;

/// Architecture pseudo-entries carried in the manifest so a checkpoint
/// is self-describing.
fn config_entries(config: &ModelConfig) -> Vec<(String, f32)> {
    vec![
        ("config.layers".into(), config.layers as f32),
        ("config.filters".into(), config.filters as f32),
        ("config.kernel".into(), config.kernel as f32),
        ("config.in_channels".into(), config.in_channels as f32),
        ("config.out_channels".into(), config.out_channels as f32),
        ("config.seq_len".into(), config.seq_len as f32),
        (
            "config.peephole_updated_cell".into(),
            match config.peephole {
                OutputGatePeephole::PreviousCell => 0.0,
                OutputGatePeephole::UpdatedCell => 1.0,
            },
        ),
    ]
}

/// Serialize: magic, version, manifest (name, shape list), then
/// little-endian f32 blobs in manifest order.
pub fn save_checkpoint(model: &ConvLstmModel<f32>, path: &Path) -> Result<(), TrainError> {
    let mut clone = model.clone();
    let mut manifest: Vec<(String, Vec<usize>, Vec<f32>)> = Vec::new();
    for (name, value) in config_entries(&clone.config) {
        manifest.push((name, vec![1], vec![value]));
    }
    for (name, p) in clone.named_parameters_mut() {
        manifest.push((name, p.value.shape().to_vec(), p.value.data().to_vec()));
    }

    let mut buf = Vec::new();
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(manifest.len() as u32).to_le_bytes());
    for (name, shape, _) in &manifest {
        buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
        buf.extend_from_slice(name.as_bytes());
        buf.extend_from_slice(&(shape.len() as u32).to_le_bytes());
        for &d in shape {
            buf.extend_from_slice(&(d as u32).to_le_bytes());
        }
    }
    for (_, _, data) in &manifest {
        for v in data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(|e| TrainError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

struct CheckpointReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> CheckpointReader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], TrainError> {
        if self.pos + n > self.bytes.len() {
            return Err(TrainError::BadCheckpoint("truncated file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, TrainError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Load a checkpoint saved by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<ConvLstmModel<f32>, TrainError> {
    let bytes = fs::read(path).map_err(|e| TrainError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut r = CheckpointReader {
        bytes: &bytes,
        pos: 0,
    };
    if r.take(5)? != CHECKPOINT_MAGIC {
        return Err(TrainError::BadCheckpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(TrainError::BadCheckpoint(format!(
            "unsupported version {version}"
        )));
    }
    let count = r.u32()? as usize;
    let mut manifest: Vec<(String, Vec<usize>)> = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| TrainError::BadCheckpoint("non-utf8 name".into()))?;
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        manifest.push((name, shape));
    }
    let mut blobs: Vec<(String, Vec<usize>, Vec<f32>)> = Vec::with_capacity(count);
    for (name, shape) in manifest {
        let n: usize = shape.iter().product();
        let raw = r.take(n * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        blobs.push((name, shape, data));
    }
    if r.pos != bytes.len() {
        return Err(TrainError::BadCheckpoint("trailing bytes".into()));
    }

    let get_cfg = |key: &str| -> Result<f32, TrainError> {
        blobs
            .iter()
            .find(|(n, _, _)| n == key)
            .map(|(_, _, d)| d[0])
            .ok_or_else(|| TrainError::BadCheckpoint(format!("missing {key}")))
    };
    let config = ModelConfig {
        layers: get_cfg("config.layers")? as usize,
        filters: get_cfg("config.filters")? as usize,
        kernel: get_cfg("config.kernel")? as usize,
        in_channels: get_cfg("config.in_channels")? as usize,
        out_channels: get_cfg("config.out_channels")? as usize,
        seq_len: get_cfg("config.seq_len")? as usize,
        peephole: if get_cfg("config.peephole_updated_cell")? != 0.0 {
            OutputGatePeephole::UpdatedCell
        } else {
            OutputGatePeephole::PreviousCell
        },
    };
    let mut model = ConvLstmModel::zeros(config)?;
    for (name, p) in model.named_parameters_mut() {
        let (_, shape, data) = blobs
            .iter()
            .find(|(n, _, _)| *n == name)
            .ok_or_else(|| TrainError::BadCheckpoint(format!("missing parameter {name}")))?;
        if shape.as_slice() != p.value.shape() {
            return Err(TrainError::BadCheckpoint(format!(
                "parameter {name}: shape {:?} does not match model {:?}",
                shape,
                p.value.shape()
            )));
        }
        p.value = Tensor::from_vec(shape, data.clone())
            .map_err(|e| TrainError::BadCheckpoint(e.to_string()))?;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{make_dataset, tile, DatasetRole, SourceDepth};
    use crate::tensor::{central_differences, max_relative_error};

    fn sigmoid(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    #[test]
    fn zero_cell_closed_form() {
        // All weights and biases zero, zero state: gates are exactly 0.5,
        // candidate and states exactly zero.
        let cell = ConvLstmCell::<f64>::zeros(1, 2, 3);
        let x = Tensor::full(&[1, 4, 4], 0.7);
        let state = CellState::zeros(2, 4, 4);
        let (next, cache) = cell_forward(&cell, &x, &state).unwrap();
        assert!(cache.input_gate.data().iter().all(|&v| v == 0.5));
        assert!(cache.forget_gate.data().iter().all(|&v| v == 0.5));
        assert!(cache.output_gate.data().iter().all(|&v| v == 0.5));
        assert!(cache.candidate.data().iter().all(|&v| v == 0.0));
        assert!(next.c.data().iter().all(|&v| v == 0.0));
        assert!(next.h.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn scalar_all_ones_cell_matches_independent_evaluation() {
        // 1x1 spatial, 1 channel, 1x1 kernels, all weights 1, biases 0,
        // zero state, X = 1. Scalar oracle evaluated in plain f64.
        let mut cell = ConvLstmCell::<f64>::zeros(1, 1, 1);
        for (_, p) in cell.named_params_mut() {
            p.value.fill(1.0);
        }
        for b in [&mut cell.b_i, &mut cell.b_f, &mut cell.b_c, &mut cell.b_o] {
            b.value.fill(0.0);
        }
        let x = Tensor::full(&[1, 1, 1], 1.0);
        let state = CellState::zeros(1, 1, 1);
        let (next, cache) = cell_forward(&cell, &x, &state).unwrap();

        // Oracle: i = f = sigma(1*1 + 1*0 + 1*0), o likewise reads C_{t-1}=0,
        // candidate = tanh(1), C_1 = sigma(1)*tanh(1), H_1 = sigma(1)*tanh(C_1).
        let gate = sigmoid(1.0);
        let cand = 1.0f64.tanh();
        let c1 = gate * cand;
        let h1 = gate * c1.tanh();
        assert!((cache.input_gate.data()[0] - gate).abs() < 1e-12);
        assert!((cache.forget_gate.data()[0] - gate).abs() < 1e-12);
        assert!((cache.output_gate.data()[0] - gate).abs() < 1e-12);
        assert!((cache.candidate.data()[0] - cand).abs() < 1e-12);
        assert!((next.c.data()[0] - c1).abs() < 1e-12);
        assert!((next.h.data()[0] - h1).abs() < 1e-12);
    }

    #[test]
    fn spatial_dims_preserved_for_any_input_size() {
        let mut rng = RngStream::new(1);
        let cell =
            ConvLstmCell::<f64>::init(1, 3, 3, OutputGatePeephole::PreviousCell, &mut rng)
                .unwrap();
        for (h, w) in [(3, 3), (5, 9), (16, 4)] {
            let x = Tensor::full(&[1, h, w], 0.3);
            let state = CellState::zeros(3, h, w);
            let (next, _) = cell_forward(&cell, &x, &state).unwrap();
            assert_eq!(next.h.shape(), &[3, h, w]);
            assert_eq!(next.c.shape(), &[3, h, w]);
        }
    }

    /// Project both cell outputs onto fixed random maps so a single
    /// scalar objective exercises dH and dC paths at once.
    fn cell_objective(
        cell: &ConvLstmCell<f64>,
        x: &Tensor<f64>,
        state: &CellState<f64>,
        r_h: &Tensor<f64>,
        r_c: &Tensor<f64>,
    ) -> f64 {
        let (next, _) = cell_forward(cell, x, state).unwrap();
        let mut acc = 0.0;
        for i in 0..next.h.len() {
            acc += next.h.data()[i] * r_h.data()[i] + next.c.data()[i] * r_c.data()[i];
        }
        acc
    }

    fn random_cell_setup(
        seed: u64,
        peephole: OutputGatePeephole,
    ) -> (
        ConvLstmCell<f64>,
        Tensor<f64>,
        CellState<f64>,
        Tensor<f64>,
        Tensor<f64>,
    ) {
        let mut rng = RngStream::new(seed);
        let mut cell = ConvLstmCell::<f64>::init(1, 1, 3, peephole, &mut rng).unwrap();
        for (_, p) in cell.named_params_mut() {
            // Give peepholes and biases nonzero values so their paths carry
            // gradient.
            if p.value.data().iter().all(|&v| v == 0.0) {
                p.value = Tensor::from_fn(p.value.shape(), |_| rng.uniform_symmetric(0.5));
            }
        }
        let x = Tensor::from_fn(&[1, 4, 4], |_| rng.uniform_symmetric(1.0));
        let state = CellState {
            h: Tensor::from_fn(&[1, 4, 4], |_| rng.uniform_symmetric(1.0)),
            c: Tensor::from_fn(&[1, 4, 4], |_| rng.uniform_symmetric(1.0)),
        };
        let r_h = Tensor::from_fn(&[1, 4, 4], |_| rng.uniform_symmetric(1.0));
        let r_c = Tensor::from_fn(&[1, 4, 4], |_| rng.uniform_symmetric(1.0));
        (cell, x, state, r_h, r_c)
    }

    #[test]
    fn cell_backward_matches_finite_differences_both_variants() {
        for peephole in [
            OutputGatePeephole::PreviousCell,
            OutputGatePeephole::UpdatedCell,
        ] {
            let (cell, x, state, r_h, r_c) = random_cell_setup(11, peephole);
            let (_, cache) = cell_forward(&cell, &x, &state).unwrap();
            let (grads, input_grads) = cell_backward(&cell, &cache, &r_h, &r_c).unwrap();

            type Get = fn(&mut ConvLstmCell<f64>) -> &mut Tensor<f64>;
            type GetG = fn(&CellGrads<f64>) -> &Tensor<f64>;
            let params: [(&str, Get, GetG); 15] = [
                ("w_xi", |c| &mut c.w_xi.value, |g| &g.w_xi),
                ("w_hi", |c| &mut c.w_hi.value, |g| &g.w_hi),
                ("w_xf", |c| &mut c.w_xf.value, |g| &g.w_xf),
                ("w_hf", |c| &mut c.w_hf.value, |g| &g.w_hf),
                ("w_xo", |c| &mut c.w_xo.value, |g| &g.w_xo),
                ("w_ho", |c| &mut c.w_ho.value, |g| &g.w_ho),
                ("w_xc", |c| &mut c.w_xc.value, |g| &g.w_xc),
                ("w_hc", |c| &mut c.w_hc.value, |g| &g.w_hc),
                ("w_ci", |c| &mut c.w_ci.value, |g| &g.w_ci),
                ("w_cf", |c| &mut c.w_cf.value, |g| &g.w_cf),
                ("w_co", |c| &mut c.w_co.value, |g| &g.w_co),
                ("b_i", |c| &mut c.b_i.value, |g| &g.b_i),
                ("b_f", |c| &mut c.b_f.value, |g| &g.b_f),
                ("b_c", |c| &mut c.b_c.value, |g| &g.b_c),
                ("b_o", |c| &mut c.b_o.value, |g| &g.b_o),
            ];
            for (name, get, get_g) in params {
                let base = get(&mut cell.clone()).clone();
                let numeric = central_differences(&base, 1e-6, |probe| {
                    let mut c = cell.clone();
                    *get(&mut c) = probe.clone();
                    cell_objective(&c, &x, &state, &r_h, &r_c)
                })
                .unwrap();
                let err = max_relative_error(get_g(&grads), &numeric, 1e-4);
                assert!(err < 1e-4, "{peephole:?} {name}: error {err}");
            }

            // Input gradients: X, H_{t-1}, C_{t-1}.
            for (name, tensor, analytic) in [
                ("x", &x, &input_grads.x),
                ("h_prev", &state.h, &input_grads.h_prev),
                ("c_prev", &state.c, &input_grads.c_prev),
            ] {
                let numeric = central_differences(tensor, 1e-6, |probe| {
                    let (xx, st) = match name {
                        "x" => (probe.clone(), state.clone()),
                        "h_prev" => (
                            x.clone(),
                            CellState {
                                h: probe.clone(),
                                c: state.c.clone(),
                            },
                        ),
                        _ => (
                            x.clone(),
                            CellState {
                                h: state.h.clone(),
                                c: probe.clone(),
                            },
                        ),
                    };
                    cell_objective(&cell, &xx, &st, &r_h, &r_c)
                })
                .unwrap();
                let err = max_relative_error(analytic, &numeric, 1e-4);
                assert!(err < 1e-4, "{peephole:?} input {name}: error {err}");
            }
        }
    }

    #[test]
    fn dropping_forget_or_peephole_paths_breaks_the_check() {
        // d C_{t-1} must include the forget-gate path and the peephole
        // paths; either one alone fails the finite-difference check.
        let (cell, x, state, r_h, r_c) = random_cell_setup(23, OutputGatePeephole::PreviousCell);
        let (_, cache) = cell_forward(&cell, &x, &state).unwrap();
        let (_, input_grads) = cell_backward(&cell, &cache, &r_h, &r_c).unwrap();

        let numeric = central_differences(&state.c, 1e-6, |probe| {
            let st = CellState {
                h: state.h.clone(),
                c: probe.clone(),
            };
            cell_objective(&cell, &x, &st, &r_h, &r_c)
        })
        .unwrap();
        assert!(max_relative_error(&input_grads.c_prev, &numeric, 1e-4) < 1e-4);

        // Rebuild d C_total as the backward does, then ablate.
        let tanh_c = cache.c_new.map(|v| v.tanh());
        let mut d_c_total = r_c.clone();
        for i in 0..d_c_total.len() {
            let tc = tanh_c.data()[i];
            d_c_total.data_mut()[i] +=
                r_h.data()[i] * cache.output_gate.data()[i] * (1.0 - tc * tc);
        }
        let forget_only = d_c_total
            .zip_map(&cache.forget_gate, |dc, f| dc * f)
            .unwrap();
        assert!(
            max_relative_error(&forget_only, &numeric, 1e-4) > 1e-4,
            "forget-only gradient should fail the check"
        );

        // Peepholes-only (dropping the forget path) must also fail.
        let mut peephole_only = input_grads.c_prev.clone();
        for i in 0..peephole_only.len() {
            peephole_only.data_mut()[i] -= forget_only.data()[i];
        }
        assert!(
            max_relative_error(&peephole_only, &numeric, 1e-4) > 1e-4,
            "peephole-only gradient should fail the check"
        );
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let (cell, x, state, _, _) = random_cell_setup(5, OutputGatePeephole::PreviousCell);
        let (_, cache) = cell_forward(&cell, &x, &state).unwrap();
        let zero = Tensor::zeros(&[1, 4, 4]);
        let (grads, input_grads) = cell_backward(&cell, &cache, &zero, &zero).unwrap();
        assert!(grads.w_xi.data().iter().all(|&v| v == 0.0));
        assert!(grads.w_co.data().iter().all(|&v| v == 0.0));
        assert!(grads.b_f.data().iter().all(|&v| v == 0.0));
        assert!(input_grads.x.data().iter().all(|&v| v == 0.0));
        assert!(input_grads.c_prev.data().iter().all(|&v| v == 0.0));
    }

    fn small_config() -> ModelConfig {
        ModelConfig {
            layers: 2,
            filters: 3,
            kernel: 3,
            in_channels: 1,
            out_channels: 1,
            seq_len: 1,
            peephole: OutputGatePeephole::PreviousCell,
        }
    }

    #[test]
    fn zero_model_outputs_exactly_half() {
        let model = ConvLstmModel::<f64>::zeros(small_config()).unwrap();
        let x = Tensor::full(&[1, 8, 8], 0.9);
        let out = model_forward(&model, &[x]).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.5));
        assert_eq!(out.shape(), &[1, 8, 8]);
    }

    #[test]
    fn model_output_strictly_in_unit_interval_and_deterministic() {
        let model =
            ConvLstmModel::<f64>::init(small_config(), &mut RngStream::new(2)).unwrap();
        let x = Tensor::from_fn(&[1, 10, 6], |i| (i % 7) as f64 / 7.0);
        let a = model_forward(&model, &[x.clone()]).unwrap();
        assert!(a.data().iter().all(|&v| v > 0.0 && v < 1.0));
        assert_eq!(a.shape(), &[1, 10, 6]);
        let again =
            ConvLstmModel::<f64>::init(small_config(), &mut RngStream::new(2)).unwrap();
        let b = model_forward(&again, &[x]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn model_rejects_wrong_sequence_length() {
        let model = ConvLstmModel::<f64>::zeros(small_config()).unwrap();
        let x = Tensor::full(&[1, 8, 8], 0.1);
        assert!(matches!(
            model_forward(&model, &[x.clone(), x]),
            Err(TrainError::SequenceLen { .. })
        ));
        assert!(matches!(
            model_forward(&model, &[]),
            Err(TrainError::EmptySequence)
        ));
    }

    #[test]
    fn model_backward_matches_finite_differences() {
        // Reduced model: 1 layer, 2 filters, 8x8, T=1.
        let config = ModelConfig {
            layers: 1,
            filters: 2,
            kernel: 3,
            in_channels: 1,
            out_channels: 1,
            seq_len: 1,
            peephole: OutputGatePeephole::PreviousCell,
        };
        let mut rng = RngStream::new(31);
        let model = ConvLstmModel::<f64>::init(config, &mut rng).unwrap();
        let x = Tensor::from_fn(&[1, 8, 8], |_| rng.uniform());
        let target = Tensor::from_fn(&[1, 8, 8], |_| {
            if rng.uniform() < 0.5 {
                0.0
            } else {
                1.0
            }
        });

        let cache = model_forward_cached(&model, &[x.clone()]).unwrap();
        let d_out = cross_entropy_backward(&cache.output, &target).unwrap();
        let grads = model_backward(&model, &cache, &d_out).unwrap();
        let mut with_grads = model.clone();
        grads.store_into(&mut with_grads);

        for (name, p) in with_grads.named_parameters_mut() {
            let numeric = central_differences(&p.value.clone(), 1e-6, |probe| {
                let mut m = model.clone();
                for (n2, p2) in m.named_parameters_mut() {
                    if n2 == name {
                        p2.value = probe.clone();
                    }
                }
                let out = model_forward(&m, &[x.clone()]).unwrap();
                cross_entropy(&out, &target).unwrap()
            })
            .unwrap();
            let err = max_relative_error(&p.grad, &numeric, 1e-4);
            assert!(err < 1e-4, "{name}: error {err}");
        }
    }

    #[test]
    fn bptt_over_two_steps_checks_out() {
        // T=2 exercises the recurrent H/C paths across time.
        let config = ModelConfig {
            layers: 2,
            filters: 2,
            kernel: 3,
            in_channels: 1,
            out_channels: 1,
            seq_len: 2,
            peephole: OutputGatePeephole::PreviousCell,
        };
        let mut rng = RngStream::new(37);
        let model = ConvLstmModel::<f64>::init(config, &mut rng).unwrap();
        let frames = vec![
            Tensor::from_fn(&[1, 6, 6], |_| rng.uniform()),
            Tensor::from_fn(&[1, 6, 6], |_| rng.uniform()),
        ];
        let target = Tensor::from_fn(&[1, 6, 6], |_| {
            if rng.uniform() < 0.5 {
                0.0
            } else {
                1.0
            }
        });
        let cache = model_forward_cached(&model, &frames).unwrap();
        let d_out = cross_entropy_backward(&cache.output, &target).unwrap();
        let grads = model_backward(&model, &cache, &d_out).unwrap();
        let mut with_grads = model.clone();
        grads.store_into(&mut with_grads);
        for (name, p) in with_grads.named_parameters_mut() {
            let numeric = central_differences(&p.value.clone(), 1e-6, |probe| {
                let mut m = model.clone();
                for (n2, p2) in m.named_parameters_mut() {
                    if n2 == name {
                        p2.value = probe.clone();
                    }
                }
                let out = model_forward(&m, &frames).unwrap();
                cross_entropy(&out, &target).unwrap()
            })
            .unwrap();
            let err = max_relative_error(&p.grad, &numeric, 1e-4);
            assert!(err < 1e-4, "{name}: error {err}");
        }
    }

    fn mask_raster(rng: &mut RngStream, size: usize) -> Raster {
        let data: Vec<f32> = (0..size * size)
            .map(|_| if rng.uniform() < 0.3 { 1.0 } else { 0.0 })
            .collect();
        Raster::new(size, size, 1, data, SourceDepth::Eight).unwrap()
    }

    #[test]
    fn training_learns_the_identity_task() {
        // Y = X on a handful of tiles: loss should collapse well below
        // its starting point.
        let mut rng = RngStream::new(77);
        let big: Vec<f32> = (0..64 * 64)
            .map(|_| if rng.uniform() < 0.3 { 1.0 } else { 0.0 })
            .collect();
        let r = Raster::new(64, 64, 1, big, SourceDepth::Eight).unwrap();
        let ts = tile(&r, 16).unwrap();
        let dates = vec![ts.clone(), ts];
        let data = make_dataset(&dates, 1, 2, DatasetRole::Train).unwrap();
        let config = ModelConfig {
            layers: 2,
            filters: 4,
            ..small_config()
        };
        let mut model = ConvLstmModel::<f32>::init(config, &mut RngStream::new(3)).unwrap();
        let cfg = TrainConfig {
            batch_size: 4,
            lr: 0.05,
            epochs_max: 30,
            patience: None,
            seed: 9,
            ..TrainConfig::default()
        };
        let log = train_model(&mut model, &data, None, &cfg).unwrap();
        let first = log.epochs.first().unwrap().train_loss;
        let last = log.epochs.last().unwrap().train_loss;
        assert!(
            last < 0.1 * first,
            "loss {last} did not drop below 10% of {first}"
        );
        assert!(log.epochs.len() <= cfg.epochs_max);
    }

    #[test]
    fn training_overfits_a_single_sample() {
        let mut rng = RngStream::new(41);
        let x = mask_raster(&mut rng, 32);
        let y = mask_raster(&mut rng, 32);
        let data = Dataset {
            x: vec![x],
            y: vec![y],
            role: DatasetRole::Train,
            k: 1,
            m: 2,
        };
        let config = ModelConfig {
            layers: 2,
            filters: 4,
            ..small_config()
        };
        let mut model = ConvLstmModel::<f32>::init(config, &mut RngStream::new(8)).unwrap();
        let cfg = TrainConfig {
            batch_size: 1,
            lr: 0.02,
            epochs_max: 500,
            patience: None,
            seed: 1,
            ..TrainConfig::default()
        };
        let log = train_model(&mut model, &data, None, &cfg).unwrap();
        let last = log.epochs.last().unwrap().train_loss;
        assert!(last < 0.05, "single-sample loss stuck at {last}");
    }

    #[test]
    fn training_is_bit_reproducible() {
        let mut rng = RngStream::new(55);
        let r = mask_raster(&mut rng, 32);
        let ts = tile(&r, 16).unwrap();
        let data = make_dataset(&[ts.clone(), ts], 1, 2, DatasetRole::Train).unwrap();
        let run = || {
            let mut model =
                ConvLstmModel::<f32>::init(small_config(), &mut RngStream::new(4)).unwrap();
            let cfg = TrainConfig {
                batch_size: 2,
                epochs_max: 3,
                patience: None,
                seed: 12,
                ..TrainConfig::default()
            };
            let log = train_model(&mut model, &data, None, &cfg).unwrap();
            let losses: Vec<f64> = log.epochs.iter().map(|e| e.train_loss).collect();
            let out = model_forward(&model, &[data.x[0].to_tensor()]).unwrap();
            (losses, out)
        };
        let (l1, o1) = run();
        let (l2, o2) = run();
        assert_eq!(l1, l2);
        assert_eq!(o1, o2);
    }

    #[test]
    fn rejects_oversized_batch_and_empty_dataset() {
        let mut rng = RngStream::new(3);
        let r = mask_raster(&mut rng, 16);
        let data = Dataset {
            x: vec![r.clone()],
            y: vec![r],
            role: DatasetRole::Train,
            k: 1,
            m: 2,
        };
        let mut model = ConvLstmModel::<f32>::zeros(small_config()).unwrap();
        let cfg = TrainConfig {
            batch_size: 10,
            ..TrainConfig::default()
        };
        assert!(matches!(
            train_model(&mut model, &data, None, &cfg),
            Err(TrainError::BatchTooLarge { .. })
        ));
        let empty = Dataset {
            x: vec![],
            y: vec![],
            role: DatasetRole::Train,
            k: 1,
            m: 2,
        };
        assert!(matches!(
            train_model(&mut model, &empty, None, &TrainConfig::default()),
            Err(TrainError::EmptyDataset)
        ));
    }

    #[test]
    fn predict_binarizes_at_the_threshold() {
        let model = ConvLstmModel::<f32>::zeros(small_config()).unwrap();
        let mut rng = RngStream::new(10);
        let tiles = vec![mask_raster(&mut rng, 8), mask_raster(&mut rng, 8)];
        let probs = predict(&model, &tiles, None).unwrap();
        assert_eq!(probs.len(), tiles.len());
        assert!(probs[0].data().iter().all(|&v| v == 0.5));
        // 0.5 is not strictly above the 0.5 threshold.
        let hard = predict(&model, &tiles, Some(0.5)).unwrap();
        assert!(hard[0].data().iter().all(|&v| v == 0.0));
        let low = predict(&model, &tiles, Some(0.49)).unwrap();
        assert!(low[0].data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn checkpoint_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path_a = dir.path().join("a.gckp");
        let path_b = dir.path().join("b.gckp");
        let config = ModelConfig {
            layers: 2,
            filters: 3,
            peephole: OutputGatePeephole::UpdatedCell,
            ..small_config()
        };
        let model = ConvLstmModel::<f32>::init(config, &mut RngStream::new(6)).unwrap();
        save_checkpoint(&model, &path_a).unwrap();
        let loaded = load_checkpoint(&path_a).unwrap();
        assert_eq!(loaded.config().peephole, OutputGatePeephole::UpdatedCell);
        save_checkpoint(&loaded, &path_b).unwrap();
        assert_eq!(fs::read(&path_a).unwrap(), fs::read(&path_b).unwrap());

        // Same outputs from the reloaded model.
        let x = Tensor::from_fn(&[1, 8, 8], |i| (i % 5) as f32 / 5.0);
        let a = model_forward(&model, &[x.clone()]).unwrap();
        let b = model_forward(&loaded, &[x]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn corrupt_checkpoints_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.gckp");
        fs::write(&path, b"NOTAMAGIC").unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(TrainError::BadCheckpoint(_))
        ));
        let model = ConvLstmModel::<f32>::zeros(small_config()).unwrap();
        save_checkpoint(&model, &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        fs::write(&path, bytes).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(TrainError::BadCheckpoint(_))
        ));
    }
}
