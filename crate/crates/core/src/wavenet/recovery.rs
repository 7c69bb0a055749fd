//! Single-layer teacher/student task: recover a fractional dilation `d₀`
//! from input/output pairs of a fixed symmetric kernel.

use serde::Serialize;

use crate::autodiff::{AdamConfig, AdamState, DilationParam, Graph, PaddingPolicy, ParamRef, Tensor};
use crate::error::Result;
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoverySetup {
    pub d_true: f64,
    pub d_init: f64,
    pub d_max: f64,
    pub steps: usize,
    pub lr: f64,
    pub signal_len: usize,
    pub seed: u64,
}

impl RecoverySetup {
    pub fn new(d_true: f64, d_init: f64, seed: u64) -> Self {
        Self {
            d_true,
            d_init,
            d_max: 4.0,
            steps: 2000,
            lr: 5e-3,
            signal_len: 512,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecoveryRun {
    pub d_final: f64,
    /// Loss before each step.
    pub losses: Vec<f64>,
    /// Dilation after each step.
    pub trajectory: Vec<f64>,
}

impl RecoveryRun {
    pub fn error(&self, d_true: f64) -> f64 {
        (self.d_final - d_true).abs()
    }
}

/// Smooth test signal: white noise through a 16-tap moving average.
fn smooth_signal(rng: &mut Rng, len: usize) -> Vec<f64> {
    const WIDTH: usize = 16;
    let white: Vec<f64> = (0..len + WIDTH).map(|_| rng.gaussian()).collect();
    white.windows(WIDTH).take(len).map(|w| w.iter().sum::<f64>() / (WIDTH as f64).sqrt()).collect()
}

/// Target `x(t − d₀) + x(t + d₀)`; the student is the same layer with its
/// dilation free, trained by Adam on MSE against a fresh signal each step.
pub fn recover_dilation(setup: &RecoverySetup) -> Result<RecoveryRun> {
    let kernel = Tensor::new(&[1, 1, 3], vec![1.0, 0.0, 1.0])?;
    let mut d = DilationParam::new(setup.d_init, setup.d_max)?;
    let mut adam = AdamState::new(AdamConfig {
        lr: setup.lr,
        ..Default::default()
    });
    let mut rng = Rng::new(setup.seed);
    let mut losses = Vec::with_capacity(setup.steps);
    let mut trajectory = Vec::with_capacity(setup.steps);
    for _ in 0..setup.steps {
        let x = Tensor::new(&[1, setup.signal_len], smooth_signal(&mut rng, setup.signal_len))?;
        let mut g = Graph::new();
        let (xi, ki) = (g.leaf(x), g.leaf(kernel.clone()));
        let teacher_d = g.leaf(Tensor::scalar(setup.d_true));
        let target = g.conv1d_frac(xi, ki, teacher_d, PaddingPolicy::Same)?;
        let target = g.tensor(target).clone();
        let ti = g.leaf(target);
        let di = g.leaf(d.tensor().clone());
        let y = g.conv1d_frac(xi, ki, di, PaddingPolicy::Same)?;
        let loss = g.mse_loss(y, ti)?;
        losses.push(g.tensor(loss).item());
        g.backward(loss)?;
        d.tensor_mut().grad_mut()[0] = g.tensor(di).grad()[0];
        adam.step(&mut [ParamRef::dilation("d", &mut d)])?;
        trajectory.push(d.value());
    }
    Ok(RecoveryRun {
        d_final: d.value(),
        losses,
        trajectory,
    })
}
