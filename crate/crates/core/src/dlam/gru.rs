//! Bidirectional GRU layers and the IMU network built from them.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::DlamError;
use crate::nav::ImuSample;

/// Samples in the IMU network input window.
pub const IMU_WINDOW: usize = 10;
/// IMU input width `[ω_m a_m]`.
pub const IMU_INPUT: usize = 6;
/// Outputs of the IMU network, one logit per IMU noise sigma.
pub const IMU_OUTPUTS: usize = 12;

/// Parameters of one GRU direction. Input-side (`b_*`) and hidden-side
/// (`bh_*`) biases are kept separately for every gate.
#[derive(Clone, Debug, PartialEq)]
pub struct GruDirection {
    pub w_z: DMatrix<f32>,
    pub w_r: DMatrix<f32>,
    pub w_n: DMatrix<f32>,
    pub u_z: DMatrix<f32>,
    pub u_r: DMatrix<f32>,
    pub u_n: DMatrix<f32>,
    pub b_z: DVector<f32>,
    pub b_r: DVector<f32>,
    pub b_n: DVector<f32>,
    pub bh_z: DVector<f32>,
    pub bh_r: DVector<f32>,
    pub bh_n: DVector<f32>,
}

impl GruDirection {
    pub fn zeros(hidden: usize, input: usize) -> Self {
        Self {
            w_z: DMatrix::zeros(hidden, input),
            w_r: DMatrix::zeros(hidden, input),
            w_n: DMatrix::zeros(hidden, input),
            u_z: DMatrix::zeros(hidden, hidden),
            u_r: DMatrix::zeros(hidden, hidden),
            u_n: DMatrix::zeros(hidden, hidden),
            b_z: DVector::zeros(hidden),
            b_r: DVector::zeros(hidden),
            b_n: DVector::zeros(hidden),
            bh_z: DVector::zeros(hidden),
            bh_r: DVector::zeros(hidden),
            bh_n: DVector::zeros(hidden),
        }
    }

    /// Uniform weights in `[-scale, scale]`.
    pub fn random<R: Rng + ?Sized>(hidden: usize, input: usize, scale: f32, rng: &mut R) -> Self {
        let mut m = |r, c| DMatrix::from_fn(r, c, |_, _| rng.random_range(-scale..=scale));
        Self {
            w_z: m(hidden, input),
            w_r: m(hidden, input),
            w_n: m(hidden, input),
            u_z: m(hidden, hidden),
            u_r: m(hidden, hidden),
            u_n: m(hidden, hidden),
            b_z: m(hidden, 1).column(0).into_owned(),
            b_r: m(hidden, 1).column(0).into_owned(),
            b_n: m(hidden, 1).column(0).into_owned(),
            bh_z: m(hidden, 1).column(0).into_owned(),
            bh_r: m(hidden, 1).column(0).into_owned(),
            bh_n: m(hidden, 1).column(0).into_owned(),
        }
    }

    pub fn hidden(&self) -> usize {
        self.u_z.nrows()
    }

    pub fn input(&self) -> usize {
        self.w_z.ncols()
    }

    pub fn param_count(&self) -> usize {
        let (h, i) = (self.hidden(), self.input());
        3 * (h * i + h * h + 2 * h)
    }

    pub(crate) fn check_shapes(&self) -> Result<(), DlamError> {
        let (h, i) = (self.hidden(), self.input());
        let mats = [
            (&self.w_z, (h, i)),
            (&self.w_r, (h, i)),
            (&self.w_n, (h, i)),
            (&self.u_z, (h, h)),
            (&self.u_r, (h, h)),
            (&self.u_n, (h, h)),
        ];
        for (m, shape) in mats {
            if m.shape() != shape {
                return Err(DlamError::Shape(format!(
                    "GRU matrix {:?}, expected {:?}",
                    m.shape(),
                    shape
                )));
            }
        }
        for b in [&self.b_z, &self.b_r, &self.b_n, &self.bh_z, &self.bh_r, &self.bh_n] {
            if b.len() != h {
                return Err(DlamError::Shape(format!("GRU bias {}, expected {h}", b.len())));
            }
        }
        Ok(())
    }
}

fn sigmoid(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}

/// One GRU step: update gate `z`, reset gate `r`, candidate `n`,
/// `h⁺ = z∘h + (1 - z)∘n`.
pub fn gru_cell(x: &DVector<f32>, h: &DVector<f32>, w: &GruDirection) -> DVector<f32> {
    let z = (&w.w_z * x + &w.b_z + &w.u_z * h + &w.bh_z).map(sigmoid);
    let r = (&w.w_r * x + &w.b_r + &w.u_r * h + &w.bh_r).map(sigmoid);
    let hidden_n = &w.u_n * h + &w.bh_n;
    let n = (&w.w_n * x + &w.b_n + r.component_mul(&hidden_n)).map(f32::tanh);
    z.component_mul(h) + (z.map(|v| 1.0 - v)).component_mul(&n)
}

/// Runs the forward direction left→right and the backward direction
/// right→left from zero hidden states; each output row is `[h_fwd; h_bwd]`.
pub fn bigru_layer(
    seq: &[DVector<f32>],
    fwd: &GruDirection,
    bwd: &GruDirection,
) -> Vec<DVector<f32>> {
    let hf = fwd.hidden();
    let hb = bwd.hidden();
    let mut forward = Vec::with_capacity(seq.len());
    let mut h = DVector::zeros(hf);
    for x in seq {
        h = gru_cell(x, &h, fwd);
        forward.push(h.clone());
    }
    let mut backward = vec![DVector::zeros(hb); seq.len()];
    let mut h = DVector::zeros(hb);
    for (l, x) in seq.iter().enumerate().rev() {
        h = gru_cell(x, &h, bwd);
        backward[l] = h.clone();
    }
    forward
        .into_iter()
        .zip(backward)
        .map(|(f, b)| {
            let mut out = DVector::zeros(hf + hb);
            out.rows_mut(0, hf).copy_from(&f);
            out.rows_mut(hf, hb).copy_from(&b);
            out
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct GruLayer {
    pub fwd: GruDirection,
    pub bwd: GruDirection,
}

impl GruLayer {
    pub fn param_count(&self) -> usize {
        self.fwd.param_count() + self.bwd.param_count()
    }
}

/// Two stacked bidirectional GRU layers, ReLU, dense head to 12 logits.
#[derive(Clone, Debug, PartialEq)]
pub struct ImuNetWeights {
    pub layer1: GruLayer,
    pub layer2: GruLayer,
    /// 12 × 2d_h.
    pub head_weight: DMatrix<f32>,
    pub head_bias: DVector<f32>,
}

impl ImuNetWeights {
    pub fn zeros(hidden: usize) -> Self {
        Self {
            layer1: GruLayer {
                fwd: GruDirection::zeros(hidden, IMU_INPUT),
                bwd: GruDirection::zeros(hidden, IMU_INPUT),
            },
            layer2: GruLayer {
                fwd: GruDirection::zeros(hidden, 2 * hidden),
                bwd: GruDirection::zeros(hidden, 2 * hidden),
            },
            head_weight: DMatrix::zeros(IMU_OUTPUTS, 2 * hidden),
            head_bias: DVector::zeros(IMU_OUTPUTS),
        }
    }

    pub fn random<R: Rng + ?Sized>(hidden: usize, scale: f32, rng: &mut R) -> Self {
        Self {
            layer1: GruLayer {
                fwd: GruDirection::random(hidden, IMU_INPUT, scale, rng),
                bwd: GruDirection::random(hidden, IMU_INPUT, scale, rng),
            },
            layer2: GruLayer {
                fwd: GruDirection::random(hidden, 2 * hidden, scale, rng),
                bwd: GruDirection::random(hidden, 2 * hidden, scale, rng),
            },
            head_weight: DMatrix::from_fn(IMU_OUTPUTS, 2 * hidden, |_, _| {
                rng.random_range(-scale..=scale)
            }),
            head_bias: DVector::from_fn(IMU_OUTPUTS, |_, _| rng.random_range(-scale..=scale)),
        }
    }

    pub fn hidden(&self) -> usize {
        self.layer1.fwd.hidden()
    }

    pub fn param_count(&self) -> usize {
        self.layer1.param_count()
            + self.layer2.param_count()
            + self.head_weight.len()
            + self.head_bias.len()
    }

    pub(crate) fn check_shapes(&self) -> Result<(), DlamError> {
        let h = self.hidden();
        for (dir, input) in [
            (&self.layer1.fwd, IMU_INPUT),
            (&self.layer1.bwd, IMU_INPUT),
            (&self.layer2.fwd, 2 * h),
            (&self.layer2.bwd, 2 * h),
        ] {
            dir.check_shapes()?;
            if dir.hidden() != h || dir.input() != input {
                return Err(DlamError::Shape(format!(
                    "GRU direction {}x{}, expected {h}x{input}",
                    dir.hidden(),
                    dir.input()
                )));
            }
        }
        if self.head_weight.shape() != (IMU_OUTPUTS, 2 * h) || self.head_bias.len() != IMU_OUTPUTS {
            return Err(DlamError::Shape("IMU head".into()));
        }
        Ok(())
    }
}

/// Parameter count of the IMU network for hidden size `h`.
pub fn imunet_param_count(hidden: usize) -> usize {
    let h = hidden;
    let layer = |input: usize| 2 * 3 * (h * input + h * h + 2 * h);
    layer(IMU_INPUT) + layer(2 * h) + 2 * h * IMU_OUTPUTS + IMU_OUTPUTS
}

/// Logits `γ₁…γ₁₂` from the last [`IMU_WINDOW`] IMU samples (oldest first).
pub fn imunet_forward(window: &[ImuSample], w: &ImuNetWeights) -> Result<[f32; IMU_OUTPUTS], DlamError> {
    if window.len() != IMU_WINDOW {
        return Err(DlamError::WindowLength {
            expected: IMU_WINDOW,
            got: window.len(),
        });
    }
    let seq: Vec<DVector<f32>> = window
        .iter()
        .map(|s| DVector::from_iterator(IMU_INPUT, s.input().iter().map(|v| *v as f32)))
        .collect();
    let l1 = bigru_layer(&seq, &w.layer1.fwd, &w.layer1.bwd);
    let l2 = bigru_layer(&l1, &w.layer2.fwd, &w.layer2.bwd);
    let last = l2.last().expect("window is non-empty").map(|v| v.max(0.0));
    let out = &w.head_weight * last + &w.head_bias;
    let mut gamma = [0.0; IMU_OUTPUTS];
    gamma.copy_from_slice(out.as_slice());
    Ok(gamma)
}
