//! Stereo CNN producing the vision noise logit.

use rand::Rng;

use super::DlamError;

pub const CONV1_CHANNELS: usize = 16;
pub const CONV2_CHANNELS: usize = 32;
pub const KERNEL: usize = 5;
pub const PADDING: usize = 2;
pub const POOL: usize = 4;
pub const HIDDEN: usize = 32;

/// Channel-major feature map, `data[(c * height + y) * width + x]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    /// Single-channel image from row-major pixels.
    pub fn gray(width: usize, height: usize, data: Vec<f32>) -> Result<Self, DlamError> {
        if data.len() != width * height {
            return Err(DlamError::Shape(format!(
                "{} pixels for a {width}x{height} image",
                data.len()
            )));
        }
        Ok(Self {
            channels: 1,
            height,
            width,
            data,
        })
    }

    pub fn at(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }
}

/// Convolution weights, `kernel[((o * in + i) * k + ky) * k + kx]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    pub out_channels: usize,
    pub in_channels: usize,
    pub size: usize,
    pub kernel: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Conv2d {
    pub fn zeros(out_channels: usize, in_channels: usize, size: usize) -> Self {
        Self {
            out_channels,
            in_channels,
            size,
            kernel: vec![0.0; out_channels * in_channels * size * size],
            bias: vec![0.0; out_channels],
        }
    }

    pub fn random<R: Rng + ?Sized>(
        out_channels: usize,
        in_channels: usize,
        size: usize,
        scale: f32,
        rng: &mut R,
    ) -> Self {
        let mut c = Self::zeros(out_channels, in_channels, size);
        c.kernel.iter_mut().for_each(|v| *v = rng.random_range(-scale..=scale));
        c.bias.iter_mut().for_each(|v| *v = rng.random_range(-scale..=scale));
        c
    }

    pub fn param_count(&self) -> usize {
        self.kernel.len() + self.bias.len()
    }
}

/// Stride-1 cross-correlation with zero padding.
pub fn conv2d_forward(input: &FeatureMap, conv: &Conv2d, padding: usize) -> Result<FeatureMap, DlamError> {
    if input.channels != conv.in_channels {
        return Err(DlamError::Shape(format!(
            "conv expects {} channels, got {}",
            conv.in_channels, input.channels
        )));
    }
    let k = conv.size;
    let (ph, pw) = (input.height + 2 * padding, input.width + 2 * padding);
    if ph < k || pw < k {
        return Err(DlamError::OutputTooSmall);
    }
    let (oh, ow) = (ph - k + 1, pw - k + 1);
    let mut out = FeatureMap::zeros(conv.out_channels, oh, ow);
    for o in 0..conv.out_channels {
        let plane = &mut out.data[o * oh * ow..(o + 1) * oh * ow];
        plane.iter_mut().for_each(|v| *v = conv.bias[o]);
        for i in 0..conv.in_channels {
            let src = &input.data[i * input.height * input.width..(i + 1) * input.height * input.width];
            for ky in 0..k {
                for kx in 0..k {
                    let wgt = conv.kernel[((o * conv.in_channels + i) * k + ky) * k + kx];
                    if wgt == 0.0 {
                        continue;
                    }
                    // Output rows/cols whose tap (y + ky - padding) lands inside the input.
                    let y0 = padding.saturating_sub(ky);
                    let y1 = (input.height + padding).saturating_sub(ky).min(oh);
                    let x0 = padding.saturating_sub(kx);
                    let x1 = (input.width + padding).saturating_sub(kx).min(ow);
                    for y in y0..y1 {
                        let sy = y + ky - padding;
                        let srow = &src[sy * input.width..(sy + 1) * input.width];
                        let drow = &mut plane[y * ow..(y + 1) * ow];
                        for x in x0..x1 {
                            drow[x] += wgt * srow[x + kx - padding];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

pub fn relu_in_place(map: &mut FeatureMap) {
    map.data.iter_mut().for_each(|v| *v = v.max(0.0));
}

/// Non-overlapping `size × size` max pooling; ragged edges are dropped.
pub fn maxpool2d(input: &FeatureMap, size: usize) -> Result<FeatureMap, DlamError> {
    let (oh, ow) = (input.height / size, input.width / size);
    if oh == 0 || ow == 0 {
        return Err(DlamError::OutputTooSmall);
    }
    let mut out = FeatureMap::zeros(input.channels, oh, ow);
    for c in 0..input.channels {
        for y in 0..oh {
            for x in 0..ow {
                let mut m = f32::NEG_INFINITY;
                for dy in 0..size {
                    for dx in 0..size {
                        m = m.max(input.at(c, y * size + dy, x * size + dx));
                    }
                }
                out.data[(c * oh + y) * ow + x] = m;
            }
        }
    }
    Ok(out)
}

/// Spatial size after conv(pad 2) → pool → conv(pad 2) → pool.
pub fn stack_output_size(width: usize, height: usize) -> (usize, usize) {
    let after = |n: usize| {
        let n = n + 2 * PADDING + 1 - KERNEL;
        let n = n / POOL;
        let n = n + 2 * PADDING + 1 - KERNEL;
        n / POOL
    };
    (after(width), after(height))
}

/// Flattened feature length of both eyes.
pub fn flat_features(width: usize, height: usize) -> usize {
    let (w, h) = stack_output_size(width, height);
    2 * CONV2_CHANNELS * w * h
}

/// Parameter count of the stereo network at the given input resolution.
pub fn visionnet_param_count(width: usize, height: usize) -> usize {
    let conv1 = CONV1_CHANNELS * KERNEL * KERNEL + CONV1_CHANNELS;
    let conv2 = CONV2_CHANNELS * CONV1_CHANNELS * KERNEL * KERNEL + CONV2_CHANNELS;
    2 * (conv1 + conv2) + flat_features(width, height) * HIDDEN + HIDDEN + HIDDEN + 1
}

#[derive(Clone, Debug, PartialEq)]
pub struct EyeStack {
    pub conv1: Conv2d,
    pub conv2: Conv2d,
}

impl EyeStack {
    fn zeros() -> Self {
        Self {
            conv1: Conv2d::zeros(CONV1_CHANNELS, 1, KERNEL),
            conv2: Conv2d::zeros(CONV2_CHANNELS, CONV1_CHANNELS, KERNEL),
        }
    }

    fn random<R: Rng + ?Sized>(scale: f32, rng: &mut R) -> Self {
        Self {
            conv1: Conv2d::random(CONV1_CHANNELS, 1, KERNEL, scale, rng),
            conv2: Conv2d::random(CONV2_CHANNELS, CONV1_CHANNELS, KERNEL, scale, rng),
        }
    }

    fn forward(&self, img: &FeatureMap) -> Result<FeatureMap, DlamError> {
        let mut m = conv2d_forward(img, &self.conv1, PADDING)?;
        relu_in_place(&mut m);
        let m = maxpool2d(&m, POOL)?;
        let mut m = conv2d_forward(&m, &self.conv2, PADDING)?;
        relu_in_place(&mut m);
        maxpool2d(&m, POOL)
    }
}

/// Separate left/right conv stacks, dense hidden layer, scalar output.
#[derive(Clone, Debug, PartialEq)]
pub struct VisionNetWeights {
    pub width: usize,
    pub height: usize,
    pub left: EyeStack,
    pub right: EyeStack,
    /// HIDDEN × flat_features, row-major.
    pub fc1_weight: Vec<f32>,
    pub fc1_bias: Vec<f32>,
    pub fc2_weight: Vec<f32>,
    pub fc2_bias: f32,
}

impl VisionNetWeights {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            left: EyeStack::zeros(),
            right: EyeStack::zeros(),
            fc1_weight: vec![0.0; HIDDEN * flat_features(width, height)],
            fc1_bias: vec![0.0; HIDDEN],
            fc2_weight: vec![0.0; HIDDEN],
            fc2_bias: 0.0,
        }
    }

    pub fn random<R: Rng + ?Sized>(width: usize, height: usize, scale: f32, rng: &mut R) -> Self {
        let mut w = Self {
            left: EyeStack::random(scale, rng),
            right: EyeStack::random(scale, rng),
            ..Self::zeros(width, height)
        };
        w.fc1_weight.iter_mut().for_each(|v| *v = rng.random_range(-scale..=scale));
        w.fc1_bias.iter_mut().for_each(|v| *v = rng.random_range(-scale..=scale));
        w.fc2_weight.iter_mut().for_each(|v| *v = rng.random_range(-scale..=scale));
        w.fc2_bias = rng.random_range(-scale..=scale);
        w
    }

    pub fn param_count(&self) -> usize {
        self.left.conv1.param_count()
            + self.left.conv2.param_count()
            + self.right.conv1.param_count()
            + self.right.conv2.param_count()
            + self.fc1_weight.len()
            + self.fc1_bias.len()
            + self.fc2_weight.len()
            + 1
    }
}

/// Vision logit γ₁₃ from a rectified grayscale pair with values in `[0, 1]`.
pub fn visionnet_forward(
    left: &FeatureMap,
    right: &FeatureMap,
    w: &VisionNetWeights,
) -> Result<f32, DlamError> {
    for img in [left, right] {
        if img.channels != 1 || img.width != w.width || img.height != w.height {
            return Err(DlamError::Resolution {
                expected: (w.width, w.height),
                got: (img.width, img.height),
            });
        }
    }
    let fl = w.left.forward(left)?;
    let fr = w.right.forward(right)?;
    let features: Vec<f32> = fl.data.iter().chain(fr.data.iter()).copied().collect();
    let n = features.len();
    if w.fc1_weight.len() != HIDDEN * n {
        return Err(DlamError::Shape(format!(
            "dense layer expects {} inputs, stacks produced {n}",
            w.fc1_weight.len() / HIDDEN
        )));
    }
    let mut out = w.fc2_bias;
    for j in 0..HIDDEN {
        let row = &w.fc1_weight[j * n..(j + 1) * n];
        let s: f32 = row.iter().zip(&features).map(|(a, b)| a * b).sum::<f32>() + w.fc1_bias[j];
        out += w.fc2_weight[j] * s.max(0.0);
    }
    Ok(out)
}
