//! Portable weight container.
//!
//! Layout (all integers `u32`, floats `f32`, little-endian):
//!
//! ```text
//! "VKWS" version d_h d_gru upsilon image_w image_h n_tensors
//! n_tensors × { name_len name_utf8 ndim dims[ndim] data[prod(dims)] }
//! ```
//!
//! Matrices are stored row-major as `[rows, cols]`; convolution kernels as
//! `[out, in, k, k]`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use super::gru::{GruDirection, GruLayer, ImuNetWeights, IMU_INPUT, IMU_OUTPUTS, IMU_WINDOW};
use super::vision::{
    flat_features, Conv2d, EyeStack, VisionNetWeights, CONV1_CHANNELS, CONV2_CHANNELS, HIDDEN,
    KERNEL,
};

pub const MAGIC: &[u8; 4] = b"VKWS";
pub const FORMAT_VERSION: u32 = 1;
const MAX_NAME: usize = 1024;
const MAX_DIMS: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StoreError {
    #[error("i/o error: {0}")]
    Io(String),
    #[error("not a weight store (bad magic)")]
    BadMagic,
    #[error("unsupported weight store version {0}")]
    UnsupportedVersion(u32),
    #[error("weight store truncated at byte {0}")]
    Truncated(usize),
    #[error("invalid header: {0}")]
    BadHeader(String),
    #[error("missing tensor {0}")]
    MissingTensor(String),
    #[error("unexpected tensor {0}")]
    UnexpectedTensor(String),
    #[error("tensor {0} appears twice")]
    DuplicateTensor(String),
    #[error("tensor {name} has shape {got:?}, expected {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("tensor {name} has a non-finite value at index {index}")]
    NonFinite { name: String, index: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StoreHeader {
    pub hidden: u32,
    pub window: u32,
    pub upsilon: f32,
    pub image_width: u32,
    pub image_height: u32,
}

impl StoreHeader {
    pub fn new(hidden: usize, upsilon: f32, image_width: usize, image_height: usize) -> Self {
        Self {
            hidden: hidden as u32,
            window: IMU_WINDOW as u32,
            upsilon,
            image_width: image_width as u32,
            image_height: image_height as u32,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeightStore {
    pub header: StoreHeader,
    pub tensors: Vec<Tensor>,
}

/// Controls how [`load_weights`] treats absent tensors.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LoadOptions {
    /// Fill missing tensors with zeros instead of failing.
    pub zero_fill_missing: bool,
}

const GATES: [&str; 12] = [
    "W_z", "W_r", "W_n", "U_z", "U_r", "U_n", "b_z", "b_r", "b_n", "bh_z", "bh_r", "bh_n",
];

/// Canonical tensor names and shapes in file order.
pub fn canonical_layout(header: &StoreHeader) -> Vec<(String, Vec<usize>)> {
    let h = header.hidden as usize;
    let mut out = Vec::new();
    for (layer, input) in [("l1", IMU_INPUT), ("l2", 2 * h)] {
        for dir in ["fwd", "bwd"] {
            for g in GATES {
                let shape = match &g[..1] {
                    "W" => vec![h, input],
                    "U" => vec![h, h],
                    _ => vec![h],
                };
                out.push((format!("imu.{layer}.{dir}.{g}"), shape));
            }
        }
    }
    out.push(("imu.head.weight".into(), vec![IMU_OUTPUTS, 2 * h]));
    out.push(("imu.head.bias".into(), vec![IMU_OUTPUTS]));
    for eye in ["left", "right"] {
        out.push((format!("vision.conv1.{eye}.kernel"), vec![CONV1_CHANNELS, 1, KERNEL, KERNEL]));
        out.push((format!("vision.conv1.{eye}.bias"), vec![CONV1_CHANNELS]));
        out.push((
            format!("vision.conv2.{eye}.kernel"),
            vec![CONV2_CHANNELS, CONV1_CHANNELS, KERNEL, KERNEL],
        ));
        out.push((format!("vision.conv2.{eye}.bias"), vec![CONV2_CHANNELS]));
    }
    let flat = flat_features(header.image_width as usize, header.image_height as usize);
    out.push(("vision.fc1.weight".into(), vec![HIDDEN, flat]));
    out.push(("vision.fc1.bias".into(), vec![HIDDEN]));
    out.push(("vision.fc2.weight".into(), vec![1, HIDDEN]));
    out.push(("vision.fc2.bias".into(), vec![1]));
    out
}

fn row_major(m: &DMatrix<f32>) -> Vec<f32> {
    m.transpose().as_slice().to_vec()
}

fn direction_tensors(d: &GruDirection) -> [Vec<f32>; 12] {
    [
        row_major(&d.w_z),
        row_major(&d.w_r),
        row_major(&d.w_n),
        row_major(&d.u_z),
        row_major(&d.u_r),
        row_major(&d.u_n),
        d.b_z.as_slice().to_vec(),
        d.b_r.as_slice().to_vec(),
        d.b_n.as_slice().to_vec(),
        d.bh_z.as_slice().to_vec(),
        d.bh_r.as_slice().to_vec(),
        d.bh_n.as_slice().to_vec(),
    ]
}

impl WeightStore {
    /// Packs both networks under canonical names. The header's hidden size
    /// and resolution are taken from the networks.
    pub fn from_networks(imu: &ImuNetWeights, vision: &VisionNetWeights, upsilon: f32) -> Self {
        let header = StoreHeader::new(imu.hidden(), upsilon, vision.width, vision.height);
        let mut data: Vec<Vec<f32>> = Vec::new();
        for layer in [&imu.layer1, &imu.layer2] {
            data.extend(direction_tensors(&layer.fwd));
            data.extend(direction_tensors(&layer.bwd));
        }
        data.push(row_major(&imu.head_weight));
        data.push(imu.head_bias.as_slice().to_vec());
        for eye in [&vision.left, &vision.right] {
            data.push(eye.conv1.kernel.clone());
            data.push(eye.conv1.bias.clone());
            data.push(eye.conv2.kernel.clone());
            data.push(eye.conv2.bias.clone());
        }
        data.push(vision.fc1_weight.clone());
        data.push(vision.fc1_bias.clone());
        data.push(vision.fc2_weight.clone());
        data.push(vec![vision.fc2_bias]);
        let tensors = canonical_layout(&header)
            .into_iter()
            .zip(data)
            .map(|((name, shape), data)| Tensor { name, shape, data })
            .collect();
        Self { header, tensors }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        let h = &self.header;
        for v in [FORMAT_VERSION, h.hidden, h.window] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&h.upsilon.to_le_bytes());
        for v in [h.image_width, h.image_height, self.tensors.len() as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for t in &self.tensors {
            out.extend_from_slice(&(t.name.len() as u32).to_le_bytes());
            out.extend_from_slice(t.name.as_bytes());
            out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for d in &t.shape {
                out.extend_from_slice(&(*d as u32).to_le_bytes());
            }
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, StoreError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(StoreError::BadMagic);
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(StoreError::UnsupportedVersion(version));
        }
        let header = StoreHeader {
            hidden: r.u32()?,
            window: r.u32()?,
            upsilon: r.f32()?,
            image_width: r.u32()?,
            image_height: r.u32()?,
        };
        let count = r.u32()? as usize;
        let mut tensors = Vec::new();
        for _ in 0..count {
            let len = r.u32()? as usize;
            if len > MAX_NAME {
                return Err(StoreError::BadHeader(format!("tensor name of {len} bytes")));
            }
            let name = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| StoreError::BadHeader("tensor name is not UTF-8".into()))?;
            let ndim = r.u32()? as usize;
            if ndim > MAX_DIMS {
                return Err(StoreError::BadHeader(format!("{name}: {ndim} dimensions")));
            }
            let shape = (0..ndim)
                .map(|_| r.u32().map(|d| d as usize))
                .collect::<Result<Vec<_>, _>>()?;
            let n = shape
                .iter()
                .try_fold(1usize, |acc, d| acc.checked_mul(*d))
                .filter(|n| n.saturating_mul(4) <= bytes.len())
                .ok_or(StoreError::Truncated(r.pos))?;
            let raw = r.take(4 * n)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            tensors.push(Tensor { name, shape, data });
        }
        if r.pos != bytes.len() {
            return Err(StoreError::BadHeader(format!(
                "{} trailing bytes",
                bytes.len() - r.pos
            )));
        }
        Ok(Self { header, tensors })
    }

    pub fn save(&self, path: &Path) -> Result<(), StoreError> {
        fs::write(path, self.to_bytes()).map_err(|e| StoreError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, StoreError> {
        let bytes = fs::read(path).map_err(|e| StoreError::Io(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], StoreError> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.bytes.len());
        let end = end.ok_or(StoreError::Truncated(self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, StoreError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32(&mut self) -> Result<f32, StoreError> {
        Ok(f32::from_bits(self.u32()?))
    }
}

/// Places every tensor of `store` into the two networks.
pub fn load_weights(
    store: &WeightStore,
    opts: LoadOptions,
) -> Result<(ImuNetWeights, VisionNetWeights), StoreError> {
    let h = &store.header;
    if h.window as usize != IMU_WINDOW {
        return Err(StoreError::BadHeader(format!(
            "window length {}, expected {IMU_WINDOW}",
            h.window
        )));
    }
    if h.hidden == 0 {
        return Err(StoreError::BadHeader("hidden size 0".into()));
    }
    if !(h.upsilon > 0.0 && h.upsilon.is_finite()) {
        return Err(StoreError::BadHeader(format!("upsilon {}", h.upsilon)));
    }
    let (w, ht) = (h.image_width as usize, h.image_height as usize);
    if flat_features(w, ht) == 0 {
        return Err(StoreError::BadHeader(format!("image {w}x{ht} too small")));
    }

    let layout = canonical_layout(h);
    let mut by_name: HashMap<&str, &Tensor> = HashMap::new();
    for t in &store.tensors {
        if by_name.insert(t.name.as_str(), t).is_some() {
            return Err(StoreError::DuplicateTensor(t.name.clone()));
        }
    }
    for t in &store.tensors {
        if !layout.iter().any(|(n, _)| *n == t.name) {
            return Err(StoreError::UnexpectedTensor(t.name.clone()));
        }
    }

    let mut slots: HashMap<String, Vec<f32>> = HashMap::new();
    for (name, shape) in &layout {
        let n: usize = shape.iter().product();
        let data = match by_name.get(name.as_str()) {
            Some(t) => {
                if t.shape != *shape {
                    return Err(StoreError::ShapeMismatch {
                        name: name.clone(),
                        expected: shape.clone(),
                        got: t.shape.clone(),
                    });
                }
                if let Some(index) = t.data.iter().position(|v| !v.is_finite()) {
                    return Err(StoreError::NonFinite {
                        name: name.clone(),
                        index,
                    });
                }
                t.data.clone()
            }
            None if opts.zero_fill_missing => vec![0.0; n],
            None => return Err(StoreError::MissingTensor(name.clone())),
        };
        slots.insert(name.clone(), data);
    }

    let hid = h.hidden as usize;
    let mut take = |name: String| slots.remove(&name).expect("layout covers every slot");
    let mut direction = |prefix: &str, input: usize| {
        let mut t = |g: &str| take(format!("{prefix}.{g}"));
        GruDirection {
            w_z: DMatrix::from_row_slice(hid, input, &t("W_z")),
            w_r: DMatrix::from_row_slice(hid, input, &t("W_r")),
            w_n: DMatrix::from_row_slice(hid, input, &t("W_n")),
            u_z: DMatrix::from_row_slice(hid, hid, &t("U_z")),
            u_r: DMatrix::from_row_slice(hid, hid, &t("U_r")),
            u_n: DMatrix::from_row_slice(hid, hid, &t("U_n")),
            b_z: DVector::from_vec(t("b_z")),
            b_r: DVector::from_vec(t("b_r")),
            b_n: DVector::from_vec(t("b_n")),
            bh_z: DVector::from_vec(t("bh_z")),
            bh_r: DVector::from_vec(t("bh_r")),
            bh_n: DVector::from_vec(t("bh_n")),
        }
    };
    let layer1 = GruLayer {
        fwd: direction("imu.l1.fwd", IMU_INPUT),
        bwd: direction("imu.l1.bwd", IMU_INPUT),
    };
    let layer2 = GruLayer {
        fwd: direction("imu.l2.fwd", 2 * hid),
        bwd: direction("imu.l2.bwd", 2 * hid),
    };
    let imu = ImuNetWeights {
        layer1,
        layer2,
        head_weight: DMatrix::from_row_slice(IMU_OUTPUTS, 2 * hid, &take("imu.head.weight".into())),
        head_bias: DVector::from_vec(take("imu.head.bias".into())),
    };

    let mut eye = |side: &str| EyeStack {
        conv1: Conv2d {
            out_channels: CONV1_CHANNELS,
            in_channels: 1,
            size: KERNEL,
            kernel: take(format!("vision.conv1.{side}.kernel")),
            bias: take(format!("vision.conv1.{side}.bias")),
        },
        conv2: Conv2d {
            out_channels: CONV2_CHANNELS,
            in_channels: CONV1_CHANNELS,
            size: KERNEL,
            kernel: take(format!("vision.conv2.{side}.kernel")),
            bias: take(format!("vision.conv2.{side}.bias")),
        },
    };
    let left = eye("left");
    let right = eye("right");
    let vision = VisionNetWeights {
        width: w,
        height: ht,
        left,
        right,
        fc1_weight: take("vision.fc1.weight".into()),
        fc1_bias: take("vision.fc1.bias".into()),
        fc2_weight: take("vision.fc2.weight".into()),
        fc2_bias: take("vision.fc2.bias".into())[0],
    };
    Ok((imu, vision))
}
