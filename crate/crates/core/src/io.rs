//! Self-describing binary container for every persisted artifact.
//!
//! Layout: 8-byte magic `GWSURR01`, a little-endian `u32` header length, a
//! UTF-8 JSON header `{dtype, shape, meta}`, then the row-major
//! little-endian payload (`f64`, or `c128` as interleaved re/im pairs).

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::eim::{CoefficientDataset, EimModel, Standardizer};
use crate::error::{Error, Result};
use crate::latent::{AutoencoderModel, PcaModel};
use crate::matrix::Matrix;
use crate::nnet::{LayerKind, Network, NetworkSpec};
use crate::rom::ReducedBasis;
use crate::surrogate::{InputMap, RegressorModel, SplineModel};
use crate::waveform::{Alignment, TimeGrid, WaveformSet};

pub const MAGIC: &[u8; 8] = b"GWSURR01";
/// Upper bound on the JSON header, to reject garbage lengths early.
const MAX_HEADER: usize = 1 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    F64,
    C128,
}

impl DType {
    pub fn size(self) -> usize {
        match self {
            DType::F64 => 8,
            DType::C128 => 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    F64(Vec<f64>),
    C128(Vec<Complex64>),
}

impl Payload {
    pub fn dtype(&self) -> DType {
        match self {
            Payload::F64(_) => DType::F64,
            Payload::C128(_) => DType::C128,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Payload::F64(v) => v.len(),
            Payload::C128(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    dtype: DType,
    shape: Vec<usize>,
    meta: Map<String, Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArrayContainer {
    pub shape: Vec<usize>,
    pub meta: Map<String, Value>,
    pub payload: Payload,
}

impl ArrayContainer {
    pub fn new(shape: Vec<usize>, payload: Payload, meta: Map<String, Value>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != payload.len() {
            return Err(Error::Format(format!(
                "shape {shape:?} holds {expected} values, payload has {}",
                payload.len()
            )));
        }
        Ok(Self {
            shape,
            meta,
            payload,
        })
    }

    pub fn dtype(&self) -> DType {
        self.payload.dtype()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = serde_json::to_vec(&Header {
            dtype: self.dtype(),
            shape: self.shape.clone(),
            meta: self.meta.clone(),
        })?;
        let header_len = u32::try_from(header.len())
            .map_err(|_| Error::Format("header exceeds 4 GiB".into()))?;
        let mut out =
            Vec::with_capacity(12 + header.len() + self.payload.len() * self.dtype().size());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&header_len.to_le_bytes());
        out.extend_from_slice(&header);
        match &self.payload {
            Payload::F64(v) => v
                .iter()
                .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            Payload::C128(v) => v.iter().for_each(|z| {
                out.extend_from_slice(&z.re.to_le_bytes());
                out.extend_from_slice(&z.im.to_le_bytes());
            }),
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..8] != MAGIC {
            return Err(Error::Format("missing GWSURR01 magic".into()));
        }
        let header_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        if header_len > MAX_HEADER || 12 + header_len > bytes.len() {
            return Err(Error::Format(format!(
                "header length {header_len} exceeds file size {}",
                bytes.len()
            )));
        }
        let header: Header = serde_json::from_slice(&bytes[12..12 + header_len])
            .map_err(|e| Error::Format(format!("bad header: {e}")))?;
        let count = header
            .shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Format(format!("shape {:?} overflows", header.shape)))?;
        let body = &bytes[12 + header_len..];
        let expected = count
            .checked_mul(header.dtype.size())
            .ok_or_else(|| Error::Format("payload size overflows".into()))?;
        if body.len() != expected {
            return Err(Error::Format(format!(
                "payload is {} bytes, shape {:?} of {:?} needs {expected}",
                body.len(),
                header.shape,
                header.dtype
            )));
        }
        let floats = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let payload = match header.dtype {
            DType::F64 => Payload::F64(floats.collect()),
            DType::C128 => {
                let v: Vec<f64> = floats.collect();
                Payload::C128(
                    v.chunks_exact(2)
                        .map(|p| Complex64::new(p[0], p[1]))
                        .collect(),
                )
            }
        };
        Self::new(header.shape, payload, header.meta)
    }

    pub fn meta_value<T: DeserializeOwned>(&self, key: &str) -> Result<T> {
        let v = self
            .meta
            .get(key)
            .ok_or_else(|| Error::Format(format!("metadata field {key:?} missing")))?;
        serde_json::from_value(v.clone())
            .map_err(|e| Error::Format(format!("metadata field {key:?}: {e}")))
    }

    fn f64_data(&self) -> Result<&[f64]> {
        match &self.payload {
            Payload::F64(v) => Ok(v),
            Payload::C128(_) => Err(Error::Format("expected f64 payload, found c128".into())),
        }
    }

    fn c128_data(&self) -> Result<&[Complex64]> {
        match &self.payload {
            Payload::C128(v) => Ok(v),
            Payload::F64(_) => Err(Error::Format("expected c128 payload, found f64".into())),
        }
    }

    fn check_kind(&self, kind: &str) -> Result<()> {
        let found: String = self.meta_value("kind")?;
        if found != kind {
            return Err(Error::Format(format!(
                "expected a {kind} artifact, found {found}"
            )));
        }
        Ok(())
    }

    fn dims<const N: usize>(&self) -> Result<[usize; N]> {
        self.shape.as_slice().try_into().map_err(|_| {
            Error::Format(format!(
                "expected a rank-{N} array, shape is {:?}",
                self.shape
            ))
        })
    }

    /// Version of the library that wrote the container, if recorded.
    pub fn writer_version(&self) -> Option<&str> {
        self.meta.get("version").and_then(Value::as_str)
    }
}

/// Types that round-trip through [`ArrayContainer`].
pub trait Persist: Sized {
    const KIND: &'static str;
    fn to_container(&self) -> Result<ArrayContainer>;
    fn from_container(c: &ArrayContainer) -> Result<Self>;
}

fn meta(kind: &str, fields: Value) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("kind".into(), json!(kind));
    m.insert("version".into(), json!(crate::VERSION));
    if let Value::Object(f) = fields {
        m.extend(f);
    }
    m
}

impl Persist for WaveformSet {
    const KIND: &'static str = "waveform_set";

    fn to_container(&self) -> Result<ArrayContainer> {
        ArrayContainer::new(
            vec![self.len(), self.n_samples()],
            Payload::C128(self.data().to_vec()),
            meta(
                Self::KIND,
                json!({"grid": self.grid, "q_values": self.q_values, "alignment": self.alignment}),
            ),
        )
    }

    fn from_container(c: &ArrayContainer) -> Result<Self> {
        c.check_kind(Self::KIND)?;
        let [n, l] = c.dims()?;
        let grid: TimeGrid = c.meta_value("grid")?;
        let q: Vec<f64> = c.meta_value("q_values")?;
        let alignment: Alignment = c.meta_value("alignment")?;
        if q.len() != n || grid.n_samples != l {
            return Err(Error::Format(
                "waveform set metadata disagrees with shape".into(),
            ));
        }
        WaveformSet::from_parts(grid, q, alignment, c.c128_data()?.to_vec())
    }
}

impl Persist for ReducedBasis {
    const KIND: &'static str = "reduced_basis";

    fn to_container(&self) -> Result<ArrayContainer> {
        ArrayContainer::new(
            vec![self.size(), self.grid.n_samples],
            Payload::C128(self.data().to_vec()),
            meta(
                Self::KIND,
                json!({"grid": self.grid, "greedy_q": self.greedy_q,
                       "greedy_errors": self.greedy_errors, "tol": self.tol}),
            ),
        )
    }

    fn from_container(c: &ArrayContainer) -> Result<Self> {
        c.check_kind(Self::KIND)?;
        let [_, _] = c.dims()?;
        ReducedBasis::from_parts(
            c.meta_value("grid")?,
            c.c128_data()?.to_vec(),
            c.meta_value("greedy_q")?,
            c.meta_value("greedy_errors")?,
            c.meta_value("tol")?,
        )
    }
}

impl Persist for EimModel {
    const KIND: &'static str = "eim";

    fn to_container(&self) -> Result<ArrayContainer> {
        ArrayContainer::new(
            vec![self.grid.n_samples, self.size()],
            Payload::C128(self.interpolant().to_vec()),
            meta(
                Self::KIND,
                json!({"grid": self.grid, "node_indices": self.node_indices,
                       "condition": self.condition}),
            ),
        )
    }

    fn from_container(c: &ArrayContainer) -> Result<Self> {
        c.check_kind(Self::KIND)?;
        let [_, _] = c.dims()?;
        EimModel::from_parts(
            c.meta_value("grid")?,
            c.meta_value("node_indices")?,
            c.c128_data()?.to_vec(),
            c.meta_value("condition")?,
        )
    }
}

fn matrix_from(c: &ArrayContainer) -> Result<Matrix> {
    let [r, k] = c.dims()?;
    Matrix::from_vec(r, k, c.f64_data()?.to_vec())
}

impl Persist for CoefficientDataset {
    const KIND: &'static str = "coefficient_dataset";

    fn to_container(&self) -> Result<ArrayContainer> {
        ArrayContainer::new(
            vec![self.values.rows(), self.values.cols()],
            Payload::F64(self.values.as_slice().to_vec()),
            meta(
                Self::KIND,
                json!({"q": self.q, "standardizer": self.standardizer}),
            ),
        )
    }

    fn from_container(c: &ArrayContainer) -> Result<Self> {
        c.check_kind(Self::KIND)?;
        let values = matrix_from(c)?;
        let q: Vec<f64> = c.meta_value("q")?;
        let standardizer: Standardizer = c.meta_value("standardizer")?;
        if q.len() != values.rows() || standardizer.dim() != values.cols() {
            return Err(Error::Format(
                "dataset metadata disagrees with shape".into(),
            ));
        }
        Ok(CoefficientDataset {
            q,
            values,
            standardizer,
        })
    }
}

fn network_from(c: &ArrayContainer) -> Result<Network> {
    let kinds: Vec<LayerKind> = c.meta_value("layers")?;
    let input_dim: usize = c.meta_value("input_dim")?;
    let [_] = c.dims()?;
    Network::from_flat(&kinds, input_dim, c.f64_data()?)
}

fn network_payload(net: &Network) -> (Vec<usize>, Payload) {
    let p = net.flat_params();
    (vec![p.len()], Payload::F64(p))
}

impl Persist for RegressorModel {
    const KIND: &'static str = "regressor";

    fn to_container(&self) -> Result<ArrayContainer> {
        let (shape, payload) = network_payload(&self.network);
        ArrayContainer::new(
            shape,
            payload,
            meta(
                Self::KIND,
                json!({"spec": self.spec.to_string(), "layers": self.network.kinds(),
                       "input_dim": self.network.input_dim(), "input_map": self.input,
                       "standardizer": self.standardizer,
                       "q_min": self.q_min, "q_max": self.q_max}),
            ),
        )
    }

    fn from_container(c: &ArrayContainer) -> Result<Self> {
        c.check_kind(Self::KIND)?;
        let spec: String = c.meta_value("spec")?;
        let input: InputMap = c.meta_value("input_map")?;
        let model = RegressorModel {
            spec: spec.parse::<NetworkSpec>()?,
            network: network_from(c)?,
            standardizer: c.meta_value("standardizer")?,
            input,
            q_min: c.meta_value("q_min")?,
            q_max: c.meta_value("q_max")?,
        };
        if model.standardizer.dim() != model.network.output_dim() {
            return Err(Error::Format(
                "standardizer width differs from network output".into(),
            ));
        }
        Ok(model)
    }
}

impl Persist for AutoencoderModel {
    const KIND: &'static str = "autoencoder";

    fn to_container(&self) -> Result<ArrayContainer> {
        let (shape, payload) = network_payload(&self.network);
        ArrayContainer::new(
            shape,
            payload,
            meta(
                Self::KIND,
                json!({"layers": self.network.kinds(), "input_dim": self.network.input_dim(),
                       "encoder_layers": self.encoder_layers, "latent_dim": self.latent_dim,
                       "scaler": self.scaler}),
            ),
        )
    }

    fn from_container(c: &ArrayContainer) -> Result<Self> {
        c.check_kind(Self::KIND)?;
        let network = network_from(c)?;
        let encoder_layers: usize = c.meta_value("encoder_layers")?;
        if encoder_layers == 0 || encoder_layers >= network.layers().len() {
            return Err(Error::Format(format!(
                "encoder split {encoder_layers} out of range"
            )));
        }
        Ok(AutoencoderModel {
            network,
            encoder_layers,
            latent_dim: c.meta_value("latent_dim")?,
            scaler: c.meta_value("scaler")?,
        })
    }
}

impl Persist for PcaModel {
    const KIND: &'static str = "pca";

    fn to_container(&self) -> Result<ArrayContainer> {
        ArrayContainer::new(
            vec![self.components.rows(), self.components.cols()],
            Payload::F64(self.components.as_slice().to_vec()),
            meta(
                Self::KIND,
                json!({"mean": self.mean, "singular_values": self.singular_values,
                       "scaler": self.scaler}),
            ),
        )
    }

    fn from_container(c: &ArrayContainer) -> Result<Self> {
        c.check_kind(Self::KIND)?;
        Ok(PcaModel {
            components: matrix_from(c)?,
            mean: c.meta_value("mean")?,
            singular_values: c.meta_value("singular_values")?,
            scaler: c.meta_value("scaler")?,
        })
    }
}

impl Persist for SplineModel {
    const KIND: &'static str = "spline";

    /// Knot values and second derivatives stacked as `[2, N, 2m]`.
    fn to_container(&self) -> Result<ArrayContainer> {
        let mut data = self.values.as_slice().to_vec();
        data.extend_from_slice(self.second.as_slice());
        ArrayContainer::new(
            vec![2, self.values.rows(), self.values.cols()],
            Payload::F64(data),
            meta(Self::KIND, json!({"knots": self.knots})),
        )
    }

    fn from_container(c: &ArrayContainer) -> Result<Self> {
        c.check_kind(Self::KIND)?;
        let [two, n, d] = c.dims()?;
        if two != 2 {
            return Err(Error::Format(
                "spline payload must stack two matrices".into(),
            ));
        }
        let data = c.f64_data()?;
        let knots: Vec<f64> = c.meta_value("knots")?;
        if knots.len() != n {
            return Err(Error::Format("knot count disagrees with shape".into()));
        }
        Ok(SplineModel {
            knots,
            values: Matrix::from_vec(n, d, data[..n * d].to_vec())?,
            second: Matrix::from_vec(n, d, data[n * d..].to_vec())?,
        })
    }
}

pub fn encode<T: Persist>(value: &T) -> Result<Vec<u8>> {
    value.to_container()?.to_bytes()
}

pub fn decode<T: Persist>(bytes: &[u8]) -> Result<T> {
    T::from_container(&ArrayContainer::from_bytes(bytes)?)
}
