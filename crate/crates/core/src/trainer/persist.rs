//! Model document: a JSON object
//!
//! ```text
//! {
//!   "format_version": 1,
//!   "architecture": { "num_layers", "num_units", "m_c", "input_dim", "sigma_activation" },
//!   "layers": [ { "n_in", "n_out", "weights": [row-major n_out × n_in], "bias": [n_out] }, ... ],
//!   "output_scale": { "shift", "scale" },
//!   "metadata": { "scenario", "scaling_coef", "d_max", "seed" },
//!   "optimizer": null | { "t", "beta1", "beta2", "eps", "lr", "m": [layers], "v": [layers] }
//! }
//! ```
//!
//! `optimizer` holds the Adam moments in the same layer layout as the
//! weights, so a transfer run can continue where training stopped.
//!
//! Numbers are written with shortest round-trip formatting. On load, array
//! entries may also be the strings `"NaN"`, `"inf"` or `"-inf"`; these
//! parse and are then rejected by weight validation.

use std::fmt;
use std::path::Path;

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use crate::mdn::{Architecture, Dense, ModelMeta, NetworkWeights, OutputScale};
use crate::{Error, Result};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize)]
struct OptimizerOut<'a> {
    t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    lr: f64,
    m: &'a [Dense],
    v: &'a [Dense],
}

#[derive(Serialize)]
struct DocOut<'a> {
    format_version: u32,
    architecture: &'a Architecture,
    layers: &'a [Dense],
    output_scale: &'a OutputScale,
    metadata: &'a ModelMeta,
    optimizer: Option<OptimizerOut<'a>>,
}

#[derive(Deserialize)]
struct OptimizerIn {
    t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    lr: f64,
    m: Vec<LayerIn>,
    v: Vec<LayerIn>,
}

#[derive(Deserialize)]
struct LayerIn {
    n_in: usize,
    n_out: usize,
    #[serde(deserialize_with = "lenient_vec")]
    weights: Vec<f64>,
    #[serde(deserialize_with = "lenient_vec")]
    bias: Vec<f64>,
}

#[derive(Deserialize)]
struct DocIn {
    architecture: Architecture,
    layers: Vec<LayerIn>,
    #[serde(default)]
    output_scale: OutputScale,
    metadata: ModelMeta,
    #[serde(default)]
    optimizer: Option<OptimizerIn>,
}

/// Everything a model document carries.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub weights: NetworkWeights,
    pub meta: ModelMeta,
    pub optimizer: Option<AdamState>,
}

fn dense_layers(layers: Vec<LayerIn>) -> Vec<Dense> {
    layers
        .into_iter()
        .map(|l| Dense {
            n_in: l.n_in,
            n_out: l.n_out,
            weights: l.weights,
            bias: l.bias,
        })
        .collect()
}

#[derive(Deserialize)]
struct VersionOnly {
    format_version: u32,
}

struct LenientF64(f64);

impl<'de> Deserialize<'de> for LenientF64 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = LenientF64;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or one of \"NaN\", \"inf\", \"-inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<LenientF64, E> {
                Ok(LenientF64(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<LenientF64, E> {
                Ok(LenientF64(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<LenientF64, E> {
                Ok(LenientF64(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<LenientF64, E> {
                match v.to_ascii_lowercase().as_str() {
                    "nan" => Ok(LenientF64(f64::NAN)),
                    "inf" | "+inf" | "infinity" => Ok(LenientF64(f64::INFINITY)),
                    "-inf" | "-infinity" => Ok(LenientF64(f64::NEG_INFINITY)),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

fn lenient_vec<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    struct V;
    impl<'de> Visitor<'de> for V {
        type Value = Vec<f64>;
        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            f.write_str("an array of numbers")
        }
        fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<Vec<f64>, A::Error> {
            let mut out = Vec::with_capacity(seq.size_hint().unwrap_or(0));
            while let Some(LenientF64(x)) = seq.next_element()? {
                out.push(x);
            }
            Ok(out)
        }
    }
    d.deserialize_seq(V)
}

/// Serializes finite weights, their metadata and optionally the optimizer.
pub fn model_to_json(w: &NetworkWeights, meta: &ModelMeta, optimizer: Option<&AdamState>) -> Result<String> {
    w.validate()?;
    if let Some(opt) = optimizer {
        check_optimizer(w, opt)?;
    }
    let doc = DocOut {
        format_version: MODEL_FORMAT_VERSION,
        architecture: &w.arch,
        layers: &w.layers,
        output_scale: &w.output,
        metadata: meta,
        optimizer: optimizer.map(|o| OptimizerOut {
            t: o.t,
            beta1: o.beta1,
            beta2: o.beta2,
            eps: o.eps,
            lr: o.lr,
            m: &o.m.layers,
            v: &o.v.layers,
        }),
    };
    serde_json::to_string(&doc).map_err(|e| Error::NonFinite(e.to_string()))
}

fn check_optimizer(w: &NetworkWeights, opt: &AdamState) -> Result<()> {
    for acc in [&opt.m, &opt.v] {
        if !acc.same_shape(w) {
            return Err(Error::Config("optimizer moments do not match the weights".into()));
        }
        acc.validate()?;
    }
    let hyper = [opt.beta1, opt.beta2, opt.eps, opt.lr];
    if !hyper.iter().all(|h| h.is_finite()) {
        return Err(Error::NonFinite("optimizer hyperparameters must be finite".into()));
    }
    Ok(())
}

/// Parses and validates a model document; `origin` names it in errors.
pub fn model_from_json(text: &str, origin: &Path) -> Result<SavedModel> {
    let version: VersionOnly = serde_json::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
    if version.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: version.format_version,
            expected: MODEL_FORMAT_VERSION,
        });
    }
    let doc: DocIn = serde_json::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
    let weights = NetworkWeights {
        arch: doc.architecture,
        layers: dense_layers(doc.layers),
        output: doc.output_scale,
    };
    weights.validate()?;
    let optimizer = match doc.optimizer {
        None => None,
        Some(o) => {
            let moments = |layers| NetworkWeights {
                arch: weights.arch,
                layers: dense_layers(layers),
                output: OutputScale::default(),
            };
            let opt = AdamState {
                m: moments(o.m),
                v: moments(o.v),
                t: o.t,
                beta1: o.beta1,
                beta2: o.beta2,
                eps: o.eps,
                lr: o.lr,
            };
            check_optimizer(&weights, &opt)?;
            Some(opt)
        }
    };
    Ok(SavedModel {
        weights,
        meta: doc.metadata,
        optimizer,
    })
}

pub fn save_model(w: &NetworkWeights, meta: &ModelMeta, path: &Path) -> Result<()> {
    save_model_with_optimizer(w, meta, None, path)
}

pub fn save_model_with_optimizer(
    w: &NetworkWeights,
    meta: &ModelMeta,
    optimizer: Option<&AdamState>,
    path: &Path,
) -> Result<()> {
    let text = model_to_json(w, meta, optimizer)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<(NetworkWeights, ModelMeta)> {
    load_saved(path).map(|s| (s.weights, s.meta))
}

pub fn load_saved(path: &Path) -> Result<SavedModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text, path)
}
