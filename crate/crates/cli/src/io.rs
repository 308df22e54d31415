//! JSON model files.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use me2ph::deconv::DeconvParams;
use me2ph::monocyclic::FEBlock;
use me2ph::tail::ErlangTail;
use me2ph::{MERep, PHRep, ToleranceConfig};
use nalgebra::{DMatrix, RowDVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::Failure;

/// Tails longer than this go to a sidecar file.
pub const INLINE_WEIGHTS: usize = 1_000_000;

/// A real number or a `[re, im]` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Real(f64),
    Complex([f64; 2]),
}

impl Entry {
    fn value(self) -> Complex64 {
        match self {
            Entry::Real(r) => Complex64::from(r),
            Entry::Complex([re, im]) => Complex64::new(re, im),
        }
    }

    fn from_value(z: Complex64) -> Self {
        if z.im == 0.0 {
            Entry::Real(z.re)
        } else {
            Entry::Complex([z.re, z.im])
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MEFile {
    pub alpha: Vec<Entry>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<Entry>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<ToleranceConfig>,
}

impl MEFile {
    pub fn from_rep(rep: &MERep) -> Self {
        let n = rep.order();
        Self {
            alpha: rep.alpha().iter().map(|&z| Entry::from_value(z)).collect(),
            a: (0..n)
                .map(|i| (0..n).map(|j| Entry::from_value(rep.matrix()[(i, j)])).collect())
                .collect(),
            tolerances: None,
        }
    }

    pub fn to_rep(&self) -> Result<MERep, Failure> {
        let n = self.alpha.len();
        if self.a.len() != n || self.a.iter().any(|row| row.len() != n) {
            return Err(Failure::Invalid(format!(
                "alpha has length {n} but A is not {n}x{n}"
            )));
        }
        let alpha = RowDVector::from_iterator(n, self.alpha.iter().map(|e| e.value()));
        let a = DMatrix::from_fn(n, n, |i, j| self.a[i][j].value());
        MERep::new(alpha, a).map_err(Failure::from)
    }

    pub fn tolerances(&self) -> ToleranceConfig {
        self.tolerances.clone().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFile {
    pub lambda: f64,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    /// Little-endian `f64` values, relative to the JSON file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights_path: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PHFile {
    pub prefix: Option<DeconvParams>,
    pub blocks: Vec<FEBlock>,
    pub head_gamma: Vec<f64>,
    pub tail: Option<TailFile>,
}

impl PHFile {
    pub fn order(&self) -> usize {
        self.prefix.map_or(0, |p| p.l)
            + self.blocks.iter().map(|b| b.b).sum::<usize>()
            + self.tail.as_ref().map_or(0, |t| t.n)
    }
}

/// Either kind of model file, told apart by its keys.
pub enum Model {
    ME(MEFile),
    PH(PHRep),
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn parse<T: for<'de> Deserialize<'de>>(text: &str, path: &Path) -> Result<T, Failure> {
    serde_json::from_str(text).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))
}

pub fn read_me(path: &Path) -> Result<MEFile, Failure> {
    parse(&read_text(path)?, path)
}

pub fn write_me(path: &Path, file: &MEFile) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(file).expect("serializable");
    fs::write(path, text + "\n").map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

pub fn read_model(path: &Path) -> Result<Model, Failure> {
    let text = read_text(path)?;
    let value: serde_json::Value = parse(&text, path)?;
    if value.get("blocks").is_some() {
        Ok(Model::PH(read_ph_value(value, path)?))
    } else if value.get("alpha").is_some() {
        Ok(Model::ME(parse(&text, path)?))
    } else {
        Err(Failure::Parse(format!(
            "{}: neither an ME file (alpha, A) nor a PH file (blocks, head_gamma)",
            path.display()
        )))
    }
}

pub fn read_ph(path: &Path) -> Result<PHRep, Failure> {
    let value: serde_json::Value = parse(&read_text(path)?, path)?;
    read_ph_value(value, path)
}

fn read_ph_value(value: serde_json::Value, path: &Path) -> Result<PHRep, Failure> {
    let file: PHFile =
        serde_json::from_value(value).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
    let tail = match file.tail {
        None => None,
        Some(t) => {
            let weights = match (t.weights, &t.weights_path) {
                (Some(w), None) => w,
                (None, Some(p)) => read_sidecar(&path.parent().unwrap_or(Path::new(".")).join(p))?,
                _ => {
                    return Err(Failure::Parse(format!(
                        "{}: tail needs exactly one of weights and weights_path",
                        path.display()
                    )))
                }
            };
            Some(ErlangTail { lambda: t.lambda, n: t.n, weights })
        }
    };
    let ph = PHRep { prefix: file.prefix, head_blocks: file.blocks, head_gamma: file.head_gamma, tail };
    check_shape(&ph)?;
    Ok(ph)
}

fn check_shape(ph: &PHRep) -> Result<(), Failure> {
    if ph.head_blocks.is_empty() || ph.head_blocks.iter().any(|b| !b.is_valid()) {
        return Err(Failure::Invalid("head needs at least one block with b >= 1, sigma > 0, 0 <= z < 1".into()));
    }
    if ph.head_gamma.len() != ph.head_order() {
        return Err(Failure::Invalid(format!(
            "head_gamma has {} entries for {} head phases",
            ph.head_gamma.len(),
            ph.head_order()
        )));
    }
    if let Some(t) = &ph.tail {
        if t.weights.len() != t.n {
            return Err(Failure::Invalid(format!("tail has {} weights for n = {}", t.weights.len(), t.n)));
        }
        if !(t.lambda > 0.0) || !t.lambda.is_finite() {
            return Err(Failure::Invalid(format!("tail rate {} must be positive", t.lambda)));
        }
    }
    if let Some(p) = ph.prefix {
        if p.l == 0 || !(p.mu > 0.0) || !p.mu.is_finite() {
            return Err(Failure::Invalid("prefix needs l >= 1 and mu > 0".into()));
        }
    }
    if ph.body_vector().any(|w| !w.is_finite()) {
        return Err(Failure::Invalid("initial vector has non-finite entries".into()));
    }
    Ok(())
}

/// Writes the PH file; a tail longer than [`INLINE_WEIGHTS`] goes to
/// `<path>.weights.bin` next to it.
pub fn write_ph(path: &Path, ph: &PHRep) -> Result<(), Failure> {
    let io = |e: std::io::Error, p: &Path| Failure::Io(format!("{}: {e}", p.display()));
    let tail = match &ph.tail {
        None => None,
        Some(t) if t.weights.len() <= INLINE_WEIGHTS => {
            Some(TailFile { lambda: t.lambda, n: t.n, weights: Some(t.weights.clone()), weights_path: None })
        }
        Some(t) => {
            let name = format!(
                "{}.weights.bin",
                path.file_name().map_or("model".into(), |s| s.to_string_lossy().into_owned())
            );
            let side = path.with_file_name(&name);
            let f = fs::File::create(&side).map_err(|e| io(e, &side))?;
            let mut w = BufWriter::new(f);
            for v in &t.weights {
                w.write_all(&v.to_le_bytes()).map_err(|e| io(e, &side))?;
            }
            w.flush().map_err(|e| io(e, &side))?;
            Some(TailFile { lambda: t.lambda, n: t.n, weights: None, weights_path: Some(name.into()) })
        }
    };
    let file = PHFile {
        prefix: ph.prefix,
        blocks: ph.head_blocks.clone(),
        head_gamma: ph.head_gamma.clone(),
        tail,
    };
    let text = serde_json::to_string_pretty(&file).expect("serializable");
    fs::write(path, text + "\n").map_err(|e| io(e, path))
}

fn read_sidecar(path: &Path) -> Result<Vec<f64>, Failure> {
    let f = fs::File::open(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let mut bytes = Vec::new();
    BufReader::new(f)
        .read_to_end(&mut bytes)
        .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    if bytes.len() % 8 != 0 {
        return Err(Failure::Parse(format!("{}: length is not a multiple of 8", path.display())));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect())
}
