//! JSON persistence of [`TnbsModel`].
//!
//! Floats are written with the shortest representation that round-trips,
//! so save followed by load reproduces every weight bit for bit.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bspline::BasisConfig;
use crate::error::{Result, TnbsError};
use crate::model::{LagSpec, Scaling, TnbsModel};
use crate::tensor::{DenseTensor, TensorTrain};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub degree: usize,
    pub knot_param: usize,
    pub input_lags: Vec<usize>,
    pub output_lags: Vec<usize>,
    pub scaling: Scaling,
    pub ranks: Vec<usize>,
    pub cores: Vec<CoreFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoreFile {
    pub shape: [usize; 3],
    pub values: Vec<f64>,
}

impl From<&TnbsModel> for ModelFile {
    fn from(m: &TnbsModel) -> Self {
        ModelFile {
            format_version: FORMAT_VERSION,
            degree: m.basis().degree(),
            knot_param: m.basis().knot_param(),
            input_lags: m.lags().input_lags().to_vec(),
            output_lags: m.lags().output_lags().to_vec(),
            scaling: *m.scaling(),
            ranks: m.weights().ranks(),
            cores: m
                .weights()
                .cores()
                .iter()
                .map(|c| CoreFile {
                    shape: [c.shape()[0], c.shape()[1], c.shape()[2]],
                    values: c.values().to_vec(),
                })
                .collect(),
        }
    }
}

impl TryFrom<ModelFile> for TnbsModel {
    type Error = TnbsError;

    fn try_from(f: ModelFile) -> Result<Self> {
        if f.format_version != FORMAT_VERSION {
            return Err(TnbsError::Input(format!(
                "unsupported model format_version {} (expected {FORMAT_VERSION})",
                f.format_version
            )));
        }
        let cores = f
            .cores
            .into_iter()
            .map(|c| DenseTensor::new(c.shape.to_vec(), c.values))
            .collect::<Result<Vec<_>>>()?;
        let weights = TensorTrain::new(cores)?;
        if weights.ranks() != f.ranks {
            return Err(TnbsError::Input(format!(
                "declared ranks {:?} do not match core shapes {:?}",
                f.ranks,
                weights.ranks()
            )));
        }
        let basis = BasisConfig::new(f.degree, f.knot_param)?;
        let lags = LagSpec::new(f.input_lags, f.output_lags)?;
        TnbsModel::new(basis, lags, weights, f.scaling)
    }
}

impl TnbsModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelFile::from(self)).expect("model file serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| TnbsError::Input(format!("malformed model file: {e}")))?;
        file.try_into()
    }

    /// Writes the model through a temporary sibling file so a failed write
    /// never leaves a partial model behind.
    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| TnbsError::Input(format!("cannot read model {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = Path::new(&tmp);
    {
        let mut f = fs::File::create(tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}
