use ndarray::{Array1, Array2, ArrayView2, Axis};

use super::FeedForwardNet;
use crate::error::{validation, Result};

/// Dimensions whose spread falls below this are left unscaled.
const MIN_STD: f64 = 1e-8;

/// Per-dimension z-scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: Array1::zeros(dim),
            std: Array1::ones(dim),
        }
    }

    pub fn fit(data: ArrayView2<'_, f64>) -> Result<Self> {
        if data.nrows() == 0 {
            return Err(validation("cannot fit normalization to zero rows"));
        }
        let mean = data.mean_axis(Axis(0)).expect("non-empty");
        let std = data
            .var_axis(Axis(0), 0.0)
            .mapv(|v| if v.sqrt() < MIN_STD { 1.0 } else { v.sqrt() });
        Ok(Self { mean, std })
    }

    /// Per-dimension centring with one scale shared by every dimension (the
    /// root of the mean per-dimension variance). Squared error after this
    /// transform stays proportional to squared error in the raw units.
    pub fn fit_shared_scale(data: ArrayView2<'_, f64>) -> Result<Self> {
        let per_dim = Self::fit(data)?;
        let var = data.var_axis(Axis(0), 0.0).mean().expect("non-empty");
        let scale = if var.sqrt() < MIN_STD { 1.0 } else { var.sqrt() };
        Ok(Self {
            mean: per_dim.mean,
            std: Array1::from_elem(data.ncols(), scale),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, data: ArrayView2<'_, f64>) -> Array2<f64> {
        (&data - &self.mean) / &self.std
    }

    pub fn invert(&self, data: ArrayView2<'_, f64>) -> Array2<f64> {
        &data * &self.std + &self.mean
    }
}

/// A network together with the normalization applied to its inputs and
/// undone on its outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct NetModel {
    pub net: FeedForwardNet,
    pub input_norm: Standardizer,
    pub output_norm: Standardizer,
}

impl NetModel {
    pub fn new(net: FeedForwardNet, input_norm: Standardizer, output_norm: Standardizer) -> Result<Self> {
        if input_norm.dim() != net.input_dim() || output_norm.dim() != net.output_dim() {
            return Err(validation("normalization statistics do not match network dimensions"));
        }
        Ok(Self {
            net,
            input_norm,
            output_norm,
        })
    }

    /// Maps raw input rows to raw output rows.
    pub fn predict(&self, inputs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let z = self.net.forward_batch(self.input_norm.apply(inputs).view())?;
        Ok(self.output_norm.invert(z.view()))
    }
}
