//! Linear reparameterization of linear-predictor coefficients.
//!
//! For a block of coefficients `β` entering a predictor `xᵀβ`, the optimizer
//! works on `z = Rβ` where `RᵀR` is the (ridged) mean cross-product of the
//! covariate rows. In `z` coordinates the covariates are orthonormal, which
//! removes the collinearity between lagged depths and seasonal terms.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Whitening {
    offset: usize,
    factor: Option<DMatrix<f64>>,
}

impl Whitening {
    /// No transformation.
    pub fn identity() -> Self {
        Self::default()
    }

    /// Whitening for `dim` coefficients starting at `offset` in the packed
    /// vector. Falls back to identity with fewer than `dim` rows.
    pub fn from_rows<'a>(offset: usize, dim: usize, rows: impl IntoIterator<Item = &'a [f64]>) -> Self {
        if dim == 0 {
            return Self::identity();
        }
        let mut m = DMatrix::<f64>::zeros(dim, dim);
        let mut n = 0usize;
        for row in rows {
            debug_assert_eq!(row.len(), dim);
            let v = DVector::from_column_slice(row);
            m.ger(1.0, &v, &v, 1.0);
            n += 1;
        }
        if n < dim {
            return Self::identity();
        }
        m /= n as f64;
        let scale = m.diagonal().max().max(1e-300);
        let mut ridge = 1e-10 * scale;
        for _ in 0..8 {
            let mut ridged = m.clone();
            for i in 0..dim {
                ridged[(i, i)] += ridge;
            }
            if let Some(ch) = ridged.cholesky() {
                return Self {
                    offset,
                    factor: Some(ch.l().transpose()),
                };
            }
            ridge *= 100.0;
        }
        Self::identity()
    }

    /// Natural coefficients to optimizer coordinates, in place.
    pub fn forward(&self, x: &mut [f64]) {
        if let Some(r) = &self.factor {
            let d = r.nrows();
            let block = &mut x[self.offset..self.offset + d];
            let z = r * DVector::from_column_slice(block);
            block.copy_from_slice(z.as_slice());
        }
    }

    /// Optimizer coordinates to natural coefficients, in place.
    pub fn backward(&self, x: &mut [f64]) {
        if let Some(r) = &self.factor {
            let d = r.nrows();
            let block = &mut x[self.offset..self.offset + d];
            let b = r
                .solve_upper_triangular(&DVector::from_column_slice(block))
                .expect("nonsingular factor");
            block.copy_from_slice(b.as_slice());
        }
    }
}

/// Fourier basis `[1, sin ω s, cos ω s, sin 2ω s, ...]` matching the flat trend layout.
pub(crate) fn fourier_row(order: usize, day: u16, out: &mut Vec<f64>) {
    let w = 2.0 * std::f64::consts::PI * f64::from(day) / crate::weather::PERIOD_DAYS;
    out.push(1.0);
    for k in 1..=order {
        let (s, c) = (k as f64 * w).sin_cos();
        out.push(s);
        out.push(c);
    }
}
