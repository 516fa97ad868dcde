//! Complex signal-processing primitives shared by the rest of the crate.

mod bessel;
mod conv;
mod dft;
mod linalg;
mod rng;
mod spline;

pub use bessel::bessel_j0;
pub use conv::{circulant_matvec, circular_convolve};
pub use dft::{dft, dft_in_place, idft_in_place};
pub use linalg::{cholesky_solve, SymMatrix};
pub use rng::{complex_normal, rng_stream, standard_normal, RngStream};
pub use spline::{natural_cubic_spline, spline_interpolate_2d, NaturalCubicSpline, SplineFit, SplineStatus};

use crate::{Error, Result, C64};

/// Dense Nc×Ns complex time-frequency grid.
///
/// Storage is symbol-major: column `i` (one OFDM symbol) is contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    nc: usize,
    ns: usize,
    data: Vec<C64>,
}

impl ComplexGrid {
    pub fn zeros(nc: usize, ns: usize) -> Self {
        ComplexGrid {
            nc,
            ns,
            data: vec![C64::new(0.0, 0.0); nc * ns],
        }
    }

    pub fn from_fn(nc: usize, ns: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(nc * ns);
        for i in 0..ns {
            for k in 0..nc {
                data.push(f(k, i));
            }
        }
        ComplexGrid { nc, ns, data }
    }

    /// Builds a grid from symbol columns, each of length `nc`.
    pub fn from_columns(nc: usize, columns: &[Vec<C64>]) -> Result<Self> {
        let mut data = Vec::with_capacity(nc * columns.len());
        for (i, col) in columns.iter().enumerate() {
            if col.len() != nc {
                return Err(Error::invalid(format!(
                    "column {i} has length {}, expected {nc}",
                    col.len()
                )));
            }
            data.extend_from_slice(col);
        }
        Ok(ComplexGrid {
            nc,
            ns: columns.len(),
            data,
        })
    }

    pub fn nc(&self) -> usize {
        self.nc
    }

    pub fn ns(&self) -> usize {
        self.ns
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nc, self.ns)
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize) -> C64 {
        self.data[i * self.nc + k]
    }

    #[inline]
    pub fn set(&mut self, k: usize, i: usize, v: C64) {
        self.data[i * self.nc + k] = v;
    }

    pub fn column(&self, i: usize) -> &[C64] {
        &self.data[i * self.nc..(i + 1) * self.nc]
    }

    pub fn column_mut(&mut self, i: usize) -> &mut [C64] {
        &mut self.data[i * self.nc..(i + 1) * self.nc]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Mean squared magnitude of the elementwise difference.
    pub fn mse(&self, other: &ComplexGrid) -> f64 {
        assert_eq!(self.dims(), other.dims(), "grid shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            / self.data.len() as f64
    }

    pub fn hadamard(&self, other: &ComplexGrid) -> ComplexGrid {
        assert_eq!(self.dims(), other.dims(), "grid shape mismatch");
        ComplexGrid {
            nc: self.nc,
            ns: self.ns,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a * b).collect(),
        }
    }
}

/// A grid that is defined only on a set of coordinates and zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseGrid {
    base: ComplexGrid,
    mask: Vec<(usize, usize)>,
}

impl SparseGrid {
    /// Creates a sparse grid; entries outside `mask` are forced to zero.
    pub fn new(base: ComplexGrid, mask: Vec<(usize, usize)>) -> Result<Self> {
        let (nc, ns) = base.dims();
        if let Some(&(k, i)) = mask.iter().find(|&&(k, i)| k >= nc || i >= ns) {
            return Err(Error::invalid(format!(
                "mask coordinate ({k}, {i}) outside {nc}x{ns} grid"
            )));
        }
        let mut on = vec![false; nc * ns];
        for &(k, i) in &mask {
            on[i * nc + k] = true;
        }
        let mut base = base;
        for (z, keep) in base.data.iter_mut().zip(on) {
            if !keep {
                *z = C64::new(0.0, 0.0);
            }
        }
        Ok(SparseGrid { base, mask })
    }

    /// Samples `values` at every mask position.
    pub fn sample(values: &ComplexGrid, mask: &[(usize, usize)]) -> Result<Self> {
        SparseGrid::new(values.clone(), mask.to_vec())
    }

    pub fn grid(&self) -> &ComplexGrid {
        &self.base
    }

    pub fn mask(&self) -> &[(usize, usize)] {
        &self.mask
    }

    pub fn dims(&self) -> (usize, usize) {
        self.base.dims()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_grid_zeroes_outside_mask() {
        let g = ComplexGrid::from_fn(4, 3, |k, i| C64::new(k as f64 + 1.0, i as f64));
        let s = SparseGrid::new(g, vec![(1, 1), (3, 2)]).unwrap();
        for i in 0..3 {
            for k in 0..4 {
                let on = (k, i) == (1, 1) || (k, i) == (3, 2);
                assert_eq!(s.grid().get(k, i) != C64::new(0.0, 0.0), on);
            }
        }
    }

    #[test]
    fn sparse_grid_rejects_out_of_bounds_mask() {
        let g = ComplexGrid::zeros(4, 3);
        assert!(SparseGrid::new(g, vec![(4, 0)]).is_err());
    }

    #[test]
    fn grid_is_symbol_major() {
        let g = ComplexGrid::from_fn(3, 2, |k, i| C64::new((10 * i + k) as f64, 0.0));
        assert_eq!(g.column(1)[2], C64::new(12.0, 0.0));
    }
}
