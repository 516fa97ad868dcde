use super::{qam_demap, Subframe};
use crate::numerics::{ComplexGrid, SparseGrid};
use crate::{Error, Result, C64};

/// LS estimates `y/x` at every pilot, zeros elsewhere.
pub fn ls_pilot_estimates(y_f: &ComplexGrid, sub: &Subframe) -> Result<SparseGrid> {
    if y_f.dims() != sub.x_f.dims() {
        return Err(Error::invalid("received grid does not match subframe"));
    }
    let mut g = ComplexGrid::zeros(y_f.nc(), y_f.ns());
    for (p, &(k, i)) in sub.pattern.positions().iter().enumerate() {
        let x = sub.pilot_tx(p);
        if x.norm_sqr() == 0.0 {
            return Err(Error::invalid(format!("zero pilot at ({k}, {i})")));
        }
        g.set(k, i, y_f.get(k, i) / x);
    }
    SparseGrid::new(g, sub.pattern.positions().to_vec())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decisions {
    pub bits: Vec<u8>,
    pub bit_errors: usize,
    /// Data positions where the channel estimate was exactly zero.
    pub erasures: usize,
}

/// Single-tap zero-forcing equalisation and hard demapping of every data
/// position. A zero channel estimate demaps from the zero symbol.
pub fn equalize_and_demap(y_f: &ComplexGrid, h_hat: &ComplexGrid, sub: &Subframe) -> Result<Decisions> {
    if y_f.dims() != h_hat.dims() || y_f.dims() != sub.x_f.dims() {
        return Err(Error::invalid("grid shapes differ"));
    }
    let mut erasures = 0;
    let symbols: Vec<C64> = sub
        .data_positions
        .iter()
        .map(|&(k, i)| {
            let h = h_hat.get(k, i);
            if h.norm_sqr() == 0.0 {
                erasures += 1;
                C64::new(0.0, 0.0)
            } else {
                y_f.get(k, i) / h / sub.data_amplitude
            }
        })
        .collect();
    let bits = qam_demap(&symbols, sub.modulation);
    let bit_errors = bits.iter().zip(&sub.data_bits).filter(|(a, b)| a != b).count();
    Ok(Decisions {
        bits,
        bit_errors,
        erasures,
    })
}
