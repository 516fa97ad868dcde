use std::f64::consts::FRAC_1_SQRT_2;

use crate::{Error, Result, C64};

/// Gray-mapped square QAM with unit average symbol energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modulation {
    Qam4,
    Qam16,
}

impl Modulation {
    pub fn from_order(m: usize) -> Result<Self> {
        match m {
            4 => Ok(Modulation::Qam4),
            16 => Ok(Modulation::Qam16),
            _ => Err(Error::invalid(format!("unsupported modulation order {m}"))),
        }
    }

    pub fn order(self) -> usize {
        match self {
            Modulation::Qam4 => 4,
            Modulation::Qam16 => 16,
        }
    }

    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qam4 => 2,
            Modulation::Qam16 => 4,
        }
    }
}

// Per-axis levels. 4-QAM: bit 0 → +1, 1 → −1.
// 16-QAM (sign, magnitude): 00 → +1, 01 → +3, 10 → −1, 11 → −3, so the
// level order −3, −1, +1, +3 reads 11, 10, 00, 01.
const QAM16_SCALE: f64 = 0.316_227_766_016_837_94; // 1/√10

fn axis16(sign: u8, mag: u8) -> f64 {
    let m = if mag == 0 { 1.0 } else { 3.0 };
    if sign == 0 {
        m
    } else {
        -m
    }
}

pub fn qam_map(bits: &[u8], modulation: Modulation) -> Result<Vec<C64>> {
    let bps = modulation.bits_per_symbol();
    if !bits.len().is_multiple_of(bps) {
        return Err(Error::invalid(format!(
            "{} bits not divisible by {bps}",
            bits.len()
        )));
    }
    if bits.iter().any(|&b| b > 1) {
        return Err(Error::invalid("bits must be 0 or 1"));
    }
    Ok(bits
        .chunks_exact(bps)
        .map(|b| match modulation {
            Modulation::Qam4 => C64::new(
                if b[0] == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 },
                if b[1] == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 },
            ),
            Modulation::Qam16 => C64::new(axis16(b[0], b[1]), axis16(b[2], b[3])) * QAM16_SCALE,
        })
        .collect())
}

/// Minimum-distance hard decisions.
pub fn qam_demap(symbols: &[C64], modulation: Modulation) -> Vec<u8> {
    let mut out = Vec::with_capacity(symbols.len() * modulation.bits_per_symbol());
    for z in symbols {
        match modulation {
            Modulation::Qam4 => {
                out.push(u8::from(z.re < 0.0));
                out.push(u8::from(z.im < 0.0));
            }
            Modulation::Qam16 => {
                for v in [z.re / QAM16_SCALE, z.im / QAM16_SCALE] {
                    out.push(u8::from(v < 0.0));
                    out.push(u8::from(v.abs() > 2.0));
                }
            }
        }
    }
    out
}
