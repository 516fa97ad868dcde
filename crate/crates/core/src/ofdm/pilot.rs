use crate::{Error, Result};

/// Pilot positions on the time-frequency grid, as (subcarrier, symbol).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PilotPattern {
    positions: Vec<(usize, usize)>,
    pub nc: usize,
    pub ns: usize,
    pub sf: usize,
    pub st: usize,
}

impl PilotPattern {
    /// Arbitrary pattern; positions are sorted by symbol then subcarrier.
    pub fn from_positions(nc: usize, ns: usize, mut positions: Vec<(usize, usize)>) -> Result<Self> {
        positions.sort_by_key(|&(k, i)| (i, k));
        if positions.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("duplicate pilot position"));
        }
        if positions.iter().any(|&(k, i)| k >= nc || i >= ns) {
            return Err(Error::invalid("pilot position outside grid"));
        }
        if positions.is_empty() {
            return Err(Error::invalid("pilot pattern is empty"));
        }
        Ok(PilotPattern {
            positions,
            nc,
            ns,
            sf: 0,
            st: 0,
        })
    }

    pub fn positions(&self) -> &[(usize, usize)] {
        &self.positions
    }

    pub fn np(&self) -> usize {
        self.positions.len()
    }

    pub fn contains(&self, k: usize, i: usize) -> bool {
        self.positions.binary_search_by_key(&(i, k), |&(pk, pi)| (pi, pk)).is_ok()
    }

    /// Symbols that carry at least one pilot, ascending.
    pub fn pilot_symbols(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.positions.iter().map(|&(_, i)| i).collect();
        s.dedup();
        s
    }

    /// Pilot subcarriers of symbol `i`, ascending.
    pub fn subcarriers_in(&self, i: usize) -> Vec<usize> {
        self.positions.iter().filter(|p| p.1 == i).map(|p| p.0).collect()
    }

    /// Non-pilot positions ordered by symbol then subcarrier.
    pub fn data_positions(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.nc * self.ns - self.np());
        for i in 0..self.ns {
            for k in 0..self.nc {
                if !self.contains(k, i) {
                    out.push((k, i));
                }
            }
        }
        out
    }
}

/// Diamond lattice: two interleaved rectangular lattices of spacing
/// (`sf`, `st`). The second is shifted by ⌈st/2⌉ symbols and sf/2
/// subcarriers. At 72×14 with (6, 7) this puts pilots on symbols
/// {0, 7} at subcarriers 0, 6, …, 66 and on {4, 11} at 3, 9, …, 69.
pub fn build_pilot_pattern(nc: usize, ns: usize, sf: usize, st: usize) -> Result<PilotPattern> {
    if sf == 0 || st == 0 || sf > nc || st > ns {
        return Err(Error::invalid(format!(
            "pilot spacing ({sf}, {st}) invalid for {nc}x{ns} grid"
        )));
    }
    let mut positions = Vec::new();
    for (t0, f0) in [(0, 0), (st.div_ceil(2), sf / 2)] {
        for i in (t0..ns).step_by(st) {
            for k in (f0..nc).step_by(sf) {
                positions.push((k, i));
            }
        }
    }
    positions.sort_by_key(|&(k, i)| (i, k));
    positions.dedup();
    if positions.is_empty() {
        return Err(Error::invalid("pilot spacing produced no pilots"));
    }
    Ok(PilotPattern {
        positions,
        nc,
        ns,
        sf,
        st,
    })
}
