//! OFDM frame construction, transmit/receive chains, LS pilot estimation
//! and single-tap equalisation.

mod chain;
mod equalize;
mod frame;
mod pilot;
mod qam;

pub use chain::{pn_spectrum, rx_chain, rx_chain_freq_model, rx_chain_linear, rx_time_domain, tx_chain};
pub use equalize::{equalize_and_demap, ls_pilot_estimates, Decisions};
pub use frame::{assemble_subframe, random_bits, DataSnr, FrameConfig, Subframe};
pub use pilot::{build_pilot_pattern, PilotPattern};
pub use qam::{qam_demap, qam_map, Modulation};
