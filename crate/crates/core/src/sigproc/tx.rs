use serde::{Deserialize, Serialize};

use super::{rrc_pulse, Constellation, PulseShape};
use crate::error::invalid;
use crate::Result;

/// Transmitter parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TxConfig {
    pub symbol_rate: f64,
    pub samples_per_symbol: usize,
    pub constellation_size: usize,
    pub rolloff: f64,
    pub span_symbols: usize,
    /// Use [`PulseShape::nyquist_refined`] taps instead of the plain truncated
    /// RRC.
    pub nyquist_refine: bool,
}

impl Default for TxConfig {
    fn default() -> Self {
        TxConfig {
            symbol_rate: 14e9,
            samples_per_symbol: 4,
            constellation_size: 64,
            rolloff: 0.25,
            span_symbols: 16,
            nyquist_refine: true,
        }
    }
}

impl TxConfig {
    pub fn sample_rate(&self) -> f64 {
        self.symbol_rate * self.samples_per_symbol as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.symbol_rate > 0.0) {
            return Err(invalid("symbol rate must be positive"));
        }
        self.constellation()?;
        rrc_pulse(self.rolloff, self.span_symbols, self.samples_per_symbol)?;
        Ok(())
    }

    pub fn pulse(&self) -> Result<PulseShape> {
        let p = rrc_pulse(self.rolloff, self.span_symbols, self.samples_per_symbol)?;
        if self.nyquist_refine {
            p.nyquist_refined()
        } else {
            Ok(p)
        }
    }

    pub fn constellation(&self) -> Result<Constellation> {
        Constellation::square_qam(self.constellation_size)
    }
}
