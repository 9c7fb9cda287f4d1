//! Everything between discrete symbols and the sampled transmit waveform:
//! constellations, root-raised-cosine shaping, matched filtering and
//! symbol decisions.

mod constellation;
mod modem;
mod pulse;
mod tx;

pub use constellation::{build_square_qam, Constellation, SymbolSequence};
pub use modem::{
    evaluation_range, matched_filter_and_sample, modulate, modulate_amplitudes,
    ComplexBasebandSignal,
};
pub use pulse::{rrc_pulse, PulseShape};
pub use tx::TxConfig;

use crate::sdbp::PosteriorTable;

/// MAP decisions under a backward channel: per-slot argmax of the posterior
/// row. Ties go to the lowest constellation index.
pub fn map_decision_abc(post: &PosteriorTable) -> SymbolSequence {
    let indices = post
        .rows()
        .map(|row| {
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect();
    SymbolSequence::new(indices, post.alphabet_size()).expect("argmax is within the alphabet")
}
