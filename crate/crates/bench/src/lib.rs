//! Shared fixtures for the criterion benches.

use hmb_core::array::{los_channel, ApPlacement, ChannelRealization};
use hmb_core::codebook::{build_codebook, CodebookParams};
use hmb_core::{ArrayConfig, SingleBeamCodebook};

/// 4×32 array at 28 GHz.
pub fn desk_array() -> ArrayConfig {
    ArrayConfig::half_wavelength(4, 32, 28e9).expect("valid desk array")
}

pub fn desk_codebook() -> SingleBeamCodebook {
    let cfg = desk_array();
    build_codebook(&cfg, &CodebookParams::for_array(&cfg)).expect("desk codebook builds")
}

/// Two line-of-sight APs at fixed near-field positions.
pub fn desk_channels() -> Vec<ChannelRealization> {
    let cfg = desk_array();
    [(0, 1.2, 1.1, 1.4), (1, 2.5, 2.0, 1.7)]
        .into_iter()
        .map(|(k, r, theta, phi)| {
            let ap = ApPlacement::new(k, r, theta, phi).expect("valid placement");
            los_channel(&cfg, &ap, 10f64.powf(-7.2)).expect("channel builds")
        })
        .collect()
}
