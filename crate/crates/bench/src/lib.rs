//! Shared fixtures for the benchmarks.

use bamcbr_core::{BamModel, LinkState, LspRequest, TrafficClassConfig};

/// The reference three-class link (400/350/250 of 1000) under `model`.
pub fn reference_link(model: BamModel) -> LinkState {
    let classes = vec![
        TrafficClassConfig::new(0, 0, 400),
        TrafficClassConfig::new(1, 1, 350),
        TrafficClassConfig::new(2, 2, 250),
    ];
    LinkState::new(1000, classes, model).expect("reference link is valid")
}

/// Fills every BC with 10 Mbps LSPs of the lowest class, so requests from
/// higher classes have to reclaim.
pub fn saturated_link(model: BamModel) -> LinkState {
    let mut link = reference_link(model);
    while link.admit_lsp(LspRequest::new(0, 10)).expect("valid request").is_accepted() {}
    link
}
