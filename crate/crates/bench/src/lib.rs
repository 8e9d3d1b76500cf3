//! Shared fixtures for the criterion benches in `benches/`.

use xroute::topology::preset;
use xroute::{CryptoParams, MultiDomainNetwork};

/// Key size used by the real-backend benches.
pub const BENCH_KEY_BITS: u64 = 1024;

pub fn real_params() -> CryptoParams {
    CryptoParams::real(BENCH_KEY_BITS)
}

/// Built-in and generated networks small enough for the real backend.
pub fn small_networks() -> Vec<(String, MultiDomainNetwork)> {
    let mut out: Vec<_> = ["toy1", "fig2"]
        .into_iter()
        .map(|name| (name.to_string(), MultiDomainNetwork::builtin(name).expect("builtin topology")))
        .collect();
    out.push(("table2-1".into(), preset("table2-1", 0).expect("preset")));
    out
}
