//! Shared fixtures for the benchmarks.

use alphaduplex::{NetworkRealization, PulseOverlapProfile, SystemParams};

pub struct Fixture {
    pub params: SystemParams,
    pub net: NetworkRealization,
    pub profile: PulseOverlapProfile,
}

/// Default system with `n` cells and one realization drawn from `seed`.
pub fn fixture(n: usize, seed: u64) -> Fixture {
    let params = SystemParams {
        n_cells: n,
        ..SystemParams::default()
    };
    let net = NetworkRealization::generate(&params, seed).expect("valid default parameters");
    let profile = PulseOverlapProfile::standard(params.alpha_min, params.bandwidth)
        .expect("default profile builds");
    Fixture {
        params,
        net,
        profile,
    }
}
