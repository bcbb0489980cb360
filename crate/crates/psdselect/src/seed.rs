//! Deterministic seed derivation.
//!
//! Every random stream in the workbench is keyed by a master seed plus a
//! small integer path (domain tag, then indices such as model id or
//! replicate). Tasks therefore own independent, order-free streams: a
//! benchmark run schedules its tasks in any order, on any thread count,
//! and each task still draws identical randomness.

/// Stream domains. Kept distinct so e.g. the data-generation stream for
/// model 3 never collides with chain 3's sampling stream.
pub const DOMAIN_DATA: u64 = 1;
pub const DOMAIN_CHAIN: u64 = 2;
pub const DOMAIN_IMAGE: u64 = 3;
pub const DOMAIN_NOISE: u64 = 4;

/// splitmix64 finalizer: bijective on u64 with strong avalanche.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `base` and an integer path.
///
/// Each path element is absorbed through the splitmix64 finalizer, so
/// derive_seed(s, &[a, b]) and derive_seed(s, &[b, a]) differ and neither
/// collides with derive_seed(s, &[a]) in practice.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    let mut state = mix(base ^ 0x6a09e667f3bcc909);
    for &part in path {
        state = mix(state ^ mix(part));
    }
    state
}
