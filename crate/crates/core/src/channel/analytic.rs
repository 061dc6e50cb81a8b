//! Closed-form throughput curves used as simulation oracles.

/// Pure Aloha: a frame survives if no other starts within its 2m
/// vulnerable interval, so S = G·e^(−2G).
pub fn analytic_pure_aloha(g: f64) -> f64 {
    g * (-2.0 * g).exp()
}

/// Slotted Aloha: the vulnerable interval shrinks to one slot, S = G·e^(−G).
pub fn analytic_slotted_aloha(g: f64) -> f64 {
    g * (-g).exp()
}

/// Unslotted nonpersistent CSMA with normalised sensing delay `a = τ/m`:
/// S = G·e^(−aG) / (G(1+2a) + e^(−aG)).
pub fn analytic_np_csma(g: f64, a: f64) -> f64 {
    let e = (-a * g).exp();
    g * e / (g * (1.0 + 2.0 * a) + e)
}
