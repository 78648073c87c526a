#pragma once

namespace loggas {

// Time scale between the artifact's semigroup clock and the unit-diffusion
// clock that the reference functional inequalities and the Wasserstein
// gradient-flow identities are stated in.
//
// The artifact fixes the generator A = (1/2)Δ − (1/2)∇Ψ·∇, i.e. the SDE
// dX = −(1/2)∇Ψ dt + dB. This is the unit-diffusion process (generator
// Δ − ∇Ψ·∇) run at half speed: T_t equals the unit-clock semigroup at time
// kClock·t. Consequently
//   - the JKO objective is Ent + W₂²/(2·kClock·τ),
//   - the entropy dissipation identity reads d/dt Ent = −kClock·F,
//   - the metric in EVI is W₂²/kClock,
//   - every K- or t-dependent constant in the verification inequalities is
//     evaluated at unit-clock time kClock·t.
// The value is pinned by the quadratic-potential closed form (mean flow
// m_t = m0·exp(−t/2), variance flow σ²_t = 1 + (σ²_0 − 1)·exp(−t)), which the
// flow tests reproduce with kClock = 1/2 and reject for 1 and 2.
inline constexpr double kClock = 0.5;

}  // namespace loggas
