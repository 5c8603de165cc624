// dynamics.hpp — Per-trajectory propagation: stochastic Schrödinger stepping
// for the ket and co-state, stochastic Liouville stepping for cross-checks,
// and free evolution.

#pragma once

#include "stoq/model.hpp"
#include "stoq/noisegen.hpp"
#include "stoq/types.hpp"

#include <vector>

namespace stoq {

// exp(A) by scaling-and-squaring with a Padé core (valid for non-normal A);
// closed form for 2x2.
Matrix matrix_exponential(const Matrix& a);

// exp(A) v without forming exp(A): substepped truncated Taylor series of the
// action (matrix-vector products only); relative accuracy ~1e-14.
Vector apply_exponential(const Matrix& a, const Vector& v);

// exp(dt * generator) applied to state; guards ||generator||*dt <= 10.
Vector step_exponential(const Vector& state, const Matrix& generator, double dt);

// Trajectory pair: ket psi driven by W, co-state phi by conj(W'), so that
// R(t) = |psi(t)><phi(t)| is the trajectory's random density matrix.
struct TrajectoryPair {
    std::vector<Vector> psi;  // one per output time (n_steps + 1)
    std::vector<Vector> phi;
    RealVector psi_norm;
    RealVector phi_norm;
    bool divergent{false};
    int divergence_step{-1};
};

TrajectoryPair propagate_pair(const Vector& psi0, const NoiseSample& noise,
                              const Scenario& s);

// Direct stochastic Liouville stepping (superoperator exponential on vec(R));
// independent code path used as a consistency oracle against propagate_pair.
std::vector<Matrix> propagate_liouville(const Matrix& r0, const NoiseSample& noise,
                                        const Scenario& s);

// Noise-off propagation with the same integrator and grid.
std::vector<Vector> free_propagation(const Vector& psi0, const Scenario& s);

} // namespace stoq
