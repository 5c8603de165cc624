// oracle.hpp — Ground truth: exact closed-system dynamics of the system plus
// truncated bosonic modes, exact superoperator moments of the bath symbols,
// and metric utilities.

#pragma once

#include "stoq/model.hpp"
#include "stoq/types.hpp"

#include <string>
#include <vector>

namespace stoq {

// One truncated bosonic mode, linearly coupled: contributes c (a + a†) to the
// bath operator of its coupling channel.
struct BathMode {
    double omega{1.0};
    double coupling{0.1};
    int n_max{8};    // Fock truncation level, >= 4
    int channel{0};  // which coupling channel the mode attaches to
};

struct BathModeSet {
    std::vector<BathMode> modes;

    int channels() const;
    Eigen::Index bath_dim() const;

    // Thermal occupation of the top retained level must be < 1e-6; throws with
    // the required n_max otherwise.
    void check_truncation(Temperature temperature, double hbar) const;

    // Bath-space operators on the joint truncated Fock space.
    Matrix bath_hamiltonian(double hbar) const;
    std::vector<Matrix> bath_coupling_operators() const;  // one per channel
};

// e^{-H/T}/Z (identity/d at infinite temperature).
Matrix thermal_state(const Matrix& h, Temperature temperature);

// Trace over the second (bath) factor of a state on S (x) B.
Matrix partial_trace_bath(const Matrix& rho, Eigen::Index d_system);

// Exact reduced dynamics on the scenario grid: joint unitary evolution of
// rho_S(0) (x) thermal bath, partially traced. Total dimension capped at 4096.
std::vector<Matrix> exact_reduced_dynamics(const Scenario& s, const BathModeSet& b);

// Discrete spectrum equivalent to the mode set: weight s_k = c_k^2 (2 n_bar + 1)
// placed in the (channel, channel) entry.
SpectralModel modes_to_spectrum(const BathModeSet& b, Temperature temperature, double hbar);

// One factor of a moment: the Jordan symbol x_j(t) or the Liouville symbol
// y_j(t) of channel j at time t.
struct MomentFactor {
    enum class Kind { X, Y };
    Kind kind{Kind::X};
    int channel{0};
    double time{0.0};
};

struct MomentValue {
    Complex value{0.0};
    bool reordered{false};  // factors were not given latest-first
};

// Tr_W of the reverse-time-ordered product of the factor superoperators acting
// on rho_w: earliest factor acts first. Factors given out of order are sorted
// (latest first) and flagged. Order <= 3, bath dimension <= 256.
MomentValue superoperator_moment(const Matrix& h_w, const std::vector<Matrix>& w_ops,
                                 const Matrix& rho_w, std::vector<MomentFactor> factors,
                                 double hbar);

// Half the sum of |eigenvalues| of rho1 - rho2; inputs hermitized when flagged.
double trace_distance(const Matrix& rho1, const Matrix& rho2, bool hermitize = false);

double purity(const Matrix& rho);

} // namespace stoq
