// bathcorr.hpp — Bath correlation matrix K_jm(tau) from spectrum and
// temperature, and the real covariance targets derived from it.

#pragma once

#include "stoq/model.hpp"
#include "stoq/types.hpp"

#include <string>
#include <vector>

namespace stoq {

// K_jm(tau) on the lag grid tau >= 0 (lags of the staggered midpoint grid).
// k and k_check hold the same quantity computed through two algebraic forms
// of the spectral integral; they must agree to 1e-8 relative.
struct CorrelationSet {
    RealVector tau_grid;
    std::vector<Matrix> k;        // complex form of the integral
    std::vector<Matrix> k_check;  // Re/Im (cos / tanh*sin) form
    double hbar{1.0};

    int channels() const { return k.empty() ? 0 : static_cast<int>(k.front().rows()); }
    int n_lags() const { return static_cast<int>(k.size()); }
};

CorrelationSet correlation_matrix(const SpectralModel& spectral, Temperature temperature,
                                  double hbar, const RealVector& tau_grid);

// Real covariance targets for the noise synthesizer:
//   c_xx[lag] = Re K(lag)                      (any lag >= 0)
//   c_yx[lag] = (2/hbar) Im K(lag) for lag > 0 (x later than y), zero at lag 0
struct XYCovariances {
    std::vector<RealMatrix> c_xx;
    std::vector<RealMatrix> c_yx;
};

XYCovariances xy_covariances(const CorrelationSet& c);

struct FdtReport {
    std::vector<std::string> failures;
    double max_form_difference{0.0};   // k vs k_check, relative
    double min_k0_eigenvalue{0.0};
    bool pass() const { return failures.empty(); }
};

// Symmetry, K(0) positivity, cross-form agreement, and for discrete modes the
// detailed-balance identity (2 n_bar + 1) tanh(hbar w / 2T) = 1.
FdtReport fdt_diagnostics(const CorrelationSet& c, const BathSpec& bath);

// Mean thermal occupation 1/(exp(hbar*omega/T) - 1).
double thermal_occupation(double omega, Temperature temperature, double hbar);

} // namespace stoq
