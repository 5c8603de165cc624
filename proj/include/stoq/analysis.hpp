// analysis.hpp — Verification of the exact statistical identities (average
// unitarity, the scattered-wave balance, inelastic bounds, thermalization)
// and the second-order closure for the mean wavefunction.

#pragma once

#include "stoq/bathcorr.hpp"
#include "stoq/ensemble.hpp"
#include "stoq/model.hpp"
#include "stoq/types.hpp"

#include <string>
#include <vector>

namespace stoq {

// Split of the ensemble into free wave + mean scattered wave + fluctuation
// norm, with per-batch values retained for downstream residual statistics.
struct ScatteringDecomposition {
    std::vector<Vector> psi0;            // [time] free sequence
    std::vector<Vector> mean_s;          // [time] <psi> - psi0
    std::vector<RealVector> mean_s_se;   // per component
    std::vector<double> fluct_norm;      // [time] Re mean <phi - psi0 | psi - psi0>
    std::vector<double> fluct_norm_se;
    std::vector<std::vector<Vector>> batch_mean_s;   // [batch][time]
    std::vector<std::vector<Complex>> batch_fluct;   // [batch][time]
    std::vector<bool> in_band;  // H_S eigenindices inside the incident band
    int n_band{0};
};

// Requires a single pure initial branch. The incident band holds 99% of the
// initial energy-basis population, with edges pushed outward past any level
// above 1e-6 of the peak population.
ScatteringDecomposition scattering_decomposition(const EnsembleResult& e, const Scenario& s);

struct UnitarityReport {
    double max_se_units{0.0};
    std::string worst_entry;
    std::vector<double> profile;  // [time] max |overlap - delta| in SE units
    bool pass() const { return max_se_units <= 5.0; }
};

UnitarityReport unitarity_residual(const EnsembleResult& e);

struct OpticalReport {
    std::vector<double> r;   // [time] 2 Re<psi0|mean_s> + fluct_norm
    std::vector<double> se;
    double max_se_units{0.0};
    bool pass() const { return max_se_units <= 5.0; }
};

OpticalReport optical_residual(const ScatteringDecomposition& d);

struct InelasticReport {
    std::vector<double> p_inel;       // [time]
    std::vector<double> p_inel_se;
    std::vector<double> paper_bound;  // [time] 1 - ||<psi>||^2
    std::vector<double> paper_bound_se;
    int window_begin{0};
    bool mean_bound_pass{true};     // p <= 1 - ||<psi>||^2 + 3 SE in window
    bool channel_bound_pass{true};  // p <= 1/2 + 3 SE in window
};

// Populations of the hermitized density estimate outside the incident band;
// bounds are checked from window_begin onward. Errors if the band covers more
// than 90% of the spectrum.
InelasticReport inelastic_probability(const EnsembleResult& e, const ScatteringDecomposition& d,
                                      int window_begin);

struct GibbsReport {
    double distance{0.0};  // trace distance of the window-averaged state to Gibbs
    double se{0.0};
    double initial_distance{0.0};
    bool converged{true};
    std::string warning;
};

GibbsReport gibbs_distance(const EnsembleResult& e, const Scenario& s, int window_begin);

struct BourretResult {
    std::vector<Vector> mean;  // [time]
    std::vector<std::string> warnings;
};

// Second-order closure for the ket mean: memory kernel K_jm(t-s) S_j U0(t-s) S_m
// integrated by trapezoid, stepped by Heun on the scenario grid.
BourretResult bourret_mean(const CorrelationSet& c, const Scenario& s);

} // namespace stoq
