// model.hpp — Data model for the open system: Hamiltonians, coupling channels,
// bath spectra, initial states, time grids, and prebuilt scenarios.

#pragma once

#include "stoq/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace stoq {

// Dense Hermitian matrix, checked on construction (1e-12 relative).
struct HermitianOperator {
    Matrix entries;

    HermitianOperator() = default;
    explicit HermitianOperator(Matrix m, const std::string& name = "operator");

    Eigen::Index dim() const { return entries.rows(); }
};

// Bath temperature: positive, or the exact infinite-T tag (not a large number,
// so the Im K -> 0 limit is exact).
struct Temperature {
    double value{1.0};
    bool infinite{false};

    static Temperature finite(double t);
    static Temperature infinity() { return Temperature{0.0, true}; }

    // tanh(hbar*omega / (2T)), exactly 0 at infinite T
    double tanh_factor(double omega, double hbar) const;
};

// Matrix-valued bath spectrum sigma_jm(omega): tabulated on an omega >= 0 grid,
// or a list of discrete modes (omega_k > 0, weight matrix).
struct SpectralModel {
    enum class Kind { Continuous, Discrete };

    struct Mode {
        double omega{0.0};
        RealMatrix weight;  // J x J, real symmetric PSD
    };

    Kind kind{Kind::Discrete};
    RealVector omega_grid;           // continuous only, strictly increasing, >= 0
    std::vector<RealMatrix> sigma;   // continuous only, one J x J matrix per node
    std::vector<Mode> modes;         // discrete only

    int channels() const;
    void validate() const;

    // sigma(omega) = eta * omega * exp(-omega/omega_c), single channel,
    // tabulated on a uniform grid [0, omega_max]
    static SpectralModel ohmic(double eta, double omega_c, double omega_max, int n_points);
    static SpectralModel discrete(std::vector<Mode> modes);
    // single-channel single mode shorthand
    static SpectralModel single_mode(double omega, double weight);
};

struct BathSpec {
    Temperature temperature;
    double hbar{1.0};
    SpectralModel spectral;

    void validate() const;
};

struct Grid {
    double t0{0.0};
    double dt{0.0};
    int n_steps{0};

    double time_at(int n) const { return t0 + n * dt; }
    double midpoint(int n) const { return t0 + (n + 0.5) * dt; }
    int n_times() const { return n_steps + 1; }
};

struct Scenario {
    HermitianOperator system;
    std::vector<HermitianOperator> couplings;
    BathSpec bath;
    Vector initial_state;              // unit ket when pure
    std::optional<Matrix> initial_density;  // set for mixed initial states
    Grid grid;

    Eigen::Index dim() const { return system.dim(); }
    bool pure_initial() const { return !initial_density.has_value(); }
    Matrix initial_rho() const;
};

// Spectral decomposition of a mixed initial state: rho = sum_a P_a |a><a|.
struct InitialDecomposition {
    std::vector<double> weights;  // descending, sum to 1
    std::vector<Vector> states;   // orthonormal

    std::size_t size() const { return weights.size(); }
};

InitialDecomposition decompose_initial(const Matrix& rho);
InitialDecomposition initial_decomposition(const Scenario& s);

enum class CouplingAxis { X, Z };

Scenario build_two_level_scenario(double splitting, CouplingAxis axis, double strength,
                                  BathSpec bath, Grid grid);

struct PacketSpec {
    double center{0.0};    // site index
    double width{4.0};     // Gaussian width in sites
    double momentum{0.0};  // lattice momentum in [-pi, pi]
};

Scenario build_channel_scenario(int n_sites, double hopping, int scatterer_site,
                                const PacketSpec& packet, double coupling_strength,
                                BathSpec bath, Grid grid);

// Model diagnostics: invariant violations are errors, a too-coarse time step
// for the coupling strength is a warning.
struct ValidationReport {
    std::vector<std::string> errors;
    std::vector<std::string> warnings;
    double step_parameter{0.0};  // max_j ||S_j|| sqrt(K_jj(0)) dt / hbar

    bool ok() const { return errors.empty(); }
    bool empty() const { return errors.empty() && warnings.empty(); }
};

ValidationReport validate_model(const Scenario& s);

} // namespace stoq
