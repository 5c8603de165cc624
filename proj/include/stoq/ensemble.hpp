// ensemble.hpp — Monte Carlo engine: trajectory pairs over the initial
// decomposition, averaged into the density estimate, mean wavefunction, and
// overlap statistics with batch-means standard errors.

#pragma once

#include "stoq/dynamics.hpp"
#include "stoq/model.hpp"
#include "stoq/noisegen.hpp"
#include "stoq/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace stoq {

inline constexpr int kEnsembleBatches = 32;
// reserved stream tag for the common-noise overlap pass (branch tags are small)
inline constexpr std::uint32_t kPairedNoiseTag = 0x50414952u;

struct EnsembleOptions {
    std::size_t n_traj{100};
    std::uint64_t master_seed{1};
    int workers{1};
    bool deterministic_reduce{true};
    bool store_rho{true};        // per-time matrix accumulators (small dims)
    bool compute_overlap{true};  // common-noise overlap pass (doubles the work)
    bool unpaired_bra{false};    // negative control: bra side uses psi, not phi
};

// Per-batch sums for one initial-state branch. Batches are fixed contiguous
// trajectory-index ranges, so the reduction is independent of worker count.
struct BranchBatch {
    std::vector<Vector> sum_psi;       // [time] ket sum
    std::vector<Vector> sum_phi;       // [time] co-state sum
    std::vector<Vector> sum_eigenpop;  // [time] <v_k|psi><phi|v_k> sums (H_S eigenbasis)
    std::vector<Complex> sum_trace;    // [time] <phi|psi> sums
    std::vector<Matrix> sum_rho;       // [time] |psi><phi| sums, if store_rho
    std::size_t n_valid{0};
    std::size_t n_divergent{0};
};

// Per-batch overlap sums <phi_alpha | psi_beta> under shared noise.
struct OverlapBatch {
    std::vector<Matrix> sum_overlap;  // [time] (alpha, beta)
    std::size_t n_valid{0};
    std::size_t n_divergent{0};
};

struct MeanSeries {
    std::vector<Vector> value;     // [time]
    std::vector<RealVector> se;    // [time] per component
};

struct ScalarSeries {
    std::vector<Complex> value;
    std::vector<double> se;
};

struct OverlapSeries {
    std::vector<Matrix> value;      // [time] (alpha, beta)
    std::vector<RealMatrix> se;
};

struct DensityEstimate {
    std::vector<Matrix> raw;         // [time]
    std::vector<Matrix> hermitized;  // [time]
    std::vector<double> se;          // [time] aggregate entrywise SE
    double max_trace_deviation{0.0};
    double max_hermiticity_deviation{0.0};
    double min_eigenvalue{0.0};  // over hermitized estimates, reported not clipped
};

struct EnsembleResult {
    Grid grid;
    std::vector<double> weights;        // branch weights, descending
    std::vector<Vector> branch_states;  // initial kets per branch
    Matrix eigenbasis;                  // H_S eigenvectors (columns)
    RealVector eigenvalues;             // H_S eigenvalues
    std::vector<std::vector<BranchBatch>> batches;  // [branch][batch]
    std::vector<OverlapBatch> overlap_batches;      // [batch], empty if skipped
    EnsembleOptions options;
    std::size_t n_traj{0};
    std::size_t divergent_count{0};
    bool valid{true};  // false if divergent fraction >= 0.1%
    bool rho_stored{false};

    std::size_t branches() const { return weights.size(); }
    int n_times() const { return grid.n_times(); }
};

// Runs n_traj trajectory pairs per branch (seeds derived from master_seed,
// branch tag, trajectory index) plus, unless disabled, the common-noise
// overlap pass. Aborts if the divergent fraction exceeds 1%.
EnsembleResult run_ensemble(const Scenario& s, const NoiseFactor& factor,
                            const EnsembleOptions& opt);

MeanSeries mean_wavefunction(const EnsembleResult& e, std::size_t branch);

// Weighted trace accumulator sum_alpha P_alpha mean_i <phi|psi>: equals the
// trace of the raw density estimate identically.
ScalarSeries trace_series(const EnsembleResult& e);

// H_S-eigenbasis populations of the raw density estimate (complex before
// hermitization; Re gives the hermitized populations).
struct PopulationSeries {
    std::vector<Vector> value;  // [time] length-d
    std::vector<RealVector> se;
};
PopulationSeries population_series(const EnsembleResult& e);

OverlapSeries overlap_matrix(const EnsembleResult& e);

DensityEstimate estimate_density(const EnsembleResult& e);

} // namespace stoq
