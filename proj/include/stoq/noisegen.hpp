// noisegen.hpp — Sampled complex Gaussian processes whose pseudo-moments
// <Z Z^T> match the quasi-statistics of the bath symbols:
// <XX> = C_xx, <YX> = C_yx (causal), <YY> = 0.

#pragma once

#include "stoq/bathcorr.hpp"
#include "stoq/model.hpp"
#include "stoq/rng.hpp"
#include "stoq/types.hpp"

#include <string>
#include <vector>

namespace stoq {

// Pseudo-covariance of the stacked vector Z = (X_j(t_n), Y_j(t_n)) on the
// staggered midpoint grid. Complex symmetric, NOT Hermitian: block structure
// [[C_xx, C_yx^T], [C_yx, 0]].
struct PseudoCovariance {
    int channels{0};
    int n_times{0};  // number of midpoints = n_steps
    double dt{0.0};
    double hbar{1.0};
    Matrix m;

    Eigen::Index x_index(int j, int n) const { return static_cast<Eigen::Index>(j) * n_times + n; }
    Eigen::Index y_index(int j, int n) const {
        return static_cast<Eigen::Index>(channels) * n_times + static_cast<Eigen::Index>(j) * n_times + n;
    }
    Eigen::Index size() const { return 2 * static_cast<Eigen::Index>(channels) * n_times; }
};

PseudoCovariance assemble_pseudo_covariance(const CorrelationSet& c, const Grid& grid);

// Complex factor G with G G^T = M; the sampler's reusable core.
struct NoiseFactor {
    Matrix g;  // size x rank(M)
    double residual{0.0};
    int channels{0};
    int n_times{0};
    double dt{0.0};
    double hbar{1.0};

    Eigen::Index n_deviates() const { return g.cols(); }
};

NoiseFactor complex_symmetric_factor(const PseudoCovariance& m);

// One realization of the processes on the midpoint grid, J x N each.
// W = X + i hbar Y / 2 drives the ket, W' = X - i hbar Y / 2 the co-state.
struct NoiseSample {
    Matrix x, y, w, wp;

    int channels() const { return static_cast<int>(x.rows()); }
    int n_times() const { return static_cast<int>(x.cols()); }
};

NoiseSample sample_noise(const NoiseFactor& factor, const rng::StreamKey& key);

// Estimated second pseudo-moments of W and W' against K, in standard-error
// units per entry.
struct MomentReport {
    double max_dev_se{0.0};
    std::string worst_entry;
    std::size_t n_samples{0};
    bool pass() const { return max_dev_se <= 5.0; }
};

MomentReport empirical_moment_check(const std::vector<NoiseSample>& samples,
                                    const CorrelationSet& c);

} // namespace stoq
