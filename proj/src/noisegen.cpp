// noisegen.cpp — pseudo-covariance assembly, factorization, and sampling

#include "stoq/noisegen.hpp"

#include "stoq/takagi.hpp"

#include <cmath>
#include <sstream>

namespace stoq {

PseudoCovariance assemble_pseudo_covariance(const CorrelationSet& c, const Grid& grid) {
    const int j_ch = c.channels();
    const int n = grid.n_steps;
    if (n <= 0) throw Error("noisegen", "grid has no steps");
    if (c.n_lags() < n) {
        throw Error("noisegen", "correlation set has fewer lags than grid steps");
    }
    for (int l = 0; l < n; ++l) {
        if (std::abs(c.tau_grid[l] - l * grid.dt) > 1e-12 * std::max(1.0, std::abs(l * grid.dt))) {
            throw Error("noisegen", "correlation lag grid does not match the step grid");
        }
    }

    const XYCovariances cov = xy_covariances(c);

    PseudoCovariance out;
    out.channels = j_ch;
    out.n_times = n;
    out.dt = grid.dt;
    out.hbar = c.hbar;
    out.m = Matrix::Zero(out.size(), out.size());

    for (int j = 0; j < j_ch; ++j) {
        for (int m = 0; m < j_ch; ++m) {
            for (int a = 0; a < n; ++a) {
                for (int b = 0; b < n; ++b) {
                    const int lag = std::abs(a - b);
                    out.m(out.x_index(j, a), out.x_index(m, b)) =
                        cov.c_xx[static_cast<std::size_t>(lag)](j, m);
                    // <y_j(t_b) x_m(t_a)> nonzero only for a > b (causality)
                    if (a > b) {
                        const double v = cov.c_yx[static_cast<std::size_t>(a - b)](j, m);
                        out.m(out.y_index(j, b), out.x_index(m, a)) = v;
                        out.m(out.x_index(m, a), out.y_index(j, b)) = v;
                    }
                }
            }
        }
    }

    if (max_abs((out.m - out.m.transpose()).eval()) != 0.0) {
        throw Error("noisegen", "pseudo-covariance assembly produced a non-symmetric matrix");
    }
    return out;
}

NoiseFactor complex_symmetric_factor(const PseudoCovariance& m) {
    SymmetricFactor f = factor_complex_symmetric(m.m);
    const double scale = max_abs(m.m);
    if (scale > 0.0 && f.residual > 1e-8 * scale) {
        std::ostringstream os;
        os << "factorization residual " << f.residual << " exceeds 1e-8 * " << scale;
        throw Error("noisegen", os.str());
    }
    NoiseFactor out;
    out.g = std::move(f.g);
    out.residual = f.residual;
    out.channels = m.channels;
    out.n_times = m.n_times;
    out.dt = m.dt;
    out.hbar = m.hbar;
    return out;
}

NoiseSample sample_noise(const NoiseFactor& factor, const rng::StreamKey& key) {
    const int j_ch = factor.channels;
    const int n = factor.n_times;

    rng::NormalStream stream(key);
    Vector eta(factor.g.cols());
    for (Eigen::Index k = 0; k < eta.size(); ++k) eta[k] = stream.next();
    const Vector z = factor.g * eta;

    NoiseSample s;
    s.x.resize(j_ch, n);
    s.y.resize(j_ch, n);
    for (int j = 0; j < j_ch; ++j) {
        for (int t = 0; t < n; ++t) {
            s.x(j, t) = z[static_cast<Eigen::Index>(j) * n + t];
            s.y(j, t) = z[static_cast<Eigen::Index>(j_ch) * n + static_cast<Eigen::Index>(j) * n + t];
        }
    }
    const Complex half_i_hbar(0.0, factor.hbar / 2.0);
    s.w = s.x + half_i_hbar * s.y;
    s.wp = s.x - half_i_hbar * s.y;
    return s;
}

MomentReport empirical_moment_check(const std::vector<NoiseSample>& samples,
                                    const CorrelationSet& c) {
    if (samples.size() < 1000) {
        throw Error("noisegen", "moment check needs at least 1000 samples");
    }
    const int j_ch = samples.front().channels();
    const int n = samples.front().n_times();
    const Eigen::Index dim = static_cast<Eigen::Index>(j_ch) * n;

    auto flat = [&](const Matrix& m) {
        Vector v(dim);
        for (int j = 0; j < j_ch; ++j)
            for (int t = 0; t < n; ++t) v[static_cast<Eigen::Index>(j) * n + t] = m(j, t);
        return v;
    };

    Matrix sum_ww = Matrix::Zero(dim, dim);
    Matrix sum_wpw = Matrix::Zero(dim, dim);
    RealMatrix sum_ww_sq = RealMatrix::Zero(dim, dim);
    RealMatrix sum_wpw_sq = RealMatrix::Zero(dim, dim);

    for (const auto& s : samples) {
        const Vector w = flat(s.w);
        const Vector wp = flat(s.wp);
        const Matrix ww = w * w.transpose();
        const Matrix wpw = wp * w.transpose();
        sum_ww += ww;
        sum_wpw += wpw;
        sum_ww_sq += ww.cwiseAbs2();
        sum_wpw_sq += wpw.cwiseAbs2();
    }

    const double n_samples = static_cast<double>(samples.size());
    MomentReport report;
    report.n_samples = samples.size();

    auto compare = [&](const Matrix& sum, const RealMatrix& sum_sq, bool conjugate_side) {
        for (int j = 0; j < j_ch; ++j) {
            for (int m = 0; m < j_ch; ++m) {
                for (int a = 0; a < n; ++a) {
                    for (int b = 0; b < n; ++b) {
                        const Eigen::Index ra = static_cast<Eigen::Index>(j) * n + a;
                        const Eigen::Index rb = static_cast<Eigen::Index>(m) * n + b;
                        const Complex mean = sum(ra, rb) / n_samples;
                        const double var =
                            std::max(sum_sq(ra, rb) / n_samples - std::norm(mean), 0.0);
                        const double se = std::sqrt(var / n_samples) + 1e-300;
                        // <W(ta) W(tb)> = K(|ta-tb|);
                        // <W'(ta) W(tb)> = K(ta-tb) with K(-tau) = conj(K(tau))
                        Complex target;
                        if (!conjugate_side) {
                            target = c.k[static_cast<std::size_t>(std::abs(a - b))](j, m);
                        } else {
                            const Complex k = c.k[static_cast<std::size_t>(std::abs(a - b))](j, m);
                            target = (a >= b) ? k : std::conj(k);
                        }
                        const double dev = std::abs(mean - target) / se;
                        if (dev > report.max_dev_se) {
                            report.max_dev_se = dev;
                            std::ostringstream os;
                            os << (conjugate_side ? "<W'W>" : "<WW>") << "[j=" << j
                               << ",m=" << m << ",a=" << a << ",b=" << b << "]";
                            report.worst_entry = os.str();
                        }
                    }
                }
            }
        }
    };

    compare(sum_ww, sum_ww_sq, false);
    compare(sum_wpw, sum_wpw_sq, true);
    return report;
}

} // namespace stoq
