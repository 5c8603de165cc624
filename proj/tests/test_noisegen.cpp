#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "stoq/noisegen.hpp"
#include "stoq/takagi.hpp"

#include <cmath>
#include <vector>

using namespace stoq;

namespace {

RealVector lags(int n, double dt) {
    RealVector tau(n);
    for (int l = 0; l < n; ++l) tau[l] = l * dt;
    return tau;
}

CorrelationSet mode_correlations(double omega, double weight, Temperature t, int n_lags,
                                 double dt, double hbar = 1.0) {
    return correlation_matrix(SpectralModel::single_mode(omega, weight), t, hbar,
                              lags(n_lags, dt));
}

std::vector<NoiseSample> draw(const NoiseFactor& f, std::size_t count,
                              std::uint64_t seed = 7) {
    std::vector<NoiseSample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back(sample_noise(f, rng::StreamKey{seed, 0, i}));
    }
    return out;
}

} // namespace

TEST_CASE("pseudo-covariance assembly: explicit two-step layout") {
    const double dt = 0.1;
    const CorrelationSet c = mode_correlations(1.3, 0.4, Temperature::finite(0.7), 2, dt);
    const PseudoCovariance m = assemble_pseudo_covariance(c, Grid{0.0, dt, 2});
    REQUIRE(m.size() == 4);

    const XYCovariances cov = xy_covariances(c);
    // x-x block from C_xx(|a-b|)
    CHECK(m.m(m.x_index(0, 0), m.x_index(0, 0)) == Complex(cov.c_xx[0](0, 0)));
    CHECK(m.m(m.x_index(0, 0), m.x_index(0, 1)) == Complex(cov.c_xx[1](0, 0)));
    CHECK(m.m(m.x_index(0, 1), m.x_index(0, 0)) == Complex(cov.c_xx[1](0, 0)));
    CHECK(m.m(m.x_index(0, 1), m.x_index(0, 1)) == Complex(cov.c_xx[0](0, 0)));
    // causal y-x coupling: only <y(t0) x(t1)> survives
    CHECK(m.m(m.y_index(0, 0), m.x_index(0, 1)) == Complex(cov.c_yx[1](0, 0)));
    CHECK(m.m(m.x_index(0, 1), m.y_index(0, 0)) == Complex(cov.c_yx[1](0, 0)));
    CHECK(m.m(m.y_index(0, 1), m.x_index(0, 0)) == Complex(0.0));
    CHECK(m.m(m.y_index(0, 0), m.x_index(0, 0)) == Complex(0.0));
    // y-y block is exactly zero
    CHECK(m.m(m.y_index(0, 0), m.y_index(0, 0)) == Complex(0.0));
    CHECK(m.m(m.y_index(0, 0), m.y_index(0, 1)) == Complex(0.0));
    CHECK(m.m(m.y_index(0, 1), m.y_index(0, 1)) == Complex(0.0));
}

TEST_CASE("assembly rejects a mismatched lag grid") {
    const CorrelationSet c = mode_correlations(1.0, 0.3, Temperature::finite(1.0), 5, 0.1);
    CHECK_THROWS_WITH_AS(assemble_pseudo_covariance(c, Grid{0.0, 0.2, 5}),
                         doctest::Contains("lag grid"), Error);
    CHECK_THROWS_WITH_AS(assemble_pseudo_covariance(c, Grid{0.0, 0.1, 9}),
                         doctest::Contains("fewer lags"), Error);
}

TEST_CASE("symmetric factor: hand-checkable matrices") {
    // zero matrix has rank 0 and zero residual
    const SymmetricFactor f0 = factor_complex_symmetric(Matrix::Zero(3, 3));
    CHECK(f0.g.cols() == 0);
    CHECK(f0.residual == 0.0);

    // real PSD matrix
    Matrix psd(2, 2);
    psd << 2.0, 0.5, 0.5, 1.0;
    const SymmetricFactor f1 = factor_complex_symmetric(psd);
    CHECK(max_abs((f1.g * f1.g.transpose() - psd).eval()) < 1e-12);

    // indefinite off-diagonal: [[0, b], [b, 0]] needs an imaginary column
    Matrix offd = Matrix::Zero(2, 2);
    offd(0, 1) = offd(1, 0) = 0.3;
    const SymmetricFactor f2 = factor_complex_symmetric(offd);
    CHECK(max_abs((f2.g * f2.g.transpose() - offd).eval()) < 1e-12);

    // genuinely complex symmetric
    Matrix cs(2, 2);
    cs << Complex(0.4, 0.1), Complex(0.2, -0.3), Complex(0.2, -0.3), Complex(-0.1, 0.2);
    const SymmetricFactor f3 = factor_complex_symmetric(cs);
    CHECK(max_abs((f3.g * f3.g.transpose() - cs).eval()) < 1e-10);
}

TEST_CASE("factor reproduces the causal zeros of the pseudo-covariance") {
    const CorrelationSet c = mode_correlations(1.0, 0.3, Temperature::finite(0.5), 12, 0.1);
    const PseudoCovariance m = assemble_pseudo_covariance(c, Grid{0.0, 0.1, 12});
    const NoiseFactor f = complex_symmetric_factor(m);
    const Matrix back = f.g * f.g.transpose();
    const double tol = 1e-8 * max_abs(m.m);
    CHECK(max_abs((back - m.m).eval()) <= tol);
    for (int a = 0; a < 12; ++a) {
        for (int b = 0; b <= a; ++b) {
            CHECK(std::abs(back(m.y_index(0, a), m.x_index(0, b))) <= tol);
        }
        for (int b = 0; b < 12; ++b) {
            CHECK(std::abs(back(m.y_index(0, a), m.y_index(0, b))) <= tol);
        }
    }
}

TEST_CASE("sampling is a pure function of the stream key") {
    const CorrelationSet c = mode_correlations(1.1, 0.2, Temperature::finite(1.0), 6, 0.1);
    const NoiseFactor f =
        complex_symmetric_factor(assemble_pseudo_covariance(c, Grid{0.0, 0.1, 6}));
    const NoiseSample a = sample_noise(f, rng::StreamKey{42, 3, 17});
    const NoiseSample b = sample_noise(f, rng::StreamKey{42, 3, 17});
    CHECK(max_abs((a.x - b.x).eval()) == 0.0);
    CHECK(max_abs((a.y - b.y).eval()) == 0.0);
    CHECK(max_abs((a.w - b.w).eval()) == 0.0);

    const NoiseSample other = sample_noise(f, rng::StreamKey{42, 3, 18});
    CHECK(max_abs((a.x - other.x).eval()) > 0.0);
    const NoiseSample tagged = sample_noise(f, rng::StreamKey{42, 4, 17});
    CHECK(max_abs((a.x - tagged.x).eval()) > 0.0);
}

TEST_CASE("infinite temperature degenerates to a real process") {
    const CorrelationSet c = mode_correlations(1.0, 0.3, Temperature::infinity(), 8, 0.1);
    const NoiseFactor f =
        complex_symmetric_factor(assemble_pseudo_covariance(c, Grid{0.0, 0.1, 8}));
    const NoiseSample s = sample_noise(f, rng::StreamKey{5, 0, 0});
    CHECK(max_abs(s.y) < 1e-12);
    CHECK(max_abs(Matrix(s.w.imag().cast<Complex>())) < 1e-12);
    CHECK(max_abs((s.w - s.wp).eval()) < 1e-12);
}

TEST_CASE("sample mean and pseudo-covariance converge to the targets") {
    const int n = 5;
    const CorrelationSet c = mode_correlations(1.2, 0.35, Temperature::finite(0.8), n, 0.1);
    const PseudoCovariance m = assemble_pseudo_covariance(c, Grid{0.0, 0.1, n});
    const NoiseFactor f = complex_symmetric_factor(m);

    const std::size_t n_samples = 20000;
    Vector mean = Vector::Zero(m.size());
    Matrix zz = Matrix::Zero(m.size(), m.size());
    RealMatrix zz_sq = RealMatrix::Zero(m.size(), m.size());
    for (std::size_t i = 0; i < n_samples; ++i) {
        const NoiseSample s = sample_noise(f, rng::StreamKey{11, 0, i});
        Vector z(m.size());
        for (int t = 0; t < n; ++t) {
            z[m.x_index(0, t)] = s.x(0, t);
            z[m.y_index(0, t)] = s.y(0, t);
        }
        mean += z;
        const Matrix outer = z * z.transpose();
        zz += outer;
        zz_sq += outer.cwiseAbs2();
    }
    mean /= static_cast<double>(n_samples);
    zz /= static_cast<double>(n_samples);
    zz_sq /= static_cast<double>(n_samples);

    const double scale = std::sqrt(max_abs(m.m));
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        CHECK(std::abs(mean[i]) <
              5.0 * scale / std::sqrt(static_cast<double>(n_samples)));
        for (Eigen::Index j = 0; j < m.size(); ++j) {
            const double var = std::max(zz_sq(i, j) - std::norm(zz(i, j)), 0.0);
            const double se = std::sqrt(var / static_cast<double>(n_samples)) + 1e-300;
            CHECK(std::abs(zz(i, j) - m.m(i, j)) < 5.0 * se + 1e-12);
        }
    }
}

TEST_CASE("empirical moment check passes for a faithful sampler") {
    const CorrelationSet c = mode_correlations(1.0, 0.3, Temperature::finite(1.0), 6, 0.1);
    const NoiseFactor f =
        complex_symmetric_factor(assemble_pseudo_covariance(c, Grid{0.0, 0.1, 6}));
    const MomentReport r = empirical_moment_check(draw(f, 4000), c);
    CHECK(r.pass());
    CHECK(r.n_samples == 4000);

    CHECK_THROWS_WITH_AS(empirical_moment_check(draw(f, 500), c),
                         doctest::Contains("at least 1000"), Error);
}

TEST_CASE("empirical moment check flags a broken sampler") {
    const CorrelationSet c = mode_correlations(1.0, 0.3, Temperature::finite(1.0), 6, 0.1);
    const NoiseFactor f =
        complex_symmetric_factor(assemble_pseudo_covariance(c, Grid{0.0, 0.1, 6}));
    std::vector<NoiseSample> bad = draw(f, 4000);
    for (auto& s : bad) s.w *= 1.5;  // wrong amplitude for the ket drive
    CHECK_FALSE(empirical_moment_check(bad, c).pass());
}

TEST_CASE("ordered minus anti-ordered moment difference is 2i Im K") {
    // <W'(ta) W(tb)> - <W(ta) W(tb)> is 0 for ta >= tb and -2i Im K(tb - ta)
    // for ta < tb; test both at low temperature where Im K is large
    const int n = 4;
    const CorrelationSet c = mode_correlations(1.0, 0.3, Temperature::finite(0.05), n, 0.2);
    const NoiseFactor f =
        complex_symmetric_factor(assemble_pseudo_covariance(c, Grid{0.0, 0.2, n}));

    const std::size_t n_samples = 20000;
    Matrix diff_sum = Matrix::Zero(n, n);
    RealMatrix diff_sq = RealMatrix::Zero(n, n);
    for (std::size_t i = 0; i < n_samples; ++i) {
        const NoiseSample s = sample_noise(f, rng::StreamKey{23, 0, i});
        for (int a = 0; a < n; ++a) {
            for (int b = 0; b < n; ++b) {
                const Complex d = (s.wp(0, a) - s.w(0, a)) * s.w(0, b);
                diff_sum(a, b) += d;
                diff_sq(a, b) += std::norm(d);
            }
        }
    }
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            const Complex mean = diff_sum(a, b) / static_cast<double>(n_samples);
            const double var =
                std::max(diff_sq(a, b) / static_cast<double>(n_samples) - std::norm(mean), 0.0);
            const double se = std::sqrt(var / static_cast<double>(n_samples)) + 1e-300;
            const Complex target =
                a >= b ? Complex(0.0)
                       : Complex(0.0, -2.0) * c.k[static_cast<std::size_t>(b - a)](0, 0).imag();
            CHECK(std::abs(mean - target) < 5.0 * se + 1e-12);
        }
    }
}

TEST_CASE("fourth moments factor into pair products") {
    // Gaussian closure: <w0 w1 w2 w3> = K01 K23 + K02 K13 + K03 K12
    const int n = 4;
    const CorrelationSet c = mode_correlations(1.0, 0.25, Temperature::finite(1.0), n, 0.15);
    const NoiseFactor f =
        complex_symmetric_factor(assemble_pseudo_covariance(c, Grid{0.0, 0.15, n}));

    const std::size_t n_samples = 40000;
    Complex sum(0.0);
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < n_samples; ++i) {
        const NoiseSample s = sample_noise(f, rng::StreamKey{31, 0, i});
        const Complex v = s.w(0, 0) * s.w(0, 1) * s.w(0, 2) * s.w(0, 3);
        sum += v;
        sum_sq += std::norm(v);
    }
    const Complex mean = sum / static_cast<double>(n_samples);
    const double var =
        std::max(sum_sq / static_cast<double>(n_samples) - std::norm(mean), 0.0);
    const double se = std::sqrt(var / static_cast<double>(n_samples)) + 1e-300;

    auto k = [&](int a, int b) { return c.k[static_cast<std::size_t>(std::abs(a - b))](0, 0); };
    const Complex target = k(0, 1) * k(2, 3) + k(0, 2) * k(1, 3) + k(0, 3) * k(1, 2);
    CHECK(std::abs(mean - target) < 5.0 * se);
}

TEST_CASE("moment error scales as one over root n") {
    const int n = 4;
    const CorrelationSet c = mode_correlations(1.0, 0.3, Temperature::finite(1.0), n, 0.1);
    const NoiseFactor f =
        complex_symmetric_factor(assemble_pseudo_covariance(c, Grid{0.0, 0.1, n}));

    auto rms_error = [&](std::size_t count, std::uint64_t seed) {
        Matrix sum = Matrix::Zero(n, n);
        for (std::size_t i = 0; i < count; ++i) {
            const NoiseSample s = sample_noise(f, rng::StreamKey{seed, 0, i});
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) sum(a, b) += s.w(0, a) * s.w(0, b);
        }
        double acc = 0.0;
        for (int a = 0; a < n; ++a) {
            for (int b = 0; b < n; ++b) {
                const Complex mean = sum(a, b) / static_cast<double>(count);
                acc += std::norm(mean - c.k[static_cast<std::size_t>(std::abs(a - b))](0, 0));
            }
        }
        return std::sqrt(acc / (n * n));
    };

    // average the RMS moment error over independent replicas at n and 4n samples
    double e1 = 0.0, e4 = 0.0;
    for (std::uint64_t r = 0; r < 8; ++r) {
        e1 += rms_error(1000, 100 + r);
        e4 += rms_error(4000, 200 + r);
    }
    const double ratio = e1 / e4;
    CHECK(ratio > 1.6);
    CHECK(ratio < 2.5);
}
