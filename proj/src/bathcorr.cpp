// bathcorr.cpp — spectral integrals for K(tau) and derived covariance targets

#include "stoq/bathcorr.hpp"

#include <cmath>
#include <sstream>

namespace stoq {

namespace {

// [exp(i w tau) + exp(hbar w / T) exp(-i w tau)] / [1 + exp(hbar w / T)],
// written with the overflow-safe exp(-x) form.
Complex thermal_phase_factor(double omega, double tau, Temperature temperature, double hbar) {
    if (temperature.infinite) {
        const Complex e_plus = std::exp(Complex(0.0, omega * tau));
        const Complex e_minus = std::exp(Complex(0.0, -omega * tau));
        return (e_plus + e_minus) / 2.0;
    }
    const double x = hbar * omega / temperature.value;
    const double em = std::exp(-x);
    const Complex e_plus = std::exp(Complex(0.0, omega * tau));
    const Complex e_minus = std::exp(Complex(0.0, -omega * tau));
    return (em * e_plus + e_minus) / (em + 1.0);
}

// same factor through the cos / tanh*sin decomposition
Complex thermal_phase_factor_check(double omega, double tau, Temperature temperature,
                                   double hbar) {
    const double re = std::cos(omega * tau);
    const double im = -temperature.tanh_factor(omega, hbar) * std::sin(omega * tau);
    return Complex(re, im);
}

} // namespace

double thermal_occupation(double omega, Temperature temperature, double hbar) {
    if (temperature.infinite) {
        throw Error("bathcorr", "thermal occupation undefined at infinite temperature");
    }
    return 1.0 / std::expm1(hbar * omega / temperature.value);
}

CorrelationSet correlation_matrix(const SpectralModel& spectral, Temperature temperature,
                                  double hbar, const RealVector& tau_grid) {
    spectral.validate();
    if (!(hbar > 0.0)) throw Error("bathcorr", "hbar must be > 0");
    const int j = spectral.channels();
    const int n_lags = static_cast<int>(tau_grid.size());

    CorrelationSet out;
    out.tau_grid = tau_grid;
    out.hbar = hbar;
    out.k.assign(static_cast<std::size_t>(n_lags), Matrix::Zero(j, j));
    out.k_check.assign(static_cast<std::size_t>(n_lags), Matrix::Zero(j, j));

    for (int l = 0; l < n_lags; ++l) {
        const double tau = tau_grid[l];
        Matrix& k = out.k[static_cast<std::size_t>(l)];
        Matrix& kc = out.k_check[static_cast<std::size_t>(l)];
        if (spectral.kind == SpectralModel::Kind::Discrete) {
            for (const auto& mode : spectral.modes) {
                k += thermal_phase_factor(mode.omega, tau, temperature, hbar) *
                     mode.weight.cast<Complex>();
                kc += thermal_phase_factor_check(mode.omega, tau, temperature, hbar) *
                      mode.weight.cast<Complex>();
            }
        } else {
            for (Eigen::Index i = 0; i + 1 < spectral.omega_grid.size(); ++i) {
                const double w0 = spectral.omega_grid[i];
                const double w1 = spectral.omega_grid[i + 1];
                const double h = w1 - w0;
                k += 0.5 * h *
                     (thermal_phase_factor(w0, tau, temperature, hbar) *
                          spectral.sigma[static_cast<std::size_t>(i)].cast<Complex>() +
                      thermal_phase_factor(w1, tau, temperature, hbar) *
                          spectral.sigma[static_cast<std::size_t>(i + 1)].cast<Complex>());
                kc += 0.5 * h *
                      (thermal_phase_factor_check(w0, tau, temperature, hbar) *
                           spectral.sigma[static_cast<std::size_t>(i)].cast<Complex>() +
                       thermal_phase_factor_check(w1, tau, temperature, hbar) *
                           spectral.sigma[static_cast<std::size_t>(i + 1)].cast<Complex>());
            }
        }
    }

    // cross-check of the two quadrature forms (they share nodes, so this
    // catches corruption rather than coarseness)
    double scale = 0.0;
    for (const auto& k : out.k) scale = std::max(scale, max_abs(k));
    if (scale > 0.0) {
        for (int l = 0; l < n_lags; ++l) {
            const double diff =
                max_abs((out.k[static_cast<std::size_t>(l)] - out.k_check[static_cast<std::size_t>(l)]).eval());
            if (diff > 1e-8 * scale) {
                std::ostringstream os;
                os << "quadrature forms disagree at lag index " << l << " (relative "
                   << diff / scale << "); refine the omega grid (suggest >= "
                   << 2 * spectral.omega_grid.size() << " points)";
                throw Error("bathcorr", os.str());
            }
        }
    }

    // coarseness check for continuous spectra: trapezoid on the full grid vs
    // on every other node; a resolved grid changes the result only mildly
    if (spectral.kind == SpectralModel::Kind::Continuous && scale > 0.0 &&
        spectral.omega_grid.size() >= 5) {
        for (int l = 0; l < n_lags; ++l) {
            const double tau = tau_grid[l];
            Matrix coarse = Matrix::Zero(j, j);
            for (Eigen::Index i = 0; i + 2 < spectral.omega_grid.size(); i += 2) {
                const double w0 = spectral.omega_grid[i];
                const double w1 = spectral.omega_grid[i + 2];
                coarse += 0.5 * (w1 - w0) *
                          (thermal_phase_factor(w0, tau, temperature, hbar) *
                               spectral.sigma[static_cast<std::size_t>(i)].cast<Complex>() +
                           thermal_phase_factor(w1, tau, temperature, hbar) *
                               spectral.sigma[static_cast<std::size_t>(i + 2)].cast<Complex>());
            }
            // odd tail: close with the last node pair
            if ((spectral.omega_grid.size() - 1) % 2 != 0) {
                const Eigen::Index last = spectral.omega_grid.size() - 1;
                const double w0 = spectral.omega_grid[last - 1];
                const double w1 = spectral.omega_grid[last];
                coarse += 0.5 * (w1 - w0) *
                          (thermal_phase_factor(w0, tau, temperature, hbar) *
                               spectral.sigma[static_cast<std::size_t>(last - 1)].cast<Complex>() +
                           thermal_phase_factor(w1, tau, temperature, hbar) *
                               spectral.sigma[static_cast<std::size_t>(last)].cast<Complex>());
            }
            const double diff = max_abs((out.k[static_cast<std::size_t>(l)] - coarse).eval());
            if (diff > 1e-3 * scale) {
                std::ostringstream os;
                os << "quadrature unresolved at lag index " << l << " (grid-halving change "
                   << diff / scale << "); refine the omega grid (suggest >= "
                   << 4 * spectral.omega_grid.size() << " points)";
                throw Error("bathcorr", os.str());
            }
        }
    }
    return out;
}

XYCovariances xy_covariances(const CorrelationSet& c) {
    XYCovariances out;
    const int n = c.n_lags();
    out.c_xx.reserve(static_cast<std::size_t>(n));
    out.c_yx.reserve(static_cast<std::size_t>(n));
    for (int l = 0; l < n; ++l) {
        out.c_xx.push_back(c.k[static_cast<std::size_t>(l)].real());
        if (l == 0) {
            // causality: <y(t) x(s)> = 0 for s <= t, exact zero at equal times
            out.c_yx.push_back(RealMatrix::Zero(c.channels(), c.channels()));
        } else {
            out.c_yx.push_back((2.0 / c.hbar) * c.k[static_cast<std::size_t>(l)].imag());
        }
    }
    return out;
}

FdtReport fdt_diagnostics(const CorrelationSet& c, const BathSpec& bath) {
    FdtReport report;
    auto fail = [&](const std::string& msg) { report.failures.push_back(msg); };

    double scale = 0.0;
    for (const auto& k : c.k) scale = std::max(scale, max_abs(k));
    if (scale == 0.0) scale = 1.0;

    for (int l = 0; l < c.n_lags(); ++l) {
        const Matrix& k = c.k[static_cast<std::size_t>(l)];
        const double sym_dev = max_abs((k - k.transpose()).eval());
        if (sym_dev > 1e-10 * scale) {
            fail("K not channel-symmetric at lag index " + std::to_string(l));
        }
        const double diff = max_abs((k - c.k_check[static_cast<std::size_t>(l)]).eval());
        report.max_form_difference = std::max(report.max_form_difference, diff / scale);
        if (diff > 1e-8 * scale) {
            fail("quadrature forms disagree at lag index " + std::to_string(l));
        }
    }

    if (c.n_lags() > 0) {
        const Matrix& k0 = c.k.front();
        if (max_abs(Matrix(k0.imag().cast<Complex>())) > 1e-10 * scale) {
            fail("Im K(0) is not zero (Im K must be odd in tau)");
        }
        Eigen::SelfAdjointEigenSolver<Matrix> es(((k0 + k0.adjoint()) / 2.0).eval());
        report.min_k0_eigenvalue = es.eigenvalues().minCoeff();
        if (report.min_k0_eigenvalue < -1e-10 * scale) {
            fail("K(0) is not positive semidefinite");
        }
    }

    // detailed balance per discrete mode: (2 n_bar + 1) tanh(hbar w / 2T) = 1
    if (bath.spectral.kind == SpectralModel::Kind::Discrete &&
        !bath.temperature.infinite) {
        for (std::size_t m = 0; m < bath.spectral.modes.size(); ++m) {
            const double w = bath.spectral.modes[m].omega;
            const double n_bar = thermal_occupation(w, bath.temperature, bath.hbar);
            const double balance =
                (2.0 * n_bar + 1.0) * bath.temperature.tanh_factor(w, bath.hbar);
            if (std::abs(balance - 1.0) > 1e-10) {
                fail("detailed balance violated at mode " + std::to_string(m));
            }
        }
    }
    return report;
}

} // namespace stoq
