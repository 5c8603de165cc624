// oracle.cpp — exact system+modes dynamics and bath-space moment algebra

#include "stoq/oracle.hpp"

#include "stoq/bathcorr.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace stoq {

namespace {

constexpr Eigen::Index kTotalDimCap = 4096;
constexpr Eigen::Index kBathDimCap = 256;
constexpr double kTruncationTol = 1e-6;

Matrix fock_lowering(int n_max) {
    Matrix a = Matrix::Zero(n_max, n_max);
    for (int n = 1; n < n_max; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
    return a;
}

Matrix kron_all(const std::vector<Matrix>& ops) {
    Matrix out = ops.front();
    for (std::size_t k = 1; k < ops.size(); ++k) {
        out = Eigen::kroneckerProduct(out, ops[k]).eval();
    }
    return out;
}

// op on mode k, identity elsewhere
Matrix embed_mode(const std::vector<BathMode>& modes, std::size_t k, const Matrix& op) {
    std::vector<Matrix> factors;
    factors.reserve(modes.size());
    for (std::size_t m = 0; m < modes.size(); ++m) {
        factors.push_back(m == k ? op : Matrix::Identity(modes[m].n_max, modes[m].n_max));
    }
    return kron_all(factors);
}

} // namespace

int BathModeSet::channels() const {
    int c = 0;
    for (const auto& m : modes) c = std::max(c, m.channel + 1);
    return c;
}

Eigen::Index BathModeSet::bath_dim() const {
    Eigen::Index d = 1;
    for (const auto& m : modes) d *= m.n_max;
    return d;
}

void BathModeSet::check_truncation(Temperature temperature, double hbar) const {
    if (modes.empty()) throw Error("oracle", "mode set is empty");
    for (std::size_t k = 0; k < modes.size(); ++k) {
        const auto& m = modes[k];
        if (m.n_max < 4) throw Error("oracle", "mode truncation level must be >= 4");
        if (!(m.omega > 0.0)) throw Error("oracle", "mode frequency must be > 0");
        if (temperature.infinite) {
            throw Error("oracle", "truncated modes cannot represent an infinite-temperature bath");
        }
        // thermal weight of the top retained level: e^{-(n_max-1)x}(1 - e^{-x})
        const double x = hbar * m.omega / temperature.value;
        const double top = std::exp(-(m.n_max - 1) * x) * (-std::expm1(-x));
        if (top >= kTruncationTol) {
            const int needed =
                static_cast<int>(std::ceil(std::log((-std::expm1(-x)) / kTruncationTol) / x)) + 2;
            std::ostringstream os;
            os << "mode " << k << " truncation inadequate (top-level occupation " << top
               << "); need n_max >= " << needed;
            throw Error("oracle", os.str());
        }
    }
}

Matrix BathModeSet::bath_hamiltonian(double hbar) const {
    const Eigen::Index d = bath_dim();
    Matrix h = Matrix::Zero(d, d);
    for (std::size_t k = 0; k < modes.size(); ++k) {
        const Matrix a = fock_lowering(modes[k].n_max);
        h += hbar * modes[k].omega * embed_mode(modes, k, (a.adjoint() * a).eval());
    }
    return h;
}

std::vector<Matrix> BathModeSet::bath_coupling_operators() const {
    const Eigen::Index d = bath_dim();
    std::vector<Matrix> ops(static_cast<std::size_t>(channels()), Matrix::Zero(d, d));
    for (std::size_t k = 0; k < modes.size(); ++k) {
        const Matrix a = fock_lowering(modes[k].n_max);
        ops[static_cast<std::size_t>(modes[k].channel)] +=
            modes[k].coupling * embed_mode(modes, k, (a + a.adjoint()).eval());
    }
    return ops;
}

Matrix thermal_state(const Matrix& h, Temperature temperature) {
    const Eigen::Index d = h.rows();
    if (temperature.infinite) {
        return Matrix::Identity(d, d) / static_cast<double>(d);
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    const RealVector e = es.eigenvalues();
    // shift by the ground energy before exponentiating
    RealVector w = ((e.array() - e.minCoeff()) * (-1.0 / temperature.value)).exp();
    w /= w.sum();
    return es.eigenvectors() * w.asDiagonal().toDenseMatrix().cast<Complex>() *
           es.eigenvectors().adjoint();
}

Matrix partial_trace_bath(const Matrix& rho, Eigen::Index d_system) {
    const Eigen::Index d = rho.rows();
    if (d % d_system != 0) throw Error("oracle", "dimension not divisible by system dimension");
    const Eigen::Index d_bath = d / d_system;
    Matrix out = Matrix::Zero(d_system, d_system);
    for (Eigen::Index i = 0; i < d_system; ++i) {
        for (Eigen::Index j = 0; j < d_system; ++j) {
            Complex sum = 0.0;
            for (Eigen::Index k = 0; k < d_bath; ++k) {
                sum += rho(i * d_bath + k, j * d_bath + k);
            }
            out(i, j) = sum;
        }
    }
    return out;
}

std::vector<Matrix> exact_reduced_dynamics(const Scenario& s, const BathModeSet& b) {
    b.check_truncation(s.bath.temperature, s.bath.hbar);
    if (b.channels() > static_cast<int>(s.couplings.size())) {
        throw Error("oracle", "mode channels exceed scenario coupling channels");
    }
    const Eigen::Index d_s = s.dim();
    const Eigen::Index d_b = b.bath_dim();
    if (d_s * d_b > kTotalDimCap) {
        throw Error("oracle", "total dimension exceeds the oracle cap (4096)");
    }

    const Matrix id_s = Matrix::Identity(d_s, d_s);
    const Matrix id_b = Matrix::Identity(d_b, d_b);
    const Matrix h_w = b.bath_hamiltonian(s.bath.hbar);
    const std::vector<Matrix> w_ops = b.bath_coupling_operators();

    Matrix h_full = Eigen::kroneckerProduct(s.system.entries, id_b).eval() +
                    Eigen::kroneckerProduct(id_s, h_w).eval();
    for (std::size_t j = 0; j < w_ops.size(); ++j) {
        h_full += Eigen::kroneckerProduct(s.couplings[j].entries, w_ops[j]).eval();
    }

    const Matrix rho0 =
        Eigen::kroneckerProduct(s.initial_rho(), thermal_state(h_w, s.bath.temperature)).eval();

    Eigen::SelfAdjointEigenSolver<Matrix> es(h_full);
    const RealVector e = es.eigenvalues();
    const Matrix& v = es.eigenvectors();
    const Matrix rho0_eig = v.adjoint() * rho0 * v;

    std::vector<Matrix> out;
    out.reserve(static_cast<std::size_t>(s.grid.n_times()));
    const Eigen::Index d = d_s * d_b;
    Matrix rho_eig(d, d);
    for (int n = 0; n < s.grid.n_times(); ++n) {
        const double t = s.grid.time_at(n) - s.grid.t0;
        for (Eigen::Index a = 0; a < d; ++a) {
            for (Eigen::Index c = 0; c < d; ++c) {
                rho_eig(a, c) =
                    rho0_eig(a, c) * std::exp(Complex(0.0, -(e[a] - e[c]) * t / s.bath.hbar));
            }
        }
        out.push_back(partial_trace_bath((v * rho_eig * v.adjoint()).eval(), d_s));
    }
    return out;
}

SpectralModel modes_to_spectrum(const BathModeSet& b, Temperature temperature, double hbar) {
    if (temperature.infinite || !(temperature.value > 0.0)) {
        throw Error("oracle", "modes_to_spectrum requires finite positive temperature");
    }
    const int j_ch = b.channels();
    std::vector<SpectralModel::Mode> out;
    out.reserve(b.modes.size());
    for (const auto& m : b.modes) {
        const double n_bar = thermal_occupation(m.omega, temperature, hbar);
        RealMatrix w = RealMatrix::Zero(j_ch, j_ch);
        w(m.channel, m.channel) = m.coupling * m.coupling * (2.0 * n_bar + 1.0);
        out.push_back({m.omega, std::move(w)});
    }
    return SpectralModel::discrete(std::move(out));
}

MomentValue superoperator_moment(const Matrix& h_w, const std::vector<Matrix>& w_ops,
                                 const Matrix& rho_w, std::vector<MomentFactor> factors,
                                 double hbar) {
    if (h_w.rows() > kBathDimCap) throw Error("oracle", "bath dimension exceeds 256");
    if (factors.empty() || factors.size() > 3) {
        throw Error("oracle", "moment order must be between 1 and 3");
    }
    for (const auto& f : factors) {
        if (f.channel < 0 || f.channel >= static_cast<int>(w_ops.size())) {
            throw Error("oracle", "moment factor channel out of range");
        }
    }

    MomentValue out;
    // chronological convention: later factors act later, i.e. leftmost
    std::vector<MomentFactor> sorted = factors;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const MomentFactor& a, const MomentFactor& b) { return a.time > b.time; });
    for (std::size_t k = 0; k < factors.size(); ++k) {
        if (sorted[k].time != factors[k].time || sorted[k].channel != factors[k].channel ||
            sorted[k].kind != factors[k].kind) {
            out.reordered = true;
            break;
        }
    }

    Eigen::SelfAdjointEigenSolver<Matrix> es(h_w);
    const RealVector e = es.eigenvalues();
    const Matrix& v = es.eigenvectors();

    // Heisenberg operator W~(t) = e^{i H t / hbar} W e^{-i H t / hbar}
    auto heisenberg = [&](const Matrix& w, double t) {
        Matrix w_eig = v.adjoint() * w * v;
        for (Eigen::Index a = 0; a < e.size(); ++a) {
            for (Eigen::Index c = 0; c < e.size(); ++c) {
                w_eig(a, c) *= std::exp(Complex(0.0, (e[a] - e[c]) * t / hbar));
            }
        }
        return (v * w_eig * v.adjoint()).eval();
    };

    // apply earliest first: walk the latest-first list from the back
    Matrix state = rho_w;
    const Complex i_over_hbar(0.0, 1.0 / hbar);
    for (auto it = sorted.rbegin(); it != sorted.rend(); ++it) {
        const Matrix wt = heisenberg(w_ops[static_cast<std::size_t>(it->channel)], it->time);
        if (it->kind == MomentFactor::Kind::X) {
            state = (0.5 * (state * wt + wt * state)).eval();
        } else {
            state = (i_over_hbar * (state * wt - wt * state)).eval();
        }
    }
    out.value = state.trace();
    return out;
}

double trace_distance(const Matrix& rho1, const Matrix& rho2, bool hermitize) {
    if (rho1.rows() != rho2.rows() || rho1.cols() != rho2.cols()) {
        throw Error("oracle", "trace distance dimension mismatch");
    }
    Matrix diff = rho1 - rho2;
    if (hermitize) diff = ((diff + diff.adjoint()) / 2.0).eval();
    Eigen::SelfAdjointEigenSolver<Matrix> es(diff);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

double purity(const Matrix& rho) { return (rho * rho).trace().real(); }

} // namespace stoq
