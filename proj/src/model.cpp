// model.cpp — scenario construction, validation, and initial-state decomposition

#include "stoq/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace stoq {

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

// integral of sigma over omega (K(0)), diagonal channel entries
RealVector spectrum_zero_lag(const SpectralModel& sp) {
    const int j = sp.channels();
    RealVector k0 = RealVector::Zero(j);
    if (sp.kind == SpectralModel::Kind::Discrete) {
        for (const auto& mode : sp.modes) k0 += mode.weight.diagonal();
    } else {
        for (Eigen::Index i = 0; i + 1 < sp.omega_grid.size(); ++i) {
            const double h = sp.omega_grid[i + 1] - sp.omega_grid[i];
            k0 += 0.5 * h *
                  (sp.sigma[static_cast<std::size_t>(i)].diagonal() +
                   sp.sigma[static_cast<std::size_t>(i + 1)].diagonal());
        }
    }
    return k0;
}

} // namespace

HermitianOperator::HermitianOperator(Matrix m, const std::string& name) {
    if (m.rows() != m.cols() || m.rows() == 0) {
        throw Error("model", name + " must be a nonempty square matrix");
    }
    const double scale = std::max(max_abs(m), 1.0);
    const double dev = max_abs((m - m.adjoint()).eval());
    if (dev > 1e-12 * scale) {
        throw Error("model", name + " is not Hermitian (deviation " + fmt(dev) + ")");
    }
    entries = std::move(m);
}

Temperature Temperature::finite(double t) {
    if (!(t > 0.0)) throw Error("model", "temperature must be > 0 (or infinite)");
    return Temperature{t, false};
}

double Temperature::tanh_factor(double omega, double hbar) const {
    if (infinite) return 0.0;
    return std::tanh(hbar * omega / (2.0 * value));
}

int SpectralModel::channels() const {
    if (kind == Kind::Discrete) {
        return modes.empty() ? 0 : static_cast<int>(modes.front().weight.rows());
    }
    return sigma.empty() ? 0 : static_cast<int>(sigma.front().rows());
}

void SpectralModel::validate() const {
    const int j = channels();
    if (j == 0) throw Error("model", "spectral model has no channels");

    auto check_weight = [&](const RealMatrix& w, const std::string& where) {
        if (w.rows() != j || w.cols() != j) {
            throw Error("model", "spectrum matrix size mismatch at " + where);
        }
        if ((w - w.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, w.cwiseAbs().maxCoeff())) {
            throw Error("model", "spectrum matrix not symmetric at " + where);
        }
        Eigen::SelfAdjointEigenSolver<RealMatrix> es(w);
        const double min_eig = es.eigenvalues().minCoeff();
        if (min_eig < -1e-12 * std::max(1.0, w.cwiseAbs().maxCoeff())) {
            throw Error("model", "spectrum matrix not positive semidefinite at " + where +
                                     " (eigenvalue " + fmt(min_eig) + ")");
        }
    };

    if (kind == Kind::Discrete) {
        if (modes.empty()) throw Error("model", "discrete spectrum has no modes");
        for (std::size_t k = 0; k < modes.size(); ++k) {
            if (!(modes[k].omega > 0.0)) {
                throw Error("model", "discrete mode frequency must be > 0");
            }
            check_weight(modes[k].weight, "mode " + std::to_string(k));
        }
    } else {
        if (omega_grid.size() < 2 || sigma.size() != static_cast<std::size_t>(omega_grid.size())) {
            throw Error("model", "continuous spectrum needs matching omega grid and values");
        }
        if (omega_grid[0] < 0.0) throw Error("model", "omega grid must be >= 0");
        for (Eigen::Index i = 0; i + 1 < omega_grid.size(); ++i) {
            if (!(omega_grid[i + 1] > omega_grid[i])) {
                throw Error("model", "omega grid must be strictly increasing");
            }
        }
        for (std::size_t i = 0; i < sigma.size(); ++i) {
            check_weight(sigma[i], "omega node " + std::to_string(i));
        }
    }
}

SpectralModel SpectralModel::ohmic(double eta, double omega_c, double omega_max, int n_points) {
    if (!(eta >= 0.0) || !(omega_c > 0.0) || !(omega_max > 0.0) || n_points < 2) {
        throw Error("model", "invalid ohmic spectrum parameters");
    }
    SpectralModel sp;
    sp.kind = Kind::Continuous;
    sp.omega_grid = RealVector::LinSpaced(n_points, 0.0, omega_max);
    sp.sigma.reserve(static_cast<std::size_t>(n_points));
    for (Eigen::Index i = 0; i < n_points; ++i) {
        const double w = sp.omega_grid[i];
        RealMatrix s(1, 1);
        s(0, 0) = eta * w * std::exp(-w / omega_c);
        sp.sigma.push_back(s);
    }
    return sp;
}

SpectralModel SpectralModel::discrete(std::vector<Mode> modes) {
    SpectralModel sp;
    sp.kind = Kind::Discrete;
    sp.modes = std::move(modes);
    return sp;
}

SpectralModel SpectralModel::single_mode(double omega, double weight) {
    Mode m;
    m.omega = omega;
    m.weight = RealMatrix::Constant(1, 1, weight);
    return discrete({m});
}

void BathSpec::validate() const {
    if (!(hbar > 0.0)) throw Error("model", "hbar must be > 0");
    if (!temperature.infinite && !(temperature.value > 0.0)) {
        throw Error("model", "temperature must be > 0 or infinite");
    }
    spectral.validate();
}

Matrix Scenario::initial_rho() const {
    if (initial_density) return *initial_density;
    return initial_state * initial_state.adjoint();
}

InitialDecomposition decompose_initial(const Matrix& rho) {
    if (rho.rows() != rho.cols() || rho.rows() == 0) {
        throw Error("model", "density matrix must be square");
    }
    const double scale = std::max(max_abs(rho), 1.0);
    const double herm_dev = max_abs((rho - rho.adjoint()).eval());
    if (herm_dev > 1e-10 * scale) {
        throw Error("model", "initial density matrix not Hermitian (deviation " + fmt(herm_dev) + ")");
    }
    const double trace_dev = std::abs(rho.trace() - Complex(1.0, 0.0));
    if (trace_dev > 1e-10) {
        throw Error("model", "initial density matrix trace deviates from 1 by " + fmt(trace_dev));
    }

    Eigen::SelfAdjointEigenSolver<Matrix> solver(((rho + rho.adjoint()) / 2.0).eval());
    if (solver.info() != Eigen::Success) {
        throw Error("model", "eigendecomposition of initial density matrix failed");
    }
    const RealVector& ev = solver.eigenvalues();  // ascending
    if (ev.minCoeff() < -1e-10) {
        throw Error("model", "initial density matrix has negative eigenvalue " + fmt(ev.minCoeff()));
    }

    // Keep eigenvalues above 1e-12, list weights descending. Eigen's ascending
    // order is reversed, which for exact ties keeps a deterministic order.
    InitialDecomposition out;
    double dropped = 0.0;
    for (Eigen::Index k = ev.size() - 1; k >= 0; --k) {
        if (ev[k] < 1e-12) {
            dropped += std::max(ev[k], 0.0);
            continue;
        }
        out.weights.push_back(ev[k]);
        out.states.push_back(solver.eigenvectors().col(k));
    }
    if (dropped > 1e-10) {
        throw Error("model", "dropped eigenvalue mass " + fmt(dropped) + " exceeds tolerance");
    }
    const double total = std::accumulate(out.weights.begin(), out.weights.end(), 0.0);
    for (double& w : out.weights) w /= total;
    return out;
}

InitialDecomposition initial_decomposition(const Scenario& s) {
    if (s.pure_initial()) {
        InitialDecomposition d;
        d.weights = {1.0};
        d.states = {s.initial_state};
        return d;
    }
    return decompose_initial(*s.initial_density);
}

Scenario build_two_level_scenario(double splitting, CouplingAxis axis, double strength,
                                  BathSpec bath, Grid grid) {
    if (splitting < 0.0 || strength < 0.0) {
        throw Error("model", "two-level splitting and coupling strength must be >= 0");
    }
    Matrix h(2, 2);
    h << splitting / 2.0, 0.0, 0.0, -splitting / 2.0;
    Matrix s(2, 2);
    if (axis == CouplingAxis::X) {
        s << 0.0, strength, strength, 0.0;
    } else {
        s << strength, 0.0, 0.0, -strength;
    }
    Scenario sc;
    sc.system = HermitianOperator(h, "H_S");
    sc.couplings = {HermitianOperator(s, "S_1")};
    sc.bath = std::move(bath);
    sc.initial_state = Vector::Zero(2);
    sc.initial_state[0] = 1.0;
    sc.grid = grid;
    return sc;
}

Scenario build_channel_scenario(int n_sites, double hopping, int scatterer_site,
                                const PacketSpec& packet, double coupling_strength,
                                BathSpec bath, Grid grid) {
    if (n_sites < 32) throw Error("model", "channel needs at least 32 sites");
    if (scatterer_site < 0 || scatterer_site >= n_sites) {
        throw Error("model", "scatterer site out of range");
    }

    Matrix h = Matrix::Zero(n_sites, n_sites);
    for (int i = 0; i + 1 < n_sites; ++i) {
        h(i, i + 1) = -hopping;
        h(i + 1, i) = -hopping;
    }
    Matrix proj = Matrix::Zero(n_sites, n_sites);
    proj(scatterer_site, scatterer_site) = coupling_strength;

    Vector psi(n_sites);
    for (int x = 0; x < n_sites; ++x) {
        const double dx = x - packet.center;
        psi[x] = std::exp(Complex(-dx * dx / (4.0 * packet.width * packet.width),
                                  packet.momentum * x));
    }
    psi /= psi.norm();

    const double edge_mass = std::norm(psi[0]) + std::norm(psi[n_sites - 1]);
    if (edge_mass > 1e-6) {
        throw Error("model", "wave packet overlaps chain ends (norm " + fmt(edge_mass) +
                                 "); move it away from the boundaries");
    }

    Scenario sc;
    sc.system = HermitianOperator(std::move(h), "H_S");
    sc.couplings = {HermitianOperator(std::move(proj), "S_1")};
    sc.bath = std::move(bath);
    sc.initial_state = std::move(psi);
    sc.grid = grid;
    return sc;
}

ValidationReport validate_model(const Scenario& s) {
    ValidationReport report;
    auto note = [&](const std::string& msg) { report.errors.push_back(msg); };

    try {
        s.bath.validate();
    } catch (const Error& e) {
        note(e.what());
    }

    const Eigen::Index d = s.system.dim();
    if (d == 0) note("system Hamiltonian is empty");
    for (std::size_t j = 0; j < s.couplings.size(); ++j) {
        if (s.couplings[j].dim() != d) {
            note("coupling S_" + std::to_string(j + 1) + " dimension mismatch");
        }
    }
    if (s.couplings.size() > 8) note("more than 8 coupling channels are not supported");
    if (static_cast<int>(s.couplings.size()) != (s.bath.spectral.channels())) {
        note("number of couplings (" + std::to_string(s.couplings.size()) +
             ") does not match spectrum channels (" +
             std::to_string(s.bath.spectral.channels()) + ")");
    }

    if (s.pure_initial()) {
        if (s.initial_state.size() != d) {
            note("initial state dimension mismatch");
        } else if (std::abs(s.initial_state.norm() - 1.0) > 1e-12) {
            note("initial state norm deviates from 1 by " +
                 fmt(std::abs(s.initial_state.norm() - 1.0)));
        }
    } else {
        if (s.initial_density->rows() != d) {
            note("initial density matrix dimension mismatch");
        } else if (std::abs(s.initial_density->trace() - Complex(1.0, 0.0)) > 1e-12) {
            note("initial density matrix trace deviates from 1");
        }
    }

    if (!(s.grid.dt > 0.0) || s.grid.n_steps <= 0) {
        note("grid needs dt > 0 and n_steps > 0");
    }

    if (report.ok() && !s.couplings.empty()) {
        const RealVector k0 = spectrum_zero_lag(s.bath.spectral);
        double param = 0.0;
        for (std::size_t j = 0; j < s.couplings.size(); ++j) {
            const double op_norm = s.couplings[j].entries.operatorNorm();
            param = std::max(param, op_norm * std::sqrt(std::max(k0[static_cast<Eigen::Index>(j)], 0.0)) *
                                        s.grid.dt / s.bath.hbar);
        }
        report.step_parameter = param;
        if (param > 0.1) {
            report.warnings.push_back("step parameter " + fmt(param) +
                                      " exceeds 0.1; reduce dt or coupling");
        }
    }
    return report;
}

} // namespace stoq
