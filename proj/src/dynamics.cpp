// dynamics.cpp — exponential midpoint integrator for the stochastic
// Schrödinger and Liouville equations

#include "stoq/dynamics.hpp"

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>

namespace stoq {

namespace {

constexpr double kDivergenceNorm = 1e6;

// exp of a 2x2 matrix: A = a I + B with tr B = 0, B^2 = mu^2 I,
// exp(A) = e^a (cosh(mu) I + sinh(mu)/mu B).
Matrix exp_2x2(const Matrix& m) {
    const Complex a = (m(0, 0) + m(1, 1)) / 2.0;
    Matrix b = m;
    b(0, 0) -= a;
    b(1, 1) -= a;
    const Complex mu_sq = b(0, 0) * b(0, 0) + b(0, 1) * b(1, 0);
    const Complex mu = std::sqrt(mu_sq);
    Complex ch, sh_over_mu;
    if (std::abs(mu) < 1e-8) {
        ch = 1.0 + mu_sq / 2.0 + mu_sq * mu_sq / 24.0;
        sh_over_mu = 1.0 + mu_sq / 6.0 + mu_sq * mu_sq / 120.0;
    } else {
        ch = std::cosh(mu);
        sh_over_mu = std::sinh(mu) / mu;
    }
    const Complex ea = std::exp(a);
    Matrix out(2, 2);
    out(0, 0) = ea * (ch + sh_over_mu * b(0, 0));
    out(0, 1) = ea * sh_over_mu * b(0, 1);
    out(1, 0) = ea * sh_over_mu * b(1, 0);
    out(1, 1) = ea * (ch + sh_over_mu * b(1, 1));
    return out;
}

double inf_norm(const Matrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().rowwise().sum().maxCoeff();
}

} // namespace

Vector apply_exponential(const Matrix& a, const Vector& v) {
    if (a.rows() != a.cols() || a.rows() != v.size()) {
        throw Error("dynamics", "exponential action dimension mismatch");
    }
    const double norm = inf_norm(a);
    const int s = std::max(1, static_cast<int>(std::ceil(norm)));
    const Matrix as = a / static_cast<double>(s);
    Vector out = v;
    for (int step = 0; step < s; ++step) {
        Vector term = out;
        const double scale = out.norm();
        for (int k = 1; k <= 40; ++k) {
            term = (as * term) / static_cast<double>(k);
            out += term;
            if (term.norm() <= 1e-16 * scale) break;
        }
    }
    return out;
}

Matrix matrix_exponential(const Matrix& a) {
    if (a.rows() != a.cols()) throw Error("dynamics", "generator must be square");
    if (a.rows() == 2) return exp_2x2(a);
    return a.exp();
}

Vector step_exponential(const Vector& state, const Matrix& generator, double dt) {
    if (generator.rows() != state.size()) {
        throw Error("dynamics", "generator/state dimension mismatch");
    }
    if (inf_norm(generator) * std::abs(dt) > 10.0) {
        throw Error("dynamics", "||generator||*dt exceeds the step guard (10); reduce dt");
    }
    return matrix_exponential((dt * generator).eval()) * state;
}

TrajectoryPair propagate_pair(const Vector& psi0, const NoiseSample& noise,
                              const Scenario& s) {
    const int n_steps = s.grid.n_steps;
    const Eigen::Index d = s.dim();
    if (noise.n_times() != n_steps) {
        throw Error("dynamics", "noise grid does not match scenario grid");
    }
    if (noise.channels() != static_cast<int>(s.couplings.size())) {
        throw Error("dynamics", "noise channels do not match scenario couplings");
    }

    const Complex minus_i_over_hbar(0.0, -1.0 / s.bath.hbar);

    TrajectoryPair out;
    out.psi.assign(static_cast<std::size_t>(n_steps) + 1, Vector());
    out.phi.assign(static_cast<std::size_t>(n_steps) + 1, Vector());
    out.psi_norm.resize(n_steps + 1);
    out.phi_norm.resize(n_steps + 1);
    out.psi[0] = psi0;
    out.phi[0] = psi0;
    out.psi_norm[0] = psi0.norm();
    out.phi_norm[0] = psi0.norm();

    Vector psi = psi0;
    Vector phi = psi0;
    Matrix gen(d, d);

    for (int n = 0; n < n_steps; ++n) {
        // ket: H_S + sum_j W_j(t_mid) S_j
        gen = s.system.entries;
        for (std::size_t j = 0; j < s.couplings.size(); ++j) {
            gen += noise.w(static_cast<Eigen::Index>(j), n) * s.couplings[j].entries;
        }
        gen = (s.grid.dt * minus_i_over_hbar * gen).eval();
        psi = d <= 2 ? Vector(matrix_exponential(gen) * psi) : apply_exponential(gen, psi);

        // co-state ket: H_S + sum_j conj(W'_j) S_j, so that <phi| carries the
        // conjugate symbol x - i hbar y / 2
        gen = s.system.entries;
        for (std::size_t j = 0; j < s.couplings.size(); ++j) {
            gen += std::conj(noise.wp(static_cast<Eigen::Index>(j), n)) * s.couplings[j].entries;
        }
        gen = (s.grid.dt * minus_i_over_hbar * gen).eval();
        phi = d <= 2 ? Vector(matrix_exponential(gen) * phi) : apply_exponential(gen, phi);

        out.psi[static_cast<std::size_t>(n) + 1] = psi;
        out.phi[static_cast<std::size_t>(n) + 1] = phi;
        out.psi_norm[n + 1] = psi.norm();
        out.phi_norm[n + 1] = phi.norm();

        if (out.psi_norm[n + 1] > kDivergenceNorm || out.phi_norm[n + 1] > kDivergenceNorm ||
            !std::isfinite(out.psi_norm[n + 1]) || !std::isfinite(out.phi_norm[n + 1])) {
            out.divergent = true;
            out.divergence_step = n + 1;
            // truncate: hold the last finite state on the remaining grid
            for (int r = n + 2; r <= n_steps; ++r) {
                out.psi[static_cast<std::size_t>(r)] = psi;
                out.phi[static_cast<std::size_t>(r)] = phi;
                out.psi_norm[r] = out.psi_norm[n + 1];
                out.phi_norm[r] = out.phi_norm[n + 1];
            }
            break;
        }
    }
    return out;
}

std::vector<Matrix> propagate_liouville(const Matrix& r0, const NoiseSample& noise,
                                        const Scenario& s) {
    const int n_steps = s.grid.n_steps;
    const Eigen::Index d = s.dim();
    if (r0.rows() != d || r0.cols() != d) {
        throw Error("dynamics", "initial matrix dimension mismatch");
    }
    if (noise.n_times() != n_steps) {
        throw Error("dynamics", "noise grid does not match scenario grid");
    }

    const Matrix id = Matrix::Identity(d, d);
    const Complex i_over_hbar(0.0, 1.0 / s.bath.hbar);

    // L(A) R = (i/hbar)(R A - A R);  Pi(A) R = (R A + A R)/2, on vec(R)
    auto liouville = [&](const Matrix& a) -> Matrix {
        return i_over_hbar *
               (Eigen::kroneckerProduct(a.transpose(), id) - Eigen::kroneckerProduct(id, a));
    };
    auto jordan = [&](const Matrix& a) -> Matrix {
        return 0.5 *
               (Eigen::kroneckerProduct(a.transpose(), id) + Eigen::kroneckerProduct(id, a));
    };

    const Matrix l_system = liouville(s.system.entries);
    std::vector<Matrix> l_coupling, pi_coupling;
    for (const auto& c : s.couplings) {
        l_coupling.push_back(liouville(c.entries));
        pi_coupling.push_back(jordan(c.entries));
    }

    std::vector<Matrix> out;
    out.reserve(static_cast<std::size_t>(n_steps) + 1);
    out.push_back(r0);

    Vector vec_r = Eigen::Map<const Vector>(r0.data(), d * d);
    for (int n = 0; n < n_steps; ++n) {
        Matrix l_step = l_system;
        for (std::size_t j = 0; j < s.couplings.size(); ++j) {
            l_step += noise.x(static_cast<Eigen::Index>(j), n) * l_coupling[j] +
                      noise.y(static_cast<Eigen::Index>(j), n) * pi_coupling[j];
        }
        vec_r = matrix_exponential((s.grid.dt * l_step).eval()) * vec_r;
        out.push_back(Eigen::Map<const Matrix>(vec_r.data(), d, d));
    }
    return out;
}

std::vector<Vector> free_propagation(const Vector& psi0, const Scenario& s) {
    const int n_steps = s.grid.n_steps;
    const Complex minus_i_over_hbar(0.0, -1.0 / s.bath.hbar);
    const Matrix u0 =
        matrix_exponential((s.grid.dt * minus_i_over_hbar * s.system.entries).eval());

    std::vector<Vector> out;
    out.reserve(static_cast<std::size_t>(n_steps) + 1);
    out.push_back(psi0);
    Vector psi = psi0;
    for (int n = 0; n < n_steps; ++n) {
        psi = u0 * psi;
        out.push_back(psi);
    }
    return out;
}

} // namespace stoq
