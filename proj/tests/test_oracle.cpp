#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "stoq/bathcorr.hpp"
#include "stoq/dynamics.hpp"
#include "stoq/model.hpp"
#include "stoq/oracle.hpp"

#include <cmath>

using namespace stoq;

namespace {

RealVector lags(int n, double dt) {
    RealVector tau(n);
    for (int l = 0; l < n; ++l) tau[l] = l * dt;
    return tau;
}

BathSpec flat_bath(double temperature = 1.0) {
    BathSpec b;
    b.temperature = Temperature::finite(temperature);
    b.spectral = SpectralModel::single_mode(1.0, 0.09);
    return b;
}

// exact second moments of the symbols from the superoperator route:
// K(tau) = <x(tau) x(0)> + (i hbar / 2) <applied: x(tau), y(0)>
Complex moment_k(const Matrix& h_w, const std::vector<Matrix>& w_ops, const Matrix& rho_w,
                 int j, int m, double tau, double hbar) {
    const Complex xx =
        superoperator_moment(h_w, w_ops, rho_w,
                             {{MomentFactor::Kind::X, j, tau}, {MomentFactor::Kind::X, m, 0.0}},
                             hbar)
            .value;
    const Complex xy =
        superoperator_moment(h_w, w_ops, rho_w,
                             {{MomentFactor::Kind::X, j, tau}, {MomentFactor::Kind::Y, m, 0.0}},
                             hbar)
            .value;
    return xx + Complex(0.0, hbar / 2.0) * xy;
}

} // namespace

TEST_CASE("truncation adequacy check") {
    BathModeSet b;
    b.modes.push_back(BathMode{1.0, 0.1, 4, 0});
    // T = 2: occupation of level 3 is far above 1e-6
    CHECK_THROWS_WITH_AS(b.check_truncation(Temperature::finite(2.0), 1.0),
                         doctest::Contains("n_max"), Error);
    CHECK_THROWS_AS(b.check_truncation(Temperature::infinity(), 1.0), Error);
    b.modes[0].n_max = 40;
    CHECK_NOTHROW(b.check_truncation(Temperature::finite(2.0), 1.0));
}

TEST_CASE("thermal state") {
    Matrix h(2, 2);
    h << 0.5, 0.0, 0.0, -0.5;
    const Matrix g = thermal_state(h, Temperature::finite(1.0));
    // populations 1/(1+e) and e/(1+e) for a unit splitting at T = 1
    CHECK(g(0, 0).real() == doctest::Approx(0.268941).epsilon(1e-5));
    CHECK(g(1, 1).real() == doctest::Approx(0.731059).epsilon(1e-5));
    CHECK(std::abs(g.trace() - 1.0) < 1e-14);

    const Matrix flat = thermal_state(h, Temperature::infinity());
    CHECK(max_abs((flat - Matrix::Identity(2, 2) / 2.0).eval()) < 1e-15);
}

TEST_CASE("partial trace recovers the system factor") {
    Matrix rho_s(2, 2);
    rho_s << 0.7, Complex(0.1, 0.2), Complex(0.1, -0.2), 0.3;
    Matrix rho_b(3, 3);
    rho_b << 0.5, 0.1, 0.0, 0.1, 0.3, 0.05, 0.0, 0.05, 0.2;
    Matrix joint = Matrix::Zero(6, 6);
    for (int s1 = 0; s1 < 2; ++s1)
        for (int s2 = 0; s2 < 2; ++s2)
            for (int b1 = 0; b1 < 3; ++b1)
                for (int b2 = 0; b2 < 3; ++b2)
                    joint(s1 * 3 + b1, s2 * 3 + b2) = rho_s(s1, s2) * rho_b(b1, b2);
    CHECK(max_abs((partial_trace_bath(joint, 2) - rho_s).eval()) < 1e-14);
}

TEST_CASE("zero coupling reduces to free unitary evolution") {
    const Grid grid{0.0, 0.05, 60};
    Scenario s = build_two_level_scenario(1.0, CouplingAxis::X, 0.0, flat_bath(), grid);
    BathModeSet b;
    b.modes.push_back(BathMode{1.0, 0.0, 16, 0});
    const auto rho = exact_reduced_dynamics(s, b);
    const auto psi = free_propagation(s.initial_state, s);
    REQUIRE(rho.size() == psi.size());
    for (std::size_t n = 0; n < rho.size(); ++n) {
        CHECK(max_abs((rho[n] - psi[n] * psi[n].adjoint()).eval()) < 1e-10);
        CHECK(purity(rho[n]) <= 1.0 + 1e-10);
        CHECK(std::abs(rho[n].trace() - 1.0) < 1e-10);
    }
}

TEST_CASE("independent-boson dephasing matches the closed form") {
    // H_S = (delta/2) sz, coupling g sz to a single mode c (a + a+):
    // |rho01(t)| = |rho01(0)| exp(-(2 g c / w)^2 coth(hbar w / 2T) (1 - cos w t))
    const double delta = 1.0, g = 1.0, c = 0.2, w = 1.0, t_val = 0.8;
    const Grid grid{0.0, 0.05, 120};
    Scenario s = build_two_level_scenario(delta, CouplingAxis::Z, g, flat_bath(t_val), grid);
    Vector plus(2);
    plus << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
    s.initial_state = plus;

    BathModeSet b;
    b.modes.push_back(BathMode{w, c, 30, 0});
    b.check_truncation(Temperature::finite(t_val), 1.0);
    const auto rho = exact_reduced_dynamics(s, b);

    const double lam = 2.0 * g * c / w;
    const double coth = 1.0 / std::tanh(w / (2.0 * t_val));
    for (std::size_t n = 0; n < rho.size(); ++n) {
        const double t = grid.time_at(static_cast<int>(n));
        const double expected = 0.5 * std::exp(-lam * lam * coth * (1.0 - std::cos(w * t)));
        CHECK(std::abs(rho[n](0, 1)) == doctest::Approx(expected).epsilon(1e-6));
        CHECK(rho[n](0, 0).real() == doctest::Approx(0.5).epsilon(1e-9));
    }
}

TEST_CASE("mode relabeling does not change the reduced dynamics") {
    const Grid grid{0.0, 0.1, 20};
    Scenario s = build_two_level_scenario(1.0, CouplingAxis::X, 0.3, flat_bath(), grid);
    BathModeSet b1, b2;
    b1.modes = {BathMode{1.0, 0.2, 16, 0}, BathMode{1.7, 0.15, 12, 0}};
    b2.modes = {BathMode{1.7, 0.15, 12, 0}, BathMode{1.0, 0.2, 16, 0}};
    const auto r1 = exact_reduced_dynamics(s, b1);
    const auto r2 = exact_reduced_dynamics(s, b2);
    for (std::size_t n = 0; n < r1.size(); ++n) {
        CHECK(max_abs((r1[n] - r2[n]).eval()) < 1e-12);
    }
}

TEST_CASE("modes_to_spectrum carries the thermal weight") {
    BathModeSet b;
    b.modes.push_back(BathMode{1.0, 0.3, 12, 0});
    const SpectralModel sp = modes_to_spectrum(b, Temperature::finite(1.0), 1.0);
    REQUIRE(sp.modes.size() == 1);
    // 0.09 * (2 / (e - 1) + 1) = 0.194756
    CHECK(sp.modes[0].weight(0, 0) == doctest::Approx(0.194756).epsilon(1e-5));

    // T -> 0: weight -> c^2 (vacuum fluctuations only)
    const SpectralModel cold = modes_to_spectrum(b, Temperature::finite(1e-3), 1.0);
    CHECK(cold.modes[0].weight(0, 0) == doctest::Approx(0.09).epsilon(1e-10));

    // weight grows linearly with T in the hot limit: ~ 2 c^2 T / (hbar w)
    const SpectralModel hot = modes_to_spectrum(b, Temperature::finite(100.0), 1.0);
    CHECK(hot.modes[0].weight(0, 0) == doctest::Approx(2.0 * 0.09 * 100.0).epsilon(0.01));
}

TEST_CASE("first moments and pure-y moments vanish") {
    BathModeSet b;
    b.modes.push_back(BathMode{1.0, 0.25, 14, 0});
    const Matrix h_w = b.bath_hamiltonian(1.0);
    const auto w_ops = b.bath_coupling_operators();
    const Matrix rho_w = thermal_state(h_w, Temperature::finite(0.8));

    CHECK(std::abs(superoperator_moment(h_w, w_ops, rho_w,
                                        {{MomentFactor::Kind::X, 0, 0.7}}, 1.0)
                       .value) < 1e-12);
    CHECK(std::abs(superoperator_moment(h_w, w_ops, rho_w,
                                        {{MomentFactor::Kind::Y, 0, 0.7}}, 1.0)
                       .value) < 1e-12);
    // <y y> = 0 at any pair of times
    for (double t : {0.0, 0.3, 1.1}) {
        const Complex yy =
            superoperator_moment(h_w, w_ops, rho_w,
                                 {{MomentFactor::Kind::Y, 0, 1.2}, {MomentFactor::Kind::Y, 0, t}},
                                 1.0)
                .value;
        CHECK(std::abs(yy) < 1e-12);
    }
    // causality: a y applied last (latest time) traces to zero
    const Complex yx =
        superoperator_moment(h_w, w_ops, rho_w,
                             {{MomentFactor::Kind::Y, 0, 1.5}, {MomentFactor::Kind::X, 0, 0.4}},
                             1.0)
            .value;
    CHECK(std::abs(yx) < 1e-12);
}

TEST_CASE("x autocorrelation of a single mode is the cosine law") {
    const double w = 1.3, c = 0.2, t_val = 0.7;
    BathModeSet b;
    b.modes.push_back(BathMode{w, c, 20, 0});
    const Matrix h_w = b.bath_hamiltonian(1.0);
    const auto w_ops = b.bath_coupling_operators();
    const Matrix rho_w = thermal_state(h_w, Temperature::finite(t_val));
    const double n_bar = thermal_occupation(w, Temperature::finite(t_val), 1.0);
    for (double tau : {0.0, 0.4, 1.0, 2.3}) {
        const Complex xx =
            superoperator_moment(h_w, w_ops, rho_w,
                                 {{MomentFactor::Kind::X, 0, tau}, {MomentFactor::Kind::X, 0, 0.0}},
                                 1.0)
                .value;
        CHECK(std::abs(xx - c * c * (2.0 * n_bar + 1.0) * std::cos(w * tau)) < 1e-10);
    }
}

TEST_CASE("superoperator second moments reproduce the spectral kernel") {
    // single mode and a two-mode set on one channel, compared against the
    // kernel computed from the equivalent discrete spectrum
    for (int n_modes : {1, 2}) {
        // truncation well beyond the 1e-6 occupancy gate: the 1e-9 moment
        // tolerance needs the thermal tail suppressed to ~1e-13
        BathModeSet b;
        if (n_modes == 1) {
            b.modes.push_back(BathMode{1.0, 0.25, 32, 0});
        } else {
            // stiffer modes: deep truncation within the 256 joint-dimension cap
            b.modes.push_back(BathMode{1.6, 0.25, 18, 0});
            b.modes.push_back(BathMode{2.4, 0.15, 13, 0});
        }
        const Temperature t_val = Temperature::finite(0.9);
        const Matrix h_w = b.bath_hamiltonian(1.0);
        const auto w_ops = b.bath_coupling_operators();
        const Matrix rho_w = thermal_state(h_w, t_val);

        const RealVector tau = lags(6, 0.3);
        const CorrelationSet c = correlation_matrix(modes_to_spectrum(b, t_val, 1.0),
                                                    t_val, 1.0, tau);
        for (int l = 0; l < 6; ++l) {
            const Complex k = moment_k(h_w, w_ops, rho_w, 0, 0, tau[l], 1.0);
            CHECK(std::abs(k - c.k[static_cast<std::size_t>(l)](0, 0)) < 1e-9);
        }
    }
}

TEST_CASE("out-of-order factors are sorted and flagged") {
    BathModeSet b;
    b.modes.push_back(BathMode{1.0, 0.25, 14, 0});
    const Matrix h_w = b.bath_hamiltonian(1.0);
    const auto w_ops = b.bath_coupling_operators();
    const Matrix rho_w = thermal_state(h_w, Temperature::finite(0.8));

    const MomentValue ordered =
        superoperator_moment(h_w, w_ops, rho_w,
                             {{MomentFactor::Kind::X, 0, 1.0}, {MomentFactor::Kind::X, 0, 0.2}},
                             1.0);
    const MomentValue swapped =
        superoperator_moment(h_w, w_ops, rho_w,
                             {{MomentFactor::Kind::X, 0, 0.2}, {MomentFactor::Kind::X, 0, 1.0}},
                             1.0);
    CHECK_FALSE(ordered.reordered);
    CHECK(swapped.reordered);
    CHECK(std::abs(ordered.value - swapped.value) < 1e-14);
}

TEST_CASE("trace distance") {
    Matrix a = Matrix::Zero(2, 2), b = Matrix::Zero(2, 2);
    a(0, 0) = 0.6;
    a(1, 1) = 0.4;
    b(0, 0) = 0.5;
    b(1, 1) = 0.5;
    CHECK(trace_distance(a, b) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(trace_distance(a, a) == doctest::Approx(0.0));

    // orthogonal pure states are at distance 1
    Matrix p0 = Matrix::Zero(2, 2), p1 = Matrix::Zero(2, 2);
    p0(0, 0) = 1.0;
    p1(1, 1) = 1.0;
    CHECK(trace_distance(p0, p1) == doctest::Approx(1.0).epsilon(1e-12));

    // hermitize flag symmetrizes noisy estimates
    Matrix noisy = a;
    noisy(0, 1) = Complex(0.0, 1e-3);
    CHECK(trace_distance(noisy, a, true) == doctest::Approx(5e-4).epsilon(1e-6));
}

TEST_CASE("purity") {
    Matrix p = Matrix::Zero(2, 2);
    p(0, 0) = 1.0;
    CHECK(purity(p) == doctest::Approx(1.0));
    CHECK(purity((Matrix::Identity(2, 2) / 2.0).eval()) == doctest::Approx(0.5));
}
