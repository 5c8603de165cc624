#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "stoq/dynamics.hpp"
#include "stoq/model.hpp"
#include "stoq/scenario_json.hpp"

#include <cmath>

using namespace stoq;

namespace {

BathSpec flat_bath(double weight = 0.1, double temperature = 1.0) {
    BathSpec b;
    b.temperature = Temperature::finite(temperature);
    b.spectral = SpectralModel::single_mode(1.0, weight);
    return b;
}

} // namespace

TEST_CASE("hermitian operator construction") {
    Matrix good(2, 2);
    good << 1.0, Complex(0.0, 0.5), Complex(0.0, -0.5), -1.0;
    CHECK_NOTHROW(HermitianOperator(good, "H"));

    Matrix bad = good;
    bad(0, 1) = Complex(0.0, 0.6);
    CHECK_THROWS_WITH_AS(HermitianOperator(bad, "S_1"),
                         doctest::Contains("S_1 is not Hermitian"), Error);
}

TEST_CASE("temperature") {
    CHECK_THROWS_AS(Temperature::finite(0.0), Error);
    CHECK_THROWS_AS(Temperature::finite(-1.0), Error);
    CHECK(Temperature::infinity().tanh_factor(3.0, 1.0) == 0.0);
    CHECK(Temperature::finite(0.5).tanh_factor(1.0, 1.0) == doctest::Approx(std::tanh(1.0)));
}

TEST_CASE("decompose pure projector") {
    Matrix rho = Matrix::Zero(2, 2);
    rho(0, 0) = 1.0;
    const InitialDecomposition d = decompose_initial(rho);
    REQUIRE(d.size() == 1);
    CHECK(d.weights[0] == doctest::Approx(1.0));
    CHECK(std::abs(d.states[0][0]) == doctest::Approx(1.0));
}

TEST_CASE("decompose maximally mixed") {
    const Matrix rho = Matrix::Identity(2, 2) / 2.0;
    const InitialDecomposition d = decompose_initial(rho);
    REQUIRE(d.size() == 2);
    CHECK(d.weights[0] == doctest::Approx(0.5));
    CHECK(d.weights[1] == doctest::Approx(0.5));
    CHECK(std::abs(d.states[0].dot(d.states[1])) < 1e-10);
}

TEST_CASE("decompose diagonal density") {
    Matrix rho = Matrix::Zero(2, 2);
    rho(0, 0) = 0.9;
    rho(1, 1) = 0.1;
    const InitialDecomposition d = decompose_initial(rho);
    REQUIRE(d.size() == 2);
    CHECK(d.weights[0] == doctest::Approx(0.9));
    CHECK(d.weights[1] == doctest::Approx(0.1));
    CHECK(std::abs(d.states[0][0]) == doctest::Approx(1.0));
    CHECK(std::abs(d.states[1][1]) == doctest::Approx(1.0));
}

TEST_CASE("decompose rejects bad inputs") {
    Matrix rho(2, 2);
    rho << 0.5, Complex(0.1, 0.2), Complex(0.1, 0.1), 0.5;  // not Hermitian
    CHECK_THROWS_WITH_AS(decompose_initial(rho), doctest::Contains("not Hermitian"), Error);

    Matrix neg(2, 2);
    neg << 1.2, 0.0, 0.0, -0.2;
    CHECK_THROWS_WITH_AS(decompose_initial(neg), doctest::Contains("negative eigenvalue"),
                         Error);
}

TEST_CASE("decomposition reassembles the density matrix") {
    // random PSD with unit trace
    Matrix a(3, 3);
    a << Complex(0.4, 0.0), Complex(0.1, 0.2), Complex(-0.05, 0.1),
         Complex(0.3, -0.1), Complex(0.2, 0.0), Complex(0.15, 0.05),
         Complex(0.1, 0.1), Complex(-0.2, 0.3), Complex(0.5, 0.0);
    Matrix rho = a * a.adjoint();
    rho /= rho.trace();
    const InitialDecomposition d = decompose_initial(rho);
    Matrix back = Matrix::Zero(3, 3);
    for (std::size_t k = 0; k < d.size(); ++k) {
        back += d.weights[k] * d.states[k] * d.states[k].adjoint();
    }
    CHECK(max_abs((back - rho).eval()) < 1e-10);
}

TEST_CASE("two-level builder") {
    const Grid grid{0.0, 0.05, 10};
    const Scenario sx = build_two_level_scenario(1.0, CouplingAxis::X, 0.2, flat_bath(), grid);
    CHECK(sx.system.entries(0, 0) == Complex(0.5));
    CHECK(sx.system.entries(1, 1) == Complex(-0.5));
    CHECK(sx.couplings[0].entries(0, 1) == Complex(0.2));
    CHECK(sx.initial_state[0] == Complex(1.0));
    CHECK(validate_model(sx).empty());

    // dephasing channel: S commutes with H_S
    const Scenario sz = build_two_level_scenario(1.0, CouplingAxis::Z, 0.1, flat_bath(), grid);
    const Matrix comm = sz.system.entries * sz.couplings[0].entries -
                        sz.couplings[0].entries * sz.system.entries;
    CHECK(max_abs(comm) == 0.0);

    // zero splitting: evolution generated by noise alone
    const Scenario s0 = build_two_level_scenario(0.0, CouplingAxis::X, 1.0, flat_bath(), grid);
    CHECK(max_abs(s0.system.entries) == 0.0);
}

TEST_CASE("channel packet moves at the group velocity") {
    const double j_hop = 1.0;
    const double k0 = kPi / 2.0;  // group velocity 2 J sin(k) = 2, zero dispersion curvature
    const Grid grid{0.0, 0.05, 200};
    const Scenario s = build_channel_scenario(64, j_hop, 40, {20.0, 4.0, k0}, 0.0,
                                              flat_bath(), grid);
    const std::vector<Vector> psi0 = free_propagation(s.initial_state, s);
    auto center = [](const Vector& v) {
        double c = 0.0;
        for (Eigen::Index x = 0; x < v.size(); ++x) c += x * std::norm(v[x]);
        return c;
    };
    const double moved = center(psi0.back()) - center(psi0.front());
    // mean velocity averages 2J sin(k) over the packet's momentum spread:
    // E[sin(k0 + delta)] = sin(k0) exp(-sigma_k^2 / 2), sigma_k = 1/(2 width)
    const double sigma_k = 1.0 / (2.0 * 4.0);
    const double expected = 2.0 * j_hop * std::sin(k0) * std::exp(-sigma_k * sigma_k / 2.0) * 10.0;
    CHECK(moved == doctest::Approx(expected).epsilon(0.002));
}

TEST_CASE("static barrier reproduces the lattice transmission coefficient") {
    const double j_hop = 1.0, v_bar = 1.0, k0 = kPi / 2.0, width = 5.0;
    const int barrier = 48;
    const Grid grid{0.0, 0.05, 400};
    Scenario s = build_channel_scenario(96, j_hop, barrier, {24.0, width, k0}, 0.0,
                                        flat_bath(), grid);
    Matrix h = s.system.entries;
    h(barrier, barrier) += v_bar;
    s.system = HermitianOperator(std::move(h), "H_S");

    const std::vector<Vector> psi = free_propagation(s.initial_state, s);
    double transmitted = 0.0;
    for (Eigen::Index x = barrier + 1; x < 96; ++x) transmitted += std::norm(psi.back()[x]);

    // T(k) = 1 / (1 + (V / 2J sin k)^2), averaged over the packet's Gaussian
    // momentum distribution (sigma_k = 1/(2 width))
    const double sigma_k = 1.0 / (2.0 * width);
    double t_pred = 0.0, norm = 0.0;
    for (int n = -40; n <= 40; ++n) {
        const double k = k0 + sigma_k * n / 10.0;
        const double w = std::exp(-0.5 * (n / 10.0) * (n / 10.0));
        const double ratio = v_bar / (2.0 * j_hop * std::sin(k));
        t_pred += w / (1.0 + ratio * ratio);
        norm += w;
    }
    t_pred /= norm;
    CHECK(transmitted == doctest::Approx(t_pred).epsilon(0.02));
}

TEST_CASE("channel builder rejects packets near the boundary") {
    CHECK_THROWS_WITH_AS(build_channel_scenario(32, 1.0, 16, {2.0, 4.0, kPi / 2.0}, 0.0,
                                                flat_bath(), Grid{0.0, 0.05, 10}),
                         doctest::Contains("overlaps chain ends"), Error);
}

TEST_CASE("validate_model reports the step parameter") {
    const Grid coarse{0.0, 2.0, 10};
    const Scenario s = build_two_level_scenario(1.0, CouplingAxis::X, 1.0,
                                                flat_bath(1.0), coarse);
    const ValidationReport r = validate_model(s);
    CHECK(r.ok());
    CHECK(r.step_parameter == doctest::Approx(1.0 * std::sqrt(1.0) * 2.0));
    REQUIRE(r.warnings.size() == 1);
    CHECK(r.warnings[0].find("step parameter") != std::string::npos);
}

TEST_CASE("validate_model catches structural errors") {
    Scenario s = build_two_level_scenario(1.0, CouplingAxis::X, 0.2, flat_bath(),
                                          Grid{0.0, 0.05, 10});
    s.initial_state *= 1.5;  // denormalized
    const ValidationReport r = validate_model(s);
    CHECK_FALSE(r.ok());
}

TEST_CASE("scenario JSON round-trip is bit-exact") {
    BathSpec bath;
    bath.temperature = Temperature::finite(1.0 / 3.0);
    bath.spectral = SpectralModel::single_mode(std::sqrt(2.0), 0.1 / 3.0);
    const Scenario s = build_two_level_scenario(1.0 / 7.0, CouplingAxis::X, 0.123456789,
                                                bath, Grid{0.0, 0.05, 20});
    const auto j1 = scenario_to_json(s);
    const Scenario s2 = scenario_from_json(j1);
    const auto j2 = scenario_to_json(s2);
    CHECK(j1.dump() == j2.dump());
    CHECK(max_abs((s.system.entries - s2.system.entries).eval()) == 0.0);
    CHECK((s.initial_state - s2.initial_state).norm() == 0.0);
    CHECK(s.grid.dt == s2.grid.dt);

    // infinite temperature survives the round trip as a tag
    BathSpec inf_bath;
    inf_bath.temperature = Temperature::infinity();
    inf_bath.spectral = SpectralModel::ohmic(0.5, 2.0, 10.0, 11);
    const Scenario si = build_two_level_scenario(1.0, CouplingAxis::Z, 0.1, inf_bath,
                                                 Grid{0.0, 0.1, 5});
    const Scenario si2 = scenario_from_json(scenario_to_json(si));
    CHECK(si2.bath.temperature.infinite);
    CHECK(si2.bath.spectral.kind == SpectralModel::Kind::Continuous);
    CHECK(scenario_to_json(si).dump() == scenario_to_json(si2).dump());
}

TEST_CASE("config parsing reports the offending field") {
    nlohmann::json j;
    j["system"] = {{{1.0, 0.0}, {0.0, 0.0}}, {{0.0, 0.0}, {-1.0, 0.0}}};
    CHECK_THROWS_WITH_AS(scenario_from_json(j), doctest::Contains("couplings"), Error);
}
