// scenario_json.cpp — scenario and run-config parsing

#include "stoq/scenario_json.hpp"

#include <fstream>

namespace stoq {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& where, const std::string& what) {
    throw Error("model", "config field '" + where + "': " + what);
}

Complex complex_from_json(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        bad(where, "expected a [re, im] pair");
    }
    return {j[0].get<double>(), j[1].get<double>()};
}

RealMatrix real_matrix_from_json(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) bad(where, "expected a non-empty array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    RealMatrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (static_cast<Eigen::Index>(j[r].size()) != cols) bad(where, "ragged rows");
        for (Eigen::Index c = 0; c < cols; ++c) {
            if (!j[r][c].is_number()) bad(where, "expected a number");
            m(r, c) = j[r][c].get<double>();
        }
    }
    return m;
}

json real_matrix_to_json(const RealMatrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

const json& field(const json& j, const std::string& key, const std::string& where) {
    const auto it = j.find(key);
    if (it == j.end()) bad(where + "/" + key, "missing");
    return *it;
}

} // namespace

Matrix matrix_from_json(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) bad(where, "expected a non-empty array of rows");
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
        if (static_cast<Eigen::Index>(j[r].size()) != cols) bad(where, "ragged rows");
        for (Eigen::Index c = 0; c < cols; ++c) {
            m(r, c) = complex_from_json(j[r][c], where);
        }
    }
    return m;
}

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            row.push_back(json::array({m(r, c).real(), m(r, c).imag()}));
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

Vector vector_from_json(const json& j, const std::string& where) {
    if (!j.is_array() || j.empty()) bad(where, "expected a non-empty array");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        v[k] = complex_from_json(j[k], where);
    }
    return v;
}

json vector_to_json(const Vector& v) {
    json out = json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) {
        out.push_back(json::array({v[k].real(), v[k].imag()}));
    }
    return out;
}

Scenario scenario_from_json(const json& j) {
    Scenario s;
    s.system = HermitianOperator(matrix_from_json(field(j, "system", ""), "system"), "system");

    const json& jc = field(j, "couplings", "");
    if (!jc.is_array()) bad("couplings", "expected an array of matrices");
    for (std::size_t k = 0; k < jc.size(); ++k) {
        const std::string where = "couplings/" + std::to_string(k);
        s.couplings.emplace_back(matrix_from_json(jc[k], where), where);
    }

    const json& jb = field(j, "bath", "");
    const json& jt = field(jb, "T", "bath");
    if (jt.is_string() && jt.get<std::string>() == "infinite") {
        s.bath.temperature = Temperature::infinity();
    } else if (jt.is_number()) {
        s.bath.temperature = Temperature::finite(jt.get<double>());
    } else {
        bad("bath/T", "expected a positive number or \"infinite\"");
    }
    s.bath.hbar = jb.value("hbar", 1.0);

    const json& jsp = field(jb, "spectrum", "bath");
    const std::string kind = field(jsp, "kind", "bath/spectrum").get<std::string>();
    if (kind == "discrete") {
        std::vector<SpectralModel::Mode> modes;
        for (const auto& jm : field(jsp, "modes", "bath/spectrum")) {
            SpectralModel::Mode m;
            m.omega = field(jm, "omega", "bath/spectrum/modes").get<double>();
            m.weight = real_matrix_from_json(field(jm, "weight", "bath/spectrum/modes"),
                                             "bath/spectrum/modes/weight");
            modes.push_back(std::move(m));
        }
        s.bath.spectral = SpectralModel::discrete(std::move(modes));
    } else if (kind == "continuous") {
        s.bath.spectral.kind = SpectralModel::Kind::Continuous;
        const json& jo = field(jsp, "omega", "bath/spectrum");
        s.bath.spectral.omega_grid.resize(static_cast<Eigen::Index>(jo.size()));
        for (Eigen::Index k = 0; k < s.bath.spectral.omega_grid.size(); ++k) {
            s.bath.spectral.omega_grid[k] = jo[static_cast<std::size_t>(k)].get<double>();
        }
        for (const auto& node : field(jsp, "sigma", "bath/spectrum")) {
            s.bath.spectral.sigma.push_back(
                real_matrix_from_json(node, "bath/spectrum/sigma"));
        }
    } else {
        bad("bath/spectrum/kind", "expected \"discrete\" or \"continuous\"");
    }
    s.bath.validate();

    const json& ji = field(j, "initial", "");
    if (ji.contains("state")) {
        s.initial_state = vector_from_json(ji["state"], "initial/state");
    } else if (ji.contains("density")) {
        s.initial_density = matrix_from_json(ji["density"], "initial/density");
        // representative ket for plumbing that expects one; branches come from
        // the decomposition
        const InitialDecomposition dec = decompose_initial(*s.initial_density);
        s.initial_state = dec.states.front();
    } else {
        bad("initial", "expected \"state\" or \"density\"");
    }

    const json& jg = field(j, "grid", "");
    s.grid.t0 = field(jg, "t0", "grid").get<double>();
    s.grid.dt = field(jg, "dt", "grid").get<double>();
    s.grid.n_steps = field(jg, "n_steps", "grid").get<int>();
    if (!(s.grid.dt > 0.0) || s.grid.n_steps <= 0) bad("grid", "dt > 0 and n_steps > 0 required");
    return s;
}

json scenario_to_json(const Scenario& s) {
    json j;
    j["system"] = matrix_to_json(s.system.entries);
    j["couplings"] = json::array();
    for (const auto& c : s.couplings) j["couplings"].push_back(matrix_to_json(c.entries));

    json jb;
    if (s.bath.temperature.infinite) {
        jb["T"] = "infinite";
    } else {
        jb["T"] = s.bath.temperature.value;
    }
    jb["hbar"] = s.bath.hbar;
    json jsp;
    if (s.bath.spectral.kind == SpectralModel::Kind::Discrete) {
        jsp["kind"] = "discrete";
        jsp["modes"] = json::array();
        for (const auto& m : s.bath.spectral.modes) {
            jsp["modes"].push_back({{"omega", m.omega}, {"weight", real_matrix_to_json(m.weight)}});
        }
    } else {
        jsp["kind"] = "continuous";
        json jo = json::array();
        for (Eigen::Index k = 0; k < s.bath.spectral.omega_grid.size(); ++k) {
            jo.push_back(s.bath.spectral.omega_grid[k]);
        }
        jsp["omega"] = std::move(jo);
        jsp["sigma"] = json::array();
        for (const auto& node : s.bath.spectral.sigma) {
            jsp["sigma"].push_back(real_matrix_to_json(node));
        }
    }
    jb["spectrum"] = std::move(jsp);
    j["bath"] = std::move(jb);

    if (s.initial_density) {
        j["initial"] = {{"density", matrix_to_json(*s.initial_density)}};
    } else {
        j["initial"] = {{"state", vector_to_json(s.initial_state)}};
    }
    j["grid"] = {{"t0", s.grid.t0}, {"dt", s.grid.dt}, {"n_steps", s.grid.n_steps}};
    return j;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cli", "cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& ex) {
        throw Error("cli", std::string("JSON parse error in ") + path + ": " + ex.what());
    }
    return scenario_from_json(j);
}

RunConfig config_from_json(const json& j) {
    RunConfig c;
    c.scenario = scenario_from_json(j);
    if (j.contains("run")) {
        const json& jr = j["run"];
        c.n_traj = jr.value("trajectories", static_cast<std::uint64_t>(c.n_traj));
        c.master_seed = jr.value("seed", c.master_seed);
    }
    if (j.contains("oracle")) {
        BathModeSet set;
        for (const auto& jm : field(j["oracle"], "modes", "oracle")) {
            BathMode m;
            m.omega = field(jm, "omega", "oracle/modes").get<double>();
            m.coupling = field(jm, "coupling", "oracle/modes").get<double>();
            m.n_max = jm.value("n_max", 8);
            m.channel = jm.value("channel", 0);
            set.modes.push_back(m);
        }
        c.oracle_modes = std::move(set);
        c.compare_threshold = j["oracle"].value("threshold", 0.02);
    }
    if (j.contains("analysis")) {
        const json& ja = j["analysis"];
        c.scattering = ja.value("scattering", false);
        c.window_begin = ja.value("window_begin", 0);
        c.gibbs = ja.value("gibbs", false);
        c.gibbs_window_begin = ja.value("gibbs_window_begin", 0);
    }
    return c;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cli", "cannot open config file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::parse_error& ex) {
        throw Error("cli", std::string("JSON parse error in ") + path + ": " + ex.what());
    }
    return config_from_json(j);
}

} // namespace stoq
