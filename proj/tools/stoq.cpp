// stoq.cpp — command-line front end: run / validate / compare / analyze

#include "stoq/analysis.hpp"
#include "stoq/bathcorr.hpp"
#include "stoq/dynamics.hpp"
#include "stoq/ensemble.hpp"
#include "stoq/model.hpp"
#include "stoq/noisegen.hpp"
#include "stoq/oracle.hpp"
#include "stoq/output.hpp"
#include "stoq/scenario_json.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

constexpr const char* kVersion = "stoq 1.0.0";

using nlohmann::json;
namespace fs = std::filesystem;

// exit codes: 0 ok, 2 config error, 3 numerical-regime error, 4 verification failure
int exit_code_for(const stoq::Error& e) {
    return (e.module() == "cli" || e.module() == "model") ? 2 : 3;
}

struct CommonFlags {
    std::string config_path;
    std::string out_dir = "out";
    std::uint64_t seed = 0;
    std::uint64_t trajectories = 0;
    int workers = 0;
    bool deterministic_reduce = false;
    bool dump_noise = false;
    bool dump_trajectories = false;
};

void add_common_flags(CLI::App* cmd, CommonFlags& f, bool needs_config = true) {
    auto* opt = cmd->add_option("--config", f.config_path, "scenario/config JSON path");
    if (needs_config) opt->required();
    cmd->add_option("--seed", f.seed, "master seed (overrides config)");
    cmd->add_option("--trajectories", f.trajectories, "trajectory count (overrides config)");
    cmd->add_option("--workers", f.workers, "worker threads (fallback: STOQ_WORKERS, then 1)");
    cmd->add_flag("--deterministic-reduce", f.deterministic_reduce,
                  "bit-identical reduction order for any worker count");
    cmd->add_option("--out", f.out_dir, "output directory");
    cmd->add_flag("--dump-noise", f.dump_noise, "dump raw noise samples (binary)");
    cmd->add_flag("--dump-trajectories", f.dump_trajectories, "dump ket trajectories (binary)");
}

int resolve_workers(int flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("STOQ_WORKERS")) {
        const int w = std::atoi(env);
        if (w > 0) return w;
    }
    return 1;
}

stoq::RunConfig load_and_override(const CommonFlags& f) {
    stoq::RunConfig cfg = stoq::load_config(f.config_path);
    if (f.seed != 0) cfg.master_seed = f.seed;
    if (f.trajectories != 0) cfg.n_traj = f.trajectories;
    return cfg;
}

stoq::RealVector lag_grid(const stoq::Grid& grid) {
    stoq::RealVector tau(grid.n_steps + 1);
    for (int l = 0; l <= grid.n_steps; ++l) tau[l] = l * grid.dt;
    return tau;
}

struct Prepared {
    stoq::CorrelationSet correlations;
    stoq::NoiseFactor factor;
};

Prepared prepare_noise(const stoq::Scenario& s) {
    Prepared p{stoq::correlation_matrix(s.bath.spectral, s.bath.temperature, s.bath.hbar,
                                        lag_grid(s.grid)),
               {}};
    p.factor = stoq::complex_symmetric_factor(
        stoq::assemble_pseudo_covariance(p.correlations, s.grid));
    return p;
}

void check_model(const stoq::Scenario& s) {
    const stoq::ValidationReport report = stoq::validate_model(s);
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
    if (!report.ok()) {
        std::string msg;
        for (const auto& e : report.errors) msg += (msg.empty() ? "" : "; ") + e;
        throw stoq::Error("model", msg);
    }
}

void write_f64(std::ofstream& out, double v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void dump_noise_samples(const std::string& path, const stoq::NoiseFactor& factor,
                        std::uint64_t seed, std::size_t n) {
    std::ofstream out(path, std::ios::binary);
    for (std::size_t i = 0; i < n; ++i) {
        const stoq::NoiseSample s = stoq::sample_noise(factor, {seed, 0, i});
        for (int j = 0; j < s.channels(); ++j) {
            for (int t = 0; t < s.n_times(); ++t) {
                write_f64(out, s.w(j, t).real());
                write_f64(out, s.w(j, t).imag());
            }
        }
    }
}

void dump_trajectories(const std::string& path, const stoq::Scenario& s,
                       const stoq::NoiseFactor& factor, std::uint64_t seed, std::size_t n) {
    std::ofstream out(path, std::ios::binary);
    const stoq::InitialDecomposition dec = stoq::initial_decomposition(s);
    for (std::size_t i = 0; i < n; ++i) {
        const stoq::NoiseSample noise = stoq::sample_noise(factor, {seed, 0, i});
        const stoq::TrajectoryPair traj = stoq::propagate_pair(dec.states[0], noise, s);
        for (const auto& psi : traj.psi) {
            for (Eigen::Index k = 0; k < psi.size(); ++k) {
                write_f64(out, psi[k].real());
                write_f64(out, psi[k].imag());
            }
        }
    }
}

int cmd_run(const CommonFlags& flags) {
    const auto t_start = std::chrono::steady_clock::now();
    const stoq::RunConfig cfg = load_and_override(flags);
    const stoq::Scenario& s = cfg.scenario;
    check_model(s);
    const Prepared prep = prepare_noise(s);

    stoq::EnsembleOptions opt;
    opt.n_traj = cfg.n_traj;
    opt.master_seed = cfg.master_seed;
    opt.workers = resolve_workers(flags.workers);
    opt.deterministic_reduce = flags.deterministic_reduce;
    opt.store_rho = s.dim() <= 16;
    const stoq::EnsembleResult e = stoq::run_ensemble(s, prep.factor, opt);

    fs::create_directories(flags.out_dir);
    stoq::Manifest manifest;
    manifest.scenario_path = flags.config_path;
    manifest.master_seed = cfg.master_seed;
    manifest.n_traj = cfg.n_traj;
    manifest.workers = opt.workers;
    manifest.deterministic_reduce = flags.deterministic_reduce;
    manifest.out_dir = flags.out_dir;
    manifest.version = kVersion;

    auto add_file = [&](const std::string& name) {
        manifest.files.emplace_back(name, stoq::file_checksum(flags.out_dir + "/" + name));
    };

    json summary;
    summary["version"] = kVersion;
    summary["seed"] = cfg.master_seed;
    summary["trajectories"] = cfg.n_traj;
    summary["divergent"] = e.divergent_count;
    summary["valid"] = e.valid;
    summary["factor_residual"] = prep.factor.residual;

    const Eigen::Index d = s.dim();
    // mean wavefunction (branch 0)
    {
        const stoq::MeanSeries m = stoq::mean_wavefunction(e, 0);
        stoq::CsvTable t;
        t.columns.push_back("t");
        for (Eigen::Index k = 0; k < d; ++k) {
            t.columns.push_back("re_" + std::to_string(k));
            t.columns.push_back("im_" + std::to_string(k));
            t.columns.push_back("se_" + std::to_string(k));
        }
        for (int n = 0; n < e.n_times(); ++n) {
            std::vector<double> row{e.grid.time_at(n)};
            for (Eigen::Index k = 0; k < d; ++k) {
                row.push_back(m.value[n][k].real());
                row.push_back(m.value[n][k].imag());
                row.push_back(m.se[n][k]);
            }
            t.rows.push_back(std::move(row));
        }
        stoq::write_csv(flags.out_dir + "/mean_psi.csv", t);
        add_file("mean_psi.csv");
    }
    // overlap matrix
    if (!e.overlap_batches.empty()) {
        const stoq::OverlapSeries o = stoq::overlap_matrix(e);
        const Eigen::Index nb = o.value.front().rows();
        stoq::CsvTable t;
        t.columns.push_back("t");
        for (Eigen::Index a = 0; a < nb; ++a) {
            for (Eigen::Index b = 0; b < nb; ++b) {
                const std::string tag = std::to_string(a) + std::to_string(b);
                t.columns.push_back("re_" + tag);
                t.columns.push_back("im_" + tag);
                t.columns.push_back("se_" + tag);
            }
        }
        for (int n = 0; n < e.n_times(); ++n) {
            std::vector<double> row{e.grid.time_at(n)};
            for (Eigen::Index a = 0; a < nb; ++a) {
                for (Eigen::Index b = 0; b < nb; ++b) {
                    row.push_back(o.value[n](a, b).real());
                    row.push_back(o.value[n](a, b).imag());
                    row.push_back(o.se[n](a, b));
                }
            }
            t.rows.push_back(std::move(row));
        }
        stoq::write_csv(flags.out_dir + "/overlap.csv", t);
        add_file("overlap.csv");
    }
    // density estimate
    if (e.rho_stored) {
        const stoq::DensityEstimate de = stoq::estimate_density(e);
        stoq::CsvTable t;
        t.columns.push_back("t");
        for (Eigen::Index i = 0; i < d; ++i) {
            for (Eigen::Index j = 0; j < d; ++j) {
                const std::string tag = std::to_string(i) + std::to_string(j);
                t.columns.push_back("re_" + tag);
                t.columns.push_back("im_" + tag);
            }
        }
        t.columns.push_back("se");
        for (int n = 0; n < e.n_times(); ++n) {
            std::vector<double> row{e.grid.time_at(n)};
            for (Eigen::Index i = 0; i < d; ++i) {
                for (Eigen::Index j = 0; j < d; ++j) {
                    row.push_back(de.raw[n](i, j).real());
                    row.push_back(de.raw[n](i, j).imag());
                }
            }
            row.push_back(de.se[n]);
            t.rows.push_back(std::move(row));
        }
        stoq::write_csv(flags.out_dir + "/rho.csv", t);
        add_file("rho.csv");
        summary["max_trace_deviation"] = de.max_trace_deviation;
        summary["max_hermiticity_deviation"] = de.max_hermiticity_deviation;
        summary["min_eigenvalue"] = de.min_eigenvalue;
    }
    // scattering analysis
    if (cfg.scattering) {
        const stoq::ScatteringDecomposition dec = stoq::scattering_decomposition(e, s);
        const stoq::OpticalReport opt_report = stoq::optical_residual(dec);
        const stoq::InelasticReport inel =
            stoq::inelastic_probability(e, dec, cfg.window_begin);
        stoq::CsvTable t;
        t.columns = {"t",       "r",           "r_se",        "fluct_norm",
                     "p_inel",  "p_inel_se",   "paper_bound", "margin_se"};
        for (int n = 0; n < e.n_times(); ++n) {
            t.rows.push_back({e.grid.time_at(n), opt_report.r[n], opt_report.se[n],
                              dec.fluct_norm[n], inel.p_inel[n], inel.p_inel_se[n],
                              inel.paper_bound[n], inel.paper_bound_se[n]});
        }
        stoq::write_csv(flags.out_dir + "/scatter.csv", t);
        add_file("scatter.csv");
        summary["scattering"] = {{"window_begin", cfg.window_begin},
                                 {"band_levels", dec.n_band},
                                 {"optical_max_se_units", opt_report.max_se_units},
                                 {"mean_bound_pass", inel.mean_bound_pass},
                                 {"channel_bound_pass", inel.channel_bound_pass}};
    }
    if (cfg.gibbs) {
        const stoq::GibbsReport g = stoq::gibbs_distance(e, s, cfg.gibbs_window_begin);
        summary["gibbs"] = {{"distance", g.distance},
                            {"se", g.se},
                            {"initial_distance", g.initial_distance},
                            {"converged", g.converged},
                            {"warning", g.warning},
                            {"threshold", 0.05}};
        if (!g.converged) std::cerr << "warning: " << g.warning << "\n";
    }
    if (flags.dump_noise) {
        dump_noise_samples(flags.out_dir + "/noise.bin", prep.factor, cfg.master_seed,
                           std::min<std::size_t>(cfg.n_traj, 100));
        add_file("noise.bin");
    }
    if (flags.dump_trajectories) {
        dump_trajectories(flags.out_dir + "/trajectories.bin", s, prep.factor, cfg.master_seed,
                          std::min<std::size_t>(cfg.n_traj, 100));
        add_file("trajectories.bin");
    }

    stoq::write_json_file(flags.out_dir + "/summary.json", summary);
    add_file("summary.json");
    manifest.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    stoq::write_json_file(flags.out_dir + "/manifest.json", manifest.to_json());

    std::cout << "run complete: " << cfg.n_traj << " trajectories, " << e.divergent_count
              << " divergent, outputs in " << flags.out_dir << "\n";
    return 0;
}

int cmd_validate(const CommonFlags& flags) {
    const stoq::RunConfig cfg = load_and_override(flags);
    const stoq::Scenario& s = cfg.scenario;
    const stoq::ValidationReport model_report = stoq::validate_model(s);
    const Prepared prep = prepare_noise(s);
    const stoq::FdtReport fdt = stoq::fdt_diagnostics(prep.correlations, s.bath);

    const std::size_t n_samples = std::max<std::size_t>(1000, std::min<std::size_t>(cfg.n_traj, 5000));
    std::vector<stoq::NoiseSample> samples;
    samples.reserve(n_samples);
    for (std::size_t i = 0; i < n_samples; ++i) {
        samples.push_back(stoq::sample_noise(prep.factor, {cfg.master_seed, 0, i}));
    }
    const stoq::MomentReport moments = stoq::empirical_moment_check(samples, prep.correlations);

    json report;
    report["model_errors"] = model_report.errors;
    report["model_warnings"] = model_report.warnings;
    report["step_parameter"] = model_report.step_parameter;
    report["fdt_failures"] = fdt.failures;
    report["max_form_difference"] = fdt.max_form_difference;
    report["min_k0_eigenvalue"] = fdt.min_k0_eigenvalue;
    report["factor_residual"] = prep.factor.residual;
    report["moment_samples"] = moments.n_samples;
    report["moment_max_dev_se"] = moments.max_dev_se;
    report["moment_worst_entry"] = moments.worst_entry;
    const bool pass = model_report.ok() && fdt.pass() && moments.pass();
    report["pass"] = pass;
    std::cout << report.dump(2) << "\n";
    return pass ? 0 : 4;
}

int cmd_compare(const CommonFlags& flags) {
    const stoq::RunConfig cfg = load_and_override(flags);
    const stoq::Scenario& s = cfg.scenario;
    if (!cfg.oracle_modes) {
        throw stoq::Error("cli", "compare requires an \"oracle\" section with mode list");
    }
    check_model(s);
    const stoq::ValidationReport v = stoq::validate_model(s);
    if (v.step_parameter > 0.3) {
        std::cerr << "warning: step parameter " << v.step_parameter
                  << " is outside the trustworthy regime\n";
    }

    const std::vector<stoq::Matrix> exact = stoq::exact_reduced_dynamics(s, *cfg.oracle_modes);
    const Prepared prep = prepare_noise(s);
    stoq::EnsembleOptions opt;
    opt.n_traj = cfg.n_traj;
    opt.master_seed = cfg.master_seed;
    opt.workers = resolve_workers(flags.workers);
    opt.store_rho = true;
    opt.compute_overlap = false;
    const stoq::EnsembleResult e = stoq::run_ensemble(s, prep.factor, opt);
    const stoq::DensityEstimate de = stoq::estimate_density(e);

    fs::create_directories(flags.out_dir);
    stoq::CsvTable t;
    t.columns = {"t", "trace_distance", "se"};
    bool pass = true;
    double worst = 0.0;
    for (int n = 0; n < e.n_times(); ++n) {
        const double dist = stoq::trace_distance(de.hermitized[n], exact[n]);
        t.rows.push_back({e.grid.time_at(n), dist, de.se[n]});
        worst = std::max(worst, dist);
        if (dist > std::max(cfg.compare_threshold, 5.0 * de.se[n])) pass = false;
    }
    stoq::write_csv(flags.out_dir + "/compare.csv", t);
    json verdict = {{"pass", pass},
                    {"max_distance", worst},
                    {"threshold", cfg.compare_threshold},
                    {"divergent", e.divergent_count}};
    stoq::write_json_file(flags.out_dir + "/compare.json", verdict);
    std::cout << verdict.dump(2) << "\n";
    return pass ? 0 : 4;
}

int cmd_analyze(const std::string& dir) {
    const json mj = stoq::read_json_file(dir + "/manifest.json");
    const stoq::Manifest manifest = stoq::Manifest::from_json(mj);
    const std::vector<std::string> bad = stoq::verify_manifest(manifest, dir);
    json verdict;
    verdict["checksums_pass"] = bad.empty();
    if (!bad.empty()) {
        verdict["checksum_failures"] = bad;
        stoq::write_json_file(dir + "/verdict.json", verdict);
        std::cout << verdict.dump(2) << "\n";
        return 4;
    }
    const json summary = stoq::read_json_file(dir + "/summary.json");
    bool all_pass = true;

    // average unitarity from the overlap series
    if (fs::exists(dir + "/overlap.csv")) {
        const stoq::CsvTable t = stoq::read_csv(dir + "/overlap.csv");
        const int nb = static_cast<int>(std::round(
            std::sqrt(static_cast<double>(t.columns.size() - 1) / 3.0)));
        double max_units = 0.0;
        for (const auto& row : t.rows) {
            for (int a = 0; a < nb; ++a) {
                for (int b = 0; b < nb; ++b) {
                    const std::size_t base = 1 + 3 * static_cast<std::size_t>(a * nb + b);
                    const double re = row[base] - (a == b ? 1.0 : 0.0);
                    const double im = row[base + 1];
                    const double se = row[base + 2];
                    const double dev = std::hypot(re, im);
                    max_units = std::max(
                        max_units, se > 0.0 ? dev / se : (dev > 1e-10 ? 1e9 : 0.0));
                }
            }
        }
        verdict["unitarity"] = {{"max_se_units", max_units}, {"pass", max_units <= 5.0}};
        all_pass = all_pass && max_units <= 5.0;
    }
    // optical theorem and inelastic bounds from the scattering series
    if (fs::exists(dir + "/scatter.csv")) {
        const stoq::CsvTable t = stoq::read_csv(dir + "/scatter.csv");
        const int window =
            summary.contains("scattering") ? summary["scattering"].value("window_begin", 0) : 0;
        double max_units = 0.0;
        bool mean_bound = true, channel_bound = true;
        for (std::size_t n = 0; n < t.rows.size(); ++n) {
            const auto& row = t.rows[n];
            const double r = row[1], se = row[2];
            max_units =
                std::max(max_units, se > 0.0 ? std::abs(r) / se : (std::abs(r) > 1e-10 ? 1e9 : 0.0));
            if (n >= static_cast<std::size_t>(window)) {
                const double p = row[4], p_se = row[5], bound = row[6], m_se = row[7];
                if (p > bound + 3.0 * m_se + 1e-10) mean_bound = false;
                if (p > 0.5 + 3.0 * p_se + 1e-10) channel_bound = false;
            }
        }
        verdict["optical"] = {{"max_se_units", max_units}, {"pass", max_units <= 5.0}};
        verdict["inelastic"] = {{"mean_bound_pass", mean_bound},
                                {"channel_bound_pass", channel_bound}};
        all_pass = all_pass && max_units <= 5.0 && mean_bound && channel_bound;
    }
    if (summary.contains("gibbs")) {
        const double distance = summary["gibbs"].value("distance", 1.0);
        const double threshold = summary["gibbs"].value("threshold", 0.05);
        const bool converged = summary["gibbs"].value("converged", false);
        const bool pass = converged && distance <= threshold;
        verdict["gibbs"] = {{"distance", distance}, {"pass", pass}};
        all_pass = all_pass && pass;
    }
    verdict["pass"] = all_pass;
    stoq::write_json_file(dir + "/verdict.json", verdict);
    std::cout << verdict.dump(2) << "\n";
    return all_pass ? 0 : 4;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"stochastic open-system trajectory simulator"};
    app.require_subcommand(1);

    CommonFlags run_flags, validate_flags, compare_flags;
    std::string analyze_dir;

    auto* run = app.add_subcommand("run", "run an ensemble and write series + manifest");
    add_common_flags(run, run_flags);
    auto* validate =
        app.add_subcommand("validate", "correlation, FDT, and noise-moment diagnostics");
    add_common_flags(validate, validate_flags);
    auto* compare = app.add_subcommand("compare", "ensemble vs exact small-bath dynamics");
    add_common_flags(compare, compare_flags);
    auto* analyze = app.add_subcommand("analyze", "verdicts for a finished run directory");
    analyze->add_option("dir", analyze_dir, "run output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) return cmd_run(run_flags);
        if (validate->parsed()) return cmd_validate(validate_flags);
        if (compare->parsed()) return cmd_compare(compare_flags);
        if (analyze->parsed()) return cmd_analyze(analyze_dir);
    } catch (const stoq::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 2;
}
