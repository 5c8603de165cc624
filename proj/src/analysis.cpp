// analysis.cpp — statistical identity checks and the mean-field closure

#include "stoq/analysis.hpp"

#include "stoq/dynamics.hpp"
#include "stoq/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace stoq {

namespace {

struct BranchBatchMeans {
    std::vector<std::vector<Vector>> psi;    // [batch][time]
    std::vector<std::vector<Vector>> phi;    // [batch][time]
    std::vector<std::vector<Complex>> trace; // [batch][time]
    std::vector<std::size_t> n_valid;
};

BranchBatchMeans batch_means(const EnsembleResult& e, std::size_t branch) {
    const auto& batches = e.batches[branch];
    const auto n_times = static_cast<std::size_t>(e.n_times());
    BranchBatchMeans out;
    for (const auto& bb : batches) {
        if (bb.n_valid == 0) continue;
        const double inv = 1.0 / static_cast<double>(bb.n_valid);
        std::vector<Vector> mp(n_times), mf(n_times);
        std::vector<Complex> mt(n_times);
        for (std::size_t t = 0; t < n_times; ++t) {
            mp[t] = bb.sum_psi[t] * inv;
            mf[t] = bb.sum_phi[t] * inv;
            mt[t] = bb.sum_trace[t] * inv;
        }
        out.psi.push_back(std::move(mp));
        out.phi.push_back(std::move(mf));
        out.trace.push_back(std::move(mt));
        out.n_valid.push_back(bb.n_valid);
    }
    if (out.psi.empty()) throw Error("analysis", "ensemble has no valid batches");
    return out;
}

double scatter_se(const std::vector<double>& values) {
    const double n = static_cast<double>(values.size());
    double avg = 0.0;
    for (double v : values) avg += v;
    avg /= n;
    double var = 0.0;
    for (double v : values) var += (v - avg) * (v - avg);
    return std::sqrt(var / (n * std::max(1.0, n - 1.0)));
}

} // namespace

ScatteringDecomposition scattering_decomposition(const EnsembleResult& e, const Scenario& s) {
    if (e.branches() != 1) {
        throw Error("analysis", "scattering decomposition needs a pure initial state");
    }
    const auto n_times = static_cast<std::size_t>(e.n_times());
    const Eigen::Index d = e.eigenvalues.size();

    ScatteringDecomposition out;
    out.psi0 = free_propagation(e.branch_states[0], s);

    const BranchBatchMeans bm = batch_means(e, 0);
    const std::size_t n_b = bm.psi.size();
    const double psi0_sq = e.branch_states[0].squaredNorm();

    out.batch_mean_s.assign(n_b, std::vector<Vector>(n_times));
    out.batch_fluct.assign(n_b, std::vector<Complex>(n_times));
    for (std::size_t b = 0; b < n_b; ++b) {
        for (std::size_t t = 0; t < n_times; ++t) {
            const Vector& p0 = out.psi0[t];
            out.batch_mean_s[b][t] = bm.psi[b][t] - p0;
            out.batch_fluct[b][t] =
                bm.trace[b][t] - bm.phi[b][t].dot(p0) - p0.dot(bm.psi[b][t]) + psi0_sq;
        }
    }

    out.mean_s.resize(n_times);
    out.mean_s_se.resize(n_times);
    out.fluct_norm.resize(n_times);
    out.fluct_norm_se.resize(n_times);
    for (std::size_t t = 0; t < n_times; ++t) {
        // pooled over trajectories, not over batch means
        Vector sum_psi = Vector::Zero(d), sum_phi = Vector::Zero(d);
        Complex sum_trace = 0.0;
        std::size_t n_total = 0;
        for (std::size_t b = 0; b < n_b; ++b) {
            const double w = static_cast<double>(bm.n_valid[b]);
            sum_psi += w * bm.psi[b][t];
            sum_phi += w * bm.phi[b][t];
            sum_trace += w * bm.trace[b][t];
            n_total += bm.n_valid[b];
        }
        const double inv = 1.0 / static_cast<double>(n_total);
        const Vector mp = sum_psi * inv;
        const Vector mf = sum_phi * inv;
        const Complex mt = sum_trace * inv;
        const Vector& p0 = out.psi0[t];
        out.mean_s[t] = mp - p0;
        out.fluct_norm[t] = std::real(mt - mf.dot(p0) - p0.dot(mp) + psi0_sq);

        Vector avg = Vector::Zero(d);
        for (std::size_t b = 0; b < n_b; ++b) avg += out.batch_mean_s[b][t];
        avg /= static_cast<double>(n_b);
        RealVector var = RealVector::Zero(d);
        std::vector<double> fl;
        fl.reserve(n_b);
        for (std::size_t b = 0; b < n_b; ++b) {
            var += (out.batch_mean_s[b][t] - avg).cwiseAbs2();
            fl.push_back(std::real(out.batch_fluct[b][t]));
        }
        const double denom =
            static_cast<double>(n_b) * std::max<double>(1.0, static_cast<double>(n_b) - 1.0);
        out.mean_s_se[t] = (var / denom).cwiseSqrt();
        out.fluct_norm_se[t] = scatter_se(fl);
    }

    // incident band: 99% quantile window in the energy basis, edges pushed
    // outward past any level carrying > 1e-9 of the peak population; the
    // residual tail left outside must stay below the inelastic bound, which
    // starts around 1e-8 for a weakly coupled packet
    const Vector amp0 = e.eigenbasis.adjoint() * e.branch_states[0];
    const RealVector pops = amp0.cwiseAbs2();
    const double total = pops.sum();
    const double peak = pops.maxCoeff();
    Eigen::Index lo = 0, hi = d - 1;
    double tail = 0.0;
    while (lo < hi && tail + pops[lo] <= 0.005 * total) tail += pops[lo++];
    tail = 0.0;
    while (hi > lo && tail + pops[hi] <= 0.005 * total) tail += pops[hi--];
    while (lo > 0 && pops[lo - 1] >= 1e-9 * peak) --lo;
    while (hi < d - 1 && pops[hi + 1] >= 1e-9 * peak) ++hi;
    out.in_band.assign(static_cast<std::size_t>(d), false);
    for (Eigen::Index k = lo; k <= hi; ++k) out.in_band[static_cast<std::size_t>(k)] = true;
    out.n_band = static_cast<int>(hi - lo + 1);
    return out;
}

UnitarityReport unitarity_residual(const EnsembleResult& e) {
    const OverlapSeries o = overlap_matrix(e);
    const auto n_times = o.value.size();
    const Eigen::Index n = o.value.front().rows();

    UnitarityReport report;
    report.profile.resize(n_times, 0.0);
    for (std::size_t t = 0; t < n_times; ++t) {
        for (Eigen::Index a = 0; a < n; ++a) {
            for (Eigen::Index b = 0; b < n; ++b) {
                const double dev = std::abs(o.value[t](a, b) - (a == b ? Complex(1.0) : Complex(0.0)));
                const double se = o.se[t](a, b);
                // zero SE means the estimate is exact (e.g. t0); any deviation
                // beyond rounding then fails outright
                const double units = se > 0.0 ? dev / se : (dev > 1e-10 ? 1e9 : 0.0);
                report.profile[t] = std::max(report.profile[t], units);
                if (units > report.max_se_units) {
                    report.max_se_units = units;
                    std::ostringstream os;
                    os << "overlap[" << a << "," << b << "] at time index " << t << " deviates "
                       << dev << " (" << units << " SE)";
                    report.worst_entry = os.str();
                }
            }
        }
    }
    return report;
}

OpticalReport optical_residual(const ScatteringDecomposition& d) {
    const std::size_t n_times = d.psi0.size();
    const std::size_t n_b = d.batch_mean_s.size();

    OpticalReport report;
    report.r.resize(n_times);
    report.se.resize(n_times);
    std::vector<double> rb(n_b);
    for (std::size_t t = 0; t < n_times; ++t) {
        report.r[t] = 2.0 * std::real(d.psi0[t].dot(d.mean_s[t])) + d.fluct_norm[t];
        for (std::size_t b = 0; b < n_b; ++b) {
            rb[b] = 2.0 * std::real(d.psi0[t].dot(d.batch_mean_s[b][t])) +
                    std::real(d.batch_fluct[b][t]);
        }
        report.se[t] = scatter_se(rb);
        // below 1e-10 the residual is rounding noise; the batch scatter can be
        // orders of magnitude smaller still (e.g. at t0), so SE units would be
        // meaningless there
        const double units = std::abs(report.r[t]) <= 1e-10
                                 ? 0.0
                                 : (report.se[t] > 0.0 ? std::abs(report.r[t]) / report.se[t]
                                                       : 1e9);
        report.max_se_units = std::max(report.max_se_units, units);
    }
    return report;
}

InelasticReport inelastic_probability(const EnsembleResult& e, const ScatteringDecomposition& d,
                                      int window_begin) {
    const Eigen::Index dim = e.eigenvalues.size();
    if (d.n_band > 0.9 * static_cast<double>(dim)) {
        throw Error("analysis", "incident band covers more than 90% of the spectrum; "
                                "the spectral definition of inelasticity is unusable");
    }
    if (e.branches() != 1) {
        throw Error("analysis", "inelastic probability needs a pure initial state");
    }
    const auto n_times = static_cast<std::size_t>(e.n_times());
    if (window_begin < 0 || static_cast<std::size_t>(window_begin) >= n_times) {
        throw Error("analysis", "window start outside the grid");
    }

    const auto& batches = e.batches[0];
    InelasticReport report;
    report.window_begin = window_begin;
    report.p_inel.resize(n_times);
    report.p_inel_se.resize(n_times);
    report.paper_bound.resize(n_times);
    report.paper_bound_se.resize(n_times);

    std::vector<double> pb, marginb;
    for (std::size_t t = 0; t < n_times; ++t) {
        pb.clear();
        marginb.clear();
        double sum_p = 0.0;
        Vector sum_psi = Vector::Zero(dim);
        std::size_t n_total = 0;
        for (const auto& bb : batches) {
            if (bb.n_valid == 0) continue;
            const double inv = 1.0 / static_cast<double>(bb.n_valid);
            double p = 0.0;
            for (Eigen::Index k = 0; k < dim; ++k) {
                if (!d.in_band[static_cast<std::size_t>(k)]) {
                    p += std::real(bb.sum_eigenpop[t][k]) * inv;
                }
            }
            const double bound = 1.0 - (bb.sum_psi[t] * inv).squaredNorm();
            pb.push_back(p);
            marginb.push_back(p - bound);
            sum_p += p * static_cast<double>(bb.n_valid);
            sum_psi += bb.sum_psi[t];
            n_total += bb.n_valid;
        }
        const double inv = 1.0 / static_cast<double>(n_total);
        report.p_inel[t] = sum_p * inv;
        report.paper_bound[t] = 1.0 - (sum_psi * inv).squaredNorm();
        report.p_inel_se[t] = scatter_se(pb);
        report.paper_bound_se[t] = scatter_se(marginb);  // SE of the margin p - bound

        if (t >= static_cast<std::size_t>(window_begin)) {
            if (report.p_inel[t] >
                report.paper_bound[t] + 3.0 * report.paper_bound_se[t] + 1e-10) {
                report.mean_bound_pass = false;
            }
            if (report.p_inel[t] > 0.5 + 3.0 * report.p_inel_se[t] + 1e-10) {
                report.channel_bound_pass = false;
            }
        }
    }
    return report;
}

GibbsReport gibbs_distance(const EnsembleResult& e, const Scenario& s, int window_begin) {
    if (!e.rho_stored) throw Error("analysis", "density estimate not stored");
    const auto n_times = static_cast<std::size_t>(e.n_times());
    if (window_begin < 0 || static_cast<std::size_t>(window_begin) + 1 >= n_times) {
        throw Error("analysis", "window start outside the grid");
    }
    const Eigen::Index d = s.dim();
    const Matrix gibbs = thermal_state(s.system.entries, s.bath.temperature);

    // window averages per batch (branch-weighted) and pooled
    auto window_average = [&](std::size_t from, std::size_t to, int batch) {
        Matrix acc = Matrix::Zero(d, d);
        for (std::size_t t = from; t < to; ++t) {
            Matrix rho = Matrix::Zero(d, d);
            for (std::size_t alpha = 0; alpha < e.branches(); ++alpha) {
                if (batch < 0) {
                    Matrix total = Matrix::Zero(d, d);
                    std::size_t n = 0;
                    for (const auto& bb : e.batches[alpha]) {
                        total += bb.sum_rho[t];
                        n += bb.n_valid;
                    }
                    rho += e.weights[alpha] * total / static_cast<double>(n);
                } else {
                    const auto& bb = e.batches[alpha][static_cast<std::size_t>(batch)];
                    if (bb.n_valid == 0) continue;
                    rho += e.weights[alpha] * bb.sum_rho[t] / static_cast<double>(bb.n_valid);
                }
            }
            acc += (rho + rho.adjoint()) / 2.0;
        }
        return (acc / static_cast<double>(to - from)).eval();
    };

    GibbsReport report;
    const auto w0 = static_cast<std::size_t>(window_begin);
    report.distance = trace_distance(window_average(w0, n_times, -1), gibbs);
    report.initial_distance = trace_distance(s.initial_rho(), gibbs);

    std::vector<double> db;
    for (int b = 0; b < kEnsembleBatches; ++b) {
        bool any = false;
        for (std::size_t alpha = 0; alpha < e.branches(); ++alpha) {
            any = any || e.batches[alpha][static_cast<std::size_t>(b)].n_valid > 0;
        }
        if (any) db.push_back(trace_distance(window_average(w0, n_times, b), gibbs));
    }
    report.se = scatter_se(db);

    // convergence: the two window halves must agree, and the state must have
    // actually moved toward the target since t0
    const std::size_t mid = w0 + (n_times - w0) / 2;
    const double d1 = trace_distance(window_average(w0, mid, -1), gibbs);
    const double d2 = trace_distance(window_average(mid, n_times, -1), gibbs);
    const bool still_relaxing = (d1 - d2) > std::max(3.0 * report.se, 0.02);
    const bool never_relaxed =
        report.initial_distance > 0.1 && report.distance > 0.5 * report.initial_distance;
    if (still_relaxing || never_relaxed) {
        report.converged = false;
        report.warning = still_relaxing
                             ? "window distance still decreasing; extend the horizon"
                             : "no relaxation toward the target detected in the window";
    }
    return report;
}

BourretResult bourret_mean(const CorrelationSet& c, const Scenario& s) {
    if (!s.pure_initial()) throw Error("analysis", "closure needs a pure initial state");
    const std::size_t j_ch = s.couplings.size();
    if (j_ch > 1) {
        double scale = 0.0;
        for (const auto& op : s.couplings) scale = std::max(scale, max_abs(op.entries));
        for (std::size_t j = 0; j < j_ch; ++j) {
            for (std::size_t m = j + 1; m < j_ch; ++m) {
                const Matrix comm = s.couplings[j].entries * s.couplings[m].entries -
                                    s.couplings[m].entries * s.couplings[j].entries;
                if (max_abs(comm) > 1e-10 * scale * scale) {
                    throw Error("analysis", "closure requires commuting coupling channels");
                }
            }
        }
    }
    const int n_steps = s.grid.n_steps;
    const double dt = s.grid.dt;
    if (c.n_lags() < n_steps + 1) {
        throw Error("analysis", "correlation set has fewer lags than grid times");
    }
    for (int l = 0; l <= n_steps; ++l) {
        if (std::abs(c.tau_grid[l] - l * dt) > 1e-12 * std::max(1.0, std::abs(l * dt))) {
            throw Error("analysis", "correlation lag grid does not match the step grid");
        }
    }

    BourretResult out;
    const ValidationReport v = validate_model(s);
    if (v.step_parameter > 0.3) {
        out.warnings.push_back("coupling too strong for the second-order closure");
    }

    const Eigen::Index d = s.dim();
    const double hbar = s.bath.hbar;
    const Matrix u0_step =
        matrix_exponential((Complex(0.0, -dt / hbar) * s.system.entries).eval());

    // Q_k = sum_jm K_jm(k dt) S_j U0^k S_m
    std::vector<Matrix> q(static_cast<std::size_t>(n_steps) + 1);
    Matrix u0_pow = Matrix::Identity(d, d);
    for (int k = 0; k <= n_steps; ++k) {
        Matrix qk = Matrix::Zero(d, d);
        const Matrix& kk = c.k[static_cast<std::size_t>(k)];
        for (std::size_t j = 0; j < j_ch; ++j) {
            const Matrix su = s.couplings[j].entries * u0_pow;
            for (std::size_t m = 0; m < j_ch; ++m) {
                qk += kk(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(m)) * su *
                      s.couplings[m].entries;
            }
        }
        q[static_cast<std::size_t>(k)] = qk;
        u0_pow = (u0_step * u0_pow).eval();
    }

    std::vector<Vector> psi;
    psi.reserve(static_cast<std::size_t>(n_steps) + 1);
    psi.push_back(s.initial_state);

    const Complex minus_i_over_hbar(0.0, -1.0 / hbar);
    const double inv_hbar_sq = 1.0 / (hbar * hbar);

    // trapezoid memory integral up to step n; `last` overrides psi[n]
    auto derivative = [&](int n, const Vector& last) {
        Vector mem = Vector::Zero(d);
        if (n > 0) {
            mem = 0.5 * (q[static_cast<std::size_t>(n)] * psi[0]);
            for (int m = 1; m < n; ++m) {
                mem += q[static_cast<std::size_t>(n - m)] * psi[static_cast<std::size_t>(m)];
            }
            mem += 0.5 * (q[0] * last);
            mem *= dt;
        }
        return (minus_i_over_hbar * (s.system.entries * last) - inv_hbar_sq * mem).eval();
    };

    for (int n = 0; n < n_steps; ++n) {
        const Vector f0 = derivative(n, psi[static_cast<std::size_t>(n)]);
        const Vector pred = psi[static_cast<std::size_t>(n)] + dt * f0;
        const Vector f1 = derivative(n + 1, pred);
        psi.push_back(psi[static_cast<std::size_t>(n)] + 0.5 * dt * (f0 + f1));
    }
    out.mean = std::move(psi);
    return out;
}

} // namespace stoq
