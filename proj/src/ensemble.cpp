// ensemble.cpp — batched Monte Carlo over trajectory pairs

#include "stoq/ensemble.hpp"

#include <atomic>
#include <cmath>
#include <sstream>
#include <thread>

namespace stoq {

namespace {

struct BatchRange {
    std::size_t begin;
    std::size_t end;
};

BatchRange batch_range(std::size_t n_traj, int batch) {
    const auto b = static_cast<std::size_t>(batch);
    return {n_traj * b / kEnsembleBatches, n_traj * (b + 1) / kEnsembleBatches};
}

// scatter of batch means around their average, per component
template <typename Sum, typename GetCount>
void pooled_and_se(const std::vector<Sum>& sums, GetCount count, Sum& pooled,
                   std::vector<Sum>& means) {
    means.clear();
    Sum total = sums.front();
    total.setZero();
    std::size_t n_total = 0;
    for (std::size_t b = 0; b < sums.size(); ++b) {
        const std::size_t n = count(b);
        if (n == 0) continue;
        total += sums[b];
        n_total += n;
        means.push_back(sums[b] / static_cast<double>(n));
    }
    if (n_total == 0) throw Error("ensemble", "no valid trajectories in any batch");
    pooled = total / static_cast<double>(n_total);
}

} // namespace

EnsembleResult run_ensemble(const Scenario& s, const NoiseFactor& factor,
                            const EnsembleOptions& opt) {
    if (opt.n_traj < 100) throw Error("ensemble", "need at least 100 trajectories");
    if (factor.n_times != s.grid.n_steps) {
        throw Error("ensemble", "noise factor grid does not match scenario grid");
    }

    const InitialDecomposition decomp = initial_decomposition(s);
    const Eigen::Index d = s.dim();
    const int n_times = s.grid.n_times();

    EnsembleResult e;
    e.grid = s.grid;
    e.weights = decomp.weights;
    e.branch_states = decomp.states;
    e.options = opt;
    e.n_traj = opt.n_traj;
    e.rho_stored = opt.store_rho;

    Eigen::SelfAdjointEigenSolver<Matrix> es(s.system.entries);
    e.eigenbasis = es.eigenvectors();
    e.eigenvalues = es.eigenvalues();

    const std::size_t n_branches = decomp.size();
    e.batches.assign(n_branches, std::vector<BranchBatch>(kEnsembleBatches));
    for (auto& branch : e.batches) {
        for (auto& bb : branch) {
            bb.sum_psi.assign(static_cast<std::size_t>(n_times), Vector::Zero(d));
            bb.sum_phi.assign(static_cast<std::size_t>(n_times), Vector::Zero(d));
            bb.sum_eigenpop.assign(static_cast<std::size_t>(n_times), Vector::Zero(d));
            bb.sum_trace.assign(static_cast<std::size_t>(n_times), Complex(0.0));
            if (opt.store_rho) {
                bb.sum_rho.assign(static_cast<std::size_t>(n_times), Matrix::Zero(d, d));
            }
        }
    }
    if (opt.compute_overlap) {
        e.overlap_batches.assign(kEnsembleBatches, OverlapBatch{});
        for (auto& ob : e.overlap_batches) {
            ob.sum_overlap.assign(static_cast<std::size_t>(n_times),
                                  Matrix::Zero(static_cast<Eigen::Index>(n_branches),
                                               static_cast<Eigen::Index>(n_branches)));
        }
    }

    const Matrix basis_adj = e.eigenbasis.adjoint();

    auto run_main_batch = [&](std::size_t alpha, int batch) {
        BranchBatch& bb = e.batches[alpha][static_cast<std::size_t>(batch)];
        const BatchRange r = batch_range(opt.n_traj, batch);
        for (std::size_t i = r.begin; i < r.end; ++i) {
            const rng::StreamKey key{opt.master_seed, static_cast<std::uint32_t>(alpha), i};
            const NoiseSample noise = sample_noise(factor, key);
            const TrajectoryPair traj = propagate_pair(decomp.states[alpha], noise, s);
            if (traj.divergent) {
                ++bb.n_divergent;
                continue;
            }
            for (int t = 0; t < n_times; ++t) {
                const auto ts = static_cast<std::size_t>(t);
                const Vector& psi = traj.psi[ts];
                const Vector& phi = traj.phi[ts];
                bb.sum_psi[ts] += psi;
                bb.sum_phi[ts] += phi;
                bb.sum_trace[ts] += phi.dot(psi);
                const Vector a = basis_adj * psi;
                const Vector b = basis_adj * phi;
                bb.sum_eigenpop[ts] += a.cwiseProduct(b.conjugate());
                if (opt.store_rho) bb.sum_rho[ts] += psi * phi.adjoint();
            }
            ++bb.n_valid;
        }
    };

    auto run_overlap_batch = [&](int batch) {
        OverlapBatch& ob = e.overlap_batches[static_cast<std::size_t>(batch)];
        const BatchRange r = batch_range(opt.n_traj, batch);
        std::vector<TrajectoryPair> trajs(n_branches);
        for (std::size_t i = r.begin; i < r.end; ++i) {
            // noise shared across branches: keyed by trajectory index only
            const rng::StreamKey key{opt.master_seed, kPairedNoiseTag, i};
            const NoiseSample noise = sample_noise(factor, key);
            bool diverged = false;
            for (std::size_t alpha = 0; alpha < n_branches; ++alpha) {
                trajs[alpha] = propagate_pair(decomp.states[alpha], noise, s);
                diverged = diverged || trajs[alpha].divergent;
            }
            if (diverged) {
                ++ob.n_divergent;
                continue;
            }
            for (int t = 0; t < n_times; ++t) {
                const auto ts = static_cast<std::size_t>(t);
                Matrix& sum = ob.sum_overlap[ts];
                for (std::size_t alpha = 0; alpha < n_branches; ++alpha) {
                    const Vector& bra =
                        opt.unpaired_bra ? trajs[alpha].psi[ts] : trajs[alpha].phi[ts];
                    for (std::size_t beta = 0; beta < n_branches; ++beta) {
                        sum(static_cast<Eigen::Index>(alpha), static_cast<Eigen::Index>(beta)) +=
                            bra.dot(trajs[beta].psi[ts]);
                    }
                }
            }
            ++ob.n_valid;
        }
    };

    // task list: per-branch main batches, then overlap batches; each task owns
    // its accumulator slot, so workers never share writes
    struct Task {
        std::size_t alpha;
        int batch;
        bool overlap;
    };
    std::vector<Task> tasks;
    for (std::size_t alpha = 0; alpha < n_branches; ++alpha) {
        for (int b = 0; b < kEnsembleBatches; ++b) tasks.push_back({alpha, b, false});
    }
    if (opt.compute_overlap) {
        for (int b = 0; b < kEnsembleBatches; ++b) tasks.push_back({0, b, true});
    }

    const int workers = std::max(1, opt.workers);
    std::atomic<std::size_t> next_task{0};
    std::vector<std::string> worker_errors(static_cast<std::size_t>(workers));
    auto worker = [&](std::size_t w) {
        try {
            for (;;) {
                const std::size_t k = next_task.fetch_add(1);
                if (k >= tasks.size()) break;
                if (tasks[k].overlap) {
                    run_overlap_batch(tasks[k].batch);
                } else {
                    run_main_batch(tasks[k].alpha, tasks[k].batch);
                }
            }
        } catch (const std::exception& ex) {
            worker_errors[w] = ex.what();
        }
    };
    if (workers == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker, static_cast<std::size_t>(w));
        for (auto& th : pool) th.join();
    }
    for (const auto& err : worker_errors) {
        if (!err.empty()) throw Error("ensemble", err);
    }

    std::size_t attempted = n_branches * opt.n_traj;
    for (const auto& branch : e.batches) {
        for (const auto& bb : branch) e.divergent_count += bb.n_divergent;
    }
    if (opt.compute_overlap) {
        attempted += opt.n_traj;
        for (const auto& ob : e.overlap_batches) e.divergent_count += ob.n_divergent;
    }
    const double frac = static_cast<double>(e.divergent_count) / static_cast<double>(attempted);
    if (frac > 0.01) {
        std::ostringstream os;
        os << "divergent fraction " << frac
           << " exceeds 1%; parameters are outside the trustworthy regime "
              "(reduce dt or coupling)";
        throw Error("ensemble", os.str());
    }
    e.valid = frac < 0.001;
    return e;
}

MeanSeries mean_wavefunction(const EnsembleResult& e, std::size_t branch) {
    if (branch >= e.branches()) throw Error("ensemble", "branch index out of range");
    const auto& batches = e.batches[branch];
    const int n_times = e.n_times();

    MeanSeries out;
    out.value.reserve(static_cast<std::size_t>(n_times));
    out.se.reserve(static_cast<std::size_t>(n_times));
    std::vector<Vector> sums(batches.size());
    std::vector<Vector> means;
    for (int t = 0; t < n_times; ++t) {
        for (std::size_t b = 0; b < batches.size(); ++b) {
            sums[b] = batches[b].sum_psi[static_cast<std::size_t>(t)];
        }
        Vector pooled;
        pooled_and_se(sums, [&](std::size_t b) { return batches[b].n_valid; }, pooled, means);
        Vector avg = Vector::Zero(pooled.size());
        for (const auto& m : means) avg += m;
        avg /= static_cast<double>(means.size());
        RealVector var = RealVector::Zero(pooled.size());
        for (const auto& m : means) var += (m - avg).cwiseAbs2();
        const double denom =
            static_cast<double>(means.size()) * std::max<double>(1.0, means.size() - 1.0);
        out.value.push_back(std::move(pooled));
        out.se.push_back((var / denom).cwiseSqrt());
    }
    return out;
}

ScalarSeries trace_series(const EnsembleResult& e) {
    const int n_times = e.n_times();
    ScalarSeries out;
    out.value.resize(static_cast<std::size_t>(n_times));
    out.se.resize(static_cast<std::size_t>(n_times));
    for (int t = 0; t < n_times; ++t) {
        const auto ts = static_cast<std::size_t>(t);
        // weighted batch means across branches
        std::vector<Complex> batch_means;
        Complex pooled = 0.0;
        for (int b = 0; b < kEnsembleBatches; ++b) {
            Complex m = 0.0;
            bool any = false;
            for (std::size_t alpha = 0; alpha < e.branches(); ++alpha) {
                const auto& bb = e.batches[alpha][static_cast<std::size_t>(b)];
                if (bb.n_valid == 0) continue;
                m += e.weights[alpha] * bb.sum_trace[ts] / static_cast<double>(bb.n_valid);
                any = true;
            }
            if (any) batch_means.push_back(m);
        }
        for (std::size_t alpha = 0; alpha < e.branches(); ++alpha) {
            Complex total = 0.0;
            std::size_t n = 0;
            for (const auto& bb : e.batches[alpha]) {
                total += bb.sum_trace[ts];
                n += bb.n_valid;
            }
            pooled += e.weights[alpha] * total / static_cast<double>(n);
        }
        Complex avg = 0.0;
        for (const auto& m : batch_means) avg += m;
        avg /= static_cast<double>(batch_means.size());
        double var = 0.0;
        for (const auto& m : batch_means) var += std::norm(m - avg);
        const double denom = static_cast<double>(batch_means.size()) *
                             std::max<double>(1.0, batch_means.size() - 1.0);
        out.value[ts] = pooled;
        out.se[ts] = std::sqrt(var / denom);
    }
    return out;
}

PopulationSeries population_series(const EnsembleResult& e) {
    const int n_times = e.n_times();
    const Eigen::Index d = e.eigenvalues.size();
    PopulationSeries out;
    out.value.reserve(static_cast<std::size_t>(n_times));
    out.se.reserve(static_cast<std::size_t>(n_times));
    for (int t = 0; t < n_times; ++t) {
        const auto ts = static_cast<std::size_t>(t);
        std::vector<Vector> batch_means;
        Vector pooled = Vector::Zero(d);
        for (int b = 0; b < kEnsembleBatches; ++b) {
            Vector m = Vector::Zero(d);
            bool any = false;
            for (std::size_t alpha = 0; alpha < e.branches(); ++alpha) {
                const auto& bb = e.batches[alpha][static_cast<std::size_t>(b)];
                if (bb.n_valid == 0) continue;
                m += e.weights[alpha] * bb.sum_eigenpop[ts] / static_cast<double>(bb.n_valid);
                any = true;
            }
            if (any) batch_means.push_back(std::move(m));
        }
        for (std::size_t alpha = 0; alpha < e.branches(); ++alpha) {
            Vector total = Vector::Zero(d);
            std::size_t n = 0;
            for (const auto& bb : e.batches[alpha]) {
                total += bb.sum_eigenpop[ts];
                n += bb.n_valid;
            }
            pooled += e.weights[alpha] * total / static_cast<double>(n);
        }
        Vector avg = Vector::Zero(d);
        for (const auto& m : batch_means) avg += m;
        avg /= static_cast<double>(batch_means.size());
        RealVector var = RealVector::Zero(d);
        for (const auto& m : batch_means) var += (m - avg).cwiseAbs2();
        const double denom = static_cast<double>(batch_means.size()) *
                             std::max<double>(1.0, batch_means.size() - 1.0);
        out.value.push_back(std::move(pooled));
        out.se.push_back((var / denom).cwiseSqrt());
    }
    return out;
}

OverlapSeries overlap_matrix(const EnsembleResult& e) {
    if (e.overlap_batches.empty()) {
        throw Error("ensemble", "overlap pass was not computed for this ensemble");
    }
    const int n_times = e.n_times();
    OverlapSeries out;
    out.value.reserve(static_cast<std::size_t>(n_times));
    out.se.reserve(static_cast<std::size_t>(n_times));
    std::vector<Matrix> sums(e.overlap_batches.size());
    std::vector<Matrix> means;
    for (int t = 0; t < n_times; ++t) {
        for (std::size_t b = 0; b < e.overlap_batches.size(); ++b) {
            sums[b] = e.overlap_batches[b].sum_overlap[static_cast<std::size_t>(t)];
        }
        Matrix pooled;
        pooled_and_se(sums, [&](std::size_t b) { return e.overlap_batches[b].n_valid; }, pooled,
                      means);
        Matrix avg = Matrix::Zero(pooled.rows(), pooled.cols());
        for (const auto& m : means) avg += m;
        avg /= static_cast<double>(means.size());
        RealMatrix var = RealMatrix::Zero(pooled.rows(), pooled.cols());
        for (const auto& m : means) var += (m - avg).cwiseAbs2();
        const double denom =
            static_cast<double>(means.size()) * std::max<double>(1.0, means.size() - 1.0);
        out.value.push_back(std::move(pooled));
        out.se.push_back((var / denom).cwiseSqrt());
    }
    return out;
}

DensityEstimate estimate_density(const EnsembleResult& e) {
    if (!e.rho_stored) {
        throw Error("ensemble", "density matrices were not stored for this ensemble");
    }
    const int n_times = e.n_times();
    const Eigen::Index d = e.eigenvalues.size();

    DensityEstimate out;
    out.raw.reserve(static_cast<std::size_t>(n_times));
    out.hermitized.reserve(static_cast<std::size_t>(n_times));
    out.se.reserve(static_cast<std::size_t>(n_times));
    out.min_eigenvalue = 1.0;

    for (int t = 0; t < n_times; ++t) {
        const auto ts = static_cast<std::size_t>(t);
        std::vector<Matrix> batch_means;
        Matrix pooled = Matrix::Zero(d, d);
        for (int b = 0; b < kEnsembleBatches; ++b) {
            Matrix m = Matrix::Zero(d, d);
            bool any = false;
            for (std::size_t alpha = 0; alpha < e.branches(); ++alpha) {
                const auto& bb = e.batches[alpha][static_cast<std::size_t>(b)];
                if (bb.n_valid == 0) continue;
                m += e.weights[alpha] * bb.sum_rho[ts] / static_cast<double>(bb.n_valid);
                any = true;
            }
            if (any) batch_means.push_back(std::move(m));
        }
        for (std::size_t alpha = 0; alpha < e.branches(); ++alpha) {
            Matrix total = Matrix::Zero(d, d);
            std::size_t n = 0;
            for (const auto& bb : e.batches[alpha]) {
                total += bb.sum_rho[ts];
                n += bb.n_valid;
            }
            pooled += e.weights[alpha] * total / static_cast<double>(n);
        }
        Matrix avg = Matrix::Zero(d, d);
        for (const auto& m : batch_means) avg += m;
        avg /= static_cast<double>(batch_means.size());
        double var = 0.0;
        for (const auto& m : batch_means) var += (m - avg).cwiseAbs2().sum();
        const double denom = static_cast<double>(batch_means.size()) *
                             std::max<double>(1.0, batch_means.size() - 1.0);

        out.max_trace_deviation =
            std::max(out.max_trace_deviation, std::abs(pooled.trace() - Complex(1.0)));
        out.max_hermiticity_deviation =
            std::max(out.max_hermiticity_deviation, max_abs((pooled - pooled.adjoint()).eval()));

        Matrix herm = ((pooled + pooled.adjoint()) / 2.0).eval();
        Eigen::SelfAdjointEigenSolver<Matrix> es(herm);
        out.min_eigenvalue = std::min(out.min_eigenvalue, es.eigenvalues().minCoeff());

        out.raw.push_back(std::move(pooled));
        out.hermitized.push_back(std::move(herm));
        out.se.push_back(std::sqrt(var / denom));  // Frobenius-aggregate SE
    }
    return out;
}

} // namespace stoq
