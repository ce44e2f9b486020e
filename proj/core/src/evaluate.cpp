#include "possmix/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "possmix/indicators.hpp"
#include "possmix/rng.hpp"

namespace possmix {

double adjusted_rand_index(std::span<const int> labels_a, std::span<const int> labels_b) {
    if (labels_a.size() != labels_b.size())
        throw std::invalid_argument("adjusted_rand_index: label vectors differ in length");
    const size_t n = labels_a.size();
    if (n < 2) throw std::invalid_argument("adjusted_rand_index: need at least two items");

    std::map<int, int> ids_a, ids_b;
    for (size_t i = 0; i < n; ++i) {
        ids_a.emplace(labels_a[i], static_cast<int>(ids_a.size()));
        ids_b.emplace(labels_b[i], static_cast<int>(ids_b.size()));
    }
    const int ka = static_cast<int>(ids_a.size()), kb = static_cast<int>(ids_b.size());
    std::vector<long> table(static_cast<size_t>(ka) * kb, 0);
    std::vector<long> row(ka, 0), col(kb, 0);
    for (size_t i = 0; i < n; ++i) {
        int a = ids_a[labels_a[i]], b = ids_b[labels_b[i]];
        ++table[static_cast<size_t>(a) * kb + b];
        ++row[a];
        ++col[b];
    }

    auto choose2 = [](long m) { return 0.5 * static_cast<double>(m) * (m - 1); };
    double index = 0.0;
    for (long cell : table) index += choose2(cell);
    double sum_a = 0.0, sum_b = 0.0;
    for (long m : row) sum_a += choose2(m);
    for (long m : col) sum_b += choose2(m);
    double total_pairs = choose2(static_cast<long>(n));
    double expected = sum_a * sum_b / total_pairs;
    double max_index = 0.5 * (sum_a + sum_b);
    double denom = max_index - expected;
    if (denom == 0.0) {
        // both partitions trivial (all-singletons or one block): identical
        return 1.0;
    }
    return (index - expected) / denom;
}

IndicatorError indicator_error(const ClusterIndicators& est, const ClusterIndicators& truth) {
    if (est.K != truth.K || est.E != truth.E)
        throw std::invalid_argument("indicator_error: dimension mismatch");
    const int K = est.K, E = est.E;
    if (K > 8) throw std::invalid_argument("indicator_error: alignment supports K <= 8");

    std::vector<int> perm(K);
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<int> best = perm;
    double best_cost = std::numeric_limits<double>::infinity();
    do {
        double cost = 0.0;
        for (int k = 0; k < K; ++k) {
            const int m = perm[k];  // estimated component m plays truth component k
            double d = est.lambda[m] - truth.lambda[k];
            cost += d * d;
            d = est.zeta[m] - truth.zeta[k];
            cost += d * d;
            for (int e = 0; e < E; ++e) {
                d = est.kappa(m, e) - truth.kappa(k, e);
                cost += d * d;
            }
        }
        if (cost < best_cost) {
            best_cost = cost;
            best = perm;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    IndicatorError out;
    for (int k = 0; k < K; ++k) {
        const int m = best[k];
        double d = est.lambda[m] - truth.lambda[k];
        out.err_lambda += d * d;
        d = est.zeta[m] - truth.zeta[k];
        out.err_zeta += d * d;
        for (int e = 0; e < E; ++e) {
            d = est.kappa(m, e) - truth.kappa(k, e);
            out.err_kappa += d * d;
        }
    }
    out.err_lambda = std::sqrt(out.err_lambda);
    out.err_kappa = std::sqrt(out.err_kappa);
    out.err_zeta = std::sqrt(out.err_zeta);
    return out;
}

namespace {

struct Task {
    Scenario scenario;
    int n;
    int rep;
};

void study_parallel_for(int n_items, int threads, const std::function<void(int)>& body) {
    if (threads <= 1 || n_items <= 1) {
        for (int i = 0; i < n_items; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    auto worker = [&] {
        for (int i; (i = next.fetch_add(1)) < n_items;) {
            try {
                body(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < std::min(threads, n_items); ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
}

void append_num(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

}  // namespace

std::vector<ReplicationResult> run_study(const StudyConfig& config) {
    std::vector<Task> tasks;
    for (Scenario s : config.scenarios)
        for (int n : config.sizes)
            for (int rep = 0; rep < config.reps; ++rep) tasks.push_back({s, n, rep});

    std::vector<ReplicationResult> results(tasks.size());
    std::mutex progress_mutex;

    study_parallel_for(static_cast<int>(tasks.size()), config.threads, [&](int t) {
        const Task& task = tasks[t];
        MixtureParams truth_params = scenario_params(scenario_tau(task.scenario));
        ClusterIndicators truth = indicators_for(truth_params);

        // One dataset stream per (scenario, rep): the sizes share draws, so
        // smaller samples are prefixes of larger ones.
        std::uint64_t data_seed = mix_seed(
            config.seed, 0x5D0ULL * 1024 + static_cast<int>(task.scenario) * 256 + task.rep);
        auto [data, labels] = generate_dataset(truth_params, task.n, data_seed);

        FitConfig fc = config.fit;
        fc.k = truth_params.K;
        fc.seed = mix_seed(data_seed, 0xF17ULL);
        fc.threads = 1;  // parallelism lives at the replication level
        FitResult res = fit(data, fc);

        std::vector<int> est_labels(res.hard_assignment.begin(), res.hard_assignment.end());
        ReplicationResult rr;
        rr.scenario = task.scenario;
        rr.n = task.n;
        rr.seed = data_seed;
        rr.ari = adjusted_rand_index(labels, est_labels);
        IndicatorError err = indicator_error(indicators_for(res.params), truth);
        rr.err_lambda = err.err_lambda;
        rr.err_kappa = err.err_kappa;
        rr.err_zeta = err.err_zeta;
        results[t] = rr;
        if (config.on_progress) {
            std::lock_guard<std::mutex> lock(progress_mutex);
            config.on_progress(rr);
        }
    });
    return results;
}

std::vector<StudyCell> summarize_study(std::span<const ReplicationResult> results) {
    std::map<std::pair<int, int>, std::vector<const ReplicationResult*>> cells;
    for (const auto& r : results)
        cells[{static_cast<int>(r.scenario), r.n}].push_back(&r);

    std::vector<StudyCell> out;
    for (const auto& [key, rows] : cells) {
        StudyCell cell;
        cell.scenario = static_cast<Scenario>(key.first);
        cell.n = key.second;
        cell.reps = static_cast<int>(rows.size());
        auto mean_sd = [&](auto getter, double& mean, double& sd) {
            double m = 0.0;
            for (const auto* r : rows) m += getter(*r);
            m /= rows.size();
            double v = 0.0;
            for (const auto* r : rows) {
                double d = getter(*r) - m;
                v += d * d;
            }
            mean = m;
            sd = rows.size() > 1 ? std::sqrt(v / (rows.size() - 1)) : 0.0;
        };
        mean_sd([](const ReplicationResult& r) { return r.ari; }, cell.mean_ari, cell.sd_ari);
        mean_sd([](const ReplicationResult& r) { return r.err_lambda; }, cell.mean_err_lambda,
                cell.sd_err_lambda);
        mean_sd([](const ReplicationResult& r) { return r.err_kappa; }, cell.mean_err_kappa,
                cell.sd_err_kappa);
        mean_sd([](const ReplicationResult& r) { return r.err_zeta; }, cell.mean_err_zeta,
                cell.sd_err_zeta);
        out.push_back(cell);
    }
    return out;
}

std::string study_results_csv(std::span<const ReplicationResult> results) {
    std::string out = "scenario,n,seed,ari,err_lambda,err_kappa,err_zeta\n";
    for (const auto& r : results) {
        out += to_string(r.scenario);
        out += ',' + std::to_string(r.n) + ',' + std::to_string(r.seed) + ',';
        append_num(out, r.ari);
        out += ',';
        append_num(out, r.err_lambda);
        out += ',';
        append_num(out, r.err_kappa);
        out += ',';
        append_num(out, r.err_zeta);
        out += '\n';
    }
    return out;
}

std::string study_summary_csv(std::span<const StudyCell> cells) {
    std::string out =
        "scenario,n,reps,mean_ari,sd_ari,mean_err_lambda,sd_err_lambda,"
        "mean_err_kappa,sd_err_kappa,mean_err_zeta,sd_err_zeta\n";
    for (const auto& c : cells) {
        out += to_string(c.scenario);
        out += ',' + std::to_string(c.n) + ',' + std::to_string(c.reps);
        for (double v : {c.mean_ari, c.sd_ari, c.mean_err_lambda, c.sd_err_lambda,
                         c.mean_err_kappa, c.sd_err_kappa, c.mean_err_zeta, c.sd_err_zeta}) {
            out += ',';
            append_num(out, v);
        }
        out += '\n';
    }
    return out;
}

}  // namespace possmix
