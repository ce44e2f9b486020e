#ifndef POSSMIX_EVALUATE_HPP_
#define POSSMIX_EVALUATE_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "possmix/gem.hpp"
#include "possmix/simulate.hpp"
#include "possmix/types.hpp"

namespace possmix {

/// Hubert-Arabie adjusted Rand index between two labelings of the same
/// items. 1 iff the partitions coincide up to relabeling. Throws on a
/// length mismatch or fewer than two items.
double adjusted_rand_index(std::span<const int> labels_a, std::span<const int> labels_b);

/// Euclidean norms of the indicator differences after aligning components
/// by the label permutation minimizing the total squared error (K <= 8).
struct IndicatorError {
    double err_lambda = 0.0;
    double err_kappa = 0.0;
    double err_zeta = 0.0;
};
IndicatorError indicator_error(const ClusterIndicators& est, const ClusterIndicators& truth);

/// One replication of the simulation study: generate, fit, score.
struct ReplicationResult {
    Scenario scenario = Scenario::easy;
    int n = 0;
    std::uint64_t seed = 0;
    double ari = 0.0;
    double err_lambda = 0.0;
    double err_kappa = 0.0;
    double err_zeta = 0.0;
};

struct StudyConfig {
    std::vector<Scenario> scenarios = {Scenario::easy, Scenario::intermediate, Scenario::hard};
    std::vector<int> sizes = {50, 100, 200, 400};
    int reps = 20;
    std::uint64_t seed = 0;
    FitConfig fit;  // fit.k is forced to the generating K
    int threads = 1;
    /// Optional progress sink, called once per finished replication.
    std::function<void(const ReplicationResult&)> on_progress;
};

/// Runs the replication grid. Dataset seeds are shared across sizes within
/// a (scenario, rep) cell, so the n = 50 sample is a prefix of the n = 400
/// one. Deterministic given config.seed; the result order is by scenario,
/// then size, then rep.
std::vector<ReplicationResult> run_study(const StudyConfig& config);

struct StudyCell {
    Scenario scenario;
    int n = 0;
    int reps = 0;
    double mean_ari = 0.0, sd_ari = 0.0;
    double mean_err_lambda = 0.0, sd_err_lambda = 0.0;
    double mean_err_kappa = 0.0, sd_err_kappa = 0.0;
    double mean_err_zeta = 0.0, sd_err_zeta = 0.0;
};

/// Per-(scenario, n) means and standard deviations.
std::vector<StudyCell> summarize_study(std::span<const ReplicationResult> results);

std::string study_results_csv(std::span<const ReplicationResult> results);
std::string study_summary_csv(std::span<const StudyCell> cells);

}  // namespace possmix

#endif  // POSSMIX_EVALUATE_HPP_
