#ifndef POSSMIX_GEM_HPP_
#define POSSMIX_GEM_HPP_

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "possmix/types.hpp"

namespace possmix {

/// Multistart GEM configuration. Defaults follow the reference estimation
/// protocol: 1000 random starts, the best 100 after 10 iterations refined
/// for up to 500 iterations.
struct FitConfig {
    int k = 1;              // number of mixture components
    int n_starts = 1000;
    int n_short_iters = 10;
    int n_keep = 100;
    int n_long_iters = 500;
    double rel_tol = 1e-8;  // |dll| / (|ll| + 1) convergence threshold
    std::uint64_t seed = 0;
    double param_floor = 1e-6;  // lower box bound for rho and eta
    double armijo_c = 1e-4;
    double armijo_shrink = 0.5;
    int max_backtracks = 30;
    int threads = 1;
    /// Forced initialization; honored when n_starts == 1.
    std::optional<MixtureParams> init;
};

struct FitResult {
    MixtureParams params;
    double loglik = 0.0;
    std::vector<double> loglik_trace;  // one observed-data value per iteration
    Responsibilities resp;
    std::vector<int> hard_assignment;  // argmax_k r[i][k], ties to lower k
    double bic = 0.0;
    int n_params = 0;
    long n_tot = 0;
    bool converged = false;
    int start_id = -1;
    int iterations = 0;
};

/// Posterior responsibilities and sufficient statistics at the given
/// parameters. Throws if some possession has zero density under every
/// component.
Responsibilities e_step(const Dataset& data, const MixtureParams& params);

/// Closed-form update of the proportions and transition matrices from
/// E-step statistics. Transition rows with zero weighted count become
/// uniform.
void m_step_closed_form(const Responsibilities& stats, int n, std::vector<double>& pi,
                        std::vector<Matrix>& gamma);

/// Gradient of the expected complete-data log-likelihood term of one
/// (component, event) gamma law with respect to (shape, scale), given the
/// weighted statistics n1, n_dt, n_ln_dt of that cell.
std::array<double, 2> gamma_gradient(const std::array<double, 2>& rho_e, double n1, double n_dt,
                                     double n_ln_dt);
/// The objective the gradient above differentiates.
double gamma_objective(const std::array<double, 2>& rho_e, double n1, double n_dt,
                       double n_ln_dt);

/// One event's responsibility weight and scaled spatial quantities, all
/// divided by sqrt(dt).
struct WeightedDisplacement {
    double weight;
    double du;
    double g_lo;
    double g_hi;
};

/// Gradient (and objective) of the expected complete-data log-likelihood
/// term of one spatial scale. Throws if a truncation mass underflows.
double eta_gradient(double eta, std::span<const WeightedDisplacement> events);
double eta_objective(double eta, std::span<const WeightedDisplacement> events);

struct AscentConfig {
    double floor = 1e-6;
    double armijo_c = 1e-4;
    double armijo_shrink = 0.5;
    int max_backtracks = 30;
};

/// Secant information carried between GEM iterations for one parameter
/// block (dim 1 or 2).
struct CurvatureState {
    std::array<double, 2> x{};
    std::array<double, 2> g{};
    bool has_prev = false;
};

/// One quasi-Newton ascent step: diagonal curvature from the previous
/// iteration's (x, gradient) pair (identity scaling on the first call),
/// projection onto [floor, inf) per coordinate, then Armijo backtracking.
/// Returns x unchanged when max_backtracks is exhausted, which preserves
/// the GEM ascent property. Throws on a non-finite gradient.
std::array<double, 2> bounded_ascent_step(
    std::array<double, 2> x0, int dim,
    const std::function<std::array<double, 2>(const std::array<double, 2>&)>& grad_fn,
    const std::function<double(const std::array<double, 2>&)>& obj_fn, const AscentConfig& cfg,
    CurvatureState& state);

/// Curvature memory for every rho and eta block of a model.
class GemState {
public:
    GemState(int K, int E);
    CurvatureState& rho(int k, int e);
    CurvatureState& eta(int k, int h, int e);

private:
    int E_;
    std::vector<CurvatureState> rho_, eta_;
};

struct GemStepResult {
    MixtureParams params;
    Responsibilities stats;
    double loglik;  // observed-data log-likelihood at the input parameters
};

/// One full GEM iteration: E-step, closed-form pi/Gamma update, one bounded
/// ascent step per gamma-law pair and per spatial scale.
GemStepResult gem_iteration(const Dataset& data, const MixtureParams& params, GemState& state,
                            const FitConfig& config = {});

/// Multistart GEM fit. Deterministic given config.seed (and independent of
/// config.threads).
FitResult fit(const Dataset& data, const FitConfig& config);

/// Number of free parameters of a K-component model on E transient events.
int n_free_params(int K, int E);

/// BIC_K = loglik - nu_K/2 * ln(n_tot), n_tot = total number of events.
double bic(double loglik, const MixtureParams& params, const Dataset& data);

struct KSelectionRow {
    int k = 0;
    double loglik = 0.0;
    int n_params = 0;
    double bic = 0.0;
    bool converged = false;
};
struct KSelection {
    std::vector<KSelectionRow> rows;
    int best_k = 0;
    std::vector<FitResult> fits;  // aligned with rows
};

/// Fits every K in [k_min, k_max] and returns the BIC table plus the argmax
/// (ties resolved toward the smaller K).
KSelection select_k(const Dataset& data, int k_min, int k_max, FitConfig config);

}  // namespace possmix

#endif  // POSSMIX_GEM_HPP_
