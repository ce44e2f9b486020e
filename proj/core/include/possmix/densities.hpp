#ifndef POSSMIX_DENSITIES_HPP_
#define POSSMIX_DENSITIES_HPP_

#include <array>
#include <cstdint>
#include <vector>

#include "possmix/types.hpp"

namespace possmix {

/// The three log-density factors of one possession under one component.
/// total_ll is mark_ll + time_ll + space_ll in exactly that order.
struct ComponentLogDensity {
    double mark_ll = 0.0;
    double time_ll = 0.0;
    double space_ll = 0.0;
    double total_ll = 0.0;
};

/// Counters for recoverable numerical events during density evaluation.
struct NumericalFlags {
    std::int64_t trunc_mass_underflows = 0;
};

/// Log-probability of the mark sequence under one transition matrix:
/// sum over transitions of ln gamma_mat[prev, next], the start state being
/// row 0. Returns -inf if any traversed entry is zero.
double markov_logprob(const Possession& poss, const Matrix& gamma_mat);

/// Gamma log-density at x > 0 with the given shape and scale.
double gamma_logpdf(double x, double shape, double scale);

/// Log-probability of the inter-event times of a possession given its marks:
/// each dt gets the gamma law of the event type it leads into.
double time_logprob(const Possession& poss, const std::vector<std::array<double, 2>>& rho_k);

/// Log-density of one scaled displacement du under a Gaussian of scale eta
/// truncated to the scaled gaps [g_lo, g_hi] around the previous location.
/// All three are already divided by sqrt(dt). If the truncation mass
/// underflows, returns -inf and bumps flags->trunc_mass_underflows.
double truncnorm_logpdf(double du, double g_lo, double g_hi, double eta,
                        NumericalFlags* flags = nullptr);

/// Log-probability of the spatial walk of a possession: product of
/// truncated-Gaussian factors over events and both pitch dimensions.
double space_logprob(const Possession& poss, const std::array<std::vector<double>, 2>& eta_k,
                     const PitchBounds& bounds, NumericalFlags* flags = nullptr);

/// All three factors of possession i under component k.
ComponentLogDensity possession_loglik(const Possession& poss, const MixtureParams& params, int k,
                                      NumericalFlags* flags = nullptr);

/// Observed-data log-likelihood: sum over possessions of
/// logsumexp_k(ln pi_k + total_ll(i,k)).
double mixture_loglik(const Dataset& data, const MixtureParams& params,
                      NumericalFlags* flags = nullptr);

/// logsumexp over a contiguous range; -inf entries are ignored, and the
/// result is -inf only if every entry is -inf.
double log_sum_exp(const double* values, int n);

}  // namespace possmix

#endif  // POSSMIX_DENSITIES_HPP_
