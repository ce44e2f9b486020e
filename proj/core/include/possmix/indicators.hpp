#ifndef POSSMIX_INDICATORS_HPP_
#define POSSMIX_INDICATORS_HPP_

#include <array>
#include <vector>

#include "possmix/types.hpp"

namespace possmix {

/// Blocks of a transition matrix: a = start row over transient states,
/// r = start row's absorbing entry, Q = transient-to-transient block,
/// R = transient-to-absorbing column.
struct TransitionBlocks {
    std::vector<double> a;  // E
    double r = 0.0;
    Matrix Q;               // E x E
    std::vector<double> R;  // E
};

TransitionBlocks decompose_transition(const Matrix& gamma_mat);

/// F = (I - Q)^-1 by LU solve of (I - Q) X = I. Throws on a singular
/// system ("non-transient chain"). If cond_warning is given it is set when
/// the 1-norm condition estimate of (I - Q) exceeds 1e12.
Matrix fundamental_matrix(const Matrix& Q, bool* cond_warning = nullptr);

/// Expected visit counts of the absorbing chain: kappa = a'F over the
/// transient states and lambda = 1 + kappa 1, from the fundamental matrix.
struct ExpectedCounts {
    double lambda = 0.0;
    std::vector<double> kappa;
};
ExpectedCounts expected_counts(const Matrix& gamma_mat);

/// Expected possession duration: sum of expected visits times the mean
/// inter-event time mu_e = shape_e * scale_e, plus the absorbing event's.
double expected_duration(const Matrix& gamma_mat,
                         const std::vector<std::array<double, 2>>& rho_k);

/// All three indicators for every component of a parameter set.
ClusterIndicators indicators_for(const MixtureParams& params);

}  // namespace possmix

#endif  // POSSMIX_INDICATORS_HPP_
