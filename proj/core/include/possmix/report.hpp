#ifndef POSSMIX_REPORT_HPP_
#define POSSMIX_REPORT_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "possmix/gem.hpp"
#include "possmix/types.hpp"

namespace possmix {

/// Fit report document: loglik, bic, n_params, n_tot, converged, iterations,
/// pi, indicators, hard_assignment (1-based components), seed, and the full
/// parameter document under "params". Byte-deterministic.
std::string write_fit_report(const FitResult& result, const ClusterIndicators& ind,
                             std::uint64_t seed);

/// Table-style indicator summary: component,pi,lambda,zeta,kappa_1..kappa_E.
/// When event names are given the kappa columns carry them instead.
std::string indicators_csv(const ClusterIndicators& ind, const std::vector<double>& pi,
                           const std::vector<std::string>* event_names = nullptr);

/// BIC table: k,loglik,n_params,bic,converged plus a best_k trailer line.
std::string bic_table_csv(const KSelection& sel);

}  // namespace possmix

#endif  // POSSMIX_REPORT_HPP_
