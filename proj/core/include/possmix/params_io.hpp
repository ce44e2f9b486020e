#ifndef POSSMIX_PARAMS_IO_HPP_
#define POSSMIX_PARAMS_IO_HPP_

#include <string>

#include "possmix/types.hpp"

namespace possmix {

/// Model-parameter document: a JSON object with fields
/// K, E, pi, gamma, rho, eta, bounds. All floating values are written with
/// 17 significant digits, so deserialize(serialize(p)) == p exactly.
std::string serialize_params(const MixtureParams& p);

/// Parses a parameter document. Throws std::runtime_error naming the
/// offending field on malformed input, and on structural violations such as
/// a pi that does not sum to 1.
MixtureParams deserialize_params(const std::string& text);

}  // namespace possmix

#endif  // POSSMIX_PARAMS_IO_HPP_
