#ifndef POSSMIX_SIMULATE_HPP_
#define POSSMIX_SIMULATE_HPP_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "possmix/rng.hpp"
#include "possmix/types.hpp"

namespace possmix {

enum class Scenario { easy, intermediate, hard };

/// Separation parameter of each study scenario.
double scenario_tau(Scenario s);
Scenario scenario_from_string(const std::string& name);
std::string to_string(Scenario s);

/// Draws one possession from component k: marks from the Markov chain,
/// inter-event times from the per-type gamma laws, locations from truncated
/// Gaussians centered at the previous location with sd eta * sqrt(dt).
/// Throws if the chain fails to absorb within 100000 events.
Possession sample_possession(const MixtureParams& params, int k, double origin_x,
                             double origin_y, Rng& rng);

/// Three-component benchmark parameter set: diagonal-boosted transition
/// matrices with boost weight exp(k tau) / (1 + exp(k tau)) applied
/// position-wise (row i boosts column i, including the start row), gamma
/// shapes 1 + k tau with unit scale, spatial scales 1 + k tau, equal
/// proportions. k here is the 1-based component number.
MixtureParams scenario_params(double tau, int K = 3, int E = 5, const PitchBounds& bounds = {});

/// Simulated dataset of n possessions with uniformly drawn component labels
/// (1-based). Each possession starts where the previous one ended; the first
/// starts at the pitch center. Deterministic given the seed.
std::pair<Dataset, std::vector<int>> generate_dataset(Scenario scenario, int n,
                                                      std::uint64_t seed);

/// Same with explicit generating parameters.
std::pair<Dataset, std::vector<int>> generate_dataset(const MixtureParams& params, int n,
                                                      std::uint64_t seed);

/// Event names used when exporting simulated data: "e1".."eE" plus the
/// start/end labels understood by the ingest vocabulary format.
std::vector<std::string> simulated_event_names(int E);

/// Event CSV in the ingest schema (possession_id,event_type,time,x,y).
std::string to_event_csv(const Dataset& data);
/// Sidecar with one line per possession: possession_id,true_component.
std::string to_label_csv(const std::vector<int>& labels);
/// Vocabulary file body for the simulated event names.
std::string to_vocab_file(int E);

}  // namespace possmix

#endif  // POSSMIX_SIMULATE_HPP_
