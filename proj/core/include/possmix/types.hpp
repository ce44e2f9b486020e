#ifndef POSSMIX_TYPES_HPP_
#define POSSMIX_TYPES_HPP_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace possmix {

/// Rectangular playing area. Horizontal extent [x_min, x_max], vertical
/// extent [y_min, y_max], in meters.
struct PitchBounds {
    double x_min = 0.0;
    double x_max = 120.0;
    double y_min = 0.0;
    double y_max = 80.0;

    double lo(int dim) const { return dim == 0 ? x_min : y_min; }
    double hi(int dim) const { return dim == 0 ? x_max : y_max; }
    bool contains(double x, double y) const {
        return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
    }
    bool operator==(const PitchBounds&) const = default;
};

/// One on-ball event. Marks are 1-based: 1..E are the transient event
/// types, E+1 is the absorbing end-of-sequence mark. The start mark 0 is
/// implicit and never stored (it lives in Possession::origin).
struct EventRecord {
    int mark = 0;
    double time = 0.0;  // seconds since start of the possession
    double x = 0.0;
    double y = 0.0;

    double coord(int dim) const { return dim == 0 ? x : y; }
    bool operator==(const EventRecord&) const = default;
};

/// One possession: the start location (mark 0, time 0) plus the ordered
/// event sequence. The last event always carries the absorbing mark.
struct Possession {
    double origin_x = 0.0;
    double origin_y = 0.0;
    std::vector<EventRecord> events;

    int size() const { return static_cast<int>(events.size()); }  // M_i
    double origin(int dim) const { return dim == 0 ? origin_x : origin_y; }
    bool operator==(const Possession&) const = default;
};

/// A sample of possessions together with the state-space size and pitch
/// geometry they were recorded on.
struct Dataset {
    int E = 0;  // number of transient event types
    PitchBounds bounds;
    std::vector<Possession> possessions;

    int size() const { return static_cast<int>(possessions.size()); }
    long total_events() const;  // sum of M_i, the BIC transition count
};

/// Dense row-major matrix, just enough for transition matrices and
/// responsibility tables.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    double& operator()(int i, int j) { return data_[static_cast<size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return data_[static_cast<size_t>(i) * cols_ + j]; }
    double* row(int i) { return data_.data() + static_cast<size_t>(i) * cols_; }
    const double* row(int i) const { return data_.data() + static_cast<size_t>(i) * cols_; }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    bool operator==(const Matrix&) const = default;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

/// Full parameter set of the K-component model.
///
/// gamma[k] is the (E+1)x(E+1) transition matrix of component k: row p is
/// indexed by the previous state in {0,1,..,E} (row 0 = possession start),
/// column c by the next state c+1 in {1,..,E+1}. rho[k][e] = {shape, scale}
/// of the inter-event gamma law for next state e+1; eta[k][dim][e] is the
/// spatial scale for dimension dim and next state e+1.
struct MixtureParams {
    int K = 1;
    int E = 1;
    std::vector<double> pi;                                // K
    std::vector<Matrix> gamma;                             // K of (E+1)x(E+1)
    std::vector<std::vector<std::array<double, 2>>> rho;   // K x (E+1) x {shape,scale}
    std::vector<std::array<std::vector<double>, 2>> eta;   // K x 2 x (E+1)
    PitchBounds bounds;

    bool operator==(const MixtureParams&) const = default;
};

/// Posterior component probabilities and the E-step sufficient statistics.
/// All (k,e) tables index e = 0..E for states 1..E+1.
struct Responsibilities {
    int n = 0;
    int K = 0;
    int E = 0;
    Matrix r;                          // n x K, rows sum to 1
    Matrix n1;                         // K x (E+1): r-weighted event counts
    Matrix n_dt;                       // K x (E+1): r-weighted sums of dt
    Matrix n_ln_dt;                    // K x (E+1): r-weighted sums of ln dt
    std::vector<Matrix> trans_counts;  // K of (E+1)x(E+1) weighted transitions
};

/// Analytic per-component summaries: expected event count, expected visits
/// per transient event type, expected possession duration.
struct ClusterIndicators {
    int K = 0;
    int E = 0;
    std::vector<double> lambda;  // K, each >= 1
    Matrix kappa;                // K x E, non-negative
    std::vector<double> zeta;    // K, seconds
};

struct ParamViolation {
    std::string item;    // which assumption or invariant is broken
    std::string detail;  // where and by how much
};

/// Checks the structural invariants of MixtureParams plus the model's
/// validity assumptions: strictly positive proportions, a single aperiodic
/// transient communicating class over the transient states reachable from
/// the start state with a reachable absorbing state, and pairwise-distinct
/// gamma parameters across components. Returns an empty vector iff the
/// parameter set is valid; violations are data, not errors.
std::vector<ParamViolation> validate_params(const MixtureParams& p);

/// Structural check of one possession against a dataset's E and bounds.
/// Throws std::invalid_argument on the first violation.
void check_possession(const Possession& poss, int E, const PitchBounds& bounds);

/// Uniformly random-free construction helper: equal proportions, uniform
/// transition rows, unit gamma and spatial scales. Valid except for the
/// distinct-gamma-parameters assumption when K > 1.
MixtureParams make_uniform_params(int K, int E, const PitchBounds& bounds = {});

}  // namespace possmix

#endif  // POSSMIX_TYPES_HPP_
