#include "possmix/types.hpp"

#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>
#include <stdexcept>

namespace possmix {

namespace {

constexpr double kSumTol = 1e-10;

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

// Reachability over the support graph of one transition matrix. States are
// 0..E+1 where E+1 is absorbing; row p of g covers previous states 0..E and
// column c encodes next state c+1.
std::vector<char> reachable_from(const Matrix& g, int source) {
    const int E = g.rows() - 1;
    std::vector<char> seen(E + 2, 0);
    std::queue<int> frontier;
    seen[source] = 1;
    frontier.push(source);
    while (!frontier.empty()) {
        int s = frontier.front();
        frontier.pop();
        if (s > E) continue;  // absorbing state has no outgoing edges
        for (int c = 0; c <= E; ++c) {
            if (g(s, c) > 0.0 && !seen[c + 1]) {
                seen[c + 1] = 1;
                frontier.push(c + 1);
            }
        }
    }
    return seen;
}

// Period of the strongly-connected transient class {1..E}: gcd of
// (level[u] + 1 - level[v]) over support edges u->v, using BFS levels.
// Returns 0 when the class has no cycle at all (vacuously aperiodic).
int class_period(const Matrix& g, int E) {
    std::vector<int> level(E + 1, -1);
    std::queue<int> frontier;
    level[1] = 0;
    frontier.push(1);
    while (!frontier.empty()) {
        int u = frontier.front();
        frontier.pop();
        for (int c = 0; c < E; ++c) {
            int v = c + 1;
            if (g(u, c) > 0.0 && level[v] < 0) {
                level[v] = level[u] + 1;
                frontier.push(v);
            }
        }
    }
    long gcd = 0;
    for (int u = 1; u <= E; ++u) {
        if (level[u] < 0) continue;
        for (int c = 0; c < E; ++c) {
            int v = c + 1;
            if (g(u, c) > 0.0 && level[v] >= 0) {
                long d = level[u] + 1 - level[v];
                gcd = std::gcd(gcd, std::labs(d));
            }
        }
    }
    return static_cast<int>(gcd);
}

}  // namespace

long Dataset::total_events() const {
    long total = 0;
    for (const auto& p : possessions) total += p.size();
    return total;
}

std::vector<ParamViolation> validate_params(const MixtureParams& p) {
    std::vector<ParamViolation> out;
    auto add = [&out](std::string item, std::string detail) {
        out.push_back({std::move(item), std::move(detail)});
    };

    if (p.K < 1) add("shape", "K must be >= 1, got " + std::to_string(p.K));
    if (p.E < 1) add("shape", "E must be >= 1, got " + std::to_string(p.E));
    if (!out.empty()) return out;

    const int K = p.K, E = p.E;
    if (static_cast<int>(p.pi.size()) != K) add("shape", "pi has wrong length");
    if (static_cast<int>(p.gamma.size()) != K) add("shape", "gamma has wrong length");
    if (static_cast<int>(p.rho.size()) != K) add("shape", "rho has wrong length");
    if (static_cast<int>(p.eta.size()) != K) add("shape", "eta has wrong length");
    for (int k = 0; k < K && k < static_cast<int>(p.gamma.size()); ++k) {
        if (p.gamma[k].rows() != E + 1 || p.gamma[k].cols() != E + 1)
            add("shape", "gamma[" + std::to_string(k) + "] is not (E+1)x(E+1)");
    }
    for (int k = 0; k < K && k < static_cast<int>(p.rho.size()); ++k) {
        if (static_cast<int>(p.rho[k].size()) != E + 1)
            add("shape", "rho[" + std::to_string(k) + "] is not length E+1");
    }
    for (int k = 0; k < K && k < static_cast<int>(p.eta.size()); ++k) {
        for (int h = 0; h < 2; ++h)
            if (static_cast<int>(p.eta[k][h].size()) != E + 1)
                add("shape", "eta[" + std::to_string(k) + "] is not 2x(E+1)");
    }
    if (!out.empty()) return out;

    if (!(p.bounds.x_min < p.bounds.x_max) || !(p.bounds.y_min < p.bounds.y_max))
        add("bounds", "pitch bounds must satisfy min < max in both dimensions");

    double pi_sum = 0.0;
    for (int k = 0; k < K; ++k) {
        if (!(p.pi[k] > 0.0))
            add("Assumption 1.1 positive proportions",
                "pi[" + std::to_string(k) + "] = " + fmt(p.pi[k]));
        pi_sum += p.pi[k];
    }
    if (std::abs(pi_sum - 1.0) > kSumTol)
        add("pi normalization", "pi sums to " + fmt(pi_sum));

    for (int k = 0; k < K; ++k) {
        const Matrix& g = p.gamma[k];
        for (int r = 0; r <= E; ++r) {
            double row_sum = 0.0;
            for (int c = 0; c <= E; ++c) {
                if (g(r, c) < 0.0)
                    add("row-stochasticity", "gamma[" + std::to_string(k) + "](" +
                                                 std::to_string(r) + "," + std::to_string(c) +
                                                 ") = " + fmt(g(r, c)) + " is negative");
                row_sum += g(r, c);
            }
            if (std::abs(row_sum - 1.0) > kSumTol)
                add("row-stochasticity", "gamma[" + std::to_string(k) + "] row " +
                                             std::to_string(r) + " sums to " + fmt(row_sum));
        }
    }

    for (int k = 0; k < K; ++k) {
        for (int e = 0; e <= E; ++e) {
            if (!(p.rho[k][e][0] > 0.0) || !(p.rho[k][e][1] > 0.0))
                add("positive gamma parameters",
                    "rho[" + std::to_string(k) + "][" + std::to_string(e + 1) + "] = (" +
                        fmt(p.rho[k][e][0]) + ", " + fmt(p.rho[k][e][1]) + ")");
            for (int h = 0; h < 2; ++h) {
                if (!(p.eta[k][h][e] > 0.0))
                    add("positive spatial scales",
                        "eta[" + std::to_string(k) + "][" + std::to_string(h) + "][" +
                            std::to_string(e + 1) + "] = " + fmt(p.eta[k][h][e]));
            }
        }
    }
    if (!out.empty()) return out;

    // Assumption 1.2: {1..E} one aperiodic transient communicating class,
    // reachable from the start state, with the absorbing state reachable.
    for (int k = 0; k < K; ++k) {
        const Matrix& g = p.gamma[k];
        const std::string kk = std::to_string(k);

        auto from_start = reachable_from(g, 0);
        bool all_from_start = true;
        for (int e = 1; e <= E; ++e) all_from_start = all_from_start && from_start[e];
        if (!all_from_start)
            add("Assumption 1.2 chain structure",
                "component " + kk + ": not all transient states reachable from the start state");
        if (!from_start[E + 1])
            add("Assumption 1.2 chain structure",
                "component " + kk + ": absorbing state unreachable from the start state");

        bool single_class = true;
        for (int e = 1; e <= E && single_class; ++e) {
            auto seen = reachable_from(g, e);
            for (int f = 1; f <= E; ++f) single_class = single_class && seen[f];
        }
        if (!single_class) {
            add("Assumption 1.2 chain structure",
                "component " + kk + ": transient states do not form a single communicating class");
        } else {
            int period = class_period(g, E);
            if (period > 1)
                add("Assumption 1.2 chain structure",
                    "component " + kk + ": transient class has period " + std::to_string(period));
            // transience: some transient state must leave toward absorption
            bool exits = false;
            for (int e = 1; e <= E; ++e) exits = exits || g(e, E) > 0.0;
            if (!exits)
                add("Assumption 1.2 chain structure",
                    "component " + kk + ": transient class is closed, chain never absorbs");
        }
    }

    // Assumption 1.3: gamma parameter pairs distinct across components at
    // every event type.
    for (int k = 0; k < K; ++k) {
        for (int l = k + 1; l < K; ++l) {
            for (int e = 0; e <= E; ++e) {
                if (p.rho[k][e][0] == p.rho[l][e][0] && p.rho[k][e][1] == p.rho[l][e][1]) {
                    add("Assumption 1.3 distinct gamma parameters",
                        "components " + std::to_string(k) + " and " + std::to_string(l) +
                            " share rho at event " + std::to_string(e + 1));
                }
            }
        }
    }

    return out;
}

void check_possession(const Possession& poss, int E, const PitchBounds& bounds) {
    if (poss.events.empty()) throw std::invalid_argument("possession has no events");
    if (!bounds.contains(poss.origin_x, poss.origin_y))
        throw std::invalid_argument("possession origin outside pitch bounds");
    const int M = poss.size();
    double prev_t = 0.0;
    for (int j = 0; j < M; ++j) {
        const EventRecord& ev = poss.events[j];
        if (ev.mark < 1 || ev.mark > E + 1)
            throw std::invalid_argument("event mark " + std::to_string(ev.mark) +
                                        " outside {1,..," + std::to_string(E + 1) + "}");
        if (ev.mark == E + 1 && j + 1 != M)
            throw std::invalid_argument("absorbing mark before the final event");
        if (j + 1 == M && ev.mark != E + 1)
            throw std::invalid_argument("final event does not carry the absorbing mark");
        if (!std::isfinite(ev.time) || ev.time < 0.0)
            throw std::invalid_argument("event time must be finite and non-negative");
        if (!(ev.time > prev_t))
            throw std::invalid_argument("event times must be strictly increasing");
        if (!bounds.contains(ev.x, ev.y))
            throw std::invalid_argument("event location outside pitch bounds");
        prev_t = ev.time;
    }
}

MixtureParams make_uniform_params(int K, int E, const PitchBounds& bounds) {
    MixtureParams p;
    p.K = K;
    p.E = E;
    p.bounds = bounds;
    p.pi.assign(K, 1.0 / K);
    p.gamma.assign(K, Matrix(E + 1, E + 1, 1.0 / (E + 1)));
    p.rho.assign(K, std::vector<std::array<double, 2>>(E + 1, {1.0, 1.0}));
    for (int k = 0; k < K; ++k) {
        std::array<std::vector<double>, 2> eta_k;
        eta_k[0].assign(E + 1, 1.0);
        eta_k[1].assign(E + 1, 1.0);
        p.eta.push_back(std::move(eta_k));
    }
    return p;
}

}  // namespace possmix
