#include "possmix/simulate.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace possmix {

namespace {

constexpr int kMaxEvents = 100000;

void append_num(std::string& out, double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

}  // namespace

double scenario_tau(Scenario s) {
    switch (s) {
        case Scenario::easy: return 0.65;
        case Scenario::intermediate: return 0.50;
        case Scenario::hard: return 0.40;
    }
    throw std::logic_error("unknown scenario");
}

Scenario scenario_from_string(const std::string& name) {
    if (name == "easy") return Scenario::easy;
    if (name == "intermediate") return Scenario::intermediate;
    if (name == "hard") return Scenario::hard;
    throw std::invalid_argument("unknown scenario '" + name + "'");
}

std::string to_string(Scenario s) {
    switch (s) {
        case Scenario::easy: return "easy";
        case Scenario::intermediate: return "intermediate";
        case Scenario::hard: return "hard";
    }
    throw std::logic_error("unknown scenario");
}

Possession sample_possession(const MixtureParams& params, int k, double origin_x,
                             double origin_y, Rng& rng) {
    const int E = params.E;
    const PitchBounds& bounds = params.bounds;
    if (!bounds.contains(origin_x, origin_y))
        throw std::invalid_argument("sample_possession: origin outside pitch bounds");

    Possession poss;
    poss.origin_x = origin_x;
    poss.origin_y = origin_y;
    int prev_state = 0;
    double t = 0.0;
    double u[2] = {origin_x, origin_y};

    for (;;) {
        if (poss.size() >= kMaxEvents)
            throw std::runtime_error("non-absorbing sample: event cap exceeded");
        int next = 1 + sample_index(rng, params.gamma[k].row(prev_state), E + 1);
        double dt = sample_gamma(rng, params.rho[k][next - 1][0], params.rho[k][next - 1][1]);
        // A zero dt would break both the gamma and spatial likelihoods; the
        // smallest positive double keeps the draw in-distribution.
        if (dt <= 0.0) dt = std::numeric_limits<double>::min();
        t += dt;
        double sqrt_dt = std::sqrt(dt);
        for (int h = 0; h < 2; ++h) {
            double sd = params.eta[k][h][next - 1] * sqrt_dt;
            u[h] = sample_trunc_normal(rng, u[h], sd, bounds.lo(h), bounds.hi(h));
        }
        poss.events.push_back({next, t, u[0], u[1]});
        if (next == E + 1) break;
        prev_state = next;
    }
    return poss;
}

MixtureParams scenario_params(double tau, int K, int E, const PitchBounds& bounds) {
    if (tau < 0.0) throw std::invalid_argument("scenario_params requires tau >= 0");
    MixtureParams p = make_uniform_params(K, E, bounds);
    for (int k = 0; k < K; ++k) {
        double w = std::exp((k + 1) * tau);
        double base = 1.0 / ((1.0 + w) * (E + 1));
        double boost = w / (1.0 + w);
        for (int row = 0; row <= E; ++row) {
            // Transient rows boost their self-transition; the start row,
            // which has no self-column, boosts the first event.
            int boosted_col = row == 0 ? 0 : row - 1;
            for (int col = 0; col <= E; ++col)
                p.gamma[k](row, col) = base + ((col == boosted_col) ? boost : 0.0);
        }
        for (int e = 0; e <= E; ++e) {
            p.rho[k][e] = {1.0 + (k + 1) * tau, 1.0};
            p.eta[k][0][e] = 1.0 + (k + 1) * tau;
            p.eta[k][1][e] = 1.0 + (k + 1) * tau;
        }
    }
    return p;
}

std::pair<Dataset, std::vector<int>> generate_dataset(const MixtureParams& params, int n,
                                                      std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("generate_dataset requires n >= 1");
    Dataset data;
    data.E = params.E;
    data.bounds = params.bounds;
    data.possessions.reserve(n);
    std::vector<int> labels(n);

    Rng label_rng = Rng::stream(seed, 0);
    double ox = 0.5 * (params.bounds.x_min + params.bounds.x_max);
    double oy = 0.5 * (params.bounds.y_min + params.bounds.y_max);
    for (int i = 0; i < n; ++i) {
        labels[i] = 1 + label_rng.next_below(params.K);
        Rng rng = Rng::stream(seed, static_cast<std::uint64_t>(i) + 1);
        Possession poss = sample_possession(params, labels[i] - 1, ox, oy, rng);
        ox = poss.events.back().x;
        oy = poss.events.back().y;
        data.possessions.push_back(std::move(poss));
    }
    return {std::move(data), std::move(labels)};
}

std::pair<Dataset, std::vector<int>> generate_dataset(Scenario scenario, int n,
                                                      std::uint64_t seed) {
    return generate_dataset(scenario_params(scenario_tau(scenario)), n, seed);
}

std::vector<std::string> simulated_event_names(int E) {
    std::vector<std::string> names(E);
    for (int e = 0; e < E; ++e) names[e] = "e" + std::to_string(e + 1);
    return names;
}

std::string to_event_csv(const Dataset& data) {
    std::string out = "possession_id,event_type,time,x,y\n";
    char id[24];
    auto names = simulated_event_names(data.E);
    for (int i = 0; i < data.size(); ++i) {
        const Possession& poss = data.possessions[i];
        std::snprintf(id, sizeof(id), "p%06d", i + 1);
        out += id;
        out += ",start,0,";
        append_num(out, poss.origin_x);
        out += ',';
        append_num(out, poss.origin_y);
        out += '\n';
        for (const EventRecord& ev : poss.events) {
            out += id;
            out += ',';
            out += (ev.mark <= data.E) ? names[ev.mark - 1] : "end";
            out += ',';
            append_num(out, ev.time);
            out += ',';
            append_num(out, ev.x);
            out += ',';
            append_num(out, ev.y);
            out += '\n';
        }
    }
    return out;
}

std::string to_label_csv(const std::vector<int>& labels) {
    std::string out = "possession_id,true_component\n";
    char id[24];
    for (size_t i = 0; i < labels.size(); ++i) {
        std::snprintf(id, sizeof(id), "p%06zu", i + 1);
        out += id;
        out += ',';
        out += std::to_string(labels[i]);
        out += '\n';
    }
    return out;
}

std::string to_vocab_file(int E) {
    std::string out = "start\nend\n";
    for (const auto& name : simulated_event_names(E)) {
        out += name;
        out += '\n';
    }
    return out;
}

}  // namespace possmix
