#include "possmix/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace possmix {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cell);
            cell.clear();
        } else if (c != '\r') {
            cell += c;
        }
    }
    cells.push_back(cell);
    return cells;
}

double parse_number(const std::string& cell, int line, const char* what, bool allow_blank) {
    if (cell.empty()) {
        if (allow_blank) return std::numeric_limits<double>::quiet_NaN();
        throw std::runtime_error("line " + std::to_string(line) + ": empty " + what + " cell");
    }
    char* end = nullptr;
    double v = std::strtod(cell.c_str(), &end);
    if (end != cell.c_str() + cell.size())
        throw std::runtime_error("line " + std::to_string(line) + ": non-numeric " + what +
                                 " value '" + cell + "'");
    return v;
}

}  // namespace

int EventVocabulary::index_of(const std::string& name) const {
    if (name == start_name) return 0;
    if (name == end_name) return E() + 1;
    for (int e = 0; e < E(); ++e)
        if (transient[e] == name) return e + 1;
    return -1;
}

EventVocabulary parse_vocabulary(const std::string& text) {
    EventVocabulary vocab;
    std::vector<std::string> lines;
    std::string line;
    for (char c : text) {
        if (c == '\n') {
            lines.push_back(line);
            line.clear();
        } else if (c != '\r') {
            line += c;
        }
    }
    if (!line.empty()) lines.push_back(line);
    while (!lines.empty() && lines.back().empty()) lines.pop_back();
    if (lines.size() < 3)
        throw std::runtime_error(
            "vocabulary needs the start name, the end name, and at least one transient event");
    vocab.start_name = lines[0];
    vocab.end_name = lines[1];
    vocab.transient.assign(lines.begin() + 2, lines.end());
    for (size_t i = 0; i < vocab.transient.size(); ++i) {
        const std::string& name = vocab.transient[i];
        if (name.empty()) throw std::runtime_error("vocabulary has an empty transient name");
        if (name == vocab.start_name || name == vocab.end_name)
            throw std::runtime_error("transient event name '" + name +
                                     "' collides with a reserved name");
        for (size_t j = i + 1; j < vocab.transient.size(); ++j)
            if (vocab.transient[j] == name)
                throw std::runtime_error("duplicate event name '" + name + "' in vocabulary");
    }
    if (vocab.start_name == vocab.end_name)
        throw std::runtime_error("start and end names must differ");
    return vocab;
}

std::vector<RawEventRow> parse_events(const std::string& text) {
    std::vector<RawEventRow> rows;
    size_t pos = 0;
    int line_no = 0;
    bool header_seen = false;
    while (pos < text.size()) {
        size_t eol = text.find('\n', pos);
        if (eol == std::string::npos) eol = text.size();
        std::string line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto cells = split_csv_line(line);
        if (!header_seen) {
            if (cells.size() != 5 || cells[0] != "possession_id" || cells[1] != "event_type" ||
                cells[2] != "time" || cells[3] != "x" || cells[4] != "y")
                throw std::runtime_error(
                    "line 1: expected header possession_id,event_type,time,x,y");
            header_seen = true;
            continue;
        }
        if (cells.size() != 5)
            throw std::runtime_error("line " + std::to_string(line_no) + ": expected 5 cells, got " +
                                     std::to_string(cells.size()));
        RawEventRow row;
        row.possession_id = cells[0];
        row.event_type = cells[1];
        row.time = parse_number(cells[2], line_no, "time", false);
        row.x = parse_number(cells[3], line_no, "x", true);
        row.y = parse_number(cells[4], line_no, "y", true);
        row.line = line_no;
        if (row.possession_id.empty())
            throw std::runtime_error("line " + std::to_string(line_no) + ": empty possession_id");
        if (row.event_type.empty())
            throw std::runtime_error("line " + std::to_string(line_no) + ": empty event_type");
        if (!std::isfinite(row.time))
            throw std::runtime_error("line " + std::to_string(line_no) + ": non-finite time");
        rows.push_back(std::move(row));
    }
    if (!header_seen) throw std::runtime_error("event file is empty");
    return rows;
}

std::string CleaningReport::to_json() const {
    char buf[64];
    std::string out = "{";
    auto add_int = [&out](const char* name, long v, bool first = false) {
        if (!first) out += ", ";
        out += '"';
        out += name;
        out += "\": ";
        out += std::to_string(v);
    };
    add_int("input_possessions", input_possessions, true);
    add_int("retained", retained);
    out += ", \"drops\": {";
    add_int("missing_start", dropped_missing_start, true);
    add_int("missing_end", dropped_missing_end);
    add_int("extra_start", dropped_extra_start);
    add_int("mid_absorbing", dropped_mid_absorbing);
    add_int("missing_coordinates", dropped_missing_coordinates);
    add_int("velocity", dropped_velocity);
    out += "}";
    add_int("clamped_dt", clamped_dt);
    add_int("projected_coords", projected_coords);
    add_int("imputed_coords", imputed_coords);
    std::snprintf(buf, sizeof(buf), ", \"velocity_threshold\": %.17g", velocity_threshold);
    out += buf;
    out += "}\n";
    return out;
}

IngestResult build_possessions(const std::vector<RawEventRow>& rows, const EventVocabulary& vocab,
                               const PitchBounds& bounds, const IngestOptions& options) {
    const int E = vocab.E();
    IngestResult out;
    out.data.E = E;
    out.data.bounds = bounds;
    CleaningReport& report = out.report;

    // Group rows by possession id, keeping first-appearance order.
    std::vector<std::string> ids;
    std::vector<std::vector<const RawEventRow*>> groups;
    {
        std::unordered_map<std::string, int> seen;  // id -> group index
        for (const RawEventRow& row : rows) {
            auto [it, inserted] = seen.emplace(row.possession_id, static_cast<int>(groups.size()));
            if (inserted) {
                ids.push_back(row.possession_id);
                groups.emplace_back();
            }
            groups[it->second].push_back(&row);
        }
    }
    report.input_possessions = static_cast<int>(groups.size());

    struct Candidate {
        std::string id;
        Possession poss;
        double max_speed = 0.0;
        std::vector<double> speeds;
    };
    std::vector<Candidate> candidates;

    for (size_t g = 0; g < groups.size(); ++g) {
        auto& grp = groups[g];
        std::stable_sort(grp.begin(), grp.end(),
                         [](const RawEventRow* a, const RawEventRow* b) { return a->time < b->time; });

        // Map names to marks and locate the structural start/end events.
        std::vector<int> marks(grp.size());
        int n_start = 0, n_end = 0;
        for (size_t j = 0; j < grp.size(); ++j) {
            marks[j] = vocab.index_of(grp[j]->event_type);
            if (marks[j] < 0)
                throw std::runtime_error("unknown event type '" + grp[j]->event_type +
                                         "' at line " + std::to_string(grp[j]->line));
            n_start += marks[j] == 0;
            n_end += marks[j] == E + 1;
        }
        if (n_start == 0) {
            ++report.dropped_missing_start;
            continue;
        }
        if (n_end == 0) {
            ++report.dropped_missing_end;
            continue;
        }
        if (n_start > 1 || marks.front() != 0) {
            ++report.dropped_extra_start;
            continue;
        }
        if (n_end > 1 || marks.back() != E + 1) {
            ++report.dropped_mid_absorbing;
            continue;
        }

        // Coordinates: forward-fill blanks, then project onto the pitch.
        double fill_x = std::numeric_limits<double>::quiet_NaN();
        double fill_y = fill_x;
        bool coords_ok = true;
        std::vector<double> xs(grp.size()), ys(grp.size());
        for (size_t j = 0; j < grp.size(); ++j) {
            double x = grp[j]->x, y = grp[j]->y;
            if (options.impute_coordinates) {
                if (std::isnan(x) && !std::isnan(fill_x)) {
                    x = fill_x;
                    ++report.imputed_coords;
                }
                if (std::isnan(y) && !std::isnan(fill_y)) {
                    y = fill_y;
                    ++report.imputed_coords;
                }
            }
            if (std::isnan(x) || std::isnan(y)) {
                coords_ok = false;
                break;
            }
            double px = std::clamp(x, bounds.x_min, bounds.x_max);
            double py = std::clamp(y, bounds.y_min, bounds.y_max);
            if (px != x || py != y) ++report.projected_coords;
            xs[j] = px;
            ys[j] = py;
            fill_x = x;
            fill_y = y;
        }
        if (!coords_ok) {
            ++report.dropped_missing_coordinates;
            continue;
        }

        // Times relative to the start row, with non-positive gaps clamped by
        // minimally shifting later events.
        Candidate cand;
        cand.id = ids[g];
        cand.poss.origin_x = xs[0];
        cand.poss.origin_y = ys[0];
        const double t0 = grp[0]->time;
        double prev_t = 0.0;
        double prev_x = xs[0], prev_y = ys[0];
        for (size_t j = 1; j < grp.size(); ++j) {
            double t = grp[j]->time - t0;
            if (!(t > prev_t)) {
                t = prev_t + options.clamp_dt;
                ++report.clamped_dt;
            }
            double dt = t - prev_t;
            double speed = std::hypot(xs[j] - prev_x, ys[j] - prev_y) / dt;
            cand.speeds.push_back(speed);
            cand.max_speed = std::max(cand.max_speed, speed);
            cand.poss.events.push_back({marks[j], t, xs[j], ys[j]});
            prev_t = t;
            prev_x = xs[j];
            prev_y = ys[j];
        }
        candidates.push_back(std::move(cand));
    }

    // Velocity rule: nearest-rank percentile over every retained inter-event
    // speed; possessions whose fastest displacement exceeds it are dropped.
    const bool filter_on = options.velocity_percentile < 100.0;
    double threshold = std::numeric_limits<double>::infinity();
    if (filter_on && !candidates.empty()) {
        std::vector<double> all_speeds;
        for (const auto& cand : candidates)
            all_speeds.insert(all_speeds.end(), cand.speeds.begin(), cand.speeds.end());
        if (!all_speeds.empty()) {
            std::sort(all_speeds.begin(), all_speeds.end());
            size_t rank = static_cast<size_t>(
                std::ceil(options.velocity_percentile / 100.0 * all_speeds.size()));
            rank = std::clamp<size_t>(rank, 1, all_speeds.size());
            threshold = all_speeds[rank - 1];
            report.velocity_threshold = threshold;
        }
    }

    for (auto& cand : candidates) {
        if (filter_on && cand.max_speed > threshold) {
            ++report.dropped_velocity;
            continue;
        }
        out.possession_ids.push_back(std::move(cand.id));
        out.data.possessions.push_back(std::move(cand.poss));
    }
    report.retained = static_cast<int>(out.data.possessions.size());
    return out;
}

}  // namespace possmix
