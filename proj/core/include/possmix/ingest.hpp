#ifndef POSSMIX_INGEST_HPP_
#define POSSMIX_INGEST_HPP_

#include <string>
#include <vector>

#include "possmix/types.hpp"

namespace possmix {

/// One row of the event CSV before any cleaning. Coordinates may be NaN
/// when the cell was blank (to be forward-filled).
struct RawEventRow {
    std::string possession_id;
    std::string event_type;
    double time = 0.0;
    double x = 0.0;
    double y = 0.0;
    int line = 0;  // 1-based line number in the source file
};

/// Event-type vocabulary: the reserved start/end names plus the ordered
/// transient names, whose position defines the mark indices 1..E.
struct EventVocabulary {
    std::string start_name;
    std::string end_name;
    std::vector<std::string> transient;

    int E() const { return static_cast<int>(transient.size()); }
    /// 0 for start, E+1 for end, 1..E for transient names; -1 if unknown.
    int index_of(const std::string& name) const;
};

/// Parses a vocabulary file: first line start name, second line end name,
/// then one transient name per line.
EventVocabulary parse_vocabulary(const std::string& text);

/// Parses the event CSV (header possession_id,event_type,time,x,y).
/// Blank x/y cells become NaN. Throws with the line number on malformed
/// rows.
std::vector<RawEventRow> parse_events(const std::string& text);

struct CleaningReport {
    int input_possessions = 0;
    int retained = 0;
    int dropped_missing_start = 0;
    int dropped_missing_end = 0;
    int dropped_extra_start = 0;
    int dropped_mid_absorbing = 0;
    int dropped_missing_coordinates = 0;
    int dropped_velocity = 0;
    long clamped_dt = 0;
    long projected_coords = 0;
    long imputed_coords = 0;
    double velocity_threshold = 0.0;  // m/s; 0 when the filter is off
    std::string to_json() const;
};

struct IngestOptions {
    double clamp_dt = 0.01;          // seconds added to break ties
    double velocity_percentile = 98; // nearest-rank; >= 100 disables the filter
    bool impute_coordinates = true;  // forward-fill blank x/y cells
};

struct IngestResult {
    Dataset data;
    std::vector<std::string> possession_ids;  // aligned with data.possessions
    CleaningReport report;
};

/// Groups rows into possessions, maps event names to mark indices, clamps
/// non-increasing times, projects coordinates onto the pitch, and applies
/// the structural and velocity drop rules. Throws on unknown event types.
IngestResult build_possessions(const std::vector<RawEventRow>& rows,
                               const EventVocabulary& vocab, const PitchBounds& bounds,
                               const IngestOptions& options = {});

}  // namespace possmix

#endif  // POSSMIX_INGEST_HPP_
