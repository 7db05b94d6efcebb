#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace stickslip {

enum class CatalogMode { dynamic, ofc };

std::string to_string(CatalogMode mode);
CatalogMode parse_catalog_mode(const std::string &text);

/// One rupture event. In OFC mode `energy` is the topple count and `moment`
/// the total stress released; in dynamic mode `moment` is the summed slip
/// distance (m) and `energy` the spring potential released (J).
struct Avalanche {
  std::uint64_t id = 0;
  double t_start = 0.0;
  double t_end = 0.0;
  std::uint64_t area = 1;
  double moment = 0.0;
  double energy = 0.0;

  friend bool operator==(const Avalanche &, const Avalanche &) = default;
};

struct EventCatalog {
  std::vector<Avalanche> events;
  double observation_window = 0.0;  // seconds (loading units in OFC mode)
  CatalogMode mode = CatalogMode::dynamic;

  bool empty() const { return events.empty(); }
  std::size_t size() const { return events.size(); }
  std::vector<std::uint64_t> areas() const;

  /// Throws Error(input_format) if ids are not dense from 0, events are not
  /// ordered by start time, or a record breaks the Avalanche invariants.
  void validate() const;

  friend bool operator==(const EventCatalog &, const EventCatalog &) = default;
};

// CSV: header `id,t_start,t_end,area,moment,energy`, preceded by comment
// lines `# mode=<mode>` and `# observation_window=<seconds>`.
void write_catalog_csv(std::ostream &out, const EventCatalog &catalog);
EventCatalog read_catalog_csv(std::istream &in);

// JSON: {"mode": ..., "observation_window": ..., "events": [{...}, ...]}.
// A bare JSON array of records is also accepted on input.
std::string catalog_to_json(const EventCatalog &catalog);
EventCatalog catalog_from_json(const std::string &text);

/// Reads .csv or .json depending on the extension.
EventCatalog load_catalog(const std::string &path);
void save_catalog(const std::string &path, const EventCatalog &catalog);

/// Shortest decimal form that round-trips a double exactly.
std::string format_double(double value);

// ---------------------------------------------------------------------------
// Event detection from the dynamic model's slip log.

/// Slips recorded during one integration step.
struct SlipRecord {
  double time = 0.0;
  std::vector<std::size_t> blocks;  // row-major indices of slipping blocks
  std::vector<double> distance;     // |displacement| of each slipping block this step
  double energy_before = 0.0;       // spring potential at the start of the step
  double energy_after = 0.0;
};

enum class Adjacency {
  temporal,  // every slip inside a burst belongs to the same event
  spatial,   // a burst splits into 4-neighbour/same-block connected components
};

struct DetectionOptions {
  double gap = 0.25;  // quiescence (s) that separates two bursts
  Adjacency adjacency = Adjacency::temporal;
  std::size_t rows = 0;
  std::size_t cols = 0;
};

/// Incremental detector: feed slip records in time order, collect events as
/// their bursts close.
class EventDetector {
 public:
  explicit EventDetector(DetectionOptions options);

  /// Records with an empty block list only advance the clock.
  std::vector<Avalanche> feed(const SlipRecord &record);
  std::vector<Avalanche> finish();

  /// Id the currently open burst will receive, if a burst is open.
  std::optional<std::uint64_t> open_event() const;
  std::uint64_t emitted() const { return next_id_; }

 private:
  std::vector<Avalanche> close_burst();

  DetectionOptions options_;
  std::vector<SlipRecord> burst_;
  std::optional<double> last_time_;
  std::optional<double> last_slip_;
  std::uint64_t next_id_ = 0;
};

/// Batch grouping of a time-ordered slip log. Throws Error(input_format) on
/// non-monotonic timestamps.
EventCatalog detect_events(const std::vector<SlipRecord> &log, const DetectionOptions &options,
                           double observation_window);

}  // namespace stickslip
