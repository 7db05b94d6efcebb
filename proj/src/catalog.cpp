#include "stickslip/catalog.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <map>
#include <numeric>
#include <sstream>

#include "detail/text.hpp"
#include "stickslip/error.hpp"

namespace stickslip {

using nlohmann::json;

std::string to_string(CatalogMode mode) { return mode == CatalogMode::dynamic ? "dynamic" : "ofc"; }

CatalogMode parse_catalog_mode(const std::string &text) {
  if (text == "dynamic") return CatalogMode::dynamic;
  if (text == "ofc") return CatalogMode::ofc;
  throw Error(ErrorKind::input_format, "unknown catalog mode '" + text + "'");
}

std::vector<std::uint64_t> EventCatalog::areas() const {
  std::vector<std::uint64_t> out;
  out.reserve(events.size());
  for (const auto &e : events) out.push_back(e.area);
  return out;
}

void EventCatalog::validate() const {
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto &e = events[i];
    auto fail = [&](const std::string &what) {
      throw Error(ErrorKind::input_format, "event " + std::to_string(i) + ": " + what);
    };
    if (e.id != i) fail("ids must be dense and start at 0");
    if (!(e.t_end >= e.t_start)) fail("t_end precedes t_start");
    if (e.area < 1) fail("area must be at least 1");
    if (!(e.moment >= 0.0)) fail("moment must be non-negative");
    if (i > 0 && e.t_start < events[i - 1].t_start) fail("events are not ordered by t_start");
  }
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

using detail::parse_number;

void write_catalog_csv(std::ostream &out, const EventCatalog &catalog) {
  out << "# mode=" << to_string(catalog.mode) << "\n";
  out << "# observation_window=" << format_double(catalog.observation_window) << "\n";
  out << "id,t_start,t_end,area,moment,energy\n";
  for (const auto &e : catalog.events) {
    out << e.id << ',' << format_double(e.t_start) << ',' << format_double(e.t_end) << ',' << e.area << ','
        << format_double(e.moment) << ',' << format_double(e.energy) << '\n';
  }
}

EventCatalog read_catalog_csv(std::istream &in) {
  EventCatalog catalog;
  std::string line;
  std::size_t offset = 0;
  bool header = false;
  bool window_seen = false;
  while (std::getline(in, line)) {
    const std::size_t line_offset = offset;
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      auto key = line.substr(1, eq - 1);
      key.erase(0, key.find_first_not_of(' '));
      const auto value = line.substr(eq + 1);
      if (key == "mode") catalog.mode = parse_catalog_mode(value);
      if (key == "observation_window") {
        catalog.observation_window = parse_number<double>(value, line_offset, "observation_window");
        window_seen = true;
      }
      continue;
    }
    if (!header) {
      if (line != "id,t_start,t_end,area,moment,energy")
        throw FormatError(ErrorKind::input_format, line_offset, "unexpected catalog header '" + line + "'");
      header = true;
      continue;
    }
    const auto cells = detail::split_csv(line);
    if (cells.size() != 6)
      throw FormatError(ErrorKind::input_format, line_offset, "expected 6 fields, found " + std::to_string(cells.size()));
    Avalanche e;
    e.id = parse_number<std::uint64_t>(cells[0], line_offset, "id");
    e.t_start = parse_number<double>(cells[1], line_offset, "t_start");
    e.t_end = parse_number<double>(cells[2], line_offset, "t_end");
    e.area = parse_number<std::uint64_t>(cells[3], line_offset, "area");
    e.moment = parse_number<double>(cells[4], line_offset, "moment");
    e.energy = parse_number<double>(cells[5], line_offset, "energy");
    catalog.events.push_back(e);
  }
  if (!header) throw FormatError(ErrorKind::input_format, offset, "missing catalog header");
  if (!window_seen && !catalog.events.empty()) catalog.observation_window = catalog.events.back().t_end;
  catalog.validate();
  return catalog;
}

std::string catalog_to_json(const EventCatalog &catalog) {
  json events = json::array();
  for (const auto &e : catalog.events) {
    events.push_back({{"id", e.id},
                      {"t_start", e.t_start},
                      {"t_end", e.t_end},
                      {"area", e.area},
                      {"moment", e.moment},
                      {"energy", e.energy}});
  }
  json doc = {{"mode", to_string(catalog.mode)},
              {"observation_window", catalog.observation_window},
              {"events", std::move(events)}};
  return doc.dump();
}

EventCatalog catalog_from_json(const std::string &text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error &e) {
    throw FormatError(ErrorKind::input_format, e.byte, "malformed catalog JSON");
  }
  EventCatalog catalog;
  const json *records = &doc;
  if (doc.is_object()) {
    catalog.mode = parse_catalog_mode(doc.value("mode", std::string("dynamic")));
    catalog.observation_window = doc.value("observation_window", 0.0);
    if (!doc.contains("events")) throw Error(ErrorKind::input_format, "catalog JSON has no 'events' array");
    records = &doc.at("events");
  }
  if (!records->is_array()) throw Error(ErrorKind::input_format, "catalog events must be a JSON array");
  try {
    for (const auto &r : *records) {
      Avalanche e;
      e.id = r.at("id").get<std::uint64_t>();
      e.t_start = r.at("t_start").get<double>();
      e.t_end = r.at("t_end").get<double>();
      e.area = r.at("area").get<std::uint64_t>();
      e.moment = r.at("moment").get<double>();
      e.energy = r.at("energy").get<double>();
      catalog.events.push_back(e);
    }
  } catch (const json::exception &e) {
    throw Error(ErrorKind::input_format, std::string("bad catalog record: ") + e.what());
  }
  if (!doc.is_object() && !catalog.events.empty()) catalog.observation_window = catalog.events.back().t_end;
  catalog.validate();
  return catalog;
}

namespace {

bool ends_with(const std::string &s, const std::string &suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

EventCatalog load_catalog(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::input_format, "cannot open catalog '" + path + "'");
  if (ends_with(path, ".json")) {
    std::stringstream buf;
    buf << in.rdbuf();
    return catalog_from_json(buf.str());
  }
  return read_catalog_csv(in);
}

void save_catalog(const std::string &path, const EventCatalog &catalog) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::input_format, "cannot write catalog '" + path + "'");
  if (ends_with(path, ".json"))
    out << catalog_to_json(catalog) << '\n';
  else
    write_catalog_csv(out, catalog);
}

// ---------------------------------------------------------------------------

namespace {

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

bool four_neighbours(std::size_t a, std::size_t b, std::size_t cols) {
  const std::size_t ra = a / cols, ca = a % cols, rb = b / cols, cb = b % cols;
  return (ra == rb && (ca + 1 == cb || cb + 1 == ca)) || (ca == cb && (ra + 1 == rb || rb + 1 == ra));
}

}  // namespace

EventDetector::EventDetector(DetectionOptions options) : options_(options) {
  if (!(options_.gap > 0.0)) throw Error(ErrorKind::parameter, "event gap must be positive");
  if (options_.adjacency == Adjacency::spatial && options_.cols == 0)
    throw Error(ErrorKind::parameter, "spatial adjacency needs the lattice dimensions");
}

std::optional<std::uint64_t> EventDetector::open_event() const {
  if (burst_.empty()) return std::nullopt;
  return next_id_;
}

std::vector<Avalanche> EventDetector::feed(const SlipRecord &record) {
  if (record.blocks.size() != record.distance.size())
    throw Error(ErrorKind::input_format, "slip record blocks and distances differ in length");
  if (last_time_ && record.time < *last_time_)
    throw Error(ErrorKind::input_format, "slip log timestamps are not monotonic at t=" + format_double(record.time));
  last_time_ = record.time;
  std::vector<Avalanche> out;
  if (!burst_.empty() && record.time - *last_slip_ >= options_.gap) out = close_burst();
  if (!record.blocks.empty()) {
    burst_.push_back(record);
    last_slip_ = record.time;
  }
  return out;
}

std::vector<Avalanche> EventDetector::finish() { return close_burst(); }

std::vector<Avalanche> EventDetector::close_burst() {
  std::vector<Avalanche> out;
  if (burst_.empty()) return out;
  const double released = std::max(0.0, burst_.front().energy_before - burst_.back().energy_after);

  // Nodes are (record, slipping block) pairs.
  std::vector<std::size_t> first_node(burst_.size() + 1, 0);
  for (std::size_t k = 0; k < burst_.size(); ++k) first_node[k + 1] = first_node[k] + burst_[k].blocks.size();
  const std::size_t nodes = first_node.back();
  DisjointSets sets(nodes);
  if (options_.adjacency == Adjacency::temporal) {
    for (std::size_t n = 1; n < nodes; ++n) sets.unite(0, n);
  } else {
    std::map<std::size_t, std::pair<double, std::size_t>> last_seen;  // block -> (time, node)
    for (std::size_t k = 0; k < burst_.size(); ++k) {
      const auto &rec = burst_[k];
      for (std::size_t a = 0; a < rec.blocks.size(); ++a) {
        const std::size_t node = first_node[k] + a;
        for (std::size_t b = 0; b < a; ++b)
          if (four_neighbours(rec.blocks[a], rec.blocks[b], options_.cols)) sets.unite(node, first_node[k] + b);
        // Same block or a neighbour that slipped recently: the slip front
        // moving across the lattice stays one event.
        for (const auto &[block, seen] : last_seen) {
          if (rec.time - seen.first >= options_.gap) continue;
          if (block == rec.blocks[a] || four_neighbours(block, rec.blocks[a], options_.cols))
            sets.unite(node, seen.second);
        }
      }
      for (std::size_t a = 0; a < rec.blocks.size(); ++a) {
        last_seen[rec.blocks[a]] = {rec.time, first_node[k] + a};
      }
    }
  }

  struct Group {
    Avalanche event;
    std::vector<std::size_t> blocks;
    bool seen = false;
  };
  std::map<std::size_t, Group> groups;  // keyed by smallest node, i.e. first appearance
  double total_moment = 0.0;
  for (std::size_t k = 0; k < burst_.size(); ++k) {
    const auto &rec = burst_[k];
    for (std::size_t a = 0; a < rec.blocks.size(); ++a) {
      auto &g = groups[sets.find(first_node[k] + a)];
      if (!g.seen) {
        g.seen = true;
        g.event.t_start = rec.time;
      }
      g.event.t_end = rec.time;
      g.event.moment += rec.distance[a];
      total_moment += rec.distance[a];
      g.blocks.push_back(rec.blocks[a]);
    }
  }
  for (auto &[root, g] : groups) {
    std::sort(g.blocks.begin(), g.blocks.end());
    g.event.area = static_cast<std::uint64_t>(std::unique(g.blocks.begin(), g.blocks.end()) - g.blocks.begin());
    // A burst's released energy is shared between its components by moment.
    g.event.energy = groups.size() == 1 ? released
                     : total_moment > 0.0 ? released * g.event.moment / total_moment
                                          : released / static_cast<double>(groups.size());
    out.push_back(g.event);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Avalanche &a, const Avalanche &b) { return a.t_start < b.t_start; });
  for (auto &e : out) e.id = next_id_++;
  burst_.clear();
  return out;
}

EventCatalog detect_events(const std::vector<SlipRecord> &log, const DetectionOptions &options,
                           double observation_window) {
  EventDetector detector(options);
  EventCatalog catalog;
  catalog.mode = CatalogMode::dynamic;
  catalog.observation_window = observation_window;
  for (const auto &record : log) {
    auto events = detector.feed(record);
    catalog.events.insert(catalog.events.end(), events.begin(), events.end());
  }
  auto tail = detector.finish();
  catalog.events.insert(catalog.events.end(), tail.begin(), tail.end());
  return catalog;
}

}  // namespace stickslip
