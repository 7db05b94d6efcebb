#include "stickslip/config.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "stickslip/error.hpp"

namespace stickslip {

using nlohmann::json;

Adjacency parse_adjacency(const std::string &text) {
  if (text == "temporal") return Adjacency::temporal;
  if (text == "spatial") return Adjacency::spatial;
  throw Error(ErrorKind::config, "unknown adjacency '" + text + "'");
}

const char *to_string(Adjacency adjacency) { return adjacency == Adjacency::temporal ? "temporal" : "spatial"; }

void ServiceConfig::validate() const {
  auto fail = [](const std::string &what) { throw Error(ErrorKind::config, "service: " + what); };
  if (!(max_speed > 0.0)) fail("max_speed must be positive");
  if (!(max_angular_speed > 0.0)) fail("max_angular_speed must be positive");
  if (!(max_nudge > 0.0)) fail("max_nudge must be positive");
  if (!(max_nudge_angle > 0.0)) fail("max_nudge_angle must be positive");
  if (!(quiescence_s > 0.0)) fail("quiescence_s must be positive");
  if (!(shuffle_interval_s > 0.0)) fail("shuffle_interval_s must be positive");
  if (montage_pairs == 0) fail("montage_pairs must be at least 1");
  if (!(stream_hz > 0.0)) fail("stream_hz must be positive");
  if (max_message_bytes < 64) fail("max_message_bytes must be at least 64");
}

void DriveConfig::validate() const {
  if (!std::isfinite(velocity.x) || !std::isfinite(velocity.y) || !std::isfinite(angular_velocity))
    throw Error(ErrorKind::config, "drive: velocities must be finite");
  if (!(jitter >= 0.0)) throw Error(ErrorKind::config, "drive: jitter must be non-negative");
}

void Settings::validate() const {
  lattice.validate();
  if (!(ofc.alpha >= 0.0 && ofc.alpha <= 0.25))
    throw Error(ErrorKind::config, "ofc: alpha must lie in [0, 0.25], got " + format_double(ofc.alpha));
  if (ofc.rows == 0 || ofc.cols == 0) throw Error(ErrorKind::config, "ofc: grid must be non-empty");
  if (!(ofc.topple_time > 0.0) || !(ofc.loading_time >= 0.0))
    throw Error(ErrorKind::config, "ofc: topple_time must be positive and loading_time non-negative");
  sonifier.validate();
  aesthetics.validate();
  service.validate();
  if (!(events.gap > 0.0)) throw Error(ErrorKind::config, "events: gap must be positive");
  drive.validate();
}

namespace {

class Section {
 public:
  Section(const json &doc, std::string name) : name_(std::move(name)) {
    if (!doc.contains(name_)) return;
    obj_ = &doc.at(name_);
    if (!obj_->is_object()) throw Error(ErrorKind::config, "settings: '" + name_ + "' must be an object");
  }

  template <typename T>
  void get(const char *key, T &out) {
    if (!obj_ || !obj_->contains(key)) return;
    seen_.insert(key);
    try {
      out = obj_->at(key).get<T>();
    } catch (const json::exception &) {
      throw Error(ErrorKind::config, "settings: " + name_ + "." + key + " has the wrong type");
    }
  }

  void get_vec(const char *key, Vec2 &out) {
    std::vector<double> v;
    get(key, v);
    if (!obj_ || !obj_->contains(key)) return;
    if (v.size() != 2) throw Error(ErrorKind::config, "settings: " + name_ + "." + key + " must be [x, y]");
    out = {v[0], v[1]};
  }

  template <typename E, typename Parse>
  void get_enum(const char *key, E &out, Parse parse) {
    std::string text;
    get(key, text);
    if (obj_ && obj_->contains(key)) {
      try {
        out = parse(text);
      } catch (const Error &e) {
        throw Error(ErrorKind::config, "settings: " + name_ + "." + key + ": " + e.what());
      }
    }
  }

  void finish() const {
    if (!obj_) return;
    for (const auto &[key, value] : obj_->items())
      if (!seen_.count(key)) throw Error(ErrorKind::config, "settings: unknown key " + name_ + "." + key);
  }

 private:
  std::string name_;
  const json *obj_ = nullptr;
  std::set<std::string> seen_;
};

}  // namespace

Settings settings_from_json(const std::string &text, const Settings &base) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error &e) {
    throw Error(ErrorKind::config, "settings are not valid JSON at byte " + std::to_string(e.byte));
  }
  if (!doc.is_object()) throw Error(ErrorKind::config, "settings must be a JSON object");
  static const std::set<std::string> sections = {"lattice", "ofc",    "sonifier", "aesthetics",
                                                 "service", "events", "drive",    "seed"};
  for (const auto &[key, value] : doc.items())
    if (!sections.count(key)) throw Error(ErrorKind::config, "settings: unknown section '" + key + "'");

  Settings s = base;
  {
    Section sec(doc, "lattice");
    auto &l = s.lattice;
    sec.get("rows", l.rows);
    sec.get("cols", l.cols);
    sec.get("coupling_stiffness", l.coupling_stiffness);
    sec.get("loading_stiffness", l.loading_stiffness);
    sec.get("block_mass", l.block_mass);
    sec.get("static_threshold", l.static_threshold);
    sec.get("kinetic_friction", l.kinetic_friction);
    sec.get("stick_speed", l.stick_speed);
    sec.get("timestep", l.timestep);
    sec.get_enum("coupling_mode", l.coupling_mode, parse_coupling_mode);
    sec.get_enum("boundary", l.boundary, parse_boundary);
    sec.get("rest_spacing", l.rest_spacing);
    std::vector<double> table;
    sec.get("table_bounds", table);
    if (!table.empty()) {
      if (table.size() != 4) throw Error(ErrorKind::config, "settings: lattice.table_bounds must be [x0, y0, x1, y1]");
      l.table_bounds = {table[0], table[1], table[2], table[3]};
    }
    sec.finish();
  }
  {
    Section sec(doc, "ofc");
    auto &o = s.ofc;
    sec.get("rows", o.rows);
    sec.get("cols", o.cols);
    sec.get("alpha", o.alpha);
    sec.get("burn_in", o.burn_in);
    sec.get("events", o.events);
    sec.get("max_sweeps", o.max_sweeps);
    sec.get("topple_time", o.topple_time);
    sec.get("loading_time", o.loading_time);
    sec.finish();
  }
  {
    Section sec(doc, "sonifier");
    auto &c = s.sonifier;
    sec.get("grain_ms", c.grain_ms);
    sec.get("hop_ms", c.hop_ms);
    sec.get_enum("layout", c.layout, parse_layout_mode);
    sec.get("radius", c.radius);
    sec.get("refractory_s", c.refractory_s);
    sec.get("v_ref", c.v_ref);
    sec.get("limiter_knee", c.limiter_knee);
    sec.get("output_rate", c.output_rate);
    sec.finish();
  }
  {
    Section sec(doc, "aesthetics");
    sec.get("lit_threshold", s.aesthetics.lit_threshold);
    sec.get("decay_per_tick", s.aesthetics.decay_per_tick);
    sec.finish();
  }
  {
    Section sec(doc, "service");
    auto &c = s.service;
    sec.get("max_speed", c.max_speed);
    sec.get("max_angular_speed", c.max_angular_speed);
    sec.get("max_nudge", c.max_nudge);
    sec.get("max_nudge_angle", c.max_nudge_angle);
    sec.get("quiescence_s", c.quiescence_s);
    sec.get("shuffle_interval_s", c.shuffle_interval_s);
    sec.get("montage_pairs", c.montage_pairs);
    sec.get("stream_hz", c.stream_hz);
    sec.get("max_message_bytes", c.max_message_bytes);
    sec.get("port", c.port);
    sec.finish();
  }
  {
    Section sec(doc, "events");
    sec.get("gap", s.events.gap);
    sec.get_enum("adjacency", s.events.adjacency, parse_adjacency);
    sec.finish();
  }
  {
    Section sec(doc, "drive");
    sec.get_vec("velocity", s.drive.velocity);
    sec.get("angular_velocity", s.drive.angular_velocity);
    sec.get("jitter", s.drive.jitter);
    sec.finish();
  }
  if (doc.contains("seed")) {
    try {
      s.seed = doc.at("seed").get<std::uint64_t>();
    } catch (const json::exception &) {
      throw Error(ErrorKind::config, "settings: seed must be a non-negative integer");
    }
  }
  s.events.rows = s.lattice.rows;
  s.events.cols = s.lattice.cols;
  return s;
}

Settings load_settings(const std::string &path, const Settings &base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::config, "cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return settings_from_json(buf.str(), base);
}

std::string settings_to_json(const Settings &s) {
  const auto &l = s.lattice;
  const auto &t = l.table_bounds;
  json doc = {
      {"lattice",
       {{"rows", l.rows},
        {"cols", l.cols},
        {"coupling_stiffness", l.coupling_stiffness},
        {"loading_stiffness", l.loading_stiffness},
        {"block_mass", l.block_mass},
        {"static_threshold", l.static_threshold},
        {"kinetic_friction", l.kinetic_friction},
        {"stick_speed", l.stick_speed},
        {"timestep", l.timestep},
        {"coupling_mode", to_string(l.coupling_mode)},
        {"boundary", to_string(l.boundary)},
        {"rest_spacing", l.rest_spacing},
        {"table_bounds", {t.min_x, t.min_y, t.max_x, t.max_y}}}},
      {"ofc",
       {{"rows", s.ofc.rows},
        {"cols", s.ofc.cols},
        {"alpha", s.ofc.alpha},
        {"burn_in", s.ofc.burn_in},
        {"events", s.ofc.events},
        {"max_sweeps", s.ofc.max_sweeps},
        {"topple_time", s.ofc.topple_time},
        {"loading_time", s.ofc.loading_time}}},
      {"sonifier",
       {{"grain_ms", s.sonifier.grain_ms},
        {"hop_ms", s.sonifier.hop_ms},
        {"layout", to_string(s.sonifier.layout)},
        {"radius", s.sonifier.radius},
        {"refractory_s", s.sonifier.refractory_s},
        {"v_ref", s.sonifier.v_ref},
        {"limiter_knee", s.sonifier.limiter_knee},
        {"output_rate", s.sonifier.output_rate}}},
      {"aesthetics",
       {{"lit_threshold", s.aesthetics.lit_threshold}, {"decay_per_tick", s.aesthetics.decay_per_tick}}},
      {"service",
       {{"max_speed", s.service.max_speed},
        {"max_angular_speed", s.service.max_angular_speed},
        {"max_nudge", s.service.max_nudge},
        {"max_nudge_angle", s.service.max_nudge_angle},
        {"quiescence_s", s.service.quiescence_s},
        {"shuffle_interval_s", s.service.shuffle_interval_s},
        {"montage_pairs", s.service.montage_pairs},
        {"stream_hz", s.service.stream_hz},
        {"max_message_bytes", s.service.max_message_bytes},
        {"port", s.service.port}}},
      {"events", {{"gap", s.events.gap}, {"adjacency", to_string(s.events.adjacency)}}},
      {"drive",
       {{"velocity", {s.drive.velocity.x, s.drive.velocity.y}},
        {"angular_velocity", s.drive.angular_velocity},
        {"jitter", s.drive.jitter}}},
      {"seed", s.seed},
  };
  return doc.dump(2);
}

}  // namespace stickslip
