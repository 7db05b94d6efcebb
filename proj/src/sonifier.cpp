#include "stickslip/sonifier.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numeric>
#include <ostream>

#include "detail/text.hpp"
#include "stickslip/catalog.hpp"
#include "stickslip/error.hpp"
#include "stickslip/fft.hpp"
#include "stickslip/rng.hpp"

namespace stickslip {

using nlohmann::json;

const char *to_string(LayoutMode mode) { return mode == LayoutMode::rank ? "rank" : "min_max"; }

LayoutMode parse_layout_mode(const std::string &text) {
  if (text == "rank") return LayoutMode::rank;
  if (text == "min_max" || text == "minmax") return LayoutMode::min_max;
  throw Error(ErrorKind::config, "unknown layout mode '" + text + "'");
}

void SonifierConfig::validate() const {
  auto fail = [](const std::string &what) { throw Error(ErrorKind::config, "sonifier: " + what); };
  if (!(grain_ms >= 10.0)) fail("grain_ms must be >= 10");
  if (!(hop_ms >= 1.0)) fail("hop_ms must be >= 1");
  if (!(radius > 0.0)) fail("radius must be positive");
  if (!(refractory_s >= 0.0)) fail("refractory_s must be non-negative");
  if (!(v_ref > 0.0)) fail("v_ref must be positive");
  if (!(limiter_knee > 0.0 && limiter_knee < 1.0)) fail("limiter_knee must lie in (0, 1)");
  if (output_rate == 0) fail("output_rate must be positive");
}

void GrainCorpus::validate() const {
  if (grains.empty()) throw Error(ErrorKind::config, "corpus has no grains");
  for (std::size_t i = 0; i < grains.size(); ++i) {
    const auto &g = grains[i];
    if (g.length == 0) throw Error(ErrorKind::config, "grain " + std::to_string(i) + " is empty");
    if (g.source_offset + g.length > samples.size())
      throw Error(ErrorKind::config, "grain " + std::to_string(i) + " lies outside the sample buffer");
  }
}

std::vector<GrainWindow> segment_grains(std::size_t sample_count, std::uint32_t sample_rate, double grain_ms,
                                        double hop_ms) {
  if (!(grain_ms >= 10.0)) throw Error(ErrorKind::parameter, "grain_ms must be >= 10");
  if (!(hop_ms >= 1.0)) throw Error(ErrorKind::parameter, "hop_ms must be >= 1");
  const auto grain = static_cast<std::size_t>(std::lround(grain_ms * sample_rate / 1000.0));
  const auto hop = static_cast<std::size_t>(std::lround(hop_ms * sample_rate / 1000.0));
  if (grain == 0 || hop == 0) throw Error(ErrorKind::parameter, "grain or hop rounds to zero samples");
  if (sample_count < grain)
    throw Error(ErrorKind::input_format, "audio (" + std::to_string(sample_count) + " samples) is shorter than one grain (" +
                                             std::to_string(grain) + " samples)");
  const std::size_t count = (sample_count - grain) / hop + 1;
  std::vector<GrainWindow> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = {i * hop, grain};
  return out;
}

double descriptor_centroid(std::span<const double> window, double sample_rate) {
  const std::size_t n = window.size();
  if (n < 2) return 0.0;
  const auto w = hann_window_periodic(n);
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = window[i] * w[i];
  RealFft fft(n);
  const auto bins = fft.forward(x);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t k = 1; k < bins.size(); ++k) {
    const double mag = std::abs(bins[k]);
    num += static_cast<double>(k) * sample_rate / static_cast<double>(n) * mag;
    den += mag;
  }
  return den > 0.0 ? num / den : 0.0;
}

double descriptor_periodicity(std::span<const double> window, double sample_rate) {
  const std::size_t n = window.size();
  if (n < 2) return 0.0;
  const auto lo = static_cast<std::size_t>(std::ceil(0.002 * sample_rate));
  const auto hi = std::min(static_cast<std::size_t>(std::floor(0.05 * sample_rate)), n - 1);
  if (lo > hi) return 0.0;
  const auto r = autocorrelation(window, hi);
  if (!(r[0] > 0.0)) return 0.0;
  double best = 0.0;
  for (std::size_t k = lo; k <= hi; ++k) best = std::max(best, r[k] / r[0]);
  return std::clamp(best, 0.0, 1.0);
}

namespace {

std::vector<double> normalise(const std::vector<double> &values, LayoutMode mode) {
  const std::size_t n = values.size();
  std::vector<double> out(n, 0.5);
  if (n < 2) return out;
  if (mode == LayoutMode::rank) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    for (std::size_t r = 0; r < n; ++r) out[order[r]] = static_cast<double>(r) / static_cast<double>(n - 1);
    return out;
  }
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double span = *hi - *lo;
  if (!(span > 0.0)) return out;
  for (std::size_t i = 0; i < n; ++i) out[i] = (values[i] - *lo) / span;
  return out;
}

}  // namespace

void layout_descriptor_space(GrainCorpus &corpus, LayoutMode mode) {
  std::vector<double> centroids;
  std::vector<double> periodicities;
  for (const auto &g : corpus.grains) {
    centroids.push_back(g.centroid);
    periodicities.push_back(g.periodicity);
  }
  const auto xs = normalise(centroids, mode);
  const auto ys = normalise(periodicities, mode);
  for (std::size_t i = 0; i < corpus.grains.size(); ++i) {
    auto &g = corpus.grains[i];
    g.position = g.manual_override ? *g.manual_override : Vec2{xs[i], ys[i]};
  }
}

GrainCorpus build_corpus(const MonoAudio &audio, const std::string &source_name, const SonifierConfig &config) {
  config.validate();
  GrainCorpus corpus;
  const MonoAudio mono = audio.sample_rate == config.output_rate ? audio : resample(audio, config.output_rate);
  corpus.sample_rate = mono.sample_rate;
  corpus.samples = mono.samples;
  corpus.source_name = source_name;
  for (const auto &w : segment_grains(corpus.samples.size(), corpus.sample_rate, config.grain_ms, config.hop_ms)) {
    Grain g;
    g.source_offset = w.offset;
    g.length = w.length;
    const auto span = std::span<const double>(corpus.samples).subspan(w.offset, w.length);
    g.centroid = descriptor_centroid(span, corpus.sample_rate);
    g.periodicity = descriptor_periodicity(span, corpus.sample_rate);
    corpus.grains.push_back(g);
  }
  layout_descriptor_space(corpus, config.layout);
  return corpus;
}

Vec2 map_block_to_descriptor(Vec2 position, const Rect &table) {
  if (!(table.width() > 0.0 && table.height() > 0.0)) throw Error(ErrorKind::parameter, "degenerate table bounds");
  return {std::clamp((position.x - table.min_x) / table.width(), 0.0, 1.0),
          std::clamp((position.y - table.min_y) / table.height(), 0.0, 1.0)};
}

double column_pan(std::size_t col, std::size_t cols) {
  if (cols < 2) return 0.0;
  return -1.0 + 2.0 * static_cast<double>(col) / static_cast<double>(cols - 1);
}

TriggerEngine::TriggerEngine(double radius, double refractory_s, double v_ref, std::size_t cols)
    : radius_(radius), refractory_(refractory_s), v_ref_(v_ref), cols_(cols) {
  if (!(radius > 0.0)) throw Error(ErrorKind::parameter, "trigger radius must be positive");
  if (!(v_ref > 0.0)) throw Error(ErrorKind::parameter, "v_ref must be positive");
}

std::vector<TriggerEvent> TriggerEngine::trigger(const GrainCorpus &corpus, std::span<const BlockProbe> blocks,
                                                 double now) {
  std::vector<TriggerEvent> out;
  for (const auto &b : blocks) {
    if (!b.slipping) continue;
    std::size_t best = corpus.grains.size();
    double best_d2 = radius_ * radius_;
    for (std::size_t g = 0; g < corpus.grains.size(); ++g) {
      const double d2 = norm_squared(corpus.grains[g].position - b.descriptor);
      if (d2 < best_d2 || (d2 == best_d2 && best == corpus.grains.size())) {
        best = g;
        best_d2 = d2;
      }
    }
    if (best == corpus.grains.size()) continue;
    const std::pair key{b.row * cols_ + b.col, best};
    if (const auto it = last_fired_.find(key); it != last_fired_.end() && now - it->second < refractory_) continue;
    last_fired_[key] = now;
    const double gain = std::min(1.0, b.speed / v_ref_);
    if (!(gain > 0.0)) continue;
    out.push_back({now, b.row, b.col, best, gain, column_pan(b.col, cols_)});
  }
  return out;
}

double soft_limit(double x, double knee) {
  const double a = std::abs(x);
  if (a <= knee) return x;
  const double room = 1.0 - knee;
  return std::copysign(knee + room * std::tanh((a - knee) / room), x);
}

StereoAudio render(std::span<const TriggerEvent> events, const GrainCorpus &corpus, double duration,
                   const RenderOptions &options) {
  if (!(duration >= 0.0)) throw Error(ErrorKind::parameter, "render duration must be non-negative");
  StereoAudio out;
  out.sample_rate = corpus.sample_rate;
  const auto frames = static_cast<std::size_t>(std::lround(duration * corpus.sample_rate));
  out.left.assign(frames, 0.0);
  out.right.assign(frames, 0.0);
  std::map<std::size_t, std::vector<double>> envelopes;
  for (const auto &e : events) {
    if (e.grain_id >= corpus.grains.size())
      throw Error(ErrorKind::reference, "trigger references missing grain " + std::to_string(e.grain_id));
    if (!(e.time >= 0.0 && e.time <= duration))
      throw Error(ErrorKind::parameter, "trigger at t=" + format_double(e.time) + " lies outside the render window");
    const auto &grain = corpus.grains[e.grain_id];
    auto &env = envelopes[grain.length];
    if (env.empty()) env = hann_window(grain.length);
    const auto src = corpus.window(grain);
    const double pl = std::sqrt((1.0 - e.pan) / 2.0);
    const double pr = std::sqrt((1.0 + e.pan) / 2.0);
    const auto start = static_cast<std::size_t>(std::lround(e.time * corpus.sample_rate));
    for (std::size_t k = 0; k < grain.length && start + k < frames; ++k) {
      const double v = src[k] * env[k] * e.gain;
      out.left[start + k] += v * pl;
      out.right[start + k] += v * pr;
    }
  }
  if (options.apply_limiter) {
    for (auto &x : out.left) x = soft_limit(x, options.limiter_knee);
    for (auto &x : out.right) x = soft_limit(x, options.limiter_knee);
  }
  return out;
}

std::vector<TriggerEvent> catalog_triggers(const EventCatalog &catalog, const GrainCorpus &corpus, double duration,
                                           std::uint64_t seed) {
  corpus.validate();
  std::vector<TriggerEvent> out;
  if (catalog.empty()) return out;
  std::uint64_t max_area = 1;
  for (const auto &e : catalog.events) max_area = std::max(max_area, e.area);
  const double log_max = std::log(static_cast<double>(max_area));
  const double log1p_max = std::log1p(static_cast<double>(max_area));
  Rng rng(seed);
  for (const auto &e : catalog.events) {
    const double y = rng.uniform();
    const double pan = rng.uniform(-1.0, 1.0);
    if (!(e.t_start >= 0.0 && e.t_start <= duration)) continue;
    const double area = static_cast<double>(e.area);
    const Vec2 target{max_area > 1 ? std::log(area) / log_max : 0.5, y};
    std::size_t best = 0;
    double best_d2 = norm_squared(corpus.grains[0].position - target);
    for (std::size_t g = 1; g < corpus.grains.size(); ++g) {
      const double d2 = norm_squared(corpus.grains[g].position - target);
      if (d2 < best_d2) {
        best = g;
        best_d2 = d2;
      }
    }
    const double gain = max_area > 1 ? std::log1p(area) / log1p_max : 1.0;
    out.push_back({e.t_start, 0, 0, best, std::clamp(gain, 1e-12, 1.0), pan});
  }
  return out;
}

std::string corpus_to_json(const GrainCorpus &corpus) {
  json grains = json::array();
  for (std::size_t i = 0; i < corpus.grains.size(); ++i) {
    const auto &g = corpus.grains[i];
    json item = {{"id", i},
                 {"offset", g.source_offset},
                 {"length", g.length},
                 {"centroid", g.centroid},
                 {"periodicity", g.periodicity},
                 {"position", {g.position.x, g.position.y}},
                 {"override", nullptr}};
    if (g.manual_override) item["override"] = {g.manual_override->x, g.manual_override->y};
    grains.push_back(std::move(item));
  }
  json doc = {{"source_name", corpus.source_name},
              {"sample_rate", corpus.sample_rate},
              {"sample_count", corpus.samples.size()},
              {"grains", std::move(grains)}};
  return doc.dump(2);
}

GrainCorpus corpus_from_json(const std::string &text, std::vector<double> samples) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error &e) {
    throw FormatError(ErrorKind::input_format, e.byte, "corpus sidecar is not valid JSON");
  }
  GrainCorpus corpus;
  try {
    corpus.source_name = doc.value("source_name", std::string());
    corpus.sample_rate = doc.at("sample_rate").get<std::uint32_t>();
    corpus.samples = std::move(samples);
    for (const auto &item : doc.at("grains")) {
      Grain g;
      g.source_offset = item.at("offset").get<std::size_t>();
      g.length = item.at("length").get<std::size_t>();
      g.centroid = item.at("centroid").get<double>();
      g.periodicity = item.at("periodicity").get<double>();
      const auto &pos = item.at("position");
      g.position = {pos.at(0).get<double>(), pos.at(1).get<double>()};
      if (item.contains("override") && !item["override"].is_null()) {
        const auto &o = item["override"];
        g.manual_override = Vec2{o.at(0).get<double>(), o.at(1).get<double>()};
        g.position = *g.manual_override;
      }
      corpus.grains.push_back(g);
    }
  } catch (const json::exception &e) {
    throw Error(ErrorKind::input_format, std::string("corpus sidecar: ") + e.what());
  }
  corpus.validate();
  return corpus;
}

void write_trigger_csv(std::ostream &out, std::span<const TriggerEvent> events) {
  out << "time,block_row,block_col,grain_id,gain,pan\n";
  for (const auto &e : events)
    out << format_double(e.time) << ',' << e.block_row << ',' << e.block_col << ',' << e.grain_id << ','
        << format_double(e.gain) << ',' << format_double(e.pan) << '\n';
}

std::vector<TriggerEvent> read_trigger_csv(std::istream &in) {
  std::vector<TriggerEvent> out;
  std::string line;
  std::size_t offset = 0;
  bool header = false;
  while (std::getline(in, line)) {
    const std::size_t line_offset = offset;
    offset += line.size() + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header) {
      if (line != "time,block_row,block_col,grain_id,gain,pan")
        throw FormatError(ErrorKind::input_format, line_offset, "unexpected trigger header '" + line + "'");
      header = true;
      continue;
    }
    const auto cells = detail::split_csv(line);
    if (cells.size() != 6)
      throw FormatError(ErrorKind::input_format, line_offset, "expected 6 fields, found " + std::to_string(cells.size()));
    TriggerEvent e;
    e.time = detail::parse_number<double>(cells[0], line_offset, "time");
    e.block_row = detail::parse_number<std::size_t>(cells[1], line_offset, "block_row");
    e.block_col = detail::parse_number<std::size_t>(cells[2], line_offset, "block_col");
    e.grain_id = detail::parse_number<std::size_t>(cells[3], line_offset, "grain_id");
    e.gain = detail::parse_number<double>(cells[4], line_offset, "gain");
    e.pan = detail::parse_number<double>(cells[5], line_offset, "pan");
    if (!(e.gain > 0.0 && e.gain <= 1.0)) throw FormatError(ErrorKind::input_format, line_offset, "gain outside (0, 1]");
    if (!(e.pan >= -1.0 && e.pan <= 1.0)) throw FormatError(ErrorKind::input_format, line_offset, "pan outside [-1, 1]");
    if (!(e.time >= 0.0)) throw FormatError(ErrorKind::input_format, line_offset, "negative trigger time");
    out.push_back(e);
  }
  if (!header) throw FormatError(ErrorKind::input_format, offset, "missing trigger header");
  return out;
}

}  // namespace stickslip
