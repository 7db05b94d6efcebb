// Command-line entry points: simulate, analyze, corpus, sonify, score,
// replay and serve.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "stickslip/aesthetics.hpp"
#include "stickslip/catalog.hpp"
#include "stickslip/config.hpp"
#include "stickslip/error.hpp"
#include "stickslip/ofc.hpp"
#include "stickslip/server.hpp"
#include "stickslip/service.hpp"
#include "stickslip/simulate.hpp"
#include "stickslip/sonifier.hpp"
#include "stickslip/stats.hpp"
#include "stickslip/wav.hpp"

using namespace stickslip;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  bool json = false;
  CLI::Option *seed_opt = nullptr;
};

void add_common(CLI::App *cmd, Common &c) {
  cmd->add_option("--config", c.config, "JSON settings file (flags override it)");
  c.seed_opt = cmd->add_option("--seed", c.seed, "random seed");
  cmd->add_flag("--json", c.json, "print a machine-readable JSON report");
}

// Precedence: flag > file > base (defaults, or a session record's settings).
Settings resolve(const Common &c, Settings base = {}) {
  Settings s = c.config.empty() ? base : load_settings(c.config, base);
  if (c.seed_opt->count()) s.seed = c.seed;
  return s;
}

template <typename T>
void override_if(const CLI::Option *opt, T &dst, const T &src) {
  if (opt->count()) dst = src;
}

std::pair<std::size_t, std::size_t> parse_grid(const std::string &text) {
  const auto x = text.find_first_of("xX");
  std::size_t r = 0, c = 0;
  try {
    if (x == std::string::npos) throw std::invalid_argument(text);
    std::size_t used = 0;
    r = std::stoul(text.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(text);
    c = std::stoul(text.substr(x + 1), &used);
    if (used != text.size() - x - 1) throw std::invalid_argument(text);
  } catch (const std::exception &) {
    throw Error(ErrorKind::parameter, "grid must look like ROWSxCOLS, got '" + text + "'");
  }
  return {r, c};
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

GrainCorpus corpus_for(const std::string &audio_path, const std::string &sidecar, const SonifierConfig &config) {
  const auto audio = load_audio(audio_path);
  if (sidecar.empty()) return build_corpus(audio, audio_path, config);
  const auto mono = audio.sample_rate == config.output_rate ? audio : resample(audio, config.output_rate);
  const auto bytes = read_file(sidecar);
  return corpus_from_json(std::string(bytes.begin(), bytes.end()), mono.samples);
}

void add_sonifier_flags(CLI::App *cmd, SonifierConfig &s, std::vector<CLI::Option *> &opts) {
  opts.push_back(cmd->add_option("--grain-ms", s.grain_ms, "grain length (ms)"));
  opts.push_back(cmd->add_option("--hop-ms", s.hop_ms, "grain hop (ms)"));
  opts.push_back(cmd->add_option("--radius", s.radius, "trigger range in descriptor space"));
  opts.push_back(cmd->add_option("--refractory", s.refractory_s, "per-block refractory period (s)"));
  opts.push_back(cmd->add_option("--v-ref", s.v_ref, "slip speed for full gain (m/s)"));
  opts.push_back(cmd->add_option("--knee", s.limiter_knee, "limiter knee"));
}

void apply_sonifier_flags(const std::vector<CLI::Option *> &opts, const SonifierConfig &from, SonifierConfig &to) {
  override_if(opts[0], to.grain_ms, from.grain_ms);
  override_if(opts[1], to.hop_ms, from.hop_ms);
  override_if(opts[2], to.radius, from.radius);
  override_if(opts[3], to.refractory_s, from.refractory_s);
  override_if(opts[4], to.v_ref, from.v_ref);
  override_if(opts[5], to.limiter_knee, from.limiter_knee);
}

json fit_json(const PowerLawFit &f) {
  return {{"b_hat", f.b_hat},           {"b_stderr", f.b_stderr},     {"tau", f.tau()},
          {"x_min", f.x_min},           {"n_tail", f.n_tail},         {"ks_distance", f.ks_distance},
          {"log_log_slope", f.log_log_slope}, {"log_log_intercept", f.log_log_intercept},
          {"log_log_r2", f.log_log_r2}, {"fit_lo", f.fit_lo},         {"fit_hi", f.fit_hi},
          {"decades", f.decades()}};
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"Spring-block stick-slip simulation, statistics, sonification and scoring"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "stickslip 0.1.0");

  // simulate -----------------------------------------------------------------
  Common sim_c;
  std::string sim_mode = "ofc", sim_grid, sim_out, sim_light;
  double sim_alpha = 0.22, sim_duration = 60.0;
  std::uint64_t sim_events = 0, sim_burn = 0;
  auto *sim = app.add_subcommand("simulate", "run the OFC automaton or the dynamic lattice and write a catalog");
  add_common(sim, sim_c);
  sim->add_option("--mode", sim_mode, "ofc or dynamic")->check(CLI::IsMember({"ofc", "dynamic"}));
  auto *sim_grid_o = sim->add_option("--grid", sim_grid, "grid size ROWSxCOLS");
  auto *sim_alpha_o = sim->add_option("--alpha", sim_alpha, "OFC dissipation parameter");
  auto *sim_events_o = sim->add_option("--events", sim_events, "recorded avalanches (OFC) or event cap (dynamic)");
  auto *sim_burn_o = sim->add_option("--burn-in", sim_burn, "discarded OFC avalanches");
  sim->add_option("--duration", sim_duration, "simulated seconds (dynamic)");
  sim->add_option("--out", sim_out, "catalog path (.csv or .json)")->required();
  sim->add_option("--light-log", sim_light, "light-frame log path (dynamic)");

  // analyze ------------------------------------------------------------------
  Common an_c;
  std::string an_path, an_ccdf, an_spec_out, an_quantity = "energy";
  double an_xmin = 0, an_fitmax = 0, an_bin = 0.008, an_overlap = 0.5;
  std::vector<double> an_band;
  std::size_t an_segment = 65536;
  bool an_spectrum = false;
  auto *an = app.add_subcommand("analyze", "fit the size distribution and optionally the activity spectrum");
  add_common(an, an_c);
  an->add_option("catalog", an_path, "catalog (.csv or .json)")->required();
  auto *an_xmin_o = an->add_option("--x-min", an_xmin, "area cutoff (scanned by KS distance when absent)");
  auto *an_fitmax_o = an->add_option("--fit-max", an_fitmax, "upper end of the log-log line fit");
  an->add_option("--ccdf-out", an_ccdf, "write CCDF points as CSV");
  an->add_flag("--spectrum", an_spectrum, "estimate the activity spectrum and its slope");
  an->add_option("--bin", an_bin, "activity bin (s)");
  an->add_option("--segment", an_segment, "Welch segment length");
  an->add_option("--overlap", an_overlap, "Welch overlap fraction");
  an->add_option("--band", an_band, "slope band LO HI in Hz (default fs/200 .. fs/2.5)")->expected(2);
  an->add_option("--quantity", an_quantity, "energy or moment")->check(CLI::IsMember({"energy", "moment"}));
  an->add_option("--spectrum-out", an_spec_out, "write the spectrum as CSV");

  // corpus -------------------------------------------------------------------
  Common co_c;
  std::string co_audio, co_out, co_layout;
  SonifierConfig co_s;
  std::vector<CLI::Option *> co_opts;
  auto *co = app.add_subcommand("corpus", "segment and analyse a recording into a grain corpus sidecar");
  add_common(co, co_c);
  co->add_option("--audio", co_audio, "PCM WAV input")->required();
  co->add_option("--out", co_out, "sidecar JSON path")->required();
  add_sonifier_flags(co, co_s, co_opts);
  auto *co_layout_o = co->add_option("--layout", co_layout, "rank or min_max");

  // sonify -------------------------------------------------------------------
  Common so_c;
  std::string so_catalog, so_record, so_audio, so_corpus, so_out, so_triggers;
  double so_duration = 0;
  SonifierConfig so_s;
  std::vector<CLI::Option *> so_opts;
  auto *so = app.add_subcommand("sonify", "render a catalog or session record through a grain corpus");
  add_common(so, so_c);
  auto *so_cat_o = so->add_option("--catalog", so_catalog, "event catalog");
  auto *so_rec_o = so->add_option("--record", so_record, "session record");
  so_cat_o->excludes(so_rec_o);
  so->add_option("--audio", so_audio, "corpus audio (PCM WAV)")->required();
  so->add_option("--corpus", so_corpus, "corpus sidecar from `corpus` (built from the audio when absent)");
  so->add_option("--out", so_out, "output WAV (16-bit stereo)")->required();
  so->add_option("--triggers", so_triggers, "trigger log CSV");
  auto *so_dur_o = so->add_option("--duration", so_duration, "output length (s)");
  add_sonifier_flags(so, so_s, so_opts);

  // score --------------------------------------------------------------------
  Common sc_c;
  std::string sc_path, sc_out;
  auto *sc = app.add_subcommand("score", "order, complexity and Birkhoff measure per light frame");
  add_common(sc, sc_c);
  sc->add_option("light_log", sc_path, "light-frame log (JSON lines)")->required();
  sc->add_option("--out", sc_out, "score CSV (standard output when absent)");

  // replay -------------------------------------------------------------------
  Common rp_c;
  std::string rp_record, rp_snapshots, rp_light, rp_triggers, rp_catalog, rp_audio;
  auto *rp = app.add_subcommand("replay", "replay a session record and export its streams");
  add_common(rp, rp_c);
  rp->add_option("record", rp_record, "session record")->required();
  rp->add_option("--snapshots", rp_snapshots, "state snapshots as JSON lines");
  rp->add_option("--light-log", rp_light, "light-frame log");
  rp->add_option("--triggers", rp_triggers, "trigger CSV (needs --audio)");
  rp->add_option("--catalog", rp_catalog, "event catalog");
  rp->add_option("--audio", rp_audio, "corpus audio enabling triggers");

  // serve --------------------------------------------------------------------
  Common sv_c;
  std::uint16_t sv_port = 8080;
  std::string sv_record, sv_audio, sv_address = "127.0.0.1";
  auto *sv = app.add_subcommand("serve", "run the live session server");
  add_common(sv, sv_c);
  auto *sv_port_o = sv->add_option("--port", sv_port, "TCP port");
  sv->add_option("--record", sv_record, "directory for session records");
  sv->add_option("--audio", sv_audio, "corpus audio enabling trigger streaming");
  sv->add_option("--address", sv_address, "bind address");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  bool json_mode = false;
  try {
    if (*sim) {
      json_mode = sim_c.json;
      Settings s = resolve(sim_c);
      const auto start = std::chrono::steady_clock::now();
      EventCatalog catalog;
      if (sim_mode == "ofc") {
        if (sim_grid_o->count()) std::tie(s.ofc.rows, s.ofc.cols) = parse_grid(sim_grid);
        override_if(sim_alpha_o, s.ofc.alpha, sim_alpha);
        override_if(sim_events_o, s.ofc.events, sim_events);
        override_if(sim_burn_o, s.ofc.burn_in, sim_burn);
        s.validate();
        OfcRunOptions o = s.ofc;
        o.seed = s.seed;
        catalog = run_ofc(o);
      } else {
        if (sim_grid_o->count()) std::tie(s.lattice.rows, s.lattice.cols) = parse_grid(sim_grid);
        s.validate();
        DynamicRunOptions o;
        o.duration = sim_duration;
        if (sim_events_o->count()) o.max_events = sim_events;
        if (!sim_light.empty()) {
          std::ofstream light_out(sim_light);
          if (!light_out) throw Error(ErrorKind::input_format, "cannot write '" + sim_light + "'");
          LightLogWriter writer(light_out);
          catalog = run_dynamic(s, s.seed, o, [&](const LightFrame &f) { writer.push(f.tick, f.lit); });
          writer.flush();
        } else {
          catalog = run_dynamic(s, s.seed, o);
        }
      }
      save_catalog(sim_out, catalog);
      std::uint64_t max_area = 0;
      for (const auto &e : catalog.events) max_area = std::max(max_area, e.area);
      const double elapsed = seconds_since(start);
      if (sim_c.json) {
        std::cout << json{{"mode", sim_mode},     {"events", catalog.size()}, {"max_area", max_area},
                          {"elapsed_s", elapsed}, {"seed", s.seed},           {"out", sim_out}}
                         .dump()
                  << "\n";
      } else {
        std::cout << "simulate: mode=" << sim_mode << " events=" << catalog.size() << " max_area=" << max_area
                  << " elapsed=" << std::fixed << std::setprecision(2) << elapsed << "s out=" << sim_out << "\n";
      }
      return 0;
    }

    if (*an) {
      json_mode = an_c.json;
      resolve(an_c);
      const auto catalog = load_catalog(an_path);
      const auto points = ccdf(catalog);
      PowerLawOptions po;
      if (an_xmin_o->count()) po.x_min = an_xmin;
      if (an_fitmax_o->count()) po.fit_max = an_fitmax;
      const auto areas = catalog.areas();
      const auto fit = fit_power_law(areas, po);
      json report = {{"events", catalog.size()}, {"observation_window", catalog.observation_window},
                     {"mode", to_string(catalog.mode)}, {"fit", fit_json(fit)},
                     {"field_range", {0.8, 1.2}}, {"b_in_field_range", fit.b_hat >= 0.8 && fit.b_hat <= 1.2}};
      json ccdf_points = json::array();
      for (const auto &p : points) ccdf_points.push_back({p.area, p.rate});
      report["ccdf"] = ccdf_points;
      if (!an_ccdf.empty()) {
        std::ofstream out(an_ccdf);
        out << "area,rate\n";
        for (const auto &p : points) out << format_double(p.area) << ',' << format_double(p.rate) << '\n';
      }
      std::optional<SlopeFit> slope;
      std::optional<Spectrum> spectrum;
      if (an_spectrum) {
        const auto series = activity_series(catalog, an_bin,
                                            an_quantity == "energy" ? ActivityQuantity::energy : ActivityQuantity::moment);
        const double fs = 1.0 / an_bin;
        SpectrumOptions so;
        so.segment_length = an_segment;
        so.overlap = an_overlap;
        spectrum = power_spectrum(series, fs, so);
        const double lo = an_band.size() == 2 ? an_band[0] : fs / 200.0;
        const double hi = an_band.size() == 2 ? an_band[1] : fs / 2.5;
        slope = fit_spectral_slope(*spectrum, lo, hi);
        report["spectrum"] = {{"sample_rate", fs},
                              {"segment_length", spectrum->segment_length},
                              {"segment_count", spectrum->segment_count},
                              {"slope", slope->slope},
                              {"intercept", slope->intercept},
                              {"r2", slope->r2},
                              {"band", {slope->band_lo, slope->band_hi}},
                              {"points", slope->points}};
        if (!an_spec_out.empty()) {
          std::ofstream out(an_spec_out);
          write_spectrum_csv(out, *spectrum);
        }
      }
      if (an_c.json) {
        std::cout << report.dump() << "\n";
      } else {
        std::cout << std::setprecision(6);
        std::cout << "events            " << catalog.size() << "\n"
                  << "b_hat             " << fit.b_hat << " +- " << fit.b_stderr << "  (tau = " << fit.tau() << ")\n"
                  << "x_min             " << fit.x_min << "  n_tail " << fit.n_tail << "  KS " << fit.ks_distance << "\n"
                  << "log-log CCDF      slope " << fit.log_log_slope << "  R^2 " << fit.log_log_r2 << "  over ["
                  << fit.fit_lo << ", " << fit.fit_hi << "] (" << fit.decades() << " decades)\n"
                  << "field range       0.8 .. 1.2 (" << (fit.b_hat >= 0.8 && fit.b_hat <= 1.2 ? "inside" : "outside")
                  << ", reported only)\n";
        if (slope)
          std::cout << "spectral slope    " << slope->slope << "  R^2 " << slope->r2 << "  band [" << slope->band_lo
                    << ", " << slope->band_hi << "] Hz, " << spectrum->segment_count << " segments\n";
      }
      return 0;
    }

    if (*co) {
      json_mode = co_c.json;
      Settings s = resolve(co_c);
      apply_sonifier_flags(co_opts, co_s, s.sonifier);
      if (co_layout_o->count()) s.sonifier.layout = parse_layout_mode(co_layout);
      s.sonifier.validate();
      const auto corpus = build_corpus(load_audio(co_audio), co_audio, s.sonifier);
      std::ofstream out(co_out);
      if (!out) throw Error(ErrorKind::input_format, "cannot write '" + co_out + "'");
      out << corpus_to_json(corpus) << "\n";
      if (co_c.json)
        std::cout << json{{"grains", corpus.grains.size()}, {"sample_rate", corpus.sample_rate}, {"out", co_out}}.dump()
                  << "\n";
      else
        std::cout << "corpus: grains=" << corpus.grains.size() << " sample_rate=" << corpus.sample_rate << " out=" << co_out
                  << "\n";
      return 0;
    }

    if (*so) {
      json_mode = so_c.json;
      if (!so_cat_o->count() && !so_rec_o->count()) throw Error(ErrorKind::parameter, "sonify needs --catalog or --record");
      std::vector<TriggerEvent> triggers;
      double duration = 0.0;
      Settings s;
      std::optional<SessionRecord> record;
      if (so_rec_o->count()) {
        record = decode_session(read_file(so_record));
        s = resolve(so_c, record->settings);
      } else {
        s = resolve(so_c);
      }
      apply_sonifier_flags(so_opts, so_s, s.sonifier);
      s.sonifier.validate();
      const auto corpus = corpus_for(so_audio, so_corpus, s.sonifier);
      if (record) {
        record->settings.sonifier = s.sonifier;
        duration = static_cast<double>(record->total_ticks) * record->settings.lattice.timestep;
        if (so_dur_o->count()) duration = so_duration;
        replay_session(*record, [&](const TickOutput &out) {
          for (const auto &t : out.triggers)
            if (t.time <= duration) triggers.push_back(t);
        }, &corpus);
      } else {
        const auto catalog = load_catalog(so_catalog);
        duration = so_dur_o->count() ? so_duration : catalog.observation_window;
        triggers = catalog_triggers(catalog, corpus, duration, s.seed);
      }
      RenderOptions ro;
      ro.limiter_knee = s.sonifier.limiter_knee;
      const auto audio = render(triggers, corpus, duration, ro);
      write_file(so_out, encode_wav16(audio));
      if (!so_triggers.empty()) {
        std::ofstream out(so_triggers);
        write_trigger_csv(out, triggers);
      }
      if (so_c.json)
        std::cout << json{{"triggers", triggers.size()}, {"duration_s", duration}, {"frames", audio.left.size()},
                          {"grains", corpus.grains.size()}, {"out", so_out}}
                         .dump()
                  << "\n";
      else
        std::cout << "sonify: triggers=" << triggers.size() << " duration=" << duration << "s frames=" << audio.left.size()
                  << " out=" << so_out << "\n";
      return 0;
    }

    if (*sc) {
      json_mode = sc_c.json;
      resolve(sc_c);
      std::ifstream in(sc_path);
      if (!in) throw Error(ErrorKind::input_format, "cannot open '" + sc_path + "'");
      const auto frames = read_light_log(in);
      std::ofstream file;
      if (!sc_out.empty()) {
        file.open(sc_out);
        if (!file) throw Error(ErrorKind::input_format, "cannot write '" + sc_out + "'");
      }
      std::ostream *csv = !sc_out.empty() ? static_cast<std::ostream *>(&file) : (sc_c.json ? nullptr : &std::cout);
      if (csv) write_score_csv_header(*csv);
      double sum_o = 0, sum_c = 0, sum_m = 0;
      std::size_t defined = 0;
      for (const auto &f : frames) {
        const auto score = birkhoff(f.lit);
        sum_o += score.order;
        sum_c += score.complexity;
        if (score.birkhoff) {
          sum_m += *score.birkhoff;
          ++defined;
        }
        if (csv) write_score_csv_row(*csv, f.tick, score);
      }
      if (sc_c.json) {
        const double n = frames.empty() ? 1.0 : static_cast<double>(frames.size());
        std::cout << json{{"frames", frames.size()},
                          {"mean_order", sum_o / n},
                          {"mean_complexity", sum_c / n},
                          {"defined", defined},
                          {"undefined", frames.size() - defined},
                          {"mean_birkhoff", defined ? json(sum_m / static_cast<double>(defined)) : json(nullptr)}}
                         .dump()
                  << "\n";
      }
      return 0;
    }

    if (*rp) {
      json_mode = rp_c.json;
      auto record = decode_session(read_file(rp_record));
      record.settings = resolve(rp_c, record.settings);
      std::optional<GrainCorpus> corpus;
      if (!rp_audio.empty()) corpus = corpus_for(rp_audio, "", record.settings.sonifier);
      if (!rp_triggers.empty() && !corpus) throw Error(ErrorKind::parameter, "--triggers needs --audio");
      std::ofstream snaps, light_file;
      if (!rp_snapshots.empty()) snaps.open(rp_snapshots);
      if (!rp_light.empty()) light_file.open(rp_light);
      std::optional<LightLogWriter> light;
      if (!rp_light.empty()) light.emplace(light_file);
      std::vector<TriggerEvent> triggers;
      std::uint64_t digest = 14695981039346656037ull;
      std::uint64_t ticks = 0;
      std::vector<Avalanche> events;
      replay_session(record, [&](const TickOutput &out) {
        ++ticks;
        digest = (digest ^ snapshot_digest(out.snapshot)) * 1099511628211ull;
        if (snaps.is_open()) snaps << snapshot_json(out.snapshot) << "\n";
        if (light) light->push(out.light.tick, out.light.lit);
        triggers.insert(triggers.end(), out.triggers.begin(), out.triggers.end());
        events.insert(events.end(), out.events.begin(), out.events.end());
      }, corpus ? &*corpus : nullptr);
      if (light) light->flush();
      if (!rp_triggers.empty()) {
        std::ofstream out(rp_triggers);
        write_trigger_csv(out, triggers);
      }
      if (!rp_catalog.empty()) {
        EventCatalog c;
        c.events = events;
        c.observation_window = static_cast<double>(ticks) * record.settings.lattice.timestep;
        save_catalog(rp_catalog, c);
      }
      std::ostringstream hex;
      hex << std::hex << std::setw(16) << std::setfill('0') << digest;
      if (rp_c.json)
        std::cout << json{{"ticks", ticks}, {"commands", record.commands.size()}, {"events", events.size()},
                          {"triggers", triggers.size()}, {"digest", hex.str()}}
                         .dump()
                  << "\n";
      else
        std::cout << "replay: ticks=" << ticks << " commands=" << record.commands.size() << " events=" << events.size()
                  << " triggers=" << triggers.size() << " digest=" << hex.str() << "\n";
      return 0;
    }

    if (*sv) {
      json_mode = sv_c.json;
      ServerOptions o;
      o.settings = resolve(sv_c);
      o.seed = o.settings.seed;
      o.port = sv_port_o->count() ? sv_port : o.settings.service.port;
      o.address = sv_address;
      if (!sv_record.empty()) o.record_dir = sv_record;
      if (!sv_audio.empty()) o.corpus = corpus_for(sv_audio, "", o.settings.sonifier);
      Server server(std::move(o));
      server.start();
      if (sv_c.json)
        std::cout << json{{"listening", sv_address}, {"port", server.port()}}.dump() << std::endl;
      else
        std::cout << "serve: listening on http://" << sv_address << ":" << server.port() << std::endl;
      server.run_until_signal();
      return 0;
    }
  } catch (const Error &e) {
    std::cerr << "error: " << e.what() << "\n";
    if (json_mode) std::cout << json{{"error", e.what()}, {"exit_code", exit_code(e.kind())}}.dump() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
