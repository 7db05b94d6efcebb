#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "stickslip/aesthetics.hpp"
#include "stickslip/catalog.hpp"
#include "stickslip/config.hpp"
#include "stickslip/error.hpp"
#include "stickslip/lattice.hpp"
#include "stickslip/ofc.hpp"
#include "stickslip/service.hpp"
#include "stickslip/simulate.hpp"
#include "stickslip/sonifier.hpp"
#include "stickslip/stats.hpp"
#include "stickslip/wav.hpp"

namespace py = pybind11;
using namespace stickslip;

namespace {

const char *kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::config: return "config";
    case ErrorKind::parameter: return "parameter";
    case ErrorKind::input_format: return "input_format";
    case ErrorKind::empty_input: return "empty_input";
    case ErrorKind::sample_size: return "sample_size";
    case ErrorKind::degenerate: return "degenerate";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::runaway: return "runaway";
    case ErrorKind::reference: return "reference";
    case ErrorKind::version: return "version";
    case ErrorKind::integrity: return "integrity";
    case ErrorKind::protocol: return "protocol";
    case ErrorKind::unsupported: return "unsupported";
  }
  return "unknown";
}

BitMatrix to_matrix(const std::vector<std::vector<int>> &rows) {
  if (rows.empty() || rows[0].empty()) throw Error(ErrorKind::parameter, "matrix must be non-empty");
  BitMatrix m(rows.size(), rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols) throw Error(ErrorKind::parameter, "matrix rows differ in length");
    for (std::size_t c = 0; c < m.cols; ++c) m.set(r, c, rows[r][c] != 0);
  }
  return m;
}

py::dict fit_dict(const PowerLawFit &f) {
  py::dict d;
  d["b_hat"] = f.b_hat;
  d["b_stderr"] = f.b_stderr;
  d["tau"] = f.tau();
  d["x_min"] = f.x_min;
  d["n_tail"] = f.n_tail;
  d["ks_distance"] = f.ks_distance;
  d["log_log_slope"] = f.log_log_slope;
  d["log_log_r2"] = f.log_log_r2;
  d["fit_lo"] = f.fit_lo;
  d["fit_hi"] = f.fit_hi;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Spring-block stick-slip lattice, OFC automaton, statistics, sonification and scoring";

  static py::exception<Error> error(m, "StickSlipError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error &e) {
      py::object exc = error;
      py::object instance = exc(e.what());
      instance.attr("kind") = kind_name(e.kind());
      PyErr_SetObject(error.ptr(), instance.ptr());
    }
  });

  py::class_<Vec2>(m, "Vec2")
      .def(py::init<>())
      .def(py::init([](double x, double y) { return Vec2{x, y}; }))
      .def_readwrite("x", &Vec2::x)
      .def_readwrite("y", &Vec2::y)
      .def("__iter__", [](const Vec2 &v) { return py::iter(py::make_tuple(v.x, v.y)); })
      .def("__repr__", [](const Vec2 &v) { return "Vec2(" + format_double(v.x) + ", " + format_double(v.y) + ")"; });

  py::class_<LatticeConfig>(m, "LatticeConfig")
      .def(py::init<>())
      .def_readwrite("rows", &LatticeConfig::rows)
      .def_readwrite("cols", &LatticeConfig::cols)
      .def_readwrite("coupling_stiffness", &LatticeConfig::coupling_stiffness)
      .def_readwrite("loading_stiffness", &LatticeConfig::loading_stiffness)
      .def_readwrite("block_mass", &LatticeConfig::block_mass)
      .def_readwrite("static_threshold", &LatticeConfig::static_threshold)
      .def_readwrite("kinetic_friction", &LatticeConfig::kinetic_friction)
      .def_readwrite("stick_speed", &LatticeConfig::stick_speed)
      .def_readwrite("timestep", &LatticeConfig::timestep)
      .def_property(
          "coupling_mode", [](const LatticeConfig &c) { return to_string(c.coupling_mode); },
          [](LatticeConfig &c, const std::string &s) { c.coupling_mode = parse_coupling_mode(s); })
      .def_property(
          "boundary", [](const LatticeConfig &c) { return to_string(c.boundary); },
          [](LatticeConfig &c, const std::string &s) { c.boundary = parse_boundary(s); })
      .def("alpha", &LatticeConfig::alpha)
      .def("stability_limit", &LatticeConfig::stability_limit)
      .def("coupled_count", &LatticeConfig::coupled_count)
      .def("validate", &LatticeConfig::validate);

  m.def(
      "net_force",
      [](const LatticeConfig &config, const std::vector<std::pair<double, double>> &field) {
        if (field.size() != config.block_count())
          throw Error(ErrorKind::config, "displacement count does not match the lattice");
        std::vector<Vec2> displacement;
        for (const auto &[x, y] : field) displacement.push_back({x, y});
        std::vector<std::pair<double, double>> out;
        for (const auto &f : net_force(config, displacement)) out.emplace_back(f.x, f.y);
        return out;
      },
      py::arg("config"), py::arg("displacement"),
      "Elastic load on every block for a row-major displacement field, frame at rest.");

  m.def(
      "oscillate",
      [](const LatticeConfig &config, double dx, double dy, std::size_t steps) {
        const Vec2 displacement{dx, dy};
        FramePose pose = rest_pose(config);
        LatticeState state = make_rest_state(config, pose);
        for (auto &b : state.blocks) b.position = b.position + displacement;
        apply_pose(state, config, pose);
        StickSlipIntegrator integrator(config);
        std::vector<std::pair<double, double>> trace;  // (mean x displacement, total energy)
        trace.reserve(steps + 1);
        auto sample = [&] {
          double mean = 0.0;
          for (const auto &b : state.blocks) mean += b.displacement.x;
          trace.emplace_back(mean / static_cast<double>(state.blocks.size()), total_energy(state, config));
        };
        sample();
        for (std::size_t i = 0; i < steps; ++i) {
          state = integrator.step(state, pose);
          sample();
        }
        return trace;
      },
      py::arg("config"), py::arg("dx"), py::arg("dy"), py::arg("steps"),
      "Displaces every block uniformly and integrates with the frame fixed; returns (mean x displacement, energy) per step.");

  m.def(
      "ofc_relax",
      [](std::vector<double> stress, std::size_t rows, std::size_t cols, double alpha) {
        OfcGrid grid;
        grid.rows = rows;
        grid.cols = cols;
        grid.alpha = alpha;
        grid.stress = std::move(stress);
        if (grid.stress.size() != rows * cols) throw Error(ErrorKind::parameter, "stress size does not match the grid");
        grid.validate();
        OfcOptions o;
        o.record_sequence = true;
        const auto a = ofc_drive_and_relax(grid, o);
        py::dict d;
        d["stress"] = grid.stress;
        d["area"] = a.area;
        d["topples"] = a.topples;
        d["sweeps"] = a.sweeps;
        d["sequence"] = a.sequence;
        return d;
      },
      py::arg("stress"), py::arg("rows"), py::arg("cols"), py::arg("alpha"),
      "One drive-and-relax cycle of the OFC automaton.");

  py::class_<EventCatalog>(m, "EventCatalog")
      .def(py::init<>())
      .def("__len__", &EventCatalog::size)
      .def_readwrite("observation_window", &EventCatalog::observation_window)
      .def_property_readonly("mode", [](const EventCatalog &c) { return to_string(c.mode); })
      .def("areas", &EventCatalog::areas)
      .def("events",
           [](const EventCatalog &c) {
             py::list out;
             for (const auto &e : c.events) out.append(py::make_tuple(e.id, e.t_start, e.t_end, e.area, e.moment, e.energy));
             return out;
           })
      .def("to_json", &catalog_to_json)
      .def_static("from_json", &catalog_from_json)
      .def("save", [](const EventCatalog &c, const std::string &path) { save_catalog(path, c); })
      .def_static("load", &load_catalog);

  m.def(
      "run_ofc",
      [](std::size_t rows, std::size_t cols, double alpha, std::uint64_t burn_in, std::uint64_t events, std::uint64_t seed) {
        OfcRunOptions o;
        o.rows = rows;
        o.cols = cols;
        o.alpha = alpha;
        o.burn_in = burn_in;
        o.events = events;
        o.seed = seed;
        py::gil_scoped_release release;
        return run_ofc(o);
      },
      py::arg("rows") = 64, py::arg("cols") = 64, py::arg("alpha") = 0.22, py::arg("burn_in") = 100000,
      py::arg("events") = 1000000, py::arg("seed") = 7);

  m.def(
      "run_dynamic",
      [](const std::string &settings_json, double duration, std::uint64_t seed) {
        const Settings s = settings_json.empty() ? Settings{} : settings_from_json(settings_json);
        DynamicRunOptions o;
        o.duration = duration;
        return run_dynamic(s, seed, o);
      },
      py::arg("settings_json") = "", py::arg("duration") = 60.0, py::arg("seed") = 7);

  m.def(
      "fit_power_law",
      [](const std::vector<std::uint64_t> &areas, std::optional<double> x_min, std::optional<double> fit_max) {
        PowerLawOptions o;
        o.x_min = x_min;
        o.fit_max = fit_max;
        return fit_dict(fit_power_law(areas, o));
      },
      py::arg("areas"), py::arg("x_min") = py::none(), py::arg("fit_max") = py::none());

  m.def(
      "ccdf",
      [](const std::vector<std::uint64_t> &areas, double window) {
        std::vector<std::pair<double, double>> out;
        for (const auto &p : ccdf(areas, window)) out.emplace_back(p.area, p.rate);
        return out;
      },
      py::arg("areas"), py::arg("observation_window") = 1.0);

  m.def(
      "activity_series", [](const EventCatalog &c, double bin) { return activity_series(c, bin); }, py::arg("catalog"),
      py::arg("bin"));

  m.def(
      "power_spectrum",
      [](const std::vector<double> &series, double fs, std::size_t segment, double overlap) {
        SpectrumOptions o;
        o.segment_length = segment;
        o.overlap = overlap;
        const auto s = power_spectrum(series, fs, o);
        return std::make_pair(s.frequency, s.power);
      },
      py::arg("series"), py::arg("sample_rate"), py::arg("segment_length") = 4096, py::arg("overlap") = 0.5);

  m.def(
      "spectral_slope",
      [](const std::vector<double> &series, double fs, std::size_t segment, double lo, double hi) {
        SpectrumOptions o;
        o.segment_length = segment;
        const auto fit = fit_spectral_slope(power_spectrum(series, fs, o), lo, hi);
        return std::make_pair(fit.slope, fit.r2);
      },
      py::arg("series"), py::arg("sample_rate"), py::arg("segment_length"), py::arg("band_lo"), py::arg("band_hi"));

  m.def("descriptor_centroid", [](const std::vector<double> &x, double fs) { return descriptor_centroid(x, fs); });
  m.def("descriptor_periodicity", [](const std::vector<double> &x, double fs) { return descriptor_periodicity(x, fs); });
  m.def(
      "segment_grains",
      [](std::size_t n, std::uint32_t fs, double grain_ms, double hop_ms) {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (const auto &w : segment_grains(n, fs, grain_ms, hop_ms)) out.emplace_back(w.offset, w.length);
        return out;
      },
      py::arg("sample_count"), py::arg("sample_rate"), py::arg("grain_ms") = 100.0, py::arg("hop_ms") = 50.0);
  m.def(
      "build_corpus_json",
      [](const std::vector<double> &samples, std::uint32_t fs) {
        MonoAudio a;
        a.sample_rate = fs;
        a.samples = samples;
        SonifierConfig c;
        c.output_rate = fs;
        return corpus_to_json(build_corpus(a, "python", c));
      },
      py::arg("samples"), py::arg("sample_rate"), "Builds a corpus at the input rate and returns its sidecar JSON.");

  py::class_<AestheticScore>(m, "AestheticScore")
      .def_readonly("order", &AestheticScore::order)
      .def_readonly("complexity", &AestheticScore::complexity)
      .def_readonly("birkhoff", &AestheticScore::birkhoff)
      .def("defined", &AestheticScore::defined);
  m.def("complexity_score", [](const std::vector<std::vector<int>> &m) { return complexity_score(to_matrix(m)); });
  m.def("order_score", [](const std::vector<std::vector<int>> &m) { return order_score(to_matrix(m)); });
  m.def("birkhoff", [](const std::vector<std::vector<int>> &m) { return birkhoff(to_matrix(m)); });

  py::class_<World>(m, "World")
      .def(py::init([](const std::string &settings_json, std::uint64_t seed) {
             return std::make_unique<World>(settings_json.empty() ? Settings{} : settings_from_json(settings_json), seed);
           }),
           py::arg("settings_json") = "", py::arg("seed") = 7)
      .def(
          "tick",
          [](World &w, const std::vector<std::string> &messages, const std::string &client) {
            std::vector<SteerCommand> cmds;
            py::list replies;
            for (const auto &raw : messages) {
              const auto r = ingest_command(raw, client, w.settings().service);
              if (r.command) cmds.push_back(*r.command);
              replies.append(r.reply());
            }
            const auto out = w.tick(cmds);
            py::dict d;
            d["state"] = snapshot_json(out.snapshot);
            d["light"] = light_json(out.light);
            d["montage"] = montage_json(out.montage);
            d["replies"] = replies;
            d["digest"] = snapshot_digest(out.snapshot);
            return d;
          },
          py::arg("messages") = std::vector<std::string>{}, py::arg("client") = "py")
      .def_property_readonly("tick_count", &World::tick_count)
      .def_property_readonly("time", &World::time);

  m.def(
      "ingest_command",
      [](const std::string &raw) { return ingest_command(raw, "py", ServiceConfig{}).reply(); },
      py::arg("raw"), "Validates a steering message against the default limits and returns the reply JSON.");

  m.def("default_settings_json", [] { return settings_to_json(Settings{}); });
}
