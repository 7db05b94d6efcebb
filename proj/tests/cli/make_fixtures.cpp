// Writes the inputs the CLI tests feed to the stickslip binary.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "oracles.hpp"
#include "scripted_session.hpp"
#include "stickslip/catalog.hpp"
#include "stickslip/service.hpp"
#include "stickslip/wav.hpp"

using namespace stickslip;

int main(int argc, char **argv) {
  if (argc != 2) {
    std::cerr << "usage: make_fixtures DIR\n";
    return 2;
  }
  const std::filesystem::path dir = argv[1];
  std::filesystem::create_directories(dir);

  write_file((dir / "source.wav").string(), encode_wav16(script::source_audio()));
  write_file((dir / "session.sslrec").string(), encode_session(script::record(10.0)));

  EventCatalog pareto;
  pareto.observation_window = 1000.0;
  const auto areas = oracle::pareto_areas(1.0, 10, 100000, 77);
  for (std::size_t i = 0; i < areas.size(); ++i) {
    const double t = 0.01 * static_cast<double>(i);
    pareto.events.push_back({i, t, t, areas[i], 0.0, static_cast<double>(areas[i])});
  }
  save_catalog((dir / "pareto.csv").string(), pareto);

  EventCatalog same;
  same.observation_window = 10.0;
  for (std::uint64_t i = 0; i < 50; ++i) same.events.push_back({i, 0.1 * i, 0.1 * i, 5, 0.0, 1.0});
  save_catalog((dir / "degenerate.csv").string(), same);

  EventCatalog one;
  one.observation_window = 1.0;
  one.events.push_back({0, 0.25, 0.3, 4, 0.01, 0.5});
  save_catalog((dir / "single.csv").string(), one);

  std::ofstream(dir / "seed3.json") << R"({"seed": 3, "ofc": {"events": 40, "burn_in": 10}})" << "\n";
  std::ofstream(dir / "bad_alpha.json") << R"({"ofc": {"alpha": 0.3}})" << "\n";
  std::ofstream(dir / "unknown_key.json") << R"({"ofc": {"alfa": 0.2}})" << "\n";
  return 0;
}
