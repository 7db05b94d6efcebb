#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "stickslip/config.hpp"
#include "stickslip/sonifier.hpp"

namespace stickslip {

struct ServerOptions {
  Settings settings;
  std::uint64_t seed = 7;
  std::string address = "127.0.0.1";
  std::uint16_t port = 8080;              // 0 picks a free port
  std::optional<std::string> record_dir;  // session records are written here on stop
  std::optional<GrainCorpus> corpus;      // enables trigger streaming
};

/// Live session server: HTTP and WebSocket on one port. A dedicated thread
/// runs the fixed-timestep simulation and drains the command mailbox at tick
/// boundaries; one I/O thread handles every connection.
///
/// HTTP: GET /health, GET /config, GET /stats/summary, POST /session/start,
/// POST /session/stop, GET /session/{id}/record.
/// WebSocket: clients send {"type":"steer",...}; the server replies with an
/// ack or error per message and streams state, triggers, light and montage
/// messages at stream_hz.
class Server {
 public:
  explicit Server(ServerOptions options);
  ~Server();

  Server(const Server &) = delete;
  Server &operator=(const Server &) = delete;

  /// Binds, then starts the simulation and I/O threads.
  void start();
  /// Stops both threads; finishes an open recording first.
  void stop();
  /// Blocks until SIGINT or SIGTERM, then stops.
  void run_until_signal();

  std::uint16_t port() const;

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace stickslip
