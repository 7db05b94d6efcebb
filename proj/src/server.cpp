#include "stickslip/server.hpp"

#include <atomic>
#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <chrono>
#include <cmath>
#include <deque>
#include <filesystem>
#include <future>
#include <json.hpp>
#include <map>
#include <mutex>
#include <thread>

#include "stickslip/error.hpp"
#include "stickslip/service.hpp"
#include "stickslip/stats.hpp"
#include "stickslip/wav.hpp"

namespace stickslip {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using nlohmann::json;

namespace {

constexpr std::size_t kMaxQueuedMessages = 256;
constexpr std::size_t kMaxFrameBytes = 1 << 20;

struct ControlReply {
  http::status status = http::status::ok;
  json body;
};

struct Control {
  enum class Kind { start, stop } kind;
  std::promise<ControlReply> reply;
};

}  // namespace

class WsSession;

struct Server::Impl {
  explicit Impl(ServerOptions o) : options(std::move(o)) {
    options.settings.events.rows = options.settings.lattice.rows;
    options.settings.events.cols = options.settings.lattice.cols;
    options.settings.validate();
  }

  ServerOptions options;
  net::io_context ioc{1};
  tcp::acceptor acceptor{ioc};
  std::thread io_thread;
  std::thread sim_thread;
  std::atomic<bool> running{false};
  std::uint16_t bound_port = 0;

  std::mutex mail_mutex;
  std::vector<SteerCommand> mailbox;
  std::deque<std::shared_ptr<Control>> controls;

  std::mutex pub_mutex;
  std::string summary = "{}";
  std::map<std::string, std::vector<std::uint8_t>> records;

  // I/O thread only.
  std::vector<std::weak_ptr<WsSession>> sockets;
  std::uint64_t next_client = 0;

  // Simulation thread only.
  std::unique_ptr<SessionRecorder> live;
  std::optional<std::string> recording;
  std::uint64_t next_session = 0;

  const GrainCorpus *corpus() const { return options.corpus ? &*options.corpus : nullptr; }

  void enqueue(const SteerCommand &cmd) {
    std::lock_guard lock(mail_mutex);
    mailbox.push_back(cmd);
  }

  ControlReply control(Control::Kind kind) {
    if (!running) return {http::status::service_unavailable, {{"error", "server is stopping"}}};
    auto c = std::make_shared<Control>();
    c->kind = kind;
    auto future = c->reply.get_future();
    {
      std::lock_guard lock(mail_mutex);
      controls.push_back(c);
    }
    if (future.wait_for(std::chrono::seconds(5)) != std::future_status::ready)
      return {http::status::service_unavailable, {{"error", "simulation did not respond"}}};
    return future.get();
  }

  ControlReply start_session() {
    json body;
    if (recording) body["finished"] = finish_session().body;
    live = std::make_unique<SessionRecorder>(options.settings, options.seed, corpus());
    recording = "s" + std::to_string(++next_session);
    body["id"] = *recording;
    body["status"] = "recording";
    return {http::status::ok, body};
  }

  ControlReply finish_session() {
    if (!recording) return {http::status::conflict, {{"error", "no session is being recorded"}}};
    const auto record = live->record();
    auto bytes = encode_session(record);
    json body = {{"id", *recording},
                 {"ticks", record.total_ticks},
                 {"commands", record.commands.size()},
                 {"bytes", bytes.size()}};
    if (options.record_dir) {
      std::filesystem::create_directories(*options.record_dir);
      const auto path = (std::filesystem::path(*options.record_dir) / (*recording + ".sslrec")).string();
      write_file(path, bytes);
      body["path"] = path;
    }
    {
      std::lock_guard lock(pub_mutex);
      records[*recording] = std::move(bytes);
    }
    recording.reset();
    return {http::status::ok, body};
  }

  void publish_summary(const World &world) {
    const auto catalog = world.catalog();
    json doc = {{"tick", world.tick_count()},
                {"time_s", world.time()},
                {"events", catalog.size()},
                {"open_event", nullptr},
                {"b_hat", nullptr},
                {"x_min", nullptr},
                {"n_tail", nullptr},
                {"max_area", nullptr},
                {"recording", recording ? json(*recording) : json(nullptr)}};
    if (const auto open = world.snapshot().event_id) doc["open_event"] = *open;
    if (!catalog.empty()) {
      const auto areas = catalog.areas();
      doc["max_area"] = *std::max_element(areas.begin(), areas.end());
      try {
        const auto fit = fit_power_law(areas);
        doc["b_hat"] = fit.b_hat;
        doc["x_min"] = fit.x_min;
        doc["n_tail"] = fit.n_tail;
      } catch (const Error &) {
      }
    }
    std::lock_guard lock(pub_mutex);
    summary = doc.dump();
  }

  void broadcast(std::vector<std::shared_ptr<const std::string>> messages);

  void simulate() {
    const double dt = options.settings.lattice.timestep;
    const auto stride = static_cast<std::uint64_t>(std::ceil(1.0 / (dt * options.settings.service.stream_hz)));
    const auto period = std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::duration<double>(dt));
    auto deadline = std::chrono::steady_clock::now();
    std::vector<SteerCommand> batch;
    std::deque<std::shared_ptr<Control>> pending;
    std::vector<TriggerEvent> triggers;
    std::uint64_t since_stream = 0;
    std::uint64_t published_events = ~0ull;
    while (running) {
      {
        std::lock_guard lock(mail_mutex);
        batch.swap(mailbox);
        pending.swap(controls);
      }
      for (auto &c : pending) c->reply.set_value(c->kind == Control::Kind::start ? start_session() : finish_session());
      pending.clear();
      const auto out = live->tick(batch);
      batch.clear();
      triggers.insert(triggers.end(), out.triggers.begin(), out.triggers.end());
      if (++since_stream >= stride) {
        since_stream = 0;
        std::vector<std::shared_ptr<const std::string>> messages;
        messages.push_back(std::make_shared<const std::string>(snapshot_json(out.snapshot)));
        messages.push_back(std::make_shared<const std::string>(triggers_json(triggers)));
        messages.push_back(std::make_shared<const std::string>(light_json(out.light)));
        messages.push_back(std::make_shared<const std::string>(montage_json(out.montage)));
        triggers.clear();
        broadcast(std::move(messages));
        const auto n = live->world().catalog().size();
        if (n != published_events || out.snapshot.tick % 1000 == 0) {
          publish_summary(live->world());
          published_events = n;
        }
      }
      deadline += period;
      const auto now = std::chrono::steady_clock::now();
      // Wall clock only schedules ticks; after a long stall we resume rather
      // than burst to catch up.
      if (now - deadline > std::chrono::milliseconds(250)) deadline = now;
      std::this_thread::sleep_until(deadline);
    }
    std::lock_guard lock(mail_mutex);
    for (auto &c : controls) c->reply.set_value({http::status::service_unavailable, {{"error", "server is stopping"}}});
    controls.clear();
  }

  http::response<http::string_body> handle(const http::request<http::string_body> &req);
  void accept();
};

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket &&socket, Server::Impl *server, std::string client_id)
      : ws_(std::move(socket)), server_(server), client_id_(std::move(client_id)) {}

  void run(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.read_message_max(kMaxFrameBytes);
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->server_->sockets.push_back(self);
      self->send(std::make_shared<const std::string>(
          json{{"type", "hello"}, {"client_id", self->client_id_}}.dump()));
      self->read();
    });
  }

  void send(std::shared_ptr<const std::string> message) {
    if (closed_ || queue_.size() >= kMaxQueuedMessages) return;
    queue_.push_back(std::move(message));
    if (queue_.size() == 1) write();
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->close();
        return;
      }
      const auto text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      const auto result = ingest_command(text, self->client_id_, self->server_->options.settings.service);
      if (result.command) self->server_->enqueue(*result.command);
      self->send(std::make_shared<const std::string>(result.reply()));
      self->read();
    });
  }

  void write() {
    ws_.text(true);
    ws_.async_write(net::buffer(*queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->close();
        return;
      }
      self->queue_.pop_front();
      if (!self->queue_.empty()) self->write();
    });
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    queue_.clear();
    SteerCommand release;
    release.kind = SteerKind::release;
    release.client_id = client_id_;
    server_->enqueue(release);
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  std::deque<std::shared_ptr<const std::string>> queue_;
  Server::Impl *server_;
  std::string client_id_;
  bool closed_ = false;
};

void Server::Impl::broadcast(std::vector<std::shared_ptr<const std::string>> messages) {
  net::post(ioc, [this, messages = std::move(messages)] {
    std::erase_if(sockets, [](const auto &w) { return w.expired(); });
    for (const auto &w : sockets)
      if (auto s = w.lock())
        for (const auto &m : messages) s->send(m);
  });
}

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket &&socket, Server::Impl *server) : stream_(std::move(socket)), server_(server) {}

  void run() { read(); }

 private:
  void read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
        return;
      }
      if (websocket::is_upgrade(self->req_)) {
        self->stream_.expires_never();
        auto id = "c" + std::to_string(++self->server_->next_client);
        std::make_shared<WsSession>(self->stream_.release_socket(), self->server_, std::move(id))
            ->run(std::move(self->req_));
        return;
      }
      self->respond();
    });
  }

  void respond() {
    res_ = std::make_shared<http::response<http::string_body>>(server_->handle(req_));
    http::async_write(stream_, *res_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (self->res_->need_eof()) {
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
        return;
      }
      self->read();
    });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  std::shared_ptr<http::response<http::string_body>> res_;
  Server::Impl *server_;
};

http::response<http::string_body> Server::Impl::handle(const http::request<http::string_body> &req) {
  auto reply = [&](http::status status, const std::string &body, const char *type = "application/json") {
    http::response<http::string_body> res{status, req.version()};
    res.set(http::field::server, "stickslip");
    res.set(http::field::content_type, type);
    res.set(http::field::access_control_allow_origin, "*");
    res.keep_alive(req.keep_alive());
    res.body() = body;
    res.prepare_payload();
    return res;
  };
  auto error = [&](http::status status, const std::string &what) {
    return reply(status, json{{"error", what}}.dump());
  };
  const std::string target(req.target());
  const auto path = target.substr(0, target.find('?'));
  const bool get = req.method() == http::verb::get;
  const bool post = req.method() == http::verb::post;

  if (path == "/health") {
    if (!get) return error(http::status::method_not_allowed, "use GET");
    return reply(http::status::ok, json{{"status", "ok"}}.dump());
  }
  if (path == "/config") {
    if (!get) return error(http::status::method_not_allowed, "use GET");
    return reply(http::status::ok, settings_to_json(options.settings));
  }
  if (path == "/stats/summary") {
    if (!get) return error(http::status::method_not_allowed, "use GET");
    std::lock_guard lock(pub_mutex);
    return reply(http::status::ok, summary);
  }
  if (path == "/session/start" || path == "/session/stop") {
    if (!post) return error(http::status::method_not_allowed, "use POST");
    const auto r = control(path == "/session/start" ? Control::Kind::start : Control::Kind::stop);
    return reply(r.status, r.body.dump());
  }
  const std::string prefix = "/session/";
  const std::string suffix = "/record";
  if (path.size() > prefix.size() + suffix.size() && path.starts_with(prefix) && path.ends_with(suffix)) {
    if (!get) return error(http::status::method_not_allowed, "use GET");
    const auto id = path.substr(prefix.size(), path.size() - prefix.size() - suffix.size());
    std::lock_guard lock(pub_mutex);
    const auto it = records.find(id);
    if (it == records.end()) return error(http::status::not_found, "no finished session '" + id + "'");
    return reply(http::status::ok, std::string(it->second.begin(), it->second.end()), "application/octet-stream");
  }
  return error(http::status::not_found, "no route for " + path);
}

void Server::Impl::accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (!acceptor.is_open()) return;
    if (!ec) std::make_shared<HttpSession>(std::move(socket), this)->run();
    accept();
  });
}

Server::Server(ServerOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Server::~Server() { stop(); }

void Server::start() {
  auto &s = *impl_;
  const tcp::endpoint endpoint{net::ip::make_address(s.options.address), s.options.port};
  s.acceptor.open(endpoint.protocol());
  s.acceptor.set_option(net::socket_base::reuse_address(true));
  s.acceptor.bind(endpoint);
  s.acceptor.listen(net::socket_base::max_listen_connections);
  s.bound_port = s.acceptor.local_endpoint().port();
  s.live = std::make_unique<SessionRecorder>(s.options.settings, s.options.seed, s.corpus());
  if (s.options.record_dir) s.start_session();
  s.publish_summary(s.live->world());
  s.running = true;
  s.accept();
  s.sim_thread = std::thread([&s] { s.simulate(); });
  s.io_thread = std::thread([&s] { s.ioc.run(); });
}

void Server::stop() {
  auto &s = *impl_;
  if (!s.running.exchange(false)) return;
  if (s.sim_thread.joinable()) s.sim_thread.join();
  if (s.recording) s.finish_session();
  net::post(s.ioc, [&s] {
    beast::error_code ec;
    s.acceptor.close(ec);
  });
  s.ioc.stop();
  if (s.io_thread.joinable()) s.io_thread.join();
}

void Server::run_until_signal() {
  net::io_context signals_ctx;
  net::signal_set signals(signals_ctx, SIGINT, SIGTERM);
  signals.async_wait([](beast::error_code, int) {});
  signals_ctx.run();
  stop();
}

std::uint16_t Server::port() const { return impl_->bound_port; }

}  // namespace stickslip
