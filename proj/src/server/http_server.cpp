#include "swarmlab/server/http_server.hpp"

#include <sys/socket.h>

#include <atomic>
#include <fstream>
#include <list>
#include <sstream>
#include <thread>

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "swarmlab/cluster/head.hpp"

namespace swarmlab::server {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using asio::ip::tcp;
using nlohmann::json;

using Request = http::request<http::string_body>;
using Response = http::response<http::string_body>;

namespace {

struct HttpError {
  http::status status;
  json body;
};

HttpError error_body(http::status status, std::string kind, std::string message) {
  return {status, {{"error", {{"kind", std::move(kind)}, {"message", std::move(message)}}}}};
}

HttpError parse_error_body(const expr::ParseError& e) {
  HttpError err = error_body(http::status::bad_request, "parse", e.what());
  auto& detail = err.body["error"];
  detail["parse_kind"] = expr::to_string(e.kind());
  detail["offset"] = e.offset();
  detail["expected"] = e.expected();
  if (!e.identifier().empty()) detail["identifier"] = e.identifier();
  return err;
}

std::vector<std::string> split_path(std::string_view target) {
  const auto q = target.find('?');
  if (q != std::string_view::npos) target = target.substr(0, q);
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < target.size()) {
    if (target[i] == '/') {
      ++i;
      continue;
    }
    const auto j = target.find('/', i);
    parts.emplace_back(target.substr(i, j == std::string_view::npos ? std::string_view::npos : j - i));
    if (j == std::string_view::npos) break;
    i = j;
  }
  return parts;
}

json parse_body(const Request& req) {
  if (req.body().empty()) return json::object();
  try {
    json j = json::parse(req.body());
    if (!j.is_object()) throw HttpError(error_body(http::status::bad_request, "bad_request", "body must be a JSON object"));
    return j;
  } catch (const json::parse_error& e) {
    throw error_body(http::status::bad_request, "bad_request", std::string("invalid JSON body: ") + e.what());
  }
}

std::string_view mime_type(const std::filesystem::path& p) {
  const std::string ext = p.extension().string();
  if (ext == ".html" || ext == ".htm") return "text/html";
  if (ext == ".js" || ext == ".mjs") return "text/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json" || ext == ".map") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  if (ext == ".ico") return "image/x-icon";
  return "application/octet-stream";
}

// True once the peer has closed its end; never blocks.
bool peer_closed(tcp::socket& socket) {
  char byte;
  const auto n = ::recv(socket.native_handle(), &byte, 1, MSG_PEEK | MSG_DONTWAIT);
  return n == 0;
}

std::vector<ParamChange> changes_from_json(const json& body, const SwarmConfig& current) {
  std::vector<ParamChange> changes;
  std::optional<double> c1, c2;
  try {
    for (const auto& [key, value] : body.items()) {
      if (key == "objective") {
        changes.emplace_back(SetObjective{ObjectiveExpr::parse(value.get<std::string>())});
      } else if (key == "num_particles") {
        changes.emplace_back(SetNumParticles{value.get<std::size_t>()});
      } else if (key == "c1") {
        c1 = value.get<double>();
      } else if (key == "c2") {
        c2 = value.get<double>();
      } else if (key == "tick_interval_ms") {
        changes.emplace_back(SetTickInterval{std::chrono::milliseconds(value.get<std::int64_t>())});
      } else {
        throw ConfigError("unknown parameter '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid parameter value: ") + e.what());
  }
  if (c1 || c2) changes.emplace_back(SetLearningFactors{c1.value_or(current.c1), c2.value_or(current.c2)});
  if (changes.empty()) throw ConfigError("no parameters given");
  return changes;
}

}  // namespace

struct HttpServer::Impl {
  struct Connection {
    std::shared_ptr<tcp::socket> socket;
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };

  SessionRegistry& registry;
  HttpServerOptions options;
  asio::io_context io;
  tcp::acceptor acceptor{io};
  cluster::Address bound;
  std::thread accept_thread;
  std::atomic<bool> stopping{false};
  std::mutex mutex;
  std::list<Connection> connections;

  Impl(SessionRegistry& r, HttpServerOptions o) : registry(r), options(std::move(o)) {
    const cluster::Address want = cluster::parse_address(options.listen);
    boost::system::error_code ec;
    tcp::resolver resolver(io);
    const auto results = resolver.resolve(want.host, std::to_string(want.port), ec);
    if (ec || results.empty()) {
      throw cluster::StartupError("cannot resolve listen address " + want.str() + ": " + ec.message());
    }
    const tcp::endpoint endpoint = results.begin()->endpoint();
    acceptor.open(endpoint.protocol(), ec);
    if (!ec) acceptor.set_option(tcp::acceptor::reuse_address(true), ec);
    if (!ec) acceptor.bind(endpoint, ec);
    if (!ec) acceptor.listen(asio::socket_base::max_listen_connections, ec);
    if (ec) throw cluster::StartupError("cannot listen on " + want.str() + ": " + ec.message());
    bound.host = want.host;
    bound.port = acceptor.local_endpoint().port();
    accept_thread = std::thread([this] { accept_loop(); });
  }

  void accept_loop() {
    while (!stopping) {
      boost::system::error_code ec;
      auto socket = std::make_shared<tcp::socket>(io);
      acceptor.accept(*socket, ec);
      if (stopping) break;
      if (ec) continue;
      auto done = std::make_shared<std::atomic<bool>>(false);
      std::lock_guard lock(mutex);
      for (auto it = connections.begin(); it != connections.end();) {
        if (*it->done) {
          it->thread.join();
          it = connections.erase(it);
        } else {
          ++it;
        }
      }
      connections.push_back({socket, std::thread([this, socket, done] {
                               serve(*socket);
                               *done = true;
                             }),
                             done});
    }
  }

  void shutdown() {
    if (stopping.exchange(true)) return;
    ::shutdown(acceptor.native_handle(), SHUT_RDWR);
    if (accept_thread.joinable()) accept_thread.join();
    std::lock_guard lock(mutex);
    for (auto& c : connections) ::shutdown(c.socket->native_handle(), SHUT_RDWR);
    for (auto& c : connections) c.thread.join();
    connections.clear();
    boost::system::error_code ec;
    acceptor.close(ec);
  }

  void serve(tcp::socket& socket) {
    beast::flat_buffer buffer;
    while (!stopping) {
      boost::system::error_code ec;
      http::request_parser<http::string_body> parser;
      parser.body_limit(4 * 1024 * 1024);
      http::read(socket, buffer, parser, ec);
      if (ec) break;
      Request req = parser.release();
      if (websocket::is_upgrade(req)) {
        serve_stream(socket, std::move(req));
        return;
      }
      Response res = handle(req);
      res.keep_alive(req.keep_alive());
      res.prepare_payload();
      http::write(socket, res, ec);
      if (ec || res.need_eof()) break;
    }
    boost::system::error_code ec;
    socket.shutdown(tcp::socket::shutdown_send, ec);
  }

  static Response make_response(const Request& req, http::status status, std::string body,
                                std::string_view content_type = "application/json") {
    Response res{status, req.version()};
    res.set(http::field::server, "swarmlab");
    res.set(http::field::content_type, beast::string_view(content_type.data(), content_type.size()));
    res.set(http::field::access_control_allow_origin, "*");
    res.body() = std::move(body);
    return res;
  }

  static Response json_response(const Request& req, http::status status, const json& body) {
    return make_response(req, status, body.dump());
  }

  Response handle(const Request& req) {
    try {
      return route(req);
    } catch (const HttpError& e) {
      return json_response(req, e.status, e.body);
    } catch (const expr::ParseError& e) {
      return json_response(req, parse_error_body(e).status, parse_error_body(e).body);
    } catch (const NotFoundError& e) {
      const auto err = error_body(http::status::not_found, "not_found", e.what());
      return json_response(req, err.status, err.body);
    } catch (const StateError& e) {
      auto err = error_body(http::status::conflict, "state", e.what());
      err.body["error"]["status"] = to_string(e.current());
      return json_response(req, err.status, err.body);
    } catch (const ConfigError& e) {
      const auto err = error_body(http::status::bad_request, "config", e.what());
      return json_response(req, err.status, err.body);
    } catch (const EvaluationError& e) {
      const auto err = error_body(http::status::unprocessable_entity, "evaluation", e.what());
      return json_response(req, err.status, err.body);
    } catch (const std::exception& e) {
      const auto err = error_body(http::status::internal_server_error, "internal", e.what());
      return json_response(req, err.status, err.body);
    }
  }

  Response route(const Request& req) {
    const auto path = split_path(std::string_view(req.target().data(), req.target().size()));
    const auto method = req.method();

    if (method == http::verb::options) {
      Response res = make_response(req, http::status::no_content, "");
      res.set(http::field::access_control_allow_methods, "GET, POST, PATCH, OPTIONS");
      res.set(http::field::access_control_allow_headers, "Content-Type");
      return res;
    }

    if (path.size() == 1 && path[0] == "functions") {
      if (method != http::verb::get) throw method_not_allowed();
      json list = json::array();
      for (const auto& e : expr::builtin_catalog()) list.push_back({{"name", e.name}, {"source", e.source}});
      return json_response(req, http::status::ok, list);
    }

    if (!path.empty() && path[0] == "sessions") {
      if (path.size() == 1) {
        if (method != http::verb::post) throw method_not_allowed();
        const json body = parse_body(req);
        if (!body.contains("objective") || !body["objective"].is_string()) {
          throw error_body(http::status::bad_request, "bad_request", "\"objective\" (string) is required");
        }
        for (const auto& [key, value] : body.items()) {
          if (key != "objective" && key != "config") throw ConfigError("unknown key '" + key + "'");
        }
        auto session = registry.create(body["objective"].get<std::string>(), body.value("config", json::object()));
        return json_response(req, http::status::created, session->describe());
      }
      auto session = registry.find(path[1]);
      if (path.size() == 2) {
        if (method != http::verb::get) throw method_not_allowed();
        return json_response(req, http::status::ok, session->describe());
      }
      if (path.size() == 3) {
        const std::string& action = path[2];
        if (action == "params") {
          if (method != http::verb::patch) throw method_not_allowed();
          auto changes = changes_from_json(parse_body(req), session->config());
          json queued = json::array();
          for (const auto& c : changes) queued.push_back(to_string(c));
          session->enqueue(std::move(changes));
          return json_response(req, http::status::accepted,
                               json{{"queued", queued}, {"pending_changes", session->pending_changes()}});
        }
        if (action == "start" || action == "stop" || action == "reset") {
          if (method != http::verb::post) throw method_not_allowed();
          if (action == "start") session->start();
          if (action == "stop") session->stop();
          if (action == "reset") session->reset();
          return json_response(req, http::status::ok, session->describe());
        }
        if (action == "stream") {
          throw error_body(http::status::upgrade_required, "bad_request", "stream requires a WebSocket upgrade");
        }
      }
      throw error_body(http::status::not_found, "not_found", "no route for " + std::string(req.target()));
    }

    if (options.static_dir && method == http::verb::get) return serve_static(req, path);
    throw error_body(http::status::not_found, "not_found", "no route for " + std::string(req.target()));
  }

  static HttpError method_not_allowed() {
    return error_body(http::status::method_not_allowed, "bad_request", "method not allowed");
  }

  Response serve_static(const Request& req, const std::vector<std::string>& path) {
    std::filesystem::path file = *options.static_dir;
    for (const auto& part : path) {
      if (part == ".." || part == ".") throw error_body(http::status::not_found, "not_found", "bad path");
      file /= part;
    }
    if (path.empty() || std::filesystem::is_directory(file)) file /= "index.html";
    std::ifstream in(file, std::ios::binary);
    if (!in) throw error_body(http::status::not_found, "not_found", "no file " + std::string(req.target()));
    std::ostringstream content;
    content << in.rdbuf();
    return make_response(req, http::status::ok, content.str(), mime_type(file));
  }

  void serve_stream(tcp::socket& socket, Request req) {
    const auto path = split_path(std::string_view(req.target().data(), req.target().size()));
    std::shared_ptr<Session> session;
    try {
      if (path.size() != 3 || path[0] != "sessions" || path[2] != "stream") {
        throw NotFoundError("no stream at " + std::string(req.target()));
      }
      session = registry.find(path[1]);
    } catch (const NotFoundError& e) {
      const auto err = error_body(http::status::not_found, "not_found", e.what());
      Response res = json_response(req, err.status, err.body);
      res.prepare_payload();
      boost::system::error_code ec;
      http::write(socket, res, ec);
      socket.shutdown(tcp::socket::shutdown_send, ec);
      return;
    }

    websocket::stream<tcp::socket&> ws(socket);
    boost::system::error_code ec;
    ws.accept(req, ec);
    if (ec) return;
    ws.text(true);
    auto queue = session->subscribe();
    const std::string snapshot = R"({"type":"snapshot","frame":)" + to_json(session->snapshot()).dump() + "}";
    ws.write(asio::buffer(snapshot), ec);
    beast::flat_buffer inbound;
    while (!ec && !stopping) {
      if (auto item = queue->pop(std::chrono::milliseconds(100))) {
        const std::string msg = item->frame ? R"({"type":"frame","frame":)" + *item->frame + "}"
                                            : R"({"type":"gap","dropped":)" + std::to_string(item->dropped) + "}";
        ws.write(asio::buffer(msg), ec);
      } else if (queue->closed()) {
        break;
      }
      // Client messages are only read to notice close frames and dead peers.
      if (!ec && socket.available(ec) > 0) {
        ws.read(inbound, ec);
        inbound.clear();
      } else if (!ec && peer_closed(socket)) {
        break;
      }
    }
    session->unsubscribe(queue);
    if (!ec) ws.close(websocket::close_code::going_away, ec);
  }
};

HttpServer::HttpServer(SessionRegistry& registry, HttpServerOptions options)
    : impl_(std::make_unique<Impl>(registry, std::move(options))) {}

HttpServer::~HttpServer() { shutdown(); }

cluster::Address HttpServer::address() const { return impl_->bound; }

void HttpServer::shutdown() { impl_->shutdown(); }

}  // namespace swarmlab::server
