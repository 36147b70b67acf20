#pragma once

#include <filesystem>
#include <memory>
#include <optional>

#include "swarmlab/cluster/protocol.hpp"
#include "swarmlab/server/registry.hpp"

namespace swarmlab::server {

struct HttpServerOptions {
  std::string listen = "127.0.0.1:8080";
  std::optional<std::filesystem::path> static_dir;  // served for GET outside the API
};

/// HTTP + WebSocket front end over a SessionRegistry.
///
///   POST  /sessions                       {"objective": text, "config": {...}}   -> 201 session
///   POST  /sessions/{id}/start|stop|reset                                       -> 200 session, 409 on state error
///   PATCH /sessions/{id}/params           {"num_particles", "objective", "c1"+"c2", "tick_interval_ms"}
///                                                                               -> 202 {"queued": [...]}
///   GET   /sessions/{id}                                                        -> 200 session
///   GET   /functions                                                            -> 200 [{"name", "source"}]
///   GET   /sessions/{id}/stream           WebSocket: {"type":"snapshot"|"frame","frame":{...}}
///                                                    {"type":"gap","dropped":n}
///
/// Errors are {"error": {"kind", "message", ...}}; parse errors add "offset" and
/// "expected". Unknown session ids answer 404.
class HttpServer {
 public:
  /// Binds and starts serving on background threads. Throws StartupError.
  HttpServer(SessionRegistry& registry, HttpServerOptions options);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  cluster::Address address() const;
  /// Closes the listener and every open connection, then joins. Idempotent.
  void shutdown();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace swarmlab::server
