#pragma once

#include <cstddef>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/streambuf.hpp>

#include "swarmlab/cluster/protocol.hpp"

namespace swarmlab::cluster {

/// Blocking newline-framed channel over a connected TCP socket. One reader
/// at a time; writes are serialized internally so any thread may send.
class LineChannel {
 public:
  static constexpr std::size_t kMaxLine = 64 * 1024 * 1024;

  explicit LineChannel(boost::asio::ip::tcp::socket socket);
  LineChannel(const LineChannel&) = delete;
  LineChannel& operator=(const LineChannel&) = delete;

  /// Next line without its terminator; nullopt on EOF or socket error.
  std::optional<std::string> read_line();

  /// Next decoded message; nullopt on EOF. Throws ProtocolError on garbage.
  std::optional<Message> read_message();

  /// False if the peer is gone.
  bool write_line(std::string_view line_with_newline);
  bool send(const Message& message) { return write_line(encode(message)); }

  /// Wakes any blocked reader and makes later I/O fail. Idempotent.
  void shutdown();
  /// Wakes a blocked reader but leaves the write side open.
  void shutdown_read();

  std::string peer() const;

 private:
  boost::asio::ip::tcp::socket socket_;
  boost::asio::streambuf buffer_{kMaxLine};
  std::mutex write_mutex_;
  std::string peer_;
};

/// Resolves and connects; throws ConnectError on failure.
boost::asio::ip::tcp::socket connect_to(boost::asio::io_context& io, const Address& address);

class ConnectError : public Error {
 public:
  using Error::Error;
};

}  // namespace swarmlab::cluster
