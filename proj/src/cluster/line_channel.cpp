#include "swarmlab/cluster/line_channel.hpp"

#include <sys/socket.h>

#include <istream>

#include <boost/asio/connect.hpp>
#include <boost/asio/read_until.hpp>
#include <boost/asio/write.hpp>

namespace swarmlab::cluster {

namespace asio = boost::asio;
using asio::ip::tcp;

LineChannel::LineChannel(tcp::socket socket) : socket_(std::move(socket)) {
  boost::system::error_code ec;
  socket_.set_option(tcp::no_delay(true), ec);
  const auto ep = socket_.remote_endpoint(ec);
  peer_ = ec ? std::string("?") : ep.address().to_string() + ":" + std::to_string(ep.port());
}

std::optional<std::string> LineChannel::read_line() {
  boost::system::error_code ec;
  const std::size_t n = asio::read_until(socket_, buffer_, '\n', ec);
  if (ec) return std::nullopt;
  std::string line(n, '\0');
  std::istream in(&buffer_);
  in.read(line.data(), static_cast<std::streamsize>(n));
  if (!line.empty() && line.back() == '\n') line.pop_back();
  return line;
}

std::optional<Message> LineChannel::read_message() {
  auto line = read_line();
  if (!line) return std::nullopt;
  return decode(*line);
}

bool LineChannel::write_line(std::string_view line) {
  std::lock_guard lock(write_mutex_);
  boost::system::error_code ec;
  asio::write(socket_, asio::buffer(line.data(), line.size()), ec);
  return !ec;
}

void LineChannel::shutdown() {
  // Native shutdown so a reader blocked in recv() on another thread wakes up.
  ::shutdown(socket_.native_handle(), SHUT_RDWR);
}

void LineChannel::shutdown_read() { ::shutdown(socket_.native_handle(), SHUT_RD); }

std::string LineChannel::peer() const { return peer_; }

tcp::socket connect_to(asio::io_context& io, const Address& address) {
  boost::system::error_code ec;
  tcp::resolver resolver(io);
  const auto endpoints = resolver.resolve(address.host, std::to_string(address.port), ec);
  if (ec) throw ConnectError("cannot resolve " + address.str() + ": " + ec.message());
  tcp::socket socket(io);
  asio::connect(socket, endpoints, ec);
  if (ec) throw ConnectError("cannot connect to " + address.str() + ": " + ec.message());
  return socket;
}

}  // namespace swarmlab::cluster
