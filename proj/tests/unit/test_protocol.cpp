#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "swarmlab/cluster/protocol.hpp"
#include "swarmlab/cluster/worker.hpp"

using namespace swarmlab;
using namespace swarmlab::cluster;

namespace {

std::vector<std::string> golden_lines() {
  std::ifstream in(SWARMLAB_GOLDEN_DIR "/wire_session.ndjson");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) lines.push_back(line + "\n");
  }
  return lines;
}

}  // namespace

TEST(Protocol, GoldenLinesReencodeByteForByte) {
  const auto lines = golden_lines();
  ASSERT_EQ(lines.size(), 9u);
  for (const auto& line : lines) EXPECT_EQ(encode(decode(line)), line);
}

TEST(Protocol, GoldenTasksProduceGoldenReplies) {
  const auto lines = golden_lines();
  for (std::size_t i = 0; i + 1 < lines.size(); ++i) {
    const Message m = decode(lines[i]);
    if (m.type != MessageType::task) continue;
    EXPECT_EQ(encode(handle_task(task_from(m))), lines[i + 1]) << "after line " << i;
  }
  const Message ping = decode(lines[7]);
  EXPECT_EQ(encode(make_pong(nonce_from(ping))), lines[8]);
  EXPECT_EQ(worker_name_from(decode(lines[0])), "worker-a");
}

TEST(Protocol, WorkerEvaluatesSinglePoint) {
  TaskEnvelope t;
  t.task_id = 1;
  t.objective_source = "x^2+y^2";
  t.points = {{0, {3, 4}}};
  const ResultEnvelope r = result_from(handle_task(t));
  ASSERT_EQ(r.results.size(), 1u);
  EXPECT_EQ(r.results[0].index, 0u);
  EXPECT_EQ(r.results[0].value, 25.0);
}

TEST(Protocol, UnparseableObjectiveNamesTask) {
  TaskEnvelope t;
  t.task_id = 4242;
  t.objective_source = "x + * y";
  t.points = {{0, {1, 1}}};
  const Message reply = handle_task(t);
  ASSERT_EQ(reply.type, MessageType::error);
  const ErrorEnvelope e = error_from(reply);
  EXPECT_EQ(e.task_id, 4242u);
  EXPECT_NE(e.message.find("4242"), std::string::npos);
}

TEST(Protocol, DuplicateIndicesRejected) {
  TaskEnvelope t;
  t.task_id = 2;
  t.objective_source = "x";
  t.points = {{3, {1, 1}}, {3, {2, 2}}};
  EXPECT_THROW(t.validate(), ProtocolError);
  EXPECT_EQ(handle_task(t).type, MessageType::error);
}

TEST(Protocol, CoverageCheck) {
  TaskEnvelope t;
  t.points = {{0, {0, 0}}, {5, {0, 0}}};
  ResultEnvelope r;
  r.results = {{5, 1}, {0, 2}};
  EXPECT_TRUE(r.covers(t));
  r.results = {{5, 1}, {5, 2}};
  EXPECT_FALSE(r.covers(t));
  r.results = {{0, 1}};
  EXPECT_FALSE(r.covers(t));
}

TEST(Protocol, MalformedLinesRejected) {
  EXPECT_THROW(decode("not json"), ProtocolError);
  EXPECT_THROW(decode("[1,2]"), ProtocolError);
  EXPECT_THROW(decode(R"({"type":"launch","payload":{}})"), ProtocolError);
  EXPECT_THROW(decode(R"({"payload":{}})"), ProtocolError);
  EXPECT_THROW(task_from(decode(R"({"type":"task","payload":{"task_id":1}})")), ProtocolError);
  EXPECT_THROW(result_from(decode(R"({"type":"result","payload":{"task_id":1,"results":[[0,"big"]]}})")),
               ProtocolError);
  EXPECT_THROW(task_from(decode(R"({"type":"ping","payload":{}})")), ProtocolError);
}

// Values, including non-finite ones, survive encode/decode bit-for-bit.
TEST(Protocol, ValuesRoundTripExactly) {
  std::mt19937_64 gen(8);
  ResultEnvelope r;
  r.task_id = 99;
  std::vector<double> sent;
  for (std::uint64_t i = 0; i < 2000; ++i) {
    double v;
    switch (i % 50) {
      case 0: v = std::numeric_limits<double>::quiet_NaN(); break;
      case 1: v = std::numeric_limits<double>::infinity(); break;
      case 2: v = -std::numeric_limits<double>::infinity(); break;
      case 3: v = -0.0; break;
      case 4: v = std::numeric_limits<double>::denorm_min(); break;
      default: {
        std::uint64_t bits = gen();
        std::memcpy(&v, &bits, sizeof v);
        if (!std::isfinite(v)) v = 1.0 / static_cast<double>(i);
      }
    }
    sent.push_back(v);
    r.results.push_back({i, v});
  }
  const ResultEnvelope back = result_from(decode(encode(make_result(r))));
  std::vector<double> got;
  for (const auto& v : back.results) got.push_back(v.value);
  EXPECT_TRUE(same_values(sent, got));
}

TEST(Protocol, AddressParsing) {
  const Address a = parse_address("127.0.0.1:7000");
  EXPECT_EQ(a.host, "127.0.0.1");
  EXPECT_EQ(a.port, 7000);
  EXPECT_EQ(a.str(), "127.0.0.1:7000");
  EXPECT_THROW(parse_address("localhost"), ConfigError);
  EXPECT_THROW(parse_address("host:99999"), ConfigError);
  EXPECT_THROW(parse_address(":80"), ConfigError);
  EXPECT_THROW(parse_address("h:8x"), ConfigError);
}

TEST(Protocol, BackoffSchedule) {
  WorkerOptions o;
  const long expected[] = {200, 400, 800, 1600, 3200, 5000, 5000, 5000};
  for (unsigned i = 0; i < 8; ++i) EXPECT_EQ(backoff_delay(o, i).count(), expected[i]) << i;
}
