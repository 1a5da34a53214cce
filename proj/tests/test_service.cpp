#include <gtest/gtest.h>

#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

#include <filesystem>
#include <thread>

#include "iqrl/env/service.hpp"
#include "iqrl/iq/estimator.hpp"

using namespace iqrl;
using nlohmann::json;

namespace {

std::string socket_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("iqrl-test-" + name + "-" + std::to_string(::getpid()) + ".sock")).string();
}

iq::IqModel spread_model() {
  iq::IqModel m;
  m.vocab = corpus::build_vocab(corpus::Corpus{{"v", {{0, "which bus do you want", "the 61a please", 5},
                                                       {1, "sorry say that again", "61a", 4}}}});
  m.config.vocab_size = m.vocab.size();
  m.config.embedding_dim = 5;
  m.config.turn_hidden = 4;
  m.config.attention_dim = 3;
  m.config.dialogue_hidden = 4;
  m.params = iq::init_parameters(m.config);
  Rng rng(9);
  for (auto& [name, t] : m.params)
    for (double& v : t.data()) v = uniform(rng, -1.0, 1.0);
  return m;
}

corpus::AnnotatedDialogue random_transcript(Rng& rng, std::size_t i) {
  static const std::vector<std::string> words{"which", "bus", "sorry", "again", "61a", "the", "please", "\"quoted\"",
                                              "tab\there", "new\nline", "\xc3\xa9t\xc3\xa9"};
  corpus::AnnotatedDialogue d{"t" + std::to_string(i), {}};
  const std::size_t turns = 1 + uniform_index(rng, 6);
  for (std::size_t t = 0; t < turns; ++t) {
    std::string sys, user;
    for (std::size_t k = 0; k < 1 + uniform_index(rng, 5); ++k) sys += words[uniform_index(rng, words.size())] + " ";
    for (std::size_t k = 0; k < uniform_index(rng, 4); ++k) user += words[uniform_index(rng, words.size())] + " ";
    d.turns.push_back({t, sys, user, std::nullopt});
  }
  return d;
}

/// Runs a service on a background thread for the lifetime of the object.
struct RunningService {
  env::IqService service;
  std::thread thread;
  RunningService(const std::string& path, env::EstimateHandler h) : service(path, std::move(h)) {
    thread = std::thread([this] { service.run(); });
  }
  ~RunningService() {
    service.stop();
    thread.join();
  }
};

int connect_raw(const std::string& path) {
  const sockaddr_un addr = env::detail::unix_address(path);
  const int fd = ::socket(AF_UNIX, SOCK_STREAM, 0);
  if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0) {
    ::close(fd);
    return -1;
  }
  return fd;
}

}  // namespace

TEST(WireProtocol, RequestRoundTrip) {
  const corpus::AnnotatedDialogue d{"ep-1", {{0, "hello", "bus \"61a\"", std::nullopt}, {1, "ok", "", std::nullopt}}};
  const std::string line = env::wire::encode_request("ep-1", d);
  EXPECT_EQ(line, "{\"id\":\"ep-1\",\"turns\":[{\"system_text\":\"hello\",\"user_text\":\"bus \\\"61a\\\"\"},"
                  "{\"system_text\":\"ok\",\"user_text\":\"\"}]}\n");
  json id;
  const env::wire::Request r = env::wire::parse_request(line, id);
  EXPECT_EQ(r.id, "ep-1");
  EXPECT_EQ(r.transcript, d);
}

TEST(WireProtocol, ResponsesPreserveEveryBit) {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    env::IqEstimate e;
    e.iq = 1 + static_cast<int>(uniform_index(rng, 5));
    for (double& p : e.probs) p = uniform01(rng) * std::pow(10.0, uniform(rng, -300, 0));
    EXPECT_EQ(env::wire::parse_response(env::wire::encode_response(i, e), i).probs, e.probs);
  }
}

TEST(WireProtocol, MalformedRequestsGetErrorWithNullId) {
  auto reply = [](const std::string& line) {
    return json::parse(env::handle_request_line(line, [](const corpus::AnnotatedDialogue&) { return env::IqEstimate{}; }));
  };
  for (const std::string bad : {"not json", "[1,2]", "{\"turns\":[]}", "{\"id\":[1],\"turns\":[]}"}) {
    const json r = reply(bad);
    EXPECT_TRUE(r["id"].is_null()) << bad;
    EXPECT_TRUE(r.contains("error")) << bad;
  }
  const json r = reply("{\"id\":7,\"turns\":[{\"system_text\":1}]}");
  EXPECT_EQ(r["id"], 7);
  EXPECT_TRUE(r.contains("error"));
  EXPECT_TRUE(reply("{\"id\":\"e\",\"turns\":[]}").contains("error"));
}

TEST(WireProtocol, ResponseChecks) {
  EXPECT_THROW(env::wire::parse_response("{\"id\":\"b\",\"iq\":3,\"probs\":[0,0,1,0,0]}", "a"), ParseError);
  EXPECT_THROW(env::wire::parse_response("{\"id\":\"a\",\"iq\":6,\"probs\":[0,0,1,0,0]}", "a"), ParseError);
  EXPECT_THROW(env::wire::parse_response("{\"id\":\"a\",\"iq\":3,\"probs\":[0,1]}", "a"), ParseError);
  EXPECT_THROW(env::wire::parse_response("{\"id\":null,\"error\":\"x\"}", "a"), Error);
}

TEST(IqService, MatchesInProcessBitwise) {
  const iq::IqModel model = spread_model();
  const std::string path = socket_path("bitwise");
  RunningService svc(path, iq::model_handler(model));
  env::ServiceIqEstimator remote(path);
  iq::InProcessIqEstimator local(model);
  Rng rng(4);
  for (std::size_t i = 0; i < 100; ++i) {
    const auto d = random_transcript(rng, i);
    const env::IqEstimate a = remote.estimate(d, {}), b = local.estimate(d, {});
    EXPECT_EQ(a.iq, b.iq);
    EXPECT_EQ(a.probs, b.probs);
  }
}

TEST(IqService, ConcurrentClientsKeepTheirOrder) {
  const iq::IqModel model = spread_model();
  const std::string path = socket_path("concurrent");
  RunningService svc(path, iq::model_handler(model));
  std::vector<std::thread> clients;
  std::vector<int> failures(4, 0);
  for (int c = 0; c < 4; ++c) {
    clients.emplace_back([&, c] {
      const int fd = connect_raw(path);
      if (fd < 0) {
        failures[c] = -1;
        return;
      }
      Rng rng(static_cast<std::uint64_t>(100 + c));
      std::vector<corpus::AnnotatedDialogue> sent;
      std::string batch;
      for (std::size_t i = 0; i < 25; ++i) {
        sent.push_back(random_transcript(rng, i));
        batch += env::wire::encode_request(c * 1000 + static_cast<int>(i), sent.back());
      }
      env::detail::write_all(fd, batch);
      env::detail::LineReader reader(fd);
      std::string line;
      for (std::size_t i = 0; i < sent.size(); ++i) {
        if (!reader.next(line)) {
          ++failures[c];
          break;
        }
        const env::IqEstimate got = env::wire::parse_response(line, c * 1000 + static_cast<int>(i));
        const iq::IqPrediction want = model.predict_final(sent[i]);
        if (got.probs != want.probs || got.iq != want.iq) ++failures[c];
      }
      ::close(fd);
    });
  }
  for (auto& t : clients) t.join();
  EXPECT_EQ(failures, std::vector<int>(4, 0));
}

TEST(IqService, HandlerErrorsNameTheEpisode) {
  const std::string path = socket_path("errors");
  RunningService svc(path, [](const corpus::AnnotatedDialogue&) -> env::IqEstimate { throw Error("model exploded"); });
  env::ServiceIqEstimator remote(path);
  try {
    remote.estimate({"episode-42", {{0, "a", "b", std::nullopt}}}, {});
    FAIL();
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("episode-42"), std::string::npos) << msg;
    EXPECT_NE(msg.find("model exploded"), std::string::npos) << msg;
  }
}

TEST(IqService, TimeoutNamesTheEpisode) {
  const std::string path = socket_path("silent");
  const sockaddr_un addr = env::detail::unix_address(path);
  ::unlink(path.c_str());
  const int listener = ::socket(AF_UNIX, SOCK_STREAM, 0);
  ASSERT_EQ(::bind(listener, reinterpret_cast<const sockaddr*>(&addr), sizeof addr), 0);
  ASSERT_EQ(::listen(listener, 4), 0);
  {
    env::ServiceIqEstimator remote(path, 0.2);
    try {
      remote.estimate({"episode-7", {{0, "a", "b", std::nullopt}}}, {});
      FAIL();
    } catch (const Error& e) {
      const std::string msg = e.what();
      EXPECT_NE(msg.find("episode-7"), std::string::npos) << msg;
      EXPECT_NE(msg.find("timed out"), std::string::npos) << msg;
    }
  }
  ::close(listener);
  ::unlink(path.c_str());
}

TEST(IqService, ConnectFailureIsReported) {
  EXPECT_THROW(env::ServiceIqEstimator(socket_path("absent")), Error);
}
