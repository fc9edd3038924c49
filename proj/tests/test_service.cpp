#include <doctest.h>

#include <thread>

#include "modeswitch/service.hpp"
#include "support.hpp"

// after the model headers: resolv.h defines _res, which Eigen uses
#include <httplib.h>

using namespace modeswitch;

namespace {

std::shared_ptr<const ModelStack> toy_stack(std::int64_t decoder_max_len = 128) {
  const auto ds = gen_synthetic_corpus(1, 8);
  const Vocab v = Vocab::build(ds, 1);
  const auto V = static_cast<std::int64_t>(v.size());
  auto s = std::make_shared<ModelStack>();
  s->unified = LmModel{"unified", v, Decoder(testing::toy_config(V, 16, 1, decoder_max_len), 1), 1, Json::object()};
  s->discrete = LmModel{"discrete", v, Decoder(testing::toy_config(V, 16, 1, decoder_max_len), 2), 2, Json::object()};
  s->classifier = ClassifierModel{v, ModeClassifier(testing::toy_config(V, 16, 1, 256), 3), 3, Json::object()};
  s->bridge = BridgeModel{Bridge(16, 4), s->classifier->net.params().digest(), s->discrete->decoder.params().digest(), 4,
                          Json::object()};
  for (DecodeParams* p : {&s->decode.chitchat, &s->decode.taskoriented}) p->max_new_tokens = 8;
  return s;
}

// Runs a service on an ephemeral port for the lifetime of the object.
class Running {
 public:
  explicit Running(std::shared_ptr<const ModelStack> stack, ServiceOptions opts = {})
      : svc_(std::move(stack), with_port0(std::move(opts))) {
    port_ = svc_.bind();
    thread_ = std::thread([this] { svc_.run(); });
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    for (int i = 0; i < 100 && !client_->Get("/health"); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  ~Running() {
    svc_.stop();
    thread_.join();
  }
  httplib::Client& client() { return *client_; }
  int port() const { return port_; }

  httplib::Result post(const Json& body) { return client_->Post("/chat", body.dump(), "application/json"); }

 private:
  static ServiceOptions with_port0(ServiceOptions o) {
    o.port = 0;
    return o;
  }
  ChatService svc_;
  int port_ = 0;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
};

}  // namespace

TEST_CASE("health lists the loaded models") {
  Running r(toy_stack());
  const auto res = r.client().Get("/health");
  REQUIRE(res);
  CHECK(res->status == 200);
  const Json j = Json::parse(res->body);
  CHECK(j["status"] == "ok");
  CHECK(j["models"] == Json::array({"unified", "discrete", "continuous"}));
  CHECK(res->get_header_value("Access-Control-Allow-Origin") == "*");
}

TEST_CASE("chat schema and session history") {
  Running r(toy_stack());
  for (const char* model : {"unified", "discrete", "continuous"}) {
    CAPTURE(model);
    const std::string id = std::string("s-") + model;
    Json req = {{"session_id", id}, {"utterance", "hello there"}, {"mode_override", nullptr}, {"seed", 7}, {"model", model}};
    const auto res = r.post(req);
    REQUIRE(res);
    CHECK(res->status == 200);
    const Json j = Json::parse(res->body);
    for (const char* f : {"response", "transition_sentence", "predicted_ccto", "predicted_ttnt", "model"}) {
      CHECK(j.contains(f));
    }
    CHECK(j["model"] == model);
    CHECK(j["response"].is_string());
    if (std::string(model) == "unified") {
      CHECK(j["predicted_ccto"].is_null());
    } else {
      CHECK(j["predicted_ccto"].is_string());
      CHECK(j["predicted_ttnt"].is_string());
    }

    const auto h = r.client().Get("/sessions/" + id);
    REQUIRE(h);
    CHECK(h->status == 200);
    const Json hist = Json::parse(h->body);
    REQUIRE(hist["history"].size() == 2);
    CHECK(hist["history"][0]["speaker"] == "user");
    CHECK(hist["history"][0]["text"] == "hello there");
    CHECK(hist["history"][1]["speaker"] == "system");
    CHECK(hist["history"][1]["text"] == j["response"]);
  }
  // a discrete override is echoed back as the mode
  const auto o = r.post({{"session_id", "ov"}, {"utterance", "hi"}, {"model", "discrete"},
                         {"mode_override", {{"ccto", "taskoriented"}, {"ttnt", "transition"}}}});
  REQUIRE(o);
  const Json oj = Json::parse(o->body);
  CHECK(oj["predicted_ccto"] == "taskoriented");
  CHECK(oj["predicted_ttnt"] == "transition");
}

TEST_CASE("malformed requests get 4xx with a JSON error") {
  Running r(toy_stack());
  auto status = [&](const std::string& body) {
    const auto res = r.client().Post("/chat", body, "application/json");
    REQUIRE(res);
    CAPTURE(body);
    if (res->status >= 400) CHECK(Json::parse(res->body).contains("error"));
    return res->status;
  };
  CHECK(status("{not json") == 400);
  CHECK(status("[]") == 400);
  CHECK(status(R"({"utterance":"hi"})") == 400);
  CHECK(status(R"({"session_id":"a"})") == 400);
  CHECK(status(R"({"session_id":"a","utterance":"   "})") == 400);
  CHECK(status(R"({"session_id":"../x","utterance":"hi"})") == 400);
  CHECK(status(R"({"session_id":"a","utterance":"hi","mode_override":{"ccto":"chat","ttnt":"normal"}})") == 400);
  CHECK(status(R"({"session_id":"a","utterance":"hi","mode_override":"x"})") == 400);
  CHECK(status(R"({"session_id":"a","utterance":"hi","seed":-1})") == 400);
  CHECK(status(R"({"session_id":"a","utterance":"hi","model":"gpt"})") == 400);
  CHECK(status(R"({"session_id":"a","utterance":"hi","extra":1})") == 400);
  CHECK(status(R"({"session_id":"a","utterance":"hi","model":"unified"})") == 200);
  CHECK(status(R"({"session_id":"a","utterance":"hi","model":"discrete"})") == 409);

  const auto missing = r.client().Get("/sessions/nobody");
  REQUIRE(missing);
  CHECK(missing->status == 404);
}

TEST_CASE("generation failure returns 5xx and keeps the session") {
  // a decoder too short to hold any prompt makes every discrete generation fail
  auto stack = std::const_pointer_cast<ModelStack>(toy_stack());
  stack->discrete = LmModel{"discrete", stack->discrete->vocab,
                            Decoder(testing::toy_config(static_cast<std::int64_t>(stack->discrete->vocab.size()), 16, 1, 4), 5),
                            5, Json::object()};
  Running r(stack);
  const auto res = r.post({{"session_id", "f"}, {"utterance", "hi"}, {"model", "discrete"}});
  REQUIRE(res);
  CHECK(res->status == 500);
  CHECK(Json::parse(res->body).contains("error"));
  const auto h = r.client().Get("/sessions/f");
  REQUIRE(h);
  CHECK(h->status == 200);
  CHECK(Json::parse(h->body)["history"].empty());
}

TEST_CASE("interleaved sessions never share history") {
  Running r(toy_stack());
  constexpr int kTurns = 4;
  auto talk = [&](const std::string& id) {
    httplib::Client c("127.0.0.1", r.port());
    for (int i = 0; i < kTurns; ++i) {
      const Json body = {{"session_id", id}, {"utterance", id + " says " + std::to_string(i)}, {"model", "unified"}};
      const auto res = c.Post("/chat", body.dump(), "application/json");
      REQUIRE(res);
      CHECK(res->status == 200);
    }
  };
  std::thread a(talk, "alpha"), b(talk, "beta"), c(talk, "gamma");
  a.join();
  b.join();
  c.join();
  for (const std::string id : {"alpha", "beta", "gamma"}) {
    const Json h = Json::parse(r.client().Get("/sessions/" + id)->body)["history"];
    REQUIRE(h.size() == 2 * kTurns);
    for (int i = 0; i < kTurns; ++i) {
      CHECK(h[2 * i]["speaker"] == "user");
      CHECK(h[2 * i]["text"] == id + " says " + std::to_string(i));
      CHECK(h[2 * i + 1]["speaker"] == "system");
    }
  }
}

TEST_CASE("restarted service replays identically and reloads persisted sessions") {
  testing::TempDir dir("sessions");
  const auto stack = toy_stack();
  ServiceOptions opts;
  opts.session_dir = dir.path();
  opts.default_model = ModelKind::discrete;
  std::vector<std::string> first;
  {
    Running r(stack, opts);
    for (const char* u : {"hello", "i need a taxi", "thanks"}) first.push_back(Json::parse(r.post({{"session_id", "p"}, {"utterance", u}})->body)["response"]);
  }
  CHECK(std::filesystem::exists(dir / "p.jsonl"));
  {
    Running r(stack, opts);
    const Json h = Json::parse(r.client().Get("/sessions/p")->body);
    CHECK(h["model"] == "discrete");
    REQUIRE(h["history"].size() == 6);
    CHECK(h["history"][3]["text"] == first[1]);
  }
  {
    // same history and seeds without persistence: identical responses
    Running r(stack, {.default_model = ModelKind::discrete});
    std::vector<std::string> again;
    for (const char* u : {"hello", "i need a taxi", "thanks"}) again.push_back(Json::parse(r.post({{"session_id", "p"}, {"utterance", u}})->body)["response"]);
    CHECK(again == first);
  }
}
