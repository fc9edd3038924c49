#include "modeswitch/service.hpp"

#include <fstream>
#include <regex>

#include <httplib.h>

#include "modeswitch/digest.hpp"

namespace modeswitch {

namespace {

class BadRequest : public std::runtime_error {
 public:
  BadRequest(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

ServiceResponse error(int status, const std::string& msg) { return {status, {{"error", msg}}}; }

bool valid_session_id(const std::string& id) {
  static const std::regex re("[A-Za-z0-9_.-]{1,128}");
  return std::regex_match(id, re) && id != "." && id != "..";
}

const Json& field(const Json& j, const char* name) {
  if (!j.contains(name)) throw BadRequest(400, std::string("missing field '") + name + "'");
  return j.at(name);
}

std::string string_field(const Json& j, const char* name) {
  const Json& v = field(j, name);
  if (!v.is_string()) throw BadRequest(400, std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

std::optional<GenerationMode> parse_override(const Json& j) {
  if (!j.contains("mode_override") || j.at("mode_override").is_null()) return std::nullopt;
  const Json& o = j.at("mode_override");
  if (!o.is_object()) throw BadRequest(400, "mode_override must be an object or null");
  for (const auto& [k, v] : o.items()) {
    if (k != "ccto" && k != "ttnt") throw BadRequest(400, "unknown mode_override field '" + k + "'");
  }
  try {
    return GenerationMode{parse_mode(string_field(o, "ccto")), parse_turn_kind(string_field(o, "ttnt"))};
  } catch (const std::invalid_argument& e) {
    throw BadRequest(400, std::string("mode_override: ") + e.what());
  }
}

std::optional<std::uint64_t> parse_seed(const Json& j) {
  if (!j.contains("seed") || j.at("seed").is_null()) return std::nullopt;
  const Json& s = j.at("seed");
  if (!s.is_number_unsigned()) throw BadRequest(400, "seed must be a non-negative integer or null");
  return s.get<std::uint64_t>();
}

Json override_json(const std::optional<GenerationMode>& m) {
  if (!m) return nullptr;
  return {{"ccto", to_string(m->ccto)}, {"ttnt", to_string(m->ttnt)}};
}

}  // namespace

ChatService::ChatService(std::shared_ptr<const ModelStack> models, ServiceOptions opts)
    : models_(std::move(models)), opts_(std::move(opts)), server_(std::make_unique<httplib::Server>()) {
  if (opts_.session_dir) std::filesystem::create_directories(*opts_.session_dir);
  server_->set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
  auto send = [](httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server_->Post("/chat", [this, send](const httplib::Request& req, httplib::Response& res) { send(res, chat(req.body)); });
  server_->Get("/health", [this, send](const httplib::Request&, httplib::Response& res) { send(res, health()); });
  server_->Get(R"(/sessions/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, session(req.matches[1]));
  });
  server_->Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
}

ChatService::~ChatService() { stop(); }

int ChatService::bind() {
  int port = opts_.port;
  if (port == 0) {
    port = server_->bind_to_any_port(opts_.host);
  } else if (!server_->bind_to_port(opts_.host, port)) {
    port = -1;
  }
  if (port < 0) throw std::runtime_error("cannot bind " + opts_.host + ":" + std::to_string(opts_.port));
  return port;
}

void ChatService::run() { server_->listen_after_bind(); }

void ChatService::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

ServiceResponse ChatService::health() const {
  return {200, {{"status", "ok"}, {"models", models_->available()}, {"default_model", to_string(opts_.default_model)}}};
}

std::optional<ChatSession> ChatService::restore(const std::string& id) const {
  if (!opts_.session_dir) return std::nullopt;
  const auto path = *opts_.session_dir / (id + ".jsonl");
  std::ifstream f(path);
  if (!f) return std::nullopt;
  std::string line;
  if (!std::getline(f, line)) return std::nullopt;
  const Json head = Json::parse(line);
  ChatSession s(id, parse_model_kind(head.at("model").get<std::string>()), head.at("seed").get<std::uint64_t>());
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const Json rec = Json::parse(line);
    s.replay(rec.at("utterance").get<std::string>(), ChatReply::from_json(rec.at("reply")));
  }
  return s;
}

void ChatService::persist(const std::string& id, const Json& record) const {
  if (!opts_.session_dir) return;
  std::ofstream f(*opts_.session_dir / (id + ".jsonl"), std::ios::app);
  f << record.dump() << "\n";
  if (!f) throw std::runtime_error("cannot append to session file for " + id);
}

std::shared_ptr<ChatService::Entry> ChatService::find_or_create(const std::string& id, std::optional<ModelKind> model) {
  std::lock_guard lock(sessions_mu_);
  if (auto it = sessions_.find(id); it != sessions_.end()) return it->second;
  if (auto s = restore(id)) return sessions_.emplace(id, std::make_shared<Entry>(std::move(*s))).first->second;
  const ModelKind kind = model.value_or(opts_.default_model);
  if (!models_->has(kind)) throw BadRequest(400, "model '" + to_string(kind) + "' is not loaded");
  ChatSession s(id, kind, mix_seed(opts_.seed, id));
  persist(id, {{"session_id", id}, {"model", to_string(kind)}, {"seed", s.seed()}});
  return sessions_.emplace(id, std::make_shared<Entry>(std::move(s))).first->second;
}

ServiceResponse ChatService::chat(const std::string& body) {
  std::shared_ptr<Entry> entry;
  std::string utterance;
  std::optional<GenerationMode> mode;
  std::optional<std::uint64_t> seed;
  try {
    const Json j = Json::parse(body);
    if (!j.is_object()) throw BadRequest(400, "request body must be a JSON object");
    for (const auto& [k, v] : j.items()) {
      if (k != "session_id" && k != "utterance" && k != "mode_override" && k != "seed" && k != "model") {
        throw BadRequest(400, "unknown field '" + k + "'");
      }
    }
    const std::string id = string_field(j, "session_id");
    if (!valid_session_id(id)) throw BadRequest(400, "session_id must match [A-Za-z0-9_.-]{1,128}");
    utterance = string_field(j, "utterance");
    if (utterance.find_first_not_of(" \t\r\n") == std::string::npos) throw BadRequest(400, "utterance is empty");
    mode = parse_override(j);
    seed = parse_seed(j);
    std::optional<ModelKind> model;
    if (j.contains("model") && !j.at("model").is_null()) {
      try {
        model = parse_model_kind(string_field(j, "model"));
      } catch (const std::invalid_argument& e) {
        throw BadRequest(400, e.what());
      }
    }
    entry = find_or_create(id, model);
    if (model && *model != entry->session.model()) {
      throw BadRequest(409, "session " + id + " uses model " + to_string(entry->session.model()));
    }
  } catch (const Json::exception& e) {
    return error(400, std::string("malformed JSON: ") + e.what());
  } catch (const BadRequest& e) {
    return error(e.status(), e.what());
  }

  std::lock_guard lock(entry->mu);
  try {
    const ChatReply r = entry->session.respond(*models_, utterance, mode, seed);
    persist(entry->session.id(),
            {{"utterance", utterance}, {"mode_override", override_json(mode)}, {"seed", seed ? Json(*seed) : Json(nullptr)},
             {"reply", r.to_json()}});
    Json out = r.to_json();
    out["session_id"] = entry->session.id();
    return {200, out};
  } catch (const std::exception& e) {
    return error(500, std::string("generation failed: ") + e.what());
  }
}

ServiceResponse ChatService::session(const std::string& id) {
  if (!valid_session_id(id)) return error(400, "invalid session id");
  std::shared_ptr<Entry> entry;
  {
    std::lock_guard lock(sessions_mu_);
    if (auto it = sessions_.find(id); it != sessions_.end()) {
      entry = it->second;
    } else if (auto s = restore(id)) {
      entry = sessions_.emplace(id, std::make_shared<Entry>(std::move(*s))).first->second;
    }
  }
  if (!entry) return error(404, "no session " + id);
  std::lock_guard lock(entry->mu);
  return {200, entry->session.history_json()};
}

}  // namespace modeswitch
