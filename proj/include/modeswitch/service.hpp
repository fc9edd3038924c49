#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "modeswitch/chat.hpp"

namespace httplib {
class Server;
}

namespace modeswitch {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  ModelKind default_model = ModelKind::continuous;
  std::uint64_t seed = 1;
  /// One JSON-lines file per session when set; sessions reload from it.
  std::optional<std::filesystem::path> session_dir;
};

/// A status code and JSON body, independent of the transport.
struct ServiceResponse {
  int status = 200;
  Json body;
};

/// HTTP front end over an immutable model stack. Requests on one session
/// are serialized; different sessions run concurrently.
class ChatService {
 public:
  ChatService(std::shared_ptr<const ModelStack> models, ServiceOptions opts);
  ~ChatService();
  ChatService(const ChatService&) = delete;
  ChatService& operator=(const ChatService&) = delete;

  /// Binds the listening socket and returns the bound port.
  int bind();
  /// Serves until stop(); bind() must have succeeded.
  void run();
  /// Stops accepting; in-flight requests finish first.
  void stop();

  ServiceResponse chat(const std::string& body);
  ServiceResponse session(const std::string& id);
  ServiceResponse health() const;

 private:
  struct Entry {
    std::mutex mu;
    ChatSession session;
    explicit Entry(ChatSession s) : session(std::move(s)) {}
  };

  std::shared_ptr<Entry> find_or_create(const std::string& id, std::optional<ModelKind> model);
  std::optional<ChatSession> restore(const std::string& id) const;
  void persist(const std::string& id, const Json& record) const;

  std::shared_ptr<const ModelStack> models_;
  ServiceOptions opts_;
  std::unique_ptr<httplib::Server> server_;
  std::mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

}  // namespace modeswitch
