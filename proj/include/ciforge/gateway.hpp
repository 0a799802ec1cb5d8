#pragma once

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <utility>
#include <vector>

namespace ciforge::gateway {

inline constexpr double kGenerationTemperature = 1.0;
inline constexpr double kParsingTemperature = 0.0;

struct ChatRequest {
  std::optional<std::string> system_prompt;
  std::string user_prompt;
  double temperature = kParsingTemperature;
  int n_samples = 1;
  int max_tokens = 1024;
  std::string tag;  // cassette grouping only; not part of the fingerprint

  void validate() const;
  nlohmann::json to_json() const;
  static ChatRequest from_json(const nlohmann::json& j);
};

// Stable across runs and platforms: SHA-256 over the canonical JSON of every
// request field except `tag`.
std::string fingerprint(const ChatRequest& req);

struct TokenUsage {
  long prompt_tokens = 0;
  long completion_tokens = 0;
};

struct ChatResponse {
  std::vector<std::string> texts;
  std::string model_name;
  TokenUsage usage;
  bool truncated = false;  // replayed entry holds fewer texts than requested

  nlohmann::json to_json() const;
  static ChatResponse from_json(const nlohmann::json& j);
};

// Append-only fingerprint -> response store. When constructed with a backing
// file, every new entry is appended to it as one JSONL record immediately.
class Cassette {
 public:
  Cassette() = default;
  explicit Cassette(std::filesystem::path backing_file);

  // Reads an existing JSONL cassette. Stored fingerprints are re-derived
  // from the stored requests; a mismatch raises Error{CassetteCorrupt}.
  static std::shared_ptr<Cassette> load(const std::filesystem::path& path, bool attach_for_append = false);

  std::optional<ChatResponse> lookup(const ChatRequest& req) const;
  // Returns false (and keeps the first entry) if the fingerprint exists.
  bool append(const ChatRequest& req, const ChatResponse& resp);

  std::size_t size() const;
  // Deterministic dump ordered by fingerprint.
  void save(const std::filesystem::path& path) const;

 private:
  struct Entry {
    nlohmann::json request;
    ChatResponse response;
  };
  mutable std::mutex mu_;
  std::map<std::string, Entry> entries_;
  std::optional<std::filesystem::path> backing_;
};

enum class Mode { Live, Record, Replay };
Mode parse_mode(std::string_view s);
std::string_view to_string(Mode m);

struct HttpReply {
  int status = 0;  // 0: transport failure, see `error`
  std::string body;
  std::string error;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpReply post_json(const std::string& path, const std::string& body,
                              const std::vector<std::pair<std::string, std::string>>& headers) = 0;
};

// Splits "https://host:port/prefix" into the origin and the path prefix.
std::pair<std::string, std::string> split_base_url(const std::string& url);
std::unique_ptr<Transport> make_http_transport(const std::string& origin, std::chrono::seconds timeout);

struct GatewayConfig {
  Mode mode = Mode::Replay;
  std::string api_base;
  std::string api_key;
  std::string model = "gpt-4";
  int retry_budget = 3;
  std::chrono::milliseconds backoff_base{1000};
  std::chrono::milliseconds backoff_cap{30000};
  int max_inflight = 4;
  std::chrono::seconds timeout{120};

  // CI_FORGE_API_BASE / CI_FORGE_API_KEY; unset variables leave fields empty.
  void apply_env();
};

// Backoff before retry `attempt` (0-based): base * 2^attempt, capped.
std::chrono::milliseconds backoff_delay(const GatewayConfig& cfg, int attempt);

class ModelGateway {
 public:
  // Replay requires a cassette; Record requires one to append to.
  ModelGateway(GatewayConfig cfg, std::shared_ptr<Cassette> cassette,
               std::unique_ptr<Transport> transport = nullptr);

  // Thread-safe. Errors: AuthMissing, RateLimited, ReplayMiss,
  // MalformedRemoteResponse, GatewayError.
  ChatResponse complete(const ChatRequest& req);

  Mode mode() const { return cfg_.mode; }
  int max_inflight() const { return cfg_.max_inflight; }
  std::size_t network_calls() const { return network_calls_.load(); }
  const std::shared_ptr<Cassette>& cassette() const { return cassette_; }

  void set_sleeper(std::function<void(std::chrono::milliseconds)> sleeper) { sleeper_ = std::move(sleeper); }

 private:
  ChatResponse live_call(const ChatRequest& req);
  ChatResponse post_once(const ChatRequest& req, int n);

  GatewayConfig cfg_;
  std::shared_ptr<Cassette> cassette_;
  std::unique_ptr<Transport> transport_;
  std::string path_prefix_;
  std::counting_semaphore<1024> inflight_;
  std::atomic<std::size_t> network_calls_{0};
  std::function<void(std::chrono::milliseconds)> sleeper_;
};

// Wire format helpers, exposed for tests.
nlohmann::json to_wire(const ChatRequest& req, const std::string& model, int n);
ChatResponse from_wire(const std::string& body);

}  // namespace ciforge::gateway
