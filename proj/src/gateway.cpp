#include "ciforge/gateway.hpp"

#include "ciforge/error.hpp"
#include "ciforge/text.hpp"

#include <httplib.h>

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <thread>

namespace ciforge::gateway {

using nlohmann::json;

namespace {

std::string dump(const json& j) { return j.dump(-1, ' ', false, json::error_handler_t::replace); }

json optional_to_json(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

}  // namespace

void ChatRequest::validate() const {
  if (user_prompt.empty()) throw Error(ErrorCode::InvalidInput, "chat request has an empty user prompt");
  if (n_samples < 1) throw Error(ErrorCode::InvalidInput, "chat request needs n_samples >= 1");
  if (max_tokens < 1) throw Error(ErrorCode::InvalidInput, "chat request needs max_tokens >= 1");
  if (!(temperature >= 0.0)) throw Error(ErrorCode::InvalidInput, "chat request temperature must be >= 0");
}

json ChatRequest::to_json() const {
  return {{"system_prompt", optional_to_json(system_prompt)},
          {"user_prompt", user_prompt},
          {"temperature", temperature},
          {"n_samples", n_samples},
          {"max_tokens", max_tokens},
          {"tag", tag}};
}

ChatRequest ChatRequest::from_json(const json& j) {
  ChatRequest r;
  if (j.contains("system_prompt") && j["system_prompt"].is_string()) r.system_prompt = j["system_prompt"].get<std::string>();
  r.user_prompt = j.at("user_prompt").get<std::string>();
  r.temperature = j.at("temperature").get<double>();
  r.n_samples = j.at("n_samples").get<int>();
  r.max_tokens = j.at("max_tokens").get<int>();
  r.tag = j.value("tag", "");
  return r;
}

std::string fingerprint(const ChatRequest& req) {
  json canonical = req.to_json();
  canonical.erase("tag");
  return text::sha256_hex(dump(canonical));
}

json ChatResponse::to_json() const {
  return {{"texts", texts},
          {"model_name", model_name},
          {"token_usage", {{"prompt_tokens", usage.prompt_tokens}, {"completion_tokens", usage.completion_tokens}}}};
}

ChatResponse ChatResponse::from_json(const json& j) {
  ChatResponse r;
  r.texts = j.at("texts").get<std::vector<std::string>>();
  r.model_name = j.value("model_name", "");
  if (j.contains("token_usage")) {
    r.usage.prompt_tokens = j["token_usage"].value("prompt_tokens", 0L);
    r.usage.completion_tokens = j["token_usage"].value("completion_tokens", 0L);
  }
  return r;
}

// --- Cassette ---------------------------------------------------------------

Cassette::Cassette(std::filesystem::path backing_file) : backing_(std::move(backing_file)) {}

std::shared_ptr<Cassette> Cassette::load(const std::filesystem::path& path, bool attach_for_append) {
  auto c = attach_for_append ? std::make_shared<Cassette>(path) : std::make_shared<Cassette>();
  if (!std::filesystem::exists(path)) {
    if (attach_for_append) return c;
    throw Error(ErrorCode::Config, "cassette not found: " + path.string());
  }
  std::size_t line_no = 0;
  for (const auto& line : text::read_lines(path)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      json rec = json::parse(line);
      ChatRequest req = ChatRequest::from_json(rec.at("request"));
      std::string fp = fingerprint(req);
      if (rec.value("fingerprint", fp) != fp)
        throw Error(ErrorCode::CassetteCorrupt,
                    path.string() + ":" + std::to_string(line_no) + " fingerprint does not match its request");
      c->entries_.emplace(fp, Entry{rec["request"], ChatResponse::from_json(rec.at("response"))});
    } catch (const json::exception& e) {
      throw Error(ErrorCode::CassetteCorrupt, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return c;
}

std::optional<ChatResponse> Cassette::lookup(const ChatRequest& req) const {
  std::string fp = fingerprint(req);
  std::lock_guard lock(mu_);
  auto it = entries_.find(fp);
  if (it == entries_.end()) return std::nullopt;
  return it->second.response;
}

bool Cassette::append(const ChatRequest& req, const ChatResponse& resp) {
  std::string fp = fingerprint(req);
  json rec = {{"fingerprint", fp}, {"request", req.to_json()}, {"response", resp.to_json()}};
  std::lock_guard lock(mu_);
  if (!entries_.emplace(fp, Entry{rec["request"], resp}).second) return false;
  if (backing_) {
    if (backing_->has_parent_path()) std::filesystem::create_directories(backing_->parent_path());
    std::ofstream out(*backing_, std::ios::app | std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot append to cassette " + backing_->string());
    out << dump(rec) << '\n';
  }
  return true;
}

std::size_t Cassette::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

void Cassette::save(const std::filesystem::path& path) const {
  std::string out;
  std::lock_guard lock(mu_);
  for (const auto& [fp, e] : entries_) {
    out += dump({{"fingerprint", fp}, {"request", e.request}, {"response", e.response.to_json()}});
    out += '\n';
  }
  text::write_file(path, out);
}

// --- modes ------------------------------------------------------------------

Mode parse_mode(std::string_view s) {
  std::string v = text::to_lower(s);
  if (v == "live") return Mode::Live;
  if (v == "record") return Mode::Record;
  if (v == "replay") return Mode::Replay;
  throw Error(ErrorCode::Config, "unknown gateway mode '" + std::string(s) + "' (live|record|replay)");
}

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::Live: return "live";
    case Mode::Record: return "record";
    case Mode::Replay: return "replay";
  }
  return "?";
}

void GatewayConfig::apply_env() {
  if (const char* base = std::getenv("CI_FORGE_API_BASE"); base && *base) api_base = base;
  if (const char* key = std::getenv("CI_FORGE_API_KEY"); key && *key) api_key = key;
}

std::chrono::milliseconds backoff_delay(const GatewayConfig& cfg, int attempt) {
  auto d = cfg.backoff_base;
  for (int i = 0; i < attempt && d < cfg.backoff_cap; ++i) d *= 2;
  return std::min(d, cfg.backoff_cap);
}

// --- HTTP transport ---------------------------------------------------------

std::pair<std::string, std::string> split_base_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::Config, "API base must include a scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, ""};
  std::string prefix = url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  return {url.substr(0, path_start), prefix};
}

namespace {

class HttplibTransport final : public Transport {
 public:
  HttplibTransport(const std::string& origin, std::chrono::seconds timeout) : client_(origin) {
    client_.set_connection_timeout(timeout);
    client_.set_read_timeout(timeout);
    client_.set_write_timeout(timeout);
  }

  HttpReply post_json(const std::string& path, const std::string& body,
                      const std::vector<std::pair<std::string, std::string>>& headers) override {
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    std::lock_guard lock(mu_);
    auto res = client_.Post(path, h, body, "application/json");
    if (!res) return {0, "", httplib::to_string(res.error())};
    return {res->status, res->body, ""};
  }

 private:
  std::mutex mu_;
  httplib::Client client_;
};

}  // namespace

std::unique_ptr<Transport> make_http_transport(const std::string& origin, std::chrono::seconds timeout) {
  return std::make_unique<HttplibTransport>(origin, timeout);
}

json to_wire(const ChatRequest& req, const std::string& model, int n) {
  json messages = json::array();
  if (req.system_prompt) messages.push_back({{"role", "system"}, {"content", *req.system_prompt}});
  messages.push_back({{"role", "user"}, {"content", req.user_prompt}});
  return {{"model", model},
          {"messages", std::move(messages)},
          {"n", n},
          {"temperature", req.temperature},
          {"max_tokens", req.max_tokens}};
}

ChatResponse from_wire(const std::string& body) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedRemoteResponse, std::string("response is not JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array())
    throw Error(ErrorCode::MalformedRemoteResponse, "response lacks a choices array");
  std::vector<std::pair<long, std::string>> indexed;
  long pos = 0;
  for (const auto& c : j["choices"]) {
    if (!c.is_object() || !c.contains("message") || !c["message"].contains("content") ||
        !c["message"]["content"].is_string())
      throw Error(ErrorCode::MalformedRemoteResponse, "choice without message.content");
    long idx = c.contains("index") && c["index"].is_number_integer() ? c["index"].get<long>() : pos;
    indexed.emplace_back(idx, c["message"]["content"].get<std::string>());
    ++pos;
  }
  std::stable_sort(indexed.begin(), indexed.end(), [](auto& a, auto& b) { return a.first < b.first; });
  ChatResponse r;
  for (auto& [_, t] : indexed) r.texts.push_back(std::move(t));
  r.model_name = j.value("model", "");
  if (j.contains("usage") && j["usage"].is_object()) {
    r.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0L);
    r.usage.completion_tokens = j["usage"].value("completion_tokens", 0L);
  }
  return r;
}

// --- gateway ----------------------------------------------------------------

ModelGateway::ModelGateway(GatewayConfig cfg, std::shared_ptr<Cassette> cassette, std::unique_ptr<Transport> transport)
    : cfg_(std::move(cfg)),
      cassette_(std::move(cassette)),
      transport_(std::move(transport)),
      inflight_(std::clamp(cfg_.max_inflight, 1, 1024)),
      sleeper_([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }) {
  if (cfg_.mode != Mode::Live && !cassette_)
    throw Error(ErrorCode::Config, std::string(to_string(cfg_.mode)) + " mode requires a cassette");
  if (cfg_.mode != Mode::Replay && !cfg_.api_base.empty()) {
    auto [origin, prefix] = split_base_url(cfg_.api_base);
    path_prefix_ = prefix;
    if (!transport_) transport_ = make_http_transport(origin, cfg_.timeout);
  }
}

ChatResponse ModelGateway::complete(const ChatRequest& req) {
  req.validate();
  if (cfg_.mode == Mode::Replay) {
    auto hit = cassette_->lookup(req);
    if (!hit)
      throw Error(ErrorCode::ReplayMiss,
                  "no cassette entry for request '" + req.tag + "' (" + fingerprint(req).substr(0, 12) + ")");
    hit->truncated = hit->texts.size() < static_cast<std::size_t>(req.n_samples);
    return *hit;
  }
  ChatResponse resp = live_call(req);
  if (cfg_.mode == Mode::Record) cassette_->append(req, resp);
  return resp;
}

ChatResponse ModelGateway::live_call(const ChatRequest& req) {
  if (cfg_.api_key.empty()) throw Error(ErrorCode::AuthMissing, "CI_FORGE_API_KEY is not set");
  if (!transport_) throw Error(ErrorCode::Config, "CI_FORGE_API_BASE is not set");

  ChatResponse total;
  // Some endpoints ignore `n`; top up with further calls until filled.
  for (int round = 0; round < req.n_samples && static_cast<int>(total.texts.size()) < req.n_samples; ++round) {
    int want = req.n_samples - static_cast<int>(total.texts.size());
    ChatResponse part = post_once(req, want);
    if (part.texts.empty()) throw Error(ErrorCode::MalformedRemoteResponse, "response contained no choices");
    for (auto& t : part.texts) {
      if (static_cast<int>(total.texts.size()) < req.n_samples) total.texts.push_back(std::move(t));
    }
    if (total.model_name.empty()) total.model_name = part.model_name;
    total.usage.prompt_tokens += part.usage.prompt_tokens;
    total.usage.completion_tokens += part.usage.completion_tokens;
  }
  return total;
}

ChatResponse ModelGateway::post_once(const ChatRequest& req, int n) {
  const std::string body = dump(to_wire(req, cfg_.model, n));
  const std::vector<std::pair<std::string, std::string>> headers = {
      {"Authorization", "Bearer " + cfg_.api_key}, {"api-key", cfg_.api_key}};
  const std::string path = path_prefix_ + "/chat/completions";

  HttpReply last;
  for (int attempt = 0; attempt <= cfg_.retry_budget; ++attempt) {
    if (attempt > 0) sleeper_(backoff_delay(cfg_, attempt - 1));
    {
      inflight_.acquire();
      struct Release {
        std::counting_semaphore<1024>& s;
        ~Release() { s.release(); }
      } release{inflight_};
      ++network_calls_;
      last = transport_->post_json(path, body, headers);
    }
    if (last.status >= 200 && last.status < 300) return from_wire(last.body);
    bool transient = last.status == 0 || last.status == 429 || last.status >= 500;
    if (!transient) break;
  }
  if (last.status == 429)
    throw Error(ErrorCode::RateLimited, "rate limited after " + std::to_string(cfg_.retry_budget) + " retries");
  if (last.status == 0) throw Error(ErrorCode::GatewayError, "transport failure: " + last.error);
  throw Error(ErrorCode::GatewayError,
              "HTTP " + std::to_string(last.status) + ": " + last.body.substr(0, std::min<std::size_t>(200, last.body.size())));
}

}  // namespace ciforge::gateway
