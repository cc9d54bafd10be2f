#include "rrmp/backend.hpp"

#include <httplib.h>
#include <openssl/evp.h>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <thread>

namespace rrmp {

std::string to_string(ChatRole r) {
    switch (r) {
        case ChatRole::System: return "system";
        case ChatRole::User: return "user";
        case ChatRole::Assistant: return "assistant";
    }
    throw Error("InvalidValue", "unknown chat role");
}

ChatRole chat_role_from_string(const std::string& s) {
    if (s == "system") return ChatRole::System;
    if (s == "user") return ChatRole::User;
    if (s == "assistant") return ChatRole::Assistant;
    throw Error("InvalidValue", "unknown chat role '" + s + "'");
}

std::string to_string(FinishReason r) {
    switch (r) {
        case FinishReason::Stop: return "stop";
        case FinishReason::Length: return "length";
        case FinishReason::Error: return "error";
    }
    throw Error("InvalidValue", "unknown finish reason");
}

FinishReason finish_reason_from_string(const std::string& s) {
    if (s == "stop") return FinishReason::Stop;
    if (s == "length") return FinishReason::Length;
    if (s == "error") return FinishReason::Error;
    throw Error("InvalidValue", "unknown finish reason '" + s + "'");
}

void to_json(json& j, const ChatMessage& m) {
    j = json{{"role", to_string(m.role)}, {"content", m.content}};
}
void from_json(const json& j, ChatMessage& m) {
    m.role = chat_role_from_string(j.at("role").get<std::string>());
    m.content = j.at("content").get<std::string>();
}

void to_json(json& j, const ChatRequest& r) {
    j = json{{"model", r.model}, {"messages", r.messages}, {"temperature", r.temperature}};
    detail::opt_to(j, "seed", r.seed);
    detail::opt_to(j, "max_tokens", r.max_tokens);
}
void from_json(const json& j, ChatRequest& r) {
    r.model = j.at("model").get<std::string>();
    r.messages = j.at("messages").get<std::vector<ChatMessage>>();
    r.temperature = j.at("temperature").get<double>();
    detail::opt_from(j, "seed", r.seed);
    detail::opt_from(j, "max_tokens", r.max_tokens);
}

void to_json(json& j, const ChatResponse& r) {
    j = json{{"content", r.content},
             {"finish_reason", to_string(r.finish_reason)},
             {"usage", json{{"prompt_tokens", r.usage.prompt_tokens},
                            {"completion_tokens", r.usage.completion_tokens}}}};
}
void from_json(const json& j, ChatResponse& r) {
    r.content = j.at("content").get<std::string>();
    r.finish_reason = finish_reason_from_string(j.at("finish_reason").get<std::string>());
    r.usage.prompt_tokens = j.at("usage").at("prompt_tokens").get<long long>();
    r.usage.completion_tokens = j.at("usage").at("completion_tokens").get<long long>();
}

std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("InternalError", "sha256 digest failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 0xF]);
    }
    return out;
}

std::string cache_key(const ChatRequest& req) {
    // nlohmann objects keep keys sorted; dump() emits no whitespace.
    json j = req;
    return sha256_hex(j.dump());
}

namespace {

const std::string& last_user_message(const ChatRequest& req) {
    static const std::string empty;
    for (auto it = req.messages.rbegin(); it != req.messages.rend(); ++it) {
        if (it->role == ChatRole::User) return it->content;
    }
    return empty;
}

// Deterministic approximate token accounting for offline backends.
Usage approx_usage(const ChatRequest& req, const std::string& response) {
    long long prompt_chars = 0;
    for (const auto& m : req.messages) prompt_chars += static_cast<long long>(m.content.size());
    return Usage{prompt_chars / 4, static_cast<long long>(response.size()) / 4};
}

std::string utc_now_iso8601() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

// ---------------------------------------------------------------------------
// ScriptedBackend

ScriptedBackend::ScriptedBackend(std::vector<ScriptEntry> script)
    : script_(std::move(script)), consumed_(script_.size(), false) {}

ChatResponse ScriptedBackend::complete(const ChatRequest& req) {
    std::lock_guard<std::mutex> lock(mu_);
    ++calls_;
    const std::string& haystack = last_user_message(req);
    for (size_t i = 0; i < script_.size(); ++i) {
        if (consumed_[i]) continue;
        if (haystack.find(script_[i].match) != std::string::npos) {
            consumed_[i] = true;
            ChatResponse resp;
            resp.content = script_[i].response;
            resp.finish_reason = FinishReason::Stop;
            resp.usage = approx_usage(req, resp.content);
            return resp;
        }
    }
    throw Error("ScriptExhausted",
                "no unconsumed script entry matches the last user message (" +
                    std::to_string(script_.size()) + " entries total)");
}

long long ScriptedBackend::calls() const {
    std::lock_guard<std::mutex> lock(mu_);
    return calls_;
}

size_t ScriptedBackend::remaining() const {
    std::lock_guard<std::mutex> lock(mu_);
    size_t n = 0;
    for (bool c : consumed_)
        if (!c) ++n;
    return n;
}

// ---------------------------------------------------------------------------
// HttpBackend

HttpBackend::HttpBackend(BackendConfig cfg) : cfg_(std::move(cfg)) {
    validate_backend_config(cfg_);
    const std::string& url = *cfg_.endpoint_url;
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error("ContradictoryConfig", "endpoint_url must start with http:// or https://");
    }
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        base_ = url;
        path_ = "/v1/chat/completions";
    } else {
        base_ = url.substr(0, path_start);
        std::string p = url.substr(path_start);
        while (p.size() > 1 && p.back() == '/') p.pop_back();
        if (p.ends_with("/chat/completions")) {
            path_ = p;
        } else if (p == "/") {
            path_ = "/v1/chat/completions";
        } else {
            path_ = p + "/chat/completions";
        }
    }
}

ChatResponse HttpBackend::complete(const ChatRequest& req) {
    const char* key = std::getenv(cfg_.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
        throw Error("AuthMissing",
                    "environment variable '" + cfg_.api_key_env + "' is not set");
    }
    {
        std::lock_guard<std::mutex> lock(mu_);
        ++calls_;
    }

    json body = req;
    const std::string payload = body.dump();
    httplib::Headers headers{{"Authorization", std::string("Bearer ") + key}};

    std::string last_failure = "no attempt made";
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        if (attempt > 0) {
            auto delay = std::chrono::milliseconds(250 << (attempt - 1));
            std::this_thread::sleep_for(delay);
        }
        httplib::Client cli(base_);
        cli.set_connection_timeout(std::chrono::milliseconds(
            static_cast<long long>(cfg_.timeout_seconds * 1000)));
        cli.set_read_timeout(std::chrono::milliseconds(
            static_cast<long long>(cfg_.timeout_seconds * 1000)));
        cli.enable_server_certificate_verification(false);

        auto res = cli.Post(path_, headers, payload, "application/json");
        if (!res) {
            last_failure = "transport error: " + httplib::to_string(res.error());
            continue;  // connection failures and timeouts are retryable
        }
        if (res->status == 401 || res->status == 403) {
            throw Error("AuthMissing", "endpoint rejected credentials (HTTP " +
                                           std::to_string(res->status) + ")");
        }
        if (res->status == 429 || res->status >= 500) {
            last_failure = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw Error("MalformedResponse",
                        "HTTP " + std::to_string(res->status) + ": " + res->body);
        }
        try {
            json j = json::parse(res->body);
            const json& choice = j.at("choices").at(0);
            ChatResponse resp;
            resp.content = choice.at("message").at("content").get<std::string>();
            std::string finish = choice.value("finish_reason", "stop");
            resp.finish_reason =
                finish == "length" ? FinishReason::Length : FinishReason::Stop;
            if (j.contains("usage")) {
                resp.usage.prompt_tokens = j["usage"].value("prompt_tokens", 0LL);
                resp.usage.completion_tokens = j["usage"].value("completion_tokens", 0LL);
            }
            return resp;
        } catch (const json::exception& e) {
            throw Error("MalformedResponse",
                        std::string("cannot parse completion response: ") + e.what());
        }
    }
    throw Error("Timeout", "request failed after " + std::to_string(cfg_.max_retries + 1) +
                               " attempts; last failure: " + last_failure);
}

long long HttpBackend::calls() const {
    std::lock_guard<std::mutex> lock(mu_);
    return calls_;
}

// ---------------------------------------------------------------------------
// ReplayBackend

ReplayBackend::ReplayBackend(std::string cache_path, std::shared_ptr<Backend> delegate)
    : cache_path_(std::move(cache_path)), delegate_(std::move(delegate)) {
    std::ifstream in(cache_path_);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            json j = json::parse(line);
            cache_[j.at("key").get<std::string>()] = j.at("response").get<ChatResponse>();
        } catch (const json::exception& e) {
            throw Error("MalformedResponse", "replay cache '" + cache_path_ + "' line " +
                                                 std::to_string(line_no) + ": " + e.what());
        }
    }
}

ChatResponse ReplayBackend::complete(const ChatRequest& req) {
    const std::string key = cache_key(req);
    {
        std::lock_guard<std::mutex> lock(mu_);
        ++calls_;
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
    }
    if (!delegate_) {
        throw Error("ReplayMiss",
                    "request " + key.substr(0, 12) + "... not in cache and no delegate configured");
    }
    ChatResponse resp = delegate_->complete(req);
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto [it, inserted] = cache_.emplace(key, resp);
        if (!inserted) return it->second;  // another thread stored it first
        json record{{"key", key},
                    {"request", req},
                    {"response", resp},
                    {"created_at", utc_now_iso8601()}};
        std::ofstream out(cache_path_, std::ios::app);
        if (!out) {
            throw Error("InfrastructureError", "cannot append to replay cache '" + cache_path_ + "'");
        }
        out << record.dump() << '\n';
    }
    return resp;
}

long long ReplayBackend::calls() const {
    std::lock_guard<std::mutex> lock(mu_);
    return calls_;
}

size_t ReplayBackend::cache_size() const {
    std::lock_guard<std::mutex> lock(mu_);
    return cache_.size();
}

// ---------------------------------------------------------------------------

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg) {
    validate_backend_config(cfg);
    switch (cfg.kind) {
        case BackendKind::Scripted:
            return std::make_unique<ScriptedBackend>(*cfg.script);
        case BackendKind::Http:
            return std::make_unique<HttpBackend>(cfg);
        case BackendKind::Replay: {
            std::shared_ptr<Backend> delegate;
            if (cfg.script.has_value()) {
                delegate = std::make_shared<ScriptedBackend>(*cfg.script);
            } else if (cfg.endpoint_url.has_value()) {
                BackendConfig inner = cfg;
                inner.kind = BackendKind::Http;
                inner.cache_path.reset();
                delegate = std::make_shared<HttpBackend>(inner);
            }
            return std::make_unique<ReplayBackend>(*cfg.cache_path, std::move(delegate));
        }
    }
    throw Error("ContradictoryConfig", "unknown backend kind");
}

}  // namespace rrmp
