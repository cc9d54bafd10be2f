#pragma once
// Chat-completion backends behind one interface: a live HTTP client for
// OpenAI-compatible endpoints, a deterministic scripted backend for tests,
// and a record/replay cache wrapping either. All backends are safe to call
// from concurrent path executions.

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "rrmp/core.hpp"

namespace rrmp {

enum class ChatRole { System, User, Assistant };

std::string to_string(ChatRole r);
ChatRole chat_role_from_string(const std::string& s);

struct ChatMessage {
    ChatRole role = ChatRole::User;
    std::string content;
    bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;  // non-empty; first may be system
    double temperature = 0.0;
    std::optional<long long> seed;
    std::optional<int> max_tokens;
    bool operator==(const ChatRequest&) const = default;
};

enum class FinishReason { Stop, Length, Error };

std::string to_string(FinishReason r);
FinishReason finish_reason_from_string(const std::string& s);

struct Usage {
    long long prompt_tokens = 0;
    long long completion_tokens = 0;
    bool operator==(const Usage&) const = default;
};

struct ChatResponse {
    std::string content;
    FinishReason finish_reason = FinishReason::Stop;
    Usage usage;
    bool operator==(const ChatResponse&) const = default;
};

void to_json(json& j, const ChatMessage& m);
void from_json(const json& j, ChatMessage& m);
void to_json(json& j, const ChatRequest& r);
void from_json(const json& j, ChatRequest& r);
void to_json(json& j, const ChatResponse& r);
void from_json(const json& j, ChatResponse& r);

// Deterministic digest of (model, messages, temperature, seed, max_tokens)
// under canonical serialization (sorted field names, no whitespace); 64 hex chars.
std::string cache_key(const ChatRequest& req);

// SHA-256 of arbitrary bytes as lowercase hex. Shared with config hashing.
std::string sha256_hex(const std::string& data);

class Backend {
public:
    virtual ~Backend() = default;

    // Thread-safe; never mutates the request.
    virtual ChatResponse complete(const ChatRequest& req) = 0;

    // Number of complete() invocations served by this object.
    virtual long long calls() const = 0;
};

// Ordered first-match-consume script. The matcher is a substring test against
// the last user message; an empty matcher matches any request.
class ScriptedBackend : public Backend {
public:
    explicit ScriptedBackend(std::vector<ScriptEntry> script);

    ChatResponse complete(const ChatRequest& req) override;
    long long calls() const override;

    size_t remaining() const;  // unconsumed entries

private:
    mutable std::mutex mu_;
    std::vector<ScriptEntry> script_;
    std::vector<bool> consumed_;
    long long calls_ = 0;
};

// OpenAI-compatible chat-completions client (POST, bearer auth). Retries with
// exponential backoff capped at max_retries. The API key is read from the
// environment variable named in the config, never stored.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(BackendConfig cfg);

    ChatResponse complete(const ChatRequest& req) override;
    long long calls() const override;

private:
    BackendConfig cfg_;
    std::string base_;  // scheme://host[:port]
    std::string path_;  // resource path ending in /chat/completions
    mutable std::mutex mu_;
    long long calls_ = 0;
};

// Append-only record/replay cache over an optional delegate. Hits are served
// from the cache file; misses go to the delegate (when present) and are
// appended. Without a delegate a miss raises ReplayMiss.
class ReplayBackend : public Backend {
public:
    ReplayBackend(std::string cache_path, std::shared_ptr<Backend> delegate);

    ChatResponse complete(const ChatRequest& req) override;
    long long calls() const override;

    size_t cache_size() const;

private:
    std::string cache_path_;
    std::shared_ptr<Backend> delegate_;
    mutable std::mutex mu_;
    std::unordered_map<std::string, ChatResponse> cache_;
    long long calls_ = 0;
};

// Builds the backend described by the config. For Replay the delegate is
// inferred: script present => Scripted, endpoint_url present => Http,
// neither => cache-only.
std::unique_ptr<Backend> make_backend(const BackendConfig& cfg);

}  // namespace rrmp
