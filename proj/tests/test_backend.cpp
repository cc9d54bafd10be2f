#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>
#include <httplib.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include "rrmp/backend.hpp"
#include "test_util.hpp"

using namespace rrmp;

namespace {

ChatRequest request_saying(const std::string& user_text) {
    ChatRequest req;
    req.model = "scripted-model";
    req.messages = {ChatMessage{ChatRole::System, "sys"}, ChatMessage{ChatRole::User, user_text}};
    req.temperature = 0.0;
    return req;
}

std::string temp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "rrmp_backend_tests";
    std::filesystem::create_directories(dir);
    return (dir / name).string();
}

}  // namespace

TEST_CASE("scripted backend serves the first matching entry") {
    ScriptedBackend backend({ScriptEntry{"capital of France", "Paris. FINAL ANSWER: (B)"}});
    auto resp = backend.complete(request_saying("What is the capital of France?"));
    CHECK(resp.content == "Paris. FINAL ANSWER: (B)");
    CHECK(resp.finish_reason == FinishReason::Stop);
    CHECK(backend.calls() == 1);
}

TEST_CASE("scripted backend consumes entries in order") {
    ScriptedBackend backend({ScriptEntry{"", "first"}, ScriptEntry{"", "second"}});
    CHECK(backend.complete(request_saying("anything")).content == "first");
    CHECK(backend.complete(request_saying("anything")).content == "second");
    CHECK(backend.remaining() == 0);
}

TEST_CASE("empty script raises ScriptExhausted") {
    ScriptedBackend backend({});
    try {
        backend.complete(request_saying("hello"));
        FAIL("expected ScriptExhausted");
    } catch (const Error& e) {
        CHECK(e.code() == "ScriptExhausted");
    }
}

TEST_CASE("matcher tests the last user message only") {
    ScriptedBackend backend({ScriptEntry{"needle", "hit"}});
    ChatRequest req;
    req.model = "m";
    req.messages = {ChatMessage{ChatRole::User, "needle in the first turn"},
                    ChatMessage{ChatRole::Assistant, "reply"},
                    ChatMessage{ChatRole::User, "haystack only"}};
    CHECK_THROWS_AS(backend.complete(req), Error);
    req.messages.push_back(ChatMessage{ChatRole::Assistant, "x"});
    req.messages.push_back(ChatMessage{ChatRole::User, "a needle again"});
    CHECK(backend.complete(req).content == "hit");
}

TEST_CASE("complete never mutates the request") {
    ScriptedBackend backend({ScriptEntry{"", "out"}});
    ChatRequest req = request_saying("payload");
    ChatRequest copy = req;
    backend.complete(req);
    CHECK(req == copy);
}

TEST_CASE("cache_key determinism and sensitivity") {
    ChatRequest a = request_saying("question");
    ChatRequest b = request_saying("question");
    CHECK(cache_key(a) == cache_key(b));
    CHECK(cache_key(a).size() == 64);

    ChatRequest warm = a;
    warm.temperature = 0.7;
    CHECK(cache_key(warm) != cache_key(a));

    ChatRequest reordered = a;
    std::swap(reordered.messages[0], reordered.messages[1]);
    CHECK(cache_key(reordered) != cache_key(a));

    ChatRequest seeded = a;
    seeded.seed = 7;
    CHECK(cache_key(seeded) != cache_key(a));
}

TEST_CASE("replay cache hit serves without consulting the delegate") {
    std::string cache = temp_path("hit.jsonl");
    std::remove(cache.c_str());
    auto delegate = std::make_shared<ScriptedBackend>(
        std::vector<ScriptEntry>{ScriptEntry{"", "answer"}});
    ReplayBackend replay(cache, delegate);

    ChatRequest req = request_saying("same request");
    auto first = replay.complete(req);
    auto second = replay.complete(req);
    CHECK(first == second);
    CHECK(delegate->calls() == 1);
    CHECK(replay.cache_size() == 1);
}

TEST_CASE("replay cache persists across instances and works without a delegate") {
    std::string cache = temp_path("persist.jsonl");
    std::remove(cache.c_str());
    {
        auto delegate = std::make_shared<ScriptedBackend>(
            std::vector<ScriptEntry>{ScriptEntry{"", "recorded"}});
        ReplayBackend recorder(cache, delegate);
        CHECK(recorder.complete(request_saying("q1")).content == "recorded");
    }
    ReplayBackend offline(cache, nullptr);
    CHECK(offline.complete(request_saying("q1")).content == "recorded");
    try {
        offline.complete(request_saying("not recorded"));
        FAIL("expected ReplayMiss");
    } catch (const Error& e) {
        CHECK(e.code() == "ReplayMiss");
    }
}

TEST_CASE("property: replay over scripted is exactly transparent") {
    // Distinct requests, as the engine produces: a repeated identical request
    // is a cache hit by definition and is covered separately above.
    std::vector<ScriptEntry> script{ScriptEntry{"alpha", "A1"}, ScriptEntry{"", "B1"},
                                    ScriptEntry{"beta", "C1"}};
    std::vector<ChatRequest> sequence{request_saying("alpha first"), request_saying("gamma next"),
                                      request_saying("beta last")};

    // direct run, fresh script
    ScriptedBackend direct(script);
    std::vector<std::string> direct_out;
    for (const auto& r : sequence) direct_out.push_back(direct.complete(r).content);

    // replayed run, fresh script each time
    std::string cache = temp_path("transparent.jsonl");
    std::remove(cache.c_str());
    ReplayBackend wrapped(cache, std::make_shared<ScriptedBackend>(script));
    std::vector<std::string> wrapped_out;
    for (const auto& r : sequence) wrapped_out.push_back(wrapped.complete(r).content);

    CHECK(direct_out == wrapped_out);
}

TEST_CASE("make_backend enforces config invariants") {
    BackendConfig http;
    http.kind = BackendKind::Http;
    CHECK_THROWS_AS(make_backend(http), Error);

    BackendConfig scripted;
    scripted.kind = BackendKind::Scripted;
    CHECK_THROWS_AS(make_backend(scripted), Error);

    BackendConfig replay;
    replay.kind = BackendKind::Replay;
    CHECK_THROWS_AS(make_backend(replay), Error);

    replay.cache_path = temp_path("make.jsonl");
    std::remove(replay.cache_path->c_str());
    CHECK_NOTHROW(make_backend(replay));
}

// ---------------------------------------------------------------------------
// Live HTTP round trip against an in-process server

namespace {

struct LocalServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    int requests = 0;

    LocalServer() {
        server.Post("/v1/chat/completions", [this](const httplib::Request& req,
                                                    httplib::Response& res) {
            ++requests;
            if (req.get_header_value("Authorization") != "Bearer test-key-123") {
                res.status = 401;
                res.set_content("{\"error\":\"bad key\"}", "application/json");
                return;
            }
            json body = json::parse(req.body);
            std::string last_user;
            for (const auto& m : body.at("messages")) {
                if (m.at("role") == "user") last_user = m.at("content").get<std::string>();
            }
            json reply{
                {"choices",
                 json::array({json{{"message", json{{"role", "assistant"},
                                                    {"content", "echo: " + last_user +
                                                                    " FINAL ANSWER: (B)"}}},
                              {"finish_reason", "stop"}}})},
                {"usage", json{{"prompt_tokens", 11}, {"completion_tokens", 7}}}};
            res.set_content(reply.dump(), "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this]() { server.listen_after_bind(); });
        server.wait_until_ready();
    }

    ~LocalServer() {
        server.stop();
        thread.join();
    }
};

}  // namespace

TEST_CASE("http backend round trip against a local endpoint") {
    LocalServer local;
    BackendConfig cfg;
    cfg.kind = BackendKind::Http;
    cfg.endpoint_url = "http://127.0.0.1:" + std::to_string(local.port) + "/v1";
    cfg.model = "local-test";
    cfg.api_key_env = "RRMP_TEST_KEY";
    cfg.timeout_seconds = 5;
    cfg.max_retries = 0;

    SUBCASE("missing key raises AuthMissing before any call") {
        unsetenv("RRMP_TEST_KEY");
        HttpBackend backend(cfg);
        try {
            backend.complete(request_saying("hi"));
            FAIL("expected AuthMissing");
        } catch (const Error& e) {
            CHECK(e.code() == "AuthMissing");
        }
        CHECK(local.requests == 0);
    }

    SUBCASE("successful completion parses content and usage") {
        setenv("RRMP_TEST_KEY", "test-key-123", 1);
        HttpBackend backend(cfg);
        auto resp = backend.complete(request_saying("ping"));
        CHECK(resp.content == "echo: ping FINAL ANSWER: (B)");
        CHECK(resp.usage.prompt_tokens == 11);
        CHECK(resp.usage.completion_tokens == 7);
    }

    SUBCASE("rejected key maps to AuthMissing") {
        setenv("RRMP_TEST_KEY", "wrong-key", 1);
        HttpBackend backend(cfg);
        try {
            backend.complete(request_saying("hi"));
            FAIL("expected AuthMissing");
        } catch (const Error& e) {
            CHECK(e.code() == "AuthMissing");
        }
    }

    SUBCASE("replay over http records and replays offline") {
        setenv("RRMP_TEST_KEY", "test-key-123", 1);
        std::string cache = temp_path("http_replay.jsonl");
        std::remove(cache.c_str());
        BackendConfig replay_cfg = cfg;
        replay_cfg.kind = BackendKind::Replay;
        replay_cfg.cache_path = cache;
        {
            auto recorder = make_backend(replay_cfg);
            CHECK(recorder->complete(request_saying("recorded question")).content ==
                  "echo: recorded question FINAL ANSWER: (B)");
        }
        int live_requests = local.requests;
        BackendConfig offline_cfg;
        offline_cfg.kind = BackendKind::Replay;
        offline_cfg.cache_path = cache;
        offline_cfg.model = cfg.model;
        auto offline = make_backend(offline_cfg);
        CHECK(offline->complete(request_saying("recorded question")).content ==
              "echo: recorded question FINAL ANSWER: (B)");
        CHECK(local.requests == live_requests);  // no further network traffic
    }
}

TEST_CASE("http backend reports Timeout after exhausting retries") {
    BackendConfig cfg;
    cfg.kind = BackendKind::Http;
    cfg.endpoint_url = "http://127.0.0.1:1";  // nothing listens there
    cfg.api_key_env = "RRMP_TEST_KEY";
    cfg.timeout_seconds = 0.2;
    cfg.max_retries = 1;
    setenv("RRMP_TEST_KEY", "k", 1);
    HttpBackend backend(cfg);
    try {
        backend.complete(request_saying("hi"));
        FAIL("expected Timeout");
    } catch (const Error& e) {
        CHECK(e.code() == "Timeout");
    }
}
