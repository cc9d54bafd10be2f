#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "rrmp/path.hpp"
#include "test_util.hpp"

using namespace rrmp;

namespace {

RolePair physics_pair() {
    return RolePair{testutil::physicist(), testutil::mathematician()};
}

// One full reflect-revise round that flips a wrong preliminary to the gold C.
std::vector<ScriptEntry> flip_script() {
    return {
        ScriptEntry{"Question:",
                    "SUBTASK: identify the conserved quantity\nSUBTASK: check for friction\n"
                    "Kinetic energy is conserved on the incline. FINAL ANSWER: (B)"},
        ScriptEntry{"Preliminary answer under review",
                    "Gravity does work on the block, so kinetic energy alone grows; what is "
                    "conserved is total mechanical energy. The answer should be (C)."},
        ScriptEntry{"Feedback from the",
                    "You are right, I conflated the two quantities. FINAL ANSWER: (C)"},
    };
}

}  // namespace

TEST_CASE("reactive step stores the preliminary and parses SUBTASK lines") {
    Question q = testutil::physics_question();
    RunConfig cfg = testutil::base_config();
    ScriptedBackend backend(flip_script());
    MemoryStore store;

    std::string text = reactive_step(q, testutil::physicist(), backend, store, cfg);
    CHECK(text.find("FINAL ANSWER: (B)") != std::string::npos);
    CHECK(store.retrieve(kKeyPreliminary).size() == 1);
    CHECK(store.retrieve(kKeyPreliminary)[0].value == text);
    REQUIRE(store.retrieve(kKeySubtasks).size() == 2);
    CHECK(store.retrieve(kKeySubtasks)[0].value == "identify the conserved quantity");
    CHECK(store.retrieve(kKeySubtasks)[1].value == "check for friction");
}

TEST_CASE("reactive step tolerates responses without SUBTASK lines") {
    Question q = testutil::physics_question();
    RunConfig cfg = testutil::base_config();
    ScriptedBackend backend({ScriptEntry{"", "Just an answer. FINAL ANSWER: (C)"}});
    MemoryStore store;
    reactive_step(q, testutil::physicist(), backend, store, cfg);
    CHECK(store.retrieve(kKeySubtasks).empty());
    CHECK(store.retrieve(kKeyPreliminary).size() == 1);
}

TEST_CASE("backend failure in the reactive step leaves the store unchanged") {
    Question q = testutil::physics_question();
    RunConfig cfg = testutil::base_config();
    ScriptedBackend backend({});  // exhausted immediately
    MemoryStore store;
    try {
        reactive_step(q, testutil::physicist(), backend, store, cfg);
        FAIL("expected ScriptExhausted");
    } catch (const Error& e) {
        CHECK(e.code() == "ScriptExhausted");
    }
    CHECK(store.keys().empty());
}

TEST_CASE("reflection step requires a stored preliminary") {
    Question q = testutil::physics_question();
    RunConfig cfg = testutil::base_config();
    ScriptedBackend backend({ScriptEntry{"", "critique"}});
    MemoryStore store;
    try {
        reflection_step(q, "some text", testutil::mathematician(), backend, store, cfg);
        FAIL("expected MissingPreliminary");
    } catch (const Error& e) {
        CHECK(e.code() == "MissingPreliminary");
    }
}

TEST_CASE("reflection step appends the critique verbatim") {
    Question q = testutil::physics_question();
    RunConfig cfg = testutil::base_config();
    cfg.interaction.style = Style::Debate;
    ScriptedBackend backend({ScriptEntry{"", "I disagree; (D) because entropy."}});
    MemoryStore store;
    store.append(kKeyPreliminary, "prelim. FINAL ANSWER: (B)", Speaker::Reactive, 0);
    std::string text = reflection_step(q, "prelim. FINAL ANSWER: (B)",
                                       testutil::mathematician(), backend, store, cfg);
    CHECK(text == "I disagree; (D) because entropy.");
    REQUIRE(store.retrieve(kKeyReflections).size() == 1);
    CHECK(store.retrieve(kKeyReflections)[0].value == text);
    CHECK(store.retrieve(kKeyReflections)[0].round == 1);
}

TEST_CASE("run_path: one reflection round flips the answer") {
    Question q = testutil::physics_question();
    RunConfig cfg = testutil::base_config();
    cfg.max_reflection_rounds = 1;
    ScriptedBackend backend(flip_script());

    PathResult pr = run_path(q, physics_pair(), backend, cfg, 0);
    CHECK(pr.answer == AnswerLabel::of('C'));
    CHECK(pr.rounds_used == 1);
    CHECK_FALSE(pr.stopped_early);
    CHECK_FALSE(pr.error.has_value());
    CHECK(backend.calls() == 1 + 2 * pr.rounds_used);
    // transcript structure: user, reactive, reflection, reactive
    REQUIRE(pr.transcript.size() == 4);
    CHECK(pr.transcript[1].speaker == Speaker::Reactive);
    CHECK(pr.transcript[2].speaker == Speaker::Reflection);
    CHECK(pr.transcript[3].speaker == Speaker::Reactive);
}

TEST_CASE("run_path: confirm token stops the loop early") {
    Question q = testutil::physics_question();
    RunConfig cfg = testutil::base_config();
    cfg.max_reflection_rounds = 2;
    ScriptedBackend backend({
        ScriptEntry{"Question:", "prelim thinking. FINAL ANSWER: (B)"},
        ScriptEntry{"Preliminary answer under review", "are you sure? consider (C)"},
        ScriptEntry{"Feedback from the",
                    "I CONFIRM my original reasoning. FINAL ANSWER: (B)"},
    });

    PathResult pr = run_path(q, physics_pair(), backend, cfg, 0);
    CHECK(pr.answer == AnswerLabel::of('B'));
    CHECK(pr.rounds_used == 1);
    CHECK(pr.stopped_early);
    CHECK(backend.calls() == 3);
}

TEST_CASE("confirm token only counts before the answer marker") {
    CHECK(revision_confirms("I CONFIRM it. FINAL ANSWER: (B)"));
    CHECK_FALSE(revision_confirms("FINAL ANSWER: (B). I CONFIRM"));
    CHECK(revision_confirms("I CONFIRM without any marker"));
    CHECK_FALSE(revision_confirms("no token at all. FINAL ANSWER: (B)"));
}

TEST_CASE("run_path: zero rounds means exactly one call, no reflection agent") {
    Question q = testutil::physics_question();
    RunConfig cfg = testutil::base_config();
    cfg.max_reflection_rounds = 0;
    ScriptedBackend backend({ScriptEntry{"", "straight answer. FINAL ANSWER: (C)"}});

    PathResult pr = run_path(q, physics_pair(), backend, cfg, 0);
    CHECK(backend.calls() == 1);
    CHECK(pr.answer == AnswerLabel::of('C'));
    CHECK(pr.rounds_used == 0);
    for (const auto& m : pr.transcript) CHECK(m.speaker != Speaker::Reflection);
}

TEST_CASE("run_path degrades to Unparsed with an error note on backend failure") {
    Question q = testutil::physics_question();
    RunConfig cfg = testutil::base_config();
    cfg.max_reflection_rounds = 1;
    ScriptedBackend backend({ScriptEntry{"", "prelim. FINAL ANSWER: (B)"}});  // dies at round 1

    PathResult pr = run_path(q, physics_pair(), backend, cfg, 0);
    CHECK(pr.answer.is_unparsed());
    REQUIRE(pr.error.has_value());
    CHECK(pr.error->find("ScriptExhausted") != std::string::npos);
    // invariant: at least one reactive message even on failure
    bool has_reactive = false;
    for (const auto& m : pr.transcript) has_reactive |= (m.speaker == Speaker::Reactive);
    CHECK(has_reactive);
}

TEST_CASE("property: backend calls per path = 1 + 2 * rounds_used") {
    Question q = testutil::physics_question();
    for (int rounds = 0; rounds <= 3; ++rounds) {
        RunConfig cfg = testutil::base_config();
        cfg.max_reflection_rounds = rounds;
        std::vector<ScriptEntry> script{ScriptEntry{"", "prelim. FINAL ANSWER: (B)"}};
        for (int r = 0; r < rounds; ++r) {
            script.push_back(ScriptEntry{"", "reflection " + std::to_string(r)});
            script.push_back(ScriptEntry{"", "revision " + std::to_string(r) +
                                                 ". FINAL ANSWER: (C)"});
        }
        ScriptedBackend backend(script);
        PathResult pr = run_path(q, physics_pair(), backend, cfg, 0);
        CHECK(pr.rounds_used == rounds);
        CHECK(backend.calls() == 1 + 2 * pr.rounds_used);
        CHECK(pr.rounds_used <= cfg.max_reflection_rounds);
    }
}

TEST_CASE("run_path is deterministic under a scripted backend") {
    Question q = testutil::physics_question();
    RunConfig cfg = testutil::base_config();
    cfg.max_reflection_rounds = 1;
    ScriptedBackend b1(flip_script());
    ScriptedBackend b2(flip_script());
    PathResult r1 = run_path(q, physics_pair(), b1, cfg, 0);
    PathResult r2 = run_path(q, physics_pair(), b2, cfg, 0);
    CHECK(r1 == r2);
}

TEST_CASE("the revision request quotes the latest reflection verbatim") {
    Question q = testutil::physics_question();
    RunConfig cfg = testutil::base_config();
    cfg.max_reflection_rounds = 1;
    ScriptedBackend backend(flip_script());
    std::vector<json> records;
    TranscriptSink sink = [&records](const json& r) { records.push_back(r); };

    run_path(q, physics_pair(), backend, cfg, 0, nullptr, nullptr, sink);

    const std::string reflection_text =
        "Gravity does work on the block, so kinetic energy alone grows; what is "
        "conserved is total mechanical energy. The answer should be (C).";
    bool found_revision = false;
    for (const auto& r : records) {
        if (r.value("type", "") != "call") continue;
        if (r.at("agent") == "reactive" && r.at("round") == 1) {
            found_revision = true;
            const auto& messages = r.at("request").at("messages");
            const std::string last_user = messages.back().at("content").get<std::string>();
            CHECK(last_user.find(reflection_text) != std::string::npos);
        }
    }
    CHECK(found_revision);
}

TEST_CASE("multi-instance agents keep separate dialogues") {
    Question q = testutil::physics_question();
    RunConfig cfg = testutil::base_config();
    cfg.max_reflection_rounds = 2;
    std::vector<ScriptEntry> script{
        ScriptEntry{"", "prelim. FINAL ANSWER: (B)"},
        ScriptEntry{"", "reflection one"},
        ScriptEntry{"", "revision one. FINAL ANSWER: (B)"},
        ScriptEntry{"", "reflection two"},
        ScriptEntry{"", "revision two. FINAL ANSWER: (C)"},
    };
    ScriptedBackend backend(script);
    std::vector<json> records;
    run_path(q, physics_pair(), backend, cfg, 0, nullptr, nullptr,
             [&records](const json& r) { records.push_back(r); });

    // each agent's dialogue starts with its own persona system message
    for (const auto& r : records) {
        if (r.value("type", "") != "call") continue;
        const auto& messages = r.at("request").at("messages");
        const std::string system = messages[0].at("content").get<std::string>();
        if (r.at("agent") == "reactive") {
            CHECK(system.find("physicist") != std::string::npos);
        } else {
            CHECK(system.find("mathematician") != std::string::npos);
        }
    }
}

TEST_CASE("single-instance mode threads one rolling dialogue through both roles") {
    Question q = testutil::physics_question();
    RunConfig cfg = testutil::base_config();
    cfg.max_reflection_rounds = 1;
    cfg.instance_mode = InstanceMode::SingleInstance;
    ScriptedBackend backend({
        ScriptEntry{"", "prelim. FINAL ANSWER: (B)"},
        ScriptEntry{"", "reflection text"},
        ScriptEntry{"", "revision. FINAL ANSWER: (C)"},
    });
    std::vector<json> records;
    run_path(q, physics_pair(), backend, cfg, 0, nullptr, nullptr,
             [&records](const json& r) { records.push_back(r); });

    size_t previous_len = 0;
    int calls = 0;
    for (const auto& r : records) {
        if (r.value("type", "") != "call") continue;
        ++calls;
        const auto& messages = r.at("request").at("messages");
        CHECK(messages.size() > previous_len);  // shared history grows monotonically
        previous_len = messages.size();
        // one generic system opener; role info arrives in user turns
        CHECK(messages[0].at("content").get<std::string>().find("switches between") !=
              std::string::npos);
        int system_count = 0;
        for (const auto& m : messages) {
            if (m.at("role") == "system") ++system_count;
        }
        CHECK(system_count == 1);
    }
    CHECK(calls == 3);
}

TEST_CASE("memory snapshot lands in the transcript") {
    Question q = testutil::physics_question();
    RunConfig cfg = testutil::base_config();
    cfg.max_reflection_rounds = 1;
    ScriptedBackend backend(flip_script());
    std::vector<json> records;
    run_path(q, physics_pair(), backend, cfg, 0, nullptr, nullptr,
             [&records](const json& r) { records.push_back(r); });
    REQUIRE_FALSE(records.empty());
    const json& last = records.back();
    CHECK(last.at("type") == "memory");
    CHECK(last.at("store").contains("preliminary"));
    CHECK(last.at("store").contains("reflections"));
    CHECK(last.at("store").contains("final"));
    CHECK(last.at("store").at("subtasks").size() == 2);
}
