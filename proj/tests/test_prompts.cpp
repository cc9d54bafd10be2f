#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "rrmp/prompts.hpp"
#include "test_util.hpp"

using namespace rrmp;

static bool contains(const std::string& hay, const std::string& needle) {
    return hay.find(needle) != std::string::npos;
}

TEST_CASE("prompt template binds placeholders and rejects unbound ones") {
    auto tpl = PromptTemplate::parse("greet", "Hello {name}, your score is {score}.");
    CHECK(tpl.required_placeholders() == std::set<std::string>{"name", "score"});
    CHECK(tpl.render({{"name", "Ada"}, {"score", "10"}}) == "Hello Ada, your score is 10.");
    CHECK_THROWS_AS(tpl.render({{"name", "Ada"}}), Error);
}

// ---------------------------------------------------------------------------
// assign_roles

TEST_CASE("different-domain physics pairing is physicist + mathematician") {
    auto pairs = assign_roles(testutil::physics_roster(),
                              InteractionConfig{DomainMode::DifferentDomain, Style::Collaboration},
                              1);
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].reactive.name == "physicist");
    CHECK(pairs[0].reflection.name == "mathematician");
    CHECK(pairs[0].reactive.domain_tag != pairs[0].reflection.domain_tag);
}

TEST_CASE("same-domain pairing keeps both agents in the subject domain") {
    auto pairs = assign_roles(testutil::physics_roster(),
                              InteractionConfig{DomainMode::SameDomain, Style::Collaboration}, 2);
    REQUIRE(pairs.size() == 2);
    for (const auto& p : pairs) {
        CHECK(p.reactive.name == "physicist");
        CHECK(p.reflection.name == "physicist");
        CHECK(p.reactive.domain_tag == p.reflection.domain_tag);
    }
    // distinct persona seeds per path
    CHECK(pairs[0].reactive.persona_prompt != pairs[1].reactive.persona_prompt);
}

TEST_CASE("different-domain on a single-domain roster is infeasible") {
    std::vector<RoleSpec> homogeneous{testutil::physicist(),
                                      RoleSpec{"astronomer", "physics", "You are an astronomer."}};
    try {
        assign_roles(homogeneous,
                     InteractionConfig{DomainMode::DifferentDomain, Style::Debate}, 1);
        FAIL("expected RosterTooHomogeneous");
    } catch (const Error& e) {
        CHECK(e.code() == "RosterTooHomogeneous");
    }
}

TEST_CASE("empty roster is rejected") {
    try {
        assign_roles({}, InteractionConfig{}, 1);
        FAIL("expected EmptyRoster");
    } catch (const Error& e) {
        CHECK(e.code() == "EmptyRoster");
    }
}

TEST_CASE("property: assign_roles output length and domain constraint") {
    std::vector<RoleSpec> roster{
        RoleSpec{"physicist", "physics", "p1"}, RoleSpec{"astronomer", "physics", "p2"},
        RoleSpec{"mathematician", "math", "p3"}, RoleSpec{"logician", "logic", "p4"}};
    for (int n = 1; n <= 9; ++n) {
        for (auto mode : {DomainMode::SameDomain, DomainMode::DifferentDomain}) {
            auto pairs = assign_roles(roster, InteractionConfig{mode, Style::Debate}, n);
            REQUIRE(pairs.size() == static_cast<size_t>(n));
            for (const auto& p : pairs) {
                if (mode == DomainMode::SameDomain) {
                    CHECK(p.reactive.domain_tag == p.reflection.domain_tag);
                } else {
                    CHECK(p.reactive.domain_tag != p.reflection.domain_tag);
                }
            }
        }
    }
    // same-domain with two physics roles alternates within the domain
    auto pairs = assign_roles(roster, InteractionConfig{DomainMode::SameDomain,
                                                        Style::Collaboration}, 2);
    CHECK(pairs[0].reactive.name == "physicist");
    CHECK(pairs[0].reflection.name == "astronomer");
}

// ---------------------------------------------------------------------------
// Rendering

TEST_CASE("reactive prompt zero-shot contains every choice") {
    Question q = testutil::physics_question();
    auto msgs = render_reactive_prompt(q, testutil::physicist(), 0, nullptr);
    REQUIRE(msgs.size() == 2);
    CHECK(msgs[0].role == ChatRole::System);
    CHECK(contains(msgs[0].content, "You are a physicist."));
    CHECK(contains(msgs[0].content, "SUBTASK"));
    CHECK(contains(msgs[0].content, "FINAL ANSWER"));
    CHECK(msgs[1].role == ChatRole::User);
    for (const auto& c : q.choices) CHECK(contains(msgs[1].content, c.text));
}

TEST_CASE("reactive prompt five-shot carries exactly 5 exemplar blocks before the question") {
    Question q = testutil::physics_question();
    auto lib = testutil::test_library();
    const ExemplarSet& ex = lib.exemplars(Subject::CollegePhysics);
    auto msgs = render_reactive_prompt(q, testutil::physicist(), 5, &ex);
    const std::string& user = msgs[1].content;

    size_t count = 0;
    size_t last_block = 0;
    for (size_t pos = user.find("\nA: "); pos != std::string::npos;
         pos = user.find("\nA: ", pos + 1)) {
        ++count;
        last_block = pos;
    }
    CHECK(count == 5);
    CHECK(last_block < user.find(q.stem));  // all exemplars precede the question
    size_t q_blocks = 0;
    for (size_t pos = user.find("Q: "); pos != std::string::npos;
         pos = user.find("Q: ", pos + 1)) {
        ++q_blocks;
    }
    CHECK(q_blocks == 5);
}

TEST_CASE("five-shot without exemplars raises MissingExemplars") {
    Question q = testutil::physics_question();
    try {
        render_reactive_prompt(q, testutil::physicist(), 5, nullptr);
        FAIL("expected MissingExemplars");
    } catch (const Error& e) {
        CHECK(e.code() == "MissingExemplars");
    }
}

TEST_CASE("reflection prompt quotes the preliminary verbatim") {
    Question q = testutil::physics_question();
    std::string preliminary =
        "SUBTASK: check energy forms\nMechanical energy stays fixed. FINAL ANSWER: (C)";
    auto msgs = render_reflection_prompt(q, preliminary, testutil::mathematician(),
                                         Style::Collaboration);
    REQUIRE(msgs.size() == 2);
    CHECK(contains(msgs[1].content, preliminary));
    CHECK(contains(msgs[0].content, kCollaborationClause));
}

TEST_CASE("debate and collaboration renderings differ only in the style clause") {
    Question q = testutil::physics_question();
    std::string preliminary = "Energy is conserved. FINAL ANSWER: (C)";
    auto collab = render_reflection_prompt(q, preliminary, testutil::mathematician(),
                                           Style::Collaboration);
    auto debate = render_reflection_prompt(q, preliminary, testutil::mathematician(),
                                           Style::Debate);
    REQUIRE(collab.size() == debate.size());
    std::string patched = collab[0].content;
    size_t at = patched.find(kCollaborationClause);
    REQUIRE(at != std::string::npos);
    patched = patched.substr(0, at) + kDebateClause +
              patched.substr(at + std::string(kCollaborationClause).size());
    CHECK(patched == debate[0].content);
    CHECK(collab[1].content == debate[1].content);
}

TEST_CASE("empty preliminary violates the reflection precondition") {
    Question q = testutil::physics_question();
    CHECK_THROWS_AS(render_reflection_prompt(q, "", testutil::mathematician(), Style::Debate),
                    Error);
}

namespace {

PathResult fake_path(int index, const std::string& reactive_text) {
    PathResult pr;
    pr.path_index = index;
    pr.reactive_role = testutil::physicist();
    pr.reflection_role = testutil::mathematician();
    pr.transcript = {Message{Speaker::User, "user", "q", 0},
                     Message{Speaker::Reactive, "physicist", reactive_text, 0}};
    pr.answer = AnswerLabel::of('B');
    return pr;
}

}  // namespace

TEST_CASE("summarizer prompt tags path blocks") {
    Question q = testutil::physics_question();
    auto msgs = render_summarizer_prompt(q, {fake_path(0, "first answer"),
                                             fake_path(1, "second answer")});
    CHECK(contains(msgs[1].content, "Path 1"));
    CHECK(contains(msgs[1].content, "Path 2"));
    CHECK(contains(msgs[1].content, "first answer"));
    CHECK(contains(msgs[1].content, "second answer"));
    CHECK(contains(msgs[0].content, "do not simply count votes"));
}

TEST_CASE("summarizer prompt for one path has no vote language") {
    Question q = testutil::physics_question();
    auto msgs = render_summarizer_prompt(q, {fake_path(0, "only answer")});
    CHECK(contains(msgs[1].content, "Path 1"));
    CHECK_FALSE(contains(msgs[1].content, "Path 2"));
    for (const auto& m : msgs) {
        CHECK_FALSE(contains(m.content, "vote"));
        CHECK_FALSE(contains(m.content, "majority"));
    }
}

TEST_CASE("summarizer prompt on empty paths violates the precondition") {
    Question q = testutil::physics_question();
    CHECK_THROWS_AS(render_summarizer_prompt(q, {}), Error);
}

TEST_CASE("summarizer path blocks are truncated to the final 2000 characters") {
    Question q = testutil::physics_question();
    std::string long_text(5000, 'x');
    long_text += "THE TAIL FINAL ANSWER: (C)";
    auto msgs = render_summarizer_prompt(q, {fake_path(0, long_text)});
    CHECK(contains(msgs[1].content, "THE TAIL"));
    CHECK_FALSE(contains(msgs[1].content, std::string(2500, 'x')));
}

TEST_CASE("rendering is deterministic") {
    Question q = testutil::physics_question();
    auto a = render_reactive_prompt(q, testutil::physicist(), 0, nullptr);
    auto b = render_reactive_prompt(q, testutil::physicist(), 0, nullptr);
    CHECK(a == b);
}

// ---------------------------------------------------------------------------
// extract_answer

TEST_CASE("extraction rule 1: the final answer marker wins") {
    Question q = testutil::physics_question();
    CHECK(extract_answer("... therefore FINAL ANSWER: (C)", q) == AnswerLabel::of('C'));
    CHECK(extract_answer("I first thought (B). FINAL ANSWER: D", q) == AnswerLabel::of('D'));
    CHECK(extract_answer("final answer: c", q) == AnswerLabel::of('C'));
    CHECK(extract_answer("FINAL ANSWER: (A) ... wait, FINAL ANSWER: (B)", q) ==
          AnswerLabel::of('B'));
}

TEST_CASE("extraction rule 2: last parenthesized standalone label") {
    Question q = testutil::physics_question();
    CHECK(extract_answer("could be (A) but more likely (B).", q) == AnswerLabel::of('B'));
    CHECK(extract_answer("options (A) and (Z) exist", q) == AnswerLabel::of('A'));
}

TEST_CASE("extraction rule 3: last standalone label token") {
    Question q = testutil::physics_question();
    CHECK(extract_answer("the answer is surely B", q) == AnswerLabel::of('B'));
    CHECK(extract_answer("I pick d.", q) == AnswerLabel::of('D'));
}

TEST_CASE("extraction returns Unparsed when nothing matches") {
    Question q = testutil::physics_question();
    CHECK(extract_answer("the mass cancels out entirely", q).is_unparsed());
    CHECK(extract_answer("", q).is_unparsed());
    CHECK(extract_answer("FINAL ANSWER: (Z)", q).is_unparsed());  // not a choice label
}

TEST_CASE("property: extraction is idempotent on its own echo for every label") {
    Question q;
    q.id = "wide";
    q.stem = "pick one";
    for (char c = 'A'; c <= 'Z'; ++c) q.choices.push_back(Choice{c, std::string(1, c)});
    validate_question(q);
    for (char c = 'A'; c <= 'Z'; ++c) {
        std::string echo = std::string("FINAL ANSWER: (") + c + ")";
        CHECK(extract_answer(echo, q) == AnswerLabel::of(c));
    }
}

TEST_CASE("library loads rosters and exemplar sets from the data files") {
    auto lib = testutil::test_library();
    CHECK(lib.roster(Subject::CollegePhysics).front().name == "physicist");
    CHECK(lib.roster(Subject::MoralScenarios).front().name == "ethicist");
    CHECK(lib.exemplars(Subject::CollegeMath).exemplars.size() == 5);
    for (Subject s : {Subject::MoralScenarios, Subject::CollegePhysics, Subject::CollegeMath,
                      Subject::Other}) {
        const auto& set = lib.exemplars(s);
        REQUIRE(set.exemplars.size() == 5);
        for (const auto& ex : set.exemplars) {
            CHECK(ex.question.gold == ex.gold);
            // each worked solution ends with the marker echoing its gold label
            CHECK(extract_answer(ex.solution, ex.question) == AnswerLabel::of(ex.gold));
        }
    }
}

TEST_CASE("preset template slots are installable") {
    auto lib = testutil::test_library();
    CHECK(lib.find_template("thought_experiment") == nullptr);  // ships empty
    lib.set_template("thought_experiment",
                     PromptTemplate::parse("thought_experiment", "Imagine: {stem}"));
    REQUIRE(lib.find_template("thought_experiment") != nullptr);
    CHECK(lib.find_template("thought_experiment")->render({{"stem", "a scenario"}}) ==
          "Imagine: a scenario");
}
