#pragma once
// Core domain types shared by every module: questions, answers, transcripts,
// roles, run configuration. Persistence is line-delimited JSON with
// lower_snake_case field names; every type round-trips through to_json/from_json.

#include <json.hpp>

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rrmp/error.hpp"

namespace rrmp {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Enums

enum class Subject { MoralScenarios, CollegePhysics, CollegeMath, Other };
enum class Speaker { System, Reactive, Reflection, Summarizer, User };
enum class DomainMode { SameDomain, DifferentDomain };
enum class Style { Collaboration, Debate };
enum class Strategy {
    Standard,
    CoT,
    SelfConsistency,
    SelfRefine,
    RRMP,
    Linear,
    Hierarchical,
    Network
};
enum class InstanceMode { MultiInstance, SingleInstance };
enum class BackendKind { Http, Scripted, Replay };
enum class DecisionMethod { Summarizer, MajorityVote, SinglePath };

std::string to_string(Subject s);
std::string to_string(Speaker s);
std::string to_string(DomainMode m);
std::string to_string(Style s);
std::string to_string(Strategy s);
std::string to_string(InstanceMode m);
std::string to_string(BackendKind k);
std::string to_string(DecisionMethod m);

Subject subject_from_string(const std::string& s);          // UnknownSubject
Speaker speaker_from_string(const std::string& s);
DomainMode domain_mode_from_string(const std::string& s);
Style style_from_string(const std::string& s);
Strategy strategy_from_string(const std::string& s);        // UnknownStrategy
InstanceMode instance_mode_from_string(const std::string& s);
BackendKind backend_kind_from_string(const std::string& s);
DecisionMethod decision_method_from_string(const std::string& s);

// ---------------------------------------------------------------------------
// Answers

// Final answer of a multiple-choice question: a choice letter or the explicit
// "no extractable answer" state. Unparsed never compares equal to any letter.
class AnswerLabel {
public:
    AnswerLabel() = default;  // unparsed
    static AnswerLabel unparsed() { return AnswerLabel{}; }
    static AnswerLabel of(char label);  // 'A'..'Z'

    bool is_unparsed() const { return value_ == 0; }
    char value() const;                 // throws on unparsed
    std::string str() const;            // "A".."Z" or "unparsed"
    static AnswerLabel parse(const std::string& s);

    friend bool operator==(const AnswerLabel&, const AnswerLabel&) = default;
    friend bool operator<(const AnswerLabel& a, const AnswerLabel& b) {
        return a.value_ < b.value_;
    }

private:
    char value_ = 0;  // 0 = unparsed
};

// ---------------------------------------------------------------------------
// Domain records

struct Choice {
    char label = 'A';
    std::string text;
    bool operator==(const Choice&) const = default;
};

// One multiple-choice item. Labels are unique and ascending, 2..26 choices,
// gold (when present) is one of the labels.
struct Question {
    std::string id;
    std::string stem;
    std::vector<Choice> choices;
    std::optional<char> gold;
    Subject subject = Subject::Other;

    bool has_label(char c) const;
    bool operator==(const Question&) const = default;
};

void validate_question(const Question& q);  // throws InvalidQuestion

struct Message {
    Speaker speaker = Speaker::User;
    std::string role_name;
    std::string content;  // non-empty
    int round = 0;        // non-decreasing within a transcript
    bool operator==(const Message&) const = default;
};

struct RoleSpec {
    std::string name;            // e.g. "physicist"
    std::string domain_tag;      // e.g. "physics"
    std::string persona_prompt;  // non-empty
    bool operator==(const RoleSpec&) const = default;
};

struct InteractionConfig {
    DomainMode domain_mode = DomainMode::DifferentDomain;
    Style style = Style::Collaboration;
    bool operator==(const InteractionConfig&) const = default;
};

struct ScriptEntry {
    std::string match;     // substring matched against the last user message
    std::string response;
    bool operator==(const ScriptEntry&) const = default;
};

struct BackendConfig {
    BackendKind kind = BackendKind::Scripted;
    std::optional<std::string> endpoint_url;          // required for Http
    std::string model = "gpt-3.5-turbo";
    std::string api_key_env = "OPENAI_API_KEY";
    std::optional<std::vector<ScriptEntry>> script;   // required for Scripted
    std::optional<std::string> cache_path;            // required for Replay
    double timeout_seconds = 60.0;
    int max_retries = 2;
    bool operator==(const BackendConfig&) const = default;
};

void validate_backend_config(const BackendConfig& b);  // throws ContradictoryConfig

// Wiring sizes for the Linear / Hierarchical / Network strategies.
struct TopologySpec {
    int agents = 3;       // linear chain length / network size
    int branches = 2;     // hierarchical branch count
    int branch_size = 2;  // agents per hierarchical branch
    int rounds = 2;       // network round count
    bool operator==(const TopologySpec&) const = default;
};

struct RunConfig {
    Strategy strategy = Strategy::RRMP;
    int n_paths = 2;
    int max_reflection_rounds = 2;
    int shots = 0;  // 0 or 5
    InteractionConfig interaction;
    BackendConfig backend;
    long long seed = 0;
    double temperature_paths = 0.7;
    double temperature_summarizer = 0.0;
    InstanceMode instance_mode = InstanceMode::MultiInstance;
    int parallelism = 1;
    TopologySpec topology;
    bool normalized_warning = false;  // set when validation forced a field
    bool operator==(const RunConfig&) const = default;
};

// Normalizes strategy-forced fields (Standard/CoT => n_paths=1, rounds=0;
// SelfRefine => n_paths=1; SelfConsistency => rounds=0), setting the warning
// flag on any change, or throws ContradictoryConfig. Idempotent.
RunConfig validate_run_config(RunConfig cfg);

// One reasoning path's outcome: transcript, extracted answer, round count.
struct PathResult {
    int path_index = 0;
    RoleSpec reactive_role;
    RoleSpec reflection_role;
    std::vector<Message> transcript;  // >= 1 Reactive message
    AnswerLabel answer;
    int rounds_used = 0;
    bool stopped_early = false;
    std::optional<std::string> error;  // set when the path degraded instead of aborting
    bool operator==(const PathResult&) const = default;
};

struct FinalDecision {
    AnswerLabel answer;
    DecisionMethod method = DecisionMethod::Summarizer;
    std::string rationale;
    std::vector<std::pair<int, AnswerLabel>> path_answers;  // one entry per executed path
    bool overruled_majority = false;   // summarizer answer != majority vote answer
    bool summarizer_fallback = false;  // summarizer unparsed, fell back to vote
    bool operator==(const FinalDecision&) const = default;
};

// ---------------------------------------------------------------------------
// JSON persistence (stable lower_snake_case field names)

void to_json(json& j, const AnswerLabel& a);
void from_json(const json& j, AnswerLabel& a);
void to_json(json& j, const Choice& c);
void from_json(const json& j, Choice& c);
void to_json(json& j, const Question& q);
void from_json(const json& j, Question& q);
void to_json(json& j, const Message& m);
void from_json(const json& j, Message& m);
void to_json(json& j, const RoleSpec& r);
void from_json(const json& j, RoleSpec& r);
void to_json(json& j, const InteractionConfig& c);
void from_json(const json& j, InteractionConfig& c);
void to_json(json& j, const ScriptEntry& e);
void from_json(const json& j, ScriptEntry& e);
void to_json(json& j, const BackendConfig& b);
void from_json(const json& j, BackendConfig& b);
void to_json(json& j, const TopologySpec& t);
void from_json(const json& j, TopologySpec& t);
void to_json(json& j, const RunConfig& c);
void from_json(const json& j, RunConfig& c);
void to_json(json& j, const PathResult& p);
void from_json(const json& j, PathResult& p);
void to_json(json& j, const FinalDecision& d);
void from_json(const json& j, FinalDecision& d);

namespace detail {

template <class T>
void opt_to(json& j, const char* key, const std::optional<T>& v) {
    if (v.has_value()) {
        j[key] = *v;
    } else {
        j[key] = nullptr;
    }
}

template <class T>
void opt_from(const json& j, const char* key, std::optional<T>& v) {
    if (j.contains(key) && !j.at(key).is_null()) {
        v = j.at(key).get<T>();
    } else {
        v = std::nullopt;
    }
}

}  // namespace detail

}  // namespace rrmp
