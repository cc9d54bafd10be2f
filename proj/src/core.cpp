#include "rrmp/core.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace rrmp {

namespace {

template <class E, size_t N>
std::string enum_to_string(E v, const std::array<std::pair<E, const char*>, N>& table,
                           const char* what) {
    for (const auto& [e, s] : table) {
        if (e == v) return s;
    }
    throw Error("InvalidValue", std::string("unknown ") + what + " enum value");
}

template <class E, size_t N>
E enum_from_string(const std::string& s, const std::array<std::pair<E, const char*>, N>& table,
                   const char* error_code, const char* what) {
    for (const auto& [e, name] : table) {
        if (s == name) return e;
    }
    throw Error(error_code, std::string("unknown ") + what + " '" + s + "'");
}

constexpr std::array<std::pair<Subject, const char*>, 4> kSubjects{{
    {Subject::MoralScenarios, "moral_scenarios"},
    {Subject::CollegePhysics, "college_physics"},
    {Subject::CollegeMath, "college_math"},
    {Subject::Other, "other"},
}};

constexpr std::array<std::pair<Speaker, const char*>, 5> kSpeakers{{
    {Speaker::System, "system"},
    {Speaker::Reactive, "reactive"},
    {Speaker::Reflection, "reflection"},
    {Speaker::Summarizer, "summarizer"},
    {Speaker::User, "user"},
}};

constexpr std::array<std::pair<DomainMode, const char*>, 2> kDomainModes{{
    {DomainMode::SameDomain, "same_domain"},
    {DomainMode::DifferentDomain, "different_domain"},
}};

constexpr std::array<std::pair<Style, const char*>, 2> kStyles{{
    {Style::Collaboration, "collaboration"},
    {Style::Debate, "debate"},
}};

constexpr std::array<std::pair<Strategy, const char*>, 8> kStrategies{{
    {Strategy::Standard, "standard"},
    {Strategy::CoT, "cot"},
    {Strategy::SelfConsistency, "self_consistency"},
    {Strategy::SelfRefine, "self_refine"},
    {Strategy::RRMP, "rrmp"},
    {Strategy::Linear, "linear"},
    {Strategy::Hierarchical, "hierarchical"},
    {Strategy::Network, "network"},
}};

constexpr std::array<std::pair<InstanceMode, const char*>, 2> kInstanceModes{{
    {InstanceMode::MultiInstance, "multi_instance"},
    {InstanceMode::SingleInstance, "single_instance"},
}};

constexpr std::array<std::pair<BackendKind, const char*>, 3> kBackendKinds{{
    {BackendKind::Http, "http"},
    {BackendKind::Scripted, "scripted"},
    {BackendKind::Replay, "replay"},
}};

constexpr std::array<std::pair<DecisionMethod, const char*>, 3> kDecisionMethods{{
    {DecisionMethod::Summarizer, "summarizer"},
    {DecisionMethod::MajorityVote, "majority_vote"},
    {DecisionMethod::SinglePath, "single_path"},
}};

}  // namespace

std::string to_string(Subject s) { return enum_to_string(s, kSubjects, "subject"); }
std::string to_string(Speaker s) { return enum_to_string(s, kSpeakers, "speaker"); }
std::string to_string(DomainMode m) { return enum_to_string(m, kDomainModes, "domain_mode"); }
std::string to_string(Style s) { return enum_to_string(s, kStyles, "style"); }
std::string to_string(Strategy s) { return enum_to_string(s, kStrategies, "strategy"); }
std::string to_string(InstanceMode m) { return enum_to_string(m, kInstanceModes, "instance_mode"); }
std::string to_string(BackendKind k) { return enum_to_string(k, kBackendKinds, "backend_kind"); }
std::string to_string(DecisionMethod m) {
    return enum_to_string(m, kDecisionMethods, "decision_method");
}

Subject subject_from_string(const std::string& s) {
    return enum_from_string(s, kSubjects, "UnknownSubject", "subject");
}
Speaker speaker_from_string(const std::string& s) {
    return enum_from_string(s, kSpeakers, "InvalidValue", "speaker");
}
DomainMode domain_mode_from_string(const std::string& s) {
    return enum_from_string(s, kDomainModes, "InvalidValue", "domain_mode");
}
Style style_from_string(const std::string& s) {
    return enum_from_string(s, kStyles, "InvalidValue", "style");
}
Strategy strategy_from_string(const std::string& s) {
    return enum_from_string(s, kStrategies, "UnknownStrategy", "strategy");
}
InstanceMode instance_mode_from_string(const std::string& s) {
    return enum_from_string(s, kInstanceModes, "InvalidValue", "instance_mode");
}
BackendKind backend_kind_from_string(const std::string& s) {
    return enum_from_string(s, kBackendKinds, "InvalidValue", "backend_kind");
}
DecisionMethod decision_method_from_string(const std::string& s) {
    return enum_from_string(s, kDecisionMethods, "InvalidValue", "decision_method");
}

// ---------------------------------------------------------------------------
// AnswerLabel

AnswerLabel AnswerLabel::of(char label) {
    if (label < 'A' || label > 'Z') {
        throw Error("InvalidValue", std::string("answer label must be A-Z, got '") + label + "'");
    }
    AnswerLabel a;
    a.value_ = label;
    return a;
}

char AnswerLabel::value() const {
    if (is_unparsed()) throw Error("InvalidValue", "unparsed answer has no label value");
    return value_;
}

std::string AnswerLabel::str() const {
    return is_unparsed() ? std::string("unparsed") : std::string(1, value_);
}

AnswerLabel AnswerLabel::parse(const std::string& s) {
    if (s == "unparsed") return unparsed();
    if (s.size() == 1) return of(s[0]);
    throw Error("InvalidValue", "cannot parse answer label '" + s + "'");
}

// ---------------------------------------------------------------------------
// Validation

bool Question::has_label(char c) const {
    return std::any_of(choices.begin(), choices.end(),
                       [c](const Choice& ch) { return ch.label == c; });
}

void validate_question(const Question& q) {
    if (q.choices.size() < 2 || q.choices.size() > 26) {
        throw Error("InvalidQuestion",
                    "question '" + q.id + "' must have 2..26 choices, has " +
                        std::to_string(q.choices.size()));
    }
    for (size_t i = 0; i < q.choices.size(); ++i) {
        char c = q.choices[i].label;
        if (c < 'A' || c > 'Z') {
            throw Error("InvalidQuestion", "question '" + q.id + "' has a non A-Z choice label");
        }
        if (i > 0 && q.choices[i - 1].label >= c) {
            throw Error("InvalidQuestion",
                        "question '" + q.id + "' choice labels must be unique and ascending");
        }
    }
    if (q.gold.has_value() && !q.has_label(*q.gold)) {
        throw Error("InvalidQuestion",
                    "question '" + q.id + "' gold label is not one of the choices");
    }
}

void validate_backend_config(const BackendConfig& b) {
    if (b.kind == BackendKind::Http && !b.endpoint_url.has_value()) {
        throw Error("ContradictoryConfig", "http backend requires endpoint_url");
    }
    if (b.kind == BackendKind::Scripted && !b.script.has_value()) {
        throw Error("ContradictoryConfig", "scripted backend requires a script");
    }
    if (b.kind == BackendKind::Replay && !b.cache_path.has_value()) {
        throw Error("ContradictoryConfig", "replay backend requires cache_path");
    }
    if (b.timeout_seconds <= 0) {
        throw Error("ContradictoryConfig", "timeout_seconds must be > 0");
    }
    if (b.max_retries < 0) {
        throw Error("ContradictoryConfig", "max_retries must be >= 0");
    }
}

RunConfig validate_run_config(RunConfig cfg) {
    auto force = [&cfg](int& field, int value) {
        if (field != value) {
            field = value;
            cfg.normalized_warning = true;
        }
    };
    switch (cfg.strategy) {
        case Strategy::Standard:
        case Strategy::CoT:
            force(cfg.n_paths, 1);
            force(cfg.max_reflection_rounds, 0);
            break;
        case Strategy::SelfRefine:
            force(cfg.n_paths, 1);
            break;
        case Strategy::SelfConsistency:
            force(cfg.max_reflection_rounds, 0);
            break;
        default:
            break;
    }

    if (cfg.n_paths < 1) {
        throw Error("ContradictoryConfig",
                    to_string(cfg.strategy) + " with n_paths=" + std::to_string(cfg.n_paths));
    }
    if (cfg.max_reflection_rounds < 0) {
        throw Error("ContradictoryConfig", "max_reflection_rounds must be >= 0");
    }
    if (cfg.shots != 0 && cfg.shots != 5) {
        throw Error("ContradictoryConfig",
                    "shots must be 0 or 5, got " + std::to_string(cfg.shots));
    }
    if (cfg.temperature_paths < 0 || cfg.temperature_paths > 2 ||
        cfg.temperature_summarizer < 0 || cfg.temperature_summarizer > 2) {
        throw Error("ContradictoryConfig", "temperatures must lie in [0,2]");
    }
    if (cfg.parallelism < 1) {
        throw Error("ContradictoryConfig", "parallelism must be >= 1");
    }
    validate_backend_config(cfg.backend);
    return cfg;
}

// ---------------------------------------------------------------------------
// JSON

void to_json(json& j, const AnswerLabel& a) { j = a.str(); }
void from_json(const json& j, AnswerLabel& a) { a = AnswerLabel::parse(j.get<std::string>()); }

void to_json(json& j, const Choice& c) {
    j = json{{"label", std::string(1, c.label)}, {"text", c.text}};
}
void from_json(const json& j, Choice& c) {
    auto label = j.at("label").get<std::string>();
    if (label.size() != 1) throw Error("InvalidValue", "choice label must be one character");
    c.label = label[0];
    c.text = j.at("text").get<std::string>();
}

void to_json(json& j, const Question& q) {
    j = json{{"id", q.id},
             {"stem", q.stem},
             {"choices", q.choices},
             {"subject", to_string(q.subject)}};
    j["gold"] = q.gold.has_value() ? json(std::string(1, *q.gold)) : json(nullptr);
}
void from_json(const json& j, Question& q) {
    q.id = j.at("id").get<std::string>();
    q.stem = j.at("stem").get<std::string>();
    q.choices = j.at("choices").get<std::vector<Choice>>();
    q.subject = subject_from_string(j.at("subject").get<std::string>());
    if (j.contains("gold") && !j.at("gold").is_null()) {
        auto g = j.at("gold").get<std::string>();
        if (g.size() != 1) throw Error("InvalidValue", "gold label must be one character");
        q.gold = g[0];
    } else {
        q.gold = std::nullopt;
    }
    validate_question(q);
}

void to_json(json& j, const Message& m) {
    j = json{{"speaker", to_string(m.speaker)},
             {"role_name", m.role_name},
             {"content", m.content},
             {"round", m.round}};
}
void from_json(const json& j, Message& m) {
    m.speaker = speaker_from_string(j.at("speaker").get<std::string>());
    m.role_name = j.at("role_name").get<std::string>();
    m.content = j.at("content").get<std::string>();
    m.round = j.at("round").get<int>();
}

void to_json(json& j, const RoleSpec& r) {
    j = json{{"name", r.name}, {"domain_tag", r.domain_tag}, {"persona_prompt", r.persona_prompt}};
}
void from_json(const json& j, RoleSpec& r) {
    r.name = j.at("name").get<std::string>();
    r.domain_tag = j.at("domain_tag").get<std::string>();
    r.persona_prompt = j.at("persona_prompt").get<std::string>();
}

void to_json(json& j, const InteractionConfig& c) {
    j = json{{"domain_mode", to_string(c.domain_mode)}, {"style", to_string(c.style)}};
}
void from_json(const json& j, InteractionConfig& c) {
    c.domain_mode = domain_mode_from_string(j.at("domain_mode").get<std::string>());
    c.style = style_from_string(j.at("style").get<std::string>());
}

void to_json(json& j, const ScriptEntry& e) {
    j = json{{"match", e.match}, {"response", e.response}};
}
void from_json(const json& j, ScriptEntry& e) {
    e.match = j.at("match").get<std::string>();
    e.response = j.at("response").get<std::string>();
}

void to_json(json& j, const BackendConfig& b) {
    j = json{{"kind", to_string(b.kind)},
             {"model", b.model},
             {"api_key_env", b.api_key_env},
             {"timeout_seconds", b.timeout_seconds},
             {"max_retries", b.max_retries}};
    detail::opt_to(j, "endpoint_url", b.endpoint_url);
    detail::opt_to(j, "script", b.script);
    detail::opt_to(j, "cache_path", b.cache_path);
}
void from_json(const json& j, BackendConfig& b) {
    b.kind = backend_kind_from_string(j.at("kind").get<std::string>());
    b.model = j.at("model").get<std::string>();
    b.api_key_env = j.at("api_key_env").get<std::string>();
    b.timeout_seconds = j.at("timeout_seconds").get<double>();
    b.max_retries = j.at("max_retries").get<int>();
    detail::opt_from(j, "endpoint_url", b.endpoint_url);
    detail::opt_from(j, "script", b.script);
    detail::opt_from(j, "cache_path", b.cache_path);
}

void to_json(json& j, const TopologySpec& t) {
    j = json{{"agents", t.agents},
             {"branches", t.branches},
             {"branch_size", t.branch_size},
             {"rounds", t.rounds}};
}
void from_json(const json& j, TopologySpec& t) {
    t.agents = j.at("agents").get<int>();
    t.branches = j.at("branches").get<int>();
    t.branch_size = j.at("branch_size").get<int>();
    t.rounds = j.at("rounds").get<int>();
}

void to_json(json& j, const RunConfig& c) {
    j = json{{"strategy", to_string(c.strategy)},
             {"n_paths", c.n_paths},
             {"max_reflection_rounds", c.max_reflection_rounds},
             {"shots", c.shots},
             {"interaction", c.interaction},
             {"backend", c.backend},
             {"seed", c.seed},
             {"temperature_paths", c.temperature_paths},
             {"temperature_summarizer", c.temperature_summarizer},
             {"instance_mode", to_string(c.instance_mode)},
             {"parallelism", c.parallelism},
             {"topology", c.topology},
             {"normalized_warning", c.normalized_warning}};
}
void from_json(const json& j, RunConfig& c) {
    c.strategy = strategy_from_string(j.at("strategy").get<std::string>());
    c.n_paths = j.at("n_paths").get<int>();
    c.max_reflection_rounds = j.at("max_reflection_rounds").get<int>();
    c.shots = j.at("shots").get<int>();
    c.interaction = j.at("interaction").get<InteractionConfig>();
    c.backend = j.at("backend").get<BackendConfig>();
    c.seed = j.at("seed").get<long long>();
    c.temperature_paths = j.at("temperature_paths").get<double>();
    c.temperature_summarizer = j.at("temperature_summarizer").get<double>();
    c.instance_mode = instance_mode_from_string(j.at("instance_mode").get<std::string>());
    c.parallelism = j.at("parallelism").get<int>();
    c.topology = j.at("topology").get<TopologySpec>();
    c.normalized_warning = j.at("normalized_warning").get<bool>();
}

void to_json(json& j, const PathResult& p) {
    j = json{{"path_index", p.path_index},
             {"role_pair", json{{"reactive", p.reactive_role}, {"reflection", p.reflection_role}}},
             {"transcript", p.transcript},
             {"answer", p.answer},
             {"rounds_used", p.rounds_used},
             {"stopped_early", p.stopped_early}};
    detail::opt_to(j, "error", p.error);
}
void from_json(const json& j, PathResult& p) {
    p.path_index = j.at("path_index").get<int>();
    p.reactive_role = j.at("role_pair").at("reactive").get<RoleSpec>();
    p.reflection_role = j.at("role_pair").at("reflection").get<RoleSpec>();
    p.transcript = j.at("transcript").get<std::vector<Message>>();
    p.answer = j.at("answer").get<AnswerLabel>();
    p.rounds_used = j.at("rounds_used").get<int>();
    p.stopped_early = j.at("stopped_early").get<bool>();
    detail::opt_from(j, "error", p.error);
}

void to_json(json& j, const FinalDecision& d) {
    json answers = json::array();
    for (const auto& [idx, ans] : d.path_answers) {
        answers.push_back(json{{"path_index", idx}, {"answer", ans}});
    }
    j = json{{"answer", d.answer},
             {"method", to_string(d.method)},
             {"rationale", d.rationale},
             {"path_answers", answers},
             {"overruled_majority", d.overruled_majority},
             {"summarizer_fallback", d.summarizer_fallback}};
}
void from_json(const json& j, FinalDecision& d) {
    d.answer = j.at("answer").get<AnswerLabel>();
    d.method = decision_method_from_string(j.at("method").get<std::string>());
    d.rationale = j.at("rationale").get<std::string>();
    d.path_answers.clear();
    for (const auto& e : j.at("path_answers")) {
        d.path_answers.emplace_back(e.at("path_index").get<int>(),
                                    e.at("answer").get<AnswerLabel>());
    }
    d.overruled_majority = j.at("overruled_majority").get<bool>();
    d.summarizer_fallback = j.at("summarizer_fallback").get<bool>();
}

}  // namespace rrmp
