#include "rrmp/prompts.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace rrmp {

// ---------------------------------------------------------------------------
// PromptTemplate

PromptTemplate PromptTemplate::parse(std::string name, const std::string& text) {
    PromptTemplate tpl;
    tpl.name_ = std::move(name);
    std::string literal;
    size_t i = 0;
    while (i < text.size()) {
        if (text[i] == '{') {
            auto close = text.find('}', i + 1);
            if (close == std::string::npos) {
                throw Error("InvalidTemplate",
                            "unterminated placeholder in template '" + tpl.name_ + "'");
            }
            if (!literal.empty()) {
                tpl.segments_.push_back(Segment{false, literal});
                literal.clear();
            }
            std::string ph = text.substr(i + 1, close - i - 1);
            if (ph.empty()) {
                throw Error("InvalidTemplate", "empty placeholder in template '" + tpl.name_ + "'");
            }
            tpl.segments_.push_back(Segment{true, ph});
            tpl.required_.insert(ph);
            i = close + 1;
        } else {
            literal.push_back(text[i]);
            ++i;
        }
    }
    if (!literal.empty()) tpl.segments_.push_back(Segment{false, literal});
    return tpl;
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& bindings) const {
    std::string out;
    for (const auto& seg : segments_) {
        if (!seg.is_placeholder) {
            out += seg.text;
            continue;
        }
        auto it = bindings.find(seg.text);
        if (it == bindings.end()) {
            throw Error("UnboundPlaceholder",
                        "template '" + name_ + "' requires placeholder '" + seg.text + "'");
        }
        out += it->second;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Exemplar JSON

void to_json(json& j, const Exemplar& e) {
    j = json{{"question", e.question}, {"solution", e.solution}, {"gold", std::string(1, e.gold)}};
}
void from_json(const json& j, Exemplar& e) {
    e.question = j.at("question").get<Question>();
    e.solution = j.at("solution").get<std::string>();
    auto g = j.at("gold").get<std::string>();
    if (g.size() != 1) throw Error("InvalidValue", "exemplar gold label must be one character");
    e.gold = g[0];
}

void to_json(json& j, const ExemplarSet& s) {
    j = json{{"subject", to_string(s.subject)}, {"exemplars", s.exemplars}};
}
void from_json(const json& j, ExemplarSet& s) {
    s.subject = subject_from_string(j.at("subject").get<std::string>());
    s.exemplars = j.at("exemplars").get<std::vector<Exemplar>>();
}

// ---------------------------------------------------------------------------
// PromptLibrary

PromptLibrary PromptLibrary::load(const std::string& data_dir) {
    auto read_file = [](const std::string& path) {
        std::ifstream in(path);
        if (!in) throw Error("InfrastructureError", "cannot read data file '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        return json::parse(ss.str());
    };
    return from_json_values(read_file(data_dir + "/roles.json"),
                            read_file(data_dir + "/exemplars.json"));
}

PromptLibrary PromptLibrary::from_json_values(const json& roles, const json& exemplars) {
    PromptLibrary lib;
    for (const auto& [subject_name, roster] : roles.items()) {
        Subject s = subject_from_string(subject_name);
        lib.rosters_[s] = roster.get<std::vector<RoleSpec>>();
    }
    for (const auto& item : exemplars) {
        ExemplarSet set = item.get<ExemplarSet>();
        lib.exemplars_[set.subject] = std::move(set);
    }
    return lib;
}

const std::vector<RoleSpec>& PromptLibrary::roster(Subject s) const {
    auto it = rosters_.find(s);
    if (it == rosters_.end() || it->second.empty()) {
        throw Error("EmptyRoster", "no role roster for subject '" + to_string(s) + "'");
    }
    return it->second;
}

const ExemplarSet& PromptLibrary::exemplars(Subject s) const {
    auto it = exemplars_.find(s);
    if (it == exemplars_.end()) {
        throw Error("MissingExemplars", "no exemplar set for subject '" + to_string(s) + "'");
    }
    return it->second;
}

bool PromptLibrary::has_exemplars(Subject s) const { return exemplars_.count(s) > 0; }

void PromptLibrary::set_template(const std::string& name, PromptTemplate tpl) {
    templates_.insert_or_assign(name, std::move(tpl));
}

const PromptTemplate* PromptLibrary::find_template(const std::string& name) const {
    auto it = templates_.find(name);
    return it == templates_.end() ? nullptr : &it->second;
}

// ---------------------------------------------------------------------------
// Role assignment

namespace {

RoleSpec with_instance_seed(RoleSpec role, int path_index, int n_paths) {
    if (n_paths > 1) {
        role.persona_prompt += "\nYou are reasoning instance #" +
                               std::to_string(path_index + 1) + " of " + std::to_string(n_paths) +
                               "; develop your own independent line of reasoning.";
    }
    return role;
}

}  // namespace

std::vector<RolePair> assign_roles(const std::vector<RoleSpec>& roster,
                                   const InteractionConfig& interaction, int n_paths) {
    if (roster.empty()) throw Error("EmptyRoster", "role roster is empty");
    if (n_paths < 1) throw Error("ContradictoryConfig", "n_paths must be >= 1");

    const std::string& primary_domain = roster.front().domain_tag;
    std::vector<RoleSpec> primary, other;
    for (const auto& r : roster) {
        (r.domain_tag == primary_domain ? primary : other).push_back(r);
    }
    if (interaction.domain_mode == DomainMode::DifferentDomain && other.empty()) {
        throw Error("RosterTooHomogeneous",
                    "different-domain pairing requested but every roster role has domain_tag '" +
                        primary_domain + "'");
    }

    std::vector<RolePair> pairs;
    pairs.reserve(static_cast<size_t>(n_paths));
    for (int i = 0; i < n_paths; ++i) {
        const RoleSpec& reactive = primary[static_cast<size_t>(i) % primary.size()];
        const RoleSpec* reflection = nullptr;
        if (interaction.domain_mode == DomainMode::SameDomain) {
            reflection = primary.size() > 1
                             ? &primary[static_cast<size_t>(i + 1) % primary.size()]
                             : &reactive;
        } else {
            reflection = &other[static_cast<size_t>(i) % other.size()];
        }
        pairs.push_back(RolePair{with_instance_seed(reactive, i, n_paths),
                                 with_instance_seed(*reflection, i, n_paths)});
    }
    return pairs;
}

// ---------------------------------------------------------------------------
// Rendering

std::string render_choices(const Question& q) {
    std::string out;
    for (const auto& c : q.choices) {
        out += "(";
        out += c.label;
        out += ") " + c.text + "\n";
    }
    if (!out.empty()) out.pop_back();
    return out;
}

std::string render_question_block(const Question& q) {
    return "Question: " + q.stem + "\n" + render_choices(q);
}

std::vector<ChatMessage> render_reactive_prompt(const Question& q, const RoleSpec& role,
                                                int shots, const ExemplarSet* exemplars) {
    if (shots != 0 && shots != 5) {
        throw Error("ContradictoryConfig", "shots must be 0 or 5");
    }
    if (shots == 5 && exemplars == nullptr) {
        throw Error("MissingExemplars", "five-shot rendering requires an exemplar set");
    }
    if (shots == 5 && exemplars->exemplars.size() != 5) {
        throw Error("InvalidExemplarSet",
                    "exemplar set must hold exactly 5 exemplars, has " +
                        std::to_string(exemplars->exemplars.size()));
    }

    std::string system = role.persona_prompt;
    system +=
        "\n\nDecompose the question into the sub-tasks you must solve, writing each on its "
        "own line starting with \"SUBTASK: \". Then work through the sub-tasks and give a "
        "preliminary answer. End your reply with a final line of the form "
        "\"FINAL ANSWER: (X)\" where X is the letter of your chosen option.";

    std::string user;
    if (shots == 5) {
        user += "Here are worked examples:\n\n";
        for (const auto& ex : exemplars->exemplars) {
            user += "Q: " + ex.question.stem + "\n" + render_choices(ex.question) + "\n";
            user += "A: " + ex.solution + "\n\n";
        }
        user += "Now answer this question.\n";
    }
    user += render_question_block(q);

    return {ChatMessage{ChatRole::System, system}, ChatMessage{ChatRole::User, user}};
}

std::vector<ChatMessage> render_reflection_prompt(const Question& q,
                                                  const std::string& preliminary,
                                                  const RoleSpec& role, Style style) {
    if (preliminary.empty()) {
        throw Error("MissingPreliminary", "reflection prompt requires a non-empty preliminary");
    }
    std::string system = role.persona_prompt;
    system += "\n\nYou review another agent's preliminary answer to a multiple-choice question. ";
    system += (style == Style::Collaboration) ? kCollaborationClause : kDebateClause;
    system +=
        " Address each SUBTASK line recorded in the preliminary answer in turn, then state "
        "your own conclusion ending with \"FINAL ANSWER: (X)\".";

    std::string user = render_question_block(q);
    user += "\n\nPreliminary answer under review:\n---\n" + preliminary + "\n---";

    return {ChatMessage{ChatRole::System, system}, ChatMessage{ChatRole::User, user}};
}

namespace {

// Per-path summarizer budget: keep the final 2000 characters of a block.
constexpr size_t kPathBlockBudget = 2000;

std::string truncate_to_tail(const std::string& text) {
    if (text.size() <= kPathBlockBudget) return text;
    return "..." + text.substr(text.size() - kPathBlockBudget);
}

}  // namespace

std::vector<ChatMessage> render_summarizer_prompt(const Question& q,
                                                  const std::vector<PathResult>& paths) {
    if (paths.empty()) {
        throw Error("EmptyPaths", "summarizer prompt requires at least one path");
    }
    std::string system = "You are a neutral summarizer consolidating independent reasoning ";
    if (paths.size() > 1) {
        system +=
            "paths that answered the same question. Weigh the quality of each path's "
            "reasoning; do not simply count votes. Identify the soundest derivation, even "
            "when it disagrees with the majority, and give the final decision.";
    } else {
        system +=
            "output for a question. Review the path's reasoning and give the final decision.";
    }
    system += " End your reply with \"FINAL ANSWER: (X)\".";

    std::string user = render_question_block(q);
    user += "\n";
    for (size_t i = 0; i < paths.size(); ++i) {
        const PathResult& p = paths[i];
        std::string last_reactive;
        for (const auto& m : p.transcript) {
            if (m.speaker == Speaker::Reactive) last_reactive = m.content;
        }
        user += "\nPath " + std::to_string(i + 1) + " (" + p.reactive_role.name + " with " +
                p.reflection_role.name + "):\n" + truncate_to_tail(last_reactive) + "\n";
    }

    return {ChatMessage{ChatRole::System, system}, ChatMessage{ChatRole::User, user}};
}

// ---------------------------------------------------------------------------
// Answer extraction

namespace {

bool is_token_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

char to_upper(char c) { return static_cast<char>(std::toupper(static_cast<unsigned char>(c))); }

// Case-insensitive search for the last occurrence of needle at or before pos.
size_t rfind_ci(const std::string& hay, const std::string& needle, size_t pos) {
    if (needle.empty() || hay.size() < needle.size()) return std::string::npos;
    size_t start = std::min(pos, hay.size() - needle.size());
    for (size_t i = start + 1; i-- > 0;) {
        bool match = true;
        for (size_t k = 0; k < needle.size(); ++k) {
            if (to_upper(hay[i + k]) != to_upper(needle[k])) {
                match = false;
                break;
            }
        }
        if (match) return i;
    }
    return std::string::npos;
}

// Parses the label following an answer marker: optional ':' or '-', optional
// parentheses, one letter that must stand alone.
bool parse_marker_label(const std::string& text, size_t after_marker, char* out) {
    size_t i = after_marker;
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
    if (i < text.size() && (text[i] == ':' || text[i] == '-')) ++i;
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
    bool open_paren = false;
    if (i < text.size() && text[i] == '(') {
        open_paren = true;
        ++i;
    }
    if (i >= text.size() || !std::isalpha(static_cast<unsigned char>(text[i]))) return false;
    char letter = text[i];
    ++i;
    if (open_paren) {
        if (i >= text.size() || text[i] != ')') return false;
        ++i;
    }
    if (i < text.size() && is_token_char(text[i])) return false;  // letter not standalone
    *out = to_upper(letter);
    return true;
}

}  // namespace

AnswerLabel extract_answer(const std::string& text, const Question& q) {
    const std::string marker = kAnswerMarker;

    // Rule 1: last "FINAL ANSWER: (X)" / "FINAL ANSWER: X" with a valid label.
    size_t pos = text.size();
    while (pos != std::string::npos) {
        size_t hit = rfind_ci(text, marker, pos);
        if (hit == std::string::npos) break;
        char letter = 0;
        if (parse_marker_label(text, hit + marker.size(), &letter) && q.has_label(letter)) {
            return AnswerLabel::of(letter);
        }
        if (hit == 0) break;
        pos = hit - 1;
    }

    // Rule 2: last parenthesized standalone label "(X)".
    for (size_t i = text.size(); i-- > 0;) {
        if (text[i] != '(') continue;
        if (i + 2 < text.size() && std::isalpha(static_cast<unsigned char>(text[i + 1])) &&
            text[i + 2] == ')') {
            char letter = to_upper(text[i + 1]);
            if (q.has_label(letter)) return AnswerLabel::of(letter);
        }
    }

    // Rule 3: last standalone label token.
    for (size_t end = text.size(); end-- > 0;) {
        if (!is_token_char(text[end])) continue;
        size_t start = end;
        while (start > 0 && is_token_char(text[start - 1])) --start;
        if (end == start && std::isalpha(static_cast<unsigned char>(text[start]))) {
            char letter = to_upper(text[start]);
            if (q.has_label(letter)) return AnswerLabel::of(letter);
        }
        end = start;  // skip the rest of this token
        if (end == 0) break;
    }

    return AnswerLabel::unparsed();
}

}  // namespace rrmp
