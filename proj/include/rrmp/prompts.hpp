#pragma once
// Prompt rendering for every agent (reactive, reflection, summarizer,
// baselines; zero- and five-shot; collaboration vs debate; role personas)
// and final-answer extraction from model text. Pure functions over immutable
// inputs; rendering is deterministic and byte-stable.

#include <map>
#include <set>
#include <string>
#include <vector>

#include "rrmp/backend.hpp"
#include "rrmp/core.hpp"

namespace rrmp {

// The answer marker mandated in every prompt. Extraction rule 1 keys on it.
inline constexpr const char* kAnswerMarker = "FINAL ANSWER";

// Style clauses injected into reflection prompts; exposed so tests can check
// that collaboration and debate renderings differ in exactly this clause.
inline constexpr const char* kCollaborationClause =
    "Supplement and correct the reasoning, working toward a joint solution.";
inline constexpr const char* kDebateClause =
    "Challenge the answer and argue for alternatives wherever the reasoning permits.";

// Token a reactive revision uses to end the reflection loop early.
inline constexpr const char* kConfirmToken = "I CONFIRM";

// Line prefix under which reactive agents emit decomposed sub-tasks.
inline constexpr const char* kSubtaskPrefix = "SUBTASK:";

// ---------------------------------------------------------------------------
// Templates

// Literal text interleaved with {name} placeholders. Rendering fails unless
// every placeholder is bound.
class PromptTemplate {
public:
    static PromptTemplate parse(std::string name, const std::string& text);

    std::string render(const std::map<std::string, std::string>& bindings) const;

    const std::string& name() const { return name_; }
    const std::set<std::string>& required_placeholders() const { return required_; }

private:
    struct Segment {
        bool is_placeholder = false;
        std::string text;
    };
    std::string name_;
    std::vector<Segment> segments_;
    std::set<std::string> required_;
};

// ---------------------------------------------------------------------------
// Exemplars and rosters

struct Exemplar {
    Question question;
    std::string solution;  // worked solution ending with the answer marker
    char gold = 'A';
    bool operator==(const Exemplar&) const = default;
};

struct ExemplarSet {
    Subject subject = Subject::Other;
    std::vector<Exemplar> exemplars;  // exactly 5 when used few-shot
    bool operator==(const ExemplarSet&) const = default;
};

void to_json(json& j, const Exemplar& e);
void from_json(const json& j, Exemplar& e);
void to_json(json& j, const ExemplarSet& s);
void from_json(const json& j, ExemplarSet& s);

struct RolePair {
    RoleSpec reactive;
    RoleSpec reflection;
    bool operator==(const RolePair&) const = default;
};

// Role rosters, exemplar sets and named prompt preset slots loaded from the
// JSON data files shipped with the repository (user-overridable).
class PromptLibrary {
public:
    static PromptLibrary load(const std::string& data_dir);
    static PromptLibrary from_json_values(const json& roles, const json& exemplars);

    const std::vector<RoleSpec>& roster(Subject s) const;       // EmptyRoster on absence
    const ExemplarSet& exemplars(Subject s) const;              // MissingExemplars on absence
    bool has_exemplars(Subject s) const;

    // Named preset slots (e.g. "thought_experiment" ships empty; users may
    // install their own template).
    void set_template(const std::string& name, PromptTemplate tpl);
    const PromptTemplate* find_template(const std::string& name) const;

private:
    std::map<Subject, std::vector<RoleSpec>> rosters_;
    std::map<Subject, ExemplarSet> exemplars_;
    std::map<std::string, PromptTemplate> templates_;
};

// ---------------------------------------------------------------------------
// Operations

// Pairs a reactive and a reflection role per path. The first roster entry's
// domain_tag is the subject's primary domain: SameDomain keeps both agents in
// it, DifferentDomain cycles reflection agents through other-domain roles.
// Personas get a per-path instance seed so sibling paths diverge.
std::vector<RolePair> assign_roles(const std::vector<RoleSpec>& roster,
                                   const InteractionConfig& interaction, int n_paths);

// System + user messages instructing decomposition into SUBTASK: lines and a
// preliminary answer ending with the marker; 5 worked exemplars first when
// shots=5.
std::vector<ChatMessage> render_reactive_prompt(const Question& q, const RoleSpec& role,
                                                int shots, const ExemplarSet* exemplars);

// Includes the question, the preliminary answer verbatim, and the style
// clause; instructs the reflection agent to address each stored sub-task.
std::vector<ChatMessage> render_reflection_prompt(const Question& q,
                                                  const std::string& preliminary,
                                                  const RoleSpec& role, Style style);

// One block per path ("Path 1", "Path 2", ...) with its final answer text
// truncated to the last 2000 characters; instructs the summarizer to weigh
// reasoning quality rather than count votes.
std::vector<ChatMessage> render_summarizer_prompt(const Question& q,
                                                  const std::vector<PathResult>& paths);

// Scans for, in priority order: the last "FINAL ANSWER: (X)" / "FINAL ANSWER:
// X"; the last parenthesized standalone label "(X)"; the last standalone
// label token. Case-insensitive; Unparsed when nothing matches a choice label.
AnswerLabel extract_answer(const std::string& text, const Question& q);

// Lettered "(A) text" lines for a question's choices.
std::string render_choices(const Question& q);

// The user-facing question block (stem + choices), shared by several prompts.
std::string render_question_block(const Question& q);

}  // namespace rrmp
