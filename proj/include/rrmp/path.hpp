#pragma once
// Executes one reasoning path: the reactive agent decomposes the question and
// answers preliminarily; the reflection agent critiques or supplements; the
// reactive agent issues the revised (augmented) decision; loop until the
// round budget or an explicit confirmation.

#include <functional>
#include <string>
#include <vector>

#include "rrmp/backend.hpp"
#include "rrmp/core.hpp"
#include "rrmp/memory.hpp"
#include "rrmp/prompts.hpp"

namespace rrmp {

// Rolling chat history. Multi-instance mode gives each agent its own
// dialogue; single-instance mode threads one dialogue through all roles.
struct Dialogue {
    std::vector<ChatMessage> history;
};

// Engine transcript tap: receives one JSON record per backend call
// ({"type":"call",...}) and one per completed path ({"type":"memory",...}).
using TranscriptSink = std::function<void(const json&)>;

// Case-insensitive position of the last answer marker, npos if absent.
size_t find_last_answer_marker(const std::string& text);

// True when the revision text carries the confirm token before its answer
// marker (the early-stop rule).
bool revision_confirms(const std::string& text);

class PathRunner {
public:
    PathRunner(Backend& backend, const RunConfig& cfg, RolePair pair, int path_index,
               const ExemplarSet* exemplars = nullptr, Dialogue* shared_dialogue = nullptr,
               TranscriptSink sink = {}, std::string question_id = "");

    // One backend call with the reactive prompt; stores the response under
    // "preliminary" and each SUBTASK: line under "subtasks".
    std::string reactive_step(const Question& q, MemoryStore& store);

    // One backend call with the reflection prompt; appends under "reflections".
    // Requires a non-empty "preliminary" entry.
    std::string reflection_step(const Question& q, const std::string& s_prime,
                                MemoryStore& store, int round);

    // The augmented action: the reactive agent revises conditioned on the
    // reflection (quoted verbatim); stored under "final".
    std::string revision_step(const Question& q, const std::string& reflection,
                              MemoryStore& store, int round);

    // Full loop; path-level failures degrade to an Unparsed result with an
    // error note instead of aborting sibling paths.
    PathResult run(const Question& q);

private:
    ChatResponse call(Dialogue& dialogue, const std::vector<ChatMessage>& fresh,
                      const std::string& agent, int round);

    Backend& backend_;
    const RunConfig& cfg_;
    RolePair pair_;
    int path_index_;
    const ExemplarSet* exemplars_;
    Dialogue* shared_dialogue_;
    TranscriptSink sink_;
    std::string question_id_;
    Dialogue reactive_dialogue_;
    Dialogue reflection_dialogue_;
};

// Standalone single-step entry points (fresh one-shot dialogues).
std::string reactive_step(const Question& q, const RoleSpec& role, Backend& backend,
                          MemoryStore& store, const RunConfig& cfg,
                          const ExemplarSet* exemplars = nullptr);
std::string reflection_step(const Question& q, const std::string& s_prime, const RoleSpec& role,
                            Backend& backend, MemoryStore& store, const RunConfig& cfg,
                            int round = 1);

PathResult run_path(const Question& q, const RolePair& pair, Backend& backend,
                    const RunConfig& cfg, int path_index,
                    const ExemplarSet* exemplars = nullptr, Dialogue* shared_dialogue = nullptr,
                    TranscriptSink sink = {}, const std::string& question_id = "");

}  // namespace rrmp
