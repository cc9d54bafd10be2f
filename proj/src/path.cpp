#include "rrmp/path.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace rrmp {

size_t find_last_answer_marker(const std::string& text) {
    const std::string marker = kAnswerMarker;
    if (text.size() < marker.size()) return std::string::npos;
    auto upper = [](char c) {
        return static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    };
    for (size_t i = text.size() - marker.size() + 1; i-- > 0;) {
        bool match = true;
        for (size_t k = 0; k < marker.size(); ++k) {
            if (upper(text[i + k]) != marker[k]) {
                match = false;
                break;
            }
        }
        if (match) return i;
    }
    return std::string::npos;
}

bool revision_confirms(const std::string& text) {
    size_t confirm = text.find(kConfirmToken);
    if (confirm == std::string::npos) return false;
    size_t marker = find_last_answer_marker(text);
    return marker == std::string::npos || confirm < marker;
}

// ---------------------------------------------------------------------------

PathRunner::PathRunner(Backend& backend, const RunConfig& cfg, RolePair pair, int path_index,
                       const ExemplarSet* exemplars, Dialogue* shared_dialogue,
                       TranscriptSink sink, std::string question_id)
    : backend_(backend),
      cfg_(cfg),
      pair_(std::move(pair)),
      path_index_(path_index),
      exemplars_(exemplars),
      shared_dialogue_(shared_dialogue),
      sink_(std::move(sink)),
      question_id_(std::move(question_id)) {
    if (cfg_.instance_mode == InstanceMode::SingleInstance && shared_dialogue_ == nullptr) {
        shared_dialogue_ = &reactive_dialogue_;  // one context even within the path
    }
}

ChatResponse PathRunner::call(Dialogue& dialogue, const std::vector<ChatMessage>& fresh,
                              const std::string& agent, int round) {
    Dialogue* dlg = shared_dialogue_ != nullptr ? shared_dialogue_ : &dialogue;
    if (shared_dialogue_ != nullptr) {
        // Single rolling context: role information is folded into a user turn
        // on every call; one generic system message opens the dialogue.
        if (dlg->history.empty()) {
            dlg->history.push_back(ChatMessage{
                ChatRole::System,
                "You are a reasoning assistant that switches between assigned roles. Act only "
                "as the role named in each instruction."});
        }
        std::string folded;
        for (const auto& m : fresh) {
            if (m.role == ChatRole::System) {
                folded += "You now act as the following role.\n" + m.content + "\n\n";
            } else {
                folded += m.content;
            }
        }
        dlg->history.push_back(ChatMessage{ChatRole::User, folded});
    } else {
        if (dlg->history.empty()) {
            dlg->history = fresh;
        } else {
            // Persona already established by the opening system message.
            for (const auto& m : fresh) {
                if (m.role != ChatRole::System) dlg->history.push_back(m);
            }
        }
    }

    ChatRequest req;
    req.model = cfg_.backend.model;
    req.messages = dlg->history;
    req.temperature = cfg_.temperature_paths;
    req.seed = cfg_.seed + path_index_;
    ChatResponse resp = backend_.complete(req);
    dlg->history.push_back(ChatMessage{ChatRole::Assistant, resp.content});

    if (sink_) {
        sink_(json{{"type", "call"},
                   {"question_id", question_id_},
                   {"strategy", to_string(cfg_.strategy)},
                   {"path_index", path_index_},
                   {"round", round},
                   {"agent", agent},
                   {"request", req},
                   {"response", resp}});
    }
    return resp;
}

std::string PathRunner::reactive_step(const Question& q, MemoryStore& store) {
    auto prompt = render_reactive_prompt(q, pair_.reactive, cfg_.shots,
                                         cfg_.shots == 5 ? exemplars_ : nullptr);
    ChatResponse resp = call(reactive_dialogue_, prompt, "reactive", 0);

    store.append(kKeyPreliminary, resp.content, Speaker::Reactive, 0);
    std::istringstream lines(resp.content);
    std::string line;
    while (std::getline(lines, line)) {
        size_t start = line.find_first_not_of(" \t");
        if (start == std::string::npos) continue;
        std::string trimmed = line.substr(start);
        if (!trimmed.starts_with(kSubtaskPrefix)) continue;
        std::string task = trimmed.substr(std::string(kSubtaskPrefix).size());
        size_t content = task.find_first_not_of(" \t");
        if (content == std::string::npos) continue;
        store.append(kKeySubtasks, task.substr(content), Speaker::Reactive, 0);
    }
    return resp.content;
}

std::string PathRunner::reflection_step(const Question& q, const std::string& s_prime,
                                        MemoryStore& store, int round) {
    if (store.retrieve(kKeyPreliminary).empty()) {
        throw Error("MissingPreliminary",
                    "reflection requires a stored preliminary answer");
    }
    auto prompt = render_reflection_prompt(q, s_prime, pair_.reflection, cfg_.interaction.style);
    ChatResponse resp = call(reflection_dialogue_, prompt, "reflection", round);
    store.append(kKeyReflections, resp.content, Speaker::Reflection, round);
    return resp.content;
}

std::string PathRunner::revision_step(const Question& q, const std::string& reflection,
                                      MemoryStore& store, int round) {
    (void)q;  // the question is already in the reactive dialogue
    std::string user = "Feedback from the " + pair_.reflection.name +
                       " agent on your answer:\n---\n" + reflection +
                       "\n---\nRevise your answer in light of this feedback. If after weighing "
                       "it you are fully confident in your current answer, write \"I CONFIRM\" "
                       "before your final line. End with \"FINAL ANSWER: (X)\".";
    ChatResponse resp =
        call(reactive_dialogue_, {ChatMessage{ChatRole::User, user}}, "reactive", round);
    store.append(kKeyFinal, resp.content, Speaker::Reactive, round);
    return resp.content;
}

PathResult PathRunner::run(const Question& q) {
    PathResult pr;
    pr.path_index = path_index_;
    pr.reactive_role = pair_.reactive;
    pr.reflection_role = pair_.reflection;

    MemoryStore store;
    try {
        pr.transcript.push_back(Message{Speaker::User, "user", render_question_block(q), 0});
        std::string latest = reactive_step(q, store);
        pr.transcript.push_back(Message{Speaker::Reactive, pair_.reactive.name, latest, 0});

        for (int round = 1; round <= cfg_.max_reflection_rounds; ++round) {
            std::string reflection = reflection_step(q, latest, store, round);
            pr.transcript.push_back(
                Message{Speaker::Reflection, pair_.reflection.name, reflection, round});

            std::string revision = revision_step(q, reflection, store, round);
            pr.transcript.push_back(
                Message{Speaker::Reactive, pair_.reactive.name, revision, round});
            pr.rounds_used = round;
            latest = revision;
            if (revision_confirms(revision)) {
                pr.stopped_early = true;
                break;
            }
        }
        pr.answer = extract_answer(latest, q);
    } catch (const Error& e) {
        pr.answer = AnswerLabel::unparsed();
        pr.error = e.what();
        bool has_reactive = std::any_of(pr.transcript.begin(), pr.transcript.end(),
                                        [](const Message& m) {
                                            return m.speaker == Speaker::Reactive;
                                        });
        if (!has_reactive) {
            pr.transcript.push_back(Message{Speaker::Reactive, pair_.reactive.name,
                                            std::string("[path failed] ") + e.what(),
                                            pr.rounds_used});
        }
    }

    if (sink_) {
        sink_(json{{"type", "memory"},
                   {"question_id", question_id_},
                   {"path_index", path_index_},
                   {"store", store.to_json_value()}});
    }
    return pr;
}

// ---------------------------------------------------------------------------

std::string reactive_step(const Question& q, const RoleSpec& role, Backend& backend,
                          MemoryStore& store, const RunConfig& cfg,
                          const ExemplarSet* exemplars) {
    PathRunner runner(backend, cfg, RolePair{role, role}, 0, exemplars);
    return runner.reactive_step(q, store);
}

std::string reflection_step(const Question& q, const std::string& s_prime, const RoleSpec& role,
                            Backend& backend, MemoryStore& store, const RunConfig& cfg,
                            int round) {
    PathRunner runner(backend, cfg, RolePair{role, role}, 0);
    return runner.reflection_step(q, s_prime, store, round);
}

PathResult run_path(const Question& q, const RolePair& pair, Backend& backend,
                    const RunConfig& cfg, int path_index, const ExemplarSet* exemplars,
                    Dialogue* shared_dialogue, TranscriptSink sink,
                    const std::string& question_id) {
    PathRunner runner(backend, cfg, pair, path_index, exemplars, shared_dialogue,
                      std::move(sink), question_id);
    return runner.run(q);
}

}  // namespace rrmp
