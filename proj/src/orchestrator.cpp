#include "rrmp/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <thread>

namespace rrmp {

namespace {

// Shared call helper for baselines and topologies: multi-instance dialogue
// semantics (system message only opens the dialogue), one sink record per call.
struct CallCtx {
    Backend& backend;
    const RunConfig& cfg;
    TranscriptSink& sink;
    const std::string& question_id;
};

ChatResponse chat(CallCtx& ctx, Dialogue& dlg, const std::vector<ChatMessage>& fresh,
                  int path_index, const std::string& agent, int round, double temperature,
                  long long seed) {
    if (dlg.history.empty()) {
        dlg.history = fresh;
    } else {
        for (const auto& m : fresh) {
            if (m.role != ChatRole::System) dlg.history.push_back(m);
        }
    }
    ChatRequest req;
    req.model = ctx.cfg.backend.model;
    req.messages = dlg.history;
    req.temperature = temperature;
    req.seed = seed;
    ChatResponse resp = ctx.backend.complete(req);
    dlg.history.push_back(ChatMessage{ChatRole::Assistant, resp.content});
    if (ctx.sink) {
        ctx.sink(json{{"type", "call"},
                      {"question_id", ctx.question_id},
                      {"strategy", to_string(ctx.cfg.strategy)},
                      {"path_index", path_index},
                      {"round", round},
                      {"agent", agent},
                      {"request", req},
                      {"response", resp}});
    }
    return resp;
}

std::vector<std::pair<int, AnswerLabel>> collect_answers(const std::vector<PathResult>& paths) {
    std::vector<std::pair<int, AnswerLabel>> out;
    out.reserve(paths.size());
    for (const auto& p : paths) out.emplace_back(p.path_index, p.answer);
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
}

const RoleSpec kNeutralRole{"assistant", "general",
                            "You are a careful problem-solving assistant."};

std::string baseline_system(Strategy s) {
    std::string out = kNeutralRole.persona_prompt + "\n\nAnswer the multiple-choice question.";
    if (s != Strategy::Standard) {
        out += " Think step by step and explain your reasoning, then";
    } else {
        out += " Reply with your chosen option,";
    }
    out += " ending with a final line of the form \"FINAL ANSWER: (X)\" where X is the letter "
           "of your chosen option.";
    return out;
}

std::string topology_system(const RoleSpec& role) {
    return role.persona_prompt +
           "\n\nWork through the question carefully and end your reply with a final line of "
           "the form \"FINAL ANSWER: (X)\" where X is the letter of your chosen option.";
}

}  // namespace

// ---------------------------------------------------------------------------
// Aggregation

FinalDecision majority_vote(const std::vector<PathResult>& paths) {
    if (paths.empty()) throw Error("EmptyPaths", "majority vote requires at least one path");

    std::vector<PathResult const*> ordered;
    ordered.reserve(paths.size());
    for (const auto& p : paths) ordered.push_back(&p);
    std::sort(ordered.begin(), ordered.end(),
              [](const PathResult* a, const PathResult* b) {
                  return a->path_index < b->path_index;
              });

    // Tally in first-occurrence order so ties resolve to the label whose
    // first occurrence has the lowest path_index.
    std::vector<std::pair<AnswerLabel, int>> tally;
    for (const PathResult* p : ordered) {
        if (p->answer.is_unparsed()) continue;
        auto it = std::find_if(tally.begin(), tally.end(),
                               [&](const auto& t) { return t.first == p->answer; });
        if (it == tally.end()) {
            tally.emplace_back(p->answer, 1);
        } else {
            ++it->second;
        }
    }

    FinalDecision d;
    d.method = DecisionMethod::MajorityVote;
    d.path_answers = collect_answers(paths);
    if (tally.empty()) {
        d.answer = AnswerLabel::unparsed();
        d.rationale = "majority vote: no parseable path answers";
        return d;
    }
    const auto* best = &tally.front();
    for (const auto& t : tally) {
        if (t.second > best->second) best = &t;
    }
    d.answer = best->first;
    std::string detail;
    for (const auto& [label, count] : tally) {
        if (!detail.empty()) detail += ", ";
        detail += label.str() + "=" + std::to_string(count);
    }
    d.rationale = "majority vote: " + detail;
    return d;
}

FinalDecision summarize(const Question& q, const std::vector<PathResult>& paths,
                        Backend& backend, const RunConfig& cfg, TranscriptSink sink) {
    if (paths.empty()) throw Error("EmptyPaths", "summarizer requires at least one path");

    ChatRequest req;
    req.model = cfg.backend.model;
    req.messages = render_summarizer_prompt(q, paths);
    req.temperature = cfg.temperature_summarizer;
    req.seed = cfg.seed;
    ChatResponse resp = backend.complete(req);
    if (sink) {
        sink(json{{"type", "call"},
                  {"question_id", q.id},
                  {"strategy", to_string(cfg.strategy)},
                  {"path_index", -1},
                  {"round", 0},
                  {"agent", "summarizer"},
                  {"request", req},
                  {"response", resp}});
    }

    FinalDecision d;
    d.answer = extract_answer(resp.content, q);
    d.method = DecisionMethod::Summarizer;
    d.rationale = resp.content;
    d.path_answers = collect_answers(paths);
    if (d.answer.is_unparsed()) {
        FinalDecision fallback = majority_vote(paths);
        fallback.summarizer_fallback = true;
        fallback.rationale += "; summarizer output had no extractable label and was ignored: " +
                              resp.content;
        return fallback;
    }
    return d;
}

// ---------------------------------------------------------------------------
// Multi-path

StrategyOutcome run_multi_path(const Question& q, const RunConfig& cfg, Backend& backend,
                               const PromptLibrary& lib, TranscriptSink sink) {
    if (cfg.strategy != Strategy::RRMP) {
        throw Error("ContradictoryConfig", "run_multi_path requires the rrmp strategy");
    }
    auto pairs = assign_roles(lib.roster(q.subject), cfg.interaction, cfg.n_paths);
    const ExemplarSet* exemplars = cfg.shots == 5 ? &lib.exemplars(q.subject) : nullptr;

    const size_t n = pairs.size();
    std::vector<PathResult> paths(n);
    std::vector<std::vector<json>> buffers(n);

    if (cfg.instance_mode == InstanceMode::MultiInstance && cfg.parallelism > 1 && n > 1) {
        std::atomic<size_t> next{0};
        auto worker = [&]() {
            for (size_t i; (i = next.fetch_add(1)) < n;) {
                TranscriptSink buffer = [&buffers, i](const json& r) {
                    buffers[i].push_back(r);
                };
                paths[i] = run_path(q, pairs[i], backend, cfg, static_cast<int>(i), exemplars,
                                    nullptr, buffer, q.id);
            }
        };
        size_t workers = std::min<size_t>(static_cast<size_t>(cfg.parallelism), n);
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    } else {
        Dialogue rolling;  // single-instance mode threads one context through all paths
        Dialogue* shared =
            cfg.instance_mode == InstanceMode::SingleInstance ? &rolling : nullptr;
        for (size_t i = 0; i < n; ++i) {
            TranscriptSink buffer = [&buffers, i](const json& r) { buffers[i].push_back(r); };
            paths[i] = run_path(q, pairs[i], backend, cfg, static_cast<int>(i), exemplars,
                                shared, buffer, q.id);
        }
    }

    if (sink) {
        for (const auto& buf : buffers) {
            for (const auto& record : buf) sink(record);
        }
    }

    bool all_failed = std::all_of(paths.begin(), paths.end(), [](const PathResult& p) {
        return p.error.has_value() && p.answer.is_unparsed();
    });
    if (all_failed) {
        throw Error("AllPathsFailed", "every reasoning path degraded with an error note");
    }

    FinalDecision decision = summarize(q, paths, backend, cfg, sink);
    if (decision.method == DecisionMethod::Summarizer) {
        FinalDecision vote = majority_vote(paths);
        decision.overruled_majority = !(decision.answer == vote.answer);
    }
    return StrategyOutcome{std::move(paths), std::move(decision)};
}

// ---------------------------------------------------------------------------
// Baselines

StrategyOutcome run_baseline(const Question& q, const RunConfig& cfg, Backend& backend,
                             const PromptLibrary& lib, TranscriptSink sink) {
    (void)lib;
    CallCtx ctx{backend, cfg, sink, q.id};
    const std::string question = render_question_block(q);

    switch (cfg.strategy) {
        case Strategy::Standard:
        case Strategy::CoT: {
            Dialogue dlg;
            std::vector<ChatMessage> prompt{
                ChatMessage{ChatRole::System, baseline_system(cfg.strategy)},
                ChatMessage{ChatRole::User, question}};
            ChatResponse resp =
                chat(ctx, dlg, prompt, 0, "reactive", 0, cfg.temperature_paths, cfg.seed);

            PathResult pr;
            pr.path_index = 0;
            pr.reactive_role = kNeutralRole;
            pr.reflection_role = kNeutralRole;
            pr.transcript = {Message{Speaker::User, "user", question, 0},
                             Message{Speaker::Reactive, kNeutralRole.name, resp.content, 0}};
            pr.answer = extract_answer(resp.content, q);

            FinalDecision d;
            d.answer = pr.answer;
            d.method = DecisionMethod::SinglePath;
            d.rationale = resp.content;
            d.path_answers = {{0, pr.answer}};
            return StrategyOutcome{{std::move(pr)}, std::move(d)};
        }

        case Strategy::SelfConsistency: {
            std::vector<PathResult> samples;
            samples.reserve(static_cast<size_t>(cfg.n_paths));
            for (int i = 0; i < cfg.n_paths; ++i) {
                Dialogue dlg;
                std::vector<ChatMessage> prompt{
                    ChatMessage{ChatRole::System, baseline_system(Strategy::CoT)},
                    ChatMessage{ChatRole::User, question}};
                ChatResponse resp = chat(ctx, dlg, prompt, i, "reactive", 0,
                                         cfg.temperature_paths, cfg.seed + i);
                PathResult pr;
                pr.path_index = i;
                pr.reactive_role = kNeutralRole;
                pr.reflection_role = kNeutralRole;
                pr.transcript = {Message{Speaker::User, "user", question, 0},
                                 Message{Speaker::Reactive, kNeutralRole.name, resp.content, 0}};
                pr.answer = extract_answer(resp.content, q);
                samples.push_back(std::move(pr));
            }
            FinalDecision d = majority_vote(samples);
            return StrategyOutcome{std::move(samples), std::move(d)};
        }

        case Strategy::SelfRefine: {
            Dialogue dlg;
            PathResult pr;
            pr.path_index = 0;
            pr.reactive_role = kNeutralRole;
            pr.reflection_role = kNeutralRole;
            pr.transcript.push_back(Message{Speaker::User, "user", question, 0});

            std::vector<ChatMessage> prompt{
                ChatMessage{ChatRole::System, baseline_system(Strategy::CoT)},
                ChatMessage{ChatRole::User, question}};
            ChatResponse draft =
                chat(ctx, dlg, prompt, 0, "reactive", 0, cfg.temperature_paths, cfg.seed);
            pr.transcript.push_back(
                Message{Speaker::Reactive, kNeutralRole.name, draft.content, 0});
            std::string latest = draft.content;

            for (int round = 1; round <= cfg.max_reflection_rounds; ++round) {
                std::vector<ChatMessage> ask_feedback{ChatMessage{
                    ChatRole::User,
                    "Review your answer above. Point out any errors, gaps, or miscalculations."}};
                ChatResponse feedback = chat(ctx, dlg, ask_feedback, 0, "reflection", round,
                                             cfg.temperature_paths, cfg.seed);
                pr.transcript.push_back(
                    Message{Speaker::Reflection, kNeutralRole.name, feedback.content, round});

                std::vector<ChatMessage> ask_refined{ChatMessage{
                    ChatRole::User,
                    "Rewrite your solution addressing that feedback. End with a final line of "
                    "the form \"FINAL ANSWER: (X)\"."}};
                ChatResponse refined = chat(ctx, dlg, ask_refined, 0, "reactive", round,
                                            cfg.temperature_paths, cfg.seed);
                pr.transcript.push_back(
                    Message{Speaker::Reactive, kNeutralRole.name, refined.content, round});
                pr.rounds_used = round;
                latest = refined.content;
            }
            pr.answer = extract_answer(latest, q);

            FinalDecision d;
            d.answer = pr.answer;
            d.method = DecisionMethod::SinglePath;
            d.rationale = latest;
            d.path_answers = {{0, pr.answer}};
            return StrategyOutcome{{std::move(pr)}, std::move(d)};
        }

        default:
            throw Error("ContradictoryConfig",
                        "run_baseline cannot execute strategy " + to_string(cfg.strategy));
    }
}

// ---------------------------------------------------------------------------
// Topologies

namespace {

PathResult make_agent_result(int index, const RoleSpec& role, std::vector<Message> transcript,
                             AnswerLabel answer, int rounds_used) {
    PathResult pr;
    pr.path_index = index;
    pr.reactive_role = role;
    pr.reflection_role = role;
    pr.transcript = std::move(transcript);
    pr.answer = answer;
    pr.rounds_used = rounds_used;
    return pr;
}

}  // namespace

StrategyOutcome run_topology(const Question& q, const RunConfig& cfg, Backend& backend,
                             const PromptLibrary& lib, TranscriptSink sink) {
    CallCtx ctx{backend, cfg, sink, q.id};
    const auto& roster = lib.roster(q.subject);
    const std::string question = render_question_block(q);
    auto role_at = [&roster](int i) -> const RoleSpec& {
        return roster[static_cast<size_t>(i) % roster.size()];
    };
    auto run_agent = [&](int index, const RoleSpec& role, const std::string& user,
                         int round) -> ChatResponse {
        Dialogue dlg;
        std::vector<ChatMessage> prompt{ChatMessage{ChatRole::System, topology_system(role)},
                                        ChatMessage{ChatRole::User, user}};
        return chat(ctx, dlg, prompt, index, "worker", round, cfg.temperature_paths,
                    cfg.seed + index);
    };

    switch (cfg.strategy) {
        case Strategy::Linear: {
            if (cfg.topology.agents < 1) {
                throw Error("InvalidTopologySpec", "linear topology needs >= 1 agent");
            }
            std::vector<PathResult> agents;
            std::string prev_output;
            std::string prev_name;
            for (int i = 0; i < cfg.topology.agents; ++i) {
                const RoleSpec& role = role_at(i);
                std::string user = question;
                if (i > 0) {
                    user += "\n\nOutput from the previous agent (" + prev_name + "):\n---\n" +
                            prev_output +
                            "\n---\nVerify or correct the work above, then give your own "
                            "conclusion.";
                }
                ChatResponse resp = run_agent(i, role, user, 0);
                agents.push_back(make_agent_result(
                    i, role,
                    {Message{Speaker::User, "user", user, 0},
                     Message{Speaker::Reactive, role.name, resp.content, 0}},
                    extract_answer(resp.content, q), 0));
                prev_output = resp.content;
                prev_name = role.name;
            }
            FinalDecision d;
            d.answer = agents.back().answer;
            d.method = DecisionMethod::SinglePath;
            d.rationale = "linear chain of " + std::to_string(cfg.topology.agents) +
                          " agents; final agent output adopted:\n" + prev_output;
            d.path_answers = collect_answers(agents);
            return StrategyOutcome{std::move(agents), std::move(d)};
        }

        case Strategy::Hierarchical: {
            if (cfg.topology.branches < 1 || cfg.topology.branch_size < 1) {
                throw Error("InvalidTopologySpec",
                            "hierarchical topology needs >= 1 branch of >= 1 agent");
            }
            std::vector<PathResult> agents;
            std::vector<std::string> branch_outputs;
            std::vector<std::string> branch_names;
            int index = 0;
            for (int b = 0; b < cfg.topology.branches; ++b) {
                std::string prev_output;
                std::string prev_name;
                for (int s = 0; s < cfg.topology.branch_size; ++s) {
                    const RoleSpec& role = role_at(index);
                    std::string user = question;
                    if (s > 0) {
                        user += "\n\nOutput from the previous agent (" + prev_name +
                                "):\n---\n" + prev_output +
                                "\n---\nVerify or correct the work above, then give your own "
                                "conclusion.";
                    }
                    ChatResponse resp = run_agent(index, role, user, 0);
                    agents.push_back(make_agent_result(
                        index, role,
                        {Message{Speaker::User, "user", user, 0},
                         Message{Speaker::Reactive, role.name, resp.content, 0}},
                        extract_answer(resp.content, q), 0));
                    prev_output = resp.content;
                    prev_name = role.name;
                    ++index;
                }
                branch_outputs.push_back(prev_output);
                branch_names.push_back(prev_name);
            }

            const RoleSpec& head_role = role_at(index);
            std::string head_user = question + "\n\nBranch conclusions:";
            for (size_t b = 0; b < branch_outputs.size(); ++b) {
                head_user += "\n\nBranch " + std::to_string(b + 1) + " (final agent " +
                             branch_names[b] + "):\n---\n" + branch_outputs[b] + "\n---";
            }
            head_user += "\n\nMerge the branch conclusions into one final decision.";
            ChatResponse head = run_agent(index, head_role, head_user, 0);
            agents.push_back(make_agent_result(
                index, head_role,
                {Message{Speaker::User, "user", head_user, 0},
                 Message{Speaker::Reactive, head_role.name, head.content, 0}},
                extract_answer(head.content, q), 0));

            FinalDecision d;
            d.answer = agents.back().answer;
            d.method = DecisionMethod::SinglePath;
            d.rationale = "hierarchical merge over " + std::to_string(cfg.topology.branches) +
                          " branches; head output adopted:\n" + head.content;
            d.path_answers = collect_answers(agents);
            return StrategyOutcome{std::move(agents), std::move(d)};
        }

        case Strategy::Network: {
            if (cfg.topology.agents < 1 || cfg.topology.rounds < 1) {
                throw Error("InvalidTopologySpec",
                            "network topology needs >= 1 agent and >= 1 round");
            }
            const int k = cfg.topology.agents;
            const int rounds = cfg.topology.rounds;
            std::vector<std::vector<Message>> transcripts(static_cast<size_t>(k));
            std::vector<std::string> outputs(static_cast<size_t>(k));

            for (int r = 0; r < rounds; ++r) {
                std::vector<std::string> next(static_cast<size_t>(k));
                for (int i = 0; i < k; ++i) {
                    const RoleSpec& role = role_at(i);
                    std::string user = question;
                    if (r > 0) {
                        user += "\n\nAnswers from the previous round:";
                        for (int a = 0; a < k; ++a) {
                            user += "\n\nAgent " + std::to_string(a + 1) + " (" +
                                    role_at(a).name + "):\n---\n" +
                                    outputs[static_cast<size_t>(a)] + "\n---";
                        }
                        user += "\n\nReconsider your answer in light of the other agents' "
                                "reasoning.";
                    }
                    ChatResponse resp = run_agent(i, role, user, r);
                    transcripts[static_cast<size_t>(i)].push_back(
                        Message{Speaker::User, "user", user, r});
                    transcripts[static_cast<size_t>(i)].push_back(
                        Message{Speaker::Reactive, role.name, resp.content, r});
                    next[static_cast<size_t>(i)] = resp.content;
                }
                outputs = std::move(next);
            }

            std::vector<PathResult> agents;
            for (int i = 0; i < k; ++i) {
                agents.push_back(make_agent_result(
                    i, role_at(i), std::move(transcripts[static_cast<size_t>(i)]),
                    extract_answer(outputs[static_cast<size_t>(i)], q), rounds - 1));
            }
            FinalDecision d = majority_vote(agents);
            d.rationale = "network of " + std::to_string(k) + " agents, " +
                          std::to_string(rounds) + " rounds; " + d.rationale;
            return StrategyOutcome{std::move(agents), std::move(d)};
        }

        default:
            throw Error("InvalidTopologySpec",
                        "run_topology cannot execute strategy " + to_string(cfg.strategy));
    }
}

// ---------------------------------------------------------------------------

StrategyOutcome run_strategy(const Question& q, const RunConfig& cfg0, Backend& backend,
                             const PromptLibrary& lib, TranscriptSink sink) {
    RunConfig cfg = validate_run_config(cfg0);
    switch (cfg.strategy) {
        case Strategy::RRMP:
            return run_multi_path(q, cfg, backend, lib, std::move(sink));
        case Strategy::Standard:
        case Strategy::CoT:
        case Strategy::SelfConsistency:
        case Strategy::SelfRefine:
            return run_baseline(q, cfg, backend, lib, std::move(sink));
        case Strategy::Linear:
        case Strategy::Hierarchical:
        case Strategy::Network:
            return run_topology(q, cfg, backend, lib, std::move(sink));
    }
    throw Error("UnknownStrategy", "unhandled strategy");
}

}  // namespace rrmp
