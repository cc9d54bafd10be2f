#pragma once
// Fan-out across n reasoning paths, aggregation (summarizer agent or majority
// vote), the four classic baseline strategies, and the three interaction
// topologies. Path results are always joined in path_index order regardless
// of completion order.

#include <vector>

#include "rrmp/backend.hpp"
#include "rrmp/core.hpp"
#include "rrmp/path.hpp"
#include "rrmp/prompts.hpp"

namespace rrmp {

struct StrategyOutcome {
    std::vector<PathResult> paths;  // baselines/topologies model samples/agents as paths
    FinalDecision decision;
};

// Multi-path run: assign roles, run n paths (concurrently up to
// cfg.parallelism in multi-instance mode), consolidate with the summarizer.
// Throws AllPathsFailed when every path degraded with an error note.
StrategyOutcome run_multi_path(const Question& q, const RunConfig& cfg, Backend& backend,
                               const PromptLibrary& lib, TranscriptSink sink = {});

// One summarizer call over the paths; an Unparsed summarizer output falls
// back to majority_vote with the fallback recorded.
FinalDecision summarize(const Question& q, const std::vector<PathResult>& paths,
                        Backend& backend, const RunConfig& cfg, TranscriptSink sink = {});

// Most frequent non-Unparsed answer; ties broken by the lowest path_index
// among the tied labels' first occurrences; all-Unparsed yields Unparsed.
FinalDecision majority_vote(const std::vector<PathResult>& paths);

// Standard / CoT / SelfConsistency / SelfRefine.
StrategyOutcome run_baseline(const Question& q, const RunConfig& cfg, Backend& backend,
                             const PromptLibrary& lib, TranscriptSink sink = {});

// Linear / Hierarchical / Network wiring per cfg.topology.
StrategyOutcome run_topology(const Question& q, const RunConfig& cfg, Backend& backend,
                             const PromptLibrary& lib, TranscriptSink sink = {});

// Dispatch on cfg.strategy (cfg must be validated).
StrategyOutcome run_strategy(const Question& q, const RunConfig& cfg, Backend& backend,
                             const PromptLibrary& lib, TranscriptSink sink = {});

}  // namespace rrmp
