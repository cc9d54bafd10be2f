#pragma once
// Dataset ingestion, run execution across strategies, accuracy scoring, and
// report/table emission. Scoring is a separate pass over completed records:
// gold labels are never consumed before prediction extraction.

#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "rrmp/backend.hpp"
#include "rrmp/core.hpp"
#include "rrmp/orchestrator.hpp"
#include "rrmp/prompts.hpp"

namespace rrmp {

// RFC-4180 CSV: quoted fields, "" escapes, newlines inside quotes.
std::vector<std::vector<std::string>> parse_csv(const std::string& text);
std::string csv_escape(const std::string& field);

// Headerless rows `question,choiceA,choiceB,choiceC,choiceD,answer`; the
// answer column must be A-D; ids are assigned as `<subject>:<row_number>`.
std::vector<Question> load_mmlu_csv(const std::string& path, Subject subject,
                                    bool has_header = false);

struct Accuracy {
    double percent = 0.0;
    int matches = 0;
    int total = 0;
    int unparsed_count = 0;
    bool operator==(const Accuracy&) const = default;
};

// 100 * matches / |gold|; Unparsed never matches. Every prediction id must
// appear exactly once in gold.
Accuracy score_accuracy(const std::vector<std::pair<std::string, AnswerLabel>>& predictions,
                        const std::vector<std::pair<std::string, char>>& gold);

// Published per-method accuracy values, used only for side-by-side display
// in reports and tables, never as pass/fail targets.
class ReferenceTable {
public:
    static ReferenceTable load(const std::string& path);  // empty table if file absent

    std::optional<json> lookup(const std::string& method_key, Subject subject,
                               int shots) const;
    const std::string& note() const { return note_; }
    bool empty() const { return rows_.is_null() || rows_.empty(); }

private:
    json rows_;
    std::string note_;
};

// Table row / reference key: the interaction paradigm for the multi-path
// strategy, the strategy name otherwise.
std::string method_key(const RunConfig& cfg);

// Runs every question under cfg; per-question failures are recorded and
// scored incorrect, never abort the run. Emits one transcript record per
// backend call (plus per-path memory snapshots) to `transcript` when given.
json run_benchmark(const std::vector<Question>& dataset, const RunConfig& cfg,
                   Backend& backend, const PromptLibrary& lib,
                   std::ostream* transcript = nullptr,
                   const ReferenceTable* reference = nullptr);

struct TableOutput {
    std::string text;
    std::string csv;
};

// Rows = methods, columns = (dataset, shots); deterministic order. Mixed
// datasets require group_datasets, otherwise InconsistentReports.
TableOutput emit_table(const std::vector<json>& reports, bool group_datasets = false);

}  // namespace rrmp
