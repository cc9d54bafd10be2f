#include "rrmp/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

namespace rrmp {

// ---------------------------------------------------------------------------
// CSV

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;

    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                row.push_back(std::move(field));
                field.clear();
                field_started = true;
                break;
            case '\r':
                break;  // CRLF normalization
            case '\n':
                if (field_started || !field.empty() || !row.empty()) {
                    row.push_back(std::move(field));
                    field.clear();
                    rows.push_back(std::move(row));
                    row.clear();
                }
                field_started = false;
                break;
            default:
                field.push_back(c);
                field_started = true;
                break;
        }
    }
    if (in_quotes) throw Error("MalformedRow", "unterminated quoted field at end of input");
    if (field_started || !field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

std::vector<Question> load_mmlu_csv(const std::string& path, Subject subject, bool has_header) {
    std::ifstream in(path);
    if (!in) throw Error("InfrastructureError", "cannot read dataset file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
        throw Error("EmptyFile", "dataset file '" + path + "' is empty");
    }

    auto rows = parse_csv(text);
    size_t start = has_header ? 1 : 0;
    if (rows.size() <= start) {
        throw Error("EmptyFile", "dataset file '" + path + "' has no data rows");
    }

    std::vector<Question> out;
    for (size_t r = start; r < rows.size(); ++r) {
        const auto& row = rows[r];
        const int row_number = static_cast<int>(r - start + 1);
        if (row.size() != 6) {
            throw Error("MalformedRow", "row " + std::to_string(row_number) + " has " +
                                            std::to_string(row.size()) + " fields, expected 6");
        }
        std::string answer = row[5];
        // tolerate stray whitespace around the answer letter
        answer.erase(0, answer.find_first_not_of(" \t"));
        answer.erase(answer.find_last_not_of(" \t") + 1);
        if (answer.size() == 1 && answer[0] >= 'a' && answer[0] <= 'z') {
            answer[0] = static_cast<char>(answer[0] - 'a' + 'A');
        }
        if (answer.size() != 1 || answer[0] < 'A' || answer[0] > 'D') {
            throw Error("MalformedRow", "row " + std::to_string(row_number) +
                                            " answer '" + row[5] + "' is not A-D");
        }
        Question q;
        q.id = to_string(subject) + ":" + std::to_string(row_number);
        q.stem = row[0];
        q.choices = {Choice{'A', row[1]}, Choice{'B', row[2]}, Choice{'C', row[3]},
                     Choice{'D', row[4]}};
        q.gold = answer[0];
        q.subject = subject;
        validate_question(q);
        out.push_back(std::move(q));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scoring

Accuracy score_accuracy(const std::vector<std::pair<std::string, AnswerLabel>>& predictions,
                        const std::vector<std::pair<std::string, char>>& gold) {
    std::map<std::string, char> gold_map;
    for (const auto& [id, label] : gold) gold_map.emplace(id, label);

    std::set<std::string> seen;
    Accuracy acc;
    acc.total = static_cast<int>(gold.size());
    for (const auto& [id, answer] : predictions) {
        auto it = gold_map.find(id);
        if (it == gold_map.end()) {
            throw Error("UnknownQuestionId", "prediction for unknown question '" + id + "'");
        }
        if (!seen.insert(id).second) {
            throw Error("DuplicatePrediction", "multiple predictions for question '" + id + "'");
        }
        if (answer.is_unparsed()) {
            ++acc.unparsed_count;
        } else if (answer.value() == it->second) {
            ++acc.matches;
        }
    }
    acc.percent = acc.total == 0
                      ? 0.0
                      : 100.0 * static_cast<double>(acc.matches) / static_cast<double>(acc.total);
    return acc;
}

// ---------------------------------------------------------------------------
// Reference display values

ReferenceTable ReferenceTable::load(const std::string& path) {
    ReferenceTable t;
    std::ifstream in(path);
    if (!in) return t;
    std::stringstream ss;
    ss << in.rdbuf();
    json j = json::parse(ss.str());
    t.rows_ = j.value("rows", json::object());
    t.note_ = j.value("note", std::string("published reference (not reproduced here)"));
    return t;
}

std::optional<json> ReferenceTable::lookup(const std::string& key, Subject subject,
                                           int shots) const {
    if (rows_.is_null() || !rows_.contains(key)) return std::nullopt;
    const json& row = rows_.at(key);
    const std::string subj = to_string(subject);
    if (!row.contains(subj)) return std::nullopt;
    const json& cell = row.at(subj);
    const char* field = shots == 5 ? "few_shot" : "zero_shot";
    if (!cell.contains(field) || cell.at(field).is_null()) return std::nullopt;
    json out{{"accuracy", cell.at(field)}, {"note", note_}};
    if (row.contains("average")) out["average"] = row.at("average");
    return out;
}

std::string method_key(const RunConfig& cfg) {
    if (cfg.strategy == Strategy::RRMP) {
        return to_string(cfg.interaction.domain_mode) + "_" + to_string(cfg.interaction.style);
    }
    return to_string(cfg.strategy);
}

// ---------------------------------------------------------------------------
// Benchmark

namespace {

struct QuestionRun {
    std::vector<json> records;
    json summary;
};

long long sum_usage(const std::vector<json>& records, const char* field) {
    long long total = 0;
    for (const auto& r : records) {
        if (r.value("type", "") == "call") {
            total += r.at("response").at("usage").at(field).get<long long>();
        }
    }
    return total;
}

}  // namespace

json run_benchmark(const std::vector<Question>& dataset, const RunConfig& cfg0,
                   Backend& backend, const PromptLibrary& lib, std::ostream* transcript,
                   const ReferenceTable* reference) {
    const RunConfig cfg = validate_run_config(cfg0);
    const auto bench_start = std::chrono::steady_clock::now();

    std::vector<QuestionRun> runs(dataset.size());
    auto process = [&](size_t i) {
        const Question& q = dataset[i];
        QuestionRun& run = runs[i];
        RunConfig qcfg = cfg;
        qcfg.parallelism = 1;  // question-level fan-out only; avoid nested pools
        TranscriptSink sink = [&run](const json& r) { run.records.push_back(r); };

        const auto t0 = std::chrono::steady_clock::now();
        json record{{"question_id", q.id},
                    {"strategy", to_string(cfg.strategy)},
                    {"gold", q.gold ? json(std::string(1, *q.gold)) : json(nullptr)}};
        try {
            StrategyOutcome outcome = run_strategy(q, qcfg, backend, lib, sink);
            record["answer"] = outcome.decision.answer;
            record["correct"] =
                q.gold && !outcome.decision.answer.is_unparsed() &&
                outcome.decision.answer.value() == *q.gold;
            record["overruled_majority"] = outcome.decision.overruled_majority;
            record["summarizer_fallback"] = outcome.decision.summarizer_fallback;
            record["method"] = to_string(outcome.decision.method);
            json answers = json::array();
            for (const auto& [idx, ans] : outcome.decision.path_answers) {
                answers.push_back(json{{"path_index", idx}, {"answer", ans}});
            }
            record["path_answers"] = answers;
        } catch (const Error& e) {
            record["answer"] = AnswerLabel::unparsed();
            record["correct"] = false;
            record["overruled_majority"] = false;
            record["summarizer_fallback"] = false;
            record["method"] = nullptr;
            record["path_answers"] = json::array();
            record["error"] = std::string(e.what());
        }
        const auto t1 = std::chrono::steady_clock::now();
        record["prompt_tokens"] = sum_usage(run.records, "prompt_tokens");
        record["completion_tokens"] = sum_usage(run.records, "completion_tokens");
        record["wall_time_ms"] =
            std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count();
        run.summary = std::move(record);
    };

    if (cfg.parallelism > 1 && dataset.size() > 1) {
        std::atomic<size_t> next{0};
        auto worker = [&]() {
            for (size_t i; (i = next.fetch_add(1)) < dataset.size();) process(i);
        };
        size_t workers = std::min<size_t>(static_cast<size_t>(cfg.parallelism), dataset.size());
        std::vector<std::thread> pool;
        for (size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    } else {
        for (size_t i = 0; i < dataset.size(); ++i) process(i);
    }

    // Scoring is a separate pass over completed records.
    std::vector<std::pair<std::string, AnswerLabel>> predictions;
    std::vector<std::pair<std::string, char>> gold;
    for (size_t i = 0; i < dataset.size(); ++i) {
        if (!dataset[i].gold) continue;
        gold.emplace_back(dataset[i].id, *dataset[i].gold);
        predictions.emplace_back(dataset[i].id,
                                 runs[i].summary.at("answer").get<AnswerLabel>());
    }
    Accuracy acc = score_accuracy(predictions, gold);

    if (transcript != nullptr) {
        for (const auto& run : runs) {
            for (const auto& r : run.records) (*transcript) << r.dump() << '\n';
        }
    }

    json cfg_json = cfg;
    json report{{"subject", dataset.empty() ? to_string(Subject::Other)
                                            : to_string(dataset.front().subject)},
                {"strategy", to_string(cfg.strategy)},
                {"method_key", method_key(cfg)},
                {"shots", cfg.shots},
                {"config", cfg_json},
                {"config_hash", sha256_hex(cfg_json.dump())},
                {"n_questions", dataset.size()},
                {"n_scored", acc.total},
                {"n_correct", acc.matches},
                {"accuracy", acc.percent},
                {"unparsed_count", acc.unparsed_count},
                {"prompt_tokens", 0},
                {"completion_tokens", 0}};
    long long prompt_total = 0, completion_total = 0;
    json questions = json::array();
    for (const auto& run : runs) {
        prompt_total += run.summary.at("prompt_tokens").get<long long>();
        completion_total += run.summary.at("completion_tokens").get<long long>();
        questions.push_back(run.summary);
    }
    report["prompt_tokens"] = prompt_total;
    report["completion_tokens"] = completion_total;
    report["questions"] = std::move(questions);
    const auto bench_end = std::chrono::steady_clock::now();
    report["wall_time_ms"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(bench_end - bench_start).count();

    if (reference != nullptr && !dataset.empty()) {
        if (auto ref = reference->lookup(method_key(cfg), dataset.front().subject, cfg.shots)) {
            report["reference"] = *ref;
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Tables

namespace {

// Canonical row order for table emission; unknown keys sort after, alphabetically.
const std::vector<std::string> kMethodOrder{
    "standard",
    "cot",
    "thought",
    "self_consistency",
    "self_refine",
    "same_domain_collaboration",
    "same_domain_debate",
    "different_domain_collaboration",
    "different_domain_debate",
    "linear",
    "hierarchical",
    "network",
};

int method_rank(const std::string& key) {
    for (size_t i = 0; i < kMethodOrder.size(); ++i) {
        if (kMethodOrder[i] == key) return static_cast<int>(i);
    }
    return static_cast<int>(kMethodOrder.size());
}

std::string format_accuracy(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", value);
    return buf;
}

}  // namespace

TableOutput emit_table(const std::vector<json>& reports, bool group_datasets) {
    if (reports.empty()) throw Error("InconsistentReports", "no reports to tabulate");

    std::set<std::string> subjects;
    for (const auto& r : reports) subjects.insert(r.at("subject").get<std::string>());
    if (subjects.size() > 1 && !group_datasets) {
        throw Error("InconsistentReports",
                    "reports span multiple datasets; pass the grouping flag to combine them");
    }

    // Columns: (subject, shots) in deterministic order.
    std::vector<std::pair<std::string, int>> columns;
    for (const auto& r : reports) {
        std::pair<std::string, int> col{r.at("subject").get<std::string>(),
                                        r.at("shots").get<int>()};
        if (std::find(columns.begin(), columns.end(), col) == columns.end()) {
            columns.push_back(col);
        }
    }
    std::sort(columns.begin(), columns.end());

    // Rows: method keys in canonical order.
    std::vector<std::string> methods;
    for (const auto& r : reports) {
        std::string key = r.at("method_key").get<std::string>();
        if (std::find(methods.begin(), methods.end(), key) == methods.end()) {
            methods.push_back(key);
        }
    }
    std::sort(methods.begin(), methods.end(), [](const std::string& a, const std::string& b) {
        int ra = method_rank(a), rb = method_rank(b);
        return ra != rb ? ra < rb : a < b;
    });

    // cell lookup: (method, column) -> (accuracy, reference)
    std::map<std::pair<std::string, std::pair<std::string, int>>, std::pair<std::string, std::string>>
        cells;
    std::string reference_note;
    for (const auto& r : reports) {
        auto key = std::make_pair(
            r.at("method_key").get<std::string>(),
            std::make_pair(r.at("subject").get<std::string>(), r.at("shots").get<int>()));
        std::string acc = format_accuracy(r.at("accuracy").get<double>());
        std::string ref;
        if (r.contains("reference")) {
            ref = format_accuracy(r.at("reference").at("accuracy").get<double>());
            reference_note = r.at("reference").value("note", "");
        }
        cells[key] = {acc, ref};
    }

    auto column_title = [](const std::pair<std::string, int>& col) {
        return col.first + "/" + std::to_string(col.second) + "-shot";
    };

    // CSV
    std::string csv = "method";
    for (const auto& col : columns) {
        csv += "," + csv_escape(column_title(col));
        csv += "," + csv_escape(column_title(col) + "_ref");
    }
    csv += "\n";
    for (const auto& m : methods) {
        csv += csv_escape(m);
        for (const auto& col : columns) {
            auto it = cells.find({m, col});
            csv += ",";
            csv += it != cells.end() ? it->second.first : "";
            csv += ",";
            csv += it != cells.end() ? it->second.second : "";
        }
        csv += "\n";
    }

    // Aligned text
    std::vector<std::vector<std::string>> grid;
    std::vector<std::string> header{"method"};
    for (const auto& col : columns) header.push_back(column_title(col));
    grid.push_back(header);
    for (const auto& m : methods) {
        std::vector<std::string> line{m};
        for (const auto& col : columns) {
            auto it = cells.find({m, col});
            if (it == cells.end()) {
                line.push_back("-");
            } else if (!it->second.second.empty()) {
                line.push_back(it->second.first + " [ref " + it->second.second + "]");
            } else {
                line.push_back(it->second.first);
            }
        }
        grid.push_back(line);
    }
    std::vector<size_t> widths(grid.front().size(), 0);
    for (const auto& line : grid) {
        for (size_t c = 0; c < line.size(); ++c) widths[c] = std::max(widths[c], line[c].size());
    }
    std::string text;
    for (const auto& line : grid) {
        for (size_t c = 0; c < line.size(); ++c) {
            text += line[c];
            if (c + 1 < line.size()) {
                text.append(widths[c] - line[c].size() + 2, ' ');
            }
        }
        text += "\n";
    }
    if (!reference_note.empty()) {
        text += "[ref] = " + reference_note + "\n";
    }
    return TableOutput{std::move(text), std::move(csv)};
}

}  // namespace rrmp
