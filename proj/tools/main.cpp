// Command-line entry point: `run` executes a strategy over a dataset, `sim`
// runs the concentration simulator, `table` renders collected reports.
// Exit codes: 0 success, 1 infrastructure error, 2 config error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "rrmp/eval.hpp"
#include "rrmp/sim.hpp"

namespace fs = std::filesystem;
using namespace rrmp;

namespace {

#ifndef RRMP_DATA_DIR
#define RRMP_DATA_DIR "data"
#endif

int classify_error(const std::string& code) {
    static const std::set<std::string> infrastructure{
        "Timeout",        "AuthMissing",   "MalformedResponse", "ScriptExhausted",
        "ReplayMiss",     "AllPathsFailed", "InfrastructureError", "InternalError"};
    return infrastructure.count(code) ? 1 : 2;
}

std::vector<ScriptEntry> load_script_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("InfrastructureError", "cannot read script file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return json::parse(ss.str()).get<std::vector<ScriptEntry>>();
}

sim::UtilityKind parse_model_spec(const std::string& spec) {
    auto colon = spec.find(':');
    std::string kind = spec.substr(0, colon);
    std::string args = colon == std::string::npos ? "" : spec.substr(colon + 1);
    auto split = [](const std::string& s, char sep) {
        std::vector<std::string> out;
        std::string cur;
        for (char c : s) {
            if (c == sep) {
                out.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
        if (!cur.empty()) out.push_back(cur);
        return out;
    };
    try {
        if (kind == "bernoulli") {
            return sim::BernoulliUtility{std::stod(args)};
        }
        if (kind == "uniform") {
            auto parts = split(args, ',');
            if (parts.size() != 2) throw Error("InvalidUtilityModel", "uniform needs lo,hi");
            return sim::UniformUtility{std::stod(parts[0]), std::stod(parts[1])};
        }
        if (kind == "discrete") {
            sim::DiscreteDist d;
            for (const auto& pair : split(args, ',')) {
                auto eq = pair.find('=');
                if (eq == std::string::npos) {
                    throw Error("InvalidUtilityModel", "discrete needs value=prob pairs");
                }
                d.values.push_back(std::stod(pair.substr(0, eq)));
                d.probs.push_back(std::stod(pair.substr(eq + 1)));
            }
            return d;
        }
    } catch (const std::invalid_argument&) {
        throw Error("InvalidUtilityModel", "cannot parse numbers in model spec '" + spec + "'");
    }
    throw Error("InvalidUtilityModel",
                "unknown model spec '" + spec +
                    "' (expected bernoulli:P | uniform:LO,HI | discrete:V=P,...)");
}

struct RunArgs {
    std::string dataset;
    std::string subject = "other";
    std::string strategy = "rrmp";
    int paths = 2;
    int rounds = 2;
    int shots = 0;
    std::string interaction = "collab";
    std::string domains = "different";
    std::string instances = "multi";
    std::string backend = "scripted";
    std::string script;
    std::string cache;
    long long seed = 0;
    int parallel = 1;
    std::string out = "out";
    std::string endpoint;
    std::string model = "gpt-3.5-turbo";
    std::string api_key_env = "OPENAI_API_KEY";
    double temperature = 0.7;
    double summarizer_temperature = 0.0;
    double timeout = 60.0;
    int retries = 2;
    std::string data_dir = RRMP_DATA_DIR;
    bool has_header = false;
    int topology_agents = 3;
    int topology_branches = 2;
    int topology_branch_size = 2;
    int topology_rounds = 2;
};

int cmd_run(const RunArgs& a) {
    RunConfig cfg;
    cfg.strategy = strategy_from_string(a.strategy);
    cfg.n_paths = a.paths;
    cfg.max_reflection_rounds = a.rounds;
    cfg.shots = a.shots;
    if (a.interaction == "collab") {
        cfg.interaction.style = Style::Collaboration;
    } else if (a.interaction == "debate") {
        cfg.interaction.style = Style::Debate;
    } else {
        throw Error("ContradictoryConfig", "--interaction must be collab or debate");
    }
    if (a.domains == "same") {
        cfg.interaction.domain_mode = DomainMode::SameDomain;
    } else if (a.domains == "different") {
        cfg.interaction.domain_mode = DomainMode::DifferentDomain;
    } else {
        throw Error("ContradictoryConfig", "--domains must be same or different");
    }
    if (a.instances == "multi") {
        cfg.instance_mode = InstanceMode::MultiInstance;
    } else if (a.instances == "single") {
        cfg.instance_mode = InstanceMode::SingleInstance;
    } else {
        throw Error("ContradictoryConfig", "--instances must be multi or single");
    }
    cfg.seed = a.seed;
    cfg.parallelism = a.parallel;
    cfg.temperature_paths = a.temperature;
    cfg.temperature_summarizer = a.summarizer_temperature;
    cfg.topology = TopologySpec{a.topology_agents, a.topology_branches, a.topology_branch_size,
                                a.topology_rounds};

    cfg.backend.kind = backend_kind_from_string(a.backend);
    cfg.backend.model = a.model;
    cfg.backend.api_key_env = a.api_key_env;
    cfg.backend.timeout_seconds = a.timeout;
    cfg.backend.max_retries = a.retries;
    if (!a.endpoint.empty()) cfg.backend.endpoint_url = a.endpoint;
    if (!a.script.empty()) cfg.backend.script = load_script_file(a.script);
    if (!a.cache.empty()) cfg.backend.cache_path = a.cache;

    cfg = validate_run_config(cfg);
    if (cfg.normalized_warning) {
        std::cerr << "note: strategy-forced fields were normalized (n_paths="
                  << cfg.n_paths << ", rounds=" << cfg.max_reflection_rounds << ")\n";
    }

    Subject subject = subject_from_string(a.subject);
    auto questions = load_mmlu_csv(a.dataset, subject, a.has_header);
    auto lib = PromptLibrary::load(a.data_dir);
    auto reference = ReferenceTable::load(a.data_dir + "/reference_results.json");
    auto backend = make_backend(cfg.backend);

    fs::create_directories(a.out);
    std::ofstream transcript(fs::path(a.out) / "transcript.jsonl", std::ios::trunc);
    if (!transcript) {
        throw Error("InfrastructureError", "cannot write transcripts under '" + a.out + "'");
    }

    json report = run_benchmark(questions, cfg, *backend, lib, &transcript, &reference);

    std::ofstream report_out(fs::path(a.out) / "report.json", std::ios::trunc);
    if (!report_out) {
        throw Error("InfrastructureError", "cannot write report under '" + a.out + "'");
    }
    report_out << report.dump(2) << '\n';

    std::cout << "strategy=" << report.at("method_key").get<std::string>()
              << " questions=" << report.at("n_questions")
              << " accuracy=" << report.at("accuracy")
              << " unparsed=" << report.at("unparsed_count") << '\n';
    if (report.contains("reference")) {
        std::cout << "reference accuracy (" << report.at("reference").at("note").get<std::string>()
                  << "): " << report.at("reference").at("accuracy") << '\n';
    }
    std::cout << "report: " << (fs::path(a.out) / "report.json").string() << '\n';
    return 0;
}

int cmd_sim(const std::string& model_spec, const std::string& n_list, double t, long trials,
            long long seed, const std::string& out_dir, const std::string& aggregator,
            double epsilon) {
    sim::UtilityKind kind = parse_model_spec(model_spec);
    sim::Aggregator agg = sim::aggregator_from_string(aggregator);

    std::vector<long> ns;
    std::string cur;
    for (char c : n_list + ",") {
        if (c == ',') {
            if (!cur.empty()) ns.push_back(std::stol(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (ns.empty()) throw Error("InvalidValue", "--n-list is empty");

    fs::create_directories(out_dir);
    std::ofstream jsonl(fs::path(out_dir) / "sim_reports.jsonl", std::ios::trunc);
    std::ofstream csv(fs::path(out_dir) / "sim_summary.csv", std::ios::trunc);
    if (!jsonl || !csv) {
        throw Error("InfrastructureError", "cannot write under '" + out_dir + "'");
    }
    csv << "n,bound,empirical_freq\n";

    for (long n : ns) {
        auto model = sim::make_utility_model(kind, n, agg, epsilon);
        sim::SimReport report = sim::simulate_concentration(model, t, trials, seed);
        json j = report;
        jsonl << j.dump() << '\n';
        csv << report.n << ',' << report.bound << ',' << report.empirical_deviation_freq
            << '\n';
        std::cout << "n=" << report.n << " bound=" << report.bound
                  << " empirical=" << report.empirical_deviation_freq
                  << " mean_abs_dev=" << report.mean_abs_deviation << '\n';
    }
    std::cout << "reports: " << (fs::path(out_dir) / "sim_reports.jsonl").string() << '\n';
    return 0;
}

int cmd_table(const std::string& in_dir, const std::string& out_path, bool group) {
    std::vector<json> reports;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(in_dir)) {
        if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        std::ifstream in(file);
        std::stringstream ss;
        ss << in.rdbuf();
        json j = json::parse(ss.str(), nullptr, false);
        if (j.is_object() && j.contains("accuracy") && j.contains("method_key")) {
            reports.push_back(std::move(j));
        }
    }
    if (reports.empty()) {
        throw Error("InconsistentReports", "no benchmark reports found in '" + in_dir + "'");
    }

    TableOutput table = emit_table(reports, group);
    std::ofstream text(out_path, std::ios::trunc);
    std::ofstream csv(out_path + ".csv", std::ios::trunc);
    if (!text || !csv) {
        throw Error("InfrastructureError", "cannot write table to '" + out_path + "'");
    }
    text << table.text;
    csv << table.csv;
    std::cout << table.text;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-path reactive/reflection reasoning engine"};
    app.require_subcommand(1);

    RunArgs run_args;
    auto* run = app.add_subcommand("run", "Run a strategy over a multiple-choice dataset");
    run->add_option("--dataset", run_args.dataset, "CSV dataset path")->required();
    run->add_option("--subject", run_args.subject,
                    "moral_scenarios|college_physics|college_math|other");
    run->add_option("--strategy", run_args.strategy,
                    "standard|cot|self_consistency|self_refine|rrmp|linear|hierarchical|network");
    run->add_option("--paths", run_args.paths, "Number of reasoning paths");
    run->add_option("--rounds", run_args.rounds, "Max reflection rounds per path");
    run->add_option("--shots", run_args.shots, "0 or 5 worked exemplars");
    run->add_option("--interaction", run_args.interaction, "collab|debate");
    run->add_option("--domains", run_args.domains, "same|different");
    run->add_option("--instances", run_args.instances, "multi|single");
    run->add_option("--backend", run_args.backend, "http|scripted|replay");
    run->add_option("--script", run_args.script, "Scripted backend entries (JSON file)");
    run->add_option("--cache", run_args.cache, "Replay cache path (JSONL)");
    run->add_option("--seed", run_args.seed, "Run seed");
    run->add_option("--parallel", run_args.parallel, "Concurrent questions");
    run->add_option("--out", run_args.out, "Output directory");
    run->add_option("--endpoint", run_args.endpoint, "OpenAI-compatible base URL");
    run->add_option("--model", run_args.model, "Model identifier");
    run->add_option("--api-key-env", run_args.api_key_env, "Env var naming the API key");
    run->add_option("--temperature", run_args.temperature, "Path sampling temperature");
    run->add_option("--summarizer-temperature", run_args.summarizer_temperature,
                    "Summarizer temperature");
    run->add_option("--timeout", run_args.timeout, "HTTP timeout seconds");
    run->add_option("--retries", run_args.retries, "HTTP retry budget");
    run->add_option("--data-dir", run_args.data_dir, "Role/exemplar data directory");
    run->add_flag("--has-header", run_args.has_header, "Skip a CSV header row");
    run->add_option("--topology-agents", run_args.topology_agents, "Linear/network agent count");
    run->add_option("--topology-branches", run_args.topology_branches, "Hierarchical branches");
    run->add_option("--topology-branch-size", run_args.topology_branch_size,
                    "Agents per hierarchical branch");
    run->add_option("--topology-rounds", run_args.topology_rounds, "Network rounds");

    std::string sim_model = "bernoulli:0.5";
    std::string sim_n_list = "1,4,16,64,256";
    double sim_t = 0.1;
    long sim_trials = 100000;
    long long sim_seed = 0;
    std::string sim_out = "out";
    std::string sim_aggregator = "mean";
    double sim_epsilon = 0.01;
    auto* simulate = app.add_subcommand("sim", "Verify the concentration bound numerically");
    simulate->add_option("--model", sim_model, "bernoulli:P | uniform:LO,HI | discrete:V=P,...");
    simulate->add_option("--n-list", sim_n_list, "Comma-separated path counts");
    simulate->add_option("--t", sim_t, "Deviation threshold t > 0");
    simulate->add_option("--trials", sim_trials, "Monte Carlo replicates");
    simulate->add_option("--seed", sim_seed, "Generator seed");
    simulate->add_option("--out", sim_out, "Output directory");
    simulate->add_option("--aggregator", sim_aggregator, "mean|product");
    simulate->add_option("--epsilon", sim_epsilon, "Extra tolerance term");

    std::string table_in;
    std::string table_out = "table.txt";
    bool table_group = false;
    auto* table = app.add_subcommand("table", "Render collected reports as a table");
    table->add_option("--in", table_in, "Directory of report JSON files")->required();
    table->add_option("--out", table_out, "Output path (text; CSV written beside)");
    table->add_flag("--group", table_group, "Allow mixing datasets as columns");

    try {
        app.parse(argc, argv);
        if (run->parsed()) return cmd_run(run_args);
        if (simulate->parsed()) {
            return cmd_sim(sim_model, sim_n_list, sim_t, sim_trials, sim_seed, sim_out,
                           sim_aggregator, sim_epsilon);
        }
        if (table->parsed()) return cmd_table(table_in, table_out, table_group);
        return 2;
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return classify_error(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
