#include "robnas/robnas.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

using json = nlohmann::json;

struct Options {
    std::string config_path;
    std::vector<std::string> sets;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> benchmark;
    std::optional<std::string> output_dir;
    std::optional<std::size_t> runs;
    std::optional<std::size_t> budget;
    std::optional<std::size_t> subset;
    std::vector<std::string> algorithms;
    bool as_json = false;
    bool assert_counts = false;
    bool quiet = false;
};

void log_to_stderr(robnas_log_level level, const char* message, void* user) {
    if (*static_cast<bool*>(user)) return;
    std::fprintf(stderr, "%s%s\n", level == ROBNAS_LOG_WARNING ? "warning: " : "", message);
}

json parse_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error&) {
        return text;
    }
}

// "a.b=1" sets cfg["a"]["b"] = 1; values parse as JSON when possible.
void apply_set(json& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw CLI::ValidationError("--set", "expected key=value: " + assignment);
    json* node = &cfg;
    std::string path = assignment.substr(0, eq);
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot - start);
        if (dot == std::string::npos) {
            (*node)[key] = parse_value(assignment.substr(eq + 1));
            break;
        }
        if (!node->contains(key) || !(*node)[key].is_object()) (*node)[key] = json::object();
        node = &(*node)[key];
        start = dot + 1;
    }
}

json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) {
        std::fprintf(stderr, "error: config file not found: %s\n", path.c_str());
        std::exit(ROBNAS_ERR_NOT_FOUND);
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        std::fprintf(stderr, "error: config %s is not valid JSON: %s\n", path.c_str(), e.what());
        std::exit(ROBNAS_ERR_USAGE);
    }
}

json merged_config(const std::string& command, const Options& o) {
    json cfg = load_config(o.config_path);
    if (!cfg.is_object()) {
        std::fprintf(stderr, "error: config must be a JSON object\n");
        std::exit(ROBNAS_ERR_USAGE);
    }
    if (o.seed) cfg["seed"] = *o.seed;
    if (o.benchmark) cfg["benchmark"] = *o.benchmark;
    if (o.output_dir) cfg["output_dir"] = *o.output_dir;
    if (o.runs) cfg["runs"] = *o.runs;
    if (o.budget) cfg["budget"] = *o.budget;
    if (o.subset) cfg["subset"] = *o.subset;
    if (!o.algorithms.empty()) cfg["algorithms"] = o.algorithms;
    if (command == "space-report") {
        if (o.as_json) cfg["format"] = "json";
        if (o.assert_counts) cfg["assert"] = true;
    }
    for (const auto& s : o.sets) apply_set(cfg, s);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Train-free robust architecture search toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(robnas_version()));

    Options o;
    std::map<std::string, CLI::App*> subs;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"space-report", "Enumerate the cell space and report canonical class counts"},
        {"correlate", "Spearman correlation of NTK scores (or metrics) against benchmark metrics"},
        {"search", "Run query-budgeted searches and print the aggregate table"},
        {"bound", "Evaluate generalization bound terms"},
        {"attack-demo", "Clean and attacked accuracy of an initialized network"},
        {"train-demo", "Multi-objective training on a synthetic teacher task"},
        {"ingest-check", "Validate a benchmark file and report counts"},
        {"weights-init", "Initialize a network and write its weights"},
        {"weights-inspect", "Describe a weights file"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("-c,--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
        sub->add_option("--set", o.sets, "Override a config value, key.sub=value");
        sub->add_option("--seed", o.seed, "Global seed");
        sub->add_option("-o,--output-dir", o.output_dir, "Artifact directory");
        sub->add_flag("-q,--quiet", o.quiet, "Suppress progress on stderr");
        subs[name] = sub;
    }
    for (const char* name : {"correlate", "search", "ingest-check"})
        subs[name]->add_option("-b,--benchmark", o.benchmark, "Benchmark file (default: $ROBNAS_DATA)");
    subs["space-report"]->add_flag("--json", o.as_json, "JSON output");
    subs["space-report"]->add_flag("--assert", o.assert_counts, "Exit nonzero unless counts are 15625/6466");
    subs["search"]->add_option("--runs", o.runs, "Independent runs");
    subs["search"]->add_option("--budget", o.budget, "Queries per run");
    subs["search"]->add_option("--algorithm", o.algorithms, "random_search, regularized_evolution, local_search");
    subs["correlate"]->add_option("--subset", o.subset, "Number of architectures to score");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return ROBNAS_ERR_USAGE;
    }

    std::string command;
    for (const auto& [name, sub] : subs)
        if (sub->parsed()) command = name;

    json cfg;
    try {
        cfg = merged_config(command, o);
    } catch (const CLI::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return ROBNAS_ERR_USAGE;
    }

    robnas_set_log_callback(log_to_stderr, &o.quiet);
    char* output = nullptr;
    const robnas_status status = robnas_run_command(command.c_str(), cfg.dump().c_str(), &output);
    if (status != ROBNAS_OK) {
        std::fprintf(stderr, "error: %s\n", robnas_last_error());
        return static_cast<int>(status);
    }
    std::fputs(output, stdout);
    robnas_string_free(output);
    return 0;
}
