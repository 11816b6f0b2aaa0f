#include "robnas/experiments.hpp"

#include "robnas/adversary.hpp"
#include "robnas/error.hpp"
#include "robnas/kernels.hpp"
#include "robnas/log.hpp"
#include "robnas/objective.hpp"
#include "robnas/searchers.hpp"
#include "robnas/serialization.hpp"
#include "robnas/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <numeric>
#include <sstream>

namespace robnas::experiments {

using benchstore::BenchStore;
using benchstore::Dataset;
using cellspace::Genotype;
using config::json;

namespace {

constexpr std::size_t kExpectedClasses = 6466;

void info(const std::string& msg) { log_message(LogLevel::info, msg); }

std::string fmt(double v) {
    if (!std::isfinite(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

template <class T>
T get_or(const json& cfg, const char* key, T fallback) {
    try {
        return cfg.value(key, fallback);
    } catch (const json::exception& e) {
        fail(ErrorKind::validation, std::string("config key \"") + key + "\": " + e.what());
    }
}

void write_artifact(const json& cfg, const std::string& name, const std::string& content) {
    if (!cfg.contains("output_dir")) return;
    const std::filesystem::path dir = cfg.at("output_dir").get<std::string>();
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorKind::validation, "cannot create output directory " + dir.string());
    serialization::write_file((dir / name).string(), content);
    info("wrote " + (dir / name).string());
}

std::optional<std::string> benchmark_path(const json& cfg) {
    if (cfg.contains("benchmark")) return cfg.at("benchmark").get<std::string>();
    if (const char* env = std::getenv("ROBNAS_DATA"); env && *env) return std::string(env);
    return std::nullopt;
}

benchstore::Format benchmark_format(const json& cfg, const std::string& path) {
    if (cfg.contains("benchmark_format")) return benchstore::parse_format(cfg.at("benchmark_format").get<std::string>());
    return path.ends_with(".csv") ? benchstore::Format::csv : benchstore::Format::jsonl;
}

struct LoadedStore {
    BenchStore store;
    Dataset dataset = Dataset::synthetic;
};

LoadedStore load_store(const json& cfg) {
    LoadedStore out;
    if (auto path = benchmark_path(cfg)) {
        info("loading benchmark " + *path);
        out.store = benchstore::ingest(*path, benchmark_format(cfg, *path));
        out.dataset = Dataset::cifar10;
    } else {
        const auto landscape = benchstore::parse_landscape(get_or<std::string>(cfg, "landscape", "unimodal_conv_count"));
        const auto seed = get_or<std::uint64_t>(cfg, "synth_seed", 0);
        info("no benchmark file; synthesizing a store");
        out.store = benchstore::synthesize_benchmark(seed, landscape);
        out.dataset = Dataset::synthetic;
    }
    if (cfg.contains("dataset")) out.dataset = benchstore::parse_dataset(cfg.at("dataset").get<std::string>());
    return out;
}

std::vector<std::string> metric_list(const json& cfg) {
    if (cfg.contains("metrics")) return cfg.at("metrics").get<std::vector<std::string>>();
    return {benchstore::kCoreMetrics.begin(), benchstore::kCoreMetrics.end()};
}

std::vector<Vec> uniform_inputs(std::size_t n, std::size_t dim, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Vec> xs(n, Vec(static_cast<Eigen::Index>(dim)));
    for (auto& x : xs)
        for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = u(rng);
    return xs;
}

// ---------------------------------------------------------------- space-report

std::string cmd_space_report(const json& cfg) {
    config::require_known_keys(cfg, {"format", "assert"}, "space-report");
    const auto format = get_or<std::string>(cfg, "format", "text");
    if (format != "text" && format != "json") fail(ErrorKind::usage, "space-report format must be text or json");
    const SpaceReport r = space_report([](const Genotype& g) { return cellspace::canonicalize(g).canonical_form; });
    if (get_or<bool>(cfg, "assert", false)) assert_space_report(r);
    return format_space_report(r, format == "json");
}

// ------------------------------------------------------------------- correlate

struct ScoreSetup {
    netcore::NetworkSpec spec;
    std::vector<Vec> inputs;
    std::vector<int> labels;
    std::uint64_t init_seed = 0;
    std::vector<double> radii;
    int attack_steps = 20;
    kernels::ScoreAggregate aggregate = kernels::ScoreAggregate::frobenius;
};

std::map<std::string, double> all_scores(const ScoreSetup& s, const Genotype& g) {
    netcore::NetworkSpec spec = s.spec;
    spec.genotype = g;
    const auto w = netcore::init_weights(spec, s.init_seed);
    auto score_of = [&](const std::vector<Vec>& xs) {
        const Mat j = kernels::jacobian(spec, w, xs);
        return kernels::gram_score(j * j.transpose(), s.aggregate);
    };
    std::map<std::string, double> out;
    out["clean"] = score_of(s.inputs);
    for (double r : s.radii) {
        auto adv = adversary::AdversaryConfig::evaluation_pgd(r);
        adv.steps = s.attack_steps;
        adv.step_size = 2.5 * r / s.attack_steps;
        std::vector<Vec> once, twice;
        for (std::size_t i = 0; i < s.inputs.size(); ++i) {
            once.push_back(adversary::pgd(s.inputs[i], s.labels[i], spec, w, adv));
            twice.push_back(adversary::pgd(once.back(), s.labels[i], spec, w, adv));
        }
        out["robust_" + radius_label(r)] = score_of(once);
        out["twice_" + radius_label(r)] = score_of(twice);
    }
    return out;
}

std::string cmd_correlate(const json& cfg) {
    config::require_known_keys(cfg,
                               {"benchmark", "benchmark_format", "dataset", "landscape", "synth_seed", "table",
                                "subset", "seed", "network", "samples", "radii", "aggregate", "metrics",
                                "attack_steps", "output_dir"},
                               "correlate");
    const LoadedStore ls = load_store(cfg);
    const auto metrics = metric_list(cfg);
    const auto table = get_or<std::string>(cfg, "table", "ntk");
    if (table == "metrics") return correlate_metrics(ls.store, ls.dataset, metrics).to_csv();
    if (table != "ntk") fail(ErrorKind::usage, "correlate table must be ntk or metrics");

    const auto seed = get_or<std::uint64_t>(cfg, "seed", 0);
    ScoreSetup s;
    json net = cfg.value("network", json::object());
    if (!net.contains("family")) net["family"] = "cell_network";
    if (!net.contains("cell_count")) net["cell_count"] = 1;
    if (!net.contains("stem_channels")) net["stem_channels"] = 4;
    s.spec = config::spec_from_json(net);
    s.radii = get_or<std::vector<double>>(cfg, "radii", {3.0 / 255.0, 8.0 / 255.0});
    s.attack_steps = get_or<int>(cfg, "attack_steps", 20);
    if (s.attack_steps < 1) fail(ErrorKind::validation, "attack_steps must be >= 1");
    const auto agg = get_or<std::string>(cfg, "aggregate", "frobenius");
    if (agg == "trace") s.aggregate = kernels::ScoreAggregate::trace;
    else if (agg != "frobenius") fail(ErrorKind::validation, "aggregate must be frobenius or trace");
    const auto samples = get_or<std::size_t>(cfg, "samples", 8);
    Rng data_rng = make_rng(seed, "experiments.correlate.data");
    s.inputs = uniform_inputs(samples, s.spec.input_size(), data_rng);
    const bool binary = netcore::is_binary(s.spec);
    std::uniform_int_distribution<int> cls(0, binary ? 1 : static_cast<int>(s.spec.output_size()) - 1);
    for (std::size_t i = 0; i < samples; ++i) {
        const int c = cls(data_rng);
        s.labels.push_back(binary ? 2 * c - 1 : c);
    }
    s.init_seed = substream_seed(seed, "experiments.correlate.init");

    auto classes = ls.store.classes(ls.dataset);
    const auto subset_size = std::min<std::size_t>(get_or<std::size_t>(cfg, "subset", 500), classes.size());
    Rng pick_rng = make_rng(seed, "experiments.correlate.subset");
    for (std::size_t i = 0; i < subset_size; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, classes.size() - 1);
        std::swap(classes[i], classes[pick(pick_rng)]);
    }
    classes.resize(subset_size);
    std::sort(classes.begin(), classes.end());
    std::vector<Genotype> subset;
    for (auto c : classes) subset.push_back(ls.store.stored_genotype(c, ls.dataset));

    std::map<std::size_t, std::map<std::string, double>> cache;
    std::size_t done = 0;
    const ScoreFn score = [&](const Genotype& g, const std::string& variant) {
        auto it = cache.find(g.index());
        if (it == cache.end()) {
            it = cache.emplace(g.index(), all_scores(s, g)).first;
            if (++done % 25 == 0) info("scored " + std::to_string(done) + "/" + std::to_string(subset.size()));
        }
        return it->second.at(variant);
    };
    const auto variants = score_variants(s.radii);
    const CorrelationTable t = correlate_scores(ls.store, ls.dataset, subset, variants, metrics, score);

    std::ostringstream scores;
    scores << "genotype";
    for (const auto& v : variants) scores << ',' << v;
    scores << '\n';
    for (const auto& g : subset) {
        scores << cellspace::format_genotype(g);
        for (const auto& v : variants) scores << ',' << score(g, v);
        scores << '\n';
    }
    write_artifact(cfg, "scores.csv", scores.str());
    write_artifact(cfg, "correlation.csv", t.to_csv());
    return t.to_csv();
}

// ---------------------------------------------------------------------- search

std::string cmd_search(const json& cfg) {
    config::require_known_keys(cfg,
                               {"benchmark", "benchmark_format", "dataset", "landscape", "synth_seed", "algorithms",
                                "objectives", "budget", "runs", "seed", "population_size", "sample_size",
                                "include_optimal", "output_dir"},
                               "search");
    const LoadedStore ls = load_store(cfg);
    searchers::SearchConfig base;
    base.dataset = ls.dataset;
    base.budget = get_or<std::size_t>(cfg, "budget", base.budget);
    base.runs = get_or<std::size_t>(cfg, "runs", base.runs);
    base.seed = get_or<std::uint64_t>(cfg, "seed", base.seed);
    base.population_size = get_or<std::size_t>(cfg, "population_size", base.population_size);
    base.sample_size = get_or<std::size_t>(cfg, "sample_size", base.sample_size);
    const auto algorithms = get_or<std::vector<std::string>>(
        cfg, "algorithms", {"random_search", "regularized_evolution", "local_search"});
    const auto objectives = get_or<std::vector<std::string>>(cfg, "objectives", {"clean"});

    std::string out = searchers::table_csv_header();
    std::ostringstream runs_csv;
    runs_csv << "algorithm,objective,run,queries,best_genotype,best_value\n";
    for (const auto& objective : objectives) {
        for (const auto& name : algorithms) {
            searchers::SearchConfig c = base;
            c.algorithm = searchers::parse_algorithm(name);
            c.objective_metric = objective;
            info("search " + name + " on " + objective + ": " + std::to_string(c.runs) + " runs x " +
                 std::to_string(c.budget) + " queries");
            const auto rep = searchers::run_many(ls.store, c);
            out += searchers::table_csv_row(name, objective, rep.mean_metrics);
            for (std::size_t r = 0; r < rep.results.size(); ++r) {
                const auto& res = rep.results[r];
                runs_csv << name << ',' << objective << ',' << r << ',' << res.queries_used << ','
                         << cellspace::format_genotype(res.best) << ',' << fmt(res.best_value) << '\n';
            }
        }
    }
    if (get_or<bool>(cfg, "include_optimal", true)) {
        const auto opt = searchers::exhaustive_argmax(ls.store, ls.dataset, benchstore::kRobustMean);
        out += searchers::table_csv_row("optimal", std::string(benchstore::kRobustMean), opt.metrics);
    }
    write_artifact(cfg, "table.csv", out);
    write_artifact(cfg, "runs.csv", runs_csv.str());
    return out;
}

// ----------------------------------------------------------------------- bound

std::string cmd_bound(const json& cfg) {
    config::require_known_keys(cfg,
                               {"source", "kernels", "labels", "n", "depth", "delta", "seed", "network", "radius",
                                "beta", "steps", "output_dir"},
                               "bound");
    const auto source = get_or<std::string>(cfg, "source", "identity");
    const double delta = get_or<double>(cfg, "delta", 0.05);
    const auto seed = get_or<std::uint64_t>(cfg, "seed", 0);
    kernels::Matrix k_all, k_tilde;
    Vec y;
    int depth = get_or<int>(cfg, "depth", 3);
    json extra = json::object();

    auto labels_from_cfg = [&](std::size_t n) {
        Vec out(static_cast<Eigen::Index>(n));
        if (cfg.contains("labels")) {
            const auto ls = cfg.at("labels").get<std::vector<double>>();
            if (ls.size() != n) fail(ErrorKind::validation, "labels length does not match the kernel size");
            for (std::size_t i = 0; i < n; ++i) out(static_cast<Eigen::Index>(i)) = ls[i];
        } else {
            for (std::size_t i = 0; i < n; ++i) out(static_cast<Eigen::Index>(i)) = i % 2 == 0 ? 1.0 : -1.0;
        }
        return out;
    };

    if (source == "identity") {
        const auto n = get_or<std::size_t>(cfg, "n", 16);
        if (n == 0) fail(ErrorKind::validation, "n must be >= 1");
        k_all = kernels::Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        k_tilde = k_all;
        y = labels_from_cfg(n);
    } else if (source == "file") {
        if (!cfg.contains("kernels")) fail(ErrorKind::usage, "bound source=file needs \"kernels\"");
        const auto ks = serialization::decode_kernels(serialization::read_file(cfg.at("kernels").get<std::string>()));
        k_all = kernels::assemble_clean_kernel(ks);
        k_tilde = kernels::assemble_robust_kernel(ks);
        if (!cfg.contains("labels")) fail(ErrorKind::usage, "bound source=file needs \"labels\"");
        y = labels_from_cfg(static_cast<std::size_t>(k_all.rows()));
    } else if (source == "network") {
        json net = cfg.value("network", json{{"family", "residual_fcnn"}, {"depth", 2}, {"width", 1024}, {"input_dim", 16}});
        const auto spec = config::spec_from_json(net);
        depth = get_or<int>(cfg, "depth", spec.depth);
        const auto n = get_or<std::size_t>(cfg, "n", 8);
        const double radius = get_or<double>(cfg, "radius", 0.05);
        const double beta = get_or<double>(cfg, "beta", 0.5);
        Rng rng = make_rng(seed, "experiments.bound.data");
        std::normal_distribution<double> g(0.0, 1.0);
        std::vector<Vec> xs;
        std::vector<int> labels;
        for (std::size_t i = 0; i < n; ++i) {
            Vec x(static_cast<Eigen::Index>(spec.input_size()));
            for (Eigen::Index k = 0; k < x.size(); ++k) x(k) = g(rng);
            xs.push_back(adversary::normalize_input(x));
            labels.push_back(g(rng) >= 0.0 ? 1 : -1);
        }
        adversary::AdversaryConfig adv;
        adv.kind = adversary::AttackKind::pgd;
        adv.norm = adversary::Norm::l2_sphere;
        adv.radius = radius;
        adv.steps = get_or<int>(cfg, "steps", 10);
        adv.step_size = radius / 4.0;
        const auto ks = kernels::build_kernel_set(xs, labels, spec, substream_seed(seed, "experiments.bound.init"), adv, beta);
        k_all = kernels::assemble_clean_kernel(ks);
        k_tilde = kernels::assemble_robust_kernel(ks);
        y = Vec(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < n; ++i) y(static_cast<Eigen::Index>(i)) = labels[i];
        if (radius < 1.0) {
            const auto lb = kernels::lambda_min_lower_bound(xs, radius, spec.activation(1));
            extra["lower_bound"] = {{"value", lb.value}, {"overlap", lb.overlap}, {"r", lb.r}, {"mu_r", lb.mu_r}};
            extra["lambda_min_robust_ntk"] = kernels::lambda_min_exact(ks.robust);
        }
        write_artifact(cfg, "kernels.rbns", serialization::encode_kernels(ks));
    } else {
        fail(ErrorKind::usage, "bound source must be identity, file or network");
    }
    const auto report = kernels::generalization_bound_terms(k_all, k_tilde, y, depth, delta);
    json out = json::parse(report.to_json());
    out["source"] = source;
    out["n"] = y.size();
    out["depth"] = depth;
    out["delta"] = delta;
    for (auto& [k, v] : extra.items()) out[k] = v;
    const std::string text = out.dump(2) + "\n";
    write_artifact(cfg, "bound.json", text);
    return text;
}

// ----------------------------------------------------------------- attack-demo

json default_fcnn() { return json{{"family", "residual_fcnn"}, {"depth", 3}, {"width", 64}, {"input_dim", 16}}; }

std::string cmd_attack_demo(const json& cfg) {
    config::require_known_keys(cfg, {"network", "attack", "n", "seed", "output_dir"}, "attack-demo");
    const auto spec = config::spec_from_json(cfg.value("network", default_fcnn()));
    const auto adv = config::adversary_from_json(cfg.value("attack", json{{"preset", "eval_pgd"}}));
    const auto n = get_or<std::size_t>(cfg, "n", 64);
    const auto seed = get_or<std::uint64_t>(cfg, "seed", 0);
    const auto w = netcore::init_weights(spec, substream_seed(seed, "experiments.attack.init"));
    Rng rng = make_rng(seed, "experiments.attack.data");
    std::vector<objective::LabeledSample> data;
    // Labels are the network's own clean predictions.
    for (auto& x : uniform_inputs(n, spec.input_size(), rng)) {
        const int label = netcore::predict_class(spec, w, x);
        data.push_back({x, label});
    }
    const double clean = objective::evaluate_accuracy(spec, w, data);
    const double robust = objective::evaluate_accuracy(spec, w, data, adv);
    json out{{"schema", "robnas.attack_demo.v1"},
             {"n", n},
             {"attack", config::to_json(adv)},
             {"clean_accuracy", clean},
             {"robust_accuracy", robust}};
    const std::string text = out.dump(2) + "\n";
    write_artifact(cfg, "attack_demo.json", text);
    return text;
}

// ------------------------------------------------------------------ train-demo

std::string cmd_train_demo(const json& cfg) {
    config::require_known_keys(cfg, {"network", "train", "n_train", "n_eval", "seed", "eval_attack", "output_dir"},
                               "train-demo");
    const auto spec = config::spec_from_json(cfg.value("network", default_fcnn()));
    if (!netcore::is_binary(spec)) fail(ErrorKind::validation, "train-demo uses a binary teacher; pick a binary family");
    json train_cfg = cfg.value("train", json::object());
    if (!train_cfg.contains("iterations")) train_cfg["iterations"] = 2000;
    auto tc = config::train_from_json(train_cfg);
    const auto seed = get_or<std::uint64_t>(cfg, "seed", 0);
    if (!cfg.contains("train") || !cfg.at("train").contains("seed")) tc.seed = substream_seed(seed, "experiments.train");
    const auto eval_adv = config::adversary_from_json(cfg.value("eval_attack", json{{"preset", "eval_pgd"}}));
    const auto n_train = get_or<std::size_t>(cfg, "n_train", 256);
    const auto n_eval = get_or<std::size_t>(cfg, "n_eval", 128);
    const auto d = static_cast<Eigen::Index>(spec.input_size());

    Rng teacher_rng = make_rng(seed, "experiments.train.teacher");
    std::normal_distribution<double> g(0.0, 1.0);
    Vec teacher(d);
    for (Eigen::Index i = 0; i < d; ++i) teacher(i) = g(teacher_rng);
    auto draw = [&](Rng& rng) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        Vec x(d);
        for (Eigen::Index i = 0; i < d; ++i) x(i) = u(rng);
        const double s = teacher.dot((x.array() - 0.5).matrix());
        return objective::LabeledSample{x, s >= 0.0 ? 1 : -1};
    };
    Rng data_rng = make_rng(seed, "experiments.train.data");
    std::vector<objective::LabeledSample> train, eval;
    for (std::size_t i = 0; i < n_train; ++i) train.push_back(draw(data_rng));
    for (std::size_t i = 0; i < n_eval; ++i) eval.push_back(draw(data_rng));
    const auto w0 = netcore::init_weights(spec, substream_seed(seed, "experiments.train.init"));

    json out{{"schema", "robnas.train_demo.v1"}};
    netcore::WeightSet w;
    if (tc.mode == objective::TrainMode::algorithm1_online) {
        const objective::SampleStream stream = [&](Rng& rng) { return draw(rng); };
        const auto res = objective::sgd_multiobjective(stream, spec, w0, tc);
        w = res.selected;
        out["mode"] = "algorithm1_online";
        out["selected_index"] = res.selected_index;
        out["iterations"] = tc.iterations;
    } else {
        const auto res = objective::train_recipe(train, spec, w0, tc);
        w = res.weights;
        out["mode"] = "minibatch_recipe";
        out["epochs"] = res.history.size();
        write_artifact(cfg, "history.csv", objective::history_csv(res.history));
    }
    out["beta"] = tc.beta;
    out["clean_accuracy"] = objective::evaluate_accuracy(spec, w, eval);
    out["robust_accuracy"] = objective::evaluate_accuracy(spec, w, eval, eval_adv);
    out["initial_clean_accuracy"] = objective::evaluate_accuracy(spec, w0, eval);
    write_artifact(cfg, "weights.rbns", serialization::encode_weights(spec, w));
    const std::string text = out.dump(2) + "\n";
    write_artifact(cfg, "train_demo.json", text);
    return text;
}

// ---------------------------------------------------------------- ingest-check

std::string cmd_ingest_check(const json& cfg) {
    config::require_known_keys(cfg, {"benchmark", "benchmark_format"}, "ingest-check");
    const auto path = benchmark_path(cfg);
    if (!path) fail(ErrorKind::not_found, "no benchmark given (set \"benchmark\" or ROBNAS_DATA)");
    benchstore::IngestReport rep;
    benchstore::ingest(*path, benchmark_format(cfg, *path), &rep);
    json out{{"schema", "robnas.ingest_report.v1"},
             {"records", rep.records},
             {"classes", rep.classes},
             {"per_dataset", rep.per_dataset}};
    return out.dump(2) + "\n";
}

// --------------------------------------------------------------------- weights

std::string cmd_weights_init(const json& cfg) {
    config::require_known_keys(cfg, {"network", "seed", "output"}, "weights-init");
    if (!cfg.contains("output")) fail(ErrorKind::usage, "weights-init needs \"output\"");
    const auto spec = config::spec_from_json(cfg.value("network", default_fcnn()));
    const auto w = netcore::init_weights(spec, get_or<std::uint64_t>(cfg, "seed", 0));
    const auto path = cfg.at("output").get<std::string>();
    serialization::write_file(path, serialization::encode_weights(spec, w));
    json out{{"schema", "robnas.weights.v1"}, {"path", path}, {"parameter_count", w.parameter_count()}};
    return out.dump(2) + "\n";
}

std::string cmd_weights_inspect(const json& cfg) {
    config::require_known_keys(cfg, {"path"}, "weights-inspect");
    if (!cfg.contains("path")) fail(ErrorKind::usage, "weights-inspect needs \"path\"");
    const auto [spec, w] = serialization::decode_weights(serialization::read_file(cfg.at("path").get<std::string>()));
    json shapes = json::array();
    for (const auto& m : w.layers) shapes.push_back({m.rows(), m.cols()});
    json out{{"schema", "robnas.weights.v1"},
             {"network", config::to_json(spec)},
             {"seed", w.seed},
             {"parameter_count", w.parameter_count()},
             {"layers", shapes}};
    return out.dump(2) + "\n";
}

}  // namespace

std::vector<std::string> command_names() {
    return {"space-report", "correlate",    "search",       "bound",          "attack-demo",
            "train-demo",   "ingest-check", "weights-init", "weights-inspect"};
}

std::string run_command(const std::string& name, const json& cfg) {
    if (!cfg.is_object()) fail(ErrorKind::usage, "config must be a JSON object");
    if (name == "space-report") return cmd_space_report(cfg);
    if (name == "correlate") return cmd_correlate(cfg);
    if (name == "search") return cmd_search(cfg);
    if (name == "bound") return cmd_bound(cfg);
    if (name == "attack-demo") return cmd_attack_demo(cfg);
    if (name == "train-demo") return cmd_train_demo(cfg);
    if (name == "ingest-check") return cmd_ingest_check(cfg);
    if (name == "weights-init") return cmd_weights_init(cfg);
    if (name == "weights-inspect") return cmd_weights_inspect(cfg);
    fail(ErrorKind::usage, "unknown subcommand: " + name);
}

SpaceReport space_report(const Canonicalizer& canon) {
    std::map<std::string, std::size_t> classes;
    SpaceReport r;
    for (const Genotype& g : cellspace::enumerate_genotypes()) {
        ++classes[canon(g)];
        ++r.total;
    }
    r.classes = classes.size();
    for (const auto& [form, size] : classes) ++r.size_histogram[size];
    return r;
}

std::string format_space_report(const SpaceReport& r, bool as_json) {
    if (as_json) {
        json hist = json::object();
        for (const auto& [size, count] : r.size_histogram) hist[std::to_string(size)] = count;
        json out{{"schema", "robnas.space_report.v1"}, {"total", r.total}, {"classes", r.classes}, {"class_sizes", hist}};
        return out.dump(2) + "\n";
    }
    std::ostringstream os;
    os << "total=" << r.total << " classes=" << r.classes << '\n';
    for (const auto& [size, count] : r.size_histogram) os << "class_size=" << size << " count=" << count << '\n';
    return os.str();
}

void assert_space_report(const SpaceReport& r) {
    if (r.total != cellspace::kSpaceSize || r.classes != kExpectedClasses)
        fail(ErrorKind::validation, "space census mismatch: total=" + std::to_string(r.total) +
                                        " classes=" + std::to_string(r.classes) + " (expected 15625 and 6466)");
}

std::string CorrelationTable::to_csv() const {
    std::ostringstream os;
    os << "row";
    for (const auto& c : columns) os << ',' << c;
    os << '\n';
    for (std::size_t i = 0; i < rows.size(); ++i) {
        os << rows[i];
        for (double v : values[i]) os << ',' << fmt(v);
        os << '\n';
    }
    return os.str();
}

std::string radius_label(double radius) {
    const double k = radius * 255.0;
    char buf[32];
    if (std::abs(k - std::round(k)) < 1e-9) std::snprintf(buf, sizeof buf, "%d_255", static_cast<int>(std::round(k)));
    else std::snprintf(buf, sizeof buf, "%.6g", radius);
    return buf;
}

std::vector<std::string> score_variants(const std::vector<double>& radii) {
    std::vector<std::string> out{"clean"};
    for (double r : radii) out.push_back("robust_" + radius_label(r));
    for (double r : radii) out.push_back("twice_" + radius_label(r));
    return out;
}

namespace {

double safe_spearman(const std::vector<double>& a, const std::vector<double>& b) {
    try {
        return benchstore::spearman(a, b);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::numerical) throw;
        return std::numeric_limits<double>::quiet_NaN();
    }
}

}  // namespace

CorrelationTable correlate_scores(const BenchStore& store, Dataset dataset, const std::vector<Genotype>& subset,
                                  const std::vector<std::string>& variants, const std::vector<std::string>& metrics,
                                  const ScoreFn& score) {
    CorrelationTable t;
    t.rows = variants;
    t.columns = metrics;
    std::vector<std::vector<double>> metric_values(metrics.size());
    for (std::size_t m = 0; m < metrics.size(); ++m)
        for (const auto& g : subset) metric_values[m].push_back(store.lookup(g, dataset, metrics[m]).mean);
    for (const auto& v : variants) {
        std::vector<double> s;
        for (const auto& g : subset) s.push_back(score(g, v));
        std::vector<double> row;
        for (const auto& mv : metric_values) row.push_back(safe_spearman(s, mv));
        t.values.push_back(std::move(row));
    }
    return t;
}

CorrelationTable correlate_metrics(const BenchStore& store, Dataset dataset, const std::vector<std::string>& metrics) {
    CorrelationTable t;
    t.rows = metrics;
    t.columns = metrics;
    std::vector<std::vector<double>> values(metrics.size());
    for (std::uint32_t cls : store.classes(dataset)) {
        const Genotype g = store.stored_genotype(cls, dataset);
        for (std::size_t m = 0; m < metrics.size(); ++m) values[m].push_back(store.lookup(g, dataset, metrics[m]).mean);
    }
    for (std::size_t i = 0; i < metrics.size(); ++i) {
        std::vector<double> row;
        for (std::size_t j = 0; j < metrics.size(); ++j) row.push_back(safe_spearman(values[i], values[j]));
        t.values.push_back(std::move(row));
    }
    return t;
}

}  // namespace robnas::experiments
