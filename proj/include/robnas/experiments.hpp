#pragma once

#include "robnas/benchstore.hpp"
#include "robnas/cellspace.hpp"
#include "robnas/config.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace robnas::experiments {

// Subcommands: space-report, correlate, search, bound, attack-demo, train-demo,
// ingest-check, weights-init, weights-inspect. Returns the machine-readable
// primary output; progress goes through the log sink.
std::string run_command(const std::string& name, const config::json& cfg);
std::vector<std::string> command_names();

struct SpaceReport {
    std::size_t total = 0;
    std::size_t classes = 0;
    std::map<std::size_t, std::size_t> size_histogram;  // class size -> number of classes
};

using Canonicalizer = std::function<std::string(const cellspace::Genotype&)>;
SpaceReport space_report(const Canonicalizer& canon);
std::string format_space_report(const SpaceReport& r, bool as_json);
// Throws validation unless the counts are 15625 and 6466.
void assert_space_report(const SpaceReport& r);

// One NTK-score per (architecture, variant label).
using ScoreFn = std::function<double(const cellspace::Genotype&, const std::string& variant)>;

struct CorrelationTable {
    std::vector<std::string> rows;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> values;  // NaN where undefined

    [[nodiscard]] std::string to_csv() const;
};

// Variant labels for the given radii: clean, robust_<r>..., twice_<r>...
std::vector<std::string> score_variants(const std::vector<double>& radii);
std::string radius_label(double radius);

CorrelationTable correlate_scores(const benchstore::BenchStore& store, benchstore::Dataset dataset,
                                  const std::vector<cellspace::Genotype>& subset,
                                  const std::vector<std::string>& variants, const std::vector<std::string>& metrics,
                                  const ScoreFn& score);
CorrelationTable correlate_metrics(const benchstore::BenchStore& store, benchstore::Dataset dataset,
                                   const std::vector<std::string>& metrics);

}  // namespace robnas::experiments
