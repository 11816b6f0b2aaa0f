#pragma once

#include "robnas/cellspace.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace robnas::benchstore {

enum class Dataset { cifar10, cifar100, imagenet16_120, synthetic };

std::string dataset_name(Dataset d);
Dataset parse_dataset(std::string_view text);

// Table column order: clean, FGSM 3/255, PGD 3/255, FGSM 8/255, PGD 8/255.
inline const std::array<std::string, 5> kCoreMetrics{"clean", "fgsm_3_255", "pgd_3_255", "fgsm_8_255", "pgd_8_255"};
// Derived metric: mean of the four adversarial columns.
inline constexpr std::string_view kRobustMean = "robust_mean";

struct BenchRecord {
    std::string genotype;  // NAS-Bench-201 string
    Dataset dataset = Dataset::cifar10;
    std::int64_t seed = 0;
    std::map<std::string, double> metrics;
};

enum class Format { jsonl, csv };
Format parse_format(std::string_view text);

struct LookupResult {
    double mean = 0.0;
    std::size_t seeds = 0;
};

struct IngestReport {
    std::size_t records = 0;
    std::size_t classes = 0;
    std::map<std::string, std::size_t> per_dataset;
};

// Immutable after construction. Records are indexed by (canonical class, dataset),
// so a look-up with any member of a class finds the stored representative.
class BenchStore {
public:
    BenchStore() = default;
    static BenchStore from_records(std::vector<BenchRecord> records);

    [[nodiscard]] const std::vector<BenchRecord>& records() const { return records_; }
    [[nodiscard]] IngestReport report() const;

    [[nodiscard]] bool contains(const cellspace::Genotype& g, Dataset d) const;
    // Unweighted mean over seeds. Throws not_found for unknown keys or metrics.
    [[nodiscard]] LookupResult lookup(const cellspace::Genotype& g, Dataset d, std::string_view metric) const;
    [[nodiscard]] LookupResult lookup(std::string_view genotype, Dataset d, std::string_view metric) const;

    // Class ids with at least one record for the dataset, ascending.
    [[nodiscard]] std::vector<std::uint32_t> classes(Dataset d) const;
    // A stored genotype for the class (first ingested record).
    [[nodiscard]] cellspace::Genotype stored_genotype(std::uint32_t class_id, Dataset d) const;
    [[nodiscard]] std::vector<Dataset> datasets() const;

    // Set by synthesize_benchmark for the planted_optimum landscape.
    std::optional<cellspace::Genotype> planted;

private:
    std::vector<BenchRecord> records_;
    std::map<std::pair<std::uint32_t, Dataset>, std::vector<std::size_t>> index_;
};

BenchStore ingest_text(std::string_view text, Format format, IngestReport* report = nullptr);
BenchStore ingest(const std::string& path, Format format, IngestReport* report = nullptr);

// Canonical JSONL: one {"genotype","dataset","seed","metrics"} object per line.
std::string export_jsonl(const BenchStore& store);
std::string export_csv(const BenchStore& store);

enum class Landscape { unimodal_conv_count, rugged_random, planted_optimum };
Landscape parse_landscape(std::string_view text);

// One record per canonical class, dataset "synthetic", seed 0.
BenchStore synthesize_benchmark(std::uint64_t seed, Landscape landscape);

// Number of conv3x3 occurrences in the class's canonical term (0..7).
std::size_t canonical_conv3x3_count(const cellspace::Genotype& g);

// Pearson correlation of average ranks.
double spearman(std::span<const double> xs, std::span<const double> ys);
std::vector<double> average_ranks(std::span<const double> xs);

}  // namespace robnas::benchstore
