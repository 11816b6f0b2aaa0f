#include "robnas/benchstore.hpp"

#include "robnas/error.hpp"
#include "robnas/types.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

namespace robnas::benchstore {

using cellspace::Genotype;
using ojson = nlohmann::ordered_json;

std::string dataset_name(Dataset d) {
    switch (d) {
        case Dataset::cifar10: return "cifar10";
        case Dataset::cifar100: return "cifar100";
        case Dataset::imagenet16_120: return "imagenet16_120";
        case Dataset::synthetic: return "synthetic";
    }
    return "?";
}

Dataset parse_dataset(std::string_view text) {
    for (Dataset d : {Dataset::cifar10, Dataset::cifar100, Dataset::imagenet16_120, Dataset::synthetic})
        if (dataset_name(d) == text) return d;
    fail(ErrorKind::validation, "unknown dataset: " + std::string(text));
}

Format parse_format(std::string_view text) {
    if (text == "jsonl") return Format::jsonl;
    if (text == "csv") return Format::csv;
    fail(ErrorKind::usage, "unknown benchmark format: " + std::string(text));
}

Landscape parse_landscape(std::string_view text) {
    if (text == "unimodal_conv_count") return Landscape::unimodal_conv_count;
    if (text == "rugged_random") return Landscape::rugged_random;
    if (text == "planted_optimum") return Landscape::planted_optimum;
    fail(ErrorKind::validation, "unknown landscape: " + std::string(text));
}

namespace {

std::string key_text(const BenchRecord& r) {
    return "(" + r.genotype + ", " + dataset_name(r.dataset) + ", " + std::to_string(r.seed) + ")";
}

void validate_metrics(const BenchRecord& r, const std::string& where) {
    for (const auto& [name, value] : r.metrics) {
        if (!std::isfinite(value) || value < 0.0 || value > 1.0) {
            std::ostringstream os;
            os << where << "metric \"" << name << "\" = " << value << " outside [0, 1]";
            fail(ErrorKind::validation, os.str());
        }
    }
}

}  // namespace

BenchStore BenchStore::from_records(std::vector<BenchRecord> records) {
    BenchStore s;
    std::set<std::tuple<std::uint32_t, Dataset, std::int64_t>> seen;
    for (std::size_t i = 0; i < records.size(); ++i) {
        const BenchRecord& r = records[i];
        validate_metrics(r, "");
        const Genotype g = cellspace::parse_genotype(r.genotype);
        const std::uint32_t cls = cellspace::class_id(g);
        if (!seen.emplace(cls, r.dataset, r.seed).second)
            fail(ErrorKind::validation, "duplicate benchmark key " + key_text(r));
        s.index_[{cls, r.dataset}].push_back(i);
    }
    s.records_ = std::move(records);
    return s;
}

IngestReport BenchStore::report() const {
    IngestReport rep;
    rep.records = records_.size();
    std::set<std::uint32_t> cls;
    for (const auto& [key, idx] : index_) cls.insert(key.first);
    rep.classes = cls.size();
    for (const auto& r : records_) ++rep.per_dataset[dataset_name(r.dataset)];
    return rep;
}

bool BenchStore::contains(const Genotype& g, Dataset d) const {
    return index_.contains({cellspace::class_id(g), d});
}

LookupResult BenchStore::lookup(const Genotype& g, Dataset d, std::string_view metric) const {
    auto it = index_.find({cellspace::class_id(g), d});
    if (it == index_.end())
        fail(ErrorKind::not_found, "no record for " + cellspace::format_genotype(g) + " on " + dataset_name(d));
    LookupResult out;
    for (std::size_t idx : it->second) {
        const auto& m = records_[idx].metrics;
        double v = 0.0;
        if (metric == kRobustMean) {
            for (std::size_t k = 1; k < kCoreMetrics.size(); ++k) {
                auto mi = m.find(kCoreMetrics[k]);
                if (mi == m.end()) fail(ErrorKind::not_found, "robust_mean needs metric " + kCoreMetrics[k]);
                v += mi->second;
            }
            v /= static_cast<double>(kCoreMetrics.size() - 1);
        } else {
            auto mi = m.find(std::string(metric));
            if (mi == m.end()) fail(ErrorKind::not_found, "metric not recorded: " + std::string(metric));
            v = mi->second;
        }
        out.mean += v;
        ++out.seeds;
    }
    out.mean /= static_cast<double>(out.seeds);
    return out;
}

LookupResult BenchStore::lookup(std::string_view genotype, Dataset d, std::string_view metric) const {
    return lookup(cellspace::parse_genotype(genotype), d, metric);
}

std::vector<std::uint32_t> BenchStore::classes(Dataset d) const {
    std::vector<std::uint32_t> out;
    for (const auto& [key, idx] : index_)
        if (key.second == d) out.push_back(key.first);
    std::sort(out.begin(), out.end());
    return out;
}

Genotype BenchStore::stored_genotype(std::uint32_t class_id, Dataset d) const {
    auto it = index_.find({class_id, d});
    if (it == index_.end()) fail(ErrorKind::not_found, "class not stored");
    return cellspace::parse_genotype(records_[it->second.front()].genotype);
}

std::vector<Dataset> BenchStore::datasets() const {
    std::set<Dataset> ds;
    for (const auto& [key, idx] : index_) ds.insert(key.second);
    return {ds.begin(), ds.end()};
}

namespace {

std::vector<std::string> split_csv(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::vector<BenchRecord> parse_jsonl(std::string_view text) {
    std::vector<BenchRecord> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        const std::string where = "line " + std::to_string(line_no) + ": ";
        BenchRecord r;
        try {
            const auto j = nlohmann::json::parse(line);
            if (!j.is_object()) fail(ErrorKind::validation, where + "expected an object");
            for (const auto& [k, v] : j.items())
                if (k != "genotype" && k != "dataset" && k != "seed" && k != "metrics")
                    fail(ErrorKind::validation, where + "unknown key \"" + k + "\"");
            r.genotype = j.at("genotype").get<std::string>();
            r.dataset = parse_dataset(j.at("dataset").get<std::string>());
            r.seed = j.at("seed").get<std::int64_t>();
            for (const auto& [k, v] : j.at("metrics").items()) r.metrics[k] = v.get<double>();
            cellspace::parse_genotype(r.genotype);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::validation, where + "schema violation: " + e.what());
        } catch (const Error& e) {
            if (std::string_view(e.what()).starts_with("line ")) throw;
            fail(e.kind(), where + e.what());
        }
        validate_metrics(r, where);
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<BenchRecord> parse_csv(std::string_view text) {
    std::vector<BenchRecord> out;
    std::vector<std::string> header;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        const std::string where = "line " + std::to_string(line_no) + ": ";
        auto cells = split_csv(line);
        if (header.empty()) {
            header = cells;
            if (header.size() < 3 + kCoreMetrics.size() || header[0] != "genotype" || header[1] != "dataset" ||
                header[2] != "seed")
                fail(ErrorKind::validation, where + "CSV header must start with genotype,dataset,seed");
            for (std::size_t k = 0; k < kCoreMetrics.size(); ++k)
                if (header[3 + k] != kCoreMetrics[k])
                    fail(ErrorKind::validation, where + "CSV header column " + std::to_string(4 + k) +
                                                    " must be " + kCoreMetrics[k]);
            continue;
        }
        if (cells.size() != header.size())
            fail(ErrorKind::validation, where + "expected " + std::to_string(header.size()) + " columns");
        BenchRecord r;
        try {
            r.genotype = cells[0];
            cellspace::parse_genotype(r.genotype);
            r.dataset = parse_dataset(cells[1]);
            std::size_t used = 0;
            r.seed = std::stoll(cells[2], &used);
            if (used != cells[2].size()) throw std::invalid_argument("seed");
            for (std::size_t k = 3; k < cells.size(); ++k) {
                if (cells[k].empty()) continue;
                double v = std::stod(cells[k], &used);
                if (used != cells[k].size()) throw std::invalid_argument(header[k]);
                r.metrics[header[k]] = v;
            }
        } catch (const std::logic_error& e) {
            fail(ErrorKind::validation, where + "schema violation: bad number in " + e.what());
        } catch (const Error& e) {
            fail(e.kind(), where + e.what());
        }
        validate_metrics(r, where);
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace

BenchStore ingest_text(std::string_view text, Format format, IngestReport* report) {
    BenchStore s = BenchStore::from_records(format == Format::jsonl ? parse_jsonl(text) : parse_csv(text));
    if (report) *report = s.report();
    return s;
}

BenchStore ingest(const std::string& path, Format format, IngestReport* report) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::not_found, "benchmark file not found: " + path);
    const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    return ingest_text(text, format, report);
}

std::string export_jsonl(const BenchStore& store) {
    std::string out;
    for (const auto& r : store.records()) {
        ojson j;
        j["genotype"] = r.genotype;
        j["dataset"] = dataset_name(r.dataset);
        j["seed"] = r.seed;
        ojson m = ojson::object();
        for (const auto& [k, v] : r.metrics) m[k] = v;
        j["metrics"] = m;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::string export_csv(const BenchStore& store) {
    std::set<std::string> extra;
    for (const auto& r : store.records())
        for (const auto& [k, v] : r.metrics)
            if (std::find(kCoreMetrics.begin(), kCoreMetrics.end(), k) == kCoreMetrics.end()) extra.insert(k);
    std::ostringstream os;
    os.precision(17);
    os << "genotype,dataset,seed";
    for (const auto& m : kCoreMetrics) os << ',' << m;
    for (const auto& m : extra) os << ',' << m;
    os << '\n';
    for (const auto& r : store.records()) {
        os << r.genotype << ',' << dataset_name(r.dataset) << ',' << r.seed;
        auto cell = [&](const std::string& k) {
            os << ',';
            if (auto it = r.metrics.find(k); it != r.metrics.end()) os << it->second;
        };
        for (const auto& m : kCoreMetrics) cell(m);
        for (const auto& m : extra) cell(m);
        os << '\n';
    }
    return os.str();
}

std::size_t canonical_conv3x3_count(const Genotype& g) {
    const std::string& form = cellspace::space_census().forms[cellspace::class_id(g)];
    const std::string_view needle = "@conv3x3";
    std::size_t count = 0;
    for (std::size_t pos = form.find(needle); pos != std::string::npos; pos = form.find(needle, pos + 1)) ++count;
    return count;
}

BenchStore synthesize_benchmark(std::uint64_t seed, Landscape landscape) {
    const auto& census = cellspace::space_census();
    Rng rng = make_rng(seed, "benchstore.synthesize");
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::optional<std::uint32_t> planted_class;
    if (landscape == Landscape::planted_optimum) {
        std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(census.forms.size() - 1));
        planted_class = pick(rng);
    }
    // The all-conv3x3 cell has the most conv3x3 occurrences (7) in its canonical term.
    constexpr double kMaxConv = 7.0;
    constexpr double kNoise = 1.0 / 24.0;
    std::vector<BenchRecord> records;
    records.reserve(census.forms.size());
    for (std::uint32_t cls = 0; cls < census.forms.size(); ++cls) {
        const Genotype rep = Genotype::from_index(census.representative[cls]);
        BenchRecord r;
        r.genotype = cellspace::format_genotype(rep);
        r.dataset = Dataset::synthetic;
        r.seed = 0;
        switch (landscape) {
            case Landscape::unimodal_conv_count: {
                const double base = static_cast<double>(canonical_conv3x3_count(rep)) / kMaxConv * (1.0 - kNoise);
                for (const auto& m : kCoreMetrics) r.metrics[m] = base + kNoise * unit(rng) * 0.999;
                break;
            }
            case Landscape::rugged_random: {
                const double clean = 0.3 + 0.6 * unit(rng);
                r.metrics["clean"] = clean;
                r.metrics["fgsm_3_255"] = clean * (0.75 + 0.2 * unit(rng));
                r.metrics["pgd_3_255"] = r.metrics["fgsm_3_255"] * (0.9 + 0.1 * unit(rng));
                r.metrics["fgsm_8_255"] = clean * (0.5 + 0.2 * unit(rng));
                r.metrics["pgd_8_255"] = r.metrics["fgsm_8_255"] * (0.8 + 0.2 * unit(rng));
                break;
            }
            case Landscape::planted_optimum: {
                for (const auto& m : kCoreMetrics) r.metrics[m] = 0.8 * unit(rng);
                if (cls == planted_class) {
                    for (const auto& m : kCoreMetrics) r.metrics[m] = 0.95;
                }
                break;
            }
        }
        records.push_back(std::move(r));
    }
    BenchStore s = BenchStore::from_records(std::move(records));
    if (planted_class) s.planted = Genotype::from_index(census.representative[*planted_class]);
    return s;
}

std::vector<double> average_ranks(std::span<const double> xs) {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(xs.size());
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) fail(ErrorKind::validation, "spearman: length mismatch");
    if (xs.size() < 2) fail(ErrorKind::validation, "spearman: need at least two points");
    const auto rx = average_ranks(xs);
    const auto ry = average_ranks(ys);
    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) fail(ErrorKind::numerical, "spearman: undefined for constant input");
    return sxy / std::sqrt(sxx * syy);
}

}  // namespace robnas::benchstore
