#include "robnas/robnas.h"

#include "robnas/benchstore.hpp"
#include "robnas/cellspace.hpp"
#include "robnas/config.hpp"
#include "robnas/error.hpp"
#include "robnas/experiments.hpp"
#include "robnas/log.hpp"
#include "robnas/netcore.hpp"
#include "robnas/serialization.hpp"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>

struct robnas_store {
    robnas::benchstore::BenchStore store;
};

struct robnas_network {
    robnas::netcore::NetworkSpec spec;
    robnas::netcore::WeightSet weights;
};

namespace {

thread_local std::string last_error;

robnas_status to_status(robnas::ErrorKind kind) {
    switch (kind) {
        case robnas::ErrorKind::usage: return ROBNAS_ERR_USAGE;
        case robnas::ErrorKind::validation: return ROBNAS_ERR_VALIDATION;
        case robnas::ErrorKind::not_found: return ROBNAS_ERR_NOT_FOUND;
        case robnas::ErrorKind::numerical: return ROBNAS_ERR_NUMERICAL;
    }
    return ROBNAS_ERR_INTERNAL;
}

template <class F>
robnas_status guarded(F&& body) {
    try {
        body();
        last_error.clear();
        return ROBNAS_OK;
    } catch (const robnas::Error& e) {
        last_error = e.what();
        return to_status(e.kind());
    } catch (const nlohmann::json::exception& e) {
        last_error = std::string("invalid JSON: ") + e.what();
        return ROBNAS_ERR_VALIDATION;
    } catch (const std::bad_alloc&) {
        last_error = "out of memory";
        return ROBNAS_ERR_INTERNAL;
    } catch (const std::exception& e) {
        last_error = e.what();
        return ROBNAS_ERR_INTERNAL;
    }
}

void require(const void* p, const char* name) {
    if (!p) robnas::fail(robnas::ErrorKind::usage, std::string(name) + " must not be NULL");
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.data(), s.size() + 1);
    return out;
}

}  // namespace

extern "C" {

const char* robnas_version(void) { return "1.0.0"; }

const char* robnas_last_error(void) { return last_error.c_str(); }

void robnas_set_log_callback(robnas_log_fn fn, void* user) {
    if (!fn) {
        robnas::set_log_sink({});
        return;
    }
    robnas::set_log_sink([fn, user](robnas::LogLevel level, const std::string& msg) {
        fn(level == robnas::LogLevel::warning ? ROBNAS_LOG_WARNING : ROBNAS_LOG_INFO, msg.c_str(), user);
    });
}

void robnas_string_free(char* s) { std::free(s); }

robnas_status robnas_space_census(size_t* total, size_t* classes) {
    return guarded([&] {
        require(total, "total");
        require(classes, "classes");
        const auto& census = robnas::cellspace::space_census();
        *total = census.class_of.size();
        *classes = census.forms.size();
    });
}

robnas_status robnas_genotype_canonical(const char* genotype, char** canonical_hex, uint32_t* class_id) {
    return guarded([&] {
        require(genotype, "genotype");
        const auto g = robnas::cellspace::parse_genotype(genotype);
        if (class_id) *class_id = robnas::cellspace::class_id(g);
        if (canonical_hex) *canonical_hex = dup_string(robnas::cellspace::canonicalize(g).hex());
    });
}

robnas_status robnas_genotype_from_index(size_t index, char** genotype) {
    return guarded([&] {
        require(genotype, "genotype");
        if (index >= robnas::cellspace::kSpaceSize)
            robnas::fail(robnas::ErrorKind::validation, "genotype index out of range");
        *genotype = dup_string(robnas::cellspace::format_genotype(robnas::cellspace::Genotype::from_index(index)));
    });
}

robnas_status robnas_store_open(const char* path, const char* format, robnas_store** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = nullptr;
        const auto fmt = robnas::benchstore::parse_format(format ? format : "jsonl");
        *out = new robnas_store{robnas::benchstore::ingest(path, fmt)};
    });
}

robnas_status robnas_store_synthesize(uint64_t seed, const char* landscape, robnas_store** out) {
    return guarded([&] {
        require(landscape, "landscape");
        require(out, "out");
        *out = nullptr;
        const auto l = robnas::benchstore::parse_landscape(landscape);
        *out = new robnas_store{robnas::benchstore::synthesize_benchmark(seed, l)};
    });
}

robnas_status robnas_store_lookup(const robnas_store* store, const char* genotype, const char* dataset,
                                  const char* metric, double* mean, size_t* seeds) {
    return guarded([&] {
        require(store, "store");
        require(genotype, "genotype");
        require(dataset, "dataset");
        require(metric, "metric");
        require(mean, "mean");
        const auto r = store->store.lookup(std::string_view(genotype), robnas::benchstore::parse_dataset(dataset), metric);
        *mean = r.mean;
        if (seeds) *seeds = r.seeds;
    });
}

robnas_status robnas_store_export(const robnas_store* store, char** jsonl) {
    return guarded([&] {
        require(store, "store");
        require(jsonl, "jsonl");
        *jsonl = dup_string(robnas::benchstore::export_jsonl(store->store));
    });
}

void robnas_store_free(robnas_store* store) { delete store; }

robnas_status robnas_spearman(const double* xs, const double* ys, size_t n, double* out) {
    return guarded([&] {
        require(xs, "xs");
        require(ys, "ys");
        require(out, "out");
        *out = robnas::benchstore::spearman({xs, n}, {ys, n});
    });
}

robnas_status robnas_network_create(const char* spec_json, uint64_t seed, robnas_network** out) {
    return guarded([&] {
        require(spec_json, "spec_json");
        require(out, "out");
        *out = nullptr;
        auto spec = robnas::config::spec_from_json(robnas::config::json::parse(spec_json));
        auto w = robnas::netcore::init_weights(spec, seed);
        *out = new robnas_network{std::move(spec), std::move(w)};
    });
}

robnas_status robnas_network_load(const char* path, robnas_network** out) {
    return guarded([&] {
        require(path, "path");
        require(out, "out");
        *out = nullptr;
        auto [spec, w] = robnas::serialization::decode_weights(robnas::serialization::read_file(path));
        *out = new robnas_network{std::move(spec), std::move(w)};
    });
}

robnas_status robnas_network_save(const robnas_network* net, const char* path) {
    return guarded([&] {
        require(net, "net");
        require(path, "path");
        robnas::serialization::write_file(path, robnas::serialization::encode_weights(net->spec, net->weights));
    });
}

robnas_status robnas_network_sizes(const robnas_network* net, size_t* input_size, size_t* output_size,
                                   size_t* parameter_count) {
    return guarded([&] {
        require(net, "net");
        if (input_size) *input_size = net->spec.input_size();
        if (output_size) *output_size = net->spec.output_size();
        if (parameter_count) *parameter_count = net->weights.parameter_count();
    });
}

robnas_status robnas_network_forward(const robnas_network* net, const double* input, size_t input_size,
                                     double* output, size_t output_size) {
    return guarded([&] {
        require(net, "net");
        require(input, "input");
        require(output, "output");
        if (input_size != net->spec.input_size())
            robnas::fail(robnas::ErrorKind::validation, "input size mismatch: expected " +
                                                            std::to_string(net->spec.input_size()));
        if (output_size != net->spec.output_size())
            robnas::fail(robnas::ErrorKind::validation, "output size mismatch: expected " +
                                                            std::to_string(net->spec.output_size()));
        const robnas::Vec x = Eigen::Map<const robnas::Vec>(input, static_cast<Eigen::Index>(input_size));
        const robnas::Vec y = robnas::netcore::outputs(net->spec, net->weights, x);
        for (size_t i = 0; i < output_size; ++i) output[i] = y(static_cast<Eigen::Index>(i));
    });
}

void robnas_network_free(robnas_network* net) { delete net; }

robnas_status robnas_run_command(const char* name, const char* config_json, char** output) {
    return guarded([&] {
        require(name, "name");
        require(output, "output");
        *output = nullptr;
        robnas::config::json cfg = robnas::config::json::object();
        if (config_json && *config_json) {
            try {
                cfg = robnas::config::json::parse(config_json);
            } catch (const nlohmann::json::parse_error& e) {
                robnas::fail(robnas::ErrorKind::usage, std::string("config is not valid JSON: ") + e.what());
            }
        }
        *output = dup_string(robnas::experiments::run_command(name, cfg));
    });
}

}  // extern "C"
