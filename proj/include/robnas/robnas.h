#ifndef ROBNAS_ROBNAS_H
#define ROBNAS_ROBNAS_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(ROBNAS_BUILDING_LIBRARY)
#    define ROBNAS_API __declspec(dllexport)
#  else
#    define ROBNAS_API __declspec(dllimport)
#  endif
#else
#  define ROBNAS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum robnas_status {
    ROBNAS_OK = 0,
    ROBNAS_ERR_USAGE = 1,
    ROBNAS_ERR_VALIDATION = 2,
    ROBNAS_ERR_NOT_FOUND = 3,
    ROBNAS_ERR_NUMERICAL = 4,
    ROBNAS_ERR_INTERNAL = 5
} robnas_status;

typedef enum robnas_log_level { ROBNAS_LOG_INFO = 0, ROBNAS_LOG_WARNING = 1 } robnas_log_level;

typedef struct robnas_store robnas_store;
typedef struct robnas_network robnas_network;

typedef void (*robnas_log_fn)(robnas_log_level level, const char* message, void* user);

ROBNAS_API const char* robnas_version(void);

/* Message for the most recent failure on the calling thread; "" after success. */
ROBNAS_API const char* robnas_last_error(void);

/* A NULL callback silences logging. */
ROBNAS_API void robnas_set_log_callback(robnas_log_fn fn, void* user);

/* Strings returned through char** are owned by the caller. */
ROBNAS_API void robnas_string_free(char* s);

/* Search space */
ROBNAS_API robnas_status robnas_space_census(size_t* total, size_t* classes);
ROBNAS_API robnas_status robnas_genotype_canonical(const char* genotype, char** canonical_hex, uint32_t* class_id);
ROBNAS_API robnas_status robnas_genotype_from_index(size_t index, char** genotype);

/* Benchmark store */
ROBNAS_API robnas_status robnas_store_open(const char* path, const char* format, robnas_store** out);
ROBNAS_API robnas_status robnas_store_synthesize(uint64_t seed, const char* landscape, robnas_store** out);
ROBNAS_API robnas_status robnas_store_lookup(const robnas_store* store, const char* genotype, const char* dataset,
                                             const char* metric, double* mean, size_t* seeds);
ROBNAS_API robnas_status robnas_store_export(const robnas_store* store, char** jsonl);
ROBNAS_API void robnas_store_free(robnas_store* store);

ROBNAS_API robnas_status robnas_spearman(const double* xs, const double* ys, size_t n, double* out);

/* Networks */
ROBNAS_API robnas_status robnas_network_create(const char* spec_json, uint64_t seed, robnas_network** out);
ROBNAS_API robnas_status robnas_network_load(const char* path, robnas_network** out);
ROBNAS_API robnas_status robnas_network_save(const robnas_network* net, const char* path);
ROBNAS_API robnas_status robnas_network_sizes(const robnas_network* net, size_t* input_size, size_t* output_size,
                                              size_t* parameter_count);
ROBNAS_API robnas_status robnas_network_forward(const robnas_network* net, const double* input, size_t input_size,
                                                double* output, size_t output_size);
ROBNAS_API void robnas_network_free(robnas_network* net);

/* Subcommands: space-report, correlate, search, bound, attack-demo, train-demo,
   ingest-check, weights-init, weights-inspect. config_json may be NULL. */
ROBNAS_API robnas_status robnas_run_command(const char* name, const char* config_json, char** output);

#ifdef __cplusplus
}
#endif

#endif
