#ifndef TTPCD_H
#define TTPCD_H

#include <stddef.h>
#include <stdint.h>

typedef enum TtpcdStatus {
  TTPCD_STATUS_OK = 0,
  TTPCD_STATUS_NULL_POINTER = 1,
  TTPCD_STATUS_INVALID_UTF8 = 2,
  TTPCD_STATUS_PARSE = 3,
  TTPCD_STATUS_IO = 4,
  TTPCD_STATUS_INFEASIBLE = 5,
  TTPCD_STATUS_INVALID_ARGUMENT = 6,
  TTPCD_STATUS_EMPTY_GRID = 7,
  TTPCD_STATUS_KNAPSACK_CAPACITY = 8,
  TTPCD_STATUS_BUFFER_TOO_SMALL = 9,
  TTPCD_STATUS_OUT_OF_RANGE = 10,
  TTPCD_STATUS_INTERNAL = 11,
} TtpcdStatus;

typedef enum TtpcdPolicy {
  TTPCD_POLICY_FIXED = 0,
  TTPCD_POLICY_GAMMA1 = 1,
  TTPCD_POLICY_GAMMA2 = 2,
} TtpcdPolicy;

typedef enum TtpcdMode {
  TTPCD_MODE_COEA = 0,
  TTPCD_MODE_QD_ONLY = 1,
  TTPCD_MODE_EDO_ONLY = 2,
} TtpcdMode;

typedef enum TtpcdZminMode {
  TTPCD_ZMIN_MODE_DYNAMIC = 0,
  TTPCD_ZMIN_MODE_FIXED = 1,
} TtpcdZminMode;

// Opaque instance handle.
typedef struct TtpcdInstance TtpcdInstance;

// Opaque run result handle.
typedef struct TtpcdRunResult TtpcdRunResult;

typedef struct TtpcdScores {
  // Tour length.
  double f;
  // Packing profit.
  double g;
  // TTP objective.
  double z;
} TtpcdScores;

typedef struct TtpcdRunConfig {
  uint64_t budget_multiplier;
  double alpha;
  enum TtpcdPolicy policy;
  size_t mu;
  double alpha1;
  double alpha2;
  size_t delta1;
  size_t delta2;
  enum TtpcdMode mode;
  enum TtpcdZminMode zmin_mode;
  uint64_t seed;
  size_t tsp_population;
  size_t tsp_crossovers_per_city;
} TtpcdRunConfig;

typedef struct TtpcdEntropy {
  double edge;
  double item;
  double total;
} TtpcdEntropy;

typedef struct TtpcdLogRecord {
  uint64_t evals;
  double z_best;
  double h_p2;
  size_t p2_size;
  size_t grid_occupancy;
} TtpcdLogRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Static NUL-terminated version string.
const char *ttpcd_version(void);

// Message of the last failed call on this thread, or null. Valid until the
// next failing call on the same thread.
const char *ttpcd_last_error_message(void);

enum TtpcdStatus ttpcd_instance_parse(const char *text, struct TtpcdInstance **out);

enum TtpcdStatus ttpcd_instance_load(const char *path, struct TtpcdInstance **out);

// Accepts null.
void ttpcd_instance_free(struct TtpcdInstance *inst);

// 0 for a null handle.
size_t ttpcd_instance_num_cities(const struct TtpcdInstance *inst);

// 0 for a null handle.
size_t ttpcd_instance_num_items(const struct TtpcdInstance *inst);

// Scores a 1-based tour starting at city 1 and a 0/1 packing.
enum TtpcdStatus ttpcd_evaluate(const struct TtpcdInstance *inst,
                                const size_t *tour,
                                size_t tour_len,
                                const uint8_t *packing,
                                size_t packing_len,
                                struct TtpcdScores *out);

// Optimal knapsack profit. `selection` may be null; otherwise it receives
// `selection_len` (= number of items) 0/1 bytes.
enum TtpcdStatus ttpcd_solve_kp(const struct TtpcdInstance *inst,
                                double *g_star,
                                uint8_t *selection,
                                size_t selection_len);

struct TtpcdRunConfig ttpcd_run_config_default(void);

// Runs one experiment to budget exhaustion.
enum TtpcdStatus ttpcd_run(const struct TtpcdInstance *inst,
                           const struct TtpcdRunConfig *config,
                           struct TtpcdRunResult **out);

// Accepts null.
void ttpcd_run_result_free(struct TtpcdRunResult *result);

// 0 for a null handle.
uint64_t ttpcd_run_result_evaluations(const struct TtpcdRunResult *result);

// Scores of the best solution across both archives.
enum TtpcdStatus ttpcd_run_result_best(const struct TtpcdRunResult *result,
                                       struct TtpcdScores *out);

// Copies the best tour (1-based) into `buf`. `written` receives the tour
// length even when the buffer is too small.
enum TtpcdStatus ttpcd_run_result_best_tour(const struct TtpcdRunResult *result,
                                            size_t *buf,
                                            size_t buf_len,
                                            size_t *written);

// Final entropy of the diversity population (zeros when it is empty).
enum TtpcdStatus ttpcd_run_result_entropy(const struct TtpcdRunResult *result,
                                          struct TtpcdEntropy *out);

// 0 for a null handle.
size_t ttpcd_run_result_log_len(const struct TtpcdRunResult *result);

enum TtpcdStatus ttpcd_run_result_log_record(const struct TtpcdRunResult *result,
                                             size_t index,
                                             struct TtpcdLogRecord *out);

// Writes the log, map, frequency and summary files into `dir`.
enum TtpcdStatus ttpcd_run_result_write_artifacts(const struct TtpcdRunResult *result,
                                                  const char *dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TTPCD_H */
