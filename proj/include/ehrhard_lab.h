#ifndef EHRHARD_LAB_H
#define EHRHARD_LAB_H

#include <stddef.h>
#include <stdint.h>

#if defined(EHL_BUILDING_LIBRARY)
#define EHL_API __attribute__((visibility("default")))
#else
#define EHL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ehl_status {
  EHL_OK = 0,
  EHL_ERR_DOMAIN = 1,
  EHL_ERR_INVALID_ARGUMENT = 2,
  EHL_ERR_CONFIG = 3,
  EHL_ERR_INFEASIBLE = 4,
  EHL_ERR_UNSUPPORTED = 5,
  EHL_ERR_RESOURCE = 6,
  EHL_ERR_IO = 7,
  EHL_ERR_PRECONDITION = 8,
  EHL_ERR_CERTIFICATE_INVALID = 9,
  EHL_ERR_DEGENERATE = 10,
  EHL_ERR_VALIDATION = 11,
  EHL_ERR_INTERNAL = 12
} ehl_status;

typedef struct ehl_report ehl_report;

EHL_API const char* ehl_version(void);
EHL_API const char* ehl_status_name(ehl_status status);
/* Message of the most recent failure on the calling thread. */
EHL_API const char* ehl_last_error(void);

/* JSON array of subcommand schemas; free with ehl_string_free. */
EHL_API ehl_status ehl_scenario_schema(char** json_out);
EHL_API void ehl_string_free(char* s);

/* Runs a scenario given as JSON text (a scenario object or a previous summary). */
EHL_API ehl_status ehl_run(const char* scenario_json, ehl_report** out);
EHL_API int ehl_report_exit_code(const ehl_report* report);
EHL_API const char* ehl_report_summary(const ehl_report* report);
EHL_API const char* ehl_report_field_csv(const ehl_report* report);
EHL_API const char* ehl_report_name(const ehl_report* report);
EHL_API const char* ehl_report_subcommand(const ehl_report* report);
EHL_API ehl_status ehl_report_write(const ehl_report* report, const char* out_dir);
EHL_API void ehl_report_free(ehl_report* report);

EHL_API double ehl_phi(double x);
EHL_API ehl_status ehl_phi_inv(double p, double* out);
/* iconv holds zero-based indices. */
EHL_API ehl_status ehl_check_alpha(const double* alpha, size_t m, const size_t* iconv, size_t k, int* feasible);

#ifdef __cplusplus
}
#endif

#endif
