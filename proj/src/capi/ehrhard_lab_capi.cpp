#include "ehrhard_lab.h"

#include <cstring>
#include <exception>
#include <string>

#include "ehrhard/alpha.hpp"
#include "ehrhard/errors.hpp"
#include "ehrhard/gaussian.hpp"
#include "ehrhard/scenario.hpp"

struct ehl_report {
  ehrhard::Scenario scenario;
  ehrhard::RunReport report;
  std::string summary_text;
};

namespace {

thread_local std::string last_error;

ehl_status to_status(ehrhard::ErrorCode c) {
  using ehrhard::ErrorCode;
  switch (c) {
    case ErrorCode::Domain: return EHL_ERR_DOMAIN;
    case ErrorCode::InvalidArgument: return EHL_ERR_INVALID_ARGUMENT;
    case ErrorCode::Config: return EHL_ERR_CONFIG;
    case ErrorCode::Infeasible: return EHL_ERR_INFEASIBLE;
    case ErrorCode::Unsupported: return EHL_ERR_UNSUPPORTED;
    case ErrorCode::Resource: return EHL_ERR_RESOURCE;
    case ErrorCode::Io: return EHL_ERR_IO;
    case ErrorCode::Precondition: return EHL_ERR_PRECONDITION;
    case ErrorCode::CertificateInvalid: return EHL_ERR_CERTIFICATE_INVALID;
    case ErrorCode::Degenerate: return EHL_ERR_DEGENERATE;
    case ErrorCode::Validation: return EHL_ERR_VALIDATION;
    case ErrorCode::Internal: return EHL_ERR_INTERNAL;
  }
  return EHL_ERR_INTERNAL;
}

template <typename F>
ehl_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return EHL_OK;
  } catch (const ehrhard::Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const nlohmann::json::exception& e) {
    last_error = std::string("malformed JSON: ") + e.what();
    return EHL_ERR_CONFIG;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return EHL_ERR_RESOURCE;
  } catch (const std::exception& e) {
    last_error = e.what();
    return EHL_ERR_INTERNAL;
  }
}

char* copy_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

}  // namespace

extern "C" {

const char* ehl_version(void) { return "1.0.0"; }

const char* ehl_status_name(ehl_status status) {
  switch (status) {
    case EHL_OK: return "ok";
    case EHL_ERR_DOMAIN: return "domain";
    case EHL_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case EHL_ERR_CONFIG: return "config";
    case EHL_ERR_INFEASIBLE: return "infeasible";
    case EHL_ERR_UNSUPPORTED: return "unsupported";
    case EHL_ERR_RESOURCE: return "resource";
    case EHL_ERR_IO: return "io";
    case EHL_ERR_PRECONDITION: return "precondition";
    case EHL_ERR_CERTIFICATE_INVALID: return "certificate-invalid";
    case EHL_ERR_DEGENERATE: return "degenerate";
    case EHL_ERR_VALIDATION: return "validation";
    case EHL_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* ehl_last_error(void) { return last_error.c_str(); }

ehl_status ehl_scenario_schema(char** json_out) {
  if (!json_out) {
    last_error = "null output pointer";
    return EHL_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] { *json_out = copy_string(ehrhard::dump_json(ehrhard::schemas_json())); });
}

void ehl_string_free(char* s) { delete[] s; }

ehl_status ehl_run(const char* scenario_json, ehl_report** out) {
  if (!scenario_json || !out) {
    last_error = "null argument";
    return EHL_ERR_INVALID_ARGUMENT;
  }
  *out = nullptr;
  return guarded([&] {
    auto r = std::make_unique<ehl_report>();
    r->scenario = ehrhard::parse_scenario(nlohmann::json::parse(scenario_json));
    r->report = ehrhard::run_scenario(r->scenario);
    r->summary_text = ehrhard::dump_json(r->report.summary);
    *out = r.release();
  });
}

int ehl_report_exit_code(const ehl_report* report) { return report ? report->report.exit_code : 1; }

const char* ehl_report_summary(const ehl_report* report) { return report ? report->summary_text.c_str() : ""; }

const char* ehl_report_field_csv(const ehl_report* report) { return report ? report->report.field_csv.c_str() : ""; }

const char* ehl_report_name(const ehl_report* report) { return report ? report->scenario.name.c_str() : ""; }

const char* ehl_report_subcommand(const ehl_report* report) {
  return report ? report->scenario.subcommand.c_str() : "";
}

ehl_status ehl_report_write(const ehl_report* report, const char* out_dir) {
  if (!report || !out_dir) {
    last_error = "null argument";
    return EHL_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] { ehrhard::emit_report(report->scenario, report->report, out_dir); });
}

void ehl_report_free(ehl_report* report) { delete report; }

double ehl_phi(double x) { return ehrhard::phi_cdf(x); }

ehl_status ehl_phi_inv(double p, double* out) {
  if (!out) {
    last_error = "null output pointer";
    return EHL_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] { *out = ehrhard::phi_inv(p).value(); });
}

ehl_status ehl_check_alpha(const double* alpha, size_t m, const size_t* iconv, size_t k, int* feasible) {
  if ((!alpha && m) || (!iconv && k) || !feasible) {
    last_error = "null argument";
    return EHL_ERR_INVALID_ARGUMENT;
  }
  return guarded([&] {
    ehrhard::AlphaSpec spec(std::vector<double>(alpha, alpha + m), std::vector<std::size_t>(iconv, iconv + k));
    *feasible = ehrhard::check_alpha(spec).feasible ? 1 : 0;
  });
}

}  // extern "C"
