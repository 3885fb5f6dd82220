#include "smld.h"

#include "smld/correction.hpp"
#include "smld/errors.hpp"
#include "smld/mirror_maps.hpp"
#include "smld/pipeline.hpp"

#include <new>
#include <string>
#include <vector>

struct smld_mirror_map {
  smld::MirrorMap map;
};

struct smld_run_result {
  int exit_code = 0;
  std::string status;
  std::string report;
};

namespace {

thread_local std::string g_last_error;

smld_status fail(smld_status s, const char* what) {
  g_last_error = what;
  return s;
}

// Maps the active exception onto a status code.
smld_status translate() {
  try {
    throw;
  } catch (const smld::DomainError& e) {
    return fail(SMLD_ERR_DOMAIN, e.what());
  } catch (const smld::ShapeError& e) {
    return fail(SMLD_ERR_SHAPE, e.what());
  } catch (const smld::SingularityError& e) {
    return fail(SMLD_ERR_SINGULAR, e.what());
  } catch (const smld::DegenerateError& e) {
    return fail(SMLD_ERR_DEGENERATE, e.what());
  } catch (const smld::ConfigError& e) {
    return fail(SMLD_ERR_CONFIG, e.what());
  } catch (const smld::IoError& e) {
    return fail(SMLD_ERR_IO, e.what());
  } catch (const nlohmann::json::exception& e) {
    return fail(SMLD_ERR_CONFIG, e.what());
  } catch (const std::bad_alloc&) {
    return fail(SMLD_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(SMLD_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(SMLD_ERR_INTERNAL, "unknown error");
  }
}

template <class F>
smld_status guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return SMLD_OK;
  } catch (...) {
    return translate();
  }
}

smld_status make_map(smld::MirrorMap m, smld_mirror_map** out) {
  if (!out) return fail(SMLD_ERR_CONFIG, "null output pointer");
  *out = new smld_mirror_map{std::move(m)};
  return SMLD_OK;
}

smld::Mat read_square(size_t d, const double* p) {
  const auto n = static_cast<Eigen::Index>(d);
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(p, n, n);
}

}  // namespace

extern "C" {

const char* smld_last_error_message(void) { return g_last_error.c_str(); }

const char* smld_status_name(smld_status s) {
  switch (s) {
    case SMLD_OK: return "ok";
    case SMLD_ERR_DOMAIN: return "domain";
    case SMLD_ERR_SHAPE: return "shape";
    case SMLD_ERR_SINGULAR: return "singular";
    case SMLD_ERR_CONFIG: return "config";
    case SMLD_ERR_IO: return "io";
    case SMLD_ERR_DEGENERATE: return "degenerate";
    case SMLD_ERR_DIVERGED: return "diverged";
    case SMLD_ERR_CORRECTION: return "correction";
    case SMLD_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* smld_version(void) { return "1.0.0"; }

smld_status smld_mirror_map_euclidean(size_t dim, smld_mirror_map** out) {
  smld_status s = SMLD_OK;
  const auto st = guarded([&] { s = make_map(smld::MirrorMap::euclidean(dim), out); });
  return st != SMLD_OK ? st : s;
}

smld_status smld_mirror_map_log_barrier(size_t dim, smld_mirror_map** out) {
  smld_status s = SMLD_OK;
  const auto st = guarded([&] { s = make_map(smld::MirrorMap::log_barrier_positive(dim), out); });
  return st != SMLD_OK ? st : s;
}

smld_status smld_mirror_map_log_det_pd(size_t q, smld_mirror_map** out) {
  smld_status s = SMLD_OK;
  const auto st = guarded([&] { s = make_map(smld::MirrorMap::log_det_pd(q), out); });
  return st != SMLD_OK ? st : s;
}

smld_status smld_mirror_map_product(const smld_mirror_map* const* parts, size_t count, smld_mirror_map** out) {
  if (!parts && count > 0) return fail(SMLD_ERR_CONFIG, "null parts array");
  smld_status s = SMLD_OK;
  const auto st = guarded([&] {
    std::vector<smld::MirrorMap> maps;
    for (size_t i = 0; i < count; ++i) {
      if (!parts[i]) throw smld::ConfigError("null mirror map in product");
      maps.push_back(parts[i]->map);
    }
    s = make_map(smld::MirrorMap::product(maps), out);
  });
  return st != SMLD_OK ? st : s;
}

void smld_mirror_map_destroy(smld_mirror_map* map) { delete map; }

size_t smld_mirror_map_dim(const smld_mirror_map* map) { return map ? map->map.dim() : 0; }

smld_status smld_mirror_map_grad_phi(const smld_mirror_map* map, const double* theta, double* vartheta) {
  if (!map || !theta || !vartheta) return fail(SMLD_ERR_CONFIG, "null argument");
  return guarded([&] {
    const auto d = static_cast<Eigen::Index>(map->map.dim());
    const smld::Vec v = smld::grad_phi(map->map, Eigen::Map<const smld::Vec>(theta, d));
    Eigen::Map<smld::Vec>(vartheta, d) = v;
  });
}

smld_status smld_mirror_map_grad_phi_star(const smld_mirror_map* map, const double* vartheta, double* theta) {
  if (!map || !theta || !vartheta) return fail(SMLD_ERR_CONFIG, "null argument");
  return guarded([&] {
    const auto d = static_cast<Eigen::Index>(map->map.dim());
    const smld::Vec t = smld::grad_phi_star(map->map, Eigen::Map<const smld::Vec>(vartheta, d));
    Eigen::Map<smld::Vec>(theta, d) = t;
  });
}

smld_status smld_lyapunov_solve(size_t d, const double* J, const double* V, const double* Gamma, double* X_out,
                                double* residual_out) {
  if (!J || !V || !Gamma || !X_out) return fail(SMLD_ERR_CONFIG, "null argument");
  if (d == 0) return fail(SMLD_ERR_SHAPE, "dimension must be positive");
  return guarded([&] {
    const auto sol = smld::lyapunov_solve(read_square(d, J), read_square(d, V), read_square(d, Gamma));
    const auto n = static_cast<Eigen::Index>(d);
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(X_out, n, n) = sol.x;
    if (residual_out) *residual_out = sol.residual;
  });
}

smld_status smld_command_run(const char* command, const char* config_json, const char* out_dir,
                             const smld_run_options* options, smld_run_result** out) {
  if (!command || !config_json || !out_dir || !out) return fail(SMLD_ERR_CONFIG, "null argument");
  *out = nullptr;
  return guarded([&] {
    const auto cfg = smld::Json::parse(config_json);
    smld::RunOptions opt;
    if (options) {
      if (options->has_seed) opt.seed = options->seed;
      opt.max_seconds = options->max_seconds;
    }
    const auto outcome = smld::run_command(command, cfg, out_dir, opt);
    auto* r = new smld_run_result;
    r->exit_code = outcome.exit_code;
    r->status = outcome.status;
    r->report = outcome.report.dump(2);
    *out = r;
  });
}

int smld_run_result_exit_code(const smld_run_result* r) { return r ? r->exit_code : 1; }
const char* smld_run_result_status(const smld_run_result* r) { return r ? r->status.c_str() : ""; }
const char* smld_run_result_report_json(const smld_run_result* r) { return r ? r->report.c_str() : "{}"; }
void smld_run_result_destroy(smld_run_result* r) { delete r; }

}  // extern "C"
