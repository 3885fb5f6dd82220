#include "smld/samplers.hpp"

#include "smld/errors.hpp"
#include "smld/parallel.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace smld {

namespace {

Vec standard_normal(std::size_t d, Rng& rng) {
  Vec z(static_cast<Eigen::Index>(d));
  for (Eigen::Index j = 0; j < z.size(); ++j) z(j) = rng.normal();
  return z;
}

void append_number(std::string& out, double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, end);
}

}  // namespace

GradEstimate minibatch_gradient(GradOracle& oracle, const Vec& theta, std::size_t batch,
                                bool full_scan, Rng& rng) {
  const std::size_t n = oracle.n_terms();
  if (n == 0) throw ShapeError("minibatch_gradient: oracle has no data terms");
  if (!full_scan && (batch == 0 || batch > n))
    throw ShapeError("minibatch_gradient: batch size must be in [1, n]");

  GradEstimate est;
  const std::size_t slots = full_scan ? n : batch;
  est.group_ids.resize(slots);
  for (std::size_t s = 0; s < slots; ++s) est.group_ids[s] = full_scan ? s : rng.below(n);

  std::vector<TermGradient> terms(slots);
  if (oracle.exact()) {
    Rng unused(0);
    for (std::size_t s = 0; s < slots; ++s) terms[s] = oracle.grad_term(est.group_ids[s], theta, unused);
  } else {
    const std::uint64_t base = rng();
    // Occurrences of the same group run in slot order on one worker.
    std::map<std::size_t, std::vector<std::size_t>> by_group;
    for (std::size_t s = 0; s < slots; ++s) by_group[est.group_ids[s]].push_back(s);
    std::vector<const std::vector<std::size_t>*> work;
    work.reserve(by_group.size());
    for (const auto& [id, list] : by_group) work.push_back(&list);
    parallel_for(work.size(), [&](std::size_t w) {
      for (std::size_t s : *work[w]) {
        Rng r = Rng::stream(base, s);
        terms[s] = oracle.grad_term(est.group_ids[s], theta, r);
      }
    });
    est.per_group_cov.reserve(slots);
    for (auto& t : terms) est.per_group_cov.push_back(std::move(t.cov));
  }

  Vec sum = Vec::Zero(theta.size());
  for (const auto& t : terms) sum += t.grad;
  const double scale = full_scan ? 1.0 : static_cast<double>(n) / static_cast<double>(batch);
  est.grad = oracle.grad_prior(theta) + scale * sum;
  return est;
}

Vec ula_step(GradOracle& oracle, const Vec& theta, double eps, Rng& rng) {
  const Vec g = oracle.full_grad(theta, rng);
  const Vec z = standard_normal(oracle.dim(), rng);
  return theta - eps * g + std::sqrt(2.0 * eps) * z;
}

Vec sgld_step(GradOracle& oracle, const Vec& theta, double eps, std::size_t batch, Rng& rng,
              bool full_scan) {
  const GradEstimate est = minibatch_gradient(oracle, theta, batch, full_scan, rng);
  const Vec z = standard_normal(oracle.dim(), rng);
  return theta - eps * est.grad + std::sqrt(2.0 * eps) * z;
}

Vec mla_step(const MirrorMap& map, GradOracle& oracle, const Vec& vartheta, double eps, Rng& rng) {
  return smld_step(map, oracle, vartheta, eps, oracle.n_terms(), rng, true).next;
}

SmldStep smld_step(const MirrorMap& map, GradOracle& oracle, const Vec& vartheta, double eps,
                   std::size_t batch, Rng& rng, bool full_scan) {
  const Vec theta = grad_phi_star(map, vartheta);
  SmldStep out;
  out.estimate = minibatch_gradient(oracle, theta, batch, full_scan, rng);
  const Vec z = standard_normal(map.dim(), rng);
  out.next = vartheta - eps * out.estimate.grad + std::sqrt(2.0 * eps) * metric_noise(map, vartheta, z);
  return out;
}

std::string to_string(ChainStatus s) {
  return s == ChainStatus::Completed ? "completed" : "diverged";
}

Mat Trace::primal(const MirrorMap& map) const {
  Mat out(rows.rows(), rows.cols());
  for (Eigen::Index k = 0; k < rows.rows(); ++k)
    out.row(k) = grad_phi_star(map, rows.row(k).transpose()).transpose();
  return out;
}

Mat Trace::post_burnin(double fraction) const {
  const auto skip = static_cast<Eigen::Index>(std::floor(fraction * static_cast<double>(rows.rows())));
  return rows.bottomRows(rows.rows() - skip);
}

Trace run_chain(const Kernel& kernel, const Vec& init, const ChainConfig& config,
                const StateCheck& valid) {
  if (!init.allFinite() || (valid && !valid(init)))
    throw DomainError("run_chain: initial state is outside the domain");
  if (config.thin == 0) throw ConfigError("run_chain: thin must be positive");

  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  Trace trace;
  const auto d = init.size();
  std::vector<double> buffer;
  if (config.store) buffer.reserve(static_cast<std::size_t>(config.n_iters / config.thin) * static_cast<std::size_t>(d));

  Vec state = init;
  for (std::uint64_t k = 1; k <= config.n_iters; ++k) {
    Rng rng = Rng::stream(config.seed, k);
    Vec next;
    bool ok = true;
    try {
      next = kernel(state, rng);
    } catch (const DomainError&) {
      ok = false;
    }
    if (ok) ok = next.allFinite() && next.lpNorm<Eigen::Infinity>() <= config.divergence_threshold &&
                 (!valid || valid(next));
    if (!ok) {
      trace.status = ChainStatus::Diverged;
      trace.diverged_at = k;
      break;
    }
    state = std::move(next);
    trace.steps_run = k;
    if (config.store && k % config.thin == 0) {
      buffer.insert(buffer.end(), state.data(), state.data() + d);
      trace.iters.push_back(k);
    }
    if (config.max_seconds > 0.0 && (k & 1023u) == 0 &&
        std::chrono::duration<double>(clock::now() - start).count() > config.max_seconds) {
      trace.time_truncated = true;
      break;
    }
  }
  trace.rows = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      buffer.data(), static_cast<Eigen::Index>(trace.iters.size()), d);
  trace.last = state;
  trace.wall_seconds = std::chrono::duration<double>(clock::now() - start).count();
  return trace;
}

void write_trace_csv(std::ostream& os, const Mat& rows, const std::vector<std::uint64_t>& iters) {
  if (static_cast<std::size_t>(rows.rows()) != iters.size())
    throw ShapeError("write_trace_csv: row count does not match iteration count");
  std::string line = "iter";
  for (Eigen::Index j = 0; j < rows.cols(); ++j) line += ",coord_" + std::to_string(j);
  os << line << '\n';
  for (Eigen::Index k = 0; k < rows.rows(); ++k) {
    line = std::to_string(iters[static_cast<std::size_t>(k)]);
    for (Eigen::Index j = 0; j < rows.cols(); ++j) {
      line += ',';
      append_number(line, rows(k, j));
    }
    os << line << '\n';
  }
}

void write_trace_csv(const std::string& path, const Mat& rows,
                     const std::vector<std::uint64_t>& iters) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path + " for writing");
  write_trace_csv(os, rows, iters);
  if (!os) throw IoError("failed writing " + path);
}

TraceTable read_trace_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(is, line) || line.rfind("iter", 0) != 0) throw IoError(path + ": missing trace header");
  Eigen::Index d = 0;
  for (char c : line) d += c == ',';
  std::vector<double> values;
  TraceTable table;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::getline(ls, cell, ',');
    table.iters.push_back(std::stoull(cell));
    Eigen::Index cols = 0;
    while (std::getline(ls, cell, ',')) {
      values.push_back(std::stod(cell));
      ++cols;
    }
    if (cols != d) throw IoError(path + ": ragged row");
  }
  table.rows = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), static_cast<Eigen::Index>(table.iters.size()), d);
  return table;
}

}  // namespace smld
