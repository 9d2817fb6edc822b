#include "dpmeter/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dpmeter/noise.hpp"

namespace dpmeter::cluster {

std::vector<Cluster> random_clusters(std::span<const std::uint32_t> ids,
                                     std::size_t size, RngStream& rng) {
  if (size == 0) throw std::invalid_argument("random_clusters: size must be > 0");
  std::vector<std::uint32_t> pool(ids.begin(), ids.end());
  // Fisher-Yates on the explicit stream keeps the draw reproducible.
  for (std::size_t i = pool.size(); i > 1; --i) {
    const std::size_t j = rng.next_below(i);
    std::swap(pool[i - 1], pool[j]);
  }
  std::vector<Cluster> out;
  out.reserve(pool.size() / size);
  for (std::size_t base = 0; base + size <= pool.size(); base += size) {
    Cluster c;
    c.members.assign(pool.begin() + base, pool.begin() + base + size);
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<Cluster> consumption_clusters(
    std::span<const std::pair<std::uint32_t, double>> daily_average,
    std::size_t size) {
  if (size == 0) throw std::invalid_argument("consumption_clusters: size must be > 0");
  std::vector<std::pair<std::uint32_t, double>> sorted(daily_average.begin(),
                                                       daily_average.end());
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second < b.second;
    return a.first < b.first;
  });
  std::vector<Cluster> out;
  out.reserve(sorted.size() / size);
  for (std::size_t base = 0; base + size <= sorted.size(); base += size) {
    Cluster c;
    c.members.reserve(size);
    for (std::size_t i = 0; i < size; ++i) c.members.push_back(sorted[base + i].first);
    out.push_back(std::move(c));
  }
  return out;
}

namespace {

void check_matrix(const SlotMatrix& matrix) {
  if (matrix.empty()) throw std::invalid_argument("slot matrix: no members");
  const std::size_t slots = matrix.front().size();
  if (slots == 0) throw std::invalid_argument("slot matrix: no slots");
  for (const auto& row : matrix) {
    if (row.size() != slots) throw std::invalid_argument("slot matrix: ragged rows");
  }
}

}  // namespace

double slot_lambda(const SlotMatrix& matrix, std::size_t t) {
  check_matrix(matrix);
  if (t >= matrix.front().size()) throw std::invalid_argument("slot_lambda: slot out of range");
  double mx = 0;
  for (const auto& row : matrix) mx = std::max(mx, row[t]);
  return mx;
}

std::vector<double> slot_lambdas(const SlotMatrix& matrix) {
  check_matrix(matrix);
  const std::size_t slots = matrix.front().size();
  std::vector<double> out(slots, 0.0);
  for (const auto& row : matrix) {
    for (std::size_t t = 0; t < slots; ++t) out[t] = std::max(out[t], row[t]);
  }
  return out;
}

std::vector<double> window_lambdas(const SlotMatrix& matrix, std::size_t window) {
  if (window == 0) throw std::invalid_argument("window_lambdas: window must be > 0");
  const std::vector<double> maxima = slot_lambdas(matrix);
  std::vector<double> out(maxima.size(), 0.0);
  for (std::size_t base = 0; base < maxima.size(); base += window) {
    const std::size_t end = std::min(base + window, maxima.size());
    double sum = 0;
    for (std::size_t t = base; t < end; ++t) sum += maxima[t];
    for (std::size_t t = base; t < end; ++t) out[t] = sum;
  }
  return out;
}

std::vector<double> apply_lambda_floor(std::vector<double> lambdas, double floor) {
  if (!(floor > 0)) throw std::invalid_argument("apply_lambda_floor: floor must be > 0");
  for (double& l : lambdas) l = std::max(l, floor);
  return lambdas;
}

std::vector<SlotError> error_series(const SlotMatrix& matrix,
                                    std::span<const double> lambdas, double alpha,
                                    std::size_t trials, RngStream& rng) {
  check_matrix(matrix);
  const std::size_t slots = matrix.front().size();
  if (lambdas.size() != slots) throw std::invalid_argument("error_series: lambda count mismatch");
  if (!(alpha >= 0) || !(alpha < 1)) throw std::invalid_argument("error_series: alpha in [0,1)");
  if (trials == 0) throw std::invalid_argument("error_series: trials must be > 0");

  const std::size_t n = matrix.size();
  const auto survivors = static_cast<int>(
      std::max<std::size_t>(1, n - static_cast<std::size_t>(std::floor(alpha * n))));

  std::vector<SlotError> out(slots, {0.0, 0.0});
  for (std::size_t t = 0; t < slots; ++t) {
    double sum = 0;
    for (const auto& row : matrix) sum += row[t];
    if (lambdas[t] == 0) continue;  // degenerate noise-free slot

    const noise::GammaShareParams params(survivors, noise::LaplaceScale(lambdas[t]));
    double acc = 0, acc2 = 0;
    for (std::size_t trial = 0; trial < trials; ++trial) {
      double noise_total = 0;
      for (std::size_t i = 0; i < n; ++i) {
        noise_total += noise::sample_noise_share(params, rng);
      }
      const double delta = std::fabs(noise_total) / (sum + 1.0);
      acc += delta;
      acc2 += delta * delta;
    }
    const double mu = acc / trials;
    const double var = std::max(0.0, acc2 / trials - mu * mu);
    out[t] = {mu, std::sqrt(var)};
  }
  return out;
}

std::vector<double> expected_error_series(const SlotMatrix& matrix,
                                          std::span<const double> lambdas,
                                          double alpha) {
  check_matrix(matrix);
  const std::size_t slots = matrix.front().size();
  if (lambdas.size() != slots) {
    throw std::invalid_argument("expected_error_series: lambda count mismatch");
  }
  std::vector<double> out(slots, 0.0);
  for (std::size_t t = 0; t < slots; ++t) {
    double sum = 0;
    for (const auto& row : matrix) sum += row[t];
    if (lambdas[t] == 0) continue;
    out[t] = noise::utility_bounds(alpha, noise::LaplaceScale(lambdas[t]), sum).mu;
  }
  return out;
}

ErrorSummary summarize_error(std::size_t cluster_size,
                             std::span<const std::vector<double>> per_cluster_mu) {
  if (per_cluster_mu.empty()) throw std::invalid_argument("summarize_error: no clusters");
  ErrorSummary s;
  s.cluster_size = cluster_size;
  s.clusters = per_cluster_mu.size();
  std::vector<double> means;
  means.reserve(per_cluster_mu.size());
  for (const auto& series : per_cluster_mu) {
    if (series.empty()) throw std::invalid_argument("summarize_error: empty series");
    double acc = 0;
    for (const double v : series) {
      acc += v;
      s.max_error = std::max(s.max_error, v);
    }
    means.push_back(acc / static_cast<double>(series.size()));
  }
  double m = 0;
  for (const double v : means) m += v;
  m /= static_cast<double>(means.size());
  double var = 0;
  for (const double v : means) var += (v - m) * (v - m);
  var /= static_cast<double>(means.size());
  s.mean_error = m;
  s.dev_error = std::sqrt(var);
  return s;
}

}  // namespace dpmeter::cluster
