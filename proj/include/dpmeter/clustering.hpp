#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "dpmeter/rng.hpp"

namespace dpmeter::cluster {

struct Cluster {
  std::vector<std::uint32_t> members;
};

// Disjoint clusters of exactly `size` households, uniformly at random.
// Households that do not fill a final block are dropped.
std::vector<Cluster> random_clusters(std::span<const std::uint32_t> ids,
                                     std::size_t size, RngStream& rng);

// Stable sort by daily average (ties by id), then consecutive blocks.
// Groups households of similar magnitude so the in-cluster maximum sits
// close to the typical member.
std::vector<Cluster> consumption_clusters(
    std::span<const std::pair<std::uint32_t, double>> daily_average,
    std::size_t size);

// Rows = cluster members, columns = slots.
using SlotMatrix = std::vector<std::vector<double>>;

// Noise scale for one slot: the largest member reading in that slot (the
// sensitivity of the sum when any single member may change).  Zero on an
// all-zero slot; apply_lambda_floor decides what downstream does with that.
double slot_lambda(const SlotMatrix& matrix, std::size_t t);
std::vector<double> slot_lambdas(const SlotMatrix& matrix);

// Window calibration: within each aligned window of `window` slots, every
// slot gets the sum of the per-slot maxima over that window, which caps the
// summed per-slot privacy loss of the window at 1.
std::vector<double> window_lambdas(const SlotMatrix& matrix, std::size_t window);

// Replaces zero scales with `floor` (one encoding unit by default pipelines)
// so noise-free slots cannot leak exact sums.
std::vector<double> apply_lambda_floor(std::vector<double> lambdas, double floor);

struct SlotError {
  double mu;     // mean of |noise| / (sum + 1)
  double sigma;  // standard deviation of the same ratio
};

// Monte Carlo relative-error profile of a cluster.  Each trial realises the
// full share pipeline: every member contributes G1 - G2 with shares
// calibrated for a fraction alpha of failures.  lambdas[t] == 0 yields
// mu = sigma = 0 for that slot.
std::vector<SlotError> error_series(const SlotMatrix& matrix,
                                    std::span<const double> lambdas, double alpha,
                                    std::size_t trials, RngStream& rng);

// Closed-form expectation of the same ratio (exact, no sampling).
std::vector<double> expected_error_series(const SlotMatrix& matrix,
                                          std::span<const double> lambdas,
                                          double alpha);

struct ErrorSummary {
  std::size_t cluster_size = 0;
  double mean_error = 0;  // mean over clusters of the per-cluster slot mean
  double dev_error = 0;   // standard deviation of the per-cluster means
  double max_error = 0;   // worst slot over all clusters
  std::size_t clusters = 0;
};

// Aggregates per-cluster expected-error series.
ErrorSummary summarize_error(std::size_t cluster_size,
                             std::span<const std::vector<double>> per_cluster_mu);

}  // namespace dpmeter::cluster
