#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dpmeter/noise.hpp"
#include "dpmeter/rng.hpp"

namespace dpmeter::privacy {

// Privacy loss of one slot for a subject whose reading is x under
// Laplace(lambda) noise: x / lambda.  lambda must be > 0.
double slot_epsilon(double x, double lambda);

// Sequential composition over `count` slots starting at `start`: the sum of
// the per-slot losses.  An empty window is 0.
double window_epsilon(std::span<const double> series,
                      std::span<const double> lambdas, std::size_t start,
                      std::size_t count);

struct EpsilonReport {
  std::string subject;
  std::size_t start = 0;
  std::size_t window_slots = 0;
  double epsilon = 0;
  std::vector<double> per_slot;
};

// Presence privacy of an appliance: how well its whole consumption pattern
// is hidden inside a window, i.e. the composed epsilon of its component
// series over [start, start+count).
EpsilonReport presence_epsilon(const std::string& subject,
                               std::span<const double> component,
                               std::span<const double> lambdas, std::size_t start,
                               std::size_t count);

// Consumption pattern between the first and last nonzero slot of a
// component series.  values has duration+1 entries; first and last are
// nonzero, interior zeros are kept.
struct ApplianceSignature {
  std::vector<double> values;
  std::size_t start_slot = 0;  // where it truly sat in the source series

  std::size_t duration() const { return values.size() - 1; }
};

ApplianceSignature extract_signature(std::span<const double> component);

// Adds independent Laplace(lambdas[t]) noise per slot; zero scales pass the
// value through.
std::vector<double> sanitize_series(std::span<const double> series,
                                    std::span<const double> lambdas,
                                    RngStream& rng);

enum class Adversary {
  Random,          // uniform guess over the candidate starts
  Frequency,       // most common start slot in the prior
  Bayes,           // posterior median under the Laplace noise model
  BayesFrequency,  // Bayes with the frequency prior
};

struct Posterior {
  std::vector<double> probs;  // one per candidate start, sums to 1
};

// Posterior over candidate starts 0 .. n - duration - 1 given the noisy
// series: P(i) proportional to prior(i) * prod_t f(noisy[t] - V_i[t]) where
// V_i is the signature placed at i and f the Laplace density with the
// slot's scale.  Products run in log space.  prior == nullptr is uniform.
Posterior bayes_posterior(std::span<const double> noisy,
                          const ApplianceSignature& signature,
                          std::span<const double> lambdas,
                          const std::vector<double>* prior);

// Smallest index whose cumulative posterior reaches 1/2.
std::size_t posterior_median(const Posterior& posterior);

// The adversary's start-slot estimate.  prior is required for the
// frequency-based adversaries and must have one entry per candidate.
std::size_t infer_start(Adversary adversary, std::span<const double> noisy,
                        const ApplianceSignature& signature,
                        std::span<const double> lambdas,
                        const std::vector<double>* prior, RngStream& rng);

// |t_estimate - t_true| expressed in hours for slot_minutes-long slots.
double inference_accuracy_hours(std::size_t t_estimate, std::size_t t_true,
                                double slot_minutes);

// Two-hypothesis decision experiment: a count is either x or x+1, published
// under Laplace(1/epsilon) noise, and the adversary picks the likelier one.
// Returns the empirical success rate over the observations on which the
// likelihood ratio is extremal (outside the open interval between the two
// hypotheses), which estimates the adversary's best-case success
// probability 1/(1+e^-epsilon).  The unconditional rate is lower:
// 1 - e^(-epsilon/2)/2.
double ml_inference_experiment(double epsilon, std::size_t trials, RngStream& rng);

}  // namespace dpmeter::privacy
