#include "dpmeter/privacy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dpmeter::privacy {

double slot_epsilon(double x, double lambda) {
  if (!(lambda > 0)) throw std::invalid_argument("slot_epsilon: lambda must be > 0");
  if (!(x >= 0)) throw std::invalid_argument("slot_epsilon: x must be >= 0");
  return x / lambda;
}

double window_epsilon(std::span<const double> series,
                      std::span<const double> lambdas, std::size_t start,
                      std::size_t count) {
  if (series.size() != lambdas.size()) {
    throw std::invalid_argument("window_epsilon: series/lambda size mismatch");
  }
  if (start > series.size() || count > series.size() - start) {
    throw std::invalid_argument("window_epsilon: window out of range");
  }
  double eps = 0;
  for (std::size_t t = start; t < start + count; ++t) {
    eps += slot_epsilon(series[t], lambdas[t]);
  }
  return eps;
}

EpsilonReport presence_epsilon(const std::string& subject,
                               std::span<const double> component,
                               std::span<const double> lambdas, std::size_t start,
                               std::size_t count) {
  EpsilonReport r;
  r.subject = subject;
  r.start = start;
  r.window_slots = count;
  r.per_slot.reserve(count);
  for (std::size_t t = start; t < start + count; ++t) {
    if (t >= component.size() || t >= lambdas.size()) {
      throw std::invalid_argument("presence_epsilon: window out of range");
    }
    r.per_slot.push_back(slot_epsilon(component[t], lambdas[t]));
    r.epsilon += r.per_slot.back();
  }
  return r;
}

ApplianceSignature extract_signature(std::span<const double> component) {
  std::size_t first = component.size();
  std::size_t last = 0;
  for (std::size_t t = 0; t < component.size(); ++t) {
    if (component[t] != 0) {
      first = std::min(first, t);
      last = t;
    }
  }
  if (first == component.size()) {
    throw std::invalid_argument("extract_signature: component never runs");
  }
  ApplianceSignature sig;
  sig.start_slot = first;
  sig.values.assign(component.begin() + first, component.begin() + last + 1);
  return sig;
}

std::vector<double> sanitize_series(std::span<const double> series,
                                    std::span<const double> lambdas,
                                    RngStream& rng) {
  if (series.size() != lambdas.size()) {
    throw std::invalid_argument("sanitize_series: series/lambda size mismatch");
  }
  std::vector<double> out(series.begin(), series.end());
  for (std::size_t t = 0; t < out.size(); ++t) {
    if (lambdas[t] == 0) continue;
    out[t] += noise::sample_laplace(noise::LaplaceScale(lambdas[t]), rng);
  }
  return out;
}

Posterior bayes_posterior(std::span<const double> noisy,
                          const ApplianceSignature& signature,
                          std::span<const double> lambdas,
                          const std::vector<double>* prior) {
  if (noisy.size() != lambdas.size()) {
    throw std::invalid_argument("bayes_posterior: series/lambda size mismatch");
  }
  const std::size_t n = noisy.size();
  const std::size_t d = signature.duration();
  if (n < d + 1) throw std::invalid_argument("bayes_posterior: series shorter than signature");
  const std::size_t candidates = n - d;
  if (prior && prior->size() != candidates) {
    throw std::invalid_argument("bayes_posterior: prior size mismatch");
  }

  // Only the d+1 slots covered by the candidate placement differ between
  // hypotheses; all other slots contribute a common factor that cancels.
  // Work with log-likelihood differences to stay stable at tiny scales.
  std::vector<double> logp(candidates);
  for (std::size_t i = 0; i < candidates; ++i) {
    double acc = 0;
    for (std::size_t k = 0; k <= d; ++k) {
      const double l = lambdas[i + k];
      if (!(l > 0)) throw std::invalid_argument("bayes_posterior: lambda must be > 0");
      // log f(noisy - placed) - log f(noisy): the baseline term cancels the
      // zero-hypothesis contribution of uncovered slots.
      acc += (std::fabs(noisy[i + k]) - std::fabs(noisy[i + k] - signature.values[k])) / l;
    }
    if (prior) {
      const double p = (*prior)[i];
      if (!(p >= 0)) throw std::invalid_argument("bayes_posterior: negative prior");
      acc = p > 0 ? acc + std::log(p) : -std::numeric_limits<double>::infinity();
    }
    logp[i] = acc;
  }

  const double mx = *std::max_element(logp.begin(), logp.end());
  if (!std::isfinite(mx)) {
    throw std::invalid_argument("bayes_posterior: prior assigns no mass to any candidate");
  }
  Posterior post;
  post.probs.resize(candidates);
  double total = 0;
  for (std::size_t i = 0; i < candidates; ++i) {
    post.probs[i] = std::exp(logp[i] - mx);
    total += post.probs[i];
  }
  for (double& p : post.probs) p /= total;
  return post;
}

std::size_t posterior_median(const Posterior& posterior) {
  if (posterior.probs.empty()) throw std::invalid_argument("posterior_median: empty posterior");
  double cum = 0;
  for (std::size_t i = 0; i < posterior.probs.size(); ++i) {
    cum += posterior.probs[i];
    if (cum >= 0.5) return i;
  }
  return posterior.probs.size() - 1;
}

std::size_t infer_start(Adversary adversary, std::span<const double> noisy,
                        const ApplianceSignature& signature,
                        std::span<const double> lambdas,
                        const std::vector<double>* prior, RngStream& rng) {
  const std::size_t n = noisy.size();
  const std::size_t d = signature.duration();
  if (n < d + 1) throw std::invalid_argument("infer_start: series shorter than signature");
  const std::size_t candidates = n - d;

  switch (adversary) {
    case Adversary::Random:
      return rng.next_below(candidates);
    case Adversary::Frequency: {
      if (!prior || prior->size() != candidates) {
        throw std::invalid_argument("infer_start: frequency adversary needs a prior");
      }
      return static_cast<std::size_t>(
          std::max_element(prior->begin(), prior->end()) - prior->begin());
    }
    case Adversary::Bayes:
      return posterior_median(bayes_posterior(noisy, signature, lambdas, nullptr));
    case Adversary::BayesFrequency: {
      if (!prior || prior->size() != candidates) {
        throw std::invalid_argument("infer_start: frequency adversary needs a prior");
      }
      return posterior_median(bayes_posterior(noisy, signature, lambdas, prior));
    }
  }
  throw std::logic_error("infer_start: unknown adversary");
}

double inference_accuracy_hours(std::size_t t_estimate, std::size_t t_true,
                                double slot_minutes) {
  if (!(slot_minutes > 0)) {
    throw std::invalid_argument("inference_accuracy_hours: slot_minutes must be > 0");
  }
  const double diff = t_estimate > t_true
                          ? static_cast<double>(t_estimate - t_true)
                          : static_cast<double>(t_true - t_estimate);
  return diff * slot_minutes / 60.0;
}

double ml_inference_experiment(double epsilon, std::size_t trials, RngStream& rng) {
  if (!(epsilon >= 0)) throw std::invalid_argument("ml_inference_experiment: epsilon >= 0");
  if (trials == 0) throw std::invalid_argument("ml_inference_experiment: trials must be > 0");

  // Noise scale for a unit-sensitivity count query.  epsilon = 0 means
  // infinite scale; the observation then carries nothing and every decision
  // is a fair coin.
  const bool degenerate = epsilon == 0;
  const double lambda = degenerate ? 1.0 : 1.0 / epsilon;
  const noise::LaplaceScale scale(lambda);

  std::uint64_t eligible = 0;
  std::uint64_t correct = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    const bool present = rng.next_double() < 0.5;  // count is x+1 vs x
    const double truth = present ? 1.0 : 0.0;
    const double observed = degenerate
                                ? truth  // placeholder; decision below is a coin
                                : truth + noise::sample_laplace(scale, rng);

    bool decide_present;
    if (degenerate) {
      decide_present = rng.next_double() < 0.5;
      ++eligible;
      correct += (decide_present == present) ? 1 : 0;
      continue;
    }

    // Likelihood ratio is extremal exactly when the observation falls
    // outside (x, x+1); only there does the decision achieve the bound,
    // so only those trials enter the estimate.
    if (observed > 0.0 && observed < 1.0) continue;
    if (observed == 0.5) {
      decide_present = rng.next_double() < 0.5;  // tie rule, measure zero
    } else {
      decide_present = std::fabs(observed - 1.0) < std::fabs(observed - 0.0);
    }
    ++eligible;
    correct += (decide_present == present) ? 1 : 0;
  }
  if (eligible == 0) throw std::runtime_error("ml_inference_experiment: no eligible trials");
  return static_cast<double>(correct) / static_cast<double>(eligible);
}

}  // namespace dpmeter::privacy
