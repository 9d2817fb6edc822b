// Release gate: ten end-to-end checks over the noise pipeline, the masking
// protocol, and the analysis tools.  Each check prints one [PASS]/[FAIL]
// line; the process exits 4 if any failed.  All seeds and tolerances are
// pinned here so a green run is reproducible bit for bit.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dpmeter/clustering.hpp"
#include "dpmeter/noise.hpp"
#include "dpmeter/privacy.hpp"
#include "dpmeter/protocol.hpp"
#include "dpmeter/rng.hpp"
#include "dpmeter/secure_agg.hpp"
#include "dpmeter/trace_gen.hpp"
#include "unit/support/stats.hpp"

using namespace dpmeter;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof buf, f, args);
  va_end(args);
  return buf;
}

// 1. A hundred per-node shares must add up to one Laplace draw.
Outcome check_divisibility() {
  const auto t0 = Clock::now();
  const std::size_t trials = 100000;
  const int members = 100;
  const double lambda = 1200.0;
  RngStream rng(90101);
  const noise::GammaShareParams params(members, noise::LaplaceScale(lambda));
  std::vector<double> sums(trials);
  for (auto& s : sums) {
    double acc = 0;
    for (int i = 0; i < members; ++i) acc += noise::sample_noise_share(params, rng);
    s = acc;
  }
  const double d = teststat::ks_statistic(
      sums, [lambda](double x) { return teststat::laplace_cdf(x, lambda); });
  const double crit = teststat::ks_critical(trials);
  const double secs = seconds_since(t0);
  return {d < crit && secs < 10.0,
          fmt("sum of 100 shares vs Laplace(1200): KS %.5f < %.5f at 1%%, %.1fs",
              d, crit, secs)};
}

// 2. Sampled absolute moments of one share against the closed forms.
Outcome check_share_moments() {
  const auto t0 = Clock::now();
  const std::size_t samples = 1000000;
  bool pass = true;
  double worst_mean_z = 0, worst_var_z = 0;
  for (const int n : {1, 2, 5, 100}) {
    for (const double lambda : {1.0, 1200.0}) {
      const noise::LaplaceScale scale(lambda);
      const noise::GammaShareParams params(n, scale);
      RngStream rng = RngStream::derive(90202, {static_cast<std::uint64_t>(n),
                                                lambda > 1 ? 1u : 0u});
      double s1 = 0, s2 = 0, s3 = 0, s4 = 0;
      for (std::size_t i = 0; i < samples; ++i) {
        const double y = std::fabs(noise::sample_noise_share(params, rng));
        s1 += y;
        s2 += y * y;
        s3 += y * y * y;
        s4 += y * y * y * y;
      }
      const double m = s1 / samples;
      const double raw2 = s2 / samples;
      const double raw3 = s3 / samples;
      const double raw4 = s4 / samples;
      const double var = raw2 - m * m;
      const double cm4 =
          raw4 - 4 * m * raw3 + 6 * m * m * raw2 - 3 * m * m * m * m;

      const noise::AbsMoments closed = noise::gamma_diff_moments(n, scale);
      const double se_mean = std::sqrt(var / samples);
      const double se_var = std::sqrt(std::max(0.0, cm4 - var * var) / samples);
      const double z_mean = std::fabs(m - closed.mean) / se_mean;
      const double z_var = std::fabs(var - closed.variance) / se_var;
      worst_mean_z = std::max(worst_mean_z, z_mean);
      worst_var_z = std::max(worst_var_z, z_var);
      pass = pass && z_mean <= 3.0 && z_var <= 3.0;
    }
  }
  const double secs = seconds_since(t0);
  pass = pass && secs < 60.0;
  return {pass, fmt("8 (n,lambda) settings, 1e6 draws each: worst |z| mean %.2f, "
                    "variance %.2f (limit 3), %.1fs",
                    worst_mean_z, worst_var_z, secs)};
}

// 3. Measured round error against the failure-tolerant bound.
Outcome check_utility_bounds() {
  const int members = 100;
  const double lambda = 1200.0;
  const double aggregate = 100 * 300.0;
  const std::size_t rounds = 100000;
  const noise::LaplaceScale scale(lambda);

  bool pass = true;
  std::string detail;
  double sigma_mu_gap_at_0 = 0;
  for (const double alpha : {0.0, 0.2, 0.5}) {
    const int survivors = members - static_cast<int>(alpha * members);
    const noise::GammaShareParams params(survivors, scale);
    RngStream rng = RngStream::derive(90303, {static_cast<std::uint64_t>(survivors)});
    double acc = 0, acc2 = 0;
    for (std::size_t r = 0; r < rounds; ++r) {
      double total = 0;
      for (int i = 0; i < members; ++i) total += noise::sample_noise_share(params, rng);
      const double ratio = std::fabs(total) / (aggregate + 1.0);
      acc += ratio;
      acc2 += ratio * ratio;
    }
    const double mu = acc / rounds;
    const double sigma = std::sqrt(std::max(0.0, acc2 / rounds - mu * mu));
    const noise::UtilityBound bound = noise::utility_bounds(alpha, scale, aggregate);
    const double rel = std::fabs(mu - bound.mu) / bound.mu;
    pass = pass && rel <= 0.02;
    if (alpha == 0.0) {
      sigma_mu_gap_at_0 = std::fabs(sigma - mu) / mu;
      pass = pass && sigma_mu_gap_at_0 <= 0.02;
    }
    if (alpha == 0.5) pass = pass && sigma < mu;
    detail += fmt("%salpha %.1f: mu off %.2f%%", detail.empty() ? "" : "; ",
                  alpha, 100 * rel);
  }
  detail += fmt("; sigma=mu gap at alpha 0: %.2f%%", 100 * sigma_mu_gap_at_0);
  return {pass, detail};
}

// 4. Two-hypothesis decision rates at four noise calibrations.
Outcome check_ml_rates() {
  const double epsilons[] = {2.0, 1.0, 0.5, 0.1};
  const double targets[] = {0.88, 0.73, 0.62, 0.52};
  const std::size_t trials = 1000000;
  bool pass = true;
  std::string detail;
  for (int i = 0; i < 4; ++i) {
    RngStream rng = RngStream::derive(90404, {static_cast<std::uint64_t>(i)});
    const double rate = privacy::ml_inference_experiment(epsilons[i], trials, rng);
    const double diff = std::fabs(rate - targets[i]);
    pass = pass && diff <= 0.01;
    detail += fmt("%seps %.1f: %.4f (target %.2f)", detail.empty() ? "" : "; ",
                  epsilons[i], rate, targets[i]);
  }
  return {pass, detail};
}

// 5. The worked calibration: 600 W sensitivity at eps 1/2, slot losses.
Outcome check_worked_example() {
  const noise::LaplaceScale lam = noise::calibrate_lambda(600.0, 0.5);
  const std::vector<double> readings = {600.0, 500.0, 200.0};
  const std::vector<double> lambdas(3, lam.value());
  const double expected_eps[] = {0.5, 5.0 / 12.0, 1.0 / 6.0};
  bool pass = std::fabs(lam.value() - 1200.0) <= 1e-12;
  double total = 0;
  for (int i = 0; i < 3; ++i) {
    const double eps = privacy::slot_epsilon(readings[i], lam.value());
    pass = pass && std::fabs(eps - expected_eps[i]) <= 1e-12;
    total += expected_eps[i];
  }
  const double window = privacy::window_epsilon(readings, lambdas, 0, 3);
  pass = pass && std::fabs(window - total) <= 1e-12;
  return {pass, fmt("lambda %.1f, slot losses 0.5, 5/12, 1/6, window %.6f "
                    "(tolerance 1e-12)",
                    lam.value(), window)};
}

// 6. Masked aggregation recovers the live noisy sum exactly, every time.
Outcome check_aggregation_exactness() {
  const auto t0 = Clock::now();
  const std::size_t rounds = 10000;
  RngStream rng(90606);
  std::size_t worst_n = 0;
  for (std::size_t r = 0; r < rounds; ++r) {
    const auto n = static_cast<std::uint32_t>(3 + rng.next_below(198));  // 3..200
    const auto tolerated = static_cast<std::uint32_t>(rng.next_below(n / 3 + 1));
    const double participation =
        1.0 + static_cast<double>(rng.next_below(std::min<std::uint64_t>(n - 1, 30)));
    protocol::ClusterConfig config;
    config.cluster_size = n;
    config.tolerated_failures = tolerated;
    config.participation = participation;
    config.max_meter_watts = 5000;
    config.max_lambda = 5000;

    std::vector<double> readings(n);
    for (auto& v : readings) v = rng.next_double() * 2000.0;
    const noise::LaplaceScale lambda(0.5 + rng.next_double() * 1999.5);

    // distinct failing nodes, at most `tolerated` of them
    std::vector<agg::NodeId> pool(n);
    for (std::uint32_t i = 0; i < n; ++i) pool[i] = i;
    const auto nfail = static_cast<std::size_t>(rng.next_below(tolerated + 1));
    for (std::size_t i = 0; i < nfail; ++i) {
      const auto j = i + rng.next_below(pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    const std::vector<agg::NodeId> failures(pool.begin(), pool.begin() + nfail);

    protocol::ClusterSim sim(config, rng.next_u64());
    const auto res = sim.run_round(static_cast<std::uint32_t>(r % 144), readings,
                                   lambda, failures);
    if (res.failed) {
      return {false, fmt("round %zu (N=%u, failures=%zu) failed: %s", r, n,
                         nfail, res.failure_reason.c_str())};
    }
    const agg::Modulus& m = sim.modulus();
    std::uint64_t residue = 0;
    double plain_sum = 0;
    for (const double v : res.live_noisy_values) {
      residue = m.add(residue, sim.codec().encode(v, m));
      plain_sum += v;
    }
    if (residue != res.recovered_residue) {
      return {false, fmt("round %zu (N=%u): residue mismatch", r, n)};
    }
    // fixed-point: each term rounds to 1/scale, so half a unit per node
    const double quantum = (0.5 * res.live_count + 1.0) / sim.codec().scale;
    if (std::fabs(res.recovered_noisy_sum - plain_sum) > quantum) {
      return {false, fmt("round %zu (N=%u): decoded sum off by %.6f", r, n,
                         res.recovered_noisy_sum - plain_sum)};
    }
    worst_n = std::max<std::size_t>(worst_n, n);
  }
  return {true, fmt("10000 random rounds, N up to %zu, failures up to N/3: "
                    "all residues bit-exact, %.1fs",
                    worst_n, seconds_since(t0))};
}

// 7. Isolation probability: simulation vs the closed form.
Outcome check_attack_probability() {
  const auto t0 = Clock::now();
  struct Case {
    std::uint32_t n, t;
    double w;
    std::uint64_t trials;
  };
  const Case cases[] = {{100, 50, 30.0, 60000000}, {300, 150, 90.0, 1000000}};
  bool pass = true;
  std::string detail;
  for (const auto& c : cases) {
    const double p = protocol::collusion_success_prob(c.n, c.t, c.w);
    protocol::AdversaryConfig adv;
    adv.colluding = c.t;
    adv.lying = false;
    RngStream rng = RngStream::derive(90707, {c.n});
    const double sim = protocol::simulate_attack(c.n, c.w, adv, c.trials, rng);
    const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(c.trials));
    const bool ok = std::fabs(sim - p) <= 3.0 * se;
    pass = pass && ok;
    detail += fmt("%s(N=%u,T=%u,w=%g): formula %.3e, sim %.3e",
                  detail.empty() ? "" : "; ", c.n, c.t, c.w, p, sim);
  }
  // The rounded figure 1.8e-8 circulates for the first setting; the exact
  // formula value is reported above and the gap is expected.
  detail += fmt("; %.1fs", seconds_since(t0));
  return {pass, detail};
}

struct Corpus {
  std::vector<tracegen::CorpusEntry> entries;
  std::vector<std::uint32_t> ids;
  std::vector<std::pair<std::uint32_t, double>> daily;
  std::map<std::uint32_t, std::vector<double>> slots;  // 144 mean-watt slots
};

Corpus build_corpus(std::size_t households, std::uint64_t seed) {
  Corpus c;
  c.entries = tracegen::generate_corpus(households, tracegen::DayConfig{11, false},
                                        tracegen::default_catalog(), seed, 0);
  for (const auto& entry : c.entries) {
    const std::uint32_t id = entry.household.id;
    c.ids.push_back(id);
    c.daily.emplace_back(id, tracegen::daily_mean_watts(entry.trace));
    c.slots[id] = tracegen::resample(entry.trace.minutes, 10);
  }
  return c;
}

double mean_expected_error(const Corpus& corpus,
                           const std::vector<cluster::Cluster>& clusters) {
  std::vector<std::vector<double>> per_cluster;
  per_cluster.reserve(clusters.size());
  for (const auto& cl : clusters) {
    cluster::SlotMatrix matrix;
    matrix.reserve(cl.members.size());
    for (const auto id : cl.members) matrix.push_back(corpus.slots.at(id));
    const auto lambdas =
        cluster::apply_lambda_floor(cluster::slot_lambdas(matrix), 0.1);
    per_cluster.push_back(cluster::expected_error_series(matrix, lambdas, 0.0));
  }
  return cluster::summarize_error(clusters.front().members.size(), per_cluster)
      .mean_error;
}

// 8. Grouping by consumption helps, and bigger clusters help.
Outcome check_clustering_orderings(const Corpus& corpus) {
  const auto t0 = Clock::now();
  const std::size_t sizes[] = {50, 100, 200, 400};
  const std::size_t shuffles = 30;

  std::map<std::size_t, double> random_mean;
  for (const std::size_t size : sizes) {
    std::vector<std::vector<double>> all;
    for (std::size_t s = 0; s < shuffles; ++s) {
      RngStream rng = RngStream::derive(90808, {size, s});
      const auto clusters = cluster::random_clusters(corpus.ids, size, rng);
      for (const auto& cl : clusters) {
        cluster::SlotMatrix matrix;
        for (const auto id : cl.members) matrix.push_back(corpus.slots.at(id));
        const auto lambdas =
            cluster::apply_lambda_floor(cluster::slot_lambdas(matrix), 0.1);
        all.push_back(cluster::expected_error_series(matrix, lambdas, 0.0));
      }
    }
    random_mean[size] = cluster::summarize_error(size, all).mean_error;
  }
  const double consumption_100 =
      mean_expected_error(corpus, cluster::consumption_clusters(corpus.daily, 100));

  bool pass = consumption_100 <= random_mean[100];
  int inversions = 0;
  for (std::size_t i = 1; i < 4; ++i) {
    if (random_mean[sizes[i]] > random_mean[sizes[i - 1]]) ++inversions;
  }
  const double secs = seconds_since(t0);
  pass = pass && inversions <= 1 && secs < 300.0;
  return {pass,
          fmt("random mean error N 50/100/200/400: %.4f/%.4f/%.4f/%.4f "
              "(%d inversions), consumption at 100: %.4f, %.1fs",
              random_mean[50], random_mean[100], random_mean[200],
              random_mean[400], inversions, consumption_100, secs)};
}

// 9. Start-time inference: the informed adversary wins, blind guessing loses.
Outcome check_adversary_ordering(const Corpus& corpus) {
  const auto t0 = Clock::now();
  const std::size_t cluster_size = 100;

  RngStream cl_rng = RngStream::derive(90909, {1});
  const auto clusters = cluster::random_clusters(corpus.ids, cluster_size, cl_rng);
  std::map<std::uint32_t, std::size_t> cluster_of;
  std::vector<std::vector<double>> cluster_lambdas(clusters.size());
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    cluster::SlotMatrix matrix;
    for (const auto id : clusters[c].members) {
      cluster_of[id] = c;
      matrix.push_back(corpus.slots.at(id));
    }
    cluster_lambdas[c] =
        cluster::apply_lambda_floor(cluster::slot_lambdas(matrix), 0.1);
  }

  struct Instance {
    std::uint32_t household;
    std::vector<double> slots;
    privacy::ApplianceSignature sig;
  };
  std::map<std::string, std::vector<Instance>> by_appliance;
  for (const auto& entry : corpus.entries) {
    const std::uint32_t id = entry.household.id;
    if (!cluster_of.count(id)) continue;  // dropped by the partition
    for (const auto& comp : entry.trace.components) {
      bool active = false;
      for (const auto& spec : entry.household.appliances) {
        if (spec.name == comp.name) {
          active = spec.klass == tracegen::ApplianceClass::Active;
          break;
        }
      }
      if (!active) continue;
      const auto slots = tracegen::resample(comp.minutes, 10);
      bool any = false;
      for (const double v : slots) any = any || v != 0;
      if (!any) continue;
      auto sig = privacy::extract_signature(slots);
      if (144 - sig.duration() < 2) continue;
      by_appliance[comp.name].push_back({id, slots, std::move(sig)});
    }
  }

  const std::size_t kPerAppliance = 400;
  double err[4] = {0, 0, 0, 0};
  std::size_t used = 0;
  for (auto& [name, instances] : by_appliance) {
    if (instances.size() < 25) continue;
    std::vector<double> hist(144, 0.0);
    for (const auto& inst : instances) hist[inst.sig.start_slot] += 1;

    const std::size_t take = std::min(kPerAppliance, instances.size());
    for (std::size_t i = 0; i < take; ++i) {
      const Instance& inst = instances[i];
      RngStream rng = RngStream::derive(90910, {used});
      const auto& lam = cluster_lambdas[cluster_of.at(inst.household)];
      const auto noisy = privacy::sanitize_series(inst.slots, lam, rng);
      const std::size_t candidates = 144 - inst.sig.duration();
      std::vector<double> prior(candidates);
      double mass = 0;
      for (std::size_t k = 0; k < candidates; ++k) {
        prior[k] = hist[k] + 1;
        mass += prior[k];
      }
      for (double& p : prior) p /= mass;

      const privacy::Adversary advs[] = {
          privacy::Adversary::Random, privacy::Adversary::Frequency,
          privacy::Adversary::Bayes, privacy::Adversary::BayesFrequency};
      for (int a = 0; a < 4; ++a) {
        const bool wants_prior = a == 1 || a == 3;
        const auto guess = privacy::infer_start(advs[a], noisy, inst.sig, lam,
                                                wants_prior ? &prior : nullptr, rng);
        err[a] += privacy::inference_accuracy_hours(guess, inst.sig.start_slot, 10.0);
      }
      ++used;
    }
  }
  for (double& e : err) e /= static_cast<double>(used);

  const double rnd = err[0], freq = err[1], bayes = err[2], bf = err[3];
  bool pass = used >= 500;
  pass = pass && bf <= freq && bf <= bayes && bf <= rnd;
  pass = pass && rnd >= freq && rnd >= bayes;
  return {pass, fmt("%zu trace-days: mean error hours random %.2f, frequency "
                    "%.2f, bayes %.2f, bayes+frequency %.2f, %.1fs",
                    used, rnd, freq, bayes, bf, seconds_since(t0))};
}

// 10. Doubling the noise scale doubles the measured error.
Outcome check_scaling() {
  const int members = 100;
  const double aggregate = 100 * 300.0;
  const std::size_t rounds = 100000;
  double mu[2] = {0, 0};
  const double lambdas[2] = {600.0, 1200.0};
  for (int k = 0; k < 2; ++k) {
    const noise::GammaShareParams params(members, noise::LaplaceScale(lambdas[k]));
    RngStream rng = RngStream::derive(91010, {static_cast<std::uint64_t>(k)});
    double acc = 0;
    for (std::size_t r = 0; r < rounds; ++r) {
      double total = 0;
      for (int i = 0; i < members; ++i) total += noise::sample_noise_share(params, rng);
      acc += std::fabs(total) / (aggregate + 1.0);
    }
    mu[k] = acc / rounds;
  }
  const double ratio = mu[1] / mu[0];
  const bool pass = std::fabs(ratio / 2.0 - 1.0) <= 0.015;
  return {pass, fmt("mu(1200)/mu(600) = %.4f (want 2 within 1.5%%)", ratio)};
}

}  // namespace

int main() {
  int failures = 0;
  const auto run = [&failures](int index, const char* name, const Outcome& o) {
    std::printf("[%s] %2d %s: %s\n", o.pass ? "PASS" : "FAIL", index, name,
                o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  };

  run(1, "noise divisibility", check_divisibility());
  run(2, "share moments", check_share_moments());
  run(3, "failure-tolerant utility", check_utility_bounds());
  run(4, "decision-rate ceiling", check_ml_rates());
  run(5, "worked calibration", check_worked_example());
  run(6, "aggregation exactness", check_aggregation_exactness());
  run(7, "isolation probability", check_attack_probability());

  const Corpus corpus = build_corpus(3000, 424242);
  run(8, "clustering orderings", check_clustering_orderings(corpus));
  run(9, "adversary ordering", check_adversary_ordering(corpus));
  run(10, "noise scaling", check_scaling());

  if (failures) {
    std::printf("%d of 10 checks failed\n", failures);
    return 4;
  }
  std::printf("all 10 checks passed\n");
  return 0;
}
