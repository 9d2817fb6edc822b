#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "dpmeter/noise.hpp"
#include "dpmeter/protocol.hpp"
#include "dpmeter/rng.hpp"
#include "unit/support/stats.hpp"

using namespace dpmeter;
using namespace dpmeter::protocol;

namespace {

ClusterConfig small_config(std::uint32_t n, std::uint32_t tolerated, double w) {
  ClusterConfig cfg;
  cfg.cluster_size = n;
  cfg.tolerated_failures = tolerated;
  cfg.participation = w;
  cfg.max_meter_watts = 5000;
  cfg.max_lambda = 5000;
  return cfg;
}

std::vector<double> ramp(std::uint32_t n, double base) {
  std::vector<double> x(n);
  for (std::uint32_t i = 0; i < n; ++i) x[i] = base + 10.0 * i;
  return x;
}

}  // namespace

TEST_SUITE("protocol") {
  TEST_CASE("config validation") {
    CHECK_THROWS_AS(ClusterSim(small_config(1, 0, 1), 1), std::invalid_argument);
    CHECK_THROWS_AS(ClusterSim(small_config(10, 10, 3), 1), std::invalid_argument);
    CHECK_THROWS_AS(ClusterSim(small_config(10, 0, 0), 1), std::invalid_argument);
    CHECK_THROWS_AS(ClusterSim(small_config(10, 0, 10), 1), std::invalid_argument);
    CHECK_NOTHROW(ClusterSim(small_config(10, 3, 9), 1));
  }

  TEST_CASE("round input validation") {
    ClusterSim sim(small_config(6, 2, 3), 5);
    const std::vector<double> x(6, 100.0);
    CHECK_THROWS_AS(
        sim.run_round(0, std::vector<double>(5, 1.0), noise::LaplaceScale(1), {}),
        std::invalid_argument);
    CHECK_THROWS_AS(sim.run_round(0, x, noise::LaplaceScale(9999), {}),
                    std::invalid_argument);
    const std::vector<agg::NodeId> dup = {1, 1};
    CHECK_THROWS_AS(sim.run_round(0, x, noise::LaplaceScale(1), dup),
                    std::invalid_argument);
    const std::vector<agg::NodeId> oob = {7};
    CHECK_THROWS_AS(sim.run_round(0, x, noise::LaplaceScale(1), oob),
                    std::invalid_argument);
    const std::vector<double> neg = {-1, 0, 0, 0, 0, 0};
    CHECK_THROWS_AS(sim.run_round(0, neg, noise::LaplaceScale(1), {}),
                    std::invalid_argument);
  }

  TEST_CASE("zero-noise round recovers the plain sum") {
    ClusterSim sim(small_config(10, 0, 4), 7);
    const auto x = ramp(10, 50.0);
    RoundOptions options;
    options.zero_noise = true;
    const auto res = sim.run_round(0, x, noise::LaplaceScale(100), {}, options);
    CHECK_FALSE(res.failed);
    const double plain = std::accumulate(x.begin(), x.end(), 0.0);
    CHECK(res.recovered_noisy_sum ==
          doctest::Approx(plain).epsilon(1e-9));
    CHECK(res.true_sum == doctest::Approx(plain));
    CHECK(res.live_count == 10);
    CHECK(res.messages_round1 == 10);
    CHECK(res.messages_round2 == 10);
    CHECK(res.broadcasts == 1);
  }

  TEST_CASE("announced dropouts are recovered within tolerance") {
    ClusterSim sim(small_config(12, 4, 5), 11);
    const auto x = ramp(12, 100.0);
    const std::vector<agg::NodeId> failures = {2, 5, 9};
    const auto res = sim.run_round(3, x, noise::LaplaceScale(30), failures);
    CHECK_FALSE(res.failed);
    CHECK(res.live_count == 9);
    CHECK(res.messages_round1 == 9);
    CHECK(res.messages_round2 == 9);
    // live list is ascending and excludes the failures
    CHECK(std::is_sorted(res.live_nodes.begin(), res.live_nodes.end()));
    for (const auto id : failures) {
      CHECK(std::find(res.live_nodes.begin(), res.live_nodes.end(), id) ==
            res.live_nodes.end());
    }
    // recovered equals the sum the live nodes actually encrypted, up to the
    // fixed-point quantum each encode applies
    double expect = 0;
    for (const double v : res.live_noisy_values) expect += v;
    CHECK(std::abs(res.recovered_noisy_sum - expect) <=
          (0.5 * res.live_count + 1.0) / sim.codec().scale);
  }

  TEST_CASE("recovered residue is bit-exact against recomputation") {
    ClusterSim sim(small_config(16, 5, 6), 77);
    const auto& m = sim.modulus();
    const auto& codec = sim.codec();
    RngStream rng(4242);
    for (std::uint32_t slot = 0; slot < 25; ++slot) {
      std::vector<double> x(16);
      for (double& v : x) v = rng.next_double() * 4000.0;
      std::vector<agg::NodeId> failures;
      for (agg::NodeId id = 0; id < 16; ++id) {
        if (failures.size() < 5 && rng.next_double() < 0.2) failures.push_back(id);
      }
      const auto res = sim.run_round(slot, x, noise::LaplaceScale(200), failures);
      REQUIRE_FALSE(res.failed);
      std::uint64_t expect = 0;
      for (const double v : res.live_noisy_values) {
        expect = m.add(expect, codec.encode(v, m));
      }
      CHECK(expect == res.recovered_residue);
    }
  }

  TEST_CASE("aggregate noise is one laplace draw when failures hit the budget") {
    // With exactly M failures the N - M survivors' shares sum to a full
    // Laplace(lambda): check the recovered-minus-true distribution.
    const std::uint32_t n = 12, tolerated = 4;
    ClusterSim sim(small_config(n, tolerated, 5), 909);
    const double lambda = 200.0;
    std::vector<double> diffs;
    diffs.reserve(1500);
    const std::vector<agg::NodeId> failures = {0, 3, 7, 11};
    const std::vector<double> x(n, 1000.0);
    for (std::uint32_t slot = 0; slot < 1500; ++slot) {
      const auto res = sim.run_round(slot, x, noise::LaplaceScale(lambda), failures);
      REQUIRE_FALSE(res.failed);
      diffs.push_back(res.recovered_noisy_sum - res.true_sum);
    }
    const double d = teststat::ks_statistic(
        diffs, [&](double v) { return teststat::laplace_cdf(v, lambda); });
    CHECK(d < teststat::ks_critical(diffs.size()));
  }

  TEST_CASE("rounds are deterministic in the seed and differ across slots") {
    const auto cfg = small_config(8, 2, 3);
    const auto x = ramp(8, 20.0);
    ClusterSim a(cfg, 123);
    ClusterSim b(cfg, 123);
    ClusterSim c(cfg, 124);
    const auto ra = a.run_round(5, x, noise::LaplaceScale(50), {});
    const auto rb = b.run_round(5, x, noise::LaplaceScale(50), {});
    const auto rc = c.run_round(5, x, noise::LaplaceScale(50), {});
    CHECK(ra.recovered_residue == rb.recovered_residue);
    CHECK(ra.live_noisy_values == rb.live_noisy_values);
    CHECK(ra.recovered_residue != rc.recovered_residue);
    const auto ra2 = a.run_round(6, x, noise::LaplaceScale(50), {});
    CHECK(ra.recovered_noisy_sum != ra2.recovered_noisy_sum);
  }

  TEST_CASE("dying between rounds fails loudly, never silently") {
    ClusterSim sim(small_config(10, 3, 4), 31);
    const std::vector<double> x(10, 500.0);
    RoundOptions options;
    options.die_after_round1 = {4};
    const auto res = sim.run_round(0, x, noise::LaplaceScale(40), {}, options);
    CHECK(res.failed);
    CHECK(res.failure_reason.find("dropout") != std::string::npos);
    CHECK(std::isnan(res.recovered_noisy_sum));
    CHECK(res.messages_round2 == res.live_count - 1);
  }

  TEST_CASE("single-round variant works clean but cannot survive dropouts") {
    // participation 8 of 9 peers: some live node holds a key toward any
    // given dropout with overwhelming probability
    auto cfg = small_config(10, 0, 8);
    cfg.robust = false;
    ClusterSim sim(cfg, 47);
    const auto x = ramp(10, 30.0);
    RoundOptions options;
    options.zero_noise = true;
    const auto ok = sim.run_round(0, x, noise::LaplaceScale(10), {}, options);
    CHECK_FALSE(ok.failed);
    CHECK(ok.broadcasts == 0);
    CHECK(ok.messages_round2 == 0);
    CHECK(ok.recovered_noisy_sum ==
          doctest::Approx(std::accumulate(x.begin(), x.end(), 0.0)).epsilon(1e-9));

    // One announced dropout: the dummy keys toward it never cancel, and
    // without a second round nothing strips them out.  Depending on where
    // the spoiled residue lands, the round either fails outright or decodes
    // to a value far from what the live nodes sent; either is acceptable,
    // a quietly correct answer is not.
    const std::vector<agg::NodeId> failures = {2};
    const auto bad = sim.run_round(1, x, noise::LaplaceScale(10), failures, options);
    double live_sum = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (i != 2) live_sum += x[i];
    }
    CHECK((bad.failed || std::abs(bad.recovered_noisy_sum - live_sum) > 1.0));
  }

  TEST_CASE("wrapper runs a fresh cluster for one round") {
    const auto cfg = small_config(6, 0, 2);
    const std::vector<double> x(6, 10.0);
    RoundOptions options;
    options.zero_noise = true;
    const auto res = run_round(cfg, x, noise::LaplaceScale(5), {}, 99, options);
    CHECK_FALSE(res.failed);
    CHECK(res.recovered_noisy_sum == doctest::Approx(60.0).epsilon(1e-9));
  }

  TEST_CASE("attack closed forms recompute from first principles") {
    // success = every honest peer of the target unselected
    auto direct = [](std::uint32_t n, std::uint32_t t, double w) {
      return std::exp((n - t - 1.0) * std::log1p(-w / (n - 1.0)));
    };
    CHECK(collusion_success_prob(100, 50, 30) ==
          doctest::Approx(direct(100, 50, 30)).epsilon(1e-12));
    CHECK(collusion_success_prob(300, 150, 30) ==
          doctest::Approx(direct(300, 150, 30)).epsilon(1e-12));
    // orders: more colluders help, more participation hurts
    CHECK(collusion_success_prob(100, 60, 30) > collusion_success_prob(100, 50, 30));
    CHECK(collusion_success_prob(100, 50, 40) < collusion_success_prob(100, 50, 30));
    // k slots multiply
    CHECK(k_slot_compromise_prob(100, 50, 30, 3) ==
          doctest::Approx(std::pow(collusion_success_prob(100, 50, 30), 3.0)));
    // a lying aggregator shrinks the honest pool by the claimed set
    CHECK(lying_supplier_success_prob(100, 50, 30, 30) ==
          doctest::Approx(direct(100, 80, 30)).epsilon(1e-12));
    CHECK(lying_supplier_success_prob(100, 50, 30, 30) >
          collusion_success_prob(100, 50, 30));
    // t = n-1 leaves the target no honest peer at all: certainty, not an
    // input error; t beyond that is one
    CHECK(collusion_success_prob(100, 99, 30) == 1.0);
    CHECK_THROWS_AS(collusion_success_prob(100, 100, 30), std::invalid_argument);
    CHECK_THROWS_AS(collusion_success_prob(100, 50, 0), std::invalid_argument);
  }

  TEST_CASE("attack simulation agrees with the closed forms") {
    const std::uint32_t n = 12;
    const double w = 4.0;
    const std::uint64_t trials = 200000;

    SUBCASE("plain collusion") {
      AdversaryConfig adv;
      adv.colluding = 6;
      adv.lying = false;
      RngStream rng(777);
      const double sim = simulate_attack(n, w, adv, trials, rng);
      const double p = collusion_success_prob(n, 6, w);
      const double se = std::sqrt(p * (1 - p) / static_cast<double>(trials));
      CHECK(std::abs(sim - p) < 4.0 * se);
    }
    SUBCASE("lying aggregator") {
      AdversaryConfig adv;
      adv.colluding = 6;
      adv.claimable = 2;
      adv.lying = true;
      RngStream rng(778);
      const double sim = simulate_attack(n, w, adv, trials, rng);
      const double p = lying_supplier_success_prob(n, 6, 2, w);
      const double se = std::sqrt(p * (1 - p) / static_cast<double>(trials));
      CHECK(std::abs(sim - p) < 4.0 * se);
    }
    SUBCASE("two slots") {
      AdversaryConfig adv;
      adv.colluding = 6;
      adv.lying = false;
      adv.slots = 2;
      RngStream rng(779);
      const double sim = simulate_attack(n, w, adv, trials, rng);
      const double p = k_slot_compromise_prob(n, 6, w, 2);
      const double se = std::sqrt(p * (1 - p) / static_cast<double>(trials));
      CHECK(std::abs(sim - p) < 4.0 * se);
    }
    SUBCASE("honest aggregator cannot claim") {
      AdversaryConfig adv;
      adv.colluding = 6;
      adv.claimable = 2;
      adv.lying = false;  // forces the claimable set to stay home
      RngStream rng(780);
      const double sim = simulate_attack(n, w, adv, trials, rng);
      const double p = collusion_success_prob(n, 6, w);
      const double se = std::sqrt(p * (1 - p) / static_cast<double>(trials));
      CHECK(std::abs(sim - p) < 4.0 * se);
    }
  }
}
