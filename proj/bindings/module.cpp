// Python bindings for the core operations: noise calibration and moments,
// a full masked aggregation round, attack probabilities, trace synthesis at
// slot granularity, cluster noise scales and the privacy-loss helpers.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <string>
#include <vector>

#include "dpmeter/clustering.hpp"
#include "dpmeter/noise.hpp"
#include "dpmeter/privacy.hpp"
#include "dpmeter/protocol.hpp"
#include "dpmeter/rng.hpp"
#include "dpmeter/trace_gen.hpp"

namespace py = pybind11;
using namespace dpmeter;

PYBIND11_MODULE(_core, m) {
  m.doc() = "differentially private smart-meter aggregation core";

  m.def(
      "calibrate_lambda",
      [](double sensitivity, double epsilon) {
        return noise::calibrate_lambda(sensitivity, epsilon).value();
      },
      py::arg("sensitivity"), py::arg("epsilon"),
      "Laplace scale for an epsilon guarantee: sensitivity / epsilon.");
  m.def("ml_success_bound", &noise::ml_success_bound, py::arg("epsilon"),
        "Best-case adversary success deciding between adjacent values.");
  m.def(
      "gamma_diff_moments",
      [](int share_count, double lam) {
        const auto mm =
            noise::gamma_diff_moments(share_count, noise::LaplaceScale(lam));
        return py::make_tuple(mm.mean, mm.variance);
      },
      py::arg("share_count"), py::arg("lam"),
      "(mean, variance) of |G1 - G2| for one of share_count noise shares.");
  m.def(
      "utility_bounds",
      [](double alpha, double lam, double aggregate) {
        const auto b =
            noise::utility_bounds(alpha, noise::LaplaceScale(lam), aggregate);
        return py::make_tuple(b.mu, b.sigma);
      },
      py::arg("alpha"), py::arg("lam"), py::arg("aggregate"),
      "(mu, sigma) of the relative aggregation error with failure fraction "
      "alpha.");

  py::class_<protocol::ClusterConfig>(m, "ClusterConfig")
      .def(py::init<>())
      .def_readwrite("cluster_size", &protocol::ClusterConfig::cluster_size)
      .def_readwrite("tolerated_failures",
                     &protocol::ClusterConfig::tolerated_failures)
      .def_readwrite("participation", &protocol::ClusterConfig::participation)
      .def_readwrite("slot_minutes", &protocol::ClusterConfig::slot_minutes)
      .def_readwrite("codec_scale", &protocol::ClusterConfig::codec_scale)
      .def_readwrite("max_meter_watts", &protocol::ClusterConfig::max_meter_watts)
      .def_readwrite("max_lambda", &protocol::ClusterConfig::max_lambda)
      .def_readwrite("robust", &protocol::ClusterConfig::robust);

  py::class_<protocol::RoundResult>(m, "RoundResult")
      .def_readonly("slot", &protocol::RoundResult::slot)
      .def_readonly("recovered_noisy_sum",
                    &protocol::RoundResult::recovered_noisy_sum)
      .def_readonly("true_sum", &protocol::RoundResult::true_sum)
      .def_readonly("live_count", &protocol::RoundResult::live_count)
      .def_readonly("messages_round1", &protocol::RoundResult::messages_round1)
      .def_readonly("messages_round2", &protocol::RoundResult::messages_round2)
      .def_readonly("failed", &protocol::RoundResult::failed)
      .def_readonly("failure_reason", &protocol::RoundResult::failure_reason)
      .def_readonly("live_noisy_values",
                    &protocol::RoundResult::live_noisy_values)
      .def_readonly("live_nodes", &protocol::RoundResult::live_nodes);

  m.def(
      "run_round",
      [](const protocol::ClusterConfig& config, std::vector<double> measurements,
         double lam, std::vector<std::uint32_t> failures, std::uint64_t seed,
         bool zero_noise) {
        protocol::RoundOptions options;
        options.zero_noise = zero_noise;
        return protocol::run_round(config, measurements,
                                   noise::LaplaceScale(lam), failures, seed,
                                   options);
      },
      py::arg("config"), py::arg("measurements"), py::arg("lam"),
      py::arg("failures") = std::vector<std::uint32_t>{}, py::arg("seed") = 42,
      py::arg("zero_noise") = false,
      "One masked aggregation round over a fresh cluster.");

  m.def("collusion_success_prob", &protocol::collusion_success_prob,
        py::arg("cluster_size"), py::arg("colluding"), py::arg("participation"));
  m.def("k_slot_compromise_prob", &protocol::k_slot_compromise_prob,
        py::arg("cluster_size"), py::arg("colluding"), py::arg("participation"),
        py::arg("slots"));
  m.def("lying_supplier_success_prob", &protocol::lying_supplier_success_prob,
        py::arg("cluster_size"), py::arg("colluding"), py::arg("claimed_missing"),
        py::arg("participation"));
  m.def(
      "simulate_attack",
      [](std::uint32_t cluster_size, double participation,
         std::uint32_t colluding, std::uint32_t claimable, std::uint32_t slots,
         bool lying, std::uint64_t trials, std::uint64_t seed) {
        protocol::AdversaryConfig adversary;
        adversary.colluding = colluding;
        adversary.claimable = claimable;
        adversary.slots = slots;
        adversary.lying = lying;
        RngStream rng(seed);
        return protocol::simulate_attack(cluster_size, participation, adversary,
                                         trials, rng);
      },
      py::arg("cluster_size"), py::arg("participation"), py::arg("colluding"),
      py::arg("claimable") = 0, py::arg("slots") = 1, py::arg("lying") = false,
      py::arg("trials") = 1000000, py::arg("seed") = 42);

  m.def(
      "catalog_names",
      [] {
        std::vector<std::string> out;
        for (const auto& spec : tracegen::default_catalog()) {
          out.push_back(spec.name);
        }
        return out;
      },
      "Names in the built-in appliance catalog.");
  m.def(
      "generate_slots",
      [](std::size_t households, std::uint64_t seed, int slot_minutes, int month,
         bool weekend, int threads) {
        const tracegen::DayConfig day{month, weekend};
        const auto corpus = tracegen::generate_corpus(
            households, day, tracegen::default_catalog(), seed, threads);
        std::vector<std::vector<double>> out;
        out.reserve(corpus.size());
        for (const auto& entry : corpus) {
          out.push_back(tracegen::resample(entry.trace.minutes, slot_minutes));
        }
        return out;
      },
      py::arg("households"), py::arg("seed") = 42, py::arg("slot_minutes") = 10,
      py::arg("month") = 11, py::arg("weekend") = false, py::arg("threads") = 0,
      "Synthetic daily consumption, one slot series per household.");

  m.def(
      "slot_lambdas",
      [](cluster::SlotMatrix matrix, double floor) {
        auto lambdas = cluster::slot_lambdas(matrix);
        return floor > 0 ? cluster::apply_lambda_floor(std::move(lambdas), floor)
                         : lambdas;
      },
      py::arg("matrix"), py::arg("floor") = 0.0,
      "Per-slot noise scales of a cluster (largest member per slot).");
  m.def(
      "expected_error_series",
      [](cluster::SlotMatrix matrix, std::vector<double> lambdas, double alpha) {
        return cluster::expected_error_series(matrix, lambdas, alpha);
      },
      py::arg("matrix"), py::arg("lambdas"), py::arg("alpha") = 0.0,
      "Expected relative aggregation error per slot, closed form.");
  m.def(
      "window_epsilon",
      [](std::vector<double> series, std::vector<double> lambdas,
         std::size_t start, std::size_t count) {
        return privacy::window_epsilon(series, lambdas, start, count);
      },
      py::arg("series"), py::arg("lambdas"), py::arg("start"), py::arg("count"),
      "Composed privacy loss of a slot window.");
  m.def(
      "ml_inference_experiment",
      [](double epsilon, std::size_t trials, std::uint64_t seed) {
        RngStream rng(seed);
        return privacy::ml_inference_experiment(epsilon, trials, rng);
      },
      py::arg("epsilon"), py::arg("trials") = 100000, py::arg("seed") = 42,
      "Empirical adversary success deciding between adjacent counts.");
}
