#include "dpmeter/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <set>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <utility>

#include "dpmeter/clustering.hpp"
#include "dpmeter/errors.hpp"
#include "dpmeter/noise.hpp"
#include "dpmeter/parallel.hpp"
#include "dpmeter/privacy.hpp"
#include "dpmeter/protocol.hpp"
#include "dpmeter/rng.hpp"
#include "dpmeter/trace_gen.hpp"

namespace fs = std::filesystem;

namespace dpmeter::runner {
namespace {

// Stream-id tags: every stochastic stage derives its own stream from the
// master seed, so outputs do not depend on evaluation order or thread count.
enum StreamTag : std::uint64_t {
  kTagClusterShuffle = 0xC1,
  kTagReportCluster = 0xB1,
  kTagInferenceTrial = 0xA8,
  kTagMlExperiment = 0xA9,
  kTagRoundMeasurements = 0xE1,
  kTagRoundFailures = 0xE2,
  kTagAttackSim = 0xE9,
};

std::string household_file(std::uint32_t id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "hh_%05u", id);
  return buf;
}

std::uint64_t fnv64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Copy of the input with the command name and any unset defaults filled in,
// so manifests and provenance hashes record the effective settings.
io::Config effective(
    const io::Config& in, const char* command,
    std::initializer_list<std::pair<const char*, const char*>> defaults) {
  io::Config out = in;
  out.set("command", command);
  for (const auto& [key, value] : defaults) {
    if (!out.has(key)) out.set(key, value);
  }
  return out;
}

std::string provenance(const io::Config& eff) {
  return "seed=" + eff.get_string("seed", "42") +
         " config_hash=" + io::config_hash(eff);
}

std::vector<std::size_t> parse_sizes(const io::Config& c, const std::string& key,
                                     const std::string& fallback) {
  std::vector<std::size_t> out;
  for (const std::string& tok : c.get_list(key, fallback)) {
    out.push_back(static_cast<std::size_t>(std::stoull(tok)));
  }
  return out;
}

std::vector<double> parse_doubles(const io::Config& c, const std::string& key,
                                  const std::string& fallback) {
  std::vector<double> out;
  for (const std::string& tok : c.get_list(key, fallback)) {
    out.push_back(std::stod(tok));
  }
  return out;
}

int fail_config(const std::string& message) {
  std::fprintf(stderr, "config error: %s\n", message.c_str());
  return kBadConfig;
}

int fail_runtime(const std::string& message) {
  std::fprintf(stderr, "error: %s\n", message.c_str());
  return kRuntimeFailure;
}

std::vector<tracegen::ApplianceSpec> catalog_from(const io::Config& eff) {
  const std::string path = eff.get_string("catalog", "");
  if (path.empty()) return tracegen::default_catalog();
  return tracegen::load_catalog(path);
}

// Mean / sample deviation / max accumulator for report rows.
struct Stat {
  double sum = 0;
  double sum_sq = 0;
  double max_value = 0;
  std::size_t n = 0;

  void add(double v) {
    sum += v;
    sum_sq += v * v;
    max_value = n == 0 ? v : std::max(max_value, v);
    ++n;
  }
  double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
  double dev() const {
    if (n < 2) return 0.0;
    const double m = mean();
    const double var = (sum_sq - static_cast<double>(n) * m * m) /
                       static_cast<double>(n - 1);
    return var > 0 ? std::sqrt(var) : 0.0;
  }
};

}  // namespace

int run_gen_traces(const io::Config& config) try {
  const io::Config eff = effective(config, "gen-traces",
                                   {{"seed", "42"},
                                    {"out", "out"},
                                    {"threads", "0"},
                                    {"households", "200"},
                                    {"day.month", "11"},
                                    {"day.weekend", "false"},
                                    {"catalog", ""},
                                    {"write.components", "true"},
                                    {"write.activations", "true"}});
  const std::uint64_t seed = eff.get_u64("seed", 42);
  const std::size_t households =
      static_cast<std::size_t>(eff.get_u64("households", 200));
  if (households == 0) return fail_config("households must be positive");
  const int month = static_cast<int>(eff.get_int("day.month", 11));
  if (month < 1 || month > 12) return fail_config("day.month must be in 1..12");
  const tracegen::DayConfig day{month, eff.get_bool("day.weekend", false)};
  const std::vector<tracegen::ApplianceSpec> catalog = catalog_from(eff);
  const int threads = static_cast<int>(eff.get_int("threads", 0));
  const fs::path out = eff.get_string("out", "out");
  fs::create_directories(out / "traces");

  const auto corpus =
      tracegen::generate_corpus(households, day, catalog, seed, threads);

  io::write_manifest((out / "manifest.txt").string(), eff);
  const std::string prov = provenance(eff);
  {
    io::CsvWriter hh((out / "households.csv").string(), prov,
                     {"household", "residents", "daily_mean_watts", "appliances"});
    for (const auto& entry : corpus) {
      std::string names;
      for (const auto& spec : entry.household.appliances) {
        if (!names.empty()) names += ';';
        names += spec.name;
      }
      hh.row({std::to_string(entry.household.id),
              std::to_string(entry.household.residents),
              io::format_double(tracegen::daily_mean_watts(entry.trace)), names});
    }
  }

  const bool write_components = eff.get_bool("write.components", true);
  const bool write_activations = eff.get_bool("write.activations", true);
  for (const auto& entry : corpus) {
    const std::uint32_t id = entry.household.id;
    const std::string base = household_file(id);
    {
      io::CsvWriter w((out / "traces" / (base + ".csv")).string(), prov,
                      {"household", "minute", "total_watts"});
      for (int t = 0; t < tracegen::kMinutesPerDay; ++t) {
        w.row({std::to_string(id), std::to_string(t),
               io::format_double(entry.trace.minutes[t])});
      }
    }
    if (write_components) {
      std::vector<std::string> header = {"household", "minute"};
      for (const auto& comp : entry.trace.components) header.push_back(comp.name);
      io::CsvWriter w((out / "traces" / (base + "_components.csv")).string(),
                      prov, header);
      std::vector<std::string> cells;
      for (int t = 0; t < tracegen::kMinutesPerDay; ++t) {
        cells.clear();
        cells.push_back(std::to_string(id));
        cells.push_back(std::to_string(t));
        for (const auto& comp : entry.trace.components) {
          cells.push_back(io::format_double(comp.minutes[t]));
        }
        w.row(cells);
      }
    }
    if (write_activations) {
      io::CsvWriter w((out / "traces" / (base + "_activations.csv")).string(),
                      prov,
                      {"household", "appliance", "start_minute",
                       "duration_minutes"});
      for (const auto& comp : entry.trace.components) {
        for (const auto& act : comp.activations) {
          w.row({std::to_string(id), comp.name, std::to_string(act.start_minute),
                 std::to_string(act.duration_minutes)});
        }
      }
    }
  }
  std::printf("gen-traces: wrote %zu households to %s\n", corpus.size(),
              out.string().c_str());
  return kOk;
} catch (const std::invalid_argument& e) {
  return fail_config(e.what());
} catch (const std::exception& e) {
  return fail_runtime(e.what());
}

CorpusOnDisk load_corpus_totals(const std::string& dir) {
  CorpusOnDisk corpus;
  const fs::path root(dir);
  const io::CsvFile hh = io::read_csv((root / "households.csv").string());
  for (const auto& row : hh.rows) {
    if (row.size() < 3) throw std::runtime_error("households.csv: short row");
    const auto id = static_cast<std::uint32_t>(std::stoul(row[0]));
    corpus.ids.push_back(id);
    corpus.residents[id] = static_cast<int>(std::stol(row[1]));
    corpus.daily_mean[id] = std::stod(row[2]);
  }
  for (const std::uint32_t id : corpus.ids) {
    const io::CsvFile tf =
        io::read_csv((root / "traces" / (household_file(id) + ".csv")).string());
    std::vector<double> minutes(tracegen::kMinutesPerDay, 0.0);
    for (const auto& row : tf.rows) {
      if (row.size() < 3) throw std::runtime_error("trace file: short row");
      const int minute = static_cast<int>(std::stol(row[1]));
      if (minute < 0 || minute >= tracegen::kMinutesPerDay) {
        throw std::runtime_error("trace file: minute out of range");
      }
      minutes[static_cast<std::size_t>(minute)] = std::stod(row[2]);
    }
    corpus.totals[id] = std::move(minutes);
  }
  return corpus;
}

std::map<std::string, std::vector<double>> load_components(const std::string& dir,
                                                           std::uint32_t id) {
  const fs::path path =
      fs::path(dir) / "traces" / (household_file(id) + "_components.csv");
  const io::CsvFile file = io::read_csv(path.string());
  if (file.header.size() < 2) {
    throw std::runtime_error("components file: bad header");
  }
  std::map<std::string, std::vector<double>> out;
  const std::size_t names = file.header.size() - 2;
  std::vector<std::vector<double>*> columns(names);
  for (std::size_t c = 0; c < names; ++c) {
    columns[c] = &out[file.header[c + 2]];
    columns[c]->assign(tracegen::kMinutesPerDay, 0.0);
  }
  for (const auto& row : file.rows) {
    if (row.size() != file.header.size()) {
      throw std::runtime_error("components file: short row");
    }
    const int minute = static_cast<int>(std::stol(row[1]));
    if (minute < 0 || minute >= tracegen::kMinutesPerDay) {
      throw std::runtime_error("components file: minute out of range");
    }
    for (std::size_t c = 0; c < names; ++c) {
      (*columns[c])[static_cast<std::size_t>(minute)] = std::stod(row[c + 2]);
    }
  }
  return out;
}

std::vector<ActivationRecord> load_activations(const std::string& dir,
                                               std::uint32_t id) {
  const fs::path path =
      fs::path(dir) / "traces" / (household_file(id) + "_activations.csv");
  const io::CsvFile file = io::read_csv(path.string());
  std::vector<ActivationRecord> out;
  for (const auto& row : file.rows) {
    if (row.size() < 4) throw std::runtime_error("activations file: short row");
    out.push_back({row[1], static_cast<int>(std::stol(row[2])),
                   static_cast<int>(std::stol(row[3]))});
  }
  return out;
}

int run_error_sweep(const io::Config& config) try {
  const io::Config eff = effective(config, "error-sweep",
                                   {{"seed", "42"},
                                    {"out", "out"},
                                    {"threads", "0"},
                                    {"corpus", ""},
                                    {"slot_minutes", "10"},
                                    {"clustering.mode", "both"},
                                    {"sweep.cluster_sizes", "50,100,200,400"},
                                    {"sweep.alphas", "0,0.2,0.5"},
                                    {"clusters_per_size", "200"},
                                    {"lambda.floor_watts", "0.1"},
                                    {"detail.cluster_size", "100"}});
  const std::string corpus_dir = eff.get_string("corpus", "");
  if (corpus_dir.empty()) {
    return fail_config("corpus directory required (corpus=PATH)");
  }
  const std::uint64_t seed = eff.get_u64("seed", 42);
  const int threads = static_cast<int>(eff.get_int("threads", 0));
  const int slot_minutes = static_cast<int>(eff.get_int("slot_minutes", 10));
  if (slot_minutes <= 0 || tracegen::kMinutesPerDay % slot_minutes != 0) {
    return fail_config("slot_minutes must divide 1440");
  }
  const double floor_watts = eff.get_double("lambda.floor_watts", 0.1);
  const std::size_t per_size =
      static_cast<std::size_t>(eff.get_u64("clusters_per_size", 200));
  if (per_size == 0) return fail_config("clusters_per_size must be positive");

  std::vector<std::string> modes;
  const std::string mode_cfg = eff.get_string("clustering.mode", "both");
  if (mode_cfg == "both") {
    modes = {"random", "consumption"};
  } else if (mode_cfg == "random" || mode_cfg == "consumption") {
    modes = {mode_cfg};
  } else {
    return fail_config("clustering.mode must be random, consumption or both");
  }

  const std::vector<std::size_t> sizes =
      parse_sizes(eff, "sweep.cluster_sizes", "50,100,200,400");
  const std::vector<double> alphas = parse_doubles(eff, "sweep.alphas", "0,0.2,0.5");
  for (const double a : alphas) {
    if (!(a >= 0 && a < 1)) return fail_config("alphas must lie in [0,1)");
  }

  const CorpusOnDisk corpus = load_corpus_totals(corpus_dir);
  const std::size_t population = corpus.ids.size();
  if (population == 0) return fail_config("corpus is empty");
  for (const std::size_t n : sizes) {
    if (n < 2 || n > population) {
      return fail_config("cluster sizes must lie in [2, population]");
    }
  }

  std::unordered_map<std::uint32_t, std::vector<double>> slots;
  for (const std::uint32_t id : corpus.ids) {
    slots[id] = tracegen::resample(corpus.totals.at(id), slot_minutes);
  }

  const fs::path out = eff.get_string("out", "out");
  fs::create_directories(out);
  io::write_manifest((out / "manifest.txt").string(), eff);
  const std::string prov = provenance(eff);
  io::CsvWriter sweep((out / "error_sweep.csv").string(), prov,
                      {"mode", "cluster_size", "alpha", "clusters", "mean_error",
                       "dev_error", "max_error"});
  const std::size_t detail_size =
      static_cast<std::size_t>(eff.get_u64("detail.cluster_size", 100));
  io::CsvWriter detail((out / "error_slots.csv").string(), prov,
                       {"mode", "alpha", "slot", "mean_mu"});

  for (const std::string& mode : modes) {
    for (const std::size_t n : sizes) {
      std::vector<cluster::Cluster> clusters;
      if (mode == "random") {
        for (std::uint64_t shuffle = 0; clusters.size() < per_size; ++shuffle) {
          RngStream rng = RngStream::derive(
              seed, {kTagClusterShuffle, static_cast<std::uint64_t>(n), shuffle});
          auto batch = cluster::random_clusters(corpus.ids, n, rng);
          if (batch.empty()) break;
          for (auto& c : batch) {
            clusters.push_back(std::move(c));
            if (clusters.size() == per_size) break;
          }
        }
      } else {
        std::vector<std::pair<std::uint32_t, double>> avg;
        avg.reserve(population);
        for (const std::uint32_t id : corpus.ids) {
          avg.emplace_back(id, corpus.daily_mean.at(id));
        }
        auto batch = cluster::consumption_clusters(avg, n);
        if (batch.size() > per_size) batch.resize(per_size);
        clusters = std::move(batch);
      }
      if (clusters.empty()) return fail_config("no full cluster fits the corpus");

      std::vector<cluster::SlotMatrix> matrices(clusters.size());
      std::vector<std::vector<double>> lambdas(clusters.size());
      parallel_for(clusters.size(), threads, [&](std::size_t ci) {
        auto& matrix = matrices[ci];
        matrix.reserve(clusters[ci].members.size());
        for (const std::uint32_t member : clusters[ci].members) {
          matrix.push_back(slots.at(member));
        }
        lambdas[ci] =
            cluster::apply_lambda_floor(cluster::slot_lambdas(matrix), floor_watts);
      });

      for (const double alpha : alphas) {
        std::vector<std::vector<double>> mus(clusters.size());
        parallel_for(clusters.size(), threads, [&](std::size_t ci) {
          mus[ci] =
              cluster::expected_error_series(matrices[ci], lambdas[ci], alpha);
        });
        const cluster::ErrorSummary s = cluster::summarize_error(n, mus);
        sweep.row({mode, std::to_string(n), io::format_double(alpha),
                   std::to_string(s.clusters), io::format_double(s.mean_error),
                   io::format_double(s.dev_error), io::format_double(s.max_error)});
        if (n == detail_size) {
          const std::size_t slot_count = mus.front().size();
          for (std::size_t t = 0; t < slot_count; ++t) {
            double acc = 0;
            for (const auto& mu : mus) acc += mu[t];
            detail.row({mode, io::format_double(alpha), std::to_string(t),
                        io::format_double(acc / static_cast<double>(mus.size()))});
          }
        }
      }
    }
  }
  std::printf("error-sweep: %zu households, results in %s\n", population,
              out.string().c_str());
  return kOk;
} catch (const std::invalid_argument& e) {
  return fail_config(e.what());
} catch (const std::exception& e) {
  return fail_runtime(e.what());
}

int run_privacy_report(const io::Config& config) try {
  const io::Config eff = effective(config, "privacy-report",
                                   {{"seed", "42"},
                                    {"out", "out"},
                                    {"corpus", ""},
                                    {"catalog", ""},
                                    {"slot_minutes", "10"},
                                    {"cluster.size", "100"},
                                    {"lambda.floor_watts", "0.1"},
                                    {"windows.slots", "3,6,24,48,144"},
                                    {"trials", "200"},
                                    {"appliances", ""},
                                    {"min_eligible", "10"},
                                    {"ml.epsilons", "2,1,0.5,0.1"},
                                    {"ml.trials", "1000000"}});
  const std::string corpus_dir = eff.get_string("corpus", "");
  if (corpus_dir.empty()) {
    return fail_config("corpus directory required (corpus=PATH)");
  }
  const std::uint64_t seed = eff.get_u64("seed", 42);
  const int slot_minutes = static_cast<int>(eff.get_int("slot_minutes", 10));
  if (slot_minutes <= 0 || tracegen::kMinutesPerDay % slot_minutes != 0) {
    return fail_config("slot_minutes must divide 1440");
  }
  const std::size_t slots_per_day =
      static_cast<std::size_t>(tracegen::kMinutesPerDay / slot_minutes);
  const std::size_t cluster_size =
      static_cast<std::size_t>(eff.get_u64("cluster.size", 100));
  const double floor_watts = eff.get_double("lambda.floor_watts", 0.1);
  const std::vector<std::size_t> windows =
      parse_sizes(eff, "windows.slots", "3,6,24,48,144");
  for (const std::size_t w : windows) {
    if (w == 0 || w > slots_per_day) {
      return fail_config("window lengths must lie in [1, slots per day]");
    }
  }

  const CorpusOnDisk corpus = load_corpus_totals(corpus_dir);
  if (corpus.ids.size() < cluster_size || cluster_size < 2) {
    return fail_config("cluster.size must lie in [2, population]");
  }
  std::unordered_map<std::uint32_t, std::vector<double>> slot_totals;
  for (const std::uint32_t id : corpus.ids) {
    slot_totals[id] = tracegen::resample(corpus.totals.at(id), slot_minutes);
  }

  RngStream cluster_rng = RngStream::derive(seed, {kTagReportCluster});
  const auto clusters =
      cluster::random_clusters(corpus.ids, cluster_size, cluster_rng);
  std::unordered_map<std::uint32_t, std::size_t> cluster_of;
  std::vector<std::vector<double>> cluster_lambda(clusters.size());
  for (std::size_t ci = 0; ci < clusters.size(); ++ci) {
    cluster::SlotMatrix matrix;
    matrix.reserve(clusters[ci].members.size());
    for (const std::uint32_t member : clusters[ci].members) {
      matrix.push_back(slot_totals.at(member));
      cluster_of[member] = ci;
    }
    cluster_lambda[ci] =
        cluster::apply_lambda_floor(cluster::slot_lambdas(matrix), floor_watts);
  }

  const std::vector<tracegen::ApplianceSpec> catalog = catalog_from(eff);
  std::unordered_map<std::string, tracegen::ApplianceClass> klass;
  for (const auto& spec : catalog) klass[spec.name] = spec.klass;

  // Presence pass; appliance slot series for the inference benchmark are
  // collected on the way.
  std::map<std::pair<std::string, std::size_t>, Stat> presence;
  struct CompSeries {
    std::uint32_t household;
    std::vector<double> slots;
  };
  std::map<std::string, std::vector<CompSeries>> active_series;

  auto window_max = [&](std::span<const double> series,
                        std::span<const double> lam, std::size_t w) {
    double best = 0;
    for (std::size_t start = 0; start + w <= slots_per_day; start += w) {
      best = std::max(best, privacy::window_epsilon(series, lam, start, w));
    }
    return best;
  };

  for (const auto& c : clusters) {
    for (const std::uint32_t id : c.members) {
      const auto& lam = cluster_lambda[cluster_of.at(id)];
      const auto components = load_components(corpus_dir, id);
      std::vector<double> active_union(slots_per_day, 0.0);
      for (const auto& [name, minutes] : components) {
        const std::vector<double> comp = tracegen::resample(minutes, slot_minutes);
        const bool active = klass.count(name) != 0 &&
                            klass.at(name) == tracegen::ApplianceClass::Active;
        if (active) {
          for (std::size_t t = 0; t < slots_per_day; ++t) {
            active_union[t] += comp[t];
          }
        }
        const bool nonzero =
            std::any_of(comp.begin(), comp.end(), [](double v) { return v > 0; });
        if (!nonzero) continue;
        for (const std::size_t w : windows) {
          presence[{name, w}].add(window_max(comp, lam, w));
        }
        if (active) active_series[name].push_back({id, comp});
      }
      const auto& total = slot_totals.at(id);
      for (const std::size_t w : windows) {
        presence[{"all_appliances", w}].add(window_max(total, lam, w));
        presence[{"active_union", w}].add(window_max(active_union, lam, w));
      }
    }
  }

  const fs::path out = eff.get_string("out", "out");
  fs::create_directories(out);
  io::write_manifest((out / "manifest.txt").string(), eff);
  const std::string prov = provenance(eff);
  {
    io::CsvWriter w((out / "presence_epsilon.csv").string(), prov,
                    {"appliance", "window_slots", "samples", "mean_epsilon",
                     "dev_epsilon", "max_epsilon"});
    for (const auto& [key, stat] : presence) {
      w.row({key.first, std::to_string(key.second), std::to_string(stat.n),
             io::format_double(stat.mean()), io::format_double(stat.dev()),
             io::format_double(stat.max_value)});
    }
  }

  // Start-time inference benchmark: all four adversaries attack the same
  // noisy series, so their error columns are directly comparable.
  std::vector<std::string> bench = eff.get_list("appliances", "");
  if (bench.empty()) {
    const std::size_t min_eligible =
        static_cast<std::size_t>(eff.get_u64("min_eligible", 10));
    for (const auto& [name, series] : active_series) {
      if (series.size() >= min_eligible) bench.push_back(name);
    }
  }
  const std::size_t trials_cfg =
      static_cast<std::size_t>(eff.get_u64("trials", 200));
  {
    io::CsvWriter w((out / "inference_accuracy.csv").string(), prov,
                    {"appliance", "adversary", "trials", "mean_error_hours",
                     "dev_error_hours"});
    constexpr privacy::Adversary kAdversaries[] = {
        privacy::Adversary::Random, privacy::Adversary::Frequency,
        privacy::Adversary::Bayes, privacy::Adversary::BayesFrequency};
    const char* const kAdversaryNames[] = {"random", "frequency", "bayes",
                                           "bayes_frequency"};
    for (const std::string& name : bench) {
      const auto it = active_series.find(name);
      if (it == active_series.end() || it->second.size() < 2) {
        std::fprintf(stderr, "privacy-report: skipping %s (too few samples)\n",
                     name.c_str());
        continue;
      }
      struct Instance {
        std::uint32_t household;
        std::vector<double> slots;
        privacy::ApplianceSignature sig;
      };
      std::vector<Instance> instances;
      std::vector<double> start_hist(slots_per_day, 0.0);
      for (const auto& series : it->second) {
        auto sig = privacy::extract_signature(series.slots);
        if (slots_per_day - sig.duration() < 2) continue;
        start_hist[sig.start_slot] += 1;
        instances.push_back({series.household, series.slots, std::move(sig)});
      }
      if (instances.size() < 2) continue;
      const std::size_t trials = std::min(trials_cfg, instances.size());
      const std::uint64_t name_tag = fnv64(name);
      Stat err[4];
      for (std::size_t t = 0; t < trials; ++t) {
        const Instance& inst = instances[t];
        RngStream rng =
            RngStream::derive(seed, {kTagInferenceTrial, name_tag, inst.household});
        const auto& lam = cluster_lambda[cluster_of.at(inst.household)];
        const auto noisy = privacy::sanitize_series(inst.slots, lam, rng);
        const std::size_t candidates = slots_per_day - inst.sig.duration();
        std::vector<double> prior(candidates);
        double mass = 0;
        for (std::size_t i = 0; i < candidates; ++i) {
          prior[i] = start_hist[i] + 1;  // add-one smoothing
          mass += prior[i];
        }
        for (double& p : prior) p /= mass;
        for (int a = 0; a < 4; ++a) {
          const privacy::Adversary adv = kAdversaries[a];
          const bool wants_prior = adv == privacy::Adversary::Frequency ||
                                   adv == privacy::Adversary::BayesFrequency;
          const std::size_t guess = privacy::infer_start(
              adv, noisy, inst.sig, lam, wants_prior ? &prior : nullptr, rng);
          err[a].add(privacy::inference_accuracy_hours(guess, inst.sig.start_slot,
                                                       slot_minutes));
        }
      }
      for (int a = 0; a < 4; ++a) {
        w.row({name, kAdversaryNames[a], std::to_string(err[a].n),
               io::format_double(err[a].mean()), io::format_double(err[a].dev())});
      }
    }
  }

  {
    const std::vector<double> epsilons =
        parse_doubles(eff, "ml.epsilons", "2,1,0.5,0.1");
    const std::size_t ml_trials =
        static_cast<std::size_t>(eff.get_u64("ml.trials", 1000000));
    io::CsvWriter w((out / "ml_success.csv").string(), prov,
                    {"epsilon", "trials", "success_rate", "bound"});
    for (std::size_t i = 0; i < epsilons.size(); ++i) {
      RngStream rng = RngStream::derive(seed, {kTagMlExperiment, i});
      const double rate =
          privacy::ml_inference_experiment(epsilons[i], ml_trials, rng);
      w.row({io::format_double(epsilons[i]), std::to_string(ml_trials),
             io::format_double(rate),
             io::format_double(noise::ml_success_bound(epsilons[i]))});
    }
  }
  std::printf("privacy-report: results in %s\n", out.string().c_str());
  return kOk;
} catch (const std::invalid_argument& e) {
  return fail_config(e.what());
} catch (const std::exception& e) {
  return fail_runtime(e.what());
}

int run_protocol_check(const io::Config& config) try {
  const io::Config eff = effective(config, "protocol-check",
                                   {{"seed", "42"},
                                    {"out", "out"},
                                    {"cluster.size", "100"},
                                    {"tolerated.fraction", "0.3"},
                                    {"participation", "30"},
                                    {"rounds", "200"},
                                    {"epsilon", "1.0"},
                                    {"max_meter_watts", "20000"},
                                    {"attack.trials", "0"},
                                    {"attack.slots", "3"}});
  const std::uint64_t seed = eff.get_u64("seed", 42);
  const std::uint32_t n =
      static_cast<std::uint32_t>(eff.get_u64("cluster.size", 100));
  const double fraction = eff.get_double("tolerated.fraction", 0.3);
  if (n < 2) return fail_config("cluster.size must be >= 2");
  if (!(fraction >= 0 && fraction < 1)) {
    return fail_config("tolerated.fraction must lie in [0,1)");
  }
  const auto tolerated = static_cast<std::uint32_t>(
      std::floor(fraction * static_cast<double>(n)));
  const double participation = eff.get_double("participation", 30);
  const std::uint32_t rounds =
      static_cast<std::uint32_t>(eff.get_u64("rounds", 200));
  if (rounds == 0) return fail_config("rounds must be positive");
  const double epsilon = eff.get_double("epsilon", 1.0);
  if (!(epsilon > 0)) return fail_config("epsilon must be positive");
  const double max_meter = eff.get_double("max_meter_watts", 20000);

  protocol::ClusterConfig cc;
  cc.cluster_size = n;
  cc.tolerated_failures = tolerated;
  cc.participation = participation;
  cc.max_meter_watts = max_meter;
  cc.max_lambda = max_meter / epsilon;
  protocol::ClusterSim sim(cc, seed);
  const agg::Modulus m = sim.modulus();
  const agg::FixedPointCodec codec = sim.codec();

  const fs::path out = eff.get_string("out", "out");
  fs::create_directories(out);
  io::write_manifest((out / "manifest.txt").string(), eff);
  const std::string prov = provenance(eff);

  std::size_t bad = 0;
  {
    io::CsvWriter w((out / "protocol_rounds.csv").string(), prov,
                    {"slot", "live", "failures", "true_sum_watts",
                     "noisy_sum_watts", "abs_error_watts", "messages_round1",
                     "messages_round2", "verified"});
    std::vector<double> x(n);
    std::vector<agg::NodeId> ids(n);
    for (std::uint32_t r = 0; r < rounds; ++r) {
      RngStream meas = RngStream::derive(seed, {kTagRoundMeasurements, r});
      double peak = 0;
      for (auto& v : x) {
        v = meas.next_double() * max_meter;
        peak = std::max(peak, v);
      }
      RngStream fail = RngStream::derive(seed, {kTagRoundFailures, r});
      const auto nfail =
          static_cast<std::uint32_t>(fail.next_below(tolerated + 1));
      std::iota(ids.begin(), ids.end(), 0u);
      for (std::uint32_t k = 0; k < nfail; ++k) {
        const auto j = k + static_cast<std::uint32_t>(fail.next_below(n - k));
        std::swap(ids[k], ids[j]);
      }
      const std::span<const agg::NodeId> failures(ids.data(), nfail);
      const noise::LaplaceScale lambda(peak / epsilon);
      const auto res = sim.run_round(r, x, lambda, failures);

      bool ok = !res.failed;
      double noisy_sum = 0;
      if (ok) {
        std::uint64_t expect = 0;
        for (const double v : res.live_noisy_values) {
          expect = m.add(expect, codec.encode(v, m));
          noisy_sum += v;
        }
        ok = expect == res.recovered_residue &&
             std::abs(res.recovered_noisy_sum - noisy_sum) <=
                 (0.5 * res.live_count + 1.0) / codec.scale;
      }
      if (!ok) ++bad;
      w.row({std::to_string(r), std::to_string(res.live_count),
             std::to_string(nfail), io::format_double(res.true_sum),
             io::format_double(res.recovered_noisy_sum),
             io::format_double(std::abs(res.recovered_noisy_sum - res.true_sum)),
             std::to_string(res.messages_round1),
             std::to_string(res.messages_round2), ok ? "1" : "0"});
    }

    // A node that answers round 1 and then vanishes must not yield a quietly
    // wrong aggregate: either the round fails or the residue is visibly
    // inconsistent with the surviving report.
    {
      std::fill(x.begin(), x.end(), 100.0);
      protocol::RoundOptions options;
      options.die_after_round1 = {0};
      const auto res = sim.run_round(rounds, x, noise::LaplaceScale(100.0 / epsilon),
                                     {}, options);
      bool flagged = res.failed;
      if (!flagged) {
        std::uint64_t expect = 0;
        for (const double v : res.live_noisy_values) {
          expect = m.add(expect, codec.encode(v, m));
        }
        flagged = expect != res.recovered_residue;
      }
      if (!flagged) {
        ++bad;
        std::fprintf(stderr,
                     "protocol-check: inter-round dropout went unnoticed\n");
      }
    }

    // Noise-free exactness: with the test hook the recovered sum must match
    // the plain sum up to fixed-point rounding.
    {
      RngStream meas = RngStream::derive(
          seed, {kTagRoundMeasurements, static_cast<std::uint64_t>(rounds) + 1});
      double plain = 0;
      for (auto& v : x) {
        v = meas.next_double() * max_meter;
        plain += v;
      }
      protocol::RoundOptions options;
      options.zero_noise = true;
      const auto res =
          sim.run_round(rounds + 1, x, noise::LaplaceScale(0), {}, options);
      const bool ok =
          !res.failed && std::abs(res.recovered_noisy_sum - plain) <=
                             (0.5 * static_cast<double>(n) + 1.0) / codec.scale;
      if (!ok) {
        ++bad;
        std::fprintf(stderr, "protocol-check: noise-free round mismatch\n");
      }
    }
  }

  {
    const std::uint32_t slots =
        static_cast<std::uint32_t>(eff.get_u64("attack.slots", 3));
    const std::uint64_t trials = eff.get_u64("attack.trials", 0);
    io::CsvWriter w((out / "attack_probabilities.csv").string(), prov,
                    {"kind", "cluster_size", "colluding", "claimed_missing",
                     "slots", "participation", "closed_form", "simulated",
                     "trials"});
    const std::uint32_t colluding = n / 2;
    const std::uint32_t claimed = std::min(tolerated, n - colluding - 2);
    struct Row {
      const char* kind;
      std::uint32_t t;
      std::uint32_t m;
      std::uint32_t k;
      double closed;
    };
    const Row grid[] = {
        {"collusion", colluding, 0, 1,
         protocol::collusion_success_prob(n, colluding, participation)},
        {"k_slot", colluding, 0, slots,
         protocol::k_slot_compromise_prob(n, colluding, participation, slots)},
        {"lying", colluding, claimed, 1,
         protocol::lying_supplier_success_prob(n, colluding, claimed,
                                               participation)},
    };
    std::uint64_t row_id = 0;
    for (const Row& row : grid) {
      std::string simulated = "";
      if (trials > 0) {
        protocol::AdversaryConfig adv;
        adv.colluding = row.t;
        adv.claimable = row.m;
        adv.slots = row.k;
        adv.lying = row.m > 0;
        RngStream rng = RngStream::derive(seed, {kTagAttackSim, row_id});
        simulated = io::format_double(
            protocol::simulate_attack(n, participation, adv, trials, rng));
      }
      w.row({row.kind, std::to_string(n), std::to_string(row.t),
             std::to_string(row.m), std::to_string(row.k),
             io::format_double(participation), io::format_double(row.closed),
             simulated, std::to_string(trials)});
      ++row_id;
    }
  }

  if (bad != 0) {
    std::fprintf(stderr, "protocol-check: %zu verification failure(s)\n", bad);
    return kCheckFailure;
  }
  std::printf("protocol-check: %u rounds verified, results in %s\n", rounds,
              out.string().c_str());
  return kOk;
} catch (const std::invalid_argument& e) {
  return fail_config(e.what());
} catch (const std::exception& e) {
  return fail_runtime(e.what());
}

}  // namespace dpmeter::runner
