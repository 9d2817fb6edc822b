#include "dpmeter/trace_gen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "dpmeter/parallel.hpp"

namespace dpmeter::tracegen {

namespace detail {
extern const char kCatalogText[];
}

std::array<double, kWeightSlots> diurnal_weights(std::span<const WeightPiece> pieces) {
  std::array<double, kWeightSlots> w{};
  for (const auto& p : pieces) {
    if (p.start_minute < 0 || p.end_minute > kMinutesPerDay ||
        p.start_minute >= p.end_minute) {
      throw std::invalid_argument("diurnal_weights: bad piece range");
    }
    if (!(p.mass >= 0)) throw std::invalid_argument("diurnal_weights: negative mass");
    const int s0 = p.start_minute / 10;
    const int s1 = (p.end_minute + 9) / 10;
    for (int s = s0; s < s1; ++s) w[s] += p.mass / (s1 - s0);
  }
  double total = 0;
  for (const double v : w) total += v;
  if (!(total > 0)) throw std::invalid_argument("diurnal_weights: zero total mass");
  for (double& v : w) v /= total;
  return w;
}

namespace {

std::string trimmed(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (const char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

[[noreturn]] void bad_catalog(std::size_t line, const std::string& what) {
  throw std::runtime_error("catalog line " + std::to_string(line) + ": " + what);
}

}  // namespace

std::vector<ApplianceSpec> parse_catalog(const std::string& text) {
  std::vector<ApplianceSpec> catalog;
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;

  ApplianceSpec cur;
  bool open = false;
  bool have_weights = false;

  auto finish = [&](std::size_t line) {
    if (cur.profile.empty()) bad_catalog(line, "appliance without profile");
    if (!have_weights) bad_catalog(line, "appliance without weights");
    catalog.push_back(cur);
  };

  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = trimmed(raw);
    if (line.empty() || line[0] == '#') continue;

    std::istringstream ls(line);
    std::string key;
    ls >> key;
    std::string rest;
    std::getline(ls, rest);
    rest = trimmed(rest);

    if (key == "appliance") {
      if (open) bad_catalog(lineno, "nested appliance block");
      if (rest.empty()) bad_catalog(lineno, "appliance without name");
      cur = ApplianceSpec{};
      cur.name = rest;
      open = true;
      have_weights = false;
      continue;
    }
    if (!open) bad_catalog(lineno, "field outside appliance block");

    if (key == "end") {
      finish(lineno);
      open = false;
    } else if (key == "class") {
      if (rest == "active") {
        cur.klass = ApplianceClass::Active;
      } else if (rest == "passive") {
        cur.klass = ApplianceClass::Passive;
      } else {
        bad_catalog(lineno, "class must be active or passive");
      }
    } else if (key == "owner_probability") {
      cur.owner_probability = std::stod(rest);
      if (cur.owner_probability < 0 || cur.owner_probability > 1) {
        bad_catalog(lineno, "owner_probability outside [0,1]");
      }
    } else if (key == "activations_per_day") {
      cur.activations_per_day = std::stod(rest);
      if (!(cur.activations_per_day > 0)) bad_catalog(lineno, "activations_per_day must be > 0");
    } else if (key == "profile") {
      cur.profile.clear();
      for (const auto& part : split(rest, ',')) {
        const auto x = part.find('x');
        if (x == std::string::npos) bad_catalog(lineno, "profile stage must be WATTSxMINUTES");
        ProfileSegment seg{std::stod(part.substr(0, x)), std::stoi(part.substr(x + 1))};
        if (!(seg.watts > 0) || seg.minutes < 1) bad_catalog(lineno, "bad profile stage");
        cur.profile.push_back(seg);
      }
    } else if (key == "weights") {
      std::vector<WeightPiece> pieces;
      for (const auto& part : split(rest, ',')) {
        const auto dash = part.find('-');
        const auto colon = part.find(':');
        if (dash == std::string::npos || colon == std::string::npos || colon < dash) {
          bad_catalog(lineno, "weights piece must be START-END:MASS");
        }
        pieces.push_back(WeightPiece{std::stoi(part.substr(0, dash)),
                                     std::stoi(part.substr(dash + 1, colon - dash - 1)),
                                     std::stod(part.substr(colon + 1))});
      }
      cur.activation_weights = diurnal_weights(pieces);
      have_weights = true;
    } else if (key == "weights_raw") {
      const auto parts = split(rest, ',');
      if (parts.size() != kWeightSlots) bad_catalog(lineno, "weights_raw needs 144 values");
      double total = 0;
      for (int i = 0; i < kWeightSlots; ++i) {
        cur.activation_weights[i] = std::stod(parts[i]);
        if (cur.activation_weights[i] < 0) bad_catalog(lineno, "negative weight");
        total += cur.activation_weights[i];
      }
      if (!(total > 0)) bad_catalog(lineno, "zero weights");
      for (auto& v : cur.activation_weights) v /= total;
      have_weights = true;
    } else {
      bad_catalog(lineno, "unknown field '" + key + "'");
    }
  }
  if (open) bad_catalog(lineno, "unterminated appliance block");
  if (catalog.empty()) throw std::runtime_error("catalog: no appliances");
  return catalog;
}

std::vector<ApplianceSpec> load_catalog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_catalog: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_catalog(buf.str());
}

void save_catalog(const std::string& path, std::span<const ApplianceSpec> catalog) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_catalog: cannot open " + path);
  out << "# Appliance catalog. Schema: see data/appliances.cat in the source tree.\n";
  out.precision(17);
  for (const auto& a : catalog) {
    out << "\nappliance " << a.name << "\n";
    out << "class " << (a.klass == ApplianceClass::Active ? "active" : "passive") << "\n";
    out << "owner_probability " << a.owner_probability << "\n";
    out << "activations_per_day " << a.activations_per_day << "\n";
    out << "profile ";
    for (std::size_t i = 0; i < a.profile.size(); ++i) {
      if (i) out << ",";
      out << a.profile[i].watts << "x" << a.profile[i].minutes;
    }
    out << "\nweights_raw ";
    for (int i = 0; i < kWeightSlots; ++i) {
      if (i) out << ",";
      out << a.activation_weights[i];
    }
    out << "\nend\n";
  }
  if (!out) throw std::runtime_error("save_catalog: write failed");
}

const std::vector<ApplianceSpec>& default_catalog() {
  static const std::vector<ApplianceSpec> catalog = parse_catalog(detail::kCatalogText);
  return catalog;
}

double lighting_factor(int month) {
  if (month < 1 || month > 12) throw std::invalid_argument("lighting_factor: month must be 1..12");
  // Annual cosine around mid-month anchors: longest evenings in January,
  // shortest in July.
  return 1.0 + 0.45 * std::cos(2.0 * std::numbers::pi * (month - 0.5) / 12.0);
}

namespace {

struct OccupancyCurves {
  std::array<double, kWeightSlots> on;   // inactive -> active
  std::array<double, kWeightSlots> off;  // active -> inactive
};

OccupancyCurves occupancy_curves(const DayConfig& day) {
  OccupancyCurves c;
  auto fill = [](std::array<double, kWeightSlots>& a, int m0, int m1, double v) {
    for (int s = m0 / 10; s < m1 / 10; ++s) a[s] = v;
  };
  // Overnight.
  fill(c.on, 0, 360, 0.02);
  fill(c.off, 0, 360, 0.50);
  // Morning.
  fill(c.on, 360, 540, 0.35);
  fill(c.off, 360, 540, 0.12);
  // Working day.
  if (day.weekend) {
    fill(c.on, 540, 1020, 0.18);
    fill(c.off, 540, 1020, 0.15);
  } else {
    fill(c.on, 540, 1020, 0.05);
    fill(c.off, 540, 1020, 0.35);
  }
  // Evening.
  fill(c.on, 1020, 1320, 0.40);
  fill(c.off, 1020, 1320, 0.06);
  // Late night.
  fill(c.on, 1320, 1440, 0.06);
  fill(c.off, 1320, 1440, 0.45);
  return c;
}

int poisson_draw(double mean, RngStream& rng) {
  // Knuth's product method; means here are single digits.
  const double limit = std::exp(-mean);
  int k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= rng.next_double_open();
  } while (p > limit);
  return k - 1;
}

// Categorical draw over the 144 slots by weight, -1 when total mass is 0.
int draw_slot(std::span<const double> weights, RngStream& rng) {
  double total = 0;
  for (const double w : weights) total += w;
  if (!(total > 0)) return -1;
  double u = rng.next_double() * total;
  for (int s = 0; s < kWeightSlots; ++s) {
    u -= weights[s];
    if (u < 0) return s;
  }
  return kWeightSlots - 1;
}

void add_profile(std::vector<double>& minutes, std::span<const ProfileSegment> profile,
                 int start) {
  int t = start;
  for (const auto& seg : profile) {
    for (int i = 0; i < seg.minutes; ++i, ++t) {
      if (t < 0) continue;
      if (t >= kMinutesPerDay) return;
      minutes[t] += seg.watts;
    }
  }
}

int profile_minutes(std::span<const ProfileSegment> profile) {
  int total = 0;
  for (const auto& seg : profile) total += seg.minutes;
  return total;
}

ApplianceTrace run_active(const ApplianceSpec& spec, int residents,
                          const DayConfig& day,
                          const std::array<bool, kWeightSlots>& occupancy,
                          RngStream& rng) {
  ApplianceTrace out;
  out.name = spec.name;
  out.minutes.assign(kMinutesPerDay, 0.0);

  double mean = spec.activations_per_day * (0.7 + 0.1 * residents);
  if (spec.name == "lighting") mean *= lighting_factor(day.month);

  std::array<double, kWeightSlots> gated;
  double mass = 0;
  for (int s = 0; s < kWeightSlots; ++s) {
    gated[s] = occupancy[s] ? spec.activation_weights[s] : 0.0;
    mass += gated[s];
  }
  if (!(mass > 0)) return out;  // nobody home when this appliance runs

  const int count = poisson_draw(mean, rng);
  std::vector<int> starts;
  starts.reserve(count);
  for (int i = 0; i < count; ++i) {
    const int slot = draw_slot(gated, rng);
    if (slot < 0) break;
    starts.push_back(slot * 10 + static_cast<int>(rng.next_below(10)));
  }
  std::sort(starts.begin(), starts.end());

  const int duration = profile_minutes(spec.profile);
  int busy_until = -1;
  for (const int start : starts) {
    if (start < busy_until) continue;  // unit already running
    add_profile(out.minutes, spec.profile, start);
    const int d = std::min(duration, kMinutesPerDay - start);
    out.activations.push_back({start, d});
    busy_until = start + duration;
  }
  return out;
}

ApplianceTrace run_passive(const ApplianceSpec& spec, RngStream& rng) {
  ApplianceTrace out;
  out.name = spec.name;
  out.minutes.assign(kMinutesPerDay, 0.0);

  const double period = kMinutesPerDay / spec.activations_per_day;
  const int on_minutes = profile_minutes(spec.profile);

  const int phase_slot = draw_slot(spec.activation_weights, rng);
  const double phase = phase_slot * 10 + rng.next_double() * 10.0;

  const double gap = std::max(0.0, period - on_minutes);
  const double jitter_span = std::min(5.0, gap / 4.0);

  // Walk cycles covering the day, including the one straddling midnight.
  const int first = -static_cast<int>(std::ceil((phase + period) / period));
  for (int k = first;; ++k) {
    double start = phase + k * period;
    if (jitter_span > 0) start += (rng.next_double() * 2.0 - 1.0) * jitter_span;
    const int s = static_cast<int>(std::lround(start));
    if (s >= kMinutesPerDay) break;
    if (s + on_minutes <= 0) continue;
    add_profile(out.minutes, spec.profile, s);
    if (s >= 0) {
      out.activations.push_back({s, std::min(on_minutes, kMinutesPerDay - s)});
    }
  }
  return out;
}

}  // namespace

std::array<bool, kWeightSlots> sample_occupancy(int residents, const DayConfig& day,
                                                RngStream& rng) {
  if (residents < 1) throw std::invalid_argument("sample_occupancy: residents must be >= 1");
  const OccupancyCurves curves = occupancy_curves(day);
  const double boost = std::min(0.95, 0.8 + 0.15 * residents);

  std::array<bool, kWeightSlots> occ{};
  bool active = rng.next_double() < 0.10;
  for (int s = 0; s < kWeightSlots; ++s) {
    const double p_on = std::min(0.95, curves.on[s] * boost);
    if (active) {
      if (rng.next_double() < curves.off[s]) active = false;
    } else {
      if (rng.next_double() < p_on) active = true;
    }
    occ[s] = active;
  }
  return occ;
}

Household build_household(std::uint32_t id, std::span<const ApplianceSpec> catalog,
                          RngStream& rng) {
  if (catalog.empty()) throw std::invalid_argument("build_household: empty catalog");
  Household h;
  h.id = id;
  h.residents = 1 + static_cast<int>(rng.next_below(5));
  for (const auto& spec : catalog) {
    if (rng.next_double() < spec.owner_probability) h.appliances.push_back(spec);
  }
  return h;
}

Trace generate_trace(const Household& household, const DayConfig& day,
                     RngStream& rng, const TraceOptions& options) {
  if (day.month < 1 || day.month > 12) {
    throw std::invalid_argument("generate_trace: month must be 1..12");
  }
  Trace trace;
  trace.household_id = household.id;
  trace.day = day;
  trace.minutes.assign(kMinutesPerDay, 0.0);

  std::array<bool, kWeightSlots> occupancy{};
  if (!options.force_empty_occupancy) {
    occupancy = sample_occupancy(household.residents, day, rng);
  }

  for (const auto& spec : household.appliances) {
    ApplianceTrace component =
        spec.klass == ApplianceClass::Active
            ? run_active(spec, household.residents, day, occupancy, rng)
            : run_passive(spec, rng);
    for (int t = 0; t < kMinutesPerDay; ++t) trace.minutes[t] += component.minutes[t];
    trace.components.push_back(std::move(component));
  }
  return trace;
}

const ApplianceTrace& appliance_component(const Trace& trace, const std::string& name) {
  for (const auto& c : trace.components) {
    if (c.name == name) return c;
  }
  throw std::invalid_argument("appliance_component: '" + name + "' not in trace");
}

std::vector<double> resample(std::span<const double> minutes, int slot_minutes,
                             ResampleMode mode) {
  if (slot_minutes < 1 || kMinutesPerDay % slot_minutes != 0) {
    throw std::invalid_argument("resample: slot_minutes must divide 1440");
  }
  if (minutes.size() != kMinutesPerDay) {
    throw std::invalid_argument("resample: need a 1440-minute series");
  }
  const int slots = kMinutesPerDay / slot_minutes;
  std::vector<double> out(slots, 0.0);
  for (int s = 0; s < slots; ++s) {
    double acc = 0;
    for (int i = 0; i < slot_minutes; ++i) acc += minutes[s * slot_minutes + i];
    out[s] = mode == ResampleMode::Mean ? acc / slot_minutes : acc;
  }
  return out;
}

double daily_mean_watts(const Trace& trace) {
  double acc = 0;
  for (const double v : trace.minutes) acc += v;
  return acc / static_cast<double>(trace.minutes.size());
}

std::vector<CorpusEntry> generate_corpus(std::size_t households, const DayConfig& day,
                                         std::span<const ApplianceSpec> catalog,
                                         std::uint64_t master_seed, int threads) {
  std::vector<CorpusEntry> corpus(households);
  parallel_for(households, threads, [&](std::size_t i) {
    const auto id = static_cast<std::uint32_t>(i);
    auto build_rng = RngStream::derive(master_seed, {id, 1});
    auto trace_rng = RngStream::derive(master_seed, {id, 2});
    corpus[i].household = build_household(id, catalog, build_rng);
    corpus[i].trace = generate_trace(corpus[i].household, day, trace_rng);
  });
  return corpus;
}

}  // namespace dpmeter::tracegen
