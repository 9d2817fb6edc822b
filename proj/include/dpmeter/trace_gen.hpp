#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dpmeter/rng.hpp"

namespace dpmeter::tracegen {

inline constexpr int kMinutesPerDay = 1440;
inline constexpr int kWeightSlots = 144;  // 10-minute diurnal grid

enum class ApplianceClass { Active, Passive };

struct ProfileSegment {
  double watts;
  int minutes;
};

// One catalog entry.  Active appliances switch on when someone is home,
// following the diurnal weights; passive ones free-run on a duty cycle of
// period 1440/activations_per_day minutes, anchored where the weights say.
struct ApplianceSpec {
  std::string name;
  ApplianceClass klass = ApplianceClass::Active;
  std::vector<ProfileSegment> profile;
  double activations_per_day = 1.0;
  std::array<double, kWeightSlots> activation_weights{};  // sums to 1
  double owner_probability = 1.0;
};

// Piecewise weight helper: mass spread uniformly over the slots each
// [start_minute, end_minute) piece covers; pieces may overlap and add.
// The result is normalised.
struct WeightPiece {
  int start_minute;
  int end_minute;
  double mass;
};
std::array<double, kWeightSlots> diurnal_weights(std::span<const WeightPiece> pieces);

// Built-in catalog (compiled-in copy of data/appliances.cat).
const std::vector<ApplianceSpec>& default_catalog();

// Catalog file round-trip.  See data/appliances.cat for the schema.
std::vector<ApplianceSpec> load_catalog(const std::string& path);
std::vector<ApplianceSpec> parse_catalog(const std::string& text);
void save_catalog(const std::string& path, std::span<const ApplianceSpec> catalog);

struct DayConfig {
  int month = 11;  // 1..12; affects lighting via daylight length
  bool weekend = false;
};

struct Household {
  std::uint32_t id = 0;
  int residents = 1;  // uniform 1..5
  std::vector<ApplianceSpec> appliances;
};

struct Activation {
  int start_minute;
  int duration_minutes;
};

struct ApplianceTrace {
  std::string name;
  std::vector<double> minutes;  // 1440 watts
  std::vector<Activation> activations;
};

struct Trace {
  std::uint32_t household_id = 0;
  DayConfig day;
  std::vector<double> minutes;  // 1440 watts, sum of components
  std::vector<ApplianceTrace> components;
};

struct TraceOptions {
  bool force_empty_occupancy = false;  // test hook: nobody home all day
};

// Seasonal multiplier on lighting use, >1 in winter, <1 in summer.
double lighting_factor(int month);

// Ten-minute occupancy chain for one day; true = someone active at home.
std::array<bool, kWeightSlots> sample_occupancy(int residents, const DayConfig& day,
                                                RngStream& rng);

Household build_household(std::uint32_t id, std::span<const ApplianceSpec> catalog,
                          RngStream& rng);

Trace generate_trace(const Household& household, const DayConfig& day,
                     RngStream& rng, const TraceOptions& options = {});

// Component lookup; throws when the household does not carry the appliance.
const ApplianceTrace& appliance_component(const Trace& trace, const std::string& name);

enum class ResampleMode { Mean, Sum };

// 1-minute series to slots of slot_minutes (must divide 1440).
std::vector<double> resample(std::span<const double> minutes, int slot_minutes,
                             ResampleMode mode = ResampleMode::Mean);

double daily_mean_watts(const Trace& trace);

struct CorpusEntry {
  Household household;
  Trace trace;
};

// households entries, ids 0..n-1, one trace each.  Per-household RNG
// streams are derived from master_seed, so the corpus is identical for any
// thread count.
std::vector<CorpusEntry> generate_corpus(std::size_t households, const DayConfig& day,
                                         std::span<const ApplianceSpec> catalog,
                                         std::uint64_t master_seed, int threads = 1);

}  // namespace dpmeter::tracegen
