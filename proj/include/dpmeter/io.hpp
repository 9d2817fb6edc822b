#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dpmeter::io {

// Flat dotted-key configuration: one "key = value" per line, '#' comments.
// Later assignments win, which is also how command-line overrides work.
class Config {
 public:
  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Comma-separated values.
  std::vector<std::string> get_list(const std::string& key,
                                    const std::string& fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

Config parse_config(std::istream& in);
Config load_config(const std::string& path);

// "key=value" from the command line; throws on missing '='.
void apply_override(Config& config, const std::string& assignment);

// FNV-1a over the sorted "key=value" lines; stable across runs, so output
// files can record which configuration produced them.
std::string config_hash(const Config& config);

// Writes config-style "key = value" lines, sorted.
void write_manifest(const std::string& path, const Config& config);

// Minimal CSV writer.  Every file starts with a '#' provenance comment
// (seed and configuration hash) followed by a header row.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& provenance,
            const std::vector<std::string>& header);
  ~CsvWriter();
  CsvWriter(const CsvWriter&) = delete;
  CsvWriter& operator=(const CsvWriter&) = delete;

  void row(const std::vector<std::string>& cells);

 private:
  struct Impl;
  Impl* impl_;
};

std::string format_double(double v);

// CSV reading, enough to round-trip this project's outputs: '#' comment
// lines are skipped, the first remaining line is the header.
struct CsvFile {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
CsvFile read_csv(const std::string& path);

}  // namespace dpmeter::io
