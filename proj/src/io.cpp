#include "dpmeter/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dpmeter::io {

namespace {

std::string trimmed(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void Config::set(const std::string& key, const std::string& value) {
  if (key.empty()) throw std::invalid_argument("config: empty key");
  values_[key] = value;
}

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

std::string Config::get_string(const std::string& key,
                               const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::int64_t Config::get_int(const std::string& key, std::int64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    const std::int64_t v = std::stoll(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::invalid_argument("config: '" + key + "' is not an integer");
  }
}

std::uint64_t Config::get_u64(const std::string& key, std::uint64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    // stoull quietly wraps "-3"; reject signs outright
    if (it->second.find('-') != std::string::npos) throw std::invalid_argument("");
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::invalid_argument("config: '" + key + "' is not a nonnegative integer");
  }
}

double Config::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    const double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw std::invalid_argument("config: '" + key + "' is not a number");
  }
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw std::invalid_argument("config: '" + key + "' is not a boolean");
}

std::vector<std::string> Config::get_list(const std::string& key,
                                          const std::string& fallback) const {
  const std::string raw = get_string(key, fallback);
  std::vector<std::string> out;
  std::string cur;
  for (const char c : raw) {
    if (c == ',') {
      const std::string t = trimmed(cur);
      if (!t.empty()) out.push_back(t);
      cur.clear();
    } else {
      cur += c;
    }
  }
  const std::string t = trimmed(cur);
  if (!t.empty()) out.push_back(t);
  return out;
}

Config parse_config(std::istream& in) {
  Config c;
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const std::string line = trimmed(raw);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(lineno) +
                               ": expected key = value");
    }
    const std::string key = trimmed(line.substr(0, eq));
    const std::string value = trimmed(line.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error("config line " + std::to_string(lineno) + ": empty key");
    }
    c.set(key, value);
  }
  return c;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  return parse_config(in);
}

void apply_override(Config& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw std::invalid_argument("override must be key=value: " + assignment);
  }
  config.set(trimmed(assignment.substr(0, eq)), trimmed(assignment.substr(eq + 1)));
}

std::string config_hash(const Config& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const std::string& s) {
    for (const char c : s) {
      h ^= static_cast<std::uint8_t>(c);
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [k, v] : config.values()) {
    mix(k);
    mix("=");
    mix(v);
    mix("\n");
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_manifest(const std::string& path, const Config& config) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("manifest: cannot open " + path);
  out << "# run manifest\n";
  for (const auto& [k, v] : config.values()) out << k << " = " << v << "\n";
  if (!out) throw std::runtime_error("manifest: write failed");
}

struct CsvWriter::Impl {
  std::ofstream out;
  std::size_t columns = 0;
};

CsvWriter::CsvWriter(const std::string& path, const std::string& provenance,
                     const std::vector<std::string>& header)
    : impl_(new Impl) {
  impl_->out.open(path);
  if (!impl_->out) {
    delete impl_;
    throw std::runtime_error("csv: cannot open " + path);
  }
  impl_->columns = header.size();
  impl_->out << "# " << provenance << "\n";
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) impl_->out << ",";
    impl_->out << header[i];
  }
  impl_->out << "\n";
}

CsvWriter::~CsvWriter() { delete impl_; }

void CsvWriter::row(const std::vector<std::string>& cells) {
  if (cells.size() != impl_->columns) throw std::invalid_argument("csv: column count mismatch");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) impl_->out << ",";
    impl_->out << cells[i];
  }
  impl_->out << "\n";
  if (!impl_->out) throw std::runtime_error("csv: write failed");
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

CsvFile read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("csv: cannot open " + path);
  CsvFile file;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::string cur;
    for (const char c : line) {
      if (c == ',') {
        cells.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    cells.push_back(cur);
    if (!have_header) {
      file.header = std::move(cells);
      have_header = true;
    } else {
      file.rows.push_back(std::move(cells));
    }
  }
  if (!have_header) throw std::runtime_error("csv: no header in " + path);
  return file;
}

}  // namespace dpmeter::io
