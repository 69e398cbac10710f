#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace scipnet {

// Flat key-value configuration with [section] headers, '#' comments and
// 'key = value' lines. Every key read is tracked; finish() rejects keys the
// run never consumed, so typos fail loudly.
class Config {
 public:
  static Config load(const std::string& path);
  static Config from_string(const std::string& text);

  bool has(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key,
                    double fallback) const;
  int get_int(const std::string& section, const std::string& key,
              int fallback) const;
  std::uint64_t get_u64(const std::string& section, const std::string& key,
                        std::uint64_t fallback) const;
  // Comma-separated lists.
  std::vector<double> get_doubles(const std::string& section,
                                  const std::string& key,
                                  const std::vector<double>& fallback) const;
  std::vector<std::uint64_t> get_u64s(
      const std::string& section, const std::string& key,
      const std::vector<std::uint64_t>& fallback) const;
  std::vector<std::string> get_strings(
      const std::string& section, const std::string& key,
      const std::vector<std::string>& fallback) const;

  // Throws std::invalid_argument naming the first unconsumed key.
  void finish() const;
  // Every consumed key with its resolved (possibly defaulted) value.
  nlohmann::json resolved() const;

 private:
  std::map<std::string, std::map<std::string, std::string>> values_;
  mutable std::set<std::string> consumed_;
  mutable nlohmann::json resolved_ = nlohmann::json::object();
  const std::string* lookup(const std::string& section,
                            const std::string& key) const;
};

// FNV-1a over the file bytes; used for reproducibility digests.
std::uint64_t file_digest(const std::string& path);
std::string digest_hex(std::uint64_t digest);

// Write-then-rename so interrupted runs leave no partial outputs.
void atomic_write(const std::string& path, const std::string& content);

struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> input_digests;
  std::map<std::string, std::string> output_digests;
  double wall_clock_s = 0.0;
  std::string version = "1";

  void save(const std::string& path) const;
};

}  // namespace scipnet
