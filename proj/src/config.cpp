#include "scipnet/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace scipnet {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double parse_double(const std::string& where, const std::string& s) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad numeric value for " + where);
  }
  if (pos != s.size())
    throw std::invalid_argument("bad numeric value for " + where);
  return v;
}

std::uint64_t parse_u64(const std::string& where, const std::string& s) {
  std::size_t pos = 0;
  std::uint64_t v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("bad integer value for " + where);
  }
  if (pos != s.size())
    throw std::invalid_argument("bad integer value for " + where);
  return v;
}

}  // namespace

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str());
}

Config Config::from_string(const std::string& text) {
  Config cfg;
  std::stringstream ss(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw std::invalid_argument("config line " + std::to_string(lineno) +
                                  ": empty key");
    cfg.values_[section][key] = value;
  }
  return cfg;
}

const std::string* Config::lookup(const std::string& section,
                                  const std::string& key) const {
  consumed_.insert(section + "." + key);
  const auto sit = values_.find(section);
  if (sit == values_.end()) return nullptr;
  const auto kit = sit->second.find(key);
  return kit == sit->second.end() ? nullptr : &kit->second;
}

bool Config::has(const std::string& section, const std::string& key) const {
  const auto sit = values_.find(section);
  return sit != values_.end() && sit->second.count(key) > 0;
}

std::string Config::get_string(const std::string& section,
                               const std::string& key,
                               const std::string& fallback) const {
  const std::string* v = lookup(section, key);
  const std::string out = v != nullptr ? *v : fallback;
  resolved_[section + "." + key] = out;
  return out;
}

double Config::get_double(const std::string& section, const std::string& key,
                          double fallback) const {
  const std::string* v = lookup(section, key);
  const double out =
      v != nullptr ? parse_double(section + "." + key, *v) : fallback;
  resolved_[section + "." + key] = out;
  return out;
}

int Config::get_int(const std::string& section, const std::string& key,
                    int fallback) const {
  const double v = get_double(section, key, static_cast<double>(fallback));
  const int out = static_cast<int>(v);
  if (static_cast<double>(out) != v)
    throw std::invalid_argument("expected integer for " + section + "." + key);
  resolved_[section + "." + key] = out;
  return out;
}

std::uint64_t Config::get_u64(const std::string& section,
                              const std::string& key,
                              std::uint64_t fallback) const {
  const std::string* v = lookup(section, key);
  const std::uint64_t out =
      v != nullptr ? parse_u64(section + "." + key, *v) : fallback;
  resolved_[section + "." + key] = out;
  return out;
}

std::vector<double> Config::get_doubles(
    const std::string& section, const std::string& key,
    const std::vector<double>& fallback) const {
  const std::string* v = lookup(section, key);
  std::vector<double> out;
  if (v == nullptr) {
    out = fallback;
  } else {
    for (const auto& item : split_list(*v))
      out.push_back(parse_double(section + "." + key, item));
  }
  resolved_[section + "." + key] = out;
  return out;
}

std::vector<std::uint64_t> Config::get_u64s(
    const std::string& section, const std::string& key,
    const std::vector<std::uint64_t>& fallback) const {
  const std::string* v = lookup(section, key);
  std::vector<std::uint64_t> out;
  if (v == nullptr) {
    out = fallback;
  } else {
    for (const auto& item : split_list(*v))
      out.push_back(parse_u64(section + "." + key, item));
  }
  resolved_[section + "." + key] = out;
  return out;
}

std::vector<std::string> Config::get_strings(
    const std::string& section, const std::string& key,
    const std::vector<std::string>& fallback) const {
  const std::string* v = lookup(section, key);
  const std::vector<std::string> out = v != nullptr ? split_list(*v) : fallback;
  resolved_[section + "." + key] = out;
  return out;
}

void Config::finish() const {
  for (const auto& [section, kv] : values_) {
    for (const auto& [key, value] : kv) {
      const std::string full = section + "." + key;
      if (consumed_.count(full) == 0)
        throw std::invalid_argument("unknown config key " + full);
    }
  }
}

nlohmann::json Config::resolved() const { return resolved_; }

std::uint64_t file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ull;
    }
  }
  return h;
}

std::string digest_hex(std::uint64_t digest) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(digest));
  return buf;
}

void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + tmp);
    out << content;
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw std::runtime_error("cannot rename " + tmp);
}

void RunManifest::save(const std::string& path) const {
  nlohmann::json j;
  j["command"] = command;
  j["config"] = config;
  j["seed"] = seed;
  j["inputs"] = input_digests;
  j["outputs"] = output_digests;
  j["wall_clock_s"] = wall_clock_s;
  j["version"] = version;
  atomic_write(path, j.dump(2) + "\n");
}

}  // namespace scipnet
