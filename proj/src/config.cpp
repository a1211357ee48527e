#include "sbrl/config.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "sbrl/errors.hpp"

namespace sbrl {

namespace {

std::string trim(const std::string& s) {
  std::size_t begin = 0, end = s.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(s[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(s[end - 1]))) --end;
  return s.substr(begin, end - begin);
}

double parse_double(const std::string& key, const std::string& value) {
  const char* begin = value.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw ConfigError("key '" + key + "': expected a number, got '" + value + "'");
  return v;
}

long long parse_int(const std::string& key, const std::string& value) {
  const char* begin = value.c_str();
  char* end = nullptr;
  const long long v = std::strtoll(begin, &end, 10);
  if (end == begin || *end != '\0')
    throw ConfigError("key '" + key + "': expected an integer, got '" + value + "'");
  return v;
}

std::vector<int> parse_widths(const std::string& key, const std::string& value) {
  std::vector<int> widths;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    const long long w = parse_int(key, item);
    if (w <= 0) throw ConfigError("key '" + key + "': widths must be positive");
    widths.push_back(static_cast<int>(w));
  }
  if (widths.empty()) throw ConfigError("key '" + key + "': empty width list");
  return widths;
}

}  // namespace

TrainConfig parse_config(const std::string& text) {
  std::map<std::string, std::string> pairs;
  std::string section;
  std::istringstream stream(text);
  std::string line;
  int line_no = 0;
  while (std::getline(stream, line)) {
    ++line_no;
    const std::size_t comment = line.find('#');
    if (comment != std::string::npos) line = line.substr(0, comment);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "environment" && section != "networks" && section != "training" &&
          section != "certification")
        throw ConfigError("unknown section '[" + section + "]'");
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    if (section.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": key outside any section");
    const std::string key = section + "." + trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (pairs.count(key)) throw ConfigError("duplicate key '" + key + "'");
    pairs[key] = value;
  }

  auto it = pairs.find("environment.name");
  if (it == pairs.end()) throw ConfigError("missing required key 'environment.name'");
  TrainConfig config = default_config(it->second);
  pairs.erase(it);

  auto take = [&pairs](const std::string& key) {
    auto found = pairs.find(key);
    if (found == pairs.end()) return std::string();
    std::string value = found->second;
    pairs.erase(found);
    return value;
  };
  auto set_int = [&take](const std::string& key, int& field) {
    const std::string v = take(key);
    if (!v.empty()) field = static_cast<int>(parse_int(key, v));
  };
  auto set_double = [&take](const std::string& key, double& field) {
    const std::string v = take(key);
    if (!v.empty()) field = parse_double(key, v);
  };
  auto set_widths = [&take](const std::string& key, std::vector<int>& field) {
    const std::string v = take(key);
    if (!v.empty()) field = parse_widths(key, v);
  };

  set_int("environment.horizon", config.horizon);
  set_double("environment.dt", config.dt);
  set_widths("networks.policy.widths", config.widths.policy);
  set_widths("networks.drift.widths", config.widths.drift);
  set_widths("networks.diffusion.widths", config.widths.diffusion);
  set_widths("networks.barrier.widths", config.widths.barrier);
  set_int("training.outer_iters", config.outer_iters);
  set_int("training.inner_gen_steps", config.inner_gen_steps);
  set_int("training.lie_samples", config.lie_samples);
  set_double("training.lambda", config.lambda);
  set_double("training.gamma", config.gamma);
  set_double("training.lr_policy", config.lr_policy);
  set_double("training.lr_model", config.lr_model);
  set_double("training.lr_barrier", config.lr_barrier);
  set_int("training.batch_real", config.batch_real);
  set_int("training.batch_synthetic", config.batch_synthetic);
  {
    const std::string v = take("training.seed");
    if (!v.empty()) {
      const long long seed = parse_int("training.seed", v);
      if (seed < 0) throw ConfigError("key 'training.seed': must be nonnegative");
      config.seed = static_cast<std::uint64_t>(seed);
    }
  }
  set_int("certification.pairs", config.cert_pairs);
  set_int("certification.retrain_steps", config.cert_retrain_steps);
  set_int("certification.init_samples", config.cert_init_samples);
  set_int("certification.unsafe_samples", config.cert_unsafe_samples);

  if (!pairs.empty()) throw ConfigError("unknown key '" + pairs.begin()->first + "'");
  validate_config(config);
  return config;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream file(path);
  if (!file) throw ConfigError("cannot open config file: " + path.string());
  std::string text((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

}  // namespace sbrl
