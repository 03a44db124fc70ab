#include "cli_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "smile/error.hpp"

namespace smile::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ContractError("config: " + key + "=" + v + " is not a number");
  }
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ContractError("config: " + key + "=" + v + " is not a non-negative integer");
  }
  return out;
}

}  // namespace

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "mode",   "lambda", "entropy-variant", "p-init", "p-add", "steps",      "batch-source",
      "batch-target", "seed", "optimizer", "lr", "clip", "source", "target", "test", "checkpoint", "out",
      "eval-every", "preset"};
  return keys;
}

Settings parse_config_text(std::string_view text, std::string_view origin) {
  Settings out;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    const std::string where = std::string(origin) + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw ContractError("config " + where + ": expected key=value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const auto& keys = known_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ContractError("config " + where + ": unknown key '" + key + "'");
    }
    out[key] = trim(std::string_view(t).substr(eq + 1));
  }
  return out;
}

Settings load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ContractError("config: cannot open " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse_config_text(buf.str(), path);
}

Settings merge(const Settings& lower, const Settings& upper) {
  Settings out = lower;
  for (const auto& [k, v] : upper) out[k] = v;
  return out;
}

TrainConfig to_train_config(const Settings& s) {
  TrainConfig c;
  auto get = [&](const char* key) -> const std::string* {
    const auto it = s.find(key);
    return it == s.end() ? nullptr : &it->second;
  };
  if (auto v = get("mode")) c.mode = parse_mode(*v);
  if (auto v = get("lambda")) c.lambda = to_double("lambda", *v);
  if (auto v = get("entropy-variant")) c.variant = parse_entropy_variant(*v);
  if (auto v = get("p-init")) c.pacing.p_init = to_double("p-init", *v);
  if (auto v = get("p-add")) c.pacing.p_add = to_double("p-add", *v);
  if (auto v = get("steps")) c.steps = to_uint("steps", *v);
  if (auto v = get("batch-source")) c.batch_source = to_uint("batch-source", *v);
  if (auto v = get("batch-target")) c.batch_target = to_uint("batch-target", *v);
  if (auto v = get("seed")) c.seed = to_uint("seed", *v);
  if (auto v = get("optimizer")) c.optimizer.kind = parse_optimizer(*v);
  if (auto v = get("lr")) c.optimizer.lr = to_double("lr", *v);
  if (auto v = get("clip")) c.clip = to_double("clip", *v);
  if (auto v = get("eval-every")) c.eval_every = to_uint("eval-every", *v);
  if (auto v = get("source")) c.source_path = *v;
  if (auto v = get("target")) c.target_path = *v;
  if (auto v = get("test")) c.test_path = *v;
  if (auto v = get("checkpoint")) c.checkpoint_path = *v;
  if (auto v = get("out")) c.out_path = *v;
  return c;
}

std::string preset_name(const Settings& s) {
  const auto it = s.find("preset");
  return it == s.end() ? "glyph12" : it->second;
}

}  // namespace smile::cli
