#include "sra/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace sra {

namespace {

// Keys shared by every profile, with their common defaults.
const std::map<std::string, std::string>& base_values() {
  static const std::map<std::string, std::string> values = {
      {"seed", "1"},
      {"learning_rate", "1e-3"},
      {"batch_size", "32"},
      {"epochs", "5"},
      {"alpha", "10"},
      {"weight_decay", "0.01"},
      {"beta1", "0.9"},
      {"beta2", "0.999"},
      {"adam_eps", "1e-8"},
      {"clip_norm", "1.0"},
      {"max_len", "64"},
      {"d_model", "64"},
      {"n_layers", "2"},
      {"n_heads", "4"},
      {"d_ff", "128"},
      {"dropout", "0.1"},
      {"supervision_layer", "1"},
      {"supervision_head", "0"},
      {"min_freq", "1"},
      {"split_seed", "0"},
      {"strategy", "above_uniform"},
      {"rho", "0.2"},
      {"tau", "0.1"},
      {"gmb_power", "-5"},
      {"iou_threshold", "0.5"},
      {"auprc_pooling", "instance"},
      {"data", ""},
      {"split", ""},
      {"out_dir", "out"},
      {"threads", "0"},
  };
  return values;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::map<std::string, std::string>& v, const std::string& key) {
  const std::string& s = v.at(key);
  try {
    std::size_t used = 0;
    const double x = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + s + "'");
  }
}

long long to_integer(const std::map<std::string, std::string>& v, const std::string& key) {
  const std::string& s = v.at(key);
  long long x = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ConfigError("config key '" + key + "': expected an integer, got '" + s + "'");
  }
  return x;
}

int to_int(const std::map<std::string, std::string>& v, const std::string& key) {
  return static_cast<int>(to_integer(v, key));
}

}  // namespace

const std::vector<std::string>& profile_names() {
  static const std::vector<std::string> names = {"desk", "paper-en", "paper-pt"};
  return names;
}

std::map<std::string, std::string> profile_defaults(const std::string& profile) {
  auto values = base_values();
  values["profile"] = profile;
  if (profile == "desk") return values;
  if (profile == "paper-en") {
    values["learning_rate"] = "2e-5";
    values["batch_size"] = "16";
    values["max_len"] = "128";
    return values;
  }
  if (profile == "paper-pt") {
    values["learning_rate"] = "1e-5";
    values["batch_size"] = "8";
    values["max_len"] = "512";
    return values;
  }
  throw ConfigError("unknown profile '" + profile + "' (expected desk, paper-en or paper-pt)");
}

std::map<std::string, std::string> parse_config_text(const std::string& text, const std::string& origin) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw ConfigError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key != "profile" && !base_values().contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
    if (!out.emplace(key, value).second) throw ConfigError(where + ": duplicate key '" + key + "'");
  }
  return out;
}

std::map<std::string, std::string> read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path.string());
}

ExtractionStrategy parse_strategy(const std::string& name, double rho, double tau) {
  ExtractionStrategy s;
  if (name == "above_uniform" || name == "uniform") {
    s = ExtractionStrategy::above_uniform();
  } else if (name == "topk" || name == "top_k_ratio") {
    s = ExtractionStrategy::top_k_ratio(rho);
  } else if (name == "absolute") {
    s = ExtractionStrategy::absolute(tau);
  } else {
    throw ConfigError("unknown extraction strategy '" + name + "' (expected above_uniform, topk or absolute)");
  }
  s.rho = rho;
  s.tau = tau;
  try {
    s.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return s;
}

RunConfig config_from_values(const std::map<std::string, std::string>& v) {
  for (const auto& [key, _] : base_values()) {
    if (!v.contains(key)) throw ConfigError("config key '" + key + "' is unset");
  }
  RunConfig c;
  c.values = v;
  c.profile = v.contains("profile") ? v.at("profile") : "desk";

  c.train.seed = static_cast<std::uint64_t>(to_integer(v, "seed"));
  c.train.learning_rate = to_double(v, "learning_rate");
  c.train.batch_size = to_int(v, "batch_size");
  c.train.epochs = to_int(v, "epochs");
  c.train.alpha = to_double(v, "alpha");
  c.train.weight_decay = to_double(v, "weight_decay");
  c.train.beta1 = to_double(v, "beta1");
  c.train.beta2 = to_double(v, "beta2");
  c.train.adam_eps = to_double(v, "adam_eps");
  const std::string& clip = v.at("clip_norm");
  if (clip == "none" || clip == "off") {
    c.train.clip_norm.reset();
  } else {
    c.train.clip_norm = to_double(v, "clip_norm");
  }
  c.train.profile = c.profile;

  c.model.max_len = to_int(v, "max_len");
  c.model.d_model = to_int(v, "d_model");
  c.model.n_layers = to_int(v, "n_layers");
  c.model.n_heads = to_int(v, "n_heads");
  c.model.d_ff = to_int(v, "d_ff");
  c.model.dropout = to_double(v, "dropout");
  c.model.supervision_layer = to_int(v, "supervision_layer");
  const std::string& head = v.at("supervision_head");
  c.model.supervision_head = head == "mean" ? kMeanOverHeads : to_int(v, "supervision_head");
  c.model.init_seed = c.train.seed;

  c.min_freq = to_int(v, "min_freq");
  c.split_seed = static_cast<std::uint64_t>(to_integer(v, "split_seed"));
  c.strategy = parse_strategy(v.at("strategy"), to_double(v, "rho"), to_double(v, "tau"));
  c.report.gmb_power = to_double(v, "gmb_power");
  c.report.iou_threshold = to_double(v, "iou_threshold");
  const std::string& pooling = v.at("auprc_pooling");
  if (pooling == "instance") {
    c.report.auprc_pooling = AuprcPooling::kPerInstance;
  } else if (pooling == "micro") {
    c.report.auprc_pooling = AuprcPooling::kMicro;
  } else {
    throw ConfigError("auprc_pooling must be 'instance' or 'micro'");
  }
  c.data = v.at("data");
  c.split = v.at("split");
  c.out_dir = v.at("out_dir");
  c.threads = static_cast<unsigned>(std::max(0, to_int(v, "threads")));

  try {
    c.train.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.min_freq < 1) throw ConfigError("min_freq must be >= 1");
  return c;
}

RunConfig resolve_config(const std::map<std::string, std::string>& file_values, const std::string& file_origin,
                         const std::map<std::string, std::string>& flag_values) {
  std::string profile = "desk";
  std::string profile_source = "default";
  if (auto it = file_values.find("profile"); it != file_values.end()) {
    profile = it->second;
    profile_source = file_origin;
  }
  if (auto it = flag_values.find("profile"); it != flag_values.end()) {
    profile = it->second;
    profile_source = "flag";
  }
  auto values = profile_defaults(profile);
  std::map<std::string, std::string> sources;
  for (const auto& [key, _] : values) sources[key] = "profile:" + profile;
  sources["profile"] = profile_source;
  for (const auto& [key, value] : file_values) {
    if (key == "profile") continue;
    values[key] = value;
    sources[key] = file_origin;
  }
  for (const auto& [key, value] : flag_values) {
    if (key == "profile") continue;
    if (!values.contains(key)) throw ConfigError("unknown config key '" + key + "'");
    values[key] = value;
    sources[key] = "flag";
  }
  RunConfig c = config_from_values(values);
  c.sources = std::move(sources);
  return c;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j;
  j["values"] = values;
  j["sources"] = sources;
  return j;
}

}  // namespace sra
