#include "mmbsn/config_file.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mmbsn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

int to_int(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  int out = 0;
  try {
    out = std::stoi(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size()) throw std::invalid_argument("'" + key + "' expects an integer, got '" + v + "'");
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size()) throw std::invalid_argument("'" + key + "' expects a number, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("'" + key + "' expects true/false, got '" + v + "'");
}

std::vector<int> to_int_list(const std::string& key, std::string v) {
  if (!v.empty() && v.front() == '[' && v.back() == ']') v = v.substr(1, v.size() - 2);
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_int(key, item));
  }
  return out;
}

std::string join(const std::vector<int>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + std::to_string(xs[i]);
  return out;
}

}  // namespace

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"') quoted = !quoted;
      if (line[i] == '#' && !quoted) {
        line.resize(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    }
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
      value = value.substr(1, value.size() - 2);
    }
    out[key] = value;
  }
  return out;
}

void apply_training_keys(TrainingConfig& c, const std::map<std::string, std::string>& keys) {
  auto& a = c.architecture;
  for (const auto& [k, v] : keys) {
    if (k == "arch") c.arch = parse_architecture(v);
    else if (k == "batch") c.batch = to_int(k, v);
    else if (k == "epochs") c.epochs = to_int(k, v);
    else if (k == "lr") c.lr = to_double(k, v);
    else if (k == "lr_decay_every") c.lr_decay_every = to_int(k, v);
    else if (k == "lr_decay") c.lr_decay = to_double(k, v);
    else if (k == "crop") c.crop = to_int(k, v);
    else if (k == "pd_train") c.pd_train = to_int(k, v);
    else if (k == "pd_test") c.pd_test = to_int(k, v);
    else if (k == "augment") c.augment = to_bool(k, v);
    else if (k == "steps_per_epoch") c.steps_per_epoch = to_int(k, v);
    else if (k == "seed") c.seed = static_cast<std::uint64_t>(std::stoull(v));
    else if (k == "base_channels") a.base_channels = to_int(k, v);
    else if (k == "masks") a.masks = parse_mask_list(v);
    else if (k == "cdcl_depth") a.cdcl_depth = to_int(k, v);
    else if (k == "trunk_depth") a.trunk_depth = to_int(k, v);
    else if (k == "kernel_sizes") a.kernel_sizes = to_int_list(k, v);
    else if (k == "dilations") a.dilations = to_int_list(k, v);
    else if (k == "in_channels") a.in_channels = to_int(k, v);
    else throw std::invalid_argument("unknown config key '" + k + "'");
  }
}

TrainingConfig load_training_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config '" + path.string() + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  TrainingConfig c;
  apply_training_keys(c, parse_key_values(ss.str()));
  return c;
}

std::string format_training_config(const TrainingConfig& c) {
  std::ostringstream os;
  std::string masks;
  for (std::size_t i = 0; i < c.architecture.masks.size(); ++i) {
    masks += (i ? "," : "") + mask_name(c.architecture.masks[i]);
  }
  os << "arch = " << architecture_name(c.arch) << "\n"
     << "masks = " << masks << "\n"
     << "base_channels = " << c.architecture.base_channels << "\n"
     << "cdcl_depth = " << c.architecture.cdcl_depth << "\n"
     << "trunk_depth = " << c.architecture.trunk_depth << "\n"
     << "kernel_sizes = " << join(c.architecture.kernel_sizes) << "\n"
     << "dilations = " << join(c.architecture.dilations) << "\n"
     << "in_channels = " << c.architecture.in_channels << "\n"
     << "batch = " << c.batch << "\n"
     << "epochs = " << c.epochs << "\n"
     << "steps_per_epoch = " << c.steps_per_epoch << "\n"
     << "lr = " << c.lr << "\n"
     << "lr_decay_every = " << c.lr_decay_every << "\n"
     << "lr_decay = " << c.lr_decay << "\n"
     << "crop = " << c.crop << "\n"
     << "pd_train = " << c.pd_train << "\n"
     << "pd_test = " << c.pd_test << "\n"
     << "augment = " << (c.augment ? "true" : "false") << "\n"
     << "seed = " << c.seed << "\n";
  return os.str();
}

}  // namespace mmbsn
