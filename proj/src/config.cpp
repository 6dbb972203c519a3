#include "hprn/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace hprn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "off" || v == "no") return false;
  throw ConfigError(key + ": expected true|false, got '" + v + "'");
}

std::vector<std::size_t> to_size_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_size(key, trim(item)));
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

#define SIZE_KEY(group, field) {#field, [](RunConfig& c, const std::string& k, const std::string& v) { c.group.field = to_size(k, v); }}
#define REAL_KEY(group, field) {#field, [](RunConfig& c, const std::string& k, const std::string& v) { c.group.field = to_double(k, v); }}
#define BOOL_KEY(group, field) {#field, [](RunConfig& c, const std::string& k, const std::string& v) { c.group.field = to_bool(k, v); }}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      SIZE_KEY(model, bands),
      SIZE_KEY(model, channels),
      SIZE_KEY(model, n_mrb),
      SIZE_KEY(model, tcrm_r),
      SIZE_KEY(model, tcrm_grid_h),
      SIZE_KEY(model, tcrm_grid_w),
      {"tcrm_position",
       [](RunConfig& c, const std::string&, const std::string& v) {
         try {
           c.model.tcrm_position = parse_tcrm_position(v);
         } catch (const ContractError& e) {
           throw ConfigError(e.what());
         }
       }},
      SIZE_KEY(model, attention_heads),
      BOOL_KEY(model, attention_scaling),
      BOOL_KEY(model, use_ssrm),
      SIZE_KEY(model, ssrm_groups),
      {"ssrm_scales",
       [](RunConfig& c, const std::string& k, const std::string& v) { c.model.ssrm_scales = to_size_list(k, v); }},
      BOOL_KEY(model, ssrm_shared_embedding),
      BOOL_KEY(model, ssrm_residual),
      REAL_KEY(model, sopc_tau),
      REAL_KEY(model, slic_compactness),
      SIZE_KEY(model, slic_max_iters),
      REAL_KEY(train, lr0),
      REAL_KEY(train, beta1),
      REAL_KEY(train, beta2),
      REAL_KEY(train, adam_eps),
      REAL_KEY(train, decay_power),
      SIZE_KEY(train, epochs),
      SIZE_KEY(train, steps_per_epoch),
      SIZE_KEY(train, batch_size),
      SIZE_KEY(train, patch_size),
      {"seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.train.seed = to_size(k, v); }},
      SIZE_KEY(train, val_crop),
      {"psnr_formula",
       [](RunConfig& c, const std::string&, const std::string& v) {
         try {
           c.psnr_formula = parse_psnr_formula(v);
         } catch (const ContractError& e) {
           throw ConfigError(e.what());
         }
       }},
      {"precision",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         const auto p = to_size(k, v);
         if (p != 32 && p != 64) throw ConfigError("precision must be 32 or 64, got '" + v + "'");
         c.precision = static_cast<int>(p);
       }},
  };
  return table;
}

#undef SIZE_KEY
#undef REAL_KEY
#undef BOOL_KEY

}  // namespace

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (precision != 32 && precision != 64) throw ContractError("precision must be 32 or 64");
}

std::pair<std::string, std::string> parse_assignment(const std::string& entry) {
  const auto eq = entry.find('=');
  if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + entry + "'");
  auto key = trim(entry.substr(0, eq));
  auto value = trim(entry.substr(eq + 1));
  if (key.empty()) throw ConfigError("empty key in '" + entry + "'");
  return {key, value};
}

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap out;
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    try {
      auto [k, v] = parse_assignment(line);
      out[k] = v;
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

ConfigMap read_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config_text(buf.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void apply_config(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second(cfg, key, value);
}

void apply_config(RunConfig& cfg, const ConfigMap& entries) {
  for (const auto& [k, v] : entries) apply_config(cfg, k, v);
}

std::string format_config(const RunConfig& c) {
  std::ostringstream s;
  s.precision(17);
  const auto& m = c.model;
  const auto& t = c.train;
  auto b = [](bool v) { return v ? "true" : "false"; };
  s << "bands = " << m.bands << "\nchannels = " << m.channels << "\nn_mrb = " << m.n_mrb
    << "\ntcrm_r = " << m.tcrm_r << "\ntcrm_grid_h = " << m.tcrm_grid_h << "\ntcrm_grid_w = " << m.tcrm_grid_w
    << "\ntcrm_position = " << to_string(m.tcrm_position) << "\nattention_heads = " << m.attention_heads
    << "\nattention_scaling = " << b(m.attention_scaling) << "\nuse_ssrm = " << b(m.use_ssrm)
    << "\nssrm_groups = " << m.ssrm_groups << "\nssrm_scales = ";
  for (std::size_t i = 0; i < m.ssrm_scales.size(); ++i) s << (i ? "," : "") << m.ssrm_scales[i];
  s << "\nssrm_shared_embedding = " << b(m.ssrm_shared_embedding) << "\nssrm_residual = " << b(m.ssrm_residual)
    << "\nsopc_tau = " << m.sopc_tau << "\nslic_compactness = " << m.slic_compactness
    << "\nslic_max_iters = " << m.slic_max_iters << "\nlr0 = " << t.lr0 << "\nbeta1 = " << t.beta1
    << "\nbeta2 = " << t.beta2 << "\nadam_eps = " << t.adam_eps << "\ndecay_power = " << t.decay_power
    << "\nepochs = " << t.epochs << "\nsteps_per_epoch = " << t.steps_per_epoch << "\nbatch_size = " << t.batch_size
    << "\npatch_size = " << t.patch_size << "\nseed = " << t.seed << "\nval_crop = " << t.val_crop
    << "\npsnr_formula = " << (c.psnr_formula == PsnrFormula::standard ? "standard" : "eq19")
    << "\nprecision = " << c.precision << "\n";
  return s.str();
}

}  // namespace hprn
