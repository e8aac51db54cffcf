#include "sigwav/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>

#include "sigwav/error.hpp"

namespace sigwav {

namespace pt = boost::property_tree;

namespace {

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

std::string join_doubles(const std::vector<double>& v) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

const char* flag(bool b) { return b ? "true" : "false"; }

template <class T>
T get(const pt::ptree& section, const std::string& where, const std::string& key) {
  const auto raw = section.get<std::string>(key);
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (raw == "true" || raw == "1" || raw == "yes") return true;
      if (raw == "false" || raw == "0" || raw == "no") return false;
      throw std::invalid_argument(raw);
    } else if constexpr (std::is_same_v<T, std::size_t>) {
      std::size_t pos = 0;
      if (!raw.empty() && raw[0] == '-') throw std::invalid_argument(raw);
      const auto v = std::stoull(raw, &pos);
      if (pos != raw.size()) throw std::invalid_argument(raw);
      return static_cast<std::size_t>(v);
    } else if constexpr (std::is_same_v<T, double>) {
      std::size_t pos = 0;
      const auto v = std::stod(raw, &pos);
      if (pos != raw.size()) throw std::invalid_argument(raw);
      return v;
    } else {
      return raw;
    }
  } catch (const std::logic_error&) {
    fail(ErrorCategory::config, "bad value '" + raw + "' for " + where + "." + key);
  }
}

template <class T>
std::vector<T> get_list(const pt::ptree& section, const std::string& where, const std::string& key) {
  std::vector<T> out;
  const auto raw = section.get<std::string>(key);
  if (raw.empty() || raw == "auto") return out;
  std::vector<std::string> parts;
  boost::split(parts, raw, boost::is_any_of(","));
  for (auto& p : parts) {
    boost::trim(p);
    pt::ptree tmp;
    tmp.put("v", p);
    out.push_back(get<T>(tmp, where + "." + key, "v"));
  }
  return out;
}

}  // namespace

const std::vector<std::string>& ablation_tags() {
  static const std::vector<std::string> tags{
      "db10",         "db10+laht",          "1kernel",       "1kernel-layerwise",
      "1kernel+laht", "1kernel-layerwise+laht", "allkernel+laht", "allkernel+laht-nogru"};
  return tags;
}

void apply_ablation(ModelConfig& model, const std::string& tag) {
  using wavelet::Sharing;
  struct Mode {
    Sharing sharing;
    bool laht, gru;
  };
  static const std::vector<std::pair<std::string, Mode>> table{
      {"db10", {Sharing::db10_fixed, false, true}},
      {"db10+laht", {Sharing::db10_fixed, true, true}},
      {"1kernel", {Sharing::single_kernel, false, true}},
      {"1kernel-layerwise", {Sharing::layer_wise, false, true}},
      {"1kernel+laht", {Sharing::single_kernel, true, true}},
      {"1kernel-layerwise+laht", {Sharing::layer_wise, true, true}},
      {"allkernel+laht", {Sharing::all_kernel, true, true}},
      {"allkernel+laht-nogru", {Sharing::all_kernel, true, false}},
  };
  for (const auto& [name, mode] : table)
    if (name == tag) {
      model.frontend.sharing = mode.sharing;
      model.frontend.laht_enabled = mode.laht;
      model.use_gru = mode.gru;
      return;
    }
  fail(ErrorCategory::config, "unknown ablation tag '" + tag + "'");
}

pt::ptree to_ptree(const RunConfig& c) {
  pt::ptree t;
  const auto& m = c.model;
  t.put("model.ablation", c.ablation);
  t.put("model.levels", m.frontend.levels);
  t.put("model.kernel_size", m.frontend.kernel_size);
  t.put("model.sharing", wavelet::to_string(m.frontend.sharing));
  t.put("model.laht", flag(m.frontend.laht_enabled));
  t.put("model.laht_final_approx", flag(m.frontend.laht_final_approx));
  t.put("model.channels", m.features.channels);
  t.put("model.conv_kernel", m.features.kernel);
  t.put("model.dilations", join_sizes(m.features.dilations));
  t.put("model.leaky_slope", fmt(m.features.leaky_slope));
  t.put("model.hidden", m.hidden);
  t.put("model.gru_layers", m.gru_layers);
  t.put("model.dropout", fmt(m.dropout));
  t.put("model.use_gru", flag(m.use_gru));
  t.put("model.per_band", flag(m.per_band));
  t.put("model.head_kernel", m.head_kernel);
  t.put("model.head_instance_norm", flag(m.head_instance_norm));
  t.put("model.classes", m.classes);

  const auto& tr = c.train;
  t.put("train.epochs", tr.epochs);
  t.put("train.batch", tr.batch);
  t.put("train.lr", fmt(tr.adam.lr));
  t.put("train.beta1", fmt(tr.adam.beta1));
  t.put("train.beta2", fmt(tr.adam.beta2));
  t.put("train.adam_eps", fmt(tr.adam.eps));
  t.put("train.gamma", fmt(tr.loss.gamma));
  t.put("train.lambda", fmt(tr.loss.lambda));
  t.put("train.class_alpha", c.auto_alpha ? std::string("auto") : join_doubles(tr.loss.class_alpha));
  t.put("train.seed", tr.seed);
  t.put("train.workers", tr.workers);
  t.put("train.folds", c.folds);
  t.put("train.fold", c.fold);
  t.put("train.test_fraction", fmt(c.test_fraction));
  t.put("train.seed_sweep", c.seed_sweep);

  t.put("data.manifest", c.data.manifest);
  t.put("data.root", c.data.root);
  t.put("data.synthetic_spec", c.data.synthetic_spec);
  t.put("data.emodb_dir", c.data.emodb_dir);
  t.put("data.n_per_class", c.data.n_per_class);
  return t;
}

RunConfig from_ptree(const pt::ptree& tree) {
  const pt::ptree reference = to_ptree(RunConfig{});
  for (const auto& [section, body] : tree) {
    const auto ref = reference.get_child_optional(section);
    require(ref.has_value(), ErrorCategory::config, "unknown config section [" + section + "]");
    for (const auto& [key, _] : body)
      require(ref->get_child_optional(key).has_value(), ErrorCategory::config,
              "unknown config key " + section + "." + key);
  }
  // Fill gaps from defaults so every key is present.
  pt::ptree t = reference;
  for (const auto& [section, body] : tree)
    for (const auto& [key, value] : body) t.put(section + "." + key, value.data());

  RunConfig c;
  const auto& m = t.get_child("model");
  c.ablation = get<std::string>(m, "model", "ablation");
  c.model.frontend.levels = get<std::size_t>(m, "model", "levels");
  c.model.frontend.kernel_size = get<std::size_t>(m, "model", "kernel_size");
  c.model.frontend.sharing = wavelet::parse_sharing(get<std::string>(m, "model", "sharing"));
  c.model.frontend.laht_enabled = get<bool>(m, "model", "laht");
  c.model.frontend.laht_final_approx = get<bool>(m, "model", "laht_final_approx");
  c.model.features.channels = get<std::size_t>(m, "model", "channels");
  c.model.features.kernel = get<std::size_t>(m, "model", "conv_kernel");
  c.model.features.dilations = get_list<std::size_t>(m, "model", "dilations");
  c.model.features.leaky_slope = get<double>(m, "model", "leaky_slope");
  c.model.hidden = get<std::size_t>(m, "model", "hidden");
  c.model.gru_layers = get<std::size_t>(m, "model", "gru_layers");
  c.model.dropout = get<double>(m, "model", "dropout");
  c.model.use_gru = get<bool>(m, "model", "use_gru");
  c.model.per_band = get<bool>(m, "model", "per_band");
  c.model.head_kernel = get<std::size_t>(m, "model", "head_kernel");
  c.model.head_instance_norm = get<bool>(m, "model", "head_instance_norm");
  c.model.classes = get<std::size_t>(m, "model", "classes");
  // The tag wins over the individual switches it controls.
  if (!c.ablation.empty()) apply_ablation(c.model, c.ablation);

  const auto& tr = t.get_child("train");
  c.train.epochs = get<std::size_t>(tr, "train", "epochs");
  c.train.batch = get<std::size_t>(tr, "train", "batch");
  c.train.adam.lr = get<double>(tr, "train", "lr");
  c.train.adam.beta1 = get<double>(tr, "train", "beta1");
  c.train.adam.beta2 = get<double>(tr, "train", "beta2");
  c.train.adam.eps = get<double>(tr, "train", "adam_eps");
  c.train.loss.gamma = get<double>(tr, "train", "gamma");
  c.train.loss.lambda = get<double>(tr, "train", "lambda");
  c.train.loss.class_alpha = get_list<double>(tr, "train", "class_alpha");
  c.auto_alpha = c.train.loss.class_alpha.empty();
  c.train.seed = get<std::size_t>(tr, "train", "seed");
  c.train.workers = static_cast<int>(get<std::size_t>(tr, "train", "workers"));
  c.folds = get<std::size_t>(tr, "train", "folds");
  c.fold = get<std::size_t>(tr, "train", "fold");
  c.test_fraction = get<double>(tr, "train", "test_fraction");
  c.seed_sweep = get<std::size_t>(tr, "train", "seed_sweep");

  const auto& d = t.get_child("data");
  c.data.manifest = get<std::string>(d, "data", "manifest");
  c.data.root = get<std::string>(d, "data", "root");
  c.data.synthetic_spec = get<std::string>(d, "data", "synthetic_spec");
  c.data.emodb_dir = get<std::string>(d, "data", "emodb_dir");
  c.data.n_per_class = get<std::size_t>(d, "data", "n_per_class");

  require(c.model.frontend.levels >= 1, ErrorCategory::config, "model.levels must be >= 1");
  require(c.model.frontend.kernel_size >= 2 && c.model.frontend.kernel_size % 2 == 0,
          ErrorCategory::config, "model.kernel_size must be even and >= 2");
  require(!c.model.features.dilations.empty(), ErrorCategory::config, "model.dilations is empty");
  require(c.model.dropout >= 0 && c.model.dropout < 1, ErrorCategory::config,
          "model.dropout must lie in [0, 1)");
  require(c.model.classes >= 1, ErrorCategory::config, "model.classes must be >= 1");
  require(c.train.batch >= 1, ErrorCategory::config, "train.batch must be >= 1");
  require(c.train.adam.lr > 0, ErrorCategory::config, "train.lr must be positive");
  require(c.train.loss.gamma >= 0, ErrorCategory::config, "train.gamma must be >= 0");
  require(c.train.loss.lambda >= 0, ErrorCategory::config, "train.lambda must be >= 0");
  require(c.folds >= 1, ErrorCategory::config, "train.folds must be >= 1");
  require(c.seed_sweep >= 1, ErrorCategory::config, "train.seed_sweep must be >= 1");
  return c;
}

RunConfig default_config() { return from_ptree(to_ptree(RunConfig{})); }

void apply_overrides(pt::ptree& tree, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    require(eq != std::string::npos && eq > 0, ErrorCategory::config,
            "override '" + o + "' is not of the form section.key=value");
    const std::string path = boost::trim_copy(o.substr(0, eq));
    require(std::count(path.begin(), path.end(), '.') == 1, ErrorCategory::config,
            "override path '" + path + "' must be section.key");
    tree.put(path, boost::trim_copy(o.substr(eq + 1)));
  }
}

RunConfig load_config(const std::string& path) { return resolve_config(path, {}); }

RunConfig resolve_config(const std::string& path, const std::vector<std::string>& overrides) {
  pt::ptree tree;
  if (!path.empty()) {
    std::ifstream in(path);
    require(in.good(), ErrorCategory::config, "cannot open config file " + path);
    try {
      pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
      fail(ErrorCategory::config, path + ": " + e.message() + " at line " + std::to_string(e.line()));
    }
  }
  apply_overrides(tree, overrides);
  return from_ptree(tree);
}

std::vector<std::string> echo_lines(const RunConfig& cfg) {
  std::vector<std::string> out;
  for (const auto& [section, body] : to_ptree(cfg))
    for (const auto& [key, value] : body) out.push_back(section + "." + key + "=" + value.data());
  return out;
}

}  // namespace sigwav
