#include "smdn/config.hpp"

#include <fstream>
#include <sstream>

#include "smdn/error.hpp"
#include "smdn/pricing.hpp"

namespace smdn::config {

namespace {

using nlohmann::json;

const char* type_label(const json& v) {
  if (v.is_null()) return "null";
  if (v.is_boolean()) return "boolean";
  if (v.is_number_unsigned()) return "unsigned integer";
  if (v.is_number_integer()) return "integer";
  if (v.is_number()) return "number";
  if (v.is_string()) return "string";
  if (v.is_array()) return "array";
  return "object";
}

std::string join(const std::string& base, const std::string& key) { return base.empty() ? key : base + "." + key; }

// Keys whose default is null accept a number as well.
void merge(json& target, const json& user, const std::string& path) {
  if (!user.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  for (const auto& [key, value] : user.items()) {
    const std::string p = join(path, key);
    if (!target.contains(key)) throw ConfigError(p, "unknown key");
    json& slot = target[key];
    if (slot.is_object()) {
      merge(slot, value, p);
      continue;
    }
    bool ok;
    if (slot.is_null()) {
      ok = value.is_null() || value.is_number();
    } else if (slot.is_boolean()) {
      ok = value.is_boolean();
    } else if (slot.is_number_unsigned()) {
      ok = value.is_number_integer() && value.get<std::int64_t>() >= 0;
    } else if (slot.is_number()) {
      ok = value.is_number();
    } else if (slot.is_string()) {
      ok = value.is_string();
    } else {
      ok = value.is_array();
    }
    if (!ok) {
      throw ConfigError(p, std::string("expected ") + type_label(slot) + ", got " + type_label(value));
    }
    slot = value;
  }
}


json& at_path(json& root, const std::string& dotted) {
  json* node = &root;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot - start);
    if (key.empty()) throw ConfigError(dotted, "empty key segment");
    node = &(*node)[key];
    if (dot == std::string::npos) return *node;
    start = dot + 1;
  }
}

void require(bool cond, const std::string& path, const std::string& what) {
  if (!cond) throw ConfigError(path, what);
}

std::vector<double> number_array(const json& v, const std::string& path) {
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    require(v[i].is_number(), path + "[" + std::to_string(i) + "]", "expected number");
    out.push_back(v[i].get<double>());
  }
  return out;
}

std::pair<double, double> range(const json& v, const std::string& path) {
  const auto r = number_array(v, path);
  require(r.size() == 2, path, "expected [lo, hi]");
  require(r[0] <= r[1], path, "lo must not exceed hi");
  return {r[0], r[1]};
}

stochastic::CirParams cir(const json& v, const std::string& path) {
  stochastic::CirParams p;
  p.a = v.at("a").get<double>();
  p.b = v.at("b").get<double>();
  p.c = v.at("c").get<double>();
  std::tie(p.x0_lo, p.x0_hi) = range(v.at("x0"), path + ".x0");
  require(p.a > 0.0, path + ".a", "must be positive");
  require(p.b > 0.0, path + ".b", "must be positive");
  require(p.c > 0.0, path + ".c", "must be positive");
  require(p.x0_lo >= 0.0 && p.x0_hi < 1.0, path + ".x0", "must lie within [0, 1)");
  return p;
}

json cir_default(double a, double b, double c, double lo, double hi) {
  return {{"a", a}, {"b", b}, {"c", c}, {"x0", {lo, hi}}};
}

}  // namespace

json defaults() {
  const mdn::MdnConfig m;
  const mdn::TrainConfig t;
  const stochastic::CirTable c;
  const stochastic::MaturityLaw law;
  const stochastic::LocalVolBox box;
  return {
      {"regime", "tv"},
      {"n_assets", 2u},
      {"signature_level", 5u},
      {"time_augmented", false},
      {"dt", 1.0 / stochastic::kTradingDaysPerYear},
      {"cir",
       {{"rate", cir_default(c.rate.a, c.rate.b, c.rate.c, c.rate.x0_lo, c.rate.x0_hi)},
        {"dividend", cir_default(c.dividend.a, c.dividend.b, c.dividend.c, c.dividend.x0_lo, c.dividend.x0_hi)},
        {"volatility",
         cir_default(c.volatility.a, c.volatility.b, c.volatility.c, c.volatility.x0_lo, c.volatility.x0_hi)}}},
      {"maturity",
       {{"lo", law.lo},
        {"hi", law.hi},
        {"beta_weight", law.beta_weight},
        {"beta_a", law.beta_a},
        {"beta_b", law.beta_b},
        {"fixed", nullptr}}},
      {"local_vol", {{"a", {box.a_lo, box.a_hi}}, {"b", {box.b_lo, box.b_hi}}, {"c", {box.c_lo, box.c_hi}}}},
      {"weights", {{"law", "dirichlet"}, {"alpha", 1.0}, {"fixed", json::array()}}},
      {"tv_weights", json::array()},
      {"dataset", {{"n1", 200u}, {"n2", 100u}, {"M", 30u}, {"validation_n1", 40u}}},
      {"mdn",
       {{"hidden_sizes", m.hidden_sizes},
        {"components", m.components},
        {"mu_activation", "auto"},
        {"epsilon0", m.epsilon0},
        {"leaky_slope", m.leaky_slope},
        {"train_biases", m.train_biases}}},
      {"train", t.to_json()},
      {"evaluation",
       {{"maturities", pricing::default_maturities()},
        {"strikes", {{"lo", 0.8}, {"hi", 1.2}, {"count", 21u}, {"values", json::array()}}},
        {"mc_paths", 100000u},
        {"grid_points", 512u}}},
      {"seeds", {{"data", 0u}, {"evaluation", 0u}}},
      {"paths", {{"data", ""}, {"validation", ""}, {"model", ""}, {"history", ""}}},
  };
}

json parse_text(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string_view::npos && text[first] == '{') {
    try {
      return json::parse(text);
    } catch (const json::parse_error& e) {
      throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
    }
  }
  json root = json::object();
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no), "expected key = value");
    auto trim = [](std::string s) {
      const auto l = s.find_first_not_of(" \t\r");
      const auto r = s.find_last_not_of(" \t\r");
      return l == std::string::npos ? std::string() : s.substr(l, r - l + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string raw = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no), "missing key");
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error&) {
      value = raw;
    }
    at_path(root, key) = value;
  }
  return root;
}

RunConfig from_json(const json& user) {
  if (!user.is_object()) throw ConfigError("<root>", "expected an object");
  if (!user.contains("regime")) throw ConfigError("regime", "required field is missing");
  json merged = defaults();
  merge(merged, user, "");

  RunConfig rc;
  rc.canonical = merged;
  try {
    auto& g = rc.generation;
    try {
      g.regime = features::parse_regime(merged["regime"].get<std::string>());
    } catch (const InvalidInput& e) {
      throw ConfigError("regime", e.what());
    }
    auto& s = g.scenario;
    s.n_assets = merged["n_assets"].get<std::size_t>();
    require(s.n_assets >= 1 && s.n_assets <= 64, "n_assets", "must lie in [1, 64]");
    g.level = merged["signature_level"].get<std::size_t>();
    require(g.level >= 1 && g.level <= 8, "signature_level", "must lie in [1, 8]");
    g.time_augmented = merged["time_augmented"].get<bool>();
    s.dt = merged["dt"].get<double>();
    require(s.dt > 0.0 && s.dt <= 0.1, "dt", "must lie in (0, 0.1]");

    s.cir.rate = cir(merged["cir"]["rate"], "cir.rate");
    s.cir.dividend = cir(merged["cir"]["dividend"], "cir.dividend");
    s.cir.volatility = cir(merged["cir"]["volatility"], "cir.volatility");

    const auto& mat = merged["maturity"];
    s.maturity.lo = mat["lo"].get<double>();
    s.maturity.hi = mat["hi"].get<double>();
    require(s.maturity.lo > 0.0 && s.maturity.lo < s.maturity.hi, "maturity.lo", "must satisfy 0 < lo < hi");
    require(s.maturity.hi <= 1.05, "maturity.hi", "must not exceed 1.05");
    s.maturity.beta_weight = mat["beta_weight"].get<double>();
    require(s.maturity.beta_weight >= 0.0 && s.maturity.beta_weight <= 1.0, "maturity.beta_weight",
            "must lie in [0, 1]");
    s.maturity.beta_a = mat["beta_a"].get<double>();
    s.maturity.beta_b = mat["beta_b"].get<double>();
    require(s.maturity.beta_a > 0.0, "maturity.beta_a", "must be positive");
    require(s.maturity.beta_b > 0.0, "maturity.beta_b", "must be positive");
    if (!mat["fixed"].is_null()) {
      s.maturity.fixed = mat["fixed"].get<double>();
      require(*s.maturity.fixed > 0.0 && *s.maturity.fixed <= 1.05, "maturity.fixed", "must lie in (0, 1.05]");
    }

    const auto& lv = merged["local_vol"];
    std::tie(s.local_vol.a_lo, s.local_vol.a_hi) = range(lv["a"], "local_vol.a");
    std::tie(s.local_vol.b_lo, s.local_vol.b_hi) = range(lv["b"], "local_vol.b");
    std::tie(s.local_vol.c_lo, s.local_vol.c_hi) = range(lv["c"], "local_vol.c");
    require(s.local_vol.b_lo > 0.0, "local_vol.b", "must be positive");
    require(s.local_vol.c_lo > 0.0, "local_vol.c", "must be positive");

    const auto& w = merged["weights"];
    const auto law = w["law"].get<std::string>();
    require(law == "dirichlet" || law == "fixed", "weights.law", "must be dirichlet or fixed");
    s.weights.kind = law == "fixed" ? stochastic::WeightLaw::Kind::kFixed : stochastic::WeightLaw::Kind::kDirichlet;
    s.weights.alpha = w["alpha"].get<double>();
    require(s.weights.alpha > 0.0, "weights.alpha", "must be positive");
    s.weights.fixed = number_array(w["fixed"], "weights.fixed");
    auto check_simplex = [&](const std::vector<double>& v, const std::string& path) {
      require(v.size() == s.n_assets, path, "needs n_assets entries");
      double total = 0.0;
      for (double x : v) {
        require(x >= 0.0, path, "entries must be nonnegative");
        total += x;
      }
      require(std::abs(total - 1.0) <= 1e-12, path, "entries must sum to 1");
    };
    if (s.weights.kind == stochastic::WeightLaw::Kind::kFixed) check_simplex(s.weights.fixed, "weights.fixed");
    s.tv_weights = number_array(merged["tv_weights"], "tv_weights");
    if (!s.tv_weights.empty()) check_simplex(s.tv_weights, "tv_weights");

    const auto& ds = merged["dataset"];
    g.n1 = ds["n1"].get<std::size_t>();
    g.n2 = ds["n2"].get<std::size_t>();
    g.n_targets = ds["M"].get<std::size_t>();
    require(g.n1 >= 1, "dataset.n1", "must be at least 1");
    require(g.n2 >= 1, "dataset.n2", "must be at least 1");
    require(g.n_targets >= 1, "dataset.M", "must be at least 1");
    rc.validation_n1 = ds["validation_n1"].get<std::size_t>();

    const auto& m = merged["mdn"];
    rc.mdn.input_dim = g.layout().dim();
    rc.mdn.hidden_sizes.clear();
    for (std::size_t i = 0; i < m["hidden_sizes"].size(); ++i) {
      const auto& h = m["hidden_sizes"][i];
      const std::string p = "mdn.hidden_sizes[" + std::to_string(i) + "]";
      require(h.is_number_integer() && h.get<std::int64_t>() > 0, p, "expected positive integer");
      rc.mdn.hidden_sizes.push_back(h.get<std::size_t>());
    }
    require(!rc.mdn.hidden_sizes.empty(), "mdn.hidden_sizes", "must be nonempty");
    rc.mdn.components = m["components"].get<std::size_t>();
    require(rc.mdn.components >= 1, "mdn.components", "must be at least 1");
    const auto act = m["mu_activation"].get<std::string>();
    require(act == "auto" || act == "tanh" || act == "identity", "mdn.mu_activation",
            "must be auto, tanh or identity");
    const bool tanh = act == "tanh" || (act == "auto" && g.regime == features::Regime::kTimeVarying);
    rc.mdn.mu_activation = tanh ? mdn::MuActivation::kTanh : mdn::MuActivation::kIdentity;
    rc.mdn.epsilon0 = m["epsilon0"].get<double>();
    require(rc.mdn.epsilon0 > 0.0, "mdn.epsilon0", "must be positive");
    rc.mdn.leaky_slope = m["leaky_slope"].get<double>();
    require(rc.mdn.leaky_slope >= 0.0 && rc.mdn.leaky_slope < 1.0, "mdn.leaky_slope", "must lie in [0, 1)");
    rc.mdn.train_biases = m["train_biases"].get<bool>();

    const auto& t = merged["train"];
    auto& tc = rc.train;
    tc = mdn::TrainConfig::from_json(mdn::TrainConfig{}.to_json());
    tc.learning_rate = t["learning_rate"].get<double>();
    require(tc.learning_rate > 0.0, "train.learning_rate", "must be positive");
    tc.batch_size = t["batch_size"].get<std::size_t>();
    require(tc.batch_size >= 1, "train.batch_size", "must be at least 1");
    tc.weight_decay = t["weight_decay"].get<double>();
    require(tc.weight_decay >= 0.0, "train.weight_decay", "must be nonnegative");
    tc.beta1 = t["beta1"].get<double>();
    require(tc.beta1 >= 0.0 && tc.beta1 < 1.0, "train.beta1", "must lie in [0, 1)");
    tc.beta2 = t["beta2"].get<double>();
    require(tc.beta2 >= 0.0 && tc.beta2 < 1.0, "train.beta2", "must lie in [0, 1)");
    tc.adam_eps = t["adam_eps"].get<double>();
    require(tc.adam_eps > 0.0, "train.adam_eps", "must be positive");
    tc.patience = t["patience"].get<std::size_t>();
    require(tc.patience >= 1, "train.patience", "must be at least 1");
    tc.decay_factor = t["decay_factor"].get<double>();
    require(tc.decay_factor > 0.0 && tc.decay_factor < 1.0, "train.decay_factor", "must lie in (0, 1)");
    tc.min_delta = t["min_delta"].get<double>();
    require(tc.min_delta >= 0.0, "train.min_delta", "must be nonnegative");
    tc.lr_floor = t["lr_floor"].get<double>();
    require(tc.lr_floor > 0.0, "train.lr_floor", "must be positive");
    tc.epochs = t["epochs"].get<std::size_t>();
    tc.validation_fraction = t["validation_fraction"].get<double>();
    require(tc.validation_fraction >= 0.0 && tc.validation_fraction < 1.0, "train.validation_fraction",
            "must lie in [0, 1)");
    tc.seed = t["seed"].get<std::uint64_t>();
    tc.standardize_features = t["standardize_features"].get<bool>();
    tc.calibrate_head = t["calibrate_head"].get<bool>();

    const auto& ev = merged["evaluation"];
    rc.evaluation.maturities = number_array(ev["maturities"], "evaluation.maturities");
    require(!rc.evaluation.maturities.empty(), "evaluation.maturities", "must be nonempty");
    for (double T : rc.evaluation.maturities) {
      require(T > 0.0 && T <= 1.05, "evaluation.maturities", "entries must lie in (0, 1.05]");
    }
    const auto& st = ev["strikes"];
    auto values = number_array(st["values"], "evaluation.strikes.values");
    if (values.empty()) {
      const double lo = st["lo"].get<double>(), hi = st["hi"].get<double>();
      const auto count = st["count"].get<std::size_t>();
      require(lo > 0.0 && lo <= hi, "evaluation.strikes.lo", "must satisfy 0 < lo <= hi");
      require(count >= 1, "evaluation.strikes.count", "must be at least 1");
      values = pricing::linspace(lo, hi, count);
    }
    for (double k : values) require(k > 0.0, "evaluation.strikes", "strikes must be positive");
    rc.evaluation.strikes = values;
    rc.evaluation.mc_paths = ev["mc_paths"].get<std::size_t>();
    require(rc.evaluation.mc_paths >= 2, "evaluation.mc_paths", "must be at least 2");
    rc.evaluation.grid_points = ev["grid_points"].get<std::size_t>();
    require(rc.evaluation.grid_points >= 16, "evaluation.grid_points", "must be at least 16");

    rc.data_seed = merged["seeds"]["data"].get<std::uint64_t>();
    rc.evaluation_seed = merged["seeds"]["evaluation"].get<std::uint64_t>();

    const auto& p = merged["paths"];
    rc.paths = {p["data"].get<std::string>(), p["validation"].get<std::string>(), p["model"].get<std::string>(),
                p["history"].get<std::string>()};
  } catch (const json::exception& e) {
    throw ConfigError("<root>", e.what());
  }
  return rc;
}

RunConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open config file");
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(parse_text(buf.str()));
}

}  // namespace smdn::config
