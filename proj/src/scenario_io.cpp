#include "smdn/scenario_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

#include "smdn/error.hpp"

namespace smdn::scenario_io {

namespace {

using nlohmann::json;
using stochastic::RatePath;

void require(bool cond, const std::string& path, const std::string& what) {
  if (!cond) throw ConfigError(path, what);
}

double get_number(const json& j, const std::string& key, const std::string& path) {
  require(j.contains(key), path, "required field is missing");
  require(j.at(key).is_number(), path, "expected number");
  return j.at(key).get<double>();
}

std::vector<double> numbers(const json& v, const std::string& path) {
  require(v.is_array(), path, "expected array");
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    require(v[i].is_number(), path + "[" + std::to_string(i) + "]", "expected number");
    out.push_back(v[i].get<double>());
  }
  return out;
}

std::vector<double> flatten_matrix(const json& v, std::size_t n, const std::string& path) {
  require(v.is_array() && v.size() == n, path, "expected " + std::to_string(n) + " rows");
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = numbers(v[i], path + "[" + std::to_string(i) + "]");
    require(row.size() == n, path + "[" + std::to_string(i) + "]", "expected " + std::to_string(n) + " columns");
    out.insert(out.end(), row.begin(), row.end());
  }
  return out;
}

struct Series {
  std::vector<double> r;
  std::vector<std::vector<double>> q;
  std::vector<std::vector<double>> sigma;
};

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    const auto l = cell.find_first_not_of(" \t\r");
    const auto r = cell.find_last_not_of(" \t\r");
    cells.push_back(l == std::string::npos ? std::string() : cell.substr(l, r - l + 1));
  }
  return cells;
}

Series read_csv(const std::filesystem::path& path, std::size_t n, bool with_sigma) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "series", "cannot open " + path.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "series", "empty CSV file");
  const auto header = split_csv(line);
  std::vector<std::string> expected{"day", "r"};
  for (std::size_t j = 1; j <= n; ++j) expected.push_back("q_" + std::to_string(j));
  if (with_sigma)
    for (std::size_t j = 1; j <= n; ++j) expected.push_back("sigma_" + std::to_string(j));
  require(header == expected, "series", "CSV header must be " + [&] {
    std::string s;
    for (const auto& h : expected) s += (s.empty() ? "" : ",") + h;
    return s;
  }());
  Series s;
  s.q.resize(n);
  if (with_sigma) s.sigma.resize(n);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split_csv(line);
    const std::string where = "series row " + std::to_string(row + 1);
    require(cells.size() == expected.size(), where, "wrong number of columns");
    std::vector<double> v;
    for (const auto& c : cells) {
      char* end = nullptr;
      const double x = std::strtod(c.c_str(), &end);
      require(!c.empty() && end == c.c_str() + c.size() && std::isfinite(x), where, "unparseable number '" + c + "'");
      v.push_back(x);
    }
    require(v[0] == static_cast<double>(row), where, "day index must count 0, 1, 2, ...");
    s.r.push_back(v[1]);
    for (std::size_t j = 0; j < n; ++j) s.q[j].push_back(v[2 + j]);
    if (with_sigma)
      for (std::size_t j = 0; j < n; ++j) s.sigma[j].push_back(v[2 + n + j]);
    ++row;
  }
  return s;
}

// Array or constant; constants are expanded to `points` samples.
std::vector<double> series_entry(const json& v, std::size_t points, const std::string& path) {
  if (v.is_number()) return std::vector<double>(points, v.get<double>());
  return numbers(v, path);
}

Series read_inline(const json& j, std::size_t n, bool with_sigma, std::size_t points) {
  Series s;
  require(j.contains("r"), "series.r", "required field is missing");
  s.r = series_entry(j["r"], points, "series.r");
  auto per_asset = [&](const char* key, std::vector<std::vector<double>>& out) {
    const std::string path = std::string("series.") + key;
    require(j.contains(key), path, "required field is missing");
    const auto& v = j[key];
    if (v.is_number()) {
      out.assign(n, std::vector<double>(points, v.get<double>()));
      return;
    }
    require(v.is_array() && v.size() == n, path, "expected one entry per asset");
    for (std::size_t a = 0; a < n; ++a) out.push_back(series_entry(v[a], points, path + "[" + std::to_string(a) + "]"));
  };
  per_asset("q", s.q);
  if (with_sigma) per_asset("sigma", s.sigma);
  return s;
}

RatePath make_path(std::vector<double> values, double dt, const std::string& path) {
  RatePath p{dt, std::move(values)};
  try {
    p.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(path, e.what());
  }
  return p;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ScenarioFile parse(const json& j, const std::filesystem::path& base_dir) {
  require(j.is_object(), "<root>", "scenario must be a JSON object");
  static const std::vector<std::string> known{"id", "regime", "n_assets", "maturity", "maturities", "dt", "series",
                                              "correlation", "angles", "cholesky", "local_vol", "weights"};
  for (const auto& [key, _] : j.items()) {
    require(std::find(known.begin(), known.end(), key) != known.end(), key, "unknown key");
  }
  ScenarioFile f;
  if (j.contains("id")) {
    require(j["id"].is_string(), "id", "expected string");
    f.id = j["id"].get<std::string>();
  }
  require(j.contains("regime") && j["regime"].is_string(), "regime", "required string field");
  features::Regime regime;
  try {
    regime = features::parse_regime(j["regime"].get<std::string>());
  } catch (const InvalidInput& e) {
    throw ConfigError("regime", e.what());
  }
  require(j.contains("n_assets") && j["n_assets"].is_number_integer() && j["n_assets"].get<std::int64_t>() >= 1,
          "n_assets", "required positive integer");
  const auto n = j["n_assets"].get<std::size_t>();
  const double dt = j.contains("dt") ? get_number(j, "dt", "dt") : 1.0 / stochastic::kTradingDaysPerYear;
  require(dt > 0.0, "dt", "must be positive");

  if (j.contains("maturities")) f.maturities = numbers(j["maturities"], "maturities");
  if (j.contains("maturity")) {
    const double T = get_number(j, "maturity", "maturity");
    if (f.maturities.empty()) f.maturities.push_back(T);
  }
  require(!f.maturities.empty(), "maturity", "give maturity or maturities");
  double horizon = 0.0;
  for (double T : f.maturities) {
    require(T > 0.0 && T <= 1.05, "maturities", "entries must lie in (0, 1.05]");
    horizon = std::max(horizon, T);
  }

  const bool tv = regime == features::Regime::kTimeVarying;
  require(j.contains("series"), "series", "required field is missing");
  Series series;
  if (j["series"].is_string()) {
    series = read_csv(base_dir / j["series"].get<std::string>(), n, tv);
  } else {
    require(j["series"].is_object(), "series", "expected CSV file name or object");
    series = read_inline(j["series"], n, tv, stochastic::steps_to_cover(horizon, dt) + 1);
  }

  stochastic::CholeskyFactor chol = stochastic::CholeskyFactor::identity(n);
  const int given = j.contains("correlation") + j.contains("angles") + j.contains("cholesky");
  require(given <= 1, "correlation", "give at most one of correlation, angles, cholesky");
  try {
    if (j.contains("correlation")) {
      chol = stochastic::CholeskyFactor::from_correlation(n, flatten_matrix(j["correlation"], n, "correlation"));
    } else if (j.contains("angles")) {
      const auto angles = numbers(j["angles"], "angles");
      require(angles.size() == n * (n - 1) / 2, "angles", "expected N(N-1)/2 angles");
      if (n > 1) chol = stochastic::cholesky_from_angles(angles);
    } else if (j.contains("cholesky")) {
      chol = stochastic::CholeskyFactor(n, flatten_matrix(j["cholesky"], n, "cholesky"));
    }
  } catch (const InvalidInput& e) {
    throw ConfigError(j.contains("correlation") ? "correlation" : j.contains("angles") ? "angles" : "cholesky",
                      e.what());
  }

  std::vector<double> weights;
  if (j.contains("weights")) {
    weights = numbers(j["weights"], "weights");
    require(weights.size() == n, "weights", "expected one weight per asset");
    double total = 0.0;
    for (double w : weights) {
      require(w >= 0.0, "weights", "weights must be nonnegative");
      total += w;
    }
    require(std::abs(total - 1.0) <= 1e-12, "weights", "weights must sum to 1");
  } else {
    weights.assign(n, 1.0 / static_cast<double>(n));
  }

  const double T0 = f.maturities.front();
  if (tv) {
    require(!j.contains("local_vol"), "local_vol", "not used by the tv regime");
    stochastic::GbmScenarioTV s;
    s.r = make_path(series.r, dt, "series.r");
    for (std::size_t a = 0; a < n; ++a) {
      s.q.push_back(make_path(series.q[a], dt, "series.q_" + std::to_string(a + 1)));
      s.sigma.push_back(make_path(series.sigma[a], dt, "series.sigma_" + std::to_string(a + 1)));
    }
    s.chol = chol;
    s.maturity = T0;
    f.tv_weights = weights;
    f.scenario = s;
  } else {
    stochastic::GbmScenarioLV s;
    s.r = make_path(series.r, dt, "series.r");
    for (std::size_t a = 0; a < n; ++a) s.q.push_back(make_path(series.q[a], dt, "series.q_" + std::to_string(a + 1)));
    require(j.contains("local_vol") && j["local_vol"].is_array() && j["local_vol"].size() == n, "local_vol",
            "expected one {a, b, c} object per asset");
    for (std::size_t a = 0; a < n; ++a) {
      const std::string p = "local_vol[" + std::to_string(a) + "]";
      const auto& v = j["local_vol"][a];
      require(v.is_object(), p, "expected object");
      stochastic::LocalVolParams lp{get_number(v, "a", p + ".a"), get_number(v, "b", p + ".b"),
                                    get_number(v, "c", p + ".c")};
      s.vol.push_back(lp);
    }
    s.chol = chol;
    s.weights = weights;
    s.maturity = T0;
    f.scenario = s;
  }
  try {
    std::visit(
        [&](auto s) {
          s.maturity = horizon;
          s.validate();
        },
        f.scenario);
  } catch (const InvalidInput& e) {
    throw ConfigError("series", e.what());
  }
  return f;
}

ScenarioFile load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open scenario file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string(), std::string("invalid JSON: ") + e.what());
  }
  return parse(j, path.parent_path());
}

void save(const ScenarioFile& f, const std::filesystem::path& json_path) {
  auto csv_path = json_path;
  csv_path.replace_extension(".csv");
  const bool tv = std::holds_alternative<stochastic::GbmScenarioTV>(f.scenario);
  json j;
  j["id"] = f.id;
  j["regime"] = tv ? "tv" : "lv";
  j["maturities"] = f.maturities;
  j["series"] = csv_path.filename().string();

  std::ofstream csv(csv_path, std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot write " + csv_path.string());
  auto write_rows = [&](const RatePath& r, const std::vector<RatePath>& q, const std::vector<RatePath>* sigma) {
    const std::size_t n = q.size();
    csv << "day,r";
    for (std::size_t a = 1; a <= n; ++a) csv << ",q_" << a;
    if (sigma)
      for (std::size_t a = 1; a <= n; ++a) csv << ",sigma_" << a;
    csv << '\n';
    for (std::size_t k = 0; k < r.values.size(); ++k) {
      csv << k << ',' << fmt(r.values[k]);
      for (const auto& p : q) csv << ',' << fmt(p.values[k]);
      if (sigma)
        for (const auto& p : *sigma) csv << ',' << fmt(p.values[k]);
      csv << '\n';
    }
  };
  auto cholesky_rows = [](const stochastic::CholeskyFactor& c) {
    json rows = json::array();
    for (std::size_t i = 0; i < c.size(); ++i) {
      json row = json::array();
      for (std::size_t k = 0; k < c.size(); ++k) row.push_back(c(i, k));
      rows.push_back(row);
    }
    return rows;
  };
  if (tv) {
    const auto& s = std::get<stochastic::GbmScenarioTV>(f.scenario);
    j["n_assets"] = s.n_assets();
    j["dt"] = s.r.dt;
    j["cholesky"] = cholesky_rows(s.chol);
    j["weights"] = f.tv_weights;
    write_rows(s.r, s.q, &s.sigma);
  } else {
    const auto& s = std::get<stochastic::GbmScenarioLV>(f.scenario);
    j["n_assets"] = s.n_assets();
    j["dt"] = s.r.dt;
    j["cholesky"] = cholesky_rows(s.chol);
    j["weights"] = s.weights;
    json lv = json::array();
    for (const auto& v : s.vol) lv.push_back({{"a", v.a_loc}, {"b", v.b_loc}, {"c", v.c_loc}});
    j["local_vol"] = lv;
    write_rows(s.r, s.q, nullptr);
  }
  std::ofstream out(json_path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + json_path.string());
  out << j.dump(2) << '\n';
}

}  // namespace smdn::scenario_io
