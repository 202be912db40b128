#include "magna/search.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <thread>

namespace magna {

using nlohmann::json;

namespace {

bool rate_like(const std::string& path) {
  auto ends_with = [&](const std::string& suffix) {
    return path.size() >= suffix.size() && path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  return ends_with("learning_rate") || ends_with("weight_decay");
}

SearchDimension parse_dimension(const std::string& path, const json& spec) {
  SearchDimension d;
  d.path = path;
  const std::string where = "search space \"" + path + "\"";
  if (!spec.is_object() || spec.empty()) throw ConfigError(where + ": expected an object");
  std::size_t kinds = spec.count("fixed") + spec.count("range") + spec.count("choice");
  if (kinds != 1) throw ConfigError(where + ": exactly one of fixed, range, choice is required");
  for (const auto& [key, value] : spec.items()) {
    if (key != "fixed" && key != "range" && key != "choice" && key != "scale") {
      throw ConfigError(where + ": unknown key \"" + key + "\"");
    }
  }
  if (spec.contains("fixed")) {
    d.kind = SearchDimension::Kind::fixed;
    d.fixed = spec.at("fixed");
  } else if (spec.contains("choice")) {
    d.kind = SearchDimension::Kind::choice;
    const json& c = spec.at("choice");
    if (!c.is_array() || c.empty()) throw ConfigError(where + ": choice needs a non-empty array");
    d.choices.assign(c.begin(), c.end());
  } else {
    d.kind = SearchDimension::Kind::range;
    const json& r = spec.at("range");
    if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number()) {
      throw ConfigError(where + ": range needs [low, high]");
    }
    d.low = r[0].get<double>();
    d.high = r[1].get<double>();
    d.integer = r[0].is_number_integer() && r[1].is_number_integer();
    d.log_scale = rate_like(path);
    if (spec.contains("scale")) {
      const std::string scale = spec.at("scale").get<std::string>();
      if (scale == "log") {
        d.log_scale = true;
      } else if (scale == "uniform") {
        d.log_scale = false;
      } else {
        throw ConfigError(where + ": scale must be \"log\" or \"uniform\"");
      }
    }
    if (!(std::isfinite(d.low) && std::isfinite(d.high) && d.low <= d.high)) {
      throw ConfigError(where + ": invalid bounds");
    }
    if (d.log_scale && !(d.low > 0.0)) throw ConfigError(where + ": log scale needs positive bounds");
  }
  if (spec.contains("scale") && d.kind != SearchDimension::Kind::range) {
    throw ConfigError(where + ": scale applies only to ranges");
  }
  return d;
}

}  // namespace

json SearchDimension::sample(std::mt19937_64& rng) const {
  switch (kind) {
    case Kind::fixed:
      return fixed;
    case Kind::choice: {
      std::uniform_int_distribution<std::size_t> pick(0, choices.size() - 1);
      return choices[pick(rng)];
    }
    case Kind::range:
      break;
  }
  if (integer && !log_scale) {
    std::uniform_int_distribution<std::int64_t> pick(static_cast<std::int64_t>(low),
                                                     static_cast<std::int64_t>(high));
    return pick(rng);
  }
  double x;
  if (log_scale) {
    std::uniform_real_distribution<double> u(std::log(low), std::log(high));
    x = std::clamp(std::exp(u(rng)), low, high);
  } else {
    std::uniform_real_distribution<double> u(low, high);
    x = low == high ? low : u(rng);
  }
  if (integer) return static_cast<std::int64_t>(std::llround(x));
  return x;
}

SearchSpace SearchSpace::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("search space: expected a JSON object");
  SearchSpace space;
  for (const auto& [key, value] : j.items()) {
    if (key != "base" && key != "parameters") {
      throw ConfigError("search space: unknown key \"" + key + "\"");
    }
  }
  if (j.contains("base")) {
    space.base = j.at("base");
    if (!space.base.is_object()) throw ConfigError("search space: base must be an object");
  }
  if (j.contains("parameters")) {
    const json& params = j.at("parameters");
    if (!params.is_object()) throw ConfigError("search space: parameters must be an object");
    for (const auto& [path, spec] : params.items()) space.dimensions.push_back(parse_dimension(path, spec));
  }
  return space;
}

SearchSpace load_search_space(const std::filesystem::path& file) {
  try {
    return SearchSpace::from_json(read_json_file(file));
  } catch (const ConfigError& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
}

json::json_pointer config_pointer(const std::string& dotted) {
  if (dotted.empty()) throw ConfigError("search space: empty parameter path");
  std::string pointer = "/";
  for (char c : dotted) pointer += c == '.' ? '/' : c;
  return json::json_pointer(pointer);
}

std::vector<TrialResult> random_search(const RunConfig& base, const SearchSpace& space, int trials,
                                       std::uint64_t seed, const TrialRunner& runner, int jobs) {
  if (trials < 1) throw ConfigError("search: trials must be >= 1");
  if (jobs < 1) throw ConfigError("search: jobs must be >= 1");
  json base_json = to_json(base);
  base_json.merge_patch(space.base);

  std::mt19937_64 rng(seed);
  std::vector<TrialResult> table(static_cast<std::size_t>(trials));
  for (int t = 0; t < trials; ++t) {
    TrialResult& r = table[static_cast<std::size_t>(t)];
    r.trial = t;
    r.sampled = json::object();
    json cfg = base_json;
    for (const SearchDimension& d : space.dimensions) {
      json value = d.sample(rng);
      cfg[config_pointer(d.path)] = value;
      r.sampled[d.path] = std::move(value);
    }
    try {
      r.config = run_config_from_json(cfg);
    } catch (const ConfigError& e) {
      throw ConfigError("search: trial " + std::to_string(t) + ": " + e.what());
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < table.size(); i = next++) {
      try {
        table[i].outcome = runner(table[i].config);
      } catch (const std::exception& e) {
        table[i].error = e.what();
      }
    }
  };
  const int workers = std::min(jobs, trials);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }

  std::sort(table.begin(), table.end(), [](const TrialResult& a, const TrialResult& b) {
    const bool fa = !a.error.empty();
    const bool fb = !b.error.empty();
    if (fa != fb) return fb;
    if (!fa && a.outcome.val_metric != b.outcome.val_metric) {
      return a.outcome.val_metric > b.outcome.val_metric;
    }
    return a.trial < b.trial;
  });
  return table;
}

namespace {

std::string csv_field(std::string s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

void write_trial_table(const std::filesystem::path& file, const std::vector<TrialResult>& table,
                       const SearchSpace& space, std::uint64_t seed) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file);
  if (!out) throw DataError(file.string() + ": cannot write");
  out << "# seed=" << seed << '\n';
  out << "rank,trial,val_metric,test_metric,best_epoch";
  for (const SearchDimension& d : space.dimensions) out << ',' << csv_field(d.path);
  out << ",error\n";
  int rank = 1;
  for (const TrialResult& r : table) {
    out << rank++ << ',' << r.trial << ',';
    if (r.error.empty()) {
      out << json(r.outcome.val_metric).dump() << ',' << json(r.outcome.test_metric).dump() << ','
          << r.outcome.best_epoch;
    } else {
      out << ",,";
    }
    for (const SearchDimension& d : space.dimensions) out << ',' << csv_field(r.sampled.at(d.path).dump());
    out << ',' << csv_field(r.error) << '\n';
  }
  if (!out) throw DataError(file.string() + ": write failed");
}

}  // namespace magna
