#include "roughflow/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <thread>
#include <variant>

#include <openssl/evp.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "roughflow/cocycle.hpp"
#include "roughflow/errors.hpp"
#include "roughflow/gaussian.hpp"
#include "roughflow/rde.hpp"

namespace roughflow::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------- schema helpers

std::string at_key(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }
std::string at_index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
}

void allow_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
  expect_object(j, path);
  for (const auto& [k, v] : j.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
      throw SchemaError(at_key(path, k), "unknown field");
  }
}

const json& need(const json& j, const std::string& key, const std::string& path) {
  expect_object(j, path);
  if (!j.contains(key)) throw SchemaError(at_key(path, key), "missing required field");
  return j.at(key);
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw SchemaError(path, "expected a finite number");
  return v;
}

double positive(const json& j, const std::string& path) {
  const double v = as_number(j, path);
  if (!(v > 0.0)) throw SchemaError(path, "must be positive");
  return v;
}

long long as_integer(const json& j, const std::string& path, long long lo, long long hi) {
  if (!j.is_number_integer()) throw SchemaError(path, "expected an integer");
  const long long v = j.get<long long>();
  if (v < lo || v > hi)
    throw SchemaError(path, "must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return v;
}

std::string as_string(const json& j, const std::string& path) {
  if (!j.is_string() || j.get<std::string>().empty()) throw SchemaError(path, "expected a non-empty string");
  return j.get<std::string>();
}

std::vector<double> as_numbers(const json& j, const std::string& path, std::size_t min_size = 1) {
  if (!j.is_array() || j.size() < min_size)
    throw SchemaError(path, "expected an array of at least " + std::to_string(min_size) + " numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_number(j[i], at_index(path, i)));
  return out;
}

Interval as_interval(const json& j, const std::string& path) {
  const auto v = as_numbers(j, path, 2);
  if (v.size() != 2 || !(v[1] > v[0])) throw SchemaError(path, "expected [start, end] with start < end");
  return {v[0], v[1]};
}

double opt_number(const json& j, const char* key, const std::string& path, double fallback) {
  return j.contains(key) ? as_number(j.at(key), at_key(path, key)) : fallback;
}

std::size_t opt_count(const json& j, const char* key, const std::string& path, std::size_t fallback,
                      long long lo = 1, long long hi = 1000000) {
  return j.contains(key) ? static_cast<std::size_t>(as_integer(j.at(key), at_key(path, key), lo, hi)) : fallback;
}

// ---------------------------------------------------------------- registry

struct KernelEntry {
  std::string base;
  json params = json::object();
};

const std::map<std::string, KernelEntry>& builtin_kernels() {
  static const std::map<std::string, KernelEntry> k{{"bm", {"bm", json::object()}}, {"fbm", {"fbm", json::object()}}};
  return k;
}

const std::vector<std::string>& builtin_families() {
  static const std::vector<std::string> f{"bump_fields", "constant_fields", "linear_fields", "rotation_fields"};
  return f;
}

enum class Kind { sample, smooth_path, lift, driver, solve_rde, solve_driver_flow, check };
enum class Output { none, path, lift, driver, solution, flow };

struct CheckInfo {
  std::vector<Output> inputs;  // empty: no input stage
};

const std::map<std::string, CheckInfo>& builtin_checks() {
  static const std::map<std::string, CheckInfo> c{
      {"chen", {{Output::lift}}},
      {"driver_additivity", {{Output::driver}}},
      {"driver_chen", {{Output::driver}}},
      {"driver_leibniz", {{Output::driver}}},
      {"flow_composition", {{Output::solution, Output::flow}}},
      {"lift_cocycle", {{Output::lift}}},
      {"linear_exact", {{Output::solution}}},
      {"offgrid_decay", {{Output::lift}}},
      {"stationarity", {}},
  };
  return c;
}

std::map<std::string, KernelEntry> kernel_registry(const json& config) {
  auto reg = builtin_kernels();
  if (!config.contains("kernels")) return reg;
  const json& ks = config.at("kernels");
  if (!ks.is_array()) throw SchemaError("kernels", "expected an array");
  for (std::size_t i = 0; i < ks.size(); ++i) {
    const std::string p = at_index("kernels", i);
    allow_keys(ks[i], p, {"name", "base", "params"});
    const std::string name = as_string(need(ks[i], "name", p), at_key(p, "name"));
    const std::string base = as_string(need(ks[i], "base", p), at_key(p, "base"));
    if (!builtin_kernels().count(base)) throw SchemaError(at_key(p, "base"), "unknown base kernel '" + base + "'");
    if (reg.count(name)) throw SchemaError(at_key(p, "name"), "kernel '" + name + "' already registered");
    json params = ks[i].value("params", json::object());
    expect_object(params, at_key(p, "params"));
    reg[name] = {base, params};
  }
  return reg;
}

CovarianceKernel build_kernel(const std::map<std::string, KernelEntry>& reg, const json& spec, const std::string& path) {
  allow_keys(spec, path, {"name", "params"});
  const std::string name = as_string(need(spec, "name", path), at_key(path, "name"));
  const auto it = reg.find(name);
  if (it == reg.end()) throw SchemaError(at_key(path, "name"), "unknown kernel '" + name + "'");
  json params = it->second.params;
  if (spec.contains("params")) {
    expect_object(spec.at("params"), at_key(path, "params"));
    params.update(spec.at("params"));
  }
  const std::string pp = at_key(path, "params");
  if (it->second.base == "bm") {
    allow_keys(params, pp, {});
    return bm_covariance();
  }
  allow_keys(params, pp, {"hurst"});
  const double h = as_number(need(params, "hurst", pp), at_key(pp, "hurst"));
  if (!(h > 0.0 && h < 1.0)) throw SchemaError(at_key(pp, "hurst"), "must be in (0, 1)");
  return fbm_covariance(h);
}

struct FamilySpec {
  VectorFieldFamily family;
  std::optional<std::vector<Mat>> matrices;  // linear families only
};

FamilySpec build_family(const json& spec, const std::string& path) {
  allow_keys(spec, path, {"family", "params"});
  const std::string name = as_string(need(spec, "family", path), at_key(path, "family"));
  const json params = spec.value("params", json::object());
  const std::string pp = at_key(path, "params");
  if (name == "linear_fields") {
    allow_keys(params, pp, {"matrices"});
    const json& ms = need(params, "matrices", pp);
    const std::string mp = at_key(pp, "matrices");
    if (!ms.is_array() || ms.empty()) throw SchemaError(mp, "expected a non-empty array of square matrices");
    std::vector<Mat> mats;
    for (std::size_t i = 0; i < ms.size(); ++i) {
      const std::string ip = at_index(mp, i);
      if (!ms[i].is_array() || ms[i].empty()) throw SchemaError(ip, "expected a square matrix");
      const auto n = static_cast<Eigen::Index>(ms[i].size());
      Mat a(n, n);
      for (Eigen::Index r = 0; r < n; ++r) {
        const auto row = as_numbers(ms[i][static_cast<std::size_t>(r)], at_index(ip, static_cast<std::size_t>(r)));
        if (static_cast<Eigen::Index>(row.size()) != n) throw SchemaError(ip, "expected a square matrix");
        for (Eigen::Index c = 0; c < n; ++c) a(r, c) = row[static_cast<std::size_t>(c)];
      }
      if (!mats.empty() && a.rows() != mats.front().rows()) throw SchemaError(ip, "matrix sizes differ");
      mats.push_back(a);
    }
    return {linear_fields(mats), mats};
  }
  if (name == "rotation_fields") {
    allow_keys(params, pp, {"count"});
    return {rotation_fields(static_cast<int>(opt_count(params, "count", pp, 3, 1, 3))), {}};
  }
  if (name == "constant_fields") {
    allow_keys(params, pp, {"dim", "count"});
    const auto dim = static_cast<int>(as_integer(need(params, "dim", pp), at_key(pp, "dim"), 1, 64));
    return {constant_fields(dim, static_cast<int>(opt_count(params, "count", pp, static_cast<std::size_t>(dim), 1, dim))),
            {}};
  }
  if (name == "bump_fields") {
    allow_keys(params, pp, {"dim", "count", "ratio", "width"});
    const auto dim = static_cast<int>(as_integer(need(params, "dim", pp), at_key(pp, "dim"), 1, 8));
    const auto count = static_cast<int>(as_integer(need(params, "count", pp), at_key(pp, "count"), 1, 64));
    const double ratio = params.contains("ratio") ? positive(params.at("ratio"), at_key(pp, "ratio")) : 0.5;
    const double width = params.contains("width") ? positive(params.at("width"), at_key(pp, "width")) : 1.0;
    return {bump_fields(dim, count, ratio, width), {}};
  }
  throw SchemaError(at_key(path, "family"), "unknown vector-field family '" + name + "'");
}

// ---------------------------------------------------------------- typed config

struct SampleSpec {
  CovarianceKernel kernel;
  EquidistantGrid grid;
  int dim;
  std::uint64_t stream;
};

struct SmoothSpec {
  Interval interval;
  std::size_t nodes;
  std::vector<std::array<double, 3>> components;  // amplitude, frequency, phase
};

struct LiftSpec {
  std::string input;
  int level;
  std::optional<int> dyadic;
};

struct DriverSpec {
  FamilySpec fields;
  std::string noise;
  std::optional<std::size_t> truncation;
  std::optional<double> p;
  double rho;
  double max_tail_ratio;
};

struct SolveSpec {
  FamilySpec fields;
  std::string noise;
  Vec y0;
  double step;
  std::optional<Interval> interval;
};

struct FlowSpec {
  std::string driver;
  Vec y0;
  double step;
  std::optional<Interval> interval;
};

struct CheckSpec {
  std::string check;
  std::string tolerance;
  double threshold;
  std::string input;
  std::vector<int> levels;
  std::vector<double> shifts;
  std::vector<double> windows;
  double shift = 0.0;
  std::size_t triples = 20;
  std::size_t probes = 100;
  // stationarity
  std::optional<SampleSpec> sample;
  std::size_t samples = 0;
  std::vector<double> anchors;
  double window = 0.0;
  double significance = 0.0;
  int level = 2;
};

using StageSpec = std::variant<SampleSpec, SmoothSpec, LiftSpec, DriverSpec, SolveSpec, FlowSpec, CheckSpec>;

struct Stage {
  std::string name;
  std::string path;
  Kind kind;
  Output output;
  StageSpec spec;
};

struct Config {
  std::string name;
  std::uint64_t seed;
  std::map<std::string, double> tolerances;
  std::vector<Stage> stages;
  std::map<std::string, KernelEntry> kernels;
};

const std::map<std::string, std::pair<Kind, Output>>& stage_kinds() {
  static const std::map<std::string, std::pair<Kind, Output>> k{
      {"sample", {Kind::sample, Output::path}},
      {"smooth_path", {Kind::smooth_path, Output::path}},
      {"lift", {Kind::lift, Output::lift}},
      {"driver", {Kind::driver, Output::driver}},
      {"solve_rde", {Kind::solve_rde, Output::solution}},
      {"solve_driver_flow", {Kind::solve_driver_flow, Output::flow}},
      {"check", {Kind::check, Output::none}},
  };
  return k;
}

std::string output_name(Output o) {
  switch (o) {
    case Output::path: return "path";
    case Output::lift: return "lift";
    case Output::driver: return "driver";
    case Output::solution: return "solution";
    case Output::flow: return "flow";
    default: return "nothing";
  }
}

class Parser {
 public:
  Parser(const json& root) : root_(root) {}

  Config parse() {
    expect_object(root_, "");
    allow_keys(root_, "", {"schema_version", "name", "seed", "output_dir", "tolerances", "kernels", "pipeline"});
    const auto version = as_integer(need(root_, "schema_version", ""), "schema_version", 1, 1000);
    if (version != kSchemaVersion)
      throw SchemaError("schema_version", "unsupported version " + std::to_string(version) + " (expected " +
                                              std::to_string(kSchemaVersion) + ")");
    cfg_.name = as_string(need(root_, "name", ""), "name");
    const json& seed = need(root_, "seed", "");
    if (!seed.is_number_unsigned()) throw SchemaError("seed", "expected a non-negative integer");
    cfg_.seed = seed.get<std::uint64_t>();
    if (root_.contains("output_dir")) as_string(root_.at("output_dir"), "output_dir");
    if (root_.contains("tolerances")) {
      const json& t = root_.at("tolerances");
      expect_object(t, "tolerances");
      for (const auto& [k, v] : t.items()) cfg_.tolerances[k] = positive(v, at_key("tolerances", k));
    }
    cfg_.kernels = kernel_registry(root_);
    const json& pipe = need(root_, "pipeline", "");
    if (!pipe.is_array() || pipe.empty()) throw SchemaError("pipeline", "expected a non-empty array of stages");
    for (std::size_t i = 0; i < pipe.size(); ++i) stage(pipe[i], at_index("pipeline", i));
    return std::move(cfg_);
  }

 private:
  const json& root_;
  Config cfg_;
  std::map<std::string, Output> outputs_;

  double tolerance(const json& j, const std::string& path, std::string* name = nullptr) {
    const std::string t = as_string(j, path);
    const auto it = cfg_.tolerances.find(t);
    if (it == cfg_.tolerances.end()) throw SchemaError(path, "unknown tolerance '" + t + "'");
    if (name) *name = t;
    return it->second;
  }

  std::string ref(const json& j, const std::string& key, const std::string& path, std::vector<Output> accepted) {
    const std::string p = at_key(path, key);
    const std::string name = as_string(need(j, key, path), p);
    const auto it = outputs_.find(name);
    if (it == outputs_.end()) throw SchemaError(p, "no earlier stage named '" + name + "'");
    if (std::find(accepted.begin(), accepted.end(), it->second) == accepted.end()) {
      std::string want;
      for (auto o : accepted) want += (want.empty() ? "" : " or ") + output_name(o);
      throw SchemaError(p, "stage '" + name + "' produces a " + output_name(it->second) + ", expected a " + want);
    }
    return name;
  }

  Vec vector(const json& j, const std::string& path) {
    const auto v = as_numbers(j, path);
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
  }

  EquidistantGrid grid(const json& j, const std::string& path) {
    allow_keys(j, path, {"start", "end", "dyadic_level", "count"});
    const double a = as_number(need(j, "start", path), at_key(path, "start"));
    const double b = as_number(need(j, "end", path), at_key(path, "end"));
    if (!(b > a)) throw SchemaError(at_key(path, "end"), "must exceed start");
    if (j.contains("dyadic_level") == j.contains("count"))
      throw SchemaError(path, "exactly one of dyadic_level and count is required");
    if (j.contains("dyadic_level")) {
      const auto n = as_integer(j.at("dyadic_level"), at_key(path, "dyadic_level"), 0, 16);
      EquidistantGrid g;
      try {
        g = EquidistantGrid::dyadic(static_cast<int>(n), a, b);
      } catch (const ArgumentError& e) {
        throw SchemaError(path, e.what());
      }
      if (!same_time(g.start, a) || !same_time(g.end(), b))
        throw SchemaError(path, "start and end must lie on the dyadic grid");
      return g;
    }
    const auto c = as_integer(j.at("count"), at_key(path, "count"), 2, 8193);
    return EquidistantGrid{a, (b - a) / static_cast<double>(c - 1), static_cast<std::size_t>(c)};
  }

  SampleSpec sample(const json& j, const std::string& path, std::uint64_t default_stream) {
    SampleSpec s{build_kernel(cfg_.kernels, need(j, "kernel", path), at_key(path, "kernel")),
                 grid(need(j, "grid", path), at_key(path, "grid")),
                 static_cast<int>(as_integer(need(j, "dim", path), at_key(path, "dim"), 1, 64)), default_stream};
    const double k0 = -s.grid.start / s.grid.spacing;
    if (s.grid.start > kTimeTolerance || s.grid.end() < -kTimeTolerance || std::abs(k0 - std::round(k0)) > 1e-9)
      throw SchemaError(at_key(path, "grid"), "grid must contain 0");
    if (j.contains("stream"))
      s.stream = static_cast<std::uint64_t>(as_integer(j.at("stream"), at_key(path, "stream"), 0, 1ll << 40));
    return s;
  }

  void stage(const json& j, const std::string& path) {
    expect_object(j, path);
    const std::string name = as_string(need(j, "name", path), at_key(path, "name"));
    if (outputs_.count(name)) throw SchemaError(at_key(path, "name"), "duplicate stage name '" + name + "'");
    const std::string type = as_string(need(j, "type", path), at_key(path, "type"));
    const auto kt = stage_kinds().find(type);
    if (kt == stage_kinds().end()) throw SchemaError(at_key(path, "type"), "unknown stage type '" + type + "'");
    const auto [kind, output] = kt->second;
    const auto index = static_cast<std::uint64_t>(cfg_.stages.size());
    StageSpec spec;
    switch (kind) {
      case Kind::sample:
        allow_keys(j, path, {"name", "type", "kernel", "grid", "dim", "stream"});
        spec = sample(j, path, index);
        break;
      case Kind::smooth_path: {
        allow_keys(j, path, {"name", "type", "interval", "nodes", "components"});
        SmoothSpec s{as_interval(need(j, "interval", path), at_key(path, "interval")),
                     static_cast<std::size_t>(as_integer(need(j, "nodes", path), at_key(path, "nodes"), 1, 1 << 20)),
                     {}};
        const json& c = need(j, "components", path);
        const std::string cp = at_key(path, "components");
        if (!c.is_array() || c.empty()) throw SchemaError(cp, "expected one [amplitude, frequency, phase] per dimension");
        for (std::size_t i = 0; i < c.size(); ++i) {
          const auto v = as_numbers(c[i], at_index(cp, i), 3);
          if (v.size() != 3) throw SchemaError(at_index(cp, i), "expected [amplitude, frequency, phase]");
          s.components.push_back({v[0], v[1], v[2]});
        }
        spec = s;
        break;
      }
      case Kind::lift: {
        allow_keys(j, path, {"name", "type", "input", "level", "dyadic_level"});
        LiftSpec s{ref(j, "input", path, {Output::path}),
                   static_cast<int>(as_integer(need(j, "level", path), at_key(path, "level"), 1, 4)), {}};
        if (j.contains("dyadic_level"))
          s.dyadic = static_cast<int>(as_integer(j.at("dyadic_level"), at_key(path, "dyadic_level"), 0, 16));
        spec = s;
        break;
      }
      case Kind::driver: {
        allow_keys(j, path, {"name", "type", "fields", "noise", "truncation", "p", "rho", "max_tail_ratio"});
        DriverSpec s{build_family(need(j, "fields", path), at_key(path, "fields")),
                     ref(j, "noise", path, {Output::lift}),
                     {},
                     {},
                     opt_number(j, "rho", path, 1.0),
                     1.0};
        if (j.contains("truncation"))
          s.truncation = static_cast<std::size_t>(as_integer(j.at("truncation"), at_key(path, "truncation"), 1, 64));
        if (j.contains("p")) s.p = positive(j.at("p"), at_key(path, "p"));
        if (j.contains("max_tail_ratio")) s.max_tail_ratio = tolerance(j.at("max_tail_ratio"), at_key(path, "max_tail_ratio"));
        spec = std::move(s);
        break;
      }
      case Kind::solve_rde: {
        allow_keys(j, path, {"name", "type", "fields", "noise", "y0", "step", "interval"});
        SolveSpec s{build_family(need(j, "fields", path), at_key(path, "fields")),
                    ref(j, "noise", path, {Output::lift}), vector(need(j, "y0", path), at_key(path, "y0")),
                    positive(need(j, "step", path), at_key(path, "step")), {}};
        if (s.y0.size() != s.fields.family.dim())
          throw SchemaError(at_key(path, "y0"), "length must equal the state dimension " +
                                                    std::to_string(s.fields.family.dim()));
        if (j.contains("interval")) s.interval = as_interval(j.at("interval"), at_key(path, "interval"));
        spec = std::move(s);
        break;
      }
      case Kind::solve_driver_flow: {
        allow_keys(j, path, {"name", "type", "driver", "y0", "step", "interval"});
        FlowSpec s{ref(j, "driver", path, {Output::driver}), vector(need(j, "y0", path), at_key(path, "y0")),
                   positive(need(j, "step", path), at_key(path, "step")), {}};
        if (j.contains("interval")) s.interval = as_interval(j.at("interval"), at_key(path, "interval"));
        spec = std::move(s);
        break;
      }
      case Kind::check:
        spec = check(j, path, index);
        break;
    }
    outputs_[name] = output;
    cfg_.stages.push_back({name, path, kind, output, std::move(spec)});
  }

  CheckSpec check(const json& j, const std::string& path, std::uint64_t index) {
    allow_keys(j, path, {"name", "type", "check", "tolerance", "input", "levels", "shifts", "windows", "shift",
                         "triples", "probes", "kernel", "grid", "dim", "stream", "samples", "anchors", "window",
                         "significance", "level"});
    CheckSpec c;
    c.check = as_string(need(j, "check", path), at_key(path, "check"));
    const auto info = builtin_checks().find(c.check);
    if (info == builtin_checks().end()) throw SchemaError(at_key(path, "check"), "unknown check '" + c.check + "'");
    c.threshold = tolerance(need(j, "tolerance", path), at_key(path, "tolerance"), &c.tolerance);
    if (!info->second.inputs.empty()) c.input = ref(j, "input", path, info->second.inputs);
    c.triples = opt_count(j, "triples", path, 20);
    c.probes = opt_count(j, "probes", path, 100);
    auto levels = [&](std::size_t min) {
      const auto v = as_numbers(need(j, "levels", path), at_key(path, "levels"), min);
      for (std::size_t i = 0; i < v.size(); ++i) {
        const std::string lp = at_index(at_key(path, "levels"), i);
        c.levels.push_back(static_cast<int>(as_integer(j.at("levels")[i], lp, 0, 16)));
        if (i > 0 && c.levels[i] <= c.levels[i - 1]) throw SchemaError(lp, "levels must increase");
      }
    };
    if (c.check == "lift_cocycle") {
      if (j.contains("levels")) levels(1);
      c.shifts = as_numbers(need(j, "shifts", path), at_key(path, "shifts"));
      c.windows = as_numbers(need(j, "windows", path), at_key(path, "windows"));
    } else if (c.check == "offgrid_decay") {
      levels(2);
      c.shift = as_number(need(j, "shift", path), at_key(path, "shift"));
      c.windows = as_numbers(need(j, "windows", path), at_key(path, "windows"));
    } else if (c.check == "stationarity") {
      c.sample = sample(j, path, index);
      c.samples = static_cast<std::size_t>(as_integer(need(j, "samples", path), at_key(path, "samples"), 100, 100000));
      c.anchors = as_numbers(need(j, "anchors", path), at_key(path, "anchors"), 2);
      c.window = positive(need(j, "window", path), at_key(path, "window"));
      c.significance = tolerance(need(j, "significance", path), at_key(path, "significance"));
      if (j.contains("level")) c.level = static_cast<int>(as_integer(j.at("level"), at_key(path, "level"), 1, 4));
    }
    return c;
  }
};

// ---------------------------------------------------------------- execution

struct SolutionValue {
  RDESolution solution;
  FamilySpec fields;
  Vec y0;
  SampledRoughPath noise;
};

struct FlowValueOut {
  FlowMap flow;
  Interval interval;
};

using Value = std::variant<std::monostate, PiecewiseLinearPath, NoiseRealization, RoughDriver, SolutionValue,
                           FlowValueOut>;

class StageFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + file.string());
  os << text;
}

std::string csv_header(const std::string& first, std::initializer_list<std::pair<const char*, Eigen::Index>> cols) {
  std::string h = first;
  for (const auto& [prefix, n] : cols)
    for (Eigen::Index a = 0; a < n; ++a) h += "," + std::string(prefix) + std::to_string(a + 1);
  return h + "\n";
}

void append_row(std::string& out, std::initializer_list<double> head, std::initializer_list<const Vec*> tail) {
  bool first = true;
  for (double v : head) {
    out += (first ? "" : ",") + format_number(v);
    first = false;
  }
  for (const Vec* v : tail)
    for (Eigen::Index a = 0; a < v->size(); ++a) out += "," + format_number((*v)(a));
  out += "\n";
}

// node triples i < k < j drawn uniformly
std::vector<std::array<double, 3>> node_triples(const std::vector<double>& nodes, std::size_t count, std::mt19937_64& rng) {
  std::vector<std::array<double, 3>> out;
  if (nodes.size() < 3) return out;
  std::uniform_int_distribution<std::size_t> u(0, nodes.size() - 1);
  while (out.size() < count) {
    std::array<std::size_t, 3> idx{u(rng), u(rng), u(rng)};
    std::sort(idx.begin(), idx.end());
    if (idx[0] == idx[1] || idx[1] == idx[2]) continue;
    out.push_back({nodes[idx[0]], nodes[idx[1]], nodes[idx[2]]});
  }
  return out;
}

class Runner {
 public:
  Runner(const Config& cfg, const fs::path& out, int jobs, std::ostream& log)
      : cfg_(cfg), out_(out), jobs_(std::max(1, jobs)), log_(log) {}

  std::vector<CheckResult> run(json& timing) {
    std::vector<CheckResult> results;
    for (std::size_t i = 0; i < cfg_.stages.size(); ++i) {
      const Stage& st = cfg_.stages[i];
      const auto t0 = std::chrono::steady_clock::now();
      try {
        values_[st.name] = execute(st, i, results);
      } catch (const SchemaError&) {
        throw;
      } catch (const NumericalError& e) {
        throw StageFailure("numerical failure in stage '" + st.name + "': " + e.what());
      } catch (const ConfigError& e) {
        throw SchemaError(st.path, e.what());
      } catch (const ArgumentError& e) {
        throw SchemaError(st.path, e.what());
      }
      timing["stages"][st.name] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
    return results;
  }

 private:
  const Config& cfg_;
  fs::path out_;
  int jobs_;
  std::ostream& log_;
  std::map<std::string, Value> values_;

  template <class T>
  const T& get(const std::string& name) const {
    return std::get<T>(values_.at(name));
  }

  std::mt19937_64 rng_for(std::size_t index) const { return std::mt19937_64(derive_seed(cfg_.seed, 1000 + index)); }

  Value execute(const Stage& st, std::size_t index, std::vector<CheckResult>& results) {
    switch (st.kind) {
      case Kind::sample: {
        const auto& s = std::get<SampleSpec>(st.spec);
        const GaussianSampler sampler(s.kernel, s.grid);
        PiecewiseLinearPath x = sampler.sample(derive_seed(cfg_.seed, s.stream), s.dim);
        save_csv(st.name, x);
        return x;
      }
      case Kind::smooth_path: {
        const auto& s = std::get<SmoothSpec>(st.spec);
        const EquidistantGrid g{s.interval.start, s.interval.length() / static_cast<double>(s.nodes), s.nodes + 1};
        PiecewiseLinearPath x = piecewise_linear_projection(
            [&](double t) {
              Vec v(static_cast<Eigen::Index>(s.components.size()));
              for (std::size_t a = 0; a < s.components.size(); ++a) {
                const auto& c = s.components[a];
                v(static_cast<Eigen::Index>(a)) = c[0] * std::sin(c[1] * t + c[2]);
              }
              return v;
            },
            g);
        save_csv(st.name, x);
        return x;
      }
      case Kind::lift: {
        const auto& s = std::get<LiftSpec>(st.spec);
        NoiseRealization w = make_realization(get<PiecewiseLinearPath>(s.input), s.level, s.dyadic, cfg_.seed,
                                              cfg_.name + "/" + st.name);
        std::ostringstream os;
        write_csv(os, w.omega);
        write_text(out_ / (st.name + ".csv"), os.str());
        return w;
      }
      case Kind::driver: {
        const auto& s = std::get<DriverSpec>(st.spec);
        const auto& noise = get<NoiseRealization>(s.noise).omega;
        RoughDriver d = s.truncation
                            ? gaussian_driver(s.fields.family, noise, *s.truncation, s.rho, s.max_tail_ratio)
                            : driver_from_rough_path(s.fields.family, noise, s.rho);
        if (s.p) d.p = *s.p;
        dump_driver(st.name, d);
        return d;
      }
      case Kind::solve_rde: {
        const auto& s = std::get<SolveSpec>(st.spec);
        const auto& noise = get<NoiseRealization>(s.noise).omega;
        const RDEProblem prob{s.fields.family, noise, s.y0, s.interval.value_or(noise.span())};
        RDESolution sol = solve_rde(prob, {s.step});
        std::string csv = csv_header("t", {{"y", sol.states.rows()}});
        for (std::size_t k = 0; k < sol.times.size(); ++k) {
          const Vec y = sol.states.col(static_cast<Eigen::Index>(k));
          append_row(csv, {sol.times[k]}, {&y});
        }
        write_text(out_ / (st.name + ".csv"), csv);
        return SolutionValue{std::move(sol), s.fields, s.y0, noise};
      }
      case Kind::solve_driver_flow: {
        const auto& s = std::get<FlowSpec>(st.spec);
        const auto& d = get<RoughDriver>(s.driver);
        if (s.y0.size() != d.state_dim)
          throw SchemaError(at_key(st.path, "y0"), "length must equal the state dimension " + std::to_string(d.state_dim));
        const Interval iv = s.interval.value_or(d.span());
        FlowMap flow = solve_driver_flow(d, iv, {s.step});
        std::string csv = csv_header("t", {{"y", d.state_dim}});
        Vec y = s.y0;
        const auto grid = EquidistantGrid::aligned(s.step, iv.start, iv.end);
        double prev = iv.start;
        append_row(csv, {prev}, {&y});
        for (std::size_t k = 0; k < grid.count; ++k) {
          const double t = grid.at(k);
          if (t <= prev + kTimeTolerance) continue;
          y = flow(prev, t, y);
          append_row(csv, {t}, {&y});
          prev = t;
        }
        write_text(out_ / (st.name + ".csv"), csv);
        return FlowValueOut{std::move(flow), iv};
      }
      case Kind::check: {
        const auto& c = std::get<CheckSpec>(st.spec);
        const double value = evaluate(st, c, index);
        if (!std::isfinite(value)) throw NumericalError("check produced a non-finite value");
        results.push_back({st.name, c.check, c.tolerance, value, c.threshold, value < c.threshold});
        log_ << (results.back().pass ? "PASS " : "FAIL ") << st.name << " (" << c.check << "): "
             << format_number(value) << " < " << format_number(c.threshold) << "\n";
        return std::monostate{};
      }
    }
    return std::monostate{};
  }

  void save_csv(const std::string& name, const PiecewiseLinearPath& x) {
    std::ostringstream os;
    write_csv(os, x);
    write_text(out_ / (name + ".csv"), os.str());
  }

  // (s, t, x, V, W) on consecutive cells at three probe points
  void dump_driver(const std::string& name, const RoughDriver& d) {
    const auto pts = probe_points(d.state_dim, 3, cfg_.seed);
    std::string csv = csv_header("s,t", {{"x", d.state_dim}, {"V", d.state_dim}, {"W", d.state_dim}});
    for (std::size_t k = 0; k + 1 < d.grid.size(); ++k)
      for (const Vec& x : pts) {
        const Vec v = d.V(d.grid[k], d.grid[k + 1], x);
        const Vec w = d.W(d.grid[k], d.grid[k + 1], x);
        append_row(csv, {d.grid[k], d.grid[k + 1]}, {&x, &v, &w});
      }
    write_text(out_ / (name + ".csv"), csv);
  }

  void write_series(const std::string& name, const std::string& x_axis, const std::string& y_axis,
                    const std::vector<std::pair<double, double>>& rows) {
    std::string tsv = "# x: " + x_axis + "\n# y: " + y_axis + "\n" + x_axis + "\t" + y_axis + "\n";
    for (const auto& [x, y] : rows) tsv += format_number(x) + "\t" + format_number(y) + "\n";
    write_text(out_ / (name + ".tsv"), tsv);
  }

  std::vector<NoiseRealization> sample_realizations(const SampleSpec& s, std::size_t count, int level) {
    const GaussianSampler sampler(s.kernel, s.grid);
    std::vector<std::optional<NoiseRealization>> slots(count);
    auto work = [&](std::size_t begin) {
      for (std::size_t i = begin; i < count; i += static_cast<std::size_t>(jobs_)) {
        const std::uint64_t seed = derive_seed(derive_seed(cfg_.seed, s.stream), i);
        slots[i] = make_realization(sampler.sample(seed, s.dim), level, std::nullopt, seed);
      }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < jobs_; ++w) pool.emplace_back(work, static_cast<std::size_t>(w));
    work(0);
    for (auto& t : pool) t.join();
    std::vector<NoiseRealization> out;
    out.reserve(count);
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
  }

  double evaluate(const Stage& st, const CheckSpec& c, std::size_t index) {
    auto rng = rng_for(index);
    if (c.check == "chen") {
      const auto& x = get<NoiseRealization>(c.input).omega;
      double worst = 0.0;
      for (const auto& [s, u, t] : node_triples(x.times(), c.triples, rng))
        worst = std::max(worst, flat_distance(tensor_mul(x.increment(s, u), x.increment(u, t)), x.increment(s, t)));
      return worst;
    }
    if (c.check == "lift_cocycle") {
      const auto& w = get<NoiseRealization>(c.input);
      if (c.levels.empty()) return max_cocycle_residual(w, c.shifts, c.windows);
      double worst = 0.0;
      std::vector<std::pair<double, double>> rows;
      for (int n : c.levels) {
        const double r =
            max_cocycle_residual(make_realization(*w.lineage.source, w.tensor_level(), n), c.shifts, c.windows);
        rows.emplace_back(n, r);
        worst = std::max(worst, r);
      }
      write_series(st.name, "dyadic_level", "residual", rows);
      return worst;
    }
    if (c.check == "offgrid_decay") {
      const auto& w = get<NoiseRealization>(c.input);
      std::vector<std::pair<double, double>> rows;
      for (int n : c.levels)
        rows.emplace_back(
            n, max_cocycle_residual(make_realization(*w.lineage.source, w.tensor_level(), n), {c.shift}, c.windows));
      write_series(st.name, "dyadic_level", "residual", rows);
      // largest ratio of consecutive residuals; < 1 means strictly decreasing
      double worst = 0.0;
      for (std::size_t k = 0; k + 1 < rows.size(); ++k) {
        if (!(rows[k].second > 0.0)) throw NumericalError("zero residual at an off-grid shift");
        worst = std::max(worst, rows[k + 1].second / rows[k].second);
      }
      return worst;
    }
    if (c.check == "linear_exact") {
      const auto& sv = get<SolutionValue>(c.input);
      if (!sv.fields.matrices) throw SchemaError(at_key(st.path, "input"), "linear_exact needs linear_fields");
      const auto& mats = *sv.fields.matrices;
      if (static_cast<int>(mats.size()) != sv.noise.dim())
        throw SchemaError(at_key(st.path, "input"), "field count must equal the noise dimension");
      const auto& times = sv.solution.times;
      const GroupElement inc = sv.noise.increment(times.front(), times.back());
      Mat gen = Mat::Zero(mats.front().rows(), mats.front().cols());
      for (std::size_t i = 0; i < mats.size(); ++i) gen += mats[i] * inc[1][i];
      for (std::size_t i = 0; i < mats.size(); ++i)
        for (std::size_t j = 0; j < mats.size(); ++j)
          if ((mats[i] * mats[j] - mats[j] * mats[i]).norm() > 0.0)
            throw SchemaError(at_key(st.path, "input"), "linear_exact needs commuting matrices");
      const Vec exact = gen.exp() * sv.y0;
      return (sv.solution.states.col(sv.solution.states.cols() - 1) - exact).norm();
    }
    if (c.check == "driver_additivity" || c.check == "driver_chen" || c.check == "driver_leibniz") {
      const auto& d = get<RoughDriver>(c.input);
      const auto pts = probe_points(d.state_dim, c.probes, derive_seed(cfg_.seed, 2000 + index));
      double worst = 0.0;
      for (const auto& [s, u, t] : node_triples(d.grid, c.triples, rng)) {
        const double r = c.check == "driver_additivity" ? driver_additivity_residual(d, s, u, t, pts)
                         : c.check == "driver_chen"     ? driver_chen_residual(d, s, u, t, pts)
                                                        : driver_leibniz_residual(d, s, t, pts);
        worst = std::max(worst, r);
      }
      return worst;
    }
    if (c.check == "flow_composition") {
      const Value& v = values_.at(c.input);
      const FlowMap& flow = std::holds_alternative<SolutionValue>(v) ? std::get<SolutionValue>(v).solution.flow
                                                                     : std::get<FlowValueOut>(v).flow;
      const std::vector<double> nodes = std::holds_alternative<SolutionValue>(v)
                                            ? std::get<SolutionValue>(v).solution.times
                                            : flow.nodes();
      const auto pts = probe_points(flow.dim(), c.probes, derive_seed(cfg_.seed, 2000 + index), 1.0);
      double worst = 0.0;
      for (const auto& [s, u, t] : node_triples(nodes, c.triples, rng))
        worst = std::max(worst, flow_composition_residual(flow, s, u, t, pts));
      return worst;
    }
    if (c.check == "stationarity") {
      const auto samples = sample_realizations(*c.sample, c.samples, c.level);
      const auto report = stationarity_diagnostic(samples, c.anchors, c.window, c.significance);
      std::vector<std::pair<double, double>> rows;
      double worst = 0.0;
      for (std::size_t k = 0; k < report.tests.size(); ++k) {
        const double ratio = report.tests[k].statistic / report.tests[k].threshold;
        rows.emplace_back(static_cast<double>(k), ratio);
        worst = std::max(worst, ratio);
      }
      write_series(st.name, "test", "ks_statistic_over_threshold", rows);
      return worst;
    }
    throw SchemaError(at_key(st.path, "check"), "unknown check '" + c.check + "'");
  }
};

std::string hex(const unsigned char* data, unsigned int n) {
  std::ostringstream os;
  for (unsigned int i = 0; i < n; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(data[i]);
  return os.str();
}

std::string digest(const std::string& data, const EVP_MD* md) {
  unsigned char out[EVP_MAX_MD_SIZE];
  unsigned int n = 0;
  if (EVP_Digest(data.data(), data.size(), out, &n, md, nullptr) != 1) throw std::runtime_error("digest failed");
  return hex(out, n);
}

std::string read_file(const fs::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + file.string());
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

json parse_text(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw SchemaError("<document>", std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace

bool RunRecord::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

std::string sha256_hex(const std::string& data) { return digest(data, EVP_sha256()); }

std::string git_blob_sha1(const std::string& data) {
  return digest("blob " + std::to_string(data.size()) + std::string(1, '\0') + data, EVP_sha1());
}

json read_config(const fs::path& file) { return parse_text(read_file(file)); }

void validate_config(const json& config) { Parser(config).parse(); }

fs::path resolve_output_dir(const json& config, const RunOptions& options) {
  if (options.out) return *options.out;
  if (const char* env = std::getenv("ROUGHFLOW_OUT"); env && *env) return env;
  if (config.contains("output_dir") && config.at("output_dir").is_string())
    return config.at("output_dir").get<std::string>();
  return "roughflow_out";
}

RunRecord run_config(const json& input, const std::string& raw_text, const fs::path& out_dir,
                     const RunOptions& options, std::ostream& log) {
  json config = input;
  if (options.seed) config["seed"] = *options.seed;
  const Config cfg = Parser(config).parse();
  fs::create_directories(out_dir);

  const auto t0 = std::chrono::steady_clock::now();
  RunRecord record;
  record.config_sha256 = sha256_hex(config.dump());
  record.input_sha1 = git_blob_sha1(raw_text);
  json timing = {{"stages", json::object()}};
  Runner runner(cfg, out_dir, options.jobs, log);
  record.checks = runner.run(timing);
  record.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  timing["wall_time"] = record.wall_time;

  std::string lines = json{{"record", "run"},
                           {"name", cfg.name},
                           {"schema_version", kSchemaVersion},
                           {"seed", cfg.seed},
                           {"config_sha256", record.config_sha256},
                           {"input_sha1", record.input_sha1}}
                          .dump() +
                      "\n";
  for (const auto& c : record.checks)
    lines += json{{"record", "check"},     {"name", c.name},           {"check", c.check},
                  {"tolerance", c.tolerance}, {"value", c.value}, {"threshold", c.threshold},
                  {"pass", c.pass}}
                 .dump() +
             "\n";
  lines += json{{"record", "summary"}, {"checks", record.checks.size()}, {"pass", record.pass()}}.dump() + "\n";
  write_text(out_dir / "record.jsonl", lines);
  write_text(out_dir / "timing.json", timing.dump(2) + "\n");
  return record;
}

std::string list_registry(const json* config) {
  std::ostringstream os;
  os << "kernels:\n";
  for (const auto& [name, entry] : config ? kernel_registry(*config) : builtin_kernels()) {
    os << "  " << name;
    if (name != entry.base) os << " (" << entry.base << " " << entry.params.dump() << ")";
    os << "\n";
  }
  os << "families:\n";
  for (const auto& f : builtin_families()) os << "  " << f << "\n";
  os << "checks:\n";
  for (const auto& [name, info] : builtin_checks()) os << "  " << name << "\n";
  return os.str();
}

int command_run(const fs::path& file, const RunOptions& options, std::ostream& out, std::ostream& err) {
  std::string raw;
  json config;
  try {
    raw = read_file(file);
    config = parse_text(raw);
    validate_config(config);
    const fs::path dir = resolve_output_dir(config, options);
    const RunRecord record = run_config(config, raw, dir, options, out);
    out << (record.pass() ? "all checks passed" : "some checks failed") << " (" << record.checks.size()
        << " checks, record in " << (dir / "record.jsonl").string() << ")\n";
    return record.pass() ? kPass : kCheckFailed;
  } catch (const SchemaError& e) {
    err << "schema violation at " << e.what() << "\n";
    return kSchemaViolation;
  } catch (const StageFailure& e) {
    err << e.what() << "\n";
    return kNumericalFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kSchemaViolation;
  }
}

int command_validate(const fs::path& file, std::ostream& out, std::ostream& err) {
  try {
    validate_config(read_config(file));
    out << file.string() << ": ok\n";
    return kPass;
  } catch (const SchemaError& e) {
    err << "schema violation at " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return kSchemaViolation;
}

int command_list(const std::optional<fs::path>& config, std::ostream& out, std::ostream& err) {
  try {
    if (config) {
      const json j = read_config(*config);
      out << list_registry(&j);
    } else {
      out << list_registry();
    }
    return kPass;
  } catch (const SchemaError& e) {
    err << "schema violation at " << e.what() << "\n";
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
  }
  return kSchemaViolation;
}

}  // namespace roughflow::cli
