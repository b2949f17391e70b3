// leafray - experiment configuration: key = value lines with [sections]
#ifndef LEAFRAY_CONFIG_HPP
#define LEAFRAY_CONFIG_HPP

#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "leafray/geometry.hpp"

namespace leafray {

[[noreturn]] inline void config_fail(const std::string& what) {
  fail(ErrorCode::ConfigError, "config: " + what);
}

class KeyValueFile {
 public:
  static KeyValueFile parse(const std::string& path) {
    std::ifstream is(path);
    if (!is) config_fail("cannot open " + path);
    KeyValueFile kv;
    std::string line, section;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      size_t hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      auto trim = [](std::string s) {
        size_t a = s.find_first_not_of(" \t\r");
        size_t b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
      };
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') config_fail("bad section header at line " + std::to_string(lineno));
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      size_t eq = line.find('=');
      if (eq == std::string::npos) config_fail("missing '=' at line " + std::to_string(lineno));
      std::string key = trim(line.substr(0, eq));
      std::string val = trim(line.substr(eq + 1));
      if (key.empty()) config_fail("empty key at line " + std::to_string(lineno));
      kv.values_[section + "." + key] = val;
    }
    return kv;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string str(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }
  std::string required(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) config_fail("missing required field '" + key + "'");
    return it->second;
  }
  double num(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return parse_num(key, it->second);
  }
  double required_num(const std::string& key) const {
    return parse_num(key, required(key));
  }
  long long integer(const std::string& key, long long fallback) const {
    double v = num(key, double(fallback));
    return (long long)(std::llround(v));
  }
  bool flag(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true" || it->second == "1") return true;
    if (it->second == "false" || it->second == "0") return false;
    config_fail("field '" + key + "' is not a boolean");
  }

 private:
  static double parse_num(const std::string& key, const std::string& val) {
    std::istringstream ss(val);
    double v;
    if (!(ss >> v)) config_fail("field '" + key + "' is not numeric");
    return v;
  }
  std::map<std::string, std::string> values_;
};

struct ExperimentConfig {
  std::string kind;
  uint64_t seed = 0;
  std::string out_dir = "out";
  int threads = 0;  // 0: hardware concurrency

  std::string factor = "interval";  // euclidean | conformal | interval
  double kappa = 0.2;
  double length = 3.0;

  double h = 1.0 / 64;
  double T = 1.2;        // x1 half-width of the data window
  double t2 = 1.05;      // second half-width for frame windows
  double box_S = 4.0;    // registry square half-width

  int rank = 2;
  int bumps = 2;
  double amplitude = 0.5;
  bool unitary = false;
  Box support;

  int trials = 8;
  int tensor_degree = 0;  // degree of p in the kernel probe
  int angles = 64;
  int sweep_count = 8;

  double gap_tol = 1e-5;
  double solver_tol = 5e-7;
  double moment_tol = 1e-4;
};

inline SimpleSurface make_surface(const ExperimentConfig& c) {
  if (c.factor == "interval") return SimpleSurface::interval(c.length);
  if (c.factor == "euclidean") return SimpleSurface::disk(0.0);
  if (c.factor == "conformal") return SimpleSurface::disk(c.kappa);
  config_fail("surface.factor must be interval, euclidean, or conformal");
}

inline ExperimentConfig load_config(const std::string& path) {
  KeyValueFile kv = KeyValueFile::parse(path);
  ExperimentConfig c;
  c.kind = kv.required(".kind");
  double seed = kv.required_num(".seed");
  if (seed < 0) config_fail("field 'seed' must be non-negative");
  c.seed = uint64_t(seed);
  c.out_dir = kv.str(".out", c.out_dir);
  c.threads = int(kv.integer(".threads", 0));

  c.factor = kv.str("surface.factor", c.factor);
  c.kappa = kv.num("surface.kappa", c.kappa);
  c.length = kv.num("surface.length", c.length);
  if (c.factor == "conformal" && (c.kappa < 0.0 || c.kappa > 0.5))
    config_fail("field 'surface.kappa' outside the shipped family [0, 0.5]");

  c.h = kv.num("grid.h", c.h);
  if (c.h <= 0) config_fail("field 'grid.h' must be positive");
  c.T = kv.num("grid.T", c.T);
  if (c.T <= 0) config_fail("field 'grid.T' must be positive");
  c.t2 = kv.num("grid.T2", c.t2);
  c.box_S = kv.num("grid.S", c.box_S);

  c.rank = int(kv.integer("generators.rank", c.rank));
  if (c.rank < 1 || c.rank > 4) config_fail("field 'generators.rank' must be in 1..4");
  c.bumps = int(kv.integer("generators.bumps", c.bumps));
  c.amplitude = kv.num("generators.amplitude", c.amplitude);
  c.unitary = kv.flag("generators.unitary", c.unitary);
  if (kv.has("generators.support")) {
    std::istringstream ss(kv.required("generators.support"));
    if (!(ss >> c.support.s0 >> c.support.s1 >> c.support.t0 >> c.support.t1) ||
        !c.support.valid())
      config_fail("field 'generators.support' must be four numbers s0 s1 t0 t1");
  }

  c.trials = int(kv.integer("experiment.trials", c.trials));
  if (c.trials < 1) config_fail("field 'experiment.trials' must be positive");
  c.tensor_degree = int(kv.integer("experiment.m", c.tensor_degree));
  c.angles = int(kv.integer("experiment.angles", c.angles));
  c.sweep_count = int(kv.integer("sweep.count", c.sweep_count));

  c.gap_tol = kv.num("tolerances.gap", c.gap_tol);
  c.solver_tol = kv.num("tolerances.residual", c.solver_tol);
  c.moment_tol = kv.num("tolerances.moment", c.moment_tol);
  if (c.gap_tol <= 0 || c.solver_tol <= 0 || c.moment_tol <= 0)
    config_fail("tolerances must be positive");

  // support boxes must sit inside the data window / surface
  if (c.support.valid()) {
    if (c.support.s0 <= -c.T || c.support.s1 >= c.T)
      config_fail("generators.support leaves (-T, T) in the first coordinate");
    make_surface(c);  // validates the factor family
  }
  static const char* kinds[] = {"kernel-probe", "stokes",   "glue",
                                "holonomy-counterexample",  "symmetry",
                                "attenuated-xray"};
  bool known = false;
  for (const char* k : kinds) known = known || c.kind == k;
  if (!known) config_fail("unknown experiment kind '" + c.kind + "'");
  return c;
}

}  // namespace leafray

#endif
