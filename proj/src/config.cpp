#include "ckpt/config.hpp"

#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ckpt {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

long long to_int(const std::string& v, const std::string& key, const std::string& where) {
  std::size_t pos = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty())
    throw ConfigError(where + ": invalid integer '" + v + "' for key '" + key + "'");
  return out;
}

double to_double(const std::string& v, const std::string& key, const std::string& where) {
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty())
    throw ConfigError(where + ": invalid number '" + v + "' for key '" + key + "'");
  return out;
}

}  // namespace

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::string item;
  std::stringstream ss(text);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ConfigError("empty entry in integer list '" + text + "'");
    std::size_t pos = 0;
    int v = 0;
    try {
      v = std::stoi(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != item.size()) throw ConfigError("invalid integer '" + item + "' in list");
    out.push_back(v);
  }
  return out;
}

void RunConfig::apply(const std::string& key, const std::string& value, const std::string& where) {
  if (key == "n") {
    model.n = int(to_int(value, key, where));
  } else if (key == "dt") {
    model.dt = to_double(value, key, where);
  } else if (key == "kappa") {
    model.kappa = to_double(value, key, where);
  } else if (key == "alpha") {
    model.alpha = to_double(value, key, where);
  } else if (key == "forcing") {
    model.forcing = to_double(value, key, where);
  } else if (key == "solver") {
    if (value == "sor")
      model.solver = SolverKind::Sor;
    else if (value == "pcg")
      model.solver = SolverKind::Pcg;
    else
      throw ConfigError(where + ": solver must be 'sor' or 'pcg', got '" + value + "'");
  } else if (key == "solver_tol") {
    model.solver_tol = to_double(value, key, where);
  } else if (key == "solver_maxit") {
    model.solver_maxit = int(to_int(value, key, where));
  } else if (key == "tangent_mode") {
    if (value == "straightforward")
      model.tangent_mode = TangentMode::Straightforward;
    else if (value == "blackbox")
      model.tangent_mode = TangentMode::Blackbox;
    else
      throw ConfigError(where + ": tangent_mode must be 'straightforward' or 'blackbox', got '" +
                        value + "'");
  } else if (key == "seed") {
    model.seed = std::uint64_t(to_int(value, key, where));
  } else if (key == "steps") {
    steps = int(to_int(value, key, where));
  } else if (key == "strategy") {
    strategy = value;
  } else if (key == "snapshots") {
    snapshots = int(to_int(value, key, where));
  } else if (key == "fanouts") {
    fanouts = parse_int_list(value);
  } else if (key == "stride") {
    stride = int(to_int(value, key, where));
  } else if (key == "row") {
    row = int(to_int(value, key, where));
  } else if (key == "eps") {
    eps = to_double(value, key, where);
  } else if (key == "noise") {
    noise = to_double(value, key, where);
  } else if (key == "max_iters") {
    max_iters = int(to_int(value, key, where));
  } else if (key == "direction_seed") {
    direction_seed = std::uint64_t(to_int(value, key, where));
  } else if (key == "out_dir") {
    out_dir = value;
  } else {
    throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

void RunConfig::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    apply(key, value, path + ":" + std::to_string(lineno));
  }
}

void RunConfig::apply_overrides(const std::vector<std::string>& assignments) {
  for (const std::string& a : assignments) {
    std::size_t eq = a.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override '" + a + "': expected key=value");
    apply(trim(a.substr(0, eq)), trim(a.substr(eq + 1)), "override '" + a + "'");
  }
}

Schedule RunConfig::make_schedule() const {
  std::string name = strategy;
  std::string arg;
  std::size_t colon = strategy.find(':');
  if (colon != std::string::npos) {
    name = strategy.substr(0, colon);
    arg = strategy.substr(colon + 1);
  }
  if (name == "storeall") return storeall_schedule(steps);
  if (name == "binomial") return binomial_schedule(steps, arg.empty() ? snapshots : std::stoi(arg));
  if (name == "multilevel") {
    std::vector<int> f = arg.empty() ? fanouts : parse_int_list(arg);
    if (f.empty())
      throw ConfigError("strategy 'multilevel' needs fanouts (key 'fanouts' or multilevel:4,4,4)");
    return multilevel_schedule(steps, f);
  }
  if (name == "interp") return interp_schedule(steps, arg.empty() ? stride : std::stoi(arg));
  throw ConfigError("unknown strategy '" + strategy +
                    "' (use storeall | binomial | multilevel | interp)");
}

std::string RunConfig::to_text() const {
  char buf[512];
  std::string solver = model.solver == SolverKind::Sor ? "sor" : "pcg";
  std::string mode = model.tangent_mode == TangentMode::Blackbox ? "blackbox" : "straightforward";
  std::snprintf(buf, sizeof buf,
                "n = %d\ndt = %.12g\nkappa = %.12g\nalpha = %.12g\nforcing = %.12g\n"
                "solver = %s\nsolver_tol = %.12g\nsolver_maxit = %d\ntangent_mode = %s\n"
                "seed = %llu\nsteps = %d\nstrategy = %s\nsnapshots = %d\nstride = %d\n"
                "row = %d\neps = %.12g\nnoise = %.12g\nmax_iters = %d\ndirection_seed = %llu\n",
                model.n, model.dt, model.kappa, model.alpha, model.forcing, solver.c_str(),
                model.solver_tol, model.solver_maxit, mode.c_str(),
                (unsigned long long)model.seed, steps, strategy.c_str(), snapshots, stride, row,
                eps, noise, max_iters, (unsigned long long)direction_seed);
  return buf;
}

}  // namespace ckpt
