#include "srkmax/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

namespace srkmax {

namespace {

void check_keys(const Json& obj, const std::set<std::string>& allowed, const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <class T>
void read(const Json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

double coefficient(const Json& v, const std::string& where) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) {
    try {
      return parse_coefficient(v.get<std::string>());
    } catch (const ConfigError& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }
  throw ConfigError(where + ": coefficient must be a number or a string");
}

Vector coefficient_vector(const Json& v, Index s, const std::string& where) {
  if (!v.is_array() || Index(v.size()) != s)
    throw ConfigError(where + ": expected an array of length " + std::to_string(s));
  Vector out(s);
  for (Index i = 0; i < s; ++i) out[i] = coefficient(v[std::size_t(i)], where);
  return out;
}

Matrix coefficient_matrix(const Json& v, Index s, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + ": expected an array");
  Matrix out(s, s);
  if (Index(v.size()) == s * s && !v[0].is_array()) {
    for (Index i = 0; i < s; ++i)
      for (Index j = 0; j < s; ++j) out(i, j) = coefficient(v[std::size_t(i * s + j)], where);
    return out;
  }
  if (Index(v.size()) != s) throw ConfigError(where + ": expected " + std::to_string(s) + " rows");
  for (Index i = 0; i < s; ++i) out.row(i) = coefficient_vector(v[std::size_t(i)], s, where);
  return out;
}

}  // namespace

Tableau tableau_from_json(const Json& j) {
  check_keys(j, {"name", "s", "A", "b", "Atilde", "btilde", "c"}, "tableau");
  if (!j.contains("A") || !j.contains("b")) throw ConfigError("tableau: 'A' and 'b' are required");
  Index s = 0;
  if (j.contains("s")) {
    s = j.at("s").get<Index>();
  } else {
    s = Index(j.at("b").size());
  }
  if (s < 1) throw ConfigError("tableau: s must be positive");
  Tableau t;
  t.name = j.value("name", std::string("custom"));
  t.A = coefficient_matrix(j.at("A"), s, "tableau.A");
  t.b = coefficient_vector(j.at("b"), s, "tableau.b");
  t.A_noise = j.contains("Atilde") ? coefficient_matrix(j.at("Atilde"), s, "tableau.Atilde") : t.A;
  t.b_noise = j.contains("btilde") ? coefficient_vector(j.at("btilde"), s, "tableau.btilde") : t.b;
  t.c = j.contains("c") ? coefficient_vector(j.at("c"), s, "tableau.c")
                        : Vector(t.A.rowwise().sum());
  t.validate();
  return t;
}

Json tableau_to_json(const Tableau& t) {
  const Index s = t.stages();
  auto mat = [&](const Matrix& m) {
    Json rows = Json::array();
    for (Index i = 0; i < s; ++i) {
      Json row = Json::array();
      for (Index k = 0; k < s; ++k) row.push_back(m(i, k));
      rows.push_back(row);
    }
    return rows;
  };
  auto vec = [&](const Vector& v) {
    Json a = Json::array();
    for (Index i = 0; i < s; ++i) a.push_back(v[i]);
    return a;
  };
  return Json{{"name", t.name},          {"s", s},
              {"A", mat(t.A)},           {"b", vec(t.b)},
              {"Atilde", mat(t.A_noise)}, {"btilde", vec(t.b_noise)},
              {"c", vec(t.c)}};
}

Tableau load_tableau(const std::string& name_or_path) {
  const auto names = builtin_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end())
    return builtin(name_or_path);
  std::ifstream in(name_or_path);
  if (!in) throw ConfigError("unknown tableau '" + name_or_path + "' (not a builtin or a file)");
  std::stringstream ss;
  ss << in.rdbuf();
  Json j;
  try {
    j = Json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("malformed tableau file '" + name_or_path + "': " + e.what());
  }
  return tableau_from_json(j);
}

Tableau resolve_tableau(const Json& spec) {
  if (spec.is_string()) return load_tableau(spec.get<std::string>());
  if (spec.is_object()) return tableau_from_json(spec);
  throw ConfigError("scheme.tableau must be a name or an object");
}

// --------------------------------------------------------------------------

Config default_study_config() {
  Config c;
  c.backend.kind = "maxwell1d";
  c.backend.m = 64;
  c.backend.L = 1.0;
  c.drift.kind = "linear_damping";
  c.drift.sigma_e = 0.5;
  c.drift.sigma_m = 0.5;
  c.noise.modes = 16;
  c.noise.exponent = 2.0;
  c.noise.je = 1.0;
  c.noise.jm = 0.0;
  c.initial.kind = "single_mode";
  c.initial.mode = 1;
  c.initial.amplitude = 1.0;
  c.T = 1.0;
  c.scheme.tableau = "midpoint";
  c.scheme.tau = 1.0 / 64.0;
  return c;
}

Config config_from_json(const Json& j) {
  check_keys(j, {"backend", "drift", "noise", "initial", "T", "scheme", "study", "run"}, "config");
  Config c;
  if (j.contains("backend")) {
    const Json& b = j.at("backend");
    check_keys(b, {"kind", "m", "nx", "ny", "modes", "L", "dx", "dy", "eps", "mu"}, "backend");
    read(b, "kind", c.backend.kind, "backend");
    read(b, "m", c.backend.m, "backend");
    read(b, "nx", c.backend.nx, "backend");
    read(b, "ny", c.backend.ny, "backend");
    read(b, "modes", c.backend.modes, "backend");
    read(b, "L", c.backend.L, "backend");
    read(b, "dx", c.backend.dx, "backend");
    read(b, "dy", c.backend.dy, "backend");
    read(b, "eps", c.backend.eps, "backend");
    read(b, "mu", c.backend.mu, "backend");
  }
  if (j.contains("drift")) {
    const Json& d = j.at("drift");
    check_keys(d, {"kind", "sigma_e", "sigma_m", "kappa"}, "drift");
    read(d, "kind", c.drift.kind, "drift");
    read(d, "sigma_e", c.drift.sigma_e, "drift");
    read(d, "sigma_m", c.drift.sigma_m, "drift");
    read(d, "kappa", c.drift.kappa, "drift");
  }
  if (j.contains("noise")) {
    const Json& n = j.at("noise");
    check_keys(n, {"modes", "exponent", "je", "jm"}, "noise");
    read(n, "modes", c.noise.modes, "noise");
    read(n, "exponent", c.noise.exponent, "noise");
    read(n, "je", c.noise.je, "noise");
    read(n, "jm", c.noise.jm, "noise");
  }
  if (j.contains("initial")) {
    const Json& i = j.at("initial");
    check_keys(i, {"kind", "mode", "amplitude", "cx", "cy", "width"}, "initial");
    read(i, "kind", c.initial.kind, "initial");
    read(i, "mode", c.initial.mode, "initial");
    read(i, "amplitude", c.initial.amplitude, "initial");
    read(i, "cx", c.initial.cx, "initial");
    read(i, "cy", c.initial.cy, "initial");
    read(i, "width", c.initial.width, "initial");
  }
  read(j, "T", c.T, "config");
  if (j.contains("scheme")) {
    const Json& s = j.at("scheme");
    check_keys(s,
               {"tableau", "tau", "stage_solver", "specialization", "fixed_point_tol",
                "fixed_point_max_iter"},
               "scheme");
    if (s.contains("tableau")) c.scheme.tableau = s.at("tableau");
    read(s, "tau", c.scheme.tau, "scheme");
    read(s, "stage_solver", c.scheme.stage_solver, "scheme");
    read(s, "specialization", c.scheme.specialization, "scheme");
    read(s, "fixed_point_tol", c.scheme.fixed_point_tol, "scheme");
    read(s, "fixed_point_max_iter", c.scheme.fixed_point_max_iter, "scheme");
  }
  if (j.contains("study")) {
    const Json& s = j.at("study");
    check_keys(s, {"tau_levels", "ref_refinement", "replicas", "seed", "slope_band"}, "study");
    read(s, "tau_levels", c.study.tau_levels, "study");
    read(s, "ref_refinement", c.study.ref_refinement, "study");
    read(s, "replicas", c.study.replicas, "study");
    read(s, "seed", c.study.seed, "study");
    if (s.contains("slope_band")) {
      const Json& band = s.at("slope_band");
      if (!band.is_array() || band.size() != 2)
        throw ConfigError("study.slope_band: expected [lo, hi]");
      c.study.slope_lo = band[0].get<double>();
      c.study.slope_hi = band[1].get<double>();
    }
  }
  if (j.contains("run")) {
    const Json& r = j.at("run");
    check_keys(r, {"replicas", "seed", "thin"}, "run");
    read(r, "replicas", c.run.replicas, "run");
    read(r, "seed", c.run.seed, "run");
    read(r, "thin", c.run.thin, "run");
  }
  return c;
}

Json config_to_json(const Config& c) {
  Json j;
  j["backend"] = {{"kind", c.backend.kind}, {"m", c.backend.m},     {"nx", c.backend.nx},
                  {"ny", c.backend.ny},     {"modes", c.backend.modes}, {"L", c.backend.L},
                  {"dx", c.backend.dx},     {"dy", c.backend.dy},   {"eps", c.backend.eps},
                  {"mu", c.backend.mu}};
  j["drift"] = {{"kind", c.drift.kind},
                {"sigma_e", c.drift.sigma_e},
                {"sigma_m", c.drift.sigma_m},
                {"kappa", c.drift.kappa}};
  j["noise"] = {{"modes", c.noise.modes},
                {"exponent", c.noise.exponent},
                {"je", c.noise.je},
                {"jm", c.noise.jm}};
  j["initial"] = {{"kind", c.initial.kind}, {"mode", c.initial.mode},
                  {"amplitude", c.initial.amplitude}, {"cx", c.initial.cx},
                  {"cy", c.initial.cy}, {"width", c.initial.width}};
  j["T"] = c.T;
  j["scheme"] = {{"tableau", c.scheme.tableau},
                 {"tau", c.scheme.tau},
                 {"stage_solver", c.scheme.stage_solver},
                 {"specialization", c.scheme.specialization},
                 {"fixed_point_tol", c.scheme.fixed_point_tol},
                 {"fixed_point_max_iter", c.scheme.fixed_point_max_iter}};
  j["study"] = {{"tau_levels", c.study.tau_levels},
                {"ref_refinement", c.study.ref_refinement},
                {"replicas", c.study.replicas},
                {"seed", c.study.seed},
                {"slope_band", {c.study.slope_lo, c.study.slope_hi}}};
  j["run"] = {{"replicas", c.run.replicas}, {"seed", c.run.seed}, {"thin", c.run.thin}};
  return j;
}

Config parse_config_text(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const std::size_t pos = std::min(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + std::ptrdiff_t(pos), '\n');
    const auto last_nl = text.rfind('\n', pos == 0 ? 0 : pos - 1);
    const std::size_t col = last_nl == std::string::npos || pos == 0 ? pos + 1 : pos - last_nl;
    throw ConfigError("config parse error at line " + std::to_string(line) + ", column " +
                      std::to_string(col) + ": " + e.what());
  }
  return config_from_json(j);
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config_text(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void save_config(const Config& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write config '" + path + "'");
  out << config_to_json(c).dump(2) << '\n';
}

// --------------------------------------------------------------------------

std::shared_ptr<const SkewOperator> build_operator(const BackendConfig& b) {
  if (b.kind == "maxwell1d") return build_maxwell_1d(Grid1D::uniform(b.m, b.L, b.eps, b.mu));
  if (b.kind == "maxwell2d_tm") {
    Grid2DTM g;
    g.nx = b.nx;
    g.ny = b.ny;
    g.dx = b.dx;
    g.dy = b.dy;
    g.eps = b.eps;
    g.mu = b.mu;
    return build_maxwell_2d_tm(g);
  }
  if (b.kind == "spectral") return build_spectral_hamiltonian(b.modes, b.L, b.eps, b.mu);
  throw ConfigError("unknown backend '" + b.kind + "'");
}

std::shared_ptr<const Problem> build_problem(const Config& c) {
  auto op = build_operator(c.backend);

  DriftSpec drift;
  if (c.drift.kind == "zero") {
    drift = ZeroDrift{};
  } else if (c.drift.kind == "linear_damping") {
    drift = LinearDamping{c.drift.sigma_e, c.drift.sigma_m};
  } else if (c.drift.kind == "hamiltonian_sine") {
    drift = HamiltonianSineDrift{c.drift.kappa};
  } else {
    throw ConfigError("unknown drift kind '" + c.drift.kind + "'");
  }

  const PointSet& pts = op->sample_points();
  CovarianceSpec cov;
  if (c.backend.kind == "maxwell2d_tm")
    cov = sine_covariance(pts, c.noise.modes, c.noise.exponent, double(c.backend.nx) * c.backend.dx,
                          double(c.backend.ny) * c.backend.dy);
  else
    cov = sine_covariance(pts, c.noise.modes, c.noise.exponent, c.backend.L);
  NoiseProfile profile = constant_profile(pts, c.noise.je, c.noise.jm);

  Vector u0;
  if (c.initial.kind == "zero") {
    u0 = zero_state(*op);
  } else if (c.initial.kind == "single_mode") {
    u0 = single_mode_state(*op, c.initial.mode, c.initial.amplitude);
  } else if (c.initial.kind == "gaussian_bump") {
    u0 = gaussian_bump_state(*op, c.initial.cx, c.initial.cy, c.initial.width,
                             c.initial.amplitude);
  } else {
    throw ConfigError("unknown initial preset '" + c.initial.kind + "'");
  }
  if (!(c.T > 0.0)) throw ConfigError("T must be positive");
  return make_problem(op, std::move(drift), std::move(cov), std::move(profile), std::move(u0), c.T);
}

StepperConfig build_stepper_config(const Config& c) {
  StepperConfig s;
  s.tableau = resolve_tableau(c.scheme.tableau);
  s.tau = c.scheme.tau;
  s.stage_solver = parse_stage_solver(c.scheme.stage_solver);
  s.specialization = parse_specialization(c.scheme.specialization);
  s.fixed_point_tol = c.scheme.fixed_point_tol;
  s.fixed_point_max_iter = c.scheme.fixed_point_max_iter;
  return s;
}

}  // namespace srkmax
