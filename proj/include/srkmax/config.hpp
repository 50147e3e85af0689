#pragma once

#include "srkmax/integrator.hpp"
#include "srkmax/model.hpp"
#include "srkmax/tableau.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace srkmax {

using Json = nlohmann::json;

struct BackendConfig {
  std::string kind = "maxwell1d";  // maxwell1d | maxwell2d_tm | spectral
  Index m = 64;                    // maxwell1d interior nodes
  Index nx = 16;                   // maxwell2d_tm cells
  Index ny = 16;
  Index modes = 32;  // spectral
  double L = 1.0;    // maxwell1d, spectral
  double dx = 1.0 / 16.0;
  double dy = 1.0 / 16.0;
  double eps = 1.0;
  double mu = 1.0;

  bool operator==(const BackendConfig&) const = default;
};

struct DriftConfig {
  std::string kind = "zero";  // zero | linear_damping | hamiltonian_sine
  double sigma_e = 0.0;
  double sigma_m = 0.0;
  double kappa = 0.0;

  bool operator==(const DriftConfig&) const = default;
};

struct NoiseConfig {
  Index modes = 16;
  double exponent = 2.0;  // lambda_i = i^-exponent; smaller is rougher
  double je = 1.0;        // J_e^r amplitude
  double jm = 0.0;        // J_m^r amplitude

  bool operator==(const NoiseConfig&) const = default;
};

struct InitialConfig {
  std::string kind = "zero";  // zero | single_mode | gaussian_bump
  Index mode = 1;
  double amplitude = 1.0;
  double cx = 0.5;
  double cy = 0.5;
  double width = 0.1;

  bool operator==(const InitialConfig&) const = default;
};

struct SchemeConfig {
  Json tableau = "midpoint";  // builtin name or {s, A, b, Atilde, btilde, c}
  double tau = 1.0 / 64.0;
  std::string stage_solver = "auto";
  std::string specialization = "generic";
  double fixed_point_tol = 1e-12;
  int fixed_point_max_iter = 50;

  bool operator==(const SchemeConfig&) const = default;
};

struct StudyConfig {
  std::vector<double> tau_levels{1.0 / 16, 1.0 / 32, 1.0 / 64, 1.0 / 128, 1.0 / 256};
  Index ref_refinement = 64;
  Index replicas = 200;
  std::uint64_t seed = 1;
  double slope_lo = 0.85;
  double slope_hi = 1.15;

  bool operator==(const StudyConfig&) const = default;
};

struct RunConfig {
  Index replicas = 1;
  std::uint64_t seed = 1;
  Index thin = 1;

  bool operator==(const RunConfig&) const = default;
};

struct Config {
  BackendConfig backend;
  DriftConfig drift;
  NoiseConfig noise;
  InitialConfig initial;
  double T = 1.0;
  SchemeConfig scheme;
  StudyConfig study;
  RunConfig run;

  bool operator==(const Config&) const = default;
};

/// Desk-scale mean-square study: 1D grid m = 64, T = 1, linear damping, J = 16.
Config default_study_config();

Config config_from_json(const Json& j);
Json config_to_json(const Config& c);
/// Parse errors carry the line and column of the offending character.
Config load_config(const std::string& path);
Config parse_config_text(const std::string& text);
void save_config(const Config& c, const std::string& path);

Tableau tableau_from_json(const Json& j);
Json tableau_to_json(const Tableau& t);
/// Builtin name, inline JSON object, or path to a JSON file.
Tableau resolve_tableau(const Json& spec);
Tableau load_tableau(const std::string& name_or_path);

std::shared_ptr<const SkewOperator> build_operator(const BackendConfig& b);
std::shared_ptr<const Problem> build_problem(const Config& c);
StepperConfig build_stepper_config(const Config& c);

}  // namespace srkmax
