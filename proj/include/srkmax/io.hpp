#pragma once

#include "srkmax/diagnostics.hpp"
#include "srkmax/integrator.hpp"
#include "srkmax/noise.hpp"
#include "srkmax/spatial.hpp"

#include "json.hpp"

#include <string>

namespace srkmax {

/// CSV rows: index, component, x, y, value.
void write_field_csv(const FieldState& u, const std::string& path);

/// Flat little-endian f64 data at `path` plus a layout sidecar at `path + ".json"`.
void write_field_binary(const FieldState& u, const std::string& path);
/// Reads a snapshot written by write_field_binary; the sidecar must match `layout`.
FieldState read_field_binary(const std::string& path, std::shared_ptr<const FieldLayout> layout);

/// Row-major little-endian f64 increments at `path`, header {seed, N, J, tau, lambdas, replica}
/// at `path + ".json"`.
void write_noise_path(const NoisePath& p, const std::string& path);
NoisePath read_noise_path(const std::string& path);

/// CSV rows: step, time, energy.
void write_trajectory_csv(const Trajectory& t, const SkewOperator& op, const std::string& path);

/// CSV rows: time, value, stderr.
void write_series_csv(const DiagnosticSeries& s, const std::string& path);

nlohmann::json summary_json(const DiagnosticSummary& s);

}  // namespace srkmax
