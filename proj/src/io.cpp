#include "srkmax/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace srkmax {

namespace {

void write_f64(std::ofstream& out, const double* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data), std::streamsize(count * sizeof(double)));
  } else {
    for (std::size_t k = 0; k < count; ++k) {
      auto bits = std::bit_cast<std::uint64_t>(data[k]);
      char buf[8];
      for (int b = 0; b < 8; ++b) buf[b] = char((bits >> (8 * b)) & 0xff);
      out.write(buf, 8);
    }
  }
}

void read_f64(std::ifstream& in, double* data, std::size_t count) {
  if constexpr (std::endian::native == std::endian::little) {
    in.read(reinterpret_cast<char*>(data), std::streamsize(count * sizeof(double)));
  } else {
    for (std::size_t k = 0; k < count; ++k) {
      unsigned char buf[8];
      in.read(reinterpret_cast<char*>(buf), 8);
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= std::uint64_t(buf[b]) << (8 * b);
      data[k] = std::bit_cast<double>(bits);
    }
  }
}

std::size_t file_size(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw Error("cannot open '" + path + "'");
  return std::size_t(in.tellg());
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("malformed JSON in '" + path + "': " + e.what());
  }
}

std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error("cannot write '" + path + "'");
  return out;
}

}  // namespace

void write_field_csv(const FieldState& u, const std::string& path) {
  if (!u.layout || u.layout->size() != u.size()) throw LayoutMismatch("field CSV: bad layout");
  auto out = open_out(path);
  out << std::setprecision(17) << "index,component,x,y,value\n";
  for (Index k = 0; k < u.size(); ++k) {
    const Dof& d = u.layout->dofs[std::size_t(k)];
    out << k << ',' << to_string(d.component) << ',' << d.x << ',' << d.y << ',' << u.data[k]
        << '\n';
  }
}

void write_field_binary(const FieldState& u, const std::string& path) {
  if (!u.layout || u.layout->size() != u.size()) throw LayoutMismatch("field snapshot: bad layout");
  {
    auto out = open_out(path, true);
    write_f64(out, u.data.data(), std::size_t(u.size()));
  }
  nlohmann::json side{{"backend", u.layout->backend},
                      {"size", u.size()},
                      {"n_electric", u.layout->n_electric},
                      {"dtype", "f64le"}};
  open_out(path + ".json") << side.dump(2) << '\n';
}

FieldState read_field_binary(const std::string& path, std::shared_ptr<const FieldLayout> layout) {
  const nlohmann::json side = read_json(path + ".json");
  const Index n = side.at("size").get<Index>();
  if (side.at("backend").get<std::string>() != layout->backend || n != layout->size() ||
      side.at("n_electric").get<Index>() != layout->n_electric)
    throw LayoutMismatch("snapshot '" + path + "' does not match the layout");
  if (file_size(path) != std::size_t(n) * sizeof(double))
    throw LayoutMismatch("snapshot '" + path + "' has the wrong byte count");
  FieldState u{Vector(n), std::move(layout)};
  std::ifstream in(path, std::ios::binary);
  read_f64(in, u.data.data(), std::size_t(n));
  return u;
}

void write_noise_path(const NoisePath& p, const std::string& path) {
  {
    auto out = open_out(path, true);
    write_f64(out, p.xi.data(), std::size_t(p.xi.size()));
  }
  nlohmann::json lam = nlohmann::json::array();
  for (Index i = 0; i < p.lambdas.size(); ++i) lam.push_back(p.lambdas[i]);
  nlohmann::json header{{"seed", p.seed}, {"N", p.N},       {"J", p.modes()},
                        {"tau", p.tau},   {"lambdas", lam}, {"replica", p.replica}};
  open_out(path + ".json") << std::setprecision(17) << header.dump(2) << '\n';
}

NoisePath read_noise_path(const std::string& path) {
  const nlohmann::json h = read_json(path + ".json");
  NoisePath p;
  p.seed = h.at("seed").get<std::uint64_t>();
  p.N = h.at("N").get<Index>();
  const Index J = h.at("J").get<Index>();
  p.tau = h.at("tau").get<double>();
  p.replica = h.value("replica", std::uint64_t(0));
  const auto lam = h.at("lambdas").get<std::vector<double>>();
  p.lambdas = Eigen::Map<const Vector>(lam.data(), Index(lam.size()));
  if (file_size(path) != std::size_t(p.N * J) * sizeof(double))
    throw LayoutMismatch("noise path '" + path + "' has the wrong byte count");
  p.xi.resize(p.N, J);
  std::ifstream in(path, std::ios::binary);
  read_f64(in, p.xi.data(), std::size_t(p.N * J));
  return p;
}

void write_trajectory_csv(const Trajectory& t, const SkewOperator& op, const std::string& path) {
  auto out = open_out(path);
  out << std::setprecision(17) << "step,time,energy\n";
  for (std::size_t n = 0; n < t.states.size(); ++n)
    out << n << ',' << t.times[n] << ',' << op.norm_sq(t.states[n]) << '\n';
}

void write_series_csv(const DiagnosticSeries& s, const std::string& path) {
  s.validate();
  auto out = open_out(path);
  out << std::setprecision(17) << "time,value,stderr\n";
  for (std::size_t n = 0; n < s.size(); ++n)
    out << s.times[n] << ',' << s.values[n] << ',' << s.stderrs[n] << '\n';
}

nlohmann::json summary_json(const DiagnosticSummary& s) {
  return {{"name", s.name},
          {"verdict", s.pass ? "PASS" : "FAIL"},
          {"worst_value", s.worst_value},
          {"tolerance", s.tolerance}};
}

}  // namespace srkmax
