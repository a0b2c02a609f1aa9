#include "ssenc/data.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <numbers>
#include <random>
#include <sstream>
#include <string_view>

#include "ssenc/error.hpp"

namespace ssenc {

using nlohmann::json;

Signal::Signal(std::size_t width_, std::vector<double> values_)
    : width(width_), values(std::move(values_)) {
  if (width == 0 || values.size() % width != 0) {
    throw DimensionError("signal of width " + std::to_string(width) + " cannot hold " +
                         std::to_string(values.size()) + " values");
  }
}

Signal Signal::slice(std::size_t begin, std::size_t end) const {
  if (begin > end || end > samples()) throw DimensionError("signal slice out of range");
  return Signal(width, std::vector<double>(values.begin() + begin * width, values.begin() + end * width));
}

void Dataset::validate() const {
  if (u.width == 0 || y.width == 0) throw DataError("dataset needs at least one input and one output channel");
  if (u.samples() != y.samples()) {
    throw DataError("input has " + std::to_string(u.samples()) + " samples but output has " +
                    std::to_string(y.samples()));
  }
  if (u.samples() == 0) throw DataError("dataset has no samples");
  auto finite = [](const Signal& s) {
    return std::all_of(s.values.begin(), s.values.end(), [](double v) { return std::isfinite(v); });
  };
  if (!finite(u) || !finite(y)) throw DataError("dataset contains non-finite values");
}

Dataset Dataset::slice(std::size_t begin, std::size_t end) const {
  return Dataset{u.slice(begin, end), y.slice(begin, end), sample_period};
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_double(std::string_view s, double& out) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return false;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, std::size_t n_u, std::size_t n_y) {
  if (n_u == 0 || n_y == 0) throw DataError("n_u and n_y must be at least 1");
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open data file '" + path.string() + "'");

  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file, expected a header row");
  const auto header = split_fields(trim(line));
  std::vector<std::string> expected;
  for (std::size_t i = 1; i <= n_u; ++i) expected.push_back("u" + std::to_string(i));
  for (std::size_t i = 1; i <= n_y; ++i) expected.push_back("y" + std::to_string(i));
  bool header_ok = header.size() == expected.size();
  for (std::size_t i = 0; header_ok && i < header.size(); ++i) header_ok = header[i] == expected[i];
  if (!header_ok) {
    std::string want;
    for (const auto& e : expected) want += (want.empty() ? "" : ",") + e;
    throw DataError(path.string() + ": header mismatch, expected '" + want + "' but found '" +
                    std::string(trim(line)) + "'");
  }

  Dataset d;
  d.u.width = n_u;
  d.y.width = n_y;
  std::size_t row = 0;
  std::size_t file_line = 1;
  while (std::getline(in, line)) {
    ++file_line;
    const auto body = trim(line);
    if (body.empty()) continue;
    ++row;
    const auto fields = split_fields(body);
    if (fields.size() != n_u + n_y) {
      throw DataError(path.string() + ": row " + std::to_string(row) + " (line " +
                      std::to_string(file_line) + ") has " + std::to_string(fields.size()) +
                      " fields, expected " + std::to_string(n_u + n_y));
    }
    for (std::size_t i = 0; i < fields.size(); ++i) {
      double v = 0.0;
      if (!parse_double(fields[i], v)) {
        throw DataError(path.string() + ": row " + std::to_string(row) + " (line " +
                        std::to_string(file_line) + "), column '" + expected[i] +
                        "': not a finite number: '" + std::string(fields[i]) + "'");
      }
      (i < n_u ? d.u.values : d.y.values).push_back(v);
    }
  }
  if (row == 0) throw DataError(path.string() + ": no data rows");
  return d;
}

void save_csv(const Dataset& d, const std::filesystem::path& path) {
  d.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  for (std::size_t i = 1; i <= d.n_u(); ++i) out << (i > 1 ? "," : "") << 'u' << i;
  for (std::size_t i = 1; i <= d.n_y(); ++i) out << ",y" << i;
  out << '\n';
  char buf[32];
  for (std::size_t t = 0; t < d.samples(); ++t) {
    bool first = true;
    auto put = [&](double v) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out << (first ? "" : ",") << buf;
      first = false;
    };
    for (double v : d.u.row(t)) put(v);
    for (double v : d.y.row(t)) put(v);
    out << '\n';
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// Normalization

Signal Normalizer::apply(const Signal& s) const {
  if (s.width != width()) throw DimensionError("normalizer width does not match signal width");
  Signal out = s;
  for (std::size_t t = 0; t < s.samples(); ++t) {
    for (std::size_t c = 0; c < s.width; ++c) out.at(t, c) = apply(s.at(t, c), c);
  }
  return out;
}

Signal Normalizer::invert(const Signal& s) const {
  if (s.width != width()) throw DimensionError("normalizer width does not match signal width");
  Signal out = s;
  for (std::size_t t = 0; t < s.samples(); ++t) {
    for (std::size_t c = 0; c < s.width; ++c) out.at(t, c) = invert(s.at(t, c), c);
  }
  return out;
}

Normalizer fit_normalizer(const Signal& s) {
  const std::size_t n = s.samples();
  if (n < 2) throw DataError("normalizer needs at least 2 samples");
  Normalizer norm;
  norm.mean.assign(s.width, 0.0);
  norm.stddev.assign(s.width, 0.0);
  for (std::size_t c = 0; c < s.width; ++c) {
    double sum = 0.0;
    for (std::size_t t = 0; t < n; ++t) sum += s.at(t, c);
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t t = 0; t < n; ++t) ss += (s.at(t, c) - mean) * (s.at(t, c) - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    if (!(sd > 0.0) || sd <= 1e-300 * std::max(1.0, std::abs(mean))) {
      throw DataError("channel " + std::to_string(c + 1) + " has zero variance");
    }
    norm.mean[c] = mean;
    norm.stddev[c] = sd;
  }
  return norm;
}

std::pair<Normalizer, Normalizer> fit_normalizer(const Dataset& d) {
  d.validate();
  return {fit_normalizer(d.u), fit_normalizer(d.y)};
}

std::vector<Dataset> split(const Dataset& d, std::span<const IndexRange> ranges) {
  std::vector<IndexRange> sorted(ranges.begin(), ranges.end());
  for (const auto& r : sorted) {
    if (r.begin >= r.end || r.end > d.samples()) {
      throw DataError("split range [" + std::to_string(r.begin) + ", " + std::to_string(r.end) +
                      ") is empty or out of bounds for " + std::to_string(d.samples()) + " samples");
    }
  }
  std::sort(sorted.begin(), sorted.end(), [](auto& a, auto& b) { return a.begin < b.begin; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].begin < sorted[i - 1].end) {
      throw DataError("split ranges [" + std::to_string(sorted[i - 1].begin) + ", " +
                      std::to_string(sorted[i - 1].end) + ") and [" + std::to_string(sorted[i].begin) +
                      ", " + std::to_string(sorted[i].end) + ") overlap");
    }
  }
  std::vector<Dataset> out;
  out.reserve(ranges.size());
  for (const auto& r : ranges) out.push_back(d.slice(r.begin, r.end));
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic systems

void LinearBlock::check() const {
  if (n_x == 0 && (!a.empty() || !b.empty() || !c.empty())) throw ConfigError("linear block: inconsistent empty state");
  if (n_u == 0 || n_y == 0) throw ConfigError("linear block: n_u and n_y must be at least 1");
  if (a.size() != n_x * n_x || b.size() != n_x * n_u || c.size() != n_y * n_x || d.size() != n_y * n_u) {
    throw ConfigError("linear block: matrix shapes do not match (n_x, n_u, n_y) = (" +
                      std::to_string(n_x) + ", " + std::to_string(n_u) + ", " + std::to_string(n_y) + ")");
  }
}

double LinearBlock::spectral_radius() const {
  if (n_x == 0) return 0.0;
  Eigen::MatrixXd m(n_x, n_x);
  for (std::size_t i = 0; i < n_x; ++i)
    for (std::size_t j = 0; j < n_x; ++j) m(i, j) = a[i * n_x + j];
  Eigen::EigenSolver<Eigen::MatrixXd> solver(m, false);
  return solver.eigenvalues().cwiseAbs().maxCoeff();
}

double TanhNonlinearity::operator()(double v) const { return out_scale * std::tanh(in_scale * v); }

std::size_t SyntheticSystem::state_dim() const {
  return kind == SystemKind::Duffing ? 2 : linear.n_x;
}
std::size_t SyntheticSystem::n_u() const { return kind == SystemKind::Duffing ? 1 : linear.n_u; }
std::size_t SyntheticSystem::n_y() const { return kind == SystemKind::Duffing ? 1 : linear.n_y; }

namespace {

void check_stable(const LinearBlock& lin) {
  lin.check();
  const double rho = lin.spectral_radius();
  if (!(rho < 1.0)) {
    throw ConfigError("linear system is not stable: spectral radius of A is " + std::to_string(rho) +
                      " (stability requires < 1)");
  }
}

// Runs x+ = A x + B u, v = C x + D u and returns v.
Signal simulate_linear(const LinearBlock& lin, const Signal& u) {
  const std::size_t n = u.samples();
  Signal v(n, lin.n_y);
  std::vector<double> x(lin.n_x, 0.0), xn(lin.n_x, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    const auto ut = u.row(t);
    for (std::size_t i = 0; i < lin.n_y; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < lin.n_x; ++j) s += lin.c[i * lin.n_x + j] * x[j];
      for (std::size_t j = 0; j < lin.n_u; ++j) s += lin.d[i * lin.n_u + j] * ut[j];
      v.at(t, i) = s;
    }
    for (std::size_t i = 0; i < lin.n_x; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < lin.n_x; ++j) s += lin.a[i * lin.n_x + j] * x[j];
      for (std::size_t j = 0; j < lin.n_u; ++j) s += lin.b[i * lin.n_u + j] * ut[j];
      xn[i] = s;
    }
    x.swap(xn);
  }
  return v;
}

Signal simulate_duffing(const DuffingParams& p, const Signal& u) {
  if (!(p.mass > 0.0) || !(p.sample_period > 0.0) || p.substeps < 1) {
    throw ConfigError("duffing: mass and sample_period must be positive and substeps >= 1");
  }
  const std::size_t n = u.samples();
  Signal y(n, 1);
  double q = 0.0, v = 0.0;
  const double h = p.sample_period / p.substeps;
  for (std::size_t t = 0; t < n; ++t) {
    y.at(t, 0) = q;
    const double force = p.gain * u.at(t, 0);
    auto accel = [&](double qq, double vv) {
      return (force - p.damping * vv - p.stiffness * qq - p.cubic * qq * qq * qq) / p.mass;
    };
    for (int s = 0; s < p.substeps; ++s) {
      const double k1q = v, k1v = accel(q, v);
      const double k2q = v + 0.5 * h * k1v, k2v = accel(q + 0.5 * h * k1q, v + 0.5 * h * k1v);
      const double k3q = v + 0.5 * h * k2v, k3v = accel(q + 0.5 * h * k2q, v + 0.5 * h * k2v);
      const double k4q = v + h * k3v, k4v = accel(q + h * k3q, v + h * k3v);
      q += h / 6.0 * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
      v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    }
  }
  return y;
}

}  // namespace

Dataset generate(const SyntheticSystem& sys, const Signal& u, std::uint64_t seed) {
  if (u.width != sys.n_u()) {
    throw DimensionError("input width " + std::to_string(u.width) + " does not match system n_u " +
                         std::to_string(sys.n_u()));
  }
  if (u.samples() == 0) throw DataError("input sequence is empty");
  if (!std::all_of(u.values.begin(), u.values.end(), [](double v) { return std::isfinite(v); })) {
    throw DataError("input sequence contains non-finite values");
  }
  if (!(sys.noise_std >= 0.0)) throw ConfigError("noise_std must be >= 0");

  Signal y;
  switch (sys.kind) {
    case SystemKind::LinearSS:
      check_stable(sys.linear);
      y = simulate_linear(sys.linear, u);
      break;
    case SystemKind::Wiener:
      check_stable(sys.linear);
      y = simulate_linear(sys.linear, u);
      for (double& v : y.values) v = sys.nonlinearity(v);
      break;
    case SystemKind::Duffing:
      y = simulate_duffing(sys.duffing, u);
      break;
  }
  if (sys.noise_std > 0.0) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sys.noise_std);
    for (double& v : y.values) v += noise(rng);
  }
  Dataset d{u, std::move(y), std::nullopt};
  if (sys.kind == SystemKind::Duffing) d.sample_period = sys.duffing.sample_period;
  d.validate();
  return d;
}

// ---------------------------------------------------------------------------
// JSON system description

namespace {

std::vector<double> read_matrix(const json& j, const char* key, std::size_t& rows, std::size_t& cols) {
  if (!j.contains(key)) throw ConfigError(std::string("system: missing matrix '") + key + "'");
  const auto& m = j.at(key);
  if (!m.is_array()) throw ConfigError(std::string("system: '") + key + "' must be an array of rows");
  rows = m.size();
  cols = rows == 0 ? 0 : m.at(0).size();
  std::vector<double> out;
  for (const auto& r : m) {
    if (!r.is_array() || r.size() != cols) throw ConfigError(std::string("system: '") + key + "' has ragged rows");
    for (const auto& v : r) out.push_back(v.get<double>());
  }
  return out;
}

json write_matrix(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
  json m = json::array();
  for (std::size_t i = 0; i < rows; ++i) {
    json r = json::array();
    for (std::size_t j = 0; j < cols; ++j) r.push_back(v[i * cols + j]);
    m.push_back(r);
  }
  return m;
}

LinearBlock read_linear(const json& j) {
  LinearBlock lin;
  std::size_t ar, ac, br, bc, cr, cc, dr, dc;
  lin.a = read_matrix(j, "A", ar, ac);
  lin.b = read_matrix(j, "B", br, bc);
  lin.c = read_matrix(j, "C", cr, cc);
  lin.d = read_matrix(j, "D", dr, dc);
  if (ar != ac || br != ar || cc != ac || dr != cr || dc != bc) {
    throw ConfigError("system: matrix shapes of A, B, C, D are inconsistent");
  }
  lin.n_x = ar;
  lin.n_u = bc;
  lin.n_y = cr;
  lin.check();
  return lin;
}

}  // namespace

SyntheticSystem system_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("system: invalid JSON: ") + e.what());
  }
  try {
    SyntheticSystem sys;
    const auto kind = j.at("kind").get<std::string>();
    sys.noise_std = j.value("noise_std", 0.0);
    if (kind == "linear-ss") {
      sys.kind = SystemKind::LinearSS;
      sys.linear = read_linear(j);
    } else if (kind == "wiener") {
      sys.kind = SystemKind::Wiener;
      sys.linear = read_linear(j);
      if (j.contains("nonlinearity")) {
        const auto& nl = j.at("nonlinearity");
        if (nl.value("type", std::string("tanh")) != "tanh") throw ConfigError("system: only tanh nonlinearity is supported");
        sys.nonlinearity.in_scale = nl.value("in_scale", 1.0);
        sys.nonlinearity.out_scale = nl.value("out_scale", 1.0);
      }
    } else if (kind == "duffing") {
      sys.kind = SystemKind::Duffing;
      auto& p = sys.duffing;
      p.mass = j.value("mass", p.mass);
      p.damping = j.value("damping", p.damping);
      p.stiffness = j.value("stiffness", p.stiffness);
      p.cubic = j.value("cubic", p.cubic);
      p.gain = j.value("gain", p.gain);
      p.sample_period = j.value("sample_period", p.sample_period);
      p.substeps = j.value("substeps", p.substeps);
    } else {
      throw ConfigError("system: unknown kind '" + kind + "' (expected linear-ss, wiener or duffing)");
    }
    if (sys.noise_std < 0.0) throw ConfigError("system: noise_std must be >= 0");
    if (sys.kind != SystemKind::Duffing) check_stable(sys.linear);
    return sys;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("system: ") + e.what());
  }
}

std::string system_to_json(const SyntheticSystem& sys) {
  json j;
  j["noise_std"] = sys.noise_std;
  if (sys.kind == SystemKind::Duffing) {
    const auto& p = sys.duffing;
    j["kind"] = "duffing";
    j["mass"] = p.mass;
    j["damping"] = p.damping;
    j["stiffness"] = p.stiffness;
    j["cubic"] = p.cubic;
    j["gain"] = p.gain;
    j["sample_period"] = p.sample_period;
    j["substeps"] = p.substeps;
  } else {
    const auto& l = sys.linear;
    j["kind"] = sys.kind == SystemKind::LinearSS ? "linear-ss" : "wiener";
    j["A"] = write_matrix(l.a, l.n_x, l.n_x);
    j["B"] = write_matrix(l.b, l.n_x, l.n_u);
    j["C"] = write_matrix(l.c, l.n_y, l.n_x);
    j["D"] = write_matrix(l.d, l.n_y, l.n_u);
    if (sys.kind == SystemKind::Wiener) {
      j["nonlinearity"] = {{"type", "tanh"},
                           {"in_scale", sys.nonlinearity.in_scale},
                           {"out_scale", sys.nonlinearity.out_scale}};
    }
  }
  return j.dump(2);
}

// ---------------------------------------------------------------------------
// Excitation signals

Signal gaussian_input(std::size_t samples, std::size_t width, double stddev, std::uint64_t seed) {
  Signal u(samples, width);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : u.values) v = dist(rng);
  return u;
}

Signal filtered_gaussian_input(std::size_t samples, std::size_t width, double stddev, double pole,
                               std::uint64_t seed) {
  if (!(pole >= 0.0 && pole < 1.0)) throw ConfigError("filtered input: pole must be in [0, 1)");
  Signal e = gaussian_input(samples, width, 1.0, seed);
  Signal u(samples, width);
  for (std::size_t c = 0; c < width; ++c) {
    double v1 = 0.0, v2 = 0.0, ss = 0.0;
    for (std::size_t t = 0; t < samples; ++t) {
      const double v = 2.0 * pole * v1 - pole * pole * v2 + e.at(t, c);
      u.at(t, c) = v;
      ss += v * v;
      v2 = v1;
      v1 = v;
    }
    const double rms = std::sqrt(ss / std::max<std::size_t>(samples, 1));
    if (rms > 0.0)
      for (std::size_t t = 0; t < samples; ++t) u.at(t, c) *= stddev / rms;
  }
  return u;
}

Signal multisine_input(std::size_t samples, std::size_t width, double stddev, std::size_t lines,
                       double max_fraction, std::uint64_t seed) {
  if (lines == 0 || !(max_fraction > 0.0 && max_fraction <= 1.0)) {
    throw ConfigError("multisine: need lines >= 1 and 0 < max_fraction <= 1");
  }
  const std::size_t kmax = std::max<std::size_t>(1, static_cast<std::size_t>(max_fraction * samples / 2.0));
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  Signal u(samples, width);
  const std::size_t count = std::min(lines, kmax);
  for (std::size_t c = 0; c < width; ++c) {
    for (std::size_t j = 0; j < count; ++j) {
      const std::size_t k = count == 1 ? 1 : 1 + j * (kmax - 1) / (count - 1);
      const double phi = phase(rng);
      for (std::size_t t = 0; t < samples; ++t) {
        u.at(t, c) += std::cos(2.0 * std::numbers::pi * static_cast<double>(k * t % samples) / samples + phi);
      }
    }
    double ss = 0.0;
    for (std::size_t t = 0; t < samples; ++t) ss += u.at(t, c) * u.at(t, c);
    const double rms = std::sqrt(ss / std::max<std::size_t>(samples, 1));
    if (rms > 0.0)
      for (std::size_t t = 0; t < samples; ++t) u.at(t, c) *= stddev / rms;
  }
  return u;
}

}  // namespace ssenc
