#include "ssenc/model.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <random>
#include <sstream>

#include "ssenc/error.hpp"

namespace ssenc {

using nlohmann::json;

void ModelDims::validate() const {
  if (n_x == 0 || n_u == 0 || n_y == 0) throw DimensionError("model dims: n_x, n_u and n_y must be >= 1");
  if (encoder_inputs() == 0) throw DimensionError("model dims: n_a + n_b must be >= 1");
}

std::string to_string(SimInit s) { return s == SimInit::Zero ? "zero" : "encoder"; }

SimInit sim_init_from_string(const std::string& s) {
  if (s == "encoder") return SimInit::Encoder;
  if (s == "zero") return SimInit::Zero;
  throw ConfigError("sim_init must be 'encoder' or 'zero', got '" + s + "'");
}

template <class T>
SSEncoderModel<T>::SSEncoderModel(ModelDims dims, ResidualNet<T> encoder, ResidualNet<T> f,
                                  ResidualNet<T> h, Normalizer u_norm, Normalizer y_norm)
    : dims_(dims), e_(std::move(encoder)), f_(std::move(f)), h_(std::move(h)) {
  dims_.validate();
  check_nets();
  set_normalizers(std::move(u_norm), std::move(y_norm));
}

template <class T>
void SSEncoderModel<T>::check_nets() const {
  const std::size_t xu = dims_.n_x + dims_.n_u;
  auto fail = [](const char* which, std::size_t in, std::size_t out, std::size_t want_in, std::size_t want_out) {
    throw DimensionError(std::string(which) + " net maps " + std::to_string(in) + " -> " + std::to_string(out) +
                         ", model dims require " + std::to_string(want_in) + " -> " + std::to_string(want_out));
  };
  if (e_.n_in() != dims_.encoder_inputs() || e_.n_out() != dims_.n_x)
    fail("encoder", e_.n_in(), e_.n_out(), dims_.encoder_inputs(), dims_.n_x);
  if (f_.n_in() != xu || f_.n_out() != dims_.n_x) fail("f", f_.n_in(), f_.n_out(), xu, dims_.n_x);
  if (h_.n_in() != xu || h_.n_out() != dims_.n_y) fail("h", h_.n_in(), h_.n_out(), xu, dims_.n_y);
}

template <class T>
void SSEncoderModel<T>::set_normalizers(Normalizer u_norm, Normalizer y_norm) {
  auto check = [](const Normalizer& n, std::size_t width, const char* which) {
    if (n.mean.size() != width || n.stddev.size() != width) {
      throw DimensionError(std::string(which) + " normalizer width does not match the model");
    }
    for (double s : n.stddev) {
      if (!(s > 0.0)) throw DataError(std::string(which) + " normalizer has a non-positive std");
    }
  };
  check(u_norm, dims_.n_u, "input");
  check(y_norm, dims_.n_y, "output");
  u_norm_ = std::move(u_norm);
  y_norm_ = std::move(y_norm);
}

template <class T>
SSEncoderModel<T> SSEncoderModel<T>::create(const ModelDims& dims, const ModelArch& arch, Normalizer u_norm,
                                            Normalizer y_norm, std::uint64_t seed, InitRule rule) {
  dims.validate();
  std::mt19937_64 rng(seed);
  const std::uint64_t se = rng(), sf = rng(), sh = rng();
  const std::size_t xu = dims.n_x + dims.n_u;
  return SSEncoderModel(dims,
                        ResidualNet<T>::init({dims.encoder_inputs(), arch.encoder_hidden, dims.n_x}, se, rule),
                        ResidualNet<T>::init({xu, arch.f_hidden, dims.n_x}, sf, rule),
                        ResidualNet<T>::init({xu, arch.h_hidden, dims.n_y}, sh, rule), std::move(u_norm),
                        std::move(y_norm));
}

template <class T>
std::vector<T> SSEncoderModel<T>::encode(std::span<const T> y_hist, std::span<const T> u_hist) const {
  if (y_hist.size() != dims_.n_a * dims_.n_y || u_hist.size() != dims_.n_b * dims_.n_u) {
    throw DimensionError("encode expects " + std::to_string(dims_.n_a) + " output and " +
                         std::to_string(dims_.n_b) + " input history samples");
  }
  std::vector<T> z(y_hist.begin(), y_hist.end());
  z.insert(z.end(), u_hist.begin(), u_hist.end());
  std::vector<T> x(dims_.n_x);
  e_.evaluate(z, x);
  return x;
}

namespace {

template <class T>
std::vector<T> state_input(std::span<const T> x, std::span<const T> u, const ModelDims& dims) {
  if (x.size() != dims.n_x || u.size() != dims.n_u) {
    throw DimensionError("expected a state of size " + std::to_string(dims.n_x) + " and an input of size " +
                         std::to_string(dims.n_u));
  }
  std::vector<T> z(x.begin(), x.end());
  z.insert(z.end(), u.begin(), u.end());
  return z;
}

}  // namespace

template <class T>
std::vector<T> SSEncoderModel<T>::step(std::span<const T> x, std::span<const T> u) const {
  const auto z = state_input(x, u, dims_);
  std::vector<T> next(dims_.n_x);
  f_.evaluate(z, next);
  return next;
}

template <class T>
std::vector<T> SSEncoderModel<T>::output(std::span<const T> x, std::span<const T> u) const {
  const auto z = state_input(x, u, dims_);
  std::vector<T> y(dims_.n_y);
  h_.evaluate(z, y);
  return y;
}

template <class T>
NormalizedData<T> SSEncoderModel<T>::normalize(const Dataset& d) const {
  d.validate();
  if (d.n_u() != dims_.n_u || d.n_y() != dims_.n_y) {
    throw DimensionError("dataset has " + std::to_string(d.n_u()) + " inputs / " + std::to_string(d.n_y()) +
                         " outputs, model expects " + std::to_string(dims_.n_u) + " / " +
                         std::to_string(dims_.n_y));
  }
  NormalizedData<T> out;
  out.n_u = d.n_u();
  out.n_y = d.n_y();
  out.u.resize(d.u.values.size());
  out.y.resize(d.y.values.size());
  for (std::size_t t = 0; t < d.samples(); ++t) {
    for (std::size_t c = 0; c < out.n_u; ++c) out.u[t * out.n_u + c] = static_cast<T>(u_norm_.apply(d.u.at(t, c), c));
    for (std::size_t c = 0; c < out.n_y; ++c) out.y[t * out.n_y + c] = static_cast<T>(y_norm_.apply(d.y.at(t, c), c));
  }
  return out;
}

namespace {

// Shared unroll: x0 given, evaluates `steps` outputs starting at data index `start`.
template <class T>
void unroll(const ResidualNet<T>& f, const ResidualNet<T>& h, const ModelDims& dims,
            const NormalizedData<T>& data, std::size_t start, std::size_t steps, std::vector<T> x,
            std::span<T> out, RolloutTape<T>* tape) {
  const std::size_t n_x = dims.n_x, n_u = dims.n_u, n_y = dims.n_y;
  std::vector<T> z(n_x + n_u);
  if (tape) {
    if (tape->h.size() < steps) tape->h.resize(steps);
    if (tape->f.size() + 1 < steps) tape->f.resize(steps - 1);
  }
  for (std::size_t k = 0; k < steps; ++k) {
    std::copy(x.begin(), x.end(), z.begin());
    const auto u = data.u_row(start + k);
    std::copy(u.begin(), u.end(), z.begin() + n_x);
    std::span<T> y_out = out.subspan(k * n_y, n_y);
    if (tape) {
      h.forward(z, y_out, tape->h[k]);
    } else {
      h.evaluate(z, y_out);
    }
    if (k + 1 < steps) {
      if (tape) {
        f.forward(z, x, tape->f[k]);
      } else {
        f.evaluate(z, x);
      }
    }
  }
}

}  // namespace

template <class T>
std::vector<T> SSEncoderModel<T>::rollout(const NormalizedData<T>& data, std::size_t start, std::size_t horizon,
                                          std::size_t burn_in, RolloutTape<T>* tape) const {
  if (data.n_u != dims_.n_u || data.n_y != dims_.n_y) throw DimensionError("rollout: data width mismatch");
  const std::size_t n = data.samples();
  if (start < dims_.warmup() || start + horizon + burn_in >= n) {
    throw DimensionError("rollout: section start " + std::to_string(start) + " with T=" + std::to_string(horizon) +
                         ", k0=" + std::to_string(burn_in) + " is outside the valid range [" +
                         std::to_string(dims_.warmup()) + ", " + std::to_string(n) + " - 1 - T - k0]");
  }
  const std::size_t steps = horizon + burn_in + 1;

  std::vector<T> z(dims_.encoder_inputs());
  const std::size_t ya = dims_.n_a * dims_.n_y;
  std::copy(data.y.begin() + (start - dims_.n_a) * dims_.n_y, data.y.begin() + start * dims_.n_y, z.begin());
  std::copy(data.u.begin() + (start - dims_.n_b) * dims_.n_u, data.u.begin() + start * dims_.n_u, z.begin() + ya);
  std::vector<T> x(dims_.n_x);
  if (tape) {
    tape->from_encoder = true;
    tape->start = start;
    tape->steps = steps;
    e_.forward(z, x, tape->encoder);
  } else {
    e_.evaluate(z, x);
  }

  std::vector<T> out(steps * dims_.n_y);
  unroll(f_, h_, dims_, data, start, steps, std::move(x), std::span<T>(out), tape);
  out.erase(out.begin(), out.begin() + burn_in * dims_.n_y);
  return out;
}

template <class T>
std::vector<T> SSEncoderModel<T>::rollout_from_zero(const NormalizedData<T>& data, RolloutTape<T>* tape) const {
  if (data.n_u != dims_.n_u || data.n_y != dims_.n_y) throw DimensionError("rollout: data width mismatch");
  const std::size_t steps = data.samples();
  if (steps == 0) throw DataError("rollout: empty dataset");
  if (tape) {
    tape->from_encoder = false;
    tape->start = 0;
    tape->steps = steps;
  }
  std::vector<T> out(steps * dims_.n_y);
  unroll(f_, h_, dims_, data, 0, steps, std::vector<T>(dims_.n_x, T(0)), std::span<T>(out), tape);
  return out;
}

template <class T>
void SSEncoderModel<T>::rollout_backward(const RolloutTape<T>& tape, std::span<const T> dy,
                                         std::span<T> grad) const {
  const std::size_t n_x = dims_.n_x, n_u = dims_.n_u, n_y = dims_.n_y;
  const std::size_t pe = e_.params().size(), pf = f_.params().size(), ph = h_.params().size();
  if (dy.size() != tape.steps * n_y) throw DimensionError("rollout_backward: dy has the wrong length");
  if (grad.size() != pe + pf + ph) throw DimensionError("rollout_backward: gradient buffer has the wrong length");
  std::span<T> ge = grad.subspan(0, pe), gf = grad.subspan(pe, pf), gh = grad.subspan(pe + pf, ph);

  std::vector<T> gx(n_x, T(0));
  std::vector<T> dz(n_x + n_u);
  for (std::size_t k = tape.steps; k-- > 0;) {
    if (k + 1 < tape.steps) {
      f_.backward(tape.f[k], gx, dz, gf);
      std::copy(dz.begin(), dz.begin() + n_x, gx.begin());
    }
    const auto dyk = dy.subspan(k * n_y, n_y);
    if (std::any_of(dyk.begin(), dyk.end(), [](T v) { return v != T(0); })) {
      h_.backward(tape.h[k], dyk, dz, gh);
      for (std::size_t i = 0; i < n_x; ++i) gx[i] += dz[i];
    }
  }
  if (tape.from_encoder) {
    std::vector<T> dze(e_.n_in());
    e_.backward(tape.encoder, gx, dze, ge);
  }
}

template <class T>
typename SSEncoderModel<T>::Simulation SSEncoderModel<T>::simulate(const Dataset& d, SimInit init) const {
  const auto data = normalize(d);
  const std::size_t n = data.samples();
  Simulation sim;
  std::vector<T> pred;
  if (init == SimInit::Encoder) {
    if (n <= dims_.warmup()) {
      throw DataError("simulation with encoder init needs more than " + std::to_string(dims_.warmup()) +
                      " samples, dataset has " + std::to_string(n));
    }
    sim.t0 = dims_.warmup();
    pred = rollout(data, sim.t0, n - sim.t0 - 1, 0);
  } else {
    sim.t0 = 0;
    pred = rollout_from_zero(data);
  }
  const std::size_t rows = n - sim.t0;
  sim.y_hat = Signal(rows, dims_.n_y);
  for (std::size_t t = 0; t < rows; ++t) {
    for (std::size_t c = 0; c < dims_.n_y; ++c) {
      sim.y_hat.at(t, c) = y_norm_.invert(static_cast<double>(pred[t * dims_.n_y + c]), c);
    }
  }
  return sim;
}

template <class T>
std::size_t SSEncoderModel<T>::parameter_count() const {
  return e_.params().size() + f_.params().size() + h_.params().size();
}

template <class T>
ParamVector<T> SSEncoderModel<T>::parameters() const {
  ParamVector<T> p;
  p.values.reserve(parameter_count());
  std::size_t off = 0;
  for (const auto& [name, net] : {std::pair{"encoder", &e_}, std::pair{"f", &f_}, std::pair{"h", &h_}}) {
    const auto v = net->params();
    p.values.insert(p.values.end(), v.begin(), v.end());
    p.entries.push_back({name, off, v.size()});
    off += v.size();
  }
  return p;
}

template <class T>
void SSEncoderModel<T>::set_parameters(std::span<const T> flat) {
  if (flat.size() != parameter_count()) {
    throw DimensionError("model expects " + std::to_string(parameter_count()) + " parameters, got " +
                         std::to_string(flat.size()));
  }
  const std::size_t pe = e_.params().size(), pf = f_.params().size();
  e_.set_params(flat.subspan(0, pe));
  f_.set_params(flat.subspan(pe, pf));
  h_.set_params(flat.subspan(pe + pf));
}

template <class T>
void SSEncoderModel<T>::set_parameters(const ParamVector<T>& p) {
  set_parameters(std::span<const T>(p.values));
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

template <class T>
json array_of(std::span<const T> v) {
  json a = json::array();
  for (T x : v) a.push_back(static_cast<double>(x));
  return a;
}

template <class T>
json net_to_json(const ResidualNet<T>& net) {
  json j;
  j["n_in"] = net.n_in();
  j["hidden"] = net.shape().hidden;
  j["n_out"] = net.n_out();
  j["init"] = {{"rule", to_string(net.init_rule())}, {"seed", net.init_seed()}};
  json layers = json::array();
  for (std::size_t l = 0; l < net.layers(); ++l) {
    layers.push_back({{"weight", array_of(net.hidden_weight(l))}, {"bias", array_of(net.hidden_bias(l))}});
  }
  j["hidden_layers"] = layers;
  j["output_weight"] = array_of(net.output_weight());
  j["bypass_weight"] = array_of(net.bypass_weight());
  j["bypass_bias"] = array_of(net.bypass_bias());
  return j;
}

template <class T>
void read_into(const json& a, std::span<T> dst, const std::string& what) {
  if (!a.is_array() || a.size() != dst.size()) {
    throw FormatError("model file: '" + what + "' should hold " + std::to_string(dst.size()) + " values");
  }
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(a[i].get<double>());
}

template <class T>
ResidualNet<T> net_from_json(const json& j, const std::string& name) {
  NetShape shape{j.at("n_in").get<std::size_t>(), j.at("hidden").get<std::vector<std::size_t>>(),
                 j.at("n_out").get<std::size_t>()};
  ResidualNet<T> net(shape);
  std::vector<T> p(shape.parameter_count());
  std::span<T> ps(p);
  const auto& layers = j.at("hidden_layers");
  if (layers.size() != shape.hidden.size()) throw FormatError("model file: " + name + " layer count mismatch");
  for (std::size_t l = 0; l < shape.hidden.size(); ++l) {
    read_into(layers[l].at("weight"), ps.subspan(net.hidden_weight_offset(l), net.hidden_weight(l).size()),
              name + ".hidden_layers.weight");
    read_into(layers[l].at("bias"), ps.subspan(net.hidden_bias_offset(l), shape.hidden[l]),
              name + ".hidden_layers.bias");
  }
  read_into(j.at("output_weight"), ps.subspan(net.output_weight_offset(), net.output_weight().size()),
            name + ".output_weight");
  read_into(j.at("bypass_weight"), ps.subspan(net.bypass_weight_offset(), net.bypass_weight().size()),
            name + ".bypass_weight");
  read_into(j.at("bypass_bias"), ps.subspan(net.bypass_bias_offset(), shape.n_out), name + ".bypass_bias");
  net.set_params(p);
  if (j.contains("init")) {
    net.set_init_metadata(j["init"].value("seed", std::uint64_t{0}),
                          init_rule_from_string(j["init"].value("rule", std::string("standard"))));
  }
  return net;
}

json normalizer_to_json(const Normalizer& n) { return {{"mean", n.mean}, {"std", n.stddev}}; }

Normalizer normalizer_from_json(const json& j) {
  return {j.at("mean").get<std::vector<double>>(), j.at("std").get<std::vector<double>>()};
}

template <class T>
constexpr const char* precision_name() {
  return sizeof(T) == 4 ? "f32" : "f64";
}

template <class T>
SSEncoderModel<T> typed_from_json(const json& j) {
  const auto& d = j.at("dims");
  ModelDims dims{d.at("n_x").get<std::size_t>(), d.at("n_u").get<std::size_t>(), d.at("n_y").get<std::size_t>(),
                 d.at("n_a").get<std::size_t>(), d.at("n_b").get<std::size_t>()};
  const auto& nets = j.at("nets");
  return SSEncoderModel<T>(dims, net_from_json<T>(nets.at("encoder"), "encoder"), net_from_json<T>(nets.at("f"), "f"),
                           net_from_json<T>(nets.at("h"), "h"), normalizer_from_json(j.at("normalizers").at("u")),
                           normalizer_from_json(j.at("normalizers").at("y")));
}

}  // namespace

template <class T>
std::string model_to_json(const SSEncoderModel<T>& m) {
  json j;
  j["format"] = "ssenc-model";
  j["format_version"] = kModelFormatVersion;
  j["precision"] = precision_name<T>();
  const auto& d = m.dims();
  j["dims"] = {{"n_x", d.n_x}, {"n_u", d.n_u}, {"n_y", d.n_y}, {"n_a", d.n_a}, {"n_b", d.n_b}};
  j["normalizers"] = {{"u", normalizer_to_json(m.u_normalizer())}, {"y", normalizer_to_json(m.y_normalizer())}};
  j["nets"] = {{"encoder", net_to_json(m.encoder_net())}, {"f", net_to_json(m.f_net())}, {"h", net_to_json(m.h_net())}};
  return j.dump(1) + "\n";
}

AnyModel model_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError(std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (j.value("format", std::string()) != "ssenc-model") throw FormatError("not an ssenc model file");
    const int version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw FormatError("model file format_version " + std::to_string(version) + " is not supported (expected " +
                        std::to_string(kModelFormatVersion) + ")");
    }
    const auto precision = j.at("precision").get<std::string>();
    if (precision == "f32") return typed_from_json<float>(j);
    if (precision == "f64") return typed_from_json<double>(j);
    throw FormatError("model file: unknown precision '" + precision + "'");
  } catch (const json::exception& e) {
    throw FormatError(std::string("model file: ") + e.what());
  } catch (const DimensionError& e) {
    throw FormatError(std::string("model file: ") + e.what());
  }
}

template <class T>
void save_model(const SSEncoderModel<T>& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write model file '" + path.string() + "'");
  out << model_to_json(m);
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

AnyModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return model_from_json(ss.str());
}

template class SSEncoderModel<float>;
template class SSEncoderModel<double>;
template std::string model_to_json(const SSEncoderModel<float>&);
template std::string model_to_json(const SSEncoderModel<double>&);
template void save_model(const SSEncoderModel<float>&, const std::filesystem::path&);
template void save_model(const SSEncoderModel<double>&, const std::filesystem::path&);

}  // namespace ssenc
