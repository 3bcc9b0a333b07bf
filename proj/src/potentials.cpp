#include "edl/potentials.hpp"

#include <cmath>
#include <fstream>

#include "edl/errors.hpp"
#include "edl/rng.hpp"

namespace edl {

void Potential::check_dim(std::size_t got, const char* what) const {
  if (got != static_cast<std::size_t>(dim())) {
    throw Error(std::string("potential '") + kind() + "' is " +
                std::to_string(dim()) + "-dimensional but " + what + " has " +
                std::to_string(got) + " components");
  }
}

double Potential::value(std::span<const double> x) const {
  check_dim(x.size(), "the query point");
  return value_impl(x.data());
}

void Potential::gradient(std::span<const double> x, std::span<double> g) const {
  check_dim(x.size(), "the query point");
  check_dim(g.size(), "the gradient output");
  gradient_impl(x.data(), g.data());
}

std::vector<double> Potential::gradient(std::span<const double> x) const {
  std::vector<double> g(static_cast<std::size_t>(dim()));
  gradient(x, g);
  return g;
}

// ---------------------------------------------------------------------------
// DoubleWell1d

double DoubleWell1d::value_impl(const double* x) const {
  const double u = x[0];
  return 0.25 * u * u * u * u - 0.5 * u * u;
}

void DoubleWell1d::gradient_impl(const double* x, double* g) const {
  const double u = x[0];
  g[0] = u * u * u - u;
}

nlohmann::json DoubleWell1d::to_json() const {
  return {{"kind", kind()}, {"dim", 1}};
}

// ---------------------------------------------------------------------------
// QuadrupleWell2d

double QuadrupleWell2d::value_impl(const double* x) const {
  const DoubleWell1d dw;
  return dw.value(std::span<const double>(x, 1)) +
         dw.value(std::span<const double>(x + 1, 1));
}

void QuadrupleWell2d::gradient_impl(const double* x, double* g) const {
  g[0] = x[0] * x[0] * x[0] - x[0];
  g[1] = x[1] * x[1] * x[1] - x[1];
}

nlohmann::json QuadrupleWell2d::to_json() const {
  return {{"kind", kind()}, {"dim", 2}};
}

// ---------------------------------------------------------------------------
// GaussianWells

GaussianWells::GaussianWells(std::string kind_name,
                             std::vector<double> quad_coeff,
                             std::vector<Well> wells)
    : kind_name_(std::move(kind_name)),
      quad_coeff_(std::move(quad_coeff)),
      wells_(std::move(wells)) {
  const std::size_t d = quad_coeff_.size();
  if (d == 0) throw Error("GaussianWells: empty quadratic coefficient list");
  for (const Well& w : wells_) {
    if (w.center.size() != d || w.shape.size() != d) {
      throw Error("GaussianWells: well parameter tuple does not match dimension");
    }
  }
}

double GaussianWells::value_impl(const double* x) const {
  const std::size_t d = quad_coeff_.size();
  double v = 0.0;
  for (std::size_t k = 0; k < d; ++k) v += quad_coeff_[k] * x[k] * x[k];
  for (const Well& w : wells_) {
    double e = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double u = x[k] - w.center[k];
      e += w.shape[k] * u * u;
    }
    v += w.amplitude * std::exp(-e);
  }
  return v;
}

void GaussianWells::gradient_impl(const double* x, double* g) const {
  const std::size_t d = quad_coeff_.size();
  for (std::size_t k = 0; k < d; ++k) g[k] = 2.0 * quad_coeff_[k] * x[k];
  for (const Well& w : wells_) {
    double e = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double u = x[k] - w.center[k];
      e += w.shape[k] * u * u;
    }
    const double a = w.amplitude * std::exp(-e);
    for (std::size_t k = 0; k < d; ++k) {
      g[k] += a * (-2.0 * w.shape[k] * (x[k] - w.center[k]));
    }
  }
}

nlohmann::json GaussianWells::to_json() const {
  nlohmann::json wells = nlohmann::json::array();
  for (const Well& w : wells_) {
    wells.push_back({{"amplitude", w.amplitude},
                     {"center", w.center},
                     {"shape", w.shape}});
  }
  return {{"kind", kind_name_},
          {"dim", dim()},
          {"quad_coeff", quad_coeff_},
          {"wells", wells}};
}

GaussianWells make_gaussian_mixture_2d() {
  std::vector<GaussianWells::Well> wells = {
      {-2.0, {-1.0, 0.0}, {2.0, 1.0}},
      {-2.0, {1.0, 0.0}, {2.0, 1.0}},
      {-1.5, {0.0, 1.0}, {1.0, 2.0}},
  };
  return GaussianWells("gaussian_mixture_2d", {0.2, 0.3}, std::move(wells));
}

GaussianWells make_multimodal_3d() {
  std::vector<GaussianWells::Well> wells = {
      {-2.0, {-1.0, 0.0, 0.0}, {2.0, 1.0, 1.0}},
      {-2.0, {1.0, 0.0, 0.0}, {2.0, 1.0, 1.0}},
      {-1.5, {0.0, 1.0, 1.0}, {1.0, 2.0, 2.0}},
  };
  return GaussianWells("multimodal_3d", {0.2, 0.3, 0.3}, std::move(wells));
}

// ---------------------------------------------------------------------------
// QuadraticPotential / ZeroPotential

double QuadraticPotential::value_impl(const double* x) const {
  double s = 0.0;
  for (int k = 0; k < d_; ++k) s += x[k] * x[k];
  return 0.5 * k_ * s;
}

void QuadraticPotential::gradient_impl(const double* x, double* g) const {
  for (int k = 0; k < d_; ++k) g[k] = k_ * x[k];
}

nlohmann::json QuadraticPotential::to_json() const {
  return {{"kind", kind()}, {"dim", d_}, {"stiffness", k_}};
}

nlohmann::json ZeroPotential::to_json() const {
  return {{"kind", kind()}, {"dim", d_}};
}

// ---------------------------------------------------------------------------
// NeuralPotential

NeuralPotential::NeuralPotential(int d, int hidden) : d_(d), h_(hidden) {
  if (d < 1 || hidden < 1) throw Error("NeuralPotential: dim and hidden must be >= 1");
  off_b1_ = static_cast<std::size_t>(h_) * d_;
  off_w2_ = off_b1_ + h_;
  off_b2_ = off_w2_ + h_;
  params_.assign(off_b2_ + 1, 0.0);
}

NeuralPotential NeuralPotential::random_init(int d, int hidden, std::uint64_t seed) {
  NeuralPotential p(d, hidden);
  Rng rng(stream_key(seed, stream_tag::kWeightInit));
  const double s1 = 1.0 / std::sqrt(static_cast<double>(d));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (int h = 0; h < hidden; ++h)
    for (int k = 0; k < d; ++k) p.params_[p.w1_index(h, k)] = rng.uniform(-s1, s1);
  for (int h = 0; h < hidden; ++h) p.params_[p.b1_index(h)] = rng.uniform(-s1, s1);
  for (int h = 0; h < hidden; ++h) p.params_[p.w2_index(h)] = rng.uniform(-s2, s2);
  p.params_[p.b2_index()] = rng.uniform(-s2, s2);
  return p;
}

double NeuralPotential::value_impl(const double* x) const {
  double out = 0.0;
  for (int h = 0; h < h_; ++h) {
    double z = b1(h);
    for (int k = 0; k < d_; ++k) z += w1(h, k) * x[k];
    out += w2(h) * std::tanh(z);
  }
  return out + b2();
}

double NeuralPotential::body_value(std::span<const double> x) const {
  if (x.size() != static_cast<std::size_t>(d_))
    throw Error("NeuralPotential::body_value: dimension mismatch");
  double out = 0.0;
  for (int h = 0; h < h_; ++h) {
    double z = b1(h);
    for (int k = 0; k < d_; ++k) z += w1(h, k) * x[k];
    out += w2(h) * std::tanh(z);
  }
  return out;
}

void NeuralPotential::gradient_impl(const double* x, double* g) const {
  for (int k = 0; k < d_; ++k) g[k] = 0.0;
  for (int h = 0; h < h_; ++h) {
    double z = b1(h);
    for (int k = 0; k < d_; ++k) z += w1(h, k) * x[k];
    const double t = std::tanh(z);
    const double c = w2(h) * (1.0 - t * t);
    for (int k = 0; k < d_; ++k) g[k] += c * w1(h, k);
  }
}

void NeuralPotential::param_grad_value(std::span<const double> x,
                                       std::span<double> out) const {
  if (x.size() != static_cast<std::size_t>(d_) ||
      out.size() != params_.size()) {
    throw Error("NeuralPotential::param_grad_value: size mismatch");
  }
  for (int h = 0; h < h_; ++h) {
    double z = b1(h);
    for (int k = 0; k < d_; ++k) z += w1(h, k) * x[k];
    const double t = std::tanh(z);
    const double tp = 1.0 - t * t;
    const double c = w2(h) * tp;
    for (int k = 0; k < d_; ++k) out[w1_index(h, k)] = c * x[k];
    out[b1_index(h)] = c;
    out[w2_index(h)] = t;
  }
  out[b2_index()] = 1.0;
}

void NeuralPotential::param_grad_gradient(std::span<const double> x,
                                          std::span<double> out) const {
  if (x.size() != static_cast<std::size_t>(d_) ||
      out.size() != params_.size() * static_cast<std::size_t>(d_)) {
    throw Error("NeuralPotential::param_grad_gradient: size mismatch");
  }
  const std::size_t d = static_cast<std::size_t>(d_);
  for (int h = 0; h < h_; ++h) {
    double z = b1(h);
    for (int k = 0; k < d_; ++k) z += w1(h, k) * x[k];
    const double t = std::tanh(z);
    const double tp = 1.0 - t * t;
    const double tpp = -2.0 * t * tp;  // closed form, no differencing
    for (int i = 0; i < d_; ++i) {
      const double w1hi = w1(h, i);
      // d(grad_i)/dW1[h,k] = w2 (delta_ik tp + w1[h,i] tpp x_k)
      for (int k = 0; k < d_; ++k) {
        double v = w2(h) * w1hi * tpp * x[k];
        if (i == k) v += w2(h) * tp;
        out[w1_index(h, k) * d + i] = v;
      }
      out[b1_index(h) * d + i] = w2(h) * w1hi * tpp;
      out[w2_index(h) * d + i] = w1hi * tp;
      out[b2_index() * d + i] = 0.0;
    }
  }
}

nlohmann::json NeuralPotential::to_json() const {
  std::vector<double> w1v(params_.begin(), params_.begin() + off_b1_);
  std::vector<double> b1v(params_.begin() + off_b1_, params_.begin() + off_w2_);
  std::vector<double> w2v(params_.begin() + off_w2_, params_.begin() + off_b2_);
  return {{"kind", kind()}, {"dim", d_},   {"hidden", h_}, {"w1", w1v},
          {"b1", b1v},      {"w2", w2v},   {"b2", b2()}};
}

NeuralPotential NeuralPotential::from_json(const nlohmann::json& j) {
  NeuralPotential p(j.at("dim").get<int>(), j.at("hidden").get<int>());
  const auto w1v = j.at("w1").get<std::vector<double>>();
  const auto b1v = j.at("b1").get<std::vector<double>>();
  const auto w2v = j.at("w2").get<std::vector<double>>();
  if (w1v.size() != p.off_b1_ || b1v.size() != static_cast<std::size_t>(p.h_) ||
      w2v.size() != static_cast<std::size_t>(p.h_)) {
    throw Error("NeuralPotential::from_json: parameter block size mismatch");
  }
  std::copy(w1v.begin(), w1v.end(), p.params_.begin());
  std::copy(b1v.begin(), b1v.end(), p.params_.begin() + p.off_b1_);
  std::copy(w2v.begin(), w2v.end(), p.params_.begin() + p.off_w2_);
  p.params_[p.off_b2_] = j.at("b2").get<double>();
  return p;
}

// ---------------------------------------------------------------------------
// Factories and files

std::shared_ptr<Potential> potential_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "double_well_1d") return std::make_shared<DoubleWell1d>();
  if (kind == "quadruple_well_2d") return std::make_shared<QuadrupleWell2d>();
  if (kind == "quadratic") {
    return std::make_shared<QuadraticPotential>(j.at("dim").get<int>(),
                                                j.at("stiffness").get<double>());
  }
  if (kind == "zero") return std::make_shared<ZeroPotential>(j.at("dim").get<int>());
  if (kind == "neural") {
    return std::make_shared<NeuralPotential>(NeuralPotential::from_json(j));
  }
  if (kind == "gaussian_mixture_2d" || kind == "multimodal_3d" ||
      kind == "gaussian_wells") {
    std::vector<GaussianWells::Well> wells;
    for (const auto& w : j.at("wells")) {
      wells.push_back({w.at("amplitude").get<double>(),
                       w.at("center").get<std::vector<double>>(),
                       w.at("shape").get<std::vector<double>>()});
    }
    return std::make_shared<GaussianWells>(
        kind, j.at("quad_coeff").get<std::vector<double>>(), std::move(wells));
  }
  throw Error("potential_from_json: unknown kind '" + kind + "'");
}

void save_potential(const Potential& p, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error("save_potential: cannot open " + path);
  os << p.to_json().dump(2) << "\n";
}

std::shared_ptr<Potential> load_potential(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error("load_potential: cannot open " + path);
  nlohmann::json j;
  is >> j;
  return potential_from_json(j);
}

std::shared_ptr<Potential> make_benchmark_potential(const std::string& kind) {
  if (kind == "double_well_1d") return std::make_shared<DoubleWell1d>();
  if (kind == "quadruple_well_2d") return std::make_shared<QuadrupleWell2d>();
  if (kind == "gaussian_mixture_2d")
    return std::make_shared<GaussianWells>(make_gaussian_mixture_2d());
  if (kind == "multimodal_3d")
    return std::make_shared<GaussianWells>(make_multimodal_3d());
  throw Error("make_benchmark_potential: unknown kind '" + kind + "'");
}

}  // namespace edl
