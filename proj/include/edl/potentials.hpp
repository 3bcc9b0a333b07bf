#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace edl {

/// A scalar potential field on R^d with an exact analytic spatial gradient.
/// Implementations must be pure functions of (parameters, x) so they can be
/// evaluated concurrently.
class Potential {
 public:
  virtual ~Potential() = default;

  virtual int dim() const = 0;
  virtual std::string kind() const = 0;

  /// Value at x (x has exactly dim() components, checked).
  double value(std::span<const double> x) const;
  /// Gradient at x written to g (dim() components, checked).
  void gradient(std::span<const double> x, std::span<double> g) const;
  std::vector<double> gradient(std::span<const double> x) const;

  virtual nlohmann::json to_json() const = 0;

 protected:
  // Unchecked kernels; callers guarantee x/g have dim() entries.
  virtual double value_impl(const double* x) const = 0;
  virtual void gradient_impl(const double* x, double* g) const = 0;

 private:
  void check_dim(std::size_t got, const char* what) const;
};

using PotentialPtr = std::shared_ptr<const Potential>;

/// psi(x) = x^4/4 - x^2/2. Minima at x = +-1 with value -1/4.
class DoubleWell1d final : public Potential {
 public:
  int dim() const override { return 1; }
  std::string kind() const override { return "double_well_1d"; }
  nlohmann::json to_json() const override;

 protected:
  double value_impl(const double* x) const override;
  void gradient_impl(const double* x, double* g) const override;
};

/// Separable quadruple well, psi(x,y) = dw(x) + dw(y); wells at (+-1, +-1).
class QuadrupleWell2d final : public Potential {
 public:
  int dim() const override { return 2; }
  std::string kind() const override { return "quadruple_well_2d"; }
  nlohmann::json to_json() const override;

 protected:
  double value_impl(const double* x) const override;
  void gradient_impl(const double* x, double* g) const override;
};

/// Quadratic confinement plus localized Gaussian wells:
///   psi(q) = sum_i c_i q_i^2 + sum_k A_k exp(-sum_j a_kj (q_j - mu_kj)^2)
/// Covers both benchmark mixtures (2d and 3d) and any custom landscape.
class GaussianWells final : public Potential {
 public:
  struct Well {
    double amplitude = 0.0;
    std::vector<double> center;
    std::vector<double> shape;  // per-axis exponents a_kj > 0
  };

  GaussianWells(std::string kind_name, std::vector<double> quad_coeff,
                std::vector<Well> wells);

  int dim() const override { return static_cast<int>(quad_coeff_.size()); }
  std::string kind() const override { return kind_name_; }
  nlohmann::json to_json() const override;

  const std::vector<double>& quad_coeff() const { return quad_coeff_; }
  const std::vector<Well>& wells() const { return wells_; }

 protected:
  double value_impl(const double* x) const override;
  void gradient_impl(const double* x, double* g) const override;

 private:
  std::string kind_name_;
  std::vector<double> quad_coeff_;
  std::vector<Well> wells_;
};

/// The 2d benchmark mixture: c = (0.2, 0.3), three wells of depth
/// (-2, -2, -1.5) at (-1,0), (1,0), (0,1) with shapes (2,1), (2,1), (1,2).
GaussianWells make_gaussian_mixture_2d();

/// The 3d benchmark landscape: c = (0.2, 0.3, 0.3), wells of depth
/// (-2, -2, -1.5) at (-1,0,0), (1,0,0), (0,1,1) with shapes
/// (2,1,1), (2,1,1), (1,2,2).
GaussianWells make_multimodal_3d();

/// psi(x) = k/2 |x|^2, any dimension. Used for Ornstein-Uhlenbeck checks.
class QuadraticPotential final : public Potential {
 public:
  QuadraticPotential(int d, double k) : d_(d), k_(k) {}
  int dim() const override { return d_; }
  std::string kind() const override { return "quadratic"; }
  double stiffness() const { return k_; }
  nlohmann::json to_json() const override;

 protected:
  double value_impl(const double* x) const override;
  void gradient_impl(const double* x, double* g) const override;

 private:
  int d_;
  double k_;
};

/// psi identically 0 (free diffusion).
class ZeroPotential final : public Potential {
 public:
  explicit ZeroPotential(int d) : d_(d) {}
  int dim() const override { return d_; }
  std::string kind() const override { return "zero"; }
  nlohmann::json to_json() const override;

 protected:
  double value_impl(const double*) const override { return 0.0; }
  void gradient_impl(const double*, double* g) const override {
    for (int k = 0; k < d_; ++k) g[k] = 0.0;
  }

 private:
  int d_;
};

/// One-hidden-layer tanh network
///   psi(x) = w2 . tanh(W1 x + b1) + b2
/// with exact closed-form spatial and parameter derivatives (no automatic or
/// numeric differentiation anywhere). Parameters live in one flat vector laid
/// out as [W1 row-major | b1 | w2 | b2] so optimizers can treat the model as a
/// plain coordinate vector.
class NeuralPotential final : public Potential {
 public:
  NeuralPotential(int d, int hidden);

  /// Weights drawn uniformly from [-1/sqrt(fan_in), 1/sqrt(fan_in)] per
  /// layer (biases use their layer's fan-in), deterministically from seed.
  static NeuralPotential random_init(int d, int hidden, std::uint64_t seed);

  int dim() const override { return d_; }
  int hidden() const { return h_; }
  std::string kind() const override { return "neural"; }

  int param_count() const { return static_cast<int>(params_.size()); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  // Flat-layout accessors.
  double w1(int h, int k) const { return params_[static_cast<std::size_t>(h) * d_ + k]; }
  double b1(int h) const { return params_[off_b1_ + h]; }
  double w2(int h) const { return params_[off_w2_ + h]; }
  double b2() const { return params_[off_b2_]; }
  std::size_t w1_index(int h, int k) const { return static_cast<std::size_t>(h) * d_ + k; }
  std::size_t b1_index(int h) const { return off_b1_ + h; }
  std::size_t w2_index(int h) const { return off_w2_ + h; }
  std::size_t b2_index() const { return off_b2_; }

  /// Value minus the output bias b2. The energy losses difference two such
  /// sums, where b2 cancels identically; computing it without b2 makes the
  /// losses exactly invariant under psi -> psi + c.
  double body_value(std::span<const double> x) const;

  /// d(psi)/d(theta) at x; out has param_count() entries.
  void param_grad_value(std::span<const double> x, std::span<double> out) const;

  /// d(grad psi)/d(theta) at x; out has param_count()*dim() entries with
  /// out[p*dim()+i] = d( dpsi/dx_i )/d(theta_p).
  void param_grad_gradient(std::span<const double> x, std::span<double> out) const;

  nlohmann::json to_json() const override;
  static NeuralPotential from_json(const nlohmann::json& j);

 protected:
  double value_impl(const double* x) const override;
  void gradient_impl(const double* x, double* g) const override;

 private:
  int d_;
  int h_;
  std::size_t off_b1_, off_w2_, off_b2_;
  std::vector<double> params_;
};

/// Reconstructs any serialized potential (analytic kinds and "neural").
std::shared_ptr<Potential> potential_from_json(const nlohmann::json& j);

void save_potential(const Potential& p, const std::string& path);
std::shared_ptr<Potential> load_potential(const std::string& path);

/// Named benchmark landscape factory: "double_well_1d", "quadruple_well_2d",
/// "gaussian_mixture_2d", "multimodal_3d".
std::shared_ptr<Potential> make_benchmark_potential(const std::string& kind);

}  // namespace edl
