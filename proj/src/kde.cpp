#include "edl/kde.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "edl/errors.hpp"
#include "edl/parallel.hpp"

namespace edl {

namespace {

// exp(m) is exactly zero below this argument; skipping such terms cannot
// change any sum.
constexpr double kExpZeroArg = -745.2;
constexpr double kLogFloor = -690.77552789821368;  // ln(1e-300)

void check_inputs(std::span<const double> points, std::size_t n,
                  const KernelConfig& kc, std::span<const double> x) {
  kc.validate();
  if (n == 0) throw Error("kde: empty point set");
  if (points.size() != n * static_cast<std::size_t>(kc.dim))
    throw Error("kde: point buffer does not match n * dim");
  if (x.size() != static_cast<std::size_t>(kc.dim))
    throw Error("kde: query dimension mismatch");
}

}  // namespace

double KernelConfig::norm_const() const {
  return std::pow(2.0 * std::numbers::pi, 0.5 * dim) * std::pow(bandwidth, dim);
}

void KernelConfig::validate() const {
  if (bandwidth <= 0) throw Error("kernel bandwidth must be > 0");
  if (dim < 1) throw Error("kernel dimension must be >= 1");
}

double kde_log_density(std::span<const double> points, std::size_t n,
                       const KernelConfig& kc, std::span<const double> x) {
  check_inputs(points, n, kc, x);
  const int d = kc.dim;
  const double inv2h2 = 0.5 / (kc.bandwidth * kc.bandwidth);
  const double log_norm =
      std::log(static_cast<double>(n)) + std::log(kc.norm_const());

  double m_max = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    double r2 = 0.0;
    for (int k = 0; k < d; ++k) {
      const double u = x[k] - points[j * d + k];
      r2 += u * u;
    }
    const double m = -r2 * inv2h2;
    if (m > m_max) m_max = m;
  }
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double r2 = 0.0;
    for (int k = 0; k < d; ++k) {
      const double u = x[k] - points[j * d + k];
      r2 += u * u;
    }
    const double m = -r2 * inv2h2 - m_max;
    if (m > kExpZeroArg) s += std::exp(m);
  }
  const double log_unnorm = m_max + std::log(s);
  if (log_unnorm < kLogFloor)
    throw KdeUnderflowError("kde: query outside data support");
  return log_unnorm - log_norm;
}

double kde_density(std::span<const double> points, std::size_t n,
                   const KernelConfig& kc, std::span<const double> x) {
  return std::exp(kde_log_density(points, n, kc, x));
}

void kde_grad_log_density(std::span<const double> points, std::size_t n,
                          const KernelConfig& kc, std::span<const double> x,
                          std::span<double> out) {
  check_inputs(points, n, kc, x);
  const int d = kc.dim;
  if (out.size() != static_cast<std::size_t>(d))
    throw Error("kde: gradient output dimension mismatch");
  const double h2 = kc.bandwidth * kc.bandwidth;
  const double inv2h2 = 0.5 / h2;

  double m_max = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < n; ++j) {
    double r2 = 0.0;
    for (int k = 0; k < d; ++k) {
      const double u = x[k] - points[j * d + k];
      r2 += u * u;
    }
    const double m = -r2 * inv2h2;
    if (m > m_max) m_max = m;
  }
  if (m_max < kLogFloor)
    throw KdeUnderflowError("kde: query outside data support");

  double wsum = 0.0;
  for (int k = 0; k < d; ++k) out[k] = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double r2 = 0.0;
    for (int k = 0; k < d; ++k) {
      const double u = x[k] - points[j * d + k];
      r2 += u * u;
    }
    const double m = -r2 * inv2h2 - m_max;
    if (m <= kExpZeroArg) continue;
    const double w = std::exp(m);
    wsum += w;
    for (int k = 0; k < d; ++k) out[k] += w * (points[j * d + k] - x[k]);
  }
  for (int k = 0; k < d; ++k) out[k] /= (wsum * h2);
}

std::vector<double> kde_grad_log_density(std::span<const double> points,
                                         std::size_t n, const KernelConfig& kc,
                                         std::span<const double> x) {
  std::vector<double> g(static_cast<std::size_t>(kc.dim));
  kde_grad_log_density(points, n, kc, x, g);
  return g;
}

KdeMemberTables kde_member_tables(std::span<const double> points, std::size_t n,
                                  const KernelConfig& kc) {
  kc.validate();
  if (n == 0) throw Error("kde: empty point set");
  const int d = kc.dim;
  if (d > 8) throw Error("kde: dimensions above 8 are not supported");
  if (points.size() != n * static_cast<std::size_t>(d))
    throw Error("kde: point buffer does not match n * dim");
  const double h2 = kc.bandwidth * kc.bandwidth;
  const double inv2h2 = 0.5 / h2;
  const double log_norm =
      std::log(static_cast<double>(n)) + std::log(kc.norm_const());

  KdeMemberTables t;
  t.log_density.resize(n);
  t.grad_log_density.assign(n * static_cast<std::size_t>(d), 0.0);

  // The self weight exp(0) = 1 dominates, so the stabilized sums of the
  // pointwise functions reduce to plain sums and wsum >= 1 always: no
  // underflow floor can trigger at a member query.
  parallel_for(n, [&](std::size_t q) {
    const double* xq = points.data() + q * d;
    double wsum = 0.0;
    double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    for (std::size_t j = 0; j < n; ++j) {
      const double* xj = points.data() + j * d;
      double r2 = 0.0;
      for (int k = 0; k < d; ++k) {
        const double u = xq[k] - xj[k];
        r2 += u * u;
      }
      const double m = -r2 * inv2h2;
      if (m <= kExpZeroArg) continue;
      const double w = std::exp(m);
      wsum += w;
      for (int k = 0; k < d; ++k) acc[k] += w * (xj[k] - xq[k]);
    }
    t.log_density[q] = std::log(wsum) - log_norm;
    for (int k = 0; k < d; ++k)
      t.grad_log_density[q * d + k] = acc[k] / (wsum * h2);
  });
  return t;
}

}  // namespace edl
