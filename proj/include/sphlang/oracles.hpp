#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <thread>
#include <vector>

#include "sphlang/errors.hpp"
#include "sphlang/hermite.hpp"
#include "sphlang/models.hpp"
#include "sphlang/random.hpp"
#include "sphlang/sphere.hpp"

namespace sphlang {

/// Stationary (uniform-measure) averages of the drift:
/// b_bar = E_z[b(z)] and g_bar = E_z[z b(z)^T + b(z) z^T], with per-entry
/// standard errors from the sample variance.
struct StationaryAverages {
  Vector b_bar;
  Matrix g_bar;
  Vector b_se;
  Matrix g_se;
  long mc_samples = 0;
};

namespace detail {

struct MomentBlock {
  Vector b_sum, b_sq;
  Matrix g_sum, g_sq;

  explicit MomentBlock(Eigen::Index d)
      : b_sum(Vector::Zero(d)), b_sq(Vector::Zero(d)), g_sum(Matrix::Zero(d, d)), g_sq(Matrix::Zero(d, d)) {}

  void merge(const MomentBlock& o) {
    b_sum += o.b_sum;
    b_sq += o.b_sq;
    g_sum += o.g_sum;
    g_sq += o.g_sq;
  }
};

inline constexpr long kOracleBlock = 4096;

}  // namespace detail

/// Averages over i.i.d. uniform sphere samples, never the SDE. Samples are
/// split into fixed blocks with their own derived streams and reduced by a
/// fixed pairwise tree, so results do not depend on `workers`.
template <DriftField Field>
StationaryAverages mc_stationary(const Field& field, long samples, std::uint64_t seed, unsigned workers = 1) {
  if (samples < 1000) throw ConfigError("samples", "mc_stationary needs at least 1000 samples");
  const Eigen::Index d = field.dimension();
  const long blocks = (samples + detail::kOracleBlock - 1) / detail::kOracleBlock;
  std::vector<detail::MomentBlock> partial(static_cast<std::size_t>(blocks), detail::MomentBlock(d));

  auto run_block = [&](long blk) {
    RandomStream rng(derive_seed(seed, static_cast<std::uint64_t>(blk)));
    detail::MomentBlock& acc = partial[static_cast<std::size_t>(blk)];
    const long begin = blk * detail::kOracleBlock;
    const long end = std::min(samples, begin + detail::kOracleBlock);
    Matrix g(d, d);
    for (long s = begin; s < end; ++s) {
      const UnitVector z = sample_uniform(d, rng);
      const Vector b = field.gradient(z).coords();
      g.noalias() = z.coords() * b.transpose();
      g += g.transpose().eval();
      acc.b_sum += b;
      acc.b_sq += b.cwiseProduct(b);
      acc.g_sum += g;
      acc.g_sq += g.cwiseProduct(g);
    }
  };

  workers = std::max(1u, workers);
  if (workers == 1) {
    for (long blk = 0; blk < blocks; ++blk) run_block(blk);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (long blk = w; blk < blocks; blk += workers) run_block(blk);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (std::size_t stride = 1; stride < partial.size(); stride *= 2) {
    for (std::size_t i = 0; i + stride < partial.size(); i += 2 * stride) partial[i].merge(partial[i + stride]);
  }

  const auto n = static_cast<double>(samples);
  const detail::MomentBlock& total = partial.front();
  StationaryAverages out;
  out.mc_samples = samples;
  out.b_bar = total.b_sum / n;
  out.g_bar = total.g_sum / n;
  const Vector b_var = (total.b_sq / n - out.b_bar.cwiseProduct(out.b_bar)).cwiseMax(0.0) * (n / (n - 1.0));
  const Matrix g_var = (total.g_sq / n - out.g_bar.cwiseProduct(out.g_bar)).cwiseMax(0.0) * (n / (n - 1.0));
  out.b_se = (b_var / n).cwiseSqrt().cwiseMax(std::numeric_limits<double>::min());
  out.g_se = (g_var / n).cwiseSqrt().cwiseMax(std::numeric_limits<double>::min());
  return out;
}

/// c = k (m_{k-1} - m_{k+1}) with m_j = E[z_1^j] on S^{d-1}; noiseless
/// odd-order tensor PCA has E_z[b(z)] = c theta*.
inline double closed_form_tpca_scale(int k, long d) {
  if (k < 1 || k % 2 == 0) throw ParityError("closed_form_tpca_scale needs an odd order, got " + std::to_string(k));
  return static_cast<double>(k) * (spherical_even_moment(d, k - 1) - spherical_even_moment(d, k + 1));
}

/// Population drift of the single-index model from Hermite coefficients:
/// sum_{k>=1} k c_k^2 (theta . theta*)^{k-1} P_theta^perp theta*.
inline TangentVector population_sim_gradient(const HermiteExpansion& expansion, const UnitVector& theta,
                                             const UnitVector& theta_star) {
  if (theta.dim() != theta_star.dim()) throw ShapeError("population_sim_gradient: dimension mismatch");
  const double m = theta.dot(theta_star);
  double scale = 0.0;
  double m_pow = 1.0;  // m^{k-1}
  for (int k = 1; k <= expansion.truncation_order; ++k) {
    const double c = expansion[k];
    scale += static_cast<double>(k) * c * c * m_pow;
    m_pow *= m;
  }
  return project_tangent(theta, scale * theta_star.coords());
}

}  // namespace sphlang
