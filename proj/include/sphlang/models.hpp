#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "sphlang/errors.hpp"
#include "sphlang/hermite.hpp"
#include "sphlang/random.hpp"
#include "sphlang/sphere.hpp"

namespace sphlang {

/// Anything that supplies the drift b(theta) = -grad_theta L(theta).
template <class F>
concept DriftField = requires(const F& f, const UnitVector& theta) {
  { f.gradient(theta) } -> std::same_as<TangentVector>;
  { f.dimension() } -> std::convertible_to<Eigen::Index>;
};

// ---------------------------------------------------------------------------
// Single-index model: y_i = sigma(theta* . x_i) + noise_std * xi_i.

class SingleIndexDataset {
 public:
  using RowMatrix = Matrix;

  SingleIndexDataset(RowMatrix inputs, Vector labels, LinkFunction link, UnitVector theta_star,
                     double noise_std, std::uint64_t seed)
      : inputs_(std::move(inputs)),
        labels_(std::move(labels)),
        link_(std::move(link)),
        theta_star_(std::move(theta_star)),
        noise_std_(noise_std),
        seed_(seed) {
    if (inputs_.rows() < 1) throw ShapeError("single-index dataset needs n >= 1");
    if (inputs_.cols() < 2) throw DimensionError("single-index dataset needs d >= 2");
    if (labels_.size() != inputs_.rows()) throw ShapeError("labels/inputs row mismatch");
    if (theta_star_.dim() != inputs_.cols()) throw ShapeError("theta_star dimension mismatch");
  }

  const RowMatrix& inputs() const noexcept { return inputs_; }
  const Vector& labels() const noexcept { return labels_; }
  const LinkFunction& link() const noexcept { return link_; }
  const UnitVector& theta_star() const noexcept { return theta_star_; }
  double noise_std() const noexcept { return noise_std_; }
  std::uint64_t seed() const noexcept { return seed_; }
  Eigen::Index size() const noexcept { return inputs_.rows(); }
  Eigen::Index dimension() const noexcept { return inputs_.cols(); }

  /// (1/n) sum_i y_i sigma'(theta . x_i) P_theta^perp x_i.
  TangentVector gradient(const UnitVector& theta) const {
    check_dim(theta);
    // Row blocks keep X_blk in cache between u = X_blk theta and g += X_blk^T w.
    constexpr Eigen::Index kBlock = 512;
    Vector g = Vector::Zero(dimension());
    Vector u(kBlock);
    Vector w(kBlock);
    for (Eigen::Index begin = 0; begin < size(); begin += kBlock) {
      const Eigen::Index len = std::min(kBlock, size() - begin);
      const auto block = inputs_.middleRows(begin, len);
      u.head(len).noalias() = block * theta.coords();
      link_.derivative(u.head(len), w.head(len));
      w.head(len).array() *= labels_.segment(begin, len).array();
      g.noalias() += block.transpose() * w.head(len);
    }
    g /= static_cast<double>(size());
    return project_tangent(theta, g);
  }

  /// (1/n) sum_i (1 - sigma(theta . x_i) y_i).
  double loss(const UnitVector& theta) const { return loss_ambient(theta.coords()); }

  /// Correlation loss at an arbitrary ambient point (used for finite differences).
  double loss_ambient(const Vector& theta) const {
    if (theta.size() != dimension()) throw ShapeError("loss: dimension mismatch");
    const Vector u = inputs_ * theta;
    double acc = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) acc += 1.0 - link_.value(u[i]) * labels_[i];
    return acc / static_cast<double>(size());
  }

 private:
  void check_dim(const UnitVector& theta) const {
    if (theta.dim() != dimension()) throw ShapeError("gradient: dimension mismatch");
  }

  Matrix inputs_;  // n x d, row i is x_i
  Vector labels_;
  LinkFunction link_;
  UnitVector theta_star_;
  double noise_std_;
  std::uint64_t seed_;
};

/// Draws x_i ~ N(0, I_d) and xi_i ~ N(0, 1) from streams derived from `seed`.
inline SingleIndexDataset make_single_index(Eigen::Index n, Eigen::Index d, const LinkFunction& link,
                                            const UnitVector& theta_star, double noise_std,
                                            std::uint64_t seed) {
  if (n < 1) throw ShapeError("make_single_index: n must be >= 1");
  if (d < 2) throw DimensionError("make_single_index: d must be >= 2");
  if (theta_star.dim() != d) throw ShapeError("make_single_index: theta_star dimension mismatch");
  if (noise_std < 0.0) throw ShapeError("make_single_index: noise_std must be >= 0");
  RandomStream input_rng(derive_seed(seed, 0));
  RandomStream noise_rng(derive_seed(seed, 1));
  SingleIndexDataset::RowMatrix inputs(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) inputs(i, j) = input_rng.normal();
  }
  const Vector proj = inputs * theta_star.coords();
  Vector labels(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double xi = noise_rng.normal();
    labels[i] = link.value(proj[i]) + noise_std * xi;
  }
  return SingleIndexDataset(std::move(inputs), std::move(labels), link, theta_star, noise_std, seed);
}

/// Per-sample negative spherical gradient y sigma'(theta . x) P_theta^perp x.
inline TangentVector sample_gradient(const LinkFunction& link, const UnitVector& theta, const Vector& x,
                                     double y) {
  return project_tangent(theta, (y * link.derivative(theta.coords().dot(x))) * x);
}

/// Fresh i.i.d. samples from the single-index model, with a hard budget.
class SampleStream {
 public:
  SampleStream(LinkFunction link, UnitVector theta_star, double noise_std, std::uint64_t seed,
               std::size_t budget)
      : link_(std::move(link)), theta_star_(std::move(theta_star)), noise_std_(noise_std), rng_(seed),
        budget_(budget) {}

  struct Sample {
    Vector x;
    double y;
  };

  Sample next() {
    if (used_ >= budget_) {
      throw InsufficientSamplesError("sample stream exhausted after " + std::to_string(budget_) + " samples");
    }
    ++used_;
    Vector x = rng_.normal_vector(theta_star_.dim());
    const double y = link_.value(theta_star_.coords().dot(x)) + noise_std_ * rng_.normal();
    return {std::move(x), y};
  }

  const LinkFunction& link() const noexcept { return link_; }
  const UnitVector& theta_star() const noexcept { return theta_star_; }
  std::size_t used() const noexcept { return used_; }
  std::size_t remaining() const noexcept { return budget_ - used_; }

 private:
  LinkFunction link_;
  UnitVector theta_star_;
  double noise_std_;
  RandomStream rng_;
  std::size_t budget_;
  std::size_t used_ = 0;
};

// ---------------------------------------------------------------------------
// Tensor PCA: T = theta*^{(x)k} + noise_scale * Z, Z_{i1..ik} i.i.d. N(0,1).

enum class TensorStorage { materialized, implicit };

inline constexpr double kMaxMaterializedEntries = 1e7;

class TensorPcaInstance {
 public:
  /// Materializes Z when d^k <= 1e7 unless `storage` forces implicit.
  TensorPcaInstance(int order, UnitVector theta_star, double noise_scale, std::uint64_t noise_seed,
                    TensorStorage storage = TensorStorage::materialized)
      : order_(order), theta_star_(std::move(theta_star)), noise_scale_(noise_scale), noise_seed_(noise_seed),
        generator_(noise_seed) {
    if (order_ < 2) throw ShapeError("tensor PCA order must be >= 2");
    const double entries = std::pow(static_cast<double>(theta_star_.dim()), order_);
    if (entries > static_cast<double>(std::numeric_limits<std::uint64_t>::max() / 2)) {
      throw ShapeError("tensor PCA instance too large to index");
    }
    entries_ = static_cast<std::uint64_t>(std::llround(entries));
    storage_ = (storage == TensorStorage::materialized && entries <= kMaxMaterializedEntries)
                   ? TensorStorage::materialized
                   : TensorStorage::implicit;
    if (storage_ == TensorStorage::materialized && noise_scale_ != 0.0) {
      noise_.resize(static_cast<std::size_t>(entries_));
      for (std::uint64_t i = 0; i < entries_; ++i) noise_[i] = generator_.normal(i);
    }
  }

  int order() const noexcept { return order_; }
  Eigen::Index dimension() const noexcept { return theta_star_.dim(); }
  const UnitVector& theta_star() const noexcept { return theta_star_; }
  double noise_scale() const noexcept { return noise_scale_; }
  std::uint64_t noise_seed() const noexcept { return noise_seed_; }
  TensorStorage storage() const noexcept { return storage_; }

  /// Z entry at row-major flat index i1 d^{k-1} + ... + ik.
  double noise_entry(std::uint64_t flat) const {
    return storage_ == TensorStorage::materialized && !noise_.empty() ? noise_[flat] : generator_.normal(flat);
  }

  /// <T, theta^{(x)k}> at an ambient point.
  double inner(const Vector& theta) const { return contract(theta, nullptr); }

  /// Negative spherical gradient of L(theta) = -<T, theta^{(x)k}>:
  /// P^perp (k m^{k-1} theta* + noise_scale * sum_s Z[theta, .., (slot s), .., theta]).
  TangentVector gradient(const UnitVector& theta) const {
    if (theta.dim() != dimension()) throw ShapeError("tpca gradient: dimension mismatch");
    Vector ambient(dimension());
    contract(theta.coords(), &ambient);
    return project_tangent(theta, ambient);
  }

  double loss(const UnitVector& theta) const { return -inner(theta.coords()); }
  double loss_ambient(const Vector& theta) const { return -inner(theta); }

 private:
  // Returns <T, theta^k>; if `grad` is non-null, writes the ambient gradient of
  // <T, theta^k> with respect to theta. Noise is streamed one last-slot fiber
  // at a time so both storage modes run the identical arithmetic.
  double contract(const Vector& theta, Vector* grad) const {
    const Eigen::Index d = dimension();
    if (theta.size() != d) throw ShapeError("tpca: dimension mismatch");
    const double m = theta.dot(theta_star_.coords());
    const double m_pow = std::pow(m, order_ - 1);
    double value = m_pow * m;
    if (grad) *grad = static_cast<double>(order_) * m_pow * theta_star_.coords();
    if (noise_scale_ == 0.0) return value;

    const int prefix_len = order_ - 1;
    std::uint64_t prefixes = 1;
    for (int s = 0; s < prefix_len; ++s) prefixes *= static_cast<std::uint64_t>(d);
    std::vector<Eigen::Index> digit(static_cast<std::size_t>(prefix_len), 0);
    std::vector<double> left(static_cast<std::size_t>(prefix_len) + 1);
    std::vector<double> right(static_cast<std::size_t>(prefix_len) + 1);
    Vector fiber(d);
    Vector noise_grad = Vector::Zero(d);
    double noise_value = 0.0;

    for (std::uint64_t p = 0; p < prefixes; ++p) {
      // left[s] = prod_{t<s} theta_{i_t}, right[s] = prod_{t>=s} theta_{i_t}
      left[0] = 1.0;
      for (int s = 0; s < prefix_len; ++s) left[s + 1] = left[s] * theta[digit[s]];
      right[prefix_len] = 1.0;
      for (int s = prefix_len; s-- > 0;) right[s] = right[s + 1] * theta[digit[s]];
      const double prefix_prod = left[prefix_len];

      const std::uint64_t base = p * static_cast<std::uint64_t>(d);
      if (storage_ == TensorStorage::materialized) {
        fiber = Eigen::Map<const Vector>(noise_.data() + base, d);
      } else {
        for (Eigen::Index j = 0; j < d; ++j) fiber[j] = generator_.normal(base + static_cast<std::uint64_t>(j));
      }
      const double inner_sum = fiber.dot(theta);
      noise_value += inner_sum * prefix_prod;
      if (grad) {
        noise_grad += prefix_prod * fiber;
        for (int s = 0; s < prefix_len; ++s) noise_grad[digit[s]] += inner_sum * left[s] * right[s + 1];
      }
      for (int s = prefix_len; s-- > 0;) {
        if (++digit[s] < d) break;
        digit[s] = 0;
      }
    }
    value += noise_scale_ * noise_value;
    if (grad) *grad += noise_scale_ * noise_grad;
    return value;
  }

  int order_;
  UnitVector theta_star_;
  double noise_scale_;
  std::uint64_t noise_seed_;
  Philox4x32 generator_;
  std::uint64_t entries_ = 0;
  TensorStorage storage_ = TensorStorage::implicit;
  std::vector<double> noise_;
};

// ---------------------------------------------------------------------------

/// Either problem family behind one drift interface.
class ProblemInstance {
 public:
  ProblemInstance(SingleIndexDataset dataset) : impl_(std::move(dataset)) {}  // NOLINT
  ProblemInstance(TensorPcaInstance tensor) : impl_(std::move(tensor)) {}     // NOLINT

  TangentVector gradient(const UnitVector& theta) const {
    return std::visit([&](const auto& p) { return p.gradient(theta); }, impl_);
  }
  double loss(const UnitVector& theta) const {
    return std::visit([&](const auto& p) { return p.loss(theta); }, impl_);
  }
  Eigen::Index dimension() const {
    return std::visit([](const auto& p) { return p.dimension(); }, impl_);
  }
  const UnitVector& theta_star() const {
    return std::visit([](const auto& p) -> const UnitVector& { return p.theta_star(); }, impl_);
  }

  bool is_single_index() const noexcept { return std::holds_alternative<SingleIndexDataset>(impl_); }
  const SingleIndexDataset& single_index() const { return std::get<SingleIndexDataset>(impl_); }
  const TensorPcaInstance& tensor_pca() const { return std::get<TensorPcaInstance>(impl_); }

 private:
  std::variant<SingleIndexDataset, TensorPcaInstance> impl_;
};

/// The zero field; turns the Langevin SDE into spherical Brownian motion.
class ZeroDrift {
 public:
  explicit ZeroDrift(Eigen::Index d) : d_(d) {}
  TangentVector gradient(const UnitVector& theta) const { return project_tangent(theta, Vector::Zero(theta.dim())); }
  Eigen::Index dimension() const noexcept { return d_; }

 private:
  Eigen::Index d_;
};

// ---------------------------------------------------------------------------
// Dataset fixtures: <stem>.csv (x_1..x_d, y) plus <stem>.json sidecar.

inline nlohmann::json link_to_json(const LinkFunction& link) {
  nlohmann::json j;
  j["kind"] = link.name();
  j["scale"] = link.scale();
  if (link.kind() == LinkFunction::Kind::polynomial) j["coefficients"] = link.polynomial_coefficients();
  return j;
}

inline LinkFunction link_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "polynomial") {
    auto coeffs = j.at("coefficients").get<std::vector<double>>();
    const double scale = j.value("scale", 1.0);
    for (double& c : coeffs) c *= scale;
    return LinkFunction::polynomial(std::move(coeffs), LinkFunction::Normalization::raw);
  }
  return LinkFunction::from_name(kind);
}

inline void export_dataset(const SingleIndexDataset& data, const std::filesystem::path& stem) {
  std::filesystem::path csv_path = stem;
  csv_path += ".csv";
  std::filesystem::path json_path = stem;
  json_path += ".json";
  std::ofstream csv(csv_path);
  if (!csv) throw IoError("cannot write " + csv_path.string());
  csv.precision(17);
  const Eigen::Index d = data.dimension();
  for (Eigen::Index j = 0; j < d; ++j) csv << "x" << (j + 1) << ",";
  csv << "y\n";
  for (Eigen::Index i = 0; i < data.size(); ++i) {
    for (Eigen::Index j = 0; j < d; ++j) csv << data.inputs()(i, j) << ",";
    csv << data.labels()[i] << "\n";
  }
  nlohmann::json meta;
  meta["link"] = link_to_json(data.link());
  meta["seed"] = data.seed();
  meta["noise_std"] = data.noise_std();
  meta["n"] = data.size();
  meta["d"] = d;
  meta["theta_star"] = std::vector<double>(data.theta_star().coords().begin(), data.theta_star().coords().end());
  std::ofstream js(json_path);
  if (!js) throw IoError("cannot write " + json_path.string());
  js << meta.dump(2) << "\n";
}

inline SingleIndexDataset import_dataset(const std::filesystem::path& stem) {
  std::filesystem::path csv_path = stem;
  csv_path += ".csv";
  std::filesystem::path json_path = stem;
  json_path += ".json";
  std::ifstream js(json_path);
  if (!js) throw IoError("cannot read " + json_path.string());
  const nlohmann::json meta = nlohmann::json::parse(js);
  const auto d = meta.at("d").get<Eigen::Index>();
  const auto n = meta.at("n").get<Eigen::Index>();
  const auto star = meta.at("theta_star").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(star.size()) != d) throw ShapeError("sidecar theta_star has wrong length");

  std::ifstream csv(csv_path);
  if (!csv) throw IoError("cannot read " + csv_path.string());
  std::string line;
  std::getline(csv, line);  // header
  SingleIndexDataset::RowMatrix inputs(n, d);
  Vector labels(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::getline(csv, line)) throw ShapeError("dataset CSV has fewer rows than the sidecar says");
    std::stringstream row(line);
    std::string cell;
    for (Eigen::Index j = 0; j <= d; ++j) {
      if (!std::getline(row, cell, ',')) throw ShapeError("dataset CSV row " + std::to_string(i) + " is short");
      const double v = std::stod(cell);
      if (j < d) inputs(i, j) = v; else labels[i] = v;
    }
  }
  return SingleIndexDataset(std::move(inputs), std::move(labels), link_from_json(meta.at("link")),
                            UnitVector(Eigen::Map<const Vector>(star.data(), d)),
                            meta.at("noise_std").get<double>(), meta.at("seed").get<std::uint64_t>());
}

}  // namespace sphlang
