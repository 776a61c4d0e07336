#include "esqpt/band_operator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "esqpt/errors.hpp"

namespace esqpt {

SymmetricBand::SymmetricBand(std::size_t dim, int bandwidth) : dim_(dim) {
  if (bandwidth < 0) throw DimensionError("negative bandwidth");
  diags_.resize(static_cast<std::size_t>(bandwidth) + 1);
  for (std::size_t k = 0; k < diags_.size(); ++k) {
    diags_[k].assign(dim > k ? dim - k : 0, 0.0);
  }
}

SymmetricBand SymmetricBand::diagonal(const Eigen::VectorXd& values) {
  SymmetricBand out(static_cast<std::size_t>(values.size()), 0);
  for (Eigen::Index i = 0; i < values.size(); ++i) out.diags_[0][i] = values[i];
  return out;
}

double SymmetricBand::operator()(std::size_t i, std::size_t j) const {
  const std::size_t lo = std::min(i, j);
  const std::size_t off = std::max(i, j) - lo;
  if (off >= diags_.size()) return 0.0;
  return diags_[off][lo];
}

void SymmetricBand::apply(std::span<const cplx> x, std::span<cplx> y, double alpha,
                          double beta) const {
  if (x.size() != dim_ || y.size() != dim_) throw DimensionError("band apply: size mismatch");
  const std::size_t n = dim_;
  if (beta == 0.0) {
    const auto& d0 = diags_[0];
    for (std::size_t i = 0; i < n; ++i) y[i] = alpha * d0[i] * x[i];
  } else {
    const auto& d0 = diags_[0];
    for (std::size_t i = 0; i < n; ++i) y[i] = beta * y[i] + alpha * d0[i] * x[i];
  }
  for (std::size_t k = 1; k < diags_.size(); ++k) {
    const auto& dk = diags_[k];
    const std::size_t m = dk.size();
    for (std::size_t i = 0; i < m; ++i) {
      const double a = alpha * dk[i];
      y[i] += a * x[i + k];
      y[i + k] += a * x[i];
    }
  }
}

Eigen::VectorXcd SymmetricBand::apply(const Eigen::VectorXcd& x) const {
  Eigen::VectorXcd y(x.size());
  apply(std::span<const cplx>(x.data(), static_cast<std::size_t>(x.size())),
        std::span<cplx>(y.data(), static_cast<std::size_t>(y.size())));
  return y;
}

Eigen::VectorXd SymmetricBand::apply(const Eigen::VectorXd& x) const {
  if (static_cast<std::size_t>(x.size()) != dim_) throw DimensionError("band apply: size mismatch");
  Eigen::VectorXd y(x.size());
  for (std::size_t i = 0; i < dim_; ++i) y[i] = diags_[0][i] * x[i];
  for (std::size_t k = 1; k < diags_.size(); ++k) {
    const auto& dk = diags_[k];
    for (std::size_t i = 0; i < dk.size(); ++i) {
      y[i] += dk[i] * x[i + k];
      y[i + k] += dk[i] * x[i];
    }
  }
  return y;
}

double SymmetricBand::expectation(const Eigen::VectorXcd& x) const {
  if (static_cast<std::size_t>(x.size()) != dim_) throw DimensionError("expectation: size mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) acc += diags_[0][i] * std::norm(x[i]);
  for (std::size_t k = 1; k < diags_.size(); ++k) {
    const auto& dk = diags_[k];
    for (std::size_t i = 0; i < dk.size(); ++i) {
      if (dk[i] == 0.0) continue;
      acc += 2.0 * dk[i] * std::real(std::conj(x[i]) * x[i + k]);
    }
  }
  return acc;
}

Eigen::VectorXd SymmetricBand::diagonal_values() const {
  return Eigen::Map<const Eigen::VectorXd>(diags_[0].data(), static_cast<Eigen::Index>(dim_));
}

Eigen::MatrixXd SymmetricBand::to_dense() const {
  const auto n = static_cast<Eigen::Index>(dim_);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t k = 0; k < diags_.size(); ++k) {
    for (std::size_t i = 0; i < diags_[k].size(); ++i) {
      m(i, i + k) = diags_[k][i];
      m(i + k, i) = diags_[k][i];
    }
  }
  return m;
}

double SymmetricBand::max_abs() const {
  double m = 0.0;
  for (const auto& d : diags_)
    for (double v : d) m = std::max(m, std::abs(v));
  return m;
}

bool SymmetricBand::is_diagonal() const {
  for (std::size_t k = 1; k < diags_.size(); ++k)
    for (double v : diags_[k])
      if (v != 0.0) return false;
  return true;
}

SymmetricBand& SymmetricBand::operator+=(const SymmetricBand& other) {
  if (other.dim_ != dim_) throw DimensionError("band sum: size mismatch");
  if (other.diags_.size() > diags_.size()) {
    const std::size_t old = diags_.size();
    diags_.resize(other.diags_.size());
    for (std::size_t k = old; k < diags_.size(); ++k) diags_[k].assign(dim_ > k ? dim_ - k : 0, 0.0);
  }
  for (std::size_t k = 0; k < other.diags_.size(); ++k)
    for (std::size_t i = 0; i < other.diags_[k].size(); ++i) diags_[k][i] += other.diags_[k][i];
  return *this;
}

SymmetricBand& SymmetricBand::operator*=(double s) {
  for (auto& d : diags_)
    for (double& v : d) v *= s;
  return *this;
}

}  // namespace esqpt
