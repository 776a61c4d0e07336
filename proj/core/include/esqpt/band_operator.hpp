#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace esqpt {

using cplx = std::complex<double>;

/// Real symmetric band matrix stored by upper diagonals: diagonal k holds
/// A(i, i + k) for i in [0, dim − k).
///
/// All model operators (Hamiltonian terms, parity, n̂, Ĵ_z, projectors) are
/// real and symmetric in the Fock ⊗ qubit basis, so this is the single
/// operator representation used by the propagators.
class SymmetricBand {
 public:
  SymmetricBand() = default;
  SymmetricBand(std::size_t dim, int bandwidth);

  static SymmetricBand diagonal(const Eigen::VectorXd& values);

  std::size_t dimension() const { return dim_; }
  int bandwidth() const { return static_cast<int>(diags_.size()) - 1; }

  /// Element access for i ≤ j with j − i ≤ bandwidth.
  double& upper(std::size_t i, int offset) { return diags_[offset][i]; }
  double upper(std::size_t i, int offset) const { return diags_[offset][i]; }

  double operator()(std::size_t i, std::size_t j) const;

  /// y ← beta·y + alpha·A·x.
  void apply(std::span<const cplx> x, std::span<cplx> y, double alpha = 1.0,
             double beta = 0.0) const;
  Eigen::VectorXcd apply(const Eigen::VectorXcd& x) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& x) const;

  /// ⟨x|A|x⟩ (real because A is real symmetric).
  double expectation(const Eigen::VectorXcd& x) const;

  Eigen::VectorXd diagonal_values() const;
  Eigen::MatrixXd to_dense() const;
  double max_abs() const;
  bool is_diagonal() const;

  SymmetricBand& operator+=(const SymmetricBand& other);
  SymmetricBand& operator*=(double s);
  friend SymmetricBand operator+(SymmetricBand a, const SymmetricBand& b) { return a += b; }
  friend SymmetricBand operator*(double s, SymmetricBand a) { return a *= s; }

 private:
  std::size_t dim_ = 0;
  std::vector<std::vector<double>> diags_;
};

}  // namespace esqpt
