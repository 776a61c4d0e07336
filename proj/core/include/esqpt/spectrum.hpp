#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "esqpt/band_operator.hpp"
#include "esqpt/model.hpp"

namespace esqpt {

struct Spectrum {
  std::optional<ModelParams> params;
  HilbertSpace space;
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXd eigenvectors;  // column j ↔ eigenvalues[j]; may be empty
  std::vector<int> parities;     // +1 / −1
  std::vector<bool> near_degenerate;
  double max_residual = 0.0;     // max_j ‖Hv_j − e_j v_j‖ / ‖H‖_max

  std::size_t size() const { return static_cast<std::size_t>(eigenvalues.size()); }
  bool has_vectors() const { return eigenvectors.cols() == eigenvalues.size() && eigenvectors.size() > 0; }
};

/// Which eigenpairs to compute.
struct Selection {
  enum class Kind { All, Lowest, Window };
  Kind kind = Kind::All;
  int count = 0;                       // Lowest
  double lower = 0.0, upper = 0.0;     // Window: e ∈ (lower, upper]

  static Selection all() { return {}; }
  static Selection lowest(int k) { return {Kind::Lowest, k, 0.0, 0.0}; }
  static Selection window(double lo, double hi) { return {Kind::Window, 0, lo, hi}; }
};

struct DiagonalizeOptions {
  bool vectors = true;
  double residual_tol = 1e-9;          // relative to ‖H‖_max
  double parity_tol = 1e-8;
  double degeneracy_rel = 1e-10;       // × spectral span
};

/// Dense self-adjoint eigendecomposition (Eigen) of any band operator.
/// `lowest` keeps only the first k pairs. Parities come from ⟨v|P̂|v⟩; near-
/// degenerate clusters are rotated to diagonalize P̂ inside the cluster.
Spectrum diagonalize(const SymmetricBand& h, const HilbertSpace& space,
                     std::optional<int> lowest = std::nullopt,
                     const DiagonalizeOptions& opts = {});

/// Parity-sector tridiagonal route (LAPACK dstevr) for parity-conserving
/// band operators. Supports selected eigenpairs at large dimension.
Spectrum diagonalize_sectors(const SymmetricBand& h, const HilbertSpace& space,
                             const Selection& sel = Selection::all(),
                             const DiagonalizeOptions& opts = {});

/// Builds ĥ for `params` and diagonalizes it sector-wise.
Spectrum diagonalize_erm(const ModelParams& params, const HilbertSpace& space,
                         const Selection& sel = Selection::all(),
                         const DiagonalizeOptions& opts = {});

struct LevelRow {
  double lambda;
  int index;
  double energy;
  int parity;
};

/// Lowest k levels at each λ on the grid. Grid points are independent.
std::vector<LevelRow> level_dynamics(double system_size, double regime,
                                     const std::vector<double>& lambda_grid, int levels,
                                     const HilbertSpace& space, unsigned workers = 1);

/// CSV header "lambda,index,energy,parity".
void write_levels_csv(std::ostream& os, const std::vector<LevelRow>& rows);
void write_spectrum_csv(std::ostream& os, const Spectrum& spec);
nlohmann::json to_json(const Spectrum& spec, bool include_vectors = false);

}  // namespace esqpt
