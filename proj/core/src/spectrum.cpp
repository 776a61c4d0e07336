#include "esqpt/spectrum.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>

#include <lapacke.h>

#include "esqpt/errors.hpp"
#include "esqpt/hamiltonian.hpp"
#include "esqpt/parallel.hpp"

namespace esqpt {

namespace {

int basis_parity(std::size_t i) { return parity_of(HilbertSpace::fock_of(i), HilbertSpace::qubit_of(i)); }

double residual_of(const SymmetricBand& h, const Eigen::VectorXd& v, double e) {
  return (h.apply(v) - e * v).norm();
}

void assign_parities_dense(Spectrum& s, const DiagonalizeOptions& opts) {
  const auto m = s.eigenvalues.size();
  s.parities.assign(m, 1);
  s.near_degenerate.assign(m, false);
  if (m == 0) return;
  const Eigen::VectorXd pdiag = build_parity(s.space).diagonal_values();
  const double span = std::max(s.eigenvalues[m - 1] - s.eigenvalues[0], 1.0);
  const double thresh = opts.degeneracy_rel * span;

  Eigen::Index start = 0;
  while (start < m) {
    Eigen::Index stop = start + 1;
    while (stop < m && s.eigenvalues[stop] - s.eigenvalues[stop - 1] < thresh) ++stop;
    const Eigen::Index len = stop - start;
    if (len > 1) {
      auto block = s.eigenvectors.middleCols(start, len);
      Eigen::MatrixXd pm = block.transpose() * pdiag.asDiagonal() * block;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(pm);
      Eigen::MatrixXd rotated = block * es.eigenvectors();
      block = rotated;
      for (Eigen::Index j = start; j < stop; ++j) s.near_degenerate[j] = true;
    }
    start = stop;
  }
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto v = s.eigenvectors.col(j);
    const double pv = v.cwiseAbs2().dot(pdiag);
    s.parities[j] = pv >= 0.0 ? 1 : -1;
    if (std::abs(pv) < 1.0 - opts.parity_tol) s.near_degenerate[j] = true;
  }
}

struct Sector {
  std::vector<std::size_t> index;  // basis index of the state with Fock number n
  std::vector<double> diag;
  std::vector<double> off;
};

Sector extract_sector(const SymmetricBand& h, const HilbertSpace& space, int parity) {
  Sector sec;
  const int nmax = space.fock_cutoff();
  for (int n = 0; n <= nmax; ++n) {
    const int s = (parity == 1) ? (n % 2) : ((n + 1) % 2);
    sec.index.push_back(HilbertSpace::index(n, s));
  }
  for (std::size_t k = 0; k < sec.index.size(); ++k) {
    sec.diag.push_back(h(sec.index[k], sec.index[k]));
    if (k + 1 < sec.index.size()) sec.off.push_back(h(sec.index[k], sec.index[k + 1]));
  }
  sec.off.push_back(0.0);  // dstevr workspace expects length n
  return sec;
}

void require_parity_conserving(const SymmetricBand& h) {
  if (h.bandwidth() > 3) throw DomainError("sector diagonalization needs bandwidth ≤ 3");
  const std::size_t dim = h.dimension();
  for (int k = 1; k <= h.bandwidth(); ++k) {
    for (std::size_t i = 0; i + k < dim; ++i) {
      if (h.upper(i, k) != 0.0 && basis_parity(i) != basis_parity(i + k)) {
        throw DomainError("operator does not conserve parity");
      }
    }
  }
}

struct SectorResult {
  std::vector<double> w;
  Eigen::MatrixXd z;  // sector-local eigenvectors
};

SectorResult solve_sector(Sector sec, const Selection& sel, bool vectors) {
  const lapack_int n = static_cast<lapack_int>(sec.diag.size());
  char range = 'A';
  lapack_int il = 1, iu = n;
  double vl = 0.0, vu = 0.0;
  lapack_int cols = n;
  if (sel.kind == Selection::Kind::Lowest) {
    range = 'I';
    iu = std::min<lapack_int>(n, sel.count);
    cols = iu;
    if (iu < 1) return {};
  } else if (sel.kind == Selection::Kind::Window) {
    range = 'V';
    vl = sel.lower;
    vu = sel.upper;
    // Count first so Z can be sized exactly.
    std::vector<double> d = sec.diag, e = sec.off, w(n);
    lapack_int m = 0;
    std::vector<lapack_int> supp(2 * static_cast<std::size_t>(n));
    double dummy = 0.0;
    const lapack_int info = LAPACKE_dstevr(LAPACK_COL_MAJOR, 'N', range, n, d.data(), e.data(), vl,
                                           vu, il, iu, 0.0, &m, w.data(), &dummy, 1, supp.data());
    if (info != 0) throw NumericError("dstevr (count) failed, info = " + std::to_string(info));
    cols = m;
    if (m == 0) return {};
  }

  SectorResult out;
  std::vector<double> w(n);
  std::vector<lapack_int> supp(2 * static_cast<std::size_t>(std::max<lapack_int>(cols, 1)));
  lapack_int m = 0;
  if (vectors) out.z.resize(n, cols);
  double dummy = 0.0;
  const lapack_int info =
      LAPACKE_dstevr(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', range, n, sec.diag.data(),
                     sec.off.data(), vl, vu, il, iu, 0.0, &m, w.data(),
                     vectors ? out.z.data() : &dummy, vectors ? n : 1, supp.data());
  if (info != 0) throw NumericError("dstevr failed, info = " + std::to_string(info));
  out.w.assign(w.begin(), w.begin() + m);
  if (vectors) out.z.conservativeResize(n, m);
  return out;
}

}  // namespace

Spectrum diagonalize(const SymmetricBand& h, const HilbertSpace& space, std::optional<int> lowest,
                     const DiagonalizeOptions& opts) {
  if (h.dimension() != space.dimension()) throw DimensionError("operator/space dimension mismatch");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.to_dense());
  if (es.info() != Eigen::Success) throw NumericError("dense eigensolver did not converge");

  Spectrum s;
  s.space = space;
  const Eigen::Index m =
      lowest ? std::min<Eigen::Index>(*lowest, es.eigenvalues().size()) : es.eigenvalues().size();
  s.eigenvalues = es.eigenvalues().head(m);
  s.eigenvectors = es.eigenvectors().leftCols(m);
  assign_parities_dense(s, opts);

  const double scale = std::max(h.max_abs(), 1e-300);
  for (Eigen::Index j = 0; j < m; ++j) {
    s.max_residual =
        std::max(s.max_residual, residual_of(h, s.eigenvectors.col(j), s.eigenvalues[j]) / scale);
  }
  if (s.max_residual > opts.residual_tol) {
    std::ostringstream msg;
    msg << "eigen residual " << s.max_residual << " exceeds " << opts.residual_tol;
    throw NumericError(msg.str());
  }
  if (!opts.vectors) s.eigenvectors.resize(0, 0);
  return s;
}

Spectrum diagonalize_sectors(const SymmetricBand& h, const HilbertSpace& space, const Selection& sel,
                             const DiagonalizeOptions& opts) {
  if (h.dimension() != space.dimension()) throw DimensionError("operator/space dimension mismatch");
  if (sel.kind == Selection::Kind::Lowest && sel.count < 1) throw DomainError("lowest(k) needs k ≥ 1");
  if (sel.kind == Selection::Kind::Window && !(sel.upper > sel.lower)) {
    throw DomainError("empty energy window");
  }
  require_parity_conserving(h);

  struct Entry {
    double e;
    int parity;
    int sector;
    Eigen::Index col;
  };
  std::vector<Entry> entries;
  std::array<Sector, 2> sectors{extract_sector(h, space, 1), extract_sector(h, space, -1)};
  std::array<SectorResult, 2> results;
  for (int k = 0; k < 2; ++k) {
    results[k] = solve_sector(sectors[k], sel, opts.vectors);
    for (std::size_t j = 0; j < results[k].w.size(); ++j) {
      entries.push_back({results[k].w[j], k == 0 ? 1 : -1, k, static_cast<Eigen::Index>(j)});
    }
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.e < b.e; });
  if (sel.kind == Selection::Kind::Lowest && entries.size() > static_cast<std::size_t>(sel.count)) {
    entries.resize(sel.count);
  }

  Spectrum s;
  s.space = space;
  const auto m = static_cast<Eigen::Index>(entries.size());
  s.eigenvalues.resize(m);
  s.parities.resize(m);
  s.near_degenerate.assign(m, false);
  if (opts.vectors) s.eigenvectors = Eigen::MatrixXd::Zero(space.dimension(), m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const Entry& en = entries[j];
    s.eigenvalues[j] = en.e;
    s.parities[j] = en.parity;
    if (opts.vectors) {
      const auto& idx = sectors[en.sector].index;
      const auto zc = results[en.sector].z.col(en.col);
      for (std::size_t r = 0; r < idx.size(); ++r) s.eigenvectors(idx[r], j) = zc[r];
    }
  }
  if (m > 1) {
    const double thresh = opts.degeneracy_rel * std::max(s.eigenvalues[m - 1] - s.eigenvalues[0], 1.0);
    for (Eigen::Index j = 1; j < m; ++j) {
      if (s.eigenvalues[j] - s.eigenvalues[j - 1] < thresh && s.parities[j] != s.parities[j - 1]) {
        s.near_degenerate[j] = s.near_degenerate[j - 1] = true;
      }
    }
  }
  if (opts.vectors) {
    const double scale = std::max(h.max_abs(), 1e-300);
    for (Eigen::Index j = 0; j < m; ++j) {
      s.max_residual =
          std::max(s.max_residual, residual_of(h, s.eigenvectors.col(j), s.eigenvalues[j]) / scale);
    }
    if (s.max_residual > opts.residual_tol) {
      std::ostringstream msg;
      msg << "eigen residual " << s.max_residual << " exceeds " << opts.residual_tol;
      throw NumericError(msg.str());
    }
  }
  return s;
}

Spectrum diagonalize_erm(const ModelParams& params, const HilbertSpace& space, const Selection& sel,
                         const DiagonalizeOptions& opts) {
  Spectrum s = diagonalize_sectors(build_hamiltonian(params, space), space, sel, opts);
  s.params = params;
  return s;
}

std::vector<LevelRow> level_dynamics(double system_size, double regime,
                                     const std::vector<double>& lambda_grid, int levels,
                                     const HilbertSpace& space, unsigned workers) {
  if (!std::is_sorted(lambda_grid.begin(), lambda_grid.end())) {
    throw DomainError("lambda grid must be ascending");
  }
  if (levels < 1) throw DomainError("need at least one level");
  std::vector<std::vector<LevelRow>> per_point(lambda_grid.size());
  DiagonalizeOptions opts;
  opts.vectors = false;
  parallel_for(lambda_grid.size(), workers, [&](std::size_t g) {
    ModelParams p{system_size, lambda_grid[g], regime, std::nullopt};
    const Spectrum s = diagonalize_erm(p, space, Selection::lowest(levels), opts);
    for (std::size_t j = 0; j < s.size(); ++j) {
      per_point[g].push_back({lambda_grid[g], static_cast<int>(j), s.eigenvalues[j], s.parities[j]});
    }
  });
  std::vector<LevelRow> rows;
  for (auto& v : per_point) rows.insert(rows.end(), v.begin(), v.end());
  return rows;
}

void write_levels_csv(std::ostream& os, const std::vector<LevelRow>& rows) {
  os << "lambda,index,energy,parity\n" << std::setprecision(15);
  for (const auto& r : rows) os << r.lambda << ',' << r.index << ',' << r.energy << ',' << r.parity << '\n';
}

void write_spectrum_csv(std::ostream& os, const Spectrum& spec) {
  const double lambda = spec.params ? spec.params->coupling : std::nan("");
  std::vector<LevelRow> rows;
  for (std::size_t j = 0; j < spec.size(); ++j) {
    rows.push_back({lambda, static_cast<int>(j), spec.eigenvalues[j], spec.parities[j]});
  }
  write_levels_csv(os, rows);
}

nlohmann::json to_json(const Spectrum& spec, bool include_vectors) {
  nlohmann::json j;
  if (spec.params) {
    j["params"] = {{"system_size", spec.params->system_size},
                   {"coupling", spec.params->coupling},
                   {"regime", spec.params->regime}};
  }
  j["fock_cutoff"] = spec.space.fock_cutoff();
  j["eigenvalues"] = std::vector<double>(spec.eigenvalues.data(), spec.eigenvalues.data() + spec.size());
  j["parities"] = spec.parities;
  j["max_residual"] = spec.max_residual;
  if (include_vectors && spec.has_vectors()) {
    nlohmann::json cols = nlohmann::json::array();
    for (Eigen::Index c = 0; c < spec.eigenvectors.cols(); ++c) {
      const auto v = spec.eigenvectors.col(c);
      cols.push_back(std::vector<double>(v.data(), v.data() + v.size()));
    }
    j["eigenvectors"] = std::move(cols);
  }
  return j;
}

}  // namespace esqpt
