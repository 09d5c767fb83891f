#include "visbound/lp.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "visbound/error.hpp"

namespace visb {

LpResult maximize_packing(const std::vector<std::vector<double>>& A, const std::vector<double>& b,
                          const std::vector<double>& c, std::size_t max_pivots) {
  const Eigen::Index m = static_cast<Eigen::Index>(b.size());
  const Eigen::Index n = static_cast<Eigen::Index>(c.size());
  if (static_cast<Eigen::Index>(A.size()) != m) throw Error("lp-shape", "row count mismatch");
  for (double bi : b) {
    if (!(bi >= 0.0)) throw Error("lp-shape", "packing program needs b >= 0");
  }

  // Tableau: rows 0..m-1 constraints, row m objective (reduced costs, negated).
  // Columns 0..n-1 structural, n..n+m-1 slacks, last column rhs.
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m + 1, n + m + 1);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (static_cast<Eigen::Index>(A[i].size()) != n) throw Error("lp-shape", "column mismatch");
    for (Eigen::Index j = 0; j < n; ++j) T(i, j) = A[i][j];
    T(i, n + i) = 1.0;
    T(i, n + m) = b[i];
  }
  for (Eigen::Index j = 0; j < n; ++j) T(m, j) = -c[j];
  std::vector<Eigen::Index> basis(m);
  for (Eigen::Index i = 0; i < m; ++i) basis[i] = n + i;

  const double eps = 1e-11;
  LpResult out;
  std::size_t degenerate_run = 0;
  while (out.pivots < max_pivots) {
    const bool bland = degenerate_run > 50;
    Eigen::Index enter = -1;
    double best = -eps;
    for (Eigen::Index j = 0; j < n + m; ++j) {
      if (T(m, j) < best) {
        enter = j;
        if (bland) break;
        best = T(m, j);
      }
    }
    if (enter < 0) {
      out.optimal = true;
      break;
    }
    Eigen::Index leave = -1;
    double ratio = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < m; ++i) {
      const double a = T(i, enter);
      if (a <= eps) continue;
      const double r = T(i, n + m) / a;
      if (r < ratio - 1e-14 || (r <= ratio + 1e-14 && leave >= 0 && basis[i] < basis[leave])) {
        ratio = r;
        leave = i;
      }
    }
    if (leave < 0) {
      out.unbounded = true;
      break;
    }
    degenerate_run = ratio <= 1e-14 ? degenerate_run + 1 : 0;
    T.row(leave) /= T(leave, enter);
    for (Eigen::Index i = 0; i <= m; ++i) {
      if (i == leave) continue;
      const double f = T(i, enter);
      if (f != 0.0) T.row(i) -= f * T.row(leave);
    }
    basis[leave] = enter;
    ++out.pivots;
  }

  out.x.assign(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (basis[i] < n) out.x[basis[i]] = std::max(0.0, T(i, n + m));
  }
  out.objective = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) out.objective += c[j] * out.x[j];
  return out;
}

}  // namespace visb
