#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <vector>

#include "kfiltr/rational.hpp"

namespace kfiltr {

using QVec = std::vector<Rat>;
using QMat = std::vector<QVec>;
using IVec = std::vector<Int>;

inline Rat dot(const QVec& a, const QVec& b) {
  Rat s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline Rat dot(const IVec& a, const IVec& b) {
  Int s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return Rat(s);
}

inline Int dot_int(const IVec& a, const IVec& b) {
  Int s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline QVec vsub(const QVec& a, const QVec& b) {
  QVec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

inline QVec vadd(const QVec& a, const QVec& b) {
  QVec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

inline QVec vscale(const Rat& s, const QVec& a) {
  QVec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = s * a[i];
  return r;
}

inline QVec to_qvec(const IVec& a) {
  QVec r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = Rat(a[i]);
  return r;
}

/// Row-reduces in place; returns the rank. Pivoting picks the first nonzero
/// entry, so the result is deterministic.
inline int row_reduce(QMat& m) {
  const std::size_t rows = m.size();
  const std::size_t cols = rows ? m[0].size() : 0;
  std::size_t r = 0;
  for (std::size_t c = 0; c < cols && r < rows; ++c) {
    std::size_t p = r;
    while (p < rows && m[p][c] == 0) ++p;
    if (p == rows) continue;
    std::swap(m[r], m[p]);
    const Rat inv = Rat(1) / m[r][c];
    for (std::size_t j = c; j < cols; ++j) m[r][j] *= inv;
    for (std::size_t i = 0; i < rows; ++i) {
      if (i == r || m[i][c] == 0) continue;
      const Rat f = m[i][c];
      for (std::size_t j = c; j < cols; ++j) m[i][j] -= f * m[r][j];
    }
    ++r;
  }
  return static_cast<int>(r);
}

inline int rank(QMat m) { return row_reduce(m); }

inline Rat det(QMat m) {
  const std::size_t n = m.size();
  Rat d = 1;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    while (p < n && m[p][c] == 0) ++p;
    if (p == n) return Rat(0);
    if (p != c) {
      std::swap(m[p], m[c]);
      d = -d;
    }
    d *= m[c][c];
    const Rat inv = Rat(1) / m[c][c];
    for (std::size_t i = c + 1; i < n; ++i) {
      if (m[i][c] == 0) continue;
      const Rat f = m[i][c] * inv;
      for (std::size_t j = c; j < n; ++j) m[i][j] -= f * m[c][j];
    }
  }
  return d;
}

/// Solves the square system A x = b exactly. nullopt when A is singular.
inline std::optional<QVec> solve_linear(QMat a, QVec b) {
  const std::size_t n = a.size();
  for (std::size_t i = 0; i < n; ++i) a[i].push_back(b[i]);
  const int rk = row_reduce(a);
  if (rk < static_cast<int>(n)) return std::nullopt;
  QVec x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = a[i][n];
  return x;
}

/// One-dimensional nullspace of the given rows (expects rank == n-1 over
/// R^n); nullopt otherwise.
inline std::optional<QVec> nullspace_vector(QMat rows, std::size_t n) {
  const int rk = row_reduce(rows);
  if (rk != static_cast<int>(n) - 1) return std::nullopt;
  // Identify pivot columns of the reduced system.
  std::vector<int> pivot_of_col(n, -1);
  std::size_t r = 0;
  for (std::size_t c = 0; c < n && r < rows.size(); ++c) {
    if (rows[r][c] == 1) {
      bool is_pivot = true;
      for (std::size_t i = 0; i < rows.size(); ++i)
        if (i != r && rows[i][c] != 0) is_pivot = false;
      if (is_pivot) {
        pivot_of_col[c] = static_cast<int>(r);
        ++r;
      }
    }
  }
  std::size_t free_col = n;
  for (std::size_t c = 0; c < n; ++c)
    if (pivot_of_col[c] < 0) {
      free_col = c;
      break;
    }
  if (free_col == n) return std::nullopt;
  QVec v(n, Rat(0));
  v[free_col] = 1;
  for (std::size_t c = 0; c < n; ++c)
    if (pivot_of_col[c] >= 0) v[c] = -rows[pivot_of_col[c]][free_col];
  return v;
}

/// Interpolates the degree-`degree` polynomial through the points
/// (x_i, y_i), i = 0..degree. Coefficients are returned high degree first.
inline std::optional<QVec> interpolate_polynomial(const std::vector<Rat>& xs,
                                                  const std::vector<Rat>& ys,
                                                  int degree) {
  const std::size_t m = static_cast<std::size_t>(degree) + 1;
  QMat a(m, QVec(m));
  QVec b(m);
  for (std::size_t i = 0; i < m; ++i) {
    // Row: x^degree, ..., x, 1.
    Rat pw = 1;
    for (int j = 0; j <= degree; ++j) {
      a[i][static_cast<std::size_t>(degree - j)] = pw;
      pw *= xs[i];
    }
    b[i] = ys[i];
  }
  return solve_linear(std::move(a), std::move(b));
}

inline Rat eval_polynomial(const QVec& coeffs_high_to_low, const Rat& x) {
  Rat v = 0;
  for (const Rat& c : coeffs_high_to_low) v = v * x + c;
  return v;
}

}  // namespace kfiltr
