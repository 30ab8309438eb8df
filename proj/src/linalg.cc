/*
 * Copyright 2026 The shelora Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "shelora/linalg.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>

#include "shelora/errors.h"

namespace shelora::linalg {

namespace {

constexpr double kRotationTolerance = 1e-12;
constexpr double kFlushRatio = 1e-12;
constexpr int kMaxSweeps = 100;

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

double dot(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) s += x[k] * y[k];
  return s;
}

// Result of Jacobi on a tall matrix (rows >= cols), stored column-wise.
struct TallSvd {
  std::vector<std::vector<double>> x;  // normalized columns of the rotated input
  std::vector<std::vector<double>> y;  // accumulated rotations (orthonormal)
  std::vector<double> sigma;
};

TallSvd jacobi_tall(const Matrix& t) {
  const std::size_t rows = t.rows();
  const std::size_t cols = t.cols();
  TallSvd out;
  out.x.assign(cols, std::vector<double>(rows));
  out.y.assign(cols, std::vector<double>(cols, 0.0));
  for (std::size_t j = 0; j < cols; ++j) {
    for (std::size_t k = 0; k < rows; ++k) out.x[j][k] = t(k, j);
    out.y[j][j] = 1.0;
  }

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    bool rotated = false;
    for (std::size_t i = 0; i + 1 < cols; ++i) {
      for (std::size_t j = i + 1; j < cols; ++j) {
        auto& ui = out.x[i];
        auto& uj = out.x[j];
        const double alpha = dot(ui, ui);
        const double beta = dot(uj, uj);
        const double gamma = dot(ui, uj);
        if (alpha == 0.0 || beta == 0.0) continue;
        if (std::abs(gamma) <= kRotationTolerance * std::sqrt(alpha * beta)) {
          continue;
        }
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t_rot = std::copysign(1.0, zeta) /
                             (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t_rot * t_rot);
        const double s = c * t_rot;
        for (std::size_t k = 0; k < rows; ++k) {
          const double a = ui[k];
          const double b = uj[k];
          ui[k] = c * a - s * b;
          uj[k] = s * a + c * b;
        }
        auto& vi = out.y[i];
        auto& vj = out.y[j];
        for (std::size_t k = 0; k < cols; ++k) {
          const double a = vi[k];
          const double b = vj[k];
          vi[k] = c * a - s * b;
          vj[k] = s * a + c * b;
        }
      }
    }
    if (!rotated) break;
  }

  out.sigma.resize(cols);
  for (std::size_t j = 0; j < cols; ++j) {
    const double norm = std::sqrt(dot(out.x[j], out.x[j]));
    out.sigma[j] = norm;
    if (norm > 0.0) {
      for (double& v : out.x[j]) v /= norm;
    }
  }
  return out;
}

// Replaces vectors[j] for every j in `missing` with a unit vector orthogonal
// to all other vectors.
void complete_basis(std::vector<std::vector<double>>& vectors,
                    const std::vector<bool>& missing) {
  if (vectors.empty()) return;
  const std::size_t len = vectors.front().size();
  std::vector<bool> established(vectors.size());
  for (std::size_t j = 0; j < vectors.size(); ++j) established[j] = !missing[j];

  for (std::size_t j = 0; j < vectors.size(); ++j) {
    if (!missing[j]) continue;
    std::vector<double> best;
    double best_norm = -1.0;
    for (std::size_t t = 0; t < len; ++t) {
      std::vector<double> w(len, 0.0);
      w[t] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t l = 0; l < vectors.size(); ++l) {
          if (!established[l]) continue;
          const double proj = dot(w, vectors[l]);
          for (std::size_t k = 0; k < len; ++k) w[k] -= proj * vectors[l][k];
        }
      }
      const double norm = std::sqrt(dot(w, w));
      if (norm > best_norm) {
        best_norm = norm;
        best = std::move(w);
      }
    }
    for (double& v : best) v /= best_norm;
    vectors[j] = std::move(best);
    established[j] = true;
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                     " does not match " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() ? rows.begin()->size() : 0) {
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("ragged matrix literal");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

std::vector<double> Matrix::col(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  }
  return t;
}

Matrix operator+(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("cannot add " + shape_str(a) + " and " + shape_str(b));
  }
  Matrix out = a;
  auto od = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] += bd[i];
  return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("cannot subtract " + shape_str(b) + " from " +
                     shape_str(a));
  }
  Matrix out = a;
  auto od = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] -= bd[i];
  return out;
}

Matrix operator*(double s, const Matrix& m) {
  Matrix out = m;
  for (double& v : out.data()) v *= s;
  return out;
}

double frobenius_norm(const Matrix& m) {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return std::sqrt(s);
}

double relative_error(const Matrix& a, const Matrix& b) {
  return frobenius_norm(a - b) / std::max(frobenius_norm(b), 1e-12);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul of " + shape_str(a) + " by " + shape_str(b));
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto orow = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      auto brow = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) orow[j] += aik * brow[j];
    }
  }
  return out;
}

SvdResult svd(const Matrix& m) {
  if (!m.all_finite()) throw DomainError("svd input has non-finite entries");
  const std::size_t rows = m.rows();
  const std::size_t cols = m.cols();
  const std::size_t p = std::min(rows, cols);
  SvdResult result{Matrix(rows, p), std::vector<double>(p, 0.0),
                   Matrix(p, cols)};
  if (p == 0) return result;

  const bool transposed = rows < cols;
  TallSvd tall = jacobi_tall(transposed ? m.transpose() : m);

  std::vector<std::size_t> order(p);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return tall.sigma[a] > tall.sigma[b];
  });

  std::vector<std::vector<double>> x(p), y(p);
  std::vector<double> sigma(p);
  for (std::size_t i = 0; i < p; ++i) {
    x[i] = std::move(tall.x[order[i]]);
    y[i] = std::move(tall.y[order[i]]);
    sigma[i] = tall.sigma[order[i]];
  }

  const double sigma_max = sigma.front();
  std::vector<bool> missing(p, false);
  for (std::size_t i = 0; i < p; ++i) {
    if (sigma_max == 0.0 || sigma[i] < kFlushRatio * sigma_max) {
      sigma[i] = 0.0;
      missing[i] = true;
    }
  }
  complete_basis(x, missing);

  auto& left = transposed ? y : x;
  auto& right = transposed ? x : y;
  for (std::size_t i = 0; i < p; ++i) {
    std::size_t arg = 0;
    for (std::size_t k = 1; k < left[i].size(); ++k) {
      if (std::abs(left[i][k]) > std::abs(left[i][arg])) arg = k;
    }
    if (left[i][arg] < 0.0) {
      for (double& v : left[i]) v = -v;
      for (double& v : right[i]) v = -v;
    }
    for (std::size_t k = 0; k < rows; ++k) result.u(k, i) = left[i][k];
    for (std::size_t k = 0; k < cols; ++k) result.vt(i, k) = right[i][k];
  }
  result.sigma = std::move(sigma);
  return result;
}

Matrix reconstruct(const SvdResult& s) {
  Matrix us = s.u;
  for (std::size_t r = 0; r < us.rows(); ++r) {
    for (std::size_t c = 0; c < us.cols(); ++c) us(r, c) *= s.sigma[c];
  }
  return matmul(us, s.vt);
}

LowRankFactors low_rank_factor(const Matrix& m, std::size_t rank) {
  if (rank == 0) throw ValidationError("low_rank_factor requires rank >= 1");
  const std::size_t p = std::min(m.rows(), m.cols());
  LowRankFactors out;
  out.clamped = rank > p;
  out.rank = std::min(rank, p);
  const SvdResult s = svd(m);
  out.b = Matrix(m.rows(), out.rank);
  out.a = Matrix(out.rank, m.cols());
  for (std::size_t i = 0; i < out.rank; ++i) {
    const double root = std::sqrt(s.sigma[i]);
    for (std::size_t r = 0; r < m.rows(); ++r) out.b(r, i) = s.u(r, i) * root;
    for (std::size_t c = 0; c < m.cols(); ++c) out.a(i, c) = s.vt(i, c) * root;
  }
  return out;
}

bool is_permutation(std::span<const std::size_t> perm, std::size_t n) {
  if (perm.size() != n) return false;
  std::vector<bool> seen(n, false);
  for (std::size_t v : perm) {
    if (v >= n || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

Permutation identity_permutation(std::size_t n) {
  Permutation p(n);
  std::iota(p.begin(), p.end(), 0);
  return p;
}

Permutation inverse_permutation(std::span<const std::size_t> perm) {
  if (!is_permutation(perm, perm.size())) {
    throw ValidationError("not a permutation");
  }
  Permutation inv(perm.size());
  for (std::size_t j = 0; j < perm.size(); ++j) inv[perm[j]] = j;
  return inv;
}

Matrix permute_cols(const Matrix& m, std::span<const std::size_t> perm) {
  if (!is_permutation(perm, m.cols())) {
    throw ValidationError("column permutation is not a bijection on [0, " +
                          std::to_string(m.cols()) + ")");
  }
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t j = 0; j < m.cols(); ++j) out(r, j) = m(r, perm[j]);
  }
  return out;
}

Matrix zero_pad(const Matrix& m, std::size_t target_rows,
                std::size_t target_cols, Placement placement) {
  if (target_rows < m.rows() || target_cols < m.cols()) {
    throw ShapeError("cannot pad " + shape_str(m) + " down to " +
                     std::to_string(target_rows) + "x" +
                     std::to_string(target_cols));
  }
  const std::size_t row0 =
      placement == Placement::kBottom ? target_rows - m.rows() : 0;
  const std::size_t col0 =
      placement == Placement::kRight ? target_cols - m.cols() : 0;
  Matrix out(target_rows, target_cols);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) out(row0 + r, col0 + c) = m(r, c);
  }
  return out;
}

Matrix block(const Matrix& m, std::size_t row0, std::size_t col0,
             std::size_t rows, std::size_t cols) {
  if (row0 + rows > m.rows() || col0 + cols > m.cols()) {
    throw ShapeError("block out of range of " + shape_str(m));
  }
  Matrix out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = m(row0 + r, col0 + c);
  }
  return out;
}

Matrix col_range(const Matrix& m, std::size_t col0, std::size_t cols) {
  return block(m, 0, col0, m.rows(), cols);
}

Matrix row_range(const Matrix& m, std::size_t row0, std::size_t rows) {
  return block(m, row0, 0, rows, m.cols());
}

Matrix hcat(const Matrix& left, const Matrix& right) {
  if (left.rows() != right.rows()) {
    throw ShapeError("hcat of " + shape_str(left) + " and " + shape_str(right));
  }
  Matrix out(left.rows(), left.cols() + right.cols());
  for (std::size_t r = 0; r < left.rows(); ++r) {
    for (std::size_t c = 0; c < left.cols(); ++c) out(r, c) = left(r, c);
    for (std::size_t c = 0; c < right.cols(); ++c) {
      out(r, left.cols() + c) = right(r, c);
    }
  }
  return out;
}

Matrix vcat(const Matrix& top, const Matrix& bottom) {
  if (top.cols() != bottom.cols()) {
    throw ShapeError("vcat of " + shape_str(top) + " and " + shape_str(bottom));
  }
  std::vector<double> data(top.data().begin(), top.data().end());
  data.insert(data.end(), bottom.data().begin(), bottom.data().end());
  return Matrix(top.rows() + bottom.rows(), top.cols(), std::move(data));
}

Matrix diag(std::span<const double> values) {
  Matrix out(values.size(), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out(i, i) = values[i];
  return out;
}

void write_csv(std::ostream& out, const Matrix& m) {
  out << m.rows() << ',' << m.cols() << '\n';
  char buf[32];
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (m.cols() == 0) break;
    for (std::size_t c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(r, c));
      if (c) out << ',';
      out << buf;
    }
    out << '\n';
  }
}

Matrix read_csv(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw FormatError("matrix CSV: missing header");
  std::size_t rows = 0, cols = 0;
  const auto comma = header.find(',');
  if (comma == std::string::npos) throw FormatError("matrix CSV: bad header");
  try {
    rows = std::stoul(header.substr(0, comma));
    cols = std::stoul(header.substr(comma + 1));
  } catch (const std::exception&) {
    throw FormatError("matrix CSV: bad header '" + header + "'");
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  std::string line;
  for (std::size_t r = 0; r < rows && cols > 0; ++r) {
    if (!std::getline(in, line)) throw FormatError("matrix CSV: truncated");
    std::size_t pos = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t end = std::min(line.find(',', pos), line.size());
      double v = 0.0;
      const char* first = line.data() + pos;
      const char* last = line.data() + end;
      while (first < last && *first == ' ') ++first;
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || (ptr != last && *ptr != '\r')) {
        throw FormatError("matrix CSV: bad value in row " + std::to_string(r));
      }
      if (!std::isfinite(v)) throw DomainError("matrix CSV: non-finite value");
      data.push_back(v);
      pos = end + 1;
      if (c + 1 < cols && end >= line.size()) {
        throw FormatError("matrix CSV: short row " + std::to_string(r));
      }
    }
  }
  return Matrix(rows, cols, std::move(data));
}

std::string to_csv(const Matrix& m) {
  std::ostringstream out;
  write_csv(out, m);
  return out.str();
}

Matrix from_csv(const std::string& text) {
  std::istringstream in(text);
  return read_csv(in);
}

void save_csv(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  write_csv(out, m);
}

Matrix load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  return read_csv(in);
}

}  // namespace shelora::linalg
