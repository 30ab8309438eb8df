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

// Dense row-major matrices and the handful of kernels the protocol needs:
// products, column permutations, padding/slicing and a deterministic SVD.

#ifndef SHELORA_LINALG_H_
#define SHELORA_LINALG_H_

#include <cstddef>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace shelora::linalg {

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  // Row-wise literal, e.g. Matrix{{1, 2}, {3, 4}}. Ragged rows are rejected.
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix zeros(std::size_t rows, std::size_t cols) {
    return Matrix(rows, cols);
  }
  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::vector<double> col(std::size_t c) const;

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  bool all_finite() const;
  Matrix transpose() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, const Matrix& m);

double frobenius_norm(const Matrix& m);
// ‖a − b‖_F / max(‖b‖_F, 1e-12).
double relative_error(const Matrix& a, const Matrix& b);

Matrix matmul(const Matrix& a, const Matrix& b);

struct SvdResult {
  Matrix u;                    // m × p, orthonormal columns
  std::vector<double> sigma;   // p values, descending, nonnegative
  Matrix vt;                   // p × n, orthonormal rows
};

// Thin SVD via one-sided Jacobi rotations, p = min(m, n).
//
// Output is a pure function of the input bits: singular values are sorted
// descending (stable on ties), values below 1e-12·σ_max are flushed to zero,
// and each left singular vector has its largest-magnitude entry made
// nonnegative. Left vectors for zero singular values are completed to an
// orthonormal set by Gram-Schmidt over the standard basis.
SvdResult svd(const Matrix& m);

// U·diag(σ)·Vᵀ.
Matrix reconstruct(const SvdResult& s);

struct LowRankFactors {
  Matrix b;                // m × rank
  Matrix a;                // rank × n
  std::size_t rank = 0;    // rank actually used
  bool clamped = false;    // requested rank exceeded min(m, n)
};

// b = U[:, :r]·√Σ, a = √Σ·Vᵀ[:r, :]. Requests above min(m, n) are clamped.
LowRankFactors low_rank_factor(const Matrix& m, std::size_t rank);

using Permutation = std::vector<std::size_t>;

bool is_permutation(std::span<const std::size_t> perm, std::size_t n);
Permutation identity_permutation(std::size_t n);
Permutation inverse_permutation(std::span<const std::size_t> perm);

// out[:, j] = m[:, perm[j]].
Matrix permute_cols(const Matrix& m, std::span<const std::size_t> perm);

// Where the original block sits inside the padded matrix. kLeft/kRight anchor
// the columns (rows stay on top); kTop/kBottom anchor the rows (columns stay
// on the left).
enum class Placement { kLeft, kRight, kTop, kBottom };

Matrix zero_pad(const Matrix& m, std::size_t target_rows,
                std::size_t target_cols, Placement placement);

Matrix block(const Matrix& m, std::size_t row0, std::size_t col0,
             std::size_t rows, std::size_t cols);
Matrix col_range(const Matrix& m, std::size_t col0, std::size_t cols);
Matrix row_range(const Matrix& m, std::size_t row0, std::size_t rows);
Matrix hcat(const Matrix& left, const Matrix& right);
Matrix vcat(const Matrix& top, const Matrix& bottom);
Matrix diag(std::span<const double> values);

// CSV persistence: first line "rows,cols", then one line per row with values
// at 17 significant digits.
void write_csv(std::ostream& out, const Matrix& m);
Matrix read_csv(std::istream& in);
std::string to_csv(const Matrix& m);
Matrix from_csv(const std::string& text);
void save_csv(const std::string& path, const Matrix& m);
Matrix load_csv(const std::string& path);

}  // namespace shelora::linalg

#endif  // SHELORA_LINALG_H_
