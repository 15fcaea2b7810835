// Copyright 2026 The Refgame Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef REFGAME_KERNELS_H_
#define REFGAME_KERNELS_H_

#include <cstddef>
#include <vector>

namespace refgame::kernels {

// c[m x n] += a[m x k] * b[k x n], all row-major. The innermost loop runs
// over n so each output element accumulates its k products in index order,
// which matches a naive triple loop bit for bit.
namespace internal {

// Register tile: kRows rows of c, kCols columns, held across the whole k loop.
constexpr std::size_t kRows = 4;
constexpr std::size_t kCols = 32;

template <std::size_t R, std::size_t C>
inline void GemmTile(std::size_t n, std::size_t k, const double* __restrict a,
                     const double* __restrict b, double* __restrict c) {
  double acc[R][C];
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t j = 0; j < C; ++j) acc[r][j] = c[r * n + j];
  for (std::size_t p = 0; p < k; ++p) {
    const double* b_row = b + p * n;
    for (std::size_t r = 0; r < R; ++r) {
      const double scale = a[r * k + p];
      for (std::size_t j = 0; j < C; ++j) acc[r][j] += scale * b_row[j];
    }
  }
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t j = 0; j < C; ++j) c[r * n + j] = acc[r][j];
}

inline void GemmNaive(std::size_t rows, std::size_t cols, std::size_t n,
                      std::size_t k, const double* __restrict a,
                      const double* __restrict b, double* __restrict c) {
  for (std::size_t i = 0; i < rows; ++i) {
    double* c_row = c + i * n;
    const double* a_row = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double scale = a_row[p];
      const double* b_row = b + p * n;
      for (std::size_t j = 0; j < cols; ++j) c_row[j] += scale * b_row[j];
    }
  }
}

}  // namespace internal

inline void GemmAcc(std::size_t m, std::size_t n, std::size_t k,
                    const double* __restrict a, const double* __restrict b,
                    double* __restrict c) {
  using internal::kCols;
  using internal::kRows;
  const std::size_t m_main = m - m % kRows, n_main = n - n % kCols;
  for (std::size_t i = 0; i < m_main; i += kRows) {
    for (std::size_t j = 0; j < n_main; j += kCols)
      internal::GemmTile<kRows, kCols>(n, k, a + i * k, b + j, c + i * n + j);
  }
  if (n_main < n)
    internal::GemmNaive(m_main, n - n_main, n, k, a, b + n_main, c + n_main);
  if (m_main < m)
    internal::GemmNaive(m - m_main, n, n, k, a + m_main * k, b, c + m_main * n);
}

// out[cols x rows] = in[rows x cols]^T.
inline void TransposeInto(std::size_t rows, std::size_t cols, const double* in,
                          double* out) {
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = in[i * cols + j];
  }
}

inline std::vector<double> Transposed(std::size_t rows, std::size_t cols,
                                      const double* in) {
  std::vector<double> out(rows * cols);
  TransposeInto(rows, cols, in, out.data());
  return out;
}

}  // namespace refgame::kernels

#endif  // REFGAME_KERNELS_H_
