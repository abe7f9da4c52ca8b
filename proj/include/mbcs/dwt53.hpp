#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "mbcs/types.hpp"

namespace mbcs {

// Integer 5/3 wavelet on int64 samples, lifting form:
//   predict  d[k] = x[2k+1] - ((x[2k] + x[2k+2]) >> 1)
//   update   s[k] = x[2k]   + ((d[k-1] + d[k] + 2) >> 2)
// with whole-sample symmetric extension (x[L] -> x[L-2], d[-1] -> d[0]).
// Each level rewrites its input as [approx | detail] and the next level
// recurses on the approx half. Inverting the lifting steps in reverse order
// reconstructs the input exactly, bit for bit.
//
// Work accounting: the predict step costs 2 additions per output sample and
// the update step 3 (the +2 rounding offset included, shifts free), so one
// level over L samples costs 5L/2 additions and no multiplications.

namespace detail {

inline void dwt53_level_forward(std::vector<std::int64_t>& buf, std::size_t len,
                                OperationCounter& ops) {
  const std::size_t half = len / 2;
  std::vector<std::int64_t> d(half), s(half);
  for (std::size_t k = 0; k < half; ++k) {
    const std::int64_t left = buf[2 * k];
    const std::int64_t right = (2 * k + 2 < len) ? buf[2 * k + 2] : buf[len - 2];
    d[k] = buf[2 * k + 1] - ((left + right) >> 1);
    ops.additions += 2;
  }
  for (std::size_t k = 0; k < half; ++k) {
    const std::int64_t prev = (k == 0) ? d[0] : d[k - 1];
    s[k] = buf[2 * k] + ((prev + d[k] + 2) >> 2);
    ops.additions += 3;
  }
  std::copy(s.begin(), s.end(), buf.begin());
  std::copy(d.begin(), d.end(), buf.begin() + static_cast<std::ptrdiff_t>(half));
}

inline void dwt53_level_inverse(std::vector<std::int64_t>& buf, std::size_t len) {
  const std::size_t half = len / 2;
  std::vector<std::int64_t> x(len);
  for (std::size_t k = 0; k < half; ++k) {
    const std::int64_t prev = (k == 0) ? buf[half] : buf[half + k - 1];
    x[2 * k] = buf[k] - ((prev + buf[half + k] + 2) >> 2);
  }
  for (std::size_t k = 0; k < half; ++k) {
    const std::int64_t left = x[2 * k];
    const std::int64_t right = (2 * k + 2 < len) ? x[2 * k + 2] : x[len - 2];
    x[2 * k + 1] = buf[half + k] + ((left + right) >> 1);
  }
  std::copy(x.begin(), x.end(), buf.begin());
}

inline void dwt53_check(std::size_t size, int levels) {
  if (levels < 1) throw std::invalid_argument("dwt53: levels must be positive");
  if (levels >= 63) throw std::invalid_argument("dwt53: levels out of range");
  const std::size_t div = std::size_t{1} << levels;
  if (size == 0 || size % div != 0)
    throw std::invalid_argument("dwt53: input length must be a positive multiple of 2^levels");
}

}  // namespace detail

/// Multi-level forward transform. Output layout for L levels:
/// [approx_L | detail_L | detail_{L-1} | ... | detail_1].
inline std::vector<std::int64_t> dwt53_forward(std::span<const std::int64_t> x, int levels = 4,
                                               OperationCounter* ops = nullptr) {
  detail::dwt53_check(x.size(), levels);
  std::vector<std::int64_t> buf(x.begin(), x.end());
  OperationCounter local;
  std::size_t len = buf.size();
  for (int level = 0; level < levels; ++level) {
    detail::dwt53_level_forward(buf, len, local);
    len /= 2;
  }
  if (ops) {
    ops->additions += local.additions;
    ops->multiplications += local.multiplications;
    ops->post_acquisition_ops += local.additions + local.multiplications;
  }
  return buf;
}

/// Exact inverse of dwt53_forward.
inline std::vector<std::int64_t> dwt53_inverse(std::span<const std::int64_t> coeffs,
                                               int levels = 4) {
  detail::dwt53_check(coeffs.size(), levels);
  std::vector<std::int64_t> buf(coeffs.begin(), coeffs.end());
  for (int level = levels - 1; level >= 0; --level) {
    const std::size_t len = buf.size() >> level;
    detail::dwt53_level_inverse(buf, len);
  }
  return buf;
}

}  // namespace mbcs
