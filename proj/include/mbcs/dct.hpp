#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "mbcs/types.hpp"

namespace mbcs {

enum class DictionaryKind { Identity, Dct };

/// Synthesis dictionary D: the recovered coefficients A map to the signal as
/// X = D * A. Identity keeps no storage; the DCT kind holds the orthonormal
/// type-II inverse-transform matrix
///   D[n][k] = c_k cos(pi (2n + 1) k / (2N)),  c_0 = sqrt(1/N), c_k = sqrt(2/N)
/// so D^T D = I and analyze() is the exact inverse of synthesize().
class Dictionary {
 public:
  static Dictionary identity(Index n) {
    check(n);
    Dictionary d;
    d.kind_ = DictionaryKind::Identity;
    d.size_ = n;
    return d;
  }

  static Dictionary dct(Index n) {
    check(n);
    Dictionary d;
    d.kind_ = DictionaryKind::Dct;
    d.size_ = n;
    d.matrix_.resize(n, n);
    const double c0 = std::sqrt(1.0 / static_cast<double>(n));
    const double ck = std::sqrt(2.0 / static_cast<double>(n));
    for (Index k = 0; k < n; ++k) {
      const double scale = (k == 0) ? c0 : ck;
      for (Index row = 0; row < n; ++row) {
        const double angle = std::numbers::pi * (2.0 * static_cast<double>(row) + 1.0) *
                             static_cast<double>(k) / (2.0 * static_cast<double>(n));
        d.matrix_(row, k) = scale * std::cos(angle);
      }
    }
    return d;
  }

  DictionaryKind kind() const { return kind_; }
  Index size() const { return size_; }

  /// X = D * A.
  Matrix synthesize(const Matrix& coeffs) const {
    if (coeffs.rows() != size_)
      throw std::invalid_argument("Dictionary::synthesize: coefficient rows do not match size");
    if (kind_ == DictionaryKind::Identity) return coeffs;
    return matrix_ * coeffs;
  }

  /// A = D^T * X (exact inverse of synthesize for these orthonormal kinds).
  Matrix analyze(const Matrix& x) const {
    if (x.rows() != size_)
      throw std::invalid_argument("Dictionary::analyze: signal rows do not match size");
    if (kind_ == DictionaryKind::Identity) return x;
    return matrix_.transpose() * x;
  }

  /// Dense synthesis operator; materialized on demand for the identity kind.
  Matrix dense() const {
    if (kind_ == DictionaryKind::Identity) return Matrix::Identity(size_, size_);
    return matrix_;
  }

 private:
  static void check(Index n) {
    if (n < 1) throw std::invalid_argument("Dictionary: size must be positive");
  }

  DictionaryKind kind_ = DictionaryKind::Identity;
  Index size_ = 0;
  Matrix matrix_;
};

}  // namespace mbcs
