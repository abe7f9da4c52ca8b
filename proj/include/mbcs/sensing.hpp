#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "mbcs/types.hpp"

namespace mbcs {

enum class SensingKind { BernoulliTwoOnes, Gaussian };

/// Seeded M x N sensing operator. The binary kind places exactly two ones in
/// every column at distinct row positions, so y += phi_k * x_k costs two
/// integer additions per sample per channel and no multiplier at all; the
/// Gaussian kind is the dense i.i.d. N(0,1) reference. Both are reproducible
/// from (kind, rows, cols, seed).
struct SensingMatrix {
  SensingKind kind = SensingKind::BernoulliTwoOnes;
  Index rows = 0;
  Index cols = 0;
  std::uint64_t seed = 0;

  // BernoulliTwoOnes: per column the two (distinct) row indices holding a 1.
  std::vector<std::array<Index, 2>> ones;
  // Gaussian: explicit entries.
  Matrix entries;

  Matrix dense() const {
    if (kind == SensingKind::Gaussian) return entries;
    Matrix phi = Matrix::Zero(rows, cols);
    for (Index k = 0; k < cols; ++k) {
      phi(ones[static_cast<std::size_t>(k)][0], k) = 1.0;
      phi(ones[static_cast<std::size_t>(k)][1], k) = 1.0;
    }
    return phi;
  }
};

/// Sparse binary matrix, two ones per column at rows drawn uniformly without
/// replacement. Needs m >= 2. Column patterns may repeat across columns.
inline SensingMatrix generate_bernoulli(Index m, Index n, std::uint64_t seed) {
  if (m < 2) throw std::invalid_argument("generate_bernoulli: need at least 2 rows");
  if (n < 1) throw std::invalid_argument("generate_bernoulli: need at least 1 column");
  SensingMatrix phi;
  phi.kind = SensingKind::BernoulliTwoOnes;
  phi.rows = m;
  phi.cols = n;
  phi.seed = seed;
  phi.ones.resize(static_cast<std::size_t>(n));
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> first(0, m - 1);
  std::uniform_int_distribution<Index> second(0, m - 2);
  for (Index k = 0; k < n; ++k) {
    Index a = first(rng);
    Index b = second(rng);
    if (b >= a) ++b;  // skip a, keeping the remaining m-1 rows equally likely
    phi.ones[static_cast<std::size_t>(k)] = {a, b};
  }
  return phi;
}

inline SensingMatrix generate_gaussian(Index m, Index n, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("generate_gaussian: need at least 1 row");
  if (n < 1) throw std::invalid_argument("generate_gaussian: need at least 1 column");
  SensingMatrix phi;
  phi.kind = SensingKind::Gaussian;
  phi.rows = m;
  phi.cols = n;
  phi.seed = seed;
  phi.entries.resize(m, n);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  // Column-major fill so the draw order is part of the format.
  for (Index k = 0; k < n; ++k)
    for (Index i = 0; i < m; ++i) phi.entries(i, k) = gauss(rng);
  return phi;
}

/// Compresses a packet one time sample at a time: after k pushes the
/// accumulator equals Phi[:, 0..k) * X[0..k), :) exactly, so the compressed
/// packet exists the moment the last sample arrives and nothing runs after
/// acquisition. Tallies the arithmetic it performs.
class StreamingEncoder {
 public:
  StreamingEncoder(const SensingMatrix& phi, Index channels)
      : phi_(&phi), accumulator_(Matrix::Zero(phi.rows, channels)) {
    if (channels < 1)
      throw std::invalid_argument("StreamingEncoder: need at least one channel");
  }

  /// Feed sample row x[k, :] (one value per channel).
  void push(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    if (row.cols() != accumulator_.cols())
      throw std::invalid_argument("StreamingEncoder::push: row has wrong channel count");
    if (seen_ >= phi_->cols)
      throw std::length_error("StreamingEncoder::push: packet overflow, all samples already seen");
    const Index p = accumulator_.cols();
    if (phi_->kind == SensingKind::BernoulliTwoOnes) {
      const auto& pair = phi_->ones[static_cast<std::size_t>(seen_)];
      accumulator_.row(pair[0]) += row;
      accumulator_.row(pair[1]) += row;
      ops_.additions += static_cast<std::uint64_t>(2 * p);
    } else {
      accumulator_.noalias() += phi_->entries.col(seen_) * row;
      ops_.additions += static_cast<std::uint64_t>(phi_->rows * p);
      ops_.multiplications += static_cast<std::uint64_t>(phi_->rows * p);
    }
    ++seen_;
  }

  /// Final measurements. Only legal once every sample of the packet was pushed.
  Measurements finish() const {
    if (seen_ != phi_->cols)
      throw std::logic_error("StreamingEncoder::finish: incomplete packet");
    return Measurements(accumulator_);
  }

  Index samples_seen() const { return seen_; }
  const Matrix& accumulator() const { return accumulator_; }
  const OperationCounter& ops() const { return ops_; }

 private:
  const SensingMatrix* phi_;
  Matrix accumulator_;
  Index seen_ = 0;
  OperationCounter ops_;
};

/// Convenience wrapper: stream a whole packet through an encoder.
inline Measurements compress_streaming(const Packet& packet, const SensingMatrix& phi,
                                       OperationCounter* ops = nullptr) {
  if (packet.length() != phi.cols)
    throw std::invalid_argument("compress_streaming: packet length does not match sensing columns");
  StreamingEncoder enc(phi, packet.channels());
  for (Index k = 0; k < packet.length(); ++k) enc.push(packet.samples.row(k));
  if (ops) *ops = enc.ops();
  return enc.finish();
}

/// Measurement count for a compression ratio cr = (N - M) / N.
inline Index rows_for_ratio(Index n, double cr) {
  if (!(cr > 0.0 && cr < 1.0))
    throw std::invalid_argument("rows_for_ratio: compression ratio must lie in (0, 1)");
  const auto m = static_cast<Index>(std::lround(static_cast<double>(n) * (1.0 - cr)));
  if (m < 2) throw std::invalid_argument("rows_for_ratio: ratio leaves fewer than 2 measurements");
  return m;
}

}  // namespace mbcs
