#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

namespace mbcs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Arithmetic-work tally for a compressor run. `post_acquisition_ops` counts
/// operations issued after the final sample of a packet was available; for a
/// streaming compressor it stays 0, for a transform compressor it equals the
/// whole transform cost. Shift/rounding ops are not tallied.
struct OperationCounter {
  std::uint64_t additions = 0;
  std::uint64_t multiplications = 0;
  std::uint64_t post_acquisition_ops = 0;
};

/// One N x P window of multichannel samples: rows are time samples, columns
/// are channels. Packets are the unit of compression and recovery.
struct Packet {
  Matrix samples;
  double sample_rate_hz = 256.0;

  Packet() = default;
  explicit Packet(Matrix s, double rate_hz = 256.0)
      : samples(std::move(s)), sample_rate_hz(rate_hz) {
    if (samples.rows() < 1 || samples.cols() < 1)
      throw std::invalid_argument("Packet: need at least one row and one column");
    if (!samples.allFinite())
      throw std::invalid_argument("Packet: samples must be finite");
    if (!(sample_rate_hz > 0.0))
      throw std::invalid_argument("Packet: sample rate must be positive");
  }

  Index length() const { return samples.rows(); }
  Index channels() const { return samples.cols(); }
};

/// Compressed measurements, M x P (one column per channel).
struct Measurements {
  Matrix values;

  Measurements() = default;
  explicit Measurements(Matrix v) : values(std::move(v)) {
    if (values.rows() < 1 || values.cols() < 1)
      throw std::invalid_argument("Measurements: need at least one row and one column");
  }

  Index rows() const { return values.rows(); }
  Index channels() const { return values.cols(); }
};

/// Division of N coefficient rows into g contiguous blocks of sizes d_1..d_g.
class BlockPartition {
 public:
  explicit BlockPartition(std::vector<Index> sizes) : sizes_(std::move(sizes)) {
    if (sizes_.empty())
      throw std::invalid_argument("BlockPartition: need at least one block");
    offsets_.reserve(sizes_.size() + 1);
    offsets_.push_back(0);
    for (Index d : sizes_) {
      if (d < 1) throw std::invalid_argument("BlockPartition: block sizes must be positive");
      offsets_.push_back(offsets_.back() + d);
    }
  }

  /// Partition of `n` rows into ceil(n/block) blocks, all of size `block`
  /// except a smaller trailing block when `block` does not divide `n`.
  static BlockPartition uniform(Index n, Index block) {
    if (n < 1 || block < 1)
      throw std::invalid_argument("BlockPartition::uniform: n and block must be positive");
    std::vector<Index> sizes;
    for (Index at = 0; at < n; at += block) sizes.push_back(std::min(block, n - at));
    return BlockPartition(std::move(sizes));
  }

  Index blocks() const { return static_cast<Index>(sizes_.size()); }
  Index size(Index i) const { return sizes_[static_cast<std::size_t>(i)]; }
  Index offset(Index i) const { return offsets_[static_cast<std::size_t>(i)]; }
  Index total() const { return offsets_.back(); }
  const std::vector<Index>& sizes() const { return sizes_; }

 private:
  std::vector<Index> sizes_;
  std::vector<Index> offsets_;
};

inline BlockPartition make_partition_uniform(Index n, Index block) {
  return BlockPartition::uniform(n, block);
}

/// Which multiplier scales the log-determinant term of the marginal cost
/// N log|C| vs P log|C|. ChannelsP makes the cost the exact matrix-normal
/// -2 log p(Y) up to a constant; RowsN is kept as an option.
enum class LogdetMultiplier { ChannelsP, RowsN };

struct SolverConfig {
  double eta = 1e-5;              // convergence threshold on the best cost decrease
  double beta_inv_scale = 0.01;   // noise variance = beta_inv_scale * ||Y||_F^2
  int max_iterations = 1000;
  double gamma_floor = 1e-12;     // candidates at or below this are treated as 0
  LogdetMultiplier logdet_multiplier = LogdetMultiplier::ChannelsP;
};

/// Config tuned for noiseless synthetic data. The 0.01 energy-fraction default
/// mirrors telemonitoring practice where artifacts act as noise; on clean data
/// it over-regularizes (shrinks or rejects every block whose energy share is
/// near the assumed noise floor), so benchmarks on exact synthetic signals use
/// a much smaller fraction.
inline SolverConfig noiseless_solver_config() {
  SolverConfig cfg;
  cfg.beta_inv_scale = 1e-6;
  return cfg;
}

/// Output of one recovery: coefficients A (equal to the signal when the
/// dictionary is the identity), synthesized signal X = D*A, per-block gamma,
/// and the cost trace (relative to the empty model, one entry per iteration).
struct RecoveryResult {
  Matrix coefficients;             // N x P
  Matrix signal;                   // N x P
  Vector gamma;                    // length g
  std::vector<double> cost_trace;
  int iterations = 0;
  double wall_time_s = 0.0;
  bool converged = true;
  int skipped_blocks = 0;          // candidate sweeps skipped on near-singular s_i
};

}  // namespace mbcs
