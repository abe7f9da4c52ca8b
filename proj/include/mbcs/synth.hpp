#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include "mbcs/dct.hpp"
#include "mbcs/types.hpp"

namespace mbcs {

/// Ground-truth bundle for the block-sparse generator.
struct BlockSparseSignal {
  Packet packet;               // X = D * A
  Matrix coefficients;         // A, n x p
  std::vector<Index> blocks;   // active block indices, ascending
};

/// Coefficients with k_active blocks chosen uniformly without replacement
/// from the uniform partition of n into blocks of the given size, filled with
/// i.i.d. standard-normal entries on every channel (shared row support), then
/// synthesized through the orthonormal DCT.
inline BlockSparseSignal synth_block_sparse(Index n, Index p, Index block, Index k_active,
                                            std::uint64_t seed) {
  const BlockPartition part = BlockPartition::uniform(n, block);
  if (p < 1) throw std::invalid_argument("synth_block_sparse: need at least one channel");
  if (k_active < 0 || k_active > part.blocks())
    throw std::invalid_argument("synth_block_sparse: k_active must lie in [0, block count]");
  std::mt19937_64 rng(seed);

  std::vector<Index> pool(static_cast<std::size_t>(part.blocks()));
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = static_cast<Index>(i);
  for (Index i = 0; i < k_active; ++i) {
    std::uniform_int_distribution<Index> pick(i, part.blocks() - 1);
    std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(pick(rng))]);
  }
  std::vector<Index> chosen(pool.begin(), pool.begin() + k_active);
  std::sort(chosen.begin(), chosen.end());

  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix a = Matrix::Zero(n, p);
  for (Index b : chosen)
    for (Index r = 0; r < part.size(b); ++r)
      for (Index c = 0; c < p; ++c) a(part.offset(b) + r, c) = gauss(rng);

  BlockSparseSignal out;
  out.coefficients = a;
  out.blocks = std::move(chosen);
  out.packet = Packet(Dictionary::dct(n).synthesize(a));
  return out;
}

/// Smooth surrogate for a physiological channel group: a sum of Gaussian
/// pulses plus slow baseline wander. Channels share pulse locations and
/// widths; each channel applies its own amplitude scale and baseline phase.
inline Packet synth_pulse_train(Index n, Index p, int pulses, std::uint64_t seed) {
  if (n < 1 || p < 1) throw std::invalid_argument("synth_pulse_train: n and p must be positive");
  if (pulses < 1) throw std::invalid_argument("synth_pulse_train: need at least one pulse");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double nd = static_cast<double>(n);
  std::vector<double> center(static_cast<std::size_t>(pulses));
  std::vector<double> width(static_cast<std::size_t>(pulses));
  std::vector<double> amp(static_cast<std::size_t>(pulses));
  for (int j = 0; j < pulses; ++j) {
    center[static_cast<std::size_t>(j)] = (0.08 + 0.84 * unit(rng)) * nd;
    width[static_cast<std::size_t>(j)] = std::max(2.5, (1.0 / 80.0 + unit(rng) * 3.0 / 160.0) * nd);
    amp[static_cast<std::size_t>(j)] = 0.6 + unit(rng);
  }

  Matrix x(n, p);
  for (Index ch = 0; ch < p; ++ch) {
    const double scale = 0.5 + unit(rng);
    const double wander_amp = 0.02 + 0.06 * unit(rng);
    const double wander_phase = 2.0 * std::numbers::pi * unit(rng);
    for (Index t = 0; t < n; ++t) {
      const double td = static_cast<double>(t);
      double v = wander_amp * std::sin(2.0 * std::numbers::pi * td / nd + wander_phase);
      for (int j = 0; j < pulses; ++j) {
        const double z = (td - center[static_cast<std::size_t>(j)]) /
                         width[static_cast<std::size_t>(j)];
        v += amp[static_cast<std::size_t>(j)] * std::exp(-0.5 * z * z);
      }
      x(t, ch) = scale * v;
    }
  }
  return Packet(std::move(x));
}

}  // namespace mbcs
