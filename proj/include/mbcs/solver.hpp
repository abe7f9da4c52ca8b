#pragma once

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "mbcs/dct.hpp"
#include "mbcs/sensing.hpp"
#include "mbcs/types.hpp"

namespace mbcs {

// Block-sparse Bayesian recovery of A in Y = Phi_eff A + V, all channels
// sharing one block support. Coefficient rows are grouped into blocks i with a
// single variance gamma_i each; the solver maximizes the type-II likelihood of
//   C = beta^{-1} I + Phi_eff Gamma Phi_eff^T
// by greedy per-block actions (add / re-estimate / delete), each chosen by the
// exact cost change it would cause and applied through a rank-d downdate of
// every block's statistics. beta is fixed up front from the measurement
// energy, not learned.

/// Per-block statistics carried across iterations. S and Q use the current
/// model covariance C; s and q use the leave-one-out covariance with the
/// block's own contribution removed (equal to S and Q while inactive).
struct BlockStats {
  Matrix S;  // d x d   Phi_i^T C^{-1} Phi_i
  Matrix Q;  // d x P   Phi_i^T C^{-1} Y
  Matrix s;  // d x d   leave-one-out S
  Matrix q;  // d x P   leave-one-out Q
};

enum class ActionKind { None, Add, Reestimate, Delete };

struct ActionChoice {
  Index block = -1;
  ActionKind kind = ActionKind::None;
  double gamma_new = 0.0;
  double delta_cost = 0.0;
  int skipped_blocks = 0;  // blocks passed over in this sweep (near-singular s)
};

struct SolverState {
  std::vector<Index> active;       // block indices with gamma > 0, ascending
  Vector gamma;                    // length g
  Matrix mu;                       // posterior mean over active rows, rows x P
  Matrix sigma;                    // posterior covariance over active rows
  std::vector<BlockStats> stats;   // length g
  double beta = 0.0;
  double cost = 0.0;               // relative to the all-zero model
  std::vector<double> cost_trace;  // cost after each applied action
};

/// Stationary-point block variance for fixed leave-one-out statistics:
///   gamma~ = (1/d) Tr[ s^{-1} (q q^T - s) s^{-1} ]
/// with s Tikhonov-regularized by 1e-10 tr(s)/d before inversion. Returns
/// nullopt when s is numerically singular (the caller skips the block this
/// sweep) and 0 when the estimate lands at or below gamma_floor.
inline std::optional<double> gamma_candidate(const Matrix& s, const Matrix& q,
                                             const SolverConfig& cfg) {
  const Index d = s.rows();
  if (d < 1 || s.cols() != d || q.rows() != d)
    throw std::invalid_argument("gamma_candidate: mismatched statistic shapes");
  if (!s.allFinite() || !q.allFinite()) return std::nullopt;
  const double tr = s.trace();
  if (!(tr > 0.0)) return std::nullopt;
  Matrix a = s;
  a.diagonal().array() += 1e-10 * tr / static_cast<double>(d);
  Eigen::FullPivLU<Matrix> lu(a);
  if (!lu.isInvertible()) return std::nullopt;
  const Matrix inv = lu.inverse();
  const double value =
      ((inv * q).squaredNorm() - (inv * s * inv).trace()) / static_cast<double>(d);
  if (!std::isfinite(value)) return std::nullopt;
  return value > cfg.gamma_floor ? value : 0.0;
}

/// Cost contribution of a single block at variance gamma, relative to
/// gamma = 0 and holding the leave-one-out statistics fixed:
///   L(gamma) = multiplier * log det(I + gamma s)
///              - gamma Tr[ q^T (I + gamma s)^{-1} q ]
inline double block_cost(const Matrix& s, const Matrix& q, double gamma, double multiplier) {
  if (gamma == 0.0) return 0.0;
  const Index d = s.rows();
  Matrix a = gamma * ((s + s.transpose()) * 0.5);
  a.diagonal().array() += 1.0;
  Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("block_cost: I + gamma*s is not positive definite");
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const Matrix w = llt.solve(q);
  return multiplier * logdet - gamma * (q.array() * w.array()).sum();
}

/// Cost change of moving one block from gamma_old to gamma_new.
inline double block_delta_cost(const Matrix& s, const Matrix& q, double gamma_old,
                               double gamma_new, double multiplier) {
  return block_cost(s, q, gamma_new, multiplier) - block_cost(s, q, gamma_old, multiplier);
}

class BsblSolver {
 public:
  /// measurements: M x P, phi_eff: M x N (sensing matrix times dictionary),
  /// partition covering the N coefficient rows.
  BsblSolver(Matrix measurements, Matrix phi_eff, BlockPartition partition,
             SolverConfig config = {})
      : y_(std::move(measurements)),
        phi_(std::move(phi_eff)),
        part_(std::move(partition)),
        cfg_(config) {
    if (y_.rows() < 1 || y_.cols() < 1)
      throw std::invalid_argument("BsblSolver: empty measurement matrix");
    if (phi_.rows() != y_.rows())
      throw std::invalid_argument("BsblSolver: measurement rows do not match phi rows");
    if (part_.total() != phi_.cols())
      throw std::invalid_argument("BsblSolver: partition does not cover the coefficient rows");
    if (!y_.allFinite() || !phi_.allFinite())
      throw std::invalid_argument("BsblSolver: inputs must be finite");
    if (!(cfg_.eta > 0.0)) throw std::invalid_argument("BsblSolver: eta must be positive");
    if (!(cfg_.beta_inv_scale > 0.0))
      throw std::invalid_argument("BsblSolver: beta_inv_scale must be positive");
    if (cfg_.max_iterations < 1)
      throw std::invalid_argument("BsblSolver: max_iterations must be positive");
    if (cfg_.gamma_floor < 0.0)
      throw std::invalid_argument("BsblSolver: gamma_floor must be non-negative");

    multiplier_ = cfg_.logdet_multiplier == LogdetMultiplier::ChannelsP
                      ? static_cast<double>(y_.cols())
                      : static_cast<double>(phi_.cols());
    gram_ = phi_.transpose() * phi_;
    proj_ = phi_.transpose() * y_;

    const double energy = y_.squaredNorm();
    degenerate_ = (energy == 0.0);
    beta_ = degenerate_ ? 0.0 : 1.0 / (cfg_.beta_inv_scale * energy);

    const Index g = part_.blocks();
    state_.gamma = Vector::Zero(g);
    state_.mu.resize(0, y_.cols());
    state_.sigma.resize(0, 0);
    state_.stats.resize(static_cast<std::size_t>(g));
    state_.beta = beta_;
    // With nothing active, C^{-1} = beta I, so S_i = beta Phi_i^T Phi_i and
    // Q_i = beta Phi_i^T Y, and the leave-one-out stats coincide with them.
    for (Index i = 0; i < g; ++i) {
      const Index d = part_.size(i);
      const Index off = part_.offset(i);
      auto& st = state_.stats[static_cast<std::size_t>(i)];
      st.S = beta_ * gram_.block(off, off, d, d);
      st.Q = beta_ * proj_.middleRows(off, d);
      st.s = st.S;
      st.q = st.Q;
    }
  }

  const SolverState& state() const { return state_; }
  const BlockPartition& partition() const { return part_; }
  double multiplier() const { return multiplier_; }
  double beta() const { return beta_; }
  bool degenerate() const { return degenerate_; }

  /// One greedy sweep: per block, the candidate gamma and the cost change of
  /// moving there; returns the lowest cost change (ties to the lowest block
  /// index). A result with delta_cost > -eta means no improving action exists.
  ActionChoice select_action() const {
    ActionChoice best;
    best.delta_cost = std::numeric_limits<double>::infinity();
    if (degenerate_) {
      best.delta_cost = 0.0;
      return best;
    }
    int skipped = 0;
    for (Index i = 0; i < part_.blocks(); ++i) {
      const auto& st = state_.stats[static_cast<std::size_t>(i)];
      const double gold = state_.gamma[i];
      const auto cand = gamma_candidate(st.s, st.q, cfg_);
      if (!cand) {
        ++skipped;
        continue;
      }
      const double gnew = *cand;
      ActionChoice c;
      c.block = i;
      c.gamma_new = gnew;
      if (gold == 0.0 && gnew == 0.0) {
        c.kind = ActionKind::None;
        c.delta_cost = 0.0;
      } else {
        c.kind = gnew == 0.0 ? ActionKind::Delete
                             : (gold == 0.0 ? ActionKind::Add : ActionKind::Reestimate);
        c.delta_cost = block_delta_cost(st.s, st.q, gold, gnew, multiplier_);
      }
      if (c.delta_cost < best.delta_cost) best = c;
    }
    best.skipped_blocks = skipped;
    return best;
  }

  /// Commit a selected action: rank-d downdate of every block's (S, Q) for the
  /// covariance change, then the posterior and leave-one-out refresh over the
  /// new active set.
  void apply_action(const ActionChoice& choice) {
    if (degenerate_) throw std::logic_error("apply_action: all-zero measurements");
    if (choice.kind == ActionKind::None || choice.block < 0)
      throw std::invalid_argument("apply_action: choice holds no action");
    if (choice.block >= part_.blocks())
      throw std::invalid_argument("apply_action: block out of range");
    const Index i = choice.block;
    const Index d = part_.size(i);
    const Index off = part_.offset(i);
    const double gold = state_.gamma[i];
    const double delta = choice.gamma_new - gold;
    if (delta == 0.0) throw std::invalid_argument("apply_action: gamma unchanged");

    auto& sti = state_.stats[static_cast<std::size_t>(i)];

    // C_new = C + delta Phi_i Phi_i^T, so by Woodbury every block feels
    //   S_m -= V_m K V_m^T,  Q_m -= V_m K Q_i
    // with K = (I/delta + S_i)^{-1} and V_m = Phi_m^T C^{-1} Phi_i, all taken
    // at the old model.
    Matrix kmat = sti.S;
    kmat.diagonal().array() += 1.0 / delta;
    Eigen::FullPivLU<Matrix> klu(kmat);
    if (!klu.isInvertible())
      throw std::runtime_error("apply_action: downdate kernel is singular");
    const Matrix k = klu.inverse();
    const Matrix qi_old = sti.Q;

    // V columns for every row at once: beta G[:, i] - beta^2 G[:, A] Sigma G[A, i].
    Matrix v = beta_ * gram_.middleCols(off, d);
    if (!active_rows_.empty()) {
      const Matrix gai = gather_rows(gram_.middleCols(off, d));
      const Matrix w = state_.sigma * gai;
      v.noalias() -= (beta_ * beta_) * (gather_cols(gram_) * w);
    }

    for (Index m = 0; m < part_.blocks(); ++m) {
      const Index dm = part_.size(m);
      const Index om = part_.offset(m);
      auto& stm = state_.stats[static_cast<std::size_t>(m)];
      const Matrix vk = v.middleRows(om, dm) * k;
      stm.S.noalias() -= vk * v.middleRows(om, dm).transpose();
      stm.Q.noalias() -= vk * qi_old;
    }

    state_.gamma[i] = choice.gamma_new;
    rebuild_active();
    rebuild_posterior();
    refresh_leave_one_out();

    state_.cost += choice.delta_cost;
    state_.cost_trace.push_back(state_.cost);
  }

  /// Full greedy loop. Coefficients and signal are identical here; callers
  /// that recovered in a dictionary domain synthesize the signal afterwards.
  RecoveryResult run() {
    const auto t0 = std::chrono::steady_clock::now();
    RecoveryResult res;
    res.gamma = Vector::Zero(part_.blocks());
    if (degenerate_) {
      res.coefficients = Matrix::Zero(phi_.cols(), y_.cols());
      res.signal = res.coefficients;
      res.wall_time_s = seconds_since(t0);
      return res;
    }
    bool converged = false;
    int applied = 0;
    int skipped = 0;
    for (int it = 0; it < cfg_.max_iterations; ++it) {
      const ActionChoice choice = select_action();
      skipped += choice.skipped_blocks;
      // Stop as soon as the best available move no longer buys at least eta.
      if (choice.block < 0 || !(choice.delta_cost <= -cfg_.eta)) {
        converged = true;
        break;
      }
      apply_action(choice);
      ++applied;
    }
    res.coefficients = Matrix::Zero(phi_.cols(), y_.cols());
    for (std::size_t r = 0; r < active_rows_.size(); ++r)
      res.coefficients.row(active_rows_[r]) = state_.mu.row(static_cast<Index>(r));
    res.signal = res.coefficients;
    res.gamma = state_.gamma;
    res.cost_trace = state_.cost_trace;
    res.iterations = applied;
    res.converged = converged;
    res.skipped_blocks = skipped;
    res.wall_time_s = seconds_since(t0);
    return res;
  }

 private:
  static double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

  Matrix gather_rows(const Matrix& m) const {
    Matrix out(static_cast<Index>(active_rows_.size()), m.cols());
    for (std::size_t r = 0; r < active_rows_.size(); ++r)
      out.row(static_cast<Index>(r)) = m.row(active_rows_[r]);
    return out;
  }

  Matrix gather_cols(const Matrix& m) const {
    Matrix out(m.rows(), static_cast<Index>(active_rows_.size()));
    for (std::size_t c = 0; c < active_rows_.size(); ++c)
      out.col(static_cast<Index>(c)) = m.col(active_rows_[c]);
    return out;
  }

  void rebuild_active() {
    state_.active.clear();
    active_rows_.clear();
    active_row_gamma_.clear();
    for (Index i = 0; i < part_.blocks(); ++i) {
      if (state_.gamma[i] > 0.0) {
        state_.active.push_back(i);
        for (Index r = 0; r < part_.size(i); ++r) {
          active_rows_.push_back(part_.offset(i) + r);
          active_row_gamma_.push_back(state_.gamma[i]);
        }
      }
    }
  }

  void rebuild_posterior() {
    const auto na = static_cast<Index>(active_rows_.size());
    if (na == 0) {
      state_.sigma.resize(0, 0);
      state_.mu.resize(0, y_.cols());
      return;
    }
    // Sigma = (Gamma_A^{-1} + beta Phi_A^T Phi_A)^{-1}, mu = beta Sigma Phi_A^T Y.
    Matrix a = beta_ * gather_cols(gather_rows(gram_));
    for (Index r = 0; r < na; ++r)
      a(r, r) += 1.0 / active_row_gamma_[static_cast<std::size_t>(r)];
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("apply_action: posterior precision is not positive definite");
    state_.sigma = llt.solve(Matrix::Identity(na, na));
    state_.mu = beta_ * (state_.sigma * gather_rows(proj_));
  }

  void refresh_leave_one_out() {
    // Active blocks back out their own contribution from the full stats:
    //   s_m = (I - gamma_m S_m)^{-1} S_m,  q_m = (I - gamma_m S_m)^{-1} Q_m.
    for (Index m = 0; m < part_.blocks(); ++m) {
      auto& st = state_.stats[static_cast<std::size_t>(m)];
      const double g = state_.gamma[m];
      if (g == 0.0) {
        st.s = st.S;
        st.q = st.Q;
        continue;
      }
      Matrix b = -g * st.S;
      b.diagonal().array() += 1.0;
      Eigen::FullPivLU<Matrix> lu(b);
      if (!lu.isInvertible())
        throw std::runtime_error("apply_action: leave-one-out recovery is singular");
      st.s = lu.solve(st.S);
      st.q = lu.solve(st.Q);
    }
  }

  Matrix y_;
  Matrix phi_;
  BlockPartition part_;
  SolverConfig cfg_;
  double multiplier_ = 1.0;
  double beta_ = 0.0;
  bool degenerate_ = false;
  Matrix gram_;  // Phi^T Phi, N x N
  Matrix proj_;  // Phi^T Y, N x P
  SolverState state_;
  std::vector<Index> active_rows_;
  std::vector<double> active_row_gamma_;
};

/// Recover one packet: builds Phi_eff = Phi D, runs the solver, synthesizes
/// the signal back through the dictionary.
inline RecoveryResult solve(const Measurements& y, const SensingMatrix& phi,
                            const Dictionary& dict, const BlockPartition& partition,
                            const SolverConfig& config = {}) {
  if (y.rows() != phi.rows)
    throw std::invalid_argument("solve: measurement rows do not match sensing rows");
  if (phi.rows > phi.cols)
    throw std::invalid_argument("solve: sensing matrix has more rows than columns");
  if (dict.size() != phi.cols)
    throw std::invalid_argument("solve: dictionary size does not match sensing columns");
  if (partition.total() != phi.cols)
    throw std::invalid_argument("solve: partition does not cover the coefficient rows");
  const auto t0 = std::chrono::steady_clock::now();
  Matrix phi_eff = phi.dense();
  if (dict.kind() != DictionaryKind::Identity) phi_eff *= dict.dense();
  BsblSolver solver(y.values, std::move(phi_eff), partition, config);
  RecoveryResult res = solver.run();
  res.signal = dict.synthesize(res.coefficients);
  res.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

}  // namespace mbcs
