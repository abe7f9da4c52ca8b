#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "oracles.hpp"

using namespace mbcs;

namespace {

SolverConfig test_config(double beta_scale = 1e-3) {
  SolverConfig cfg;
  cfg.beta_inv_scale = beta_scale;
  return cfg;
}

/// Embed the active-row posterior into full N x P / N x N zero matrices so it
/// can be compared against the gamma-safe dense forms.
std::pair<Matrix, Matrix> embed_posterior(const BsblSolver& solver, Index channels) {
  const auto& st = solver.state();
  const auto& part = solver.partition();
  std::vector<Index> rows;
  for (Index b : st.active)
    for (Index r = 0; r < part.size(b); ++r) rows.push_back(part.offset(b) + r);
  Matrix mu = Matrix::Zero(part.total(), channels);
  Matrix sigma = Matrix::Zero(part.total(), part.total());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    mu.row(rows[i]) = st.mu.row(static_cast<Index>(i));
    for (std::size_t j = 0; j < rows.size(); ++j)
      sigma(rows[i], rows[j]) = st.sigma(static_cast<Index>(i), static_cast<Index>(j));
  }
  return {mu, sigma};
}

}  // namespace

TEST_CASE("candidate variance: scalar hand case", "[solver]") {
  Matrix s(1, 1), q(1, 1);
  s << 2.0;
  q << 3.0;
  const auto g = gamma_candidate(s, q, SolverConfig{});
  REQUIRE(g.has_value());
  CHECK_THAT(*g, Catch::Matchers::WithinRel(1.75, 1e-9));
}

TEST_CASE("candidate variance: zero correlation clamps to zero", "[solver]") {
  Matrix s = Matrix::Identity(3, 3) * 2.0;
  Matrix q = Matrix::Zero(3, 2);
  const auto g = gamma_candidate(s, q, SolverConfig{});
  REQUIRE(g.has_value());
  CHECK(*g == 0.0);
}

TEST_CASE("candidate variance matches the dense formula", "[solver]") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    Matrix half(4, 9);
    for (Index r = 0; r < 4; ++r)
      for (Index c = 0; c < 9; ++c) half(r, c) = gauss(rng);
    const Matrix s = half * half.transpose();  // SPD with prob. 1
    Matrix q(4, 8);
    for (Index r = 0; r < 4; ++r)
      for (Index c = 0; c < 8; ++c) q(r, c) = gauss(rng);
    const auto got = gamma_candidate(s, q, SolverConfig{});
    REQUIRE(got.has_value());
    const double want = oracle::dense_gamma_update(s, q);
    if (want > 1e-12)
      CHECK_THAT(*got, Catch::Matchers::WithinRel(want, 1e-6));
    else
      CHECK(*got == 0.0);
  }
}

TEST_CASE("candidate variance skips unusable statistics", "[solver]") {
  CHECK_FALSE(gamma_candidate(Matrix::Zero(2, 2), Matrix::Ones(2, 1), SolverConfig{}).has_value());
  Matrix bad = Matrix::Identity(2, 2);
  bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_FALSE(gamma_candidate(bad, Matrix::Ones(2, 1), SolverConfig{}).has_value());
}

TEST_CASE("block cost change: identity case is zero", "[solver]") {
  Matrix s = Matrix::Identity(2, 2);
  Matrix q = Matrix::Ones(2, 3);
  CHECK(block_delta_cost(s, q, 0.0, 0.0, 3.0) == 0.0);
}

TEST_CASE("block cost change: scalar hand case", "[solver]") {
  Matrix s(1, 1), q(1, 1);
  s << 2.0;
  q << 3.0;
  const double dl = block_delta_cost(s, q, 0.0, 1.75, 1.0);
  CHECK_THAT(dl, Catch::Matchers::WithinAbs(std::log(4.5) - 3.5, 1e-9));
  CHECK_THAT(dl, Catch::Matchers::WithinAbs(-1.995923, 1e-6));
}

TEST_CASE("adding the candidate block decreases the dense cost by the same amount", "[solver]") {
  // Brute-force check of the selection arithmetic: the reported cost change
  // for an add equals the dense cost difference of the whole model.
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL, 4ULL}) {
    const auto prob = oracle::make_problem(10, 12, 3, 3, 2, seed);
    BsblSolver solver(prob.y, prob.phi, prob.part, test_config(1e-2));
    const double beta = solver.beta();
    const auto choice = solver.select_action();
    REQUIRE(choice.kind == ActionKind::Add);
    REQUIRE(choice.delta_cost < 0.0);

    Vector gamma = Vector::Zero(prob.part.blocks());
    gamma[choice.block] = choice.gamma_new;
    const double dense_delta = oracle::dense_cost_relative(prob.phi, prob.y, prob.part, gamma,
                                                           beta, solver.multiplier());
    CHECK_THAT(choice.delta_cost, Catch::Matchers::WithinRel(dense_delta, 1e-8));
  }
}

TEST_CASE("initial statistics: identity sensing, one block", "[solver]") {
  const Index n = 6;
  Matrix y(n, 2);
  y.setRandom();
  BsblSolver solver(y, Matrix::Identity(n, n), BlockPartition(std::vector<Index>{n}),
                    test_config(1e-2));
  const double beta = solver.beta();
  const auto& st = solver.state().stats[0];
  CHECK(oracle::rel_err(st.S, beta * Matrix::Identity(n, n)) < 1e-14);
  CHECK(oracle::rel_err(st.Q, beta * y) < 1e-14);
  CHECK(st.s == st.S);
  CHECK(st.q == st.Q);
}

TEST_CASE("initial statistics match the dense leave-one-out oracle", "[solver]") {
  const auto prob = oracle::make_problem(8, 12, 2, 3, 2, 11);
  BsblSolver solver(prob.y, prob.phi, prob.part, test_config(1e-2));
  const double beta = solver.beta();
  const Vector gamma = Vector::Zero(prob.part.blocks());
  for (Index i = 0; i < prob.part.blocks(); ++i) {
    const auto [s, q] = oracle::dense_loo_stats(prob.phi, prob.y, prob.part, gamma, beta, i);
    const auto& st = solver.state().stats[static_cast<std::size_t>(i)];
    CHECK(oracle::rel_err(st.s, s) < 1e-10);
    CHECK(oracle::rel_err(st.q, q) < 1e-10);
  }
}

TEST_CASE("selection picks the single improving block", "[solver]") {
  // One strong block hidden in the data: selection must find exactly it.
  const auto prob = oracle::make_problem(12, 16, 2, 4, 1, 5);
  BsblSolver solver(prob.y, prob.phi, prob.part, test_config(1e-2));
  const auto choice = solver.select_action();
  REQUIRE(choice.kind == ActionKind::Add);
  // the generator's active block is where the truth has energy
  Index truth_block = -1;
  for (Index b = 0; b < prob.part.blocks(); ++b)
    if (prob.truth.middleRows(prob.part.offset(b), prob.part.size(b)).norm() > 0)
      truth_block = b;
  CHECK(choice.block == truth_block);
}

TEST_CASE("selection ranks blocks like the dense cost oracle", "[solver]") {
  const auto prob = oracle::make_problem(14, 12, 2, 4, 2, 23);
  BsblSolver solver(prob.y, prob.phi, prob.part, test_config(1e-2));
  const double beta = solver.beta();

  // dense ranking over the 3 blocks
  double best = std::numeric_limits<double>::infinity();
  Index best_block = -1;
  for (Index i = 0; i < prob.part.blocks(); ++i) {
    const auto& st = solver.state().stats[static_cast<std::size_t>(i)];
    const auto cand = gamma_candidate(st.s, st.q, test_config(1e-2));
    REQUIRE(cand.has_value());
    if (*cand == 0.0) continue;
    Vector gamma = Vector::Zero(prob.part.blocks());
    gamma[i] = *cand;
    const double dl = oracle::dense_cost_relative(prob.phi, prob.y, prob.part, gamma, beta,
                                                  solver.multiplier());
    if (dl < best) {
      best = dl;
      best_block = i;
    }
  }
  const auto choice = solver.select_action();
  CHECK(choice.block == best_block);
  CHECK_THAT(choice.delta_cost, Catch::Matchers::WithinRel(best, 1e-7));
}

TEST_CASE("convergence is signalled when no action improves", "[solver]") {
  const auto prob = oracle::make_problem(10, 12, 2, 3, 2, 31);
  BsblSolver solver(prob.y, prob.phi, prob.part, test_config(1e-2));
  for (int it = 0; it < 200; ++it) {
    const auto choice = solver.select_action();
    if (!(choice.delta_cost <= -1e-5)) {
      SUCCEED("converged");
      return;
    }
    solver.apply_action(choice);
  }
  FAIL("solver never signalled convergence");
}

TEST_CASE("add then delete returns to the prior state", "[solver]") {
  const auto prob = oracle::make_problem(10, 12, 3, 3, 2, 7);
  BsblSolver solver(prob.y, prob.phi, prob.part, test_config(1e-2));
  const auto before = solver.state();

  const auto add = solver.select_action();
  REQUIRE(add.kind == ActionKind::Add);
  solver.apply_action(add);

  ActionChoice del;
  del.block = add.block;
  del.kind = ActionKind::Delete;
  del.gamma_new = 0.0;
  const auto& st = solver.state().stats[static_cast<std::size_t>(add.block)];
  del.delta_cost = block_delta_cost(st.s, st.q, add.gamma_new, 0.0, solver.multiplier());
  solver.apply_action(del);

  const auto& after = solver.state();
  REQUIRE(after.active.empty());
  for (Index i = 0; i < prob.part.blocks(); ++i) {
    const auto& a = after.stats[static_cast<std::size_t>(i)];
    const auto& b = before.stats[static_cast<std::size_t>(i)];
    CHECK(oracle::rel_err(a.S, b.S) < 1e-8);
    CHECK(oracle::rel_err(a.Q, b.Q) < 1e-8);
    CHECK(oracle::rel_err(a.s, b.s) < 1e-8);
    CHECK(oracle::rel_err(a.q, b.q) < 1e-8);
  }
  CHECK(std::abs(after.cost) < 1e-8 * std::abs(add.delta_cost));
}

TEST_CASE("incremental statistics track the dense oracle through a full run", "[solver]") {
  for (std::uint64_t seed : {3ULL, 8ULL, 15ULL}) {
    const auto prob = oracle::make_problem(12, 18, 2, 3, 3, seed);
    BsblSolver solver(prob.y, prob.phi, prob.part, test_config(1e-2));
    const double beta = solver.beta();
    for (int it = 0; it < 60; ++it) {
      const auto choice = solver.select_action();
      if (!(choice.delta_cost <= -1e-5)) break;
      solver.apply_action(choice);

      const auto& st = solver.state();
      for (Index i = 0; i < prob.part.blocks(); ++i) {
        const auto [s_ref, q_ref] =
            oracle::dense_loo_stats(prob.phi, prob.y, prob.part, st.gamma, beta, i);
        const auto [S_ref, Q_ref] =
            oracle::dense_full_stats(prob.phi, prob.y, prob.part, st.gamma, beta, i);
        const auto& bs = st.stats[static_cast<std::size_t>(i)];
        CHECK(oracle::rel_err(bs.s, s_ref) < 1e-8);
        CHECK(oracle::rel_err(bs.q, q_ref) < 1e-8);
        CHECK(oracle::rel_err(bs.S, S_ref) < 1e-8);
        CHECK(oracle::rel_err(bs.Q, Q_ref) < 1e-8);
      }
      const auto [mu, sigma] = embed_posterior(solver, prob.y.cols());
      const auto [mu_ref, sigma_ref] =
          oracle::dense_posterior(prob.phi, prob.y, prob.part, st.gamma, beta);
      CHECK(oracle::rel_err(mu, mu_ref) < 1e-8);
      CHECK(oracle::rel_err(sigma, sigma_ref) < 1e-8);
    }
  }
}

TEST_CASE("statistic symmetry and inactive identity hold during a run", "[solver]") {
  const auto prob = oracle::make_problem(12, 16, 2, 4, 2, 41);
  BsblSolver solver(prob.y, prob.phi, prob.part, test_config(1e-2));
  for (int it = 0; it < 40; ++it) {
    const auto& st = solver.state();
    for (Index i = 0; i < prob.part.blocks(); ++i) {
      const auto& bs = st.stats[static_cast<std::size_t>(i)];
      CHECK((bs.S - bs.S.transpose()).cwiseAbs().maxCoeff() < 1e-10 * (1.0 + bs.S.norm()));
      if (st.gamma[i] == 0.0) {
        CHECK(bs.s == bs.S);
        CHECK(bs.q == bs.Q);
      }
    }
    const auto choice = solver.select_action();
    if (!(choice.delta_cost <= -1e-5)) break;
    solver.apply_action(choice);
  }
}

TEST_CASE("deleting the only active block restores the initial state", "[solver]") {
  const auto prob = oracle::make_problem(10, 12, 2, 3, 1, 13);
  BsblSolver solver(prob.y, prob.phi, prob.part, test_config(1e-2));
  const auto init = solver.state();
  const auto add = solver.select_action();
  REQUIRE(add.kind == ActionKind::Add);
  solver.apply_action(add);
  REQUIRE(solver.state().active.size() == 1);

  ActionChoice del;
  del.block = add.block;
  del.kind = ActionKind::Delete;
  del.gamma_new = 0.0;
  const auto& st = solver.state().stats[static_cast<std::size_t>(add.block)];
  del.delta_cost = block_delta_cost(st.s, st.q, add.gamma_new, 0.0, solver.multiplier());
  solver.apply_action(del);

  const auto& now = solver.state();
  CHECK(now.active.empty());
  CHECK(now.mu.rows() == 0);
  CHECK(now.sigma.rows() == 0);
  for (Index i = 0; i < prob.part.blocks(); ++i) {
    const auto& a = now.stats[static_cast<std::size_t>(i)];
    const auto& b = init.stats[static_cast<std::size_t>(i)];
    CHECK(oracle::rel_err(a.S, b.S) < 1e-10);
    CHECK(oracle::rel_err(a.Q, b.Q) < 1e-10);
  }
}

TEST_CASE("noiseless single-block problem is recovered", "[solver]") {
  // ground truth with one active block, M comfortably above 4 block sizes
  const auto prob = oracle::make_problem(16, 12, 2, 3, 1, 19);
  BsblSolver solver(prob.y, prob.phi, prob.part, test_config(1e-6));
  const auto res = solver.run();
  REQUIRE(res.converged);
  CHECK(nmse(res.coefficients, prob.truth) < 1e-6);
}

TEST_CASE("zero measurements short-circuit", "[solver]") {
  const auto phi = generate_bernoulli(8, 16, 1);
  const auto res = solve(Measurements(Matrix::Zero(8, 2)), phi, Dictionary::identity(16),
                         BlockPartition::uniform(16, 4), SolverConfig{});
  CHECK(res.iterations == 0);
  CHECK(res.converged);
  CHECK(res.signal == Matrix::Zero(16, 2));
  CHECK(res.gamma == Vector::Zero(4));
  CHECK(res.cost_trace.empty());
}

TEST_CASE("protocol-scale recovery stays under the packet duration", "[solver]") {
  const auto sig = synth_block_sparse(256, 8, 8, 8, 77);
  const auto phi = generate_bernoulli(102, 256, 78);
  const auto y = compress_streaming(sig.packet, phi);
  const auto res = solve(y, phi, Dictionary::dct(256), BlockPartition::uniform(256, 8),
                         noiseless_solver_config());
  CHECK(res.wall_time_s < 1.0);
  CHECK(nmse(res.signal, sig.packet.samples) < 1e-3);
}

TEST_CASE("identical channels recover identical columns", "[solver]") {
  const auto base = oracle::make_problem(14, 16, 1, 4, 2, 57);
  Matrix y(14, 4);
  for (Index c = 0; c < 4; ++c) y.col(c) = base.y.col(0);
  BsblSolver solver(y, base.phi, base.part, test_config(1e-4));
  const auto res = solver.run();
  for (Index c = 1; c < 4; ++c)
    CHECK((res.coefficients.col(c) - res.coefficients.col(0)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("cost trace decreases and matches the dense cost", "[solver]") {
  const auto prob = oracle::make_problem(16, 24, 3, 4, 3, 91);
  BsblSolver solver(prob.y, prob.phi, prob.part, test_config(1e-3));
  const double beta = solver.beta();
  const auto res = solver.run();
  REQUIRE_FALSE(res.cost_trace.empty());
  for (std::size_t i = 1; i < res.cost_trace.size(); ++i)
    CHECK(res.cost_trace[i] <= res.cost_trace[i - 1] + 1e-9 * std::abs(res.cost_trace[i - 1]));
  const double dense_final = oracle::dense_cost_relative(prob.phi, prob.y, prob.part, res.gamma,
                                                         beta, solver.multiplier());
  CHECK_THAT(res.cost_trace.back(), Catch::Matchers::WithinRel(dense_final, 1e-6));
}

TEST_CASE("both logdet multipliers run and stay monotone", "[solver]") {
  for (auto mult : {LogdetMultiplier::ChannelsP, LogdetMultiplier::RowsN}) {
    auto cfg = test_config(1e-3);
    cfg.logdet_multiplier = mult;
    const auto prob = oracle::make_problem(16, 24, 2, 4, 3, 101);
    BsblSolver solver(prob.y, prob.phi, prob.part, cfg);
    const double want = mult == LogdetMultiplier::ChannelsP ? 2.0 : 24.0;
    CHECK(solver.multiplier() == want);
    const auto res = solver.run();
    for (std::size_t i = 1; i < res.cost_trace.size(); ++i)
      CHECK(res.cost_trace[i] <= res.cost_trace[i - 1] + 1e-9 * std::abs(res.cost_trace[i - 1]));
  }
}

TEST_CASE("solver rejects malformed inputs", "[solver]") {
  const Matrix y = Matrix::Ones(6, 2);
  const Matrix phi = Matrix::Ones(6, 8);
  const auto part = BlockPartition::uniform(8, 4);
  CHECK_THROWS_AS(BsblSolver(y, Matrix::Ones(5, 8), part, SolverConfig{}),
                  std::invalid_argument);
  CHECK_THROWS_AS(BsblSolver(y, phi, BlockPartition::uniform(6, 3), SolverConfig{}),
                  std::invalid_argument);
  SolverConfig bad;
  bad.eta = 0.0;
  CHECK_THROWS_AS(BsblSolver(y, phi, part, bad), std::invalid_argument);
  bad = SolverConfig{};
  bad.beta_inv_scale = 0.0;
  CHECK_THROWS_AS(BsblSolver(y, phi, part, bad), std::invalid_argument);
  bad = SolverConfig{};
  bad.max_iterations = 0;
  CHECK_THROWS_AS(BsblSolver(y, phi, part, bad), std::invalid_argument);

  BsblSolver ok(y, phi, part, SolverConfig{});
  ActionChoice none;
  CHECK_THROWS_AS(ok.apply_action(none), std::invalid_argument);
}

TEST_CASE("solve validates the assembled pieces", "[solver]") {
  const auto phi = generate_bernoulli(8, 16, 3);
  const Measurements y(Matrix::Ones(8, 1));
  CHECK_THROWS_AS(solve(Measurements(Matrix::Ones(7, 1)), phi, Dictionary::dct(16),
                        BlockPartition::uniform(16, 4), SolverConfig{}),
                  std::invalid_argument);
  CHECK_THROWS_AS(solve(y, phi, Dictionary::dct(12), BlockPartition::uniform(16, 4),
                        SolverConfig{}),
                  std::invalid_argument);
  CHECK_THROWS_AS(solve(y, phi, Dictionary::dct(16), BlockPartition::uniform(12, 4),
                        SolverConfig{}),
                  std::invalid_argument);
}
