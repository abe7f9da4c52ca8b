#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "mbcs/dct.hpp"
#include "mbcs/dwt53.hpp"
#include "mbcs/io.hpp"
#include "mbcs/sensing.hpp"
#include "mbcs/solver.hpp"
#include "mbcs/synth.hpp"
#include "mbcs/types.hpp"

namespace mbcs {

/// Squared Frobenius error normalized by the reference energy.
inline double nmse(const Matrix& estimate, const Matrix& reference) {
  if (estimate.rows() != reference.rows() || estimate.cols() != reference.cols())
    throw std::invalid_argument("nmse: estimate and reference dimensions differ");
  const double denom = reference.squaredNorm();
  if (denom == 0.0)
    throw std::invalid_argument("nmse: reference has zero energy, metric undefined");
  return (estimate - reference).squaredNorm() / denom;
}

/// splitmix64-style hash chain so every (context, index, index) triple maps to
/// an independent reproducible stream seed.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  const auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(a) ^ b) ^ c);
}

enum class SignalModel { BlockSparseDct, PulseTrain, FromFile };

struct ExperimentSpec {
  Index n = 256;
  Index p = 8;
  Index block = 8;                               // uniform partition block size
  std::vector<double> cr_list = {0.4, 0.5, 0.6, 0.7, 0.8};
  int trials = 10;
  std::uint64_t seed = 1;
  DictionaryKind dictionary = DictionaryKind::Dct;
  SignalModel signal_model = SignalModel::BlockSparseDct;
  Index k_active = 8;                            // BlockSparseDct
  int pulses = 6;                                // PulseTrain
  std::string signal_path;                       // FromFile
  SolverConfig solver = noiseless_solver_config();
};

struct TrialRecord {
  double cr = 0.0;
  int trial = 0;
  double nmse = 0.0;
  double wall_time_s = 0.0;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

inline void validate_spec(const ExperimentSpec& spec) {
  if (spec.n < 1 || spec.p < 1 || spec.block < 1)
    throw std::invalid_argument("ExperimentSpec: dimensions must be positive");
  if (spec.trials < 1) throw std::invalid_argument("ExperimentSpec: trials must be >= 1");
  if (spec.cr_list.empty())
    throw std::invalid_argument("ExperimentSpec: need at least one compression ratio");
  for (double cr : spec.cr_list) {
    if (!(cr > 0.0 && cr < 1.0))
      throw std::invalid_argument("ExperimentSpec: compression ratios must lie in (0, 1)");
    rows_for_ratio(spec.n, cr);  // rejects ratios that leave fewer than two rows
  }
  const Index blocks = BlockPartition::uniform(spec.n, spec.block).blocks();
  if (spec.signal_model == SignalModel::BlockSparseDct &&
      (spec.k_active < 0 || spec.k_active > blocks))
    throw std::invalid_argument("ExperimentSpec: k_active must lie in [0, block count]");
  if (spec.signal_model == SignalModel::PulseTrain && spec.pulses < 1)
    throw std::invalid_argument("ExperimentSpec: pulses must be >= 1");
  if (spec.signal_model == SignalModel::FromFile && spec.signal_path.empty())
    throw std::invalid_argument("ExperimentSpec: file-based signal model needs a path");
}

inline int thread_budget(std::size_t jobs) {
  unsigned n = std::thread::hardware_concurrency();
  if (n == 0) n = 1;
  if (const char* env = std::getenv("MBSBL_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1)
      n = static_cast<unsigned>(std::min<long>(v, 1024));
  }
  return static_cast<int>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

inline Packet trial_signal(const ExperimentSpec& spec, const Packet* shared,
                           std::uint64_t seed) {
  switch (spec.signal_model) {
    case SignalModel::BlockSparseDct:
      return synth_block_sparse(spec.n, spec.p, spec.block, spec.k_active, seed).packet;
    case SignalModel::PulseTrain:
      return synth_pulse_train(spec.n, spec.p, spec.pulses, seed);
    case SignalModel::FromFile:
      return *shared;
  }
  throw std::logic_error("trial_signal: unhandled signal model");
}

}  // namespace detail

/// One sweep of the recovery protocol: for every (cr, trial) pair a fresh
/// seeded Bernoulli matrix, streaming compression, and solver recovery.
/// Records are ordered by (cr index, trial index) regardless of the pool's
/// completion order; MBSBL_THREADS caps the worker count.
inline std::vector<TrialRecord> run_sweep(const ExperimentSpec& spec) {
  detail::validate_spec(spec);

  Packet shared;
  const Packet* shared_ptr = nullptr;
  if (spec.signal_model == SignalModel::FromFile) {
    shared = load_packet(spec.signal_path);
    if (shared.length() != spec.n || shared.channels() != spec.p)
      throw std::invalid_argument("run_sweep: signal file dimensions do not match the spec");
    shared_ptr = &shared;
  }

  const BlockPartition part = BlockPartition::uniform(spec.n, spec.block);
  const Dictionary dict = spec.dictionary == DictionaryKind::Dct ? Dictionary::dct(spec.n)
                                                                 : Dictionary::identity(spec.n);

  const std::size_t jobs = spec.cr_list.size() * static_cast<std::size_t>(spec.trials);
  std::vector<TrialRecord> records(jobs);
  std::atomic<std::size_t> cursor{0};
  std::atomic<bool> failed{false};
  std::string error_text;
  std::mutex error_mutex;

  const auto worker = [&]() {
    for (;;) {
      const std::size_t at = cursor.fetch_add(1);
      if (at >= jobs || failed.load()) return;
      const std::size_t ci = at / static_cast<std::size_t>(spec.trials);
      const int trial = static_cast<int>(at % static_cast<std::size_t>(spec.trials));
      try {
        const double cr = spec.cr_list[ci];
        const Index m = rows_for_ratio(spec.n, cr);
        const std::uint64_t base =
            mix_seed(spec.seed, static_cast<std::uint64_t>(ci), static_cast<std::uint64_t>(trial));
        const Packet x = detail::trial_signal(spec, shared_ptr, mix_seed(base, 0xA, 0));
        const SensingMatrix phi = generate_bernoulli(m, spec.n, mix_seed(base, 0xB, 0));
        const Measurements y = compress_streaming(x, phi);
        const RecoveryResult res = solve(y, phi, dict, part, spec.solver);
        records[at] = TrialRecord{cr,       trial,          nmse(res.signal, x.samples),
                                  res.wall_time_s, res.iterations, res.converged};
      } catch (const std::exception& e) {
        const std::lock_guard<std::mutex> lock(error_mutex);
        if (!failed.exchange(true)) error_text = e.what();
        return;
      }
    }
  };

  const int threads = detail::thread_budget(jobs);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failed.load()) throw std::runtime_error("run_sweep: trial failed: " + error_text);
  return records;
}

struct CrSummary {
  double cr = 0.0;
  double mean_nmse = 0.0;
  double mean_wall_time_s = 0.0;
  double mean_iterations = 0.0;
  int converged = 0;
  int trials = 0;
};

/// Per-ratio means, in sweep order. Records must be a whole sweep (grouped in
/// runs of `trials` entries, as run_sweep emits them).
inline std::vector<CrSummary> summarize(const std::vector<TrialRecord>& records, int trials) {
  if (trials < 1) throw std::invalid_argument("summarize: trials must be >= 1");
  if (records.empty() || records.size() % static_cast<std::size_t>(trials) != 0)
    throw std::invalid_argument("summarize: record count is not a whole number of ratio groups");
  std::vector<CrSummary> out;
  for (std::size_t at = 0; at < records.size(); at += static_cast<std::size_t>(trials)) {
    CrSummary s;
    s.cr = records[at].cr;
    s.trials = trials;
    for (int t = 0; t < trials; ++t) {
      const TrialRecord& r = records[at + static_cast<std::size_t>(t)];
      s.mean_nmse += r.nmse;
      s.mean_wall_time_s += r.wall_time_s;
      s.mean_iterations += r.iterations;
      s.converged += r.converged ? 1 : 0;
    }
    s.mean_nmse /= trials;
    s.mean_wall_time_s /= trials;
    s.mean_iterations /= trials;
    out.push_back(s);
  }
  return out;
}

/// Plot-ready trial table. Formats are fixed so identical records serialize to
/// identical bytes; `include_timing = false` zeroes the wall-time column for
/// run-to-run reproducible output.
inline void write_trial_csv(std::ostream& os, const std::vector<TrialRecord>& records,
                            bool include_timing = true) {
  os << "cr,trial,nmse,wall_time_s,iterations,converged\n";
  char buf[192];
  for (const TrialRecord& r : records) {
    std::snprintf(buf, sizeof buf, "%.6g,%d,%.9e,%.6f,%d,%d\n", r.cr, r.trial, r.nmse,
                  include_timing ? r.wall_time_s : 0.0, r.iterations, r.converged ? 1 : 0);
    os << buf;
  }
}

inline nlohmann::json sweep_summary_json(const ExperimentSpec& spec,
                                         const std::vector<TrialRecord>& records,
                                         bool include_timing = true) {
  nlohmann::json j;
  j["n"] = spec.n;
  j["p"] = spec.p;
  j["block"] = spec.block;
  j["trials"] = spec.trials;
  j["seed"] = spec.seed;
  auto per_cr = nlohmann::json::array();
  for (const CrSummary& s : summarize(records, spec.trials)) {
    nlohmann::json e;
    e["cr"] = s.cr;
    e["m"] = rows_for_ratio(spec.n, s.cr);
    e["mean_nmse"] = s.mean_nmse;
    e["mean_iterations"] = s.mean_iterations;
    e["mean_wall_time_s"] = include_timing ? s.mean_wall_time_s : 0.0;
    e["converged"] = s.converged;
    per_cr.push_back(std::move(e));
  }
  j["per_cr"] = std::move(per_cr);
  return j;
}

struct CompressorEntry {
  std::string name;
  OperationCounter ops;  // totals across all trials and channels
};

struct CompressorReport {
  Index n = 0;
  Index m = 0;
  Index channels = 0;
  int levels = 0;
  int trials = 0;
  std::uint64_t seed = 0;
  std::vector<CompressorEntry> entries;
};

/// Feeds identical integer packets through the two streaming compressors and
/// the wavelet baseline and tallies their arithmetic. The streaming paths
/// finish with the last pushed sample (no post-acquisition work); the wavelet
/// transform only starts once the packet is complete, so its whole cost is
/// post-acquisition, the latency analog of the hardware comparison.
inline CompressorReport compare_compressors(Index n, int levels, int trials, std::uint64_t seed,
                                            Index channels = 1, double cr = 0.6) {
  if (trials < 1) throw std::invalid_argument("compare_compressors: trials must be >= 1");
  if (channels < 1) throw std::invalid_argument("compare_compressors: channels must be >= 1");
  detail::dwt53_check(static_cast<std::size_t>(n), levels);

  CompressorReport report;
  report.n = n;
  report.m = rows_for_ratio(n, cr);
  report.channels = channels;
  report.levels = levels;
  report.trials = trials;
  report.seed = seed;
  report.entries = {{"cs-bernoulli", {}}, {"cs-gaussian", {}}, {"dwt53", {}}};

  const auto add = [](OperationCounter& into, const OperationCounter& from) {
    into.additions += from.additions;
    into.multiplications += from.multiplications;
    into.post_acquisition_ops += from.post_acquisition_ops;
  };

  for (int t = 0; t < trials; ++t) {
    std::mt19937_64 rng(mix_seed(seed, 0, static_cast<std::uint64_t>(t)));
    std::uniform_int_distribution<int> amp(-512, 511);
    Matrix x(n, channels);
    for (Index r = 0; r < n; ++r)
      for (Index c = 0; c < channels; ++c) x(r, c) = static_cast<double>(amp(rng));
    const Packet packet(x);

    const SensingMatrix bern =
        generate_bernoulli(report.m, n, mix_seed(seed, 1, static_cast<std::uint64_t>(t)));
    const SensingMatrix gauss =
        generate_gaussian(report.m, n, mix_seed(seed, 2, static_cast<std::uint64_t>(t)));

    OperationCounter ops;
    compress_streaming(packet, bern, &ops);
    add(report.entries[0].ops, ops);

    ops = {};
    compress_streaming(packet, gauss, &ops);
    add(report.entries[1].ops, ops);

    ops = {};
    for (Index c = 0; c < channels; ++c) {
      std::vector<std::int64_t> col(static_cast<std::size_t>(n));
      for (Index r = 0; r < n; ++r)
        col[static_cast<std::size_t>(r)] = static_cast<std::int64_t>(x(r, c));
      dwt53_forward(col, levels, &ops);
    }
    add(report.entries[2].ops, ops);
  }
  return report;
}

inline nlohmann::json compressor_report_json(const CompressorReport& report) {
  nlohmann::json j;
  j["n"] = report.n;
  j["m"] = report.m;
  j["channels"] = report.channels;
  j["levels"] = report.levels;
  j["trials"] = report.trials;
  j["seed"] = report.seed;
  auto rows = nlohmann::json::array();
  for (const CompressorEntry& e : report.entries) {
    nlohmann::json r;
    r["compressor"] = e.name;
    r["additions"] = e.ops.additions;
    r["multiplications"] = e.ops.multiplications;
    r["post_acquisition_ops"] = e.ops.post_acquisition_ops;
    rows.push_back(std::move(r));
  }
  j["compressors"] = std::move(rows);
  return j;
}

inline void write_compressor_markdown(std::ostream& os, const CompressorReport& report) {
  os << "Op counts over " << report.trials << " integer packet(s), N=" << report.n
     << ", M=" << report.m << ", channels=" << report.channels
     << ", wavelet levels=" << report.levels << ".\n"
     << "Post-acquisition ops are the latency analog: work that can only start\n"
     << "after the last sample of the packet has been acquired.\n\n";
  os << "| compressor | additions | multiplications | post-acquisition ops |\n";
  os << "|---|---:|---:|---:|\n";
  for (const CompressorEntry& e : report.entries)
    os << "| " << e.name << " | " << e.ops.additions << " | " << e.ops.multiplications << " | "
       << e.ops.post_acquisition_ops << " |\n";
}

}  // namespace mbcs
