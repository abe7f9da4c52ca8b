// Command-line front end: synthesize test packets, compress them through a
// seeded sensing matrix, recover them, and run the benchmark sweeps. Every
// subcommand is deterministic given its flags; all randomness is seeded.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mbcs/mbcs.hpp"

namespace {

mbcs::MatrixFileFormat parse_format(const std::string& name) {
  if (name == "bin") return mbcs::MatrixFileFormat::Binary;
  if (name == "csv") return mbcs::MatrixFileFormat::Csv;
  throw std::invalid_argument("unknown format '" + name + "'");
}

mbcs::SensingKind parse_matrix_kind(const std::string& name) {
  if (name == "bernoulli") return mbcs::SensingKind::BernoulliTwoOnes;
  if (name == "gaussian") return mbcs::SensingKind::Gaussian;
  throw std::invalid_argument("unknown sensing matrix kind '" + name + "'");
}

mbcs::SensingMatrix make_matrix(mbcs::SensingKind kind, mbcs::Index m, mbcs::Index n,
                                std::uint64_t seed) {
  return kind == mbcs::SensingKind::BernoulliTwoOnes ? mbcs::generate_bernoulli(m, n, seed)
                                                     : mbcs::generate_gaussian(m, n, seed);
}

mbcs::Dictionary parse_dictionary(const std::string& name, mbcs::Index n) {
  if (name == "dct") return mbcs::Dictionary::dct(n);
  if (name == "identity") return mbcs::Dictionary::identity(n);
  throw std::invalid_argument("unknown dictionary '" + name + "'");
}

mbcs::LogdetMultiplier parse_logdet(const std::string& name) {
  if (name == "p") return mbcs::LogdetMultiplier::ChannelsP;
  if (name == "n") return mbcs::LogdetMultiplier::RowsN;
  throw std::invalid_argument("unknown logdet multiplier '" + name + "'");
}

void emit(const nlohmann::json& j) { std::cout << j.dump() << "\n"; }

struct SynthArgs {
  std::string model = "block-sparse";
  std::int64_t n = 256, p = 8, d = 8, k = 8;
  int pulses = 6;
  std::uint64_t seed = 1;
  double rate = 256.0;
  std::string out, coeffs, format = "bin";
};

void run_synth(const SynthArgs& a) {
  const auto fmt = parse_format(a.format);
  if (a.model == "block-sparse") {
    const auto sig = mbcs::synth_block_sparse(a.n, a.p, a.d, a.k, a.seed);
    mbcs::save_packet(a.out, mbcs::Packet(sig.packet.samples, a.rate), fmt);
    if (!a.coeffs.empty()) mbcs::save_matrix(a.coeffs, sig.coefficients, fmt);
    emit({{"written", a.out}, {"n", a.n}, {"p", a.p}, {"active_blocks", sig.blocks}});
    return;
  }
  if (!a.coeffs.empty())
    throw std::invalid_argument("--coeffs applies only to the block-sparse model");
  const auto pkt = mbcs::synth_pulse_train(a.n, a.p, a.pulses, a.seed);
  mbcs::save_packet(a.out, mbcs::Packet(pkt.samples, a.rate), fmt);
  emit({{"written", a.out}, {"n", a.n}, {"p", a.p}});
}

struct CompressArgs {
  std::string input;
  double cr = -1.0;
  std::int64_t m = -1;
  std::string matrix = "bernoulli";
  std::uint64_t seed = 1;
  std::string out, ops_path, export_matrix, format = "bin";
  bool header = false;
};

void run_compress(const CompressArgs& a) {
  const mbcs::Packet pkt = mbcs::load_packet(a.input, a.header);
  const mbcs::Index n = pkt.length();
  if ((a.cr < 0.0) == (a.m < 0)) throw std::invalid_argument("give exactly one of --cr or --m");
  const mbcs::Index m = a.m >= 0 ? static_cast<mbcs::Index>(a.m) : mbcs::rows_for_ratio(n, a.cr);
  if (m > n) throw std::invalid_argument("more measurements than samples makes no compression");
  const auto phi = make_matrix(parse_matrix_kind(a.matrix), m, n, a.seed);

  mbcs::OperationCounter ops;
  const mbcs::Measurements y = mbcs::compress_streaming(pkt, phi, &ops);
  mbcs::save_measurements(a.out, y, parse_format(a.format));

  nlohmann::json ops_json = {{"kind", a.matrix},
                             {"m", m},
                             {"n", n},
                             {"p", pkt.channels()},
                             {"seed", a.seed},
                             {"additions", ops.additions},
                             {"multiplications", ops.multiplications},
                             {"post_acquisition_ops", ops.post_acquisition_ops}};
  if (!a.ops_path.empty()) {
    std::ofstream os(a.ops_path);
    if (!os) throw std::runtime_error("cannot open for writing: " + a.ops_path);
    os << ops_json.dump(2) << "\n";
  }
  if (!a.export_matrix.empty()) mbcs::save_sensing(a.export_matrix, phi);
  ops_json["written"] = a.out;
  emit(ops_json);
}

struct RecoverArgs {
  std::string input;
  std::int64_t n = 0, d = 8;
  std::string matrix = "bernoulli";
  std::uint64_t seed = 1;
  std::string dict = "dct";
  std::string out, result_path, truth, format = "bin";
  bool header = false;
  double eta = 1e-5;
  double beta_scale = 0.01;
  std::int64_t max_iter = 1000;
  std::string logdet = "p";
};

void run_recover(const RecoverArgs& a) {
  const mbcs::Measurements y = mbcs::load_measurements(a.input, a.header);
  const auto phi = make_matrix(parse_matrix_kind(a.matrix), y.rows(), a.n, a.seed);
  const auto dict = parse_dictionary(a.dict, a.n);
  const auto part = mbcs::BlockPartition::uniform(a.n, a.d);

  mbcs::SolverConfig cfg;
  cfg.eta = a.eta;
  cfg.beta_inv_scale = a.beta_scale;
  cfg.max_iterations = static_cast<int>(a.max_iter);
  cfg.logdet_multiplier = parse_logdet(a.logdet);

  const mbcs::RecoveryResult res = mbcs::solve(y, phi, dict, part, cfg);
  mbcs::save_matrix(a.out, res.signal, parse_format(a.format));

  std::optional<double> score;
  if (!a.truth.empty()) score = mbcs::nmse(res.signal, mbcs::load_matrix(a.truth, a.header));
  if (!a.result_path.empty()) mbcs::save_result(a.result_path, res, score);

  nlohmann::json j = {{"written", a.out},
                      {"iterations", res.iterations},
                      {"converged", res.converged},
                      {"wall_time_s", res.wall_time_s}};
  if (score) j["nmse"] = *score;
  emit(j);
}

struct BenchArgs {
  bool sweep = false;
  bool compressors = false;
  std::int64_t n = 256, p = 8, d = 8, k = 8;
  int pulses = 6;
  std::string model = "block-sparse";
  std::string signal;
  std::vector<double> crs;
  int trials = 10;
  std::uint64_t seed = 1;
  std::string out_csv, out_json;
  bool no_timing = false;
  int levels = 4;
  std::int64_t channels = 1;
  double comp_cr = 0.6;
  std::string dict = "dct";
  double eta = 1e-5;
  double beta_scale = 1e-6;
  std::int64_t max_iter = 1000;
  std::string logdet = "p";
};

void run_bench(BenchArgs a) {
  if (!a.sweep && !a.compressors) a.sweep = true;
  nlohmann::json out_json;

  if (a.sweep) {
    mbcs::ExperimentSpec spec;
    spec.n = a.n;
    spec.p = a.p;
    spec.block = a.d;
    spec.k_active = a.k;
    spec.pulses = a.pulses;
    spec.trials = a.trials;
    spec.seed = a.seed;
    if (!a.crs.empty()) spec.cr_list = a.crs;
    spec.dictionary =
        a.dict == "identity" ? mbcs::DictionaryKind::Identity : mbcs::DictionaryKind::Dct;
    if (a.model == "block-sparse")
      spec.signal_model = mbcs::SignalModel::BlockSparseDct;
    else if (a.model == "pulse")
      spec.signal_model = mbcs::SignalModel::PulseTrain;
    else if (a.model == "file") {
      spec.signal_model = mbcs::SignalModel::FromFile;
      spec.signal_path = a.signal;
    } else
      throw std::invalid_argument("unknown signal model '" + a.model + "'");
    spec.solver.eta = a.eta;
    spec.solver.beta_inv_scale = a.beta_scale;
    spec.solver.max_iterations = static_cast<int>(a.max_iter);
    spec.solver.logdet_multiplier = parse_logdet(a.logdet);

    const auto records = mbcs::run_sweep(spec);
    if (a.out_csv.empty()) {
      mbcs::write_trial_csv(std::cout, records, !a.no_timing);
    } else {
      std::ofstream os(a.out_csv, std::ios::binary);
      if (!os) throw std::runtime_error("cannot open for writing: " + a.out_csv);
      mbcs::write_trial_csv(os, records, !a.no_timing);
      emit({{"records", records.size()}, {"csv", a.out_csv}});
    }
    out_json["sweep"] = mbcs::sweep_summary_json(spec, records, !a.no_timing);
  }

  if (a.compressors) {
    const auto report =
        mbcs::compare_compressors(a.n, a.levels, a.trials, a.seed, a.channels, a.comp_cr);
    mbcs::write_compressor_markdown(std::cout, report);
    out_json["compressors"] = mbcs::compressor_report_json(report);
  }

  if (!a.out_json.empty()) {
    std::ofstream os(a.out_json);
    if (!os) throw std::runtime_error("cannot open for writing: " + a.out_json);
    os << out_json.dump(2) << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compressive-sensing toolkit for multichannel signal packets"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* cmd_synth = app.add_subcommand("synth", "Generate a synthetic packet");
  cmd_synth->add_option("--model", synth.model, "Signal model")
      ->check(CLI::IsMember({"block-sparse", "pulse"}));
  cmd_synth->add_option("--n", synth.n, "Samples per channel")->check(CLI::PositiveNumber);
  cmd_synth->add_option("--p", synth.p, "Channels")->check(CLI::PositiveNumber);
  cmd_synth->add_option("--d", synth.d, "Block size")->check(CLI::PositiveNumber);
  cmd_synth->add_option("--k", synth.k, "Active blocks")->check(CLI::NonNegativeNumber);
  cmd_synth->add_option("--pulses", synth.pulses, "Pulse count")->check(CLI::PositiveNumber);
  cmd_synth->add_option("--seed", synth.seed, "Generator seed");
  cmd_synth->add_option("--rate", synth.rate, "Sample rate in Hz")->check(CLI::PositiveNumber);
  cmd_synth->add_option("-o,--out", synth.out, "Output packet file")->required();
  cmd_synth->add_option("--coeffs", synth.coeffs, "Ground-truth coefficient file");
  cmd_synth->add_option("--format", synth.format, "Output file format")
      ->check(CLI::IsMember({"bin", "csv"}));

  CompressArgs compress;
  auto* cmd_compress = app.add_subcommand("compress", "Stream a packet into measurements");
  cmd_compress->add_option("input", compress.input, "Packet file")->required();
  cmd_compress->add_option("--cr", compress.cr, "Compression ratio (N-M)/N in (0,1)");
  cmd_compress->add_option("--m", compress.m, "Measurement count (alternative to --cr)");
  cmd_compress->add_option("--matrix", compress.matrix, "Sensing matrix kind")
      ->check(CLI::IsMember({"bernoulli", "gaussian"}));
  cmd_compress->add_option("--seed", compress.seed, "Sensing matrix seed");
  cmd_compress->add_option("-o,--out", compress.out, "Measurements file")->required();
  cmd_compress->add_option("--ops", compress.ops_path, "Operation-count JSON file");
  cmd_compress->add_option("--export-matrix", compress.export_matrix,
                           "Dump the sensing matrix as JSON for audit");
  cmd_compress->add_flag("--header", compress.header, "Skip one CSV header line on input");
  cmd_compress->add_option("--format", compress.format, "Output file format")
      ->check(CLI::IsMember({"bin", "csv"}));

  RecoverArgs recover;
  auto* cmd_recover = app.add_subcommand("recover", "Recover a packet from measurements");
  cmd_recover->add_option("input", recover.input, "Measurements file")->required();
  cmd_recover->add_option("--n", recover.n, "Samples per channel of the original packet")
      ->required()
      ->check(CLI::PositiveNumber);
  cmd_recover->add_option("--d", recover.d, "Block size")->check(CLI::PositiveNumber);
  cmd_recover->add_option("--matrix", recover.matrix, "Sensing matrix kind")
      ->check(CLI::IsMember({"bernoulli", "gaussian"}));
  cmd_recover->add_option("--seed", recover.seed, "Sensing matrix seed");
  cmd_recover->add_option("--dict", recover.dict, "Synthesis dictionary")
      ->check(CLI::IsMember({"dct", "identity"}));
  cmd_recover->add_option("-o,--out", recover.out, "Recovered packet file")->required();
  cmd_recover->add_option("--result", recover.result_path, "Recovery diagnostics JSON file");
  cmd_recover->add_option("--truth", recover.truth, "Ground-truth packet for NMSE reporting");
  cmd_recover->add_flag("--header", recover.header, "Skip one CSV header line on inputs");
  cmd_recover->add_option("--format", recover.format, "Output file format")
      ->check(CLI::IsMember({"bin", "csv"}));
  cmd_recover->add_option("--eta", recover.eta, "Convergence threshold")
      ->check(CLI::PositiveNumber);
  cmd_recover->add_option("--beta-scale", recover.beta_scale,
                          "Noise variance as a fraction of measurement energy")
      ->check(CLI::PositiveNumber);
  cmd_recover->add_option("--max-iter", recover.max_iter, "Iteration cap")
      ->check(CLI::PositiveNumber);
  cmd_recover->add_option("--logdet-mult", recover.logdet, "Log-det multiplier: p or n")
      ->check(CLI::IsMember({"p", "n"}));

  BenchArgs bench;
  auto* cmd_bench = app.add_subcommand("bench", "Run the benchmark protocol");
  cmd_bench->add_flag("--sweep", bench.sweep, "Run the recovery sweep (default)");
  cmd_bench->add_flag("--compressors", bench.compressors, "Run the compressor op-count report");
  cmd_bench->add_option("--n", bench.n, "Samples per channel")->check(CLI::PositiveNumber);
  cmd_bench->add_option("--p", bench.p, "Channels")->check(CLI::PositiveNumber);
  cmd_bench->add_option("--d", bench.d, "Block size")->check(CLI::PositiveNumber);
  cmd_bench->add_option("--k", bench.k, "Active blocks")->check(CLI::NonNegativeNumber);
  cmd_bench->add_option("--pulses", bench.pulses, "Pulse count")->check(CLI::PositiveNumber);
  cmd_bench->add_option("--model", bench.model, "Signal model")
      ->check(CLI::IsMember({"block-sparse", "pulse", "file"}));
  cmd_bench->add_option("--signal", bench.signal, "Packet file for --model file");
  cmd_bench->add_option("--cr", bench.crs, "Compression ratios for the sweep");
  cmd_bench->add_option("--trials", bench.trials, "Trials per ratio")->check(CLI::PositiveNumber);
  cmd_bench->add_option("--seed", bench.seed, "Master seed");
  cmd_bench->add_option("--out-csv", bench.out_csv, "Trial records CSV file");
  cmd_bench->add_option("--out-json", bench.out_json, "Summary JSON file");
  cmd_bench->add_flag("--no-timing", bench.no_timing,
                      "Zero the wall-time column for byte-reproducible output");
  cmd_bench->add_option("--levels", bench.levels, "Wavelet levels for --compressors")
      ->check(CLI::PositiveNumber);
  cmd_bench->add_option("--channels", bench.channels, "Channels for --compressors")
      ->check(CLI::PositiveNumber);
  cmd_bench->add_option("--comp-cr", bench.comp_cr, "Compression ratio for --compressors");
  cmd_bench->add_option("--dict", bench.dict, "Recovery dictionary")
      ->check(CLI::IsMember({"dct", "identity"}));
  cmd_bench->add_option("--eta", bench.eta, "Convergence threshold")->check(CLI::PositiveNumber);
  cmd_bench->add_option("--beta-scale", bench.beta_scale,
                        "Noise variance as a fraction of measurement energy")
      ->check(CLI::PositiveNumber);
  cmd_bench->add_option("--max-iter", bench.max_iter, "Iteration cap")
      ->check(CLI::PositiveNumber);
  cmd_bench->add_option("--logdet-mult", bench.logdet, "Log-det multiplier: p or n")
      ->check(CLI::IsMember({"p", "n"}));

  cmd_synth->callback([&] { run_synth(synth); });
  cmd_compress->callback([&] { run_compress(compress); });
  cmd_recover->callback([&] { run_recover(recover); });
  cmd_bench->callback([&] { run_bench(bench); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << nlohmann::json{{"error", e.what()}}.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}
