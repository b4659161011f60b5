// Command-line surface: synthetic generation, compression, decompression,
// spectrum dumps, evaluation, and method comparison over EOSQ containers.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "eosq/eosq.hpp"

namespace {

using eosq::Matrix;
using eosq::Vector;

std::vector<double> parse_strengths(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (cell.empty()) continue;
    out.push_back(std::stod(cell));
  }
  return out;
}

eosq::synth::CovarianceSpec parse_cov(const std::string& text, int dim) {
  if (text == "identity") return eosq::synth::CovarianceSpec::identity(dim);
  if (text.rfind("toeplitz:", 0) == 0) {
    const double rho = std::stod(text.substr(9));
    return eosq::synth::CovarianceSpec::toeplitz(dim, rho);
  }
  if (text.rfind("diag:", 0) == 0) {
    const std::vector<double> values = parse_strengths(text.substr(5));
    if (static_cast<int>(values.size()) != dim)
      throw eosq::validation_error("diag covariance needs exactly dim values");
    return eosq::synth::CovarianceSpec::diagonal(
        Eigen::Map<const Vector>(values.data(), values.size()));
  }
  throw eosq::validation_error(
      "covariance must be identity | toeplitz:RHO | diag:v1,v2,...");
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (cell.empty()) continue;
    out.push_back(std::stoi(cell));
  }
  return out;
}

eosq::shrinkage::Loss parse_loss(const std::string& name) {
  if (name == "frobenius") return eosq::shrinkage::Loss::kFrobenius;
  if (name == "operator") return eosq::shrinkage::Loss::kOperator;
  if (name == "nuclear") return eosq::shrinkage::Loss::kNuclear;
  throw eosq::validation_error("loss must be frobenius | operator | nuclear");
}

struct GenArgs {
  int n = 128, d = 128, blocks = 1;
  std::string strengths, cov_a = "identity", cov_b = "identity";
  std::string entry_dist = "gaussian";
  std::uint64_t seed = 0;
  double tau = eosq::kDefaultTau;
  std::string out;
};

int run_gen(const GenArgs& args) {
  eosq::io::BlockFileData file;
  file.n = args.n;
  file.d = args.d;
  file.has_ground_truth = true;
  eosq::synth::SpikedModelSpec spec;
  spec.n = args.n;
  spec.d = args.d;
  spec.signal_strengths = parse_strengths(args.strengths);
  spec.noise_row_cov = parse_cov(args.cov_a, args.n);
  spec.noise_col_cov = parse_cov(args.cov_b, args.d);
  spec.tau = args.tau;
  if (args.entry_dist == "gaussian")
    spec.entry_dist = eosq::synth::EntryDist::kGaussian;
  else if (args.entry_dist == "rademacher")
    spec.entry_dist = eosq::synth::EntryDist::kRademacherScaled;
  else
    throw eosq::validation_error("entry-dist must be gaussian | rademacher");

  for (int i = 0; i < args.blocks; ++i) {
    spec.seed = eosq::derive_stream(args.seed, static_cast<std::uint64_t>(i),
                                    eosq::StreamRole::kBlock);
    eosq::synth::SampledBlock sampled = eosq::synth::sample_block(spec);
    file.blocks.push_back(std::move(sampled.data));
    file.truth.push_back({std::move(sampled.truth.signal),
                          std::move(sampled.truth.noise),
                          sampled.truth.strengths});
  }
  eosq::io::write_block_file(args.out, file);
  std::cerr << "wrote " << args.blocks << " block(s) of " << args.n << "x"
            << args.d << " to " << args.out << "\n";
  return 0;
}

struct CompressArgs {
  std::string in, out, method = "eoptshrinkq_mse", loss = "frobenius";
  std::string kivi_axis = "channel";
  int bits = 2, factor_bits = 4, kivi_group = 64, workers = 1;
  std::uint64_t seed = 0;
};

int run_compress(const CompressArgs& args) {
  eosq::pipeline::CompressionConfig cfg;
  cfg.method = eosq::pipeline::parse_method(args.method);
  cfg.residual_bits = args.bits;
  cfg.factor_bits = args.factor_bits;
  cfg.loss = parse_loss(args.loss);
  cfg.kivi_group = args.kivi_group;
  if (args.kivi_axis == "channel")
    cfg.kivi_axis = eosq::pipeline::KiviAxis::kPerChannel;
  else if (args.kivi_axis == "token")
    cfg.kivi_axis = eosq::pipeline::KiviAxis::kPerToken;
  else
    throw eosq::validation_error("kivi-axis must be channel | token");
  cfg.root_seed = args.seed;
  eosq::pipeline::validate_config(cfg);

  const eosq::io::BlockFileData file = eosq::io::read_block_file(args.in);
  cfg.block_rows = file.n;

  eosq::io::CompressedFileData out;
  out.config = cfg;
  out.n = file.n;
  out.d = file.d;
  out.blocks =
      eosq::pipeline::compress_stream(file.blocks, cfg, args.workers);
  eosq::io::write_compressed_file(args.out, out);
  double bits_mean = 0.0;
  for (const auto& cb : out.blocks) bits_mean += cb.bits.total.to_double();
  if (!out.blocks.empty()) bits_mean /= static_cast<double>(out.blocks.size());
  std::cerr << "compressed " << out.blocks.size() << " block(s) with "
            << args.method << ", mean " << bits_mean << " bits/entry -> "
            << args.out << "\n";
  return 0;
}

int run_decompress(const std::string& in, const std::string& out) {
  const eosq::io::CompressedFileData file = eosq::io::read_compressed_file(in);
  eosq::io::BlockFileData blocks;
  blocks.n = file.n;
  blocks.d = file.d;
  for (const auto& cb : file.blocks)
    blocks.blocks.push_back(eosq::pipeline::decompress_block(cb, file.config));
  eosq::io::write_block_file(out, blocks);
  std::cerr << "decompressed " << blocks.blocks.size() << " block(s) -> " << out
            << "\n";
  return 0;
}

int run_spectrum(const std::string& in, int block_index,
                 const std::string& out) {
  const eosq::io::BlockFileData file = eosq::io::read_block_file(in);
  if (block_index < 0 ||
      block_index >= static_cast<int>(file.blocks.size()))
    throw eosq::validation_error("block index out of range");
  const eosq::spectral::SpectralDecomposition sd =
      eosq::spectral::decompose(file.blocks[block_index]);
  const eosq::spectral::BulkEdgeEstimate edge =
      eosq::spectral::estimate_bulk_edge(sd);
  if (edge.k_shrunk)
    std::cerr << "warning: pilot parameter shrunk to k = " << edge.k
              << " to fit the spectrum\n";
  const eosq::spectral::NoiseSpectrumEstimate noise =
      eosq::spectral::impute_noise_spectrum(sd, edge);
  if (noise.k_used != edge.k)
    std::cerr << "warning: imputation window shrunk to k = " << noise.k_used
              << "\n";
  std::vector<double> thetas;
  for (int i = 0; i < edge.r_plus_hat; ++i) {
    const double lambda = sd.singular_values[i] * sd.singular_values[i];
    const eosq::shrinkage::ComponentEstimate est =
        eosq::shrinkage::estimate_component(noise, lambda);
    if (!est.demoted)
      thetas.push_back(eosq::spectral::theta_from_strength(noise, est.d_hat));
  }
  if (out == "-") {
    eosq::io::write_spectrum_csv(std::cout, sd, edge, thetas);
  } else {
    std::ofstream os(out);
    if (!os) throw eosq::format_error("cannot open output file: " + out);
    eosq::io::write_spectrum_csv(os, sd, edge, thetas);
  }
  return 0;
}

struct EvalArgs {
  std::string in, recon, out;
  int queries = 4096;
  std::uint64_t ip_seed = 0x51e575;
  double alignment = eosq::metrics::kDefaultQueryAlignment;
};

int run_eval(const EvalArgs& args) {
  const eosq::io::BlockFileData original = eosq::io::read_block_file(args.in);
  eosq::metrics::IpProtocol proto;
  proto.query_count = args.queries;
  proto.seed = args.ip_seed;
  proto.alignment = args.alignment;

  eosq::metrics::FidelityReport report;
  report.n_blocks = static_cast<int>(original.blocks.size());

  const std::vector<std::uint8_t> recon_bytes =
      eosq::io::detail::read_file_bytes(args.recon);
  if (recon_bytes.size() < 5) throw eosq::format_error("recon file too short");
  if (recon_bytes[4] == eosq::io::kKindCompressed) {
    const eosq::io::CompressedFileData comp =
        eosq::io::decode_compressed_file(recon_bytes);
    if (comp.blocks.size() != original.blocks.size())
      throw eosq::validation_error("block count mismatch between inputs");
    report.method = eosq::pipeline::method_name(comp.config.method);
    double bits = 0.0, l2 = 0.0, rank = 0.0;
    for (std::size_t i = 0; i < comp.blocks.size(); ++i) {
      const Matrix recon =
          eosq::pipeline::decompress_block(comp.blocks[i], comp.config);
      l2 += eosq::metrics::relative_l2(original.blocks[i], recon);
      bits += comp.blocks[i].bits.total.to_double();
      rank += comp.blocks[i].rank;
    }
    const double count = static_cast<double>(comp.blocks.size());
    report.bits_total = bits / count;
    report.rel_l2_percent = l2 / count;
    if (eosq::pipeline::method_uses_factors(comp.config.method))
      report.mean_rank = rank / count;
    const eosq::metrics::IpStats ip =
        eosq::metrics::ip_fidelity(original.blocks, comp.config, proto);
    report.ip_bias = ip.bias;
    report.ip_std = ip.std;
  } else {
    const eosq::io::BlockFileData recon =
        eosq::io::decode_block_file(recon_bytes);
    if (recon.blocks.size() != original.blocks.size())
      throw eosq::validation_error("block count mismatch between inputs");
    report.method = "reconstruction";
    double l2 = 0.0;
    for (std::size_t i = 0; i < recon.blocks.size(); ++i)
      l2 += eosq::metrics::relative_l2(original.blocks[i], recon.blocks[i]);
    report.rel_l2_percent = l2 / static_cast<double>(recon.blocks.size());
    const eosq::metrics::IpStats ip = eosq::metrics::ip_fidelity_recon(
        original.blocks,
        [&](const Matrix& x, std::size_t bi) {
          // Score the provided reconstruction row-by-row against the
          // unit-normalized originals.
          Matrix xhat = recon.blocks[bi];
          for (eosq::Index t = 0; t < x.rows(); ++t) {
            const double norm = original.blocks[bi].row(t).norm();
            if (norm > 0.0) xhat.row(t) /= norm;
          }
          return xhat;
        },
        proto);
    report.ip_bias = ip.bias;
    report.ip_std = ip.std;
  }

  const nlohmann::json j = eosq::io::report_to_json(report);
  if (args.out.empty() || args.out == "-") {
    std::cout << j.dump(2) << "\n";
  } else {
    std::ofstream os(args.out);
    if (!os) throw eosq::format_error("cannot open output file: " + args.out);
    os << j.dump(2) << "\n";
  }
  return 0;
}

struct CompareArgs {
  std::string in, out, property_out;
  std::string methods = "tq_mse,svd1_tq,eoptshrinkq_mse";
  std::string bits_list = "2,3,4";
  std::string loss = "frobenius";
  int factor_bits = 4, queries = 4096;
  std::uint64_t seed = 0, ip_seed = 0x51e575;
};

int run_compare(const CompareArgs& args) {
  const eosq::io::BlockFileData file = eosq::io::read_block_file(args.in);
  std::vector<eosq::pipeline::Method> methods;
  {
    std::stringstream ss(args.methods);
    std::string cell;
    while (std::getline(ss, cell, ','))
      if (!cell.empty()) methods.push_back(eosq::pipeline::parse_method(cell));
  }
  const std::vector<int> bits = parse_int_list(args.bits_list);

  eosq::pipeline::CompressionConfig base;
  base.factor_bits = args.factor_bits;
  base.loss = parse_loss(args.loss);
  base.block_rows = file.n;
  base.root_seed = args.seed;

  eosq::metrics::IpProtocol proto;
  proto.query_count = args.queries;
  proto.seed = args.ip_seed;

  const std::vector<eosq::metrics::FidelityReport> reports =
      eosq::metrics::comparison_table(file.blocks, methods, bits, base, proto);
  {
    std::ofstream os(args.out);
    if (!os) throw eosq::format_error("cannot open output file: " + args.out);
    eosq::io::write_reports_csv(os, reports);
  }
  std::cerr << "wrote " << reports.size() << " comparison row(s) to "
            << args.out << "\n";

  if (file.has_ground_truth) {
    std::vector<eosq::metrics::TruthBlock> truth_blocks;
    for (std::size_t i = 0; i < file.blocks.size(); ++i)
      truth_blocks.push_back({file.blocks[i], file.truth[i].signal,
                              file.truth[i].noise});
    eosq::pipeline::CompressionConfig prop_cfg = base;
    prop_cfg.residual_bits = bits.front();
    const eosq::metrics::PropertyReport prop =
        eosq::metrics::proposition_one_suite(truth_blocks, prop_cfg, proto);
    const std::string path = args.property_out.empty()
                                 ? args.out + ".properties.json"
                                 : args.property_out;
    std::ofstream os(path);
    if (!os) throw eosq::format_error("cannot open output file: " + path);
    os << eosq::io::property_report_to_json(prop).dump(2) << "\n";
    std::cerr << "wrote property report to " << path << "\n";
  }
  return 0;
}

struct IngestArgs {
  std::string in, out, layout = "raw";
  int n = 128, d = 128;
};

int run_ingest(const IngestArgs& args) {
  eosq::io::ExternalLayout layout;
  if (args.layout == "raw")
    layout = eosq::io::ExternalLayout::kRawF32;
  else if (args.layout == "csv")
    layout = eosq::io::ExternalLayout::kCsv;
  else
    throw eosq::validation_error("layout must be raw | csv");
  const eosq::io::IngestResult result =
      eosq::io::ingest_external(args.in, args.n, args.d, layout);
  if (result.dropped_rows > 0)
    std::cerr << "warning: " << result.dropped_rows
              << " rows dropped (not a full block)\n";
  eosq::io::write_block_file(args.out, result.file);
  std::cerr << "ingested " << result.file.blocks.size() << " block(s) -> "
            << args.out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"eOptShrinkQ: spectral denoising + per-vector quantization "
               "for matrix block compression"};
  app.require_subcommand(1);

  GenArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen", "generate synthetic spiked blocks");
  gen_cmd->add_option("--n", gen.n, "rows per block");
  gen_cmd->add_option("--d", gen.d, "columns per block");
  gen_cmd->add_option("--strengths", gen.strengths,
                      "comma-separated signal strengths (empty = pure noise)");
  gen_cmd->add_option("--cov-a", gen.cov_a, "row covariance spec");
  gen_cmd->add_option("--cov-b", gen.cov_b, "column covariance spec");
  gen_cmd->add_option("--blocks", gen.blocks, "number of blocks");
  gen_cmd->add_option("--seed", gen.seed, "root seed");
  gen_cmd->add_option("--entry-dist", gen.entry_dist, "gaussian | rademacher");
  gen_cmd->add_option("--tau", gen.tau, "regularity parameter");
  gen_cmd->add_option("--out", gen.out, "output block file")->required();

  CompressArgs comp;
  CLI::App* comp_cmd = app.add_subcommand("compress", "compress a block file");
  comp_cmd->add_option("--in", comp.in, "input block file")->required();
  comp_cmd->add_option("--method", comp.method,
                       "tq_mse | tq_prod | svd1_tq | eoptshrinkq_mse | "
                       "eoptshrinkq_prod | kivi");
  comp_cmd->add_option("--bits", comp.bits, "residual bits per entry");
  comp_cmd->add_option("--factor-bits", comp.factor_bits, "SVD factor bits");
  comp_cmd->add_option("--loss", comp.loss, "shrinkage loss");
  comp_cmd->add_option("--kivi-axis", comp.kivi_axis, "channel | token");
  comp_cmd->add_option("--kivi-group", comp.kivi_group, "KIVI group size");
  comp_cmd->add_option("--seed", comp.seed, "root seed");
  comp_cmd->add_option("--workers", comp.workers, "worker threads");
  comp_cmd->add_option("--out", comp.out, "output compressed file")->required();

  std::string dec_in, dec_out;
  CLI::App* dec_cmd = app.add_subcommand("decompress", "decompress to a block file");
  dec_cmd->add_option("--in", dec_in, "input compressed file")->required();
  dec_cmd->add_option("--out", dec_out, "output block file")->required();

  std::string spec_in, spec_out = "-";
  int spec_index = 0;
  CLI::App* spec_cmd =
      app.add_subcommand("spectrum", "dump singular spectrum with bulk-edge markers");
  spec_cmd->add_option("--in", spec_in, "input block file")->required();
  spec_cmd->add_option("--block-index", spec_index, "block to analyze");
  spec_cmd->add_option("--out", spec_out, "output CSV ('-' = stdout)");

  EvalArgs eval;
  CLI::App* eval_cmd = app.add_subcommand("eval", "fidelity report for one pair");
  eval_cmd->add_option("--in", eval.in, "original block file")->required();
  eval_cmd->add_option("--recon", eval.recon,
                       "compressed file or reconstructed block file")
      ->required();
  eval_cmd->add_option("--queries", eval.queries, "queries per block");
  eval_cmd->add_option("--ip-seed", eval.ip_seed, "query seed");
  eval_cmd->add_option("--alignment", eval.alignment, "query/row mean cosine");
  eval_cmd->add_option("--out", eval.out, "output JSON ('-' = stdout)");

  CompareArgs cmp;
  CLI::App* cmp_cmd =
      app.add_subcommand("compare", "comparison table across methods and bits");
  cmp_cmd->add_option("--in", cmp.in, "input block file")->required();
  cmp_cmd->add_option("--methods", cmp.methods, "comma-separated methods");
  cmp_cmd->add_option("--bits-list", cmp.bits_list, "comma-separated bit widths");
  cmp_cmd->add_option("--factor-bits", cmp.factor_bits, "SVD factor bits");
  cmp_cmd->add_option("--loss", cmp.loss, "shrinkage loss");
  cmp_cmd->add_option("--queries", cmp.queries, "queries per block");
  cmp_cmd->add_option("--seed", cmp.seed, "compression root seed");
  cmp_cmd->add_option("--ip-seed", cmp.ip_seed, "query seed");
  cmp_cmd->add_option("--out", cmp.out, "output CSV")->required();
  cmp_cmd->add_option("--property-out", cmp.property_out,
                      "property report JSON (ground-truth inputs)");

  IngestArgs ing;
  CLI::App* ing_cmd =
      app.add_subcommand("ingest", "import external raw f32 / CSV tensors");
  ing_cmd->add_option("--in", ing.in, "input path")->required();
  ing_cmd->add_option("--n", ing.n, "rows per block");
  ing_cmd->add_option("--d", ing.d, "columns per row");
  ing_cmd->add_option("--layout", ing.layout, "raw | csv");
  ing_cmd->add_option("--out", ing.out, "output block file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen_cmd->parsed()) return run_gen(gen);
    if (comp_cmd->parsed()) return run_compress(comp);
    if (dec_cmd->parsed()) return run_decompress(dec_in, dec_out);
    if (spec_cmd->parsed()) return run_spectrum(spec_in, spec_index, spec_out);
    if (eval_cmd->parsed()) return run_eval(eval);
    if (cmp_cmd->parsed()) return run_compare(cmp);
    if (ing_cmd->parsed()) return run_ingest(ing);
  } catch (const eosq::validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const eosq::format_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const eosq::numeric_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 2;
}
