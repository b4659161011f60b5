#include "eosq/io.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <unistd.h>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "eosq/synth.hpp"

using namespace eosq;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = std::filesystem::temp_directory_path() /
            ("eosq_io_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::string file(const std::string& name) const {
    return (path_ / name).string();
  }

 private:
  std::filesystem::path path_;
};

Matrix random_block(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      m(i, j) = static_cast<double>(static_cast<float>(rng.gaussian()));
  return m;
}

io::BlockFileData sample_file(bool truth) {
  io::BlockFileData f;
  f.n = 16;
  f.d = 24;
  f.blocks = {random_block(16, 24, 1), random_block(16, 24, 2)};
  if (truth) {
    f.has_ground_truth = true;
    for (int i = 0; i < 2; ++i) {
      io::GroundTruthRecord gt;
      gt.signal = random_block(16, 24, 10 + i);
      gt.noise = random_block(16, 24, 20 + i);
      gt.strengths = {3.0, 1.5};
      f.truth.push_back(std::move(gt));
    }
  }
  return f;
}

}  // namespace

TEST(BlockFile, EncodeDecodeEncodeByteIdentical) {
  for (bool truth : {false, true}) {
    const auto original = sample_file(truth);
    const auto bytes = io::encode_block_file(original);
    const auto decoded = io::decode_block_file(bytes);
    EXPECT_EQ(decoded.n, original.n);
    EXPECT_EQ(decoded.d, original.d);
    EXPECT_EQ(decoded.blocks.size(), original.blocks.size());
    EXPECT_EQ(decoded.blocks[0], original.blocks[0]);
    EXPECT_EQ(io::encode_block_file(decoded), bytes);
  }
}

TEST(BlockFile, FileRoundTrip) {
  TempDir dir;
  const auto original = sample_file(true);
  io::write_block_file(dir.file("a.eosq"), original);
  const auto loaded = io::read_block_file(dir.file("a.eosq"));
  EXPECT_EQ(loaded.blocks[1], original.blocks[1]);
  EXPECT_EQ(loaded.truth[0].strengths, original.truth[0].strengths);
  EXPECT_EQ(loaded.truth[1].noise, original.truth[1].noise);
}

TEST(BlockFile, RejectsCorruptStreams) {
  auto bytes = io::encode_block_file(sample_file(false));
  // bad magic
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(io::decode_block_file(bad), format_error);
  // wrong kind
  bad = bytes;
  bad[4] = io::kKindCompressed;
  EXPECT_THROW(io::decode_block_file(bad), format_error);
  // unsupported version
  bad = bytes;
  bad[5] = 0xFF;
  EXPECT_THROW(io::decode_block_file(bad), format_error);
  // truncation reports the offset
  bad = bytes;
  bad.resize(bytes.size() - 10);
  try {
    io::decode_block_file(bad);
    FAIL() << "expected format_error";
  } catch (const format_error& e) {
    EXPECT_NE(std::string(e.what()).find("offset"), std::string::npos);
  }
  // trailing garbage
  bad = bytes;
  bad.push_back(0);
  EXPECT_THROW(io::decode_block_file(bad), format_error);
}

TEST(CompressedFile, RoundTripAllMethods) {
  const Matrix block = random_block(32, 32, 3) +
                       4.0 * random_block(32, 1, 4) *
                           random_block(1, 32, 5) / 5.0;
  for (auto method :
       {pipeline::Method::kTqMse, pipeline::Method::kTqProd,
        pipeline::Method::kSvd1Tq, pipeline::Method::kEoptShrinkQMse,
        pipeline::Method::kEoptShrinkQProd, pipeline::Method::kKivi}) {
    io::CompressedFileData f;
    f.config.method = method;
    f.config.residual_bits = 3;
    f.config.kivi_group = 8;
    f.config.root_seed = 5;
    f.n = 32;
    f.d = 32;
    f.blocks.push_back(pipeline::compress_block(block, f.config, 0));
    const auto bytes = io::encode_compressed_file(f);
    const auto decoded = io::decode_compressed_file(bytes);
    EXPECT_EQ(io::encode_compressed_file(decoded), bytes)
        << pipeline::method_name(method);
    // payload-level equality: decompressing either gives identical output
    const Matrix a = pipeline::decompress_block(f.blocks[0], f.config);
    const Matrix b =
        pipeline::decompress_block(decoded.blocks[0], decoded.config);
    EXPECT_EQ(a, b) << pipeline::method_name(method);
  }
}

TEST(CompressedFile, RecordLengthMismatchRejected) {
  io::CompressedFileData f;
  f.config.method = pipeline::Method::kTqMse;
  f.config.residual_bits = 2;
  f.n = 8;
  f.d = 16;
  f.blocks.push_back(
      pipeline::compress_block(random_block(8, 16, 9), f.config, 0));
  auto bytes = io::encode_compressed_file(f);
  // corrupt the declared record length (u64 right after the 3 u32 counters)
  const std::size_t header = 4 + 1 + 2 + (1 + 1 + 1 + 1 + 1) + 4 + 4 + 8 +
                             4 + 4 + 4;
  bytes[header] ^= 0x01;
  EXPECT_THROW(io::decode_compressed_file(bytes), format_error);
}

TEST(Ingest, CsvBlocks) {
  TempDir dir;
  const std::string path = dir.file("data.csv");
  {
    std::ofstream os(path);
    for (int i = 0; i < 256; ++i) {
      for (int j = 0; j < 16; ++j) os << (j ? "," : "") << (i * 0.5 + j);
      os << "\n";
    }
  }
  const auto result = io::ingest_external(path, 128, 16,
                                          io::ExternalLayout::kCsv);
  EXPECT_EQ(result.file.blocks.size(), 2u);
  EXPECT_EQ(result.dropped_rows, 0);
  EXPECT_DOUBLE_EQ(result.file.blocks[1](127, 15), 255 * 0.5 + 15);
}

TEST(Ingest, RawBinaryDropsRemainder) {
  TempDir dir;
  const std::string path = dir.file("data.bin");
  {
    std::ofstream os(path, std::ios::binary);
    for (int i = 0; i < 300 * 16; ++i) {
      const float v = static_cast<float>(i % 97) * 0.25f;
      os.write(reinterpret_cast<const char*>(&v), 4);
    }
  }
  const auto result = io::ingest_external(path, 128, 16,
                                          io::ExternalLayout::kRawF32);
  EXPECT_EQ(result.file.blocks.size(), 2u);
  EXPECT_EQ(result.dropped_rows, 44);
}

TEST(Ingest, RoundTripIdempotent) {
  TempDir dir;
  const std::string raw = dir.file("x.bin");
  {
    std::ofstream os(raw, std::ios::binary);
    Rng rng(3);
    for (int i = 0; i < 64 * 8; ++i) {
      const float v = static_cast<float>(rng.gaussian());
      os.write(reinterpret_cast<const char*>(&v), 4);
    }
  }
  const auto first = io::ingest_external(raw, 32, 8,
                                         io::ExternalLayout::kRawF32);
  io::write_block_file(dir.file("x.eosq"), first.file);
  const auto reread = io::read_block_file(dir.file("x.eosq"));
  EXPECT_EQ(io::encode_block_file(reread), io::encode_block_file(first.file));
}

TEST(Ingest, RejectsBadShapes) {
  TempDir dir;
  const std::string path = dir.file("bad.csv");
  {
    std::ofstream os(path);
    os << "1,2,3\n1,2\n";
  }
  EXPECT_THROW(io::ingest_external(path, 1, 3, io::ExternalLayout::kCsv),
               format_error);
  const std::string nan_path = dir.file("nan.csv");
  {
    std::ofstream os(nan_path);
    os << "1,2,nan\n";
  }
  EXPECT_THROW(io::ingest_external(nan_path, 1, 3, io::ExternalLayout::kCsv),
               format_error);
  const std::string short_path = dir.file("short.bin");
  {
    std::ofstream os(short_path, std::ios::binary);
    const float v = 1.0f;
    os.write(reinterpret_cast<const char*>(&v), 4);
  }
  EXPECT_THROW(
      io::ingest_external(short_path, 4, 4, io::ExternalLayout::kRawF32),
      format_error);
}

TEST(SpectrumCsv, LayoutAndMarkers) {
  const Matrix block = random_block(32, 32, 11);
  const auto sd = spectral::decompose(block);
  spectral::BulkEdgeEstimate edge;
  edge.lambda_plus_hat = 1.25;
  edge.k = 5;
  edge.r_plus_hat = 2;
  std::ostringstream os;
  io::write_spectrum_csv(os, sd, edge, {9.5, 7.5});
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "lambda_plus_hat,k,r_plus_hat,theta_hats");
  std::getline(is, line);
  EXPECT_NE(line.find("1.25,5,2,9.5;7.5"), std::string::npos);
  std::getline(is, line);
  EXPECT_EQ(line, "index,singular_value,eigenvalue,is_outlier");
  int rows = 0, outliers = 0;
  while (std::getline(is, line)) {
    ++rows;
    if (line.size() >= 2 && line.substr(line.size() - 2) == ",1") ++outliers;
  }
  EXPECT_EQ(rows, 32);
  EXPECT_EQ(outliers, 2);
}

TEST(ReportsCsv, FixedColumns) {
  metrics::FidelityReport rep;
  rep.method = "tq_mse";
  rep.bits_total = 2.0;
  rep.rel_l2_percent = 34.1;
  rep.ip_bias = -0.028;
  rep.ip_std = 0.027;
  rep.n_blocks = 5;
  std::ostringstream os;
  io::write_reports_csv(os, {rep});
  std::istringstream is(os.str());
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  EXPECT_EQ(header, "method,bits,l2_pct,ip_bias,ip_std,mean_rank,n_blocks");
  EXPECT_EQ(row, "tq_mse,2,34.1,-0.028,0.027,,5");

  const auto j = io::report_to_json(rep);
  EXPECT_EQ(j["method"], "tq_mse");
  EXPECT_TRUE(j["mean_rank"].is_null());
}
