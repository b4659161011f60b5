#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eosq/bitpack.hpp"
#include "eosq/common.hpp"
#include "eosq/metrics.hpp"
#include "eosq/pipeline.hpp"
#include "eosq/spectral.hpp"

namespace eosq::io {

// All on-disk formats are little-endian with explicit byte serialization, so
// files are portable regardless of host endianness.

namespace detail {

class ByteWriter {
 public:
  void put_u8(std::uint8_t v) { buf_.push_back(v); }
  void put_u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) buf_.push_back((v >> (8 * i)) & 0xFF);
  }
  void put_u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back((v >> (8 * i)) & 0xFF);
  }
  void put_u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back((v >> (8 * i)) & 0xFF);
  }
  void put_f32(float v) { put_u32(std::bit_cast<std::uint32_t>(v)); }
  void put_bytes(const std::uint8_t* data, std::size_t len) {
    buf_.insert(buf_.end(), data, data + len);
  }
  const std::vector<std::uint8_t>& bytes() const { return buf_; }
  std::vector<std::uint8_t>&& take() { return std::move(buf_); }
  std::size_t size() const { return buf_.size(); }

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  ByteReader(const std::uint8_t* data, std::size_t size)
      : data_(data), size_(size) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return size_ - pos_; }

  void require(std::size_t len) const {
    if (pos_ + len > size_) {
      std::ostringstream msg;
      msg << "truncated stream: need " << len << " bytes at offset " << pos_
          << ", have " << (size_ - pos_);
      throw format_error(msg.str());
    }
  }
  std::uint8_t get_u8() {
    require(1);
    return data_[pos_++];
  }
  std::uint16_t get_u16() {
    require(2);
    std::uint16_t v = 0;
    for (int i = 0; i < 2; ++i) v |= std::uint16_t(data_[pos_++]) << (8 * i);
    return v;
  }
  std::uint32_t get_u32() {
    require(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(data_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t get_u64() {
    require(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(data_[pos_++]) << (8 * i);
    return v;
  }
  float get_f32() { return std::bit_cast<float>(get_u32()); }
  const std::uint8_t* get_bytes(std::size_t len) {
    require(len);
    const std::uint8_t* p = data_ + pos_;
    pos_ += len;
    return p;
  }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

inline void put_matrix_f32(ByteWriter& w, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j)
      w.put_f32(static_cast<float>(m(i, j)));
}

inline Matrix get_matrix_f32(ByteReader& r, Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      m(i, j) = static_cast<double>(r.get_f32());
  return m;
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw format_error("cannot open file: " + path);
  in.seekg(0, std::ios::end);
  const std::streamoff size = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(size));
  if (size > 0) in.read(reinterpret_cast<char*>(bytes.data()), size);
  if (!in) throw format_error("failed reading file: " + path);
  return bytes;
}

inline void write_file_bytes(const std::string& path,
                             const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw format_error("cannot open file for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw format_error("failed writing file: " + path);
}

}  // namespace detail

inline constexpr std::uint8_t kMagic[4] = {'E', 'O', 'S', 'Q'};
inline constexpr std::uint8_t kKindBlocks = 0x00;
inline constexpr std::uint8_t kKindCompressed = 0x01;
inline constexpr std::uint16_t kFormatVersion = 1;

// ---------------------------------------------------------------------------
// Block container: raw f32 matrices, optional synthetic ground truth.

struct GroundTruthRecord {
  Matrix signal;
  Matrix noise;
  std::vector<double> strengths;
};

struct BlockFileData {
  int n = 0;
  int d = 0;
  std::vector<Matrix> blocks;
  bool has_ground_truth = false;
  std::vector<GroundTruthRecord> truth;
};

inline std::vector<std::uint8_t> encode_block_file(const BlockFileData& f) {
  detail::ByteWriter w;
  w.put_bytes(kMagic, 4);
  w.put_u8(kKindBlocks);
  w.put_u16(kFormatVersion);
  w.put_u8(0);  // dtype: f32
  w.put_u8(f.has_ground_truth ? 1 : 0);
  w.put_u32(static_cast<std::uint32_t>(f.n));
  w.put_u32(static_cast<std::uint32_t>(f.d));
  w.put_u32(static_cast<std::uint32_t>(f.blocks.size()));
  for (const Matrix& b : f.blocks) detail::put_matrix_f32(w, b);
  if (f.has_ground_truth) {
    if (f.truth.size() != f.blocks.size())
      throw validation_error("ground-truth record count mismatch");
    for (const GroundTruthRecord& gt : f.truth) {
      detail::put_matrix_f32(w, gt.signal);
      detail::put_matrix_f32(w, gt.noise);
      w.put_u32(static_cast<std::uint32_t>(gt.strengths.size()));
      for (double s : gt.strengths) w.put_f32(static_cast<float>(s));
    }
  }
  return w.take();
}

inline BlockFileData decode_block_file(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes.data(), bytes.size());
  const std::uint8_t* magic = r.get_bytes(4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw format_error("bad magic: not an EOSQ file");
  if (r.get_u8() != kKindBlocks)
    throw format_error("expected a block file, found a different kind");
  const std::uint16_t version = r.get_u16();
  if (version != kFormatVersion) {
    std::ostringstream msg;
    msg << "unsupported block file version " << version;
    throw format_error(msg.str());
  }
  if (r.get_u8() != 0) throw format_error("unsupported dtype (expected f32)");
  const std::uint8_t flags = r.get_u8();
  BlockFileData f;
  f.n = static_cast<int>(r.get_u32());
  f.d = static_cast<int>(r.get_u32());
  const std::uint32_t count = r.get_u32();
  if (f.n <= 0 || f.d <= 0) throw format_error("invalid block shape");
  f.blocks.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i)
    f.blocks.push_back(detail::get_matrix_f32(r, f.n, f.d));
  f.has_ground_truth = (flags & 1) != 0;
  if (f.has_ground_truth) {
    f.truth.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      GroundTruthRecord gt;
      gt.signal = detail::get_matrix_f32(r, f.n, f.d);
      gt.noise = detail::get_matrix_f32(r, f.n, f.d);
      const std::uint32_t rank = r.get_u32();
      gt.strengths.resize(rank);
      for (std::uint32_t j = 0; j < rank; ++j)
        gt.strengths[j] = static_cast<double>(r.get_f32());
      f.truth.push_back(std::move(gt));
    }
  }
  if (r.remaining() != 0) {
    std::ostringstream msg;
    msg << "trailing bytes at offset " << r.offset();
    throw format_error(msg.str());
  }
  return f;
}

inline void write_block_file(const std::string& path, const BlockFileData& f) {
  detail::write_file_bytes(path, encode_block_file(f));
}

inline BlockFileData read_block_file(const std::string& path) {
  return decode_block_file(detail::read_file_bytes(path));
}

// ---------------------------------------------------------------------------
// Compressed container.

struct CompressedFileData {
  pipeline::CompressionConfig config;
  int n = 0;
  int d = 0;
  std::vector<pipeline::CompressedBlock> blocks;
};

namespace detail {

inline void encode_packed_matrix(ByteWriter& w, const CodeMatrix& codes,
                                 int bits) {
  // Column-wise packing, each column padded to a byte boundary.
  std::vector<std::uint8_t> column(codes.rows());
  for (Index j = 0; j < codes.cols(); ++j) {
    for (Index i = 0; i < codes.rows(); ++i) column[i] = codes(i, j);
    const std::vector<std::uint8_t> packed =
        bitpack::pack_rows(column.data(), 1, column.size(), bits);
    w.put_bytes(packed.data(), packed.size());
  }
}

inline CodeMatrix decode_packed_matrix(ByteReader& r, Index rows, Index cols,
                                       int bits) {
  CodeMatrix codes(rows, cols);
  const std::size_t stride = bitpack::packed_row_bytes(rows, bits);
  std::vector<std::uint8_t> column(rows);
  for (Index j = 0; j < cols; ++j) {
    const std::uint8_t* bytes = r.get_bytes(stride);
    bitpack::unpack_rows(bytes, 1, rows, bits, column.data());
    for (Index i = 0; i < rows; ++i) codes(i, j) = column[i];
  }
  return codes;
}

inline void encode_levels(ByteWriter& w, const Vector& levels) {
  w.put_u16(static_cast<std::uint16_t>(levels.size()));
  for (Index i = 0; i < levels.size(); ++i)
    w.put_f32(static_cast<float>(levels[i]));
}

inline Vector decode_levels(ByteReader& r) {
  const std::uint16_t count = r.get_u16();
  Vector levels(count);
  for (int i = 0; i < count; ++i)
    levels[i] = static_cast<double>(r.get_f32());
  return levels;
}

}  // namespace detail

// Per-block record body (without the leading record length). Stable layout:
// byte equality of two records means identical payloads.
inline std::vector<std::uint8_t> encode_block_record(
    const pipeline::CompressedBlock& cb,
    const pipeline::CompressionConfig& cfg) {
  detail::ByteWriter w;
  if (cb.method == pipeline::Method::kKivi) {
    const pipeline::KiviPayload& kp = *cb.kivi;
    w.put_u8(static_cast<std::uint8_t>(kp.axis));
    w.put_u32(static_cast<std::uint32_t>(kp.group));
    w.put_u32(static_cast<std::uint32_t>(kp.scales.size()));
    for (float z : kp.zero_points) w.put_f32(z);
    for (float s : kp.scales) w.put_f32(s);
    // codes row-major, rows padded to byte boundaries
    std::vector<std::uint8_t> flat(static_cast<std::size_t>(cb.n) * cb.d);
    for (int i = 0; i < cb.n; ++i)
      for (int j = 0; j < cb.d; ++j)
        flat[static_cast<std::size_t>(i) * cb.d + j] = kp.codes(i, j);
    const std::vector<std::uint8_t> packed =
        bitpack::pack_rows(flat.data(), cb.n, cb.d, cfg.residual_bits);
    w.put_bytes(packed.data(), packed.size());
    return w.take();
  }

  w.put_u16(static_cast<std::uint16_t>(cb.rank));
  w.put_u16(static_cast<std::uint16_t>(cb.demoted));
  w.put_u64(cb.rotation_seed);
  w.put_u64(cb.projection_seed);
  if (cb.rank > 0) {
    const pipeline::FactorPayload& fp = *cb.factors;
    detail::encode_levels(w, fp.u_levels);
    detail::encode_levels(w, fp.v_levels);
    detail::encode_packed_matrix(w, fp.u_codes, cfg.factor_bits);
    detail::encode_packed_matrix(w, fp.v_codes, cfg.factor_bits);
    for (Index i = 0; i < fp.phi.size(); ++i)
      w.put_f32(static_cast<float>(fp.phi[i]));
  }
  std::vector<std::uint8_t> zero_flags(cb.n);
  for (int t = 0; t < cb.n; ++t) {
    w.put_f32(static_cast<float>(cb.rows[t].norm));
    zero_flags[t] = cb.rows[t].zero ? 1 : 0;
  }
  const std::vector<std::uint8_t> zero_bitmap =
      bitpack::pack_bitmap(zero_flags.data(), zero_flags.size());
  w.put_bytes(zero_bitmap.data(), zero_bitmap.size());
  for (int t = 0; t < cb.n; ++t) {
    const std::vector<std::uint8_t> packed = bitpack::pack_rows(
        cb.rows[t].codes.data(), 1, cb.rows[t].codes.size(),
        cfg.residual_bits);
    w.put_bytes(packed.data(), packed.size());
  }
  if (pipeline::method_uses_qjl(cb.method)) {
    const auto& sidecars = *cb.qjl;
    for (int t = 0; t < cb.n; ++t)
      w.put_f32(static_cast<float>(sidecars[t].residual_norm));
    for (int t = 0; t < cb.n; ++t) {
      const std::vector<std::uint8_t> packed = bitpack::pack_bitmap(
          sidecars[t].sign_bits.data(), sidecars[t].sign_bits.size());
      w.put_bytes(packed.data(), packed.size());
    }
  }
  return w.take();
}

inline pipeline::CompressedBlock decode_block_record(
    detail::ByteReader& r, const pipeline::CompressionConfig& cfg, int n,
    int d) {
  pipeline::CompressedBlock cb;
  cb.n = n;
  cb.d = d;
  cb.method = cfg.method;
  if (cfg.method == pipeline::Method::kKivi) {
    pipeline::KiviPayload kp;
    kp.axis = static_cast<pipeline::KiviAxis>(r.get_u8());
    kp.group = static_cast<int>(r.get_u32());
    const std::uint32_t groups = r.get_u32();
    kp.zero_points.resize(groups);
    kp.scales.resize(groups);
    for (std::uint32_t g = 0; g < groups; ++g) kp.zero_points[g] = r.get_f32();
    for (std::uint32_t g = 0; g < groups; ++g) kp.scales[g] = r.get_f32();
    const std::size_t stride = bitpack::packed_row_bytes(d, cfg.residual_bits);
    const std::uint8_t* bytes = r.get_bytes(stride * n);
    std::vector<std::uint8_t> flat(static_cast<std::size_t>(n) * d);
    bitpack::unpack_rows(bytes, n, d, cfg.residual_bits, flat.data());
    kp.codes.resize(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j)
        kp.codes(i, j) = flat[static_cast<std::size_t>(i) * d + j];
    cb.kivi = std::move(kp);
    cb.bits = pipeline::make_accounting(cfg.method, cfg.residual_bits, 0, 0, n,
                                        d, static_cast<int>(groups));
    return cb;
  }

  cb.rank = r.get_u16();
  cb.demoted = r.get_u16();
  cb.rotation_seed = r.get_u64();
  cb.projection_seed = r.get_u64();
  if (cb.rank > 0) {
    pipeline::FactorPayload fp;
    fp.u_levels = detail::decode_levels(r);
    fp.v_levels = detail::decode_levels(r);
    fp.u_codes = detail::decode_packed_matrix(r, n, cb.rank, cfg.factor_bits);
    fp.v_codes = detail::decode_packed_matrix(r, d, cb.rank, cfg.factor_bits);
    fp.phi = Vector(cb.rank);
    for (int i = 0; i < cb.rank; ++i)
      fp.phi[i] = static_cast<double>(r.get_f32());
    cb.factors = std::move(fp);
  }
  std::vector<float> norms(n);
  for (int t = 0; t < n; ++t) norms[t] = r.get_f32();
  std::vector<std::uint8_t> zero_flags(n);
  const std::uint8_t* bitmap = r.get_bytes((n + 7) / 8);
  bitpack::unpack_bitmap(bitmap, n, zero_flags.data());
  cb.rows.resize(n);
  const std::size_t stride = bitpack::packed_row_bytes(d, cfg.residual_bits);
  for (int t = 0; t < n; ++t) {
    quant::QuantizedVector& qv = cb.rows[t];
    qv.norm = static_cast<double>(norms[t]);
    qv.zero = zero_flags[t] != 0;
    qv.rotation_seed = cb.rotation_seed;
    qv.codes.resize(d);
    const std::uint8_t* bytes = r.get_bytes(stride);
    bitpack::unpack_rows(bytes, 1, d, cfg.residual_bits, qv.codes.data());
  }
  if (pipeline::method_uses_qjl(cfg.method)) {
    std::vector<quant::QjlSidecar> sidecars(n);
    for (int t = 0; t < n; ++t)
      sidecars[t].residual_norm = static_cast<double>(r.get_f32());
    for (int t = 0; t < n; ++t) {
      sidecars[t].projection_seed = cb.projection_seed;
      sidecars[t].sign_bits.resize(d);
      const std::uint8_t* bytes = r.get_bytes((d + 7) / 8);
      bitpack::unpack_bitmap(bytes, d, sidecars[t].sign_bits.data());
    }
    cb.qjl = std::move(sidecars);
  }
  cb.bits = pipeline::make_accounting(cfg.method, cfg.residual_bits,
                                      cfg.factor_bits, cb.rank, n, d);
  return cb;
}

inline std::vector<std::uint8_t> encode_compressed_file(
    const CompressedFileData& f) {
  detail::ByteWriter w;
  w.put_bytes(kMagic, 4);
  w.put_u8(kKindCompressed);
  w.put_u16(kFormatVersion);
  w.put_u8(static_cast<std::uint8_t>(f.config.method));
  w.put_u8(static_cast<std::uint8_t>(f.config.residual_bits));
  w.put_u8(static_cast<std::uint8_t>(f.config.factor_bits));
  w.put_u8(static_cast<std::uint8_t>(f.config.loss));
  w.put_u8(static_cast<std::uint8_t>(f.config.kivi_axis));
  w.put_u32(static_cast<std::uint32_t>(f.config.kivi_group));
  w.put_u32(static_cast<std::uint32_t>(f.config.block_rows));
  w.put_u64(f.config.root_seed);
  w.put_u32(static_cast<std::uint32_t>(f.n));
  w.put_u32(static_cast<std::uint32_t>(f.d));
  w.put_u32(static_cast<std::uint32_t>(f.blocks.size()));
  for (const pipeline::CompressedBlock& cb : f.blocks) {
    const std::vector<std::uint8_t> record = encode_block_record(cb, f.config);
    w.put_u64(record.size());
    w.put_bytes(record.data(), record.size());
  }
  return w.take();
}

inline CompressedFileData decode_compressed_file(
    const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes.data(), bytes.size());
  const std::uint8_t* magic = r.get_bytes(4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw format_error("bad magic: not an EOSQ file");
  if (r.get_u8() != kKindCompressed)
    throw format_error("expected a compressed file, found a different kind");
  const std::uint16_t version = r.get_u16();
  if (version != kFormatVersion) {
    std::ostringstream msg;
    msg << "unsupported compressed file version " << version;
    throw format_error(msg.str());
  }
  CompressedFileData f;
  f.config.method = static_cast<pipeline::Method>(r.get_u8());
  f.config.residual_bits = r.get_u8();
  f.config.factor_bits = r.get_u8();
  f.config.loss = static_cast<shrinkage::Loss>(r.get_u8());
  f.config.kivi_axis = static_cast<pipeline::KiviAxis>(r.get_u8());
  f.config.kivi_group = static_cast<int>(r.get_u32());
  f.config.block_rows = static_cast<int>(r.get_u32());
  f.config.root_seed = r.get_u64();
  f.n = static_cast<int>(r.get_u32());
  f.d = static_cast<int>(r.get_u32());
  const std::uint32_t count = r.get_u32();
  if (f.n <= 0 || f.d <= 0) throw format_error("invalid block shape");
  f.blocks.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint64_t len = r.get_u64();
    const std::size_t start = r.offset();
    f.blocks.push_back(decode_block_record(r, f.config, f.n, f.d));
    if (r.offset() - start != len) {
      std::ostringstream msg;
      msg << "block record " << i << " length mismatch at offset " << start
          << ": declared " << len << ", consumed " << (r.offset() - start);
      throw format_error(msg.str());
    }
  }
  if (r.remaining() != 0) {
    std::ostringstream msg;
    msg << "trailing bytes at offset " << r.offset();
    throw format_error(msg.str());
  }
  return f;
}

inline void write_compressed_file(const std::string& path,
                                  const CompressedFileData& f) {
  detail::write_file_bytes(path, encode_compressed_file(f));
}

inline CompressedFileData read_compressed_file(const std::string& path) {
  return decode_compressed_file(detail::read_file_bytes(path));
}

// ---------------------------------------------------------------------------
// External tensor ingestion: raw f32 binary or CSV of shape (rows, d),
// chopped into full n-row blocks; the remainder is dropped (reported).

enum class ExternalLayout { kRawF32, kCsv };

struct IngestResult {
  BlockFileData file;
  std::int64_t dropped_rows = 0;
};

inline IngestResult ingest_external(const std::string& path, int n, int d,
                                    ExternalLayout layout) {
  if (n < 1 || d < 1) throw validation_error("ingest: n and d must be >= 1");
  std::vector<double> values;
  if (layout == ExternalLayout::kRawF32) {
    const std::vector<std::uint8_t> bytes = detail::read_file_bytes(path);
    if (bytes.size() % 4 != 0)
      throw format_error("raw f32 file size is not a multiple of 4");
    const std::size_t count = bytes.size() / 4;
    values.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      std::uint32_t u = 0;
      std::memcpy(&u, bytes.data() + 4 * i, 4);
      values.push_back(static_cast<double>(std::bit_cast<float>(u)));
    }
  } else {
    std::ifstream in(path);
    if (!in) throw format_error("cannot open file: " + path);
    std::string line;
    std::int64_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string cell;
      int cols = 0;
      while (std::getline(ss, cell, ',')) {
        try {
          values.push_back(std::stod(cell));
        } catch (const std::exception&) {
          std::ostringstream msg;
          msg << "CSV parse failure at row " << line_no << ": '" << cell << "'";
          throw format_error(msg.str());
        }
        ++cols;
      }
      if (cols != d) {
        std::ostringstream msg;
        msg << "CSV row " << line_no << " has " << cols << " columns, expected "
            << d;
        throw format_error(msg.str());
      }
    }
  }
  if (values.size() % d != 0) {
    std::ostringstream msg;
    msg << "value count " << values.size() << " is not a multiple of d = " << d;
    throw format_error(msg.str());
  }
  const std::int64_t rows = static_cast<std::int64_t>(values.size()) / d;
  for (std::int64_t t = 0; t < rows; ++t)
    for (int j = 0; j < d; ++j)
      if (!std::isfinite(values[t * d + j])) {
        std::ostringstream msg;
        msg << "non-finite value at row " << t;
        throw format_error(msg.str());
      }
  const std::int64_t block_count = rows / n;
  if (block_count == 0) {
    std::ostringstream msg;
    msg << "only " << rows << " rows; need at least n = " << n
        << " for one block";
    throw format_error(msg.str());
  }
  IngestResult out;
  out.dropped_rows = rows - block_count * n;
  out.file.n = n;
  out.file.d = d;
  for (std::int64_t bidx = 0; bidx < block_count; ++bidx) {
    Matrix m(n, d);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j)
        m(i, j) = values[(bidx * n + i) * static_cast<std::int64_t>(d) + j];
    out.file.blocks.push_back(std::move(m));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report emission.

inline void write_spectrum_csv(std::ostream& os,
                               const spectral::SpectralDecomposition& sd,
                               const spectral::BulkEdgeEstimate& edge,
                               const std::vector<double>& theta_hats) {
  os << "lambda_plus_hat,k,r_plus_hat,theta_hats\n";
  os << std::setprecision(10) << edge.lambda_plus_hat << "," << edge.k << ","
     << edge.r_plus_hat << ",";
  for (std::size_t i = 0; i < theta_hats.size(); ++i) {
    if (i) os << ";";
    os << theta_hats[i];
  }
  os << "\n";
  os << "index,singular_value,eigenvalue,is_outlier\n";
  for (Index i = 0; i < sd.singular_values.size(); ++i) {
    const double s = sd.singular_values[i];
    os << (i + 1) << "," << s << "," << s * s << ","
       << (static_cast<int>(i) < edge.r_plus_hat ? 1 : 0) << "\n";
  }
}

inline void write_reports_csv(std::ostream& os,
                              const std::vector<metrics::FidelityReport>& reports) {
  os << "method,bits,l2_pct,ip_bias,ip_std,mean_rank,n_blocks\n";
  os << std::setprecision(10);
  for (const metrics::FidelityReport& r : reports) {
    os << r.method << "," << r.bits_total << "," << r.rel_l2_percent << ","
       << r.ip_bias << "," << r.ip_std << ",";
    if (std::isfinite(r.mean_rank)) os << r.mean_rank;
    os << "," << r.n_blocks << "\n";
  }
}

inline nlohmann::json report_to_json(const metrics::FidelityReport& r) {
  nlohmann::json j{{"method", r.method},
                   {"bits", r.bits_total},
                   {"l2_pct", r.rel_l2_percent},
                   {"ip_bias", r.ip_bias},
                   {"ip_std", r.ip_std},
                   {"n_blocks", r.n_blocks}};
  if (std::isfinite(r.mean_rank))
    j["mean_rank"] = r.mean_rank;
  else
    j["mean_rank"] = nullptr;
  return j;
}

inline nlohmann::json property_report_to_json(
    const metrics::PropertyReport& r) {
  nlohmann::json curve = nlohmann::json::array();
  for (const auto& [snr, ratio] : r.snr_bias_curve)
    curve.push_back({{"snr", snr}, {"bias_ratio", ratio}});
  return nlohmann::json{{"residual_frobenius_gap", r.residual_frobenius_gap},
                        {"spectrum_ks_distance", r.spectrum_ks_distance},
                        {"deloc_max_ratio", r.deloc_max_ratio},
                        {"snr_bias_curve", curve}};
}

}  // namespace eosq::io
