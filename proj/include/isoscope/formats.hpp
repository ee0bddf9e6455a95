#pragma once

// On-disk formats, all little-endian:
//
//   ISOB-R record stream
//     "ISOBR1" | u8 dtype (0 = f32, 1 = f64) | u8 reserved | u32 n
//     per record: u64 sentence_id | u32 token_count T | T*n values, row-major
//
//   ISOB-M pooled matrix
//     "ISOBM1" | u8 dtype | u8 reserved | u32 n | u64 N | N*n values, row-major
//
//   CSV cloud: header "dim0,...,dim{n-1}", one row per observation.
//
// The group a stream belongs to lives in a JSON sidecar, not in the binary.

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "isoscope/records.hpp"

namespace isoscope {

namespace fs = std::filesystem;

enum class DType : std::uint8_t { F32 = 0, F64 = 1 };

inline std::size_t dtype_size(DType d) { return d == DType::F32 ? 4 : 8; }

inline constexpr std::array<char, 6> kRecordMagic{'I', 'S', 'O', 'B', 'R', '1'};
inline constexpr std::array<char, 6> kMatrixMagic{'I', 'S', 'O', 'B', 'M', '1'};
inline constexpr std::size_t kRecordHeaderBytes = 12;  // magic, dtype, reserved, n
inline constexpr std::size_t kMatrixHeaderBytes = 20;  // ... plus u64 N

namespace detail {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T byteswap_if_needed(T value) {
  if constexpr (std::endian::native == std::endian::little) {
    return value;
  } else {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  }
}

template <typename T>
T load_le(const unsigned char* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  return byteswap_if_needed(value);
}

template <typename T>
void store_le(std::string& out, T value) {
  value = byteswap_if_needed(value);
  const auto* p = reinterpret_cast<const char*>(&value);
  out.append(p, sizeof(T));
}

inline void store_value(std::string& out, double value, DType dtype) {
  if (dtype == DType::F32) {
    store_le(out, static_cast<float>(value));
  } else {
    store_le(out, value);
  }
}

inline double load_value(const unsigned char* p, DType dtype) {
  return dtype == DType::F32 ? static_cast<double>(load_le<float>(p)) : load_le<double>(p);
}

inline DType parse_dtype(std::uint8_t raw, const fs::path& path) {
  if (raw > 1) {
    fail(ErrorKind::UnsupportedFormat,
         path.string() + ": unknown dtype code " + std::to_string(raw));
  }
  return static_cast<DType>(raw);
}

inline std::ifstream open_in(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::IoError, "cannot open " + path.string() + " for reading");
  return in;
}

inline void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::IoError, "cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::IoError, "write failed for " + path.string());
}

// Reads exactly `count` bytes or as many as remain; returns the number read.
inline std::size_t read_some(std::istream& in, unsigned char* dst, std::size_t count) {
  in.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(count));
  return static_cast<std::size_t>(in.gcount());
}

}  // namespace detail

/// Sequential reader over an ISOB-R stream.
class RecordStreamReader {
 public:
  explicit RecordStreamReader(fs::path path, GroupKey meta = {})
      : path_(std::move(path)), meta_(std::move(meta)), in_(detail::open_in(path_)) {
    std::error_code ec;
    file_size_ = fs::file_size(path_, ec);
    if (ec) fail(ErrorKind::IoError, "cannot stat " + path_.string());

    std::array<unsigned char, kRecordHeaderBytes> header{};
    const auto got = detail::read_some(in_, header.data(), header.size());
    if (got < kRecordMagic.size() ||
        std::memcmp(header.data(), kRecordMagic.data(), kRecordMagic.size()) != 0) {
      fail(ErrorKind::UnsupportedFormat, path_.string() + ": missing ISOBR1 magic");
    }
    if (got < header.size()) {
      fail(ErrorKind::CorruptStream, path_.string() + ": truncated header at byte offset " +
                                         std::to_string(got));
    }
    dtype_ = detail::parse_dtype(header[6], path_);
    dim_ = detail::load_le<std::uint32_t>(header.data() + 8);
    if (dim_ == 0) fail(ErrorKind::UnsupportedFormat, path_.string() + ": dimension is zero");
    offset_ = header.size();
  }

  DType dtype() const noexcept { return dtype_; }
  std::uint32_t dim() const noexcept { return dim_; }
  std::uint64_t offset() const noexcept { return offset_; }

  /// Next record in file order, or nullopt at a clean end of stream.
  std::optional<HiddenStateRecord> next() {
    std::array<unsigned char, 12> head{};
    const auto got = detail::read_some(in_, head.data(), head.size());
    if (got == 0) return std::nullopt;
    if (got < head.size()) {
      fail(ErrorKind::CorruptStream, path_.string() + ": record #" + std::to_string(index_) +
                                         " truncated in its header at byte offset " +
                                         std::to_string(offset_));
    }
    HiddenStateRecord record;
    record.sentence_id = detail::load_le<std::uint64_t>(head.data());
    const auto tokens = detail::load_le<std::uint32_t>(head.data() + 8);
    if (tokens == 0) {
      fail(ErrorKind::InvalidData, path_.string() + ": record #" + std::to_string(index_) +
                                       " (sentence " + std::to_string(record.sentence_id) +
                                       ") declares zero tokens");
    }
    const std::uint64_t payload =
        static_cast<std::uint64_t>(tokens) * dim_ * dtype_size(dtype_);
    const std::uint64_t payload_start = offset_ + head.size();
    if (payload > file_size_ - std::min(file_size_, payload_start)) {
      fail(ErrorKind::CorruptStream,
           path_.string() + ": record #" + std::to_string(index_) + " (sentence " +
               std::to_string(record.sentence_id) + ") declares " + std::to_string(payload) +
               " payload bytes but only " +
               std::to_string(file_size_ - std::min(file_size_, payload_start)) +
               " remain at byte offset " + std::to_string(payload_start));
    }
    buffer_.resize(static_cast<std::size_t>(payload));
    if (detail::read_some(in_, buffer_.data(), buffer_.size()) != buffer_.size()) {
      fail(ErrorKind::CorruptStream, path_.string() + ": short read in record #" +
                                         std::to_string(index_) + " at byte offset " +
                                         std::to_string(payload_start));
    }

    record.tokens.resize(tokens, dim_);
    const std::size_t width = dtype_size(dtype_);
    const unsigned char* p = buffer_.data();
    for (std::uint32_t t = 0; t < tokens; ++t) {
      for (std::uint32_t j = 0; j < dim_; ++j, p += width) {
        const double v = detail::load_value(p, dtype_);
        if (!std::isfinite(v)) {
          fail(ErrorKind::InvalidData, path_.string() + ": non-finite value in record #" +
                                           std::to_string(index_) + " (sentence " +
                                           std::to_string(record.sentence_id) + ")");
        }
        record.tokens(t, j) = v;
      }
    }
    record.meta = meta_;
    offset_ = payload_start + payload;
    ++index_;
    return record;
  }

 private:
  fs::path path_;
  GroupKey meta_;
  std::ifstream in_;
  std::uint64_t file_size_ = 0;
  std::uint64_t offset_ = 0;
  std::uint64_t index_ = 0;
  DType dtype_ = DType::F32;
  std::uint32_t dim_ = 0;
  std::vector<unsigned char> buffer_;
};

inline std::vector<HiddenStateRecord> read_record_stream(const fs::path& path,
                                                         const GroupKey& meta = {}) {
  RecordStreamReader reader(path, meta);
  std::vector<HiddenStateRecord> records;
  while (auto r = reader.next()) records.push_back(std::move(*r));
  return records;
}

inline std::string encode_record_stream(std::span<const HiddenStateRecord> records,
                                        std::uint32_t dim, DType dtype = DType::F32) {
  if (dim == 0) fail(ErrorKind::InvalidDimension, "stream dimension must be positive");
  std::string out(kRecordMagic.begin(), kRecordMagic.end());
  out.push_back(static_cast<char>(dtype));
  out.push_back('\0');
  detail::store_le(out, dim);
  for (const auto& r : records) {
    if (r.tokens.cols() != static_cast<Eigen::Index>(dim)) {
      fail(ErrorKind::InvalidDimension, "record " + std::to_string(r.sentence_id) + " has " +
                                            std::to_string(r.tokens.cols()) +
                                            " columns, stream has " + std::to_string(dim));
    }
    if (r.tokens.rows() < 1) {
      fail(ErrorKind::EmptyRecord, "record " + std::to_string(r.sentence_id) + " has no tokens");
    }
    detail::store_le(out, r.sentence_id);
    detail::store_le(out, static_cast<std::uint32_t>(r.tokens.rows()));
    for (Eigen::Index t = 0; t < r.tokens.rows(); ++t) {
      for (Eigen::Index j = 0; j < r.tokens.cols(); ++j) {
        detail::store_value(out, r.tokens(t, j), dtype);
      }
    }
  }
  return out;
}

inline void write_record_stream(const fs::path& path, std::span<const HiddenStateRecord> records,
                                std::uint32_t dim, DType dtype = DType::F32) {
  detail::write_file(path, encode_record_stream(records, dim, dtype));
}

inline std::string encode_matrix(const PointCloud& cloud, DType dtype = DType::F32) {
  std::string out(kMatrixMagic.begin(), kMatrixMagic.end());
  out.push_back(static_cast<char>(dtype));
  out.push_back('\0');
  detail::store_le(out, static_cast<std::uint32_t>(cloud.dim()));
  detail::store_le(out, static_cast<std::uint64_t>(cloud.size()));
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    for (Eigen::Index j = 0; j < cloud.dim(); ++j) {
      detail::store_value(out, cloud.matrix()(i, j), dtype);
    }
  }
  return out;
}

inline void write_matrix(const fs::path& path, const PointCloud& cloud, DType dtype = DType::F32) {
  detail::write_file(path, encode_matrix(cloud, dtype));
}

inline PointCloud read_matrix(const fs::path& path) {
  auto in = detail::open_in(path);
  std::array<unsigned char, kMatrixHeaderBytes> header{};
  const auto got = detail::read_some(in, header.data(), header.size());
  if (got < kMatrixMagic.size() ||
      std::memcmp(header.data(), kMatrixMagic.data(), kMatrixMagic.size()) != 0) {
    fail(ErrorKind::UnsupportedFormat, path.string() + ": missing ISOBM1 magic");
  }
  if (got < header.size()) {
    fail(ErrorKind::CorruptStream,
         path.string() + ": truncated header at byte offset " + std::to_string(got));
  }
  const DType dtype = detail::parse_dtype(header[6], path);
  const auto dim = detail::load_le<std::uint32_t>(header.data() + 8);
  const auto rows = detail::load_le<std::uint64_t>(header.data() + 12);
  const std::uint64_t expected = rows * dim * dtype_size(dtype);
  const std::uint64_t available = fs::file_size(path) - header.size();
  if (rows == 0 || dim == 0) {
    fail(ErrorKind::InvalidData, path.string() + ": empty matrix (" + std::to_string(rows) +
                                     " x " + std::to_string(dim) + ")");
  }
  if (available < expected) {
    fail(ErrorKind::CorruptStream, path.string() + ": payload truncated, expected " +
                                       std::to_string(expected) + " bytes after offset " +
                                       std::to_string(header.size()) + ", found " +
                                       std::to_string(available));
  }
  std::vector<unsigned char> buffer(static_cast<std::size_t>(expected));
  detail::read_some(in, buffer.data(), buffer.size());

  Matrix data(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dim));
  const std::size_t width = dtype_size(dtype);
  const unsigned char* p = buffer.data();
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    for (Eigen::Index j = 0; j < data.cols(); ++j, p += width) {
      const double v = detail::load_value(p, dtype);
      if (!std::isfinite(v)) {
        fail(ErrorKind::InvalidData,
             path.string() + ": non-finite value at row " + std::to_string(i));
      }
      data(i, j) = v;
    }
  }
  return PointCloud(std::move(data));
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double value) {
  std::array<char, 32> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), end);
}

inline std::string encode_csv(const PointCloud& cloud) {
  std::string out;
  for (Eigen::Index j = 0; j < cloud.dim(); ++j) {
    if (j) out.push_back(',');
    out += "dim" + std::to_string(j);
  }
  out.push_back('\n');
  for (Eigen::Index i = 0; i < cloud.size(); ++i) {
    for (Eigen::Index j = 0; j < cloud.dim(); ++j) {
      if (j) out.push_back(',');
      out += format_double(cloud.matrix()(i, j));
    }
    out.push_back('\n');
  }
  return out;
}

inline void write_csv(const fs::path& path, const PointCloud& cloud) {
  detail::write_file(path, encode_csv(cloud));
}

inline PointCloud read_csv(const fs::path& path) {
  auto in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::InvalidData, path.string() + ": empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::size_t columns = 0;
  {
    std::stringstream header(line);
    std::string cell;
    while (std::getline(header, cell, ',')) {
      if (cell != "dim" + std::to_string(columns)) {
        fail(ErrorKind::UnsupportedFormat, path.string() + ": CSV header must be dim0,...,dim{n-1}");
      }
      ++columns;
    }
  }
  if (columns == 0) fail(ErrorKind::UnsupportedFormat, path.string() + ": CSV header is empty");

  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t count = 0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (true) {
      double v = 0.0;
      const auto [next, ec] = std::from_chars(p, end, v);
      if (ec != std::errc{} || !std::isfinite(v)) {
        fail(ErrorKind::InvalidData,
             path.string() + ": bad value on line " + std::to_string(line_no));
      }
      values.push_back(v);
      ++count;
      p = next;
      if (p == end) break;
      if (*p != ',') {
        fail(ErrorKind::InvalidData,
             path.string() + ": malformed line " + std::to_string(line_no));
      }
      ++p;
    }
    if (count != columns) {
      fail(ErrorKind::InvalidData, path.string() + ": line " + std::to_string(line_no) + " has " +
                                       std::to_string(count) + " values, expected " +
                                       std::to_string(columns));
    }
  }
  const auto rows = static_cast<Eigen::Index>(values.size() / columns);
  if (rows == 0) fail(ErrorKind::InvalidData, path.string() + ": CSV has no data rows");
  Matrix data(rows, static_cast<Eigen::Index>(columns));
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < data.cols(); ++j) {
      data(i, j) = values[static_cast<std::size_t>(i) * columns + static_cast<std::size_t>(j)];
    }
  }
  return PointCloud(std::move(data));
}

enum class FileKind { RecordStream, Matrix, Csv };

/// Sniffs the magic bytes; anything else is treated as CSV.
inline FileKind detect_file_kind(const fs::path& path) {
  auto in = detail::open_in(path);
  std::array<char, 6> magic{};
  in.read(magic.data(), magic.size());
  if (in.gcount() == 6 && magic == kRecordMagic) return FileKind::RecordStream;
  if (in.gcount() == 6 && magic == kMatrixMagic) return FileKind::Matrix;
  return FileKind::Csv;
}

/// Pools an ISOB-R stream to one row per record, ordered by sentence id.
inline PointCloud pool_record_stream(const fs::path& path) {
  auto records = read_record_stream(path);
  std::stable_sort(records.begin(), records.end(),
                   [](const auto& a, const auto& b) { return a.sentence_id < b.sentence_id; });
  if (records.empty()) fail(ErrorKind::InsufficientData, path.string() + " has no records");
  Matrix rows(static_cast<Eigen::Index>(records.size()), records.front().tokens.cols());
  for (std::size_t i = 0; i < records.size(); ++i) {
    rows.row(static_cast<Eigen::Index>(i)) = mean_pool(records[i]).transpose();
  }
  return PointCloud(std::move(rows));
}

/// Loads a cloud from ISOB-M, CSV, or an ISOB-R stream (mean pooled).
inline PointCloud read_cloud(const fs::path& path) {
  switch (detect_file_kind(path)) {
    case FileKind::RecordStream: return pool_record_stream(path);
    case FileKind::Matrix: return read_matrix(path);
    case FileKind::Csv: return read_csv(path);
  }
  return {};
}

// ---- JSON manifests ---------------------------------------------------------

inline nlohmann::ordered_json to_json(const GroupKey& key) {
  nlohmann::ordered_json j;
  j["model_type"] = std::string(to_string(key.model_type));
  j["dataset_tag"] = key.dataset_tag;
  j["source_lang"] = key.source_lang;
  j["target_lang"] = key.target_lang;
  j["side"] = std::string(to_string(key.side));
  j["layer"] = key.layer;
  return j;
}

inline GroupKey group_key_from_json(const nlohmann::json& j) {
  try {
    GroupKey key;
    key.model_type = parse_model_type(j.at("model_type").get<std::string>());
    key.dataset_tag = j.value("dataset_tag", std::string{});
    key.source_lang = j.at("source_lang").get<std::string>();
    key.target_lang = j.at("target_lang").get<std::string>();
    key.side = parse_side(j.at("side").get<std::string>());
    key.layer = j.at("layer").get<int>();
    key.validate();
    return key;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidData, std::string("bad group key in manifest: ") + e.what());
  }
}

/// Sidecar written next to each ISOB-R stream.
inline void write_stream_sidecar(const fs::path& path, const GroupKey& key, std::size_t count) {
  auto j = to_json(key);
  j["count"] = count;
  detail::write_file(path, j.dump(2) + "\n");
}

inline nlohmann::json read_json_file(const fs::path& path) {
  auto in = detail::open_in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::InvalidData, path.string() + ": " + e.what());
  }
}

/// One entry of a run manifest: a stream file, or a stored score for a group.
struct ManifestEntry {
  GroupKey key;
  std::optional<fs::path> path;
  std::optional<double> stored_score;
  std::optional<std::size_t> count;
};

/// Accepts {"streams": [entry...]}, a bare array of entries, or a single entry.
/// Entry paths are resolved relative to the manifest's directory.
inline std::vector<ManifestEntry> read_manifest(const fs::path& path) {
  const auto doc = read_json_file(path);
  std::vector<nlohmann::json> items;
  if (doc.is_object() && doc.contains("streams")) {
    for (const auto& e : doc.at("streams")) items.push_back(e);
  } else if (doc.is_array()) {
    for (const auto& e : doc) items.push_back(e);
  } else if (doc.is_object()) {
    items.push_back(doc);
  }
  if (items.empty()) fail(ErrorKind::InvalidData, path.string() + ": manifest lists no streams");

  std::vector<ManifestEntry> out;
  for (const auto& item : items) {
    ManifestEntry entry;
    entry.key = group_key_from_json(item);
    if (item.contains("path")) {
      fs::path p = item.at("path").get<std::string>();
      entry.path = p.is_absolute() ? p : path.parent_path() / p;
    }
    if (item.contains("isoscore")) entry.stored_score = item.at("isoscore").get<double>();
    if (item.contains("count")) entry.count = item.at("count").get<std::size_t>();
    if (!entry.path && !entry.stored_score) {
      fail(ErrorKind::InvalidData,
           path.string() + ": entry " + entry.key.label() + " needs 'path' or 'isoscore'");
    }
    out.push_back(std::move(entry));
  }
  return out;
}

}  // namespace isoscope
