#include "embclust/tensor_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "embclust/error.hpp"

namespace embclust {

namespace {

constexpr std::string_view kMagic = "FMAT";
constexpr std::string_view kSectionMagic = "FSEC";
constexpr std::uint32_t kMaxDims = 32;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class Reader {
 public:
  Reader(std::string_view bytes, std::size_t offset) : bytes_(bytes), pos_(offset) {}

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) fail(ErrorCode::truncated, std::string("truncated FMAT data: ") + what);
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::uint64_t u64(const char* what) {
    need(8, what);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::string_view bytes_;
  std::size_t pos_;
};

bool mul_overflows(std::uint64_t a, std::uint64_t b, std::uint64_t& out) {
  return __builtin_mul_overflow(a, b, &out);
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

double parse_double(std::string_view s, std::size_t line_no) {
  s = trim(s);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": cannot parse number '" +
                               std::string(s) + "'");
  return v;
}

template <class Fn>
void for_each_line(std::string_view text, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++line_no;
    fn(trim(text.substr(start, end - start)), line_no);
    start = end + 1;
  }
}

}  // namespace

void FeatureMatrix::validate() const {
  if (ids.size() != static_cast<std::size_t>(data.rows()))
    fail(ErrorCode::dimension_mismatch, "id count " + std::to_string(ids.size()) +
                                            " does not match row count " +
                                            std::to_string(data.rows()));
  std::unordered_set<std::string_view> seen;
  seen.reserve(ids.size());
  for (const auto& id : ids)
    if (!seen.insert(id).second) fail(ErrorCode::duplicate_id, "duplicate id '" + id + "'");
  if (!data.allFinite()) fail(ErrorCode::non_finite, "feature matrix contains NaN or Inf");
  if (!dim_shape.empty()) {
    std::uint64_t prod = 1;
    for (auto d : dim_shape) prod *= d;
    if (prod != static_cast<std::uint64_t>(data.cols()))
      fail(ErrorCode::dimension_mismatch, "dim_shape product does not match column count");
  }
}

FeatureMatrix FeatureMatrix::from_data(Eigen::MatrixXd data) {
  FeatureMatrix m;
  m.ids.reserve(data.rows());
  for (Eigen::Index i = 0; i < data.rows(); ++i) m.ids.push_back("r" + std::to_string(i));
  m.data = std::move(data);
  return m;
}

FeatureMatrix with_data(const FeatureMatrix& like, Eigen::MatrixXd data) {
  if (data.rows() != like.rows())
    fail(ErrorCode::dimension_mismatch, "row count changed while replacing payload");
  FeatureMatrix m;
  m.ids = like.ids;
  m.data = std::move(data);
  return m;
}

FeatureMatrix select_rows(const FeatureMatrix& m, const std::vector<Eigen::Index>& rows) {
  FeatureMatrix out;
  out.dim_shape = m.dim_shape;
  out.data.resize(static_cast<Eigen::Index>(rows.size()), m.cols());
  out.ids.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.data.row(static_cast<Eigen::Index>(r)) = m.data.row(rows[r]);
    out.ids.push_back(m.ids[rows[r]]);
  }
  return out;
}

int LabelVector::num_labels() const {
  if (labels.empty()) return 0;
  return *std::max_element(labels.begin(), labels.end()) + 1;
}

LabelVector LabelVector::from_raw(std::vector<std::string> ids, const std::vector<long long>& raw) {
  if (ids.size() != raw.size())
    fail(ErrorCode::dimension_mismatch, "label vector id/label length mismatch");
  std::map<long long, int> remap;
  for (auto v : raw) {
    if (v < 0) fail(ErrorCode::parse, "labels must be non-negative");
    remap.emplace(v, 0);
  }
  int next = 0;
  for (auto& [value, idx] : remap) idx = next++;
  LabelVector out;
  out.ids = std::move(ids);
  out.labels.reserve(raw.size());
  for (auto v : raw) out.labels.push_back(remap.at(v));
  return out;
}

LabelVector LabelVector::from_labels(const FeatureMatrix& m, std::vector<int> labels) {
  if (labels.size() != m.ids.size())
    fail(ErrorCode::dimension_mismatch, "label count does not match row count");
  LabelVector out;
  out.ids = m.ids;
  out.labels = std::move(labels);
  return out;
}

LabelVector align_to(const LabelVector& labels, const std::vector<std::string>& ids) {
  if (labels.ids == ids) return labels;
  if (labels.ids.size() != ids.size())
    fail(ErrorCode::dimension_mismatch, "label vectors cover different id sets");
  std::unordered_map<std::string_view, int> by_id;
  for (std::size_t i = 0; i < labels.ids.size(); ++i) by_id.emplace(labels.ids[i], labels.labels[i]);
  LabelVector out;
  out.ids = ids;
  out.labels.reserve(ids.size());
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) fail(ErrorCode::dimension_mismatch, "id '" + id + "' missing from labels");
    out.labels.push_back(it->second);
  }
  return out;
}

std::string encode_fmat(const FeatureMatrix& m) {
  m.validate();
  const auto rows = static_cast<std::uint64_t>(m.rows());
  const auto cols = static_cast<std::uint64_t>(m.cols());

  std::string out;
  out.reserve(32 + rows * cols * 4 + rows * 8);
  out.append(kMagic);
  put_u32(out, kFmatVersion);
  put_u64(out, rows);
  put_u64(out, cols);
  put_u32(out, m.dim_shape.empty() ? 0u : kFlagDimShape);
  if (!m.dim_shape.empty()) {
    put_u32(out, static_cast<std::uint32_t>(m.dim_shape.size()));
    for (auto d : m.dim_shape) put_u64(out, d);
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const auto f = static_cast<float>(m.data(i, j));
      if (!std::isfinite(f))
        fail(ErrorCode::non_finite, "value at (" + std::to_string(i) + "," + std::to_string(j) +
                                        ") overflows f32 storage");
      put_u32(out, std::bit_cast<std::uint32_t>(f));
    }
  }
  for (const auto& id : m.ids) {
    if (id.size() > std::numeric_limits<std::uint32_t>::max())
      fail(ErrorCode::invalid_argument, "id too long");
    put_u32(out, static_cast<std::uint32_t>(id.size()));
    out.append(id);
  }
  return out;
}

FeatureMatrix decode_fmat_record(std::string_view bytes, std::size_t& offset) {
  Reader in(bytes, offset);
  if (in.remaining() < kMagic.size()) fail(ErrorCode::truncated, "file shorter than FMAT magic");
  if (in.take(kMagic.size(), "magic") != kMagic) fail(ErrorCode::bad_magic, "not an FMAT file");
  const auto version = in.u32("version");
  if (version != kFmatVersion)
    fail(ErrorCode::version_mismatch, "unsupported FMAT version " + std::to_string(version));
  const auto rows = in.u64("rows");
  const auto cols = in.u64("cols");
  const auto flags = in.u32("flags");
  if ((flags & ~kFlagDimShape) != 0) fail(ErrorCode::corrupt_header, "unknown FMAT flag bits");

  FeatureMatrix m;
  if (flags & kFlagDimShape) {
    const auto ndims = in.u32("ndims");
    if (ndims == 0 || ndims > kMaxDims) fail(ErrorCode::corrupt_header, "implausible ndims");
    std::uint64_t prod = 1;
    for (std::uint32_t k = 0; k < ndims; ++k) {
      const auto d = in.u64("dims");
      if (mul_overflows(prod, d, prod)) fail(ErrorCode::corrupt_header, "dim_shape overflows");
      m.dim_shape.push_back(d);
    }
    if (prod != cols) fail(ErrorCode::corrupt_header, "dim_shape product does not match cols");
  }

  std::uint64_t cells = 0, payload = 0, table_min = 0, total = 0;
  if (mul_overflows(rows, cols, cells) || mul_overflows(cells, 4, payload) ||
      mul_overflows(rows, 4, table_min) || __builtin_add_overflow(payload, table_min, &total))
    fail(ErrorCode::corrupt_header, "declared shape overflows");
  if (total > in.remaining()) fail(ErrorCode::truncated, "payload shorter than declared shape");
  if (rows > static_cast<std::uint64_t>(std::numeric_limits<Eigen::Index>::max()) ||
      cols > static_cast<std::uint64_t>(std::numeric_limits<Eigen::Index>::max()))
    fail(ErrorCode::corrupt_header, "declared shape too large");

  m.data.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  const auto block = in.take(payload, "payload");
  std::size_t p = 0;
  for (Eigen::Index i = 0; i < m.data.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.data.cols(); ++j) {
      std::uint32_t bits = 0;
      for (int b = 0; b < 4; ++b)
        bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(block[p + b])) << (8 * b);
      p += 4;
      m.data(i, j) = static_cast<double>(std::bit_cast<float>(bits));
    }
  }

  m.ids.reserve(rows);
  for (std::uint64_t i = 0; i < rows; ++i) {
    const auto len = in.u32("id length");
    m.ids.emplace_back(in.take(len, "id bytes"));
  }
  offset = in.pos();
  m.validate();
  return m;
}

FeatureMatrix decode_fmat(std::string_view bytes) {
  std::size_t offset = 0;
  auto m = decode_fmat_record(bytes, offset);
  if (offset != bytes.size())
    fail(ErrorCode::corrupt_header, "FMAT file has " + std::to_string(bytes.size() - offset) +
                                        " trailing bytes");
  return m;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) fail(ErrorCode::io, "read error on '" + path.string() + "'");
  return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::io, "write error on '" + path.string() + "'");
}

void write_fmat(const FeatureMatrix& m, const std::filesystem::path& path) {
  write_file(path, encode_fmat(m));
}

FeatureMatrix read_fmat(const std::filesystem::path& path) { return decode_fmat(read_file(path)); }

FeatureMatrix parse_csv(std::string_view text, bool has_header) {
  std::vector<std::string> ids;
  std::vector<double> values;
  std::size_t width = 0;
  bool first = true;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    if (line.empty()) return;
    if (first && has_header) {
      first = false;
      return;
    }
    first = false;
    auto fields = split(line, ',');
    if (fields.size() < 2)
      fail(ErrorCode::ragged_row, "line " + std::to_string(line_no) + ": expected id and values");
    if (width == 0) width = fields.size();
    if (fields.size() != width)
      fail(ErrorCode::ragged_row, "line " + std::to_string(line_no) + ": expected " +
                                      std::to_string(width - 1) + " values, found " +
                                      std::to_string(fields.size() - 1));
    ids.emplace_back(trim(fields[0]));
    for (std::size_t k = 1; k < fields.size(); ++k) values.push_back(parse_double(fields[k], line_no));
  });

  FeatureMatrix m;
  const auto n = static_cast<Eigen::Index>(ids.size());
  const auto d = width == 0 ? Eigen::Index{0} : static_cast<Eigen::Index>(width - 1);
  m.data = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), n, d);
  m.ids = std::move(ids);
  m.validate();
  return m;
}

FeatureMatrix read_csv(const std::filesystem::path& path, bool has_header) {
  return parse_csv(read_file(path), has_header);
}

std::string format_csv(const FeatureMatrix& m, bool header) {
  std::string out;
  char buf[64];
  if (header) {
    out += "id";
    for (Eigen::Index j = 0; j < m.cols(); ++j) out += ",f" + std::to_string(j);
    out += '\n';
  }
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out += m.ids[i];
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, ",%.9g", m.data(i, j));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void write_csv(const FeatureMatrix& m, const std::filesystem::path& path, bool header) {
  write_file(path, format_csv(m, header));
}

FeatureMatrix read_features(const std::filesystem::path& path) {
  if (path.extension() == ".csv") return read_csv(path, false);
  return read_fmat(path);
}

LabelVector parse_labels_csv(std::string_view text) {
  std::vector<std::string> ids;
  std::vector<long long> raw;
  for_each_line(text, [&](std::string_view line, std::size_t line_no) {
    if (line.empty()) return;
    auto fields = split(line, ',');
    if (fields.size() != 2)
      fail(ErrorCode::ragged_row, "line " + std::to_string(line_no) + ": expected 'id,label'");
    auto label = trim(fields[1]);
    if (line_no == 1 && label == "label") return;
    long long v = 0;
    auto [ptr, ec] = std::from_chars(label.data(), label.data() + label.size(), v);
    if (ec != std::errc() || ptr != label.data() + label.size() || label.empty())
      fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": bad label '" +
                                 std::string(label) + "'");
    ids.emplace_back(trim(fields[0]));
    raw.push_back(v);
  });
  std::unordered_set<std::string_view> seen;
  for (const auto& id : ids)
    if (!seen.insert(id).second) fail(ErrorCode::duplicate_id, "duplicate id '" + id + "'");
  return LabelVector::from_raw(std::move(ids), raw);
}

LabelVector read_labels_csv(const std::filesystem::path& path) {
  return parse_labels_csv(read_file(path));
}

std::string format_labels_csv(const LabelVector& labels) {
  std::string out = "id,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i)
    out += labels.ids[i] + "," + std::to_string(labels.labels[i]) + "\n";
  return out;
}

void write_labels_csv(const LabelVector& labels, const std::filesystem::path& path) {
  write_file(path, format_labels_csv(labels));
}

std::string encode_sections(const std::vector<Section>& sections) {
  std::string out;
  for (const auto& s : sections) out += encode_fmat(s.matrix);
  const auto table_offset = static_cast<std::uint64_t>(out.size());
  put_u32(out, static_cast<std::uint32_t>(sections.size()));
  for (const auto& s : sections) {
    put_u32(out, static_cast<std::uint32_t>(s.name.size()));
    out.append(s.name);
  }
  put_u64(out, table_offset);
  out.append(kSectionMagic);
  return out;
}

std::vector<Section> decode_sections(std::string_view bytes) {
  if (bytes.size() < 12 || bytes.substr(bytes.size() - 4) != kSectionMagic)
    fail(ErrorCode::bad_magic, "not a section archive");
  Reader tail(bytes, bytes.size() - 12);
  const auto table_offset = tail.u64("table offset");
  if (table_offset > bytes.size() - 12) fail(ErrorCode::corrupt_header, "bad section table offset");

  Reader table(bytes.substr(0, bytes.size() - 12), table_offset);
  const auto count = table.u32("section count");
  std::vector<Section> out;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto len = table.u32("section name length");
    out.push_back(Section{std::string(table.take(len, "section name")), {}});
  }
  if (table.remaining() != 0) fail(ErrorCode::corrupt_header, "section table size mismatch");

  const auto records = bytes.substr(0, table_offset);
  std::size_t offset = 0;
  for (auto& s : out) s.matrix = decode_fmat_record(records, offset);
  if (offset != records.size()) fail(ErrorCode::corrupt_header, "section records size mismatch");
  return out;
}

void write_sections(const std::vector<Section>& sections, const std::filesystem::path& path) {
  write_file(path, encode_sections(sections));
}

std::vector<Section> read_sections(const std::filesystem::path& path) {
  return decode_sections(read_file(path));
}

const FeatureMatrix& find_section(const std::vector<Section>& sections, std::string_view name) {
  for (const auto& s : sections)
    if (s.name == name) return s.matrix;
  fail(ErrorCode::parse, "missing section '" + std::string(name) + "'");
}

}  // namespace embclust
