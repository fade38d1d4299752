#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace embclust {

/// n x d feature block with one identifier per row.
///
/// Values are held in double precision; FMAT files store them as f32.
/// `dim_shape` optionally records the per-row tensor shape the row was
/// flattened from (e.g. {1024, 7, 7}) so that pooling can undo it.
struct FeatureMatrix {
  std::vector<std::string> ids;
  Eigen::MatrixXd data;
  std::vector<std::uint64_t> dim_shape;

  Eigen::Index rows() const { return data.rows(); }
  Eigen::Index cols() const { return data.cols(); }

  /// Throws Error on duplicate ids, id/row count mismatch, non-finite
  /// entries or a dim_shape whose product differs from cols().
  void validate() const;

  /// Wraps a bare matrix, naming rows "r0", "r1", ...
  static FeatureMatrix from_data(Eigen::MatrixXd data);
};

/// Same ids as `like`, new payload, no dim_shape.
FeatureMatrix with_data(const FeatureMatrix& like, Eigen::MatrixXd data);

FeatureMatrix select_rows(const FeatureMatrix& m, const std::vector<Eigen::Index>& rows);

/// Per-sample integer labels, remapped to 0..k-1 in ascending order of the
/// raw label values.
struct LabelVector {
  std::vector<std::string> ids;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  int num_labels() const;

  static LabelVector from_raw(std::vector<std::string> ids, const std::vector<long long>& raw);
  static LabelVector from_labels(const FeatureMatrix& m, std::vector<int> labels);
};

/// Reorders `labels` to follow `ids`; both id sets must be equal.
LabelVector align_to(const LabelVector& labels, const std::vector<std::string>& ids);

// FMAT v1:
//   "FMAT" | u32 version=1 | u64 rows | u64 cols | u32 flags
//   [flags bit0: u32 ndims, ndims x u64 dims]
//   rows*cols f32 row-major
//   rows x (u32 length, utf-8 bytes)
// All integers and floats little-endian.
inline constexpr std::uint32_t kFmatVersion = 1;
inline constexpr std::uint32_t kFlagDimShape = 1u;

std::string encode_fmat(const FeatureMatrix& m);

/// Decodes one FMAT record starting at `offset`, advancing it past the
/// record. Trailing bytes after the record are left to the caller.
FeatureMatrix decode_fmat_record(std::string_view bytes, std::size_t& offset);

/// Decodes a buffer holding exactly one FMAT record.
FeatureMatrix decode_fmat(std::string_view bytes);

void write_fmat(const FeatureMatrix& m, const std::filesystem::path& path);
FeatureMatrix read_fmat(const std::filesystem::path& path);

/// First column is the id, remaining columns are values.
FeatureMatrix read_csv(const std::filesystem::path& path, bool has_header);
FeatureMatrix parse_csv(std::string_view text, bool has_header);

/// Writes "id,v0,v1,..." with 9 significant digits per value.
void write_csv(const FeatureMatrix& m, const std::filesystem::path& path, bool header = false);
std::string format_csv(const FeatureMatrix& m, bool header = false);

/// Dispatches on extension: ".csv" is read as headerless CSV, anything
/// else as FMAT.
FeatureMatrix read_features(const std::filesystem::path& path);

/// "id,label" lines, an optional "id,label" header line is skipped.
LabelVector read_labels_csv(const std::filesystem::path& path);
LabelVector parse_labels_csv(std::string_view text);
std::string format_labels_csv(const LabelVector& labels);
void write_labels_csv(const LabelVector& labels, const std::filesystem::path& path);

/// Named FMAT records packed into one file:
///   record_0 ... record_{m-1} | u32 m | m x (u32 length, name bytes)
///   | u64 offset of the name table | "FSEC"
struct Section {
  std::string name;
  FeatureMatrix matrix;
};

std::string encode_sections(const std::vector<Section>& sections);
std::vector<Section> decode_sections(std::string_view bytes);
void write_sections(const std::vector<Section>& sections, const std::filesystem::path& path);
std::vector<Section> read_sections(const std::filesystem::path& path);
const FeatureMatrix& find_section(const std::vector<Section>& sections, std::string_view name);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace embclust
