#pragma once

// Feature matrices, label vectors and data bundles, plus their on-disk forms.
//
// Binary feature file (little-endian):
//   "PACE" | version u32 = 1 | n u64 | d u64 | dtype u8 (0 = f32) | 3 zero bytes
//   followed by n*d f32 values, row-major.
// Binary label file (little-endian):
//   "PACL" | version u32 = 1 | n u64 | K u32, followed by n u32 labels.
// Files ending in ".csv" are read and written as comma-separated text with one
// row per line and no header.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pace/error.hpp"
#include "pace/random.hpp"

namespace pace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// n x d samples, one row per sample. Entries must be finite.
using FeatureMatrix = Matrix;

struct LabelVector {
  std::vector<std::uint32_t> labels;
  std::uint32_t num_classes = 0;

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }
  std::uint32_t operator[](std::size_t i) const { return labels[i]; }
};

struct LabeledSet {
  FeatureMatrix features;
  LabelVector labels;

  Index size() const noexcept { return features.rows(); }
  bool empty() const noexcept { return features.rows() == 0; }
};

/// Everything one ensemble member trains and predicts on.
///
/// `target_labeled` is empty exactly in the unsupervised setting. The
/// evaluation labels belong to `target_unlabeled` and are never read by any
/// training routine. `validation` is an optional held-out labeled target set.
struct DataBundle {
  LabeledSet source;
  LabeledSet target_labeled;
  FeatureMatrix target_unlabeled;
  std::optional<LabelVector> target_eval_labels;
  LabeledSet validation;
  std::uint32_t num_classes = 0;

  Index dim() const noexcept { return source.features.cols(); }
  bool is_uda() const noexcept { return target_labeled.empty(); }
};

enum class EmptyPolicy { reject, allow };

// ---------------------------------------------------------------------------
// Validation

inline void validate_features(const FeatureMatrix& m, EmptyPolicy empty = EmptyPolicy::reject,
                              std::string_view what = "feature matrix") {
  if (m.cols() < 1) throw ValidationError(std::string(what) + ": dimension must be >= 1");
  if (m.rows() < 1 && empty == EmptyPolicy::reject) {
    throw ValidationError(std::string(what) + ": no samples");
  }
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (!std::isfinite(m(i, j))) {
        throw ValidationError(std::string(what) + ": non-finite entry at row " +
                              std::to_string(i) + ", column " + std::to_string(j));
      }
    }
  }
}

inline void validate_labels(const LabelVector& v, EmptyPolicy empty = EmptyPolicy::reject,
                            std::string_view what = "label vector") {
  if (v.empty() && empty == EmptyPolicy::reject) {
    throw ValidationError(std::string(what) + ": no labels");
  }
  if (v.num_classes == 0 && !v.empty()) {
    throw ValidationError(std::string(what) + ": class count is zero");
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v.labels[i] >= v.num_classes) {
      throw ValidationError(std::string(what) + ": label " + std::to_string(v.labels[i]) +
                            " at index " + std::to_string(i) + " is not below K=" +
                            std::to_string(v.num_classes));
    }
  }
}

inline void validate_labeled_set(const LabeledSet& s, Index dim, EmptyPolicy empty,
                                 std::string_view what) {
  if (s.empty() && s.labels.empty()) {
    if (empty == EmptyPolicy::reject) throw ValidationError(std::string(what) + ": empty");
    return;
  }
  validate_features(s.features, empty, what);
  validate_labels(s.labels, empty, what);
  if (static_cast<Index>(s.labels.size()) != s.features.rows()) {
    throw DimensionError(std::string(what) + ": " + std::to_string(s.features.rows()) +
                         " rows but " + std::to_string(s.labels.size()) + " labels");
  }
  if (s.features.cols() != dim) {
    throw DimensionError(std::string(what) + ": dimension " + std::to_string(s.features.cols()) +
                         " differs from source dimension " + std::to_string(dim));
  }
}

inline void validate_bundle(const DataBundle& b) {
  if (b.num_classes == 0) throw ValidationError("bundle: class count is zero");
  const Index d = b.dim();
  validate_labeled_set(b.source, d, EmptyPolicy::reject, "source");
  validate_labeled_set(b.target_labeled, d, EmptyPolicy::allow, "target_labeled");
  validate_labeled_set(b.validation, d, EmptyPolicy::allow, "validation");
  validate_features(b.target_unlabeled, EmptyPolicy::reject, "target_unlabeled");
  if (b.target_unlabeled.cols() != d) {
    throw DimensionError("target_unlabeled: dimension differs from source");
  }
  for (const LabelVector* v : {&b.source.labels, &b.target_labeled.labels, &b.validation.labels}) {
    if (!v->empty() && v->num_classes != b.num_classes) {
      throw ValidationError("bundle: label sets disagree on the class count");
    }
  }
  if (b.target_eval_labels) {
    validate_labels(*b.target_eval_labels, EmptyPolicy::reject, "target_eval_labels");
    if (static_cast<Index>(b.target_eval_labels->size()) != b.target_unlabeled.rows()) {
      throw DimensionError("target_eval_labels: length differs from target_unlabeled rows");
    }
  }
}

// ---------------------------------------------------------------------------
// Binary encoding helpers

namespace detail {

inline constexpr std::array<char, 4> kFeatureMagic{'P', 'A', 'C', 'E'};
inline constexpr std::array<char, 4> kLabelMagic{'P', 'A', 'C', 'L'};
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::size_t kFeatureHeaderBytes = 28;
inline constexpr std::size_t kLabelHeaderBytes = 20;

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>(u & 0xFFu));
    u = static_cast<U>(u >> 8);
  }
}

template <typename T>
T get_le(std::string_view bytes, std::size_t offset) {
  using U = std::make_unsigned_t<T>;
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    u |= static_cast<U>(static_cast<U>(static_cast<unsigned char>(bytes[offset + i])) << (8 * i));
  }
  return static_cast<T>(u);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return bytes;
}

inline void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

inline bool is_csv(const std::filesystem::path& path) { return path.extension() == ".csv"; }

inline std::vector<std::vector<std::string_view>> split_csv(std::string_view text) {
  std::vector<std::vector<std::string_view>> rows;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    std::vector<std::string_view> fields;
    std::size_t fpos = 0;
    while (true) {
      std::size_t comma = line.find(',', fpos);
      std::string_view field = line.substr(fpos, comma == std::string_view::npos ? line.npos : comma - fpos);
      const auto first = field.find_first_not_of(" \t");
      const auto last = field.find_last_not_of(" \t");
      fields.push_back(first == std::string_view::npos ? std::string_view{} : field.substr(first, last - first + 1));
      if (comma == std::string_view::npos) break;
      fpos = comma + 1;
    }
    rows.push_back(std::move(fields));
  }
  return rows;
}

template <typename T>
T parse_number(std::string_view field, std::string_view what) {
  T value{};
  const auto* begin = field.data();
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc{} || ptr != end) {
    throw FormatError(std::string(what) + ": cannot parse '" + std::string(field) + "'");
  }
  return value;
}

inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Feature files

inline FeatureMatrix decode_features(std::string_view bytes, std::string_view source = "features") {
  using namespace detail;
  const std::string where(source);
  if (bytes.size() < kFeatureHeaderBytes) throw LengthError(where + ": truncated header");
  if (!std::equal(kFeatureMagic.begin(), kFeatureMagic.end(), bytes.begin())) {
    throw FormatError(where + ": bad magic, expected PACE");
  }
  const auto version = get_le<std::uint32_t>(bytes, 4);
  if (version != kFormatVersion) {
    throw FormatError(where + ": unsupported version " + std::to_string(version));
  }
  const auto n = get_le<std::uint64_t>(bytes, 8);
  const auto d = get_le<std::uint64_t>(bytes, 16);
  const auto dtype = static_cast<unsigned char>(bytes[24]);
  if (dtype != 0) throw FormatError(where + ": unsupported dtype " + std::to_string(dtype));
  constexpr std::uint64_t kMaxEntries = std::numeric_limits<std::uint64_t>::max() / 8;
  if (d != 0 && n > kMaxEntries / d) throw LengthError(where + ": header size overflows");
  const std::uint64_t count = n * d;
  if (bytes.size() - kFeatureHeaderBytes != count * 4) {
    throw LengthError(where + ": header declares " + std::to_string(n) + "x" + std::to_string(d) +
                      " but payload holds " + std::to_string(bytes.size() - kFeatureHeaderBytes) +
                      " bytes");
  }
  FeatureMatrix m(static_cast<Index>(n), static_cast<Index>(d));
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto raw = get_le<std::uint32_t>(bytes, kFeatureHeaderBytes + 4 * k);
    m.data()[k] = static_cast<double>(std::bit_cast<float>(raw));
  }
  return m;
}

inline std::string encode_features(const FeatureMatrix& m) {
  using namespace detail;
  validate_features(m, EmptyPolicy::reject);
  std::string out;
  out.reserve(kFeatureHeaderBytes + static_cast<std::size_t>(m.size()) * 4);
  out.append(kFeatureMagic.data(), kFeatureMagic.size());
  put_le<std::uint32_t>(out, kFormatVersion);
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
  put_le<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
  out.push_back('\0');  // dtype f32
  out.append(3, '\0');
  for (Index k = 0; k < m.size(); ++k) {
    const auto f = static_cast<float>(m.data()[k]);
    if (!std::isfinite(f)) {
      throw ValidationError("feature value " + format_double(m.data()[k]) + " overflows f32");
    }
    put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

inline FeatureMatrix load_features(const std::filesystem::path& path,
                                   EmptyPolicy empty = EmptyPolicy::reject) {
  const std::string bytes = detail::read_file(path);
  FeatureMatrix m;
  if (detail::is_csv(path)) {
    const auto rows = detail::split_csv(bytes);
    if (rows.empty()) {
      if (empty == EmptyPolicy::reject) throw ValidationError(path.string() + ": no samples");
      return m;
    }
    const std::size_t d = rows.front().size();
    m.resize(static_cast<Index>(rows.size()), static_cast<Index>(d));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != d) {
        throw FormatError(path.string() + ": row " + std::to_string(i) + " has " +
                          std::to_string(rows[i].size()) + " fields, expected " + std::to_string(d));
      }
      for (std::size_t j = 0; j < d; ++j) {
        m(static_cast<Index>(i), static_cast<Index>(j)) =
            detail::parse_number<double>(rows[i][j], path.string());
      }
    }
  } else {
    m = decode_features(bytes, path.string());
  }
  validate_features(m, empty, path.string());
  return m;
}

inline void save_features(const FeatureMatrix& m, const std::filesystem::path& path) {
  if (detail::is_csv(path)) {
    validate_features(m, EmptyPolicy::reject);
    std::string out;
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) {
        if (j) out.push_back(',');
        out += detail::format_double(m(i, j));
      }
      out.push_back('\n');
    }
    detail::write_file(path, out);
    return;
  }
  detail::write_file(path, encode_features(m));
}

// ---------------------------------------------------------------------------
// Label files

inline LabelVector decode_labels(std::string_view bytes, std::string_view source = "labels") {
  using namespace detail;
  const std::string where(source);
  if (bytes.size() < kLabelHeaderBytes) throw LengthError(where + ": truncated header");
  if (!std::equal(kLabelMagic.begin(), kLabelMagic.end(), bytes.begin())) {
    throw FormatError(where + ": bad magic, expected PACL");
  }
  const auto version = get_le<std::uint32_t>(bytes, 4);
  if (version != kFormatVersion) {
    throw FormatError(where + ": unsupported version " + std::to_string(version));
  }
  const auto n = get_le<std::uint64_t>(bytes, 8);
  const auto k = get_le<std::uint32_t>(bytes, 16);
  if (n > std::numeric_limits<std::uint64_t>::max() / 4 ||
      bytes.size() - kLabelHeaderBytes != n * 4) {
    throw LengthError(where + ": header declares " + std::to_string(n) + " labels but payload holds " +
                      std::to_string(bytes.size() - kLabelHeaderBytes) + " bytes");
  }
  LabelVector v;
  v.num_classes = k;
  v.labels.resize(static_cast<std::size_t>(n));
  for (std::uint64_t i = 0; i < n; ++i) {
    v.labels[i] = get_le<std::uint32_t>(bytes, kLabelHeaderBytes + 4 * i);
  }
  return v;
}

inline std::string encode_labels(const LabelVector& v) {
  using namespace detail;
  validate_labels(v, EmptyPolicy::allow);
  std::string out;
  out.reserve(kLabelHeaderBytes + v.size() * 4);
  out.append(kLabelMagic.data(), kLabelMagic.size());
  put_le<std::uint32_t>(out, kFormatVersion);
  put_le<std::uint64_t>(out, v.size());
  put_le<std::uint32_t>(out, v.num_classes);
  for (auto label : v.labels) put_le<std::uint32_t>(out, label);
  return out;
}

/// Loads a label file. CSV files carry no class count: it is `num_classes`
/// when given, otherwise one past the largest label.
inline LabelVector load_labels(const std::filesystem::path& path,
                               EmptyPolicy empty = EmptyPolicy::reject,
                               std::optional<std::uint32_t> num_classes = std::nullopt) {
  const std::string bytes = detail::read_file(path);
  LabelVector v;
  if (detail::is_csv(path)) {
    for (const auto& row : detail::split_csv(bytes)) {
      for (auto field : row) {
        if (field.empty()) continue;
        v.labels.push_back(detail::parse_number<std::uint32_t>(field, path.string()));
      }
    }
    if (num_classes) {
      v.num_classes = *num_classes;
    } else if (!v.labels.empty()) {
      v.num_classes = *std::max_element(v.labels.begin(), v.labels.end()) + 1;
    }
  } else {
    v = decode_labels(bytes, path.string());
    if (num_classes && *num_classes != v.num_classes) {
      throw ValidationError(path.string() + ": file declares K=" + std::to_string(v.num_classes) +
                            ", expected " + std::to_string(*num_classes));
    }
  }
  validate_labels(v, empty, path.string());
  return v;
}

inline void save_labels(const LabelVector& v, const std::filesystem::path& path) {
  if (detail::is_csv(path)) {
    validate_labels(v, EmptyPolicy::allow);
    std::string out;
    for (auto label : v.labels) out += std::to_string(label) + "\n";
    detail::write_file(path, out);
    return;
  }
  detail::write_file(path, encode_labels(v));
}

// ---------------------------------------------------------------------------
// Normalization

inline constexpr double kDegenerateRowNorm = 1e-30;

inline FeatureMatrix l2_normalize(const FeatureMatrix& m) {
  FeatureMatrix out = m;
  for (Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    if (!(norm >= kDegenerateRowNorm)) {
      throw DegenerateError("l2_normalize: row " + std::to_string(i) + " has norm " +
                            detail::format_double(norm));
    }
    out.row(i) /= norm;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Target splits

struct SplitSpec {
  std::size_t shots = 0;
  std::size_t val_per_class = 0;
  std::uint64_t seed = 0;
};

/// Sorted, pairwise disjoint index sets covering [0, n).
struct SplitIndices {
  std::vector<std::size_t> labeled;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> unlabeled;
};

/// Per class, shuffles that class's indices with Rng(seed ^ class) and takes
/// the first `shots` as labeled and the next `val_per_class` as validation.
inline SplitIndices make_split(const LabelVector& labels, const SplitSpec& spec) {
  validate_labels(labels, EmptyPolicy::allow);
  std::vector<std::vector<std::size_t>> by_class(labels.num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  SplitIndices split;
  const std::size_t needed = spec.shots + spec.val_per_class;
  for (std::uint32_t c = 0; c < labels.num_classes; ++c) {
    auto& members = by_class[c];
    if (members.size() < needed) {
      throw InsufficientDataError("make_split: class " + std::to_string(c) + " has " +
                                  std::to_string(members.size()) + " samples, needs " +
                                  std::to_string(needed));
    }
    if (needed == 0) {
      split.unlabeled.insert(split.unlabeled.end(), members.begin(), members.end());
      continue;
    }
    Rng rng(spec.seed ^ static_cast<std::uint64_t>(c));
    rng.shuffle(std::span<std::size_t>(members));
    const auto shots_end = members.begin() + static_cast<std::ptrdiff_t>(spec.shots);
    const auto val_end = shots_end + static_cast<std::ptrdiff_t>(spec.val_per_class);
    split.labeled.insert(split.labeled.end(), members.begin(), shots_end);
    split.validation.insert(split.validation.end(), shots_end, val_end);
    split.unlabeled.insert(split.unlabeled.end(), val_end, members.end());
  }
  std::sort(split.labeled.begin(), split.labeled.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.unlabeled.begin(), split.unlabeled.end());
  return split;
}

/// Overload taking the target features, checked against the label count.
inline SplitIndices make_split(const FeatureMatrix& target_features, const LabelVector& labels,
                               const SplitSpec& spec) {
  if (static_cast<Index>(labels.size()) != target_features.rows()) {
    throw DimensionError("make_split: feature rows and label count differ");
  }
  return make_split(labels, spec);
}

inline FeatureMatrix select_rows(const FeatureMatrix& m, std::span<const std::size_t> rows) {
  FeatureMatrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = m.row(static_cast<Index>(rows[i]));
  return out;
}

inline LabelVector select_labels(const LabelVector& v, std::span<const std::size_t> rows) {
  LabelVector out;
  out.num_classes = v.num_classes;
  out.labels.reserve(rows.size());
  for (auto r : rows) out.labels.push_back(v.labels[r]);
  return out;
}

/// Builds a bundle from a labeled source set and a fully labeled target set.
/// Target labels outside the labeled/validation slots survive only as
/// evaluation labels.
inline DataBundle make_bundle(LabeledSet source, const FeatureMatrix& target_features,
                              const LabelVector& target_labels, const SplitSpec& spec) {
  const SplitIndices split = make_split(target_features, target_labels, spec);
  DataBundle b;
  b.num_classes = source.labels.num_classes;
  b.source = std::move(source);
  b.target_labeled = {select_rows(target_features, split.labeled),
                      select_labels(target_labels, split.labeled)};
  b.validation = {select_rows(target_features, split.validation),
                  select_labels(target_labels, split.validation)};
  b.target_unlabeled = select_rows(target_features, split.unlabeled);
  b.target_eval_labels = select_labels(target_labels, split.unlabeled);
  for (auto* s : {&b.target_labeled, &b.validation}) {
    if (s->empty()) s->features.resize(0, target_features.cols());
  }
  validate_bundle(b);
  return b;
}

// ---------------------------------------------------------------------------
// Bundle directories
//
//   source.pace / source.pacl                  required
//   target_unlabeled.pace                      required
//   target_unlabeled.pacl                      optional evaluation labels
//   target_labeled.pace / target_labeled.pacl  optional, absent in UDA
//   validation.pace / validation.pacl          optional

namespace detail {

inline LabeledSet load_optional_set(const std::filesystem::path& dir, const std::string& stem,
                                    Index dim, std::uint32_t k) {
  const auto feat = dir / (stem + ".pace");
  const auto lab = dir / (stem + ".pacl");
  const bool has_feat = std::filesystem::exists(feat);
  const bool has_lab = std::filesystem::exists(lab);
  if (has_feat != has_lab) {
    throw ValidationError(dir.string() + ": " + stem + " needs both .pace and .pacl files");
  }
  LabeledSet s;
  if (!has_feat) {
    s.features.resize(0, dim);
    s.labels.num_classes = k;
    return s;
  }
  s.labels = load_labels(lab, EmptyPolicy::allow, k);
  if (s.labels.empty()) {
    s.features.resize(0, dim);
  } else {
    s.features = load_features(feat);
  }
  return s;
}

}  // namespace detail

inline DataBundle load_bundle(const std::filesystem::path& dir) {
  DataBundle b;
  b.source.features = load_features(dir / "source.pace");
  b.source.labels = load_labels(dir / "source.pacl");
  b.num_classes = b.source.labels.num_classes;
  b.target_unlabeled = load_features(dir / "target_unlabeled.pace");
  if (std::filesystem::exists(dir / "target_unlabeled.pacl")) {
    b.target_eval_labels = load_labels(dir / "target_unlabeled.pacl", EmptyPolicy::reject, b.num_classes);
  }
  b.target_labeled = detail::load_optional_set(dir, "target_labeled", b.dim(), b.num_classes);
  b.validation = detail::load_optional_set(dir, "validation", b.dim(), b.num_classes);
  validate_bundle(b);
  return b;
}

inline void save_bundle(const DataBundle& b, const std::filesystem::path& dir) {
  validate_bundle(b);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  save_features(b.source.features, dir / "source.pace");
  save_labels(b.source.labels, dir / "source.pacl");
  save_features(b.target_unlabeled, dir / "target_unlabeled.pace");
  if (b.target_eval_labels) save_labels(*b.target_eval_labels, dir / "target_unlabeled.pacl");
  for (const auto& [set, stem] : {std::pair{&b.target_labeled, "target_labeled"},
                                  std::pair{&b.validation, "validation"}}) {
    const auto feat = dir / (std::string(stem) + ".pace");
    const auto lab = dir / (std::string(stem) + ".pacl");
    if (set->empty()) {
      std::filesystem::remove(feat, ec);
      std::filesystem::remove(lab, ec);
      continue;
    }
    save_features(set->features, feat);
    save_labels(set->labels, lab);
  }
}

}  // namespace pace
