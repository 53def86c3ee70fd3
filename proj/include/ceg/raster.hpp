#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ceg/error.hpp"

namespace ceg {

inline constexpr std::uint8_t kIgnore = 255;

// Absolute tolerance accepted on probability values read from disk.
inline constexpr double kProbabilityTolerance = 1e-6;
// Per-pixel tolerance for the `normalized` flag.
inline constexpr double kNormalizedTolerance = 1e-5;

struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t pixels() const { return height * width; }
  bool operator==(const Shape&) const = default;
};

std::string to_string(const Shape& shape);

// Throws ShapeMismatch naming `what` when the two shapes differ.
void require_same_shape(const Shape& a, const Shape& b, std::string_view what);

/// Per-class probability raster, C planes of H x W, plane-major.
///
/// Values are not required to sum to one per pixel; `normalized()` records
/// whether they do (within kNormalizedTolerance at every pixel).
class ProbMap {
 public:
  ProbMap(std::vector<std::string> classes, std::size_t height, std::size_t width,
          std::vector<float> data, std::optional<bool> normalized = std::nullopt);

  const std::vector<std::string>& classes() const { return classes_; }
  std::size_t num_classes() const { return classes_.size(); }
  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  const Shape& shape() const { return shape_; }
  bool normalized() const { return normalized_; }

  std::span<const float> data() const { return data_; }
  std::span<const float> plane(std::size_t c) const {
    return std::span<const float>(data_).subspan(c * shape_.pixels(), shape_.pixels());
  }
  float at(std::size_t c, std::size_t pixel) const { return data_[c * shape_.pixels() + pixel]; }

  std::optional<std::size_t> class_index(std::string_view name) const;

  bool operator==(const ProbMap&) const = default;

 private:
  std::vector<std::string> classes_;
  Shape shape_;
  std::vector<float> data_;
  bool normalized_ = false;
};

// True when every per-pixel sum is within kNormalizedTolerance of one.
bool sums_to_one(std::span<const float> plane_major, std::size_t classes, std::size_t pixels);

// Equality up to a consistent permutation of class planes: same class set,
// same shape, and bit-identical values for each named class.
bool semantically_equal(const ProbMap& a, const ProbMap& b);

/// Concept grouping of class names. The concept index is the position in
/// `concepts()`; for change-event generation index 1 is the foreground.
class Taxonomy {
 public:
  struct Concept {
    std::string name;
    std::vector<std::string> classes;

    bool operator==(const Concept&) const = default;
  };

  explicit Taxonomy(std::vector<Concept> concepts);

  // Background = {road, grass, tree, water}, Foreground = {house, building}.
  static Taxonomy buildings();

  const std::vector<Concept>& concepts() const { return concepts_; }
  std::size_t size() const { return concepts_.size(); }
  std::optional<std::size_t> concept_of(std::string_view class_name) const;
  std::vector<std::string> concept_names() const;

  bool operator==(const Taxonomy&) const = default;

 private:
  std::vector<Concept> concepts_;
};

struct BinaryValues {
  static constexpr const char* kName = "BinaryMask";
  static constexpr bool allowed(std::uint8_t v) { return v <= 1; }
};

struct TriValues {
  static constexpr const char* kName = "TriMask";
  static constexpr bool allowed(std::uint8_t v) { return v <= 1 || v == kIgnore; }
};

/// H x W 8-bit raster whose values are restricted by `Values`.
template <class Values>
class Mask {
 public:
  Mask() = default;

  Mask(std::size_t height, std::size_t width) : shape_{height, width}, data_(height * width, 0) {}

  Mask(std::size_t height, std::size_t width, std::vector<std::uint8_t> data)
      : shape_{height, width}, data_(std::move(data)) {
    if (data_.size() != shape_.pixels()) {
      throw Error(ErrorCode::ShapeMismatch, std::string(Values::kName) + " payload has " +
                                                std::to_string(data_.size()) + " values, expected " +
                                                std::to_string(shape_.pixels()));
    }
    for (std::size_t k = 0; k < data_.size(); ++k) {
      if (!Values::allowed(data_[k])) {
        throw Error(ErrorCode::IllegalPixelValue,
                    std::string(Values::kName) + " value " + std::to_string(data_[k]) +
                        " at offset " + std::to_string(k));
      }
    }
  }

  Mask(const Shape& shape, std::vector<std::uint8_t> data)
      : Mask(shape.height, shape.width, std::move(data)) {}

  static Mask filled(const Shape& shape, std::uint8_t value) {
    return Mask(shape, std::vector<std::uint8_t>(shape.pixels(), value));
  }

  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  std::span<const std::uint8_t> data() const { return data_; }
  std::uint8_t operator[](std::size_t k) const { return data_[k]; }
  std::uint8_t at(std::size_t row, std::size_t col) const { return data_[row * shape_.width + col]; }

  std::size_t count(std::uint8_t value) const {
    std::size_t n = 0;
    for (auto v : data_) n += (v == value);
    return n;
  }

  bool operator==(const Mask&) const = default;

 private:
  Shape shape_;
  std::vector<std::uint8_t> data_;
};

using BinaryMask = Mask<BinaryValues>;
using TriMask = Mask<TriValues>;

TriMask to_trimask(const BinaryMask& mask);

/// Disjoint, non-empty instance masks stored as a compact label map
/// (0 = background, i + 1 = instance i).
class InstanceSet {
 public:
  InstanceSet() = default;
  InstanceSet(std::size_t height, std::size_t width);

  // One instance per distinct nonzero label, ordered by ascending label.
  static InstanceSet from_label_map(const Shape& shape, std::span<const std::uint32_t> labels);
  // Rejects overlapping or empty masks.
  static InstanceSet from_masks(const Shape& shape, const std::vector<BinaryMask>& masks);

  std::size_t size() const { return sizes_.size(); }
  bool empty() const { return sizes_.empty(); }
  const Shape& shape() const { return shape_; }
  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }

  std::span<const std::uint32_t> label_map() const { return labels_; }
  std::size_t instance_size(std::size_t i) const { return sizes_[i]; }
  std::span<const std::size_t> sizes() const { return sizes_; }

  BinaryMask mask(std::size_t i) const;
  std::vector<BinaryMask> masks() const;
  BinaryMask foreground() const;

  bool operator==(const InstanceSet&) const = default;

 private:
  Shape shape_;
  std::vector<std::uint32_t> labels_;
  std::vector<std::size_t> sizes_;
};

/// D-dimensional feature vector per pixel, pixel-major.
class FeatureMap {
 public:
  FeatureMap(std::size_t height, std::size_t width, std::size_t dim, std::vector<double> data);

  const Shape& shape() const { return shape_; }
  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  std::size_t dim() const { return dim_; }
  std::span<const double> data() const { return data_; }
  std::span<const double> at(std::size_t pixel) const {
    return std::span<const double>(data_).subspan(pixel * dim_, dim_);
  }

 private:
  Shape shape_;
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

/// Linear classifier: K x D weights (row-major) plus a length-K bias.
class ClassifierWeights {
 public:
  ClassifierWeights(std::size_t dim, std::size_t num_classes, std::vector<double> weights,
                    std::vector<double> bias = {});

  std::size_t dim() const { return dim_; }
  std::size_t num_classes() const { return num_classes_; }
  std::span<const double> row(std::size_t k) const {
    return std::span<const double>(weights_).subspan(k * dim_, dim_);
  }
  std::span<const double> weights() const { return weights_; }
  std::span<const double> bias() const { return bias_; }

 private:
  std::size_t dim_;
  std::size_t num_classes_;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

}  // namespace ceg
