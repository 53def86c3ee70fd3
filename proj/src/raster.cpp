#include "ceg/raster.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace ceg {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::RangeError: return "RangeError";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::IllegalPixelValue: return "IllegalPixelValue";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::TaxonomyMismatch: return "TaxonomyMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::ClassOutOfRange: return "ClassOutOfRange";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::StepOutOfRange: return "StepOutOfRange";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::PlacementFailure: return "PlacementFailure";
    case ErrorCode::ManifestError: return "ManifestError";
    case ErrorCode::MissingPrediction: return "MissingPrediction";
    case ErrorCode::FixtureError: return "FixtureError";
  }
  return "Unknown";
}

std::string to_string(const Shape& shape) {
  return std::to_string(shape.height) + "x" + std::to_string(shape.width);
}

void require_same_shape(const Shape& a, const Shape& b, std::string_view what) {
  if (a != b) {
    throw Error(ErrorCode::ShapeMismatch,
                std::string(what) + ": " + to_string(a) + " vs " + to_string(b));
  }
}

// ---------------------------------------------------------------------------
// ProbMap

bool sums_to_one(std::span<const float> plane_major, std::size_t classes, std::size_t pixels) {
  for (std::size_t k = 0; k < pixels; ++k) {
    double sum = 0.0;
    for (std::size_t c = 0; c < classes; ++c) sum += plane_major[c * pixels + k];
    if (std::abs(sum - 1.0) > kNormalizedTolerance) return false;
  }
  return true;
}

ProbMap::ProbMap(std::vector<std::string> classes, std::size_t height, std::size_t width,
                 std::vector<float> data, std::optional<bool> normalized)
    : classes_(std::move(classes)), shape_{height, width}, data_(std::move(data)) {
  if (classes_.empty() || height == 0 || width == 0) {
    throw Error(ErrorCode::InvalidArgument, "ProbMap needs C, H, W >= 1 (got C=" +
                                                std::to_string(classes_.size()) + ", " +
                                                to_string(shape_) + ")");
  }
  std::set<std::string_view> seen;
  for (const auto& name : classes_) {
    if (!seen.insert(name).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate class name '" + name + "'");
    }
  }
  const std::size_t expected = classes_.size() * shape_.pixels();
  if (data_.size() != expected) {
    throw Error(ErrorCode::TruncatedPayload, "ProbMap payload has " + std::to_string(data_.size()) +
                                                 " values, expected " + std::to_string(expected));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const double v = data_[i];
    if (!(v >= -kProbabilityTolerance && v <= 1.0 + kProbabilityTolerance)) {
      throw Error(ErrorCode::RangeError,
                  "probability " + std::to_string(v) + " at index " + std::to_string(i));
    }
  }
  normalized_ = normalized.value_or(sums_to_one(data_, classes_.size(), shape_.pixels()));
}

std::optional<std::size_t> ProbMap::class_index(std::string_view name) const {
  auto it = std::find(classes_.begin(), classes_.end(), name);
  if (it == classes_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - classes_.begin());
}

bool semantically_equal(const ProbMap& a, const ProbMap& b) {
  if (a.shape() != b.shape() || a.num_classes() != b.num_classes()) return false;
  for (std::size_t c = 0; c < a.num_classes(); ++c) {
    auto other = b.class_index(a.classes()[c]);
    if (!other) return false;
    auto pa = a.plane(c);
    auto pb = b.plane(*other);
    if (!std::equal(pa.begin(), pa.end(), pb.begin())) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Taxonomy

Taxonomy::Taxonomy(std::vector<Concept> concepts) : concepts_(std::move(concepts)) {
  if (concepts_.empty()) throw Error(ErrorCode::InvalidArgument, "taxonomy has no concepts");
  std::set<std::string> names;
  std::set<std::string> members;
  for (const auto& concept_ : concepts_) {
    if (!names.insert(concept_.name).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate concept '" + concept_.name + "'");
    }
    if (concept_.classes.empty()) {
      throw Error(ErrorCode::InvalidArgument, "concept '" + concept_.name + "' has no classes");
    }
    for (const auto& cls : concept_.classes) {
      if (!members.insert(cls).second) {
        throw Error(ErrorCode::InvalidArgument,
                    "class '" + cls + "' belongs to more than one concept");
      }
    }
  }
}

Taxonomy Taxonomy::buildings() {
  return Taxonomy({{"Background", {"road", "grass", "tree", "water"}},
                   {"Foreground", {"house", "building"}}});
}

std::optional<std::size_t> Taxonomy::concept_of(std::string_view class_name) const {
  for (std::size_t a = 0; a < concepts_.size(); ++a) {
    const auto& cls = concepts_[a].classes;
    if (std::find(cls.begin(), cls.end(), class_name) != cls.end()) return a;
  }
  return std::nullopt;
}

std::vector<std::string> Taxonomy::concept_names() const {
  std::vector<std::string> out;
  out.reserve(concepts_.size());
  for (const auto& c : concepts_) out.push_back(c.name);
  return out;
}

// ---------------------------------------------------------------------------
// Masks and instances

TriMask to_trimask(const BinaryMask& mask) {
  return TriMask(mask.shape(), std::vector<std::uint8_t>(mask.data().begin(), mask.data().end()));
}

InstanceSet::InstanceSet(std::size_t height, std::size_t width)
    : shape_{height, width}, labels_(height * width, 0) {}

InstanceSet InstanceSet::from_label_map(const Shape& shape, std::span<const std::uint32_t> labels) {
  if (labels.size() != shape.pixels()) {
    throw Error(ErrorCode::ShapeMismatch, "label map has " + std::to_string(labels.size()) +
                                              " values for shape " + to_string(shape));
  }
  std::vector<std::uint32_t> distinct;
  for (auto l : labels) {
    if (l != 0) distinct.push_back(l);
  }
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  InstanceSet out(shape.height, shape.width);
  out.sizes_.assign(distinct.size(), 0);
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (labels[k] == 0) continue;
    auto idx = static_cast<std::size_t>(
        std::lower_bound(distinct.begin(), distinct.end(), labels[k]) - distinct.begin());
    out.labels_[k] = static_cast<std::uint32_t>(idx + 1);
    ++out.sizes_[idx];
  }
  return out;
}

InstanceSet InstanceSet::from_masks(const Shape& shape, const std::vector<BinaryMask>& masks) {
  InstanceSet out(shape.height, shape.width);
  out.sizes_.assign(masks.size(), 0);
  for (std::size_t i = 0; i < masks.size(); ++i) {
    require_same_shape(shape, masks[i].shape(), "instance mask " + std::to_string(i));
    auto data = masks[i].data();
    for (std::size_t k = 0; k < data.size(); ++k) {
      if (!data[k]) continue;
      if (out.labels_[k] != 0) {
        throw Error(ErrorCode::InvalidArgument,
                    "instances " + std::to_string(out.labels_[k] - 1) + " and " +
                        std::to_string(i) + " overlap at offset " + std::to_string(k));
      }
      out.labels_[k] = static_cast<std::uint32_t>(i + 1);
      ++out.sizes_[i];
    }
    if (out.sizes_[i] == 0) {
      throw Error(ErrorCode::InvalidArgument, "instance " + std::to_string(i) + " is empty");
    }
  }
  return out;
}

BinaryMask InstanceSet::mask(std::size_t i) const {
  std::vector<std::uint8_t> data(labels_.size(), 0);
  const auto label = static_cast<std::uint32_t>(i + 1);
  for (std::size_t k = 0; k < labels_.size(); ++k) data[k] = labels_[k] == label;
  return BinaryMask(shape_, std::move(data));
}

std::vector<BinaryMask> InstanceSet::masks() const {
  std::vector<BinaryMask> out;
  out.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) out.push_back(mask(i));
  return out;
}

BinaryMask InstanceSet::foreground() const {
  std::vector<std::uint8_t> data(labels_.size(), 0);
  for (std::size_t k = 0; k < labels_.size(); ++k) data[k] = labels_[k] != 0;
  return BinaryMask(shape_, std::move(data));
}

// ---------------------------------------------------------------------------
// Features and heads

namespace {

void require_finite(std::span<const double> values, std::string_view what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(ErrorCode::NonFiniteInput,
                  std::string(what) + " has a non-finite value at index " + std::to_string(i));
    }
  }
}

}  // namespace

FeatureMap::FeatureMap(std::size_t height, std::size_t width, std::size_t dim,
                       std::vector<double> data)
    : shape_{height, width}, dim_(dim), data_(std::move(data)) {
  if (dim_ == 0) throw Error(ErrorCode::DimMismatch, "feature dimension must be >= 1");
  if (data_.size() != shape_.pixels() * dim_) {
    throw Error(ErrorCode::DimMismatch, "feature payload has " + std::to_string(data_.size()) +
                                            " values, expected " +
                                            std::to_string(shape_.pixels() * dim_));
  }
  require_finite(data_, "FeatureMap");
}

ClassifierWeights::ClassifierWeights(std::size_t dim, std::size_t num_classes,
                                     std::vector<double> weights, std::vector<double> bias)
    : dim_(dim), num_classes_(num_classes), weights_(std::move(weights)), bias_(std::move(bias)) {
  if (num_classes_ < 2) throw Error(ErrorCode::InvalidArgument, "classifier needs K >= 2");
  if (dim_ == 0) throw Error(ErrorCode::DimMismatch, "classifier needs D >= 1");
  if (weights_.size() != dim_ * num_classes_) {
    throw Error(ErrorCode::DimMismatch, "classifier weights have " +
                                            std::to_string(weights_.size()) + " values, expected " +
                                            std::to_string(dim_ * num_classes_));
  }
  if (bias_.empty()) bias_.assign(num_classes_, 0.0);
  if (bias_.size() != num_classes_) {
    throw Error(ErrorCode::DimMismatch, "classifier bias has " + std::to_string(bias_.size()) +
                                            " values, expected " + std::to_string(num_classes_));
  }
  require_finite(weights_, "classifier weights");
  require_finite(bias_, "classifier bias");
}

}  // namespace ceg
