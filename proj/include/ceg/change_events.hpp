#pragma once

#include <cstddef>
#include <vector>

#include "ceg/raster.hpp"

namespace ceg {

enum class Connectivity { Four = 4, Eight = 8 };

struct PixelCegConfig {
  double gamma = 0.8;
  Taxonomy taxonomy = Taxonomy::buildings();
};

struct InstanceCegConfig {
  double delta = 0.0;
  Connectivity connectivity = Connectivity::Eight;
};

struct PixelCegOutput {
  BinaryMask seg_t1;
  BinaryMask seg_t2;
  BinaryMask rel;
  BinaryMask pixel_diff;
  ProbMap concept_probs_t1;
  ProbMap concept_probs_t2;
};

/// Dense M x N matrix of similarity scores, row-major.
class ScoreMatrix {
 public:
  ScoreMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), values_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t m, std::size_t n) const { return values_[m * cols_ + n]; }
  double& operator()(std::size_t m, std::size_t n) { return values_[m * cols_ + n]; }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> values_;
};

struct ChangeScores {
  std::vector<double> t1;  // row sums, one per t1 instance
  std::vector<double> t2;  // column sums, one per t2 instance
};

// Per pixel and concept a: max over the concept's classes. Output flag
// `normalized` is always false.
ProbMap concept_pool(const ProbMap& probs, const Taxonomy& taxonomy);

// Argmax over concepts with ties going to the lower index.
BinaryMask concept_argmax(const ProbMap& concept_probs);

PixelCegOutput pixel_ceg(const ProbMap& p1, const ProbMap& p2, const PixelCegConfig& cfg);

// Maximal connected regions of 1-pixels; instances are numbered in raster
// order of their first pixel.
InstanceSet connected_components(const BinaryMask& mask, Connectivity connectivity = Connectivity::Eight);

ScoreMatrix iou_matrix(const InstanceSet& f1, const InstanceSet& f2);

ChangeScores change_scores(const ScoreMatrix& t);

// OR of every instance (from either temporal) whose summed IoU against the
// other temporal is <= delta.
BinaryMask instance_ceg(const InstanceSet& f1, const InstanceSet& f2, const InstanceCegConfig& cfg);

// Instance-level CEG for semantic-only VLM output: instances are the
// connected components of each foreground segmentation.
BinaryMask instance_ceg(const BinaryMask& seg_t1, const BinaryMask& seg_t2,
                        const InstanceCegConfig& cfg);

// Reliable pixels get pixel_diff * ins_diff; unreliable pixels get 255.
TriMask mixed_ceg(const BinaryMask& pixel_diff, const BinaryMask& ins_diff, const BinaryMask& rel);

// Pixel-level change with unreliable pixels marked 255.
TriMask reliable_pixel_diff(const BinaryMask& pixel_diff, const BinaryMask& rel);

// Argmax concept where its probability reaches beta, else 255.
TriMask seg_pseudo_labels(const ProbMap& concept_probs, double beta);

}  // namespace ceg
