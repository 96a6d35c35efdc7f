#pragma once

#include "nph/labels.hpp"
#include "nph/random_forest.hpp"
#include "nph/volume.hpp"

#include <filesystem>
#include <vector>

namespace nph {

/// Per-voxel feature channels for the tissue forest: raw intensity, two
/// Gaussian-smoothed scales, and gradient magnitude. Raw HU alone cannot
/// separate partial-volume boundaries, so the smoothed channels stay in by
/// default; intensity_only retains the single-channel variant.
struct FeatureOptions {
  bool intensity_only = false;
};

struct FeatureVolume {
  std::vector<ScalarVolume> channels;

  const GridGeometry& geometry() const { return channels.front().geometry(); }
  int n_features() const { return int(channels.size()); }

  void row(std::int64_t flat, double* out) const {
    for (std::size_t c = 0; c < channels.size(); ++c) out[c] = channels[c][flat];
  }
};

/// Expects a denoised template-space volume. Smoothing is separable Gaussian
/// with reflect-padded borders (sigma 1 and 2 voxels); gradient magnitude is
/// central-difference, HU per mm.
FeatureVolume extract_features(const ScalarVolume& volume, const FeatureOptions& options = {});

/// One sparsely annotated voxel: index triple plus tissue class.
struct VoxelAnnotation {
  int x = 0, y = 0, z = 0;
  TissueClass label = TissueClass::Background;
};

/// CSV rows x,y,z,class_id (optional header). Errors carry row numbers.
std::vector<VoxelAnnotation> load_annotations_csv(const std::filesystem::path& path);
void save_annotations_csv(const std::vector<VoxelAnnotation>& annotations,
                          const std::filesystem::path& path);

/// Feature rows + labels for the annotated voxels. Every annotation must be
/// in bounds and all four classes must appear at least once.
struct LabeledVoxelSet {
  Eigen::MatrixXd features;
  std::vector<int> labels;
};
LabeledVoxelSet build_training_set(const FeatureVolume& features,
                                   const std::vector<VoxelAnnotation>& annotations);

/// Tissue-forest defaults follow the subject forest settings (200 trees,
/// depth 4, min split 3, max features 2); the paper gives no separate values
/// for the voxel forest.
RandomForest train_tissue_forest(const LabeledVoxelSet& data, const ForestParams& params,
                                 std::uint64_t seed);

/// Labels every voxel with the forest's argmax vote (tissue scheme 0-3).
LabelVolume predict_voxelwise(const RandomForest& forest, const FeatureVolume& features);

}  // namespace nph
