#pragma once

#include "nph/active_contours.hpp"
#include "nph/labels.hpp"
#include "nph/preprocess.hpp"
#include "nph/random_forest.hpp"
#include "nph/registration.hpp"
#include "nph/tissue.hpp"

#include <filesystem>
#include <string>

namespace nph {

struct SeedSphere {
  Eigen::Vector3d center_mm{0, 0, 0};
  double radius_mm = 4.0;
};

/// Template-space seed locations: one sphere at the lateral-ventricle
/// centroid and three cerebral seeds on the top, back and front of the head
/// next to the skull. Ships with the template package, not the code.
struct SeedSpec {
  SeedSphere ventricle_seed{{0, 0, 0}, 4.0};
  std::vector<SeedSphere> cerebral_seeds;

  /// Spheres must lie inside the region enclosed by the template head mask
  /// and the ventricle seed must be disjoint from every cerebral seed.
  void validate(const TemplateSpace& tmpl) const;
};

SeedSpec load_seed_spec(const std::filesystem::path& path);
void save_seed_spec(const SeedSpec& seeds, const std::filesystem::path& path);

/// All pipeline parameters in one config file; the hash of the effective
/// config is echoed into every report.
struct PipelineConfig {
  SkullThreshold skull{};
  DenoiseParams denoise{};
  RegistrationParams registration{};
  FeatureOptions features{};
  ForestParams tissue_forest{};
  McvParams ventricle_mcv = default_evolution_params();
  McvParams cerebral_mcv = default_evolution_params();
  double mask_fill_hu = -1000.0;  // masked-volume fill outside evolution masks
  std::uint64_t rng_seed = 0;
  int jobs = 0;  // concurrent subjects in batch runs; 0 picks the hardware count

  /// Evolution stages run on masked volumes where the contrast against the
  /// fill value drives growth; a balloon pass accelerates the fill.
  static McvParams default_evolution_params() {
    McvParams p;
    p.balloon = 1.0;
    return p;
  }

  /// FNV-1a over the canonical serialized form; stable across runs.
  std::string hash() const;
};

PipelineConfig load_pipeline_config(const std::filesystem::path& path);
void save_pipeline_config(const PipelineConfig& config, const std::filesystem::path& path);

/// Per-subject compartment volumes in mL plus provenance. total_ml is the
/// computed sum of the three compartments, never re-measured.
struct VolumeReport {
  std::string subject_id;
  double ventricle_ml = 0.0;
  double subarachnoid_ml = 0.0;
  double cerebral_ml = 0.0;
  double total_ml = 0.0;
  std::string transform_file;
  std::string model_version;
  std::string parameter_hash;
};

void save_report_json(const VolumeReport& report, const std::filesystem::path& path);
VolumeReport load_report_json(const std::filesystem::path& path);

/// Binary mask of voxels within one seed sphere on the given grid.
LabelVolume seed_sphere_mask(const GridGeometry& geometry, const SeedSphere& seed);

/// Paper-style masked volume: voxels outside `keep` read as fill_hu so the
/// contour's outside mean repels growth across the mask boundary.
ScalarVolume masked_volume(const ScalarVolume& image, const LabelVolume& keep, double fill_hu);

/// mask = (tissue class == CSF) AND NOT ventricle_mask.
LabelVolume label_subarachnoid(const LabelVolume& tissue_labels, const LabelVolume& ventricle_mask);

/// count(mask != 0) * voxel volume / 1000.
double compute_volume_ml(const LabelVolume& mask);

/// Template-space part of the workflow, from a denoised registered scan and
/// its tissue labels to the composed SegLabel map.
struct TemplateSegmentation {
  LabelVolume seg;          // SegLabel scheme
  LabelVolume ventricle;    // evolved ventricle mask
  LabelVolume subarachnoid;
  LabelVolume cerebral;     // evolved cerebral-mass mask
};
TemplateSegmentation segment_in_template_space(const ScalarVolume& denoised,
                                               const LabelVolume& tissue, const SeedSpec& seeds,
                                               const PipelineConfig& config);

struct SegmentationResult {
  LabelVolume labels;  // patient space, SegLabel scheme
  VolumeReport report;
  AffineTransform transform;   // subject mm -> template mm
  double registration_dice = 0.0;
  LabelVolume template_labels; // template-space SegLabel map
  ScalarVolume template_scan;  // denoised template-space intensities
};

/// Full per-subject workflow: skull extraction, affine registration,
/// denoising, tissue classification, seeded evolutions, subarachnoid
/// labeling, inverse resampling and patient-space volumetry. Stage errors
/// propagate with the stage name and subject id attached.
SegmentationResult segment_subject(const ScalarVolume& scan, const TemplateSpace& tmpl,
                                   const RandomForest& tissue_model, const SeedSpec& seeds,
                                   const PipelineConfig& config, const std::string& subject_id);

}  // namespace nph
