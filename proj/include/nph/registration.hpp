#pragma once

#include "nph/resample.hpp"
#include "nph/volume.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace nph {

/// Template space the pipeline registers into: grid geometry, the template
/// head/skull mask the overlap cost compares against, and a pointer to the
/// seed spec consumed by the segmentation pipeline.
struct TemplateSpace {
  GridGeometry geometry;
  LabelVolume head_mask;
  std::filesystem::path seed_spec_path;

  void validate() const;
};

/// 12-DOF affine estimation settings (3 translation, 3 rotation, 3 scale,
/// 3 shear), optimized coarse-to-fine.
struct RegistrationParams {
  int pyramid_levels = 3;        // downsampling x4 / x2 / x1
  int max_iters_per_level = 200; // single-parameter line searches per level
  double convergence_tol = 1e-5; // relative cost change per sweep

  void validate() const;
};

/// Cost values accepted by the optimizer, one series per pyramid level.
struct RegistrationTrace {
  std::vector<std::vector<double>> level_costs;
};

/// Estimates the subject-mm -> template-mm affine minimizing
/// 1 - Dice(transformed subject mask, template head mask), coarse-to-fine.
/// Initialization aligns mask centroids and matches per-axis spreads; the
/// optimizer is a coordinate-wise golden-section search cycled to
/// convergence. Deterministic: the coordinate sweep uses no randomness, so
/// any rng_seed yields the same transform (the seed is part of the call
/// signature for provenance).
/// Throws RegistrationFailure (with the achieved Dice) when the final
/// nearest-resampled overlap lands below 0.5.
AffineTransform estimate_affine(const LabelVolume& subject_skull, const TemplateSpace& tmpl,
                                const RegistrationParams& params = {}, std::uint64_t rng_seed = 0,
                                RegistrationTrace* trace = nullptr);

/// Resamples a subject volume onto the template grid.
ScalarVolume to_template(const ScalarVolume& volume, const AffineTransform& transform,
                         const TemplateSpace& tmpl, Interp mode);
LabelVolume to_template(const LabelVolume& volume, const AffineTransform& transform,
                        const TemplateSpace& tmpl, Interp mode);

/// Returns a template-space label map to the subject grid, always nearest.
LabelVolume to_patient(const LabelVolume& labels, const AffineTransform& transform,
                       const GridGeometry& subject_geometry);

/// Transform file: 16 numbers, row-major, whitespace separated.
void save_transform(const AffineTransform& transform, const std::filesystem::path& path);
AffineTransform load_transform(const std::filesystem::path& path);

/// Template package directory: template.json + head_mask.nii.gz + seed spec.
TemplateSpace load_template_package(const std::filesystem::path& dir);
void save_template_package(const TemplateSpace& tmpl, const std::filesystem::path& dir);

/// Hard overlap: nearest-resamples the subject mask onto the template grid
/// and computes the voxel-count Dice against the head mask.
double mask_overlap_dice(const LabelVolume& subject_mask, const TemplateSpace& tmpl,
                         const AffineTransform& transform);

}  // namespace nph
