#pragma once

#include "nph/labels.hpp"
#include "nph/pipeline.hpp"
#include "nph/records.hpp"
#include "nph/registration.hpp"
#include "nph/volume.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace nph {

/// Synthetic head phantom: ellipsoidal skull shell around a cranial cavity
/// holding two mirrored ventricles, a peripheral CSF pocket against the
/// skull, and cerebral mass filling the rest. Compartment sizes are solved
/// so the digitized volumes hit the targets within 2%.
struct PhantomSpec {
  Dims3 dims{128, 128, 128};
  Eigen::Vector3d spacing{1.5, 1.5, 1.5};

  double ventricle_ml = 47.4;
  double subarachnoid_ml = 101.6;
  double cerebral_ml = 1214.6;

  double skull_thickness_mm = 6.0;
  Eigen::Vector3d cavity_aspect{0.85, 1.0, 0.80};

  double skull_hu = 1000.0;
  double mass_hu = 35.0;
  double csf_hu = 8.0;
  double air_hu = -1000.0;

  double noise_sigma_hu = 8.0;

  // patient pose relative to the anatomical frame the shapes are defined in
  Eigen::Vector3d offset_translation_mm{0.0, 0.0, 0.0};
  Eigen::Vector3d offset_rotation_deg{0.0, 0.0, 0.0};
  double offset_scale = 1.0;

  // additional per-seed pose jitter, drawn uniformly in +-max from the
  // phantom's seed; batches exercise registration without per-spec edits
  double jitter_rotation_deg = 0.0;
  double jitter_translation_mm = 0.0;
  double jitter_scale = 0.0;
};

PhantomSpec load_phantom_spec(const std::filesystem::path& path);
void save_phantom_spec(const PhantomSpec& spec, const std::filesystem::path& path);

struct Phantom {
  ScalarVolume image;        // HU image with noise, patient space
  LabelVolume truth;         // SegLabel scheme, same grid
  AffineTransform anatomical_to_patient;  // ground-truth pose offset
};

/// Deterministic given (spec, seed). Throws InvalidInput when the targets
/// cannot be laid out with the required containment.
Phantom generate_phantom(const PhantomSpec& spec, std::uint64_t seed);

/// Per-class overlap counts and the Dice score 2TP/(2TP+FP+FN).
struct DiceResult {
  double dice = 0.0;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
};

/// Both masks empty counts as Dice 1.0 (perfect agreement on absence).
DiceResult dice(const LabelVolume& pred, const LabelVolume& truth, std::uint8_t class_id);

/// Cohort synthesis from per-class Gaussians over (ventricle, subarachnoid,
/// cerebral) volumes, truncated at 1 mL; total is the sum.
struct CohortParams {
  // normal: mean/std per compartment, mL
  Eigen::Vector3d normal_mean{47.4, 101.6, 1214.6};
  Eigen::Vector3d normal_std{28.2, 69.7, 100.6};
  Eigen::Vector3d nph_mean{118.0, 85.2, 1210.2};
  Eigen::Vector3d nph_std{41.2, 44.3, 95.6};
  // optional ventricle/mass correlation; 0 draws the compartments independently
  double mass_ventricle_corr = 0.0;
};

std::vector<SubjectRecord> synth_cohort(int n_normal, int n_nph, std::uint64_t seed,
                                        const CohortParams& params = {});

/// Assigns synthetic Evan's ratios so that thresholding at 0.3 yields exactly
/// the requested confusion counts. sens*n_nph and spec*n_normal must be whole
/// numbers.
void assign_evans_ratios(std::vector<SubjectRecord>& records, double sensitivity,
                         double specificity, std::uint64_t seed);

/// Synthetic ellipsoidal test template derived from a noise-free canonical
/// phantom: the head mask is the skull shell and the seed spec is placed at
/// the ventricle centroid plus top/back/front cerebral-mass points.
struct TemplatePackage {
  TemplateSpace space;
  SeedSpec seeds;
};
TemplatePackage build_test_template(PhantomSpec spec);
void write_template_package(const TemplatePackage& package, const std::filesystem::path& dir);

/// Segmentation arms compared against the proposed pipeline. The comparison
/// arms threshold the skull and discard labels outside that region; the
/// contour arms label everything inside the skull not claimed by the
/// cerebral-mass contour as ventricle.
enum class SegMethod { Proposed, RfOnly, Mgac, McvUnmasked };
const char* to_string(SegMethod method);

struct MethodComparison {
  SegMethod method{};
  std::vector<double> ventricle_dice;  // one entry per phantom
  std::vector<double> cerebral_dice;
  int failures = 0;

  double mean(const std::vector<double>& v) const;
  double stddev(const std::vector<double>& v) const;
};

std::vector<MethodComparison> compare_methods(const std::vector<Phantom>& phantoms,
                                              const std::vector<SegMethod>& methods,
                                              const TemplateSpace& tmpl, const SeedSpec& seeds,
                                              const RandomForest& tissue_model,
                                              const PipelineConfig& config,
                                              const MgacParams& mgac_params = {});

void save_comparison_csv(const std::vector<MethodComparison>& rows,
                         const std::filesystem::path& path);
std::string format_comparison_table(const std::vector<MethodComparison>& rows);

}  // namespace nph
