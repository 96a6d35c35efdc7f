#pragma once

#include "nph/phantom.hpp"
#include "nph/pipeline.hpp"
#include "nph/preprocess.hpp"
#include "nph/rng.hpp"
#include "nph/tissue.hpp"

#include <array>
#include <vector>

namespace nph_test {

inline nph::TissueClass tissue_of(nph::SegLabel s) {
  using nph::SegLabel;
  using nph::TissueClass;
  switch (s) {
    case SegLabel::Ventricle:
    case SegLabel::Subarachnoid: return TissueClass::Csf;
    case SegLabel::CerebralMass: return TissueClass::CerebralMass;
    case SegLabel::Skull: return TissueClass::Skull;
    default: return TissueClass::Background;
  }
}

/// Stratified voxel annotations drawn from a phantom truth map.
inline std::vector<nph::VoxelAnnotation> sample_annotations(const nph::LabelVolume& truth,
                                                            int per_class, std::uint64_t seed) {
  std::array<std::vector<std::int64_t>, nph::kTissueClassCount> pools;
  const auto& d = truth.dims();
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i)
        pools[std::size_t(tissue_of(nph::SegLabel(truth.at(i, j, k))))].push_back(
            truth.index_of(i, j, k));

  nph::Rng rng(seed);
  std::vector<nph::VoxelAnnotation> out;
  for (int c = 0; c < nph::kTissueClassCount; ++c) {
    auto& pool = pools[std::size_t(c)];
    for (int s = 0; s < per_class && !pool.empty(); ++s) {
      const std::int64_t v = pool[std::size_t(rng.uniform_int(pool.size()))];
      nph::VoxelAnnotation a;
      a.x = int(v % d[0]);
      a.y = int((v / d[0]) % d[1]);
      a.z = int(v / (std::int64_t(d[0]) * d[1]));
      a.label = nph::TissueClass(c);
      out.push_back(a);
    }
  }
  return out;
}

/// Unit-test scale phantom anatomy (96^3 at 2 mm).
inline nph::PhantomSpec unit_phantom_spec() {
  nph::PhantomSpec s;
  s.dims = {96, 96, 96};
  s.spacing = {2.0, 2.0, 2.0};
  return s;
}

struct PipelineFixture {
  nph::TemplatePackage tmpl;
  nph::RandomForest tissue_model;
  nph::PipelineConfig config;
};

/// Template package plus a tissue model trained on a dedicated phantom;
/// built once per test binary run.
inline const PipelineFixture& pipeline_fixture() {
  static const PipelineFixture fixture = [] {
    PipelineFixture f;
    f.tmpl = nph::build_test_template(unit_phantom_spec());

    nph::PhantomSpec train_spec = unit_phantom_spec();
    train_spec.noise_sigma_hu = 8.0;
    const nph::Phantom train = nph::generate_phantom(train_spec, 100);
    const nph::ScalarVolume denoised = nph::nlm_denoise(train.image, f.config.denoise);
    const nph::FeatureVolume features = nph::extract_features(denoised, f.config.features);
    const auto set = nph::build_training_set(features, sample_annotations(train.truth, 2500, 7));
    f.tissue_model = nph::train_tissue_forest(set, f.config.tissue_forest, 0);
    return f;
  }();
  return fixture;
}

}  // namespace nph_test
