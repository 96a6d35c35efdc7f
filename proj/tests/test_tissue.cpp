#include "nph/tissue.hpp"

#include "nph/errors.hpp"
#include "nph/filters.hpp"
#include "nph/phantom.hpp"
#include "nph/preprocess.hpp"
#include "nph/rng.hpp"

#include "doctest.h"
#include "test_util.hpp"

#include <cmath>
#include <fstream>

using namespace nph;
using nph_test::TempDir;

namespace {

// SegLabel truth -> tissue class
TissueClass tissue_of(SegLabel s) {
  switch (s) {
    case SegLabel::Ventricle:
    case SegLabel::Subarachnoid: return TissueClass::Csf;
    case SegLabel::CerebralMass: return TissueClass::CerebralMass;
    case SegLabel::Skull: return TissueClass::Skull;
    default: return TissueClass::Background;
  }
}

// Stratified sample of annotated voxels drawn from the phantom truth.
std::vector<VoxelAnnotation> sample_annotations(const LabelVolume& truth, int per_class,
                                                std::uint64_t seed) {
  std::array<std::vector<std::int64_t>, kTissueClassCount> pools;
  const auto& d = truth.dims();
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i)
        pools[std::size_t(tissue_of(SegLabel(truth.at(i, j, k))))].push_back(truth.index_of(i, j, k));

  Rng rng(seed);
  std::vector<VoxelAnnotation> out;
  for (int c = 0; c < kTissueClassCount; ++c) {
    auto& pool = pools[std::size_t(c)];
    for (int s = 0; s < per_class && !pool.empty(); ++s) {
      const std::int64_t v = pool[std::size_t(rng.uniform_int(pool.size()))];
      VoxelAnnotation a;
      a.x = int(v % d[0]);
      a.y = int((v / d[0]) % d[1]);
      a.z = int(v / (std::int64_t(d[0]) * d[1]));
      a.label = TissueClass(c);
      out.push_back(a);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("constant volume: smoothed channels equal the constant, gradient zero") {
  GridGeometry g = centered_geometry({12, 12, 12}, {1, 1, 1});
  auto v = ScalarVolume::constant(g, 42.0f);
  auto f = extract_features(v);
  REQUIRE(f.n_features() == 4);
  for (int c = 0; c < 3; ++c)
    for (std::int64_t i = 0; i < v.size(); ++i)
      CHECK(f.channels[std::size_t(c)][i] == doctest::Approx(42.0f).epsilon(1e-6));
  CHECK((f.channels[3].data() == 0.0f).all());
}

TEST_CASE("impulse response equals the separable Gaussian kernel") {
  GridGeometry g = centered_geometry({21, 21, 21}, {1, 1, 1});
  auto v = ScalarVolume::zeros(g);
  v.at(10, 10, 10) = 1.0f;
  auto f = extract_features(v);

  for (double sigma : {1.0, 2.0}) {
    const auto& channel = f.channels[sigma == 1.0 ? 1 : 2];
    // direct evaluation of the normalized truncated Gaussian, radius 3*sigma
    const int r = int(std::ceil(3.0 * sigma));
    std::vector<double> k(std::size_t(2 * r + 1));
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
      k[std::size_t(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
      sum += k[std::size_t(i + r)];
    }
    for (auto& x : k) x /= sum;

    for (int dz = -2; dz <= 2; ++dz)
      for (int dy = -2; dy <= 2; ++dy)
        for (int dx = -2; dx <= 2; ++dx) {
          const double expected = k[std::size_t(dx + r)] * k[std::size_t(dy + r)] * k[std::size_t(dz + r)];
          CHECK(channel.at(10 + dx, 10 + dy, 10 + dz) == doctest::Approx(expected).epsilon(1e-5));
        }
  }
}

TEST_CASE("linear ramp has gradient magnitude equal to its slope in the interior") {
  GridGeometry g = centered_geometry({16, 16, 16}, {2.0, 2.0, 2.0});
  auto v = ScalarVolume::zeros(g);
  const double slope = 3.5;  // HU per mm along x
  for (int k = 0; k < 16; ++k)
    for (int j = 0; j < 16; ++j)
      for (int i = 0; i < 16; ++i) v.at(i, j, k) = float(slope * 2.0 * i);
  auto f = extract_features(v);
  for (int k = 2; k < 14; ++k)
    for (int j = 2; j < 14; ++j)
      for (int i = 2; i < 14; ++i)
        CHECK(f.channels[3].at(i, j, k) == doctest::Approx(slope).epsilon(1e-5));
}

TEST_CASE("intensity-only mode keeps a single channel") {
  GridGeometry g = centered_geometry({8, 8, 8}, {1, 1, 1});
  auto f = extract_features(ScalarVolume::zeros(g), {.intensity_only = true});
  CHECK(f.n_features() == 1);
}

TEST_CASE("annotations CSV round-trips and rejects bad rows") {
  TempDir tmp("annot");
  std::vector<VoxelAnnotation> a{{1, 2, 3, TissueClass::Csf}, {4, 5, 6, TissueClass::Skull}};
  save_annotations_csv(a, tmp / "a.csv");
  auto back = load_annotations_csv(tmp / "a.csv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].x == 1);
  CHECK(back[1].label == TissueClass::Skull);

  {
    std::ofstream bad(tmp.path() / "bad.csv");
    bad << "x,y,z,class_id\n1,2,3,9\n";
  }
  CHECK_THROWS_WITH_AS(load_annotations_csv(tmp / "bad.csv"), doctest::Contains("row 2"), IoError);
}

TEST_CASE("training set validation: bounds and class coverage") {
  GridGeometry g = centered_geometry({8, 8, 8}, {1, 1, 1});
  auto f = extract_features(ScalarVolume::zeros(g));

  std::vector<VoxelAnnotation> oob{{99, 0, 0, TissueClass::Csf}};
  CHECK_THROWS_WITH_AS(build_training_set(f, oob), doctest::Contains("out of bounds"), InvalidInput);

  std::vector<VoxelAnnotation> missing{{0, 0, 0, TissueClass::Csf},
                                       {1, 0, 0, TissueClass::CerebralMass},
                                       {2, 0, 0, TissueClass::Skull}};
  CHECK_THROWS_WITH_AS(build_training_set(f, missing), doctest::Contains("class 0"), InvalidInput);
}

TEST_CASE("a hand-built stump partitions voxels exactly at its threshold") {
  std::vector<TreeNode> stump(3);
  stump[0] = {0, 100.0, 1, 2, {}};
  stump[1].histogram = Eigen::ArrayXd::Zero(4);
  stump[1].histogram[int(TissueClass::Csf)] = 1.0;
  stump[2].histogram = Eigen::ArrayXd::Zero(4);
  stump[2].histogram[int(TissueClass::Skull)] = 1.0;
  ForestParams p;
  p.n_estimators = 1;
  p.max_depth = 1;
  auto forest = RandomForest::from_trees({DecisionTree(std::move(stump))}, 4, 1, p);

  GridGeometry g = centered_geometry({10, 10, 10}, {1, 1, 1});
  Rng rng(3);
  auto v = ScalarVolume::zeros(g);
  for (std::int64_t i = 0; i < v.size(); ++i) v[i] = float(rng.uniform() * 200.0);
  FeatureVolume f;
  f.channels.push_back(v);

  auto labels = predict_voxelwise(forest, f);
  for (std::int64_t i = 0; i < v.size(); ++i) {
    const TissueClass expected = v[i] < 100.0f ? TissueClass::Csf : TissueClass::Skull;
    CHECK(labels[i] == std::uint8_t(expected));
  }
}

TEST_CASE("phantom voxels classify with per-class accuracy >= 0.95") {
  PhantomSpec spec;
  spec.dims = {96, 96, 96};
  spec.spacing = {2.0, 2.0, 2.0};
  spec.noise_sigma_hu = 8.0;
  auto phantom = generate_phantom(spec, 42);

  auto denoised = nlm_denoise(phantom.image, {});
  auto features = extract_features(denoised);
  auto annotations = sample_annotations(phantom.truth, 2500, 7);
  auto set = build_training_set(features, annotations);
  CHECK(set.features.rows() == 10000);

  auto forest = train_tissue_forest(set, {}, 0);
  auto predicted = predict_voxelwise(forest, features);

  // predictions stay within the tissue scheme
  for (std::int64_t i = 0; i < predicted.size(); ++i) CHECK(predicted[i] < kTissueClassCount);

  std::array<std::int64_t, kTissueClassCount> correct{}, total{};
  for (std::int64_t i = 0; i < predicted.size(); ++i) {
    const auto t = tissue_of(SegLabel(phantom.truth[i]));
    ++total[std::size_t(t)];
    correct[std::size_t(t)] += predicted[i] == std::uint8_t(t);
  }
  for (int c = 0; c < kTissueClassCount; ++c) {
    INFO("tissue class ", c);
    CHECK(double(correct[std::size_t(c)]) / double(total[std::size_t(c)]) >= 0.95);
  }
}
