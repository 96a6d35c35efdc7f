#include "nph/preprocess.hpp"

#include "nph/errors.hpp"
#include "nph/filters.hpp"
#include "nph/phantom.hpp"
#include "nph/rng.hpp"

#include "doctest.h"

using namespace nph;

TEST_CASE("extract_skull keeps exactly the voxels above threshold") {
  GridGeometry g = centered_geometry({8, 8, 8}, {1, 1, 1});
  auto v = ScalarVolume::zeros(g);
  v.at(3, 4, 5) = 1000.0f;
  auto mask = extract_skull(v, {250.0});
  for (std::int64_t i = 0; i < mask.size(); ++i)
    CHECK(int(mask[i]) == (i == mask.index_of(3, 4, 5) ? 1 : 0));
}

TEST_CASE("extract_skull fails loudly when nothing clears the threshold") {
  GridGeometry g = centered_geometry({6, 6, 6}, {1, 1, 1});
  auto v = ScalarVolume::constant(g, 40.0f);
  CHECK_THROWS_WITH_AS(extract_skull(v, {250.0}), doctest::Contains("no skull"), InvalidInput);
}

TEST_CASE("extract_skull keeps only the largest connected component") {
  GridGeometry g = centered_geometry({16, 16, 16}, {1, 1, 1});
  auto v = ScalarVolume::zeros(g);
  // 3-voxel blob
  v.at(4, 4, 4) = 900.0f;
  v.at(5, 4, 4) = 900.0f;
  v.at(5, 5, 5) = 900.0f;  // 26-connected to the blob
  // far-away single voxel (table artifact)
  v.at(12, 12, 12) = 1200.0f;
  auto mask = extract_skull(v, {250.0});
  CHECK(mask.at(4, 4, 4) == 1);
  CHECK(mask.at(5, 5, 5) == 1);
  CHECK(mask.at(12, 12, 12) == 0);
}

TEST_CASE("extract_skull matches the phantom's known shell") {
  PhantomSpec spec;
  spec.dims = {96, 96, 96};
  spec.spacing = {2.0, 2.0, 2.0};
  spec.noise_sigma_hu = 0.0;
  spec.mass_hu = 30.0;
  auto phantom = generate_phantom(spec, 0);

  auto mask = extract_skull(phantom.image, {250.0});
  LabelVolume shell = LabelVolume::zeros(phantom.truth.geometry());
  for (std::int64_t i = 0; i < shell.size(); ++i)
    shell[i] = phantom.truth[i] == std::uint8_t(SegLabel::Skull) ? 1 : 0;
  CHECK(dice(mask, shell, 1).dice >= 0.99);
}

TEST_CASE("raising the threshold never adds voxels before component filtering") {
  PhantomSpec spec;
  spec.dims = {48, 48, 48};
  spec.spacing = {4.0, 4.0, 4.0};
  auto phantom = generate_phantom(spec, 3);
  // monotonicity holds on the raw threshold stage; the shell is one component
  // here so the public op exposes it directly
  auto lo = extract_skull(phantom.image, {250.0});
  auto hi = extract_skull(phantom.image, {400.0});
  for (std::int64_t i = 0; i < lo.size(); ++i)
    if (hi[i] != 0) CHECK(lo[i] != 0);
}

TEST_CASE("nlm_denoise returns a constant volume unchanged") {
  GridGeometry g = centered_geometry({12, 12, 12}, {1, 1, 1});
  auto v = ScalarVolume::constant(g, 42.0f);
  auto out = nlm_denoise(v, {});
  CHECK((out.data() == v.data()).all());
}

TEST_CASE("nlm_denoise with h=0 is the identity by convention") {
  GridGeometry g = centered_geometry({10, 10, 10}, {1, 1, 1});
  Rng rng(5);
  auto v = ScalarVolume::zeros(g);
  for (std::int64_t i = 0; i < v.size(); ++i) v[i] = float(rng.normal(0, 20));
  DenoiseParams p;
  p.h = 0.0;
  auto out = nlm_denoise(v, p);
  CHECK((out.data() == v.data()).all());
}

TEST_CASE("nlm_denoise halves the MSE on a noisy two-region phantom") {
  GridGeometry g = centered_geometry({40, 40, 40}, {1, 1, 1});
  auto clean = ScalarVolume::zeros(g);
  for (int k = 0; k < 40; ++k)
    for (int j = 0; j < 40; ++j)
      for (int i = 0; i < 40; ++i) clean.at(i, j, k) = i < 20 ? 0.0f : 40.0f;

  Rng rng(123);
  auto noisy = clean;
  for (std::int64_t i = 0; i < noisy.size(); ++i) noisy[i] += float(rng.normal(0, 10));

  auto denoised = nlm_denoise(noisy, {});

  double mse_before = 0, mse_after = 0;
  for (std::int64_t i = 0; i < clean.size(); ++i) {
    mse_before += (noisy[i] - clean[i]) * (noisy[i] - clean[i]);
    mse_after += (denoised[i] - clean[i]) * (denoised[i] - clean[i]);
  }
  CHECK(mse_after <= 0.5 * mse_before);
}

TEST_CASE("nlm output stays within the search window's intensity range") {
  GridGeometry g = centered_geometry({14, 14, 14}, {1, 1, 1});
  Rng rng(9);
  auto v = ScalarVolume::zeros(g);
  for (std::int64_t i = 0; i < v.size(); ++i) v[i] = float(rng.normal(100, 30));
  DenoiseParams p;
  auto out = nlm_denoise(v, p);

  const auto& d = v.dims();
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        float lo = 1e30f, hi = -1e30f;
        for (int dz = -p.search_radius; dz <= p.search_radius; ++dz)
          for (int dy = -p.search_radius; dy <= p.search_radius; ++dy)
            for (int dx = -p.search_radius; dx <= p.search_radius; ++dx) {
              int ii = std::clamp(i + dx, 0, d[0] - 1);
              int jj = std::clamp(j + dy, 0, d[1] - 1);
              int kk = std::clamp(k + dz, 0, d[2] - 1);
              lo = std::min(lo, v.at(ii, jj, kk));
              hi = std::max(hi, v.at(ii, jj, kk));
            }
        CHECK(out.at(i, j, k) >= lo - 1e-3f);
        CHECK(out.at(i, j, k) <= hi + 1e-3f);
      }
}

TEST_CASE("noise sigma estimate tracks the injected noise level") {
  GridGeometry g = centered_geometry({32, 32, 32}, {1, 1, 1});
  Rng rng(21);
  auto v = ScalarVolume::zeros(g);
  for (std::int64_t i = 0; i < v.size(); ++i) v[i] = float(rng.normal(0, 10));
  CHECK(estimate_noise_sigma(v) == doctest::Approx(10.0).epsilon(0.2));
}

TEST_CASE("denoising is deterministic") {
  PhantomSpec spec;
  spec.dims = {48, 48, 48};
  spec.spacing = {4.0, 4.0, 4.0};
  spec.ventricle_ml = 20.0;
  spec.subarachnoid_ml = 40.0;
  spec.cerebral_ml = 400.0;
  auto phantom = generate_phantom(spec, 17);
  auto a = nlm_denoise(phantom.image, {});
  auto b = nlm_denoise(phantom.image, {});
  CHECK((a.data() == b.data()).all());
}
