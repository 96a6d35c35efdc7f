#include "nph/phantom.hpp"

#include "nph/errors.hpp"
#include "nph/rng.hpp"

#include "doctest.h"

#include <cmath>
#include <set>

using namespace nph;

namespace {

PhantomSpec unit_spec() {
  PhantomSpec s;
  s.dims = {96, 96, 96};
  s.spacing = {2.0, 2.0, 2.0};
  s.noise_sigma_hu = 0.0;
  return s;
}

double compartment_ml(const LabelVolume& truth, SegLabel label) {
  std::int64_t c = 0;
  for (std::int64_t i = 0; i < truth.size(); ++i) c += truth[i] == std::uint8_t(label);
  return double(c) * truth.geometry().voxel_volume_mm3() / 1000.0;
}

}  // namespace

TEST_CASE("digitized compartments hit their targets within 2%") {
  for (bool nph_class : {false, true}) {
    PhantomSpec s = unit_spec();
    if (nph_class) {
      s.ventricle_ml = 118.0;
      s.subarachnoid_ml = 85.2;
      s.cerebral_ml = 1210.2;
    }
    auto p = generate_phantom(s, 0);
    CHECK(compartment_ml(p.truth, SegLabel::Ventricle) ==
          doctest::Approx(s.ventricle_ml).epsilon(0.02));
    CHECK(compartment_ml(p.truth, SegLabel::Subarachnoid) ==
          doctest::Approx(s.subarachnoid_ml).epsilon(0.02));
    CHECK(compartment_ml(p.truth, SegLabel::CerebralMass) ==
          doctest::Approx(s.cerebral_ml).epsilon(0.02));
  }
}

TEST_CASE("same spec and seed give bit-identical phantoms") {
  PhantomSpec s = unit_spec();
  s.dims = {48, 48, 48};
  s.spacing = {4.0, 4.0, 4.0};
  s.noise_sigma_hu = 8.0;
  auto a = generate_phantom(s, 9);
  auto b = generate_phantom(s, 9);
  CHECK((a.image.data() == b.image.data()).all());
  CHECK((a.truth.data() == b.truth.data()).all());
}

TEST_CASE("degenerate or unachievable specs are rejected") {
  PhantomSpec zero = unit_spec();
  zero.ventricle_ml = 0.0;
  zero.subarachnoid_ml = 0.0;
  zero.cerebral_ml = 0.0;
  CHECK_THROWS_AS(generate_phantom(zero, 0), InvalidInput);

  PhantomSpec huge_vent = unit_spec();
  huge_vent.ventricle_ml = 1000.0;  // would press into the cavity wall
  huge_vent.cerebral_ml = 300.0;
  CHECK_THROWS_AS(generate_phantom(huge_vent, 0), InvalidInput);
}

TEST_CASE("truth compartments partition the cavity and stay disjoint") {
  auto p = generate_phantom(unit_spec(), 4);
  // every voxel holds exactly one label by construction; check the interior
  // is fully explained by the three compartments plus skull/background
  std::set<int> seen;
  for (std::int64_t i = 0; i < p.truth.size(); ++i) seen.insert(p.truth[i]);
  CHECK(seen == std::set<int>{0, 1, 2, 3, 4});
}

TEST_CASE("pose offset moves the anatomy as specified") {
  PhantomSpec s = unit_spec();
  s.dims = {64, 64, 64};
  s.spacing = {3.0, 3.0, 3.0};
  s.offset_translation_mm = {6.0, -4.0, 3.0};
  s.offset_rotation_deg = {3.0, 0.0, -4.0};
  auto moved = generate_phantom(s, 0);

  // centroid of the ventricle compartment should sit near the mapped anatomical center
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  std::int64_t count = 0;
  const auto& d = s.dims;
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i)
        if (moved.truth.at(i, j, k) == std::uint8_t(SegLabel::Ventricle)) {
          centroid += voxel_to_world(moved.truth, {double(i), double(j), double(k)});
          ++count;
        }
  centroid /= double(count);
  // ventricle centroid in anatomical frame is near (0, 0, vent_dz); compare
  // against the mapped anatomical origin with a loose bound
  Eigen::Vector3d mapped_origin = moved.anatomical_to_patient.apply({0, 0, 0});
  CHECK((centroid - mapped_origin).norm() < 12.0);
}

TEST_CASE("dice trivial values and symmetry") {
  GridGeometry g = centered_geometry({10, 10, 10}, {1, 1, 1});
  auto a = LabelVolume::zeros(g);
  auto b = LabelVolume::zeros(g);

  SUBCASE("identical masks give 1.0") {
    a.at(1, 1, 1) = 1;
    b.at(1, 1, 1) = 1;
    CHECK(dice(a, b, 1).dice == doctest::Approx(1.0));
  }
  SUBCASE("disjoint equal-size masks give 0.0") {
    a.at(1, 1, 1) = 1;
    b.at(2, 2, 2) = 1;
    CHECK(dice(a, b, 1).dice == doctest::Approx(0.0));
  }
  SUBCASE("|X|=2, |Y|=2, overlap 1 gives 0.5") {
    a.at(1, 1, 1) = 1;
    a.at(1, 1, 2) = 1;
    b.at(1, 1, 1) = 1;
    b.at(5, 5, 5) = 1;
    CHECK(dice(a, b, 1).dice == doctest::Approx(0.5));
  }
  SUBCASE("both empty counts as perfect agreement") {
    CHECK(dice(a, b, 3).dice == doctest::Approx(1.0));
  }
  SUBCASE("geometry mismatch is rejected") {
    auto other = LabelVolume::zeros(centered_geometry({9, 10, 10}, {1, 1, 1}));
    CHECK_THROWS_AS(dice(a, other, 1), InvalidInput);
  }
}

TEST_CASE("dice agrees with a set-arithmetic oracle and is symmetric") {
  GridGeometry g = centered_geometry({12, 12, 12}, {1, 1, 1});
  auto a = LabelVolume::zeros(g);
  auto b = LabelVolume::zeros(g);
  Rng rng(31);
  std::set<std::int64_t> sa, sb;
  for (int t = 0; t < 200; ++t) {
    std::int64_t va = std::int64_t(rng.uniform_int(std::uint64_t(a.size())));
    std::int64_t vb = std::int64_t(rng.uniform_int(std::uint64_t(a.size())));
    a[va] = 1;
    b[vb] = 1;
    sa.insert(va);
    sb.insert(vb);
  }
  std::size_t inter = 0;
  for (auto v : sa) inter += sb.count(v);
  const double expected = 2.0 * double(inter) / double(sa.size() + sb.size());

  CHECK(dice(a, b, 1).dice == doctest::Approx(expected));
  CHECK(dice(b, a, 1).dice == doctest::Approx(expected));
}

TEST_CASE("synthetic cohort matches Table-style statistics") {
  auto records = synth_cohort(34, 27, 42);
  REQUIRE(records.size() == 61);

  double vent_normal = 0, vent_nph = 0;
  int n_normal = 0, n_nph = 0;
  for (const auto& r : records) {
    r.validate();
    CHECK(r.ventricle_ml >= 1.0);
    CHECK(r.subarachnoid_ml >= 1.0);
    CHECK(r.cerebral_ml >= 1.0);
    if (*r.label == Diagnosis::NonNph) {
      vent_normal += r.ventricle_ml;
      ++n_normal;
    } else {
      vent_nph += r.ventricle_ml;
      ++n_nph;
    }
  }
  CHECK(n_normal == 34);
  CHECK(n_nph == 27);
  // sample means within 3 standard errors of the generating means
  CHECK(std::abs(vent_normal / 34 - 47.4) < 3.0 * 28.2 / std::sqrt(34.0));
  CHECK(std::abs(vent_nph / 27 - 118.0) < 3.0 * 41.2 / std::sqrt(27.0));

  auto again = synth_cohort(34, 27, 42);
  for (std::size_t i = 0; i < records.size(); ++i)
    CHECK(records[i].ventricle_ml == again[i].ventricle_ml);
}

TEST_CASE("evans synthesis produces the exact confusion counts") {
  auto records = synth_cohort(100, 40, 7);
  assign_evans_ratios(records, 0.75, 0.89, 1);
  int tp = 0, fn = 0, tn = 0, fp = 0;
  for (const auto& r : records) {
    const bool pred_nph = *r.evans_ratio >= 0.3;
    if (*r.label == Diagnosis::Nph)
      pred_nph ? ++tp : ++fn;
    else
      pred_nph ? ++fp : ++tn;
  }
  CHECK(tp == 30);
  CHECK(fn == 10);
  CHECK(tn == 89);
  CHECK(fp == 11);

  auto bad = synth_cohort(34, 27, 7);
  CHECK_THROWS_AS(assign_evans_ratios(bad, 0.75, 0.89, 1), InvalidInput);
}
