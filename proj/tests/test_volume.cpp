#include "nph/volume.hpp"

#include "nph/rng.hpp"

#include "doctest.h"

using namespace nph;

TEST_CASE("affine transform validates its invariants") {
  Eigen::Matrix4d bad = Eigen::Matrix4d::Identity();
  bad(3, 3) = 2.0;
  CHECK_THROWS(AffineTransform(bad));

  Eigen::Matrix4d singular = Eigen::Matrix4d::Identity();
  singular(0, 0) = 0.0;
  CHECK_THROWS(AffineTransform(singular));

  CHECK(AffineTransform::identity().det() == doctest::Approx(1.0));
}

TEST_CASE("composition applies right-to-left") {
  auto t = AffineTransform::translation({1, 2, 3});
  auto s = AffineTransform::scaling({2, 2, 2});
  Eigen::Vector3d p(1, 1, 1);
  CHECK(((t * s).apply(p) - Eigen::Vector3d(3, 4, 5)).norm() == doctest::Approx(0.0));
  CHECK(((s * t).apply(p) - Eigen::Vector3d(4, 6, 8)).norm() == doctest::Approx(0.0));
}

TEST_CASE("volume rejects bad geometry and size") {
  GridGeometry g = centered_geometry({2, 2, 2}, {1, 1, 1});
  CHECK_THROWS(ScalarVolume(g, ScalarVolume::DataArray::Zero(7)));

  GridGeometry bad_dims = g;
  bad_dims.dims = {0, 2, 2};
  CHECK_THROWS(ScalarVolume::zeros(bad_dims));

  GridGeometry bad_spacing = g;
  bad_spacing.spacing = {1, -1, 1};
  CHECK_THROWS(ScalarVolume::zeros(bad_spacing));
}

TEST_CASE("voxel_to_world: identity pose maps index to itself") {
  GridGeometry g{{8, 8, 8}, {1, 1, 1}, AffineTransform::identity()};
  auto v = ScalarVolume::zeros(g);
  CHECK((voxel_to_world(v, {3, 4, 5}) - Eigen::Vector3d(3, 4, 5)).norm() == doctest::Approx(0.0));
}

TEST_CASE("voxel_to_world: spacing scale 2 on x") {
  GridGeometry g{{8, 8, 8}, {2, 1, 1}, axis_aligned_pose({2, 1, 1}, {0, 0, 0})};
  auto v = ScalarVolume::zeros(g);
  CHECK((voxel_to_world(v, {3, 0, 0}) - Eigen::Vector3d(6, 0, 0)).norm() == doctest::Approx(0.0));
}

TEST_CASE("world_to_voxel inverts voxel_to_world for random poses") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    // random invertible linear part plus offset
    do {
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = rng.normal(r == c ? 1.0 : 0.0, 0.3);
    } while (std::abs(m.block<3, 3>(0, 0).determinant()) < 0.05);
    for (int r = 0; r < 3; ++r) m(r, 3) = rng.normal(0.0, 50.0);

    GridGeometry g{{4, 4, 4}, {1, 1, 1}, AffineTransform(m)};
    auto v = ScalarVolume::zeros(g);
    Eigen::Vector3d idx(rng.uniform() * 10, rng.uniform() * 10, rng.uniform() * 10);
    CHECK((world_to_voxel(v, voxel_to_world(v, idx)) - idx).norm() < 1e-9);
  }
}
