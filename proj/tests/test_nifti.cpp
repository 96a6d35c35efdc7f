#include "nph/nifti.hpp"

#include "nph/errors.hpp"
#include "nph/rng.hpp"

#include "doctest.h"
#include "test_util.hpp"

#include <cstring>
#include <fstream>

using namespace nph;
using nph_test::TempDir;

namespace {

// Hand-built header, independent of the library writer, so reader tests have
// their own oracle for the on-disk layout.
#pragma pack(push, 1)
struct RawHeader {
  std::int32_t sizeof_hdr = 348;
  char unused0[36] = {};
  std::int16_t dim[8] = {3, 4, 4, 4, 1, 1, 1, 1};
  char unused1[14] = {};
  std::int16_t datatype = 16;  // float32
  std::int16_t bitpix = 32;
  std::int16_t slice_start = 0;
  float pixdim[8] = {1, 1, 1, 1, 0, 0, 0, 0};
  float vox_offset = 352;
  float scl_slope = 0;
  float scl_inter = 0;
  char unused2[132] = {};
  std::int16_t qform_code = 0;
  std::int16_t sform_code = 0;
  float quat[6] = {};
  float srow_x[4] = {1, 0, 0, 0};
  float srow_y[4] = {0, 1, 0, 0};
  float srow_z[4] = {0, 0, 1, 0};
  char intent_name[16] = {};
  char magic[4] = {'n', '+', '1', 0};
};
#pragma pack(pop)
static_assert(sizeof(RawHeader) == 348);

void write_raw(const std::filesystem::path& p, const RawHeader& h, const void* voxels, std::size_t bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(reinterpret_cast<const char*>(&h), sizeof(h));
  const char pad[4] = {};
  out.write(pad, 4);
  out.write(static_cast<const char*>(voxels), std::streamsize(bytes));
}

}  // namespace

TEST_CASE("reads a constant 4x4x4 float file with identity-like pose") {
  TempDir tmp("nifti");
  RawHeader h;
  float voxels[64] = {};
  write_raw(tmp / "c.nii", h, voxels, sizeof(voxels));

  auto v = load_volume(tmp / "c.nii");
  CHECK(v.dims() == Dims3{4, 4, 4});
  CHECK(v.size() == 64);
  CHECK((v.data() == 0.0f).all());
  CHECK((v.spacing() - Eigen::Vector3d(1, 1, 1)).norm() == doctest::Approx(0.0));
  CHECK((v.pose().matrix() - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
}

TEST_CASE("applies scl_slope and scl_inter") {
  TempDir tmp("nifti");
  RawHeader h;
  h.datatype = 4;  // int16
  h.bitpix = 16;
  h.scl_slope = 2.0f;
  h.scl_inter = 10.0f;
  std::int16_t voxels[64];
  for (auto& x : voxels) x = 5;
  write_raw(tmp / "s.nii", h, voxels, sizeof(voxels));

  auto v = load_volume(tmp / "s.nii");
  CHECK(v[0] == doctest::Approx(20.0f));
}

TEST_CASE("rejects bad headers with the offending field named") {
  TempDir tmp("nifti");
  float voxels[64] = {};

  RawHeader bad_pixdim;
  bad_pixdim.pixdim[2] = 0.0f;
  write_raw(tmp / "p.nii", bad_pixdim, voxels, sizeof(voxels));
  CHECK_THROWS_WITH_AS(load_volume(tmp / "p.nii"), doctest::Contains("pixdim[2]"), IoError);

  RawHeader four_d;
  four_d.dim[0] = 4;
  four_d.dim[4] = 3;
  write_raw(tmp / "d.nii", four_d, voxels, sizeof(voxels));
  CHECK_THROWS_WITH_AS(load_volume(tmp / "d.nii"), doctest::Contains("3-D"), IoError);

  CHECK_THROWS_AS(load_volume(tmp / "missing.nii"), IoError);
}

TEST_CASE("save/load round-trips random float volumes bit-exactly") {
  TempDir tmp("nifti");
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    Dims3 dims{int(2 + rng.uniform_int(6)), int(2 + rng.uniform_int(6)), int(2 + rng.uniform_int(6))};
    Eigen::Vector3d spacing(0.5 + rng.uniform(), 0.5 + rng.uniform(), 0.5 + rng.uniform());
    GridGeometry g = centered_geometry(dims, spacing);
    auto v = ScalarVolume::zeros(g);
    for (std::int64_t i = 0; i < v.size(); ++i) v[i] = float(rng.normal(0, 500));

    const auto path = tmp / ("r" + std::to_string(trial) + ".nii");
    save_volume(v, path);
    auto back = load_volume(path);

    CHECK(back.dims() == v.dims());
    CHECK((back.spacing() - v.spacing()).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((back.data() == v.data()).all());
  }
}

TEST_CASE("label volumes round-trip as unsigned 8-bit") {
  TempDir tmp("nifti");
  GridGeometry g = centered_geometry({5, 4, 3}, {1, 1, 1});
  auto labels = LabelVolume::zeros(g);
  for (std::int64_t i = 0; i < labels.size(); ++i) labels[i] = std::uint8_t(i % 5);

  save_volume(labels, tmp / "l.nii.gz");
  auto back = load_label_volume(tmp / "l.nii.gz");
  CHECK((back.data() == labels.data()).all());
}

TEST_CASE("save to an unwritable location names the path") {
  GridGeometry g = centered_geometry({2, 2, 2}, {1, 1, 1});
  auto v = ScalarVolume::zeros(g);
  CHECK_THROWS_WITH_AS(save_volume(v, "/nonexistent_dir_xyz/out.nii"),
                       doctest::Contains("/nonexistent_dir_xyz/out.nii"), IoError);
}

TEST_CASE("template-sized volume keeps its geometry through a round trip") {
  TempDir tmp("nifti");
  GridGeometry g = centered_geometry({182, 218, 182}, {1, 1, 1});
  auto v = ScalarVolume::zeros(g);
  v.at(91, 109, 91) = 1234.5f;

  save_volume(v, tmp / "t.nii.gz");
  auto back = load_volume(tmp / "t.nii.gz");
  CHECK(back.dims() == Dims3{182, 218, 182});
  CHECK((back.spacing() - v.spacing()).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((back.pose().matrix() - v.pose().matrix()).cwiseAbs().maxCoeff() < 1e-4);
  CHECK(back.at(91, 109, 91) == doctest::Approx(1234.5f));
}

TEST_CASE("gzip compression is transparent to the reader") {
  TempDir tmp("nifti");
  GridGeometry g = centered_geometry({6, 6, 6}, {2, 2, 2});
  auto v = ScalarVolume::zeros(g);
  for (std::int64_t i = 0; i < v.size(); ++i) v[i] = float(i);

  save_volume(v, tmp / "z.nii.gz");
  auto back = load_volume(tmp / "z.nii.gz");
  CHECK((back.data() == v.data()).all());
}
