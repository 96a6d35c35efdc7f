#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <stdexcept>
#include <utility>

namespace nph {

/// Homogeneous 4x4 affine map between millimeter spaces.
/// Convention: column vector (x, y, z, 1) in source mm maps to target mm.
class AffineTransform {
public:
  AffineTransform() : m_(Eigen::Matrix4d::Identity()) {}

  explicit AffineTransform(const Eigen::Matrix4d& m) : m_(m) { validate(); }

  static AffineTransform identity() { return AffineTransform(); }

  static AffineTransform translation(const Eigen::Vector3d& t) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.block<3, 1>(0, 3) = t;
    return AffineTransform(m);
  }

  static AffineTransform scaling(const Eigen::Vector3d& s) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m(0, 0) = s.x();
    m(1, 1) = s.y();
    m(2, 2) = s.z();
    return AffineTransform(m);
  }

  /// Intrinsic rotations about x, y, z (radians), applied as Rz*Ry*Rx.
  static AffineTransform rotation(double rx, double ry, double rz) {
    Eigen::Matrix3d r = (Eigen::AngleAxisd(rz, Eigen::Vector3d::UnitZ()) *
                         Eigen::AngleAxisd(ry, Eigen::Vector3d::UnitY()) *
                         Eigen::AngleAxisd(rx, Eigen::Vector3d::UnitX()))
                            .toRotationMatrix();
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.block<3, 3>(0, 0) = r;
    return AffineTransform(m);
  }

  const Eigen::Matrix4d& matrix() const { return m_; }
  Eigen::Matrix3d linear() const { return m_.block<3, 3>(0, 0); }
  Eigen::Vector3d translation_part() const { return m_.block<3, 1>(0, 3); }

  Eigen::Vector3d apply(const Eigen::Vector3d& p) const {
    return m_.block<3, 3>(0, 0) * p + m_.block<3, 1>(0, 3);
  }

  AffineTransform inverse() const {
    Eigen::Matrix4d inv = Eigen::Matrix4d::Identity();
    Eigen::Matrix3d li = linear().inverse();
    inv.block<3, 3>(0, 0) = li;
    inv.block<3, 1>(0, 3) = -li * translation_part();
    return AffineTransform(inv);
  }

  /// Composition: (a * b)(p) == a(b(p)).
  friend AffineTransform operator*(const AffineTransform& a, const AffineTransform& b) {
    return AffineTransform(Eigen::Matrix4d(a.m_ * b.m_));
  }

  double det() const { return linear().determinant(); }

private:
  void validate() const {
    if (m_(3, 0) != 0.0 || m_(3, 1) != 0.0 || m_(3, 2) != 0.0 || m_(3, 3) != 1.0)
      throw std::invalid_argument("AffineTransform: bottom row must be (0,0,0,1)");
    if (std::abs(linear().determinant()) <= 1e-9)
      throw std::invalid_argument("AffineTransform: singular linear part");
  }

  Eigen::Matrix4d m_;
};

using Dims3 = std::array<int, 3>;

/// Grid shape, physical voxel size and voxel-to-mm pose of a volume.
struct GridGeometry {
  Dims3 dims{0, 0, 0};
  Eigen::Vector3d spacing{1.0, 1.0, 1.0};
  AffineTransform pose;  // voxel index -> patient mm

  std::int64_t voxel_count() const {
    return std::int64_t(dims[0]) * dims[1] * dims[2];
  }

  double voxel_volume_mm3() const { return spacing.x() * spacing.y() * spacing.z(); }

  bool same_grid(const GridGeometry& o, double tol = 1e-6) const {
    return dims == o.dims && (spacing - o.spacing).cwiseAbs().maxCoeff() <= tol &&
           (pose.matrix() - o.pose.matrix()).cwiseAbs().maxCoeff() <= tol;
  }

  void validate() const {
    if (dims[0] < 1 || dims[1] < 1 || dims[2] < 1)
      throw std::invalid_argument("GridGeometry: every dim must be >= 1");
    if (!(spacing.x() > 0.0 && spacing.y() > 0.0 && spacing.z() > 0.0))
      throw std::invalid_argument("GridGeometry: every spacing component must be > 0");
    // pose invertibility enforced by AffineTransform itself
  }
};

/// Dense 3-D grid of voxels, x fastest-varying. Scalar volumes hold Hounsfield
/// intensities, label volumes hold discrete class IDs; both share this carrier.
template <typename T>
class Volume {
public:
  using Scalar = T;
  using DataArray = Eigen::Array<T, Eigen::Dynamic, 1>;

  Volume() = default;

  Volume(GridGeometry geom, DataArray data) : geom_(std::move(geom)), data_(std::move(data)) {
    geom_.validate();
    if (data_.size() != geom_.voxel_count())
      throw std::invalid_argument("Volume: data length does not equal nx*ny*nz");
  }

  /// Zero-filled volume on the given grid.
  static Volume zeros(const GridGeometry& geom) {
    return Volume(geom, DataArray::Zero(geom.voxel_count()));
  }

  static Volume constant(const GridGeometry& geom, T value) {
    return Volume(geom, DataArray::Constant(geom.voxel_count(), value));
  }

  const GridGeometry& geometry() const { return geom_; }
  const Dims3& dims() const { return geom_.dims; }
  const Eigen::Vector3d& spacing() const { return geom_.spacing; }
  const AffineTransform& pose() const { return geom_.pose; }

  std::int64_t size() const { return data_.size(); }

  std::int64_t index_of(int i, int j, int k) const {
    return std::int64_t(i) + std::int64_t(geom_.dims[0]) * (std::int64_t(j) + std::int64_t(geom_.dims[1]) * k);
  }

  bool in_bounds(int i, int j, int k) const {
    return i >= 0 && i < geom_.dims[0] && j >= 0 && j < geom_.dims[1] && k >= 0 && k < geom_.dims[2];
  }

  T at(int i, int j, int k) const { return data_[index_of(i, j, k)]; }
  T& at(int i, int j, int k) { return data_[index_of(i, j, k)]; }

  T operator[](std::int64_t flat) const { return data_[flat]; }
  T& operator[](std::int64_t flat) { return data_[flat]; }

  const DataArray& data() const { return data_; }
  DataArray& data() { return data_; }

  /// Same grid, different payload type.
  template <typename U>
  Volume<U> like(Eigen::Array<U, Eigen::Dynamic, 1> data) const {
    return Volume<U>(geom_, std::move(data));
  }

private:
  GridGeometry geom_;
  DataArray data_;
};

using ScalarVolume = Volume<float>;
using LabelVolume = Volume<std::uint8_t>;

/// Exact application of the pose: voxel index (continuous) -> patient mm.
template <typename T>
inline Eigen::Vector3d voxel_to_world(const Volume<T>& v, const Eigen::Vector3d& index) {
  return v.pose().apply(index);
}

/// Exact application of the inverse pose: patient mm -> continuous voxel index.
template <typename T>
inline Eigen::Vector3d world_to_voxel(const Volume<T>& v, const Eigen::Vector3d& mm) {
  return v.pose().inverse().apply(mm);
}

/// Axis-aligned pose: diag(spacing) plus an origin offset in mm.
inline AffineTransform axis_aligned_pose(const Eigen::Vector3d& spacing, const Eigen::Vector3d& origin_mm) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m(0, 0) = spacing.x();
  m(1, 1) = spacing.y();
  m(2, 2) = spacing.z();
  m.block<3, 1>(0, 3) = origin_mm;
  return AffineTransform(m);
}

/// Geometry with the world origin at the grid center; used by the shipped
/// template space so seed coordinates are symmetric about zero.
inline GridGeometry centered_geometry(const Dims3& dims, const Eigen::Vector3d& spacing) {
  Eigen::Vector3d origin(-0.5 * (dims[0] - 1) * spacing.x(),
                         -0.5 * (dims[1] - 1) * spacing.y(),
                         -0.5 * (dims[2] - 1) * spacing.z());
  return GridGeometry{dims, spacing, axis_aligned_pose(spacing, origin)};
}

}  // namespace nph
