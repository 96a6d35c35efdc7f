#include "nph/resample.hpp"

#include "nph/errors.hpp"
#include "nph/parallel.hpp"

#include <cmath>

namespace nph {
namespace {

// target voxel index -> continuous source voxel index
Eigen::Matrix4d pullback_matrix(const GridGeometry& source, const AffineTransform& transform,
                                const GridGeometry& target) {
  return source.pose.inverse().matrix() * transform.inverse().matrix() * target.pose.matrix();
}

template <typename T>
Volume<T> resample_nearest(const Volume<T>& source, const Eigen::Matrix4d& m, const GridGeometry& target) {
  auto out = Volume<T>::zeros(target);
  const int tnx = target.dims[0], tny = target.dims[1], tnz = target.dims[2];
  const Eigen::Vector3d step = m.template block<3, 1>(0, 0);
  parallel_chunks(0, tnz, [&](std::int64_t k0, std::int64_t k1) {
    for (std::int64_t k = k0; k < k1; ++k) {
      for (int j = 0; j < tny; ++j) {
        Eigen::Vector3d p = (m * Eigen::Vector4d(0, j, double(k), 1)).head<3>();
        std::int64_t flat = out.index_of(0, j, int(k));
        for (int i = 0; i < tnx; ++i, ++flat, p += step) {
          const int si = int(std::lround(p.x()));
          const int sj = int(std::lround(p.y()));
          const int sk = int(std::lround(p.z()));
          if (source.in_bounds(si, sj, sk)) out[flat] = source.at(si, sj, sk);
        }
      }
    }
  });
  return out;
}

ScalarVolume resample_trilinear(const ScalarVolume& source, const Eigen::Matrix4d& m,
                                const GridGeometry& target) {
  auto out = ScalarVolume::zeros(target);
  const int tnx = target.dims[0], tny = target.dims[1], tnz = target.dims[2];
  const Eigen::Vector3d step = m.block<3, 1>(0, 0);
  parallel_chunks(0, tnz, [&](std::int64_t k0, std::int64_t k1) {
    for (std::int64_t k = k0; k < k1; ++k) {
      for (int j = 0; j < tny; ++j) {
        Eigen::Vector3d p = (m * Eigen::Vector4d(0, j, double(k), 1)).head<3>();
        std::int64_t flat = out.index_of(0, j, int(k));
        for (int i = 0; i < tnx; ++i, ++flat, p += step) {
          const double fx = std::floor(p.x()), fy = std::floor(p.y()), fz = std::floor(p.z());
          const int ix = int(fx), iy = int(fy), iz = int(fz);
          const double wx = p.x() - fx, wy = p.y() - fy, wz = p.z() - fz;
          double acc = 0.0;
          for (int dz = 0; dz < 2; ++dz) {
            const double wdz = dz ? wz : 1.0 - wz;
            if (wdz == 0.0) continue;
            for (int dy = 0; dy < 2; ++dy) {
              const double wdy = dy ? wy : 1.0 - wy;
              if (wdy == 0.0) continue;
              for (int dx = 0; dx < 2; ++dx) {
                const double wdx = dx ? wx : 1.0 - wx;
                if (wdx == 0.0) continue;
                // out-of-bounds corners contribute background 0
                if (source.in_bounds(ix + dx, iy + dy, iz + dz))
                  acc += wdx * wdy * wdz * double(source.at(ix + dx, iy + dy, iz + dz));
              }
            }
          }
          out[flat] = float(acc);
        }
      }
    }
  });
  return out;
}

}  // namespace

ScalarVolume resample(const ScalarVolume& source, const AffineTransform& transform,
                      const GridGeometry& target, Interp mode) {
  GridGeometry tgt = target;
  tgt.validate();
  const Eigen::Matrix4d m = pullback_matrix(source.geometry(), transform, tgt);
  return mode == Interp::Nearest ? resample_nearest(source, m, tgt) : resample_trilinear(source, m, tgt);
}

LabelVolume resample(const LabelVolume& source, const AffineTransform& transform,
                     const GridGeometry& target, Interp mode) {
  if (mode != Interp::Nearest)
    throw InvalidInput("resample: label volumes support nearest mode only");
  GridGeometry tgt = target;
  tgt.validate();
  return resample_nearest(source, pullback_matrix(source.geometry(), transform, tgt), tgt);
}

}  // namespace nph
