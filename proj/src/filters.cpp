#include "nph/filters.hpp"

#include "nph/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace nph {
namespace {

inline int reflect(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -1 - i;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

// Convolve along one axis with reflect padding; axis strides differ, data layout is x-fastest.
void convolve_axis(const float* in, float* out, const Dims3& dims, int axis, const Eigen::ArrayXd& kernel) {
  const int r = int(kernel.size() / 2);
  const int n = dims[axis];
  const std::int64_t nx = dims[0], ny = dims[1], nz = dims[2];
  const std::int64_t stride = axis == 0 ? 1 : (axis == 1 ? nx : nx * ny);

  // iterate over lines perpendicular to the axis
  const std::int64_t lines = (axis == 0) ? ny * nz : (axis == 1 ? nx * nz : nx * ny);
  parallel_chunks(0, lines, [&](std::int64_t l0, std::int64_t l1) {
    std::vector<float> line(static_cast<std::size_t>(n));
    for (std::int64_t l = l0; l < l1; ++l) {
      std::int64_t base;
      if (axis == 0)
        base = l * nx;
      else if (axis == 1)
        base = (l % nx) + (l / nx) * nx * ny;
      else
        base = l;
      for (int i = 0; i < n; ++i) line[std::size_t(i)] = in[base + stride * i];
      for (int i = 0; i < n; ++i) {
        double acc = 0.0;
        for (int o = -r; o <= r; ++o) acc += kernel[o + r] * line[std::size_t(reflect(i + o, n))];
        out[base + stride * i] = float(acc);
      }
    }
  });
}

}  // namespace

Eigen::ArrayXd gaussian_kernel(double sigma_voxels) {
  const int r = std::max(1, int(std::ceil(3.0 * sigma_voxels)));
  Eigen::ArrayXd k(2 * r + 1);
  for (int i = -r; i <= r; ++i) k[i + r] = std::exp(-0.5 * double(i) * i / (sigma_voxels * sigma_voxels));
  return k / k.sum();
}

ScalarVolume gaussian_smooth(const ScalarVolume& volume, double sigma_voxels) {
  if (sigma_voxels <= 0.0) return volume;
  const Eigen::ArrayXd k = gaussian_kernel(sigma_voxels);
  ScalarVolume a = volume;
  ScalarVolume b = ScalarVolume::zeros(volume.geometry());
  convolve_axis(a.data().data(), b.data().data(), volume.dims(), 0, k);
  convolve_axis(b.data().data(), a.data().data(), volume.dims(), 1, k);
  convolve_axis(a.data().data(), b.data().data(), volume.dims(), 2, k);
  return b;
}

ScalarVolume gradient_magnitude(const ScalarVolume& volume) {
  auto out = ScalarVolume::zeros(volume.geometry());
  const auto& d = volume.dims();
  const Eigen::Vector3d inv2s = 0.5 * volume.spacing().cwiseInverse();
  parallel_chunks(0, d[2], [&](std::int64_t k0, std::int64_t k1) {
    for (std::int64_t k = k0; k < k1; ++k) {
      for (int j = 0; j < d[1]; ++j) {
        for (int i = 0; i < d[0]; ++i) {
          const double gx = (volume.at(reflect(i + 1, d[0]), j, int(k)) -
                             volume.at(reflect(i - 1, d[0]), j, int(k))) * inv2s.x();
          const double gy = (volume.at(i, reflect(j + 1, d[1]), int(k)) -
                             volume.at(i, reflect(j - 1, d[1]), int(k))) * inv2s.y();
          const double gz = (volume.at(i, j, reflect(int(k) + 1, d[2])) -
                             volume.at(i, j, reflect(int(k) - 1, d[2]))) * inv2s.z();
          out.at(i, j, int(k)) = float(std::sqrt(gx * gx + gy * gy + gz * gz));
        }
      }
    }
  });
  return out;
}

double estimate_noise_sigma(const ScalarVolume& volume) {
  const auto& d = volume.dims();
  const std::int64_t n = volume.size();
  std::vector<float> lap(static_cast<std::size_t>(n));
  // 6-neighbor Laplacian has noise gain sqrt(6 + 36) on iid noise
  const double gain = std::sqrt(42.0);
  parallel_chunks(0, d[2], [&](std::int64_t k0, std::int64_t k1) {
    for (std::int64_t k = k0; k < k1; ++k) {
      for (int j = 0; j < d[1]; ++j) {
        for (int i = 0; i < d[0]; ++i) {
          const double c = volume.at(i, j, int(k));
          const double s = volume.at(reflect(i - 1, d[0]), j, int(k)) +
                           volume.at(reflect(i + 1, d[0]), j, int(k)) +
                           volume.at(i, reflect(j - 1, d[1]), int(k)) +
                           volume.at(i, reflect(j + 1, d[1]), int(k)) +
                           volume.at(i, j, reflect(int(k) - 1, d[2])) +
                           volume.at(i, j, reflect(int(k) + 1, d[2]));
          lap[std::size_t(volume.index_of(i, j, int(k)))] = float((s - 6.0 * c) / gain);
        }
      }
    }
  });
  auto median_of = [](std::vector<float>& v) {
    auto mid = v.begin() + v.size() / 2;
    std::nth_element(v.begin(), mid, v.end());
    return double(*mid);
  };
  const double med = median_of(lap);
  for (auto& x : lap) x = float(std::abs(x - med));
  return 1.4826 * median_of(lap);
}

}  // namespace nph
