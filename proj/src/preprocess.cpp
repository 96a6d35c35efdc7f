#include "nph/preprocess.hpp"

#include "nph/errors.hpp"
#include "nph/filters.hpp"
#include "nph/morphology.hpp"
#include "nph/parallel.hpp"

#include <cmath>
#include <vector>

namespace nph {

void DenoiseParams::validate() const {
  if (patch_radius < 0) throw InvalidInput("DenoiseParams: patch_radius must be >= 0");
  if (search_radius < patch_radius)
    throw InvalidInput("DenoiseParams: search_radius must be >= patch_radius");
  if (h < 0.0) throw InvalidInput("DenoiseParams: h must be >= 0");
}

LabelVolume extract_skull(const ScalarVolume& volume, const SkullThreshold& threshold) {
  if (!std::isfinite(threshold.min_hu)) throw InvalidInput("extract_skull: threshold must be finite");
  auto mask = LabelVolume::zeros(volume.geometry());
  std::int64_t hits = 0;
  for (std::int64_t v = 0; v < volume.size(); ++v) {
    if (volume[v] >= threshold.min_hu) {
      mask[v] = 1;
      ++hits;
    }
  }
  if (hits == 0)
    throw InvalidInput("extract_skull: no skull found (no voxel >= " +
                       std::to_string(threshold.min_hu) + " HU); non-CT or mis-scaled input?");
  return largest_component_26(mask);
}

namespace {

inline int clampi(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

// Sliding clamped-border box sum of radius r along one axis, in place via a line buffer.
void box_sum_axis(std::vector<float>& data, const Dims3& dims, int axis, int r) {
  const int n = dims[axis];
  const std::int64_t nx = dims[0], ny = dims[1];
  const std::int64_t stride = axis == 0 ? 1 : (axis == 1 ? nx : nx * ny);
  const std::int64_t lines = (axis == 0) ? ny * dims[2] : (axis == 1 ? nx * dims[2] : nx * ny);
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
      for (int i = 0; i < n; ++i) line[std::size_t(i)] = data[std::size_t(base + stride * i)];
      for (int i = 0; i < n; ++i) {
        float acc = 0.0f;
        for (int o = -r; o <= r; ++o) acc += line[std::size_t(clampi(i + o, n))];
        data[std::size_t(base + stride * i)] = acc;
      }
    }
  });
}

}  // namespace

ScalarVolume nlm_denoise(const ScalarVolume& volume, const DenoiseParams& params) {
  params.validate();
  if (params.h == 0.0) return volume;

  const auto& d = volume.dims();
  const std::int64_t n = volume.size();
  const float* u = volume.data().data();

  const double sigma = estimate_noise_sigma(volume);
  const double two_sigma2 = 2.0 * sigma * sigma;
  const double inv_h2 = 1.0 / (params.h * params.h);
  const int pr = params.patch_radius;
  const double patch_count = std::pow(double(2 * pr + 1), 3);

  std::vector<double> num(static_cast<std::size_t>(n), 0.0);
  std::vector<double> den(static_cast<std::size_t>(n), 0.0);
  std::vector<float> diff2(static_cast<std::size_t>(n));

  const int sr = params.search_radius;
  for (int tz = -sr; tz <= sr; ++tz) {
    for (int ty = -sr; ty <= sr; ++ty) {
      for (int tx = -sr; tx <= sr; ++tx) {
        if (tx == 0 && ty == 0 && tz == 0) continue;
        // squared difference against the clamped shifted image
        parallel_chunks(0, d[2], [&](std::int64_t k0, std::int64_t k1) {
          for (std::int64_t k = k0; k < k1; ++k) {
            const int sk = clampi(int(k) + tz, d[2]);
            for (int j = 0; j < d[1]; ++j) {
              const int sj = clampi(j + ty, d[1]);
              const std::int64_t row = volume.index_of(0, j, int(k));
              const std::int64_t srow = volume.index_of(0, sj, sk);
              for (int i = 0; i < d[0]; ++i) {
                const float dv = u[row + i] - u[srow + clampi(i + tx, d[0])];
                diff2[std::size_t(row + i)] = dv * dv;
              }
            }
          }
        });
        // box sums turn per-voxel differences into patch distances
        box_sum_axis(diff2, d, 0, pr);
        box_sum_axis(diff2, d, 1, pr);
        box_sum_axis(diff2, d, 2, pr);
        // accumulate this neighbor's weighted contribution
        parallel_chunks(0, d[2], [&](std::int64_t k0, std::int64_t k1) {
          for (std::int64_t k = k0; k < k1; ++k) {
            const int sk = clampi(int(k) + tz, d[2]);
            for (int j = 0; j < d[1]; ++j) {
              const int sj = clampi(j + ty, d[1]);
              const std::int64_t row = volume.index_of(0, j, int(k));
              const std::int64_t srow = volume.index_of(0, sj, sk);
              for (int i = 0; i < d[0]; ++i) {
                const double d2 = diff2[std::size_t(row + i)] / patch_count;
                const double a = d2 - two_sigma2;
                const double w = a <= 0.0 ? 1.0 : std::exp(-a * inv_h2);
                num[std::size_t(row + i)] += w * u[srow + clampi(i + tx, d[0])];
                den[std::size_t(row + i)] += w;
              }
            }
          }
        });
      }
    }
  }

  auto out = ScalarVolume::zeros(volume.geometry());
  parallel_chunks(0, n, [&](std::int64_t v0, std::int64_t v1) {
    for (std::int64_t v = v0; v < v1; ++v) {
      // self contributes weight 1
      out[v] = float((num[std::size_t(v)] + u[v]) / (den[std::size_t(v)] + 1.0));
    }
  });
  return out;
}

}  // namespace nph
