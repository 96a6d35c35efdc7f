#include "nph/active_contours.hpp"

#include "nph/errors.hpp"
#include "nph/filters.hpp"
#include "nph/parallel.hpp"

#include <array>
#include <cmath>
#include <cstring>
#include <vector>

namespace nph {

void McvParams::validate() const {
  if (!(lambda1 > 0.0) || !(lambda2 > 0.0))
    throw InvalidInput("McvParams: lambda1 and lambda2 must be > 0");
  if (smoothing_passes < 0) throw InvalidInput("McvParams: smoothing_passes must be >= 0");
  if (iterations < 1) throw InvalidInput("McvParams: iterations must be >= 1");
}

void MgacParams::validate() const {
  if (iterations < 1) throw InvalidInput("MgacParams: iterations must be >= 1");
  if (!(alpha > 0.0)) throw InvalidInput("MgacParams: alpha must be > 0");
  if (smoothing_passes < 0) throw InvalidInput("MgacParams: smoothing_passes must be >= 0");
}

void EvolvingMask::validate() const {
  if (masked_domain) {
    if (!masked_domain->geometry().same_grid(u.geometry()))
      throw InvalidInput("EvolvingMask: domain geometry differs from mask");
    for (std::int64_t i = 0; i < u.size(); ++i)
      if (u[i] != 0 && (*masked_domain)[i] == 0)
        throw InvalidInput("EvolvingMask: mask leaves the masked domain");
  }
}

namespace {

// offsets of the 6 discrete plane orientations through the 3x3x3 cube:
// the three axis planes and the three main diagonal planes
struct PlaneFamily {
  std::array<std::array<std::array<int, 3>, 9>, 6> offsets;

  PlaneFamily() {
    const std::array<std::array<int, 3>, 6> normals = {
        {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 0}, {1, 0, 1}, {0, 1, 1}}};
    for (std::size_t p = 0; p < 6; ++p) {
      std::size_t n = 0;
      for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx * normals[p][0] + dy * normals[p][1] + dz * normals[p][2] != 0) continue;
            offsets[p][n++] = {dx, dy, dz};
          }
      // each plane intersects the cube in exactly 9 lattice points
      if (n != 9) throw std::logic_error("plane family construction");
    }
  }
};

const PlaneFamily kPlanes;

struct Box {
  int lo[3] = {0, 0, 0};
  int hi[3] = {0, 0, 0};  // exclusive
};

// The mask can never leave the domain, so all work is confined to the
// domain's bounding box. Without a domain the whole grid can evolve.
Box domain_box(const LabelVolume& u, const LabelVolume* domain) {
  const auto& d = u.dims();
  if (!domain) return Box{{0, 0, 0}, {d[0], d[1], d[2]}};
  Box b;
  b.lo[0] = d[0];
  b.lo[1] = d[1];
  b.lo[2] = d[2];
  bool any = false;
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        if (domain->at(i, j, k) == 0) continue;
        any = true;
        b.lo[0] = std::min(b.lo[0], i);
        b.lo[1] = std::min(b.lo[1], j);
        b.lo[2] = std::min(b.lo[2], k);
        b.hi[0] = std::max(b.hi[0], i + 1);
        b.hi[1] = std::max(b.hi[1], j + 1);
        b.hi[2] = std::max(b.hi[2], k + 1);
      }
  if (!any) return Box{{0, 0, 0}, {d[0], d[1], d[2]}};
  for (int a = 0; a < 3; ++a) {
    b.lo[a] = std::max(0, b.lo[a] - 2);
    b.hi[a] = std::min(d[a], b.hi[a] + 2);
  }
  return b;
}

// Binary dilation (grow=true) or erosion with the full 3x3x3 structuring
// element, restricted to the box.
LabelVolume morph27_box(const LabelVolume& u, const Box& b, bool grow) {
  LabelVolume out = u;
  parallel_chunks(b.lo[2], b.hi[2], [&](std::int64_t k0, std::int64_t k1) {
    for (std::int64_t k = k0; k < k1; ++k)
      for (int j = b.lo[1]; j < b.hi[1]; ++j)
        for (int i = b.lo[0]; i < b.hi[0]; ++i) {
          const std::uint8_t c = u.at(i, j, int(k));
          if (grow ? c != 0 : c == 0) continue;
          bool hit = false;
          for (int dz = -1; dz <= 1 && !hit; ++dz)
            for (int dy = -1; dy <= 1 && !hit; ++dy)
              for (int dx = -1; dx <= 1 && !hit; ++dx) {
                const int x = i + dx, y = j + dy, z = int(k) + dz;
                if (!u.in_bounds(x, y, z)) {
                  if (!grow) hit = true;  // erosion treats outside as background
                  continue;
                }
                if (grow ? u.at(x, y, z) != 0 : u.at(x, y, z) == 0) hit = true;
              }
          if (hit) out.at(i, j, int(k)) = grow ? 1 : 0;
        }
  });
  return out;
}

// Voxels whose 6-neighborhood is non-uniform, dilated by one voxel; the
// morphological operators below cannot change anything outside this band.
void active_band(const LabelVolume& u, const Box& b, std::vector<std::uint8_t>& band,
                 std::vector<std::uint8_t>& scratch) {
  const auto& d = u.dims();
  const std::int64_t nx = d[0], ny = d[1];
  band.assign(std::size_t(u.size()), 0);
  scratch.assign(std::size_t(u.size()), 0);

  parallel_chunks(b.lo[2], b.hi[2], [&](std::int64_t k0, std::int64_t k1) {
    for (std::int64_t k = k0; k < k1; ++k)
      for (int j = b.lo[1]; j < b.hi[1]; ++j)
        for (int i = b.lo[0]; i < b.hi[0]; ++i) {
          const std::int64_t v = u.index_of(i, j, int(k));
          const std::uint8_t c = u[v];
          bool edge = false;
          if (i > 0 && u[v - 1] != c) edge = true;
          else if (i + 1 < d[0] && u[v + 1] != c) edge = true;
          else if (j > 0 && u[v - nx] != c) edge = true;
          else if (j + 1 < d[1] && u[v + nx] != c) edge = true;
          else if (k > 0 && u[v - nx * ny] != c) edge = true;
          else if (k + 1 < d[2] && u[v + nx * ny] != c) edge = true;
          scratch[std::size_t(v)] = edge;
        }
  });

  // separable binary dilation by one voxel
  parallel_chunks(b.lo[2], b.hi[2], [&](std::int64_t k0, std::int64_t k1) {
    for (std::int64_t k = k0; k < k1; ++k)
      for (int j = b.lo[1]; j < b.hi[1]; ++j)
        for (int i = b.lo[0]; i < b.hi[0]; ++i) {
          const std::int64_t v = u.index_of(i, j, int(k));
          std::uint8_t m = scratch[std::size_t(v)];
          if (i > 0) m |= scratch[std::size_t(v - 1)];
          if (i + 1 < d[0]) m |= scratch[std::size_t(v + 1)];
          band[std::size_t(v)] = m;
        }
  });
  std::swap(band, scratch);
  parallel_chunks(b.lo[2], b.hi[2], [&](std::int64_t k0, std::int64_t k1) {
    for (std::int64_t k = k0; k < k1; ++k)
      for (int j = b.lo[1]; j < b.hi[1]; ++j)
        for (int i = b.lo[0]; i < b.hi[0]; ++i) {
          const std::int64_t v = u.index_of(i, j, int(k));
          std::uint8_t m = scratch[std::size_t(v)];
          if (j > 0) m |= scratch[std::size_t(v - nx)];
          if (j + 1 < d[1]) m |= scratch[std::size_t(v + nx)];
          band[std::size_t(v)] = m;
        }
  });
  std::swap(band, scratch);
  parallel_chunks(b.lo[2], b.hi[2], [&](std::int64_t k0, std::int64_t k1) {
    for (std::int64_t k = k0; k < k1; ++k)
      for (int j = b.lo[1]; j < b.hi[1]; ++j)
        for (int i = b.lo[0]; i < b.hi[0]; ++i) {
          const std::int64_t v = u.index_of(i, j, int(k));
          std::uint8_t m = scratch[std::size_t(v)];
          if (k > 0) m |= scratch[std::size_t(v - nx * ny)];
          if (k + 1 < d[2]) m |= scratch[std::size_t(v + nx * ny)];
          band[std::size_t(v)] = m;
        }
  });
}

enum class PlaneOp { SupInf, InfSup };

// SI: max over planes of the in-plane minimum. IS: min over planes of the
// in-plane maximum. Out-of-bounds offsets are skipped.
LabelVolume plane_op(const LabelVolume& u, const Box& b, PlaneOp op) {
  LabelVolume out = u;
  const auto& d = u.dims();
  std::vector<std::uint8_t> band, scratch;
  active_band(u, b, band, scratch);

  parallel_chunks(b.lo[2], b.hi[2], [&](std::int64_t k0, std::int64_t k1) {
    for (std::int64_t k = k0; k < k1; ++k)
      for (int j = b.lo[1]; j < b.hi[1]; ++j)
        for (int i = b.lo[0]; i < b.hi[0]; ++i) {
          const std::int64_t v = u.index_of(i, j, int(k));
          if (!band[std::size_t(v)]) continue;
          std::uint8_t outer = op == PlaneOp::SupInf ? 0 : 1;
          for (const auto& plane : kPlanes.offsets) {
            std::uint8_t inner = op == PlaneOp::SupInf ? 1 : 0;
            for (const auto& o : plane) {
              const int x = i + o[0], y = j + o[1], z = int(k) + o[2];
              if (!u.in_bounds(x, y, z)) continue;
              const std::uint8_t val = u.at(x, y, z);
              if (op == PlaneOp::SupInf)
                inner = std::min(inner, val);
              else
                inner = std::max(inner, val);
            }
            if (op == PlaneOp::SupInf)
              outer = std::max(outer, inner);
            else
              outer = std::min(outer, inner);
          }
          out[v] = outer;
        }
  });
  return out;
}

void clip_to_domain(LabelVolume& u, const LabelVolume* domain) {
  if (!domain) return;
  for (std::int64_t i = 0; i < u.size(); ++i)
    if ((*domain)[i] == 0) u[i] = 0;
}

std::pair<double, double> region_means_box(const ScalarVolume& image, const LabelVolume& mask,
                                           const LabelVolume* domain, const Box& b) {
  double sum1 = 0.0, sum0 = 0.0;
  std::int64_t n1 = 0, n0 = 0;
  for (int k = b.lo[2]; k < b.hi[2]; ++k)
    for (int j = b.lo[1]; j < b.hi[1]; ++j)
      for (int i = b.lo[0]; i < b.hi[0]; ++i) {
        const std::int64_t v = mask.index_of(i, j, k);
        if (domain && (*domain)[v] == 0) continue;
        if (mask[v] != 0) {
          sum1 += image[v];
          ++n1;
        } else {
          sum0 += image[v];
          ++n0;
        }
      }
  if (n1 == 0) throw DegenerateContour("region means: contour inside region is empty");
  if (n0 == 0) throw DegenerateContour("region means: contour outside region is empty");
  return {sum1 / double(n1), sum0 / double(n0)};
}

// balloon cadence: |nu| >= 1 acts every iteration, fractional nu every
// round(1/|nu|) iterations
bool balloon_active(double nu, int iteration) {
  if (nu == 0.0) return false;
  const double a = std::abs(nu);
  if (a >= 1.0) return true;
  const int period = int(std::lround(1.0 / a));
  return period > 0 && iteration % period == 0;
}

}  // namespace

std::pair<double, double> region_means(const ScalarVolume& image, const LabelVolume& mask,
                                       const LabelVolume* domain) {
  if (!mask.geometry().same_grid(image.geometry()))
    throw InvalidInput("region_means: mask and image geometry mismatch");
  if (domain && !domain->geometry().same_grid(image.geometry()))
    throw InvalidInput("region_means: domain and image geometry mismatch");
  const auto& d = mask.dims();
  Box full{{0, 0, 0}, {d[0], d[1], d[2]}};
  return region_means_box(image, mask, domain, full);
}

LabelVolume chan_vese_data_step(const ScalarVolume& image, const LabelVolume& u,
                                const LabelVolume* domain, double lambda1, double lambda2) {
  const auto [c1, c2] = region_means(image, u, domain);
  LabelVolume out = u;
  const auto& d = u.dims();
  const Box b = domain_box(u, domain);
  parallel_chunks(b.lo[2], b.hi[2], [&](std::int64_t k0, std::int64_t k1) {
    for (std::int64_t k = k0; k < k1; ++k)
      for (int j = b.lo[1]; j < b.hi[1]; ++j)
        for (int i = b.lo[0]; i < b.hi[0]; ++i) {
          const std::int64_t v = u.index_of(i, j, int(k));
          if (domain && (*domain)[v] == 0) continue;
          // discrete gradient: central differences with one-sided borders
          const int il = std::max(i - 1, 0), ir = std::min(i + 1, d[0] - 1);
          const int jl = std::max(j - 1, 0), jr = std::min(j + 1, d[1] - 1);
          const int kl = std::max(int(k) - 1, 0), kr = std::min(int(k) + 1, d[2] - 1);
          const bool on_contour = u.at(ir, j, int(k)) != u.at(il, j, int(k)) ||
                                  u.at(i, jr, int(k)) != u.at(i, jl, int(k)) ||
                                  u.at(i, j, kr) != u.at(i, j, kl);
          if (!on_contour) continue;
          const double dv = image[v];
          const double inside = lambda1 * (dv - c1) * (dv - c1);
          const double outside = lambda2 * (dv - c2) * (dv - c2);
          if (inside < outside)
            out[v] = 1;
          else if (inside > outside)
            out[v] = 0;
          // exact tie: leave unchanged
        }
  });
  clip_to_domain(out, domain);
  return out;
}

LabelVolume curvature_smooth(const LabelVolume& u, int pass_index) {
  const auto& d = u.dims();
  Box b{{0, 0, 0}, {d[0], d[1], d[2]}};
  if (pass_index % 2 == 0) return plane_op(plane_op(u, b, PlaneOp::InfSup), b, PlaneOp::SupInf);
  return plane_op(plane_op(u, b, PlaneOp::SupInf), b, PlaneOp::InfSup);
}

double chan_vese_energy(const ScalarVolume& image, const LabelVolume& mask, const McvParams& params,
                        const LabelVolume* domain) {
  const auto [c1, c2] = region_means(image, mask, domain);
  const auto& d = mask.dims();
  const Eigen::Vector3d sp = mask.spacing();
  const double face_area[3] = {sp.y() * sp.z(), sp.x() * sp.z(), sp.x() * sp.y()};
  double surface = 0.0, attach1 = 0.0, attach2 = 0.0;
  std::int64_t inside_count = 0;
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        const std::int64_t v = mask.index_of(i, j, k);
        if (domain && (*domain)[v] == 0) continue;
        const double dv = image[v];
        if (mask[v] != 0) {
          ++inside_count;
          attach1 += (dv - c1) * (dv - c1);
        } else {
          attach2 += (dv - c2) * (dv - c2);
        }
        if (i + 1 < d[0] && mask.at(i + 1, j, k) != mask[v]) surface += face_area[0];
        if (j + 1 < d[1] && mask.at(i, j + 1, k) != mask[v]) surface += face_area[1];
        if (k + 1 < d[2] && mask.at(i, j, k + 1) != mask[v]) surface += face_area[2];
      }
  const double voxvol = mask.geometry().voxel_volume_mm3();
  return double(params.smoothing_passes) * surface + params.balloon * double(inside_count) * voxvol +
         params.lambda1 * attach1 * voxvol + params.lambda2 * attach2 * voxvol;
}

LabelVolume mcv_evolve(const ScalarVolume& image, const EvolvingMask& seed, const McvParams& params) {
  params.validate();
  seed.validate();
  if (!image.geometry().same_grid(seed.u.geometry()))
    throw InvalidInput("mcv_evolve: image and seed geometry mismatch");
  std::int64_t seed_count = 0;
  for (std::int64_t i = 0; i < seed.u.size(); ++i) seed_count += seed.u[i] != 0;
  if (seed_count == 0) throw InvalidInput("mcv_evolve: seed is empty");

  const LabelVolume* domain = seed.masked_domain ? &*seed.masked_domain : nullptr;
  LabelVolume u = seed.u;
  const Box b = domain_box(u, domain);

  int pass_counter = 0;
  int unchanged_streak = 0;
  for (int iter = 0; iter < params.iterations; ++iter) {
    const LabelVolume prev = u;
    const auto [c1, c2] = region_means_box(image, u, domain, b);
    if (c1 == c2) return u;  // constant region: already a valid segment

    if (balloon_active(params.balloon, iter)) {
      const LabelVolume base = u;
      const LabelVolume moved = morph27_box(base, b, params.balloon > 0);
      // accept moves the data term does not strictly oppose
      for (int k = b.lo[2]; k < b.hi[2]; ++k)
        for (int j = b.lo[1]; j < b.hi[1]; ++j)
          for (int i = b.lo[0]; i < b.hi[0]; ++i) {
            const std::int64_t v = u.index_of(i, j, k);
            if (moved[v] == base[v]) continue;
            if (domain && (*domain)[v] == 0) continue;
            const double dv = image[v];
            const double inside = params.lambda1 * (dv - c1) * (dv - c1);
            const double outside = params.lambda2 * (dv - c2) * (dv - c2);
            if (params.balloon > 0 ? inside <= outside : inside >= outside) u[v] = moved[v];
          }
      clip_to_domain(u, domain);
    }

    u = chan_vese_data_step(image, u, domain, params.lambda1, params.lambda2);

    for (int s = 0; s < params.smoothing_passes; ++s) {
      u = (pass_counter % 2 == 0) ? plane_op(plane_op(u, b, PlaneOp::InfSup), b, PlaneOp::SupInf)
                                  : plane_op(plane_op(u, b, PlaneOp::SupInf), b, PlaneOp::InfSup);
      ++pass_counter;
    }
    clip_to_domain(u, domain);

    std::int64_t count = 0;
    bool changed = false;
    for (std::int64_t i = 0; i < u.size(); ++i) {
      count += u[i] != 0;
      changed = changed || u[i] != prev[i];
    }
    if (count == 0)
      throw DegenerateContour("mcv_evolve: mask collapsed to empty", iter);
    unchanged_streak = changed ? 0 : unchanged_streak + 1;
    if (unchanged_streak >= 3) break;
  }
  return u;
}

LabelVolume mgac_evolve(const ScalarVolume& image, const EvolvingMask& seed, const MgacParams& params) {
  params.validate();
  seed.validate();
  if (!image.geometry().same_grid(seed.u.geometry()))
    throw InvalidInput("mgac_evolve: image and seed geometry mismatch");
  std::int64_t seed_count = 0;
  for (std::int64_t i = 0; i < seed.u.size(); ++i) seed_count += seed.u[i] != 0;
  if (seed_count == 0) throw InvalidInput("mgac_evolve: seed is empty");

  const LabelVolume* domain = seed.masked_domain ? &*seed.masked_domain : nullptr;
  const Box b = domain_box(seed.u, domain);

  // inverse-gradient edge map from the smoothed image
  ScalarVolume grad = gradient_magnitude(gaussian_smooth(image, params.edge_sigma));
  ScalarVolume g = grad;
  for (std::int64_t i = 0; i < g.size(); ++i)
    g[i] = float(1.0 / std::sqrt(1.0 + params.alpha * double(grad[i]) * double(grad[i])));

  LabelVolume u = seed.u;
  const auto& d = u.dims();
  int pass_counter = 0;
  int unchanged_streak = 0;
  for (int iter = 0; iter < params.iterations; ++iter) {
    const LabelVolume prev = u;

    if (balloon_active(params.balloon, iter)) {
      const LabelVolume moved = morph27_box(u, b, params.balloon > 0);
      // low edge values freeze the balloon
      for (int k = b.lo[2]; k < b.hi[2]; ++k)
        for (int j = b.lo[1]; j < b.hi[1]; ++j)
          for (int i = b.lo[0]; i < b.hi[0]; ++i) {
            const std::int64_t v = u.index_of(i, j, k);
            if (g[v] > params.threshold) u[v] = moved[v];
          }
      clip_to_domain(u, domain);
    }

    // attraction toward edges: sign of grad(u) . grad(g)
    {
      const LabelVolume base = u;
      parallel_chunks(b.lo[2], b.hi[2], [&](std::int64_t k0, std::int64_t k1) {
        for (std::int64_t k = k0; k < k1; ++k)
          for (int j = b.lo[1]; j < b.hi[1]; ++j)
            for (int i = b.lo[0]; i < b.hi[0]; ++i) {
              const std::int64_t v = base.index_of(i, j, int(k));
              if (domain && (*domain)[v] == 0) continue;
              const int il = std::max(i - 1, 0), ir = std::min(i + 1, d[0] - 1);
              const int jl = std::max(j - 1, 0), jr = std::min(j + 1, d[1] - 1);
              const int kl = std::max(int(k) - 1, 0), kr = std::min(int(k) + 1, d[2] - 1);
              const double ux = double(base.at(ir, j, int(k))) - double(base.at(il, j, int(k)));
              const double uy = double(base.at(i, jr, int(k))) - double(base.at(i, jl, int(k)));
              const double uz = double(base.at(i, j, kr)) - double(base.at(i, j, kl));
              if (ux == 0.0 && uy == 0.0 && uz == 0.0) continue;
              const double gx = double(g.at(ir, j, int(k))) - double(g.at(il, j, int(k)));
              const double gy = double(g.at(i, jr, int(k))) - double(g.at(i, jl, int(k)));
              const double gz = double(g.at(i, j, kr)) - double(g.at(i, j, kl));
              const double dot = ux * gx + uy * gy + uz * gz;
              if (dot > 0.0)
                u[v] = 1;
              else if (dot < 0.0)
                u[v] = 0;
            }
      });
      clip_to_domain(u, domain);
    }

    for (int s = 0; s < params.smoothing_passes; ++s) {
      u = (pass_counter % 2 == 0) ? plane_op(plane_op(u, b, PlaneOp::InfSup), b, PlaneOp::SupInf)
                                  : plane_op(plane_op(u, b, PlaneOp::SupInf), b, PlaneOp::InfSup);
      ++pass_counter;
    }
    clip_to_domain(u, domain);

    std::int64_t count = 0;
    bool changed = false;
    for (std::int64_t i = 0; i < u.size(); ++i) {
      count += u[i] != 0;
      changed = changed || u[i] != prev[i];
    }
    if (count == 0)
      throw DegenerateContour("mgac_evolve: mask collapsed to empty", iter);
    unchanged_streak = changed ? 0 : unchanged_streak + 1;
    if (unchanged_streak >= 3) break;
  }
  return u;
}

}  // namespace nph
