#pragma once

#include "nph/volume.hpp"

#include <optional>
#include <utility>

namespace nph {

/// Morphological Chan-Vese settings. lambda1/lambda2 weight the inside /
/// outside intensity attachment; smoothing_passes realizes the surface-area
/// penalty and balloon the volume term of the underlying energy.
struct McvParams {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  int smoothing_passes = 1;
  double balloon = 0.0;
  int iterations = 150;

  void validate() const;
};

/// Morphological geodesic active contour settings. The edge map is
/// 1/sqrt(1 + alpha * |grad(G_sigma * u0)|^2); balloon updates apply only
/// where the edge map exceeds threshold.
struct MgacParams {
  double edge_sigma = 2.0;  // voxels
  double alpha = 100.0;
  double balloon = 1.0;
  double threshold = 0.3;
  int iterations = 150;
  int smoothing_passes = 1;

  void validate() const;
};

/// Binary evolving surface, optionally restricted to a masked domain.
struct EvolvingMask {
  LabelVolume u;
  std::optional<LabelVolume> masked_domain;

  /// u and domain share the grid and u stays inside the domain.
  void validate() const;
};

/// Mean intensity inside the mask (c1) and outside it (c2), restricted to
/// the domain when one is given. Throws DegenerateContour when either side
/// is empty.
std::pair<double, double> region_means(const ScalarVolume& image, const LabelVolume& mask,
                                       const LabelVolume* domain = nullptr);

/// One Chan-Vese data step: voxels on the discrete contour (|grad u| > 0)
/// switch inside when lambda1*(u0-c1)^2 < lambda2*(u0-c2)^2, switch outside
/// on the reverse, and hold on ties. Exposed for the fixed-point tests.
LabelVolume chan_vese_data_step(const ScalarVolume& image, const LabelVolume& u,
                                const LabelVolume* domain, double lambda1, double lambda2);

/// One curvature-smoothing pass: SI(IS(u)) for even pass_index, IS(SI(u))
/// for odd, over the 6 discrete plane orientations in the 3x3x3 cube.
LabelVolume curvature_smooth(const LabelVolume& u, int pass_index);

/// Diagnostic evaluation of the Chan-Vese energy (surface area weighted by
/// smoothing_passes, volume by balloon, plus the two attachment integrals).
/// The morphological scheme does not guarantee monotone descent in it.
double chan_vese_energy(const ScalarVolume& image, const LabelVolume& mask,
                        const McvParams& params, const LabelVolume* domain = nullptr);

/// Evolves the seed with the morphological Chan-Vese scheme. A constant
/// image (c1 == c2) returns the mask unchanged; a mask that collapses to
/// empty raises DegenerateContour carrying the iteration index.
LabelVolume mcv_evolve(const ScalarVolume& image, const EvolvingMask& seed, const McvParams& params);

/// Evolves the seed with the morphological geodesic active contour scheme.
LabelVolume mgac_evolve(const ScalarVolume& image, const EvolvingMask& seed, const MgacParams& params);

}  // namespace nph
