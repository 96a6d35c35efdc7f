#include "nph/registration.hpp"

#include "nph/errors.hpp"
#include "nph/filters.hpp"
#include "nph/morphology.hpp"
#include "nph/nifti.hpp"
#include "nph/parallel.hpp"
#include "nph/phantom.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>
#include <vector>

namespace nph {

void TemplateSpace::validate() const {
  geometry.validate();
  if (!head_mask.geometry().same_grid(geometry))
    throw InvalidInput("TemplateSpace: head_mask geometry differs from declared geometry");
  if (count_nonzero(head_mask) == 0) throw InvalidInput("TemplateSpace: head mask is empty");
}

void RegistrationParams::validate() const {
  if (pyramid_levels < 1) throw InvalidInput("RegistrationParams: pyramid_levels must be >= 1");
  if (max_iters_per_level < 1) throw InvalidInput("RegistrationParams: max_iters_per_level must be >= 1");
  if (!(convergence_tol > 0.0)) throw InvalidInput("RegistrationParams: convergence_tol must be > 0");
}

namespace {

// 12 parameters: translation mm, rotation rad, scale, shear
struct Params12 {
  Eigen::Vector3d t{0, 0, 0};
  Eigen::Vector3d r{0, 0, 0};
  Eigen::Vector3d s{1, 1, 1};
  Eigen::Vector3d h{0, 0, 0};

  double& operator[](int i) {
    switch (i / 3) {
      case 0: return t[i % 3];
      case 1: return r[i % 3];
      case 2: return s[i % 3];
      default: return h[i % 3];
    }
  }
};

// Rotation/scale/shear act about the mask centroids so the parameters stay
// well conditioned.
AffineTransform compose(const Params12& p, const Eigen::Vector3d& subject_centroid,
                        const Eigen::Vector3d& template_centroid) {
  Eigen::Matrix3d shear = Eigen::Matrix3d::Identity();
  shear(0, 1) = p.h.x();
  shear(0, 2) = p.h.y();
  shear(1, 2) = p.h.z();
  const Eigen::Matrix3d linear =
      (Eigen::AngleAxisd(p.r.z(), Eigen::Vector3d::UnitZ()) *
       Eigen::AngleAxisd(p.r.y(), Eigen::Vector3d::UnitY()) *
       Eigen::AngleAxisd(p.r.x(), Eigen::Vector3d::UnitX()))
          .toRotationMatrix() *
      shear * p.s.asDiagonal();
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.block<3, 3>(0, 0) = linear;
  m.block<3, 1>(0, 3) = template_centroid + p.t - linear * subject_centroid;
  return AffineTransform(m);
}

struct MaskStats {
  Eigen::Vector3d centroid;  // mm
  Eigen::Matrix3d cov;       // second moments about the centroid, mm^2
  std::int64_t count = 0;
};

MaskStats mask_stats(const LabelVolume& mask) {
  MaskStats st;
  Eigen::Vector3d sum = Eigen::Vector3d::Zero();
  Eigen::Matrix3d sum2 = Eigen::Matrix3d::Zero();
  const auto& d = mask.dims();
  const Eigen::Matrix4d& pose = mask.pose().matrix();
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        if (mask.at(i, j, k) == 0) continue;
        const Eigen::Vector3d w = (pose * Eigen::Vector4d(i, j, k, 1)).head<3>();
        sum += w;
        sum2 += w * w.transpose();
        ++st.count;
      }
  if (st.count == 0) throw InvalidInput("registration: subject mask is empty");
  st.centroid = sum / double(st.count);
  st.cov = sum2 / double(st.count) - st.centroid * st.centroid.transpose();
  return st;
}

// Principal-axis initialization: centroids align the translation, matched
// covariance eigenvectors give the starting rotation, and eigenvalue ratios
// give per-axis scales. Leaves shear at zero.
void init_from_moments(const MaskStats& subj, const MaskStats& tmpl, Params12& p) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es_s(subj.cov), es_t(tmpl.cov);
  const Eigen::Matrix3d vs = es_s.eigenvectors();
  const Eigen::Matrix3d vt = es_t.eigenvectors();
  const Eigen::Vector3d ls = es_s.eigenvalues().cwiseMax(1e-12);
  const Eigen::Vector3d lt = es_t.eigenvalues().cwiseMax(1e-12);

  // greedy axis pairing by alignment; both solvers sort eigenvalues ascending
  // so index order already matches for head-like masks, but pair defensively
  std::array<int, 3> match{-1, -1, -1};
  std::array<bool, 3> used{false, false, false};
  Eigen::Matrix3d a = Eigen::Matrix3d::Zero(), b = Eigen::Matrix3d::Zero();
  for (int i = 0; i < 3; ++i) {
    int best_j = -1;
    double best_dot = -1.0;
    for (int j = 0; j < 3; ++j) {
      if (used[std::size_t(j)]) continue;
      const double dot = std::abs(vt.col(i).dot(vs.col(j)));
      if (dot > best_dot) {
        best_dot = dot;
        best_j = j;
      }
    }
    used[std::size_t(best_j)] = true;
    match[std::size_t(i)] = best_j;
    a.col(i) = vt.col(i);
    b.col(i) = vs.col(best_j) * (vt.col(i).dot(vs.col(best_j)) < 0 ? -1.0 : 1.0);
  }
  Eigen::Matrix3d r0 = a * b.transpose();
  if (r0.determinant() < 0) {
    b.col(2) = -b.col(2);
    r0 = a * b.transpose();
  }

  // Euler extraction for Rz(rz)*Ry(ry)*Rx(rx)
  p.r.y() = std::asin(std::clamp(-r0(2, 0), -1.0, 1.0));
  p.r.x() = std::atan2(r0(2, 1), r0(2, 2));
  p.r.z() = std::atan2(r0(1, 0), r0(0, 0));

  // per-axis scale from matched eigenvalue ratios, keyed by the subject
  // eigenvector's dominant world axis
  for (int i = 0; i < 3; ++i) {
    const int j = match[std::size_t(i)];
    int axis;
    vs.col(j).cwiseAbs().maxCoeff(&axis);
    p.s[axis] = std::clamp(std::sqrt(lt[i] / ls[j]), 0.7, 1.4);
  }
}

// OR-pooled binary pyramid level; the level pose keeps voxel centers aligned
// with the original grid.
LabelVolume downsample_or(const LabelVolume& mask, int factor) {
  if (factor == 1) return mask;
  const auto& d = mask.dims();
  Dims3 nd{(d[0] + factor - 1) / factor, (d[1] + factor - 1) / factor, (d[2] + factor - 1) / factor};
  Eigen::Matrix4d block = Eigen::Matrix4d::Identity();
  block(0, 0) = block(1, 1) = block(2, 2) = factor;
  block.block<3, 1>(0, 3) = Eigen::Vector3d::Constant(0.5 * (factor - 1));
  GridGeometry g{nd, mask.spacing() * factor, AffineTransform(Eigen::Matrix4d(mask.pose().matrix() * block))};
  auto out = LabelVolume::zeros(g);
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i)
        if (mask.at(i, j, k) != 0) out.at(i / factor, j / factor, k / factor) = 1;
  return out;
}

// One pyramid level's cost data: soft Dice between the warped subject mask
// (trilinearly sampled at weighted template-mask voxels) and the template
// mask, with the warped mask's total measure obtained analytically from the
// determinant. Gaussian smoothing of both masks (sigma in level voxels)
// widens the thin-shell overlap basin; sigma 0 keeps the raw masks for the
// final polish.
class LevelCost {
public:
  LevelCost(const LabelVolume& subject, const LabelVolume& tmpl, double sigma_voxels) {
    subject_pose_inv_ = subject.pose().inverse().matrix();
    tmpl_pose_ = tmpl.pose().matrix();
    sdims_ = subject.dims();

    ScalarVolume::DataArray sfield(subject.size());
    std::int64_t n_subj = 0;
    for (std::int64_t i = 0; i < subject.size(); ++i) {
      sfield[i] = subject[i] ? 1.0f : 0.0f;
      n_subj += subject[i] != 0;
    }
    ScalarVolume ssmooth = gaussian_smooth(ScalarVolume(subject.geometry(), std::move(sfield)),
                                           sigma_voxels);
    sdata_.assign(ssmooth.data().data(), ssmooth.data().data() + ssmooth.size());

    ScalarVolume::DataArray tfield(tmpl.size());
    for (std::int64_t i = 0; i < tmpl.size(); ++i) tfield[i] = tmpl[i] ? 1.0f : 0.0f;
    ScalarVolume tsmooth = gaussian_smooth(ScalarVolume(tmpl.geometry(), std::move(tfield)),
                                           sigma_voxels);
    const auto& d = tmpl.dims();
    n_tmpl_ = 0.0;
    for (int k = 0; k < d[2]; ++k)
      for (int j = 0; j < d[1]; ++j)
        for (int i = 0; i < d[0]; ++i) {
          const double w = tsmooth.at(i, j, k);
          if (w > 1e-3) {
            tmpl_voxels_.push_back({Eigen::Vector4d(i, j, k, 1.0), w});
            n_tmpl_ += w;
          }
        }
    subject_measure_ = double(n_subj) * subject.geometry().voxel_volume_mm3() /
                       tmpl.geometry().voxel_volume_mm3();
  }

  double cost(const AffineTransform& subject_to_template) const {
    const Eigen::Matrix4d pull =
        subject_pose_inv_ * subject_to_template.inverse().matrix() * tmpl_pose_;
    const std::int64_t n = std::int64_t(tmpl_voxels_.size());
    constexpr std::int64_t kBlock = 4096;
    const std::int64_t blocks = (n + kBlock - 1) / kBlock;
    std::vector<double> partial(std::size_t(blocks), 0.0);
    parallel_chunks(0, blocks, [&](std::int64_t b0, std::int64_t b1) {
      for (std::int64_t b = b0; b < b1; ++b) {
        double acc = 0.0;
        const std::int64_t lo = b * kBlock, hi = std::min(n, lo + kBlock);
        for (std::int64_t v = lo; v < hi; ++v) {
          const auto& tv = tmpl_voxels_[std::size_t(v)];
          acc += tv.weight * sample(pull * tv.pos);
        }
        partial[std::size_t(b)] = acc;
      }
    });
    double overlap = 0.0;
    for (double p : partial) overlap += p;  // fixed order keeps runs identical

    const double warped_measure = subject_measure_ * std::abs(subject_to_template.det());
    const double soft_dice = 2.0 * overlap / (warped_measure + n_tmpl_);
    return 1.0 - soft_dice;
  }

private:
  double sample(const Eigen::Vector4d& p) const {
    const double fx = std::floor(p.x()), fy = std::floor(p.y()), fz = std::floor(p.z());
    const int ix = int(fx), iy = int(fy), iz = int(fz);
    const double wx = p.x() - fx, wy = p.y() - fy, wz = p.z() - fz;
    double acc = 0.0;
    for (int dz = 0; dz < 2; ++dz) {
      const int z = iz + dz;
      if (z < 0 || z >= sdims_[2]) continue;
      const double wdz = dz ? wz : 1.0 - wz;
      for (int dy = 0; dy < 2; ++dy) {
        const int y = iy + dy;
        if (y < 0 || y >= sdims_[1]) continue;
        const double wdy = dy ? wy : 1.0 - wy;
        for (int dx = 0; dx < 2; ++dx) {
          const int x = ix + dx;
          if (x < 0 || x >= sdims_[0]) continue;
          const double wdx = dx ? wx : 1.0 - wx;
          acc += wdx * wdy * wdz *
                 sdata_[std::size_t(x) + std::size_t(sdims_[0]) * (std::size_t(y) + std::size_t(sdims_[1]) * std::size_t(z))];
        }
      }
    }
    return acc;
  }

  struct WeightedVoxel {
    Eigen::Vector4d pos;
    double weight;
  };

  Eigen::Matrix4d subject_pose_inv_;
  Eigen::Matrix4d tmpl_pose_;
  Dims3 sdims_{};
  std::vector<float> sdata_;
  std::vector<WeightedVoxel, Eigen::aligned_allocator<WeightedVoxel>> tmpl_voxels_;
  double n_tmpl_ = 0.0;
  double subject_measure_ = 0.0;
};

// Line minimization over [x-radius, x+radius]. Thin-shell overlap costs have
// a narrow basin riding on a gentle slope, so a uniform scan locates the
// basin first and golden-section then refines inside the winning cell.
// Returns the best point found (the incumbent when nothing improves).
template <typename F>
double line_search(F&& f, double x, double radius, double incumbent_cost, double* out_cost) {
  double best_x = x, best_f = incumbent_cost;
  auto consider = [&](double xx, double ff) {
    if (ff < best_f) {
      best_f = ff;
      best_x = xx;
    }
  };

  constexpr int kScan = 13;
  const double step = 2.0 * radius / (kScan - 1);
  for (int i = 0; i < kScan; ++i) {
    const double xx = x - radius + step * i;
    consider(xx, f(xx));
  }

  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = best_x - step, b = best_x + step;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  double fc = f(c), fd = f(d);
  consider(c, fc);
  consider(d, fd);
  for (int it = 0; it < 10; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = f(c);
      consider(c, fc);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = f(d);
      consider(d, fd);
    }
  }
  *out_cost = best_f;
  return best_x;
}

}  // namespace

AffineTransform estimate_affine(const LabelVolume& subject_skull, const TemplateSpace& tmpl,
                                const RegistrationParams& params, std::uint64_t /*rng_seed*/,
                                RegistrationTrace* trace) {
  params.validate();
  tmpl.validate();

  const MaskStats subj_stats = mask_stats(subject_skull);
  const MaskStats tmpl_stats = mask_stats(tmpl.head_mask);

  Params12 p;
  init_from_moments(subj_stats, tmpl_stats, p);

  // local refinement radii per parameter family, shrinking with pyramid level
  const double trans_radius[3] = {8.0, 4.0, 2.0};
  const double rot_radius[3] = {0.08, 0.04, 0.02};
  const double scale_radius[3] = {0.06, 0.03, 0.015};
  const double shear_radius[3] = {0.05, 0.025, 0.012};

  for (int level = 0; level < params.pyramid_levels; ++level) {
    const int factor = 1 << (params.pyramid_levels - 1 - level);
    const int ridx = std::min(level, 2);
    // mild smoothing at coarse levels rounds pooling artifacts; the finest
    // level optimizes the raw masks
    const double sigma = factor > 1 ? 0.6 : 0.0;
    const LevelCost cost(downsample_or(subject_skull, factor), downsample_or(tmpl.head_mask, factor),
                         sigma);
    auto eval = [&](const Params12& q) {
      return cost.cost(compose(q, subj_stats.centroid, tmpl_stats.centroid));
    };
    double current = eval(p);
    if (trace) trace->level_costs.emplace_back(1, current);

    int searches = 0;
    while (searches < params.max_iters_per_level) {
      const double sweep_start = current;
      for (int i = 0; i < 12 && searches < params.max_iters_per_level; ++i, ++searches) {
        double radius;
        switch (i / 3) {
          case 0: radius = trans_radius[ridx]; break;
          case 1: radius = rot_radius[ridx]; break;
          case 2: radius = scale_radius[ridx]; break;
          default: radius = shear_radius[ridx]; break;
        }
        Params12 q = p;
        double line_cost = current;
        const double best = line_search(
            [&](double x) {
              q[i] = x;
              return eval(q);
            },
            p[i], radius, current, &line_cost);
        if (line_cost < current) {  // strict improvement keeps cost non-increasing
          p[i] = best;
          current = line_cost;
        }
        if (trace) trace->level_costs.back().push_back(current);
      }
      if (sweep_start - current < params.convergence_tol * std::max(1e-12, sweep_start)) break;
    }
  }

  const AffineTransform result = compose(p, subj_stats.centroid, tmpl_stats.centroid);
  const double hard_dice = mask_overlap_dice(subject_skull, tmpl, result);
  if (hard_dice < 0.5)
    throw RegistrationFailure(
        "registration failed: mask overlap Dice " + std::to_string(hard_dice) + " below 0.5",
        hard_dice);
  return result;
}

ScalarVolume to_template(const ScalarVolume& volume, const AffineTransform& transform,
                         const TemplateSpace& tmpl, Interp mode) {
  return resample(volume, transform, tmpl.geometry, mode);
}

LabelVolume to_template(const LabelVolume& volume, const AffineTransform& transform,
                        const TemplateSpace& tmpl, Interp mode) {
  return resample(volume, transform, tmpl.geometry, mode);
}

LabelVolume to_patient(const LabelVolume& labels, const AffineTransform& transform,
                       const GridGeometry& subject_geometry) {
  // inverse mapping back to the subject grid, nearest neighbor only
  return resample(labels, transform.inverse(), subject_geometry, Interp::Nearest);
}

void save_transform(const AffineTransform& transform, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open transform file for writing: " + path.string());
  out.precision(17);
  const Eigen::Matrix4d& m = transform.matrix();
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) out << m(r, c) << (c == 3 ? '\n' : ' ');
  }
  if (!out) throw IoError("write failed: " + path.string());
}

AffineTransform load_transform(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open transform file: " + path.string());
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c)
      if (!(in >> m(r, c))) throw IoError("transform file truncated: " + path.string());
  return AffineTransform(m);
}

TemplateSpace load_template_package(const std::filesystem::path& dir) {
  const auto json_path = dir / "template.json";
  std::ifstream in(json_path);
  if (!in) throw IoError("cannot open template package: " + json_path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad template.json at " + json_path.string() + ": " + e.what());
  }

  TemplateSpace t;
  t.head_mask = load_label_volume(dir / j.value("head_mask", "head_mask.nii.gz"));
  t.geometry = t.head_mask.geometry();
  if (j.contains("dims")) {
    const auto dims = j["dims"].get<std::vector<int>>();
    if (dims.size() != 3 || Dims3{dims[0], dims[1], dims[2]} != t.geometry.dims)
      throw IoError("template.json dims disagree with head mask: " + json_path.string());
  }
  t.seed_spec_path = dir / j.value("seed_spec", "seeds.json");
  t.validate();
  return t;
}

void save_template_package(const TemplateSpace& tmpl, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_volume(tmpl.head_mask, dir / "head_mask.nii.gz");
  nlohmann::json j;
  j["format"] = "nph-template-v1";
  j["dims"] = {tmpl.geometry.dims[0], tmpl.geometry.dims[1], tmpl.geometry.dims[2]};
  j["spacing"] = {tmpl.geometry.spacing.x(), tmpl.geometry.spacing.y(), tmpl.geometry.spacing.z()};
  j["head_mask"] = "head_mask.nii.gz";
  j["seed_spec"] = tmpl.seed_spec_path.filename().string();
  std::ofstream out(dir / "template.json");
  if (!out) throw IoError("cannot write template.json in " + dir.string());
  out << j.dump(2) << '\n';
}

double mask_overlap_dice(const LabelVolume& subject_mask, const TemplateSpace& tmpl,
                         const AffineTransform& transform) {
  auto warped = resample(subject_mask, transform, tmpl.geometry, Interp::Nearest);
  return dice(warped, tmpl.head_mask, 1).dice;
}

}  // namespace nph
