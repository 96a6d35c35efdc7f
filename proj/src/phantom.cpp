#include "nph/phantom.hpp"

#include "nph/errors.hpp"
#include "nph/morphology.hpp"
#include "nph/nifti.hpp"
#include "nph/parallel.hpp"
#include "nph/preprocess.hpp"
#include "nph/rng.hpp"
#include "nph/tissue.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <vector>

namespace nph {
namespace {

constexpr double kPi = 3.14159265358979323846;

inline double ellipsoid_q(const Eigen::Vector3d& p, const Eigen::Vector3d& semi) {
  const double x = p.x() / semi.x(), y = p.y() / semi.y(), z = p.z() / semi.z();
  return x * x + y * y + z * z;
}

struct Anatomy {
  Eigen::Vector3d cavity;       // cranial cavity semi-axes, mm
  Eigen::Vector3d skull_outer;  // cavity + shell thickness
  double pocket_center_z = 0.0; // CSF pocket sphere center (on the z axis, above the crown)
  double pocket_radius = 0.0;
  Eigen::Vector3d vent_radii;   // one lateral ventricle's semi-axes
  double vent_dx = 0.0;         // mirrored ventricle center offset along x
  double vent_dz = 0.0;         // common ventricle center drop along z

  // CSF pocket: spherical lens bitten out of the upper cavity. A compact
  // deep pocket survives resampling; a thin wrap-around film would not.
  bool in_pocket(const Eigen::Vector3d& p) const {
    const double dx = p.x(), dy = p.y(), dz = p.z() - pocket_center_z;
    return dx * dx + dy * dy + dz * dz <= pocket_radius * pocket_radius;
  }
};

// relative ventricle shape: narrow in x, long in y, mirrored pair overlaps at
// the midline so the compartment is one connected CSF region
const Eigen::Vector3d kVentAspect(0.50, 1.00, 0.62);

inline bool in_ventricles(const Eigen::Vector3d& p, const Anatomy& a) {
  const Eigen::Vector3d c1(a.vent_dx, 0.0, a.vent_dz);
  const Eigen::Vector3d c2(-a.vent_dx, 0.0, a.vent_dz);
  return ellipsoid_q(p - c1, a.vent_radii) <= 1.0 || ellipsoid_q(p - c2, a.vent_radii) <= 1.0;
}

// Solves count(scale) == target by a few fixed-point steps plus bisection;
// counts are voxel-quantized so the best bracket edge is kept.
double solve_scale(const std::function<std::int64_t(double)>& count, double initial,
                   std::int64_t target, const char* what) {
  double s = initial;
  for (int it = 0; it < 3; ++it) {
    const std::int64_t c = count(s);
    if (c <= 0) throw InvalidInput(std::string("phantom: ") + what + " target not achievable");
    s *= std::cbrt(double(target) / double(c));
  }
  double lo = s * 0.90, hi = s * 1.10;
  if (count(lo) > target) lo = s * 0.5;
  if (count(hi) < target) hi = s * 1.5;
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (count(mid) < target)
      lo = mid;
    else
      hi = mid;
  }
  const double best = (std::llabs(count(lo) - target) < std::llabs(count(hi) - target)) ? lo : hi;
  if (std::llabs(count(best) - target) > std::max<std::int64_t>(1, target / 50))
    throw InvalidInput(std::string("phantom: ") + what + " volume not reachable within 2%");
  return best;
}

}  // namespace

Phantom generate_phantom(const PhantomSpec& spec, std::uint64_t seed) {
  if (!(spec.ventricle_ml > 0.0 && spec.subarachnoid_ml > 0.0 && spec.cerebral_ml > 0.0))
    throw InvalidInput("phantom: all compartment targets must be positive");
  if (!(spec.skull_thickness_mm > 0.0)) throw InvalidInput("phantom: skull thickness must be positive");
  if (!(spec.offset_scale > 0.0)) throw InvalidInput("phantom: offset scale must be positive");

  const GridGeometry grid = centered_geometry(spec.dims, spec.spacing);
  const double voxvol = grid.voxel_volume_mm3();
  const auto to_voxels = [&](double ml) { return std::int64_t(std::llround(ml * 1000.0 / voxvol)); };

  // pose jitter first so the noise stream below is unaffected by whether
  // jitter is enabled
  Rng rng(seed);
  Eigen::Vector3d jitter_rot = Eigen::Vector3d::Zero();
  Eigen::Vector3d jitter_trans = Eigen::Vector3d::Zero();
  double jitter_scale = 0.0;
  if (spec.jitter_rotation_deg > 0.0 || spec.jitter_translation_mm > 0.0 || spec.jitter_scale > 0.0) {
    for (int a = 0; a < 3; ++a)
      jitter_rot[a] = (2.0 * rng.uniform() - 1.0) * spec.jitter_rotation_deg;
    for (int a = 0; a < 3; ++a)
      jitter_trans[a] = (2.0 * rng.uniform() - 1.0) * spec.jitter_translation_mm;
    jitter_scale = (2.0 * rng.uniform() - 1.0) * spec.jitter_scale;
  }

  const double deg = kPi / 180.0;
  const Eigen::Vector3d rot = (spec.offset_rotation_deg + jitter_rot) * deg;
  const AffineTransform anat_to_patient =
      AffineTransform::translation(spec.offset_translation_mm + jitter_trans) *
      AffineTransform::rotation(rot.x(), rot.y(), rot.z()) *
      AffineTransform::scaling(Eigen::Vector3d::Constant(spec.offset_scale + jitter_scale));
  // patient voxel index -> anatomical mm, the frame the shapes live in
  const Eigen::Matrix4d vox_to_anat = anat_to_patient.inverse().matrix() * grid.pose.matrix();

  const std::int64_t n = grid.voxel_count();
  std::vector<float> anat_x(static_cast<std::size_t>(n)), anat_y(static_cast<std::size_t>(n)), anat_z(static_cast<std::size_t>(n));
  parallel_chunks(0, spec.dims[2], [&](std::int64_t k0, std::int64_t k1) {
    std::int64_t flat = k0 * spec.dims[0] * spec.dims[1];
    for (std::int64_t k = k0; k < k1; ++k) {
      for (int j = 0; j < spec.dims[1]; ++j) {
        Eigen::Vector3d p = (vox_to_anat * Eigen::Vector4d(0, j, double(k), 1)).head<3>();
        const Eigen::Vector3d step = vox_to_anat.block<3, 1>(0, 0);
        for (int i = 0; i < spec.dims[0]; ++i, ++flat, p += step) {
          anat_x[std::size_t(flat)] = float(p.x());
          anat_y[std::size_t(flat)] = float(p.y());
          anat_z[std::size_t(flat)] = float(p.z());
        }
      }
    }
  });
  auto anat_at = [&](std::int64_t v) {
    return Eigen::Vector3d(anat_x[std::size_t(v)], anat_y[std::size_t(v)], anat_z[std::size_t(v)]);
  };

  Anatomy a;

  // cranial cavity sized for the sum of all three compartments
  const double total_ml = spec.ventricle_ml + spec.subarachnoid_ml + spec.cerebral_ml;
  const double aspect_prod = spec.cavity_aspect.prod();
  const double s0 = std::cbrt(total_ml * 1000.0 / (4.0 / 3.0 * kPi * aspect_prod));
  const double cavity_scale = solve_scale(
      [&](double s) {
        const Eigen::Vector3d semi = spec.cavity_aspect * s;
        std::int64_t c = 0;
        for (std::int64_t v = 0; v < n; ++v)
          if (ellipsoid_q(anat_at(v), semi) <= 1.0) ++c;
        return c;
      },
      s0, to_voxels(total_ml), "cavity");
  a.cavity = spec.cavity_aspect * cavity_scale;
  a.skull_outer = a.cavity + Eigen::Vector3d::Constant(spec.skull_thickness_mm);

  // cache cavity membership and anatomical z for the pocket solve
  std::vector<std::uint8_t> in_cavity(static_cast<std::size_t>(n));
  for (std::int64_t v = 0; v < n; ++v)
    in_cavity[std::size_t(v)] = ellipsoid_q(anat_at(v), a.cavity) <= 1.0 ? 1 : 0;

  // CSF pocket: spherical lens from above, radius bisected to the
  // subarachnoid target; the curved boundary digitizes with sub-voxel
  // sensitivity
  {
    const std::int64_t target = to_voxels(spec.subarachnoid_ml);
    a.pocket_center_z = 1.25 * a.cavity.z();
    auto pocket_count = [&](double radius) {
      Anatomy tmp = a;
      tmp.pocket_radius = radius;
      std::int64_t c = 0;
      for (std::int64_t v = 0; v < n; ++v)
        if (in_cavity[std::size_t(v)] && tmp.in_pocket(anat_at(v))) ++c;
      return c;
    };
    double lo = 0.0, hi = 2.5 * a.cavity.z();  // count increases with radius
    if (pocket_count(hi) < target)
      throw InvalidInput("phantom: subarachnoid target not achievable within the cavity");
    for (int it = 0; it < 50; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (pocket_count(mid) < target)
        lo = mid;
      else
        hi = mid;
    }
    a.pocket_radius = (std::llabs(pocket_count(lo) - target) < std::llabs(pocket_count(hi) - target))
                          ? lo
                          : hi;
    if (std::llabs(pocket_count(a.pocket_radius) - target) > std::max<std::int64_t>(1, target / 50))
      throw InvalidInput("phantom: subarachnoid volume not reachable within 2%");
  }

  // mirrored ventricles, overlapping at the midline
  {
    const std::int64_t target = to_voxels(spec.ventricle_ml);
    const double t0 = std::cbrt(spec.ventricle_ml * 1000.0 /
                                (1.75 * 4.0 / 3.0 * kPi * kVentAspect.prod()));
    auto vent_count = [&](double t) {
      Anatomy tmp = a;
      tmp.vent_radii = kVentAspect * t;
      tmp.vent_dx = 0.55 * tmp.vent_radii.x();
      tmp.vent_dz = -0.06 * a.cavity.z();
      std::int64_t c = 0;
      for (std::int64_t v = 0; v < n; ++v)
        if (in_cavity[std::size_t(v)] && in_ventricles(anat_at(v), tmp)) ++c;
      return c;
    };
    const double t = solve_scale(vent_count, t0, target, "ventricle");
    a.vent_radii = kVentAspect * t;
    a.vent_dx = 0.55 * a.vent_radii.x();
    a.vent_dz = -0.06 * a.cavity.z();
  }


  // paint truth and image
  auto truth = LabelVolume::zeros(grid);
  std::int64_t violations = 0;
  parallel_chunks(0, spec.dims[2], [&](std::int64_t k0, std::int64_t k1) {
    std::int64_t local_violations = 0;
    for (std::int64_t k = k0; k < k1; ++k) {
      for (int j = 0; j < spec.dims[1]; ++j) {
        std::int64_t v = truth.index_of(0, j, int(k));
        for (int i = 0; i < spec.dims[0]; ++i, ++v) {
          const Eigen::Vector3d p = anat_at(v);
          SegLabel lab = SegLabel::Background;
          if (in_cavity[std::size_t(v)]) {
            if (in_ventricles(p, a)) {
              lab = SegLabel::Ventricle;
              // ventricles must stay strictly inside the mass, clear of the
              // pocket surface and the cavity wall
              const double dxp = p.x(), dyp = p.y(), dzp = p.z() - a.pocket_center_z;
              const double pocket_clearance = a.pocket_radius + 2.0 * spec.spacing.maxCoeff();
              if (ellipsoid_q(p, a.cavity) > 0.90 ||
                  dxp * dxp + dyp * dyp + dzp * dzp < pocket_clearance * pocket_clearance)
                ++local_violations;
            } else if (a.in_pocket(p)) {
              lab = SegLabel::Subarachnoid;
            } else {
              lab = SegLabel::CerebralMass;
            }
          } else if (ellipsoid_q(p, a.skull_outer) <= 1.0) {
            lab = SegLabel::Skull;
          }
          truth[v] = std::uint8_t(lab);
        }
      }
    }
    if (local_violations > 0) {
      static std::mutex m;
      std::lock_guard<std::mutex> g(m);
      violations += local_violations;
    }
  });
  if (violations > 0)
    throw InvalidInput("phantom: ventricles not strictly inside cerebral mass");

  // skull must fit: no skull voxel may touch the grid border
  {
    const auto& d = spec.dims;
    auto border_skull = [&](std::int64_t v) { return truth[v] == std::uint8_t(SegLabel::Skull); };
    bool bad = false;
    for (int k = 0; k < d[2] && !bad; ++k)
      for (int j = 0; j < d[1] && !bad; ++j)
        for (int i = 0; i < d[0] && !bad; ++i) {
          if (i != 0 && j != 0 && k != 0 && i != d[0] - 1 && j != d[1] - 1 && k != d[2] - 1) continue;
          bad = border_skull(truth.index_of(i, j, k));
        }
    if (bad) throw InvalidInput("phantom: skull does not fit inside the grid");
  }

  // image: class HU plus seeded Gaussian noise, flat-index order
  auto image = ScalarVolume::zeros(grid);
  for (std::int64_t v = 0; v < n; ++v) {
    double hu = spec.air_hu;
    switch (SegLabel(truth[v])) {
      case SegLabel::Ventricle:
      case SegLabel::Subarachnoid:
        hu = spec.csf_hu;
        break;
      case SegLabel::CerebralMass:
        hu = spec.mass_hu;
        break;
      case SegLabel::Skull:
        hu = spec.skull_hu;
        break;
      case SegLabel::Background:
        break;
    }
    if (spec.noise_sigma_hu > 0.0) hu += rng.normal(0.0, spec.noise_sigma_hu);
    image[v] = float(hu);
  }

  return Phantom{std::move(image), std::move(truth), anat_to_patient};
}

DiceResult dice(const LabelVolume& pred, const LabelVolume& truth, std::uint8_t class_id) {
  if (!pred.geometry().same_grid(truth.geometry()))
    throw InvalidInput("dice: prediction and truth geometry mismatch");
  DiceResult r;
  for (std::int64_t v = 0; v < pred.size(); ++v) {
    const bool p = pred[v] == class_id;
    const bool t = truth[v] == class_id;
    r.tp += p && t;
    r.fp += p && !t;
    r.fn += !p && t;
  }
  r.dice = (r.tp + r.fp + r.fn) == 0 ? 1.0 : 2.0 * double(r.tp) / double(2 * r.tp + r.fp + r.fn);
  return r;
}

std::vector<SubjectRecord> synth_cohort(int n_normal, int n_nph, std::uint64_t seed,
                                        const CohortParams& params) {
  if (n_normal < 2 || n_nph < 2) throw InvalidInput("synth_cohort: need at least 2 subjects per class");
  Rng rng(seed);
  std::vector<SubjectRecord> out;
  out.reserve(std::size_t(n_normal + n_nph));

  auto draw = [&](const Eigen::Vector3d& mean, const Eigen::Vector3d& std, Diagnosis label,
                  const std::string& prefix, int index) {
    const double zv = rng.normal();
    const double zs = rng.normal();
    const double zm = rng.normal();
    const double rho = params.mass_ventricle_corr;
    const double zmass = rho * zv + std::sqrt(std::max(0.0, 1.0 - rho * rho)) * zm;
    SubjectRecord r;
    char id[32];
    std::snprintf(id, sizeof(id), "%s_%03d", prefix.c_str(), index);
    r.subject_id = id;
    r.ventricle_ml = std::max(1.0, mean.x() + std.x() * zv);
    r.subarachnoid_ml = std::max(1.0, mean.y() + std.y() * zs);
    r.cerebral_ml = std::max(1.0, mean.z() + std.z() * zmass);
    r.total_ml = r.ventricle_ml + r.subarachnoid_ml + r.cerebral_ml;
    r.label = label;
    return r;
  };

  for (int i = 0; i < n_normal; ++i)
    out.push_back(draw(params.normal_mean, params.normal_std, Diagnosis::NonNph, "normal", i));
  for (int i = 0; i < n_nph; ++i)
    out.push_back(draw(params.nph_mean, params.nph_std, Diagnosis::Nph, "nph", i));
  return out;
}

PhantomSpec load_phantom_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open phantom spec: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad phantom spec " + path.string() + ": " + e.what());
  }
  PhantomSpec s;
  if (j.contains("dims")) {
    const auto d = j["dims"].get<std::vector<int>>();
    if (d.size() != 3) throw IoError("phantom spec: dims needs 3 entries");
    s.dims = {d[0], d[1], d[2]};
  }
  auto vec3 = [&](const char* key, Eigen::Vector3d fallback) {
    if (!j.contains(key)) return fallback;
    const auto v = j[key].get<std::vector<double>>();
    if (v.size() != 3) throw IoError(std::string("phantom spec: ") + key + " needs 3 entries");
    return Eigen::Vector3d(v[0], v[1], v[2]);
  };
  s.spacing = vec3("spacing", s.spacing);
  s.ventricle_ml = j.value("ventricle_ml", s.ventricle_ml);
  s.subarachnoid_ml = j.value("subarachnoid_ml", s.subarachnoid_ml);
  s.cerebral_ml = j.value("cerebral_ml", s.cerebral_ml);
  s.skull_thickness_mm = j.value("skull_thickness_mm", s.skull_thickness_mm);
  s.cavity_aspect = vec3("cavity_aspect", s.cavity_aspect);
  s.skull_hu = j.value("skull_hu", s.skull_hu);
  s.mass_hu = j.value("mass_hu", s.mass_hu);
  s.csf_hu = j.value("csf_hu", s.csf_hu);
  s.air_hu = j.value("air_hu", s.air_hu);
  s.noise_sigma_hu = j.value("noise_sigma_hu", s.noise_sigma_hu);
  s.offset_translation_mm = vec3("offset_translation_mm", s.offset_translation_mm);
  s.offset_rotation_deg = vec3("offset_rotation_deg", s.offset_rotation_deg);
  s.offset_scale = j.value("offset_scale", s.offset_scale);
  s.jitter_rotation_deg = j.value("jitter_rotation_deg", s.jitter_rotation_deg);
  s.jitter_translation_mm = j.value("jitter_translation_mm", s.jitter_translation_mm);
  s.jitter_scale = j.value("jitter_scale", s.jitter_scale);
  return s;
}

void save_phantom_spec(const PhantomSpec& s, const std::filesystem::path& path) {
  nlohmann::json j;
  j["dims"] = {s.dims[0], s.dims[1], s.dims[2]};
  j["spacing"] = {s.spacing.x(), s.spacing.y(), s.spacing.z()};
  j["ventricle_ml"] = s.ventricle_ml;
  j["subarachnoid_ml"] = s.subarachnoid_ml;
  j["cerebral_ml"] = s.cerebral_ml;
  j["skull_thickness_mm"] = s.skull_thickness_mm;
  j["cavity_aspect"] = {s.cavity_aspect.x(), s.cavity_aspect.y(), s.cavity_aspect.z()};
  j["skull_hu"] = s.skull_hu;
  j["mass_hu"] = s.mass_hu;
  j["csf_hu"] = s.csf_hu;
  j["air_hu"] = s.air_hu;
  j["noise_sigma_hu"] = s.noise_sigma_hu;
  j["offset_translation_mm"] = {s.offset_translation_mm.x(), s.offset_translation_mm.y(),
                                s.offset_translation_mm.z()};
  j["offset_rotation_deg"] = {s.offset_rotation_deg.x(), s.offset_rotation_deg.y(),
                              s.offset_rotation_deg.z()};
  j["offset_scale"] = s.offset_scale;
  j["jitter_rotation_deg"] = s.jitter_rotation_deg;
  j["jitter_translation_mm"] = s.jitter_translation_mm;
  j["jitter_scale"] = s.jitter_scale;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write phantom spec: " + path.string());
  out << j.dump(2) << '\n';
}

void assign_evans_ratios(std::vector<SubjectRecord>& records, double sensitivity,
                         double specificity, std::uint64_t seed) {
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].label) throw InvalidInput("assign_evans_ratios: unlabeled record");
    (*records[i].label == Diagnosis::Nph ? pos : neg).push_back(i);
  }
  const double tp_real = sensitivity * double(pos.size());
  const double tn_real = specificity * double(neg.size());
  if (std::abs(tp_real - std::round(tp_real)) > 1e-9 || std::abs(tn_real - std::round(tn_real)) > 1e-9)
    throw InvalidInput("assign_evans_ratios: sens*n_nph and spec*n_normal must be whole numbers");
  const std::size_t tp = std::size_t(std::llround(tp_real));
  const std::size_t tn = std::size_t(std::llround(tn_real));

  Rng rng(seed);
  rng.shuffle(pos);
  rng.shuffle(neg);
  for (std::size_t i = 0; i < pos.size(); ++i)
    records[pos[i]].evans_ratio = i < tp ? 0.35 : 0.25;  // >= 0.3 flags NPH
  for (std::size_t i = 0; i < neg.size(); ++i)
    records[neg[i]].evans_ratio = i < tn ? 0.25 : 0.35;
}


TemplatePackage build_test_template(PhantomSpec spec) {
  spec.noise_sigma_hu = 0.0;
  spec.offset_translation_mm.setZero();
  spec.offset_rotation_deg.setZero();
  spec.offset_scale = 1.0;
  spec.jitter_rotation_deg = spec.jitter_translation_mm = spec.jitter_scale = 0.0;
  const Phantom canonical = generate_phantom(spec, 0);

  TemplatePackage pkg;
  pkg.space.head_mask = mask_of_label(canonical.truth, std::uint8_t(SegLabel::Skull));
  pkg.space.geometry = pkg.space.head_mask.geometry();
  pkg.space.seed_spec_path = "seeds.json";

  const LabelVolume& truth = canonical.truth;
  const auto& d = truth.dims();

  // ventricle seed at the ventricle compartment centroid
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  std::int64_t count = 0;
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i)
        if (truth.at(i, j, k) == std::uint8_t(SegLabel::Ventricle)) {
          centroid += voxel_to_world(truth, {double(i), double(j), double(k)});
          ++count;
        }
  if (count == 0) throw InvalidInput("test template: phantom has no ventricle compartment");
  centroid /= double(count);
  pkg.seeds.ventricle_seed = SeedSphere{centroid, 4.0};

  // cerebral seeds: walk inward from the top, back and front until the mass
  // compartment appears, then step 9 mm deeper
  const int ic = d[0] / 2, jc = d[1] / 2, kc = d[2] / 2;
  auto world_at = [&](int i, int j, int k) {
    return voxel_to_world(truth, {double(i), double(j), double(k)});
  };
  auto is_mass = [&](int i, int j, int k) {
    return truth.at(i, j, k) == std::uint8_t(SegLabel::CerebralMass);
  };
  pkg.seeds.cerebral_seeds.clear();
  // top: scan z downward
  for (int k = d[2] - 1; k >= 0; --k)
    if (is_mass(ic, jc, k)) {
      Eigen::Vector3d p = world_at(ic, jc, k);
      p.z() -= 9.0;
      pkg.seeds.cerebral_seeds.push_back(SeedSphere{p, 6.0});
      break;
    }
  // back: scan y upward
  for (int j = 0; j < d[1]; ++j)
    if (is_mass(ic, j, kc)) {
      Eigen::Vector3d p = world_at(ic, j, kc);
      p.y() += 9.0;
      pkg.seeds.cerebral_seeds.push_back(SeedSphere{p, 6.0});
      break;
    }
  // front: scan y downward
  for (int j = d[1] - 1; j >= 0; --j)
    if (is_mass(ic, j, kc)) {
      Eigen::Vector3d p = world_at(ic, j, kc);
      p.y() -= 9.0;
      pkg.seeds.cerebral_seeds.push_back(SeedSphere{p, 6.0});
      break;
    }
  if (pkg.seeds.cerebral_seeds.size() != 3)
    throw InvalidInput("test template: could not place the three cerebral seeds");
  pkg.seeds.validate(pkg.space);
  return pkg;
}

void write_template_package(const TemplatePackage& package, const std::filesystem::path& dir) {
  TemplateSpace space = package.space;
  space.seed_spec_path = dir / "seeds.json";
  save_template_package(space, dir);
  save_seed_spec(package.seeds, dir / "seeds.json");
}

const char* to_string(SegMethod method) {
  switch (method) {
    case SegMethod::Proposed: return "Proposed Method";
    case SegMethod::RfOnly: return "Random Forest";
    case SegMethod::Mgac: return "3D MGAC";
    case SegMethod::McvUnmasked: return "3D MCV";
  }
  return "?";
}

double MethodComparison::mean(const std::vector<double>& v) const {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / double(v.size());
}

double MethodComparison::stddev(const std::vector<double>& v) const {
  if (v.empty()) return 0.0;
  const double m = mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / double(v.size()));
}

namespace {

// Arm composition per the comparison protocol: labels outside the
// thresholded skull region are discarded and everything inside the skull not
// labeled cerebral mass becomes ventricle.
LabelVolume compose_arm_labels(const LabelVolume& inskull, const LabelVolume& mass_contour) {
  auto seg = LabelVolume::zeros(inskull.geometry());
  for (std::int64_t v = 0; v < seg.size(); ++v) {
    if (inskull[v] == 0) continue;
    seg[v] = mass_contour[v] ? std::uint8_t(SegLabel::CerebralMass)
                             : std::uint8_t(SegLabel::Ventricle);
  }
  return seg;
}

}  // namespace

std::vector<MethodComparison> compare_methods(const std::vector<Phantom>& phantoms,
                                              const std::vector<SegMethod>& methods,
                                              const TemplateSpace& tmpl, const SeedSpec& seeds,
                                              const RandomForest& tissue_model,
                                              const PipelineConfig& config,
                                              const MgacParams& mgac_params) {
  std::vector<MethodComparison> rows(methods.size());
  for (std::size_t m = 0; m < methods.size(); ++m) rows[m].method = methods[m];

  for (const Phantom& phantom : phantoms) {
    // shared front of the workflow: register, resample, denoise, classify
    const LabelVolume skull = extract_skull(phantom.image, config.skull);
    const AffineTransform transform =
        estimate_affine(skull, tmpl, config.registration, config.rng_seed);
    const ScalarVolume den =
        nlm_denoise(to_template(phantom.image, transform, tmpl, Interp::Trilinear), config.denoise);
    const LabelVolume tissue =
        predict_voxelwise(tissue_model, extract_features(den, config.features));
    const LabelVolume inskull = fill_interior(extract_skull(den, config.skull));

    LabelVolume cerebral_seed = LabelVolume::zeros(tmpl.geometry);
    for (const auto& s : seeds.cerebral_seeds) {
      const LabelVolume sphere = seed_sphere_mask(tmpl.geometry, s);
      for (std::int64_t v = 0; v < cerebral_seed.size(); ++v)
        cerebral_seed[v] = cerebral_seed[v] || sphere[v];
    }

    for (std::size_t m = 0; m < methods.size(); ++m) {
      MethodComparison& row = rows[m];
      try {
        LabelVolume seg_t = LabelVolume::zeros(tmpl.geometry);
        switch (methods[m]) {
          case SegMethod::Proposed:
            seg_t = segment_in_template_space(den, tissue, seeds, config).seg;
            break;
          case SegMethod::RfOnly: {
            for (std::int64_t v = 0; v < seg_t.size(); ++v) {
              if (inskull[v] == 0) continue;
              if (tissue[v] == std::uint8_t(TissueClass::Csf))
                seg_t[v] = std::uint8_t(SegLabel::Ventricle);
              else if (tissue[v] == std::uint8_t(TissueClass::CerebralMass))
                seg_t[v] = std::uint8_t(SegLabel::CerebralMass);
            }
            break;
          }
          case SegMethod::McvUnmasked: {
            EvolvingMask em;
            em.u = cerebral_seed;
            const LabelVolume mass = mcv_evolve(den, em, config.cerebral_mcv);
            seg_t = compose_arm_labels(inskull, mass);
            break;
          }
          case SegMethod::Mgac: {
            EvolvingMask em;
            em.u = cerebral_seed;
            const LabelVolume mass = mgac_evolve(den, em, mgac_params);
            seg_t = compose_arm_labels(inskull, mass);
            break;
          }
        }
        const LabelVolume patient = to_patient(seg_t, transform, phantom.truth.geometry());
        row.ventricle_dice.push_back(
            dice(patient, phantom.truth, std::uint8_t(SegLabel::Ventricle)).dice);
        row.cerebral_dice.push_back(
            dice(patient, phantom.truth, std::uint8_t(SegLabel::CerebralMass)).dice);
      } catch (const std::exception&) {
        // a failed run scores zero and is flagged, never dropped
        row.ventricle_dice.push_back(0.0);
        row.cerebral_dice.push_back(0.0);
        ++row.failures;
      }
    }
  }
  return rows;
}

void save_comparison_csv(const std::vector<MethodComparison>& rows,
                         const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write comparison CSV: " + path.string());
  out << "method,ventricle_dice_mean,ventricle_dice_std,cerebral_dice_mean,cerebral_dice_std,"
         "failures\n";
  out.precision(10);
  for (const auto& r : rows)
    out << to_string(r.method) << ',' << r.mean(r.ventricle_dice) << ','
        << r.stddev(r.ventricle_dice) << ',' << r.mean(r.cerebral_dice) << ','
        << r.stddev(r.cerebral_dice) << ',' << r.failures << '\n';
}

std::string format_comparison_table(const std::vector<MethodComparison>& rows) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-18s  %-22s  %-22s\n", "Method", "Ventricle (Dice)",
                "Cerebral Mass (Dice)");
  out << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof(line), "%-18s  %6.2f +- %5.2f %%       %6.2f +- %5.2f %%\n",
                  to_string(r.method), 100.0 * r.mean(r.ventricle_dice),
                  100.0 * r.stddev(r.ventricle_dice), 100.0 * r.mean(r.cerebral_dice),
                  100.0 * r.stddev(r.cerebral_dice));
    out << line;
  }
  return out.str();
}


}  // namespace nph
