#include "nph/pipeline.hpp"

#include "nph/errors.hpp"
#include "nph/morphology.hpp"

#include "json.hpp"

#include <cmath>
#include <fstream>

namespace nph {

namespace {

// stage wrapper: typed errors keep their type (exit codes depend on it) but
// gain the stage and subject context
template <typename Fn>
auto run_stage(const std::string& subject_id, const char* stage, Fn&& fn) {
  auto prefix = [&](const std::string& what) {
    return "subject " + subject_id + " [" + stage + "]: " + what;
  };
  try {
    return fn();
  } catch (const RegistrationFailure& e) {
    throw RegistrationFailure(prefix(e.what()), e.dice);
  } catch (const DegenerateContour& e) {
    throw DegenerateContour(prefix(e.what()), e.iteration);
  } catch (const IoError& e) {
    throw IoError(prefix(e.what()));
  } catch (const InvalidInput& e) {
    throw InvalidInput(prefix(e.what()));
  }
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

nlohmann::json config_to_json(const PipelineConfig& c) {
  nlohmann::json j;
  j["skull_hu"] = c.skull.min_hu;
  j["nlm"] = {{"patch_radius", c.denoise.patch_radius},
              {"search_radius", c.denoise.search_radius},
              {"h", c.denoise.h}};
  j["registration"] = {{"pyramid_levels", c.registration.pyramid_levels},
                       {"max_iters_per_level", c.registration.max_iters_per_level},
                       {"convergence_tol", c.registration.convergence_tol}};
  j["features"] = {{"intensity_only", c.features.intensity_only}};
  j["tissue_forest"] = {{"n_estimators", c.tissue_forest.n_estimators},
                        {"max_depth", c.tissue_forest.max_depth},
                        {"min_samples_split", c.tissue_forest.min_samples_split},
                        {"max_features", c.tissue_forest.max_features}};
  auto mcv = [](const McvParams& p) {
    return nlohmann::json{{"lambda1", p.lambda1},
                          {"lambda2", p.lambda2},
                          {"smoothing_passes", p.smoothing_passes},
                          {"balloon", p.balloon},
                          {"iterations", p.iterations}};
  };
  j["ventricle_mcv"] = mcv(c.ventricle_mcv);
  j["cerebral_mcv"] = mcv(c.cerebral_mcv);
  j["mask_fill_hu"] = c.mask_fill_hu;
  j["rng_seed"] = c.rng_seed;
  j["jobs"] = c.jobs;
  return j;
}

void config_from_json(const nlohmann::json& j, PipelineConfig* c) {
  c->skull.min_hu = j.value("skull_hu", c->skull.min_hu);
  if (j.contains("nlm")) {
    const auto& n = j["nlm"];
    c->denoise.patch_radius = n.value("patch_radius", c->denoise.patch_radius);
    c->denoise.search_radius = n.value("search_radius", c->denoise.search_radius);
    c->denoise.h = n.value("h", c->denoise.h);
  }
  if (j.contains("registration")) {
    const auto& r = j["registration"];
    c->registration.pyramid_levels = r.value("pyramid_levels", c->registration.pyramid_levels);
    c->registration.max_iters_per_level =
        r.value("max_iters_per_level", c->registration.max_iters_per_level);
    c->registration.convergence_tol = r.value("convergence_tol", c->registration.convergence_tol);
  }
  if (j.contains("features"))
    c->features.intensity_only = j["features"].value("intensity_only", c->features.intensity_only);
  if (j.contains("tissue_forest")) {
    const auto& f = j["tissue_forest"];
    c->tissue_forest.n_estimators = f.value("n_estimators", c->tissue_forest.n_estimators);
    c->tissue_forest.max_depth = f.value("max_depth", c->tissue_forest.max_depth);
    c->tissue_forest.min_samples_split =
        f.value("min_samples_split", c->tissue_forest.min_samples_split);
    c->tissue_forest.max_features = f.value("max_features", c->tissue_forest.max_features);
  }
  auto mcv = [](const nlohmann::json& mj, McvParams* p) {
    p->lambda1 = mj.value("lambda1", p->lambda1);
    p->lambda2 = mj.value("lambda2", p->lambda2);
    p->smoothing_passes = mj.value("smoothing_passes", p->smoothing_passes);
    p->balloon = mj.value("balloon", p->balloon);
    p->iterations = mj.value("iterations", p->iterations);
  };
  if (j.contains("ventricle_mcv")) mcv(j["ventricle_mcv"], &c->ventricle_mcv);
  if (j.contains("cerebral_mcv")) mcv(j["cerebral_mcv"], &c->cerebral_mcv);
  c->mask_fill_hu = j.value("mask_fill_hu", c->mask_fill_hu);
  c->rng_seed = j.value("rng_seed", c->rng_seed);
  c->jobs = j.value("jobs", c->jobs);
}

}  // namespace

void SeedSpec::validate(const TemplateSpace& tmpl) const {
  if (cerebral_seeds.size() != 3)
    throw InvalidInput("seed spec: expected exactly 3 cerebral seeds, got " +
                       std::to_string(cerebral_seeds.size()));
  const LabelVolume interior = fill_interior(tmpl.head_mask);

  auto check_inside = [&](const SeedSphere& s, const char* name) {
    const LabelVolume sphere = seed_sphere_mask(tmpl.geometry, s);
    std::int64_t outside = 0, total = 0;
    for (std::int64_t v = 0; v < sphere.size(); ++v) {
      if (sphere[v] == 0) continue;
      ++total;
      outside += interior[v] == 0;
    }
    if (total == 0 || outside > 0)
      throw InvalidInput(std::string("seed spec: ") + name +
                         " seed does not lie inside the template head mask");
  };
  check_inside(ventricle_seed, "ventricle");
  for (const auto& s : cerebral_seeds) check_inside(s, "cerebral");

  for (const auto& s : cerebral_seeds) {
    const double gap = (s.center_mm - ventricle_seed.center_mm).norm();
    if (gap <= s.radius_mm + ventricle_seed.radius_mm)
      throw InvalidInput("seed spec: ventricle seed overlaps a cerebral seed");
  }
}

SeedSpec load_seed_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open seed spec: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad seed spec " + path.string() + ": " + e.what());
  }
  auto sphere = [](const nlohmann::json& sj) {
    SeedSphere s;
    const auto c = sj.at("center_mm").get<std::vector<double>>();
    if (c.size() != 3) throw IoError("seed spec: center_mm needs 3 components");
    s.center_mm = {c[0], c[1], c[2]};
    s.radius_mm = sj.at("radius_mm").get<double>();
    return s;
  };
  SeedSpec spec;
  spec.ventricle_seed = sphere(j.at("ventricle_seed"));
  spec.cerebral_seeds.clear();
  for (const auto& sj : j.at("cerebral_seeds")) spec.cerebral_seeds.push_back(sphere(sj));
  return spec;
}

void save_seed_spec(const SeedSpec& seeds, const std::filesystem::path& path) {
  auto sphere = [](const SeedSphere& s) {
    return nlohmann::json{{"center_mm", {s.center_mm.x(), s.center_mm.y(), s.center_mm.z()}},
                          {"radius_mm", s.radius_mm}};
  };
  nlohmann::json j;
  j["ventricle_seed"] = sphere(seeds.ventricle_seed);
  j["cerebral_seeds"] = nlohmann::json::array();
  for (const auto& s : seeds.cerebral_seeds) j["cerebral_seeds"].push_back(sphere(s));
  std::ofstream out(path);
  if (!out) throw IoError("cannot write seed spec: " + path.string());
  out << j.dump(2) << '\n';
}

std::string PipelineConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(config_to_json(*this).dump())));
  return buf;
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open pipeline config: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad pipeline config " + path.string() + ": " + e.what());
  }
  PipelineConfig c;
  config_from_json(j, &c);
  return c;
}

void save_pipeline_config(const PipelineConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write pipeline config: " + path.string());
  out << config_to_json(config).dump(2) << '\n';
}

void save_report_json(const VolumeReport& report, const std::filesystem::path& path) {
  nlohmann::json j;
  j["subject_id"] = report.subject_id;
  j["ventricle_ml"] = report.ventricle_ml;
  j["subarachnoid_ml"] = report.subarachnoid_ml;
  j["cerebral_ml"] = report.cerebral_ml;
  j["total_ml"] = report.total_ml;
  j["provenance"] = {{"transform_file", report.transform_file},
                     {"model_version", report.model_version},
                     {"parameter_hash", report.parameter_hash}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report: " + path.string());
  out << j.dump(2) << '\n';
}

VolumeReport load_report_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open report: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad report " + path.string() + ": " + e.what());
  }
  VolumeReport r;
  r.subject_id = j.at("subject_id").get<std::string>();
  r.ventricle_ml = j.at("ventricle_ml").get<double>();
  r.subarachnoid_ml = j.at("subarachnoid_ml").get<double>();
  r.cerebral_ml = j.at("cerebral_ml").get<double>();
  r.total_ml = j.at("total_ml").get<double>();
  if (j.contains("provenance")) {
    r.transform_file = j["provenance"].value("transform_file", "");
    r.model_version = j["provenance"].value("model_version", "");
    r.parameter_hash = j["provenance"].value("parameter_hash", "");
  }
  return r;
}

LabelVolume seed_sphere_mask(const GridGeometry& geometry, const SeedSphere& seed) {
  auto mask = LabelVolume::zeros(geometry);
  const auto& d = geometry.dims;
  const Eigen::Matrix4d& pose = geometry.pose.matrix();
  const double r2 = seed.radius_mm * seed.radius_mm;
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        const Eigen::Vector3d w = (pose * Eigen::Vector4d(i, j, k, 1)).head<3>();
        if ((w - seed.center_mm).squaredNorm() <= r2) mask.at(i, j, k) = 1;
      }
  return mask;
}

ScalarVolume masked_volume(const ScalarVolume& image, const LabelVolume& keep, double fill_hu) {
  if (!keep.geometry().same_grid(image.geometry()))
    throw InvalidInput("masked_volume: geometry mismatch");
  ScalarVolume out = image;
  for (std::int64_t v = 0; v < out.size(); ++v)
    if (keep[v] == 0) out[v] = float(fill_hu);
  return out;
}

LabelVolume label_subarachnoid(const LabelVolume& tissue_labels, const LabelVolume& ventricle_mask) {
  if (!tissue_labels.geometry().same_grid(ventricle_mask.geometry()))
    throw InvalidInput("label_subarachnoid: geometry mismatch");
  auto out = LabelVolume::zeros(tissue_labels.geometry());
  for (std::int64_t v = 0; v < out.size(); ++v)
    out[v] = (tissue_labels[v] == std::uint8_t(TissueClass::Csf) && ventricle_mask[v] == 0) ? 1 : 0;
  return out;
}

double compute_volume_ml(const LabelVolume& mask) {
  return double(count_nonzero(mask)) * mask.geometry().voxel_volume_mm3() / 1000.0;
}

TemplateSegmentation segment_in_template_space(const ScalarVolume& denoised,
                                               const LabelVolume& tissue, const SeedSpec& seeds,
                                               const PipelineConfig& config) {
  const LabelVolume csf_mask = mask_of_label(tissue, std::uint8_t(TissueClass::Csf));
  const LabelVolume mass_mask = mask_of_label(tissue, std::uint8_t(TissueClass::CerebralMass));

  // ventricle: grow inside the masked CSF volume; fluid unconnected to the
  // seed (the subarachnoid space) stays unreachable
  TemplateSegmentation out;
  {
    LabelVolume seed = seed_sphere_mask(denoised.geometry(), seeds.ventricle_seed);
    for (std::int64_t v = 0; v < seed.size(); ++v) seed[v] = seed[v] && csf_mask[v];
    if (count_nonzero(seed) == 0)
      throw DegenerateContour("ventricle seed does not intersect the CSF tissue mask");
    EvolvingMask em;
    em.u = std::move(seed);
    LabelVolume grown =
        mcv_evolve(masked_volume(denoised, csf_mask, config.mask_fill_hu), em, config.ventricle_mcv);
    for (std::int64_t v = 0; v < grown.size(); ++v) grown[v] = grown[v] && csf_mask[v];
    out.ventricle = std::move(grown);
  }

  // cerebral mass: same mechanism over the mass-class masked volume
  {
    LabelVolume seed = LabelVolume::zeros(denoised.geometry());
    for (const auto& s : seeds.cerebral_seeds) {
      const LabelVolume sphere = seed_sphere_mask(denoised.geometry(), s);
      for (std::int64_t v = 0; v < seed.size(); ++v) seed[v] = seed[v] || (sphere[v] && mass_mask[v]);
    }
    if (count_nonzero(seed) == 0)
      throw DegenerateContour("cerebral seeds do not intersect the mass tissue mask");
    EvolvingMask em;
    em.u = std::move(seed);
    LabelVolume grown =
        mcv_evolve(masked_volume(denoised, mass_mask, config.mask_fill_hu), em, config.cerebral_mcv);
    for (std::int64_t v = 0; v < grown.size(); ++v) grown[v] = grown[v] && mass_mask[v];
    out.cerebral = std::move(grown);
  }

  out.subarachnoid = label_subarachnoid(tissue, out.ventricle);

  // compose; precedence Ventricle > Subarachnoid > CerebralMass > Skull
  out.seg = LabelVolume::zeros(denoised.geometry());
  for (std::int64_t v = 0; v < out.seg.size(); ++v) {
    if (out.ventricle[v])
      out.seg[v] = std::uint8_t(SegLabel::Ventricle);
    else if (out.subarachnoid[v])
      out.seg[v] = std::uint8_t(SegLabel::Subarachnoid);
    else if (out.cerebral[v])
      out.seg[v] = std::uint8_t(SegLabel::CerebralMass);
    else if (tissue[v] == std::uint8_t(TissueClass::Skull))
      out.seg[v] = std::uint8_t(SegLabel::Skull);
  }
  return out;
}

SegmentationResult segment_subject(const ScalarVolume& scan, const TemplateSpace& tmpl,
                                   const RandomForest& tissue_model, const SeedSpec& seeds,
                                   const PipelineConfig& config, const std::string& subject_id) {
  run_stage(subject_id, "seed-spec", [&] {
    seeds.validate(tmpl);
    return 0;
  });

  const LabelVolume skull = run_stage(subject_id, "skull-extraction",
                                      [&] { return extract_skull(scan, config.skull); });

  SegmentationResult result;
  result.transform = run_stage(subject_id, "registration", [&] {
    return estimate_affine(skull, tmpl, config.registration, config.rng_seed);
  });
  result.registration_dice = mask_overlap_dice(skull, tmpl, result.transform);

  result.template_scan = run_stage(subject_id, "denoising", [&] {
    return nlm_denoise(to_template(scan, result.transform, tmpl, Interp::Trilinear), config.denoise);
  });

  const LabelVolume tissue = run_stage(subject_id, "tissue-classification", [&] {
    return predict_voxelwise(tissue_model, extract_features(result.template_scan, config.features));
  });

  const TemplateSegmentation tseg = run_stage(subject_id, "contour-evolution", [&] {
    return segment_in_template_space(result.template_scan, tissue, seeds, config);
  });
  result.template_labels = tseg.seg;

  result.labels = run_stage(subject_id, "to-patient", [&] {
    return to_patient(tseg.seg, result.transform, scan.geometry());
  });

  // patient-space volumetry; the total is the compartment sum by definition
  VolumeReport report;
  report.subject_id = subject_id;
  report.ventricle_ml =
      compute_volume_ml(mask_of_label(result.labels, std::uint8_t(SegLabel::Ventricle)));
  report.subarachnoid_ml =
      compute_volume_ml(mask_of_label(result.labels, std::uint8_t(SegLabel::Subarachnoid)));
  report.cerebral_ml =
      compute_volume_ml(mask_of_label(result.labels, std::uint8_t(SegLabel::CerebralMass)));
  report.total_ml = report.ventricle_ml + report.subarachnoid_ml + report.cerebral_ml;
  report.model_version = "nph-forest-v1";
  report.parameter_hash = config.hash();
  result.report = std::move(report);
  return result;
}

}  // namespace nph
