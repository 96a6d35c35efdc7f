#include "nph/errors.hpp"
#include "nph/manifest.hpp"
#include "nph/nifti.hpp"
#include "nph/phantom.hpp"
#include "nph/pipeline.hpp"
#include "nph/png_io.hpp"
#include "nph/predict.hpp"
#include "nph/tissue.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdio>
#include <iostream>
#include <thread>

using namespace nph;

namespace {

// exit codes: 0 ok, 2 registration failure, 3 degenerate input/contour,
// 4 I/O, 1 anything else
constexpr int kExitRegistration = 2;
constexpr int kExitDegenerate = 3;
constexpr int kExitIo = 4;

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

// move the finished file into place only when fully written
template <typename WriteFn>
void write_atomic(const std::filesystem::path& final_path, WriteFn&& fn) {
  const std::filesystem::path tmp = final_path.string() + ".tmp";
  fn(tmp);
  std::filesystem::rename(tmp, final_path);
}

struct CommonArgs {
  std::string config_path;
  double skull_hu = -1.0;
  double nlm_h = -1.0;
  int nlm_patch = -1;
  int nlm_search = -1;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool manifest_only = false;
};

PipelineConfig effective_config(const CommonArgs& a) {
  PipelineConfig config;
  if (!a.config_path.empty()) config = load_pipeline_config(a.config_path);
  // flags override the config file
  if (a.skull_hu >= 0.0) config.skull.min_hu = a.skull_hu;
  if (a.nlm_h >= 0.0) config.denoise.h = a.nlm_h;
  if (a.nlm_patch >= 0) config.denoise.patch_radius = a.nlm_patch;
  if (a.nlm_search >= 0) config.denoise.search_radius = a.nlm_search;
  if (a.seed_set) config.rng_seed = a.seed;
  return config;
}

void add_common_flags(CLI::App* cmd, CommonArgs* a) {
  cmd->add_option("--config", a->config_path, "pipeline config JSON");
  cmd->add_option("--skull-hu", a->skull_hu, "skull threshold in HU");
  cmd->add_option("--nlm-h", a->nlm_h, "NLM filtering strength in HU");
  cmd->add_option("--nlm-patch", a->nlm_patch, "NLM patch radius (voxels)");
  cmd->add_option("--nlm-search", a->nlm_search, "NLM search radius (voxels)");
  auto* seed_opt = cmd->add_option("--seed", a->seed, "RNG seed");
  seed_opt->each([a](const std::string&) { a->seed_set = true; });
  cmd->add_flag("--manifest-only", a->manifest_only,
                "write the run manifest and exit without computing");
}

int run_segment(const std::vector<std::string>& scans, const std::string& template_dir,
                const std::string& model_path, const std::string& out_dir, const CommonArgs& args,
                int jobs, bool overlays) {
  Timer timer;
  const PipelineConfig config = effective_config(args);
  std::filesystem::create_directories(out_dir);

  RunManifest manifest;
  manifest.command = "segment";
  manifest.config_hash = config.hash();
  manifest.inputs = scans;
  manifest.inputs.push_back(template_dir);
  manifest.inputs.push_back(model_path);
  manifest.rng_seeds = {config.rng_seed};

  if (args.manifest_only) {
    save_manifest(manifest, std::filesystem::path(out_dir) / "manifest.json");
    return 0;
  }

  const TemplateSpace tmpl = load_template_package(template_dir);
  const SeedSpec seeds = load_seed_spec(tmpl.seed_spec_path);
  const RandomForest model = RandomForest::load(model_path);

  struct Job {
    std::string scan_path;
    std::string subject_id;
    std::filesystem::path subject_dir;
  };
  std::vector<Job> todo;
  for (const auto& scan_path : scans) {
    Job job;
    job.scan_path = scan_path;
    std::string stem = std::filesystem::path(scan_path).filename().string();
    for (const char* suffix : {".nii.gz", ".nii"}) {
      if (stem.size() > std::strlen(suffix) &&
          stem.compare(stem.size() - std::strlen(suffix), std::string::npos, suffix) == 0)
        stem.resize(stem.size() - std::strlen(suffix));
    }
    job.subject_id = stem;
    job.subject_dir = scans.size() == 1 ? std::filesystem::path(out_dir)
                                        : std::filesystem::path(out_dir) / stem;
    todo.push_back(std::move(job));
  }

  std::vector<VolumeReport> reports(todo.size());
  std::vector<std::exception_ptr> errors(todo.size());

  const unsigned workers =
      std::max(1u, std::min<unsigned>(jobs > 0 ? unsigned(jobs) : 1u, unsigned(todo.size())));
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      const std::size_t idx = next.fetch_add(1);
      if (idx >= todo.size()) break;
      const Job& job = todo[idx];
      try {
        std::filesystem::create_directories(job.subject_dir);
        const ScalarVolume scan = load_volume(job.scan_path);
        SegmentationResult result =
            segment_subject(scan, tmpl, model, seeds, config, job.subject_id);

        write_atomic(job.subject_dir / "seg.nii.gz",
                     [&](const std::filesystem::path& p) { save_volume(result.labels, p); });
        save_transform(result.transform, job.subject_dir / "affine.txt");
        // relative sibling path keeps reports bitwise identical across runs
        result.report.transform_file = "affine.txt";
        write_atomic(job.subject_dir / "report.json", [&](const std::filesystem::path& p) {
          save_report_json(result.report, p);
        });
        if (overlays) {
          write_overlay_png(scan, result.labels, -1, job.subject_dir / "overlay_axial.png");
          write_overlay_png(result.template_scan, result.template_labels, -1,
                            job.subject_dir / "overlay_template_axial.png");
        }
        reports[idx] = result.report;
      } catch (...) {
        errors[idx] = std::current_exception();
      }
    }
  };
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  for (std::size_t i = 0; i < todo.size(); ++i)
    if (errors[i]) std::rethrow_exception(errors[i]);

  if (todo.size() > 1) {
    std::vector<SubjectRecord> rows;
    for (const auto& r : reports) {
      SubjectRecord rec;
      rec.subject_id = r.subject_id;
      rec.ventricle_ml = r.ventricle_ml;
      rec.subarachnoid_ml = r.subarachnoid_ml;
      rec.cerebral_ml = r.cerebral_ml;
      rec.total_ml = r.total_ml;
      rows.push_back(std::move(rec));
    }
    save_cohort_csv(rows, std::filesystem::path(out_dir) / "cohort.csv");
    manifest.outputs.push_back((std::filesystem::path(out_dir) / "cohort.csv").string());
  }
  for (const auto& job : todo) manifest.outputs.push_back((job.subject_dir / "report.json").string());
  manifest.wall_seconds = timer.seconds();
  save_manifest(manifest, std::filesystem::path(out_dir) / "manifest.json");

  for (const auto& r : reports)
    std::printf("%s: ventricle %.1f mL, subarachnoid %.1f mL, cerebral %.1f mL, total %.1f mL\n",
                r.subject_id.c_str(), r.ventricle_ml, r.subarachnoid_ml, r.cerebral_ml, r.total_ml);
  return 0;
}

int run_train_tissue(const std::string& scan_path, const std::string& annotations_path,
                     const std::string& out_path, const CommonArgs& args) {
  Timer timer;
  const PipelineConfig config = effective_config(args);

  RunManifest manifest;
  manifest.command = "train-tissue";
  manifest.config_hash = config.hash();
  manifest.inputs = {scan_path, annotations_path};
  manifest.outputs = {out_path};
  manifest.rng_seeds = {config.rng_seed};
  if (args.manifest_only) {
    save_manifest(manifest, out_path + ".manifest.json");
    return 0;
  }

  const ScalarVolume scan = load_volume(scan_path);
  const ScalarVolume denoised = nlm_denoise(scan, config.denoise);
  const FeatureVolume features = extract_features(denoised, config.features);
  const auto annotations = load_annotations_csv(annotations_path);
  const LabeledVoxelSet set = build_training_set(features, annotations);
  const RandomForest forest = train_tissue_forest(set, config.tissue_forest, config.rng_seed);

  // training accuracy report
  std::int64_t hits = 0;
  std::vector<double> row(std::size_t(features.n_features()));
  for (Eigen::Index i = 0; i < set.features.rows(); ++i) {
    for (int c = 0; c < features.n_features(); ++c) row[std::size_t(c)] = set.features(i, c);
    hits += forest.predict(row.data()) == set.labels[std::size_t(i)];
  }
  const double accuracy = double(hits) / double(set.features.rows());

  write_atomic(out_path, [&](const std::filesystem::path& p) { forest.save(p); });
  manifest.wall_seconds = timer.seconds();
  save_manifest(manifest, out_path + ".manifest.json");
  std::printf("trained %d trees on %lld voxels; training accuracy %.4f\n",
              config.tissue_forest.n_estimators, static_cast<long long>(set.features.rows()),
              accuracy);
  return 0;
}

int run_predict(const std::string& cohort_path, const std::string& classifier,
                const std::string& out_dir, const CommonArgs& args, int repeats) {
  Timer timer;
  const PipelineConfig config = effective_config(args);
  std::filesystem::create_directories(out_dir);

  ClassifierSpec spec;
  if (classifier == "svm")
    spec.kind = ClassifierKind::Svm;
  else if (classifier == "rf")
    spec.kind = ClassifierKind::Rf;
  else if (classifier == "evans")
    spec.kind = ClassifierKind::Evans;
  else
    throw InvalidInput("predict: classifier must be svm, rf, or evans");

  CvPlan plan;
  plan.n_repeats = repeats;
  plan.rng_seed = config.rng_seed;

  RunManifest manifest;
  manifest.command = "predict";
  manifest.config_hash = config.hash();
  manifest.inputs = {cohort_path};
  manifest.rng_seeds = {plan.rng_seed};
  if (args.manifest_only) {
    save_manifest(manifest, std::filesystem::path(out_dir) / "manifest.json");
    return 0;
  }

  const auto records = load_cohort_csv(cohort_path);
  const auto out = std::filesystem::path(out_dir);

  // the thresholding baseline is reported over all data (its reference
  // protocol); cross-validated scores follow when the cohort supports folds
  if (spec.kind == ClassifierKind::Evans) {
    const ScorePair all = evans_all_data(records, spec.evans_cutoff);
    std::printf("evans all-data protocol: sensitivity %.3f, specificity %.3f\n", all.sensitivity,
                all.specificity);
  }

  MetricsSummary metrics;
  bool have_cv = true;
  try {
    metrics = run_cv(records, spec, plan);
  } catch (const InvalidInput& e) {
    if (spec.kind != ClassifierKind::Evans) throw;
    have_cv = false;
    std::printf("cross-validation skipped: %s\n", e.what());
  }

  if (have_cv) {
    write_atomic(out / "metrics.json",
                 [&](const std::filesystem::path& p) { save_metrics_json(metrics, classifier, p); });
    save_repeat_scores_csv(metrics, out / "repeat_scores.csv");
    manifest.outputs = {(out / "metrics.json").string(), (out / "repeat_scores.csv").string()};
    std::printf("%s: test sensitivity %.3f +- %.3f, test specificity %.3f +- %.3f\n",
                classifier.c_str(), metrics.test_mean.sensitivity, metrics.test_std.sensitivity,
                metrics.test_mean.specificity, metrics.test_std.specificity);
  }
  if (spec.kind == ClassifierKind::Svm) {
    const ImportanceResult imp = feature_importance(records, spec.svm, plan);
    std::vector<std::string> names(imp.feature_names.begin(), imp.feature_names.end());
    write_boxplot_png(imp.drops, names, out / "feature_importance.png");
    manifest.outputs.push_back((out / "feature_importance.png").string());
  }
  manifest.wall_seconds = timer.seconds();
  save_manifest(manifest, out / "manifest.json");
  return 0;
}

int run_phantom(const std::string& spec_path, int count, const std::string& out_dir,
                const CommonArgs& args) {
  Timer timer;
  PhantomSpec spec;
  if (!spec_path.empty()) spec = load_phantom_spec(spec_path);
  std::filesystem::create_directories(out_dir);

  RunManifest manifest;
  manifest.command = "phantom";
  if (!spec_path.empty()) manifest.inputs = {spec_path};
  for (int i = 0; i < count; ++i) manifest.rng_seeds.push_back(args.seed + std::uint64_t(i));
  if (args.manifest_only) {
    save_manifest(manifest, std::filesystem::path(out_dir) / "manifest.json");
    return 0;
  }

  for (int i = 0; i < count; ++i) {
    const Phantom phantom = generate_phantom(spec, args.seed + std::uint64_t(i));
    char name[64];
    std::snprintf(name, sizeof(name), "phantom_%03d", i);
    const auto dir = std::filesystem::path(out_dir) / name;
    std::filesystem::create_directories(dir);
    save_volume(phantom.image, dir / "scan.nii.gz");
    save_volume(phantom.truth, dir / "truth.nii.gz");
    manifest.outputs.push_back((dir / "scan.nii.gz").string());
  }
  save_phantom_spec(spec, std::filesystem::path(out_dir) / "spec.json");
  manifest.wall_seconds = timer.seconds();
  save_manifest(manifest, std::filesystem::path(out_dir) / "manifest.json");
  std::printf("wrote %d phantoms to %s\n", count, out_dir.c_str());
  return 0;
}

int run_evaluate(const std::string& pred_dir, const std::string& truth_dir,
                 const std::string& out_csv) {
  Timer timer;
  RunManifest manifest;
  manifest.command = "evaluate";
  manifest.inputs = {pred_dir, truth_dir};
  manifest.outputs = {out_csv};

  std::vector<std::filesystem::path> pred_files;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(pred_dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (name.ends_with(".nii") || name.ends_with(".nii.gz")) pred_files.push_back(entry.path());
  }
  std::sort(pred_files.begin(), pred_files.end());
  if (pred_files.empty()) throw IoError("evaluate: no NIfTI files under " + pred_dir);

  std::ofstream out(out_csv);
  if (!out) throw IoError("cannot write " + out_csv);
  out << "file,class,dice,tp,fp,fn\n";
  out.precision(10);

  std::vector<double> vent_scores, mass_scores;
  for (const auto& pred_path : pred_files) {
    const auto rel = std::filesystem::relative(pred_path, pred_dir);
    const auto truth_path = std::filesystem::path(truth_dir) / rel;
    if (!std::filesystem::exists(truth_path))
      throw IoError("evaluate: no truth file for " + rel.string());
    const LabelVolume pred = load_label_volume(pred_path);
    const LabelVolume truth = load_label_volume(truth_path);
    if (!pred.geometry().same_grid(truth.geometry()))
      throw InvalidInput("evaluate: geometry mismatch between " + pred_path.string() + " and " +
                         truth_path.string());
    for (std::uint8_t id = 1; id < kSegLabelCount; ++id) {
      const DiceResult r = dice(pred, truth, id);
      out << rel.string() << ',' << int(id) << ',' << r.dice << ',' << r.tp << ',' << r.fp << ','
          << r.fn << '\n';
      if (id == std::uint8_t(SegLabel::Ventricle)) vent_scores.push_back(r.dice);
      if (id == std::uint8_t(SegLabel::CerebralMass)) mass_scores.push_back(r.dice);
    }
  }
  auto mean_std = [](const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m += x;
    m /= double(v.size());
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return std::pair<double, double>(m, std::sqrt(s / double(v.size())));
  };
  const auto [vm, vs] = mean_std(vent_scores);
  const auto [mm, ms] = mean_std(mass_scores);
  std::printf("%-18s %-22s %-22s\n", "Structure", "Dice mean", "Dice std");
  std::printf("%-18s %-22.4f %-22.4f\n", "Ventricle", vm, vs);
  std::printf("%-18s %-22.4f %-22.4f\n", "Cerebral Mass", mm, ms);

  manifest.wall_seconds = timer.seconds();
  save_manifest(manifest, out_csv + ".manifest.json");
  return 0;
}

int run_make_template(const std::string& spec_path, const std::string& out_dir) {
  PhantomSpec spec;
  if (!spec_path.empty()) spec = load_phantom_spec(spec_path);
  const TemplatePackage package = build_test_template(spec);
  write_template_package(package, out_dir);
  std::printf("wrote template package to %s\n", out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CT head segmentation and NPH screening toolkit"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  CommonArgs common;

  // segment
  auto* segment = app.add_subcommand("segment", "segment scans and report compartment volumes");
  std::vector<std::string> scan_paths;
  std::string template_dir, model_path, out_dir;
  int jobs = 1;
  bool overlays = true;
  segment->add_option("--scan", scan_paths, "input CT scan(s), NIfTI-1")->required();
  segment->add_option("--template", template_dir, "template package directory")->required();
  segment->add_option("--tissue-model", model_path, "tissue forest JSON")->required();
  segment->add_option("--out", out_dir, "output directory")->required();
  segment->add_option("--jobs", jobs, "concurrent subjects");
  segment->add_flag("!--no-overlays", overlays, "skip overlay PNG emission");
  add_common_flags(segment, &common);

  // train-tissue
  auto* train = app.add_subcommand("train-tissue", "train the voxel tissue forest");
  std::string train_scan, annotations, train_out;
  train->add_option("--scan", train_scan, "denoised template-space scan")->required();
  train->add_option("--annotations", annotations, "sparse annotations CSV (x,y,z,class_id)")
      ->required();
  train->add_option("--out", train_out, "output model JSON")->required();
  add_common_flags(train, &common);

  // predict
  auto* predict = app.add_subcommand("predict", "NPH prediction metrics over a cohort CSV");
  std::string cohort_path, classifier = "svm", predict_out;
  int repeats = 100;
  predict->add_option("--cohort", cohort_path, "cohort CSV")->required();
  predict->add_option("--classifier", classifier, "svm | rf | evans");
  predict->add_option("--out", predict_out, "output directory")->required();
  predict->add_option("--repeats", repeats, "cross-validation repeats");
  add_common_flags(predict, &common);

  // phantom
  auto* phantom = app.add_subcommand("phantom", "generate synthetic head phantoms");
  std::string phantom_spec, phantom_out;
  int phantom_count = 1;
  phantom->add_option("--spec", phantom_spec, "phantom spec JSON (defaults when omitted)");
  phantom->add_option("--n", phantom_count, "number of phantoms");
  phantom->add_option("--out", phantom_out, "output directory")->required();
  add_common_flags(phantom, &common);

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Dice table between prediction and truth dirs");
  std::string pred_dir, truth_dir, eval_out;
  evaluate->add_option("--pred", pred_dir, "predicted label maps directory")->required();
  evaluate->add_option("--truth", truth_dir, "ground truth directory")->required();
  evaluate->add_option("--out", eval_out, "output CSV")->required();

  // make-template
  auto* mk = app.add_subcommand("make-template", "build the synthetic test template package");
  std::string mk_spec, mk_out;
  mk->add_option("--spec", mk_spec, "phantom spec JSON for the canonical anatomy");
  mk->add_option("--out", mk_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (segment->parsed())
      return run_segment(scan_paths, template_dir, model_path, out_dir, common, jobs, overlays);
    if (train->parsed()) return run_train_tissue(train_scan, annotations, train_out, common);
    if (predict->parsed()) return run_predict(cohort_path, classifier, predict_out, common, repeats);
    if (phantom->parsed()) return run_phantom(phantom_spec, phantom_count, phantom_out, common);
    if (evaluate->parsed()) return run_evaluate(pred_dir, truth_dir, eval_out);
    if (mk->parsed()) return run_make_template(mk_spec, mk_out);
  } catch (const RegistrationFailure& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRegistration;
  } catch (const DegenerateContour& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitDegenerate;
  } catch (const InvalidInput& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitDegenerate;
  } catch (const IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
