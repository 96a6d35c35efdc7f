// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Clinical-scale results are checked through phantom
// oracles, statistical cohort matching, and property suites.

#include "nph/active_contours.hpp"
#include "nph/errors.hpp"
#include "nph/morphology.hpp"
#include "nph/phantom.hpp"
#include "nph/pipeline.hpp"
#include "nph/predict.hpp"
#include "nph/preprocess.hpp"
#include "nph/random_forest.hpp"
#include "nph/records.hpp"
#include "nph/registration.hpp"
#include "nph/resample.hpp"
#include "nph/rng.hpp"
#include "nph/svm.hpp"
#include "nph/tissue.hpp"

#include "fixtures.hpp"
#include "qp_oracle.hpp"
#include "test_util.hpp"

#include <chrono>
#include <fstream>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace nph;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

struct Check {
  Outcome* outcome;
  std::ostringstream detail;

  ~Check() { outcome->detail = detail.str(); }

  void require(bool ok, const std::string& what) {
    if (!ok) outcome->pass = false;
    if (!detail.str().empty()) detail << "; ";
    detail << what << (ok ? "" : " [FAILED]");
  }
};

double elapsed_s(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- acceptance-scale fixtures (128^3 at 1.5 mm) --------------------------

PhantomSpec acceptance_spec() {
  PhantomSpec s;
  s.dims = {128, 128, 128};
  s.spacing = {1.5, 1.5, 1.5};
  return s;
}

struct Fixture {
  TemplatePackage tmpl;
  RandomForest tissue_model;
  PipelineConfig config;
  std::vector<Phantom> batch;  // criterion 1/2 phantoms, seeds 0-9
};

Fixture build_fixture() {
  Fixture f;
  f.tmpl = build_test_template(acceptance_spec());

  PhantomSpec train_spec = acceptance_spec();
  train_spec.noise_sigma_hu = 8.0;
  const Phantom train = generate_phantom(train_spec, 100);
  const ScalarVolume denoised = nlm_denoise(train.image, f.config.denoise);
  const FeatureVolume features = extract_features(denoised, f.config.features);
  const auto set = build_training_set(features, nph_test::sample_annotations(train.truth, 2500, 7));
  f.tissue_model = train_tissue_forest(set, f.config.tissue_forest, 0);

  PhantomSpec batch_spec = acceptance_spec();
  batch_spec.noise_sigma_hu = 8.0;
  batch_spec.jitter_rotation_deg = 4.0;
  batch_spec.jitter_translation_mm = 6.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed)
    f.batch.push_back(generate_phantom(batch_spec, seed));
  return f;
}

// ---- criteria --------------------------------------------------------------

std::vector<MethodComparison> g_proposed_rows;  // shared between criteria 1 and 2

Outcome criterion1(const Fixture& f) {
  Outcome o;
  Check c{&o};
  const auto t0 = std::chrono::steady_clock::now();
  g_proposed_rows = compare_methods(f.batch, {SegMethod::Proposed}, f.tmpl.space, f.tmpl.seeds,
                                    f.tissue_model, f.config);
  const double secs = elapsed_s(t0);
  const auto& row = g_proposed_rows[0];
  const double vent = row.mean(row.ventricle_dice);
  const double mass = row.mean(row.cerebral_dice);
  char buf[160];
  std::snprintf(buf, sizeof(buf), "ventricle Dice %.4f >= 0.85", vent);
  c.require(vent >= 0.85, buf);
  std::snprintf(buf, sizeof(buf), "cerebral Dice %.4f >= 0.90", mass);
  c.require(mass >= 0.90, buf);
  std::snprintf(buf, sizeof(buf), "10 phantoms in %.1f s < 300 s", secs);
  c.require(secs < 300.0, buf);
  c.require(row.failures == 0, "no failed runs");
  return o;
}

Outcome criterion2(const Fixture& f) {
  Outcome o;
  Check c{&o};
  const auto rows = compare_methods(f.batch, {SegMethod::RfOnly, SegMethod::Mgac, SegMethod::McvUnmasked},
                                    f.tmpl.space, f.tmpl.seeds, f.tissue_model, f.config);
  const auto& proposed = g_proposed_rows[0];
  const double p = proposed.mean(proposed.ventricle_dice);
  const double rf = rows[0].mean(rows[0].ventricle_dice);
  const double mgac = rows[1].mean(rows[1].ventricle_dice);
  const double mcv = rows[2].mean(rows[2].ventricle_dice);

  char buf[200];
  std::snprintf(buf, sizeof(buf), "proposed %.4f > rf-only %.4f + 0.05", p, rf);
  c.require(p >= rf + 0.05, buf);
  std::snprintf(buf, sizeof(buf), "rf-only %.4f > mgac %.4f + 0.05", rf, mgac);
  c.require(rf >= mgac + 0.05, buf);
  std::snprintf(buf, sizeof(buf), "rf-only %.4f > mcv-unmasked %.4f + 0.05", rf, mcv);
  c.require(rf >= mcv + 0.05, buf);
  return o;
}

Outcome criterion3(const Fixture& f) {
  Outcome o;
  Check c{&o};
  struct Case {
    const char* name;
    double vent, sub, mass;
    std::uint64_t seed;
  };
  const Case cases[] = {{"normal", 47.4, 101.6, 1214.6, 11}, {"NPH", 118.0, 85.2, 1210.2, 12}};
  for (const auto& cs : cases) {
    PhantomSpec spec = acceptance_spec();
    spec.ventricle_ml = cs.vent;
    spec.subarachnoid_ml = cs.sub;
    spec.cerebral_ml = cs.mass;
    spec.noise_sigma_hu = 8.0;
    spec.offset_rotation_deg = {3.0, -2.0, 4.0};
    spec.offset_translation_mm = {6.0, -4.0, 5.0};
    const Phantom phantom = generate_phantom(spec, cs.seed);
    const auto result =
        segment_subject(phantom.image, f.tmpl.space, f.tissue_model, f.tmpl.seeds, f.config, cs.name);
    char buf[200];
    std::snprintf(buf, sizeof(buf), "%s ventricle %.1f mL within 10%% of %.1f", cs.name,
                  result.report.ventricle_ml, cs.vent);
    c.require(std::abs(result.report.ventricle_ml - cs.vent) <= 0.10 * cs.vent, buf);
    std::snprintf(buf, sizeof(buf), "%s subarachnoid %.1f mL within 10%% of %.1f", cs.name,
                  result.report.subarachnoid_ml, cs.sub);
    c.require(std::abs(result.report.subarachnoid_ml - cs.sub) <= 0.10 * cs.sub, buf);
    std::snprintf(buf, sizeof(buf), "%s cerebral %.1f mL within 10%% of %.1f", cs.name,
                  result.report.cerebral_ml, cs.mass);
    c.require(std::abs(result.report.cerebral_ml - cs.mass) <= 0.10 * cs.mass, buf);
  }
  return o;
}

Outcome criterion4() {
  Outcome o;
  Check c{&o};
  const auto t0 = std::chrono::steady_clock::now();
  const auto records = synth_cohort(34, 27, 42);
  CvPlan plan;
  plan.n_repeats = 100;
  plan.rng_seed = 0;

  ClassifierSpec svm_spec;
  svm_spec.kind = ClassifierKind::Svm;  // C=2, gamma=0.1 defaults
  const MetricsSummary svm = run_cv(records, svm_spec, plan);

  ClassifierSpec rf_spec;
  rf_spec.kind = ClassifierKind::Rf;
  const MetricsSummary rf = run_cv(records, rf_spec, plan);
  const double secs = elapsed_s(t0);

  char buf[200];
  std::snprintf(buf, sizeof(buf), "SVM test sensitivity %.3f within 0.86 +- 0.10",
                svm.test_mean.sensitivity);
  c.require(std::abs(svm.test_mean.sensitivity - 0.86) <= 0.10, buf);
  std::snprintf(buf, sizeof(buf), "SVM test specificity %.3f within 0.85 +- 0.10",
                svm.test_mean.specificity);
  c.require(std::abs(svm.test_mean.specificity - 0.85) <= 0.10, buf);
  std::snprintf(buf, sizeof(buf), "RF test sensitivity %.3f within 0.86 +- 0.10",
                rf.test_mean.sensitivity);
  c.require(std::abs(rf.test_mean.sensitivity - 0.86) <= 0.10, buf);
  std::snprintf(buf, sizeof(buf), "RF test specificity %.3f within 0.84 +- 0.10",
                rf.test_mean.specificity);
  c.require(std::abs(rf.test_mean.specificity - 0.84) <= 0.10, buf);
  std::snprintf(buf, sizeof(buf), "2x100 repeats in %.1f s < 60 s", secs);
  c.require(secs < 60.0, buf);
  return o;
}

Outcome criterion5() {
  Outcome o;
  Check c{&o};
  // exact threshold rule on a hand-built CSV
  nph_test::TempDir tmp("acceptance_evans");
  {
    std::ofstream csv(tmp / "three.csv");
    csv << "subject_id,ventricle_ml,subarachnoid_ml,cerebral_ml,total_ml,label,evans_ratio\n";
    csv << "s1,50,100,1200,1350,non-NPH,0.29\n";
    csv << "s2,120,90,1200,1410,NPH,0.30\n";
    csv << "s3,130,80,1200,1410,NPH,0.35\n";
  }
  const auto rows = load_cohort_csv(tmp / "three.csv");
  c.require(evans_threshold(*rows[0].evans_ratio) == Diagnosis::NonNph, "0.29 -> non-NPH");
  c.require(evans_threshold(*rows[1].evans_ratio) == Diagnosis::Nph, "0.30 -> NPH");
  c.require(evans_threshold(*rows[2].evans_ratio) == Diagnosis::Nph, "0.35 -> NPH");

  // synthesized cohort: the evaluator must report the construction exactly
  auto records = synth_cohort(100, 40, 5);
  assign_evans_ratios(records, 0.75, 0.89, 3);
  const ScorePair s = evans_all_data(records);
  char buf[120];
  std::snprintf(buf, sizeof(buf), "sensitivity reported %.10f == 0.75", s.sensitivity);
  c.require(std::abs(s.sensitivity - 0.75) < 1e-12, buf);
  std::snprintf(buf, sizeof(buf), "specificity reported %.10f == 0.89", s.specificity);
  c.require(std::abs(s.specificity - 0.89) < 1e-12, buf);
  return o;
}

Outcome criterion6() {
  Outcome o;
  Check c{&o};

  // SVM against the dense-grid QP oracle on 4-point sets
  {
    Rng rng(11);
    double worst = 0.0;
    for (int trial = 0; trial < 4; ++trial) {
      Eigen::MatrixXd X(4, 2);
      X << rng.normal(0, 0.5), rng.normal(0, 0.5), rng.normal(0, 0.5), rng.normal(1.0, 0.5),
          rng.normal(3.0, 0.5), rng.normal(0, 0.5), rng.normal(3.0, 0.5), rng.normal(1.0, 0.5);
      std::vector<int> y{-1, -1, +1, +1};
      SvmParams p;
      p.C = 2.0;
      p.gamma = 0.5;
      const SvmModel model = train_svm(X, y, p);
      nph_test::GridQpOracle oracle;
      oracle.Z = nph_test::standardize(X);
      oracle.y = y;
      oracle.C = p.C;
      oracle.gamma = p.gamma;
      oracle.solve();
      for (int i = 0; i < 4; ++i)
        worst = std::max(worst, std::abs(model.decision_value(X.row(i)) -
                                         oracle.decision(oracle.Z.row(i).transpose())));
    }
    char buf[120];
    std::snprintf(buf, sizeof(buf), "SVM vs grid-QP decision gap %.2e < 1e-2", worst);
    c.require(worst < 1e-2, buf);
  }

  // RF leaf aggregation vs enumerated tree paths (2-tree toy)
  {
    std::vector<TreeNode> ta(3);
    ta[0] = {0, 10.0, 1, 2, {}};
    ta[1].histogram = Eigen::ArrayXd::Zero(4);
    ta[1].histogram << 8, 2, 0, 0;
    ta[2].histogram = Eigen::ArrayXd::Zero(4);
    ta[2].histogram << 0, 3, 1, 0;
    std::vector<TreeNode> tb(5);
    tb[0] = {1, 0.5, 1, 2, {}};
    tb[1].histogram = Eigen::ArrayXd::Zero(4);
    tb[1].histogram << 1, 0, 3, 0;
    tb[2] = {0, 20.0, 3, 4, {}};
    tb[3].histogram = Eigen::ArrayXd::Zero(4);
    tb[3].histogram << 0, 5, 0, 0;
    tb[4].histogram = Eigen::ArrayXd::Zero(4);
    tb[4].histogram << 0, 0, 0, 2;
    ForestParams fp;
    fp.n_estimators = 2;
    const auto forest =
        RandomForest::from_trees({DecisionTree(std::move(ta)), DecisionTree(std::move(tb))}, 4, 2, fp);
    const double probe[2] = {15.0, 0.2};
    // by hand: (0,3/4,1/4,0) + (1/4,0,3/4,0) averaged
    const Eigen::Vector4d expected(0.125, 0.375, 0.5, 0.0);
    const Eigen::ArrayXd got = forest.predict_proba(probe);
    c.require((got.matrix() - expected).norm() < 1e-12 && forest.predict(probe) == 2,
              "RF votes equal enumerated paths");
  }

  // region means vs direct summation
  {
    GridGeometry g = centered_geometry({16, 16, 16}, {1, 1, 1});
    Rng rng(5);
    auto img = ScalarVolume::zeros(g);
    auto mask = LabelVolume::zeros(g);
    for (std::int64_t i = 0; i < img.size(); ++i) {
      img[i] = float(rng.normal(30, 12));
      mask[i] = rng.uniform() < 0.3 ? 1 : 0;
    }
    double si = 0, so = 0;
    long ni = 0, no = 0;
    for (std::int64_t i = 0; i < img.size(); ++i)
      mask[i] ? (si += img[i], ++ni) : (so += img[i], ++no);
    const auto [c1, c2] = region_means(img, mask);
    c.require(std::abs(c1 - si / ni) < 1e-9 && std::abs(c2 - so / no) < 1e-9,
              "region means equal direct summation");
  }

  // dice vs set arithmetic
  {
    GridGeometry g = centered_geometry({12, 12, 12}, {1, 1, 1});
    auto a = LabelVolume::zeros(g);
    auto b = LabelVolume::zeros(g);
    Rng rng(31);
    std::set<std::int64_t> sa, sb;
    for (int t = 0; t < 300; ++t) {
      std::int64_t va = std::int64_t(rng.uniform_int(std::uint64_t(a.size())));
      std::int64_t vb = std::int64_t(rng.uniform_int(std::uint64_t(a.size())));
      a[va] = 1;
      b[vb] = 1;
      sa.insert(va);
      sb.insert(vb);
    }
    std::size_t inter = 0;
    for (auto v : sa) inter += sb.count(v);
    const double expected = 2.0 * double(inter) / double(sa.size() + sb.size());
    c.require(std::abs(dice(a, b, 1).dice - expected) < 1e-12, "dice equals set arithmetic");
  }

  // digitized sphere volume vs analytic
  {
    GridGeometry g = centered_geometry({48, 48, 48}, {1, 1, 1});
    auto m = LabelVolume::zeros(g);
    const double ctr = 0.5 * 47.0;
    for (int k = 0; k < 48; ++k)
      for (int j = 0; j < 48; ++j)
        for (int i = 0; i < 48; ++i)
          if ((i - ctr) * (i - ctr) + (j - ctr) * (j - ctr) + (k - ctr) * (k - ctr) <= 400.0)
            m.at(i, j, k) = 1;
    const double analytic = 4.0 / 3.0 * M_PI * 8.0;  // 20 mm sphere in mL
    const double measured = compute_volume_ml(m);
    char buf[120];
    std::snprintf(buf, sizeof(buf), "sphere volume %.2f mL within 2%% of %.2f", measured, analytic);
    c.require(std::abs(measured - analytic) <= 0.02 * analytic, buf);
  }
  return o;
}

Outcome criterion7(const Fixture& f) {
  Outcome o;
  Check c{&o};
  const TemplateSpace& tmpl = f.tmpl.space;

  // self-registration
  {
    const AffineTransform self = estimate_affine(tmpl.head_mask, tmpl, f.config.registration, 0);
    const double d = mask_overlap_dice(tmpl.head_mask, tmpl, self);
    char buf[120];
    std::snprintf(buf, sizeof(buf), "self-registration Dice %.4f >= 0.99", d);
    c.require(d >= 0.99, buf);
  }

  // known synthetic affines recovered within 1 mm / 1 degree
  const AffineTransform warps[] = {
      AffineTransform::translation({10.0, -6.0, 4.0}) *
          AffineTransform::rotation(0.0, 0.0, 8.0 * M_PI / 180.0) *
          AffineTransform::scaling({1.05, 1.05, 1.05}),
      AffineTransform::translation({-8.0, 5.0, -9.0}) *
          AffineTransform::rotation(5.0 * M_PI / 180.0, -4.0 * M_PI / 180.0, 0.0) *
          AffineTransform::scaling({0.97, 0.97, 0.97}),
  };
  int idx = 0;
  for (const auto& warp : warps) {
    const auto subject = resample(tmpl.head_mask, warp, tmpl.geometry, Interp::Nearest);
    const AffineTransform recovered = estimate_affine(subject, tmpl, f.config.registration, 0);
    const AffineTransform residual = recovered * warp;
    const double trans_err = residual.translation_part().norm();
    Eigen::JacobiSVD<Eigen::Matrix3d> svd(residual.linear(),
                                          Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
    if (r.determinant() < 0) {
      Eigen::Matrix3d flip = Eigen::Matrix3d::Identity();
      flip(2, 2) = -1;
      r = svd.matrixU() * flip * svd.matrixV().transpose();
    }
    const double angle_deg =
        std::acos(std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0)) * 180.0 / M_PI;
    char buf[160];
    std::snprintf(buf, sizeof(buf), "warp %d translation error %.3f mm < 1 mm", idx, trans_err);
    c.require(trans_err < 1.0, buf);
    std::snprintf(buf, sizeof(buf), "warp %d rotation error %.3f deg < 1 deg", idx, angle_deg);
    c.require(angle_deg < 1.0, buf);
    ++idx;
  }
  return o;
}

Outcome criterion8(const Fixture& f) {
  Outcome o;
  Check c{&o};

  // kernel PSD
  {
    Rng rng(5);
    Eigen::MatrixXd pts(5, 3);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 3; ++j) pts(i, j) = rng.normal(0, 2);
    Eigen::MatrixXd K(5, 5);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) K(i, j) = rbf_kernel(pts.row(i), pts.row(j), 0.3);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
    c.require(es.eigenvalues().minCoeff() >= -1e-9, "RBF kernel matrix PSD");
  }

  // SVM box and equality constraints
  {
    auto records = synth_cohort(20, 18, 3);
    Eigen::MatrixXd X(38, 4);
    std::vector<int> y;
    for (int i = 0; i < 38; ++i) {
      X.row(i) = records[std::size_t(i)].features().transpose();
      y.push_back(*records[std::size_t(i)].label == Diagnosis::Nph ? +1 : -1);
    }
    const SvmModel model = train_svm(X, y, {});
    bool box = true;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < model.alpha().size(); ++i) {
      box = box && model.alpha()[i] >= -1e-12 && model.alpha()[i] <= model.C() + 1e-12;
      sum += model.alpha()[i] * model.labels()[i];
    }
    char buf[120];
    std::snprintf(buf, sizeof(buf), "SVM box ok, |sum(alpha*y)| = %.2e <= 1e-6", std::abs(sum));
    c.require(box && std::abs(sum) <= 1e-6, buf);
  }

  // MCV fixed point and rescaling invariance
  {
    GridGeometry g = centered_geometry({28, 28, 28}, {1, 1, 1});
    auto truth = LabelVolume::zeros(g);
    const double ctr = 13.5;
    for (int k = 0; k < 28; ++k)
      for (int j = 0; j < 28; ++j)
        for (int i = 0; i < 28; ++i)
          if ((i - ctr) * (i - ctr) + (j - ctr) * (j - ctr) + (k - ctr) * (k - ctr) <= 81.0)
            truth.at(i, j, k) = 1;
    auto img = ScalarVolume::zeros(g);
    Rng rng(9);
    for (std::int64_t i = 0; i < img.size(); ++i)
      img[i] = float((truth[i] ? 10.0 : 40.0) + rng.normal(0, 3.0));

    auto noise_free = ScalarVolume::zeros(g);
    for (std::int64_t i = 0; i < noise_free.size(); ++i) noise_free[i] = truth[i] ? 10.0f : 40.0f;
    const auto stepped = chan_vese_data_step(noise_free, truth, nullptr, 1.0, 1.0);
    c.require((stepped.data() == truth.data()).all(), "two-level partition is a data-step fixed point");

    EvolvingMask seed;
    seed.u = LabelVolume::zeros(g);
    for (int k = 11; k <= 16; ++k)
      for (int j = 11; j <= 16; ++j)
        for (int i = 11; i <= 16; ++i) seed.u.at(i, j, k) = 1;
    auto rescaled = img;
    for (std::int64_t i = 0; i < img.size(); ++i) rescaled[i] = 2.5f * img[i] + 17.0f;
    const auto a = mcv_evolve(img, seed, {});
    const auto b = mcv_evolve(rescaled, seed, {});
    c.require((a.data() == b.data()).all(), "MCV invariant under affine intensity rescaling");
  }

  // resample identity and composition
  {
    auto phantom = generate_phantom(nph_test::unit_phantom_spec(), 2);
    const auto& g = phantom.truth.geometry();
    const auto ident = resample(phantom.truth, AffineTransform::identity(), g, Interp::Nearest);
    c.require((ident.data() == phantom.truth.data()).all(), "identity resample exact");

    const auto a = AffineTransform::rotation(0.015, 0.008, -0.012) *
                   AffineTransform::translation({3, 1, -2});
    const auto b = AffineTransform::rotation(-0.008, 0.018, 0.005) *
                   AffineTransform::translation({-1, 2, 2});
    const auto two = resample(resample(phantom.truth, a, g, Interp::Nearest), b, g, Interp::Nearest);
    const auto one = resample(phantom.truth, b * a, g, Interp::Nearest);
    const double dv = dice(two, one, std::uint8_t(SegLabel::Ventricle)).dice;
    const double dm = dice(two, one, std::uint8_t(SegLabel::CerebralMass)).dice;
    char buf[120];
    std::snprintf(buf, sizeof(buf), "composition Dice vent %.3f mass %.3f >= 0.95", dv, dm);
    c.require(dv >= 0.95 && dm >= 0.95, buf);
  }

  // gini properties
  {
    Rng rng(2);
    bool ok = true;
    for (int t = 0; t < 20; ++t) {
      Eigen::ArrayXd counts(4);
      for (int i = 0; i < 4; ++i) counts[i] = double(rng.uniform_int(20));
      if (!(counts.sum() > 0)) counts[0] = 1;
      Eigen::ArrayXd perm(4);
      perm << counts[3], counts[1], counts[0], counts[2];
      ok = ok && std::abs(gini(counts) - gini(perm)) < 1e-12;
      ok = ok && std::abs(gini(counts) - gini(Eigen::ArrayXd(counts * 7.0))) < 1e-12;
    }
    c.require(ok, "gini permutation and scaling invariance");
  }

  // pipeline determinism: bitwise repeat of a full phantom run
  {
    PhantomSpec spec = acceptance_spec();
    spec.noise_sigma_hu = 8.0;
    spec.offset_rotation_deg = {2.0, -1.0, 3.0};
    spec.offset_translation_mm = {4.0, 2.0, -3.0};
    const Phantom phantom = generate_phantom(spec, 33);
    const auto r1 =
        segment_subject(phantom.image, f.tmpl.space, f.tissue_model, f.tmpl.seeds, f.config, "det");
    const auto r2 =
        segment_subject(phantom.image, f.tmpl.space, f.tissue_model, f.tmpl.seeds, f.config, "det");
    const bool labels_equal = (r1.labels.data() == r2.labels.data()).all();
    const bool reports_equal = r1.report.ventricle_ml == r2.report.ventricle_ml &&
                               r1.report.subarachnoid_ml == r2.report.subarachnoid_ml &&
                               r1.report.cerebral_ml == r2.report.cerebral_ml &&
                               r1.report.total_ml == r2.report.total_ml &&
                               r1.report.parameter_hash == r2.report.parameter_hash;
    const bool transform_equal = r1.transform.matrix() == r2.transform.matrix();
    c.require(labels_equal && reports_equal && transform_equal,
              "full phantom run repeats bitwise");
  }
  return o;
}

}  // namespace

int main() {
  struct Entry {
    int id;
    const char* title;
    Outcome outcome;
  };
  std::vector<Entry> entries;

  std::printf("building acceptance fixtures (template, tissue model, 10-phantom batch)...\n");
  std::fflush(stdout);
  const Fixture fixture = build_fixture();

  auto run = [&](int id, const char* title, auto&& fn) {
    Entry e{id, title, {}};
    try {
      e.outcome = fn();
    } catch (const std::exception& ex) {
      e.outcome.pass = false;
      e.outcome.detail = std::string("exception: ") + ex.what();
    }
    std::printf("%s  criterion %d: %s — %s\n", e.outcome.pass ? "PASS" : "FAIL", id, title,
                e.outcome.detail.c_str());
    std::fflush(stdout);
    entries.push_back(std::move(e));
  };

  run(1, "phantom segmentation fidelity", [&] { return criterion1(fixture); });
  run(2, "method ordering", [&] { return criterion2(fixture); });
  run(3, "volume accuracy at cohort means", [&] { return criterion3(fixture); });
  run(4, "classifier metrics on a synthetic cohort", [] { return criterion4(); });
  run(5, "Evan's baseline exactness", [] { return criterion5(); });
  run(6, "oracle equivalence suites", [] { return criterion6(); });
  run(7, "registration recovery", [&] { return criterion7(fixture); });
  run(8, "invariant suites", [&] { return criterion8(fixture); });

  int failures = 0;
  for (const auto& e : entries) failures += e.outcome.pass ? 0 : 1;
  std::printf("%d/%zu criteria passed\n", int(entries.size()) - failures, entries.size());
  return failures == 0 ? 0 : 1;
}
