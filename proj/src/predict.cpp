#include "nph/predict.hpp"

#include "nph/errors.hpp"
#include "nph/parallel.hpp"
#include "nph/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace nph {

Diagnosis evans_threshold(double evans_ratio) {
  if (!(evans_ratio > 0.0 && evans_ratio < 1.0))
    throw InvalidInput("evans_threshold: ratio " + std::to_string(evans_ratio) +
                       " outside (0,1)");
  return evans_ratio >= 0.3 ? Diagnosis::Nph : Diagnosis::NonNph;
}

void CvPlan::validate() const {
  if (n_repeats < 1) throw InvalidInput("CvPlan: n_repeats must be >= 1");
  if (split_train < 1 || split_test < 1) throw InvalidInput("CvPlan: split proportions must be >= 1");
}

ScorePair confusion_scores(const std::vector<Diagnosis>& predicted,
                           const std::vector<Diagnosis>& actual) {
  if (predicted.size() != actual.size()) throw InvalidInput("confusion_scores: size mismatch");
  std::int64_t tp = 0, fn = 0, tn = 0, fp = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (actual[i] == Diagnosis::Nph)
      predicted[i] == Diagnosis::Nph ? ++tp : ++fn;
    else
      predicted[i] == Diagnosis::NonNph ? ++tn : ++fp;
  }
  ScorePair s;
  s.sensitivity = tp + fn > 0 ? double(tp) / double(tp + fn) : 0.0;
  s.specificity = tn + fp > 0 ? double(tn) / double(tn + fp) : 0.0;
  return s;
}

ScorePair evans_all_data(const std::vector<SubjectRecord>& records, double cutoff) {
  std::vector<Diagnosis> pred, actual;
  for (const auto& r : records) {
    if (!r.label) continue;
    if (!r.evans_ratio)
      throw InvalidInput("evans baseline: subject " + r.subject_id + " has no evans_ratio");
    pred.push_back(*r.evans_ratio >= cutoff ? Diagnosis::Nph : Diagnosis::NonNph);
    actual.push_back(*r.label);
  }
  if (pred.empty()) throw InvalidInput("evans baseline: no labeled records");
  return confusion_scores(pred, actual);
}

namespace {

using Fold = StratifiedFold;

// Stratified draw at split_test/(split_train+split_test) proportions,
// largest-remainder per class (preserves proportions within one subject).
Fold draw_fold(const std::vector<std::size_t>& pos, const std::vector<std::size_t>& neg,
               const CvPlan& plan, Rng& rng) {
  const double frac = double(plan.split_test) / double(plan.split_train + plan.split_test);
  const std::size_t total = pos.size() + neg.size();
  const std::size_t want_total = std::size_t(std::llround(double(total) * frac));

  const double qp = double(pos.size()) * frac;
  const double qn = double(neg.size()) * frac;
  std::size_t tp = std::size_t(qp);
  std::size_t tn = std::size_t(qn);
  while (tp + tn < want_total) ((qp - double(tp)) >= (qn - double(tn))) ? ++tp : ++tn;
  while (tp + tn > want_total) ((double(tp) - qp) >= (double(tn) - qn)) ? --tp : --tn;

  auto pick = [&](const std::vector<std::size_t>& pool, std::size_t k, Fold& fold) {
    std::vector<std::size_t> shuffled = pool;
    rng.shuffle(shuffled);
    for (std::size_t i = 0; i < shuffled.size(); ++i)
      (i < k ? fold.test : fold.train).push_back(shuffled[i]);
  };
  Fold fold;
  pick(pos, tp, fold);
  pick(neg, tn, fold);
  return fold;
}

bool fold_has_both_classes(const Fold& fold, const std::vector<SubjectRecord>& records) {
  auto both = [&](const std::vector<std::size_t>& part) {
    bool p = false, n = false;
    for (auto i : part) {
      if (*records[i].label == Diagnosis::Nph)
        p = true;
      else
        n = true;
    }
    return p && n;
  };
  return both(fold.train) && both(fold.test);
}

// classifier facade: train on the fold, predict any record
struct FittedClassifier {
  ClassifierKind kind;
  SvmModel svm;
  RandomForest rf;
  double evans_cutoff = 0.3;

  Diagnosis predict(const SubjectRecord& r) const {
    switch (kind) {
      case ClassifierKind::Svm:
        return svm.predict(r.features()) > 0 ? Diagnosis::Nph : Diagnosis::NonNph;
      case ClassifierKind::Rf: {
        Eigen::Vector4d f = r.features();
        return rf.predict(f.data()) == 1 ? Diagnosis::Nph : Diagnosis::NonNph;
      }
      case ClassifierKind::Evans:
        if (!r.evans_ratio)
          throw InvalidInput("evans classifier: subject " + r.subject_id + " has no evans_ratio");
        return *r.evans_ratio >= evans_cutoff ? Diagnosis::Nph : Diagnosis::NonNph;
    }
    return Diagnosis::NonNph;
  }
};

FittedClassifier fit(const std::vector<SubjectRecord>& records, const std::vector<std::size_t>& train,
                     const ClassifierSpec& spec, std::uint64_t seed) {
  FittedClassifier fc;
  fc.kind = spec.kind;
  fc.evans_cutoff = spec.evans_cutoff;
  if (spec.kind == ClassifierKind::Evans) return fc;

  Eigen::MatrixXd X(Eigen::Index(train.size()), 4);
  std::vector<int> y_svm, y_rf;
  for (std::size_t i = 0; i < train.size(); ++i) {
    X.row(Eigen::Index(i)) = records[train[i]].features().transpose();
    const bool nph = *records[train[i]].label == Diagnosis::Nph;
    y_svm.push_back(nph ? +1 : -1);
    y_rf.push_back(nph ? 1 : 0);
  }
  if (spec.kind == ClassifierKind::Svm)
    fc.svm = train_svm(X, y_svm, spec.svm, seed);
  else
    fc.rf = RandomForest::train(X, y_rf, 2, spec.rf, seed);
  return fc;
}

ScorePair score_part(const FittedClassifier& fc, const std::vector<SubjectRecord>& records,
                     const std::vector<std::size_t>& part) {
  std::vector<Diagnosis> pred, actual;
  pred.reserve(part.size());
  for (auto i : part) {
    pred.push_back(fc.predict(records[i]));
    actual.push_back(*records[i].label);
  }
  return confusion_scores(pred, actual);
}

void split_classes(const std::vector<SubjectRecord>& records, std::vector<std::size_t>* pos,
                   std::vector<std::size_t>* neg) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].label)
      throw InvalidInput("run_cv: subject " + records[i].subject_id + " has no label");
    (*records[i].label == Diagnosis::Nph ? pos : neg)->push_back(i);
  }
  if (pos->size() < 2 || neg->size() < 2)
    throw InvalidInput("run_cv: need at least 2 subjects per class");
}

Fold draw_valid_fold(const std::vector<SubjectRecord>& records, const std::vector<std::size_t>& pos,
                     const std::vector<std::size_t>& neg, const CvPlan& plan, Rng& rng,
                     int* redraws) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    Fold fold = draw_fold(pos, neg, plan, rng);
    if (fold_has_both_classes(fold, records)) return fold;
    ++*redraws;  // redrawn, never silently skipped
  }
  throw InvalidInput("run_cv: could not draw a fold with both classes on each side");
}

}  // namespace

StratifiedFold draw_stratified_fold(const std::vector<SubjectRecord>& records, const CvPlan& plan,
                                    Rng& rng) {
  plan.validate();
  std::vector<std::size_t> pos, neg;
  split_classes(records, &pos, &neg);
  return draw_fold(pos, neg, plan, rng);
}

MetricsSummary run_cv(const std::vector<SubjectRecord>& records, const ClassifierSpec& spec,
                      const CvPlan& plan) {
  plan.validate();
  std::vector<std::size_t> pos, neg;
  split_classes(records, &pos, &neg);

  MetricsSummary out;
  out.repeats.resize(std::size_t(plan.n_repeats));
  std::vector<int> redraws(std::size_t(plan.n_repeats), 0);
  std::vector<std::exception_ptr> failures(std::size_t(plan.n_repeats));

  parallel_chunks(0, plan.n_repeats, [&](std::int64_t r0, std::int64_t r1) {
    for (std::int64_t r = r0; r < r1; ++r) {
      try {
        Rng rng = Rng::stream(plan.rng_seed, std::uint64_t(r));
        Fold fold = draw_valid_fold(records, pos, neg, plan, rng, &redraws[std::size_t(r)]);
        const std::uint64_t model_seed = rng.next_u64();
        const FittedClassifier fc = fit(records, fold.train, spec, model_seed);
        out.repeats[std::size_t(r)].train = score_part(fc, records, fold.train);
        out.repeats[std::size_t(r)].test = score_part(fc, records, fold.test);
      } catch (...) {
        failures[std::size_t(r)] = std::current_exception();
      }
    }
  });
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  for (int r : redraws) out.redraws += r;

  auto summarize = [&](auto getter, ScorePair* mean, ScorePair* stdev) {
    double ms = 0, mp = 0;
    for (const auto& rep : out.repeats) {
      ms += getter(rep).sensitivity;
      mp += getter(rep).specificity;
    }
    const double n = double(out.repeats.size());
    mean->sensitivity = ms / n;
    mean->specificity = mp / n;
    double vs = 0, vp = 0;
    for (const auto& rep : out.repeats) {
      vs += std::pow(getter(rep).sensitivity - mean->sensitivity, 2);
      vp += std::pow(getter(rep).specificity - mean->specificity, 2);
    }
    // population std over repeats
    stdev->sensitivity = std::sqrt(vs / n);
    stdev->specificity = std::sqrt(vp / n);
  };
  summarize([](const RepeatScore& r) { return r.train; }, &out.train_mean, &out.train_std);
  summarize([](const RepeatScore& r) { return r.test; }, &out.test_mean, &out.test_std);
  return out;
}

ImportanceResult feature_importance(const std::vector<SubjectRecord>& records, const SvmParams& svm,
                                    const CvPlan& plan) {
  plan.validate();
  std::vector<std::size_t> pos, neg;
  split_classes(records, &pos, &neg);

  ImportanceResult out;
  out.feature_names = {"ventricle_ml", "subarachnoid_ml", "cerebral_ml", "total_ml"};
  out.drops.resize(plan.n_repeats, 4);

  ClassifierSpec spec;
  spec.kind = ClassifierKind::Svm;
  spec.svm = svm;

  std::vector<std::exception_ptr> failures(std::size_t(plan.n_repeats));
  parallel_chunks(0, plan.n_repeats, [&](std::int64_t r0, std::int64_t r1) {
    for (std::int64_t r = r0; r < r1; ++r) {
      try {
      Rng rng = Rng::stream(plan.rng_seed, std::uint64_t(r));
      int redraws = 0;
      Fold fold = draw_valid_fold(records, pos, neg, plan, rng, &redraws);
      const FittedClassifier fc = fit(records, fold.train, spec, rng.next_u64());

      auto balanced = [&](const std::vector<SubjectRecord>& subjects) {
        std::vector<Diagnosis> pred, actual;
        for (const auto& s : subjects) {
          pred.push_back(fc.predict(s));
          actual.push_back(*s.label);
        }
        const ScorePair s = confusion_scores(pred, actual);
        return 0.5 * (s.sensitivity + s.specificity);
      };

      std::vector<SubjectRecord> test_rows;
      for (auto i : fold.test) test_rows.push_back(records[i]);
      const double baseline = balanced(test_rows);

      for (int f = 0; f < 4; ++f) {
        // shuffle one raw feature column across the test subjects
        std::vector<double> column;
        for (const auto& s : test_rows) column.push_back(s.features()[f]);
        rng.shuffle(column);
        std::vector<SubjectRecord> shuffled = test_rows;
        for (std::size_t i = 0; i < shuffled.size(); ++i) {
          auto& s = shuffled[i];
          double v[4] = {s.ventricle_ml, s.subarachnoid_ml, s.cerebral_ml, s.total_ml};
          v[f] = column[i];
          s.ventricle_ml = v[0];
          s.subarachnoid_ml = v[1];
          s.cerebral_ml = v[2];
          s.total_ml = v[3];
        }
        out.drops(r, f) = baseline - balanced(shuffled);
      }
      } catch (...) {
        failures[std::size_t(r)] = std::current_exception();
      }
    }
  });
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);
  return out;
}

namespace {

nlohmann::json score_json(const ScorePair& mean, const ScorePair& stdev) {
  return {{"sensitivity", {{"mean", mean.sensitivity}, {"std", stdev.sensitivity}}},
          {"specificity", {{"mean", mean.specificity}, {"std", stdev.specificity}}}};
}

}  // namespace

void save_metrics_json(const MetricsSummary& metrics, const std::string& classifier_name,
                       const std::filesystem::path& path) {
  nlohmann::json j;
  j["classifier"] = classifier_name;
  j["n_repeats"] = metrics.repeats.size();
  j["redraws"] = metrics.redraws;
  j["train"] = score_json(metrics.train_mean, metrics.train_std);
  j["test"] = score_json(metrics.test_mean, metrics.test_std);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write metrics JSON: " + path.string());
  out << j.dump(2) << '\n';
}

void save_repeat_scores_csv(const MetricsSummary& metrics, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write repeat scores CSV: " + path.string());
  out << "repeat,train_sensitivity,train_specificity,test_sensitivity,test_specificity\n";
  out.precision(10);
  for (std::size_t r = 0; r < metrics.repeats.size(); ++r) {
    const auto& s = metrics.repeats[r];
    out << r << ',' << s.train.sensitivity << ',' << s.train.specificity << ','
        << s.test.sensitivity << ',' << s.test.specificity << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace nph
