#include "nph/svm.hpp"

#include "nph/errors.hpp"

#include <cmath>
#include <limits>

namespace nph {

double rbf_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double gamma) {
  if (x.size() != y.size()) throw InvalidInput("rbf_kernel: dimension mismatch");
  if (!(gamma > 0.0)) throw InvalidInput("rbf_kernel: gamma must be > 0");
  return std::exp(-gamma * (x - y).squaredNorm());
}

void SvmParams::validate() const {
  if (!(C > 0.0)) throw InvalidInput("SvmParams: C must be > 0");
  if (!(gamma > 0.0)) throw InvalidInput("SvmParams: gamma must be > 0");
  if (!(tol > 0.0)) throw InvalidInput("SvmParams: tol must be > 0");
}

double SvmModel::decision_value(const Eigen::VectorXd& raw_features) const {
  if (raw_features.size() != feature_mean_.size())
    throw InvalidInput("svm predict: feature dimension mismatch");
  const Eigen::VectorXd x =
      (raw_features - feature_mean_).cwiseQuotient(feature_std_);
  double f = bias_;
  for (Eigen::Index i = 0; i < support_vectors_.rows(); ++i) {
    const double k = std::exp(-gamma_ * (support_vectors_.row(i).transpose() - x).squaredNorm());
    f += alpha_[i] * labels_[i] * k;
  }
  return f;
}

void SvmModel::validate() const {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < alpha_.size(); ++i) {
    if (alpha_[i] < -1e-12 || alpha_[i] > C_ + 1e-12)
      throw InvalidInput("svm model: alpha outside [0, C]");
    sum += alpha_[i] * labels_[i];
  }
  if (std::abs(sum) > 1e-6) throw InvalidInput("svm model: sum(alpha_i y_i) != 0");
}

SvmModel train_svm(const Eigen::MatrixXd& X, const std::vector<int>& y, const SvmParams& params,
                   std::uint64_t /*seed*/) {
  params.validate();
  const Eigen::Index n = X.rows();
  if (n < 2 || int(y.size()) != n) throw InvalidInput("train_svm: bad training set");
  bool has_pos = false, has_neg = false;
  for (int label : y) {
    if (label == +1)
      has_pos = true;
    else if (label == -1)
      has_neg = true;
    else
      throw InvalidInput("train_svm: labels must be +1 or -1");
  }
  if (!has_pos || !has_neg) throw InvalidInput("train_svm: both classes must be present");

  // standardize on the training rows only
  Eigen::VectorXd mean = X.colwise().mean();
  Eigen::VectorXd stdev(X.cols());
  for (Eigen::Index c = 0; c < X.cols(); ++c) {
    const double var = (X.col(c).array() - mean[c]).square().mean();
    stdev[c] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  Eigen::MatrixXd Z = (X.rowwise() - mean.transpose()).array().rowwise() /
                      stdev.transpose().array();

  // full kernel cache; cohorts are small
  Eigen::MatrixXd K(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double k = std::exp(-params.gamma * (Z.row(i) - Z.row(j)).squaredNorm());
      K(i, j) = k;
      K(j, i) = k;
    }

  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad = Eigen::VectorXd::Constant(n, -1.0);  // grad of 1/2 aQa - e.a
  const double C = params.C;

  double violation = std::numeric_limits<double>::infinity();
  std::int64_t iter = 0;
  for (; iter < params.max_iters; ++iter) {
    // maximal violating pair over I_up / I_low
    int i_up = -1, j_low = -1;
    double m_up = -std::numeric_limits<double>::infinity();
    double m_low = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      const double yt = y[std::size_t(t)];
      const double v = -yt * grad[t];
      const bool in_up = (yt > 0 && alpha[t] < C) || (yt < 0 && alpha[t] > 0);
      const bool in_low = (yt > 0 && alpha[t] > 0) || (yt < 0 && alpha[t] < C);
      if (in_up && v > m_up) {
        m_up = v;
        i_up = int(t);
      }
      if (in_low && v < m_low) {
        m_low = v;
        j_low = int(t);
      }
    }
    violation = m_up - m_low;
    if (violation < params.tol) break;

    const int i = i_up, j = j_low;
    const double yi = y[std::size_t(i)], yj = y[std::size_t(j)];

    // move along the feasible direction alpha_i += yi*d, alpha_j -= yj*d
    double d_lo, d_hi;
    {
      const double lo_i = yi > 0 ? -alpha[i] : alpha[i] - C;
      const double hi_i = yi > 0 ? C - alpha[i] : alpha[i];
      const double lo_j = yj > 0 ? alpha[j] - C : -alpha[j];
      const double hi_j = yj > 0 ? alpha[j] : C - alpha[j];
      d_lo = std::max(lo_i, lo_j);
      d_hi = std::min(hi_i, hi_j);
    }
    const double eta = K(i, i) + K(j, j) - 2.0 * K(i, j);
    double d;
    if (eta > 1e-12) {
      d = -(yi * grad[i] - yj * grad[j]) / eta;
      d = std::min(std::max(d, d_lo), d_hi);
    } else {
      // flat direction: run to the bound that decreases the objective
      d = (yi * grad[i] - yj * grad[j]) < 0.0 ? d_hi : d_lo;
    }
    if (d == 0.0) break;  // numerically pinned

    const double delta_i = yi * d;
    const double delta_j = -yj * d;
    alpha[i] += delta_i;
    alpha[j] += delta_j;
    // clamp fp dust so the box invariant holds exactly
    alpha[i] = std::min(std::max(alpha[i], 0.0), C);
    alpha[j] = std::min(std::max(alpha[j], 0.0), C);

    for (Eigen::Index t = 0; t < n; ++t) {
      const double yt = y[std::size_t(t)];
      grad[t] += yt * (yi * K(t, i) * delta_i + yj * K(t, j) * delta_j);
    }
  }
  if (violation >= params.tol && iter >= params.max_iters)
    throw SvmNonConvergence("train_svm: SMO did not converge (residual violation " +
                                std::to_string(violation) + ")",
                            violation);

  // bias: average y_i - f_i over free support vectors; midpoint fallback.
  // f_i = y_i * (grad_i + 1), so y_i - f_i = -y_i * grad_i for unit labels.
  double b = 0.0;
  int free_count = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    if (alpha[t] > 1e-12 && alpha[t] < C - 1e-12) {
      b += -double(y[std::size_t(t)]) * grad[t];
      ++free_count;
    }
  }
  if (free_count > 0) {
    b /= double(free_count);
  } else {
    double m_up = -std::numeric_limits<double>::infinity();
    double m_low = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < n; ++t) {
      const double yt = y[std::size_t(t)];
      const double v = -yt * grad[t];
      const bool in_up = (yt > 0 && alpha[t] < C) || (yt < 0 && alpha[t] > 0);
      const bool in_low = (yt > 0 && alpha[t] > 0) || (yt < 0 && alpha[t] < C);
      if (in_up) m_up = std::max(m_up, v);
      if (in_low) m_low = std::min(m_low, v);
    }
    b = 0.5 * (m_up + m_low);
  }

  // keep the support vectors only
  std::vector<Eigen::Index> sv;
  for (Eigen::Index t = 0; t < n; ++t)
    if (alpha[t] > 1e-12) sv.push_back(t);

  SvmModel model;
  model.gamma_ = params.gamma;
  model.C_ = C;
  model.bias_ = b;
  model.feature_mean_ = mean;
  model.feature_std_ = stdev;
  model.support_vectors_.resize(Eigen::Index(sv.size()), X.cols());
  model.alpha_.resize(Eigen::Index(sv.size()));
  model.labels_.resize(Eigen::Index(sv.size()));
  for (std::size_t s = 0; s < sv.size(); ++s) {
    model.support_vectors_.row(Eigen::Index(s)) = Z.row(sv[s]);
    model.alpha_[Eigen::Index(s)] = alpha[sv[s]];
    model.labels_[Eigen::Index(s)] = double(y[std::size_t(sv[s])]);
  }
  model.validate();
  return model;
}

}  // namespace nph
