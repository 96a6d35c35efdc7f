#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace nph {

/// exp(-gamma * |x - y|^2). Throws InvalidInput on dimension mismatch.
double rbf_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y, double gamma);

struct SvmParams {
  double C = 2.0;
  double gamma = 0.1;
  double tol = 1e-3;             // maximal KKT violation at convergence
  std::int64_t max_iters = 1000000;

  void validate() const;
};

/// Soft-margin RBF SVM state. Features are standardized internally with
/// statistics fitted on the training rows; support vectors are stored in
/// that standardized space.
class SvmModel {
public:
  /// Decision value sum(alpha_i y_i K(sv_i, x)) + b for a raw feature row.
  double decision_value(const Eigen::VectorXd& raw_features) const;

  /// Sign of the decision value; an exact zero counts as the positive class
  /// (a screening tool favors sensitivity).
  int predict(const Eigen::VectorXd& raw_features) const { return decision_value(raw_features) >= 0.0 ? +1 : -1; }

  /// Box constraints 0 <= alpha <= C and the equality constraint
  /// sum(alpha_i y_i) == 0 within 1e-6.
  void validate() const;

  const Eigen::MatrixXd& support_vectors() const { return support_vectors_; }
  const Eigen::VectorXd& alpha() const { return alpha_; }
  const Eigen::VectorXd& labels() const { return labels_; }
  double bias() const { return bias_; }
  double gamma() const { return gamma_; }
  double C() const { return C_; }
  const Eigen::VectorXd& feature_mean() const { return feature_mean_; }
  const Eigen::VectorXd& feature_std() const { return feature_std_; }

private:
  friend SvmModel train_svm(const Eigen::MatrixXd&, const std::vector<int>&, const SvmParams&,
                            std::uint64_t);
  Eigen::MatrixXd support_vectors_;  // standardized rows
  Eigen::VectorXd alpha_;            // dual coefficients, one per SV
  Eigen::VectorXd labels_;           // +1 / -1 per SV
  double bias_ = 0.0;
  double gamma_ = 0.1;
  double C_ = 2.0;
  Eigen::VectorXd feature_mean_;
  Eigen::VectorXd feature_std_;
};

/// Solves the soft-margin dual by SMO with maximal-violating-pair selection;
/// converges when every KKT violation is below params.tol. y holds +1 / -1.
/// The solver itself is deterministic; the seed is recorded in call sites'
/// provenance only. Throws InvalidInput when a class is missing and
/// SvmNonConvergence past the iteration cap.
SvmModel train_svm(const Eigen::MatrixXd& X, const std::vector<int>& y, const SvmParams& params,
                   std::uint64_t seed = 0);

}  // namespace nph
