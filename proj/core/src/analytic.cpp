#include "delusive/analytic.hpp"

#include <cmath>
#include <stdexcept>

#include "delusive/numerics.hpp"

namespace delusive {

namespace {

bool is_robust_kind(ClassifierKind kind) {
  return kind == ClassifierKind::RobustDelusive1 || kind == ClassifierKind::RobustDelusive2;
}

void check_kind_domain(const GaussianMixtureSpec& spec, ClassifierKind kind) {
  validate(spec);
  if (is_robust_kind(kind) && !spec.eta_in_theorem_range())
    throw std::domain_error("robust closed-form classifiers need 0 < eta < 1/3");
}

}  // namespace

ClosedFormClassifier closed_form_classifier(const GaussianMixtureSpec& spec, ClassifierKind kind) {
  check_kind_domain(spec, kind);
  ClosedFormClassifier f;
  f.kind = kind;
  f.bias = 0.0;
  f.weights.assign(spec.d + 1, 0.0);
  double head = 1.0, tail = 0.0;
  switch (kind) {
    case ClassifierKind::BayesOriginal:
      tail = spec.eta;
      break;
    case ClassifierKind::BayesDelusive1:
      tail = -spec.eta;
      break;
    case ClassifierKind::BayesDelusive2:
      tail = 3.0 * spec.eta;
      break;
    case ClassifierKind::RobustDelusive1:
      tail = 0.0;
      break;
    case ClassifierKind::RobustDelusive2:
      head = 1.0 - 2.0 * spec.eta;
      tail = spec.eta;
      break;
  }
  f.weights[0] = head;
  for (std::size_t j = 1; j <= spec.d; ++j) f.weights[j] = tail;
  return f;
}

double phi_argument(const GaussianMixtureSpec& spec, ClassifierKind kind) {
  check_kind_domain(spec, kind);
  const double u = static_cast<double>(spec.d) * spec.eta * spec.eta;  // d*eta^2
  const double s = spec.sigma;
  switch (kind) {
    case ClassifierKind::BayesOriginal:
      return std::sqrt(1.0 + u) / s;
    case ClassifierKind::BayesDelusive1:
      return (1.0 - u) / (s * std::sqrt(1.0 + u));
    case ClassifierKind::BayesDelusive2:
      return (1.0 + 3.0 * u) / (s * std::sqrt(1.0 + 9.0 * u));
    case ClassifierKind::RobustDelusive1:
      return 1.0 / s;
    case ClassifierKind::RobustDelusive2: {
      const double a = 1.0 - 2.0 * spec.eta;
      return (a + u) / (s * std::sqrt(a * a + u));
    }
  }
  throw std::logic_error("unreachable classifier kind");
}

RiskReport natural_risk_closed_form(const GaussianMixtureSpec& spec, ClassifierKind kind) {
  RiskReport r;
  r.argument = phi_argument(spec, kind);
  r.natural_risk = 1.0 - std_normal_cdf(r.argument);
  return r;
}

double linear_risk_against_mean(std::span<const double> w, double b,
                                std::span<const double> mean, double sigma) {
  if (w.size() != mean.size()) throw std::domain_error("weight/mean length mismatch");
  if (!(sigma > 0.0)) throw std::domain_error("sigma must be positive");
  double dot = 0.0, sq = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    dot += w[j] * mean[j];
    sq += w[j] * w[j];
  }
  const double nrm = std::sqrt(sq);
  if (!(nrm > 0.0)) throw std::domain_error("weight vector must be nonzero");
  const double denom = sigma * nrm;
  return 0.5 * std_normal_cdf(-(dot + b) / denom) + 0.5 * std_normal_cdf(-(dot - b) / denom);
}

double natural_risk_linear(std::span<const double> w, double b, const GaussianMixtureSpec& spec) {
  validate(spec);
  const std::vector<double> mu = spec.mean();
  return linear_risk_against_mean(w, b, mu, spec.sigma);
}

double adversarial_risk_linear_exact(std::span<const double> w, double b,
                                     const GaussianMixtureSpec& spec, const ThreatBall& ball) {
  validate(spec);
  if (ball.norm != NormKind::Linf) throw std::domain_error("exact adversarial risk needs an Linf ball");
  if (ball.mask.has_value() || ball.clamp.has_value())
    throw std::domain_error("exact adversarial risk needs an unmasked, unclamped ball");
  if (!(ball.radius >= 0.0)) throw std::domain_error("ball radius must be nonnegative");
  std::vector<double> mu = spec.mean();
  if (w.size() != mu.size()) throw std::domain_error("weight/mean length mismatch");
  // Worst case per example shifts w.x by -radius*||w||_1, same for both
  // classes, i.e. the clean risk against the shifted mean mu - r*sign(w).
  const double l1 = norms(w).l1;
  double dot = 0.0, sq = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    dot += w[j] * mu[j];
    sq += w[j] * w[j];
  }
  const double nrm = std::sqrt(sq);
  if (!(nrm > 0.0)) throw std::domain_error("weight vector must be nonzero");
  const double shifted = dot - ball.radius * l1;
  const double denom = spec.sigma * nrm;
  return 0.5 * std_normal_cdf(-(shifted + b) / denom) + 0.5 * std_normal_cdf(-(shifted - b) / denom);
}

bool theorem1_check(const GaussianMixtureSpec& spec) {
  validate(spec);
  if (spec.d == 0) throw std::domain_error("theorem1_check needs d >= 1");
  // Larger argument = smaller risk; require R(f_D) < R(f_D2) < R(f_D1).
  const double a_d = phi_argument(spec, ClassifierKind::BayesOriginal);
  const double a_d1 = phi_argument(spec, ClassifierKind::BayesDelusive1);
  const double a_d2 = phi_argument(spec, ClassifierKind::BayesDelusive2);
  return a_d > a_d2 + kOrderingMargin && a_d2 > a_d1 + kOrderingMargin;
}

bool theorem2_check(const GaussianMixtureSpec& spec) {
  validate(spec);
  if (spec.d == 0) throw std::domain_error("theorem2_check needs d >= 1");
  if (!spec.eta_in_theorem_range())
    throw std::domain_error("theorem2_check needs 0 < eta < 1/3");
  const double a_d1 = phi_argument(spec, ClassifierKind::BayesDelusive1);
  const double a_r1 = phi_argument(spec, ClassifierKind::RobustDelusive1);
  const double a_d2 = phi_argument(spec, ClassifierKind::BayesDelusive2);
  const double a_r2 = phi_argument(spec, ClassifierKind::RobustDelusive2);
  return a_r1 > a_d1 + kOrderingMargin && a_r2 > a_d2 + kOrderingMargin;
}

std::vector<Figure2Row> figure2_curves(double eta, double sigma,
                                       std::span<const std::size_t> d_grid) {
  std::vector<Figure2Row> rows;
  rows.reserve(d_grid.size());
  for (std::size_t d : d_grid) {
    GaussianMixtureSpec spec{eta, sigma, d, MixtureVariant::Original};
    Figure2Row row;
    row.d = d;
    row.acc_bayes_d = std_normal_cdf(phi_argument(spec, ClassifierKind::BayesOriginal));
    row.acc_bayes_d1 = std_normal_cdf(phi_argument(spec, ClassifierKind::BayesDelusive1));
    row.acc_bayes_d2 = std_normal_cdf(phi_argument(spec, ClassifierKind::BayesDelusive2));
    row.acc_rob_d1 = std_normal_cdf(phi_argument(spec, ClassifierKind::RobustDelusive1));
    row.acc_rob_d2 = std_normal_cdf(phi_argument(spec, ClassifierKind::RobustDelusive2));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace delusive
