#pragma once

#include <optional>
#include <span>
#include <vector>

#include "delusive/data.hpp"
#include "delusive/threat_model.hpp"

namespace delusive {

enum class ClassifierKind {
  BayesOriginal,
  BayesDelusive1,
  BayesDelusive2,
  RobustDelusive1,
  RobustDelusive2,
};

// Linear rule sign(w.x + b) with the closed-form weights; bias is always 0
// for these five.
struct ClosedFormClassifier {
  ClassifierKind kind;
  std::vector<double> weights;  // length d+1
  double bias = 0.0;
};

struct RiskReport {
  double natural_risk = 0.0;
  std::optional<double> adversarial_risk;
  double argument = 0.0;  // natural_risk == 1 - Phi(argument)
};

// Strict-ordering margin for the theorem checks, applied in Phi-argument
// space (risk differences underflow long before argument differences do).
inline constexpr double kOrderingMargin = 1e-12;

// Robust kinds require 0 < eta < 1/3.
ClosedFormClassifier closed_form_classifier(const GaussianMixtureSpec& spec, ClassifierKind kind);

// The Phi-argument of the kind's natural risk on the clean distribution D.
double phi_argument(const GaussianMixtureSpec& spec, ClassifierKind kind);

// Risk of the kind's classifier evaluated on D (as in the theorems),
// regardless of spec.variant.
RiskReport natural_risk_closed_form(const GaussianMixtureSpec& spec, ClassifierKind kind);

// Exact error probability of sign(w.x + b) when x ~ N(y*mean, sigma^2 I),
// y uniform on {-1,+1}.
double linear_risk_against_mean(std::span<const double> w, double b,
                                std::span<const double> mean, double sigma);

// Same, with the mean chosen by spec.variant.
double natural_risk_linear(std::span<const double> w, double b, const GaussianMixtureSpec& spec);

// Exact adversarial risk under an unmasked, unclamped Linf ball: the worst
// perturbation shifts the margin by -radius*||w||_1 for both classes.
double adversarial_risk_linear_exact(std::span<const double> w, double b,
                                     const GaussianMixtureSpec& spec, const ThreatBall& ball);

// R(f_D) < R(f_D2) < R(f_D1) with margin kOrderingMargin in argument space.
// Requires d >= 1 and eta > 0.
bool theorem1_check(const GaussianMixtureSpec& spec);
// R(f_Di) > R(f_Di,rob) for i = 1,2. Requires d >= 1 and 0 < eta < 1/3.
bool theorem2_check(const GaussianMixtureSpec& spec);

struct Figure2Row {
  std::size_t d;
  double acc_bayes_d, acc_bayes_d1, acc_bayes_d2, acc_rob_d1, acc_rob_d2;
};

// Accuracy (= Phi(argument)) of the five classifiers on D over a d grid.
std::vector<Figure2Row> figure2_curves(double eta, double sigma,
                                       std::span<const std::size_t> d_grid);

}  // namespace delusive
