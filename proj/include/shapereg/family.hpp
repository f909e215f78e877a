#pragma once

#include <cstdint>
#include <span>
#include <string>

namespace shapereg {

// Extended real line value with an explicit three-state representation,
// so that a deliberate +-infinity (a limit of linear predictors) is never
// confused with an overflowed finite computation.
class ExtReal {
 public:
  constexpr ExtReal() = default;
  ExtReal(double v);  // finite values only; throws std::invalid_argument otherwise
  static constexpr ExtReal pos_inf() { return ExtReal(Tag::PosInf); }
  static constexpr ExtReal neg_inf() { return ExtReal(Tag::NegInf); }

  constexpr bool is_finite() const { return tag_ == Tag::Finite; }
  constexpr bool is_pos_inf() const { return tag_ == Tag::PosInf; }
  constexpr bool is_neg_inf() const { return tag_ == Tag::NegInf; }
  double value() const;  // finite values only
  // Lossy view mapping the infinite states to IEEE infinities.
  double as_double() const;

  friend constexpr bool operator==(const ExtReal& a, const ExtReal& b) {
    if (a.tag_ != b.tag_) return false;
    return a.tag_ != Tag::Finite || a.v_ == b.v_;
  }

 private:
  enum class Tag : std::uint8_t { Finite, PosInf, NegInf };
  explicit constexpr ExtReal(Tag t) : tag_(t) {}
  Tag tag_ = Tag::Finite;
  double v_ = 0.0;
};

enum class Family : int { Gaussian, Poisson, Binomial, Gamma };

// B(eta) together with a flag telling a genuine domain violation
// (Gamma at eta >= 0) apart from the overflow guard on exp().
struct LogPartition {
  ExtReal value;
  bool domain_violation = false;
};

// One of the four natural exponential families under its canonical link.
struct ExponentialFamily {
  Family kind = Family::Gaussian;
  int trials = 1;  // Binomial: responses live on {0, 1/T, ..., 1}

  static ExponentialFamily gaussian() { return {Family::Gaussian, 1}; }
  static ExponentialFamily poisson() { return {Family::Poisson, 1}; }
  static ExponentialFamily binomial(int trials = 1);
  static ExponentialFamily gamma() { return {Family::Gamma, 1}; }

  std::string name() const;
  bool is_gaussian() const { return kind == Family::Gaussian; }

  // g(mu). Throws std::domain_error when mu is outside the mean space.
  double link(double mu) const;
  // g^{-1}(eta) = B'(eta) for finite eta in dom(B); throws std::domain_error
  // for Gamma at eta >= 0.
  double inv_link(double eta) const;
  // Extended arguments map to the boundary of the mean space
  // (e.g. Binomial eta = -inf -> mu = 0).
  double inv_link(const ExtReal& eta) const;

  LogPartition log_partition(const ExtReal& eta) const;
  // B(eta) for finite eta known to lie in dom(B).
  double log_partition_finite(double eta) const;
  // B''(eta), the curvature used as IRLS weight.
  double variance(double eta) const;

  bool in_mean_space(double mu) const;
  bool eta_in_domain(double eta) const;
  // Response support check; Binomial uses `trials`.
  bool supports(double y) const;
};

Family family_from_name(std::string_view name);

// Per-observation term y*eta - B(eta) with the extended-value limit rules.
ExtReal loglik_term(const ExponentialFamily& family, const ExtReal& eta, double y);

// (1/n) sum_i w_i { y_i eta_i - B(eta_i) }; weights default to 1.
// Throws DataError on length mismatch or responses outside the support.
ExtReal scaled_loglik(const ExponentialFamily& family, std::span<const ExtReal> eta,
                      std::span<const double> y, std::span<const double> weights = {});

// All-finite linear predictors; -HUGE_VAL stands for a -inf value
// (possible for Gamma when some eta_i >= 0).
double scaled_loglik_finite(const ExponentialFamily& family, std::span<const double> eta,
                            std::span<const double> y, std::span<const double> weights = {});

}  // namespace shapereg
