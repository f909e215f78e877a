#include "shapereg/family.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "shapereg/errors.hpp"

namespace shapereg {

namespace {
// exp() overflows doubles just above 709; the likelihood never needs
// values past this point.
constexpr double kExpClamp = 700.0;
constexpr double kIntTol = 1e-8;

double stable_log1p_exp(double eta) {
  // log(1 + e^eta) without overflow on either side
  if (eta > 0.0) return eta + std::log1p(std::exp(-eta));
  return std::log1p(std::exp(eta));
}
}  // namespace

ExtReal::ExtReal(double v) : tag_(Tag::Finite), v_(v) {
  if (!std::isfinite(v)) throw std::invalid_argument("ExtReal: non-finite value");
}

double ExtReal::value() const {
  if (tag_ != Tag::Finite) throw std::logic_error("ExtReal::value on infinite state");
  return v_;
}

double ExtReal::as_double() const {
  switch (tag_) {
    case Tag::PosInf: return std::numeric_limits<double>::infinity();
    case Tag::NegInf: return -std::numeric_limits<double>::infinity();
    default: return v_;
  }
}

ExponentialFamily ExponentialFamily::binomial(int trials) {
  if (trials < 1) throw std::invalid_argument("Binomial trials must be >= 1");
  return {Family::Binomial, trials};
}

std::string ExponentialFamily::name() const {
  switch (kind) {
    case Family::Gaussian: return "gaussian";
    case Family::Poisson: return "poisson";
    case Family::Binomial: return "binomial";
    case Family::Gamma: return "gamma";
  }
  return "?";
}

Family family_from_name(std::string_view name) {
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  if (s == "gaussian" || s == "normal") return Family::Gaussian;
  if (s == "poisson") return Family::Poisson;
  if (s == "binomial") return Family::Binomial;
  if (s == "gamma") return Family::Gamma;
  throw std::invalid_argument("unknown family: " + s);
}

bool ExponentialFamily::in_mean_space(double mu) const {
  if (!std::isfinite(mu)) return false;
  switch (kind) {
    case Family::Gaussian: return true;
    case Family::Poisson: return mu > 0.0;
    case Family::Binomial: return mu > 0.0 && mu < 1.0;
    case Family::Gamma: return mu > 0.0;
  }
  return false;
}

double ExponentialFamily::link(double mu) const {
  if (!in_mean_space(mu))
    throw std::domain_error(name() + ": mean value " + std::to_string(mu) +
                            " outside the mean space");
  switch (kind) {
    case Family::Gaussian: return mu;
    case Family::Poisson: return std::log(mu);
    case Family::Binomial: return std::log(mu / (1.0 - mu));
    case Family::Gamma: return -1.0 / mu;
  }
  return 0.0;
}

bool ExponentialFamily::eta_in_domain(double eta) const {
  if (!std::isfinite(eta)) return false;
  return kind == Family::Gamma ? eta < 0.0 : true;
}

double ExponentialFamily::inv_link(double eta) const {
  switch (kind) {
    case Family::Gaussian: return eta;
    case Family::Poisson: return std::exp(std::min(eta, kExpClamp));
    case Family::Binomial: return 1.0 / (1.0 + std::exp(-eta));
    case Family::Gamma:
      if (eta >= 0.0) throw std::domain_error("gamma: eta >= 0 outside dom(B)");
      return -1.0 / eta;
  }
  return 0.0;
}

double ExponentialFamily::inv_link(const ExtReal& eta) const {
  if (eta.is_finite()) return inv_link(eta.value());
  const bool pos = eta.is_pos_inf();
  switch (kind) {
    case Family::Gaussian: return pos ? std::numeric_limits<double>::infinity()
                                      : -std::numeric_limits<double>::infinity();
    case Family::Poisson: return pos ? std::numeric_limits<double>::infinity() : 0.0;
    case Family::Binomial: return pos ? 1.0 : 0.0;
    case Family::Gamma:
      if (pos) throw std::domain_error("gamma: eta = +inf outside dom(B)");
      return 0.0;
  }
  return 0.0;
}

double ExponentialFamily::log_partition_finite(double eta) const {
  switch (kind) {
    case Family::Gaussian: return 0.5 * eta * eta;
    case Family::Poisson: return std::exp(std::min(eta, kExpClamp));
    case Family::Binomial: return stable_log1p_exp(eta);
    case Family::Gamma: return -std::log(-eta);
  }
  return 0.0;
}

LogPartition ExponentialFamily::log_partition(const ExtReal& eta) const {
  if (eta.is_finite()) {
    const double e = eta.value();
    if (kind == Family::Gamma && e >= 0.0) return {ExtReal::pos_inf(), true};
    return {ExtReal(log_partition_finite(e)), false};
  }
  if (eta.is_neg_inf()) {
    switch (kind) {
      case Family::Gaussian: return {ExtReal::pos_inf(), false};
      case Family::Poisson: return {ExtReal(0.0), false};
      case Family::Binomial: return {ExtReal(0.0), false};
      case Family::Gamma: return {ExtReal::neg_inf(), false};
    }
  }
  // eta = +inf
  if (kind == Family::Gamma) return {ExtReal::pos_inf(), true};
  return {ExtReal::pos_inf(), false};
}

double ExponentialFamily::variance(double eta) const {
  switch (kind) {
    case Family::Gaussian: return 1.0;
    case Family::Poisson: return std::exp(std::min(eta, kExpClamp));
    case Family::Binomial: {
      const double p = 1.0 / (1.0 + std::exp(-eta));
      return p * (1.0 - p);
    }
    case Family::Gamma: return 1.0 / (eta * eta);
  }
  return 0.0;
}

bool ExponentialFamily::supports(double y) const {
  if (!std::isfinite(y)) return false;
  switch (kind) {
    case Family::Gaussian: return true;
    case Family::Poisson: return y >= 0.0 && std::abs(y - std::round(y)) < kIntTol;
    case Family::Binomial: {
      if (y < -kIntTol || y > 1.0 + kIntTol) return false;
      const double scaled = y * trials;
      return std::abs(scaled - std::round(scaled)) < kIntTol * trials;
    }
    case Family::Gamma: return y > 0.0;
  }
  return false;
}

ExtReal loglik_term(const ExponentialFamily& family, const ExtReal& eta, double y) {
  if (eta.is_finite()) {
    const LogPartition b = family.log_partition(eta);
    if (b.domain_violation) return ExtReal::neg_inf();
    return ExtReal(y * eta.value() - b.value.value());
  }
  if (eta.is_neg_inf()) {
    // lim_{a -> -inf} y a - B(a)
    switch (family.kind) {
      case Family::Gaussian: return ExtReal::neg_inf();
      case Family::Poisson:
      case Family::Binomial: return y > 0.0 ? ExtReal::neg_inf() : ExtReal(0.0);
      case Family::Gamma: return ExtReal::neg_inf();
    }
  }
  // eta = +inf
  switch (family.kind) {
    case Family::Binomial: return y < 1.0 ? ExtReal::neg_inf() : ExtReal(0.0);
    default: return ExtReal::neg_inf();
  }
}

namespace {
void check_lengths(std::size_t n_eta, std::size_t n_y, std::size_t n_w) {
  if (n_eta != n_y)
    throw DataError("scaled_loglik: eta length " + std::to_string(n_eta) +
                    " != response length " + std::to_string(n_y));
  if (n_w != 0 && n_w != n_y)
    throw DataError("scaled_loglik: weights length mismatch");
  if (n_y == 0) throw DataError("scaled_loglik: empty input");
}

void check_support(const ExponentialFamily& family, std::span<const double> y) {
  for (std::size_t i = 0; i < y.size(); ++i)
    if (!family.supports(y[i]))
      throw DataError(family.name() + ": response " + std::to_string(y[i]) + " at row " +
                      std::to_string(i + 1) + " outside the family support");
}
}  // namespace

ExtReal scaled_loglik(const ExponentialFamily& family, std::span<const ExtReal> eta,
                      std::span<const double> y, std::span<const double> weights) {
  check_lengths(eta.size(), y.size(), weights.size());
  check_support(family, y);
  double acc = 0.0;
  const std::size_t n = y.size();
  for (std::size_t i = 0; i < n; ++i) {
    const ExtReal term = loglik_term(family, eta[i], y[i]);
    if (term.is_neg_inf()) return ExtReal::neg_inf();
    const double w = weights.empty() ? 1.0 : weights[i];
    acc += w * term.value();
  }
  return ExtReal(acc / static_cast<double>(n));
}

double scaled_loglik_finite(const ExponentialFamily& family, std::span<const double> eta,
                            std::span<const double> y, std::span<const double> weights) {
  check_lengths(eta.size(), y.size(), weights.size());
  double acc = 0.0;
  const std::size_t n = y.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (family.kind == Family::Gamma && eta[i] >= 0.0)
      return -std::numeric_limits<double>::infinity();
    const double w = weights.empty() ? 1.0 : weights[i];
    acc += w * (y[i] * eta[i] - family.log_partition_finite(eta[i]));
  }
  return acc / static_cast<double>(n);
}

}  // namespace shapereg
