#pragma once

#include <string>
#include <string_view>

namespace geocomp {

enum class CorrelationKind { exponential, spherical, matern };

/// Isotropic correlation function rho(u; phi) of Euclidean distance u.
/// Matérn smoothness is a configuration constant, never estimated.
struct CorrelationFamily {
  CorrelationKind kind = CorrelationKind::exponential;
  double smoothness = 1.5;

  /// rho(u; phi). Throws std::domain_error for phi <= 0 or u < 0.
  double operator()(double u, double phi) const;
  /// d rho / d phi at fixed u.
  double d_phi(double u, double phi) const;

  std::string name() const;
  static CorrelationFamily parse(std::string_view name, double smoothness = 1.5);
};

}  // namespace geocomp
