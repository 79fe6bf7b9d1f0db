#pragma once

#include <cstddef>
#include <optional>
#include <string>

namespace reluphase {

// value(m) = coeff * m^exponent, coeff > 0.
struct PowerLaw {
  double coeff;
  double exponent;

  explicit PowerLaw(double coeff_ = 1.0, double exponent_ = 0.0);
  double value(std::size_t m) const;
  std::string str() const;
};

PowerLaw operator*(const PowerLaw& lhs, const PowerLaw& rhs);
PowerLaw operator/(const PowerLaw& lhs, const PowerLaw& rhs);

// Width scalings of the original model: output prefactor 1/alpha, init
// std-devs beta1 (output weights) and beta2 (input weights).
struct ScalingSpec {
  PowerLaw alpha;
  PowerLaw beta1;
  PowerLaw beta2;
};

struct PhaseCoordinates {
  double gamma = 0.0;
  double gamma_prime = 0.0;
};

enum class RegimeLabel { Linear, Critical, Condensed };

PowerLaw kappa(const ScalingSpec& spec);
PowerLaw kappa_prime(const ScalingSpec& spec);

// gamma = -exponent(kappa), gamma_prime = -exponent(kappa_prime).
PhaseCoordinates phase_coordinates(const ScalingSpec& spec);

// Linear iff gamma < 1 or gamma_prime > gamma - 1; Condensed iff gamma > 1
// and gamma_prime < gamma - 1; Critical on the remaining one-dimensional set.
RegimeLabel classify_regime(const PhaseCoordinates& coords);
std::string regime_name(RegimeLabel label);

// Euclidean distance from coords to the critical set, the union of the ray
// {gamma = 1, gamma_prime <= 0} and the ray {gamma_prime = gamma - 1 >= 0}.
double boundary_distance(const PhaseCoordinates& coords);

enum class PresetName { LeCun, He, Xavier, Ntk, MeanField, BetaPower };

// Named initialization scalings. Xavier is its leading-order power law in m.
// BetaPower sets beta1 = m^(-beta_exponent) and requires the exponent.
ScalingSpec preset(PresetName name, std::size_t dim,
                   std::optional<double> beta_exponent = std::nullopt);
PresetName preset_from_string(const std::string& text);
std::string preset_label(PresetName name);

struct Realized {
  double kappa = 0.0;
  double kappa_prime = 0.0;
};

// Concrete (kappa, kappa_prime) for one width: coeff * m^(-gamma) and
// coeff * m^(-gamma_prime). Unit coefficients give the canonical realization.
Realized realize(const PhaseCoordinates& coords, std::size_t m,
                 double kappa_coeff = 1.0, double kappa_prime_coeff = 1.0);

}  // namespace reluphase
