#include "reluphase/scaling.hpp"

#include <cmath>
#include <stdexcept>

#include "reluphase/io_util.hpp"

namespace reluphase {

PowerLaw::PowerLaw(double coeff_, double exponent_) : coeff(coeff_), exponent(exponent_) {
  if (!(coeff > 0.0) || !std::isfinite(coeff) || !std::isfinite(exponent)) {
    throw std::invalid_argument("PowerLaw needs finite exponent and coeff > 0");
  }
}

double PowerLaw::value(std::size_t m) const {
  if (m < 1) throw std::invalid_argument("PowerLaw::value needs m >= 1");
  return coeff * std::pow(static_cast<double>(m), exponent);
}

std::string PowerLaw::str() const {
  if (exponent == 0.0) return g17(coeff);
  return g17(coeff) + "*m^" + g17(exponent);
}

PowerLaw operator*(const PowerLaw& lhs, const PowerLaw& rhs) {
  return PowerLaw(lhs.coeff * rhs.coeff, lhs.exponent + rhs.exponent);
}

PowerLaw operator/(const PowerLaw& lhs, const PowerLaw& rhs) {
  return PowerLaw(lhs.coeff / rhs.coeff, lhs.exponent - rhs.exponent);
}

PowerLaw kappa(const ScalingSpec& spec) { return spec.beta1 * spec.beta2 / spec.alpha; }

PowerLaw kappa_prime(const ScalingSpec& spec) { return spec.beta1 / spec.beta2; }

PhaseCoordinates phase_coordinates(const ScalingSpec& spec) {
  // + 0.0 turns the -0.0 of a negated zero exponent back into plain zero.
  return {-kappa(spec).exponent + 0.0, -kappa_prime(spec).exponent + 0.0};
}

RegimeLabel classify_regime(const PhaseCoordinates& coords) {
  if (!std::isfinite(coords.gamma) || !std::isfinite(coords.gamma_prime)) {
    throw std::invalid_argument("classify_regime needs finite coordinates");
  }
  if (coords.gamma < 1.0 || coords.gamma_prime > coords.gamma - 1.0) return RegimeLabel::Linear;
  if (coords.gamma > 1.0 && coords.gamma_prime < coords.gamma - 1.0) {
    return RegimeLabel::Condensed;
  }
  return RegimeLabel::Critical;
}

std::string regime_name(RegimeLabel label) {
  switch (label) {
    case RegimeLabel::Linear: return "linear";
    case RegimeLabel::Critical: return "critical";
    case RegimeLabel::Condensed: return "condensed";
  }
  throw std::logic_error("unknown RegimeLabel");
}

double boundary_distance(const PhaseCoordinates& coords) {
  const double dx = coords.gamma - 1.0;
  const double dy = coords.gamma_prime;
  // Vertical ray {gamma = 1, gamma_prime <= 0}.
  const double d_vert = dy <= 0.0 ? std::fabs(dx) : std::hypot(dx, dy);
  // Diagonal ray from (1, 0) along (1, 1)/sqrt(2).
  const double along = (dx + dy) / std::sqrt(2.0);
  const double d_diag = along <= 0.0 ? std::hypot(dx, dy) : std::fabs(dx - dy) / std::sqrt(2.0);
  return std::min(d_vert, d_diag);
}

ScalingSpec preset(PresetName name, std::size_t dim, std::optional<double> beta_exponent) {
  if (dim < 1) throw std::invalid_argument("preset needs dim >= 1");
  const double d = static_cast<double>(dim);
  switch (name) {
    case PresetName::LeCun:
      return {PowerLaw(1.0, 0.0), PowerLaw(1.0, -0.5), PowerLaw(std::sqrt(1.0 / d), 0.0)};
    case PresetName::He:
      return {PowerLaw(1.0, 0.0), PowerLaw(std::sqrt(2.0), -0.5),
              PowerLaw(std::sqrt(2.0 / d), 0.0)};
    case PresetName::Xavier:
      // Leading order of sqrt(2/(m+1)) and sqrt(2/(m+d)); only the exponent
      // limit enters the phase coordinates.
      return {PowerLaw(1.0, 0.0), PowerLaw(std::sqrt(2.0), -0.5), PowerLaw(std::sqrt(2.0), -0.5)};
    case PresetName::Ntk:
      return {PowerLaw(1.0, 0.5), PowerLaw(1.0, 0.0), PowerLaw(1.0, 0.0)};
    case PresetName::MeanField:
      return {PowerLaw(1.0, 1.0), PowerLaw(1.0, 0.0), PowerLaw(1.0, 0.0)};
    case PresetName::BetaPower:
      if (!beta_exponent) {
        throw std::invalid_argument("beta-power preset needs --beta-exponent");
      }
      return {PowerLaw(1.0, 0.0), PowerLaw(1.0, -*beta_exponent), PowerLaw(1.0, 0.0)};
  }
  throw std::invalid_argument("unknown preset");
}

PresetName preset_from_string(const std::string& text) {
  if (text == "lecun") return PresetName::LeCun;
  if (text == "he") return PresetName::He;
  if (text == "xavier") return PresetName::Xavier;
  if (text == "ntk") return PresetName::Ntk;
  if (text == "mean-field") return PresetName::MeanField;
  if (text == "beta-power") return PresetName::BetaPower;
  throw std::invalid_argument(
      "unknown preset '" + text +
      "' (choose lecun, he, xavier, ntk, mean-field or beta-power)");
}

std::string preset_label(PresetName name) {
  switch (name) {
    case PresetName::LeCun: return "lecun";
    case PresetName::He: return "he";
    case PresetName::Xavier: return "xavier";
    case PresetName::Ntk: return "ntk";
    case PresetName::MeanField: return "mean-field";
    case PresetName::BetaPower: return "beta-power";
  }
  throw std::logic_error("unknown PresetName");
}

Realized realize(const PhaseCoordinates& coords, std::size_t m, double kappa_coeff,
                 double kappa_prime_coeff) {
  if (m < 1) throw std::invalid_argument("realize needs m >= 1");
  if (!(kappa_coeff > 0.0) || !(kappa_prime_coeff > 0.0)) {
    throw std::invalid_argument("realize needs positive coefficients");
  }
  const double md = static_cast<double>(m);
  return {kappa_coeff * std::pow(md, -coords.gamma),
          kappa_prime_coeff * std::pow(md, -coords.gamma_prime)};
}

}  // namespace reluphase
