#pragma once

namespace qtdesign {

/// Physical constants in SI units. Energies are Joules everywhere inside the
/// library; eV, nm and V only appear at ingestion and emission.
struct PhysicalConstants {
  double hbar = 1.05457e-34;            // J s
  double m0 = 9.10939e-31;              // kg
  double e = 1.602e-19;                 // C
  double effective_mass_factor = 0.07;  // m = factor * m0

  double mass() const { return effective_mass_factor * m0; }

  /// Throws ConfigError unless every constant is finite and strictly positive.
  void validate() const;
};

namespace units {

inline constexpr double kMetersPerNanometer = 1e-9;

inline double ev_to_joule(double ev, const PhysicalConstants& c) { return ev * c.e; }
inline double joule_to_ev(double j, const PhysicalConstants& c) { return j / c.e; }
inline double nm_to_m(double nm) { return nm * kMetersPerNanometer; }
inline double m_to_nm(double m) { return m / kMetersPerNanometer; }

}  // namespace units
}  // namespace qtdesign
