#ifndef SPLITLAB_DUST_HPP
#define SPLITLAB_DUST_HPP

#include "splitlab/error_analysis.hpp"
#include "splitlab/ode.hpp"
#include "splitlab/scheme.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace splitlab::dust {

/// Single-box dust budget in nondimensional units:
///   A(q) = E, B(q) = -k_d q, C(q) = -k_m (q - q_bg).
struct ScalarParams {
  double emission = 2.0;
  double removal_rate = 1.0;
  double mixing_rate = 0.5;
  double background = 0.0;
  double initial = 1.0;
};

/// Vertical column of n layers (index 0 is the surface layer). Emission and
/// dry deposition act on the surface layer only; turbulent mixing is eddy
/// diffusion with no-flux boundaries.
struct ColumnParams {
  int layers = 10;
  double thickness = 0.1;          // layer depth
  double emission_flux = 1.0;      // into the surface layer
  double deposition_velocity = 0.1;
  double diffusivity = 0.01;
  /// Used when `initial` is empty: q_k = surface_value * exp(-z_k / scale_height)
  /// at layer midpoints z_k.
  double surface_value = 1.0;
  double scale_height = 0.2;
  std::optional<Vector> initial;
};

/// Process names of both dust problems, in order: emission, dry removal,
/// turbulent mixing.
inline const std::vector<std::string>& process_names() {
  static const std::vector<std::string> names{"A", "B", "C"};
  return names;
}

ProblemSpec make_scalar_problem(const ScalarParams& p);
ProblemSpec make_column_problem(const ColumnParams& p);

/// Column-mass weights (layer thickness) so that w . q is the column burden.
Vector column_mass_weights(const ColumnParams& p);

struct ComparisonRow {
  double dt = 0.0;
  double lte_original = 0.0;  // attributed lte of the removal stage
  double lte_revised = 0.0;
  double predicted_original = 0.0;
  double predicted_revised = 0.0;
  bool original_negative = false;
  bool revised_not_larger = false;
  double ratio = 0.0;  // |revised| / |original|
  bool below_noise_floor = false;
};

/// Removal-stage errors of two coupling schemes side by side, with the key
/// factors |A - C| and |-A - C| that set the leading terms at q(t_n).
struct ComparisonReport {
  std::string original_scheme;
  std::string revised_scheme;
  Eigen::Index component = 0;
  double t_n = 0.0;
  double emission = 0.0;  // A at q(t_n)
  double removal = 0.0;   // B
  double mixing = 0.0;    // C
  double removal_slope = 0.0;  // dB/dq (diagonal entry)
  double abs_a_minus_c = 0.0;
  double abs_minus_a_minus_c = 0.0;
  double noise_floor = 0.0;
  std::vector<ComparisonRow> rows;

  /// "lte_B sign: negative (original); |Rev|/|Ori| = 0.60" for the row at `index`.
  std::string summary_line(std::size_t index = 0) const;
};

/// Compares `original` and `revised` on a three-process dust problem. The
/// removal process is the second process; `component` selects the layer.
ComparisonReport compare_schemes_report(const ProblemSpec& problem, double t_n,
                                        std::span<const double> dts, const Tolerances& tol,
                                        const SchemeSpec& original, const SchemeSpec& revised,
                                        Eigen::Index component = 0);

/// Same, with the built-in original and revised EAM couplings.
ComparisonReport compare_schemes_report(const ProblemSpec& problem, double t_n,
                                        std::span<const double> dts, const Tolerances& tol = {},
                                        Eigen::Index component = 0);

}  // namespace splitlab::dust

#endif  // SPLITLAB_DUST_HPP
