#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "punn/numeric.hpp"

namespace punn {

/// Scalar squashing function applied to a gate argument.
enum class Activation {
  Sigmoid,   // 1 / (1 + e^-t)
  Gaussian,  // e^(-t^2)
  Bump,      // exp(-1 / (1 - t^2)) on |t| < 1, else 0
  BumpTanh,  // Bump(tanh(t))
};

enum class GateFamily {
  Mlp,
  Radial,
  Ellipsoid,
  Shell,          // constant inner and outer radius
  FourierShell,   // d = 2, outer radius as a Fourier series in the angle
  HarmonicShell,  // outer radius as a polynomial in the unit direction
};

std::string_view to_string(Activation a) noexcept;
std::string_view to_string(GateFamily f) noexcept;
Activation parse_activation(std::string_view name);
GateFamily parse_gate_family(std::string_view name);

/// Floor for every radius, axis weight and sharpness.
inline constexpr double kRadiusFloor = 1e-3;

struct ActivationValue {
  double value;
  double derivative;
};

ActivationValue activation_eval(Activation kind, double t) noexcept;

/// Fourier radius a0 + sum_k a_k cos(k angle) + b_k sin(k angle), clamped
/// below at kRadiusFloor.
struct FourierRadius {
  double a0 = 1.0;
  std::vector<double> a;  // a_1..a_K
  std::vector<double> b;  // b_1..b_K
};

/// Polynomial radius in the components of a unit direction, all monomials
/// of total degree <= degree, clamped below at kRadiusFloor.
struct HarmonicRadius {
  std::size_t dim = 0;
  std::size_t degree = 0;
  std::vector<double> coeffs;  // ordered as harmonic_monomials(dim, degree)
};

/// Exponent tuples of all monomials in `dim` variables with total degree
/// <= degree, grouped by degree, lexicographically descending within one.
std::vector<std::vector<unsigned>> harmonic_monomials(std::size_t dim, std::size_t degree);
std::size_t harmonic_coeff_count(std::size_t dim, std::size_t degree);

double radius_eval(const FourierRadius& r, double angle);
double radius_eval(const HarmonicRadius& r, std::span<const double> direction);

/// One gate g_i(x) = g(theta_i(x)).
///
/// Parameters live in one flat vector. Radii, axis weights and sharpness
/// are stored unconstrained and mapped through softplus(.) + kRadiusFloor.
/// Layouts:
///   Mlp            net params [, beta~]  (beta only with BumpTanh)
///   Radial         c(d), r~, s~
///   Ellipsoid      c(d), a~(d), s~, b
///   Shell          c(d), s~, r1~, gap~
///   FourierShell   c(2), s~ [, r1~], a0, a_1..a_K, b_1..b_K
///   HarmonicShell  c(d), s~ [, r1~], coeffs
/// For shells the outer radius is r2 = r1 + R(n) with R the constant gap,
/// the Fourier radius or the harmonic radius; without an inner radius
/// r1 = 0 and the region is a solid star-shaped body.
///
/// MLP gates with BumpTanh carry a learned width beta:
///   g(x) = exp(-beta cosh^2(net(x))),
/// which equals Bump(tanh(net(x))) at beta = 1 and lets the peak value
/// exp(-beta) approach 1.
class GateSpec {
 public:
  GateSpec() = default;

  static GateSpec mlp(Activation act, const MlpLayout& layout, Rng& rng);
  static GateSpec radial(Activation act, std::span<const double> center, double radius,
                         double sharpness);
  static GateSpec ellipsoid(Activation act, std::span<const double> center,
                            std::span<const double> axis_weights, double sharpness,
                            double bias);
  static GateSpec shell(Activation act, std::span<const double> center, double inner_radius,
                        double outer_radius, double sharpness);
  static GateSpec fourier_shell(Activation act, std::span<const double> center, double sharpness,
                                const FourierRadius& radius, double inner_radius = -1.0);
  static GateSpec harmonic_shell(Activation act, std::span<const double> center, double sharpness,
                                 const HarmonicRadius& radius, double inner_radius = -1.0);

  /// Rebuilds a gate from its structural description and a raw (already
  /// unconstrained) parameter vector, as stored in model files.
  static GateSpec from_raw(Activation act, GateFamily family, std::size_t dim,
                           std::vector<std::size_t> mlp_widths, std::size_t order,
                           bool has_inner, std::vector<double> raw);

  Activation activation() const noexcept { return act_; }
  GateFamily family() const noexcept { return family_; }
  std::size_t input_dim() const noexcept { return dim_; }
  /// Fourier K or harmonic degree L; 0 otherwise.
  std::size_t order() const noexcept { return order_; }
  bool has_inner() const noexcept { return inner_; }
  bool has_bump_width() const noexcept { return family_ == GateFamily::Mlp && act_ == Activation::BumpTanh; }
  const MlpLayout& mlp_layout() const noexcept { return layout_; }

  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }
  std::size_t param_count() const noexcept { return params_.size(); }

  std::span<const double> center() const;
  /// Natural (constrained) values, for reports.
  double sharpness() const;
  double inner_radius() const;

  void set_params(std::span<const double> values);

 private:
  std::size_t shell_radius_offset() const noexcept;

  Activation act_ = Activation::Sigmoid;
  GateFamily family_ = GateFamily::Mlp;
  std::size_t dim_ = 0;
  std::size_t order_ = 0;
  bool inner_ = false;
  MlpLayout layout_;
  std::vector<double> params_;

  friend double gate_argument(const GateSpec&, std::span<const double>, std::span<double>);
};

/// Per-sample intermediates of a batched gate evaluation.
struct GateCache {
  std::vector<double> argument;    // theta(x)
  std::vector<double> value;       // g(theta(x))
  std::vector<double> derivative;  // g'(theta(x))
  MlpCache mlp;
};

/// Argument theta(x) of a shape gate. When `dtheta` is non-empty it receives
/// d theta / d params (overwritten). Not defined for MLP gates.
double gate_argument(const GateSpec& spec, std::span<const double> x, std::span<double> dtheta);

/// Evaluates the gate on every row of `x` into `out`.
void gate_eval(const GateSpec& spec, const DenseMatrix& x, std::span<double> out,
               GateCache* cache = nullptr);
double gate_eval(const GateSpec& spec, std::span<const double> x, GateCache* cache = nullptr);

/// Adds sum_n upstream[n] * d g(x_n) / d params into `grad`.
void gate_grad(const GateSpec& spec, const DenseMatrix& x, const GateCache& cache,
               std::span<const double> upstream, std::span<double> grad);

std::size_t gate_param_count(const GateSpec& spec) noexcept;

}  // namespace punn
