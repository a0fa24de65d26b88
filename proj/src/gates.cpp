#include "punn/gates.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace punn {

std::string_view to_string(Activation a) noexcept {
  switch (a) {
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Gaussian: return "gaussian";
    case Activation::Bump: return "bump";
    case Activation::BumpTanh: return "bump_tanh";
  }
  return "?";
}

std::string_view to_string(GateFamily f) noexcept {
  switch (f) {
    case GateFamily::Mlp: return "mlp";
    case GateFamily::Radial: return "radial";
    case GateFamily::Ellipsoid: return "ellipsoid";
    case GateFamily::Shell: return "shell";
    case GateFamily::FourierShell: return "fourier_shell";
    case GateFamily::HarmonicShell: return "harmonic_shell";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  for (auto a : {Activation::Sigmoid, Activation::Gaussian, Activation::Bump, Activation::BumpTanh}) {
    if (name == to_string(a)) return a;
  }
  throw ConfigError("unknown activation '" + std::string(name) +
                    "' (expected sigmoid, gaussian, bump or bump_tanh)");
}

GateFamily parse_gate_family(std::string_view name) {
  for (auto f : {GateFamily::Mlp, GateFamily::Radial, GateFamily::Ellipsoid, GateFamily::Shell,
                 GateFamily::FourierShell, GateFamily::HarmonicShell}) {
    if (name == to_string(f)) return f;
  }
  throw ConfigError("unknown gate family '" + std::string(name) + "'");
}

namespace {

// exp(-1/q) underflows to exactly zero past this
constexpr double kExpUnderflow = 745.0;

ActivationValue bump(double t) noexcept {
  const double q = 1.0 - t * t;
  if (!(q > 0.0) || 1.0 / q > kExpUnderflow) return {0.0, 0.0};
  const double v = std::exp(-1.0 / q);
  return {v, v * (-2.0 * t / (q * q))};
}

// exp(-beta cosh^2 t); Bump(tanh t) is the case beta = 1 since
// 1 / (1 - tanh^2 t) = cosh^2 t.
ActivationValue bump_tanh(double t, double beta) noexcept {
  const double c = std::cosh(t);
  const double e = beta * c * c;
  if (!(e < kExpUnderflow)) return {0.0, 0.0};
  const double v = std::exp(-e);
  return {v, -beta * std::sinh(2.0 * t) * v};
}

}  // namespace

ActivationValue activation_eval(Activation kind, double t) noexcept {
  switch (kind) {
    case Activation::Sigmoid: {
      const double s = sigmoid(t);
      return {s, s * (1.0 - s)};
    }
    case Activation::Gaussian: {
      const double v = std::exp(-t * t);
      return {v, -2.0 * t * v};
    }
    case Activation::Bump: return bump(t);
    case Activation::BumpTanh: return bump_tanh(t, 1.0);
  }
  return {0.0, 0.0};
}

// ---------------------------------------------------------------------------
// Radius forms

std::vector<std::vector<unsigned>> harmonic_monomials(std::size_t dim, std::size_t degree) {
  std::vector<std::vector<unsigned>> out;
  for (std::size_t deg = 0; deg <= degree; ++deg) {
    // exponent vectors summing to deg, first coordinate largest first
    std::vector<unsigned> e(dim, 0);
    auto rec = [&](auto&& self, std::size_t pos, unsigned remaining) -> void {
      if (pos + 1 == dim) {
        e[pos] = remaining;
        out.push_back(e);
        return;
      }
      for (unsigned k = remaining + 1; k-- > 0;) {
        e[pos] = k;
        self(self, pos + 1, remaining - k);
      }
    };
    if (dim > 0) rec(rec, 0, unsigned(deg));
  }
  return out;
}

std::size_t harmonic_coeff_count(std::size_t dim, std::size_t degree) {
  // sum_{l <= L} C(d + l - 1, l)
  std::size_t total = 0;
  for (std::size_t l = 0; l <= degree; ++l) {
    std::size_t c = 1;
    for (std::size_t i = 1; i <= l; ++i) c = c * (dim + i - 1) / i;
    total += c;
  }
  return total;
}

namespace {

double fourier_raw(double a0, std::span<const double> a, std::span<const double> b, double angle) {
  double r = a0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double kk = double(k + 1);
    r += a[k] * std::cos(kk * angle) + b[k] * std::sin(kk * angle);
  }
  return r;
}

double monomial(std::span<const unsigned> e, std::span<const double> n) {
  double v = 1.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    for (unsigned p = 0; p < e[i]; ++p) v *= n[i];
  }
  return v;
}

// Adds coef * d monomial / d n into grad.
void monomial_grad(std::span<const unsigned> e, std::span<const double> n, double coef,
                   std::span<double> grad) {
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (e[i] == 0) continue;
    double v = double(e[i]);
    for (std::size_t j = 0; j < e.size(); ++j) {
      const unsigned p = j == i ? e[j] - 1 : e[j];
      for (unsigned q = 0; q < p; ++q) v *= n[j];
    }
    grad[i] += coef * v;
  }
}

}  // namespace

double radius_eval(const FourierRadius& r, double angle) {
  if (r.a.size() != r.b.size()) throw InputShapeError("Fourier radius needs as many a_k as b_k");
  return std::max(kRadiusFloor, fourier_raw(r.a0, r.a, r.b, angle));
}

double radius_eval(const HarmonicRadius& r, std::span<const double> direction) {
  if (direction.size() != r.dim) throw InputShapeError("direction has the wrong dimension");
  auto monos = harmonic_monomials(r.dim, r.degree);
  if (monos.size() != r.coeffs.size()) {
    throw InputShapeError("harmonic radius needs " + std::to_string(monos.size()) + " coefficients");
  }
  double v = 0.0;
  for (std::size_t m = 0; m < monos.size(); ++m) v += r.coeffs[m] * monomial(monos[m], direction);
  return std::max(kRadiusFloor, v);
}

// ---------------------------------------------------------------------------
// GateSpec construction

namespace {

double raw_positive(double natural, const char* what) {
  if (!(natural > kRadiusFloor)) {
    throw DomainError(std::string(what) + " must exceed " + std::to_string(kRadiusFloor));
  }
  return inverse_softplus(natural - kRadiusFloor);
}

double positive(double raw) noexcept { return softplus(raw) + kRadiusFloor; }

void require_dim(std::span<const double> center) {
  if (center.empty()) throw InputShapeError("gate center must have at least one coordinate");
}

}  // namespace

GateSpec GateSpec::mlp(Activation act, const MlpLayout& layout, Rng& rng) {
  if (layout.output_dim() != 1) throw InputShapeError("gate MLPs must have a single output");
  GateSpec g;
  g.act_ = act;
  g.family_ = GateFamily::Mlp;
  g.dim_ = layout.input_dim();
  g.layout_ = layout;
  g.params_.assign(layout.param_count() + (act == Activation::BumpTanh ? 1 : 0), 0.0);
  glorot_init(layout, std::span<double>(g.params_).first(layout.param_count()), rng);
  if (g.has_bump_width()) g.params_.back() = raw_positive(1.0, "bump width");
  return g;
}

GateSpec GateSpec::radial(Activation act, std::span<const double> center, double radius,
                          double sharpness) {
  require_dim(center);
  GateSpec g;
  g.act_ = act;
  g.family_ = GateFamily::Radial;
  g.dim_ = center.size();
  g.params_.assign(center.begin(), center.end());
  g.params_.push_back(raw_positive(radius, "radius"));
  g.params_.push_back(raw_positive(sharpness, "sharpness"));
  return g;
}

GateSpec GateSpec::ellipsoid(Activation act, std::span<const double> center,
                             std::span<const double> axis_weights, double sharpness, double bias) {
  require_dim(center);
  if (axis_weights.size() != center.size()) {
    throw InputShapeError("ellipsoid needs one axis weight per dimension");
  }
  GateSpec g;
  g.act_ = act;
  g.family_ = GateFamily::Ellipsoid;
  g.dim_ = center.size();
  g.params_.assign(center.begin(), center.end());
  for (double a : axis_weights) g.params_.push_back(raw_positive(a, "axis weight"));
  g.params_.push_back(raw_positive(sharpness, "sharpness"));
  g.params_.push_back(bias);
  return g;
}

GateSpec GateSpec::shell(Activation act, std::span<const double> center, double inner_radius,
                         double outer_radius, double sharpness) {
  require_dim(center);
  GateSpec g;
  g.act_ = act;
  g.family_ = GateFamily::Shell;
  g.dim_ = center.size();
  g.inner_ = true;
  g.params_.assign(center.begin(), center.end());
  g.params_.push_back(raw_positive(sharpness, "sharpness"));
  g.params_.push_back(raw_positive(inner_radius, "inner radius"));
  g.params_.push_back(raw_positive(outer_radius - inner_radius, "shell gap"));
  return g;
}

GateSpec GateSpec::fourier_shell(Activation act, std::span<const double> center, double sharpness,
                                 const FourierRadius& radius, double inner_radius) {
  if (center.size() != 2) throw InputShapeError("Fourier shells are defined in two dimensions");
  if (radius.a.size() != radius.b.size()) {
    throw InputShapeError("Fourier radius needs as many a_k as b_k");
  }
  GateSpec g;
  g.act_ = act;
  g.family_ = GateFamily::FourierShell;
  g.dim_ = 2;
  g.order_ = radius.a.size();
  g.inner_ = inner_radius >= 0.0;
  g.params_.assign(center.begin(), center.end());
  g.params_.push_back(raw_positive(sharpness, "sharpness"));
  if (g.inner_) g.params_.push_back(raw_positive(inner_radius, "inner radius"));
  g.params_.push_back(radius.a0);
  g.params_.insert(g.params_.end(), radius.a.begin(), radius.a.end());
  g.params_.insert(g.params_.end(), radius.b.begin(), radius.b.end());
  return g;
}

GateSpec GateSpec::harmonic_shell(Activation act, std::span<const double> center, double sharpness,
                                  const HarmonicRadius& radius, double inner_radius) {
  require_dim(center);
  if (radius.dim != center.size()) throw InputShapeError("harmonic radius dimension mismatch");
  if (radius.coeffs.size() != harmonic_coeff_count(radius.dim, radius.degree)) {
    throw InputShapeError("harmonic radius of degree " + std::to_string(radius.degree) + " needs " +
                          std::to_string(harmonic_coeff_count(radius.dim, radius.degree)) +
                          " coefficients");
  }
  GateSpec g;
  g.act_ = act;
  g.family_ = GateFamily::HarmonicShell;
  g.dim_ = center.size();
  g.order_ = radius.degree;
  g.inner_ = inner_radius >= 0.0;
  g.params_.assign(center.begin(), center.end());
  g.params_.push_back(raw_positive(sharpness, "sharpness"));
  if (g.inner_) g.params_.push_back(raw_positive(inner_radius, "inner radius"));
  g.params_.insert(g.params_.end(), radius.coeffs.begin(), radius.coeffs.end());
  return g;
}

GateSpec GateSpec::from_raw(Activation act, GateFamily family, std::size_t dim,
                            std::vector<std::size_t> mlp_widths, std::size_t order,
                            bool has_inner, std::vector<double> raw) {
  GateSpec g;
  g.act_ = act;
  g.family_ = family;
  g.dim_ = dim;
  g.order_ = order;
  g.inner_ = has_inner;
  std::size_t expected = 0;
  switch (family) {
    case GateFamily::Mlp:
      g.layout_ = MlpLayout(std::move(mlp_widths));
      if (g.layout_.input_dim() != dim || g.layout_.output_dim() != 1) {
        throw ParseError("gate MLP widths do not match the gate dimension");
      }
      g.order_ = 0;
      g.inner_ = false;
      expected = g.layout_.param_count() + (g.has_bump_width() ? 1 : 0);
      break;
    case GateFamily::Radial: expected = dim + 2; break;
    case GateFamily::Ellipsoid: expected = 2 * dim + 2; break;
    case GateFamily::Shell:
      g.inner_ = true;
      expected = dim + 3;
      break;
    case GateFamily::FourierShell:
      if (dim != 2) throw ParseError("Fourier shells are defined in two dimensions");
      expected = dim + 1 + (has_inner ? 1 : 0) + 2 * order + 1;
      break;
    case GateFamily::HarmonicShell:
      expected = dim + 1 + (has_inner ? 1 : 0) + harmonic_coeff_count(dim, order);
      break;
  }
  if (dim == 0) throw ParseError("gate dimension must be positive");
  if (raw.size() != expected) {
    throw ParseError("gate '" + std::string(to_string(family)) + "' expects " +
                     std::to_string(expected) + " parameters, got " + std::to_string(raw.size()));
  }
  g.params_ = std::move(raw);
  return g;
}

std::span<const double> GateSpec::center() const {
  if (family_ == GateFamily::Mlp) throw UnsupportedError("MLP gates have no center");
  return std::span<const double>(params_).first(dim_);
}

double GateSpec::sharpness() const {
  switch (family_) {
    case GateFamily::Mlp: throw UnsupportedError("MLP gates have no sharpness");
    case GateFamily::Radial: return positive(params_[dim_ + 1]);
    case GateFamily::Ellipsoid: return positive(params_[2 * dim_]);
    default: return positive(params_[dim_]);
  }
}

double GateSpec::inner_radius() const {
  if (!inner_) return 0.0;
  return positive(params_[dim_ + 1]);
}

void GateSpec::set_params(std::span<const double> values) {
  if (values.size() != params_.size()) throw InputShapeError("gate parameter count mismatch");
  std::copy(values.begin(), values.end(), params_.begin());
}

std::size_t GateSpec::shell_radius_offset() const noexcept { return dim_ + 1 + (inner_ ? 1 : 0); }

std::size_t gate_param_count(const GateSpec& spec) noexcept { return spec.param_count(); }

// ---------------------------------------------------------------------------
// Shape gate arguments

namespace {

bool monotone(Activation a) noexcept { return a == Activation::Sigmoid; }

struct ShellShape {
  double theta;
  double dtheta_dt;
  double dtheta_ds;
};

// Monotone activations see a score positive inside the shell and zero on its
// boundary; peaked activations see a coordinate that is zero at the shell's
// midpoint (or the center of a solid body) and +-1 on its boundary when the
// width factor 1 + s is one.
ShellShape shell_shape(Activation act, bool two_sided, double t, double s) noexcept {
  if (monotone(act)) {
    if (two_sided) return {s * 4.0 * t * (1.0 - t), s * 4.0 * (1.0 - 2.0 * t), 4.0 * t * (1.0 - t)};
    return {s * (1.0 - t), -s, 1.0 - t};
  }
  if (two_sided) return {(1.0 + s) * (2.0 * t - 1.0), 2.0 * (1.0 + s), 2.0 * t - 1.0};
  return {(1.0 + s) * t, 1.0 + s, t};
}

}  // namespace

double gate_argument(const GateSpec& spec, std::span<const double> x, std::span<double> dtheta) {
  const std::size_t d = spec.dim_;
  if (x.size() != d) {
    throw InputShapeError("gate input has " + std::to_string(x.size()) + " features, expected " +
                          std::to_string(d));
  }
  const auto& p = spec.params_;
  const bool want_grad = !dtheta.empty();
  if (want_grad) {
    if (dtheta.size() != p.size()) throw InputShapeError("gate gradient buffer has the wrong length");
    std::fill(dtheta.begin(), dtheta.end(), 0.0);
  }

  switch (spec.family_) {
    case GateFamily::Mlp:
      throw InternalError("gate_argument is not defined for MLP gates");

    case GateFamily::Radial: {
      double rho2 = 0.0;
      for (std::size_t j = 0; j < d; ++j) rho2 += (x[j] - p[j]) * (x[j] - p[j]);
      const double rho = std::sqrt(rho2);
      const double r = positive(p[d]);
      const double s = positive(p[d + 1]);
      if (want_grad) {
        if (rho > 0.0) {
          for (std::size_t j = 0; j < d; ++j) dtheta[j] = s * (x[j] - p[j]) / rho;
        }
        dtheta[d] = s * sigmoid(p[d]);
        dtheta[d + 1] = (r - rho) * sigmoid(p[d + 1]);
      }
      return s * (r - rho);
    }

    case GateFamily::Ellipsoid: {
      const double s = positive(p[2 * d]);
      const double b = p[2 * d + 1];
      double q = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double delta = x[j] - p[j];
        q += positive(p[d + j]) * delta * delta;
      }
      if (want_grad) {
        for (std::size_t j = 0; j < d; ++j) {
          const double delta = x[j] - p[j];
          dtheta[j] = 2.0 * s * positive(p[d + j]) * delta;
          dtheta[d + j] = -s * delta * delta * sigmoid(p[d + j]);
        }
        dtheta[2 * d] = (1.0 - q) * sigmoid(p[2 * d]);
        dtheta[2 * d + 1] = 1.0;
      }
      return s * (1.0 - q) + b;
    }

    case GateFamily::Shell:
    case GateFamily::FourierShell:
    case GateFamily::HarmonicShell:
      break;
  }

  // Shell family.
  std::vector<double> delta(d), n(d, 0.0);
  double rho2 = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    delta[j] = x[j] - p[j];
    rho2 += delta[j] * delta[j];
  }
  const double rho = std::sqrt(rho2);
  if (rho > 0.0) {
    for (std::size_t j = 0; j < d; ++j) n[j] = delta[j] / rho;
  } else {
    n[0] = 1.0;
  }
  const double s = positive(p[d]);
  const double r1 = spec.inner_ ? positive(p[d + 1]) : 0.0;
  const std::size_t ro = spec.shell_radius_offset();

  double R = 0.0;
  bool clamped = false;
  // dR/dc (through the direction) and dR/d(radius params), filled below
  std::vector<double> dR_dc(d, 0.0);
  std::vector<double> dR_dp;

  switch (spec.family_) {
    case GateFamily::Shell:
      R = positive(p[ro]);
      if (want_grad) dR_dp = {sigmoid(p[ro])};
      break;

    case GateFamily::FourierShell: {
      const std::size_t K = spec.order_;
      const double angle = rho > 0.0 ? std::atan2(n[1], n[0]) : 0.0;
      std::span<const double> a(p.data() + ro + 1, K), b(p.data() + ro + 1 + K, K);
      const double raw = fourier_raw(p[ro], a, b, angle);
      clamped = raw < kRadiusFloor;
      R = clamped ? kRadiusFloor : raw;
      if (want_grad && !clamped) {
        dR_dp.assign(2 * K + 1, 0.0);
        dR_dp[0] = 1.0;
        double dR_dangle = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
          const double kk = double(k + 1);
          dR_dp[1 + k] = std::cos(kk * angle);
          dR_dp[1 + K + k] = std::sin(kk * angle);
          dR_dangle += kk * (-a[k] * std::sin(kk * angle) + b[k] * std::cos(kk * angle));
        }
        if (rho > 0.0) {
          dR_dc[0] = dR_dangle * delta[1] / rho2;
          dR_dc[1] = -dR_dangle * delta[0] / rho2;
        }
      }
      break;
    }

    case GateFamily::HarmonicShell: {
      const auto monos = harmonic_monomials(d, spec.order_);
      double raw = 0.0;
      std::vector<double> grad_n(d, 0.0);
      if (want_grad) dR_dp.assign(monos.size(), 0.0);
      for (std::size_t m = 0; m < monos.size(); ++m) {
        const double v = monomial(monos[m], n);
        raw += p[ro + m] * v;
        if (want_grad) {
          dR_dp[m] = v;
          monomial_grad(monos[m], n, p[ro + m], grad_n);
        }
      }
      clamped = raw < kRadiusFloor;
      R = clamped ? kRadiusFloor : raw;
      if (want_grad && !clamped && rho > 0.0) {
        // dn/dc = -(I - n n^T) / rho
        double ng = 0.0;
        for (std::size_t j = 0; j < d; ++j) ng += n[j] * grad_n[j];
        for (std::size_t j = 0; j < d; ++j) dR_dc[j] = -(grad_n[j] - n[j] * ng) / rho;
      }
      if (clamped) dR_dp.assign(dR_dp.size(), 0.0);
      break;
    }

    default:
      break;
  }

  const double t = (rho - r1) / R;
  const ShellShape sh = shell_shape(spec.act_, spec.inner_, t, s);

  if (want_grad) {
    const double g_t = sh.dtheta_dt;
    for (std::size_t j = 0; j < d; ++j) {
      const double drho_dc = rho > 0.0 ? -n[j] : 0.0;
      dtheta[j] = g_t * (drho_dc / R - t / R * dR_dc[j]);
    }
    dtheta[d] = sh.dtheta_ds * sigmoid(p[d]);
    if (spec.inner_) dtheta[d + 1] = g_t * (-1.0 / R) * sigmoid(p[d + 1]);
    if (!clamped) {
      for (std::size_t k = 0; k < dR_dp.size(); ++k) dtheta[ro + k] = g_t * (-t / R) * dR_dp[k];
    }
  }
  return sh.theta;
}

// ---------------------------------------------------------------------------
// Evaluation and gradients

void gate_eval(const GateSpec& spec, const DenseMatrix& x, std::span<double> out, GateCache* cache) {
  const std::size_t n = x.rows();
  if (x.cols() != spec.input_dim()) {
    throw InputShapeError("gate input has " + std::to_string(x.cols()) + " features, expected " +
                          std::to_string(spec.input_dim()));
  }
  if (out.size() != n) throw InputShapeError("gate output buffer has the wrong length");
  if (cache != nullptr) {
    cache->argument.resize(n);
    cache->value.resize(n);
    cache->derivative.resize(n);
  }
  if (spec.family() == GateFamily::Mlp) {
    const MlpLayout& layout = spec.mlp_layout();
    auto net_params = spec.params().first(layout.param_count());
    DenseMatrix net = mlp_forward(layout, net_params, x, cache ? &cache->mlp : nullptr);
    const double beta = spec.has_bump_width() ? positive(spec.params().back()) : 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double theta = net(i, 0);
      const ActivationValue av = spec.has_bump_width() ? bump_tanh(theta, beta)
                                                       : activation_eval(spec.activation(), theta);
      out[i] = av.value;
      if (cache != nullptr) {
        cache->argument[i] = theta;
        cache->value[i] = av.value;
        cache->derivative[i] = av.derivative;
      }
    }
    return;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double theta = gate_argument(spec, x.row(i), {});
    const ActivationValue av = activation_eval(spec.activation(), theta);
    out[i] = av.value;
    if (cache != nullptr) {
      cache->argument[i] = theta;
      cache->value[i] = av.value;
      cache->derivative[i] = av.derivative;
    }
  }
}

double gate_eval(const GateSpec& spec, std::span<const double> x, GateCache* cache) {
  DenseMatrix row(1, x.size(), std::vector<double>(x.begin(), x.end()));
  double out = 0.0;
  gate_eval(spec, row, std::span<double>(&out, 1), cache);
  return out;
}

void gate_grad(const GateSpec& spec, const DenseMatrix& x, const GateCache& cache,
               std::span<const double> upstream, std::span<double> grad) {
  const std::size_t n = x.rows();
  if (upstream.size() != n || cache.derivative.size() != n) {
    throw InternalError("gate cache does not match the batch");
  }
  if (grad.size() != spec.param_count()) throw InputShapeError("gate gradient buffer has the wrong length");

  if (spec.family() == GateFamily::Mlp) {
    const MlpLayout& layout = spec.mlp_layout();
    DenseMatrix up(n, 1);
    for (std::size_t i = 0; i < n; ++i) up(i, 0) = upstream[i] * cache.derivative[i];
    mlp_backward(layout, spec.params().first(layout.param_count()), cache.mlp, up,
                 grad.first(layout.param_count()), false);
    if (spec.has_bump_width()) {
      // g = exp(-beta cosh^2 theta): dg/dbeta = -cosh^2(theta) g
      const double dbeta = sigmoid(spec.params().back());
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (cache.value[i] == 0.0) continue;
        const double c = std::cosh(cache.argument[i]);
        acc += upstream[i] * (-c * c * cache.value[i]);
      }
      grad.back() += acc * dbeta;
    }
    return;
  }

  std::vector<double> dtheta(spec.param_count());
  for (std::size_t i = 0; i < n; ++i) {
    const double w = upstream[i] * cache.derivative[i];
    if (w == 0.0) continue;
    gate_argument(spec, x.row(i), dtheta);
    for (std::size_t k = 0; k < dtheta.size(); ++k) grad[k] += w * dtheta[k];
  }
}

}  // namespace punn
