#include "mh3d/solve.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "mh3d/fft.hpp"
#include "mh3d/simd.hpp"

namespace mh3d {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

void scale_blocks(std::span<double> v, const std::vector<double>& w) {
  if (w.empty()) return;
  const std::size_t block = v.size() / w.size();
  for (std::size_t h = 0; h < w.size(); ++h) {
    for (std::size_t i = h * block; i < (h + 1) * block; ++i) v[i] *= w[h];
  }
}

}  // namespace

void SolverConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("solver: lambda must be >= 0");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("solver: alpha must be >= 0");
  if (max_iterations < 1) throw std::invalid_argument("solver: max_iterations must be >= 1");
  if (tikhonov_order != 0 && tikhonov_order != 2) {
    throw std::invalid_argument("solver: tikhonov_order must be 0 or 2");
  }
  if (alpha > 0.0 && boundary_margin < 1) throw std::invalid_argument("solver: boundary_margin must be >= 1");
  if (!(tolerance >= 0.0)) throw std::invalid_argument("solver: tolerance must be >= 0");
  if (tolerance > 0.0 && tolerance_window < 1) throw std::invalid_argument("solver: tolerance_window must be >= 1");
  if (!(step_safety > 0.0 && step_safety <= 1.0)) throw std::invalid_argument("solver: step_safety must be in (0, 1]");
  if (!(fixed_step >= 0.0)) throw std::invalid_argument("solver: fixed_step must be >= 0");
  if (fixed_step == 0.0 && power_iterations < 1) {
    throw std::invalid_argument("solver: power_iterations must be >= 1");
  }
}

std::string SolveTrace::to_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "iteration,objective,data_fit,regularizer,seconds\n";
  for (std::size_t i = 0; i < objective.size(); ++i) {
    os << i + 1 << ',' << objective[i].total << ',' << objective[i].data_fit << ','
       << objective[i].regularizer << ',' << (i < iteration_seconds.size() ? iteration_seconds[i] : 0.0)
       << '\n';
  }
  return os.str();
}

void apply_tikhonov(std::span<const double> rho, const Shape3& s, int order, std::span<double> out) {
  if (rho.size() != s.size() || out.size() != s.size()) {
    throw std::invalid_argument("apply_tikhonov: size mismatch");
  }
  if (order == 0) {
    std::copy(rho.begin(), rho.end(), out.begin());
    return;
  }
  if (order != 2) throw std::invalid_argument("apply_tikhonov: order must be 0 or 2");
  const std::size_t nx = s.nx, ny = s.ny, nz = s.nz, sxy = nx * ny;
  for (std::size_t k = 0; k < nz; ++k) {
    const std::size_t km = (k + nz - 1) % nz, kp = (k + 1) % nz;
    for (std::size_t j = 0; j < ny; ++j) {
      const std::size_t jm = (j + ny - 1) % ny, jp = (j + 1) % ny;
      const double* c = rho.data() + nx * (j + ny * k);
      const double* ym = rho.data() + nx * (jm + ny * k);
      const double* yp = rho.data() + nx * (jp + ny * k);
      const double* zm = rho.data() + nx * j + sxy * km;
      const double* zp = rho.data() + nx * j + sxy * kp;
      double* o = out.data() + nx * (j + ny * k);
      for (std::size_t i = 0; i < nx; ++i) {
        const std::size_t im = i == 0 ? nx - 1 : i - 1, ip = i + 1 == nx ? 0 : i + 1;
        o[i] = c[im] + c[ip] + ym[i] + yp[i] + zm[i] + zp[i] - 6.0 * c[i];
      }
    }
  }
}

Volume apply_tikhonov(const Volume& rho, int order) {
  Volume out(rho.shape());
  apply_tikhonov(rho.values(), rho.shape(), order, out.values());
  return out;
}

Volume tikhonov_normal_stencil(const Volume& rho, int order) {
  return apply_tikhonov(apply_tikhonov(rho, order), order);
}

Volume tikhonov_normal_spectral(const Volume& rho, int order) {
  if (order == 0) return rho;
  if (order != 2) throw std::invalid_argument("tikhonov_normal_spectral: order must be 0 or 2");
  const Shape3 s = rho.shape();
  fft::Real3D plan(s);
  fft::AlignedVector<double> work(rho.begin(), rho.end());
  fft::AlignedVector<cdouble> spec(plan.spectrum_size());
  plan.forward(work.data(), spec.data());
  auto symbol = [](std::size_t q, std::size_t n) {
    return 2.0 * std::cos(2.0 * std::numbers::pi * static_cast<double>(q) / static_cast<double>(n)) - 2.0;
  };
  const double scale = 1.0 / static_cast<double>(s.size());
  for (std::size_t qz = 0; qz < s.nz; ++qz) {
    for (std::size_t qy = 0; qy < s.ny; ++qy) {
      for (std::size_t qx = 0; qx <= s.nx / 2; ++qx) {
        const double l = symbol(qx, s.nx) + symbol(qy, s.ny) + symbol(qz, s.nz);
        spec[plan.spectrum_index(qx, qy, qz)] *= l * l * scale;
      }
    }
  }
  plan.inverse(spec.data(), work.data());
  Volume out(s);
  std::copy(work.begin(), work.end(), out.begin());
  return out;
}

double tikhonov_normal_bound(int order) {
  if (order == 0) return 1.0;
  if (order == 2) return 144.0;
  throw std::invalid_argument("tikhonov_normal_bound: order must be 0 or 2");
}

std::vector<std::size_t> boundary_selector(const Shape3& s, std::size_t margin) {
  if (margin < 1) throw std::invalid_argument("boundary_selector: margin must be >= 1");
  std::vector<std::size_t> out;
  auto near_face = [margin](std::size_t i, std::size_t n) { return i < margin || i + margin >= n; };
  for (std::size_t k = 0; k < s.nz; ++k) {
    for (std::size_t j = 0; j < s.ny; ++j) {
      for (std::size_t i = 0; i < s.nx; ++i) {
        if (near_face(i, s.nx) || near_face(j, s.ny) || near_face(k, s.nz)) {
          out.push_back(i + s.nx * (j + s.ny * k));
        }
      }
    }
  }
  return out;
}

std::vector<std::size_t> padded_boundary_selector(const ForwardModel& model, std::size_t margin) {
  const Shape3 f = model.fov_shape();
  const Shape3 p = model.padded_shape();
  const auto& off = model.offset();
  std::vector<std::size_t> out = boundary_selector(f, margin);
  for (auto& idx : out) {
    const std::size_t i = idx % f.nx, j = (idx / f.nx) % f.ny, k = idx / (f.nx * f.ny);
    idx = (i + off[0]) + p.nx * ((j + off[1]) + p.ny * (k + off[2]));
  }
  return out;
}

std::vector<double> harmonic_weights(const ForwardModel& model, HarmonicWeighting weighting) {
  std::vector<double> w(model.harmonics().size(), 1.0);
  if (weighting == HarmonicWeighting::unit_energy) {
    for (std::size_t h = 0; h < w.size(); ++h) {
      const double e = model.kernel_energy(h);
      if (!(e > 0.0)) throw std::invalid_argument("harmonic_weights: zero kernel");
      w[h] = 1.0 / std::sqrt(e);
    }
  }
  return w;
}

double estimate_operator_norm(const ForwardModel& model, std::size_t iterations, std::uint64_t seed,
                              const std::vector<double>& weights) {
  if (!weights.empty() && weights.size() != model.harmonics().size()) {
    throw std::invalid_argument("estimate_operator_norm: one weight per harmonic required");
  }
  const std::size_t n = model.image_size();
  std::vector<double> v(n), w(n), ad(model.data_size());
  std::vector<double> w2 = weights;
  for (auto& x : w2) x *= x;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto& x : v) x = u(rng);
  double norm = std::sqrt(simd::sum_squares(v));
  double estimate = 0.0;
  for (std::size_t it = 0; it < iterations; ++it) {
    for (auto& x : v) x /= norm;
    model.forward(v, ad);
    scale_blocks(ad, w2);
    model.adjoint(ad, w);
    estimate = simd::dot(v, w);  // Rayleigh quotient
    norm = std::sqrt(simd::sum_squares(w));
    if (!(norm > 0.0)) return 0.0;
    std::swap(v, w);
  }
  return std::max(estimate, norm);
}

Problem::Problem(const ForwardModel& model, std::span<const double> data, const SolverConfig& config,
                 double lambda_abs)
    : model_(model), data_(data.begin(), data.end()), config_(config), lambda_(lambda_abs) {
  config_.validate();
  if (data.size() != model.data_size()) throw std::invalid_argument("Problem: data size mismatch");
  weights_ = harmonic_weights(model, config_.harmonic_weighting);
  scale_blocks(data_, weights_);
  if (config_.alpha > 0.0) boundary_ = padded_boundary_selector(model, config_.boundary_margin);
}

void Problem::forward(std::span<const double> rho, std::span<double> out) const {
  model_.forward(rho, out);
  scale_blocks(out, weights_);
}

void Problem::adjoint(std::span<const double> r, std::span<double> out) const {
  std::vector<double> tmp(r.begin(), r.end());
  scale_blocks(tmp, weights_);
  model_.adjoint(tmp, out);
}

double Problem::regularizer(std::span<const double> rho) const {
  if (lambda_ == 0.0) return 0.0;
  std::vector<double> t(rho.size());
  apply_tikhonov(rho, model_.padded_shape(), config_.tikhonov_order, t);
  double r = simd::sum_squares(t);
  if (config_.alpha > 0.0) {
    double b = 0.0;
    for (std::size_t i : boundary_) b += rho[i] * rho[i];
    r += config_.alpha * b;
  }
  return lambda_ * r;
}

void Problem::add_regularizer_gradient(std::span<const double> rho, std::span<double> grad) const {
  if (lambda_ == 0.0) return;
  const Shape3& s = model_.padded_shape();
  if (config_.tikhonov_path == TikhonovPath::spectral && config_.tikhonov_order == 2) {
    Volume v(s);
    std::copy(rho.begin(), rho.end(), v.begin());
    const Volume ttr = tikhonov_normal_spectral(v, 2);
    simd::axpy(2.0 * lambda_, ttr.values(), grad);
  } else {
    std::vector<double> t(rho.size()), tt(rho.size());
    apply_tikhonov(rho, s, config_.tikhonov_order, t);
    apply_tikhonov(t, s, config_.tikhonov_order, tt);
    simd::axpy(2.0 * lambda_, tt, grad);
  }
  if (config_.alpha > 0.0) {
    const double c = 2.0 * lambda_ * config_.alpha;
    for (std::size_t i : boundary_) grad[i] += c * rho[i];
  }
}

ObjectiveTerms Problem::objective(std::span<const double> rho) const {
  std::vector<double> r(model_.data_size());
  forward(rho, r);
  simd::axpy(-1.0, data_, r);
  ObjectiveTerms o;
  o.data_fit = simd::sum_squares(r);
  o.regularizer = regularizer(rho);
  o.total = o.data_fit + o.regularizer;
  return o;
}

void Problem::gradient(std::span<const double> rho, std::span<double> grad) const {
  std::vector<double> r(model_.data_size());
  forward(rho, r);
  simd::axpy(-1.0, data_, r);
  adjoint(r, grad);
  for (auto& g : grad) g *= 2.0;
  add_regularizer_gradient(rho, grad);
}

ReconResult reconstruct(const std::vector<double>& data, const ForwardModel& model,
                        const SolverConfig& config) {
  config.validate();
  if (data.size() != model.data_size()) throw std::invalid_argument("reconstruct: data size mismatch");
  for (double d : data) {
    if (!std::isfinite(d)) throw std::invalid_argument("reconstruct: non-finite data");
  }
  const auto t_start = Clock::now();
  const std::size_t n = model.image_size();
  ReconResult result;
  result.rho_padded = Volume(model.padded_shape());
  SolveTrace& trace = result.trace;

  if (simd::sum_squares(data) == 0.0) {
    trace.stop_reason = "zero data";
    trace.converged = true;
    result.rho = model.crop(result.rho_padded);
    return result;
  }

  const double bound_t = tikhonov_normal_bound(config.tikhonov_order);
  trace.harmonic_weights = harmonic_weights(model, config.harmonic_weighting);
  if (config.fixed_step > 0.0) {
    trace.step = config.fixed_step;
    trace.lambda_abs = config.lambda;
    if (config.lambda_scale == LambdaScale::relative) {
      trace.operator_norm =
          estimate_operator_norm(model, config.power_iterations, config.seed, trace.harmonic_weights);
      trace.lambda_abs = config.lambda * trace.operator_norm;
    }
  } else {
    trace.operator_norm =
        estimate_operator_norm(model, config.power_iterations, config.seed, trace.harmonic_weights);
    trace.lambda_abs = config.lambda_scale == LambdaScale::relative
                           ? config.lambda * trace.operator_norm
                           : config.lambda;
    const double lip = 2.0 * (trace.operator_norm + trace.lambda_abs * (bound_t + config.alpha));
    if (!(lip > 0.0)) throw std::invalid_argument("reconstruct: model operator is zero");
    trace.step = config.step_safety / lip;
  }
  const Problem problem(model, data, config, trace.lambda_abs);
  const std::vector<double>& wdata = problem.weighted_data();
  const double tau = trace.step;
  trace.setup_seconds = seconds_since(t_start);

  // Iterates and their images under A; A y follows by linearity.
  std::vector<double> rho(n, 0.0), rho_prev(n, 0.0), y(n), grad(n);
  std::vector<double> a_rho(data.size(), 0.0), a_prev(data.size(), 0.0), a_y(data.size()),
      resid(data.size());

  for (std::size_t it = 1; it <= config.max_iterations; ++it) {
    const auto t_iter = Clock::now();
    const double beta = static_cast<double>(it - 1) / static_cast<double>(it + 2);
    simd::extrapolate(rho, rho_prev, beta, y);
    simd::extrapolate(a_rho, a_prev, beta, a_y);

    // resid = W A y - W d; grad = 2 (W A)^T resid + regulariser
    std::copy(a_y.begin(), a_y.end(), resid.begin());
    simd::axpy(-1.0, wdata, resid);
    problem.adjoint(resid, grad);
    for (auto& g : grad) g *= 2.0;
    problem.add_regularizer_gradient(y, grad);

    std::swap(rho_prev, rho);
    std::swap(a_prev, a_rho);
    simd::projected_step(y, grad, tau, config.nonneg, rho);
    problem.forward(rho, a_rho);

    std::copy(a_rho.begin(), a_rho.end(), resid.begin());
    simd::axpy(-1.0, wdata, resid);
    ObjectiveTerms o;
    o.data_fit = simd::sum_squares(resid);
    o.regularizer = problem.regularizer(rho);
    o.total = o.data_fit + o.regularizer;
    trace.objective.push_back(o);
    trace.iteration_seconds.push_back(seconds_since(t_iter));
    trace.iterations = it;

    if (!std::isfinite(o.total)) {
      trace.stop_reason = "non-finite objective";
      trace.total_seconds = seconds_since(t_start);
      throw SolverDivergence("reconstruct: objective became non-finite at iteration " +
                                 std::to_string(it),
                             trace);
    }
    if (config.tolerance > 0.0 && it > config.tolerance_window) {
      const double before = trace.objective[it - 1 - config.tolerance_window].total;
      const double denom = std::max(std::abs(o.total), std::numeric_limits<double>::min());
      if (std::abs(before - o.total) / denom < config.tolerance) {
        trace.converged = true;
        trace.stop_reason = "relative objective change below tolerance";
        break;
      }
    }
  }
  if (trace.stop_reason.empty()) trace.stop_reason = "max_iterations";

  // Projected-gradient residual at the final iterate.
  problem.gradient(rho, grad);
  std::vector<double> step(n);
  simd::projected_step(rho, grad, tau, config.nonneg, step);
  double num = 0.0;
  for (std::size_t i = 0; i < n; ++i) num += (rho[i] - step[i]) * (rho[i] - step[i]);
  const double den = simd::sum_squares(rho);
  trace.projected_gradient = den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);

  std::copy(rho.begin(), rho.end(), result.rho_padded.begin());
  result.rho = model.crop(result.rho_padded);
  model.forward(rho, resid);
  simd::axpy(-1.0, data, resid);
  result.residual = std::sqrt(simd::sum_squares(resid));
  trace.total_seconds = seconds_since(t_start);
  return result;
}

std::vector<int> resolve_sign_ambiguity(const ForwardModel& model, std::vector<double>& data) {
  if (data.size() != model.data_size()) throw std::invalid_argument("resolve_sign_ambiguity: size mismatch");
  const std::size_t nh = model.harmonics().size();
  const std::size_t block = data.size() / nh;
  std::vector<int> signs(nh, 1);
  std::vector<double> single(data.size()), back(model.image_size());
  for (std::size_t h = 0; h < nh; ++h) {
    std::fill(single.begin(), single.end(), 0.0);
    std::copy(data.begin() + h * block, data.begin() + (h + 1) * block, single.begin() + h * block);
    model.adjoint(single, back);
    // Signed sum over the strongest 1% of the matched-filter output.
    std::vector<std::size_t> order(back.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    const std::size_t keep = std::max<std::size_t>(1, back.size() / 100);
    std::partial_sort(order.begin(), order.begin() + keep, order.end(),
                      [&](std::size_t a, std::size_t b) { return std::abs(back[a]) > std::abs(back[b]); });
    double s = 0.0;
    for (std::size_t i = 0; i < keep; ++i) s += back[order[i]];
    if (s < 0.0) {
      signs[h] = -1;
      for (std::size_t i = h * block; i < (h + 1) * block; ++i) data[i] = -data[i];
    }
  }
  return signs;
}

}  // namespace mh3d
