#pragma once

// Regularised non-negative least squares
//
//   min_{rho >= 0} sum_k w_k^2 ||A_k rho - d_k||^2 + lambda (||T rho||^2 + alpha ||P rho||^2)
//
// by accelerated projected gradient descent. T is the periodic 3D Laplacian
// on the padded mesh (or the identity), P selects a shell of voxels along
// the faces of the field of view.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mh3d/forward.hpp"
#include "mh3d/grid.hpp"

namespace mh3d {

enum class LambdaScale {
  relative,  // lambda multiplies the estimated ||W A||^2
  absolute,
};

enum class TikhonovPath { stencil, spectral };

/// Per-harmonic weights w_k in the data term sum_k w_k^2 ||A_k rho - d_k||^2.
enum class HarmonicWeighting {
  none,         // w_k = 1
  unit_energy,  // w_k = 1 / ||K_k||_2, so every harmonic enters at unit kernel energy
};

struct SolverConfig {
  double lambda = 1e-3;
  LambdaScale lambda_scale = LambdaScale::relative;
  /// 2: discrete Laplacian; 0: identity.
  int tikhonov_order = 2;
  TikhonovPath tikhonov_path = TikhonovPath::stencil;
  HarmonicWeighting harmonic_weighting = HarmonicWeighting::unit_energy;
  double alpha = 4.0;
  std::size_t boundary_margin = 2;
  bool nonneg = true;
  std::size_t max_iterations = 500;
  /// Stop when |F(k - window) - F(k)| / |F(k)| < tolerance; 0 disables.
  double tolerance = 1e-6;
  std::size_t tolerance_window = 10;
  double step_safety = 0.95;
  /// Fixed step when > 0; otherwise derived from power iteration.
  double fixed_step = 0.0;
  std::size_t power_iterations = 50;
  std::uint64_t seed = 1;

  void validate() const;
};

struct ObjectiveTerms {
  double total = 0.0;
  double data_fit = 0.0;     // sum_k w_k^2 ||A_k rho - d_k||^2
  double regularizer = 0.0;  // lambda_abs (||T rho||^2 + alpha ||P rho||^2)
};

struct SolveTrace {
  std::vector<ObjectiveTerms> objective;  // after each iteration
  std::vector<double> iteration_seconds;
  std::size_t iterations = 0;
  bool converged = false;
  std::string stop_reason;
  double operator_norm = 0.0;  // estimated ||W A||^2
  std::vector<double> harmonic_weights;
  double lambda_abs = 0.0;
  double step = 0.0;
  double setup_seconds = 0.0;
  double total_seconds = 0.0;
  double projected_gradient = 0.0;  // ||rho - proj(rho - tau grad)|| / ||rho||

  /// iteration, objective, data_fit, regularizer, seconds
  std::string to_csv() const;
};

struct ReconResult {
  Volume rho;         // cropped to the field of view
  Volume rho_padded;  // full padded estimate
  SolveTrace trace;
  double residual = 0.0;  // final unweighted ||A rho - d||
};

class SolverDivergence : public std::runtime_error {
 public:
  SolverDivergence(const std::string& what, SolveTrace trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const SolveTrace& trace() const { return trace_; }

 private:
  SolveTrace trace_;
};

/// 7-point periodic Laplacian (order 2) or identity (order 0).
Volume apply_tikhonov(const Volume& rho, int order = 2);
void apply_tikhonov(std::span<const double> rho, const Shape3& shape, int order,
                    std::span<double> out);
/// T^T T by two stencil passes, or by its Fourier symbol.
Volume tikhonov_normal_stencil(const Volume& rho, int order = 2);
Volume tikhonov_normal_spectral(const Volume& rho, int order = 2);
/// Largest eigenvalue of T^T T on a periodic mesh (144 for the 3D Laplacian).
double tikhonov_normal_bound(int order);

/// Voxels within `margin` of any face of `shape` (all voxels when margin
/// reaches the half-extent). Indices are x-fastest.
std::vector<std::size_t> boundary_selector(const Shape3& shape, std::size_t margin);

/// Boundary shell of the model's field of view, as padded-mesh indices.
std::vector<std::size_t> padded_boundary_selector(const ForwardModel& model, std::size_t margin);

std::vector<double> harmonic_weights(const ForwardModel& model, HarmonicWeighting weighting);

/// Largest eigenvalue of (W A)^T (W A) by power iteration from a seeded
/// random start. Empty weights mean W = I.
double estimate_operator_norm(const ForwardModel& model, std::size_t iterations,
                              std::uint64_t seed, const std::vector<double>& weights = {});

/// Objective and gradient on the padded mesh for a fixed absolute lambda.
class Problem {
 public:
  Problem(const ForwardModel& model, std::span<const double> data, const SolverConfig& config,
          double lambda_abs);

  ObjectiveTerms objective(std::span<const double> rho) const;
  /// 2 (W A)^T (W A rho - W d) + 2 lambda (T^T T rho + alpha P^T P rho)
  void gradient(std::span<const double> rho, std::span<double> grad) const;

  const ForwardModel& model() const { return model_; }
  double lambda_abs() const { return lambda_; }
  const std::vector<std::size_t>& boundary() const { return boundary_; }
  const std::vector<double>& weights() const { return weights_; }
  /// W d
  const std::vector<double>& weighted_data() const { return data_; }

  // Pieces reused by the solver loop.
  void forward(std::span<const double> rho, std::span<double> out) const;   // W A rho
  void adjoint(std::span<const double> r, std::span<double> out) const;     // (W A)^T r
  double regularizer(std::span<const double> rho) const;
  void add_regularizer_gradient(std::span<const double> rho, std::span<double> grad) const;

 private:
  const ForwardModel& model_;
  std::vector<double> data_;
  SolverConfig config_;
  double lambda_;
  std::vector<double> weights_;
  std::vector<std::size_t> boundary_;
};

ReconResult reconstruct(const std::vector<double>& data, const ForwardModel& model,
                        const SolverConfig& config);

/// Sign per harmonic (+1 / -1) that makes the single-harmonic matched filter
/// A_k^T d_k positive where it is strongest. Resolves the pi ambiguity left
/// by the phase estimator for a non-negative image.
std::vector<int> resolve_sign_ambiguity(const ForwardModel& model, std::vector<double>& data);

}  // namespace mh3d
