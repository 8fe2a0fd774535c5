#ifndef KRAMERS_LEAST_SQUARES_HPP
#define KRAMERS_LEAST_SQUARES_HPP

#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace kramers {

struct fit_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct rank_deficiency_error : fit_error {
  using fit_error::fit_error;
};

struct Parameter {
  std::string name;
  double value = 0.0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  bool fixed = false;
};

/// Observations. Empty weights mean unit weights; for Poisson-like counting
/// noise pass weights = 1 / max(y, floor).
struct Dataset {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> weights;
};

/// Writes model predictions for every x given the full parameter vector.
using ModelFunction =
    std::function<void(std::span<const double> params, std::span<const double> x, std::span<double> out)>;
/// Writes d(model)/d(param), one row per x, one column per parameter.
using JacobianFunction = std::function<void(std::span<const double> params,
                                            std::span<const double> x, Eigen::MatrixXd& jac)>;

struct Model {
  ModelFunction evaluate;
  JacobianFunction jacobian;  // optional; forward differences otherwise
};

struct SolverOptions {
  int max_iterations = 500;
  double parameter_tolerance = 1e-8;
  double residual_tolerance = 1e-10;
  double fd_relative_step = 1e-6;
  // scale the covariance by the reduced chi-square (unknown noise level)
  bool scale_covariance = true;
};

struct DerivedQuantity {
  std::string name;
  double value = 0.0;
  double error = 0.0;
};

struct FitResult {
  std::vector<std::string> names;
  std::vector<double> parameters;
  std::vector<double> standard_errors;
  Eigen::MatrixXd covariance;
  double residual_norm = 0.0;
  double initial_residual_norm = 0.0;
  bool converged = false;
  bool rank_deficient = false;
  int iterations = 0;
  std::size_t degrees_of_freedom = 0;
  std::string message;
  std::vector<DerivedQuantity> derived;
  std::vector<std::string> flags;

  std::size_t index(std::string_view name) const;
  double value(std::string_view name) const { return parameters[index(name)]; }
  double error(std::string_view name) const { return standard_errors[index(name)]; }
  const DerivedQuantity& derived_quantity(std::string_view name) const;
  bool has_flag(std::string_view flag) const;
};

/// Damped Gauss-Newton (Levenberg-Marquardt with Marquardt diagonal scaling)
/// with box constraints. Parameters at a bound whose gradient points outward
/// are frozen for the iteration. Stops when the relative parameter step drops
/// below parameter_tolerance or the relative decrease of the residual sum of
/// squares drops below residual_tolerance; after max_iterations the best
/// point is returned with converged = false.
///
/// Throws fit_error when the model is non-finite at the initial point and
/// std::invalid_argument for malformed data or an initial point outside its bounds.
FitResult least_squares(const Model& model, const Dataset& data, std::vector<Parameter> init,
                        const SolverOptions& options = {});

/// Forward-difference Jacobian of the model, as used by the solver.
Eigen::MatrixXd finite_difference_jacobian(const ModelFunction& f, std::span<const double> params,
                                           std::span<const double> x, double relative_step,
                                           std::span<const double> upper = {});

/// a / b with first-order error propagation from the fit covariance.
DerivedQuantity ratio_with_error(const FitResult& fit, std::string_view numerator,
                                 std::string_view denominator, std::string name);

}  // namespace kramers

#endif
