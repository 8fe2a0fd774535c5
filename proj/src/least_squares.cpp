#include "kramers/least_squares.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/core.h>
#include <fmt/ranges.h>

namespace kramers {

namespace {

struct Evaluator {
  const Model& model;
  const Dataset& data;
  std::vector<double> sqrt_w;
  std::vector<double> prediction;

  Evaluator(const Model& m, const Dataset& d) : model(m), data(d), prediction(d.x.size()) {
    sqrt_w.resize(d.x.size(), 1.0);
    for (std::size_t i = 0; i < d.weights.size(); ++i) {
      sqrt_w[i] = std::sqrt(d.weights[i]);
    }
  }

  // false when the model produced a non-finite value
  bool residuals(const Eigen::VectorXd& p, Eigen::VectorXd& r) {
    model.evaluate({p.data(), static_cast<std::size_t>(p.size())}, data.x, prediction);
    r.resize(static_cast<Eigen::Index>(data.y.size()));
    for (std::size_t i = 0; i < data.y.size(); ++i) {
      if (!std::isfinite(prediction[i])) {
        return false;
      }
      r[static_cast<Eigen::Index>(i)] = sqrt_w[i] * (data.y[i] - prediction[i]);
    }
    return true;
  }

  // d(residual)/d(param) for all parameters
  Eigen::MatrixXd residual_jacobian(const Eigen::VectorXd& p, const std::vector<double>& upper,
                                    double rel_step) {
    const std::span<const double> ps{p.data(), static_cast<std::size_t>(p.size())};
    Eigen::MatrixXd jac(static_cast<Eigen::Index>(data.x.size()), p.size());
    if (model.jacobian) {
      model.jacobian(ps, data.x, jac);
    } else {
      jac = finite_difference_jacobian(model.evaluate, ps, data.x, rel_step, upper);
    }
    for (Eigen::Index i = 0; i < jac.rows(); ++i) {
      jac.row(i) *= -sqrt_w[static_cast<std::size_t>(i)];
    }
    return jac;
  }
};

std::string describe(const std::vector<std::string>& names, const Eigen::VectorXd& p) {
  std::vector<std::string> parts;
  for (std::size_t i = 0; i < names.size(); ++i) {
    parts.push_back(fmt::format("{}={}", names[i], p[static_cast<Eigen::Index>(i)]));
  }
  return fmt::format("{}", fmt::join(parts, ", "));
}

}  // namespace

std::size_t FitResult::index(std::string_view name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) {
    throw std::out_of_range(fmt::format("no fit parameter '{}'", name));
  }
  return static_cast<std::size_t>(it - names.begin());
}

const DerivedQuantity& FitResult::derived_quantity(std::string_view name) const {
  for (const auto& d : derived) {
    if (d.name == name) {
      return d;
    }
  }
  throw std::out_of_range(fmt::format("no derived quantity '{}'", name));
}

bool FitResult::has_flag(std::string_view flag) const {
  return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

Eigen::MatrixXd finite_difference_jacobian(const ModelFunction& f, std::span<const double> params,
                                           std::span<const double> x, double relative_step,
                                           std::span<const double> upper) {
  const std::size_t m = x.size();
  const std::size_t n = params.size();
  std::vector<double> base(m);
  std::vector<double> shifted(m);
  std::vector<double> p(params.begin(), params.end());
  f(p, x, base);

  Eigen::MatrixXd jac(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    double h = relative_step * std::max(std::abs(params[j]), 1e-3);
    if (!upper.empty() && params[j] + h > upper[j]) {
      h = -h;
    }
    p[j] = params[j] + h;
    h = p[j] - params[j];
    f(p, x, shifted);
    for (std::size_t i = 0; i < m; ++i) {
      jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (shifted[i] - base[i]) / h;
    }
    p[j] = params[j];
  }
  return jac;
}

FitResult least_squares(const Model& model, const Dataset& data, std::vector<Parameter> init,
                        const SolverOptions& options) {
  const std::size_t m = data.x.size();
  const std::size_t n = init.size();
  if (data.y.size() != m || (!data.weights.empty() && data.weights.size() != m)) {
    throw std::invalid_argument("x, y and weights must have equal length");
  }
  for (std::size_t i = 0; i < m; ++i) {
    if (!std::isfinite(data.x[i]) || !std::isfinite(data.y[i]) ||
        (!data.weights.empty() && !(data.weights[i] >= 0.0 && std::isfinite(data.weights[i])))) {
      throw std::invalid_argument(fmt::format("non-finite data or negative weight at index {}", i));
    }
  }

  FitResult result;
  Eigen::VectorXd p(static_cast<Eigen::Index>(n));
  std::vector<double> lower(n);
  std::vector<double> upper(n);
  std::vector<std::size_t> free;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& par = init[i];
    if (!(par.value >= par.lower && par.value <= par.upper)) {
      throw std::invalid_argument(fmt::format("initial value of '{}' ({}) outside [{}, {}]",
                                              par.name, par.value, par.lower, par.upper));
    }
    result.names.push_back(par.name);
    p[static_cast<Eigen::Index>(i)] = par.value;
    lower[i] = par.lower;
    upper[i] = par.upper;
    if (!par.fixed) {
      free.push_back(i);
    }
  }
  result.degrees_of_freedom = m > free.size() ? m - free.size() : 0;

  Evaluator eval(model, data);
  Eigen::VectorXd r;
  if (!eval.residuals(p, r)) {
    throw fit_error("model output is not finite at " + describe(result.names, p));
  }
  double cost = r.squaredNorm();
  result.initial_residual_norm = std::sqrt(cost);

  const double xtol = options.parameter_tolerance;
  double lambda = -1.0;
  double nu = 2.0;
  bool done = false;
  int iter = 0;
  std::string message = "maximum iterations reached";

  while (!done && iter < options.max_iterations && !free.empty()) {
    ++iter;
    if (cost == 0.0) {
      done = true;
      message = "zero residual";
      break;
    }
    const Eigen::MatrixXd jac_all = eval.residual_jacobian(p, upper, options.fd_relative_step);
    const Eigen::VectorXd grad_all = jac_all.transpose() * r;

    // free parameters not pinned against a bound by the descent direction
    std::vector<std::size_t> active;
    for (std::size_t idx : free) {
      const double descent = -grad_all[static_cast<Eigen::Index>(idx)];
      const double v = p[static_cast<Eigen::Index>(idx)];
      if ((v <= lower[idx] && descent < 0.0) || (v >= upper[idx] && descent > 0.0)) {
        continue;
      }
      active.push_back(idx);
    }
    if (active.empty()) {
      done = true;
      message = "all free parameters at bounds";
      break;
    }

    const auto k = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd jac(jac_all.rows(), k);
    Eigen::VectorXd grad(k);
    for (Eigen::Index c = 0; c < k; ++c) {
      jac.col(c) = jac_all.col(static_cast<Eigen::Index>(active[static_cast<std::size_t>(c)]));
      grad[c] = grad_all[static_cast<Eigen::Index>(active[static_cast<std::size_t>(c)])];
    }
    if (grad.lpNorm<Eigen::Infinity>() == 0.0) {
      done = true;
      message = "zero gradient";
      break;
    }
    const Eigen::MatrixXd a = jac.transpose() * jac;
    Eigen::VectorXd diag = a.diagonal();
    const double diag_max = std::max(diag.maxCoeff(), 1e-300);
    for (Eigen::Index c = 0; c < k; ++c) {
      diag[c] = std::max(diag[c], 1e-12 * diag_max);
    }
    if (lambda < 0.0) {
      lambda = 1e-3;
    }

    while (true) {
      Eigen::MatrixXd damped = a;
      damped.diagonal() += lambda * diag;
      const Eigen::VectorXd delta = damped.ldlt().solve(-grad);

      Eigen::VectorXd trial = p;
      for (Eigen::Index c = 0; c < k; ++c) {
        const std::size_t idx = active[static_cast<std::size_t>(c)];
        const auto e = static_cast<Eigen::Index>(idx);
        trial[e] = std::clamp(p[e] + delta[c], lower[idx], upper[idx]);
      }
      const Eigen::VectorXd step = trial - p;
      if (!step.allFinite()) {
        throw fit_error("non-finite step at " + describe(result.names, p));
      }
      if (step.norm() <= xtol * (p.norm() + xtol)) {
        done = true;
        message = "parameter change below tolerance";
        break;
      }

      Eigen::VectorXd step_active(k);
      for (Eigen::Index c = 0; c < k; ++c) {
        step_active[c] = step[static_cast<Eigen::Index>(active[static_cast<std::size_t>(c)])];
      }
      const double predicted = -(2.0 * step_active.dot(grad) + step_active.dot(a * step_active));

      Eigen::VectorXd r_trial;
      const bool finite = eval.residuals(trial, r_trial);
      const double cost_trial = finite ? r_trial.squaredNorm() : std::numeric_limits<double>::infinity();

      if (finite && cost_trial < cost) {
        const double rho = predicted > 0.0 ? (cost - cost_trial) / predicted : 0.0;
        const double rel_decrease = (cost - cost_trial) / cost;
        p = trial;
        r = r_trial;
        cost = cost_trial;
        lambda *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
        lambda = std::max(lambda, 1e-15);
        nu = 2.0;
        if (rel_decrease < options.residual_tolerance) {
          done = true;
          message = "residual change below tolerance";
        }
        break;
      }
      lambda *= nu;
      nu *= 2.0;
      if (lambda > 1e30) {
        done = true;
        message = "no further decrease possible";
        break;
      }
    }
  }
  if (free.empty()) {
    done = true;
    message = "no free parameters";
  }

  result.converged = done;
  result.iterations = iter;
  result.message = message;
  result.parameters.assign(p.data(), p.data() + p.size());
  result.residual_norm = std::sqrt(cost);

  // covariance over free parameters that are not sitting on a bound
  result.covariance = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  result.standard_errors.assign(n, 0.0);
  std::vector<std::size_t> interior;
  for (std::size_t idx : free) {
    const double v = p[static_cast<Eigen::Index>(idx)];
    if (v > lower[idx] && v < upper[idx]) {
      interior.push_back(idx);
    }
  }
  if (!interior.empty()) {
    const Eigen::MatrixXd jac_all = eval.residual_jacobian(p, upper, options.fd_relative_step);
    const auto k = static_cast<Eigen::Index>(interior.size());
    Eigen::MatrixXd jac(jac_all.rows(), k);
    for (Eigen::Index c = 0; c < k; ++c) {
      jac.col(c) = jac_all.col(static_cast<Eigen::Index>(interior[static_cast<std::size_t>(c)]));
    }
    const Eigen::MatrixXd a = jac.transpose() * jac;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    const Eigen::VectorXd ev = es.eigenvalues();
    const double cutoff = 1e-12 * std::max(ev.maxCoeff(), 0.0);
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(k);
    for (Eigen::Index c = 0; c < k; ++c) {
      if (ev[c] > cutoff && ev[c] > 0.0) {
        inv[c] = 1.0 / ev[c];
      } else {
        result.rank_deficient = true;
      }
    }
    const Eigen::MatrixXd a_inv = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
    const double dof = static_cast<double>(std::max<std::size_t>(result.degrees_of_freedom, 1));
    const double s2 = options.scale_covariance ? cost / dof : 1.0;
    for (Eigen::Index i = 0; i < k; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) {
        result.covariance(static_cast<Eigen::Index>(interior[static_cast<std::size_t>(i)]),
                          static_cast<Eigen::Index>(interior[static_cast<std::size_t>(j)])) =
            s2 * a_inv(i, j);
      }
    }
    for (std::size_t idx : interior) {
      const auto e = static_cast<Eigen::Index>(idx);
      result.standard_errors[idx] = std::sqrt(std::max(result.covariance(e, e), 0.0));
    }
  }
  if (result.rank_deficient) {
    result.flags.emplace_back("rank_deficient");
  }
  return result;
}

DerivedQuantity ratio_with_error(const FitResult& fit, std::string_view numerator,
                                 std::string_view denominator, std::string name) {
  const auto i = static_cast<Eigen::Index>(fit.index(numerator));
  const auto j = static_cast<Eigen::Index>(fit.index(denominator));
  const double a = fit.parameters[static_cast<std::size_t>(i)];
  const double b = fit.parameters[static_cast<std::size_t>(j)];
  DerivedQuantity q{std::move(name), a / b, std::numeric_limits<double>::infinity()};
  if (b == 0.0) {
    return q;
  }
  // gradient of a/b is (1/b, -a/b^2)
  const double ga = 1.0 / b;
  const double gb = -a / (b * b);
  const auto& c = fit.covariance;
  const double var = ga * ga * c(i, i) + gb * gb * c(j, j) + 2.0 * ga * gb * c(i, j);
  q.error = std::sqrt(std::max(var, 0.0));
  return q;
}

}  // namespace kramers
