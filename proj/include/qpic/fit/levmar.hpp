#ifndef QPIC_FIT_LEVMAR_HPP
#define QPIC_FIT_LEVMAR_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpic/trace.hpp"

// Damped least-squares (Levenberg-Marquardt) driver for the small, smooth
// measurement models in this toolkit. Deterministic: identical inputs give
// identical iterates.

namespace qpic::fit {

struct RankDeficiencyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A fit model evaluated on a whole x-grid at once (models with grid-level
/// structure, e.g. numerical convolution, need the full trace).
struct Model {
    std::string name;
    std::vector<std::string> param_names;
    // y[i] = f(x[i]; p)
    std::function<void(std::span<const double> x, std::span<const double> p,
                       std::span<double> y)> eval;
    // Optional analytic Jacobian, row-major m x n: J[i*n + j] = df(x_i)/dp_j.
    std::function<void(std::span<const double> x, std::span<const double> p,
                       std::span<double> jac)> jacobian;
    // Optional precondition check; throws std::domain_error on violation.
    std::function<void(std::span<const double> p)> check;

    std::size_t n_params() const { return param_names.size(); }
};

/// Convenience wrapper for pointwise models.
inline Model make_pointwise_model(
    std::string name, std::vector<std::string> param_names,
    std::function<double(double, std::span<const double>)> f,
    std::function<void(double, std::span<const double>, std::span<double>)> df = nullptr,
    std::function<void(std::span<const double>)> check = nullptr) {
    Model m;
    m.name = std::move(name);
    m.param_names = std::move(param_names);
    m.eval = [f](std::span<const double> x, std::span<const double> p, std::span<double> y) {
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i], p);
    };
    if (df) {
        const std::size_t n = m.param_names.size();
        m.jacobian = [df, n](std::span<const double> x, std::span<const double> p,
                             std::span<double> jac) {
            for (std::size_t i = 0; i < x.size(); ++i)
                df(x[i], p, jac.subspan(i * n, n));
        };
    }
    m.check = std::move(check);
    return m;
}

struct FitOptions {
    int max_iterations = 200;
    double step_tolerance = 1e-10;      // relative scaled step
    double gradient_tolerance = 1e-12;  // scaled gradient inf-norm
    std::vector<double> lower;          // optional bounds, empty = unbounded
    std::vector<double> upper;
};

struct FitOutcome {
    std::vector<std::string> param_names;
    std::vector<double> params;
    std::vector<double> covariance;  // row-major n x n
    std::map<std::string, double> derived;
    double chi2 = 0.0;
    double reduced_chi2 = 0.0;
    int n_iterations = 0;
    bool converged = false;
    std::vector<double> chi2_history;  // accepted iterates only, non-increasing

    double param(const std::string& name) const {
        for (std::size_t i = 0; i < param_names.size(); ++i)
            if (param_names[i] == name) return params[i];
        throw std::out_of_range("FitOutcome: no parameter named " + name);
    }
    double stderr_of(const std::string& name) const {
        for (std::size_t i = 0; i < param_names.size(); ++i)
            if (param_names[i] == name)
                return std::sqrt(std::max(covariance[i * param_names.size() + i], 0.0));
        throw std::out_of_range("FitOutcome: no parameter named " + name);
    }
};

namespace detail {

/// Cholesky solve of (A + lambda diag(A)) dx = g. Returns false when the
/// damped matrix is not positive definite.
inline bool solve_damped(const std::vector<double>& a, const std::vector<double>& g,
                         double lambda, std::size_t n, std::vector<double>& dx) {
    std::vector<double> l(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            double sum = a[i * n + j];
            if (i == j) sum += lambda * a[i * n + i];
            for (std::size_t k = 0; k < j; ++k) sum -= l[i * n + k] * l[j * n + k];
            if (i == j) {
                if (!(sum > 0.0)) return false;
                l[i * n + i] = std::sqrt(sum);
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    dx.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = g[i];
        for (std::size_t k = 0; k < i; ++k) sum -= l[i * n + k] * dx[k];
        dx[i] = sum / l[i * n + i];
    }
    for (std::size_t ii = n; ii-- > 0;) {
        double sum = dx[ii];
        for (std::size_t k = ii + 1; k < n; ++k) sum -= l[k * n + ii] * dx[k];
        dx[ii] = sum / l[ii * n + ii];
    }
    return true;
}

/// Plain Cholesky inverse of a symmetric positive definite matrix.
inline bool invert_spd(const std::vector<double>& a, std::size_t n, std::vector<double>& inv) {
    inv.assign(n * n, 0.0);
    std::vector<double> col(n), e(n);
    for (std::size_t j = 0; j < n; ++j) {
        std::fill(e.begin(), e.end(), 0.0);
        e[j] = 1.0;
        if (!solve_damped(a, e, 0.0, n, col)) return false;
        for (std::size_t i = 0; i < n; ++i) inv[i * n + j] = col[i];
    }
    // enforce exact symmetry
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) {
            double v = 0.5 * (inv[i * n + j] + inv[j * n + i]);
            inv[i * n + j] = inv[j * n + i] = v;
        }
    return true;
}

}  // namespace detail

/// Weighted least-squares fit of `model` to `trace` starting from `init`.
inline FitOutcome fit_curve(const Model& model, const SpectrumTrace& trace,
                            std::vector<double> init, const FitOptions& options = {}) {
    trace.validate();
    const std::size_t n = model.n_params();
    const std::size_t m = trace.size();
    if (init.size() != n)
        throw std::invalid_argument("fit_curve: init size does not match model " + model.name);
    if (m < n + 1)
        throw std::invalid_argument("fit_curve: need at least n_params + 1 points");
    if (!options.lower.empty() && options.lower.size() != n)
        throw std::invalid_argument("fit_curve: bad lower bound size");
    if (!options.upper.empty() && options.upper.size() != n)
        throw std::invalid_argument("fit_curve: bad upper bound size");

    auto clamp = [&](std::vector<double>& p) {
        for (std::size_t j = 0; j < n; ++j) {
            if (!options.lower.empty()) p[j] = std::max(p[j], options.lower[j]);
            if (!options.upper.empty()) p[j] = std::min(p[j], options.upper[j]);
        }
    };
    clamp(init);
    // Coinciding bounds pin a parameter: it is excluded from the solve and
    // reports zero variance. This is how degenerate directions of a model
    // family (e.g. the Fano mixing weight) are held during a fit.
    std::vector<char> fixed(n, 0);
    if (!options.lower.empty() && !options.upper.empty())
        for (std::size_t j = 0; j < n; ++j)
            if (options.lower[j] == options.upper[j]) fixed[j] = 1;
    if (model.check) model.check(init);

    // Parameter scaling by initial magnitudes keeps the damping meaningful
    // across wildly different parameter units.
    std::vector<double> scale(n);
    for (std::size_t j = 0; j < n; ++j)
        scale[j] = std::max(std::abs(init[j]), 1e-8);

    std::vector<double> w(m);
    for (std::size_t i = 0; i < m; ++i) w[i] = 1.0 / (trace.sigma_y[i] * trace.sigma_y[i]);

    std::vector<double> yfit(m), jac(m * n);
    auto chi2_of = [&](const std::vector<double>& p) {
        model.eval(trace.x, p, yfit);
        double c = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            double r = trace.y[i] - yfit[i];
            c += w[i] * r * r;
        }
        return std::isfinite(c) ? c : std::numeric_limits<double>::infinity();
    };
    auto fill_jacobian = [&](const std::vector<double>& p) {
        if (model.jacobian) {
            model.jacobian(trace.x, p, jac);
            return;
        }
        // central differences
        std::vector<double> pp = p, yl(m), yh(m);
        for (std::size_t j = 0; j < n; ++j) {
            if (fixed[j]) {
                for (std::size_t i = 0; i < m; ++i) jac[i * n + j] = 0.0;
                continue;
            }
            double h = 1e-6 * std::max(std::abs(p[j]), scale[j] * 1e-3);
            pp[j] = p[j] + h;
            model.eval(trace.x, pp, yh);
            pp[j] = p[j] - h;
            model.eval(trace.x, pp, yl);
            pp[j] = p[j];
            for (std::size_t i = 0; i < m; ++i) jac[i * n + j] = (yh[i] - yl[i]) / (2.0 * h);
        }
    };

    FitOutcome out;
    out.param_names = model.param_names;
    out.params = init;
    double chi2 = chi2_of(init);
    out.chi2_history.push_back(chi2);

    double lambda = 1e-3;
    std::vector<double> a(n * n), g(n), dx, trial(n);
    int iter = 0;
    bool converged = false;
    for (; iter < options.max_iterations && !converged; ++iter) {
        fill_jacobian(out.params);
        model.eval(trace.x, out.params, yfit);
        // scaled normal equations
        std::fill(a.begin(), a.end(), 0.0);
        std::fill(g.begin(), g.end(), 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            const double r = trace.y[i] - yfit[i];
            for (std::size_t j = 0; j < n; ++j) {
                const double jj = jac[i * n + j] * scale[j];
                g[j] += w[i] * jj * r;
                for (std::size_t k = 0; k <= j; ++k)
                    a[j * n + k] += w[i] * jj * (jac[i * n + k] * scale[k]);
            }
        }
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = j + 1; k < n; ++k) a[j * n + k] = a[k * n + j];

        // Parameters whose Jacobian column vanishes (e.g. a convolution
        // width pinned at zero) are frozen for this iterate instead of
        // poisoning the solve; a fully vanishing system is a hard error.
        double max_diag = 0.0;
        for (std::size_t j = 0; j < n; ++j) max_diag = std::max(max_diag, a[j * n + j]);
        if (!(max_diag > 0.0))
            throw RankDeficiencyError("fit_curve: no parameter affects the model " + model.name);
        std::vector<std::size_t> active;
        for (std::size_t j = 0; j < n; ++j)
            if (!fixed[j] && a[j * n + j] > 1e-14 * max_diag) active.push_back(j);
        const std::size_t na = active.size();
        std::vector<double> a_act(na * na), g_act(na), dx_act;
        for (std::size_t p = 0; p < na; ++p) {
            g_act[p] = g[active[p]];
            for (std::size_t q = 0; q < na; ++q)
                a_act[p * na + q] = a[active[p] * n + active[q]];
        }

        // gradient criterion scaled by chi2 so it fires at the noise-floor
        // minimum, where the absolute gradient only reaches rounding level
        double gmax = 0.0;
        for (double gj : g_act) gmax = std::max(gmax, std::abs(gj));
        if (gmax < options.gradient_tolerance * std::max(1.0, chi2)) {
            converged = true;
            break;
        }

        bool accepted = false;
        for (int attempt = 0; attempt < 40; ++attempt) {
            if (!detail::solve_damped(a_act, g_act, lambda, na, dx_act)) {
                lambda *= 10.0;
                continue;
            }
            dx.assign(n, 0.0);
            for (std::size_t p = 0; p < na; ++p) dx[active[p]] = dx_act[p];
            double step_norm = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                trial[j] = out.params[j] + dx[j] * scale[j];
                step_norm = std::max(step_norm, std::abs(dx[j]));
            }
            clamp(trial);
            double trial_chi2;
            try {
                trial_chi2 = chi2_of(trial);
            } catch (const std::domain_error&) {
                trial_chi2 = std::numeric_limits<double>::infinity();
            }
            if (trial_chi2 <= chi2) {
                out.params = trial;
                chi2 = trial_chi2;
                out.chi2_history.push_back(chi2);
                lambda = std::max(lambda * 0.1, 1e-14);
                accepted = true;
                if (step_norm < options.step_tolerance) converged = true;
                break;
            }
            lambda *= 10.0;
        }
        if (!accepted) {
            converged = true;  // no downhill step within damping budget
            break;
        }
    }

    out.n_iterations = iter;
    out.converged = converged;
    out.chi2 = chi2;
    const double dof = static_cast<double>(m > n ? m - n : 1);
    out.reduced_chi2 = chi2 / dof;

    // Covariance from the unscaled normal equations at the solution,
    // inflated by the reduced chi^2. Frozen (no-effect) parameters report
    // zero variance; a degenerate combination of live parameters is a hard
    // error rather than a silently bogus uncertainty.
    fill_jacobian(out.params);
    std::fill(a.begin(), a.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t k = 0; k <= j; ++k)
                a[j * n + k] += w[i] * jac[i * n + j] * jac[i * n + k];
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t k = j + 1; k < n; ++k) a[j * n + k] = a[k * n + j];
    double max_diag = 0.0;
    for (std::size_t j = 0; j < n; ++j) max_diag = std::max(max_diag, a[j * n + j]);
    std::vector<std::size_t> active;
    for (std::size_t j = 0; j < n; ++j)
        if (!fixed[j] && max_diag > 0.0 && a[j * n + j] > 1e-14 * max_diag) active.push_back(j);
    const std::size_t na = active.size();
    std::vector<double> a_act(na * na);
    for (std::size_t p = 0; p < na; ++p)
        for (std::size_t q = 0; q < na; ++q)
            a_act[p * na + q] = a[active[p] * n + active[q]];
    std::vector<double> cov_act;
    if (na == 0 || !detail::invert_spd(a_act, na, cov_act))
        throw RankDeficiencyError("fit_curve: degenerate parameters at the solution of " +
                                  model.name + " (singular normal equations)");
    // an exactly degenerate direction can sneak past Cholesky on rounding;
    // catch it as an absurd variance inflation relative to the diagonal
    for (std::size_t p = 0; p < na; ++p) {
        const double inflation = cov_act[p * na + p] * a_act[p * na + p];
        if (!std::isfinite(inflation) || inflation > 1e13 || cov_act[p * na + p] < 0.0)
            throw RankDeficiencyError("fit_curve: parameter '" + model.param_names[active[p]] +
                                      "' is degenerate with others in " + model.name);
    }
    out.covariance.assign(n * n, 0.0);
    for (std::size_t p = 0; p < na; ++p)
        for (std::size_t q = 0; q < na; ++q)
            out.covariance[active[p] * n + active[q]] = cov_act[p * na + q] * out.reduced_chi2;
    return out;
}

}  // namespace qpic::fit

#endif
