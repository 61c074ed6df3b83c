#include "indexforms/zeta.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>

namespace indexforms::zeta {

namespace {
// B_{2j}/(2j)! for the Euler-Maclaurin correction
constexpr double kBernoulliOverFactorial[] = {
    8.3333333333333333e-02, -1.3888888888888889e-03, 3.3068783068783069e-05,
    -8.2671957671957672e-07, 2.0876756987868099e-08, -5.2841901386874932e-10,
    1.3382536530684679e-11, -3.3896802963225829e-13, 8.5860620562778446e-15,
    -2.1748686985580619e-16, 5.5090028283602295e-18, -1.3954464685812523e-19,
    3.5347070396294675e-21,
};
}  // namespace

std::complex<double> hurwitz_zeta(std::complex<double> s, double q) {
    if (q <= 0) throw std::invalid_argument("hurwitz_zeta: q must be positive");
    if (std::abs(s - 1.0) < 1e-14) throw std::invalid_argument("hurwitz_zeta: pole at s = 1");
    // Euler-Maclaurin: sum k < K directly, then tail corrections at K + q.
    const int K = 18 + int(std::ceil(std::abs(s)));
    std::complex<double> acc = 0;
    for (int k = 0; k < K; ++k) acc += std::pow(k + q, -s);
    const double x = K + q;
    acc += std::pow(x, 1.0 - s) / (s - 1.0);
    acc += 0.5 * std::pow(x, -s);
    // correction terms  B_{2j}/(2j)! * (s)_{2j-1} * x^{-s-2j+1}
    std::complex<double> poch = s;              // rising factorial (s)_{2j-1}
    std::complex<double> xpow = std::pow(x, -s - 1.0);
    for (int j = 1; j <= 13; ++j) {
        const std::complex<double> term = kBernoulliOverFactorial[j - 1] * poch * xpow;
        acc += term;
        if (std::abs(term) < 1e-18 * (1.0 + std::abs(acc))) break;
        poch *= (s + double(2 * j - 1)) * (s + double(2 * j));
        xpow /= x * x;
    }
    return acc;
}

double hurwitz_pole_residue(double q) {
    // residue = lim eps->0 eps * zeta_H(1 + eps, q); the symmetric difference
    // kills the constant term, Richardson the eps^2 one
    const double e1 = 1e-5, e2 = 5e-6;
    const double r1 = 0.5 * e1 * (hurwitz_zeta(1.0 + e1, q) - hurwitz_zeta(1.0 - e1, q)).real();
    const double r2 = 0.5 * e2 * (hurwitz_zeta(1.0 + e2, q) - hurwitz_zeta(1.0 - e2, q)).real();
    return (4.0 * r2 - r1) / 3.0;
}

double hurwitz_constant_at_pole(double q) {
    const double eps = 1e-5;
    const double a = (hurwitz_zeta(1.0 + eps, q) - 1.0 / eps).real();
    const double b = (hurwitz_zeta(1.0 - eps, q) + 1.0 / eps).real();
    return 0.5 * (a + b);
}

double HeatExpansionFit::coefficient(double p, bool log_term) const {
    for (size_t i = 0; i < exponents.size(); ++i)
        if (std::abs(exponents[i] - p) < 1e-12 && with_log[i] == log_term) return coefficients[i];
    return 0.0;
}

double HeatExpansionFit::integral_with_sqrt_weight(double t0) const {
    // int_0^{t0} t^{-1/2} (c t^e [log t]) dt, convergent for e > -1/2
    double acc = 0;
    for (size_t i = 0; i < exponents.size(); ++i) {
        const double a = exponents[i] + 0.5;
        if (a <= 0) continue;  // divergent pieces are the caller's business
        if (!with_log[i])
            acc += coefficients[i] * std::pow(t0, a) / a;
        else
            acc += coefficients[i] * std::pow(t0, a) * (std::log(t0) / a - 1.0 / (a * a));
    }
    return acc;
}

HeatExpansionFit heat_trace_expansion_fit(const std::vector<double>& t,
                                          const std::vector<double>& value,
                                          const std::vector<double>& exponent_menu,
                                          bool with_log, double fit_tol,
                                          bool relative_weights) {
    const int n = int(t.size());
    std::vector<double> exps;
    std::vector<bool> logs;
    for (double e : exponent_menu) {
        exps.push_back(e);
        logs.push_back(false);
    }
    if (with_log) {
        for (double e : exponent_menu) {
            exps.push_back(e);
            logs.push_back(true);
        }
    }
    const int k = int(exps.size());
    if (n < 2 * k)
        throw FitDivergenceError("heat_trace_expansion_fit: need at least 2x samples per term");

    double vmax = 0;
    for (double v : value) vmax = std::max(vmax, std::abs(v));
    // data at the roundoff floor carries no expansion to fit
    if (vmax == 0.0 || (relative_weights && vmax < 1e-12)) {
        HeatExpansionFit out;
        out.exponents = exps;
        out.with_log = logs;
        out.coefficients.assign(k, 0.0);
        return out;
    }
    Eigen::MatrixXd design(n, k);
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) {
        const double scale =
            relative_weights ? 1.0 / (std::abs(value[i]) + 1e-2 * vmax) : 1.0;
        rhs[i] = value[i] * scale;
        for (int j = 0; j < k; ++j) {
            double col = std::pow(t[i], exps[j]);
            if (logs[j]) col *= std::log(t[i]);
            design(i, j) = col * scale;
        }
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double cond = svd.singularValues()(0) / svd.singularValues()(k - 1);
    if (cond > 1e12)
        throw FitDivergenceError("heat_trace_expansion_fit: design matrix condition " +
                                 std::to_string(cond));
    Eigen::VectorXd coef = svd.solve(rhs);
    const double resid = (design * coef - rhs).lpNorm<Eigen::Infinity>();
    if (resid > fit_tol)
        throw FitDivergenceError("heat_trace_expansion_fit: residual " + std::to_string(resid));

    HeatExpansionFit out;
    out.exponents = exps;
    out.with_log = logs;
    out.coefficients.assign(coef.data(), coef.data() + k);
    out.residual = resid;
    out.condition = cond;
    return out;
}

std::vector<double> geometric_grid(double t_min, double t_max, int count) {
    std::vector<double> t(count);
    const double r = std::pow(t_max / t_min, 1.0 / (count - 1));
    double x = t_min;
    for (int i = 0; i < count; ++i, x *= r) t[i] = x;
    t.back() = t_max;
    return t;
}

}  // namespace indexforms::zeta
