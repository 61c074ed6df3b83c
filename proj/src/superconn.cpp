#include "indexforms/superconn.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

#include "indexforms/zeta.hpp"

namespace indexforms::superconn {

namespace {
constexpr double kDDSwitch = 1e-3;

double sinhc(double d) {
    const double d2 = d * d;
    return 1.0 + d2 / 6.0 * (1.0 + d2 / 20.0 * (1.0 + d2 / 42.0));
}
}  // namespace

double exp_divided_difference(double a, double b) {
    const double d = 0.5 * (b - a);
    if (std::abs(b - a) < kDDSwitch) return -std::exp(-0.5 * (a + b)) * sinhc(d);
    const double ea = a > 745 ? 0.0 : std::exp(-a);
    const double eb = b > 745 ? 0.0 : std::exp(-b);
    return (ea - eb) / (a - b);
}

double exp_divided_difference(double a, double b, double c) {
    double x = a, y = b, z = c;
    if (x > y) std::swap(x, y);
    if (y > z) std::swap(y, z);
    if (x > y) std::swap(x, y);
    if (z - x >= kDDSwitch)
        return (exp_divided_difference(x, y) - exp_divided_difference(y, z)) / (x - z);
    // all three close: central series with h_1 = 0 by construction
    const double mu = (x + y + z) / 3.0;
    const double d0 = x - mu, d1 = y - mu, d2 = z - mu;
    const double e2 = d0 * d1 + d0 * d2 + d1 * d2;
    const double e3 = d0 * d1 * d2;
    const double h2 = -e2, h3 = e3, h4 = e2 * e2;
    return std::exp(-mu) * (0.5 - h2 / 24.0 + h3 / 120.0 + h4 / 720.0);
}

// ---------------------------------------------------------------------------

Superconnection scale_superconnection(const Superconnection& a, double s) {
    if (s <= 0) throw std::invalid_argument("scale_superconnection: t must be positive");
    Superconnection out = a;
    out.t = a.t * s;
    return out;
}

OperatorForm CurvatureForm::degree0_part() const {
    OperatorForm out(body.grid(), body.dim_plus(), body.dim_minus(), Parity::Even);
    if (body.has(0)) {
        auto& dst = out.block(0);
        for (int p = 0; p < body.grid().points(); ++p) dst[p] = body.block(0, p);
    }
    return out;
}

OperatorForm CurvatureForm::nilpotent_part() const {
    OperatorForm out(body.grid(), body.dim_plus(), body.dim_minus(), Parity::Even);
    for (auto& [m, v] : body.blocks()) {
        if (m == 0) continue;
        auto& dst = out.block(m);
        for (int p = 0; p < body.grid().points(); ++p) dst[p] = v[p];
    }
    return out;
}

CurvatureForm curvature(const Superconnection& a) {
    const double t = a.t;
    // materialized odd matrix-form part M = t^{1/2} L + delta_t(higher)
    OperatorForm m = a.degree0;
    m *= std::sqrt(t);
    if (a.higher) {
        OperatorForm h = delta_scale(*a.higher, t);
        h *= std::sqrt(t);
        m += h;
    }
    OperatorForm f = covariant_derivative(a.connection, m);
    f += wedge_multiply(m, m);
    if (!a.connection.is_flat()) f += a.connection.curvature();
    f.set_parity(Parity::Even);
    f.prune();
    return CurvatureForm{f};
}

OperatorForm delta_scale(const OperatorForm& x, double t) {
    OperatorForm out = x;
    for (auto& [m, v] : x.blocks()) {
        const double factor = std::pow(t, -0.5 * mask_degree(m));
        auto& dst = out.block(m);
        for (int p = 0; p < x.grid().points(); ++p) dst[p] = factor * v[p];
    }
    return out;
}

OperatorForm heat_exponential(const CurvatureForm& f) {
    const OperatorForm& body = f.body;
    const BaseGrid& g = body.grid();
    const int n = body.fibre_dim();
    if (g.dim > 2) throw std::invalid_argument("heat_exponential: base dim must be <= 2");
    OperatorForm out(g, body.dim_plus(), body.dim_minus(), Parity::Even);

    std::vector<Mask> nil_masks;
    for (auto& [m, v] : body.blocks())
        if (m != 0) nil_masks.push_back(m);

    for (int p = 0; p < g.points(); ++p) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(body.block(0, p));
        const Eigen::VectorXd lam = es.eigenvalues();
        const Matrix& u = es.eigenvectors();

        // divided-difference grid dd1(lam_i, lam_j)
        Eigen::MatrixXd dd(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j <= i; ++j) {
                dd(i, j) = exp_divided_difference(lam[i], lam[j]);
                dd(j, i) = dd(i, j);
            }

        std::map<Mask, Matrix> tilde;
        for (Mask m : nil_masks) tilde[m] = u.adjoint() * body.block(m, p) * u;

        std::map<Mask, Matrix> acc;
        Vector e0(n);
        for (int i = 0; i < n; ++i) e0[i] = lam[i] > 745 ? 0.0 : std::exp(-lam[i]);
        acc[0] = Matrix(e0.asDiagonal());

        // single-insertion chains
        for (Mask m : nil_masks) {
            Matrix t1 = tilde[m].cwiseProduct(dd.cast<Complex>());
            auto it = acc.find(m);
            if (it == acc.end())
                acc[m] = std::move(t1);
            else
                it->second += t1;
        }

        // double-insertion chains (form degree <= 2)
        for (Mask m1 : nil_masks) {
            for (Mask m2 : nil_masks) {
                if (m1 & m2) continue;
                const Mask mo = m1 | m2;
                if (mask_degree(mo) > g.dim) continue;
                double sign = merge_sign(m1, m2);
                if ((mask_degree(m1) & 1) && (mask_degree(m2) & 1)) sign = -sign;

                const Matrix& n1 = tilde[m1];
                const Matrix& n2 = tilde[m2];
                // dd2(li, ll, lj) = (dd1(li, ll) - dd1(ll, lj)) / (li - lj)
                const Matrix a = n1.cwiseProduct(dd.cast<Complex>());
                const Matrix b = n2.cwiseProduct(dd.cast<Complex>());
                Matrix t2 = a * n2 - n1 * b;
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) {
                        const double diff = lam[i] - lam[j];
                        if (std::abs(diff) >= kDDSwitch) {
                            t2(i, j) /= diff;
                        } else {
                            Complex s = 0;
                            for (int l = 0; l < n; ++l)
                                s += n1(i, l) * n2(l, j) *
                                     exp_divided_difference(lam[i], lam[l], lam[j]);
                            t2(i, j) = s;
                        }
                    }
                auto it = acc.find(mo);
                if (it == acc.end())
                    acc[mo] = sign * t2;
                else
                    it->second += sign * t2;
            }
        }

        for (auto& [m, v] : acc) out.set_block(m, p, u * v * u.adjoint());
    }
    out.prune();
    return out;
}

FormField chern_form(const Superconnection& a) {
    return supertrace(heat_exponential(curvature(a)));
}

// ---------------------------------------------------------------------------
// GrassmannPair

GrassmannPair::GrassmannPair(const boundary::GrassmannSection& pi,
                             const boundary::GrassmannSection& pj, const ConnectionData& c,
                             double decay_tol) {
    if (pi.tail_weight(pj) > decay_tol)
        throw boundary::NotRelativelySmoothingError("GrassmannPair: tail decay test failed");
    base_ = pi.base;
    n_ = pi.modes();
    pi_ = pi;
    pj_ = pj;
    ambient_ = c;
    const int pts = base_.points();
    const int d = 2 * n_;

    proj_.resize(pts);
    for (int q = 0; q < pts; ++q) {
        Matrix p = Matrix::Zero(d, d);
        p.topLeftCorner(n_, n_) = pi.projection[q];
        p.bottomRightCorner(n_, n_) = pj.projection[q];
        proj_[q] = p;
    }

    L_ = OperatorForm(base_, n_, n_, Parity::Odd);
    auto& lb = L_.block(0);
    for (int q = 0; q < pts; ++q) {
        Matrix l = Matrix::Zero(d, d);
        l.topRightCorner(n_, n_) = pi.projection[q] * pj.projection[q];
        l.bottomLeftCorner(n_, n_) = pj.projection[q] * pi.projection[q];
        lb[q] = l;
    }

    // doubled ambient connection and the induced one preserving ran/ker P
    ConnectionData doubled = ConnectionData::flat(base_, n_, n_);
    for (auto& [axis, mats] : c.one_form) {
        auto& dst = doubled.one_form[axis];
        dst.assign(pts, Matrix::Zero(d, d));
        for (int q = 0; q < pts; ++q) {
            dst[q].topLeftCorner(n_, n_) = mats[q];
            dst[q].bottomRightCorner(n_, n_) = mats[q];
        }
    }
    OperatorForm pf(base_, n_, n_, Parity::Even);
    auto& pb = pf.block(0);
    for (int q = 0; q < pts; ++q) pb[q] = proj_[q];
    const OperatorForm x = covariant_derivative(doubled, pf, DerivativeKind::Spectral);

    conn_ = doubled;
    for (int axis = 0; axis < base_.dim; ++axis) {
        const Mask am = 1u << axis;
        if (!x.has(am) && conn_.one_form.count(axis) == 0) continue;
        auto& dst = conn_.one_form[axis];
        if (dst.empty()) dst.assign(pts, Matrix::Zero(d, d));
        for (int q = 0; q < pts; ++q) {
            const Matrix& xq = x.block(am, q);
            dst[q] += proj_[q] * xq - xq * proj_[q];
        }
    }

    covL_ = covariant_derivative(conn_, L_, DerivativeKind::Spectral);
    curv2_ = sandwich(proj_, wedge_multiply(x, x));
    if (!doubled.is_flat()) curv2_ += sandwich(proj_, doubled.curvature(DerivativeKind::Spectral));
    curv2_.set_parity(Parity::Even);
    curv2_.prune();
}

CurvatureForm GrassmannPair::curvature_at(double t) const {
    OperatorForm f = curv2_;
    OperatorForm dl = covL_;
    dl *= std::sqrt(t);
    f += dl;
    OperatorForm l2 = wedge_multiply(L_, L_);
    l2 *= Complex(t);
    f += l2;
    f.set_parity(Parity::Even);
    f.prune();
    return CurvatureForm{f};
}

FormField GrassmannPair::str_projection() const {
    FormField out(base_);
    Vector& v = out.component(0);
    for (int q = 0; q < base_.points(); ++q)
        v[q] = proj_[q].topLeftCorner(n_, n_).trace() -
               proj_[q].bottomRightCorner(n_, n_).trace();
    return out;
}

FormField GrassmannPair::chern(double t) const {
    // Str(e^{-F_t} - P^perp): the extension-by-zero inclusion adds Str(P)
    return supertrace(heat_exponential(curvature_at(t))) + str_projection();
}

FormField GrassmannPair::transgression(double t) const {
    OperatorForm heat = heat_exponential(curvature_at(t));
    OperatorForm bdot = L_;
    bdot *= Complex(0.5 / std::sqrt(t));
    return supertrace(wedge_multiply(bdot, heat));
}

FormField GrassmannPair::kernel_chern(double rank_tol) const {
    boundary::ToeplitzFamily fam{pi_, pj_};
    return kernel_bundle_chern(fam, ambient_, rank_tol);
}

FormField relative_chern_form(const GrassmannPair& b12, const GrassmannPair& b23, double t) {
    return b12.chern(t) - b23.chern(t);
}

FormField transgression_form(const GrassmannPair& b12, const GrassmannPair& b23, double t) {
    return b12.transgression(t) - b23.transgression(t);
}

std::vector<double> time_ladder(double t_min, double t_max, int count) {
    return zeta::geometric_grid(t_min, t_max, count);
}

TimeLimit time_limit_probe(const GrassmannPair& b12, const GrassmannPair& b23,
                           LimitDirection direction, const std::vector<double>& ladder,
                           double rate_window) {
    TimeLimit out;
    out.ladder = ladder;
    std::vector<FormField> ch(ladder.size());
    for (size_t i = 0; i < ladder.size(); ++i) ch[i] = relative_chern_form(b12, b23, ladder[i]);

    if (direction == LimitDirection::Zero) {
        // even-form residual is O(t): two-point Richardson on the smallest
        // ladder entries, ch(t) = L + c t
        const double t0 = ladder[0], t1 = ladder[1];
        const double r = t1 / t0;
        out.limit = Complex(r / (r - 1.0)) * ch[0] - Complex(1.0 / (r - 1.0)) * ch[1];
    } else {
        out.limit = b12.kernel_chern() - b23.kernel_chern();
    }

    for (size_t i = 0; i < ladder.size(); ++i)
        out.residuals.push_back((ch[i] - out.limit).sup_norm());

    // residual rate from a log-log fit over the approach window
    std::vector<double> xs, ys;
    for (size_t i = 0; i < ladder.size(); ++i) {
        const bool in_window = (direction == LimitDirection::Zero)
                                   ? (i < ladder.size() / 2)
                                   : (i >= ladder.size() / 2);
        if (!in_window) continue;
        if (out.residuals[i] < 1e-12) continue;
        xs.push_back(std::log(ladder[i]));
        ys.push_back(std::log(out.residuals[i]));
    }
    if (xs.size() < 3) {
        // residuals at the numeric floor across the window: the approach has
        // converged outright, there is no rate left to measure
        double worst = 0;
        for (size_t i = ladder.size() / 2; i < ladder.size(); ++i)
            worst = std::max(worst, out.residuals[i]);
        if (direction == LimitDirection::Infinity && worst < 1e-10) {
            out.fitted_rate = std::numeric_limits<double>::quiet_NaN();
            return out;
        }
        throw ExtrapolationError("time_limit_probe: too few usable ladder points");
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    const double m = double(xs.size());
    out.fitted_rate = (m * sxy - sx * sy) / (m * sxx - sx * sx);

    const double expected = (direction == LimitDirection::Zero) ? 1.0 : -0.5;
    if (std::abs(out.fitted_rate - expected) > rate_window * std::abs(expected) + 1e-12)
        throw ExtrapolationError("time_limit_probe: fitted rate " +
                                 std::to_string(out.fitted_rate) + " vs expected " +
                                 std::to_string(expected));
    return out;
}

// ---------------------------------------------------------------------------
// Gr_1 model

FormField schatten_relative_chern(const boundary::GrassmannSection& p,
                                  const boundary::GrassmannSection& reference,
                                  const ConnectionData& c, double decay_tol) {
    if (p.tail_weight(reference) > decay_tol)
        throw boundary::NotRelativelySmoothingError(
            "schatten_relative_chern: trace-class decay test failed");
    auto [conn, r] = boundary::induced_connection_and_curvature(p, c);
    (void)conn;
    FormField out(p.base);
    Vector& v0 = out.component(0);
    for (int q = 0; q < p.base.points(); ++q)
        v0[q] = (p.projection[q] - reference.projection[q]).trace();
    OperatorForm pw = r;
    double factorial = 1;
    for (int k = 1; 2 * k <= p.base.dim; ++k) {
        factorial *= k;
        const double sign = (k % 2 == 0) ? 1.0 : -1.0;
        out += Complex(sign / factorial) * trace(pw);
        if (2 * (k + 1) <= p.base.dim) pw = wedge_multiply(pw, r);
    }
    return out;
}

FormField schatten_omega_form(const boundary::GrassmannSection& p, const ConnectionData& c,
                              int k) {
    OperatorForm pf(p.base, p.modes(), 0, Parity::Even);
    auto& blk = pf.block(0);
    for (int q = 0; q < p.base.points(); ++q) blk[q] = p.projection[q];
    const OperatorForm dp = covariant_derivative(c, pf, DerivativeKind::Spectral);
    OperatorForm acc = pf;
    for (int i = 0; i < 2 * k; ++i) acc = wedge_multiply(acc, dp);
    return trace(acc);
}

}  // namespace indexforms::superconn
