#include "indexforms/cylinder.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>

#include "indexforms/superconn.hpp"

namespace indexforms::cylinder {

namespace {

// entire-in-x evaluations: C(x) = cos(sqrt x), S(x) = sin(sqrt x)/sqrt x,
// continued through x <= 0 as cosh/sinh
double entire_cos(double x) {
    if (x > 1e-8) return std::cos(std::sqrt(x));
    if (x < -1e-8) return std::cosh(std::sqrt(-x));
    return 1.0 - x / 2.0 + x * x / 24.0;
}

double entire_sinc(double x) {
    if (x > 1e-8) {
        const double r = std::sqrt(x);
        return std::sin(r) / r;
    }
    if (x < -1e-8) {
        const double r = std::sqrt(-x);
        return std::sinh(r) / r;
    }
    return 1.0 - x / 6.0 + x * x / 120.0;
}

Vector2 cauchy_data_decaying(double lambda) {
    // boundary trace of e^{-lambda u}, normalized
    if (lambda >= 0) {
        const double e = std::exp(-lambda);
        const double n = std::sqrt(1.0 + e * e);
        return Vector2(1.0 / n, e / n);
    }
    const double e = std::exp(lambda);
    const double n = std::sqrt(1.0 + e * e);
    return Vector2(e / n, 1.0 / n);
}

Vector2 cauchy_data_growing(double lambda) { return cauchy_data_decaying(-lambda); }

}  // namespace

CylinderProblem CylinderProblem::make(const BaseGrid& base, int N,
                                      const boundary::PotentialSpec& pot, double upsilon) {
    auto fam = boundary::assemble_boundary_family(base, N, pot);
    auto sd = boundary::decompose(fam);
    CylinderProblem p;
    p.base = base;
    p.fourier_cutoff = N;
    p.upsilon = upsilon;
    p.lambda = std::move(sd.eigenvalues);
    p.mean_potential = fam.mean_potential.empty() ? 0.0 : fam.mean_potential[0];
    return p;
}

CylinderSection CylinderSection::aps(const CylinderProblem& p) {
    CylinderSection s;
    s.base = p.base;
    s.fourier_cutoff = p.fourier_cutoff;
    s.blocks.resize(p.base.points());
    for (int q = 0; q < p.base.points(); ++q) {
        s.blocks[q].resize(p.modes());
        for (int k = 0; k < p.modes(); ++k) {
            Matrix2 b = Matrix2::Zero();
            if (p.lambda[q][k] > 0) b(0, 0) = 1.0;  // constrain u = 0 data
            if (p.lambda[q][k] < 0) b(1, 1) = 1.0;  // boundary operator at u = 1 is -d
            s.blocks[q][k] = b;
        }
    }
    return s;
}

double CylinderSection::idempotency_defect() const {
    double worst = 0;
    for (auto& pt : blocks)
        for (auto& b : pt) {
            worst = std::max(worst, ((b * b - b).cwiseAbs().maxCoeff()));
            worst = std::max(worst, ((b - b.adjoint()).cwiseAbs().maxCoeff()));
        }
    return worst;
}

std::vector<double> CylinderSection::relative_trace(const CylinderSection& other) const {
    std::vector<double> out(blocks.size(), 0.0);
    for (size_t q = 0; q < blocks.size(); ++q)
        for (size_t k = 0; k < blocks[q].size(); ++k)
            out[q] += (blocks[q][k] - other.blocks[q][k]).trace().real();
    return out;
}

CalderonData calderon_projector(const CylinderProblem& p, double gap_tol) {
    CalderonData c;
    c.blocks.resize(p.base.points());
    for (int q = 0; q < p.base.points(); ++q) {
        c.blocks[q].resize(p.modes());
        for (int k = 0; k < p.modes(); ++k) {
            const double l = p.lambda[q][k];
            if (std::abs(l) <= gap_tol)
                throw boundary::KernelGapError("calderon_projector: mode eigenvalue at zero");
            const Vector2 v = cauchy_data_decaying(l);
            c.blocks[q][k] = v * v.adjoint();
        }
    }
    return c;
}

double CalderonData::tail_deviation(const CylinderProblem& p, double from) const {
    double worst = 0;
    for (int q = 0; q < p.base.points(); ++q)
        for (int k = 0; k < p.modes(); ++k) {
            const double l = p.lambda[q][k];
            if (std::abs(l) < from) continue;
            Matrix2 limit = Matrix2::Zero();
            if (l > 0)
                limit(0, 0) = 1.0;
            else
                limit(1, 1) = 1.0;
            worst = std::max(worst, (blocks[q][k] - limit).cwiseAbs().maxCoeff());
        }
    return worst;
}

CylinderSection calderon_section(const CylinderProblem& p, double gap_tol) {
    CalderonData c = calderon_projector(p, gap_tol);
    CylinderSection s;
    s.base = p.base;
    s.fourier_cutoff = p.fourier_cutoff;
    s.blocks = std::move(c.blocks);
    return s;
}

std::vector<int> aps_index(const CylinderProblem& p, const CylinderSection& s) {
    std::vector<int> out(p.base.points(), 0);
    Matrix2 j;
    j << -1.0, 0.0, 0.0, 1.0;
    for (int q = 0; q < p.base.points(); ++q) {
        int idx = 0;
        for (int k = 0; k < p.modes(); ++k) {
            const double l = p.lambda[q][k];
            const Matrix2& b = s.blocks[q][k];
            const Vector2 v = cauchy_data_decaying(l);
            const Vector2 w = cauchy_data_growing(l);
            const double ker = (b * v).norm();
            const double coker = ((Matrix2::Identity() - b) * (j * w)).norm();
            for (double r : {ker, coker})
                if (r > 1e-10 && r < 1e-8)
                    throw DegenerateBCError(
                        "aps_index: boundary condition within 1e-10..1e-8 of annihilating "
                        "Cauchy data");
            if (ker <= 1e-10) ++idx;
            if (coker <= 1e-10) --idx;
        }
        out[q] = idx;
    }
    return out;
}

RelativeCalderonTrace trace_relative_to_calderon(const CylinderProblem& p,
                                                 const CylinderSection& s) {
    CalderonData c = calderon_projector(p);
    RelativeCalderonTrace out;
    out.value.assign(p.base.points(), 0.0);
    double min_edge = 1e300;
    for (int q = 0; q < p.base.points(); ++q) {
        for (int k = 0; k < p.modes(); ++k)
            out.value[q] += (c.blocks[q][k] - s.blocks[q][k]).trace().real();
        min_edge = std::min(min_edge, std::abs(p.lambda[q][0]));
        min_edge = std::min(min_edge, std::abs(p.lambda[q][p.modes() - 1]));
    }
    // beyond the truncation every section block is APS-type and the Calderon
    // block sits within e^{-2|lambda|} of it; ladder spacing is 1
    out.tail_bound = 4.0 * std::exp(-2.0 * min_edge) / (1.0 - std::exp(-2.0));
    return out;
}

std::vector<int> toeplitz_index(const CylinderSection& s1, const CylinderSection& s2) {
    std::vector<int> out(s1.blocks.size(), 0);
    for (size_t q = 0; q < s1.blocks.size(); ++q) {
        double tr = 0;
        int rank_diff = 0;
        for (size_t k = 0; k < s1.blocks[q].size(); ++k) {
            const Matrix2& a = s1.blocks[q][k];
            const Matrix2& b = s2.blocks[q][k];
            tr += (a - b).trace().real();
            const int ra = int(std::lround(a.trace().real()));
            const int rb = int(std::lround(b.trace().real()));
            Eigen::JacobiSVD<Matrix2> svd(b * a);
            int r = 0;
            for (int i = 0; i < 2; ++i)
                if (svd.singularValues()[i] > 1e-8) ++r;
            rank_diff += (ra - r) - (rb - r);
        }
        const double rounded = std::round(tr);
        if (std::abs(tr - rounded) > 1e-6 || int(rounded) != rank_diff)
            throw boundary::MethodsDisagreeError(
                "toeplitz_index: trace and rank routes disagree");
        out[q] = int(rounded);
    }
    return out;
}

RelativeIndexReport relative_index_identity(const CylinderProblem& p, const CylinderSection& s1,
                                            const CylinderSection& s2) {
    RelativeIndexReport rep;
    const auto i1 = aps_index(p, s1);
    const auto i2 = aps_index(p, s2);
    rep.rhs = toeplitz_index(s2, s1);  // ind(P2, P1)
    rep.lhs.resize(i1.size());
    for (size_t q = 0; q < i1.size(); ++q) {
        rep.lhs[q] = i1[q] - i2[q];
        if (rep.lhs[q] != rep.rhs[q]) rep.pass = false;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// u-grid

UGrid make_ugrid(int M, bool chebyshev) {
    UGrid g;
    g.M = M;
    g.chebyshev = chebyshev;
    g.u.resize(M);
    g.w.resize(M);
    g.diff = Eigen::MatrixXd::Zero(M, M);
    if (!chebyshev) {
        const double h = 1.0 / (M - 1);
        for (int i = 0; i < M; ++i) {
            g.u[i] = i * h;
            g.w[i] = (i == 0 || i == M - 1) ? h / 2 : h;
        }
        auto stencil = [&](int i, std::initializer_list<std::pair<int, double>> taps) {
            for (auto [off, c] : taps) g.diff(i, i + off) = c / h;
        };
        for (int i = 2; i < M - 2; ++i)
            stencil(i, {{-2, 1.0 / 12}, {-1, -8.0 / 12}, {1, 8.0 / 12}, {2, -1.0 / 12}});
        stencil(0, {{0, -25.0 / 12}, {1, 4.0}, {2, -3.0}, {3, 4.0 / 3}, {4, -0.25}});
        stencil(1, {{-1, -0.25}, {0, -5.0 / 6}, {1, 1.5}, {2, -0.5}, {3, 1.0 / 12}});
        stencil(M - 2, {{1, 0.25}, {0, 5.0 / 6}, {-1, -1.5}, {-2, 0.5}, {-3, -1.0 / 12}});
        stencil(M - 1, {{0, 25.0 / 12}, {-1, -4.0}, {-2, 3.0}, {-3, -4.0 / 3}, {-4, 0.25}});
        return g;
    }
    const int n = M - 1;
    Eigen::VectorXd x(M);
    for (int j = 0; j <= n; ++j) x[j] = std::cos(j * M_PI / n);
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(M, M);
    auto cbar = [&](int j) { return (j == 0 || j == n) ? 2.0 : 1.0; };
    for (int i = 0; i <= n; ++i)
        for (int j = 0; j <= n; ++j)
            if (i != j) d(i, j) = cbar(i) / cbar(j) * std::pow(-1.0, i + j) / (x[i] - x[j]);
    for (int i = 0; i <= n; ++i) {
        double row = 0;
        for (int j = 0; j <= n; ++j)
            if (j != i) row += d(i, j);
        d(i, i) = -row;
    }
    for (int j = 0; j <= n; ++j) g.u[j] = 0.5 * (1.0 - x[j]);
    g.diff = -2.0 * d;
    for (int j = 0; j <= n; ++j) {
        double s = 1.0;
        for (int k = 1; k <= n / 2; ++k) {
            const double b = (2 * k == n) ? 1.0 : 2.0;
            s -= b * std::cos(2.0 * k * j * M_PI / n) / (4.0 * k * k - 1.0);
        }
        double wj = 2.0 * s / n;
        if (j == 0 || j == n) wj *= 0.5;
        g.w[j] = 0.5 * wj;
    }
    return g;
}

double poisson_cutoff(double u) {
    if (u <= 0.25) return 1.0;
    if (u >= 0.75) return 0.0;
    const double s = (0.75 - u) / 0.5;
    return s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

namespace {

Eigen::MatrixXcd projection_matrix(const UGrid& g, double lambda, const Matrix2& block) {
    const int M = g.M;
    Eigen::MatrixXcd kcol(M, 2);
    const double l2 = lambda * lambda;
    for (int i = 0; i < M; ++i) {
        const double u = g.u[i];
        kcol(i, 0) = poisson_cutoff(u) * std::exp(-u * l2);
        kcol(i, 1) = poisson_cutoff(1.0 - u) * std::exp(-(1.0 - u) * l2);
    }
    Eigen::MatrixXcd sel = Eigen::MatrixXcd::Zero(2, M);
    sel(0, 0) = 1.0;
    sel(1, M - 1) = 1.0;
    return Eigen::MatrixXcd::Identity(M, M) - kcol * block * sel;
}

}  // namespace

DomainProjection domain_projection(const CylinderSection& s, const CylinderProblem& p, int M,
                                   bool chebyshev) {
    DomainProjection d;
    d.grid = make_ugrid(M, chebyshev);
    d.base = p.base;
    d.fourier_cutoff = p.fourier_cutoff;
    d.section = s;
    d.plus.resize(p.base.points());
    d.minus.resize(p.base.points());
    for (int q = 0; q < p.base.points(); ++q) {
        d.plus[q].resize(p.modes());
        d.minus[q].resize(p.modes());
        for (int k = 0; k < p.modes(); ++k) {
            const Matrix2& b = s.blocks[q][k];
            d.plus[q][k] = projection_matrix(d.grid, p.lambda[q][k], b);
            d.minus[q][k] =
                projection_matrix(d.grid, p.lambda[q][k], Matrix2(Matrix2::Identity() - b));
        }
    }
    return d;
}

double DomainProjection::idempotency_defect() const {
    double worst = 0;
    for (auto* fam : {&plus, &minus})
        for (auto& pt : *fam)
            for (auto& m : pt) worst = std::max(worst, (m * m - m).cwiseAbs().maxCoeff());
    return worst;
}

double DomainProjection::range_defect() const {
    double worst = 0;
    const int M = grid.M;
    for (size_t q = 0; q < plus.size(); ++q)
        for (size_t k = 0; k < plus[q].size(); ++k) {
            const Matrix2 b = section.blocks[q][k];
            const Matrix2 bc = Matrix2::Identity() - b;
            for (auto [fam, blk] : {std::pair<const std::vector<std::vector<Eigen::MatrixXcd>>*,
                                              Matrix2>{&plus, b},
                                    {&minus, bc}}) {
                const Eigen::MatrixXcd& m = (*fam)[q][k];
                Eigen::MatrixXcd gamma(2, M);
                gamma.row(0) = m.row(0);
                gamma.row(1) = m.row(M - 1);
                worst = std::max(worst, (blk * gamma).cwiseAbs().maxCoeff());
            }
        }
    return worst;
}

// ---------------------------------------------------------------------------
// Mode connection and interior curvature

ModeConnection ModeConnection::flat(const BaseGrid& base, int N) {
    ModeConnection c;
    c.base = base;
    c.fourier_cutoff = N;
    return c;
}

std::map<Mask, std::vector<Vector>> ModeConnection::curvature_scalars() const {
    std::map<Mask, std::vector<Vector>> out;
    const int n = 2 * fourier_cutoff + 1;
    for (auto& [axis, field] : scalar) {
        for (int mode = 0; mode < n; ++mode) {
            FormField f(base);
            Vector& v = f.component(1u << axis);
            for (int q = 0; q < base.points(); ++q) v[q] = field[q][mode];
            FormField df = spectral_exterior_derivative(f);
            for (auto& [m, vec] : df.components()) {
                auto& dst = out[m];
                if (dst.empty()) dst.assign(base.points(), Vector::Zero(n));
                for (int q = 0; q < base.points(); ++q) dst[q][mode] += vec[q];
            }
        }
    }
    return out;
}

namespace {

/// Spectral base-derivative of a [point]-indexed family of M x M matrices.
std::map<int, std::vector<Eigen::MatrixXcd>> base_derivative(
    const BaseGrid& g, const std::vector<Eigen::MatrixXcd>& field) {
    std::map<int, std::vector<Eigen::MatrixXcd>> out;
    if (g.dim == 0 || field.empty()) return out;
    const int M = int(field[0].rows());
    for (int axis = 0; axis < g.dim; ++axis)
        out[axis].assign(g.points(), Eigen::MatrixXcd::Zero(M, M));
    for (int r = 0; r < M; ++r)
        for (int c = 0; c < M; ++c) {
            FormField f(g);
            Vector& v = f.component(0);
            for (int q = 0; q < g.points(); ++q) v[q] = field[q](r, c);
            FormField df = spectral_exterior_derivative(f);
            for (int axis = 0; axis < g.dim; ++axis) {
                if (!df.has(1u << axis)) continue;
                const Vector& dv = df.component(1u << axis);
                for (int q = 0; q < g.points(); ++q) out[axis][q](r, c) = dv[q];
            }
        }
    return out;
}

}  // namespace

InteriorCurvature interior_curvature(const DomainProjection& d, const ModeConnection& c) {
    if (d.base.dim < 1)
        throw std::invalid_argument("interior_curvature: base dimension must be >= 1");
    InteriorCurvature r;
    r.grid = d.grid;
    r.base = d.base;
    r.fourier_cutoff = d.fourier_cutoff;
    const int n = 2 * d.fourier_cutoff + 1;
    const int pts = d.base.points();
    const int M = d.grid.M;
    const auto curv_sc = c.curvature_scalars();
    const Mask top = 3u;

    for (auto [fam, dst] :
         {std::pair<const std::vector<std::vector<Eigen::MatrixXcd>>*,
                    std::map<Mask, std::vector<std::vector<Eigen::MatrixXcd>>>*>{&d.plus,
                                                                                 &r.plus},
          {&d.minus, &r.minus}}) {
        if (d.base.dim == 2)
            (*dst)[top].assign(pts,
                               std::vector<Eigen::MatrixXcd>(n, Eigen::MatrixXcd::Zero(M, M)));
        for (int k = 0; k < n; ++k) {
            std::vector<Eigen::MatrixXcd> pfield(pts);
            for (int q = 0; q < pts; ++q) pfield[q] = (*fam)[q][k];
            auto dp = base_derivative(d.base, pfield);
            if (d.base.dim == 2)
                for (int q = 0; q < pts; ++q) {
                    const Eigen::MatrixXcd x = dp[0][q] * dp[1][q] - dp[1][q] * dp[0][q];
                    (*dst)[top][q][k] = pfield[q] * x * pfield[q];
                }
        }
        for (auto& [m, vecs] : curv_sc) {
            auto& blocks = (*dst)[m];
            if (blocks.empty())
                blocks.assign(pts,
                              std::vector<Eigen::MatrixXcd>(n, Eigen::MatrixXcd::Zero(M, M)));
            for (int q = 0; q < pts; ++q)
                for (int k = 0; k < n; ++k) blocks[q][k] += vecs[q][k] * (*fam)[q][k];
        }
    }
    return r;
}

double InteriorCurvature::support_defect(const DomainProjection& d) const {
    double worst = 0;
    for (auto [fam, proj] :
         {std::pair<const std::map<Mask, std::vector<std::vector<Eigen::MatrixXcd>>>*,
                    const std::vector<std::vector<Eigen::MatrixXcd>>*>{&plus, &d.plus},
          {&minus, &d.minus}})
        for (auto& [m, blocks] : *fam)
            for (size_t q = 0; q < blocks.size(); ++q)
                for (size_t k = 0; k < blocks[q].size(); ++k) {
                    const auto& p = (*proj)[q][k];
                    worst = std::max(
                        worst, (p * blocks[q][k] * p - blocks[q][k]).cwiseAbs().maxCoeff());
                }
    return worst;
}

FormField relative_interior_eta_form(const DomainProjection& d1, const DomainProjection& d2,
                                     const ModeConnection& c, double decay_tol) {
    const int n = 2 * d1.fourier_cutoff + 1;
    for (size_t q = 0; q < d1.section.blocks.size(); ++q)
        for (int k = 0; k < n; ++k) {
            const int mode = k - d1.fourier_cutoff;
            if (std::abs(mode) <= d1.fourier_cutoff / 2) continue;
            if ((d1.section.blocks[q][k] - d2.section.blocks[q][k]).cwiseAbs().maxCoeff() >
                decay_tol)
                throw boundary::NotRelativelySmoothingError(
                    "relative_interior_eta_form: section tails differ");
        }

    InteriorCurvature r1 = interior_curvature(d1, c);
    InteriorCurvature r2 = interior_curvature(d2, c);
    FormField out(d1.base);
    if (d1.base.dim < 2) return out;  // series starts at k = 1, degree 2
    for (auto [fam1, fam2, sgn] :
         {std::tuple<const std::map<Mask, std::vector<std::vector<Eigen::MatrixXcd>>>*,
                     const std::map<Mask, std::vector<std::vector<Eigen::MatrixXcd>>>*, double>{
              &r1.plus, &r2.plus, 1.0},
          {&r1.minus, &r2.minus, -1.0}})
        for (auto& [m, blocks] : *fam1) {
            Vector& dst = out.component(m);
            auto it2 = fam2->find(m);
            for (int q = 0; q < d1.base.points(); ++q)
                for (int k = 0; k < n; ++k) {
                    Complex tr = blocks[q][k].trace();
                    if (it2 != fam2->end()) tr -= it2->second[q][k].trace();
                    dst[q] += -sgn * tr;  // (-1)^1/1! * graded trace
                }
        }
    out.prune();
    return out;
}

// ---------------------------------------------------------------------------
// Boundary-value spectra by characteristic roots

namespace {

Matrix2 f_map(double x) {
    Matrix2 m;
    m << 1.0, 0.0, entire_cos(x), entire_sinc(x);
    return m;
}

Matrix2 g_map_plus(double x, double lambda) {
    Matrix2 m;
    m << lambda, 1.0, -x * entire_sinc(x) + lambda * entire_cos(x),
        entire_cos(x) + lambda * entire_sinc(x);
    return m;
}

Matrix2 g_map_minus(double x, double lambda) {
    Matrix2 m;
    m << lambda, -1.0, x * entire_sinc(x) + lambda * entire_cos(x),
        -entire_cos(x) + lambda * entire_sinc(x);
    return m;
}

Matrix2 characteristic_matrix(double mu, double lambda, const Matrix2& block, int chirality) {
    const double x = mu - lambda * lambda;
    const Matrix2 mf = f_map(x);
    const Matrix2 mg = chirality > 0 ? g_map_plus(x, lambda) : g_map_minus(x, lambda);
    const Matrix2 bval = chirality > 0 ? block : Matrix2(Matrix2::Identity() - block);
    const Matrix2 bder = Matrix2(Matrix2::Identity() - bval);

    Eigen::SelfAdjointEigenSolver<Matrix2> es(bval);
    Matrix2 a = Matrix2::Zero();
    int row = 0;
    for (int i = 1; i >= 0; --i)
        if (es.eigenvalues()[i] > 0.5 && row < 2) a.row(row++) = es.eigenvectors().col(i).adjoint() * mf;
    Eigen::SelfAdjointEigenSolver<Matrix2> es2(bder);
    for (int i = 1; i >= 0; --i)
        if (es2.eigenvalues()[i] > 0.5 && row < 2)
            a.row(row++) = es2.eigenvectors().col(i).adjoint() * mg;
    for (int r = 0; r < 2; ++r) {
        const double nrm = a.row(r).norm();
        if (nrm > 0) a.row(r) /= nrm;
    }
    return a;
}

double char_det2(double mu, double lambda, const Matrix2& block, int chirality) {
    return std::norm(characteristic_matrix(mu, lambda, block, chirality).determinant());
}

double refine_root(double lo, double hi, double lambda, const Matrix2& block, int chirality) {
    const double gr = 0.61803398874989484820;
    double a = lo, b = hi;
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = char_det2(x1, lambda, block, chirality);
    double f2 = char_det2(x2, lambda, block, chirality);
    for (int it = 0; it < 200 && (b - a) > 1e-13 * (1.0 + std::abs(b)); ++it) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - gr * (b - a);
            f1 = char_det2(x1, lambda, block, chirality);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + gr * (b - a);
            f2 = char_det2(x2, lambda, block, chirality);
        }
    }
    return 0.5 * (a + b);
}

}  // namespace

ModeSpectrum laplacian_eigenvalues(double lambda, const Matrix2& block, int chirality,
                                   double mu_max, const UGrid& grid) {
    ModeSpectrum out;
    std::vector<double> candidates;
    const double l2 = lambda * lambda;

    // bound-state range mu in [0, lambda^2)
    {
        std::vector<double> grid_mu;
        const int steps = std::max(8, int(std::ceil(std::abs(lambda) * 12)));
        for (int i = 0; i <= steps; ++i) {
            const double kappa = std::abs(lambda) * i / steps;
            grid_mu.push_back(l2 - kappa * kappa);
        }
        std::sort(grid_mu.begin(), grid_mu.end());
        for (size_t i = 1; i + 1 < grid_mu.size(); ++i) {
            const double h0 = char_det2(grid_mu[i - 1], lambda, block, chirality);
            const double h1 = char_det2(grid_mu[i], lambda, block, chirality);
            const double h2 = char_det2(grid_mu[i + 1], lambda, block, chirality);
            if (h1 < h0 && h1 < h2 && h1 < 0.5)
                candidates.push_back(
                    refine_root(grid_mu[i - 1], grid_mu[i + 1], lambda, block, chirality));
        }
        // endpoint minima (e.g. a root at mu ~ 0 or just below lambda^2)
        const double h_first = char_det2(grid_mu[0], lambda, block, chirality);
        const double h_second = char_det2(grid_mu[1], lambda, block, chirality);
        if (h_first < h_second && h_first < 0.5)
            candidates.push_back(refine_root(std::max(0.0, grid_mu[0] - 0.5), grid_mu[1],
                                             lambda, block, chirality));
    }
    // oscillatory range mu = lambda^2 + nu^2
    if (mu_max > l2) {
        const double nu_max = std::sqrt(mu_max - l2);
        const double dnu = M_PI / 24.0;
        const int steps = int(std::ceil(nu_max / dnu));
        double prev2 = -1, prev1 = -1, mu_prev2 = 0, mu_prev1 = 0;
        for (int i = 0; i <= steps; ++i) {
            const double nu = std::min(nu_max, 1e-6 + i * dnu);
            const double mu = l2 + nu * nu;
            const double h = char_det2(mu, lambda, block, chirality);
            if (prev1 >= 0 && prev2 >= 0 && prev1 < prev2 && prev1 < h && prev1 < 0.5)
                candidates.push_back(refine_root(mu_prev2, mu, lambda, block, chirality));
            prev2 = prev1;
            mu_prev2 = mu_prev1;
            prev1 = h;
            mu_prev1 = mu;
        }
    }

    std::sort(candidates.begin(), candidates.end());
    std::vector<double> roots;
    for (double mu : candidates) {
        if (mu < -1e-9 || mu > mu_max) continue;
        if (mu < 0) mu = 0;
        if (!roots.empty() && std::abs(mu - roots.back()) < 1e-7 * (1.0 + mu)) continue;
        if (std::sqrt(char_det2(mu, lambda, block, chirality)) > 1e-6) continue;
        roots.push_back(mu);
    }

    const double nu_max = mu_max > l2 ? std::sqrt(mu_max - l2) : 0.0;
    const double expected = nu_max / M_PI;
    if (std::abs(double(roots.size()) - expected) > 3.5)
        throw RootFinderStallError("laplacian_eigenvalues: found " +
                                   std::to_string(roots.size()) + " roots vs Weyl estimate " +
                                   std::to_string(expected));

    out.mu = roots;
    out.funcs.resize(grid.M, int(roots.size()));
    for (size_t j = 0; j < roots.size(); ++j) {
        const Matrix2 a = characteristic_matrix(roots[j], lambda, block, chirality);
        Eigen::JacobiSVD<Matrix2> svd(a, Eigen::ComputeFullV);
        const Vector2 ab = svd.matrixV().col(1);
        const double x = roots[j] - l2;
        Eigen::VectorXcd f(grid.M);
        for (int i = 0; i < grid.M; ++i) {
            const double u = grid.u[i];
            f[i] = ab[0] * entire_cos(x * u * u) + ab[1] * u * entire_sinc(x * u * u);
        }
        double nrm2 = 0;
        for (int i = 0; i < grid.M; ++i) nrm2 += grid.w[i] * std::norm(f[i]);
        f /= std::sqrt(nrm2);
        int imax = 0;
        for (int i = 1; i < grid.M; ++i)
            if (std::abs(f[i]) > std::abs(f[imax])) imax = i;
        if (std::abs(f[imax]) > 0) f *= std::conj(f[imax]) / std::abs(f[imax]);
        out.funcs.col(j) = f;
    }
    return out;
}

BVPTables bvp_tables(const CylinderProblem& p, const CylinderSection& s, double mu_max, int M) {
    BVPTables t;
    t.grid = make_ugrid(M, false);
    t.base = p.base;
    t.fourier_cutoff = p.fourier_cutoff;
    t.mu_max = mu_max;
    t.plus.resize(p.base.points());
    t.minus.resize(p.base.points());
    for (int q = 0; q < p.base.points(); ++q) {
        t.plus[q].resize(p.modes());
        t.minus[q].resize(p.modes());
        for (int k = 0; k < p.modes(); ++k) {
            t.plus[q][k] =
                laplacian_eigenvalues(p.lambda[q][k], s.blocks[q][k], +1, mu_max, t.grid);
            t.minus[q][k] =
                laplacian_eigenvalues(p.lambda[q][k], s.blocks[q][k], -1, mu_max, t.grid);
        }
    }
    return t;
}

std::vector<double> relative_heat_trace(const BVPTables& t1, const BVPTables& t2, double t,
                                        double tail_tol) {
    if (std::exp(-t * t1.mu_max) > tail_tol || std::exp(-t * t2.mu_max) > tail_tol)
        throw CutoffError("relative_heat_trace: e^{-t mu_max} above the tail tolerance");
    const int pts = t1.base.points();
    const int n = 2 * t1.fourier_cutoff + 1;
    std::vector<double> out(pts, 0.0);
    for (int q = 0; q < pts; ++q)
        for (int k = 0; k < n; ++k) {
            double s = 0;
            for (double mu : t1.plus[q][k].mu) s += std::exp(-t * mu);
            for (double mu : t1.minus[q][k].mu) s -= std::exp(-t * mu);
            for (double mu : t2.plus[q][k].mu) s -= std::exp(-t * mu);
            for (double mu : t2.minus[q][k].mu) s += std::exp(-t * mu);
            out[q] += s;
        }
    return out;
}

std::vector<double> supertrace_heat(const BVPTables& t, double time, double tail_tol) {
    if (std::exp(-time * t.mu_max) > tail_tol)
        throw CutoffError("supertrace_heat: e^{-t mu_max} above the tail tolerance");
    const int pts = t.base.points();
    const int n = 2 * t.fourier_cutoff + 1;
    std::vector<double> out(pts, 0.0);
    for (int q = 0; q < pts; ++q)
        for (int k = 0; k < n; ++k) {
            for (double mu : t.plus[q][k].mu) out[q] += std::exp(-time * mu);
            for (double mu : t.minus[q][k].mu) out[q] -= std::exp(-time * mu);
        }
    return out;
}

std::vector<Complex> relative_heat_trace_weighted(
    const BVPTables& t1, const BVPTables& t2,
    const std::vector<std::vector<Eigen::MatrixXcd>>& f_plus,
    const std::vector<std::vector<Eigen::MatrixXcd>>& f_minus, double t) {
    if (std::exp(-t * std::min(t1.mu_max, t2.mu_max)) > 1e-10)
        throw CutoffError("relative_heat_trace_weighted: table cutoff too low for t = " +
                          std::to_string(t));
    const int pts = t1.base.points();
    const int n = 2 * t1.fourier_cutoff + 1;
    const Eigen::VectorXd& w = t1.grid.w;
    std::vector<Complex> out(pts, Complex(0));
    auto weighted = [&](const ModeSpectrum& sp, const Eigen::MatrixXcd& f) {
        Complex acc = 0;
        for (size_t j = 0; j < sp.mu.size(); ++j) {
            const Eigen::VectorXcd v = sp.funcs.col(j);
            acc += std::exp(-t * sp.mu[j]) * (v.adjoint() * w.asDiagonal() * (f * v))(0);
        }
        return acc;
    };
    for (int q = 0; q < pts; ++q)
        for (int k = 0; k < n; ++k) {
            out[q] += weighted(t1.plus[q][k], f_plus[q][k]) -
                      weighted(t1.minus[q][k], f_minus[q][k]);
            out[q] -= weighted(t2.plus[q][k], f_plus[q][k]) -
                      weighted(t2.minus[q][k], f_minus[q][k]);
        }
    return out;
}

// ---------------------------------------------------------------------------
// Interior relative Chern character through the BVP eigenbases

namespace {

struct ModeChain {
    Eigen::VectorXd mu;  // plus states then minus states
    int n_plus = 0;
    std::map<Mask, Eigen::MatrixXcd> nil;
};

std::map<Mask, Complex> chain_supertrace(const ModeChain& mc, double t, int base_dim) {
    const int n = int(mc.mu.size());
    Eigen::VectorXd lam = t * mc.mu;
    std::map<Mask, Complex> out;
    Eigen::VectorXd grade(n);
    for (int i = 0; i < n; ++i) grade[i] = i < mc.n_plus ? 1.0 : -1.0;
    Complex s0 = 0;
    for (int i = 0; i < n; ++i) s0 += grade[i] * (lam[i] > 745 ? 0.0 : std::exp(-lam[i]));
    out[0] = s0;

    for (auto& [m, nm] : mc.nil) {
        Complex s = 0;
        for (int i = 0; i < n; ++i)
            s += grade[i] * nm(i, i) * superconn::exp_divided_difference(lam[i], lam[i]);
        out[m] += s;
    }
    for (auto& [m1, n1] : mc.nil)
        for (auto& [m2, n2] : mc.nil) {
            if (m1 & m2) continue;
            const Mask mo = m1 | m2;
            if (int(mask_degree(mo)) > base_dim) continue;
            double sign = merge_sign(m1, m2);
            if ((mask_degree(m1) & 1) && (mask_degree(m2) & 1)) sign = -sign;
            Complex s = 0;
            for (int i = 0; i < n; ++i)
                for (int l = 0; l < n; ++l)
                    s += grade[i] * n1(i, l) * n2(l, i) *
                         superconn::exp_divided_difference(lam[i], lam[l], lam[i]);
            out[mo] += sign * s;
        }
    return out;
}

}  // namespace

FormField interior_relative_chern(const CylinderProblem& p, const BVPTables& t1,
                                  const BVPTables& t2, const InteriorCurvature& r1,
                                  const InteriorCurvature& r2, const ModeConnection& c,
                                  double time) {
    (void)c;  // the scalar connection enters through the curvature fields
    const int pts = p.base.points();
    const int n = p.modes();
    const Eigen::VectorXd& w = t1.grid.w;
    FormField out(p.base);

    std::map<int, std::vector<Vector>> dlam;
    for (int axis = 0; axis < p.base.dim; ++axis) dlam[axis].assign(pts, Vector::Zero(n));
    for (int k = 0; k < n; ++k) {
        FormField f(p.base);
        Vector& v = f.component(0);
        for (int q = 0; q < pts; ++q) v[q] = p.lambda[q][k];
        FormField df = spectral_exterior_derivative(f);
        for (int axis = 0; axis < p.base.dim; ++axis) {
            if (!df.has(1u << axis)) continue;
            const Vector& dv = df.component(1u << axis);
            for (int q = 0; q < pts; ++q) dlam[axis][q][k] = dv[q];
        }
    }

    for (int q = 0; q < pts; ++q) {
        for (int k = 0; k < n; ++k) {
            auto build = [&](const BVPTables& t, const InteriorCurvature& r) {
                ModeChain mc;
                const auto& sp = t.plus[q][k];
                const auto& sm = t.minus[q][k];
                const int np = int(sp.mu.size()), nmn = int(sm.mu.size());
                mc.n_plus = np;
                mc.mu.resize(np + nmn);
                for (int j = 0; j < np; ++j) mc.mu[j] = sp.mu[j];
                for (int j = 0; j < nmn; ++j) mc.mu[np + j] = sm.mu[j];
                const Eigen::MatrixXcd overlap = sm.funcs.adjoint() * w.asDiagonal() * sp.funcs;
                for (int axis = 0; axis < p.base.dim; ++axis) {
                    const Complex coef = std::sqrt(time) * p.upsilon * dlam[axis][q][k];
                    if (std::abs(coef) < 1e-300) continue;
                    Eigen::MatrixXcd ins = Eigen::MatrixXcd::Zero(np + nmn, np + nmn);
                    ins.bottomLeftCorner(nmn, np) = coef * overlap;
                    ins.topRightCorner(np, nmn) = coef * overlap.adjoint();
                    mc.nil[1u << axis] = ins;
                }
                for (auto& [m, blocks] : r.plus) {
                    Eigen::MatrixXcd ins = Eigen::MatrixXcd::Zero(np + nmn, np + nmn);
                    ins.topLeftCorner(np, np) =
                        sp.funcs.adjoint() * w.asDiagonal() * blocks[q][k] * sp.funcs;
                    auto itm = r.minus.find(m);
                    if (itm != r.minus.end())
                        ins.bottomRightCorner(nmn, nmn) =
                            sm.funcs.adjoint() * w.asDiagonal() * itm->second[q][k] * sm.funcs;
                    auto it = mc.nil.find(m);
                    if (it == mc.nil.end())
                        mc.nil[m] = ins;
                    else
                        it->second += ins;
                }
                return mc;
            };
            ModeChain m1 = build(t1, r1);
            ModeChain m2 = build(t2, r2);
            auto s1 = chain_supertrace(m1, time, p.base.dim);
            auto s2 = chain_supertrace(m2, time, p.base.dim);
            for (auto& [m, v] : s1) out.add(m, q, v);
            for (auto& [m, v] : s2) out.add(m, q, -v);
        }
    }
    out.prune(1e-300);
    return out;
}

// ---------------------------------------------------------------------------
// Commutator traces

CommutatorDefect commutator_trace_defect(const CylinderProblem& p, int point,
                                         const GeneralizedKernel& k, const UGrid& grid) {
    CommutatorDefect out;
    const int M = grid.M;
    const Eigen::MatrixXd& d = grid.diff;
    for (size_t idx = 0; idx < k.mode_indices.size(); ++idx) {
        const double ups = p.upsilon;
        const Eigen::MatrixXcd& kpm = k.k_pm[idx];  // E- -> E+ block kernel values
        const Eigen::MatrixXcd& kmp = k.k_mp[idx];

        // D+ K^{+-} has kernel ups (d_u + lambda) k; K^{+-} D+ has smooth part
        // ups (-d_v + lambda) k; the lambda terms cancel in the defect.
        Eigen::MatrixXcd dk = ups * (d * kpm);
        Eigen::MatrixXcd kd = ups * (-(kpm * d.transpose()));
        Complex direct = 0;
        for (int i = 0; i < M; ++i) direct += grid.w[i] * (dk(i, i) - kd(i, i));
        Eigen::MatrixXcd dk2 = ups * (-(d * kmp));
        Eigen::MatrixXcd kd2 = ups * (kmp * d.transpose());
        for (int i = 0; i < M; ++i) direct += grid.w[i] * (dk2(i, i) - kd2(i, i));
        out.direct += direct.real();

        const Complex green =
            ups * ((kpm(M - 1, M - 1) - kpm(0, 0)) - (kmp(M - 1, M - 1) - kmp(0, 0)));
        out.boundary_formula += green.real();
    }
    return out;
}

GeneralizedKernel range_compatible_smoothing(const CylinderProblem& p, const BVPTables& t,
                                             int point, const std::vector<int>& mode_indices,
                                             double s) {
    GeneralizedKernel k;
    k.mode_indices = mode_indices;
    const int M = t.grid.M;
    const Eigen::VectorXd& w = t.grid.w;
    (void)p;
    for (int mi : mode_indices) {
        const auto& sp = t.plus[point][mi];
        const auto& sm = t.minus[point][mi];
        Eigen::MatrixXcd kmp = Eigen::MatrixXcd::Zero(M, M);
        Eigen::MatrixXcd kpm = Eigen::MatrixXcd::Zero(M, M);
        const Eigen::MatrixXcd overlap = sm.funcs.adjoint() * w.asDiagonal() * sp.funcs;
        for (size_t j = 0; j < sp.mu.size(); ++j) {
            if (sp.mu[j] < 1e-12) continue;
            for (size_t a = 0; a < sm.mu.size(); ++a) {
                if (std::abs(sm.mu[a] - sp.mu[j]) > 1e-6 * (1.0 + sp.mu[j])) continue;
                if (std::abs(overlap(a, j)) < 1e-8) continue;
                const Complex phase = overlap(a, j) / std::abs(overlap(a, j));
                kmp += std::exp(-s * sp.mu[j]) * std::sqrt(sp.mu[j]) * phase *
                       (sm.funcs.col(a) * sp.funcs.col(j).adjoint());
                kpm += std::exp(-s * sp.mu[j]) * std::sqrt(sp.mu[j]) * std::conj(phase) *
                       (sp.funcs.col(j) * sm.funcs.col(a).adjoint());
                break;
            }
        }
        k.k_pm.push_back(kpm);
        k.k_mp.push_back(kmp);
    }
    return k;
}

}  // namespace indexforms::cylinder
