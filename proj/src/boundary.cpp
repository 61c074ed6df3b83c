#include "indexforms/boundary.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>

#include "indexforms/zeta.hpp"

namespace indexforms::boundary {

namespace {

void fix_phases(Matrix& vectors) {
    for (int c = 0; c < vectors.cols(); ++c) {
        int imax = 0;
        double best = -1;
        for (int r = 0; r < vectors.rows(); ++r) {
            const double a = std::abs(vectors(r, c));
            if (a > best) { best = a; imax = r; }
        }
        const Complex z = vectors(imax, c);
        if (std::abs(z) > 0) vectors.col(c) *= std::conj(z) / std::abs(z);
    }
}

// 16-point Gauss-Legendre nodes/weights on [-1, 1]
const double kGaussX[8] = {0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
                           0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
                           0.9445750230732326, 0.9894009349916499};
const double kGaussW[8] = {0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
                           0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
                           0.0622535239386479, 0.0271524594117541};

double gauss16(const std::function<double(double)>& f, double a, double b) {
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double s = 0;
    for (int i = 0; i < 8; ++i)
        s += kGaussW[i] * (f(mid + half * kGaussX[i]) + f(mid - half * kGaussX[i]));
    return s * half;
}

}  // namespace

Complex PotentialSpec::coefficient(int m, double s, double t) const {
    Complex acc = (m == 0) ? Complex(constant) : Complex(0);
    for (const auto& h : harmonics) {
        if (std::abs(m) != h.mode) continue;
        const double z = (h.base_axis == 0) ? s : t;
        acc += 0.5 * h.amplitude * (1.0 + h.base_depth * std::cos(z));
    }
    return acc;
}

double PotentialSpec::mean(double s, double t) const { return coefficient(0, s, t).real(); }

double BoundaryOperatorFamily::hermitian_defect() const {
    double worst = 0;
    for (auto& m : matrices) worst = std::max(worst, (m - m.adjoint()).cwiseAbs().maxCoeff());
    return worst;
}

double GrassmannSection::idempotency_defect() const {
    double worst = 0;
    for (auto& p : projection) {
        worst = std::max(worst, ((p * p - p).cwiseAbs().maxCoeff()));
        worst = std::max(worst, ((p - p.adjoint()).cwiseAbs().maxCoeff()));
    }
    return worst;
}

double GrassmannSection::tail_weight(const GrassmannSection& other) const {
    const int N = fourier_cutoff;
    const int half = N / 2;
    double worst = 0;
    for (size_t q = 0; q < projection.size(); ++q) {
        const Matrix d = projection[q] - other.projection[q];
        for (int r = 0; r < d.rows(); ++r)
            for (int c = 0; c < d.cols(); ++c) {
                const int kr = r - N, kc = c - N;
                if (std::abs(kr) > half || std::abs(kc) > half)
                    worst = std::max(worst, std::abs(d(r, c)));
            }
    }
    return worst;
}

BoundaryOperatorFamily assemble_boundary_family(const BaseGrid& base, int N,
                                                const PotentialSpec& potential) {
    if (N < 2) throw std::invalid_argument("assemble_boundary_family: N >= 2 required");
    BoundaryOperatorFamily f;
    f.base = base;
    f.fourier_cutoff = N;
    const int n = 2 * N + 1;
    f.matrices.resize(base.points());
    f.mean_potential.resize(base.points());
    for (int p = 0; p < base.points(); ++p) {
        const double s = base.coord(p, 0), t = base.coord(p, 1);
        Matrix m = Matrix::Zero(n, n);
        for (int r = -N; r <= N; ++r) {
            for (int c = -N; c <= N; ++c) {
                Complex v = (r == c) ? Complex(double(r)) : Complex(0);
                v += potential.coefficient(r - c, s, t);
                m(r + N, c + N) = v;
            }
        }
        f.matrices[p] = 0.5 * (m + m.adjoint().eval());  // kill roundoff asymmetry
        f.mean_potential[p] = potential.mean(s, t);
    }
    return f;
}

SpectralDecomposition decompose(const BoundaryOperatorFamily& f) {
    SpectralDecomposition sd;
    sd.eigenvalues.resize(f.matrices.size());
    sd.eigenvectors.resize(f.matrices.size());
    sd.gap = std::numeric_limits<double>::infinity();
    for (size_t p = 0; p < f.matrices.size(); ++p) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(f.matrices[p]);
        sd.eigenvalues[p] = es.eigenvalues();
        sd.eigenvectors[p] = es.eigenvectors();
        fix_phases(sd.eigenvectors[p]);
        for (int i = 0; i < sd.eigenvalues[p].size(); ++i)
            sd.gap = std::min(sd.gap, std::abs(sd.eigenvalues[p][i]));
    }
    return sd;
}

GrassmannSection spectral_projection(const BoundaryOperatorFamily& f, double gap_tol) {
    SpectralDecomposition sd = decompose(f);
    if (sd.gap <= gap_tol)
        throw KernelGapError("spectral_projection: spectral gap " + std::to_string(sd.gap) +
                             " at or below tolerance");
    GrassmannSection g;
    g.base = f.base;
    g.fourier_cutoff = f.fourier_cutoff;
    g.perturbation_rank = 0;
    g.projection.resize(f.matrices.size());
    for (size_t p = 0; p < f.matrices.size(); ++p) {
        const int n = f.modes();
        Matrix proj = Matrix::Zero(n, n);
        for (int i = 0; i < n; ++i)
            if (sd.eigenvalues[p][i] > 0)
                proj += sd.eigenvectors[p].col(i) * sd.eigenvectors[p].col(i).adjoint();
        g.projection[p] = proj;
    }
    return g;
}

// ---------------------------------------------------------------------------
// Eta invariant

namespace {

/// Signed heat trace G(t) = sum lambda e^{-t lambda^2} of the full operator:
/// trusted core eigenvalues from the matrix plus the exact integer-ladder tail
/// n + abar beyond the core window.
struct EtaHeatData {
    std::vector<double> core;  // |lambda| <= window
    double abar = 0;
    double window = 0;

    double value(double t) const {
        double s = 0;
        for (double l : core) s += l * std::exp(-t * l * l);
        // tail n + abar with n + abar > window, symmetric negative side
        for (int n = int(std::ceil(window - abar));; ++n) {
            const double l = n + abar;
            if (l <= window) continue;
            const double term = l * std::exp(-t * l * l);
            s += term;
            if (std::abs(term) < 1e-300 || t * l * l > 745) break;
            if (std::abs(term) < 1e-18 * (1 + std::abs(s)) && t * l * l > 3) break;
        }
        for (int n = int(std::floor(-window - abar));; --n) {
            const double l = n + abar;
            if (l >= -window) continue;
            const double term = l * std::exp(-t * l * l);
            s += term;
            if (std::abs(term) < 1e-300 || t * l * l > 745) break;
            if (std::abs(term) < 1e-18 * (1 + std::abs(s)) && t * l * l > 3) break;
        }
        return s;
    }
};

double eta_heat_fit_point(const Eigen::VectorXd& eigs, double abar, int N, double gap) {
    EtaHeatData data;
    data.abar = abar;
    data.window = N / 2.0;
    int core_count = 0;
    for (int i = 0; i < eigs.size(); ++i)
        if (std::abs(eigs[i]) <= data.window) {
            data.core.push_back(eigs[i]);
            ++core_count;
        }
    // the untruncated spectrum is the integer ladder n + abar; sanity-check
    // that the trusted core has the expected population
    int expected = 0;
    for (int n = -2 * N; n <= 2 * N; ++n)
        if (std::abs(n + abar) <= data.window) ++expected;
    if (core_count != expected)
        throw zeta::FitDivergenceError("eta heat fit: core eigenvalue count " +
                                       std::to_string(core_count) + " != ladder count " +
                                       std::to_string(expected));

    // small-t expansion fit on [1e-4, 0.25]; G is exponentially small there,
    // the fit certifies that and supplies the [0, t0] integral
    const double t0 = 0.25;
    const auto grid = zeta::geometric_grid(1e-4, t0, 24);
    std::vector<double> samples(grid.size());
    for (size_t i = 0; i < grid.size(); ++i) samples[i] = data.value(grid[i]);
    const auto fit =
        zeta::heat_trace_expansion_fit(grid, samples, {0.0, 0.5, 1.0, 1.5}, false, 1e-6);
    double eta = fit.integral_with_sqrt_weight(t0);

    // quadrature of t^{-1/2} G(t) from t0 out to the spectral-gap horizon
    const double T = std::min(1e7, 40.0 / (gap * gap));
    const double u0 = std::log(t0), u1 = std::log(T);
    const int panels = std::max(8, int(std::ceil((u1 - u0) * 2.5)));
    const auto integrand = [&](double u) {
        const double t = std::exp(u);
        return std::sqrt(t) * data.value(t);  // t^{-1/2} G dt = t^{1/2} G du
    };
    for (int k = 0; k < panels; ++k) {
        const double a = u0 + (u1 - u0) * k / panels;
        const double b = u0 + (u1 - u0) * (k + 1) / panels;
        eta += gauss16(integrand, a, b);
    }
    return eta / std::sqrt(M_PI);
}

}  // namespace

FormField eta_invariant(const BoundaryOperatorFamily& f, EtaMethod method, double gap_tol) {
    FormField out(f.base);
    Vector& v = out.component(0);
    if (method == EtaMethod::ClosedForm) {
        for (int p = 0; p < f.base.points(); ++p) {
            const double q = f.mean_potential[p] - std::floor(f.mean_potential[p]);
            if (q < gap_tol || 1.0 - q < gap_tol)
                throw KernelGapError("eta_invariant: potential mean at an integer");
            v[p] = zeta::hurwitz_zeta(0.0, q).real() - zeta::hurwitz_zeta(0.0, 1.0 - q).real();
        }
        return out;
    }
    SpectralDecomposition sd = decompose(f);
    if (sd.gap <= gap_tol) throw KernelGapError("eta_invariant: spectral gap below tolerance");
    for (int p = 0; p < f.base.points(); ++p)
        v[p] = eta_heat_fit_point(sd.eigenvalues[p], f.mean_potential[p], f.fourier_cutoff,
                                  sd.gap);
    return out;
}

// ---------------------------------------------------------------------------
// Relative eta, indices

FormField relative_eta_pointwise(const GrassmannSection& p1, const GrassmannSection& p2) {
    if (p1.modes() != p2.modes() || !(p1.base == p2.base))
        throw std::invalid_argument("relative_eta_pointwise: dimension mismatch");
    FormField out(p1.base);
    Vector& v = out.component(0);
    for (int p = 0; p < p1.base.points(); ++p)
        v[p] = 2.0 * (p1.projection[p] - p2.projection[p]).trace();
    return out;
}

std::vector<Matrix> range_basis(const GrassmannSection& p) {
    std::vector<Matrix> out(p.projection.size());
    for (size_t q = 0; q < p.projection.size(); ++q) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(p.projection[q]);
        int rank = 0;
        for (int i = 0; i < es.eigenvalues().size(); ++i)
            if (es.eigenvalues()[i] > 0.5) ++rank;
        Matrix basis(p.projection[q].rows(), rank);
        int c = 0;
        for (int i = 0; i < es.eigenvalues().size(); ++i)
            if (es.eigenvalues()[i] > 0.5) basis.col(c++) = es.eigenvectors().col(i);
        fix_phases(basis);
        out[q] = basis;
    }
    return out;
}

ToeplitzRanks toeplitz_ranks(const GrassmannSection& p1, const GrassmannSection& p2,
                             double rank_tol) {
    const auto b1 = range_basis(p1), b2 = range_basis(p2);
    ToeplitzRanks out;
    out.kernel.resize(b1.size());
    out.cokernel.resize(b1.size());
    for (size_t q = 0; q < b1.size(); ++q) {
        const Matrix m = b2[q].adjoint() * b1[q];
        Eigen::JacobiSVD<Matrix> svd(m);
        int rank = 0;
        for (int i = 0; i < svd.singularValues().size(); ++i)
            if (svd.singularValues()[i] > rank_tol) ++rank;
        out.kernel[q] = int(m.cols()) - rank;
        out.cokernel[q] = int(m.rows()) - rank;
    }
    return out;
}

std::vector<int> relative_index(const GrassmannSection& p1, const GrassmannSection& p2,
                                IndexMethod method, double rank_tol) {
    if (p1.modes() != p2.modes() || !(p1.base == p2.base))
        throw std::invalid_argument("relative_index: dimension mismatch");
    const int pts = p1.base.points();
    std::vector<int> by_trace(pts), by_svd(pts);
    if (method != IndexMethod::Svd) {
        for (int q = 0; q < pts; ++q) {
            const double tr = (p1.projection[q] - p2.projection[q]).trace().real();
            const double r = std::round(tr);
            if (std::abs(tr - r) > 1e-6)
                throw MethodsDisagreeError("relative_index: trace " + std::to_string(tr) +
                                           " is not an integer");
            by_trace[q] = int(r);
        }
        if (method == IndexMethod::Trace) return by_trace;
    }
    const auto ranks = toeplitz_ranks(p1, p2, rank_tol);
    for (int q = 0; q < pts; ++q) by_svd[q] = ranks.kernel[q] - ranks.cokernel[q];
    if (method == IndexMethod::Svd) return by_svd;
    for (int q = 0; q < pts; ++q)
        if (by_trace[q] != by_svd[q])
            throw MethodsDisagreeError("relative_index: trace method " +
                                       std::to_string(by_trace[q]) + " != svd method " +
                                       std::to_string(by_svd[q]));
    return by_trace;
}

// ---------------------------------------------------------------------------
// Induced connection and curvature

namespace {

OperatorForm projection_form(const GrassmannSection& p) {
    OperatorForm pf(p.base, p.modes(), 0, Parity::Even);
    auto& blk = pf.block(0);
    for (int q = 0; q < p.base.points(); ++q) blk[q] = p.projection[q];
    return pf;
}

/// Curvature (P nabla P)^2 = P (X ^ X) P + P F P with X = dP + [omega, P].
/// Field derivatives are spectral: curvature identities then hold to
/// analytic-interpolation accuracy rather than stencil order.
OperatorForm projected_curvature(const std::vector<Matrix>& proj, const OperatorForm& pf,
                                 const ConnectionData& c) {
    const OperatorForm x = covariant_derivative(c, pf, DerivativeKind::Spectral);
    OperatorForm r = sandwich(proj, wedge_multiply(x, x));
    if (!c.is_flat()) r += sandwich(proj, c.curvature(DerivativeKind::Spectral));
    r.set_parity(Parity::Even);
    r.prune();
    return r;
}

}  // namespace

std::pair<ConnectionData, OperatorForm> induced_connection_and_curvature(
    const GrassmannSection& p, const ConnectionData& c) {
    if (c.fibre_dim() != p.modes() || !(c.base == p.base))
        throw std::invalid_argument("induced_connection_and_curvature: dimension mismatch");
    const OperatorForm pf = projection_form(p);
    const OperatorForm x = covariant_derivative(c, pf, DerivativeKind::Spectral);

    ConnectionData induced = c;
    for (int axis = 0; axis < p.base.dim; ++axis) {
        const Mask am = 1u << axis;
        if (!x.has(am) && c.one_form.count(axis) == 0) continue;
        auto& dst = induced.one_form[axis];
        if (dst.empty()) dst.assign(p.base.points(), Matrix::Zero(p.modes(), p.modes()));
        for (int q = 0; q < p.base.points(); ++q) {
            const Matrix& xq = x.block(am, q);
            dst[q] += p.projection[q] * xq - xq * p.projection[q];
        }
    }
    return {induced, projected_curvature(p.projection, pf, c)};
}

FormField relative_eta_form(const GrassmannSection& p1, const GrassmannSection& p2,
                            const ConnectionData& c, double decay_tol) {
    if (p1.tail_weight(p2) > decay_tol)
        throw NotRelativelySmoothingError("relative_eta_form: tail decay test failed");
    const OperatorForm f1 = projection_form(p1), f2 = projection_form(p2);
    const OperatorForm r1 = projected_curvature(p1.projection, f1, c);
    const OperatorForm r2 = projected_curvature(p2.projection, f2, c);

    FormField out = trace(f1 - f2);
    OperatorForm pow1 = r1, pow2 = r2;
    double factorial = 1;
    for (int k = 1; 2 * k <= p1.base.dim; ++k) {
        factorial *= k;
        const double sign = (k % 2 == 0) ? 1.0 : -1.0;
        out += Complex(sign / factorial) * trace(pow1 - pow2);
        if (2 * (k + 1) <= p1.base.dim) {
            pow1 = wedge_multiply(pow1, r1);
            pow2 = wedge_multiply(pow2, r2);
        }
    }
    return out;
}

FormField kernel_bundle_chern(const ToeplitzFamily& t, const ConnectionData& c,
                              double rank_tol) {
    const auto& p1 = t.source;
    const auto& p2 = t.target;
    const auto b1 = range_basis(p1), b2 = range_basis(p2);
    const int n = p1.modes();
    const int pts = p1.base.points();

    // kernel/cokernel bases as projections in the doubled graded space
    std::vector<Matrix> pi0(pts);
    int kdim = -1, cdim = -1;
    for (int q = 0; q < pts; ++q) {
        const Matrix m = b2[q].adjoint() * b1[q];
        Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
        int rank = 0;
        for (int i = 0; i < svd.singularValues().size(); ++i)
            if (svd.singularValues()[i] > rank_tol) ++rank;
        const int kq = int(m.cols()) - rank, cq = int(m.rows()) - rank;
        if (q == 0) { kdim = kq; cdim = cq; }
        if (kq != kdim || cq != cdim)
            throw RankJumpError("kernel_bundle_chern: kernel dimension varies over base");
        Matrix kb = b1[q] * svd.matrixV().rightCols(kq);   // ker(P2 P1) in C^n
        Matrix cb = b2[q] * svd.matrixU().rightCols(cq);   // ker((P2 P1)^*) in C^n
        Matrix proj = Matrix::Zero(2 * n, 2 * n);
        proj.topLeftCorner(n, n) = kb * kb.adjoint();
        proj.bottomRightCorner(n, n) = cb * cb.adjoint();
        pi0[q] = proj;
    }

    // doubled connection, projected curvature, finite exponential series
    ConnectionData cc = ConnectionData::flat(p1.base, n, n);
    for (auto& [axis, mats] : c.one_form) {
        auto& dst = cc.one_form[axis];
        dst.assign(pts, Matrix::Zero(2 * n, 2 * n));
        for (int q = 0; q < pts; ++q) {
            dst[q].topLeftCorner(n, n) = mats[q];
            dst[q].bottomRightCorner(n, n) = mats[q];
        }
    }
    OperatorForm pf(p1.base, n, n, Parity::Even);
    auto& blk = pf.block(0);
    for (int q = 0; q < pts; ++q) blk[q] = pi0[q];
    const OperatorForm r0 = projected_curvature(pi0, pf, cc);

    FormField out = supertrace(pf);
    OperatorForm pw = r0;
    double factorial = 1;
    for (int k = 1; 2 * k <= p1.base.dim; ++k) {
        factorial *= k;
        const double sign = (k % 2 == 0) ? 1.0 : -1.0;
        out += Complex(sign / factorial) * supertrace(pw);
        if (2 * (k + 1) <= p1.base.dim) pw = wedge_multiply(pw, r0);
    }
    return out;
}

int fhs_chern_number(const GrassmannSection& p) {
    if (p.base.dim != 2) throw std::invalid_argument("fhs_chern_number: base must be T^2");
    const auto basis = range_basis(p);
    const int n = p.base.points_per_axis;
    double total = 0;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const int q00 = p.base.index(i, j);
            const int q10 = p.base.index(i + 1, j);
            const int q11 = p.base.index(i + 1, j + 1);
            const int q01 = p.base.index(i, j + 1);
            const Complex u = (basis[q00].adjoint() * basis[q10]).determinant() *
                              (basis[q10].adjoint() * basis[q11]).determinant() *
                              (basis[q11].adjoint() * basis[q01]).determinant() *
                              (basis[q01].adjoint() * basis[q00]).determinant();
            total += std::arg(u);
        }
    }
    return int(std::lround(total / kTwoPi));
}

// ---------------------------------------------------------------------------
// Model families

double GaussianStream::operator()() {
    if (have_) {
        have_ = false;
        return spare_;
    }
    double u1, u2;
    do {
        u1 = double(gen_() >> 11) * 0x1p-53;
    } while (u1 <= 0);
    u2 = double(gen_() >> 11) * 0x1p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(kTwoPi * u2);
    have_ = true;
    return r * std::cos(kTwoPi * u2);
}

GrassmannSection random_low_mode_conjugation(const GrassmannSection& p, int m, double eps,
                                             std::uint64_t seed) {
    GaussianStream g(seed);
    const int N = p.fourier_cutoff;
    const int n = p.modes();
    Matrix h = Matrix::Zero(n, n);
    for (int r = -m; r <= m; ++r)
        for (int c = -m; c <= m; ++c) {
            if (c < r) continue;
            const Complex v(g(), r == c ? 0.0 : g());
            h(r + N, c + N) = v;
            h(c + N, r + N) = std::conj(v);
        }
    Eigen::SelfAdjointEigenSolver<Matrix> es(h);
    GrassmannSection out = p;
    out.perturbation_rank = 2 * m + 1;
    for (int q = 0; q < p.base.points(); ++q) {
        Vector phase(n);
        for (int i = 0; i < n; ++i)
            phase[i] = std::exp(Complex(0, eps * es.eigenvalues()[i]));
        const Matrix u = es.eigenvectors() * phase.asDiagonal() * es.eigenvectors().adjoint();
        out.projection[q] = u * p.projection[q] * u.adjoint();
    }
    return out;
}

GrassmannSection mode_flip(const GrassmannSection& p, const SpectralDecomposition& sd,
                           double lambda, bool remove) {
    GrassmannSection out = p;
    out.perturbation_rank = std::max(1, p.perturbation_rank + 1);
    for (int q = 0; q < p.base.points(); ++q) {
        int best = 0;
        for (int i = 0; i < sd.eigenvalues[q].size(); ++i)
            if (std::abs(sd.eigenvalues[q][i] - lambda) <
                std::abs(sd.eigenvalues[q][best] - lambda))
                best = i;
        const Vector v = sd.eigenvectors[q].col(best);
        const double occ = (v.adjoint() * p.projection[q] * v)(0).real();
        if (remove && occ < 0.5)
            throw std::invalid_argument("mode_flip: mode already empty");
        if (!remove && occ > 0.5)
            throw std::invalid_argument("mode_flip: mode already occupied");
        out.projection[q] += (remove ? -1.0 : 1.0) * (v * v.adjoint());
    }
    return out;
}

GrassmannSection bloch_twist(const GrassmannSection& p, int mode_empty, int mode_filled,
                             double m_par) {
    if (p.base.dim != 2) throw std::invalid_argument("bloch_twist: base must be T^2");
    const int N = p.fourier_cutoff;
    GrassmannSection out = p;
    out.perturbation_rank = 2;
    const int ie = mode_empty + N, io = mode_filled + N;
    for (int q = 0; q < p.base.points(); ++q) {
        const double s = p.base.coord(q, 0), t = p.base.coord(q, 1);
        const double dx = std::sin(s), dy = std::sin(t), dz = m_par - std::cos(s) - std::cos(t);
        const double norm = std::sqrt(dx * dx + dy * dy + dz * dz);
        // lower-band projector (I - d_hat . sigma)/2 on span{e_empty, e_filled}
        Matrix b(2, 2);
        b(0, 0) = 0.5 * (1.0 - dz / norm);
        b(1, 1) = 0.5 * (1.0 + dz / norm);
        b(0, 1) = -0.5 * Complex(dx, -dy) / norm;
        b(1, 0) = -0.5 * Complex(dx, dy) / norm;
        Matrix& proj = out.projection[q];
        // original occupation on the two chosen modes: empty/filled
        proj(ie, ie) = b(0, 0);
        proj(io, io) = b(1, 1);
        proj(ie, io) = b(0, 1);
        proj(io, ie) = b(1, 0);
    }
    return out;
}

GrassmannSection shift_conjugate(const GrassmannSection& p) {
    const int n = p.modes();
    Matrix s = Matrix::Zero(n, n);
    for (int i = 0; i + 1 < n; ++i) s(i + 1, i) = 1.0;
    GrassmannSection out = p;
    out.perturbation_rank = 1;
    for (int q = 0; q < p.base.points(); ++q)
        out.projection[q] = s * p.projection[q] * s.adjoint();
    return out;
}

}  // namespace indexforms::boundary
