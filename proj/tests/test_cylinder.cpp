#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "indexforms/cylinder.hpp"

using namespace indexforms;
using namespace indexforms::cylinder;

namespace {

CylinderProblem point_problem(double a = 0.25, int N = 8) {
    boundary::PotentialSpec pot;
    pot.constant = a;
    return CylinderProblem::make(BaseGrid(0, 1), N, pot);
}

int mode_of(const CylinderProblem& p, double lambda_target, int point = 0) {
    int best = 0;
    for (int k = 0; k < p.modes(); ++k)
        if (std::abs(p.lambda[point][k] - lambda_target) <
            std::abs(p.lambda[point][best] - lambda_target))
            best = k;
    return best;
}

/// flip the u=0 constraint off for one mode (kernel appears, index +1)
CylinderSection flip_up(const CylinderSection& s, const CylinderProblem& p, double lambda) {
    CylinderSection out = s;
    for (size_t q = 0; q < out.blocks.size(); ++q) {
        const int k = mode_of(p, lambda, int(q));
        out.blocks[q][k] = Matrix2::Zero();
    }
    return out;
}

/// add the u=1 constraint for one mode (cokernel appears, index -1)
CylinderSection flip_down(const CylinderSection& s, const CylinderProblem& p, double lambda) {
    CylinderSection out = s;
    for (size_t q = 0; q < out.blocks.size(); ++q) {
        const int k = mode_of(p, lambda, int(q));
        out.blocks[q][k] = Matrix2::Identity();
    }
    return out;
}

}  // namespace

TEST_CASE("mode decomposition: constant potential ladder") {
    auto p = point_problem(0.25, 4);
    REQUIRE(p.modes() == 9);
    for (int k = 0; k < 9; ++k)
        CHECK(std::abs(p.lambda[0][k] - (k - 4 + 0.25)) < 1e-12);
}

TEST_CASE("calderon projector: closed form, limits, decay") {
    auto p = point_problem(0.25, 8);
    auto c = calderon_projector(p);
    const int k0 = mode_of(p, 0.25);
    // block (1/(1+e^{-1/2})) [[1, e^{-1/4}],[e^{-1/4}, e^{-1/2}]]
    const double e = std::exp(-0.25);
    Matrix2 want;
    want << 1.0, e, e, e * e;
    want /= (1.0 + std::exp(-0.5));
    CHECK((c.blocks[0][k0] - want).cwiseAbs().maxCoeff() < 1e-14);

    // exponential approach to the APS-type limit blocks
    for (int k = 0; k < p.modes(); ++k) {
        const double l = p.lambda[0][k];
        if (std::abs(l) < 5) continue;
        Matrix2 limit = Matrix2::Zero();
        (l > 0 ? limit(0, 0) : limit(1, 1)) = 1.0;
        CHECK((c.blocks[0][k] - limit).cwiseAbs().maxCoeff() <= std::exp(-std::abs(l)));
    }
    CHECK(c.tail_deviation(p, 5.0) <= std::exp(-5.0));

    // fitted decay rate of the off-diagonal entry is within 10% of |lambda|
    const int ka = mode_of(p, 3.25), kb = mode_of(p, 5.25);
    const double ra = -std::log(std::abs(c.blocks[0][ka](0, 1)));
    const double rb = -std::log(std::abs(c.blocks[0][kb](0, 1)));
    const double rate = (rb - ra) / (5.25 - 3.25);
    CHECK(rate == doctest::Approx(1.0).epsilon(0.1));  // entries ~ e^{-|lambda|}

    CHECK_THROWS_AS(calderon_projector(point_problem(0.0, 4)), boundary::KernelGapError);
}

TEST_CASE("aps index by exact mode counting") {
    auto p = point_problem(0.25, 8);
    auto aps = CylinderSection::aps(p);
    CHECK(aps_index(p, aps)[0] == 0);

    // removing the u=0 constraint of the lambda = 1/4 mode gains e^{-u/4}
    CHECK(aps_index(p, flip_up(aps, p, 0.25))[0] == 1);
    CHECK(aps_index(p, flip_down(aps, p, 0.25))[0] == -1);

    // Calderon boundary condition: trivial kernel and cokernel
    auto cal = calderon_section(p);
    CHECK(aps_index(p, cal)[0] == 0);
    for (int k = 0; k < p.modes(); ++k) {
        const double l = p.lambda[0][k];
        const Vector2 v = l >= 0 ? Vector2(1.0, std::exp(-l)).normalized()
                                 : Vector2(std::exp(l), 1.0).normalized();
        CHECK((cal.blocks[0][k] * v).norm() > 0.9);  // Cauchy data never annihilated
    }
}

TEST_CASE("degree-0 theorem on the cylinder: Tr(P(D) - section) = index") {
    auto p = point_problem(0.25, 16);
    auto aps = CylinderSection::aps(p);
    for (auto [sec, want] : {std::pair<CylinderSection, int>{aps, 0},
                             {flip_up(aps, p, 0.25), 1},
                             {flip_down(aps, p, 1.25), -1},
                             {flip_up(flip_up(aps, p, 0.25), p, -1.75), 2}}) {
        auto tr = trace_relative_to_calderon(p, sec);
        const int idx = aps_index(p, sec)[0];
        CHECK(tr.tail_bound < 1e-9);
        CHECK(std::abs(tr.value[0] - idx) < 1e-9);
    }
}

TEST_CASE("relative index identity against the Toeplitz index") {
    auto p = point_problem(0.25, 8);
    auto aps = CylinderSection::aps(p);
    auto s1 = flip_up(aps, p, 0.25);
    auto rep = relative_index_identity(p, s1, aps);
    CHECK(rep.pass);
    CHECK(rep.lhs[0] == 1);
    CHECK(rep.rhs[0] == 1);

    auto s2 = flip_down(aps, p, -0.75);
    auto rep2 = relative_index_identity(p, s1, s2);
    CHECK(rep2.pass);
    CHECK(rep2.lhs[0] == 2);
}

TEST_CASE("domain projection identities") {
    auto p = point_problem(0.25, 6);
    auto aps = CylinderSection::aps(p);
    auto d = domain_projection(aps, p, 64);
    CHECK(d.idempotency_defect() < 1e-12);
    CHECK(d.range_defect() < 1e-12);

    // section zero -> projection is the identity
    CylinderSection zero = aps;
    for (auto& pt : zero.blocks)
        for (auto& b : pt) b = Matrix2::Zero();
    auto dz = domain_projection(zero, p, 64);
    double dev = 0;
    for (auto& m : dz.plus[0]) dev = std::max(dev, (m - Eigen::MatrixXcd::Identity(64, 64)).cwiseAbs().maxCoeff());
    CHECK(dev == 0.0);

    // P(s1) - P(s2) = K (s2 - s1) gamma has rank <= 2 per flipped mode
    auto s1 = flip_up(aps, p, 0.25);
    auto d1 = domain_projection(s1, p, 64);
    const int k0 = mode_of(p, 0.25);
    Eigen::MatrixXcd diff = d1.plus[0][k0] - d.plus[0][k0];
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(diff);
    int rank = 0;
    for (int i = 0; i < svd.singularValues().size(); ++i)
        if (svd.singularValues()[i] > 1e-10) ++rank;
    CHECK(rank <= 2);
}

TEST_CASE("laplacian eigenvalues vs the secular-equation oracle") {
    auto p = point_problem(0.25, 8);
    auto aps = CylinderSection::aps(p);
    auto grid = make_ugrid(64);
    const int k0 = mode_of(p, 2.25);
    const double lambda = p.lambda[0][k0];

    auto sp = laplacian_eigenvalues(lambda, aps.blocks[0][k0], +1, 300.0, grid);
    // oracle: f(0) = 0, f'(1) + lambda f(1) = 0 -> tan(nu) = -nu/lambda,
    // bisect each branch independently
    std::vector<double> oracle;
    for (int j = 1; oracle.size() < sp.mu.size(); ++j) {
        double lo = (j - 0.5) * M_PI + 1e-9, hi = j * M_PI - 1e-9;
        auto fn = [&](double nu) { return nu * std::cos(nu) + lambda * std::sin(nu); };
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (fn(lo) * fn(mid) <= 0 ? hi : lo) = mid;
        }
        oracle.push_back(lambda * lambda + 0.25 * (lo + hi) * (lo + hi));
    }
    REQUIRE(sp.mu.size() >= 3);
    for (size_t j = 0; j < sp.mu.size(); ++j) {
        CHECK(sp.mu[j] >= lambda * lambda - 1e-9);  // leading eigenvalue >= lambda^2
        CHECK(sp.mu[j] == doctest::Approx(oracle[j]).epsilon(1e-9));
    }

    // chirality -1 is isospectral here (no zero modes for APS at this mode)
    auto sm = laplacian_eigenvalues(lambda, aps.blocks[0][k0], -1, 300.0, grid);
    REQUIRE(sm.mu.size() == sp.mu.size());
    for (size_t j = 0; j < sp.mu.size(); ++j)
        CHECK(sm.mu[j] == doctest::Approx(sp.mu[j]).epsilon(1e-8));

    // count = 0 when the window is empty
    auto none = laplacian_eigenvalues(lambda, aps.blocks[0][k0], +1, 1e-6, grid);
    CHECK(none.mu.empty());
}

TEST_CASE("bound state appears for the flipped block") {
    auto p = point_problem(0.25, 8);
    auto aps = CylinderSection::aps(p);
    auto grid = make_ugrid(64);
    const int k0 = mode_of(p, 0.25);
    const double lambda = 0.25;
    // flipped-up block: no constraint on f at all, both conditions on g:
    // g(0) = g(1) = 0 with g = f' + lambda f; mu = lambda^2 (g = 0, f = e^{-lambda u})
    // becomes an exact eigenvalue: the kernel of D+ enters the spectrum
    Matrix2 zero = Matrix2::Zero();
    auto sp = laplacian_eigenvalues(lambda, zero, +1, 300.0, grid);
    REQUIRE(!sp.mu.empty());
    CHECK(sp.mu[0] <= lambda * lambda + 1e-9);
    // and the minus chirality has no matching zero-ish state below lambda^2+pi^2/2
    auto sm = laplacian_eigenvalues(lambda, zero, -1, 300.0, grid);
    const size_t extra = sp.mu.size() - sm.mu.size();
    CHECK(extra <= 1);
}

TEST_CASE("mckean-singer: graded heat trace is the index, t-independent") {
    auto p = point_problem(0.25, 6);
    auto aps = CylinderSection::aps(p);
    auto s1 = flip_up(aps, p, 0.25);
    auto t_aps = bvp_tables(p, aps, 400.0, 48);
    auto t_s1 = bvp_tables(p, s1, 400.0, 48);
    for (double t : {0.08, 0.2, 1.0, 5.0}) {
        CHECK(std::abs(supertrace_heat(t_aps, t)[0] - 0.0) < 2e-3);
        CHECK(std::abs(supertrace_heat(t_s1, t)[0] - 1.0) < 2e-3);
    }
    CHECK_THROWS_AS(supertrace_heat(t_aps, 1e-4), CutoffError);
}

TEST_CASE("relative heat trace: flip pair and large t") {
    auto p = point_problem(0.25, 6);
    auto aps = CylinderSection::aps(p);
    auto s1 = flip_down(aps, p, 0.25);
    auto t1 = bvp_tables(p, s1, 400.0, 48);
    auto t2 = bvp_tables(p, aps, 400.0, 48);
    // equal tables cancel identically
    CHECK(std::abs(relative_heat_trace(t2, t2, 0.1)[0]) < 1e-14);
    for (double t : {0.08, 0.5, 4.0})
        CHECK(std::abs(relative_heat_trace(t1, t2, t)[0] - (-1.0)) < 2e-3);
}

TEST_CASE("interior curvature: support, flat case, relative eta form") {
    BaseGrid g(2, 12);
    boundary::PotentialSpec pot;
    pot.constant = 0.25;
    pot.harmonics.push_back({1, 0.15, 0, 0.4});  // z-dependent family
    auto p = CylinderProblem::make(g, 4, pot);
    auto aps = CylinderSection::aps(p);
    auto s1 = flip_up(aps, p, 0.25);
    auto d0 = domain_projection(aps, p, 32);
    auto d1 = domain_projection(s1, p, 32);

    ModeConnection mc = ModeConnection::flat(g, 4);
    auto& sc = mc.scalar[0];
    sc.assign(g.points(), Vector::Zero(p.modes()));
    for (int q = 0; q < g.points(); ++q)
        for (int k = 0; k < p.modes(); ++k)
            sc[q][k] = Complex(0, 0.2 * std::sin(g.coord(q, 1)) / (1.0 + k));

    auto r1 = interior_curvature(d1, mc);
    CHECK(r1.support_defect(d1) < 1e-8);

    // constant section, flat connection, constant potential: zero curvature
    boundary::PotentialSpec flatpot;
    flatpot.constant = 0.25;
    auto pflat = CylinderProblem::make(g, 4, flatpot);
    auto dflat = domain_projection(CylinderSection::aps(pflat), pflat, 32);
    auto rflat = interior_curvature(dflat, ModeConnection::flat(g, 4));
    double worst = 0;
    for (auto* fam : {&rflat.plus, &rflat.minus})
        for (auto& [m, blocks] : *fam)
            for (auto& pt : blocks)
                for (auto& b : pt) worst = std::max(worst, b.cwiseAbs().maxCoeff());
    CHECK(worst < 1e-10);

    // relative interior eta form: no degree-0 term, finite series
    auto eta = relative_interior_eta_form(d1, d0, mc);
    CHECK(eta.sup_norm_degree(0) == 0.0);
    CHECK(std::isfinite(eta.sup_norm()));

    // equal sections give zero
    auto eta0 = relative_interior_eta_form(d0, d0, mc);
    CHECK(eta0.sup_norm() < 1e-14);
}

TEST_CASE("commutator trace defects") {
    auto p = point_problem(0.25, 6);
    auto grid = make_ugrid(48, true);  // Chebyshev for spectral quadrature

    // kernel supported away from the boundary: both routes vanish
    GeneralizedKernel interior;
    interior.mode_indices = {mode_of(p, 0.25)};
    Eigen::MatrixXcd bump(grid.M, grid.M);
    for (int i = 0; i < grid.M; ++i)
        for (int j = 0; j < grid.M; ++j) {
            const double du = grid.u[i] - 0.5, dv = grid.u[j] - 0.5;
            bump(i, j) = std::exp(-80.0 * (du * du + dv * dv));
        }
    interior.k_pm = {bump};
    interior.k_mp = {0.5 * bump};
    auto ci = commutator_trace_defect(p, 0, interior, grid);
    CHECK(std::abs(ci.direct) < 1e-10);
    CHECK(std::abs(ci.boundary_formula) < 1e-10);

    // generic boundary-touching kernel: nonzero, two routes agree
    GeneralizedKernel touching;
    touching.mode_indices = {mode_of(p, 0.25)};
    Eigen::MatrixXcd kpm(grid.M, grid.M), kmp(grid.M, grid.M);
    for (int i = 0; i < grid.M; ++i)
        for (int j = 0; j < grid.M; ++j) {
            const double u = grid.u[i], v = grid.u[j];
            kpm(i, j) = std::exp(-3.0 * (u * u + v * v)) * (1.0 + 0.3 * u * v);
            kmp(i, j) = 0.4 * std::exp(-2.0 * ((1 - u) * (1 - u) + (1 - v) * (1 - v)));
        }
    touching.k_pm = {kpm};
    touching.k_mp = {kmp};
    auto ct = commutator_trace_defect(p, 0, touching, grid);
    CHECK(std::abs(ct.direct) > 1e-3);
    CHECK(std::abs(ct.direct - ct.boundary_formula) < 1e-6);

    // range-compatible smoothing operator: the defect vanishes
    auto aps = CylinderSection::aps(p);
    auto tab = bvp_tables(p, aps, 300.0, 48);
    // rebuild tables on the Chebyshev grid for quadrature accuracy
    BVPTables tabc = tab;
    tabc.grid = grid;
    for (int k = 0; k < p.modes(); ++k) {
        tabc.plus[0][k] = laplacian_eigenvalues(p.lambda[0][k], aps.blocks[0][k], +1, 300.0, grid);
        tabc.minus[0][k] = laplacian_eigenvalues(p.lambda[0][k], aps.blocks[0][k], -1, 300.0, grid);
    }
    auto lam = range_compatible_smoothing(p, tabc, 0, {mode_of(p, 0.25), mode_of(p, 1.25)}, 0.05);
    auto cl = commutator_trace_defect(p, 0, lam, grid);
    CHECK(std::abs(cl.direct) < 1e-8);
}

TEST_CASE("interior relative chern: degree-0 approaches the relative index") {
    auto p = point_problem(0.25, 5);
    auto aps = CylinderSection::aps(p);
    auto s1 = flip_up(aps, p, 0.25);
    auto t1 = bvp_tables(p, s1, 500.0, 48);
    auto t2 = bvp_tables(p, aps, 500.0, 48);
    ModeConnection mc = ModeConnection::flat(p.base, 5);
    auto d1 = domain_projection(s1, p, 48);
    auto d2 = domain_projection(aps, p, 48);
    // T^0 base: curvature fields are empty, only the heat-trace part remains
    InteriorCurvature r1, r2;
    r1.grid = r2.grid = t1.grid;
    r1.base = r2.base = p.base;
    r1.fourier_cutoff = r2.fourier_cutoff = 5;
    for (double t : {0.05, 0.3, 2.0}) {
        FormField ch = interior_relative_chern(p, t1, t2, r1, r2, mc, t);
        CHECK(std::abs(ch.value(0, 0).real() - 1.0) < 5e-3);
    }
    (void)d1;
    (void)d2;
}
