#pragma once

#include <Eigen/Dense>

#include "indexforms/boundary.hpp"
#include "indexforms/forms.hpp"

namespace indexforms::cylinder {

using Matrix2 = Eigen::Matrix2cd;
using Vector2 = Eigen::Vector2cd;

struct DegenerateBCError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IdentityViolationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CutoffError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct RootFinderStallError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Model fibration with fibre [0,1] x S^1 and D = Upsilon (d/du + boundary
/// operator). Everything is mode-diagonal: per Fourier mode k the boundary
/// operator acts as the scalar lambda_k(z) and the chiral parts are
/// d/du + lambda (E+) and -d/du + lambda (E-).
struct CylinderProblem {
    BaseGrid base;
    int fourier_cutoff = 8;                  // modes -N..N
    double upsilon = 1.0;                    // chirality sign
    std::vector<Eigen::VectorXd> lambda;     // [point] -> sorted mode eigenvalues
    double mean_potential = 0.25;

    int modes() const { return 2 * fourier_cutoff + 1; }
    static CylinderProblem make(const BaseGrid& base, int N,
                                const boundary::PotentialSpec& pot, double upsilon = 1.0);
};

/// Mode-diagonal boundary condition: per mode a 2x2 orthogonal projection on
/// the Cauchy data (f(0), f(1)). Defaults to the APS block
/// diag(lambda > 0, lambda < 0).
struct CylinderSection {
    BaseGrid base;
    int fourier_cutoff = 8;
    std::vector<std::vector<Matrix2>> blocks;  // [point][mode]

    static CylinderSection aps(const CylinderProblem& p);
    double idempotency_defect() const;
    /// Trace of (this - other) summed over modes, per base point.
    std::vector<double> relative_trace(const CylinderSection& other) const;
};

/// Calderon projector: per mode the rank-1 projection onto the Cauchy data
/// (1, e^{-lambda}) of the interior solution.
struct CalderonData {
    std::vector<std::vector<Matrix2>> blocks;
    /// sup over modes with |lambda| >= from of || block - APS limit block ||
    double tail_deviation(const CylinderProblem& p, double from) const;
};

CalderonData calderon_projector(const CylinderProblem& p, double gap_tol = 1e-6);
CylinderSection calderon_section(const CylinderProblem& p, double gap_tol = 1e-6);

/// Index of D^+ with the given boundary condition by exact mode-wise solution
/// counting: mode k contributes a kernel line iff the block annihilates
/// (1, e^{-lambda}); the cokernel comes from the adjoint data (1, e^{lambda}).
std::vector<int> aps_index(const CylinderProblem& p, const CylinderSection& s);

/// Tr(P(D) - section) per base point together with an analytic bound on the
/// discarded beyond-truncation tail.
struct RelativeCalderonTrace {
    std::vector<double> value;
    double tail_bound = 0;
};
RelativeCalderonTrace trace_relative_to_calderon(const CylinderProblem& p,
                                                 const CylinderSection& s);

/// ind(D_{P1}) - ind(D_{P2}) = ind(P2, P1): both sides by independent routes,
/// exact integer equality per base point.
struct RelativeIndexReport {
    std::vector<int> lhs, rhs;
    bool pass = true;
};
RelativeIndexReport relative_index_identity(const CylinderProblem& p,
                                            const CylinderSection& s1,
                                            const CylinderSection& s2);

/// Pointwise index of the mode-diagonal Toeplitz pair (trace and rank routes).
std::vector<int> toeplitz_index(const CylinderSection& s1, const CylinderSection& s2);

// ---------------------------------------------------------------------------
// Interior machinery on the u-grid

struct UGrid {
    int M = 64;
    bool chebyshev = false;
    Eigen::VectorXd u;       // nodes in [0,1], u[0] = 0, u[M-1] = 1
    Eigen::VectorXd w;       // quadrature weights
    Eigen::MatrixXd diff;    // differentiation matrix
};
UGrid make_ugrid(int M = 64, bool chebyshev = false);

/// Smoothstep cutoff: 1 on [0, 1/4], 0 on [3/4, 1], C^2 in between.
double poisson_cutoff(double u);

/// Domain projection P = I - K . section . gamma per mode and chirality,
/// where K is the cutoff heat extension of boundary data.
struct DomainProjection {
    UGrid grid;
    BaseGrid base;
    int fourier_cutoff = 8;
    // [point][mode], M x M
    std::vector<std::vector<Eigen::MatrixXcd>> plus, minus;
    CylinderSection section;

    double idempotency_defect() const;
    /// sup norm of section * gamma * P (must vanish).
    double range_defect() const;
};

DomainProjection domain_projection(const CylinderSection& s, const CylinderProblem& p,
                                   int M = 64, bool chebyshev = false);

/// Mode-diagonal connection over the base: anti-Hermitian scalar one-form per
/// mode (same scalar on both chiralities).
struct ModeConnection {
    BaseGrid base;
    int fourier_cutoff = 8;
    std::map<int, std::vector<Vector>> scalar;  // [axis][point](mode index)

    static ModeConnection flat(const BaseGrid& base, int N);
    /// dw as scalar 2-form per mode (spectral derivative over the base).
    std::map<Mask, std::vector<Vector>> curvature_scalars() const;
};

/// Mode-diagonal chiral 2-form field: [point][mode] M x M matrices per mask.
struct InteriorCurvature {
    UGrid grid;
    BaseGrid base;
    int fourier_cutoff = 8;
    std::map<Mask, std::vector<std::vector<Eigen::MatrixXcd>>> plus, minus;

    double support_defect(const DomainProjection& d) const;  // P R P = R
};

/// R = (P nabla P)^2 per chirality; includes the second-fundamental-form
/// correction through the projected square.
InteriorCurvature interior_curvature(const DomainProjection& d, const ModeConnection& c);

/// eta^[M](P1, P2) = sum_{k>=1} (-1)^k/k! Str(R1^k - R2^k); no degree-0 term.
FormField relative_interior_eta_form(const DomainProjection& d1, const DomainProjection& d2,
                                     const ModeConnection& c, double decay_tol = 1e-6);

// ---------------------------------------------------------------------------
// Boundary-value spectra

/// Eigenvalues and nodal eigenfunctions of -f'' + lambda^2 f on [0,1] with
/// the section-induced boundary conditions, per chirality.
struct ModeSpectrum {
    std::vector<double> mu;
    Eigen::MatrixXcd funcs;  // columns are nodal eigenfunctions on the grid
};

/// Characteristic-equation eigen tables for one mode at one base point.
/// chirality +1: conditions  s (f(0),f(1)) = 0 and s_perp (g(0),g(1)) = 0
/// with g = f' + lambda f;  chirality -1 swaps the roles.
ModeSpectrum laplacian_eigenvalues(double lambda, const Matrix2& block, int chirality,
                                   double mu_max, const UGrid& grid);

struct BVPTables {
    UGrid grid;
    BaseGrid base;
    int fourier_cutoff = 8;
    double mu_max = 0;
    // [point][mode]
    std::vector<std::vector<ModeSpectrum>> plus, minus;
};

BVPTables bvp_tables(const CylinderProblem& p, const CylinderSection& s, double mu_max,
                     int M = 64);

/// Str(e^{-t Delta_1}) - Str(e^{-t Delta_2}) per base point; modes with equal
/// blocks cancel exactly and are skipped. Throws CutoffError when the table
/// cutoff cannot certify e^{-t mu_max} below the tolerance.
std::vector<double> relative_heat_trace(const BVPTables& t1, const BVPTables& t2, double t,
                                        double tail_tol = 1e-12);

/// McKean-Singer check value: Str(e^{-t Delta}) for a single problem equals
/// the index, mode by mode, up to table truncation.
std::vector<double> supertrace_heat(const BVPTables& t, double time, double tail_tol = 1e-12);

/// Str(F (e^{-t Delta_1} - e^{-t Delta_2})) for a mode-diagonal chiral
/// coefficient F given as nodal matrices ([point][mode] per chirality).
std::vector<Complex> relative_heat_trace_weighted(
    const BVPTables& t1, const BVPTables& t2,
    const std::vector<std::vector<Eigen::MatrixXcd>>& f_plus,
    const std::vector<std::vector<Eigen::MatrixXcd>>& f_minus, double t);

/// Relative interior Chern character form Str(e^{-F_{t,P1}} - e^{-F_{t,P2}})
/// through Duhamel chains in the BVP eigenbases, with nabla D = d lambda and
/// curvature insertions. Returns the even-degree form per base point.
FormField interior_relative_chern(const CylinderProblem& p, const BVPTables& t1,
                                  const BVPTables& t2, const InteriorCurvature& r1,
                                  const InteriorCurvature& r2, const ModeConnection& c,
                                  double time);

// ---------------------------------------------------------------------------
// Commutator traces

/// Generalized smoothing operator given by chirality-off-diagonal smooth
/// kernels per mode (nodal value matrices, not weight-multiplied).
struct GeneralizedKernel {
    std::vector<int> mode_indices;           // indices into the mode list
    std::vector<Eigen::MatrixXcd> k_pm;      // E- -> E+ block kernel values
    std::vector<Eigen::MatrixXcd> k_mp;      // E+ -> E- block kernel values
};

struct CommutatorDefect {
    double direct = 0;
    double boundary_formula = 0;
};

/// Tr(D K) - Tr(K D) by diagonal-kernel quadrature on the u-grid (spectral
/// differentiation) against the Green boundary term from kernel corner
/// values.
CommutatorDefect commutator_trace_defect(const CylinderProblem& p, int point,
                                         const GeneralizedKernel& k, const UGrid& grid);

/// Smoothing operator with the full range condition P gamma D^j K = 0 built
/// from the BVP eigenbases: K = D e^{-s Delta} (cross-chirality blocks).
GeneralizedKernel range_compatible_smoothing(const CylinderProblem& p, const BVPTables& t,
                                             int point, const std::vector<int>& mode_indices,
                                             double s);

}  // namespace indexforms::cylinder
