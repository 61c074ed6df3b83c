#pragma once

#include <functional>
#include <optional>
#include <random>
#include <stdexcept>

#include "indexforms/forms.hpp"

namespace indexforms::boundary {

struct KernelGapError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct MethodsDisagreeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NotRelativelySmoothingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct RankJumpError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Real potential a(z, theta) on the circle fibre, given by a constant part
/// plus theta-harmonics whose amplitude may be modulated over the base.
struct PotentialSpec {
    double constant = 0.25;
    struct Harmonic {
        int mode = 1;          // cos(mode * theta)
        double amplitude = 0;  // Fourier weight a_{+-mode} = amplitude/2 * modulation(z)
        int base_axis = 0;
        double base_depth = 0;  // modulation(z) = 1 + base_depth * cos(z_axis)
    };
    std::vector<Harmonic> harmonics;

    /// Fourier coefficient of e^{i m theta} at base point (s, t).
    Complex coefficient(int m, double s, double t) const;
    double mean(double s, double t) const;  // hat a_0
};

/// Family of first-order self-adjoint operators  -i d/dtheta + a(z, theta)
/// on the circle, truncated to Fourier modes -N..N.
struct BoundaryOperatorFamily {
    BaseGrid base;
    int fourier_cutoff = 8;                // N
    std::vector<Matrix> matrices;          // per base point, (2N+1)x(2N+1) Hermitian
    std::vector<double> mean_potential;    // hat a_0 per base point

    int modes() const { return 2 * fourier_cutoff + 1; }
    double hermitian_defect() const;
};

struct SpectralDecomposition {
    std::vector<Eigen::VectorXd> eigenvalues;  // sorted ascending, per base point
    std::vector<Matrix> eigenvectors;          // columns, deterministic phase
    double gap = 0;                            // min |eigenvalue| over the family
};

/// Smooth family of orthogonal projections differing from the reference
/// spectral projection by low-mode-concentrated perturbations.
struct GrassmannSection {
    BaseGrid base;
    int fourier_cutoff = 8;
    std::vector<Matrix> projection;  // per base point
    int perturbation_rank = -1;      // -1 = dense-smoothing tag

    int modes() const { return 2 * fourier_cutoff + 1; }
    double idempotency_defect() const;

    /// Largest matrix entry of (this - other) at row or column modes beyond
    /// |k| > cutoff/2 (the finite proxy for the smoothing-class condition).
    double tail_weight(const GrassmannSection& other) const;
};

struct ToeplitzFamily {
    GrassmannSection source;  // P1
    GrassmannSection target;  // P2
    // operator blocks P2 P1 : ran P1 -> ran P2 are formed on demand
};

// ---------------------------------------------------------------------------

BoundaryOperatorFamily assemble_boundary_family(const BaseGrid& base, int N,
                                                const PotentialSpec& potential);

SpectralDecomposition decompose(const BoundaryOperatorFamily& f);

/// Projection onto the positive spectral subspace. Throws KernelGapError when
/// the spectral gap is at or below gap_tol.
GrassmannSection spectral_projection(const BoundaryOperatorFamily& f, double gap_tol = 1e-6);

enum class EtaMethod { ClosedForm, HeatFit };

/// Eta invariant of the family, pointwise over the base (degree-0 form).
/// ClosedForm uses the Hurwitz oracle (theta-constant potential only);
/// HeatFit integrates t^{-1/2} Tr(D e^{-t D^2}) with fitted small-t expansion
/// and analytic truncation tails.
FormField eta_invariant(const BoundaryOperatorFamily& f, EtaMethod method,
                        double gap_tol = 1e-6);

/// Tr((P1 - P1^perp) - (P2 - P2^perp)) = 2 Tr(P1 - P2), pointwise.
FormField relative_eta_pointwise(const GrassmannSection& p1, const GrassmannSection& p2);

enum class IndexMethod { Trace, Svd, Both };

/// Pointwise index of P2 P1 : ran P1 -> ran P2. Trace rounds Tr(P1 - P2);
/// Svd counts kernel and cokernel dimensions by numerical rank. Both runs the
/// two and throws MethodsDisagreeError on mismatch.
std::vector<int> relative_index(const GrassmannSection& p1, const GrassmannSection& p2,
                                IndexMethod method = IndexMethod::Both,
                                double rank_tol = 1e-8);

/// Kernel/cokernel dimensions of the Toeplitz family per base point.
struct ToeplitzRanks {
    std::vector<int> kernel, cokernel;
};
ToeplitzRanks toeplitz_ranks(const GrassmannSection& p1, const GrassmannSection& p2,
                             double rank_tol = 1e-8);

/// Projected connection P * nabla * P (as new ConnectionData extended by zero
/// off ran P) and its curvature (P nabla P)^2 as a degree-2 OperatorForm.
std::pair<ConnectionData, OperatorForm> induced_connection_and_curvature(
    const GrassmannSection& p, const ConnectionData& c);

/// Relative eta form Tr(P1 - P2) + sum_{k>=1} (-1)^k/k! Tr(R1^k - R2^k).
FormField relative_eta_form(const GrassmannSection& p1, const GrassmannSection& p2,
                            const ConnectionData& c, double decay_tol = 1e-8);

/// Chern form of the finite-rank kernel superbundle of the Toeplitz family,
/// with projected connection. Throws RankJumpError if the kernel dimension
/// varies over the base.
FormField kernel_bundle_chern(const ToeplitzFamily& t, const ConnectionData& c,
                              double rank_tol = 1e-8);

/// Orthonormal basis of ran P per base point (eigenvectors with eigenvalue
/// above 1/2), deterministic phase.
std::vector<Matrix> range_basis(const GrassmannSection& p);

/// Fukui-Hatsugai-Suzuki lattice Chern number of a projection family over a
/// 2-torus grid. Independent plaquette-link oracle.
int fhs_chern_number(const GrassmannSection& p);

// ---------------------------------------------------------------------------
// Model families used by experiments and tests.

/// Deterministic Gaussian stream (Box-Muller over mt19937_64), identical
/// across platforms.
class GaussianStream {
  public:
    explicit GaussianStream(std::uint64_t seed) : gen_(seed) {}
    double operator()();
    std::uint64_t raw() { return gen_(); }

  private:
    std::mt19937_64 gen_;
    bool have_ = false;
    double spare_ = 0;
};

/// Conjugates the section by exp(i eps H) with H a seeded Hermitian matrix
/// supported on the lowest 2m+1 modes; stays exactly idempotent/Hermitian.
GrassmannSection random_low_mode_conjugation(const GrassmannSection& p, int m, double eps,
                                             std::uint64_t seed);

/// Flips the occupation of the eigenmode closest to the given lambda:
/// P -> P - vv* (occupied -> empty) or P + vv*.
GrassmannSection mode_flip(const GrassmannSection& p, const SpectralDecomposition& sd,
                           double lambda, bool remove);

/// Rank-1 Bloch twist: replaces the 2x2 block of P on the fibre modes
/// {k_empty, k_filled} by the lower-band projector of the two-band model
///   h(z) = (sin z_s, sin z_t, m_par - cos z_s - cos z_t) . sigma
/// Base must be T^2. Chern number +-1 for 0 < |m_par| < 2.
GrassmannSection bloch_twist(const GrassmannSection& p, int mode_empty, int mode_filled,
                             double m_par);

/// One-step Fourier shift conjugation with interior truncation:
/// P = S Pi S^* with S e_n = e_{n+1} (top mode dropped).
GrassmannSection shift_conjugate(const GrassmannSection& p);

}  // namespace indexforms::boundary
