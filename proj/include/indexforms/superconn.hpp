#pragma once

#include <optional>

#include "indexforms/boundary.hpp"
#include "indexforms/forms.hpp"

namespace indexforms::superconn {

struct ExtrapolationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Superconnection adapted to an odd Hermitian degree-0 family L, with a
/// grading-preserving connection and optional higher-degree odd terms. The
/// scale t enters through the materialized terms t^{(1-i)/2} * term_[i].
struct Superconnection {
    OperatorForm degree0;                 // L, odd parity, Hermitian blocks
    ConnectionData connection;
    std::optional<OperatorForm> higher;   // degree >= 2 terms, odd overall parity
    double t = 1.0;
};

/// Multiplies the scale: degree-i term picks up factor s^{(1-i)/2}.
Superconnection scale_superconnection(const Superconnection& a, double s);

/// Even curvature form F = A^2, split as t L^2 (degree 0) plus the
/// nilpotent higher-degree part.
struct CurvatureForm {
    OperatorForm body;  // even parity; degree-0 block Hermitian PSD
    OperatorForm degree0_part() const;
    OperatorForm nilpotent_part() const;
};

CurvatureForm curvature(const Superconnection& a);

/// e^{-F} by eigen-decomposition of the degree-0 block and finite Duhamel
/// chains over form degree, with simplex integrals evaluated as divided
/// differences of exp(-x).
OperatorForm heat_exponential(const CurvatureForm& f);

/// Scaling operator delta_t: degree-i component times t^{-i/2}.
OperatorForm delta_scale(const OperatorForm& x, double t);

/// Str(e^{-F_t}) of the superconnection at its current scale.
FormField chern_form(const Superconnection& a);

/// Divided differences of exp(-x), exposed for tests.
double exp_divided_difference(double a, double b);
double exp_divided_difference(double a, double b, double c);

// ---------------------------------------------------------------------------
// Superconnections built from Grassmann pairs on the doubled bundle W_i + W_j.

class GrassmannPair {
  public:
    GrassmannPair(const boundary::GrassmannSection& pi, const boundary::GrassmannSection& pj,
                  const ConnectionData& c, double decay_tol = 1e-8);

    const BaseGrid& base() const { return base_; }
    int copy_dim() const { return n_; }

    /// Str(e^{-F_t}) with the extension-by-zero convention off the subbundle
    /// (restricted heat operator; finite at every t).
    FormField chern(double t) const;

    /// Str(Bdot_t e^{-F_t}), Bdot = (1/2) t^{-1/2} L.
    FormField transgression(double t) const;

    /// Curvature 2-form (P nabla P)^2 on the doubled bundle.
    const OperatorForm& projected_curvature() const { return curv2_; }
    const OperatorForm& toeplitz_term() const { return L_; }

    FormField str_projection() const;  // Str(P_i + P_j) with grading = tr Pi - tr Pj

    /// Kernel-bundle Chern form ch(nabla^0) of the Toeplitz family (source
    /// P_i, target P_j).
    FormField kernel_chern(double rank_tol = 1e-8) const;

  private:
    CurvatureForm curvature_at(double t) const;

    BaseGrid base_;
    int n_ = 0;
    boundary::GrassmannSection pi_, pj_;
    ConnectionData ambient_;      // original single-copy connection
    std::vector<Matrix> proj_;    // doubled P_i + P_j
    OperatorForm L_;              // odd Toeplitz term on the doubled bundle
    ConnectionData conn_;         // induced doubled connection
    OperatorForm covL_;           // nabla L (degree 1)
    OperatorForm curv2_;          // R_{i,j} (degree 2)
};

/// Relative Chern character form Str(e^{-F_t(a)} - e^{-F_t(b)}) with the
/// extension-by-zero inclusion convention. For the three-section device
/// targeting eta(P1, P3), the intermediate section occupies the *target* slot
/// of both pairs: a = (P1, P2), b = (P3, P2); the graded degree-0 parts then
/// telescope to Tr(P1 - P3).
FormField relative_chern_form(const GrassmannPair& a, const GrassmannPair& b, double t);

/// tau_t = Str(Bdot(a) e^{-F_t(a)} - Bdot(b) e^{-F_t(b)}).
FormField transgression_form(const GrassmannPair& a, const GrassmannPair& b, double t);

struct TimeLimit {
    FormField limit;       // extrapolated form
    double fitted_rate;    // observed residual exponent
    std::vector<double> ladder;
    std::vector<double> residuals;
};

enum class LimitDirection { Zero, Infinity };

/// Geometric ladder with given endpoints and count.
std::vector<double> time_ladder(double t_min = 1e-3, double t_max = 4e3, int count = 12);

/// Evaluates the relative Chern form on a t-ladder and extrapolates.
/// Zero limit: Richardson against the leading residual power (the even-form
/// residual is O(t)); must match the relative eta form of (P1, P3).
/// Infinity limit: kernel-bundle Chern difference, with the residual rate
/// fitted against the expected t^{-1/2}. Throws ExtrapolationError when the
/// observed rate strays more than rate_window from expectation.
TimeLimit time_limit_probe(const GrassmannPair& b12, const GrassmannPair& b23,
                           LimitDirection direction,
                           const std::vector<double>& ladder = time_ladder(),
                           double rate_window = 0.25);

// ---------------------------------------------------------------------------
// Gr_1 (Schatten) model over a trivially-connected Hilbert-space slice.

/// Tr(e^{-R} - Pi_plus) = index + sum_{k>=1} (-1)^k/k! omega_k, computed from
/// the projected curvature series. `reference` plays Pi_plus.
FormField schatten_relative_chern(const boundary::GrassmannSection& p,
                                  const boundary::GrassmannSection& reference,
                                  const ConnectionData& c, double decay_tol = 1e-8);

/// omega_k = Tr(P (dP)^{2k}) with covariant dP; independent route used as an
/// oracle against the curvature series.
FormField schatten_omega_form(const boundary::GrassmannSection& p, const ConnectionData& c,
                              int k);

}  // namespace indexforms::superconn
