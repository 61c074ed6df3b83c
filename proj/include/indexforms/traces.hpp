#pragma once

#include "indexforms/cylinder.hpp"
#include "indexforms/zeta.hpp"

namespace indexforms::traces {

enum class TraceMethod { ClosedForm, HeatFit };

struct PseudoTraceResult {
    double value = 0;       // real part (the full value for real-valued traces)
    Complex cvalue = 0;     // complex value for form-coefficient traces
    TraceMethod method = TraceMethod::ClosedForm;
    double fit_residual = 0;
    double residue_part = 0;
};

/// tau_{|D|}(Pi_> - Pi_<) for D = -i d/dtheta + a: the eta invariant.
/// Closed form through the Hurwitz oracle; heat route fits the constant term
/// of the signed first-order heat trace (closed geometric ladder sum).
PseudoTraceResult involution_pseudo_trace(double a, TraceMethod method);

/// tau_{D^2}(I): zeta_H(0,q) + zeta_H(0,1-q) = 0; heat route fits the t^0
/// coefficient of the theta trace.
PseudoTraceResult identity_pseudo_trace(double a, TraceMethod method);

/// Pseudo-trace of a mode-diagonal finite-rank operator: coincides with the
/// plain trace for every regulator (heat route, fitted constant).
double finite_rank_pseudo_trace(const Eigen::VectorXcd& diag_entries, double a,
                                int regulator_order);

/// Wodzicki residues in the mode-diagonal model: res = -ord(Delta) times the
/// fitted log t coefficient of the heat trace, or the Hurwitz pole residue.
double wodzicki_residue_identity(double a);
double wodzicki_residue_inverse(double a, TraceMethod method);

/// Constant term of Str(e^{-t Delta_1} - e^{-t Delta_2}) fitted on a
/// geometric grid from t_min. with_log_check certifies the absence of a
/// t^0 log t term (|fitted log coefficient| <= 1e-4).
PseudoTraceResult relative_pseudo_trace_constant(const cylinder::BVPTables& t1,
                                                 const cylinder::BVPTables& t2, int point,
                                                 double t_min = 0.05,
                                                 bool with_log_check = false);

/// Constant term of Str(F (e^{-t Delta_1} - e^{-t Delta_2})) for a chiral
/// mode-diagonal coefficient F. with_log_check estimates a t^0 log t
/// contribution from the window drift of the fitted constant (threshold
/// 2e-3 of the data scale).
PseudoTraceResult relative_pseudo_trace_weighted(
    const cylinder::BVPTables& t1, const cylinder::BVPTables& t2,
    const std::vector<std::vector<Eigen::MatrixXcd>>& f_plus,
    const std::vector<std::vector<Eigen::MatrixXcd>>& f_minus, int point, double t_min = 0.05,
    bool with_log_check = false);

/// Projections onto the zero modes of the tables, per chirality, as nodal
/// matrices (used by the smoothing-shift invariance check).
std::pair<Eigen::MatrixXcd, Eigen::MatrixXcd> kernel_projectors(const cylinder::BVPTables& t,
                                                                int point, int mode,
                                                                double mu_tol = 1e-9);

/// Right-hand side of the interior limit identity:
///   eta^[M](P1, P2) + sum_{2k <= dim B} (k+1)/k! tau_{Delta_1, Delta_2}(R^k)
/// with tau applied pointwise to the operator coefficients of R^k and R the
/// curvature of the first section's domain projection.
FormField theorem2_rhs(const cylinder::CylinderProblem& p, const cylinder::DomainProjection& d1,
                       const cylinder::DomainProjection& d2, const cylinder::ModeConnection& c,
                       const cylinder::BVPTables& t1, const cylinder::BVPTables& t2,
                       double t_min = 0.05);

}  // namespace indexforms::traces
