#pragma once

#include <Eigen/Dense>
#include <complex>
#include <map>
#include <vector>

#include "indexforms/grid.hpp"

namespace indexforms {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

/// Scalar-valued differential form on a BaseGrid. Components are stored per
/// antisymmetric multi-index (bitmask of axes); absent masks are zero.
class FormField {
  public:
    FormField() = default;
    explicit FormField(const BaseGrid& g) : grid_(g) {}

    const BaseGrid& grid() const { return grid_; }

    bool has(Mask m) const { return comps_.count(m) != 0; }

    Vector& component(Mask m);
    const Vector& component(Mask m) const;  // zero vector if absent

    Complex value(Mask m, int point) const;
    void add(Mask m, int point, Complex v);

    const std::map<Mask, Vector>& components() const { return comps_; }

    int max_degree() const;

    /// The degree-d part as a new FormField.
    FormField degree_part(int d) const;

    FormField& operator+=(const FormField& o);
    FormField& operator-=(const FormField& o);
    FormField& operator*=(Complex c);
    friend FormField operator+(FormField a, const FormField& b) { return a += b; }
    friend FormField operator-(FormField a, const FormField& b) { return a -= b; }
    friend FormField operator*(Complex c, FormField f) { return f *= c; }

    /// Drops components whose sup-norm is below eps (keeps storage tight).
    void prune(double eps = 0.0);

    double sup_norm() const;
    /// Sup-norm of the degree-d part only.
    double sup_norm_degree(int d) const;

  private:
    BaseGrid grid_;
    std::map<Mask, Vector> comps_;
};

enum class Parity { Even, Odd };

enum class DerivativeKind { Centered, Spectral };

inline Parity flip(Parity p) { return p == Parity::Even ? Parity::Odd : Parity::Even; }
inline Parity combine(Parity a, Parity b) { return a == b ? Parity::Even : Parity::Odd; }

/// Form-valued, parity-graded matrix field over the base. Blocks act on a
/// graded fibre C^{dim_plus} (+) C^{dim_minus}; the declared parity fixes the
/// matrix parity of each component as parity XOR (form degree mod 2).
class OperatorForm {
  public:
    OperatorForm() = default;
    OperatorForm(const BaseGrid& g, int dim_plus, int dim_minus, Parity parity)
        : grid_(g), dp_(dim_plus), dm_(dim_minus), parity_(parity) {}

    static OperatorForm identity(const BaseGrid& g, int dim_plus, int dim_minus);
    /// Constant (base-independent) degree-0 term.
    static OperatorForm constant(const BaseGrid& g, int dim_plus, int dim_minus, Parity p,
                                 const Matrix& m);

    const BaseGrid& grid() const { return grid_; }
    int dim_plus() const { return dp_; }
    int dim_minus() const { return dm_; }
    int fibre_dim() const { return dp_ + dm_; }
    Parity parity() const { return parity_; }
    void set_parity(Parity p) { parity_ = p; }

    bool has(Mask m) const { return blocks_.count(m) != 0; }
    std::vector<Matrix>& block(Mask m);
    const Matrix& block(Mask m, int point) const;
    const std::map<Mask, std::vector<Matrix>>& blocks() const { return blocks_; }

    void set_block(Mask m, int point, const Matrix& v);
    void add_block(Mask m, int point, const Matrix& v);

    OperatorForm& operator+=(const OperatorForm& o);
    OperatorForm& operator-=(const OperatorForm& o);
    OperatorForm& operator*=(Complex c);
    friend OperatorForm operator+(OperatorForm a, const OperatorForm& b) { return a += b; }
    friend OperatorForm operator-(OperatorForm a, const OperatorForm& b) { return a -= b; }
    friend OperatorForm operator*(Complex c, OperatorForm f) { return f *= c; }

    void prune(double eps = 0.0);
    double sup_norm() const;

    /// Largest violation of the declared parity block structure.
    double parity_defect() const;

  private:
    BaseGrid grid_;
    int dp_ = 0, dm_ = 0;
    Parity parity_ = Parity::Even;
    std::map<Mask, std::vector<Matrix>> blocks_;
};

/// Connection data: anti-Hermitian degree-1 matrix one-form on the graded
/// fibre (block diagonal, parity preserving).
struct ConnectionData {
    BaseGrid base;
    int dim_plus = 0, dim_minus = 0;
    /// one_form[axis][point], absent axes mean zero. Each matrix anti-Hermitian.
    std::map<int, std::vector<Matrix>> one_form;

    static ConnectionData flat(const BaseGrid& g, int dim_plus, int dim_minus);
    bool is_flat() const { return one_form.empty(); }
    int fibre_dim() const { return dim_plus + dim_minus; }

    /// The connection one-form as a degree-1 OperatorForm (odd overall parity:
    /// even matrices, form degree 1).
    OperatorForm as_operator_form() const;

    /// Curvature two-form d(omega) + omega ^ omega.
    OperatorForm curvature(DerivativeKind kind = DerivativeKind::Centered) const;

    double antihermitian_defect() const;
};

// ---------------------------------------------------------------------------
// Operations

/// Centered-difference exterior derivative with periodic wrap. d° d vanishes
/// to roundoff (the stencil is exact on the antisymmetrized second
/// derivative; only floating-point noise remains).
FormField exterior_derivative(const FormField& f);

/// Fourier-multiplier exterior derivative (spectral accuracy on smooth
/// fields). Used where verification identities need derivatives beyond
/// stencil order; the Nyquist mode is annihilated.
FormField spectral_exterior_derivative(const FormField& f);
OperatorForm spectral_exterior_derivative(const OperatorForm& x);

/// Blockwise exterior derivative of a matrix-valued form.
OperatorForm exterior_derivative(const OperatorForm& x);

/// Graded product with Koszul sign (-1)^{|a_matrix| * |b_form|}.
OperatorForm wedge_multiply(const OperatorForm& a, const OperatorForm& b);

/// Pointwise tr(block|+) - tr(block|-) per multi-index.
FormField supertrace(const OperatorForm& x);

/// Plain (ungraded) fibrewise trace per multi-index.
FormField trace(const OperatorForm& x);

/// Riemann sum times cell volume of the top-degree component.
Complex integrate_over_base(const FormField& f);

/// Covariant derivative: blockwise d plus graded commutator with the
/// connection one-form.
OperatorForm covariant_derivative(const ConnectionData& c, const OperatorForm& x,
                                  DerivativeKind kind = DerivativeKind::Centered);

/// P * x * P pointwise on every component.
OperatorForm sandwich(const std::vector<Matrix>& p, const OperatorForm& x);

}  // namespace indexforms
