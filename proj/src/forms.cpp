#include "indexforms/forms.hpp"

#include <stdexcept>

namespace indexforms {

namespace {
const Vector& zero_vector(int n) {
    static std::map<int, Vector> cache;
    auto it = cache.find(n);
    if (it == cache.end()) it = cache.emplace(n, Vector::Zero(n)).first;
    return it->second;
}
}  // namespace

// ---------------------------------------------------------------------------
// FormField

Vector& FormField::component(Mask m) {
    auto it = comps_.find(m);
    if (it == comps_.end()) it = comps_.emplace(m, Vector::Zero(grid_.points())).first;
    return it->second;
}

const Vector& FormField::component(Mask m) const {
    auto it = comps_.find(m);
    return it == comps_.end() ? zero_vector(grid_.points()) : it->second;
}

Complex FormField::value(Mask m, int point) const {
    auto it = comps_.find(m);
    return it == comps_.end() ? Complex(0) : it->second[point];
}

void FormField::add(Mask m, int point, Complex v) { component(m)[point] += v; }

int FormField::max_degree() const {
    int d = 0;
    for (auto& [m, v] : comps_) d = std::max(d, mask_degree(m));
    return d;
}

FormField FormField::degree_part(int d) const {
    FormField out(grid_);
    for (auto& [m, v] : comps_)
        if (mask_degree(m) == d) out.component(m) = v;
    return out;
}

FormField& FormField::operator+=(const FormField& o) {
    for (auto& [m, v] : o.comps_) component(m) += v;
    return *this;
}

FormField& FormField::operator-=(const FormField& o) {
    for (auto& [m, v] : o.comps_) component(m) -= v;
    return *this;
}

FormField& FormField::operator*=(Complex c) {
    for (auto& [m, v] : comps_) v *= c;
    return *this;
}

void FormField::prune(double eps) {
    for (auto it = comps_.begin(); it != comps_.end();) {
        if (it->second.lpNorm<Eigen::Infinity>() <= eps)
            it = comps_.erase(it);
        else
            ++it;
    }
}

double FormField::sup_norm() const {
    double s = 0;
    for (auto& [m, v] : comps_) s = std::max(s, v.lpNorm<Eigen::Infinity>());
    return s;
}

double FormField::sup_norm_degree(int d) const {
    double s = 0;
    for (auto& [m, v] : comps_)
        if (mask_degree(m) == d) s = std::max(s, v.lpNorm<Eigen::Infinity>());
    return s;
}

// ---------------------------------------------------------------------------
// OperatorForm

OperatorForm OperatorForm::identity(const BaseGrid& g, int dim_plus, int dim_minus) {
    return constant(g, dim_plus, dim_minus, Parity::Even,
                    Matrix::Identity(dim_plus + dim_minus, dim_plus + dim_minus));
}

OperatorForm OperatorForm::constant(const BaseGrid& g, int dim_plus, int dim_minus, Parity p,
                                    const Matrix& m) {
    OperatorForm out(g, dim_plus, dim_minus, p);
    out.blocks_[0].assign(g.points(), m);
    return out;
}

std::vector<Matrix>& OperatorForm::block(Mask m) {
    auto it = blocks_.find(m);
    if (it == blocks_.end())
        it = blocks_.emplace(m, std::vector<Matrix>(grid_.points(), Matrix::Zero(fibre_dim(), fibre_dim()))).first;
    return it->second;
}

const Matrix& OperatorForm::block(Mask m, int point) const {
    static const Matrix empty;
    auto it = blocks_.find(m);
    if (it == blocks_.end()) {
        static std::map<int, Matrix> zeros;
        auto z = zeros.find(fibre_dim());
        if (z == zeros.end()) z = zeros.emplace(fibre_dim(), Matrix::Zero(fibre_dim(), fibre_dim())).first;
        return z->second;
    }
    return it->second[point];
}

void OperatorForm::set_block(Mask m, int point, const Matrix& v) { block(m)[point] = v; }
void OperatorForm::add_block(Mask m, int point, const Matrix& v) { block(m)[point] += v; }

OperatorForm& OperatorForm::operator+=(const OperatorForm& o) {
    if (fibre_dim() != o.fibre_dim() || !(grid_ == o.grid_))
        throw std::invalid_argument("OperatorForm +=: incompatible shapes");
    for (auto& [m, v] : o.blocks_) {
        auto& mine = block(m);
        for (int p = 0; p < grid_.points(); ++p) mine[p] += v[p];
    }
    return *this;
}

OperatorForm& OperatorForm::operator-=(const OperatorForm& o) {
    if (fibre_dim() != o.fibre_dim() || !(grid_ == o.grid_))
        throw std::invalid_argument("OperatorForm -=: incompatible shapes");
    for (auto& [m, v] : o.blocks_) {
        auto& mine = block(m);
        for (int p = 0; p < grid_.points(); ++p) mine[p] -= v[p];
    }
    return *this;
}

OperatorForm& OperatorForm::operator*=(Complex c) {
    for (auto& [m, v] : blocks_)
        for (auto& b : v) b *= c;
    return *this;
}

void OperatorForm::prune(double eps) {
    for (auto it = blocks_.begin(); it != blocks_.end();) {
        double s = 0;
        for (auto& b : it->second) s = std::max(s, b.cwiseAbs().maxCoeff());
        if (s <= eps)
            it = blocks_.erase(it);
        else
            ++it;
    }
}

double OperatorForm::sup_norm() const {
    double s = 0;
    for (auto& [m, v] : blocks_)
        for (auto& b : v)
            if (b.size()) s = std::max(s, b.cwiseAbs().maxCoeff());
    return s;
}

double OperatorForm::parity_defect() const {
    double worst = 0;
    for (auto& [m, v] : blocks_) {
        const bool matrix_odd = (parity_ == Parity::Odd) != (mask_degree(m) % 2 == 1);
        for (auto& b : v) {
            // even matrices are block diagonal, odd are block off-diagonal
            double bad = 0;
            if (dp_ > 0 && dm_ > 0) {
                const auto tl = b.topLeftCorner(dp_, dp_).cwiseAbs().maxCoeff();
                const auto br = b.bottomRightCorner(dm_, dm_).cwiseAbs().maxCoeff();
                const auto tr = b.topRightCorner(dp_, dm_).cwiseAbs().maxCoeff();
                const auto bl = b.bottomLeftCorner(dm_, dp_).cwiseAbs().maxCoeff();
                bad = matrix_odd ? std::max(tl, br) : std::max(tr, bl);
            }
            worst = std::max(worst, bad);
        }
    }
    return worst;
}

// ---------------------------------------------------------------------------
// ConnectionData

ConnectionData ConnectionData::flat(const BaseGrid& g, int dim_plus, int dim_minus) {
    ConnectionData c;
    c.base = g;
    c.dim_plus = dim_plus;
    c.dim_minus = dim_minus;
    return c;
}

OperatorForm ConnectionData::as_operator_form() const {
    OperatorForm w(base, dim_plus, dim_minus, Parity::Odd);
    for (auto& [axis, mats] : one_form) {
        auto& blk = w.block(1u << axis);
        for (int p = 0; p < base.points(); ++p) blk[p] = mats[p];
    }
    return w;
}

OperatorForm ConnectionData::curvature(DerivativeKind kind) const {
    OperatorForm w = as_operator_form();
    OperatorForm dw = (kind == DerivativeKind::Spectral) ? spectral_exterior_derivative(w)
                                                         : exterior_derivative(w);
    OperatorForm r = dw + wedge_multiply(w, w);
    r.set_parity(Parity::Even);
    r.prune();
    return r;
}

double ConnectionData::antihermitian_defect() const {
    double worst = 0;
    for (auto& [axis, mats] : one_form)
        for (auto& m : mats)
            worst = std::max(worst, (m + m.adjoint()).cwiseAbs().maxCoeff());
    return worst;
}

// ---------------------------------------------------------------------------
// Exterior derivative

FormField exterior_derivative(const FormField& f) {
    const BaseGrid& g = f.grid();
    FormField out(g);
    if (g.dim == 0) return out;
    const double inv2h = 1.0 / (2.0 * g.spacing());
    for (auto& [m, v] : f.components()) {
        for (int axis = 0; axis < g.dim; ++axis) {
            const Mask am = 1u << axis;
            if (m & am) continue;
            const int sign = merge_sign(am, m);
            Vector& dst = out.component(am | m);
            for (int p = 0; p < g.points(); ++p) {
                const Complex diff = v[g.shift(p, axis, +1)] - v[g.shift(p, axis, -1)];
                dst[p] += double(sign) * inv2h * diff;
            }
        }
    }
    out.prune();
    return out;
}

namespace {

// d/dx along one axis by direct DFT; grids here are small
void spectral_axis_derivative(const BaseGrid& g, int axis, const Vector& in, Vector& out) {
    const int n = g.points_per_axis;
    std::vector<Complex> phase(n);
    for (int j = 0; j < n; ++j)
        phase[j] = std::exp(Complex(0, kTwoPi * j / n));
    const int lines = g.points() / n;
    for (int line = 0; line < lines; ++line) {
        // gather indices of this axis line
        std::vector<int> idx(n);
        for (int j = 0; j < n; ++j)
            idx[j] = (g.dim == 1) ? j : (axis == 0 ? g.index(j, line) : g.index(line, j));
        std::vector<Complex> hat(n, Complex(0));
        for (int k = 0; k < n; ++k) {
            Complex acc = 0;
            for (int j = 0; j < n; ++j) {
                const int kk = (k * j) % n;
                acc += in[idx[j]] * std::conj(phase[kk]);
            }
            hat[k] = acc / double(n);
        }
        for (int j = 0; j < n; ++j) {
            Complex acc = 0;
            for (int k = 0; k < n; ++k) {
                int freq = k <= n / 2 ? k : k - n;
                if (2 * k == n) freq = 0;  // Nyquist
                acc += Complex(0, double(freq)) * hat[k] * phase[(k * j) % n];
            }
            out[idx[j]] += acc;  // caller scales and signs
        }
    }
}

}  // namespace

FormField spectral_exterior_derivative(const FormField& f) {
    const BaseGrid& g = f.grid();
    FormField out(g);
    if (g.dim == 0) return out;
    for (auto& [m, v] : f.components()) {
        for (int axis = 0; axis < g.dim; ++axis) {
            const Mask am = 1u << axis;
            if (m & am) continue;
            const int sign = merge_sign(am, m);
            Vector tmp = Vector::Zero(g.points());
            spectral_axis_derivative(g, axis, v, tmp);
            out.component(am | m) += double(sign) * tmp;
        }
    }
    out.prune();
    return out;
}

OperatorForm spectral_exterior_derivative(const OperatorForm& x) {
    const BaseGrid& g = x.grid();
    OperatorForm out(g, x.dim_plus(), x.dim_minus(), flip(x.parity()));
    if (g.dim == 0) return out;
    const int n = x.fibre_dim();
    Vector in(g.points()), tmp(g.points());
    for (auto& [m, blocks] : x.blocks()) {
        for (int axis = 0; axis < g.dim; ++axis) {
            const Mask am = 1u << axis;
            if (m & am) continue;
            const double sign = merge_sign(am, m);
            auto& dst = out.block(am | m);
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < n; ++c) {
                    for (int p = 0; p < g.points(); ++p) in[p] = blocks[p](r, c);
                    tmp.setZero();
                    spectral_axis_derivative(g, axis, in, tmp);
                    for (int p = 0; p < g.points(); ++p) dst[p](r, c) += sign * tmp[p];
                }
        }
    }
    out.prune();
    return out;
}

OperatorForm exterior_derivative(const OperatorForm& x) {
    const BaseGrid& g = x.grid();
    OperatorForm out(g, x.dim_plus(), x.dim_minus(), flip(x.parity()));
    if (g.dim == 0) return out;
    const double inv2h = 1.0 / (2.0 * g.spacing());
    for (auto& [m, v] : x.blocks()) {
        for (int axis = 0; axis < g.dim; ++axis) {
            const Mask am = 1u << axis;
            if (m & am) continue;
            const double sign = merge_sign(am, m);
            auto& dst = out.block(am | m);
            for (int p = 0; p < g.points(); ++p)
                dst[p] += sign * inv2h * (v[g.shift(p, axis, +1)] - v[g.shift(p, axis, -1)]);
        }
    }
    out.prune();
    return out;
}

// ---------------------------------------------------------------------------
// Wedge product, traces, integration

OperatorForm wedge_multiply(const OperatorForm& a, const OperatorForm& b) {
    if (a.fibre_dim() != b.fibre_dim() || !(a.grid() == b.grid()))
        throw std::invalid_argument("wedge_multiply: incompatible dimensions");
    const BaseGrid& g = a.grid();
    OperatorForm out(g, a.dim_plus(), a.dim_minus(), combine(a.parity(), b.parity()));
    for (auto& [ma, va] : a.blocks()) {
        const int a_matrix_parity = (a.parity() == Parity::Odd) != (mask_degree(ma) % 2 == 1) ? 1 : 0;
        for (auto& [mb, vb] : b.blocks()) {
            if (ma & mb) continue;
            double sign = merge_sign(ma, mb);
            if (a_matrix_parity && (mask_degree(mb) % 2 == 1)) sign = -sign;
            auto& dst = out.block(ma | mb);
            for (int p = 0; p < g.points(); ++p) dst[p] += sign * (va[p] * vb[p]);
        }
    }
    out.prune();
    return out;
}

FormField supertrace(const OperatorForm& x) {
    const int dp = x.dim_plus();
    FormField out(x.grid());
    for (auto& [m, v] : x.blocks()) {
        Vector& dst = out.component(m);
        for (int p = 0; p < x.grid().points(); ++p) {
            if (v[p].rows() != v[p].cols())
                throw std::invalid_argument("supertrace: non-square block");
            dst[p] += v[p].topLeftCorner(dp, dp).trace() -
                      v[p].bottomRightCorner(v[p].rows() - dp, v[p].cols() - dp).trace();
        }
    }
    return out;
}

FormField trace(const OperatorForm& x) {
    FormField out(x.grid());
    for (auto& [m, v] : x.blocks()) {
        Vector& dst = out.component(m);
        for (int p = 0; p < x.grid().points(); ++p) dst[p] += v[p].trace();
    }
    return out;
}

Complex integrate_over_base(const FormField& f) {
    const BaseGrid& g = f.grid();
    const Mask top = (1u << g.dim) - 1u;
    for (auto& [m, v] : f.components())
        if (m != top && v.lpNorm<Eigen::Infinity>() > 0)
            throw std::invalid_argument("integrate_over_base: degree mismatch");
    double cell = 1.0;
    for (int a = 0; a < g.dim; ++a) cell *= g.spacing();
    Complex s = 0;
    const Vector& v = f.component(top);
    for (int p = 0; p < g.points(); ++p) s += v[p];
    return s * cell;
}

OperatorForm covariant_derivative(const ConnectionData& c, const OperatorForm& x,
                                  DerivativeKind kind) {
    if (c.fibre_dim() != x.fibre_dim() || !(c.base == x.grid()))
        throw std::invalid_argument("covariant_derivative: dimension mismatch");
    OperatorForm out = (kind == DerivativeKind::Spectral) ? spectral_exterior_derivative(x)
                                                          : exterior_derivative(x);
    if (!c.is_flat()) {
        OperatorForm w = c.as_operator_form();
        OperatorForm wx = wedge_multiply(w, x);
        OperatorForm xw = wedge_multiply(x, w);
        out += wx;
        if (x.parity() == Parity::Even)
            out -= xw;
        else
            out += xw;
    }
    out.prune();
    return out;
}

OperatorForm sandwich(const std::vector<Matrix>& p, const OperatorForm& x) {
    OperatorForm out(x.grid(), x.dim_plus(), x.dim_minus(), x.parity());
    for (auto& [m, v] : x.blocks()) {
        auto& dst = out.block(m);
        for (int q = 0; q < x.grid().points(); ++q) dst[q] = p[q] * v[q] * p[q];
    }
    return out;
}

}  // namespace indexforms
