#include "sumhess/grid.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "sumhess/errors.hpp"
#include "sumhess/format.hpp"

namespace sumhess {

namespace {

void check_same_grid(const Grid& g, const Field& u) {
    if (&u.grid() != &g) throw std::invalid_argument("field is bound to a different grid");
}

}  // namespace

int Grid::index(const MultiIndex& mi) const {
    int idx = 0;
    for (int a = 0; a < n_; ++a) {
        const int m = mi[static_cast<std::size_t>(a)];
        if (m < 0 || m >= dims_[static_cast<std::size_t>(a)])
            throw std::invalid_argument("grid multi-index out of range");
        idx = idx * dims_[static_cast<std::size_t>(a)] + m;
    }
    return idx;
}

MultiIndex Grid::multi(int node) const {
    if (node < 0 || node >= count_) throw std::invalid_argument("grid node out of range");
    MultiIndex mi{0, 0, 0};
    for (int a = n_ - 1; a >= 0; --a) {
        const int d = dims_[static_cast<std::size_t>(a)];
        mi[static_cast<std::size_t>(a)] = node % d;
        node /= d;
    }
    return mi;
}

Eigen::VectorXd Grid::coord(const MultiIndex& mi) const {
    Eigen::VectorXd x(n_);
    for (int a = 0; a < n_; ++a)
        x(a) = dom_.lo()(a) + h_[static_cast<std::size_t>(a)] * mi[static_cast<std::size_t>(a)];
    return x;
}

int Grid::side(int node, int axis) const {
    if (axis < 0 || axis >= n_) throw std::invalid_argument("grid axis out of range");
    const int m = multi(node)[static_cast<std::size_t>(axis)];
    if (m == 0) return -1;
    if (m == dims_[static_cast<std::size_t>(axis)] - 1) return 1;
    return 0;
}

int Grid::boundary_axis_count(int node) const {
    const MultiIndex mi = multi(node);
    int c = 0;
    for (int a = 0; a < n_; ++a) {
        const int m = mi[static_cast<std::size_t>(a)];
        if (m == 0 || m == dims_[static_cast<std::size_t>(a)] - 1) ++c;
    }
    return c;
}

NodeClass Grid::node_class(int node) const {
    const int c = boundary_axis_count(node);
    if (c == 0) return NodeClass::interior;
    if (c == 1) return NodeClass::face;
    return NodeClass::corner;
}

Eigen::VectorXd Grid::axis_normal(int axis, int s) const {
    if (axis < 0 || axis >= n_) throw std::invalid_argument("grid axis out of range");
    if (s != -1 && s != 1) throw std::invalid_argument("face side must be -1 or +1");
    return s * Eigen::VectorXd::Unit(n_, axis);
}

Grid build_grid(const DomainDescriptor& dom, const std::vector<int>& dims) {
    if (dom.shape() != DomainShape::rectangle)
        throw std::invalid_argument("grids are defined on rectangles only");
    if (static_cast<int>(dims.size()) != dom.n())
        throw std::invalid_argument("grid dims must list one count per axis");
    Grid g;
    g.dom_ = dom;
    g.n_ = dom.n();
    g.count_ = 1;
    for (int a = 0; a < g.n_; ++a) {
        const int d = dims[static_cast<std::size_t>(a)];
        if (d < 5) throw std::invalid_argument("grid needs at least 5 nodes per axis");
        g.dims_[static_cast<std::size_t>(a)] = d;
        g.h_[static_cast<std::size_t>(a)] = (dom.hi()(a) - dom.lo()(a)) / (d - 1);
        g.count_ *= d;
    }
    return g;
}

Field sample_field(const Grid& g, const std::function<double(const Eigen::VectorXd&)>& fn) {
    Field f(g);
    for (int node = 0; node < g.node_count(); ++node) f[node] = fn(g.coord(node));
    return f;
}

GhostField::GhostField(const Grid& g) : g_(&g) {
    std::size_t total = 1;
    for (int a = 0; a < g.n(); ++a) {
        ext_dims_[static_cast<std::size_t>(a)] = g.dim(a) + 2;
        total *= static_cast<std::size_t>(g.dim(a) + 2);
    }
    v_.assign(total, std::numeric_limits<double>::quiet_NaN());
}

std::size_t GhostField::ext_index(const MultiIndex& mi) const {
    std::size_t idx = 0;
    for (int a = 0; a < g_->n(); ++a) {
        const int m = mi[static_cast<std::size_t>(a)] + 1;
        if (m < 0 || m >= ext_dims_[static_cast<std::size_t>(a)])
            throw std::invalid_argument("ghost multi-index out of range");
        idx = idx * static_cast<std::size_t>(ext_dims_[static_cast<std::size_t>(a)]) +
              static_cast<std::size_t>(m);
    }
    return idx;
}

double GhostField::at(const MultiIndex& mi) const {
    const double val = v_[ext_index(mi)];
    if (!std::isfinite(val)) throw internal_error("ghost slot read before being filled");
    return val;
}

bool GhostField::known(const MultiIndex& mi) const { return std::isfinite(v_[ext_index(mi)]); }

double& GhostField::slot(const MultiIndex& mi) { return v_[ext_index(mi)]; }

GhostField fill_ghosts(const Grid& g, const Field& u, const BoundaryClosure& phi) {
    check_same_grid(g, u);
    const int n = g.n();
    GhostField ext(g);
    for (int node = 0; node < g.node_count(); ++node) ext.slot(g.multi(node)) = u[node];

    auto phi_checked = [&](const Eigen::VectorXd& x, double uval, const Eigen::VectorXd& nu) {
        const double val = phi(x, uval, nu);
        if (!std::isfinite(val)) throw numerical_error("boundary data phi is not finite");
        return val;
    };

    // Edge ghosts: one per (boundary node, boundary axis).
    for (int node = 0; node < g.node_count(); ++node) {
        if (g.boundary_axis_count(node) == 0) continue;
        const MultiIndex mi = g.multi(node);
        const Eigen::VectorXd x = g.coord(mi);
        const double ub = u[node];
        for (int a = 0; a < n; ++a) {
            const int s = g.side(node, a);
            if (s == 0) continue;
            MultiIndex ghost = mi, mirror = mi;
            ghost[static_cast<std::size_t>(a)] += s;
            mirror[static_cast<std::size_t>(a)] -= s;
            ext.slot(ghost) =
                ext.at(mirror) + 2.0 * g.spacing(a) * phi_checked(x, ub, g.axis_normal(a, s));
        }
    }

    // Diagonal ghosts: for each boundary-axis pair, average the two face
    // prescriptions applied on the planes shifted one cell outward.
    for (int node = 0; node < g.node_count(); ++node) {
        if (g.boundary_axis_count(node) < 2) continue;
        const MultiIndex mi = g.multi(node);
        for (int a = 0; a < n; ++a) {
            const int sa = g.side(node, a);
            if (sa == 0) continue;
            for (int b = a + 1; b < n; ++b) {
                const int sb = g.side(node, b);
                if (sb == 0) continue;
                MultiIndex diag = mi;
                diag[static_cast<std::size_t>(a)] += sa;
                diag[static_cast<std::size_t>(b)] += sb;
                double sum = 0.0;
                for (const auto& [face, other, sf, so] :
                     {std::array<int, 4>{a, b, sa, sb}, std::array<int, 4>{b, a, sb, sa}}) {
                    MultiIndex outer = mi;  // exterior point one cell out along `other`
                    outer[static_cast<std::size_t>(other)] += so;
                    MultiIndex mirror = outer;
                    mirror[static_cast<std::size_t>(face)] -= sf;
                    sum += ext.at(mirror) +
                           2.0 * g.spacing(face) *
                               phi_checked(g.coord(outer), ext.at(outer),
                                           g.axis_normal(face, sf));
                }
                ext.slot(diag) = 0.5 * sum;
            }
        }
    }
    return ext;
}

SymMatrix hessian_at(const Grid& g, const GhostField& ext, int node) {
    const int n = g.n();
    const MultiIndex mi = g.multi(node);
    const double center = ext.at(mi);
    Eigen::MatrixXd h(n, n);
    for (int a = 0; a < n; ++a) {
        MultiIndex up = mi, dn = mi;
        up[static_cast<std::size_t>(a)] += 1;
        dn[static_cast<std::size_t>(a)] -= 1;
        const double ha = g.spacing(a);
        h(a, a) = (ext.at(up) - 2.0 * center + ext.at(dn)) / (ha * ha);
        for (int b = a + 1; b < n; ++b) {
            MultiIndex pp = mi, pm = mi, mp = mi, mm = mi;
            pp[static_cast<std::size_t>(a)] += 1;
            pp[static_cast<std::size_t>(b)] += 1;
            pm[static_cast<std::size_t>(a)] += 1;
            pm[static_cast<std::size_t>(b)] -= 1;
            mp[static_cast<std::size_t>(a)] -= 1;
            mp[static_cast<std::size_t>(b)] += 1;
            mm[static_cast<std::size_t>(a)] -= 1;
            mm[static_cast<std::size_t>(b)] -= 1;
            h(a, b) = h(b, a) = (ext.at(pp) - ext.at(pm) - ext.at(mp) + ext.at(mm)) /
                                (4.0 * ha * g.spacing(b));
        }
    }
    return SymMatrix(h);
}

Eigen::VectorXd gradient_at(const Grid& g, const GhostField& ext, int node) {
    const int n = g.n();
    const MultiIndex mi = g.multi(node);
    Eigen::VectorXd grad(n);
    for (int a = 0; a < n; ++a) {
        MultiIndex up = mi, dn = mi;
        up[static_cast<std::size_t>(a)] += 1;
        dn[static_cast<std::size_t>(a)] -= 1;
        grad(a) = (ext.at(up) - ext.at(dn)) / (2.0 * g.spacing(a));
    }
    return grad;
}

HessianField fd_hessian(const Grid& g, const Field& u, const BoundaryClosure& phi) {
    const GhostField ext = fill_ghosts(g, u, phi);
    HessianField out;
    out.reserve(static_cast<std::size_t>(g.node_count()));
    for (int node = 0; node < g.node_count(); ++node) out.push_back(hessian_at(g, ext, node));
    return out;
}

std::vector<Eigen::VectorXd> fd_gradient(const Grid& g, const Field& u,
                                         const BoundaryClosure& phi) {
    const GhostField ext = fill_ghosts(g, u, phi);
    std::vector<Eigen::VectorXd> out;
    out.reserve(static_cast<std::size_t>(g.node_count()));
    for (int node = 0; node < g.node_count(); ++node) out.push_back(gradient_at(g, ext, node));
    return out;
}

Norms norms(const Grid& g, const Field& v) {
    check_same_grid(g, v);
    double cell = 1.0;
    for (int a = 0; a < g.n(); ++a) cell *= g.spacing(a);
    Norms out;
    double sq = 0.0;
    for (int node = 0; node < g.node_count(); ++node) {
        const double val = v[node];
        out.max = std::max(out.max, std::abs(val));
        sq += val * val;
    }
    out.l2_scaled = std::sqrt(cell * sq);
    return out;
}

void dump_field(const Grid& g, const Field& v, std::ostream& out) {
    check_same_grid(g, v);
    out << '#';
    for (int a = 0; a < g.n(); ++a) out << ' ' << g.dim(a);
    for (int a = 0; a < g.n(); ++a) out << ' ' << format_double(g.spacing(a));
    out << '\n';
    for (int node = 0; node < g.node_count(); ++node) {
        const Eigen::VectorXd x = g.coord(node);
        for (int a = 0; a < g.n(); ++a) out << format_double(x(a)) << ' ';
        out << format_double(v[node]) << '\n';
    }
}

}  // namespace sumhess
