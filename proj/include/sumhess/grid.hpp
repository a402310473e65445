#pragma once

/// Uniform cell-vertex Cartesian grid on a rectangle with ghost-point Neumann
/// boundary treatment.  Nodes are classified interior / face / corner by the
/// number of boundary axes.  Ghost values implement the centered second-order
/// prescription u_ghost = u_mirror + 2 h phi(x_b, u_b, nu); corner diagonal
/// ghosts for the cross stencil average the two extended face prescriptions,
/// which keeps every centered operator exact on quadratics.

#include <array>
#include <functional>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "sumhess/domain.hpp"
#include "sumhess/sym_matrix.hpp"

namespace sumhess {

/// Multi-index; axes beyond the grid dimension stay 0.  Ghost offsets -1 and
/// dim(axis) are valid for coordinate and ghost-layer access.
using MultiIndex = std::array<int, 3>;

enum class NodeClass { interior, face, corner };

class Grid {
public:
    [[nodiscard]] int n() const noexcept { return n_; }
    [[nodiscard]] int dim(int axis) const { return dims_.at(static_cast<std::size_t>(axis)); }
    [[nodiscard]] double spacing(int axis) const { return h_.at(static_cast<std::size_t>(axis)); }
    [[nodiscard]] int node_count() const noexcept { return count_; }
    [[nodiscard]] const DomainDescriptor& domain() const noexcept { return dom_; }

    [[nodiscard]] int index(const MultiIndex& mi) const;
    [[nodiscard]] MultiIndex multi(int node) const;
    [[nodiscard]] Eigen::VectorXd coord(const MultiIndex& mi) const;
    [[nodiscard]] Eigen::VectorXd coord(int node) const { return coord(multi(node)); }

    /// -1 on the lo face of `axis`, +1 on the hi face, 0 otherwise.
    [[nodiscard]] int side(int node, int axis) const;
    [[nodiscard]] int boundary_axis_count(int node) const;
    [[nodiscard]] NodeClass node_class(int node) const;

    /// Unit outward normal of the (axis, side) face.
    [[nodiscard]] Eigen::VectorXd axis_normal(int axis, int s) const;

private:
    friend Grid build_grid(const DomainDescriptor& dom, const std::vector<int>& dims);

    DomainDescriptor dom_ = DomainDescriptor::rectangle(Eigen::Vector2d(0, 0),
                                                        Eigen::Vector2d(1, 1));
    int n_ = 0;
    int count_ = 0;
    std::array<int, 3> dims_{1, 1, 1};
    std::array<double, 3> h_{0, 0, 0};
};

/// dims must list >= 5 nodes per axis of the rectangle `dom`.
[[nodiscard]] Grid build_grid(const DomainDescriptor& dom, const std::vector<int>& dims);

/// Per-node scalar values bound to a grid (which must outlive the field).
class Field {
public:
    explicit Field(const Grid& g, double init = 0.0)
        : g_(&g), v_(Eigen::VectorXd::Constant(g.node_count(), init)) {}

    [[nodiscard]] const Grid& grid() const noexcept { return *g_; }
    [[nodiscard]] Eigen::VectorXd& values() noexcept { return v_; }
    [[nodiscard]] const Eigen::VectorXd& values() const noexcept { return v_; }
    [[nodiscard]] double operator[](int node) const { return v_(node); }
    [[nodiscard]] double& operator[](int node) { return v_(node); }

private:
    const Grid* g_;
    Eigen::VectorXd v_;
};

/// Samples fn(x) at every node.
[[nodiscard]] Field sample_field(const Grid& g,
                                 const std::function<double(const Eigen::VectorXd&)>& fn);

/// Oblique boundary data phi(x, u, nu) of the condition u_nu = phi.
using BoundaryClosure =
    std::function<double(const Eigen::VectorXd& x, double u, const Eigen::VectorXd& nu)>;

/// Node values extended by one ghost layer per axis.  Unfilled slots hold NaN
/// and reading one throws; in 2d every slot is filled, in 3d only the
/// axis-pair diagonals needed by the cross stencils are.
class GhostField {
public:
    explicit GhostField(const Grid& g);

    [[nodiscard]] double at(const MultiIndex& mi) const;
    [[nodiscard]] bool known(const MultiIndex& mi) const;
    double& slot(const MultiIndex& mi);

private:
    [[nodiscard]] std::size_t ext_index(const MultiIndex& mi) const;

    const Grid* g_;
    std::array<int, 3> ext_dims_{1, 1, 1};
    std::vector<double> v_;
};

/// Copies u and fills the ghost layer from the boundary closure.  Non-finite
/// phi values throw numerical_error.
[[nodiscard]] GhostField fill_ghosts(const Grid& g, const Field& u, const BoundaryClosure& phi);

/// Centered second differences at one node (three-point diagonal, four-point
/// cross); valid at every node once ghosts are filled; exact on quadratics.
[[nodiscard]] SymMatrix hessian_at(const Grid& g, const GhostField& ext, int node);
[[nodiscard]] Eigen::VectorXd gradient_at(const Grid& g, const GhostField& ext, int node);

using HessianField = std::vector<SymMatrix>;

[[nodiscard]] HessianField fd_hessian(const Grid& g, const Field& u, const BoundaryClosure& phi);
[[nodiscard]] std::vector<Eigen::VectorXd> fd_gradient(const Grid& g, const Field& u,
                                                       const BoundaryClosure& phi);

struct Norms {
    double max = 0.0;
    double l2_scaled = 0.0;  // sqrt(h^n sum v^2), fixed sequential summation
};

[[nodiscard]] Norms norms(const Grid& g, const Field& v);

/// Text dump: `# nx ny hx hy` (plus nz/hz in 3d), then one `x y value` row
/// per node in row-major node order.
void dump_field(const Grid& g, const Field& v, std::ostream& out);

}  // namespace sumhess
