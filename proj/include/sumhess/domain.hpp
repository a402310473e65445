#pragma once

/// Closed-form domain geometry for the two supported shapes: axis-aligned
/// rectangles (boxes) and disks (balls) in dimension n in {2,3}.  Provides the
/// boundary distance d(x) = dist(x, bdry), the outward unit normal, principal
/// curvatures, the boundary-convexity constants (a_kappa, c_kappa,
/// gamma_kappa), and the barrier h = -d + K d^2 on the collar
/// {0 <= d < mu} with 8 K mu <= 1.

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "sumhess/spectrum.hpp"
#include "sumhess/sym_matrix.hpp"

namespace sumhess {

enum class DomainShape { rectangle, disk };

/// Rectangle [lo_1,hi_1] x ... x [lo_n,hi_n] or disk |x - center| <= radius.
/// Disks have uniform principal curvature 1/R; rectangle faces are flat
/// (almost convex with a_kappa = 0, not uniformly convex).
class DomainDescriptor {
public:
    [[nodiscard]] static DomainDescriptor rectangle(Eigen::VectorXd lo, Eigen::VectorXd hi);
    [[nodiscard]] static DomainDescriptor disk(double radius, Eigen::VectorXd center);

    [[nodiscard]] DomainShape shape() const noexcept { return shape_; }
    [[nodiscard]] int n() const noexcept { return n_; }

    /// Rectangle corners; throws std::logic_error on a disk.
    [[nodiscard]] const Eigen::VectorXd& lo() const;
    [[nodiscard]] const Eigen::VectorXd& hi() const;

    /// Disk data; throws std::logic_error on a rectangle.
    [[nodiscard]] double radius() const;
    [[nodiscard]] const Eigen::VectorXd& center() const;

    [[nodiscard]] double diameter() const;

private:
    DomainDescriptor() = default;

    DomainShape shape_ = DomainShape::rectangle;
    int n_ = 0;
    Eigen::VectorXd lo_, hi_;      // rectangle
    double radius_ = 0.0;          // disk
    Eigen::VectorXd center_;       // disk
};

/// Result of a nearest-boundary-point query.  `corner` marks rectangle
/// queries whose nearest boundary point is a corner (or edge in 3d); `nu` is
/// then the unit direction from `nearest` toward the exterior rather than a
/// face normal.  Invariants: |nu| = 1 and nearest + d*nu lies on the exterior
/// side of the boundary.
struct BoundaryQuery {
    double d = 0.0;             // dist(x, bdry) >= 0
    bool inside = false;        // x in the closed domain
    bool corner = false;
    Eigen::VectorXd nearest;    // point on the boundary
    Eigen::VectorXd nu;         // unit outward normal at nearest
    std::vector<double> kappa;  // n-1 principal curvatures at nearest
};

[[nodiscard]] BoundaryQuery domain_query(const DomainDescriptor& dom, const Eigen::VectorXd& x);

struct BarrierEval {
    double h;            // -d + K d^2
    Eigen::VectorXd dh;  // (1 - 2 K d) e with e the unit outward radial
    SymMatrix d2h;       // 2K e e^T + ((1 - 2 K d)/r) (I - e e^T)
};

/// Barrier evaluation for the disk.  The collar is 0 <= d < mu with
/// mu = 1/(8K) (the whole punctured disk when K = 0); queries outside the
/// collar, outside the disk, or at the center throw std::domain_error.
[[nodiscard]] BarrierEval barrier_eval(const DomainDescriptor& dom, double big_k,
                                       const Eigen::VectorXd& x);

/// Boundary convexity constants.  Disk: a_kappa = gamma_kappa = 1/R and
/// c_kappa = sigma_{k-1} of the (n-1)-vector (1/R,...,1/R).  Rectangle:
/// a_kappa = c_kappa = 0 and gamma_kappa absent (flat faces are almost convex
/// but not uniformly convex).
struct ConvexityConstants {
    double a_kappa = 0.0;
    double c_kappa = 0.0;
    std::optional<double> gamma_kappa;
};

[[nodiscard]] ConvexityConstants convexity_constants(const DomainDescriptor& dom,
                                                     const SumHessianParams& p);

}  // namespace sumhess
