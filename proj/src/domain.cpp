#include "sumhess/domain.hpp"

#include <cmath>
#include <stdexcept>

namespace sumhess {

namespace {

void check_dim(int n) {
    if (n != 2 && n != 3) throw std::invalid_argument("domain dimension must be 2 or 3");
}

void check_point(const Eigen::VectorXd& x, int n) {
    if (static_cast<int>(x.size()) != n) throw std::invalid_argument("point dimension mismatch");
    if (!x.allFinite()) throw std::invalid_argument("point has non-finite coordinates");
}

[[nodiscard]] double binomial(int n, int m) {
    double b = 1.0;
    for (int i = 0; i < m; ++i) b = b * (n - i) / (i + 1);
    return b;
}

}  // namespace

DomainDescriptor DomainDescriptor::rectangle(Eigen::VectorXd lo, Eigen::VectorXd hi) {
    if (lo.size() != hi.size()) throw std::invalid_argument("rectangle corner size mismatch");
    const int n = static_cast<int>(lo.size());
    check_dim(n);
    if (!lo.allFinite() || !hi.allFinite())
        throw std::invalid_argument("rectangle corners must be finite");
    for (int i = 0; i < n; ++i) {
        if (!(hi(i) > lo(i))) throw std::invalid_argument("rectangle extents must be positive");
    }
    DomainDescriptor d;
    d.shape_ = DomainShape::rectangle;
    d.n_ = n;
    d.lo_ = std::move(lo);
    d.hi_ = std::move(hi);
    return d;
}

DomainDescriptor DomainDescriptor::disk(double radius, Eigen::VectorXd center) {
    const int n = static_cast<int>(center.size());
    check_dim(n);
    if (!(radius > 0.0) || !std::isfinite(radius))
        throw std::invalid_argument("disk radius must be positive and finite");
    if (!center.allFinite()) throw std::invalid_argument("disk center must be finite");
    DomainDescriptor d;
    d.shape_ = DomainShape::disk;
    d.n_ = n;
    d.radius_ = radius;
    d.center_ = std::move(center);
    return d;
}

const Eigen::VectorXd& DomainDescriptor::lo() const {
    if (shape_ != DomainShape::rectangle) throw std::logic_error("lo() requires a rectangle");
    return lo_;
}

const Eigen::VectorXd& DomainDescriptor::hi() const {
    if (shape_ != DomainShape::rectangle) throw std::logic_error("hi() requires a rectangle");
    return hi_;
}

double DomainDescriptor::radius() const {
    if (shape_ != DomainShape::disk) throw std::logic_error("radius() requires a disk");
    return radius_;
}

const Eigen::VectorXd& DomainDescriptor::center() const {
    if (shape_ != DomainShape::disk) throw std::logic_error("center() requires a disk");
    return center_;
}

double DomainDescriptor::diameter() const {
    if (shape_ == DomainShape::disk) return 2.0 * radius_;
    return (hi_ - lo_).norm();
}

BoundaryQuery domain_query(const DomainDescriptor& dom, const Eigen::VectorXd& x) {
    const int n = dom.n();
    check_point(x, n);
    BoundaryQuery q;
    q.kappa.assign(static_cast<std::size_t>(n - 1), 0.0);

    if (dom.shape() == DomainShape::disk) {
        const double big_r = dom.radius();
        const Eigen::VectorXd rel = x - dom.center();
        const double r = rel.norm();
        // Center queries pick the first coordinate direction; every boundary
        // point is equidistant there.
        Eigen::VectorXd e = Eigen::VectorXd::Unit(n, 0);
        if (r > 0.0) e = rel / r;
        q.d = std::abs(big_r - r);
        q.inside = r <= big_r;
        q.nearest = dom.center() + big_r * e;
        q.nu = e;
        q.kappa.assign(static_cast<std::size_t>(n - 1), 1.0 / big_r);
        return q;
    }

    const Eigen::VectorXd& lo = dom.lo();
    const Eigen::VectorXd& hi = dom.hi();
    int outside_axes = 0;
    Eigen::VectorXd clamped = x;
    for (int i = 0; i < n; ++i) {
        if (x(i) < lo(i)) {
            clamped(i) = lo(i);
            ++outside_axes;
        } else if (x(i) > hi(i)) {
            clamped(i) = hi(i);
            ++outside_axes;
        }
    }

    if (outside_axes > 0) {
        q.inside = false;
        q.nearest = clamped;
        q.d = (x - clamped).norm();
        if (outside_axes == 1) {
            q.nu = Eigen::VectorXd::Zero(n);
            for (int i = 0; i < n; ++i) {
                if (x(i) < lo(i)) q.nu(i) = -1.0;
                if (x(i) > hi(i)) q.nu(i) = 1.0;
            }
        } else {
            q.corner = true;
            q.nu = (x - clamped) / q.d;
        }
        return q;
    }

    // Inside or on the boundary: nearest face wins; first axis/side on ties.
    q.inside = true;
    int best_axis = 0;
    bool best_hi_side = false;
    double best = hi(0) - lo(0);
    for (int i = 0; i < n; ++i) {
        if (x(i) - lo(i) < best) {
            best = x(i) - lo(i);
            best_axis = i;
            best_hi_side = false;
        }
        if (hi(i) - x(i) < best) {
            best = hi(i) - x(i);
            best_axis = i;
            best_hi_side = true;
        }
    }
    q.d = best;
    q.nearest = x;
    q.nearest(best_axis) = best_hi_side ? hi(best_axis) : lo(best_axis);
    q.nu = Eigen::VectorXd::Zero(n);
    q.nu(best_axis) = best_hi_side ? 1.0 : -1.0;

    if (best == 0.0) {
        // On the boundary: a corner point touches several faces at once.
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(n);
        int touching = 0;
        for (int i = 0; i < n; ++i) {
            if (x(i) == lo(i)) {
                sum(i) -= 1.0;
                ++touching;
            }
            if (x(i) == hi(i)) {
                sum(i) += 1.0;
                ++touching;
            }
        }
        if (touching >= 2) {
            q.corner = true;
            q.nu = sum / sum.norm();
        }
    }
    return q;
}

BarrierEval barrier_eval(const DomainDescriptor& dom, double big_k, const Eigen::VectorXd& x) {
    if (dom.shape() != DomainShape::disk)
        throw std::invalid_argument("barrier_eval requires a disk domain");
    if (!(big_k >= 0.0) || !std::isfinite(big_k))
        throw std::invalid_argument("barrier constant K must be finite and nonnegative");
    const int n = dom.n();
    check_point(x, n);

    const double big_r = dom.radius();
    const Eigen::VectorXd rel = x - dom.center();
    const double r = rel.norm();
    if (r > big_r) throw std::domain_error("barrier_eval: point is outside the disk");
    if (r == 0.0) throw std::domain_error("barrier_eval: the disk center is outside the collar");
    const double d = big_r - r;
    if (big_k > 0.0 && d >= 1.0 / (8.0 * big_k))
        throw std::domain_error("barrier_eval: point is outside the collar 8*K*mu <= 1");

    const Eigen::VectorXd e = rel / r;
    const double slope = 1.0 - 2.0 * big_k * d;
    const Eigen::MatrixXd ee = e * e.transpose();
    const Eigen::MatrixXd hess =
        2.0 * big_k * ee + (slope / r) * (Eigen::MatrixXd::Identity(n, n) - ee);
    return BarrierEval{-d + big_k * d * d, slope * e, SymMatrix(hess)};
}

ConvexityConstants convexity_constants(const DomainDescriptor& dom, const SumHessianParams& p) {
    p.validate(dom.n());
    ConvexityConstants c;
    if (dom.shape() == DomainShape::rectangle) return c;
    const double kappa = 1.0 / dom.radius();
    c.a_kappa = kappa;
    c.gamma_kappa = kappa;
    c.c_kappa = binomial(dom.n() - 1, p.k - 1) * std::pow(kappa, p.k - 1);
    return c;
}

}  // namespace sumhess
