#include "latlab/qp.hpp"

#include <Eigen/Cholesky>
#include <stdexcept>

namespace latlab::ctrl {

void QpProblem::validate() const {
    long n = H.rows();
    if (H.cols() != n || g.size() != n || lo.size() != n || hi.size() != n)
        throw std::invalid_argument("qp: inconsistent dimensions");
    if (!H.isApprox(H.transpose(), 1e-12)) throw std::invalid_argument("qp: H must be symmetric");
    for (long i = 0; i < n; ++i)
        if (lo(i) > hi(i)) throw std::invalid_argument("qp: lo > hi");
    if (has_rate) {
        if (rate_lo.size() != n - 1 || rate_hi.size() != n - 1)
            throw std::invalid_argument("qp: rate bound size must be n-1");
        for (long i = 0; i + 1 < n; ++i)
            if (rate_lo(i) > rate_hi(i)) throw std::invalid_argument("qp: rate lo > hi");
    }
}

namespace {

Vec clamp_vec(const Vec& v, const Vec& lo, const Vec& hi) { return v.cwiseMax(lo).cwiseMin(hi); }

}  // namespace

QpResult qp_solve(const QpProblem& qp, double tol, int max_iter, QpWarmState* warm) {
    qp.validate();
    long n = qp.H.rows();
    bool rate = qp.has_rate && n > 1;
    long m = rate ? n - 1 : 0;

    // unit-scale the objective; the feasible set and argmin are unchanged
    double scale = std::max(qp.H.diagonal().cwiseAbs().mean(), 1e-12);
    Mat H = qp.H / scale;
    Vec g = qp.g / scale;

    Mat D(m, n);
    if (rate) {
        D.setZero();
        for (long i = 0; i < m; ++i) {
            D(i, i) = -1.0;
            D(i, i + 1) = 1.0;
        }
    }

    double rho = (warm && warm->rho > 0.0) ? warm->rho : 1.0;
    auto factor = [&](double r) {
        Mat M = H + r * Mat::Identity(n, n);
        if (rate) M += r * D.transpose() * D;
        return Eigen::LLT<Mat>(M);
    };
    Eigen::LLT<Mat> llt = factor(rho);

    Vec x = (warm && warm->x.size() == n) ? warm->x : Vec::Zero(n);
    Vec u1 = (warm && warm->u1.size() == n) ? warm->u1 : Vec::Zero(n);
    Vec u2 = (warm && rate && warm->u2.size() == m) ? warm->u2 : Vec::Zero(m);
    Vec z1 = clamp_vec(x, qp.lo, qp.hi);
    Vec z2 = rate ? clamp_vec(D * x, qp.rate_lo, qp.rate_hi) : Vec();

    QpResult res;
    int it = 0;
    for (; it < max_iter; ++it) {
        Vec rhs = -g + rho * (z1 - u1);
        if (rate) rhs += rho * (D.transpose() * (z2 - u2));
        x = llt.solve(rhs);

        Vec dx = rate ? Vec(D * x) : Vec();
        Vec z1n = clamp_vec(x + u1, qp.lo, qp.hi);
        Vec z2n = rate ? clamp_vec(dx + u2, qp.rate_lo, qp.rate_hi) : Vec();

        Vec dual_vec = z1n - z1;
        if (rate) dual_vec += D.transpose() * (z2n - z2);
        double r_dual = rho * dual_vec.lpNorm<Eigen::Infinity>();

        z1 = z1n;
        z2 = z2n;
        u1 += x - z1;
        if (rate) u2 += dx - z2;

        double r_primal = (x - z1).lpNorm<Eigen::Infinity>();
        if (rate) r_primal = std::max(r_primal, (dx - z2).lpNorm<Eigen::Infinity>());

        if (r_primal < tol && r_dual < tol) {
            res.converged = true;
            ++it;
            break;
        }

        // residual balancing (scaled duals preserved across the rho change)
        if ((it + 1) % 25 == 0 && (r_primal > 5.0 * r_dual || r_dual > 5.0 * r_primal)) {
            double f = std::sqrt(std::max(r_primal, 1e-300) / std::max(r_dual, 1e-300));
            f = std::clamp(f, 0.1, 10.0);
            if (f > 1.2 || f < 0.8) {
                rho *= f;
                u1 /= f;
                u2 /= f;
                llt = factor(rho);
            }
        }
    }

    res.x = x;
    res.iterations = it;
    if (warm) {
        warm->x = x;
        warm->u1 = u1;
        warm->u2 = u2;
        warm->rho = rho;
    }

    // KKT residuals on the unit-scaled problem, multipliers lambda = rho * u
    Vec lam1 = rho * u1;
    Vec stat = H * x + g + lam1;
    if (rate) stat += D.transpose() * (rho * u2);
    double kkt = stat.lpNorm<Eigen::Infinity>();
    for (long i = 0; i < n; ++i) {
        double slack = lam1(i) >= 0.0 ? qp.hi(i) - x(i) : x(i) - qp.lo(i);
        kkt = std::max(kkt, std::min(std::abs(lam1(i)), std::max(slack, 0.0)));
        kkt = std::max(kkt, std::max(qp.lo(i) - x(i), x(i) - qp.hi(i)));
    }
    if (rate) {
        Vec dx = D * x;
        for (long i = 0; i < m; ++i) {
            double lam = rho * u2(i);
            double slack = lam >= 0.0 ? qp.rate_hi(i) - dx(i) : dx(i) - qp.rate_lo(i);
            kkt = std::max(kkt, std::min(std::abs(lam), std::max(slack, 0.0)));
            kkt = std::max(kkt, std::max(qp.rate_lo(i) - dx(i), dx(i) - qp.rate_hi(i)));
        }
    }
    res.kkt_residual = kkt;
    return res;
}

}  // namespace latlab::ctrl
