// Times the OpenMP kernels against their serial reference implementations:
// the Wigner grid evaluator and the coupled signal right-hand side.

#include "dopo/cmop.hpp"
#include "dopo/fock.hpp"
#include "dopo/types.hpp"
#include "dopo/wigner.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

namespace {

double best_seconds(const std::function<void()>& f, int reps) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        f();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
    }
    return best;
}

dopo::Mat sample_state(int dim) {
    using namespace dopo;
    const Mat sq = squeeze_op(dim, cxd(0.45, 0.1));
    const Vec psi = sq * coherent_state(dim, cxd(0.8, -0.3));
    Mat rho = 0.7 * projector(psi) + 0.3 * thermal_state(dim, 0.6);
    rho /= rho.trace().real();
    return rho;
}

} // namespace

int main() {
    using namespace dopo;
    std::printf("%-28s %10s %10s %8s %10s\n", "kernel", "serial[s]", "parallel", "speedup",
                "max|diff|");

    for (int dim : {32, 64}) {
        const Mat rho = sample_state(dim);
        const RVec ax = RVec::LinSpaced(151, -6.0, 6.0);
        WignerGrid ws, wp;
        const double ts = best_seconds([&] { ws = wigner_from_rho_serial(rho, ax, ax); }, 3);
        const double tp = best_seconds([&] { wp = wigner_from_rho(rho, ax, ax); }, 3);
        const double diff = (ws.w - wp.w).cwiseAbs().maxCoeff();
        char name[64];
        std::snprintf(name, sizeof name, "wigner 151x151 dim=%d", dim);
        std::printf("%-28s %10.4f %10.4f %7.2fx %10.2e\n", name, ts, tp, ts / tp, diff);
    }

    for (int dim : {64, 128}) {
        const SignalOps ops(dim);
        const Mat rho = sample_state(dim);
        Mat h = 0.05 * sample_state(dim);
        h -= (h.trace() / static_cast<double>(dim)) * Mat::Identity(dim, dim);
        Mat dr1(dim, dim), dh1(dim, dim), dr2(dim, dim), dh2(dim, dim);
        const cxd mu_frame(0.4, 0.0), mu_total(0.45, 0.02), m_p(0.01, -0.02);
        const double n_p = 0.03, b = 0.0025;
        const int evals = 40;
        const double ts = best_seconds(
            [&] {
                for (int k = 0; k < evals; ++k)
                    signal_rhs_serial(ops, 1.0, 1.0, mu_frame, mu_total, m_p, n_p, b, rho, h,
                                      dr1, dh1);
            },
            3);
        const double tp = best_seconds(
            [&] {
                for (int k = 0; k < evals; ++k)
                    signal_rhs(ops, 1.0, 1.0, mu_frame, mu_total, m_p, n_p, b, rho, h, dr2, dh2);
            },
            3);
        const double diff = std::max((dr1 - dr2).cwiseAbs().maxCoeff(),
                                     (dh1 - dh2).cwiseAbs().maxCoeff());
        char name[64];
        std::snprintf(name, sizeof name, "signal rhs x%d dim=%d", evals, dim);
        std::printf("%-28s %10.4f %10.4f %7.2fx %10.2e\n", name, ts, tp, ts / tp, diff);
    }
    return 0;
}
