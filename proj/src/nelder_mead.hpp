#pragma once

// Small dense Nelder-Mead minimizer shared by the calibration and
// compensation fitters. Deterministic for a fixed starting point.

#include <algorithm>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace ghzsim::detail {

struct NmResult {
    Eigen::VectorXd x;
    double f = std::numeric_limits<double>::infinity();
    int iterations = 0;
};

inline NmResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& fn,
                            const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                            int max_iter, double ftol,
                            double fstop = -std::numeric_limits<double>::infinity()) {
    const int n = static_cast<int>(x0.size());
    std::vector<Eigen::VectorXd> xs(n + 1, x0);
    std::vector<double> fs(n + 1);
    for (int k = 1; k <= n; ++k) xs[k](k - 1) += step(k - 1);
    for (int k = 0; k <= n; ++k) fs[k] = fn(xs[k]);

    NmResult out;
    int iter = 0;
    for (; iter < max_iter; ++iter) {
        std::vector<int> idx(n + 1);
        for (int k = 0; k <= n; ++k) idx[k] = k;
        std::sort(idx.begin(), idx.end(), [&](int i, int j) { return fs[i] < fs[j]; });
        if (fs[idx[0]] <= fstop) break;
        if (fs[idx[n]] - fs[idx[0]] < ftol) break;

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
        for (int k = 0; k < n; ++k) centroid += xs[idx[k]];
        centroid /= n;
        const int worst = idx[n];

        const Eigen::VectorXd xr = centroid + (centroid - xs[worst]);
        const double fr = fn(xr);
        if (fr < fs[idx[0]]) {
            const Eigen::VectorXd xe = centroid + 2.0 * (centroid - xs[worst]);
            const double fe = fn(xe);
            if (fe < fr) {
                xs[worst] = xe;
                fs[worst] = fe;
            } else {
                xs[worst] = xr;
                fs[worst] = fr;
            }
        } else if (fr < fs[idx[n - 1]]) {
            xs[worst] = xr;
            fs[worst] = fr;
        } else {
            const Eigen::VectorXd xc = centroid + 0.5 * (xs[worst] - centroid);
            const double fc = fn(xc);
            if (fc < fs[worst]) {
                xs[worst] = xc;
                fs[worst] = fc;
            } else {
                for (int k = 0; k <= n; ++k) {
                    if (k == idx[0]) continue;
                    xs[k] = xs[idx[0]] + 0.5 * (xs[k] - xs[idx[0]]);
                    fs[k] = fn(xs[k]);
                }
            }
        }
    }
    int best = 0;
    for (int k = 1; k <= n; ++k)
        if (fs[k] < fs[best]) best = k;
    out.x = xs[best];
    out.f = fs[best];
    out.iterations = iter;
    return out;
}

}  // namespace ghzsim::detail
