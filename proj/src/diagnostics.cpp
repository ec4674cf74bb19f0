#include "wappo/diagnostics.hpp"

#include "wappo/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace wappo {

namespace {

constexpr double kPowerTol = 1e-10;
constexpr int kPowerMaxIter = 10000;

// Largest eigenpair of the symmetric matrix C (d x d) by power iteration.
std::pair<double, std::vector<double>> power_iteration(const std::vector<double>& c,
                                                       std::size_t d, Rng& rng) {
    std::vector<double> v(d), next(d);
    for (auto& e : v) e = rng.normal();
    double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    for (auto& e : v) e /= norm;

    double eigenvalue = 0.0;
    for (int it = 0; it < kPowerMaxIter; ++it) {
        for (std::size_t i = 0; i < d; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < d; ++j) s += c[i * d + j] * v[j];
            next[i] = s;
        }
        double nn = std::sqrt(std::inner_product(next.begin(), next.end(), next.begin(), 0.0));
        if (nn == 0.0) return {0.0, v};  // v is in the null space; eigenvalue 0
        double lambda = std::inner_product(v.begin(), v.end(), next.begin(), 0.0);
        double diff = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            next[i] /= nn;
            diff = std::max(diff, std::fabs(std::fabs(next[i]) - std::fabs(v[i])));
        }
        v = next;
        eigenvalue = lambda;
        if (diff < kPowerTol && it > 2) break;
    }
    // deterministic sign: largest-magnitude component positive
    std::size_t imax = 0;
    for (std::size_t i = 1; i < d; ++i)
        if (std::fabs(v[i]) > std::fabs(v[imax])) imax = i;
    if (v[imax] < 0.0)
        for (auto& e : v) e = -e;
    return {eigenvalue, v};
}

}  // namespace

Pca2d pca_2d(const FeatureMatrix& features) {
    std::size_t n = features.rows, d = features.cols;
    if (n < 3) throw DiagnosticsError("pca_2d: need at least 3 samples");

    std::vector<double> mean(d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) mean[c] += features.at(r, c);
    for (auto& m : mean) m /= static_cast<double>(n);

    std::vector<double> centered(n * d);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c) centered[r * d + c] = features.at(r, c) - mean[c];

    // sample covariance (divides by n-1)
    std::vector<double> cov(d * d, 0.0);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t i = 0; i < d; ++i) {
            double xi = centered[r * d + i];
            if (xi == 0.0) continue;
            for (std::size_t j = i; j < d; ++j) cov[i * d + j] += xi * centered[r * d + j];
        }
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i; j < d; ++j) {
            cov[i * d + j] /= static_cast<double>(n - 1);
            cov[j * d + i] = cov[i * d + j];
        }

    double trace = 0.0;
    for (std::size_t i = 0; i < d; ++i) trace += cov[i * d + i];
    if (trace <= 0.0) throw DiagnosticsError("pca_2d: rank-0 covariance");

    Rng rng(0x9ca5eedull);
    Pca2d out;
    out.points.assign(n * 2, 0.0);
    std::vector<double> work = cov;
    std::vector<std::vector<double>> components;
    for (int k = 0; k < 2; ++k) {
        auto [lambda, v] = power_iteration(work, d, rng);
        if (lambda < 0.0) lambda = 0.0;
        out.explained[k] = lambda / trace;
        components.push_back(v);
        // deflate
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) work[i * d + j] -= lambda * v[i] * v[j];
    }
    for (std::size_t r = 0; r < n; ++r)
        for (int k = 0; k < 2; ++k) {
            double s = 0.0;
            for (std::size_t c = 0; c < d; ++c) s += centered[r * d + c] * components[k][c];
            out.points[r * 2 + k] = s;
        }
    return out;
}

DensityGrid gaussian_kde(const std::vector<double>& points_xy, double bandwidth,
                         std::size_t resolution, double margin_bandwidths) {
    if (bandwidth <= 0.0) throw DiagnosticsError("gaussian_kde: bandwidth must be positive");
    std::size_t n = points_xy.size() / 2;
    if (n < 1) throw DiagnosticsError("gaussian_kde: need at least one point");

    DensityGrid grid;
    grid.nx = grid.ny = resolution;
    grid.xmin = grid.xmax = points_xy[0];
    grid.ymin = grid.ymax = points_xy[1];
    for (std::size_t i = 0; i < n; ++i) {
        grid.xmin = std::min(grid.xmin, points_xy[2 * i]);
        grid.xmax = std::max(grid.xmax, points_xy[2 * i]);
        grid.ymin = std::min(grid.ymin, points_xy[2 * i + 1]);
        grid.ymax = std::max(grid.ymax, points_xy[2 * i + 1]);
    }
    grid.xmin -= margin_bandwidths * bandwidth;
    grid.xmax += margin_bandwidths * bandwidth;
    grid.ymin -= margin_bandwidths * bandwidth;
    grid.ymax += margin_bandwidths * bandwidth;

    double norm = 1.0 / (n * 2.0 * M_PI * bandwidth * bandwidth);
    double inv2b2 = 1.0 / (2.0 * bandwidth * bandwidth);
    grid.values.assign(grid.nx * grid.ny, 0.0);
    for (std::size_t j = 0; j < grid.ny; ++j) {
        double gy = grid.y_at(j);
        for (std::size_t i = 0; i < grid.nx; ++i) {
            double gx = grid.x_at(i);
            double s = 0.0;
            for (std::size_t p = 0; p < n; ++p) {
                double dx = gx - points_xy[2 * p];
                double dy = gy - points_xy[2 * p + 1];
                s += std::exp(-(dx * dx + dy * dy) * inv2b2);
            }
            grid.values[j * grid.nx + i] = norm * s;
        }
    }
    return grid;
}

double scott_bandwidth(const std::vector<double>& points_xy) {
    std::size_t n = points_xy.size() / 2;
    if (n < 2) return 1.0;
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += points_xy[2 * i];
        my += points_xy[2 * i + 1];
    }
    mx /= n;
    my /= n;
    double vx = 0, vy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        vx += (points_xy[2 * i] - mx) * (points_xy[2 * i] - mx);
        vy += (points_xy[2 * i + 1] - my) * (points_xy[2 * i + 1] - my);
    }
    double sx = std::sqrt(vx / (n - 1)), sy = std::sqrt(vy / (n - 1));
    double b = 0.5 * (sx + sy) * std::pow(static_cast<double>(n), -1.0 / 6.0);
    return b > 0.0 ? b : 1.0;
}

double w1_1d_oracle(std::vector<double> samples_a, std::vector<double> samples_b) {
    if (samples_a.size() != samples_b.size())
        throw DiagnosticsError("w1_1d_oracle: sample counts must be equal");
    if (samples_a.empty()) throw DiagnosticsError("w1_1d_oracle: empty samples");
    std::sort(samples_a.begin(), samples_a.end());
    std::sort(samples_b.begin(), samples_b.end());
    double s = 0.0;
    for (std::size_t i = 0; i < samples_a.size(); ++i)
        s += std::fabs(samples_a[i] - samples_b[i]);
    return s / static_cast<double>(samples_a.size());
}

double sliced_w1_directions(const FeatureMatrix& a, const FeatureMatrix& b,
                            const std::vector<double>& directions, std::size_t n_directions) {
    if (a.rows != b.rows) throw DiagnosticsError("sliced_w1: sample counts must be equal");
    if (a.cols != b.cols) throw DiagnosticsError("sliced_w1: dimensions must be equal");
    std::size_t d = a.cols;
    double total = 0.0;
    std::vector<double> pa(a.rows), pb(b.rows);
    for (std::size_t k = 0; k < n_directions; ++k) {
        const double* u = &directions[k * d];
        for (std::size_t r = 0; r < a.rows; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < d; ++c) s += a.at(r, c) * u[c];
            pa[r] = s;
        }
        for (std::size_t r = 0; r < b.rows; ++r) {
            double s = 0.0;
            for (std::size_t c = 0; c < d; ++c) s += b.at(r, c) * u[c];
            pb[r] = s;
        }
        total += w1_1d_oracle(pa, pb);
    }
    return total / static_cast<double>(n_directions);
}

double sliced_w1(const FeatureMatrix& a, const FeatureMatrix& b, int n_directions,
                 std::uint64_t seed) {
    if (n_directions < 1) throw DiagnosticsError("sliced_w1: need at least one direction");
    std::size_t d = a.cols;
    Rng rng(seed);
    std::vector<double> dirs(static_cast<std::size_t>(n_directions) * d);
    for (int k = 0; k < n_directions; ++k) {
        double norm = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            double g = rng.normal();
            dirs[k * d + c] = g;
            norm += g * g;
        }
        norm = std::sqrt(norm);
        for (std::size_t c = 0; c < d; ++c) dirs[k * d + c] /= norm;
    }
    return sliced_w1_directions(a, b, dirs, static_cast<std::size_t>(n_directions));
}

double normalized_return(double r, double rmin, double rmax) {
    if (rmax <= rmin) throw DiagnosticsError("normalized_return: rmax must exceed rmin");
    return (r - rmin) / (rmax - rmin);
}

}  // namespace wappo
