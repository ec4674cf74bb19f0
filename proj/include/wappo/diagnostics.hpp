#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace wappo {

struct DiagnosticsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Row-major sample matrix (rows = samples).
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

struct Pca2d {
    std::vector<double> points;       // rows x 2, row-major
    double explained[2] = {0.0, 0.0};  // eigenvalue fractions of total variance
};

// Mean-centered projection onto the top-2 eigenvectors of the sample
// covariance, computed by power iteration with deflation (tolerance 1e-10,
// max 10000 iterations).
Pca2d pca_2d(const FeatureMatrix& features);

struct DensityGrid {
    double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
    std::size_t nx = 0, ny = 0;
    std::vector<double> values;  // ny x nx, row-major

    double x_at(std::size_t i) const { return xmin + (xmax - xmin) * i / double(nx - 1); }
    double y_at(std::size_t j) const { return ymin + (ymax - ymin) * j / double(ny - 1); }
};

// Gaussian KDE of 2-D points on a regular grid extending margin_bandwidths
// beyond the data hull:
//   density(g) = (1/(n*2*pi*b^2)) * sum_i exp(-|g - p_i|^2 / (2 b^2))
DensityGrid gaussian_kde(const std::vector<double>& points_xy, double bandwidth,
                         std::size_t resolution = 64, double margin_bandwidths = 3.0);

// Scott's rule bandwidth for the 2-D point set: n^(-1/6) times the mean of
// the per-dimension standard deviations.
double scott_bandwidth(const std::vector<double>& points_xy);

// Exact W1 between equal-size 1-D empirical distributions:
// sort both, average |a_(i) - b_(i)|.
double w1_1d_oracle(std::vector<double> samples_a, std::vector<double> samples_b);

// Average of w1_1d_oracle over projections onto random unit directions.
double sliced_w1(const FeatureMatrix& a, const FeatureMatrix& b, int n_directions,
                 std::uint64_t seed);
// Same, with caller-provided unit directions (n_directions x dim, row-major).
double sliced_w1_directions(const FeatureMatrix& a, const FeatureMatrix& b,
                            const std::vector<double>& directions, std::size_t n_directions);

// (R - Rmin) / (Rmax - Rmin); deliberately not clamped.
double normalized_return(double r, double rmin, double rmax);

}  // namespace wappo
