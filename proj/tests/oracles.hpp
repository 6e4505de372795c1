#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library's numerics; matrices are plain std::vector storage or
// element-wise Eigen access only.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

namespace oracle {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

inline Mat random_matrix(std::mt19937_64& gen, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = n(gen);
  return m;
}

inline Mat matmul(const Mat& a, const Mat& b) {
  Mat c = Mat::Zero(a.rows(), b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (Eigen::Index k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

inline Mat transpose(const Mat& a) {
  Mat t(a.cols(), a.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

inline double frobenius(const Mat& a) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) s += a.data()[i] * a.data()[i];
  return std::sqrt(s);
}

inline double rel_diff(const Mat& a, const Mat& b) {
  Mat d = a;
  for (Eigen::Index i = 0; i < d.size(); ++i) d.data()[i] -= b.data()[i];
  return frobenius(d) / std::max(frobenius(b), 1e-300);
}

/// Population covariance with a two-pass mean.
inline Mat covariance(const Mat& x) {
  const auto n = static_cast<double>(x.rows());
  std::vector<double> mean(static_cast<std::size_t>(x.cols()), 0.0);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) mean[static_cast<std::size_t>(j)] += x(i, j);
  for (auto& m : mean) m /= n;
  Mat c = Mat::Zero(x.cols(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index a = 0; a < x.cols(); ++a)
      for (Eigen::Index b = 0; b < x.cols(); ++b)
        c(a, b) += (x(i, a) - mean[static_cast<std::size_t>(a)]) * (x(i, b) - mean[static_cast<std::size_t>(b)]);
  for (Eigen::Index k = 0; k < c.size(); ++k) c.data()[k] /= n;
  return c;
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
inline std::vector<double> jacobi_eigenvalues(Mat a, int max_sweeps = 100) {
  const Eigen::Index n = a.rows();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) ev[static_cast<std::size_t>(i)] = a(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

/// Modified Gram-Schmidt on the columns of `a`; returns Q with orthonormal columns.
inline Mat gram_schmidt(Mat a) {
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index k = 0; k < j; ++k) {
      double dot = 0.0;
      for (Eigen::Index i = 0; i < a.rows(); ++i) dot += a(i, k) * a(i, j);
      for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, j) -= dot * a(i, k);
    }
    double norm = 0.0;
    for (Eigen::Index i = 0; i < a.rows(); ++i) norm += a(i, j) * a(i, j);
    norm = std::sqrt(norm);
    for (Eigen::Index i = 0; i < a.rows(); ++i) a(i, j) /= norm;
  }
  return a;
}

/// n x d sample whose population covariance is exactly `factor * factor^T`
/// (up to rounding) and whose mean is `offset`.
inline Mat sample_with_covariance(std::mt19937_64& gen, Eigen::Index n, const Mat& factor, double offset = 0.0) {
  const Eigen::Index d = factor.rows();
  Mat z = random_matrix(gen, n, d);
  for (Eigen::Index j = 0; j < d; ++j) {
    double m = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) m += z(i, j);
    m /= static_cast<double>(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i, j) -= m;
  }
  Mat q = gram_schmidt(z);
  for (Eigen::Index k = 0; k < q.size(); ++k) q.data()[k] *= std::sqrt(static_cast<double>(n));
  Mat x = matmul(q, transpose(factor));
  for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] += offset;
  return x;
}

/// Central finite-difference gradient of f at x.
inline Mat finite_difference(const std::function<double(const Mat&)>& f, const Mat& x, double h = 1e-6) {
  Mat g(x.rows(), x.cols());
  Mat probe = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double orig = probe.data()[k];
    probe.data()[k] = orig + h;
    const double up = f(probe);
    probe.data()[k] = orig - h;
    const double down = f(probe);
    probe.data()[k] = orig;
    g.data()[k] = (up - down) / (2.0 * h);
  }
  return g;
}

/// Largest element-wise relative error, with differences below `floor` in
/// both magnitudes treated as absolute.
inline double max_rel_error(const Mat& analytic, const Mat& numeric, double floor = 1e-3) {
  double worst = 0.0;
  for (Eigen::Index k = 0; k < analytic.size(); ++k) {
    const double a = analytic.data()[k];
    const double b = numeric.data()[k];
    worst = std::max(worst, std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor}));
  }
  return worst;
}

/// Mean cross-entropy of softmax(x W^T) written out term by term.
inline double softmax_cross_entropy(const Mat& w, const Mat& x, const std::vector<std::uint32_t>& y,
                                    const std::vector<std::uint8_t>& mask, double weight) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (!mask.empty() && !mask[static_cast<std::size_t>(i)]) continue;
    std::vector<double> z(static_cast<std::size_t>(w.rows()));
    for (Eigen::Index c = 0; c < w.rows(); ++c) {
      double s = 0.0;
      for (Eigen::Index j = 0; j < x.cols(); ++j) s += x(i, j) * w(c, j);
      z[static_cast<std::size_t>(c)] = s;
    }
    const double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - m);
    total += m + std::log(sum) - z[y[static_cast<std::size_t>(i)]];
  }
  return weight * total / static_cast<double>(x.rows());
}

/// Unregularized, bias-free logistic regression by Newton's method.
/// Labels in {0, 1}; minimizes mean log(1 + exp(-s_i x_i . w)) with s = 2y - 1.
inline Vec newton_logistic(const Mat& x, const std::vector<int>& y, int iterations = 100) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  Vec w = Vec::Zero(d);
  for (int it = 0; it < iterations; ++it) {
    Vec g = Vec::Zero(d);
    Mat h = Mat::Zero(d, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      double z = 0.0;
      for (Eigen::Index j = 0; j < d; ++j) z += x(i, j) * w(j);
      const double p = 1.0 / (1.0 + std::exp(-z));
      const double r = p - y[static_cast<std::size_t>(i)];
      for (Eigen::Index a = 0; a < d; ++a) {
        g(a) += r * x(i, a) / static_cast<double>(n);
        for (Eigen::Index b = 0; b < d; ++b) h(a, b) += p * (1 - p) * x(i, a) * x(i, b) / static_cast<double>(n);
      }
    }
    // d is tiny; solve by Gaussian elimination with partial pivoting.
    Mat aug(d, d + 1);
    for (Eigen::Index a = 0; a < d; ++a) {
      for (Eigen::Index b = 0; b < d; ++b) aug(a, b) = h(a, b);
      aug(a, d) = g(a);
    }
    for (Eigen::Index c = 0; c < d; ++c) {
      Eigen::Index piv = c;
      for (Eigen::Index r = c + 1; r < d; ++r)
        if (std::abs(aug(r, c)) > std::abs(aug(piv, c))) piv = r;
      for (Eigen::Index k = 0; k <= d; ++k) std::swap(aug(c, k), aug(piv, k));
      for (Eigen::Index r = 0; r < d; ++r) {
        if (r == c) continue;
        const double f = aug(r, c) / aug(c, c);
        for (Eigen::Index k = c; k <= d; ++k) aug(r, k) -= f * aug(c, k);
      }
    }
    double step = 0.0;
    for (Eigen::Index a = 0; a < d; ++a) {
      const double delta = aug(a, d) / aug(a, a);
      w(a) -= delta;
      step = std::max(step, std::abs(delta));
    }
    if (step < 1e-14) break;
  }
  return w;
}

/// Index of the largest entry, first occurrence on ties.
inline std::uint32_t first_argmax(const std::vector<double>& v) {
  std::uint32_t best = 0;
  for (std::uint32_t c = 1; c < v.size(); ++c)
    if (v[c] > v[best]) best = c;
  return best;
}

inline std::vector<double> row(const Mat& m, Eigen::Index i) {
  std::vector<double> r(static_cast<std::size_t>(m.cols()));
  for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(j)] = m(i, j);
  return r;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("pace_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace oracle
