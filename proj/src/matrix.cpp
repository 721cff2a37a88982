#include "imitatio/matrix.hpp"

#include <cmath>
#include <cstdio>

#include "imitatio/errors.hpp"

namespace imitatio {

namespace {

std::string fmt(double x) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

}  // namespace

StochasticMatrix StochasticMatrix::identity(std::size_t n) {
  StochasticMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

StochasticMatrix StochasticMatrix::from_rows(
    const std::vector<std::vector<double>>& rows) {
  StochasticMatrix m(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.size())
      throw Error("matrix row " + std::to_string(i) + " has " +
                  std::to_string(rows[i].size()) + " entries, expected " +
                  std::to_string(rows.size()));
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

std::vector<std::string> StochasticMatrix::check(const std::string& what) const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n_; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n_; ++j) {
      double v = (*this)(i, j);
      if (v < 0.0)
        out.push_back(what + ": entry (" + std::to_string(i + 1) + "," +
                      std::to_string(j + 1) + ") is negative (" + fmt(v) + ")");
      sum += v;
    }
    if (std::abs(sum - 1.0) > kRowSumTol)
      out.push_back(what + ": row " + std::to_string(i + 1) + " sums to " +
                    fmt(sum) + ", off by more than " + fmt(kRowSumTol));
  }
  return out;
}

void StochasticMatrix::renormalize_rows() {
  for (std::size_t i = 0; i < n_; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n_; ++j) sum += (*this)(i, j);
    if (sum > 0.0)
      for (std::size_t j = 0; j < n_; ++j) (*this)(i, j) /= sum;
  }
}

void StochasticMatrix::add_scaled(const StochasticMatrix& m, double w) {
  if (n_ != m.n_) throw Error("add_scaled: size mismatch");
  for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += w * m.a_[i];
}

std::vector<std::vector<double>> StochasticMatrix::to_rows() const {
  std::vector<std::vector<double>> rows(n_, std::vector<double>(n_));
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) rows[i][j] = (*this)(i, j);
  return rows;
}

StochasticMatrix operator*(const StochasticMatrix& a, const StochasticMatrix& b) {
  if (a.n_ != b.n_) throw Error("matrix product: size mismatch");
  StochasticMatrix c(a.n_);
  for (std::size_t i = 0; i < a.n_; ++i)
    for (std::size_t k = 0; k < a.n_; ++k) {
      double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < a.n_; ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

std::vector<std::string> Distribution::check(const std::string& what) const {
  std::vector<std::string> out;
  double sum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] < 0.0)
      out.push_back(what + ": weight " + std::to_string(i + 1) +
                    " is negative (" + fmt(w[i]) + ")");
    sum += w[i];
  }
  if (std::abs(sum - 1.0) > kRowSumTol)
    out.push_back(what + ": weights sum to " + fmt(sum) +
                  ", off by more than " + fmt(kRowSumTol));
  return out;
}

int Distribution::sample(double u) const {
  double cum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    cum += w[i];
    if (cum > u) return static_cast<int>(i);
  }
  return static_cast<int>(w.size()) - 1;
}

}  // namespace imitatio
