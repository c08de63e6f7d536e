#pragma once

#include <boost/math/tools/minima.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace gapflight {

/// Throttle-to-thrust map  T = l1 * V^l2 * (l3 * x^2 + (1 - l3) * x).
struct ThrustMapParams {
  double lambda1 = 1.0;
  double lambda2 = 0.0;
  double lambda3 = 0.0;
  double voltage_min = 0.0;
  double voltage_max = std::numeric_limits<double>::infinity();

  bool valid() const {
    return lambda1 > 0.0 && std::isfinite(lambda1) && std::isfinite(lambda2) &&
           lambda3 >= 0.0 && lambda3 <= 1.0 && voltage_min >= 0.0 &&
           voltage_max >= voltage_min;
  }
};

struct ThrustSample {
  double voltage = 0.0;
  double throttle = 0.0;
  double thrust = 0.0;
};

struct ThrustMapFit {
  ThrustMapParams params;
  double residual_rms = 0.0;
};

class ThrustRangeError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

namespace detail {

inline void check_voltage(double voltage, const ThrustMapParams& p) {
  if (!(voltage > 0.0) || voltage < p.voltage_min || voltage > p.voltage_max)
    throw std::domain_error("thrust map: voltage " + std::to_string(voltage) +
                            " outside valid range");
}

}  // namespace detail

inline double thrust_from_throttle(double throttle, double voltage,
                                   const ThrustMapParams& p) {
  if (!(throttle >= 0.0 && throttle <= 1.0))
    throw std::domain_error("thrust_from_throttle: throttle outside [0, 1]");
  detail::check_voltage(voltage, p);
  const double shape = p.lambda3 * throttle * throttle + (1.0 - p.lambda3) * throttle;
  return p.lambda1 * std::pow(voltage, p.lambda2) * shape;
}

/// Unique root in [0, 1] of the forward map. Written in the rationalized
/// form 2s / (b + sqrt(b^2 + 4 a s)) so that l3 -> 0 is well conditioned.
inline double throttle_from_thrust(double thrust, double voltage,
                                   const ThrustMapParams& p) {
  detail::check_voltage(voltage, p);
  const double scale = p.lambda1 * std::pow(voltage, p.lambda2);
  const double s = thrust / scale;
  if (!(s >= 0.0 && s <= 1.0))
    throw ThrustRangeError("throttle_from_thrust: thrust " + std::to_string(thrust) +
                           " not achievable at " + std::to_string(voltage) + " V");
  if (s == 0.0) return 0.0;
  const double a = p.lambda3;
  const double b = 1.0 - p.lambda3;
  const double x = 2.0 * s / (b + std::sqrt(b * b + 4.0 * a * s));
  return std::clamp(x, 0.0, 1.0);
}

/// Nonlinear least squares fit of (l1, l2, l3). The model is linear in
/// A = l1*l3 and B = l1*(1-l3) for a fixed exponent, so the exponent is
/// found first by a projected 1-D search and all three are then polished
/// by damped Gauss-Newton.
inline ThrustMapFit fit_thrust_map(const std::vector<ThrustSample>& samples) {
  if (samples.size() < 3)
    throw std::invalid_argument("fit_thrust_map: need at least 3 samples");
  for (const auto& s : samples) {
    if (!(s.voltage > 0.0) || !std::isfinite(s.throttle) || !std::isfinite(s.thrust))
      throw std::invalid_argument("fit_thrust_map: invalid sample");
  }

  std::vector<double> volts;
  for (const auto& s : samples) volts.push_back(s.voltage);
  std::sort(volts.begin(), volts.end());
  const double vspan = volts.back() - volts.front();
  if (!(vspan > 1e-9 * volts.back()))
    throw std::invalid_argument(
        "fit_thrust_map: all samples at one voltage; exponent l2 is unidentifiable");

  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd shape(n, 2);
  Eigen::VectorXd y(n), logv(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    shape(i, 0) = s.throttle * s.throttle;
    shape(i, 1) = s.throttle;
    y(i) = s.thrust;
    logv(i) = std::log(s.voltage);
  }
  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(shape);
    qr.setThreshold(1e-10);
    if (qr.rank() < 2)
      throw std::invalid_argument(
          "fit_thrust_map: rank-deficient throttle data (need two distinct non-zero throttles)");
  }

  auto project = [&](double l2, Eigen::Vector2d* ab) {
    Eigen::MatrixXd M(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) M.row(i) = std::exp(l2 * logv(i)) * shape.row(i);
    const Eigen::Vector2d sol = M.colPivHouseholderQr().solve(y);
    if (ab) *ab = sol;
    return (M * sol - y).squaredNorm();
  };

  // Coarse scan then Brent in the best bracket.
  constexpr double kLo = -4.0, kHi = 4.0;
  constexpr int kGrid = 161;
  int best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kGrid; ++i) {
    const double l2 = kLo + (kHi - kLo) * i / (kGrid - 1);
    const double c = project(l2, nullptr);
    if (c < best_cost) {
      best_cost = c;
      best = i;
    }
  }
  const double step = (kHi - kLo) / (kGrid - 1);
  const double lo = kLo + step * std::max(best - 1, 0);
  const double hi = kLo + step * std::min(best + 1, kGrid - 1);
  const auto [l2_star, cost_star] = boost::math::tools::brent_find_minima(
      [&](double l2) { return project(l2, nullptr); }, lo, hi,
      std::numeric_limits<double>::digits / 2);
  (void)cost_star;

  Eigen::Vector2d ab;
  project(l2_star, &ab);
  Eigen::Vector3d theta(ab(0), ab(1), l2_star);

  auto residual = [&](const Eigen::Vector3d& t) {
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i)
      r(i) = std::exp(t(2) * logv(i)) * (t(0) * shape(i, 0) + t(1) * shape(i, 1)) - y(i);
    return r;
  };

  double mu = 1e-6;
  Eigen::VectorXd r = residual(theta);
  for (int iter = 0; iter < 100; ++iter) {
    Eigen::MatrixXd J(n, 3);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double vp = std::exp(theta(2) * logv(i));
      J(i, 0) = vp * shape(i, 0);
      J(i, 1) = vp * shape(i, 1);
      J(i, 2) = logv(i) * vp * (theta(0) * shape(i, 0) + theta(1) * shape(i, 1));
    }
    if (iter == 0) {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(J);
      qr.setThreshold(1e-12);
      if (qr.rank() < 3)
        throw std::invalid_argument("fit_thrust_map: rank-deficient data");
    }
    const Eigen::Matrix3d JtJ = J.transpose() * J;
    const Eigen::Vector3d g = J.transpose() * r;
    Eigen::Matrix3d A = JtJ;
    A.diagonal() *= (1.0 + mu);
    const Eigen::Vector3d delta = -A.ldlt().solve(g);
    const Eigen::Vector3d cand = theta + delta;
    const Eigen::VectorXd rc = residual(cand);
    if (rc.squaredNorm() <= r.squaredNorm()) {
      theta = cand;
      r = rc;
      mu = std::max(mu * 0.1, 1e-15);
      if (delta.norm() <= 1e-15 * (1.0 + theta.norm())) break;
    } else {
      mu *= 10.0;
      if (mu > 1e12) break;
    }
  }

  const double l1 = theta(0) + theta(1);
  if (!(l1 > 0.0))
    throw std::invalid_argument("fit_thrust_map: fitted scale is not positive");

  ThrustMapFit fit;
  fit.params.lambda1 = l1;
  fit.params.lambda2 = theta(2);
  fit.params.lambda3 = std::clamp(theta(0) / l1, 0.0, 1.0);
  fit.params.voltage_min = volts.front();
  fit.params.voltage_max = volts.back();

  double ss = 0.0;
  for (const auto& s : samples) {
    const double pred = fit.params.lambda1 * std::pow(s.voltage, fit.params.lambda2) *
                        (fit.params.lambda3 * s.throttle * s.throttle +
                         (1.0 - fit.params.lambda3) * s.throttle);
    ss += (pred - s.thrust) * (pred - s.thrust);
  }
  fit.residual_rms = std::sqrt(ss / static_cast<double>(samples.size()));
  return fit;
}

/// Reads calibration samples from CSV with header voltage,throttle,thrust
/// (columns may appear in any order).
inline std::vector<ThrustSample> read_thrust_samples_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("thrust csv: empty input");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cell.erase(std::remove_if(cell.begin(), cell.end(), ::isspace), cell.end());
      header.push_back(cell);
    }
  }
  auto column = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw std::runtime_error("thrust csv: missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t cv = column("voltage"), ct = column("throttle"), cf = column("thrust");

  std::vector<ThrustSample> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    try {
      while (std::getline(ss, cell, ',')) vals.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw std::runtime_error("thrust csv: line " + std::to_string(lineno) + ": not a number");
    }
    if (vals.size() != header.size())
      throw std::runtime_error("thrust csv: line " + std::to_string(lineno) + ": expected " +
                               std::to_string(header.size()) + " columns");
    out.push_back({vals[cv], vals[ct], vals[cf]});
  }
  return out;
}

inline std::vector<ThrustSample> read_thrust_samples_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("thrust csv: cannot open " + path);
  return read_thrust_samples_csv(f);
}

}  // namespace gapflight
