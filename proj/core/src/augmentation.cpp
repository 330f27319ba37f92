#include "mgstc/augmentation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <string>

#include "mgstc/error.hpp"

namespace mgstc {

double gap_lambda(const GapParameters& p) { return (1.0 - p.gamma) * p.alpha + p.gamma * p.beta; }

namespace {

void check_region(const GapParameters& p, bool need_xi) {
  if (!(p.alpha > 0.0 && p.alpha < p.beta)) throw DomainError("augmentation_gap: requires 0 < alpha < beta");
  if (!(p.gamma > 0.0 && p.gamma < 1.0)) throw DomainError("augmentation_gap: gamma must lie in (0, 1)");
  if (need_xi && !(p.xi > 0.0)) throw DomainError("augmentation_gap: xi must be positive");
  const double gap = p.beta - p.alpha;
  if (!(p.nu_inf >= gap && p.nu_inf <= 2.0 * gap)) {
    throw DomainError("augmentation_gap: nu_inf must lie in [beta - alpha, 2 (beta - alpha)]");
  }
}

}  // namespace

GapValues augmentation_gap(const GapParameters& p) {
  check_region(p, true);
  const double lambda = gap_lambda(p);
  const double gap = p.beta - p.alpha;
  GapValues v;
  v.plain = p.gamma * gap / lambda;
  v.augmented = 1.0 - (p.gamma * (gap - p.xi) + lambda) / (lambda + p.gamma * p.nu_inf);
  return v;
}

double max_admissible_xi(const GapParameters& p) {
  check_region(p, false);
  const double gap = p.beta - p.alpha;
  return 2.0 * gap - p.nu_inf + p.gamma * gap * p.nu_inf / gap_lambda(p);
}

GapParameters sample_gap_parameters(Rng& rng) {
  GapParameters p;
  p.alpha = rng.uniform(0.05, 5.0);
  p.beta = p.alpha + rng.uniform(0.05, 5.0);
  p.gamma = rng.uniform(0.01, 0.99);
  const double gap = p.beta - p.alpha;
  p.nu_inf = rng.uniform(gap, 2.0 * gap);
  const double cap = p.gamma * gap * gap / gap_lambda(p);
  // (0, cap]: uniform on [0, cap) mirrored.
  p.xi = cap - rng.uniform(0.0, cap);
  return p;
}

double explicit_gap_plain(const GapParameters& p, std::size_t dim, std::size_t groups, Rng& rng) {
  check_region(p, false);
  if (groups == 0 || groups >= dim) throw DomainError("explicit_gap_plain: need 0 < K < T");
  const auto t = static_cast<Eigen::Index>(dim);
  const auto k = static_cast<Eigen::Index>(groups);

  Eigen::MatrixXd raw(t, k);
  for (Eigen::Index j = 0; j < k; ++j)
    for (Eigen::Index i = 0; i < t; ++i) raw(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(raw);
  const Eigen::MatrixXd u = qr.householderQ() * Eigen::MatrixXd::Identity(t, k);

  Eigen::VectorXd nu(k);
  nu(0) = p.nu_inf;
  for (Eigen::Index j = 1; j < k; ++j) nu(j) = p.nu_inf - rng.uniform(0.0, p.nu_inf);

  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(t, t);
  const Eigen::MatrixXd ra = p.alpha * id + u * nu.asDiagonal() * u.transpose();
  const Eigen::MatrixXd rb = p.beta * id;
  const Eigen::MatrixXd r = (1.0 - p.gamma) * ra + p.gamma * rb;

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(r);
  const Eigen::MatrixXd r_inv_sqrt = es.operatorInverseSqrt();
  Eigen::MatrixXd g = p.gamma * r_inv_sqrt * (rb - ra) * r_inv_sqrt;
  g = 0.5 * (g + g.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> gs(g, Eigen::EigenvaluesOnly);
  return gs.eigenvalues().cwiseAbs().maxCoeff();
}

AppendixReport verify_appendix(std::size_t n_trials, std::uint64_t seed) {
  if (n_trials == 0) throw ConfigError("verify-appendix: n_trials must be at least 1");
  AppendixReport report;
  report.example = GapParameters{};
  report.example_values = augmentation_gap(report.example);

  Rng rng(seed);
  Rng wide(rng.fork());
  Rng spectral(rng.fork());
  for (std::size_t i = 0; i < n_trials; ++i) {
    const auto p = sample_gap_parameters(rng);
    const auto v = augmentation_gap(p);
    ++report.trials;
    if (!(v.augmented < v.plain)) ++report.violations;
  }

  for (std::size_t i = 0; i < n_trials; ++i) {
    auto p = sample_gap_parameters(wide);
    p.xi = 2.0 * (p.beta - p.alpha) - wide.uniform(0.0, 2.0 * (p.beta - p.alpha));
    const auto v = augmentation_gap(p);
    ++report.wide_xi_trials;
    if (!(v.augmented < v.plain)) ++report.wide_xi_violations;
  }

  const std::size_t checks = std::min<std::size_t>(n_trials, 200);
  for (std::size_t i = 0; i < checks; ++i) {
    const auto p = sample_gap_parameters(spectral);
    const std::size_t dim = 2 + spectral.index(31);                       // 2..32
    const std::size_t groups = 1 + spectral.index(std::min<std::size_t>(8, dim - 1));  // 1..min(8, T-1)
    const double err = std::abs(explicit_gap_plain(p, dim, groups, spectral) - augmentation_gap(p).plain);
    report.max_spectral_error = std::max(report.max_spectral_error, err);
    ++report.spectral_checks;
  }
  return report;
}

}  // namespace mgstc
