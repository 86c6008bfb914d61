#include <algorithm>
#include <cmath>
#include <numeric>

#include "procscore/error.hpp"
#include "procscore/simgen.hpp"

namespace procscore::simgen {

namespace {

using Real = long double;

void check_distribution(const std::vector<double>& p, const std::string& what) {
  if (p.empty()) throw ValidationError(what + " is empty");
  Real sum = 0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ValidationError(what + " has a negative or non-finite mass");
    sum += v;
  }
  if (std::fabs(static_cast<double>(sum - 1.0L)) > 1e-12) throw ValidationError(what + " does not sum to one");
}

bool strictly_monotone(const std::vector<Real>& v, int& direction) {
  if (v.size() < 2) return false;
  const bool inc = std::adjacent_find(v.begin(), v.end(), std::greater_equal<Real>()) == v.end();
  const bool dec = std::adjacent_find(v.begin(), v.end(), std::less_equal<Real>()) == v.end();
  direction = inc ? 1 : (dec ? -1 : 0);
  return inc || dec;
}

std::vector<double> normalized(std::vector<double> v) {
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  for (auto& x : v) x /= s;
  // Push the rounding residue into the largest entry so the sum is exact
  // to within an ulp.
  const double residue = 1.0 - std::accumulate(v.begin(), v.end(), 0.0);
  *std::max_element(v.begin(), v.end()) += residue;
  return v;
}

}  // namespace

std::vector<long double> ToyModel::m() const {
  std::vector<Real> out(n_theta(), 0);
  for (std::size_t t = 0; t < n_theta(); ++t) {
    for (std::size_t k = 0; k < psi.size(); ++k) out[t] += static_cast<Real>(y2[t][0][k]) * psi[k];
  }
  return out;
}

void ToyModel::validate() const {
  const std::size_t nt = n_theta(), nx = n_x();
  if (nt < 1 || nt > 5) throw ValidationError("toy model: theta support must have 1 to 5 points");
  if (nx < 1 || nx > 20) throw ValidationError("toy model: X support must have 1 to 20 points");
  if (prior.size() != nt || p_x.size() != nt || y2.size() != nt) {
    throw ValidationError("toy model: theta-indexed tables have inconsistent sizes");
  }
  for (std::size_t t = 1; t < nt; ++t) {
    if (!(theta[t] > theta[t - 1])) throw ValidationError("toy model: theta support must increase");
  }
  check_distribution(prior, "prior");
  for (std::size_t t = 0; t < nt; ++t) {
    if (p_x[t].size() != nx) throw ValidationError("toy model: P(X|theta) rows differ in length");
    check_distribution(p_x[t], "P(X|theta)");
  }
  if (y1_kernel.size() != nx) throw ValidationError("toy model: Y1 kernel needs one row per x");
  for (const auto& row : y1_kernel) {
    if (row.size() != phi.size()) throw ValidationError("toy model: Y1 kernel width differs from phi");
    check_distribution(row, "P(Y1|X)");
  }
  for (std::size_t t = 0; t < nt; ++t) {
    if (y2[t].size() != nx) throw ValidationError("toy model: Y2 table needs one row per x");
    for (std::size_t x = 0; x < nx; ++x) {
      if (y2[t][x].size() != psi.size()) throw ValidationError("toy model: Y2 width differs from psi");
      check_distribution(y2[t][x], "P(Y2|theta,X)");
      for (std::size_t k = 0; k < psi.size(); ++k) {
        if (std::fabs(y2[t][x][k] - y2[t][0][k]) > 1e-12) {
          throw ValidationError("toy model: Y2 depends on X given theta (conditional independence violated)");
        }
      }
    }
  }
  if (exponential_family()) {
    if (eta.size() != nt || stat.size() != nx || base.size() != nx) {
      throw ValidationError("toy model: exponential-family tables have inconsistent sizes");
    }
    for (std::size_t t = 0; t < nt; ++t) {
      Real z = 0;
      for (std::size_t x = 0; x < nx; ++x) z += base[x] * std::exp(static_cast<Real>(eta[t]) * stat[x]);
      for (std::size_t x = 0; x < nx; ++x) {
        const Real expected = base[x] * std::exp(static_cast<Real>(eta[t]) * stat[x]) / z;
        if (std::fabs(static_cast<double>(expected - p_x[t][x])) > 1e-10 * (1.0 + static_cast<double>(expected))) {
          throw ValidationError("toy model: P(X|theta) is not of the stated exponential-family form");
        }
      }
    }
  }
}

RaoBlackwellReport exact_rao_blackwell_check(const ToyModel& toy) {
  toy.validate();
  const std::size_t nt = toy.n_theta(), nx = toy.n_x(), ny1 = toy.phi.size();
  const auto m = toy.m();

  std::vector<std::vector<Real>> joint(nt, std::vector<Real>(nx));
  std::vector<Real> px(nx, 0);
  for (std::size_t t = 0; t < nt; ++t) {
    for (std::size_t x = 0; x < nx; ++x) {
      joint[t][x] = static_cast<Real>(toy.prior[t]) * toy.p_x[t][x];
      px[x] += joint[t][x];
    }
  }
  std::vector<Real> phi_given_x(nx, 0);
  for (std::size_t x = 0; x < nx; ++x) {
    for (std::size_t k = 0; k < ny1; ++k) phi_given_x[x] += static_cast<Real>(toy.y1_kernel[x][k]) * toy.phi[k];
  }

  RaoBlackwellReport rep;
  rep.t_x.assign(nx, 0);
  for (std::size_t x = 0; x < nx; ++x) {
    if (px[x] == 0) continue;
    for (std::size_t t = 0; t < nt; ++t) rep.t_x[x] += joint[t][x] * m[t];
    rep.t_x[x] /= px[x];
  }

  // Level sets of T_X. Values equal up to rounding of the enumeration are
  // one level.
  std::vector<std::size_t> order(nx);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return rep.t_x[a] < rep.t_x[b]; });
  std::vector<std::size_t> group(nx, 0);
  std::size_t g = 0;
  for (std::size_t k = 0; k < nx; ++k) {
    if (k > 0) {
      const Real prev = rep.t_x[order[k - 1]], cur = rep.t_x[order[k]];
      if (cur - prev > 1e-13L * (1 + std::fabs(cur))) ++g;
    }
    group[order[k]] = g;
  }
  rep.n_groups = nx == 0 ? 0 : g + 1;

  std::vector<Real> pg(rep.n_groups, 0), num(rep.n_groups, 0);
  for (std::size_t x = 0; x < nx; ++x) {
    pg[group[x]] += px[x];
    num[group[x]] += px[x] * phi_given_x[x];
  }
  rep.theta_x.assign(nx, 0);
  for (std::size_t x = 0; x < nx; ++x) {
    if (pg[group[x]] > 0) rep.theta_x[x] = num[group[x]] / pg[group[x]];
  }

  for (std::size_t t = 0; t < nt; ++t) {
    const Real th = toy.theta[t];
    for (std::size_t x = 0; x < nx; ++x) {
      if (joint[t][x] == 0) continue;
      Real sq = 0;
      for (std::size_t k = 0; k < ny1; ++k) {
        const Real e = toy.phi[k] - th;
        sq += static_cast<Real>(toy.y1_kernel[x][k]) * e * e;
      }
      rep.mse_y += joint[t][x] * sq;
      const Real ex = rep.theta_x[x] - th;
      rep.mse_x += joint[t][x] * ex * ex;
    }
  }

  // Conditional variance of phi given (theta, level), two passes.
  for (std::size_t t = 0; t < nt; ++t) {
    std::vector<Real> mass(rep.n_groups, 0), mean(rep.n_groups, 0);
    for (std::size_t x = 0; x < nx; ++x) {
      mass[group[x]] += joint[t][x];
      mean[group[x]] += joint[t][x] * phi_given_x[x];
    }
    for (std::size_t k = 0; k < rep.n_groups; ++k) {
      if (mass[k] > 0) mean[k] /= mass[k];
    }
    for (std::size_t x = 0; x < nx; ++x) {
      if (joint[t][x] == 0) continue;
      Real var = 0;
      for (std::size_t k = 0; k < ny1; ++k) {
        const Real e = toy.phi[k] - mean[group[x]];
        var += static_cast<Real>(toy.y1_kernel[x][k]) * e * e;
      }
      rep.gap += joint[t][x] * var;
    }
  }
  rep.difference = rep.mse_y - rep.mse_x;
  rep.identity_error = std::fabs(rep.difference - rep.gap);
  return rep;
}

MonotonicityReport sufficiency_monotonicity_check(const ToyModel& toy) {
  toy.validate();
  if (!toy.exponential_family()) {
    throw ValidationError("sufficiency check needs X | theta in exponential-family form");
  }
  int dir_eta = 0, dir_m = 0;
  const std::vector<Real> eta(toy.eta.begin(), toy.eta.end());
  if (!strictly_monotone(eta, dir_eta)) throw ValidationError("natural parameter eta is not strictly monotone");
  const auto m = toy.m();
  if (!strictly_monotone(m, dir_m)) throw ValidationError("m(theta) = E[psi | theta] is not strictly monotone");

  MonotonicityReport rep;
  rep.t = toy.stat;
  std::sort(rep.t.begin(), rep.t.end());
  rep.t.erase(std::unique(rep.t.begin(), rep.t.end()), rep.t.end());
  for (double t : rep.t) {
    Real num = 0, den = 0;
    for (std::size_t th = 0; th < toy.n_theta(); ++th) {
      for (std::size_t x = 0; x < toy.n_x(); ++x) {
        if (toy.stat[x] != t) continue;
        const Real w = static_cast<Real>(toy.prior[th]) * toy.p_x[th][x];
        num += w * m[th];
        den += w;
      }
    }
    rep.G.push_back(num / den);
  }
  if (rep.G.size() < 2) throw ValidationError("T(X) takes a single value");
  rep.strictly_monotone = strictly_monotone(rep.G, rep.direction);
  return rep;
}

long double increasing_covariance_check(const std::vector<double>& support, const std::vector<double>& masses,
                         const std::vector<double>& f, const std::vector<double>& g) {
  const std::size_t n = support.size();
  if (masses.size() != n || f.size() != n || g.size() != n) throw ValidationError("increasing_covariance_check: size mismatch");
  check_distribution(masses, "P(X)");
  std::size_t positive = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (masses[k] > 0) ++positive;
    if (k > 0) {
      if (!(support[k] > support[k - 1])) throw ValidationError("increasing_covariance_check: support must increase");
      if (!(f[k] > f[k - 1]) || !(g[k] > g[k - 1])) {
        throw ValidationError("increasing_covariance_check: f and g must be strictly increasing");
      }
    }
  }
  if (positive < 2) throw ValidationError("increasing_covariance_check: X is constant");
  Real ef = 0, eg = 0;
  for (std::size_t k = 0; k < n; ++k) {
    ef += static_cast<Real>(masses[k]) * f[k];
    eg += static_cast<Real>(masses[k]) * g[k];
  }
  Real cov = 0;
  for (std::size_t k = 0; k < n; ++k) cov += static_cast<Real>(masses[k]) * (f[k] - ef) * (g[k] - eg);
  return cov;
}

ToyModel random_toy_model(Rng& rng, const ToyOptions& o) {
  if (o.n_theta < 2 || o.n_theta > 5 || o.n_x < o.n_stat || o.n_x > 20 || o.n_stat < 2 || o.n_y1 < 1 ||
      o.n_y2 < 2) {
    throw ValidationError("random_toy_model: invalid sizes");
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ToyModel toy;
  double th = -2.0 + u(rng);
  for (int t = 0; t < o.n_theta; ++t) {
    toy.theta.push_back(th);
    th += 0.3 + u(rng);
  }
  std::vector<double> raw;
  for (int t = 0; t < o.n_theta; ++t) raw.push_back(0.2 + u(rng));
  toy.prior = normalized(raw);

  const double scale = 0.3 + 0.7 * u(rng);
  for (double v : toy.theta) toy.eta.push_back(scale * v);
  for (int x = 0; x < o.n_x; ++x) {
    toy.stat.push_back(x < o.n_stat ? x : static_cast<int>(u(rng) * o.n_stat));
    toy.base.push_back(0.2 + u(rng));
  }
  for (int t = 0; t < o.n_theta; ++t) {
    std::vector<double> row;
    for (int x = 0; x < o.n_x; ++x) row.push_back(toy.base[x] * std::exp(toy.eta[t] * toy.stat[x]));
    toy.p_x.push_back(normalized(row));
  }

  for (int k = 0; k < o.n_y1; ++k) toy.phi.push_back(-2.0 + 4.0 * u(rng));
  for (int x = 0; x < o.n_x; ++x) {
    std::vector<double> row;
    for (int k = 0; k < o.n_y1; ++k) row.push_back(0.05 + u(rng));
    toy.y1_kernel.push_back(normalized(row));
  }

  // Y2 | theta is graded-response-like, so E[psi | theta] is monotone.
  double v = -1.5;
  for (int k = 0; k < o.n_y2; ++k) {
    toy.psi.push_back(o.decreasing_m ? -v : v);
    v += 0.2 + u(rng);
  }
  const double a = 0.8 + u(rng);
  std::vector<double> d;
  for (int k = 1; k < o.n_y2; ++k) d.push_back(1.5 - 3.0 * (k - 0.5) / (o.n_y2 - 1) + 0.2 * (u(rng) - 0.5));
  for (int t = 0; t < o.n_theta; ++t) {
    std::vector<double> cum{1.0};
    for (double dk : d) cum.push_back(1.0 / (1.0 + std::exp(-(a * toy.theta[t] + dk))));
    cum.push_back(0.0);
    std::vector<double> p;
    for (int k = 0; k < o.n_y2; ++k) p.push_back(cum[k] - cum[k + 1]);
    toy.y2.emplace_back(o.n_x, normalized(p));
  }
  return toy;
}

}  // namespace procscore::simgen
