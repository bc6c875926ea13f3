#pragma once

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tlpo {

/// f_m(X); the constant f_0 is implicit and never listed.
using BaselineFn = std::function<double(std::span<const double> x)>;
/// h_l(u, X, L(u)).
using TimeDepFn = std::function<double(double u, std::span<const double> x, std::span<const double> l)>;

/// Basis spanning the baseline (psi) and time-dependent (phi) augmentation terms.
struct AugmentationBasis {
  std::vector<BaselineFn> baseline;
  std::vector<std::string> baseline_names;
  std::vector<TimeDepFn> timedep;
  std::vector<std::string> timedep_names;

  void add_baseline(std::string name, BaselineFn f);
  void add_timedep(std::string name, TimeDepFn h);
};

/// f = each component of X; h = each component of X and of L(u).
AugmentationBasis default_basis(std::size_t x_dim, std::size_t l_dim);

/// Parses "default", "none", or "f=x1,x2;h=x1,l1,l2" (either clause may be
/// omitted or empty). Names refer to 1-based columns of X (xK) and L (lK).
/// Throws ConfigError on unknown names or malformed specs.
AugmentationBasis parse_basis(std::string_view spec, std::size_t x_dim, std::size_t l_dim);

}  // namespace tlpo
