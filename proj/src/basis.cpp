#include "tlpo/basis.hpp"

#include <charconv>

#include "tlpo/error.hpp"

namespace tlpo {

void AugmentationBasis::add_baseline(std::string name, BaselineFn f) {
  baseline_names.push_back(std::move(name));
  baseline.push_back(std::move(f));
}

void AugmentationBasis::add_timedep(std::string name, TimeDepFn h) {
  timedep_names.push_back(std::move(name));
  timedep.push_back(std::move(h));
}

namespace {

struct Column {
  char kind;  // 'x' or 'l'
  std::size_t index;
};

Column parse_column(std::string_view name, std::size_t x_dim, std::size_t l_dim) {
  if (name.size() < 2 || (name[0] != 'x' && name[0] != 'l')) {
    throw ConfigError("basis: unknown term '" + std::string(name) + "'");
  }
  std::size_t k = 0;
  auto [p, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), k);
  const std::size_t dim = name[0] == 'x' ? x_dim : l_dim;
  if (ec != std::errc() || p != name.data() + name.size() || k < 1 || k > dim) {
    throw ConfigError("basis: term '" + std::string(name) + "' does not name an available column");
  }
  return {name[0], k - 1};
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  while (true) {
    auto pos = s.find(sep);
    out.push_back(s.substr(0, pos));
    if (pos == std::string_view::npos) break;
    s.remove_prefix(pos + 1);
  }
  return out;
}

std::string_view strip(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  return s;
}

void add_x_baseline(AugmentationBasis& b, std::size_t k) {
  b.add_baseline("x" + std::to_string(k + 1), [k](std::span<const double> x) { return x[k]; });
}

void add_timedep_column(AugmentationBasis& b, Column c) {
  if (c.kind == 'x') {
    b.add_timedep("x" + std::to_string(c.index + 1),
                  [k = c.index](double, std::span<const double> x, std::span<const double>) {
                    return x[k];
                  });
  } else {
    b.add_timedep("l" + std::to_string(c.index + 1),
                  [k = c.index](double, std::span<const double>, std::span<const double> l) {
                    return l[k];
                  });
  }
}

}  // namespace

AugmentationBasis default_basis(std::size_t x_dim, std::size_t l_dim) {
  AugmentationBasis b;
  for (std::size_t k = 0; k < x_dim; ++k) add_x_baseline(b, k);
  for (std::size_t k = 0; k < x_dim; ++k) add_timedep_column(b, {'x', k});
  for (std::size_t k = 0; k < l_dim; ++k) add_timedep_column(b, {'l', k});
  return b;
}

AugmentationBasis parse_basis(std::string_view spec, std::size_t x_dim, std::size_t l_dim) {
  spec = strip(spec);
  if (spec.empty() || spec == "default") return default_basis(x_dim, l_dim);
  AugmentationBasis b;
  if (spec == "none") return b;
  for (auto clause : split(spec, ';')) {
    clause = strip(clause);
    if (clause.empty()) continue;
    auto eq = clause.find('=');
    if (eq == std::string_view::npos) throw ConfigError("basis: clause '" + std::string(clause) + "' lacks '='");
    auto key = strip(clause.substr(0, eq));
    auto list = strip(clause.substr(eq + 1));
    if (key != "f" && key != "h") throw ConfigError("basis: clause key must be f or h");
    if (list.empty()) continue;
    for (auto term : split(list, ',')) {
      Column c = parse_column(strip(term), x_dim, l_dim);
      if (key == "f") {
        if (c.kind != 'x') throw ConfigError("basis: baseline terms may only use x columns");
        add_x_baseline(b, c.index);
      } else {
        add_timedep_column(b, c);
      }
    }
  }
  return b;
}

}  // namespace tlpo
