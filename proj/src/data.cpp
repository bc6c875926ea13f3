#include "tlpo/data.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "tlpo/error.hpp"

namespace tlpo {

CovariatePath::CovariatePath(std::size_t dim) : dim_(dim) {}

void CovariatePath::add(double time, std::span<const double> values) {
  if (values.size() != dim_) {
    throw DataError("covariate path breakpoint has wrong dimension");
  }
  if (!times_.empty() && !(time > times_.back())) {
    throw DataError("covariate path breakpoints must be strictly ascending");
  }
  times_.push_back(time);
  values_.insert(values_.end(), values.begin(), values.end());
}

std::span<const double> CovariatePath::values(std::size_t k) const {
  return {values_.data() + k * dim_, dim_};
}

std::span<const double> CovariatePath::at(double u) const {
  if (dim_ == 0 || times_.empty()) return {};
  auto it = std::upper_bound(times_.begin(), times_.end(), u);
  std::size_t k = it == times_.begin() ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
  return values(k);
}

CovariatePath CovariatePath::truncated(double u) const {
  CovariatePath out(dim_);
  for (std::size_t k = 0; k < times_.size() && times_[k] <= u; ++k) {
    out.add(times_[k], values(k));
  }
  return out;
}

std::optional<double> ObservedRecord::censoring_time() const {
  if (!delta) return u;
  return ctime;
}

namespace {

void check_common(std::vector<Violation>& out, const DatasetShape& shape, std::size_t i,
                  const std::vector<double>& x, std::size_t xdim, int arm) {
  if (x.size() != xdim) out.push_back({i, "covariate dimension differs from first record"});
  for (double v : x) {
    if (!std::isfinite(v)) {
      out.push_back({i, "non-finite baseline covariate"});
      break;
    }
  }
  if (arm < 0 || arm >= shape.arms) out.push_back({i, "arm out of range"});
}

void check_shape(std::vector<Violation>& out, const DatasetShape& shape) {
  if (shape.categories < 2) out.push_back({kDatasetLevel, "category count must be at least 2"});
  if (shape.arms < 2) out.push_back({kDatasetLevel, "arm count must be at least 2"});
  if (!(shape.horizon > 0.0)) out.push_back({kDatasetLevel, "horizon must be positive"});
}

template <class Records>
void check_arm_coverage(std::vector<Violation>& out, const DatasetShape& shape,
                        const Records& records) {
  std::vector<int> count(std::max(shape.arms, 0), 0);
  for (const auto& r : records) {
    if (r.arm >= 0 && r.arm < shape.arms) ++count[r.arm];
  }
  for (int a = 0; a < shape.arms; ++a) {
    if (count[a] == 0) out.push_back({kDatasetLevel, "no records in arm " + std::to_string(a)});
  }
}

}  // namespace

std::vector<Violation> validate(const FullData& data) {
  std::vector<Violation> out;
  check_shape(out, data.shape);
  const std::size_t xdim = data.records.empty() ? 0 : data.records.front().x.size();
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const auto& r = data.records[i];
    check_common(out, data.shape, i, r.x, xdim, r.arm);
    if (r.cat < 1 || r.cat > data.shape.categories) out.push_back({i, "cat out of range"});
    if (!(r.t >= 0.0) || !std::isfinite(r.t)) out.push_back({i, "negative or non-finite t"});
    if (r.cat >= 1 && r.cat < data.shape.categories && r.t != data.shape.horizon) {
      out.push_back({i, "non-death outcome time differs from horizon"});
    }
  }
  check_arm_coverage(out, data.shape, data.records);
  return out;
}

std::vector<Violation> validate(const ObservedData& data) {
  std::vector<Violation> out;
  check_shape(out, data.shape);
  const std::size_t xdim = data.records.empty() ? 0 : data.records.front().x.size();
  const std::size_t ldim = data.records.empty() ? 0 : data.records.front().path.dim();
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const auto& r = data.records[i];
    check_common(out, data.shape, i, r.x, xdim, r.arm);
    if (!(r.u >= 0.0) || !std::isfinite(r.u)) out.push_back({i, "negative or non-finite u"});
    if (r.delta != r.cat.has_value()) out.push_back({i, "cat present iff delta = 1 violated"});
    if (r.cat) {
      if (*r.cat < 1 || *r.cat > data.shape.categories) {
        out.push_back({i, "cat out of range"});
      } else if (*r.cat < data.shape.categories && r.u != data.shape.horizon) {
        out.push_back({i, "non-death outcome determined before horizon"});
      }
    }
    if (r.ctime && r.delta && *r.ctime < r.u) {
      out.push_back({i, "censoring time precedes observed outcome"});
    }
    if (r.path.dim() != ldim) out.push_back({i, "time-dependent covariate dimension differs"});
    if (r.path.dim() > 0) {
      if (r.path.empty() || r.path.time(0) != 0.0) {
        out.push_back({i, "covariate path must start at time 0"});
      } else if (r.path.time(r.path.size() - 1) > r.u) {
        out.push_back({i, "covariate path extends past u"});
      }
      for (std::size_t k = 0; k < r.path.size(); ++k) {
        auto v = r.path.values(k);
        if (std::any_of(v.begin(), v.end(), [](double z) { return !std::isfinite(z); })) {
          out.push_back({i, "non-finite time-dependent covariate"});
          break;
        }
      }
    }
  }
  check_arm_coverage(out, data.shape, data.records);
  return out;
}

FullData as_full(const ObservedData& data) {
  FullData out;
  out.shape = data.shape;
  out.records.reserve(data.records.size());
  for (const auto& r : data.records) {
    if (!r.delta) throw DataError("dataset is censored");
    out.records.push_back({r.id, r.x, r.arm, *r.cat, r.u});
  }
  return out;
}

ObservedData as_observed(const FullData& data, std::optional<double> ctime) {
  ObservedData out;
  out.shape = data.shape;
  out.records.reserve(data.records.size());
  for (const auto& r : data.records) {
    ObservedRecord o;
    o.id = r.id;
    o.x = r.x;
    o.arm = r.arm;
    o.u = r.t;
    o.delta = true;
    o.cat = r.cat;
    o.ctime = ctime;
    out.records.push_back(std::move(o));
  }
  return out;
}

ObservedData subset_complete(const ObservedData& data) {
  ObservedData out;
  out.shape = data.shape;
  for (const auto& r : data.records) {
    if (r.delta) out.records.push_back(r);
  }
  return out;
}

ObservedData subset_horizon(const ObservedData& data) {
  ObservedData out;
  out.shape = data.shape;
  for (const auto& r : data.records) {
    auto c = r.censoring_time();
    if (!c) throw DataError("censoring time unavailable");
    if (*c >= data.shape.horizon && r.delta) out.records.push_back(r);
  }
  return out;
}

double censored_fraction(const ObservedData& data) {
  if (data.records.empty()) return 0.0;
  auto n = std::count_if(data.records.begin(), data.records.end(),
                         [](const ObservedRecord& r) { return !r.delta; });
  return static_cast<double>(n) / static_cast<double>(data.records.size());
}

}  // namespace tlpo
