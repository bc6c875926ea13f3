#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tlpo {

/// Right-continuous step function L(u) of time-dependent covariates.
///
/// Breakpoint k holds the value of L on [times[k], times[k+1]). The first
/// breakpoint sits at time 0. A path with dimension 0 carries no covariates.
class CovariatePath {
 public:
  CovariatePath() = default;
  explicit CovariatePath(std::size_t dim);

  /// Appends a breakpoint; times must be strictly ascending.
  void add(double time, std::span<const double> values);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return times_.size(); }
  bool empty() const noexcept { return times_.empty(); }
  double time(std::size_t k) const { return times_[k]; }
  std::span<const double> values(std::size_t k) const;

  /// Value at the latest breakpoint <= u. Empty span when dim() == 0.
  std::span<const double> at(double u) const;

  /// Copy keeping only breakpoints with time <= u.
  CovariatePath truncated(double u) const;

  bool operator==(const CovariatePath&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> times_;
  std::vector<double> values_;
};

/// One subject's uncensored data (X, A, Cat, T).
struct FullRecord {
  std::string id;
  std::vector<double> x;
  int arm = 0;
  int cat = 1;
  double t = 0.0;
};

/// One subject's interim data (X, A, U, Delta, Delta*Cat, L-bar(U)).
struct ObservedRecord {
  std::string id;
  std::vector<double> x;
  int arm = 0;
  double u = 0.0;
  bool delta = false;
  std::optional<int> cat;       // present iff delta
  std::optional<double> ctime;  // censoring time C; for delta == 0 it equals u
  CovariatePath path;

  /// C when it is known: u for censored records, ctime otherwise.
  std::optional<double> censoring_time() const;
};

struct DatasetShape {
  int categories = 0;    // c
  int arms = 2;          // K
  double horizon = 90.;  // follow-up horizon in days
};

struct FullData {
  DatasetShape shape;
  std::vector<FullRecord> records;
  std::size_t size() const noexcept { return records.size(); }
};

struct ObservedData {
  DatasetShape shape;
  std::vector<ObservedRecord> records;
  std::size_t size() const noexcept { return records.size(); }
};

/// Sentinel record index for dataset-level findings.
inline constexpr std::size_t kDatasetLevel = static_cast<std::size_t>(-1);

struct Violation {
  std::size_t record = kDatasetLevel;
  std::string rule;
};

std::vector<Violation> validate(const FullData& data);
std::vector<Violation> validate(const ObservedData& data);

/// Drops the censoring fields. Throws DataError("dataset is censored") if any delta == 0.
FullData as_full(const ObservedData& data);

/// Every subject observed at its outcome time: delta = 1, u = t, ctime = C if given.
ObservedData as_observed(const FullData& data, std::optional<double> ctime = std::nullopt);

/// Records with delta = 1.
ObservedData subset_complete(const ObservedData& data);

/// Records whose censoring time is at least the horizon. Throws DataError
/// ("censoring time unavailable") when some record lacks C.
ObservedData subset_horizon(const ObservedData& data);

/// Fraction of records with delta = 0.
double censored_fraction(const ObservedData& data);

}  // namespace tlpo
