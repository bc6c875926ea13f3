#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "tlpo/data.hpp"

namespace tlpo {

/// Dataset-level settings that the CSV files do not carry.
/// Unset categories/arms are inferred from the largest cat/arm present.
struct IngestOptions {
  std::optional<int> categories;
  std::optional<int> arms;
  double horizon = 90.0;
};

/// Reads subjects.csv (id, arm, u, delta, cat, [ctime], x1..xp) and, when given,
/// tdc.csv (id, time, l1..lq). Throws DataError with file/line context.
ObservedData read_observed_csv(std::istream& subjects, std::istream* tdc,
                               const IngestOptions& opts = {});
ObservedData read_observed_csv(const std::filesystem::path& subjects,
                               const std::optional<std::filesystem::path>& tdc,
                               const IngestOptions& opts = {});

/// Writes the subjects table (ctime column always emitted when any record has C).
void write_subjects_csv(std::ostream& os, const ObservedData& data);
/// Writes the time-dependent covariate table; nothing but a header when dim == 0.
void write_tdc_csv(std::ostream& os, const ObservedData& data);

/// True when the byte sequence is well-formed UTF-8.
bool is_valid_utf8(std::string_view bytes);

}  // namespace tlpo
