#include "tlpo/csv_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "tlpo/error.hpp"

namespace tlpo {

bool is_valid_utf8(std::string_view s) {
  std::size_t i = 0;
  while (i < s.size()) {
    auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > s.size()) return false;
    for (std::size_t k = 1; k < len; ++k) {
      auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // overlong encodings and surrogates
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000) ||
        cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
      return false;
    }
    i += len;
  }
  return true;
}

namespace {

struct Table {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_of_row;
};

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  std::string out(s.substr(b, e - b + 1));
  if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
  return out;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

Table read_table(std::istream& is, std::string name) {
  std::string content((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (!is_valid_utf8(content)) throw DataError(name + ": file is not valid UTF-8");
  if (content.size() >= 3 && content.compare(0, 3, "\xEF\xBB\xBF") == 0) content.erase(0, 3);
  Table t;
  t.name = std::move(name);
  std::istringstream lines(content);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw DataError(t.name + " line " + std::to_string(lineno) + ": expected " +
                      std::to_string(t.header.size()) + " fields, found " +
                      std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
    t.line_of_row.push_back(lineno);
  }
  if (t.header.empty()) throw DataError(t.name + ": empty file");
  return t;
}

std::optional<std::size_t> column(const Table& t, std::string_view name) {
  auto it = std::find(t.header.begin(), t.header.end(), name);
  if (it == t.header.end()) return std::nullopt;
  return static_cast<std::size_t>(it - t.header.begin());
}

std::size_t require(const Table& t, std::string_view name) {
  auto c = column(t, name);
  if (!c) throw DataError(t.name + ": missing required column '" + std::string(name) + "'");
  return *c;
}

/// Columns named prefix1, prefix2, ... in index order; must be contiguous from 1.
std::vector<std::size_t> numbered(const Table& t, const std::string& prefix) {
  std::vector<std::size_t> out;
  for (int k = 1;; ++k) {
    auto c = column(t, prefix + std::to_string(k));
    if (!c) break;
    out.push_back(*c);
  }
  return out;
}

double to_double(const Table& t, std::size_t row, std::size_t col) {
  const auto& s = t.rows[row][col];
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw DataError(t.name + " line " + std::to_string(t.line_of_row[row]) + ": column '" +
                    t.header[col] + "' is not a number: '" + s + "'");
  }
  return v;
}

int to_int(const Table& t, std::size_t row, std::size_t col) {
  const auto& s = t.rows[row][col];
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw DataError(t.name + " line " + std::to_string(t.line_of_row[row]) + ": column '" +
                    t.header[col] + "' is not an integer: '" + s + "'");
  }
  return v;
}

std::string fmt(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

}  // namespace

ObservedData read_observed_csv(std::istream& subjects, std::istream* tdc,
                               const IngestOptions& opts) {
  Table s = read_table(subjects, "subjects.csv");
  const auto c_id = require(s, "id");
  const auto c_arm = require(s, "arm");
  const auto c_u = require(s, "u");
  const auto c_delta = require(s, "delta");
  const auto c_cat = require(s, "cat");
  const auto c_ctime = column(s, "ctime");
  const auto xcols = numbered(s, "x");

  ObservedData data;
  std::unordered_map<std::string, std::size_t> index;
  int max_arm = 0;
  int max_cat = 0;
  for (std::size_t r = 0; r < s.rows.size(); ++r) {
    ObservedRecord rec;
    rec.id = s.rows[r][c_id];
    if (!index.emplace(rec.id, r).second) {
      throw DataError("subjects.csv line " + std::to_string(s.line_of_row[r]) +
                      ": duplicate id '" + rec.id + "'");
    }
    rec.arm = to_int(s, r, c_arm);
    rec.u = to_double(s, r, c_u);
    int d = to_int(s, r, c_delta);
    if (d != 0 && d != 1) {
      throw DataError("subjects.csv line " + std::to_string(s.line_of_row[r]) +
                      ": delta must be 0 or 1");
    }
    rec.delta = d == 1;
    if (!s.rows[r][c_cat].empty()) rec.cat = to_int(s, r, c_cat);
    if (c_ctime && !s.rows[r][*c_ctime].empty()) rec.ctime = to_double(s, r, *c_ctime);
    for (auto c : xcols) rec.x.push_back(to_double(s, r, c));
    max_arm = std::max(max_arm, rec.arm);
    if (rec.cat) max_cat = std::max(max_cat, *rec.cat);
    data.records.push_back(std::move(rec));
  }
  data.shape.arms = opts.arms.value_or(max_arm + 1);
  data.shape.categories = opts.categories.value_or(max_cat);
  data.shape.horizon = opts.horizon;

  if (tdc) {
    Table t = read_table(*tdc, "tdc.csv");
    const auto t_id = require(t, "id");
    const auto t_time = require(t, "time");
    const auto lcols = numbered(t, "l");
    std::map<std::size_t, std::vector<std::pair<double, std::vector<double>>>> rows;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      auto it = index.find(t.rows[r][t_id]);
      if (it == index.end()) {
        throw DataError("tdc.csv line " + std::to_string(t.line_of_row[r]) + ": id '" +
                        t.rows[r][t_id] + "' absent from subjects.csv");
      }
      std::vector<double> vals;
      for (auto c : lcols) vals.push_back(to_double(t, r, c));
      rows[it->second].emplace_back(to_double(t, r, t_time), std::move(vals));
    }
    for (auto& rec : data.records) rec.path = CovariatePath(lcols.size());
    for (auto& [i, bps] : rows) {
      std::stable_sort(bps.begin(), bps.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      for (const auto& [time, vals] : bps) {
        try {
          data.records[i].path.add(time, vals);
        } catch (const DataError& e) {
          throw DataError("tdc.csv: subject '" + data.records[i].id + "': " + e.what());
        }
      }
    }
  }
  return data;
}

ObservedData read_observed_csv(const std::filesystem::path& subjects,
                               const std::optional<std::filesystem::path>& tdc,
                               const IngestOptions& opts) {
  std::ifstream sf(subjects, std::ios::binary);
  if (!sf) throw DataError("cannot open " + subjects.string());
  if (!tdc) return read_observed_csv(sf, nullptr, opts);
  std::ifstream tf(*tdc, std::ios::binary);
  if (!tf) throw DataError("cannot open " + tdc->string());
  return read_observed_csv(sf, &tf, opts);
}

void write_subjects_csv(std::ostream& os, const ObservedData& data) {
  const std::size_t p = data.records.empty() ? 0 : data.records.front().x.size();
  const bool any_ctime = std::any_of(data.records.begin(), data.records.end(),
                                     [](const ObservedRecord& r) { return r.ctime.has_value(); });
  os << "id,arm,u,delta,cat";
  if (any_ctime) os << ",ctime";
  for (std::size_t k = 1; k <= p; ++k) os << ",x" << k;
  os << '\n';
  for (const auto& r : data.records) {
    os << r.id << ',' << r.arm << ',' << fmt(r.u) << ',' << (r.delta ? 1 : 0) << ',';
    if (r.cat) os << *r.cat;
    if (any_ctime) {
      os << ',';
      if (r.ctime) os << fmt(*r.ctime);
    }
    for (double v : r.x) os << ',' << fmt(v);
    os << '\n';
  }
}

void write_tdc_csv(std::ostream& os, const ObservedData& data) {
  const std::size_t q = data.records.empty() ? 0 : data.records.front().path.dim();
  os << "id,time";
  for (std::size_t k = 1; k <= q; ++k) os << ",l" << k;
  os << '\n';
  for (const auto& r : data.records) {
    for (std::size_t k = 0; k < r.path.size(); ++k) {
      os << r.id << ',' << fmt(r.path.time(k));
      for (double v : r.path.values(k)) os << ',' << fmt(v);
      os << '\n';
    }
  }
}

}  // namespace tlpo
