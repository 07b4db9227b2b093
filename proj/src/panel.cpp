#include "codid/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "codid/error.hpp"

namespace codid {

namespace {

constexpr double kWeightTolerance = 1e-9;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(trim(field));
      field.clear();
    } else {
      field.push_back(c);
    }
  }
  fields.push_back(trim(field));
  return fields;
}

std::string where(std::size_t line) { return "line " + std::to_string(line); }

double parse_real(const std::string& text, std::size_t line, std::string_view column) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  if (!text.empty() && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value))
    throw Error(Errc::ParseError,
                where(line) + ": column '" + std::string(column) + "' is not a finite number: '" +
                    text + "'");
  return value;
}

int parse_int(const std::string& text, std::size_t line, std::string_view column) {
  int value = 0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  if (!text.empty() && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw Error(Errc::ParseError, where(line) + ": column '" + std::string(column) +
                                      "' is not an integer: '" + text + "'");
  return value;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoError, "cannot open '" + path.string() + "'");
  return in;
}

struct RowKey {
  std::string group;
  int time;
  std::string stratum;
  std::string category;
  auto operator<=>(const RowKey&) const = default;
};

// Distinct values seen in a table, in canonical order.
struct TableIndex {
  std::set<std::string> groups;
  std::set<int> periods;
  std::set<std::string> categories;
  std::set<std::string> strata;
};

TableIndex index_table(const PanelTable& table) {
  TableIndex idx;
  for (const auto& row : table.rows) {
    idx.groups.insert(row.group);
    idx.periods.insert(row.time);
    idx.categories.insert(row.category);
    idx.strata.insert(row.stratum);
  }
  return idx;
}

}  // namespace

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string to_string(const CellAddress& cell) {
  std::string s = "(group=" + cell.group + ", period=" + std::to_string(cell.period);
  if (!cell.stratum.empty()) s += ", stratum=" + cell.stratum;
  return s + ")";
}

std::string_view to_string(WeightSource source) {
  switch (source) {
    case WeightSource::none: return "none";
    case WeightSource::explicit_column: return "explicit";
    case WeightSource::treated_period0: return "treated_period0";
  }
  return "none";
}

// --- PanelDataset ----------------------------------------------------------

PanelDataset::PanelDataset(Labels labels, std::vector<int> periods, std::vector<GroupInfo> groups,
                           std::vector<Stratum> strata, std::map<CellAddress, QuantityVector> cells,
                           std::vector<SmoothingRecord> smoothing, WeightSource weight_source)
    : labels_(std::move(labels)),
      periods_(std::move(periods)),
      groups_(std::move(groups)),
      strata_(std::move(strata)),
      cells_(std::move(cells)),
      smoothing_(std::move(smoothing)),
      weight_source_(weight_source) {
  if (strata_.empty()) strata_.push_back(Stratum{"", 1.0});
  std::sort(periods_.begin(), periods_.end());
  for (const auto& g : groups_)
    for (int t : periods_)
      for (const auto& s : strata_) {
        auto it = cells_.find(CellAddress{g.id, t, s.name});
        if (it == cells_.end())
          throw Error(Errc::UnbalancedPanel, "missing cell " + to_string(CellAddress{g.id, t, s.name}));
        require_same_labels(it->second.labels(), labels_);
      }
  const std::size_t expected = groups_.size() * periods_.size() * strata_.size();
  if (cells_.size() != expected)
    throw Error(Errc::UnbalancedPanel, "cells outside the group × period × stratum grid");
}

bool PanelDataset::stratified() const noexcept {
  return strata_.size() > 1 || !strata_.front().name.empty();
}

const GroupInfo& PanelDataset::group(std::string_view id) const {
  for (const auto& g : groups_)
    if (g.id == id) return g;
  throw Error(Errc::UnknownGroup, "no group '" + std::string(id) + "'");
}

bool PanelDataset::has_period(int period) const noexcept {
  return std::binary_search(periods_.begin(), periods_.end(), period);
}

const QuantityVector& PanelDataset::cell(const CellAddress& address) const {
  auto it = cells_.find(address);
  if (it == cells_.end()) throw Error(Errc::UnknownCell, "no cell " + to_string(address));
  return it->second;
}

const QuantityVector& PanelDataset::cell(std::string_view group, int period,
                                         std::string_view stratum) const {
  std::string name(stratum);
  if (name.empty() && strata_.size() == 1) name = strata_.front().name;
  return cell(CellAddress{std::string(group), period, name});
}

std::vector<const GroupInfo*> PanelDataset::treated_groups() const {
  std::vector<const GroupInfo*> out;
  for (const auto& g : groups_)
    if (g.first_treated) out.push_back(&g);
  return out;
}

std::vector<const GroupInfo*> PanelDataset::never_treated_groups() const {
  std::vector<const GroupInfo*> out;
  for (const auto& g : groups_)
    if (!g.first_treated) out.push_back(&g);
  return out;
}

PanelDataset PanelDataset::with_treated_group(std::string_view id) const {
  group(id);
  auto groups = groups_;
  for (auto& g : groups) g.first_treated = g.id == id ? std::optional<int>(1) : std::nullopt;
  return PanelDataset(labels_, periods_, std::move(groups), strata_, cells_, smoothing_,
                      weight_source_);
}

PanelDataset PanelDataset::with_cohorts(
    const std::map<std::string, std::optional<int>>& first_treated) const {
  for (const auto& [id, _] : first_treated) group(id);
  auto groups = groups_;
  for (auto& g : groups) {
    auto it = first_treated.find(g.id);
    if (it == first_treated.end())
      throw Error(Errc::InvalidTiming, "no first_treated entry for group '" + g.id + "'");
    if (it->second) {
      const int first = *it->second;
      if (first <= periods_.front())
        throw Error(Errc::InvalidTiming, "group '" + g.id + "' is treated at the first period " +
                                             std::to_string(periods_.front()));
      if (first > periods_.back())
        throw Error(Errc::InvalidTiming, "group '" + g.id + "' first treated after the last period");
    }
    g.first_treated = it->second;
  }
  return PanelDataset(labels_, periods_, std::move(groups), strata_, cells_, smoothing_,
                      weight_source_);
}

PanelDataset PanelDataset::with_stratum_weights(const std::map<std::string, double>& weights,
                                                WeightSource source) const {
  auto strata = strata_;
  double sum = 0.0;
  for (auto& s : strata) {
    auto it = weights.find(s.name);
    if (it == weights.end())
      throw Error(Errc::InvalidStratumWeight, "no weight for stratum '" + s.name + "'");
    if (!(it->second > 0.0) || !std::isfinite(it->second))
      throw Error(Errc::InvalidStratumWeight, "weight for stratum '" + s.name + "' is not positive");
    s.weight = it->second;
    sum += it->second;
  }
  if (weights.size() != strata.size())
    throw Error(Errc::UnknownStratum, "weights given for strata not in the panel");
  if (std::abs(sum - 1.0) > kWeightTolerance)
    throw Error(Errc::InvalidStratumWeight, "stratum weights sum to " + format_double(sum));
  return PanelDataset(labels_, periods_, groups_, std::move(strata), cells_, smoothing_, source);
}

PanelDataset PanelDataset::with_cells(std::map<CellAddress, QuantityVector> cells) const {
  return PanelDataset(labels_, periods_, groups_, strata_, std::move(cells), smoothing_,
                      weight_source_);
}

// --- reading ---------------------------------------------------------------

PanelTable read_panel_table(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_csv_line(line);
      break;
    }
  }
  if (!header.empty() && header.front().starts_with("\xEF\xBB\xBF"))
    header.front() = header.front().substr(3);

  auto column = [&](std::string_view name) -> std::optional<std::size_t> {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  auto required = [&](std::string_view name) {
    auto c = column(name);
    if (!c) throw Error(Errc::MissingColumn, "missing column '" + std::string(name) + "'");
    return *c;
  };
  const std::size_t c_group = required("group");
  const std::size_t c_time = required("time");
  const std::size_t c_category = required("category");
  const std::size_t c_count = required("count");
  const auto c_stratum = column("stratum");
  const auto c_weight = column("stratum_weight");
  if (c_weight && !c_stratum)
    throw Error(Errc::MissingColumn, "column 'stratum_weight' requires column 'stratum'");

  PanelTable table;
  table.has_stratum = c_stratum.has_value();
  table.has_stratum_weight = c_weight.has_value();
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw Error(Errc::ParseError, where(line_no) + ": expected " + std::to_string(header.size()) +
                                        " fields, found " + std::to_string(fields.size()));
    PanelRow row;
    row.line = line_no;
    row.group = fields[c_group];
    row.time = parse_int(fields[c_time], line_no, "time");
    row.category = fields[c_category];
    row.count = parse_real(fields[c_count], line_no, "count");
    if (c_stratum) row.stratum = fields[*c_stratum];
    if (c_weight) row.stratum_weight = parse_real(fields[*c_weight], line_no, "stratum_weight");
    if (row.group.empty() || row.category.empty() || (c_stratum && row.stratum.empty()))
      throw Error(Errc::ParseError, where(line_no) + ": empty identifier");
    table.rows.push_back(std::move(row));
  }
  if (table.rows.empty()) throw Error(Errc::UnbalancedPanel, "panel has no rows");
  return table;
}

PanelTable read_panel_table(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_panel_table(in);
}

PanelDataset build_panel(const PanelTable& table, const LoadOptions& options) {
  if (options.smooth && !(*options.smooth > 0.0))
    throw Error(Errc::NonPositiveCount, "smoothing pseudo-count must be positive");
  if (table.rows.empty()) throw Error(Errc::UnbalancedPanel, "panel has no rows");
  const TableIndex idx = index_table(table);

  std::map<RowKey, const PanelRow*> by_key;
  for (const auto& row : table.rows) {
    auto [it, inserted] =
        by_key.emplace(RowKey{row.group, row.time, row.stratum, row.category}, &row);
    if (!inserted)
      throw Error(Errc::DuplicateCell, where(row.line) + " repeats (group=" + row.group +
                                           ", time=" + std::to_string(row.time) +
                                           ", category=" + row.category + ") from " +
                                           where(it->second->line));
  }

  std::vector<Stratum> strata;
  std::map<std::string, double> weights;
  for (const auto& name : idx.strata) strata.push_back(Stratum{name, std::nullopt});
  if (table.has_stratum_weight) {
    for (const auto& row : table.rows) {
      auto [it, inserted] = weights.emplace(row.stratum, *row.stratum_weight);
      if (!inserted && it->second != *row.stratum_weight)
        throw Error(Errc::InvalidStratumWeight,
                    where(row.line) + ": inconsistent weight for stratum '" + row.stratum + "'");
    }
  } else if (!table.has_stratum) {
    strata.front().weight = 1.0;
  }

  Labels labels(idx.categories.begin(), idx.categories.end());
  if (labels.size() < 2)
    throw Error(Errc::InconsistentCategories, "panel needs at least two categories");

  for (const auto& g : idx.groups) {
    std::set<std::string> seen;
    for (const auto& [key, _] : by_key)
      if (key.group == g) seen.insert(key.category);
    for (const auto& c : labels)
      if (!seen.contains(c))
        throw Error(Errc::InconsistentCategories,
                    "category '" + c + "' never observed for group '" + g + "'");
  }

  std::map<CellAddress, QuantityVector> cells;
  std::vector<SmoothingRecord> smoothing;
  for (const auto& g : idx.groups)
    for (int t : idx.periods)
      for (const auto& s : idx.strata) {
        const CellAddress address{g, t, s};
        std::vector<double> values;
        values.reserve(labels.size());
        bool has_zero = false;
        for (const auto& c : labels) {
          auto it = by_key.find(RowKey{g, t, s, c});
          if (it == by_key.end())
            throw Error(Errc::UnbalancedPanel,
                        "no row for " + to_string(address) + ", category '" + c + "'");
          const double v = it->second->count;
          if (v < 0.0)
            throw Error(Errc::NonPositiveCount, where(it->second->line) + ": negative count");
          if (v == 0.0) {
            if (!options.smooth)
              throw Error(Errc::NonPositiveCount,
                          where(it->second->line) + ": zero count (pass a smoothing pseudo-count)");
            has_zero = true;
          }
          values.push_back(v);
        }
        if (has_zero) {
          for (double& v : values) v += *options.smooth;
          smoothing.push_back(SmoothingRecord{address, *options.smooth});
        }
        cells.emplace(address, QuantityVector(std::move(values), labels));
      }

  std::vector<GroupInfo> groups;
  for (const auto& g : idx.groups) groups.push_back(GroupInfo{g, std::nullopt});
  PanelDataset panel(labels, std::vector<int>(idx.periods.begin(), idx.periods.end()),
                     std::move(groups), std::move(strata), std::move(cells), std::move(smoothing));
  if (table.has_stratum_weight) return panel.with_stratum_weights(weights, WeightSource::explicit_column);
  return panel;
}

PanelDataset load_csv(std::istream& in, const LoadOptions& options) {
  return build_panel(read_panel_table(in), options);
}

PanelDataset load_csv(const std::filesystem::path& path, const LoadOptions& options) {
  auto in = open_input(path);
  return load_csv(in, options);
}

// --- diagnostics -----------------------------------------------------------

std::vector<SupportIssue> validate_common_support(const PanelTable& table) {
  std::vector<SupportIssue> issues;
  const TableIndex idx = index_table(table);
  std::set<RowKey> seen;
  for (const auto& row : table.rows) {
    const CellAddress address{row.group, row.time, row.stratum};
    if (!seen.insert(RowKey{row.group, row.time, row.stratum, row.category}).second)
      issues.push_back({SupportIssue::Kind::duplicate, address, row.category, "duplicate"});
    if (!(row.count > 0.0))
      issues.push_back({SupportIssue::Kind::non_positive, address, row.category, "non-positive"});
  }
  for (const auto& g : idx.groups)
    for (int t : idx.periods)
      for (const auto& s : idx.strata)
        for (const auto& c : idx.categories)
          if (!seen.contains(RowKey{g, t, s, c}))
            issues.push_back({SupportIssue::Kind::missing, CellAddress{g, t, s}, c, "missing"});
  return issues;
}

std::vector<SupportIssue> validate_common_support(const PanelDataset& panel) {
  std::vector<SupportIssue> issues;
  for (const auto& [address, q] : panel.cells())
    for (std::size_t k = 0; k < q.size(); ++k)
      if (!(q[k] > 0.0))
        issues.push_back({SupportIssue::Kind::non_positive, address, q.labels()[k], "non-positive"});
  return issues;
}

// --- strata ----------------------------------------------------------------

PanelDataset stratify(const PanelDataset& panel, std::string_view stratum) {
  auto it = std::find_if(panel.strata().begin(), panel.strata().end(),
                         [&](const Stratum& s) { return s.name == stratum; });
  if (it == panel.strata().end())
    throw Error(Errc::UnknownStratum, "no stratum '" + std::string(stratum) + "'");
  std::map<CellAddress, QuantityVector> cells;
  for (const auto& [address, q] : panel.cells())
    if (address.stratum == stratum) cells.emplace(address, q);
  std::vector<SmoothingRecord> smoothing;
  for (const auto& rec : panel.smoothing())
    if (rec.cell.stratum == stratum) smoothing.push_back(rec);
  return PanelDataset(panel.labels(), panel.periods(), panel.groups(), {*it}, std::move(cells),
                      std::move(smoothing), panel.weight_source());
}

PanelDataset pool_strata(const PanelDataset& panel) {
  for (const auto& s : panel.strata())
    if (!s.weight)
      throw Error(Errc::MissingStratumWeight, "stratum '" + s.name + "' has no weight");
  std::map<CellAddress, QuantityVector> cells;
  const std::size_t p = panel.num_categories();
  for (const auto& g : panel.groups())
    for (int t : panel.periods()) {
      std::vector<double> values(p, 0.0);
      for (const auto& s : panel.strata()) {
        const auto& q = panel.cell(CellAddress{g.id, t, s.name});
        for (std::size_t k = 0; k < p; ++k) values[k] += *s.weight * q[k];
      }
      cells.emplace(CellAddress{g.id, t, ""}, QuantityVector(std::move(values), panel.labels()));
    }
  return PanelDataset(panel.labels(), panel.periods(), panel.groups(), {Stratum{"", 1.0}},
                      std::move(cells), panel.smoothing(), WeightSource::none);
}

PanelDataset weights_from_group_totals(const PanelDataset& panel, std::string_view group,
                                       int period) {
  if (!panel.has_period(period))
    throw Error(Errc::UnknownCell, "no period " + std::to_string(period));
  std::map<std::string, double> weights;
  double sum = 0.0;
  for (const auto& s : panel.strata()) {
    const double total = panel.cell(CellAddress{std::string(group), period, s.name}).total();
    weights[s.name] = total;
    sum += total;
  }
  for (auto& [_, w] : weights) w /= sum;
  return panel.with_stratum_weights(weights, WeightSource::treated_period0);
}

// --- sidecar and export ----------------------------------------------------

std::map<std::string, std::optional<int>> read_cohorts(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split_csv_line(line);
      break;
    }
  }
  auto find = [&](std::string_view name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(Errc::MissingColumn, "missing column '" + std::string(name) + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_group = find("group");
  const std::size_t c_first = find("first_treated");
  std::map<std::string, std::optional<int>> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw Error(Errc::ParseError, where(line_no) + ": wrong number of fields");
    std::string value = fields[c_first];
    std::string lower;
    for (char c : value) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    std::optional<int> first;
    if (lower != "inf" && lower != "+inf") first = parse_int(value, line_no, "first_treated");
    if (!out.emplace(fields[c_group], first).second)
      throw Error(Errc::DuplicateCell, where(line_no) + ": group '" + fields[c_group] + "' repeated");
  }
  return out;
}

std::map<std::string, std::optional<int>> read_cohorts(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_cohorts(in);
}

void write_csv(const PanelDataset& panel, std::ostream& out) {
  const bool strata = panel.stratified();
  const bool weights = strata && std::all_of(panel.strata().begin(), panel.strata().end(),
                                             [](const Stratum& s) { return s.weight.has_value(); });
  out << "group,time,category,count";
  if (strata) out << ",stratum";
  if (weights) out << ",stratum_weight";
  out << '\n';
  for (const auto& s : panel.strata())
    for (const auto& g : panel.groups())
      for (int t : panel.periods()) {
        const auto& q = panel.cell(CellAddress{g.id, t, s.name});
        for (std::size_t k = 0; k < q.size(); ++k) {
          out << g.id << ',' << t << ',' << q.labels()[k] << ',' << format_double(q[k]);
          if (strata) out << ',' << s.name;
          if (weights) out << ',' << format_double(*s.weight);
          out << '\n';
        }
      }
}

void write_csv(const PanelTable& table, std::ostream& out) {
  out << "group,time,category,count";
  if (table.has_stratum) out << ",stratum";
  if (table.has_stratum_weight) out << ",stratum_weight";
  out << '\n';
  for (const auto& r : table.rows) {
    out << r.group << ',' << r.time << ',' << r.category << ',' << format_double(r.count);
    if (table.has_stratum) out << ',' << r.stratum;
    if (table.has_stratum_weight) out << ',' << (r.stratum_weight ? format_double(*r.stratum_weight) : "");
    out << '\n';
  }
}

void write_cohorts(const PanelDataset& panel, std::ostream& out) {
  out << "group,first_treated\n";
  for (const auto& g : panel.groups())
    out << g.id << ',' << (g.first_treated ? std::to_string(*g.first_treated) : "inf") << '\n';
}

std::string resolve_treated_group(const PanelDataset& panel,
                                  const std::optional<std::string>& requested) {
  if (requested) {
    panel.group(*requested);
    return *requested;
  }
  for (const char* name : {"treated", "1"})
    for (const auto& g : panel.groups())
      if (g.id == name) return g.id;
  throw Error(Errc::UnknownGroup,
              "cannot tell which group is treated; name it 'treated' or '1', or pass it explicitly");
}

}  // namespace codid
