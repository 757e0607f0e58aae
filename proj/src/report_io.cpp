#include "ttpp/report_io.hpp"

#include <fstream>
#include <iterator>
#include <stdexcept>

#include "ttpp/errors.hpp"
#include "ttpp/text.hpp"

namespace ttpp {

namespace {

/// Non-empty lines with their starting byte offsets.
std::vector<std::pair<std::string_view, std::size_t>> lines_of(std::string_view text) {
  std::vector<std::pair<std::string_view, std::size_t>> out;
  std::size_t offset = 0;
  while (offset < text.size()) {
    auto end = text.find('\n', offset);
    if (end == std::string_view::npos) end = text.size();
    auto line = trim(text.substr(offset, end - offset));
    if (!line.empty()) out.emplace_back(line, offset);
    offset = end + 1;
  }
  return out;
}

double field_double(std::string_view s, std::size_t offset) {
  try {
    return parse_double(s);
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what(), offset);
  }
}

std::size_t field_index(std::string_view s, std::size_t offset) {
  try {
    const auto v = parse_int(s);
    if (v < 0) throw std::invalid_argument("negative index");
    return static_cast<std::size_t>(v);
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what(), offset);
  }
}

void expect_header(const std::vector<std::pair<std::string_view, std::size_t>>& lines, std::string_view header,
                   const char* what) {
  if (lines.empty()) throw TruncationError(std::string(what) + " CSV is empty", 0);
  if (lines.front().first != header) {
    throw ParseError(std::string(what) + " CSV header must be '" + std::string(header) + "'", 0);
  }
}

}  // namespace

void ReportTable::add(const std::string& method, const HorizonReport& report) {
  std::vector<std::string> cols = report.labels;
  cols.push_back("Avg");
  if (columns.empty()) columns = cols;
  if (columns != cols) throw ContractError("report for '" + method + "' has different horizons than the table");
  Row row{method, report.values};
  row.values.push_back(report.average);
  rows.push_back(std::move(row));
}

std::string report_to_csv(const ReportTable& table) {
  std::string out = "method";
  for (const auto& c : table.columns) out += "," + c;
  out += "\n";
  for (const auto& row : table.rows) {
    out += row.method;
    for (double v : row.values) out += "," + format_double(v);
    out += "\n";
  }
  return out;
}

ReportTable report_from_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw TruncationError("report CSV is empty", 0);
  const auto header = split(lines.front().first, ',');
  if (header.size() < 2 || header.front() != "method" || header.back() != "Avg") {
    throw ParseError("report CSV header must be 'method,<horizons>,Avg'", 0);
  }
  ReportTable table;
  for (std::size_t i = 1; i < header.size(); ++i) table.columns.emplace_back(header[i]);
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto [line, offset] = lines[li];
    const auto fields = split(line, ',');
    if (fields.size() != header.size()) {
      throw RowDimensionError("report row " + std::to_string(li) + " has " + std::to_string(fields.size()) +
                                  " fields, header has " + std::to_string(header.size()),
                              offset);
    }
    ReportTable::Row row{std::string(fields[0]), {}};
    for (std::size_t i = 1; i < fields.size(); ++i) row.values.push_back(field_double(fields[i], offset));
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::string history_to_csv(const History& history) {
  std::string out = "epoch,L_c,L_r,total,acc_h1\n";
  for (const auto& r : history) {
    out += std::to_string(r.epoch) + "," + format_double(r.class_loss) + "," + format_double(r.feature_loss) + "," +
           format_double(r.total) + "," + format_double(r.acc_h1) + "\n";
  }
  return out;
}

History history_from_csv(std::string_view text) {
  const auto lines = lines_of(text);
  expect_header(lines, "epoch,L_c,L_r,total,acc_h1", "history");
  History history;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto [line, offset] = lines[li];
    const auto f = split(line, ',');
    if (f.size() != 5) throw RowDimensionError("history row " + std::to_string(li) + " needs 5 fields", offset);
    history.push_back(EpochRecord{field_index(f[0], offset), field_double(f[1], offset), field_double(f[2], offset),
                                  field_double(f[3], offset), field_double(f[4], offset)});
  }
  return history;
}

std::string attention_to_csv(const std::vector<AttentionRecord>& records) {
  std::string out = "video_id,t,head,memory_pos,weight\n";
  for (const auto& r : records) {
    out += r.video_id + "," + std::to_string(r.t) + "," + std::to_string(r.head) + "," +
           std::to_string(r.memory_pos) + "," + format_double(r.weight) + "\n";
  }
  return out;
}

std::vector<AttentionRecord> attention_from_csv(std::string_view text) {
  const auto lines = lines_of(text);
  expect_header(lines, "video_id,t,head,memory_pos,weight", "attention");
  std::vector<AttentionRecord> out;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto [line, offset] = lines[li];
    const auto f = split(line, ',');
    if (f.size() != 5) throw RowDimensionError("attention row " + std::to_string(li) + " needs 5 fields", offset);
    out.push_back(AttentionRecord{std::string(f[0]), field_index(f[1], offset), field_index(f[2], offset),
                                  field_index(f[3], offset), field_double(f[4], offset)});
  }
  return out;
}

std::vector<AttentionRecord> dump_attention(const Model& model, const FeatureSequence& seq) {
  if (model.config().aggregator != AggregatorKind::ttm) {
    throw ConfigError("attention dumps need the ttm aggregator");
  }
  const std::size_t t_obs = model.config().observed;
  const std::size_t d = seq.dim();
  std::vector<AttentionRecord> out;
  Rng unused(0);
  for (std::size_t end = t_obs - 1; end < seq.length(); ++end) {
    const std::size_t begin = end + 1 - t_obs;
    const auto first = seq.features.values().begin() + static_cast<std::ptrdiff_t>(begin * d);
    Tensor window({t_obs, d}, std::vector<double>(first, first + static_cast<std::ptrdiff_t>(t_obs * d)));
    const auto result = model.forward(window, Mode::eval, unused);
    for (std::size_t h = 0; h < result.attention.size(); ++h) {
      const Tensor& w = result.attention[h];
      for (std::size_t m = 0; m < w.cols(); ++m) {
        out.push_back(AttentionRecord{seq.video_id, end, h, begin + m, w(0, m)});
      }
    }
  }
  return out;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

}  // namespace ttpp
