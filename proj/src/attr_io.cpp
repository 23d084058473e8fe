#include "iaip/attr_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <unordered_set>

#include "iaip/error.hpp"
#include "text_util.hpp"

namespace iaip::io {

namespace {

[[noreturn]] void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

bool has_space(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](char c) { return detail::is_space(c) || c == '\n'; });
}

std::uint32_t load_u32_le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void store_u32_le(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && detail::is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && detail::is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

LatentMatrix parse_latents_raw(std::string_view src) {
  if (src.size() < kLatentHeaderSize)
    fail(ErrorCode::Parse, "LATM: truncated header (" + std::to_string(src.size()) + " bytes)");
  const auto* bytes = reinterpret_cast<const unsigned char*>(src.data());
  if (std::memcmp(bytes, "LATM", 4) != 0) fail(ErrorCode::Parse, "LATM: bad magic");
  const std::uint32_t rows = load_u32_le(bytes + 4);
  const std::uint32_t cols = load_u32_le(bytes + 8);
  if (load_u32_le(bytes + 12) != 0) fail(ErrorCode::Parse, "LATM: reserved header bytes are not zero");
  if (rows == 0 || cols == 0)
    fail(ErrorCode::Shape, "LATM: empty shape " + std::to_string(rows) + "x" + std::to_string(cols));

  const std::uint64_t count = static_cast<std::uint64_t>(rows) * cols;
  const std::uint64_t payload = src.size() - kLatentHeaderSize;
  if (payload < count * 4)
    fail(ErrorCode::Parse, "LATM: truncated payload, expected " + std::to_string(count * 4) +
                               " bytes, got " + std::to_string(payload));
  if (payload > count * 4)
    fail(ErrorCode::Shape, "LATM: " + std::to_string(payload - count * 4) +
                               " trailing bytes after declared " + std::to_string(rows) + "x" +
                               std::to_string(cols) + " payload");

  std::vector<double> data(static_cast<std::size_t>(count));
  const unsigned char* p = bytes + kLatentHeaderSize;
  for (std::size_t i = 0; i < data.size(); ++i, p += 4) {
    const float f = std::bit_cast<float>(load_u32_le(p));
    if (!std::isfinite(f))
      fail(ErrorCode::NonFinite, "LATM: non-finite value at row " + std::to_string(i / cols) +
                                     ", col " + std::to_string(i % cols));
    data[i] = static_cast<double>(f);
  }
  return LatentMatrix(rows, cols, std::move(data));
}

LatentMatrix parse_latents_csv(std::string_view src) {
  auto lines = detail::split_lines(src);
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  if (lines.empty()) fail(ErrorCode::Shape, "CSV: no rows");

  std::size_t first = 0;
  {
    auto cells = split_commas(lines[0]);
    if (!detail::parse_double(cells[0]).has_value()) {
      // Header row: first token is not a number. The literal tokens nan/inf
      // parse as numbers and are rejected below as non-finite instead.
      first = 1;
    }
  }
  if (first == lines.size()) fail(ErrorCode::Shape, "CSV: header but no data rows");

  std::size_t cols = 0;
  std::vector<double> data;
  for (std::size_t li = first; li < lines.size(); ++li) {
    auto cells = split_commas(lines[li]);
    if (li == first) {
      cols = cells.size();
    } else if (cells.size() != cols) {
      fail(ErrorCode::Shape, "CSV: line " + std::to_string(li + 1) + " has " +
                                 std::to_string(cells.size()) + " fields, expected " +
                                 std::to_string(cols));
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      auto v = detail::parse_double(cells[c]);
      if (!v)
        fail(ErrorCode::Parse, "CSV: line " + std::to_string(li + 1) + ", field " +
                                   std::to_string(c + 1) + " is not a number: '" +
                                   std::string(cells[c].substr(0, 32)) + "'");
      if (!std::isfinite(*v))
        fail(ErrorCode::NonFinite, "CSV: line " + std::to_string(li + 1) + ", field " +
                                       std::to_string(c + 1) + " is not finite");
      data.push_back(*v);
    }
  }
  const std::size_t rows = lines.size() - first;
  return LatentMatrix(rows, cols, std::move(data));
}

}  // namespace

AttributeMatrix::AttributeMatrix(std::vector<std::string> names, std::vector<std::string> row_ids,
                                 std::vector<std::uint8_t> data)
    : names_(std::move(names)), row_ids_(std::move(row_ids)), data_(std::move(data)) {
  if (names_.size() < 2)
    fail(ErrorCode::Shape, "attribute matrix needs at least 2 attributes, got " +
                               std::to_string(names_.size()));
  if (row_ids_.empty()) fail(ErrorCode::Shape, "attribute matrix needs at least 1 row");
  if (data_.size() != names_.size() * row_ids_.size())
    fail(ErrorCode::Shape, "attribute data has " + std::to_string(data_.size()) + " cells, expected " +
                               std::to_string(names_.size() * row_ids_.size()));
  std::unordered_set<std::string_view> seen;
  for (const auto& n : names_) {
    if (n.empty()) fail(ErrorCode::InvalidArgument, "empty attribute name");
    if (!seen.insert(n).second) fail(ErrorCode::InvalidArgument, "duplicate attribute name '" + n + "'");
  }
  for (std::size_t i = 0; i < data_.size(); ++i) {
    if (data_[i] > 1)
      fail(ErrorCode::InvalidArgument, "attribute cell (" + std::to_string(i / names_.size()) + ", " +
                                           std::to_string(i % names_.size()) + ") is not 0 or 1");
  }
}

std::size_t AttributeMatrix::find(std::string_view name) const noexcept {
  for (std::size_t j = 0; j < names_.size(); ++j)
    if (names_[j] == name) return j;
  return npos;
}

std::vector<double> AttributeMatrix::column(std::size_t j) const {
  std::vector<double> out(rows());
  for (std::size_t i = 0; i < rows(); ++i) out[i] = (*this)(i, j);
  return out;
}

LatentMatrix::LatentMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows_ == 0 || cols_ == 0)
    fail(ErrorCode::Shape, "latent matrix must be non-empty, got " + std::to_string(rows_) + "x" +
                               std::to_string(cols_));
  if (data_.size() != rows_ * cols_)
    fail(ErrorCode::Shape, "latent data has " + std::to_string(data_.size()) + " values, expected " +
                               std::to_string(rows_ * cols_));
  for (std::size_t i = 0; i < data_.size(); ++i)
    if (!std::isfinite(data_[i]))
      fail(ErrorCode::NonFinite, "latent value at row " + std::to_string(i / cols_) + ", col " +
                                     std::to_string(i % cols_) + " is not finite");
}

AttributeMatrix parse_celeba_attributes(std::string_view source) {
  auto lines = detail::split_lines(source);
  if (lines.size() < 2) fail(ErrorCode::Parse, "attribute file: missing count or header line");

  auto count_tokens = detail::split_ws(lines[0]);
  if (count_tokens.size() != 1)
    fail(ErrorCode::Parse, "attribute file: line 1 must hold a single row count");
  auto declared = detail::parse_int<std::size_t>(count_tokens[0]);
  if (!declared) fail(ErrorCode::Parse, "attribute file: line 1 is not a row count");
  if (*declared == 0) fail(ErrorCode::Shape, "attribute file: declared row count is 0");

  std::vector<std::string> names;
  for (auto tok : detail::split_ws(lines[1])) names.emplace_back(tok);
  if (names.size() < 2)
    fail(ErrorCode::Shape, "attribute file: need at least 2 attribute names on line 2");
  {
    std::unordered_set<std::string_view> seen;
    for (const auto& n : names)
      if (!seen.insert(n).second)
        fail(ErrorCode::Parse, "attribute file: duplicate attribute name '" + n + "'");
  }

  const std::size_t m = names.size();
  std::size_t last = lines.size();
  while (last > 2 && trim(lines[last - 1]).empty()) --last;
  const std::size_t present = last - 2;
  if (present != *declared)
    fail(ErrorCode::Shape, "attribute file: declared " + std::to_string(*declared) + " rows, found " +
                               std::to_string(present));

  std::vector<std::string> row_ids;
  std::vector<std::uint8_t> data;
  row_ids.reserve(present);
  data.reserve(present * m);
  for (std::size_t li = 2; li < last; ++li) {
    auto toks = detail::split_ws(lines[li]);
    if (toks.size() != m + 1)
      fail(ErrorCode::Shape, "attribute file: line " + std::to_string(li + 1) + " has " +
                                 std::to_string(toks.empty() ? 0 : toks.size() - 1) +
                                 " values, expected " + std::to_string(m));
    row_ids.emplace_back(toks[0]);
    for (std::size_t k = 1; k <= m; ++k) {
      if (toks[k] == "1") {
        data.push_back(1);
      } else if (toks[k] == "-1") {
        data.push_back(0);
      } else {
        fail(ErrorCode::Parse, "attribute file: line " + std::to_string(li + 1) + ", attribute '" +
                                   names[k - 1] + "': token '" + std::string(toks[k].substr(0, 16)) +
                                   "' is not -1 or 1");
      }
    }
  }
  return AttributeMatrix(std::move(names), std::move(row_ids), std::move(data));
}

std::string write_celeba_attributes(const AttributeMatrix& m) {
  for (const auto& n : m.names())
    if (has_space(n)) fail(ErrorCode::InvalidArgument, "attribute name '" + n + "' contains whitespace");
  for (const auto& id : m.row_ids())
    if (id.empty() || has_space(id))
      fail(ErrorCode::InvalidArgument, "record id '" + id + "' is empty or contains whitespace");

  std::string out = std::to_string(m.rows());
  out += '\n';
  for (std::size_t j = 0; j < m.cols(); ++j) {
    if (j) out += ' ';
    out += m.names()[j];
  }
  out += '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    out += m.row_ids()[i];
    for (auto v : m.row(i)) out += v ? " 1" : " -1";
    out += '\n';
  }
  return out;
}

LatentMatrix parse_latents(std::string_view source, LatentFormat format) {
  return format == LatentFormat::Raw ? parse_latents_raw(source) : parse_latents_csv(source);
}

std::string write_latents(const LatentMatrix& m, LatentFormat format) {
  std::string out;
  if (format == LatentFormat::Raw) {
    if (m.rows() > 0xFFFFFFFFu || m.cols() > 0xFFFFFFFFu)
      fail(ErrorCode::Shape, "LATM: shape does not fit in 32-bit header fields");
    out.reserve(kLatentHeaderSize + 4 * m.data().size());
    out.append("LATM", 4);
    store_u32_le(out, static_cast<std::uint32_t>(m.rows()));
    store_u32_le(out, static_cast<std::uint32_t>(m.cols()));
    store_u32_le(out, 0);
    for (double v : m.data()) {
      const float f = static_cast<float>(v);
      if (!std::isfinite(f)) fail(ErrorCode::NonFinite, "LATM: value overflows 32-bit float");
      store_u32_le(out, std::bit_cast<std::uint32_t>(f));
    }
    return out;
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out += ',';
      detail::append_double(out, m(r, c));
    }
    out += '\n';
  }
  return out;
}

std::vector<ColumnStats> column_stats(const AttributeMatrix& m) {
  std::vector<ColumnStats> stats(m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto row = m.row(i);
    for (std::size_t j = 0; j < m.cols(); ++j) stats[j].ones += row[j];
  }
  for (auto& s : stats) {
    s.zeros = m.rows() - s.ones;
    s.prevalence = static_cast<double>(s.ones) / static_cast<double>(m.rows());
  }
  return stats;
}

std::vector<std::size_t> constant_columns(const AttributeMatrix& m) {
  std::vector<std::size_t> out;
  auto stats = column_stats(m);
  for (std::size_t j = 0; j < stats.size(); ++j)
    if (stats[j].constant()) out.push_back(j);
  return out;
}

}  // namespace iaip::io
