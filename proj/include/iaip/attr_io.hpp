#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace iaip::io {

// N x M binary attribute labels, stored row-major. Invariants (checked by the
// constructor): every cell is 0 or 1, names are unique and non-empty,
// N >= 1, M >= 2.
class AttributeMatrix {
 public:
  AttributeMatrix(std::vector<std::string> names, std::vector<std::string> row_ids,
                  std::vector<std::uint8_t> data);

  std::size_t rows() const noexcept { return row_ids_.size(); }
  std::size_t cols() const noexcept { return names_.size(); }

  std::uint8_t operator()(std::size_t row, std::size_t col) const noexcept {
    return data_[row * names_.size() + col];
  }
  std::span<const std::uint8_t> row(std::size_t r) const noexcept {
    return {data_.data() + r * names_.size(), names_.size()};
  }

  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<std::string>& row_ids() const noexcept { return row_ids_; }
  const std::vector<std::uint8_t>& data() const noexcept { return data_; }

  // Index of the attribute called `name`, or npos.
  std::size_t find(std::string_view name) const noexcept;
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  // Column j as doubles in {0.0, 1.0}.
  std::vector<double> column(std::size_t j) const;

  friend bool operator==(const AttributeMatrix&, const AttributeMatrix&) = default;

 private:
  std::vector<std::string> names_;
  std::vector<std::string> row_ids_;
  std::vector<std::uint8_t> data_;
};

// N x D real matrix, row-major, all entries finite, N >= 1, D >= 1.
class LatentMatrix {
 public:
  LatentMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }
  const std::vector<double>& data() const noexcept { return data_; }

  friend bool operator==(const LatentMatrix&, const LatentMatrix&) = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

enum class LatentFormat { Csv, Raw };

// CelebA "list_attr" text: N, then the attribute names, then N rows of
// `<record id> <M tokens in {-1,1}>`. -1 maps to 0.
AttributeMatrix parse_celeba_attributes(std::string_view source);
std::string write_celeba_attributes(const AttributeMatrix& m);

// Raw layout: "LATM", u32 LE rows, u32 LE cols, 4 zero bytes, then
// rows*cols f32 LE row-major. CSV accepts an optional header row, LF or CRLF.
LatentMatrix parse_latents(std::string_view source, LatentFormat format);
std::string write_latents(const LatentMatrix& m, LatentFormat format);

inline constexpr std::size_t kLatentHeaderSize = 16;

struct ColumnStats {
  std::size_t ones = 0;
  std::size_t zeros = 0;
  double prevalence = 0.0;

  bool constant() const noexcept { return ones == 0 || zeros == 0; }
};

std::vector<ColumnStats> column_stats(const AttributeMatrix& m);

// Indices of all-0 / all-1 columns. Parsing accepts these; fitting does not.
std::vector<std::size_t> constant_columns(const AttributeMatrix& m);

}  // namespace iaip::io
