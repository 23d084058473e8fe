#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace fuzz {

inline std::vector<std::string> lines_of(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto nl = s.find('\n', start);
    if (nl == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, nl - start));
    start = nl + 1;
  }
}

inline std::string join_lines(const std::vector<std::string>& lines) {
  std::string out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i) out += '\n';
    out += lines[i];
  }
  return out;
}

// One to three structural or byte-level edits of a text file.
inline std::string mutate(const std::string& seed, std::mt19937_64& rng) {
  static const char* tokens[] = {"0", "2", "-2", "1.0", "+1", "-1", "1", "", "x", "-", "99999999999999999999",
                                 "\t", "\r", "nan", "-0", "A"};
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  std::string s = seed;
  const std::size_t edits = 1 + pick(3);
  for (std::size_t e = 0; e < edits; ++e) {
    auto lines = lines_of(s);
    switch (pick(10)) {
      case 0:  // flip a byte
        if (!s.empty()) s[pick(s.size())] = static_cast<char>(pick(256));
        break;
      case 1:  // insert a byte
        s.insert(s.begin() + static_cast<std::ptrdiff_t>(pick(s.size() + 1)), static_cast<char>(pick(256)));
        break;
      case 2:  // delete a byte
        if (!s.empty()) s.erase(pick(s.size()), 1);
        break;
      case 3:  // truncate
        s.resize(pick(s.size() + 1));
        break;
      case 4:  // duplicate a line
        lines.insert(lines.begin() + static_cast<std::ptrdiff_t>(pick(lines.size())), lines[pick(lines.size())]);
        s = join_lines(lines);
        break;
      case 5:  // drop a line
        lines.erase(lines.begin() + static_cast<std::ptrdiff_t>(pick(lines.size())));
        s = join_lines(lines);
        break;
      case 6: {  // replace a whitespace-delimited token
        auto& line = lines[pick(lines.size())];
        std::vector<std::pair<std::size_t, std::size_t>> spans;
        for (std::size_t i = 0; i < line.size();) {
          while (i < line.size() && line[i] == ' ') ++i;
          const std::size_t b = i;
          while (i < line.size() && line[i] != ' ') ++i;
          if (i > b) spans.push_back({b, i - b});
        }
        if (!spans.empty()) {
          auto [b, len] = spans[pick(spans.size())];
          line.replace(b, len, tokens[pick(std::size(tokens))]);
        }
        s = join_lines(lines);
        break;
      }
      case 7:  // append a token to a line
        lines[pick(lines.size())] += std::string(" ") + tokens[pick(std::size(tokens))];
        s = join_lines(lines);
        break;
      case 8:  // swap two lines
        if (lines.size() > 1) std::swap(lines[pick(lines.size())], lines[pick(lines.size())]);
        s = join_lines(lines);
        break;
      default:  // CRLF or NUL injection
        if (pick(2)) {
          const auto at = s.find('\n', pick(s.size() + 1));
          if (at != std::string::npos) s.insert(at, "\r");
        } else {
          s.insert(s.begin() + static_cast<std::ptrdiff_t>(pick(s.size() + 1)), '\0');
        }
    }
  }
  return s;
}

}  // namespace fuzz
