#include "pfslda/text_io.h"

#include <charconv>
#include <cstdio>

#include "pfslda/error.h"

namespace pfslda {

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

std::vector<std::string_view> split_whitespace(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

bool parse_double(std::string_view token, double* out) {
  if (token.empty()) return false;
  if (token.front() == '+') token.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), *out);
  return ec == std::errc() && ptr == token.data() + token.size();
}

bool parse_int(std::string_view token, long long* out) {
  if (token.empty()) return false;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), *out);
  return ec == std::errc() && ptr == token.data() + token.size();
}

void write_row(std::ostream& out, const Eigen::Ref<const Eigen::VectorXd>& row) {
  for (Eigen::Index i = 0; i < row.size(); ++i) {
    if (i > 0) out << ' ';
    out << format_double(row[i]);
  }
  out << '\n';
}

Eigen::VectorXd parse_row(std::string_view line, const std::string& what) {
  auto tokens = split_whitespace(line);
  Eigen::VectorXd row(static_cast<Eigen::Index>(tokens.size()));
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    double value = 0.0;
    if (!parse_double(tokens[i], &value)) {
      throw Error(what + ": malformed number '" + std::string(tokens[i]) + "'");
    }
    row[static_cast<Eigen::Index>(i)] = value;
  }
  return row;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string() + " for reading");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

bool read_line(std::istream& in, std::string* line) {
  if (!std::getline(in, *line)) return false;
  if (!line->empty() && line->back() == '\r') line->pop_back();
  return true;
}

}  // namespace pfslda
