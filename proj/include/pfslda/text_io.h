#ifndef PFSLDA_TEXT_IO_H_
#define PFSLDA_TEXT_IO_H_

#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace pfslda {

// Shortest round-trippable form, at least 17 significant digits.
std::string format_double(double value);

std::vector<std::string_view> split_whitespace(std::string_view line);

// Strict parses: the whole token must be consumed.
bool parse_double(std::string_view token, double* out);
bool parse_int(std::string_view token, long long* out);

void write_row(std::ostream& out, const Eigen::Ref<const Eigen::VectorXd>& row);
Eigen::VectorXd parse_row(std::string_view line, const std::string& what);

std::ifstream open_input(const std::filesystem::path& path);
std::ofstream open_output(const std::filesystem::path& path);

// getline that strips a trailing '\r'.
bool read_line(std::istream& in, std::string* line);

}  // namespace pfslda

#endif  // PFSLDA_TEXT_IO_H_
