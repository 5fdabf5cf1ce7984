#include "nmms/error.hpp"

namespace nmms {
namespace {

std::string WithLocation(const std::string& what, std::size_t row, std::size_t column) {
  if (row == 0) return what;
  std::string out = what + " (row " + std::to_string(row);
  if (column != 0) out += ", column " + std::to_string(column);
  return out + ")";
}

}  // namespace

IngestionError::IngestionError(const std::string& what, std::size_t row, std::size_t column)
    : Error(WithLocation(what, row, column)), row_(row), column_(column) {}

}  // namespace nmms
