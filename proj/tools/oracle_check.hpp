#pragma once

#include <cstdint>
#include <iosfwd>

namespace mmosim::cli {

struct OracleReport {
  int coverage_instances{0};
  int coverage_violations{0};
  double worst_ratio{1.0};
  int placement_instances{0};
  int placement_violations{0};
  bool ok() const { return coverage_violations == 0 && placement_violations == 0; }
};

OracleReport oracle_check(int instances, std::uint64_t seed, std::ostream& log);

}  // namespace mmosim::cli
