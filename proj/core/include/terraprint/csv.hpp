#ifndef TERRAPRINT_CSV_HPP
#define TERRAPRINT_CSV_HPP

#include <string>
#include <vector>

namespace terraprint::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

// Values are written with round-trip-exact formatting ("%.17g") so that any
// statistic recomputed from a file matches the in-memory value bit for bit.
void write(const std::string& path, const Table& table);
Table read(const std::string& path);

std::string format_double(double v);

}  // namespace terraprint::csv

#endif
