#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace speedfill {

// Small CSV helpers shared by the readers and writers. Fields never contain
// commas in the formats this library reads, so no quoting is handled.
[[nodiscard]] std::vector<std::string_view> split_csv(std::string_view line);
[[nodiscard]] std::optional<double> parse_double(std::string_view text);
[[nodiscard]] std::optional<long long> parse_int(std::string_view text);

/// Shortest decimal text that round-trips to the same double.
[[nodiscard]] std::string format_number(double value);

}  // namespace speedfill
