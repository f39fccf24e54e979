#pragma once

#include <optional>
#include <string_view>
#include <vector>

namespace tlsaudit::mock
{

/// Hex of the built-in prime with exactly `bits` bits, if there is one.
std::optional<std::string_view> modp_prime_hex(int bits);
std::vector<int> modp_sizes();

} // namespace tlsaudit::mock
