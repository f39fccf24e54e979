#pragma once

#include "tlsaudit/registry.hpp"

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tlsaudit::cipherspec
{

enum class SpecOp : std::uint8_t
{
    INCLUDE,
    PERMANENT_DELETE, // '!'
    DELETE,           // '-'
    MOVE_TO_END,      // '+'
    SORT_BY_STRENGTH, // '@STRENGTH'
};

std::string_view to_string(SpecOp op);

struct SpecToken
{
    SpecOp op = SpecOp::INCLUDE;
    /// Keyword, suite name, or '+'-joined conjunction; "STRENGTH" for sorts.
    std::string body;

    std::vector<std::string> terms() const;
    bool operator==(const SpecToken&) const = default;
};

class SpecError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Splits an OpenSSL-style cipher string into operations. Separators are
/// ':', ',' and ' '; "X@STRENGTH" yields an INCLUDE followed by a sort.
std::vector<SpecToken> tokenize(std::string_view spec);

/// Suites selected by one keyword or exact suite name, in registry order.
/// Throws SpecError for unknown keywords (DEFAULT included).
std::vector<const registry::CipherSuite*> match_keyword(const registry::Registry& r, std::string_view keyword);

/// True if `keyword` is a recognised alias (not a suite name).
bool is_keyword(std::string_view keyword);
/// All recognised aliases, for help output.
std::vector<std::string_view> keywords();

/// Left-to-right evaluation of a cipher string over the registry.
std::vector<const registry::CipherSuite*> expand(const registry::Registry& r, std::string_view spec);

struct SpecDiff
{
    std::vector<const registry::CipherSuite*> only_in_a;
    std::vector<const registry::CipherSuite*> only_in_b;
};

SpecDiff diff_specs(const registry::Registry& r, std::string_view a, std::string_view b);

} // namespace tlsaudit::cipherspec
