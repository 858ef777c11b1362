#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace assist {

struct SwiftError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Interpreter for the integer fragment of Swift that the case-study answers
/// use: `func` declarations over Int with var/let, assignment (= += -= *=),
/// while, if/else, return, arithmetic, comparisons, && || ! and the min/max
/// builtins. Other top-level declarations (import, struct, ...) are skipped.
class SwiftSubset {
public:
    /// Throws SwiftError on a syntax error inside a func body.
    explicit SwiftSubset(std::string_view source);
    ~SwiftSubset();
    SwiftSubset(SwiftSubset&&) noexcept;
    SwiftSubset& operator=(SwiftSubset&&) noexcept;

    bool hasFunction(const std::string& name) const;
    std::vector<std::string> functionNames() const;

    /// Throws SwiftError on arity mismatch, division by zero, overflow,
    /// undefined names or when `stepLimit` statements run.
    std::int64_t call(const std::string& name, const std::vector<std::int64_t>& args,
                      std::uint64_t stepLimit = 10'000'000) const;

    /// Names called (user functions and builtins) anywhere in `name`'s body.
    std::set<std::string> calledNames(const std::string& name) const;

    struct Function;

private:
    std::map<std::string, std::shared_ptr<Function>> functions_;
};

/// Greatest common divisor by scanning candidates downward from min(a, b).
/// Deliberately not Euclid's algorithm. Requires a, b >= 1.
std::int64_t gcdOracle(std::int64_t a, std::int64_t b);

/// Least common multiple by stepping through multiples of max(a, b); uses no
/// divisor computation. Requires a, b >= 1.
std::int64_t lcmOracle(std::int64_t a, std::int64_t b);

}  // namespace assist
