#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace dtsync {

/// Raised when a scenario or subproblem admits no feasible point.
///
/// `slot()` carries the zero-based time slot that first fails, when one can be
/// named (accuracy targets, offloading LP rows); window-capacity failures leave
/// it empty.
class InfeasibleError : public std::runtime_error {
public:
    explicit InfeasibleError(const std::string& what, std::optional<int> slot = std::nullopt)
        : std::runtime_error(what), slot_(slot) {}

    std::optional<int> slot() const noexcept { return slot_; }

private:
    std::optional<int> slot_;
};

} // namespace dtsync
