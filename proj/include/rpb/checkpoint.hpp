#pragma once

#include "rpb/boost.hpp"

#include <string>

namespace rpb {

inline constexpr int kCheckpointVersion = 1;

std::string checkpoint_to_string(const BoostOperator& m);
BoostOperator checkpoint_from_string(const std::string& text);

/// Versioned JSON with the operator configuration and theta = (theta1, theta2).
void save_checkpoint(const BoostOperator& m, const std::string& path);
/// Throws ConfigError for a missing or malformed file.
BoostOperator load_checkpoint(const std::string& path);

}  // namespace rpb
