#pragma once

#include <string>
#include <vector>

#include "transfact/eval.hpp"

namespace transfact {

/// Line plot of mean accuracy against prefix length with a ±1 std band.
std::string sweep_svg(const std::vector<SweepPoint>& points, const std::string& title = "accuracy vs. input length");

} // namespace transfact
