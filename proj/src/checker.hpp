#pragma once

#include <functional>
#include <string>

namespace ilr {

// Judges a model response against the gold answer. The canonical
// implementation extracts the last boxed answer and compares canonical forms;
// tests substitute simpler checkers.
using AnswerChecker =
    std::function<bool(const std::string& response, const std::string& gold)>;

}  // namespace ilr
