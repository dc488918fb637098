#pragma once

#include "toolseq/model.hpp"

namespace toolseq {

inline constexpr std::size_t kReferenceMaxProcedure = 6;
inline constexpr std::size_t kReferenceMaxTrace = 8;

/// Small-instance oracle for classify. Each taxonomy class is evaluated as an
/// independent predicate straight from its definition, then the fixed
/// precedence picks the label. Shares no code with the production
/// classifier. Throws std::invalid_argument beyond k <= 6, k_hat <= 8.
Verdict reference_classify(const Procedure& expected, const ObservedTrace& observed, const ToolRegistry& registry);

}  // namespace toolseq
