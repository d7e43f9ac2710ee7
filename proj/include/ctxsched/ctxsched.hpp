#pragma once

#include "ctxsched/accuracy.hpp"
#include "ctxsched/catalog.hpp"
#include "ctxsched/compose.hpp"
#include "ctxsched/context_builder.hpp"
#include "ctxsched/cooccurrence.hpp"
#include "ctxsched/cost_model.hpp"
#include "ctxsched/detector.hpp"
#include "ctxsched/digest.hpp"
#include "ctxsched/error.hpp"
#include "ctxsched/metrics.hpp"
#include "ctxsched/oracle.hpp"
#include "ctxsched/random.hpp"
#include "ctxsched/serialize.hpp"
#include "ctxsched/sorted_set.hpp"
#include "ctxsched/stream.hpp"
#include "ctxsched/sweep.hpp"
#include "ctxsched/trace.hpp"

namespace ctxsched {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ctxsched
