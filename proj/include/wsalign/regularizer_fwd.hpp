#pragma once

// Forward declaration so engine.hpp can take RegularizerSpec by reference
// without pulling in the full regularizer header.
namespace wsalign {
struct RegularizerSpec;
}
