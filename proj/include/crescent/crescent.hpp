#pragma once

#include "crescent/boundaries.hpp"
#include "crescent/config.hpp"
#include "crescent/errors.hpp"
#include "crescent/experiment.hpp"
#include "crescent/gauss.hpp"
#include "crescent/io.hpp"
#include "crescent/lasso_path.hpp"
#include "crescent/prior.hpp"
#include "crescent/rng.hpp"
#include "crescent/state_evolution.hpp"

namespace crescent {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace crescent
