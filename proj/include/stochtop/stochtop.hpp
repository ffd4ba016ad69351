#pragma once

// Umbrella header for the stochastic compliance topology optimization kit.

#include "stochtop/config.hpp"
#include "stochtop/continuation.hpp"
#include "stochtop/errors.hpp"
#include "stochtop/estimators.hpp"
#include "stochtop/fem.hpp"
#include "stochtop/mma.hpp"
#include "stochtop/probing.hpp"
#include "stochtop/runner.hpp"
#include "stochtop/scenarios.hpp"
#include "stochtop/simp.hpp"
#include "stochtop/stats.hpp"
