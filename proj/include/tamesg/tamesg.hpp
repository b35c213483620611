#pragma once

// Umbrella header.

#include "tamesg/core.hpp"
#include "tamesg/rng.hpp"
#include "tamesg/convex_geometry.hpp"
#include "tamesg/schedules.hpp"
#include "tamesg/noise.hpp"
#include "tamesg/function_model.hpp"
#include "tamesg/run_log.hpp"
#include "tamesg/solvers.hpp"
#include "tamesg/inclusion_flow.hpp"
#include "tamesg/network.hpp"
#include "tamesg/testbed.hpp"
#include "tamesg/harness.hpp"
#include "tamesg/config.hpp"
