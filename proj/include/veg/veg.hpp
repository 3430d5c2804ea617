#pragma once

// Umbrella header for the library. The CLI front end lives in veg/cli.hpp and
// additionally needs CLI11 and spdlog.

#include "veg/detector.hpp"
#include "veg/dynamics.hpp"
#include "veg/error.hpp"
#include "veg/experiment.hpp"
#include "veg/graph.hpp"
#include "veg/lqr.hpp"
#include "veg/pi2.hpp"
#include "veg/policy.hpp"
#include "veg/quadratize.hpp"
#include "veg/rollout.hpp"
#include "veg/tasks.hpp"
#include "veg/trace.hpp"
#include "veg/trace_io.hpp"
#include "veg/train.hpp"
#include "veg/types.hpp"
#include "veg/world.hpp"
