#pragma once

#include "drtrack/assignment.hpp"
#include "drtrack/association.hpp"
#include "drtrack/geometry.hpp"
#include "drtrack/io.hpp"
#include "drtrack/metrics.hpp"
#include "drtrack/motion.hpp"
#include "drtrack/rewards.hpp"
#include "drtrack/simulator.hpp"
#include "drtrack/tracker.hpp"
